#pragma once

#include <cstdint>

#include "interlab/dataset.hpp"
#include "interlab/model.hpp"

namespace interlab {

struct TrainConfig {
    std::size_t epochs = 40;
    double learning_rate = 0.1;
    std::size_t batch_size = 32;
    std::uint64_t seed = 1;
};

struct TrainResult {
    Model model;
    double train_accuracy = 0.0;
    double final_loss = 0.0;
};

double accuracy(const Model& m, const Dataset& data);

// Mini-batch SGD on cross-entropy with a fixed learning rate. Deterministic
// in the seed (shuffles come from the library stream, not std::shuffle).
// Throws TrainingError with the epoch index if the loss goes non-finite.
TrainResult train(Model model, const Dataset& data, const TrainConfig& cfg);

}  // namespace interlab

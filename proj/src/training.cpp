#include "interlab/training.hpp"

#include <cmath>

#include "interlab/errors.hpp"
#include "interlab/random.hpp"

namespace interlab {

double accuracy(const Model& m, const Dataset& data) {
    if (data.size() == 0) throw ConfigError("accuracy on an empty dataset");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < data.size(); ++i)
        if (m.predict(data.xs[i]) == data.ys[i]) ++hits;
    return static_cast<double>(hits) / static_cast<double>(data.size());
}

TrainResult train(Model model, const Dataset& data, const TrainConfig& cfg) {
    model.validate();
    data.validate();
    if (data.size() == 0) throw ConfigError("cannot train on an empty dataset");
    if (data.dim() != model.input_dim)
        throw ShapeError("dataset dim " + std::to_string(data.dim()) +
                         " does not match model input " +
                         std::to_string(model.input_dim));
    if (data.num_classes > model.num_classes)
        throw LabelError("dataset has more classes than the model outputs");
    if (cfg.batch_size == 0) throw ConfigError("batch size must be positive");
    if (cfg.learning_rate <= 0) throw ConfigError("learning rate must be positive");

    RandomStream rng(derive_seed(cfg.seed, 0x73676400));
    std::vector<std::size_t> order(data.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    double epoch_loss = 0.0;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            std::size_t end = std::min(order.size(), start + cfg.batch_size);
            std::vector<LayerGrads> grads = zero_grads(model.layers);
            double batch_loss = 0.0;
            for (std::size_t k = start; k < end; ++k)
                batch_loss += accumulate_gradients(model, data.xs[order[k]],
                                                   data.ys[order[k]],
                                                   LossKind::cross_entropy, grads);
            double inv = 1.0 / static_cast<double>(end - start);
            apply_sgd_step(model.layers, grads, cfg.learning_rate * inv);
            epoch_loss += batch_loss;
        }
        epoch_loss /= static_cast<double>(data.size());
        if (!std::isfinite(epoch_loss))
            throw TrainingError("training diverged at epoch " + std::to_string(epoch),
                                epoch);
    }

    TrainResult result{std::move(model), 0.0, epoch_loss};
    result.train_accuracy = accuracy(result.model, data);
    return result;
}

}  // namespace interlab

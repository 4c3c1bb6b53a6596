#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "interlab/analysis.hpp"
#include "interlab/attack.hpp"
#include "interlab/dataset.hpp"
#include "interlab/model.hpp"
#include "interlab/training.hpp"

namespace interlab {

// One model of the experiment zoo.
struct ModelSpec {
    std::string id;
    std::string kind = "mlp";  // "mlp" | "residual"
    std::vector<std::size_t> hidden{16};  // mlp widths
    std::size_t width = 16;               // residual trunk width
    std::size_t blocks = 2;               // residual block count
    Activation activation = Activation::softplus;
    double beta = 10.0;
    std::uint64_t seed = 1;
};

Model build_model(const ModelSpec& spec, std::size_t input_dim,
                  std::size_t num_classes);

struct ReportSpec {
    std::vector<double> c_values{0.05, 0.1, 0.2, 0.4, 0.8, 1.6};
    std::vector<double> p_values{2.0, 5.0};
    std::vector<double> lambdas{0.0, 0.5, 1.0, 2.0};
    std::size_t bootstrap = 1000;
    double tau = 0.0;  // 0 = derive from the pilot-median rule
    double curve_lambda = 1.0;  // objective weight of the pure-reduction run
    // Trend-suite knobs (raster and seeds are filled from the manifest).
    double trend_alpha = 0.01;
    std::size_t trend_steps = 10;
    double trend_sigma = 0.05;
    std::size_t trend_samples = 8;
    std::size_t trend_examples = 50;
    std::size_t trend_grid_side = 4;
    std::size_t curvature_inputs = 2;
    // Adjacency heatmaps: draws per adjacent pair, examples averaged.
    std::size_t heatmap_samples = 64;
    std::size_t heatmap_examples = 4;
};

// The reproducible description of a full experiment. Identical manifests
// (and seeds) produce byte-identical reports.
struct ExperimentManifest {
    std::string experiment_id = "toy-default";
    std::uint64_t seed = 1;
    std::size_t jobs = 1;
    DatasetSpec dataset;
    ModelSpec source;
    std::vector<ModelSpec> targets;
    TrainConfig train;
    AttackConfig attack;
    std::size_t examples = 20;  // attack examples drawn from the test split
    // Estimator used by the measurement stage:
    // "closed-form" | "sampled" | "brute-force".
    std::string estimator = "closed-form";
    ReportSpec report;

    static ExperimentManifest from_json(const std::string& text);
    std::string to_json() const;

    // FNV-1a over the canonical JSON form; embedded in every output file so
    // reports are traceable to their configuration.
    std::string hash_hex() const;
};

// Reads a manifest file; the INTERLAB_SEED environment variable, when set,
// overrides the manifest seed (smoke-test hook).
ExperimentManifest load_manifest(const std::string& path);

}  // namespace interlab

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "interlab/attack.hpp"
#include "interlab/game.hpp"
#include "interlab/model.hpp"
#include "interlab/tensor.hpp"

namespace interlab {

// Margin gain the perturbation produces on a target model:
// [best-rival margin at x + delta] - [best-rival margin at x], both on the
// target's pre-softmax outputs. Exactly zero when delta is zero.
double transfer_utility(const Model& target, const Tensor& x, std::size_t y,
                        const Tensor& delta);

struct PearsonResult {
    double r = 0.0;
    // False when either side has zero variance, which leaves the
    // correlation undefined.
    bool defined = false;
};

PearsonResult pearson(const std::vector<double>& xs,
                      const std::vector<double>& ys);

struct BootstrapInterval {
    double mean = 0.0;
    double lo = 0.0;
    double hi = 0.0;
};

// Percentile bootstrap (2.5% / 97.5%) of the mean, resampling with
// replacement `replicates` times from a seeded stream.
BootstrapInterval bootstrap_mean_ci(const std::vector<double>& values,
                                    std::size_t replicates, std::uint64_t seed);

// Leave-one-out step selection on a success matrix success[example][step]:
// each example picks the step maximizing the mean success of the *other*
// examples (ties to the smallest step). transferability is the mean of each
// example's own success at its selected step.
struct LooSelection {
    std::vector<std::size_t> best_step;  // column index per example
    double transferability = 0.0;
};

LooSelection loo_from_matrix(
    const std::vector<std::vector<std::uint8_t>>& success);

// success[i][k] = 1 iff the target mislabels x_i + (recorded delta k of
// trace i). All traces must share the same recorded step grid.
std::vector<std::vector<std::uint8_t>> success_matrix(
    const Model& target, const std::vector<Tensor>& xs,
    const std::vector<std::size_t>& ys, const std::vector<AttackTrace>& traces);

struct TransferRecord {
    std::size_t example = 0;
    std::size_t chosen_step = 0;  // 1-based attack step (0 = clean)
    double clean_margin = 0.0;
    double perturbed_margin = 0.0;
    double utility = 0.0;  // perturbed_margin - clean_margin
    bool success = false;
};

struct TransferReport {
    std::string source_id;
    std::string target_id;
    std::string tag;  // free-form hyper-parameter note
    std::vector<TransferRecord> records;
    double success_rate = 0.0;  // mean success at the LOO-selected steps

    std::string to_json() const;
};

TransferReport evaluate_transfer(const Model& target,
                                 const std::vector<Tensor>& xs,
                                 const std::vector<std::size_t>& ys,
                                 const std::vector<AttackTrace>& traces,
                                 const std::string& source_id,
                                 const std::string& target_id,
                                 const std::string& tag);

// Mean pairwise interaction (P+2-evaluation closed form, normalized) of the
// grid coalition game induced by (model, x, y, delta).
double measure_grid_interaction(const Model& m, const Tensor& x, std::size_t y,
                                const Tensor& delta, const GridPartition& grid);

// Reproducible stopping threshold for the norm-penalty sweep: the median
// final L2 norm of a projected-ascent pilot run over the examples.
double pilot_tau(const Model& source, const std::vector<Tensor>& xs,
                 const std::vector<std::size_t>& ys, const AttackConfig& base,
                 std::size_t jobs);

struct CorrelationPoint {
    double c = 0.0;        // penalty weight
    double p_relax = 2.0;  // penalty exponent
    double mean_interaction = 0.0;
    std::vector<double> mean_transfer;  // one entry per target
};

struct CorrelationSweepReport {
    double tau = 0.0;
    std::vector<std::string> target_ids;
    std::vector<CorrelationPoint> points;
    std::vector<PearsonResult> target_correlation;  // over points, per target

    std::string to_json() const;
    std::string to_csv() const;  // one row per (point, target)
};

// For every (c, p) pair, drives the norm-penalty attack on each example to
// ||delta||_2 = tau, then records the mean source-grid interaction and the
// mean transfer utility per target; finishes with a Pearson correlation of
// the two across sweep points for each target.
CorrelationSweepReport correlation_sweep(
    const Model& source, const std::vector<Model>& targets,
    const std::vector<std::string>& target_ids, const std::vector<Tensor>& xs,
    const std::vector<std::size_t>& ys, const std::vector<double>& c_values,
    const std::vector<double>& p_values, double tau, const AttackConfig& base,
    std::size_t jobs);

struct LambdaSweepReport {
    std::vector<double> lambdas;
    std::vector<std::string> target_ids;
    // success_rate[lambda][target]: LOO-selected success rate.
    std::vector<std::vector<double>> success_rate;
    // Mean source-grid interaction of the final perturbation per lambda.
    std::vector<double> mean_interaction;

    std::string to_json() const;
    std::string to_csv() const;
};

// Runs the interaction-reduced attack per lambda with identical per-example
// seeds, so the lambda = 0 row is exactly the plain projected-ascent
// baseline.
LambdaSweepReport lambda_sweep(const Model& source,
                               const std::vector<Model>& targets,
                               const std::vector<std::string>& target_ids,
                               const std::vector<Tensor>& xs,
                               const std::vector<std::size_t>& ys,
                               const std::vector<double>& lambdas,
                               const AttackConfig& base, std::size_t jobs);

struct InteractionCurveReport {
    std::vector<std::size_t> epochs;  // 0 (clean), then recorded steps
    std::vector<std::string> target_ids;
    // success_rate[epoch][target]: plain mean success at that epoch.
    std::vector<std::vector<double>> success_rate;
    // LOO-selected transferability per target over all epochs.
    std::vector<double> loo_transferability;
    // Baseline: sign-noise perturbations at the same radius.
    std::vector<double> noise_success;

    std::string to_json() const;
    std::string to_csv() const;
};

// Drives the interaction-only attack and evaluates per-epoch and
// LOO-selected transferability; epoch 0 is the clean error rate.
InteractionCurveReport interaction_only_curve(
    const Model& source, const std::vector<Model>& targets,
    const std::vector<std::string>& target_ids, const std::vector<Tensor>& xs,
    const std::vector<std::size_t>& ys, const AttackConfig& base,
    std::size_t jobs);

// ---------------------------------------------------------------------
// Paired directional trends of grid-level interactions across the attack
// family, with every competitor rescaled to the multi-step perturbation's
// L2 norm before measurement.

struct TrendConfig {
    double alpha = 0.01;
    std::size_t steps = 10;  // m
    double sigma = 0.05;     // smoothing noise scale
    std::size_t smooth_samples = 8;
    std::size_t raster_height = 4;
    std::size_t raster_width = 8;
    std::size_t grid_side = 4;
    LossKind loss = LossKind::margin;
    std::size_t bootstrap_replicates = 1000;
    std::uint64_t seed = 1;
    // How many (model, input) pairs contribute finite-difference curvature
    // histograms (quadratic cost in the input dim).
    std::size_t curvature_inputs = 3;
    std::size_t jobs = 1;
};

// Unprojected theory-form trajectories from one differentiable objective.
// multi accumulates raw gradients; single_step is one gradient scaled by
// alpha * m; noise is Gaussian; momentum uses the running-average schedule
// mu = (t-1)/t; smoothed averages gradients over Gaussian draws. All but
// multi are rescaled to multi's L2 norm.
struct TrajectorySet {
    Tensor multi;
    Tensor single_step;
    Tensor noise;
    Tensor momentum;
    Tensor smoothed;
};

TrajectorySet trend_trajectories(const Objective& obj, std::size_t n,
                                 const TrendConfig& cfg, std::uint64_t seed);

struct TrendComparison {
    std::string name;
    double mean_diff = 0.0;
    BootstrapInterval ci;
    std::size_t pairs = 0;
};

struct TrendReport {
    std::vector<TrendComparison> comparisons;
    // |d2 loss / dx_a dx_b| samples (a != b) from finite differences.
    std::vector<double> hessian_magnitudes;
    double hessian_abs_max = 0.0;
    // g_b H_bb / sum_a g_a H_ab per coordinate b (skipping tiny
    // denominators): diagonal-vs-aggregate curvature share.
    std::vector<double> curvature_ratios;

    std::string to_json() const;
};

// Runs trend_trajectories for every (model, input) pair, measures the
// grid-level mean interaction of each perturbation on its own model, and
// reports paired mean differences with bootstrap intervals:
//   multi_minus_single, multi_minus_noise,
//   smoothed_minus_multi, momentum_minus_multi.
TrendReport trend_suite(const std::vector<Model>& models,
                        const std::vector<Tensor>& xs,
                        const std::vector<std::size_t>& ys,
                        const TrendConfig& cfg);

// Heatmap CSV (row,col,value) for per-cell values on a side x side grid.
std::string heatmap_csv(const std::vector<double>& cell_values,
                        std::size_t side);

}  // namespace interlab

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "interlab/game.hpp"
#include "interlab/model.hpp"
#include "interlab/tensor.hpp"

namespace interlab {

enum class Norm { linf, l2 };

// How a raw gradient becomes a step direction. auto_select resolves to
// sign for linf, normalized for l2, except methods whose definition fixes
// the rule (single and penalty use the raw gradient; momentum with the
// running-average schedule accumulates raw gradients).
enum class StepRule { auto_select, sign, normalized, raw };

enum class MomentumMode { schedule, fixed };

enum class AttackMethod {
    single,            // one gradient at clean x, scaled by alpha * steps
    pgd,               // iterative projected ascent
    momentum,          // gradient accumulator (running-average or fixed mu)
    smoothed,          // pgd on a Gaussian-smoothed gradient estimate
    interaction_reduced,  // pgd objective minus lambda * batch interaction
    penalty,           // relaxed norm-penalty descent with an L2 stop
    interaction_only,  // descends the batch interaction alone
    noise,             // eps * sign(gaussian), no gradients
};

std::string to_string(AttackMethod m);
AttackMethod attack_method_from_string(const std::string& s);
std::string to_string(Norm n);
Norm norm_from_string(const std::string& s);

struct AttackConfig {
    AttackMethod method = AttackMethod::pgd;
    Norm norm = Norm::linf;
    double epsilon = 16.0 / 255.0;  // for l2 runs, scale by sqrt(n) externally
    double alpha = 2.0 / 255.0;
    std::size_t steps = 100;
    LossKind loss = LossKind::cross_entropy;
    StepRule step_rule = StepRule::auto_select;

    // momentum
    MomentumMode mu_mode = MomentumMode::schedule;
    double mu_fixed = 1.0;

    // smoothed gradients
    double smooth_sigma = 0.05;
    std::size_t smooth_samples = 16;

    // interaction term (interaction_reduced / interaction_only)
    double lambda = 0.0;
    std::size_t grid_height = 0;  // raster dims; must multiply to input dim
    std::size_t grid_width = 0;
    std::size_t grid_side = 16;
    std::size_t batches = 32;     // cell batches per step, redrawn each step
    std::size_t batch_size = 32;

    // penalty attack
    double penalty_c = 0.1;
    double penalty_p = 2.0;       // exponent of the relaxed norm term
    double stop_l2 = 1.0;         // tau: stop once ||delta||_2 reaches this
    std::size_t max_steps = 1000;

    std::uint64_t seed = 1;
    std::size_t trace_stride = 1;

    std::string to_json() const;
    static AttackConfig from_json(const std::string& text);
};

struct AttackTrace {
    AttackMethod method = AttackMethod::pgd;
    AttackConfig config;
    // Perturbation after each recorded step; step_index holds the 1-based
    // step number each entry corresponds to (stride sampling may skip).
    std::vector<Tensor> deltas;
    std::vector<std::size_t> step_index;
    // Classification loss at each recorded delta.
    std::vector<double> loss_values;
    // Interaction objective per recorded step, when the method computes one
    // (evaluated at the pre-update iterate the gradient was taken at).
    std::vector<double> interaction_values;
    Tensor final_delta;
    std::size_t steps_taken = 0;
    bool success = false;  // source model misclassifies x + final_delta
    std::string stop_reason = "completed";
};

// Norm-ball projection: per-coordinate clamp to [-eps, eps] for linf;
// rescale onto the sphere iff the L2 norm exceeds eps for l2.
Tensor project(const Tensor& delta, Norm p, double eps);

// Ball projection followed by the box clamp that keeps x + delta inside
// [0,1] coordinate-wise.
Tensor project(const Tensor& delta, Norm p, double eps, const Tensor& x);

// Differentiable objective over the perturbation. Model attacks wrap the
// classification loss; tests drive the same loops with synthetic forms.
struct Objective {
    std::function<double(const Tensor&)> value;
    std::function<Tensor(const Tensor&)> gradient;
};

Objective classification_objective(const Model& m, const Tensor& x, std::size_t y,
                                   LossKind kind);

// The Monte-Carlo batch interaction of the grid game at a fixed draw of
// cell batches: value() is the unnormalized mean four-point bracket, and
// gradient() its exact derivative at the same batches, so central
// differences of value() validate gradient(). Batches are determined by
// the seed alone.
class InteractionObjective {
public:
    InteractionObjective(const Model& m, const Tensor& x, std::size_t y,
                         const GridPartition& grid, std::size_t batches,
                         std::size_t batch_size, std::uint64_t seed);

    double value(const Tensor& delta) const;
    Tensor gradient(const Tensor& delta) const;
    const std::vector<std::vector<std::size_t>>& batch_cells() const {
        return batches_;
    }

private:
    double masked_margin(const Tensor& delta,
                         const std::vector<std::uint8_t>& mask_pixels) const;

    const Model* model_;
    Tensor x_;
    std::size_t y_;
    std::vector<std::vector<std::size_t>> cells_;
    std::vector<std::vector<std::size_t>> batches_;  // cell indices per batch
    std::size_t n_;
};

AttackTrace attack_single(const Model& m, const Tensor& x, std::size_t y,
                          const AttackConfig& cfg);
AttackTrace attack_pgd(const Model& m, const Tensor& x, std::size_t y,
                       const AttackConfig& cfg);
AttackTrace attack_momentum(const Model& m, const Tensor& x, std::size_t y,
                            const AttackConfig& cfg);
AttackTrace attack_smoothed(const Model& m, const Tensor& x, std::size_t y,
                            const AttackConfig& cfg);
AttackTrace attack_interaction_reduced(const Model& m, const Tensor& x,
                                       std::size_t y, const AttackConfig& cfg);
AttackTrace attack_penalty(const Model& m, const Tensor& x, std::size_t y,
                           const AttackConfig& cfg);
AttackTrace attack_interaction_only(const Model& m, const Tensor& x,
                                    std::size_t y, const AttackConfig& cfg);
AttackTrace attack_noise(const Model& m, const Tensor& x, std::size_t y,
                         const AttackConfig& cfg);

// Dispatch on cfg.method.
AttackTrace run_attack(const Model& m, const Tensor& x, std::size_t y,
                       const AttackConfig& cfg);

// Iterative ascent of an arbitrary objective: delta += alpha * dir(grad),
// projected onto the eps ball (skipped when eps is infinite) and, when
// box_anchor is given, box-clamped against it. Used by the trend suite to
// run the theory-form (unprojected raw) trajectories and by synthetic
// oracle tests. momentum_mode engages the running-average accumulator.
AttackTrace ascend_objective(const Objective& obj, std::size_t n,
                             const AttackConfig& cfg,
                             const Tensor* box_anchor,
                             bool momentum_mode = false);

// Trace persistence: metadata as JSON, per-step deltas as a little-endian
// f64 blob whose header records the input dim and step count.
void save_trace(const AttackTrace& t, const std::string& json_path,
                const std::string& blob_path);
AttackTrace load_trace(const std::string& json_path);

}  // namespace interlab

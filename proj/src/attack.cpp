#include "interlab/attack.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "interlab/errors.hpp"
#include "interlab/model_io.hpp"
#include "interlab/random.hpp"

namespace interlab {

using nlohmann::json;

namespace {

constexpr std::uint64_t kTagSmoothed = 0x736d6f6f;
constexpr std::uint64_t kTagInteraction = 0x696e7472;
constexpr std::uint64_t kTagNoise = 0x6e6f6973;
constexpr std::uint64_t kTagBatch = 0x62746368;

StepRule resolve_rule(const AttackConfig& cfg, AttackMethod method) {
    if (cfg.step_rule != StepRule::auto_select) return cfg.step_rule;
    if (method == AttackMethod::momentum && cfg.mu_mode == MomentumMode::schedule)
        return StepRule::raw;
    return cfg.norm == Norm::linf ? StepRule::sign : StepRule::normalized;
}

Tensor step_direction(const Tensor& g, StepRule rule) {
    switch (rule) {
        case StepRule::raw:
            return g;
        case StepRule::sign: {
            Tensor d = g;
            for (double& v : d.data) v = v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0);
            return d;
        }
        case StepRule::normalized: {
            double norm = l2_norm(g);
            if (norm == 0.0) return g;
            return scale(g, 1.0 / norm);
        }
        case StepRule::auto_select:
            break;
    }
    throw ConfigError("step rule was not resolved before stepping");
}

void check_unit_box(const Tensor& x) {
    for (double v : x.data)
        if (!(v >= 0.0 && v <= 1.0))
            throw ConfigError("attack input must lie inside the unit box");
}

void validate_base(const Model& m, const Tensor& x, std::size_t y,
                   const AttackConfig& cfg) {
    m.validate();
    if (x.numel() != m.input_dim)
        throw ShapeError("attack input size does not match model input");
    if (y >= m.num_classes) throw LabelError("attack label out of range");
    check_unit_box(x);
    if (!(cfg.epsilon > 0.0))
        throw ConfigError("epsilon must be positive");
    if (!(cfg.alpha > 0.0)) throw ConfigError("alpha must be positive");
    if (cfg.steps == 0) throw ConfigError("steps must be >= 1");
    if (cfg.trace_stride == 0) throw ConfigError("trace stride must be >= 1");
}

GridPartition validate_grid(const AttackConfig& cfg, std::size_t n) {
    if (cfg.grid_height * cfg.grid_width != n)
        throw ConfigError("grid raster " + std::to_string(cfg.grid_height) + "x" +
                          std::to_string(cfg.grid_width) +
                          " does not match input dim " + std::to_string(n));
    GridPartition grid(cfg.grid_height, cfg.grid_width, cfg.grid_side);
    if (cfg.batches == 0) throw ConfigError("interaction term needs batches >= 1");
    if (cfg.batch_size == 0 || cfg.batch_size > grid.cell_count())
        throw ConfigError("batch size must lie in [1, cell count]");
    return grid;
}

struct TraceBuilder {
    AttackTrace trace;
    std::size_t stride = 1;
    std::size_t total = 0;

    void record(std::size_t step, const Tensor& delta, double loss_value,
                bool has_inter, double inter) {
        if (step % stride != 0 && step != total) return;
        trace.deltas.push_back(delta);
        trace.step_index.push_back(step);
        trace.loss_values.push_back(loss_value);
        if (has_inter) trace.interaction_values.push_back(inter);
    }
};

void finish(AttackTrace& trace, const Model& m, const Tensor& x, std::size_t y,
            const Tensor& delta, std::size_t steps_taken,
            const std::string& reason) {
    trace.final_delta = delta;
    trace.steps_taken = steps_taken;
    trace.stop_reason = reason;
    trace.success = m.predict(add(x, delta)) != y;
}

// One loop body shared by every ball-projected iterative method, so the
// lambda=0 and sigma->0 reductions are structural rather than accidental.
AttackTrace iterate_projected(const Model& m, const Tensor& x, std::size_t y,
                              const AttackConfig& cfg, AttackMethod method) {
    std::size_t n = x.numel();
    Objective cls = classification_objective(m, x, y, cfg.loss);
    StepRule rule = resolve_rule(cfg, method);

    bool wants_interaction = method == AttackMethod::interaction_reduced ||
                             method == AttackMethod::interaction_only;
    GridPartition grid;
    if (wants_interaction) grid = validate_grid(cfg, n);
    bool uses_interaction =
        method == AttackMethod::interaction_only ||
        (method == AttackMethod::interaction_reduced && cfg.lambda > 0.0);

    if (method == AttackMethod::smoothed) {
        if (!(cfg.smooth_sigma > 0.0))
            throw ConfigError("smoothing sigma must be positive");
        if (cfg.smooth_samples == 0)
            throw ConfigError("smoothing needs at least one sample");
    }
    if (method == AttackMethod::interaction_only && !(cfg.lambda > 0.0))
        throw ConfigError("interaction-only attack needs lambda > 0");
    if (cfg.lambda < 0.0) throw ConfigError("lambda must be nonnegative");

    TraceBuilder tb;
    tb.trace.method = method;
    tb.trace.config = cfg;
    tb.stride = cfg.trace_stride;
    tb.total = cfg.steps;

    Tensor delta = Tensor::zeros(n);
    Tensor acc = Tensor::zeros(n);

    for (std::size_t t = 1; t <= cfg.steps; ++t) {
        Tensor g;
        bool has_inter = false;
        double inter = 0.0;
        switch (method) {
            case AttackMethod::pgd:
            case AttackMethod::interaction_reduced: {
                g = cls.gradient(delta);
                if (uses_interaction) {
                    InteractionObjective io(m, x, y, grid, cfg.batches,
                                            cfg.batch_size,
                                            derive_seed(cfg.seed, kTagInteraction, t));
                    inter = io.value(delta);
                    has_inter = true;
                    g = sub(g, scale(io.gradient(delta), cfg.lambda));
                }
                break;
            }
            case AttackMethod::interaction_only: {
                InteractionObjective io(m, x, y, grid, cfg.batches, cfg.batch_size,
                                        derive_seed(cfg.seed, kTagInteraction, t));
                inter = io.value(delta);
                has_inter = true;
                g = scale(io.gradient(delta), -cfg.lambda);
                break;
            }
            case AttackMethod::momentum: {
                Tensor raw = cls.gradient(delta);
                if (cfg.mu_mode == MomentumMode::schedule) {
                    double mu = (static_cast<double>(t) - 1.0) / static_cast<double>(t);
                    acc = add(scale(acc, mu), scale(raw, 1.0 - mu));
                } else {
                    double l1 = 0.0;
                    for (double v : raw.data) l1 += std::fabs(v);
                    Tensor unit = l1 > 0.0 ? scale(raw, 1.0 / l1) : raw;
                    acc = add(scale(acc, cfg.mu_fixed), unit);
                }
                g = acc;
                break;
            }
            case AttackMethod::smoothed: {
                RandomStream rng(derive_seed(cfg.seed, kTagSmoothed, t));
                Tensor sum = Tensor::zeros(n);
                for (std::size_t s = 0; s < cfg.smooth_samples; ++s) {
                    Tensor shifted = delta;
                    for (double& v : shifted.data)
                        v += cfg.smooth_sigma * rng.normal();
                    sum = add(sum, cls.gradient(shifted));
                }
                g = scale(sum, 1.0 / static_cast<double>(cfg.smooth_samples));
                break;
            }
            default:
                throw ConfigError("iterate_projected got a non-iterative method");
        }
        delta = project(add(delta, scale(step_direction(g, rule), cfg.alpha)),
                        cfg.norm, cfg.epsilon, x);
        tb.record(t, delta, cls.value(delta), has_inter, inter);
    }

    AttackTrace trace = std::move(tb.trace);
    finish(trace, m, x, y, delta, cfg.steps, "completed");
    return trace;
}

}  // namespace

std::string to_string(AttackMethod m) {
    switch (m) {
        case AttackMethod::single: return "single";
        case AttackMethod::pgd: return "pgd";
        case AttackMethod::momentum: return "momentum";
        case AttackMethod::smoothed: return "smoothed";
        case AttackMethod::interaction_reduced: return "interaction-reduced";
        case AttackMethod::penalty: return "penalty";
        case AttackMethod::interaction_only: return "interaction-only";
        case AttackMethod::noise: return "noise";
    }
    return "unknown";
}

AttackMethod attack_method_from_string(const std::string& s) {
    if (s == "single") return AttackMethod::single;
    if (s == "pgd") return AttackMethod::pgd;
    if (s == "momentum") return AttackMethod::momentum;
    if (s == "smoothed") return AttackMethod::smoothed;
    if (s == "interaction-reduced") return AttackMethod::interaction_reduced;
    if (s == "penalty") return AttackMethod::penalty;
    if (s == "interaction-only") return AttackMethod::interaction_only;
    if (s == "noise") return AttackMethod::noise;
    throw ConfigError("unknown attack method: " + s);
}

std::string to_string(Norm n) { return n == Norm::linf ? "linf" : "l2"; }

Norm norm_from_string(const std::string& s) {
    if (s == "linf") return Norm::linf;
    if (s == "l2") return Norm::l2;
    throw ConfigError("unknown norm: " + s);
}

namespace {

std::string step_rule_to_string(StepRule r) {
    switch (r) {
        case StepRule::auto_select: return "auto";
        case StepRule::sign: return "sign";
        case StepRule::normalized: return "normalized";
        case StepRule::raw: return "raw";
    }
    return "auto";
}

StepRule step_rule_from_string(const std::string& s) {
    if (s == "auto") return StepRule::auto_select;
    if (s == "sign") return StepRule::sign;
    if (s == "normalized") return StepRule::normalized;
    if (s == "raw") return StepRule::raw;
    throw ConfigError("unknown step rule: " + s);
}

}  // namespace

std::string AttackConfig::to_json() const {
    json j;
    j["method"] = interlab::to_string(method);
    j["norm"] = interlab::to_string(norm);
    j["epsilon"] = epsilon;
    j["alpha"] = alpha;
    j["steps"] = steps;
    j["loss"] = interlab::to_string(loss);
    j["step_rule"] = step_rule_to_string(step_rule);
    j["mu_mode"] = mu_mode == MomentumMode::schedule ? "schedule" : "fixed";
    j["mu_fixed"] = mu_fixed;
    j["smooth_sigma"] = smooth_sigma;
    j["smooth_samples"] = smooth_samples;
    j["lambda"] = lambda;
    j["grid_height"] = grid_height;
    j["grid_width"] = grid_width;
    j["grid_side"] = grid_side;
    j["batches"] = batches;
    j["batch_size"] = batch_size;
    j["penalty_c"] = penalty_c;
    j["penalty_p"] = penalty_p;
    j["stop_l2"] = stop_l2;
    j["max_steps"] = max_steps;
    j["seed"] = seed;
    j["trace_stride"] = trace_stride;
    return j.dump();
}

AttackConfig AttackConfig::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw MalformedFileError(std::string("attack config is not valid JSON: ") +
                                 e.what());
    }
    AttackConfig c;
    try {
        if (j.contains("method"))
            c.method = attack_method_from_string(j.at("method").get<std::string>());
        if (j.contains("norm"))
            c.norm = norm_from_string(j.at("norm").get<std::string>());
        c.epsilon = j.value("epsilon", c.epsilon);
        c.alpha = j.value("alpha", c.alpha);
        c.steps = j.value("steps", c.steps);
        if (j.contains("loss"))
            c.loss = loss_kind_from_string(j.at("loss").get<std::string>());
        if (j.contains("step_rule"))
            c.step_rule = step_rule_from_string(j.at("step_rule").get<std::string>());
        if (j.contains("mu_mode")) {
            std::string m = j.at("mu_mode").get<std::string>();
            if (m == "schedule")
                c.mu_mode = MomentumMode::schedule;
            else if (m == "fixed")
                c.mu_mode = MomentumMode::fixed;
            else
                throw ConfigError("unknown mu mode: " + m);
        }
        c.mu_fixed = j.value("mu_fixed", c.mu_fixed);
        c.smooth_sigma = j.value("smooth_sigma", c.smooth_sigma);
        c.smooth_samples = j.value("smooth_samples", c.smooth_samples);
        c.lambda = j.value("lambda", c.lambda);
        c.grid_height = j.value("grid_height", c.grid_height);
        c.grid_width = j.value("grid_width", c.grid_width);
        c.grid_side = j.value("grid_side", c.grid_side);
        c.batches = j.value("batches", c.batches);
        c.batch_size = j.value("batch_size", c.batch_size);
        c.penalty_c = j.value("penalty_c", c.penalty_c);
        c.penalty_p = j.value("penalty_p", c.penalty_p);
        c.stop_l2 = j.value("stop_l2", c.stop_l2);
        c.max_steps = j.value("max_steps", c.max_steps);
        c.seed = j.value("seed", c.seed);
        c.trace_stride = j.value("trace_stride", c.trace_stride);
    } catch (const json::exception& e) {
        throw MalformedFileError(std::string("attack config field error: ") +
                                 e.what());
    }
    return c;
}

Tensor project(const Tensor& delta, Norm p, double eps) {
    if (!(eps > 0.0)) throw ConfigError("projection epsilon must be positive");
    if (std::isinf(eps)) return delta;
    if (p == Norm::linf) {
        Tensor out = delta;
        for (double& v : out.data) v = std::clamp(v, -eps, eps);
        return out;
    }
    double norm = l2_norm(delta);
    if (norm <= eps) return delta;
    return scale(delta, eps / norm);
}

Tensor project(const Tensor& delta, Norm p, double eps, const Tensor& x) {
    Tensor out = project(delta, p, eps);
    if (!same_shape(out, x)) throw ShapeError("projection anchor shape mismatch");
    for (std::size_t i = 0; i < out.numel(); ++i)
        out.data[i] = std::clamp(out.data[i], -x.data[i], 1.0 - x.data[i]);
    return out;
}

Objective classification_objective(const Model& m, const Tensor& x, std::size_t y,
                                   LossKind kind) {
    return Objective{
        [&m, x, y, kind](const Tensor& delta) {
            return loss(m, add(x, delta), y, kind);
        },
        [&m, x, y, kind](const Tensor& delta) {
            return input_gradient(m, add(x, delta), y, kind);
        },
    };
}

InteractionObjective::InteractionObjective(const Model& m, const Tensor& x,
                                           std::size_t y, const GridPartition& grid,
                                           std::size_t batches,
                                           std::size_t batch_size,
                                           std::uint64_t seed)
    : model_(&m), x_(x), y_(y), n_(x_.numel()) {
    m.validate();
    if (x_.numel() != m.input_dim)
        throw ShapeError("interaction objective input size mismatch");
    if (y_ >= m.num_classes) throw LabelError("interaction objective label range");
    if (grid.height * grid.width != n_)
        throw ConfigError("grid raster does not match input dim");
    cells_ = grid.cells();
    std::size_t p = cells_.size();
    if (batches == 0) throw ConfigError("interaction objective needs batches >= 1");
    if (batch_size == 0 || batch_size > p)
        throw ConfigError("batch size must lie in [1, cell count]");
    for (std::size_t k = 0; k < batches; ++k) {
        RandomStream rng(derive_seed(seed, kTagBatch, k));
        batches_.push_back(rng.sample_without_replacement(p, batch_size));
    }
}

double InteractionObjective::masked_margin(
    const Tensor& delta, const std::vector<std::uint8_t>& mask_pixels) const {
    std::vector<double> u = x_.data;
    for (std::size_t i = 0; i < n_; ++i)
        if (mask_pixels[i]) u[i] += delta.data[i];
    return loss_from_logits(model_->forward_raw(u), y_, LossKind::margin);
}

double InteractionObjective::value(const Tensor& delta) const {
    if (delta.numel() != n_)
        throw ShapeError("interaction objective delta size mismatch");
    std::vector<std::uint8_t> mask(n_, 1);
    double v_full = masked_margin(delta, mask);
    std::fill(mask.begin(), mask.end(), 0);
    double v_empty = masked_margin(delta, mask);

    std::vector<std::uint8_t> in_batch(cells_.size(), 0);
    double total = 0.0;
    for (const auto& batch : batches_) {
        std::fill(in_batch.begin(), in_batch.end(), 0);
        for (std::size_t c : batch) in_batch[c] = 1;
        std::fill(mask.begin(), mask.end(), 0);
        for (std::size_t c = 0; c < cells_.size(); ++c)
            if (!in_batch[c])
                for (std::size_t px : cells_[c]) mask[px] = 1;
        double v_minus = masked_margin(delta, mask);
        std::fill(mask.begin(), mask.end(), 0);
        for (std::size_t c : batch)
            for (std::size_t px : cells_[c]) mask[px] = 1;
        double v_batch = masked_margin(delta, mask);
        total += (v_full + v_empty) - (v_minus + v_batch);
    }
    return total / static_cast<double>(batches_.size());
}

Tensor InteractionObjective::gradient(const Tensor& delta) const {
    if (delta.numel() != n_)
        throw ShapeError("interaction objective delta size mismatch");
    auto margin_grad_masked = [&](const std::vector<std::uint8_t>& mask_pixels) {
        Tensor u = x_;
        for (std::size_t i = 0; i < n_; ++i)
            if (mask_pixels[i]) u.data[i] += delta.data[i];
        Tensor g = input_gradient(*model_, u, y_, LossKind::margin);
        for (std::size_t i = 0; i < n_; ++i)
            if (!mask_pixels[i]) g.data[i] = 0.0;
        return g;
    };

    std::vector<std::uint8_t> mask(n_, 1);
    // v(full): every pixel carries delta, so the chain rule keeps the whole
    // gradient. v(empty) contributes nothing.
    Tensor total = margin_grad_masked(mask);
    total = scale(total, static_cast<double>(batches_.size()));

    std::vector<std::uint8_t> in_batch(cells_.size(), 0);
    for (const auto& batch : batches_) {
        std::fill(in_batch.begin(), in_batch.end(), 0);
        for (std::size_t c : batch) in_batch[c] = 1;
        std::fill(mask.begin(), mask.end(), 0);
        for (std::size_t c = 0; c < cells_.size(); ++c)
            if (!in_batch[c])
                for (std::size_t px : cells_[c]) mask[px] = 1;
        total = sub(total, margin_grad_masked(mask));
        std::fill(mask.begin(), mask.end(), 0);
        for (std::size_t c : batch)
            for (std::size_t px : cells_[c]) mask[px] = 1;
        total = sub(total, margin_grad_masked(mask));
    }
    return scale(total, 1.0 / static_cast<double>(batches_.size()));
}

AttackTrace attack_single(const Model& m, const Tensor& x, std::size_t y,
                          const AttackConfig& cfg) {
    validate_base(m, x, y, cfg);
    Objective cls = classification_objective(m, x, y, cfg.loss);
    Tensor g = cls.gradient(Tensor::zeros(x.numel()));
    Tensor delta =
        project(scale(g, cfg.alpha * static_cast<double>(cfg.steps)), cfg.norm,
                cfg.epsilon, x);
    AttackTrace trace;
    trace.method = AttackMethod::single;
    trace.config = cfg;
    trace.deltas.push_back(delta);
    trace.step_index.push_back(1);
    trace.loss_values.push_back(cls.value(delta));
    finish(trace, m, x, y, delta, 1, "completed");
    return trace;
}

AttackTrace attack_pgd(const Model& m, const Tensor& x, std::size_t y,
                       const AttackConfig& cfg) {
    validate_base(m, x, y, cfg);
    return iterate_projected(m, x, y, cfg, AttackMethod::pgd);
}

AttackTrace attack_momentum(const Model& m, const Tensor& x, std::size_t y,
                            const AttackConfig& cfg) {
    validate_base(m, x, y, cfg);
    return iterate_projected(m, x, y, cfg, AttackMethod::momentum);
}

AttackTrace attack_smoothed(const Model& m, const Tensor& x, std::size_t y,
                            const AttackConfig& cfg) {
    validate_base(m, x, y, cfg);
    return iterate_projected(m, x, y, cfg, AttackMethod::smoothed);
}

AttackTrace attack_interaction_reduced(const Model& m, const Tensor& x,
                                       std::size_t y, const AttackConfig& cfg) {
    validate_base(m, x, y, cfg);
    return iterate_projected(m, x, y, cfg, AttackMethod::interaction_reduced);
}

AttackTrace attack_interaction_only(const Model& m, const Tensor& x, std::size_t y,
                                    const AttackConfig& cfg) {
    validate_base(m, x, y, cfg);
    return iterate_projected(m, x, y, cfg, AttackMethod::interaction_only);
}

AttackTrace attack_penalty(const Model& m, const Tensor& x, std::size_t y,
                           const AttackConfig& cfg) {
    validate_base(m, x, y, cfg);
    if (cfg.penalty_p < 1.0) throw ConfigError("penalty exponent must be >= 1");
    if (cfg.penalty_c < 0.0) throw ConfigError("penalty weight must be >= 0");
    if (!(cfg.stop_l2 > 0.0)) throw ConfigError("stop threshold must be positive");
    if (cfg.max_steps == 0) throw ConfigError("max steps must be >= 1");

    std::size_t n = x.numel();
    Objective cls = classification_objective(m, x, y, cfg.loss);

    TraceBuilder tb;
    tb.trace.method = AttackMethod::penalty;
    tb.trace.config = cfg;
    tb.stride = cfg.trace_stride;
    tb.total = cfg.max_steps;

    Tensor delta = Tensor::zeros(n);
    std::size_t taken = 0;
    std::string reason = "max-steps";
    for (std::size_t t = 1; t <= cfg.max_steps; ++t) {
        Tensor g = cls.gradient(delta);
        // Ascend loss minus c * sum |d_i|^p: subtract the penalty gradient.
        for (std::size_t i = 0; i < n; ++i) {
            double d = delta.data[i];
            double mag = std::fabs(d);
            double pen = cfg.penalty_c * cfg.penalty_p *
                         (cfg.penalty_p == 2.0 ? mag
                                               : std::pow(mag, cfg.penalty_p - 1.0));
            g.data[i] -= pen * (d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0));
        }
        delta = add(delta, scale(g, cfg.alpha));
        for (std::size_t i = 0; i < n; ++i)
            delta.data[i] = std::clamp(delta.data[i], -x.data[i], 1.0 - x.data[i]);
        taken = t;
        tb.record(t, delta, cls.value(delta), false, 0.0);
        if (l2_norm(delta) >= cfg.stop_l2) {
            reason = "reached-threshold";
            break;
        }
    }
    // Make sure the last iterate is recorded even if the stop hit between
    // stride points.
    if (tb.trace.step_index.empty() || tb.trace.step_index.back() != taken) {
        tb.trace.deltas.push_back(delta);
        tb.trace.step_index.push_back(taken);
        tb.trace.loss_values.push_back(cls.value(delta));
    }

    AttackTrace trace = std::move(tb.trace);
    finish(trace, m, x, y, delta, taken, reason);
    return trace;
}

AttackTrace attack_noise(const Model& m, const Tensor& x, std::size_t y,
                         const AttackConfig& cfg) {
    validate_base(m, x, y, cfg);
    if (!(cfg.smooth_sigma > 0.0))
        throw ConfigError("noise sigma must be positive");
    RandomStream rng(derive_seed(cfg.seed, kTagNoise));
    Tensor delta = Tensor::zeros(x.numel());
    for (double& v : delta.data) {
        double xi = cfg.smooth_sigma * rng.normal();
        v = cfg.epsilon * (xi > 0 ? 1.0 : (xi < 0 ? -1.0 : 0.0));
    }
    for (std::size_t i = 0; i < delta.numel(); ++i)
        delta.data[i] = std::clamp(delta.data[i], -x.data[i], 1.0 - x.data[i]);

    AttackTrace trace;
    trace.method = AttackMethod::noise;
    trace.config = cfg;
    trace.deltas.push_back(delta);
    trace.step_index.push_back(1);
    trace.loss_values.push_back(loss(m, add(x, delta), y, cfg.loss));
    finish(trace, m, x, y, delta, 1, "completed");
    return trace;
}

AttackTrace run_attack(const Model& m, const Tensor& x, std::size_t y,
                       const AttackConfig& cfg) {
    switch (cfg.method) {
        case AttackMethod::single: return attack_single(m, x, y, cfg);
        case AttackMethod::pgd: return attack_pgd(m, x, y, cfg);
        case AttackMethod::momentum: return attack_momentum(m, x, y, cfg);
        case AttackMethod::smoothed: return attack_smoothed(m, x, y, cfg);
        case AttackMethod::interaction_reduced:
            return attack_interaction_reduced(m, x, y, cfg);
        case AttackMethod::penalty: return attack_penalty(m, x, y, cfg);
        case AttackMethod::interaction_only:
            return attack_interaction_only(m, x, y, cfg);
        case AttackMethod::noise: return attack_noise(m, x, y, cfg);
    }
    throw ConfigError("unknown attack method");
}

AttackTrace ascend_objective(const Objective& obj, std::size_t n,
                             const AttackConfig& cfg, const Tensor* box_anchor,
                             bool momentum_mode) {
    if (!(cfg.alpha > 0.0)) throw ConfigError("alpha must be positive");
    if (cfg.steps == 0) throw ConfigError("steps must be >= 1");
    StepRule rule = cfg.step_rule == StepRule::auto_select ? StepRule::raw
                                                           : cfg.step_rule;
    TraceBuilder tb;
    tb.trace.method = momentum_mode ? AttackMethod::momentum : AttackMethod::pgd;
    tb.trace.config = cfg;
    tb.stride = cfg.trace_stride;
    tb.total = cfg.steps;

    Tensor delta = Tensor::zeros(n);
    Tensor acc = Tensor::zeros(n);
    for (std::size_t t = 1; t <= cfg.steps; ++t) {
        Tensor g = obj.gradient(delta);
        if (momentum_mode) {
            double mu = (static_cast<double>(t) - 1.0) / static_cast<double>(t);
            acc = add(scale(acc, mu), scale(g, 1.0 - mu));
            g = acc;
        }
        delta = add(delta, scale(step_direction(g, rule), cfg.alpha));
        if (std::isfinite(cfg.epsilon)) delta = project(delta, cfg.norm, cfg.epsilon);
        if (box_anchor) {
            for (std::size_t i = 0; i < n; ++i)
                delta.data[i] = std::clamp(delta.data[i], -box_anchor->data[i],
                                           1.0 - box_anchor->data[i]);
        }
        tb.record(t, delta, obj.value(delta), false, 0.0);
    }
    AttackTrace trace = std::move(tb.trace);
    trace.final_delta = delta;
    trace.steps_taken = cfg.steps;
    trace.stop_reason = "completed";
    return trace;
}

namespace {

constexpr char kBlobMagic[4] = {'I', 'L', 'T', 'R'};
constexpr std::uint32_t kBlobVersion = 1;

}  // namespace

void save_trace(const AttackTrace& t, const std::string& json_path,
                const std::string& blob_path) {
    json j;
    j["method"] = to_string(t.method);
    j["config"] = json::parse(t.config.to_json());
    j["step_index"] = t.step_index;
    j["loss_values"] = t.loss_values;
    j["interaction_values"] = t.interaction_values;
    j["final_delta"] = t.final_delta.data;
    j["input_dim"] = t.final_delta.numel();
    j["steps_taken"] = t.steps_taken;
    j["success"] = t.success;
    j["stop_reason"] = t.stop_reason;
    j["delta_blob"] = std::filesystem::path(blob_path).filename().string();

    {
        std::ofstream f(blob_path, std::ios::binary);
        if (!f) throw IoError("cannot write " + blob_path);
        f.write(kBlobMagic, 4);
        std::uint32_t version = kBlobVersion;
        f.write(reinterpret_cast<const char*>(&version), 4);
        std::uint64_t n = t.final_delta.numel();
        std::uint64_t count = t.deltas.size();
        f.write(reinterpret_cast<const char*>(&n), 8);
        f.write(reinterpret_cast<const char*>(&count), 8);
        for (const Tensor& d : t.deltas) {
            if (d.numel() != n) throw ShapeError("trace deltas disagree on size");
            f.write(reinterpret_cast<const char*>(d.data.data()),
                    static_cast<std::streamsize>(n * sizeof(double)));
        }
        if (!f) throw IoError("short write to " + blob_path);
    }

    std::ofstream f(json_path);
    if (!f) throw IoError("cannot write " + json_path);
    f << j.dump(2) << "\n";
}

AttackTrace load_trace(const std::string& json_path) {
    std::ifstream f(json_path);
    if (!f) throw IoError("cannot open " + json_path);
    json j;
    try {
        f >> j;
    } catch (const json::exception& e) {
        throw MalformedFileError(std::string("trace file is not valid JSON: ") +
                                 e.what());
    }
    AttackTrace t;
    try {
        t.method = attack_method_from_string(j.at("method").get<std::string>());
        t.config = AttackConfig::from_json(j.at("config").dump());
        t.step_index = j.at("step_index").get<std::vector<std::size_t>>();
        t.loss_values = j.at("loss_values").get<std::vector<double>>();
        t.interaction_values =
            j.value("interaction_values", std::vector<double>{});
        t.final_delta = Tensor::flat(j.at("final_delta").get<std::vector<double>>());
        t.steps_taken = j.at("steps_taken").get<std::size_t>();
        t.success = j.at("success").get<bool>();
        t.stop_reason = j.at("stop_reason").get<std::string>();

        std::filesystem::path blob =
            std::filesystem::path(json_path).parent_path() /
            j.at("delta_blob").get<std::string>();
        std::ifstream bf(blob, std::ios::binary);
        if (!bf) throw IoError("cannot open " + blob.string());
        char magic[4];
        bf.read(magic, 4);
        if (!bf || std::memcmp(magic, kBlobMagic, 4) != 0)
            throw FormatError("trace blob has a bad magic");
        std::uint32_t version = 0;
        bf.read(reinterpret_cast<char*>(&version), 4);
        if (version != kBlobVersion)
            throw FormatError("unsupported trace blob version");
        std::uint64_t n = 0, count = 0;
        bf.read(reinterpret_cast<char*>(&n), 8);
        bf.read(reinterpret_cast<char*>(&count), 8);
        if (!bf) throw MalformedFileError("trace blob header truncated");
        for (std::uint64_t k = 0; k < count; ++k) {
            Tensor d = Tensor::zeros(n);
            bf.read(reinterpret_cast<char*>(d.data.data()),
                    static_cast<std::streamsize>(n * sizeof(double)));
            if (!bf) throw MalformedFileError("trace blob truncated at step " +
                                              std::to_string(k));
            t.deltas.push_back(std::move(d));
        }
    } catch (const json::exception& e) {
        throw MalformedFileError(std::string("trace file missing fields: ") +
                                 e.what());
    }
    return t;
}

}  // namespace interlab

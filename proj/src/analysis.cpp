#include "interlab/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include <json.hpp>

#include "interlab/errors.hpp"
#include "interlab/interaction.hpp"
#include "interlab/parallel.hpp"
#include "interlab/random.hpp"

namespace interlab {

using nlohmann::json;

namespace {

constexpr std::uint64_t kTagPair = 0x70616972;
constexpr std::uint64_t kTagBoot = 0x626f6f74;
constexpr std::uint64_t kTagNoise = 0x6e6f6973;
constexpr std::uint64_t kTagSmooth = 0x736d6f6f;
constexpr std::uint64_t kTagExample = 0x6578616d;

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

double mean_of(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) /
           static_cast<double>(v.size());
}

double margin_at(const Model& m, const Tensor& x, std::size_t y) {
    return loss_from_logits(m.forward_raw(x.data), y, LossKind::margin);
}

void check_examples(const std::vector<Tensor>& xs,
                    const std::vector<std::size_t>& ys, std::size_t input_dim,
                    std::size_t num_classes) {
    if (xs.empty()) throw ConfigError("need at least one example");
    if (xs.size() != ys.size())
        throw ShapeError("inputs and labels disagree in length");
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (xs[i].numel() != input_dim)
            throw ShapeError("example " + std::to_string(i) +
                             " does not match the model input dim");
        if (ys[i] >= num_classes)
            throw LabelError("label out of range at example " +
                             std::to_string(i));
    }
}

double quantile_sorted(const std::vector<double>& sorted, double q) {
    if (sorted.size() == 1) return sorted[0];
    double pos = q * static_cast<double>(sorted.size() - 1);
    std::size_t lo = static_cast<std::size_t>(pos);
    if (lo + 1 >= sorted.size()) return sorted.back();
    double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

GridPartition grid_from_config(const AttackConfig& base, std::size_t n) {
    if (base.grid_height * base.grid_width != n)
        throw ConfigError("grid raster does not match the example dimension");
    return GridPartition(base.grid_height, base.grid_width, base.grid_side);
}

}  // namespace

double transfer_utility(const Model& target, const Tensor& x, std::size_t y,
                        const Tensor& delta) {
    target.validate();
    if (x.numel() != target.input_dim)
        throw ShapeError("transfer input does not match the target input dim");
    if (!same_shape(x, delta))
        throw ShapeError("perturbation shape does not match the input");
    if (y >= target.num_classes)
        throw LabelError("transfer label out of range");
    return margin_at(target, add(x, delta), y) - margin_at(target, x, y);
}

PearsonResult pearson(const std::vector<double>& xs,
                      const std::vector<double>& ys) {
    if (xs.size() != ys.size())
        throw ShapeError("correlation inputs disagree in length");
    if (xs.size() < 2) throw ConfigError("correlation needs >= 2 points");
    double mx = mean_of(xs), my = mean_of(ys);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        double dx = xs[i] - mx, dy = ys[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    PearsonResult out;
    if (sxx == 0.0 || syy == 0.0) return out;  // undefined
    out.r = sxy / std::sqrt(sxx * syy);
    out.defined = true;
    return out;
}

BootstrapInterval bootstrap_mean_ci(const std::vector<double>& values,
                                    std::size_t replicates,
                                    std::uint64_t seed) {
    if (values.empty()) throw ConfigError("bootstrap needs values");
    if (replicates == 0) throw ConfigError("bootstrap needs replicates");
    std::size_t n = values.size();
    RandomStream rng(seed);
    std::vector<double> means(replicates);
    for (std::size_t b = 0; b < replicates; ++b) {
        double sum = 0.0;
        for (std::size_t k = 0; k < n; ++k)
            sum += values[rng.uniform_int(n)];
        means[b] = sum / static_cast<double>(n);
    }
    std::sort(means.begin(), means.end());
    BootstrapInterval out;
    out.mean = mean_of(values);
    out.lo = quantile_sorted(means, 0.025);
    out.hi = quantile_sorted(means, 0.975);
    return out;
}

LooSelection loo_from_matrix(
    const std::vector<std::vector<std::uint8_t>>& success) {
    std::size_t n = success.size();
    if (n < 2) throw ConfigError("leave-one-out needs >= 2 examples");
    std::size_t steps = success[0].size();
    if (steps == 0) throw ConfigError("leave-one-out needs >= 1 step");
    for (const auto& row : success)
        if (row.size() != steps)
            throw ShapeError("success matrix rows disagree in length");

    std::vector<std::size_t> col_sum(steps, 0);
    for (const auto& row : success)
        for (std::size_t t = 0; t < steps; ++t) col_sum[t] += row[t];

    LooSelection out;
    out.best_step.resize(n);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t best = 0;
        std::size_t best_sum = col_sum[0] - success[i][0];
        for (std::size_t t = 1; t < steps; ++t) {
            std::size_t s = col_sum[t] - success[i][t];
            if (s > best_sum) {
                best_sum = s;
                best = t;
            }
        }
        out.best_step[i] = best;
        hits += success[i][best];
    }
    out.transferability = static_cast<double>(hits) / static_cast<double>(n);
    return out;
}

std::vector<std::vector<std::uint8_t>> success_matrix(
    const Model& target, const std::vector<Tensor>& xs,
    const std::vector<std::size_t>& ys,
    const std::vector<AttackTrace>& traces) {
    target.validate();
    check_examples(xs, ys, target.input_dim, target.num_classes);
    if (traces.size() != xs.size())
        throw ShapeError("one trace per example is required");
    const auto& steps = traces[0].step_index;
    if (steps.empty()) throw ConfigError("traces have no recorded steps");
    for (const auto& t : traces)
        if (t.step_index != steps)
            throw ConfigError("traces disagree on the recorded step grid");

    std::vector<std::vector<std::uint8_t>> out(
        xs.size(), std::vector<std::uint8_t>(steps.size(), 0));
    for (std::size_t i = 0; i < xs.size(); ++i) {
        for (std::size_t k = 0; k < steps.size(); ++k) {
            if (traces[i].deltas[k].numel() != xs[i].numel())
                throw ShapeError("trace delta does not match the example");
            out[i][k] =
                target.predict(add(xs[i], traces[i].deltas[k])) != ys[i] ? 1 : 0;
        }
    }
    return out;
}

TransferReport evaluate_transfer(const Model& target,
                                 const std::vector<Tensor>& xs,
                                 const std::vector<std::size_t>& ys,
                                 const std::vector<AttackTrace>& traces,
                                 const std::string& source_id,
                                 const std::string& target_id,
                                 const std::string& tag) {
    auto matrix = success_matrix(target, xs, ys, traces);
    LooSelection loo = loo_from_matrix(matrix);

    TransferReport report;
    report.source_id = source_id;
    report.target_id = target_id;
    report.tag = tag;
    report.success_rate = loo.transferability;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        std::size_t col = loo.best_step[i];
        TransferRecord rec;
        rec.example = i;
        rec.chosen_step = traces[i].step_index[col];
        rec.clean_margin = margin_at(target, xs[i], ys[i]);
        rec.perturbed_margin =
            margin_at(target, add(xs[i], traces[i].deltas[col]), ys[i]);
        rec.utility = rec.perturbed_margin - rec.clean_margin;
        rec.success = matrix[i][col] != 0;
        report.records.push_back(rec);
    }
    return report;
}

std::string TransferReport::to_json() const {
    json j;
    j["source_id"] = source_id;
    j["target_id"] = target_id;
    j["tag"] = tag;
    j["success_rate"] = success_rate;
    j["records"] = json::array();
    for (const auto& r : records) {
        json e;
        e["example"] = r.example;
        e["chosen_step"] = r.chosen_step;
        e["clean_margin"] = r.clean_margin;
        e["perturbed_margin"] = r.perturbed_margin;
        e["transfer_utility"] = r.utility;
        e["success"] = r.success;
        j["records"].push_back(e);
    }
    return j.dump(2);
}

double measure_grid_interaction(const Model& m, const Tensor& x, std::size_t y,
                                const Tensor& delta,
                                const GridPartition& grid) {
    CoalitionGame game(m, x, delta, grid.cells(), y);
    return mean_interaction_closed_form(game).mean_interaction;
}

double pilot_tau(const Model& source, const std::vector<Tensor>& xs,
                 const std::vector<std::size_t>& ys, const AttackConfig& base,
                 std::size_t jobs) {
    source.validate();
    check_examples(xs, ys, source.input_dim, source.num_classes);
    std::vector<double> norms(xs.size());
    parallel_for(xs.size(), jobs, [&](std::size_t i) {
        AttackConfig cfg = base;
        cfg.method = AttackMethod::pgd;
        cfg.trace_stride = cfg.steps;
        cfg.seed = derive_seed(base.seed, kTagExample, i);
        norms[i] = l2_norm(attack_pgd(source, xs[i], ys[i], cfg).final_delta);
    });
    std::sort(norms.begin(), norms.end());
    std::size_t n = norms.size();
    return n % 2 == 1 ? norms[n / 2]
                      : 0.5 * (norms[n / 2 - 1] + norms[n / 2]);
}

CorrelationSweepReport correlation_sweep(
    const Model& source, const std::vector<Model>& targets,
    const std::vector<std::string>& target_ids, const std::vector<Tensor>& xs,
    const std::vector<std::size_t>& ys, const std::vector<double>& c_values,
    const std::vector<double>& p_values, double tau, const AttackConfig& base,
    std::size_t jobs) {
    source.validate();
    check_examples(xs, ys, source.input_dim, source.num_classes);
    if (targets.empty()) throw ConfigError("sweep needs at least one target");
    if (target_ids.size() != targets.size())
        throw ShapeError("one id per target model is required");
    for (const Model& t : targets) t.validate();
    if (c_values.size() * p_values.size() < 3)
        throw ConfigError("sweep needs at least 3 (c, p) points");
    if (!(tau > 0.0)) throw ConfigError("tau must be positive");
    GridPartition grid = grid_from_config(base, xs[0].numel());

    CorrelationSweepReport report;
    report.tau = tau;
    report.target_ids = target_ids;

    for (double c : c_values) {
        for (double p : p_values) {
            std::vector<double> inter(xs.size());
            std::vector<std::vector<double>> util(
                targets.size(), std::vector<double>(xs.size()));
            parallel_for(xs.size(), jobs, [&](std::size_t i) {
                AttackConfig cfg = base;
                cfg.method = AttackMethod::penalty;
                cfg.penalty_c = c;
                cfg.penalty_p = p;
                cfg.stop_l2 = tau;
                cfg.trace_stride = cfg.max_steps;
                cfg.seed = derive_seed(base.seed, kTagExample, i);
                Tensor delta =
                    attack_penalty(source, xs[i], ys[i], cfg).final_delta;
                inter[i] =
                    measure_grid_interaction(source, xs[i], ys[i], delta, grid);
                for (std::size_t t = 0; t < targets.size(); ++t)
                    util[t][i] = transfer_utility(targets[t], xs[i], ys[i], delta);
            });
            CorrelationPoint point;
            point.c = c;
            point.p_relax = p;
            point.mean_interaction = mean_of(inter);
            for (const auto& u : util) point.mean_transfer.push_back(mean_of(u));
            report.points.push_back(std::move(point));
        }
    }

    std::vector<double> inter_axis;
    for (const auto& pt : report.points)
        inter_axis.push_back(pt.mean_interaction);
    for (std::size_t t = 0; t < targets.size(); ++t) {
        std::vector<double> transfer_axis;
        for (const auto& pt : report.points)
            transfer_axis.push_back(pt.mean_transfer[t]);
        report.target_correlation.push_back(pearson(inter_axis, transfer_axis));
    }
    return report;
}

std::string CorrelationSweepReport::to_json() const {
    json j;
    j["tau"] = tau;
    j["target_ids"] = target_ids;
    j["points"] = json::array();
    for (const auto& pt : points) {
        json e;
        e["c"] = pt.c;
        e["p_relax"] = pt.p_relax;
        e["mean_interaction"] = pt.mean_interaction;
        e["mean_transfer"] = pt.mean_transfer;
        j["points"].push_back(e);
    }
    j["target_correlation"] = json::array();
    for (const auto& r : target_correlation) {
        json e;
        e["r"] = r.r;
        e["defined"] = r.defined;
        j["target_correlation"].push_back(e);
    }
    return j.dump(2);
}

std::string CorrelationSweepReport::to_csv() const {
    std::string out = "c,p_relax,target,mean_interaction,mean_transfer\n";
    for (const auto& pt : points)
        for (std::size_t t = 0; t < target_ids.size(); ++t)
            out += fmt(pt.c) + "," + fmt(pt.p_relax) + "," + target_ids[t] +
                   "," + fmt(pt.mean_interaction) + "," +
                   fmt(pt.mean_transfer[t]) + "\n";
    return out;
}

LambdaSweepReport lambda_sweep(const Model& source,
                               const std::vector<Model>& targets,
                               const std::vector<std::string>& target_ids,
                               const std::vector<Tensor>& xs,
                               const std::vector<std::size_t>& ys,
                               const std::vector<double>& lambdas,
                               const AttackConfig& base, std::size_t jobs) {
    source.validate();
    check_examples(xs, ys, source.input_dim, source.num_classes);
    if (targets.empty()) throw ConfigError("sweep needs at least one target");
    if (target_ids.size() != targets.size())
        throw ShapeError("one id per target model is required");
    for (const Model& t : targets) t.validate();
    if (std::find(lambdas.begin(), lambdas.end(), 0.0) == lambdas.end())
        throw ConfigError("lambda sweep must include the 0 baseline");
    GridPartition grid = grid_from_config(base, xs[0].numel());

    LambdaSweepReport report;
    report.lambdas = lambdas;
    report.target_ids = target_ids;

    for (double lambda : lambdas) {
        std::vector<AttackTrace> traces(xs.size());
        std::vector<double> inter(xs.size());
        parallel_for(xs.size(), jobs, [&](std::size_t i) {
            AttackConfig cfg = base;
            cfg.method = AttackMethod::interaction_reduced;
            cfg.lambda = lambda;
            cfg.seed = derive_seed(base.seed, kTagExample, i);
            traces[i] = attack_interaction_reduced(source, xs[i], ys[i], cfg);
            inter[i] = measure_grid_interaction(source, xs[i], ys[i],
                                                traces[i].final_delta, grid);
        });
        std::vector<double> rates;
        for (const Model& target : targets)
            rates.push_back(
                loo_from_matrix(success_matrix(target, xs, ys, traces))
                    .transferability);
        report.success_rate.push_back(std::move(rates));
        report.mean_interaction.push_back(mean_of(inter));
    }
    return report;
}

std::string LambdaSweepReport::to_json() const {
    json j;
    j["lambdas"] = lambdas;
    j["target_ids"] = target_ids;
    j["success_rate"] = success_rate;
    j["mean_interaction"] = mean_interaction;
    return j.dump(2);
}

std::string LambdaSweepReport::to_csv() const {
    std::string out = "lambda,target,success_rate,mean_interaction\n";
    for (std::size_t l = 0; l < lambdas.size(); ++l)
        for (std::size_t t = 0; t < target_ids.size(); ++t)
            out += fmt(lambdas[l]) + "," + target_ids[t] + "," +
                   fmt(success_rate[l][t]) + "," + fmt(mean_interaction[l]) +
                   "\n";
    return out;
}

InteractionCurveReport interaction_only_curve(
    const Model& source, const std::vector<Model>& targets,
    const std::vector<std::string>& target_ids, const std::vector<Tensor>& xs,
    const std::vector<std::size_t>& ys, const AttackConfig& base,
    std::size_t jobs) {
    source.validate();
    check_examples(xs, ys, source.input_dim, source.num_classes);
    if (targets.empty()) throw ConfigError("curve needs at least one target");
    if (target_ids.size() != targets.size())
        throw ShapeError("one id per target model is required");
    for (const Model& t : targets) t.validate();
    if (!(base.lambda > 0.0))
        throw ConfigError("interaction-only curve needs lambda > 0");

    std::vector<AttackTrace> traces(xs.size());
    parallel_for(xs.size(), jobs, [&](std::size_t i) {
        AttackConfig cfg = base;
        cfg.method = AttackMethod::interaction_only;
        cfg.seed = derive_seed(base.seed, kTagExample, i);
        traces[i] = attack_interaction_only(source, xs[i], ys[i], cfg);
    });

    InteractionCurveReport report;
    report.target_ids = target_ids;
    report.epochs.push_back(0);
    for (std::size_t s : traces[0].step_index) report.epochs.push_back(s);

    for (std::size_t t = 0; t < targets.size(); ++t) {
        auto matrix = success_matrix(targets[t], xs, ys, traces);
        // Prepend the clean column (epoch 0: delta = 0).
        std::vector<std::vector<std::uint8_t>> full(xs.size());
        std::size_t clean_hits = 0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            std::uint8_t clean =
                targets[t].predict(xs[i]) != ys[i] ? 1 : 0;
            clean_hits += clean;
            full[i].push_back(clean);
            full[i].insert(full[i].end(), matrix[i].begin(), matrix[i].end());
        }
        if (t == 0) {
            report.success_rate.assign(report.epochs.size(),
                                       std::vector<double>(targets.size(), 0.0));
        }
        for (std::size_t e = 0; e < report.epochs.size(); ++e) {
            std::size_t hits = 0;
            for (std::size_t i = 0; i < xs.size(); ++i) hits += full[i][e];
            report.success_rate[e][t] =
                static_cast<double>(hits) / static_cast<double>(xs.size());
        }
        report.loo_transferability.push_back(
            loo_from_matrix(full).transferability);

        std::size_t noise_hits = 0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            AttackConfig cfg = base;
            cfg.method = AttackMethod::noise;
            cfg.seed = derive_seed(base.seed, kTagNoise, i);
            AttackTrace noise = attack_noise(source, xs[i], ys[i], cfg);
            noise_hits +=
                targets[t].predict(add(xs[i], noise.final_delta)) != ys[i] ? 1
                                                                           : 0;
        }
        report.noise_success.push_back(static_cast<double>(noise_hits) /
                                       static_cast<double>(xs.size()));
    }
    return report;
}

std::string InteractionCurveReport::to_json() const {
    json j;
    j["epochs"] = epochs;
    j["target_ids"] = target_ids;
    j["success_rate"] = success_rate;
    j["loo_transferability"] = loo_transferability;
    j["noise_success"] = noise_success;
    return j.dump(2);
}

std::string InteractionCurveReport::to_csv() const {
    std::string out = "epoch,target,success_rate,noise_success\n";
    for (std::size_t e = 0; e < epochs.size(); ++e)
        for (std::size_t t = 0; t < target_ids.size(); ++t)
            out += std::to_string(epochs[e]) + "," + target_ids[t] + "," +
                   fmt(success_rate[e][t]) + "," + fmt(noise_success[t]) + "\n";
    return out;
}

TrajectorySet trend_trajectories(const Objective& obj, std::size_t n,
                                 const TrendConfig& cfg, std::uint64_t seed) {
    if (!(cfg.alpha > 0.0)) throw ConfigError("alpha must be positive");
    if (cfg.steps == 0) throw ConfigError("steps must be >= 1");
    if (cfg.smooth_samples == 0)
        throw ConfigError("smoothing needs at least one sample");
    if (!(cfg.sigma > 0.0)) throw ConfigError("sigma must be positive");

    TrajectorySet set;

    Tensor delta = Tensor::zeros(n);
    for (std::size_t t = 1; t <= cfg.steps; ++t)
        delta = add(delta, scale(obj.gradient(delta), cfg.alpha));
    set.multi = delta;
    double target_norm = l2_norm(set.multi);

    set.single_step = rescale_to_l2(
        scale(obj.gradient(Tensor::zeros(n)),
              cfg.alpha * static_cast<double>(cfg.steps)),
        target_norm);

    RandomStream noise_rng(derive_seed(seed, kTagNoise));
    Tensor noise = Tensor::zeros(n);
    for (double& v : noise.data) v = noise_rng.normal();
    set.noise = rescale_to_l2(noise, target_norm);

    delta = Tensor::zeros(n);
    Tensor acc = Tensor::zeros(n);
    for (std::size_t t = 1; t <= cfg.steps; ++t) {
        double mu = (static_cast<double>(t) - 1.0) / static_cast<double>(t);
        acc = add(scale(acc, mu), scale(obj.gradient(delta), 1.0 - mu));
        delta = add(delta, scale(acc, cfg.alpha));
    }
    set.momentum = rescale_to_l2(delta, target_norm);

    delta = Tensor::zeros(n);
    for (std::size_t t = 1; t <= cfg.steps; ++t) {
        RandomStream rng(derive_seed(seed, kTagSmooth, t));
        Tensor sum = Tensor::zeros(n);
        for (std::size_t s = 0; s < cfg.smooth_samples; ++s) {
            Tensor shifted = delta;
            for (double& v : shifted.data) v += cfg.sigma * rng.normal();
            sum = add(sum, obj.gradient(shifted));
        }
        delta = add(delta,
                    scale(sum, cfg.alpha / static_cast<double>(cfg.smooth_samples)));
    }
    set.smoothed = rescale_to_l2(delta, target_norm);

    return set;
}

TrendReport trend_suite(const std::vector<Model>& models,
                        const std::vector<Tensor>& xs,
                        const std::vector<std::size_t>& ys,
                        const TrendConfig& cfg) {
    if (models.empty()) throw ConfigError("trend suite needs models");
    if (xs.empty() || xs.size() != ys.size())
        throw ShapeError("trend suite needs matching inputs and labels");
    std::size_t n = cfg.raster_height * cfg.raster_width;
    for (const Model& m : models) {
        m.validate();
        if (m.input_dim != n)
            throw ShapeError("model input dim does not match the raster");
        if (m.has_relu())
            throw UnsupportedError(
                "trend suite needs twice-differentiable activations");
    }
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (xs[i].numel() != n)
            throw ShapeError("example does not match the raster");
        for (const Model& m : models)
            if (ys[i] >= m.num_classes)
                throw LabelError("label out of range for a trend model");
    }
    GridPartition grid(cfg.raster_height, cfg.raster_width, cfg.grid_side);

    std::size_t pairs = models.size() * xs.size();
    std::vector<double> multi_minus_single(pairs), multi_minus_noise(pairs),
        smoothed_minus_multi(pairs), momentum_minus_multi(pairs);

    parallel_for(pairs, cfg.jobs, [&](std::size_t q) {
        std::size_t k = q / xs.size();
        std::size_t i = q % xs.size();
        const Model& m = models[k];
        Objective obj = classification_objective(m, xs[i], ys[i], cfg.loss);
        TrajectorySet set =
            trend_trajectories(obj, n, cfg, derive_seed(cfg.seed, kTagPair, q));
        auto measure = [&](const Tensor& delta) {
            return measure_grid_interaction(m, xs[i], ys[i], delta, grid);
        };
        double multi = measure(set.multi);
        multi_minus_single[q] = multi - measure(set.single_step);
        multi_minus_noise[q] = multi - measure(set.noise);
        smoothed_minus_multi[q] = measure(set.smoothed) - multi;
        momentum_minus_multi[q] = measure(set.momentum) - multi;
    });

    TrendReport report;
    auto push = [&](const std::string& name, const std::vector<double>& diffs,
                    std::uint64_t index) {
        TrendComparison cmp;
        cmp.name = name;
        cmp.pairs = diffs.size();
        cmp.ci = bootstrap_mean_ci(diffs, cfg.bootstrap_replicates,
                                   derive_seed(cfg.seed, kTagBoot, index));
        cmp.mean_diff = cmp.ci.mean;
        report.comparisons.push_back(std::move(cmp));
    };
    push("multi_minus_single", multi_minus_single, 0);
    push("multi_minus_noise", multi_minus_noise, 1);
    push("smoothed_minus_multi", smoothed_minus_multi, 2);
    push("momentum_minus_multi", momentum_minus_multi, 3);

    std::size_t probes = std::min(cfg.curvature_inputs, pairs);
    for (std::size_t q = 0; q < probes; ++q) {
        std::size_t k = q / xs.size();
        std::size_t i = q % xs.size();
        const Model& m = models[k];
        std::vector<std::pair<std::size_t, std::size_t>> idx;
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t b = a; b < n; ++b) idx.emplace_back(a, b);
        std::vector<double> vals = hessian_probe(m, xs[i], ys[i], cfg.loss, idx);
        std::vector<std::vector<double>> hess(n, std::vector<double>(n, 0.0));
        for (std::size_t e = 0; e < idx.size(); ++e) {
            hess[idx[e].first][idx[e].second] = vals[e];
            hess[idx[e].second][idx[e].first] = vals[e];
        }
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t b = a + 1; b < n; ++b) {
                double v = std::fabs(hess[a][b]);
                report.hessian_magnitudes.push_back(v);
                report.hessian_abs_max = std::max(report.hessian_abs_max, v);
            }
        Tensor g = input_gradient(m, xs[i], ys[i], cfg.loss);
        for (std::size_t b = 0; b < n; ++b) {
            double denom = 0.0;
            for (std::size_t a = 0; a < n; ++a)
                denom += g.data[a] * hess[a][b];
            if (std::fabs(denom) < 1e-12) continue;
            report.curvature_ratios.push_back(g.data[b] * hess[b][b] / denom);
        }
    }
    return report;
}

std::string TrendReport::to_json() const {
    json j;
    j["comparisons"] = json::array();
    for (const auto& c : comparisons) {
        json e;
        e["name"] = c.name;
        e["mean_diff"] = c.mean_diff;
        e["ci_lo"] = c.ci.lo;
        e["ci_hi"] = c.ci.hi;
        e["pairs"] = c.pairs;
        j["comparisons"].push_back(e);
    }
    j["hessian_magnitudes"] = hessian_magnitudes;
    j["hessian_abs_max"] = hessian_abs_max;
    j["curvature_ratios"] = curvature_ratios;
    return j.dump(2);
}

std::string heatmap_csv(const std::vector<double>& cell_values,
                        std::size_t side) {
    if (cell_values.size() != side * side)
        throw ShapeError("cell values do not fill a side x side grid");
    std::string out = "row,col,value\n";
    for (std::size_t r = 0; r < side; ++r)
        for (std::size_t c = 0; c < side; ++c)
            out += std::to_string(r) + "," + std::to_string(c) + "," +
                   fmt(cell_values[r * side + c]) + "\n";
    return out;
}

}  // namespace interlab

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "interlab/analysis.hpp"
#include "interlab/attack.hpp"
#include "interlab/errors.hpp"
#include "interlab/model.hpp"
#include "interlab/random.hpp"
#include "interlab/tensor.hpp"

using namespace interlab;

namespace {

Model small_net(std::uint64_t seed = 7) {
    return make_mlp(32, {12}, 3, Activation::softplus, 10.0, seed);
}

std::vector<Tensor> some_inputs(std::size_t count, std::size_t n,
                                std::uint64_t seed = 4) {
    RandomStream rng(seed);
    std::vector<Tensor> xs;
    for (std::size_t i = 0; i < count; ++i) {
        Tensor x = Tensor::zeros(n);
        for (double& v : x.data) v = 0.2 + 0.6 * rng.uniform();
        xs.push_back(std::move(x));
    }
    return xs;
}

std::vector<std::size_t> some_labels(std::size_t count, std::size_t classes,
                                     std::uint64_t seed = 9) {
    RandomStream rng(seed);
    std::vector<std::size_t> ys;
    for (std::size_t i = 0; i < count; ++i)
        ys.push_back(static_cast<std::size_t>(rng.uniform_int(classes)));
    return ys;
}

// Mean over ordered pairs a != b of d_a H_ab d_b.
double quad_pairwise_mean(const Tensor& d,
                          const std::vector<std::vector<double>>& hess) {
    std::size_t n = d.numel();
    double total = 0.0;
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < n; ++b)
            if (a != b) total += d.data[a] * hess[a][b] * d.data[b];
    return total / (static_cast<double>(n) * static_cast<double>(n - 1));
}

}  // namespace

TEST_CASE("transfer utility vanishes at zero perturbation") {
    Model m = small_net();
    auto xs = some_inputs(3, 32);
    for (const Tensor& x : xs)
        CHECK(transfer_utility(m, x, 1, Tensor::zeros(32)) == 0.0);
}

TEST_CASE("transfer utility has the linear closed form on a linear target") {
    Model m = make_mlp(6, {}, 2, Activation::softplus, 10.0, 3);
    Tensor x = Tensor::zeros(6);
    for (double& v : x.data) v = 0.5;
    Tensor delta = Tensor::flat({0.02, -0.01, 0.03, 0.0, -0.02, 0.01});
    // Two classes: the rival of y = 0 is class 1 at every point, so the
    // utility telescopes to (w_1 - w_0) . delta.
    const Layer& dense = m.layers[0];
    double expected = 0.0;
    for (std::size_t i = 0; i < 6; ++i)
        expected += (dense.weights[6 + i] - dense.weights[i]) * delta.data[i];
    CHECK(transfer_utility(m, x, 0, delta) ==
          doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("white-box transfer utility of an ascent attack is positive") {
    Model m = small_net();
    Tensor x = some_inputs(1, 32)[0];
    AttackConfig cfg;
    cfg.steps = 10;
    cfg.loss = LossKind::margin;
    AttackTrace t = attack_pgd(m, x, 0, cfg);
    CHECK(transfer_utility(m, x, 0, t.final_delta) > 0.0);
}

TEST_CASE("transfer utility validates shapes and labels") {
    Model m = small_net();
    Tensor x = some_inputs(1, 32)[0];
    CHECK_THROWS_AS(transfer_utility(m, x, 9, Tensor::zeros(32)), LabelError);
    CHECK_THROWS_AS(transfer_utility(m, x, 0, Tensor::zeros(5)), ShapeError);
    CHECK_THROWS_AS(transfer_utility(m, Tensor::zeros(5), 0, Tensor::zeros(5)),
                    ShapeError);
}

TEST_CASE("pearson matches a two-pass textbook oracle") {
    RandomStream rng(31);
    for (int trial = 0; trial < 20; ++trial) {
        std::size_t n = 12;
        std::vector<double> xs(n), ys(n);
        for (std::size_t i = 0; i < n; ++i) {
            xs[i] = rng.uniform(-3.0, 3.0);
            ys[i] = 0.7 * xs[i] + rng.uniform(-1.0, 1.0);
        }
        double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
        for (std::size_t i = 0; i < n; ++i) {
            sx += xs[i];
            sy += ys[i];
            sxx += xs[i] * xs[i];
            syy += ys[i] * ys[i];
            sxy += xs[i] * ys[i];
        }
        double nn = static_cast<double>(n);
        double oracle = (sxy - sx * sy / nn) /
                        std::sqrt((sxx - sx * sx / nn) * (syy - sy * sy / nn));
        PearsonResult r = pearson(xs, ys);
        REQUIRE(r.defined);
        CHECK(r.r == doctest::Approx(oracle).epsilon(1e-12));
    }
}

TEST_CASE("pearson flags degenerate variance and nails exact lines") {
    std::vector<double> flat{2.0, 2.0, 2.0};
    std::vector<double> rise{1.0, 2.0, 3.0};
    CHECK_FALSE(pearson(flat, rise).defined);
    CHECK_FALSE(pearson(rise, flat).defined);

    std::vector<double> anti{-1.0, -2.0, -3.0};
    PearsonResult r = pearson(rise, anti);
    REQUIRE(r.defined);
    CHECK(r.r == doctest::Approx(-1.0).epsilon(1e-15));
    CHECK(pearson(rise, rise).r == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("bootstrap interval is deterministic and brackets the mean") {
    RandomStream rng(8);
    std::vector<double> values;
    for (int i = 0; i < 60; ++i) values.push_back(rng.normal() + 0.4);
    BootstrapInterval a = bootstrap_mean_ci(values, 500, 77);
    BootstrapInterval b = bootstrap_mean_ci(values, 500, 77);
    CHECK(a.lo == b.lo);
    CHECK(a.hi == b.hi);
    CHECK(a.lo <= a.mean);
    CHECK(a.mean <= a.hi);

    std::vector<double> constant(10, 3.25);
    BootstrapInterval c = bootstrap_mean_ci(constant, 200, 1);
    CHECK(c.lo == 3.25);
    CHECK(c.hi == 3.25);
    CHECK(c.mean == 3.25);
}

TEST_CASE("leave-one-out selection matches a brute-force double loop") {
    RandomStream rng(55);
    for (int trial = 0; trial < 30; ++trial) {
        std::size_t n = 5, steps = 4;
        std::vector<std::vector<std::uint8_t>> s(
            n, std::vector<std::uint8_t>(steps));
        for (auto& row : s)
            for (auto& v : row) v = rng.uniform() < 0.5 ? 1 : 0;
        LooSelection got = loo_from_matrix(s);
        std::size_t hits = 0;
        for (std::size_t i = 0; i < n; ++i) {
            double best_mean = -1.0;
            std::size_t best = 0;
            for (std::size_t t = 0; t < steps; ++t) {
                double sum = 0.0;
                for (std::size_t j = 0; j < n; ++j)
                    if (j != i) sum += s[j][t];
                double mean = sum / static_cast<double>(n - 1);
                if (mean > best_mean + 1e-12) {
                    best_mean = mean;
                    best = t;
                }
            }
            CHECK(got.best_step[i] == best);
            hits += s[i][best];
        }
        CHECK(got.transferability ==
              doctest::Approx(static_cast<double>(hits) / 5.0).epsilon(1e-15));
    }
}

TEST_CASE("leave-one-out tie-break picks the earliest step") {
    std::vector<std::vector<std::uint8_t>> s(4, std::vector<std::uint8_t>(3, 1));
    LooSelection got = loo_from_matrix(s);
    for (std::size_t b : got.best_step) CHECK(b == 0);
    CHECK(got.transferability == 1.0);
}

TEST_CASE("leave-one-out is invariant to example ordering") {
    RandomStream rng(14);
    std::size_t n = 6, steps = 5;
    std::vector<std::vector<std::uint8_t>> s(n,
                                             std::vector<std::uint8_t>(steps));
    for (auto& row : s)
        for (auto& v : row) v = rng.uniform() < 0.4 ? 1 : 0;
    LooSelection base = loo_from_matrix(s);

    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    std::vector<std::vector<std::uint8_t>> shuffled(n);
    for (std::size_t i = 0; i < n; ++i) shuffled[i] = s[perm[i]];
    LooSelection moved = loo_from_matrix(shuffled);
    CHECK(moved.transferability == base.transferability);
    for (std::size_t i = 0; i < n; ++i)
        CHECK(moved.best_step[i] == base.best_step[perm[i]]);
}

TEST_CASE("leave-one-out rejects degenerate input") {
    CHECK_THROWS_AS(loo_from_matrix({{1, 0}}), ConfigError);
    CHECK_THROWS_AS(loo_from_matrix({{1, 0}, {1}}), ShapeError);
}

TEST_CASE("success matrix and transfer report agree with direct evaluation") {
    Model source = small_net(2);
    Model target = small_net(100);
    auto xs = some_inputs(3, 32);
    auto ys = some_labels(3, 3);
    AttackConfig cfg;
    cfg.steps = 3;
    std::vector<AttackTrace> traces;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        cfg.seed = 10 + i;
        traces.push_back(attack_pgd(source, xs[i], ys[i], cfg));
    }
    auto matrix = success_matrix(target, xs, ys, traces);
    for (std::size_t i = 0; i < xs.size(); ++i)
        for (std::size_t k = 0; k < 3; ++k)
            CHECK(matrix[i][k] ==
                  (target.predict(add(xs[i], traces[i].deltas[k])) != ys[i]
                       ? 1
                       : 0));

    TransferReport report =
        evaluate_transfer(target, xs, ys, traces, "src", "tgt", "steps=3");
    CHECK(report.records.size() == 3);
    LooSelection loo = loo_from_matrix(matrix);
    CHECK(report.success_rate == loo.transferability);
    for (std::size_t i = 0; i < 3; ++i) {
        const TransferRecord& r = report.records[i];
        CHECK(r.utility == r.perturbed_margin - r.clean_margin);
        CHECK(r.chosen_step == traces[i].step_index[loo.best_step[i]]);
    }
    CHECK(report.to_json().find("transfer_utility") != std::string::npos);
}

TEST_CASE("success matrix rejects mismatched step grids") {
    Model source = small_net(2);
    auto xs = some_inputs(2, 32);
    std::vector<std::size_t> ys{0, 1};
    AttackConfig cfg;
    cfg.steps = 3;
    std::vector<AttackTrace> traces;
    traces.push_back(attack_pgd(source, xs[0], ys[0], cfg));
    cfg.steps = 4;
    traces.push_back(attack_pgd(source, xs[1], ys[1], cfg));
    CHECK_THROWS_AS(success_matrix(source, xs, ys, traces), ConfigError);
}

TEST_CASE("grid interaction of a zero perturbation is exactly zero") {
    Model m = small_net();
    Tensor x = some_inputs(1, 32)[0];
    GridPartition grid(4, 8, 4);
    CHECK(measure_grid_interaction(m, x, 1, Tensor::zeros(32), grid) == 0.0);
}

TEST_CASE("pilot tau is a median and independent of jobs") {
    Model m = small_net();
    auto xs = some_inputs(5, 32);
    auto ys = some_labels(5, 3);
    AttackConfig base;
    base.steps = 4;
    double tau1 = pilot_tau(m, xs, ys, base, 1);
    double tau3 = pilot_tau(m, xs, ys, base, 3);
    CHECK(tau1 == tau3);

    CHECK(tau1 > 0.0);
    CHECK(tau1 <= base.epsilon * std::sqrt(32.0) + 1e-12);  // eps ball bound
}

TEST_CASE("correlation sweep is deterministic and shaped correctly") {
    Model source = small_net(3);
    std::vector<Model> targets{small_net(101), small_net(102)};
    std::vector<std::string> ids{"t0", "t1"};
    auto xs = some_inputs(4, 32);
    auto ys = some_labels(4, 3);
    AttackConfig base;
    base.grid_height = 4;
    base.grid_width = 8;
    base.grid_side = 4;
    base.alpha = 0.02;
    base.max_steps = 60;
    std::vector<double> cs{0.25, 0.5, 1.0};
    std::vector<double> ps{2.0};

    auto r1 = correlation_sweep(source, targets, ids, xs, ys, cs, ps, 0.15,
                                base, 1);
    auto r2 = correlation_sweep(source, targets, ids, xs, ys, cs, ps, 0.15,
                                base, 2);
    CHECK(r1.to_json() == r2.to_json());
    REQUIRE(r1.points.size() == 3);
    for (const auto& pt : r1.points) {
        CHECK(pt.mean_transfer.size() == 2);
        CHECK(std::isfinite(pt.mean_interaction));
    }
    CHECK(r1.target_correlation.size() == 2);
    CHECK(r1.to_csv().find("c,p_relax,target") == 0);

    CHECK_THROWS_AS(correlation_sweep(source, targets, ids, xs, ys, {0.5},
                                      {2.0}, 0.15, base, 1),
                    ConfigError);  // fewer than 3 points
}

TEST_CASE("lambda sweep demands the zero baseline and reports all rows") {
    Model source = small_net(3);
    std::vector<Model> targets{small_net(103)};
    std::vector<std::string> ids{"t0"};
    auto xs = some_inputs(3, 32);
    auto ys = some_labels(3, 3);
    AttackConfig base;
    base.grid_height = 4;
    base.grid_width = 8;
    base.grid_side = 4;
    base.steps = 3;
    base.batches = 3;
    base.batch_size = 3;

    CHECK_THROWS_AS(
        lambda_sweep(source, targets, ids, xs, ys, {0.5, 1.0}, base, 1),
        ConfigError);

    auto r1 = lambda_sweep(source, targets, ids, xs, ys, {0.0, 0.5}, base, 1);
    auto r2 = lambda_sweep(source, targets, ids, xs, ys, {0.0, 0.5}, base, 2);
    CHECK(r1.to_json() == r2.to_json());
    REQUIRE(r1.success_rate.size() == 2);
    CHECK(r1.success_rate[0].size() == 1);
    CHECK(r1.mean_interaction.size() == 2);
    CHECK(r1.to_csv().find("lambda,target") == 0);
}

TEST_CASE("interaction-only curve starts at the clean error rate") {
    Model source = small_net(3);
    std::vector<Model> targets{small_net(104)};
    std::vector<std::string> ids{"t0"};
    auto xs = some_inputs(4, 32);
    auto ys = some_labels(4, 3);
    AttackConfig base;
    base.grid_height = 4;
    base.grid_width = 8;
    base.grid_side = 4;
    base.steps = 3;
    base.batches = 3;
    base.batch_size = 3;
    base.lambda = 1.0;

    auto r = interaction_only_curve(source, targets, ids, xs, ys, base, 1);
    REQUIRE(r.epochs.size() == 4);  // clean + 3 recorded steps
    CHECK(r.epochs[0] == 0);

    std::size_t clean_misses = 0;
    for (std::size_t i = 0; i < xs.size(); ++i)
        clean_misses += targets[0].predict(xs[i]) != ys[i] ? 1 : 0;
    CHECK(r.success_rate[0][0] ==
          doctest::Approx(static_cast<double>(clean_misses) / 4.0));
    CHECK(r.loo_transferability.size() == 1);
    CHECK(r.noise_success.size() == 1);

    auto again = interaction_only_curve(source, targets, ids, xs, ys, base, 2);
    CHECK(r.to_json() == again.to_json());

    base.lambda = 0.0;
    CHECK_THROWS_AS(interaction_only_curve(source, targets, ids, xs, ys, base, 1),
                    ConfigError);
}

TEST_CASE("trend trajectories follow the closed form on a quadratic bowl") {
    // f(d) = g . d + d . H d / 2, gradient g + H d.
    std::size_t n = 6;
    RandomStream rng(21);
    Tensor g = Tensor::zeros(n);
    for (double& v : g.data) v = rng.normal();
    std::vector<std::vector<double>> hess(n, std::vector<double>(n, 0.0));
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = a; b < n; ++b) {
            double v = 1e-3 * rng.normal();
            hess[a][b] = v;
            hess[b][a] = v;
        }
    Objective quad{
        [&](const Tensor& d) {
            double out = dot(g, d);
            for (std::size_t a = 0; a < n; ++a)
                for (std::size_t b = 0; b < n; ++b)
                    out += 0.5 * d.data[a] * hess[a][b] * d.data[b];
            return out;
        },
        [&](const Tensor& d) {
            Tensor out = g;
            for (std::size_t a = 0; a < n; ++a)
                for (std::size_t b = 0; b < n; ++b)
                    out.data[a] += hess[a][b] * d.data[b];
            return out;
        },
    };

    TrendConfig cfg;
    cfg.alpha = 0.05;
    cfg.steps = 4;
    TrajectorySet set = trend_trajectories(quad, n, cfg, 77);

    // multi = alpha * sum_{k=0..m-1} (I + alpha H)^k g, computed longhand.
    Tensor iterate = Tensor::zeros(n);
    for (int step = 0; step < 4; ++step) {
        Tensor grad = g;
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t b = 0; b < n; ++b)
                grad.data[a] += hess[a][b] * iterate.data[b];
        iterate = add(iterate, scale(grad, cfg.alpha));
    }
    CHECK(max_abs_diff(set.multi, iterate) < 1e-15);

    // Every competitor is magnitude-matched to multi.
    double target_norm = l2_norm(set.multi);
    for (const Tensor* d :
         {&set.single_step, &set.noise, &set.momentum, &set.smoothed})
        CHECK(l2_norm(*d) == doctest::Approx(target_norm).epsilon(1e-12));

    TrajectorySet again = trend_trajectories(quad, n, cfg, 77);
    CHECK(max_abs_diff(set.noise, again.noise) == 0.0);
    CHECK(max_abs_diff(set.smoothed, again.smoothed) == 0.0);
}

TEST_CASE("multi minus single matches the analytic leading term on a quadratic") {
    // With loss g.d + d.Hd/2 the pairwise interaction is exactly d_a H_ab d_b,
    // so the paired difference has the closed leading order
    //   alpha^3 m^2 (m-1) * ( E[U] - (g.Hg / |g|^2) E[g_a H_ab g_b] ),
    // where U_ab = g_a H_ab (Hg)_b and the correction comes from matching
    // the single-step magnitude to multi.
    std::size_t n = 6;
    RandomStream rng(40);
    Tensor g = Tensor::zeros(n);
    for (double& v : g.data) v = rng.normal();
    std::vector<std::vector<double>> hess(n, std::vector<double>(n, 0.0));
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = a; b < n; ++b) {
            double v = 2e-3 * rng.normal();
            hess[a][b] = v;
            hess[b][a] = v;
        }
    Objective quad{
        [&](const Tensor& d) {
            double out = dot(g, d);
            for (std::size_t a = 0; a < n; ++a)
                for (std::size_t b = 0; b < n; ++b)
                    out += 0.5 * d.data[a] * hess[a][b] * d.data[b];
            return out;
        },
        [&](const Tensor& d) {
            Tensor out = g;
            for (std::size_t a = 0; a < n; ++a)
                for (std::size_t b = 0; b < n; ++b)
                    out.data[a] += hess[a][b] * d.data[b];
            return out;
        },
    };

    TrendConfig cfg;
    cfg.alpha = 0.02;
    cfg.steps = 6;
    TrajectorySet set = trend_trajectories(quad, n, cfg, 3);
    double measured = quad_pairwise_mean(set.multi, hess) -
                      quad_pairwise_mean(set.single_step, hess);

    Tensor hg = Tensor::zeros(n);
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < n; ++b)
            hg.data[a] += hess[a][b] * g.data[b];
    double mean_u = 0.0, mean_ghg = 0.0;
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < n; ++b)
            if (a != b) {
                mean_u += g.data[a] * hess[a][b] * hg.data[b];
                mean_ghg += g.data[a] * hess[a][b] * g.data[b];
            }
    double pairs = static_cast<double>(n) * static_cast<double>(n - 1);
    mean_u /= pairs;
    mean_ghg /= pairs;
    double m = static_cast<double>(cfg.steps);
    double lead = std::pow(cfg.alpha, 3.0) * m * m * (m - 1.0) *
                  (mean_u - dot(g, hg) / dot(g, g) * mean_ghg);

    REQUIRE(std::fabs(lead) > 1e-14);  // seed chosen to be non-degenerate
    CHECK(measured * lead > 0.0);      // same sign
    CHECK(measured == doctest::Approx(lead).epsilon(0.2));
}

TEST_CASE("trend suite reports zero differences on linear models") {
    std::vector<Model> models{make_mlp(32, {}, 3, Activation::softplus, 10.0, 1),
                              make_mlp(32, {}, 3, Activation::softplus, 10.0, 2)};
    auto xs = some_inputs(3, 32);
    auto ys = some_labels(3, 3);
    TrendConfig cfg;
    cfg.steps = 4;
    cfg.smooth_samples = 2;
    cfg.bootstrap_replicates = 100;
    cfg.curvature_inputs = 0;
    TrendReport r = trend_suite(models, xs, ys, cfg);
    REQUIRE(r.comparisons.size() == 4);
    for (const auto& cmp : r.comparisons) {
        CHECK(cmp.pairs == 6);
        CHECK(std::fabs(cmp.mean_diff) < 1e-12);
        CHECK(std::fabs(cmp.ci.lo) < 1e-12);
        CHECK(std::fabs(cmp.ci.hi) < 1e-12);
    }
}

TEST_CASE("trend suite is deterministic and produces curvature data") {
    std::vector<Model> models{small_net(51), small_net(52)};
    auto xs = some_inputs(3, 32);
    auto ys = some_labels(3, 3);
    TrendConfig cfg;
    cfg.steps = 4;
    cfg.smooth_samples = 2;
    cfg.bootstrap_replicates = 200;
    cfg.curvature_inputs = 2;
    TrendReport a = trend_suite(models, xs, ys, cfg);
    cfg.jobs = 3;
    TrendReport b = trend_suite(models, xs, ys, cfg);
    CHECK(a.to_json() == b.to_json());

    CHECK(a.hessian_magnitudes.size() == 2 * (32 * 31) / 2);
    CHECK(a.hessian_abs_max > 0.0);
    CHECK_FALSE(a.curvature_ratios.empty());
    for (const auto& cmp : a.comparisons) {
        CHECK(cmp.ci.lo <= cmp.mean_diff);
        CHECK(cmp.mean_diff <= cmp.ci.hi);
    }

    std::vector<Model> relu{make_mlp(32, {8}, 3, Activation::relu, 10.0, 1)};
    CHECK_THROWS_AS(trend_suite(relu, xs, ys, cfg), UnsupportedError);
}

TEST_CASE("heatmap csv lays out cells row-major") {
    std::string csv = heatmap_csv({1.0, 2.0, 3.0, 4.0}, 2);
    CHECK(csv ==
          "row,col,value\n0,0,1\n0,1,2\n1,0,3\n1,1,4\n");
    CHECK_THROWS_AS(heatmap_csv({1.0, 2.0}, 2), ShapeError);
}

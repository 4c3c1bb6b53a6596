#include "interlab/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "interlab/attack.hpp"
#include "interlab/errors.hpp"
#include "interlab/interaction.hpp"
#include "interlab/model.hpp"
#include "interlab/random.hpp"

namespace interlab {

namespace {

constexpr std::uint64_t kTagAxioms = 0x6178696f;      // per-suite streams
constexpr std::uint64_t kTagIdentity = 0x6964656e;
constexpr std::uint64_t kTagEquivalence = 0x65717576;
constexpr std::uint64_t kTagQuadratic = 0x71756164;
constexpr std::uint64_t kTagGradient = 0x67726164;

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.3g", v);
    return buf;
}

TableGame random_table(std::size_t players, RandomStream& rng) {
    std::vector<double> values(std::size_t{1} << players);
    for (double& v : values) v = rng.uniform(-1.0, 1.0);
    return TableGame(players, std::move(values));
}

QuadraticGame random_quadratic(std::size_t players, RandomStream& rng) {
    std::vector<double> lin(players), delta(players);
    std::vector<std::vector<double>> hess(players,
                                          std::vector<double>(players));
    for (double& v : lin) v = rng.uniform(-1.0, 1.0);
    for (double& v : delta) v = rng.uniform(-1.0, 1.0);
    for (auto& row : hess)
        for (double& v : row) v = rng.uniform(-1.0, 1.0);
    return QuadraticGame(lin, hess, delta);
}

void track(SuiteResult& r, double err) {
    r.worst = std::max(r.worst, err);
    ++r.checks;
}

// --- axioms ---------------------------------------------------------------

// Efficiency, linearity, dummy, and symmetry of the attribution under test,
// each probed on randomized explicit-table games.
SuiteResult suite_axioms(std::uint64_t seed, const AttributionFn& phi) {
    SuiteResult r;
    r.name = "axioms";
    r.tolerance = 1e-10;
    RandomStream rng(derive_seed(seed, kTagAxioms));

    for (std::size_t trial = 0; trial < 12; ++trial) {
        std::size_t p = 2 + trial % 7;  // 2..8 players
        TableGame g = random_table(p, rng);
        std::vector<double> attr = phi(g);

        // Efficiency: attributions add up to v(full) - v(empty).
        double total = 0.0;
        for (double a : attr) total += a;
        std::uint32_t full = (1u << p) - 1u;
        track(r, std::abs(total - (g.value_at(full) - g.value_at(0))));

        // Linearity: attribution of a*g + b*h is the same combination of
        // the separate attributions.
        TableGame h = random_table(p, rng);
        double a = rng.uniform(-2.0, 2.0);
        double b = rng.uniform(-2.0, 2.0);
        std::vector<double> mixed(std::size_t{1} << p);
        for (std::uint32_t m = 0; m < mixed.size(); ++m)
            mixed[m] = a * g.value_at(m) + b * h.value_at(m);
        std::vector<double> attr_h = phi(h);
        std::vector<double> attr_mix = phi(TableGame(p, std::move(mixed)));
        for (std::size_t i = 0; i < p; ++i)
            track(r, std::abs(attr_mix[i] - (a * attr[i] + b * attr_h[i])));

        // Dummy: a new player whose marginal contribution is always the
        // constant c receives exactly c, and nobody else moves.
        double c = rng.uniform(-1.0, 1.0);
        std::vector<double> extended(std::size_t{1} << (p + 1));
        for (std::uint32_t m = 0; m < extended.size(); ++m) {
            std::uint32_t base = m & full;
            extended[m] = g.value_at(base) + ((m >> p) & 1u ? c : 0.0);
        }
        std::vector<double> attr_ext =
            phi(TableGame(p + 1, std::move(extended)));
        track(r, std::abs(attr_ext[p] - c));
        for (std::size_t i = 0; i < p; ++i)
            track(r, std::abs(attr_ext[i] - attr[i]));

        // Symmetry: after symmetrizing the table in players (i, j), both
        // receive the same attribution.
        std::size_t i = rng.uniform_int(p);
        std::size_t j = (i + 1 + rng.uniform_int(p - 1)) % p;
        std::vector<double> sym(std::size_t{1} << p);
        for (std::uint32_t m = 0; m < sym.size(); ++m) {
            std::uint32_t swapped = m;
            bool bi = (m >> i) & 1u, bj = (m >> j) & 1u;
            if (bi != bj) swapped ^= (1u << i) | (1u << j);
            sym[m] = 0.5 * (g.value_at(m) + g.value_at(swapped));
        }
        std::vector<double> attr_sym = phi(TableGame(p, std::move(sym)));
        track(r, std::abs(attr_sym[i] - attr_sym[j]));
    }

    r.passed = r.worst < r.tolerance;
    r.detail = "efficiency/linearity/dummy/symmetry, worst gap " +
               fmt(r.worst);
    return r;
}

// --- identity ---------------------------------------------------------------

// The P+2-evaluation marginal form of the mean pairwise interaction against
// the all-pairs brute force, on games of 4..12 players.
SuiteResult suite_identity(std::uint64_t seed) {
    SuiteResult r;
    r.name = "identity";
    r.tolerance = 1e-9;
    RandomStream rng(derive_seed(seed, kTagIdentity));

    for (std::size_t trial = 0; trial < 100; ++trial) {
        std::size_t p = 4 + trial % 9;  // 4..12 players
        TableGame g = random_table(p, rng);
        double closed = mean_interaction_closed_form(g).mean_interaction;
        double brute = mean_interaction_brute_force(g).mean_interaction;
        track(r, std::abs(closed - brute));
    }

    r.passed = r.worst < r.tolerance;
    r.detail = "closed form vs all-pairs mean on " +
               std::to_string(r.checks) + " games, worst gap " + fmt(r.worst);
    return r;
}

// --- equivalence ------------------------------------------------------------

// Direct pairwise weights against the conditioned-game route
// (attribution with the partner fixed present minus fixed absent).
SuiteResult suite_equivalence(std::uint64_t seed) {
    SuiteResult r;
    r.name = "equivalence";
    r.tolerance = 1e-10;
    RandomStream rng(derive_seed(seed, kTagEquivalence));

    for (std::size_t trial = 0; trial < 100; ++trial) {
        std::size_t p = 2 + trial % 7;  // 2..8 players
        TableGame g = random_table(p, rng);
        for (std::size_t i = 0; i < p; ++i)
            for (std::size_t j = i + 1; j < p; ++j)
                track(r, std::abs(interaction_exact(g, i, j) -
                                  interaction_alt_exact(g, i, j)));
    }

    r.passed = r.worst < r.tolerance;
    r.detail = "two exact pairwise routes on " + std::to_string(r.checks) +
               " pairs, worst gap " + fmt(r.worst);
    return r;
}

// --- quadratic --------------------------------------------------------------

// On quadratic games the pairwise interaction is exactly the bilinear
// coefficient delta_i H_ij delta_j; on a smooth model with a small
// perturbation the same holds approximately with H the input Hessian.
SuiteResult suite_quadratic(std::uint64_t seed) {
    SuiteResult r;
    r.name = "quadratic";
    r.tolerance = 1e-10;
    RandomStream rng(derive_seed(seed, kTagQuadratic));

    for (std::size_t trial = 0; trial < 20; ++trial) {
        std::size_t p = 3 + trial % 6;  // 3..8 players
        QuadraticGame q = random_quadratic(p, rng);
        for (std::size_t i = 0; i < p; ++i)
            for (std::size_t j = i + 1; j < p; ++j) {
                double expect = q.delta()[i] * q.hessian()[i][j] * q.delta()[j];
                track(r, std::abs(interaction_exact(q, i, j) - expect));
            }
    }
    bool exact_ok = r.worst < r.tolerance;

    // Small-perturbation check on smooth models: the measured interactions
    // should match the local quadratic prediction within 5% in aggregate.
    double worst_rel = 0.0;
    for (std::uint64_t trial = 0; trial < 5; ++trial) {
        std::size_t n = 6;
        Model m = make_mlp(n, {8}, 3, Activation::softplus, 10.0,
                           derive_seed(seed, kTagQuadratic, 100 + trial));
        Tensor x({n});
        for (std::size_t i = 0; i < n; ++i) x[i] = rng.uniform(0.0, 1.0);
        std::size_t y = m.predict(x);
        Tensor delta({n});
        for (std::size_t i = 0; i < n; ++i)
            delta[i] = 2e-4 * rng.uniform(-1.0, 1.0);

        std::vector<std::vector<std::size_t>> cells(n);
        for (std::size_t i = 0; i < n; ++i) cells[i] = {i};
        CoalitionGame game(m, x, delta, cells, y);

        std::vector<std::pair<std::size_t, std::size_t>> pairs;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) pairs.push_back({i, j});
        std::vector<double> hess =
            hessian_probe(m, x, y, LossKind::margin, pairs);

        double err_sum = 0.0, mag_sum = 0.0;
        for (std::size_t k = 0; k < pairs.size(); ++k) {
            auto [i, j] = pairs[k];
            double predicted = delta[i] * hess[k] * delta[j];
            double measured = interaction_exact(game, i, j);
            err_sum += std::abs(measured - predicted);
            mag_sum += std::abs(predicted);
            ++r.checks;
        }
        if (mag_sum > 0.0) worst_rel = std::max(worst_rel, err_sum / mag_sum);
    }
    bool model_ok = worst_rel < 0.05;

    r.passed = exact_ok && model_ok;
    r.detail = "bilinear coefficient gap " + fmt(r.worst) +
               ", small-perturbation relative deviation " + fmt(worst_rel);
    return r;
}

// --- gradient ---------------------------------------------------------------

double central_diff_gap(const std::function<double(const Tensor&)>& f,
                        const Tensor& at, const Tensor& analytic, double h) {
    Tensor probe = at;
    double max_abs = 0.0;
    for (std::size_t i = 0; i < analytic.numel(); ++i)
        max_abs = std::max(max_abs, std::abs(analytic[i]));
    double scale = std::max(max_abs, 1e-12);
    double worst = 0.0;
    for (std::size_t i = 0; i < at.numel(); ++i) {
        double keep = probe[i];
        probe[i] = keep + h;
        double up = f(probe);
        probe[i] = keep - h;
        double down = f(probe);
        probe[i] = keep;
        double fd = (up - down) / (2.0 * h);
        worst = std::max(worst, std::abs(fd - analytic[i]) / scale);
    }
    return worst;
}

// Analytic loss and interaction-objective gradients against central
// finite differences, 20 seeded cases each.
SuiteResult suite_gradient(std::uint64_t seed) {
    SuiteResult r;
    r.name = "gradient";
    r.tolerance = 1e-4;
    RandomStream rng(derive_seed(seed, kTagGradient));

    double worst_loss = 0.0;
    for (std::uint64_t trial = 0; trial < 20; ++trial) {
        std::size_t n = 4 + trial % 4;
        Model m = make_mlp(n, {6}, 3, Activation::softplus, 8.0,
                           derive_seed(seed, kTagGradient, trial));
        Tensor x({n});
        for (std::size_t i = 0; i < n; ++i) x[i] = rng.uniform(0.0, 1.0);
        std::size_t y = rng.uniform_int(3);
        LossKind kind =
            trial % 2 == 0 ? LossKind::cross_entropy : LossKind::margin;
        Tensor g = input_gradient(m, x, y, kind);
        double gap = central_diff_gap(
            [&](const Tensor& u) { return loss(m, u, y, kind); }, x, g, 1e-6);
        worst_loss = std::max(worst_loss, gap);
        ++r.checks;
    }
    bool loss_ok = worst_loss < 1e-4;

    double worst_obj = 0.0;
    for (std::uint64_t trial = 0; trial < 20; ++trial) {
        std::size_t n = 16;  // 4x4 raster, 2x2 cells
        Model m = make_mlp(n, {8}, 3, Activation::softplus, 8.0,
                           derive_seed(seed, kTagGradient, 200 + trial));
        Tensor x({n});
        for (std::size_t i = 0; i < n; ++i) x[i] = rng.uniform(0.1, 0.9);
        std::size_t y = rng.uniform_int(3);
        GridPartition grid(4, 4, 2);
        InteractionObjective obj(m, x, y, grid, 3, 2,
                                 derive_seed(seed, kTagGradient, 400 + trial));
        Tensor delta({n});
        for (std::size_t i = 0; i < n; ++i)
            delta[i] = 0.05 * rng.uniform(-1.0, 1.0);
        Tensor g = obj.gradient(delta);
        double gap = central_diff_gap(
            [&](const Tensor& u) { return obj.value(u); }, delta, g, 1e-6);
        worst_obj = std::max(worst_obj, gap);
        ++r.checks;
    }
    bool obj_ok = worst_obj < 1e-3;

    r.worst = std::max(worst_loss, worst_obj);
    r.passed = loss_ok && obj_ok;
    r.detail = "loss gap " + fmt(worst_loss) + " (bound 1e-4), objective gap " +
               fmt(worst_obj) + " (bound 1e-3)";
    return r;
}

}  // namespace

std::vector<std::string> verification_suite_names() {
    return {"axioms", "identity", "equivalence", "quadratic", "gradient"};
}

std::vector<SuiteResult> run_verification(const std::vector<std::string>& suites,
                                          std::uint64_t seed,
                                          const AttributionFn& attribution) {
    std::vector<std::string> wanted =
        suites.empty() ? verification_suite_names() : suites;
    std::vector<std::string> known = verification_suite_names();
    for (const auto& name : wanted)
        if (std::find(known.begin(), known.end(), name) == known.end())
            throw ConfigError("unknown verification suite: " + name);

    AttributionFn phi = attribution;
    if (!phi) phi = [](const Game& g) { return shapley_all(g); };

    std::vector<SuiteResult> out;
    for (const auto& name : wanted) {
        if (name == "axioms") out.push_back(suite_axioms(seed, phi));
        else if (name == "identity") out.push_back(suite_identity(seed));
        else if (name == "equivalence") out.push_back(suite_equivalence(seed));
        else if (name == "quadratic") out.push_back(suite_quadratic(seed));
        else out.push_back(suite_gradient(seed));
    }
    return out;
}

bool all_passed(const std::vector<SuiteResult>& results) {
    return std::all_of(results.begin(), results.end(),
                       [](const SuiteResult& r) { return r.passed; });
}

std::string verification_to_json(const std::vector<SuiteResult>& results) {
    nlohmann::json j;
    j["passed"] = all_passed(results);
    j["suites"] = nlohmann::json::array();
    for (const auto& r : results) {
        nlohmann::json s;
        s["name"] = r.name;
        s["passed"] = r.passed;
        s["checks"] = r.checks;
        s["worst"] = r.worst;
        s["tolerance"] = r.tolerance;
        s["detail"] = r.detail;
        j["suites"].push_back(s);
    }
    return j.dump(2);
}

}  // namespace interlab

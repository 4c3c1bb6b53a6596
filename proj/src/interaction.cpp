#include "interlab/interaction.hpp"

#include <algorithm>
#include <bit>
#include <numeric>

#include "interlab/errors.hpp"
#include "interlab/random.hpp"

namespace interlab {

namespace {

constexpr std::size_t kExactCap = 20;
constexpr std::size_t kPermutationCap = 10;

void check_player(const Game& g, std::size_t i) {
    if (i >= g.players())
        throw InvalidPairError("player index " + std::to_string(i) +
                               " out of range [0, " +
                               std::to_string(g.players()) + ")");
}

void check_pair(const Game& g, std::size_t i, std::size_t j) {
    check_player(g, i);
    check_player(g, j);
    if (i == j)
        throw InvalidPairError("interaction needs two distinct players, got " +
                               std::to_string(i) + " twice");
    if (g.players() < 2)
        throw ConfigError("interaction needs at least 2 players");
}

void check_exact_capacity(const Game& g) {
    if (g.players() > kExactCap)
        throw CapacityError("exact enumeration capped at " +
                            std::to_string(kExactCap) + " players (game has " +
                            std::to_string(g.players()) +
                            "); use the sampled estimators");
}

// C(n, k) held exactly in doubles (n <= 20 keeps every entry integral).
double binom(std::size_t n, std::size_t k) {
    static const auto table = [] {
        std::vector<std::vector<double>> t(kExactCap + 1);
        for (std::size_t i = 0; i <= kExactCap; ++i) {
            t[i].assign(i + 1, 1.0);
            for (std::size_t j = 1; j < i; ++j)
                t[i][j] = t[i - 1][j - 1] + t[i - 1][j];
        }
        return t;
    }();
    return table[n][k];
}

// Weight of one coalition in the attribution sum: |S|!(P-|S|-1)!/P!.
double shapley_weight(std::size_t players, std::size_t coalition) {
    return 1.0 / (static_cast<double>(players) * binom(players - 1, coalition));
}

// Weight of one coalition in the pairwise sum: |S|!(P-|S|-2)!/(P-1)!.
double pair_weight(std::size_t players, std::size_t coalition) {
    return 1.0 /
           (static_cast<double>(players - 1) * binom(players - 2, coalition));
}

// Base game with one player deleted and its membership pinned.
class ConditionedGame : public Game {
public:
    ConditionedGame(const Game& base, std::size_t fixed, bool present)
        : base_(&base), fixed_(fixed), present_(present) {}
    std::size_t players() const override { return base_->players() - 1; }
    double value(const std::vector<std::uint8_t>& members) const override {
        std::vector<std::uint8_t> full(base_->players(), 0);
        for (std::size_t k = 0; k < members.size(); ++k)
            full[k < fixed_ ? k : k + 1] = members[k];
        full[fixed_] = present_ ? 1 : 0;
        return base_->value(full);
    }

private:
    const Game* base_;
    std::size_t fixed_;
    bool present_;
};

// Base game with players i and j fused: the slot that used to be i now
// toggles both. Player j is deleted from the index space.
class MergedGame : public Game {
public:
    MergedGame(const Game& base, std::size_t i, std::size_t j)
        : base_(&base), i_(i), j_(j) {}
    std::size_t players() const override { return base_->players() - 1; }
    double value(const std::vector<std::uint8_t>& members) const override {
        std::vector<std::uint8_t> full(base_->players(), 0);
        for (std::size_t k = 0; k < members.size(); ++k)
            full[k < j_ ? k : k + 1] = members[k];
        full[j_] = full[i_];
        return base_->value(full);
    }

private:
    const Game* base_;
    std::size_t i_;
    std::size_t j_;
};

std::size_t local_index(std::size_t global, std::size_t removed) {
    return global < removed ? global : global - 1;
}

}  // namespace

double shapley_exact(const Game& g, std::size_t i) {
    check_player(g, i);
    check_exact_capacity(g);
    std::size_t p = g.players();
    std::uint32_t full = p == 32 ? ~0u : (1u << p) - 1;
    std::uint32_t bit_i = 1u << i;
    std::uint32_t rest = full & ~bit_i;
    double total = 0.0;
    std::uint32_t S = rest;
    while (true) {
        std::size_t size = static_cast<std::size_t>(std::popcount(S));
        double w = shapley_weight(p, size);
        total += w * (value_of_mask(g, S | bit_i) - value_of_mask(g, S));
        if (S == 0) break;
        S = (S - 1) & rest;
    }
    return total;
}

std::vector<double> shapley_all(const Game& g) {
    check_exact_capacity(g);
    TableGame table = materialize(g);
    std::vector<double> out(g.players());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = shapley_exact(table, i);
    return out;
}

double shapley_brute_force(const Game& g, std::size_t i) {
    check_player(g, i);
    if (g.players() > kPermutationCap)
        throw CapacityError("permutation enumeration capped at " +
                            std::to_string(kPermutationCap) + " players");
    std::size_t p = g.players();
    TableGame table = materialize(g);
    std::vector<std::size_t> perm(p);
    std::iota(perm.begin(), perm.end(), 0);
    double total = 0.0;
    std::size_t count = 0;
    do {
        std::uint32_t mask = 0;
        for (std::size_t player : perm) {
            if (player == i) {
                total += table.value_at(mask | (1u << i)) - table.value_at(mask);
                break;
            }
            mask |= 1u << player;
        }
        ++count;
    } while (std::next_permutation(perm.begin(), perm.end()));
    return total / static_cast<double>(count);
}

double interaction_exact(const Game& g, std::size_t i, std::size_t j) {
    check_pair(g, i, j);
    check_exact_capacity(g);
    std::size_t p = g.players();
    std::uint32_t full = p == 32 ? ~0u : (1u << p) - 1;
    std::uint32_t bit_i = 1u << i;
    std::uint32_t bit_j = 1u << j;
    std::uint32_t rest = full & ~bit_i & ~bit_j;
    double total = 0.0;
    std::uint32_t S = rest;
    while (true) {
        std::size_t size = static_cast<std::size_t>(std::popcount(S));
        double w = pair_weight(p, size);
        // Grouped as (both + neither) - (i + j): addition commutes, so the
        // (i, j) and (j, i) sums are bitwise identical.
        total += w * ((value_of_mask(g, S | bit_i | bit_j) + value_of_mask(g, S)) -
                      (value_of_mask(g, S | bit_i) + value_of_mask(g, S | bit_j)));
        if (S == 0) break;
        S = (S - 1) & rest;
    }
    return total;
}

double interaction_alt_exact(const Game& g, std::size_t i, std::size_t j) {
    check_pair(g, i, j);
    check_exact_capacity(g);
    ConditionedGame with_j(g, j, true);
    ConditionedGame without_j(g, j, false);
    std::size_t li = local_index(i, j);
    return shapley_exact(with_j, li) - shapley_exact(without_j, li);
}

double interaction_brute_force(const Game& g, std::size_t i, std::size_t j) {
    check_pair(g, i, j);
    MergedGame merged(g, i, j);
    ConditionedGame without_j(g, j, false);
    ConditionedGame without_i(g, i, false);
    double phi_pair = shapley_brute_force(merged, local_index(i, j));
    double phi_i = shapley_brute_force(without_j, local_index(i, j));
    double phi_j = shapley_brute_force(without_i, local_index(j, i));
    return phi_pair - phi_i - phi_j;
}

double interaction_sampled(const Game& g, std::size_t i, std::size_t j,
                           std::size_t samples, std::uint64_t seed) {
    check_pair(g, i, j);
    if (samples == 0) throw ConfigError("interaction_sampled needs samples >= 1");
    std::size_t p = g.players();
    std::vector<std::size_t> rest;
    rest.reserve(p - 2);
    for (std::size_t k = 0; k < p; ++k)
        if (k != i && k != j) rest.push_back(k);

    RandomStream rng(derive_seed(seed, 0x70616972));
    std::vector<std::uint8_t> members(p, 0);
    double total = 0.0;
    for (std::size_t s = 0; s < samples; ++s) {
        std::fill(members.begin(), members.end(), 0);
        std::size_t size = static_cast<std::size_t>(rng.uniform_int(p - 1));
        for (std::size_t idx : rng.sample_without_replacement(rest.size(), size))
            members[rest[idx]] = 1;
        members[i] = 1;
        members[j] = 1;
        double with_both = g.value(members);
        members[j] = 0;
        double with_i = g.value(members);
        members[i] = 0;
        members[j] = 1;
        double with_j = g.value(members);
        members[j] = 0;
        double base = g.value(members);
        total += (with_both + base) - (with_i + with_j);
    }
    return total / static_cast<double>(samples);
}

InteractionReport mean_interaction_closed_form(const Game& g) {
    std::size_t p = g.players();
    if (p < 2) throw ConfigError("mean interaction needs at least 2 players");

    std::vector<std::uint8_t> members(p, 1);
    double v_full = g.value(members);
    std::fill(members.begin(), members.end(), 0);
    double v_empty = g.value(members);

    InteractionReport report;
    report.estimator = Estimator::closed_form;
    report.normalized = true;
    report.per_player_terms.resize(p);
    double sum = 0.0;
    for (std::size_t i = 0; i < p; ++i) {
        std::fill(members.begin(), members.end(), 1);
        members[i] = 0;
        double v_minus = g.value(members);
        std::fill(members.begin(), members.end(), 0);
        members[i] = 1;
        double v_single = g.value(members);
        report.per_player_terms[i] = v_full - v_minus - v_single + v_empty;
        sum += report.per_player_terms[i];
    }
    double mean = sum / static_cast<double>(p);
    report.mean_interaction = mean / static_cast<double>(p - 1);
    return report;
}

double batch_term(const Game& g, const std::vector<std::size_t>& batch) {
    std::size_t p = g.players();
    if (batch.empty()) throw ConfigError("batch term needs a nonempty batch");
    std::vector<std::uint8_t> in_batch(p, 0);
    for (std::size_t c : batch) {
        if (c >= p) throw ConfigError("batch cell index out of range");
        if (in_batch[c]) throw ConfigError("batch repeats cell " + std::to_string(c));
        in_batch[c] = 1;
    }
    std::vector<std::uint8_t> members(p, 1);
    double v_full = g.value(members);
    for (std::size_t c = 0; c < p; ++c) members[c] = in_batch[c] ? 0 : 1;
    double v_minus = g.value(members);
    members = in_batch;
    double v_batch = g.value(members);
    std::fill(members.begin(), members.end(), 0);
    double v_empty = g.value(members);
    return v_full - v_minus - v_batch + v_empty;
}

InteractionReport mean_interaction_sampled(const Game& g, const SamplingPlan& plan) {
    std::size_t p = g.players();
    if (p < 2) throw ConfigError("mean interaction needs at least 2 players");
    if (plan.batches == 0) throw ConfigError("sampling plan needs batches >= 1");
    if (plan.batch_size == 0 || plan.batch_size > p)
        throw ConfigError("batch size must lie in [1, cell count]; got " +
                          std::to_string(plan.batch_size) + " for " +
                          std::to_string(p) + " cells");

    std::vector<std::uint8_t> members(p, 1);
    double v_full = g.value(members);
    std::fill(members.begin(), members.end(), 0);
    double v_empty = g.value(members);

    double total = 0.0;
    for (std::size_t k = 0; k < plan.batches; ++k) {
        RandomStream rng(derive_seed(plan.seed, 0x62617463, k));
        std::vector<std::size_t> batch =
            rng.sample_without_replacement(p, plan.batch_size);
        std::fill(members.begin(), members.end(), 1);
        for (std::size_t c : batch) members[c] = 0;
        double v_minus = g.value(members);
        std::fill(members.begin(), members.end(), 0);
        for (std::size_t c : batch) members[c] = 1;
        double v_batch = g.value(members);
        total += v_full - v_minus - v_batch + v_empty;
    }

    InteractionReport report;
    report.estimator = Estimator::sampled;
    report.normalized = false;
    report.mean_interaction = total / static_cast<double>(plan.batches);
    report.has_plan = true;
    report.plan = plan;
    return report;
}

InteractionReport mean_interaction_brute_force(const Game& g) {
    std::size_t p = g.players();
    if (p < 2) throw ConfigError("mean interaction needs at least 2 players");
    if (p > 12)
        throw CapacityError("pairwise brute force capped at 12 players (game has " +
                            std::to_string(p) + ")");
    TableGame table = materialize(g);
    double total = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = i + 1; j < p; ++j) {
            total += interaction_exact(table, i, j);
            ++pairs;
        }
    InteractionReport report;
    report.estimator = Estimator::brute_force;
    report.normalized = true;
    report.mean_interaction = total / static_cast<double>(pairs);
    return report;
}

std::vector<double> neighbor_interactions(const Game& g, const GridPartition& grid,
                                          std::size_t samples, std::uint64_t seed) {
    if (grid.cell_count() != g.players())
        throw ConfigError("grid cell count " + std::to_string(grid.cell_count()) +
                          " does not match game players " +
                          std::to_string(g.players()));
    if (samples == 0) throw ConfigError("neighbor estimate needs samples >= 1");
    std::vector<double> sums(g.players(), 0.0);
    std::vector<std::size_t> counts(g.players(), 0);
    auto pairs = grid.adjacent_pairs();
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        auto [a, b] = pairs[k];
        double est = interaction_sampled(g, a, b, samples, derive_seed(seed, 0x6e626f72, k));
        sums[a] += est;
        sums[b] += est;
        ++counts[a];
        ++counts[b];
    }
    for (std::size_t c = 0; c < sums.size(); ++c)
        if (counts[c] > 0) sums[c] /= static_cast<double>(counts[c]);
    return sums;
}

}  // namespace interlab

#pragma once

#include "interlab/game.hpp"

namespace interlab {

// Attribution of player i: the coalition-weighted average of its marginal
// contributions, weight |S|!(P-|S|-1)!/P! over S excluding i. Exact
// enumeration; players() must be <= 20 (CapacityError points to the
// sampled estimators beyond that).
double shapley_exact(const Game& g, std::size_t i);
std::vector<double> shapley_all(const Game& g);

// Same quantity averaged over all P! player orderings (memoized values).
// Independent route used to cross-check the weighted sum; players() <= 10.
double shapley_brute_force(const Game& g, std::size_t i);

// Pairwise interaction of distinct players i, j: the weighted sum over
// S excluding both, weight |S|!(P-|S|-2)!/(P-1)!, of
// v(S+i+j) - v(S+i) - v(S+j) + v(S). Symmetric in (i, j) by construction.
double interaction_exact(const Game& g, std::size_t i, std::size_t j);

// Equivalent form: attribution of i with j always present minus attribution
// of i with j always absent, both computed as Shapley values of (P-1)-player
// conditioned games. Agrees with interaction_exact to float precision.
double interaction_alt_exact(const Game& g, std::size_t i, std::size_t j);

// Definition-level route: treat {i, j} as one merged player, then
// phi(merged) - phi(i | j absent) - phi(j | i absent), each via the
// permutation average. players() <= 10.
double interaction_brute_force(const Game& g, std::size_t i, std::size_t j);

// Unbiased Monte-Carlo estimate of interaction_exact: draws a coalition
// size uniformly, then a uniform coalition of that size, and averages the
// four-point bracket over `samples` draws.
double interaction_sampled(const Game& g, std::size_t i, std::size_t j,
                           std::size_t samples, std::uint64_t seed);

// Mean pairwise interaction via the per-player marginal identity:
// (1/(P-1)) * mean_i [v(full) - v(full\{i}) - v({i}) + v(empty)].
// P+2 coalition evaluations total. normalized=true in the report.
InteractionReport mean_interaction_closed_form(const Game& g);

// Four-point bracket of one cell batch:
// v(full) - v(full minus batch) - v(batch) + v(empty).
double batch_term(const Game& g, const std::vector<std::size_t>& batch);

// Monte-Carlo batch estimator: mean of batch_term over `plan.batches`
// uniform batches of `plan.batch_size` distinct cells. Reported
// unnormalized (no 1/(P-1)), mirroring how the regularizer consumes it.
InteractionReport mean_interaction_sampled(const Game& g, const SamplingPlan& plan);

// Plain mean of interaction_exact over all unordered pairs (P <= 12);
// the reference the closed form is checked against.
InteractionReport mean_interaction_brute_force(const Game& g);

// Per-cell mean interaction with 4-adjacent cells on the grid, estimated
// with interaction_sampled (samples draws per adjacent pair). Cell count
// must equal g.players().
std::vector<double> neighbor_interactions(const Game& g, const GridPartition& grid,
                                          std::size_t samples, std::uint64_t seed);

}  // namespace interlab

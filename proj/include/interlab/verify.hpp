#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "interlab/game.hpp"

namespace interlab {

// Outcome of one property suite of the self-check battery.
struct SuiteResult {
    std::string name;
    bool passed = false;
    std::size_t checks = 0;  // individual comparisons performed
    double worst = 0.0;      // largest error observed (suite metric)
    double tolerance = 0.0;  // the bound `worst` was held against
    std::string detail;      // one-line human summary
};

// Attribution implementation exercised by the axioms suite. The hook exists
// so a deliberately broken implementation can be injected to prove the
// battery detects it; when empty, the library's exact computation is used.
using AttributionFn = std::function<std::vector<double>(const Game&)>;

// Suite names, in battery order:
//   axioms      - attribution satisfies efficiency/linearity/dummy/symmetry
//   identity    - marginal closed form of the mean pairwise interaction
//                 matches the all-pairs brute force
//   equivalence - direct interaction weights match the conditioned-game route
//   quadratic   - interactions on quadratic games equal the bilinear
//                 coefficient; small-perturbation model games match their
//                 local quadratic prediction
//   gradient    - analytic gradients (loss and interaction objective) match
//                 central finite differences
std::vector<std::string> verification_suite_names();

// Runs the named suites (empty = all), deterministically in the seed.
// Unknown suite name -> ConfigError.
std::vector<SuiteResult> run_verification(
    const std::vector<std::string>& suites = {}, std::uint64_t seed = 1,
    const AttributionFn& attribution = {});

bool all_passed(const std::vector<SuiteResult>& results);

// Machine-readable battery summary: {"passed": bool, "suites": [...]}.
std::string verification_to_json(const std::vector<SuiteResult>& results);

}  // namespace interlab

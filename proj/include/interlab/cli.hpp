#pragma once

#include <functional>
#include <string>
#include <vector>

namespace interlab {

inline constexpr const char* kToolVersion = "interlab 0.1.0";

// Parsed command-line options shared by the subcommands.
struct CliOptions {
    std::string config_path;          // --config (manifest JSON)
    std::string out_dir = "out";      // --out (artifact root)
    std::size_t jobs = 0;             // --jobs (0 = manifest value)
    bool force = false;               // --force (allow overwriting traces)
    std::vector<std::string> suites;  // --suite (verification filter)
};

// Subcommands. Each returns a process exit code; errors are reported by
// throwing, and run_command maps them onto the documented codes.
int cmd_train(const CliOptions& opt);    // models/ + train_summary.json
int cmd_attack(const CliOptions& opt);   // attacks/trace_*.json|.bin + index
int cmd_measure(const CliOptions& opt);  // measure.json
int cmd_report(const CliOptions& opt);   // report/ sweeps, trends, heatmaps
int cmd_verify(const CliOptions& opt);   // verify.json; exit 3 on failure

// Runs `body`, translating library errors into exit codes:
// 0 success; 1 usage (configuration rejected before compute);
// 2 data error (unreadable/inconsistent files, divergence); 3 is reserved
// for verification failures and returned by cmd_verify directly.
int run_command(const std::function<int()>& body);

}  // namespace interlab

#include <functional>
#include <string>

#include <CLI11.hpp>

#include "interlab/cli.hpp"

namespace {

void add_common(CLI::App* cmd, interlab::CliOptions& opt, bool config_required) {
    auto* config = cmd->add_option("--config", opt.config_path,
                                   "experiment manifest (JSON)");
    if (config_required) config->required();
    cmd->add_option("--out", opt.out_dir, "artifact directory")
        ->capture_default_str();
    cmd->add_option("--jobs", opt.jobs,
                    "worker threads (0 = manifest value); results are "
                    "identical for any value");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Game-theoretic interaction analysis of adversarial "
                 "perturbations: train a toy model zoo, run attacks, measure "
                 "interactions, and build transferability reports."};
    app.require_subcommand(1);

    interlab::CliOptions opt;
    std::function<int()> body;

    CLI::App* train =
        app.add_subcommand("train", "train the source/target model zoo");
    add_common(train, opt, true);
    train->callback([&] { body = [&] { return interlab::cmd_train(opt); }; });

    CLI::App* attack = app.add_subcommand(
        "attack", "run the configured attack over the selected examples");
    add_common(attack, opt, true);
    attack->add_flag("--force", opt.force, "overwrite existing traces");
    attack->callback(
        [&] { body = [&] { return interlab::cmd_attack(opt); }; });

    CLI::App* measure = app.add_subcommand(
        "measure", "mean pairwise interaction of the stored perturbations");
    add_common(measure, opt, true);
    measure->callback(
        [&] { body = [&] { return interlab::cmd_measure(opt); }; });

    CLI::App* report = app.add_subcommand(
        "report", "correlation/lambda sweeps, trend suite, heatmaps");
    add_common(report, opt, true);
    report->callback(
        [&] { body = [&] { return interlab::cmd_report(opt); }; });

    CLI::App* verify = app.add_subcommand(
        "verify", "self-check battery of the library's exact identities");
    add_common(verify, opt, false);
    verify->add_option("--suite", opt.suites,
                       "run only the named suites (repeatable): axioms, "
                       "identity, equivalence, quadratic, gradient");
    verify->callback(
        [&] { body = [&] { return interlab::cmd_verify(opt); }; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;  // usage error
    }

    return interlab::run_command(body);
}

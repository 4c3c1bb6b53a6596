#include "interlab/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "interlab/analysis.hpp"
#include "interlab/attack.hpp"
#include "interlab/dataset.hpp"
#include "interlab/errors.hpp"
#include "interlab/interaction.hpp"
#include "interlab/manifest.hpp"
#include "interlab/model_io.hpp"
#include "interlab/parallel.hpp"
#include "interlab/random.hpp"
#include "interlab/training.hpp"
#include "interlab/verify.hpp"

namespace interlab {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint64_t kTagTrain = 0x7472696e;    // per-model train streams
constexpr std::uint64_t kTagTrace = 0x74726163;    // per-example attack seeds
constexpr std::uint64_t kTagMeasure = 0x6d656173;  // sampled-estimator draws
constexpr std::uint64_t kTagHeat = 0x68656174;     // heatmap pair sampling

ExperimentManifest manifest_from(const CliOptions& opt) {
    if (opt.config_path.empty())
        throw ConfigError("--config is required for this command");
    ExperimentManifest m = load_manifest(opt.config_path);
    if (opt.jobs > 0) m.jobs = opt.jobs;
    return m;
}

json meta_block(const ExperimentManifest& m) {
    json meta;
    meta["experiment_id"] = m.experiment_id;
    meta["manifest_hash"] = m.hash_hex();
    meta["tool"] = kToolVersion;
    return meta;
}

void write_file(const fs::path& path, const std::string& content) {
    fs::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write " + path.string());
    f << content;
    if (!f) throw IoError("write failed for " + path.string());
}

std::string read_file(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path.string());
    std::ostringstream buf;
    buf << f.rdbuf();
    return buf.str();
}

// CSV files carry the manifest hash as a comment line so every artifact is
// traceable to its configuration.
std::string csv_with_meta(const ExperimentManifest& m, const std::string& body) {
    return "# manifest=" + m.hash_hex() + "\n" + body;
}

fs::path model_path(const CliOptions& opt, const std::string& id) {
    return fs::path(opt.out_dir) / "models" / (id + ".json");
}

std::vector<ModelSpec> all_model_specs(const ExperimentManifest& m) {
    std::vector<ModelSpec> specs;
    specs.push_back(m.source);
    specs.insert(specs.end(), m.targets.begin(), m.targets.end());
    std::vector<std::string> seen;
    for (const auto& s : specs) {
        if (s.id.empty()) throw ConfigError("every model needs an id");
        if (std::find(seen.begin(), seen.end(), s.id) != seen.end())
            throw ConfigError("duplicate model id: " + s.id);
        seen.push_back(s.id);
    }
    return specs;
}

// Fills zero grid dimensions from the dataset raster; a non-zero value
// must match it.
AttackConfig grid_filled(const ExperimentManifest& m, const Dataset& data) {
    AttackConfig cfg = m.attack;
    if (cfg.grid_height == 0) cfg.grid_height = data.height;
    if (cfg.grid_width == 0) cfg.grid_width = data.width;
    if (cfg.grid_height != data.height || cfg.grid_width != data.width)
        throw ConfigError("attack grid raster " +
                          std::to_string(cfg.grid_height) + "x" +
                          std::to_string(cfg.grid_width) +
                          " does not match the dataset raster");
    return cfg;
}

bool attack_uses_grid(const AttackConfig& cfg) {
    return (cfg.method == AttackMethod::interaction_reduced &&
            cfg.lambda > 0.0) ||
           cfg.method == AttackMethod::interaction_only;
}

Model load_model_or_dependency(const fs::path& path, const char* hint) {
    if (!fs::exists(path))
        throw DependencyError("missing " + path.string() + "; " + hint);
    return load_model(path.string());
}

struct SelectedExamples {
    std::vector<std::size_t> indices;  // positions in the test split
    std::vector<Tensor> xs;
    std::vector<std::size_t> ys;
};

// The first `count` test examples the source model classifies correctly.
SelectedExamples select_examples(const Model& source, const Dataset& test,
                                 std::size_t count) {
    SelectedExamples out;
    for (std::size_t i = 0; i < test.size() && out.indices.size() < count; ++i) {
        if (source.predict(test.xs[i]) == test.ys[i]) {
            out.indices.push_back(i);
            out.xs.push_back(test.xs[i]);
            out.ys.push_back(test.ys[i]);
        }
    }
    if (out.indices.size() < count)
        throw ConfigError("only " + std::to_string(out.indices.size()) +
                          " correctly classified test examples available, " +
                          "need " + std::to_string(count));
    return out;
}

std::string trace_basename(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "trace_%03zu", i);
    return buf;
}

struct AttackIndex {
    std::string method;
    std::vector<std::size_t> positions;  // test-split indices
    std::vector<std::size_t> labels;
    std::vector<std::string> trace_files;
};

AttackIndex read_attack_index(const CliOptions& opt) {
    fs::path index_path = fs::path(opt.out_dir) / "attacks" / "index.json";
    if (!fs::exists(index_path))
        throw DependencyError("missing " + index_path.string() +
                              "; run the attack stage first");
    json j;
    try {
        j = json::parse(read_file(index_path));
    } catch (const json::exception& e) {
        throw MalformedFileError("attack index is not valid JSON: " +
                                 std::string(e.what()));
    }
    AttackIndex out;
    try {
        out.method = j.at("method").get<std::string>();
        for (const auto& e : j.at("examples")) {
            out.positions.push_back(e.at("test_index").get<std::size_t>());
            out.labels.push_back(e.at("label").get<std::size_t>());
            out.trace_files.push_back(e.at("trace").get<std::string>());
        }
    } catch (const json::exception& e) {
        throw MalformedFileError("attack index lacks a required field: " +
                                 std::string(e.what()));
    }
    return out;
}

}  // namespace

int cmd_train(const CliOptions& opt) {
    ExperimentManifest m = manifest_from(opt);
    SplitDataset data = load_dataset(m.dataset);
    std::vector<ModelSpec> specs = all_model_specs(m);

    struct Row {
        std::string id, kind, path;
        double train_acc = 0.0, test_acc = 0.0, final_loss = 0.0;
    };
    std::vector<Row> rows(specs.size());

    parallel_for(specs.size(), static_cast<int>(m.jobs), [&](std::size_t k) {
        Model init = build_model(specs[k], data.train.dim(),
                                 data.train.num_classes);
        TrainConfig tc = m.train;
        tc.seed = derive_seed(m.train.seed, kTagTrain, k);
        TrainResult res = train(std::move(init), data.train, tc);
        fs::path path = model_path(opt, specs[k].id);
        fs::create_directories(path.parent_path());
        save_model(res.model, path.string());
        // Artifacts reference each other relative to the output root so a
        // run is relocatable and byte-stable across output directories.
        std::string rel = (fs::path("models") / (specs[k].id + ".json")).string();
        rows[k] = {specs[k].id,          specs[k].kind,
                   rel,                  res.train_accuracy,
                   accuracy(res.model, data.test), res.final_loss};
    });

    json summary;
    summary["meta"] = meta_block(m);
    summary["models"] = json::array();
    for (const auto& r : rows) {
        json row;
        row["id"] = r.id;
        row["kind"] = r.kind;
        row["path"] = r.path;
        row["train_accuracy"] = r.train_acc;
        row["test_accuracy"] = r.test_acc;
        row["final_loss"] = r.final_loss;
        summary["models"].push_back(row);
        std::printf("trained %-10s train acc %.3f  test acc %.3f\n",
                    r.id.c_str(), r.train_acc, r.test_acc);
    }
    write_file(fs::path(opt.out_dir) / "train_summary.json",
               summary.dump(2) + "\n");
    return 0;
}

int cmd_attack(const CliOptions& opt) {
    ExperimentManifest m = manifest_from(opt);
    SplitDataset data = load_dataset(m.dataset);
    Model source = load_model_or_dependency(model_path(opt, m.source.id),
                                            "run the train stage first");

    AttackConfig base = grid_filled(m, data.test);
    if (attack_uses_grid(base)) {
        GridPartition grid(base.grid_height, base.grid_width, base.grid_side);
        if (base.batch_size > grid.cell_count())
            throw ConfigError("sampling batch size " +
                              std::to_string(base.batch_size) +
                              " exceeds the " +
                              std::to_string(grid.cell_count()) +
                              " grid cells");
    }

    fs::path attacks_dir = fs::path(opt.out_dir) / "attacks";
    if (fs::exists(attacks_dir / "index.json")) {
        if (!opt.force)
            throw ConfigError("attack traces already exist under " +
                              attacks_dir.string() +
                              "; pass --force to overwrite");
        fs::remove_all(attacks_dir);
    }
    fs::create_directories(attacks_dir);

    SelectedExamples sel = select_examples(source, data.test, m.examples);
    std::vector<AttackTrace> traces(sel.indices.size());
    parallel_for(sel.indices.size(), static_cast<int>(m.jobs),
                 [&](std::size_t i) {
                     AttackConfig cfg = base;
                     cfg.seed = derive_seed(m.seed, kTagTrace, i);
                     traces[i] = run_attack(source, sel.xs[i], sel.ys[i], cfg);
                 });

    json index;
    index["meta"] = meta_block(m);
    index["method"] = to_string(base.method);
    index["count"] = traces.size();
    index["examples"] = json::array();
    std::size_t hits = 0;
    for (std::size_t i = 0; i < traces.size(); ++i) {
        std::string name = trace_basename(i);
        save_trace(traces[i], (attacks_dir / (name + ".json")).string(),
                   (attacks_dir / (name + ".bin")).string());
        json row;
        row["test_index"] = sel.indices[i];
        row["label"] = sel.ys[i];
        row["trace"] = name + ".json";
        row["success"] = traces[i].success;
        row["stop_reason"] = traces[i].stop_reason;
        index["examples"].push_back(row);
        hits += traces[i].success ? 1 : 0;
    }
    write_file(attacks_dir / "index.json", index.dump(2) + "\n");
    std::printf("attacked %zu examples with %s; source success rate %.3f\n",
                traces.size(), to_string(base.method).c_str(),
                traces.empty() ? 0.0
                               : static_cast<double>(hits) / traces.size());
    return 0;
}

int cmd_measure(const CliOptions& opt) {
    ExperimentManifest m = manifest_from(opt);
    SplitDataset data = load_dataset(m.dataset);
    Model source = load_model_or_dependency(model_path(opt, m.source.id),
                                            "run the train stage first");
    AttackIndex index = read_attack_index(opt);
    AttackConfig cfg = grid_filled(m, data.test);
    GridPartition grid(cfg.grid_height, cfg.grid_width, cfg.grid_side);
    auto cells = grid.cells();

    fs::path attacks_dir = fs::path(opt.out_dir) / "attacks";
    std::vector<InteractionReport> reports(index.positions.size());
    parallel_for(index.positions.size(), static_cast<int>(m.jobs),
                 [&](std::size_t i) {
                     AttackTrace t = load_trace(
                         (attacks_dir / index.trace_files[i]).string());
                     std::size_t pos = index.positions[i];
                     if (pos >= data.test.size())
                         throw MalformedFileError(
                             "attack index points past the test split");
                     if (t.final_delta.numel() != data.test.dim())
                         throw ShapeError(
                             "trace " + index.trace_files[i] + " carries " +
                             std::to_string(t.final_delta.numel()) +
                             " dims, dataset has " +
                             std::to_string(data.test.dim()));
                     CoalitionGame game(source, data.test.xs[pos],
                                        t.final_delta, cells,
                                        data.test.ys[pos]);
                     if (m.estimator == "closed-form") {
                         reports[i] = mean_interaction_closed_form(game);
                     } else if (m.estimator == "brute-force") {
                         reports[i] = mean_interaction_brute_force(game);
                     } else {
                         SamplingPlan plan;
                         plan.batches = cfg.batches;
                         plan.batch_size = cfg.batch_size;
                         plan.seed = derive_seed(m.seed, kTagMeasure, i);
                         reports[i] = mean_interaction_sampled(game, plan);
                     }
                 });

    json out;
    out["meta"] = meta_block(m);
    out["estimator"] = m.estimator;
    out["results"] = json::array();
    double total = 0.0;
    for (std::size_t i = 0; i < reports.size(); ++i) {
        json row;
        row["trace"] = index.trace_files[i];
        row["test_index"] = index.positions[i];
        row["mean_interaction"] = reports[i].mean_interaction;
        row["normalized"] = reports[i].normalized;
        out["results"].push_back(row);
        total += reports[i].mean_interaction;
    }
    write_file(fs::path(opt.out_dir) / "measure.json", out.dump(2) + "\n");
    std::printf("measured %zu traces with the %s estimator; mean %.6g\n",
                reports.size(), m.estimator.c_str(),
                reports.empty() ? 0.0 : total / reports.size());
    return 0;
}

int cmd_report(const CliOptions& opt) {
    ExperimentManifest m = manifest_from(opt);
    SplitDataset data = load_dataset(m.dataset);

    // Upstream artifacts: every trained model plus the stored traces.
    std::vector<std::string> missing;
    for (const auto& spec : all_model_specs(m)) {
        fs::path p = model_path(opt, spec.id);
        if (!fs::exists(p)) missing.push_back(p.string());
    }
    if (!missing.empty()) {
        std::string joined;
        for (const auto& p : missing) joined += (joined.empty() ? "" : ", ") + p;
        throw DependencyError("missing " + joined +
                              "; run the train stage first");
    }
    Model source = load_model(model_path(opt, m.source.id).string());
    std::vector<Model> targets;
    std::vector<std::string> target_ids;
    for (const auto& spec : m.targets) {
        targets.push_back(load_model(model_path(opt, spec.id).string()));
        target_ids.push_back(spec.id);
    }

    AttackIndex index = read_attack_index(opt);
    fs::path attacks_dir = fs::path(opt.out_dir) / "attacks";
    std::vector<AttackTrace> traces;
    std::vector<Tensor> xs;
    std::vector<std::size_t> ys;
    for (std::size_t i = 0; i < index.positions.size(); ++i) {
        traces.push_back(
            load_trace((attacks_dir / index.trace_files[i]).string()));
        std::size_t pos = index.positions[i];
        if (pos >= data.test.size())
            throw MalformedFileError("attack index points past the test split");
        xs.push_back(data.test.xs[pos]);
        ys.push_back(data.test.ys[pos]);
    }

    AttackConfig base = grid_filled(m, data.test);
    base.seed = m.seed;
    fs::path report_dir = fs::path(opt.out_dir) / "report";
    json meta = meta_block(m);

    double tau = m.report.tau > 0.0
                     ? m.report.tau
                     : pilot_tau(source, xs, ys, base, m.jobs);

    CorrelationSweepReport corr = correlation_sweep(
        source, targets, target_ids, xs, ys, m.report.c_values,
        m.report.p_values, tau, base, m.jobs);
    {
        json j;
        j["meta"] = meta;
        j["correlation"] = json::parse(corr.to_json());
        write_file(report_dir / "correlation.json", j.dump(2) + "\n");
        write_file(report_dir / "correlation.csv",
                   csv_with_meta(m, corr.to_csv()));
    }

    LambdaSweepReport lamb = lambda_sweep(source, targets, target_ids, xs, ys,
                                          m.report.lambdas, base, m.jobs);
    {
        json j;
        j["meta"] = meta;
        j["lambda_sweep"] = json::parse(lamb.to_json());
        write_file(report_dir / "lambda.json", j.dump(2) + "\n");
        write_file(report_dir / "lambda.csv", csv_with_meta(m, lamb.to_csv()));
    }

    AttackConfig curve_base = base;
    curve_base.lambda = m.report.curve_lambda;
    InteractionCurveReport curve = interaction_only_curve(
        source, targets, target_ids, xs, ys, curve_base, m.jobs);
    {
        json j;
        j["meta"] = meta;
        j["interaction_only"] = json::parse(curve.to_json());
        write_file(report_dir / "curve.json", j.dump(2) + "\n");
        write_file(report_dir / "curve.csv", csv_with_meta(m, curve.to_csv()));
    }

    TrendConfig tc;
    tc.alpha = m.report.trend_alpha;
    tc.steps = m.report.trend_steps;
    tc.sigma = m.report.trend_sigma;
    tc.smooth_samples = m.report.trend_samples;
    tc.raster_height = data.test.height;
    tc.raster_width = data.test.width;
    tc.grid_side = m.report.trend_grid_side;
    tc.bootstrap_replicates = m.report.bootstrap;
    tc.seed = m.seed;
    tc.curvature_inputs = m.report.curvature_inputs;
    tc.jobs = m.jobs;
    std::vector<Model> zoo;
    zoo.push_back(source);
    zoo.insert(zoo.end(), targets.begin(), targets.end());
    std::size_t trend_n = std::min(m.report.trend_examples, data.test.size());
    std::vector<Tensor> trend_xs(data.test.xs.begin(),
                                 data.test.xs.begin() + trend_n);
    std::vector<std::size_t> trend_ys(data.test.ys.begin(),
                                      data.test.ys.begin() + trend_n);
    TrendReport trends = trend_suite(zoo, trend_xs, trend_ys, tc);
    {
        json j;
        j["meta"] = meta;
        j["trends"] = json::parse(trends.to_json());
        write_file(report_dir / "trends.json", j.dump(2) + "\n");
    }

    // Adjacent-cell interaction heatmaps of the stored perturbations, one
    // CSV per model, averaged over the first few examples.
    GridPartition grid(base.grid_height, base.grid_width, base.grid_side);
    auto cells = grid.cells();
    std::size_t heat_n = std::min<std::size_t>(m.report.heatmap_examples,
                                               traces.size());
    for (std::size_t k = 0; k < zoo.size(); ++k) {
        std::vector<double> mean_cells(grid.cell_count(), 0.0);
        for (std::size_t i = 0; i < heat_n; ++i) {
            CoalitionGame game(zoo[k], xs[i], traces[i].final_delta, cells,
                               ys[i]);
            std::vector<double> vals = neighbor_interactions(
                game, grid, m.report.heatmap_samples,
                derive_seed(m.seed, kTagHeat, k * 4096 + i));
            for (std::size_t c = 0; c < vals.size(); ++c)
                mean_cells[c] += vals[c] / static_cast<double>(heat_n);
        }
        std::string id = k == 0 ? m.source.id : m.targets[k - 1].id;
        write_file(report_dir / ("heatmap_" + id + ".csv"),
                   csv_with_meta(m, heatmap_csv(mean_cells, grid.side)));
    }

    std::printf("tau %.6g\n", tau);
    for (std::size_t t = 0; t < target_ids.size(); ++t) {
        const PearsonResult& pr = corr.target_correlation[t];
        std::printf("correlation vs %-10s r %s\n", target_ids[t].c_str(),
                    pr.defined ? std::to_string(pr.r).c_str() : "undefined");
    }
    for (const auto& cmp : trends.comparisons)
        std::printf("trend %-22s mean %+.3e  ci [%+.3e, %+.3e]\n",
                    cmp.name.c_str(), cmp.mean_diff, cmp.ci.lo, cmp.ci.hi);
    std::printf("report written under %s\n", report_dir.string().c_str());
    return 0;
}

int cmd_verify(const CliOptions& opt) {
    std::uint64_t seed = 1;
    json meta;
    meta["tool"] = kToolVersion;
    if (!opt.config_path.empty()) {
        ExperimentManifest m = load_manifest(opt.config_path);
        seed = m.seed;
        meta = meta_block(m);
    }

    std::vector<SuiteResult> results = run_verification(opt.suites, seed);
    for (const auto& r : results)
        std::printf("%-12s %s  (%zu checks; %s)\n", r.name.c_str(),
                    r.passed ? "PASS" : "FAIL", r.checks, r.detail.c_str());

    json j;
    j["meta"] = meta;
    j["verification"] = json::parse(verification_to_json(results));
    write_file(fs::path(opt.out_dir) / "verify.json", j.dump(2) + "\n");
    return all_passed(results) ? 0 : 3;
}

int run_command(const std::function<int()>& body) {
    try {
        return body();
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const CapacityError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const InvalidPairError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const UnsupportedError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}

}  // namespace interlab

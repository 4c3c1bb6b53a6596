#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "interlab/cli.hpp"
#include "interlab/errors.hpp"
#include "interlab/game.hpp"
#include "interlab/manifest.hpp"
#include "interlab/verify.hpp"

using namespace interlab;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// A deliberately small experiment so the full pipeline runs in seconds.
const char* kTinyManifest = R"({
  "experiment_id": "tiny",
  "seed": 7,
  "jobs": 1,
  "dataset": {
    "kind": "blobs", "classes": 3, "height": 4, "width": 4,
    "spread": 0.15, "train_count": 300, "test_count": 120, "seed": 2
  },
  "source": {
    "id": "source", "kind": "mlp", "hidden": [10],
    "activation": "softplus", "beta": 10.0, "seed": 11
  },
  "targets": [
    { "id": "alt", "kind": "mlp", "hidden": [12],
      "activation": "softplus", "beta": 10.0, "seed": 22 },
    { "id": "res", "kind": "residual", "width": 8, "blocks": 1,
      "activation": "softplus", "beta": 10.0, "seed": 33 }
  ],
  "train": { "epochs": 6, "lr": 0.1, "batch": 16, "seed": 5 },
  "attack": {
    "method": "pgd", "norm": "linf", "epsilon": 0.25, "alpha": 0.02,
    "steps": 25, "loss": "margin", "grid_side": 2,
    "batches": 4, "batch_size": 2
  },
  "examples": 4,
  "estimator": "closed-form",
  "report": {
    "c_values": [0.1, 0.4, 0.8], "p_values": [2.0], "lambdas": [0.0, 1.0],
    "bootstrap": 100, "tau": 0.0, "curve_lambda": 1.0,
    "trend_alpha": 0.002, "trend_steps": 5, "trend_sigma": 0.05,
    "trend_samples": 4, "trend_examples": 4, "trend_grid_side": 2,
    "curvature_inputs": 1, "heatmap_samples": 8, "heatmap_examples": 2
  }
})";

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() /
               ("interlab_test_" + tag + "_" + std::to_string(::getpid()));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string str() const { return path.string(); }
};

std::string write_manifest(const TempDir& dir, const std::string& text,
                           const std::string& name = "manifest.json") {
    fs::path p = dir.path / name;
    std::ofstream f(p);
    f << text;
    f.close();
    return p.string();
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    REQUIRE(f.good());
    std::ostringstream buf;
    buf << f.rdbuf();
    return buf.str();
}

// Relative path -> file bytes for every regular file under root.
std::map<std::string, std::string> snapshot(const fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file())
            out[fs::relative(e.path(), root).string()] = slurp(e.path());
    return out;
}

json patched(const std::string& base, const std::string& pointer,
             const json& value) {
    json j = json::parse(base);
    j[json::json_pointer(pointer)] = value;
    return j;
}

}  // namespace

TEST_CASE("manifest json round trip preserves every field") {
    ExperimentManifest m = ExperimentManifest::from_json(kTinyManifest);
    CHECK(m.experiment_id == "tiny");
    CHECK(m.seed == 7);
    CHECK(m.dataset.num_classes == 3);
    CHECK(m.dataset.cluster_spread == doctest::Approx(0.15));
    CHECK(m.source.hidden == std::vector<std::size_t>{10});
    CHECK(m.targets.size() == 2);
    CHECK(m.targets[1].kind == "residual");
    CHECK(m.targets[1].blocks == 1);
    CHECK(m.train.epochs == 6);
    CHECK(m.attack.method == AttackMethod::pgd);
    CHECK(m.attack.loss == LossKind::margin);
    CHECK(m.attack.epsilon == doctest::Approx(0.25));
    CHECK(m.examples == 4);
    CHECK(m.estimator == "closed-form");
    CHECK(m.report.c_values == std::vector<double>{0.1, 0.4, 0.8});
    CHECK(m.report.trend_alpha == doctest::Approx(0.002));
    CHECK(m.report.heatmap_examples == 2);

    // Serialising and parsing again reaches a fixed point.
    std::string once = m.to_json();
    ExperimentManifest again = ExperimentManifest::from_json(once);
    CHECK(again.to_json() == once);
    CHECK(again.hash_hex() == m.hash_hex());
}

TEST_CASE("manifest hash is stable and sensitive") {
    ExperimentManifest m = ExperimentManifest::from_json(kTinyManifest);
    std::string h = m.hash_hex();
    CHECK(h.size() == 16);  // 64-bit hex
    CHECK(h == ExperimentManifest::from_json(kTinyManifest).hash_hex());

    ExperimentManifest changed = m;
    changed.seed = 8;
    CHECK(changed.hash_hex() != h);

    ExperimentManifest renamed = m;
    renamed.experiment_id = "tiny2";
    CHECK(renamed.hash_hex() != h);

    // Worker count is an execution detail, not part of the experiment.
    ExperimentManifest reparallelized = m;
    reparallelized.jobs = 16;
    CHECK(reparallelized.hash_hex() == h);
}

TEST_CASE("manifest rejects bad input") {
    CHECK_THROWS_AS(ExperimentManifest::from_json("{nope"), MalformedFileError);
    CHECK_THROWS_AS(ExperimentManifest::from_json(
                        patched(kTinyManifest, "/estimator", "magic").dump()),
                    ConfigError);
    CHECK_THROWS_AS(ExperimentManifest::from_json(
                        patched(kTinyManifest, "/source/kind", "cnn").dump()),
                    ConfigError);
    CHECK_THROWS_AS(ExperimentManifest::from_json(
                        patched(kTinyManifest, "/dataset/kind", "parquet").dump()),
                    ConfigError);
}

TEST_CASE("environment seed override") {
    TempDir dir("seed");
    std::string path = write_manifest(dir, kTinyManifest);

    CHECK(load_manifest(path).seed == 7);

    ::setenv("INTERLAB_SEED", "99", 1);
    CHECK(load_manifest(path).seed == 99);

    ::setenv("INTERLAB_SEED", "not-a-number", 1);
    CHECK_THROWS_AS(load_manifest(path), ConfigError);
    ::unsetenv("INTERLAB_SEED");

    CHECK(load_manifest(path).seed == 7);
    CHECK_THROWS_AS(load_manifest((dir.path / "missing.json").string()),
                    IoError);
}

TEST_CASE("model construction covers both families") {
    ExperimentManifest m = ExperimentManifest::from_json(kTinyManifest);

    Model mlp = build_model(m.source, 16, 3);
    CHECK(mlp.input_dim == 16);
    CHECK(mlp.num_classes == 3);

    Model res = build_model(m.targets[1], 16, 3);
    CHECK(res.input_dim == 16);
    CHECK(res.num_classes == 3);

    ModelSpec bad = m.source;
    bad.kind = "transformer";
    CHECK_THROWS_AS(build_model(bad, 16, 3), ConfigError);
}

TEST_CASE("verification battery passes with the real attribution") {
    std::vector<SuiteResult> results = run_verification({}, 1);
    CHECK(results.size() == verification_suite_names().size());
    CHECK(all_passed(results));
    for (const auto& r : results) {
        CHECK(r.passed);
        CHECK(r.checks > 0);
        CHECK(r.worst < r.tolerance);
    }
    std::string j = verification_to_json(results);
    CHECK(json::parse(j).at("passed").get<bool>());
}

TEST_CASE("verification battery detects a broken attribution") {
    // Raw singleton marginals ignore coalition weighting entirely; the
    // axiom suite must notice (efficiency cannot hold on generic games).
    AttributionFn broken = [](const Game& g) {
        std::vector<double> phi(g.players());
        std::vector<std::uint8_t> none(g.players(), 0);
        double empty = g.value(none);
        for (std::size_t i = 0; i < g.players(); ++i) {
            std::vector<std::uint8_t> solo = none;
            solo[i] = 1;
            phi[i] = g.value(solo) - empty;
        }
        return phi;
    };
    std::vector<SuiteResult> results = run_verification({"axioms"}, 1, broken);
    REQUIRE(results.size() == 1);
    CHECK_FALSE(results[0].passed);
    CHECK_FALSE(all_passed(results));
}

TEST_CASE("verification rejects unknown suite names") {
    CHECK_THROWS_AS(run_verification({"axioms", "bogus"}, 1), ConfigError);
}

TEST_CASE("pipeline produces deterministic artifacts under any worker count") {
    TempDir dir("pipe");
    std::string config = write_manifest(dir, kTinyManifest);

    auto run_all = [&](const std::string& out, std::size_t jobs) {
        CliOptions opt;
        opt.config_path = config;
        opt.out_dir = out;
        opt.jobs = jobs;
        REQUIRE(cmd_train(opt) == 0);
        REQUIRE(cmd_attack(opt) == 0);
        REQUIRE(cmd_measure(opt) == 0);
        REQUIRE(cmd_report(opt) == 0);
    };

    std::string out1 = (dir.path / "a").string();
    std::string out2 = (dir.path / "b").string();
    run_all(out1, 1);
    run_all(out2, 3);

    auto snap1 = snapshot(out1);
    auto snap2 = snapshot(out2);
    REQUIRE(snap1.size() == snap2.size());
    for (const auto& [rel, bytes] : snap1) {
        INFO("artifact ", rel);
        REQUIRE(snap2.count(rel) == 1);
        CHECK(snap2.at(rel) == bytes);
    }

    // Expected layout.
    CHECK(snap1.count("train_summary.json") == 1);
    CHECK(snap1.count("models/source.json") == 1);
    CHECK(snap1.count("attacks/index.json") == 1);
    CHECK(snap1.count("attacks/trace_000.json") == 1);
    CHECK(snap1.count("attacks/trace_000.bin") == 1);
    CHECK(snap1.count("measure.json") == 1);
    CHECK(snap1.count("report/correlation.json") == 1);
    CHECK(snap1.count("report/lambda.csv") == 1);
    CHECK(snap1.count("report/trends.json") == 1);
    CHECK(snap1.count("report/heatmap_source.csv") == 1);

    // Every artifact embeds the manifest hash.
    ExperimentManifest m = load_manifest(config);
    std::string hash = m.hash_hex();
    for (const auto& [rel, bytes] : snap1) {
        if (rel.size() > 5 && rel.compare(rel.size() - 5, 5, ".json") == 0 &&
            rel.rfind("models/", 0) != 0) {
            json j = json::parse(bytes);
            if (rel.rfind("attacks/trace", 0) == 0) continue;  // raw traces
            INFO("artifact ", rel);
            CHECK(j.at("meta").at("manifest_hash").get<std::string>() == hash);
        }
        if (rel.size() > 4 && rel.compare(rel.size() - 4, 4, ".csv") == 0) {
            INFO("artifact ", rel);
            CHECK(bytes.rfind("# manifest=" + hash + "\n", 0) == 0);
        }
    }
}

TEST_CASE("attack stage refuses to overwrite traces without force") {
    TempDir dir("force");
    std::string config = write_manifest(dir, kTinyManifest);
    CliOptions opt;
    opt.config_path = config;
    opt.out_dir = (dir.path / "out").string();
    REQUIRE(cmd_train(opt) == 0);
    REQUIRE(cmd_attack(opt) == 0);

    CHECK_THROWS_AS(cmd_attack(opt), ConfigError);

    opt.force = true;
    CHECK(cmd_attack(opt) == 0);
}

TEST_CASE("regularized run with zero weight reproduces the plain attack") {
    TempDir dir("zero");
    std::string plain_cfg = write_manifest(dir, kTinyManifest, "plain.json");
    json alt = json::parse(kTinyManifest);
    alt["attack"]["method"] = "interaction-reduced";
    alt["attack"]["lambda"] = 0.0;
    std::string zero_cfg = write_manifest(dir, alt.dump(), "zero.json");

    CliOptions opt;
    opt.config_path = plain_cfg;
    opt.out_dir = (dir.path / "plain").string();
    REQUIRE(cmd_train(opt) == 0);
    REQUIRE(cmd_attack(opt) == 0);

    CliOptions opt2;
    opt2.config_path = zero_cfg;
    opt2.out_dir = (dir.path / "zero").string();
    REQUIRE(cmd_train(opt2) == 0);
    REQUIRE(cmd_attack(opt2) == 0);

    // The perturbation trajectories must agree byte for byte.
    auto plain = snapshot(fs::path(opt.out_dir) / "attacks");
    auto zero = snapshot(fs::path(opt2.out_dir) / "attacks");
    std::size_t bins = 0;
    for (const auto& [rel, bytes] : plain) {
        if (rel.size() > 4 && rel.compare(rel.size() - 4, 4, ".bin") == 0) {
            INFO("trace ", rel);
            REQUIRE(zero.count(rel) == 1);
            CHECK(zero.at(rel) == bytes);
            ++bins;
        }
    }
    CHECK(bins == 4);
}

TEST_CASE("report stage names its missing inputs") {
    TempDir dir("deps");
    std::string config = write_manifest(dir, kTinyManifest);
    CliOptions opt;
    opt.config_path = config;
    opt.out_dir = (dir.path / "out").string();

    CHECK_THROWS_AS(cmd_attack(opt), DependencyError);
    CHECK_THROWS_AS(cmd_measure(opt), DependencyError);

    try {
        cmd_report(opt);
        FAIL("report ran without its inputs");
    } catch (const DependencyError& e) {
        std::string msg = e.what();
        CHECK(msg.find("models/source.json") != std::string::npos);
        CHECK(msg.find("models/alt.json") != std::string::npos);
        CHECK(msg.find("train") != std::string::npos);
    }

    REQUIRE(cmd_train(opt) == 0);
    try {
        cmd_report(opt);
        FAIL("report ran without traces");
    } catch (const DependencyError& e) {
        std::string msg = e.what();
        CHECK(msg.find("attacks/index.json") != std::string::npos);
    }
}

TEST_CASE("verify command writes its artifact and honors the suite filter") {
    TempDir dir("verify");
    CliOptions opt;
    opt.out_dir = (dir.path / "out").string();
    opt.suites = {"axioms", "identity"};
    CHECK(cmd_verify(opt) == 0);

    json j = json::parse(slurp(fs::path(opt.out_dir) / "verify.json"));
    CHECK(j.at("verification").at("passed").get<bool>());
    REQUIRE(j.at("verification").at("suites").size() == 2);
    CHECK(j["verification"]["suites"][0]["name"] == "axioms");
    CHECK(j["verification"]["suites"][1]["name"] == "identity");

    opt.suites = {"nonsense"};
    CHECK_THROWS_AS(cmd_verify(opt), ConfigError);
}

TEST_CASE("exit codes distinguish usage, data, and verification problems") {
    CHECK(run_command([] { return 0; }) == 0);
    CHECK(run_command([] { return 3; }) == 3);
    CHECK(run_command([]() -> int { throw ConfigError("bad flag"); }) == 1);
    CHECK(run_command([]() -> int { throw CapacityError("too many"); }) == 1);
    CHECK(run_command([]() -> int { throw UnsupportedError("no"); }) == 1);
    CHECK(run_command([]() -> int { throw IoError("gone"); }) == 2);
    CHECK(run_command([]() -> int { throw MalformedFileError("trunc"); }) == 2);
    CHECK(run_command([]() -> int { throw ShapeError("dims"); }) == 2);
    CHECK(run_command([]() -> int {
              throw std::runtime_error("plain");
          }) == 2);
}

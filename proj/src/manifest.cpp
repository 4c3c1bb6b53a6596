#include "interlab/manifest.hpp"

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "interlab/errors.hpp"

namespace interlab {

using nlohmann::json;

namespace {

Activation activation_from_string(const std::string& s) {
    if (s == "relu") return Activation::relu;
    if (s == "softplus") return Activation::softplus;
    throw ConfigError("unknown activation: " + s);
}

std::string to_string(Activation a) {
    return a == Activation::relu ? "relu" : "softplus";
}

json model_spec_to_json(const ModelSpec& m) {
    json j;
    j["id"] = m.id;
    j["kind"] = m.kind;
    j["hidden"] = m.hidden;
    j["width"] = m.width;
    j["blocks"] = m.blocks;
    j["activation"] = to_string(m.activation);
    j["beta"] = m.beta;
    j["seed"] = m.seed;
    return j;
}

ModelSpec model_spec_from_json(const json& j) {
    ModelSpec m;
    m.id = j.value("id", m.id);
    m.kind = j.value("kind", m.kind);
    if (m.kind != "mlp" && m.kind != "residual")
        throw ConfigError("model kind must be mlp or residual: " + m.kind);
    m.hidden = j.value("hidden", m.hidden);
    m.width = j.value("width", m.width);
    m.blocks = j.value("blocks", m.blocks);
    if (j.contains("activation"))
        m.activation =
            activation_from_string(j.at("activation").get<std::string>());
    m.beta = j.value("beta", m.beta);
    m.seed = j.value("seed", m.seed);
    return m;
}

json dataset_to_json(const DatasetSpec& d) {
    json j;
    j["kind"] = d.kind == DatasetSpec::Kind::synthetic_blobs ? "blobs" : "idx";
    j["classes"] = d.num_classes;
    j["height"] = d.height;
    j["width"] = d.width;
    j["spread"] = d.cluster_spread;
    j["train_count"] = d.train_count;
    j["test_count"] = d.test_count;
    j["seed"] = d.seed;
    j["train_images"] = d.train_images;
    j["train_labels"] = d.train_labels;
    j["test_images"] = d.test_images;
    j["test_labels"] = d.test_labels;
    return j;
}

DatasetSpec dataset_from_json(const json& j) {
    DatasetSpec d;
    std::string kind = j.value("kind", std::string("blobs"));
    if (kind == "blobs")
        d.kind = DatasetSpec::Kind::synthetic_blobs;
    else if (kind == "idx")
        d.kind = DatasetSpec::Kind::idx_files;
    else
        throw ConfigError("unknown dataset kind: " + kind);
    d.num_classes = j.value("classes", d.num_classes);
    d.height = j.value("height", d.height);
    d.width = j.value("width", d.width);
    d.cluster_spread = j.value("spread", d.cluster_spread);
    d.train_count = j.value("train_count", d.train_count);
    d.test_count = j.value("test_count", d.test_count);
    d.seed = j.value("seed", d.seed);
    d.train_images = j.value("train_images", d.train_images);
    d.train_labels = j.value("train_labels", d.train_labels);
    d.test_images = j.value("test_images", d.test_images);
    d.test_labels = j.value("test_labels", d.test_labels);
    return d;
}

json report_to_json(const ReportSpec& r) {
    json j;
    j["c_values"] = r.c_values;
    j["p_values"] = r.p_values;
    j["lambdas"] = r.lambdas;
    j["bootstrap"] = r.bootstrap;
    j["tau"] = r.tau;
    j["curve_lambda"] = r.curve_lambda;
    j["trend_alpha"] = r.trend_alpha;
    j["trend_steps"] = r.trend_steps;
    j["trend_sigma"] = r.trend_sigma;
    j["trend_samples"] = r.trend_samples;
    j["trend_examples"] = r.trend_examples;
    j["trend_grid_side"] = r.trend_grid_side;
    j["curvature_inputs"] = r.curvature_inputs;
    j["heatmap_samples"] = r.heatmap_samples;
    j["heatmap_examples"] = r.heatmap_examples;
    return j;
}

ReportSpec report_from_json(const json& j) {
    ReportSpec r;
    r.c_values = j.value("c_values", r.c_values);
    r.p_values = j.value("p_values", r.p_values);
    r.lambdas = j.value("lambdas", r.lambdas);
    r.bootstrap = j.value("bootstrap", r.bootstrap);
    r.tau = j.value("tau", r.tau);
    r.curve_lambda = j.value("curve_lambda", r.curve_lambda);
    r.trend_alpha = j.value("trend_alpha", r.trend_alpha);
    r.trend_steps = j.value("trend_steps", r.trend_steps);
    r.trend_sigma = j.value("trend_sigma", r.trend_sigma);
    r.trend_samples = j.value("trend_samples", r.trend_samples);
    r.trend_examples = j.value("trend_examples", r.trend_examples);
    r.trend_grid_side = j.value("trend_grid_side", r.trend_grid_side);
    r.curvature_inputs = j.value("curvature_inputs", r.curvature_inputs);
    r.heatmap_samples = j.value("heatmap_samples", r.heatmap_samples);
    r.heatmap_examples = j.value("heatmap_examples", r.heatmap_examples);
    return r;
}

}  // namespace

Model build_model(const ModelSpec& spec, std::size_t input_dim,
                  std::size_t num_classes) {
    if (spec.kind == "residual")
        return make_residual_mlp(input_dim, spec.width, spec.blocks,
                                 num_classes, spec.activation, spec.beta,
                                 spec.seed);
    if (spec.kind != "mlp")
        throw ConfigError("unknown model kind: " + spec.kind);
    return make_mlp(input_dim, spec.hidden, num_classes, spec.activation,
                    spec.beta, spec.seed);
}

ExperimentManifest ExperimentManifest::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw MalformedFileError(std::string("manifest is not valid JSON: ") +
                                 e.what());
    }
    ExperimentManifest m;
    try {
        m.experiment_id = j.value("experiment_id", m.experiment_id);
        m.seed = j.value("seed", m.seed);
        m.jobs = j.value("jobs", m.jobs);
        if (j.contains("dataset")) m.dataset = dataset_from_json(j.at("dataset"));
        if (j.contains("source")) m.source = model_spec_from_json(j.at("source"));
        if (m.source.id.empty()) m.source.id = "source";
        if (j.contains("targets")) {
            m.targets.clear();
            std::size_t k = 0;
            for (const auto& t : j.at("targets")) {
                ModelSpec spec = model_spec_from_json(t);
                if (spec.id.empty()) spec.id = "target" + std::to_string(k);
                m.targets.push_back(std::move(spec));
                ++k;
            }
        }
        if (j.contains("train")) {
            const json& t = j.at("train");
            m.train.epochs = t.value("epochs", m.train.epochs);
            m.train.learning_rate = t.value("lr", m.train.learning_rate);
            m.train.batch_size = t.value("batch", m.train.batch_size);
            m.train.seed = t.value("seed", m.train.seed);
        }
        if (j.contains("attack"))
            m.attack = AttackConfig::from_json(j.at("attack").dump());
        m.examples = j.value("examples", m.examples);
        m.estimator = j.value("estimator", m.estimator);
        if (m.estimator != "closed-form" && m.estimator != "sampled" &&
            m.estimator != "brute-force")
            throw ConfigError("unknown estimator: " + m.estimator);
        if (j.contains("report")) m.report = report_from_json(j.at("report"));
    } catch (const json::exception& e) {
        throw ConfigError(std::string("manifest field error: ") + e.what());
    }
    return m;
}

std::string ExperimentManifest::to_json() const {
    json j;
    j["experiment_id"] = experiment_id;
    j["seed"] = seed;
    j["jobs"] = jobs;
    j["dataset"] = dataset_to_json(dataset);
    j["source"] = model_spec_to_json(source);
    j["targets"] = json::array();
    for (const auto& t : targets) j["targets"].push_back(model_spec_to_json(t));
    json tr;
    tr["epochs"] = train.epochs;
    tr["lr"] = train.learning_rate;
    tr["batch"] = train.batch_size;
    tr["seed"] = train.seed;
    j["train"] = tr;
    j["attack"] = json::parse(attack.to_json());
    j["examples"] = examples;
    j["estimator"] = estimator;
    j["report"] = report_to_json(report);
    return j.dump(2);
}

std::string ExperimentManifest::hash_hex() const {
    // The worker count is an execution detail: runs with different --jobs
    // values must produce byte-identical artifacts, hash included.
    json j = json::parse(to_json());
    j.erase("jobs");
    std::string canon = j.dump(2);
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : canon) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(h));
    return buf;
}

ExperimentManifest load_manifest(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open manifest " + path);
    std::ostringstream buf;
    buf << f.rdbuf();
    ExperimentManifest m = ExperimentManifest::from_json(buf.str());
    if (const char* env = std::getenv("INTERLAB_SEED")) {
        char* end = nullptr;
        unsigned long long v = std::strtoull(env, &end, 10);
        if (end == env || *end != '\0')
            throw ConfigError("INTERLAB_SEED must be an unsigned integer");
        m.seed = static_cast<std::uint64_t>(v);
    }
    return m;
}

}  // namespace interlab

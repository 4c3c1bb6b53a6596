#include "interlab/model_io.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "interlab/errors.hpp"

namespace interlab {

namespace {

using nlohmann::json;

constexpr const char* kMagic = "interlab-model";
constexpr int kFormatVersion = 1;
constexpr const char* kBase64Chars =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

std::string encode_doubles(const std::vector<double>& values) {
    // Little-endian f64; the build targets little-endian hosts, so memcpy
    // of the raw representation is the on-disk format.
    return base64_encode(reinterpret_cast<const unsigned char*>(values.data()),
                         values.size() * sizeof(double));
}

std::vector<double> decode_doubles(const std::string& text, std::size_t expect) {
    std::string raw = base64_decode(text);
    if (raw.size() != expect * sizeof(double))
        throw MalformedFileError("weight payload holds " +
                                 std::to_string(raw.size() / sizeof(double)) +
                                 " values, expected " + std::to_string(expect));
    std::vector<double> out(expect);
    std::memcpy(out.data(), raw.data(), raw.size());
    return out;
}

json layer_to_json(const Layer& l) {
    json j;
    switch (l.kind) {
        case LayerKind::dense:
            j["kind"] = "dense";
            j["in_dim"] = l.in_dim;
            j["out_dim"] = l.out_dim;
            j["weights"] = encode_doubles(l.weights);
            j["bias"] = encode_doubles(l.bias);
            break;
        case LayerKind::activation:
            j["kind"] = "activation";
            j["activation"] = l.act == Activation::relu ? "relu" : "softplus";
            if (l.act == Activation::softplus) j["beta"] = l.beta;
            break;
        case LayerKind::residual: {
            j["kind"] = "residual";
            json body = json::array();
            for (const Layer& b : l.body) body.push_back(layer_to_json(b));
            j["body"] = std::move(body);
            break;
        }
    }
    return j;
}

Layer layer_from_json(const json& j) {
    std::string kind = j.at("kind").get<std::string>();
    if (kind == "dense") {
        Layer l = Layer::dense(j.at("in_dim").get<std::size_t>(),
                               j.at("out_dim").get<std::size_t>());
        l.weights = decode_doubles(j.at("weights").get<std::string>(),
                                   l.in_dim * l.out_dim);
        l.bias = decode_doubles(j.at("bias").get<std::string>(), l.out_dim);
        return l;
    }
    if (kind == "activation") {
        std::string act = j.at("activation").get<std::string>();
        if (act == "relu") return Layer::activation_layer(Activation::relu);
        if (act == "softplus")
            return Layer::activation_layer(Activation::softplus,
                                           j.value("beta", 10.0));
        throw FormatError("unknown activation: " + act);
    }
    if (kind == "residual") {
        std::vector<Layer> body;
        for (const json& b : j.at("body")) body.push_back(layer_from_json(b));
        return Layer::residual(std::move(body));
    }
    throw FormatError("unknown layer kind: " + kind);
}

}  // namespace

std::string base64_encode(const unsigned char* data, std::size_t len) {
    std::string out;
    out.reserve((len + 2) / 3 * 4);
    for (std::size_t i = 0; i < len; i += 3) {
        unsigned int chunk = data[i] << 16;
        if (i + 1 < len) chunk |= data[i + 1] << 8;
        if (i + 2 < len) chunk |= data[i + 2];
        out.push_back(kBase64Chars[(chunk >> 18) & 0x3f]);
        out.push_back(kBase64Chars[(chunk >> 12) & 0x3f]);
        out.push_back(i + 1 < len ? kBase64Chars[(chunk >> 6) & 0x3f] : '=');
        out.push_back(i + 2 < len ? kBase64Chars[chunk & 0x3f] : '=');
    }
    return out;
}

std::string base64_decode(const std::string& text) {
    if (text.size() % 4 != 0)
        throw MalformedFileError("base64 payload length not a multiple of 4");
    static int lookup[256];
    static bool ready = false;
    if (!ready) {
        for (int& v : lookup) v = -1;
        for (int i = 0; i < 64; ++i)
            lookup[static_cast<unsigned char>(kBase64Chars[i])] = i;
        ready = true;
    }
    std::string out;
    out.reserve(text.size() / 4 * 3);
    for (std::size_t i = 0; i < text.size(); i += 4) {
        int vals[4];
        int pad = 0;
        for (int k = 0; k < 4; ++k) {
            char c = text[i + k];
            if (c == '=') {
                vals[k] = 0;
                ++pad;
            } else {
                vals[k] = lookup[static_cast<unsigned char>(c)];
                if (vals[k] < 0)
                    throw MalformedFileError("invalid base64 character");
                if (pad > 0)
                    throw MalformedFileError("base64 data after padding");
            }
        }
        unsigned int chunk = (vals[0] << 18) | (vals[1] << 12) | (vals[2] << 6) | vals[3];
        out.push_back(static_cast<char>((chunk >> 16) & 0xff));
        if (pad < 2) out.push_back(static_cast<char>((chunk >> 8) & 0xff));
        if (pad < 1) out.push_back(static_cast<char>(chunk & 0xff));
    }
    return out;
}

std::string model_to_json(const Model& m) {
    json j;
    j["magic"] = kMagic;
    j["format_version"] = kFormatVersion;
    j["input_dim"] = m.input_dim;
    j["num_classes"] = m.num_classes;
    json layers = json::array();
    for (const Layer& l : m.layers) layers.push_back(layer_to_json(l));
    j["layers"] = std::move(layers);
    return j.dump(2);
}

Model model_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw MalformedFileError(std::string("model file is not valid JSON: ") +
                                 e.what());
    }
    try {
        if (!j.contains("magic") || j.at("magic").get<std::string>() != kMagic)
            throw FormatError("not a model file (bad magic)");
        int version = j.at("format_version").get<int>();
        if (version != kFormatVersion)
            throw FormatError("unsupported model format version " +
                              std::to_string(version));
        Model m;
        m.input_dim = j.at("input_dim").get<std::size_t>();
        m.num_classes = j.at("num_classes").get<std::size_t>();
        for (const json& lj : j.at("layers")) m.layers.push_back(layer_from_json(lj));
        m.validate();
        return m;
    } catch (const json::exception& e) {
        throw MalformedFileError(std::string("model file missing fields: ") +
                                 e.what());
    }
}

void save_model(const Model& m, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write " + path);
    f << model_to_json(m) << "\n";
    if (!f) throw IoError("short write to " + path);
}

Model load_model(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path);
    std::ostringstream buf;
    buf << f.rdbuf();
    return model_from_json(buf.str());
}

}  // namespace interlab

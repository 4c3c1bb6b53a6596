#include "interlab/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "interlab/errors.hpp"
#include "interlab/random.hpp"

namespace interlab {

namespace {

double softplus_value(double z, double beta) {
    // Stable split: z + log1p(exp(-bz)) for positive z, log1p(exp(bz)) / b else.
    if (z > 0) return z + std::log1p(std::exp(-beta * z)) / beta;
    return std::log1p(std::exp(beta * z)) / beta;
}

double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    double e = std::exp(z);
    return e / (1.0 + e);
}

void apply_activation(const Layer& layer, std::vector<double>& v) {
    if (layer.act == Activation::relu) {
        for (double& z : v) z = z > 0 ? z : 0.0;
    } else {
        for (double& z : v) z = softplus_value(z, layer.beta);
    }
}

std::vector<double> dense_forward(const Layer& layer, const std::vector<double>& in) {
    std::vector<double> out(layer.out_dim);
    for (std::size_t r = 0; r < layer.out_dim; ++r) {
        double s = layer.bias[r];
        const double* wrow = layer.weights.data() + r * layer.in_dim;
        for (std::size_t c = 0; c < layer.in_dim; ++c) s += wrow[c] * in[c];
        out[r] = s;
    }
    return out;
}

// Inputs recorded on the way forward so the backward pass can replay them.
struct LayerTape {
    std::vector<double> input;
    std::vector<LayerTape> body;
};

std::vector<double> forward_stack(const std::vector<Layer>& layers,
                                  std::vector<double> v,
                                  std::vector<LayerTape>* tape) {
    if (tape) tape->resize(layers.size());
    for (std::size_t li = 0; li < layers.size(); ++li) {
        const Layer& layer = layers[li];
        LayerTape* t = tape ? &(*tape)[li] : nullptr;
        if (t) t->input = v;
        switch (layer.kind) {
            case LayerKind::dense:
                v = dense_forward(layer, v);
                break;
            case LayerKind::activation:
                apply_activation(layer, v);
                break;
            case LayerKind::residual: {
                std::vector<double> branch =
                    forward_stack(layer.body, v, t ? &t->body : nullptr);
                for (std::size_t i = 0; i < v.size(); ++i) v[i] += branch[i];
                break;
            }
        }
    }
    return v;
}

std::vector<double> backward_stack(const std::vector<Layer>& layers,
                                   const std::vector<LayerTape>& tape,
                                   std::vector<double> grad,
                                   std::vector<LayerGrads>* pgrads) {
    for (std::size_t k = layers.size(); k-- > 0;) {
        const Layer& layer = layers[k];
        const LayerTape& t = tape[k];
        switch (layer.kind) {
            case LayerKind::dense: {
                if (pgrads) {
                    LayerGrads& pg = (*pgrads)[k];
                    for (std::size_t r = 0; r < layer.out_dim; ++r) {
                        double g = grad[r];
                        pg.bias[r] += g;
                        double* gw = pg.weights.data() + r * layer.in_dim;
                        for (std::size_t c = 0; c < layer.in_dim; ++c)
                            gw[c] += g * t.input[c];
                    }
                }
                std::vector<double> gin(layer.in_dim, 0.0);
                for (std::size_t r = 0; r < layer.out_dim; ++r) {
                    const double* wrow = layer.weights.data() + r * layer.in_dim;
                    double g = grad[r];
                    for (std::size_t c = 0; c < layer.in_dim; ++c)
                        gin[c] += wrow[c] * g;
                }
                grad = std::move(gin);
                break;
            }
            case LayerKind::activation: {
                if (layer.act == Activation::relu) {
                    // Subgradient 0 at the kink.
                    for (std::size_t i = 0; i < grad.size(); ++i)
                        if (t.input[i] <= 0) grad[i] = 0.0;
                } else {
                    for (std::size_t i = 0; i < grad.size(); ++i)
                        grad[i] *= sigmoid(layer.beta * t.input[i]);
                }
                break;
            }
            case LayerKind::residual: {
                std::vector<double> branch = backward_stack(
                    layer.body, t.body, grad, pgrads ? &(*pgrads)[k].body : nullptr);
                for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += branch[i];
                break;
            }
        }
    }
    return grad;
}

std::size_t stack_out_dim(const std::vector<Layer>& layers, std::size_t in_dim);

std::size_t layer_out_dim(const Layer& layer, std::size_t in_dim) {
    switch (layer.kind) {
        case LayerKind::dense:
            if (layer.in_dim != in_dim)
                throw ShapeError("dense layer expects width " +
                                 std::to_string(layer.in_dim) + ", got " +
                                 std::to_string(in_dim));
            if (layer.weights.size() != layer.in_dim * layer.out_dim)
                throw ShapeError("dense weight count does not match dims");
            if (layer.bias.size() != layer.out_dim)
                throw ShapeError("dense bias count does not match out dim");
            return layer.out_dim;
        case LayerKind::activation:
            if (layer.act == Activation::softplus && layer.beta <= 0)
                throw ConfigError("softplus beta must be positive");
            return in_dim;
        case LayerKind::residual: {
            std::size_t out = stack_out_dim(layer.body, in_dim);
            if (out != in_dim)
                throw ShapeError("residual body must preserve width (" +
                                 std::to_string(in_dim) + " -> " +
                                 std::to_string(out) + ")");
            return in_dim;
        }
    }
    throw ConfigError("unknown layer kind");
}

std::size_t stack_out_dim(const std::vector<Layer>& layers, std::size_t in_dim) {
    std::size_t d = in_dim;
    for (const Layer& l : layers) d = layer_out_dim(l, d);
    return d;
}

bool stack_has_relu(const std::vector<Layer>& layers) {
    for (const Layer& l : layers) {
        if (l.kind == LayerKind::activation && l.act == Activation::relu) return true;
        if (l.kind == LayerKind::residual && stack_has_relu(l.body)) return true;
    }
    return false;
}

void init_stack(std::vector<Layer>& layers, RandomStream& rng) {
    for (Layer& l : layers) {
        if (l.kind == LayerKind::dense) {
            double limit = std::sqrt(6.0 / static_cast<double>(l.in_dim + l.out_dim));
            for (double& w : l.weights) w = rng.uniform(-limit, limit);
            for (double& b : l.bias) b = 0.0;
        } else if (l.kind == LayerKind::residual) {
            init_stack(l.body, rng);
        }
    }
}

void check_input(const Model& m, const Tensor& x) {
    if (x.numel() != m.input_dim)
        throw ShapeError("input has " + std::to_string(x.numel()) +
                         " elements, model expects " + std::to_string(m.input_dim));
}

void check_label(const Model& m, std::size_t y) {
    if (y >= m.num_classes)
        throw LabelError("label " + std::to_string(y) + " out of range [0, " +
                         std::to_string(m.num_classes) + ")");
}

}  // namespace

Layer Layer::dense(std::size_t in, std::size_t out) {
    Layer l;
    l.kind = LayerKind::dense;
    l.in_dim = in;
    l.out_dim = out;
    l.weights.assign(in * out, 0.0);
    l.bias.assign(out, 0.0);
    return l;
}

Layer Layer::activation_layer(Activation a, double beta) {
    Layer l;
    l.kind = LayerKind::activation;
    l.act = a;
    l.beta = beta;
    return l;
}

Layer Layer::residual(std::vector<Layer> body) {
    Layer l;
    l.kind = LayerKind::residual;
    l.body = std::move(body);
    return l;
}

std::string to_string(LossKind k) {
    return k == LossKind::cross_entropy ? "cross-entropy" : "margin";
}

LossKind loss_kind_from_string(const std::string& s) {
    if (s == "cross-entropy") return LossKind::cross_entropy;
    if (s == "margin") return LossKind::margin;
    throw ConfigError("unknown loss kind: " + s);
}

void Model::validate() const {
    if (input_dim == 0) throw ConfigError("model input_dim must be positive");
    if (num_classes < 2) throw ConfigError("model needs at least 2 classes");
    std::size_t out = stack_out_dim(layers, input_dim);
    if (out != num_classes)
        throw ShapeError("layer stack ends at width " + std::to_string(out) +
                         ", expected num_classes " + std::to_string(num_classes));
}

bool Model::has_relu() const { return stack_has_relu(layers); }

Tensor Model::forward(const Tensor& x) const {
    check_input(*this, x);
    return Tensor::flat(forward_stack(layers, x.data, nullptr));
}

std::vector<double> Model::forward_raw(const std::vector<double>& x) const {
    return forward_stack(layers, x, nullptr);
}

std::size_t Model::predict(const Tensor& x) const {
    std::vector<double> logits = forward_raw(x.data);
    return static_cast<std::size_t>(
        std::max_element(logits.begin(), logits.end()) - logits.begin());
}

Model make_mlp(std::size_t input_dim, const std::vector<std::size_t>& hidden,
               std::size_t num_classes, Activation act, double beta,
               std::uint64_t seed) {
    Model m;
    m.input_dim = input_dim;
    m.num_classes = num_classes;
    std::size_t prev = input_dim;
    for (std::size_t h : hidden) {
        m.layers.push_back(Layer::dense(prev, h));
        m.layers.push_back(Layer::activation_layer(act, beta));
        prev = h;
    }
    m.layers.push_back(Layer::dense(prev, num_classes));
    RandomStream rng(derive_seed(seed, 0x6d6c70));
    init_stack(m.layers, rng);
    m.validate();
    return m;
}

Model make_residual_mlp(std::size_t input_dim, std::size_t width,
                        std::size_t blocks, std::size_t num_classes,
                        Activation act, double beta, std::uint64_t seed) {
    Model m;
    m.input_dim = input_dim;
    m.num_classes = num_classes;
    m.layers.push_back(Layer::dense(input_dim, width));
    m.layers.push_back(Layer::activation_layer(act, beta));
    for (std::size_t b = 0; b < blocks; ++b) {
        std::vector<Layer> body;
        body.push_back(Layer::dense(width, width));
        body.push_back(Layer::activation_layer(act, beta));
        m.layers.push_back(Layer::residual(std::move(body)));
    }
    m.layers.push_back(Layer::dense(width, num_classes));
    RandomStream rng(derive_seed(seed, 0x726573));
    init_stack(m.layers, rng);
    m.validate();
    return m;
}

std::vector<double> softmax(const std::vector<double>& logits) {
    double mx = -std::numeric_limits<double>::infinity();
    for (double v : logits) mx = std::max(mx, v);
    std::vector<double> p(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(logits[i] - mx);
        sum += p[i];
    }
    for (double& v : p) v /= sum;
    return p;
}

namespace {

std::size_t margin_rival(const std::vector<double>& logits, std::size_t y) {
    // Best wrong class; ties resolved to the smallest index so gradients
    // are reproducible.
    std::size_t best = y == 0 ? 1 : 0;
    for (std::size_t c = 0; c < logits.size(); ++c) {
        if (c == y) continue;
        if (logits[c] > logits[best]) best = c;
    }
    return best;
}

double logsumexp(const std::vector<double>& v) {
    double mx = -std::numeric_limits<double>::infinity();
    for (double x : v) mx = std::max(mx, x);
    double s = 0.0;
    for (double x : v) s += std::exp(x - mx);
    return mx + std::log(s);
}

}  // namespace

double loss_from_logits(const std::vector<double>& logits, std::size_t y,
                        LossKind kind) {
    if (y >= logits.size())
        throw LabelError("label " + std::to_string(y) + " out of range [0, " +
                         std::to_string(logits.size()) + ")");
    if (kind == LossKind::cross_entropy) {
        return logsumexp(logits) - logits[y];
    }
    if (logits.size() < 2)
        throw ConfigError("margin loss needs at least 2 classes");
    return logits[margin_rival(logits, y)] - logits[y];
}

double loss(const Model& m, const Tensor& x, std::size_t y, LossKind kind) {
    check_input(m, x);
    check_label(m, y);
    return loss_from_logits(m.forward_raw(x.data), y, kind);
}

Tensor input_gradient(const Model& m, const Tensor& x, std::size_t y,
                      LossKind kind) {
    check_input(m, x);
    check_label(m, y);
    std::vector<LayerTape> tape;
    std::vector<double> logits = forward_stack(m.layers, x.data, &tape);

    std::vector<double> glogits(logits.size(), 0.0);
    if (kind == LossKind::cross_entropy) {
        glogits = softmax(logits);
        glogits[y] -= 1.0;
    } else {
        glogits[margin_rival(logits, y)] = 1.0;
        glogits[y] -= 1.0;
    }
    return Tensor::flat(
        backward_stack(m.layers, tape, std::move(glogits), nullptr));
}

std::vector<LayerGrads> zero_grads(const std::vector<Layer>& layers) {
    std::vector<LayerGrads> out(layers.size());
    for (std::size_t i = 0; i < layers.size(); ++i) {
        if (layers[i].kind == LayerKind::dense) {
            out[i].weights.assign(layers[i].weights.size(), 0.0);
            out[i].bias.assign(layers[i].bias.size(), 0.0);
        } else if (layers[i].kind == LayerKind::residual) {
            out[i].body = zero_grads(layers[i].body);
        }
    }
    return out;
}

double accumulate_gradients(const Model& m, const Tensor& x, std::size_t y,
                            LossKind kind, std::vector<LayerGrads>& grads) {
    check_input(m, x);
    check_label(m, y);
    std::vector<LayerTape> tape;
    std::vector<double> logits = forward_stack(m.layers, x.data, &tape);
    double value = loss_from_logits(logits, y, kind);

    std::vector<double> glogits(logits.size(), 0.0);
    if (kind == LossKind::cross_entropy) {
        glogits = softmax(logits);
        glogits[y] -= 1.0;
    } else {
        glogits[margin_rival(logits, y)] = 1.0;
        glogits[y] -= 1.0;
    }
    backward_stack(m.layers, tape, std::move(glogits), &grads);
    return value;
}

void apply_sgd_step(std::vector<Layer>& layers,
                    const std::vector<LayerGrads>& grads, double step) {
    for (std::size_t i = 0; i < layers.size(); ++i) {
        Layer& l = layers[i];
        if (l.kind == LayerKind::dense) {
            for (std::size_t k = 0; k < l.weights.size(); ++k)
                l.weights[k] -= step * grads[i].weights[k];
            for (std::size_t k = 0; k < l.bias.size(); ++k)
                l.bias[k] -= step * grads[i].bias[k];
        } else if (l.kind == LayerKind::residual) {
            apply_sgd_step(l.body, grads[i].body, step);
        }
    }
}

std::vector<double> hessian_probe_fn(
    const std::function<Tensor(const Tensor&)>& gradient, const Tensor& x,
    const std::vector<std::pair<std::size_t, std::size_t>>& pairs,
    double step) {
    if (step <= 0) throw ConfigError("hessian probe step must be positive");
    // Group by the differentiated coordinate: one gradient pair per column.
    std::vector<double> out(pairs.size(), 0.0);
    std::vector<std::size_t> cols;
    for (const auto& [a, b] : pairs) {
        if (a >= x.numel() || b >= x.numel())
            throw InvalidPairError("hessian probe pair index out of range");
        cols.push_back(b);
    }
    std::sort(cols.begin(), cols.end());
    cols.erase(std::unique(cols.begin(), cols.end()), cols.end());
    for (std::size_t b : cols) {
        Tensor xp = x;
        Tensor xm = x;
        xp.data[b] += step;
        xm.data[b] -= step;
        Tensor gp = gradient(xp);
        Tensor gm = gradient(xm);
        for (std::size_t k = 0; k < pairs.size(); ++k) {
            if (pairs[k].second != b) continue;
            std::size_t a = pairs[k].first;
            out[k] = (gp.data[a] - gm.data[a]) / (2.0 * step);
        }
    }
    return out;
}

std::vector<double> hessian_probe(const Model& m, const Tensor& x, std::size_t y,
                                  LossKind kind,
                                  const std::vector<std::pair<std::size_t, std::size_t>>& pairs,
                                  double step) {
    if (m.has_relu())
        throw UnsupportedError(
            "curvature probe requires a smooth activation; this model uses relu");
    check_input(m, x);
    check_label(m, y);
    return hessian_probe_fn(
        [&](const Tensor& xq) { return input_gradient(m, xq, y, kind); }, x,
        pairs, step);
}

}  // namespace interlab

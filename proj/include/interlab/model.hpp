#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "interlab/tensor.hpp"

namespace interlab {

enum class Activation { relu, softplus };

enum class LayerKind { dense, activation, residual };

// One layer of a feed-forward stack. A tagged struct instead of a variant
// because residual blocks nest a vector of layers and std::variant cannot
// hold an incomplete type.
struct Layer {
    LayerKind kind = LayerKind::dense;

    // dense: out = W * in + b, W stored row-major (out_dim x in_dim).
    std::size_t in_dim = 0;
    std::size_t out_dim = 0;
    std::vector<double> weights;
    std::vector<double> bias;

    // activation
    Activation act = Activation::softplus;
    double beta = 10.0;

    // residual: out = in + body(in); body must preserve dimension.
    std::vector<Layer> body;

    static Layer dense(std::size_t in, std::size_t out);
    static Layer activation_layer(Activation a, double beta = 10.0);
    static Layer residual(std::vector<Layer> body);
};

enum class LossKind { cross_entropy, margin };

std::string to_string(LossKind k);
LossKind loss_kind_from_string(const std::string& s);

struct Model {
    std::size_t input_dim = 0;
    std::size_t num_classes = 0;
    std::vector<Layer> layers;

    // Throws ShapeError/ConfigError if layer dimensions do not compose,
    // the final width is not num_classes, or an activation beta is <= 0.
    void validate() const;

    bool has_relu() const;

    Tensor forward(const Tensor& x) const;

    // Convenience: forward on a raw vector (used by hot loops).
    std::vector<double> forward_raw(const std::vector<double>& x) const;

    std::size_t predict(const Tensor& x) const;
};

// Seeded weight init: uniform(-limit, limit) per dense layer with
// limit = sqrt(6 / (in + out)).
Model make_mlp(std::size_t input_dim, const std::vector<std::size_t>& hidden,
               std::size_t num_classes, Activation act, double beta,
               std::uint64_t seed);

// Dense(in->width), `blocks` residual blocks each wrapping
// [dense(width->width), activation], then dense(width->classes).
Model make_residual_mlp(std::size_t input_dim, std::size_t width,
                        std::size_t blocks, std::size_t num_classes,
                        Activation act, double beta, std::uint64_t seed);

// softmax with the max-shift trick; sums to 1.
std::vector<double> softmax(const std::vector<double>& logits);

// Loss on logits. cross_entropy = -log softmax_y (log-sum-exp form);
// margin = max_{c != y} h_c - h_y (ties resolved to the smallest index).
double loss_from_logits(const std::vector<double>& logits, std::size_t y,
                        LossKind kind);

double loss(const Model& m, const Tensor& x, std::size_t y, LossKind kind);

// d loss / d x via reverse mode through the layer stack.
Tensor input_gradient(const Model& m, const Tensor& x, std::size_t y,
                      LossKind kind);

// Parameter-gradient buffers mirroring a layer stack (empty for layers
// without parameters).
struct LayerGrads {
    std::vector<double> weights;
    std::vector<double> bias;
    std::vector<LayerGrads> body;
};

std::vector<LayerGrads> zero_grads(const std::vector<Layer>& layers);

// Adds d loss / d params for one example into grads; returns the loss.
double accumulate_gradients(const Model& m, const Tensor& x, std::size_t y,
                            LossKind kind, std::vector<LayerGrads>& grads);

// params -= step * grads
void apply_sgd_step(std::vector<Layer>& layers,
                    const std::vector<LayerGrads>& grads, double step);

// Second derivatives d2 loss / dx_a dx_b for the listed index pairs, via
// central differences of the analytic gradient. Refuses relu models
// (UnsupportedError): the probe needs two smooth derivatives.
std::vector<double> hessian_probe(const Model& m, const Tensor& x, std::size_t y,
                                  LossKind kind,
                                  const std::vector<std::pair<std::size_t, std::size_t>>& pairs,
                                  double step = 1e-5);

// Same probe for an arbitrary gradient map (used by synthetic-loss tests
// and the curvature histograms).
std::vector<double> hessian_probe_fn(
    const std::function<Tensor(const Tensor&)>& gradient, const Tensor& x,
    const std::vector<std::pair<std::size_t, std::size_t>>& pairs,
    double step = 1e-5);

}  // namespace interlab

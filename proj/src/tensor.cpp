#include "interlab/tensor.hpp"

#include <cmath>
#include <cstdlib>
#include <string>

#include "interlab/errors.hpp"

namespace interlab {

namespace {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!same_shape(a, b)) {
        throw ShapeError(std::string(op) + ": tensor shapes differ (" +
                         std::to_string(a.numel()) + " vs " +
                         std::to_string(b.numel()) + " elements)");
    }
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape_)
    : shape(std::move(shape_)), data(shape_product(shape), 0.0) {}

Tensor::Tensor(std::vector<std::size_t> shape_, std::vector<double> data_)
    : shape(std::move(shape_)), data(std::move(data_)) {
    validate();
}

Tensor Tensor::zeros(std::size_t n) { return Tensor({n}); }

Tensor Tensor::flat(std::vector<double> values) {
    std::vector<std::size_t> shape{values.size()};
    return Tensor(std::move(shape), std::move(values));
}

std::size_t Tensor::numel() const { return data.size(); }

void Tensor::validate() const {
    if (shape_product(shape) != data.size()) {
        throw ShapeError("tensor data size " + std::to_string(data.size()) +
                         " does not match shape product " +
                         std::to_string(shape_product(shape)));
    }
}

bool same_shape(const Tensor& a, const Tensor& b) {
    return a.shape == b.shape;
}

Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    Tensor out = a;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += b.data[i];
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "sub");
    Tensor out = a;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] -= b.data[i];
    return out;
}

Tensor scale(const Tensor& a, double s) {
    Tensor out = a;
    for (double& v : out.data) v *= s;
    return out;
}

double dot(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "dot");
    double s = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) s += a.data[i] * b.data[i];
    return s;
}

double l2_norm(const Tensor& a) { return std::sqrt(dot(a, a)); }

double linf_norm(const Tensor& a) {
    double m = 0.0;
    for (double v : a.data) m = std::max(m, std::fabs(v));
    return m;
}

double lp_norm(const Tensor& a, double p) {
    double s = 0.0;
    for (double v : a.data) s += std::pow(std::fabs(v), p);
    return std::pow(s, 1.0 / p);
}

Tensor rescale_to_l2(const Tensor& a, double target) {
    double norm = l2_norm(a);
    if (norm == 0.0) return a;
    return scale(a, target / norm);
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "max_abs_diff");
    double m = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i)
        m = std::max(m, std::fabs(a.data[i] - b.data[i]));
    return m;
}

}  // namespace interlab

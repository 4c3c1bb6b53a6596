#pragma once

#include <cstddef>
#include <vector>

namespace interlab {

// Dense row-major tensor of doubles. The library mostly deals in flat
// vectors (inputs, perturbations, gradients); shape is carried so raster
// metadata survives serialization.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> shape_);
    Tensor(std::vector<std::size_t> shape_, std::vector<double> data_);

    static Tensor zeros(std::size_t n);
    static Tensor flat(std::vector<double> values);

    std::size_t numel() const;
    double& operator[](std::size_t i) { return data[i]; }
    double operator[](std::size_t i) const { return data[i]; }

    // Throws ShapeError unless data.size() matches the shape product.
    void validate() const;
};

bool same_shape(const Tensor& a, const Tensor& b);

// Elementwise helpers used across the attack/game code.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);

double dot(const Tensor& a, const Tensor& b);
double l2_norm(const Tensor& a);
double linf_norm(const Tensor& a);
double lp_norm(const Tensor& a, double p);

// Rescales to the requested L2 norm; a zero tensor is returned unchanged.
Tensor rescale_to_l2(const Tensor& a, double target);

// max |a_i - b_i| over coordinates (shapes must match).
double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace interlab

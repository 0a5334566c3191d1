#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "picore/errors.hpp"

namespace picore::ad {

/// Dense real tensor, row-major, rank <= 3.
struct Tensor {
    std::vector<int64_t> shape;
    std::vector<double> data;

    Tensor() = default;
    Tensor(std::vector<int64_t> shape_, double fill = 0.0);
    static Tensor scalar(double v);

    int64_t size() const { return static_cast<int64_t>(data.size()); }
    double& operator[](int64_t i) { return data[i]; }
    double operator[](int64_t i) const { return data[i]; }
};

/// Reverse-mode tape. Ops append nodes (already topologically ordered);
/// backward() walks the tape in reverse from the root. One tape per
/// forward+backward pass; tapes are independent and thread-compatible.
class Tape {
  public:
    int leaf(Tensor value);

    int add(int a, int b);
    int sub(int a, int b);
    int mul(int a, int b);  ///< elementwise, same shape
    int scale(int a, double c);
    int gelu(int a);

    /// Pointwise affine over grid points: x [Cin, S] -> [Cout, S] with
    /// weight [Cout, Cin] and bias [Cout].
    int affine_pointwise(int x, int weight, int bias);

    /// Truncated-spectrum complex multiply along the last axis.
    /// x [C_in, n], weights [C_out, C_in, modes] as separate re/im tensors.
    int spectral_conv_1d(int x, int w_re, int w_im);

    /// 2D variant: x [C_in, n0, n1], weights [C_out, C_in, 2*m0, m1] covering
    /// the lowest m0 and highest m0 frequencies along axis 0 and the lowest
    /// m1 along axis 1.
    int spectral_conv_2d(int x, int w_re, int w_im);

    /// Finite-difference stencil along one axis of a [d0][d1][d2] view.
    int fd(int x, int axis, int order, bool periodic, double h);

    /// Velocity component from a vorticity block [T, n, n] via the spectral
    /// Poisson solve (see pde::ns_velocity_component).
    int ns_velocity(int x, int component, double domain_length);

    /// factor * mean(x^2) as a scalar node.
    int mean_sq_scaled(int x, double factor);

    /// factor * mean over the listed flat indices of x^2.
    int masked_mean_sq_scaled(int x, std::vector<int64_t> indices, double factor);

    const Tensor& value(int id) const { return nodes_[id].value; }
    const Tensor& grad(int id) const { return nodes_[id].grad; }

    /// Seeds d(root)/d(root) = 1 and accumulates gradients down the tape.
    void backward(int root);

    size_t size() const { return nodes_.size(); }

  private:
    struct Node {
        Tensor value;
        Tensor grad;
        std::function<void()> backprop;  // empty for leaves
    };

    int push(Tensor value, std::function<void()> backprop);
    Tensor& grad_mut(int id) { return nodes_[id].grad; }
    void check_same_shape(int a, int b, const char* op) const;

    std::vector<Node> nodes_;
};

}  // namespace picore::ad

#include "picore/autodiff.hpp"

#include <cmath>
#include <complex>
#include <memory>

#include "picore/fft.hpp"
#include "picore/residuals.hpp"
#include "picore/solvers.hpp"

namespace picore::ad {

namespace {
using Complex = std::complex<double>;

int64_t shape_size(const std::vector<int64_t>& shape) {
    int64_t s = 1;
    for (int64_t d : shape) s *= d;
    return s;
}
}  // namespace

Tensor::Tensor(std::vector<int64_t> shape_, double fill)
    : shape(std::move(shape_)), data(shape_size(shape), fill) {}

Tensor Tensor::scalar(double v) {
    Tensor t;
    t.shape = {};
    t.data = {v};
    return t;
}

int Tape::push(Tensor value, std::function<void()> backprop) {
    Node node;
    node.grad = Tensor(value.shape, 0.0);
    node.value = std::move(value);
    node.backprop = std::move(backprop);
    nodes_.push_back(std::move(node));
    return static_cast<int>(nodes_.size()) - 1;
}

int Tape::leaf(Tensor value) { return push(std::move(value), {}); }

void Tape::check_same_shape(int a, int b, const char* op) const {
    if (nodes_[a].value.shape != nodes_[b].value.shape)
        throw ShapeMismatch(std::string(op) + ": operand shapes differ");
}

void Tape::backward(int root) {
    if (nodes_[root].value.size() != 1)
        throw ConfigError("Tape::backward: root must be scalar");
    nodes_[root].grad.data[0] = 1.0;
    for (int i = root; i >= 0; --i)
        if (nodes_[i].backprop) nodes_[i].backprop();
}

int Tape::add(int a, int b) {
    check_same_shape(a, b, "add");
    Tensor out = nodes_[a].value;
    for (int64_t i = 0; i < out.size(); ++i) out[i] += nodes_[b].value[i];
    int id = push(std::move(out), {});
    nodes_[id].backprop = [this, id, a, b]() {
        const Tensor& g = nodes_[id].grad;
        for (int64_t i = 0; i < g.size(); ++i) {
            nodes_[a].grad[i] += g[i];
            nodes_[b].grad[i] += g[i];
        }
    };
    return id;
}

int Tape::sub(int a, int b) {
    check_same_shape(a, b, "sub");
    Tensor out = nodes_[a].value;
    for (int64_t i = 0; i < out.size(); ++i) out[i] -= nodes_[b].value[i];
    int id = push(std::move(out), {});
    nodes_[id].backprop = [this, id, a, b]() {
        const Tensor& g = nodes_[id].grad;
        for (int64_t i = 0; i < g.size(); ++i) {
            nodes_[a].grad[i] += g[i];
            nodes_[b].grad[i] -= g[i];
        }
    };
    return id;
}

int Tape::mul(int a, int b) {
    check_same_shape(a, b, "mul");
    Tensor out = nodes_[a].value;
    for (int64_t i = 0; i < out.size(); ++i) out[i] *= nodes_[b].value[i];
    int id = push(std::move(out), {});
    nodes_[id].backprop = [this, id, a, b]() {
        const Tensor& g = nodes_[id].grad;
        for (int64_t i = 0; i < g.size(); ++i) {
            nodes_[a].grad[i] += g[i] * nodes_[b].value[i];
            nodes_[b].grad[i] += g[i] * nodes_[a].value[i];
        }
    };
    return id;
}

int Tape::scale(int a, double c) {
    Tensor out = nodes_[a].value;
    for (double& v : out.data) v *= c;
    int id = push(std::move(out), {});
    nodes_[id].backprop = [this, id, a, c]() {
        const Tensor& g = nodes_[id].grad;
        for (int64_t i = 0; i < g.size(); ++i) nodes_[a].grad[i] += c * g[i];
    };
    return id;
}

int Tape::gelu(int a) {
    Tensor out = nodes_[a].value;
    for (double& v : out.data) v = 0.5 * v * (1.0 + std::erf(v * M_SQRT1_2));
    int id = push(std::move(out), {});
    nodes_[id].backprop = [this, id, a]() {
        const Tensor& g = nodes_[id].grad;
        const Tensor& x = nodes_[a].value;
        constexpr double inv_sqrt_2pi = 0.3989422804014327;
        for (int64_t i = 0; i < g.size(); ++i) {
            double cdf = 0.5 * (1.0 + std::erf(x[i] * M_SQRT1_2));
            double pdf = inv_sqrt_2pi * std::exp(-0.5 * x[i] * x[i]);
            nodes_[a].grad[i] += g[i] * (cdf + x[i] * pdf);
        }
    };
    return id;
}

int Tape::affine_pointwise(int x, int weight, int bias) {
    const Tensor& xv = nodes_[x].value;
    const Tensor& wv = nodes_[weight].value;
    const Tensor& bv = nodes_[bias].value;
    if (xv.shape.size() < 2 || wv.shape.size() != 2)
        throw ShapeMismatch("affine_pointwise: bad ranks");
    int64_t c_in = xv.shape[0];
    int64_t s = xv.size() / c_in;
    int64_t c_out = wv.shape[0];
    if (wv.shape[1] != c_in || bv.size() != c_out)
        throw ShapeMismatch("affine_pointwise: channel mismatch");

    std::vector<int64_t> out_shape = xv.shape;
    out_shape[0] = c_out;
    Tensor out(out_shape);
    for (int64_t o = 0; o < c_out; ++o) {
        double* yo = out.data.data() + o * s;
        for (int64_t j = 0; j < s; ++j) yo[j] = bv[o];
        for (int64_t i = 0; i < c_in; ++i) {
            double w = wv[o * c_in + i];
            const double* xi = xv.data.data() + i * s;
            for (int64_t j = 0; j < s; ++j) yo[j] += w * xi[j];
        }
    }
    int id = push(std::move(out), {});
    nodes_[id].backprop = [this, id, x, weight, bias, c_in, c_out, s]() {
        const Tensor& g = nodes_[id].grad;
        const Tensor& xv2 = nodes_[x].value;
        const Tensor& wv2 = nodes_[weight].value;
        for (int64_t o = 0; o < c_out; ++o) {
            const double* go = g.data.data() + o * s;
            double bsum = 0.0;
            for (int64_t j = 0; j < s; ++j) bsum += go[j];
            nodes_[bias].grad[o] += bsum;
            for (int64_t i = 0; i < c_in; ++i) {
                const double* xi = xv2.data.data() + i * s;
                double* gxi = nodes_[x].grad.data.data() + i * s;
                double w = wv2[o * c_in + i];
                double wsum = 0.0;
                for (int64_t j = 0; j < s; ++j) {
                    wsum += go[j] * xi[j];
                    gxi[j] += w * go[j];
                }
                nodes_[weight].grad[o * c_in + i] += wsum;
            }
        }
    };
    return id;
}

int Tape::spectral_conv_1d(int x, int w_re, int w_im) {
    const Tensor& xv = nodes_[x].value;
    const Tensor& wr = nodes_[w_re].value;
    const Tensor& wi = nodes_[w_im].value;
    if (xv.shape.size() != 2 || wr.shape.size() != 3 || wr.shape != wi.shape)
        throw ShapeMismatch("spectral_conv_1d: bad shapes");
    int64_t c_in = xv.shape[0];
    int n = static_cast<int>(xv.shape[1]);
    int64_t c_out = wr.shape[0];
    int64_t modes = wr.shape[2];
    if (wr.shape[1] != c_in) throw ShapeMismatch("spectral_conv_1d: channel mismatch");
    if (2 * modes > n) throw ResolutionTooLow("spectral_conv_1d: need n >= 2*modes");

    // Saved for the backward pass.
    auto x_hat = std::make_shared<std::vector<Complex>>(c_in * n);
    for (int64_t i = 0; i < c_in; ++i) {
        auto spec = fft::forward_real_1d(xv.data.data() + i * n, n);
        std::copy(spec.begin(), spec.end(), x_hat->begin() + i * n);
    }

    Tensor out({c_out, n});
    std::vector<Complex> z(n);
    for (int64_t o = 0; o < c_out; ++o) {
        std::fill(z.begin(), z.end(), Complex(0.0, 0.0));
        for (int64_t k = 0; k < modes; ++k) {
            Complex acc(0.0, 0.0);
            for (int64_t i = 0; i < c_in; ++i) {
                int64_t w_idx = (o * c_in + i) * modes + k;
                Complex w(wr[w_idx], wi[w_idx]);
                acc += w * (*x_hat)[i * n + k];
            }
            z[k] = acc;
        }
        auto y = fft::inverse_to_real_1d(z.data(), n);
        std::copy(y.begin(), y.end(), out.data.begin() + o * n);
    }

    int id = push(std::move(out), {});
    nodes_[id].backprop = [this, id, x, w_re, w_im, x_hat, c_in, c_out, modes, n]() {
        const Tensor& g = nodes_[id].grad;
        const Tensor& wr2 = nodes_[w_re].value;
        const Tensor& wi2 = nodes_[w_im].value;

        // z_bar = forward_fft(g) / n on the kept modes.
        std::vector<Complex> z_bar(c_out * modes);
        for (int64_t o = 0; o < c_out; ++o) {
            auto spec = fft::forward_real_1d(g.data.data() + o * n, n);
            for (int64_t k = 0; k < modes; ++k)
                z_bar[o * modes + k] = spec[k] / static_cast<double>(n);
        }

        std::vector<Complex> x_bar_hat(c_in * n, Complex(0.0, 0.0));
        for (int64_t o = 0; o < c_out; ++o) {
            for (int64_t k = 0; k < modes; ++k) {
                Complex zb = z_bar[o * modes + k];
                for (int64_t i = 0; i < c_in; ++i) {
                    int64_t w_idx = (o * c_in + i) * modes + k;
                    Complex w(wr2[w_idx], wi2[w_idx]);
                    Complex wbar = zb * std::conj((*x_hat)[i * n + k]);
                    nodes_[w_re].grad[w_idx] += wbar.real();
                    nodes_[w_im].grad[w_idx] += wbar.imag();
                    x_bar_hat[i * n + k] += std::conj(w) * zb;
                }
            }
        }
        // Adjoint of (forward FFT, truncate): unnormalized backward transform.
        std::vector<Complex> buf(n);
        for (int64_t i = 0; i < c_in; ++i) {
            fft::transform_1d(x_bar_hat.data() + i * n, buf.data(), n, fft::kBackward);
            for (int j = 0; j < n; ++j) nodes_[x].grad[i * n + j] += buf[j].real();
        }
    };
    return id;
}

int Tape::spectral_conv_2d(int x, int w_re, int w_im) {
    const Tensor& xv = nodes_[x].value;
    const Tensor& wr = nodes_[w_re].value;
    const Tensor& wi = nodes_[w_im].value;
    if (xv.shape.size() != 3 || wr.shape.size() != 4 || wr.shape != wi.shape)
        throw ShapeMismatch("spectral_conv_2d: bad shapes");
    int64_t c_in = xv.shape[0];
    int n0 = static_cast<int>(xv.shape[1]);
    int n1 = static_cast<int>(xv.shape[2]);
    int64_t c_out = wr.shape[0];
    int64_t m0 = wr.shape[2] / 2;
    int64_t m1 = wr.shape[3];
    if (wr.shape[1] != c_in) throw ShapeMismatch("spectral_conv_2d: channel mismatch");
    if (2 * m0 > n0 || 2 * m1 > n1)
        throw ResolutionTooLow("spectral_conv_2d: need n >= 2*modes per axis");

    int64_t plane = static_cast<int64_t>(n0) * n1;
    // Row r of the weight block -> frequency index along axis 0.
    auto k0_of = [n0, m0](int64_t r) {
        return r < m0 ? r : n0 - 2 * m0 + r;
    };

    auto x_hat = std::make_shared<std::vector<Complex>>(c_in * plane);
    for (int64_t i = 0; i < c_in; ++i) {
        auto spec = fft::forward_real_2d(xv.data.data() + i * plane, n0, n1);
        std::copy(spec.begin(), spec.end(), x_hat->begin() + i * plane);
    }

    Tensor out({c_out, n0, n1});
    std::vector<Complex> z(plane);
    for (int64_t o = 0; o < c_out; ++o) {
        std::fill(z.begin(), z.end(), Complex(0.0, 0.0));
        for (int64_t r = 0; r < 2 * m0; ++r) {
            int64_t k0 = k0_of(r);
            for (int64_t k1 = 0; k1 < m1; ++k1) {
                Complex acc(0.0, 0.0);
                for (int64_t i = 0; i < c_in; ++i) {
                    int64_t w_idx = ((o * c_in + i) * 2 * m0 + r) * m1 + k1;
                    Complex w(wr[w_idx], wi[w_idx]);
                    acc += w * (*x_hat)[i * plane + k0 * n1 + k1];
                }
                z[k0 * n1 + k1] = acc;
            }
        }
        auto y = fft::inverse_to_real_2d(z.data(), n0, n1);
        std::copy(y.begin(), y.end(), out.data.begin() + o * plane);
    }

    int id = push(std::move(out), {});
    nodes_[id].backprop = [this, id, x, w_re, w_im, x_hat, c_in, c_out, m0, m1, n0, n1,
                           plane, k0_of]() {
        const Tensor& g = nodes_[id].grad;
        const Tensor& wr2 = nodes_[w_re].value;
        const Tensor& wi2 = nodes_[w_im].value;
        double norm = static_cast<double>(plane);

        std::vector<Complex> g_hat(c_out * plane);
        for (int64_t o = 0; o < c_out; ++o) {
            auto spec = fft::forward_real_2d(g.data.data() + o * plane, n0, n1);
            std::copy(spec.begin(), spec.end(), g_hat.begin() + o * plane);
        }

        std::vector<Complex> x_bar_hat(c_in * plane, Complex(0.0, 0.0));
        for (int64_t o = 0; o < c_out; ++o) {
            for (int64_t r = 0; r < 2 * m0; ++r) {
                int64_t k0 = k0_of(r);
                for (int64_t k1 = 0; k1 < m1; ++k1) {
                    Complex zb = g_hat[o * plane + k0 * n1 + k1] / norm;
                    for (int64_t i = 0; i < c_in; ++i) {
                        int64_t w_idx = ((o * c_in + i) * 2 * m0 + r) * m1 + k1;
                        Complex w(wr2[w_idx], wi2[w_idx]);
                        Complex wbar = zb * std::conj((*x_hat)[i * plane + k0 * n1 + k1]);
                        nodes_[w_re].grad[w_idx] += wbar.real();
                        nodes_[w_im].grad[w_idx] += wbar.imag();
                        x_bar_hat[i * plane + k0 * n1 + k1] += std::conj(w) * zb;
                    }
                }
            }
        }
        std::vector<Complex> buf(plane);
        for (int64_t i = 0; i < c_in; ++i) {
            fft::transform_2d(x_bar_hat.data() + i * plane, buf.data(), n0, n1, fft::kBackward);
            for (int64_t j = 0; j < plane; ++j) nodes_[x].grad[i * plane + j] += buf[j].real();
        }
    };
    return id;
}

namespace {

std::array<int64_t, 3> dims3_of(const std::vector<int64_t>& shape) {
    std::array<int64_t, 3> dims = {1, 1, 1};
    size_t offset = 3 - shape.size();
    for (size_t i = 0; i < shape.size(); ++i) dims[offset + i] = shape[i];
    return dims;
}

}  // namespace

int Tape::fd(int x, int axis, int order, bool periodic, double h) {
    const Tensor& xv = nodes_[x].value;
    if (xv.shape.empty() || xv.shape.size() > 3) throw ShapeMismatch("fd: rank must be 1..3");
    std::array<int64_t, 3> dims = dims3_of(xv.shape);
    int axis3 = axis + (3 - static_cast<int>(xv.shape.size()));

    Tensor out(xv.shape);
    residuals::fd_stencil_apply(xv.data.data(), out.data.data(), dims, axis3, order,
                                periodic, h, false);
    int id = push(std::move(out), {});
    nodes_[id].backprop = [this, id, x, dims, axis3, order, periodic, h]() {
        residuals::fd_stencil_apply(nodes_[id].grad.data.data(), nodes_[x].grad.data.data(),
                                    dims, axis3, order, periodic, h, true);
    };
    return id;
}

int Tape::ns_velocity(int x, int component, double domain_length) {
    const Tensor& xv = nodes_[x].value;
    if (xv.shape.size() != 3 || xv.shape[1] != xv.shape[2])
        throw ShapeMismatch("ns_velocity: expected [T, n, n]");
    int64_t frames = xv.shape[0];
    int n = static_cast<int>(xv.shape[1]);
    int64_t plane = static_cast<int64_t>(n) * n;

    Tensor out(xv.shape);
    for (int64_t t = 0; t < frames; ++t) {
        std::vector<double> frame(xv.data.begin() + t * plane,
                                  xv.data.begin() + (t + 1) * plane);
        auto u = pde::ns_velocity_component(frame, n, domain_length, component, false);
        std::copy(u.begin(), u.end(), out.data.begin() + t * plane);
    }
    int id = push(std::move(out), {});
    nodes_[id].backprop = [this, id, x, frames, n, plane, component, domain_length]() {
        const Tensor& g = nodes_[id].grad;
        for (int64_t t = 0; t < frames; ++t) {
            std::vector<double> frame(g.data.begin() + t * plane,
                                      g.data.begin() + (t + 1) * plane);
            auto u = pde::ns_velocity_component(frame, n, domain_length, component, true);
            for (int64_t j = 0; j < plane; ++j) nodes_[x].grad[t * plane + j] += u[j];
        }
    };
    return id;
}

int Tape::mean_sq_scaled(int x, double factor) {
    const Tensor& xv = nodes_[x].value;
    int64_t count = xv.size();
    double sum = 0.0;
    for (double v : xv.data) sum += v * v;
    int id = push(Tensor::scalar(factor * sum / count), {});
    nodes_[id].backprop = [this, id, x, factor, count]() {
        double g = nodes_[id].grad[0] * 2.0 * factor / count;
        const Tensor& xv2 = nodes_[x].value;
        for (int64_t i = 0; i < xv2.size(); ++i) nodes_[x].grad[i] += g * xv2[i];
    };
    return id;
}

int Tape::masked_mean_sq_scaled(int x, std::vector<int64_t> indices, double factor) {
    const Tensor& xv = nodes_[x].value;
    int64_t count = static_cast<int64_t>(indices.size());
    double sum = 0.0;
    for (int64_t i : indices) sum += xv[i] * xv[i];
    int id = push(Tensor::scalar(factor * sum / count), {});
    nodes_[id].backprop = [this, id, x, factor, count, idx = std::move(indices)]() {
        double g = nodes_[id].grad[0] * 2.0 * factor / count;
        const Tensor& xv2 = nodes_[x].value;
        for (int64_t i : idx) nodes_[x].grad[i] += g * xv2[i];
    };
    return id;
}

}  // namespace picore::ad

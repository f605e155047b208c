#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "rgdm/error.hpp"
#include "rgdm/point_cloud.hpp"
#include "rgdm/rng.hpp"

namespace rgdm {

using ParamGrad = std::vector<double>;

// One concatsquash layer's slice of the flat parameter array.
// y = (W*x + b) .* sigmoid(w_gate*t_ctx + b_gate) + w_bias*t_ctx
struct LayerView {
    const double* W;       // out x in, row-major
    const double* b;       // out
    const double* w_gate;  // out
    const double* b_gate;  // out
    const double* w_bias;  // out
    int in = 0;
    int out = 0;
};

inline int param_count_for(const std::vector<int>& dims) {
    int total = 0;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l)
        total += dims[l + 1] * (dims[l] + 4);
    return total;
}

// Per-point noise estimator: a stack of concatsquash layers with a
// leaky-rectifier (slope 0.01) between them and a linear output layer.
// Canonical flat parameter order, per layer: W row-major, b, w_gate,
// b_gate, w_bias. This order is part of the checkpoint format.
struct NoiseEstimator {
    static constexpr double kLeakySlope = 0.01;

    std::vector<int> layer_dims;
    std::vector<double> params;

    int n_layers() const { return static_cast<int>(layer_dims.size()) - 1; }
    int point_dim() const { return layer_dims.front(); }
    int param_count() const { return param_count_for(layer_dims); }

    LayerView layer(int l) const {
        int off = 0;
        for (int m = 0; m < l; ++m) off += layer_dims[m + 1] * (layer_dims[m] + 4);
        const int in = layer_dims[l], out = layer_dims[l + 1];
        const double* base = params.data() + off;
        return LayerView{base, base + out * in, base + out * (in + 1), base + out * (in + 2),
                         base + out * (in + 3), in, out};
    }
};

inline void check_topology(const std::vector<int>& dims) {
    if (dims.size() < 2)
        throw InvalidArgument("estimator topology needs >= 2 widths, got " +
                              std::to_string(dims.size()));
    if (dims.front() != dims.back())
        throw InvalidArgument("estimator input and output widths must equal the point dimension");
    for (int w : dims)
        if (w < 1) throw InvalidArgument("estimator widths must be >= 1");
}

// Zero-mean uniform fan-in init for weights, zero biases. The gate and bias
// hyper-weights share the layer's fan-in scale so the time conditioning
// starts as a small perturbation. Draw order is fixed, so the result is a
// pure function of (dims, seed).
inline NoiseEstimator init_estimator(const std::vector<int>& dims, std::uint64_t seed) {
    check_topology(dims);
    NoiseEstimator est;
    est.layer_dims = dims;
    est.params.assign(param_count_for(dims), 0.0);
    Rng rng(seed, 0x6e6574u /* "net" */);
    int off = 0;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        const int in = dims[l], out = dims[l + 1];
        double* W = est.params.data() + off;
        const double k = 1.0 / std::sqrt(static_cast<double>(in));
        for (int i = 0; i < out * in; ++i) W[i] = rng.uniform_in(-k, k);
        double* w_gate = W + out * (in + 1);
        for (int i = 0; i < out; ++i) w_gate[i] = rng.uniform_in(-k, k);
        double* w_bias = W + out * (in + 3);
        for (int i = 0; i < out; ++i) w_bias[i] = rng.uniform_in(-k, k);
        off += out * (in + 4);
    }
    return est;
}

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

inline void concatsquash_forward(const LayerView& lv, const double* x, double t_ctx, double* y) {
    for (int o = 0; o < lv.out; ++o) {
        const double* row = lv.W + static_cast<std::size_t>(o) * lv.in;
        double s = lv.b[o];
        for (int i = 0; i < lv.in; ++i) s += row[i] * x[i];
        y[o] = s * sigmoid(lv.w_gate[o] * t_ctx + lv.b_gate[o]) + lv.w_bias[o] * t_ctx;
    }
}

// Vector convenience overload (used by tests and small callers).
inline std::vector<double> concatsquash_forward(const LayerView& lv, const std::vector<double>& x,
                                                double t_ctx) {
    if (static_cast<int>(x.size()) != lv.in)
        throw ShapeMismatch("concatsquash_forward: input size " + std::to_string(x.size()) +
                            " != layer fan-in " + std::to_string(lv.in));
    std::vector<double> y(lv.out);
    concatsquash_forward(lv, x.data(), t_ctx, y.data());
    return y;
}

namespace detail {

inline double leaky(double v) {
    return v > 0.0 ? v : NoiseEstimator::kLeakySlope * v;
}
inline double leaky_grad(double v) {
    return v > 0.0 ? 1.0 : NoiseEstimator::kLeakySlope;
}

// Gates depend only on t_ctx, so they are computed once per cloud.
struct GateCache {
    std::vector<std::vector<double>> gate;   // sigmoid values per layer
    std::vector<std::vector<double>> dgate;  // g*(1-g) per layer
};

inline GateCache make_gates(const NoiseEstimator& est, double t_ctx, bool with_grad) {
    GateCache gc;
    const int L = est.n_layers();
    gc.gate.resize(L);
    if (with_grad) gc.dgate.resize(L);
    for (int l = 0; l < L; ++l) {
        const LayerView lv = est.layer(l);
        gc.gate[l].resize(lv.out);
        if (with_grad) gc.dgate[l].resize(lv.out);
        for (int o = 0; o < lv.out; ++o) {
            const double g = sigmoid(lv.w_gate[o] * t_ctx + lv.b_gate[o]);
            gc.gate[l][o] = g;
            if (with_grad) gc.dgate[l][o] = g * (1.0 - g);
        }
    }
    return gc;
}

}  // namespace detail

inline void check_noise_inputs(const NoiseEstimator& est, const PointCloud& x_t, int t, int T) {
    if (x_t.dim != est.point_dim())
        throw ShapeMismatch("predict_noise: cloud dim " + std::to_string(x_t.dim) +
                            " != estimator dim " + std::to_string(est.point_dim()));
    if (t < 1 || t > T)
        throw InvalidArgument("predict_noise: t=" + std::to_string(t) + " out of 1.." +
                              std::to_string(T));
    if (static_cast<int>(est.params.size()) != est.param_count())
        throw ShapeMismatch("estimator params length != topology param count");
}

// eps_hat = eps_theta(X_t, t/T): each point mapped independently.
inline PointCloud predict_noise(const NoiseEstimator& est, const PointCloud& x_t, int t, int T) {
    check_noise_inputs(est, x_t, t, T);
    const double t_ctx = static_cast<double>(t) / T;
    const int L = est.n_layers();
    const auto gc = detail::make_gates(est, t_ctx, /*with_grad=*/false);

    int max_w = 0;
    for (int w : est.layer_dims) max_w = std::max(max_w, w);
    std::vector<double> buf_a(max_w), buf_b(max_w);

    PointCloud out(x_t.n, x_t.dim);
    for (int p = 0; p < x_t.n; ++p) {
        double* cur = buf_a.data();
        double* nxt = buf_b.data();
        for (int k = 0; k < x_t.dim; ++k) cur[k] = x_t.at(p, k);
        for (int l = 0; l < L; ++l) {
            const LayerView lv = est.layer(l);
            const auto& gate = gc.gate[l];
            for (int o = 0; o < lv.out; ++o) {
                const double* row = lv.W + static_cast<std::size_t>(o) * lv.in;
                double s = lv.b[o];
                for (int i = 0; i < lv.in; ++i) s += row[i] * cur[i];
                const double pre = s * gate[o] + lv.w_bias[o] * t_ctx;
                nxt[o] = (l + 1 < L) ? detail::leaky(pre) : pre;
            }
            std::swap(cur, nxt);
        }
        for (int k = 0; k < x_t.dim; ++k) out.at(p, k) = cur[k];
    }
    return out;
}

// Exact reverse-mode gradient of <upstream, predict_noise(params)> w.r.t.
// the flat parameter array. Points are accumulated in index order.
inline ParamGrad backprop(const NoiseEstimator& est, const PointCloud& x_t, int t, int T,
                          const PointCloud& upstream) {
    check_noise_inputs(est, x_t, t, T);
    require_same_shape(x_t, upstream, "backprop");
    const double t_ctx = static_cast<double>(t) / T;
    const int L = est.n_layers();
    const auto gc = detail::make_gates(est, t_ctx, /*with_grad=*/true);

    ParamGrad grad(est.params.size(), 0.0);
    std::vector<LayerView> views(L);
    std::vector<double*> gviews(L);
    {
        int off = 0;
        for (int l = 0; l < L; ++l) {
            views[l] = est.layer(l);
            gviews[l] = grad.data() + off;
            off += views[l].out * (views[l].in + 4);
        }
    }

    // Per-point caches: layer inputs, pre-gate affine s, pre-activation.
    std::vector<std::vector<double>> xin(L + 1), sval(L), pre(L);
    for (int l = 0; l < L; ++l) {
        xin[l].resize(views[l].in);
        sval[l].resize(views[l].out);
        pre[l].resize(views[l].out);
    }
    xin[L].resize(est.layer_dims.back());
    int max_w = 0;
    for (int w : est.layer_dims) max_w = std::max(max_w, w);
    std::vector<double> da(max_w), dprev(max_w);

    for (int p = 0; p < x_t.n; ++p) {
        for (int k = 0; k < x_t.dim; ++k) xin[0][k] = x_t.at(p, k);
        for (int l = 0; l < L; ++l) {
            const LayerView& lv = views[l];
            for (int o = 0; o < lv.out; ++o) {
                const double* row = lv.W + static_cast<std::size_t>(o) * lv.in;
                double s = lv.b[o];
                for (int i = 0; i < lv.in; ++i) s += row[i] * xin[l][i];
                sval[l][o] = s;
                const double pr = s * gc.gate[l][o] + lv.w_bias[o] * t_ctx;
                pre[l][o] = pr;
                xin[l + 1][o] = (l + 1 < L) ? detail::leaky(pr) : pr;
            }
        }

        for (int k = 0; k < x_t.dim; ++k) da[k] = upstream.at(p, k);
        for (int l = L - 1; l >= 0; --l) {
            const LayerView& lv = views[l];
            double* g = gviews[l];
            double* gW = g;
            double* gb = g + lv.out * lv.in;
            double* gwg = g + lv.out * (lv.in + 1);
            double* gbg = g + lv.out * (lv.in + 2);
            double* gwb = g + lv.out * (lv.in + 3);
            for (int i = 0; i < lv.in; ++i) dprev[i] = 0.0;
            for (int o = 0; o < lv.out; ++o) {
                const double dpre =
                    (l + 1 < L) ? da[o] * detail::leaky_grad(pre[l][o]) : da[o];
                const double ds = dpre * gc.gate[l][o];
                const double dgate_in = dpre * sval[l][o] * gc.dgate[l][o];
                gwb[o] += dpre * t_ctx;
                gwg[o] += dgate_in * t_ctx;
                gbg[o] += dgate_in;
                gb[o] += ds;
                const double* row = lv.W + static_cast<std::size_t>(o) * lv.in;
                double* grow = gW + static_cast<std::size_t>(o) * lv.in;
                for (int i = 0; i < lv.in; ++i) {
                    grow[i] += ds * xin[l][i];
                    dprev[i] += ds * row[i];
                }
            }
            for (int i = 0; i < lv.in; ++i) da[i] = dprev[i];
        }
    }
    return grad;
}

}  // namespace rgdm

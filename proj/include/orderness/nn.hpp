// Minimal CNN engine: cross-correlation convolutions, ReLU, 2x2 max-pool,
// dense layers, softmax cross-entropy, hand-written backprop and plain SGD.
//
// Templated on the scalar so the same code trains in float and gradient-
// checks in double. Convolutions run as im2col + GEMM over a whole
// mini-batch; everything is single-threaded and bit-deterministic for a
// fixed (init seed, data order, config).
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "orderness/dataset.hpp"
#include "orderness/errors.hpp"
#include "orderness/grid.hpp"
#include "orderness/metric.hpp"
#include "orderness/rng.hpp"

namespace orderness {

enum class Padding { Valid, Same };

inline const char* padding_name(Padding p) { return p == Padding::Valid ? "valid" : "same"; }
inline Padding padding_from_name(const std::string& s) {
    if (s == "valid") return Padding::Valid;
    if (s == "same") return Padding::Same;
    raise(Err::InvalidArgument, "unknown padding: " + s);
}

template <class Real>
using MatX = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;

// Mini-batch of feature maps, one contiguous [c*h*w] block per example.
template <class Real>
struct Batch {
    int n = 0, c = 0, h = 0, w = 0;
    std::vector<Real> v;

    Batch() = default;
    Batch(int n_, int c_, int h_, int w_)
        : n(n_), c(c_), h(h_), w(w_),
          v(static_cast<size_t>(n_) * c_ * h_ * w_, Real(0)) {}

    size_t example_size() const { return static_cast<size_t>(c) * h * w; }
    Real* ex(int i) { return v.data() + static_cast<size_t>(i) * example_size(); }
    const Real* ex(int i) const { return v.data() + static_cast<size_t>(i) * example_size(); }
    Real* plane(int i, int ch) { return ex(i) + static_cast<size_t>(ch) * h * w; }
    const Real* plane(int i, int ch) const { return ex(i) + static_cast<size_t>(ch) * h * w; }
};

template <class Real>
struct ConvLayer {
    int in_ch = 0, out_ch = 0, kernel = 0;
    Padding padding = Padding::Same;
    bool pool_after = true;
    std::vector<Real> weights; // [out][in][k][k]
    std::vector<Real> bias;    // [out]

    size_t weight_count() const {
        return static_cast<size_t>(out_ch) * in_ch * kernel * kernel;
    }
};

template <class Real>
struct DenseLayer {
    int in_dim = 0, out_dim = 0;
    std::vector<Real> weights; // [out][in] row-major
    std::vector<Real> bias;
};

template <class Real>
struct CnnModel {
    int in_ch = 0, in_h = 0, in_w = 0;
    int num_classes = 0;
    uint64_t init_seed = 0;
    std::vector<ConvLayer<Real>> convs;
    std::vector<DenseLayer<Real>> dense;

    size_t total_params() const {
        size_t n = 0;
        for (const auto& l : convs) n += l.weight_count() + l.bias.size();
        for (const auto& l : dense) n += l.weights.size() + l.bias.size();
        return n;
    }
};

namespace shape {

struct Dims {
    int h = 0, w = 0;
};

inline Dims conv_out(Dims in, int kernel, Padding padding) {
    if (padding == Padding::Same) return in;
    return {in.h - kernel + 1, in.w - kernel + 1};
}

// Odd spatial dims are cropped by one row/col before 2x2 pooling.
inline Dims pool_out(Dims in) { return {(in.h - in.h % 2) / 2, (in.w - in.w % 2) / 2}; }

} // namespace shape

// Walks the layer chain and checks it is consistent end to end.
template <class Real>
inline void validate_model(const CnnModel<Real>& m) {
    require(!m.convs.empty() || !m.dense.empty(), Err::InvalidArgument, "model has no layers");
    require(m.num_classes >= 2, Err::InvalidArgument, "need at least two classes");
    shape::Dims d{m.in_h, m.in_w};
    int ch = m.in_ch;
    for (size_t i = 0; i < m.convs.size(); ++i) {
        const auto& l = m.convs[i];
        require(l.in_ch == ch, Err::ShapeMismatch,
                "conv " + std::to_string(i) + " expects " + std::to_string(l.in_ch) +
                    " channels, gets " + std::to_string(ch));
        require(l.kernel >= 1 && l.kernel % 2 == 1, Err::InvalidArgument,
                "kernel size must be odd and positive");
        require(l.weights.size() == l.weight_count() && l.bias.size() == size_t(l.out_ch),
                Err::ShapeMismatch, "conv parameter arrays mismatch the layer shape");
        if (l.padding == Padding::Valid)
            require(d.h >= l.kernel && d.w >= l.kernel, Err::ShapeMismatch,
                    "valid conv does not fit the input");
        d = shape::conv_out(d, l.kernel, l.padding);
        if (l.pool_after) {
            d = shape::pool_out(d);
            require(d.h >= 1 && d.w >= 1, Err::ShapeMismatch, "pooling collapsed the map");
        }
        ch = l.out_ch;
    }
    int dim = ch * d.h * d.w;
    for (size_t i = 0; i < m.dense.size(); ++i) {
        const auto& l = m.dense[i];
        require(l.in_dim == dim, Err::ShapeMismatch,
                "dense " + std::to_string(i) + " expects " + std::to_string(l.in_dim) +
                    " inputs, gets " + std::to_string(dim));
        require(l.weights.size() == static_cast<size_t>(l.in_dim) * l.out_dim &&
                    l.bias.size() == size_t(l.out_dim),
                Err::ShapeMismatch, "dense parameter arrays mismatch the layer shape");
        dim = l.out_dim;
    }
    require(dim == m.num_classes, Err::ShapeMismatch, "final layer width is not num_classes");
}

// ---- architecture builder ----------------------------------------------

struct ArchSpec {
    int conv_layers = 3;
    int channels = 64;
    int kernel = 3;
    int first_kernel = 0; // 0: use `kernel`
    Padding padding = Padding::Same;
    int pool_every = 1;   // 2x2 max-pool after every pool_every-th conv
    int dense_hidden = 0; // hidden dense layers of `channels` units
};

template <class Real>
inline CnnModel<Real> build_cnn(int in_ch, int in_h, int in_w, int num_classes,
                                const ArchSpec& spec, uint64_t seed) {
    require(spec.conv_layers >= 1, Err::InvalidArgument, "need at least one conv layer");
    require(spec.pool_every >= 1, Err::InvalidArgument, "pool_every must be >= 1");
    CnnModel<Real> m;
    m.in_ch = in_ch;
    m.in_h = in_h;
    m.in_w = in_w;
    m.num_classes = num_classes;
    m.init_seed = seed;

    int ch = in_ch;
    shape::Dims d{in_h, in_w};
    for (int i = 0; i < spec.conv_layers; ++i) {
        ConvLayer<Real> l;
        l.in_ch = ch;
        l.out_ch = spec.channels;
        l.kernel = (i == 0 && spec.first_kernel > 0) ? spec.first_kernel : spec.kernel;
        l.padding = spec.padding;
        l.pool_after = ((i + 1) % spec.pool_every == 0);
        l.weights.resize(l.weight_count());
        l.bias.assign(l.out_ch, Real(0));
        Rng rng(derive_seed(seed, {stream::kLayer, static_cast<uint64_t>(i)}));
        double std_dev = std::sqrt(2.0 / (static_cast<double>(l.in_ch) * l.kernel * l.kernel));
        for (Real& v : l.weights) v = static_cast<Real>(rng.normal(0.0, std_dev));
        d = shape::conv_out(d, l.kernel, l.padding);
        if (l.pool_after) d = shape::pool_out(d);
        ch = l.out_ch;
        m.convs.push_back(std::move(l));
    }
    int dim = ch * d.h * d.w;
    int n_dense = spec.dense_hidden + 1;
    for (int i = 0; i < n_dense; ++i) {
        DenseLayer<Real> l;
        l.in_dim = dim;
        l.out_dim = (i == n_dense - 1) ? num_classes : spec.channels;
        l.weights.resize(static_cast<size_t>(l.in_dim) * l.out_dim);
        l.bias.assign(l.out_dim, Real(0));
        Rng rng(derive_seed(seed, {stream::kLayer, static_cast<uint64_t>(1000 + i)}));
        double std_dev = std::sqrt(2.0 / static_cast<double>(l.in_dim));
        for (Real& v : l.weights) v = static_cast<Real>(rng.normal(0.0, std_dev));
        dim = l.out_dim;
        m.dense.push_back(std::move(l));
    }
    validate_model(m);
    return m;
}

// ---- forward/backward internals ------------------------------------------

namespace detail {

// Gathers k*k*in_ch patch columns for every (example, output position).
// Column layout: [in_ch][kr][kc] rows; columns ordered (example, oh, ow).
template <class Real>
inline void im2col(const Batch<Real>& in, int kernel, Padding padding, MatX<Real>& cols,
                   int out_h, int out_w) {
    int pad = (padding == Padding::Same) ? kernel / 2 : 0;
    long rows = static_cast<long>(in.c) * kernel * kernel;
    cols.resize(rows, static_cast<long>(in.n) * out_h * out_w);
    for (int b = 0; b < in.n; ++b) {
        long col0 = static_cast<long>(b) * out_h * out_w;
        for (int oh = 0; oh < out_h; ++oh) {
            for (int ow = 0; ow < out_w; ++ow) {
                long col = col0 + static_cast<long>(oh) * out_w + ow;
                Real* dst = cols.data() + col * rows;
                for (int c = 0; c < in.c; ++c) {
                    const Real* plane = in.plane(b, c);
                    for (int kr = 0; kr < kernel; ++kr) {
                        int r = oh - pad + kr;
                        if (r < 0 || r >= in.h) {
                            for (int kc = 0; kc < kernel; ++kc) *dst++ = Real(0);
                            continue;
                        }
                        const Real* row = plane + static_cast<size_t>(r) * in.w;
                        int base = ow - pad;
                        for (int kc = 0; kc < kernel; ++kc) {
                            int cc = base + kc;
                            *dst++ = (cc < 0 || cc >= in.w) ? Real(0) : row[cc];
                        }
                    }
                }
            }
        }
    }
}

// Scatter-accumulate of patch-column gradients back onto input positions.
template <class Real>
inline void col2im(const MatX<Real>& cols, int kernel, Padding padding, Batch<Real>& din,
                   int out_h, int out_w) {
    int pad = (padding == Padding::Same) ? kernel / 2 : 0;
    long rows = static_cast<long>(din.c) * kernel * kernel;
    std::fill(din.v.begin(), din.v.end(), Real(0));
    for (int b = 0; b < din.n; ++b) {
        long col0 = static_cast<long>(b) * out_h * out_w;
        for (int oh = 0; oh < out_h; ++oh) {
            for (int ow = 0; ow < out_w; ++ow) {
                long col = col0 + static_cast<long>(oh) * out_w + ow;
                const Real* src = cols.data() + col * rows;
                for (int c = 0; c < din.c; ++c) {
                    Real* plane = din.plane(b, c);
                    for (int kr = 0; kr < kernel; ++kr) {
                        int r = oh - pad + kr;
                        if (r < 0 || r >= din.h) {
                            src += kernel;
                            continue;
                        }
                        Real* row = plane + static_cast<size_t>(r) * din.w;
                        int base = ow - pad;
                        for (int kc = 0; kc < kernel; ++kc) {
                            int cc = base + kc;
                            if (cc >= 0 && cc < din.w) row[cc] += src[kc];
                        }
                        src += kernel;
                    }
                }
            }
        }
    }
}

template <class Real>
struct ConvTrace {
    Batch<Real> input;        // layer input (kept for clarity in tests)
    MatX<Real> cols;          // im2col of input
    Batch<Real> activated;    // post-ReLU conv output (pool input)
    std::vector<uint8_t> argmax; // 2x2 winner per pooled cell (0..3)
    int conv_h = 0, conv_w = 0;  // post-conv dims
    int crop_h = 0, crop_w = 0;  // even dims seen by the pool
    int out_h = 0, out_w = 0;    // block output dims
};

template <class Real>
struct DenseTrace {
    Batch<Real> input;
    Batch<Real> activated; // post-ReLU for hidden layers, raw scores for the last
};

template <class Real>
struct ForwardTrace {
    std::vector<ConvTrace<Real>> convs;
    std::vector<DenseTrace<Real>> dense;
    Batch<Real> scores; // [n x num_classes x 1 x 1]
};

template <class Real>
inline void conv_block_forward(const ConvLayer<Real>& layer, const Batch<Real>& in,
                               ConvTrace<Real>& trace, Batch<Real>& out, bool keep_input) {
    shape::Dims cd = shape::conv_out({in.h, in.w}, layer.kernel, layer.padding);
    require(cd.h >= 1 && cd.w >= 1, Err::ShapeMismatch, "conv output collapsed");
    require(in.c == layer.in_ch, Err::ShapeMismatch, "conv input channel mismatch");
    trace.conv_h = cd.h;
    trace.conv_w = cd.w;
    im2col(in, layer.kernel, layer.padding, trace.cols, cd.h, cd.w);
    if (keep_input) trace.input = in;

    long patch = static_cast<long>(layer.in_ch) * layer.kernel * layer.kernel;
    Eigen::Map<const Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> W(
        layer.weights.data(), layer.out_ch, patch);
    MatX<Real> prod = W * trace.cols; // [out_ch x n*conv_h*conv_w]

    // bias + ReLU while scattering into batch layout
    trace.activated = Batch<Real>(in.n, layer.out_ch, cd.h, cd.w);
    size_t hw = static_cast<size_t>(cd.h) * cd.w;
    for (int b = 0; b < in.n; ++b) {
        long col0 = static_cast<long>(b) * hw;
        for (int oc = 0; oc < layer.out_ch; ++oc) {
            Real* dst = trace.activated.plane(b, oc);
            Real bias = layer.bias[oc];
            for (size_t p = 0; p < hw; ++p) {
                Real val = prod(oc, col0 + static_cast<long>(p)) + bias;
                dst[p] = val > Real(0) ? val : Real(0);
            }
        }
    }

    if (!layer.pool_after) {
        trace.crop_h = trace.crop_w = 0;
        trace.out_h = cd.h;
        trace.out_w = cd.w;
        out = trace.activated;
        return;
    }
    int ch2 = cd.h - cd.h % 2, cw2 = cd.w - cd.w % 2;
    require(ch2 >= 2 && cw2 >= 2, Err::ShapeMismatch, "map too small to pool");
    trace.crop_h = ch2;
    trace.crop_w = cw2;
    trace.out_h = ch2 / 2;
    trace.out_w = cw2 / 2;
    out = Batch<Real>(in.n, layer.out_ch, trace.out_h, trace.out_w);
    trace.argmax.assign(out.v.size(), 0);
    size_t cell = 0;
    for (int b = 0; b < in.n; ++b) {
        for (int oc = 0; oc < layer.out_ch; ++oc) {
            const Real* src = trace.activated.plane(b, oc);
            Real* dst = out.plane(b, oc);
            for (int r = 0; r < trace.out_h; ++r) {
                for (int c = 0; c < trace.out_w; ++c) {
                    const Real* p00 = src + static_cast<size_t>(2 * r) * cd.w + 2 * c;
                    Real best = p00[0];
                    uint8_t which = 0;
                    // first-index tie rule
                    if (p00[1] > best) { best = p00[1]; which = 1; }
                    if (p00[cd.w] > best) { best = p00[cd.w]; which = 2; }
                    if (p00[cd.w + 1] > best) { best = p00[cd.w + 1]; which = 3; }
                    dst[static_cast<size_t>(r) * trace.out_w + c] = best;
                    trace.argmax[cell++] = which;
                }
            }
        }
    }
}

template <class Real>
inline void dense_forward(const DenseLayer<Real>& layer, const Batch<Real>& in,
                          Batch<Real>& out, bool relu) {
    require(static_cast<int>(in.example_size()) == layer.in_dim, Err::ShapeMismatch,
            "dense input width mismatch");
    Eigen::Map<const MatX<Real>> X(in.v.data(), layer.in_dim, in.n);
    Eigen::Map<const Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> W(
        layer.weights.data(), layer.out_dim, layer.in_dim);
    out = Batch<Real>(in.n, layer.out_dim, 1, 1);
    Eigen::Map<MatX<Real>> Y(out.v.data(), layer.out_dim, in.n);
    Y.noalias() = W * X;
    for (int b = 0; b < in.n; ++b)
        for (int o = 0; o < layer.out_dim; ++o) {
            Real val = Y(o, b) + layer.bias[o];
            Y(o, b) = relu ? (val > Real(0) ? val : Real(0)) : val;
        }
}

template <class Real>
inline void forward_batch(const CnnModel<Real>& model, const Batch<Real>& input,
                          ForwardTrace<Real>& trace, int upto_conv = -1) {
    trace.convs.clear();
    trace.dense.clear();
    Batch<Real> cur = input;
    size_t n_conv = (upto_conv >= 0) ? static_cast<size_t>(upto_conv) + 1 : model.convs.size();
    for (size_t i = 0; i < n_conv; ++i) {
        ConvTrace<Real> ct;
        Batch<Real> next;
        conv_block_forward(model.convs[i], cur, ct, next, /*keep_input=*/false);
        trace.convs.push_back(std::move(ct));
        cur = std::move(next);
    }
    if (upto_conv >= 0) {
        trace.scores = std::move(cur);
        return;
    }
    for (size_t i = 0; i < model.dense.size(); ++i) {
        DenseTrace<Real> dt;
        dt.input = cur;
        bool relu = (i + 1 < model.dense.size());
        dense_forward(model.dense[i], cur, dt.activated, relu);
        cur = dt.activated;
        trace.dense.push_back(std::move(dt));
    }
    trace.scores = cur;
}

} // namespace detail

// ---- parameter gradients -------------------------------------------------

template <class Real>
struct Gradients {
    std::vector<std::vector<Real>> conv_w, conv_b;
    std::vector<std::vector<Real>> dense_w, dense_b;

    static Gradients zeros_like(const CnnModel<Real>& m) {
        Gradients g;
        for (const auto& l : m.convs) {
            g.conv_w.emplace_back(l.weights.size(), Real(0));
            g.conv_b.emplace_back(l.bias.size(), Real(0));
        }
        for (const auto& l : m.dense) {
            g.dense_w.emplace_back(l.weights.size(), Real(0));
            g.dense_b.emplace_back(l.bias.size(), Real(0));
        }
        return g;
    }
};

// Backprop through the traced forward pass. `dscores` is [num_classes x n]
// (column per example); gradients are summed over the batch.
template <class Real>
inline Gradients<Real> backward_batch(const CnnModel<Real>& model,
                                      const detail::ForwardTrace<Real>& trace,
                                      const Batch<Real>& input, const MatX<Real>& dscores) {
    Gradients<Real> grads = Gradients<Real>::zeros_like(model);
    int n = trace.scores.n;

    MatX<Real> delta = dscores; // [width x n]
    for (int i = static_cast<int>(model.dense.size()) - 1; i >= 0; --i) {
        const auto& layer = model.dense[i];
        const auto& dt = trace.dense[i];
        if (i + 1 < static_cast<int>(model.dense.size())) {
            // ReLU mask of this layer's own output
            Eigen::Map<const MatX<Real>> act(dt.activated.v.data(), layer.out_dim, n);
            for (int b = 0; b < n; ++b)
                for (int o = 0; o < layer.out_dim; ++o)
                    if (act(o, b) <= Real(0)) delta(o, b) = Real(0);
        }
        Eigen::Map<const MatX<Real>> X(dt.input.v.data(), layer.in_dim, n);
        Eigen::Map<Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> dW(
            grads.dense_w[i].data(), layer.out_dim, layer.in_dim);
        dW.noalias() = delta * X.transpose();
        for (int o = 0; o < layer.out_dim; ++o) grads.dense_b[i][o] = delta.row(o).sum();
        Eigen::Map<const Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> W(
            layer.weights.data(), layer.out_dim, layer.in_dim);
        MatX<Real> dX = W.transpose() * delta;
        delta = std::move(dX);
    }

    // delta now matches the flattened output of the last conv block
    for (int i = static_cast<int>(model.convs.size()) - 1; i >= 0; --i) {
        const auto& layer = model.convs[i];
        const auto& ct = trace.convs[i];
        size_t conv_hw = static_cast<size_t>(ct.conv_h) * ct.conv_w;

        // gradient at the post-ReLU conv map
        Batch<Real> dact(n, layer.out_ch, ct.conv_h, ct.conv_w);
        if (layer.pool_after) {
            size_t cell = 0;
            for (int b = 0; b < n; ++b)
                for (int oc = 0; oc < layer.out_ch; ++oc) {
                    Real* dst = dact.plane(b, oc);
                    for (int r = 0; r < ct.out_h; ++r)
                        for (int c = 0; c < ct.out_w; ++c) {
                            uint8_t which = ct.argmax[cell];
                            Real g = delta(static_cast<long>(oc) * ct.out_h * ct.out_w +
                                               static_cast<long>(r) * ct.out_w + c,
                                           b);
                            int rr = 2 * r + (which >> 1), cc = 2 * c + (which & 1);
                            dst[static_cast<size_t>(rr) * ct.conv_w + cc] = g;
                            ++cell;
                        }
                }
        } else {
            for (int b = 0; b < n; ++b) {
                const Real* src = delta.data() + static_cast<long>(b) * layer.out_ch * conv_hw;
                std::copy(src, src + layer.out_ch * conv_hw, dact.ex(b));
            }
        }

        // ReLU mask
        for (size_t j = 0; j < dact.v.size(); ++j)
            if (ct.activated.v[j] <= Real(0)) dact.v[j] = Real(0);

        // repack as [out_ch x n*conv_hw] aligned with the im2col columns
        MatX<Real> dout(layer.out_ch, static_cast<long>(n) * conv_hw);
        for (int b = 0; b < n; ++b)
            for (int oc = 0; oc < layer.out_ch; ++oc) {
                const Real* src = dact.plane(b, oc);
                for (size_t p = 0; p < conv_hw; ++p)
                    dout(oc, static_cast<long>(b) * conv_hw + p) = src[p];
            }

        long patch = static_cast<long>(layer.in_ch) * layer.kernel * layer.kernel;
        Eigen::Map<Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> dW(
            grads.conv_w[i].data(), layer.out_ch, patch);
        dW.noalias() = dout * ct.cols.transpose();
        for (int oc = 0; oc < layer.out_ch; ++oc) grads.conv_b[i][oc] = dout.row(oc).sum();

        if (i > 0 || true) {
            // input gradient (also produced for layer 0 to keep the code uniform)
            Eigen::Map<const Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
                W(layer.weights.data(), layer.out_ch, patch);
            MatX<Real> dcols = W.transpose() * dout;
            const Batch<Real>& below = (i > 0) ? trace.convs[i - 1].activated : input;
            Batch<Real> din(n, layer.in_ch, below.h, below.w);
            detail::col2im(dcols, layer.kernel, layer.padding, din, ct.conv_h, ct.conv_w);
            if (i > 0) {
                // translate into the previous block's pooled-output gradient
                const auto& prev = trace.convs[i - 1];
                // din is w.r.t. this layer's input = previous block's output
                delta.resize(static_cast<long>(din.example_size()), n);
                for (int b = 0; b < n; ++b)
                    for (size_t j = 0; j < din.example_size(); ++j)
                        delta(static_cast<long>(j), b) = din.ex(b)[j];
                (void)prev;
            }
        }
    }
    return grads;
}

template <class Real>
inline void sgd_step(CnnModel<Real>& model, const Gradients<Real>& g, double lr) {
    auto rate = static_cast<Real>(lr);
    for (size_t i = 0; i < model.convs.size(); ++i) {
        auto& l = model.convs[i];
        for (size_t j = 0; j < l.weights.size(); ++j) l.weights[j] -= rate * g.conv_w[i][j];
        for (size_t j = 0; j < l.bias.size(); ++j) l.bias[j] -= rate * g.conv_b[i][j];
    }
    for (size_t i = 0; i < model.dense.size(); ++i) {
        auto& l = model.dense[i];
        for (size_t j = 0; j < l.weights.size(); ++j) l.weights[j] -= rate * g.dense_w[i][j];
        for (size_t j = 0; j < l.bias.size(); ++j) l.bias[j] -= rate * g.dense_b[i][j];
    }
}

// ---- losses ---------------------------------------------------------------

// Max-shifted softmax cross-entropy for one example.
template <class Real>
inline std::pair<double, std::vector<Real>> loss_softmax_ce(const std::vector<Real>& scores,
                                                            int label) {
    require(label >= 0 && label < static_cast<int>(scores.size()), Err::InvalidArgument,
            "label out of range");
    Real mx = scores[0];
    for (Real s : scores) mx = std::max(mx, s);
    double sum = 0.0;
    for (Real s : scores) sum += std::exp(static_cast<double>(s - mx));
    double logsum = std::log(sum) + static_cast<double>(mx);
    double loss = logsum - static_cast<double>(scores[label]);
    std::vector<Real> grad(scores.size());
    for (size_t i = 0; i < scores.size(); ++i) {
        double p = std::exp(static_cast<double>(scores[i]) - logsum);
        grad[i] = static_cast<Real>(p - (static_cast<int>(i) == label ? 1.0 : 0.0));
    }
    return {loss, std::move(grad)};
}

// ---- single-example convenience ops ---------------------------------------

template <class Real>
inline Batch<Real> batch_from_image(const Image& im) {
    Batch<Real> b(1, im.channels, im.height, im.width);
    for (size_t i = 0; i < im.values.size(); ++i) b.v[i] = static_cast<Real>(im.values[i]);
    return b;
}

template <class Real>
inline Image image_from_batch(const Batch<Real>& b, int example) {
    Image im(b.c, b.h, b.w);
    const Real* src = b.ex(example);
    for (size_t i = 0; i < im.values.size(); ++i) im.values[i] = static_cast<double>(src[i]);
    return im;
}

// Cross-correlation + bias for one example; no activation.
template <class Real>
inline Batch<Real> conv2d_forward(const Batch<Real>& input, const ConvLayer<Real>& layer) {
    require(input.c == layer.in_ch, Err::ShapeMismatch, "conv input channel mismatch");
    shape::Dims cd = shape::conv_out({input.h, input.w}, layer.kernel, layer.padding);
    require(cd.h >= 1 && cd.w >= 1, Err::ShapeMismatch, "conv output collapsed");
    MatX<Real> cols;
    detail::im2col(input, layer.kernel, layer.padding, cols, cd.h, cd.w);
    long patch = static_cast<long>(layer.in_ch) * layer.kernel * layer.kernel;
    Eigen::Map<const Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> W(
        layer.weights.data(), layer.out_ch, patch);
    MatX<Real> prod = W * cols;
    Batch<Real> out(input.n, layer.out_ch, cd.h, cd.w);
    size_t hw = static_cast<size_t>(cd.h) * cd.w;
    for (int b = 0; b < input.n; ++b)
        for (int oc = 0; oc < layer.out_ch; ++oc) {
            Real* dst = out.plane(b, oc);
            for (size_t p = 0; p < hw; ++p)
                dst[p] = prod(oc, static_cast<long>(b) * hw + p) + layer.bias[oc];
        }
    return out;
}

struct PoolResult {
    Image output;
    std::vector<uint8_t> argmax; // 0..3 per output cell, row-major over (c, r, w)
};

inline PoolResult maxpool2x2_forward(const Image& input) {
    int ch2 = input.height - input.height % 2;
    int cw2 = input.width - input.width % 2;
    require(ch2 >= 2 && cw2 >= 2, Err::ShapeMismatch, "map too small to pool");
    PoolResult res;
    res.output = Image(input.channels, ch2 / 2, cw2 / 2);
    res.argmax.assign(res.output.values.size(), 0);
    size_t cell = 0;
    for (int c = 0; c < input.channels; ++c) {
        const double* src = input.plane(c);
        double* dst = res.output.plane(c);
        for (int r = 0; r < ch2 / 2; ++r)
            for (int col = 0; col < cw2 / 2; ++col) {
                const double* p00 = src + static_cast<size_t>(2 * r) * input.width + 2 * col;
                double best = p00[0];
                uint8_t which = 0;
                if (p00[1] > best) { best = p00[1]; which = 1; }
                if (p00[input.width] > best) { best = p00[input.width]; which = 2; }
                if (p00[input.width + 1] > best) { best = p00[input.width + 1]; which = 3; }
                dst[static_cast<size_t>(r) * (cw2 / 2) + col] = best;
                res.argmax[cell++] = which;
            }
    }
    return res;
}

template <class Real>
struct ForwardResult {
    std::vector<Real> scores;
    detail::ForwardTrace<Real> trace;
    Batch<Real> input;
};

template <class Real>
inline ForwardResult<Real> forward(const CnnModel<Real>& model, const Image& im) {
    ForwardResult<Real> r;
    r.input = batch_from_image<Real>(im);
    detail::forward_batch(model, r.input, r.trace);
    r.scores.assign(r.trace.scores.v.begin(), r.trace.scores.v.end());
    return r;
}

template <class Real>
inline Gradients<Real> backward(const CnnModel<Real>& model, ForwardResult<Real>& fwd,
                                const std::vector<Real>& dscores) {
    MatX<Real> d(model.num_classes, 1);
    for (int i = 0; i < model.num_classes; ++i) d(i, 0) = dscores[i];
    return backward_batch(model, fwd.trace, fwd.input, d);
}

} // namespace orderness

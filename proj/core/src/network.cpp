#include "initlab/network.hpp"

#include <cmath>
#include <cstdint>
#include <string>

#include "initlab/linalg.hpp"

namespace initlab {

namespace {

using i64 = std::int64_t;

i64 ceil_div(i64 a, i64 b) {
    // b > 0; exact ceiling for negative numerators too.
    return (a > 0) ? (a + b - 1) / b : a / b;
}

i64 floor_div(i64 a, i64 b) {
    // b > 0; exact floor for negative numerators too.
    return (a >= 0) ? a / b : -((-a + b - 1) / b);
}

std::size_t product(const Shape& s) {
    std::size_t n = 1;
    for (std::size_t e : s) {
        n *= e;
    }
    return n;
}

// ---- conv ----------------------------------------------------------------

void conv_forward(const Tensor& in, const ConvSpec& c, const Tensor& w, const Tensor& bias, Tensor& out) {
    const i64 batch = static_cast<i64>(in.extent(0));
    const i64 in_c = static_cast<i64>(c.in_channels);
    const i64 in_h = static_cast<i64>(in.extent(2));
    const i64 in_w = static_cast<i64>(in.extent(3));
    const i64 out_c = static_cast<i64>(c.out_channels);
    const i64 out_h = static_cast<i64>(out.extent(2));
    const i64 out_w = static_cast<i64>(out.extent(3));
    const i64 kh = static_cast<i64>(c.kernel_h);
    const i64 kw = static_cast<i64>(c.kernel_w);
    const i64 stride = static_cast<i64>(c.stride);
    const i64 pad = static_cast<i64>(c.pad);

    const double* in_p = in.data();
    const double* w_p = w.data();
    double* out_p = out.data();

    for (i64 b = 0; b < batch; ++b) {
        for (i64 oc = 0; oc < out_c; ++oc) {
            double* out_plane = out_p + ((b * out_c + oc) * out_h) * out_w;
            const double bv = bias[static_cast<std::size_t>(oc)];
            for (i64 i = 0; i < out_h * out_w; ++i) {
                out_plane[i] = bv;
            }
            for (i64 ic = 0; ic < in_c; ++ic) {
                const double* in_plane = in_p + ((b * in_c + ic) * in_h) * in_w;
                const double* w_k = w_p + ((oc * in_c + ic) * kh) * kw;
                for (i64 fh = 0; fh < kh; ++fh) {
                    for (i64 fw = 0; fw < kw; ++fw) {
                        const double wv = w_k[fh * kw + fw];
                        if (wv == 0.0) {
                            continue;
                        }
                        const i64 oh_lo = std::max<i64>(0, ceil_div(pad - fh, stride));
                        const i64 oh_hi = std::min<i64>(out_h, floor_div(in_h - 1 + pad - fh, stride) + 1);
                        const i64 ow_lo = std::max<i64>(0, ceil_div(pad - fw, stride));
                        const i64 ow_hi = std::min<i64>(out_w, floor_div(in_w - 1 + pad - fw, stride) + 1);
                        for (i64 oh = oh_lo; oh < oh_hi; ++oh) {
                            const i64 ih = oh * stride + fh - pad;
                            const double* in_row = in_plane + ih * in_w + fw - pad;
                            double* out_row = out_plane + oh * out_w;
                            if (stride == 1) {
                                for (i64 ow = ow_lo; ow < ow_hi; ++ow) {
                                    out_row[ow] += wv * in_row[ow];
                                }
                            } else {
                                for (i64 ow = ow_lo; ow < ow_hi; ++ow) {
                                    out_row[ow] += wv * in_row[ow * stride];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

void conv_backward(const Tensor& in, const Tensor& dout, const ConvSpec& c, const Tensor& w, Tensor& dw,
                   Tensor& db, Tensor& din) {
    const i64 batch = static_cast<i64>(in.extent(0));
    const i64 in_c = static_cast<i64>(c.in_channels);
    const i64 in_h = static_cast<i64>(in.extent(2));
    const i64 in_w = static_cast<i64>(in.extent(3));
    const i64 out_c = static_cast<i64>(c.out_channels);
    const i64 out_h = static_cast<i64>(dout.extent(2));
    const i64 out_w = static_cast<i64>(dout.extent(3));
    const i64 kh = static_cast<i64>(c.kernel_h);
    const i64 kw = static_cast<i64>(c.kernel_w);
    const i64 stride = static_cast<i64>(c.stride);
    const i64 pad = static_cast<i64>(c.pad);

    const double* in_p = in.data();
    const double* w_p = w.data();
    const double* dout_p = dout.data();
    double* dw_p = dw.data();
    double* din_p = din.data();

    for (i64 b = 0; b < batch; ++b) {
        for (i64 oc = 0; oc < out_c; ++oc) {
            const double* dout_plane = dout_p + ((b * out_c + oc) * out_h) * out_w;
            double acc = 0.0;
            for (i64 i = 0; i < out_h * out_w; ++i) {
                acc += dout_plane[i];
            }
            db[static_cast<std::size_t>(oc)] += acc;

            for (i64 ic = 0; ic < in_c; ++ic) {
                const double* in_plane = in_p + ((b * in_c + ic) * in_h) * in_w;
                double* din_plane = din_p + ((b * in_c + ic) * in_h) * in_w;
                const double* w_k = w_p + ((oc * in_c + ic) * kh) * kw;
                double* dw_k = dw_p + ((oc * in_c + ic) * kh) * kw;
                for (i64 fh = 0; fh < kh; ++fh) {
                    for (i64 fw = 0; fw < kw; ++fw) {
                        const double wv = w_k[fh * kw + fw];
                        double wg = 0.0;
                        const i64 oh_lo = std::max<i64>(0, ceil_div(pad - fh, stride));
                        const i64 oh_hi = std::min<i64>(out_h, floor_div(in_h - 1 + pad - fh, stride) + 1);
                        const i64 ow_lo = std::max<i64>(0, ceil_div(pad - fw, stride));
                        const i64 ow_hi = std::min<i64>(out_w, floor_div(in_w - 1 + pad - fw, stride) + 1);
                        for (i64 oh = oh_lo; oh < oh_hi; ++oh) {
                            const i64 ih = oh * stride + fh - pad;
                            const double* in_row = in_plane + ih * in_w + fw - pad;
                            double* din_row = din_plane + ih * in_w + fw - pad;
                            const double* dout_row = dout_plane + oh * out_w;
                            if (stride == 1) {
                                for (i64 ow = ow_lo; ow < ow_hi; ++ow) {
                                    wg += dout_row[ow] * in_row[ow];
                                    din_row[ow] += wv * dout_row[ow];
                                }
                            } else {
                                for (i64 ow = ow_lo; ow < ow_hi; ++ow) {
                                    wg += dout_row[ow] * in_row[ow * stride];
                                    din_row[ow * stride] += wv * dout_row[ow];
                                }
                            }
                        }
                        dw_k[fh * kw + fw] += wg;
                    }
                }
            }
        }
    }
}

// ---- fully connected ------------------------------------------------------

void fc_forward(const Tensor& in, const FullyConnectedSpec& f, const Tensor& w, const Tensor& bias,
                Tensor& out) {
    const std::size_t batch = in.extent(0);
    const std::size_t n_in = f.in_features;
    const std::size_t n_out = f.out_features;
    const double* in_p = in.data();
    const double* w_p = w.data();
    double* out_p = out.data();

    for (std::size_t b = 0; b < batch; ++b) {
        const double* x = in_p + b * n_in;
        double* y = out_p + b * n_out;
        for (std::size_t o = 0; o < n_out; ++o) {
            const double* wr = w_p + o * n_in;
            double acc = bias[o];
            for (std::size_t i = 0; i < n_in; ++i) {
                acc += wr[i] * x[i];
            }
            y[o] = acc;
        }
    }
}

void fc_backward(const Tensor& in, const Tensor& dout, const FullyConnectedSpec& f, const Tensor& w,
                 Tensor& dw, Tensor& db, Tensor& din) {
    const std::size_t batch = in.extent(0);
    const std::size_t n_in = f.in_features;
    const std::size_t n_out = f.out_features;
    const double* in_p = in.data();
    const double* w_p = w.data();
    const double* dout_p = dout.data();
    double* dw_p = dw.data();
    double* din_p = din.data();

    for (std::size_t b = 0; b < batch; ++b) {
        const double* x = in_p + b * n_in;
        const double* g = dout_p + b * n_out;
        double* dx = din_p + b * n_in;
        for (std::size_t o = 0; o < n_out; ++o) {
            const double go = g[o];
            if (go == 0.0) {
                continue;
            }
            db[o] += go;
            const double* wr = w_p + o * n_in;
            double* dwr = dw_p + o * n_in;
            for (std::size_t i = 0; i < n_in; ++i) {
                dwr[i] += go * x[i];
                dx[i] += go * wr[i];
            }
        }
    }
}

// ---- pooling ---------------------------------------------------------------

void pool_forward(const Tensor& in, const PoolSpec& p, Tensor& out, std::vector<std::size_t>& argmax) {
    const std::size_t batch = in.extent(0);
    const std::size_t chans = in.extent(1);
    const std::size_t in_h = in.extent(2);
    const std::size_t in_w = in.extent(3);
    const std::size_t out_h = out.extent(2);
    const std::size_t out_w = out.extent(3);
    const std::size_t win_h = p.global ? in_h : p.kernel;
    const std::size_t win_w = p.global ? in_w : p.kernel;
    const std::size_t stride = p.global ? 1 : p.stride;

    const bool max_mode = p.mode == PoolMode::kMax;
    if (max_mode) {
        argmax.assign(out.size(), 0);
    }
    const double inv_win = 1.0 / static_cast<double>(win_h * win_w);

    const double* in_p = in.data();
    double* out_p = out.data();

    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t c = 0; c < chans; ++c) {
            const std::size_t plane_base = ((b * chans + c) * in_h) * in_w;
            const double* plane = in_p + plane_base;
            for (std::size_t oh = 0; oh < out_h; ++oh) {
                for (std::size_t ow = 0; ow < out_w; ++ow) {
                    const std::size_t h0 = oh * stride;
                    const std::size_t w0 = ow * stride;
                    const std::size_t oidx = ((b * chans + c) * out_h + oh) * out_w + ow;
                    if (max_mode) {
                        double best = plane[h0 * in_w + w0];
                        std::size_t best_idx = h0 * in_w + w0;
                        for (std::size_t ih = h0; ih < h0 + win_h; ++ih) {
                            for (std::size_t iw = w0; iw < w0 + win_w; ++iw) {
                                const double v = plane[ih * in_w + iw];
                                if (v > best) {  // ties keep the lowest index
                                    best = v;
                                    best_idx = ih * in_w + iw;
                                }
                            }
                        }
                        out_p[oidx] = best;
                        argmax[oidx] = plane_base + best_idx;
                    } else {
                        double acc = 0.0;
                        for (std::size_t ih = h0; ih < h0 + win_h; ++ih) {
                            for (std::size_t iw = w0; iw < w0 + win_w; ++iw) {
                                acc += plane[ih * in_w + iw];
                            }
                        }
                        out_p[oidx] = acc * inv_win;
                    }
                }
            }
        }
    }
}

void pool_backward(const Tensor& in, const Tensor& dout, const PoolSpec& p,
                   const std::vector<std::size_t>& argmax, Tensor& din) {
    const std::size_t in_h = in.extent(2);
    const std::size_t in_w = in.extent(3);
    const std::size_t win_h = p.global ? in_h : p.kernel;
    const std::size_t win_w = p.global ? in_w : p.kernel;
    const std::size_t stride = p.global ? 1 : p.stride;

    if (p.mode == PoolMode::kMax) {
        const double* g = dout.data();
        double* dx = din.data();
        for (std::size_t i = 0; i < dout.size(); ++i) {
            dx[argmax[i]] += g[i];
        }
        return;
    }

    const std::size_t batch = dout.extent(0);
    const std::size_t chans = dout.extent(1);
    const std::size_t out_h = dout.extent(2);
    const std::size_t out_w = dout.extent(3);
    const double inv_win = 1.0 / static_cast<double>(win_h * win_w);
    const double* g = dout.data();
    double* dx = din.data();

    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t c = 0; c < chans; ++c) {
            double* plane = dx + ((b * chans + c) * in_h) * in_w;
            for (std::size_t oh = 0; oh < out_h; ++oh) {
                for (std::size_t ow = 0; ow < out_w; ++ow) {
                    const double gv = g[((b * chans + c) * out_h + oh) * out_w + ow] * inv_win;
                    for (std::size_t ih = oh * stride; ih < oh * stride + win_h; ++ih) {
                        for (std::size_t iw = ow * stride; iw < ow * stride + win_w; ++iw) {
                            plane[ih * in_w + iw] += gv;
                        }
                    }
                }
            }
        }
    }
}

// ---- activations -----------------------------------------------------------

void activation_forward(const Tensor& in, const ActivationSpec& a, Tensor& out,
                        std::vector<std::size_t>& argmax) {
    if (a.kind == ActivationKind::kMaxout) {
        const std::size_t batch = in.extent(0);
        const std::size_t in_units = in.extent(1);
        const std::size_t pieces = a.pieces;
        const std::size_t out_units = in_units / pieces;
        std::size_t spatial = 1;
        for (std::size_t d = 2; d < in.rank(); ++d) {
            spatial *= in.extent(d);
        }
        argmax.assign(out.size(), 0);
        const double* in_p = in.data();
        double* out_p = out.data();
        for (std::size_t b = 0; b < batch; ++b) {
            for (std::size_t j = 0; j < out_units; ++j) {
                for (std::size_t s = 0; s < spatial; ++s) {
                    std::size_t best_idx = (b * in_units + j) * spatial + s;
                    double best = in_p[best_idx];
                    for (std::size_t p = 1; p < pieces; ++p) {
                        const std::size_t idx = (b * in_units + p * out_units + j) * spatial + s;
                        const double v = in_p[idx];
                        if (v > best) {  // ties keep the lowest piece
                            best = v;
                            best_idx = idx;
                        }
                    }
                    const std::size_t oidx = (b * out_units + j) * spatial + s;
                    out_p[oidx] = best;
                    argmax[oidx] = best_idx;
                }
            }
        }
        return;
    }

    const double* x = in.data();
    double* y = out.data();
    const std::size_t n = in.size();
    switch (a.kind) {
        case ActivationKind::kRelu:
            for (std::size_t i = 0; i < n; ++i) {
                y[i] = x[i] > 0.0 ? x[i] : 0.0;
            }
            break;
        case ActivationKind::kVlrelu:
            for (std::size_t i = 0; i < n; ++i) {
                y[i] = x[i] > 0.0 ? x[i] : a.slope * x[i];
            }
            break;
        case ActivationKind::kTanh:
            for (std::size_t i = 0; i < n; ++i) {
                y[i] = std::tanh(x[i]);
            }
            break;
        case ActivationKind::kSigmoid:
            for (std::size_t i = 0; i < n; ++i) {
                y[i] = 1.0 / (1.0 + std::exp(-x[i]));
            }
            break;
        case ActivationKind::kMaxout:
            break;
    }
}

void activation_backward(const Tensor& out, const Tensor& dout, const ActivationSpec& a,
                         const std::vector<std::size_t>& argmax, Tensor& din) {
    const double* y = out.data();
    const double* g = dout.data();
    double* dx = din.data();
    const std::size_t n = dout.size();
    switch (a.kind) {
        case ActivationKind::kRelu:
            // derivative at exactly 0 is taken as 0
            for (std::size_t i = 0; i < n; ++i) {
                dx[i] += y[i] > 0.0 ? g[i] : 0.0;
            }
            break;
        case ActivationKind::kVlrelu:
            for (std::size_t i = 0; i < n; ++i) {
                dx[i] += y[i] > 0.0 ? g[i] : a.slope * g[i];
            }
            break;
        case ActivationKind::kTanh:
            for (std::size_t i = 0; i < n; ++i) {
                dx[i] += g[i] * (1.0 - y[i] * y[i]);
            }
            break;
        case ActivationKind::kSigmoid:
            for (std::size_t i = 0; i < n; ++i) {
                dx[i] += g[i] * y[i] * (1.0 - y[i]);
            }
            break;
        case ActivationKind::kMaxout:
            for (std::size_t i = 0; i < n; ++i) {
                dx[argmax[i]] += g[i];
            }
            break;
    }
}

// ---- batch norm -------------------------------------------------------------

// Channel layout helper: blob [B, C, spatial...] normalized per channel over
// batch and spatial positions.
struct ChannelView {
    std::size_t batch;
    std::size_t chans;
    std::size_t spatial;

    explicit ChannelView(const Tensor& t) {
        batch = t.extent(0);
        chans = t.extent(1);
        spatial = 1;
        for (std::size_t d = 2; d < t.rank(); ++d) {
            spatial *= t.extent(d);
        }
    }
    std::size_t count() const { return batch * spatial; }
    std::size_t index(std::size_t b, std::size_t c, std::size_t s) const {
        return (b * chans + c) * spatial + s;
    }
};

void batchnorm_forward(const Tensor& in, const BatchNormSpec& bn, const Tensor& gamma, const Tensor& beta,
                       bool training, Tensor& out, Tensor& xhat, std::vector<double>& inv_std,
                       Tensor& running_mean, Tensor& running_var) {
    const ChannelView v(in);
    const double n = static_cast<double>(v.count());
    inv_std.assign(v.chans, 0.0);

    for (std::size_t c = 0; c < v.chans; ++c) {
        double mean;
        double var;
        if (training) {
            double sum = 0.0;
            for (std::size_t b = 0; b < v.batch; ++b) {
                for (std::size_t s = 0; s < v.spatial; ++s) {
                    sum += in[v.index(b, c, s)];
                }
            }
            mean = sum / n;
            double sq = 0.0;
            for (std::size_t b = 0; b < v.batch; ++b) {
                for (std::size_t s = 0; s < v.spatial; ++s) {
                    const double d = in[v.index(b, c, s)] - mean;
                    sq += d * d;
                }
            }
            var = sq / n;
            running_mean[c] = 0.9 * running_mean[c] + 0.1 * mean;
            running_var[c] = 0.9 * running_var[c] + 0.1 * var;
        } else {
            mean = running_mean[c];
            var = running_var[c];
        }
        const double istd = 1.0 / std::sqrt(var + bn.epsilon);
        inv_std[c] = istd;
        const double g = gamma[c];
        const double sh = beta[c];
        for (std::size_t b = 0; b < v.batch; ++b) {
            for (std::size_t s = 0; s < v.spatial; ++s) {
                const std::size_t i = v.index(b, c, s);
                const double xh = (in[i] - mean) * istd;
                xhat[i] = xh;
                out[i] = g * xh + sh;
            }
        }
    }
}

void batchnorm_backward(const Tensor& dout, const Tensor& xhat, const std::vector<double>& inv_std,
                        const Tensor& gamma, Tensor& dgamma, Tensor& dbeta, Tensor& din) {
    const ChannelView v(dout);
    const double n = static_cast<double>(v.count());

    for (std::size_t c = 0; c < v.chans; ++c) {
        double sum_g = 0.0;
        double sum_gx = 0.0;
        for (std::size_t b = 0; b < v.batch; ++b) {
            for (std::size_t s = 0; s < v.spatial; ++s) {
                const std::size_t i = v.index(b, c, s);
                sum_g += dout[i];
                sum_gx += dout[i] * xhat[i];
            }
        }
        dgamma[c] += sum_gx;
        dbeta[c] += sum_g;
        const double mean_g = sum_g / n;
        const double mean_gx = sum_gx / n;
        const double scale = gamma[c] * inv_std[c];
        for (std::size_t b = 0; b < v.batch; ++b) {
            for (std::size_t s = 0; s < v.spatial; ++s) {
                const std::size_t i = v.index(b, c, s);
                din[i] += scale * (dout[i] - mean_g - xhat[i] * mean_gx);
            }
        }
    }
}

// ---- shape inference --------------------------------------------------------

std::size_t pooled_extent(std::size_t in, std::size_t kernel, std::size_t stride, const std::string& what) {
    if (kernel > in) {
        throw ShapeError(what + ": window " + std::to_string(kernel) + " exceeds input extent " +
                         std::to_string(in));
    }
    return (in - kernel) / stride + 1;
}

Shape infer_out_shape(const LayerSpec& spec, const Shape& in_shape, const std::string& label,
                      const std::string& prev) {
    if (const auto* c = std::get_if<ConvSpec>(&spec)) {
        if (in_shape.size() != 3) {
            throw ShapeError(label + ": conv expects [C,H,W] input, " + prev + " provides rank " +
                             std::to_string(in_shape.size()));
        }
        if (in_shape[0] != c->in_channels) {
            throw ShapeError(label + ": expects " + std::to_string(c->in_channels) +
                             " input channels, " + prev + " provides " + std::to_string(in_shape[0]));
        }
        const i64 oh = (static_cast<i64>(in_shape[1]) + 2 * static_cast<i64>(c->pad) -
                        static_cast<i64>(c->kernel_h)) / static_cast<i64>(c->stride) + 1;
        const i64 ow = (static_cast<i64>(in_shape[2]) + 2 * static_cast<i64>(c->pad) -
                        static_cast<i64>(c->kernel_w)) / static_cast<i64>(c->stride) + 1;
        if (oh < 1 || ow < 1) {
            throw ShapeError(label + ": kernel does not fit the padded input");
        }
        return {c->out_channels, static_cast<std::size_t>(oh), static_cast<std::size_t>(ow)};
    }
    if (const auto* f = std::get_if<FullyConnectedSpec>(&spec)) {
        if (product(in_shape) != f->in_features) {
            throw ShapeError(label + ": expects " + std::to_string(f->in_features) +
                             " input features, " + prev + " provides " + std::to_string(product(in_shape)));
        }
        return {f->out_features};
    }
    if (const auto* p = std::get_if<PoolSpec>(&spec)) {
        if (in_shape.size() != 3) {
            throw ShapeError(label + ": pool expects [C,H,W] input, " + prev + " provides rank " +
                             std::to_string(in_shape.size()));
        }
        if (p->global) {
            return {in_shape[0], 1, 1};
        }
        return {in_shape[0], pooled_extent(in_shape[1], p->kernel, p->stride, label),
                pooled_extent(in_shape[2], p->kernel, p->stride, label)};
    }
    if (const auto* a = std::get_if<ActivationSpec>(&spec)) {
        if (a->kind == ActivationKind::kMaxout) {
            if (in_shape[0] % a->pieces != 0) {
                throw ShapeError(label + ": maxout over " + std::to_string(a->pieces) +
                                 " pieces needs a multiple of that many channels, got " +
                                 std::to_string(in_shape[0]));
            }
            Shape out = in_shape;
            out[0] = in_shape[0] / a->pieces;
            return out;
        }
        return in_shape;
    }
    if (std::holds_alternative<BatchNormSpec>(spec)) {
        return in_shape;
    }
    return in_shape;  // ResidualAdd, checked against its source at build
}

void validate_spec(const LayerSpec& spec, const std::string& label) {
    if (const auto* c = std::get_if<ConvSpec>(&spec)) {
        if (c->kernel_h == 0 || c->kernel_w == 0 || c->in_channels == 0 || c->out_channels == 0 ||
            c->stride == 0) {
            throw ParameterError(label + ": conv extents and stride must be positive");
        }
    } else if (const auto* f = std::get_if<FullyConnectedSpec>(&spec)) {
        if (f->in_features == 0 || f->out_features == 0) {
            throw ParameterError(label + ": fully-connected extents must be positive");
        }
    } else if (const auto* p = std::get_if<PoolSpec>(&spec)) {
        if (!p->global && (p->kernel == 0 || p->stride == 0)) {
            throw ParameterError(label + ": pool kernel and stride must be positive");
        }
    } else if (const auto* a = std::get_if<ActivationSpec>(&spec)) {
        if (a->kind == ActivationKind::kMaxout && a->pieces < 2) {
            throw ParameterError(label + ": maxout needs at least 2 pieces");
        }
        if (a->kind == ActivationKind::kVlrelu && (a->slope <= 0.0 || a->slope >= 1.0)) {
            throw ParameterError(label + ": vlrelu slope must lie in (0, 1)");
        }
    } else if (const auto* bn = std::get_if<BatchNormSpec>(&spec)) {
        if (bn->epsilon <= 0.0) {
            throw ParameterError(label + ": batch-norm epsilon must be positive");
        }
    }
}

Shape batched(const Shape& s, std::size_t batch) {
    Shape out;
    out.reserve(s.size() + 1);
    out.push_back(batch);
    out.insert(out.end(), s.begin(), s.end());
    return out;
}

}  // namespace

Network Network::build(std::vector<LayerSpec> specs, Shape input_shape) {
    if (specs.empty()) {
        throw ParameterError("build: layer list is empty");
    }
    if (input_shape.size() != 1 && input_shape.size() != 3) {
        throw ShapeError("build: input shape must be [features] or [C,H,W]");
    }
    shape_size(input_shape);  // positive extents

    Network net;
    net.input_shape_ = input_shape;

    std::size_t counts[6] = {0, 0, 0, 0, 0, 0};
    Shape cur = input_shape;
    for (std::size_t i = 0; i < specs.size(); ++i) {
        Layer layer;
        layer.spec = std::move(specs[i]);
        const std::size_t kind_idx = layer.spec.index();
        layer.label = layer_kind_name(layer.spec) + std::to_string(++counts[kind_idx]);

        validate_spec(layer.spec, layer.label);
        layer.in_shape = cur;

        if (const auto* r = std::get_if<ResidualAddSpec>(&layer.spec)) {
            if (r->source_layer >= i) {
                throw ShapeError(layer.label + ": residual source index " +
                                 std::to_string(r->source_layer) + " does not precede layer " +
                                 std::to_string(i));
            }
            const Layer& src = net.layers_[r->source_layer];
            if (src.out_shape != cur) {
                throw ShapeError(layer.label + ": residual source " + src.label +
                                 " output shape does not match this layer's input shape");
            }
        }
        layer.out_shape = infer_out_shape(layer.spec, cur, layer.label,
                                          i == 0 ? "the network input" : net.layers_[i - 1].label);

        if (const auto* c = std::get_if<ConvSpec>(&layer.spec)) {
            layer.weights = Tensor::zeros({c->out_channels, c->in_channels, c->kernel_h, c->kernel_w});
            layer.bias = Tensor::zeros({c->out_channels});
        } else if (const auto* f = std::get_if<FullyConnectedSpec>(&layer.spec)) {
            layer.weights = Tensor::zeros({f->out_features, f->in_features});
            layer.bias = Tensor::zeros({f->out_features});
        } else if (std::holds_alternative<BatchNormSpec>(layer.spec)) {
            const std::size_t chans = layer.in_shape[0];
            layer.weights = Tensor::full({chans}, 1.0);  // scale
            layer.bias = Tensor::zeros({chans});         // shift
            layer.running_mean = Tensor::zeros({chans});
            layer.running_var = Tensor::full({chans}, 1.0);
        }

        cur = layer.out_shape;
        net.layers_.push_back(std::move(layer));
    }

    for (std::size_t i = 0; i < net.layers_.size(); ++i) {
        if (is_parameterized(net.layers_[i].spec)) {
            net.parameterized_.push_back(i);
            // The maxout activation consuming this layer's output, if any,
            // determines the piece grouping used by initialization.
            for (std::size_t j = i + 1; j < net.layers_.size(); ++j) {
                if (is_parameterized(net.layers_[j].spec)) {
                    break;
                }
                if (const auto* a = std::get_if<ActivationSpec>(&net.layers_[j].spec)) {
                    if (a->kind == ActivationKind::kMaxout) {
                        net.layers_[i].piece_count = a->pieces;
                    }
                    break;
                }
            }
        }
        if (is_trainable(net.layers_[i].spec)) {
            net.trainable_.push_back(i);
        }
    }
    return net;
}

const Tensor& Network::run_layers(const Tensor& input, std::size_t upto, bool training) {
    if (!weights_initialized_) {
        throw StateError("forward: weights are not initialized");
    }
    if (input.rank() != input_shape_.size() + 1) {
        throw ShapeError("forward: input rank " + std::to_string(input.rank()) +
                         " does not match network input rank " + std::to_string(input_shape_.size() + 1));
    }
    for (std::size_t d = 0; d < input_shape_.size(); ++d) {
        if (input.extent(d + 1) != input_shape_[d]) {
            throw ShapeError("forward: input shape does not match network input shape");
        }
    }
    const std::size_t batch = input.extent(0);

    input_cache_ = input;
    last_batch_ = batch;

    for (std::size_t i = 0; i <= upto; ++i) {
        Layer& layer = layers_[i];
        const Tensor& in = (i == 0) ? input_cache_ : layers_[i - 1].output;
        const Shape out_shape = batched(layer.out_shape, batch);
        if (layer.output.shape() != out_shape) {
            layer.output = Tensor::zeros(out_shape);
        }

        if (const auto* c = std::get_if<ConvSpec>(&layer.spec)) {
            conv_forward(in, *c, layer.weights, layer.bias, layer.output);
        } else if (const auto* f = std::get_if<FullyConnectedSpec>(&layer.spec)) {
            fc_forward(in, *f, layer.weights, layer.bias, layer.output);
        } else if (const auto* p = std::get_if<PoolSpec>(&layer.spec)) {
            pool_forward(in, *p, layer.output, layer.argmax);
        } else if (const auto* a = std::get_if<ActivationSpec>(&layer.spec)) {
            activation_forward(in, *a, layer.output, layer.argmax);
        } else if (const auto* bn = std::get_if<BatchNormSpec>(&layer.spec)) {
            if (layer.bn_xhat.shape() != out_shape) {
                layer.bn_xhat = Tensor::zeros(out_shape);
            }
            batchnorm_forward(in, *bn, layer.weights, layer.bias, training, layer.output, layer.bn_xhat,
                              layer.bn_inv_std, layer.running_mean, layer.running_var);
        } else if (const auto* r = std::get_if<ResidualAddSpec>(&layer.spec)) {
            const Tensor& src = layers_[r->source_layer].output;
            for (std::size_t k = 0; k < layer.output.size(); ++k) {
                layer.output[k] = in[k] + src[k];
            }
        }
    }

    forward_complete_ = (upto + 1 == layers_.size());
    return layers_[upto].output;
}

const Tensor& Network::forward(const Tensor& input, bool training) {
    return run_layers(input, layers_.size() - 1, training);
}

const Tensor& Network::forward_up_to(const Tensor& input, std::size_t last_layer, bool training) {
    if (last_layer >= layers_.size()) {
        throw ParameterError("forward_up_to: layer index out of range");
    }
    return run_layers(input, last_layer, training);
}

Gradients Network::backward(const Tensor& output_grad, bool record_blob_grads) const {
    if (!forward_complete_) {
        throw StateError("backward: no complete forward pass is cached");
    }
    if (output_grad.shape() != layers_.back().output.shape()) {
        throw ShapeError("backward: output gradient shape does not match the last forward output");
    }

    Gradients grads;
    grads.weight_grads.resize(layers_.size());
    grads.bias_grads.resize(layers_.size());

    // Gradient w.r.t. each layer's output blob, accumulated in reverse so
    // residual links can deposit into their source before it is processed.
    std::vector<Tensor> grad_blobs(layers_.size());
    grad_blobs.back() = output_grad;

    auto deposit = [&](std::size_t idx, Tensor&& g) {
        if (grad_blobs[idx].empty()) {
            grad_blobs[idx] = std::move(g);
        } else {
            Tensor& dst = grad_blobs[idx];
            for (std::size_t k = 0; k < dst.size(); ++k) {
                dst[k] += g[k];
            }
        }
    };

    for (std::size_t i = layers_.size(); i-- > 0;) {
        const Layer& layer = layers_[i];
        const Tensor& in = (i == 0) ? input_cache_ : layers_[i - 1].output;
        const Tensor& g = grad_blobs[i];
        Tensor din = Tensor::zeros(in.shape());

        if (const auto* c = std::get_if<ConvSpec>(&layer.spec)) {
            grads.weight_grads[i] = Tensor::zeros(layer.weights.shape());
            grads.bias_grads[i] = Tensor::zeros(layer.bias.shape());
            conv_backward(in, g, *c, layer.weights, grads.weight_grads[i], grads.bias_grads[i], din);
        } else if (const auto* f = std::get_if<FullyConnectedSpec>(&layer.spec)) {
            grads.weight_grads[i] = Tensor::zeros(layer.weights.shape());
            grads.bias_grads[i] = Tensor::zeros(layer.bias.shape());
            fc_backward(in, g, *f, layer.weights, grads.weight_grads[i], grads.bias_grads[i], din);
        } else if (const auto* p = std::get_if<PoolSpec>(&layer.spec)) {
            pool_backward(in, g, *p, layer.argmax, din);
        } else if (const auto* a = std::get_if<ActivationSpec>(&layer.spec)) {
            activation_backward(layer.output, g, *a, layer.argmax, din);
        } else if (std::get_if<BatchNormSpec>(&layer.spec)) {
            grads.weight_grads[i] = Tensor::zeros(layer.weights.shape());
            grads.bias_grads[i] = Tensor::zeros(layer.bias.shape());
            batchnorm_backward(g, layer.bn_xhat, layer.bn_inv_std, layer.weights, grads.weight_grads[i],
                               grads.bias_grads[i], din);
        } else if (const auto* r = std::get_if<ResidualAddSpec>(&layer.spec)) {
            din = g;
            deposit(r->source_layer, Tensor(g));
        }

        if (i == 0) {
            grads.input_grad = std::move(din);
        } else {
            deposit(i - 1, std::move(din));
        }
    }
    if (record_blob_grads) {
        grads.blob_grads = std::move(grad_blobs);
    }
    return grads;
}

std::vector<double> Network::amplification_profile(const Tensor& input) {
    const double input_var = variance(input);
    if (input_var == 0.0) {
        throw DegenerateError("amplification_profile: input has zero variance");
    }
    forward(input, true);

    std::vector<double> ratios;
    ratios.reserve(layers_.size());
    double prev = input_var;
    for (const Layer& layer : layers_) {
        const double v = variance(layer.output);
        ratios.push_back(std::sqrt(v / prev));
        prev = v;
    }
    return ratios;
}

}  // namespace initlab

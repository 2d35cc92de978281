#include "stmforge/nn.hpp"

#include "stmforge/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

namespace stmforge {

std::string shape_str(const std::vector<int>& shape) {
    std::ostringstream out;
    out << "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out << "x";
        out << shape[i];
    }
    out << ")";
    return out.str();
}

namespace {

void require_shape(bool ok, const std::string& what, const std::vector<int>& expected,
                   const std::vector<int>& actual) {
    if (!ok)
        throw DataError(what + ": expected " + shape_str(expected) + ", got " +
                        shape_str(actual));
}

// Cross-correlation of one sample. x: [H,W,Cin], w: [k,k,Cin,Cout],
// y: [Ho,Wo,Cout]. bias may be null.
void conv_fwd_sample(const double* x, int h, int w_dim, int cin, const double* w, int k,
                     int stride, int pad, const double* bias, double* y, int ho, int wo,
                     int cout) {
    for (int oh = 0; oh < ho; ++oh) {
        for (int ow = 0; ow < wo; ++ow) {
            double* acc = y + (static_cast<std::size_t>(oh) * wo + ow) * cout;
            for (int co = 0; co < cout; ++co) acc[co] = bias ? bias[co] : 0.0;
            for (int kh = 0; kh < k; ++kh) {
                const int ih = oh * stride + kh - pad;
                if (ih < 0 || ih >= h) continue;
                for (int kw = 0; kw < k; ++kw) {
                    const int iw = ow * stride + kw - pad;
                    if (iw < 0 || iw >= w_dim) continue;
                    const double* xp = x + (static_cast<std::size_t>(ih) * w_dim + iw) * cin;
                    const double* wp = w + (static_cast<std::size_t>(kh) * k + kw) * cin * cout;
                    for (int ci = 0; ci < cin; ++ci) {
                        const double xv = xp[ci];
                        const double* wr = wp + static_cast<std::size_t>(ci) * cout;
                        for (int co = 0; co < cout; ++co) acc[co] += xv * wr[co];
                    }
                }
            }
        }
    }
}

// Gradient wrt the conv input; the same routine is the TConv2D forward.
void conv_bwd_input_sample(const double* dy, int ho, int wo, int cout, const double* w,
                           int k, int stride, int pad, double* dx, int h, int w_dim,
                           int cin) {
    std::fill_n(dx, static_cast<std::size_t>(h) * w_dim * cin, 0.0);
    for (int oh = 0; oh < ho; ++oh) {
        for (int ow = 0; ow < wo; ++ow) {
            const double* dyp = dy + (static_cast<std::size_t>(oh) * wo + ow) * cout;
            for (int kh = 0; kh < k; ++kh) {
                const int ih = oh * stride + kh - pad;
                if (ih < 0 || ih >= h) continue;
                for (int kw = 0; kw < k; ++kw) {
                    const int iw = ow * stride + kw - pad;
                    if (iw < 0 || iw >= w_dim) continue;
                    double* dxp = dx + (static_cast<std::size_t>(ih) * w_dim + iw) * cin;
                    const double* wp = w + (static_cast<std::size_t>(kh) * k + kw) * cin * cout;
                    for (int ci = 0; ci < cin; ++ci) {
                        const double* wr = wp + static_cast<std::size_t>(ci) * cout;
                        double s = 0.0;
                        for (int co = 0; co < cout; ++co) s += wr[co] * dyp[co];
                        dxp[ci] += s;
                    }
                }
            }
        }
    }
}

// Accumulates weight (and optionally bias) gradients for one sample.
void conv_bwd_weights_sample(const double* x, int h, int w_dim, int cin, const double* dy,
                             int ho, int wo, int cout, int k, int stride, int pad,
                             double* dw, double* db) {
    for (int oh = 0; oh < ho; ++oh) {
        for (int ow = 0; ow < wo; ++ow) {
            const double* dyp = dy + (static_cast<std::size_t>(oh) * wo + ow) * cout;
            if (db)
                for (int co = 0; co < cout; ++co) db[co] += dyp[co];
            for (int kh = 0; kh < k; ++kh) {
                const int ih = oh * stride + kh - pad;
                if (ih < 0 || ih >= h) continue;
                for (int kw = 0; kw < k; ++kw) {
                    const int iw = ow * stride + kw - pad;
                    if (iw < 0 || iw >= w_dim) continue;
                    const double* xp = x + (static_cast<std::size_t>(ih) * w_dim + iw) * cin;
                    double* dwp = dw + (static_cast<std::size_t>(kh) * k + kw) * cin * cout;
                    for (int ci = 0; ci < cin; ++ci) {
                        const double xv = xp[ci];
                        double* wr = dwp + static_cast<std::size_t>(ci) * cout;
                        for (int co = 0; co < cout; ++co) wr[co] += xv * dyp[co];
                    }
                }
            }
        }
    }
}

// Fixed-size sample chunks; per-chunk gradient buffers are reduced in
// chunk order so results do not depend on the worker count.
constexpr int kGradChunk = 16;

void kaiming_uniform(Tensor& w, int fan_in, Rng& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (auto& v : w.data) v = (rng.uniform() * 2.0 - 1.0) * bound;
    w.quantize_f32();
}

std::vector<int> batched(int n, const std::vector<int>& per_sample) {
    std::vector<int> s;
    s.reserve(per_sample.size() + 1);
    s.push_back(n);
    s.insert(s.end(), per_sample.begin(), per_sample.end());
    return s;
}

std::vector<int> per_sample_of(const Tensor& t) {
    if (t.shape.size() < 2) throw DataError("expected a batched tensor");
    return {t.shape.begin() + 1, t.shape.end()};
}

} // namespace

// ---------------------------------------------------------------- Conv2D

Conv2D::Conv2D(int in_ch, int out_ch, int kernel, int stride, int pad)
    : in_ch_(in_ch), out_ch_(out_ch), kernel_(kernel), stride_(stride), pad_(pad) {
    if (in_ch < 1 || out_ch < 1 || kernel < 1 || stride < 1 || pad < 0)
        throw ConfigError("invalid conv2d hyperparameters");
    weights_ = Tensor::zeros({kernel, kernel, in_ch, out_ch});
    bias_ = Tensor::zeros({out_ch});
    dweights_ = Tensor::zeros(weights_.shape);
    dbias_ = Tensor::zeros(bias_.shape);
}

void Conv2D::init(Rng& rng) {
    kaiming_uniform(weights_, kernel_ * kernel_ * in_ch_, rng);
    std::fill(bias_.data.begin(), bias_.data.end(), 0.0);
}

std::vector<int> Conv2D::output_shape(const std::vector<int>& in) const {
    require_shape(in.size() == 3 && in[2] == in_ch_, "conv2d input", {-1, -1, in_ch_}, in);
    const int ho = (in[0] + 2 * pad_ - kernel_) / stride_ + 1;
    const int wo = (in[1] + 2 * pad_ - kernel_) / stride_ + 1;
    if (in[0] + 2 * pad_ < kernel_ || in[1] + 2 * pad_ < kernel_)
        throw DataError("conv2d kernel larger than padded input " + shape_str(in));
    return {ho, wo, out_ch_};
}

Tensor Conv2D::forward(const Tensor& x, bool) {
    const auto in = per_sample_of(x);
    const auto out = output_shape(in);
    const int n = x.shape[0];
    Tensor y = Tensor::zeros(batched(n, out));
    const std::size_t xs = x.per_sample(), ys = y.per_sample();
    parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
        conv_fwd_sample(x.data.data() + i * xs, in[0], in[1], in_ch_, weights_.data.data(),
                        kernel_, stride_, pad_, bias_.data.data(), y.data.data() + i * ys,
                        out[0], out[1], out_ch_);
    });
    cached_input_ = x;
    return y;
}

Tensor Conv2D::backward(const Tensor& dy) {
    if (cached_input_.shape.empty()) throw DataError("conv2d backward before forward");
    const Tensor& x = cached_input_;
    const auto in = per_sample_of(x);
    const auto out = per_sample_of(dy);
    const int n = x.shape[0];
    Tensor dx = Tensor::zeros(x.shape);
    const std::size_t xs = x.per_sample(), ys = dy.per_sample();

    parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
        conv_bwd_input_sample(dy.data.data() + i * ys, out[0], out[1], out_ch_,
                              weights_.data.data(), kernel_, stride_, pad_,
                              dx.data.data() + i * xs, in[0], in[1], in_ch_);
    });

    const std::size_t chunks = (static_cast<std::size_t>(n) + kGradChunk - 1) / kGradChunk;
    std::vector<std::vector<double>> dw_parts(chunks,
                                              std::vector<double>(weights_.size(), 0.0));
    std::vector<std::vector<double>> db_parts(chunks, std::vector<double>(bias_.size(), 0.0));
    parallel_for(chunks, [&](std::size_t c) {
        const std::size_t lo = c * kGradChunk;
        const std::size_t hi = std::min<std::size_t>(lo + kGradChunk, static_cast<std::size_t>(n));
        for (std::size_t i = lo; i < hi; ++i) {
            conv_bwd_weights_sample(x.data.data() + i * xs, in[0], in[1], in_ch_,
                                    dy.data.data() + i * ys, out[0], out[1], out_ch_,
                                    kernel_, stride_, pad_, dw_parts[c].data(),
                                    db_parts[c].data());
        }
    });
    for (std::size_t c = 0; c < chunks; ++c) {
        for (std::size_t i = 0; i < weights_.size(); ++i) dweights_.data[i] += dw_parts[c][i];
        for (std::size_t i = 0; i < bias_.size(); ++i) dbias_.data[i] += db_parts[c][i];
    }
    return dx;
}

nlohmann::json Conv2D::spec() const {
    return {{"kind", kind()},     {"in_ch", in_ch_}, {"out_ch", out_ch_},
            {"kernel", kernel_},  {"stride", stride_}, {"pad", pad_}};
}

// --------------------------------------------------------------- TConv2D

TConv2D::TConv2D(int in_ch, int out_ch, int kernel, int stride, int pad, int out_pad)
    : in_ch_(in_ch), out_ch_(out_ch), kernel_(kernel), stride_(stride), pad_(pad),
      out_pad_(out_pad) {
    if (in_ch < 1 || out_ch < 1 || kernel < 1 || stride < 1 || pad < 0 || out_pad < 0 ||
        out_pad >= stride)
        throw ConfigError("invalid tconv2d hyperparameters");
    weights_ = Tensor::zeros({kernel, kernel, out_ch, in_ch});
    bias_ = Tensor::zeros({out_ch});
    dweights_ = Tensor::zeros(weights_.shape);
    dbias_ = Tensor::zeros(bias_.shape);
}

void TConv2D::init(Rng& rng) {
    kaiming_uniform(weights_, kernel_ * kernel_ * in_ch_, rng);
    std::fill(bias_.data.begin(), bias_.data.end(), 0.0);
}

std::vector<int> TConv2D::output_shape(const std::vector<int>& in) const {
    require_shape(in.size() == 3 && in[2] == in_ch_, "tconv2d input", {-1, -1, in_ch_}, in);
    const int ho = (in[0] - 1) * stride_ + kernel_ - 2 * pad_ + out_pad_;
    const int wo = (in[1] - 1) * stride_ + kernel_ - 2 * pad_ + out_pad_;
    if (ho < 1 || wo < 1) throw DataError("tconv2d output shape degenerates for " + shape_str(in));
    return {ho, wo, out_ch_};
}

Tensor TConv2D::forward(const Tensor& x, bool) {
    const auto in = per_sample_of(x);
    const auto out = output_shape(in);
    const int n = x.shape[0];
    Tensor y = Tensor::zeros(batched(n, out));
    const std::size_t xs = x.per_sample(), ys = y.per_sample();
    parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
        double* yp = y.data.data() + i * ys;
        conv_bwd_input_sample(x.data.data() + i * xs, in[0], in[1], in_ch_,
                              weights_.data.data(), kernel_, stride_, pad_, yp, out[0],
                              out[1], out_ch_);
        for (std::size_t s = 0; s < ys; s += static_cast<std::size_t>(out_ch_))
            for (int co = 0; co < out_ch_; ++co) yp[s + static_cast<std::size_t>(co)] += bias_.data[static_cast<std::size_t>(co)];
    });
    cached_input_ = x;
    return y;
}

Tensor TConv2D::backward(const Tensor& dy) {
    if (cached_input_.shape.empty()) throw DataError("tconv2d backward before forward");
    const Tensor& x = cached_input_;
    const auto in = per_sample_of(x);
    const auto out = per_sample_of(dy);
    const int n = x.shape[0];
    Tensor dx = Tensor::zeros(x.shape);
    const std::size_t xs = x.per_sample(), ys = dy.per_sample();

    parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
        conv_fwd_sample(dy.data.data() + i * ys, out[0], out[1], out_ch_,
                        weights_.data.data(), kernel_, stride_, pad_, nullptr,
                        dx.data.data() + i * xs, in[0], in[1], in_ch_);
    });

    const std::size_t chunks = (static_cast<std::size_t>(n) + kGradChunk - 1) / kGradChunk;
    std::vector<std::vector<double>> dw_parts(chunks,
                                              std::vector<double>(weights_.size(), 0.0));
    std::vector<std::vector<double>> db_parts(chunks, std::vector<double>(bias_.size(), 0.0));
    parallel_for(chunks, [&](std::size_t c) {
        const std::size_t lo = c * kGradChunk;
        const std::size_t hi = std::min<std::size_t>(lo + kGradChunk, static_cast<std::size_t>(n));
        for (std::size_t i = lo; i < hi; ++i) {
            // The weight gradient of the adjoint conv swaps the roles of
            // the cached input and the incoming gradient.
            conv_bwd_weights_sample(dy.data.data() + i * ys, out[0], out[1], out_ch_,
                                    x.data.data() + i * xs, in[0], in[1], in_ch_, kernel_,
                                    stride_, pad_, dw_parts[c].data(), nullptr);
            const double* dyp = dy.data.data() + i * ys;
            for (std::size_t s = 0; s < ys; s += static_cast<std::size_t>(out_ch_))
                for (int co = 0; co < out_ch_; ++co)
                    db_parts[c][static_cast<std::size_t>(co)] += dyp[s + static_cast<std::size_t>(co)];
        }
    });
    for (std::size_t c = 0; c < chunks; ++c) {
        for (std::size_t i = 0; i < weights_.size(); ++i) dweights_.data[i] += dw_parts[c][i];
        for (std::size_t i = 0; i < bias_.size(); ++i) dbias_.data[i] += db_parts[c][i];
    }
    return dx;
}

nlohmann::json TConv2D::spec() const {
    return {{"kind", kind()},    {"in_ch", in_ch_},   {"out_ch", out_ch_},
            {"kernel", kernel_}, {"stride", stride_}, {"pad", pad_},
            {"out_pad", out_pad_}};
}

// ------------------------------------------------------------- MaxPool2D

MaxPool2D::MaxPool2D(int pool, int stride) : pool_(pool), stride_(stride) {
    if (pool < 1 || stride < 1) throw ConfigError("invalid maxpool hyperparameters");
}

std::vector<int> MaxPool2D::output_shape(const std::vector<int>& in) const {
    require_shape(in.size() == 3, "maxpool input", {-1, -1, -1}, in);
    if (in[0] < pool_ || in[1] < pool_)
        throw DataError("maxpool window larger than input " + shape_str(in));
    return {(in[0] - pool_) / stride_ + 1, (in[1] - pool_) / stride_ + 1, in[2]};
}

Tensor MaxPool2D::forward(const Tensor& x, bool) {
    const auto in = per_sample_of(x);
    const auto out = output_shape(in);
    const int n = x.shape[0];
    const int c_dim = in[2];
    Tensor y = Tensor::zeros(batched(n, out));
    argmax_.assign(y.size(), 0);
    in_shape_ = x.shape;
    const std::size_t xs = x.per_sample(), ys = y.per_sample();
    parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
        const double* xp = x.data.data() + i * xs;
        double* yp = y.data.data() + i * ys;
        std::size_t* am = argmax_.data() + i * ys;
        for (int oh = 0; oh < out[0]; ++oh) {
            for (int ow = 0; ow < out[1]; ++ow) {
                for (int c = 0; c < c_dim; ++c) {
                    double best = -std::numeric_limits<double>::infinity();
                    std::size_t best_idx = 0;
                    for (int kh = 0; kh < pool_; ++kh) {
                        const int ih = oh * stride_ + kh;
                        for (int kw = 0; kw < pool_; ++kw) {
                            const int iw = ow * stride_ + kw;
                            const std::size_t idx =
                                (static_cast<std::size_t>(ih) * in[1] + iw) * c_dim + c;
                            if (xp[idx] > best) {
                                best = xp[idx];
                                best_idx = idx;
                            }
                        }
                    }
                    const std::size_t o = (static_cast<std::size_t>(oh) * out[1] + ow) * c_dim + c;
                    yp[o] = best;
                    am[o] = i * xs + best_idx;
                }
            }
        }
    });
    return y;
}

Tensor MaxPool2D::backward(const Tensor& dy) {
    if (in_shape_.empty()) throw DataError("maxpool backward before forward");
    Tensor dx = Tensor::zeros(in_shape_);
    for (std::size_t o = 0; o < dy.size(); ++o) dx.data[argmax_[o]] += dy.data[o];
    return dx;
}

nlohmann::json MaxPool2D::spec() const {
    return {{"kind", kind()}, {"pool", pool_}, {"stride", stride_}};
}

// ----------------------------------------------------------------- Dense

Dense::Dense(int in_features, int out_features)
    : in_features_(in_features), out_features_(out_features) {
    if (in_features < 1 || out_features < 1) throw ConfigError("invalid dense dimensions");
    weights_ = Tensor::zeros({out_features, in_features});
    bias_ = Tensor::zeros({out_features});
    dweights_ = Tensor::zeros(weights_.shape);
    dbias_ = Tensor::zeros(bias_.shape);
}

void Dense::init(Rng& rng) {
    kaiming_uniform(weights_, in_features_, rng);
    std::fill(bias_.data.begin(), bias_.data.end(), 0.0);
}

std::vector<int> Dense::output_shape(const std::vector<int>& in) const {
    require_shape(in.size() == 1 && in[0] == in_features_, "dense input", {in_features_}, in);
    return {out_features_};
}

Tensor Dense::forward(const Tensor& x, bool) {
    output_shape(per_sample_of(x));
    const int n = x.shape[0];
    Tensor y = Tensor::zeros({n, out_features_});
    parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
        const double* xp = x.data.data() + i * static_cast<std::size_t>(in_features_);
        double* yp = y.data.data() + i * static_cast<std::size_t>(out_features_);
        for (int o = 0; o < out_features_; ++o) {
            const double* wr = weights_.data.data() + static_cast<std::size_t>(o) * in_features_;
            double acc = bias_.data[static_cast<std::size_t>(o)];
            for (int j = 0; j < in_features_; ++j) acc += wr[j] * xp[j];
            yp[o] = acc;
        }
    });
    cached_input_ = x;
    return y;
}

Tensor Dense::backward(const Tensor& dy) {
    if (cached_input_.shape.empty()) throw DataError("dense backward before forward");
    const Tensor& x = cached_input_;
    const int n = x.shape[0];
    Tensor dx = Tensor::zeros(x.shape);
    parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
        const double* dyp = dy.data.data() + i * static_cast<std::size_t>(out_features_);
        double* dxp = dx.data.data() + i * static_cast<std::size_t>(in_features_);
        for (int o = 0; o < out_features_; ++o) {
            const double* wr = weights_.data.data() + static_cast<std::size_t>(o) * in_features_;
            const double g = dyp[o];
            for (int j = 0; j < in_features_; ++j) dxp[j] += g * wr[j];
        }
    });
    // Weight gradients reduced serially in sample order.
    for (int i = 0; i < n; ++i) {
        const double* xp = x.data.data() + static_cast<std::size_t>(i) * in_features_;
        const double* dyp = dy.data.data() + static_cast<std::size_t>(i) * out_features_;
        for (int o = 0; o < out_features_; ++o) {
            double* wr = dweights_.data.data() + static_cast<std::size_t>(o) * in_features_;
            const double g = dyp[o];
            dbias_.data[static_cast<std::size_t>(o)] += g;
            for (int j = 0; j < in_features_; ++j) wr[j] += g * xp[j];
        }
    }
    return dx;
}

nlohmann::json Dense::spec() const {
    return {{"kind", kind()}, {"in", in_features_}, {"out", out_features_}};
}

// ------------------------------------------------------------ Activation

Activation::Activation(ActKind kind, double slope, double lo, double hi)
    : act_(kind), slope_(slope), lo_(lo), hi_(hi) {}

std::string Activation::kind() const {
    switch (act_) {
        case ActKind::ReLU: return "relu";
        case ActKind::LeakyReLU: return "leaky_relu";
        case ActKind::ClippedReLU: return "clipped_relu";
    }
    throw ConfigError("unknown activation");
}

Tensor Activation::forward(const Tensor& x, bool) {
    Tensor y = x;
    switch (act_) {
        case ActKind::ReLU:
            for (auto& v : y.data) v = v > 0.0 ? v : 0.0;
            break;
        case ActKind::LeakyReLU:
            for (auto& v : y.data) v = v >= 0.0 ? v : slope_ * v;
            break;
        case ActKind::ClippedReLU:
            for (auto& v : y.data) v = std::clamp(v, lo_, hi_);
            break;
    }
    cached_input_ = x;
    return y;
}

Tensor Activation::backward(const Tensor& dy) {
    if (cached_input_.shape.empty()) throw DataError("activation backward before forward");
    Tensor dx = dy;
    const auto& x = cached_input_.data;
    switch (act_) {
        case ActKind::ReLU:
            for (std::size_t i = 0; i < dx.size(); ++i)
                if (x[i] <= 0.0) dx.data[i] = 0.0;
            break;
        case ActKind::LeakyReLU:
            for (std::size_t i = 0; i < dx.size(); ++i)
                if (x[i] < 0.0) dx.data[i] *= slope_;
            break;
        case ActKind::ClippedReLU:
            for (std::size_t i = 0; i < dx.size(); ++i)
                if (x[i] <= lo_ || x[i] >= hi_) dx.data[i] = 0.0;
            break;
    }
    return dx;
}

nlohmann::json Activation::spec() const {
    nlohmann::json j = {{"kind", kind()}};
    if (act_ == ActKind::LeakyReLU) j["slope"] = slope_;
    if (act_ == ActKind::ClippedReLU) {
        j["lo"] = lo_;
        j["hi"] = hi_;
    }
    return j;
}

// ------------------------------------------------------------- BatchNorm

BatchNorm::BatchNorm(int channels, double eps, double momentum)
    : channels_(channels), eps_(eps), momentum_(momentum) {
    if (channels < 1) throw ConfigError("invalid batchnorm channel count");
    gamma_ = Tensor::zeros({channels});
    std::fill(gamma_.data.begin(), gamma_.data.end(), 1.0);
    beta_ = Tensor::zeros({channels});
    dgamma_ = Tensor::zeros({channels});
    dbeta_ = Tensor::zeros({channels});
    running_mean_ = Tensor::zeros({channels});
    running_var_ = Tensor::zeros({channels});
    std::fill(running_var_.data.begin(), running_var_.data.end(), 1.0);
}

std::vector<int> BatchNorm::output_shape(const std::vector<int>& in) const {
    require_shape(!in.empty() && in.back() == channels_, "batchnorm input",
                  {-1, channels_}, in);
    return in;
}

Tensor BatchNorm::forward(const Tensor& x, bool training) {
    output_shape(per_sample_of(x));
    const std::size_t c = static_cast<std::size_t>(channels_);
    const std::size_t rows = x.size() / c;
    if (training && x.shape[0] < 2)
        throw DataError("batchnorm needs batch >= 2 in training mode");

    batch_mean_.assign(c, 0.0);
    batch_var_.assign(c, 0.0);
    if (training) {
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t ch = 0; ch < c; ++ch) batch_mean_[ch] += x.data[r * c + ch];
        for (auto& m : batch_mean_) m /= static_cast<double>(rows);
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t ch = 0; ch < c; ++ch) {
                const double d = x.data[r * c + ch] - batch_mean_[ch];
                batch_var_[ch] += d * d;
            }
        for (auto& v : batch_var_) v /= static_cast<double>(rows);
        for (std::size_t ch = 0; ch < c; ++ch) {
            running_mean_.data[ch] =
                (1.0 - momentum_) * running_mean_.data[ch] + momentum_ * batch_mean_[ch];
            running_var_.data[ch] =
                (1.0 - momentum_) * running_var_.data[ch] + momentum_ * batch_var_[ch];
        }
        // Running stats are serialized in 32-bit; keep them on that grid.
        running_mean_.quantize_f32();
        running_var_.quantize_f32();
    } else {
        for (std::size_t ch = 0; ch < c; ++ch) {
            batch_mean_[ch] = running_mean_.data[ch];
            batch_var_[ch] = running_var_.data[ch];
        }
    }

    Tensor y = x;
    cached_norm_ = Tensor::zeros(x.shape);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t ch = 0; ch < c; ++ch) {
            const double norm =
                (x.data[r * c + ch] - batch_mean_[ch]) / std::sqrt(batch_var_[ch] + eps_);
            cached_norm_.data[r * c + ch] = norm;
            y.data[r * c + ch] = gamma_.data[ch] * norm + beta_.data[ch];
        }
    }
    cached_input_ = x;
    return y;
}

Tensor BatchNorm::backward(const Tensor& dy) {
    if (cached_input_.shape.empty()) throw DataError("batchnorm backward before forward");
    const std::size_t c = static_cast<std::size_t>(channels_);
    const std::size_t rows = dy.size() / c;

    std::vector<double> sum_dy(c, 0.0), sum_dy_norm(c, 0.0);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t ch = 0; ch < c; ++ch) {
            sum_dy[ch] += dy.data[r * c + ch];
            sum_dy_norm[ch] += dy.data[r * c + ch] * cached_norm_.data[r * c + ch];
        }
    for (std::size_t ch = 0; ch < c; ++ch) {
        dbeta_.data[ch] += sum_dy[ch];
        dgamma_.data[ch] += sum_dy_norm[ch];
    }

    Tensor dx = Tensor::zeros(dy.shape);
    const double n = static_cast<double>(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t ch = 0; ch < c; ++ch) {
            const double inv_std = 1.0 / std::sqrt(batch_var_[ch] + eps_);
            const double term = n * dy.data[r * c + ch] - sum_dy[ch] -
                                cached_norm_.data[r * c + ch] * sum_dy_norm[ch];
            dx.data[r * c + ch] = gamma_.data[ch] * inv_std * term / n;
        }
    }
    return dx;
}

nlohmann::json BatchNorm::spec() const {
    return {{"kind", kind()}, {"channels", channels_}, {"eps", eps_}, {"momentum", momentum_}};
}

// -------------------------------------------------------- Flatten/Reshape

std::vector<int> Flatten::output_shape(const std::vector<int>& in) const {
    int n = 1;
    for (int d : in) n *= d;
    return {n};
}

Tensor Flatten::forward(const Tensor& x, bool) {
    in_shape_ = x.shape;
    Tensor y = x;
    y.shape = {x.shape[0], static_cast<int>(x.per_sample())};
    return y;
}

Tensor Flatten::backward(const Tensor& dy) {
    if (in_shape_.empty()) throw DataError("flatten backward before forward");
    Tensor dx = dy;
    dx.shape = in_shape_;
    return dx;
}

nlohmann::json Flatten::spec() const { return {{"kind", kind()}}; }

Reshape::Reshape(std::vector<int> target) : target_(std::move(target)) {
    Tensor::count(target_);
}

std::vector<int> Reshape::output_shape(const std::vector<int>& in) const {
    if (Tensor::count(in) != Tensor::count(target_))
        throw DataError("reshape element count mismatch: " + shape_str(in) + " -> " +
                        shape_str(target_));
    return target_;
}

Tensor Reshape::forward(const Tensor& x, bool) {
    output_shape(per_sample_of(x));
    in_shape_ = x.shape;
    Tensor y = x;
    y.shape = batched(x.shape[0], target_);
    return y;
}

Tensor Reshape::backward(const Tensor& dy) {
    if (in_shape_.empty()) throw DataError("reshape backward before forward");
    Tensor dx = dy;
    dx.shape = in_shape_;
    return dx;
}

nlohmann::json Reshape::spec() const { return {{"kind", kind()}, {"target", target_}}; }

// --------------------------------------------------------------- Network

void Network::add(std::unique_ptr<Layer> layer) { layers_.push_back(std::move(layer)); }

void Network::init(std::uint64_t seed) {
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        Rng rng(seed, "init", i);
        layers_[i]->init(rng);
    }
}

Tensor Network::forward(const Tensor& x, bool training) {
    Tensor cur = x;
    for (auto& layer : layers_) cur = layer->forward(cur, training);
    forward_done_ = true;
    return cur;
}

Tensor Network::backward(const Tensor& dloss) {
    if (!forward_done_) throw DataError("backward called before forward");
    Tensor cur = dloss;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) cur = (*it)->backward(cur);
    return cur;
}

std::vector<Tensor*> Network::params() {
    std::vector<Tensor*> out;
    for (auto& layer : layers_)
        for (auto* p : layer->params()) out.push_back(p);
    return out;
}

std::vector<Tensor*> Network::grads() {
    std::vector<Tensor*> out;
    for (auto& layer : layers_)
        for (auto* g : layer->grads()) out.push_back(g);
    return out;
}

void Network::zero_grads() {
    for (auto* g : grads()) std::fill(g->data.begin(), g->data.end(), 0.0);
}

std::vector<std::vector<int>> Network::shape_walk(const std::vector<int>& input) const {
    std::vector<std::vector<int>> shapes = {input};
    for (const auto& layer : layers_) shapes.push_back(layer->output_shape(shapes.back()));
    return shapes;
}

nlohmann::json Network::spec() const {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& layer : layers_) layers.push_back(layer->spec());
    return {{"layers", layers}};
}

Network Network::from_spec(const nlohmann::json& spec) {
    Network net;
    for (const auto& j : spec.at("layers")) {
        const std::string kind = j.at("kind").get<std::string>();
        if (kind == "conv2d") {
            net.add(std::make_unique<Conv2D>(j.at("in_ch").get<int>(), j.at("out_ch").get<int>(),
                                             j.at("kernel").get<int>(), j.at("stride").get<int>(),
                                             j.at("pad").get<int>()));
        } else if (kind == "tconv2d") {
            net.add(std::make_unique<TConv2D>(j.at("in_ch").get<int>(), j.at("out_ch").get<int>(),
                                              j.at("kernel").get<int>(), j.at("stride").get<int>(),
                                              j.at("pad").get<int>(), j.at("out_pad").get<int>()));
        } else if (kind == "maxpool2d") {
            net.add(std::make_unique<MaxPool2D>(j.at("pool").get<int>(), j.at("stride").get<int>()));
        } else if (kind == "dense") {
            net.add(std::make_unique<Dense>(j.at("in").get<int>(), j.at("out").get<int>()));
        } else if (kind == "relu") {
            net.add(std::make_unique<Activation>(ActKind::ReLU));
        } else if (kind == "leaky_relu") {
            net.add(std::make_unique<Activation>(ActKind::LeakyReLU, j.at("slope").get<double>()));
        } else if (kind == "clipped_relu") {
            net.add(std::make_unique<Activation>(ActKind::ClippedReLU, 0.0,
                                                 j.at("lo").get<double>(), j.at("hi").get<double>()));
        } else if (kind == "batchnorm") {
            net.add(std::make_unique<BatchNorm>(j.at("channels").get<int>(),
                                                j.at("eps").get<double>(),
                                                j.at("momentum").get<double>()));
        } else if (kind == "flatten") {
            net.add(std::make_unique<Flatten>());
        } else if (kind == "reshape") {
            net.add(std::make_unique<Reshape>(j.at("target").get<std::vector<int>>()));
        } else {
            throw DataError("unknown layer kind in spec: " + kind);
        }
    }
    return net;
}

void Network::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for writing: " + path.string());
    const std::string json = spec().dump();
    out.write("STMW1", 5);
    const std::uint32_t len = static_cast<std::uint32_t>(json.size());
    out.write(reinterpret_cast<const char*>(&len), 4);
    out.write(json.data(), static_cast<std::streamsize>(json.size()));
    for (const auto& layer : layers_) {
        auto write_blobs = [&](const std::vector<Tensor*>& blobs) {
            for (const Tensor* t : blobs) {
                std::vector<float> blob(t->size());
                for (std::size_t i = 0; i < blob.size(); ++i)
                    blob[i] = static_cast<float>(t->data[i]);
                out.write(reinterpret_cast<const char*>(blob.data()),
                          static_cast<std::streamsize>(blob.size() * sizeof(float)));
            }
        };
        write_blobs(const_cast<Layer&>(*layer).params());
        write_blobs(const_cast<Layer&>(*layer).buffers());
    }
    if (!out) throw DataError("short write: " + path.string());
}

Network Network::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open for reading: " + path.string());
    char magic[5];
    in.read(magic, 5);
    if (!in || std::memcmp(magic, "STMW1", 5) != 0)
        throw DataError("not a checkpoint: " + path.string());
    std::uint32_t len = 0;
    in.read(reinterpret_cast<char*>(&len), 4);
    std::string json(len, '\0');
    in.read(json.data(), len);
    if (!in) throw DataError("truncated checkpoint header: " + path.string());
    Network net = from_spec(nlohmann::json::parse(json));
    for (auto& layer : net.layers_) {
        auto read_blobs = [&](const std::vector<Tensor*>& blobs) {
            for (Tensor* t : blobs) {
                std::vector<float> blob(t->size());
                in.read(reinterpret_cast<char*>(blob.data()),
                        static_cast<std::streamsize>(blob.size() * sizeof(float)));
                for (std::size_t i = 0; i < blob.size(); ++i)
                    t->data[i] = static_cast<double>(blob[i]);
            }
        };
        read_blobs(layer->params());
        read_blobs(layer->buffers());
    }
    if (!in) throw DataError("truncated checkpoint blobs: " + path.string());
    return net;
}

// -------------------------------------------------------------- MSE/Adam

std::pair<double, Tensor> mse_loss(const Tensor& pred, const Tensor& target) {
    if (!pred.same_shape(target))
        throw DataError("mse_loss shape mismatch: " + shape_str(pred.shape) + " vs " +
                        shape_str(target.shape));
    const double n = static_cast<double>(pred.size());
    double sum = 0.0;
    Tensor grad = Tensor::zeros(pred.shape);
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred.data[i] - target.data[i];
        sum += d * d;
        grad.data[i] = 2.0 * d / n;
    }
    return {sum / n, grad};
}

Adam::Adam(double beta1, double beta2, double eps) : beta1_(beta1), beta2_(beta2), eps_(eps) {}

void Adam::step(std::vector<Tensor*> params, std::vector<Tensor*> grads, double lr) {
    if (params.size() != grads.size()) throw DataError("adam: params/grads size mismatch");
    if (m_.empty()) {
        for (const Tensor* p : params) {
            m_.emplace_back(p->size(), 0.0);
            v_.emplace_back(p->size(), 0.0);
        }
    }
    ++step_;
    const double bc1 = 1.0 - std::pow(beta1_, step_);
    const double bc2 = 1.0 - std::pow(beta2_, step_);
    for (std::size_t k = 0; k < params.size(); ++k) {
        Tensor& p = *params[k];
        const Tensor& g = *grads[k];
        if (p.size() != g.size()) throw DataError("adam: parameter/gradient shape mismatch");
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double gi = g.data[i];
            if (!std::isfinite(gi)) throw NumericError("non-finite gradient in adam step");
            m_[k][i] = beta1_ * m_[k][i] + (1.0 - beta1_) * gi;
            v_[k][i] = beta2_ * v_[k][i] + (1.0 - beta2_) * gi * gi;
            const double mhat = m_[k][i] / bc1;
            const double vhat = v_[k][i] / bc2;
            p.data[i] -= lr * mhat / (std::sqrt(vhat) + eps_);
        }
        // Parameters live on the float32 grid the checkpoint stores.
        p.quantize_f32();
    }
}

} // namespace stmforge

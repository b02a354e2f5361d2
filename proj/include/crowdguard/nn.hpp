#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "crowdguard/errors.hpp"
#include "crowdguard/tensor.hpp"

namespace crowdguard {

enum class ArchKind { Mlp, SmallConv };

// 3x3 valid convolution, no padding.
struct ConvLayerSpec {
    int out_channels = 8;
    int stride = 1;
};

struct ClassifierArch {
    ArchKind kind = ArchKind::Mlp;
    int input_h = 0, input_w = 0, input_c = 1;
    std::vector<int> hidden_sizes;           // mlp
    std::vector<ConvLayerSpec> conv_layers;  // small-conv
    int num_classes = 2;

    void validate() const {
        if (num_classes < 2) throw ConfigError("arch: num_classes must be >= 2");
        if (input_h < 1 || input_w < 1 || input_c < 1) throw ConfigError("arch: bad input shape");
        if (kind == ArchKind::Mlp) {
            if (hidden_sizes.empty()) throw ConfigError("arch: mlp needs at least one hidden layer");
            for (int h : hidden_sizes)
                if (h < 1) throw ConfigError("arch: hidden size must be positive");
        } else {
            if (conv_layers.empty()) throw ConfigError("arch: small-conv needs at least one conv layer");
            int h = input_h, w = input_w;
            for (const auto& c : conv_layers) {
                if (c.out_channels < 1 || c.stride < 1) throw ConfigError("arch: bad conv layer spec");
                h = (h - 3) / c.stride + 1;
                w = (w - 3) / c.stride + 1;
                if (h < 1 || w < 1) throw ConfigError("arch: conv layers shrink input below 1x1");
            }
        }
    }
};

// Internal layer plan: the arch lowered to a flat op sequence.
namespace detail {

enum class OpKind { Dense, Conv, Relu, Flatten };

struct PlanOp {
    OpKind op;
    // dense
    int in_features = 0, out_features = 0;
    // conv
    int in_h = 0, in_w = 0, in_c = 0, out_c = 0, stride = 1, out_h = 0, out_w = 0;
};

inline std::vector<PlanOp> build_plan(const ClassifierArch& arch) {
    arch.validate();
    std::vector<PlanOp> plan;
    if (arch.kind == ArchKind::Mlp) {
        PlanOp fl{};
        fl.op = OpKind::Flatten;
        fl.in_features = arch.input_h * arch.input_w * arch.input_c;
        plan.push_back(fl);
        int in = fl.in_features;
        for (int h : arch.hidden_sizes) {
            PlanOp d{};
            d.op = OpKind::Dense;
            d.in_features = in;
            d.out_features = h;
            plan.push_back(d);
            PlanOp r{};
            r.op = OpKind::Relu;
            r.in_features = h;
            plan.push_back(r);
            in = h;
        }
        PlanOp out{};
        out.op = OpKind::Dense;
        out.in_features = in;
        out.out_features = arch.num_classes;
        plan.push_back(out);
    } else {
        int h = arch.input_h, w = arch.input_w, c = arch.input_c;
        for (const auto& cl : arch.conv_layers) {
            PlanOp cv{};
            cv.op = OpKind::Conv;
            cv.in_h = h;
            cv.in_w = w;
            cv.in_c = c;
            cv.out_c = cl.out_channels;
            cv.stride = cl.stride;
            cv.out_h = (h - 3) / cl.stride + 1;
            cv.out_w = (w - 3) / cl.stride + 1;
            plan.push_back(cv);
            PlanOp r{};
            r.op = OpKind::Relu;
            r.in_features = cv.out_h * cv.out_w * cv.out_c;
            plan.push_back(r);
            h = cv.out_h;
            w = cv.out_w;
            c = cv.out_c;
        }
        PlanOp fl{};
        fl.op = OpKind::Flatten;
        fl.in_features = h * w * c;
        plan.push_back(fl);
        PlanOp out{};
        out.op = OpKind::Dense;
        out.in_features = fl.in_features;
        out.out_features = arch.num_classes;
        plan.push_back(out);
    }
    return plan;
}

}  // namespace detail

// One parameterized layer: weights, bias, and their momentum buffers.
template <typename T>
struct BasicLayerParams {
    BasicTensor<T> w, b, vw, vb;
};

template <typename T>
struct BasicParams {
    std::vector<BasicLayerParams<T>> layers;

    long count() const {
        long n = 0;
        for (const auto& l : layers) n += l.w.numel() + l.b.numel();
        return n;
    }

    template <typename U>
    BasicParams<U> cast() const {
        BasicParams<U> out;
        out.layers.reserve(layers.size());
        for (const auto& l : layers)
            out.layers.push_back({l.w.template cast<U>(), l.b.template cast<U>(),
                                  l.vw.template cast<U>(), l.vb.template cast<U>()});
        return out;
    }
};

using ClassifierParams = BasicParams<float>;

struct SgdHyper {
    float learning_rate = 0.02f;
    float momentum = 0.9f;
    float weight_decay = 0.0f;
    int epochs = 10;
    int batch_size = 64;

    void validate() const {
        if (learning_rate <= 0) throw ConfigError("sgd: learning_rate must be positive");
        if (momentum < 0 || momentum >= 1) throw ConfigError("sgd: momentum must be in [0,1)");
        if (weight_decay < 0) throw ConfigError("sgd: weight_decay must be nonnegative");
        if (epochs < 1) throw ConfigError("sgd: epochs must be positive");
        if (batch_size < 1) throw ConfigError("sgd: batch_size must be positive");
    }
};

// Glorot-uniform init; consumes the caller's RNG so training code can keep a
// single deterministic stream per seed.
template <typename T>
BasicParams<T> init_params_t(const ClassifierArch& arch, std::mt19937& rng) {
    auto plan = detail::build_plan(arch);
    BasicParams<T> params;
    for (const auto& op : plan) {
        if (op.op == detail::OpKind::Dense) {
            BasicLayerParams<T> l;
            l.w = BasicTensor<T>({op.in_features, op.out_features});
            l.b = BasicTensor<T>({op.out_features});
            l.vw = BasicTensor<T>({op.in_features, op.out_features});
            l.vb = BasicTensor<T>({op.out_features});
            double bound = std::sqrt(6.0 / (op.in_features + op.out_features));
            std::uniform_real_distribution<double> u(-bound, bound);
            for (auto& v : l.w.data) v = static_cast<T>(u(rng));
            params.layers.push_back(std::move(l));
        } else if (op.op == detail::OpKind::Conv) {
            BasicLayerParams<T> l;
            l.w = BasicTensor<T>({3, 3, op.in_c, op.out_c});
            l.b = BasicTensor<T>({op.out_c});
            l.vw = BasicTensor<T>({3, 3, op.in_c, op.out_c});
            l.vb = BasicTensor<T>({op.out_c});
            int fan_in = 3 * 3 * op.in_c, fan_out = 3 * 3 * op.out_c;
            double bound = std::sqrt(6.0 / (fan_in + fan_out));
            std::uniform_real_distribution<double> u(-bound, bound);
            for (auto& v : l.w.data) v = static_cast<T>(u(rng));
            params.layers.push_back(std::move(l));
        }
    }
    return params;
}

inline ClassifierParams init_params(const ClassifierArch& arch, std::uint32_t seed) {
    std::mt19937 rng(seed);
    return init_params_t<float>(arch, rng);
}

namespace detail {

template <typename T>
void check_batch_shape(const ClassifierArch& arch, const BasicTensor<T>& batch) {
    if (batch.shape.size() != 4 || batch.dim(1) != arch.input_h || batch.dim(2) != arch.input_w ||
        batch.dim(3) != arch.input_c)
        throw ConfigError("forward: batch shape " + batch.shape_str() + " does not match arch input " +
                          std::to_string(arch.input_h) + "x" + std::to_string(arch.input_w) + "x" +
                          std::to_string(arch.input_c));
}

template <typename T>
void dense_forward(const PlanOp& op, const BasicTensor<T>& w, const BasicTensor<T>& b,
                   const BasicTensor<T>& in, BasicTensor<T>& out) {
    const int n = in.dim(0), fi = op.in_features, fo = op.out_features;
    out = BasicTensor<T>({n, fo});
    for (int i = 0; i < n; ++i) {
        const T* x = &in.data[static_cast<std::size_t>(i) * fi];
        T* y = &out.data[static_cast<std::size_t>(i) * fo];
        for (int o = 0; o < fo; ++o) y[o] = b[o];
        for (int k = 0; k < fi; ++k) {
            T xv = x[k];
            if (xv == T(0)) continue;
            const T* wr = &w.data[static_cast<std::size_t>(k) * fo];
            for (int o = 0; o < fo; ++o) y[o] += xv * wr[o];
        }
    }
}

// in: [N, in_h, in_w, in_c], w: [3,3,in_c,out_c], out: [N, out_h, out_w, out_c]
template <typename T>
void conv_forward(const PlanOp& op, const BasicTensor<T>& w, const BasicTensor<T>& b,
                  const BasicTensor<T>& in, BasicTensor<T>& out) {
    const int n = in.dim(0);
    out = BasicTensor<T>({n, op.out_h, op.out_w, op.out_c});
    const int ic = op.in_c, oc = op.out_c, iw = op.in_w;
    for (int i = 0; i < n; ++i) {
        const T* img = &in.data[static_cast<std::size_t>(i) * op.in_h * iw * ic];
        T* omap = &out.data[static_cast<std::size_t>(i) * op.out_h * op.out_w * oc];
        for (int oy = 0; oy < op.out_h; ++oy) {
            for (int ox = 0; ox < op.out_w; ++ox) {
                T* opix = &omap[(static_cast<std::size_t>(oy) * op.out_w + ox) * oc];
                for (int o = 0; o < oc; ++o) opix[o] = b[o];
                const int iy0 = oy * op.stride, ix0 = ox * op.stride;
                for (int ky = 0; ky < 3; ++ky) {
                    for (int kx = 0; kx < 3; ++kx) {
                        const T* ipix = &img[(static_cast<std::size_t>(iy0 + ky) * iw + (ix0 + kx)) * ic];
                        const T* wk = &w.data[((static_cast<std::size_t>(ky) * 3 + kx) * ic) * oc];
                        for (int c = 0; c < ic; ++c) {
                            T xv = ipix[c];
                            if (xv == T(0)) continue;
                            const T* wr = &wk[static_cast<std::size_t>(c) * oc];
                            for (int o = 0; o < oc; ++o) opix[o] += xv * wr[o];
                        }
                    }
                }
            }
        }
    }
}

// Forward pass keeping every pre-op activation for backprop.
template <typename T>
struct ForwardCache {
    std::vector<BasicTensor<T>> acts;  // acts[i] = input to plan op i; acts.back() = logits
};

template <typename T>
ForwardCache<T> forward_cached(const std::vector<PlanOp>& plan, const BasicParams<T>& params,
                               const BasicTensor<T>& batch) {
    ForwardCache<T> cache;
    cache.acts.reserve(plan.size() + 1);
    cache.acts.push_back(batch);
    std::size_t li = 0;
    for (const auto& op : plan) {
        const BasicTensor<T>& in = cache.acts.back();
        BasicTensor<T> out;
        switch (op.op) {
            case OpKind::Dense:
                dense_forward(op, params.layers[li].w, params.layers[li].b, in, out);
                ++li;
                break;
            case OpKind::Conv:
                conv_forward(op, params.layers[li].w, params.layers[li].b, in, out);
                ++li;
                break;
            case OpKind::Relu: {
                out = in;
                for (auto& v : out.data) v = std::max(v, T(0));
                break;
            }
            case OpKind::Flatten: {
                out = BasicTensor<T>({in.dim(0), op.in_features}, in.data);
                break;
            }
        }
        cache.acts.push_back(std::move(out));
    }
    return cache;
}

template <typename T>
void check_params_shape(const std::vector<PlanOp>& plan, const BasicParams<T>& params) {
    std::size_t need = 0;
    for (const auto& op : plan)
        if (op.op == OpKind::Dense || op.op == OpKind::Conv) ++need;
    if (params.layers.size() != need) throw ConfigError("params: layer count does not match arch");
}

}  // namespace detail

template <typename T>
BasicTensor<T> forward_t(const ClassifierArch& arch, const BasicParams<T>& params,
                         const BasicTensor<T>& batch) {
    auto plan = detail::build_plan(arch);
    detail::check_params_shape(plan, params);
    detail::check_batch_shape(arch, batch);
    auto cache = detail::forward_cached(plan, params, batch);
    return std::move(cache.acts.back());
}

// Logits, shape N x C.
inline Tensor forward(const ClassifierArch& arch, const ClassifierParams& params, const Tensor& batch) {
    return forward_t<float>(arch, params, batch);
}

namespace detail {

// Softmax with max-subtraction; rows of `probs` sum to 1.
template <typename T>
void softmax_rows(const BasicTensor<T>& logits, BasicTensor<T>& probs) {
    probs = BasicTensor<T>(logits.shape);
    const int n = logits.dim(0), c = logits.dim(1);
    for (int i = 0; i < n; ++i) {
        const T* z = &logits.data[static_cast<std::size_t>(i) * c];
        T* p = &probs.data[static_cast<std::size_t>(i) * c];
        T zmax = z[0];
        for (int j = 1; j < c; ++j) zmax = std::max(zmax, z[j]);
        T sum = T(0);
        for (int j = 0; j < c; ++j) {
            p[j] = std::exp(z[j] - zmax);
            sum += p[j];
        }
        for (int j = 0; j < c; ++j) p[j] /= sum;
    }
}

}  // namespace detail

// Mean softmax cross-entropy and analytic gradients. sample_weights, when
// nonempty, scales each sample's contribution (loss stays a 1/N mean so
// all-ones weights reduce to the unweighted case exactly).
template <typename T>
std::pair<T, BasicParams<T>> loss_and_grad_t(const ClassifierArch& arch, const BasicParams<T>& params,
                                             const BasicTensor<T>& batch, const std::vector<int>& labels,
                                             const std::vector<T>& sample_weights = {}) {
    auto plan = detail::build_plan(arch);
    detail::check_params_shape(plan, params);
    detail::check_batch_shape(arch, batch);
    const int n = batch.dim(0), c = arch.num_classes;
    if (static_cast<int>(labels.size()) != n) throw ConfigError("loss: labels/batch size mismatch");
    for (int y : labels)
        if (y < 0 || y >= c) throw DataError("loss: label " + std::to_string(y) + " out of range [0," +
                                             std::to_string(c) + ")");
    if (!sample_weights.empty() && static_cast<int>(sample_weights.size()) != n)
        throw ConfigError("loss: sample_weights/batch size mismatch");

    auto cache = detail::forward_cached(plan, params, batch);
    const BasicTensor<T>& logits = cache.acts.back();
    BasicTensor<T> probs;
    detail::softmax_rows(logits, probs);

    T loss = T(0);
    BasicTensor<T> dlogits(logits.shape);
    for (int i = 0; i < n; ++i) {
        T wgt = sample_weights.empty() ? T(1) : sample_weights[static_cast<std::size_t>(i)];
        const T* p = &probs.data[static_cast<std::size_t>(i) * c];
        T* d = &dlogits.data[static_cast<std::size_t>(i) * c];
        T py = std::max(p[labels[static_cast<std::size_t>(i)]], T(1e-12));
        loss -= wgt * std::log(py);
        for (int j = 0; j < c; ++j) d[j] = wgt * p[j] / T(n);
        d[labels[static_cast<std::size_t>(i)]] -= wgt / T(n);
    }
    loss /= T(n);

    // Zero-shaped gradient accumulators.
    BasicParams<T> grads;
    grads.layers.reserve(params.layers.size());
    for (const auto& l : params.layers)
        grads.layers.push_back({BasicTensor<T>(l.w.shape), BasicTensor<T>(l.b.shape),
                                BasicTensor<T>(l.w.shape), BasicTensor<T>(l.b.shape)});

    // Backward through the plan.
    BasicTensor<T> delta = std::move(dlogits);
    int li = static_cast<int>(params.layers.size());
    for (int pi = static_cast<int>(plan.size()) - 1; pi >= 0; --pi) {
        const auto& op = plan[static_cast<std::size_t>(pi)];
        const BasicTensor<T>& in = cache.acts[static_cast<std::size_t>(pi)];
        switch (op.op) {
            case detail::OpKind::Dense: {
                --li;
                auto& g = grads.layers[static_cast<std::size_t>(li)];
                const auto& w = params.layers[static_cast<std::size_t>(li)].w;
                const int fi = op.in_features, fo = op.out_features;
                BasicTensor<T> din({n, fi});
                for (int i = 0; i < n; ++i) {
                    const T* x = &in.data[static_cast<std::size_t>(i) * fi];
                    const T* d = &delta.data[static_cast<std::size_t>(i) * fo];
                    T* dx = &din.data[static_cast<std::size_t>(i) * fi];
                    for (int o = 0; o < fo; ++o) g.b[o] += d[o];
                    for (int k = 0; k < fi; ++k) {
                        const T* wr = &w.data[static_cast<std::size_t>(k) * fo];
                        T* gw = &g.w.data[static_cast<std::size_t>(k) * fo];
                        T acc = T(0);
                        T xv = x[k];
                        for (int o = 0; o < fo; ++o) {
                            gw[o] += xv * d[o];
                            acc += wr[o] * d[o];
                        }
                        dx[k] = acc;
                    }
                }
                delta = std::move(din);
                break;
            }
            case detail::OpKind::Conv: {
                --li;
                auto& g = grads.layers[static_cast<std::size_t>(li)];
                const auto& w = params.layers[static_cast<std::size_t>(li)].w;
                const int ic = op.in_c, oc = op.out_c, iw = op.in_w;
                BasicTensor<T> din(in.shape);
                for (int i = 0; i < n; ++i) {
                    const T* img = &in.data[static_cast<std::size_t>(i) * op.in_h * iw * ic];
                    T* dimg = &din.data[static_cast<std::size_t>(i) * op.in_h * iw * ic];
                    const T* dmap = &delta.data[static_cast<std::size_t>(i) * op.out_h * op.out_w * oc];
                    for (int oy = 0; oy < op.out_h; ++oy) {
                        for (int ox = 0; ox < op.out_w; ++ox) {
                            const T* dpix = &dmap[(static_cast<std::size_t>(oy) * op.out_w + ox) * oc];
                            for (int o = 0; o < oc; ++o) g.b[o] += dpix[o];
                            const int iy0 = oy * op.stride, ix0 = ox * op.stride;
                            for (int ky = 0; ky < 3; ++ky) {
                                for (int kx = 0; kx < 3; ++kx) {
                                    const std::size_t ipos =
                                        (static_cast<std::size_t>(iy0 + ky) * iw + (ix0 + kx)) * ic;
                                    const std::size_t wpos = (static_cast<std::size_t>(ky) * 3 + kx) * ic * oc;
                                    for (int cch = 0; cch < ic; ++cch) {
                                        const T xv = img[ipos + cch];
                                        T* gw = &g.w.data[wpos + static_cast<std::size_t>(cch) * oc];
                                        const T* wr = &w.data[wpos + static_cast<std::size_t>(cch) * oc];
                                        T acc = T(0);
                                        for (int o = 0; o < oc; ++o) {
                                            gw[o] += xv * dpix[o];
                                            acc += wr[o] * dpix[o];
                                        }
                                        dimg[ipos + cch] += acc;
                                    }
                                }
                            }
                        }
                    }
                }
                delta = std::move(din);
                break;
            }
            case detail::OpKind::Relu: {
                for (long k = 0; k < delta.numel(); ++k)
                    if (in.data[static_cast<std::size_t>(k)] <= T(0)) delta.data[static_cast<std::size_t>(k)] = T(0);
                break;
            }
            case detail::OpKind::Flatten: {
                delta.shape = in.shape;
                break;
            }
        }
    }
    return {loss, std::move(grads)};
}

inline std::pair<float, ClassifierParams> loss_and_grad(const ClassifierArch& arch,
                                                        const ClassifierParams& params, const Tensor& batch,
                                                        const std::vector<int>& labels,
                                                        const std::vector<float>& sample_weights = {}) {
    return loss_and_grad_t<float>(arch, params, batch, labels, sample_weights);
}

// Heavy-ball SGD: v <- m*v + g + wd*w; w <- w - lr*v. Momentum buffers live
// in params and are updated in place.
template <typename T>
void sgd_step_t(BasicParams<T>& params, const BasicParams<T>& grads, const SgdHyper& hyper) {
    hyper.validate();
    if (params.layers.size() != grads.layers.size()) throw ConfigError("sgd_step: params/grads layer mismatch");
    const T lr = static_cast<T>(hyper.learning_rate);
    const T mom = static_cast<T>(hyper.momentum);
    const T wd = static_cast<T>(hyper.weight_decay);
    for (std::size_t i = 0; i < params.layers.size(); ++i) {
        auto& p = params.layers[i];
        const auto& g = grads.layers[i];
        if (!same_shape(p.w.shape, g.w.shape) || !same_shape(p.b.shape, g.b.shape))
            throw ConfigError("sgd_step: shape mismatch in layer " + std::to_string(i));
        for (long k = 0; k < p.w.numel(); ++k) {
            auto idx = static_cast<std::size_t>(k);
            p.vw.data[idx] = mom * p.vw.data[idx] + g.w.data[idx] + wd * p.w.data[idx];
            p.w.data[idx] -= lr * p.vw.data[idx];
        }
        for (long k = 0; k < p.b.numel(); ++k) {
            auto idx = static_cast<std::size_t>(k);
            p.vb.data[idx] = mom * p.vb.data[idx] + g.b.data[idx];
            p.b.data[idx] -= lr * p.vb.data[idx];
        }
    }
}

inline void sgd_step(ClassifierParams& params, const ClassifierParams& grads, const SgdHyper& hyper) {
    sgd_step_t<float>(params, grads, hyper);
}

struct Prediction {
    std::vector<int> labels;
    std::vector<float> confidences;
};

// Argmax of softmax per row; ties go to the lowest class index.
inline Prediction predict(const ClassifierArch& arch, const ClassifierParams& params, const Tensor& batch) {
    Tensor logits = forward(arch, params, batch);
    Tensor probs;
    detail::softmax_rows(logits, probs);
    const int n = logits.dim(0), c = logits.dim(1);
    Prediction out;
    out.labels.resize(static_cast<std::size_t>(n));
    out.confidences.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const float* p = &probs.data[static_cast<std::size_t>(i) * c];
        int best = 0;
        for (int j = 1; j < c; ++j)
            if (p[j] > p[best]) best = j;
        out.labels[static_cast<std::size_t>(i)] = best;
        out.confidences[static_cast<std::size_t>(i)] = p[best];
    }
    return out;
}

}  // namespace crowdguard

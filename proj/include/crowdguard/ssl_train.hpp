#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "crowdguard/data.hpp"
#include "crowdguard/errors.hpp"
#include "crowdguard/nn.hpp"

namespace crowdguard {

struct SslHyper {
    SgdHyper base;
    int warmup_epochs = 10;
    float confidence_threshold = 0.95f;  // tau
    float unlabeled_weight = 1.0f;       // lambda_u
    int rounds = 3;
    int augment_shift = 0;  // random +-shift in pixels; 0 disables

    void validate() const {
        base.validate();
        if (warmup_epochs < 1) throw ConfigError("ssl: warmup_epochs must be positive");
        if (!(confidence_threshold > 0.5f && confidence_threshold <= 1.0f))
            throw ConfigError("ssl: confidence threshold must be in (0.5, 1]");
        if (unlabeled_weight < 0) throw ConfigError("ssl: unlabeled weight must be nonnegative");
        if (rounds < 1) throw ConfigError("ssl: rounds must be positive");
        if (augment_shift < 0) throw ConfigError("ssl: augment shift must be nonnegative");
    }
};

// Memory-bounded prediction over a large image tensor.
inline Prediction predict_batched(const ClassifierArch& arch, const ClassifierParams& params,
                                  const Tensor& images, int chunk = 512) {
    const int n = images.dim(0);
    const long m = static_cast<long>(images.dim(1)) * images.dim(2) * images.dim(3);
    Prediction out;
    out.labels.reserve(static_cast<std::size_t>(n));
    out.confidences.reserve(static_cast<std::size_t>(n));
    for (int start = 0; start < n; start += chunk) {
        const int take = std::min(chunk, n - start);
        Tensor batch({take, images.dim(1), images.dim(2), images.dim(3)});
        std::copy_n(&images.data[static_cast<std::size_t>(start) * m], static_cast<std::size_t>(take) * m,
                    batch.data.begin());
        Prediction p = predict(arch, params, batch);
        out.labels.insert(out.labels.end(), p.labels.begin(), p.labels.end());
        out.confidences.insert(out.confidences.end(), p.confidences.begin(), p.confidences.end());
    }
    return out;
}

namespace detail {

// Copy image `src` into `dst`, shifted by (dr, dc) with zero fill.
inline void copy_shifted(const float* src, float* dst, int h, int w, int c, int dr, int dc) {
    std::fill_n(dst, static_cast<std::size_t>(h) * w * c, 0.0f);
    for (int y = 0; y < h; ++y) {
        const int sy = y - dr;
        if (sy < 0 || sy >= h) continue;
        for (int x = 0; x < w; ++x) {
            const int sx = x - dc;
            if (sx < 0 || sx >= w) continue;
            std::copy_n(&src[(static_cast<std::size_t>(sy) * w + sx) * c], c,
                        &dst[(static_cast<std::size_t>(y) * w + x) * c]);
        }
    }
}

// Shared mini-batch SGD loop. `weights` holds one loss weight per sample.
inline void train_epochs(const ClassifierArch& arch, ClassifierParams& params, const Tensor& images,
                         const std::vector<int>& labels, const std::vector<float>& weights,
                         const SgdHyper& hyper, int epochs, std::mt19937& rng, int augment_shift) {
    const int n = images.dim(0);
    const int h = images.dim(1), w = images.dim(2), c = images.dim(3);
    const long m = static_cast<long>(h) * w * c;
    std::vector<int> order(static_cast<std::size_t>(n));
    std::uniform_int_distribution<int> shift(-augment_shift, augment_shift);
    for (int e = 0; e < epochs; ++e) {
        // Re-derive the epoch order from the identity so a training schedule
        // split across multiple calls replays the same batch sequence.
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);
        for (int start = 0; start < n; start += hyper.batch_size) {
            const int take = std::min(hyper.batch_size, n - start);
            Tensor batch({take, h, w, c});
            std::vector<int> batch_labels(static_cast<std::size_t>(take));
            std::vector<float> batch_weights(static_cast<std::size_t>(take));
            for (int i = 0; i < take; ++i) {
                const int src = order[static_cast<std::size_t>(start + i)];
                const float* sp = &images.data[static_cast<std::size_t>(src) * m];
                float* dp = &batch.data[static_cast<std::size_t>(i) * m];
                if (augment_shift > 0) {
                    const int dr = shift(rng), dc = shift(rng);
                    copy_shifted(sp, dp, h, w, c, dr, dc);
                } else {
                    std::copy_n(sp, m, dp);
                }
                batch_labels[static_cast<std::size_t>(i)] = labels[static_cast<std::size_t>(src)];
                batch_weights[static_cast<std::size_t>(i)] = weights[static_cast<std::size_t>(src)];
            }
            auto [loss, grads] = loss_and_grad(arch, params, batch, batch_labels, batch_weights);
            (void)loss;
            sgd_step(params, grads, hyper);
        }
    }
}

}  // namespace detail

// Contributor-agnostic baseline: plain supervised mini-batch SGD.
inline ClassifierParams train_supervised(const ClassifierArch& arch, const LabeledDataset& train,
                                         const SgdHyper& hyper, std::uint32_t seed, int augment_shift = 0) {
    hyper.validate();
    if (train.size() < 1) throw ConfigError("train_supervised: empty dataset");
    std::mt19937 rng(seed);
    ClassifierParams params = init_params_t<float>(arch, rng);
    std::vector<float> weights(static_cast<std::size_t>(train.size()), 1.0f);
    detail::train_epochs(arch, params, train.images, train.labels, weights, hyper, hyper.epochs, rng,
                         augment_shift);
    return params;
}

// Confidence-threshold pseudo-labeling: warmup on labeled data, then per
// round accept unlabeled samples the model is confident about and retrain on
// labeled + pseudo-labeled with the pseudo loss scaled by unlabeled_weight.
// The unlabeled pool is images only; no label from it is ever visible here.
inline ClassifierParams train_ssl(const ClassifierArch& arch, const LabeledDataset& labeled,
                                  const Tensor& unlabeled, const SslHyper& hyper, std::uint32_t seed) {
    hyper.validate();
    if (labeled.size() < 1) throw ConfigError("train_ssl: labeled set is empty");
    const int pool = unlabeled.shape.empty() ? 0 : unlabeled.dim(0);
    if (pool > 0 && (unlabeled.shape.size() != 4 || unlabeled.dim(1) != labeled.height() ||
                     unlabeled.dim(2) != labeled.width() || unlabeled.dim(3) != labeled.channels()))
        throw ConfigError("train_ssl: unlabeled pool shape does not match labeled data");

    std::mt19937 rng(seed);
    ClassifierParams params = init_params_t<float>(arch, rng);

    const int nl = labeled.size();
    std::vector<float> labeled_weights(static_cast<std::size_t>(nl), 1.0f);
    detail::train_epochs(arch, params, labeled.images, labeled.labels, labeled_weights, hyper.base,
                         hyper.warmup_epochs, rng, hyper.augment_shift);

    const long m = labeled.image_numel();
    for (int round = 0; round < hyper.rounds; ++round) {
        std::vector<int> accepted;
        Prediction pseudo;
        if (pool > 0 && hyper.unlabeled_weight > 0) {
            pseudo = predict_batched(arch, params, unlabeled);
            for (int i = 0; i < pool; ++i)
                if (pseudo.confidences[static_cast<std::size_t>(i)] >= hyper.confidence_threshold)
                    accepted.push_back(i);
        }
        const int total = nl + static_cast<int>(accepted.size());
        Tensor images({total, labeled.height(), labeled.width(), labeled.channels()});
        std::copy(labeled.images.data.begin(), labeled.images.data.end(), images.data.begin());
        std::vector<int> labels = labeled.labels;
        std::vector<float> weights = labeled_weights;
        labels.resize(static_cast<std::size_t>(total));
        weights.resize(static_cast<std::size_t>(total), hyper.unlabeled_weight);
        for (std::size_t j = 0; j < accepted.size(); ++j) {
            const int src = accepted[j];
            std::copy_n(&unlabeled.data[static_cast<std::size_t>(src) * m], m,
                        &images.data[(static_cast<std::size_t>(nl) + j) * static_cast<std::size_t>(m)]);
            labels[static_cast<std::size_t>(nl) + j] = pseudo.labels[static_cast<std::size_t>(src)];
        }
        detail::train_epochs(arch, params, images, labels, weights, hyper.base, hyper.base.epochs, rng,
                             hyper.augment_shift);
    }
    return params;
}

}  // namespace crowdguard

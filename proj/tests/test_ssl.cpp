#include <doctest.h>

#include "crowdguard/attack.hpp"
#include "crowdguard/data.hpp"
#include "crowdguard/ssl_train.hpp"

using namespace crowdguard;

namespace {

ClassifierArch small_mlp() {
    ClassifierArch a;
    a.kind = ArchKind::Mlp;
    a.input_h = 10;
    a.input_w = 10;
    a.input_c = 1;
    a.hidden_sizes = {12};
    a.num_classes = 4;
    return a;
}

LabeledDataset blobs(int per_class, std::uint32_t seed, float sigma = 0.08f) {
    SyntheticSpec spec;
    spec.num_classes = 4;
    spec.samples_per_class = per_class;
    spec.image_side = 10;
    spec.noise_sigma = sigma;
    return gen_synthetic(spec, seed);
}

bool params_equal(const ClassifierParams& a, const ClassifierParams& b) {
    if (a.layers.size() != b.layers.size()) return false;
    for (std::size_t i = 0; i < a.layers.size(); ++i)
        if (a.layers[i].w.data != b.layers[i].w.data || a.layers[i].b.data != b.layers[i].b.data)
            return false;
    return true;
}

SslHyper quick_ssl() {
    SslHyper h;
    h.base.learning_rate = 0.05f;
    h.base.epochs = 2;
    h.base.batch_size = 16;
    h.warmup_epochs = 4;
    h.confidence_threshold = 0.8f;
    h.unlabeled_weight = 1.0f;
    h.rounds = 2;
    return h;
}

}  // namespace

TEST_CASE("train_ssl: empty pool equals supervised training with the same total epochs") {
    auto data = blobs(20, 42);
    auto arch = small_mlp();
    auto hyper = quick_ssl();

    auto ssl_params = train_ssl(arch, data, Tensor{}, hyper, 7);

    SgdHyper sup = hyper.base;
    sup.epochs = hyper.warmup_epochs + hyper.rounds * hyper.base.epochs;
    auto sup_params = train_supervised(arch, data, sup, 7);
    CHECK(params_equal(ssl_params, sup_params));
}

TEST_CASE("train_ssl: tau = 1.0 with sub-maximal confidences accepts nothing") {
    auto data = blobs(20, 43);
    auto pool = blobs(15, 44).images;
    auto arch = small_mlp();
    auto hyper = quick_ssl();
    hyper.confidence_threshold = 1.0f;

    auto with_pool = train_ssl(arch, data, pool, hyper, 7);
    auto without = train_ssl(arch, data, Tensor{}, hyper, 7);
    CHECK(params_equal(with_pool, without));
}

TEST_CASE("train_ssl: lambda_u = 0 makes the pool inert (bitwise)") {
    auto data = blobs(20, 45);
    auto pool = blobs(15, 46).images;
    auto arch = small_mlp();
    auto hyper = quick_ssl();
    hyper.unlabeled_weight = 0.0f;

    auto with_pool = train_ssl(arch, data, pool, hyper, 9);
    auto without = train_ssl(arch, data, Tensor{}, hyper, 9);
    CHECK(params_equal(with_pool, without));
}

TEST_CASE("train_ssl: empty labeled set is a configuration error") {
    auto arch = small_mlp();
    LabeledDataset empty;
    empty.images = Tensor({0, 10, 10, 1});
    empty.num_classes = 4;
    CHECK_THROWS_AS(train_ssl(arch, empty, Tensor{}, quick_ssl(), 1), ConfigError);
}

TEST_CASE("train_ssl: pseudo-labeling improves over the labeled-only baseline") {
    // tiny labeled set + large unlabeled pool from the same distribution
    auto labeled = blobs(6, 50, 0.15f);
    auto pool_ds = blobs(80, 51, 0.15f);
    auto test = blobs(40, 52, 0.15f);
    auto arch = small_mlp();
    auto hyper = quick_ssl();
    hyper.rounds = 3;

    auto ssl_params = train_ssl(arch, labeled, pool_ds.images, hyper, 3);
    auto p = predict_batched(arch, ssl_params, test.images);
    int hits = 0;
    for (int i = 0; i < test.size(); ++i)
        if (p.labels[static_cast<std::size_t>(i)] == test.labels[static_cast<std::size_t>(i)]) ++hits;
    CHECK(static_cast<double>(hits) / test.size() > 0.75);
}

TEST_CASE("pseudo-label acceptance is monotone in tau") {
    auto data = blobs(30, 60, 0.15f);
    auto arch = small_mlp();
    SgdHyper sup;
    sup.learning_rate = 0.05f;
    sup.epochs = 6;
    sup.batch_size = 16;
    auto params = train_supervised(arch, data, sup, 2);
    auto pool = blobs(50, 61, 0.15f).images;
    auto pred = predict_batched(arch, params, pool);

    double prev_tau = 0.51;
    std::vector<int> prev;
    for (int i = 0; i < pool.dim(0); ++i)
        if (pred.confidences[static_cast<std::size_t>(i)] >= prev_tau) prev.push_back(i);
    for (double tau : {0.7, 0.9, 0.99, 1.0}) {
        std::vector<int> accepted;
        for (int i = 0; i < pool.dim(0); ++i)
            if (pred.confidences[static_cast<std::size_t>(i)] >= tau) accepted.push_back(i);
        // higher tau never accepts a sample the lower tau rejected
        CHECK(std::includes(prev.begin(), prev.end(), accepted.begin(), accepted.end()));
        prev = accepted;
    }
}

TEST_CASE("ssl hyper validation") {
    auto h = quick_ssl();
    h.confidence_threshold = 0.4f;
    CHECK_THROWS_AS(h.validate(), ConfigError);
    h = quick_ssl();
    h.confidence_threshold = 1.0f;
    CHECK_NOTHROW(h.validate());
    h.unlabeled_weight = -1.0f;
    CHECK_THROWS_AS(h.validate(), ConfigError);
}

TEST_CASE("augmentation: shifted training still learns and stays deterministic") {
    auto data = blobs(25, 70, 0.05f);
    auto arch = small_mlp();
    auto hyper = quick_ssl();
    hyper.augment_shift = 2;
    hyper.warmup_epochs = 6;
    auto a = train_ssl(arch, data, Tensor{}, hyper, 4);
    auto b = train_ssl(arch, data, Tensor{}, hyper, 4);
    CHECK(params_equal(a, b));
    auto p = predict_batched(arch, a, data.images);
    int hits = 0;
    for (int i = 0; i < data.size(); ++i)
        if (p.labels[static_cast<std::size_t>(i)] == data.labels[static_cast<std::size_t>(i)]) ++hits;
    CHECK(static_cast<double>(hits) / data.size() > 0.8);
}

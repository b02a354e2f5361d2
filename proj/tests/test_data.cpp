#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "crowdguard/data.hpp"

using namespace crowdguard;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("cg_test_" + std::to_string(std::random_device{}()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

void write_bytes(const std::string& path, const std::vector<unsigned char>& bytes) {
    std::ofstream out(path, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::vector<unsigned char> be32(std::uint32_t v) {
    return {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
            static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
}

void append(std::vector<unsigned char>& v, const std::vector<unsigned char>& w) {
    v.insert(v.end(), w.begin(), w.end());
}

}  // namespace

TEST_CASE("load_idx: hand-encoded 2-image fixture parses exactly") {
    TempDir tmp;
    // two 2x2 images: [0,255,128,64] and [1,2,3,4]
    std::vector<unsigned char> img = be32(kIdxImagesMagic);
    append(img, be32(2));
    append(img, be32(2));
    append(img, be32(2));
    for (unsigned char b : {0, 255, 128, 64, 1, 2, 3, 4}) img.push_back(b);
    std::vector<unsigned char> lab = be32(kIdxLabelsMagic);
    append(lab, be32(2));
    lab.push_back(3);
    lab.push_back(0);
    write_bytes(tmp.file("img"), img);
    write_bytes(tmp.file("lab"), lab);

    auto ds = load_idx(tmp.file("img"), tmp.file("lab"));
    CHECK(ds.size() == 2);
    CHECK(ds.height() == 2);
    CHECK(ds.width() == 2);
    CHECK(ds.channels() == 1);
    CHECK(ds.images[0] == doctest::Approx(0.0f));       // byte 0 -> 0.0
    CHECK(ds.images[1] == doctest::Approx(1.0f));       // byte 255 -> 1.0
    CHECK(ds.images[2] == doctest::Approx(128.0f / 255.0f));
    CHECK(ds.images[4] == doctest::Approx(1.0f / 255.0f));
    CHECK(ds.labels == std::vector<int>{3, 0});
}

TEST_CASE("load_idx: errors name the offending file") {
    TempDir tmp;
    std::vector<unsigned char> img = be32(0xdeadbeef);
    write_bytes(tmp.file("bad_img"), img);
    std::vector<unsigned char> lab = be32(kIdxLabelsMagic);
    append(lab, be32(1));
    lab.push_back(0);
    write_bytes(tmp.file("lab"), lab);

    CHECK_THROWS_WITH_AS(load_idx(tmp.file("bad_img"), tmp.file("lab")), doctest::Contains("bad_img"),
                         DataError);

    // count mismatch
    std::vector<unsigned char> img2 = be32(kIdxImagesMagic);
    append(img2, be32(2));
    append(img2, be32(1));
    append(img2, be32(1));
    img2.push_back(7);
    img2.push_back(8);
    write_bytes(tmp.file("img2"), img2);
    CHECK_THROWS_AS(load_idx(tmp.file("img2"), tmp.file("lab")), DataError);

    // truncated pixel payload
    std::vector<unsigned char> img3 = be32(kIdxImagesMagic);
    append(img3, be32(1));
    append(img3, be32(2));
    append(img3, be32(2));
    img3.push_back(9);
    write_bytes(tmp.file("img3"), img3);
    std::vector<unsigned char> lab3 = be32(kIdxLabelsMagic);
    append(lab3, be32(1));
    lab3.push_back(0);
    write_bytes(tmp.file("lab3"), lab3);
    CHECK_THROWS_WITH_AS(load_idx(tmp.file("img3"), tmp.file("lab3")), doctest::Contains("img3"), DataError);
}

TEST_CASE("idx round-trip reproduces byte-quantized datasets exactly") {
    TempDir tmp;
    std::mt19937 rng(17);
    std::uniform_int_distribution<int> byte(0, 255);
    LabeledDataset ds;
    ds.num_classes = 4;
    ds.images = Tensor({5, 6, 7, 1});
    for (auto& v : ds.images.data) v = static_cast<float>(byte(rng)) / 255.0f;
    std::uniform_int_distribution<int> lab(0, 3);
    ds.labels.resize(5);
    for (auto& y : ds.labels) y = lab(rng);

    save_idx(ds, tmp.file("img"), tmp.file("lab"));
    auto back = load_idx(tmp.file("img"), tmp.file("lab"));
    CHECK(back.images.shape == ds.images.shape);
    for (std::size_t i = 0; i < ds.images.data.size(); ++i)
        CHECK(back.images.data[i] == doctest::Approx(ds.images.data[i]).epsilon(1e-6));
    CHECK(back.labels == ds.labels);
}

TEST_CASE("gen_synthetic: deterministic, balanced, pixel range preserved") {
    SyntheticSpec spec;
    spec.num_classes = 4;
    spec.samples_per_class = 25;
    spec.image_side = 10;
    spec.noise_sigma = 0.1f;
    auto a = gen_synthetic(spec, 3);
    auto b = gen_synthetic(spec, 3);
    CHECK(a.images.data == b.images.data);
    CHECK(a.labels == b.labels);
    a.validate();

    std::vector<int> counts(4, 0);
    for (int y : a.labels) ++counts[static_cast<std::size_t>(y)];
    for (int c : counts) CHECK(c == 25);
}

TEST_CASE("gen_synthetic: 1-nearest-neighbor oracle gets >= 95% held-out accuracy") {
    SyntheticSpec spec;
    spec.num_classes = 4;
    spec.samples_per_class = 200;
    spec.image_side = 10;
    spec.noise_sigma = 0.1f;
    auto train = gen_synthetic(spec, 21);
    spec.samples_per_class = 50;
    auto test = gen_synthetic(spec, 22);

    const long m = train.image_numel();
    int hits = 0;
    for (int i = 0; i < test.size(); ++i) {
        const float* q = &test.images.data[static_cast<std::size_t>(i) * m];
        double best = 1e30;
        int best_label = -1;
        for (int j = 0; j < train.size(); ++j) {
            const float* p = &train.images.data[static_cast<std::size_t>(j) * m];
            double d = 0;
            for (long k = 0; k < m; ++k) d += (q[k] - p[k]) * (q[k] - p[k]);
            if (d < best) {
                best = d;
                best_label = train.labels[static_cast<std::size_t>(j)];
            }
        }
        if (best_label == test.labels[static_cast<std::size_t>(i)]) ++hits;
    }
    CHECK(static_cast<double>(hits) / test.size() >= 0.95);
}

TEST_CASE("partition: protocol arithmetic") {
    SUBCASE("N=100 J=5 one adversary at 10%") {
        auto part = partition_contributors(100, 5, {1}, 0.10, 42);
        CHECK(part.assignments.at(1).size() == 10);
        for (int id = 2; id <= 5; ++id) {
            auto sz = part.assignments.at(id).size();
            CHECK((sz == 22 || sz == 23));
        }
    }
    SUBCASE("N=50 J=2 no adversaries -> 25/25") {
        auto part = partition_contributors(50, 2, {}, 0.10, 1);
        CHECK(part.assignments.at(1).size() == 25);
        CHECK(part.assignments.at(2).size() == 25);
    }
    SUBCASE("N=1000 J=5 three adversaries at 10% -> {100,100,100,350,350}") {
        auto part = partition_contributors(1000, 5, {1, 2, 3}, 0.10, 7);
        CHECK(part.assignments.at(1).size() == 100);
        CHECK(part.assignments.at(2).size() == 100);
        CHECK(part.assignments.at(3).size() == 100);
        CHECK(part.assignments.at(4).size() == 350);
        CHECK(part.assignments.at(5).size() == 350);
    }
}

TEST_CASE("partition: infeasible configurations are rejected") {
    CHECK_THROWS_AS(partition_contributors(100, 1, {}, 0.1, 1), ConfigError);
    CHECK_THROWS_AS(partition_contributors(100, 3, {1, 2, 3}, 0.1, 1), ConfigError);
    CHECK_THROWS_AS(partition_contributors(100, 5, {1, 2}, 0.5, 1), ConfigError);
    CHECK_THROWS_AS(partition_contributors(100, 5, {7}, 0.1, 1), ConfigError);
}

TEST_CASE("partition: disjointness and coverage hold over random configurations") {
    std::mt19937 rng(99);
    for (int trial = 0; trial < 1000; ++trial) {
        const int j = 2 + static_cast<int>(rng() % 6);
        const int n = j * 10 + static_cast<int>(rng() % 500);
        const int max_adv = std::min(j - 1, 3);
        const int num_adv = static_cast<int>(rng() % static_cast<unsigned>(max_adv + 1));
        std::vector<int> ids(static_cast<std::size_t>(j));
        std::iota(ids.begin(), ids.end(), 1);
        std::shuffle(ids.begin(), ids.end(), rng);
        ids.resize(static_cast<std::size_t>(num_adv));
        double frac = 0.05 + (rng() % 10) * 0.01;
        if (num_adv > 0 && num_adv * frac >= 0.9) frac = 0.8 / num_adv;

        auto part = partition_contributors(n, j, ids, frac, rng());
        part.validate(n);  // throws on any disjointness/coverage violation

        const int adv_size = static_cast<int>(std::floor(frac * n + 0.5));
        for (int id : ids) CHECK(static_cast<int>(part.assignments.at(id).size()) == adv_size);
    }
}

TEST_CASE("subset extraction keeps images and labels aligned") {
    SyntheticSpec spec;
    spec.num_classes = 3;
    spec.samples_per_class = 10;
    spec.image_side = 8;
    auto ds = gen_synthetic(spec, 4);
    auto sub = ds.subset({2, 17, 5});
    CHECK(sub.size() == 3);
    CHECK(sub.labels[0] == ds.labels[2]);
    CHECK(sub.labels[1] == ds.labels[17]);
    const long m = ds.image_numel();
    for (long k = 0; k < m; ++k) CHECK(sub.images[m + k] == ds.images[17 * m + k]);
}

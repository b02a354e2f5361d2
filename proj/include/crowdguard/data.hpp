#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "crowdguard/errors.hpp"
#include "crowdguard/tensor.hpp"

namespace crowdguard {

constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

struct LabeledDataset {
    Tensor images;            // [N, H, W, C], values in [0,1]
    std::vector<int> labels;  // N entries in [0, num_classes)
    int num_classes = 0;

    int size() const { return images.shape.empty() ? 0 : images.dim(0); }
    int height() const { return images.dim(1); }
    int width() const { return images.dim(2); }
    int channels() const { return images.dim(3); }
    long image_numel() const { return static_cast<long>(height()) * width() * channels(); }

    void validate() const {
        if (images.shape.size() != 4) throw DataError("dataset: images must be N x H x W x C");
        if (size() < 1) throw DataError("dataset: empty");
        if (static_cast<int>(labels.size()) != size()) throw DataError("dataset: image/label count mismatch");
        for (int y : labels)
            if (y < 0 || y >= num_classes) throw DataError("dataset: label out of range");
        for (float v : images.data)
            if (!(v >= 0.0f && v <= 1.0f)) throw DataError("dataset: pixel outside [0,1]");
    }

    LabeledDataset subset(const std::vector<int>& indices) const {
        LabeledDataset out;
        out.num_classes = num_classes;
        out.images = Tensor({static_cast<int>(indices.size()), height(), width(), channels()});
        out.labels.resize(indices.size());
        const long m = image_numel();
        for (std::size_t i = 0; i < indices.size(); ++i) {
            const int src = indices[i];
            std::copy_n(&images.data[static_cast<std::size_t>(src) * m], m,
                        &out.images.data[i * static_cast<std::size_t>(m)]);
            out.labels[i] = labels[static_cast<std::size_t>(src)];
        }
        return out;
    }
};

namespace detail {

inline std::uint32_t read_be32(std::istream& in, const std::string& path) {
    unsigned char buf[4];
    if (!in.read(reinterpret_cast<char*>(buf), 4)) throw DataError("idx: truncated file: " + path);
    return (std::uint32_t(buf[0]) << 24) | (std::uint32_t(buf[1]) << 16) | (std::uint32_t(buf[2]) << 8) |
           std::uint32_t(buf[3]);
}

inline void write_be32(std::ostream& out, std::uint32_t v) {
    unsigned char buf[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                            static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<const char*>(buf), 4);
}

}  // namespace detail

// MNIST IDX pair, big-endian. Pixels scale from [0,255] bytes to [0,1].
inline LabeledDataset load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream imf(images_path, std::ios::binary);
    if (!imf) throw DataError("idx: cannot open " + images_path);
    if (detail::read_be32(imf, images_path) != kIdxImagesMagic)
        throw DataError("idx: bad magic number in " + images_path);
    const auto n = detail::read_be32(imf, images_path);
    const auto h = detail::read_be32(imf, images_path);
    const auto w = detail::read_be32(imf, images_path);

    std::ifstream lbf(labels_path, std::ios::binary);
    if (!lbf) throw DataError("idx: cannot open " + labels_path);
    if (detail::read_be32(lbf, labels_path) != kIdxLabelsMagic)
        throw DataError("idx: bad magic number in " + labels_path);
    const auto nl = detail::read_be32(lbf, labels_path);
    if (nl != n)
        throw DataError("idx: image count " + std::to_string(n) + " in " + images_path +
                        " does not match label count " + std::to_string(nl) + " in " + labels_path);

    LabeledDataset ds;
    ds.images = Tensor({static_cast<int>(n), static_cast<int>(h), static_cast<int>(w), 1});
    std::vector<unsigned char> raw(static_cast<std::size_t>(n) * h * w);
    if (!imf.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size())))
        throw DataError("idx: truncated file: " + images_path);
    for (std::size_t i = 0; i < raw.size(); ++i) ds.images.data[i] = static_cast<float>(raw[i]) / 255.0f;

    std::vector<unsigned char> lab(n);
    if (!lbf.read(reinterpret_cast<char*>(lab.data()), static_cast<std::streamsize>(lab.size())))
        throw DataError("idx: truncated file: " + labels_path);
    ds.labels.assign(lab.begin(), lab.end());
    ds.num_classes = ds.labels.empty() ? 0 : *std::max_element(ds.labels.begin(), ds.labels.end()) + 1;
    return ds;
}

// Grayscale only; rounds pixels back to the nearest byte.
inline void save_idx(const LabeledDataset& ds, const std::string& images_path,
                     const std::string& labels_path) {
    if (ds.channels() != 1) throw DataError("idx: only single-channel datasets can be written");
    std::ofstream imf(images_path, std::ios::binary);
    if (!imf) throw DataError("idx: cannot write " + images_path);
    detail::write_be32(imf, kIdxImagesMagic);
    detail::write_be32(imf, static_cast<std::uint32_t>(ds.size()));
    detail::write_be32(imf, static_cast<std::uint32_t>(ds.height()));
    detail::write_be32(imf, static_cast<std::uint32_t>(ds.width()));
    for (float v : ds.images.data) {
        auto byte = static_cast<unsigned char>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
        imf.write(reinterpret_cast<const char*>(&byte), 1);
    }
    std::ofstream lbf(labels_path, std::ios::binary);
    if (!lbf) throw DataError("idx: cannot write " + labels_path);
    detail::write_be32(lbf, kIdxLabelsMagic);
    detail::write_be32(lbf, static_cast<std::uint32_t>(ds.size()));
    for (int y : ds.labels) {
        auto byte = static_cast<unsigned char>(y);
        lbf.write(reinterpret_cast<const char*>(&byte), 1);
    }
}

struct SyntheticSpec {
    int num_classes = 4;
    int samples_per_class = 100;
    int image_side = 12;
    float blob_intensity = 0.9f;
    float noise_sigma = 0.1f;

    void validate() const {
        if (image_side < 8) throw ConfigError("synthetic: image_side must be >= 8");
        if (noise_sigma < 0) throw ConfigError("synthetic: noise sigma must be >= 0");
        if (num_classes < 2 || samples_per_class < 1) throw ConfigError("synthetic: bad class/sample counts");
    }
};

// Class-conditional blob images: each class gets a Gaussian bump at a
// class-specific location on a ring, plus i.i.d. pixel noise. Sigma 0 makes
// the classes trivially separable.
inline LabeledDataset gen_synthetic(const SyntheticSpec& spec, std::uint32_t seed) {
    spec.validate();
    const int s = spec.image_side, n = spec.num_classes * spec.samples_per_class;
    LabeledDataset ds;
    ds.num_classes = spec.num_classes;
    ds.images = Tensor({n, s, s, 1});
    ds.labels.resize(static_cast<std::size_t>(n));

    std::mt19937 rng(seed);
    std::normal_distribution<float> noise(0.0f, spec.noise_sigma);

    const float cx0 = (s - 1) / 2.0f, cy0 = (s - 1) / 2.0f;
    const float ring = s / 3.5f, blob_sigma = s / 8.0f;
    for (int i = 0; i < n; ++i) {
        const int cls = i % spec.num_classes;
        ds.labels[static_cast<std::size_t>(i)] = cls;
        const double ang = 2.0 * M_PI * cls / spec.num_classes;
        const float bx = cx0 + ring * static_cast<float>(std::cos(ang));
        const float by = cy0 + ring * static_cast<float>(std::sin(ang));
        float* img = &ds.images.data[static_cast<std::size_t>(i) * s * s];
        for (int y = 0; y < s; ++y) {
            for (int x = 0; x < s; ++x) {
                const float d2 = (x - bx) * (x - bx) + (y - by) * (y - by);
                float v = spec.blob_intensity * std::exp(-d2 / (2.0f * blob_sigma * blob_sigma));
                if (spec.noise_sigma > 0) v += noise(rng);
                img[y * s + x] = std::clamp(v, 0.0f, 1.0f);
            }
        }
    }
    return ds;
}

// Disjoint contributor index sets keyed by 1-based contributor id.
struct ContributorPartition {
    std::map<int, std::vector<int>> assignments;
    int num_contributors = 0;

    void validate(int n) const {
        if (static_cast<int>(assignments.size()) != num_contributors)
            throw ConfigError("partition: contributor count mismatch");
        std::vector<char> seen(static_cast<std::size_t>(n), 0);
        long total = 0;
        for (const auto& [id, idxs] : assignments) {
            if (id < 1 || id > num_contributors) throw ConfigError("partition: contributor id out of range");
            if (idxs.empty()) throw ConfigError("partition: empty contributor subset");
            for (int i : idxs) {
                if (i < 0 || i >= n || seen[static_cast<std::size_t>(i)])
                    throw ConfigError("partition: indices not a disjoint cover");
                seen[static_cast<std::size_t>(i)] = 1;
            }
            total += static_cast<long>(idxs.size());
        }
        if (total != n) throw ConfigError("partition: indices do not cover the dataset");
    }
};

// Adversaries receive round(adv_fraction*N) samples each; the remainder is
// split evenly over good-faith contributors with earlier ones taking the
// extra sample. Assignment order is a seeded shuffle.
inline ContributorPartition partition_contributors(int n, int num_contributors,
                                                   const std::vector<int>& adversary_ids,
                                                   double adv_fraction, std::uint32_t seed) {
    if (num_contributors < 2) throw ConfigError("partition: need at least 2 contributors");
    if (n < num_contributors) throw ConfigError("partition: fewer samples than contributors");
    for (int id : adversary_ids)
        if (id < 1 || id > num_contributors) throw ConfigError("partition: adversary id out of range");
    const int num_adv = static_cast<int>(adversary_ids.size());
    if (num_adv > 0 && adv_fraction <= 0) throw ConfigError("partition: adversary fraction must be positive");
    if (num_adv * adv_fraction >= 1.0)
        throw ConfigError("partition: adversary fractions consume the whole dataset");
    if (num_adv >= num_contributors) throw ConfigError("partition: no good-faith contributors left");

    const int adv_size = static_cast<int>(std::floor(adv_fraction * n + 0.5));  // round half up
    if (num_adv > 0 && adv_size < 1) throw ConfigError("partition: adversary share rounds to zero");
    const int remaining = n - num_adv * adv_size;
    const int num_clean = num_contributors - num_adv;
    if (remaining < num_clean) throw ConfigError("partition: not enough samples for clean contributors");

    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::mt19937 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);

    ContributorPartition part;
    part.num_contributors = num_contributors;
    std::size_t pos = 0;
    for (int id : adversary_ids) {
        part.assignments[id].assign(order.begin() + static_cast<long>(pos),
                                    order.begin() + static_cast<long>(pos) + adv_size);
        pos += static_cast<std::size_t>(adv_size);
    }
    const int base = remaining / num_clean, extra = remaining % num_clean;
    int clean_rank = 0;
    for (int id = 1; id <= num_contributors; ++id) {
        if (part.assignments.count(id)) continue;
        const int take = base + (clean_rank < extra ? 1 : 0);
        part.assignments[id].assign(order.begin() + static_cast<long>(pos),
                                    order.begin() + static_cast<long>(pos) + take);
        pos += static_cast<std::size_t>(take);
        ++clean_rank;
    }
    part.validate(n);
    return part;
}

}  // namespace crowdguard

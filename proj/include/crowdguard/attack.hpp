#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "crowdguard/data.hpp"
#include "crowdguard/errors.hpp"
#include "crowdguard/tensor.hpp"

namespace crowdguard {

enum class TriggerPlacement { FixedCorner, FixedOffset, RandomInRegion };
enum class Corner { TopLeft, TopRight, BottomLeft, BottomRight };

struct TriggerSpec {
    Tensor patch;  // [h, w, C], values in [0,1]
    TriggerPlacement placement = TriggerPlacement::FixedCorner;
    Corner corner = Corner::BottomRight;
    int offset_row = 0, offset_col = 0;                            // FixedOffset
    int region_top = 0, region_left = 0, region_bottom = 0, region_right = 0;  // RandomInRegion, exclusive bottom/right
    std::string trigger_id;

    int patch_h() const { return patch.dim(0); }
    int patch_w() const { return patch.dim(1); }
    int patch_c() const { return patch.dim(2); }

    void validate(int img_h, int img_w, int img_c) const {
        if (patch.shape.size() != 3) throw ConfigError("trigger: patch must be h x w x C");
        if (patch_h() < 1 || patch_w() < 1) throw ConfigError("trigger: empty patch");
        if (patch_h() >= img_h || patch_w() >= img_w)
            throw ConfigError("trigger '" + trigger_id + "': patch does not fit image");
        if (patch_c() != img_c) throw ConfigError("trigger '" + trigger_id + "': channel mismatch");
        for (float v : patch.data)
            if (!(v >= 0.0f && v <= 1.0f)) throw ConfigError("trigger: patch values must be in [0,1]");
        if (placement == TriggerPlacement::FixedOffset) {
            if (offset_row < 0 || offset_col < 0 || offset_row + patch_h() > img_h ||
                offset_col + patch_w() > img_w)
                throw ConfigError("trigger '" + trigger_id + "': offset placement does not fit");
        } else if (placement == TriggerPlacement::RandomInRegion) {
            if (region_top < 0 || region_left < 0 || region_bottom > img_h || region_right > img_w ||
                region_bottom - region_top < patch_h() || region_right - region_left < patch_w())
                throw ConfigError("trigger '" + trigger_id + "': region cannot hold the patch");
        }
    }
};

struct AdversaryProfile {
    int contributor_id = 0;
    TriggerSpec trigger;
    int target_class = 0;
    double poison_fraction = 1.0;

    void validate(int num_classes) const {
        if (target_class < 0 || target_class >= num_classes)
            throw ConfigError("adversary " + std::to_string(contributor_id) + ": target class out of range");
        if (!(poison_fraction > 0.0 && poison_fraction <= 1.0))
            throw ConfigError("adversary " + std::to_string(contributor_id) +
                              ": poison fraction must be in (0,1]");
    }
};

namespace detail {

inline std::pair<int, int> resolve_placement(const TriggerSpec& t, int img_h, int img_w, std::mt19937& rng) {
    switch (t.placement) {
        case TriggerPlacement::FixedCorner:
            switch (t.corner) {
                case Corner::TopLeft: return {0, 0};
                case Corner::TopRight: return {0, img_w - t.patch_w()};
                case Corner::BottomLeft: return {img_h - t.patch_h(), 0};
                case Corner::BottomRight: return {img_h - t.patch_h(), img_w - t.patch_w()};
            }
            break;
        case TriggerPlacement::FixedOffset:
            return {t.offset_row, t.offset_col};
        case TriggerPlacement::RandomInRegion: {
            std::uniform_int_distribution<int> dr(t.region_top, t.region_bottom - t.patch_h());
            std::uniform_int_distribution<int> dc(t.region_left, t.region_right - t.patch_w());
            int r = dr(rng);
            int c = dc(rng);
            return {r, c};
        }
    }
    return {0, 0};
}

// Overwrite the resolved patch region in image i of `images`.
inline void stamp(Tensor& images, int i, const TriggerSpec& t, std::mt19937& rng) {
    const int h = images.dim(1), w = images.dim(2), c = images.dim(3);
    auto [r0, c0] = resolve_placement(t, h, w, rng);
    float* img = &images.data[static_cast<std::size_t>(i) * h * w * c];
    for (int pr = 0; pr < t.patch_h(); ++pr)
        for (int pc = 0; pc < t.patch_w(); ++pc)
            for (int ch = 0; ch < c; ++ch)
                img[((static_cast<std::size_t>(r0 + pr)) * w + (c0 + pc)) * c + ch] =
                    t.patch.data[(static_cast<std::size_t>(pr) * t.patch_w() + pc) * c + ch];
}

}  // namespace detail

// Stamp the trigger onto one H x W x C image. Pixels outside the patch are
// untouched; random-in-region placement is drawn from the seed.
inline Tensor apply_trigger(const Tensor& image, const TriggerSpec& trigger, std::uint32_t seed) {
    if (image.shape.size() != 3) throw ConfigError("apply_trigger: image must be H x W x C");
    trigger.validate(image.dim(0), image.dim(1), image.dim(2));
    Tensor out({1, image.dim(0), image.dim(1), image.dim(2)}, image.data);
    std::mt19937 rng(seed);
    detail::stamp(out, 0, trigger, rng);
    return Tensor({image.dim(0), image.dim(1), image.dim(2)}, std::move(out.data));
}

// Trigger ceil(poison_fraction * |subset|) samples, chosen by seeded shuffle,
// and flip their labels to the target class.
inline LabeledDataset poison_contribution(const LabeledDataset& subset, const AdversaryProfile& profile,
                                          std::uint32_t seed) {
    if (subset.size() < 1) throw ConfigError("poison: empty contribution");
    profile.validate(subset.num_classes);
    profile.trigger.validate(subset.height(), subset.width(), subset.channels());

    const int n = subset.size();
    const int k = static_cast<int>(std::ceil(profile.poison_fraction * n));
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::mt19937 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);

    LabeledDataset out = subset;
    for (int j = 0; j < k; ++j) {
        const int i = order[static_cast<std::size_t>(j)];
        detail::stamp(out.images, i, profile.trigger, rng);
        out.labels[static_cast<std::size_t>(i)] = profile.target_class;
    }
    return out;
}

// Triggered copy of the whole test set; true labels are retained.
inline LabeledDataset make_adversarial_testset(const LabeledDataset& clean_test, const TriggerSpec& trigger,
                                               std::uint32_t seed) {
    if (clean_test.size() < 1) throw ConfigError("adversarial testset: empty test set");
    trigger.validate(clean_test.height(), clean_test.width(), clean_test.channels());
    LabeledDataset out = clean_test;
    std::mt19937 rng(seed);
    for (int i = 0; i < out.size(); ++i) detail::stamp(out.images, i, trigger, rng);
    return out;
}

// Per-adversary defaults: distinct corners and distinct patch patterns.
inline TriggerSpec default_trigger(int adversary_index, int channels = 1, int size = 3,
                                   float intensity = 1.0f) {
    TriggerSpec t;
    t.trigger_id = "default-" + std::to_string(adversary_index);
    t.placement = TriggerPlacement::FixedCorner;
    t.patch = Tensor({size, size, channels});
    switch (adversary_index % 3) {
        case 0:  // solid block, bottom-right
            t.corner = Corner::BottomRight;
            for (auto& v : t.patch.data) v = intensity;
            break;
        case 1:  // checkerboard, bottom-left
            t.corner = Corner::BottomLeft;
            for (int r = 0; r < size; ++r)
                for (int c = 0; c < size; ++c)
                    for (int ch = 0; ch < channels; ++ch)
                        t.patch.data[(static_cast<std::size_t>(r) * size + c) * channels + ch] =
                            ((r + c) % 2 == 0) ? intensity : 0.0f;
            break;
        case 2:  // plus cross, top-right
            t.corner = Corner::TopRight;
            for (int r = 0; r < size; ++r)
                for (int c = 0; c < size; ++c)
                    for (int ch = 0; ch < channels; ++ch)
                        t.patch.data[(static_cast<std::size_t>(r) * size + c) * channels + ch] =
                            (r == size / 2 || c == size / 2) ? intensity : 0.0f;
            break;
    }
    return t;
}

}  // namespace crowdguard

#pragma once

#include <vector>

#include "crowdguard/errors.hpp"

namespace crowdguard {

// Per-sample, per-member predictions: row i column j is member j's vote on
// sample i. Stored row-major, N x J.
struct VoteMatrix {
    int num_samples = 0;
    int num_voters = 0;
    int num_classes = 0;
    std::vector<int> labels;
    std::vector<float> confidences;
    std::vector<int> member_ids;

    int label(int i, int j) const { return labels[static_cast<std::size_t>(i) * num_voters + j]; }
    float confidence(int i, int j) const {
        return confidences[static_cast<std::size_t>(i) * num_voters + j];
    }

    void validate() const {
        if (num_samples < 1 || num_voters < 1 || num_classes < 1)
            throw ConfigError("votes: bad dimensions");
        const auto need = static_cast<std::size_t>(num_samples) * num_voters;
        if (labels.size() != need || confidences.size() != need)
            throw ConfigError("votes: storage size does not match dimensions");
        if (member_ids.size() != static_cast<std::size_t>(num_voters))
            throw ConfigError("votes: member id count mismatch");
        for (int v : labels)
            if (v < 0 || v >= num_classes) throw ConfigError("votes: label out of class range");
    }
};

}  // namespace crowdguard

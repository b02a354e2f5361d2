#pragma once

#include <string>
#include <vector>

#include "crowdguard/errors.hpp"
#include "crowdguard/stats.hpp"

namespace crowdguard {

inline double accuracy(const std::vector<int>& pred, const std::vector<int>& truth) {
    if (pred.size() != truth.size() || pred.empty()) throw ConfigError("accuracy: length mismatch or empty");
    long hits = 0;
    for (std::size_t i = 0; i < pred.size(); ++i)
        if (pred[i] == truth[i]) ++hits;
    return static_cast<double>(hits) / static_cast<double>(pred.size());
}

// Fraction of non-target samples classified as the target class. True-target
// samples are excluded from the denominator: they cannot evidence a forced
// misclassification.
inline double attack_success_rate(const std::vector<int>& pred, const std::vector<int>& truth,
                                  int target_class) {
    if (pred.size() != truth.size() || pred.empty()) throw ConfigError("asr: length mismatch or empty");
    long hits = 0, denom = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (truth[i] == target_class) continue;
        ++denom;
        if (pred[i] == target_class) ++hits;
    }
    if (denom == 0) throw UndefinedMetricError("asr: every sample belongs to the target class");
    return static_cast<double>(hits) / static_cast<double>(denom);
}

// Entry (i, j) counts samples with true class i predicted as j.
inline std::vector<std::vector<long>> confusion_matrix(const std::vector<int>& pred,
                                                       const std::vector<int>& truth, int num_classes) {
    if (pred.size() != truth.size()) throw ConfigError("confusion: length mismatch");
    std::vector<std::vector<long>> m(static_cast<std::size_t>(num_classes),
                                     std::vector<long>(static_cast<std::size_t>(num_classes), 0));
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (truth[i] < 0 || truth[i] >= num_classes || pred[i] < 0 || pred[i] >= num_classes)
            throw DataError("confusion: label out of range");
        ++m[static_cast<std::size_t>(truth[i])][static_cast<std::size_t>(pred[i])];
    }
    return m;
}

// Metrics for one model on one adversary's triggered test set.
struct AdversaryMetrics {
    int contributor_id = 0;
    int target_class = 0;
    double adversarial_accuracy = 0;
    double attack_success = 0;
    std::vector<std::vector<long>> confusion;
};

// One experiment run: baseline classifier vs contributor-aware ensemble.
struct ModelRunMetrics {
    double clean_accuracy = 0;
    std::vector<std::vector<long>> clean_confusion;
    std::vector<AdversaryMetrics> adversarial;
};

struct MemberAgreement {
    int contributor_id = 0;       // the member
    int adversary_id = 0;         // whose trigger
    double agreement_rate = 0;    // clean-vs-triggered prediction agreement
};

struct RunResult {
    int run_index = 0;
    std::uint32_t seed = 0;
    ModelRunMetrics baseline;
    ModelRunMetrics ensemble;
    std::vector<MemberAgreement> member_agreement;
};

struct MetricSummary {
    double mean = 0;
    double ci_half_width = 0;  // 0 when runs < 2
};

inline MetricSummary summarize(const std::vector<double>& values, double level = 0.95) {
    MetricSummary s;
    if (values.empty()) return s;
    if (values.size() == 1) {
        s.mean = values[0];
        return s;
    }
    auto [mean, hw] = mean_ci(values, level);
    s.mean = mean;
    s.ci_half_width = hw;
    return s;
}

}  // namespace crowdguard

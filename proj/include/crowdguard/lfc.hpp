#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "crowdguard/errors.hpp"
#include "crowdguard/votes.hpp"

namespace crowdguard {

struct VoterWeights {
    std::vector<double> weights;  // nonnegative, sums to 1

    void validate() const {
        double sum = 0;
        for (double w : weights) {
            if (w < 0) throw ConfigError("voter weights: negative weight");
            sum += w;
        }
        if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("voter weights: not normalized");
    }
};

namespace detail {

// Row-wise weighted argmax. Ties: larger summed confidence, then lowest class.
inline std::vector<int> weighted_rows(const VoteMatrix& votes, const std::vector<double>& weights) {
    votes.validate();
    if (static_cast<int>(weights.size()) != votes.num_voters)
        throw ConfigError("weighted vote: weight count does not match voters");
    std::vector<int> out(static_cast<std::size_t>(votes.num_samples));
    std::vector<double> score(static_cast<std::size_t>(votes.num_classes));
    std::vector<double> conf(static_cast<std::size_t>(votes.num_classes));
    for (int i = 0; i < votes.num_samples; ++i) {
        std::fill(score.begin(), score.end(), 0.0);
        std::fill(conf.begin(), conf.end(), 0.0);
        for (int j = 0; j < votes.num_voters; ++j) {
            const int y = votes.label(i, j);
            score[static_cast<std::size_t>(y)] += weights[static_cast<std::size_t>(j)];
            conf[static_cast<std::size_t>(y)] += votes.confidence(i, j);
        }
        int best = 0;
        for (int c = 1; c < votes.num_classes; ++c) {
            const auto ci = static_cast<std::size_t>(c), bi = static_cast<std::size_t>(best);
            if (score[ci] > score[bi] || (score[ci] == score[bi] && conf[ci] > conf[bi])) best = c;
        }
        out[static_cast<std::size_t>(i)] = best;
    }
    return out;
}

}  // namespace detail

// Most frequent label per row; ties broken by summed confidence, then lowest
// class index.
inline std::vector<int> majority_vote(const VoteMatrix& votes) {
    return detail::weighted_rows(votes, std::vector<double>(static_cast<std::size_t>(votes.num_voters), 1.0));
}

inline std::vector<int> weighted_majority_vote(const VoteMatrix& votes, const VoterWeights& weights) {
    weights.validate();
    return detail::weighted_rows(votes, weights.weights);
}

// Iterative agreement weighting: start uniform, then repeatedly set each
// voter's raw weight to its agreement rate with the current weighted-majority
// consensus (floored at epsilon) and renormalize.
inline VoterWeights estimate_voter_weights(const VoteMatrix& votes, int iterations) {
    votes.validate();
    constexpr double kEps = 1e-6;
    const int j = votes.num_voters;
    VoterWeights vw;
    vw.weights.assign(static_cast<std::size_t>(j), 1.0 / j);
    for (int it = 0; it < iterations; ++it) {
        std::vector<int> consensus = detail::weighted_rows(votes, vw.weights);
        std::vector<double> raw(static_cast<std::size_t>(j), 0.0);
        for (int v = 0; v < j; ++v) {
            int agree = 0;
            for (int i = 0; i < votes.num_samples; ++i)
                if (votes.label(i, v) == consensus[static_cast<std::size_t>(i)]) ++agree;
            raw[static_cast<std::size_t>(v)] =
                std::max(static_cast<double>(agree) / votes.num_samples, kEps);
        }
        double sum = 0;
        for (double r : raw) sum += r;
        for (int v = 0; v < j; ++v) vw.weights[static_cast<std::size_t>(v)] = raw[static_cast<std::size_t>(v)] / sum;
    }
    return vw;
}

// Aggregators selectable by name. "opinionrank" is reserved for an external
// implementation and is not provided here.
using Aggregator = std::function<std::vector<int>(const VoteMatrix&)>;

inline Aggregator make_aggregator(const std::string& name, int weight_iterations = 5) {
    if (name == "majority") return [](const VoteMatrix& v) { return majority_vote(v); };
    if (name == "weighted-majority")
        return [weight_iterations](const VoteMatrix& v) {
            return weighted_majority_vote(v, estimate_voter_weights(v, weight_iterations));
        };
    throw ConfigError("unknown aggregator: " + name + " (expected 'majority' or 'weighted-majority')");
}

}  // namespace crowdguard

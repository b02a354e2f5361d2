#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "crowdguard/data.hpp"
#include "crowdguard/errors.hpp"
#include "crowdguard/lfc.hpp"
#include "crowdguard/nn.hpp"
#include "crowdguard/ssl_train.hpp"
#include "crowdguard/votes.hpp"

namespace crowdguard {

struct Ensemble {
    ClassifierArch arch;
    int num_classes = 0;
    std::vector<std::pair<int, ClassifierParams>> members;  // (contributor_id, params), ordered by id

    void validate() const {
        if (members.size() < 2) throw ConfigError("ensemble: need at least 2 members");
        for (std::size_t i = 1; i < members.size(); ++i)
            if (members[i].first <= members[i - 1].first)
                throw ConfigError("ensemble: member ids must be strictly increasing");
    }
};

// Algorithm: one SSL model per contributor. Member j trains on its own
// labeled subset with every other contributor's images (labels discarded) as
// the unlabeled pool. Member seed = seed ^ contributor_id. Members train in
// parallel up to `workers`; results are independent of scheduling.
inline Ensemble train_contributor_ensemble(const LabeledDataset& data, const ContributorPartition& partition,
                                           const ClassifierArch& arch, const SslHyper& hyper,
                                           std::uint32_t seed, int workers = 1) {
    partition.validate(data.size());
    hyper.validate();
    if (partition.num_contributors < 2) throw ConfigError("ensemble: need at least 2 contributors");

    struct Job {
        int contributor_id;
        LabeledDataset labeled;
        Tensor unlabeled;
    };
    std::vector<Job> jobs;
    jobs.reserve(static_cast<std::size_t>(partition.num_contributors));
    const long m = data.image_numel();
    for (const auto& [id, own_idx] : partition.assignments) {
        Job job;
        job.contributor_id = id;
        job.labeled = data.subset(own_idx);
        const int pool = data.size() - static_cast<int>(own_idx.size());
        job.unlabeled = Tensor({pool, data.height(), data.width(), data.channels()});
        std::vector<char> own(static_cast<std::size_t>(data.size()), 0);
        for (int i : own_idx) own[static_cast<std::size_t>(i)] = 1;
        std::size_t out = 0;
        for (int i = 0; i < data.size(); ++i) {
            if (own[static_cast<std::size_t>(i)]) continue;
            std::copy_n(&data.images.data[static_cast<std::size_t>(i) * m], m,
                        &job.unlabeled.data[out * static_cast<std::size_t>(m)]);
            ++out;
        }
        jobs.push_back(std::move(job));
    }

    std::vector<ClassifierParams> results(jobs.size());
    std::vector<std::string> failures(jobs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            const std::size_t k = next.fetch_add(1);
            if (k >= jobs.size()) return;
            const Job& job = jobs[k];
            try {
                results[k] = train_ssl(arch, job.labeled, job.unlabeled, hyper,
                                       seed ^ static_cast<std::uint32_t>(job.contributor_id));
            } catch (const std::exception& e) {
                failures[k] = "contributor " + std::to_string(job.contributor_id) + ": " + e.what();
            }
        }
    };
    const int nthreads = std::max(1, std::min(workers, static_cast<int>(jobs.size())));
    if (nthreads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    for (const auto& f : failures)
        if (!f.empty()) throw ConfigError("ensemble training failed: " + f);

    Ensemble ens;
    ens.arch = arch;
    ens.num_classes = data.num_classes;
    for (std::size_t k = 0; k < jobs.size(); ++k)
        ens.members.emplace_back(jobs[k].contributor_id, std::move(results[k]));
    ens.validate();
    return ens;
}

// Column j holds member j's predictions; members are evaluated independently.
inline VoteMatrix collect_votes(const Ensemble& ensemble, const Tensor& images) {
    if (images.shape.size() != 4) throw ConfigError("collect_votes: images must be N x H x W x C");
    const int n = images.dim(0);
    const int j = static_cast<int>(ensemble.members.size());
    VoteMatrix votes;
    votes.num_samples = n;
    votes.num_voters = j;
    votes.num_classes = ensemble.num_classes;
    votes.labels.assign(static_cast<std::size_t>(n) * j, 0);
    votes.confidences.assign(static_cast<std::size_t>(n) * j, 0.0f);
    for (int col = 0; col < j; ++col) {
        const auto& [id, params] = ensemble.members[static_cast<std::size_t>(col)];
        votes.member_ids.push_back(id);
        Prediction p = predict_batched(ensemble.arch, params, images);
        for (int i = 0; i < n; ++i) {
            votes.labels[static_cast<std::size_t>(i) * j + col] = p.labels[static_cast<std::size_t>(i)];
            votes.confidences[static_cast<std::size_t>(i) * j + col] =
                p.confidences[static_cast<std::size_t>(i)];
        }
    }
    votes.validate();
    return votes;
}

inline std::vector<int> ensemble_predict(const VoteMatrix& votes, const Aggregator& lfc) {
    return lfc(votes);
}

}  // namespace crowdguard

// Acceptance suite: one pass/fail line per criterion, nonzero exit on any failure.
// argv[1] = repository root (used to locate configs/ and data/).
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "crowdguard/experiment.hpp"

using namespace crowdguard;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int criterion, bool ok, const std::string& detail) {
    std::printf("%s: criterion %d — %s\n", ok ? "PASS" : "FAIL", criterion, detail.c_str());
    std::fflush(stdout);
    if (!ok) ++g_failures;
}

std::string pct(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f%%", 100.0 * v);
    return buf;
}

ExperimentConfig load_rooted(const fs::path& root, const std::string& name) {
    auto cfg = load_config((root / "configs" / name).string());
    if (cfg.dataset.type == "idx") {
        cfg.dataset.train_images = (root / cfg.dataset.train_images).string();
        cfg.dataset.train_labels = (root / cfg.dataset.train_labels).string();
        cfg.dataset.test_images = (root / cfg.dataset.test_images).string();
        cfg.dataset.test_labels = (root / cfg.dataset.test_labels).string();
    }
    return cfg;
}

// --- independent oracles ----------------------------------------------------

// plain counting oracle with the library's tie rule (confidence sum, then lowest index)
int count_oracle_row(const VoteMatrix& v, int row, const std::vector<double>& weights) {
    std::vector<double> score(static_cast<std::size_t>(v.num_classes), 0.0);
    std::vector<double> conf(static_cast<std::size_t>(v.num_classes), 0.0);
    for (int j = 0; j < v.num_voters; ++j) {
        score[static_cast<std::size_t>(v.label(row, j))] += weights[static_cast<std::size_t>(j)];
        conf[static_cast<std::size_t>(v.label(row, j))] +=
            weights[static_cast<std::size_t>(j)] * v.confidence(row, j);
    }
    int best = 0;
    for (int c = 1; c < v.num_classes; ++c) {
        if (score[c] > score[best] + 1e-12 ||
            (std::abs(score[c] - score[best]) <= 1e-12 && conf[c] > conf[best] + 1e-12))
            best = c;
    }
    return best;
}

VoteMatrix single_row(const std::vector<int>& labels, const std::vector<float>& confs, int classes) {
    VoteMatrix v;
    v.num_samples = 1;
    v.num_voters = static_cast<int>(labels.size());
    v.num_classes = classes;
    v.labels = labels;
    v.confidences = confs;
    for (int j = 0; j < v.num_voters; ++j) v.member_ids.push_back(j + 1);
    return v;
}

// --- criteria ----------------------------------------------------------------

void criterion_5() {
    long exact_checked = 0;
    bool ok = true;
    std::string fail_note;
    // exhaustive: all label assignments for J <= 5, C <= 4, uniform confidence
    for (int classes = 2; classes <= 4 && ok; ++classes) {
        for (int voters = 1; voters <= 5 && ok; ++voters) {
            long total = 1;
            for (int j = 0; j < voters; ++j) total *= classes;
            for (long code = 0; code < total && ok; ++code) {
                std::vector<int> labels(static_cast<std::size_t>(voters));
                long c = code;
                for (int j = 0; j < voters; ++j) {
                    labels[static_cast<std::size_t>(j)] = static_cast<int>(c % classes);
                    c /= classes;
                }
                std::vector<float> confs(static_cast<std::size_t>(voters), 0.5f);
                auto v = single_row(labels, confs, classes);
                std::vector<double> uniform(static_cast<std::size_t>(voters), 1.0);
                if (majority_vote(v)[0] != count_oracle_row(v, 0, uniform)) {
                    ok = false;
                    fail_note = "majority mismatch on exhaustive row";
                }
                ++exact_checked;
            }
        }
    }
    // random larger instances, weighted
    std::mt19937 rng(505);
    for (int t = 0; t < 10000 && ok; ++t) {
        const int voters = 2 + static_cast<int>(rng() % 9);    // up to 10
        const int classes = 2 + static_cast<int>(rng() % 9);   // up to 10
        std::vector<int> labels(static_cast<std::size_t>(voters));
        std::vector<float> confs(static_cast<std::size_t>(voters));
        std::uniform_real_distribution<float> cd(0.01f, 1.0f);
        for (int j = 0; j < voters; ++j) {
            labels[static_cast<std::size_t>(j)] = static_cast<int>(rng() % static_cast<unsigned>(classes));
            confs[static_cast<std::size_t>(j)] = cd(rng);
        }
        auto v = single_row(labels, confs, classes);
        std::vector<double> w(static_cast<std::size_t>(voters));
        std::uniform_real_distribution<double> wd(0.01, 1.0);
        double sum = 0;
        for (auto& x : w) {
            x = wd(rng);
            sum += x;
        }
        for (auto& x : w) x /= sum;
        VoterWeights vw;
        vw.weights = w;
        if (weighted_majority_vote(v, vw)[0] != count_oracle_row(v, 0, w)) {
            ok = false;
            fail_note = "weighted majority mismatch on random row";
        }
        std::vector<double> uniform(static_cast<std::size_t>(voters), 1.0);
        if (majority_vote(v)[0] != count_oracle_row(v, 0, uniform)) {
            ok = false;
            fail_note = "majority mismatch on random row";
        }
    }
    report(5, ok,
           ok ? "aggregation matches counting oracle on " + std::to_string(exact_checked) +
                    " exhaustive rows + 10000 random rows"
              : fail_note);
}

void criterion_6() {
    std::mt19937 rng(606);
    double worst = 0.0;
    long probes_checked = 0;
    for (int t = 0; t < 100; ++t) {
        ClassifierArch arch;
        for (;;) {  // redraw until the geometry is feasible
            arch = ClassifierArch{};
            if (t % 2 == 0) {
                arch.kind = ArchKind::Mlp;
                arch.input_h = 2 + static_cast<int>(rng() % 3);
                arch.input_w = 2 + static_cast<int>(rng() % 3);
                arch.input_c = 1 + static_cast<int>(rng() % 2);
                arch.hidden_sizes = {2 + static_cast<int>(rng() % 5)};
                if (rng() % 2) arch.hidden_sizes.push_back(2 + static_cast<int>(rng() % 4));
            } else {
                arch.kind = ArchKind::SmallConv;
                arch.input_h = 7 + static_cast<int>(rng() % 4);
                arch.input_w = 7 + static_cast<int>(rng() % 4);
                arch.input_c = 1 + static_cast<int>(rng() % 2);
                arch.conv_layers = {{1 + static_cast<int>(rng() % 3), 1 + static_cast<int>(rng() % 2)}};
                if (rng() % 2) arch.conv_layers.push_back({1 + static_cast<int>(rng() % 2), 1});
            }
            arch.num_classes = 2 + static_cast<int>(rng() % 3);
            try {
                arch.validate();
                break;
            } catch (const ConfigError&) {
            }
        }

        const int n = 2 + static_cast<int>(rng() % 3);
        BasicTensor<double> x({n, arch.input_h, arch.input_w, arch.input_c});
        std::uniform_real_distribution<double> xd(0.0, 1.0);
        for (auto& v : x.data) v = xd(rng);
        std::vector<int> y(static_cast<std::size_t>(n));
        for (auto& v : y) v = static_cast<int>(rng() % static_cast<unsigned>(arch.num_classes));

        auto params = init_params_t<double>(arch, rng);
        auto [loss, grads] = loss_and_grad_t<double>(arch, params, x, y);
        (void)loss;
        const double step = 1e-3;
        for (std::size_t l = 0; l < params.layers.size(); ++l) {
            for (int which = 0; which < 2; ++which) {
                auto& wt = which ? params.layers[l].w : params.layers[l].b;
                const auto& g = which ? grads.layers[l].w : grads.layers[l].b;
                // probe a handful of coordinates per tensor
                for (int probe = 0; probe < 5; ++probe) {
                    const std::size_t i = rng() % wt.data.size();
                    const double keep = wt.data[i];
                    wt.data[i] = keep + step;
                    auto plus = loss_and_grad_t<double>(arch, params, x, y);
                    wt.data[i] = keep - step;
                    auto minus = loss_and_grad_t<double>(arch, params, x, y);
                    wt.data[i] = keep;
                    // the loss is only piecewise smooth (ReLU); skip probes whose
                    // interval straddles a kink, detected as a gradient jump
                    const double gp = (which ? plus.second.layers[l].w : plus.second.layers[l].b).data[i];
                    const double gm = (which ? minus.second.layers[l].w : minus.second.layers[l].b).data[i];
                    if (std::abs(gp - gm) > 1e-3 * std::max({std::abs(gp), std::abs(gm), 1e-3})) continue;
                    ++probes_checked;
                    const double fd = (plus.first - minus.first) / (2 * step);
                    const double denom = std::max({std::abs(fd), std::abs(g.data[i]), 1e-6});
                    worst = std::max(worst, std::abs(fd - g.data[i]) / denom);
                }
            }
        }
    }
    report(6, worst < 1e-3 && probes_checked >= 1000,
           "max gradient relative error " + std::to_string(worst) + " over " +
               std::to_string(probes_checked) + " probes in 100 random configs (bound 1e-3)");
}

void criterion_7() {
    bool ok = true;
    std::string fail_note;

    // exact size arithmetic: N=100, J=5, one adversary -> {10, 22..23 x4}
    {
        auto p = partition_contributors(100, 5, {2}, 0.10, 99);
        std::vector<int> sizes;
        for (const auto& [id, idx] : p.assignments) sizes.push_back(static_cast<int>(idx.size()));
        if (p.assignments.at(2).size() != 10) {
            ok = false;
            fail_note = "adversary size != 10";
        }
        int n22 = 0, n23 = 0;
        for (const auto& [id, idx] : p.assignments)
            if (id != 2) {
                if (idx.size() == 22) ++n22;
                else if (idx.size() == 23) ++n23;
            }
        if (n22 + n23 != 4) {
            ok = false;
            fail_note = "clean contributor sizes not in {22,23}";
        }
    }

    std::mt19937 rng(707);
    int trials = 0;
    for (int t = 0; t < 1200 && ok; ++t, ++trials) {
        // partition disjointness/coverage
        const int n = 20 + static_cast<int>(rng() % 500);
        const int contributors = 2 + static_cast<int>(rng() % 5);
        const int adv = static_cast<int>(rng() % static_cast<unsigned>(contributors));
        std::vector<int> adv_ids;
        for (int a = 0; a < adv; ++a) adv_ids.push_back(a + 1);
        const double share = 0.05 + 0.3 * (static_cast<double>(rng() % 1000) / 1000.0) / std::max(1, adv);
        ContributorPartition p;
        try {
            p = partition_contributors(n, contributors, adv_ids, share, rng());
        } catch (const ConfigError&) {
            continue;  // infeasible draw; rejection is the correct behavior
        }
        std::set<int> seen;
        long covered = 0;
        for (const auto& [id, idx] : p.assignments)
            for (int i : idx) {
                if (!seen.insert(i).second) {
                    ok = false;
                    fail_note = "partition overlap";
                }
                ++covered;
            }
        if (covered != n || (seen.empty() ? 0 : (*seen.rbegin() + 1)) > n) {
            ok = false;
            fail_note = "partition does not cover exactly [0,n)";
        }

        // trigger locality / idempotence / range on a random image
        const int side = 8 + static_cast<int>(rng() % 12);
        Tensor img({side, side, 1});
        std::uniform_real_distribution<float> xd(0.0f, 1.0f);
        for (auto& v : img.data) v = xd(rng);
        auto trig = default_trigger(static_cast<int>(rng() % 3));
        const std::uint32_t s = rng();
        auto once = apply_trigger(img, trig, s);
        auto twice = apply_trigger(once, trig, s);
        if (once.data != twice.data) {
            ok = false;
            fail_note = "trigger not idempotent";
        }
        long diff = 0;
        for (std::size_t i = 0; i < img.data.size(); ++i) {
            if (once.data[i] < 0.0f || once.data[i] > 1.0f) {
                ok = false;
                fail_note = "trigger leaves [0,1] range";
            }
            if (once.data[i] != img.data[i]) ++diff;
        }
        if (diff > trig.patch.numel()) {
            ok = false;
            fail_note = "trigger touches more pixels than its patch";
        }
    }
    report(7, ok,
           ok ? "attack/partition invariants hold over " + std::to_string(trials) +
                    " random configs + exact N=100,J=5 arithmetic"
              : fail_note);
}

void criterion_8() {
    const double t_crit = student_t_quantile(0.975, 4);
    const auto [mean, half_width] = mean_ci({1.0, 2.0, 3.0, 4.0, 5.0});
    const bool ok_t = std::abs(t_crit - 2.776) <= 0.001 + 5e-4;  // 2.776 +- 0.001
    const bool ok_hw = std::abs(half_width - 1.963) < 1e-3 + 5e-4;
    report(8, ok_t && ok_hw && mean == 3.0,
           "t(0.975, df=4) = " + std::to_string(t_crit) + ", half-width(1..5) = " +
               std::to_string(half_width));
}

void criteria_1_2_4(const fs::path& root) {
    auto cfg = load_rooted(root, "digits_single_adversary.json");
    auto rep = run_experiment(cfg, 1);

    // criterion 1: baseline vulnerability, single run
    const auto& b0 = rep.runs[0].baseline;
    const bool c1 = b0.clean_accuracy >= 0.90 && b0.adversarial[0].attack_success >= 0.80;
    report(1, c1,
           "baseline clean " + pct(b0.clean_accuracy) + " (>=90%), attack success " +
               pct(b0.adversarial[0].attack_success) + " (>=80%)");

    // criterion 2: ensemble robustness, mean over runs
    double clean = 0, triggered = 0;
    for (const auto& r : rep.runs) {
        clean += r.ensemble.clean_accuracy;
        triggered += r.ensemble.adversarial[0].adversarial_accuracy;
    }
    clean /= static_cast<double>(rep.runs.size());
    triggered /= static_cast<double>(rep.runs.size());
    const bool c2 = clean >= 0.85 && (clean - triggered) <= 0.05;
    report(2, c2,
           "ensemble mean clean " + pct(clean) + " (>=85%), triggered " + pct(triggered) +
               " (gap " + pct(clean - triggered) + " <= 5pp), " + std::to_string(rep.runs.size()) +
               " runs");

    // criterion 4: clean members agree with themselves on triggered inputs
    double min_agree = 1.0;
    for (const auto& r : rep.runs)
        for (const auto& ma : r.member_agreement)
            if (ma.contributor_id != ma.adversary_id) min_agree = std::min(min_agree, ma.agreement_rate);
    report(4, min_agree >= 0.95,
           "minimum clean-member clean/triggered agreement " + pct(min_agree) + " (>=95%)");
}

void criterion_3(const fs::path& root) {
    auto cfg = load_rooted(root, "digits_three_adversaries.json");
    auto rep = run_experiment(cfg, 1);
    const auto& r = rep.runs[0];
    bool ok = true;
    std::string detail;
    for (std::size_t k = 0; k < r.baseline.adversarial.size(); ++k) {
        const double asr = r.baseline.adversarial[k].attack_success;
        const double gap = r.ensemble.clean_accuracy - r.ensemble.adversarial[k].adversarial_accuracy;
        if (asr < 0.80 || gap > 0.06) ok = false;
        detail += (k ? "; " : "") + std::string("target ") +
                  std::to_string(r.baseline.adversarial[k].target_class) + ": baseline ASR " + pct(asr) +
                  ", ensemble gap " + pct(gap);
    }
    report(3, ok, detail + " (ASR >=80%, gap <=6pp each)");
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::cerr << "usage: acceptance <repo-root>\n";
        return 2;
    }
    const fs::path root(argv[1]);
    try {
        criterion_5();
        criterion_6();
        criterion_7();
        criterion_8();
        criteria_1_2_4(root);
        criterion_3(root);
    } catch (const std::exception& e) {
        std::cerr << "FAIL: unhandled exception: " << e.what() << "\n";
        return 1;
    }
    return g_failures == 0 ? 0 : 1;
}

#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "crowdguard/attack.hpp"
#include "crowdguard/config.hpp"
#include "crowdguard/data.hpp"
#include "crowdguard/ensemble.hpp"
#include "crowdguard/eval.hpp"
#include "crowdguard/lfc.hpp"
#include "crowdguard/serialize.hpp"
#include "crowdguard/ssl_train.hpp"

namespace crowdguard {

struct ExperimentReport {
    nlohmann::json config_echo;
    std::vector<RunResult> runs;

    std::vector<double> collect(const std::function<double(const RunResult&)>& f) const {
        std::vector<double> out;
        out.reserve(runs.size());
        for (const auto& r : runs) out.push_back(f(r));
        return out;
    }
};

inline std::pair<LabeledDataset, LabeledDataset> load_dataset(const DatasetConfig& cfg,
                                                              std::uint32_t seed) {
    if (cfg.type == "idx") {
        auto train = load_idx(cfg.train_images, cfg.train_labels);
        auto test = load_idx(cfg.test_images, cfg.test_labels);
        // keep label ranges consistent across the pair
        const int classes = std::max(train.num_classes, test.num_classes);
        train.num_classes = classes;
        test.num_classes = classes;
        auto limit = [](LabeledDataset& ds, int n) {
            if (n > 0 && n < ds.size()) {
                std::vector<int> idx(static_cast<std::size_t>(n));
                std::iota(idx.begin(), idx.end(), 0);
                ds = ds.subset(idx);
            }
        };
        limit(train, cfg.train_limit);
        limit(test, cfg.test_limit);
        return {std::move(train), std::move(test)};
    }
    auto train = gen_synthetic(cfg.synthetic, seed);
    SyntheticSpec test_spec = cfg.synthetic;
    test_spec.samples_per_class = cfg.synthetic_test_per_class;
    auto test = gen_synthetic(test_spec, seed + 1);
    return {std::move(train), std::move(test)};
}

namespace detail {

inline std::uint32_t mix_seed(std::uint32_t seed, std::uint32_t salt) {
    std::uint32_t x = seed ^ (salt * 0x9E3779B9u);
    x ^= x >> 16;
    x *= 0x45D9F3Bu;
    x ^= x >> 16;
    return x;
}

inline ModelRunMetrics evaluate_model(const std::function<std::vector<int>(const Tensor&)>& predict_fn,
                                      const LabeledDataset& clean_test,
                                      const std::vector<std::pair<AdversaryConfig, TriggerSpec>>& advs,
                                      std::uint32_t run_seed) {
    ModelRunMetrics m;
    auto clean_pred = predict_fn(clean_test.images);
    m.clean_accuracy = accuracy(clean_pred, clean_test.labels);
    m.clean_confusion = confusion_matrix(clean_pred, clean_test.labels, clean_test.num_classes);
    for (std::size_t k = 0; k < advs.size(); ++k) {
        const auto& [acfg, trigger] = advs[k];
        auto adv_test = make_adversarial_testset(clean_test, trigger,
                                                 mix_seed(run_seed, 1000 + static_cast<std::uint32_t>(k)));
        auto pred = predict_fn(adv_test.images);
        AdversaryMetrics am;
        am.contributor_id = acfg.contributor_id;
        am.target_class = acfg.target_class;
        am.adversarial_accuracy = accuracy(pred, adv_test.labels);
        am.attack_success = attack_success_rate(pred, adv_test.labels, acfg.target_class);
        am.confusion = confusion_matrix(pred, adv_test.labels, adv_test.num_classes);
        m.adversarial.push_back(std::move(am));
    }
    return m;
}

inline nlohmann::json confusion_to_json(const std::vector<std::vector<long>>& m) {
    return nlohmann::json(m);
}

}  // namespace detail

// One full run of the two-step protocol: partition, poison, train the
// contributor-agnostic baseline and the contributor-aware ensemble, then
// evaluate both on the clean test set and on each adversary's triggered copy.
inline RunResult execute_run(const ExperimentConfig& cfg, const LabeledDataset& train,
                             const LabeledDataset& test, int run_index, int workers) {
    RunResult result;
    result.run_index = run_index;
    const std::uint32_t run_seed = cfg.seed + static_cast<std::uint32_t>(run_index);
    result.seed = run_seed;

    std::vector<int> adv_ids;
    for (const auto& a : cfg.adversaries) adv_ids.push_back(a.contributor_id);
    auto partition = partition_contributors(train.size(), cfg.contributors, adv_ids, cfg.adversary_share,
                                            run_seed);

    // resolve triggers against the dataset geometry
    std::vector<std::pair<AdversaryConfig, TriggerSpec>> advs;
    for (std::size_t k = 0; k < cfg.adversaries.size(); ++k)
        advs.emplace_back(cfg.adversaries[k],
                          build_trigger(cfg.adversaries[k].trigger, train.height(), train.width(),
                                        train.channels(), static_cast<int>(k)));

    // poison each adversary's contribution in place on a shared copy; the
    // baseline and the ensemble consume the identical poisoned data
    LabeledDataset poisoned = train;
    const long m = train.image_numel();
    for (std::size_t k = 0; k < advs.size(); ++k) {
        const auto& [acfg, trigger] = advs[k];
        AdversaryProfile profile;
        profile.contributor_id = acfg.contributor_id;
        profile.trigger = trigger;
        profile.target_class = acfg.target_class;
        profile.poison_fraction = acfg.poison_fraction;
        const auto& idx = partition.assignments.at(acfg.contributor_id);
        auto sub = poisoned.subset(idx);
        auto bad = poison_contribution(sub, profile, detail::mix_seed(run_seed, static_cast<std::uint32_t>(k)));
        for (std::size_t i = 0; i < idx.size(); ++i) {
            std::copy_n(&bad.images.data[i * static_cast<std::size_t>(m)], m,
                        &poisoned.images.data[static_cast<std::size_t>(idx[i]) * m]);
            poisoned.labels[static_cast<std::size_t>(idx[i])] = bad.labels[i];
        }
    }

    // contributor-agnostic baseline on the concatenated poisoned data
    auto baseline_params =
        train_supervised(cfg.arch, poisoned, cfg.supervised, run_seed, cfg.supervised_augment_shift);
    auto baseline_fn = [&](const Tensor& images) {
        return predict_batched(cfg.arch, baseline_params, images).labels;
    };
    result.baseline = detail::evaluate_model(baseline_fn, test, advs, run_seed);

    // contributor-aware ensemble
    auto ensemble = train_contributor_ensemble(poisoned, partition, cfg.arch, cfg.ssl, run_seed, workers);
    auto aggregator = make_aggregator(cfg.aggregator);
    auto ensemble_fn = [&](const Tensor& images) {
        return ensemble_predict(collect_votes(ensemble, images), aggregator);
    };
    result.ensemble = detail::evaluate_model(ensemble_fn, test, advs, run_seed);

    // per-member agreement between clean and triggered predictions
    auto clean_votes = collect_votes(ensemble, test.images);
    for (std::size_t k = 0; k < advs.size(); ++k) {
        auto adv_test = make_adversarial_testset(test, advs[k].second,
                                                 detail::mix_seed(run_seed, 1000 + static_cast<std::uint32_t>(k)));
        auto adv_votes = collect_votes(ensemble, adv_test.images);
        for (int col = 0; col < clean_votes.num_voters; ++col) {
            int agree = 0;
            for (int i = 0; i < clean_votes.num_samples; ++i)
                if (clean_votes.label(i, col) == adv_votes.label(i, col)) ++agree;
            MemberAgreement ma;
            ma.contributor_id = clean_votes.member_ids[static_cast<std::size_t>(col)];
            ma.adversary_id = advs[k].first.contributor_id;
            ma.agreement_rate = static_cast<double>(agree) / clean_votes.num_samples;
            result.member_agreement.push_back(ma);
        }
    }

    if (cfg.save_models) {
        namespace fs = std::filesystem;
        fs::create_directories(fs::path(cfg.output_dir) / "models");
        save_ensemble(ensemble, (fs::path(cfg.output_dir) / "models" /
                                 ("ensemble_run" + std::to_string(run_index) + ".bin"))
                                    .string());
    }
    return result;
}

namespace detail {

inline nlohmann::json model_metrics_json(const ModelRunMetrics& m) {
    nlohmann::json j;
    j["clean_accuracy"] = m.clean_accuracy;
    j["clean_confusion"] = confusion_to_json(m.clean_confusion);
    j["adversarial"] = nlohmann::json::array();
    for (const auto& a : m.adversarial) {
        nlohmann::json ja;
        ja["contributor_id"] = a.contributor_id;
        ja["target_class"] = a.target_class;
        ja["adversarial_accuracy"] = a.adversarial_accuracy;
        ja["attack_success_rate"] = a.attack_success;
        ja["confusion"] = confusion_to_json(a.confusion);
        j["adversarial"].push_back(std::move(ja));
    }
    return j;
}

inline nlohmann::json summary_json(const std::vector<double>& values) {
    auto s = summarize(values);
    nlohmann::json j;
    j["mean"] = s.mean;
    j["ci95_half_width"] = s.ci_half_width;
    j["values"] = values;
    return j;
}

}  // namespace detail

inline nlohmann::json report_to_json(const ExperimentConfig& cfg, const ExperimentReport& report) {
    nlohmann::json j;
    j["schema_version"] = kConfigSchemaVersion;
    j["config"] = report.config_echo;
    j["runs"] = nlohmann::json::array();
    for (const auto& r : report.runs) {
        nlohmann::json jr;
        jr["run_index"] = r.run_index;
        jr["seed"] = r.seed;
        jr["baseline"] = detail::model_metrics_json(r.baseline);
        jr["ensemble"] = detail::model_metrics_json(r.ensemble);
        jr["member_agreement"] = nlohmann::json::array();
        for (const auto& ma : r.member_agreement) {
            nlohmann::json jm;
            jm["member_id"] = ma.contributor_id;
            jm["adversary_id"] = ma.adversary_id;
            jm["agreement_rate"] = ma.agreement_rate;
            jr["member_agreement"].push_back(std::move(jm));
        }
        j["runs"].push_back(std::move(jr));
    }

    nlohmann::json sum;
    sum["baseline_clean_accuracy"] =
        detail::summary_json(report.collect([](const RunResult& r) { return r.baseline.clean_accuracy; }));
    sum["ensemble_clean_accuracy"] =
        detail::summary_json(report.collect([](const RunResult& r) { return r.ensemble.clean_accuracy; }));
    sum["adversaries"] = nlohmann::json::array();
    for (std::size_t k = 0; k < cfg.adversaries.size(); ++k) {
        nlohmann::json ja;
        ja["contributor_id"] = cfg.adversaries[k].contributor_id;
        ja["target_class"] = cfg.adversaries[k].target_class;
        ja["baseline_adversarial_accuracy"] = detail::summary_json(
            report.collect([k](const RunResult& r) { return r.baseline.adversarial[k].adversarial_accuracy; }));
        ja["baseline_attack_success_rate"] = detail::summary_json(
            report.collect([k](const RunResult& r) { return r.baseline.adversarial[k].attack_success; }));
        ja["ensemble_adversarial_accuracy"] = detail::summary_json(
            report.collect([k](const RunResult& r) { return r.ensemble.adversarial[k].adversarial_accuracy; }));
        ja["ensemble_attack_success_rate"] = detail::summary_json(
            report.collect([k](const RunResult& r) { return r.ensemble.adversarial[k].attack_success; }));
        sum["adversaries"].push_back(std::move(ja));
    }
    j["summary"] = std::move(sum);
    return j;
}

// Flat table in the layout of the paper-style accuracy tables.
inline std::string render_table(const nlohmann::json& report) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(2);
    const auto& sum = report.at("summary");
    auto pct = [](const nlohmann::json& s) {
        std::ostringstream cell;
        cell << std::fixed << std::setprecision(2) << 100.0 * s.at("mean").get<double>();
        if (s.at("values").size() > 1)
            cell << " +- " << std::setprecision(2) << 100.0 * s.at("ci95_half_width").get<double>();
        return cell.str();
    };
    os << "Model           Clean";
    const auto& advs = sum.at("adversaries");
    for (std::size_t k = 0; k < advs.size(); ++k) os << "  Adv." << (k + 1) << " acc  Adv." << (k + 1) << " ASR";
    os << "\n";
    os << "baseline        " << pct(sum.at("baseline_clean_accuracy"));
    for (const auto& a : advs)
        os << "  " << pct(a.at("baseline_adversarial_accuracy")) << "  "
           << pct(a.at("baseline_attack_success_rate"));
    os << "\n";
    os << "contributor-aware  " << pct(sum.at("ensemble_clean_accuracy"));
    for (const auto& a : advs)
        os << "  " << pct(a.at("ensemble_adversarial_accuracy")) << "  "
           << pct(a.at("ensemble_attack_success_rate"));
    os << "\n";
    return os.str();
}

inline void write_confusion_grid(const std::string& path, const std::vector<std::vector<long>>& m) {
    std::ofstream out(path);
    for (const auto& row : m) {
        for (std::size_t j = 0; j < row.size(); ++j) out << (j ? " " : "") << row[j];
        out << "\n";
    }
}

// Execute all runs and write report.json, table.txt, and confusion grids.
// Takes the config by value: the arch geometry follows the dataset unless
// pinned in the config.
inline ExperimentReport run_experiment(ExperimentConfig cfg, int workers = 1) {
    namespace fs = std::filesystem;
    auto [train, test] = load_dataset(cfg.dataset, cfg.seed);
    train.validate();
    test.validate();
    if (cfg.arch.num_classes != train.num_classes)
        throw ConfigError("config: arch.num_classes (" + std::to_string(cfg.arch.num_classes) +
                          ") does not match dataset classes (" + std::to_string(train.num_classes) + ")");
    if (cfg.arch.input_h == 0) {
        cfg.arch.input_h = train.height();
        cfg.arch.input_w = train.width();
        cfg.arch.input_c = train.channels();
    }
    cfg.validate();
    fs::create_directories(cfg.output_dir);

    ExperimentReport report;
    report.config_echo = cfg.raw;
    for (int r = 0; r < cfg.runs; ++r) report.runs.push_back(execute_run(cfg, train, test, r, workers));

    auto j = report_to_json(cfg, report);
    {
        std::ofstream out((fs::path(cfg.output_dir) / "report.json").string());
        out << j.dump(2) << "\n";
    }
    {
        std::ofstream out((fs::path(cfg.output_dir) / "table.txt").string());
        out << render_table(j);
    }
    for (const auto& r : report.runs) {
        const std::string prefix = (fs::path(cfg.output_dir) / ("confusion_run" + std::to_string(r.run_index))).string();
        write_confusion_grid(prefix + "_baseline_clean.txt", r.baseline.clean_confusion);
        write_confusion_grid(prefix + "_ensemble_clean.txt", r.ensemble.clean_confusion);
        for (std::size_t k = 0; k < r.baseline.adversarial.size(); ++k) {
            write_confusion_grid(prefix + "_baseline_adv" + std::to_string(k + 1) + ".txt",
                                 r.baseline.adversarial[k].confusion);
            write_confusion_grid(prefix + "_ensemble_adv" + std::to_string(k + 1) + ".txt",
                                 r.ensemble.adversarial[k].confusion);
        }
    }
    return report;
}

// Write clean/triggered sample pairs per adversary as PGM files.
inline std::vector<std::string> preview_poison(const ExperimentConfig& cfg, int count) {
    if (cfg.adversaries.empty()) throw ConfigError("poison-preview: no adversaries configured");
    namespace fs = std::filesystem;
    fs::create_directories(cfg.output_dir);
    auto [train, test] = load_dataset(cfg.dataset, cfg.seed);
    (void)test;
    if (train.channels() != 1) throw ConfigError("poison-preview: PGM output requires grayscale data");

    auto write_pgm = [&](const std::string& path, const float* img, int h, int w) {
        std::ofstream out(path, std::ios::binary);
        out << "P5\n" << w << " " << h << "\n255\n";
        for (long i = 0; i < static_cast<long>(h) * w; ++i) {
            auto byte = static_cast<unsigned char>(
                std::lround(std::clamp(img[i], 0.0f, 1.0f) * 255.0f));
            out.write(reinterpret_cast<const char*>(&byte), 1);
        }
    };

    std::vector<std::string> written;
    const long m = train.image_numel();
    for (std::size_t k = 0; k < cfg.adversaries.size(); ++k) {
        auto trigger = build_trigger(cfg.adversaries[k].trigger, train.height(), train.width(),
                                     train.channels(), static_cast<int>(k));
        for (int i = 0; i < count; ++i) {
            const int src = i % train.size();
            Tensor img({train.height(), train.width(), 1});
            std::copy_n(&train.images.data[static_cast<std::size_t>(src) * m], m, img.data.begin());
            Tensor triggered = apply_trigger(img, trigger, cfg.seed + static_cast<std::uint32_t>(i));
            const std::string tag =
                "adv" + std::to_string(cfg.adversaries[k].contributor_id) + "_" + std::to_string(i);
            const std::string clean_path = (fs::path(cfg.output_dir) / ("clean_" + tag + ".pgm")).string();
            const std::string trig_path = (fs::path(cfg.output_dir) / ("triggered_" + tag + ".pgm")).string();
            write_pgm(clean_path, img.data.data(), train.height(), train.width());
            write_pgm(trig_path, triggered.data.data(), train.height(), train.width());
            written.push_back(clean_path);
            written.push_back(trig_path);
        }
    }
    return written;
}

}  // namespace crowdguard

// Command-line runner for the contributor-aware training experiments.
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "crowdguard/experiment.hpp"

namespace {

crowdguard::ExperimentConfig load_and_override(const std::string& config_path, const std::string& out,
                                               std::int64_t seed) {
    auto cfg = crowdguard::load_config(config_path);
    if (!out.empty()) cfg.output_dir = out;
    if (seed >= 0) cfg.seed = static_cast<std::uint32_t>(seed);
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"contributor-aware defense against trigger-poisoned training data"};
    app.require_subcommand(1);

    std::string config_path, out_dir;
    std::int64_t seed = -1;
    int workers = 1;

    auto add_common = [&](CLI::App* sub, bool needs_config) {
        auto* opt = sub->add_option("--config", config_path, "path to a JSON experiment config");
        if (needs_config) opt->required();
        sub->add_option("--out", out_dir, "output directory (overrides the config)");
        sub->add_option("--seed", seed, "base seed (overrides the config)");
    };

    auto* run = app.add_subcommand("run", "train and evaluate baseline + contributor ensemble");
    add_common(run, true);
    run->add_option("--workers", workers, "parallel member-training workers")->check(CLI::PositiveNumber);

    auto* preview = app.add_subcommand("poison-preview", "write clean/triggered sample image pairs");
    add_common(preview, true);
    int preview_count = 4;
    preview->add_option("--count", preview_count, "samples per adversary")->check(CLI::PositiveNumber);

    auto* report = app.add_subcommand("report", "re-render table.txt from an existing report.json");
    std::string report_path;
    report->add_option("--report", report_path, "path to report.json")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            auto cfg = load_and_override(config_path, out_dir, seed);
            auto result = crowdguard::run_experiment(cfg, workers);
            std::cout << crowdguard::render_table(crowdguard::report_to_json(cfg, result));
            std::cout << "report written to " << cfg.output_dir << "/report.json\n";
        } else if (preview->parsed()) {
            auto cfg = load_and_override(config_path, out_dir, seed);
            auto files = crowdguard::preview_poison(cfg, preview_count);
            for (const auto& f : files) std::cout << f << "\n";
        } else if (report->parsed()) {
            std::ifstream in(report_path);
            if (!in) throw crowdguard::DataError("report: cannot open " + report_path);
            nlohmann::json j;
            in >> j;
            std::cout << crowdguard::render_table(j);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

#pragma once

#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "crowdguard/attack.hpp"
#include "crowdguard/data.hpp"
#include "crowdguard/errors.hpp"
#include "crowdguard/nn.hpp"
#include "crowdguard/ssl_train.hpp"

namespace crowdguard {

constexpr int kConfigSchemaVersion = 1;

struct DatasetConfig {
    std::string type;  // "idx" | "synthetic"
    // idx
    std::string train_images, train_labels, test_images, test_labels;
    int train_limit = 0;  // 0 = all
    int test_limit = 0;
    // synthetic
    SyntheticSpec synthetic;
    int synthetic_test_per_class = 25;
};

struct TriggerConfig {
    std::string pattern = "solid";  // solid | checker | cross | file
    int size = 3;
    float intensity = 1.0f;
    std::string placement = "bottom-right";
    int offset_row = 0, offset_col = 0;
    std::vector<int> region;  // [top,left,bottom,right]; empty = central 50%
    std::string file;         // PGM path when pattern == "file"
};

struct AdversaryConfig {
    int contributor_id = 1;
    int target_class = 0;
    double poison_fraction = 1.0;
    TriggerConfig trigger;
};

struct ExperimentConfig {
    DatasetConfig dataset;
    int contributors = 5;
    double adversary_share = 0.10;  // fraction of the training set per adversary
    std::vector<AdversaryConfig> adversaries;
    ClassifierArch arch;
    SgdHyper supervised;
    int supervised_augment_shift = 0;
    SslHyper ssl;
    std::string aggregator = "majority";
    int runs = 1;
    std::uint32_t seed = 42;
    std::string output_dir = "out";
    bool save_models = false;
    nlohmann::json raw;  // config echo for reports

    void validate() const {
        if (runs < 1) throw ConfigError("config: runs must be >= 1");
        if (contributors < 2) throw ConfigError("config: need at least 2 contributors");
        if (static_cast<int>(adversaries.size()) >= contributors)
            throw ConfigError("config: adversary count must be < contributors");
        for (const auto& adv : adversaries) {
            if (adv.contributor_id < 1 || adv.contributor_id > contributors)
                throw ConfigError("config: adversary contributor_id out of range");
            if (adv.target_class < 0 || adv.target_class >= arch.num_classes)
                throw ConfigError("config: adversary target class out of range");
        }
        supervised.validate();
        ssl.validate();
        arch.validate();
    }
};

namespace detail {

// Minimal PGM reader (P5 binary or P2 ascii), grayscale in [0,1].
inline Tensor load_pgm_patch(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("pgm: cannot open " + path);
    std::string magic;
    in >> magic;
    if (magic != "P5" && magic != "P2") throw DataError("pgm: unsupported format in " + path);
    auto skip_comments = [&] {
        in >> std::ws;
        while (in.peek() == '#') {
            std::string line;
            std::getline(in, line);
            in >> std::ws;
        }
    };
    skip_comments();
    int w, h, maxval;
    in >> w;
    skip_comments();
    in >> h;
    skip_comments();
    in >> maxval;
    if (w < 1 || h < 1 || maxval < 1) throw DataError("pgm: bad header in " + path);
    Tensor patch({h, w, 1});
    if (magic == "P5") {
        in.get();  // single whitespace after header
        std::vector<unsigned char> raw(static_cast<std::size_t>(w) * h);
        if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size())))
            throw DataError("pgm: truncated file: " + path);
        for (std::size_t i = 0; i < raw.size(); ++i)
            patch.data[i] = static_cast<float>(raw[i]) / static_cast<float>(maxval);
    } else {
        for (auto& v : patch.data) {
            int x;
            if (!(in >> x)) throw DataError("pgm: truncated file: " + path);
            v = static_cast<float>(x) / static_cast<float>(maxval);
        }
    }
    return patch;
}

inline Corner parse_corner(const std::string& s) {
    if (s == "top-left") return Corner::TopLeft;
    if (s == "top-right") return Corner::TopRight;
    if (s == "bottom-left") return Corner::BottomLeft;
    if (s == "bottom-right") return Corner::BottomRight;
    throw ConfigError("config: unknown corner placement '" + s + "'");
}

}  // namespace detail

// Resolve a trigger config against concrete image dimensions.
inline TriggerSpec build_trigger(const TriggerConfig& cfg, int img_h, int img_w, int img_c,
                                 int adversary_index) {
    TriggerSpec t;
    t.trigger_id = cfg.pattern + "-" + std::to_string(adversary_index);
    if (cfg.pattern == "file") {
        t.patch = detail::load_pgm_patch(cfg.file);
        if (img_c != 1) throw ConfigError("config: PGM triggers require single-channel images");
    } else {
        TriggerSpec base;
        if (cfg.pattern == "solid")
            base = default_trigger(0, img_c, cfg.size, cfg.intensity);
        else if (cfg.pattern == "checker")
            base = default_trigger(1, img_c, cfg.size, cfg.intensity);
        else if (cfg.pattern == "cross")
            base = default_trigger(2, img_c, cfg.size, cfg.intensity);
        else
            throw ConfigError("config: unknown trigger pattern '" + cfg.pattern + "'");
        t.patch = base.patch;
    }
    if (cfg.placement == "offset") {
        t.placement = TriggerPlacement::FixedOffset;
        t.offset_row = cfg.offset_row;
        t.offset_col = cfg.offset_col;
    } else if (cfg.placement == "random-in-region") {
        t.placement = TriggerPlacement::RandomInRegion;
        if (cfg.region.size() == 4) {
            t.region_top = cfg.region[0];
            t.region_left = cfg.region[1];
            t.region_bottom = cfg.region[2];
            t.region_right = cfg.region[3];
        } else {
            // central 50% of the image
            t.region_top = img_h / 4;
            t.region_left = img_w / 4;
            t.region_bottom = img_h - img_h / 4;
            t.region_right = img_w - img_w / 4;
        }
    } else {
        t.placement = TriggerPlacement::FixedCorner;
        t.corner = detail::parse_corner(cfg.placement);
    }
    t.validate(img_h, img_w, img_c);
    return t;
}

inline ExperimentConfig parse_config(const nlohmann::json& j) {
    ExperimentConfig cfg;
    cfg.raw = j;
    if (!j.contains("schema_version") || j.at("schema_version").get<int>() != kConfigSchemaVersion)
        throw ConfigError("config: missing or unsupported schema_version (expected " +
                          std::to_string(kConfigSchemaVersion) + ")");

    const auto& jd = j.at("dataset");
    cfg.dataset.type = jd.at("type").get<std::string>();
    if (cfg.dataset.type == "idx") {
        cfg.dataset.train_images = jd.at("train_images").get<std::string>();
        cfg.dataset.train_labels = jd.at("train_labels").get<std::string>();
        cfg.dataset.test_images = jd.at("test_images").get<std::string>();
        cfg.dataset.test_labels = jd.at("test_labels").get<std::string>();
        cfg.dataset.train_limit = jd.value("train_limit", 0);
        cfg.dataset.test_limit = jd.value("test_limit", 0);
    } else if (cfg.dataset.type == "synthetic") {
        cfg.dataset.synthetic.num_classes = jd.value("num_classes", 4);
        cfg.dataset.synthetic.samples_per_class = jd.value("train_per_class", 100);
        cfg.dataset.synthetic.image_side = jd.value("image_side", 12);
        cfg.dataset.synthetic.noise_sigma = jd.value("noise_sigma", 0.1f);
        cfg.dataset.synthetic.blob_intensity = jd.value("blob_intensity", 0.9f);
        cfg.dataset.synthetic_test_per_class = jd.value("test_per_class", 25);
    } else {
        throw ConfigError("config: dataset.type must be 'idx' or 'synthetic'");
    }

    cfg.contributors = j.value("contributors", 5);
    cfg.adversary_share = j.value("adversary_share", 0.10);
    if (j.contains("adversaries")) {
        int idx = 0;
        for (const auto& ja : j.at("adversaries")) {
            AdversaryConfig a;
            a.contributor_id = ja.at("contributor_id").get<int>();
            a.target_class = ja.at("target_class").get<int>();
            a.poison_fraction = ja.value("poison_fraction", 1.0);
            if (ja.contains("trigger")) {
                const auto& jt = ja.at("trigger");
                a.trigger.pattern = jt.value("pattern", "solid");
                a.trigger.size = jt.value("size", 3);
                a.trigger.intensity = jt.value("intensity", 1.0f);
                a.trigger.placement = jt.value("placement", "bottom-right");
                a.trigger.offset_row = jt.value("offset_row", 0);
                a.trigger.offset_col = jt.value("offset_col", 0);
                a.trigger.file = jt.value("file", std::string{});
                if (jt.contains("region")) a.trigger.region = jt.at("region").get<std::vector<int>>();
            } else {
                // per-adversary defaults: distinct corners and patterns
                const char* patterns[] = {"solid", "checker", "cross"};
                const char* corners[] = {"bottom-right", "bottom-left", "top-right"};
                a.trigger.pattern = patterns[idx % 3];
                a.trigger.placement = corners[idx % 3];
            }
            cfg.adversaries.push_back(a);
            ++idx;
        }
    }

    const auto& jarch = j.at("arch");
    const auto kind = jarch.at("kind").get<std::string>();
    if (kind == "mlp")
        cfg.arch.kind = ArchKind::Mlp;
    else if (kind == "small-conv")
        cfg.arch.kind = ArchKind::SmallConv;
    else
        throw ConfigError("config: arch.kind must be 'mlp' or 'small-conv'");
    if (jarch.contains("hidden_sizes")) cfg.arch.hidden_sizes = jarch.at("hidden_sizes").get<std::vector<int>>();
    if (jarch.contains("conv_layers"))
        for (const auto& jc : jarch.at("conv_layers"))
            cfg.arch.conv_layers.push_back({jc.at("channels").get<int>(), jc.value("stride", 1)});
    cfg.arch.num_classes = jarch.value("num_classes", 10);

    auto parse_sgd = [](const nlohmann::json& js, SgdHyper& h) {
        h.learning_rate = js.value("learning_rate", 0.02f);
        h.momentum = js.value("momentum", 0.9f);
        h.weight_decay = js.value("weight_decay", 0.0f);
        h.epochs = js.value("epochs", 10);
        h.batch_size = js.value("batch_size", 64);
    };
    if (j.contains("supervised")) {
        parse_sgd(j.at("supervised"), cfg.supervised);
        cfg.supervised_augment_shift = j.at("supervised").value("augment_shift", 0);
    }
    if (j.contains("ssl")) {
        const auto& js = j.at("ssl");
        parse_sgd(js, cfg.ssl.base);
        cfg.ssl.base.epochs = js.value("epochs_per_round", 3);
        cfg.ssl.warmup_epochs = js.value("warmup_epochs", 10);
        cfg.ssl.confidence_threshold = js.value("confidence_threshold", 0.95f);
        cfg.ssl.unlabeled_weight = js.value("unlabeled_weight", 1.0f);
        cfg.ssl.rounds = js.value("rounds", 3);
        cfg.ssl.augment_shift = js.value("augment_shift", 0);
    }

    cfg.aggregator = j.value("aggregator", "majority");
    if (cfg.aggregator != "majority" && cfg.aggregator != "weighted-majority")
        throw ConfigError("config: unknown aggregator '" + cfg.aggregator + "'");
    cfg.runs = j.value("runs", 1);
    cfg.seed = j.value("seed", 42u);
    cfg.output_dir = j.value("output_dir", "out");
    cfg.save_models = j.value("save_models", false);
    return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config: parse error in " + path + ": " + e.what());
    }
    try {
        return parse_config(j);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config: " + path + ": " + e.what());
    }
}

}  // namespace crowdguard

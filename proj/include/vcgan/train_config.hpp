#pragma once

// Training configuration and its flat "key = value" text form.

#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "vcgan/discriminator.hpp"
#include "vcgan/errors.hpp"
#include "vcgan/generator.hpp"
#include "vcgan/losses.hpp"

namespace vcgan {

enum class LrSchedule { constant, halve_after, halve_every };

inline LrSchedule parse_lr_schedule(const std::string& s) {
    if (s == "constant") return LrSchedule::constant;
    if (s == "halve_after") return LrSchedule::halve_after;
    if (s == "halve_every") return LrSchedule::halve_every;
    throw UsageError("unknown lr_schedule '" + s + "'");
}

inline const char* to_string(LrSchedule s) {
    switch (s) {
        case LrSchedule::constant: return "constant";
        case LrSchedule::halve_after: return "halve_after";
        case LrSchedule::halve_every: return "halve_every";
    }
    return "constant";
}

/// Learning rate at a 0-based epoch. halve_after: base until `epochs`
/// epochs have passed, then base/2. halve_every: base * 0.5^floor(epoch/epochs).
inline double scheduled_lr(double base, LrSchedule schedule, int64_t halve_epochs, int64_t epoch) {
    switch (schedule) {
        case LrSchedule::constant: return base;
        case LrSchedule::halve_after: return epoch >= halve_epochs ? base * 0.5 : base;
        case LrSchedule::halve_every: return base * std::pow(0.5, static_cast<double>(epoch / halve_epochs));
    }
    return base;
}

struct TrainConfig {
    int stage = 1;
    int64_t epochs = 20;
    int64_t steps_per_epoch = 0;  // 0: derived from dataset size and batch size
    int64_t max_steps = 0;        // 0: no cap beyond epochs
    int64_t batch_size = 1;
    int window_T = 5;
    double lr_g = 2e-4;
    double lr_d = 5e-5;
    LrSchedule lr_schedule = LrSchedule::halve_after;
    int64_t lr_halve_epochs = 10;
    double adam_beta1 = 0.5;
    double adam_beta2 = 0.999;
    LossWeights weights;
    TemporalOptions temporal;
    double alpha = 50.0;
    uint64_t seed = 1;
    int64_t checkpoint_every = 0;  // steps; 0 disables periodic checkpoints
    GeneratorConfig generator;
    DiscriminatorConfig discriminator;

    /// Defaults of each stage: stage 1 at lr 2e-4 halved after 10 epochs;
    /// stage 2 at lr 5e-5 for both networks, halved every 100 epochs.
    static TrainConfig defaults_for(int stage) {
        TrainConfig c;
        c.stage = stage;
        if (stage == 2) {
            c.epochs = 500;
            c.lr_g = 5e-5;
            c.lr_d = 5e-5;
            c.lr_schedule = LrSchedule::halve_every;
            c.lr_halve_epochs = 100;
        }
        return c;
    }

    double lr_g_at(int64_t epoch) const { return scheduled_lr(lr_g, lr_schedule, lr_halve_epochs, epoch); }
    double lr_d_at(int64_t epoch) const { return scheduled_lr(lr_d, lr_schedule, lr_halve_epochs, epoch); }

    void validate() const {
        if (stage != 1 && stage != 2) throw UsageError("stage must be 1 or 2");
        if (epochs < 1) throw UsageError("epochs must be >= 1");
        if (batch_size < 1) throw UsageError("batch_size must be >= 1");
        if (stage == 2 && window_T < 3) throw UsageError("window_T must be >= 3 for stage 2");
        if (!(lr_g > 0) || !(lr_d > 0)) throw UsageError("learning rates must be positive");
        if (lr_halve_epochs < 1) throw UsageError("lr_halve_epochs must be >= 1");
        if (adam_beta1 < 0 || adam_beta1 >= 1 || adam_beta2 < 0 || adam_beta2 >= 1) {
            throw UsageError("adam betas must be in [0, 1)");
        }
        if (!(alpha > 0)) throw UsageError("alpha must be positive");
        weights.validate();
        generator.validate();
        discriminator.validate();
    }
};

namespace detail {

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
    if (v == "0" || v == "false" || v == "no" || v == "off") return false;
    throw UsageError("key '" + key + "': expected a boolean, got '" + v + "'");
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
    std::istringstream is(v);
    T out{};
    is >> out;
    if (!is || !is.eof()) throw UsageError("key '" + key + "': cannot parse '" + v + "'");
    return out;
}

inline std::string format_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

inline std::vector<int64_t> parse_int_list(const std::string& key, const std::string& v) {
    std::vector<int64_t> out;
    std::string item;
    std::istringstream is(v);
    while (std::getline(is, item, ',')) {
        if (!item.empty()) out.push_back(parse_number<int64_t>(key, item));
    }
    return out;
}

inline std::string format_int_list(const std::vector<int64_t>& v) {
    std::string s;
    for (size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s;
}

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

struct ConfigKey {
    std::string name;
    std::function<void(TrainConfig&, const std::string&)> set;
    std::function<std::string(const TrainConfig&)> get;
};

#define VCGAN_NUM_KEY(key, field, type)                                                                       \
    ConfigKey {                                                                                               \
        key, [](TrainConfig& c, const std::string& v) { c.field = parse_number<type>(key, v); },              \
            [](const TrainConfig& c) { return std::to_string(c.field); }                                      \
    }
#define VCGAN_REAL_KEY(key, field)                                                                            \
    ConfigKey {                                                                                               \
        key, [](TrainConfig& c, const std::string& v) { c.field = parse_number<double>(key, v); },            \
            [](const TrainConfig& c) { return format_double(c.field); }                                       \
    }
#define VCGAN_BOOL_KEY(key, field)                                                                            \
    ConfigKey {                                                                                               \
        key, [](TrainConfig& c, const std::string& v) { c.field = parse_bool(key, v); },                      \
            [](const TrainConfig& c) { return std::string(c.field ? "true" : "false"); }                      \
    }

inline const std::vector<ConfigKey>& config_keys() {
    static const std::vector<ConfigKey> keys = {
        VCGAN_NUM_KEY("stage", stage, int),
        VCGAN_NUM_KEY("epochs", epochs, int64_t),
        VCGAN_NUM_KEY("steps_per_epoch", steps_per_epoch, int64_t),
        VCGAN_NUM_KEY("max_steps", max_steps, int64_t),
        VCGAN_NUM_KEY("batch_size", batch_size, int64_t),
        VCGAN_NUM_KEY("window_T", window_T, int),
        VCGAN_REAL_KEY("lr_g", lr_g),
        VCGAN_REAL_KEY("lr_d", lr_d),
        ConfigKey{"lr_schedule", [](TrainConfig& c, const std::string& v) { c.lr_schedule = parse_lr_schedule(v); },
                  [](const TrainConfig& c) { return std::string(to_string(c.lr_schedule)); }},
        VCGAN_NUM_KEY("lr_halve_epochs", lr_halve_epochs, int64_t),
        VCGAN_REAL_KEY("adam_beta1", adam_beta1),
        VCGAN_REAL_KEY("adam_beta2", adam_beta2),
        VCGAN_REAL_KEY("lambda_1", weights.l1),
        VCGAN_REAL_KEY("lambda_p", weights.perceptual),
        VCGAN_REAL_KEY("lambda_G", weights.gan),
        VCGAN_REAL_KEY("lambda_st", weights.short_term),
        VCGAN_REAL_KEY("lambda_dlt", weights.long_term),
        ConfigKey{"long_term_mode",
                  [](TrainConfig& c, const std::string& v) { c.temporal.long_term_mode = parse_long_term_mode(v); },
                  [](const TrainConfig& c) { return std::string(to_string(c.temporal.long_term_mode)); }},
        VCGAN_BOOL_KEY("normalize_by_pairs", temporal.normalize_by_pairs),
        VCGAN_REAL_KEY("alpha", alpha),
        VCGAN_NUM_KEY("seed", seed, uint64_t),
        VCGAN_NUM_KEY("checkpoint_every", checkpoint_every, int64_t),
        VCGAN_NUM_KEY("height", generator.height, int64_t),
        VCGAN_NUM_KEY("width", generator.width, int64_t),
        VCGAN_NUM_KEY("base_channels", generator.base_channels, int64_t),
        VCGAN_NUM_KEY("depth", generator.depth, int64_t),
        VCGAN_NUM_KEY("extractor_base", generator.extractor_base, int64_t),
        VCGAN_NUM_KEY("extractor_channels", generator.extractor_channels, int64_t),
        VCGAN_NUM_KEY("extractor_blocks", generator.extractor_blocks, int64_t),
        ConfigKey{"nonlocal_positions",
                  [](TrainConfig& c, const std::string& v) {
                      c.generator.nonlocal_positions = parse_int_list("nonlocal_positions", v);
                  },
                  [](const TrainConfig& c) { return format_int_list(c.generator.nonlocal_positions); }},
        VCGAN_BOOL_KEY("use_gfe", generator.use_global_extractor),
        VCGAN_BOOL_KEY("use_pfe", generator.use_placeholder_extractor),
        VCGAN_NUM_KEY("disc_base_channels", discriminator.base_channels, int64_t),
        VCGAN_NUM_KEY("disc_downsamples", discriminator.num_downsamples, int64_t),
        VCGAN_NUM_KEY("power_iterations", discriminator.power_iterations, int),
    };
    return keys;
}

#undef VCGAN_NUM_KEY
#undef VCGAN_REAL_KEY
#undef VCGAN_BOOL_KEY

}  // namespace detail

/// Applies one "key=value" assignment; unknown keys are rejected.
inline void apply_setting(TrainConfig& config, const std::string& key, const std::string& value) {
    for (const auto& k : detail::config_keys()) {
        if (k.name == key) {
            k.set(config, detail::trim(value));
            return;
        }
    }
    throw UsageError("unknown config key '" + key + "'");
}

inline void apply_assignment(TrainConfig& config, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw UsageError("expected key=value, got '" + assignment + "'");
    apply_setting(config, detail::trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

// Lines of "key = value"; '#' starts a comment.
inline void apply_config_text(TrainConfig& config, const std::string& text) {
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        try {
            apply_assignment(config, line);
        } catch (const UsageError& e) {
            throw UsageError("config line " + std::to_string(lineno) + ": " + e.what());
        }
    }
}

inline void apply_config_file(TrainConfig& config, const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot read config file " + path.string());
    std::stringstream ss;
    ss << is.rdbuf();
    apply_config_text(config, ss.str());
}

/// Every key with its resolved value, in a fixed order.
inline std::string to_config_text(const TrainConfig& config) {
    std::string out;
    for (const auto& k : detail::config_keys()) out += k.name + " = " + k.get(config) + "\n";
    return out;
}

inline nlohmann::json to_json(const TrainConfig& config) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& k : detail::config_keys()) j[k.name] = k.get(config);
    return j;
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
    TrainConfig c;
    for (const auto& [key, value] : j.items()) apply_setting(c, key, value.get<std::string>());
    return c;
}

}  // namespace vcgan

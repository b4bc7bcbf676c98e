#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "pvclust/agglomerative.hpp"
#include "pvclust/csv.hpp"
#include "pvclust/distance.hpp"
#include "pvclust/errors.hpp"
#include "pvclust/evaluation.hpp"
#include "pvclust/synthgen.hpp"

namespace pvclust {

// Every key in the config file maps 1:1 onto a command-line flag of the same
// name; flags win over file values. Unknown keys are rejected.
struct RunConfig {
    // paths
    std::string data;      // wide series CSV
    std::string metadata;  // system metadata CSV
    std::string out = ".";  // output directory

    // pipeline
    std::size_t profile_len = 96;
    std::size_t k = 8;
    std::size_t w = 100;
    std::size_t c = 8;
    double alpha = 0.0;  // 0 = unset, resolved to 1/K
    Metric metric = Metric::sym_kl;
    Linkage linkage = Linkage::average;
    std::vector<double> quantiles = {0.05, 0.10, 0.25, 0.40, 0.50, 0.60, 0.75, 0.90, 0.95};
    CapacityMode capacity_mode = CapacityMode::metadata;
    bool sensitivity = true;
    bool baseline = false;  // also run the angle k-means baseline in cluster
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::size_t jobs = 1;
    bool timings = false;  // record wall times in the grid ledger

    // impute
    std::string impute_system;
    double impute_q = 0.5;

    // synth block
    SynthConfig synth;

    // grid block
    std::vector<std::size_t> grid_c = {4, 6, 8, 10, 12, 16};
    std::vector<std::size_t> grid_k = {3, 5, 8, 12, 20};
    std::vector<std::size_t> grid_w = {50, 100, 200, 400};
    std::vector<Metric> grid_metrics = {Metric::sym_kl, Metric::bhattacharyya};
    std::vector<Linkage> grid_linkages = {Linkage::average, Linkage::complete};
    std::vector<std::uint64_t> grid_seeds;  // empty = use the run seed

    double resolved_alpha() const {
        return alpha > 0.0 ? alpha : 1.0 / static_cast<double>(k);
    }
};

namespace detail {

inline std::size_t config_count(const std::string& key, const std::string& value,
                                std::size_t min_value) {
    std::int64_t v;
    if (!csv::parse_int(value, v) || v < static_cast<std::int64_t>(min_value))
        throw ConfigError(key + " must be an integer >= " + std::to_string(min_value) +
                          ", got '" + value + "'");
    return static_cast<std::size_t>(v);
}

inline double config_real(const std::string& key, const std::string& value) {
    double v;
    if (!csv::parse_double(value, v))
        throw ConfigError(key + " must be a number, got '" + value + "'");
    return v;
}

inline bool config_flag(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw ConfigError(key + " must be true or false, got '" + value + "'");
}

template <typename T, typename Fn>
inline std::vector<T> config_list(const std::string& key, const std::string& value, Fn parse) {
    std::vector<T> out;
    for (const auto& item : csv::split(value)) {
        const std::string cell(csv::trim(item));
        if (cell.empty()) throw ConfigError(key + ": empty list entry");
        out.push_back(parse(cell));
    }
    if (out.empty()) throw ConfigError(key + ": list must be non-empty");
    return out;
}

} // namespace detail

// Applies one key=value pair with validation. Both the file loader and the
// CLI flag layer funnel through here so the two never drift apart.
inline void apply_config_key(RunConfig& cfg, const std::string& key, const std::string& value) {
    using detail::config_count;
    using detail::config_flag;
    using detail::config_list;
    using detail::config_real;
    if (key == "data") cfg.data = value;
    else if (key == "metadata") cfg.metadata = value;
    else if (key == "out") cfg.out = value;
    else if (key == "profile_len") cfg.profile_len = config_count(key, value, 1);
    else if (key == "k") cfg.k = config_count(key, value, 2);
    else if (key == "w") cfg.w = config_count(key, value, 2);
    else if (key == "c") cfg.c = config_count(key, value, 1);
    else if (key == "alpha") {
        cfg.alpha = config_real(key, value);
        if (!(cfg.alpha > 0.0)) throw ConfigError("alpha must be > 0");
    } else if (key == "metric") cfg.metric = metric_from_name(value);
    else if (key == "linkage") cfg.linkage = linkage_from_name(value);
    else if (key == "quantiles") {
        cfg.quantiles = config_list<double>(
            key, value, [&](const std::string& s) { return config_real(key, s); });
        try {
            check_quantile_levels(cfg.quantiles);
        } catch (const DataError& e) {
            throw ConfigError(e.what());
        }
    } else if (key == "capacity_mode") cfg.capacity_mode = capacity_mode_from_name(value);
    else if (key == "sensitivity") cfg.sensitivity = config_flag(key, value);
    else if (key == "baseline") cfg.baseline = config_flag(key, value);
    else if (key == "seed") {
        std::int64_t v;
        if (!csv::parse_int(value, v)) throw ConfigError("seed must be an integer");
        cfg.seed = static_cast<std::uint64_t>(v);
        cfg.seed_set = true;
    } else if (key == "jobs") cfg.jobs = config_count(key, value, 1);
    else if (key == "timings") cfg.timings = config_flag(key, value);
    else if (key == "impute_system") cfg.impute_system = value;
    else if (key == "impute_q") {
        cfg.impute_q = config_real(key, value);
        if (!(cfg.impute_q > 0.0) || !(cfg.impute_q < 1.0))
            throw ConfigError("impute_q must lie in (0, 1)");
    } else if (key == "synth_u") cfg.synth.u = config_count(key, value, 2);
    else if (key == "synth_days") cfg.synth.days = config_count(key, value, 1);
    else if (key == "synth_groups") cfg.synth.groups = config_count(key, value, 2);
    else if (key == "synth_resolution") cfg.synth.resolution = config_count(key, value, 1);
    else if (key == "synth_missing_day_rate") {
        cfg.synth.missing_day_rate = config_real(key, value);
    } else if (key == "synth_missing_cell_rate") {
        cfg.synth.missing_cell_rate = config_real(key, value);
    } else if (key == "synth_outage_start") cfg.synth.outage_start = config_count(key, value, 0);
    else if (key == "synth_outage_end") cfg.synth.outage_end = config_count(key, value, 0);
    else if (key == "synth_angles") cfg.synth.angle_coupling = angle_coupling_from_name(value);
    else if (key == "grid_c") {
        cfg.grid_c = config_list<std::size_t>(
            key, value, [&](const std::string& s) { return config_count(key, s, 1); });
    } else if (key == "grid_k") {
        cfg.grid_k = config_list<std::size_t>(
            key, value, [&](const std::string& s) { return config_count(key, s, 2); });
    } else if (key == "grid_w") {
        cfg.grid_w = config_list<std::size_t>(
            key, value, [&](const std::string& s) { return config_count(key, s, 2); });
    } else if (key == "grid_metrics") {
        cfg.grid_metrics = config_list<Metric>(
            key, value, [](const std::string& s) { return metric_from_name(s); });
    } else if (key == "grid_linkages") {
        cfg.grid_linkages = config_list<Linkage>(
            key, value, [](const std::string& s) { return linkage_from_name(s); });
    } else if (key == "grid_seeds") {
        cfg.grid_seeds = config_list<std::uint64_t>(key, value, [&](const std::string& s) {
            std::int64_t v;
            if (!csv::parse_int(s, v)) throw ConfigError("grid_seeds: bad integer '" + s + "'");
            return static_cast<std::uint64_t>(v);
        });
    } else {
        throw ConfigError("unknown config key '" + key + "'");
    }
}

// key=value lines; blank lines and #-comments ignored.
inline void load_config_file(RunConfig& cfg, const std::string& path) {
    for (const auto& raw : csv::read_lines(path)) {
        const std::string line(csv::trim(raw));
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + ": expected key=value, got '" + line + "'");
        const std::string key(csv::trim(line.substr(0, eq)));
        const std::string value(csv::trim(line.substr(eq + 1)));
        apply_config_key(cfg, key, value);
    }
}

} // namespace pvclust

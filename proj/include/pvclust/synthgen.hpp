#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "pvclust/csv.hpp"
#include "pvclust/errors.hpp"
#include "pvclust/rng.hpp"
#include "pvclust/series.hpp"
#include "pvclust/timegrid.hpp"

namespace pvclust {

enum class AngleCoupling { coupled, decoupled };

inline std::string angle_coupling_name(AngleCoupling a) {
    return a == AngleCoupling::coupled ? "coupled" : "decoupled";
}

inline AngleCoupling angle_coupling_from_name(std::string_view name) {
    if (name == "coupled") return AngleCoupling::coupled;
    if (name == "decoupled") return AngleCoupling::decoupled;
    throw ConfigError("unknown angle coupling '" + std::string(name) +
                      "' (expected coupled or decoupled)");
}

struct SynthConfig {
    std::size_t u = 60;            // systems
    std::size_t days = 120;
    std::size_t groups = 3;        // behavior groups
    std::size_t resolution = 15;   // minutes per timestep
    double missing_day_rate = 0.0;
    double missing_cell_rate = 0.0;  // sub-day gaps, off by default
    std::size_t outage_start = 0;    // half-open day window applied fleet-wide
    std::size_t outage_end = 0;
    AngleCoupling angle_coupling = AngleCoupling::coupled;
    std::uint64_t seed = 0;
};

struct SynthOutput {
    RawSeriesTable table;
    MetadataSet meta;
    std::vector<int> groups;  // ground-truth group per system
};

inline void validate_synth_config(const SynthConfig& cfg) {
    if (cfg.groups < 2) throw ConfigError("synth: groups must be >= 2");
    if (cfg.u < cfg.groups) throw ConfigError("synth: systems must be >= groups");
    if (cfg.days < 1) throw ConfigError("synth: days must be >= 1");
    if (cfg.resolution < 1 || cfg.resolution > 1440 || 1440 % cfg.resolution != 0)
        throw ConfigError("synth: resolution must divide 1440 minutes");
    if (cfg.missing_day_rate < 0.0 || cfg.missing_day_rate >= 1.0)
        throw ConfigError("synth: missing_day_rate must lie in [0, 1)");
    if (cfg.missing_cell_rate < 0.0 || cfg.missing_cell_rate >= 1.0)
        throw ConfigError("synth: missing_cell_rate must lie in [0, 1)");
    if (cfg.outage_start > cfg.outage_end || cfg.outage_end > cfg.days)
        throw ConfigError("synth: outage window must satisfy 0 <= start <= end <= days");
}

namespace detail {

// Group archetype at hour h: truncated-cosine daylight bell, peak shifted per
// group, with a group-specific shading notch. Exactly 0 outside daylight.
inline double archetype_value(std::size_t group, std::size_t n_groups, double hour) {
    const double spread =
        n_groups > 1 ? static_cast<double>(group) / static_cast<double>(n_groups - 1) : 0.0;
    const double center = 12.0 + (-1.5 + 3.0 * spread);  // peak hour
    const double half_width = 6.0;                       // 12 h of daylight
    const double x = (hour - center) / half_width;       // [-1, 1] inside daylight
    if (x <= -1.0 || x >= 1.0) return 0.0;
    double v = 0.9 * std::cos(0.5 * 3.14159265358979323846 * x);
    const double notch_center = 9.0 + 6.0 * spread;      // notch sweeps morning -> afternoon
    if (std::abs(hour - notch_center) <= 0.75) v *= 0.6;
    return v;
}

} // namespace detail

// Fully deterministic per seed: weather comes from one child stream, each
// system from its own, so generation parallelizes without changing output.
inline SynthOutput generate(const SynthConfig& cfg) {
    validate_synth_config(cfg);
    const std::size_t per_day = 1440 / cfg.resolution;
    const std::size_t t_len = cfg.days * per_day;
    const std::int64_t step_s = static_cast<std::int64_t>(cfg.resolution) * 60;
    const std::int64_t start_ts = days_from_civil(2024, 1, 1) * 86400;

    Rng root(cfg.seed);
    Rng weather_rng = root.child(0);
    std::vector<double> weather(cfg.days);
    for (std::size_t d = 0; d < cfg.days; ++d) weather[d] = 1.0 - 0.9 * weather_rng.uniform();

    SynthOutput out;
    out.table.step_seconds = step_s;
    out.table.timestamps.resize(t_len);
    for (std::size_t t = 0; t < t_len; ++t)
        out.table.timestamps[t] = start_ts + static_cast<std::int64_t>(t) * step_s;
    out.table.values.assign(cfg.u * t_len, 0.0);

    int id_width = 1;
    for (std::size_t v = cfg.u; v >= 10; v /= 10) ++id_width;

    const std::size_t g_count = cfg.groups;
    for (std::size_t u = 0; u < cfg.u; ++u) {
        std::string id = std::to_string(u + 1);
        while (static_cast<int>(id.size()) < id_width) id.insert(id.begin(), '0');
        out.table.system_ids.push_back("sys" + id);

        const std::size_t group = u % g_count;
        out.groups.push_back(static_cast<int>(group));

        Rng rng = root.child(u + 1);
        SystemMetadata meta;
        meta.system_id = out.table.system_ids.back();
        meta.capacity_wp = rng.uniform(1500.0, 6000.0);
        const std::size_t angle_slot =
            cfg.angle_coupling == AngleCoupling::coupled
                ? group
                : static_cast<std::size_t>(rng.below(g_count));
        const double slot_spread =
            g_count > 1 ? static_cast<double>(angle_slot) / static_cast<double>(g_count - 1)
                        : 0.0;
        meta.tilt_deg = 20.0 + 30.0 * slot_spread + 2.0 * rng.normal();
        meta.azimuth_deg = 120.0 + 120.0 * slot_spread + 2.0 * rng.normal();
        meta.tilt_deg = std::min(90.0, std::max(0.0, meta.tilt_deg));
        if (meta.azimuth_deg < 0.0) meta.azimuth_deg += 360.0;
        if (meta.azimuth_deg >= 360.0) meta.azimuth_deg -= 360.0;
        out.meta.push_back(meta);

        double* row = out.table.values.data() + u * t_len;
        for (std::size_t d = 0; d < cfg.days; ++d) {
            const bool outage = d >= cfg.outage_start && d < cfg.outage_end;
            const bool day_missing =
                cfg.missing_day_rate > 0.0 && rng.uniform() < cfg.missing_day_rate;
            for (std::size_t s = 0; s < per_day; ++s) {
                const std::size_t t = d * per_day + s;
                if (outage || day_missing) {
                    row[t] = kMissing;
                    continue;
                }
                if (cfg.missing_cell_rate > 0.0 && rng.uniform() < cfg.missing_cell_rate) {
                    row[t] = kMissing;
                    continue;
                }
                const double hour =
                    static_cast<double>(s) * static_cast<double>(cfg.resolution) / 60.0;
                const double base = detail::archetype_value(group, g_count, hour);
                if (base == 0.0) {
                    row[t] = 0.0;
                    continue;
                }
                double noise = 1.0 + 0.05 * rng.normal();
                noise = std::min(1.3, std::max(0.7, noise));
                row[t] = meta.capacity_wp * weather[d] * base * noise;
            }
        }
    }
    return out;
}

inline void save_groups(const std::vector<std::string>& system_ids,
                        const std::vector<int>& groups, const std::string& path) {
    if (system_ids.size() != groups.size())
        throw DataError("save_groups: id count does not match group count");
    std::string out = "system_id,group\n";
    for (std::size_t i = 0; i < system_ids.size(); ++i) {
        out += system_ids[i];
        out += ',';
        out += std::to_string(groups[i]);
        out += '\n';
    }
    csv::write_file(path, out);
}

inline std::vector<std::pair<std::string, int>> load_groups(const std::string& path) {
    const auto lines = csv::read_lines(path);
    if (lines.empty() || csv::trim(lines[0]) != "system_id,group")
        throw DataError(path + ": expected header 'system_id,group'");
    std::vector<std::pair<std::string, int>> out;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const auto cells = csv::split(lines[i]);
        if (cells.size() != 2)
            throw DataError(path + ": row " + std::to_string(i + 1) + " needs 2 columns");
        out.emplace_back(std::string(csv::trim(cells[0])),
                         static_cast<int>(csv::require_int(cells[1], path)));
    }
    if (out.empty()) throw DataError(path + ": no rows");
    return out;
}

} // namespace pvclust

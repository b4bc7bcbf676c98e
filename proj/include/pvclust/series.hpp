#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "pvclust/csv.hpp"
#include "pvclust/errors.hpp"
#include "pvclust/timegrid.hpp"

namespace pvclust {

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

inline bool is_missing(double v) { return std::isnan(v); }

// Per-system power series on a shared, fixed-resolution time grid.
// values is U x T row-major (one row per system); missing cells are NaN.
struct RawSeriesTable {
    std::vector<std::string> system_ids;
    std::vector<std::int64_t> timestamps;  // epoch seconds, strictly increasing
    std::int64_t step_seconds = 0;
    std::vector<double> values;

    std::size_t n_systems() const { return system_ids.size(); }
    std::size_t n_steps() const { return timestamps.size(); }

    double at(std::size_t u, std::size_t t) const { return values[u * n_steps() + t]; }
    double& at(std::size_t u, std::size_t t) { return values[u * n_steps() + t]; }

    const double* row(std::size_t u) const { return values.data() + u * n_steps(); }
};

struct SystemMetadata {
    std::string system_id;
    double capacity_wp = 0.0;  // peak power, > 0
    double tilt_deg = 0.0;     // [0, 90]
    double azimuth_deg = 0.0;  // [0, 360)
};

using MetadataSet = std::vector<SystemMetadata>;

inline const SystemMetadata* find_metadata(const MetadataSet& meta, const std::string& id) {
    for (const auto& m : meta) {
        if (m.system_id == id) return &m;
    }
    return nullptr;
}

// One entity's complete daily profiles, ready for wording.
struct EntityProfileSet {
    std::string system_id;
    std::size_t profile_len = 0;
    std::vector<double> profiles;   // n_profiles x profile_len
    std::vector<int> day_indices;   // 1-based calendar day ordinals that survived
    std::size_t n_total_days = 0;

    std::size_t n_profiles() const { return day_indices.size(); }
    const double* profile(std::size_t i) const { return profiles.data() + i * profile_len; }
    bool excluded() const { return day_indices.empty(); }  // no complete day at all
};

inline const std::set<std::string>& default_missing_tokens() {
    static const std::set<std::string> tokens = {"", "NaN", "nan"};
    return tokens;
}

// Wide CSV: header "timestamp,<id>,...", one row per instant. A cell is
// missing when its trimmed text is in missing_tokens; otherwise it must be a
// finite, non-negative number.
inline RawSeriesTable load_table(const std::string& path,
                                 const std::set<std::string>& missing_tokens =
                                     default_missing_tokens()) {
    const auto lines = csv::read_lines(path);
    if (lines.size() < 2) throw DataError(path + ": expected a header and at least one row");

    const auto header = csv::split(lines[0]);
    if (header.size() < 2 || csv::trim(header[0]) != "timestamp") {
        throw DataError(path + ": header must be 'timestamp,<system ids...>'");
    }

    RawSeriesTable table;
    std::unordered_set<std::string> seen;
    for (std::size_t c = 1; c < header.size(); ++c) {
        std::string id(csv::trim(header[c]));
        if (id.empty()) throw DataError(path + ": empty system id in header column " + std::to_string(c + 1));
        if (!seen.insert(id).second) {
            throw DataError(path + ": duplicate system id '" + id + "'");
        }
        table.system_ids.push_back(std::move(id));
    }
    if (table.n_systems() < 2) {
        throw DataError(path + ": need at least 2 systems, got " + std::to_string(table.n_systems()));
    }

    const std::size_t n_cols = header.size();
    const std::size_t n_rows = lines.size() - 1;
    table.timestamps.reserve(n_rows);
    std::vector<std::vector<double>> cols(table.n_systems());
    for (auto& c : cols) c.reserve(n_rows);

    for (std::size_t r = 1; r < lines.size(); ++r) {
        const auto cells = csv::split(lines[r]);
        if (cells.size() != n_cols) {
            throw DataError(path + ": row " + std::to_string(r + 1) + " has " +
                            std::to_string(cells.size()) + " cells, expected " +
                            std::to_string(n_cols));
        }
        table.timestamps.push_back(parse_timestamp(csv::trim(cells[0])));
        for (std::size_t c = 1; c < n_cols; ++c) {
            const std::string cell(csv::trim(cells[c]));
            double v;
            if (missing_tokens.count(cell)) {
                v = kMissing;
            } else if (!csv::parse_double(cell, v) || !std::isfinite(v)) {
                throw DataError(path + ": row " + std::to_string(r + 1) + ", column '" +
                                table.system_ids[c - 1] + "': not a number: '" + cell + "'");
            } else if (v < 0.0) {
                throw DataError(path + ": row " + std::to_string(r + 1) + ", column '" +
                                table.system_ids[c - 1] + "': negative value " + cell);
            }
            cols[c - 1].push_back(v);
        }
    }

    if (table.timestamps.size() < 2) throw DataError(path + ": need at least 2 rows");
    table.step_seconds = table.timestamps[1] - table.timestamps[0];
    if (table.step_seconds <= 0) throw DataError(path + ": row 3: timestamps not increasing");
    for (std::size_t t = 1; t < table.timestamps.size(); ++t) {
        if (table.timestamps[t] - table.timestamps[t - 1] != table.step_seconds) {
            throw DataError(path + ": row " + std::to_string(t + 2) +
                            ": timestamp grid is not a constant step");
        }
    }

    table.values.resize(table.n_systems() * table.n_steps());
    for (std::size_t u = 0; u < table.n_systems(); ++u) {
        for (std::size_t t = 0; t < table.n_steps(); ++t) {
            table.at(u, t) = cols[u][t];
        }
    }
    return table;
}

inline void write_table(const RawSeriesTable& table, const std::string& path) {
    std::string out = "timestamp";
    for (const auto& id : table.system_ids) {
        out += ',';
        out += id;
    }
    out += '\n';
    for (std::size_t t = 0; t < table.n_steps(); ++t) {
        out += format_timestamp(table.timestamps[t]);
        for (std::size_t u = 0; u < table.n_systems(); ++u) {
            out += ',';
            const double v = table.at(u, t);
            if (!is_missing(v)) out += csv::format_double(v);
        }
        out += '\n';
    }
    csv::write_file(path, out);
}

inline MetadataSet load_metadata(const std::string& path) {
    const auto lines = csv::read_lines(path);
    if (lines.empty()) throw DataError(path + ": empty metadata file");
    const auto header = csv::split(lines[0]);
    if (header.size() != 4 || csv::trim(header[0]) != "system_id" ||
        csv::trim(header[1]) != "capacity_wp" || csv::trim(header[2]) != "tilt_deg" ||
        csv::trim(header[3]) != "azimuth_deg") {
        throw DataError(path + ": header must be 'system_id,capacity_wp,tilt_deg,azimuth_deg'");
    }
    MetadataSet meta;
    std::unordered_set<std::string> seen;
    for (std::size_t r = 1; r < lines.size(); ++r) {
        if (lines[r].empty()) continue;
        const auto cells = csv::split(lines[r]);
        if (cells.size() != 4) {
            throw DataError(path + ": row " + std::to_string(r + 1) + ": expected 4 cells");
        }
        SystemMetadata m;
        m.system_id = std::string(csv::trim(cells[0]));
        if (!seen.insert(m.system_id).second) {
            throw DataError(path + ": duplicate metadata for system '" + m.system_id + "'");
        }
        if (!csv::parse_double(cells[1], m.capacity_wp) ||
            !csv::parse_double(cells[2], m.tilt_deg) ||
            !csv::parse_double(cells[3], m.azimuth_deg)) {
            throw DataError(path + ": row " + std::to_string(r + 1) + ": bad number");
        }
        if (!(m.capacity_wp > 0.0)) {
            throw DataError(path + ": system '" + m.system_id + "': capacity must be > 0");
        }
        if (m.tilt_deg < 0.0 || m.tilt_deg > 90.0) {
            throw DataError(path + ": system '" + m.system_id + "': tilt out of [0, 90]");
        }
        if (m.azimuth_deg < 0.0 || m.azimuth_deg >= 360.0) {
            throw DataError(path + ": system '" + m.system_id + "': azimuth out of [0, 360)");
        }
        meta.push_back(std::move(m));
    }
    return meta;
}

inline void write_metadata(const MetadataSet& meta, const std::string& path) {
    std::string out = "system_id,capacity_wp,tilt_deg,azimuth_deg\n";
    for (const auto& m : meta) {
        out += m.system_id;
        out += ',';
        out += csv::format_double(m.capacity_wp);
        out += ',';
        out += csv::format_double(m.tilt_deg);
        out += ',';
        out += csv::format_double(m.azimuth_deg);
        out += '\n';
    }
    csv::write_file(path, out);
}

enum class CapacityMode {
    metadata,       // divide by the metadata capacity (default)
    empirical_max,  // divide by each system's observed maximum
};

inline std::string capacity_mode_name(CapacityMode m) {
    return m == CapacityMode::metadata ? "metadata" : "empirical_max";
}

inline CapacityMode capacity_mode_from_name(std::string_view name) {
    if (name == "metadata") return CapacityMode::metadata;
    if (name == "empirical_max") return CapacityMode::empirical_max;
    throw ConfigError("unknown capacity_mode '" + std::string(name) +
                      "' (expected metadata or empirical_max)");
}

// Divides every finite cell by its system's capacity; NaN passes through.
// New table with only the requested system rows, in the given order.
inline RawSeriesTable subset_rows(const RawSeriesTable& table,
                                  const std::vector<std::size_t>& rows) {
    RawSeriesTable out;
    out.timestamps = table.timestamps;
    out.step_seconds = table.step_seconds;
    const std::size_t t_len = table.timestamps.size();
    out.values.reserve(rows.size() * t_len);
    for (std::size_t u : rows) {
        if (u >= table.n_systems()) throw DataError("subset_rows: row index out of range");
        out.system_ids.push_back(table.system_ids[u]);
        const double* r = table.row(u);
        out.values.insert(out.values.end(), r, r + t_len);
    }
    return out;
}

inline RawSeriesTable normalize_by_capacity(const RawSeriesTable& table, const MetadataSet& meta,
                                            CapacityMode mode = CapacityMode::metadata) {
    RawSeriesTable out = table;
    for (std::size_t u = 0; u < table.n_systems(); ++u) {
        double cap;
        if (mode == CapacityMode::metadata) {
            const SystemMetadata* m = find_metadata(meta, table.system_ids[u]);
            if (!m) {
                throw DataError("no metadata record for system '" + table.system_ids[u] + "'");
            }
            cap = m->capacity_wp;
        } else {
            cap = 0.0;
            for (std::size_t t = 0; t < table.n_steps(); ++t) {
                const double v = table.at(u, t);
                if (!is_missing(v) && v > cap) cap = v;
            }
            if (!(cap > 0.0)) {
                throw DataError("system '" + table.system_ids[u] +
                                "': empirical max is not positive, cannot normalize");
            }
        }
        for (std::size_t t = 0; t < table.n_steps(); ++t) {
            if (!is_missing(out.at(u, t))) out.at(u, t) = table.at(u, t) / cap;
        }
    }
    return out;
}

// Splits each system's series into calendar-day profiles and keeps only the
// fully observed days. Day indices are 1-based ordinals from the table start.
inline std::vector<EntityProfileSet> build_profiles(const RawSeriesTable& table,
                                                    std::size_t profile_len) {
    if (profile_len < 1) throw DataError("profile_len must be >= 1");
    const std::size_t T = table.n_steps();
    if (T % profile_len != 0) {
        throw DataError("series length " + std::to_string(T) + " is not divisible by profile_len " +
                        std::to_string(profile_len));
    }
    if (table.step_seconds * static_cast<std::int64_t>(profile_len) != 86400) {
        throw DataError("profile_len " + std::to_string(profile_len) + " at step " +
                        std::to_string(table.step_seconds) + "s does not span one day");
    }
    if (table.timestamps.front() % 86400 != 0) {
        throw DataError("series must start at midnight for calendar-day profiles, starts at " +
                        format_timestamp(table.timestamps.front()));
    }

    const std::size_t n_days = T / profile_len;
    std::vector<EntityProfileSet> out;
    out.reserve(table.n_systems());
    for (std::size_t u = 0; u < table.n_systems(); ++u) {
        EntityProfileSet set;
        set.system_id = table.system_ids[u];
        set.profile_len = profile_len;
        set.n_total_days = n_days;
        const double* row = table.row(u);
        for (std::size_t day = 0; day < n_days; ++day) {
            const double* first = row + day * profile_len;
            bool complete = true;
            for (std::size_t i = 0; i < profile_len; ++i) {
                if (is_missing(first[i])) {
                    complete = false;
                    break;
                }
            }
            if (complete) {
                set.profiles.insert(set.profiles.end(), first, first + profile_len);
                set.day_indices.push_back(static_cast<int>(day + 1));
            }
        }
        out.push_back(std::move(set));
    }
    return out;
}

} // namespace pvclust

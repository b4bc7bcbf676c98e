#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "pvclust/csv.hpp"
#include "pvclust/errors.hpp"
#include "pvclust/series.hpp"
#include "pvclust/timegrid.hpp"

namespace pvclust {

inline void check_quantile_levels(const std::vector<double>& levels) {
    if (levels.empty()) throw DataError("quantile levels must be non-empty");
    double prev = 0.0;
    for (double q : levels) {
        if (!(q > 0.0) || !(q < 1.0))
            throw DataError("quantile levels must lie strictly inside (0, 1)");
        if (!(q > prev)) throw DataError("quantile levels must be strictly increasing");
        prev = q;
    }
}

// Linear interpolation of order statistics: h = (m-1)q + 1 over sorted v_1..v_m.
inline double quantile_from_sorted(const std::vector<double>& sorted, double q) {
    const std::size_t m = sorted.size();
    if (m == 0) return kMissing;
    if (m == 1) return sorted[0];
    const double h = static_cast<double>(m - 1) * q;  // 0-based position
    const std::size_t lo = static_cast<std::size_t>(h);
    const std::size_t hi = std::min(lo + 1, m - 1);
    const double frac = h - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

// Empty input yields the undefined marker (NaN); callers skip such cells.
inline double empirical_quantile(std::vector<double> values, double q) {
    if (!(q > 0.0) || !(q < 1.0))
        throw DataError("empirical_quantile: level must lie in (0, 1)");
    std::sort(values.begin(), values.end());
    return quantile_from_sorted(values, q);
}

struct QuantileSummary {
    int cluster_label = 0;
    std::vector<double> levels;   // strictly increasing, inside (0,1)
    std::vector<double> values;   // T x Q, NaN where undefined
    std::vector<int> coverage;    // members with a finite value per timestep

    std::size_t t_len() const { return coverage.size(); }
    std::size_t q_len() const { return levels.size(); }
    double at(std::size_t t, std::size_t i) const { return values[t * q_len() + i]; }
};

// Per-timestep quantiles over the members' finite values. Timesteps where no
// member has a finite value stay undefined with coverage 0.
inline QuantileSummary summarize_cluster(const RawSeriesTable& table,
                                         const std::vector<std::size_t>& members,
                                         const std::vector<double>& levels,
                                         int cluster_label = 0) {
    if (members.empty()) throw DataError("summarize_cluster: empty member set");
    check_quantile_levels(levels);
    const std::size_t t_len = table.timestamps.size();
    QuantileSummary summary;
    summary.cluster_label = cluster_label;
    summary.levels = levels;
    summary.values.assign(t_len * levels.size(), kMissing);
    summary.coverage.assign(t_len, 0);
    std::vector<double> pool;
    pool.reserve(members.size());
    for (std::size_t t = 0; t < t_len; ++t) {
        pool.clear();
        for (std::size_t u : members) {
            const double v = table.at(u, t);
            if (!is_missing(v)) pool.push_back(v);
        }
        summary.coverage[t] = static_cast<int>(pool.size());
        if (pool.empty()) continue;
        std::sort(pool.begin(), pool.end());
        for (std::size_t i = 0; i < levels.size(); ++i)
            summary.values[t * levels.size() + i] = quantile_from_sorted(pool, levels[i]);
    }
    return summary;
}

// Mean pinball loss over the pairs where both the observation and the summary
// cell are defined; the normalizer is that pair count, not T*Q. Returns NaN
// when nothing is scoreable.
inline double quantile_score(const double* x, std::size_t t_len, const QuantileSummary& y) {
    if (t_len != y.t_len()) throw DataError("quantile_score: series length mismatch");
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t t = 0; t < t_len; ++t) {
        if (is_missing(x[t])) continue;
        for (std::size_t i = 0; i < y.q_len(); ++i) {
            const double v = y.at(t, i);
            if (is_missing(v)) continue;
            const double q = y.levels[i];
            sum += std::max(q * (x[t] - v), (1.0 - q) * (v - x[t]));
            count += 1;
        }
    }
    if (count == 0) return kMissing;
    return sum / static_cast<double>(count);
}

struct ScoreReport {
    double mean = kMissing;
    std::size_t n_scored = 0;
    std::vector<std::string> excluded;  // systems with no scoreable pair
};

namespace detail {

inline std::vector<std::vector<std::size_t>> cluster_members(const std::vector<int>& labels) {
    int c = 0;
    for (int l : labels) {
        if (l < 0) throw DataError("cluster labels must be non-negative");
        c = std::max(c, l + 1);
    }
    std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(c));
    for (std::size_t u = 0; u < labels.size(); ++u)
        members[static_cast<std::size_t>(labels[u])].push_back(u);
    for (const auto& m : members)
        if (m.empty()) throw DataError("cluster labels must be contiguous (empty label)");
    return members;
}

inline ScoreReport mean_of_scores(const RawSeriesTable& table,
                                  const std::vector<double>& per_system) {
    ScoreReport report;
    double sum = 0.0;
    for (std::size_t u = 0; u < per_system.size(); ++u) {
        if (is_missing(per_system[u])) {
            report.excluded.push_back(table.system_ids[u]);
            continue;
        }
        sum += per_system[u];
        report.n_scored += 1;
    }
    if (report.n_scored > 0) report.mean = sum / static_cast<double>(report.n_scored);
    return report;
}

} // namespace detail

// Each system scored against its own cluster's summary, itself included.
inline ScoreReport dispersion_score(const RawSeriesTable& table, const std::vector<int>& labels,
                                    const std::vector<double>& levels) {
    if (labels.size() != table.system_ids.size())
        throw DataError("dispersion_score: label count does not match table");
    const auto members = detail::cluster_members(labels);
    const std::size_t t_len = table.timestamps.size();
    std::vector<double> per_system(labels.size(), kMissing);
    for (std::size_t c = 0; c < members.size(); ++c) {
        const auto summary = summarize_cluster(table, members[c], levels, static_cast<int>(c));
        for (std::size_t u : members[c])
            per_system[u] = quantile_score(table.row(u), t_len, summary);
    }
    return detail::mean_of_scores(table, per_system);
}

// Leave-one-out: each system scored against its cluster's summary recomputed
// without it. Requires every cluster to have at least two members.
inline ScoreReport sensitivity_score(const RawSeriesTable& table, const std::vector<int>& labels,
                                     const std::vector<double>& levels) {
    if (labels.size() != table.system_ids.size())
        throw DataError("sensitivity_score: label count does not match table");
    const auto members = detail::cluster_members(labels);
    for (const auto& m : members) {
        if (m.size() < 2)
            throw DataError("sensitivity_score: at least one cluster with less than two members");
    }
    const std::size_t t_len = table.timestamps.size();
    std::vector<double> per_system(labels.size(), kMissing);
    std::vector<std::size_t> rest;
    for (std::size_t c = 0; c < members.size(); ++c) {
        for (std::size_t u : members[c]) {
            rest.clear();
            for (std::size_t v : members[c])
                if (v != u) rest.push_back(v);
            const auto summary = summarize_cluster(table, rest, levels, static_cast<int>(c));
            per_system[u] = quantile_score(table.row(u), t_len, summary);
        }
    }
    return detail::mean_of_scores(table, per_system);
}

// --- persistence ----------------------------------------------------------

// One file per cluster: timestamp, one column per level, coverage.
inline void save_summary(const QuantileSummary& summary,
                         const std::vector<std::int64_t>& timestamps,
                         const std::string& path) {
    if (timestamps.size() != summary.t_len())
        throw DataError("save_summary: timestamp count does not match summary");
    std::string out = "timestamp";
    for (double q : summary.levels) out += ",q" + csv::format_double(q);
    out += ",coverage\n";
    for (std::size_t t = 0; t < summary.t_len(); ++t) {
        out += format_timestamp(timestamps[t]);
        for (std::size_t i = 0; i < summary.q_len(); ++i) {
            out += ',';
            const double v = summary.at(t, i);
            if (!is_missing(v)) out += csv::format_double(v);
        }
        out += ',';
        out += std::to_string(summary.coverage[t]);
        out += '\n';
    }
    csv::write_file(path, out);
}

inline QuantileSummary load_summary(const std::string& path,
                                    std::vector<std::int64_t>* timestamps_out = nullptr) {
    const auto lines = csv::read_lines(path);
    if (lines.empty()) throw DataError(path + ": empty summary file");
    const auto header = csv::split(lines[0]);
    if (header.size() < 3 || csv::trim(header.front()) != "timestamp" ||
        csv::trim(header.back()) != "coverage") {
        throw DataError(path + ": expected header timestamp,q<levels...>,coverage");
    }
    QuantileSummary summary;
    for (std::size_t i = 1; i + 1 < header.size(); ++i) {
        const auto cell = csv::trim(header[i]);
        if (cell.empty() || cell[0] != 'q')
            throw DataError(path + ": level columns must be named q<level>");
        summary.levels.push_back(csv::require_double(cell.substr(1), path));
    }
    check_quantile_levels(summary.levels);
    const std::size_t q_len = summary.levels.size();
    std::vector<std::int64_t> timestamps;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const auto cells = csv::split(lines[i]);
        if (cells.size() != q_len + 2)
            throw DataError(path + ": row " + std::to_string(i + 1) + " width mismatch");
        timestamps.push_back(parse_timestamp(cells[0]));
        for (std::size_t j = 0; j < q_len; ++j) {
            const auto cell = csv::trim(cells[j + 1]);
            summary.values.push_back(cell.empty() ? kMissing
                                                  : csv::require_double(cell, path));
        }
        const std::int64_t cov = csv::require_int(cells.back(), path);
        if (cov < 0) throw DataError(path + ": negative coverage");
        summary.coverage.push_back(static_cast<int>(cov));
    }
    if (summary.coverage.empty()) throw DataError(path + ": no summary rows");
    if (timestamps_out) *timestamps_out = std::move(timestamps);
    return summary;
}

} // namespace pvclust

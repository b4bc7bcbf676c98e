#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pvclust/csv.hpp"
#include "pvclust/distance.hpp"
#include "pvclust/errors.hpp"
#include "pvclust/kmeans.hpp"
#include "pvclust/series.hpp"

namespace pvclust {

enum class Linkage { average, complete };

inline std::string linkage_name(Linkage l) {
    return l == Linkage::average ? "average" : "complete";
}

inline Linkage linkage_from_name(std::string_view name) {
    if (name == "average") return Linkage::average;
    if (name == "complete") return Linkage::complete;
    throw ConfigError("unknown linkage '" + std::string(name) +
                      "' (expected average or complete)");
}

struct MergeStep {
    std::size_t i = 0;  // surviving slot, i < j
    std::size_t j = 0;  // retired slot
    double height = 0.0;
    std::size_t new_size = 0;
};

struct ClusterAssignment {
    std::vector<int> labels;  // one label in [0, C) per system, input order
    std::size_t c = 0;
    Linkage linkage = Linkage::average;
    std::vector<MergeStep> merge_trace;
};

// Bottom-up merging on a precomputed distance matrix. Cluster slots are the
// original point indices; a merge keeps slot min(i,j) and retires max(i,j).
// Average linkage is size-weighted (UPGMA) via the Lance-Williams update.
inline ClusterAssignment agglomerate(const DistanceMatrix& dist, std::size_t c,
                                     Linkage linkage) {
    const std::size_t u = dist.size();
    if (u == 0) throw DataError("agglomerate: empty distance matrix");
    if (c < 1 || c > u) {
        throw DataError("agglomerate: C=" + std::to_string(c) + " out of range for U=" +
                        std::to_string(u));
    }

    std::vector<double> work(dist.values);
    std::vector<char> active(u, 1);
    std::vector<std::size_t> sizes(u, 1);
    std::vector<std::size_t> slot_of(u);  // point -> current slot
    for (std::size_t p = 0; p < u; ++p) slot_of[p] = p;

    ClusterAssignment out;
    out.c = c;
    out.linkage = linkage;

    std::size_t remaining = u;
    while (remaining > c) {
        std::size_t best_i = u, best_j = u;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < u; ++i) {
            if (!active[i]) continue;
            for (std::size_t j = i + 1; j < u; ++j) {
                if (!active[j]) continue;
                const double d = work[i * u + j];
                if (d < best_d) {  // strict: ties keep the smallest (i, j)
                    best_d = d;
                    best_i = i;
                    best_j = j;
                }
            }
        }
        const std::size_t ni = sizes[best_i], nj = sizes[best_j];
        for (std::size_t k = 0; k < u; ++k) {
            if (!active[k] || k == best_i || k == best_j) continue;
            const double dki = work[k * u + best_i];
            const double dkj = work[k * u + best_j];
            const double d = linkage == Linkage::average
                                 ? (static_cast<double>(ni) * dki +
                                    static_cast<double>(nj) * dkj) /
                                       static_cast<double>(ni + nj)
                                 : std::max(dki, dkj);
            work[k * u + best_i] = d;
            work[best_i * u + k] = d;
        }
        active[best_j] = 0;
        sizes[best_i] = ni + nj;
        for (std::size_t p = 0; p < u; ++p)
            if (slot_of[p] == best_j) slot_of[p] = best_i;
        out.merge_trace.push_back(MergeStep{best_i, best_j, best_d, ni + nj});
        --remaining;
    }

    // labels ordered by each cluster's smallest member index
    out.labels.assign(u, -1);
    int next = 0;
    std::vector<int> slot_label(u, -1);
    for (std::size_t p = 0; p < u; ++p) {
        const std::size_t s = slot_of[p];
        if (slot_label[s] < 0) slot_label[s] = next++;
        out.labels[p] = slot_label[s];
    }
    return out;
}

// Physics baseline: k-means on (tilt, azimuth) pairs in degrees.
inline ClusterAssignment baseline_angle_kmeans(const MetadataSet& meta, std::size_t c,
                                               std::uint64_t seed) {
    if (meta.empty()) throw DataError("baseline_angle_kmeans: no metadata");
    if (c < 1 || c > meta.size()) {
        throw DataError("baseline_angle_kmeans: C=" + std::to_string(c) +
                        " out of range for U=" + std::to_string(meta.size()));
    }
    std::string missing;
    std::vector<double> angles;
    angles.reserve(meta.size() * 2);
    for (const auto& m : meta) {
        if (!std::isfinite(m.tilt_deg) || !std::isfinite(m.azimuth_deg)) {
            if (!missing.empty()) missing += ", ";
            missing += m.system_id;
            continue;
        }
        angles.push_back(m.tilt_deg);
        angles.push_back(m.azimuth_deg);
    }
    if (!missing.empty())
        throw DataError("baseline_angle_kmeans: missing angles for " + missing);

    KMeansParams params;
    params.k = c;
    params.seed = seed;
    KMeansModel km = kmeans_fit(angles, meta.size(), 2, params);

    ClusterAssignment out;
    out.c = c;
    // relabel by first occurrence so label ids are input-order stable
    std::vector<int> relabel(c, -1);
    int next = 0;
    out.labels.reserve(meta.size());
    for (int raw : km.labels) {
        if (relabel[static_cast<std::size_t>(raw)] < 0)
            relabel[static_cast<std::size_t>(raw)] = next++;
        out.labels.push_back(relabel[static_cast<std::size_t>(raw)]);
    }
    return out;
}

// --- persistence ----------------------------------------------------------

inline void save_assignment(const ClusterAssignment& assignment,
                            const std::vector<std::string>& system_ids,
                            const std::string& path) {
    if (assignment.labels.size() != system_ids.size())
        throw DataError("save_assignment: label count does not match system ids");
    std::string out = "system_id,cluster_label\n";
    for (std::size_t i = 0; i < system_ids.size(); ++i) {
        out += system_ids[i];
        out += ',';
        out += std::to_string(assignment.labels[i]);
        out += '\n';
    }
    csv::write_file(path, out);
}

inline std::vector<std::pair<std::string, int>> load_assignment(const std::string& path) {
    const auto lines = csv::read_lines(path);
    if (lines.empty() || csv::trim(lines[0]) != "system_id,cluster_label")
        throw DataError(path + ": expected header 'system_id,cluster_label'");
    std::vector<std::pair<std::string, int>> out;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const auto cells = csv::split(lines[i]);
        if (cells.size() != 2)
            throw DataError(path + ": row " + std::to_string(i + 1) + " needs 2 columns");
        const std::int64_t label = csv::require_int(cells[1], path);
        if (label < 0) throw DataError(path + ": negative cluster label");
        out.emplace_back(csv::trim(cells[0]), static_cast<int>(label));
    }
    if (out.empty()) throw DataError(path + ": no assignment rows");
    return out;
}

inline void save_merge_trace(const std::vector<MergeStep>& trace, const std::string& path) {
    std::string out = "i,j,height,new_size\n";
    for (const auto& step : trace) {
        out += std::to_string(step.i);
        out += ',';
        out += std::to_string(step.j);
        out += ',';
        out += csv::format_double(step.height);
        out += ',';
        out += std::to_string(step.new_size);
        out += '\n';
    }
    csv::write_file(path, out);
}

} // namespace pvclust

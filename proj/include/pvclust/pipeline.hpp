#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "pvclust/agglomerative.hpp"
#include "pvclust/distance.hpp"
#include "pvclust/errors.hpp"
#include "pvclust/evaluation.hpp"
#include "pvclust/lda.hpp"
#include "pvclust/runconfig.hpp"
#include "pvclust/series.hpp"
#include "pvclust/wording.hpp"

namespace pvclust {

struct EmbedResult {
    std::vector<std::size_t> kept_rows;      // table rows with >= 1 complete day
    std::vector<EntityProfileSet> profiles;  // aligned with kept_rows
    std::vector<std::string> excluded;       // systems with no complete day
    Vocabulary vocab;
    bool vocab_cached = false;
    std::vector<EntityDocument> documents;
    LdaModel model;
    std::vector<DirichletEmbedding> embeddings;
};

// ingest -> wording -> topic model -> per-entity gamma. The table must
// already be capacity-normalized. Pass a vocabulary to reuse it instead of
// refitting (its width must match profile_len).
inline EmbedResult embed_fleet(const RawSeriesTable& normalized, const RunConfig& cfg,
                               const Vocabulary* cached_vocab = nullptr) {
    EmbedResult result;
    auto all_profiles = build_profiles(normalized, cfg.profile_len);
    for (std::size_t u = 0; u < all_profiles.size(); ++u) {
        if (all_profiles[u].excluded()) {
            result.excluded.push_back(all_profiles[u].system_id);
        } else {
            result.kept_rows.push_back(u);
            result.profiles.push_back(std::move(all_profiles[u]));
        }
    }
    if (result.profiles.size() < 2)
        throw DataError("embed: need at least 2 systems with complete days");

    if (cached_vocab) {
        if (cached_vocab->profile_len != cfg.profile_len)
            throw DataError("embed: cached vocabulary width does not match profile_len");
        result.vocab = *cached_vocab;
        result.vocab_cached = true;
    } else {
        std::size_t profile_len = 0;
        const auto pooled = pool_profiles(result.profiles, &profile_len);
        result.vocab = fit_vocabulary(pooled, pooled.size() / profile_len, profile_len, cfg.w,
                                      cfg.seed);
    }

    for (const auto& p : result.profiles)
        result.documents.push_back(assign_words(result.vocab, p));
    result.model = fit_lda(result.documents, result.vocab.w, cfg.k, cfg.resolved_alpha(),
                           cfg.seed);
    for (const auto& doc : result.documents)
        result.embeddings.push_back(infer_gamma(result.model, doc));
    return result;
}

struct ClusterResult {
    DistanceMatrix dist;
    ClusterAssignment assignment;
    std::size_t min_cluster_size = 0;
    std::vector<QuantileSummary> summaries;  // one per cluster label
    ScoreReport disp;
    ScoreReport sens;
    bool sens_ran = false;
};

inline std::size_t smallest_cluster(const std::vector<int>& labels, std::size_t c) {
    std::vector<std::size_t> sizes(c, 0);
    for (int l : labels) sizes[static_cast<std::size_t>(l)] += 1;
    std::size_t smallest = labels.size();
    for (std::size_t s : sizes) smallest = std::min(smallest, s);
    return smallest;
}

// distance -> agglomeration -> summaries -> scores. scoring_table holds the
// normalized gap-ridden series of exactly the embedded systems, in embedding
// order. Sensitivity (when requested) requires every cluster to have >= 2
// members and throws the filter message otherwise.
inline ClusterResult cluster_fleet(const std::vector<DirichletEmbedding>& embeddings,
                                   const RawSeriesTable& scoring_table, const RunConfig& cfg) {
    if (scoring_table.n_systems() != embeddings.size())
        throw DataError("cluster: scoring table and embeddings disagree on system count");
    ClusterResult result;
    result.dist = build_distance_matrix(embeddings, cfg.metric);
    result.assignment = agglomerate(result.dist, cfg.c, cfg.linkage);
    result.min_cluster_size = smallest_cluster(result.assignment.labels, cfg.c);
    for (std::size_t label = 0; label < cfg.c; ++label) {
        std::vector<std::size_t> members;
        for (std::size_t u = 0; u < result.assignment.labels.size(); ++u) {
            if (result.assignment.labels[u] == static_cast<int>(label)) members.push_back(u);
        }
        result.summaries.push_back(summarize_cluster(scoring_table, members, cfg.quantiles,
                                                     static_cast<int>(label)));
    }
    result.disp = dispersion_score(scoring_table, result.assignment.labels, cfg.quantiles);
    if (cfg.sensitivity) {
        result.sens = sensitivity_score(scoring_table, result.assignment.labels, cfg.quantiles);
        result.sens_ran = true;
    }
    return result;
}

struct ImputeResult {
    std::string system_id;
    std::vector<std::int64_t> timestamps;
    std::vector<double> values;   // observed kept verbatim, gaps filled where possible
    std::vector<char> imputed;    // 1 where a gap was filled
    std::size_t n_imputed = 0;
    std::size_t n_unfillable = 0;  // gaps with no defined peer quantile
};

// Fills the named system's gaps from its cluster peers' quantile at level q,
// leaving itself out of the summary. Peers are summarized on the normalized
// scale; fills are rescaled back to the system's units.
inline ImputeResult impute_series(const RawSeriesTable& table, const MetadataSet& meta,
                                  const std::vector<std::pair<std::string, int>>& assignment,
                                  const std::string& system_id, double q,
                                  CapacityMode mode = CapacityMode::metadata) {
    std::size_t target = table.n_systems();
    for (std::size_t u = 0; u < table.n_systems(); ++u) {
        if (table.system_ids[u] == system_id) {
            target = u;
            break;
        }
    }
    if (target == table.n_systems())
        throw DataError("impute: system '" + system_id + "' not in the series table");

    int label = -1;
    for (const auto& [id, l] : assignment) {
        if (id == system_id) {
            label = l;
            break;
        }
    }
    if (label < 0)
        throw DataError("impute: system '" + system_id + "' not in the assignment");

    const RawSeriesTable normalized = normalize_by_capacity(table, meta, mode);
    std::vector<std::size_t> peers;
    for (const auto& [id, l] : assignment) {
        if (l != label || id == system_id) continue;
        for (std::size_t u = 0; u < table.n_systems(); ++u) {
            if (table.system_ids[u] == id) {
                peers.push_back(u);
                break;
            }
        }
    }

    double scale;
    if (mode == CapacityMode::metadata) {
        const SystemMetadata* m = find_metadata(meta, system_id);
        if (!m) throw DataError("impute: no metadata record for system '" + system_id + "'");
        scale = m->capacity_wp;
    } else {
        scale = 0.0;
        const double* row = table.row(target);
        for (std::size_t t = 0; t < table.timestamps.size(); ++t)
            if (!is_missing(row[t])) scale = std::max(scale, row[t]);
        if (!(scale > 0.0))
            throw DataError("impute: empirical maximum for '" + system_id + "' is not positive");
    }

    ImputeResult result;
    result.system_id = system_id;
    result.timestamps = table.timestamps;
    const std::size_t t_len = table.timestamps.size();
    const double* row = table.row(target);
    result.values.assign(row, row + t_len);
    result.imputed.assign(t_len, 0);

    QuantileSummary summary;
    if (!peers.empty()) summary = summarize_cluster(normalized, peers, {q}, label);
    for (std::size_t t = 0; t < t_len; ++t) {
        if (!is_missing(row[t])) continue;
        const double fill = peers.empty() ? kMissing : summary.at(t, 0);
        if (is_missing(fill)) {
            result.n_unfillable += 1;
            continue;
        }
        result.values[t] = fill * scale;
        result.imputed[t] = 1;
        result.n_imputed += 1;
    }
    return result;
}

inline void save_imputed(const ImputeResult& result, const std::string& path) {
    std::string out = "timestamp,value,imputed\n";
    for (std::size_t t = 0; t < result.timestamps.size(); ++t) {
        out += format_timestamp(result.timestamps[t]);
        out += ',';
        if (!is_missing(result.values[t])) out += csv::format_double(result.values[t]);
        out += ',';
        out += result.imputed[t] ? '1' : '0';
        out += '\n';
    }
    csv::write_file(path, out);
}

} // namespace pvclust

#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <fstream>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "pvclust/agglomerative.hpp"
#include "pvclust/csv.hpp"
#include "pvclust/distance.hpp"
#include "pvclust/errors.hpp"
#include "pvclust/evaluation.hpp"
#include "pvclust/lda.hpp"
#include "pvclust/pipeline.hpp"
#include "pvclust/runconfig.hpp"
#include "pvclust/series.hpp"
#include "pvclust/wording.hpp"

namespace pvclust {

struct GridSetting {
    std::size_t c = 0;
    std::size_t k = 0;
    std::size_t w = 0;
    Metric metric = Metric::sym_kl;
    Linkage linkage = Linkage::average;
    std::uint64_t seed = 0;
};

// The key doubles as the ledger row prefix, which is what makes resumed runs
// duplicate-free.
inline std::string setting_key(const GridSetting& s) {
    return std::to_string(s.c) + ',' + std::to_string(s.k) + ',' + std::to_string(s.w) + ',' +
           metric_name(s.metric) + ',' + linkage_name(s.linkage) + ',' + std::to_string(s.seed);
}

struct SettingResult {
    GridSetting setting;
    bool valid = false;             // true iff min_cluster_size >= 2 and scores exist
    std::size_t min_cluster_size = 0;
    double s_disp = kMissing;
    double s_sens = kMissing;
    std::string error;              // nonempty when a stage failed
    long long wall_ms = 0;
};

// Nested enumeration: C outermost, then K, W, metric, linkage, seed.
inline std::vector<GridSetting> enumerate_grid(const RunConfig& cfg) {
    std::vector<std::uint64_t> seeds = cfg.grid_seeds;
    if (seeds.empty()) seeds.push_back(cfg.seed);
    std::vector<GridSetting> settings;
    for (std::size_t c : cfg.grid_c)
        for (std::size_t k : cfg.grid_k)
            for (std::size_t w : cfg.grid_w)
                for (Metric metric : cfg.grid_metrics)
                    for (Linkage linkage : cfg.grid_linkages)
                        for (std::uint64_t seed : seeds)
                            settings.push_back(GridSetting{c, k, w, metric, linkage, seed});
    return settings;
}

namespace detail {

// Single-computation memo: the first caller computes, everyone else waits on
// the same future. Values depend only on the key's inputs, so results are
// identical no matter which worker fills the slot.
template <typename T>
class StageMemo {
  public:
    std::shared_ptr<const T> get(const std::string& key,
                                 const std::function<std::shared_ptr<const T>()>& make) {
        std::promise<std::shared_ptr<const T>> promise;
        std::shared_future<std::shared_ptr<const T>> future;
        bool owner = false;
        {
            std::lock_guard<std::mutex> lock(mu_);
            auto it = slots_.find(key);
            if (it == slots_.end()) {
                future = promise.get_future().share();
                slots_.emplace(key, future);
                owner = true;
            } else {
                future = it->second;
            }
        }
        if (owner) {
            try {
                promise.set_value(make());
            } catch (...) {
                promise.set_exception(std::current_exception());
            }
        }
        return future.get();  // rethrows the maker's exception for every user
    }

  private:
    std::mutex mu_;
    std::map<std::string, std::shared_future<std::shared_ptr<const T>>> slots_;
};

struct DocStage {
    Vocabulary vocab;
    std::vector<EntityDocument> documents;
};

inline std::string sanitize_error(std::string msg) {
    for (char& ch : msg)
        if (ch == ',' || ch == '\n' || ch == '\r') ch = ';';
    return msg;
}

} // namespace detail

// Runs every setting: embed (cached per (K, W, seed)), distance (cached per
// metric on top), cluster, score. Failures are recorded per setting and the
// run continues. Worker count never changes any output byte, only wall time.
inline std::vector<SettingResult> run_grid(const std::vector<EntityProfileSet>& profiles,
                                           const RawSeriesTable& scoring_table,
                                           const std::vector<GridSetting>& settings,
                                           double alpha, const std::vector<double>& levels,
                                           std::size_t jobs = 1, bool timings = false) {
    if (profiles.empty()) throw DataError("run_grid: no entity profiles");
    std::size_t profile_len = 0;
    const auto pooled = pool_profiles(profiles, &profile_len);
    const std::size_t m = pooled.size() / profile_len;

    detail::StageMemo<detail::DocStage> doc_memo;
    detail::StageMemo<std::vector<DirichletEmbedding>> emb_memo;
    detail::StageMemo<DistanceMatrix> dist_memo;

    std::vector<SettingResult> results(settings.size());
    const auto run_one = [&](std::size_t idx) {
        const GridSetting& s = settings[idx];
        SettingResult& r = results[idx];
        r.setting = s;
        const auto started = std::chrono::steady_clock::now();
        try {
            const auto docs = doc_memo.get(
                std::to_string(s.w) + ',' + std::to_string(s.seed), [&] {
                    auto stage = std::make_shared<detail::DocStage>();
                    stage->vocab = fit_vocabulary(pooled, m, profile_len, s.w, s.seed);
                    for (const auto& p : profiles)
                        stage->documents.push_back(assign_words(stage->vocab, p));
                    return std::shared_ptr<const detail::DocStage>(stage);
                });
            const double setting_alpha =
                alpha > 0.0 ? alpha : 1.0 / static_cast<double>(s.k);
            const auto embeddings = emb_memo.get(
                std::to_string(s.k) + ',' + std::to_string(s.w) + ',' + std::to_string(s.seed),
                [&] {
                    const LdaModel model = fit_lda(docs->documents, s.w, s.k, setting_alpha,
                                                   s.seed);
                    auto emb = std::make_shared<std::vector<DirichletEmbedding>>();
                    for (const auto& doc : docs->documents)
                        emb->push_back(infer_gamma(model, doc));
                    return std::shared_ptr<const std::vector<DirichletEmbedding>>(emb);
                });
            const auto dist = dist_memo.get(
                std::to_string(s.k) + ',' + std::to_string(s.w) + ',' +
                    std::to_string(s.seed) + ',' + metric_name(s.metric),
                [&] {
                    return std::make_shared<const DistanceMatrix>(
                        build_distance_matrix(*embeddings, s.metric));
                });
            const ClusterAssignment assignment = agglomerate(*dist, s.c, s.linkage);
            r.min_cluster_size = smallest_cluster(assignment.labels, s.c);
            if (r.min_cluster_size >= 2) {
                const ScoreReport disp =
                    dispersion_score(scoring_table, assignment.labels, levels);
                const ScoreReport sens =
                    sensitivity_score(scoring_table, assignment.labels, levels);
                if (disp.n_scored == 0 || sens.n_scored == 0)
                    throw DataError("no scoreable systems");
                r.s_disp = disp.mean;
                r.s_sens = sens.mean;
                r.valid = true;
            }
        } catch (const std::exception& e) {
            r.valid = false;
            r.error = detail::sanitize_error(e.what());
        }
        if (timings) {
            r.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                            std::chrono::steady_clock::now() - started)
                            .count();
        }
    };

    if (jobs <= 1 || settings.size() <= 1) {
        for (std::size_t i = 0; i < settings.size(); ++i) run_one(i);
        return results;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> workers;
    const std::size_t n_workers = std::min(jobs, settings.size());
    workers.reserve(n_workers);
    for (std::size_t t = 0; t < n_workers; ++t) {
        workers.emplace_back([&] {
            while (true) {
                const std::size_t i = next.fetch_add(1);
                if (i >= settings.size()) break;
                run_one(i);
            }
        });
    }
    for (auto& worker : workers) worker.join();
    return results;
}

// --- C selection ----------------------------------------------------------

struct CandidateC {
    std::size_t c = 0;
    std::size_t n_valid = 0;
    double median_disp = 0.0;
    double median_sens = 0.0;
    double objective = 0.0;  // median_disp + |median_disp - median_sens|
};

struct CSelection {
    std::size_t selected_c = 0;
    std::vector<CandidateC> table;  // ascending C, only C values with valid results
};

// Medians pool over every non-C axis; candidates with no valid settings are
// dropped; ties go to the smaller C.
inline CSelection select_c(const std::vector<SettingResult>& results) {
    std::map<std::size_t, std::pair<std::vector<double>, std::vector<double>>> by_c;
    for (const auto& r : results) {
        if (!r.valid) continue;
        by_c[r.setting.c].first.push_back(r.s_disp);
        by_c[r.setting.c].second.push_back(r.s_sens);
    }
    if (by_c.empty()) throw DataError("select_c: no valid grid results");
    CSelection sel;
    double best = 0.0;
    for (auto& [c, scores] : by_c) {
        CandidateC cand;
        cand.c = c;
        cand.n_valid = scores.first.size();
        cand.median_disp = empirical_quantile(scores.first, 0.5);
        cand.median_sens = empirical_quantile(scores.second, 0.5);
        cand.objective = cand.median_disp + std::abs(cand.median_disp - cand.median_sens);
        if (sel.table.empty() || cand.objective < best) {
            best = cand.objective;
            sel.selected_c = c;
        }
        sel.table.push_back(cand);
    }
    return sel;
}

// --- ledger ---------------------------------------------------------------

inline const char* kLedgerHeader = "c,k,w,metric,linkage,seed,valid,min_cluster_size,"
                                   "s_disp,s_sens,wall_ms,error";

inline std::string ledger_row(const SettingResult& r) {
    std::string row = setting_key(r.setting);
    row += ',';
    row += r.valid ? "true" : "false";
    row += ',' + std::to_string(r.min_cluster_size) + ',';
    if (!is_missing(r.s_disp)) row += csv::format_double(r.s_disp);
    row += ',';
    if (!is_missing(r.s_sens)) row += csv::format_double(r.s_sens);
    row += ',' + std::to_string(r.wall_ms) + ',' + r.error;
    return row;
}

// Existing rows survive untouched; new results are appended in setting order.
inline void append_ledger(const std::string& path, const std::vector<SettingResult>& results) {
    bool need_header = true;
    {
        std::ifstream in(path);
        std::string first;
        if (in && std::getline(in, first) && !first.empty()) need_header = false;
    }
    std::string out;
    if (need_header) {
        out += kLedgerHeader;
        out += '\n';
    }
    for (const auto& r : results) {
        out += ledger_row(r);
        out += '\n';
    }
    csv::append_file(path, out);
}

inline std::vector<SettingResult> load_ledger(const std::string& path) {
    const auto lines = csv::read_lines(path);
    if (lines.empty() || csv::trim(lines[0]) != kLedgerHeader)
        throw DataError(path + ": unexpected ledger header");
    std::vector<SettingResult> out;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const auto cells = csv::split(lines[i]);
        if (cells.size() != 12)
            throw DataError(path + ": row " + std::to_string(i + 1) + " needs 12 columns");
        SettingResult r;
        r.setting.c = static_cast<std::size_t>(csv::require_int(cells[0], path));
        r.setting.k = static_cast<std::size_t>(csv::require_int(cells[1], path));
        r.setting.w = static_cast<std::size_t>(csv::require_int(cells[2], path));
        r.setting.metric = metric_from_name(csv::trim(cells[3]));
        r.setting.linkage = linkage_from_name(csv::trim(cells[4]));
        r.setting.seed = static_cast<std::uint64_t>(csv::require_int(cells[5], path));
        const auto valid = csv::trim(cells[6]);
        if (valid != "true" && valid != "false")
            throw DataError(path + ": valid column must be true or false");
        r.valid = valid == "true";
        r.min_cluster_size = static_cast<std::size_t>(csv::require_int(cells[7], path));
        if (!csv::trim(cells[8]).empty()) r.s_disp = csv::require_double(cells[8], path);
        if (!csv::trim(cells[9]).empty()) r.s_sens = csv::require_double(cells[9], path);
        r.wall_ms = csv::require_int(cells[10], path);
        r.error = std::string(csv::trim(cells[11]));
        out.push_back(std::move(r));
    }
    return out;
}

} // namespace pvclust

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "pvclust/csv.hpp"
#include "pvclust/errors.hpp"
#include "pvclust/rng.hpp"
#include "pvclust/special.hpp"
#include "pvclust/wording.hpp"

namespace pvclust {

struct LdaModel {
    std::size_t k = 0;
    std::size_t w = 0;
    double alpha = 0.0;
    std::uint64_t seed = 0;
    std::vector<double> log_topic_word;  // k x w, each row sums to 1 after exp
    std::vector<double> elbo_trace;      // objective after each EM iteration
    std::size_t iterations = 0;

    double log_beta(std::size_t topic, std::size_t word) const {
        return log_topic_word[topic * w + word];
    }
};

struct DirichletEmbedding {
    std::string system_id;
    std::vector<double> gamma;
    std::size_t n_u = 0;
    bool converged = true;
};

namespace detail {

constexpr double kTopicSmoothing = 1e-9;

// (word, count) pairs with ascending word index
using DocCounts = std::vector<std::pair<int, double>>;

inline DocCounts doc_counts(const EntityDocument& doc, std::size_t w, const char* where) {
    DocCounts c;
    for (const auto& [word, count] : doc.counts()) {
        if (word < 0 || static_cast<std::size_t>(word) >= w) {
            throw DataError(std::string(where) + ": word index " + std::to_string(word) +
                            " out of range for W=" + std::to_string(w));
        }
        c.emplace_back(word, static_cast<double>(count));
    }
    return c;
}

// One variational E-step for a single document under fixed topics. gamma is
// both the starting point and the result; phi rows follow counts order.
// Returns true when the mean absolute gamma change fell below tol.
inline bool doc_estep(const LdaModel& model, const DocCounts& counts, std::vector<double>& gamma,
                      std::vector<double>& phi, double tol, std::size_t max_iter) {
    const std::size_t k = model.k;
    phi.assign(counts.size() * k, 0.0);
    if (counts.empty()) {
        gamma.assign(k, model.alpha);
        return true;
    }
    std::vector<double> dig(k), next(k), lp(k);
    for (std::size_t it = 0; it < max_iter; ++it) {
        for (std::size_t t = 0; t < k; ++t) dig[t] = digamma(gamma[t]);
        std::fill(next.begin(), next.end(), model.alpha);
        for (std::size_t i = 0; i < counts.size(); ++i) {
            const auto [word, count] = counts[i];
            double mx = -std::numeric_limits<double>::infinity();
            for (std::size_t t = 0; t < k; ++t) {
                lp[t] = dig[t] + model.log_beta(t, static_cast<std::size_t>(word));
                if (lp[t] > mx) mx = lp[t];
            }
            double sum = 0.0;
            for (std::size_t t = 0; t < k; ++t) sum += std::exp(lp[t] - mx);
            const double lse = mx + std::log(sum);
            for (std::size_t t = 0; t < k; ++t) {
                const double p = std::exp(lp[t] - lse);
                phi[i * k + t] = p;
                next[t] += count * p;
            }
        }
        double change = 0.0;
        for (std::size_t t = 0; t < k; ++t) change += std::abs(next[t] - gamma[t]);
        gamma.swap(next);
        if (change / static_cast<double>(k) < tol) return true;
    }
    return false;
}

// Variational bound contribution of one document given its (gamma, phi).
inline double doc_elbo(const LdaModel& model, const DocCounts& counts,
                       const std::vector<double>& gamma, const std::vector<double>& phi) {
    const std::size_t k = model.k;
    double g0 = 0.0;
    for (double g : gamma) g0 += g;
    const double dig0 = digamma(g0);
    std::vector<double> e_log_theta(k);
    for (std::size_t t = 0; t < k; ++t) e_log_theta[t] = digamma(gamma[t]) - dig0;

    double bound = log_gamma(static_cast<double>(k) * model.alpha) -
                   static_cast<double>(k) * log_gamma(model.alpha);
    bound -= log_gamma(g0);
    for (std::size_t t = 0; t < k; ++t) {
        bound += (model.alpha - 1.0) * e_log_theta[t];
        bound += log_gamma(gamma[t]) - (gamma[t] - 1.0) * e_log_theta[t];
    }
    for (std::size_t i = 0; i < counts.size(); ++i) {
        const auto [word, count] = counts[i];
        for (std::size_t t = 0; t < k; ++t) {
            const double p = phi[i * k + t];
            if (p <= 0.0) continue;
            bound += count * p *
                     (e_log_theta[t] + model.log_beta(t, static_cast<std::size_t>(word)) -
                      std::log(p));
        }
    }
    return bound;
}

} // namespace detail

// Variational EM. The traced objective is the corpus bound plus the
// topic-smoothing prior mass, so the smoothed M-step is its exact argmax and
// the trace is non-decreasing up to rounding.
inline LdaModel fit_lda(const std::vector<EntityDocument>& documents, std::size_t w,
                        std::size_t k, double alpha, std::uint64_t seed,
                        std::size_t max_em_iter = 100, double tol = 1e-6,
                        double gamma_tol = 1e-4, std::size_t gamma_max_iter = 100) {
    if (documents.empty()) throw DataError("fit_lda: empty corpus");
    if (k < 2) throw DataError("fit_lda: K must be >= 2");
    if (!(alpha > 0.0)) throw DataError("fit_lda: alpha must be > 0");
    if (w < 2) throw DataError("fit_lda: W must be >= 2");

    LdaModel model;
    model.k = k;
    model.w = w;
    model.alpha = alpha;
    model.seed = seed;

    std::vector<detail::DocCounts> counts;
    counts.reserve(documents.size());
    for (const auto& doc : documents) counts.push_back(detail::doc_counts(doc, w, "fit_lda"));

    // random positive pseudo-counts, then normalize per topic
    Rng rng(seed);
    model.log_topic_word.assign(k * w, 0.0);
    for (std::size_t t = 0; t < k; ++t) {
        double row_sum = 0.0;
        for (std::size_t v = 0; v < w; ++v) {
            const double c = rng.uniform() + 0.01;
            model.log_topic_word[t * w + v] = c;
            row_sum += c;
        }
        for (std::size_t v = 0; v < w; ++v) {
            model.log_topic_word[t * w + v] =
                std::log(model.log_topic_word[t * w + v]) - std::log(row_sum);
        }
    }

    // per-document gamma kept across EM iterations so every update is a
    // coordinate-ascent step on the same objective
    std::vector<std::vector<double>> gammas(documents.size());
    for (std::size_t d = 0; d < documents.size(); ++d) {
        double n = 0.0;
        for (const auto& [word, count] : counts[d]) n += count;
        gammas[d].assign(k, alpha + n / static_cast<double>(k));
    }
    std::vector<std::vector<double>> phis(documents.size());

    double prev_bound = -std::numeric_limits<double>::infinity();
    std::vector<double> n_kw(k * w);
    for (std::size_t iter = 0; iter < max_em_iter; ++iter) {
        // E-step
        std::fill(n_kw.begin(), n_kw.end(), 0.0);
        for (std::size_t d = 0; d < documents.size(); ++d) {
            detail::doc_estep(model, counts[d], gammas[d], phis[d], gamma_tol, gamma_max_iter);
            for (std::size_t i = 0; i < counts[d].size(); ++i) {
                const auto [word, count] = counts[d][i];
                for (std::size_t t = 0; t < k; ++t)
                    n_kw[t * w + static_cast<std::size_t>(word)] += count * phis[d][i * k + t];
            }
        }
        // M-step with additive smoothing
        for (std::size_t t = 0; t < k; ++t) {
            double row = 0.0;
            for (std::size_t v = 0; v < w; ++v) row += n_kw[t * w + v];
            const double denom =
                std::log(row + static_cast<double>(w) * detail::kTopicSmoothing);
            for (std::size_t v = 0; v < w; ++v) {
                model.log_topic_word[t * w + v] =
                    std::log(n_kw[t * w + v] + detail::kTopicSmoothing) - denom;
            }
        }
        // objective after the M-step
        double bound = 0.0;
        for (std::size_t d = 0; d < documents.size(); ++d)
            bound += detail::doc_elbo(model, counts[d], gammas[d], phis[d]);
        for (double lb : model.log_topic_word) bound += detail::kTopicSmoothing * lb;
        model.elbo_trace.push_back(bound);
        model.iterations = iter + 1;

        if (iter > 0) {
            const double denom = std::max(std::abs(prev_bound), 1e-12);
            if (std::abs(bound - prev_bound) / denom < tol) break;
        }
        prev_bound = bound;
    }
    return model;
}

// Converged variational gamma for one document under fixed topics. Cold start
// from alpha + N/K, so the result is a pure function of (model, document).
inline DirichletEmbedding infer_gamma(const LdaModel& model, const EntityDocument& doc,
                                      double tol = 1e-4, std::size_t max_iter = 100) {
    const auto counts = detail::doc_counts(doc, model.w, "infer_gamma");
    double n = 0.0;
    for (const auto& [word, count] : counts) n += count;
    DirichletEmbedding emb;
    emb.system_id = doc.system_id;
    emb.n_u = doc.size();
    emb.gamma.assign(model.k, model.alpha + n / static_cast<double>(model.k));
    std::vector<double> phi;
    emb.converged = detail::doc_estep(model, counts, emb.gamma, phi, tol, max_iter);
    return emb;
}

inline std::vector<double> dirichlet_variance(const std::vector<double>& gamma) {
    double g0 = 0.0;
    for (double g : gamma) {
        if (!(g > 0.0)) throw DataError("dirichlet_variance: components must be positive");
        g0 += g;
    }
    std::vector<double> var(gamma.size());
    for (std::size_t i = 0; i < gamma.size(); ++i)
        var[i] = gamma[i] * (g0 - gamma[i]) / (g0 * g0 * (g0 + 1.0));
    return var;
}

// --- persistence ----------------------------------------------------------

inline void save_lda_model(const LdaModel& model, const std::string& path) {
    std::string out = "# k=" + std::to_string(model.k) + ",w=" + std::to_string(model.w) +
                      ",alpha=" + csv::format_double(model.alpha) +
                      ",seed=" + std::to_string(model.seed) + "\n";
    for (std::size_t t = 0; t < model.k; ++t) {
        for (std::size_t v = 0; v < model.w; ++v) {
            if (v) out += ',';
            out += csv::format_double(model.log_beta(t, v));
        }
        out += '\n';
    }
    csv::write_file(path, out);
}

inline LdaModel load_lda_model(const std::string& path) {
    const auto lines = csv::read_lines(path);
    if (lines.empty() || lines[0].rfind("# ", 0) != 0)
        throw DataError(path + ": expected '# k=...,w=...,alpha=...,seed=...' header");
    LdaModel model;
    for (const auto& field : csv::split(lines[0].substr(2))) {
        const auto eq = field.find('=');
        if (eq == std::string::npos) throw DataError(path + ": malformed header field");
        const std::string key(csv::trim(field.substr(0, eq)));
        const std::string val(csv::trim(field.substr(eq + 1)));
        if (key == "k") model.k = static_cast<std::size_t>(csv::require_int(val, path));
        else if (key == "w") model.w = static_cast<std::size_t>(csv::require_int(val, path));
        else if (key == "alpha") model.alpha = csv::require_double(val, path);
        else if (key == "seed")
            model.seed = static_cast<std::uint64_t>(csv::require_int(val, path));
        else throw DataError(path + ": unknown header key '" + key + "'");
    }
    if (model.k < 2 || model.w < 2 || !(model.alpha > 0.0))
        throw DataError(path + ": invalid model header");
    model.log_topic_word.reserve(model.k * model.w);
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const auto cells = csv::split(lines[i]);
        if (cells.size() != model.w) throw DataError(path + ": topic row width mismatch");
        for (const auto& cell : cells)
            model.log_topic_word.push_back(csv::require_double(cell, path));
    }
    if (model.log_topic_word.size() != model.k * model.w)
        throw DataError(path + ": expected " + std::to_string(model.k) + " topic rows");
    return model;
}

inline void save_embeddings(const std::vector<DirichletEmbedding>& embeddings,
                            const std::string& path) {
    if (embeddings.empty()) throw DataError("save_embeddings: nothing to write");
    const std::size_t k = embeddings[0].gamma.size();
    std::string out = "system_id";
    for (std::size_t t = 0; t < k; ++t) out += ",gamma_" + std::to_string(t + 1);
    out += ",n_u\n";
    for (const auto& e : embeddings) {
        if (e.gamma.size() != k) throw DataError("save_embeddings: inconsistent K");
        out += e.system_id;
        for (double g : e.gamma) {
            out += ',';
            out += csv::format_double(g);
        }
        out += ',';
        out += std::to_string(e.n_u);
        out += '\n';
    }
    csv::write_file(path, out);
}

inline std::vector<DirichletEmbedding> load_embeddings(const std::string& path) {
    const auto lines = csv::read_lines(path);
    if (lines.empty()) throw DataError(path + ": empty embeddings file");
    const auto header = csv::split(lines[0]);
    if (header.size() < 3 || csv::trim(header.front()) != "system_id" ||
        csv::trim(header.back()) != "n_u") {
        throw DataError(path + ": expected header system_id,gamma_1..gamma_K,n_u");
    }
    const std::size_t k = header.size() - 2;
    for (std::size_t t = 0; t < k; ++t) {
        if (csv::trim(header[t + 1]) != "gamma_" + std::to_string(t + 1))
            throw DataError(path + ": expected column gamma_" + std::to_string(t + 1));
    }
    std::vector<DirichletEmbedding> out;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const auto cells = csv::split(lines[i]);
        if (cells.size() != header.size())
            throw DataError(path + ": row " + std::to_string(i + 1) + " width mismatch");
        DirichletEmbedding e;
        e.system_id = csv::trim(cells[0]);
        for (std::size_t t = 0; t < k; ++t) {
            const double g = csv::require_double(cells[t + 1], path);
            if (!(g > 0.0)) throw DataError(path + ": gamma components must be positive");
            e.gamma.push_back(g);
        }
        const std::int64_t n = csv::require_int(cells.back(), path);
        if (n < 0) throw DataError(path + ": n_u must be non-negative");
        e.n_u = static_cast<std::size_t>(n);
        out.push_back(std::move(e));
    }
    if (out.empty()) throw DataError(path + ": no embedding rows");
    return out;
}

} // namespace pvclust

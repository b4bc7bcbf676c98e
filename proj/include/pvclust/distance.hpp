#pragma once

#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "pvclust/csv.hpp"
#include "pvclust/errors.hpp"
#include "pvclust/lda.hpp"
#include "pvclust/special.hpp"

namespace pvclust {

enum class Metric { sym_kl, bhattacharyya };

inline std::string metric_name(Metric m) {
    return m == Metric::sym_kl ? "sym_kl" : "bhattacharyya";
}

inline Metric metric_from_name(std::string_view name) {
    if (name == "sym_kl") return Metric::sym_kl;
    if (name == "bhattacharyya") return Metric::bhattacharyya;
    throw ConfigError("unknown metric '" + std::string(name) +
                      "' (expected sym_kl or bhattacharyya)");
}

namespace detail {

inline void check_pair(const std::vector<double>& a, const std::vector<double>& b,
                       const char* where) {
    if (a.size() != b.size() || a.empty())
        throw DataError(std::string(where) + ": dimension mismatch");
    for (double v : a)
        if (!(v > 0.0)) throw DataError(std::string(where) + ": components must be positive");
    for (double v : b)
        if (!(v > 0.0)) throw DataError(std::string(where) + ": components must be positive");
}

// ln B(v) = sum_k lnGamma(v_k) - lnGamma(sum_k v_k)
inline double log_beta_fn(const std::vector<double>& v) {
    double sum = 0.0, lg = 0.0;
    for (double x : v) {
        sum += x;
        lg += log_gamma(x);
    }
    return lg - log_gamma(sum);
}

} // namespace detail

// KL(Dir(a) || Dir(b)) in closed form, all in log space.
inline double kl_dirichlet(const std::vector<double>& a, const std::vector<double>& b) {
    detail::check_pair(a, b, "kl_dirichlet");
    double a0 = 0.0, b0 = 0.0;
    for (double v : a) a0 += v;
    for (double v : b) b0 += v;
    const double dig_a0 = digamma(a0);
    double r = log_gamma(a0) - log_gamma(b0);
    for (std::size_t i = 0; i < a.size(); ++i) {
        r -= log_gamma(a[i]) - log_gamma(b[i]);
        r += (a[i] - b[i]) * (digamma(a[i]) - dig_a0);
    }
    return r;
}

inline double sym_kl(const std::vector<double>& a, const std::vector<double>& b) {
    return 0.5 * (kl_dirichlet(a, b) + kl_dirichlet(b, a));
}

// Bhattacharyya distance -ln of the coefficient; 0 iff a == b.
inline double bhattacharyya(const std::vector<double>& a, const std::vector<double>& b) {
    detail::check_pair(a, b, "bhattacharyya");
    std::vector<double> m(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) m[i] = 0.5 * (a[i] + b[i]);
    return -(detail::log_beta_fn(m) -
             0.5 * (detail::log_beta_fn(a) + detail::log_beta_fn(b)));
}

struct DistanceMatrix {
    std::vector<std::string> system_ids;
    Metric metric_tag = Metric::sym_kl;
    std::vector<double> values;  // U x U, symmetric, zero diagonal

    std::size_t size() const { return system_ids.size(); }
    double at(std::size_t i, std::size_t j) const { return values[i * size() + j]; }
    double& at(std::size_t i, std::size_t j) { return values[i * size() + j]; }
};

inline DistanceMatrix build_distance_matrix(const std::vector<DirichletEmbedding>& embeddings,
                                            Metric metric) {
    if (embeddings.empty()) throw DataError("build_distance_matrix: no embeddings");
    const std::size_t k = embeddings[0].gamma.size();
    for (const auto& e : embeddings) {
        if (e.gamma.size() != k)
            throw DataError("build_distance_matrix: K mismatch for system " + e.system_id);
    }
    DistanceMatrix dist;
    dist.metric_tag = metric;
    for (const auto& e : embeddings) dist.system_ids.push_back(e.system_id);
    const std::size_t u = embeddings.size();
    dist.values.assign(u * u, 0.0);
    for (std::size_t i = 0; i < u; ++i) {
        for (std::size_t j = i + 1; j < u; ++j) {
            const double d = metric == Metric::sym_kl
                                 ? sym_kl(embeddings[i].gamma, embeddings[j].gamma)
                                 : bhattacharyya(embeddings[i].gamma, embeddings[j].gamma);
            if (!std::isfinite(d))
                throw DataError("build_distance_matrix: non-finite distance between " +
                                embeddings[i].system_id + " and " + embeddings[j].system_id);
            dist.at(i, j) = d;
            dist.at(j, i) = d;
        }
    }
    return dist;
}

// --- persistence ----------------------------------------------------------

inline void save_distance_matrix(const DistanceMatrix& dist, const std::string& path) {
    std::string out = "# metric=" + metric_name(dist.metric_tag) + "\n";
    out += "system_id";
    for (const auto& id : dist.system_ids) {
        out += ',';
        out += id;
    }
    out += '\n';
    const std::size_t u = dist.size();
    for (std::size_t i = 0; i < u; ++i) {
        out += dist.system_ids[i];
        for (std::size_t j = 0; j < u; ++j) {
            out += ',';
            out += csv::format_double(dist.at(i, j));
        }
        out += '\n';
    }
    csv::write_file(path, out);
}

inline DistanceMatrix load_distance_matrix(const std::string& path) {
    const auto lines = csv::read_lines(path);
    if (lines.size() < 2 || lines[0].rfind("# metric=", 0) != 0)
        throw DataError(path + ": expected '# metric=...' comment line");
    DistanceMatrix dist;
    dist.metric_tag = metric_from_name(csv::trim(lines[0].substr(9)));
    const auto header = csv::split(lines[1]);
    if (header.size() < 2 || csv::trim(header[0]) != "system_id")
        throw DataError(path + ": expected 'system_id,<ids...>' header");
    for (std::size_t i = 1; i < header.size(); ++i)
        dist.system_ids.emplace_back(csv::trim(header[i]));
    const std::size_t u = dist.size();
    dist.values.assign(u * u, 0.0);
    std::size_t row = 0;
    for (std::size_t i = 2; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        if (row >= u) throw DataError(path + ": more rows than system ids");
        const auto cells = csv::split(lines[i]);
        if (cells.size() != u + 1 || csv::trim(cells[0]) != dist.system_ids[row])
            throw DataError(path + ": row " + std::to_string(i + 1) +
                            " does not match header order");
        for (std::size_t j = 0; j < u; ++j)
            dist.at(row, j) = csv::require_double(cells[j + 1], path);
        ++row;
    }
    if (row != u) throw DataError(path + ": expected " + std::to_string(u) + " matrix rows");
    for (std::size_t i = 0; i < u; ++i) {
        if (dist.at(i, i) != 0.0) throw DataError(path + ": nonzero diagonal");
        for (std::size_t j = 0; j < u; ++j) {
            const double v = dist.at(i, j);
            if (!std::isfinite(v) || v < 0.0)
                throw DataError(path + ": entries must be finite and non-negative");
            if (std::abs(v - dist.at(j, i)) > 1e-10)
                throw DataError(path + ": matrix is not symmetric");
        }
    }
    return dist;
}

} // namespace pvclust

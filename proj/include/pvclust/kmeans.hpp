#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "pvclust/errors.hpp"
#include "pvclust/rng.hpp"

namespace pvclust {

struct KMeansParams {
    std::size_t k = 2;
    std::uint64_t seed = 0;
    std::size_t max_iter = 300;
    double tol = 1e-6;  // on max centroid displacement
};

struct KMeansModel {
    std::size_t k = 0;
    std::size_t dim = 0;
    std::vector<double> centroids;      // k x dim
    std::vector<int> labels;            // n
    double inertia = 0.0;               // final sum of squared distances
    std::vector<double> inertia_trace;  // inertia after each assignment step
    std::size_t iterations = 0;
};

namespace detail {

inline double sq_dist(const double* a, const double* b, std::size_t dim) {
    double s = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

} // namespace detail

// Index of the nearest centroid in Euclidean distance; ties go to the lowest
// index (strict < while scanning ascending).
inline std::size_t nearest_centroid(const std::vector<double>& centroids, std::size_t k,
                                    std::size_t dim, const double* point,
                                    double* sq_dist_out = nullptr) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c) {
        const double d = detail::sq_dist(point, centroids.data() + c * dim, dim);
        if (d < best_d) {
            best_d = d;
            best = c;
        }
    }
    if (sq_dist_out) *sq_dist_out = best_d;
    return best;
}

// Lloyd's algorithm with k-means++ seeding. Deterministic given the seed.
// Empty clusters are repaired by promoting the point farthest from its
// current centroid to be the empty cluster's centroid.
inline KMeansModel kmeans_fit(const std::vector<double>& data, std::size_t n, std::size_t dim,
                              const KMeansParams& params) {
    if (n == 0) throw DataError("kmeans: empty data set");
    if (data.size() != n * dim) throw DataError("kmeans: data size does not match n x dim");
    if (params.k < 1) throw DataError("kmeans: k must be >= 1");
    if (n < params.k) {
        throw DataError("kmeans: " + std::to_string(n) + " points for k=" +
                        std::to_string(params.k));
    }
    if (!(params.tol > 0.0)) throw DataError("kmeans: tol must be > 0");

    const std::size_t k = params.k;
    Rng rng(params.seed);

    // k-means++ seeding
    std::vector<double> centroids(k * dim);
    std::vector<char> chosen(n, 0);
    std::vector<double> d2(n, std::numeric_limits<double>::infinity());
    {
        const std::size_t first = static_cast<std::size_t>(rng.below(n));
        chosen[first] = 1;
        for (std::size_t i = 0; i < dim; ++i) centroids[i] = data[first * dim + i];
        for (std::size_t c = 1; c < k; ++c) {
            const double* prev = centroids.data() + (c - 1) * dim;
            double total = 0.0;
            for (std::size_t p = 0; p < n; ++p) {
                const double d = detail::sq_dist(data.data() + p * dim, prev, dim);
                if (d < d2[p]) d2[p] = d;
                total += d2[p];
            }
            std::size_t pick = n;
            if (total > 0.0) {
                const double target = rng.uniform() * total;
                double acc = 0.0;
                for (std::size_t p = 0; p < n; ++p) {
                    acc += d2[p];
                    if (acc > target) {
                        pick = p;
                        break;
                    }
                }
                if (pick == n) pick = n - 1;  // target landed on the accumulated total
            } else {
                // all remaining mass is zero (duplicate points): first unchosen index
                for (std::size_t p = 0; p < n; ++p) {
                    if (!chosen[p]) {
                        pick = p;
                        break;
                    }
                }
                if (pick == n) pick = 0;
            }
            chosen[pick] = 1;
            for (std::size_t i = 0; i < dim; ++i) centroids[c * dim + i] = data[pick * dim + i];
        }
    }

    KMeansModel model;
    model.k = k;
    model.dim = dim;
    model.labels.assign(n, 0);
    std::vector<double> point_d2(n, 0.0);
    std::vector<double> next(k * dim);
    std::vector<std::size_t> counts(k);

    for (std::size_t iter = 0; iter < params.max_iter; ++iter) {
        // assignment
        double inertia = 0.0;
        for (std::size_t p = 0; p < n; ++p) {
            double d;
            model.labels[p] = static_cast<int>(
                nearest_centroid(centroids, k, dim, data.data() + p * dim, &d));
            point_d2[p] = d;
            inertia += d;
        }
        model.inertia_trace.push_back(inertia);
        model.inertia = inertia;
        model.iterations = iter + 1;

        // update
        std::fill(next.begin(), next.end(), 0.0);
        std::fill(counts.begin(), counts.end(), 0);
        for (std::size_t p = 0; p < n; ++p) {
            const std::size_t c = static_cast<std::size_t>(model.labels[p]);
            counts[c] += 1;
            double* dst = next.data() + c * dim;
            const double* src = data.data() + p * dim;
            for (std::size_t i = 0; i < dim; ++i) dst[i] += src[i];
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] == 0) continue;
            double* dst = next.data() + c * dim;
            for (std::size_t i = 0; i < dim; ++i) dst[i] /= static_cast<double>(counts[c]);
        }
        // empty-cluster repair: promote the globally farthest point
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] != 0) continue;
            std::size_t far_p = 0;
            double far_d = -1.0;
            for (std::size_t p = 0; p < n; ++p) {
                const std::size_t pc = static_cast<std::size_t>(model.labels[p]);
                if (counts[pc] <= 1) continue;  // do not empty another cluster
                if (point_d2[p] > far_d) {
                    far_d = point_d2[p];
                    far_p = p;
                }
            }
            const std::size_t old_c = static_cast<std::size_t>(model.labels[far_p]);
            // remove the promoted point from its old cluster's mean
            double* old_dst = next.data() + old_c * dim;
            const double* src = data.data() + far_p * dim;
            for (std::size_t i = 0; i < dim; ++i) {
                old_dst[i] = (old_dst[i] * static_cast<double>(counts[old_c]) - src[i]) /
                             static_cast<double>(counts[old_c] - 1);
            }
            counts[old_c] -= 1;
            double* dst = next.data() + c * dim;
            for (std::size_t i = 0; i < dim; ++i) dst[i] = src[i];
            counts[c] = 1;
            model.labels[far_p] = static_cast<int>(c);
            point_d2[far_p] = 0.0;
        }

        double max_shift2 = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            const double s = detail::sq_dist(next.data() + c * dim, centroids.data() + c * dim, dim);
            if (s > max_shift2) max_shift2 = s;
        }
        centroids.swap(next);
        if (max_shift2 < params.tol * params.tol) break;
    }

    // final assignment against the last centroids
    double inertia = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
        double d;
        model.labels[p] =
            static_cast<int>(nearest_centroid(centroids, k, dim, data.data() + p * dim, &d));
        inertia += d;
    }
    model.inertia_trace.push_back(inertia);
    model.inertia = inertia;
    model.centroids = std::move(centroids);
    return model;
}

} // namespace pvclust

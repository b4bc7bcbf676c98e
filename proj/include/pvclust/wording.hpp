#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "pvclust/csv.hpp"
#include "pvclust/errors.hpp"
#include "pvclust/kmeans.hpp"
#include "pvclust/series.hpp"

namespace pvclust {

struct Vocabulary {
    std::size_t w = 0;            // word count
    std::size_t profile_len = 0;  // T'
    std::vector<double> centroids;  // w x profile_len
    std::uint64_t rng_seed = 0;
    double inertia = 0.0;
};

// Bag of words for one entity: words[i] is the word index of the entity's
// i-th complete daily profile, so size() == N_u.
struct EntityDocument {
    std::string system_id;
    std::vector<int> words;

    std::size_t size() const { return words.size(); }
    // word index -> count, ascending
    std::map<int, int> counts() const {
        std::map<int, int> c;
        for (int w : words) c[w] += 1;
        return c;
    }
};

// Stack every entity's complete daily profiles into one M x T' pool,
// entity order first, day order within entity.
inline std::vector<double> pool_profiles(const std::vector<EntityProfileSet>& sets,
                                         std::size_t* profile_len_out = nullptr) {
    std::vector<double> pooled;
    std::size_t len = 0;
    for (const auto& s : sets) {
        if (len == 0) len = s.profile_len;
        if (s.profile_len != len)
            throw DataError("pool_profiles: inconsistent profile lengths");
        pooled.insert(pooled.end(), s.profiles.begin(), s.profiles.end());
    }
    if (profile_len_out) *profile_len_out = len;
    return pooled;
}

inline Vocabulary fit_vocabulary(const std::vector<double>& pooled_profiles, std::size_t m,
                                 std::size_t profile_len, std::size_t w, std::uint64_t seed,
                                 std::size_t max_iter = 300, double tol = 1e-6) {
    if (m == 0) throw DataError("fit_vocabulary: empty pooled profile set");
    if (w < 2) throw DataError("fit_vocabulary: W must be >= 2");
    if (m < w) {
        throw DataError("fit_vocabulary: " + std::to_string(m) + " pooled profiles for W=" +
                        std::to_string(w));
    }
    KMeansParams params;
    params.k = w;
    params.seed = seed;
    params.max_iter = max_iter;
    params.tol = tol;
    KMeansModel km = kmeans_fit(pooled_profiles, m, profile_len, params);
    Vocabulary vocab;
    vocab.w = w;
    vocab.profile_len = profile_len;
    vocab.centroids = std::move(km.centroids);
    vocab.rng_seed = seed;
    vocab.inertia = km.inertia;
    return vocab;
}

inline EntityDocument assign_words(const Vocabulary& vocab, const EntityProfileSet& profiles) {
    if (profiles.profile_len != vocab.profile_len) {
        throw DataError("assign_words: profile width " + std::to_string(profiles.profile_len) +
                        " does not match vocabulary width " + std::to_string(vocab.profile_len));
    }
    EntityDocument doc;
    doc.system_id = profiles.system_id;
    const std::size_t n = profiles.n_profiles();
    doc.words.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        doc.words.push_back(static_cast<int>(nearest_centroid(
            vocab.centroids, vocab.w, vocab.profile_len, profiles.profile(i))));
    }
    return doc;
}

// --- persistence ----------------------------------------------------------

// Plain W x T' matrix, one centroid per row, no header.
inline void save_vocabulary(const Vocabulary& vocab, const std::string& csv_path,
                            const std::string& meta_path) {
    std::string out;
    for (std::size_t r = 0; r < vocab.w; ++r) {
        for (std::size_t c = 0; c < vocab.profile_len; ++c) {
            if (c) out += ',';
            out += csv::format_double(vocab.centroids[r * vocab.profile_len + c]);
        }
        out += '\n';
    }
    csv::write_file(csv_path, out);
    std::string meta;
    meta += "w=" + std::to_string(vocab.w) + "\n";
    meta += "seed=" + std::to_string(vocab.rng_seed) + "\n";
    meta += "inertia=" + csv::format_double(vocab.inertia) + "\n";
    csv::write_file(meta_path, meta);
}

inline Vocabulary load_vocabulary(const std::string& csv_path, const std::string& meta_path) {
    Vocabulary vocab;
    const auto lines = csv::read_lines(csv_path);
    for (const auto& line : lines) {
        if (line.empty()) continue;
        const auto cells = csv::split(line);
        if (vocab.profile_len == 0) vocab.profile_len = cells.size();
        if (cells.size() != vocab.profile_len)
            throw DataError(csv_path + ": ragged vocabulary row");
        for (const auto& cell : cells)
            vocab.centroids.push_back(csv::require_double(cell, csv_path));
        vocab.w += 1;
    }
    if (vocab.w < 2) throw DataError(csv_path + ": vocabulary needs at least 2 words");
    for (const auto& line : csv::read_lines(meta_path)) {
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw DataError(meta_path + ": expected key=value lines");
        const std::string key(csv::trim(line.substr(0, eq)));
        const std::string val(csv::trim(line.substr(eq + 1)));
        if (key == "w") {
            if (csv::require_int(val, meta_path) != static_cast<std::int64_t>(vocab.w))
                throw DataError(meta_path + ": w does not match vocabulary row count");
        } else if (key == "seed") {
            vocab.rng_seed = static_cast<std::uint64_t>(csv::require_int(val, meta_path));
        } else if (key == "inertia") {
            vocab.inertia = csv::require_double(val, meta_path);
        } else {
            throw DataError(meta_path + ": unknown key '" + key + "'");
        }
    }
    return vocab;
}

// Sparse triplets: one row per (system, word) with a positive count.
// Systems keep their input order; words ascend within a system.
inline void save_documents(const std::vector<EntityDocument>& docs, const std::string& path) {
    std::string out = "system_id,word_index,count\n";
    for (const auto& doc : docs) {
        for (const auto& [word, count] : doc.counts()) {
            out += doc.system_id;
            out += ',';
            out += std::to_string(word);
            out += ',';
            out += std::to_string(count);
            out += '\n';
        }
    }
    csv::write_file(path, out);
}

// Word order within each loaded document is ascending; the multiset is what
// downstream consumers depend on.
inline std::vector<EntityDocument> load_documents(const std::string& path) {
    const auto lines = csv::read_lines(path);
    if (lines.empty() || csv::trim(lines[0]) != "system_id,word_index,count")
        throw DataError(path + ": expected header 'system_id,word_index,count'");
    std::vector<EntityDocument> docs;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const auto cells = csv::split(lines[i]);
        if (cells.size() != 3)
            throw DataError(path + ": row " + std::to_string(i + 1) + " needs 3 columns");
        const std::string id(csv::trim(cells[0]));
        const std::int64_t word = csv::require_int(cells[1], path);
        const std::int64_t count = csv::require_int(cells[2], path);
        if (word < 0) throw DataError(path + ": negative word index");
        if (count <= 0) throw DataError(path + ": count must be positive");
        if (docs.empty() || docs.back().system_id != id) {
            for (const auto& d : docs) {
                if (d.system_id == id)
                    throw DataError(path + ": rows for system " + id + " are not contiguous");
            }
            docs.push_back(EntityDocument{id, {}});
        }
        for (std::int64_t c = 0; c < count; ++c)
            docs.back().words.push_back(static_cast<int>(word));
    }
    return docs;
}

} // namespace pvclust

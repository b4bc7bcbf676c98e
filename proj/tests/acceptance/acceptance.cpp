// Acceptance gate. Each numbered check prints exactly one [PASS]/[FAIL] line
// with the measured values; the exit code is the number of failed checks.
// Run with no arguments for the whole gate, or with check numbers to run a
// subset (used by the test registrations to get one result per check).
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "pvclust/pvclust.hpp"

#include "support/oracles.hpp"
#include "support/tempdir.hpp"

namespace {

using namespace pvclust;
using testsupport::TempDir;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

bool report(int number, bool ok, const std::string& label, const std::string& detail) {
    std::cout << (ok ? "[PASS] " : "[FAIL] ") << number << ": " << label;
    if (!detail.empty()) std::cout << " (" << detail << ")";
    std::cout << "\n";
    return ok;
}

std::string fmt(double v) { return csv::format_double(v); }

// --- shared corpus builders -------------------------------------------------

std::vector<EntityDocument> random_corpus(std::size_t u, std::size_t w, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<EntityDocument> docs;
    for (std::size_t i = 0; i < u; ++i) {
        EntityDocument doc;
        doc.system_id = "sys" + std::to_string(i);
        const std::size_t n = 3 + rng.below(20);
        for (std::size_t j = 0; j < n; ++j)
            doc.words.push_back(static_cast<int>(rng.below(w)));
        docs.push_back(std::move(doc));
    }
    return docs;
}

// The end-to-end fleet: three behavior groups, a tenth of the days missing,
// mounting angles drawn independently of the groups.
SynthConfig fleet_config() {
    SynthConfig cfg;
    cfg.u = 60;
    cfg.days = 120;
    cfg.groups = 3;
    cfg.resolution = 15;
    cfg.missing_day_rate = 0.1;
    cfg.angle_coupling = AngleCoupling::decoupled;
    cfg.seed = 97;
    return cfg;
}

RunConfig pipeline_config(std::uint64_t seed) {
    RunConfig cfg;
    cfg.profile_len = 96;
    cfg.k = 5;
    cfg.w = 100;
    cfg.c = 3;
    cfg.seed = seed;
    cfg.seed_set = true;
    cfg.sensitivity = false;
    return cfg;
}

// --- 1: closed-form distances against the quadrature oracle ------------------

bool check_distance_oracle() {
    const auto start = Clock::now();
    Rng rng(12001);
    double max_kl = 0.0;
    double max_bhat = 0.0;
    for (int i = 0; i < 100; ++i) {
        const std::vector<double> a = {rng.uniform(0.1, 50.0), rng.uniform(0.1, 50.0)};
        const std::vector<double> b = {rng.uniform(0.1, 50.0), rng.uniform(0.1, 50.0)};
        const double kl_closed = kl_dirichlet(a, b);
        const double kl_quad = oracles::kl_beta_quadrature(a[0], a[1], b[0], b[1]);
        const double bh_closed = bhattacharyya(a, b);
        const double bh_quad = oracles::bhattacharyya_beta_quadrature(a[0], a[1], b[0], b[1]);
        max_kl = std::max(max_kl, std::abs(kl_closed - kl_quad));
        max_bhat = std::max(max_bhat, std::abs(bh_closed - bh_quad));
    }
    const double elapsed = seconds_since(start);
    const bool ok = max_kl < 1e-6 && max_bhat < 1e-6 && elapsed < 10.0;
    return report(1, ok, "closed-form distances match quadrature on 100 random pairs",
                  "max kl err " + fmt(max_kl) + ", max bhat err " + fmt(max_bhat) + ", " +
                      fmt(elapsed) + " s");
}

// --- 2: worked distance values ------------------------------------------------

bool check_worked_values() {
    const std::vector<double> a = {2.0, 1.0};
    const std::vector<double> b = {1.0, 1.0};
    const double sym_closed = sym_kl(a, b);
    const double sym_quad = 0.5 * (oracles::kl_beta_quadrature(2, 1, 1, 1) +
                                   oracles::kl_beta_quadrature(1, 1, 2, 1));
    const double bhat_closed = bhattacharyya(a, b);
    const double bhat_quad = oracles::bhattacharyya_beta_quadrature(2, 1, 1, 1);

    const bool cross_checked =
        std::abs(sym_closed - sym_quad) < 1e-9 && std::abs(bhat_closed - bhat_quad) < 1e-9;
    const bool sym_ok = std::abs(sym_closed - 0.596574) <= 1e-6;
    const bool bhat_ok = std::abs(bhat_closed - 0.058891) <= 1e-6;
    return report(2, cross_checked && sym_ok && bhat_ok,
                  "worked values sym_kl((2,1),(1,1)) = 0.596574 and bhattacharyya = 0.058891",
                  "sym_kl " + fmt(sym_closed) + " (quadrature " + fmt(sym_quad) +
                      "), bhattacharyya " + fmt(bhat_closed) + " (quadrature " +
                      fmt(bhat_quad) + ")");
}

// --- 3: gamma sums track document size ----------------------------------------

bool check_gamma_norm() {
    double worst = 0.0;
    const struct { std::size_t u, w, k; double alpha; std::uint64_t seed; } shapes[] = {
        {40, 30, 4, 0.3, 301},
        {25, 12, 3, 1.0 / 3.0, 302},
        {12, 50, 6, 0.05, 303},
    };
    for (const auto& s : shapes) {
        const auto docs = random_corpus(s.u, s.w, s.seed);
        const LdaModel model = fit_lda(docs, s.w, s.k, s.alpha, s.seed);
        for (const auto& doc : docs) {
            const DirichletEmbedding emb = infer_gamma(model, doc);
            double sum = 0.0;
            for (double g : emb.gamma) sum += g;
            const double expected =
                static_cast<double>(doc.size()) + static_cast<double>(s.k) * s.alpha;
            worst = std::max(worst, std::abs(sum - expected));
        }
    }
    return report(3, worst < 1e-6, "gamma sums equal document size plus K*alpha",
                  "max deviation " + fmt(worst));
}

// --- 4: ELBO monotonicity -------------------------------------------------------

bool check_elbo_monotone() {
    double worst_drop = 0.0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto docs = random_corpus(18, 15, 400 + seed);
        const LdaModel model = fit_lda(docs, 15, 3, 1.0 / 3.0, seed);
        for (std::size_t i = 1; i < model.elbo_trace.size(); ++i)
            worst_drop = std::max(worst_drop, model.elbo_trace[i - 1] - model.elbo_trace[i]);
    }
    return report(4, worst_drop <= 1e-6, "training objective never decreases on 10 corpora",
                  "worst drop " + fmt(worst_drop));
}

// --- 5: merge sequences against brute force -------------------------------------

bool check_agglomerative() {
    Rng rng(50001);
    std::size_t instances = 0;
    for (int rep = 0; rep < 60; ++rep) {
        const std::size_t u = 2 + rng.below(6);
        std::vector<double> values(u * u, 0.0);
        for (std::size_t i = 0; i < u; ++i) {
            for (std::size_t j = i + 1; j < u; ++j) {
                const double d = rng.uniform(0.5, 10.0);
                values[i * u + j] = d;
                values[j * u + i] = d;
            }
        }
        DistanceMatrix dist;
        dist.values = values;
        for (std::size_t i = 0; i < u; ++i) dist.system_ids.push_back("s" + std::to_string(i));

        for (const Linkage linkage : {Linkage::average, Linkage::complete}) {
            const ClusterAssignment got = agglomerate(dist, 1, linkage);
            const auto want =
                oracles::brute_force_merges(values, u, 1, linkage == Linkage::average);
            if (got.merge_trace.size() != want.size())
                return report(5, false, "merge sequences match brute force",
                              "trace length mismatch at instance " + std::to_string(rep));
            for (std::size_t m = 0; m < want.size(); ++m) {
                const MergeStep& g = got.merge_trace[m];
                if (g.i != want[m].i || g.j != want[m].j || g.new_size != want[m].new_size ||
                    std::abs(g.height - want[m].height) > 1e-9) {
                    return report(5, false, "merge sequences match brute force",
                                  "instance " + std::to_string(rep) + " merge " +
                                      std::to_string(m) + " disagrees");
                }
            }
            ++instances;
        }
    }
    return report(5, true, "merge sequences match brute force up to 7 systems",
                  std::to_string(instances) + " instances, both linkages");
}

// --- 6: pinball score against a direct evaluator ---------------------------------

bool check_pinball() {
    Rng rng(60001);
    const std::vector<double> level_pool = {0.05, 0.1, 0.25, 0.4, 0.5, 0.6, 0.75, 0.9, 0.95};
    double worst = 0.0;
    std::size_t compared = 0;
    for (int rep = 0; rep < 160; ++rep) {
        const bool gapped = rep >= 100;  // 100 gap-free instances, then 60 gapped ones
        const std::size_t m = 2 + rng.below(5);
        const std::size_t t_len = 3 + rng.below(8);

        std::vector<double> levels;
        for (double q : level_pool)
            if (rng.uniform() < 0.4) levels.push_back(q);
        if (levels.empty()) levels.push_back(0.5);

        RawSeriesTable table;
        table.step_seconds = 86400;
        for (std::size_t t = 0; t < t_len; ++t)
            table.timestamps.push_back(static_cast<std::int64_t>(t) * 86400);
        table.values.assign(m * t_len, 0.0);
        for (std::size_t u = 0; u < m; ++u) {
            table.system_ids.push_back("m" + std::to_string(u));
            for (std::size_t t = 0; t < t_len; ++t) {
                const bool hole = gapped && rng.uniform() < 0.3;
                table.at(u, t) = hole ? kMissing : rng.uniform(0.0, 2.0);
            }
        }
        if (gapped && rep % 2 == 0) {
            for (std::size_t u = 0; u < m; ++u) table.at(u, 0) = kMissing;  // undefined row
        }

        std::vector<std::size_t> members(m);
        for (std::size_t u = 0; u < m; ++u) members[u] = u;
        QuantileSummary summary;
        try {
            summary = summarize_cluster(table, members, levels);
        } catch (const DataError&) {
            continue;  // every cell missing; nothing to score
        }

        for (std::size_t u = 0; u < m; ++u) {
            const double got = quantile_score(table.row(u), t_len, summary);
            std::vector<double> x(table.row(u), table.row(u) + t_len);
            bool scoreable = true;
            double want = 0.0;
            try {
                want = oracles::pinball_direct(x, summary.values, levels);
            } catch (const std::exception&) {
                scoreable = false;
            }
            if (!scoreable) {
                if (!is_missing(got))
                    return report(6, false, "pinball score matches direct evaluator",
                                  "expected missing score at instance " + std::to_string(rep));
                continue;
            }
            worst = std::max(worst, std::abs(got - want));
            ++compared;
        }
    }
    const bool ok = worst < 1e-12 && compared > 100;
    return report(6, ok, "pinball score matches direct evaluator within 1e-12",
                  std::to_string(compared) + " member scores, max err " + fmt(worst));
}

// --- 7: end-to-end group recovery --------------------------------------------------

bool check_recovery() {
    const auto start = Clock::now();
    const SynthOutput fleet = generate(fleet_config());
    const RawSeriesTable normalized =
        normalize_by_capacity(fleet.table, fleet.meta, CapacityMode::metadata);

    const RunConfig cfg = pipeline_config(1);
    const EmbedResult embedded = embed_fleet(normalized, cfg);
    const RawSeriesTable scoring = subset_rows(normalized, embedded.kept_rows);
    const ClusterResult clustered = cluster_fleet(embedded.embeddings, scoring, cfg);

    std::vector<int> truth;
    for (std::size_t row : embedded.kept_rows) truth.push_back(fleet.groups[row]);
    const double ari = oracles::adjusted_rand_index(clustered.assignment.labels, truth);

    MetadataSet kept_meta;
    for (std::size_t row : embedded.kept_rows) kept_meta.push_back(fleet.meta[row]);
    const ClusterAssignment baseline = baseline_angle_kmeans(kept_meta, cfg.c, cfg.seed);
    const ScoreReport base_disp = dispersion_score(scoring, baseline.labels, cfg.quantiles);

    const double elapsed = seconds_since(start);
    const bool ok = ari >= 0.9 && clustered.disp.mean < base_disp.mean && elapsed < 300.0;
    return report(7, ok, "synthetic fleet recovery beats the angle baseline",
                  "ARI " + fmt(ari) + ", S_disp " + fmt(clustered.disp.mean) +
                      " vs baseline " + fmt(base_disp.mean) + ", " + fmt(elapsed) + " s");
}

// --- 8: dispersion trend in the cluster count ---------------------------------------

bool check_dispersion_trend() {
    const SynthOutput fleet = generate(fleet_config());
    const RawSeriesTable normalized =
        normalize_by_capacity(fleet.table, fleet.meta, CapacityMode::metadata);

    const std::vector<std::size_t> c_values = {2, 3, 6, 10};
    std::vector<std::vector<double>> disp_by_c(c_values.size());
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        const RunConfig cfg = pipeline_config(seed);
        const EmbedResult embedded = embed_fleet(normalized, cfg);
        const RawSeriesTable scoring = subset_rows(normalized, embedded.kept_rows);
        const DistanceMatrix dist = build_distance_matrix(embedded.embeddings, cfg.metric);
        for (std::size_t ci = 0; ci < c_values.size(); ++ci) {
            const ClusterAssignment assignment = agglomerate(dist, c_values[ci], cfg.linkage);
            const ScoreReport disp = dispersion_score(scoring, assignment.labels, cfg.quantiles);
            disp_by_c[ci].push_back(disp.mean);
        }
    }

    std::string detail;
    std::vector<double> medians;
    for (std::size_t ci = 0; ci < c_values.size(); ++ci) {
        std::vector<double> v = disp_by_c[ci];
        std::sort(v.begin(), v.end());
        medians.push_back(v[1]);
        if (ci) detail += ", ";
        detail += "C=" + std::to_string(c_values[ci]) + ": " + fmt(v[1]);
    }
    bool ok = true;
    for (std::size_t ci = 1; ci < medians.size(); ++ci)
        if (medians[ci] > medians[ci - 1] + 1e-3) ok = false;
    return report(8, ok, "median dispersion over 3 seeds is non-increasing in C", detail);
}

// --- 9: gaps widen the embedding ------------------------------------------------------

bool check_gappier_variance() {
    const auto docs = random_corpus(20, 20, 901);
    const LdaModel model = fit_lda(docs, 20, 3, 1.0 / 3.0, 901);

    Rng rng(902);
    EntityDocument gappy;
    gappy.system_id = "gappy";
    for (int j = 0; j < 24; ++j) gappy.words.push_back(static_cast<int>(rng.below(20)));
    EntityDocument full;
    full.system_id = "full";
    for (int rep = 0; rep < 4; ++rep)
        full.words.insert(full.words.end(), gappy.words.begin(), gappy.words.end());

    const auto total_variance = [&](const EntityDocument& doc) {
        const DirichletEmbedding emb = infer_gamma(model, doc);
        double sum = 0.0;
        for (double v : dirichlet_variance(emb.gamma)) sum += v;
        return sum;
    };
    const double var_gappy = total_variance(gappy);
    const double var_full = total_variance(full);
    return report(9, var_gappy > var_full,
                  "same behavior with 4x fewer observations has larger variance",
                  "gappy " + fmt(var_gappy) + " vs full " + fmt(var_full));
}

// --- 10: byte-identical reruns ----------------------------------------------------------

int run_cli(TempDir& dir, const std::vector<std::string>& args) {
    static int counter = 0;
    const std::string err_file = dir.file("logs/stderr." + std::to_string(counter));
    const std::string out_file = dir.file("logs/stdout." + std::to_string(counter));
    ++counter;
    std::filesystem::create_directories(dir.file("logs"));

    std::string cmd = "'" + std::string(PVCLUST_CLI_PATH) + "'";
    for (const auto& a : args) cmd += " '" + a + "'";
    cmd += " > '" + out_file + "' 2> '" + err_file + "'";
    const int status = std::system(cmd.c_str());
    const int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    if (code != 0) {
        std::ifstream err(err_file);
        std::cerr << err.rdbuf();
    }
    return code;
}

// Relative path -> bytes for every regular file under root.
std::map<std::string, std::string> tree_bytes(const std::string& root) {
    std::map<std::string, std::string> out;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(root)) {
        if (!entry.is_regular_file()) continue;
        std::ifstream in(entry.path(), std::ios::binary);
        std::ostringstream buf;
        buf << in.rdbuf();
        out[std::filesystem::relative(entry.path(), root).string()] = buf.str();
    }
    return out;
}

bool check_determinism() {
    TempDir dir;
    bool ran_ok = true;
    for (const char* side : {"a", "b"}) {
        const std::string fleet = dir.file(std::string(side) + "/fleet");
        const std::string run = dir.file(std::string(side) + "/run");
        const std::string grid = dir.file(std::string(side) + "/grid");
        const std::vector<std::string> data = {"--data", fleet + "/series.csv",
                                               "--metadata", fleet + "/metadata.csv"};

        auto with_data = [&](std::vector<std::string> args,
                             const std::string& out) {
            args.insert(args.end(), data.begin(), data.end());
            args.push_back("--out");
            args.push_back(out);
            return args;
        };

        ran_ok = ran_ok &&
                 run_cli(dir, {"synth", "--out", fleet, "--seed", "7", "--synth_u", "8",
                               "--synth_days", "10", "--synth_groups", "2",
                               "--synth_resolution", "120",
                               "--synth_missing_day_rate", "0.15"}) == 0;
        ran_ok = ran_ok &&
                 run_cli(dir, with_data({"embed", "--seed", "3", "--profile_len", "12",
                                         "--k", "3", "--w", "8"},
                                        run)) == 0;
        ran_ok = ran_ok &&
                 run_cli(dir, with_data({"cluster", "--seed", "3", "--c", "2",
                                         "--no-sensitivity", "--baseline"},
                                        run)) == 0;
        ran_ok = ran_ok &&
                 run_cli(dir, with_data({"grid", "--seed", "3", "--profile_len", "12",
                                         "--grid_c", "2,3", "--grid_k", "3", "--grid_w", "8",
                                         "--grid_metrics", "sym_kl", "--grid_linkages",
                                         "average"},
                                        grid)) == 0;
        ran_ok = ran_ok &&
                 run_cli(dir, with_data({"impute", "--impute_system", "sys1",
                                         "--impute_q", "0.5"},
                                        run)) == 0;
        if (!ran_ok) return report(10, false, "subcommands rerun byte-identical",
                                   std::string("run failed on side ") + side);
    }

    const auto a = tree_bytes(dir.file("a"));
    const auto b = tree_bytes(dir.file("b"));
    std::size_t files = 0;
    for (const auto& [path, bytes] : a) {
        const auto it = b.find(path);
        if (it == b.end() || it->second != bytes)
            return report(10, false, "subcommands rerun byte-identical",
                          "mismatch at " + path);
        ++files;
    }
    const bool ok = a.size() == b.size();
    return report(10, ok, "all five subcommands rerun byte-identical",
                  std::to_string(files) + " files compared");
}

} // namespace

int main(int argc, char** argv) {
    std::vector<int> selected;
    for (int i = 1; i < argc; ++i) selected.push_back(std::atoi(argv[i]));
    if (selected.empty()) selected = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};

    int failures = 0;
    for (int number : selected) {
        bool ok = false;
        switch (number) {
            case 1: ok = check_distance_oracle(); break;
            case 2: ok = check_worked_values(); break;
            case 3: ok = check_gamma_norm(); break;
            case 4: ok = check_elbo_monotone(); break;
            case 5: ok = check_agglomerative(); break;
            case 6: ok = check_pinball(); break;
            case 7: ok = check_recovery(); break;
            case 8: ok = check_dispersion_trend(); break;
            case 9: ok = check_gappier_variance(); break;
            case 10: ok = check_determinism(); break;
            default:
                std::cerr << "unknown check " << number << "\n";
                return 2;
        }
        if (!ok) ++failures;
    }
    if (selected.size() > 1)
        std::cout << (selected.size() - failures) << "/" << selected.size() << " checks passed\n";
    return failures == 0 ? 0 : 1;
}

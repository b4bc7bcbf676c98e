// Command-line front end: synth, embed, cluster, grid, impute. Every config
// key is also a flag of the same name; flags override the config file.
// Exit codes: 0 success, 1 runtime/data error, 2 config error.

#include <filesystem>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "pvclust/pvclust.hpp"

namespace {

using namespace pvclust;

// Routes parsed flags through apply_config_key so the CLI and the config
// file share one validation path. Application order is registration order.
class FlagBinder {
  public:
    void bind(CLI::App* cmd, const std::string& key, const std::string& help) {
        auto entry = std::make_unique<Entry>();
        entry->key = key;
        entry->opt = cmd->add_option("--" + key, entry->value, help);
        entries_.push_back(std::move(entry));
    }

    void bind_flag(CLI::App* cmd, const std::string& key, const std::string& help) {
        auto entry = std::make_unique<Entry>();
        entry->key = key;
        entry->is_flag = true;
        entry->opt = cmd->add_flag("--" + key + ",!--no-" + key, entry->flag_value, help);
        entries_.push_back(std::move(entry));
    }

    void apply(RunConfig& cfg) const {
        for (const auto& entry : entries_) {
            if (entry->opt->count() == 0) continue;
            apply_config_key(cfg, entry->key,
                             entry->is_flag ? (entry->flag_value ? "true" : "false")
                                            : entry->value);
        }
    }

  private:
    struct Entry {
        std::string key;
        std::string value;
        bool flag_value = false;
        bool is_flag = false;
        CLI::Option* opt = nullptr;
    };
    std::vector<std::unique_ptr<Entry>> entries_;
};

struct Command {
    CLI::App* app = nullptr;
    std::string config_path;
    FlagBinder flags;

    RunConfig make_config() const {
        RunConfig cfg;
        if (!config_path.empty()) load_config_file(cfg, config_path);
        flags.apply(cfg);
        return cfg;
    }
};

void bind_common(Command& cmd) {
    cmd.app->add_option("--config", cmd.config_path, "key=value config file");
    cmd.flags.bind(cmd.app, "out", "output directory");
    cmd.flags.bind(cmd.app, "seed", "run seed");
    cmd.flags.bind(cmd.app, "jobs", "worker count cap");
}

void bind_data(Command& cmd) {
    cmd.flags.bind(cmd.app, "data", "wide series CSV (timestamp + one column per system)");
    cmd.flags.bind(cmd.app, "metadata", "system metadata CSV");
    cmd.flags.bind(cmd.app, "capacity_mode", "metadata or empirical_max");
}

std::string out_path(const RunConfig& cfg, const std::string& name) {
    std::filesystem::create_directories(cfg.out);
    return (std::filesystem::path(cfg.out) / name).string();
}

void require_seed(const RunConfig& cfg, const char* cmd) {
    if (!cfg.seed_set)
        throw ConfigError(std::string(cmd) + ": seed is required (--seed or seed= in config)");
}

// Scoring rows must line up with the embeddings; systems without an
// embedding row (no complete days) are not scored.
RawSeriesTable scoring_subset(const RawSeriesTable& normalized,
                              const std::vector<DirichletEmbedding>& embeddings) {
    std::vector<std::size_t> rows;
    for (const auto& e : embeddings) {
        bool found = false;
        for (std::size_t u = 0; u < normalized.n_systems(); ++u) {
            if (normalized.system_ids[u] == e.system_id) {
                rows.push_back(u);
                found = true;
                break;
            }
        }
        if (!found)
            throw DataError("system '" + e.system_id + "' has an embedding but no series");
    }
    return subset_rows(normalized, rows);
}

std::string score_value(double v) {
    return is_missing(v) ? std::string() : csv::format_double(v);
}

int cmd_synth(const Command& command) {
    RunConfig cfg = command.make_config();
    require_seed(cfg, "synth");
    cfg.synth.seed = cfg.seed;
    const SynthOutput fleet = generate(cfg.synth);
    write_table(fleet.table, out_path(cfg, "series.csv"));
    write_metadata(fleet.meta, out_path(cfg, "metadata.csv"));
    save_groups(fleet.table.system_ids, fleet.groups, out_path(cfg, "groups.csv"));
    std::cout << "synth: " << fleet.table.n_systems() << " systems, "
              << fleet.table.timestamps.size() << " timesteps, " << cfg.synth.groups
              << " groups -> " << cfg.out << "\n";
    return 0;
}

int cmd_embed(const Command& command) {
    RunConfig cfg = command.make_config();
    require_seed(cfg, "embed");
    if (cfg.data.empty()) throw ConfigError("embed: data is required");
    if (cfg.metadata.empty() && cfg.capacity_mode == CapacityMode::metadata)
        throw ConfigError("embed: metadata is required in capacity_mode=metadata");

    const RawSeriesTable table = load_table(cfg.data);
    const MetadataSet meta =
        cfg.metadata.empty() ? MetadataSet{} : load_metadata(cfg.metadata);
    const RawSeriesTable normalized = normalize_by_capacity(table, meta, cfg.capacity_mode);

    const std::string vocab_csv = out_path(cfg, "vocabulary.csv");
    const std::string vocab_meta = out_path(cfg, "vocabulary.meta");
    Vocabulary cached;
    const Vocabulary* cached_ptr = nullptr;
    if (std::filesystem::exists(vocab_csv) && std::filesystem::exists(vocab_meta)) {
        cached = load_vocabulary(vocab_csv, vocab_meta);
        cached_ptr = &cached;
    }

    const EmbedResult result = embed_fleet(normalized, cfg, cached_ptr);
    for (const auto& id : result.excluded)
        std::cerr << "warning: system '" << id << "' has no complete day, excluded\n";

    if (!result.vocab_cached) save_vocabulary(result.vocab, vocab_csv, vocab_meta);
    save_documents(result.documents, out_path(cfg, "documents.csv"));
    save_lda_model(result.model, out_path(cfg, "topics.csv"));
    save_embeddings(result.embeddings, out_path(cfg, "embeddings.csv"));
    std::cout << "embed: " << result.embeddings.size() << " systems embedded (K=" << cfg.k
              << ", W=" << result.vocab.w << ", vocabulary "
              << (result.vocab_cached ? "cached" : "fitted") << ", EM iterations "
              << result.model.iterations << ") -> " << cfg.out << "\n";
    return 0;
}

int cmd_cluster(const Command& command) {
    RunConfig cfg = command.make_config();
    if (cfg.data.empty()) throw ConfigError("cluster: data is required");
    if (cfg.metadata.empty() && (cfg.capacity_mode == CapacityMode::metadata || cfg.baseline))
        throw ConfigError("cluster: metadata is required");

    const std::vector<DirichletEmbedding> embeddings =
        load_embeddings(out_path(cfg, "embeddings.csv"));
    const RawSeriesTable table = load_table(cfg.data);
    const MetadataSet meta =
        cfg.metadata.empty() ? MetadataSet{} : load_metadata(cfg.metadata);
    const RawSeriesTable normalized = normalize_by_capacity(table, meta, cfg.capacity_mode);
    const RawSeriesTable scoring = scoring_subset(normalized, embeddings);

    RunConfig stage = cfg;
    stage.sensitivity = false;  // computed below so artifacts land first
    const ClusterResult result = cluster_fleet(embeddings, scoring, stage);

    save_distance_matrix(result.dist, out_path(cfg, "distance.csv"));
    save_assignment(result.assignment, scoring.system_ids, out_path(cfg, "assignment.csv"));
    save_merge_trace(result.assignment.merge_trace, out_path(cfg, "merge_trace.csv"));
    for (const auto& summary : result.summaries) {
        save_summary(summary, scoring.timestamps,
                     out_path(cfg, "summary_cluster" + std::to_string(summary.cluster_label) +
                                       ".csv"));
    }
    for (const auto& id : result.disp.excluded)
        std::cerr << "warning: system '" << id << "' had no scoreable pair, excluded\n";

    const std::string setting_id = "c" + std::to_string(cfg.c) + "-k" +
                                   std::to_string(embeddings[0].gamma.size()) + "-" +
                                   metric_name(cfg.metric) + "-" + linkage_name(cfg.linkage);
    std::string baseline_line;
    if (cfg.baseline) {
        MetadataSet ordered;
        for (const auto& id : scoring.system_ids) {
            const SystemMetadata* m = find_metadata(meta, id);
            if (!m) throw DataError("cluster: no metadata record for system '" + id + "'");
            ordered.push_back(*m);
        }
        const ClusterAssignment baseline = baseline_angle_kmeans(ordered, cfg.c, cfg.seed);
        save_assignment(baseline, scoring.system_ids, out_path(cfg, "baseline_assignment.csv"));
        const ScoreReport disp = dispersion_score(scoring, baseline.labels, cfg.quantiles);
        baseline_line = "baseline-angle-" + std::to_string(cfg.c) + "," +
                        score_value(disp.mean) + ",\n";
    }

    const auto write_scores = [&](double s_disp, double s_sens) {
        std::string out = "setting_id,s_disp,s_sens\n";
        out += setting_id + ',' + score_value(s_disp) + ',' + score_value(s_sens) + '\n';
        out += baseline_line;
        csv::write_file(out_path(cfg, "scores.csv"), out);
    };
    write_scores(result.disp.mean, kMissing);
    std::cout << "cluster: C=" << cfg.c << " " << linkage_name(cfg.linkage) << "/"
              << metric_name(cfg.metric) << ", min cluster size " << result.min_cluster_size
              << ", S_disp " << score_value(result.disp.mean) << "\n";

    if (cfg.sensitivity) {
        const ScoreReport sens = sensitivity_score(scoring, result.assignment.labels,
                                                   cfg.quantiles);  // throws on singleton
        write_scores(result.disp.mean, sens.mean);
        std::cout << "cluster: S_sens " << score_value(sens.mean) << "\n";
    }
    return 0;
}

int cmd_grid(const Command& command) {
    RunConfig cfg = command.make_config();
    require_seed(cfg, "grid");
    if (cfg.data.empty()) throw ConfigError("grid: data is required");
    if (cfg.metadata.empty() && cfg.capacity_mode == CapacityMode::metadata)
        throw ConfigError("grid: metadata is required in capacity_mode=metadata");

    const RawSeriesTable table = load_table(cfg.data);
    const MetadataSet meta =
        cfg.metadata.empty() ? MetadataSet{} : load_metadata(cfg.metadata);
    const RawSeriesTable normalized = normalize_by_capacity(table, meta, cfg.capacity_mode);
    auto all_profiles = build_profiles(normalized, cfg.profile_len);
    std::vector<EntityProfileSet> profiles;
    std::vector<std::size_t> kept_rows;
    for (std::size_t u = 0; u < all_profiles.size(); ++u) {
        if (all_profiles[u].excluded()) {
            std::cerr << "warning: system '" << all_profiles[u].system_id
                      << "' has no complete day, excluded\n";
        } else {
            kept_rows.push_back(u);
            profiles.push_back(std::move(all_profiles[u]));
        }
    }
    if (profiles.size() < 2) throw DataError("grid: need at least 2 systems with complete days");
    const RawSeriesTable scoring = subset_rows(normalized, kept_rows);

    const std::vector<GridSetting> settings = enumerate_grid(cfg);
    const std::string ledger_path = out_path(cfg, "grid_ledger.csv");
    std::vector<SettingResult> existing;
    if (std::filesystem::exists(ledger_path)) existing = load_ledger(ledger_path);
    std::set<std::string> done;
    for (const auto& r : existing) done.insert(setting_key(r.setting));
    std::vector<GridSetting> todo;
    for (const auto& s : settings)
        if (!done.count(setting_key(s))) todo.push_back(s);

    std::cout << "grid: " << settings.size() << " settings (" << existing.size()
              << " already in ledger, running " << todo.size() << ")\n";
    const std::vector<SettingResult> fresh = run_grid(profiles, scoring, todo, cfg.alpha,
                                                      cfg.quantiles, cfg.jobs, cfg.timings);
    append_ledger(ledger_path, fresh);

    std::vector<SettingResult> all = existing;
    all.insert(all.end(), fresh.begin(), fresh.end());
    const CSelection selection = select_c(all);
    std::string out = "c,n_valid,median_s_disp,median_s_sens,objective,selected\n";
    for (const auto& cand : selection.table) {
        out += std::to_string(cand.c) + ',' + std::to_string(cand.n_valid) + ',' +
               csv::format_double(cand.median_disp) + ',' +
               csv::format_double(cand.median_sens) + ',' +
               csv::format_double(cand.objective) + ',' +
               (cand.c == selection.selected_c ? "true" : "false") + '\n';
    }
    csv::write_file(out_path(cfg, "selection.csv"), out);
    std::cout << "grid: selected C=" << selection.selected_c << "\n";
    return 0;
}

int cmd_impute(const Command& command) {
    RunConfig cfg = command.make_config();
    if (cfg.data.empty()) throw ConfigError("impute: data is required");
    if (cfg.impute_system.empty()) throw ConfigError("impute: impute_system is required");
    if (cfg.metadata.empty() && cfg.capacity_mode == CapacityMode::metadata)
        throw ConfigError("impute: metadata is required in capacity_mode=metadata");

    const RawSeriesTable table = load_table(cfg.data);
    const MetadataSet meta =
        cfg.metadata.empty() ? MetadataSet{} : load_metadata(cfg.metadata);
    const auto assignment = load_assignment(out_path(cfg, "assignment.csv"));
    const ImputeResult result = impute_series(table, meta, assignment, cfg.impute_system,
                                              cfg.impute_q, cfg.capacity_mode);
    save_imputed(result, out_path(cfg, "imputed_" + cfg.impute_system + ".csv"));
    std::cout << "impute: " << cfg.impute_system << " filled " << result.n_imputed
              << " cells at q=" << csv::format_double(cfg.impute_q) << ", "
              << result.n_unfillable << " left missing\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"daily-profile topic embeddings and probabilistic clustering for PV fleets"};
    app.require_subcommand(1);

    Command synth;
    synth.app = app.add_subcommand("synth", "generate a seeded synthetic fleet");
    bind_common(synth);
    synth.flags.bind(synth.app, "synth_u", "number of systems");
    synth.flags.bind(synth.app, "synth_days", "number of days");
    synth.flags.bind(synth.app, "synth_groups", "number of behavior groups");
    synth.flags.bind(synth.app, "synth_resolution", "minutes per timestep");
    synth.flags.bind(synth.app, "synth_missing_day_rate", "whole-day gap rate in [0,1)");
    synth.flags.bind(synth.app, "synth_missing_cell_rate", "sub-day gap rate in [0,1)");
    synth.flags.bind(synth.app, "synth_outage_start", "fleet-wide outage start day");
    synth.flags.bind(synth.app, "synth_outage_end", "fleet-wide outage end day (exclusive)");
    synth.flags.bind(synth.app, "synth_angles", "coupled or decoupled");

    Command embed;
    embed.app = app.add_subcommand("embed", "profiles -> words -> topic embeddings");
    bind_common(embed);
    bind_data(embed);
    embed.flags.bind(embed.app, "profile_len", "timesteps per daily profile");
    embed.flags.bind(embed.app, "k", "topic count");
    embed.flags.bind(embed.app, "w", "vocabulary size");
    embed.flags.bind(embed.app, "alpha", "document-topic prior (default 1/K)");

    Command cluster;
    cluster.app = app.add_subcommand("cluster", "distances, agglomeration, summaries, scores");
    bind_common(cluster);
    bind_data(cluster);
    cluster.flags.bind(cluster.app, "c", "cluster count");
    cluster.flags.bind(cluster.app, "metric", "sym_kl or bhattacharyya");
    cluster.flags.bind(cluster.app, "linkage", "average or complete");
    cluster.flags.bind(cluster.app, "quantiles", "comma list of levels in (0,1)");
    cluster.flags.bind_flag(cluster.app, "sensitivity", "also compute the leave-one-out score");
    cluster.flags.bind_flag(cluster.app, "baseline", "also run the angle k-means baseline");

    Command grid;
    grid.app = app.add_subcommand("grid", "hyperparameter sweep with a resumable ledger");
    bind_common(grid);
    bind_data(grid);
    grid.flags.bind(grid.app, "profile_len", "timesteps per daily profile");
    grid.flags.bind(grid.app, "alpha", "document-topic prior (default 1/K)");
    grid.flags.bind(grid.app, "quantiles", "comma list of levels in (0,1)");
    grid.flags.bind(grid.app, "grid_c", "comma list of C values");
    grid.flags.bind(grid.app, "grid_k", "comma list of K values");
    grid.flags.bind(grid.app, "grid_w", "comma list of W values");
    grid.flags.bind(grid.app, "grid_metrics", "comma list of metrics");
    grid.flags.bind(grid.app, "grid_linkages", "comma list of linkages");
    grid.flags.bind(grid.app, "grid_seeds", "comma list of seeds (default: the run seed)");
    grid.flags.bind_flag(grid.app, "timings", "record wall times in the ledger");

    Command impute;
    impute.app = app.add_subcommand("impute", "fill one system's gaps from its cluster peers");
    bind_common(impute);
    bind_data(impute);
    impute.flags.bind(impute.app, "impute_system", "system id to fill");
    impute.flags.bind(impute.app, "impute_q", "quantile level used for filling");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (synth.app->parsed()) return cmd_synth(synth);
        if (embed.app->parsed()) return cmd_embed(embed);
        if (cluster.app->parsed()) return cmd_cluster(cluster);
        if (grid.app->parsed()) return cmd_grid(grid);
        if (impute.app->parsed()) return cmd_impute(impute);
    } catch (const pvclust::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

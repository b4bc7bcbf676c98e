#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "pvclust/pipeline.hpp"
#include "pvclust/synthgen.hpp"
#include "support/tempdir.hpp"

using namespace pvclust;

namespace {

struct Fleet {
    SynthOutput out;
    RawSeriesTable norm;
    RunConfig cfg;

    explicit Fleet(double missing_rate = 0.1) {
        SynthConfig sc;
        sc.u = 12;
        sc.days = 30;
        sc.groups = 3;
        sc.resolution = 60;
        sc.missing_day_rate = missing_rate;
        sc.seed = 11;
        out = generate(sc);
        norm = normalize_by_capacity(out.table, out.meta);
        cfg.profile_len = 24;
        cfg.k = 3;
        cfg.w = 8;
        cfg.c = 3;
        cfg.seed = 4;
        cfg.quantiles = {0.25, 0.5, 0.75};
    }
};

} // namespace

TEST_CASE("embed_fleet produces the gamma-sum invariant for every system") {
    Fleet fleet;
    const auto result = embed_fleet(fleet.norm, fleet.cfg);
    CHECK(result.excluded.empty());
    REQUIRE(result.embeddings.size() == 12);
    const double alpha = fleet.cfg.resolved_alpha();
    for (std::size_t i = 0; i < result.embeddings.size(); ++i) {
        const auto& emb = result.embeddings[i];
        REQUIRE(emb.gamma.size() == 3);
        double sum = 0.0;
        for (double g : emb.gamma) {
            CHECK(g > 0.0);
            sum += g;
        }
        const double expect = static_cast<double>(result.profiles[i].n_profiles()) + 3 * alpha;
        CHECK(sum == Catch::Approx(expect).margin(1e-6));
        CHECK(emb.n_u == result.profiles[i].n_profiles());
    }
}

TEST_CASE("a cached vocabulary reproduces the embeddings bit-exactly") {
    Fleet fleet;
    const auto first = embed_fleet(fleet.norm, fleet.cfg);
    CHECK_FALSE(first.vocab_cached);
    const auto second = embed_fleet(fleet.norm, fleet.cfg, &first.vocab);
    CHECK(second.vocab_cached);
    REQUIRE(second.embeddings.size() == first.embeddings.size());
    for (std::size_t i = 0; i < first.embeddings.size(); ++i) {
        CHECK(second.embeddings[i].gamma == first.embeddings[i].gamma);
    }

    // a vocabulary of the wrong width is rejected
    Vocabulary narrow = first.vocab;
    narrow.profile_len = 10;
    CHECK_THROWS_AS(embed_fleet(fleet.norm, fleet.cfg, &narrow), DataError);
}

TEST_CASE("cluster_fleet scores and summarizes the cut") {
    Fleet fleet;
    const auto emb = embed_fleet(fleet.norm, fleet.cfg);
    const auto scoring = subset_rows(fleet.norm, emb.kept_rows);
    const auto result = cluster_fleet(emb.embeddings, scoring, fleet.cfg);
    CHECK(result.dist.size() == 12);
    CHECK(result.assignment.labels.size() == 12);
    CHECK(result.summaries.size() == 3);
    CHECK(result.min_cluster_size >= 1);
    CHECK(std::isfinite(result.disp.mean));
    if (result.min_cluster_size >= 2) {
        CHECK(result.sens_ran);
        CHECK(std::isfinite(result.sens.mean));
    }
}

TEST_CASE("impute fills missing days from cluster peers") {
    // 4 systems in one cluster, 2 days of 4 steps; sysD loses all of day 2
    RawSeriesTable table;
    table.system_ids = {"sysA", "sysB", "sysC", "sysD"};
    table.step_seconds = 21600;
    for (int t = 0; t < 8; ++t) table.timestamps.push_back(21600LL * t);
    const double nan = kMissing;
    // capacities all 100 -> normalized = value / 100
    table.values = {
        // day 1              day 2
        0, 10, 20, 10,        0, 12, 22, 12,   // sysA
        0, 20, 40, 20,        0, 22, 42, 22,   // sysB
        0, 30, 60, 30,        0, 32, 62, 32,   // sysC
        0, 40, 80, 40,        nan, nan, nan, nan,  // sysD: day 2 gone
    };
    MetadataSet meta = {{"sysA", 100, 30, 180},
                        {"sysB", 100, 30, 180},
                        {"sysC", 100, 30, 180},
                        {"sysD", 100, 30, 180}};
    const std::vector<std::pair<std::string, int>> assignment = {
        {"sysA", 0}, {"sysB", 0}, {"sysC", 0}, {"sysD", 0}};

    const auto result = impute_series(table, meta, assignment, "sysD", 0.5);
    CHECK(result.n_imputed == 4);
    CHECK(result.n_unfillable == 0);
    // observed day 1 untouched
    for (int t = 0; t < 4; ++t) {
        CHECK(result.values[static_cast<std::size_t>(t)] == table.at(3, static_cast<std::size_t>(t)));
        CHECK(result.imputed[static_cast<std::size_t>(t)] == 0);
    }
    // day 2 filled with the 3 peers' median (middle value), rescaled by 100
    CHECK(result.values[4] == 0.0);
    CHECK(result.values[5] == Catch::Approx(22.0).margin(1e-12));
    CHECK(result.values[6] == Catch::Approx(42.0).margin(1e-12));
    CHECK(result.values[7] == Catch::Approx(22.0).margin(1e-12));
    for (int t = 4; t < 8; ++t) CHECK(result.imputed[static_cast<std::size_t>(t)] == 1);
}

TEST_CASE("imputing a fully observed system is a no-op") {
    Fleet fleet(0.0);
    std::vector<std::pair<std::string, int>> assignment;
    for (std::size_t u = 0; u < fleet.out.table.n_systems(); ++u)
        assignment.emplace_back(fleet.out.table.system_ids[u],
                                fleet.out.groups[u]);
    const auto& id = fleet.out.table.system_ids[5];
    const auto result = impute_series(fleet.out.table, fleet.out.meta, assignment, id, 0.5);
    CHECK(result.n_imputed == 0);
    CHECK(result.n_unfillable == 0);
    for (std::size_t t = 0; t < result.values.size(); ++t) {
        CHECK(result.values[t] == fleet.out.table.at(5, t));
        CHECK(result.imputed[t] == 0);
    }
}

TEST_CASE("gaps with no peer coverage stay missing and are counted") {
    RawSeriesTable table;
    table.system_ids = {"a", "b", "c"};
    table.step_seconds = 21600;
    for (int t = 0; t < 4; ++t) table.timestamps.push_back(21600LL * t);
    const double nan = kMissing;
    table.values = {
        1, nan, 3, 4,    // a: gap at t=1
        2, nan, 5, 6,    // b: its only peer also missing at t=1
        9, 9, 9, 9,      // c: different cluster
    };
    MetadataSet meta = {{"a", 10, 0, 0}, {"b", 10, 0, 0}, {"c", 10, 0, 0}};
    const std::vector<std::pair<std::string, int>> assignment = {{"a", 0}, {"b", 0}, {"c", 1}};
    const auto result = impute_series(table, meta, assignment, "a", 0.5);
    CHECK(result.n_imputed == 0);
    CHECK(result.n_unfillable == 1);
    CHECK(is_missing(result.values[1]));
    CHECK(result.imputed[1] == 0);

    testsupport::TempDir tmp;
    save_imputed(result, tmp.file("imputed.csv"));
    const auto lines = csv::read_lines(tmp.file("imputed.csv"));
    REQUIRE(lines.size() == 5);
    CHECK(lines[0] == "timestamp,value,imputed");
    CHECK(lines[2] == "1970-01-01T06:00:00,,0");  // unfillable stays empty
}

TEST_CASE("impute validates its inputs") {
    RawSeriesTable table;
    table.system_ids = {"a", "b"};
    table.step_seconds = 43200;
    table.timestamps = {0, 43200};
    table.values = {1, 2, 3, 4};
    MetadataSet meta = {{"a", 10, 0, 0}, {"b", 10, 0, 0}};
    const std::vector<std::pair<std::string, int>> assignment = {{"a", 0}, {"b", 0}};
    CHECK_THROWS_WITH(impute_series(table, meta, assignment, "zz", 0.5),
                      Catch::Matchers::ContainsSubstring("zz"));
    CHECK_THROWS_AS(impute_series(table, meta, {{"b", 0}}, "a", 0.5), DataError);
}

TEST_CASE("embedding the same fleet twice is bit-identical end to end") {
    Fleet fleet;
    const auto a = embed_fleet(fleet.norm, fleet.cfg);
    const auto b = embed_fleet(fleet.norm, fleet.cfg);
    CHECK(a.vocab.centroids == b.vocab.centroids);
    CHECK(a.model.log_topic_word == b.model.log_topic_word);
    for (std::size_t i = 0; i < a.embeddings.size(); ++i)
        CHECK(a.embeddings[i].gamma == b.embeddings[i].gamma);
}

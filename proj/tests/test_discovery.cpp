#include "gacbo/discovery.hpp"

#include "sampler_oracle.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>

using namespace gacbo;

namespace {

ComponentScoreTable forced_chain_table() {
    // All mass on (y: parents {z}) and (z: parents none); x unreachable.
    ComponentScoreTable t;
    t.m = 2;
    t.num_actions = 0;
    t.per_node.resize(3);
    t.per_node[0] = {{0b000, 0, 0.0}};
    t.per_node[1] = {{0b000, 0, 1000.0}, {0b001, 0, 0.0}};
    t.per_node[2] = {{0b010, 0, 1000.0}, {0b000, 0, 0.0}};
    return t;
}

DataLog toy_observational_log(std::uint64_t seed, int n) {
    Rng rng = make_stream(seed, 99);
    std::normal_distribution<double> noise(0.0, 0.1);
    DataLog log;
    for (int i = 0; i < n; ++i) {
        Sample s;
        s.values = Vec(3);
        s.values[0] = noise(rng);
        s.values[1] = std::exp(-s.values[0]) + noise(rng);
        s.values[2] = std::cos(s.values[1]) - std::exp(-s.values[1] / 20.0) + noise(rng);
        log.push_back(s);
    }
    return log;
}

}  // namespace

TEST_CASE("find_subgraph forced outcomes") {
    SECTION("target forced parentless gives the single-node graph") {
        ComponentScoreTable t;
        t.m = 2;
        t.num_actions = 0;
        t.per_node.resize(3);
        t.per_node[0] = {{0b000, 0, 0.0}, {0b010, 0, 5.0}};
        t.per_node[1] = {{0b000, 0, 0.0}, {0b001, 0, 5.0}};
        t.per_node[2] = {{0b000, 0, 0.0}};
        Rng rng = make_stream(1, 0);
        const Dag g = find_subgraph(t, rng);
        CHECK(g == Dag(2, 0));
    }
    SECTION("forced chain z -> y") {
        Rng rng = make_stream(2, 0);
        for (int k = 0; k < 20; ++k) {
            const Dag g = find_subgraph(forced_chain_table(), rng);
            CHECK(g.parents[2] == 0b010u);
            CHECK(g.parents[1] == 0u);
            CHECK(g.parents[0] == 0u);
        }
    }
}

TEST_CASE("sample_graphs bookkeeping") {
    SECTION("n = 1 gives one graph") {
        Rng rng = make_stream(3, 0);
        CHECK(sample_graphs(1, forced_chain_table(), rng).size() == 1);
    }
    SECTION("forced table collapses to one entry with full multiplicity") {
        Rng rng = make_stream(4, 0);
        const auto out = sample_graphs(100, forced_chain_table(), rng);
        REQUIRE(out.size() == 1);
        CHECK(out[0].second == 100);
    }
    SECTION("fixed seed reproduces the multiset") {
        const auto table = gacbo_test::fixed_three_node_table();
        Rng r1 = make_stream(5, 0), r2 = make_stream(5, 0);
        const auto a = sample_graphs(50, table, r1);
        const auto b = sample_graphs(50, table, r2);
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i].first == b[i].first);
            CHECK(a[i].second == b[i].second);
        }
    }
}

TEST_CASE("sampled graphs are acyclic with correct support") {
    const auto table = gacbo_test::fixed_three_node_table();
    const auto exact = gacbo_test::exact_subgraph_probs(table);
    Rng rng = make_stream(6, 0);
    for (int k = 0; k < 500; ++k) {
        const Dag g = find_subgraph(table, rng);
        CHECK(is_acyclic(g));
        CHECK(exact.count(to_text(g)) == 1);  // never outside the exact support
    }
}

TEST_CASE("sampler frequencies track the exact recursion-tree law") {
    const auto table = gacbo_test::fixed_three_node_table();
    const auto exact = gacbo_test::exact_subgraph_probs(table);
    double mass = 0.0;
    for (const auto& [text, p] : exact) {
        (void)text;
        CHECK(p >= 0.0);
        mass += p;
    }
    CHECK(mass == Catch::Approx(1.0).epsilon(1e-12));

    const int n = 4000;
    std::map<std::string, int> counts;
    Rng rng = make_stream(7, 0);
    for (int k = 0; k < n; ++k) ++counts[to_text(find_subgraph(table, rng))];
    for (const auto& [text, p] : exact) {
        const double se = std::sqrt(p * (1.0 - p) / n);
        const double freq = counts[text] / static_cast<double>(n);
        CHECK(std::abs(freq - p) <= 4.0 * se + 1e-12);
    }
}

TEST_CASE("mixture moments") {
    SECTION("single graph is degenerate") {
        const Moments m = mixture_moments({1.0}, {0.7}, {0.2});
        CHECK(m.mean == Catch::Approx(0.7));
        CHECK(m.var == Catch::Approx(0.2));
    }
    SECTION("symmetric means contribute disagreement variance") {
        const Moments m = mixture_moments({0.5, 0.5}, {1.0, -1.0}, {0.0, 0.0});
        CHECK(m.mean == Catch::Approx(0.0).margin(1e-15));
        CHECK(m.var == Catch::Approx(1.0).epsilon(1e-12));
    }
    SECTION("agreement passes through") {
        const Moments m = mixture_moments({0.3, 0.7}, {0.4, 0.4}, {0.09, 0.09});
        CHECK(m.mean == Catch::Approx(0.4));
        CHECK(m.var == Catch::Approx(0.09));
    }
}

TEST_CASE("update_plausible") {
    const double beta = 1.0;
    ScoringContext ctx;
    ctx.noise_scales = {0.1, 0.1, 0.1};
    const auto all = enumerate_dags(2, 0);
    DiscoveryConfig cfg;

    SECTION("no data keeps everything uniform") {
        PlausibleSet prev = PlausibleSet::uniform(all, beta);
        ComponentGpStore store;
        Rng rng = make_stream(8, 0);
        const PlausibleSet next = update_plausible(prev, {}, nullptr, ctx, store, cfg, rng);
        CHECK(next.size() == prev.size());
        for (double w : next.weights) CHECK(w == Catch::Approx(1.0 / all.size()));
        CHECK(next.generation == prev.generation + 1);
    }
    SECTION("huge beta never eliminates") {
        PlausibleSet prev = PlausibleSet::uniform(all, 1e9);
        DiscoveryConfig loose = cfg;
        loose.weight_floor = 0.0;
        ComponentGpStore store;
        Rng rng = make_stream(9, 0);
        const DataLog log = toy_observational_log(47, 10);
        const auto table = build_score_table(log, 2, 0, ctx);
        const PlausibleSet next =
            update_plausible(prev, log, &table, ctx, store, loose, rng);
        CHECK(next.size() == prev.size());
    }
    SECTION("nesting holds round over round") {
        PlausibleSet plaus = PlausibleSet::uniform(all, beta);
        DataLog log;
        Rng rng = make_stream(10, 0);
        Rng env = make_stream(10, 1);
        std::normal_distribution<double> noise(0.0, 0.1);
        for (int t = 0; t < 8; ++t) {
            Sample s;
            s.values = Vec(3);
            s.values[0] = noise(env);
            s.values[1] = std::exp(-s.values[0]) + noise(env);
            s.values[2] = std::cos(s.values[1]) - std::exp(-s.values[1] / 20.0) + noise(env);
            log.push_back(s);
            ComponentGpStore store;
            const auto table = build_score_table(log, 2, 0, ctx);
            const PlausibleSet prev = plaus;
            plaus = update_plausible(prev, log, &table, ctx, store, cfg, rng);
            CHECK(plaus.size() >= 1);
            double total = 0.0;
            for (double w : plaus.weights) total += w;
            CHECK(total == Catch::Approx(1.0).epsilon(1e-9));
            for (const Dag& g : plaus.graphs)
                CHECK(std::find(prev.graphs.begin(), prev.graphs.end(), g) != prev.graphs.end());
        }
    }
    SECTION("true chain survives long observational runs") {
        Dag truth(2, 0);
        truth.add_edge(0, 1);
        truth.add_edge(1, 2);
        int hits = 0;
        for (std::uint64_t seed : {47ull, 42ull, 73ull, 66ull, 13ull}) {
            PlausibleSet plaus = PlausibleSet::uniform(all, beta);
            DataLog log = toy_observational_log(seed, 0);
            Rng rng = make_stream(seed, 2);
            const DataLog full = toy_observational_log(seed, 40);
            for (int t = 1; t <= 40; ++t) {
                log.push_back(full[t - 1]);
                ComponentGpStore store;
                const auto table = build_score_table(log, 2, 0, ctx);
                plaus = update_plausible(plaus, log, &table, ctx, store, cfg, rng);
            }
            for (const Dag& g : plaus.graphs)
                if (g == truth) ++hits;
        }
        CHECK(hits >= 4);
    }
}

TEST_CASE("build_score_table covers the admissible space") {
    const DataLog log = toy_observational_log(1, 6);
    ScoringContext ctx;
    ctx.noise_scales = {0.1, 0.1, 0.1};
    const auto table = build_score_table(log, 2, 0, ctx);
    REQUIRE(table.per_node.size() == 3);
    CHECK(table.per_node[0].size() == 2);  // subsets of {1}
    CHECK(table.per_node[1].size() == 2);  // subsets of {0}
    CHECK(table.per_node[2].size() == 4);  // subsets of {0,1}
    for (const auto& node : table.per_node) {
        for (std::size_t i = 1; i < node.size(); ++i) {
            const bool ordered = node[i - 1].parents < node[i].parents ||
                                 (node[i - 1].parents == node[i].parents &&
                                  node[i - 1].actions < node[i].actions);
            CHECK(ordered);
        }
        for (const auto& c : node) CHECK(std::isfinite(c.log_score));
    }
}

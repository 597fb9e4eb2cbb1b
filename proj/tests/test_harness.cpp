#include "gacbo/harness.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <sstream>

using namespace gacbo;

namespace {

RunConfig small_toygraph(const std::string& algo, int rounds,
                         std::vector<std::uint64_t> seeds = {47}) {
    RunConfig cfg;
    cfg.env = "toygraph";
    cfg.algo = algo;
    cfg.rounds = rounds;
    cfg.seeds = std::move(seeds);
    cfg.budget.restarts = 32;
    cfg.budget.local_steps = 20;
    return cfg;
}

RoundRecord make_record(std::uint64_t seed, int round, double reward, double regret) {
    RoundRecord r;
    r.seed = seed;
    r.round = round;
    r.algo = "mcbo";
    r.env = "toygraph";
    r.intervention = "do[]";
    r.reward = reward;
    r.expected_reward = reward;
    r.regret = regret;
    r.n_plausible = 1;
    return r;
}

}  // namespace

TEST_CASE("run_experiment basics") {
    SECTION("zero rounds gives no records") {
        const auto records = run_experiment(small_toygraph("mcbo", 0));
        CHECK(records.empty());
    }
    SECTION("bad algorithm / environment pairings are rejected") {
        CHECK_THROWS(run_experiment(small_toygraph("gacbo-s", 1)));
        CHECK_THROWS(run_experiment(small_toygraph("gp-ucb", 1)));
        CHECK_THROWS(run_experiment(small_toygraph("nope", 1)));
        RunConfig soft = small_toygraph("gacbo-h", 1);
        soft.env = "dropwave";
        CHECK_THROWS(run_experiment(soft));
    }
    SECTION("a broken seed aborts with a logged reason, run continues") {
        RunConfig cfg = small_toygraph("mcbo", 1);
        cfg.graph_file = "/nonexistent/graph.txt";
        std::ostringstream errors;
        const auto records = run_experiment(cfg, nullptr, &errors);
        CHECK(records.empty());
        CHECK(errors.str().find("aborted") != std::string::npos);
    }
}

TEST_CASE("mcbo with the true graph keeps it") {
    const auto records = run_experiment(small_toygraph("mcbo", 3));
    REQUIRE(records.size() == 3);
    for (const auto& r : records) {
        CHECK(r.n_plausible == 1);
        CHECK(r.w_true_graph == 1.0);
        CHECK(r.regret >= -1e-9);
    }
}

TEST_CASE("gacbo-h on toygraph is deterministic and well-formed") {
    const RunConfig cfg = small_toygraph("gacbo-h", 3, {47, 42});
    const auto a = run_experiment(cfg);
    const auto b = run_experiment(cfg);
    REQUIRE(a.size() == 6);
    REQUIRE(b.size() == 6);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].seed == b[i].seed);
        CHECK(a[i].round == b[i].round);
        CHECK(a[i].intervention == b[i].intervention);
        CHECK(a[i].reward == b[i].reward);
        CHECK(a[i].expected_reward == b[i].expected_reward);
        CHECK(a[i].regret == b[i].regret);
        CHECK(a[i].n_plausible == b[i].n_plausible);
        CHECK(a[i].w_true_graph == b[i].w_true_graph);
    }
    for (const auto& r : a) {
        CHECK(r.regret >= -1e-9);
        CHECK(r.n_plausible >= 1);
        CHECK(r.w_true_graph >= 0.0);
        CHECK(r.w_true_graph <= 1.0);
    }
}

TEST_CASE("soft algorithms run on dropwave") {
    RunConfig cfg;
    cfg.env = "dropwave";
    cfg.rounds = 2;
    cfg.seeds = {47};
    cfg.budget.restarts = 16;
    cfg.budget.local_steps = 10;
    for (const std::string algo : {"gacbo-s", "mcbo", "gp-ucb"}) {
        cfg.algo = algo;
        const auto records = run_experiment(cfg);
        REQUIRE(records.size() == 2);
        for (const auto& r : records) {
            CHECK(r.intervention.rfind("soft[", 0) == 0);
            CHECK(r.regret >= -1e-9);
        }
    }
}

TEST_CASE("graph log dumps nest across rounds") {
    RunConfig cfg = small_toygraph("gacbo-h", 4);
    cfg.log_graphs = true;
    cfg.sampling = false;
    std::ostringstream dump;
    const auto records = run_experiment(cfg, &dump);
    REQUIRE(records.size() == 4);

    std::istringstream in(dump.str());
    std::string line;
    std::vector<std::vector<std::string>> rounds;  // graph texts per round
    std::vector<std::string> current;
    std::string graph_text;
    int depth = 0;
    while (std::getline(in, line)) {
        if (line.rfind("begin ", 0) == 0) {
            current.clear();
            depth = 1;
        } else if (line == "end") {
            rounds.push_back(current);
            depth = 0;
        } else if (line.rfind("graph weight=", 0) == 0) {
            if (!graph_text.empty()) current.push_back(graph_text);
            graph_text.clear();
        } else if (depth == 1 && line.rfind("node:", 0) == 0) {
            graph_text += line + "\n";
            if (line.rfind("node:2", 0) == 0) {
                current.push_back(graph_text);
                graph_text.clear();
            }
        }
    }
    REQUIRE(rounds.size() == 4);
    for (std::size_t t = 1; t < rounds.size(); ++t) {
        for (const auto& g : rounds[t]) {
            CHECK(std::find(rounds[t - 1].begin(), rounds[t - 1].end(), g) !=
                  rounds[t - 1].end());
        }
    }
}

TEST_CASE("compute_metrics") {
    SECTION("constant reward gives linear cumulative regret") {
        std::vector<RoundRecord> records;
        const double reward = 0.2, best = 0.9;
        const int T = 7;
        for (int t = 1; t <= T; ++t) records.push_back(make_record(47, t, reward, best - reward));
        const Summary s = compute_metrics(records);
        CHECK(s.n_seeds == 1);
        CHECK(s.rounds == T);
        CHECK(s.final_cum_regret == Catch::Approx(T * (best - reward)).epsilon(1e-12));
        CHECK(s.final_mean_reward == Catch::Approx(reward));
        for (double se : s.stderr_expected_reward) CHECK(se == 0.0);
    }
    SECTION("identical seeds have zero standard error") {
        std::vector<RoundRecord> records;
        for (std::uint64_t seed : {47ull, 42ull, 73ull, 66ull, 13ull})
            for (int t = 1; t <= 3; ++t) records.push_back(make_record(seed, t, 0.4, 0.1));
        const Summary s = compute_metrics(records);
        CHECK(s.n_seeds == 5);
        for (double se : s.stderr_expected_reward) CHECK(se == Catch::Approx(0.0).margin(1e-15));
    }
    SECTION("record order does not matter") {
        std::vector<RoundRecord> records;
        Rng rng = make_stream(12, 0);
        for (std::uint64_t seed : {47ull, 42ull})
            for (int t = 1; t <= 5; ++t)
                records.push_back(make_record(seed, t, uniform_in(rng, -1.0, 1.0), 0.3));
        std::vector<RoundRecord> shuffled = records;
        std::reverse(shuffled.begin(), shuffled.end());
        const Summary a = compute_metrics(records);
        const Summary b = compute_metrics(shuffled);
        REQUIRE(a.mean_expected_reward.size() == b.mean_expected_reward.size());
        for (std::size_t i = 0; i < a.mean_expected_reward.size(); ++i) {
            CHECK(a.mean_expected_reward[i] ==
                  Catch::Approx(b.mean_expected_reward[i]).margin(1e-12));
            CHECK(a.mean_cum_regret[i] == Catch::Approx(b.mean_cum_regret[i]).margin(1e-12));
        }
    }
}

TEST_CASE("csv output") {
    RoundRecord r = make_record(47, 1, 0.5, 0.75);
    r.algo = "gacbo-h";
    r.intervention = "do[1=2]";
    r.expected_reward = 0.25;
    r.n_plausible = 3;
    r.w_true_graph = 0.125;
    r.ms = 7;
    std::ostringstream out;
    write_csv(out, {r});
    CHECK(out.str() ==
          "seed,round,algo,env,intervention,reward,expected_reward,regret,n_plausible,"
          "w_true_graph,ms\n"
          "47,1,gacbo-h,toygraph,do[1=2],0.5,0.25,0.75,3,0.125,7\n");
    CHECK(format_double(1.0 / 3.0) == "0.3333333333");
    CHECK(format_double(-2.0) == "-2");
}

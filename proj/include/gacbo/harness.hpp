#pragma once

#include "gacbo/acquisition.hpp"
#include "gacbo/discovery.hpp"
#include "gacbo/envs.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <string>
#include <vector>

namespace gacbo {

struct RunConfig {
    std::string env = "toygraph";
    std::string algo = "gacbo-h";  // gacbo-s | gacbo-h | mcbo | gp-ucb
    int rounds = 150;
    std::vector<std::uint64_t> seeds = {47, 42, 73, 66, 13};
    double beta = -1.0;  // < 0: use the environment default
    int n_graph_samples = 20;
    SearchBudget budget;
    bool with_noise = true;
    bool sampling = true;  // fresh subgraph samples during plausible-set updates
    std::string graph_file;  // mcbo: supplied (possibly wrong) graph
    bool log_graphs = false;
    EnvOptions env_opts;
    int grid_points = 5;
    int enumeration_cap = 4;
};

struct RoundRecord {
    std::uint64_t seed = 0;
    int round = 0;
    std::string algo, env;
    std::string intervention;
    double reward = 0.0;
    double expected_reward = 0.0;
    double regret = 0.0;
    int n_plausible = 0;
    double w_true_graph = 0.0;
    long long ms = 0;
};

namespace detail {

inline void validate(const RunConfig& cfg, const EnvSpec& spec) {
    const bool hard_env = !spec.soft;
    if (cfg.algo == "gacbo-s" && hard_env)
        throw std::invalid_argument("gacbo-s requires a soft-intervention environment");
    if (cfg.algo == "gacbo-h" && !hard_env)
        throw std::invalid_argument("gacbo-h requires a hard-intervention environment");
    if (cfg.algo == "gp-ucb" && hard_env)
        throw std::invalid_argument("gp-ucb only applies to soft-intervention environments");
    if (cfg.algo != "gacbo-s" && cfg.algo != "gacbo-h" && cfg.algo != "mcbo" &&
        cfg.algo != "gp-ucb")
        throw std::invalid_argument("unknown algorithm: " + cfg.algo);
}

inline Dag load_graph(const RunConfig& cfg, const EnvSpec& spec) {
    if (cfg.graph_file.empty()) return spec.true_dag;
    std::ifstream in(cfg.graph_file);
    if (!in) throw std::runtime_error("cannot open graph file: " + cfg.graph_file);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return dag_from_text(text);
}

inline void dump_plausible(std::ostream& out, std::uint64_t seed, int round,
                           const PlausibleSet& plaus) {
    out << "begin seed=" << seed << " round=" << round << '\n';
    for (std::size_t i = 0; i < plaus.size(); ++i) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.10g", plaus.weights[i]);
        out << "graph weight=" << buf << '\n' << to_text(plaus.graphs[i]);
    }
    out << "end\n";
}

}  // namespace detail

/// Full experiment loop: per seed, update plausible graphs, select the
/// optimistic action, step the environment, and append the observation.
/// Deterministic per seed. A module error aborts that seed with a logged
/// reason; remaining seeds continue.
inline std::vector<RoundRecord> run_experiment(const RunConfig& cfg,
                                               std::ostream* graph_log = nullptr,
                                               std::ostream* errors = nullptr) {
    const Environment env = make_env(cfg.env, cfg.env_opts);
    const EnvSpec& spec = env.spec();
    detail::validate(cfg, spec);
    const double beta = cfg.beta >= 0.0 ? cfg.beta : spec.beta_default;
    const auto [best_iv, best_reward] = env.best_arm();
    (void)best_iv;

    const bool is_gacbo = cfg.algo == "gacbo-s" || cfg.algo == "gacbo-h";
    const bool flat = cfg.algo == "gp-ucb";

    std::vector<RoundRecord> records;
    for (std::uint64_t seed : cfg.seeds) {
        try {
            ScoringContext ctx;
            ctx.noise_scales = spec.noise_scales;
            ctx.grid_points = cfg.grid_points;

            // The flat baseline models y directly from the action box.
            Dag flat_dag(0, spec.num_actions);
            if (flat && spec.num_actions > 0) flat_dag.actions[0] = (1u << spec.num_actions) - 1;
            ScoringContext flat_ctx;
            flat_ctx.noise_scales = {spec.noise_scales.back()};
            flat_ctx.grid_points = cfg.grid_points;

            PlausibleSet plaus;
            if (is_gacbo) {
                DagConstraints constraints;
                constraints.cap = cfg.enumeration_cap;
                constraints.actions_on_target = spec.hyp_actions_on_target;
                plaus = PlausibleSet::uniform(
                    enumerate_dags(spec.m, spec.num_actions, constraints), beta);
            } else if (flat) {
                plaus = PlausibleSet::uniform({flat_dag}, beta);
            } else {
                plaus = PlausibleSet::uniform({detail::load_graph(cfg, spec)}, beta);
            }
            const Dag supplied = plaus.graphs.size() == 1 ? plaus.graphs.front() : Dag();

            DataLog log, flat_log;
            Rng env_rng = make_stream(seed, 0x5eedULL);
            Rng disc_rng = make_stream(seed, 0xd15cULL);
            DiscoveryConfig dcfg;
            dcfg.n_samples = cfg.n_graph_samples;
            dcfg.sampling_enabled = cfg.sampling;

            for (int t = 1; t <= cfg.rounds; ++t) {
                const auto t0 = std::chrono::steady_clock::now();
                ComponentGpStore store;

                if (is_gacbo) {
                    ComponentScoreTable table = build_score_table(
                        log, spec.m, spec.num_actions, ctx, spec.hyp_actions_on_target);
                    plaus = update_plausible(plaus, log, &table, ctx, store, dcfg, disc_rng,
                                             errors);
                }

                const DataLog& model_log = flat ? flat_log : log;
                const ScoringContext& model_ctx = flat ? flat_ctx : ctx;
                std::vector<SurrogateModel> models;
                for (const Dag& g : plaus.graphs)
                    models.push_back(build_surrogate(g, model_log, model_ctx, store, beta));

                SearchBudget budget = cfg.budget;
                budget.seed = seed * 0x100000001b3ULL + static_cast<std::uint64_t>(t);

                Proposal prop;
                if (cfg.algo == "gacbo-h" || (cfg.algo == "mcbo" && !spec.soft)) {
                    prop = select_action_hard(plaus, models, spec.intervenable, spec.node_boxes,
                                              budget, spec.intervention_family);
                } else {
                    prop = select_action_soft(plaus, models, spec.action_box, budget);
                }

                const Sample obs = env.step(prop.intervention, env_rng, cfg.with_noise);
                log.push_back(obs);
                if (flat) {
                    Sample fs;
                    fs.values = Vec::Constant(1, obs.values[spec.m]);
                    fs.action_values = obs.action_values;
                    flat_log.push_back(fs);
                }

                RoundRecord rec;
                rec.seed = seed;
                rec.round = t;
                rec.algo = cfg.algo;
                rec.env = cfg.env;
                rec.intervention = serialize(prop.intervention);
                rec.reward = obs.values[spec.m];
                rec.expected_reward = env.expected_reward(prop.intervention);
                rec.regret = best_reward - rec.expected_reward;
                rec.n_plausible = static_cast<int>(plaus.size());
                if (is_gacbo) {
                    for (std::size_t i = 0; i < plaus.size(); ++i)
                        if (plaus.graphs[i] == spec.true_dag) rec.w_true_graph = plaus.weights[i];
                } else {
                    rec.w_true_graph = (!flat && supplied == spec.true_dag) ? 1.0 : 0.0;
                }
                rec.ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                             std::chrono::steady_clock::now() - t0)
                             .count();
                records.push_back(std::move(rec));

                if (graph_log && cfg.log_graphs) detail::dump_plausible(*graph_log, seed, t, plaus);
            }
        } catch (const std::exception& e) {
            if (errors) *errors << "seed " << seed << " aborted: " << e.what() << '\n';
        }
    }
    return records;
}

struct Summary {
    int rounds = 0;
    int n_seeds = 0;
    std::vector<double> mean_expected_reward;    // per round, across seeds
    std::vector<double> stderr_expected_reward;  // sigma / sqrt(k)
    std::vector<double> mean_running_reward;     // running mean of the above
    std::vector<double> mean_cum_regret;
    double final_mean_reward = 0.0;
    double final_cum_regret = 0.0;
};

inline Summary compute_metrics(const std::vector<RoundRecord>& records) {
    Summary s;
    std::map<int, std::vector<double>> rewards_by_round;
    std::map<int, std::vector<double>> regrets_by_round;
    std::map<std::uint64_t, bool> seeds;
    for (const RoundRecord& r : records) {
        rewards_by_round[r.round].push_back(r.expected_reward);
        regrets_by_round[r.round].push_back(r.regret);
        seeds[r.seed] = true;
    }
    s.n_seeds = static_cast<int>(seeds.size());
    s.rounds = static_cast<int>(rewards_by_round.size());
    double running = 0.0, cum_regret = 0.0;
    int t = 0;
    for (const auto& [round, vals] : rewards_by_round) {
        (void)round;
        double mean = 0.0;
        for (double v : vals) mean += v;
        mean /= vals.size();
        double var = 0.0;
        for (double v : vals) var += (v - mean) * (v - mean);
        var = vals.size() > 1 ? var / vals.size() : 0.0;
        s.mean_expected_reward.push_back(mean);
        s.stderr_expected_reward.push_back(std::sqrt(var / vals.size()));
        running += mean;
        ++t;
        s.mean_running_reward.push_back(running / t);
        double rmean = 0.0;
        for (double v : regrets_by_round[round]) rmean += v;
        cum_regret += rmean / regrets_by_round[round].size();
        s.mean_cum_regret.push_back(cum_regret);
    }
    if (!s.mean_expected_reward.empty()) {
        s.final_mean_reward = s.mean_expected_reward.back();
        s.final_cum_regret = s.mean_cum_regret.back();
    }
    return s;
}

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

inline void write_csv(std::ostream& out, const std::vector<RoundRecord>& records) {
    out << "seed,round,algo,env,intervention,reward,expected_reward,regret,n_plausible,"
           "w_true_graph,ms\n";
    for (const RoundRecord& r : records) {
        out << r.seed << ',' << r.round << ',' << r.algo << ',' << r.env << ',' << r.intervention
            << ',' << format_double(r.reward) << ',' << format_double(r.expected_reward) << ','
            << format_double(r.regret) << ',' << r.n_plausible << ','
            << format_double(r.w_true_graph) << ',' << r.ms << '\n';
    }
}

}  // namespace gacbo

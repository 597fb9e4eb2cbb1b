#pragma once

#include "gacbo/scoring.hpp"
#include "gacbo/surrogate.hpp"

#include <cmath>
#include <iostream>
#include <utility>
#include <vector>

namespace gacbo {

struct ComponentChoice {
    std::uint32_t parents = 0;
    std::uint32_t actions = 0;
    double log_score = 0.0;
};

/// Per-node component scores over the admissible (parents, actions) space.
struct ComponentScoreTable {
    int m = 0;
    int num_actions = 0;
    std::vector<std::vector<ComponentChoice>> per_node;  // indexed by node id 0..m
};

/// Scores every admissible component of every node on the current log.
/// Parent candidates are subsets of the other non-target nodes; action
/// candidates are subsets of the action variables.
inline ComponentScoreTable build_score_table(const DataLog& log, int m, int num_actions,
                                             const ScoringContext& ctx,
                                             bool actions_on_target = false) {
    ComponentScoreTable table;
    table.m = m;
    table.num_actions = num_actions;
    table.per_node.resize(m + 1);
    const std::uint32_t observed = (m == 0) ? 0 : ((1u << m) - 1);
    for (int i = 0; i <= m; ++i) {
        const std::uint32_t parent_space = observed & ~(i < m ? (1u << i) : 0u);
        const std::uint32_t action_space =
            (i < m || actions_on_target) && num_actions > 0 ? ((1u << num_actions) - 1) : 0u;
        for (std::uint32_t zp = parent_space;; zp = (zp - 1) & parent_space) {
            for (std::uint32_t za = action_space;; za = (za - 1) & action_space) {
                table.per_node[i].push_back({zp, za, score_component(log, i, zp, za, ctx)});
                if (za == 0) break;
            }
            if (zp == 0) break;
        }
        std::sort(table.per_node[i].begin(), table.per_node[i].end(),
                  [](const ComponentChoice& a, const ComponentChoice& b) {
                      return a.parents != b.parents ? a.parents < b.parents : a.actions < b.actions;
                  });
    }
    return table;
}

namespace detail {

inline std::size_t multinomial_draw(const std::vector<double>& log_scores, Rng& rng) {
    double mx = log_scores.front();
    for (double s : log_scores) mx = std::max(mx, s);
    std::vector<double> w(log_scores.size());
    double total = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) total += w[i] = std::exp(log_scores[i] - mx);
    double u = uniform_in(rng, 0.0, total);
    for (std::size_t i = 0; i + 1 < w.size(); ++i) {
        if (u < w[i]) return i;
        u -= w[i];
    }
    return w.size() - 1;
}

inline void fisher_yates(std::vector<int>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        const auto j = std::uniform_int_distribution<std::size_t>(0, i - 1)(rng);
        std::swap(v[i - 1], v[j]);
    }
}

inline void find_subgraph_visit(const ComponentScoreTable& table, int node, Dag& g,
                                std::uint32_t& in_graph, std::vector<std::uint32_t>& descendants,
                                Rng& rng) {
    if ((in_graph >> node) & 1u) return;
    in_graph |= (1u << node);

    std::vector<const ComponentChoice*> admissible;
    std::vector<double> log_scores;
    for (const ComponentChoice& c : table.per_node[node]) {
        if (c.parents & descendants[node]) continue;
        admissible.push_back(&c);
        log_scores.push_back(c.log_score);
    }
    if (admissible.empty()) {
        // Empty-parent components never intersect the descendant list, so this
        // only happens for tables without them; fall back to no parents.
        g.parents[node] = 0;
        g.actions[node] = 0;
        return;
    }
    const ComponentChoice& chosen = *admissible[multinomial_draw(log_scores, rng)];
    g.parents[node] = chosen.parents;
    g.actions[node] = chosen.actions;
    if (chosen.parents == 0) return;

    std::vector<int> perm;
    for (int j = 0; j <= table.m; ++j)
        if ((chosen.parents >> j) & 1u) perm.push_back(j);
    fisher_yates(perm, rng);
    for (int j : perm) {
        descendants[j] |= descendants[node] | (1u << node);
        find_subgraph_visit(table, j, g, in_graph, descendants, rng);
    }
}

}  // namespace detail

/// Recursive subgraph sampler: starting from the target, draw each visited
/// node's component from the multinomial over its admissible scores, with
/// components containing recorded descendants eliminated, and recurse into
/// the chosen parents in a uniformly random order. Nodes never reached keep
/// empty parents and actions. Acyclic by construction of the descendant lists.
inline Dag find_subgraph(const ComponentScoreTable& table, Rng& rng) {
    Dag g(table.m, table.num_actions);
    std::uint32_t in_graph = 0;
    std::vector<std::uint32_t> descendants(table.m + 1, 0);
    detail::find_subgraph_visit(table, table.m, g, in_graph, descendants, rng);
    return g;
}

/// n independent find_subgraph draws, deduplicated with multiplicities in
/// order of first appearance. Deterministic given the rng state.
inline std::vector<std::pair<Dag, int>> sample_graphs(int n, const ComponentScoreTable& table,
                                                      Rng& rng) {
    std::vector<std::pair<Dag, int>> out;
    for (int k = 0; k < n; ++k) {
        Dag g = find_subgraph(table, rng);
        bool found = false;
        for (auto& [dag, count] : out) {
            if (dag == g) {
                ++count;
                found = true;
                break;
            }
        }
        if (!found) out.emplace_back(std::move(g), 1);
    }
    return out;
}

struct Moments {
    double mean = 0.0;
    double var = 0.0;
};

/// Law of total expectation / total variance over weighted per-graph
/// posteriors: E = sum w mu, V = sum w (mu - E)^2 + sum w sigma^2.
inline Moments mixture_moments(const std::vector<double>& weights, const std::vector<double>& mus,
                               const std::vector<double>& vars) {
    Moments m;
    for (std::size_t i = 0; i < weights.size(); ++i) m.mean += weights[i] * mus[i];
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const double d = mus[i] - m.mean;
        m.var += weights[i] * (d * d + vars[i]);
    }
    return m;
}

/// Mixture moments of node `node` at a logged observation: each graph
/// projects the full observation onto its own parent/action coordinates.
inline Moments mixture_moments(int node, const Sample& s, const GraphPosterior& posterior,
                               const std::vector<SurrogateModel>& models) {
    std::vector<double> mus(posterior.size()), vars(posterior.size());
    for (std::size_t i = 0; i < posterior.size(); ++i) {
        const Dag& g = posterior.graphs[i];
        const Vec x = component_input(s, g.parents[node], g.actions[node]);
        auto [mu, var] = models[i].node_gps[node]->posterior_at(x);
        mus[i] = mu;
        vars[i] = var;
    }
    return mixture_moments(posterior.weights, mus, vars);
}

/// Current graph hypotheses with normalized weights.
struct PlausibleSet {
    std::vector<Dag> graphs;
    std::vector<double> weights;
    double beta = 0.5;
    int generation = 0;

    std::size_t size() const { return graphs.size(); }

    static PlausibleSet uniform(std::vector<Dag> graphs, double beta) {
        PlausibleSet p;
        p.weights.assign(graphs.size(), graphs.empty() ? 0.0 : 1.0 / graphs.size());
        p.graphs = std::move(graphs);
        p.beta = beta;
        return p;
    }
};

struct DiscoveryConfig {
    int n_samples = 20;            // fresh subgraph draws per round
    bool sampling_enabled = true;
    double weight_floor = 1e-8;    // drop graphs below this fraction of the max weight
};

/// One plausible-set refresh: fresh subgraph samples are drawn and intersected
/// with the previous generation, candidates are reweighted by the graph
/// posterior, and each graph must keep its node posteriors within the
/// beta-scaled mixture band at every logged observation. Never returns an
/// empty set: if everything is eliminated, the max-posterior candidate
/// survives and a warning is logged.
inline PlausibleSet update_plausible(const PlausibleSet& prev, const DataLog& log,
                                     const ComponentScoreTable* table, const ScoringContext& ctx,
                                     ComponentGpStore& store, const DiscoveryConfig& cfg, Rng& rng,
                                     std::ostream* warn = nullptr) {
    PlausibleSet next;
    next.beta = prev.beta;
    next.generation = prev.generation + 1;
    if (log.empty() || prev.graphs.empty()) {
        next.graphs = prev.graphs;
        next.weights.assign(prev.graphs.size(),
                            prev.graphs.empty() ? 0.0 : 1.0 / prev.graphs.size());
        return next;
    }

    // Candidate set: previous graphs plus fresh samples, restricted to the
    // previous generation (the nesting contract), which leaves the previous
    // graphs themselves.
    std::vector<Dag> candidates = prev.graphs;
    if (cfg.sampling_enabled && table != nullptr) {
        // Fresh samples may only enter if they already lie in the previous
        // generation (nesting); with candidates seeded from that generation
        // this can only re-add graphs dropped from `candidates` upstream.
        for (const auto& [g, count] : sample_graphs(cfg.n_samples, *table, rng)) {
            (void)count;
            if (std::find(prev.graphs.begin(), prev.graphs.end(), g) != prev.graphs.end() &&
                std::find(candidates.begin(), candidates.end(), g) == candidates.end())
                candidates.push_back(g);
        }
    }

    std::vector<double> log_likes(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i)
        log_likes[i] = graph_log_likelihood(candidates[i], log, ctx);
    GraphPosterior post = graph_posterior(candidates, log_likes);

    std::vector<SurrogateModel> models;
    models.reserve(candidates.size());
    for (const Dag& g : candidates) models.push_back(build_surrogate(g, log, ctx, store, prev.beta));

    // Band check at the logged observation inputs. Per-graph moments come
    // from the lengthscale-mixture posterior, so the variance stays honest
    // where the data leave the hyperparameters ambiguous. Distinct
    // components are shared across graphs and evaluated once.
    std::unordered_map<ComponentKey, std::vector<std::pair<double, double>>, ComponentKeyHash>
        evals;
    auto component_evals = [&](std::size_t gi, int node)
        -> const std::vector<std::pair<double, double>>& {
        const Dag& g = post.graphs[gi];
        ComponentData data =
            extract_component(log, node, g.parents[node], g.actions[node], ctx.noise_scales[node]);
        const ComponentKey key{node, g.parents[node], g.actions[node], data.size()};
        auto it = evals.find(key);
        if (it != evals.end()) return it->second;
        const HyperPrior prior = ctx.prior_for(
            data.empty() ? __builtin_popcount(g.parents[node]) + __builtin_popcount(g.actions[node])
                         : data.dim());
        const OutputScaling sc = output_scaling(data);
        const MixtureGp gp(prior, standardize(data, sc));
        std::vector<std::pair<double, double>> vals;
        vals.reserve(log.size());
        for (const Sample& s : log) {
            if ((s.intervened >> node) & 1u) continue;
            auto [mu, var] =
                gp.posterior_at(component_input(s, g.parents[node], g.actions[node]));
            vals.emplace_back(sc.mean + sc.scale * mu, sc.scale * sc.scale * var);
        }
        return evals.emplace(key, std::move(vals)).first->second;
    };

    const int nodes = candidates.front().num_nodes();
    std::vector<bool> alive(candidates.size(), true);
    for (int node = 0; node < nodes; ++node) {
        std::size_t rows = component_evals(0, node).size();
        for (std::size_t row = 0; row < rows; ++row) {
            std::vector<double> mus(candidates.size()), vars(candidates.size());
            for (std::size_t gi = 0; gi < candidates.size(); ++gi) {
                const auto& ev = component_evals(gi, node)[row];
                mus[gi] = ev.first;
                vars[gi] = ev.second;
            }
            const Moments mm = mixture_moments(post.weights, mus, vars);
            const double mix_band = prev.beta * std::sqrt(std::max(mm.var, 0.0));
            for (std::size_t gi = 0; gi < candidates.size(); ++gi) {
                // A graph stays plausible if some function in its own band,
                // mu +- beta*sigma, falls inside the mixture band around E.
                const double own_band = prev.beta * std::sqrt(std::max(vars[gi], 0.0));
                if (std::abs(mus[gi] - mm.mean) > mix_band + own_band + 1e-9)
                    alive[gi] = false;
            }
        }
    }

    std::vector<Dag> survivors;
    std::vector<double> survivor_likes;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (alive[i]) {
            survivors.push_back(candidates[i]);
            survivor_likes.push_back(log_likes[i]);
        }
    }
    if (survivors.empty()) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < post.weights.size(); ++i)
            if (post.weights[i] > post.weights[best]) best = i;
        survivors.push_back(candidates[best]);
        survivor_likes.push_back(log_likes[best]);
        if (warn) *warn << "warning: plausible set emptied; keeping max-posterior graph\n";
    }

    GraphPosterior reweighted = graph_posterior(survivors, survivor_likes);
    double max_w = 0.0;
    for (double w : reweighted.weights) max_w = std::max(max_w, w);
    for (std::size_t i = 0; i < reweighted.size(); ++i) {
        if (reweighted.weights[i] >= cfg.weight_floor * max_w) {
            next.graphs.push_back(reweighted.graphs[i]);
            next.weights.push_back(reweighted.weights[i]);
        }
    }
    double z = 0.0;
    for (double w : next.weights) z += w;
    for (double& w : next.weights) w /= z;
    return next;
}

}  // namespace gacbo

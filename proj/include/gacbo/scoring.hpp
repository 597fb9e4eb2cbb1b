#pragma once

#include "gacbo/dag.hpp"
#include "gacbo/gp.hpp"

#include <cmath>
#include <mutex>
#include <unordered_map>
#include <vector>

namespace gacbo {

/// One logged interaction: realized node values, the action vector (soft
/// setting; empty otherwise) and the mask of hard-intervened nodes.
struct Sample {
    Vec values;        // size m+1
    Vec action_values; // size q
    std::uint32_t intervened = 0;
};

using DataLog = std::vector<Sample>;

/// Canonical component input: parent values in ascending node index, then
/// action values in ascending action index.
inline Vec component_input(const Sample& s, std::uint32_t parents, std::uint32_t actions) {
    Vec x(__builtin_popcount(parents) + __builtin_popcount(actions));
    int k = 0;
    for (int j = 0; j < s.values.size(); ++j)
        if ((parents >> j) & 1u) x[k++] = s.values[j];
    for (int j = 0; j < s.action_values.size(); ++j)
        if ((actions >> j) & 1u) x[k++] = s.action_values[j];
    return x;
}

/// Regression dataset of node `node` against a candidate (parents, actions)
/// choice. Rounds where the node itself was hard-intervened are excluded:
/// its value there is pinned, not generated by its mechanism.
inline ComponentData extract_component(const DataLog& log, int node, std::uint32_t parents,
                                       std::uint32_t actions, double noise_scale) {
    ComponentData data;
    data.noise_scale = noise_scale;
    for (const Sample& s : log) {
        if ((s.intervened >> node) & 1u) continue;
        data.add(component_input(s, parents, actions), s.values[node]);
    }
    return data;
}

/// Empirical output scaling for a component. The unit-signal-variance prior
/// expects O(1) outputs, so components are fit on (y - mean) / scale and
/// mapped back at query time. A node's outputs are identical across its
/// candidate parent sets, so rival component scores stay comparable.
struct OutputScaling {
    double mean = 0.0;
    double scale = 1.0;
};

inline OutputScaling output_scaling(const ComponentData& data) {
    OutputScaling s;
    const double n = static_cast<double>(data.size());
    if (data.empty()) return s;
    double m = 0.0;
    for (double y : data.outputs) m += y;
    m /= n;
    double v = 0.0;
    for (double y : data.outputs) v += (y - m) * (y - m);
    s.mean = m;
    s.scale = std::max(std::sqrt(v / n), data.noise_scale);
    return s;
}

inline ComponentData standardize(const ComponentData& data, const OutputScaling& s) {
    ComponentData out;
    out.inputs = data.inputs;
    out.noise_scale = data.noise_scale / s.scale;
    out.outputs.reserve(data.size());
    for (double y : data.outputs) out.outputs.push_back((y - s.mean) / s.scale);
    return out;
}

struct ComponentKey {
    int node;
    std::uint32_t parents;
    std::uint32_t actions;
    std::size_t data_size;

    friend bool operator==(const ComponentKey& a, const ComponentKey& b) {
        return a.node == b.node && a.parents == b.parents && a.actions == b.actions &&
               a.data_size == b.data_size;
    }
};

struct ComponentKeyHash {
    std::size_t operator()(const ComponentKey& k) const {
        std::uint64_t h = (std::uint64_t(k.node) << 48) ^ (std::uint64_t(k.parents) << 24) ^
                          std::uint64_t(k.actions) ^ (std::uint64_t(k.data_size) << 12);
        h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ULL;
        return static_cast<std::size_t>(h ^ (h >> 31));
    }
};

/// Concurrent insert-if-absent cache of component scores, shared across
/// graphs containing the same component.
class ScoreCache {
public:
    bool lookup(const ComponentKey& key, double& out) const {
        std::lock_guard<std::mutex> lock(mutex_);
        auto it = map_.find(key);
        if (it == map_.end()) return false;
        out = it->second;
        return true;
    }

    void insert(const ComponentKey& key, double value) {
        std::lock_guard<std::mutex> lock(mutex_);
        map_.emplace(key, value);
    }

    std::size_t size() const {
        std::lock_guard<std::mutex> lock(mutex_);
        return map_.size();
    }

private:
    mutable std::mutex mutex_;
    mutable std::unordered_map<ComponentKey, double, ComponentKeyHash> map_;
};

/// Everything component scoring needs: the hyperparameter prior factory,
/// per-node noise scales, and the shared cache.
struct ScoringContext {
    std::vector<double> noise_scales;  // size m+1
    int grid_points = 5;
    double grid_lo = 0.1;
    double grid_hi = 10.0;
    mutable ScoreCache cache;

    HyperPrior prior_for(int dim) const { return HyperPrior::log_grid(dim, grid_points, grid_lo, grid_hi); }
};

/// Score of one (node, parents, actions) component on the current log,
/// cached by component identity and data size. Empty data scores 0.
inline double score_component(const DataLog& log, int node, std::uint32_t parents,
                              std::uint32_t actions, const ScoringContext& ctx) {
    ComponentData data = extract_component(log, node, parents, actions, ctx.noise_scales[node]);
    const ComponentKey key{node, parents, actions, data.size()};
    double cached;
    if (ctx.cache.lookup(key, cached)) return cached;
    double score = 0.0;
    if (!data.empty()) {
        const OutputScaling s = output_scaling(data);
        // Change-of-variables term for the standardized density; constant
        // across a node's candidate components, kept for an honest density.
        score = component_score(standardize(data, s), ctx.prior_for(data.dim())) -
                static_cast<double>(data.size()) * std::log(s.scale);
    }
    ctx.cache.insert(key, score);
    return score;
}

/// log P(D | g): sum of component scores over all nodes (Markov factorization).
inline double graph_log_likelihood(const Dag& g, const DataLog& log, const ScoringContext& ctx) {
    double total = 0.0;
    for (int i = 0; i <= g.m; ++i) total += score_component(log, i, g.parents[i], g.actions[i], ctx);
    return total;
}

/// Graph hypotheses with normalized posterior weights.
struct GraphPosterior {
    std::vector<Dag> graphs;
    std::vector<double> log_weights;  // unnormalized
    std::vector<double> weights;      // normalized, sum to 1

    std::size_t size() const { return graphs.size(); }
};

inline GraphPosterior graph_posterior(std::vector<Dag> graphs, const std::vector<double>& log_likes,
                                      const std::vector<double>& prior_weights = {}) {
    if (graphs.empty()) throw std::invalid_argument("graph_posterior: no graphs");
    GraphPosterior post;
    post.graphs = std::move(graphs);
    post.log_weights.resize(post.graphs.size());
    for (std::size_t i = 0; i < post.graphs.size(); ++i) {
        const double lp = prior_weights.empty() ? 0.0 : std::log(prior_weights[i]);
        post.log_weights[i] = log_likes[i] + lp;
    }
    double mx = post.log_weights[0];
    for (double lw : post.log_weights) mx = std::max(mx, lw);
    double z = 0.0;
    for (double lw : post.log_weights) z += std::exp(lw - mx);
    post.weights.resize(post.log_weights.size());
    for (std::size_t i = 0; i < post.weights.size(); ++i)
        post.weights[i] = std::exp(post.log_weights[i] - mx) / z;
    return post;
}

/// Union of per-graph MIS over all graphs with positive weight, deduplicated.
inline std::vector<std::uint32_t> plausible_mis(const GraphPosterior& posterior,
                                                std::uint32_t intervenable) {
    std::vector<std::uint32_t> out;
    for (std::size_t i = 0; i < posterior.size(); ++i) {
        if (posterior.weights[i] <= 0.0) continue;
        for (std::uint32_t s : mis(posterior.graphs[i], intervenable))
            if (std::find(out.begin(), out.end(), s) == out.end()) out.push_back(s);
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace gacbo

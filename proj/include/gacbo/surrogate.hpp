#pragma once

#include "gacbo/scoring.hpp"

#include <memory>
#include <unordered_map>
#include <vector>

namespace gacbo {

/// GP posterior for one component, fit on standardized outputs; queries map
/// back to raw units. The kernel is the hyper-grid point with the highest
/// weighted marginal likelihood on the standardized data.
class ComponentGp {
public:
    ComponentGp(const HyperPrior& prior, ComponentData raw)
        : raw_(std::move(raw)),
          scaling_(output_scaling(raw_)),
          gp_(map_kernel(standardize(raw_, scaling_), prior), standardize(raw_, scaling_)) {}

    const ComponentData& data() const { return raw_; }
    const OutputScaling& scaling() const { return scaling_; }

    std::pair<double, double> posterior_at(const Vec& s) const {
        auto [mu, var] = gp_.posterior_at(s);
        return {scaling_.mean + scaling_.scale * mu, scaling_.scale * scaling_.scale * var};
    }

    double mean_at(const Vec& s) const {
        return scaling_.mean + scaling_.scale * gp_.mean_at(s);
    }

private:
    ComponentData raw_;
    OutputScaling scaling_;
    GpPosterior gp_;
};

/// Builds and caches per-component GP posteriors for the current data log.
class ComponentGpStore {
public:
    std::shared_ptr<const ComponentGp> get(const DataLog& log, int node, std::uint32_t parents,
                                           std::uint32_t actions, const ScoringContext& ctx) {
        ComponentData data = extract_component(log, node, parents, actions, ctx.noise_scales[node]);
        const ComponentKey key{node, parents, actions, data.size()};
        auto it = map_.find(key);
        if (it != map_.end()) return it->second;
        const HyperPrior prior = ctx.prior_for(
            data.empty() ? __builtin_popcount(parents) + __builtin_popcount(actions) : data.dim());
        auto gp = std::make_shared<const ComponentGp>(prior, std::move(data));
        map_.emplace(key, gp);
        return gp;
    }

private:
    std::unordered_map<ComponentKey, std::shared_ptr<const ComponentGp>, ComponentKeyHash> map_;
};

/// A candidate graph with one GP per node and the confidence multiplier.
/// Immutable; rollouts are pure.
struct SurrogateModel {
    Dag g;
    std::vector<std::shared_ptr<const ComponentGp>> node_gps;  // size m+1
    double beta = 0.5;
    std::vector<int> topo;  // cached topological order of g
};

inline SurrogateModel build_surrogate(const Dag& g, const DataLog& log, const ScoringContext& ctx,
                                      ComponentGpStore& store, double beta) {
    SurrogateModel m;
    m.g = g;
    m.beta = beta;
    m.topo = topological_order(g);
    m.node_gps.resize(g.num_nodes());
    for (int i = 0; i <= g.m; ++i) m.node_gps[i] = store.get(log, i, g.parents[i], g.actions[i], ctx);
    return m;
}

/// One optimism coefficient in [-1,1] per node.
struct EtaAssignment {
    Vec eta;

    static EtaAssignment zeros(int nodes) { return {Vec::Zero(nodes)}; }
};

namespace detail {

inline Vec gather_input(const Vec& node_values, const Vec& action_values, std::uint32_t parents,
                        std::uint32_t actions) {
    Vec x(__builtin_popcount(parents) + __builtin_popcount(actions));
    int k = 0;
    for (int j = 0; j < node_values.size(); ++j)
        if ((parents >> j) & 1u) x[k++] = node_values[j];
    for (int j = 0; j < action_values.size(); ++j)
        if ((actions >> j) & 1u) x[k++] = action_values[j];
    return x;
}

}  // namespace detail

/// Optimistic topological rollout under a soft intervention: every node is
/// hallucinated as mu + beta * sigma * eta with its parents' hallucinated
/// values as inputs. Returns the target node's value.
inline double rollout_soft(const SurrogateModel& model, const Vec& action_values,
                           const EtaAssignment& eta) {
    Vec values = Vec::Zero(model.g.num_nodes());
    for (int i : model.topo) {
        const Vec x = detail::gather_input(values, action_values, model.g.parents[i],
                                           model.g.actions[i]);
        auto [mu, var] = model.node_gps[i]->posterior_at(x);
        values[i] = mu + model.beta * std::sqrt(var) * eta.eta[i];
    }
    return values[model.g.target()];
}

/// Optimistic rollout under a hard intervention do(I = values): intervened
/// nodes are pinned and their parent edges severed; the rest propagate as in
/// the soft rollout, with no action inputs.
inline double rollout_hard(const SurrogateModel& model, std::uint32_t intervened,
                           const Vec& pinned_values, const EtaAssignment& eta) {
    if ((intervened >> model.g.target()) & 1u)
        throw std::invalid_argument("rollout_hard: cannot intervene on the target");
    Vec values = Vec::Zero(model.g.num_nodes());
    const Vec no_actions;
    int pin_idx = 0;
    for (int i = 0; i <= model.g.m; ++i)
        if ((intervened >> i) & 1u) values[i] = pinned_values[pin_idx++];
    for (int i : model.topo) {
        if ((intervened >> i) & 1u) continue;  // pinned; edges into i severed
        const Vec x = detail::gather_input(values, no_actions, model.g.parents[i], 0u);
        auto [mu, var] = model.node_gps[i]->posterior_at(x);
        values[i] = mu + model.beta * std::sqrt(var) * eta.eta[i];
    }
    return values[model.g.target()];
}

}  // namespace gacbo

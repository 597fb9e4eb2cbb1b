#pragma once

#include "gacbo/discovery.hpp"
#include "gacbo/surrogate.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace gacbo {

struct SearchBudget {
    int restarts = 256;
    int local_steps = 50;
    std::uint64_t seed = 0;
    int max_graphs = 1024;  // cap on per-round graph searches; tail reuses the best so far
};

/// Either a soft action vector over all action variables or a hard
/// intervention do(I = values), with values aligned to ascending set bits.
struct Intervention {
    enum class Kind { Soft, Hard };
    Kind kind = Kind::Soft;
    Vec actions;              // soft
    std::uint32_t hard_set = 0;  // hard
    Vec hard_values;

    static Intervention soft(Vec a) {
        Intervention iv;
        iv.kind = Kind::Soft;
        iv.actions = std::move(a);
        return iv;
    }
    static Intervention hard(std::uint32_t set, Vec values) {
        Intervention iv;
        iv.kind = Kind::Hard;
        iv.hard_set = set;
        iv.hard_values = std::move(values);
        return iv;
    }
};

inline std::string serialize(const Intervention& iv) {
    std::ostringstream out;
    if (iv.kind == Intervention::Kind::Soft) {
        out << "soft[";
        for (Eigen::Index i = 0; i < iv.actions.size(); ++i) {
            if (i) out << ';';
            out << "a" << i << '=' << iv.actions[i];
        }
        out << ']';
    } else {
        out << "do[";
        int k = 0;
        bool first = true;
        for (int i = 0; i < 32; ++i) {
            if ((iv.hard_set >> i) & 1u) {
                if (!first) out << ';';
                out << i << '=' << iv.hard_values[k++];
                first = false;
            }
        }
        out << ']';
    }
    return out.str();
}

struct Proposal {
    int graph_index = -1;
    Intervention intervention;
    EtaAssignment eta;
    double predicted = -std::numeric_limits<double>::infinity();
};

/// Axis-aligned box, one (lo, hi) pair per dimension.
struct Box {
    std::vector<double> lo, hi;
    int dim() const { return static_cast<int>(lo.size()); }
};

namespace detail {

/// Multi-start random search plus coordinate descent with shrinking steps
/// over a box-constrained objective. Deterministic given the rng stream.
inline std::pair<Vec, double> maximize_box(const std::function<double(const Vec&)>& f,
                                           const Box& box, int restarts, int local_steps,
                                           Rng& rng) {
    const int d = box.dim();
    Vec best = Vec::Zero(d);
    for (int k = 0; k < d; ++k) best[k] = 0.5 * (box.lo[k] + box.hi[k]);
    double best_val = f(best);
    for (int r = 0; r < restarts; ++r) {
        Vec x(d);
        for (int k = 0; k < d; ++k) x[k] = uniform_in(rng, box.lo[k], box.hi[k]);
        const double v = f(x);
        if (v > best_val) {
            best_val = v;
            best = x;
        }
    }
    Vec step(d);
    for (int k = 0; k < d; ++k) step[k] = 0.25 * (box.hi[k] - box.lo[k]);
    for (int it = 0; it < local_steps; ++it) {
        bool improved = false;
        for (int k = 0; k < d; ++k) {
            if (step[k] <= 0) continue;
            for (double s : {step[k], -step[k]}) {
                Vec x = best;
                x[k] = std::clamp(x[k] + s, box.lo[k], box.hi[k]);
                const double v = f(x);
                if (v > best_val) {
                    best_val = v;
                    best = x;
                    improved = true;
                }
            }
        }
        if (!improved) {
            bool any = false;
            for (int k = 0; k < d; ++k) {
                step[k] *= 0.5;
                if (step[k] >= 1e-4 * (box.hi[k] - box.lo[k])) any = true;
            }
            if (!any) break;
        }
    }
    return {best, best_val};
}

/// Restart initialization for eta coordinates snaps to {-1, 0, 1}; the local
/// refinement afterwards moves them continuously.
inline std::pair<Vec, double> maximize_mixed(const std::function<double(const Vec&)>& f,
                                             const Box& action_box, int eta_dims, int restarts,
                                             int local_steps, Rng& rng) {
    const int da = action_box.dim();
    Box full = action_box;
    for (int k = 0; k < eta_dims; ++k) {
        full.lo.push_back(-1.0);
        full.hi.push_back(1.0);
    }
    Vec best = Vec::Zero(da + eta_dims);
    for (int k = 0; k < da; ++k) best[k] = 0.5 * (action_box.lo[k] + action_box.hi[k]);
    double best_val = f(best);
    for (int r = 0; r < restarts; ++r) {
        Vec x(da + eta_dims);
        for (int k = 0; k < da; ++k) x[k] = uniform_in(rng, action_box.lo[k], action_box.hi[k]);
        for (int k = 0; k < eta_dims; ++k)
            x[da + k] = static_cast<double>(std::uniform_int_distribution<int>(-1, 1)(rng));
        const double v = f(x);
        if (v > best_val) {
            best_val = v;
            best = x;
        }
    }
    Vec step(da + eta_dims);
    for (int k = 0; k < da + eta_dims; ++k) step[k] = 0.25 * (full.hi[k] - full.lo[k]);
    for (int it = 0; it < local_steps; ++it) {
        bool improved = false;
        for (int k = 0; k < da + eta_dims; ++k) {
            for (double s : {step[k], -step[k]}) {
                Vec x = best;
                x[k] = std::clamp(x[k] + s, full.lo[k], full.hi[k]);
                const double v = f(x);
                if (v > best_val) {
                    best_val = v;
                    best = x;
                    improved = true;
                }
            }
        }
        if (!improved) {
            bool any = false;
            for (int k = 0; k < da + eta_dims; ++k) {
                step[k] *= 0.5;
                if (step[k] >= 1e-4 * (full.hi[k] - full.lo[k])) any = true;
            }
            if (!any) break;
        }
    }
    return {best, best_val};
}

/// Graph indices in descending posterior weight, ties toward lower index.
inline std::vector<std::size_t> weight_order(const std::vector<double>& weights) {
    std::vector<std::size_t> order(weights.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return weights[a] > weights[b]; });
    return order;
}

inline bool lex_less(const Vec& a, const Vec& b) {
    for (Eigen::Index i = 0; i < std::min(a.size(), b.size()); ++i) {
        if (a[i] < b[i]) return true;
        if (a[i] > b[i]) return false;
    }
    return a.size() < b.size();
}

}  // namespace detail

/// Soft acquisition: per plausible graph, search jointly over the action box
/// and the per-node eta coefficients, then return the across-graph argmax.
/// Ties break toward the lower graph index, then lexicographically smaller
/// action vector.
inline Proposal select_action_soft(const PlausibleSet& plausible,
                                   const std::vector<SurrogateModel>& models,
                                   const Box& action_box, const SearchBudget& budget) {
    if (plausible.graphs.empty()) throw std::invalid_argument("select_action_soft: empty set");
    Proposal best;
    const int da = action_box.dim();
    const auto order = detail::weight_order(plausible.weights);
    int searched = 0;
    for (std::size_t gi : order) {
        if (searched++ >= budget.max_graphs) break;
        const SurrogateModel& model = models[gi];
        const int nodes = model.g.num_nodes();
        Rng rng = make_stream(budget.seed, gi);
        auto objective = [&](const Vec& x) {
            EtaAssignment eta{x.tail(nodes)};
            return rollout_soft(model, x.head(da), eta);
        };
        auto [x, val] = detail::maximize_mixed(objective, action_box, nodes, budget.restarts,
                                               budget.local_steps, rng);
        const bool better =
            val > best.predicted ||
            (val == best.predicted && best.graph_index >= 0 &&
             (static_cast<int>(gi) < best.graph_index ||
              (static_cast<int>(gi) == best.graph_index &&
               detail::lex_less(x.head(da), best.intervention.actions))));
        if (better) {
            best.graph_index = static_cast<int>(gi);
            best.intervention = Intervention::soft(x.head(da));
            best.eta = EtaAssignment{x.tail(nodes)};
            best.predicted = val;
        }
    }
    return best;
}

/// Hard acquisition: per plausible graph, optimize values over every minimal
/// intervention set of that graph (the empty set competes as the
/// observational arm), then return the across-graph, across-set argmax.
/// `family`, when non-empty, restricts the candidate sets to the
/// environment's intervention family.
inline Proposal select_action_hard(const PlausibleSet& plausible,
                                   const std::vector<SurrogateModel>& models,
                                   std::uint32_t intervenable,
                                   const std::vector<std::pair<double, double>>& node_boxes,
                                   const SearchBudget& budget,
                                   const std::vector<std::uint32_t>& family = {}) {
    if (plausible.graphs.empty()) throw std::invalid_argument("select_action_hard: empty set");
    Proposal best;
    const auto order = detail::weight_order(plausible.weights);
    int searched = 0;
    for (std::size_t gi : order) {
        if (searched++ >= budget.max_graphs) break;
        const SurrogateModel& model = models[gi];
        const int nodes = model.g.num_nodes();
        Rng rng = make_stream(budget.seed, gi);
        for (std::uint32_t set : mis(model.g, intervenable)) {
            if (!family.empty() && std::find(family.begin(), family.end(), set) == family.end())
                continue;
            Box value_box;
            for (int i = 0; i <= model.g.m; ++i) {
                if ((set >> i) & 1u) {
                    value_box.lo.push_back(node_boxes[i].first);
                    value_box.hi.push_back(node_boxes[i].second);
                }
            }
            const int dv = value_box.dim();
            auto objective = [&](const Vec& x) {
                EtaAssignment eta{x.tail(nodes)};
                return rollout_hard(model, set, x.head(dv), eta);
            };
            auto [x, val] = detail::maximize_mixed(objective, value_box, nodes, budget.restarts,
                                                   budget.local_steps, rng);
            const bool better =
                val > best.predicted ||
                (val == best.predicted && best.graph_index >= 0 &&
                 (static_cast<int>(gi) < best.graph_index ||
                  (static_cast<int>(gi) == best.graph_index &&
                   detail::lex_less(x.head(dv), best.intervention.hard_values))));
            if (better) {
                best.graph_index = static_cast<int>(gi);
                best.intervention = Intervention::hard(set, x.head(dv));
                best.eta = EtaAssignment{x.tail(nodes)};
                best.predicted = val;
            }
        }
    }
    return best;
}

}  // namespace gacbo

#pragma once

#include "gacbo/acquisition.hpp"
#include "gacbo/dag.hpp"
#include "gacbo/scoring.hpp"

#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace gacbo {

struct NoiseSpec {
    enum class Kind { Gaussian, Uniform };
    Kind kind = Kind::Gaussian;
    double a = 0.1;  // Gaussian: std dev; Uniform: lower bound
    double b = 0.0;  // Uniform: upper bound

    static NoiseSpec gaussian(double sigma) { return {Kind::Gaussian, sigma, 0.0}; }
    static NoiseSpec uniform(double lo, double hi) { return {Kind::Uniform, lo, hi}; }

    double draw(Rng& rng) const {
        if (kind == Kind::Gaussian)
            return a == 0.0 ? 0.0 : std::normal_distribution<double>(0.0, a)(rng);
        return uniform_in(rng, a, b);
    }

    /// Value used when noise is disabled: zero for Gaussian, the midpoint for
    /// exogenous uniform draws.
    double noise_free() const { return kind == Kind::Gaussian ? 0.0 : 0.5 * (a + b); }

    /// Spread used as the GP noise scale for this node.
    double model_scale() const {
        if (kind == Kind::Gaussian) return a > 0.0 ? a : 0.05;
        return (b - a) / std::sqrt(12.0);
    }
};

/// Machine-readable environment description; also configures the hypothesis
/// space (node count, action count, boxes, intervention family).
struct EnvSpec {
    std::string name;
    Dag true_dag;
    int m = 0;
    int num_actions = 0;
    bool soft = true;
    Box action_box;                                      // soft setting
    std::vector<std::pair<double, double>> node_boxes;   // hard setting value boxes
    std::uint32_t intervenable = 0;
    std::vector<std::uint32_t> intervention_family;      // hard setting
    double beta_default = 0.5;
    std::vector<double> noise_scales;                    // GP noise scale per node
    bool hyp_actions_on_target = false;  // may hypothesis graphs route actions to the target
    bool mc_oracle = false;              // expected rewards need Monte Carlo
};

/// Ground-truth simulator: the true DAG, closed-form mechanisms, and noise.
class Environment {
public:
    using Mechanism = std::function<double(const Vec& values, const Vec& actions)>;

    Environment(EnvSpec spec, std::vector<Mechanism> mechanisms, std::vector<NoiseSpec> noise)
        : spec_(std::move(spec)), mechanisms_(std::move(mechanisms)), noise_(std::move(noise)),
          topo_(topological_order(spec_.true_dag)) {}

    const EnvSpec& spec() const { return spec_; }

    Sample step_soft(const Vec& actions, Rng& rng, bool with_noise = true) const {
        if (!spec_.soft) throw std::invalid_argument(spec_.name + ": not a soft environment");
        if (actions.size() != spec_.num_actions)
            throw DimensionError("step_soft: wrong action dimension");
        for (Eigen::Index i = 0; i < actions.size(); ++i)
            if (actions[i] < spec_.action_box.lo[i] - 1e-12 ||
                actions[i] > spec_.action_box.hi[i] + 1e-12)
                throw std::invalid_argument("step_soft: action outside its box");
        Sample s;
        s.values = Vec::Zero(spec_.m + 1);
        s.action_values = actions;
        for (int i : topo_)
            s.values[i] = mechanisms_[i](s.values, actions) +
                          (with_noise ? noise_[i].draw(rng) : noise_[i].noise_free());
        return s;
    }

    Sample step_hard(std::uint32_t intervened, const Vec& values, Rng& rng,
                     bool with_noise = true) const {
        if (spec_.soft) throw std::invalid_argument(spec_.name + ": not a hard environment");
        if (!spec_.intervention_family.empty() &&
            std::find(spec_.intervention_family.begin(), spec_.intervention_family.end(),
                      intervened) == spec_.intervention_family.end())
            throw std::invalid_argument("step_hard: intervention set outside the family");
        Sample s;
        s.values = Vec::Zero(spec_.m + 1);
        s.action_values = Vec();
        s.intervened = intervened;
        int k = 0;
        for (int i = 0; i <= spec_.m; ++i) {
            if ((intervened >> i) & 1u) {
                const double v = values[k++];
                if (v < spec_.node_boxes[i].first - 1e-12 ||
                    v > spec_.node_boxes[i].second + 1e-12)
                    throw std::invalid_argument("step_hard: value outside the node box");
                s.values[i] = v;
            }
        }
        const Vec no_actions;
        for (int i : topo_) {
            if ((intervened >> i) & 1u) continue;
            s.values[i] = mechanisms_[i](s.values, no_actions) +
                          (with_noise ? noise_[i].draw(rng) : noise_[i].noise_free());
        }
        return s;
    }

    Sample step(const Intervention& iv, Rng& rng, bool with_noise = true) const {
        if (iv.kind == Intervention::Kind::Soft) return step_soft(iv.actions, rng, with_noise);
        return step_hard(iv.hard_set, iv.hard_values, rng, with_noise);
    }

    /// E[y] under the intervention: noise-free evaluation where noise enters
    /// additively, Monte Carlo with a fixed oracle seed otherwise.
    double expected_reward(const Intervention& iv, int mc_samples = 100000) const {
        if (!spec_.mc_oracle) {
            Rng rng = make_stream(kOracleSeed, 0);
            return step(iv, rng, false).values[spec_.m];
        }
        Rng rng = make_stream(kOracleSeed, 1);
        double acc = 0.0;
        for (int n = 0; n < mc_samples; ++n) acc += step(iv, rng, true).values[spec_.m];
        return acc / mc_samples;
    }

    /// Brute-force best arm: grid search over the action box (soft) or over
    /// each intervention set's value boxes (hard), with local polish.
    std::pair<Intervention, double> best_arm() const {
        if (spec_.soft) {
            Vec a = grid_argmax(spec_.action_box,
                                [&](const Vec& x) { return expected_reward(Intervention::soft(x), 2000); });
            return {Intervention::soft(a), expected_reward(Intervention::soft(a))};
        }
        Intervention best;
        double best_val = -std::numeric_limits<double>::infinity();
        for (std::uint32_t set : spec_.intervention_family) {
            Box box;
            for (int i = 0; i <= spec_.m; ++i)
                if ((set >> i) & 1u) {
                    box.lo.push_back(spec_.node_boxes[i].first);
                    box.hi.push_back(spec_.node_boxes[i].second);
                }
            Intervention iv;
            if (box.dim() == 0) {
                iv = Intervention::hard(0, Vec());
            } else {
                Vec v = grid_argmax(box, [&](const Vec& x) {
                    return expected_reward(Intervention::hard(set, x), 2000);
                });
                iv = Intervention::hard(set, v);
            }
            const double val = expected_reward(iv);
            if (val > best_val) {
                best_val = val;
                best = iv;
            }
        }
        return {best, best_val};
    }

    static constexpr std::uint64_t kOracleSeed = 0x0ac1e5eedULL;

private:
    static Vec grid_argmax(const Box& box, const std::function<double(const Vec&)>& f) {
        const int d = box.dim();
        int points = d == 1 ? 10001 : (d == 2 ? 101 : (d == 3 ? 41 : 15));
        std::vector<int> idx(d, 0);
        Vec best = Vec::Zero(d);
        double best_val = -std::numeric_limits<double>::infinity();
        while (true) {
            Vec x(d);
            for (int k = 0; k < d; ++k)
                x[k] = box.lo[k] + (box.hi[k] - box.lo[k]) * idx[k] / (points - 1);
            const double v = f(x);
            if (v > best_val) {
                best_val = v;
                best = x;
            }
            int k = 0;
            while (k < d && ++idx[k] == points) idx[k++] = 0;
            if (k == d) break;
        }
        // Coordinate polish around the grid winner.
        Vec step(d);
        for (int k = 0; k < d; ++k) step[k] = (box.hi[k] - box.lo[k]) / (points - 1);
        for (int it = 0; it < 60; ++it) {
            bool improved = false;
            for (int k = 0; k < d; ++k) {
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
            if (!improved) step *= 0.5;
            if (step.maxCoeff() < 1e-7) break;
        }
        return best;
    }

    EnvSpec spec_;
    std::vector<Mechanism> mechanisms_;
    std::vector<NoiseSpec> noise_;
    std::vector<int> topo_;
};

struct EnvOptions {
    int chain_nodes = 2;   // intermediate nodes for the rosenbrock / alpine3 chains
};

inline std::vector<std::string> list_envs() {
    return {"dropwave", "rosenbrock", "alpine3", "toygraph", "epidemiology"};
}

inline Environment make_env(const std::string& name, const EnvOptions& opts = {}) {
    using Mech = Environment::Mechanism;
    if (name == "dropwave") {
        EnvSpec spec;
        spec.name = name;
        spec.m = 1;
        spec.num_actions = 2;
        spec.soft = true;
        spec.action_box = {{-5.12, -5.12}, {5.12, 5.12}};
        spec.beta_default = 0.5;
        spec.true_dag = Dag(1, 2);
        spec.true_dag.add_edge(0, 1);
        spec.true_dag.actions[0] = 0b11;
        spec.hyp_actions_on_target = true;
        std::vector<NoiseSpec> noise{NoiseSpec::gaussian(0.1), NoiseSpec::gaussian(0.1)};
        spec.noise_scales = {0.1, 0.1};
        std::vector<Mech> mech{
            [](const Vec&, const Vec& a) { return std::sqrt(a[0] * a[0] + a[1] * a[1]); },
            [](const Vec& v, const Vec&) {
                return (1.0 + std::cos(12.0 * v[0])) / (2.0 + 0.5 * v[0] * v[0]);
            }};
        return Environment(std::move(spec), std::move(mech), std::move(noise));
    }
    if (name == "rosenbrock") {
        const int m = opts.chain_nodes;   // intermediate nodes; target is node m
        EnvSpec spec;
        spec.name = name;
        spec.m = m;
        spec.num_actions = m + 2;
        spec.soft = true;
        spec.action_box.lo.assign(m + 2, -2.0);
        spec.action_box.hi.assign(m + 2, 2.0);
        spec.beta_default = 0.5;
        spec.true_dag = Dag(m, m + 2);
        spec.true_dag.actions[0] = 0b11;
        for (int k = 1; k <= m; ++k) {
            spec.true_dag.add_edge(k - 1, k);
            spec.true_dag.actions[k] = (1u << k) | (1u << (k + 1));
        }
        spec.hyp_actions_on_target = true;
        std::vector<NoiseSpec> noise(m + 1, NoiseSpec::gaussian(0.1));
        spec.noise_scales.assign(m + 1, 0.1);
        std::vector<Mech> mech;
        auto rosen = [](double ak, double ak1) {
            return -100.0 * (ak1 - ak * ak) * (ak1 - ak * ak) - (1.0 - ak) * (1.0 - ak);
        };
        mech.push_back([rosen](const Vec&, const Vec& a) { return rosen(a[0], a[1]); });
        for (int k = 1; k <= m; ++k)
            mech.push_back([rosen, k](const Vec& v, const Vec& a) {
                return rosen(a[k], a[k + 1]) + v[k - 1];
            });
        return Environment(std::move(spec), std::move(mech), std::move(noise));
    }
    if (name == "alpine3") {
        const int m = opts.chain_nodes;
        EnvSpec spec;
        spec.name = name;
        spec.m = m;
        spec.num_actions = m + 1;
        spec.soft = true;
        spec.action_box.lo.assign(m + 1, 0.0);
        spec.action_box.hi.assign(m + 1, 10.0);
        spec.beta_default = 0.5;
        spec.true_dag = Dag(m, m + 1);
        spec.true_dag.actions[0] = 0b1;
        for (int k = 1; k <= m; ++k) {
            spec.true_dag.add_edge(k - 1, k);
            spec.true_dag.actions[k] = (1u << k);
        }
        spec.hyp_actions_on_target = true;
        std::vector<NoiseSpec> noise(m + 1, NoiseSpec::gaussian(0.1));
        spec.noise_scales.assign(m + 1, 0.1);
        std::vector<Mech> mech;
        mech.push_back([](const Vec&, const Vec& a) { return -std::sqrt(a[0]) * std::sin(a[0]); });
        for (int k = 1; k <= m; ++k)
            mech.push_back([k](const Vec& v, const Vec& a) {
                return std::sqrt(a[k]) * std::sin(a[k]) * v[k - 1];
            });
        return Environment(std::move(spec), std::move(mech), std::move(noise));
    }
    if (name == "toygraph") {
        EnvSpec spec;
        spec.name = name;
        spec.m = 2;  // X = 0, Z = 1, Y = 2
        spec.num_actions = 0;
        spec.soft = false;
        spec.node_boxes = {{-5.0, 5.0}, {-5.0, 20.0}, {0.0, 0.0}};
        spec.intervenable = 0b11;
        spec.intervention_family = {0b00, 0b01, 0b10, 0b11};
        spec.beta_default = 1.0;
        spec.true_dag = Dag(2, 0);
        spec.true_dag.add_edge(0, 1);
        spec.true_dag.add_edge(1, 2);
        std::vector<NoiseSpec> noise(3, NoiseSpec::gaussian(0.1));
        spec.noise_scales = {0.1, 0.1, 0.1};
        std::vector<Mech> mech{
            [](const Vec&, const Vec&) { return 0.0; },
            [](const Vec& v, const Vec&) { return std::exp(-v[0]); },
            [](const Vec& v, const Vec&) { return std::cos(v[1]) - std::exp(-v[1] / 20.0); }};
        return Environment(std::move(spec), std::move(mech), std::move(noise));
    }
    if (name == "epidemiology") {
        EnvSpec spec;
        spec.name = name;
        spec.m = 4;  // B = 0, T = 1, L = 2, R = 3, Y = 4
        spec.num_actions = 0;
        spec.soft = false;
        spec.node_boxes = {{-1.0, 1.0}, {0.0, 4.0}, {0.0, 1.0}, {0.0, 4.0}, {0.0, 0.0}};
        spec.intervenable = 0b1010;  // T and R
        spec.intervention_family = {0b0000, 0b0010, 0b1000, 0b1010};
        spec.beta_default = 1.0;
        spec.true_dag = Dag(4, 0);
        spec.true_dag.add_edge(0, 2);  // B -> L
        spec.true_dag.add_edge(1, 2);  // T -> L
        spec.true_dag.add_edge(1, 3);  // T -> R
        spec.true_dag.add_edge(2, 3);  // L -> R
        spec.true_dag.add_edge(0, 4);
        spec.true_dag.add_edge(1, 4);
        spec.true_dag.add_edge(2, 4);
        spec.true_dag.add_edge(3, 4);
        spec.mc_oracle = true;
        std::vector<NoiseSpec> noise{NoiseSpec::uniform(-1.0, 1.0), NoiseSpec::uniform(4.0, 8.0),
                                     NoiseSpec::gaussian(0.0), NoiseSpec::gaussian(0.0),
                                     NoiseSpec::gaussian(1.0)};
        spec.noise_scales.clear();
        for (const auto& n : noise) spec.noise_scales.push_back(n.model_scale());
        auto expit = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
        std::vector<Mech> mech{
            [](const Vec&, const Vec&) { return 0.0; },
            [](const Vec&, const Vec&) { return 0.0; },
            [expit](const Vec& v, const Vec&) { return expit(0.5 * v[1] + v[0]); },
            [](const Vec& v, const Vec&) { return 4.0 + v[2] * v[1]; },
            [](const Vec& v, const Vec&) {
                return 0.5 + std::cos(4.0 * v[1]) + std::sin(-v[2] + 2.0 * v[3]) + v[0];
            }};
        return Environment(std::move(spec), std::move(mech), std::move(noise));
    }
    throw std::invalid_argument("unknown environment: " + name);
}

}  // namespace gacbo

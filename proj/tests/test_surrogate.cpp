#include "gacbo/surrogate.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

using namespace gacbo;

namespace {

Dag toy_chain() {
    Dag g(2, 0);
    g.add_edge(0, 1);
    g.add_edge(1, 2);
    return g;
}

DataLog toy_log(int n, bool noise_free = false, std::uint64_t seed = 5) {
    Rng rng = make_stream(seed, 77);
    std::normal_distribution<double> noise(0.0, 0.1);
    DataLog log;
    for (int i = 0; i < n; ++i) {
        Sample s;
        s.values = Vec(3);
        const double eps = noise_free ? 0.0 : 1.0;
        s.values[0] = uniform_in(rng, -1.5, 1.5);
        s.values[1] = std::exp(-s.values[0]) + noise(rng) * eps;
        s.values[2] = std::cos(s.values[1]) - std::exp(-s.values[1] / 20.0) + noise(rng) * eps;
        log.push_back(s);
    }
    return log;
}

// Hard samples spanning the z box so the y component is trained where the
// rollout queries it.
DataLog toy_hard_log(int n, std::uint64_t seed = 6) {
    Rng rng = make_stream(seed, 78);
    DataLog log;
    for (int i = 0; i < n; ++i) {
        Sample s;
        s.values = Vec(3);
        s.intervened = 0b010;
        s.values[0] = 0.0;
        s.values[1] = uniform_in(rng, -5.0, 20.0);
        s.values[2] = std::cos(s.values[1]) - std::exp(-s.values[1] / 20.0);
        log.push_back(s);
    }
    return log;
}

struct ToyCtx : ScoringContext {
    ToyCtx() { noise_scales = {0.1, 0.1, 0.1}; }
};

}  // namespace

TEST_CASE("component gp store") {
    const DataLog log = toy_log(12);
    const ToyCtx ctx;
    ComponentGpStore store;
    SECTION("shares identical components") {
        auto a = store.get(log, 1, 0b001, 0, ctx);
        auto b = store.get(log, 1, 0b001, 0, ctx);
        CHECK(a.get() == b.get());
        auto c = store.get(log, 1, 0b000, 0, ctx);
        CHECK(a.get() != c.get());
    }
    SECTION("hard-intervened rows are excluded from their own component") {
        DataLog mixed = log;
        Sample pinned;
        pinned.values = Vec(3);
        pinned.values << 0.0, 3.0, -0.5;
        pinned.intervened = 0b010;
        mixed.push_back(pinned);
        ComponentGpStore s2;
        auto z_gp = s2.get(mixed, 1, 0b001, 0, ctx);
        CHECK(z_gp->data().size() == log.size());  // pinned row skipped
        auto y_gp = s2.get(mixed, 2, 0b010, 0, ctx);
        CHECK(y_gp->data().size() == log.size() + 1);  // but y still learns from it
    }
}

TEST_CASE("soft rollout") {
    // Single-node graph fed by one action: the target's GP is the whole model.
    Dag g(0, 1);
    g.actions[0] = 0b1;
    ScoringContext ctx;
    ctx.noise_scales = {0.1};
    const DataLog empty;

    SECTION("empty data, beta 1, eta 1 hits the prior band edge") {
        ComponentGpStore store;
        const SurrogateModel model = build_surrogate(g, empty, ctx, store, 1.0);
        EtaAssignment eta{Vec::Constant(1, 1.0)};
        CHECK(rollout_soft(model, Vec::Zero(1), eta) == Catch::Approx(1.0));
        EtaAssignment down{Vec::Constant(1, -1.0)};
        CHECK(rollout_soft(model, Vec::Zero(1), down) == Catch::Approx(-1.0));
    }
    SECTION("beta 0 ignores eta") {
        ComponentGpStore store;
        const SurrogateModel model = build_surrogate(g, empty, ctx, store, 0.0);
        EtaAssignment e1{Vec::Constant(1, 1.0)};
        EtaAssignment e0 = EtaAssignment::zeros(1);
        CHECK(rollout_soft(model, Vec::Constant(1, 0.3), e1) ==
              rollout_soft(model, Vec::Constant(1, 0.3), e0));
    }
    SECTION("eta all-zero equals the beta-0 rollout") {
        DataLog log;
        Rng rng = make_stream(21, 0);
        for (int i = 0; i < 10; ++i) {
            Sample s;
            s.values = Vec::Constant(1, 0.0);
            s.action_values = Vec::Constant(1, uniform_in(rng, -1.0, 1.0));
            s.values[0] = std::sin(3.0 * s.action_values[0]);
            log.push_back(s);
        }
        ComponentGpStore store;
        const SurrogateModel m1 = build_surrogate(g, log, ctx, store, 2.0);
        const SurrogateModel m0 = build_surrogate(g, log, ctx, store, 0.0);
        const Vec a = Vec::Constant(1, 0.4);
        CHECK(rollout_soft(m1, a, EtaAssignment::zeros(1)) ==
              Catch::Approx(rollout_soft(m0, a, EtaAssignment{Vec::Constant(1, 1.0)})));
    }
    SECTION("rollout is deterministic") {
        ComponentGpStore store;
        const SurrogateModel model = build_surrogate(g, empty, ctx, store, 0.7);
        EtaAssignment eta{Vec::Constant(1, 0.5)};
        const double v = rollout_soft(model, Vec::Constant(1, 1.0), eta);
        CHECK(rollout_soft(model, Vec::Constant(1, 1.0), eta) == v);
    }
}

TEST_CASE("hard rollout") {
    const ToyCtx ctx;
    const Dag g = toy_chain();

    SECTION("pinning the target is rejected") {
        ComponentGpStore store;
        const SurrogateModel model = build_surrogate(g, {}, ctx, store, 1.0);
        CHECK_THROWS(rollout_hard(model, 0b100, Vec::Constant(1, 0.0),
                                  EtaAssignment::zeros(3)));
    }
    SECTION("cutting all target parents silences upstream eta") {
        const DataLog log = toy_log(15);
        ComponentGpStore store;
        const SurrogateModel model = build_surrogate(g, log, ctx, store, 1.0);
        EtaAssignment base = EtaAssignment::zeros(3);
        EtaAssignment upstream = EtaAssignment::zeros(3);
        upstream.eta[0] = 1.0;
        upstream.eta[1] = -1.0;
        const Vec pin = Vec::Constant(1, 2.0);
        CHECK(rollout_hard(model, 0b010, pin, base) ==
              Catch::Approx(rollout_hard(model, 0b010, pin, upstream)));
    }
    SECTION("empty intervention is the observational rollout") {
        const DataLog log = toy_log(15);
        ComponentGpStore store;
        const SurrogateModel model = build_surrogate(g, log, ctx, store, 0.0);
        const double obs = rollout_hard(model, 0, Vec(), EtaAssignment::zeros(3));
        // Propagated by hand through the same GPs.
        const double x = model.node_gps[0]->posterior_at(Vec()).first;
        const double z = model.node_gps[1]->posterior_at(Vec::Constant(1, x)).first;
        const double y = model.node_gps[2]->posterior_at(Vec::Constant(1, z)).first;
        CHECK(obs == Catch::Approx(y));
    }
    SECTION("trained surrogate reproduces the closed form under do(z)") {
        const DataLog log = toy_hard_log(200);
        ComponentGpStore store;
        const SurrogateModel model = build_surrogate(g, log, ctx, store, 0.0);
        const double got =
            rollout_hard(model, 0b010, Vec::Constant(1, 1.0), EtaAssignment::zeros(3));
        const double want = std::cos(1.0) - std::exp(-0.05);
        CHECK(std::abs(got - want) < 0.05);
    }
    SECTION("target eta raises the optimistic value") {
        const DataLog log = toy_log(15);
        ComponentGpStore store;
        const SurrogateModel model = build_surrogate(g, log, ctx, store, 1.0);
        EtaAssignment lo = EtaAssignment::zeros(3), hi = EtaAssignment::zeros(3);
        lo.eta[2] = -1.0;
        hi.eta[2] = 1.0;
        const Vec pin = Vec::Constant(1, 7.0);
        CHECK(rollout_hard(model, 0b010, pin, hi) >= rollout_hard(model, 0b010, pin, lo));
    }
}

#include <gtest/gtest.h>

#include <random>

#include "test_support.hpp"

using namespace rsb;
using namespace rsb::testing;

namespace {

StutterStepFormula random_formula(std::mt19937_64& rng, std::size_t n, Modality m) {
    auto p = random_subset(rng, n, 0.5);
    auto t = random_subset(rng, n, 0.3) - p;
    return {p, t, m};
}

// Naive pre_ctrl straight from the definition.
StateSet naive_pre(const TransitionSystem& g, const StateSet& x) {
    StateSet r(g.num_states());
    for (StateId s = 0; s < g.num_states(); ++s)
        for (LabelId l = 0; l < g.num_labels(); ++l) {
            auto ts = g.post(s, l);
            if (ts.empty()) continue;
            bool inside = true;
            for (auto t : ts) inside = inside && x.contains(t);
            if (inside) r.insert(s);
        }
    return r;
}

// Kleene iteration of theta from the empty set or from the full set.
StateSet kleene(const TransitionSystem& g, const StutterStepFormula& psi) {
    auto x = psi.modality == Modality::Until ? StateSet(g.num_states()) : StateSet::full(g.num_states());
    while (true) {
        auto y = psi.target | (psi.source & naive_pre(g, x));
        if (y == x) return x;
        x = std::move(y);
    }
}

}  // namespace

TEST(PreCtrl, MatchesDefinition) {
    std::mt19937_64 rng(41);
    for (int trial = 0; trial < 200; ++trial) {
        auto g = random_ts(rng, 7, 3, 0.2);
        auto x = random_subset(rng, 7);
        EXPECT_EQ(pre_ctrl(g, x), naive_pre(g, x));
    }
}

TEST(Ecs, ThreeStateModelExamples) {
    auto g = fig1();
    auto fp = ecs(g, {states(g, {"0"}), states(g, {"1"}), Modality::Until});
    EXPECT_EQ(fp.set, states(g, {"0", "1"}));
    EXPECT_EQ(fp.rank_of(id(g, "1")), 1u);
    EXPECT_EQ(fp.rank_of(id(g, "0")), 2u);
    auto w = ecs(g, {states(g, {"0", "1"}), StateSet(3), Modality::WeakUntil});
    EXPECT_EQ(w.set, states(g, {"0", "1"}));
}

TEST(Ecs, EqualsKleeneIteration) {
    std::mt19937_64 rng(43);
    for (int trial = 0; trial < 400; ++trial) {
        auto g = random_ts(rng, 10, 3, 0.15);
        for (auto m : {Modality::Until, Modality::WeakUntil}) {
            auto psi = random_formula(rng, 10, m);
            EXPECT_EQ(ecs(g, psi).set, kleene(g, psi));
        }
    }
}

TEST(Ecs, EqualsBruteForceOracle) {
    std::mt19937_64 rng(47);
    for (int trial = 0; trial < 300; ++trial) {
        auto g = random_ts(rng, 5, 2, 0.25);
        for (auto m : {Modality::Until, Modality::WeakUntil}) {
            auto psi = random_formula(rng, 5, m);
            EXPECT_EQ(ecs(g, psi).set, brute_force_ecs(g, psi));
        }
    }
}

TEST(Ecs, RanksAreConsistent) {
    std::mt19937_64 rng(53);
    for (int trial = 0; trial < 200; ++trial) {
        auto g = random_ts(rng, 12, 2, 0.12);
        auto psi = random_formula(rng, 12, Modality::Until);
        auto fp = ecs(g, psi);
        for (StateId s = 0; s < 12; ++s) {
            EXPECT_EQ(fp.rank_of(s) != 0, fp.set.contains(s));
            if (psi.target.contains(s)) { EXPECT_EQ(fp.rank_of(s), 1u); }
            if (fp.rank_of(s) < 2) continue;
            bool witness = false;
            auto [b, e] = g.edges_of(s);
            for (EdgeId i = b; i < e; ++i) {
                bool down = true;
                for (auto t : g.edge_targets(i)) down = down && fp.rank_of(t) != 0 && fp.rank_of(t) < fp.rank_of(s);
                witness = witness || down;
            }
            EXPECT_TRUE(witness);
        }
    }
}

TEST(Ecs, UntilImpliesWeakUntil) {
    std::mt19937_64 rng(59);
    for (int trial = 0; trial < 200; ++trial) {
        auto g = random_ts(rng, 9, 2, 0.2);
        auto psi = random_formula(rng, 9, Modality::Until);
        auto weak = psi;
        weak.modality = Modality::WeakUntil;
        EXPECT_TRUE(ecs(g, psi).set.is_subset_of(ecs(g, weak).set));
    }
}

TEST(Ecs, RejectsInvalidInput) {
    auto g = fig1();
    EXPECT_THROW(ecs(g, {states(g, {"0"}), states(g, {"0"}), Modality::Until}), PreconditionError);
    EXPECT_THROW(ecs(g, {StateSet(2), StateSet(2), Modality::Until}), PreconditionError);
    TransitionSystemBuilder b;
    b.add_label("l");
    b.add_state("x");
    auto dead = b.build();
    EXPECT_THROW(ecs(dead, {StateSet(1, {0}), StateSet(1), Modality::Until}), PreconditionError);
}

TEST(Enforcer, ControlledSystemSatisfiesFormula) {
    std::mt19937_64 rng(61);
    for (int trial = 0; trial < 150; ++trial) {
        auto g = random_ts(rng, 6, 2, 0.2);
        for (auto m : {Modality::Until, Modality::WeakUntil}) {
            auto psi = random_formula(rng, 6, m);
            auto fp = ecs(g, psi);
            auto c = enforcer(g, psi, fp);
            for (StateId s = 0; s < 6; ++s) EXPECT_FALSE(c.allowed[s].empty());
            for (auto s : fp.set)
                EXPECT_TRUE(holds_at_bounded(g, psi.to_formula(), s, 8, c.filter())) << "state " << s;
        }
    }
}

TEST(BruteForce, RejectsLargeSystems) {
    std::mt19937_64 rng(1);
    auto g = random_ts(rng, 8, 2, 0.2);
    EXPECT_THROW(brute_force_ecs(g, {StateSet(8), StateSet(8), Modality::Until}), PreconditionError);
}

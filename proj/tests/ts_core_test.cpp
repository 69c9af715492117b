#include <gtest/gtest.h>

#include <random>
#include <set>

#include "test_support.hpp"

using namespace rsb;
using namespace rsb::testing;

namespace {

std::set<StateId> as_std_set(const StateSet& s) { return {s.begin(), s.end()}; }

}  // namespace

TEST(StateSet, MatchesStdSetUnderRandomOperations) {
    std::mt19937_64 rng(11);
    for (std::size_t n : {1u, 7u, 64u, 65u, 130u}) {
        for (int trial = 0; trial < 40; ++trial) {
            auto a = random_subset(rng, n, 0.4);
            auto b = random_subset(rng, n, 0.6);
            const auto sa = as_std_set(a), sb = as_std_set(b);
            std::set<StateId> u, i, d;
            std::set_union(sa.begin(), sa.end(), sb.begin(), sb.end(), std::inserter(u, u.end()));
            std::set_intersection(sa.begin(), sa.end(), sb.begin(), sb.end(), std::inserter(i, i.end()));
            std::set_difference(sa.begin(), sa.end(), sb.begin(), sb.end(), std::inserter(d, d.end()));
            EXPECT_EQ(as_std_set(a | b), u);
            EXPECT_EQ(as_std_set(a & b), i);
            EXPECT_EQ(as_std_set(a - b), d);
            EXPECT_EQ(a.count(), sa.size());
            EXPECT_EQ(a.is_subset_of(b), std::includes(sb.begin(), sb.end(), sa.begin(), sa.end()));
            EXPECT_EQ(a.intersects(b), !i.empty());
            EXPECT_EQ(a.complement().count(), n - sa.size());
            EXPECT_EQ((a | a.complement()), StateSet::full(n));
        }
    }
}

TEST(StateSet, IteratesInAscendingOrder) {
    StateSet s(200, {199, 3, 64, 63, 0});
    EXPECT_EQ(s.to_vector(), (std::vector<StateId>{0, 3, 63, 64, 199}));
    EXPECT_EQ(s.first(), 0u);
    StateSet e(10);
    EXPECT_TRUE(e.empty());
    EXPECT_EQ(e.begin(), e.end());
}

TEST(TransitionSystem, ThreeStateModelStructure) {
    auto g = fig1();
    EXPECT_EQ(g.num_states(), 3u);
    EXPECT_EQ(g.num_labels(), 2u);
    EXPECT_EQ(g.num_transitions(), 4u);
    EXPECT_TRUE(is_deadlock_free(g));
    const auto s0 = id(g, "0"), s1 = id(g, "1");
    const auto alpha = *g.find_label("alpha");
    EXPECT_TRUE(g.has_transition(s0, alpha, s1));
    EXPECT_FALSE(g.has_transition(s1, alpha, s1));
    EXPECT_EQ(g.enabled(s0).size(), 2u);
    EXPECT_EQ(g.initial(), StateSet(3, {s0}));
    EXPECT_EQ(g.post(s0), states(g, {"1", "2"}));
}

TEST(TransitionSystem, BackwardEdgesMatchForwardEdges) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 30; ++trial) {
        auto g = random_ts(rng, 9, 3, 0.2);
        std::multiset<std::pair<EdgeId, StateId>> fwd, bwd;
        for (EdgeId e = 0; e < g.num_edges(); ++e)
            for (auto t : g.edge_targets(e)) fwd.insert({e, t});
        for (StateId t = 0; t < g.num_states(); ++t)
            for (auto e : g.edges_into(t)) bwd.insert({e, t});
        EXPECT_EQ(fwd, bwd);
    }
}

TEST(TransitionSystem, DeadlockDetection) {
    TransitionSystemBuilder b;
    b.add_label("l");
    b.add_state("x");
    b.add_state("y");
    b.add_transition(0, 0, 1);
    auto g = b.build();
    EXPECT_FALSE(is_deadlock_free(g));
    EXPECT_EQ(deadlock_states(g), std::vector<StateId>{1});
}

TEST(TransitionSystem, DisjointUnionKeepsBothParts) {
    auto g1 = fig1();
    auto g2 = fig2();
    auto u = disjoint_union(g1, g2);
    EXPECT_EQ(u.num_states(), g1.num_states() + g2.num_states());
    EXPECT_EQ(u.num_transitions(), g1.num_transitions() + g2.num_transitions());
    EXPECT_EQ(u.initial().count(), 2u);
    const auto off = static_cast<StateId>(g1.num_states());
    for (auto [s, l, t] : g2.transitions())
        EXPECT_TRUE(u.has_transition(s + off, *u.find_label(g2.label_name(l)), t + off));
}

TEST(ModelIo, SaveLoadRoundTripIsCanonical) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        auto g = random_ts(rng, 6, 2, 0.25, 3);
        const auto text = save_ts(g);
        auto h = load_ts(text);
        EXPECT_EQ(save_ts(h), text);
        EXPECT_EQ(h.transitions(), g.transitions());
    }
    EXPECT_EQ(save_ts(load_ts(save_ts(fig2()))), save_ts(fig2()));
}

TEST(ModelIo, ReportsMalformedInput) {
    EXPECT_THROW(load_ts("{"), ParseError);
    EXPECT_THROW(load_ts(R"({"states": [], "transitions": []})"), ParseError);
    EXPECT_THROW(load_ts(R"({"alphabet": ["a"], "states": [{"id": "x"}], "transitions": [["x", "b", "x"]]})"),
                 ParseError);
    EXPECT_THROW(load_ts(R"({"alphabet": ["a"], "states": [{"id": "x"}], "transitions": [["x", "a", "y"]]})"),
                 ParseError);
    EXPECT_THROW(load_ts(R"({"alphabet": ["a"], "states": [{"id": "x"}, {"id": "x"}], "transitions": []})"),
                 ParseError);
    EXPECT_THROW(load_ts(R"({"props": [], "alphabet": ["a"], "states": [{"id": "x", "props": ["p"]}], "transitions": []})"),
                 ParseError);
    try {
        load_ts("{\n\"states\": [\n  oops\n]}");
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
    }
    EXPECT_THROW(load_ts_file("/nonexistent/model.json"), ParseError);
}

TEST(Lasso, ValidityAndPositions) {
    auto g = fig1();
    Lasso ok{{id(g, "0")}, {id(g, "1"), id(g, "0")}};
    EXPECT_TRUE(is_valid_lasso(g, ok));
    EXPECT_EQ(ok.at(5), id(g, "1"));
    EXPECT_EQ(ok.successor(2), 1u);
    Lasso bad{{}, {id(g, "1"), id(g, "2")}};
    EXPECT_FALSE(is_valid_lasso(g, bad));
    EXPECT_FALSE(is_valid_lasso(g, Lasso{{id(g, "0")}, {}}));
}

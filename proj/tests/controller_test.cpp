#include <gtest/gtest.h>

#include <random>

#include "test_support.hpp"

using namespace rsb;
using namespace rsb::testing;

namespace {

// Closed loop of g under a finite-memory controller, as a graph over
// (state, memory). Checks that every reachable node has a permitted
// successor and that no reachable cycle avoids a goal.
bool closed_loop_satisfies_gf(const TransitionSystem& g, const FiniteMemoryController& c,
                              const std::vector<StateSet>& goals) {
    const auto n = g.num_states();
    auto node = [&](StateId s, MemoryId m) { return m * n + s; };
    const auto total = c.num_memory * n;
    std::vector<std::vector<std::size_t>> succ(total);
    std::vector<char> reach(total, 0);
    std::vector<std::size_t> stack;
    for (auto s : g.initial()) {
        reach[node(s, c.initial_memory)] = 1;
        stack.push_back(node(s, c.initial_memory));
    }
    while (!stack.empty()) {
        const auto v = stack.back();
        stack.pop_back();
        const auto s = static_cast<StateId>(v % n);
        const auto m = static_cast<MemoryId>(v / n);
        if (c.labels(m, s).empty()) return false;
        for (auto l : c.labels(m, s)) {
            auto ts = g.post(s, l);
            if (ts.empty()) return false;
            for (auto t : ts) {
                const auto w = node(t, c.update(m, s, l, t));
                succ[v].push_back(w);
                if (!reach[w]) {
                    reach[w] = 1;
                    stack.push_back(w);
                }
            }
        }
    }
    for (const auto& goal : goals) {
        std::vector<std::size_t> indeg(total, 0);
        auto alive = [&](std::size_t v) { return reach[v] && !goal.contains(static_cast<StateId>(v % n)); };
        for (std::size_t v = 0; v < total; ++v)
            if (alive(v))
                for (auto w : succ[v])
                    if (alive(w)) ++indeg[w];
        std::vector<std::size_t> ready;
        std::size_t alive_count = 0, peeled = 0;
        for (std::size_t v = 0; v < total; ++v)
            if (alive(v)) {
                ++alive_count;
                if (!indeg[v]) ready.push_back(v);
            }
        while (!ready.empty()) {
            const auto v = ready.back();
            ready.pop_back();
            ++peeled;
            for (auto w : succ[v])
                if (alive(w) && --indeg[w] == 0) ready.push_back(w);
        }
        if (peeled != alive_count) return false;
    }
    return true;
}

FiniteMemoryController stay_or_reach_c(const MaterializedQuotient& qm, BlockId d, BlockId c) {
    std::vector<std::vector<LabelId>> allowed(qm.ts.num_states());
    for (LabelId l = 0; l < qm.labels.size(); ++l) {
        const auto& f = qm.labels[l];
        if (f.source != d || (f.modality == Modality::WeakUntil && f.target == BlockSet{c})) allowed[f.source].push_back(l);
    }
    return FiniteMemoryController::memoryless(allowed);
}

}  // namespace

TEST(Synthesis, AlternationNeedsMemory) {
    auto g = fig1();
    auto goals = gf_goal_sets(g, parse_formula("G F a & G F b"));
    auto sol = solve_gf(g, goals);
    EXPECT_EQ(sol.winning, g.all_states());
    ASSERT_TRUE(sol.controller.has_value());
    EXPECT_EQ(sol.controller->num_memory, 2u);
    EXPECT_TRUE(closed_loop_satisfies_gf(g, *sol.controller, goals));
}

TEST(Synthesis, ControllersAreCorrectOnRandomGames) {
    std::mt19937_64 rng(101);
    int realizable = 0;
    for (int trial = 0; trial < 300; ++trial) {
        auto g = random_ts(rng, 8, 2, 0.15, 2);
        std::vector<StateSet> goals{g.states_with(0), g.states_with(1)};
        auto sol = solve_gf(g, goals);
        if (!sol.controller) {
            EXPECT_FALSE(g.initial().is_subset_of(sol.winning));
            continue;
        }
        ++realizable;
        EXPECT_TRUE(closed_loop_satisfies_gf(g, *sol.controller, goals));
    }
    EXPECT_GT(realizable, 10);
}

TEST(Synthesis, LosingStatesCannotWinPositionally) {
    // Exhaustive check on tiny games: no positional controller wins from a
    // state outside the winning region (positional strategies suffice for a
    // single goal).
    std::mt19937_64 rng(103);
    for (int trial = 0; trial < 200; ++trial) {
        auto g = random_ts(rng, 4, 2, 0.3, 1);
        std::vector<StateSet> goals{g.states_with(0)};
        auto sol = solve_gf(g, goals);
        std::vector<std::vector<LabelId>> choice(4);
        std::vector<std::size_t> pick(4, 0);
        std::vector<std::vector<LabelId>> en(4);
        for (StateId s = 0; s < 4; ++s) en[s] = g.enabled(s);
        StateSet winnable(4);
        while (true) {
            for (StateId s = 0; s < 4; ++s) choice[s] = {en[s][pick[s]]};
            auto c = FiniteMemoryController::memoryless(choice);
            for (StateId s = 0; s < 4; ++s) {
                TransitionSystemBuilder b;
                for (auto& p : g.prop_names()) b.add_prop(p);
                for (auto& l : g.label_names()) b.add_label(l);
                for (StateId x = 0; x < 4; ++x) b.add_state_with_props(g.state_name(x), g.props_of(x));
                for (auto [x, l, y] : g.transitions()) b.add_transition(x, l, y);
                b.set_initial(s);
                if (closed_loop_satisfies_gf(b.build(), c, goals)) winnable.insert(s);
            }
            std::size_t i = 0;
            for (; i < 4; ++i) {
                if (++pick[i] < en[i].size()) break;
                pick[i] = 0;
            }
            if (i == 4) break;
        }
        EXPECT_EQ(winnable, sol.winning);
    }
}

TEST(Synthesis, GoalParsing) {
    auto g = fig1();
    EXPECT_EQ(gf_goal_sets(g, parse_formula("G F (a | b)")).front(), states(g, {"1", "2"}));
    EXPECT_THROW(gf_goals(g, parse_formula("F a")), ParseError);
    EXPECT_THROW(gf_goals(g, parse_formula("G F zz")), PreconditionError);
    EXPECT_THROW(solve_gf(g, {}), PreconditionError);
}

TEST(AbstractSide, WeakUntilCAtD) {
    auto g = fig2();
    auto r = coarsest_rsb(g);
    auto q = build_quotient(g, r);
    auto qm = quotient_as_ts(q);
    const auto d = r.block_of(id(g, "d1")), c = r.block_of(id(g, "c1"));
    auto ct = stay_or_reach_c(qm, d, c);
    EXPECT_EQ(reached_superblock(qm.ts, ct, {d, 0}), BlockSet{c});
    EXPECT_TRUE(can_stay_forever(qm.ts, ct, {d, 0}));
    auto f = enforced_formula(qm.ts, ct, {d, 0});
    EXPECT_EQ(f.modality, Modality::WeakUntil);
    EXPECT_EQ(f.target, BlockSet{c});
}

TEST(Executor, DecisionsAlongD1D2) {
    auto g = fig2();
    auto r = coarsest_rsb(g);
    auto q = build_quotient(g, r);
    auto qm = quotient_as_ts(q);
    const auto d = r.block_of(id(g, "d1")), c = r.block_of(id(g, "c1"));
    auto ct = stay_or_reach_c(qm, d, c);
    auto ex = new_executor(g, q, qm, ct, id(g, "d1"));
    const auto sigma1 = *g.find_label("sigma1");
    EXPECT_EQ(ex.decision(), std::vector<LabelId>{sigma1});
    EXPECT_EQ(executor_step(ex, id(g, "d2")), std::vector<LabelId>{sigma1});
    EXPECT_EQ(ex.abstract_trace().size(), 1u);
    executor_step(ex, id(g, "c1"));
    EXPECT_EQ(ex.config().state, c);
    EXPECT_EQ(ex.abstract_trace().back().state, c);
    EXPECT_THROW(executor_step(ex, id(g, "a1")), ExecutorError);
}

TEST(Executor, ClosedLoopFollowsAbstractController) {
    auto g = fig2();
    auto r = coarsest_rsb(g);
    auto q = build_quotient(g, r);
    auto qm = quotient_as_ts(q);
    const auto d = r.block_of(id(g, "d1")), c = r.block_of(id(g, "c1"));
    auto ct = stay_or_reach_c(qm, d, c);
    auto loop = explore_closed_loop(g, q, qm, ct, {id(g, "d1")});
    EXPECT_FALSE(loop.truncated);
    for (std::size_t i = 0; i < loop.nodes.size(); ++i) {
        const auto& nd = loop.nodes[i];
        EXPECT_TRUE(nd.defined);
        EXPECT_EQ(nd.config.state, r.block_of(nd.state));
        EXPECT_FALSE(loop.succ[i].empty());
    }
}

TEST(ControllerFile, RoundTrip) {
    auto g = fig1();
    auto goals = gf_goal_sets(g, parse_formula("G F a & G F b"));
    auto c = *synth_gf(g, goals);
    auto text = save_controller(c, g);
    auto back = load_controller(text, g);
    EXPECT_EQ(back.num_memory, c.num_memory);
    EXPECT_EQ(back.output, c.output);
    EXPECT_EQ(back.next, c.next);
    EXPECT_EQ(save_controller(back, g), text);
}

TEST(ControllerFile, RejectsMalformedInput) {
    auto g = fig1();
    EXPECT_THROW(load_controller("{}", g), ParseError);
    EXPECT_THROW(load_controller(R"({"memory_states": 1, "initial_memory": 2, "output": [], "update": []})", g), ParseError);
    EXPECT_THROW(load_controller(
                     R"({"memory_states": 1, "initial_memory": 0, "output": [{"memory": 0, "state": "9", "labels": []}], "update": []})", g),
                 ParseError);
    EXPECT_THROW(load_controller(
                     R"({"memory_states": 1, "initial_memory": 0, "output": [{"memory": 0, "state": "0", "labels": ["gamma"]}], "update": []})", g),
                 ParseError);
}

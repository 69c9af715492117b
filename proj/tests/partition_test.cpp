#include <gtest/gtest.h>

#include <random>

#include "test_support.hpp"

using namespace rsb;
using namespace rsb::testing;

namespace {

// Enumerative oracle: R is an RSB iff it is label-consistent and no block P
// has a formula P <> T, T any union of other blocks, enforceable from some
// but not all of P.
bool oracle_is_rsb(const TransitionSystem& g, const Partition& r) {
    if (!is_label_consistent(g, r)) return false;
    const auto k = r.num_blocks();
    for (BlockId b = 0; b < k; ++b) {
        std::vector<BlockId> others;
        for (BlockId c = 0; c < k; ++c)
            if (c != b) others.push_back(c);
        for (std::uint64_t bits = 0; bits < (std::uint64_t{1} << others.size()); ++bits) {
            std::vector<BlockId> ids;
            for (std::size_t i = 0; i < others.size(); ++i)
                if (bits >> i & 1u) ids.push_back(others[i]);
            for (auto m : {Modality::Until, Modality::WeakUntil}) {
                auto e = ecs(g, {r.block(b), r.superblock(ids), m}).set;
                if (r.block(b).intersects(e) && !r.block(b).is_subset_of(e)) return false;
            }
        }
    }
    return true;
}

// All set partitions of 0..n-1 as restricted growth strings.
std::vector<Partition> all_partitions(std::size_t n) {
    std::vector<Partition> out;
    std::vector<std::uint32_t> a(n, 0);
    std::function<void(std::size_t, std::uint32_t)> rec = [&](std::size_t i, std::uint32_t mx) {
        if (i == n) {
            out.push_back(Partition::from_assignment(a));
            return;
        }
        for (std::uint32_t v = 0; v <= mx + 1; ++v) {
            a[i] = v;
            rec(i + 1, std::max(mx, v));
        }
    };
    a[0] = 0;
    rec(1, 0);
    return out;
}

// Minimal masks by enumerating all subsets of exit classes.
TargetAntichain oracle_family(const TransitionSystem& g, const StateSet& p, const std::vector<StateSet>& exits,
                              Modality m, StateId s) {
    const auto k = exits.size();
    std::vector<ExitMask> hits;
    for (std::uint64_t bits = 0; bits < (std::uint64_t{1} << k); ++bits) {
        ExitMask mask(k);
        StateSet t(g.num_states());
        for (std::size_t i = 0; i < k; ++i)
            if (bits >> i & 1u) {
                mask.insert(static_cast<StateId>(i));
                t |= exits[i];
            }
        if (ecs(g, {p, t, m}).set.contains(s)) hits.push_back(mask);
    }
    return detail::minimize(hits);
}

RefinementOptions options(SplitStrategy s, SearchOrder o, bool memo = true) {
    RefinementOptions opts;
    opts.strategy = s;
    opts.order = o;
    opts.memoize = memo;
    return opts;
}

}  // namespace

TEST(Partition, SplitKeepsIdsAndCanonicalRenumbers) {
    auto p = Partition::single_block(5);
    auto fresh = p.split(0, StateSet(5, {1, 3}));
    EXPECT_EQ(fresh, 1u);
    EXPECT_EQ(p.block(0), StateSet(5, {1, 3}));
    EXPECT_EQ(p.block(1), StateSet(5, {0, 2, 4}));
    EXPECT_EQ(p.generation(), 1u);
    auto c = p.canonical();
    EXPECT_EQ(c.block_of(0), 0u);
    EXPECT_TRUE(c.same_relation(p));
    EXPECT_THROW(p.split(0, StateSet(5, {1, 3})), PreconditionError);
    EXPECT_TRUE(p.refines(Partition::single_block(5)));
    EXPECT_FALSE(Partition::single_block(5).refines(p));
    EXPECT_TRUE(p.is_superblock(StateSet(5, {0, 2, 4})));
    EXPECT_FALSE(p.is_superblock(StateSet(5, {0, 1})));
}

TEST(Partition, FromBlocksValidates) {
    EXPECT_THROW(Partition::from_blocks(3, {StateSet(3, {0, 1})}), PreconditionError);
    EXPECT_THROW(Partition::from_blocks(3, {StateSet(3, {0, 1}), StateSet(3, {1, 2})}), PreconditionError);
    auto p = Partition::from_blocks(3, {StateSet(3, {2}), StateSet(3, {0, 1})});
    EXPECT_EQ(p.block_of(0), 0u);
    EXPECT_EQ(p.block_of(2), 1u);
}

TEST(Partition, SuperblockEnumerationIsComplete) {
    auto p = Partition::from_blocks(4, {StateSet(4, {0}), StateSet(4, {1, 2}), StateSet(4, {3})});
    std::set<StateSet> seen;
    for (const auto& s : superblocks_of(p)) {
        EXPECT_TRUE(p.is_superblock(s));
        seen.insert(s);
    }
    EXPECT_EQ(seen.size(), 8u);
}

TEST(Refinement, InitialPartitionGroupsByLabel) {
    auto g = fig2();
    auto r = initial_partition(g);
    EXPECT_EQ(r.num_blocks(), 4u);
    EXPECT_TRUE(is_label_consistent(g, r));
    EXPECT_FALSE(is_label_consistent(g, Partition::single_block(g.num_states())));
}

TEST(Refinement, TwelveStateModelHasSixClasses) {
    auto g = fig2();
    SixClasses expect(g);
    for (auto s : {SplitStrategy::Single, SplitStrategy::Signature})
        for (auto o : {SearchOrder::Forward, SearchOrder::Reverse}) {
            auto r = coarsest_rsb(g, options(s, o));
            EXPECT_TRUE(r.same_relation(Partition::from_blocks(g.num_states(), expect.all())));
        }
}

TEST(Refinement, TraceIsDecreasingChainOfSplits) {
    auto g = fig2();
    std::vector<Partition> trace;
    RefinementStats st;
    auto r = coarsest_rsb(g, {}, &st, &trace);
    ASSERT_GE(trace.size(), 2u);
    EXPECT_TRUE(trace.front().same_relation(initial_partition(g)));
    EXPECT_TRUE(trace.back().same_relation(r));
    for (std::size_t i = 1; i < trace.size(); ++i) {
        EXPECT_TRUE(trace[i].refines(trace[i - 1]));
        EXPECT_EQ(trace[i].num_blocks(), trace[i - 1].num_blocks() + 1);
    }
    EXPECT_EQ(st.splitters_applied, trace.size() - 1);
    EXPECT_EQ(st.iterations, st.splitters_applied + 1);
}

TEST(Refinement, FindSplitterReportsGenuineSplitter) {
    std::mt19937_64 rng(67);
    for (int trial = 0; trial < 100; ++trial) {
        auto g = random_ts(rng, 8, 2, 0.2);
        auto r = initial_partition(g);
        while (auto rep = find_splitter(g, r)) {
            EXPECT_EQ(rep->formula.source, r.block(rep->block));
            EXPECT_TRUE(r.is_superblock(rep->formula.target));
            EXPECT_EQ(rep->ecs_set, ecs(g, rep->formula).set);
            EXPECT_FALSE(rep->inside.empty());
            EXPECT_FALSE(rep->outside.empty());
            EXPECT_EQ(rep->inside | rep->outside, r.block(rep->block));
            r = refine(r, *rep);
        }
    }
}

TEST(Refinement, IsRsbMatchesEnumerativeOracle) {
    std::mt19937_64 rng(71);
    for (int trial = 0; trial < 60; ++trial) {
        auto g = random_ts(rng, 5, 2, 0.25, 1);
        for (const auto& r : all_partitions(5)) EXPECT_EQ(is_rsb(g, r), oracle_is_rsb(g, r));
    }
}

TEST(Refinement, ResultIsCoarsestAmongAllRsbs) {
    std::mt19937_64 rng(73);
    for (int trial = 0; trial < 40; ++trial) {
        auto g = random_ts(rng, 6, 2, 0.2, 1);
        auto r = coarsest_rsb(g);
        EXPECT_TRUE(oracle_is_rsb(g, r));
        for (const auto& q : all_partitions(6))
            if (oracle_is_rsb(g, q)) { EXPECT_TRUE(q.refines(r)); }
    }
}

TEST(Refinement, StrategiesAndOrdersAgree) {
    std::mt19937_64 rng(79);
    for (int trial = 0; trial < 150; ++trial) {
        auto g = random_ts(rng, 14, 3, 0.08, 2);
        auto base = coarsest_rsb(g, options(SplitStrategy::Single, SearchOrder::Forward, false));
        for (auto s : {SplitStrategy::Single, SplitStrategy::Signature})
            for (auto o : {SearchOrder::Forward, SearchOrder::Reverse})
                for (bool memo : {false, true}) EXPECT_TRUE(coarsest_rsb(g, options(s, o, memo)).same_relation(base));
    }
}

TEST(Refinement, SplitCapIsEnforced) {
    auto g = fig2();
    RefinementOptions opts;
    opts.max_splits = 1;
    EXPECT_THROW(coarsest_rsb(g, opts), Error);
    opts.strategy = SplitStrategy::Signature;
    EXPECT_THROW(coarsest_rsb(g, opts), Error);
}

TEST(Refinement, ExitClassLimitIsEnforced) {
    auto g = fig2();
    RefinementOptions opts;
    opts.max_exit_classes = 1;
    EXPECT_THROW(coarsest_rsb(g, opts), PreconditionError);
}

TEST(Refinement, MemoSkipsStableBlocks) {
    std::mt19937_64 rng(131);
    std::size_t hits = 0;
    for (int trial = 0; trial < 20; ++trial) {
        auto g = random_ts(rng, 14, 3, 0.08, 2);
        RefinementStats with, without;
        RefinementOptions opts;
        coarsest_rsb(g, opts, &with);
        opts.memoize = false;
        coarsest_rsb(g, opts, &without);
        EXPECT_EQ(without.memo_hits, 0u);
        EXPECT_EQ(with.splitters_applied, without.splitters_applied);
        EXPECT_LE(with.splitters_tested, without.splitters_tested);
        hits += with.memo_hits;
    }
    EXPECT_GT(hits, 0u);
}

TEST(Antichain, TargetFamiliesMatchEnumeration) {
    std::mt19937_64 rng(83);
    for (int trial = 0; trial < 200; ++trial) {
        auto g = random_ts(rng, 9, 2, 0.15, 1);
        auto r = Partition::from_assignment([&] {
            std::vector<std::uint32_t> key(9);
            std::uniform_int_distribution<std::uint32_t> pick(0, 4);
            for (auto& k : key) k = pick(rng);
            return key;
        }());
        for (BlockId b = 0; b < r.num_blocks(); ++b) {
            const auto& p = r.block(b);
            std::vector<StateSet> exits;
            for (auto e : exit_classes(g, r, b)) exits.push_back(r.block(e));
            for (auto m : {Modality::Until, Modality::WeakUntil}) {
                auto fam = target_antichains(g, p, exits, m);
                bool never = false;
                for (auto s : p) {
                    auto expect = oracle_family(g, p, exits, m, s);
                    EXPECT_EQ(fam[s], expect);
                    never = never || expect.empty();
                }
                // masks enforceable from every state
                std::vector<ExitMask> all;
                for (std::uint64_t bits = 0; bits < (std::uint64_t{1} << exits.size()); ++bits) {
                    ExitMask mask(exits.size());
                    for (std::size_t i = 0; i < exits.size(); ++i)
                        if (bits >> i & 1u) mask.insert(static_cast<StateId>(i));
                    bool everywhere = true;
                    for (auto s : p) everywhere = everywhere && covers(fam[s], mask);
                    if (everywhere) all.push_back(mask);
                }
                const auto common = detail::minimize(all);
                EXPECT_EQ(common_targets(p, fam), common);
                if (never) { EXPECT_TRUE(common.empty()); }
            }
        }
    }
}

TEST(Antichain, RejectsExitOverlappingSource) {
    auto g = fig1();
    EXPECT_THROW(target_antichains(g, states(g, {"0"}), {states(g, {"0", "1"})}, Modality::Until), PreconditionError);
}

#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <unordered_map>
#include <vector>

#include "rsb/antichain.hpp"
#include "rsb/errors.hpp"
#include "rsb/fixpoint.hpp"
#include "rsb/ltl.hpp"
#include "rsb/partition.hpp"
#include "rsb/transition_system.hpp"

namespace rsb {

/// A step formula enforceable from some but not all states of its source
/// block, with the resulting split.
struct SplitterReport {
    BlockId block = 0;
    StutterStepFormula formula;
    StateSet ecs_set;
    StateSet inside;
    StateSet outside;
};

/// Order in which candidate splitters are tried. Forward: blocks by
/// ascending id, targets by ascending cardinality then lexicographically by
/// block ids, Until before WeakUntil. Reverse inverts all three.
enum class SearchOrder { Forward, Reverse };

/// Single: split along one splitter per iteration. Signature: split a block
/// at once by all its splitters, i.e. into the classes of states with equal
/// target antichains for both modalities.
enum class SplitStrategy { Single, Signature };

struct RefinementOptions {
    SearchOrder order = SearchOrder::Forward;
    SplitStrategy strategy = SplitStrategy::Single;
    bool memoize = true;
    /// Maximum number of splits; 0 means the number of states.
    std::size_t max_splits = 0;
    /// Refuse blocks with more exit classes than this; 0 means no limit.
    std::size_t max_exit_classes = 0;
};

struct RefinementStats {
    std::size_t iterations = 0;
    /// Candidate formulas checked with ecs.
    std::size_t splitters_tested = 0;
    std::size_t splitters_applied = 0;
    std::size_t memo_hits = 0;
};

/// Label-equality partition: states with the same proposition set share a block.
inline Partition initial_partition(const TransitionSystem& g) {
    std::map<PropSet, std::uint32_t> ids;
    std::vector<std::uint32_t> key(g.num_states());
    for (StateId s = 0; s < g.num_states(); ++s)
        key[s] = ids.emplace(g.props_of(s), static_cast<std::uint32_t>(ids.size())).first->second;
    return Partition::from_assignment(key);
}

inline bool is_label_consistent(const TransitionSystem& g, const Partition& r) {
    if (r.universe() != g.num_states()) return false;
    for (const auto& blk : r.blocks()) {
        const auto& l = g.props_of(blk.first());
        for (auto s : blk)
            if (g.props_of(s) != l) return false;
    }
    return true;
}

/// Blocks other than `b` that contain a successor of some state of b, by
/// ascending id.
inline std::vector<BlockId> exit_classes(const TransitionSystem& g, const Partition& r, BlockId b) {
    const auto& p = r.block(b);
    StateSet post(g.num_states());
    for (auto s : p) post |= g.post(s);
    return r.blocks_touching(post - p);
}

/// Remembers (block, modality) pairs found stable, together with the exit
/// classes they were checked against. Stability depends only on the block and
/// its exit classes, so an entry stays valid while both are unchanged.
class SplitterMemo {
public:
    bool is_stable(const StateSet& p, Modality m, const std::vector<StateSet>& exits) const {
        auto it = entries_.find(p.hash() * 2 + static_cast<std::size_t>(m));
        if (it == entries_.end()) return false;
        return std::any_of(it->second.begin(), it->second.end(),
                           [&](const Entry& e) { return e.modality == m && e.source == p && e.exits == exits; });
    }
    void mark_stable(const StateSet& p, Modality m, std::vector<StateSet> exits) {
        entries_[p.hash() * 2 + static_cast<std::size_t>(m)].push_back({p, m, std::move(exits)});
    }
    std::size_t size() const { return entries_.size(); }
    void clear() { entries_.clear(); }

private:
    struct Entry {
        StateSet source;
        Modality modality;
        std::vector<StateSet> exits;
    };
    std::unordered_map<std::size_t, std::vector<Entry>> entries_;
};

namespace detail {

inline StateSet target_union(std::size_t n, const std::vector<StateSet>& exits, const ExitMask& mask) {
    StateSet t(n);
    for (auto i : mask) t |= exits[i];
    return t;
}

// Cheap candidate targets of block b: all exit classes, no exit class, and
// for every edge leaving a state of b the exit classes it reaches. Sorted in
// canonical mask order, reversed for the Reverse search order.
inline std::vector<ExitMask> probe_targets(const TransitionSystem& g, const Partition& r, BlockId b,
                                           const std::vector<BlockId>& exit_ids, bool fwd) {
    const auto k = exit_ids.size();
    std::vector<int> index(r.num_blocks(), -1);
    for (std::size_t i = 0; i < k; ++i) index[exit_ids[i]] = static_cast<int>(i);
    std::vector<ExitMask> out{ExitMask(k), ExitMask::full(k)};
    for (auto s : r.block(b)) {
        auto [eb, ee] = g.edges_of(s);
        for (EdgeId i = eb; i < ee; ++i) {
            ExitMask m(k);
            for (auto t : g.edge_targets(i))
                if (index[r.block_of(t)] >= 0) m.insert(static_cast<StateId>(index[r.block_of(t)]));
            out.push_back(std::move(m));
        }
    }
    std::sort(out.begin(), out.end(), mask_less);
    out.erase(std::unique(out.begin(), out.end()), out.end());
    if (!fwd) std::reverse(out.begin(), out.end());
    return out;
}

}  // namespace detail

/// Searches every block for a splitter. Each block is first probed with
/// cheap candidate targets (see detail::probe_targets); if none splits, the
/// exact check compares target antichains: P is stable for a modality iff
/// all its states have the same antichain, and otherwise some mask lies in
/// the family of one state but not another. Forward order picks the first
/// such mask in canonical order, Reverse the last.
inline std::optional<SplitterReport> find_splitter(const TransitionSystem& g, const Partition& r,
                                                   const RefinementOptions& opts = {}, RefinementStats* stats = nullptr,
                                                   SplitterMemo* memo = nullptr) {
    if (r.universe() != g.num_states()) throw PreconditionError("partition does not match the state space");
    if (!is_deadlock_free(g)) throw PreconditionError("splitter search requires a deadlock-free transition system");
    RefinementStats local;
    RefinementStats& st = stats ? *stats : local;
    const bool fwd = opts.order == SearchOrder::Forward;
    const Modality modalities[2] = {fwd ? Modality::Until : Modality::WeakUntil,
                                    fwd ? Modality::WeakUntil : Modality::Until};
    const auto n = g.num_states();

    std::vector<BlockId> order(r.num_blocks());
    for (BlockId b = 0; b < order.size(); ++b) order[b] = b;
    if (!fwd) std::reverse(order.begin(), order.end());

    for (auto b : order) {
        const auto& p = r.block(b);
        if (p.count() < 2) continue;  // a singleton cannot be split
        const auto exit_ids = exit_classes(g, r, b);
        if (opts.max_exit_classes && exit_ids.size() > opts.max_exit_classes)
            throw PreconditionError("block " + std::to_string(b) + " has " + std::to_string(exit_ids.size()) +
                                    " exit classes, above the configured limit");
        std::vector<StateSet> exits;
        for (auto e : exit_ids) exits.push_back(r.block(e));
        auto report = [&](const ExitMask& mask, Modality m) -> std::optional<SplitterReport> {
            ++st.splitters_tested;
            StutterStepFormula psi{p, detail::target_union(n, exits, mask), m};
            auto fp = ecs(g, psi);
            if (!p.intersects(fp.set) || p.is_subset_of(fp.set)) return std::nullopt;
            auto inside = p & fp.set;
            auto outside = p - fp.set;
            return SplitterReport{b, std::move(psi), std::move(fp.set), std::move(inside), std::move(outside)};
        };
        std::vector<Modality> pending;
        for (auto m : modalities) {
            if (memo && opts.memoize && memo->is_stable(p, m, exits)) {
                ++st.memo_hits;
                continue;
            }
            pending.push_back(m);
        }
        if (pending.empty()) continue;
        const auto probes = detail::probe_targets(g, r, b, exit_ids, fwd);
        for (auto m : pending)
            for (const auto& mask : probes)
                if (auto rep = report(mask, m)) return rep;
        for (auto m : pending) {
            const auto fam = target_antichains(g, p, exits, m);
            const auto& first = fam[p.first()];
            if (std::all_of(p.begin(), p.end(), [&](StateId s) { return fam[s] == first; })) {
                if (memo && opts.memoize) memo->mark_stable(p, m, exits);
                continue;
            }
            std::vector<ExitMask> candidates;
            for (auto s : p) candidates.insert(candidates.end(), fam[s].begin(), fam[s].end());
            std::sort(candidates.begin(), candidates.end(), detail::mask_less);
            candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
            if (!fwd) std::reverse(candidates.begin(), candidates.end());
            for (const auto& mask : candidates)
                if (auto rep = report(mask, m)) return rep;
            throw Error("internal error: unstable block without a splitting target");
        }
    }
    return std::nullopt;
}

/// Splits the source block of a splitter into its enforceable and
/// non-enforceable parts. The enforceable part keeps the block id.
inline Partition refine(const Partition& r, const SplitterReport& report) {
    Partition out = r;
    out.split(report.block, report.inside);
    return out;
}

namespace detail {

// One sweep of signature splitting over all blocks; returns whether any
// block was split. A block is first split by the ECS sets of all its probe
// targets; only a block no probe splits gets the exact antichain check.
inline bool signature_sweep(const TransitionSystem& g, Partition& r, const RefinementOptions& opts,
                            RefinementStats& st, SplitterMemo& memo, std::vector<Partition>* trace) {
    const auto cap = opts.max_splits ? opts.max_splits : g.num_states();
    const auto n = g.num_states();
    bool changed = false;
    const auto initial_blocks = static_cast<BlockId>(r.num_blocks());
    for (BlockId b = 0; b < initial_blocks; ++b) {
        const auto p = r.block(b);
        if (p.count() < 2) continue;
        const auto exit_ids = exit_classes(g, r, b);
        if (opts.max_exit_classes && exit_ids.size() > opts.max_exit_classes)
            throw PreconditionError("block " + std::to_string(b) + " has " + std::to_string(exit_ids.size()) +
                                    " exit classes, above the configured limit");
        std::vector<StateSet> exits;
        for (auto e : exit_ids) exits.push_back(r.block(e));
        std::vector<Modality> pending;
        for (auto m : {Modality::Until, Modality::WeakUntil}) {
            if (opts.memoize && memo.is_stable(p, m, exits)) {
                ++st.memo_hits;
                continue;
            }
            pending.push_back(m);
        }
        if (pending.empty()) continue;

        std::vector<StateSet> groups{p};
        auto split_groups = [&](const StateSet& e) {
            std::vector<StateSet> next;
            for (auto& grp : groups) {
                auto in = grp & e;
                auto out = grp - e;
                if (!in.empty()) next.push_back(std::move(in));
                if (!out.empty()) next.push_back(std::move(out));
            }
            groups = std::move(next);
        };
        for (auto m : pending)
            for (const auto& mask : probe_targets(g, r, b, exit_ids, true)) {
                ++st.splitters_tested;
                split_groups(ecs(g, {p, target_union(n, exits, mask), m}).set);
            }
        if (groups.size() == 1) {
            for (auto m : pending) {
                const auto fam = target_antichains(g, p, exits, m);
                std::map<TargetAntichain, StateSet> by_family;
                for (auto s : p) by_family.try_emplace(fam[s], StateSet(n)).first->second.insert(s);
                if (by_family.size() == 1) {
                    if (opts.memoize) memo.mark_stable(p, m, exits);
                    continue;
                }
                for (const auto& [f, members] : by_family) split_groups(members);
            }
        }
        if (groups.size() == 1) continue;
        std::sort(groups.begin(), groups.end(),
                  [](const StateSet& x, const StateSet& y) { return x.first() < y.first(); });
        StateSet rest = p;
        for (std::size_t i = 1; i < groups.size(); ++i) {
            if (st.splitters_applied >= cap)
                throw Error("refinement exceeded the cap of " + std::to_string(cap) + " splits");
            rest -= groups[i];
            r.split(b, rest);
            ++st.splitters_applied;
            if (trace) trace->push_back(r);
        }
        changed = true;
    }
    return changed;
}

}  // namespace detail

/// Coarsest robust stutter bisimulation by splitter refinement from the
/// label-equality partition. When `trace` is given it receives every
/// intermediate partition, starting with the initial one.
inline Partition coarsest_rsb(const TransitionSystem& g, const RefinementOptions& opts = {},
                              RefinementStats* stats = nullptr, std::vector<Partition>* trace = nullptr) {
    if (!is_deadlock_free(g)) throw PreconditionError("coarsest_rsb requires a deadlock-free transition system");
    RefinementStats local;
    RefinementStats& st = stats ? *stats : local;
    const auto cap = opts.max_splits ? opts.max_splits : g.num_states();
    SplitterMemo memo;
    Partition r = initial_partition(g);
    if (trace) trace->push_back(r);
    if (opts.strategy == SplitStrategy::Signature) {
        do ++st.iterations;
        while (detail::signature_sweep(g, r, opts, st, memo, trace));
        return r;
    }
    while (true) {
        ++st.iterations;
        auto report = find_splitter(g, r, opts, &st, &memo);
        if (!report) break;
        if (st.splitters_applied >= cap) throw Error("refinement exceeded the cap of " + std::to_string(cap) + " splits");
        r = refine(r, *report);
        ++st.splitters_applied;
        if (trace) trace->push_back(r);
    }
    return r;
}

/// True iff r is label-consistent and admits no splitter.
inline bool is_rsb(const TransitionSystem& g, const Partition& r, const RefinementOptions& opts = {}) {
    return is_label_consistent(g, r) && !find_splitter(g, r, opts).has_value();
}

}  // namespace rsb

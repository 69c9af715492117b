#pragma once

#include <algorithm>
#include <array>
#include <optional>
#include <string>
#include <vector>

#include "rsb/errors.hpp"
#include "rsb/fixpoint.hpp"
#include "rsb/parallel.hpp"
#include "rsb/partition.hpp"
#include "rsb/refinement.hpp"
#include "rsb/transition_system.hpp"

namespace rsb {

using BlockSet = std::vector<BlockId>;  // sorted, duplicate-free

/// One minimal formula P <> T of the quotient alphabet, with T as block ids.
struct QuotientLabel {
    BlockId source = 0;
    Modality modality = Modality::Until;
    BlockSet target;
    friend bool operator==(const QuotientLabel&, const QuotientLabel&) = default;
};

/// Quotient of G by an RSB R. The alphabet (every enforceable superblock
/// step formula) is kept implicitly: per block and modality, the antichain
/// of minimal enforceable exit targets. Weak-until targets that are
/// supersets of an until target are not stored, since the until formula
/// already implies them.
struct QuotientSystem {
    Partition partition;
    std::vector<std::string> block_names;
    std::vector<std::string> prop_names;
    std::vector<PropSet> labeling;  // L_R, per block
    StateSet initial_blocks;
    std::vector<std::array<std::vector<BlockSet>, 2>> min_targets;  // [block][modality]

    std::size_t num_blocks() const { return partition.num_blocks(); }
    const std::vector<BlockSet>& targets(BlockId p, Modality m) const {
        return min_targets.at(p)[m == Modality::Until ? 0 : 1];
    }

    /// Minimal formulas in block order, Until before WeakUntil, targets in
    /// stored (cardinality, lexicographic) order.
    std::vector<QuotientLabel> minimal_labels() const {
        std::vector<QuotientLabel> r;
        for (BlockId p = 0; p < num_blocks(); ++p)
            for (auto m : {Modality::Until, Modality::WeakUntil})
                for (const auto& t : targets(p, m)) r.push_back({p, m, t});
        return r;
    }

    /// Concrete state sets of a formula.
    StutterStepFormula concretize(const QuotientLabel& l) const {
        return {partition.block(l.source), partition.superblock(l.target), l.modality};
    }

    std::string block_set_name(const BlockSet& t) const {
        std::string s = "{";
        for (std::size_t i = 0; i < t.size(); ++i) s += (i ? "," : "") + block_names.at(t[i]);
        return s + "}";
    }
    std::string label_name(const QuotientLabel& l) const {
        return block_names.at(l.source) + " " + to_string(l.modality) + " " + block_set_name(l.target);
    }
};

namespace detail {

inline bool is_subset(const BlockSet& a, const BlockSet& b) { return std::includes(b.begin(), b.end(), a.begin(), a.end()); }

inline std::string block_display_name(const TransitionSystem& g, const StateSet& blk) {
    constexpr std::size_t shown = 3;
    std::string s;
    std::size_t i = 0;
    for (auto x : blk) {
        if (i == shown) {
            s += "+..(" + std::to_string(blk.count()) + ")";
            break;
        }
        s += (i ? "+" : "") + g.state_name(x);
        ++i;
    }
    return s;
}

/// Minimal exit targets T (as block ids) with P subset of ECS(P <> T).
inline std::vector<BlockSet> minimal_targets(const TransitionSystem& g, const Partition& r, BlockId b, Modality m,
                                             std::size_t max_exit_classes) {
    const auto exit_ids = exit_classes(g, r, b);
    if (max_exit_classes && exit_ids.size() > max_exit_classes)
        throw PreconditionError("block " + std::to_string(b) + " has too many exit classes for quotient construction");
    std::vector<StateSet> exits;
    for (auto e : exit_ids) exits.push_back(r.block(e));
    const auto& p = r.block(b);
    std::vector<BlockSet> result;
    for (const auto& mask : common_targets(p, target_antichains(g, p, exits, m))) {
        BlockSet t;
        for (auto i : mask) t.push_back(exit_ids[i]);
        result.push_back(std::move(t));
    }
    return result;
}

}  // namespace detail

/// Builds G/R. Requires R to be label-consistent; whether R is an RSB is
/// checked when `verify` is set (otherwise the caller vouches for it).
inline QuotientSystem build_quotient(const TransitionSystem& g, const Partition& r, bool verify = true,
                                     std::size_t max_exit_classes = 0) {
    if (!is_label_consistent(g, r)) throw PreconditionError("partition is not label-consistent");
    if (verify && !is_rsb(g, r)) throw PreconditionError("partition is not a robust stutter bisimulation");
    QuotientSystem q;
    q.partition = r;
    q.prop_names = g.prop_names();
    const auto k = r.num_blocks();
    q.initial_blocks = StateSet(k);
    for (auto s : g.initial()) q.initial_blocks.insert(r.block_of(s));
    for (BlockId b = 0; b < k; ++b) {
        q.block_names.push_back(detail::block_display_name(g, r.block(b)));
        q.labeling.push_back(g.props_of(r.block(b).first()));
    }
    q.min_targets.resize(k);
    parallel_for(k, [&](std::size_t b) {
        auto bid = static_cast<BlockId>(b);
        auto u = detail::minimal_targets(g, r, bid, Modality::Until, max_exit_classes);
        auto w = detail::minimal_targets(g, r, bid, Modality::WeakUntil, max_exit_classes);
        std::erase_if(w, [&](const BlockSet& t) {
            return std::any_of(u.begin(), u.end(), [&](const BlockSet& ut) { return detail::is_subset(ut, t); });
        });
        q.min_targets[b] = {std::move(u), std::move(w)};
    });
    return q;
}

/// Membership in the full quotient alphabet: is P <> T an enforceable
/// superblock step formula? T may contain any blocks except P itself.
inline bool has_label(const QuotientSystem& q, BlockId p, Modality m, const BlockSet& t) {
    BlockSet sorted = t;
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    if (std::binary_search(sorted.begin(), sorted.end(), p)) return false;
    auto covers = [&](Modality mm) {
        const auto& ts = q.targets(p, mm);
        return std::any_of(ts.begin(), ts.end(), [&](const BlockSet& x) { return detail::is_subset(x, sorted); });
    };
    return covers(m) || (m == Modality::WeakUntil && covers(Modality::Until));
}

/// Quotient successors of P under P <> T: the blocks of T, plus P itself
/// for weak until.
inline BlockSet delta_view(const QuotientLabel& l) {
    BlockSet r = l.target;
    if (l.modality == Modality::WeakUntil) r.push_back(l.source);
    std::sort(r.begin(), r.end());
    return r;
}

/// Explicit transition system over blocks whose alphabet is the set of
/// minimal formulas. labels[i] is the formula of label id i.
struct MaterializedQuotient {
    TransitionSystem ts;
    std::vector<QuotientLabel> labels;
    std::vector<BlockId> deadlocked_blocks;
};

inline MaterializedQuotient quotient_as_ts(const QuotientSystem& q) {
    MaterializedQuotient out;
    TransitionSystemBuilder b;
    for (const auto& p : q.prop_names) b.add_prop(p);
    for (BlockId p = 0; p < q.num_blocks(); ++p) b.add_state_with_props(q.block_names[p], q.labeling[p]);
    for (auto p : q.initial_blocks) b.set_initial(p);
    out.labels = q.minimal_labels();
    for (const auto& l : out.labels) {
        const auto id = b.add_label(q.label_name(l));
        for (auto t : delta_view(l)) b.add_transition(l.source, id, t);
    }
    out.ts = b.build();
    for (BlockId p = 0; p < q.num_blocks(); ++p)
        if (q.targets(p, Modality::Until).empty() && q.targets(p, Modality::WeakUntil).empty())
            out.deadlocked_blocks.push_back(p);
    return out;
}

/// R-hat on the disjoint union G + Q: each quotient state joins the class of
/// its members. Block ids of R are kept.
inline Partition extend_relation(const TransitionSystem& g, const Partition& r, std::size_t num_quotient_states) {
    if (num_quotient_states != r.num_blocks()) throw PreconditionError("quotient size does not match the partition");
    std::vector<BlockId> key(g.num_states() + num_quotient_states);
    for (StateId s = 0; s < g.num_states(); ++s) key[s] = r.block_of(s);
    for (std::size_t b = 0; b < num_quotient_states; ++b) key[g.num_states() + b] = static_cast<BlockId>(b);
    return Partition::with_ids(key);
}

/// G and its quotient system are robustly stutter bisimilar via R-hat:
/// R-hat is an RSB of G + Qts, and initial states match in both directions.
inline bool check_quotient_bisimilar(const TransitionSystem& g, const Partition& r, const TransitionSystem& qts) {
    if (qts.num_states() != r.num_blocks()) return false;
    const auto u = disjoint_union(g, qts);
    if (!is_deadlock_free(u)) return false;
    const auto rhat = extend_relation(g, r, qts.num_states());
    if (!is_rsb(u, rhat)) return false;
    const auto offset = static_cast<StateId>(g.num_states());
    for (auto s : g.initial())
        if (!qts.initial().contains(r.block_of(s))) return false;
    for (auto b : qts.initial()) {
        const bool matched = std::any_of(g.initial().begin(), g.initial().end(),
                                         [&](StateId s) { return rhat.related(s, offset + b); });
        if (!matched) return false;
    }
    return true;
}

inline bool check_quotient_bisimilar(const TransitionSystem& g, const Partition& r) {
    const auto q = build_quotient(g, r);
    return check_quotient_bisimilar(g, r, quotient_as_ts(q).ts);
}

}  // namespace rsb

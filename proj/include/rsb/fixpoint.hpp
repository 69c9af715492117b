#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "rsb/errors.hpp"
#include "rsb/ltl.hpp"
#include "rsb/state_set.hpp"
#include "rsb/transition_system.hpp"

namespace rsb {

/// States where some label forces every successor into X:
/// { s | exists l. {} != Post(s, l) subset of X }.
inline StateSet pre_ctrl(const TransitionSystem& g, const StateSet& x) {
    StateSet r(g.num_states());
    for (StateId s = 0; s < g.num_states(); ++s) {
        auto [b, e] = g.edges_of(s);
        for (EdgeId i = b; i < e; ++i) {
            auto ts = g.edge_targets(i);
            if (std::all_of(ts.begin(), ts.end(), [&](StateId t) { return x.contains(t); })) {
                r.insert(s);
                break;
            }
        }
    }
    return r;
}

/// One application of the step operator of P <> T: T | (P & pre_ctrl(X)).
inline StateSet theta(const TransitionSystem& g, const StutterStepFormula& psi, const StateSet& x) {
    return psi.target | (psi.source & pre_ctrl(g, x));
}

/// Fixpoint of theta together with, for the least fixpoint, the iteration at
/// which each state entered (1 for target states; 0 means "not ranked").
struct RankedFixpoint {
    StateSet set;
    std::vector<std::uint32_t> rank;
    Modality modality = Modality::Until;

    std::uint32_t rank_of(StateId s) const { return rank.empty() ? 0 : rank[s]; }
};

namespace detail {

inline void check_step_formula(const TransitionSystem& g, const StutterStepFormula& psi) {
    if (psi.source.universe() != g.num_states() || psi.target.universe() != g.num_states())
        throw PreconditionError("formula sets do not match the state space");
    if (psi.source.intersects(psi.target)) throw PreconditionError("source and target of a step formula must be disjoint");
}

// Both fixpoints lie in source | target and contain the target, so only
// source states and their edges are inspected.

// lfp of theta by layered worklist. missing[e] counts targets of edge e
// outside the current set; an edge with none missing certifies its source.
inline RankedFixpoint lfp_theta(const TransitionSystem& g, const StutterStepFormula& psi) {
    const auto n = g.num_states();
    RankedFixpoint fp{psi.target, std::vector<std::uint32_t>(n, 0), Modality::Until};
    for (auto t : psi.target) fp.rank[t] = 1;
    std::vector<std::uint32_t> missing(g.num_edges(), 0);
    std::vector<StateId> frontier;
    for (auto s : psi.source) {
        auto [b, e] = g.edges_of(s);
        for (EdgeId i = b; i < e; ++i) {
            for (auto t : g.edge_targets(i))
                if (!psi.target.contains(t)) ++missing[i];
            if (missing[i] == 0 && !fp.set.contains(s)) {
                fp.set.insert(s);
                fp.rank[s] = 2;
                frontier.push_back(s);
            }
        }
    }
    for (std::uint32_t round = 2; !frontier.empty(); ++round) {
        std::vector<StateId> next;
        for (auto t : frontier)
            for (auto e : g.edges_into(t)) {
                const auto s = g.edge_source(e);
                if (!psi.source.contains(s) || fp.set.contains(s)) continue;
                if (--missing[e] == 0) {
                    fp.set.insert(s);
                    fp.rank[s] = round + 1;
                    next.push_back(s);
                }
            }
        frontier = std::move(next);
    }
    return fp;
}

// gfp of theta by removal. A source state survives while at least one of its
// edges has all targets inside.
inline RankedFixpoint gfp_theta(const TransitionSystem& g, const StutterStepFormula& psi) {
    const auto n = g.num_states();
    RankedFixpoint fp{psi.source | psi.target, {}, Modality::WeakUntil};
    std::vector<std::uint32_t> outside(g.num_edges(), 0);
    std::vector<std::uint32_t> good_edges(n, 0);
    std::vector<StateId> removed;
    for (auto s : psi.source) {
        auto [b, e] = g.edges_of(s);
        for (EdgeId i = b; i < e; ++i) {
            for (auto t : g.edge_targets(i))
                if (!fp.set.contains(t)) ++outside[i];
            if (outside[i] == 0) ++good_edges[s];
        }
    }
    for (auto s : psi.source)
        if (good_edges[s] == 0) {
            fp.set.erase(s);
            removed.push_back(s);
        }
    while (!removed.empty()) {
        const auto t = removed.back();
        removed.pop_back();
        for (auto e : g.edges_into(t)) {
            const auto s = g.edge_source(e);
            if (!psi.source.contains(s) || !fp.set.contains(s)) continue;
            if (outside[e]++ == 0 && --good_edges[s] == 0) {
                fp.set.erase(s);
                removed.push_back(s);
            }
        }
    }
    return fp;
}

}  // namespace detail

/// Enforceable states of a stutter step formula: least (Until) or greatest
/// (WeakUntil) fixpoint of theta. Requires a deadlock-free system.
inline RankedFixpoint ecs(const TransitionSystem& g, const StutterStepFormula& psi) {
    detail::check_step_formula(g, psi);
    if (!is_deadlock_free(g)) throw PreconditionError("ecs requires a deadlock-free transition system");
    return psi.modality == Modality::Until ? detail::lfp_theta(g, psi) : detail::gfp_theta(g, psi);
}

/// Memoryless controller: the labels permitted at every state.
struct PositionalController {
    std::vector<std::vector<LabelId>> allowed;

    bool permits(StateId s, LabelId l) const {
        const auto& a = allowed.at(s);
        return std::binary_search(a.begin(), a.end(), l);
    }
    LabelFilter filter() const {
        return [this](StateId s, LabelId l) { return permits(s, l); };
    }
    friend bool operator==(const PositionalController&, const PositionalController&) = default;
};

/// Memoryless controller enforcing psi from every state of fp.set. Inside
/// fp.set minus the target it keeps the labels that stay in fp.set
/// (WeakUntil) or lead strictly down in rank (Until); everywhere else it
/// permits all enabled labels.
inline PositionalController enforcer(const TransitionSystem& g, const StutterStepFormula& psi, const RankedFixpoint& fp) {
    PositionalController c;
    c.allowed.resize(g.num_states());
    for (StateId s = 0; s < g.num_states(); ++s) {
        auto [b, e] = g.edges_of(s);
        const bool constrained = fp.set.contains(s) && !psi.target.contains(s);
        for (EdgeId i = b; i < e; ++i) {
            bool ok = true;
            if (constrained) {
                auto ts = g.edge_targets(i);
                if (psi.modality == Modality::WeakUntil)
                    ok = std::all_of(ts.begin(), ts.end(), [&](StateId t) { return fp.set.contains(t); });
                else
                    ok = std::all_of(ts.begin(), ts.end(),
                                     [&](StateId t) { return fp.rank[t] != 0 && fp.rank[t] < fp.rank[s]; });
            }
            if (ok) c.allowed[s].push_back(g.edge_label(i));
        }
    }
    return c;
}

/// Exhaustive oracle: the union, over every deadlock-free memoryless
/// controller, of the states from which the controlled system satisfies psi.
/// Satisfaction is decided exactly by graph analysis of the controlled
/// system, not by lasso sampling. Limited to tiny systems.
inline StateSet brute_force_ecs(const TransitionSystem& g, const StutterStepFormula& psi, std::size_t cap = 6) {
    detail::check_step_formula(g, psi);
    const auto n = g.num_states();
    if (n > cap) throw PreconditionError("brute_force_ecs: " + std::to_string(n) + " states exceed the cap of " + std::to_string(cap));
    if (g.num_labels() > 3) throw PreconditionError("brute_force_ecs: more than 3 labels");
    if (!is_deadlock_free(g)) throw PreconditionError("brute_force_ecs requires a deadlock-free transition system");

    using Mask = std::uint32_t;
    auto mask_of = [](const StateSet& x) {
        Mask m = 0;
        for (auto s : x) m |= Mask{1} << s;
        return m;
    };
    const Mask src = mask_of(psi.source), tgt = mask_of(psi.target);

    // Successor mask per state and per subset of its enabled edges.
    std::vector<std::vector<Mask>> choices(n);
    for (StateId s = 0; s < n; ++s) {
        auto [b, e] = g.edges_of(s);
        const auto k = e - b;
        for (Mask sub = 1; sub < (Mask{1} << k); ++sub) {
            Mask m = 0;
            for (EdgeId i = 0; i < k; ++i)
                if (sub >> i & 1u)
                    for (auto t : g.edge_targets(b + i)) m |= Mask{1} << t;
            choices[s].push_back(m);
        }
    }

    // A source state violates the formula iff, moving inside the source,
    // it can reach a state with a successor outside source|target (a leak)
    // or, for Until, a cycle through source states.
    auto satisfied = [&](const std::vector<Mask>& succ) {
        std::vector<Mask> reach(n, 0);  // reachable in >= 1 step through source states
        for (StateId s = 0; s < n; ++s)
            if (src >> s & 1u) reach[s] = succ[s] & src;
        for (bool changed = true; changed;) {
            changed = false;
            for (StateId s = 0; s < n; ++s) {
                if (!(src >> s & 1u)) continue;
                Mask r = reach[s];
                for (StateId t = 0; t < n; ++t)
                    if (reach[s] >> t & 1u) r |= reach[t];
                if (r != reach[s]) {
                    reach[s] = r;
                    changed = true;
                }
            }
        }
        Mask bad = 0;
        for (StateId s = 0; s < n; ++s) {
            if (!(src >> s & 1u)) continue;
            const bool leak = (succ[s] & ~(src | tgt)) != 0;
            const bool cyc = psi.modality == Modality::Until && (reach[s] >> s & 1u);
            if (leak || cyc) bad |= Mask{1} << s;
        }
        Mask good = tgt;
        for (StateId s = 0; s < n; ++s) {
            if (!(src >> s & 1u)) continue;
            if (bad >> s & 1u || reach[s] & bad) continue;
            good |= Mask{1} << s;
        }
        return good;
    };

    Mask result = tgt;
    std::vector<std::size_t> pick(n, 0);
    std::vector<Mask> succ(n);
    while (true) {
        for (StateId s = 0; s < n; ++s) succ[s] = choices[s][pick[s]];
        result |= satisfied(succ);
        std::size_t i = 0;
        for (; i < n; ++i) {
            if (++pick[i] < choices[i].size()) break;
            pick[i] = 0;
        }
        if (i == n) break;
    }
    StateSet r(n);
    for (StateId s = 0; s < n; ++s)
        if (result >> s & 1u) r.insert(s);
    return r;
}

}  // namespace rsb

#pragma once

#include <algorithm>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "rsb/errors.hpp"
#include "rsb/ltl.hpp"
#include "rsb/state_set.hpp"
#include "rsb/transition_system.hpp"

// Fix a block P with exit classes E_0..E_{k-1}. A target T of P is a union of
// exit classes, written as a set of indices (a mask over 0..k-1). For each s
// in P the masks M with s in ECS(P <> union(M)) form an upward-closed family.
// All families are obtained at once by solving theta over antichains of
// masks instead of over states.

namespace rsb {

/// A set of exit-class indices.
using ExitMask = StateSet;

/// Minimal masks of an upward-closed family, in canonical order: ascending
/// cardinality, then lexicographic by the sorted list of members. Empty means
/// the family is empty (never enforceable); {{}} means always enforceable.
using TargetAntichain = std::vector<ExitMask>;

namespace detail {

inline bool mask_less(const ExitMask& a, const ExitMask& b) {
    const auto ca = a.count(), cb = b.count();
    if (ca != cb) return ca < cb;
    const auto da = a - b;
    const auto db = b - a;
    if (da.empty()) return false;
    return da.first() < db.first();
}

inline TargetAntichain minimize(std::vector<ExitMask> v) {
    std::sort(v.begin(), v.end(), mask_less);
    v.erase(std::unique(v.begin(), v.end()), v.end());
    TargetAntichain out;
    for (auto& m : v)
        if (std::none_of(out.begin(), out.end(), [&](const ExitMask& k) { return k.is_subset_of(m); }))
            out.push_back(std::move(m));
    return out;
}

inline std::size_t hash_of(const TargetAntichain& a) {
    std::size_t h = a.size();
    for (const auto& m : a) h = h * 0x100000001b3ull ^ m.hash();
    return h;
}

// Interned antichains with memoized conjunction and disjunction. Id 0 is the
// empty family, id 1 the full one.
class AntichainTable {
public:
    using Id = std::uint32_t;

    explicit AntichainTable(std::size_t k) {
        intern({});
        intern({ExitMask(k)});
    }

    Id intern(TargetAntichain a) {
        auto& bucket = index_[hash_of(a)];
        for (auto id : bucket)
            if (items_[id] == a) return id;
        items_.push_back(std::move(a));
        bucket.push_back(static_cast<Id>(items_.size() - 1));
        return bucket.back();
    }
    Id singleton(const ExitMask& m) { return intern({m}); }
    const TargetAntichain& get(Id id) const { return items_[id]; }

    Id conj(Id a, Id b) {
        if (a == 0 || b == 0) return 0;
        if (a == 1 || a == b) return b;
        if (b == 1) return a;
        if (a > b) std::swap(a, b);
        const auto key = (std::uint64_t{a} << 32) | b;
        if (auto it = conj_cache_.find(key); it != conj_cache_.end()) return it->second;
        std::vector<ExitMask> v;
        v.reserve(items_[a].size() * items_[b].size());
        for (const auto& x : items_[a])
            for (const auto& y : items_[b]) v.push_back(x | y);
        const auto r = intern(minimize(std::move(v)));
        conj_cache_.emplace(key, r);
        return r;
    }
    Id disj(Id a, Id b) {
        if (a == 0 || a == b) return b;
        if (b == 0) return a;
        if (a == 1 || b == 1) return 1;
        if (a > b) std::swap(a, b);
        const auto key = (std::uint64_t{a} << 32) | b;
        if (auto it = disj_cache_.find(key); it != disj_cache_.end()) return it->second;
        std::vector<ExitMask> v(items_[a].begin(), items_[a].end());
        v.insert(v.end(), items_[b].begin(), items_[b].end());
        const auto r = intern(minimize(std::move(v)));
        disj_cache_.emplace(key, r);
        return r;
    }

private:
    std::vector<TargetAntichain> items_;
    std::unordered_map<std::size_t, std::vector<Id>> index_;
    std::unordered_map<std::uint64_t, Id> conj_cache_, disj_cache_;
};

}  // namespace detail

/// True iff the family contains `mask`.
inline bool covers(const TargetAntichain& a, const ExitMask& mask) {
    return std::any_of(a.begin(), a.end(), [&](const ExitMask& k) { return k.is_subset_of(mask); });
}

/// For every s in P (other entries stay empty), the minimal exit-class masks
/// M such that s is in ECS(P <> union of exits[i] for i in M). The exits
/// must be disjoint from P; successors outside P and all exits are never
/// part of any target.
inline std::vector<TargetAntichain> target_antichains(const TransitionSystem& g, const StateSet& p,
                                                      const std::vector<StateSet>& exits, Modality m) {
    using Id = detail::AntichainTable::Id;
    const auto n = g.num_states();
    const auto k = exits.size();
    std::vector<int> cls(n, -1);
    for (std::size_t i = 0; i < k; ++i)
        for (auto t : exits[i]) {
            if (p.contains(t)) throw PreconditionError("exit classes must be disjoint from the source");
            cls[t] = static_cast<int>(i);
        }

    detail::AntichainTable table(k);
    struct Edge {
        Id fixed;
        std::vector<StateId> inner;
    };
    std::vector<std::vector<Edge>> edges(n);
    std::vector<std::vector<StateId>> preds(n);
    for (auto s : p) {
        auto [b, e] = g.edges_of(s);
        for (EdgeId i = b; i < e; ++i) {
            ExitMask fixed(k);
            std::vector<StateId> inner;
            bool dead = false;
            for (auto t : g.edge_targets(i)) {
                if (p.contains(t))
                    inner.push_back(t);
                else if (cls[t] >= 0)
                    fixed.insert(static_cast<StateId>(cls[t]));
                else
                    dead = true;
            }
            if (dead) continue;
            for (auto t : inner) preds[t].push_back(s);
            edges[s].push_back({table.singleton(fixed), std::move(inner)});
        }
    }
    for (auto& v : preds) {
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
    }

    std::vector<Id> val(n, m == Modality::WeakUntil ? 1 : 0);
    std::vector<Id> ids;
    auto eval = [&](StateId s) {
        Id acc = 0;
        for (const auto& ed : edges[s]) {
            ids.clear();
            for (auto t : ed.inner) ids.push_back(val[t]);
            std::sort(ids.begin(), ids.end());
            ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
            Id cur = ed.fixed;
            for (auto id : ids) {
                cur = table.conj(cur, id);
                if (cur == 0) break;
            }
            acc = table.disj(acc, cur);
            if (acc == 1) break;
        }
        return acc;
    };

    // Chaotic iteration from bottom (Until) or top (WeakUntil); the operator
    // is monotone, so this reaches the least or greatest fixpoint.
    std::vector<StateId> queue = p.to_vector();
    std::vector<char> queued(n, 0);
    for (auto s : queue) queued[s] = 1;
    for (std::size_t head = 0; head < queue.size(); ++head) {
        const auto s = queue[head];
        queued[s] = 0;
        const auto v = eval(s);
        if (v == val[s]) continue;
        val[s] = v;
        for (auto q : preds[s])
            if (!queued[q]) {
                queued[q] = 1;
                queue.push_back(q);
            }
    }
    std::vector<TargetAntichain> out(n);
    for (auto s : p) out[s] = table.get(val[s]);
    return out;
}

/// Minimal exit-class masks M such that P <> union(M) is enforceable from
/// every state of P.
inline TargetAntichain common_targets(const StateSet& p, const std::vector<TargetAntichain>& per_state) {
    TargetAntichain acc;
    bool first = true;
    for (auto s : p) {
        if (per_state[s].empty()) return {};
        if (first) {
            acc = per_state[s];
            first = false;
            continue;
        }
        if (per_state[s] == acc) continue;
        std::vector<ExitMask> v;
        for (const auto& x : acc)
            for (const auto& y : per_state[s]) v.push_back(x | y);
        acc = detail::minimize(std::move(v));
    }
    return acc;
}

}  // namespace rsb

#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>

#include "rsb/errors.hpp"
#include "rsb/state_set.hpp"

namespace rsb {

using EdgeId = std::uint32_t;
using PropSet = std::vector<PropId>;  // sorted, duplicate-free

class TransitionSystemBuilder;

/// Explicit finite transition system <S, Sigma, delta, S_init, AP, L>.
///
/// States, labels and propositions are dense indices with interned names.
/// Transitions are grouped into edges: one edge per (source, label) pair
/// carrying the sorted successor list Post(s, label). Edges of a state are
/// ordered by label id, successors by state id. A reverse index maps each
/// state to the edges that can reach it. Immutable once built.
class TransitionSystem {
public:
    TransitionSystem() = default;

    std::size_t num_states() const { return state_names_.size(); }
    std::size_t num_labels() const { return label_names_.size(); }
    std::size_t num_props() const { return prop_names_.size(); }
    std::size_t num_edges() const { return edge_label_.size(); }
    std::size_t num_transitions() const { return targets_.size(); }

    const std::string& state_name(StateId s) const { return state_names_.at(s); }
    const std::string& label_name(LabelId l) const { return label_names_.at(l); }
    const std::string& prop_name(PropId p) const { return prop_names_.at(p); }
    const std::vector<std::string>& state_names() const { return state_names_; }
    const std::vector<std::string>& label_names() const { return label_names_; }
    const std::vector<std::string>& prop_names() const { return prop_names_; }

    std::optional<StateId> find_state(std::string_view name) const { return lookup(state_index_, name); }
    std::optional<LabelId> find_label(std::string_view name) const { return lookup(label_index_, name); }
    std::optional<PropId> find_prop(std::string_view name) const { return lookup(prop_index_, name); }

    const PropSet& props_of(StateId s) const { return labeling_.at(s); }
    bool has_prop(StateId s, PropId p) const {
        const auto& ps = labeling_.at(s);
        return std::binary_search(ps.begin(), ps.end(), p);
    }
    /// States whose labeling contains p.
    StateSet states_with(PropId p) const {
        StateSet r(num_states());
        for (StateId s = 0; s < num_states(); ++s)
            if (has_prop(s, p)) r.insert(s);
        return r;
    }

    const StateSet& initial() const { return initial_; }
    StateSet all_states() const { return StateSet::full(num_states()); }

    // --- forward structure -------------------------------------------------

    std::pair<EdgeId, EdgeId> edges_of(StateId s) const { return {edge_begin_.at(s), edge_begin_.at(s + 1)}; }
    StateId edge_source(EdgeId e) const { return edge_source_[e]; }
    LabelId edge_label(EdgeId e) const { return edge_label_[e]; }
    std::span<const StateId> edge_targets(EdgeId e) const {
        return {targets_.data() + target_begin_[e], target_begin_[e + 1] - target_begin_[e]};
    }

    /// Post(s, label); empty when the label is not enabled at s.
    std::span<const StateId> post(StateId s, LabelId label) const {
        auto [b, e] = edges_of(s);
        auto it = std::lower_bound(edge_label_.begin() + b, edge_label_.begin() + e, label);
        if (it == edge_label_.begin() + e || *it != label) return {};
        return edge_targets(static_cast<EdgeId>(it - edge_label_.begin()));
    }
    /// Post(s) over all labels.
    StateSet post(StateId s) const {
        StateSet r(num_states());
        auto [b, e] = edges_of(s);
        for (EdgeId i = b; i < e; ++i)
            for (auto t : edge_targets(i)) r.insert(t);
        return r;
    }
    /// Labels enabled at s, ascending.
    std::vector<LabelId> enabled(StateId s) const {
        auto [b, e] = edges_of(s);
        return {edge_label_.begin() + b, edge_label_.begin() + e};
    }
    bool has_transition(StateId s, LabelId l, StateId t) const {
        auto ts = post(s, l);
        return std::binary_search(ts.begin(), ts.end(), t);
    }
    bool connected(StateId s, StateId t) const {
        auto [b, e] = edges_of(s);
        for (EdgeId i = b; i < e; ++i) {
            auto ts = edge_targets(i);
            if (std::binary_search(ts.begin(), ts.end(), t)) return true;
        }
        return false;
    }

    // --- backward structure ------------------------------------------------

    /// Edges having t among their targets (one entry per edge).
    std::span<const EdgeId> edges_into(StateId t) const {
        return {pred_edges_.data() + pred_begin_[t], pred_begin_[t + 1] - pred_begin_[t]};
    }

    /// All transitions as (source, label, target), ascending.
    std::vector<std::tuple<StateId, LabelId, StateId>> transitions() const {
        std::vector<std::tuple<StateId, LabelId, StateId>> r;
        r.reserve(num_transitions());
        for (EdgeId e = 0; e < num_edges(); ++e)
            for (auto t : edge_targets(e)) r.emplace_back(edge_source_[e], edge_label_[e], t);
        return r;
    }

private:
    friend class TransitionSystemBuilder;

    using Index = std::unordered_map<std::string, std::uint32_t>;
    static std::optional<std::uint32_t> lookup(const Index& idx, std::string_view name) {
        auto it = idx.find(std::string(name));
        if (it == idx.end()) return std::nullopt;
        return it->second;
    }

    std::vector<std::string> state_names_, label_names_, prop_names_;
    Index state_index_, label_index_, prop_index_;
    std::vector<PropSet> labeling_;
    StateSet initial_;

    std::vector<EdgeId> edge_begin_{0};  // per state, size n+1
    std::vector<StateId> edge_source_;
    std::vector<LabelId> edge_label_;
    std::vector<std::uint32_t> target_begin_{0};  // per edge, size m+1
    std::vector<StateId> targets_;
    std::vector<std::uint32_t> pred_begin_{0};  // per state, size n+1
    std::vector<EdgeId> pred_edges_;
};

/// Incremental construction of a TransitionSystem. Names are interned;
/// adding an existing state name is an error, adding an existing label or
/// proposition name returns the existing index.
class TransitionSystemBuilder {
public:
    StateId add_state(std::string name, const std::vector<std::string>& props = {}) {
        auto id = static_cast<StateId>(states_.size());
        if (!state_index_.emplace(name, id).second) throw PreconditionError("duplicate state id '" + name + "'");
        PropSet ps;
        for (const auto& p : props) ps.push_back(add_prop(p));
        std::sort(ps.begin(), ps.end());
        ps.erase(std::unique(ps.begin(), ps.end()), ps.end());
        states_.push_back(std::move(name));
        labeling_.push_back(std::move(ps));
        return id;
    }
    StateId add_state_with_props(std::string name, PropSet props) {
        auto id = static_cast<StateId>(states_.size());
        if (!state_index_.emplace(name, id).second) throw PreconditionError("duplicate state id '" + name + "'");
        for (auto p : props)
            if (p >= props_.size()) throw PreconditionError("proposition index out of range");
        std::sort(props.begin(), props.end());
        props.erase(std::unique(props.begin(), props.end()), props.end());
        states_.push_back(std::move(name));
        labeling_.push_back(std::move(props));
        return id;
    }
    LabelId add_label(const std::string& name) { return intern(labels_, label_index_, name); }
    PropId add_prop(const std::string& name) { return intern(props_, prop_index_, name); }

    void add_transition(StateId s, LabelId l, StateId t) {
        if (s >= states_.size() || t >= states_.size() || l >= labels_.size())
            throw PreconditionError("transition references an unknown state or label");
        delta_.emplace_back(s, l, t);
    }
    void add_transition(const std::string& s, const std::string& l, const std::string& t) {
        add_transition(state(s), add_label(l), state(t));
    }
    void set_initial(StateId s) {
        if (s >= states_.size()) throw PreconditionError("initial state out of range");
        initial_.push_back(s);
    }

    StateId state(const std::string& name) const {
        auto it = state_index_.find(name);
        if (it == state_index_.end()) throw PreconditionError("unknown state '" + name + "'");
        return it->second;
    }
    bool has_state(const std::string& name) const { return state_index_.count(name) != 0; }
    std::size_t num_states() const { return states_.size(); }

    TransitionSystem build() const {
        TransitionSystem g;
        const auto n = states_.size();
        g.state_names_ = states_;
        g.label_names_ = labels_;
        g.prop_names_ = props_;
        g.state_index_ = state_index_;
        g.label_index_ = label_index_;
        g.prop_index_ = prop_index_;
        g.labeling_ = labeling_;
        g.initial_ = StateSet(n);
        for (auto s : initial_) g.initial_.insert(s);

        auto delta = delta_;
        std::sort(delta.begin(), delta.end());
        delta.erase(std::unique(delta.begin(), delta.end()), delta.end());

        g.edge_begin_.assign(n + 1, 0);
        std::vector<std::uint32_t> pred_count(n, 0);
        for (std::size_t i = 0; i < delta.size();) {
            const auto s = std::get<0>(delta[i]);
            const auto l = std::get<1>(delta[i]);
            g.edge_source_.push_back(s);
            g.edge_label_.push_back(l);
            g.edge_begin_[s + 1]++;
            for (; i < delta.size() && std::get<0>(delta[i]) == s && std::get<1>(delta[i]) == l; ++i) {
                g.targets_.push_back(std::get<2>(delta[i]));
                pred_count[std::get<2>(delta[i])]++;
            }
            g.target_begin_.push_back(static_cast<std::uint32_t>(g.targets_.size()));
        }
        for (std::size_t s = 0; s < n; ++s) g.edge_begin_[s + 1] += g.edge_begin_[s];

        g.pred_begin_.assign(n + 1, 0);
        for (std::size_t s = 0; s < n; ++s) g.pred_begin_[s + 1] = g.pred_begin_[s] + pred_count[s];
        g.pred_edges_.resize(g.pred_begin_[n]);
        std::vector<std::uint32_t> fill(g.pred_begin_.begin(), g.pred_begin_.end() - 1);
        for (EdgeId e = 0; e < g.num_edges(); ++e)
            for (auto t : g.edge_targets(e)) g.pred_edges_[fill[t]++] = e;
        return g;
    }

private:
    static std::uint32_t intern(std::vector<std::string>& names, std::unordered_map<std::string, std::uint32_t>& idx,
                                const std::string& name) {
        auto [it, fresh] = idx.emplace(name, static_cast<std::uint32_t>(names.size()));
        if (fresh) names.push_back(name);
        return it->second;
    }

    std::vector<std::string> states_, labels_, props_;
    std::unordered_map<std::string, std::uint32_t> state_index_, label_index_, prop_index_;
    std::vector<PropSet> labeling_;
    std::vector<std::tuple<StateId, LabelId, StateId>> delta_;
    std::vector<StateId> initial_;
};

/// True iff every state has at least one outgoing transition.
inline bool is_deadlock_free(const TransitionSystem& g) {
    for (StateId s = 0; s < g.num_states(); ++s) {
        auto [b, e] = g.edges_of(s);
        if (b == e) return false;
    }
    return true;
}

inline std::vector<StateId> deadlock_states(const TransitionSystem& g) {
    std::vector<StateId> r;
    for (StateId s = 0; s < g.num_states(); ++s) {
        auto [b, e] = g.edges_of(s);
        if (b == e) r.push_back(s);
    }
    return r;
}

/// Disjoint union G1 + G2. States of G2 are re-indexed with offset |S1|;
/// labels and propositions are merged by name. A G2 state whose name is
/// already taken gets a "#2" (or "#3", ...) suffix.
inline TransitionSystem disjoint_union(const TransitionSystem& g1, const TransitionSystem& g2) {
    TransitionSystemBuilder b;
    for (const auto& p : g1.prop_names()) b.add_prop(p);
    for (const auto& p : g2.prop_names()) b.add_prop(p);
    for (const auto& l : g1.label_names()) b.add_label(l);
    for (const auto& l : g2.label_names()) b.add_label(l);

    auto copy_props = [&](const TransitionSystem& g, StateId s) {
        std::vector<std::string> ps;
        for (auto p : g.props_of(s)) ps.push_back(g.prop_name(p));
        return ps;
    };
    for (StateId s = 0; s < g1.num_states(); ++s) b.add_state(g1.state_name(s), copy_props(g1, s));
    for (StateId s = 0; s < g2.num_states(); ++s) {
        std::string name = g2.state_name(s);
        for (int k = 2; b.has_state(name); ++k) name = g2.state_name(s) + "#" + std::to_string(k);
        b.add_state(name, copy_props(g2, s));
    }
    const auto offset = static_cast<StateId>(g1.num_states());
    for (auto [s, l, t] : g1.transitions()) b.add_transition(s, b.add_label(g1.label_name(l)), t);
    for (auto [s, l, t] : g2.transitions()) b.add_transition(s + offset, b.add_label(g2.label_name(l)), t + offset);
    for (auto s : g1.initial()) b.set_initial(s);
    for (auto s : g2.initial()) b.set_initial(s + offset);
    return b.build();
}

/// Infinite path stem . cycle^omega, as a finite object.
struct Lasso {
    std::vector<StateId> stem;
    std::vector<StateId> cycle;

    std::size_t length() const { return stem.size() + cycle.size(); }
    StateId at(std::size_t i) const {
        if (i < stem.size()) return stem[i];
        return cycle[(i - stem.size()) % cycle.size()];
    }
    /// Position following i on the lasso (positions 0..length()-1).
    std::size_t successor(std::size_t i) const { return i + 1 < length() ? i + 1 : stem.size(); }
    StateId front() const { return stem.empty() ? cycle.front() : stem.front(); }

    /// Same infinite path with the cycle repeated k times.
    Lasso unrolled(std::size_t k) const {
        Lasso r{stem, {}};
        for (std::size_t i = 0; i < k; ++i) r.cycle.insert(r.cycle.end(), cycle.begin(), cycle.end());
        return r;
    }
};

/// Checks the Lasso invariants against g: nonempty cycle and every
/// consecutive pair, including the wrap-around, connected by some label.
inline bool is_valid_lasso(const TransitionSystem& g, const Lasso& pi) {
    if (pi.cycle.empty()) return false;
    for (std::size_t i = 0; i < pi.length(); ++i) {
        if (pi.at(i) >= g.num_states()) return false;
        if (!g.connected(pi.at(i), pi.at(pi.successor(i)))) return false;
    }
    return true;
}

}  // namespace rsb

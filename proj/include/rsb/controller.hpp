#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "rsb/errors.hpp"
#include "rsb/fixpoint.hpp"
#include "rsb/model_io.hpp"
#include "rsb/ltl.hpp"
#include "rsb/quotient.hpp"
#include "rsb/transition_system.hpp"

namespace rsb {

using MemoryId = std::uint32_t;

/// Finite-memory controller over a transition system. output[m][s] are the
/// permitted labels (ascending; empty means undefined) and next[m][s] the
/// memory after leaving s in memory m. The update depends on the memory and
/// the state left, not on the label taken or the state entered.
struct FiniteMemoryController {
    std::size_t num_memory = 1;
    MemoryId initial_memory = 0;
    std::vector<std::vector<std::vector<LabelId>>> output;
    std::vector<std::vector<MemoryId>> next;

    static FiniteMemoryController memoryless(std::vector<std::vector<LabelId>> allowed) {
        FiniteMemoryController c;
        c.next.assign(1, std::vector<MemoryId>(allowed.size(), 0));
        c.output.push_back(std::move(allowed));
        return c;
    }

    const std::vector<LabelId>& labels(MemoryId m, StateId s) const { return output.at(m).at(s); }
    bool permits(MemoryId m, StateId s, LabelId l) const {
        const auto& a = labels(m, s);
        return std::binary_search(a.begin(), a.end(), l);
    }
    MemoryId update(MemoryId m, StateId s, LabelId /*label*/, StateId /*next_state*/) const { return next.at(m).at(s); }
};

// --- generalized Buchi synthesis ----------------------------------------------

namespace detail {

inline bool holds_propositionally(const TransitionSystem& g, const Formula& f, StateId s) {
    using K = Formula::Kind;
    switch (f.kind()) {
        case K::True: return true;
        case K::Atom: {
            auto p = g.find_prop(f.atom_name());
            return p && g.has_prop(s, *p);
        }
        case K::States: return f.state_set().contains(s);
        case K::Not: return !holds_propositionally(g, f.operand(), s);
        case K::And: return holds_propositionally(g, f.lhs(), s) && holds_propositionally(g, f.rhs(), s);
        case K::Or: return holds_propositionally(g, f.lhs(), s) || holds_propositionally(g, f.rhs(), s);
        default: throw PreconditionError("temporal operator inside a goal: " + f.to_string());
    }
}

inline void collect_conjuncts(const Formula& f, std::vector<Formula>& out) {
    if (f.kind() == Formula::Kind::And) {
        collect_conjuncts(f.lhs(), out);
        collect_conjuncts(f.rhs(), out);
    } else {
        out.push_back(f);
    }
}

}  // namespace detail

/// States of g satisfying a propositional formula.
inline StateSet states_satisfying(const TransitionSystem& g, const Formula& f) {
    StateSet r(g.num_states());
    for (StateId s = 0; s < g.num_states(); ++s)
        if (detail::holds_propositionally(g, f, s)) r.insert(s);
    return r;
}

/// Splits "G F g1 & ... & G F gn" into its propositional goals. Atoms must
/// be propositions of g.
inline std::vector<Formula> gf_goals(const TransitionSystem& g, const Formula& spec) {
    std::vector<Formula> conj, goals;
    detail::collect_conjuncts(spec, conj);
    for (const auto& c : conj) {
        if (c.kind() != Formula::Kind::Globally || c.operand().kind() != Formula::Kind::Finally)
            throw ParseError("spec must be a conjunction of 'G F <goal>' terms, got " + c.to_string());
        const auto& goal = c.operand().operand();
        std::vector<const Formula*> stack{&goal};
        while (!stack.empty()) {
            const auto* f = stack.back();
            stack.pop_back();
            if (f->kind() == Formula::Kind::Atom && !g.find_prop(f->atom_name()))
                throw PreconditionError("atom '" + f->atom_name() + "' is not a proposition of the system");
            if (f->kind() == Formula::Kind::Not || f->kind() == Formula::Kind::Finally ||
                f->kind() == Formula::Kind::Globally)
                stack.push_back(&f->operand());
            else if (f->kind() != Formula::Kind::True && f->kind() != Formula::Kind::Atom &&
                     f->kind() != Formula::Kind::States) {
                stack.push_back(&f->lhs());
                stack.push_back(&f->rhs());
            }
        }
        goals.push_back(goal);
    }
    return goals;
}

/// Goal state sets of a "G F g1 & ... & G F gn" spec.
inline std::vector<StateSet> gf_goal_sets(const TransitionSystem& g, const Formula& spec) {
    std::vector<StateSet> r;
    for (const auto& f : gf_goals(g, spec)) r.push_back(states_satisfying(g, f));
    return r;
}

/// Solution of the game "visit every goal infinitely often" on g, where the
/// controller picks labels and the environment picks successors.
struct GfSolution {
    StateSet winning;                                 // Z
    std::vector<StateSet> attractor;                  // Y_i, per goal
    std::vector<std::vector<std::uint32_t>> rank;     // per goal; 0 = outside Y_i
    std::optional<FiniteMemoryController> controller; // set iff every initial state wins
};

inline GfSolution solve_gf(const TransitionSystem& g, const std::vector<StateSet>& goals) {
    if (goals.empty()) throw PreconditionError("at least one goal is required");
    const auto n = g.num_states();
    const auto k = goals.size();
    GfSolution sol;
    StateSet z = StateSet::full(n);
    while (true) {
        StateSet znew = StateSet::full(n);
        sol.attractor.assign(k, StateSet(n));
        sol.rank.assign(k, std::vector<std::uint32_t>(n, 0));
        const StateSet base_pre = pre_ctrl(g, z);
        for (std::size_t i = 0; i < k; ++i) {
            StateSet y = goals[i] & base_pre;
            for (auto s : y) sol.rank[i][s] = 1;
            for (std::uint32_t r = 2;; ++r) {
                const StateSet grown = y | pre_ctrl(g, y);
                if (grown == y) break;
                for (auto s : grown - y) sol.rank[i][s] = r;
                y = grown;
            }
            sol.attractor[i] = y;
            znew &= y;
        }
        if (znew == z) break;
        z = std::move(znew);
    }
    sol.winning = z;
    if (!g.initial().is_subset_of(z)) return sol;

    FiniteMemoryController c;
    c.num_memory = k;
    c.output.assign(k, std::vector<std::vector<LabelId>>(n));
    c.next.assign(k, std::vector<MemoryId>(n, 0));
    for (MemoryId i = 0; i < k; ++i)
        for (StateId s = 0; s < n; ++s) {
            const auto r = sol.rank[i][s];
            c.next[i][s] = i;
            if (r == 0) continue;
            auto [b, e] = g.edges_of(s);
            for (EdgeId ed = b; ed < e; ++ed) {
                auto ts = g.edge_targets(ed);
                const bool ok = r == 1 ? std::all_of(ts.begin(), ts.end(), [&](StateId t) { return z.contains(t); })
                                       : std::all_of(ts.begin(), ts.end(), [&](StateId t) {
                                             return sol.rank[i][t] != 0 && sol.rank[i][t] < r;
                                         });
                if (ok) c.output[i][s].push_back(g.edge_label(ed));
            }
            if (r == 1) c.next[i][s] = static_cast<MemoryId>((i + 1) % k);
        }
    sol.controller = std::move(c);
    return sol;
}

/// Controller visiting every goal infinitely often from all initial states,
/// or none when no such controller exists.
inline std::optional<FiniteMemoryController> synth_gf(const TransitionSystem& g, const std::vector<StateSet>& goals) {
    return solve_gf(g, goals).controller;
}

// --- abstract side: reached superblock and enforced formula -----------------

struct AbstractConfig {
    StateId state = 0;  // quotient state, i.e. block id
    MemoryId memory = 0;
    friend bool operator==(const AbstractConfig&, const AbstractConfig&) = default;
    friend auto operator<=>(const AbstractConfig&, const AbstractConfig&) = default;
};

namespace detail {

/// Configurations reachable from `from` by permitted steps that stay at the
/// same quotient state, in BFS order (including `from`).
inline std::vector<AbstractConfig> staying_configs(const TransitionSystem& qts, const FiniteMemoryController& c,
                                                   AbstractConfig from) {
    std::vector<AbstractConfig> order{from};
    std::set<AbstractConfig> seen{from};
    for (std::size_t i = 0; i < order.size(); ++i) {
        const auto cur = order[i];
        for (auto l : c.labels(cur.memory, cur.state))
            for (auto t : qts.post(cur.state, l)) {
                if (t != cur.state) continue;
                AbstractConfig nxt{t, c.update(cur.memory, cur.state, l, t)};
                if (seen.insert(nxt).second) order.push_back(nxt);
            }
    }
    return order;
}

}  // namespace detail

/// Union of the quotient states the controller can enter directly after
/// leaving the current one, possibly after staying for a while.
inline BlockSet reached_superblock(const TransitionSystem& qts, const FiniteMemoryController& c, AbstractConfig config) {
    std::set<BlockId> r;
    for (const auto& cur : detail::staying_configs(qts, c, config))
        for (auto l : c.labels(cur.memory, cur.state))
            for (auto t : qts.post(cur.state, l))
                if (t != cur.state) r.insert(t);
    return {r.begin(), r.end()};
}

/// True iff the controller permits staying at the current quotient state
/// forever, i.e. the staying configurations contain a cycle.
inline bool can_stay_forever(const TransitionSystem& qts, const FiniteMemoryController& c, AbstractConfig config) {
    const auto configs = detail::staying_configs(qts, c, config);
    std::map<AbstractConfig, std::size_t> index;
    for (std::size_t i = 0; i < configs.size(); ++i) index[configs[i]] = i;
    std::vector<std::vector<std::size_t>> succ(configs.size());
    for (std::size_t i = 0; i < configs.size(); ++i) {
        const auto cur = configs[i];
        for (auto l : c.labels(cur.memory, cur.state))
            if (qts.has_transition(cur.state, l, cur.state))
                succ[i].push_back(index.at({cur.state, c.update(cur.memory, cur.state, l, cur.state)}));
    }
    // Kahn: a cycle exists iff not every node can be peeled off.
    std::vector<std::size_t> indeg(configs.size(), 0);
    for (const auto& s : succ)
        for (auto j : s) ++indeg[j];
    std::vector<std::size_t> ready;
    for (std::size_t i = 0; i < configs.size(); ++i)
        if (!indeg[i]) ready.push_back(i);
    std::size_t peeled = 0;
    while (!ready.empty()) {
        const auto i = ready.back();
        ready.pop_back();
        ++peeled;
        for (auto j : succ[i])
            if (--indeg[j] == 0) ready.push_back(j);
    }
    return peeled != configs.size();
}

/// The superblock step formula the controller enforces at `config`, with
/// source and target given as quotient states.
inline QuotientLabel enforced_formula(const TransitionSystem& qts, const FiniteMemoryController& c, AbstractConfig config) {
    return {static_cast<BlockId>(config.state),
            can_stay_forever(qts, c, config) ? Modality::WeakUntil : Modality::Until,
            reached_superblock(qts, c, config)};
}

// --- concrete controller -----------------------------------------------------

/// Runtime of the concrete controller derived from an abstract controller on
/// the quotient. It tracks the abstract configuration that the observed
/// concrete run is mapped to, and controls the concrete system with a
/// memoryless enforcer of the formula the abstract controller enforces there.
class Executor {
public:
    struct Options {
        bool validate = true;
        bool record_trace = true;
    };

    Executor(const TransitionSystem& g, const QuotientSystem& q, const MaterializedQuotient& qm,
             const FiniteMemoryController& c, StateId s0, Options opts)
        : g_(&g), q_(&q), qm_(&qm), c_(&c), opts_(opts), cache_(std::make_shared<Cache>()) {
        if (s0 >= g.num_states()) throw ExecutorError("start state out of range");
        const auto b = q.partition.block_of(s0);
        start(s0, {b, c.initial_memory});
    }
    Executor(const TransitionSystem& g, const QuotientSystem& q, const MaterializedQuotient& qm,
             const FiniteMemoryController& c, StateId s0)
        : Executor(g, q, qm, c, s0, Options{}) {}

    /// Labels permitted at the current concrete state.
    const std::vector<LabelId>& decision() const { return decision_; }
    bool defined() const { return defined_; }
    StateId current_state() const { return state_; }
    AbstractConfig config() const { return config_; }
    const QuotientLabel& formula() const { return formula_; }
    StutterStepFormula concrete_formula() const { return q_->concretize(formula_); }
    /// Abstract run (as configurations) that the observed concrete run is
    /// mapped to. Only extended, never rewritten.
    const std::vector<AbstractConfig>& abstract_trace() const { return trace_; }

    /// Feeds the next observed concrete state and returns the new decision.
    const std::vector<LabelId>& step(StateId observed) {
        if (observed >= g_->num_states()) throw ExecutorError("observed state out of range");
        if (opts_.validate) {
            const bool ok = std::any_of(decision_.begin(), decision_.end(),
                                        [&](LabelId l) { return g_->has_transition(state_, l, observed); });
            if (!ok)
                throw ExecutorError("observed " + g_->state_name(observed) + " is not a successor of " +
                                    g_->state_name(state_) + " under the permitted labels");
        }
        state_ = observed;
        if (!defined_) {
            decision_ = g_->enabled(observed);
            return decision_;
        }
        const auto block = q_->partition.block_of(observed);
        if (block != config_.state) {
            auto path = f_search(block);
            if (!path) {
                defined_ = false;
                decision_ = g_->enabled(observed);
                return decision_;
            }
            if (opts_.record_trace) trace_.insert(trace_.end(), path->begin() + 1, path->end());
            enter(path->back());
        }
        decision_ = enforcer_->allowed[observed];
        return decision_;
    }

    /// Identity of the runtime state, for closed-loop exploration.
    std::tuple<StateId, StateId, MemoryId, bool> key() const {
        return {state_, config_.state, config_.memory, defined_};
    }

private:
    struct Cache {
        std::map<std::tuple<BlockId, Modality, BlockSet>, std::shared_ptr<const PositionalController>> enforcers;
    };

    void start(StateId s0, AbstractConfig cfg) {
        state_ = s0;
        if (c_->labels(cfg.memory, cfg.state).empty())
            throw ExecutorError("abstract controller defines no output at quotient state " + q_->block_names.at(cfg.state));
        if (opts_.record_trace) trace_ = {cfg};
        enter(cfg);
        decision_ = enforcer_->allowed[s0];
    }

    void enter(AbstractConfig cfg) {
        config_ = cfg;
        formula_ = enforced_formula(qm_->ts, *c_, cfg);
        auto key = std::make_tuple(formula_.source, formula_.modality, formula_.target);
        auto it = cache_->enforcers.find(key);
        if (it == cache_->enforcers.end()) {
            const auto psi = q_->concretize(formula_);
            const auto fp = ecs(*g_, psi);
            if (!psi.source.is_subset_of(fp.set))
                throw ExecutorError("formula " + q_->label_name(formula_) +
                                    " is not enforceable from its whole source block; the abstract controller "
                                    "does not match the quotient");
            it = cache_->enforcers.emplace(key, std::make_shared<PositionalController>(enforcer(*g_, psi, fp))).first;
        }
        enforcer_ = it->second;
    }

    /// Shortest permitted abstract continuation from the current
    /// configuration that stays at the current quotient state and then enters
    /// `target`; ties go to the lowest memory. The path includes both ends.
    std::optional<std::vector<AbstractConfig>> f_search(StateId target) const {
        const auto& qts = qm_->ts;
        std::map<AbstractConfig, AbstractConfig> parent;
        std::vector<AbstractConfig> layer{config_};
        parent.emplace(config_, config_);
        while (!layer.empty()) {
            std::optional<AbstractConfig> best, best_parent;
            std::vector<AbstractConfig> next_layer;
            for (const auto& cur : layer)
                for (auto l : c_->labels(cur.memory, cur.state))
                    for (auto t : qts.post(cur.state, l)) {
                        AbstractConfig nxt{t, c_->update(cur.memory, cur.state, l, t)};
                        if (t == target) {
                            if (!best || nxt.memory < best->memory) {
                                best = nxt;
                                best_parent = cur;
                            }
                        } else if (t == config_.state && parent.emplace(nxt, cur).second) {
                            next_layer.push_back(nxt);
                        }
                    }
            if (best) {
                std::vector<AbstractConfig> path{*best};
                for (auto cur = *best_parent;; cur = parent.at(cur)) {
                    path.push_back(cur);
                    if (cur == config_) break;
                }
                std::reverse(path.begin(), path.end());
                return path;
            }
            layer = std::move(next_layer);
        }
        return std::nullopt;
    }

    const TransitionSystem* g_;
    const QuotientSystem* q_;
    const MaterializedQuotient* qm_;
    const FiniteMemoryController* c_;
    Options opts_;
    std::shared_ptr<Cache> cache_;

    StateId state_ = 0;
    AbstractConfig config_;
    bool defined_ = true;
    QuotientLabel formula_;
    std::shared_ptr<const PositionalController> enforcer_;
    std::vector<LabelId> decision_;
    std::vector<AbstractConfig> trace_;
};

/// Starts a concrete controller at s0 (the abstract run starts at s0's block
/// in the controller's initial memory).
inline Executor new_executor(const TransitionSystem& g, const QuotientSystem& q, const MaterializedQuotient& qm,
                             const FiniteMemoryController& c, StateId s0, Executor::Options opts = {}) {
    return Executor(g, q, qm, c, s0, opts);
}

inline const std::vector<LabelId>& executor_step(Executor& ex, StateId observed) { return ex.step(observed); }

/// Reachable part of the closed loop (concrete system x executor), with
/// runtime states identified by Executor::key().
struct ClosedLoop {
    struct Node {
        StateId state;
        AbstractConfig config;
        bool defined;
        std::vector<LabelId> decision;
    };
    std::vector<Node> nodes;
    std::vector<std::vector<std::size_t>> succ;
    std::vector<std::size_t> initial;
    bool truncated = false;
};

inline ClosedLoop explore_closed_loop(const TransitionSystem& g, const QuotientSystem& q, const MaterializedQuotient& qm,
                                      const FiniteMemoryController& c, const std::vector<StateId>& starts,
                                      std::size_t max_nodes = 100000) {
    ClosedLoop out;
    std::map<std::tuple<StateId, StateId, MemoryId, bool>, std::size_t> index;
    std::vector<Executor> pending;
    auto intern = [&](Executor ex) {
        auto [it, fresh] = index.emplace(ex.key(), out.nodes.size());
        if (fresh) {
            out.nodes.push_back({ex.current_state(), ex.config(), ex.defined(), ex.decision()});
            out.succ.emplace_back();
            pending.push_back(std::move(ex));
        }
        return it->second;
    };
    const Executor::Options opts{true, false};
    for (auto s : starts) out.initial.push_back(intern(Executor(g, q, qm, c, s, opts)));
    for (std::size_t i = 0; i < pending.size(); ++i) {
        if (out.nodes.size() >= max_nodes) {
            out.truncated = true;
            break;
        }
        std::set<StateId> succ;
        for (auto l : out.nodes[i].decision)
            for (auto t : g.post(out.nodes[i].state, l)) succ.insert(t);
        for (auto t : succ) {
            Executor ex = pending[i];
            ex.step(t);
            const auto j = intern(std::move(ex));
            out.succ[i].push_back(j);
        }
    }
    return out;
}

// --- controller files --------------------------------------------------------

/// JSON form with quotient states and labels referenced by name.
inline std::string save_controller(const FiniteMemoryController& c, const TransitionSystem& qts) {
    using nlohmann::json;
    json out;
    out["memory_states"] = c.num_memory;
    out["initial_memory"] = c.initial_memory;
    json outputs = json::array(), updates = json::array();
    for (MemoryId m = 0; m < c.num_memory; ++m)
        for (StateId s = 0; s < qts.num_states(); ++s) {
            const auto& ls = c.labels(m, s);
            if (ls.empty()) continue;
            json names = json::array();
            for (auto l : ls) names.push_back(qts.label_name(l));
            outputs.push_back({{"memory", m}, {"state", qts.state_name(s)}, {"labels", names}});
            updates.push_back({{"memory", m}, {"state", qts.state_name(s)}, {"next", c.next[m][s]}});
        }
    out["output"] = outputs;
    out["update"] = updates;
    std::string text = "{\n";
    text += "\"memory_states\": " + out["memory_states"].dump() + ",\n";
    text += "\"initial_memory\": " + out["initial_memory"].dump() + ",\n";
    text += "\"output\": [";
    for (std::size_t i = 0; i < outputs.size(); ++i) text += (i ? ",\n  " : "\n  ") + outputs[i].dump();
    text += "\n],\n\"update\": [";
    for (std::size_t i = 0; i < updates.size(); ++i) text += (i ? ",\n  " : "\n  ") + updates[i].dump();
    text += "\n]\n}\n";
    return text;
}

inline FiniteMemoryController load_controller(std::string_view text, const TransitionSystem& qts) {
    using detail::require;
    const auto doc = detail::parse_json(text);
    FiniteMemoryController c;
    try {
        c.num_memory = require(doc, "memory_states", "controller").get<std::size_t>();
        c.initial_memory = require(doc, "initial_memory", "controller").get<MemoryId>();
    } catch (const nlohmann::json::type_error&) {
        throw ParseError("controller: memory_states and initial_memory must be non-negative integers");
    }
    if (c.num_memory == 0 || c.initial_memory >= c.num_memory) throw ParseError("controller: invalid memory counts");
    c.output.assign(c.num_memory, std::vector<std::vector<LabelId>>(qts.num_states()));
    c.next.assign(c.num_memory, std::vector<MemoryId>(qts.num_states(), 0));
    for (MemoryId m = 0; m < c.num_memory; ++m)
        for (StateId s = 0; s < qts.num_states(); ++s) c.next[m][s] = m;
    auto entry = [&](const nlohmann::json& e, const std::string& where) {
        const auto m = require(e, "memory", where);
        if (!m.is_number_unsigned() || m.get<std::size_t>() >= c.num_memory) throw ParseError(where + ".memory: out of range");
        const auto& name = detail::require_string(require(e, "state", where), where + ".state");
        auto s = qts.find_state(name);
        if (!s) throw ParseError(where + ".state: unknown quotient state '" + name + "'");
        return std::make_pair(m.get<MemoryId>(), *s);
    };
    const auto& outputs = detail::require_array(require(doc, "output", "controller"), "output");
    for (std::size_t i = 0; i < outputs.size(); ++i) {
        const std::string where = "output[" + std::to_string(i) + "]";
        auto [m, s] = entry(outputs[i], where);
        const auto& ls = detail::require_array(require(outputs[i], "labels", where), where + ".labels");
        for (std::size_t j = 0; j < ls.size(); ++j) {
            const auto& name = detail::require_string(ls[j], where + ".labels[" + std::to_string(j) + "]");
            auto l = qts.find_label(name);
            if (!l) throw ParseError(where + ".labels[" + std::to_string(j) + "]: unknown label '" + name + "'");
            c.output[m][s].push_back(*l);
        }
        std::sort(c.output[m][s].begin(), c.output[m][s].end());
        c.output[m][s].erase(std::unique(c.output[m][s].begin(), c.output[m][s].end()), c.output[m][s].end());
    }
    const auto& updates = detail::require_array(require(doc, "update", "controller"), "update");
    for (std::size_t i = 0; i < updates.size(); ++i) {
        const std::string where = "update[" + std::to_string(i) + "]";
        auto [m, s] = entry(updates[i], where);
        const auto nx = require(updates[i], "next", where);
        if (!nx.is_number_unsigned() || nx.get<std::size_t>() >= c.num_memory) throw ParseError(where + ".next: out of range");
        c.next[m][s] = nx.get<MemoryId>();
    }
    return c;
}

}  // namespace rsb

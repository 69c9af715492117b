#pragma once

#include <cctype>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rsb/errors.hpp"
#include "rsb/state_set.hpp"
#include "rsb/transition_system.hpp"

namespace rsb {

/// LTL without next. Leaves are propositions or raw state sets (generalized
/// formulas, true at a path iff its first state is in the set).
class Formula {
public:
    enum class Kind { True, Atom, States, Not, And, Or, Until, WeakUntil, Finally, Globally };

    static Formula top() { return Formula(std::make_shared<Node>(Node(Kind::True))); }
    static Formula bottom() { return negate(top()); }
    static Formula atom(std::string name) {
        Node n(Kind::Atom);
        n.name = std::move(name);
        return Formula(std::make_shared<Node>(std::move(n)));
    }
    static Formula states(StateSet set) {
        Node n(Kind::States);
        n.set = std::move(set);
        return Formula(std::make_shared<Node>(std::move(n)));
    }
    static Formula negate(Formula f) { return unary(Kind::Not, std::move(f)); }
    static Formula conj(Formula a, Formula b) { return binary(Kind::And, std::move(a), std::move(b)); }
    static Formula disj(Formula a, Formula b) { return binary(Kind::Or, std::move(a), std::move(b)); }
    static Formula until(Formula a, Formula b) { return binary(Kind::Until, std::move(a), std::move(b)); }
    static Formula weak_until(Formula a, Formula b) { return binary(Kind::WeakUntil, std::move(a), std::move(b)); }
    static Formula finally(Formula f) { return unary(Kind::Finally, std::move(f)); }
    static Formula globally(Formula f) { return unary(Kind::Globally, std::move(f)); }

    friend Formula operator!(Formula f) { return negate(std::move(f)); }
    friend Formula operator&&(Formula a, Formula b) { return conj(std::move(a), std::move(b)); }
    friend Formula operator||(Formula a, Formula b) { return disj(std::move(a), std::move(b)); }

    Kind kind() const { return node_->kind; }
    const std::string& atom_name() const { return node_->name; }
    const StateSet& state_set() const { return node_->set; }
    const Formula& lhs() const { return node_->children.at(0); }
    const Formula& rhs() const { return node_->children.at(1); }
    const Formula& operand() const { return node_->children.at(0); }

    /// Number of subformula occurrences.
    std::size_t size() const {
        std::size_t n = 1;
        for (const auto& c : node_->children) n += c.size();
        return n;
    }

    std::string to_string() const {
        switch (kind()) {
            case Kind::True: return "true";
            case Kind::Atom: return atom_name();
            case Kind::States: {
                std::string s = "{";
                bool first = true;
                for (auto x : state_set()) {
                    s += (first ? "" : ",") + std::to_string(x);
                    first = false;
                }
                return s + "}";
            }
            case Kind::Not: return "!" + operand().to_string();
            case Kind::Finally: return "F " + operand().to_string();
            case Kind::Globally: return "G " + operand().to_string();
            case Kind::And: return "(" + lhs().to_string() + " & " + rhs().to_string() + ")";
            case Kind::Or: return "(" + lhs().to_string() + " | " + rhs().to_string() + ")";
            case Kind::Until: return "(" + lhs().to_string() + " U " + rhs().to_string() + ")";
            case Kind::WeakUntil: return "(" + lhs().to_string() + " W " + rhs().to_string() + ")";
        }
        return {};
    }

private:
    struct Node {
        explicit Node(Kind k) : kind(k) {}
        Kind kind;
        std::string name;
        StateSet set;
        std::vector<Formula> children;
    };
    explicit Formula(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
    static Formula unary(Kind k, Formula f) {
        Node n(k);
        n.children = {std::move(f)};
        return Formula(std::make_shared<Node>(std::move(n)));
    }
    static Formula binary(Kind k, Formula a, Formula b) {
        Node n(k);
        n.children = {std::move(a), std::move(b)};
        return Formula(std::make_shared<Node>(std::move(n)));
    }

    std::shared_ptr<const Node> node_;
};

/// Parses the CLI surface syntax. Precedence from loosest to tightest:
/// `|`, `&`, `U`/`W` (right associative), prefix `!`/`G`/`F`. Atoms are
/// identifiers; `true` and `false` are constants.
inline Formula parse_formula(std::string_view text) {
    struct Parser {
        std::string_view src;
        std::size_t pos = 0;

        void skip() {
            while (pos < src.size() && std::isspace(static_cast<unsigned char>(src[pos]))) ++pos;
        }
        [[noreturn]] void fail(const std::string& what) const {
            throw ParseError("formula, column " + std::to_string(pos + 1) + ": " + what);
        }
        static bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.'; }
        std::string_view peek_token() {
            skip();
            if (pos >= src.size()) return {};
            if (ident_char(src[pos])) {
                auto e = pos;
                while (e < src.size() && ident_char(src[e])) ++e;
                return src.substr(pos, e - pos);
            }
            return src.substr(pos, 1);
        }
        std::string_view take() {
            auto t = peek_token();
            pos += t.size();
            return t;
        }

        Formula parse_or() {
            auto f = parse_and();
            while (peek_token() == "|") {
                take();
                f = Formula::disj(f, parse_and());
            }
            return f;
        }
        Formula parse_and() {
            auto f = parse_until();
            while (peek_token() == "&") {
                take();
                f = Formula::conj(f, parse_until());
            }
            return f;
        }
        Formula parse_until() {
            auto f = parse_unary();
            auto t = peek_token();
            if (t == "U") {
                take();
                return Formula::until(f, parse_until());
            }
            if (t == "W") {
                take();
                return Formula::weak_until(f, parse_until());
            }
            return f;
        }
        Formula parse_unary() {
            auto t = peek_token();
            if (t == "!") {
                take();
                return Formula::negate(parse_unary());
            }
            if (t == "G") {
                take();
                return Formula::globally(parse_unary());
            }
            if (t == "F") {
                take();
                return Formula::finally(parse_unary());
            }
            return parse_primary();
        }
        Formula parse_primary() {
            auto t = take();
            if (t.empty()) fail("unexpected end of input");
            if (t == "(") {
                auto f = parse_or();
                if (take() != ")") fail("expected ')'");
                return f;
            }
            if (t == "true") return Formula::top();
            if (t == "false") return Formula::bottom();
            if (t == "U" || t == "W" || !ident_char(t[0])) {
                pos -= t.size();
                fail("unexpected '" + std::string(t) + "'");
            }
            return Formula::atom(std::string(t));
        }
    };
    Parser p{text};
    auto f = p.parse_or();
    if (!p.peek_token().empty()) p.fail("trailing input '" + std::string(p.peek_token()) + "'");
    return f;
}

namespace detail {

/// Truth value of f at every lasso position. Until is the least and weak
/// until the greatest solution of x_i = b_i | (a_i & x_succ(i)); both are
/// found by backward sweeps, which converge after at most three passes on a
/// lasso.
inline std::vector<char> eval_positions(const TransitionSystem& g, const Formula& f, const Lasso& pi) {
    const auto n = pi.length();
    std::vector<char> v(n, 0);
    using K = Formula::Kind;
    auto solve = [&](const std::vector<char>& a, const std::vector<char>& b, bool greatest) {
        std::vector<char> x(n);
        for (std::size_t i = 0; i < n; ++i) x[i] = greatest ? (a[i] || b[i]) : b[i];
        for (bool changed = true; changed;) {
            changed = false;
            for (std::size_t k = n; k-- > 0;) {
                const char nv = b[k] || (a[k] && x[pi.successor(k)]);
                if (nv != x[k]) {
                    x[k] = nv;
                    changed = true;
                }
            }
        }
        return x;
    };
    switch (f.kind()) {
        case K::True: std::fill(v.begin(), v.end(), 1); break;
        case K::Atom: {
            auto p = g.find_prop(f.atom_name());
            if (!p) throw PreconditionError("atom '" + f.atom_name() + "' is not a proposition of the system");
            for (std::size_t i = 0; i < n; ++i) v[i] = g.has_prop(pi.at(i), *p);
            break;
        }
        case K::States:
            for (std::size_t i = 0; i < n; ++i) v[i] = f.state_set().contains(pi.at(i));
            break;
        case K::Not: {
            auto a = eval_positions(g, f.operand(), pi);
            for (std::size_t i = 0; i < n; ++i) v[i] = !a[i];
            break;
        }
        case K::And:
        case K::Or: {
            auto a = eval_positions(g, f.lhs(), pi);
            auto b = eval_positions(g, f.rhs(), pi);
            for (std::size_t i = 0; i < n; ++i) v[i] = f.kind() == K::And ? (a[i] && b[i]) : (a[i] || b[i]);
            break;
        }
        case K::Until:
        case K::WeakUntil:
            v = solve(eval_positions(g, f.lhs(), pi), eval_positions(g, f.rhs(), pi), f.kind() == K::WeakUntil);
            break;
        case K::Finally: v = solve(std::vector<char>(n, 1), eval_positions(g, f.operand(), pi), false); break;
        case K::Globally: v = solve(eval_positions(g, f.operand(), pi), std::vector<char>(n, 0), true); break;
    }
    return v;
}

}  // namespace detail

/// pi |= phi for the infinite path represented by the lasso.
inline bool eval_ltl_lasso(const TransitionSystem& g, const Formula& phi, const Lasso& pi) {
    if (pi.cycle.empty()) throw PreconditionError("lasso cycle must be nonempty");
    return detail::eval_positions(g, phi, pi)[0] != 0;
}

/// Label filter for a controlled system: true iff `label` may be taken at
/// `state`. An empty function permits everything.
using LabelFilter = std::function<bool(StateId, LabelId)>;

/// Searches every lasso from s with |stem| + |cycle| <= bound, following only
/// transitions permitted by `allowed`, for one violating phi. Finding none is
/// conclusive only when the bound covers all relevant cycles; a returned
/// lasso is always a genuine counterexample.
inline std::optional<Lasso> find_violation_bounded(const TransitionSystem& g, const Formula& phi, StateId s,
                                                   std::size_t bound, const LabelFilter& allowed = {}) {
    std::vector<StateId> path{s};
    std::optional<Lasso> found;
    std::function<void()> dfs = [&]() {
        const auto last = path.back();
        StateSet succ(g.num_states());
        auto [b, e] = g.edges_of(last);
        for (EdgeId i = b; i < e; ++i) {
            if (allowed && !allowed(last, g.edge_label(i))) continue;
            for (auto t : g.edge_targets(i)) succ.insert(t);
        }
        for (auto t : succ) {
            for (std::size_t j = 0; j < path.size() && !found; ++j) {
                if (path[j] != t) continue;
                Lasso l{{path.begin(), path.begin() + static_cast<std::ptrdiff_t>(j)},
                        {path.begin() + static_cast<std::ptrdiff_t>(j), path.end()}};
                if (!eval_ltl_lasso(g, phi, l)) found = std::move(l);
            }
            if (found) return;
            if (path.size() < bound) {
                path.push_back(t);
                dfs();
                path.pop_back();
                if (found) return;
            }
        }
    };
    dfs();
    return found;
}

/// Bounded-lasso oracle for <G, s> |= phi (sound for refutation only).
inline bool holds_at_bounded(const TransitionSystem& g, const Formula& phi, StateId s, std::size_t bound,
                             const LabelFilter& allowed = {}) {
    return !find_violation_bounded(g, phi, s, bound, allowed).has_value();
}

// --- stutter equivalence ---------------------------------------------------

/// Finite sequence with adjacent duplicates removed.
template <typename T>
std::vector<T> stutter_free(std::span<const T> seq) {
    std::vector<T> r;
    for (const auto& x : seq)
        if (r.empty() || !(r.back() == x)) r.push_back(x);
    return r;
}

template <typename T>
struct LassoSequence {
    std::vector<T> stem;
    std::vector<T> cycle;
    friend bool operator==(const LassoSequence&, const LassoSequence&) = default;
};

/// Stutter-free form of stem.cycle^omega, canonicalized so that two infinite
/// sequences have equal stutter-free forms iff the results compare equal:
/// the cycle is cyclically stutter-free and primitive, and the stem is as
/// short as possible.
template <typename T>
LassoSequence<T> stutter_free(const LassoSequence<T>& in) {
    if (in.cycle.empty()) throw PreconditionError("lasso cycle must be nonempty");
    auto cycle = stutter_free(std::span<const T>(in.cycle));
    while (cycle.size() > 1 && cycle.back() == cycle.front()) cycle.pop_back();
    for (std::size_t p = 1; p <= cycle.size(); ++p) {
        if (cycle.size() % p) continue;
        bool periodic = true;
        for (std::size_t i = p; i < cycle.size() && periodic; ++i) periodic = cycle[i] == cycle[i - p];
        if (periodic) {
            cycle.resize(p);
            break;
        }
    }
    auto stem = stutter_free(std::span<const T>(in.stem));
    while (!stem.empty()) {
        if (stem.back() == cycle.front()) {
            stem.pop_back();
        } else if (stem.back() == cycle.back()) {
            cycle.insert(cycle.begin(), cycle.back());
            cycle.pop_back();
            stem.pop_back();
        } else {
            break;
        }
    }
    return {std::move(stem), std::move(cycle)};
}

inline LassoSequence<PropSet> label_trace(const TransitionSystem& g, const Lasso& pi) {
    LassoSequence<PropSet> r;
    for (auto s : pi.stem) r.stem.push_back(g.props_of(s));
    for (auto s : pi.cycle) r.cycle.push_back(g.props_of(s));
    return r;
}

inline bool stutter_equivalent(const TransitionSystem& g, const Lasso& a, const Lasso& b) {
    return stutter_free(label_trace(g, a)) == stutter_free(label_trace(g, b));
}

// --- stutter step formulas -------------------------------------------------

enum class Modality { Until, WeakUntil };

inline const char* to_string(Modality m) { return m == Modality::Until ? "U" : "W"; }

/// P U T or P W T over state sets with P and T disjoint.
struct StutterStepFormula {
    StateSet source;
    StateSet target;
    Modality modality = Modality::Until;

    Formula to_formula() const {
        return modality == Modality::Until ? Formula::until(Formula::states(source), Formula::states(target))
                                           : Formula::weak_until(Formula::states(source), Formula::states(target));
    }
    friend bool operator==(const StutterStepFormula&, const StutterStepFormula&) = default;
};

}  // namespace rsb

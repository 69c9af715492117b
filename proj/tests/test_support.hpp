#pragma once

#include <random>
#include <string>
#include <vector>

#include "rsb/rsb.hpp"

namespace rsb::testing {

inline TransitionSystem fig1() { return load_ts_file(RSB_MODELS_DIR "/fig1.json"); }
inline TransitionSystem fig2() { return load_ts_file(RSB_MODELS_DIR "/fig2.json"); }

inline StateSet states(const TransitionSystem& g, std::initializer_list<const char*> names) {
    StateSet r(g.num_states());
    for (auto n : names) r.insert(*g.find_state(n));
    return r;
}

inline StateId id(const TransitionSystem& g, const char* name) { return *g.find_state(name); }

/// The six classes of the twelve-state model, as named state sets.
struct SixClasses {
    StateSet A1, A2, B1, B2, C, D;
    explicit SixClasses(const TransitionSystem& g)
        : A1(states(g, {"a1", "a2"})),
          A2(states(g, {"a3", "a4"})),
          B1(states(g, {"b1", "b2"})),
          B2(states(g, {"b3", "b4"})),
          C(states(g, {"c1", "c2"})),
          D(states(g, {"d1", "d2"})) {}
    std::vector<StateSet> all() const { return {A1, A2, B1, B2, C, D}; }
};

/// Random system with n states and k labels; every state gets at least one
/// transition when `deadlock_free` is set. Propositions are drawn from
/// `num_props` names p0, p1, ...
inline TransitionSystem random_ts(std::mt19937_64& rng, std::size_t n, std::size_t k, double density,
                                  std::size_t num_props = 2, bool deadlock_free = true) {
    TransitionSystemBuilder b;
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> pick_state(0, n - 1), pick_label(0, k - 1);
    for (std::size_t l = 0; l < k; ++l) b.add_label("l" + std::to_string(l));
    for (std::size_t p = 0; p < num_props; ++p) b.add_prop("p" + std::to_string(p));
    for (std::size_t s = 0; s < n; ++s) {
        std::vector<std::string> props;
        for (std::size_t p = 0; p < num_props; ++p)
            if (coin(rng) < 0.5) props.push_back("p" + std::to_string(p));
        b.add_state("s" + std::to_string(s), props);
    }
    for (StateId s = 0; s < n; ++s) {
        bool any = false;
        for (LabelId l = 0; l < k; ++l)
            for (StateId t = 0; t < n; ++t)
                if (coin(rng) < density) {
                    b.add_transition(s, l, t);
                    any = true;
                }
        if (!any && deadlock_free) b.add_transition(s, static_cast<LabelId>(pick_label(rng)), static_cast<StateId>(pick_state(rng)));
    }
    b.set_initial(0);
    return b.build();
}

inline StateSet random_subset(std::mt19937_64& rng, std::size_t n, double p = 0.5) {
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    StateSet r(n);
    for (StateId s = 0; s < n; ++s)
        if (coin(rng) < p) r.insert(s);
    return r;
}

}  // namespace rsb::testing

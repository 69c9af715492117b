#pragma once

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include <json.hpp>

#include "rsb/errors.hpp"
#include "rsb/transition_system.hpp"

namespace rsb {

namespace detail {

inline std::size_t line_of_offset(std::string_view text, std::size_t byte) {
    byte = std::min(byte, text.size());
    return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(byte), '\n'));
}

inline nlohmann::json parse_json(std::string_view text) {
    try {
        return nlohmann::json::parse(text.begin(), text.end());
    } catch (const nlohmann::json::parse_error& e) {
        // e.byte is 1-based and points one past the offending character
        throw ParseError("line " + std::to_string(line_of_offset(text, e.byte ? e.byte - 1 : 0)) + ": " + e.what());
    }
}

inline const nlohmann::json& require(const nlohmann::json& obj, const char* key, const std::string& where) {
    if (!obj.is_object() || !obj.contains(key)) throw ParseError(where + ": missing field '" + key + "'");
    return obj.at(key);
}

inline const std::string& require_string(const nlohmann::json& v, const std::string& where) {
    if (!v.is_string()) throw ParseError(where + ": expected a string");
    return v.get_ref<const std::string&>();
}

inline const nlohmann::json& require_array(const nlohmann::json& v, const std::string& where) {
    if (!v.is_array()) throw ParseError(where + ": expected an array");
    return v;
}

}  // namespace detail

/// Parses the JSON model format:
///
///   {"states": [{"id": "s0", "props": ["a"]}, ...],
///    "props": ["a", ...],                       (optional)
///    "alphabet": ["alpha", ...],
///    "initial": ["s0"],
///    "transitions": [["s0", "alpha", "s1"], ...]}
///
/// When "props" is present every state proposition must be declared there;
/// otherwise AP is the set of propositions used by the states. Transition
/// labels must be declared in "alphabet".
inline TransitionSystem load_ts(std::string_view text) {
    using detail::require;
    using detail::require_array;
    using detail::require_string;
    const auto doc = detail::parse_json(text);
    if (!doc.is_object()) throw ParseError("model: top level must be an object");

    TransitionSystemBuilder b;
    std::set<std::string> declared_props;
    const bool strict_props = doc.contains("props");
    if (strict_props) {
        const auto& ps = require_array(doc.at("props"), "props");
        for (std::size_t i = 0; i < ps.size(); ++i) {
            const auto& p = require_string(ps[i], "props[" + std::to_string(i) + "]");
            declared_props.insert(p);
            b.add_prop(p);
        }
    }

    const auto& alphabet = require_array(require(doc, "alphabet", "model"), "alphabet");
    std::set<std::string> labels;
    for (std::size_t i = 0; i < alphabet.size(); ++i) {
        const auto& l = require_string(alphabet[i], "alphabet[" + std::to_string(i) + "]");
        if (!labels.insert(l).second) throw ParseError("alphabet[" + std::to_string(i) + "]: duplicate label '" + l + "'");
        b.add_label(l);
    }

    const auto& states = require_array(require(doc, "states", "model"), "states");
    for (std::size_t i = 0; i < states.size(); ++i) {
        const std::string where = "states[" + std::to_string(i) + "]";
        const auto& id = require_string(require(states[i], "id", where), where + ".id");
        std::vector<std::string> props;
        if (states[i].contains("props")) {
            const auto& ps = require_array(states[i].at("props"), where + ".props");
            for (std::size_t k = 0; k < ps.size(); ++k) {
                const auto& p = require_string(ps[k], where + ".props[" + std::to_string(k) + "]");
                if (strict_props && !declared_props.count(p))
                    throw ParseError(where + ".props[" + std::to_string(k) + "]: undeclared proposition '" + p + "'");
                props.push_back(p);
            }
        }
        if (b.has_state(id)) throw ParseError(where + ": duplicate state id '" + id + "'");
        b.add_state(id, props);
    }

    auto state_ref = [&](const nlohmann::json& v, const std::string& where) {
        const auto& name = require_string(v, where);
        if (!b.has_state(name)) throw ParseError(where + ": undeclared state '" + name + "'");
        return b.state(name);
    };

    if (doc.contains("initial")) {
        const auto& init = require_array(doc.at("initial"), "initial");
        for (std::size_t i = 0; i < init.size(); ++i) b.set_initial(state_ref(init[i], "initial[" + std::to_string(i) + "]"));
    }

    const auto& trans = require_array(require(doc, "transitions", "model"), "transitions");
    for (std::size_t i = 0; i < trans.size(); ++i) {
        const std::string where = "transitions[" + std::to_string(i) + "]";
        const auto& t = trans[i];
        if (!t.is_array() || t.size() != 3) throw ParseError(where + ": expected [source, label, target]");
        const auto s = state_ref(t[0], where + "[0]");
        const auto& l = require_string(t[1], where + "[1]");
        if (!labels.count(l)) throw ParseError(where + "[1]: undeclared label '" + l + "'");
        const auto d = state_ref(t[2], where + "[2]");
        b.add_transition(s, b.add_label(l), d);
    }
    return b.build();
}

inline TransitionSystem load_ts_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path + ": cannot open");
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return load_ts(ss.str());
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.what());
    }
}

/// Canonical serialization: states in index order, alphabet and props in
/// index (first appearance) order, transitions sorted by index triple, one
/// state or transition per line.
inline std::string save_ts(const TransitionSystem& g) {
    using nlohmann::json;
    std::ostringstream out;
    out << "{\n\"states\": [";
    for (StateId s = 0; s < g.num_states(); ++s) {
        json st = {{"id", g.state_name(s)}, {"props", json::array()}};
        for (auto p : g.props_of(s)) st["props"].push_back(g.prop_name(p));
        out << (s ? ",\n  " : "\n  ") << st.dump();
    }
    out << "\n],\n\"props\": " << json(g.prop_names()).dump();
    out << ",\n\"alphabet\": " << json(g.label_names()).dump();
    json init = json::array();
    for (auto s : g.initial()) init.push_back(g.state_name(s));
    out << ",\n\"initial\": " << init.dump();
    out << ",\n\"transitions\": [";
    bool first = true;
    for (auto [s, l, t] : g.transitions()) {
        out << (first ? "\n  " : ",\n  ") << json::array({g.state_name(s), g.label_name(l), g.state_name(t)}).dump();
        first = false;
    }
    out << "\n]\n}\n";
    return out.str();
}

}  // namespace rsb

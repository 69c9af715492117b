#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

#include "rsb/rsb.hpp"

namespace {

using namespace rsb;
using nlohmann::json;

bool json_mode = false;

struct UsageError : Error {
    using Error::Error;
};

struct DomainFailure : Error {
    using Error::Error;
};

// Prints a result line as "key: value" or, in JSON mode, collects it.
class Report {
public:
    void add(const std::string& key, const json& value) {
        if (json_mode)
            obj_[key] = value;
        else
            std::cout << key << ": " << (value.is_string() ? value.get<std::string>() : value.dump()) << "\n";
    }
    ~Report() {
        if (json_mode && !obj_.empty()) std::cout << obj_.dump() << "\n";
    }

private:
    json obj_ = json::object();
};

bool is_grid_config(const std::string& path) { return path.size() > 4 && path.substr(path.size() - 4) == ".cfg"; }

struct LoadedModel {
    TransitionSystem ts;
    std::optional<grid::GridAbstraction> grid;
};

LoadedModel load_model(const std::string& path, double cell_size) {
    LoadedModel m;
    if (is_grid_config(path)) {
        auto cfg = grid::load_grid_config(path);
        if (cell_size > 0) cfg.cell_size = cell_size;
        m.grid = grid::build_grid_ts(cfg);
        m.ts = m.grid->ts;
    } else {
        m.ts = load_ts_file(path);
    }
    return m;
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw UsageError(path + ": cannot write");
    out << text;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path + ": cannot open");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

RefinementOptions refinement_options(const std::string& strategy, const std::string& order) {
    RefinementOptions o;
    o.strategy = strategy == "single" ? SplitStrategy::Single : SplitStrategy::Signature;
    o.order = order == "reverse" ? SearchOrder::Reverse : SearchOrder::Forward;
    return o;
}

std::string partition_json(const TransitionSystem& g, const Partition& r) {
    std::string out = "{\"blocks\": [";
    const auto c = r.canonical();
    for (BlockId b = 0; b < c.num_blocks(); ++b) {
        json names = json::array();
        for (auto s : c.block(b)) names.push_back(g.state_name(s));
        out += (b ? ",\n  " : "\n  ") + names.dump();
    }
    return out + "\n]}\n";
}

Partition load_partition(const TransitionSystem& g, const std::string& path) {
    const auto doc = detail::parse_json(read_file(path));
    const auto& blocks = detail::require_array(detail::require(doc, "blocks", "partition"), "blocks");
    std::vector<StateSet> sets;
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        const auto where = "blocks[" + std::to_string(b) + "]";
        StateSet blk(g.num_states());
        for (const auto& v : detail::require_array(blocks[b], where)) {
            const auto& name = detail::require_string(v, where);
            auto s = g.find_state(name);
            if (!s) throw ParseError(where + ": unknown state '" + name + "'");
            blk.insert(*s);
        }
        sets.push_back(std::move(blk));
    }
    try {
        return Partition::from_blocks(g.num_states(), sets);
    } catch (const PreconditionError& e) {
        throw ParseError(path + ": " + e.what());
    }
}

// Atoms naming a proposition denote its states; other atoms must name a
// single state.
StateSet resolve_states(const TransitionSystem& g, const std::string& expr) {
    const auto f = parse_formula(expr);
    std::function<StateSet(const Formula&)> eval = [&](const Formula& x) -> StateSet {
        using K = Formula::Kind;
        switch (x.kind()) {
            case K::True: return g.all_states();
            case K::Atom: {
                if (auto p = g.find_prop(x.atom_name())) return g.states_with(*p);
                if (auto s = g.find_state(x.atom_name())) return StateSet(g.num_states(), {*s});
                throw UsageError("'" + x.atom_name() + "' is neither a proposition nor a state");
            }
            case K::Not: return eval(x.operand()).complement();
            case K::And: return eval(x.lhs()) & eval(x.rhs());
            case K::Or: return eval(x.lhs()) | eval(x.rhs());
            default: throw UsageError("state expressions may not contain temporal operators");
        }
    };
    return eval(f);
}

std::string set_string(const TransitionSystem& g, const StateSet& s) {
    std::string out = "{";
    bool first = true;
    for (auto x : s) {
        out += (first ? "" : ",") + g.state_name(x);
        first = false;
    }
    return out + "}";
}

struct Pipeline {
    Partition partition;
    RefinementStats stats;
    QuotientSystem quotient;
    MaterializedQuotient materialized;
};

Pipeline run_pipeline(const TransitionSystem& g, const RefinementOptions& opts) {
    Pipeline p;
    p.partition = coarsest_rsb(g, opts, &p.stats);
    p.quotient = build_quotient(g, p.partition, false);
    p.materialized = quotient_as_ts(p.quotient);
    return p;
}

FiniteMemoryController synthesize(const Pipeline& p, const std::string& spec) {
    auto goals = gf_goal_sets(p.materialized.ts, parse_formula(spec));
    auto c = synth_gf(p.materialized.ts, goals);
    if (!c) throw DomainFailure("specification is not realizable from the initial states");
    return *c;
}

grid::Point parse_point(const std::string& text) {
    std::istringstream in(text);
    grid::Point p;
    char comma = 0;
    if (!(in >> p.x >> comma >> p.y) || comma != ',' || !(in >> std::ws).eof())
        throw UsageError("expected a point 'x,y', got '" + text + "'");
    return p;
}

int fail(int code, const std::string& kind, const std::string& msg) {
    if (json_mode)
        std::cerr << json{{"error", kind}, {"message", msg}}.dump() << "\n";
    else
        std::cerr << "rsb: " << msg << "\n";
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Robust stutter bisimulation: minimization, quotients and controller synthesis"};
    app.require_subcommand(1);
    app.add_flag("--json", json_mode, "Machine-readable output and diagnostics");

    std::string model, out_path, strategy = "signature", order = "forward", spec, controller_path, partition_path;
    std::string source, target, modality = "U", start;
    std::size_t steps = 100;
    std::uint64_t seed = 0;
    double cell_size = 0;

    auto add_model = [&](CLI::App* c) {
        c->add_option("model", model, "Model file (.json transition system or .cfg grid config)")->required();
        c->add_option("--cell-size", cell_size, "Override the grid cell size")->check(CLI::PositiveNumber);
    };
    auto add_refine = [&](CLI::App* c) {
        c->add_option("--strategy", strategy, "Splitting strategy")->check(CLI::IsMember({"single", "signature"}));
        c->add_option("--order", order, "Splitter search order")->check(CLI::IsMember({"forward", "reverse"}));
    };

    auto* check = app.add_subcommand("check", "Validate a model and report its size");
    add_model(check);

    auto* ecs_cmd = app.add_subcommand("ecs", "Enforceable states of a stutter step formula");
    add_model(ecs_cmd);
    ecs_cmd->add_option("--source", source, "Source set (propositional expression over props and state names)")->required();
    ecs_cmd->add_option("--target", target, "Target set")->required();
    ecs_cmd->add_option("--modality", modality, "U or W")->check(CLI::IsMember({"U", "W"}));

    auto* minimize = app.add_subcommand("minimize", "Coarsest robust stutter bisimulation");
    add_model(minimize);
    add_refine(minimize);
    minimize->add_option("-o,--output", out_path, "Write the partition as JSON");

    auto* quotient = app.add_subcommand("quotient", "Quotient transition system");
    add_model(quotient);
    add_refine(quotient);
    quotient->add_option("-o,--output", out_path, "Write the quotient (and a .blocks.json sidecar)");
    quotient->add_option("--partition", partition_path, "Use this partition instead of minimizing");

    auto* synth = app.add_subcommand("synth", "Synthesize a controller on the quotient");
    add_model(synth);
    add_refine(synth);
    synth->add_option("--spec", spec, "Specification 'G F g1 & ... & G F gn'")->required();
    synth->add_option("-o,--output", out_path, "Write the controller as JSON");

    auto* run = app.add_subcommand("run", "Run the concrete controller on a transition system model");
    add_model(run);
    add_refine(run);
    run->add_option("controller", controller_path, "Controller JSON written by synth")->required();
    run->add_option("--start", start, "Start state")->required();
    run->add_option("--steps", steps, "Number of steps");
    run->add_option("--seed", seed, "Seed for the environment's choices");

    auto* grid_build = app.add_subcommand("grid-build", "Build the grid transition system of a config");
    grid_build->add_option("config", model, "Grid config file")->required();
    grid_build->add_option("--cell-size", cell_size, "Override the cell size")->check(CLI::PositiveNumber);
    grid_build->add_option("-o,--output", out_path, "Write the transition system as JSON");

    auto* grid_sim = app.add_subcommand("grid-sim", "Synthesize on a grid model and simulate the dynamics");
    grid_sim->add_option("config", model, "Grid config file")->required();
    grid_sim->add_option("--cell-size", cell_size, "Override the cell size")->check(CLI::PositiveNumber);
    add_refine(grid_sim);
    grid_sim->add_option("--spec", spec, "Specification 'G F g1 & ... & G F gn'")->required();
    grid_sim->add_option("--start", start, "Start point 'x,y' (default: center of the first initial cell)");
    grid_sim->add_option("--steps", steps, "Number of steps");
    grid_sim->add_option("--seed", seed, "Disturbance seed");
    grid_sim->add_option("-o,--output", out_path, "Write the trajectory CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << app.help();
        return fail(2, "usage", e.what());
    }

    try {
        Report rep;
        const auto opts = refinement_options(strategy, order);
        if (*check) {
            auto m = load_model(model, cell_size);
            rep.add("states", m.ts.num_states());
            rep.add("labels", m.ts.num_labels());
            rep.add("transitions", m.ts.num_transitions());
            rep.add("initial", m.ts.initial().count());
            const bool ok = is_deadlock_free(m.ts);
            rep.add("deadlock-free", ok ? "true" : "false");
            return ok ? 0 : 1;
        }
        if (*ecs_cmd) {
            auto m = load_model(model, cell_size);
            const auto p = resolve_states(m.ts, source), t = resolve_states(m.ts, target);
            if (p.intersects(t)) throw UsageError("source and target overlap");
            const auto mod = modality == "U" ? Modality::Until : Modality::WeakUntil;
            const auto fp = ecs(m.ts, {p, t, mod});
            rep.add("ecs", set_string(m.ts, fp.set));
            if (mod == Modality::Until) {
                json ranks = json::object();
                for (auto s : fp.set) ranks[m.ts.state_name(s)] = fp.rank_of(s);
                if (json_mode)
                    rep.add("ranks", ranks);
                else
                    for (auto s : fp.set) std::cout << "rank " << m.ts.state_name(s) << ": " << fp.rank_of(s) << "\n";
            }
            return 0;
        }
        if (*minimize) {
            auto m = load_model(model, cell_size);
            RefinementStats st;
            auto r = coarsest_rsb(m.ts, opts, &st);
            rep.add("blocks", r.num_blocks());
            rep.add("stats", "iterations " + std::to_string(st.iterations) + ", splitters tested " +
                                 std::to_string(st.splitters_tested) + ", splitters applied " +
                                 std::to_string(st.splitters_applied));
            if (!out_path.empty()) write_file(out_path, partition_json(m.ts, r));
            return 0;
        }
        if (*quotient) {
            auto m = load_model(model, cell_size);
            Partition r;
            if (partition_path.empty()) {
                r = coarsest_rsb(m.ts, opts);
            } else {
                r = load_partition(m.ts, partition_path);
                if (!is_label_consistent(m.ts, r)) throw DomainFailure("partition is not label-consistent");
                if (!is_rsb(m.ts, r)) throw DomainFailure("partition is not a robust stutter bisimulation");
            }
            auto q = build_quotient(m.ts, r, false);
            auto qm = quotient_as_ts(q);
            rep.add("blocks", q.num_blocks());
            rep.add("labels", qm.ts.num_labels());
            if (!out_path.empty()) {
                write_file(out_path, save_ts(qm.ts));
                std::string side = "{";
                for (BlockId b = 0; b < q.num_blocks(); ++b) {
                    json names = json::array();
                    for (auto s : r.block(b)) names.push_back(m.ts.state_name(s));
                    side += (b ? ",\n  " : "\n  ") + json(q.block_names[b]).dump() + ": " + names.dump();
                }
                write_file(out_path + ".blocks.json", side + "\n}\n");
            }
            return 0;
        }
        if (*synth) {
            auto m = load_model(model, cell_size);
            auto p = run_pipeline(m.ts, opts);
            auto c = synthesize(p, spec);
            rep.add("blocks", p.partition.num_blocks());
            rep.add("realizable", "true");
            rep.add("memory", c.num_memory);
            if (!out_path.empty()) write_file(out_path, save_controller(c, p.materialized.ts));
            return 0;
        }
        if (*run) {
            auto m = load_model(model, cell_size);
            auto p = run_pipeline(m.ts, opts);
            auto c = load_controller(read_file(controller_path), p.materialized.ts);
            auto s0 = m.ts.find_state(start);
            if (!s0) throw UsageError("unknown start state '" + start + "'");
            auto ex = new_executor(m.ts, p.quotient, p.materialized, c, *s0, {true, false});
            std::mt19937_64 rng(seed);
            std::cout << "step,state,block,memory,label\n";
            auto s = *s0;
            for (std::size_t k = 0;; ++k) {
                const auto& labels = ex.decision();
                const auto label = labels.front();
                std::cout << k << ',' << m.ts.state_name(s) << ',' << p.quotient.block_names[ex.config().state] << ','
                          << ex.config().memory << ',' << m.ts.label_name(label) << "\n";
                if (k == steps) break;
                const auto post = m.ts.post(s, label);
                std::uniform_int_distribution<std::size_t> pick(0, post.size() - 1);
                s = post[pick(rng)];
                ex.step(s);
            }
            return 0;
        }
        if (*grid_build) {
            auto m = load_model(model, cell_size);
            if (!m.grid) throw UsageError("grid-build expects a .cfg grid config");
            rep.add("cells", m.grid->num_cells());
            rep.add("states", m.ts.num_states());
            rep.add("labels", m.ts.num_labels());
            rep.add("transitions", m.ts.num_transitions());
            if (!out_path.empty()) write_file(out_path, save_ts(m.ts));
            return 0;
        }
        if (*grid_sim) {
            auto m = load_model(model, cell_size);
            if (!m.grid) throw UsageError("grid-sim expects a .cfg grid config");
            const auto& g = *m.grid;
            auto p = run_pipeline(m.ts, opts);
            auto c = synthesize(p, spec);
            grid::Point x0;
            if (start.empty()) {
                if (g.ts.initial().empty()) throw DomainFailure("model has no initial state");
                x0 = g.cell_center(g.cell_of_state[g.ts.initial().first()]);
            } else {
                x0 = parse_point(start);
            }
            const auto s0 = g.state_at(x0);
            if (s0 == g.bad_state) throw UsageError("start point is not in a safe cell");
            auto ex = new_executor(g.ts, p.quotient, p.materialized, c, s0, {true, false});
            grid::ControlQuery query = [&](StateId s, bool first) { return first ? ex.decision() : ex.step(s); };
            auto tr = grid::simulate(g, query, x0, steps, seed);
            std::map<std::string, std::size_t> visits;
            std::string prev;
            for (const auto& r : tr.records) {
                const std::string cur = r.regions.empty() ? "" : r.regions.front();
                if (!cur.empty() && cur != prev) ++visits[cur];
                prev = cur;
            }
            rep.add("blocks", p.partition.num_blocks());
            rep.add("steps", tr.records.size() - 1);
            rep.add("failed", tr.failed ? "true" : "false");
            std::string v;
            for (const auto& [k, n] : visits) v += (v.empty() ? "" : " ") + k + "=" + std::to_string(n);
            rep.add("visits", v);
            if (!out_path.empty()) write_file(out_path, grid::trajectory_csv(g, tr));
            return tr.failed ? 1 : 0;
        }
    } catch (const UsageError& e) {
        return fail(2, "usage", e.what());
    } catch (const ParseError& e) {
        return fail(2, "parse", e.what());
    } catch (const DomainFailure& e) {
        return fail(1, "domain", e.what());
    } catch (const Error& e) {
        return fail(1, "domain", e.what());
    } catch (const std::exception& e) {
        return fail(1, "internal", e.what());
    }
    return 0;
}

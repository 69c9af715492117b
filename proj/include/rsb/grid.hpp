#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "rsb/controller.hpp"
#include "rsb/errors.hpp"
#include "rsb/parallel.hpp"
#include "rsb/transition_system.hpp"

namespace rsb::grid {

struct Point {
    double x = 0, y = 0;
};

/// Axis-aligned box [x_lo, x_hi] x [y_lo, y_hi].
struct Box {
    double x_lo = 0, x_hi = 0, y_lo = 0, y_hi = 0;
    double width() const { return x_hi - x_lo; }
    double height() const { return y_hi - y_lo; }
};

using Polygon = std::vector<Point>;

struct Region {
    std::string name;
    Polygon shape;
};

/// Discretized model of x(k+1) = x(k) + u(k) + w(k) on a box minus convex
/// obstacles, with u from a quantized box and w from a box.
struct GridModel {
    Box domain;
    std::vector<Polygon> obstacles;  // each convex
    double cell_size = 0.1;
    Box control;
    double control_step = 0.1;
    Box disturbance;
    std::vector<Region> regions;
    std::string initial_region;
    std::string bad_label = "Bad";
};

namespace detail {

inline double cross(Point o, Point a, Point b) { return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x); }

inline bool is_convex(const Polygon& p) {
    if (p.size() < 3) return false;
    int sign = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double c = cross(p[i], p[(i + 1) % p.size()], p[(i + 2) % p.size()]);
        if (std::abs(c) < 1e-12) continue;
        const int s = c > 0 ? 1 : -1;
        if (sign && s != sign) return false;
        sign = s;
    }
    return sign != 0;
}

inline Box rect(double x_lo, double x_hi, double y_lo, double y_hi) { return {x_lo, x_hi, y_lo, y_hi}; }

inline Polygon box_polygon(const Box& b) { return {{b.x_lo, b.y_lo}, {b.x_hi, b.y_lo}, {b.x_hi, b.y_hi}, {b.x_lo, b.y_hi}}; }

}  // namespace detail

/// True iff the interiors of the box and the convex polygon overlap
/// (separating axis test; touching boundaries do not count).
inline bool overlaps_interior(const Box& b, const Polygon& convex) {
    constexpr double eps = 1e-9;
    const auto corners = detail::box_polygon(b);
    auto separated_on = [&](double ax, double ay) {
        double p_lo = INFINITY, p_hi = -INFINITY, q_lo = INFINITY, q_hi = -INFINITY;
        for (auto c : corners) {
            const double d = c.x * ax + c.y * ay;
            p_lo = std::min(p_lo, d);
            p_hi = std::max(p_hi, d);
        }
        for (auto c : convex) {
            const double d = c.x * ax + c.y * ay;
            q_lo = std::min(q_lo, d);
            q_hi = std::max(q_hi, d);
        }
        const double scale = std::hypot(ax, ay);
        return p_hi <= q_lo + eps * scale || q_hi <= p_lo + eps * scale;
    };
    if (separated_on(1, 0) || separated_on(0, 1)) return false;
    for (std::size_t i = 0; i < convex.size(); ++i) {
        const auto a = convex[i], c = convex[(i + 1) % convex.size()];
        if (separated_on(-(c.y - a.y), c.x - a.x)) return false;
    }
    return true;
}

/// Even-odd point-in-polygon test.
inline bool contains(const Polygon& poly, Point p) {
    bool inside = false;
    for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
        const auto a = poly[i], b = poly[j];
        if ((a.y > p.y) != (b.y > p.y) && p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x) inside = !inside;
    }
    return inside;
}

/// The robot workspace: [0,6] x [0,5] minus a slanted obstacle, labeled
/// corners Home (initial), Task1, Task2, Task3.
inline GridModel robot_model() {
    GridModel m;
    m.domain = detail::rect(0, 6, 0, 5);
    m.obstacles = {{{0.5, 2.0}, {11.0 / 3.0, 2.0}, {5.0, 4.0}, {0.5, 4.0}}};
    m.cell_size = 0.1;
    m.control = detail::rect(-0.6, 0.6, -0.6, 0.6);
    m.control_step = 0.1;
    m.disturbance = detail::rect(-0.3, 0.3, -0.3, 0.3);
    m.regions = {{"Home", detail::box_polygon(detail::rect(0, 1, 4, 5))},
                 {"Task1", detail::box_polygon(detail::rect(5, 6, 4, 5))},
                 {"Task2", detail::box_polygon(detail::rect(0, 1, 0, 1))},
                 {"Task3", detail::box_polygon(detail::rect(5, 6, 0, 1))}};
    m.initial_region = "Home";
    return m;
}

/// Parses the key = value configuration format:
///
///   domain = x_lo x_hi y_lo y_hi
///   obstacle = x1 y1; x2 y2; ...        (convex; may repeat)
///   cell_size = h
///   control = x_lo x_hi y_lo y_hi
///   control_step = q
///   disturbance = x_lo x_hi y_lo y_hi
///   region.NAME = x_lo x_hi y_lo y_hi   or   region.NAME = x1 y1; x2 y2; ...
///   initial = NAME
///
/// '#' starts a comment. Keys not given keep the robot model's values.
inline GridModel parse_grid_config(const std::string& text) {
    GridModel m = robot_model();
    bool obstacles_given = false, regions_given = false;
    std::istringstream in(text);
    std::string line;
    for (int lineno = 1; std::getline(in, line); ++lineno) {
        const auto where = "line " + std::to_string(lineno);
        if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError(where + ": expected key = value");
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r"), e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
        };
        const auto key = trim(line.substr(0, eq));
        const auto value = trim(line.substr(eq + 1));
        auto numbers = [&](const std::string& v) {
            std::vector<double> r;
            std::istringstream vs(v);
            std::string tok;
            while (vs >> tok) {
                try {
                    std::size_t used = 0;
                    r.push_back(std::stod(tok, &used));
                    if (used != tok.size()) throw std::invalid_argument(tok);
                } catch (const std::exception&) {
                    throw ParseError(where + ": '" + tok + "' is not a number");
                }
            }
            return r;
        };
        auto box = [&](const std::string& v) {
            auto n = numbers(v);
            if (n.size() != 4 || n[0] >= n[1] || n[2] >= n[3])
                throw ParseError(where + ": expected x_lo x_hi y_lo y_hi with lo < hi");
            return detail::rect(n[0], n[1], n[2], n[3]);
        };
        auto polygon = [&](const std::string& v) {
            Polygon p;
            std::istringstream vs(v);
            std::string vertex;
            while (std::getline(vs, vertex, ';')) {
                auto n = numbers(vertex);
                if (n.size() != 2) throw ParseError(where + ": polygon vertices are 'x y' pairs separated by ';'");
                p.push_back({n[0], n[1]});
            }
            if (p.size() < 3) throw ParseError(where + ": polygon needs at least 3 vertices");
            return p;
        };
        auto scalar = [&](const std::string& v) {
            auto n = numbers(v);
            if (n.size() != 1 || !(n[0] > 0)) throw ParseError(where + ": expected a positive number");
            return n[0];
        };
        if (key == "domain") {
            m.domain = box(value);
        } else if (key == "obstacle") {
            if (!obstacles_given) m.obstacles.clear();
            obstacles_given = true;
            auto p = polygon(value);
            if (!detail::is_convex(p)) throw ParseError(where + ": obstacle polygon must be convex");
            m.obstacles.push_back(std::move(p));
        } else if (key == "cell_size") {
            m.cell_size = scalar(value);
        } else if (key == "control") {
            m.control = box(value);
        } else if (key == "control_step") {
            m.control_step = scalar(value);
        } else if (key == "disturbance") {
            m.disturbance = box(value);
        } else if (key.rfind("region.", 0) == 0 && key.size() > 7) {
            if (!regions_given) m.regions.clear();
            regions_given = true;
            const auto name = key.substr(7);
            Polygon p = value.find(';') == std::string::npos ? detail::box_polygon(box(value)) : polygon(value);
            m.regions.push_back({name, std::move(p)});
        } else if (key == "initial") {
            m.initial_region = value;
        } else {
            throw ParseError(where + ": unknown key '" + key + "'");
        }
    }
    if (std::abs(m.disturbance.x_lo + m.disturbance.x_hi) > 1e-12 || std::abs(m.disturbance.y_lo + m.disturbance.y_hi) > 1e-12)
        throw ParseError("disturbance box must be symmetric about 0");
    if (std::none_of(m.regions.begin(), m.regions.end(), [&](const Region& r) { return r.name == m.initial_region; }))
        throw ParseError("initial region '" + m.initial_region + "' is not defined");
    return m;
}

inline GridModel load_grid_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path + ": cannot open");
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return parse_grid_config(ss.str());
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.what());
    }
}

/// Grid transition system with the maps between cells, states and controls.
/// Cell (i, j) covers [x_lo + i h, x_lo + (i+1) h) x [y_lo + j h, ...).
struct GridAbstraction {
    GridModel model;
    TransitionSystem ts;
    std::size_t nx = 0, ny = 0;
    std::vector<std::optional<StateId>> state_of_cell;  // index i + nx * j; nullopt for removed cells
    std::vector<std::size_t> cell_of_state;             // bad state maps to nx * ny
    StateId bad_state = 0;
    std::vector<Point> controls;                        // per label id

    std::size_t num_cells() const { return nx * ny; }
    Box cell_box(std::size_t cell) const {
        const auto i = cell % nx, j = cell / nx;
        const double h = model.cell_size;
        return {model.domain.x_lo + static_cast<double>(i) * h, model.domain.x_lo + static_cast<double>(i + 1) * h,
                model.domain.y_lo + static_cast<double>(j) * h, model.domain.y_lo + static_cast<double>(j + 1) * h};
    }
    Point cell_center(std::size_t cell) const {
        const auto b = cell_box(cell);
        return {(b.x_lo + b.x_hi) / 2, (b.y_lo + b.y_hi) / 2};
    }
    /// Cell containing p, if p lies in the (half-open) domain.
    std::optional<std::size_t> cell_at(Point p) const {
        const double h = model.cell_size;
        const double fx = std::floor((p.x - model.domain.x_lo) / h), fy = std::floor((p.y - model.domain.y_lo) / h);
        if (fx < 0 || fy < 0 || fx >= static_cast<double>(nx) || fy >= static_cast<double>(ny)) return std::nullopt;
        return static_cast<std::size_t>(fx) + nx * static_cast<std::size_t>(fy);
    }
    /// State for p; the bad state when p is outside the safe cells.
    StateId state_at(Point p) const {
        auto c = cell_at(p);
        if (!c || !state_of_cell[*c]) return bad_state;
        return *state_of_cell[*c];
    }
};

/// Builds the grid transition system. States are the cells whose interior
/// avoids every obstacle, plus a trap state labeled model.bad_label. The
/// successors of cell c under control u are the cells meeting
/// c + u + W; any part of that box outside the safe cells adds the trap.
inline GridAbstraction build_grid_ts(const GridModel& m) {
    GridAbstraction g;
    g.model = m;
    const double h = m.cell_size;
    g.nx = static_cast<std::size_t>(std::llround(m.domain.width() / h));
    g.ny = static_cast<std::size_t>(std::llround(m.domain.height() / h));
    if (g.nx == 0 || g.ny == 0) throw PreconditionError("grid has no cells");

    TransitionSystemBuilder b;
    for (const auto& r : m.regions) b.add_prop(r.name);
    b.add_prop(m.bad_label);

    // Controls: quantized grid over the control box, x index major, snapped
    // to 1e-9 so that the zero input is exact.
    const auto steps = [&](double lo, double hi) {
        std::vector<double> v;
        const auto k = static_cast<long>(std::floor((hi - lo) / m.control_step + 1e-9));
        for (long i = 0; i <= k; ++i) v.push_back(std::round((lo + static_cast<double>(i) * m.control_step) * 1e9) / 1e9);
        return v;
    };
    const auto ux = steps(m.control.x_lo, m.control.x_hi), uy = steps(m.control.y_lo, m.control.y_hi);
    for (std::size_t i = 0; i < ux.size(); ++i)
        for (std::size_t j = 0; j < uy.size(); ++j) {
            b.add_label("u" + std::to_string(i) + "_" + std::to_string(j));
            g.controls.push_back({ux[i], uy[j]});
        }

    g.state_of_cell.assign(g.num_cells(), std::nullopt);
    std::vector<std::size_t> initial_cells;
    for (std::size_t c = 0; c < g.num_cells(); ++c) {
        const auto box = g.cell_box(c);
        const bool blocked = std::any_of(m.obstacles.begin(), m.obstacles.end(),
                                         [&](const Polygon& o) { return overlaps_interior(box, o); });
        if (blocked) continue;
        std::vector<std::string> props;
        const auto center = g.cell_center(c);
        for (const auto& r : m.regions)
            if (contains(r.shape, center)) {
                props.push_back(r.name);
                if (r.name == m.initial_region) initial_cells.push_back(c);
            }
        g.state_of_cell[c] = b.add_state("c" + std::to_string(c % g.nx) + "_" + std::to_string(c / g.nx), props);
        g.cell_of_state.push_back(c);
    }
    if (b.num_states() == 0) throw PreconditionError("grid has no obstacle-free cells");
    g.bad_state = b.add_state(m.bad_label, {m.bad_label});
    g.cell_of_state.push_back(g.num_cells());
    for (auto c : initial_cells) b.set_initial(*g.state_of_cell[c]);

    // Successor cells of the half-open box [lo, hi) in grid indices.
    auto index_range = [&](double lo, double hi, double origin, std::size_t count) {
        const long k_lo = static_cast<long>(std::floor((lo - origin) / h + 1e-9));
        const long k_hi = static_cast<long>(std::ceil((hi - origin) / h - 1e-9)) - 1;
        const bool outside = k_lo < 0 || k_hi >= static_cast<long>(count);
        return std::make_tuple(std::max(k_lo, 0L), std::min(k_hi, static_cast<long>(count) - 1), outside);
    };
    const auto num_states = static_cast<StateId>(b.num_states());
    std::vector<std::vector<std::tuple<StateId, LabelId, StateId>>> per_state(num_states);
    parallel_for(num_states - 1, [&](std::size_t s) {
        const auto box = g.cell_box(g.cell_of_state[s]);
        for (LabelId l = 0; l < g.controls.size(); ++l) {
            const auto u = g.controls[l];
            auto [i_lo, i_hi, out_x] = index_range(box.x_lo + u.x + m.disturbance.x_lo, box.x_hi + u.x + m.disturbance.x_hi,
                                                   m.domain.x_lo, g.nx);
            auto [j_lo, j_hi, out_y] = index_range(box.y_lo + u.y + m.disturbance.y_lo, box.y_hi + u.y + m.disturbance.y_hi,
                                                   m.domain.y_lo, g.ny);
            bool bad = out_x || out_y;
            for (long j = j_lo; j <= j_hi; ++j)
                for (long i = i_lo; i <= i_hi; ++i) {
                    const auto t = g.state_of_cell[static_cast<std::size_t>(i) + g.nx * static_cast<std::size_t>(j)];
                    if (t)
                        per_state[s].emplace_back(static_cast<StateId>(s), l, *t);
                    else
                        bad = true;
                }
            if (bad) per_state[s].emplace_back(static_cast<StateId>(s), l, g.bad_state);
        }
    });
    for (const auto& v : per_state)
        for (auto [s, l, t] : v) b.add_transition(s, l, t);
    for (LabelId l = 0; l < g.controls.size(); ++l) b.add_transition(g.bad_state, l, g.bad_state);
    g.ts = b.build();
    return g;
}

// --- simulation ----------------------------------------------------------------

struct TrajectoryRecord {
    std::size_t step = 0;
    Point x;
    std::optional<std::size_t> cell;
    std::optional<LabelId> label;
    Point u, w;
    std::vector<std::string> regions;
    bool failure = false;
};

struct Trajectory {
    std::uint64_t seed = 0;
    std::vector<TrajectoryRecord> records;
    bool failed = false;
};

/// Controller query used by simulate: given the observed state, returns the
/// permitted labels (the first call observes the start state).
using ControlQuery = std::function<std::vector<LabelId>(StateId observed, bool first)>;

/// Runs the continuous dynamics under a discrete controller. Each step
/// observes the cell, applies the lowest permitted label's control and a
/// disturbance drawn uniformly from the disturbance box. A step that leaves
/// the safe cells is recorded as a failure and ends the run.
inline Trajectory simulate(const GridAbstraction& g, const ControlQuery& control, Point start, std::size_t steps,
                           std::uint64_t seed, std::optional<Box> disturbance_override = std::nullopt) {
    Trajectory tr;
    tr.seed = seed;
    std::mt19937_64 rng(seed);
    const Box wbox = disturbance_override.value_or(g.model.disturbance);
    std::uniform_real_distribution<double> wx(wbox.x_lo, wbox.x_hi), wy(wbox.y_lo, wbox.y_hi);
    auto regions_at = [&](StateId s) {
        std::vector<std::string> r;
        for (auto p : g.ts.props_of(s)) r.push_back(g.ts.prop_name(p));
        return r;
    };
    Point x = start;
    if (g.state_at(x) == g.bad_state) throw PreconditionError("start point is not in a safe cell");
    for (std::size_t k = 0; k <= steps; ++k) {
        TrajectoryRecord rec;
        rec.step = k;
        rec.x = x;
        const auto s = g.state_at(x);
        if (s == g.bad_state) {
            rec.failure = true;
            rec.regions = {g.model.bad_label};
            tr.records.push_back(std::move(rec));
            tr.failed = true;
            break;
        }
        rec.cell = g.cell_of_state[s];
        rec.regions = regions_at(s);
        if (k == steps) {
            tr.records.push_back(std::move(rec));
            break;
        }
        const auto labels = control(s, k == 0);
        if (labels.empty()) throw ExecutorError("controller returned no label at " + g.ts.state_name(s));
        rec.label = labels.front();
        rec.u = g.controls.at(*rec.label);
        rec.w = {wx(rng), wy(rng)};
        x = {x.x + rec.u.x + rec.w.x, x.y + rec.u.y + rec.w.y};
        tr.records.push_back(std::move(rec));
    }
    return tr;
}

/// CSV with header step,x,y,cell,label,u1,u2,w1,w2,regions. Regions are
/// joined by ';'; a failure record has an empty cell.
inline std::string trajectory_csv(const GridAbstraction& g, const Trajectory& tr) {
    std::ostringstream out;
    out.precision(6);
    out << std::fixed;
    out << "step,x,y,cell,label,u1,u2,w1,w2,regions\n";
    for (const auto& r : tr.records) {
        out << r.step << ',' << r.x.x << ',' << r.x.y << ',';
        if (r.cell) out << 'c' << (*r.cell % g.nx) << '_' << (*r.cell / g.nx);
        out << ',';
        if (r.label) out << g.ts.label_name(*r.label);
        out << ',' << r.u.x << ',' << r.u.y << ',' << r.w.x << ',' << r.w.y << ',';
        for (std::size_t i = 0; i < r.regions.size(); ++i) out << (i ? ";" : "") << r.regions[i];
        out << '\n';
    }
    return out.str();
}

}  // namespace rsb::grid

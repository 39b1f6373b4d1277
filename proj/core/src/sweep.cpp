#include "qsync/sweep.hpp"

#include "qsync/meanfield.hpp"
#include "qsync/spectra.hpp"
#include "qsync/steady_state.hpp"
#include "qsync/sync_measures.hpp"
#include "qsync/trajectories.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <set>
#include <sstream>
#include <thread>

#ifndef QSYNC_VERSION
#define QSYNC_VERSION "unknown"
#endif

namespace qsync {

using nlohmann::json;

namespace {

constexpr Real kNaN = std::numeric_limits<Real>::quiet_NaN();

// =============================================================================
// Recipe parsing
// =============================================================================

void check_keys(const json& j, const std::vector<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) {
        throw ConfigError(where + ": expected an object");
    }
    for (const auto& [key, value] : j.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            std::string list;
            for (const auto& a : allowed) {
                list += (list.empty() ? "" : ", ") + a;
            }
            throw ConfigError("unknown field '" + where + (where.empty() ? "" : ".") + key +
                              "' (allowed: " + list + ")");
        }
    }
}

template <class T>
void read(const json& obj, const std::string& key, T& out, const std::string& where) {
    const auto it = obj.find(key);
    if (it == obj.end()) {
        return;
    }
    try {
        if constexpr (std::is_same_v<T, bool>) {
            if (!it->is_boolean()) {
                throw ConfigError("");
            }
        } else if constexpr (std::is_arithmetic_v<T>) {
            if (!it->is_number()) {
                throw ConfigError("");
            }
            if constexpr (std::is_integral_v<T>) {
                if (!it->is_number_integer() && !it->is_number_unsigned()) {
                    throw ConfigError("");
                }
            }
        } else if (!it->is_string()) {
            throw ConfigError("");
        }
        out = it->get<T>();
    } catch (const std::exception&) {
        const char* kind = std::is_same_v<T, bool>       ? "a boolean"
                           : std::is_integral_v<T>       ? "an integer"
                           : std::is_arithmetic_v<T>     ? "a number"
                                                         : "a string";
        throw ConfigError("field '" + where + key + "' must be " + kind + ", got " + it->dump());
    }
}

SweepTask task_from_string(const std::string& s) {
    for (SweepTask t : {SweepTask::steady, SweepTask::p2map, SweepTask::moments, SweepTask::spectrum,
                        SweepTask::meanfield_map, SweepTask::trajectory}) {
        if (to_string(t) == s) {
            return t;
        }
    }
    throw ConfigError("field 'task': unknown task '" + s +
                      "' (steady, p2map, moments, spectrum, meanfield_map, trajectory)");
}

AxisScale scale_from_string(const std::string& s, const std::string& where) {
    if (s == "linear") {
        return AxisScale::linear;
    }
    if (s == "log10" || s == "log") {
        return AxisScale::log10;
    }
    throw ConfigError("field '" + where + "scale': expected linear or log10, got '" + s + "'");
}

void line_column(const std::string& text, std::size_t byte, std::size_t& line, std::size_t& col) {
    line = 1;
    col = 1;
    const std::size_t end = std::min(byte > 0 ? byte - 1 : 0, text.size());
    for (std::size_t i = 0; i < end; ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
}

template <class Json = json>
Json parse_json(const std::string& text, const std::string& source) {
    try {
        return Json::parse(text);
    } catch (const json::parse_error& e) {
        std::size_t line = 0;
        std::size_t col = 0;
        line_column(text, e.byte, line, col);
        std::string what = e.what();
        // nlohmann prefixes "[json.exception...] parse error at line L, column C: ".
        const auto pos = what.find(": ", what.find("parse error"));
        throw ConfigError(source + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " +
                          (pos == std::string::npos ? what : what.substr(pos + 2)));
    }
}

void apply_override(json& root, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw ConfigError("override '" + assignment + "' is not of the form path=value");
    }
    const std::string path = assignment.substr(0, eq);
    const std::string raw = assignment.substr(eq + 1);
    std::string pointer = "/";
    for (char c : path) {
        pointer += (c == '.') ? '/' : c;
    }
    json value;
    try {
        value = json::parse(raw);
    } catch (const json::parse_error&) {
        value = raw;
    }
    try {
        root[json::json_pointer(pointer)] = value;
    } catch (const json::exception& e) {
        throw ConfigError("override '" + assignment + "': " + e.what());
    }
}

Axis axis_from_json(const json& j, const std::string& where) {
    check_keys(j, {"name", "scale", "min", "max", "n_points"}, where);
    Axis a;
    std::string scale = "linear";
    read(j, "name", a.name, where + ".");
    read(j, "scale", scale, where + ".");
    read(j, "min", a.min, where + ".");
    read(j, "max", a.max, where + ".");
    read(j, "n_points", a.n_points, where + ".");
    a.scale = scale_from_string(scale, where + ".");
    return a;
}

SolverControls solver_from_json(const json& j) {
    check_keys(j,
               {"n_trunc", "steady_method", "residual_tol", "phase_grid", "moment_order",
                "correlation", "tau_max", "n_tau", "omega_max", "mf_model", "members", "mf_t_end",
                "window_start", "window_length", "time_scale", "pin_gain", "traj_t_end", "traj_dt",
                "record_stride", "memory_budget_mb"},
               "solver");
    SolverControls s;
    const std::string w = "solver.";
    read(j, "n_trunc", s.n_trunc, w);
    read(j, "steady_method", s.steady_method, w);
    read(j, "residual_tol", s.residual_tol, w);
    read(j, "phase_grid", s.phase_grid, w);
    read(j, "moment_order", s.moment_order, w);
    read(j, "correlation", s.correlation, w);
    read(j, "tau_max", s.tau_max, w);
    read(j, "n_tau", s.n_tau, w);
    read(j, "omega_max", s.omega_max, w);
    read(j, "mf_model", s.mf_model, w);
    read(j, "members", s.members, w);
    read(j, "mf_t_end", s.mf_t_end, w);
    read(j, "window_start", s.window_start, w);
    read(j, "window_length", s.window_length, w);
    read(j, "time_scale", s.time_scale, w);
    read(j, "pin_gain", s.pin_gain, w);
    read(j, "traj_t_end", s.traj_t_end, w);
    read(j, "traj_dt", s.traj_dt, w);
    read(j, "record_stride", s.record_stride, w);
    read(j, "memory_budget_mb", s.memory_budget_mb, w);
    return s;
}

json solver_to_json(const SolverControls& s) {
    return json{{"n_trunc", s.n_trunc},
                {"steady_method", s.steady_method},
                {"residual_tol", s.residual_tol},
                {"phase_grid", s.phase_grid},
                {"moment_order", s.moment_order},
                {"correlation", s.correlation},
                {"tau_max", s.tau_max},
                {"n_tau", s.n_tau},
                {"omega_max", s.omega_max},
                {"mf_model", s.mf_model},
                {"members", s.members},
                {"mf_t_end", s.mf_t_end},
                {"window_start", s.window_start},
                {"window_length", s.window_length},
                {"time_scale", s.time_scale},
                {"pin_gain", s.pin_gain},
                {"traj_t_end", s.traj_t_end},
                {"traj_dt", s.traj_dt},
                {"record_stride", s.record_stride},
                {"memory_budget_mb", s.memory_budget_mb}};
}

json spec_to_json(const SweepSpec& s, bool with_runtime) {
    json axes = json::array();
    for (const Axis& a : s.axes) {
        axes.push_back({{"name", a.name},
                        {"scale", to_string(a.scale)},
                        {"min", a.min},
                        {"max", a.max},
                        {"n_points", a.n_points}});
    }
    json j{{"schema_version", s.schema_version},
           {"task", to_string(s.task)},
           {"axes", axes},
           {"fixed", s.fixed},
           {"seed", s.seed},
           {"solver", solver_to_json(s.solver)}};
    if (with_runtime) {
        j["output"] = s.output;
        j["format"] = s.format;
        j["threads"] = s.threads;
    }
    return j;
}

// =============================================================================
// Grid points
// =============================================================================

struct Point {
    SystemParams params;
    Real g_minus = 0.0;
};

Point make_point(const SweepSpec& spec, const std::vector<Real>& axis_values) {
    std::map<std::string, Real> v = spec.fixed;
    for (std::size_t k = 0; k < spec.axes.size(); ++k) {
        v[spec.axes[k].name] = axis_values[k];
    }
    Point pt;
    SystemParams& p = pt.params;
    const auto set = [&v](const char* name, Real& field) {
        const auto it = v.find(name);
        if (it != v.end()) {
            field = it->second;
        }
    };
    set("gamma_g_A", p.gamma_g_A);
    set("gamma_g_B", p.gamma_g_B);
    set("gamma_d_A", p.gamma_d_A);
    set("gamma_d_B", p.gamma_d_B);
    set("g_AB", p.g_AB);
    set("phi", p.phi);
    set("g_tilde", p.g_tilde);
    set("omega_A", p.omega_A);
    pt.g_minus = p.g_AB;
    set("g_minus", pt.g_minus);
    return pt;
}

std::vector<Cell> param_cells(const Point& pt) {
    const SystemParams& p = pt.params;
    return {p.gamma_g_A, p.gamma_g_B, p.gamma_d_A, p.gamma_d_B, p.g_AB,
            p.phi,       p.g_tilde,   p.omega_A,   pt.g_minus};
}

std::string status_name(ErrorCategory c) {
    switch (c) {
        case ErrorCategory::argument: return "argument_error";
        case ErrorCategory::config: return "config_error";
        case ErrorCategory::numerical: return "numerical_error";
        case ErrorCategory::resource: return "resource_error";
    }
    return "error";
}

std::int64_t status_code(ErrorCategory c) {
    switch (c) {
        case ErrorCategory::argument:
        case ErrorCategory::config: return 2;
        case ErrorCategory::numerical: return 3;
        case ErrorCategory::resource: return 4;
    }
    return 1;
}

// =============================================================================
// Tasks
// =============================================================================

using Row = std::vector<Cell>;

void push_complex(Row& r, Complex z) {
    r.emplace_back(z.real());
    r.emplace_back(z.imag());
    r.emplace_back(std::abs(z));
}

void push_complex_names(std::vector<std::string>& c, const std::string& base) {
    c.push_back(base + "_re");
    c.push_back(base + "_im");
    c.push_back(base + "_abs");
}

const std::vector<std::string>& diagnostic_columns() {
    static const std::vector<std::string> c{"trace_deviation", "hermiticity_defect", "min_eigenvalue",
                                            "top_fock_population", "residual", "iterations",
                                            "method"};
    return c;
}

void push_diagnostics(Row& r, const StateDiagnostics& d) {
    r.emplace_back(d.trace_deviation);
    r.emplace_back(d.hermiticity_defect);
    r.emplace_back(d.min_eigenvalue);
    r.emplace_back(d.top_fock_population);
    r.emplace_back(d.residual);
    r.emplace_back(static_cast<std::int64_t>(d.iterations));
    r.emplace_back(d.method);
}

std::vector<std::string> steady_columns() {
    std::vector<std::string> c{"n_A", "n_B"};
    push_complex_names(c, "m1_A");
    push_complex_names(c, "m1_B");
    push_complex_names(c, "m1_AB");
    push_complex_names(c, "m2_AB");
    c.insert(c.end(), diagnostic_columns().begin(), diagnostic_columns().end());
    return c;
}

std::vector<std::string> task_columns(const SweepSpec& spec) {
    switch (spec.task) {
        case SweepTask::steady: return steady_columns();
        case SweepTask::p2map: {
            auto c = steady_columns();
            c.insert(c.end(), {"p2_pi", "p2_zero", "p2_max", "n_maxima", "max1_phi", "max2_phi"});
            return c;
        }
        case SweepTask::moments: {
            std::vector<std::string> c{"n_A", "n_B"};
            for (int n = 1; n <= spec.solver.moment_order; ++n) {
                const std::string k = std::to_string(n);
                push_complex_names(c, "m" + k + "_A");
                push_complex_names(c, "m" + k + "_B");
                push_complex_names(c, "m" + k + "_AB");
            }
            c.insert(c.end(), diagnostic_columns().begin(), diagnostic_columns().end());
            return c;
        }
        case SweepTask::spectrum:
            return {"omega", "S", "is_maximum", "n_ss", "coherent_weight", "integral_over_2pi",
                    "decay_ratio"};
        case SweepTask::meanfield_map:
            return {"label", "label_counts", "s_ori_0", "s_ori_1", "s_ori_2", "s_rot_0", "s_rot_1",
                    "s_rot_2", "max_locked_rhs_norm"};
        case SweepTask::trajectory:
            return {"t", "n_A", "n_B", "m1_A_re", "m1_A_im", "m1_B_re", "m1_B_im", "m1_AB_re",
                    "m1_AB_im", "arg_AB", "seed", "stream", "min_eigenvalue"};
    }
    return {};
}

SteadyOptions steady_options(const SweepSpec& spec) {
    SteadyOptions o;
    o.method = steady_method_from_string(spec.solver.steady_method);
    o.residual_tol = spec.solver.residual_tol;
    return o;
}

DensityMatrix steady_of(const Point& pt, const SweepSpec& spec) {
    pt.params.validate();
    const FockSpace space(spec.solver.n_trunc, 2);
    return solve_steady(pt.params, space, steady_options(spec));
}

Row steady_row(const DensityMatrix& rho) {
    const MomentSet m = moments(rho, 2);
    const FockSpace& s = rho.space();
    Row r;
    r.emplace_back(rho.expect(number(s, 0)).real());
    r.emplace_back(rho.expect(number(s, 1)).real());
    push_complex(r, m.m(0, 1));
    push_complex(r, m.m(1, 1));
    push_complex(r, m.m_rel(1));
    push_complex(r, m.m_rel(2));
    push_diagnostics(r, rho.diagnostics());
    return r;
}

std::vector<Row> run_steady(const Point& pt, const SweepSpec& spec) {
    return {steady_row(steady_of(pt, spec))};
}

std::vector<Row> run_p2map(const Point& pt, const SweepSpec& spec) {
    const DensityMatrix rho = steady_of(pt, spec);
    Row r = steady_row(rho);
    const PhaseDistribution p2 = p2_relative(rho, spec.solver.phase_grid);
    const std::vector<Maximum> peaks = merged_maxima(p2);
    r.emplace_back(p2.values[static_cast<std::size_t>(p2.size() / 2)]);
    r.emplace_back(p2.values[0]);
    r.emplace_back(*std::max_element(p2.values.begin(), p2.values.end()));
    r.emplace_back(static_cast<std::int64_t>(peaks.size()));
    std::vector<Maximum> by_value = peaks;
    std::sort(by_value.begin(), by_value.end(),
              [](const Maximum& a, const Maximum& b) { return a.value > b.value; });
    r.emplace_back(by_value.size() > 0 ? by_value[0].position : kNaN);
    r.emplace_back(by_value.size() > 1 ? by_value[1].position : kNaN);
    return {r};
}

std::vector<Row> run_moments(const Point& pt, const SweepSpec& spec) {
    const DensityMatrix rho = steady_of(pt, spec);
    const MomentSet m = moments(rho, spec.solver.moment_order);
    const FockSpace& s = rho.space();
    Row r;
    r.emplace_back(rho.expect(number(s, 0)).real());
    r.emplace_back(rho.expect(number(s, 1)).real());
    for (int n = 1; n <= spec.solver.moment_order; ++n) {
        push_complex(r, m.m(0, n));
        push_complex(r, m.m(1, n));
        push_complex(r, m.m_rel(n));
    }
    push_diagnostics(r, rho.diagnostics());
    return {r};
}

std::vector<Row> run_spectrum(const Point& pt, const SweepSpec& spec) {
    pt.params.validate();
    const FockSpace space(spec.solver.n_trunc, 2);
    const Superoperator L = build_two_osc(pt.params, space);
    const DensityMatrix rho = solve_steady(pt.params, space, steady_options(spec));
    const CorrelationKind kind = correlation_kind_from_string(spec.solver.correlation);
    CorrelationOptions co;
    co.tau_max = spec.solver.tau_max;
    co.n_tau = spec.solver.n_tau;
    const CorrelationSeries c = correlation(L, rho, kind, co);
    SpectrumOptions so;
    so.omega_max = spec.solver.omega_max;
    const Spectrum s = spectrum(c, so);
    const MaximaResult peaks = spectrum_maxima(s);
    const CorrelationOperators ops = correlation_operators(space, kind);
    const Real n_ss = rho.expect(ops.x * ops.y).real();
    std::vector<bool> is_max(s.omega.size(), false);
    for (const Maximum& m : peaks.maxima) {
        const auto k = static_cast<std::size_t>(std::lround((m.position - s.omega.front()) / s.d_omega));
        if (k < is_max.size()) {
            is_max[k] = true;
        }
    }
    std::vector<Row> rows;
    rows.reserve(s.omega.size());
    const Real integral = s.integral_over_2pi();
    for (std::size_t k = 0; k < s.omega.size(); ++k) {
        rows.push_back({s.omega[k], s.values[k], static_cast<std::int64_t>(is_max[k] ? 1 : 0), n_ss,
                        s.coherent_weight, integral, c.decay_ratio});
    }
    return rows;
}

std::vector<Row> run_meanfield(const Point& pt, const SweepSpec& spec, std::uint64_t stream) {
    const SolverControls& sc = spec.solver;
    MFModel model;
    if (sc.mf_model == "chain") {
        ChainParams cp;
        cp.g_minus = pt.g_minus;
        cp.g_tilde = pt.params.g_tilde;
        // Site C carries the rates of B.
        cp.gamma_g = {pt.params.gamma_g_A, pt.params.gamma_g_B, pt.params.gamma_g_B};
        cp.gamma_d = {pt.params.gamma_d_A, pt.params.gamma_d_B, pt.params.gamma_d_B};
        model = chain_model(sc.pin_gain ? cp.pinned() : cp);
    } else {
        model = two_oscillator_model(sc.pin_gain ? with_pinned_gain(pt.params) : pt.params);
    }
    EnsembleOptions eo;
    eo.members = sc.members;
    eo.seed = spec.seed;
    eo.stream = stream;
    eo.controls.t_end = sc.mf_t_end;
    eo.window = Window{sc.window_start, sc.window_length};
    eo.time_scale = sc.time_scale;
    const EnsembleResult res = classify(model, eo);
    std::string counts;
    for (const auto& [label, n] : res.counts) {
        counts += (counts.empty() ? "" : ";") + to_string(label) + ":" + std::to_string(n);
    }
    Row r{to_string(res.label), counts};
    for (std::size_t j = 0; j < 3; ++j) {
        r.emplace_back(j < res.mean_s_ori.size() ? res.mean_s_ori[j] : kNaN);
    }
    for (std::size_t j = 0; j < 3; ++j) {
        r.emplace_back(j < res.mean_s_rot.size() ? res.mean_s_rot[j] : kNaN);
    }
    r.emplace_back(res.max_locked_rhs_norm);
    return {r};
}

std::vector<Row> run_trajectory(const Point& pt, const SweepSpec& spec, std::uint64_t stream) {
    const FockSpace space(spec.solver.n_trunc, 2);
    TrajectoryOptions o;
    o.t_end = spec.solver.traj_t_end;
    o.dt = spec.solver.traj_dt;
    o.record_stride = spec.solver.record_stride;
    o.seed = spec.seed;
    o.stream = stream;
    const TrajectoryRecord rec = simulate(pt.params, space, o);
    std::vector<Row> rows;
    for (std::size_t i = 0; i < rec.t.size(); ++i) {
        rows.push_back({rec.t[i], rec.n_A[i], rec.n_B[i], rec.m1_A[i].real(), rec.m1_A[i].imag(),
                        rec.m1_B[i].real(), rec.m1_B[i].imag(), rec.m1_AB[i].real(),
                        rec.m1_AB[i].imag(), rec.arg_AB[i], static_cast<std::int64_t>(rec.seed),
                        static_cast<std::int64_t>(rec.stream), rec.min_eigenvalue});
    }
    return rows;
}

std::vector<Row> run_task(const Point& pt, const SweepSpec& spec, std::size_t index) {
    switch (spec.task) {
        case SweepTask::steady: return run_steady(pt, spec);
        case SweepTask::p2map: return run_p2map(pt, spec);
        case SweepTask::moments: return run_moments(pt, spec);
        case SweepTask::spectrum: return run_spectrum(pt, spec);
        case SweepTask::meanfield_map: return run_meanfield(pt, spec, index);
        case SweepTask::trajectory: return run_trajectory(pt, spec, index);
    }
    return {};
}

// =============================================================================
// Cell formatting
// =============================================================================

std::string format_real(Real x) {
    if (std::isnan(x)) {
        return "nan";
    }
    if (std::isinf(x)) {
        return x > 0 ? "inf" : "-inf";
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) {
        return s;
    }
    std::string out = "\"";
    for (char c : s) {
        out += c;
        if (c == '"') {
            out += '"';
        }
    }
    return out + "\"";
}

std::string format_cell(const Cell& c) {
    if (const auto* r = std::get_if<Real>(&c)) {
        return format_real(*r);
    }
    if (const auto* i = std::get_if<std::int64_t>(&c)) {
        return std::to_string(*i);
    }
    return csv_escape(std::get<std::string>(c));
}

Cell parse_cell(const std::string& s) {
    if (s.empty()) {
        return std::string();
    }
    if (s == "nan" || s == "-nan") {
        return kNaN;
    }
    if (s == "inf") {
        return std::numeric_limits<Real>::infinity();
    }
    if (s == "-inf") {
        return -std::numeric_limits<Real>::infinity();
    }
    const char* b = s.data();
    const char* e = s.data() + s.size();
    if (s.find_first_of(".eE") == std::string::npos) {
        std::int64_t i = 0;
        const auto [p, ec] = std::from_chars(b, e, i);
        if (ec == std::errc() && p == e) {
            return i;
        }
    }
    Real x = 0.0;
    const auto [p, ec] = std::from_chars(b, e, x);
    if (ec == std::errc() && p == e) {
        return x;
    }
    return s;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

json cell_to_json(const Cell& c) {
    if (const auto* r = std::get_if<Real>(&c)) {
        return std::isfinite(*r) ? json(*r) : json(nullptr);
    }
    if (const auto* i = std::get_if<std::int64_t>(&c)) {
        return *i;
    }
    return std::get<std::string>(c);
}

Cell cell_from_json(const json& j) {
    if (j.is_null()) {
        return kNaN;
    }
    if (j.is_number_integer() || j.is_number_unsigned()) {
        return j.get<std::int64_t>();
    }
    if (j.is_number()) {
        return j.get<Real>();
    }
    if (j.is_string()) {
        return j.get<std::string>();
    }
    return j.dump();
}

bool is_wall_time(const std::string& key) { return key == "wall_time_s"; }

}  // namespace

// =============================================================================
// Public API
// =============================================================================

std::string to_string(SweepTask task) {
    switch (task) {
        case SweepTask::steady: return "steady";
        case SweepTask::p2map: return "p2map";
        case SweepTask::moments: return "moments";
        case SweepTask::spectrum: return "spectrum";
        case SweepTask::meanfield_map: return "meanfield_map";
        case SweepTask::trajectory: return "trajectory";
    }
    return "unknown";
}

std::string to_string(AxisScale scale) {
    return scale == AxisScale::log10 ? "log10" : "linear";
}

std::vector<Real> Axis::values() const {
    std::vector<Real> v(static_cast<std::size_t>(std::max(n_points, 0)));
    const int n = n_points;
    for (int i = 0; i < n; ++i) {
        const Real s = n > 1 ? static_cast<Real>(i) / static_cast<Real>(n - 1) : 0.0;
        if (scale == AxisScale::log10) {
            const Real lo = std::log10(min);
            const Real hi = std::log10(max);
            v[static_cast<std::size_t>(i)] = std::pow(10.0, lo + s * (hi - lo));
        } else {
            v[static_cast<std::size_t>(i)] = min + s * (max - min);
        }
    }
    if (n > 1) {
        v.front() = min;
        v.back() = max;
    }
    return v;
}

const std::vector<std::string>& sweep_parameter_names() {
    static const std::vector<std::string> names{"gamma_g_A", "gamma_g_B", "gamma_d_A",
                                                "gamma_d_B", "g_AB",      "phi",
                                                "g_tilde",   "omega_A",   "g_minus"};
    return names;
}

void SweepSpec::validate() const {
    if (schema_version != kSweepSchemaVersion) {
        throw ConfigError("field 'schema_version': unsupported version " +
                          std::to_string(schema_version) + " (this build reads " +
                          std::to_string(kSweepSchemaVersion) + ")");
    }
    const auto& names = sweep_parameter_names();
    const auto known = [&names](const std::string& n) {
        return std::find(names.begin(), names.end(), n) != names.end();
    };
    if (axes.size() > 2) {
        throw ConfigError("field 'axes': at most two axes are supported");
    }
    std::set<std::string> seen;
    for (std::size_t k = 0; k < axes.size(); ++k) {
        const Axis& a = axes[k];
        const std::string w = "axes." + std::to_string(k) + ".";
        if (!known(a.name)) {
            throw ConfigError("field '" + w + "name': '" + a.name + "' is not a model parameter");
        }
        if (!seen.insert(a.name).second) {
            throw ConfigError("field '" + w + "name': '" + a.name + "' is swept twice");
        }
        if (fixed.count(a.name) != 0) {
            throw ConfigError("field '" + w + "name': '" + a.name + "' is also listed in 'fixed'");
        }
        if (a.n_points < 2) {
            throw ConfigError("field '" + w + "n_points' must be at least 2");
        }
        if (!std::isfinite(a.min) || !std::isfinite(a.max)) {
            throw ConfigError("field '" + w + "min/max' must be finite");
        }
        if (a.scale == AxisScale::log10 && !(a.min > 0.0 && a.max > 0.0)) {
            throw ConfigError("field '" + w + "min/max' must be positive on a log10 axis");
        }
    }
    for (const auto& [name, value] : fixed) {
        if (!known(name)) {
            throw ConfigError("field 'fixed." + name + "' is not a model parameter");
        }
        if (!std::isfinite(value)) {
            throw ConfigError("field 'fixed." + name + "' must be finite");
        }
    }
    if (format != "csv" && format != "json") {
        throw ConfigError("field 'format': expected csv or json, got '" + format + "'");
    }
    if (threads < 1) {
        throw ConfigError("field 'threads' must be at least 1");
    }
    const SolverControls& s = solver;
    if (s.n_trunc < 3) {
        throw ConfigError("field 'solver.n_trunc' must be at least 3");
    }
    try {
        (void)steady_method_from_string(s.steady_method);
    } catch (const Error& e) {
        throw ConfigError(std::string("field 'solver.steady_method': ") + e.what());
    }
    try {
        (void)correlation_kind_from_string(s.correlation);
    } catch (const Error& e) {
        throw ConfigError(std::string("field 'solver.correlation': ") + e.what());
    }
    if (!(s.residual_tol > 0.0)) {
        throw ConfigError("field 'solver.residual_tol' must be positive");
    }
    if (s.phase_grid < 8 || s.phase_grid % 2 != 0) {
        throw ConfigError("field 'solver.phase_grid' must be even and at least 8");
    }
    if (s.moment_order < 1 || s.moment_order >= s.n_trunc) {
        throw ConfigError("field 'solver.moment_order' must lie in [1, n_trunc - 1]");
    }
    if (!(s.tau_max > 0.0) || s.n_tau < 16) {
        throw ConfigError("fields 'solver.tau_max' > 0 and 'solver.n_tau' >= 16 are required");
    }
    if (s.mf_model != "two" && s.mf_model != "chain") {
        throw ConfigError("field 'solver.mf_model': expected two or chain, got '" + s.mf_model + "'");
    }
    if (s.members < 1) {
        throw ConfigError("field 'solver.members' must be at least 1");
    }
    if (!(s.window_length > 0.0) || !(s.window_start >= 0.0) || !(s.time_scale > 0.0)) {
        throw ConfigError("fields 'solver.window_*' and 'solver.time_scale' must be positive");
    }
    if (!(s.mf_t_end >= s.window_start + s.window_length)) {
        throw ConfigError("field 'solver.mf_t_end' must cover the averaging window");
    }
    if (!(s.traj_dt > 0.0) || !(s.traj_t_end >= 0.0) || s.record_stride < 1) {
        throw ConfigError("fields 'solver.traj_dt' > 0, 'solver.traj_t_end' >= 0 and "
                          "'solver.record_stride' >= 1 are required");
    }
    if (!(s.memory_budget_mb > 0.0)) {
        throw ConfigError("field 'solver.memory_budget_mb' must be positive");
    }
}

std::string SweepSpec::to_json() const { return spec_to_json(*this, true).dump(2); }

SweepSpec parse_sweep_spec(const std::string& text, const std::vector<std::string>& overrides,
                           const std::string& source) {
    json j = text.find_first_not_of(" \t\r\n") == std::string::npos ? json::object()
                                                                      : parse_json(text, source);
    if (!j.is_object()) {
        throw ConfigError(source + ": the recipe must be a JSON object");
    }
    for (const std::string& o : overrides) {
        apply_override(j, o);
    }
    check_keys(j,
               {"schema_version", "task", "axes", "fixed", "output", "format", "seed", "threads",
                "solver"},
               "");
    SweepSpec s;
    read(j, "schema_version", s.schema_version, "");
    std::string task = to_string(s.task);
    read(j, "task", task, "");
    s.task = task_from_string(task);
    if (const auto it = j.find("axes"); it != j.end()) {
        if (!it->is_array()) {
            throw ConfigError("field 'axes' must be an array");
        }
        for (std::size_t k = 0; k < it->size(); ++k) {
            s.axes.push_back(axis_from_json((*it)[k], "axes." + std::to_string(k)));
        }
    }
    if (const auto it = j.find("fixed"); it != j.end()) {
        if (!it->is_object()) {
            throw ConfigError("field 'fixed' must be an object");
        }
        for (const auto& [key, value] : it->items()) {
            if (!value.is_number()) {
                throw ConfigError("field 'fixed." + key + "' must be a number, got " + value.dump());
            }
            s.fixed[key] = value.get<Real>();
        }
    }
    read(j, "output", s.output, "");
    read(j, "format", s.format, "");
    read(j, "seed", s.seed, "");
    read(j, "threads", s.threads, "");
    if (const auto it = j.find("solver"); it != j.end()) {
        s.solver = solver_from_json(*it);
    }
    s.validate();
    return s;
}

std::string sweep_schema() {
    std::ostringstream o;
    o << "sweep recipe, schema_version " << kSweepSchemaVersion << " (JSON object)\n"
      << "  schema_version   int      must be " << kSweepSchemaVersion << "\n"
      << "  task             string   steady | p2map | moments | spectrum | meanfield_map | trajectory\n"
      << "  axes             array    0..2 axes, the first is the outer loop\n"
      << "    name           string   model parameter (see below)\n"
      << "    scale          string   linear | log10            (default linear)\n"
      << "    min, max       number   end points, both included; positive on log10 axes\n"
      << "    n_points       int      >= 2\n"
      << "  fixed            object   parameter -> value for everything not swept\n"
      << "  output           string   output file; empty or \"-\" is stdout\n"
      << "  format           string   csv | json                  (default csv)\n"
      << "  seed             uint     global seed; stream = grid point index (default 1)\n"
      << "  threads          int      worker threads over grid points (default 1)\n"
      << "  solver           object\n"
      << "    n_trunc          int    Fock levels per oscillator (default 12)\n"
      << "    steady_method    string auto | dense | direct | krylov\n"
      << "    residual_tol     number certificate on ||L rho||/||rho|| (default 1e-10)\n"
      << "    phase_grid       int    points of the relative-phase grid, even (default 720)\n"
      << "    moment_order     int    highest moment for task moments (default 2)\n"
      << "    correlation      string AA | BB | ABAB              (spectrum)\n"
      << "    tau_max          number correlation window (default 200)\n"
      << "    n_tau            int    correlation intervals (default 16384)\n"
      << "    omega_max        number spectrum crop |omega| <= omega_max (default 3)\n"
      << "    mf_model         string two | chain                 (meanfield_map)\n"
      << "    members          int    random initial states per point (default 100)\n"
      << "    mf_t_end         number integration time (default 500)\n"
      << "    window_start     number averaging window start (default 300)\n"
      << "    window_length    number averaging window length (default 200)\n"
      << "    time_scale       number stretches t_end, sampling and window (default 1)\n"
      << "    pin_gain         bool   set gamma_g = gamma_d + 2 g_tilde (default true)\n"
      << "    traj_t_end       number trajectory length (default 10)\n"
      << "    traj_dt          number trajectory step (default 1e-3)\n"
      << "    record_stride    int    steps between records (default 100)\n"
      << "    memory_budget_mb number refuse sweeps estimated above this (default 4096)\n"
      << "parameters: ";
    for (const auto& n : sweep_parameter_names()) {
        o << n << ' ';
    }
    o << "\n  g_minus (chain only) defaults to g_AB.\n"
      << "overrides: --set path=value, e.g. --set solver.n_trunc=8 --set axes.0.n_points=11\n";
    return o.str();
}

// =============================================================================
// ResultTable
// =============================================================================

int ResultTable::column(const std::string& name) const {
    const auto it = std::find(columns.begin(), columns.end(), name);
    return it == columns.end() ? -1 : static_cast<int>(it - columns.begin());
}

std::string ResultTable::meta(const std::string& key, const std::string& fallback) const {
    for (const auto& [k, v] : metadata) {
        if (k == key) {
            return v;
        }
    }
    return fallback;
}

Real ResultTable::number(std::size_t row, int col) const {
    if (col < 0 || row >= rows.size() || static_cast<std::size_t>(col) >= rows[row].size()) {
        return kNaN;
    }
    const Cell& c = rows[row][static_cast<std::size_t>(col)];
    if (const auto* r = std::get_if<Real>(&c)) {
        return *r;
    }
    if (const auto* i = std::get_if<std::int64_t>(&c)) {
        return static_cast<Real>(*i);
    }
    return kNaN;
}

std::string ResultTable::to_csv(bool with_wall_time) const {
    std::ostringstream o;
    for (const auto& [k, v] : metadata) {
        if (with_wall_time || !is_wall_time(k)) {
            o << "# " << k << ": " << v << '\n';
        }
    }
    for (std::size_t c = 0; c < columns.size(); ++c) {
        o << (c ? "," : "") << csv_escape(columns[c]);
    }
    o << '\n';
    for (const auto& row : rows) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            o << (c ? "," : "") << format_cell(row[c]);
        }
        o << '\n';
    }
    return o.str();
}

std::string ResultTable::to_json(bool with_wall_time) const {
    // Ordered so that metadata keeps its order across CSV and JSON.
    nlohmann::ordered_json meta_obj = nlohmann::ordered_json::object();
    for (const auto& [k, v] : metadata) {
        if (with_wall_time || !is_wall_time(k)) {
            meta_obj[k] = v;
        }
    }
    json rows_arr = json::array();
    for (const auto& row : rows) {
        json r = json::array();
        for (const Cell& c : row) {
            r.push_back(cell_to_json(c));
        }
        rows_arr.push_back(std::move(r));
    }
    const nlohmann::ordered_json j{{"schema_version", kSweepSchemaVersion},
                 {"metadata", meta_obj},
                 {"columns", columns},
                 {"rows", rows_arr}};
    return j.dump() + "\n";
}

ResultTable ResultTable::from_csv(const std::string& text) {
    ResultTable t;
    std::istringstream in(text);
    std::string line;
    bool header = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        if (!header && line[0] == '#') {
            const std::string body = line.substr(line.find_first_not_of("# "));
            const auto colon = body.find(": ");
            if (colon != std::string::npos) {
                t.metadata.emplace_back(body.substr(0, colon), body.substr(colon + 2));
            }
            continue;
        }
        if (!header) {
            t.columns = split_csv_line(line);
            header = true;
            continue;
        }
        const std::vector<std::string> fields = split_csv_line(line);
        if (fields.size() != t.columns.size()) {
            throw ArgumentError("ResultTable: row " + std::to_string(t.rows.size() + 1) + " has " +
                                std::to_string(fields.size()) + " fields, header has " +
                                std::to_string(t.columns.size()));
        }
        std::vector<Cell> row;
        row.reserve(fields.size());
        for (const auto& f : fields) {
            row.push_back(parse_cell(f));
        }
        t.rows.push_back(std::move(row));
    }
    if (!header) {
        throw ArgumentError("ResultTable: no header line");
    }
    return t;
}

ResultTable ResultTable::from_json(const std::string& text) {
    const auto j = parse_json<nlohmann::ordered_json>(text, "<table>");
    ResultTable t;
    try {
        for (const auto& [k, v] : j.at("metadata").items()) {
            t.metadata.emplace_back(k, v.is_string() ? v.get<std::string>() : v.dump());
        }
        t.columns = j.at("columns").get<std::vector<std::string>>();
        for (const auto& r : j.at("rows")) {
            std::vector<Cell> row;
            for (const auto& c : r) {
                row.push_back(cell_from_json(json(c)));
            }
            if (row.size() != t.columns.size()) {
                throw ArgumentError("ResultTable: row length does not match the columns");
            }
            t.rows.push_back(std::move(row));
        }
    } catch (const json::exception& e) {
        throw ArgumentError(std::string("ResultTable: malformed JSON table: ") + e.what());
    }
    return t;
}

ResultTable ResultTable::parse(const std::string& text) {
    const auto p = text.find_first_not_of(" \t\r\n");
    if (p != std::string::npos && text[p] == '{') {
        return from_json(text);
    }
    return from_csv(text);
}

// =============================================================================
// Sweep execution
// =============================================================================

Real sweep_point_memory(const SweepSpec& spec) {
    const Real n = spec.solver.n_trunc;
    const Real hilbert = n * n;
    const Real superop = hilbert * hilbert;
    constexpr Real c = sizeof(Complex);
    // Two-oscillator generators hold about eleven entries per column.
    const auto nnz = static_cast<Index>(11.0 * superop);
    const auto dim = static_cast<Index>(superop);
    switch (spec.task) {
        case SweepTask::steady:
        case SweepTask::p2map:
        case SweepTask::moments:
            return steady_memory_estimate(dim, nnz, steady_method_from_string(spec.solver.steady_method));
        case SweepTask::spectrum: {
            const Real solve =
                steady_memory_estimate(dim, nnz, steady_method_from_string(spec.solver.steady_method));
            const Real krylov = (CorrelationOptions{}.krylov_dim + 4.0) * superop * c;
            const Real series = 3.0 * (spec.solver.n_tau + 1.0) * c;
            return solve + krylov + series;
        }
        case SweepTask::meanfield_map: {
            const Real samples = spec.solver.mf_t_end * spec.solver.time_scale / 0.05;
            return 2.0 * 3.0 * c * std::min(samples, 1e7);
        }
        case SweepTask::trajectory:
            return static_cast<Real>(nnz) * (c + sizeof(int)) + 8.0 * superop * c;
    }
    return 0.0;
}

ResultTable run_sweep(const SweepSpec& spec) {
    spec.validate();
    const Real per_point = sweep_point_memory(spec);
    const Real budget = spec.solver.memory_budget_mb * 1024.0 * 1024.0;
    if (per_point * spec.threads > budget) {
        SweepSpec smaller = spec;
        int fits = spec.solver.n_trunc;
        while (fits > 3) {
            smaller.solver.n_trunc = --fits;
            if (sweep_point_memory(smaller) * spec.threads <= budget) {
                break;
            }
        }
        std::ostringstream msg;
        msg << "sweep refused: estimated " << per_point * spec.threads / (1024.0 * 1024.0)
            << " MB (" << spec.threads << " worker(s) at n_trunc=" << spec.solver.n_trunc
            << ") exceeds solver.memory_budget_mb=" << spec.solver.memory_budget_mb
            << "; n_trunc=" << fits << " fits, or use fewer threads";
        throw ResourceError(msg.str());
    }

    std::vector<std::vector<Real>> axis_values;
    for (const Axis& a : spec.axes) {
        axis_values.push_back(a.values());
    }
    const std::size_t n0 = axis_values.size() > 0 ? axis_values[0].size() : 1;
    const std::size_t n1 = axis_values.size() > 1 ? axis_values[1].size() : 1;
    const std::size_t n_points = n0 * n1;
    const std::vector<std::string> tcols = task_columns(spec);

    const auto start = std::chrono::steady_clock::now();
    std::vector<std::vector<Row>> results(n_points);
    std::atomic<std::size_t> next{0};
    const auto worker = [&]() {
        for (std::size_t idx = next++; idx < n_points; idx = next++) {
            const std::size_t i0 = idx / n1;
            const std::size_t i1 = idx % n1;
            std::vector<Real> values;
            if (!axis_values.empty()) {
                values.push_back(axis_values[0][i0]);
            }
            if (axis_values.size() > 1) {
                values.push_back(axis_values[1][i1]);
            }
            const Point pt = make_point(spec, values);
            Row prefix{static_cast<std::int64_t>(idx), static_cast<std::int64_t>(i0),
                       static_cast<std::int64_t>(i1)};
            const Row params = param_cells(pt);
            prefix.insert(prefix.end(), params.begin(), params.end());
            std::vector<Row> out;
            const auto fail = [&](const std::string& status, std::int64_t code, const std::string& what) {
                Row r = prefix;
                r.emplace_back(status);
                r.emplace_back(code);
                r.emplace_back(what);
                r.resize(r.size() + tcols.size(), Cell{std::string()});
                out.assign(1, std::move(r));
            };
            try {
                for (Row& body : run_task(pt, spec, idx)) {
                    Row r = prefix;
                    r.emplace_back(std::string("ok"));
                    r.emplace_back(std::int64_t{0});
                    r.emplace_back(std::string());
                    r.insert(r.end(), std::make_move_iterator(body.begin()),
                             std::make_move_iterator(body.end()));
                    out.push_back(std::move(r));
                }
            } catch (const Error& e) {
                fail(status_name(e.category()), status_code(e.category()), e.what());
            } catch (const std::exception& e) {
                fail("error", 1, e.what());
            }
            results[idx] = std::move(out);
        }
    };
    const int threads = static_cast<int>(std::min<std::size_t>(spec.threads, n_points));
    std::vector<std::thread> pool;
    for (int t = 1; t < threads; ++t) {
        pool.emplace_back(worker);
    }
    worker();
    for (auto& th : pool) {
        th.join();
    }
    const Real wall =
        std::chrono::duration<Real>(std::chrono::steady_clock::now() - start).count();

    ResultTable table;
    table.columns = {"point", "i0", "i1"};
    const auto& pn = sweep_parameter_names();
    table.columns.insert(table.columns.end(), pn.begin(), pn.end());
    table.columns.insert(table.columns.end(), {"status", "code", "error"});
    table.columns.insert(table.columns.end(), tcols.begin(), tcols.end());
    for (auto& block : results) {
        for (Row& r : block) {
            table.rows.push_back(std::move(r));
        }
    }

    std::size_t failed = 0;
    const int status_col = table.column("status");
    for (const auto& r : table.rows) {
        if (std::get<std::string>(r[static_cast<std::size_t>(status_col)]) != "ok") {
            ++failed;
        }
    }
    auto& m = table.metadata;
    m.emplace_back("code_version", QSYNC_VERSION);
    m.emplace_back("schema_version", std::to_string(kSweepSchemaVersion));
    m.emplace_back("task", to_string(spec.task));
    for (std::size_t k = 0; k < spec.axes.size(); ++k) {
        const Axis& a = spec.axes[k];
        const std::string key = "axis" + std::to_string(k);
        m.emplace_back(key, a.name);
        m.emplace_back(key + "_scale", to_string(a.scale));
        m.emplace_back(key + "_range",
                       format_real(a.min) + " " + format_real(a.max) + " " + std::to_string(a.n_points));
    }
    m.emplace_back("n_trunc", std::to_string(spec.solver.n_trunc));
    m.emplace_back("residual_tol", format_real(spec.solver.residual_tol));
    m.emplace_back("seed", std::to_string(spec.seed));
    m.emplace_back("points", std::to_string(n_points));
    m.emplace_back("failed_rows", std::to_string(failed));
    m.emplace_back("spec", spec_to_json(spec, false).dump());
    m.emplace_back("wall_time_s", format_real(wall));
    return table;
}

// =============================================================================
// Transition curves
// =============================================================================

std::vector<Curve> transition_curves(const ResultTable& table, const CurveOptions& options) {
    const std::string a0 = table.meta("axis0");
    const std::string a1 = table.meta("axis1");
    if (a0.empty() || a1.empty()) {
        throw ArgumentError("transition_curves: the table does not come from a two-axis sweep");
    }
    const bool log1 = table.meta("axis1_scale") == "log10";
    const auto need = [&table](const std::string& name) {
        const int c = table.column(name);
        if (c < 0) {
            throw ArgumentError("transition_curves: missing column '" + name + "'");
        }
        return c;
    };
    const int c_x = need(a0);
    const int c_y = need(a1);
    const int c_i0 = need("i0");
    const int c_i1 = need("i1");
    const int c_m2 = need(options.m2_column);
    const int c_m1abs = need("m1_AB_abs");
    const int c_m2abs = need("m2_AB_abs");
    const int c_nmax = need("n_maxima");

    // Columns of constant axis-0 value, ordered along axis 1.
    std::map<std::int64_t, std::vector<std::size_t>> groups;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        groups[static_cast<std::int64_t>(table.number(r, c_i0))].push_back(r);
    }
    std::vector<Curve> curves{{"maxima_merge", {}}, {"m2_zero", {}}, {"moment_equality", {}}};
    const std::vector<std::function<Real(std::size_t)>> f{
        [&](std::size_t r) { return table.number(r, c_nmax) - 1.5; },
        [&](std::size_t r) { return table.number(r, c_m2); },
        [&](std::size_t r) { return table.number(r, c_m1abs) - table.number(r, c_m2abs); }};
    for (auto& [i0, rows] : groups) {
        std::sort(rows.begin(), rows.end(), [&](std::size_t a, std::size_t b) {
            return table.number(a, c_i1) < table.number(b, c_i1);
        });
        for (std::size_t k = 0; k < curves.size(); ++k) {
            for (std::size_t q = 0; q + 1 < rows.size(); ++q) {
                const Real fa = f[k](rows[q]);
                const Real fb = f[k](rows[q + 1]);
                if (!std::isfinite(fa) || !std::isfinite(fb)) {
                    continue;
                }
                const bool crosses = (fa < 0.0 && fb >= 0.0) || (fa >= 0.0 && fb < 0.0);
                if (!crosses) {
                    continue;
                }
                Real ya = table.number(rows[q], c_y);
                Real yb = table.number(rows[q + 1], c_y);
                if (log1) {
                    ya = std::log10(ya);
                    yb = std::log10(yb);
                }
                const Real s = fa / (fa - fb);
                Real y = ya + s * (yb - ya);
                if (log1) {
                    y = std::pow(10.0, y);
                }
                curves[k].points.emplace_back(table.number(rows[q], c_x), y);
            }
        }
    }
    return curves;
}

ResultTable curves_table(const std::vector<Curve>& curves, const ResultTable& source) {
    ResultTable t;
    const std::string a0 = source.meta("axis0", "x");
    const std::string a1 = source.meta("axis1", "y");
    t.columns = {"curve", a0, a1};
    for (const Curve& c : curves) {
        for (const auto& [x, y] : c.points) {
            t.rows.push_back({c.name, x, y});
        }
    }
    t.metadata.emplace_back("code_version", QSYNC_VERSION);
    t.metadata.emplace_back("schema_version", std::to_string(kSweepSchemaVersion));
    t.metadata.emplace_back("task", "curves");
    t.metadata.emplace_back("source_task", source.meta("task"));
    t.metadata.emplace_back("axis0", a0);
    t.metadata.emplace_back("axis1", a1);
    return t;
}

}  // namespace qsync

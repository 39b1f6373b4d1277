#pragma once

// Parameter sweeps: a JSON recipe describes up to two axes over model
// parameters and one task; every grid point becomes one or more rows of a
// self-describing long-format table.

#include "qsync/common.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace qsync {

inline constexpr int kSweepSchemaVersion = 1;

enum class SweepTask { steady, p2map, moments, spectrum, meanfield_map, trajectory };
enum class AxisScale { linear, log10 };

[[nodiscard]] std::string to_string(SweepTask task);
[[nodiscard]] std::string to_string(AxisScale scale);

struct Axis {
    std::string name;
    AxisScale scale = AxisScale::linear;
    Real min = 0.0;
    Real max = 1.0;
    int n_points = 2;

    [[nodiscard]] std::vector<Real> values() const;
};

struct SolverControls {
    int n_trunc = 12;
    std::string steady_method = "auto";
    Real residual_tol = 1e-10;
    int phase_grid = 720;
    int moment_order = 2;
    // spectrum
    std::string correlation = "AA";
    Real tau_max = 200.0;
    int n_tau = 16384;
    Real omega_max = 3.0;
    // meanfield_map
    std::string mf_model = "two";   ///< "two" or "chain"
    int members = 100;
    Real mf_t_end = 500.0;
    Real window_start = 300.0;
    Real window_length = 200.0;
    Real time_scale = 1.0;
    bool pin_gain = true;
    // trajectory
    Real traj_t_end = 10.0;
    Real traj_dt = 1e-3;
    int record_stride = 100;
    // resources
    Real memory_budget_mb = 4096.0;
};

struct SweepSpec {
    int schema_version = kSweepSchemaVersion;
    SweepTask task = SweepTask::steady;
    std::vector<Axis> axes;            ///< zero, one or two axes
    std::map<std::string, Real> fixed; ///< parameter values held constant
    std::string output;                ///< file path; empty or "-" writes to stdout
    std::string format = "csv";        ///< "csv" or "json"
    std::uint64_t seed = 1;
    int threads = 1;
    SolverControls solver;

    /// Throws ConfigError naming the offending field.
    void validate() const;
    [[nodiscard]] std::string to_json() const;
};

/// Parses a recipe; `overrides` are "dotted.path=value" strings applied on top
/// (value read as JSON when possible, else as a string). Parse errors report
/// line and column of `source`.
[[nodiscard]] SweepSpec parse_sweep_spec(const std::string& text,
                                         const std::vector<std::string>& overrides = {},
                                         const std::string& source = "<config>");

/// Human-readable description of every recipe field.
[[nodiscard]] std::string sweep_schema();

/// Names accepted as axis or fixed parameters.
[[nodiscard]] const std::vector<std::string>& sweep_parameter_names();

using Cell = std::variant<Real, std::int64_t, std::string>;

struct ResultTable {
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;
    std::vector<std::pair<std::string, std::string>> metadata;

    /// Column index or −1.
    [[nodiscard]] int column(const std::string& name) const;
    [[nodiscard]] std::string meta(const std::string& key, const std::string& fallback = "") const;
    /// Numeric value of a cell (NaN for empty or non-numeric strings).
    [[nodiscard]] Real number(std::size_t row, int col) const;

    /// `#`-prefixed metadata lines, a header line, then one line per row.
    [[nodiscard]] std::string to_csv(bool with_wall_time = true) const;
    [[nodiscard]] std::string to_json(bool with_wall_time = true) const;
    [[nodiscard]] static ResultTable from_csv(const std::string& text);
    [[nodiscard]] static ResultTable from_json(const std::string& text);
    /// Detects the format from the first non-blank character.
    [[nodiscard]] static ResultTable parse(const std::string& text);
};

/// Estimated peak memory in bytes of one grid point of `spec`.
[[nodiscard]] Real sweep_point_memory(const SweepSpec& spec);

/// Runs every grid point (in parallel on spec.threads workers). Rows are in grid
/// order; a failing point yields a single row with its error category in
/// `status` and the message in `error`. Throws ResourceError up front when the
/// memory estimate exceeds the budget.
[[nodiscard]] ResultTable run_sweep(const SweepSpec& spec);

struct Curve {
    std::string name;
    std::vector<std::pair<Real, Real>> points;  ///< (x, y) in axis units
};

struct CurveOptions {
    std::string m2_column = "m2_AB_re";  ///< quadrature whose sign change marks m2 = 0
};

/// maxima_merge, m2_zero and moment_equality curves of a two-axis table,
/// found by sign changes along the second axis at each value of the first,
/// interpolated linearly (in log10 for log axes). Throws ArgumentError when
/// the table lacks axes or columns.
[[nodiscard]] std::vector<Curve> transition_curves(const ResultTable& table,
                                                   const CurveOptions& options = {});

/// Curves as a long table (curve, x, y).
[[nodiscard]] ResultTable curves_table(const std::vector<Curve>& curves, const ResultTable& source);

}  // namespace qsync

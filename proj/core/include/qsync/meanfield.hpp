#pragma once

// Classical (mean-field) limit: amplitude ODEs for two coupled van der Pol
// oscillators and for an open chain of three, order parameters of their long
// time behaviour, and the phase classification built on them.

#include "qsync/common.hpp"
#include "qsync/liouvillian.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace qsync {

/// Complex amplitudes ⟨a_j⟩, one per oscillator.
using MFState = std::vector<Complex>;

/// Copy of `p` with every gain set so that γ^g_j − 2g̃ = γ^d_j.
[[nodiscard]] SystemParams with_pinned_gain(SystemParams p);

/// Open three-site chain with nearest-neighbour couplings G_{j,j+1} = g̃ + g₋
/// and G_{j,j−1} = g̃ − g₋. Sites are A, B, C (0, 1, 2); A and C are not linked.
struct ChainParams {
    Real g_minus = 0.0;
    Real g_tilde = 0.0;
    std::array<Real, 3> gamma_g{1.0, 1.0, 1.0};
    std::array<Real, 3> gamma_d{1.0, 1.0, 1.0};

    /// G_{j,k}; zero unless |j − k| = 1.
    [[nodiscard]] Real coupling(int j, int k) const;
    /// Copy with γ^g_j = γ^d_j + 2g̃.
    [[nodiscard]] ChainParams pinned() const;
    void validate() const;
};

[[nodiscard]] MFState mf_rhs_two(const MFState& a, const SystemParams& p);
[[nodiscard]] MFState mf_rhs_chain(const MFState& a, const ChainParams& p);

/// Polar coordinates (r_A, r_B, φ_A, φ_B) of a two-oscillator state.
struct PolarState {
    Real r_A = 0.0;
    Real r_B = 0.0;
    Real phi_A = 0.0;
    Real phi_B = 0.0;
};
[[nodiscard]] PolarState to_polar(const MFState& a);
/// Time derivatives of (r_A, r_B, φ_A, φ_B), written directly in polar form.
[[nodiscard]] PolarState mf_rhs_polar(const PolarState& s, const SystemParams& p);
/// dφ_AB/dt from the polar equations.
[[nodiscard]] Real mf_relative_phase_rate(const PolarState& s, const SystemParams& p);

/// A mean-field vector field with enough context to blame a blow-up.
struct MFModel {
    int n_sites = 0;
    bool driven = false;
    std::function<MFState(const MFState&)> rhs;
    std::string description;
};
[[nodiscard]] MFModel two_oscillator_model(const SystemParams& p);
[[nodiscard]] MFModel chain_model(const ChainParams& p);

struct IntegrateControls {
    Real t_end = 500.0;
    Real sample_dt = 0.05;
    Real record_from = 0.0;        ///< samples before this time are not stored
    Real rel_tol = 1e-9;
    Real abs_tol = 1e-9;
    Real divergence_radius = 1e3;
};

/// Samples on the fixed grid t_k = k·sample_dt, k·sample_dt ≥ record_from.
struct MFTrajectory {
    std::vector<Real> t;
    std::vector<MFState> states;
    std::vector<MFState> velocities;  ///< rhs at each sample

    [[nodiscard]] int n_sites() const {
        return states.empty() ? 0 : static_cast<int>(states.front().size());
    }
    [[nodiscard]] std::size_t size() const noexcept { return t.size(); }
};

/// Adaptive Dormand–Prince with dense output. Throws NumericalError (with the
/// model description) when a radius exceeds the divergence radius or turns
/// non-finite.
[[nodiscard]] MFTrajectory integrate(const MFModel& model, const MFState& initial,
                                     const IntegrateControls& controls = {});

/// Averaging window [T, T + τ].
struct Window {
    Real start = 300.0;
    Real length = 200.0;
};

/// (1/τ)∫ sign(Im[ȧ_j a_j*]) dt over the window, in [−1, 1].
[[nodiscard]] Real order_orientation(const MFTrajectory& traj, int site, const Window& w = {});
/// |(1/τ)∫ e^{iφ_j} dt| over the window, in [0, 1].
[[nodiscard]] Real order_rotation(const MFTrajectory& traj, int site, const Window& w = {});

/// Shift-by-2π unwrapping: consecutive outputs never differ by more than π.
[[nodiscard]] std::vector<Real> unwrap(const std::vector<Real>& angles);

// =============================================================================
// Classification
// =============================================================================

enum class PhaseLabel {
    locked_pi,
    locked_zero,
    locked_drive,
    traveling_wave,
    modulated_traveling_wave,
    wobble,
    partial_traveling_wave,
    coexistence,
    unassigned,
};

[[nodiscard]] std::string to_string(PhaseLabel label);
[[nodiscard]] PhaseLabel phase_label_from_string(const std::string& name);

struct ClassifierThresholds {
    Real lock_excursion = 1e-3;    ///< max phase excursion of a static state (rad)
    Real locked_phase_tol = kPi / 4;  ///< distance of φ_AB from 0 or π for a locked sub-label
    Real rotating_ori = 0.95;      ///< |S_ori| above which a site rotates
    Real rotating_rot = 0.2;       ///< S_rot below which a site rotates
    Real amplitude_variation = 0.01;
    Real wobble_rot_low = 0.2;
    Real wobble_rot_high = 0.98;
    Real wobble_ori = 0.5;
    Real coexistence_fraction = 0.1;
};

struct SiteMetrics {
    Real s_ori = 0.0;
    Real s_rot = 0.0;
    Real excursion = 0.0;          ///< max − min of the unwrapped phase over the window
    Real amplitude_variation = 0.0;  ///< (max r − min r)/mean r over the window
    Real final_phase = 0.0;
    Real final_radius = 0.0;
};

struct TrajectoryMetrics {
    std::vector<SiteMetrics> sites;
    std::vector<Real> relative_phases;  ///< φ_j − φ_{j+1} at the final sample, in (−π, π]
    Real final_rhs_norm = 0.0;
};

[[nodiscard]] TrajectoryMetrics trajectory_metrics(const MFTrajectory& traj, const Window& w = {});
[[nodiscard]] PhaseLabel classify_trajectory(const TrajectoryMetrics& m, bool driven,
                                             const ClassifierThresholds& th = {});

struct EnsembleOptions {
    int members = 100;
    std::uint64_t seed = 1;
    std::uint64_t stream = 0;      ///< e.g. the pixel index of a phase diagram
    IntegrateControls controls{};
    Window window{};
    ClassifierThresholds thresholds{};
    /// Stretches t_end, the sampling interval and the window together; weak
    /// couplings relax on times ∝ 1/g², far beyond the default window.
    Real time_scale = 1.0;
};

struct EnsembleResult {
    PhaseLabel label = PhaseLabel::unassigned;
    std::vector<PhaseLabel> member_labels;
    std::map<PhaseLabel, int> counts;
    std::vector<Real> mean_s_ori;  ///< per site, over the ensemble
    std::vector<Real> mean_s_rot;
    Real max_locked_rhs_norm = 0.0;  ///< largest ‖rhs‖ at the end of a locked member
    std::vector<TrajectoryMetrics> metrics;
};

/// Initial states ⟨a_j⟩ = e^{iφ_j} with uniform φ_j, drawn from (seed, stream).
[[nodiscard]] std::vector<MFState> random_unit_states(int members, int n_sites, std::uint64_t seed,
                                                      std::uint64_t stream);

/// Label of the ensemble: coexistence when two assigned labels each hold at
/// least the coexistence fraction of members, otherwise the most frequent one.
[[nodiscard]] EnsembleResult classify(const MFModel& model, const EnsembleOptions& options = {});

// =============================================================================
// Perturbative results
// =============================================================================

/// Approximate locking boundary g̃(g_AB) under the pinned-gain convention.
[[nodiscard]] Real boundary_locking(Real g_ab, Real gamma_d);

struct PhaseFixedPoint {
    Real phi_ab = 0.0;  ///< in (−π, π]
    bool stable = false;
};

/// Zeros of φ̇_AB = g̃ sin φ_AB − (g²_AB/γ^g_A) sin 2(φ_AB − φ) and their stability.
[[nodiscard]] std::vector<PhaseFixedPoint> perturbative_phase_fixed_points(const SystemParams& p);

/// First-order steady radii r_j⁽⁰⁾ + εr_j⁽¹⁾ at relative phase φ_AB (Ω_A = 0).
[[nodiscard]] std::array<Real, 2> perturbative_radii(const SystemParams& p, Real phi_ab);

/// Maps an angle into (−π, π].
[[nodiscard]] Real wrap_angle(Real x);

}  // namespace qsync

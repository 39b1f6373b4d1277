#pragma once

// Steady-state two-time correlations via the quantum regression theorem and
// their power spectra.
//
// Convention: ⟨X(t+τ) Y(t)⟩ = Tr[X e^{Lτ}(Y ρ_ss)], with
//   AA:   X = a†,   Y = a
//   BB:   X = b†,   Y = b
//   ABAB: X = b†a,  Y = a†b

#include "qsync/common.hpp"
#include "qsync/liouvillian.hpp"
#include "qsync/steady_state.hpp"
#include "qsync/sync_measures.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace qsync {

enum class CorrelationKind { AA, BB, ABAB };

[[nodiscard]] std::string to_string(CorrelationKind kind);
[[nodiscard]] CorrelationKind correlation_kind_from_string(const std::string& name);

struct CorrelationOptions {
    Real tau_max = 200.0;
    int n_tau = 16384;        ///< number of intervals; samples at τ_j = j·τ_max/n_tau, j = 0..n_tau
    Real tol = 1e-10;         ///< per-step tolerance of the Krylov propagator (relative)
    int krylov_dim = 40;      ///< maximal Arnoldi dimension per step
    bool require_decay = true;
};

struct CorrelationSeries {
    CorrelationKind kind = CorrelationKind::AA;
    std::vector<Real> tau;
    std::vector<Complex> values;  ///< full correlation C(τ)
    /// lim_{τ→∞} C(τ) = ⟨X⟩⟨Y⟩, the coherent part removed before the transform.
    Complex coherent = 0.0;
    Real decay_ratio = 0.0;       ///< |C(τ_max) − C∞| / |C(0) − C∞|
    Index propagated_dim = 0;     ///< size of the invariant subspace actually propagated
    int matvecs = 0;

    [[nodiscard]] Real dtau() const { return tau.size() > 1 ? tau[1] - tau[0] : 0.0; }
};

/// Throws NumericalError when the decay criterion |C(τ_max) − C∞| < 10⁻³|C(0) − C∞|
/// fails and options.require_decay is set.
[[nodiscard]] CorrelationSeries correlation(const Superoperator& L, const DensityMatrix& rho_ss,
                                            CorrelationKind kind,
                                            const CorrelationOptions& options = {});

/// Observable pair (X, Y) of a correlation kind on `space`.
struct CorrelationOperators {
    Operator x;
    Operator y;
};
[[nodiscard]] CorrelationOperators correlation_operators(const FockSpace& space, CorrelationKind kind);

struct SpectrumOptions {
    Real window_rate = 0.0;  ///< optional exponential window e^{−rate·|τ|}
    Real omega_max = -1.0;   ///< crop to |ω| ≤ omega_max (negative keeps everything)
};

struct Spectrum {
    std::vector<Real> omega;
    std::vector<Real> values;
    Real d_omega = 0.0;
    Real coherent_weight = 0.0;  ///< 2π·C∞ delta weight at ω = 0 not contained in `values`
    Real window_rate = 0.0;
    Real max_imag = 0.0;         ///< largest |Im| before taking the real part

    /// (1/2π) ∫ S dω over the stored grid.
    [[nodiscard]] Real integral_over_2pi() const;
};

/// S(ω) = ∫ dτ (C(τ) − C∞) e^{iωτ} over (−τ_max, τ_max) with C(−τ) = C(τ)*,
/// on the grid ω_k = kπ/τ_max.
[[nodiscard]] Spectrum spectrum(const CorrelationSeries& c, const SpectrumOptions& options = {});

/// Maxima of S on the ω axis, parabolically refined.
[[nodiscard]] MaximaResult spectrum_maxima(const Spectrum& s);

// =============================================================================
// Second-order cumulant approximation
// =============================================================================

struct RegressionMatrix {
    Eigen::Matrix2cd m;
    Real n_A = 0.0;
    Real n_B = 0.0;
    Complex lambda_plus = 0.0;   ///< eigenvalue with the larger imaginary part
    Complex lambda_minus = 0.0;
    Real omega_plus = 0.0;       ///< Im λ+
    Real omega_minus = 0.0;      ///< Im λ−
};

[[nodiscard]] RegressionMatrix analytic_regression(const SystemParams& params, Real n_A, Real n_B);

/// Closed-form eigenvalues of M for γ^g_j = γ^d_j = γ and φ = ±π/2:
/// λ± = (γ(1 − 2n_A − 2n_B) − 2g̃)/4 ± ½√(g̃² − g² + (n_A − n_B)²γ²).
[[nodiscard]] std::pair<Complex, Complex> regression_eigenvalues_equal_rates(
    Real gamma, Real g_ab, Real g_tilde, Real n_A, Real n_B);

/// ω± ≈ ±√(g² − g̃²)/2, zero when g̃ ≥ g. Returns ω+ ≥ 0.
[[nodiscard]] Real omega_pm_approx(Real g_ab, Real g_tilde);

}  // namespace qsync

#pragma once

// Steady states of Lindblad generators and their perturbation expansion.

#include "qsync/common.hpp"
#include "qsync/fock.hpp"
#include "qsync/liouvillian.hpp"

#include <array>
#include <map>
#include <string>
#include <vector>

namespace qsync {

// =============================================================================
// Density matrices
// =============================================================================

struct StateDiagnostics {
    Real trace_deviation = 0.0;     ///< |Tr ρ − 1|
    Real hermiticity_defect = 0.0;  ///< max |ρ − ρ†| of the raw solver output
    Real min_eigenvalue = 0.0;
    Real top_fock_population = 0.0; ///< max over modes of P(n_j = N_j − 1)
    Real residual = 0.0;            ///< ‖L vec ρ‖₂ / ‖vec ρ‖₂ (0 when no generator is attached)
    int iterations = 0;             ///< Krylov iterations (0 for direct methods)
    std::string method;
};

class DensityMatrix {
public:
    /// Computes trace, hermiticity, spectrum and truncation diagnostics of `rho`.
    DensityMatrix(FockSpace space, DenseMatrix rho);

    [[nodiscard]] const FockSpace& space() const noexcept { return space_; }
    [[nodiscard]] const DenseMatrix& matrix() const noexcept { return rho_; }
    [[nodiscard]] Index dim() const noexcept { return rho_.rows(); }
    [[nodiscard]] const StateDiagnostics& diagnostics() const noexcept { return diag_; }
    StateDiagnostics& diagnostics() noexcept { return diag_; }

    [[nodiscard]] Complex expect(const Operator& op) const { return expectation(op, rho_); }

    /// Reduced state on the listed modes (kept in the given order).
    [[nodiscard]] DensityMatrix partial_trace(const std::vector<int>& keep) const;

private:
    FockSpace space_;
    DenseMatrix rho_;
    StateDiagnostics diag_;
};

/// Population of Fock level n of `mode`.
[[nodiscard]] Real fock_population(const DensityMatrix& rho, int mode, int n);

// =============================================================================
// Solver
// =============================================================================

enum class SteadyMethod {
    automatic,  ///< krylov when a per-mode split is available and the system is large, else direct
    dense,      ///< SVD null space of the dense generator (oracle; small systems only)
    direct,     ///< sparse LU with one row replaced by the trace constraint
    krylov,     ///< GMRES preconditioned by the exact inverse of the per-mode split
};

[[nodiscard]] std::string to_string(SteadyMethod method);
[[nodiscard]] SteadyMethod steady_method_from_string(const std::string& name);

struct SteadyOptions {
    SteadyMethod method = SteadyMethod::automatic;
    Real residual_tol = 1e-10;  ///< certificate on ‖Lρ‖₂/‖ρ‖₂
    Real krylov_tol = 1e-13;    ///< GMRES target relative to ‖L ρ0‖
    int restart = 60;
    int max_iterations = 3000;
    Index dense_max_dim = 4096;    ///< refuse dense SVD above this superoperator dimension
    Index direct_max_dim = 40000;  ///< refuse sparse LU above this superoperator dimension
    Index krylov_min_dim = 2500;   ///< automatic: use krylov from this dimension on
    Real multiplicity_tol = 1e-8;  ///< second-smallest singular value threshold (dense)
    /// Krylov start; empty means the product of single-mode steady states.
    DenseMatrix initial_guess;
};

/// Unique trace-one steady state with residual certificate.
/// Throws MultiplicityError for a degenerate steady manifold and
/// ConvergenceError when the certificate cannot be met.
[[nodiscard]] DensityMatrix solve_steady(const Superoperator& L, const SteadyOptions& options = {});

/// Steady state of the two-oscillator model. When the solve would run on the
/// krylov path, it starts from a coarser truncation's steady state padded with
/// zeros; the residual target is unchanged.
[[nodiscard]] DensityMatrix solve_steady(const SystemParams& params, const FockSpace& space,
                                         const SteadyOptions& options = {});

/// Memory estimate in bytes of solve_steady for a given generator size.
[[nodiscard]] Real steady_memory_estimate(Index superop_dim, Index nnz, SteadyMethod method,
                                          int restart = 60);

// =============================================================================
// Perturbation expansion
// =============================================================================

/// Exponents of (g_AB, g̃, Ω_A).
using MultiIndex = std::array<int, 3>;

class PerturbationExpansion {
public:
    PerturbationExpansion(FockSpace space, int max_order, std::map<MultiIndex, DenseMatrix> terms);

    [[nodiscard]] const FockSpace& space() const noexcept { return space_; }
    [[nodiscard]] int max_order() const noexcept { return max_order_; }
    [[nodiscard]] const std::map<MultiIndex, DenseMatrix>& terms() const noexcept { return terms_; }
    [[nodiscard]] const DenseMatrix& term(const MultiIndex& k) const;

    /// Σ_k c^k ρ^(k) over all orders up to `order` (default: all).
    [[nodiscard]] DenseMatrix evaluate(Real g_ab, Real g_tilde, Real omega_a, int order = -1) const;

private:
    FockSpace space_;
    int max_order_;
    std::map<MultiIndex, DenseMatrix> terms_;
};

/// Expansion around the decoupled, undriven generator of `params` (its couplings
/// and drive are ignored, φ is used). max_order ≤ 4.
[[nodiscard]] PerturbationExpansion perturbative_steady(const SystemParams& params,
                                                        const FockSpace& space, int max_order);

// =============================================================================
// Maximum model of the relative-phase distribution
// =============================================================================
//
// P_m(φ) = (u1 g Ω²/γ³ − u3 g̃/γ) cos φ + (u2 g̃² − u4 g²)/γ² cos 2φ

struct PmSample {
    Real g_AB = 0.0;
    Real g_tilde = 0.0;
    Real omega_A = 0.0;
    Real phi_max = 0.0;  ///< observed maximum of P₂ in [0, π]
};

struct PmCoefficients {
    Real u1 = 1.0;
    Real u2 = 1.0;
    Real u3 = 1.0;
    Real u4 = 1.0;
};

struct PmFit {
    PmCoefficients u;      ///< u4 fixed to 1
    Real rms_residual = 0.0;  ///< rad
    int samples = 0;
};

/// Location in [0, π] of the maximum of P_m.
[[nodiscard]] Real pm_phi_max(const PmCoefficients& u, Real g_ab, Real g_tilde, Real omega_a,
                              Real gamma = 1.0);

/// Least-squares fit of u1..u3 (u4 = 1) to observed maxima. Needs at least four
/// samples with three distinct g_AB values; throws ArgumentError otherwise.
[[nodiscard]] PmFit pm_fit(const std::vector<PmSample>& samples, Real gamma = 1.0);

}  // namespace qsync

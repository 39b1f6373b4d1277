#pragma once

// Lindblad generators for driven, coherently and dissipatively coupled
// quantum van der Pol oscillators.
//
// Conventions
//   D[L]ρ = LρL† − ½(L†Lρ + ρL†L)
//   vec(ρ) stacks columns: vec(ρ)[i + d·j] = ρ(i, j), so
//   vec(AρB) = (Bᵀ ⊗ A) vec(ρ) and −i[H,ρ] → −i(I ⊗ H − Hᵀ ⊗ I).
// All rates are in units of γ^d_A.

#include "qsync/common.hpp"
#include "qsync/fock.hpp"

#include <optional>
#include <vector>

namespace qsync {

struct SystemParams {
    Real gamma_g_A = 1.0;  ///< single-phonon gain of A
    Real gamma_g_B = 1.0;
    Real gamma_d_A = 1.0;  ///< two-phonon damping of A (unit of time)
    Real gamma_d_B = 1.0;
    Real g_AB = 0.0;       ///< coherent coupling (a negative value flips the sign)
    Real phi = -kPi / 2;   ///< coherent coupling phase
    Real g_tilde = 0.0;    ///< dissipative coupling g̃ D[a+b]
    Real omega_A = 0.0;    ///< drive amplitude on A

    /// Throws ArgumentError when a rate is negative or gamma_d_A is not positive.
    void validate() const;
};

struct ThreeOscParams {
    SystemParams osc;   ///< osc.g_tilde is ignored; the cavity provides it
    Real g = 0.0;       ///< oscillator–cavity coupling
    Real kappa = 100.0; ///< cavity decay rate

    /// Dissipative coupling the cavity produces after adiabatic elimination, 2g²/κ.
    [[nodiscard]] Real effective_g_tilde() const { return 2.0 * g * g / kappa; }
    void validate() const;
};

/// Superoperator on column-vectorized density matrices.
///
/// Builders may attach a per-mode split: single-mode generators (N_j² × N_j²,
/// acting on the (n_j, m_j) index pair) that conserve n_j − m_j and whose
/// Kronecker sum is a part of the full generator. The Krylov steady-state solver
/// uses it as an exactly invertible preconditioner; it never affects results.
class Superoperator {
public:
    Superoperator(FockSpace space, SparseMatrix matrix,
                  std::optional<std::vector<SparseMatrix>> mode_split = std::nullopt);

    [[nodiscard]] const FockSpace& space() const noexcept { return space_; }
    [[nodiscard]] const SparseMatrix& matrix() const noexcept { return matrix_; }
    [[nodiscard]] Index hilbert_dim() const noexcept { return space_.dim(); }
    [[nodiscard]] Index dim() const noexcept { return matrix_.rows(); }
    [[nodiscard]] const std::optional<std::vector<SparseMatrix>>& mode_split() const noexcept {
        return split_;
    }

    [[nodiscard]] Vector apply(const Vector& vec_rho) const { return matrix_ * vec_rho; }
    [[nodiscard]] DenseMatrix apply(const DenseMatrix& rho) const;

    /// max_k |Σ_i L(ii-index, k)|: how far 1ᵀL is from the zero row.
    [[nodiscard]] Real trace_row_defect() const;
    /// max |Im L_jk|.
    [[nodiscard]] Real max_imag() const;

    Superoperator& operator+=(const Superoperator& other);
    Superoperator& operator*=(Complex scale);
    friend Superoperator operator+(Superoperator lhs, const Superoperator& rhs) { return lhs += rhs; }
    friend Superoperator operator*(Complex s, Superoperator op) { return op *= s; }
    friend Superoperator operator*(Superoperator op, Complex s) { return op *= s; }

private:
    FockSpace space_;
    SparseMatrix matrix_;
    std::optional<std::vector<SparseMatrix>> split_;
};

[[nodiscard]] Vector vectorize(const DenseMatrix& rho);
[[nodiscard]] DenseMatrix unvectorize(const Vector& vec_rho, Index d);

/// X ↦ AXB in vectorized form.
[[nodiscard]] SparseMatrix sandwich(const SparseMatrix& left, const SparseMatrix& right);

/// Generator of D[L]. An empty split marks it as carrying no per-mode information.
[[nodiscard]] Superoperator dissipator(const Operator& jump);
/// −i[H, ·]
[[nodiscard]] Superoperator hamiltonian_part(const Operator& hamiltonian);
/// X ↦ U X U† (used for symmetry checks).
[[nodiscard]] SparseMatrix unitary_conjugation(const Operator& unitary);

/// The two-oscillator generator split by small parameter:
/// L = base + g_AB·coherent + g̃·dissipative + Ω_A·drive.
struct TwoOscParts {
    Superoperator base;         ///< gains and two-phonon dampings only
    Superoperator coherent;     ///< −i[(e^{iφ}a†b + h.c.)/2, ·]
    Superoperator dissipative;  ///< D[a+b]
    Superoperator drive;        ///< −i[(a† + a)/2, ·]
};

[[nodiscard]] TwoOscParts two_osc_parts(const SystemParams& params, const FockSpace& space);

/// L = −i[H,·] + (γ^g_A/2)D[a†] + (γ^g_B/2)D[b†] + (γ^d_A/2)D[a²] + (γ^d_B/2)D[b²] + g̃ D[a+b]
/// with H = Ω_A/2 a† + g_AB/2 e^{iφ} a†b + h.c. Requires a two-mode space.
[[nodiscard]] Superoperator build_two_osc(const SystemParams& params, const FockSpace& space);

/// Oscillators A (mode 0), B (mode 1) and the auxiliary cavity c (mode 2):
/// H = Ω_A/2 a† + g_AB/2 e^{iφ} a†b + g/2 (b†c + c†a) + h.c., extra (κ/2)D[c].
[[nodiscard]] Superoperator build_three_osc(const ThreeOscParams& params, const FockSpace& space);

/// Effective couplings in the Heisenberg equations of a and b.
struct EffectiveCouplings {
    Complex a_to_b;  ///< coefficient ×2 of a in ḃ: −i g_AB e^{−iφ} − g̃ (influence of A on B)
    Complex b_to_a;  ///< coefficient ×2 of b in ȧ: −i g_AB e^{iφ} − g̃ (influence of B on A)
};

[[nodiscard]] EffectiveCouplings effective_couplings(const SystemParams& params);

/// Single-mode van der Pol generator (γ^g/2)D[a†] + (γ^d/2)D[a²] + loss·D[a]
/// on an N-level mode, N² × N².
[[nodiscard]] SparseMatrix vdp_mode_generator(int n_trunc, Real gamma_g, Real gamma_d, Real loss = 0.0);

}  // namespace qsync

#pragma once

// Truncated Fock-space operator algebra.
//
// Basis ordering: for modes (0, 1, ..., M-1) with truncations N_j the basis
// index is sum_j n_j * stride_j with mode 0 the most significant factor, i.e.
// an operator on mode j is I ⊗ ... ⊗ X_j ⊗ ... ⊗ I.

#include "qsync/common.hpp"

#include <span>
#include <vector>

namespace qsync {

class FockSpace {
public:
    /// Uniform truncation: `n_modes` modes with Fock states |0>..|n_trunc-1> each.
    FockSpace(int n_trunc, int n_modes);
    /// Per-mode truncations (used for the auxiliary cavity mode).
    explicit FockSpace(std::vector<int> truncations);

    [[nodiscard]] int n_modes() const noexcept { return static_cast<int>(dims_.size()); }
    [[nodiscard]] int n_trunc(int mode) const;
    /// Truncation of mode 0; equal to every mode's truncation when uniform.
    [[nodiscard]] int n_trunc() const noexcept { return dims_.front(); }
    [[nodiscard]] bool uniform() const noexcept;
    [[nodiscard]] Index dim() const noexcept { return dim_; }
    [[nodiscard]] Index stride(int mode) const;
    [[nodiscard]] const std::vector<int>& truncations() const noexcept { return dims_; }

    /// Occupation number of `mode` in basis state `basis_index`.
    [[nodiscard]] int occupation(Index basis_index, int mode) const;

    void check_mode(int mode) const;

    friend bool operator==(const FockSpace&, const FockSpace&) = default;

private:
    std::vector<int> dims_;
    std::vector<Index> strides_;
    Index dim_ = 1;
};

/// Sparse operator bound to a FockSpace. Arithmetic between operators on
/// different spaces throws ArgumentError.
class Operator {
public:
    Operator(FockSpace space, SparseMatrix matrix);

    [[nodiscard]] const FockSpace& space() const noexcept { return space_; }
    [[nodiscard]] const SparseMatrix& matrix() const noexcept { return matrix_; }
    [[nodiscard]] DenseMatrix dense() const { return DenseMatrix(matrix_); }
    [[nodiscard]] Index dim() const noexcept { return space_.dim(); }

    [[nodiscard]] Operator adjoint() const;

    Operator& operator+=(const Operator& other);
    Operator& operator-=(const Operator& other);
    Operator& operator*=(Complex scale);

    friend Operator operator+(Operator lhs, const Operator& rhs) { return lhs += rhs; }
    friend Operator operator-(Operator lhs, const Operator& rhs) { return lhs -= rhs; }
    friend Operator operator*(Operator op, Complex scale) { return op *= scale; }
    friend Operator operator*(Complex scale, Operator op) { return op *= scale; }
    friend Operator operator*(const Operator& lhs, const Operator& rhs);

private:
    void require_same_space(const Operator& other) const;

    FockSpace space_;
    SparseMatrix matrix_;
};

[[nodiscard]] Operator identity(const FockSpace& space);
/// Embeds a single-mode matrix (n_trunc(mode) square) at `mode`.
[[nodiscard]] Operator embed(const FockSpace& space, int mode, const SparseMatrix& single_mode);

[[nodiscard]] Operator annihilation(const FockSpace& space, int mode);
[[nodiscard]] Operator creation(const FockSpace& space, int mode);
[[nodiscard]] Operator number(const FockSpace& space, int mode);

/// k-th power of the one-sided phase shift ã = Σ |n><n+1| on `mode`:
/// <n|ã^k|n+k> = 1 for n + k < n_trunc. Throws for k < 1 or k >= n_trunc,
/// where the operator would vanish identically.
[[nodiscard]] Operator sg_power(const FockSpace& space, int mode, int k);

/// Permutation operator exchanging two modes of equal truncation.
[[nodiscard]] Operator mode_swap(const FockSpace& space, int mode_i, int mode_j);

/// Single-mode building blocks (N x N).
[[nodiscard]] SparseMatrix lowering_matrix(int n_trunc);
[[nodiscard]] SparseMatrix sg_matrix(int n_trunc, int k);

/// Normalized product coherent state truncated at the space's cutoff.
/// The discarded Poisson mass of each mode must stay below 1e-6
/// (TruncationError otherwise); the state is renormalized after truncation.
[[nodiscard]] Vector coherent_state(const FockSpace& space, std::span<const Complex> amplitudes);

/// Poisson probability mass above the cutoff, Σ_{n>=n_trunc} e^{-|α|²}|α|^{2n}/n!.
[[nodiscard]] Real coherent_tail_mass(Complex alpha, int n_trunc);

[[nodiscard]] Complex expectation(const Operator& op, const Vector& state);
[[nodiscard]] Complex expectation(const Operator& op, const DenseMatrix& rho);

}  // namespace qsync

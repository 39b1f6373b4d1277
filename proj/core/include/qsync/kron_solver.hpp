#pragma once

// Exact solver for Kronecker sums of single-mode Lindblad generators.
//
// A generator K = Σ_j G_j, where G_j acts on the (n_j, m_j) index pair of mode j
// only, is diagonalized mode by mode: each G_j conserves n_j − m_j, so it is
// block diagonal, and every block gets a complex Schur form. The tensor system
// (Σ_j T_j) z = c with upper-triangular T_j is then solved by back-substitution
// over the multi-index in reverse lexicographic order.

#include "qsync/common.hpp"
#include "qsync/fock.hpp"

#include <functional>
#include <vector>

namespace qsync {

/// Σ_j I ⊗ G_j ⊗ I written in the column-stacked vec(ρ) ordering of `space`.
[[nodiscard]] SparseMatrix kron_sum_matrix(const FockSpace& space,
                                           const std::vector<SparseMatrix>& local);

class KronSumSolver {
public:
    KronSumSolver(FockSpace space, const std::vector<SparseMatrix>& local);

    /// Solves K x = y. Components along zero modes of K are set to zero; with
    /// `project` the result is additionally made traceless by subtracting
    /// Tr(x)·ρ0, ρ0 being the product of the single-mode kernels.
    [[nodiscard]] Vector solve(const Vector& y, bool project = true) const;

    /// Number of (numerically) zero eigenvalues of K, i.e. dim ker K.
    [[nodiscard]] Index kernel_dim() const noexcept { return zero_count_; }
    /// Product of normalized single-mode steady states (requires kernel_dim() == 1).
    [[nodiscard]] const Vector& kernel_state() const noexcept { return rho0_; }
    [[nodiscard]] const FockSpace& space() const noexcept { return space_; }

private:
    // One block per value of n − m. Schur coordinates q of a mode are the
    // concatenation of all blocks; q = first + local.
    struct Block {
        int first = 0;
        std::vector<int> p;  // p = n + N·m of each row of Q
        DenseMatrix q;       // Schur vectors
        DenseMatrix t;       // upper-triangular Schur factor
    };
    struct ModeFactor {
        int n2 = 0;
        std::vector<Block> blocks;
        std::vector<int> block_of;  // q -> block
        std::vector<int> local_of;  // q -> position inside the block
    };

    void transform(Vector& c, int mode, bool to_schur) const;
    /// Two-mode back-substitution as a triangular Sylvester equation, column by column.
    void back_substitute_two(const Vector& c, Vector& z) const;

    FockSpace space_;
    std::vector<ModeFactor> modes_;
    std::vector<Index> tensor_stride_;
    std::vector<int> vmap_;  // tensor index -> vec index
    Vector rho0_;
    Index zero_count_ = 0;
};

/// Restarted GMRES with a fixed right preconditioner: solves A x = b from x0.
struct GmresResult {
    Vector x;
    int iterations = 0;
    Real residual = 0.0;  ///< ‖b − A x‖₂ / ‖b‖₂ at exit
    bool converged = false;
};

using LinearMap = std::function<Vector(const Vector&)>;

[[nodiscard]] GmresResult gmres(const LinearMap& apply_a, const LinearMap& precondition,
                                const Vector& b, Vector x0, Real rel_tol, int restart, int max_iter);

}  // namespace qsync

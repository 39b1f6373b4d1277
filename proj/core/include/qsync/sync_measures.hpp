#pragma once

// Phase-distribution synchronization measures built on the one-sided phase
// operator ã. All distributions are reported minus their uniform background.

#include "qsync/common.hpp"
#include "qsync/steady_state.hpp"

#include <vector>

namespace qsync {

enum class PhaseKind { single, joint, relative };

/// P on a uniform grid φ_i = 2π i / n over [0, 2π).
struct PhaseDistribution {
    PhaseKind kind = PhaseKind::single;
    std::vector<Real> grid;
    std::vector<Real> values;

    [[nodiscard]] int size() const noexcept { return static_cast<int>(values.size()); }
    [[nodiscard]] Real step() const noexcept { return kTwoPi / static_cast<Real>(values.size()); }
    /// Σ P_i Δφ.
    [[nodiscard]] Real integral() const;
};

/// P₂(φ_A, φ_B) − 1/(2π)², row-major: values[i·n + j] at (φ_A = grid[i], φ_B = grid[j]).
struct JointPhaseDistribution {
    std::vector<Real> grid;
    std::vector<Real> values;
    [[nodiscard]] Real integral() const;
};

struct MomentSet {
    int n_max = 0;
    /// single[j][n − 1] = ⟨ã_j^n⟩
    std::vector<std::vector<Complex>> single;
    /// relative[n − 1] = ⟨(ã_A ã_B†)^n⟩ (empty for one-mode states)
    std::vector<Complex> relative;

    [[nodiscard]] Complex m(int mode, int n) const;
    [[nodiscard]] Complex m_rel(int n) const;
};

/// Moments up to order n_max (< truncation of every mode involved).
[[nodiscard]] MomentSet moments(const DensityMatrix& rho, int n_max);

/// P₁ of `mode`, summed up to k = n_trunc − 1 (exact on the truncated space).
[[nodiscard]] PhaseDistribution p1(const DensityMatrix& rho, int mode, int n_grid = 720);
/// P₂(φ_AB) of modes 0 and 1.
[[nodiscard]] PhaseDistribution p2_relative(const DensityMatrix& rho, int n_grid = 720);
[[nodiscard]] JointPhaseDistribution p2_joint(const DensityMatrix& rho, int n_grid = 180);

/// Distribution (1/2π) Σ_k e^{−ikφ} m_k + c.c. from given moments m_1, m_2, ...
[[nodiscard]] PhaseDistribution distribution_from_moments(const std::vector<Complex>& m,
                                                          PhaseKind kind, int n_grid);

struct Maximum {
    Real position = 0.0;
    Real value = 0.0;
};

struct MaximaResult {
    std::vector<Maximum> maxima;  ///< sorted by value, largest first
    bool unsynchronized = false;  ///< distribution is flat (all |P| < 1e-12)
};

/// Strict local maxima with parabolic refinement; circular neighbours when
/// `period` > 0 (positions wrapped into [x_0, x_0 + period)).
[[nodiscard]] MaximaResult local_maxima(const std::vector<Real>& x, const std::vector<Real>& v,
                                        Real period);

[[nodiscard]] MaximaResult find_maxima(const PhaseDistribution& p);

/// Maxima after merging pairs that are closer than two grid steps or whose
/// separating saddle lies within `saddle_tol` of the lower maximum.
[[nodiscard]] std::vector<Maximum> merged_maxima(const PhaseDistribution& p,
                                                 Real saddle_tol = 1e-10);

/// Weiss measure ⟨a⟩/√⟨a†a⟩ of `mode`. Throws NumericalError when ⟨a†a⟩ ≤ 1e-14.
[[nodiscard]] Complex weiss_s(const DensityMatrix& rho, int mode);

}  // namespace qsync

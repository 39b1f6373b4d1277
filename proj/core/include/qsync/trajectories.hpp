#pragma once

// Measurement-conditioned evolution: homodyne-type unraveling of the
// dissipative coupling g̃ D[a+b], integrated with Euler–Maruyama.
//
//   dρ = L(ρ) dt + √g̃ [(c − ⟨c⟩)ρ + ρ(c − ⟨c⟩)†] dW,   c = a + b

#include "qsync/common.hpp"
#include "qsync/fock.hpp"
#include "qsync/liouvillian.hpp"
#include "qsync/steady_state.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace qsync {

struct TrajectoryOptions {
    Real t_end = 10.0;
    Real dt = 1e-3;
    int record_stride = 100;       ///< record every this many steps (and at t = 0)
    std::uint64_t seed = 1;
    std::uint64_t stream = 0;      ///< trajectory index inside an ensemble
    Real positivity_floor = -1e-3; ///< min eigenvalue below this aborts the run
    bool check_positivity = true;  ///< eigenvalue check at every recorded step
};

struct TrajectoryRecord {
    std::vector<Real> t;
    std::vector<Complex> m1_A;   ///< ⟨ã_A⟩
    std::vector<Complex> m1_B;   ///< ⟨ã_B⟩
    std::vector<Complex> m1_AB;  ///< ⟨ã_A ã_B†⟩
    std::vector<Real> n_A;       ///< ⟨a†a⟩
    std::vector<Real> n_B;
    std::vector<Real> arg_A;     ///< unwrapped arg m1_A
    std::vector<Real> arg_B;
    std::vector<Real> arg_AB;
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
    Real dt = 0.0;
    Real max_trace_defect = 0.0;        ///< |Tr ρ − 1| before renormalization, worst step
    Real max_hermiticity_defect = 0.0;  ///< max |ρ − ρ†| after a step, worst step
    Real max_top_population = 0.0;      ///< largest top-Fock population seen at a record
    Real min_eigenvalue = 0.0;          ///< smallest eigenvalue seen at a record
    DenseMatrix final_state;
};

/// Wiener increment of step k of stream (seed, stream): N(0, dt), a pure
/// function of its arguments.
[[nodiscard]] Real wiener_increment(std::uint64_t seed, std::uint64_t stream, std::uint64_t step,
                                    Real dt);

/// Runs one conditioned trajectory of the two-oscillator model from `rho0`.
/// At g̃ = 0 the noise term vanishes and the run is plain Euler integration of L.
/// Throws NumericalError (naming seed and stream) on positivity collapse or NaN.
[[nodiscard]] TrajectoryRecord simulate(const SystemParams& params, const FockSpace& space,
                                        const DenseMatrix& rho0, const TrajectoryOptions& options);

/// Same as simulate, starting from the vacuum of both modes.
[[nodiscard]] TrajectoryRecord simulate(const SystemParams& params, const FockSpace& space,
                                        const TrajectoryOptions& options);

/// Drives the run with caller-supplied increments (one per step) instead of the
/// internal generator; the number of steps is increments.size().
[[nodiscard]] TrajectoryRecord simulate_with_increments(const SystemParams& params,
                                                        const FockSpace& space,
                                                        const DenseMatrix& rho0,
                                                        const std::vector<Real>& increments,
                                                        const TrajectoryOptions& options);

/// Trajectories for streams 0..count−1 on `threads` workers; the result is
/// ordered by stream and does not depend on the worker count.
[[nodiscard]] std::vector<TrajectoryRecord> simulate_ensemble(const SystemParams& params,
                                                              const FockSpace& space,
                                                              const DenseMatrix& rho0,
                                                              const TrajectoryOptions& options,
                                                              int count, int threads = 1);

enum class TrajectoryObservable { n_A, n_B, re_m1_AB, im_m1_AB, abs_m1_A, abs_m1_B, abs_m1_AB };

struct EnsembleSeries {
    std::vector<Real> t;
    std::vector<Real> mean;
    std::vector<Real> standard_error;
    int count = 0;
};

/// Pointwise mean and standard error over ≥ 2 records on a common grid.
[[nodiscard]] EnsembleSeries ensemble_mean(const std::vector<TrajectoryRecord>& records,
                                           TrajectoryObservable observable);

/// Initial state |0, 0⟩⟨0, 0|.
[[nodiscard]] DenseMatrix vacuum_state(const FockSpace& space);

}  // namespace qsync

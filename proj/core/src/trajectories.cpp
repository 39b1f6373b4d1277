#include "qsync/trajectories.hpp"

#include "qsync/meanfield.hpp"
#include "qsync/random.hpp"

#include <Eigen/Eigenvalues>

#include <atomic>
#include <cmath>
#include <exception>
#include <sstream>
#include <thread>

namespace qsync {

namespace {

struct Observables {
    Operator sg_a;
    Operator sg_b;
    Operator sg_rel;
    Operator n_a;
    Operator n_b;
    Operator top_a;
    Operator top_b;
};

Observables make_observables(const FockSpace& s) {
    const auto top = [&](int mode) {
        const int n = s.n_trunc(mode);
        SparseMatrix p(n, n);
        p.insert(n - 1, n - 1) = 1.0;
        return embed(s, mode, p);
    };
    return {sg_power(s, 0, 1),
            sg_power(s, 1, 1),
            sg_power(s, 0, 1) * sg_power(s, 1, 1).adjoint(),
            number(s, 0),
            number(s, 1),
            top(0),
            top(1)};
}

std::string blame(const TrajectoryOptions& o, std::size_t step) {
    std::ostringstream s;
    s << " (seed " << o.seed << ", stream " << o.stream << ", step " << step << ", dt " << o.dt << ")";
    return s.str();
}

void record(TrajectoryRecord& rec, const Observables& obs, const DenseMatrix& rho, Real t,
            const TrajectoryOptions& o, std::size_t step) {
    rec.t.push_back(t);
    rec.m1_A.push_back(expectation(obs.sg_a, rho));
    rec.m1_B.push_back(expectation(obs.sg_b, rho));
    rec.m1_AB.push_back(expectation(obs.sg_rel, rho));
    rec.n_A.push_back(expectation(obs.n_a, rho).real());
    rec.n_B.push_back(expectation(obs.n_b, rho).real());
    rec.max_top_population =
        std::max({rec.max_top_population, expectation(obs.top_a, rho).real(),
                  expectation(obs.top_b, rho).real()});
    if (o.check_positivity) {
        const DenseMatrix h = 0.5 * (rho + rho.adjoint());
        const Real lo = Eigen::SelfAdjointEigenSolver<DenseMatrix>(h, Eigen::EigenvaluesOnly)
                            .eigenvalues()
                            .minCoeff();
        rec.min_eigenvalue = std::min(rec.min_eigenvalue, lo);
        if (lo < o.positivity_floor) {
            std::ostringstream msg;
            msg << "trajectory lost positivity: min eigenvalue " << lo << " at t=" << t
                << "; reduce dt" << blame(o, step);
            throw NumericalError(msg.str());
        }
    }
}

void finish(TrajectoryRecord& rec, DenseMatrix rho) {
    const auto args = [](const std::vector<Complex>& z) {
        std::vector<Real> a;
        a.reserve(z.size());
        for (Complex v : z) {
            a.push_back(std::arg(v));
        }
        return unwrap(a);
    };
    rec.arg_A = args(rec.m1_A);
    rec.arg_B = args(rec.m1_B);
    rec.arg_AB = args(rec.m1_AB);
    rec.final_state = std::move(rho);
}

void check_inputs(const FockSpace& space, const DenseMatrix& rho0, const TrajectoryOptions& o) {
    if (space.n_modes() != 2) {
        throw ArgumentError("trajectories: the two-oscillator model needs a two-mode space");
    }
    if (rho0.rows() != space.dim() || rho0.cols() != space.dim()) {
        throw ArgumentError("trajectories: initial state does not match the space");
    }
    if (!(o.dt > 0.0) || !(o.t_end >= 0.0) || o.record_stride < 1) {
        throw ArgumentError("trajectories: need dt > 0, t_end >= 0 and record_stride >= 1");
    }
}

/// Shared Euler–Maruyama loop; `increment(k)` returns dW of step k.
template <class Increment>
TrajectoryRecord run(const SystemParams& params, const FockSpace& space, const DenseMatrix& rho0,
                     std::size_t steps, const TrajectoryOptions& o, Increment increment) {
    params.validate();
    check_inputs(space, rho0, o);
    const Superoperator L = build_two_osc(params, space);
    const Observables obs = make_observables(space);
    const SparseMatrix c = (annihilation(space, 0) + annihilation(space, 1)).matrix();
    const Real sqrt_gt = std::sqrt(params.g_tilde);
    const Index d = space.dim();

    TrajectoryRecord rec;
    rec.seed = o.seed;
    rec.stream = o.stream;
    rec.dt = o.dt;
    DenseMatrix rho = rho0;
    Vector drift(d * d);
    DenseMatrix cr(d, d);
    DenseMatrix noise(d, d);
    record(rec, obs, rho, 0.0, o, 0);
    for (std::size_t k = 0; k < steps; ++k) {
        drift.noalias() = L.matrix() * Eigen::Map<const Vector>(rho.data(), d * d);
        if (sqrt_gt > 0.0) {
            cr.noalias() = c * rho;
            const Real mean_x = 2.0 * cr.trace().real();
            noise = cr + cr.adjoint() - mean_x * rho;
            rho += o.dt * Eigen::Map<const DenseMatrix>(drift.data(), d, d) +
                   (sqrt_gt * increment(k)) * noise;
        } else {
            rho += o.dt * Eigen::Map<const DenseMatrix>(drift.data(), d, d);
        }
        const Complex tr = rho.trace();
        if (!std::isfinite(tr.real()) || !std::isfinite(tr.imag()) || !rho.allFinite()) {
            throw NumericalError("trajectory produced a non-finite state" + blame(o, k + 1));
        }
        rec.max_trace_defect = std::max(rec.max_trace_defect, std::abs(tr - 1.0));
        rho /= tr.real();
        if ((k + 1) % static_cast<std::size_t>(o.record_stride) == 0) {
            rec.max_hermiticity_defect =
                std::max(rec.max_hermiticity_defect, (rho - rho.adjoint()).cwiseAbs().maxCoeff());
            record(rec, obs, rho, static_cast<Real>(k + 1) * o.dt, o, k + 1);
        }
    }
    finish(rec, std::move(rho));
    return rec;
}

std::size_t step_count(const TrajectoryOptions& o) {
    return static_cast<std::size_t>(std::llround(o.t_end / o.dt));
}

}  // namespace

Real wiener_increment(std::uint64_t seed, std::uint64_t stream, std::uint64_t step, Real dt) {
    const CounterRng rng(seed, stream);
    const auto [z0, z1] = rng.normal2(step / 2);
    return std::sqrt(dt) * ((step % 2 == 0) ? z0 : z1);
}

DenseMatrix vacuum_state(const FockSpace& space) {
    DenseMatrix rho = DenseMatrix::Zero(space.dim(), space.dim());
    rho(0, 0) = 1.0;
    return rho;
}

TrajectoryRecord simulate(const SystemParams& params, const FockSpace& space, const DenseMatrix& rho0,
                          const TrajectoryOptions& o) {
    return run(params, space, rho0, step_count(o), o, [&o](std::size_t k) {
        return wiener_increment(o.seed, o.stream, k, o.dt);
    });
}

TrajectoryRecord simulate(const SystemParams& params, const FockSpace& space,
                          const TrajectoryOptions& options) {
    return simulate(params, space, vacuum_state(space), options);
}

TrajectoryRecord simulate_with_increments(const SystemParams& params, const FockSpace& space,
                                          const DenseMatrix& rho0, const std::vector<Real>& increments,
                                          const TrajectoryOptions& o) {
    return run(params, space, rho0, increments.size(), o,
               [&increments](std::size_t k) { return increments[k]; });
}

std::vector<TrajectoryRecord> simulate_ensemble(const SystemParams& params, const FockSpace& space,
                                                const DenseMatrix& rho0, const TrajectoryOptions& o,
                                                int count, int threads) {
    if (count < 1) {
        throw ArgumentError("simulate_ensemble: count must be positive");
    }
    threads = std::max(1, std::min(threads, count));
    std::vector<TrajectoryRecord> out(static_cast<std::size_t>(count));
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(count));
    std::atomic<int> next{0};
    const auto worker = [&]() {
        for (int i = next++; i < count; i = next++) {
            TrajectoryOptions oi = o;
            oi.stream = o.stream + static_cast<std::uint64_t>(i);
            try {
                out[i] = simulate(params, space, rho0, oi);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (int t = 1; t < threads; ++t) {
        pool.emplace_back(worker);
    }
    worker();
    for (auto& th : pool) {
        th.join();
    }
    for (const auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
    return out;
}

EnsembleSeries ensemble_mean(const std::vector<TrajectoryRecord>& records,
                             TrajectoryObservable observable) {
    if (records.size() < 2) {
        throw ArgumentError("ensemble_mean: needs at least two trajectories");
    }
    const std::vector<Real>& grid = records.front().t;
    for (const TrajectoryRecord& r : records) {
        if (r.t.size() != grid.size()) {
            throw ArgumentError("ensemble_mean: trajectories are recorded on different grids");
        }
        for (std::size_t i = 0; i < grid.size(); ++i) {
            if (std::abs(r.t[i] - grid[i]) > 1e-12 * std::max(1.0, std::abs(grid[i]))) {
                throw ArgumentError("ensemble_mean: trajectories are recorded on different grids");
            }
        }
    }
    const auto value = [observable](const TrajectoryRecord& r, std::size_t i) -> Real {
        switch (observable) {
            case TrajectoryObservable::n_A: return r.n_A[i];
            case TrajectoryObservable::n_B: return r.n_B[i];
            case TrajectoryObservable::re_m1_AB: return r.m1_AB[i].real();
            case TrajectoryObservable::im_m1_AB: return r.m1_AB[i].imag();
            case TrajectoryObservable::abs_m1_A: return std::abs(r.m1_A[i]);
            case TrajectoryObservable::abs_m1_B: return std::abs(r.m1_B[i]);
            case TrajectoryObservable::abs_m1_AB: return std::abs(r.m1_AB[i]);
        }
        return 0.0;
    };
    EnsembleSeries s;
    s.t = grid;
    s.count = static_cast<int>(records.size());
    const Real n = static_cast<Real>(records.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        Real sum = 0.0;
        for (const TrajectoryRecord& r : records) {
            sum += value(r, i);
        }
        const Real mean = sum / n;
        Real var = 0.0;
        for (const TrajectoryRecord& r : records) {
            const Real d = value(r, i) - mean;
            var += d * d;
        }
        var /= (n - 1.0);
        s.mean.push_back(mean);
        s.standard_error.push_back(std::sqrt(var / n));
    }
    return s;
}

}  // namespace qsync

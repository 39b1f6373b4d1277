#include "qsync/steady_state.hpp"

#include "qsync/kron_solver.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <Eigen/SparseLU>
#include <unsupported/Eigen/NonLinearOptimization>
#include <unsupported/Eigen/NumericalDiff>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

namespace qsync {

namespace {

Real hermiticity_defect(const DenseMatrix& rho) {
    return (rho - rho.adjoint()).cwiseAbs().maxCoeff();
}

// Hermitian part with unit trace.
DenseMatrix hermitize(const DenseMatrix& raw) {
    DenseMatrix rho = 0.5 * (raw + raw.adjoint());
    const Complex tr = rho.trace();
    if (std::abs(tr) < 1e-300 || !std::isfinite(std::abs(tr))) {
        throw NumericalError("steady state has zero or non-finite trace");
    }
    return rho / tr.real();
}

Real relative_residual(const Superoperator& L, const DenseMatrix& rho) {
    const Vector v = vectorize(rho);
    return (L.matrix() * v).norm() / v.norm();
}

bool split_is_exact(const Superoperator& L) {
    if (!L.mode_split()) {
        return false;
    }
    const SparseMatrix k = kron_sum_matrix(L.space(), *L.mode_split());
    const SparseMatrix diff = L.matrix() - k;
    return diff.norm() <= 1e-12 * std::max<Real>(1.0, L.matrix().norm());
}

DensityMatrix finish(const Superoperator& L, const DenseMatrix& raw, const SteadyOptions& options,
                     const std::string& method, int iterations) {
    const Real herm = hermiticity_defect(raw / raw.trace());
    DensityMatrix rho(L.space(), hermitize(raw));
    StateDiagnostics& diag = rho.diagnostics();
    diag.hermiticity_defect = herm;
    diag.residual = relative_residual(L, rho.matrix());
    diag.iterations = iterations;
    diag.method = method;
    if (!(diag.residual < options.residual_tol)) {
        std::ostringstream msg;
        msg << "solve_steady(" << method << "): residual " << diag.residual << " above tolerance "
            << options.residual_tol;
        throw ConvergenceError(msg.str(), diag.residual);
    }
    return rho;
}

DensityMatrix solve_dense(const Superoperator& L, const SteadyOptions& options) {
    if (L.dim() > options.dense_max_dim) {
        throw ResourceError("dense steady-state solver refuses superoperator dimension " +
                            std::to_string(L.dim()) + " (limit " +
                            std::to_string(options.dense_max_dim) + ")");
    }
    const DenseMatrix a(L.matrix());
    Eigen::BDCSVD<DenseMatrix> svd(a, Eigen::ComputeFullV);
    const auto& s = svd.singularValues();
    const Index n = s.size();
    if (n >= 2 && s[n - 2] < options.multiplicity_tol) {
        std::ostringstream msg;
        msg << "degenerate steady manifold: second-smallest singular value " << s[n - 2];
        throw MultiplicityError(msg.str());
    }
    const Vector kernel = svd.matrixV().col(n - 1);
    return finish(L, unvectorize(kernel, L.hilbert_dim()), options, "dense", 0);
}

DensityMatrix solve_direct(const Superoperator& L, const SteadyOptions& options) {
    if (L.dim() > options.direct_max_dim) {
        throw ResourceError("sparse LU steady-state solver refuses superoperator dimension " +
                            std::to_string(L.dim()) + " (limit " +
                            std::to_string(options.direct_max_dim) + ")");
    }
    const Index d = L.hilbert_dim();
    const SparseMatrix& m = L.matrix();
    // Row 0 (the ρ(0,0) equation) is linearly dependent on the others through
    // the trace row; it is replaced by Tr ρ = 1.
    std::vector<Eigen::Triplet<Complex>> triplets;
    triplets.reserve(static_cast<std::size_t>(m.nonZeros() + d));
    for (int col = 0; col < m.outerSize(); ++col) {
        for (SparseMatrix::InnerIterator it(m, col); it; ++it) {
            if (it.row() != 0) {
                triplets.emplace_back(it.row(), col, it.value());
            }
        }
    }
    for (Index i = 0; i < d; ++i) {
        triplets.emplace_back(0, i + d * i, 1.0);
    }
    SparseMatrix a(m.rows(), m.cols());
    a.setFromTriplets(triplets.begin(), triplets.end());
    a.makeCompressed();
    Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu;
    lu.analyzePattern(a);
    lu.factorize(a);
    if (lu.info() != Eigen::Success) {
        throw MultiplicityError("sparse LU: trace-constrained generator is singular (" +
                                lu.lastErrorMessage() + ")");
    }
    Vector rhs = Vector::Zero(m.rows());
    rhs[0] = 1.0;
    Vector x = lu.solve(rhs);
    if (lu.info() != Eigen::Success || !x.allFinite()) {
        throw NumericalError("sparse LU: back-substitution failed");
    }
    return finish(L, unvectorize(x, d), options, "direct", 0);
}

DensityMatrix solve_krylov(const Superoperator& L, const SteadyOptions& options) {
    if (!L.mode_split()) {
        throw ArgumentError("krylov steady-state solver needs a generator with a per-mode split");
    }
    const KronSumSolver pre(L.space(), *L.mode_split());
    if (pre.kernel_dim() != 1) {
        if (split_is_exact(L)) {
            throw MultiplicityError("degenerate steady manifold: generator has " +
                                    std::to_string(pre.kernel_dim()) + " zero eigenvalues");
        }
        throw NumericalError("krylov preconditioner is singular beyond its kernel (" +
                             std::to_string(pre.kernel_dim()) +
                             " zero modes); use the direct or dense method");
    }
    const SparseMatrix& m = L.matrix();
    const Vector& rho0 = pre.kernel_state();
    const Vector b = -(m * rho0);
    Vector x0 = Vector::Zero(b.size());
    const DenseMatrix& guess = options.initial_guess;
    if (guess.size() > 0) {
        if (guess.rows() != L.hilbert_dim() || guess.cols() != L.hilbert_dim()) {
            throw ArgumentError("solve_steady: initial guess does not match the generator's space");
        }
        x0 = vectorize(hermitize(guess)) - rho0;
    }
    const GmresResult res = gmres([&](const Vector& v) { return Vector(m * v); },
                                  [&](const Vector& v) { return pre.solve(v, true); }, b,
                                  std::move(x0), options.krylov_tol, options.restart,
                                  options.max_iterations);
    const Vector x = rho0 + res.x;
    DenseMatrix raw = unvectorize(x, L.hilbert_dim());
    if (!res.converged) {
        // Stagnation usually means the traceless restriction of L is singular.
        const Real residual = (m * x).norm() / x.norm();
        if (residual >= options.residual_tol) {
            std::ostringstream msg;
            msg << "GMRES stagnated after " << res.iterations << " iterations at relative residual "
                << res.residual << " (possibly a degenerate steady manifold)";
            throw ConvergenceError(msg.str(), residual);
        }
    }
    return finish(L, raw, options, "krylov", res.iterations);
}

}  // namespace

// =============================================================================
// DensityMatrix
// =============================================================================

DensityMatrix::DensityMatrix(FockSpace space, DenseMatrix rho)
    : space_(std::move(space)), rho_(std::move(rho)) {
    if (rho_.rows() != space_.dim() || rho_.cols() != space_.dim()) {
        throw ArgumentError("DensityMatrix: dimension does not match its Fock space");
    }
    diag_.trace_deviation = std::abs(rho_.trace() - Complex(1.0));
    diag_.hermiticity_defect = hermiticity_defect(rho_);
    const DenseMatrix h = 0.5 * (rho_ + rho_.adjoint());
    Eigen::SelfAdjointEigenSolver<DenseMatrix> es(h, Eigen::EigenvaluesOnly);
    diag_.min_eigenvalue = es.eigenvalues().minCoeff();
    Real top = 0.0;
    for (int j = 0; j < space_.n_modes(); ++j) {
        top = std::max(top, fock_population(*this, j, space_.n_trunc(j) - 1));
    }
    diag_.top_fock_population = top;
}

DensityMatrix DensityMatrix::partial_trace(const std::vector<int>& keep) const {
    if (keep.empty()) {
        throw ArgumentError("partial_trace: keep at least one mode");
    }
    std::vector<int> dims;
    for (int j : keep) {
        space_.check_mode(j);
        dims.push_back(space_.n_trunc(j));
    }
    if (std::set<int>(keep.begin(), keep.end()).size() != keep.size()) {
        throw ArgumentError("partial_trace: repeated mode");
    }
    FockSpace reduced(dims);
    std::vector<int> traced;
    for (int j = 0; j < space_.n_modes(); ++j) {
        if (std::find(keep.begin(), keep.end(), j) == keep.end()) {
            traced.push_back(j);
        }
    }
    const Index d = space_.dim();
    std::vector<Index> kept_index(static_cast<std::size_t>(d));
    std::vector<Index> traced_index(static_cast<std::size_t>(d));
    for (Index i = 0; i < d; ++i) {
        Index k = 0;
        for (std::size_t a = 0; a < keep.size(); ++a) {
            k += space_.occupation(i, keep[a]) * reduced.stride(static_cast<int>(a));
        }
        Index t = 0;
        for (int j : traced) {
            t = t * space_.n_trunc(j) + space_.occupation(i, j);
        }
        kept_index[i] = k;
        traced_index[i] = t;
    }
    DenseMatrix out = DenseMatrix::Zero(reduced.dim(), reduced.dim());
    for (Index c = 0; c < d; ++c) {
        for (Index r = 0; r < d; ++r) {
            if (traced_index[r] == traced_index[c]) {
                out(kept_index[r], kept_index[c]) += rho_(r, c);
            }
        }
    }
    return {std::move(reduced), std::move(out)};
}

Real fock_population(const DensityMatrix& rho, int mode, int n) {
    const FockSpace& s = rho.space();
    s.check_mode(mode);
    Real p = 0.0;
    for (Index i = 0; i < s.dim(); ++i) {
        if (s.occupation(i, mode) == n) {
            p += rho.matrix()(i, i).real();
        }
    }
    return p;
}

// =============================================================================
// solve_steady
// =============================================================================

std::string to_string(SteadyMethod method) {
    switch (method) {
        case SteadyMethod::automatic: return "auto";
        case SteadyMethod::dense: return "dense";
        case SteadyMethod::direct: return "direct";
        case SteadyMethod::krylov: return "krylov";
    }
    return "auto";
}

SteadyMethod steady_method_from_string(const std::string& name) {
    if (name == "auto") return SteadyMethod::automatic;
    if (name == "dense") return SteadyMethod::dense;
    if (name == "direct") return SteadyMethod::direct;
    if (name == "krylov") return SteadyMethod::krylov;
    throw ConfigError("unknown steady-state method '" + name +
                      "' (expected auto, dense, direct or krylov)");
}

DensityMatrix solve_steady(const Superoperator& L, const SteadyOptions& options) {
    if (L.trace_row_defect() > 1e-10 * std::max<Real>(1.0, L.matrix().norm())) {
        throw ArgumentError("solve_steady: generator is not trace preserving (defect " +
                            std::to_string(L.trace_row_defect()) + ")");
    }
    switch (options.method) {
        case SteadyMethod::dense: return solve_dense(L, options);
        case SteadyMethod::direct: return solve_direct(L, options);
        case SteadyMethod::krylov: return solve_krylov(L, options);
        case SteadyMethod::automatic: break;
    }
    if (L.mode_split() && L.dim() >= options.krylov_min_dim) {
        try {
            return solve_krylov(L, options);
        } catch (const MultiplicityError&) {
            throw;
        } catch (const NumericalError&) {
            if (L.dim() > options.direct_max_dim) {
                throw;
            }
        }
    }
    return solve_direct(L, options);
}

DensityMatrix solve_steady(const SystemParams& params, const FockSpace& space,
                           const SteadyOptions& options) {
    const Superoperator L = build_two_osc(params, space);
    const bool krylov = options.method == SteadyMethod::krylov ||
                        (options.method == SteadyMethod::automatic && L.mode_split() &&
                         L.dim() >= options.krylov_min_dim);
    const int n = space.n_trunc();
    const int n_coarse = std::max(6, 3 * n / 5);
    if (!krylov || !space.uniform() || options.initial_guess.size() > 0 || n - n_coarse < 4) {
        return solve_steady(L, options);
    }
    const FockSpace coarse(n_coarse, space.n_modes());
    DenseMatrix guess;
    try {
        SteadyOptions o = options;
        o.method = SteadyMethod::automatic;
        const DensityMatrix r = solve_steady(build_two_osc(params, coarse), o);
        std::vector<Index> to_fine(static_cast<std::size_t>(coarse.dim()));
        for (Index i = 0; i < coarse.dim(); ++i) {
            Index f = 0;
            for (int j = 0; j < coarse.n_modes(); ++j) {
                f += coarse.occupation(i, j) * space.stride(j);
            }
            to_fine[static_cast<std::size_t>(i)] = f;
        }
        guess = DenseMatrix::Zero(space.dim(), space.dim());
        for (Index c = 0; c < coarse.dim(); ++c) {
            for (Index r2 = 0; r2 < coarse.dim(); ++r2) {
                guess(to_fine[static_cast<std::size_t>(r2)], to_fine[static_cast<std::size_t>(c)]) =
                    r.matrix()(r2, c);
            }
        }
    } catch (const NumericalError&) {
        // A coarse failure says little about the fine problem; start cold.
        guess.resize(0, 0);
    }
    SteadyOptions o = options;
    o.initial_guess = std::move(guess);
    return solve_steady(L, o);
}

Real steady_memory_estimate(Index superop_dim, Index nnz, SteadyMethod method, int restart) {
    const Real c = sizeof(Complex);
    const Real dim = static_cast<Real>(superop_dim);
    const Real matrix = static_cast<Real>(nnz) * (c + sizeof(int)) + dim * sizeof(int);
    switch (method) {
        case SteadyMethod::dense: return 2.5 * dim * dim * c + matrix;
        case SteadyMethod::direct: return matrix * 40.0;  // empirical fill-in factor
        case SteadyMethod::automatic:
        case SteadyMethod::krylov: return matrix + (restart + 8.0) * dim * c;
    }
    return matrix;
}

// =============================================================================
// PerturbationExpansion
// =============================================================================

PerturbationExpansion::PerturbationExpansion(FockSpace space, int max_order,
                                             std::map<MultiIndex, DenseMatrix> terms)
    : space_(std::move(space)), max_order_(max_order), terms_(std::move(terms)) {}

const DenseMatrix& PerturbationExpansion::term(const MultiIndex& k) const {
    const auto it = terms_.find(k);
    if (it == terms_.end()) {
        throw ArgumentError("PerturbationExpansion: no term of order (" + std::to_string(k[0]) +
                            "," + std::to_string(k[1]) + "," + std::to_string(k[2]) + ")");
    }
    return it->second;
}

DenseMatrix PerturbationExpansion::evaluate(Real g_ab, Real g_tilde, Real omega_a, int order) const {
    const int top = order < 0 ? max_order_ : std::min(order, max_order_);
    DenseMatrix sum = DenseMatrix::Zero(space_.dim(), space_.dim());
    for (const auto& [k, rho] : terms_) {
        if (k[0] + k[1] + k[2] > top) {
            continue;
        }
        const Real c = std::pow(g_ab, k[0]) * std::pow(g_tilde, k[1]) * std::pow(omega_a, k[2]);
        sum += c * rho;
    }
    return sum;
}

PerturbationExpansion perturbative_steady(const SystemParams& params, const FockSpace& space,
                                          int max_order) {
    if (max_order < 0 || max_order > 4) {
        throw ArgumentError("perturbative_steady: max_order must lie in [0, 4] (got " +
                            std::to_string(max_order) + ")");
    }
    const TwoOscParts parts = two_osc_parts(params, space);
    const KronSumSolver base_inverse(space, *parts.base.mode_split());
    if (base_inverse.kernel_dim() != 1) {
        throw MultiplicityError("perturbative_steady: decoupled generator has a " +
                                std::to_string(base_inverse.kernel_dim()) + "-dimensional kernel");
    }
    const SparseMatrix& l0 = parts.base.matrix();
    const std::array<const SparseMatrix*, 3> perturbation{
        &parts.coherent.matrix(), &parts.dissipative.matrix(), &parts.drive.matrix()};
    const Index d = space.dim();

    std::map<MultiIndex, Vector> vec_terms;
    vec_terms[{0, 0, 0}] = base_inverse.kernel_state();
    for (int order = 1; order <= max_order; ++order) {
        for (int k0 = order; k0 >= 0; --k0) {
            for (int k1 = order - k0; k1 >= 0; --k1) {
                const MultiIndex k{k0, k1, order - k0 - k1};
                Vector rhs = Vector::Zero(d * d);
                for (int i = 0; i < 3; ++i) {
                    if (k[i] == 0) {
                        continue;
                    }
                    MultiIndex lower = k;
                    --lower[i];
                    rhs -= (*perturbation[i]) * vec_terms.at(lower);
                }
                Vector x = base_inverse.solve(rhs, true);
                const Real scale = std::max(rhs.norm(), 1e-300);
                const Real defect = (l0 * x - rhs).norm() / scale;
                if (rhs.norm() > 0.0 && defect > 1e-8) {
                    std::ostringstream msg;
                    msg << "perturbative_steady: inverse of the decoupled generator failed at order ("
                        << k[0] << "," << k[1] << "," << k[2] << "), defect " << defect;
                    throw NumericalError(msg.str());
                }
                vec_terms[k] = std::move(x);
            }
        }
    }
    std::map<MultiIndex, DenseMatrix> terms;
    for (auto& [k, v] : vec_terms) {
        terms.emplace(k, unvectorize(v, d));
    }
    return {space, max_order, std::move(terms)};
}

// =============================================================================
// P_m model
// =============================================================================

Real pm_phi_max(const PmCoefficients& u, Real g_ab, Real g_tilde, Real omega_a, Real gamma) {
    const Real a = u.u1 * g_ab * omega_a * omega_a / (gamma * gamma * gamma) - u.u3 * g_tilde / gamma;
    const Real b = (u.u2 * g_tilde * g_tilde - u.u4 * g_ab * g_ab) / (gamma * gamma);
    const auto value = [&](Real phi) { return a * std::cos(phi) + b * std::cos(2.0 * phi); };
    Real best = 0.0;
    Real best_value = value(0.0);
    if (value(kPi) > best_value) {
        best = kPi;
        best_value = value(kPi);
    }
    if (b < 0.0) {
        const Real c = -a / (4.0 * b);
        if (std::abs(c) <= 1.0) {
            const Real phi = std::acos(c);
            if (value(phi) > best_value) {
                best = phi;
            }
        }
    }
    return best;
}

namespace {

struct PmFunctor {
    using Scalar = double;
    using InputType = Eigen::VectorXd;
    using ValueType = Eigen::VectorXd;
    using JacobianType = Eigen::MatrixXd;
    enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };

    const std::vector<PmSample>* samples;
    Real gamma;

    [[nodiscard]] int inputs() const { return 3; }
    [[nodiscard]] int values() const { return static_cast<int>(samples->size()); }

    static PmCoefficients coefficients(const Eigen::VectorXd& log_u) {
        return {std::exp(log_u[0]), std::exp(log_u[1]), std::exp(log_u[2]), 1.0};
    }

    int operator()(const Eigen::VectorXd& log_u, Eigen::VectorXd& residual) const {
        const PmCoefficients u = coefficients(log_u);
        for (std::size_t i = 0; i < samples->size(); ++i) {
            const PmSample& s = (*samples)[i];
            residual[static_cast<Index>(i)] =
                pm_phi_max(u, s.g_AB, s.g_tilde, s.omega_A, gamma) - s.phi_max;
        }
        return 0;
    }
};

}  // namespace

PmFit pm_fit(const std::vector<PmSample>& samples, Real gamma) {
    std::set<Real> distinct;
    for (const PmSample& s : samples) {
        distinct.insert(s.g_AB);
    }
    if (samples.size() < 4 || distinct.size() < 3) {
        throw ArgumentError("pm_fit: needs at least 4 samples with 3 distinct g_AB values (got " +
                            std::to_string(samples.size()) + " samples, " +
                            std::to_string(distinct.size()) + " distinct)");
    }
    PmFunctor f{&samples, gamma};
    Eigen::NumericalDiff<PmFunctor> numeric(f, 1e-6);
    // The model is piecewise smooth (maxima clamp to 0 or π), so several starts
    // are tried and the best local optimum is kept.
    Eigen::VectorXd best;
    Real best_cost = std::numeric_limits<Real>::infinity();
    Eigen::VectorXd r(f.values());
    for (Real s1 : {1.0, 10.0, 30.0}) {
        for (Real s2 : {1.0, 10.0}) {
            for (Real s3 : {1.0, 10.0, 30.0}) {
                Eigen::VectorXd x(3);
                x << std::log(s1), std::log(s2), std::log(s3);
                Eigen::LevenbergMarquardt<Eigen::NumericalDiff<PmFunctor>> lm(numeric);
                lm.parameters.maxfev = 4000;
                lm.minimize(x);
                f(x, r);
                const Real cost = r.squaredNorm();
                if (cost < best_cost) {
                    best_cost = cost;
                    best = x;
                }
            }
        }
    }
    PmFit fit;
    fit.u = PmFunctor::coefficients(best);
    fit.samples = static_cast<int>(samples.size());
    fit.rms_residual = std::sqrt(best_cost / static_cast<Real>(samples.size()));
    return fit;
}

}  // namespace qsync

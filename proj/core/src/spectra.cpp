#include "qsync/spectra.hpp"

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/FFT>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>

namespace qsync {

namespace {

// Indices reachable from the support of v through the sparsity graph of L. The
// span of these basis vectors is invariant under L, so e^{Lτ}v never leaves it;
// with U(1) symmetry this is one excitation-difference sector.
std::vector<Index> invariant_support(const SparseMatrix& l, const Vector& v) {
    const Index n = l.cols();
    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    std::deque<Index> queue;
    for (Index i = 0; i < n; ++i) {
        if (v[i] != Complex(0.0)) {
            seen[i] = 1;
            queue.push_back(i);
        }
    }
    while (!queue.empty()) {
        const Index c = queue.front();
        queue.pop_front();
        for (SparseMatrix::InnerIterator it(l, static_cast<int>(c)); it; ++it) {
            if (!seen[it.row()] && it.value() != Complex(0.0)) {
                seen[it.row()] = 1;
                queue.push_back(it.row());
            }
        }
    }
    std::vector<Index> support;
    for (Index i = 0; i < n; ++i) {
        if (seen[i]) {
            support.push_back(i);
        }
    }
    return support;
}

SparseMatrix restrict_to(const SparseMatrix& l, const std::vector<Index>& support) {
    std::vector<int> position(static_cast<std::size_t>(l.cols()), -1);
    for (std::size_t k = 0; k < support.size(); ++k) {
        position[support[k]] = static_cast<int>(k);
    }
    std::vector<Eigen::Triplet<Complex>> triplets;
    for (std::size_t k = 0; k < support.size(); ++k) {
        for (SparseMatrix::InnerIterator it(l, static_cast<int>(support[k])); it; ++it) {
            if (position[it.row()] >= 0) {
                triplets.emplace_back(position[it.row()], static_cast<int>(k), it.value());
            }
        }
    }
    const Index m = static_cast<Index>(support.size());
    SparseMatrix out(m, m);
    out.setFromTriplets(triplets.begin(), triplets.end());
    out.makeCompressed();
    return out;
}

// One step v ← e^{A t} v by Arnoldi projection with the a posteriori error
// estimate β·h_{m+1,m}·|[e^{tH_m}]_{m,1}|; the step is split when the Krylov
// dimension is exhausted before the tolerance is met.
struct ExpvWork {
    DenseMatrix basis;
    DenseMatrix h;
    int m_hint = 2;
    int matvecs = 0;
};

void expv(const SparseMatrix& a, Vector& v, Real t, Real tol, int m_max, ExpvWork& work) {
    const Real beta = v.norm();
    if (beta == 0.0) {
        return;
    }
    DenseMatrix& basis = work.basis;
    DenseMatrix& h = work.h;
    int& m_hint = work.m_hint;
    basis.resize(v.size(), m_max + 1);
    h.setZero(m_max + 1, m_max);
    basis.col(0) = v / beta;
    for (int j = 0; j < m_max; ++j) {
        Vector w = a * basis.col(j);
        ++work.matvecs;
        for (int pass = 0; pass < 2; ++pass) {
            const Vector hj = basis.leftCols(j + 1).adjoint() * w;
            w.noalias() -= basis.leftCols(j + 1) * hj;
            h.col(j).head(j + 1) += hj;
        }
        const Real wn = w.norm();
        const int m = j + 1;
        // The small exponential is only formed from the dimension that
        // sufficed on the previous step on.
        if (m < m_hint && wn >= 1e-14 * beta) {
            h(m, j) = wn;
            basis.col(m) = w / wn;
            continue;
        }
        const DenseMatrix e = (t * h.topLeftCorner(m, m)).exp();
        const Real err = beta * wn * std::abs(e(m - 1, 0));
        if (err <= tol * beta || wn < 1e-14 * beta) {
            v = beta * (basis.leftCols(m) * e.col(0));
            m_hint = std::max(2, m - 1);
            return;
        }
        h(m, j) = wn;
        basis.col(m) = w / wn;
    }
    // Not converged within m_max: halve the step.
    m_hint = 2;
    expv(a, v, 0.5 * t, tol, m_max, work);
    expv(a, v, 0.5 * t, tol, m_max, work);
}

}  // namespace

std::string to_string(CorrelationKind kind) {
    switch (kind) {
        case CorrelationKind::AA: return "AA";
        case CorrelationKind::BB: return "BB";
        case CorrelationKind::ABAB: return "ABAB";
    }
    return "AA";
}

CorrelationKind correlation_kind_from_string(const std::string& name) {
    if (name == "AA") return CorrelationKind::AA;
    if (name == "BB") return CorrelationKind::BB;
    if (name == "ABAB") return CorrelationKind::ABAB;
    throw ConfigError("unknown correlation kind '" + name + "' (expected AA, BB or ABAB)");
}

CorrelationOperators correlation_operators(const FockSpace& space, CorrelationKind kind) {
    if (space.n_modes() < 2 && kind != CorrelationKind::AA) {
        throw ArgumentError("correlation " + to_string(kind) + " needs two modes");
    }
    const Operator a = annihilation(space, 0);
    switch (kind) {
        case CorrelationKind::AA: return {a.adjoint(), a};
        case CorrelationKind::BB: {
            const Operator b = annihilation(space, 1);
            return {b.adjoint(), b};
        }
        case CorrelationKind::ABAB: {
            const Operator b = annihilation(space, 1);
            return {b.adjoint() * a, a.adjoint() * b};
        }
    }
    return {a.adjoint(), a};
}

CorrelationSeries correlation(const Superoperator& L, const DensityMatrix& rho_ss,
                              CorrelationKind kind, const CorrelationOptions& options) {
    if (!(L.space() == rho_ss.space())) {
        throw ArgumentError("correlation: generator and state live on different spaces");
    }
    if (options.n_tau < 2 || !(options.tau_max > 0.0)) {
        throw ArgumentError("correlation: need tau_max > 0 and n_tau >= 2");
    }
    const CorrelationOperators ops = correlation_operators(L.space(), kind);
    const DenseMatrix y_rho = ops.y.matrix() * rho_ss.matrix();
    const Vector v_full = vectorize(y_rho);
    // Tr[X σ] = Σ_ij X_ij σ_ji = x·vec(σ) with x = vec(Xᵀ).
    const Vector x_full = vectorize(DenseMatrix(ops.x.matrix().transpose()));

    const std::vector<Index> support = invariant_support(L.matrix(), v_full);
    const SparseMatrix a = restrict_to(L.matrix(), support);
    Vector v(static_cast<Index>(support.size()));
    Vector x(static_cast<Index>(support.size()));
    for (std::size_t k = 0; k < support.size(); ++k) {
        v[static_cast<Index>(k)] = v_full[support[k]];
        x[static_cast<Index>(k)] = x_full[support[k]];
    }

    CorrelationSeries out;
    out.kind = kind;
    out.propagated_dim = static_cast<Index>(support.size());
    out.coherent = rho_ss.expect(ops.x) * rho_ss.expect(ops.y);
    const Real dt = options.tau_max / options.n_tau;
    out.tau.resize(static_cast<std::size_t>(options.n_tau) + 1);
    out.values.resize(out.tau.size());
    out.values[0] = x.transpose() * v;
    out.tau[0] = 0.0;
    ExpvWork work;
    for (int j = 1; j <= options.n_tau; ++j) {
        expv(a, v, dt, options.tol, options.krylov_dim, work);
        if (!v.allFinite()) {
            throw NumericalError("correlation: propagation produced non-finite values");
        }
        out.tau[j] = j * dt;
        out.values[j] = x.transpose() * v;
    }
    out.matvecs = work.matvecs;
    const Real c0 = std::abs(out.values.front() - out.coherent);
    const Real c_end = std::abs(out.values.back() - out.coherent);
    out.decay_ratio = c0 > 0.0 ? c_end / c0 : 0.0;
    if (options.require_decay && out.decay_ratio >= 1e-3) {
        std::ostringstream msg;
        msg << "correlation " << to_string(kind) << ": tau_max = " << options.tau_max
            << " too short, |C(tau_max)|/|C(0)| = " << out.decay_ratio << " (needs < 1e-3)";
        throw NumericalError(msg.str());
    }
    return out;
}

// =============================================================================
// Spectrum
// =============================================================================

Real Spectrum::integral_over_2pi() const {
    Real s = 0.0;
    for (Real v : values) {
        s += v;
    }
    return s * d_omega / kTwoPi;
}

Spectrum spectrum(const CorrelationSeries& c, const SpectrumOptions& options) {
    const int n = static_cast<int>(c.values.size()) - 1;
    if (n < 2) {
        throw ArgumentError("spectrum: correlation series too short");
    }
    const Real dt = c.dtau();
    const Real tau_max = c.tau.back();
    // F(ω_k) = Σ_{j<n} w_j C_j e^{iω_k τ_j} on M = 2n points, ω_k = 2πk/(MΔτ) = kπ/τ_max,
    // trapezoidal weight ½ at τ = 0. The Hermitian extension then gives
    // S(ω) = ∫_{−T}^{T} C e^{iωτ} = Δτ (F + F*) = 2Δτ Re F.
    const int m = 2 * n;
    std::vector<Complex> series(static_cast<std::size_t>(m), 0.0);
    for (int j = 0; j < n; ++j) {
        Complex z = c.values[j] - c.coherent;
        if (options.window_rate > 0.0) {
            z *= std::exp(-options.window_rate * c.tau[j]);
        }
        if (j == 0) {
            z *= 0.5;
        }
        series[j] = std::conj(z);
    }
    Eigen::FFT<Real> fft;
    std::vector<Complex> transformed;
    fft.fwd(transformed, series);
    Spectrum s;
    s.d_omega = kPi / tau_max;
    s.window_rate = options.window_rate;
    s.coherent_weight = kTwoPi * c.coherent.real();
    // Reorder to ascending ω: k = −n .. n−1.
    for (int idx = -n; idx < n; ++idx) {
        const int k = (idx + m) % m;
        const Real omega = idx * s.d_omega;
        if (options.omega_max >= 0.0 && std::abs(omega) > options.omega_max) {
            continue;
        }
        const Complex f = std::conj(transformed[k]);
        // Only f + f* enters; the imaginary residue of the symmetric sum is zero
        // by construction, recorded for completeness.
        const Complex sym = dt * (f + std::conj(f));
        s.max_imag = std::max(s.max_imag, std::abs(sym.imag()));
        s.omega.push_back(omega);
        s.values.push_back(sym.real());
    }
    return s;
}

MaximaResult spectrum_maxima(const Spectrum& s) { return local_maxima(s.omega, s.values, 0.0); }

// =============================================================================
// Cumulant approximation
// =============================================================================

RegressionMatrix analytic_regression(const SystemParams& p, Real n_A, Real n_B) {
    if (!(n_A > 0.0) || !(n_B > 0.0)) {
        throw ArgumentError("analytic_regression: occupations must be positive");
    }
    RegressionMatrix r;
    r.n_A = n_A;
    r.n_B = n_B;
    const Complex e = std::polar(1.0, p.phi);
    r.m(0, 0) = 0.25 * (p.gamma_g_A - 2.0 * p.g_tilde - 4.0 * p.gamma_d_A * n_A);
    r.m(0, 1) = 0.5 * (kI * p.g_AB * std::conj(e) - p.g_tilde);
    r.m(1, 0) = 0.5 * (kI * p.g_AB * e - p.g_tilde);
    r.m(1, 1) = 0.25 * (p.gamma_g_B - 2.0 * p.g_tilde - 4.0 * p.gamma_d_B * n_B);
    Eigen::ComplexEigenSolver<Eigen::Matrix2cd> es(r.m);
    Complex l0 = es.eigenvalues()[0];
    Complex l1 = es.eigenvalues()[1];
    if (l0.imag() < l1.imag() || (l0.imag() == l1.imag() && l0.real() < l1.real())) {
        std::swap(l0, l1);
    }
    r.lambda_plus = l0;
    r.lambda_minus = l1;
    r.omega_plus = l0.imag();
    r.omega_minus = l1.imag();
    return r;
}

std::pair<Complex, Complex> regression_eigenvalues_equal_rates(Real gamma, Real g_ab, Real g_tilde,
                                                               Real n_A, Real n_B) {
    const Complex centre = 0.25 * (gamma * (1.0 - 2.0 * n_A - 2.0 * n_B) - 2.0 * g_tilde);
    const Complex root = 0.5 * std::sqrt(Complex(g_tilde * g_tilde - g_ab * g_ab +
                                                 (n_A - n_B) * (n_A - n_B) * gamma * gamma));
    return {centre + root, centre - root};
}

Real omega_pm_approx(Real g_ab, Real g_tilde) {
    const Real r = g_ab * g_ab - g_tilde * g_tilde;
    return r > 0.0 ? 0.5 * std::sqrt(r) : 0.0;
}

}  // namespace qsync

// Acceptance gate: one PASS/FAIL line per criterion, exit status 1 if any fails.
//
//   qsync_acceptance [--only name ...] [--list]

#include "qsync/meanfield.hpp"
#include "qsync/random.hpp"
#include "qsync/spectra.hpp"
#include "qsync/sync_measures.hpp"
#include "qsync/trajectories.hpp"
#include "support/oracles.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

using namespace qsync;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

class Report {
public:
    Report& operator()(const char* fmt, auto... args) {
        char buf[512];
        std::snprintf(buf, sizeof buf, fmt, args...);
        if (!text_.empty()) {
            text_ += "; ";
        }
        text_ += buf;
        return *this;
    }
    Outcome done(bool pass) const { return {pass, text_}; }

private:
    std::string text_;
};

Real max_abs(const DenseMatrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

Real max_abs(const SparseMatrix& m) {
    Real worst = 0.0;
    for (Index k = 0; k < m.outerSize(); ++k) {
        for (SparseMatrix::InnerIterator it(m, k); it; ++it) {
            worst = std::max(worst, std::abs(it.value()));
        }
    }
    return worst;
}

SystemParams point(Real g, Real gt, Real omega = 0.0, Real phi = -kPi / 2) {
    SystemParams p;
    p.g_AB = g;
    p.g_tilde = gt;
    p.omega_A = omega;
    p.phi = phi;
    return p;
}

DensityMatrix steady(const SystemParams& p, int n) { return solve_steady(build_two_osc(p, FockSpace(n, 2))); }

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

/// Bisection for a sign change of f on [lo, hi].
Real bisect(const std::function<Real(Real)>& f, Real lo, Real hi, int iterations) {
    Real flo = f(lo);
    for (int k = 0; k < iterations; ++k) {
        const Real mid = 0.5 * (lo + hi);
        const Real fm = f(mid);
        if ((fm < 0.0) == (flo < 0.0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

/// First sign change of f on the grid xs, refined by bisection; NaN if none.
Real first_zero(const std::function<Real(Real)>& f, const std::vector<Real>& xs, int iterations) {
    Real prev = f(xs.front());
    for (std::size_t i = 1; i < xs.size(); ++i) {
        const Real cur = f(xs[i]);
        if ((cur < 0.0) != (prev < 0.0)) {
            return bisect(f, xs[i - 1], xs[i], iterations);
        }
        prev = cur;
    }
    return std::nan("");
}

// -----------------------------------------------------------------------------

Outcome steady_certificates() {
    const int n = 20;
    const FockSpace s(n, 2);
    const CounterRng rng(20240601, 0);
    Real trace = 0.0, herm = 0.0, min_eig = 1.0, resid = 0.0, slowest = 0.0, total = 0.0;
    SystemParams slow_point;
    int slow_iterations = 0;
    const int points = 200;
    for (int k = 0; k < points; ++k) {
        const auto [u1, u2] = rng.uniform2(2 * k);
        const auto [u3, u4] = rng.uniform2(2 * k + 1);
        const SystemParams p = point(2.0 * u1, 2.0 * u2, u3, kPi * (2.0 * u4 - 1.0));
        const auto t0 = std::chrono::steady_clock::now();
        const DensityMatrix rho = solve_steady(p, s);
        const double dt = seconds_since(t0);
        const StateDiagnostics& d = rho.diagnostics();
        if (dt > slowest) {
            slowest = dt;
            slow_point = p;
            slow_iterations = d.iterations;
        }
        total += dt;
        trace = std::max(trace, d.trace_deviation);
        herm = std::max(herm, d.hermiticity_defect);
        min_eig = std::min(min_eig, d.min_eigenvalue);
        resid = std::max(resid, d.residual);
    }
    Report r;
    r("%d points, n_trunc %d", points, n)("max trace dev %.1e", trace)("max herm %.1e", herm)(
        "min eig %.1e", min_eig)("max residual %.1e", resid)("slowest %.1f s, mean %.1f s", slowest,
                                                             total / points)(
        "slowest point g_AB %.3f, g_tilde %.3f, Omega_A %.3f, phi %+.3f, %d iterations", slow_point.g_AB,
        slow_point.g_tilde, slow_point.omega_A, slow_point.phi, slow_iterations);
    return r.done(trace < 1e-10 && herm < 1e-10 && min_eig > -1e-8 && resid < 1e-10 && slowest < 10.0);
}

Outcome oracle_equivalence() {
    const int n = 5;
    const FockSpace s(n, 2);
    Real worst = 0.0;
    int count = 0;
    for (int i = 0; i < 5; ++i) {
        for (int j = 0; j < 5; ++j) {
            const SystemParams p = point(0.5 * i, 0.5 * j, 0.5);
            SteadyOptions o;
            o.method = SteadyMethod::direct;
            const DensityMatrix rho = solve_steady(build_two_osc(p, s), o);
            const DenseMatrix ref = oracle::null_state(oracle::dense_generator(p, n), s.dim());
            worst = std::max(worst, max_abs(rho.matrix() - ref));
            ++count;
        }
    }
    Report r;
    r("%d grid points at n_trunc %d, max |drho| %.1e", count, n, worst);
    return r.done(worst < 1e-9);
}

Outcome symmetry_suite() {
    const int n = 8;
    const FockSpace s(n, 2);
    Real imag = 0.0;
    for (Real phi : {kPi / 2, -kPi / 2}) {
        for (const auto& [g, gt] : {std::pair{0.3, 0.05}, {1.2, 0.4}, {0.05, 1.5}}) {
            imag = std::max(imag, build_two_osc(point(g, gt, 0.0, phi), s).max_imag());
        }
    }

    Real u1 = 0.0;
    for (Real phi : {-kPi / 2, 0.4, 2.0}) {
        const SparseMatrix l = build_two_osc(point(0.7, 0.3, 0.0, phi), s).matrix();
        for (Real theta : {0.77, 2.5}) {
            const Complex ph = std::polar(1.0, theta);
            std::vector<Eigen::Triplet<Complex>> diag;
            for (Index k = 0; k < s.dim(); ++k) {
                diag.emplace_back(k, k, std::pow(ph, s.occupation(k, 0) + s.occupation(k, 1)));
            }
            SparseMatrix u(s.dim(), s.dim());
            u.setFromTriplets(diag.begin(), diag.end());
            const SparseMatrix c = unitary_conjugation(Operator(s, u));
            u1 = std::max(u1, max_abs(SparseMatrix(c * l - l * c)));
        }
    }

    Real pt = 0.0;
    const SparseMatrix swap = unitary_conjugation(mode_swap(s, 0, 1));
    for (Real phi : {-kPi / 2, kPi / 2}) {
        for (const auto& [g, gt] : {std::pair{0.3, 0.15}, {1.1, 0.05}, {0.1, 0.3}}) {
            const DensityMatrix plus = steady(point(g, gt, 0.0, phi), n);
            const DensityMatrix minus = steady(point(-g, gt, 0.0, phi), n);
            pt = std::max(pt, max_abs(DenseMatrix(plus.matrix() -
                                                  unvectorize(swap * vectorize(minus.matrix()), s.dim()))));
        }
    }
    Report r;
    r("max |Im L| at phi=+-pi/2, Omega_A=0: %.1e", imag)("U(1) commutator %.1e", u1)(
        "swap + sign flip steady-state difference %.1e", pt);
    return r.done(imag < 1e-12 && u1 < 1e-12 && pt < 1e-9);
}

Outcome drive_b_blockade() {
    const Real g = 0.1;
    const int n = 10;
    Real best = INFINITY;
    Real at = 0.0;
    Real at_ratio = 0.0;
    for (int k = 2; k <= 20; ++k) {
        const Real gt = g * k / 10.0;
        const MomentSet m = moments(steady(point(g, gt, 0.2), n), 1);
        const Real v = std::abs(m.m(1, 1));
        if (v < best) {
            best = v;
            at = gt;
            at_ratio = k / 10.0;
        }
    }
    Report r;
    r("g_AB %.2f, Omega_A 0.2: min |m1_B| = %.1e at g_tilde = %.3f (g_tilde/g_AB = %.2f)", g, best, at,
      at_ratio);
    return r.done(at == g && best < 1e-8);
}

Outcome m2_blockade_zero() {
    const Real g = 0.1;
    const int n = 8;
    const auto m2 = [&](SystemParams p, Real gt) {
        p.g_tilde = gt;
        return moments(steady(p, n), 2).m_rel(2).real();
    };
    std::vector<Real> grid;
    for (int k = 1; k <= 20; ++k) {
        grid.push_back(g * 0.05 * k);
    }
    const SystemParams equal = point(g, 0.0);
    const Real z = first_zero([&](Real gt) { return m2(equal, gt); }, grid, 30);

    SystemParams quantum = point(g, 0.0);
    const Real ratio = 0.02;
    quantum.gamma_g_A = quantum.gamma_g_B = ratio;
    const Real zq = first_zero([&](Real gt) { return m2(quantum, gt); }, grid, 30);
    const Real predicted = std::sqrt(0.6) * (1.0 - 3.0 * ratio / 40.0 * (12.0 + 5.0 * std::sqrt(3.0))) * g;

    Report r;
    r("equal rates: zero of Re m2_AB at g_tilde/g_AB = %.4f (window [0.30, 0.55])", z / g)(
        "gain/damping %.2f: %.4f vs closed form %.4f (%.1f%%)", ratio, zq / g, predicted / g,
        100.0 * std::abs(zq - predicted) / predicted);
    return r.done(z / g >= 0.30 && z / g <= 0.55 && std::abs(zq - predicted) < 0.1 * predicted);
}

Outcome spectral_peaks() {
    Report r;
    bool ok = true;
    for (Real g : {0.5, 1.0, 2.0}) {
        const int n = g > 1.5 ? 12 : 10;
        const FockSpace s(n, 2);
        const Superoperator l = build_two_osc(point(g, 0.01), s);
        const Spectrum sp = spectrum(correlation(l, solve_steady(l), CorrelationKind::AA));
        const MaximaResult m = spectrum_maxima(sp);
        const Real w = omega_pm_approx(g, 0.01);
        // The two largest maxima must sit at +w and -w.
        bool found_plus = false;
        bool found_minus = false;
        Real pos_plus = NAN;
        for (std::size_t k = 0; k < std::min<std::size_t>(2, m.maxima.size()); ++k) {
            const Real x = m.maxima[k].position;
            if (std::abs(x - w) <= 2.0 * sp.d_omega) {
                found_plus = true;
            }
            if (std::abs(x + w) <= 2.0 * sp.d_omega) {
                found_minus = true;
            }
            if (x > 0) {
                pos_plus = x;
            }
        }
        const bool pass = found_plus && found_minus;
        ok = ok && pass;
        r("g_AB %.1f: peak %+.3f vs omega+ %.3f (%s)", g, pos_plus, w, pass ? "ok" : "off");
    }
    for (const auto& [g, want] : {std::pair{0.1, true}, {2.0, false}}) {
        const int n = g > 1.5 ? 12 : 10;
        const FockSpace s(n, 2);
        const Superoperator l = build_two_osc(point(g, 0.01, 0.5), s);
        const Spectrum sp = spectrum(correlation(l, solve_steady(l), CorrelationKind::AA));
        const MaximaResult m = spectrum_maxima(sp);
        Real at_zero = 0.0;
        for (const Maximum& x : m.maxima) {
            if (std::abs(x.position) <= 2.0 * sp.d_omega) {
                at_zero = std::max(at_zero, x.value);
            }
        }
        const Real rel = m.maxima.empty() ? 0.0 : at_zero / m.maxima.front().value;
        const bool pass = want ? rel > 0.05 : rel < 0.05;
        ok = ok && pass;
        r("Omega_A 0.5, g_AB %.1f: omega=0 maximum relative height %.3f (%s)", g, rel,
          want ? "must exist" : "must be absent");
    }
    return r.done(ok);
}

Outcome regression_oracle() {
    const int n = 4;
    const FockSpace s(n, 2);
    const SystemParams p = point(0.7, 0.2, 0.4, 0.3);
    const Superoperator l = build_two_osc(p, s);
    const DensityMatrix rho = solve_steady(l);
    const DenseMatrix ld = oracle::dense_generator(p, n);
    CorrelationOptions o;
    o.tau_max = 20.0;
    o.n_tau = 2000;
    o.require_decay = false;
    Real worst = 0.0;
    for (CorrelationKind kind : {CorrelationKind::AA, CorrelationKind::BB, CorrelationKind::ABAB}) {
        const CorrelationSeries c = correlation(l, rho, kind, o);
        const CorrelationOperators ops = correlation_operators(s, kind);
        const DenseMatrix x = ops.x.dense();
        const Vector start = vectorize(ops.y.dense() * rho.matrix());
        for (int j = 0; j <= o.n_tau; j += 50) {
            const Vector v = (ld * c.tau[j]).exp() * start;
            worst = std::max(worst, std::abs(c.values[j] - (x * unvectorize(v, s.dim())).trace()));
        }
    }

    Real sum_err = 0.0;
    for (const SystemParams& q : {point(1.0, 0.01), point(0.3, 0.2), point(0.1, 0.05)}) {
        const FockSpace s10(10, 2);
        const Superoperator l10 = build_two_osc(q, s10);
        const DensityMatrix r10 = solve_steady(l10);
        const Spectrum sp = spectrum(correlation(l10, r10, CorrelationKind::AA));
        const Real n_a = r10.expect(number(s10, 0)).real();
        sum_err = std::max(sum_err, std::abs(sp.integral_over_2pi() - n_a) / n_a);
    }
    Report r;
    r("integrator vs dense exponential at n_trunc 4: %.1e", worst)("sum rule worst relative error %.2e",
                                                                    sum_err);
    return r.done(worst < 1e-8 && sum_err < 0.01);
}

Outcome meanfield_boundary() {
    Report r;
    bool ok = true;
    for (Real g : {0.1, 0.2, 0.5}) {
        const auto locked = [&](Real gt) {
            EnsembleOptions o;
            o.members = 20;
            o.time_scale = std::max(1.0, 0.5 / (g * g));
            return classify(two_oscillator_model(with_pinned_gain(point(g, gt))), o).label ==
                   PhaseLabel::locked_pi;
        };
        const Real b = boundary_locking(g, 1.0);
        Real lo = 0.5 * b;
        Real hi = 2.0 * b + 0.05;
        for (int k = 0; k < 12; ++k) {
            const Real mid = 0.5 * (lo + hi);
            (locked(mid) ? hi : lo) = mid;
        }
        const Real rel = (hi - b) / b;
        ok = ok && std::abs(rel) < 0.15;
        r("g_AB %.1f: classified %.4f vs %.4f (%+.1f%%)", g, hi, b, 100.0 * rel);
    }
    return r.done(ok);
}

Outcome meanfield_exemplars() {
    struct Case {
        Real g;
        Real gt;
        Real omega;
        PhaseLabel want;
    };
    const std::vector<Case> cases{
        {0.3, 0.7, 0.0, PhaseLabel::locked_pi},
        {0.87, 0.7, 0.0, PhaseLabel::modulated_traveling_wave},
        {3.0, 0.7, 0.0, PhaseLabel::traveling_wave},
        {0.18, 0.056, 0.5, PhaseLabel::locked_drive},
        {0.562, 0.25, 0.5, PhaseLabel::wobble},
        {1.0, 0.05, 0.5, PhaseLabel::partial_traveling_wave},
    };
    Report r;
    bool ok = true;
    for (const Case& c : cases) {
        const EnsembleResult e = classify(two_oscillator_model(with_pinned_gain(point(c.g, c.gt, c.omega))));
        const bool pass = e.label == c.want;
        ok = ok && pass;
        r("(%.3g, %.3g, %.1f) %s%s", c.g, c.gt, c.omega, to_string(e.label).c_str(),
          pass ? "" : (" != " + to_string(c.want)).c_str());
    }
    return r.done(ok);
}

Outcome perturbative_fixed_points() {
    const Real g = 0.02;
    Real worst = 0.0;
    int runs = 0;
    for (Real f : {0.0, 1.0, 3.0}) {
        const SystemParams p = point(g, f * g * g);
        const std::vector<PhaseFixedPoint> fps = perturbative_phase_fixed_points(p);
        IntegrateControls c;
        c.t_end = 60000.0;
        c.sample_dt = 1.0;
        c.record_from = c.t_end - 10.0;
        for (const MFState& a0 : random_unit_states(6, 2, 7, 0)) {
            const MFTrajectory tr = integrate(two_oscillator_model(p), a0, c);
            const PolarState ps = to_polar(tr.states.back());
            const Real phi_ab = wrap_angle(ps.phi_A - ps.phi_B);
            Real nearest = INFINITY;
            for (const PhaseFixedPoint& q : fps) {
                if (q.stable) {
                    nearest = std::min(nearest, std::abs(wrap_angle(phi_ab - q.phi_ab)));
                }
            }
            worst = std::max(worst, nearest);
            ++runs;
        }
    }
    Report r;
    r("g_AB %.2f, %d runs: max distance to a stable perturbative fixed point %.2e rad", g, runs, worst);
    return r.done(worst < 1e-2);
}

Outcome adiabatic_elimination() {
    SystemParams osc = point(0.1, 0.0);
    const Real g_tilde = 0.1;
    SystemParams eff = osc;
    eff.g_tilde = g_tilde;
    const Complex target = moments(steady(eff, 8), 1).m_rel(1);
    std::vector<Real> errors;
    Report r;
    for (Real kappa : {50.0, 100.0, 200.0}) {
        ThreeOscParams p;
        p.osc = osc;
        p.kappa = kappa;
        p.g = std::sqrt(g_tilde * kappa / 2.0);
        const FockSpace s(std::vector<int>{8, 8, 3});
        const DensityMatrix rho = solve_steady(build_three_osc(p, s));
        const Complex m = moments(rho.partial_trace({0, 1}), 1).m_rel(1);
        errors.push_back(std::abs(m - target) / std::abs(target));
        r("kappa %.0f: relative error %.2f%%", kappa, 100.0 * errors.back());
    }
    return r.done(errors[1] < 0.05 && errors[0] > errors[1] && errors[1] > errors[2]);
}

Outcome trajectory_unbiasedness() {
    const int n = 5;
    const FockSpace s(n, 2);
    const Vector psi = oracle::coherent_product(n, {Complex(0.8, 0.0), Complex(0.0, 0.8)});
    const DenseMatrix rho0 = psi * psi.adjoint() / psi.squaredNorm();
    const Real dt = 1e-3;
    const Real t_end = 2.0;
    const long steps = std::lround(t_end / dt);
    TrajectoryOptions o;
    o.seed = 1;
    o.t_end = t_end;
    o.dt = dt;
    o.record_stride = static_cast<int>(steps / 20);

    const SystemParams p = point(0.2, 0.5);
    const std::vector<TrajectoryRecord> recs = simulate_ensemble(p, s, rho0, o, 500, 1);
    const EnsembleSeries e = ensemble_mean(recs, TrajectoryObservable::n_A);
    const DenseMatrix ld(build_two_osc(p, s).matrix());
    const Operator na = number(s, 0);
    Vector v = vectorize(rho0);
    long k = 0;
    Real worst_z = 0.0;
    int checkpoints = 0;
    for (std::size_t i = 1; i < e.t.size(); ++i) {
        const long target = std::lround(e.t[i] / dt);
        v = oracle::euler(ld, v, dt, target - k);
        k = target;
        const Real det = expectation(na, unvectorize(v, s.dim())).real();
        worst_z = std::max(worst_z, std::abs(e.mean[i] - det) / e.standard_error[i]);
        ++checkpoints;
    }

    const SystemParams q = point(0.4, 0.0, 0.3);
    TrajectoryOptions oq = o;
    oq.t_end = 1.0;
    const TrajectoryRecord rq = simulate(q, s, rho0, oq);
    const Vector exact = oracle::euler(oracle::dense_generator(q, n), vectorize(rho0), dt, std::lround(1.0 / dt));
    const Real zero_noise = (vectorize(rq.final_state) - exact).cwiseAbs().maxCoeff();

    Report r;
    r("500 trajectories, %d checkpoints: worst |mean - deterministic| = %.2f standard errors", checkpoints,
      worst_z)("g_tilde = 0 vs deterministic Euler %.1e", zero_noise);
    return r.done(checkpoints == 20 && worst_z < 3.0 && zero_noise < 1e-8);
}

Outcome sg_limits() {
    const FockSpace s(15, 1);
    const Complex alpha = std::polar(0.1, 0.3);
    const std::array<Complex, 1> amp{alpha};
    const Vector psi = coherent_state(s, amp);
    Real worst_ratio = 0.0;
    for (int k = 1; k <= 4; ++k) {
        const Complex m = expectation(sg_power(s, 0, k), psi);
        const Complex lead = std::pow(alpha, k) / std::sqrt(std::tgamma(k + 1.0));
        worst_ratio = std::max(worst_ratio, std::abs(m - lead) / std::pow(std::abs(alpha), k + 2));
    }
    Real iso = 0.0;
    for (int n : {2, 8, 30}) {
        const FockSpace one(n, 1);
        const DenseMatrix e = sg_power(one, 0, 1).dense();
        // ã ã† is the identity; the truncation removes only its top diagonal entry.
        DenseMatrix expected = DenseMatrix::Identity(n, n);
        expected(n - 1, n - 1) = 0.0;
        iso = std::max(iso, max_abs(DenseMatrix(e * e.adjoint() - expected)));
    }
    Report r;
    r("|alpha| = 0.1, k = 1..4: max |<a~^k> - alpha^k/sqrt(k!)| / |alpha|^(k+2) = %.3f", worst_ratio)(
        "isometry defect below the cutoff %.1e", iso);
    return r.done(worst_ratio < 1.0 && iso == 0.0);
}

struct Criterion {
    const char* name;
    Outcome (*run)();
};

const std::vector<Criterion> kCriteria{
    {"steady_certificates", steady_certificates},
    {"oracle_equivalence", oracle_equivalence},
    {"symmetry_suite", symmetry_suite},
    {"drive_b_blockade", drive_b_blockade},
    {"m2_blockade_zero", m2_blockade_zero},
    {"spectral_peaks", spectral_peaks},
    {"regression_oracle", regression_oracle},
    {"meanfield_boundary", meanfield_boundary},
    {"meanfield_exemplars", meanfield_exemplars},
    {"perturbative_fixed_points", perturbative_fixed_points},
    {"adiabatic_elimination", adiabatic_elimination},
    {"trajectory_unbiasedness", trajectory_unbiasedness},
    {"sg_limits", sg_limits},
};

}  // namespace

int main(int argc, char** argv) {
    std::vector<std::string> only;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--list") {
            for (const Criterion& c : kCriteria) {
                std::printf("%s\n", c.name);
            }
            return 0;
        }
        if (a == "--only" && i + 1 < argc) {
            only.emplace_back(argv[++i]);
            continue;
        }
        std::fprintf(stderr, "usage: qsync_acceptance [--list] [--only name]...\n");
        return 2;
    }
    int failed = 0;
    int ran = 0;
    for (const Criterion& c : kCriteria) {
        if (!only.empty() && std::find(only.begin(), only.end(), c.name) == only.end()) {
            continue;
        }
        const auto t0 = std::chrono::steady_clock::now();
        Outcome out;
        try {
            out = c.run();
        } catch (const std::exception& e) {
            out = {false, std::string("exception: ") + e.what()};
        }
        ++ran;
        failed += out.pass ? 0 : 1;
        std::printf("%s  %-26s %s  [%.1f s]\n", out.pass ? "PASS" : "FAIL", c.name, out.detail.c_str(),
                    seconds_since(t0));
        std::fflush(stdout);
    }
    std::printf("%d of %d criteria passed\n", ran - failed, ran);
    return failed == 0 ? 0 : 1;
}

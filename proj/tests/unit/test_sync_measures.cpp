#include <catch_amalgamated.hpp>

#include "qsync/sync_measures.hpp"
#include "support/oracles.hpp"

#include <cmath>

using namespace qsync;

namespace {

SystemParams point(Real g, Real gt, Real omega) {
    SystemParams p;
    p.g_AB = g;
    p.g_tilde = gt;
    p.omega_A = omega;
    return p;
}

DensityMatrix pure(const FockSpace& s, const Vector& psi) {
    return DensityMatrix(s, psi * psi.adjoint());
}

DensityMatrix fock_state(const FockSpace& s, int level) {
    DenseMatrix rho = DenseMatrix::Zero(s.dim(), s.dim());
    rho(level, level) = 1.0;
    return DensityMatrix(s, rho);
}

Real arg_max(const PhaseDistribution& p) {
    int best = 0;
    for (int i = 1; i < p.size(); ++i) {
        if (p.values[i] > p.values[best]) {
            best = i;
        }
    }
    return p.grid[best];
}

Real wrap(Real x) { return std::remainder(x, kTwoPi); }

Real circular_distance(Real x, Real y) { return std::abs(wrap(x - y)); }

}  // namespace

TEST_CASE("Fock states have no phase preference", "[sync]") {
    const FockSpace s(6, 1);
    for (int n : {0, 1, 4}) {
        const PhaseDistribution p = p1(fock_state(s, n), 0);
        for (Real v : p.values) {
            CHECK(std::abs(v) < 1e-15);
        }
        CHECK(find_maxima(p).unsynchronized);
        CHECK(find_maxima(p).maxima.empty());
    }
}

TEST_CASE("weak coherent state: P1 peaks at its phase with the leading cosine", "[sync]") {
    const int n = 20;
    const FockSpace s(n, 1);
    const Complex alpha = std::polar(0.1, kPi / 4);
    const DensityMatrix rho = pure(s, oracle::coherent_product(n, {alpha}));
    const PhaseDistribution p = p1(rho, 0);
    CHECK(p.size() == 720);
    CHECK(std::abs(p.integral()) < 1e-8);
    const MaximaResult m = find_maxima(p);
    REQUIRE(m.maxima.size() == 1);
    CHECK(std::abs(m.maxima[0].position - kPi / 4) < 1e-3);
    // (|α|/π) cos(φ₀ − φ) up to O(|α|²).
    Real worst = 0.0;
    for (int i = 0; i < p.size(); ++i) {
        worst = std::max(worst, std::abs(p.values[i] - 0.1 / kPi * std::cos(kPi / 4 - p.grid[i])));
    }
    CHECK(worst < 0.1 * 0.1 / kPi * 1.5);
    CHECK(worst > 1e-5);
}

TEST_CASE("single distribution is bounded below by minus the background", "[sync][property]") {
    const int n = 25;
    const FockSpace s(n, 1);
    const PhaseDistribution p = p1(pure(s, oracle::coherent_product(n, {Complex(1.5, 1.0)})), 0);
    for (Real v : p.values) {
        CHECK(v >= -1.0 / kTwoPi - 1e-8);
    }
}

TEST_CASE("driven single oscillator locks a quarter turn behind the drive", "[sync]") {
    const int n = 16;
    const FockSpace s(n, 1);
    const Operator a = annihilation(s, 0);
    Superoperator l(s, vdp_mode_generator(n, 1.0, 1.0));
    l += hamiltonian_part(Complex(0.25) * (a + a.adjoint()));
    const DensityMatrix rho = solve_steady(l);
    const MaximaResult m = find_maxima(p1(rho, 0));
    REQUIRE(m.maxima.size() == 1);
    CHECK(circular_distance(m.maxima[0].position, -kPi / 2) < 1e-6);
}

TEST_CASE("distributions are recovered from moments by Fourier integration", "[sync][property]") {
    const int n = 5;
    const FockSpace s(n, 2);
    const DensityMatrix rho = solve_steady(build_two_osc(point(0.4, 0.2, 0.6), s));
    const MomentSet m = moments(rho, n - 1);
    const int grid = 64;
    const PhaseDistribution p = p2_relative(rho, grid);
    const PhaseDistribution pa = p1(rho, 0, grid);
    for (int k = 1; k < n; ++k) {
        Complex rel = 0.0;
        Complex single = 0.0;
        for (int i = 0; i < grid; ++i) {
            const Complex e = std::polar(1.0, k * p.grid[i]) * p.step();
            rel += e * (p.values[i] + 1.0 / kTwoPi);
            single += e * (pa.values[i] + 1.0 / kTwoPi);
        }
        CHECK(std::abs(rel - m.m_rel(k)) < 1e-8);
        CHECK(std::abs(single - m.m(0, k)) < 1e-8);
    }
    CHECK(std::abs(p.integral()) < 1e-8);
}

TEST_CASE("moments are bounded and match dense expectation values", "[sync][property]") {
    const int n = 5;
    const FockSpace s(n, 2);
    const DensityMatrix rho = solve_steady(build_two_osc(point(0.7, 0.3, 0.8), s));
    const MomentSet m = moments(rho, 3);
    DenseMatrix e = DenseMatrix::Zero(n, n);
    for (int k = 0; k + 1 < n; ++k) {
        e(k, k + 1) = 1.0;
    }
    const DenseMatrix id = DenseMatrix::Identity(n, n);
    const DenseMatrix ea = oracle::kron(e, id);
    const DenseMatrix eb = oracle::kron(id, e);
    const DenseMatrix rel = ea * eb.adjoint();
    DenseMatrix pa = ea;
    DenseMatrix pb = eb;
    DenseMatrix pr = rel;
    for (int k = 1; k <= 3; ++k) {
        CHECK(std::abs(m.m(0, k) - (pa * rho.matrix()).trace()) < 1e-14);
        CHECK(std::abs(m.m(1, k) - (pb * rho.matrix()).trace()) < 1e-14);
        CHECK(std::abs(m.m_rel(k) - (pr * rho.matrix()).trace()) < 1e-14);
        CHECK(std::abs(m.m(0, k)) <= 1.0);
        CHECK(std::abs(m.m_rel(k)) <= 1.0);
        pa = pa * ea;
        pb = pb * eb;
        pr = pr * rel;
    }
    CHECK_THROWS_AS(moments(rho, n), ArgumentError);
}

TEST_CASE("joint distribution is normalized", "[sync][property]") {
    const int n = 5;
    const FockSpace s(n, 2);
    const DensityMatrix rho = solve_steady(build_two_osc(point(0.5, 0.1, 0.5), s));
    const JointPhaseDistribution j = p2_joint(rho, 40);
    const Real h = kTwoPi / 40;
    // The background-subtracted values integrate to zero, so P₂ itself integrates to one.
    CHECK(std::abs(j.integral()) < 1e-8);
    // Marginal over φ_B gives P₁ of A.
    const PhaseDistribution pa = p1(rho, 0, 40);
    for (int i = 0; i < 40; ++i) {
        Real marginal = 0.0;
        for (int k = 0; k < 40; ++k) {
            marginal += j.values[i * 40 + k] * h;
        }
        CHECK(std::abs(marginal - pa.values[i]) < 1e-10);
    }
}

TEST_CASE("relative-phase distribution is mirror symmetric at phi = -pi/2", "[sync][property]") {
    const int n = 6;
    const int grid = 360;
    const FockSpace s(n, 2);
    const DensityMatrix rho = solve_steady(build_two_osc(point(0.3, 0.05, 0.0), s));
    REQUIRE(std::abs(moments(rho, 1).m_rel(1).imag()) < 1e-12);
    const PhaseDistribution p = p2_relative(rho, grid);
    for (int i = 1; i < grid; ++i) {
        CHECK(std::abs(p.values[i] - p.values[grid - i]) < 1e-12);
    }
}

TEST_CASE("maxima of analytic test functions", "[sync]") {
    const int grid = 720;
    std::vector<Real> x(grid);
    std::vector<Real> c1(grid);
    std::vector<Real> c2(grid);
    for (int i = 0; i < grid; ++i) {
        x[i] = kTwoPi * i / grid;
        c1[i] = std::cos(x[i] - 0.3001);
        c2[i] = std::cos(2 * x[i]);
    }
    MaximaResult m = local_maxima(x, c1, kTwoPi);
    REQUIRE(m.maxima.size() == 1);
    CHECK(std::abs(m.maxima[0].position - 0.3001) < 1e-5);
    m = local_maxima(x, c2, kTwoPi);
    REQUIRE(m.maxima.size() == 2);
    CHECK(std::min(m.maxima[0].position, m.maxima[1].position) < 1e-9);
    CHECK(std::abs(std::max(m.maxima[0].position, m.maxima[1].position) - kPi) < 1e-9);

    const std::vector<Real> flat(grid, 1e-13);
    CHECK(local_maxima(x, flat, kTwoPi).unsynchronized);
}

TEST_CASE("maxima merging", "[sync]") {
    const int grid = 720;
    const auto make = [&](Real split) {
        PhaseDistribution p;
        p.kind = PhaseKind::relative;
        for (int i = 0; i < grid; ++i) {
            const Real x = kTwoPi * i / grid;
            p.grid.push_back(x);
            p.values.push_back(std::exp(-std::pow(wrap(x - kPi - split), 2) / 0.1) +
                               std::exp(-std::pow(wrap(x - kPi + split), 2) / 0.1));
        }
        return p;
    };
    CHECK(merged_maxima(make(0.6)).size() == 2);
    CHECK(merged_maxima(make(0.05)).size() == 1);
}

TEST_CASE("relative phase of dissipatively coupled oscillators locks at pi", "[sync]") {
    const int n = 10;
    const DensityMatrix rho = solve_steady(build_two_osc(point(0.01, 0.1, 0.0), FockSpace(n, 2)));
    const auto m = merged_maxima(p2_relative(rho));
    REQUIRE(m.size() == 1);
    CHECK(std::abs(m[0].position - kPi) < 1e-6);
}

TEST_CASE("a strong drive on A aligns the relative phase at zero", "[sync]") {
    const int n = 10;
    const DensityMatrix rho = solve_steady(build_two_osc(point(0.1, 0.01, 0.5), FockSpace(n, 2)));
    const auto m = merged_maxima(p2_relative(rho));
    REQUIRE(m.size() == 1);
    CHECK(circular_distance(m[0].position, 0.0) < 1e-3);
}

TEST_CASE("distribution from moments", "[sync]") {
    const PhaseDistribution p =
        distribution_from_moments({Complex(0.0, 0.2), Complex(0.0)}, PhaseKind::single, 360);
    CHECK(std::abs(arg_max(p) - kPi / 2) < kTwoPi / 360);
    CHECK(std::abs(p.integral()) < 1e-12);
}

TEST_CASE("Weiss measure", "[sync]") {
    const int n = 30;
    const FockSpace s(n, 1);
    const DensityMatrix coherent = pure(s, oracle::coherent_product(n, {Complex(0.6, 0.8)}));
    const Complex w = weiss_s(coherent, 0);
    CHECK(std::abs(std::abs(w) - 1.0) < 1e-10);
    CHECK(std::abs(std::arg(w) - std::atan2(0.8, 0.6)) < 1e-10);
    CHECK(std::abs(weiss_s(fock_state(s, 1), 0)) < 1e-15);
    CHECK_THROWS_AS(weiss_s(fock_state(s, 0), 0), NumericalError);

    const DensityMatrix big = pure(s, oracle::coherent_product(n, {Complex(2.5)}));
    CHECK(std::abs(moments(big, 1).m(0, 1)) <= std::abs(weiss_s(big, 0)));
}

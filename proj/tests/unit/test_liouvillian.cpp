#include <catch_amalgamated.hpp>

#include "qsync/liouvillian.hpp"
#include "support/oracles.hpp"

#include <cmath>

using namespace qsync;

namespace {

Real max_abs(const DenseMatrix& m) { return m.cwiseAbs().maxCoeff(); }

SystemParams generic() {
    SystemParams p;
    p.gamma_g_A = 0.9;
    p.gamma_g_B = 1.3;
    p.gamma_d_A = 1.0;
    p.gamma_d_B = 0.7;
    p.g_AB = 0.4;
    p.phi = 0.3;
    p.g_tilde = 0.25;
    p.omega_A = 0.6;
    return p;
}

DenseMatrix random_state(Index d, unsigned seed) {
    std::srand(seed);
    const DenseMatrix x = DenseMatrix::Random(d, d);
    DenseMatrix rho = x * x.adjoint();
    return rho / rho.trace();
}

}  // namespace

TEST_CASE("vectorization stacks columns", "[liouvillian]") {
    DenseMatrix m(2, 2);
    m << 1.0, 2.0, 3.0, 4.0;
    const Vector v = vectorize(m);
    CHECK(v(1) == Complex(3.0));
    CHECK(v(2) == Complex(2.0));
    CHECK(max_abs(unvectorize(v, 2) - m) == 0.0);

    const FockSpace s(3, 1);
    const SparseMatrix left = annihilation(s, 0).matrix();
    const SparseMatrix right = sg_power(s, 0, 1).matrix();
    const DenseMatrix rho = random_state(3, 4);
    const DenseMatrix expected = DenseMatrix(left) * rho * DenseMatrix(right);
    CHECK(max_abs(unvectorize(sandwich(left, right) * vectorize(rho), 3) - expected) < 1e-14);
}

TEST_CASE("two-oscillator generator equals the term-by-term master equation", "[liouvillian]") {
    for (int n : {2, 4}) {
        SystemParams p = generic();
        const DenseMatrix oracle_l = oracle::dense_generator(p, n);
        const Superoperator l = build_two_osc(p, FockSpace(n, 2));
        CHECK(max_abs(DenseMatrix(l.matrix()) - oracle_l) < 1e-12);

        p.phi = -kPi / 2;
        p.omega_A = 0.0;
        CHECK(max_abs(DenseMatrix(build_two_osc(p, FockSpace(n, 2)).matrix()) -
                      oracle::dense_generator(p, n)) < 1e-12);
    }
}

TEST_CASE("generator parts add up to the full generator", "[liouvillian]") {
    const SystemParams p = generic();
    const FockSpace s(4, 2);
    const TwoOscParts parts = two_osc_parts(p, s);
    const Superoperator sum = parts.base + Complex(p.g_AB) * parts.coherent +
                              Complex(p.g_tilde) * parts.dissipative +
                              Complex(p.omega_A) * parts.drive;
    CHECK(max_abs(DenseMatrix(sum.matrix()) - DenseMatrix(build_two_osc(p, s).matrix())) < 1e-13);
}

TEST_CASE("generator preserves trace", "[liouvillian][property]") {
    for (int n : {3, 6}) {
        CHECK(build_two_osc(generic(), FockSpace(n, 2)).trace_row_defect() < 1e-12);
    }
    ThreeOscParams tp;
    tp.osc = generic();
    tp.g = 1.5;
    tp.kappa = 20.0;
    CHECK(build_three_osc(tp, FockSpace(std::vector<int>{3, 3, 2})).trace_row_defect() < 1e-12);
}

TEST_CASE("generator preserves hermiticity", "[liouvillian][property]") {
    const int n = 4;
    const Superoperator l = build_two_osc(generic(), FockSpace(n, 2));
    const DenseMatrix out = l.apply(random_state(n * n, 9));
    CHECK(max_abs(out - out.adjoint()) < 1e-13);
}

TEST_CASE("undriven generator is real for phi = ±pi/2", "[liouvillian][property]") {
    SystemParams p = generic();
    p.omega_A = 0.0;
    for (Real phi : {kPi / 2, -kPi / 2}) {
        p.phi = phi;
        CHECK(build_two_osc(p, FockSpace(4, 2)).max_imag() < 1e-15);
    }
    p.phi = 0.3;
    CHECK(build_two_osc(p, FockSpace(4, 2)).max_imag() > 0.01);
}

TEST_CASE("undriven generator has the U(1) symmetry", "[liouvillian][property]") {
    const int n = 4;
    const FockSpace s(n, 2);
    SystemParams p = generic();
    p.omega_A = 0.0;
    const SparseMatrix l = build_two_osc(p, s).matrix();
    const Complex theta_phase = std::polar(1.0, 0.77);
    DenseMatrix u = DenseMatrix::Zero(s.dim(), s.dim());
    for (Index k = 0; k < s.dim(); ++k) {
        u(k, k) = std::pow(theta_phase, s.occupation(k, 0) + s.occupation(k, 1));
    }
    const Operator uop(s, u.sparseView());
    const DenseMatrix c = DenseMatrix(unitary_conjugation(uop));
    const DenseMatrix ld(l);
    CHECK(max_abs(c * ld - ld * c) < 1e-13);

    // The drive breaks it.
    p.omega_A = 0.5;
    const DenseMatrix driven(build_two_osc(p, s).matrix());
    CHECK(max_abs(c * driven - driven * c) > 0.1);
}

TEST_CASE("exchanging the oscillators maps phi to -phi", "[liouvillian][property]") {
    const int n = 4;
    const FockSpace s(n, 2);
    SystemParams p = generic();
    p.omega_A = 0.0;
    p.gamma_g_B = p.gamma_g_A;
    p.gamma_d_B = p.gamma_d_A;
    const DenseMatrix swap(unitary_conjugation(mode_swap(s, 0, 1)));
    const DenseMatrix l(build_two_osc(p, s).matrix());
    SystemParams q = p;
    q.phi = -p.phi;
    const DenseMatrix lq(build_two_osc(q, s).matrix());
    CHECK(max_abs(swap * l * swap - lq) < 1e-13);
}

TEST_CASE("exchange symmetry at phi in {0, pi}", "[liouvillian][property]") {
    const FockSpace s(3, 2);
    SystemParams p = generic();
    p.omega_A = 0.0;
    p.gamma_g_B = p.gamma_g_A;
    p.gamma_d_B = p.gamma_d_A;
    const DenseMatrix swap(unitary_conjugation(mode_swap(s, 0, 1)));
    for (Real phi : {0.0, kPi}) {
        p.phi = phi;
        const DenseMatrix l(build_two_osc(p, s).matrix());
        CHECK(max_abs(swap * l * swap - l) < 1e-13);
    }
}

TEST_CASE("exchange with a sign flip of g_AB is a symmetry at phi = ±pi/2", "[liouvillian][property]") {
    const FockSpace s(3, 2);
    SystemParams p = generic();
    p.omega_A = 0.0;
    p.gamma_g_B = p.gamma_g_A;
    p.gamma_d_B = p.gamma_d_A;
    const DenseMatrix swap(unitary_conjugation(mode_swap(s, 0, 1)));
    for (Real phi : {-kPi / 2, kPi / 2}) {
        p.phi = phi;
        SystemParams q = p;
        q.g_AB = -p.g_AB;
        const DenseMatrix l(build_two_osc(p, s).matrix());
        const DenseMatrix lq(build_two_osc(q, s).matrix());
        CHECK(max_abs(swap * l * swap - lq) < 1e-13);
    }
    // Away from ±pi/2 the flip is not enough.
    p.phi = 0.3;
    SystemParams q = p;
    q.g_AB = -p.g_AB;
    CHECK(max_abs(swap * DenseMatrix(build_two_osc(p, s).matrix()) * swap -
                  DenseMatrix(build_two_osc(q, s).matrix())) > 0.01);
}

TEST_CASE("dissipators", "[liouvillian]") {
    const FockSpace s(5, 1);
    CHECK(max_abs(DenseMatrix(dissipator(identity(s)).matrix())) < 1e-15);

    const Operator a = annihilation(s, 0);
    const DenseMatrix rho = random_state(5, 3);
    const DenseMatrix got = dissipator(a).apply(rho);
    CHECK(max_abs(got - oracle::dissipate(a.dense(), rho)) < 1e-14);

    // Heisenberg picture on a state far from the cutoff:
    // d⟨a⟩/dt = +⟨a⟩/2 under D[a†], −⟨a⟩/2 under D[a].
    const FockSpace big(30, 1);
    const Complex alpha{0.3, -0.2};
    const Vector psi = oracle::coherent_product(30, {alpha});
    const DenseMatrix r = psi * psi.adjoint();
    const Operator ab = annihilation(big, 0);
    const Complex gain = expectation(ab, dissipator(creation(big, 0)).apply(r));
    const Complex loss = expectation(ab, dissipator(ab).apply(r));
    CHECK(std::abs(gain - 0.5 * alpha) < 1e-10);
    CHECK(std::abs(loss + 0.5 * alpha) < 1e-10);
    // Two-phonon loss: d⟨a⟩/dt = −⟨a†a a⟩ = −|α|²α for a coherent state.
    const Complex two = expectation(ab, dissipator(ab * ab).apply(r));
    CHECK(std::abs(two + std::norm(alpha) * alpha) < 1e-10);
}

TEST_CASE("single-mode van der Pol generator", "[liouvillian]") {
    const int n = 6;
    const FockSpace s(n, 1);
    const Operator a = annihilation(s, 0);
    const Superoperator ref = Complex(0.5 * 1.2) * dissipator(creation(s, 0)) +
                              Complex(0.5 * 0.8) * dissipator(a * a) + Complex(0.3) * dissipator(a);
    CHECK(max_abs(DenseMatrix(vdp_mode_generator(n, 1.2, 0.8, 0.3)) - DenseMatrix(ref.matrix())) < 1e-14);
}

TEST_CASE("effective couplings", "[liouvillian]") {
    SystemParams p;
    p.g_AB = 0.2;
    p.g_tilde = 0.2;
    p.phi = -kPi / 2;
    EffectiveCouplings c = effective_couplings(p);
    CHECK(std::abs(c.a_to_b) < 1e-15);
    CHECK(std::abs(c.b_to_a - Complex(-0.4)) < 1e-15);

    p.phi = kPi / 2;
    c = effective_couplings(p);
    CHECK(std::abs(c.b_to_a) < 1e-15);
    CHECK(std::abs(c.a_to_b - Complex(-0.4)) < 1e-15);

    p.g_tilde = 0.0;
    p.phi = 0.0;
    c = effective_couplings(p);
    CHECK(std::abs(c.a_to_b - Complex(0.0, -0.2)) < 1e-15);
    CHECK(std::abs(c.b_to_a - Complex(0.0, -0.2)) < 1e-15);
}

TEST_CASE("effective couplings agree with the generator's Heisenberg equations", "[liouvillian]") {
    // Coefficient of ⟨a⟩ in d⟨b⟩/dt, read off the linear part with coherent inputs.
    const int n = 14;
    const FockSpace s(n, 2);
    SystemParams p;
    p.gamma_g_A = p.gamma_g_B = 0.0;
    p.gamma_d_A = 1.0;
    p.gamma_d_B = 0.0;
    p.g_AB = 0.3;
    p.phi = 0.4;
    p.g_tilde = 0.2;
    // Neither damping enters d⟨b⟩/dt at ⟨b⟩ = 0, so the coefficient is exact.
    const Superoperator l = build_two_osc(p, s);
    const Real amp = 1e-3;
    const Vector psi = oracle::coherent_product(n, {Complex(amp), Complex(0.0)});
    const DenseMatrix db = l.apply(DenseMatrix(psi * psi.adjoint()));
    const Complex coeff = expectation(annihilation(s, 1), db) / amp;
    CHECK(std::abs(coeff - 0.5 * effective_couplings(p).a_to_b) < 1e-8);
}

TEST_CASE("parameter validation", "[liouvillian]") {
    SystemParams p;
    p.gamma_g_B = -0.1;
    CHECK_THROWS_AS(p.validate(), ArgumentError);
    p = SystemParams{};
    p.gamma_d_A = 0.0;
    CHECK_THROWS_AS(p.validate(), ArgumentError);
    CHECK_THROWS_AS(build_two_osc(SystemParams{}, FockSpace(3, 3)), ArgumentError);
    ThreeOscParams tp;
    tp.kappa = 0.0;
    CHECK_THROWS_AS(tp.validate(), ArgumentError);
}

TEST_CASE("three-oscillator model without cavity coupling reduces", "[liouvillian]") {
    ThreeOscParams tp;
    tp.osc = generic();
    tp.osc.g_tilde = 0.0;
    tp.g = 0.0;
    tp.kappa = 10.0;
    const int n = 3;
    const int nc = 2;
    const FockSpace s(std::vector<int>{n, n, nc});
    const Superoperator l3 = build_three_osc(tp, s);
    // Product with the cavity vacuum is mapped as ρ_AB ↦ L_AB ρ_AB ⊗ |0⟩⟨0|.
    const DenseMatrix rho_ab = random_state(n * n, 17);
    DenseMatrix vac = DenseMatrix::Zero(nc, nc);
    vac(0, 0) = 1.0;
    const DenseMatrix out = l3.apply(oracle::kron(rho_ab, vac));
    const DenseMatrix expected = oracle::kron(build_two_osc(tp.osc, FockSpace(n, 2)).apply(rho_ab), vac);
    CHECK(max_abs(out - expected) < 1e-13);
}

TEST_CASE("three-oscillator Hamiltonian couplings", "[liouvillian]") {
    ThreeOscParams tp;
    tp.osc = SystemParams{};
    tp.osc.gamma_g_A = tp.osc.gamma_g_B = 0.0;
    tp.osc.gamma_d_A = 1.0;
    tp.osc.gamma_d_B = 0.0;
    tp.g = 0.8;
    tp.kappa = 3.0;
    const std::vector<int> dims{3, 3, 3};
    const FockSpace s(dims);
    const Index d = s.dim();
    // Independent construction.
    const DenseMatrix id = DenseMatrix::Identity(3, 3);
    const DenseMatrix lo = oracle::lowering(3);
    const DenseMatrix a = oracle::kron(oracle::kron(lo, id), id);
    const DenseMatrix b = oracle::kron(oracle::kron(id, lo), id);
    const DenseMatrix c = oracle::kron(oracle::kron(id, id), lo);
    DenseMatrix h = 0.5 * tp.g * (b.adjoint() * c + c.adjoint() * a);
    h += DenseMatrix(h.adjoint());
    const auto rhs = [&](const DenseMatrix& r) {
        DenseMatrix out = -kI * (h * r - r * h);
        out += 0.5 * oracle::dissipate(a * a, r);
        out += 0.5 * tp.kappa * oracle::dissipate(c, r);
        return out;
    };
    const DenseMatrix ref = oracle::matrix_of(rhs, d);
    CHECK(max_abs(DenseMatrix(build_three_osc(tp, s).matrix()) - ref) < 1e-12);
}

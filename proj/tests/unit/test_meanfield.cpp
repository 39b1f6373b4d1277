#include <catch_amalgamated.hpp>

#include "qsync/meanfield.hpp"
#include "qsync/random.hpp"

#include <cmath>

using namespace qsync;

namespace {

SystemParams point(Real g, Real gt, Real omega = 0.0) {
    SystemParams p;
    p.g_AB = g;
    p.g_tilde = gt;
    p.omega_A = omega;
    return p;
}

MFTrajectory uniform_rotation(Real omega, Real t_end, Real dt) {
    MFTrajectory tr;
    for (Real t = 0.0; t <= t_end + 1e-12; t += dt) {
        tr.t.push_back(t);
        tr.states.push_back({std::polar(1.0, omega * t)});
        tr.velocities.push_back({kI * omega * std::polar(1.0, omega * t)});
    }
    return tr;
}

EnsembleOptions quick(int members) {
    EnsembleOptions o;
    o.members = members;
    return o;
}

}  // namespace

TEST_CASE("pinned gain", "[meanfield]") {
    SystemParams p = point(0.2, 0.3);
    p.gamma_d_B = 0.5;
    const SystemParams q = with_pinned_gain(p);
    CHECK(q.gamma_g_A == Catch::Approx(1.6));
    CHECK(q.gamma_g_B == Catch::Approx(1.1));
    CHECK(q.g_AB == p.g_AB);
}

TEST_CASE("radial fixed point of a single oscillator", "[meanfield]") {
    SystemParams p = point(0.0, 0.2);
    p.gamma_g_A = 1.4;
    const Real r = std::sqrt((p.gamma_g_A - 2 * p.g_tilde) / (2 * p.gamma_d_A));
    const MFState d = mf_rhs_two({std::polar(r, 0.8), Complex(0.0)}, p);
    CHECK(std::abs(d[0]) < 1e-15);
    const MFState off = mf_rhs_two({std::polar(1.1 * r, 0.8), Complex(0.0)}, p);
    CHECK(std::abs(off[0]) > 1e-3);
}

TEST_CASE("right-hand side written out", "[meanfield]") {
    SystemParams p = point(0.4, 0.15, 0.3);
    p.phi = 0.7;
    p.gamma_g_A = 1.2;
    p.gamma_g_B = 0.9;
    p.gamma_d_B = 0.8;
    const Complex a{0.3, -0.5};
    const Complex b{-0.2, 0.6};
    const MFState d = mf_rhs_two({a, b}, p);
    const Complex e = std::polar(1.0, p.phi);
    const Complex da = -kI * p.omega_A / 2.0 - (kI * p.g_AB * e + p.g_tilde) / 2.0 * b +
                       (p.gamma_g_A - 2 * p.g_tilde - 2 * p.gamma_d_A * std::norm(a)) / 4.0 * a;
    const Complex db = -(kI * p.g_AB * std::conj(e) + p.g_tilde) / 2.0 * a +
                       (p.gamma_g_B - 2 * p.g_tilde - 2 * p.gamma_d_B * std::norm(b)) / 4.0 * b;
    CHECK(std::abs(d[0] - da) < 1e-15);
    CHECK(std::abs(d[1] - db) < 1e-15);
}

TEST_CASE("unidirectional point: B does not see A", "[meanfield]") {
    const SystemParams p = point(0.3, 0.3, 0.5);
    const Complex b{0.4, 0.1};
    const MFState d1 = mf_rhs_two({Complex(0.9, 0.2), b}, p);
    const MFState d2 = mf_rhs_two({Complex(-0.1, 0.7), b}, p);
    CHECK(std::abs(d1[1] - d2[1]) < 1e-15);
    CHECK(std::abs(d1[0] - d2[0]) > 1e-2);
}

TEST_CASE("polar equations agree with the Cartesian ones", "[meanfield][property]") {
    const CounterRng rng(11, 0);
    for (std::uint64_t k = 0; k < 50; ++k) {
        const auto [u0, u1] = rng.uniform2(k);
        const auto [u2, u3] = rng.uniform2(k + 1000);
        const auto [u4, u5] = rng.uniform2(k + 2000);
        SystemParams p = point(2.0 * u4, u5, u0);
        p.phi = kTwoPi * u1;
        p.gamma_g_B = 0.5 + u2;
        const MFState a{std::polar(0.1 + u0, kTwoPi * u2), std::polar(0.1 + u3, kTwoPi * u1)};
        const MFState d = mf_rhs_two(a, p);
        const PolarState s = to_polar(a);
        const PolarState ds = mf_rhs_polar(s, p);
        const Complex ra = d[0] * std::polar(1.0, -s.phi_A);
        const Complex rb = d[1] * std::polar(1.0, -s.phi_B);
        CHECK(std::abs(ds.r_A - ra.real()) < 1e-12);
        CHECK(std::abs(ds.r_B - rb.real()) < 1e-12);
        CHECK(std::abs(ds.phi_A - ra.imag() / s.r_A) < 1e-12);
        CHECK(std::abs(ds.phi_B - rb.imag() / s.r_B) < 1e-12);
        CHECK(std::abs(mf_relative_phase_rate(s, p) - (ds.phi_A - ds.phi_B)) < 1e-12);
    }
}

TEST_CASE("integration converges to the limit cycle", "[meanfield]") {
    const SystemParams p = point(0.0, 0.0);
    IntegrateControls c;
    c.t_end = 100.0;
    c.sample_dt = 0.5;
    const MFTrajectory tr = integrate(two_oscillator_model(p), {Complex(0.1), Complex(0.0, 0.1)}, c);
    REQUIRE(tr.size() == 201);
    CHECK(std::abs(tr.t.back() - 100.0) < 1e-12);
    CHECK(std::abs(std::abs(tr.states.back()[0]) - std::sqrt(0.5)) < 1e-6);
    CHECK(std::abs(std::abs(tr.states.back()[1]) - std::sqrt(0.5)) < 1e-6);
    // Only the radius moves.
    CHECK(std::abs(std::arg(tr.states.back()[1]) - kPi / 2) < 1e-9);

    c.record_from = 50.0;
    CHECK(integrate(two_oscillator_model(p), {Complex(0.1), Complex(0.1)}, c).size() == 101);
}

TEST_CASE("divergence is reported with the model description", "[meanfield]") {
    IntegrateControls c;
    c.t_end = 50.0;
    c.divergence_radius = 0.5;
    const MFModel m = two_oscillator_model(point(0.1, 0.1));
    try {
        (void)integrate(m, {Complex(0.1), Complex(0.1)}, c);
        FAIL("expected a NumericalError");
    } catch (const NumericalError& e) {
        CHECK(std::string(e.what()).find(m.description) != std::string::npos);
    }
}

TEST_CASE("order parameters of simple motions", "[meanfield]") {
    const Window w{10.0, 200.0};
    for (Real omega : {0.7, -1.3}) {
        const MFTrajectory tr = uniform_rotation(omega, 220.0, 0.01);
        CHECK(order_orientation(tr, 0, w) == Catch::Approx(omega > 0 ? 1.0 : -1.0));
        CHECK(order_rotation(tr, 0, w) < 0.02);
    }
    const MFTrajectory still = uniform_rotation(0.0, 220.0, 0.5);
    CHECK(order_rotation(still, 0, w) == Catch::Approx(1.0));
    CHECK(std::abs(order_orientation(still, 0, w)) <= 1.0);
    CHECK_THROWS_AS(order_rotation(still, 0, Window{100.0, 200.0}), ArgumentError);
}

TEST_CASE("phase unwrapping", "[meanfield]") {
    const std::vector<Real> u = unwrap({0.1, 6.2});
    CHECK(u[0] == 0.1);
    CHECK(std::abs(u[1] - (6.2 - kTwoPi)) < 1e-15);
    const std::vector<Real> ramp = unwrap({3.0, -3.0, -0.5, 2.5, -1.0});
    for (std::size_t i = 1; i < ramp.size(); ++i) {
        CHECK(std::abs(ramp[i] - ramp[i - 1]) <= kPi);
    }
    CHECK(std::abs(ramp[1] - (kTwoPi - 3.0)) < 1e-15);
    CHECK(wrap_angle(kPi) == Catch::Approx(kPi));
    CHECK(wrap_angle(-kPi) == Catch::Approx(kPi));
    CHECK(wrap_angle(7.0) == Catch::Approx(7.0 - kTwoPi));
}

TEST_CASE("perturbative phase fixed points", "[meanfield]") {
    const auto find = [](const std::vector<PhaseFixedPoint>& v, Real x) {
        for (const auto& f : v) {
            if (std::abs(wrap_angle(f.phi_ab - x)) < 1e-9) {
                return &f;
            }
        }
        return static_cast<const PhaseFixedPoint*>(nullptr);
    };
    // Coherent coupling alone: stable pair at ±π/2.
    auto fp = perturbative_phase_fixed_points(point(0.2, 0.0));
    REQUIRE(find(fp, kPi / 2));
    REQUIRE(find(fp, -kPi / 2));
    CHECK(find(fp, kPi / 2)->stable);
    CHECK(find(fp, -kPi / 2)->stable);
    CHECK_FALSE(find(fp, 0.0)->stable);

    // g̃ = g²/γ splits them to ±2π/3.
    fp = perturbative_phase_fixed_points(point(0.2, 0.04));
    REQUIRE(find(fp, 2 * kPi / 3));
    CHECK(find(fp, 2 * kPi / 3)->stable);
    CHECK_FALSE(find(fp, kPi)->stable);

    // Strong dissipative coupling: antiphase only.
    fp = perturbative_phase_fixed_points(point(0.2, 0.2));
    REQUIRE(find(fp, kPi));
    CHECK(find(fp, kPi)->stable);
    CHECK(find(fp, 2 * kPi / 3) == nullptr);
}

TEST_CASE("locking boundary", "[meanfield]") {
    CHECK(boundary_locking(0.25, 1.0) == Catch::Approx((std::sqrt(2.0) - 1.0) / 4.0).epsilon(1e-12));
    CHECK(boundary_locking(0.25, 1.0) == Catch::Approx(0.1036).margin(5e-5));
    // On the boundary the antiphase state changes stability under pinned gain.
    for (Real g : {0.1, 0.5, 2.0}) {
        const Real b = boundary_locking(g, 1.0);
        const SystemParams above = with_pinned_gain(point(g, 1.01 * b));
        const SystemParams below = with_pinned_gain(point(g, 0.99 * b));
        const auto stable_pi = [](const SystemParams& p) {
            for (const auto& f : perturbative_phase_fixed_points(p)) {
                if (std::abs(wrap_angle(f.phi_ab - kPi)) < 1e-9) {
                    return f.stable;
                }
            }
            return false;
        };
        CHECK(stable_pi(above));
        CHECK_FALSE(stable_pi(below));
    }
}

TEST_CASE("random initial phases", "[meanfield]") {
    const auto s = random_unit_states(10, 3, 4, 9);
    REQUIRE(s.size() == 10);
    for (const MFState& m : s) {
        REQUIRE(m.size() == 3);
        for (Complex z : m) {
            CHECK(std::abs(std::abs(z) - 1.0) < 1e-15);
        }
    }
    CHECK(random_unit_states(10, 3, 4, 9) == s);
    CHECK(random_unit_states(10, 3, 4, 10) != s);
}

TEST_CASE("label names round trip", "[meanfield]") {
    for (PhaseLabel l : {PhaseLabel::locked_pi, PhaseLabel::locked_zero, PhaseLabel::locked_drive,
                         PhaseLabel::traveling_wave, PhaseLabel::modulated_traveling_wave,
                         PhaseLabel::wobble, PhaseLabel::partial_traveling_wave,
                         PhaseLabel::coexistence, PhaseLabel::unassigned}) {
        CHECK(phase_label_from_string(to_string(l)) == l);
    }
    CHECK_THROWS_AS(phase_label_from_string("locked"), ConfigError);
}

TEST_CASE("classification of clear-cut points", "[meanfield]") {
    const EnsembleResult locked = classify(two_oscillator_model(with_pinned_gain(point(0.05, 0.3))), quick(20));
    CHECK(locked.label == PhaseLabel::locked_pi);
    CHECK(locked.max_locked_rhs_norm < 1e-8);
    CHECK(locked.counts.at(PhaseLabel::locked_pi) == 20);

    const EnsembleResult tw = classify(two_oscillator_model(with_pinned_gain(point(1.0, 0.1))), quick(20));
    CHECK(tw.label == PhaseLabel::traveling_wave);
    for (const TrajectoryMetrics& m : tw.metrics) {
        CHECK(std::abs(std::abs(m.relative_phases[0]) - kPi / 2) < 0.2);
        CHECK(std::abs(m.sites[0].s_ori) > 0.95);
    }
}

TEST_CASE("classification is deterministic in seed and stream", "[meanfield]") {
    const MFModel m = two_oscillator_model(with_pinned_gain(point(0.5, 0.2)));
    EnsembleOptions o = quick(8);
    o.stream = 42;
    const EnsembleResult r1 = classify(m, o);
    const EnsembleResult r2 = classify(m, o);
    CHECK(r1.member_labels == r2.member_labels);
    CHECK(r1.mean_s_ori == r2.mean_s_ori);
}

TEST_CASE("classifier decision table", "[meanfield]") {
    TrajectoryMetrics m;
    m.sites.resize(2);
    for (SiteMetrics& s : m.sites) {
        s.excursion = 1e-5;
        s.s_rot = 1.0;
        s.final_radius = 0.7;
    }
    m.relative_phases = {3.0};
    CHECK(classify_trajectory(m, false) == PhaseLabel::locked_pi);
    m.relative_phases = {0.1};
    CHECK(classify_trajectory(m, false) == PhaseLabel::locked_zero);
    CHECK(classify_trajectory(m, true) == PhaseLabel::locked_drive);

    for (SiteMetrics& s : m.sites) {
        s.excursion = 50.0;
        s.s_ori = 1.0;
        s.s_rot = 0.01;
        s.amplitude_variation = 1e-4;
    }
    CHECK(classify_trajectory(m, false) == PhaseLabel::traveling_wave);
    m.sites[0].amplitude_variation = 0.2;
    CHECK(classify_trajectory(m, false) == PhaseLabel::modulated_traveling_wave);
    m.sites[0].amplitude_variation = 1e-4;
    m.sites[1].excursion = 0.3;
    m.sites[1].s_ori = 0.1;
    m.sites[1].s_rot = 0.6;
    CHECK(classify_trajectory(m, true) == PhaseLabel::partial_traveling_wave);
}

TEST_CASE("open chain couplings", "[meanfield]") {
    ChainParams c;
    c.g_minus = 0.3;
    c.g_tilde = 0.5;
    CHECK(c.coupling(0, 1) == Catch::Approx(0.8));
    CHECK(c.coupling(1, 0) == Catch::Approx(0.2));
    CHECK(c.coupling(1, 2) == Catch::Approx(0.8));
    CHECK(c.coupling(0, 2) == 0.0);
    CHECK(c.coupling(2, 0) == 0.0);
    CHECK(c.pinned().gamma_g[1] == Catch::Approx(2.0));

    const MFState a{Complex(0.5, 0.1), Complex(-0.3, 0.2), Complex(0.1, -0.6)};
    const MFState d = mf_rhs_chain(a, c);
    const Complex db = (1.0 - 1.0 - 2.0 * std::norm(a[1])) / 4.0 * a[1] - 0.8 / 2.0 * a[2] - 0.2 / 2.0 * a[0];
    CHECK(std::abs(d[1] - db) < 1e-15);
    const Complex da = (1.0 - 1.0 - 2.0 * std::norm(a[0])) / 4.0 * a[0] - 0.8 / 2.0 * a[1];
    CHECK(std::abs(d[0] - da) < 1e-15);
}

TEST_CASE("chain with dissipative coupling only locks neighbours in antiphase", "[meanfield]") {
    ChainParams c;
    c.g_tilde = 0.3;
    IntegrateControls ctl;
    ctl.t_end = 400.0;
    ctl.sample_dt = 1.0;
    const MFTrajectory tr = integrate(chain_model(c.pinned()),
                                      {std::polar(1.0, 0.3), std::polar(1.0, 2.0), std::polar(1.0, -1.0)},
                                      ctl);
    const TrajectoryMetrics m = trajectory_metrics(tr, Window{300.0, 100.0});
    REQUIRE(m.relative_phases.size() == 2);
    CHECK(std::abs(std::abs(m.relative_phases[0]) - kPi) < 1e-6);
    CHECK(std::abs(std::abs(m.relative_phases[1]) - kPi) < 1e-6);
    CHECK(m.final_rhs_norm < 1e-8);
}

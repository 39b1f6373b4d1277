#include "qsync/meanfield.hpp"

#include "qsync/random.hpp"

#include <boost/math/tools/roots.hpp>
#include <boost/numeric/odeint.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace qsync {

namespace {

bool is_finite(const MFState& a) {
    return std::all_of(a.begin(), a.end(),
                       [](Complex z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); });
}

Real trapezoid_weight(std::size_t k, std::size_t first, std::size_t last) {
    return (k == first || k == last) ? 0.5 : 1.0;
}

/// Index range [first, last] of samples inside the window.
std::pair<std::size_t, std::size_t> window_range(const MFTrajectory& traj, const Window& w) {
    constexpr Real eps = 1e-9;
    if (traj.size() < 2) {
        throw ArgumentError("mean-field window: trajectory has fewer than two samples");
    }
    const Real end = w.start + w.length;
    if (!(w.length > 0.0) || traj.t.front() > w.start + eps || traj.t.back() < end - eps) {
        std::ostringstream msg;
        msg << "mean-field window [" << w.start << ", " << end << "] exceeds trajectory ["
            << traj.t.front() << ", " << traj.t.back() << "]";
        throw ArgumentError(msg.str());
    }
    const auto lo = std::lower_bound(traj.t.begin(), traj.t.end(), w.start - eps);
    const auto hi = std::upper_bound(traj.t.begin(), traj.t.end(), end + eps);
    return {static_cast<std::size_t>(lo - traj.t.begin()),
            static_cast<std::size_t>(hi - traj.t.begin()) - 1};
}

void check_site(const MFTrajectory& traj, int site) {
    if (site < 0 || site >= traj.n_sites()) {
        throw ArgumentError("mean-field order parameter: site " + std::to_string(site) +
                            " out of range");
    }
}

std::string describe(const SystemParams& p) {
    std::ostringstream s;
    s << "two oscillators (g_AB=" << p.g_AB << ", phi=" << p.phi << ", g_tilde=" << p.g_tilde
      << ", omega_A=" << p.omega_A << ", gamma_g=" << p.gamma_g_A << "/" << p.gamma_g_B
      << ", gamma_d=" << p.gamma_d_A << "/" << p.gamma_d_B << ")";
    return s.str();
}

std::string describe(const ChainParams& p) {
    std::ostringstream s;
    s << "open chain (g_minus=" << p.g_minus << ", g_tilde=" << p.g_tilde << ", gamma_g="
      << p.gamma_g[0] << "/" << p.gamma_g[1] << "/" << p.gamma_g[2] << ", gamma_d=" << p.gamma_d[0]
      << "/" << p.gamma_d[1] << "/" << p.gamma_d[2] << ")";
    return s.str();
}

}  // namespace

Real wrap_angle(Real x) {
    Real y = std::remainder(x, kTwoPi);
    if (y <= -kPi) {
        y += kTwoPi;
    }
    return y;
}

SystemParams with_pinned_gain(SystemParams p) {
    p.gamma_g_A = p.gamma_d_A + 2.0 * p.g_tilde;
    p.gamma_g_B = p.gamma_d_B + 2.0 * p.g_tilde;
    return p;
}

Real ChainParams::coupling(int j, int k) const {
    if (k == j + 1) {
        return g_tilde + g_minus;
    }
    if (k == j - 1) {
        return g_tilde - g_minus;
    }
    return 0.0;
}

ChainParams ChainParams::pinned() const {
    ChainParams c = *this;
    for (int j = 0; j < 3; ++j) {
        c.gamma_g[j] = c.gamma_d[j] + 2.0 * g_tilde;
    }
    return c;
}

void ChainParams::validate() const {
    if (!std::isfinite(g_minus) || !std::isfinite(g_tilde) || g_tilde < 0.0) {
        throw ArgumentError("ChainParams: g_minus must be finite and g_tilde finite, >= 0");
    }
    for (int j = 0; j < 3; ++j) {
        if (!(gamma_g[j] >= 0.0) || !(gamma_d[j] > 0.0) || !std::isfinite(gamma_g[j]) ||
            !std::isfinite(gamma_d[j])) {
            throw ArgumentError("ChainParams: rates must be finite, gamma_g >= 0, gamma_d > 0");
        }
    }
}

MFState mf_rhs_two(const MFState& s, const SystemParams& p) {
    if (s.size() != 2) {
        throw ArgumentError("mf_rhs_two: expected two amplitudes");
    }
    const Complex a = s[0];
    const Complex b = s[1];
    const Complex k_ab = kI * p.g_AB * std::polar(1.0, p.phi) + p.g_tilde;
    const Complex k_ba = kI * p.g_AB * std::polar(1.0, -p.phi) + p.g_tilde;
    return {-kI * (0.5 * p.omega_A) - 0.5 * k_ab * b +
                0.25 * (p.gamma_g_A - 2.0 * p.g_tilde - 2.0 * p.gamma_d_A * std::norm(a)) * a,
            -0.5 * k_ba * a +
                0.25 * (p.gamma_g_B - 2.0 * p.g_tilde - 2.0 * p.gamma_d_B * std::norm(b)) * b};
}

MFState mf_rhs_chain(const MFState& s, const ChainParams& p) {
    if (s.size() != 3) {
        throw ArgumentError("mf_rhs_chain: expected three amplitudes");
    }
    MFState d(3);
    for (int j = 0; j < 3; ++j) {
        d[j] = 0.25 * (p.gamma_g[j] - 2.0 * p.g_tilde - 2.0 * p.gamma_d[j] * std::norm(s[j])) * s[j];
        if (j + 1 < 3) {
            d[j] -= 0.5 * p.coupling(j, j + 1) * s[j + 1];
        }
        if (j - 1 >= 0) {
            d[j] -= 0.5 * p.coupling(j, j - 1) * s[j - 1];
        }
    }
    return d;
}

PolarState to_polar(const MFState& a) {
    if (a.size() != 2) {
        throw ArgumentError("to_polar: expected two amplitudes");
    }
    return {std::abs(a[0]), std::abs(a[1]), std::arg(a[0]), std::arg(a[1])};
}

PolarState mf_rhs_polar(const PolarState& s, const SystemParams& p) {
    const Real phi_ab = s.phi_A - s.phi_B;
    const Real sin_c = std::sin(phi_ab - p.phi);
    const Real cos_c = std::cos(phi_ab - p.phi);
    const Real g = p.g_AB;
    const Real gt = p.g_tilde;
    PolarState d;
    d.r_A = -0.5 * p.omega_A * std::sin(s.phi_A) + 0.25 * (p.gamma_g_A - 2.0 * gt) * s.r_A -
            0.5 * p.gamma_d_A * s.r_A * s.r_A * s.r_A -
            0.5 * s.r_B * (g * sin_c + gt * std::cos(phi_ab));
    d.r_B = 0.25 * (p.gamma_g_B - 2.0 * gt) * s.r_B - 0.5 * p.gamma_d_B * s.r_B * s.r_B * s.r_B +
            0.5 * s.r_A * (g * sin_c - gt * std::cos(phi_ab));
    d.phi_A = -0.5 * p.omega_A / s.r_A * std::cos(s.phi_A) -
              0.5 * s.r_B / s.r_A * (g * cos_c - gt * std::sin(phi_ab));
    d.phi_B = -0.5 * s.r_A / s.r_B * (g * cos_c + gt * std::sin(phi_ab));
    return d;
}

Real mf_relative_phase_rate(const PolarState& s, const SystemParams& p) {
    const Real phi_ab = s.phi_A - s.phi_B;
    const Real ratio = s.r_A / s.r_B;
    return -0.5 * p.omega_A / s.r_A * std::cos(s.phi_A) +
           0.5 * p.g_tilde * (ratio + 1.0 / ratio) * std::sin(phi_ab) +
           0.5 * p.g_AB * (ratio - 1.0 / ratio) * std::cos(phi_ab - p.phi);
}

MFModel two_oscillator_model(const SystemParams& p) {
    p.validate();
    MFModel m;
    m.n_sites = 2;
    m.driven = p.omega_A != 0.0;
    m.rhs = [p](const MFState& s) { return mf_rhs_two(s, p); };
    m.description = describe(p);
    return m;
}

MFModel chain_model(const ChainParams& p) {
    p.validate();
    MFModel m;
    m.n_sites = 3;
    m.rhs = [p](const MFState& s) { return mf_rhs_chain(s, p); };
    m.description = describe(p);
    return m;
}

MFTrajectory integrate(const MFModel& model, const MFState& initial, const IntegrateControls& c) {
    namespace odeint = boost::numeric::odeint;
    using State = std::vector<double>;
    if (static_cast<int>(initial.size()) != model.n_sites) {
        throw ArgumentError("integrate: initial state has " + std::to_string(initial.size()) +
                            " amplitudes, model needs " + std::to_string(model.n_sites));
    }
    if (!(c.t_end > 0.0) || !(c.sample_dt > 0.0) || !(c.rel_tol > 0.0) || !(c.abs_tol > 0.0)) {
        throw ArgumentError("integrate: t_end, sample_dt and tolerances must be positive");
    }
    if (!is_finite(initial)) {
        throw ArgumentError("integrate: initial state is not finite");
    }
    const std::size_t n = initial.size();
    const auto diverged = [&](const MFState& a, Real t) {
        for (std::size_t j = 0; j < n; ++j) {
            const Real r = std::abs(a[j]);
            if (!std::isfinite(r) || r > c.divergence_radius) {
                std::ostringstream msg;
                msg << "mean-field integration diverged at t=" << t << " (site " << j << ", |a|=" << r
                    << ") for " << model.description;
                throw NumericalError(msg.str());
            }
        }
    };
    const auto unpack = [n](const State& x) {
        MFState a(n);
        for (std::size_t j = 0; j < n; ++j) {
            a[j] = Complex(x[2 * j], x[2 * j + 1]);
        }
        return a;
    };
    State x(2 * n);
    for (std::size_t j = 0; j < n; ++j) {
        x[2 * j] = initial[j].real();
        x[2 * j + 1] = initial[j].imag();
    }
    const auto system = [&](const State& y, State& dy, double t) {
        const MFState a = unpack(y);
        diverged(a, t);
        const MFState d = model.rhs(a);
        for (std::size_t j = 0; j < n; ++j) {
            dy[2 * j] = d[j].real();
            dy[2 * j + 1] = d[j].imag();
        }
    };
    MFTrajectory out;
    const auto observe = [&](const State& y, double t) {
        if (t < c.record_from - 1e-9) {
            return;
        }
        MFState a = unpack(y);
        diverged(a, t);
        out.t.push_back(t);
        out.velocities.push_back(model.rhs(a));
        out.states.push_back(std::move(a));
    };
    auto stepper = odeint::make_dense_output(c.abs_tol, c.rel_tol, odeint::runge_kutta_dopri5<State>());
    try {
        // Sample count from the grid, so the final sample sits on t_end up to rounding.
        const auto steps = static_cast<std::size_t>(std::floor(c.t_end / c.sample_dt + 1e-9));
        odeint::integrate_n_steps(stepper, system, x, 0.0, c.sample_dt, steps, observe);
    } catch (const odeint::odeint_error& e) {
        throw NumericalError("mean-field integration failed for " + model.description + ": " +
                             e.what());
    }
    return out;
}

Real order_orientation(const MFTrajectory& traj, int site, const Window& w) {
    check_site(traj, site);
    const auto [first, last] = window_range(traj, w);
    Real acc = 0.0;
    Real span = 0.0;
    for (std::size_t k = first; k <= last; ++k) {
        const Real im = (traj.velocities[k][site] * std::conj(traj.states[k][site])).imag();
        const Real sgn = im > 0.0 ? 1.0 : (im < 0.0 ? -1.0 : 0.0);
        const Real wgt = trapezoid_weight(k, first, last);
        acc += wgt * sgn;
        span += wgt;
    }
    return acc / span;
}

Real order_rotation(const MFTrajectory& traj, int site, const Window& w) {
    check_site(traj, site);
    const auto [first, last] = window_range(traj, w);
    Complex acc = 0.0;
    Real span = 0.0;
    for (std::size_t k = first; k <= last; ++k) {
        const Complex z = traj.states[k][site];
        const Real r = std::abs(z);
        const Real wgt = trapezoid_weight(k, first, last);
        acc += wgt * (r > 0.0 ? z / r : Complex(1.0, 0.0));
        span += wgt;
    }
    return std::abs(acc) / span;
}

std::vector<Real> unwrap(const std::vector<Real>& angles) {
    std::vector<Real> out(angles.size());
    for (std::size_t i = 0; i < angles.size(); ++i) {
        if (i == 0) {
            out[i] = angles[i];
            continue;
        }
        const Real d = angles[i] - angles[i - 1];
        out[i] = out[i - 1] + d - kTwoPi * std::round(d / kTwoPi);
    }
    return out;
}

// =============================================================================
// Classification
// =============================================================================

std::string to_string(PhaseLabel label) {
    switch (label) {
        case PhaseLabel::locked_pi: return "locked_pi";
        case PhaseLabel::locked_zero: return "locked_zero";
        case PhaseLabel::locked_drive: return "locked_drive";
        case PhaseLabel::traveling_wave: return "traveling_wave";
        case PhaseLabel::modulated_traveling_wave: return "modulated_traveling_wave";
        case PhaseLabel::wobble: return "wobble";
        case PhaseLabel::partial_traveling_wave: return "partial_traveling_wave";
        case PhaseLabel::coexistence: return "coexistence";
        case PhaseLabel::unassigned: return "unassigned";
    }
    return "unassigned";
}

PhaseLabel phase_label_from_string(const std::string& name) {
    for (int i = 0; i <= static_cast<int>(PhaseLabel::unassigned); ++i) {
        const auto l = static_cast<PhaseLabel>(i);
        if (to_string(l) == name) {
            return l;
        }
    }
    throw ConfigError("unknown phase label '" + name + "'");
}

TrajectoryMetrics trajectory_metrics(const MFTrajectory& traj, const Window& w) {
    const auto [first, last] = window_range(traj, w);
    TrajectoryMetrics m;
    const int n = traj.n_sites();
    for (int j = 0; j < n; ++j) {
        std::vector<Real> phase;
        Real r_min = std::numeric_limits<Real>::infinity();
        Real r_max = 0.0;
        Real r_sum = 0.0;
        for (std::size_t k = first; k <= last; ++k) {
            const Complex z = traj.states[k][j];
            phase.push_back(std::arg(z));
            const Real r = std::abs(z);
            r_min = std::min(r_min, r);
            r_max = std::max(r_max, r);
            r_sum += r;
        }
        phase = unwrap(phase);
        SiteMetrics s;
        s.s_ori = order_orientation(traj, j, w);
        s.s_rot = order_rotation(traj, j, w);
        const auto [lo, hi] = std::minmax_element(phase.begin(), phase.end());
        s.excursion = *hi - *lo;
        const Real r_mean = r_sum / static_cast<Real>(phase.size());
        s.amplitude_variation = r_mean > 0.0 ? (r_max - r_min) / r_mean : 0.0;
        s.final_phase = std::arg(traj.states[last][j]);
        s.final_radius = std::abs(traj.states[last][j]);
        m.sites.push_back(s);
    }
    for (int j = 0; j + 1 < n; ++j) {
        m.relative_phases.push_back(wrap_angle(m.sites[j].final_phase - m.sites[j + 1].final_phase));
    }
    Real norm2 = 0.0;
    for (Complex v : traj.velocities[last]) {
        norm2 += std::norm(v);
    }
    m.final_rhs_norm = std::sqrt(norm2);
    return m;
}

PhaseLabel classify_trajectory(const TrajectoryMetrics& m, bool driven, const ClassifierThresholds& th) {
    const auto all_sites = [&](auto pred) { return std::all_of(m.sites.begin(), m.sites.end(), pred); };
    const auto any_site = [&](auto pred) { return std::any_of(m.sites.begin(), m.sites.end(), pred); };

    if (all_sites([&](const SiteMetrics& s) { return s.excursion < th.lock_excursion; })) {
        const auto near = [&](Real target) {
            return std::all_of(m.relative_phases.begin(), m.relative_phases.end(), [&](Real x) {
                return std::abs(wrap_angle(x - target)) <= th.locked_phase_tol;
            });
        };
        if (near(kPi)) {
            return PhaseLabel::locked_pi;
        }
        if (near(0.0)) {
            return driven ? PhaseLabel::locked_drive : PhaseLabel::locked_zero;
        }
        return PhaseLabel::unassigned;
    }
    const auto rotating = [&](const SiteMetrics& s) {
        return std::abs(s.s_ori) > th.rotating_ori && s.s_rot < th.rotating_rot;
    };
    // A static site has a noise-driven orientation sign; its excursion decides.
    const auto still = [&](const SiteMetrics& s) {
        return s.excursion < th.lock_excursion || std::abs(s.s_ori) < th.wobble_ori;
    };
    if (all_sites(rotating)) {
        const bool steady_amplitude = all_sites(
            [&](const SiteMetrics& s) { return s.amplitude_variation < th.amplitude_variation; });
        return steady_amplitude ? PhaseLabel::traveling_wave : PhaseLabel::modulated_traveling_wave;
    }
    if (any_site(rotating) &&
        all_sites([&](const SiteMetrics& s) { return rotating(s) || still(s); })) {
        return PhaseLabel::partial_traveling_wave;
    }
    if (all_sites(still) && any_site([&](const SiteMetrics& s) {
            return s.s_rot >= th.wobble_rot_low && s.s_rot <= th.wobble_rot_high &&
                   std::abs(s.s_ori) < th.wobble_ori;
        })) {
        return PhaseLabel::wobble;
    }
    return PhaseLabel::unassigned;
}

std::vector<MFState> random_unit_states(int members, int n_sites, std::uint64_t seed,
                                        std::uint64_t stream) {
    if (members < 1 || n_sites < 1) {
        throw ArgumentError("random_unit_states: members and n_sites must be positive");
    }
    const CounterRng rng(seed, stream);
    std::vector<MFState> out(static_cast<std::size_t>(members), MFState(n_sites));
    for (int m = 0; m < members; ++m) {
        for (int j = 0; j < n_sites; ++j) {
            const auto u = rng.uniform2(static_cast<std::uint64_t>(m) * n_sites + j).first;
            out[m][j] = std::polar(1.0, kTwoPi * u);
        }
    }
    return out;
}

EnsembleResult classify(const MFModel& model, const EnsembleOptions& o) {
    if (!(o.time_scale > 0.0)) {
        throw ArgumentError("classify: time_scale must be positive");
    }
    const Window window{o.window.start * o.time_scale, o.window.length * o.time_scale};
    IntegrateControls controls = o.controls;
    controls.sample_dt *= o.time_scale;
    controls.t_end = std::max(controls.t_end * o.time_scale, window.start + window.length);
    controls.record_from = std::max(controls.record_from * o.time_scale, window.start);
    EnsembleResult res;
    res.mean_s_ori.assign(static_cast<std::size_t>(model.n_sites), 0.0);
    res.mean_s_rot.assign(static_cast<std::size_t>(model.n_sites), 0.0);
    for (const MFState& init : random_unit_states(o.members, model.n_sites, o.seed, o.stream)) {
        const MFTrajectory traj = integrate(model, init, controls);
        TrajectoryMetrics m = trajectory_metrics(traj, window);
        const PhaseLabel label = classify_trajectory(m, model.driven, o.thresholds);
        if (label == PhaseLabel::locked_pi || label == PhaseLabel::locked_zero ||
            label == PhaseLabel::locked_drive) {
            res.max_locked_rhs_norm = std::max(res.max_locked_rhs_norm, m.final_rhs_norm);
        }
        for (int j = 0; j < model.n_sites; ++j) {
            res.mean_s_ori[j] += m.sites[j].s_ori / o.members;
            res.mean_s_rot[j] += m.sites[j].s_rot / o.members;
        }
        ++res.counts[label];
        res.member_labels.push_back(label);
        res.metrics.push_back(std::move(m));
    }
    const Real need = o.thresholds.coexistence_fraction * o.members;
    int frequent_assigned = 0;
    int best = -1;
    for (const auto& [label, count] : res.counts) {
        if (label != PhaseLabel::unassigned && count >= need) {
            ++frequent_assigned;
        }
        if (count > best) {
            best = count;
            res.label = label;
        }
    }
    if (frequent_assigned >= 2) {
        res.label = PhaseLabel::coexistence;
    }
    return res;
}

// =============================================================================
// Perturbative results
// =============================================================================

Real boundary_locking(Real g_ab, Real gamma_d) {
    const Real q = 0.25 * gamma_d;
    return std::sqrt(g_ab * g_ab + q * q) - q;
}

std::vector<PhaseFixedPoint> perturbative_phase_fixed_points(const SystemParams& p) {
    p.validate();
    if (!(p.gamma_g_A > 0.0)) {
        throw ArgumentError("perturbative_phase_fixed_points: needs gamma_g_A > 0");
    }
    const Real k = p.g_AB * p.g_AB / p.gamma_g_A;
    const Real gt = p.g_tilde;
    const auto f = [&](Real x) { return gt * std::sin(x) - k * std::sin(2.0 * (x - p.phi)); };
    const auto df = [&](Real x) { return gt * std::cos(x) - 2.0 * k * std::cos(2.0 * (x - p.phi)); };
    const Real scale = gt + k;
    std::vector<PhaseFixedPoint> out;
    if (!(scale > 0.0)) {
        return out;
    }
    const auto add = [&](Real x) {
        x = wrap_angle(x);
        for (const PhaseFixedPoint& q : out) {
            if (std::abs(wrap_angle(q.phi_ab - x)) < 1e-9) {
                return;
            }
        }
        out.push_back({x, df(x) < -1e-12 * scale});
    };
    constexpr int n = 4096;
    const Real h = kTwoPi / n;
    const Real zero_tol = 1e-14 * scale;
    for (int i = 0; i < n; ++i) {
        const Real x0 = -kPi + i * h;
        const Real x1 = x0 + h;
        const Real f0 = f(x0);
        const Real f1 = f(x1);
        if (std::abs(f0) <= zero_tol) {
            add(x0);
            continue;
        }
        if (std::abs(f1) <= zero_tol) {
            continue;
        }
        if ((f0 < 0.0) != (f1 < 0.0)) {
            boost::uintmax_t iters = 200;
            const auto r = boost::math::tools::toms748_solve(
                f, x0, x1, f0, f1, boost::math::tools::eps_tolerance<Real>(52), iters);
            add(0.5 * (r.first + r.second));
        }
    }
    std::sort(out.begin(), out.end(),
              [](const PhaseFixedPoint& a, const PhaseFixedPoint& b) { return a.phi_ab < b.phi_ab; });
    return out;
}

std::array<Real, 2> perturbative_radii(const SystemParams& p, Real phi_ab) {
    p.validate();
    if (!(p.gamma_g_A > 0.0) || !(p.gamma_g_B > 0.0)) {
        throw ArgumentError("perturbative_radii: needs positive gains");
    }
    const Real r0a = std::sqrt(p.gamma_g_A / (2.0 * p.gamma_d_A));
    const Real r0b = std::sqrt(p.gamma_g_B / (2.0 * p.gamma_d_B));
    const Real c = std::cos(phi_ab);
    const Real s = std::sin(phi_ab - p.phi);
    const Real r1a = -p.g_tilde / p.gamma_g_A * (r0a + r0b * c) - p.g_AB / p.gamma_g_A * r0b * s;
    const Real r1b = -p.g_tilde / p.gamma_g_B * (r0b + r0a * c) + p.g_AB / p.gamma_g_B * r0a * s;
    return {r0a + r1a, r0b + r1b};
}

}  // namespace qsync

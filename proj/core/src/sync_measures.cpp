#include "qsync/sync_measures.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace qsync {

namespace {

std::vector<Real> uniform_grid(int n) {
    if (n < 3) {
        throw ArgumentError("phase grid needs at least 3 points (got " + std::to_string(n) + ")");
    }
    std::vector<Real> g(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        g[i] = kTwoPi * i / n;
    }
    return g;
}

void require_two_modes(const DensityMatrix& rho, const char* who) {
    if (rho.space().n_modes() < 2) {
        throw ArgumentError(std::string(who) + ": needs a state with at least two modes");
    }
}

}  // namespace

Real PhaseDistribution::integral() const {
    Real s = 0.0;
    for (Real v : values) {
        s += v;
    }
    return s * step();
}

Real JointPhaseDistribution::integral() const {
    Real s = 0.0;
    for (Real v : values) {
        s += v;
    }
    const Real h = kTwoPi / static_cast<Real>(grid.size());
    return s * h * h;
}

Complex MomentSet::m(int mode, int n) const {
    if (mode < 0 || mode >= static_cast<int>(single.size()) || n < 1 || n > n_max) {
        throw ArgumentError("MomentSet: moment (" + std::to_string(mode) + ", " + std::to_string(n) +
                            ") not available");
    }
    return single[mode][n - 1];
}

Complex MomentSet::m_rel(int n) const {
    if (relative.empty() || n < 1 || n > n_max) {
        throw ArgumentError("MomentSet: relative moment " + std::to_string(n) + " not available");
    }
    return relative[n - 1];
}

MomentSet moments(const DensityMatrix& rho, int n_max) {
    const FockSpace& s = rho.space();
    if (n_max < 1) {
        throw ArgumentError("moments: n_max must be >= 1");
    }
    for (int j = 0; j < s.n_modes(); ++j) {
        if (n_max >= s.n_trunc(j)) {
            throw ArgumentError("moments: n_max " + std::to_string(n_max) + " >= truncation " +
                                std::to_string(s.n_trunc(j)) + " of mode " + std::to_string(j));
        }
    }
    MomentSet out;
    out.n_max = n_max;
    out.single.resize(static_cast<std::size_t>(s.n_modes()));
    for (int j = 0; j < s.n_modes(); ++j) {
        for (int n = 1; n <= n_max; ++n) {
            out.single[j].push_back(rho.expect(sg_power(s, j, n)));
        }
    }
    if (s.n_modes() >= 2) {
        for (int n = 1; n <= n_max; ++n) {
            out.relative.push_back(rho.expect(sg_power(s, 0, n) * sg_power(s, 1, n).adjoint()));
        }
    }
    return out;
}

PhaseDistribution distribution_from_moments(const std::vector<Complex>& m, PhaseKind kind,
                                            int n_grid) {
    PhaseDistribution p;
    p.kind = kind;
    p.grid = uniform_grid(n_grid);
    p.values.assign(static_cast<std::size_t>(n_grid), 0.0);
    for (int i = 0; i < n_grid; ++i) {
        Real acc = 0.0;
        for (std::size_t k = 0; k < m.size(); ++k) {
            const Complex e = std::polar(1.0, -static_cast<Real>(k + 1) * p.grid[i]);
            acc += 2.0 * (e * m[k]).real();
        }
        p.values[i] = acc / kTwoPi;
    }
    return p;
}

PhaseDistribution p1(const DensityMatrix& rho, int mode, int n_grid) {
    const int n = rho.space().n_trunc(mode);
    const MomentSet ms = moments(rho.partial_trace({mode}), n - 1);
    return distribution_from_moments(ms.single[0], PhaseKind::single, n_grid);
}

PhaseDistribution p2_relative(const DensityMatrix& rho, int n_grid) {
    require_two_modes(rho, "p2_relative");
    const DensityMatrix ab = rho.space().n_modes() == 2 ? rho : rho.partial_trace({0, 1});
    const int top = std::min(ab.space().n_trunc(0), ab.space().n_trunc(1)) - 1;
    const MomentSet ms = moments(ab, top);
    return distribution_from_moments(ms.relative, PhaseKind::relative, n_grid);
}

JointPhaseDistribution p2_joint(const DensityMatrix& full, int n_grid) {
    require_two_modes(full, "p2_joint");
    const DensityMatrix rho = full.space().n_modes() == 2 ? full : full.partial_trace({0, 1});
    const FockSpace& s = rho.space();
    const int na = s.n_trunc(0);
    const int nb = s.n_trunc(1);
    // F(kA, kB) = Σ ρ_{(nA nB),(mA mB)} over mA − nA = kA, mB − nB = kB.
    const int wa = 2 * na - 1;
    const int wb = 2 * nb - 1;
    DenseMatrix f = DenseMatrix::Zero(wa, wb);
    for (int nA = 0; nA < na; ++nA) {
        for (int nB = 0; nB < nb; ++nB) {
            for (int mA = 0; mA < na; ++mA) {
                for (int mB = 0; mB < nb; ++mB) {
                    f(mA - nA + na - 1, mB - nB + nb - 1) += rho.matrix()(nA * nb + nB, mA * nb + mB);
                }
            }
        }
    }
    JointPhaseDistribution p;
    p.grid = uniform_grid(n_grid);
    p.values.assign(static_cast<std::size_t>(n_grid) * n_grid, 0.0);
    const Real norm = 1.0 / (kTwoPi * kTwoPi);
    // Separable evaluation: first over kB for every φ_B, then over kA.
    DenseMatrix t(wa, n_grid);
    for (int j = 0; j < n_grid; ++j) {
        for (int ka = 0; ka < wa; ++ka) {
            Complex acc = 0.0;
            for (int kb = 0; kb < wb; ++kb) {
                acc += f(ka, kb) * std::polar(1.0, (kb - nb + 1) * p.grid[j]);
            }
            t(ka, j) = acc;
        }
    }
    for (int i = 0; i < n_grid; ++i) {
        for (int j = 0; j < n_grid; ++j) {
            Complex acc = 0.0;
            for (int ka = 0; ka < wa; ++ka) {
                acc += t(ka, j) * std::polar(1.0, (ka - na + 1) * p.grid[i]);
            }
            p.values[static_cast<std::size_t>(i) * n_grid + j] = norm * (acc.real() - 1.0);
        }
    }
    return p;
}

// =============================================================================
// Maxima
// =============================================================================

MaximaResult local_maxima(const std::vector<Real>& x, const std::vector<Real>& v, Real period) {
    if (x.size() != v.size() || x.size() < 3) {
        throw ArgumentError("local_maxima: need matching grids with at least 3 points");
    }
    MaximaResult out;
    const int n = static_cast<int>(v.size());
    if (std::all_of(v.begin(), v.end(), [](Real y) { return std::abs(y) < 1e-12; })) {
        out.unsynchronized = true;
        return out;
    }
    const bool periodic = period > 0.0;
    const Real h = x[1] - x[0];
    for (int i = 0; i < n; ++i) {
        if (!periodic && (i == 0 || i == n - 1)) {
            continue;
        }
        const Real left = v[(i - 1 + n) % n];
        const Real right = v[(i + 1) % n];
        if (!(v[i] > left && v[i] > right)) {
            continue;
        }
        const Real curv = left - 2.0 * v[i] + right;
        const Real delta = curv != 0.0 ? 0.5 * (left - right) / curv : 0.0;
        Maximum m;
        m.position = x[i] + delta * h;
        m.value = v[i] - 0.25 * (left - right) * delta;
        if (periodic) {
            m.position = x[0] + std::fmod(std::fmod(m.position - x[0], period) + period, period);
        }
        out.maxima.push_back(m);
    }
    std::sort(out.maxima.begin(), out.maxima.end(),
              [](const Maximum& a, const Maximum& b) { return a.value > b.value; });
    return out;
}

MaximaResult find_maxima(const PhaseDistribution& p) {
    return local_maxima(p.grid, p.values, kTwoPi);
}

std::vector<Maximum> merged_maxima(const PhaseDistribution& p, Real saddle_tol) {
    std::vector<Maximum> peaks = find_maxima(p).maxima;
    const int n = p.size();
    const Real h = p.step();
    const auto grid_index = [&](Real phi) {
        return static_cast<int>(std::lround(phi / h)) % n;
    };
    bool changed = true;
    while (changed && peaks.size() > 1) {
        changed = false;
        std::sort(peaks.begin(), peaks.end(),
                  [](const Maximum& a, const Maximum& b) { return a.position < b.position; });
        for (std::size_t i = 0; i < peaks.size(); ++i) {
            const std::size_t j = (i + 1) % peaks.size();
            const Real sep = std::fmod(peaks[j].position - peaks[i].position + kTwoPi, kTwoPi);
            // Lowest grid value on the arc from peak i forward to peak j.
            const int a = grid_index(peaks[i].position);
            const int steps = static_cast<int>(std::lround(sep / h));
            Real saddle = std::min(peaks[i].value, peaks[j].value);
            for (int s = 0; s <= steps; ++s) {
                saddle = std::min(saddle, p.values[(a + s) % n]);
            }
            const Real lower = std::min(peaks[i].value, peaks[j].value);
            if (sep < 2.0 * h || lower - saddle < saddle_tol) {
                const std::size_t drop = peaks[i].value >= peaks[j].value ? j : i;
                peaks.erase(peaks.begin() + static_cast<std::ptrdiff_t>(drop));
                changed = true;
                break;
            }
        }
    }
    std::sort(peaks.begin(), peaks.end(),
              [](const Maximum& a, const Maximum& b) { return a.value > b.value; });
    return peaks;
}

Complex weiss_s(const DensityMatrix& rho, int mode) {
    const FockSpace& s = rho.space();
    const Complex a = rho.expect(annihilation(s, mode));
    const Real n = rho.expect(number(s, mode)).real();
    if (!(n > 1e-14)) {
        throw NumericalError("weiss_s: <a†a> = " + std::to_string(n) +
                             " is too small for the measure to be defined");
    }
    return a / std::sqrt(n);
}

}  // namespace qsync

#include "qsync/liouvillian.hpp"

#include <unsupported/Eigen/KroneckerProduct>

#include <cmath>
#include <string>

namespace qsync {

namespace {

SparseMatrix sparse_identity(Index n) {
    SparseMatrix id(n, n);
    id.setIdentity();
    return id;
}

std::vector<SparseMatrix> zero_split(const FockSpace& space) {
    std::vector<SparseMatrix> split;
    for (int j = 0; j < space.n_modes(); ++j) {
        const Index n2 = static_cast<Index>(space.n_trunc(j)) * space.n_trunc(j);
        split.emplace_back(n2, n2);
    }
    return split;
}

void require_nonnegative(Real value, const char* name) {
    if (!(value >= 0.0) || !std::isfinite(value)) {
        throw ArgumentError(std::string("parameter ") + name + " must be finite and >= 0 (got " +
                            std::to_string(value) + ")");
    }
}

}  // namespace

void SystemParams::validate() const {
    require_nonnegative(gamma_g_A, "gamma_g_A");
    require_nonnegative(gamma_g_B, "gamma_g_B");
    require_nonnegative(gamma_d_A, "gamma_d_A");
    require_nonnegative(gamma_d_B, "gamma_d_B");
    // A negative g_AB is the same coupling with phi shifted by pi.
    if (!std::isfinite(g_AB)) {
        throw ArgumentError("parameter g_AB must be finite");
    }
    require_nonnegative(g_tilde, "g_tilde");
    require_nonnegative(omega_A, "omega_A");
    if (!(gamma_d_A > 0.0)) {
        throw ArgumentError("parameter gamma_d_A must be > 0: it sets the unit of time");
    }
    if (!std::isfinite(phi)) {
        throw ArgumentError("parameter phi must be finite");
    }
}

void ThreeOscParams::validate() const {
    osc.validate();
    require_nonnegative(g, "g");
    if (!(kappa > 0.0) || !std::isfinite(kappa)) {
        throw ArgumentError("parameter kappa must be finite and > 0");
    }
}

// =============================================================================
// Superoperator
// =============================================================================

Superoperator::Superoperator(FockSpace space, SparseMatrix matrix,
                             std::optional<std::vector<SparseMatrix>> mode_split)
    : space_(std::move(space)), matrix_(std::move(matrix)), split_(std::move(mode_split)) {
    const Index d = space_.dim();
    if (matrix_.rows() != d * d || matrix_.cols() != d * d) {
        throw ArgumentError("Superoperator: matrix must be d²×d² with d=" + std::to_string(d));
    }
    if (split_) {
        if (static_cast<int>(split_->size()) != space_.n_modes()) {
            throw ArgumentError("Superoperator: split needs one generator per mode");
        }
        for (int j = 0; j < space_.n_modes(); ++j) {
            const Index n2 = static_cast<Index>(space_.n_trunc(j)) * space_.n_trunc(j);
            if ((*split_)[j].rows() != n2 || (*split_)[j].cols() != n2) {
                throw ArgumentError("Superoperator: split generator has wrong size");
            }
        }
    }
    matrix_.makeCompressed();
}

DenseMatrix Superoperator::apply(const DenseMatrix& rho) const {
    return unvectorize(matrix_ * vectorize(rho), hilbert_dim());
}

Real Superoperator::trace_row_defect() const {
    const Index d = hilbert_dim();
    Real worst = 0.0;
    for (int col = 0; col < matrix_.outerSize(); ++col) {
        Complex sum = 0.0;
        for (SparseMatrix::InnerIterator it(matrix_, col); it; ++it) {
            if (it.row() % (d + 1) == 0) {
                sum += it.value();
            }
        }
        worst = std::max(worst, std::abs(sum));
    }
    return worst;
}

Real Superoperator::max_imag() const {
    Real worst = 0.0;
    for (int col = 0; col < matrix_.outerSize(); ++col) {
        for (SparseMatrix::InnerIterator it(matrix_, col); it; ++it) {
            worst = std::max(worst, std::abs(it.value().imag()));
        }
    }
    return worst;
}

Superoperator& Superoperator::operator+=(const Superoperator& other) {
    if (!(space_ == other.space_)) {
        throw ArgumentError("Superoperator: operands live on different Fock spaces");
    }
    matrix_ += other.matrix_;
    matrix_.makeCompressed();
    if (split_ && other.split_) {
        for (std::size_t j = 0; j < split_->size(); ++j) {
            (*split_)[j] += (*other.split_)[j];
        }
    } else {
        split_.reset();
    }
    return *this;
}

Superoperator& Superoperator::operator*=(Complex scale) {
    matrix_ *= scale;
    if (split_) {
        for (auto& g : *split_) {
            g *= scale;
        }
    }
    return *this;
}

// =============================================================================
// Building blocks
// =============================================================================

Vector vectorize(const DenseMatrix& rho) {
    return Eigen::Map<const Vector>(rho.data(), rho.size());
}

DenseMatrix unvectorize(const Vector& vec_rho, Index d) {
    if (vec_rho.size() != d * d) {
        throw ArgumentError("unvectorize: vector length is not d²");
    }
    return Eigen::Map<const DenseMatrix>(vec_rho.data(), d, d);
}

SparseMatrix sandwich(const SparseMatrix& left, const SparseMatrix& right) {
    return Eigen::kroneckerProduct(SparseMatrix(right.transpose()), left).eval();
}

Superoperator dissipator(const Operator& jump) {
    const SparseMatrix& l = jump.matrix();
    const SparseMatrix id = sparse_identity(jump.dim());
    const SparseMatrix ldl = SparseMatrix(l.adjoint()) * l;
    SparseMatrix m = Eigen::kroneckerProduct(SparseMatrix(l.conjugate()), l).eval();
    m -= 0.5 * SparseMatrix(Eigen::kroneckerProduct(id, ldl));
    m -= 0.5 * SparseMatrix(Eigen::kroneckerProduct(SparseMatrix(ldl.transpose()), id));
    m.prune(Complex(0.0), 0.0);
    return {jump.space(), std::move(m)};
}

Superoperator hamiltonian_part(const Operator& hamiltonian) {
    const SparseMatrix& h = hamiltonian.matrix();
    const SparseMatrix id = sparse_identity(hamiltonian.dim());
    SparseMatrix m = Eigen::kroneckerProduct(id, h).eval();
    m -= SparseMatrix(Eigen::kroneckerProduct(SparseMatrix(h.transpose()), id));
    m *= Complex(0.0, -1.0);
    m.prune(Complex(0.0), 0.0);
    return {hamiltonian.space(), std::move(m)};
}

SparseMatrix unitary_conjugation(const Operator& unitary) {
    return Eigen::kroneckerProduct(SparseMatrix(unitary.matrix().conjugate()), unitary.matrix()).eval();
}

SparseMatrix vdp_mode_generator(int n_trunc, Real gamma_g, Real gamma_d, Real loss) {
    const FockSpace mode(n_trunc, 1);
    const Operator a = annihilation(mode, 0);
    SparseMatrix m(static_cast<Index>(n_trunc) * n_trunc, static_cast<Index>(n_trunc) * n_trunc);
    if (gamma_g != 0.0) {
        m += (0.5 * gamma_g) * dissipator(a.adjoint()).matrix();
    }
    if (gamma_d != 0.0) {
        m += (0.5 * gamma_d) * dissipator(a * a).matrix();
    }
    if (loss != 0.0) {
        m += loss * dissipator(a).matrix();
    }
    m.makeCompressed();
    return m;
}

// =============================================================================
// Models
// =============================================================================

TwoOscParts two_osc_parts(const SystemParams& params, const FockSpace& space) {
    params.validate();
    if (space.n_modes() != 2) {
        throw ArgumentError("build_two_osc: needs a two-mode space (got " +
                            std::to_string(space.n_modes()) + " modes)");
    }
    const Operator a = annihilation(space, 0);
    const Operator b = annihilation(space, 1);
    const Operator ad = a.adjoint();
    const Operator bd = b.adjoint();

    SparseMatrix base = (0.5 * params.gamma_g_A) * dissipator(ad).matrix();
    base += (0.5 * params.gamma_g_B) * dissipator(bd).matrix();
    base += (0.5 * params.gamma_d_A) * dissipator(a * a).matrix();
    base += (0.5 * params.gamma_d_B) * dissipator(b * b).matrix();
    base.prune(Complex(0.0), 0.0);
    std::vector<SparseMatrix> base_split{
        vdp_mode_generator(space.n_trunc(0), params.gamma_g_A, params.gamma_d_A),
        vdp_mode_generator(space.n_trunc(1), params.gamma_g_B, params.gamma_d_B)};

    const Complex phase = std::polar(1.0, params.phi);
    const Operator h_coupling = 0.5 * phase * (ad * b) + 0.5 * std::conj(phase) * (bd * a);
    const Operator h_drive = 0.5 * (ad + a);

    Superoperator coherent = hamiltonian_part(h_coupling);
    Superoperator dissipative = dissipator(a + b);
    Superoperator drive = hamiltonian_part(h_drive);

    std::vector<SparseMatrix> loss_split{vdp_mode_generator(space.n_trunc(0), 0.0, 0.0, 1.0),
                                         vdp_mode_generator(space.n_trunc(1), 0.0, 0.0, 1.0)};

    return TwoOscParts{
        Superoperator(space, std::move(base), std::move(base_split)),
        Superoperator(space, coherent.matrix(), zero_split(space)),
        Superoperator(space, dissipative.matrix(), std::move(loss_split)),
        Superoperator(space, drive.matrix(), zero_split(space)),
    };
}

Superoperator build_two_osc(const SystemParams& params, const FockSpace& space) {
    TwoOscParts parts = two_osc_parts(params, space);
    Superoperator total = std::move(parts.base);
    if (params.g_AB != 0.0) {
        total += Complex(params.g_AB) * parts.coherent;
    }
    if (params.g_tilde != 0.0) {
        total += Complex(params.g_tilde) * parts.dissipative;
    }
    if (params.omega_A != 0.0) {
        total += Complex(params.omega_A) * parts.drive;
    }
    return total;
}

Superoperator build_three_osc(const ThreeOscParams& params, const FockSpace& space) {
    params.validate();
    if (space.n_modes() != 3) {
        throw ArgumentError("build_three_osc: needs a three-mode space (got " +
                            std::to_string(space.n_modes()) + " modes)");
    }
    const SystemParams& p = params.osc;
    const Operator a = annihilation(space, 0);
    const Operator b = annihilation(space, 1);
    const Operator c = annihilation(space, 2);
    const Operator ad = a.adjoint();
    const Operator bd = b.adjoint();
    const Operator cd = c.adjoint();

    const Complex phase = std::polar(1.0, p.phi);
    Operator h = 0.5 * p.omega_A * ad + 0.5 * p.g_AB * phase * (ad * b) +
                 0.5 * params.g * (bd * c + cd * a);
    h += h.adjoint();

    SparseMatrix m = hamiltonian_part(h).matrix();
    m += (0.5 * params.kappa) * dissipator(c).matrix();
    m += (0.5 * p.gamma_g_A) * dissipator(ad).matrix();
    m += (0.5 * p.gamma_g_B) * dissipator(bd).matrix();
    m += (0.5 * p.gamma_d_A) * dissipator(a * a).matrix();
    m += (0.5 * p.gamma_d_B) * dissipator(b * b).matrix();
    m.prune(Complex(0.0), 0.0);

    std::vector<SparseMatrix> split{
        vdp_mode_generator(space.n_trunc(0), p.gamma_g_A, p.gamma_d_A),
        vdp_mode_generator(space.n_trunc(1), p.gamma_g_B, p.gamma_d_B),
        vdp_mode_generator(space.n_trunc(2), 0.0, 0.0, 0.5 * params.kappa)};
    return {space, std::move(m), std::move(split)};
}

EffectiveCouplings effective_couplings(const SystemParams& params) {
    const Complex phase = std::polar(1.0, params.phi);
    return EffectiveCouplings{
        -kI * params.g_AB * std::conj(phase) - params.g_tilde,
        -kI * params.g_AB * phase - params.g_tilde,
    };
}

}  // namespace qsync

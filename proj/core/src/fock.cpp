#include "qsync/fock.hpp"

#include <unsupported/Eigen/KroneckerProduct>

#include <cmath>
#include <algorithm>
#include <numeric>
#include <string>

namespace qsync {

namespace {

SparseMatrix sparse_identity(Index n) {
    SparseMatrix id(n, n);
    id.setIdentity();
    return id;
}

}  // namespace

// =============================================================================
// FockSpace
// =============================================================================

FockSpace::FockSpace(int n_trunc, int n_modes)
    : FockSpace(std::vector<int>(static_cast<std::size_t>(std::max(n_modes, 0)), n_trunc)) {}

FockSpace::FockSpace(std::vector<int> truncations) : dims_(std::move(truncations)) {
    if (dims_.empty() || dims_.size() > 3) {
        throw ArgumentError("FockSpace: number of modes must be 1, 2 or 3 (got " +
                            std::to_string(dims_.size()) + ")");
    }
    for (int n : dims_) {
        if (n < 2) {
            throw ArgumentError("FockSpace: truncation must be >= 2 (got " + std::to_string(n) + ")");
        }
    }
    strides_.assign(dims_.size(), 1);
    for (int j = static_cast<int>(dims_.size()) - 2; j >= 0; --j) {
        strides_[j] = strides_[j + 1] * dims_[j + 1];
    }
    dim_ = strides_.front() * dims_.front();
}

int FockSpace::n_trunc(int mode) const {
    check_mode(mode);
    return dims_[static_cast<std::size_t>(mode)];
}

bool FockSpace::uniform() const noexcept {
    return std::all_of(dims_.begin(), dims_.end(), [&](int n) { return n == dims_.front(); });
}

Index FockSpace::stride(int mode) const {
    check_mode(mode);
    return strides_[static_cast<std::size_t>(mode)];
}

int FockSpace::occupation(Index basis_index, int mode) const {
    check_mode(mode);
    return static_cast<int>((basis_index / strides_[mode]) % dims_[mode]);
}

void FockSpace::check_mode(int mode) const {
    if (mode < 0 || mode >= n_modes()) {
        throw ArgumentError("mode index " + std::to_string(mode) + " out of range for " +
                            std::to_string(n_modes()) + "-mode space");
    }
}

// =============================================================================
// Operator
// =============================================================================

Operator::Operator(FockSpace space, SparseMatrix matrix)
    : space_(std::move(space)), matrix_(std::move(matrix)) {
    if (matrix_.rows() != space_.dim() || matrix_.cols() != space_.dim()) {
        throw ArgumentError("Operator: matrix dimension " + std::to_string(matrix_.rows()) + "x" +
                            std::to_string(matrix_.cols()) + " does not match space dimension " +
                            std::to_string(space_.dim()));
    }
    matrix_.makeCompressed();
}

void Operator::require_same_space(const Operator& other) const {
    if (!(space_ == other.space_)) {
        throw ArgumentError("Operator: operands live on different Fock spaces");
    }
}

Operator Operator::adjoint() const { return {space_, SparseMatrix(matrix_.adjoint())}; }

Operator& Operator::operator+=(const Operator& other) {
    require_same_space(other);
    matrix_ += other.matrix_;
    return *this;
}

Operator& Operator::operator-=(const Operator& other) {
    require_same_space(other);
    matrix_ -= other.matrix_;
    return *this;
}

Operator& Operator::operator*=(Complex scale) {
    matrix_ *= scale;
    return *this;
}

Operator operator*(const Operator& lhs, const Operator& rhs) {
    lhs.require_same_space(rhs);
    return {lhs.space_, SparseMatrix(lhs.matrix_ * rhs.matrix_)};
}

// =============================================================================
// Factories
// =============================================================================

SparseMatrix lowering_matrix(int n_trunc) {
    SparseMatrix a(n_trunc, n_trunc);
    a.reserve(Eigen::VectorXi::Constant(n_trunc, 1));
    for (int n = 1; n < n_trunc; ++n) {
        a.insert(n - 1, n) = std::sqrt(static_cast<Real>(n));
    }
    a.makeCompressed();
    return a;
}

SparseMatrix sg_matrix(int n_trunc, int k) {
    SparseMatrix s(n_trunc, n_trunc);
    s.reserve(Eigen::VectorXi::Constant(n_trunc, 1));
    for (int n = 0; n + k < n_trunc; ++n) {
        s.insert(n, n + k) = 1.0;
    }
    s.makeCompressed();
    return s;
}

Operator identity(const FockSpace& space) { return {space, sparse_identity(space.dim())}; }

Operator embed(const FockSpace& space, int mode, const SparseMatrix& single_mode) {
    space.check_mode(mode);
    const int n = space.n_trunc(mode);
    if (single_mode.rows() != n || single_mode.cols() != n) {
        throw ArgumentError("embed: single-mode matrix has wrong dimension");
    }
    const Index before = space.dim() / (space.stride(mode) * n);
    const Index after = space.stride(mode);
    SparseMatrix m = single_mode;
    if (after > 1) {
        m = Eigen::kroneckerProduct(m, sparse_identity(after)).eval();
    }
    if (before > 1) {
        m = Eigen::kroneckerProduct(sparse_identity(before), m).eval();
    }
    return {space, std::move(m)};
}

Operator annihilation(const FockSpace& space, int mode) {
    space.check_mode(mode);
    return embed(space, mode, lowering_matrix(space.n_trunc(mode)));
}

Operator creation(const FockSpace& space, int mode) { return annihilation(space, mode).adjoint(); }

Operator number(const FockSpace& space, int mode) {
    space.check_mode(mode);
    const int n = space.n_trunc(mode);
    SparseMatrix num(n, n);
    for (int k = 1; k < n; ++k) {
        num.insert(k, k) = static_cast<Real>(k);
    }
    return embed(space, mode, num);
}

Operator sg_power(const FockSpace& space, int mode, int k) {
    space.check_mode(mode);
    const int n = space.n_trunc(mode);
    if (k < 1) {
        throw ArgumentError("sg_power: power must be >= 1 (got " + std::to_string(k) + ")");
    }
    if (k >= n) {
        throw ArgumentError("sg_power: power " + std::to_string(k) + " >= n_trunc " +
                            std::to_string(n) + " gives the zero operator");
    }
    return embed(space, mode, sg_matrix(n, k));
}

Operator mode_swap(const FockSpace& space, int mode_i, int mode_j) {
    space.check_mode(mode_i);
    space.check_mode(mode_j);
    if (space.n_trunc(mode_i) != space.n_trunc(mode_j)) {
        throw ArgumentError("mode_swap: modes have different truncations");
    }
    const Index d = space.dim();
    SparseMatrix p(d, d);
    p.reserve(Eigen::VectorXi::Constant(d, 1));
    for (Index b = 0; b < d; ++b) {
        const int ni = space.occupation(b, mode_i);
        const int nj = space.occupation(b, mode_j);
        const Index swapped = b + (nj - ni) * space.stride(mode_i) + (ni - nj) * space.stride(mode_j);
        p.insert(swapped, b) = 1.0;
    }
    p.makeCompressed();
    return {space, std::move(p)};
}

Real coherent_tail_mass(Complex alpha, int n_trunc) {
    const Real x = std::norm(alpha);
    if (x == 0.0) {
        return 0.0;
    }
    // Summed term by term from n_trunc so that tiny tails keep full precision.
    Real log_term = -x + n_trunc * std::log(x) - std::lgamma(static_cast<Real>(n_trunc) + 1.0);
    Real term = std::exp(log_term);
    Real tail = 0.0;
    for (int n = n_trunc; n < n_trunc + 2000 && (term > 1e-300 || n < x); ++n) {
        tail += term;
        term *= x / static_cast<Real>(n + 1);
    }
    return std::min(tail, 1.0);
}

Vector coherent_state(const FockSpace& space, std::span<const Complex> amplitudes) {
    if (static_cast<int>(amplitudes.size()) != space.n_modes()) {
        throw ArgumentError("coherent_state: need one amplitude per mode");
    }
    std::vector<Vector> factors;
    for (int j = 0; j < space.n_modes(); ++j) {
        const Complex alpha = amplitudes[static_cast<std::size_t>(j)];
        const int n = space.n_trunc(j);
        const Real tail = coherent_tail_mass(alpha, n);
        if (tail > 1e-6) {
            throw TruncationError("coherent_state: |alpha|=" + std::to_string(std::abs(alpha)) +
                                  " loses Fock mass " + std::to_string(tail) + " above n_trunc=" +
                                  std::to_string(n));
        }
        Vector f(n);
        Complex c = std::exp(-0.5 * std::norm(alpha));
        for (int k = 0; k < n; ++k) {
            f[k] = c;
            c *= alpha / std::sqrt(static_cast<Real>(k + 1));
        }
        f.normalize();
        factors.push_back(std::move(f));
    }
    Vector state = factors.front();
    for (std::size_t j = 1; j < factors.size(); ++j) {
        Vector next(state.size() * factors[j].size());
        for (Index a = 0; a < state.size(); ++a) {
            next.segment(a * factors[j].size(), factors[j].size()) = state[a] * factors[j];
        }
        state = std::move(next);
    }
    return state;
}

Complex expectation(const Operator& op, const Vector& state) {
    if (state.size() != op.dim()) {
        throw ArgumentError("expectation: state dimension mismatch");
    }
    return state.dot(op.matrix() * state);
}

Complex expectation(const Operator& op, const DenseMatrix& rho) {
    if (rho.rows() != op.dim() || rho.cols() != op.dim()) {
        throw ArgumentError("expectation: density matrix dimension mismatch");
    }
    // Tr(O rho) = Σ_{ij} O_ij rho_ji
    Complex acc = 0.0;
    const SparseMatrix& m = op.matrix();
    for (int col = 0; col < m.outerSize(); ++col) {
        for (SparseMatrix::InnerIterator it(m, col); it; ++it) {
            acc += it.value() * rho(col, it.row());
        }
    }
    return acc;
}

}  // namespace qsync

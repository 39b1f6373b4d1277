#include "qsync/kron_solver.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <cmath>
#include <string>

namespace qsync {

namespace {

constexpr Real kZeroEigenvalue = 1e-10;

// Tensor index P = Σ_j p_j·S_j (mode 0 most significant, S_j = Π_{k>j} N_k²)
// mapped to the vec index i + d·j of the full density matrix.
std::vector<int> tensor_to_vec(const FockSpace& space) {
    const int modes = space.n_modes();
    const Index d = space.dim();
    std::vector<int> vmap(static_cast<std::size_t>(d * d));
    for (Index big = 0; big < d * d; ++big) {
        Index rest = big;
        Index row = 0;
        Index col = 0;
        for (int j = modes - 1; j >= 0; --j) {
            const int n = space.n_trunc(j);
            const Index p = rest % (static_cast<Index>(n) * n);
            rest /= static_cast<Index>(n) * n;
            row += (p % n) * space.stride(j);
            col += (p / n) * space.stride(j);
        }
        vmap[static_cast<std::size_t>(big)] = static_cast<int>(row + d * col);
    }
    return vmap;
}

std::vector<Index> tensor_strides(const FockSpace& space) {
    std::vector<Index> s(static_cast<std::size_t>(space.n_modes()), 1);
    for (int j = space.n_modes() - 2; j >= 0; --j) {
        const Index n = space.n_trunc(j + 1);
        s[j] = s[j + 1] * n * n;
    }
    return s;
}

void check_local(const FockSpace& space, const std::vector<SparseMatrix>& local) {
    if (static_cast<int>(local.size()) != space.n_modes()) {
        throw ArgumentError("Kronecker sum: need one local generator per mode");
    }
    for (int j = 0; j < space.n_modes(); ++j) {
        const Index n2 = static_cast<Index>(space.n_trunc(j)) * space.n_trunc(j);
        if (local[j].rows() != n2 || local[j].cols() != n2) {
            throw ArgumentError("Kronecker sum: local generator " + std::to_string(j) +
                                " must be N²×N²");
        }
    }
}

}  // namespace

SparseMatrix kron_sum_matrix(const FockSpace& space, const std::vector<SparseMatrix>& local) {
    check_local(space, local);
    const std::vector<int> vmap = tensor_to_vec(space);
    const std::vector<Index> stride = tensor_strides(space);
    const Index big = space.dim() * space.dim();
    std::vector<Eigen::Triplet<Complex>> triplets;
    for (int j = 0; j < space.n_modes(); ++j) {
        const Index n2 = local[j].rows();
        const Index inner = stride[j];
        const Index outer = big / (n2 * inner);
        for (int col = 0; col < local[j].outerSize(); ++col) {
            for (SparseMatrix::InnerIterator it(local[j], col); it; ++it) {
                for (Index o = 0; o < outer; ++o) {
                    for (Index in = 0; in < inner; ++in) {
                        const Index r = (o * n2 + it.row()) * inner + in;
                        const Index c = (o * n2 + col) * inner + in;
                        triplets.emplace_back(vmap[r], vmap[c], it.value());
                    }
                }
            }
        }
    }
    SparseMatrix m(big, big);
    m.setFromTriplets(triplets.begin(), triplets.end());
    return m;
}

// =============================================================================
// KronSumSolver
// =============================================================================

KronSumSolver::KronSumSolver(FockSpace space, const std::vector<SparseMatrix>& local)
    : space_(std::move(space)) {
    check_local(space_, local);
    vmap_ = tensor_to_vec(space_);
    tensor_stride_ = tensor_strides(space_);

    std::vector<Vector> kernels;
    for (int j = 0; j < space_.n_modes(); ++j) {
        const int n = space_.n_trunc(j);
        const DenseMatrix g(local[j]);
        ModeFactor f;
        f.n2 = n * n;
        f.block_of.resize(static_cast<std::size_t>(f.n2));
        f.local_of.resize(static_cast<std::size_t>(f.n2));
        int next_q = 0;
        for (int shift = -(n - 1); shift <= n - 1; ++shift) {
            Block b;
            b.first = next_q;
            for (int m = 0; m < n; ++m) {
                const int row = m + shift;
                if (row >= 0 && row < n) {
                    b.p.push_back(row + n * m);
                }
            }
            const int s = static_cast<int>(b.p.size());
            DenseMatrix sub(s, s);
            for (int r = 0; r < s; ++r) {
                for (int c = 0; c < s; ++c) {
                    sub(r, c) = g(b.p[r], b.p[c]);
                }
            }
            // Anything outside the n − m blocks would make the split inexact.
            Eigen::ComplexSchur<DenseMatrix> schur(sub);
            b.q = schur.matrixU();
            b.t = schur.matrixT();
            for (int r = 0; r < s; ++r) {
                f.block_of[static_cast<std::size_t>(next_q + r)] = static_cast<int>(f.blocks.size());
                f.local_of[static_cast<std::size_t>(next_q + r)] = r;
            }
            next_q += s;
            if (shift == 0) {
                Eigen::JacobiSVD<DenseMatrix> svd(sub, Eigen::ComputeFullV);
                Vector k = svd.matrixV().col(s - 1);
                Vector pops = Vector::Zero(f.n2);
                const Complex tr = k.sum();
                for (int r = 0; r < s; ++r) {
                    pops[b.p[r]] = k[r] / tr;
                }
                kernels.push_back(std::move(pops));
            }
            f.blocks.push_back(std::move(b));
        }
        modes_.push_back(std::move(f));
    }

    // ρ0 in tensor order, then scattered to vec order.
    Vector prod = kernels.front();
    for (std::size_t j = 1; j < kernels.size(); ++j) {
        Vector next(prod.size() * kernels[j].size());
        for (Index a = 0; a < prod.size(); ++a) {
            next.segment(a * kernels[j].size(), kernels[j].size()) = prod[a] * kernels[j];
        }
        prod = std::move(next);
    }
    rho0_.resize(prod.size());
    for (Index big = 0; big < prod.size(); ++big) {
        rho0_[vmap_[big]] = prod[big];
    }

    // Eigenvalues of K are sums of one diagonal Schur entry per mode.
    std::vector<std::vector<Complex>> diag(modes_.size());
    for (std::size_t j = 0; j < modes_.size(); ++j) {
        for (const Block& b : modes_[j].blocks) {
            for (Index r = 0; r < b.t.rows(); ++r) {
                diag[j].push_back(b.t(r, r));
            }
        }
    }
    std::vector<Complex> sums{Complex(0.0)};
    for (const auto& dj : diag) {
        std::vector<Complex> next;
        next.reserve(sums.size() * dj.size());
        for (Complex s : sums) {
            for (Complex e : dj) {
                next.push_back(s + e);
            }
        }
        sums = std::move(next);
    }
    for (Complex s : sums) {
        if (std::abs(s) < kZeroEigenvalue) {
            ++zero_count_;
        }
    }
}

void KronSumSolver::transform(Vector& c, int mode, bool to_schur) const {
    const ModeFactor& f = modes_[static_cast<std::size_t>(mode)];
    const Index inner = tensor_stride_[static_cast<std::size_t>(mode)];
    const Index outer = c.size() / (f.n2 * inner);
    using Map = Eigen::Map<DenseMatrix>;
    // Each block is a small dense product on the rows (inner = 1) or columns of
    // a matrix view of c.
    if (inner == 1) {
        Map x(c.data(), f.n2, outer);
        DenseMatrix y(f.n2, outer);
        for (const Block& b : f.blocks) {
            const Index s = b.q.rows();
            if (to_schur) {
                DenseMatrix g(s, outer);
                for (Index r = 0; r < s; ++r) {
                    g.row(r) = x.row(b.p[r]);
                }
                y.middleRows(b.first, s).noalias() = b.q.adjoint() * g;
            } else {
                const DenseMatrix g = b.q * x.middleRows(b.first, s);
                for (Index r = 0; r < s; ++r) {
                    y.row(b.p[r]) = g.row(r);
                }
            }
        }
        x = y;
        return;
    }
    DenseMatrix y(inner, f.n2);
    for (Index o = 0; o < outer; ++o) {
        Map x(c.data() + o * f.n2 * inner, inner, f.n2);
        for (const Block& b : f.blocks) {
            const Index s = b.q.rows();
            if (to_schur) {
                DenseMatrix g(inner, s);
                for (Index r = 0; r < s; ++r) {
                    g.col(r) = x.col(b.p[r]);
                }
                y.middleCols(b.first, s).noalias() = g * b.q.conjugate();
            } else {
                const DenseMatrix g = x.middleCols(b.first, s) * b.q.transpose();
                for (Index r = 0; r < s; ++r) {
                    y.col(b.p[r]) = g.col(r);
                }
            }
        }
        x = y;
    }
}

void KronSumSolver::back_substitute_two(const Vector& c, Vector& z) const {
    // With t = q0·n2_1 + q1 the system reads Z T0ᵀ + T1 Z = C for the matrix
    // Z(q1, q0). Both T are block diagonal with upper-triangular blocks.
    const ModeFactor& f0 = modes_[0];
    const ModeFactor& f1 = modes_[1];
    const Eigen::Map<const DenseMatrix> cm(c.data(), f1.n2, f0.n2);
    Eigen::Map<DenseMatrix> zm(z.data(), f1.n2, f0.n2);
    Vector r(f1.n2);
    for (int q0 = f0.n2 - 1; q0 >= 0; --q0) {
        const Block& b0 = f0.blocks[static_cast<std::size_t>(f0.block_of[q0])];
        const Index loc0 = f0.local_of[q0];
        const Index rest = b0.t.rows() - loc0 - 1;
        r = cm.col(q0);
        if (rest > 0) {
            r.noalias() -= zm.middleCols(q0 + 1, rest) * b0.t.row(loc0).tail(rest).transpose();
        }
        const Complex shift = b0.t(loc0, loc0);
        auto col = zm.col(q0);
        for (const Block& b1 : f1.blocks) {
            const Index s = b1.t.rows();
            for (Index i = s - 1; i >= 0; --i) {
                Complex acc = r[b1.first + i];
                const Index tail = s - i - 1;
                if (tail > 0) {
                    acc -= (b1.t.row(i).tail(tail).transpose().cwiseProduct(col.segment(b1.first + i + 1, tail)))
                               .sum();
                }
                const Complex den = shift + b1.t(i, i);
                col[b1.first + i] = std::abs(den) < kZeroEigenvalue ? Complex(0.0) : acc / den;
            }
        }
    }
}

Vector KronSumSolver::solve(const Vector& y, bool project) const {
    const Index big = static_cast<Index>(vmap_.size());
    if (y.size() != big) {
        throw ArgumentError("KronSumSolver: right-hand side has wrong length");
    }
    Vector c(big);
    for (Index t = 0; t < big; ++t) {
        c[t] = y[vmap_[t]];
    }
    const int modes = static_cast<int>(modes_.size());
    for (int j = 0; j < modes; ++j) {
        transform(c, j, true);
    }

    Vector z(big);
    if (modes == 2 && tensor_stride_[1] == 1) {
        back_substitute_two(c, z);
    } else {
        // Back-substitution: entries coupled through T_j(q_j, k) with k > q_j have
        // larger flat indices, so a single descending sweep suffices.
        std::vector<int> digit(static_cast<std::size_t>(modes));
        for (int j = 0; j < modes; ++j) {
            digit[j] = modes_[j].n2 - 1;
        }
        for (Index t = big - 1; t >= 0; --t) {
            Complex acc = c[t];
            Complex den = 0.0;
            for (int j = 0; j < modes; ++j) {
                const ModeFactor& f = modes_[j];
                const int q = digit[j];
                const Block& b = f.blocks[f.block_of[q]];
                const int loc = f.local_of[q];
                const Index s = b.t.rows();
                const Index stride = tensor_stride_[j];
                den += b.t(loc, loc);
                for (Index k = loc + 1; k < s; ++k) {
                    acc -= b.t(loc, k) * z[t + (k - loc) * stride];
                }
            }
            z[t] = std::abs(den) < kZeroEigenvalue ? Complex(0.0) : acc / den;
            for (int j = modes - 1; j >= 0; --j) {
                if (--digit[j] >= 0) {
                    break;
                }
                digit[j] = modes_[j].n2 - 1;
            }
        }
    }

    for (int j = 0; j < modes; ++j) {
        transform(z, j, false);
    }
    Vector out(big);
    for (Index t = 0; t < big; ++t) {
        out[vmap_[t]] = z[t];
    }
    if (project) {
        const Index d = space_.dim();
        Complex tr = 0.0;
        for (Index i = 0; i < d; ++i) {
            tr += out[i + d * i];
        }
        out -= tr * rho0_;
    }
    return out;
}

// =============================================================================
// GMRES
// =============================================================================

GmresResult gmres(const LinearMap& apply_a, const LinearMap& precondition, const Vector& b,
                  Vector x0, Real rel_tol, int restart, int max_iter) {
    GmresResult out;
    out.x = std::move(x0);
    const Real bnorm = b.norm();
    if (bnorm == 0.0) {
        out.converged = true;
        return out;
    }
    Vector r = b - apply_a(out.x);
    Real beta = r.norm();
    out.residual = beta / bnorm;
    while (out.iterations < max_iter) {
        if (out.residual < rel_tol) {
            out.converged = true;
            return out;
        }
        const int m = std::min(restart, max_iter - out.iterations);
        DenseMatrix basis(b.size(), m + 1);
        basis.col(0) = r / beta;
        DenseMatrix h = DenseMatrix::Zero(m + 1, m);
        std::vector<Complex> cs(static_cast<std::size_t>(m));
        std::vector<Complex> sn(static_cast<std::size_t>(m));
        Vector g = Vector::Zero(m + 1);
        g[0] = beta;
        int k = 0;
        for (; k < m; ++k) {
            Vector w = apply_a(precondition(basis.col(k)));
            ++out.iterations;
            // Classical Gram-Schmidt, repeated once when the first pass cancels
            // most of w (Daniel-Gragg-Kaufman-Stewart criterion).
            const Real w_before = w.norm();
            Real wn = 0.0;
            for (int pass = 0; pass < 2; ++pass) {
                const Vector hk = basis.leftCols(k + 1).adjoint() * w;
                w.noalias() -= basis.leftCols(k + 1) * hk;
                h.col(k).head(k + 1) += hk;
                wn = w.norm();
                if (wn > 0.7071 * w_before) {
                    break;
                }
            }
            h(k + 1, k) = wn;
            // Apply the accumulated rotations, then annihilate h(k+1, k).
            for (int i = 0; i < k; ++i) {
                const Complex t0 = std::conj(cs[i]) * h(i, k) + std::conj(sn[i]) * h(i + 1, k);
                h(i + 1, k) = -sn[i] * h(i, k) + cs[i] * h(i + 1, k);
                h(i, k) = t0;
            }
        const Real denom = std::hypot(std::abs(h(k, k)), wn);
            if (denom == 0.0) {
                cs[k] = 1.0;
                sn[k] = 0.0;
            } else {
                cs[k] = h(k, k) / denom;
                sn[k] = wn / denom;
            }
            h(k, k) = denom;
            h(k + 1, k) = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] = std::conj(cs[k]) * g[k];
            const Real est = std::abs(g[k + 1]) / bnorm;
            if (est < rel_tol || wn == 0.0) {
                ++k;
                break;
            }
            basis.col(k + 1) = w / wn;
        }
        Vector yk = h.topLeftCorner(k, k).triangularView<Eigen::Upper>().solve(g.head(k));
        const Vector update = basis.leftCols(k) * yk;
        out.x += precondition(update);
        r = b - apply_a(out.x);
        beta = r.norm();
        const Real previous = out.residual;
        out.residual = beta / bnorm;
        if (out.residual >= previous * 0.999 && out.residual >= rel_tol) {
            // A full cycle that does not reduce the residual will not recover.
            return out;
        }
    }
    out.converged = out.residual < rel_tol;
    return out;
}

}  // namespace qsync

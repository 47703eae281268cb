#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "homlab/grid.hpp"

namespace homlab {

using SparseMatrix = Eigen::SparseMatrix<double>;

/// Raised when an iterative or direct solve cannot reach its tolerance.
class SolverError : public std::runtime_error {
public:
    SolverError(const std::string& what, int iterations) : std::runtime_error(what), iterations_(iterations) {}
    int iterations() const { return iterations_; }

private:
    int iterations_;
};

struct CgResult {
    Vector x;
    int iterations = 0;
    double residual = 0.0;  ///< true relative residual |Ax - b| / |b|
};

/// Relative residual reachable in double precision for A x = b. Forming
/// A x rounds at about eps * |A| |x|, so asking for less is meaningless on
/// fine grids.
inline double rounding_floor(const SparseMatrix& a, const Vector& x, const Vector& b) {
    const double bn = b.norm();
    if (bn == 0.0) return 0.0;
    Vector ax = a.cwiseAbs() * x.cwiseAbs();
    return 64.0 * std::numeric_limits<double>::epsilon() * ax.norm() / bn;
}

inline void require_nonsingular_diagonal(const SparseMatrix& a) {
    if (a.rows() != a.cols()) throw std::invalid_argument("matrix must be square");
    for (Eigen::Index k = 0; k < a.outerSize(); ++k) {
        double d = a.coeff(k, k);
        if (!(d > 0.0)) throw std::invalid_argument("matrix is not positive definite: row " + std::to_string(k) + " has a non-positive diagonal");
    }
}

/// Conjugate gradients from a zero initial guess. Optional `project` maps
/// iterates onto a subspace (the zero-mean subspace for periodic cell
/// problems); it must commute with the matrix.
inline CgResult solve_spd(const SparseMatrix& a, const Vector& b, double tol = 1e-10, int max_iter = -1,
                          const std::function<void(Vector&)>& project = {}) {
    if (!(tol > 0.0)) throw std::invalid_argument("solver tolerance must be positive");
    if (b.size() != a.rows()) throw std::invalid_argument("right-hand side size mismatch");
    require_nonsingular_diagonal(a);
    const Eigen::Index n = b.size();
    if (max_iter < 0) max_iter = static_cast<int>(4 * n + 200);

    CgResult out;
    out.x = Vector::Zero(n);
    Vector r = b;
    if (project) project(r);
    const double bnorm = r.norm();
    if (bnorm == 0.0) return out;

    Vector p = r;
    Vector ap(n);
    double rr = r.squaredNorm();
    int it = 0;
    for (; it < max_iter; ++it) {
        if (std::sqrt(rr) <= tol * bnorm) break;
        ap.noalias() = a * p;
        if (project) project(ap);
        const double pap = p.dot(ap);
        if (!(pap > 0.0)) throw SolverError("conjugate gradients met a non-positive curvature direction", it);
        const double alpha = rr / pap;
        out.x.noalias() += alpha * p;
        r.noalias() -= alpha * ap;
        const double rr_new = r.squaredNorm();
        p = r + (rr_new / rr) * p;
        rr = rr_new;
    }
    out.iterations = it;
    Vector res = b - a * out.x;
    if (project) project(res);
    out.residual = res.norm() / bnorm;
    if (std::sqrt(rr) > tol * bnorm)
        throw SolverError("conjugate gradients did not converge in " + std::to_string(it) + " iterations (relative residual " +
                              std::to_string(std::sqrt(rr) / bnorm) + ")",
                          it);
    return out;
}

/// Sparse LDL^T factorisation for repeated solves with one SPD matrix.
class SpdFactorization {
public:
    explicit SpdFactorization(const SparseMatrix& a) : matrix_(a) {
        require_nonsingular_diagonal(a);
        solver_.compute(matrix_);
        if (solver_.info() != Eigen::Success) throw SolverError("sparse factorisation failed", 0);
    }

    /// Solve with one step of iterative refinement; throws if the relative
    /// residual exceeds max(tol, rounding floor).
    Vector solve(const Vector& b, double tol = 1e-10) const {
        Vector x = solver_.solve(b);
        const double bn = b.norm();
        if (bn == 0.0) return x;
        Vector r = b - matrix_ * x;
        double rel = r.norm() / bn;
        if (rel > tol) {
            x += solver_.solve(r);
            r = b - matrix_ * x;
            rel = r.norm() / bn;
        }
        if (!std::isfinite(rel) || (rel > tol && rel > rounding_floor(matrix_, x, b)))
            throw SolverError("direct solve residual " + std::to_string(rel) + " above tolerance", 1);
        return x;
    }

    const SparseMatrix& matrix() const { return matrix_; }

private:
    SparseMatrix matrix_;
    Eigen::SimplicialLDLT<SparseMatrix> solver_;
};

}  // namespace homlab

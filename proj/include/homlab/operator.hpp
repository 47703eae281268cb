#pragma once

#include <cmath>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>

#include "homlab/assembly.hpp"
#include "homlab/coefficient.hpp"
#include "homlab/grid.hpp"
#include "homlab/sparse.hpp"

namespace homlab {

/// Raised when the fine grid does not resolve the oscillation period.
class ResolutionError : public std::invalid_argument {
public:
    ResolutionError(const std::string& what, int suggested_n) : std::invalid_argument(what), suggested_n_(suggested_n) {}
    int suggested_n() const { return suggested_n_; }

private:
    int suggested_n_;
};

/// Minimal n with h = extent/n <= eps/16.
inline int minimal_resolution(double extent, double eps) { return static_cast<int>(std::ceil(16.0 * extent / eps - 1e-9)); }

inline void check_resolution(const Grid& g, double eps) {
    if (!(eps > 0.0)) throw std::invalid_argument("epsilon must be positive");
    for (int a = 0; a < g.dim; ++a)
        if (g.h(a) > eps / 16.0 * (1.0 + 1e-12)) {
            const int n = minimal_resolution(g.extent[a], eps);
            std::ostringstream os;
            os << "grid with n = " << g.n[a] << " does not resolve eps = " << eps << " (need h <= eps/16, i.e. n >= " << n << ")";
            throw ResolutionError(os.str(), n);
        }
}

/// Discrete A = -div(a grad .) (+1 for Neumann/periodic) as a stiffness
/// matrix K and lumped mass M; the operator acting on grid functions is
/// M^{-1} K. Immutable once built; the factorisation is shared by copies.
class EllipticOperator {
public:
    /// Oscillating operator A_eps with coefficient a(x/eps).
    static EllipticOperator oscillating(const CoefficientField& coeff, double eps, const Grid& g) {
        if (coeff.dim() != g.dim) throw std::invalid_argument("coefficient and grid dimensions differ");
        check_resolution(g, eps);
        EllipticOperator op(g);
        op.eps_ = eps;
        op.nu_ = coeff.nu();
        op.label_ = std::string("A_eps[") + to_string(coeff.kind()) + "]";
        op.build([&](double x, double y) { return coeff(x / eps, y / eps); });
        return op;
    }

    /// Constant-coefficient operator (the homogenised A_0 when a = a_h).
    static EllipticOperator homogenised(const Matrix2& a, const Grid& g, double nu = 0.0) {
        EllipticOperator op(g);
        op.eps_ = 0.0;
        Matrix2 m = a;
        if (g.dim == 1) m = Matrix2{{a(0, 0), 0.0}, {0.0, 1.0}};
        op.nu_ = nu;
        op.label_ = "A_0";
        op.build([&](double, double) { return m; });
        return op;
    }

    /// Identity-coefficient reference operator used by dual norms.
    static EllipticOperator reference(const Grid& g) {
        EllipticOperator op = homogenised(Matrix2::Identity(), g, 1.0);
        op.label_ = "L";
        return op;
    }

    const Grid& grid() const { return grid_; }
    const SparseMatrix& stiffness() const { return stiffness_; }
    const Vector& mass() const { return mass_; }
    double shift() const { return grid_.shift(); }
    double epsilon() const { return eps_; }
    double nu() const { return nu_; }
    const std::string& label() const { return label_; }

    /// A u = M^{-1} K u.
    GridFunction apply(const GridFunction& u) const {
        check_grid(u);
        return GridFunction(grid_, (stiffness_ * u.values).cwiseQuotient(mass_));
    }

    /// u = A^{-1} g, i.e. K u = M g.
    GridFunction solve(const GridFunction& g, double tol = 1e-10) const {
        check_grid(g);
        return GridFunction(grid_, factor_->solve(mass_.cwiseProduct(g.values), tol));
    }

    /// u = K^{-1} b for a right-hand side already in load-vector form.
    Vector solve_load(const Vector& b, double tol = 1e-10) const { return factor_->solve(b, tol); }

    /// (A u, u) = u^T K u.
    double energy(const GridFunction& u) const {
        check_grid(u);
        return u.values.dot(stiffness_ * u.values);
    }

    bool same_pattern(const EllipticOperator& o) const {
        if (stiffness_.nonZeros() != o.stiffness_.nonZeros() || stiffness_.outerSize() != o.stiffness_.outerSize()) return false;
        for (Eigen::Index k = 0; k <= stiffness_.outerSize(); ++k)
            if (stiffness_.outerIndexPtr()[k] != o.stiffness_.outerIndexPtr()[k]) return false;
        for (Eigen::Index k = 0; k < stiffness_.nonZeros(); ++k)
            if (stiffness_.innerIndexPtr()[k] != o.stiffness_.innerIndexPtr()[k]) return false;
        return true;
    }

    void check_grid(const GridFunction& u) const {
        if (u.grid != grid_) throw std::invalid_argument("grid function does not live on the operator grid");
    }

private:
    explicit EllipticOperator(const Grid& g) : grid_(g) {
        if (g.bc == Boundary::closed) throw std::invalid_argument("elliptic operators need a boundary condition");
    }

    template <class Coeff>
    void build(Coeff&& coeff) {
        mass_ = lumped_mass(grid_);
        stiffness_ = detail::assemble_stiffness(grid_, coeff);
        if (grid_.shift() != 0.0)
            for (Eigen::Index k = 0; k < stiffness_.rows(); ++k) stiffness_.coeffRef(k, k) += grid_.shift() * mass_[k];
        stiffness_.makeCompressed();
        factor_ = std::make_shared<const SpdFactorization>(stiffness_);
    }

    Grid grid_;
    SparseMatrix stiffness_;
    Vector mass_;
    std::shared_ptr<const SpdFactorization> factor_;
    double eps_ = 0.0;
    double nu_ = 0.0;
    std::string label_;
};

}  // namespace homlab

#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "homlab/assembly.hpp"
#include "homlab/coefficient.hpp"
#include "homlab/grid.hpp"
#include "homlab/sparse.hpp"

namespace homlab {

/// Periodic correctors N_i on the unit cell and the homogenised matrix.
struct CellSolution {
    Grid cell_grid;
    std::vector<GridFunction> N;
    Matrix2 a_h = Matrix2::Identity();
    std::vector<double> residual;   ///< CG relative residual per corrector
    std::vector<int> iterations;    ///< CG iterations per corrector
    double asymmetry = 0.0;         ///< |B - B^T|_max of the raw quadrature before symmetrising
    double snap_displacement = 0.0; ///< breakpoint snap recorded by the coefficient

    int dim() const { return cell_grid.dim; }
    bool trivial() const {
        for (const auto& n : N)
            if (n.values.cwiseAbs().maxCoeff() != 0.0) return false;
        return true;
    }
};

inline double mean_value(const GridFunction& u) { return u.values.mean(); }

/// Solve -div(a grad N_i) = div(a e_i) on the periodic unit cell with zero
/// mean, and assemble a^h_ij = int (a_ij + sum_k a_ik d_k N_j) with the same
/// element-midpoint quadrature as the stiffness.
inline CellSolution solve_cell(const CoefficientField& coeff_in, int n_cell, double tol = 1e-12) {
    if (n_cell < 8) throw std::invalid_argument("cell grid needs n_cell >= 8");
    coeff_in.check_ellipticity(coeff_in.nu());
    const CoefficientField coeff = coeff_in.snapped(n_cell);
    const int d = coeff.dim();

    CellSolution sol;
    sol.cell_grid = make_grid(d, {1.0, 1.0}, {n_cell, n_cell}, Boundary::periodic);
    sol.snap_displacement = coeff.snap_displacement();
    const Grid& g = sol.cell_grid;
    const SparseMatrix k = detail::assemble_stiffness(g, [&](double x, double y) { return coeff(x, y); });
    const auto grads = detail::element_gradient_integrals(g);
    const int ln = detail::local_nodes(d);

    auto project = [](Vector& v) { v.array() -= v.mean(); };

    for (int i = 0; i < d; ++i) {
        Vector rhs = Vector::Zero(static_cast<Eigen::Index>(g.size()));
        detail::for_each_element(g, [&](int, int, double xm, double ym, const std::array<long, 4>& dofs) {
            const Matrix2 a = coeff(xm, ym);
            const Eigen::Vector2d ae = a.col(i);
            for (int nn = 0; nn < ln; ++nn) rhs[dofs[nn]] -= ae.dot(grads[nn]);
        });
        GridFunction n(g);
        if (rhs.cwiseAbs().maxCoeff() > 1e-14 * (1.0 + k.diagonal().cwiseAbs().maxCoeff())) {
            CgResult r = solve_spd(k, rhs, tol, -1, project);
            n.values = r.x;
            sol.residual.push_back(r.residual);
            sol.iterations.push_back(r.iterations);
        } else {
            sol.residual.push_back(0.0);
            sol.iterations.push_back(0);
        }
        project(n.values);
        sol.N.push_back(std::move(n));
    }

    Matrix2 b = Matrix2::Zero();
    if (d == 1) b(1, 1) = 1.0;
    const double cell = d == 2 ? g.h(0) * g.h(1) : g.h(0);
    detail::for_each_element(g, [&](int, int, double xm, double ym, const std::array<long, 4>& dofs) {
        const Matrix2 a = coeff(xm, ym);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) {
                Eigen::Vector2d gradNj = Eigen::Vector2d::Zero();
                for (int nn = 0; nn < ln; ++nn) gradNj += sol.N[j][static_cast<std::size_t>(dofs[nn])] * grads[nn];
                b(i, j) += cell * a(i, j) + a.row(i).head(d).dot(gradNj.head(d));
            }
    });
    sol.asymmetry = std::abs(b(0, 1) - b(1, 0));
    sol.a_h = 0.5 * (b + b.transpose());
    if (d == 1) sol.a_h = Matrix2{{b(0, 0), 0.0}, {0.0, 1.0}};
    return sol;
}

/// (int_0^1 a(y)^-1 dy)^-1 by composite Simpson on `panels` panels per phase
/// (exact per phase for piecewise-constant coefficients).
inline double harmonic_mean_oracle_1d(const CoefficientField& coeff, int panels = 10000) {
    if (coeff.dim() != 1) throw std::invalid_argument("harmonic mean oracle is one-dimensional");
    std::vector<double> cuts{0.0};
    for (std::size_t k = 1; k < coeff.breakpoints().size(); ++k) cuts.push_back(coeff.breakpoints()[k]);
    cuts.push_back(1.0);
    double integral = 0.0;
    for (std::size_t p = 0; p + 1 < cuts.size(); ++p) {
        const double lo = cuts[p], hi = cuts[p + 1];
        const double h = (hi - lo) / panels;
        // Sample strictly inside the phase so breakpoints never alias.
        auto inv = [&](double y) { return 1.0 / coeff(std::clamp(y, lo + 1e-15, hi - 1e-15))(0, 0); };
        double s = inv(lo) + inv(hi);
        for (int k = 1; k < panels; ++k) s += (k % 2 ? 4.0 : 2.0) * inv(lo + k * h);
        integral += s * h / 3.0;
    }
    return 1.0 / integral;
}

/// N_i(x/eps) by periodic (bi)linear interpolation of the cell nodal values.
inline double eval_cell_at(const CellSolution& cs, int i, std::array<double, 2> x, double eps) {
    if (!(eps > 0.0)) throw std::invalid_argument("epsilon must be positive");
    const Grid& g = cs.cell_grid;
    const GridFunction& n = cs.N.at(static_cast<std::size_t>(i));
    std::array<int, 2> i0{0, 0};
    std::array<double, 2> w{0.0, 0.0};
    for (int a = 0; a < g.dim; ++a) {
        double y = x[a] / eps;
        y -= std::floor(y);
        const double s = y * g.n[a];
        double fl = std::floor(s);
        double t = s - fl;
        // Snap near-node evaluations so node values are reproduced exactly.
        if (t < 1e-12) t = 0.0;
        if (t > 1.0 - 1e-12) {
            t = 0.0;
            fl += 1.0;
        }
        i0[a] = static_cast<int>(fl) % g.n[a];
        w[a] = t;
    }
    auto at = [&](int di, int dj) {
        const int ii = (i0[0] + di) % g.n[0];
        const int jj = g.dim == 2 ? (i0[1] + dj) % g.n[1] : 0;
        return n[g.index(ii, jj)];
    };
    if (g.dim == 1) return (1.0 - w[0]) * at(0, 0) + w[0] * at(1, 0);
    return (1.0 - w[0]) * (1.0 - w[1]) * at(0, 0) + w[0] * (1.0 - w[1]) * at(1, 0) + (1.0 - w[0]) * w[1] * at(0, 1) +
           w[0] * w[1] * at(1, 1);
}

}  // namespace homlab

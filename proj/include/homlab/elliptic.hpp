#pragma once

#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "homlab/cell.hpp"
#include "homlab/norms.hpp"
#include "homlab/operator.hpp"
#include "homlab/random.hpp"
#include "homlab/report.hpp"

namespace homlab {

/// T_eps w = w + eps sum_i N_i(x/eps) d_i w.
struct Corrector {
    std::shared_ptr<const CellSolution> cell;
    double eps = 1.0;

    Corrector(std::shared_ptr<const CellSolution> c, double e) : cell(std::move(c)), eps(e) {
        if (!cell) throw std::invalid_argument("corrector needs a cell solution");
        if (!(eps > 0.0)) throw std::invalid_argument("epsilon must be positive");
    }
};

/// Apply T_eps pointwise. Dirichlet input is lifted to the closure grid first:
/// the corrected field does not vanish on the boundary, so it lives there.
inline GridFunction corrector_apply(const Corrector& corr, const GridFunction& u0) {
    if (corr.cell->dim() != u0.grid.dim) throw std::invalid_argument("corrector and grid dimensions differ");
    GridFunction out = lift_to_closure(u0);
    if (corr.cell->trivial()) return out;
    const auto grads = gradient(out);
    const Grid& g = out.grid;
    for (std::size_t k = 0; k < g.size(); ++k) {
        auto ij = g.unflatten(k);
        const std::array<double, 2> x{g.coord(0, ij[0]), g.dim == 2 ? g.coord(1, ij[1]) : 0.0};
        double s = 0.0;
        for (int i = 0; i < g.dim; ++i) s += eval_cell_at(*corr.cell, i, x, corr.eps) * grads[static_cast<std::size_t>(i)][k];
        out[k] += corr.eps * s;
    }
    return out;
}

/// Pair corrector (T_eps xi^1, xi^2); both components end on the same grid.
inline State corrector_apply(const Corrector& corr, const State& xi) {
    return State(corrector_apply(corr, xi.u), lift_to_closure(xi.v), xi.t);
}

struct GapEstimate {
    double value = 0.0;
    int iterations = 0;
    double change = 0.0;  ///< relative change of the last iterate
};

/// Power iteration for the largest |eigenvalue| of D = A_eps^-1 - A_0^-1,
/// self-adjoint in the mass inner product.
inline GapEstimate resolvent_gap_estimate(const EllipticOperator& op_e, const EllipticOperator& op_0, double tol = 1e-10,
                                          int max_iter = 20000) {
    if (op_e.grid() != op_0.grid()) throw std::invalid_argument("resolvent gap needs operators on one grid");
    const Vector& m = op_e.mass();
    auto mnorm = [&](const Vector& x) { return std::sqrt(m.dot(x.cwiseAbs2())); };
    auto apply_d = [&](const Vector& x) {
        const Vector load = m.cwiseProduct(x);
        return Vector(op_e.solve_load(load, 1e-13) - op_0.solve_load(load, 1e-13));
    };

    Rng rng(0x6a9);
    Vector x(static_cast<Eigen::Index>(op_e.grid().size()));
    for (Eigen::Index k = 0; k < x.size(); ++k) x[k] = rng.uniform(-1.0, 1.0);
    x /= mnorm(x);

    GapEstimate est;
    double prev = 0.0;
    for (int it = 1; it <= max_iter; ++it) {
        Vector y = apply_d(x);
        const double lam = mnorm(y);
        est.iterations = it;
        est.value = lam;
        if (lam == 0.0 || !std::isfinite(lam)) {
            est.change = 0.0;
            return est;
        }
        est.change = std::abs(lam - prev) / lam;
        if (it > 1 && est.change <= tol) return est;
        prev = lam;
        x = y / lam;
    }
    throw SolverError("resolvent gap power iteration stagnated (relative change " + std::to_string(est.change) + ")", max_iter);
}

inline double resolvent_gap(const EllipticOperator& op_e, const EllipticOperator& op_0, double tol = 1e-10) {
    return resolvent_gap_estimate(op_e, op_0, tol).value;
}

/// Pi_eps xi = K_0^-1 K_eps xi componentwise (shifted operators on
/// Neumann/periodic grids).
inline State prepare_initial(const EllipticOperator& op_e, const EllipticOperator& op_0, const State& xi) {
    if (op_e.grid() != op_0.grid()) throw std::invalid_argument("prepared data needs operators on one grid");
    op_e.check_grid(xi.u);
    auto map = [&](const GridFunction& c) { return GridFunction(c.grid, op_0.solve_load(op_e.stiffness() * c.values)); };
    return State(map(xi.u), map(xi.v), xi.t);
}

/// Pi_eps^-1 xi = K_eps^-1 K_0 xi.
inline State unprepare_initial(const EllipticOperator& op_e, const EllipticOperator& op_0, const State& xi) {
    if (op_e.grid() != op_0.grid()) throw std::invalid_argument("prepared data needs operators on one grid");
    op_0.check_grid(xi.u);
    auto map = [&](const GridFunction& c) { return GridFunction(c.grid, op_e.solve_load(op_0.stiffness() * c.values)); };
    return State(map(xi.u), map(xi.v), xi.t);
}

struct EllipticStudyOptions {
    bool with_gap = true;
    double gap_tol = 1e-8;
};

/// Per eps: |u_eps - u_0|_L2, |u_eps - T_eps u_0|_H1 (full norm on the
/// closure) and optionally the resolvent gap; slopes fitted against eps.
/// Column err_H1 holds the uncorrected |u_eps - u_0|_H1 for comparison.
inline RateReport elliptic_rate_study(const CoefficientField& coeff, std::shared_ptr<const CellSolution> cell, const Grid& grid,
                                      const std::vector<double>& eps_list, const GridFunction& g,
                                      const EllipticStudyOptions& opt = {}) {
    if (eps_list.size() < 3) throw std::invalid_argument("a rate study needs at least three epsilon values");
    for (double e : eps_list) check_resolution(grid, e);
    const EllipticOperator op0 = EllipticOperator::homogenised(cell->a_h, grid, coeff.nu());
    const GridFunction u0 = op0.solve(g);

    RateReport rep;
    rep.constants["a_h_00"] = cell->a_h(0, 0);
    if (grid.dim == 2) {
        rep.constants["a_h_01"] = cell->a_h(0, 1);
        rep.constants["a_h_11"] = cell->a_h(1, 1);
    }
    for (double eps : eps_list) {
        const EllipticOperator ope = EllipticOperator::oscillating(coeff, eps, grid);
        const GridFunction ue = ope.solve(g);
        rep.epsilon.push_back(eps);
        rep.column("err_L2").push_back(norm(ue - u0, NormKind::L2()));
        const GridFunction corrected = corrector_apply(Corrector(cell, eps), u0);
        rep.column("err_H1corr").push_back(std::sqrt(h1_full_squared(lift_to_closure(ue) - corrected)));
        rep.column("err_H1").push_back(std::sqrt(h1_full_squared(ue - u0)));
        rep.column("gap").push_back(opt.with_gap ? resolvent_gap(ope, op0, opt.gap_tol) : 0.0);
    }
    rep.fit("err_L2");
    rep.fit("err_H1corr");
    if (opt.with_gap) rep.fit("gap");
    return rep;
}

}  // namespace homlab

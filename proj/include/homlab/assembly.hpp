#pragma once

#include <array>
#include <cmath>
#include <vector>

#include <Eigen/Sparse>

#include "homlab/coefficient.hpp"
#include "homlab/grid.hpp"
#include "homlab/sparse.hpp"

// Lowest-order conforming elements on uniform boxes: P1 in 1D, Q1 in 2D,
// coefficient constant per element (sampled at the element midpoint).

namespace homlab::detail {

/// Local node k of an element -> offsets (k & 1, k >> 1).
inline constexpr int local_nodes(int dim) { return dim == 2 ? 4 : 2; }

using ElementMatrix = Eigen::Matrix4d;

/// Exact element stiffness for a constant coefficient matrix.
inline ElementMatrix element_stiffness(const Grid& g, const Matrix2& a) {
    ElementMatrix k = ElementMatrix::Zero();
    if (g.dim == 1) {
        const double c = a(0, 0) / g.h(0);
        k(0, 0) = k(1, 1) = c;
        k(0, 1) = k(1, 0) = -c;
        return k;
    }
    const double hx = g.h(0), hy = g.h(1);
    const double gp[2] = {0.5 - 0.5 / std::sqrt(3.0), 0.5 + 0.5 / std::sqrt(3.0)};
    for (double xi : gp)
        for (double eta : gp) {
            std::array<Eigen::Vector2d, 4> grad;
            for (int n = 0; n < 4; ++n) {
                const int ax = n & 1, by = n >> 1;
                const double fx = ax ? xi : 1.0 - xi;
                const double fy = by ? eta : 1.0 - eta;
                grad[n] = Eigen::Vector2d((2 * ax - 1) / hx * fy, (2 * by - 1) / hy * fx);
            }
            const double w = 0.25 * hx * hy;
            for (int i = 0; i < 4; ++i)
                for (int j = 0; j < 4; ++j) k(i, j) += w * grad[i].dot(a * grad[j]);
        }
    return k;
}

/// Integral over one element of the gradient of each local basis function.
inline std::array<Eigen::Vector2d, 4> element_gradient_integrals(const Grid& g) {
    std::array<Eigen::Vector2d, 4> out{};
    if (g.dim == 1) {
        out[0] = Eigen::Vector2d(-1.0, 0.0);
        out[1] = Eigen::Vector2d(1.0, 0.0);
        return out;
    }
    const double hx = g.h(0), hy = g.h(1);
    for (int n = 0; n < 4; ++n) {
        const int ax = n & 1, by = n >> 1;
        out[n] = Eigen::Vector2d((2 * ax - 1) * hy / 2.0, (2 * by - 1) * hx / 2.0);
    }
    return out;
}

/// Visit every element: f(e1, e2, midpoint x, midpoint y, dofs[4]) with
/// dof -1 for eliminated Dirichlet nodes.
template <class F>
void for_each_element(const Grid& g, F&& f) {
    const int ny = g.dim == 2 ? g.n[1] : 1;
    std::array<long, 4> dofs{};
    for (int e2 = 0; e2 < ny; ++e2)
        for (int e1 = 0; e1 < g.n[0]; ++e1) {
            for (int k = 0; k < local_nodes(g.dim); ++k) dofs[k] = g.node_dof(e1 + (k & 1), e2 + (k >> 1));
            const double xm = (e1 + 0.5) * g.h(0);
            const double ym = g.dim == 2 ? (e2 + 0.5) * g.h(1) : 0.0;
            f(e1, e2, xm, ym, dofs);
        }
}

/// Stiffness matrix of -div(a grad .) with a given per element by `coeff(xm, ym)`.
template <class Coeff>
SparseMatrix assemble_stiffness(const Grid& g, Coeff&& coeff) {
    std::vector<Eigen::Triplet<double>> trips;
    const int ln = local_nodes(g.dim);
    trips.reserve(static_cast<std::size_t>(g.n[0]) * (g.dim == 2 ? g.n[1] : 1) * ln * ln);
    for_each_element(g, [&](int, int, double xm, double ym, const std::array<long, 4>& dofs) {
        const ElementMatrix k = element_stiffness(g, coeff(xm, ym));
        for (int i = 0; i < ln; ++i) {
            if (dofs[i] < 0) continue;
            for (int j = 0; j < ln; ++j) {
                if (dofs[j] < 0) continue;
                trips.emplace_back(dofs[i], dofs[j], k(i, j));
            }
        }
    });
    const auto n = static_cast<Eigen::Index>(g.size());
    SparseMatrix m(n, n);
    m.setFromTriplets(trips.begin(), trips.end());
    return m;
}

/// Integral of |grad u|^2 (identity coefficient, nodal interpolant).
inline double gradient_energy(const GridFunction& u) {
    const Grid& g = u.grid;
    const int ln = local_nodes(g.dim);
    const ElementMatrix k = element_stiffness(g, Matrix2::Identity());
    double s = 0.0;
    for_each_element(g, [&](int, int, double, double, const std::array<long, 4>& dofs) {
        Eigen::Vector4d loc = Eigen::Vector4d::Zero();
        for (int i = 0; i < ln; ++i) loc[i] = dofs[i] < 0 ? 0.0 : u[static_cast<std::size_t>(dofs[i])];
        s += loc.head(ln).dot(k.topLeftCorner(ln, ln) * loc.head(ln));
    });
    return s;
}

}  // namespace homlab::detail

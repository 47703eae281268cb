#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

#include <Eigen/Dense>

namespace homlab {

using Vector = Eigen::VectorXd;

/// Boundary treatment of a uniform grid.
///
/// `closed` is not a boundary condition of its own: it is the full node set of
/// a Dirichlet box (boundary nodes kept, nothing enforced). Functions that do
/// not satisfy the Dirichlet condition, such as corrected homogenised fields,
/// live there.
enum class Boundary { dirichlet, neumann, periodic, closed };

inline const char* to_string(Boundary bc) {
    switch (bc) {
    case Boundary::dirichlet: return "dirichlet";
    case Boundary::neumann: return "neumann";
    case Boundary::periodic: return "periodic";
    case Boundary::closed: return "closed";
    }
    return "?";
}

inline Boundary parse_boundary(const std::string& s) {
    if (s == "dirichlet") return Boundary::dirichlet;
    if (s == "neumann") return Boundary::neumann;
    if (s == "periodic") return Boundary::periodic;
    if (s == "closed") return Boundary::closed;
    throw std::invalid_argument("unknown boundary condition '" + s + "'");
}

/// Uniform grid on (0,l1) or (0,l1)x(0,l2). `n` counts intervals per axis, so
/// the mesh width is always extent/n; the boundary condition decides which of
/// the n+1 nodes per axis carry degrees of freedom.
struct Grid {
    int dim = 1;
    std::array<double, 2> extent{1.0, 1.0};
    std::array<int, 2> n{4, 1};
    Boundary bc = Boundary::dirichlet;

    double h(int axis) const { return extent[axis] / n[axis]; }

    /// Degrees of freedom along one axis.
    int nodes(int axis) const {
        switch (bc) {
        case Boundary::dirichlet: return n[axis] - 1;
        case Boundary::periodic: return n[axis];
        case Boundary::neumann:
        case Boundary::closed: return n[axis] + 1;
        }
        return 0;
    }

    /// Node index of the first dof along an axis.
    int offset() const { return bc == Boundary::dirichlet ? 1 : 0; }

    std::size_t size() const {
        std::size_t s = static_cast<std::size_t>(nodes(0));
        if (dim == 2) s *= static_cast<std::size_t>(nodes(1));
        return s;
    }

    /// Coordinate of dof `i` along `axis`.
    double coord(int axis, int i) const { return (i + offset()) * h(axis); }

    std::size_t index(int i, int j = 0) const {
        return static_cast<std::size_t>(i) + static_cast<std::size_t>(nodes(0)) * static_cast<std::size_t>(j);
    }

    /// Inverse of index(): per-axis dof indices.
    std::array<int, 2> unflatten(std::size_t k) const {
        const int n0 = nodes(0);
        return {static_cast<int>(k % n0), static_cast<int>(k / n0)};
    }

    /// Dof index of global node (i, j) with i, j in [0, n]; -1 for an
    /// eliminated Dirichlet node.
    long node_dof(int i, int j = 0) const {
        std::array<int, 2> ij{i, j};
        for (int a = 0; a < dim; ++a) {
            int& c = ij[a];
            switch (bc) {
            case Boundary::dirichlet:
                if (c <= 0 || c >= n[a]) return -1;
                c -= 1;
                break;
            case Boundary::periodic: c = ((c % n[a]) + n[a]) % n[a]; break;
            case Boundary::neumann:
            case Boundary::closed: break;
            }
        }
        return static_cast<long>(index(ij[0], dim == 2 ? ij[1] : 0));
    }

    /// Shift added to the elliptic operator (A + shift) so it is invertible.
    double shift() const { return (bc == Boundary::neumann || bc == Boundary::periodic) ? 1.0 : 0.0; }

    /// The same box with every node kept; identity for non-Dirichlet grids.
    Grid closure() const {
        Grid g = *this;
        if (bc == Boundary::dirichlet) g.bc = Boundary::closed;
        return g;
    }

    friend bool operator==(const Grid& a, const Grid& b) {
        if (a.dim != b.dim || a.bc != b.bc) return false;
        for (int k = 0; k < a.dim; ++k)
            if (a.n[k] != b.n[k] || a.extent[k] != b.extent[k]) return false;
        return true;
    }
    friend bool operator!=(const Grid& a, const Grid& b) { return !(a == b); }
};

inline Grid make_grid(int dim, std::array<double, 2> extent, std::array<int, 2> n, Boundary bc) {
    if (dim != 1 && dim != 2) throw std::invalid_argument("grid dimension must be 1 or 2");
    for (int a = 0; a < dim; ++a) {
        if (n[a] < 4) throw std::invalid_argument("grid needs n >= 4 intervals per axis, got " + std::to_string(n[a]));
        if (!(extent[a] > 0.0) || !std::isfinite(extent[a]))
            throw std::invalid_argument("grid extent must be positive and finite");
    }
    Grid g;
    g.dim = dim;
    g.extent = {extent[0], dim == 2 ? extent[1] : 1.0};
    g.n = {n[0], dim == 2 ? n[1] : 1};
    g.bc = bc;
    return g;
}

inline Grid make_grid_1d(double length, int n, Boundary bc) { return make_grid(1, {length, 1.0}, {n, 1}, bc); }

inline Grid make_grid_2d(double lx, double ly, int n, Boundary bc) { return make_grid(2, {lx, ly}, {n, n}, bc); }

/// Nodal values on a grid.
struct GridFunction {
    Grid grid;
    Vector values;

    GridFunction() = default;
    explicit GridFunction(const Grid& g) : grid(g), values(Vector::Zero(static_cast<Eigen::Index>(g.size()))) {}
    GridFunction(const Grid& g, Vector v) : grid(g), values(std::move(v)) {
        if (static_cast<std::size_t>(values.size()) != grid.size())
            throw std::invalid_argument("grid function length does not match the grid dof count");
    }

    std::size_t size() const { return static_cast<std::size_t>(values.size()); }
    double operator[](std::size_t k) const { return values[static_cast<Eigen::Index>(k)]; }
    double& operator[](std::size_t k) { return values[static_cast<Eigen::Index>(k)]; }

    bool finite() const { return values.allFinite(); }

    GridFunction& operator+=(const GridFunction& o) {
        check_same(o);
        values += o.values;
        return *this;
    }
    GridFunction& operator-=(const GridFunction& o) {
        check_same(o);
        values -= o.values;
        return *this;
    }
    GridFunction& operator*=(double c) {
        values *= c;
        return *this;
    }
    friend GridFunction operator+(GridFunction a, const GridFunction& b) { return a += b; }
    friend GridFunction operator-(GridFunction a, const GridFunction& b) { return a -= b; }
    friend GridFunction operator*(double c, GridFunction a) { return a *= c; }

    void check_same(const GridFunction& o) const {
        if (grid != o.grid) throw std::invalid_argument("grid functions live on different grids");
    }
};

/// Sample a function of physical coordinates at the dofs of `g`.
template <class F>
GridFunction sample(const Grid& g, F&& f) {
    GridFunction out(g);
    for (std::size_t k = 0; k < g.size(); ++k) {
        auto ij = g.unflatten(k);
        double x = g.coord(0, ij[0]);
        double y = g.dim == 2 ? g.coord(1, ij[1]) : 0.0;
        if constexpr (std::is_invocable_v<F, double, double>)
            out[k] = f(x, y);
        else
            out[k] = f(x);
    }
    return out;
}

/// Extend a Dirichlet grid function by zero onto its closure grid.
inline GridFunction lift_to_closure(const GridFunction& u) {
    if (u.grid.bc != Boundary::dirichlet) return u;
    Grid c = u.grid.closure();
    GridFunction out(c);
    for (std::size_t k = 0; k < u.size(); ++k) {
        auto ij = u.grid.unflatten(k);
        out[c.index(ij[0] + 1, u.grid.dim == 2 ? ij[1] + 1 : 0)] = u[k];
    }
    return out;
}

/// Bring two grid functions onto a common grid (lifting a Dirichlet function
/// when the other one lives on the closure).
inline std::pair<GridFunction, GridFunction> common_grid(const GridFunction& a, const GridFunction& b) {
    if (a.grid == b.grid) return {a, b};
    if (a.grid.closure() == b.grid) return {lift_to_closure(a), b};
    if (b.grid.closure() == a.grid) return {a, lift_to_closure(b)};
    throw std::invalid_argument("grid functions live on incompatible grids");
}

/// Lumped (trapezoid) mass weights: the integral of each nodal basis function.
inline Vector lumped_mass(const Grid& g) {
    Vector m(static_cast<Eigen::Index>(g.size()));
    const double cell = g.dim == 2 ? g.h(0) * g.h(1) : g.h(0);
    for (std::size_t k = 0; k < g.size(); ++k) {
        auto ij = g.unflatten(k);
        double w = cell;
        if (g.bc == Boundary::neumann || g.bc == Boundary::closed) {
            for (int a = 0; a < g.dim; ++a)
                if (ij[a] == 0 || ij[a] == g.n[a]) w *= 0.5;
        }
        m[static_cast<Eigen::Index>(k)] = w;
    }
    return m;
}

}  // namespace homlab

#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "homlab/assembly.hpp"
#include "homlab/grid.hpp"
#include "homlab/operator.hpp"
#include "homlab/random.hpp"

namespace homlab {

/// Energy-space pair (u, du/dt) at time t.
struct State {
    GridFunction u;
    GridFunction v;
    double t = 0.0;

    State() = default;
    State(GridFunction u_, GridFunction v_, double t_ = 0.0) : u(std::move(u_)), v(std::move(v_)), t(t_) {
        if (u.grid != v.grid) throw std::invalid_argument("state components live on different grids");
    }
    static State zero(const Grid& g) { return State(GridFunction(g), GridFunction(g)); }

    const Grid& grid() const { return u.grid; }
    bool finite() const { return u.finite() && v.finite(); }

    State& operator+=(const State& o) {
        u += o.u;
        v += o.v;
        return *this;
    }
    State& operator-=(const State& o) {
        u -= o.u;
        v -= o.v;
        return *this;
    }
    State& operator*=(double c) {
        u *= c;
        v *= c;
        return *this;
    }
    friend State operator+(State a, const State& b) { return a += b; }
    friend State operator-(State a, const State& b) { return a -= b; }
    friend State operator*(double c, State a) { return a *= c; }
};

inline State lift_to_closure(const State& s) { return State(lift_to_closure(s.u), lift_to_closure(s.v), s.t); }

inline std::pair<State, State> common_grid(const State& a, const State& b) {
    if (a.grid() == b.grid()) return {a, b};
    if (a.grid().closure() == b.grid()) return {lift_to_closure(a), b};
    if (b.grid().closure() == a.grid()) return {a, lift_to_closure(b)};
    throw std::invalid_argument("states live on incompatible grids");
}

struct NormKind {
    enum class Tag { L2, H1, Hminus1, Cbeta, E, Eminus1, E1, E2 };
    Tag tag = Tag::L2;
    double beta = 0.0;

    static NormKind L2() { return {Tag::L2, 0.0}; }
    static NormKind H1() { return {Tag::H1, 0.0}; }
    static NormKind Hminus1() { return {Tag::Hminus1, 0.0}; }
    static NormKind Cbeta(double beta) {
        if (!(beta >= 0.0 && beta < 1.0)) throw std::invalid_argument("Holder exponent must lie in [0,1)");
        return {Tag::Cbeta, beta};
    }
    static NormKind E() { return {Tag::E, 0.0}; }
    static NormKind Eminus1() { return {Tag::Eminus1, 0.0}; }
    static NormKind E1() { return {Tag::E1, 0.0}; }
    static NormKind E2() { return {Tag::E2, 0.0}; }

    bool for_pairs() const { return tag == Tag::E || tag == Tag::Eminus1 || tag == Tag::E1 || tag == Tag::E2; }
};

inline std::string to_string(const NormKind& k) {
    switch (k.tag) {
    case NormKind::Tag::L2: return "L2";
    case NormKind::Tag::H1: return "H1";
    case NormKind::Tag::Hminus1: return "Hminus1";
    case NormKind::Tag::Cbeta: return "C" + std::to_string(k.beta);
    case NormKind::Tag::E: return "E";
    case NormKind::Tag::Eminus1: return "Eminus1";
    case NormKind::Tag::E1: return "E1";
    case NormKind::Tag::E2: return "E2";
    }
    return "?";
}

/// Operators a state norm may need: `ref` (identity-coefficient reference
/// for dual norms), `op` and `force` for the coefficient-dependent E1/E2.
struct NormContext {
    const EllipticOperator* ref = nullptr;
    const EllipticOperator* op = nullptr;
    const GridFunction* force = nullptr;
};

inline double l2_squared(const GridFunction& u) {
    const Vector m = lumped_mass(u.grid);
    return m.dot(u.values.cwiseAbs2());
}

/// |grad u|^2 + shift |u|^2: the squared H^1 norm matching A + shift.
inline double h1_full_squared(const GridFunction& u) {
    double s = detail::gradient_energy(u);
    if (u.grid.shift() != 0.0) s += u.grid.shift() * l2_squared(u);
    return s;
}

/// (phi, L^{-1} phi) with L the reference operator.
inline double hminus1_squared(const GridFunction& phi, const EllipticOperator& ref) {
    ref.check_grid(phi);
    const Vector load = ref.mass().cwiseProduct(phi.values);
    return std::max(0.0, load.dot(ref.solve_load(load)));
}

inline double holder_norm(const GridFunction& u, double beta) {
    if (!(beta >= 0.0 && beta < 1.0)) throw std::invalid_argument("Holder exponent must lie in [0,1)");
    const std::size_t n = u.size();
    if (n == 0) return 0.0;
    double sup = u.values.cwiseAbs().maxCoeff();
    auto point = [&](std::size_t k) {
        auto ij = u.grid.unflatten(k);
        return std::array<double, 2>{u.grid.coord(0, ij[0]), u.grid.dim == 2 ? u.grid.coord(1, ij[1]) : 0.0};
    };
    auto quotient = [&](std::size_t a, std::size_t b) {
        auto pa = point(a), pb = point(b);
        const double d = std::hypot(pa[0] - pb[0], pa[1] - pb[1]);
        if (d == 0.0) return 0.0;
        return std::abs(u[a] - u[b]) / std::pow(d, beta);
    };
    double semi = 0.0;
    if (n <= 512) {
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t b = a + 1; b < n; ++b) semi = std::max(semi, quotient(a, b));
    } else {
        Rng rng(0x5eed'c0de'2024ULL);
        for (int k = 0; k < 10000; ++k) {
            std::size_t a = rng.below(n), b = rng.below(n);
            semi = std::max(semi, quotient(a, b));
        }
    }
    return sup + semi;
}

/// Discrete norm of a single grid function.
inline double norm(const GridFunction& u, const NormKind& kind, const EllipticOperator* ref = nullptr) {
    switch (kind.tag) {
    case NormKind::Tag::L2: return std::sqrt(l2_squared(u));
    case NormKind::Tag::H1: return std::sqrt(detail::gradient_energy(u));
    case NormKind::Tag::Hminus1:
        if (!ref) throw std::invalid_argument("the H^-1 norm needs a reference operator");
        return std::sqrt(hminus1_squared(u, *ref));
    case NormKind::Tag::Cbeta: return holder_norm(u, kind.beta);
    default: throw std::invalid_argument("norm " + to_string(kind) + " applies to state pairs");
    }
}

/// Discrete norm of an energy-space pair.
inline double norm(const State& s, const NormKind& kind, const NormContext& ctx = {}) {
    switch (kind.tag) {
    case NormKind::Tag::E: return std::sqrt(h1_full_squared(s.u) + l2_squared(s.v));
    case NormKind::Tag::Eminus1: {
        if (!ctx.ref) throw std::invalid_argument("the E^-1 norm needs a reference operator");
        return std::sqrt(l2_squared(s.u) + hminus1_squared(s.v, *ctx.ref));
    }
    case NormKind::Tag::E1: {
        if (!ctx.op) throw std::invalid_argument("the E1 norm needs the system operator");
        const GridFunction au = ctx.op->apply(s.u);
        return std::sqrt(l2_squared(au) + h1_full_squared(s.v));
    }
    case NormKind::Tag::E2: {
        if (!ctx.op) throw std::invalid_argument("the E2 norm needs the system operator");
        const GridFunction au = ctx.op->apply(s.u);
        GridFunction r = -1.0 * au;
        if (ctx.force) r += *ctx.force;
        return std::sqrt(h1_full_squared(r) + l2_squared(au) + l2_squared(ctx.op->apply(s.v)));
    }
    case NormKind::Tag::Cbeta: return std::hypot(holder_norm(s.u, kind.beta), holder_norm(s.v, kind.beta));
    default: throw std::invalid_argument("norm " + to_string(kind) + " applies to single grid functions");
    }
}

/// Per-axis finite-difference gradient: centred inside, second-order
/// one-sided at the ends of non-periodic axes, wrapped on periodic ones.
inline std::vector<GridFunction> gradient(const GridFunction& u) {
    const Grid& g = u.grid;
    if (!u.finite()) throw std::invalid_argument("gradient of a non-finite grid function");
    std::vector<GridFunction> out;
    for (int a = 0; a < g.dim; ++a) {
        GridFunction d(g);
        const int m = g.nodes(a);
        const double h = g.h(a);
        for (std::size_t k = 0; k < g.size(); ++k) {
            auto ij = g.unflatten(k);
            auto at = [&](int off) {
                auto c = ij;
                c[a] += off;
                if (g.bc == Boundary::periodic) c[a] = ((c[a] % m) + m) % m;
                return u[g.index(c[0], c[1])];
            };
            const int i = ij[a];
            if (g.bc == Boundary::periodic || (i > 0 && i < m - 1))
                d[k] = (at(1) - at(-1)) / (2.0 * h);
            else if (i == 0)
                d[k] = (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h);
            else
                d[k] = (3.0 * at(0) - 4.0 * at(-1) + at(-2)) / (2.0 * h);
        }
        out.push_back(std::move(d));
    }
    return out;
}

}  // namespace homlab

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "homlab/elliptic.hpp"
#include "homlab/nonlinearity.hpp"
#include "homlab/norms.hpp"
#include "homlab/operator.hpp"
#include "homlab/random.hpp"
#include "homlab/report.hpp"

namespace homlab {

/// Raised when a trajectory leaves the E-ball of radius `limit`.
class BlowUpError : public std::runtime_error {
public:
    BlowUpError(double t, double norm_e)
        : std::runtime_error(message(t, norm_e)), t_(t), norm_(norm_e) {}
    double time() const { return t_; }
    double norm_e() const { return norm_; }

    static constexpr double limit = 1e10;

private:
    static std::string message(double t, double n) {
        std::ostringstream os;
        os << "trajectory blew up at t = " << t << " (|state|_E = " << n << ")";
        return os.str();
    }
    double t_, norm_;
};

/// Smooth random field: a few low boundary-compatible modes with
/// coefficients uniform in [-1,1] damped like 1/(1+k)^2.
inline GridFunction smooth_random_field(const Grid& g, Rng& rng, int modes = 6) {
    using std::numbers::pi;
    auto basis = [&](int axis, int k, double phase, double x) {
        const double l = g.extent[axis];
        switch (g.bc) {
        case Boundary::dirichlet:
        case Boundary::closed: return std::sin((k + 1) * pi * x / l);
        case Boundary::neumann: return std::cos(k * pi * x / l);
        case Boundary::periodic: return std::cos(2.0 * pi * k * x / l + phase);
        }
        return 0.0;
    };
    GridFunction out(g);
    const int my = g.dim == 2 ? modes : 1;
    for (int kx = 0; kx < modes; ++kx)
        for (int ky = 0; ky < my; ++ky) {
            const double c = rng.uniform(-1.0, 1.0) / ((1.0 + kx) * (1.0 + kx) * (1.0 + ky) * (1.0 + ky));
            const double px = rng.uniform(0.0, 2.0 * pi), py = rng.uniform(0.0, 2.0 * pi);
            for (std::size_t k = 0; k < g.size(); ++k) {
                auto ij = g.unflatten(k);
                double b = basis(0, kx, px, g.coord(0, ij[0]));
                if (g.dim == 2) b *= basis(1, ky, py, g.coord(1, ij[1]));
                out[k] += c * b;
            }
        }
    return out;
}

/// E^2-smooth data xi = (A^-1 (s p + g), A^-1 (s q)) for smooth random p, q.
inline State smooth_initial_data(const EllipticOperator& op, const GridFunction& g, Rng& rng, double scale = 1.0) {
    GridFunction p = smooth_random_field(op.grid(), rng);
    GridFunction q = smooth_random_field(op.grid(), rng);
    return State(op.solve(scale * p + g), op.solve(scale * q));
}

/// Number of steps of size dt in T; T must be an integer multiple of dt.
inline long steps_in(double T, double dt) {
    if (!(T >= 0.0)) throw std::invalid_argument("time span must be non-negative");
    const double r = T / dt;
    const long n = std::lround(r);
    if (std::abs(r - static_cast<double>(n)) > 1e-8 * std::max(1.0, r))
        throw std::invalid_argument("time span " + std::to_string(T) + " is not a multiple of dt = " + std::to_string(dt));
    return n;
}

/// u_tt + gamma u_t + A u + f(u) = g discretised by linearly implicit
/// Crank-Nicolson: the linear part by the trapezoid rule, f explicit at the
/// current state. Each step solves W v+ = r with the fixed SPD matrix
/// W = (1 + gamma dt/2) M + (dt^2/4) K, factorised once.
class WaveSystem {
public:
    WaveSystem(std::shared_ptr<const EllipticOperator> op, double gamma, Nonlinearity f, GridFunction g, double dt)
        : op_(std::move(op)), gamma_(gamma), f_(f), g_(std::move(g)), dt_(dt) {
        if (!op_) throw std::invalid_argument("wave system needs an operator");
        if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw std::invalid_argument("damping must be non-negative");
        if (!(dt > 0.0)) throw std::invalid_argument("time step must be positive");
        const Grid& gr = op_->grid();
        for (int a = 0; a < gr.dim; ++a)
            if (dt > gr.h(a) * (1.0 + 1e-12)) throw std::invalid_argument("time step must not exceed the mesh width");
        op_->check_grid(g_);
        if (!g_.finite()) throw std::invalid_argument("force must be finite");
        SparseMatrix w = (0.25 * dt * dt) * op_->stiffness();
        for (Eigen::Index k = 0; k < w.rows(); ++k) w.coeffRef(k, k) += (1.0 + 0.5 * gamma * dt) * op_->mass()[k];
        w.makeCompressed();
        step_factor_ = std::make_shared<const SpdFactorization>(w);
    }

    const EllipticOperator& op() const { return *op_; }
    std::shared_ptr<const EllipticOperator> op_ptr() const { return op_; }
    const Grid& grid() const { return op_->grid(); }
    double gamma() const { return gamma_; }
    const Nonlinearity& nonlinearity() const { return f_; }
    const GridFunction& force() const { return g_; }
    double dt() const { return dt_; }

    Vector f_of(const Vector& u) const { return u.unaryExpr([&](double s) { return f_.f(s); }); }

    /// One time step; throws BlowUpError when |state|_E exceeds the limit.
    State step(const State& s) const {
        op_->check_grid(s.u);
        const Vector& m = op_->mass();
        const Vector& u = s.u.values;
        const Vector& v = s.v.values;
        Vector rhs = m.cwiseProduct((1.0 - 0.5 * gamma_ * dt_) * v + dt_ * (g_.values - f_of(u)));
        rhs.noalias() -= op_->stiffness() * (dt_ * u + (0.25 * dt_ * dt_) * v);
        Vector vn = step_factor_->solve(rhs, 1e-12);
        Vector un = u + (0.5 * dt_) * (vn + v);
        State out(GridFunction(grid(), std::move(un)), GridFunction(grid(), std::move(vn)), s.t + dt_);
        guard(out);
        return out;
    }

    void guard(const State& s) const {
        if (!s.finite()) throw BlowUpError(s.t, std::numeric_limits<double>::infinity());
        const double e = norm(s, NormKind::E());
        if (!(e <= BlowUpError::limit)) throw BlowUpError(s.t, e);
    }

    /// u_tt = g - f(u) - gamma v - A u at a state.
    GridFunction acceleration(const State& s) const {
        op_->check_grid(s.u);
        Vector a = g_.values - f_of(s.u.values) - gamma_ * s.v.values;
        a -= (op_->stiffness() * s.u.values).cwiseQuotient(op_->mass());
        return GridFunction(grid(), std::move(a));
    }

    /// 1/2 v.Mv + 1/2 u.Ku + (F(u), 1) - (g, u).
    double energy(const State& s) const {
        op_->check_grid(s.u);
        const Vector& m = op_->mass();
        const Vector& u = s.u.values;
        const Vector fu = u.unaryExpr([&](double x) { return f_.F(x); });
        return 0.5 * m.dot(s.v.values.cwiseAbs2()) + 0.5 * u.dot(op_->stiffness() * u) + m.dot(fu) - m.dot(g_.values.cwiseProduct(u));
    }

private:
    std::shared_ptr<const EllipticOperator> op_;
    double gamma_;
    Nonlinearity f_;
    GridFunction g_;
    double dt_;
    std::shared_ptr<const SpdFactorization> step_factor_;
};

inline double energy(const WaveSystem& sys, const State& s) { return sys.energy(s); }
inline State step(const WaveSystem& sys, const State& s) { return sys.step(s); }

struct Trajectory {
    std::vector<State> states;
    const State& last() const { return states.back(); }
};

/// Step `steps` times, calling observe(k, state) for k = 0 and every
/// multiple of `every`.
template <class Observe>
State evolve_steps(const WaveSystem& sys, State s, long steps, long every, Observe&& observe) {
    if (steps < 0 || every <= 0) throw std::invalid_argument("invalid step counts");
    const double t0 = s.t;
    observe(0L, s);
    for (long k = 1; k <= steps; ++k) {
        s = sys.step(s);
        s.t = t0 + static_cast<double>(k) * sys.dt();
        if (k % every == 0) observe(k, s);
    }
    return s;
}

/// States at t0 + j * sample_every for j = 0 .. T / sample_every.
inline Trajectory evolve(const WaveSystem& sys, const State& xi, double T, double sample_every) {
    if (T < 0.0) throw std::invalid_argument("evolve needs T >= 0");
    Trajectory tr;
    if (T == 0.0) {
        tr.states.push_back(xi);
        return tr;
    }
    if (!(sample_every > 0.0)) throw std::invalid_argument("sample spacing must be positive");
    const long steps = steps_in(T, sys.dt());
    const long every = steps_in(sample_every, sys.dt());
    if (every == 0 || steps % every != 0) throw std::invalid_argument("T must be a multiple of the sample spacing");
    evolve_steps(sys, xi, steps, every, [&](long, const State& s) { tr.states.push_back(s); });
    return tr;
}

enum class GapMode { raw, prepared, corrected };

inline const char* to_string(GapMode m) {
    switch (m) {
    case GapMode::raw: return "raw";
    case GapMode::prepared: return "prepared";
    case GapMode::corrected: return "corrected";
    }
    return "?";
}

inline GapMode parse_gap_mode(const std::string& s) {
    if (s == "raw") return GapMode::raw;
    if (s == "prepared") return GapMode::prepared;
    if (s == "corrected") return GapMode::corrected;
    throw std::invalid_argument("unknown gap mode '" + s + "'");
}

/// Gap time series between S_eps(t) xi and S_0(t) xi_0 with xi_0 = xi (raw)
/// or Pi_eps xi (prepared, corrected).
struct GapSeries {
    std::vector<double> t;
    std::vector<double> gap_Eminus1;  ///< |S_eps xi - S_0 xi_0|_{E^-1}
    std::vector<double> gap_dt;       ///< |d/dt (S_eps xi - S_0 xi_0)|_{E^-1}
    std::vector<double> gap_H1corr;   ///< |u_eps - T_eps u_0|_{H^1}; NaN without a corrector
    std::vector<double> gap_H1;       ///< |u_eps - u_0|_{H^1}
    std::vector<std::string> warnings;

    double at(const std::vector<double>& col, double time) const {
        for (std::size_t k = 0; k < t.size(); ++k)
            if (std::abs(t[k] - time) <= 1e-9 * std::max(1.0, time)) return col[k];
        throw std::out_of_range("no sample at t = " + std::to_string(time));
    }
};

inline GapSeries trajectory_gap(const WaveSystem& sys_e, const WaveSystem& sys_0, const State& xi, double T, double sample_every,
                                GapMode mode, const Corrector* corr = nullptr) {
    if (sys_e.grid() != sys_0.grid()) throw std::invalid_argument("trajectory gap needs systems on one grid");
    if (sys_e.dt() != sys_0.dt() || sys_e.gamma() != sys_0.gamma())
        throw std::invalid_argument("trajectory gap needs matching dt and damping");
    if (mode == GapMode::corrected && !corr) throw std::invalid_argument("corrected gap needs a corrector");

    GapSeries out;
    {
        // Grid-scale data has |xi|_E2 ~ |xi|_E / h^2; E^2-smooth data keeps the ratio O(1).
        const double e = norm(xi, NormKind::E());
        const double e2 = norm(xi, NormKind::E2(), {nullptr, &sys_e.op(), &sys_e.force()});
        double hmin = sys_e.grid().h(0);
        if (sys_e.grid().dim == 2) hmin = std::min(hmin, sys_e.grid().h(1));
        if (e > 0.0 && e2 > e / (16.0 * hmin * hmin))
            out.warnings.push_back("initial data look rough: |xi|_E2 = " + std::to_string(e2) + " vs |xi|_E = " + std::to_string(e));
    }

    const State xi0 = mode == GapMode::raw ? xi : prepare_initial(sys_e.op(), sys_0.op(), xi);
    const Trajectory te = evolve(sys_e, xi, T, sample_every);
    const Trajectory t0 = evolve(sys_0, xi0, T, sample_every);
    const EllipticOperator ref = EllipticOperator::reference(sys_e.grid());
    const NormContext ctx{&ref};

    for (std::size_t k = 0; k < te.states.size(); ++k) {
        const State& a = te.states[k];
        const State& b = t0.states[k];
        out.t.push_back(a.t);
        out.gap_Eminus1.push_back(norm(a - b, NormKind::Eminus1(), ctx));
        const State da(a.v - b.v, sys_e.acceleration(a) - sys_0.acceleration(b));
        out.gap_dt.push_back(norm(da, NormKind::Eminus1(), ctx));
        out.gap_H1.push_back(std::sqrt(h1_full_squared(a.u - b.u)));
        if (corr)
            out.gap_H1corr.push_back(std::sqrt(h1_full_squared(lift_to_closure(a.u) - corrector_apply(*corr, b.u))));
        else
            out.gap_H1corr.push_back(std::numeric_limits<double>::quiet_NaN());
    }
    return out;
}

struct TrajectoryStudyParams {
    double gamma = 0.5;
    Nonlinearity f = Nonlinearity::cubic();
    double dt = 0.0;  ///< 0 selects h/2
    double scale = 3.0;
    std::uint64_t seed = 7;
    std::vector<double> times{1.0, 2.0, 4.0};
    double sample_every = 0.25;
};

/// Trajectory gaps across an epsilon ladder. Per epsilon and fixed time t:
/// sup over [0, t] of the raw E^-1 gap, the prepared d/dt gap, and the
/// corrected and uncorrected H^1 errors. The initial data for epsilon is
/// E^2_eps-smooth and drawn from one seed for every epsilon.
inline RateReport trajectory_rate_study(const CoefficientField& coeff, std::shared_ptr<const CellSolution> cell, const Grid& grid,
                                        const std::vector<double>& eps_list, const GridFunction& g, const TrajectoryStudyParams& p) {
    if (eps_list.size() < 3) throw std::invalid_argument("a rate study needs at least three epsilon values");
    if (p.times.empty()) throw std::invalid_argument("trajectory study needs sample times");
    for (double e : eps_list) check_resolution(grid, e);
    const double dt = p.dt > 0.0 ? p.dt : 0.5 * grid.h(0);
    const double T = *std::max_element(p.times.begin(), p.times.end());
    auto op0 = std::make_shared<const EllipticOperator>(EllipticOperator::homogenised(cell->a_h, grid, coeff.nu()));
    const WaveSystem sys0(op0, p.gamma, p.f, g, dt);

    RateReport rep;
    rep.constants["dt"] = dt;
    auto tag = [](const char* what, double t) {
        char b[64];
        std::snprintf(b, sizeof b, "%s_t%g", what, t);
        return std::string(b);
    };
    for (double eps : eps_list) {
        auto ope = std::make_shared<const EllipticOperator>(EllipticOperator::oscillating(coeff, eps, grid));
        const WaveSystem syse(ope, p.gamma, p.f, g, dt);
        Rng rng(p.seed);
        const State xi = smooth_initial_data(*ope, g, rng, p.scale);
        const Corrector corr(cell, eps);
        const GapSeries raw = trajectory_gap(syse, sys0, xi, T, p.sample_every, GapMode::raw);
        const GapSeries cor = trajectory_gap(syse, sys0, xi, T, p.sample_every, GapMode::corrected, &corr);
        rep.epsilon.push_back(eps);
        rep.column("gap").push_back(resolvent_gap(*ope, *op0, 1e-8));
        for (double t : p.times) {
            double sup = 0.0;
            for (std::size_t k = 0; k < raw.t.size() && raw.t[k] <= t * (1.0 + 1e-12); ++k) sup = std::max(sup, raw.gap_Eminus1[k]);
            rep.column(tag("raw_Eminus1", t)).push_back(sup);
            rep.column(tag("prep_dt", t)).push_back(cor.at(cor.gap_dt, t));
            rep.column(tag("corr_H1", t)).push_back(cor.at(cor.gap_H1corr, t));
            rep.column(tag("unc_H1", t)).push_back(cor.at(cor.gap_H1, t));
        }
        for (const auto* w : {&raw.warnings, &cor.warnings})
            for (const auto& m : *w) rep.notes.push_back("eps = " + std::to_string(eps) + ": " + m);
    }
    const std::vector<double> gap = rep.column("gap");
    for (double t : p.times) {
        rep.fit(tag("raw_Eminus1", t), gap);
        rep.fit(tag("prep_dt", t), gap);
        rep.fit(tag("corr_H1", t));
    }
    return rep;
}

}  // namespace homlab

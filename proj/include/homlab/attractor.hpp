#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "homlab/elliptic.hpp"
#include "homlab/fit.hpp"
#include "homlab/norms.hpp"
#include "homlab/parallel.hpp"
#include "homlab/random.hpp"
#include "homlab/report.hpp"
#include "homlab/wave.hpp"

namespace homlab {

struct CloudProvenance {
    std::string system;
    int n_traj = 0;
    double T_burn = 0.0;
    double window = 0.0;  ///< time span covered by the samples of one trajectory
    std::uint64_t seed = 0;
    double absorbing_bound = 0.0;  ///< every state has |.|_E at most this
};

/// Finite sample of an attractor; non-empty, one grid.
struct StateCloud {
    std::vector<State> states;
    CloudProvenance provenance;

    StateCloud() = default;
    StateCloud(std::vector<State> s, CloudProvenance p) : states(std::move(s)), provenance(std::move(p)) {
        if (states.empty()) throw std::invalid_argument("state cloud must not be empty");
        for (const auto& x : states)
            if (x.grid() != states.front().grid()) throw std::invalid_argument("cloud states live on different grids");
    }

    std::size_t size() const { return states.size(); }
    const Grid& grid() const { return states.front().grid(); }
};

struct SamplingPlan {
    int n_traj = 8;
    double T_burn = 60.0;
    int n_samples = 4;
    double spacing = 1.0;
    std::uint64_t seed = 1;
    double scale = 3.0;  ///< amplitude of the random smooth initial data
};

/// Evolve n_traj random smooth initial states through the burn-in, then keep
/// n_samples states spaced by `spacing`. Trajectory j draws from
/// mix_seed(seed, j), so clouds do not depend on the thread count.
inline StateCloud sample_attractor(const WaveSystem& sys, const SamplingPlan& plan) {
    if (plan.n_traj < 8) throw std::invalid_argument("attractor sampling needs n_traj >= 8");
    if (plan.n_samples < 1) throw std::invalid_argument("attractor sampling needs n_samples >= 1");
    if (sys.gamma() <= 0.0 || plan.T_burn < 10.0 / sys.gamma() * (1.0 - 1e-12))
        throw std::invalid_argument("burn-in must satisfy T_burn >= 10/gamma with gamma > 0");
    const long burn = steps_in(plan.T_burn, sys.dt());
    const long every = plan.n_samples > 1 ? steps_in(plan.spacing, sys.dt()) : 1;
    if (plan.n_samples > 1 && every == 0) throw std::invalid_argument("sample spacing must be at least one step");
    const long window = every * (plan.n_samples - 1);

    std::vector<std::vector<State>> per(static_cast<std::size_t>(plan.n_traj));
    parallel_for(per.size(), [&](std::size_t j) {
        Rng rng(mix_seed(plan.seed, j));
        State s = smooth_initial_data(sys.op(), sys.force(), rng, plan.scale);
        s = evolve_steps(sys, s, burn, burn > 0 ? burn : 1, [](long, const State&) {});
        evolve_steps(sys, s, window, every, [&](long, const State& x) { per[j].push_back(x); });
    });

    std::vector<State> states;
    double bound = 0.0;
    for (auto& p : per)
        for (auto& s : p) {
            bound = std::max(bound, norm(s, NormKind::E()));
            states.push_back(std::move(s));
        }
    CloudProvenance prov{sys.op().label(), plan.n_traj, plan.T_burn, static_cast<double>(window) * sys.dt(), plan.seed, bound};
    return StateCloud(std::move(states), prov);
}

/// (T_eps u, v) on every state; Dirichlet clouds move to the closure grid.
inline StateCloud correct_cloud(const StateCloud& cloud, const Corrector& corr) {
    std::vector<State> out;
    out.reserve(cloud.size());
    double bound = 0.0;
    for (const auto& s : cloud.states) {
        out.push_back(corrector_apply(corr, s));
        bound = std::max(bound, norm(out.back(), NormKind::E()));
    }
    CloudProvenance prov = cloud.provenance;
    prov.system = "T_eps " + prov.system;
    prov.absorbing_bound = bound;
    return StateCloud(std::move(out), prov);
}

/// sup_a inf_b dist(a, b) by the exact double loop, parallel over a with an
/// in-order max reduction.
template <class A, class B, class Dist>
double hausdorff_one_sided(const std::vector<A>& a, const std::vector<B>& b, Dist&& dist) {
    if (a.empty() || b.empty()) throw std::invalid_argument("hausdorff distance of an empty set");
    std::vector<double> best(a.size(), 0.0);
    parallel_for(a.size(), [&](std::size_t i) {
        double m = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < b.size(); ++j) m = std::min(m, static_cast<double>(dist(a[i], b[j])));
        best[i] = m;
    });
    double out = 0.0;
    for (double x : best) out = std::max(out, x);
    return out;
}

template <class T, class Dist>
double hausdorff_symmetric(const std::vector<T>& a, const std::vector<T>& b, Dist&& dist) {
    return std::max(hausdorff_one_sided(a, b, dist), hausdorff_one_sided(b, a, [&](const T& x, const T& y) { return dist(y, x); }));
}

namespace detail {

/// E^-1 distances via per-state precomputation: |v|_{H^-1}^2 = (Mv).K^-1(Mv)
/// is a quadratic form, so differences need no further solves.
struct DualPoint {
    Vector u, mv, kmv;
};

inline std::vector<DualPoint> dual_points(const std::vector<State>& s, const EllipticOperator& ref) {
    std::vector<DualPoint> out(s.size());
    parallel_for(s.size(), [&](std::size_t k) {
        out[k].u = s[k].u.values;
        out[k].mv = ref.mass().cwiseProduct(s[k].v.values);
        out[k].kmv = ref.solve_load(out[k].mv);
    });
    return out;
}

inline double dual_distance(const DualPoint& a, const DualPoint& b, const Vector& m) {
    const Vector du = a.u - b.u;
    const double l2 = m.dot(du.cwiseAbs2());
    const double hm = (a.mv - b.mv).dot(a.kmv - b.kmv);
    return std::sqrt(l2 + std::max(0.0, hm));
}

inline std::vector<State> lifted(const std::vector<State>& s) {
    std::vector<State> out;
    out.reserve(s.size());
    for (const auto& x : s) out.push_back(lift_to_closure(x));
    return out;
}

}  // namespace detail

/// Hausdorff distance between clouds in E, E^-1 or C^beta. The one-sided
/// value is sup over A of the distance to B. A Dirichlet cloud compared with
/// a cloud on its closure grid is lifted first (E and C^beta only).
inline double hausdorff(const StateCloud& A, const StateCloud& B, const NormKind& kind, bool symmetric = false) {
    if (A.states.empty() || B.states.empty()) throw std::invalid_argument("hausdorff distance of an empty cloud");
    if (kind.tag == NormKind::Tag::Eminus1) {
        if (A.grid() != B.grid()) throw std::invalid_argument("E^-1 cloud distances need one grid");
        const EllipticOperator ref = EllipticOperator::reference(A.grid());
        const auto pa = detail::dual_points(A.states, ref);
        const auto pb = detail::dual_points(B.states, ref);
        auto d = [&](const detail::DualPoint& x, const detail::DualPoint& y) { return detail::dual_distance(x, y, ref.mass()); };
        return symmetric ? hausdorff_symmetric(pa, pb, d) : hausdorff_one_sided(pa, pb, d);
    }
    if (kind.tag != NormKind::Tag::E && kind.tag != NormKind::Tag::Cbeta)
        throw std::invalid_argument("cloud distances support E, E^-1 and C^beta, not " + to_string(kind));
    std::vector<State> a = A.states, b = B.states;
    if (A.grid() != B.grid()) {
        if (A.grid().closure() == B.grid()) a = detail::lifted(a);
        else if (B.grid().closure() == A.grid()) b = detail::lifted(b);
        else throw std::invalid_argument("clouds live on incompatible grids");
    }
    auto d = [&](const State& x, const State& y) { return norm(x - y, kind); };
    return symmetric ? hausdorff_symmetric(a, b, d) : hausdorff_one_sided(a, b, d);
}

struct AttractorStudyParams {
    double gamma = 0.5;
    Nonlinearity f = Nonlinearity::cubic_minus_linear(30.0);
    double dt = 0.0;  ///< 0 selects h/2
    SamplingPlan plan;
    std::uint64_t check_seed = 2;  ///< disjoint seed for the sampling error bar
    std::vector<double> betas{0.0, 0.1, 0.25};
    /// Held-out bounded set for the attraction-rate fit.
    int n_probe = 4;
    std::uint64_t probe_seed = 3;
    double sigma_horizon = 20.0;
    double sigma_spacing = 1.0;
    /// Window for the growth exponent of the raw E^-1 trajectory gap.
    double K_horizon = 4.0;
};

/// Fitted decay rate of dist_E(S_0(t) B, cloud0) over t in [0, horizon];
/// samples below 1e3 times the cloud's own resolution are dropped.
struct AttractionFit {
    std::vector<double> t, dist;
    LineFit fit;
    double sigma = 0.0;
};

inline AttractionFit fit_attraction_rate(const WaveSystem& sys0, const StateCloud& cloud0, int n_probe, std::uint64_t seed, double scale,
                                         double horizon, double spacing) {
    const long steps = steps_in(horizon, sys0.dt());
    const long every = steps_in(spacing, sys0.dt());
    if (every == 0 || steps % every != 0) throw std::invalid_argument("attraction fit horizon must be a multiple of its spacing");
    const std::size_t nt = static_cast<std::size_t>(steps / every) + 1;
    std::vector<std::vector<State>> probes(static_cast<std::size_t>(n_probe));
    parallel_for(probes.size(), [&](std::size_t j) {
        Rng rng(mix_seed(seed, j));
        const State xi = smooth_initial_data(sys0.op(), sys0.force(), rng, scale);
        evolve_steps(sys0, xi, steps, every, [&](long, const State& s) { probes[j].push_back(s); });
    });
    AttractionFit out;
    for (std::size_t k = 0; k < nt; ++k) {
        std::vector<State> slice;
        for (const auto& p : probes) slice.push_back(p[k]);
        out.t.push_back(static_cast<double>(k) * spacing);
        out.dist.push_back(hausdorff(StateCloud(std::move(slice), {}), cloud0, NormKind::E()));
    }
    std::vector<double> xs, ys;
    const double floor = 1e-9 * std::max(1.0, out.dist.front());
    for (std::size_t k = 0; k < nt; ++k)
        if (out.dist[k] > floor) {
            xs.push_back(out.t[k]);
            ys.push_back(std::log(out.dist[k]));
        }
    if (xs.size() >= 3) {
        out.fit = fit_line(xs, ys);
        out.sigma = -out.fit.slope;
    }
    return out;
}

/// Growth exponent K of log(|u_eps(t) - u_0(t)|_{E^-1} / gap) over [0, horizon].
inline LineFit fit_gap_growth(const WaveSystem& sys_e, const WaveSystem& sys_0, const State& xi, double horizon, double spacing) {
    const GapSeries gs = trajectory_gap(sys_e, sys_0, xi, horizon, spacing, GapMode::raw);
    std::vector<double> xs, ys;
    for (std::size_t k = 1; k < gs.t.size(); ++k)
        if (gs.gap_Eminus1[k] > 0.0) {
            xs.push_back(gs.t[k]);
            ys.push_back(std::log(gs.gap_Eminus1[k]));
        }
    if (xs.size() < 3) return {};
    return fit_line(xs, ys);
}

/// Attractor distances across an epsilon ladder. The homogenised cloud is
/// sampled from S_0 itself; every epsilon uses the same seeds.
inline RateReport attractor_rate_study(const CoefficientField& coeff, std::shared_ptr<const CellSolution> cell, const Grid& grid,
                                       const std::vector<double>& eps_list, const GridFunction& g, const AttractorStudyParams& p) {
    if (eps_list.size() < 3) throw std::invalid_argument("a rate study needs at least three epsilon values");
    for (double e : eps_list) check_resolution(grid, e);
    const double dt = p.dt > 0.0 ? p.dt : 0.5 * grid.h(0);
    auto op0 = std::make_shared<const EllipticOperator>(EllipticOperator::homogenised(cell->a_h, grid, coeff.nu()));
    const WaveSystem sys0(op0, p.gamma, p.f, g, dt);
    const StateCloud cloud0 = sample_attractor(sys0, p.plan);
    SamplingPlan check = p.plan;
    check.seed = p.check_seed;
    const StateCloud cloud0_check = sample_attractor(sys0, check);

    RateReport rep;
    rep.constants["dt"] = dt;
    rep.constants["absorbing_bound_0"] = cloud0.provenance.absorbing_bound;
    const AttractionFit af = fit_attraction_rate(sys0, cloud0, p.n_probe, p.probe_seed, p.plan.scale, p.sigma_horizon, p.sigma_spacing);
    rep.constants["sigma"] = af.sigma;
    rep.constants["sigma_r2"] = af.fit.r2;
    if (af.fit.r2 < RateReport::min_r2) rep.notes.push_back("attraction-rate fit inconclusive (R^2 = " + std::to_string(af.fit.r2) + ")");

    for (double eps : eps_list) {
        auto ope = std::make_shared<const EllipticOperator>(EllipticOperator::oscillating(coeff, eps, grid));
        const WaveSystem syse(ope, p.gamma, p.f, g, dt);
        const StateCloud cloud = sample_attractor(syse, p.plan);
        const StateCloud cloud_check = sample_attractor(syse, check);
        const StateCloud corrected0 = correct_cloud(cloud0, Corrector(cell, eps));
        rep.epsilon.push_back(eps);
        rep.column("gap").push_back(resolvent_gap(*ope, *op0, 1e-8));
        const double d = hausdorff(cloud, cloud0, NormKind::Eminus1());
        const double dc = hausdorff(cloud_check, cloud0_check, NormKind::Eminus1());
        rep.column("dist_Eminus1").push_back(d);
        rep.column("dist_Eminus1_check").push_back(dc);
        rep.column("seed_spread").push_back(std::abs(d - dc) / std::max({d, dc, 1e-300}));
        rep.column("dist_E").push_back(hausdorff(cloud, cloud0, NormKind::E()));
        rep.column("dist_E_corr").push_back(hausdorff(cloud, corrected0, NormKind::E()));
        for (double b : p.betas) {
            char name[32];
            std::snprintf(name, sizeof name, "dist_C%.2f", b);
            rep.column(name).push_back(hausdorff(cloud, cloud0, NormKind::Cbeta(b)));
        }
        rep.constants["absorbing_bound_eps"] = std::max(rep.constants["absorbing_bound_eps"], cloud.provenance.absorbing_bound);
    }

    // Growth of the raw trajectory gap on the finest epsilon.
    {
        const double eps = eps_list.back();
        auto ope = std::make_shared<const EllipticOperator>(EllipticOperator::oscillating(coeff, eps, grid));
        const WaveSystem syse(ope, p.gamma, p.f, g, dt);
        Rng rng(mix_seed(p.probe_seed, 1000));
        const State xi = smooth_initial_data(*op0, g, rng, p.plan.scale);
        const LineFit kf = fit_gap_growth(syse, sys0, xi, p.K_horizon, p.sigma_spacing * 0.25);
        rep.constants["K"] = kf.slope;
        rep.constants["K_r2"] = kf.r2;
    }

    const std::vector<double>& gap = rep.column("gap");
    rep.fit("dist_Eminus1", gap);
    rep.fit("dist_E");
    rep.fit("dist_E_corr");
    const double K = std::max(0.0, rep.constants["K"]);
    const double kappa_pred = af.sigma > 0.0 ? af.sigma / (K + af.sigma) : 0.0;
    rep.constants["kappa_pred"] = kappa_pred;
    rep.constants["kappa_meas"] = rep.fits["dist_Eminus1"].slope;
    rep.constants["kappa_discrepancy"] = rep.fits["dist_Eminus1"].slope - kappa_pred;
    double spread = 0.0;
    for (double s : rep.column("seed_spread")) spread = std::max(spread, s);
    rep.constants["seed_spread_max"] = spread;
    if (spread > 0.25) rep.notes.push_back("seed-stability spread " + std::to_string(spread) + " exceeds 25%");
    return rep;
}

}  // namespace homlab

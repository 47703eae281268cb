#include <cmath>
#include <memory>
#include <numbers>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "homlab/homlab.hpp"

using namespace homlab;
using std::numbers::pi;

namespace {

CoefficientField two_phase() { return CoefficientField::piecewise_1d({0.0, 0.5}, {1.0, 4.0}); }

std::shared_ptr<const CellSolution> two_phase_cell() {
    static auto cs = std::make_shared<const CellSolution>(solve_cell(two_phase(), 256));
    return cs;
}

double two_phase_n(double y) {
    y -= std::floor(y);
    return y < 0.5 ? -0.15 + 0.6 * y : 0.15 - 0.6 * (y - 0.5);
}

// Integral of (c - s) / a(s / eps) over [0, x], exact per phase.
double flux_integral(double x, double c, double eps) {
    double total = 0.0, s0 = 0.0;
    while (s0 < x) {
        const double cell = std::floor(s0 / eps + 1e-12);
        const double half = (cell + 0.5) * eps;
        const bool first = s0 < half - 1e-15;
        const double s1 = std::min(x, first ? half : (cell + 1.0) * eps);
        const double a = first ? 1.0 : 4.0;
        total += (c * (s1 - s0) - 0.5 * (s1 * s1 - s0 * s0)) / a;
        s0 = s1;
    }
    return total;
}

// Dense M^{1/2} (K_e^-1 - K_0^-1) M^{1/2}: its spectral radius is the gap.
double dense_gap(const EllipticOperator& e, const EllipticOperator& z) {
    Eigen::MatrixXd ke(e.stiffness()), k0(z.stiffness());
    Eigen::VectorXd ms = e.mass().cwiseSqrt();
    Eigen::MatrixXd d = ke.inverse() - k0.inverse();
    d = ms.asDiagonal() * d * ms.asDiagonal();
    d = 0.5 * (d + d.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(d);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace

TEST(Assemble, UnitCoefficientIsStandardLaplacian) {
    Grid g = make_grid_1d(1.0, 16, Boundary::dirichlet);
    EllipticOperator op = EllipticOperator::oscillating(CoefficientField::scalar(1, 1.0), 1.0, g);
    const double h = g.h(0);
    Eigen::MatrixXd dense = Eigen::MatrixXd(op.stiffness()) * (1.0 / h);
    for (Eigen::Index i = 0; i < dense.rows(); ++i)
        for (Eigen::Index j = 0; j < dense.cols(); ++j) {
            const double expect = i == j ? 2.0 / (h * h) : (std::abs(i - j) == 1 ? -1.0 / (h * h) : 0.0);
            EXPECT_NEAR(dense(i, j), expect, 1e-9);
        }
}

TEST(Assemble, ConstantCoefficientMatchesHomogenised) {
    CoefficientField c = CoefficientField::constant(2, Matrix2{{2.0, 0.3}, {0.3, 1.0}});
    for (Boundary bc : {Boundary::dirichlet, Boundary::neumann, Boundary::periodic}) {
        Grid g = make_grid_2d(1.0, 1.0, 64, bc);
        for (double eps : {0.5, 0.25}) {
            EllipticOperator ae = EllipticOperator::oscillating(c, eps, g);
            EllipticOperator a0 = EllipticOperator::homogenised(c.constant_matrix(), g);
            EXPECT_TRUE(ae.same_pattern(a0));
            EXPECT_EQ((Eigen::MatrixXd(ae.stiffness()) - Eigen::MatrixXd(a0.stiffness())).cwiseAbs().maxCoeff(), 0.0);
        }
    }
}

TEST(Assemble, SharedSparsityPattern) {
    Grid g = make_grid_2d(1.0, 1.0, 32, Boundary::dirichlet);
    CoefficientField lam = CoefficientField::laminate({0.0, 0.5}, {1.0, 4.0}, {1.0, 4.0});
    EXPECT_TRUE(EllipticOperator::oscillating(lam, 0.5, g).same_pattern(EllipticOperator::homogenised(Matrix2{{1.6, 0}, {0, 2.5}}, g)));
}

TEST(Assemble, UnderResolvedEpsilonNamesMinimalN) {
    Grid g = make_grid_1d(1.0, 64, Boundary::dirichlet);
    try {
        EllipticOperator::oscillating(two_phase(), 1.0 / 8, g);
        FAIL() << "expected ResolutionError";
    } catch (const ResolutionError& e) {
        EXPECT_EQ(e.suggested_n(), 128);
        EXPECT_NE(std::string(e.what()).find("128"), std::string::npos);
    }
}

TEST(Assemble, SmallestEigenvalueWithinRayleighBounds) {
    // Inverse iteration at n = 2048, cross-checked against a dense solve at n = 256.
    auto lowest = [](int n) {
        Grid g = make_grid_1d(1.0, n, Boundary::dirichlet);
        EllipticOperator op = EllipticOperator::oscillating(two_phase(), 1.0 / 8, g);
        GridFunction x = sample(g, [](double s) { return std::sin(pi * s); });
        double lam = 0.0;
        for (int it = 0; it < 200; ++it) {
            GridFunction y = op.solve(x);
            const double ny = norm(y, NormKind::L2());
            lam = norm(x, NormKind::L2()) / ny;
            x = (1.0 / ny) * y;
        }
        return lam;
    };
    Grid g = make_grid_1d(1.0, 256, Boundary::dirichlet);
    EllipticOperator op = EllipticOperator::oscillating(two_phase(), 1.0 / 8, g);
    Eigen::VectorXd ms = op.mass().cwiseSqrt().cwiseInverse();
    Eigen::MatrixXd a = ms.asDiagonal() * Eigen::MatrixXd(op.stiffness()) * ms.asDiagonal();
    const double dense = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(a).eigenvalues().minCoeff();
    const double fine = lowest(2048);
    const double nu = two_phase().nu();
    EXPECT_GE(fine, nu * pi * pi);
    EXPECT_LE(fine, pi * pi / nu * 1.1);
    EXPECT_NEAR(lowest(256), dense, 1e-8 * dense);
    EXPECT_NEAR(fine, dense, 1e-2 * dense);
}

TEST(ApplyInverse, ZeroRhs) {
    Grid g = make_grid_1d(1.0, 128, Boundary::dirichlet);
    EllipticOperator op = EllipticOperator::oscillating(two_phase(), 1.0 / 8, g);
    EXPECT_EQ(op.solve(GridFunction(g)).values.cwiseAbs().maxCoeff(), 0.0);
}

TEST(ApplyInverse, SineEigenpair) {
    Grid g = make_grid_1d(1.0, 128, Boundary::dirichlet);
    EllipticOperator op = EllipticOperator::reference(g);
    GridFunction s = sample(g, [](double x) { return std::sin(pi * x); });
    GridFunction u = op.solve(pi * pi * s);
    EXPECT_LT((u - s).values.cwiseAbs().maxCoeff(), 1e-3);
}

TEST(ApplyInverse, TwoPhaseClosedForm) {
    const double eps = 1.0 / 8;
    Grid g = make_grid_1d(1.0, 512, Boundary::dirichlet);
    EllipticOperator op = EllipticOperator::oscillating(two_phase(), eps, g);
    GridFunction one = sample(g, [](double) { return 1.0; });
    GridFunction u = op.solve(one);
    // a u' = c - x with c fixed by u(1) = 0.
    const double i0 = flux_integral(1.0, 0.0, eps);
    const double i1 = flux_integral(1.0, 1.0, eps) - i0;
    const double c = -i0 / i1;
    for (std::size_t k = 0; k < u.size(); ++k)
        EXPECT_NEAR(u[k], flux_integral(g.coord(0, static_cast<int>(k)), c, eps), 1e-6);
}

TEST(ResolventGap, IdenticalOperatorsGiveZero) {
    Grid g = make_grid_1d(1.0, 64, Boundary::dirichlet);
    CoefficientField c = CoefficientField::scalar(1, 1.6);
    EllipticOperator ae = EllipticOperator::oscillating(c, 0.25, g);
    EllipticOperator a0 = EllipticOperator::homogenised(c.constant_matrix(), g);
    EXPECT_LE(resolvent_gap(ae, a0), 1e-12);
}

TEST(ResolventGap, MatchesDenseSpectrum) {
    for (Boundary bc : {Boundary::dirichlet, Boundary::periodic}) {
        Grid g = make_grid_1d(1.0, 64, bc);
        EllipticOperator ae = EllipticOperator::oscillating(two_phase(), 0.25, g);
        EllipticOperator a0 = EllipticOperator::homogenised(two_phase_cell()->a_h, g);
        EXPECT_NEAR(resolvent_gap(ae, a0, 1e-13), dense_gap(ae, a0), 1e-8);
    }
}

TEST(ResolventGap, FirstOrderScaling) {
    Grid g = make_grid_1d(1.0, 1024, Boundary::dirichlet);
    EllipticOperator a0 = EllipticOperator::homogenised(two_phase_cell()->a_h, g);
    std::vector<double> gaps;
    for (double eps : {1.0 / 8, 1.0 / 16, 1.0 / 32, 1.0 / 64})
        gaps.push_back(resolvent_gap(EllipticOperator::oscillating(two_phase(), eps, g), a0, 1e-8));
    for (std::size_t k = 0; k + 1 < gaps.size(); ++k) {
        EXPECT_GE(gaps[k] / gaps[k + 1], 1.6);
        EXPECT_LE(gaps[k] / gaps[k + 1], 2.4);
    }
}

TEST(ResolventGapProperty, DifferenceIsSelfAdjoint) {
    Rng rng(21);
    Grid g = make_grid_1d(1.0, 256, Boundary::neumann);
    EllipticOperator ae = EllipticOperator::oscillating(two_phase(), 1.0 / 16, g);
    EllipticOperator a0 = EllipticOperator::homogenised(two_phase_cell()->a_h, g);
    auto d = [&](const GridFunction& x) { return ae.solve(x) - a0.solve(x); };
    auto ip = [&](const GridFunction& a, const GridFunction& b) { return ae.mass().dot(a.values.cwiseProduct(b.values)); };
    for (int trial = 0; trial < 10; ++trial) {
        GridFunction phi(g), psi(g);
        for (std::size_t k = 0; k < g.size(); ++k) {
            phi[k] = rng.uniform(-1, 1);
            psi[k] = rng.uniform(-1, 1);
        }
        EXPECT_LE(std::abs(ip(d(phi), psi) - ip(phi, d(psi))), 1e-8 * norm(phi, NormKind::L2()) * norm(psi, NormKind::L2()));
    }
}

TEST(Corrector, ConstantCoefficientIsIdentity) {
    auto cs = std::make_shared<const CellSolution>(solve_cell(CoefficientField::scalar(1, 2.0), 16));
    Grid g = make_grid_1d(1.0, 64, Boundary::periodic);
    GridFunction u = sample(g, [](double x) { return std::sin(2 * pi * x); });
    EXPECT_EQ((corrector_apply(Corrector(cs, 0.1), u) - u).values.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Corrector, ConstantFieldUnchanged) {
    Grid g = make_grid_1d(1.0, 256, Boundary::periodic);
    GridFunction c = sample(g, [](double) { return 2.5; });
    GridFunction t = corrector_apply(Corrector(two_phase_cell(), 1.0 / 8), c);
    EXPECT_LE((t - c).values.cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Corrector, TwoPhaseClosedForm) {
    const double eps = 1.0 / 8;
    Grid g = make_grid_1d(1.0, 2048, Boundary::dirichlet);
    GridFunction u0 = sample(g, [](double x) { return x * (1 - x); });
    GridFunction t = corrector_apply(Corrector(two_phase_cell(), eps), u0);
    ASSERT_EQ(t.grid.bc, Boundary::closed);
    for (std::size_t k = 0; k < t.size(); ++k) {
        const double x = t.grid.coord(0, static_cast<int>(k));
        EXPECT_NEAR(t[k], x * (1 - x) + eps * two_phase_n(x / eps) * (1 - 2 * x), 1e-3);
    }
}

TEST(CorrectorProperty, Linearity) {
    Rng rng(22);
    Grid g = make_grid_1d(1.0, 512, Boundary::dirichlet);
    Corrector corr(two_phase_cell(), 1.0 / 16);
    for (int trial = 0; trial < 10; ++trial) {
        GridFunction u = smooth_random_field(g, rng), w = smooth_random_field(g, rng);
        const double a = rng.uniform(-2, 2), b = rng.uniform(-2, 2);
        GridFunction lhs = corrector_apply(corr, a * u + b * w);
        GridFunction rhs = a * corrector_apply(corr, u) + b * corrector_apply(corr, w);
        EXPECT_LE((lhs - rhs).values.cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(CorrectorProperty, MultiplierBoundConstantStable) {
    // |grad T w| <= C (|grad w| + eps |L w|), C fitted per eps.
    Grid g = make_grid_1d(1.0, 1024, Boundary::dirichlet);
    EllipticOperator lap = EllipticOperator::reference(g);
    std::vector<double> cs;
    for (double eps : {1.0 / 8, 1.0 / 16, 1.0 / 32, 1.0 / 64}) {
        Rng rng(23);
        Corrector corr(two_phase_cell(), eps);
        double c = 0.0;
        for (int trial = 0; trial < 10; ++trial) {
            GridFunction w = smooth_random_field(g, rng);
            const double lhs = norm(corrector_apply(corr, w), NormKind::H1());
            const double rhs = norm(w, NormKind::H1()) + eps * norm(lap.apply(w), NormKind::L2());
            c = std::max(c, lhs / rhs);
        }
        cs.push_back(c);
    }
    const double mean = (cs[0] + cs[1] + cs[2] + cs[3]) / 4;
    for (double c : cs) EXPECT_NEAR(c, mean, 0.2 * mean);
}

TEST(Prepare, ConstantCoefficientIsIdentity) {
    Rng rng(24);
    Grid g = make_grid_1d(1.0, 128, Boundary::neumann);
    CoefficientField c = CoefficientField::scalar(1, 1.3);
    EllipticOperator ae = EllipticOperator::oscillating(c, 0.25, g);
    EllipticOperator a0 = EllipticOperator::homogenised(c.constant_matrix(), g);
    State xi(smooth_random_field(g, rng), smooth_random_field(g, rng));
    State p = prepare_initial(ae, a0, xi);
    EXPECT_LE((p.u - xi.u).values.cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LE((p.v - xi.v).values.cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Prepare, LemmaBoundAndE2Preservation) {
    Rng rng(25);
    for (Boundary bc : {Boundary::dirichlet, Boundary::neumann, Boundary::periodic}) {
        Grid g = make_grid_1d(1.0, 512, bc);
        EllipticOperator ae = EllipticOperator::oscillating(two_phase(), 1.0 / 16, g);
        EllipticOperator a0 = EllipticOperator::homogenised(two_phase_cell()->a_h, g, two_phase().nu());
        const double gap = resolvent_gap(ae, a0, 1e-10);
        GridFunction force = smooth_random_field(g, rng);
        for (int trial = 0; trial < 10; ++trial) {
            State xi = smooth_initial_data(ae, force, rng);
            State p = prepare_initial(ae, a0, xi);
            const double diff = std::hypot(norm(p.u - xi.u, NormKind::L2()), norm(p.v - xi.v, NormKind::L2()));
            const double e2e = norm(xi, NormKind::E2(), {nullptr, &ae, &force});
            const double e20 = norm(p, NormKind::E2(), {nullptr, &a0, &force});
            EXPECT_LE(diff, gap * e2e * (1 + 1e-9));
            EXPECT_NEAR(e20, e2e, 1e-8 * e2e);
        }
    }
}

TEST(PrepareProperty, Bijection) {
    Rng rng(26);
    Grid g = make_grid_2d(1.0, 1.0, 32, Boundary::dirichlet);
    CoefficientField lam = CoefficientField::laminate({0.0, 0.5}, {1.0, 4.0}, {1.0, 4.0});
    auto cs = solve_cell(lam, 32);
    EllipticOperator ae = EllipticOperator::oscillating(lam, 0.5, g);
    EllipticOperator a0 = EllipticOperator::homogenised(cs.a_h, g);
    for (int trial = 0; trial < 5; ++trial) {
        State xi(smooth_random_field(g, rng), smooth_random_field(g, rng));
        State back = prepare_initial(ae, a0, unprepare_initial(ae, a0, xi));
        EXPECT_LE((back.u - xi.u).values.cwiseAbs().maxCoeff(), 1e-9);
        EXPECT_LE((back.v - xi.v).values.cwiseAbs().maxCoeff(), 1e-9);
    }
}

TEST(EllipticRate, SmallDirichletLadder) {
    Grid g = make_grid_1d(1.0, 1024, Boundary::dirichlet);
    GridFunction f = sample(g, [](double) { return 1.0; });
    RateReport rep = elliptic_rate_study(two_phase(), two_phase_cell(), g, {1.0 / 8, 1.0 / 16, 1.0 / 32, 1.0 / 64}, f);
    EXPECT_NEAR(rep.fits.at("err_L2").slope, 1.0, 0.2);
    EXPECT_NEAR(rep.fits.at("gap").slope, 1.0, 0.25);
    for (std::size_t k = 0; k < rep.epsilon.size(); ++k) EXPECT_LT(rep.column("err_H1corr")[k], rep.column("err_H1")[k]);
}

TEST(EllipticRate, RejectsUnresolvedLadder) {
    Grid g = make_grid_1d(1.0, 256, Boundary::dirichlet);
    GridFunction f = sample(g, [](double) { return 1.0; });
    EXPECT_THROW(elliptic_rate_study(two_phase(), two_phase_cell(), g, {1.0 / 8, 1.0 / 16, 1.0 / 32}, f), ResolutionError);
}

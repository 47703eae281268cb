#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "homlab/homlab.hpp"

using namespace homlab;
using std::numbers::pi;

TEST(MakeGrid, DirichletExcludesEndpoints) {
    Grid g = make_grid_1d(1.0, 8, Boundary::dirichlet);
    EXPECT_EQ(g.size(), 7u);
    EXPECT_DOUBLE_EQ(g.h(0), 1.0 / 8);
    EXPECT_DOUBLE_EQ(g.coord(0, 0), 1.0 / 8);
}

TEST(MakeGrid, PeriodicIdentifiesFaces) {
    Grid g = make_grid_1d(1.0, 8, Boundary::periodic);
    EXPECT_EQ(g.size(), 8u);
    EXPECT_DOUBLE_EQ(g.h(0), 1.0 / 8);
}

TEST(MakeGrid, NeumannKeepsBoundaryNodes) {
    Grid g = make_grid_2d(1.0, 1.0, 16, Boundary::neumann);
    EXPECT_EQ(g.size(), 289u);
}

TEST(MakeGrid, RejectsBadInput) {
    EXPECT_THROW(make_grid_1d(1.0, 3, Boundary::dirichlet), std::invalid_argument);
    EXPECT_THROW(make_grid_1d(0.0, 8, Boundary::dirichlet), std::invalid_argument);
    EXPECT_THROW(make_grid_1d(-1.0, 8, Boundary::periodic), std::invalid_argument);
    EXPECT_THROW(GridFunction(make_grid_1d(1.0, 8, Boundary::periodic), Vector::Zero(3)), std::invalid_argument);
}

TEST(Norm, ZeroFunctionHasZeroNorm) {
    for (Boundary bc : {Boundary::dirichlet, Boundary::neumann, Boundary::periodic}) {
        Grid g = make_grid_1d(1.0, 16, bc);
        EllipticOperator ref = EllipticOperator::reference(g);
        GridFunction z(g);
        EXPECT_EQ(norm(z, NormKind::L2()), 0.0);
        EXPECT_EQ(norm(z, NormKind::H1()), 0.0);
        EXPECT_EQ(norm(z, NormKind::Hminus1(), &ref), 0.0);
        EXPECT_EQ(norm(z, NormKind::Cbeta(0.25)), 0.0);
        State s = State::zero(g);
        EXPECT_EQ(norm(s, NormKind::E()), 0.0);
        EXPECT_EQ(norm(s, NormKind::Eminus1(), {&ref}), 0.0);
    }
}

TEST(Norm, SineL2AndH1) {
    Grid g = make_grid_1d(1.0, 256, Boundary::dirichlet);
    GridFunction u = sample(g, [](double x) { return std::sin(pi * x); });
    EXPECT_NEAR(norm(u, NormKind::L2()), 1.0 / std::sqrt(2.0), 1e-3);
    EXPECT_NEAR(norm(u, NormKind::H1()), pi / std::sqrt(2.0), 1e-2);
}

TEST(Norm, RequiresReferenceForDualNorms) {
    Grid g = make_grid_1d(1.0, 16, Boundary::dirichlet);
    GridFunction u(g);
    EXPECT_THROW(norm(u, NormKind::Hminus1()), std::invalid_argument);
    EXPECT_THROW(norm(State::zero(g), NormKind::Eminus1()), std::invalid_argument);
    EXPECT_THROW(NormKind::Cbeta(1.0), std::invalid_argument);
    EXPECT_THROW(NormKind::Cbeta(-0.1), std::invalid_argument);
    EXPECT_THROW(norm(u, NormKind::E()), std::invalid_argument);
    EXPECT_THROW(norm(State::zero(g), NormKind::L2()), std::invalid_argument);
}

TEST(Norm, MismatchedGridsRejected) {
    Grid a = make_grid_1d(1.0, 16, Boundary::dirichlet);
    Grid b = make_grid_1d(1.0, 32, Boundary::dirichlet);
    EllipticOperator ref = EllipticOperator::reference(a);
    EXPECT_THROW(norm(GridFunction(b), NormKind::Hminus1(), &ref), std::invalid_argument);
    EXPECT_THROW(GridFunction(a) - GridFunction(b), std::invalid_argument);
}

TEST(NormProperty, DefinitenessAndHomogeneity) {
    Rng rng(11);
    for (Boundary bc : {Boundary::dirichlet, Boundary::neumann, Boundary::periodic}) {
        Grid g = make_grid_2d(1.0, 1.0, 8, bc);
        EllipticOperator ref = EllipticOperator::reference(g);
        for (int trial = 0; trial < 20; ++trial) {
            GridFunction u(g);
            for (std::size_t k = 0; k < u.size(); ++k) u[k] = rng.uniform(-1.0, 1.0);
            const double c = rng.uniform(-3.0, 3.0);
            EXPECT_GT(norm(u, NormKind::L2()), 0.0);
            for (NormKind kind : {NormKind::L2(), NormKind::H1(), NormKind::Hminus1(), NormKind::Cbeta(0.1)}) {
                const double a = norm(u, kind, &ref), b = norm(c * u, kind, &ref);
                EXPECT_NEAR(b, std::abs(c) * a, 1e-12 * (1.0 + b));
            }
        }
    }
}

TEST(NormProperty, DualNormEquivalence) {
    // nu |phi|^2_{-1,L} <= (phi, A0^-1 phi) <= nu^-1 |phi|^2_{-1,L}
    Rng rng(12);
    CoefficientField coeff = CoefficientField::laminate({0.0, 0.5}, {1.0, 4.0}, {1.0, 4.0});
    auto cell = solve_cell(coeff, 64);
    for (Boundary bc : {Boundary::dirichlet, Boundary::neumann, Boundary::periodic}) {
        Grid g = make_grid_2d(1.0, 1.0, 16, bc);
        EllipticOperator ref = EllipticOperator::reference(g);
        EllipticOperator a0 = EllipticOperator::homogenised(cell.a_h, g, coeff.nu());
        for (int trial = 0; trial < 20; ++trial) {
            GridFunction phi(g);
            for (std::size_t k = 0; k < phi.size(); ++k) phi[k] = rng.uniform(-1.0, 1.0);
            const double l = hminus1_squared(phi, ref);
            const double a = hminus1_squared(phi, a0);
            EXPECT_LE(coeff.nu() * l, a * (1.0 + 1e-12));
            EXPECT_LE(a, l / coeff.nu() * (1.0 + 1e-12));
        }
    }
}

TEST(Holder, AllPairsMatchBruteForce) {
    Grid g = make_grid_1d(1.0, 32, Boundary::dirichlet);
    GridFunction u = sample(g, [](double x) { return std::sqrt(x); });
    double semi = 0.0;
    for (std::size_t a = 0; a < u.size(); ++a)
        for (std::size_t b = 0; b < u.size(); ++b)
            if (a != b) {
                const double d = std::abs(g.coord(0, static_cast<int>(a)) - g.coord(0, static_cast<int>(b)));
                semi = std::max(semi, std::abs(u[a] - u[b]) / std::pow(d, 0.25));
            }
    EXPECT_NEAR(norm(u, NormKind::Cbeta(0.25)), u.values.cwiseAbs().maxCoeff() + semi, 1e-14);
}

TEST(Holder, SampledPairsAreDeterministic) {
    Grid g = make_grid_2d(1.0, 1.0, 32, Boundary::dirichlet);
    GridFunction u = sample(g, [](double x, double y) { return std::sin(pi * x) * std::sin(pi * y); });
    ASSERT_GT(u.size(), 512u);
    const double a = norm(u, NormKind::Cbeta(0.1));
    EXPECT_EQ(a, norm(u, NormKind::Cbeta(0.1)));
    EXPECT_GE(a, 1.0 - 1e-12);
}

TEST(SolveSpd, IdentityReturnsRhs) {
    SparseMatrix id(5, 5);
    id.setIdentity();
    Vector b(5);
    b << 1, -2, 3, 0.5, 4;
    CgResult r = solve_spd(id, b);
    EXPECT_LT((r.x - b).norm(), 1e-14);
}

TEST(SolveSpd, LaplacianEigenpair) {
    Grid g = make_grid_1d(1.0, 128, Boundary::dirichlet);
    EllipticOperator l = EllipticOperator::reference(g);
    GridFunction s = sample(g, [](double x) { return std::sin(pi * x); });
    Vector b = l.mass().cwiseProduct(pi * pi * s.values);
    CgResult r = solve_spd(l.stiffness(), b, 1e-10);
    EXPECT_LT((r.x - s.values).cwiseAbs().maxCoeff(), 1e-3);
    EXPECT_LE(r.residual, 1e-10);
    EXPECT_LE((l.stiffness() * r.x - b).norm(), 10 * 1e-10 * b.norm());
}

TEST(SolveSpd, SingularInputRejected) {
    SparseMatrix a(3, 3);
    a.insert(0, 0) = 1.0;
    a.insert(2, 2) = 1.0;
    EXPECT_THROW(solve_spd(a, Vector::Ones(3)), std::invalid_argument);
    EXPECT_THROW(SpdFactorization{a}, std::invalid_argument);
}

TEST(SolveSpd, NonConvergenceReportsIterations) {
    Grid g = make_grid_1d(1.0, 256, Boundary::dirichlet);
    EllipticOperator l = EllipticOperator::reference(g);
    try {
        solve_spd(l.stiffness(), Vector::Ones(static_cast<Eigen::Index>(g.size())), 1e-12, 5);
        FAIL() << "expected SolverError";
    } catch (const SolverError& e) {
        EXPECT_EQ(e.iterations(), 5);
    }
}

TEST(SolveSpdProperty, ResidualRecoversRhs) {
    Rng rng(13);
    Grid g = make_grid_2d(1.0, 1.0, 16, Boundary::neumann);
    EllipticOperator l = EllipticOperator::reference(g);
    for (int trial = 0; trial < 10; ++trial) {
        Vector b(static_cast<Eigen::Index>(g.size()));
        for (Eigen::Index k = 0; k < b.size(); ++k) b[k] = rng.uniform(-1.0, 1.0);
        const double tol = 1e-10;
        CgResult r = solve_spd(l.stiffness(), b, tol);
        EXPECT_LE((l.stiffness() * r.x - b).norm(), 10 * tol * b.norm());
    }
}

TEST(Gradient, ConstantHasZeroGradient) {
    for (Boundary bc : {Boundary::neumann, Boundary::periodic, Boundary::closed}) {
        Grid g = make_grid_2d(1.0, 2.0, 8, bc);
        GridFunction c = sample(g, [](double, double) { return 3.5; });
        for (const auto& d : gradient(c)) EXPECT_LT(d.values.cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(Gradient, LinearExactOnDirichletInterior) {
    Grid g = make_grid_1d(1.0, 32, Boundary::dirichlet);
    GridFunction u = sample(g, [](double x) { return x; });
    auto d = gradient(u);
    for (std::size_t k = 0; k < u.size(); ++k) EXPECT_NEAR(d[0][k], 1.0, 1e-12);
}

TEST(Gradient, LinearWrapsOnPeriodic) {
    // x is not periodic: the wrap produces a jump of -1/(2h) at both ends.
    Grid g = make_grid_1d(1.0, 32, Boundary::periodic);
    GridFunction u = sample(g, [](double x) { return x; });
    auto d = gradient(u);
    EXPECT_NEAR(d[0][5], 1.0, 1e-12);
    EXPECT_LT(d[0][0], 0.0);
    EXPECT_LT(d[0][31], 0.0);
}

TEST(Gradient, PeriodicSine) {
    Grid g = make_grid_1d(1.0, 256, Boundary::periodic);
    GridFunction u = sample(g, [](double x) { return std::sin(2 * pi * x); });
    auto d = gradient(u);
    for (std::size_t k = 0; k < u.size(); ++k) EXPECT_NEAR(d[0][k], 2 * pi * std::cos(2 * pi * g.coord(0, static_cast<int>(k))), 1e-2);
}

TEST(Gradient, SecondOrderAtBoundary) {
    Grid g = make_grid_1d(1.0, 64, Boundary::closed);
    GridFunction u = sample(g, [](double x) { return x * x; });
    auto d = gradient(u);
    EXPECT_NEAR(d[0][0], 0.0, 1e-12);
    EXPECT_NEAR(d[0][64], 2.0, 1e-12);
}

TEST(Fit, ExactPowerLaws) {
    std::vector<double> x{1, 2, 4, 8};
    std::vector<double> y1 = x, y2;
    for (double v : x) y2.push_back(3 * std::sqrt(v));
    LineFit a = fit_rate(x, y1);
    EXPECT_NEAR(a.slope, 1.0, 1e-14);
    EXPECT_NEAR(a.r2, 1.0, 1e-14);
    LineFit b = fit_rate(x, y2);
    EXPECT_NEAR(b.slope, 0.5, 1e-14);
    EXPECT_NEAR(b.intercept, std::log(3.0), 1e-13);
    EXPECT_NEAR(b.r2, 1.0, 1e-14);
}

TEST(Fit, NoisySlopeTwo) {
    Rng rng(14);
    std::vector<double> x, y;
    for (int k = 0; k < 20; ++k) {
        double xv = std::pow(2.0, -k / 3.0);
        // 1% multiplicative noise by Box-Muller.
        double z = std::sqrt(-2 * std::log(1 - rng.uniform())) * std::cos(2 * pi * rng.uniform());
        x.push_back(xv);
        y.push_back(xv * xv * (1 + 0.01 * z));
    }
    LineFit f = fit_rate(x, y);
    EXPECT_GE(f.slope, 1.9);
    EXPECT_LE(f.slope, 2.1);
}

TEST(Fit, RejectsBadInput) {
    std::vector<double> two{1, 2}, three{1, 2, 3}, bad{1, 0, 3};
    EXPECT_THROW(fit_rate(two, two), std::invalid_argument);
    EXPECT_THROW(fit_rate(three, bad), std::invalid_argument);
}

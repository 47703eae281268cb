#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "homlab/homlab.hpp"

using namespace homlab;

namespace {

CoefficientField two_phase() { return CoefficientField::piecewise_1d({0.0, 0.5}, {1.0, 4.0}); }

// Zero-mean periodic N with N' = a_h / a - 1 for the (1,4) two-phase medium.
double two_phase_n(double y) {
    y -= std::floor(y);
    return y < 0.5 ? -0.15 + 0.6 * y : 0.15 - 0.6 * (y - 0.5);
}

}  // namespace

TEST(SolveCell, ConstantCoefficientHasTrivialCorrectors) {
    for (int dim : {1, 2}) {
        CellSolution cs = solve_cell(CoefficientField::scalar(dim, 2.0), 16);
        for (const auto& n : cs.N) EXPECT_EQ(n.values.cwiseAbs().maxCoeff(), 0.0);
        EXPECT_EQ(cs.a_h(0, 0), 2.0);
        if (dim == 2) {
            EXPECT_EQ(cs.a_h(1, 1), 2.0);
            EXPECT_EQ(cs.a_h(0, 1), 0.0);
        }
    }
}

TEST(SolveCell, AnisotropicConstantMatrixReproduced) {
    Matrix2 a{{2.0, 0.5}, {0.5, 1.0}};
    CellSolution cs = solve_cell(CoefficientField::constant(2, a), 16);
    EXPECT_LE((cs.a_h - a).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(SolveCell, TwoPhaseHarmonicMean) {
    CellSolution cs = solve_cell(two_phase(), 1024);
    EXPECT_NEAR(cs.a_h(0, 0), harmonic_mean_oracle_1d(two_phase()), 1e-6);
    EXPECT_NEAR(cs.a_h(0, 0), 1.6, 1e-6);
}

TEST(SolveCell, LaminateOracle) {
    CoefficientField lam = CoefficientField::laminate({0.0, 0.5}, {1.0, 4.0}, {1.0, 4.0});
    CellSolution cs = solve_cell(lam, 64);
    EXPECT_NEAR(cs.a_h(0, 0), 1.6, 1e-3);
    EXPECT_NEAR(cs.a_h(1, 1), 2.5, 1e-3);
    EXPECT_NEAR(cs.a_h(0, 1), 0.0, 1e-3);
}

TEST(SolveCell, RejectsCoarseCellGrid) { EXPECT_THROW(solve_cell(two_phase(), 4), std::invalid_argument); }

TEST(Coefficient, EllipticityViolationRejected) {
    EXPECT_THROW(two_phase().check_ellipticity(0.5), std::invalid_argument);
    EXPECT_NO_THROW(two_phase().check_ellipticity(0.25));
    EXPECT_THROW(CoefficientField::piecewise_1d({0.0, 0.5}, {1.0, -1.0}), std::invalid_argument);
    EXPECT_THROW(CoefficientField::constant(2, Matrix2{{1.0, 0.3}, {0.0, 1.0}}), std::invalid_argument);
}

TEST(Coefficient, PeriodicEvaluation) {
    CoefficientField c = CoefficientField::trigonometric(2, 2.0, {FourierMode{0.5, {1, 2}, 0.3}});
    for (double y1 : {0.1, 0.7})
        for (double y2 : {0.2, 0.9}) {
            EXPECT_NEAR(c(y1 + 1, y2)(0, 0), c(y1, y2)(0, 0), 1e-12);
            EXPECT_NEAR(c(y1, y2 - 3)(0, 0), c(y1, y2)(0, 0), 1e-12);
            EXPECT_EQ(c(y1, y2)(0, 1), c(y1, y2)(1, 0));
        }
}

TEST(Coefficient, BreakpointsSnapToCellFaces) {
    CoefficientField c = CoefficientField::piecewise_1d({0.0, 0.3}, {1.0, 4.0});
    CoefficientField s = c.snapped(8);
    EXPECT_DOUBLE_EQ(s.breakpoints()[1], 0.25);
    EXPECT_NEAR(s.snap_displacement(), 0.05, 1e-15);
    CellSolution cs = solve_cell(c, 8);
    EXPECT_NEAR(cs.snap_displacement, 0.05, 1e-15);
    EXPECT_NEAR(cs.a_h(0, 0), 1.0 / (0.25 + 0.75 / 4.0), 1e-10);
}

TEST(HarmonicMeanOracle, Closed) {
    EXPECT_NEAR(harmonic_mean_oracle_1d(CoefficientField::scalar(1, 3.0)), 3.0, 1e-14);
    EXPECT_NEAR(harmonic_mean_oracle_1d(two_phase()), 1.6, 1e-14);
    CoefficientField s = CoefficientField::trigonometric(1, 2.0, {FourierMode{1.0, {1, 0}, 0.0}});
    EXPECT_NEAR(harmonic_mean_oracle_1d(s), std::sqrt(3.0), 1e-8);
}

TEST(EvalCellAt, ConstantCoefficientGivesZero) {
    auto cs = solve_cell(CoefficientField::scalar(2, 1.5), 8);
    EXPECT_EQ(eval_cell_at(cs, 0, {0.3, 0.4}, 0.1), 0.0);
    EXPECT_EQ(eval_cell_at(cs, 1, {0.7, 0.2}, 0.05), 0.0);
}

TEST(EvalCellAt, NodeValuesReproduced) {
    CoefficientField c = CoefficientField::trigonometric(2, 2.0, {FourierMode{0.7, {1, 1}, 0.0}});
    auto cs = solve_cell(c, 16);
    for (int i = 0; i < 16; i += 3)
        for (int j = 0; j < 16; j += 5) {
            std::array<double, 2> x{i / 16.0, j / 16.0};
            EXPECT_EQ(eval_cell_at(cs, 0, x, 1.0), cs.N[0][cs.cell_grid.index(i, j)]);
            EXPECT_EQ(eval_cell_at(cs, 1, x, 1.0), cs.N[1][cs.cell_grid.index(i, j)]);
        }
}

TEST(EvalCellAt, TwoPhaseClosedForm) {
    auto cs = solve_cell(two_phase(), 256);
    const double eps = 1.0 / 8;
    for (double x : {eps / 4, 0.3 * eps, 0.7 * eps, 3.55 * eps})
        EXPECT_NEAR(eval_cell_at(cs, 0, {x, 0.0}, eps), two_phase_n(x / eps), 1e-4);
    EXPECT_THROW(eval_cell_at(cs, 0, {0.1, 0.0}, 0.0), std::invalid_argument);
}

TEST(CellProperty, ZeroMeanSymmetryAndSpectralBounds) {
    std::vector<CoefficientField> fields{
        two_phase(),
        CoefficientField::piecewise_1d({0.0, 0.25, 0.625}, {2.0, 0.5, 3.0}),
        CoefficientField::laminate({0.0, 0.5}, {1.0, 4.0}, {2.0, 3.0}),
        CoefficientField::trigonometric(2, 2.0, {FourierMode{0.5, {1, 0}, 0.0}, FourierMode{0.4, {1, 1}, 1.0}}),
        CoefficientField::trigonometric(1, 1.5, {FourierMode{0.5, {2, 0}, 0.2}}),
    };
    for (const auto& c : fields) {
        CellSolution cs = solve_cell(c, 32);
        for (const auto& n : cs.N) EXPECT_LE(std::abs(mean_value(n)), 1e-12);
        EXPECT_LE(std::abs(cs.a_h(0, 1) - cs.a_h(1, 0)), 1e-12);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(cs.a_h.topLeftCorner(c.dim(), c.dim())));
        EXPECT_GE(es.eigenvalues().minCoeff(), c.nu() * (1 - 1e-12));
        EXPECT_LE(es.eigenvalues().maxCoeff(), 1.0 / c.nu() * (1 + 1e-12));
    }
}

TEST(CellProperty, MeshRefinementConsistency) {
    std::vector<CoefficientField> fields{
        two_phase(),
        CoefficientField::laminate({0.0, 0.5}, {1.0, 4.0}, {1.0, 4.0}),
        CoefficientField::trigonometric(1, 2.0, {FourierMode{1.0, {1, 0}, 0.0}}),
        CoefficientField::trigonometric(2, 2.0, {FourierMode{0.6, {1, 1}, 0.0}}),
    };
    for (const auto& c : fields) {
        const Matrix2 a8 = solve_cell(c, 8).a_h, a16 = solve_cell(c, 16).a_h, a32 = solve_cell(c, 32).a_h;
        const double d1 = (a8 - a16).cwiseAbs().maxCoeff(), d2 = (a16 - a32).cwiseAbs().maxCoeff();
        EXPECT_TRUE(d2 <= 0.5 * d1 || (d1 <= 1e-12 && d2 <= 1e-12)) << d1 << " " << d2;
    }
}

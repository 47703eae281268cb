#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace homlab {

using Matrix2 = Eigen::Matrix2d;

enum class CoefficientKind { constant, piecewise_constant_1d, laminate_2d, trigonometric };

inline const char* to_string(CoefficientKind k) {
    switch (k) {
    case CoefficientKind::constant: return "constant";
    case CoefficientKind::piecewise_constant_1d: return "piecewise_constant_1d";
    case CoefficientKind::laminate_2d: return "laminate_2d";
    case CoefficientKind::trigonometric: return "trigonometric";
    }
    return "?";
}

inline CoefficientKind parse_coefficient_kind(const std::string& s) {
    if (s == "constant") return CoefficientKind::constant;
    if (s == "piecewise_constant_1d") return CoefficientKind::piecewise_constant_1d;
    if (s == "laminate_2d") return CoefficientKind::laminate_2d;
    if (s == "trigonometric") return CoefficientKind::trigonometric;
    throw std::invalid_argument("unknown coefficient kind '" + s + "'");
}

/// One Fourier term amplitude * sin(2 pi (k . y) + phase).
struct FourierMode {
    double amplitude = 0.0;
    std::array<int, 2> wave{1, 0};
    double phase = 0.0;
};

/// Symmetric 1-periodic coefficient matrix a(y) on the unit cell.
///
/// Piecewise kinds store phase breakpoints in [0,1) along y1 (the first one
/// is 0) and per-phase diagonal values; the trigonometric kind is a scalar
/// multiple of the identity.
class CoefficientField {
public:
    static CoefficientField constant(int dim, const Matrix2& a) {
        CoefficientField c(dim, CoefficientKind::constant);
        c.constant_ = a;
        if (dim == 1) c.constant_ = Matrix2{{a(0, 0), 0.0}, {0.0, 1.0}};
        c.finish();
        return c;
    }

    static CoefficientField scalar(int dim, double value) { return constant(dim, value * Matrix2::Identity()); }

    /// 1D phases: value[k] on [breakpoints[k], breakpoints[k+1]).
    static CoefficientField piecewise_1d(std::vector<double> breakpoints, std::vector<double> values) {
        CoefficientField c(1, CoefficientKind::piecewise_constant_1d);
        c.set_phases(std::move(breakpoints), values, values);
        c.finish();
        return c;
    }

    /// 2D laminate: a(y) = diag(a11(y1), a22(y1)).
    static CoefficientField laminate(std::vector<double> breakpoints, std::vector<double> a11, std::vector<double> a22) {
        CoefficientField c(2, CoefficientKind::laminate_2d);
        c.set_phases(std::move(breakpoints), std::move(a11), std::move(a22));
        c.finish();
        return c;
    }

    static CoefficientField trigonometric(int dim, double mean, std::vector<FourierMode> modes) {
        CoefficientField c(dim, CoefficientKind::trigonometric);
        c.mean_ = mean;
        c.modes_ = std::move(modes);
        if (dim == 1)
            for (auto& m : c.modes_) m.wave[1] = 0;
        c.finish();
        return c;
    }

    int dim() const { return dim_; }
    CoefficientKind kind() const { return kind_; }
    double nu() const { return nu_; }
    /// Largest breakpoint displacement introduced by snapped().
    double snap_displacement() const { return snap_; }
    const std::vector<double>& breakpoints() const { return breaks_; }
    const std::vector<double>& phase_a11() const { return a11_; }
    const std::vector<double>& phase_a22() const { return a22_; }
    double trig_mean() const { return mean_; }
    const std::vector<FourierMode>& trig_modes() const { return modes_; }
    const Matrix2& constant_matrix() const { return constant_; }

    bool is_constant() const {
        if (kind_ == CoefficientKind::constant) return true;
        if (kind_ == CoefficientKind::trigonometric)
            return std::all_of(modes_.begin(), modes_.end(), [](const FourierMode& m) { return m.amplitude == 0.0; });
        auto same = [](const std::vector<double>& v) { return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); }); };
        return same(a11_) && same(a22_);
    }

    /// a(y), evaluated modulo 1 per axis. In 1D only entry (0,0) is meaningful.
    Matrix2 operator()(double y1, double y2 = 0.0) const {
        y1 -= std::floor(y1);
        y2 -= std::floor(y2);
        switch (kind_) {
        case CoefficientKind::constant: return constant_;
        case CoefficientKind::piecewise_constant_1d:
        case CoefficientKind::laminate_2d: {
            std::size_t k = phase_of(y1);
            return Matrix2{{a11_[k], 0.0}, {0.0, kind_ == CoefficientKind::laminate_2d ? a22_[k] : 1.0}};
        }
        case CoefficientKind::trigonometric: {
            double s = mean_;
            for (const auto& m : modes_)
                s += m.amplitude * std::sin(2.0 * std::numbers::pi * (m.wave[0] * y1 + m.wave[1] * y2) + m.phase);
            return Matrix2{{s, 0.0}, {0.0, dim_ == 2 ? s : 1.0}};
        }
        }
        return constant_;
    }

    /// Copy with breakpoints moved to the nearest multiple of 1/n, so that
    /// phase interfaces coincide with the faces of an n-cell grid.
    CoefficientField snapped(int n) const {
        CoefficientField c = *this;
        if (breaks_.empty()) return c;
        c.snap_ = 0.0;
        for (double& b : c.breaks_) {
            double s = std::round(b * n) / n;
            c.snap_ = std::max(c.snap_, std::abs(s - b));
            b = s;
        }
        for (std::size_t k = 1; k < c.breaks_.size(); ++k)
            if (!(c.breaks_[k] > c.breaks_[k - 1]))
                throw std::invalid_argument("breakpoints collapse when snapped to a " + std::to_string(n) + "-cell grid");
        if (c.breaks_.back() >= 1.0) throw std::invalid_argument("breakpoint snapped onto the period boundary");
        return c;
    }

    /// Verify nu|eta|^2 <= a(y)eta.eta <= nu^-1|eta|^2 on a 64^d sample
    /// (plus every phase for piecewise kinds); throws on violation.
    void check_ellipticity(double nu) const {
        if (!(nu > 0.0 && nu <= 1.0)) throw std::invalid_argument("ellipticity constant must lie in (0,1]");
        auto bad = [&](const Matrix2& a) {
            auto [lo, hi] = eigen_range(a);
            return lo < nu * (1.0 - 1e-12) || hi > (1.0 + 1e-12) / nu;
        };
        const int s = 64;
        for (int i = 0; i < s; ++i)
            for (int j = 0; j < (dim_ == 2 ? s : 1); ++j)
                if (bad((*this)((i + 0.5) / s, (j + 0.5) / s)))
                    throw std::invalid_argument("coefficient violates the ellipticity bounds with nu = " + std::to_string(nu));
        for (std::size_t k = 0; k < a11_.size(); ++k)
            if (bad((*this)(breaks_[k] + 1e-12)))
                throw std::invalid_argument("coefficient phase violates the ellipticity bounds");
    }

    /// Smallest and largest eigenvalue of the active block.
    std::pair<double, double> eigen_range(const Matrix2& a) const {
        if (dim_ == 1) return {a(0, 0), a(0, 0)};
        Eigen::SelfAdjointEigenSolver<Matrix2> es(a, Eigen::EigenvaluesOnly);
        return {es.eigenvalues()[0], es.eigenvalues()[1]};
    }

private:
    CoefficientField(int dim, CoefficientKind k) : dim_(dim), kind_(k) {
        if (dim != 1 && dim != 2) throw std::invalid_argument("coefficient dimension must be 1 or 2");
    }

    void set_phases(std::vector<double> b, std::vector<double> a11, std::vector<double> a22) {
        if (b.empty() || b.size() != a11.size() || a11.size() != a22.size())
            throw std::invalid_argument("piecewise coefficient needs one value per phase");
        if (b.front() != 0.0) throw std::invalid_argument("the first breakpoint must be 0");
        for (std::size_t k = 1; k < b.size(); ++k)
            if (!(b[k] > b[k - 1]) || b[k] >= 1.0) throw std::invalid_argument("breakpoints must increase inside [0,1)");
        breaks_ = std::move(b);
        a11_ = std::move(a11);
        a22_ = std::move(a22);
    }

    std::size_t phase_of(double y) const {
        auto it = std::upper_bound(breaks_.begin(), breaks_.end(), y);
        return static_cast<std::size_t>(std::distance(breaks_.begin(), it)) - 1;
    }

    void finish() {
        double lo = std::numeric_limits<double>::infinity();
        double hi = 0.0;
        auto visit = [&](const Matrix2& a) {
            if (!a.allFinite() || std::abs(a(0, 1) - a(1, 0)) > 1e-14 * a.norm())
                throw std::invalid_argument("coefficient must be finite and symmetric");
            auto [l, h] = eigen_range(a);
            lo = std::min(lo, l);
            hi = std::max(hi, h);
        };
        const int s = 64;
        for (int i = 0; i < s; ++i)
            for (int j = 0; j < (dim_ == 2 ? s : 1); ++j) visit((*this)((i + 0.5) / s, (j + 0.5) / s));
        for (std::size_t k = 0; k < a11_.size(); ++k) visit((*this)(breaks_[k] + 1e-12));
        if (kind_ == CoefficientKind::trigonometric) {
            double amp = 0.0;
            for (const auto& m : modes_) amp += std::abs(m.amplitude);
            lo = std::min(lo, mean_ - amp);
            hi = std::max(hi, mean_ + amp);
        }
        if (!(lo > 0.0)) throw std::invalid_argument("coefficient is not uniformly elliptic");
        nu_ = std::min(lo, 1.0 / hi);
        nu_ = std::min(nu_, 1.0);
    }

    int dim_;
    CoefficientKind kind_;
    Matrix2 constant_ = Matrix2::Identity();
    std::vector<double> breaks_;
    std::vector<double> a11_, a22_;
    double mean_ = 1.0;
    std::vector<FourierMode> modes_;
    double nu_ = 1.0;
    double snap_ = 0.0;
};

}  // namespace homlab

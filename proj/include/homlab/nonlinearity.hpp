#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace homlab {

/// f with its derivatives and antiderivative F(s) = int_0^s f.
///
/// Documented bounds: f(s)s >= -K1, f'(s) >= -K2, |f''(s)| <= K3(1+|s|),
/// |f'(s)| <= K4(1+s^2), |f(s)| <= K5(1+|s|^3), F(s) >= -K_mu - mu s^2.
struct Nonlinearity {
    enum class Tag { zero, cubic, cubic_minus_linear };
    Tag tag = Tag::cubic;
    double lambda = 0.0;

    static Nonlinearity zero() { return {Tag::zero, 0.0}; }
    static Nonlinearity cubic() { return {Tag::cubic, 0.0}; }
    /// f(s) = s^3 - lambda s.
    static Nonlinearity cubic_minus_linear(double lambda) {
        if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("cubic_minus_linear needs lambda >= 0");
        return {Tag::cubic_minus_linear, lambda};
    }

    bool is_zero() const { return tag == Tag::zero; }

    double f(double s) const {
        switch (tag) {
        case Tag::zero: return 0.0;
        case Tag::cubic: return s * s * s;
        case Tag::cubic_minus_linear: return s * s * s - lambda * s;
        }
        return 0.0;
    }
    double df(double s) const {
        switch (tag) {
        case Tag::zero: return 0.0;
        case Tag::cubic: return 3.0 * s * s;
        case Tag::cubic_minus_linear: return 3.0 * s * s - lambda;
        }
        return 0.0;
    }
    double d2f(double s) const { return tag == Tag::zero ? 0.0 : 6.0 * s; }
    double F(double s) const {
        switch (tag) {
        case Tag::zero: return 0.0;
        case Tag::cubic: return 0.25 * s * s * s * s;
        case Tag::cubic_minus_linear: return 0.25 * s * s * s * s - 0.5 * lambda * s * s;
        }
        return 0.0;
    }

    double K1() const { return tag == Tag::cubic_minus_linear ? 0.25 * lambda * lambda : 0.0; }
    double K2() const { return tag == Tag::cubic_minus_linear ? lambda : 0.0; }
    double K3() const { return tag == Tag::zero ? 0.0 : 6.0; }
    double K4() const { return tag == Tag::zero ? 0.0 : std::max(3.0, lambda); }
    double K5() const { return tag == Tag::zero ? 0.0 : 1.0 + lambda; }
    double K_mu(double mu) const {
        if (tag != Tag::cubic_minus_linear) return 0.0;
        const double c = std::max(0.0, 0.5 * lambda - mu);
        return c * c;
    }
};

inline std::string to_string(const Nonlinearity& f) {
    switch (f.tag) {
    case Nonlinearity::Tag::zero: return "zero";
    case Nonlinearity::Tag::cubic: return "cubic";
    case Nonlinearity::Tag::cubic_minus_linear: return "cubic_minus_linear";
    }
    return "?";
}

inline Nonlinearity parse_nonlinearity(const std::string& tag, double lambda = 0.0) {
    if (tag == "zero") return Nonlinearity::zero();
    if (tag == "cubic") return Nonlinearity::cubic();
    if (tag == "cubic_minus_linear") return Nonlinearity::cubic_minus_linear(lambda);
    throw std::invalid_argument("unknown nonlinearity '" + tag + "'");
}

}  // namespace homlab

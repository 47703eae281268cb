#pragma once

#include <algorithm>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "homlab/fit.hpp"

namespace homlab {

/// Per-epsilon measurements with log-log fits against a chosen abscissa.
struct RateReport {
    static constexpr double min_r2 = 0.9;

    std::vector<double> epsilon;
    /// Ordered columns; each has one value per epsilon.
    std::vector<std::pair<std::string, std::vector<double>>> columns;
    std::map<std::string, LineFit> fits;
    std::map<std::string, double> constants;
    std::vector<std::string> notes;

    std::vector<double>& column(const std::string& name) {
        for (auto& [n, v] : columns)
            if (n == name) return v;
        columns.emplace_back(name, std::vector<double>{});
        return columns.back().second;
    }
    const std::vector<double>& column(const std::string& name) const {
        for (const auto& [n, v] : columns)
            if (n == name) return v;
        throw std::out_of_range("no column '" + name + "' in rate report");
    }
    bool has_column(const std::string& name) const {
        return std::any_of(columns.begin(), columns.end(), [&](const auto& c) { return c.first == name; });
    }

    /// Fit column `name` against `abscissa` (epsilon when empty); positive
    /// samples only. Fits with R^2 below min_r2 are kept but flagged.
    const LineFit& fit(const std::string& name, const std::vector<double>& abscissa = {}) {
        const std::vector<double>& x = abscissa.empty() ? epsilon : abscissa;
        const std::vector<double>& y = column(name);
        std::vector<double> xs, ys;
        for (std::size_t k = 0; k < y.size(); ++k)
            if (x[k] > 0.0 && y[k] > 0.0) {
                xs.push_back(x[k]);
                ys.push_back(y[k]);
            }
        if (xs.size() < 3) {
            notes.push_back("fit of " + name + " skipped: fewer than three positive samples");
            return fits[name] = LineFit{0.0, 0.0, 0.0};
        }
        const LineFit f = fit_rate(xs, ys);
        if (f.r2 < min_r2) notes.push_back("fit of " + name + " inconclusive (R^2 = " + std::to_string(f.r2) + ")");
        return fits[name] = f;
    }

    bool conclusive(const std::string& name) const {
        auto it = fits.find(name);
        return it != fits.end() && it->second.r2 >= min_r2;
    }
};

}  // namespace homlab

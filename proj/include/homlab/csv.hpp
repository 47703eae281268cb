#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "homlab/report.hpp"

namespace homlab {

/// 17 significant digits in scientific notation; round-trips every double.
inline std::string format_double(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char b[40];
    std::snprintf(b, sizeof b, "%.16e", x);
    return b;
}

/// Comma-separated table with a mandatory header row. Cells are written as
/// given; numeric cells go through format_double.
class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {
        if (header_.empty()) throw std::invalid_argument("csv needs a header");
    }

    void add(std::vector<std::string> row) {
        if (row.size() != header_.size()) throw std::invalid_argument("csv row width differs from header");
        rows_.push_back(std::move(row));
    }
    void add(const std::vector<double>& row) {
        std::vector<std::string> r;
        for (double x : row) r.push_back(format_double(x));
        add(std::move(r));
    }

    std::string str() const {
        std::string out;
        auto line = [&](const std::vector<std::string>& r) {
            for (std::size_t k = 0; k < r.size(); ++k) {
                if (k) out += ',';
                out += r[k];
            }
            out += '\n';
        };
        line(header_);
        for (const auto& r : rows_) line(r);
        return out;
    }

    void write(const std::string& path) const {
        std::ofstream f(path, std::ios::binary);
        if (!f) throw std::runtime_error("cannot write " + path);
        f << str();
    }

    std::size_t rows() const { return rows_.size(); }

private:
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

/// epsilon followed by every report column.
inline CsvTable report_table(const RateReport& rep, const std::string& abscissa = "epsilon") {
    std::vector<std::string> header{abscissa};
    for (const auto& [n, v] : rep.columns) header.push_back(n);
    CsvTable t(header);
    for (std::size_t k = 0; k < rep.epsilon.size(); ++k) {
        std::vector<double> row{rep.epsilon[k]};
        for (const auto& [n, v] : rep.columns) row.push_back(k < v.size() ? v[k] : std::nan(""));
        t.add(row);
    }
    return t;
}

/// name,slope,intercept,r2,conclusive
inline CsvTable fits_table(const RateReport& rep) {
    CsvTable t({"name", "slope", "intercept", "r2", "conclusive"});
    for (const auto& [n, f] : rep.fits)
        t.add({n, format_double(f.slope), format_double(f.intercept), format_double(f.r2), rep.conclusive(n) ? "1" : "0"});
    return t;
}

/// name,value
inline CsvTable constants_table(const RateReport& rep) {
    CsvTable t({"name", "value"});
    for (const auto& [n, v] : rep.constants) t.add({n, format_double(v)});
    return t;
}

}  // namespace homlab

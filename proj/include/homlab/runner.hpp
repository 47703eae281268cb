#pragma once

#include <Eigen/Core>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>

#include "homlab/attractor.hpp"
#include "homlab/cell.hpp"
#include "homlab/config.hpp"
#include "homlab/csv.hpp"
#include "homlab/elliptic.hpp"
#include "homlab/expattract.hpp"
#include "homlab/parallel.hpp"
#include "homlab/wave.hpp"

namespace homlab {

inline constexpr const char* version = "1.0.0";

enum ExitCode { exit_ok = 0, exit_validation = 1, exit_numerical = 2 };

struct RunResult {
    int code = exit_ok;
    std::string message;
    std::vector<std::string> files;
};

namespace detail {

inline std::string fmt_g(double x) {
    char b[40];
    std::snprintf(b, sizeof b, "%.6g", x);
    return b;
}

class OutputDir {
public:
    explicit OutputDir(std::filesystem::path dir) : dir_(std::move(dir)) { std::filesystem::create_directories(dir_); }

    void csv(const std::string& name, const CsvTable& t) {
        t.write((dir_ / name).string());
        files.push_back(name);
    }
    void text(const std::string& name, const std::string& body) {
        std::ofstream f(dir_ / name, std::ios::binary);
        if (!f) throw std::runtime_error("cannot write " + (dir_ / name).string());
        f << body;
        files.push_back(name);
    }

    std::vector<std::string> files;

private:
    std::filesystem::path dir_;
};

inline CsvTable cell_table(const CellSolution& cs) {
    const Grid& g = cs.cell_grid;
    std::vector<std::string> header{"x"};
    if (g.dim == 2) header.push_back("y");
    for (int i = 0; i < g.dim; ++i) header.push_back("N_" + std::to_string(i + 1));
    CsvTable t(header);
    const GridFunction& n0 = cs.N[0];
    for (Eigen::Index k = 0; k < n0.values.size(); ++k) {
        const auto ij = g.unflatten(static_cast<std::size_t>(k));
        std::vector<double> row{g.coord(0, ij[0])};
        if (g.dim == 2) row.push_back(g.coord(1, ij[1]));
        for (const auto& n : cs.N) row.push_back(n.values[k]);
        t.add(row);
    }
    return t;
}

inline CsvTable cell_meta_table(const CellSolution& cs) {
    CsvTable t({"name", "value"});
    for (int i = 0; i < cs.dim(); ++i)
        for (int j = 0; j < cs.dim(); ++j) t.add({"a_h_" + std::to_string(i) + std::to_string(j), format_double(cs.a_h(i, j))});
    for (std::size_t i = 0; i < cs.residual.size(); ++i) {
        t.add({"residual_" + std::to_string(i + 1), format_double(cs.residual[i])});
        t.add({"iterations_" + std::to_string(i + 1), format_double(cs.iterations[i])});
    }
    double nmax = 0.0;
    for (const auto& n : cs.N) nmax = std::max(nmax, n.values.cwiseAbs().maxCoeff());
    t.add({"max_abs_N", format_double(nmax)});
    t.add({"asymmetry", format_double(cs.asymmetry)});
    t.add({"snap_displacement", format_double(cs.snap_displacement)});
    return t;
}

inline std::string cell_summary(const CellSolution& cs) {
    std::ostringstream os;
    os << "a_h =";
    for (int i = 0; i < cs.dim(); ++i) {
        os << (i ? "; " : " [");
        for (int j = 0; j < cs.dim(); ++j) os << (j ? " " : "") << fmt_g(cs.a_h(i, j));
    }
    os << "]\n";
    double nmax = 0.0;
    for (const auto& n : cs.N) nmax = std::max(nmax, n.values.cwiseAbs().maxCoeff());
    os << "max|N| = " << fmt_g(nmax) << "\n";
    for (std::size_t i = 0; i < cs.residual.size(); ++i) os << "residual N_" << i + 1 << " = " << fmt_g(cs.residual[i]) << "\n";
    return os.str();
}

inline std::string report_summary(const RateReport& rep, const std::string& abscissa) {
    std::ostringstream os;
    os << abscissa << " =";
    for (double e : rep.epsilon) os << " " << fmt_g(e);
    os << "\n\nfitted slopes (log-log least squares)\n";
    for (const auto& [n, f] : rep.fits)
        os << "  slope " << n << " = " << fmt_g(f.slope) << "  R^2 = " << fmt_g(f.r2) << (rep.conclusive(n) ? "" : "  (inconclusive)") << "\n";
    if (!rep.constants.empty()) os << "\nconstants\n";
    for (const auto& [n, v] : rep.constants) os << "  " << n << " = " << fmt_g(v) << "\n";
    if (!rep.notes.empty()) os << "\nnotes\n";
    for (const auto& n : rep.notes) os << "  " << n << "\n";
    return os.str();
}

inline void write_report(OutputDir& out, const RateReport& rep, const std::string& abscissa) {
    out.csv("rates.csv", report_table(rep, abscissa));
    out.csv("fits.csv", fits_table(rep));
    out.csv("constants.csv", constants_table(rep));
}

inline void write_exp_extras(OutputDir& out, const ExpStudy& st) {
    const ExpAttractor& ea = st.reference;
    CsvTable lv({"k", "card_V", "card_E"});
    for (std::size_t k = 0; k < ea.V.size(); ++k)
        lv.add(std::vector<double>{static_cast<double>(k), static_cast<double>(ea.V[k].size()),
                                   static_cast<double>(k < ea.E.size() ? ea.E[k].size() : 0)});
    out.csv("levels.csv", lv);
    CsvTable dc({"step", "dist", "level_dist", "bound"});
    // Level distances stop at k_max; later steps have only dist to M.
    for (std::size_t k = 0; k < st.decay.dist.size(); ++k) {
        const bool level = k < st.decay.level_dist.size();
        dc.add(std::vector<double>{static_cast<double>(k), st.decay.dist[k], level ? st.decay.level_dist[k] : std::nan(""),
                                   level ? st.decay.bound[k] : std::nan("")});
    }
    out.csv("decay.csv", dc);
    if (!st.dimension.radii.empty()) {
        CsvTable dm({"radius", "count"});
        for (std::size_t k = 0; k < st.dimension.radii.size(); ++k) dm.add(std::vector<double>{st.dimension.radii[k], st.dimension.counts[k]});
        out.csv("dimension.csv", dm);
    }
}

inline std::string exp_summary(const ExpStudy& st) {
    std::ostringstream os;
    os << "card V_k = N0 N^k exactly: " << (st.card_exact ? "yes" : "no") << "\n";
    os << "S E_k contained in E_{k+1}: " << (st.invariant_inclusion ? "yes" : "no") << "\n";
    os << "attraction decay base = " << fmt_g(st.decay.base) << "  R^2 = " << fmt_g(st.decay.fit.r2) << "\n";
    if (!st.dimension.radii.empty())
        os << "box-count dimension = " << fmt_g(st.dimension.value) << "  R^2 = " << fmt_g(st.dimension.fit.r2) << "\n";
    if (!st.report.epsilon.empty()) {
        os << "level recursion: M = " << fmt_g(st.levels.M) << " against L^2/(L-1) = " << fmt_g(st.levels.M_bound)
           << (st.levels.holds ? " (holds)" : " (violated)") << "; sharp form " << (st.levels.sharp ? "holds" : "violated") << "\n";
    }
    return os.str();
}

inline std::string manifest_text(const StudyConfig& sc, const std::string& config_path, const std::string& status,
                                 const std::vector<std::string>& files) {
    std::ostringstream os;
    os << "homlab.version = " << version << "\n";
    os << "eigen.version = " << EIGEN_WORLD_VERSION << "." << EIGEN_MAJOR_VERSION << "." << EIGEN_MINOR_VERSION << "\n";
    os << "compiler.version = " << __VERSION__ << "\n";
    os << "config.path = " << config_path << "\n";
    os << "threads = " << thread_count() << "\n";
    for (const auto& [k, v] : sc.resolved) os << "config." << k << " = " << v << "\n";
    const bool toy = sc.study == StudyKind::exp_attractor && sc.exp_mode == "toy";
    if (!toy) {
        for (int a = 0; a < sc.grid.dim && sc.study != StudyKind::cell; ++a) os << "grid.h_" << a << " = " << canonical(sc.grid.h(a)) << "\n";
        os << "tolerance.cell_cg = 1e-12\n";
    }
    if (sc.study == StudyKind::trajectory_rate || sc.study == StudyKind::attractor_dist || (sc.study == StudyKind::exp_attractor && !toy)) {
        os << "tolerance.resolvent_gap = 1e-08\n";
        const double dt_cfg = sc.study == StudyKind::trajectory_rate ? sc.trajectory.dt : sc.study == StudyKind::attractor_dist ? sc.attractor.dt : 0.0;
        os << "wave.dt_effective = " << canonical(dt_cfg > 0.0 ? dt_cfg : 0.5 * sc.grid.h(0)) << "\n";
    }
    os << "tolerance.fit_min_r2 = " << canonical(RateReport::min_r2) << "\n";
    os << "outputs =";
    for (const auto& f : files) os << " " << f;
    os << "\nstatus = " << status << "\n";
    return os.str();
}

}  // namespace detail

/// Validate only: the resolved config or the list of violated rules.
inline RunResult validate_config_file(const std::string& path) {
    try {
        resolve_config(Config::load(path));
        return {exit_ok, "config valid", {}};
    } catch (const ConfigError& e) {
        return {exit_validation, e.what(), {}};
    }
}

/// Execute the study named in the config and write its outputs into `out`.
inline RunResult run_study(const std::string& config_path, const std::string& out_dir) {
    StudyConfig sc;
    try {
        sc = resolve_config(Config::load(config_path));
    } catch (const ConfigError& e) {
        return {exit_validation, e.what(), {}};
    }

    detail::OutputDir out(out_dir);
    std::ostringstream summary;
    summary << "study = " << to_string(sc.study) << "\n\n";
    RunResult res;
    try {
        const bool toy = sc.study == StudyKind::exp_attractor && sc.exp_mode == "toy";
        std::shared_ptr<const CellSolution> cell;
        if (!toy) {
            cell = std::make_shared<const CellSolution>(solve_cell(sc.coefficient, sc.cell_n));
            out.csv("cell_meta.csv", detail::cell_meta_table(*cell));
            summary << detail::cell_summary(*cell) << "\n";
        }
        switch (sc.study) {
        case StudyKind::cell: out.csv("cell.csv", detail::cell_table(*cell)); break;
        case StudyKind::elliptic_rate: {
            const RateReport rep = elliptic_rate_study(sc.coefficient, cell, sc.grid, sc.eps, sc.force.on(sc.grid), sc.elliptic);
            detail::write_report(out, rep, "epsilon");
            summary << detail::report_summary(rep, "epsilon");
            break;
        }
        case StudyKind::trajectory_rate: {
            const RateReport rep = trajectory_rate_study(sc.coefficient, cell, sc.grid, sc.eps, sc.force.on(sc.grid), sc.trajectory);
            detail::write_report(out, rep, "epsilon");
            summary << detail::report_summary(rep, "epsilon");
            break;
        }
        case StudyKind::attractor_dist: {
            const RateReport rep = attractor_rate_study(sc.coefficient, cell, sc.grid, sc.eps, sc.force.on(sc.grid), sc.attractor);
            detail::write_report(out, rep, "epsilon");
            summary << detail::report_summary(rep, "epsilon");
            break;
        }
        case StudyKind::exp_attractor: {
            const ExpStudy st = toy ? exp_attractor_toy_study(sc.toy)
                                    : exp_attractor_wave_study(sc.coefficient, cell, sc.grid, sc.eps, sc.force.on(sc.grid), sc.wave_exp);
            detail::write_report(out, st.report, toy ? "delta" : "epsilon");
            detail::write_exp_extras(out, st);
            summary << detail::exp_summary(st) << "\n" << detail::report_summary(st.report, toy ? "delta" : "epsilon");
            break;
        }
        }
        out.text("summary.txt", summary.str());
        res = {exit_ok, "ok", {}};
    } catch (const std::exception& e) {
        summary << "\nnumerical failure: " << e.what() << "\n";
        out.text("summary.txt", summary.str());
        res = {exit_numerical, std::string("numerical failure: ") + e.what(), {}};
    }
    std::vector<std::string> files = out.files;
    files.push_back("manifest.txt");
    out.text("manifest.txt", detail::manifest_text(sc, config_path, res.code == exit_ok ? "ok" : res.message, files));
    res.files = files;
    return res;
}

}  // namespace homlab

#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "homlab/attractor.hpp"
#include "homlab/coefficient.hpp"
#include "homlab/expattract.hpp"
#include "homlab/grid.hpp"
#include "homlab/nonlinearity.hpp"
#include "homlab/operator.hpp"
#include "homlab/wave.hpp"

namespace homlab {

/// Raised with every violated rule, one per line.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::vector<std::string>& errors) : std::runtime_error(join(errors)), errors_(errors) {}
    const std::vector<std::string>& errors() const { return errors_; }

private:
    static std::string join(const std::vector<std::string>& e) {
        std::string s;
        for (const auto& x : e) s += x + "\n";
        return s;
    }
    std::vector<std::string> errors_;
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(s);
    while (std::getline(is, cur, sep)) {
        cur = trim(cur);
        if (!cur.empty()) out.push_back(cur);
    }
    return out;
}

/// A real, or a fraction p/q of reals.
inline double parse_real(const std::string& s) {
    const std::string t = trim(s);
    const auto slash = t.find('/');
    std::size_t used = 0;
    if (slash != std::string::npos) {
        const double p = parse_real(t.substr(0, slash)), q = parse_real(t.substr(slash + 1));
        if (q == 0.0) throw std::invalid_argument("division by zero");
        return p / q;
    }
    const double v = std::stod(t, &used);
    if (used != t.size()) throw std::invalid_argument("trailing characters");
    if (!std::isfinite(v)) throw std::invalid_argument("not finite");
    return v;
}

/// Shortest text that reads back to the same double.
inline std::string canonical(double x) {
    char b[32];
    const auto r = std::to_chars(b, b + sizeof b, x);
    return std::string(b, r.ptr);
}

}  // namespace detail

/// Flat `key = value` text; '#' starts a comment. Sections are dotted key
/// prefixes. Duplicate keys are errors.
struct Config {
    struct Entry {
        std::string value;
        int line = 0;
    };
    std::map<std::string, Entry> entries;

    static Config parse(std::istream& in) {
        Config c;
        std::vector<std::string> errors;
        std::string line;
        int no = 0;
        while (std::getline(in, line)) {
            ++no;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.resize(hash);
            line = detail::trim(line);
            if (line.empty()) continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos) {
                errors.push_back("line " + std::to_string(no) + ": expected 'key = value'");
                continue;
            }
            const std::string key = detail::trim(line.substr(0, eq)), value = detail::trim(line.substr(eq + 1));
            if (key.empty()) {
                errors.push_back("line " + std::to_string(no) + ": empty key");
                continue;
            }
            if (c.entries.count(key)) {
                errors.push_back("line " + std::to_string(no) + ": duplicate key '" + key + "'");
                continue;
            }
            c.entries[key] = {value, no};
        }
        if (!errors.empty()) throw ConfigError(errors);
        return c;
    }

    static Config parse_string(const std::string& s) {
        std::istringstream is(s);
        return parse(is);
    }

    static Config load(const std::string& path) {
        std::ifstream f(path);
        if (!f) throw ConfigError({"cannot read config file '" + path + "'"});
        return parse(f);
    }
};

/// Typed access that records every resolved value (defaults included) and
/// collects errors instead of stopping at the first one.
class ConfigReader {
public:
    explicit ConfigReader(const Config& c) : cfg_(c) {}

    bool has(const std::string& key) const { return cfg_.entries.count(key) > 0; }

    std::string str(const std::string& key, const std::string& def) {
        used_.insert(key);
        auto it = cfg_.entries.find(key);
        const std::string v = it == cfg_.entries.end() ? def : it->second.value;
        resolved_[key] = v;
        return v;
    }
    std::string required_str(const std::string& key) {
        used_.insert(key);
        auto it = cfg_.entries.find(key);
        if (it == cfg_.entries.end()) {
            error("missing required key '" + key + "'");
            return "";
        }
        resolved_[key] = it->second.value;
        return it->second.value;
    }
    double real(const std::string& key, double def) {
        used_.insert(key);
        auto it = cfg_.entries.find(key);
        if (it == cfg_.entries.end()) {
            resolved_[key] = detail::canonical(def);
            return def;
        }
        try {
            const double v = detail::parse_real(it->second.value);
            resolved_[key] = detail::canonical(v);
            return v;
        } catch (const std::exception&) {
            error(where(key) + "'" + key + "' must be a real number, got '" + it->second.value + "'");
            return def;
        }
    }
    long integer(const std::string& key, long def) {
        const double v = real(key, static_cast<double>(def));
        if (v != std::floor(v)) {
            error(where(key) + "'" + key + "' must be an integer");
            return def;
        }
        resolved_[key] = std::to_string(static_cast<long>(v));
        return static_cast<long>(v);
    }
    bool boolean(const std::string& key, bool def) {
        const std::string v = str(key, def ? "true" : "false");
        if (v == "true" || v == "1") return true;
        if (v == "false" || v == "0") return false;
        error(where(key) + "'" + key + "' must be true or false");
        return def;
    }
    std::vector<double> reals(const std::string& key, const std::vector<double>& def, bool required = false) {
        used_.insert(key);
        auto it = cfg_.entries.find(key);
        if (it == cfg_.entries.end()) {
            if (required) error("missing required key '" + key + "'");
            resolved_[key] = join(def);
            return def;
        }
        std::vector<double> out;
        for (const auto& part : detail::split(it->second.value, ',')) {
            try {
                out.push_back(detail::parse_real(part));
            } catch (const std::exception&) {
                error(where(key) + "'" + key + "' has a malformed entry '" + part + "'");
            }
        }
        resolved_[key] = join(out);
        return out;
    }
    /// Seeds have no default: absent seeds are rejected.
    std::uint64_t seed(const std::string& key) {
        used_.insert(key);
        auto it = cfg_.entries.find(key);
        if (it == cfg_.entries.end()) {
            error("missing required seed '" + key + "' (seeds must be explicit)");
            return 0;
        }
        try {
            std::size_t used = 0;
            const unsigned long long v = std::stoull(it->second.value, &used);
            if (used != it->second.value.size()) throw std::invalid_argument("trailing");
            resolved_[key] = std::to_string(v);
            return v;
        } catch (const std::exception&) {
            error(where(key) + "seed '" + key + "' must be a non-negative integer");
            return 0;
        }
    }

    void error(const std::string& e) { errors_.push_back(e); }

    /// Reject keys the study never read.
    void finish(const std::string& study) {
        for (const auto& [k, e] : cfg_.entries)
            if (!used_.count(k)) error("line " + std::to_string(e.line) + ": unknown key '" + k + "' for study '" + study + "'");
    }

    const std::vector<std::string>& errors() const { return errors_; }
    const std::map<std::string, std::string>& resolved() const { return resolved_; }

private:
    std::string where(const std::string& key) const {
        auto it = cfg_.entries.find(key);
        return it == cfg_.entries.end() ? "" : "line " + std::to_string(it->second.line) + ": ";
    }
    static std::string join(const std::vector<double>& v) {
        std::string s;
        for (std::size_t k = 0; k < v.size(); ++k) s += (k ? ", " : "") + detail::canonical(v[k]);
        return s;
    }

    const Config& cfg_;
    std::set<std::string> used_;
    std::map<std::string, std::string> resolved_;
    std::vector<std::string> errors_;
};

/// f(x) = constant + sum of terms; a 2D term is the product of its 1D
/// profile in x and in y. Term syntax kind:amplitude:frequency with kind in
/// sin, cos (argument frequency * x) or sinpi, cospi (frequency * pi * x / l).
struct ForceSpec {
    struct Term {
        std::string kind;
        double amplitude = 0.0, frequency = 0.0;
    };
    double constant = 0.0;
    std::vector<Term> terms;

    GridFunction on(const Grid& g) const {
        auto profile = [&](const Term& t, double x, double l) {
            using std::numbers::pi;
            if (t.kind == "sin") return std::sin(t.frequency * x);
            if (t.kind == "cos") return std::cos(t.frequency * x);
            if (t.kind == "sinpi") return std::sin(t.frequency * pi * x / l);
            return std::cos(t.frequency * pi * x / l);
        };
        return sample(g, [&](double x, double y) {
            double s = constant;
            for (const auto& t : terms) {
                double v = t.amplitude * profile(t, x, g.extent[0]);
                if (g.dim == 2) v *= profile(t, y, g.extent[1]);
                s += v;
            }
            return s;
        });
    }
};

enum class StudyKind { cell, elliptic_rate, trajectory_rate, attractor_dist, exp_attractor };

inline const char* to_string(StudyKind s) {
    switch (s) {
    case StudyKind::cell: return "cell";
    case StudyKind::elliptic_rate: return "elliptic-rate";
    case StudyKind::trajectory_rate: return "trajectory-rate";
    case StudyKind::attractor_dist: return "attractor-dist";
    case StudyKind::exp_attractor: return "exp-attractor";
    }
    return "?";
}

struct StudyConfig {
    StudyKind study = StudyKind::cell;
    CoefficientField coefficient = CoefficientField::scalar(1, 1.0);
    int cell_n = 1024;
    Grid grid;
    std::vector<double> eps;
    ForceSpec force;
    EllipticStudyOptions elliptic;
    TrajectoryStudyParams trajectory;
    AttractorStudyParams attractor;
    std::string exp_mode = "toy";
    ToyStudyParams toy;
    WaveExpParams wave_exp;
    /// Every resolved key with its value, defaults included.
    std::map<std::string, std::string> resolved;
};

namespace detail {

inline CoefficientField read_coefficient(ConfigReader& r) {
    const std::string kind = r.str("coefficient.kind", "constant");
    const long dim = r.integer("coefficient.dim", kind == "laminate_2d" ? 2 : 1);
    if (dim != 1 && dim != 2) {
        r.error("coefficient.dim must be 1 or 2");
        return CoefficientField::scalar(1, 1.0);
    }
    try {
        if (kind == "constant") {
            const auto m = r.reals("coefficient.matrix", {1.0});
            if (dim == 1) {
                if (m.size() != 1) throw std::invalid_argument("coefficient.matrix needs one entry in 1D");
                return CoefficientField::scalar(1, m[0]);
            }
            if (m.size() == 1) return CoefficientField::scalar(2, m[0]);
            if (m.size() != 3) throw std::invalid_argument("coefficient.matrix needs a00, a01, a11 in 2D");
            return CoefficientField::constant(2, Matrix2{{m[0], m[1]}, {m[1], m[2]}});
        }
        if (kind == "piecewise_constant_1d") {
            if (dim != 1) throw std::invalid_argument("piecewise_constant_1d coefficients are one-dimensional");
            return CoefficientField::piecewise_1d(r.reals("coefficient.breakpoints", {}, true), r.reals("coefficient.values", {}, true));
        }
        if (kind == "laminate_2d") {
            if (dim != 2) throw std::invalid_argument("laminate_2d coefficients are two-dimensional");
            return CoefficientField::laminate(r.reals("coefficient.breakpoints", {}, true), r.reals("coefficient.values", {}, true),
                                              r.reals("coefficient.values_2", {}, true));
        }
        if (kind == "trigonometric") {
            const double mean = r.real("coefficient.mean", 1.0);
            std::vector<FourierMode> modes;
            for (const auto& m : split(r.str("coefficient.modes", ""), ';')) {
                const auto f = split(m, ':');
                if (f.size() != 4) throw std::invalid_argument("coefficient.modes entries read amplitude:k1:k2:phase");
                modes.push_back(FourierMode{parse_real(f[0]), {static_cast<int>(parse_real(f[1])), static_cast<int>(parse_real(f[2]))},
                                            parse_real(f[3])});
            }
            return CoefficientField::trigonometric(static_cast<int>(dim), mean, modes);
        }
        throw std::invalid_argument("unknown coefficient.kind '" + kind + "'");
    } catch (const std::exception& e) {
        r.error(std::string("coefficient: ") + e.what());
        return CoefficientField::scalar(static_cast<int>(dim), 1.0);
    }
}

inline ForceSpec read_force(ConfigReader& r) {
    ForceSpec f;
    f.constant = r.real("force.constant", 0.0);
    for (const auto& t : split(r.str("force.terms", ""), ';')) {
        const auto p = split(t, ':');
        if (p.size() != 3 || (p[0] != "sin" && p[0] != "cos" && p[0] != "sinpi" && p[0] != "cospi")) {
            r.error("force.terms entry '" + t + "' must read kind:amplitude:frequency with kind sin, cos, sinpi or cospi");
            continue;
        }
        try {
            f.terms.push_back({p[0], parse_real(p[1]), parse_real(p[2])});
        } catch (const std::exception&) {
            r.error("force.terms entry '" + t + "' has a malformed number");
        }
    }
    return f;
}

inline Grid read_grid(ConfigReader& r, int dim) {
    const long n = r.integer("grid.n", 0);
    const double lx = r.real("grid.extent", 1.0);
    const double ly = dim == 2 ? r.real("grid.extent_y", lx) : 1.0;
    Boundary bc = Boundary::dirichlet;
    try {
        bc = parse_boundary(r.str("grid.bc", "dirichlet"));
        if (bc == Boundary::closed) throw std::invalid_argument("grid.bc = closed is internal");
    } catch (const std::exception& e) {
        r.error(std::string("grid: ") + e.what());
    }
    if (!r.has("grid.n")) r.error("missing required key 'grid.n'");
    try {
        return make_grid(dim, {lx, ly}, {static_cast<int>(n), static_cast<int>(n)}, bc);
    } catch (const std::exception& e) {
        if (r.has("grid.n")) r.error(std::string("grid: ") + e.what());
        return make_grid(dim, {1.0, 1.0}, {4, 4}, Boundary::dirichlet);
    }
}

inline std::vector<double> read_eps(ConfigReader& r, const std::string& key, const Grid& g, std::size_t min_count) {
    std::vector<double> eps = r.reals(key, {}, min_count > 0);
    if (eps.size() < min_count && r.has(key)) r.error("'" + key + "' needs at least " + std::to_string(min_count) + " values");
    for (double e : eps) {
        if (!(e > 0.0)) {
            r.error("'" + key + "' values must be positive");
            continue;
        }
        for (int a = 0; a < g.dim; ++a)
            if (g.h(a) > e / 16.0 * (1.0 + 1e-12))
                r.error("eps = " + canonical(e) + " is not resolved: h <= eps/16 needs grid.n >= " + std::to_string(minimal_resolution(g.extent[a], e)));
    }
    return eps;
}

inline Nonlinearity read_nonlinearity(ConfigReader& r, const std::string& def) {
    const std::string tag = r.str("wave.f", def);
    const double lambda = tag == "cubic_minus_linear" ? r.real("wave.lambda", 0.0) : 0.0;
    try {
        return parse_nonlinearity(tag, lambda);
    } catch (const std::exception& e) {
        r.error(std::string("wave: ") + e.what());
        return Nonlinearity::cubic();
    }
}

inline void check_dt(ConfigReader& r, double dt, const Grid& g) {
    if (dt < 0.0) r.error("wave.dt must be non-negative (0 selects h/2)");
    if (dt > g.h(0) * (1.0 + 1e-12)) r.error("wave.dt = " + canonical(dt) + " exceeds the mesh width " + canonical(g.h(0)));
}

}  // namespace detail

/// Resolve and validate a config; throws ConfigError listing every violated
/// rule.
inline StudyConfig resolve_config(const Config& cfg) {
    ConfigReader r(cfg);
    StudyConfig sc;
    const std::string study = r.required_str("study");
    bool known = true;
    if (study == "cell") sc.study = StudyKind::cell;
    else if (study == "elliptic-rate") sc.study = StudyKind::elliptic_rate;
    else if (study == "trajectory-rate") sc.study = StudyKind::trajectory_rate;
    else if (study == "attractor-dist") sc.study = StudyKind::attractor_dist;
    else if (study == "exp-attractor") sc.study = StudyKind::exp_attractor;
    else {
        known = false;
        if (!study.empty()) r.error("unknown study '" + study + "' (cell, elliptic-rate, trajectory-rate, attractor-dist, exp-attractor)");
    }
    if (!known) throw ConfigError(r.errors());

    const bool toy = sc.study == StudyKind::exp_attractor && r.str("exp.mode", "toy") == "toy";
    if (sc.study == StudyKind::exp_attractor) {
        sc.exp_mode = r.str("exp.mode", "toy");
        if (sc.exp_mode != "toy" && sc.exp_mode != "wave") r.error("exp.mode must be toy or wave");
    }

    if (!toy) {
        sc.coefficient = detail::read_coefficient(r);
        sc.cell_n = static_cast<int>(r.integer("cell.n", sc.coefficient.dim() == 1 ? 1024 : 64));
        if (sc.cell_n < 8) r.error("cell.n must be at least 8");
    }

    switch (sc.study) {
    case StudyKind::cell: break;
    case StudyKind::elliptic_rate: {
        sc.grid = detail::read_grid(r, sc.coefficient.dim());
        sc.eps = detail::read_eps(r, "eps", sc.grid, 3);
        sc.force = detail::read_force(r);
        sc.elliptic.with_gap = r.boolean("elliptic.gap", true);
        sc.elliptic.gap_tol = r.real("elliptic.gap_tol", 1e-8);
        break;
    }
    case StudyKind::trajectory_rate: {
        sc.grid = detail::read_grid(r, sc.coefficient.dim());
        sc.eps = detail::read_eps(r, "eps", sc.grid, 3);
        sc.force = detail::read_force(r);
        auto& t = sc.trajectory;
        t.gamma = r.real("wave.gamma", 0.5);
        t.f = detail::read_nonlinearity(r, "cubic");
        t.dt = r.real("wave.dt", 0.0);
        detail::check_dt(r, t.dt, sc.grid);
        t.scale = r.real("wave.scale", 3.0);
        t.seed = r.seed("traj.seed");
        t.times = r.reals("traj.times", {1.0, 2.0, 4.0});
        t.sample_every = r.real("traj.sample_every", 0.25);
        if (t.gamma < 0.0) r.error("wave.gamma must be non-negative");
        if (t.times.empty()) r.error("traj.times must not be empty");
        break;
    }
    case StudyKind::attractor_dist: {
        sc.grid = detail::read_grid(r, sc.coefficient.dim());
        sc.eps = detail::read_eps(r, "eps", sc.grid, 3);
        sc.force = detail::read_force(r);
        auto& a = sc.attractor;
        a.gamma = r.real("wave.gamma", 0.5);
        a.f = detail::read_nonlinearity(r, "cubic_minus_linear");
        a.dt = r.real("wave.dt", 0.0);
        detail::check_dt(r, a.dt, sc.grid);
        a.plan.scale = r.real("wave.scale", 3.0);
        a.plan.n_traj = static_cast<int>(r.integer("ensemble.n_traj", 8));
        a.plan.T_burn = r.real("ensemble.T_burn", 60.0);
        a.plan.n_samples = static_cast<int>(r.integer("ensemble.n_samples", 4));
        a.plan.spacing = r.real("ensemble.spacing", 1.0);
        a.plan.seed = r.seed("ensemble.seed");
        a.check_seed = r.seed("ensemble.check_seed");
        a.probe_seed = r.seed("ensemble.probe_seed");
        a.n_probe = static_cast<int>(r.integer("ensemble.n_probe", 4));
        a.sigma_horizon = r.real("ensemble.sigma_horizon", 20.0);
        a.sigma_spacing = r.real("ensemble.sigma_spacing", 1.0);
        a.K_horizon = r.real("ensemble.K_horizon", 4.0);
        a.betas = r.reals("ensemble.betas", {0.0, 0.1, 0.25});
        if (a.plan.n_traj < 8) r.error("ensemble.n_traj must be at least 8");
        if (!(a.gamma > 0.0)) r.error("attractor studies need wave.gamma > 0");
        else if (a.plan.T_burn < 10.0 / a.gamma) r.error("ensemble.T_burn must be at least 10/gamma = " + detail::canonical(10.0 / a.gamma));
        if (a.plan.seed == a.check_seed && r.has("ensemble.seed") && r.has("ensemble.check_seed"))
            r.error("ensemble.check_seed must differ from ensemble.seed");
        for (double b : a.betas)
            if (!(b >= 0.0 && b < 1.0)) r.error("ensemble.betas must lie in [0, 1)");
        break;
    }
    case StudyKind::exp_attractor: {
        if (toy) {
            auto& t = sc.toy;
            t.dim = static_cast<int>(r.integer("exp.toy.dim", 1));
            t.a = r.real("exp.toy.a", 1.02);
            t.b = r.real("exp.toy.b", 0.1);
            t.R = r.real("exp.toy.R", 1.0);
            t.deltas = r.reals("exp.deltas", {1e-1, 3e-2, 1e-2, 3e-3, 1e-3});
            t.construct.k_max = static_cast<int>(r.integer("exp.k_max", 0));
            t.construct.cap = static_cast<std::size_t>(r.integer("exp.cap", 100000));
            t.construct.omega = r.real("exp.omega", 1.0);
            t.n_steps = static_cast<int>(r.integer("exp.n_steps", 12));
            t.n_probes = static_cast<int>(r.integer("exp.n_probes", 64));
            t.seed = r.seed("exp.seed");
            t.radii = r.reals("exp.radii", {0.2, 0.1, 0.05, 0.025, 0.0125, 0.00625});
            if (t.dim < 1 || t.dim > 4) r.error("exp.toy.dim must lie in 1..4");
            if (3.0 * t.b * t.R * t.R > 2.0 * t.a) r.error("exp.toy needs 3 b R^2 <= 2 a");
            if (t.deltas.size() < 3) r.error("exp.deltas needs at least three values");
            if (!(t.construct.omega > 0.0 && t.construct.omega <= 1.0)) r.error("exp.omega must lie in (0, 1]");
        } else {
            sc.grid = detail::read_grid(r, sc.coefficient.dim());
            if (sc.grid.dim != 1 || sc.grid.bc != Boundary::dirichlet) r.error("exp.mode = wave runs on 1D dirichlet grids");
            sc.eps = detail::read_eps(r, "eps", sc.grid, 0);
            sc.force = detail::read_force(r);
            auto& w = sc.wave_exp;
            w.gamma = r.real("wave.gamma", 1.0);
            w.f = detail::read_nonlinearity(r, "cubic");
            w.scale = r.real("wave.scale", 3.0);
            w.T = r.real("exp.T", 2.0);
            w.n_sample = static_cast<int>(r.integer("exp.n_sample", 64));
            w.n_held = static_cast<int>(r.integer("exp.n_held", 16));
            w.cap_start = static_cast<std::size_t>(r.integer("exp.cap_start", 4));
            w.cap_model = static_cast<std::size_t>(r.integer("exp.cap_model", 3));
            w.construct.k_max = static_cast<int>(r.integer("exp.k_max", 6));
            w.construct.cap = static_cast<std::size_t>(r.integer("exp.cap", 100000));
            w.construct.omega = r.real("exp.omega", 1.0);
            w.split_pairs = static_cast<int>(r.integer("exp.split_pairs", 8));
            w.n_steps = static_cast<int>(r.integer("exp.n_steps", 8));
            w.n_probes = static_cast<int>(r.integer("exp.n_probes", 8));
            w.continuous = r.boolean("exp.continuous", true);
            w.seed = r.seed("exp.seed");
            if (!(w.gamma > 0.0)) r.error("exp.mode = wave needs wave.gamma > 0");
            if (!(w.construct.omega > 0.0 && w.construct.omega <= 1.0)) r.error("exp.omega must lie in (0, 1]");
        }
        break;
    }
    }
    r.finish(study);
    if (!r.errors().empty()) throw ConfigError(r.errors());
    if (!toy) {
        try {
            sc.coefficient.check_ellipticity(sc.coefficient.nu());
        } catch (const std::exception& e) {
            throw ConfigError({std::string("coefficient: ") + e.what()});
        }
    }
    sc.resolved = r.resolved();
    return sc;
}

}  // namespace homlab

// Experiment configuration: a flat key-value text format with three typed
// sections (model / cocycle / experiment), strict about unknown keys, and
// serializable back to text so that configs round-trip.

#pragma once

#include <cctype>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "sympflow/base_dynamics.hpp"
#include "sympflow/cocycle.hpp"
#include "sympflow/linalg.hpp"

namespace sympflow {

struct ConfigError : Error {
    using Error::Error;
};

struct ExperimentConfig {
    // [model]
    long long m00 = 2, m01 = 1, m10 = 1, m11 = 1;
    bool roof_constant = true;
    double roof_c0 = 1.0;
    std::vector<RoofFunction::Mode> roof_modes;

    // [cocycle]
    int d = 1;
    double alpha = 1.0;
    std::vector<GeneratorTerm> terms;

    // [experiment]
    std::string name = "spectrum";
    std::uint64_t seed = 1;
    long long n_iter = 10000;
    int n_samples = 16;
    int n_atoms = 1536;
    int n_transient = 24;
    int depth_window = 32;
    int n_pairs = 32;
    int grid = 64;
    int leaf_period = 5;
    int leaf_index = 1;
    double theta_min = -0.5;
    double theta_max = 0.5;
    double sweep_min = 0.0;
    double sweep_max = 0.6;
    double sweep_step = 0.02;
    int window = 10;
    double rho_b = 0.02;
    double sigma_eps = 0.01;
    double delta = 0.0;  // 0 = auto scale for the openness probe
    int n_perturb = 20;
    double tol = 1e-9;
    double pair_scale = 0.05;
    int loop_j = 1;
    std::string out = "out";
    std::string format = "json";

    SuspensionFlow build_model() const {
        TorusAutomorphism f = TorusAutomorphism::from_matrix(m00, m01, m10, m11);
        RoofFunction roof =
            roof_constant ? RoofFunction::unit() : RoofFunction::trig(roof_c0, roof_modes);
        return SuspensionFlow::make(f, roof);
    }

    CocycleField build_cocycle() const {
        return CocycleField::make(build_model(), d, alpha, terms);
    }

    void validate() const {
        if (name != "spectrum" && name != "bunching" && name != "holonomy" &&
            name != "theta-scan" && name != "su-breaking" && name != "openness")
            throw ConfigError("unknown experiment name: " + name);
        if (format != "json" && format != "csv")
            throw ConfigError("format must be json or csv");
        if (!(tol > 0.0)) throw ConfigError("tol must be positive");
        if (!(rho_b > 0.0)) throw ConfigError("rho_b must be positive");
        if (!(sigma_eps > 0.0)) throw ConfigError("sigma_eps must be positive");
        if (!(pair_scale > 0.0)) throw ConfigError("pair_scale must be positive");
        if (delta < 0.0) throw ConfigError("delta must be nonnegative");
        if (n_iter < 1 || n_samples < 1 || n_atoms < 1 || n_pairs < 1 || grid < 1)
            throw ConfigError("iteration and sample counts must be positive");
        if (leaf_period < 1) throw ConfigError("leaf_period must be >= 1");
        if (loop_j < 0) throw ConfigError("loop_j must be >= 0");
        if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in (0,1]");
        if (d < 1) throw ConfigError("d must be >= 1");
        try {
            build_model();  // validates matrix and roof
        } catch (const Error& e) {
            throw ConfigError(e.what());
        }
    }
};

namespace detail_config {

inline std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return b == std::string::npos ? "" : s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_ws(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream iss(s);
    std::string tok;
    while (iss >> tok) out.push_back(tok);
    return out;
}

inline std::vector<std::string> split_char(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

inline double to_double(const std::string& s, const std::string& what) {
    try {
        std::size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("cannot parse number '" + s + "' for " + what);
    }
}

inline long long to_int(const std::string& s, const std::string& what) {
    try {
        std::size_t pos = 0;
        long long v = std::stoll(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("cannot parse integer '" + s + "' for " + what);
    }
}

inline GeneratorTerm parse_term(const std::string& value) {
    auto tokens = split_ws(value);
    if (tokens.empty()) throw ConfigError("empty term");
    const std::string kind = tokens[0];

    if (kind == "constant") {
        std::vector<double> entries;
        for (std::size_t i = 1; i < tokens.size(); ++i)
            entries.push_back(to_double(tokens[i], "constant term entry"));
        const int n = static_cast<int>(std::lround(std::sqrt(static_cast<double>(entries.size()))));
        if (n * n != static_cast<int>(entries.size()) || n < 2 || n % 2 != 0)
            throw ConfigError("constant term needs a square even-dimensional matrix");
        Mat m(n, n);
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < n; ++c) m(r, c) = entries[static_cast<std::size_t>(r * n + c)];
        return GeneratorTerm::make_constant(SymplecticMatrix::checked(m, 1e-8));
    }

    if (kind == "rotation" || kind == "diagonal") {
        ScalarField field;
        int offset = 0;
        for (std::size_t i = 1; i < tokens.size(); ++i) {
            auto kv = split_char(tokens[i], '=');
            if (kv.size() != 2) throw ConfigError("term option must be key=value: " + tokens[i]);
            const std::string& key = kv[0];
            const std::string& val = kv[1];
            if (key == "c0") {
                field.c0 = to_double(val, "field c0");
            } else if (key == "offset") {
                offset = static_cast<int>(to_int(val, "term offset"));
            } else if (key == "base") {
                auto parts = split_char(val, ',');
                if (parts.size() != 4) throw ConfigError("base mode needs k1,k2,cos,sin");
                field.base_modes.push_back({static_cast<int>(to_int(parts[0], "base k1")),
                                            static_cast<int>(to_int(parts[1], "base k2")),
                                            to_double(parts[2], "base cos"),
                                            to_double(parts[3], "base sin")});
            } else if (key == "height") {
                auto parts = split_char(val, ',');
                if (parts.size() != 3) throw ConfigError("height mode needs m,cos,sin");
                field.height_modes.push_back({static_cast<int>(to_int(parts[0], "height m")),
                                              to_double(parts[1], "height cos"),
                                              to_double(parts[2], "height sin")});
            } else {
                throw ConfigError("unknown term option: " + key);
            }
        }
        return kind == "rotation" ? GeneratorTerm::make_rotation(field, offset)
                                  : GeneratorTerm::make_diagonal(field, offset);
    }

    if (kind == "bump") {
        SuspensionPoint site;
        double rho = 0.0, theta0 = 0.0;
        for (std::size_t i = 1; i < tokens.size(); ++i) {
            auto kv = split_char(tokens[i], '=');
            if (kv.size() != 2) throw ConfigError("term option must be key=value: " + tokens[i]);
            if (kv[0] == "x") {
                auto parts = split_char(kv[1], ',');
                if (parts.size() != 2) throw ConfigError("bump x needs x1,x2");
                site.x = {to_double(parts[0], "bump x1"), to_double(parts[1], "bump x2")};
            } else if (kv[0] == "t") {
                site.t = to_double(kv[1], "bump t");
            } else if (kv[0] == "rho") {
                rho = to_double(kv[1], "bump rho");
            } else if (kv[0] == "theta") {
                theta0 = to_double(kv[1], "bump theta");
            } else {
                throw ConfigError("unknown bump option: " + kv[0]);
            }
        }
        if (!(rho > 0.0)) throw ConfigError("bump term needs rho > 0");
        return GeneratorTerm::make_bump(site, rho, theta0);
    }

    throw ConfigError("unknown term kind: " + kind);
}

inline std::string fmt(double v) {
    std::ostringstream oss;
    oss.precision(17);
    oss << v;
    return oss.str();
}

inline std::string term_to_text(const GeneratorTerm& t) {
    std::ostringstream oss;
    switch (t.kind) {
        case GeneratorTerm::Kind::Constant: {
            oss << "constant";
            for (long r = 0; r < t.constant.rows(); ++r)
                for (long c = 0; c < t.constant.cols(); ++c) oss << ' ' << fmt(t.constant(r, c));
            break;
        }
        case GeneratorTerm::Kind::Rotation:
        case GeneratorTerm::Kind::Diagonal: {
            oss << (t.kind == GeneratorTerm::Kind::Rotation ? "rotation" : "diagonal");
            oss << " c0=" << fmt(t.field.c0);
            if (t.base_offset != 0) oss << " offset=" << t.base_offset;
            for (const auto& m : t.field.base_modes)
                oss << " base=" << m.k1 << ',' << m.k2 << ',' << fmt(m.c) << ',' << fmt(m.s);
            for (const auto& m : t.field.height_modes)
                oss << " height=" << m.m << ',' << fmt(m.c) << ',' << fmt(m.s);
            break;
        }
        case GeneratorTerm::Kind::Bump: {
            oss << "bump x=" << fmt(t.site.x(0)) << ',' << fmt(t.site.x(1)) << " t=" << fmt(t.site.t)
                << " rho=" << fmt(t.rho) << " theta=" << fmt(t.theta0);
            break;
        }
    }
    return oss.str();
}

}  // namespace detail_config

inline ExperimentConfig parse_config(const std::string& text) {
    using namespace detail_config;
    ExperimentConfig cfg;
    cfg.terms.clear();
    cfg.roof_modes.clear();
    std::string section;
    std::istringstream iss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(iss, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        if (t.front() == '[' && t.back() == ']') {
            section = t.substr(1, t.size() - 2);
            if (section != "model" && section != "cocycle" && section != "experiment")
                throw ConfigError("unknown section [" + section + "]");
            continue;
        }
        const std::size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));

        if (section == "model") {
            if (key == "matrix") {
                auto parts = split_ws(value);
                if (parts.size() != 4) throw ConfigError("matrix needs 4 integer entries");
                cfg.m00 = to_int(parts[0], "matrix");
                cfg.m01 = to_int(parts[1], "matrix");
                cfg.m10 = to_int(parts[2], "matrix");
                cfg.m11 = to_int(parts[3], "matrix");
            } else if (key == "roof") {
                if (value == "constant")
                    cfg.roof_constant = true;
                else if (value == "trig")
                    cfg.roof_constant = false;
                else
                    throw ConfigError("roof must be constant or trig");
            } else if (key == "roof_c0") {
                cfg.roof_c0 = to_double(value, "roof_c0");
            } else if (key == "roof_mode") {
                auto parts = split_ws(value);
                if (parts.size() != 4) throw ConfigError("roof_mode needs k1 k2 cos sin");
                cfg.roof_modes.push_back({static_cast<int>(to_int(parts[0], "roof k1")),
                                          static_cast<int>(to_int(parts[1], "roof k2")),
                                          to_double(parts[2], "roof cos"),
                                          to_double(parts[3], "roof sin")});
            } else {
                throw ConfigError("unknown [model] key: " + key);
            }
        } else if (section == "cocycle") {
            if (key == "d")
                cfg.d = static_cast<int>(to_int(value, "d"));
            else if (key == "alpha")
                cfg.alpha = to_double(value, "alpha");
            else if (key == "term")
                cfg.terms.push_back(parse_term(value));
            else
                throw ConfigError("unknown [cocycle] key: " + key);
        } else if (section == "experiment") {
            if (key == "name")
                cfg.name = value;
            else if (key == "seed")
                cfg.seed = static_cast<std::uint64_t>(to_int(value, "seed"));
            else if (key == "n_iter")
                cfg.n_iter = to_int(value, "n_iter");
            else if (key == "n_samples")
                cfg.n_samples = static_cast<int>(to_int(value, "n_samples"));
            else if (key == "n_atoms")
                cfg.n_atoms = static_cast<int>(to_int(value, "n_atoms"));
            else if (key == "n_transient")
                cfg.n_transient = static_cast<int>(to_int(value, "n_transient"));
            else if (key == "depth_window")
                cfg.depth_window = static_cast<int>(to_int(value, "depth_window"));
            else if (key == "n_pairs")
                cfg.n_pairs = static_cast<int>(to_int(value, "n_pairs"));
            else if (key == "grid")
                cfg.grid = static_cast<int>(to_int(value, "grid"));
            else if (key == "leaf_period")
                cfg.leaf_period = static_cast<int>(to_int(value, "leaf_period"));
            else if (key == "leaf_index")
                cfg.leaf_index = static_cast<int>(to_int(value, "leaf_index"));
            else if (key == "theta_min")
                cfg.theta_min = to_double(value, "theta_min");
            else if (key == "theta_max")
                cfg.theta_max = to_double(value, "theta_max");
            else if (key == "sweep_min")
                cfg.sweep_min = to_double(value, "sweep_min");
            else if (key == "sweep_max")
                cfg.sweep_max = to_double(value, "sweep_max");
            else if (key == "sweep_step")
                cfg.sweep_step = to_double(value, "sweep_step");
            else if (key == "window")
                cfg.window = static_cast<int>(to_int(value, "window"));
            else if (key == "rho_b")
                cfg.rho_b = to_double(value, "rho_b");
            else if (key == "sigma_eps")
                cfg.sigma_eps = to_double(value, "sigma_eps");
            else if (key == "delta")
                cfg.delta = to_double(value, "delta");
            else if (key == "n_perturb")
                cfg.n_perturb = static_cast<int>(to_int(value, "n_perturb"));
            else if (key == "tol")
                cfg.tol = to_double(value, "tol");
            else if (key == "pair_scale")
                cfg.pair_scale = to_double(value, "pair_scale");
            else if (key == "loop_j")
                cfg.loop_j = static_cast<int>(to_int(value, "loop_j"));
            else if (key == "out")
                cfg.out = value;
            else if (key == "format")
                cfg.format = value;
            else
                throw ConfigError("unknown [experiment] key: " + key);
        } else {
            throw ConfigError("key outside of any section: " + key);
        }
    }
    cfg.validate();
    return cfg;
}

inline std::string config_to_text(const ExperimentConfig& cfg) {
    using namespace detail_config;
    std::ostringstream oss;
    oss << "[model]\n";
    oss << "matrix = " << cfg.m00 << ' ' << cfg.m01 << ' ' << cfg.m10 << ' ' << cfg.m11 << '\n';
    oss << "roof = " << (cfg.roof_constant ? "constant" : "trig") << '\n';
    if (!cfg.roof_constant) {
        oss << "roof_c0 = " << fmt(cfg.roof_c0) << '\n';
        for (const auto& m : cfg.roof_modes)
            oss << "roof_mode = " << m.k1 << ' ' << m.k2 << ' ' << fmt(m.c) << ' ' << fmt(m.s)
                << '\n';
    }
    oss << "[cocycle]\n";
    oss << "d = " << cfg.d << '\n';
    oss << "alpha = " << fmt(cfg.alpha) << '\n';
    for (const auto& t : cfg.terms) oss << "term = " << term_to_text(t) << '\n';
    oss << "[experiment]\n";
    oss << "name = " << cfg.name << '\n';
    oss << "seed = " << cfg.seed << '\n';
    oss << "n_iter = " << cfg.n_iter << '\n';
    oss << "n_samples = " << cfg.n_samples << '\n';
    oss << "n_atoms = " << cfg.n_atoms << '\n';
    oss << "n_transient = " << cfg.n_transient << '\n';
    oss << "depth_window = " << cfg.depth_window << '\n';
    oss << "n_pairs = " << cfg.n_pairs << '\n';
    oss << "grid = " << cfg.grid << '\n';
    oss << "leaf_period = " << cfg.leaf_period << '\n';
    oss << "leaf_index = " << cfg.leaf_index << '\n';
    oss << "theta_min = " << fmt(cfg.theta_min) << '\n';
    oss << "theta_max = " << fmt(cfg.theta_max) << '\n';
    oss << "sweep_min = " << fmt(cfg.sweep_min) << '\n';
    oss << "sweep_max = " << fmt(cfg.sweep_max) << '\n';
    oss << "sweep_step = " << fmt(cfg.sweep_step) << '\n';
    oss << "window = " << cfg.window << '\n';
    oss << "rho_b = " << fmt(cfg.rho_b) << '\n';
    oss << "sigma_eps = " << fmt(cfg.sigma_eps) << '\n';
    oss << "delta = " << fmt(cfg.delta) << '\n';
    oss << "n_perturb = " << cfg.n_perturb << '\n';
    oss << "tol = " << fmt(cfg.tol) << '\n';
    oss << "pair_scale = " << fmt(cfg.pair_scale) << '\n';
    oss << "loop_j = " << cfg.loop_j << '\n';
    oss << "out = " << cfg.out << '\n';
    oss << "format = " << cfg.format << '\n';
    return oss.str();
}

/// The tuned reference cocycle terms: a diagonal coboundary twist around a
/// rotation field.  Exactly zero exponent (the twist telescopes), generic
/// response to the global rotation perturbation.
inline std::vector<GeneratorTerm> reference_terms() {
    ScalarField s;
    s.base_modes.push_back({1, 0, 0.6, 0.0});
    s.height_modes.push_back({1, 0.1, 0.0});
    ScalarField neg_s;
    neg_s.base_modes.push_back({1, 0, -0.6, 0.0});
    neg_s.height_modes.push_back({1, -0.1, 0.0});
    ScalarField theta;
    theta.c0 = 0.9;
    theta.height_modes.push_back({1, 1.5, 0.0});
    theta.base_modes.push_back({1, 0, 0.6, 0.0});
    return {GeneratorTerm::make_diagonal(s, 1), GeneratorTerm::make_rotation(theta),
            GeneratorTerm::make_diagonal(neg_s)};
}

/// Purely rotation-valued field: products are isometries, exponent exactly 0.
inline std::vector<GeneratorTerm> rotation_reference_terms() {
    ScalarField theta;
    theta.c0 = 0.7;
    theta.height_modes.push_back({1, 0.5, 0.2});
    theta.base_modes.push_back({1, 0, 0.4, 0.0});
    return {GeneratorTerm::make_rotation(theta)};
}

/// Weakly twisted variant, one-step certified bunched (used by the holonomy
/// validation defaults, where residual tolerances are tight).
inline std::vector<GeneratorTerm> weak_reference_terms() {
    ScalarField s;
    s.base_modes.push_back({1, 0, 0.15, 0.0});
    s.height_modes.push_back({1, 0.05, 0.0});
    ScalarField neg_s;
    neg_s.base_modes.push_back({1, 0, -0.15, 0.0});
    neg_s.height_modes.push_back({1, -0.05, 0.0});
    ScalarField theta;
    theta.c0 = 0.9;
    theta.height_modes.push_back({1, 0.8, 0.0});
    theta.base_modes.push_back({1, 0, 0.6, 0.0});
    return {GeneratorTerm::make_diagonal(s, 1), GeneratorTerm::make_rotation(theta),
            GeneratorTerm::make_diagonal(neg_s)};
}

/// Built-in defaults per experiment name (the cat-map suspension, d = 1).
inline ExperimentConfig default_config(const std::string& name) {
    ExperimentConfig cfg;
    cfg.name = name;
    cfg.terms = reference_terms();
    if (name == "spectrum") {
        cfg.terms = {GeneratorTerm::make_constant(diagonal_block(std::log(2.0), 1))};
        cfg.n_iter = 10000;
        cfg.leaf_period = 1;
        cfg.leaf_index = 0;
    } else if (name == "bunching") {
        cfg.terms = {GeneratorTerm::make_constant(diagonal_block(0.2, 1))};
        cfg.n_samples = 64;
    } else if (name == "holonomy") {
        cfg.terms = weak_reference_terms();
        cfg.n_pairs = 100;
        cfg.tol = 1e-10;
    } else if (name == "theta-scan") {
        cfg.n_iter = 1200;
        cfg.grid = 64;
    } else if (name == "su-breaking") {
        cfg.n_iter = 40000;
        cfg.n_samples = 24;
        cfg.grid = 40;
        cfg.n_pairs = 32;
    } else if (name == "openness") {
        cfg.n_iter = 30000;
        cfg.n_samples = 24;
        cfg.n_perturb = 20;
        cfg.grid = 40;
        cfg.n_pairs = 16;
    } else {
        throw ConfigError("unknown experiment name: " + name);
    }
    cfg.validate();
    return cfg;
}

}  // namespace sympflow

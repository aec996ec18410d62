#pragma once

#include <complex>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hamts/weyl.hpp"

namespace hamts {

using json = nlohmann::ordered_json;

// Configuration or config-validation failure; maps to exit code 2.
struct ConfigError : Error {
    using Error::Error;
};

struct SolverSettings {
    double rtol = 1e-10;
    double atol = 1e-12;
    double h = 0.0;  // 0 = per-cell default (len/1024)
    int scan_points = 2001;
    int max_count = 5;
    double lambda_lo = -1.0;
    double lambda_hi = 30.0;
    std::vector<double> b_list;
    std::vector<cxd> lambda_list;
    double verify_b = 0.0;  // 0 = horizon
    int parallel = 1;
};

struct OutputSettings {
    std::string format = "";  // empty = per-command default
    std::string path = "";    // empty = stdout
};

struct ProblemConfig {
    std::string digest;
    std::vector<Cell> cells;
    double t0 = 0, horizon = 0;
    bool force = false;
    int d = 0;
    bool use_sl = false;
    int sl_n = 0;
    std::vector<std::string> sl_p;
    std::vector<std::string> A, B, C, W1, W2;  // row-major expression strings
    Matrix alpha, beta;
    SolverSettings solver;
    OutputSettings output;
};

namespace detail {

inline std::uint64_t fnv1a(const std::string& data) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[static_cast<std::size_t>(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return s;
}

[[noreturn]] inline void cfg_fail(const std::string& path, const std::string& what) {
    throw ConfigError(path + ": " + what);
}

inline const json& need(const json& obj, const char* key, const std::string& path) {
    if (!obj.is_object() || !obj.contains(key)) cfg_fail(path + "." + key, "missing field");
    return obj.at(key);
}

inline double need_number(const json& v, const std::string& path) {
    if (!v.is_number()) cfg_fail(path, "expected a number");
    return v.get<double>();
}

inline int need_int(const json& v, const std::string& path) {
    if (!v.is_number_integer()) cfg_fail(path, "expected an integer");
    return v.get<int>();
}

// Complex entry: plain number or [re, im].
inline cxd need_complex(const json& v, const std::string& path) {
    if (v.is_number()) return cxd(v.get<double>(), 0.0);
    if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number())
        return cxd(v[0].get<double>(), v[1].get<double>());
    cfg_fail(path, "expected a number or [re, im] pair");
}

inline std::vector<std::string> need_string_list(const json& v, const std::string& path) {
    if (!v.is_array()) cfg_fail(path, "expected an array of expression strings");
    std::vector<std::string> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_string())
            cfg_fail(path + "[" + std::to_string(i) + "]", "expected an expression string");
        out.push_back(v[i].get<std::string>());
    }
    return out;
}

inline Matrix need_complex_matrix(const json& v, int rows, int cols, const std::string& path) {
    if (!v.is_array() || static_cast<int>(v.size()) != rows)
        cfg_fail(path, "expected " + std::to_string(rows) + " rows");
    Matrix m(rows, cols);
    for (int r = 0; r < rows; ++r) {
        const json& row = v[static_cast<std::size_t>(r)];
        if (!row.is_array() || static_cast<int>(row.size()) != cols)
            cfg_fail(path + "[" + std::to_string(r) + "]",
                     "expected " + std::to_string(cols) + " entries");
        for (int c = 0; c < cols; ++c)
            m(r, c) = need_complex(row[static_cast<std::size_t>(c)],
                                   path + "[" + std::to_string(r) + "][" + std::to_string(c) + "]");
    }
    return m;
}

inline Cell parse_cell(const json& v, const std::string& path) {
    if (!v.is_object() || v.size() != 1) cfg_fail(path, "expected a single-key cell object");
    if (v.contains("interval")) {
        const json& iv = v.at("interval");
        if (!iv.is_array() || iv.size() != 2) cfg_fail(path + ".interval", "expected [lo, hi]");
        return Interval{need_number(iv[0], path + ".interval[0]"),
                        need_number(iv[1], path + ".interval[1]")};
    }
    if (v.contains("points")) {
        const json& pv = v.at("points");
        if (!pv.is_array() || pv.empty()) cfg_fail(path + ".points", "expected a nonempty array");
        PointSet ps;
        for (std::size_t i = 0; i < pv.size(); ++i)
            ps.pts.push_back(need_number(pv[i], path + ".points[" + std::to_string(i) + "]"));
        return ps;
    }
    if (v.contains("arithmetic")) {
        const json& av = v.at("arithmetic");
        double start = need_number(need(av, "start", path + ".arithmetic"), path + ".arithmetic.start");
        double step = need_number(need(av, "step", path + ".arithmetic"), path + ".arithmetic.step");
        int count = need_int(need(av, "count", path + ".arithmetic"), path + ".arithmetic.count");
        if (step <= 0 || count < 1) cfg_fail(path + ".arithmetic", "step must be > 0, count >= 1");
        PointSet ps;
        for (int k = 0; k < count; ++k) ps.pts.push_back(start + step * k);
        return ps;
    }
    if (v.contains("geometric")) {
        const json& gv = v.at("geometric");
        double start = need_number(need(gv, "start", path + ".geometric"), path + ".geometric.start");
        double ratio = need_number(need(gv, "ratio", path + ".geometric"), path + ".geometric.ratio");
        int count = need_int(need(gv, "count", path + ".geometric"), path + ".geometric.count");
        if (start <= 0 || ratio <= 1 || count < 1)
            cfg_fail(path + ".geometric", "requires start > 0, ratio > 1, count >= 1");
        PointSet ps;
        double t = start;
        for (int k = 0; k < count; ++k, t *= ratio) ps.pts.push_back(t);
        return ps;
    }
    cfg_fail(path, "unknown cell kind (expected interval/points/arithmetic/geometric)");
}

}  // namespace detail

inline ProblemConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    std::string raw = ss.str();

    json doc;
    try {
        doc = json::parse(raw);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config parse error in " + path + ": " + e.what());
    }

    ProblemConfig cfg;
    cfg.digest = detail::hex64(detail::fnv1a(raw));

    const json& tsj = detail::need(doc, "timescale", "config");
    const json& cellsj = detail::need(tsj, "cells", "timescale");
    if (!cellsj.is_array() || cellsj.empty())
        detail::cfg_fail("timescale.cells", "expected a nonempty array");
    for (std::size_t i = 0; i < cellsj.size(); ++i)
        cfg.cells.push_back(
            detail::parse_cell(cellsj[i], "timescale.cells[" + std::to_string(i) + "]"));
    cfg.t0 = detail::need_number(detail::need(tsj, "t0", "timescale"), "timescale.t0");
    cfg.horizon =
        detail::need_number(detail::need(tsj, "horizon", "timescale"), "timescale.horizon");
    if (tsj.contains("force")) cfg.force = tsj.at("force").get<bool>();

    cfg.d = detail::need_int(detail::need(doc, "dimension", "config"), "dimension");
    if (cfg.d < 1) detail::cfg_fail("dimension", "must be >= 1");

    if (doc.contains("sturm_liouville")) {
        const json& sl = doc.at("sturm_liouville");
        cfg.use_sl = true;
        cfg.sl_n = detail::need_int(detail::need(sl, "n", "sturm_liouville"), "sturm_liouville.n");
        cfg.sl_p = detail::need_string_list(detail::need(sl, "p", "sturm_liouville"),
                                            "sturm_liouville.p");
        if (cfg.sl_n != cfg.d)
            detail::cfg_fail("sturm_liouville.n", "must equal dimension d");
    } else {
        const json& co = detail::need(doc, "coefficients", "config");
        cfg.A = detail::need_string_list(detail::need(co, "A", "coefficients"), "coefficients.A");
        cfg.B = detail::need_string_list(detail::need(co, "B", "coefficients"), "coefficients.B");
        cfg.C = detail::need_string_list(detail::need(co, "C", "coefficients"), "coefficients.C");
        cfg.W1 =
            detail::need_string_list(detail::need(co, "W1", "coefficients"), "coefficients.W1");
        cfg.W2 =
            detail::need_string_list(detail::need(co, "W2", "coefficients"), "coefficients.W2");
    }

    const json& bj = detail::need(doc, "boundary", "config");
    cfg.alpha = detail::need_complex_matrix(detail::need(bj, "alpha", "boundary"), cfg.d,
                                            2 * cfg.d, "boundary.alpha");
    cfg.beta = detail::need_complex_matrix(detail::need(bj, "beta", "boundary"), cfg.d,
                                           2 * cfg.d, "boundary.beta");

    if (doc.contains("solver")) {
        const json& so = doc.at("solver");
        auto opt_num = [&](const char* key, double& slot) {
            if (so.contains(key)) slot = detail::need_number(so.at(key), std::string("solver.") + key);
        };
        auto opt_int = [&](const char* key, int& slot) {
            if (so.contains(key)) slot = detail::need_int(so.at(key), std::string("solver.") + key);
        };
        opt_num("rtol", cfg.solver.rtol);
        opt_num("atol", cfg.solver.atol);
        opt_num("h", cfg.solver.h);
        opt_int("scan_points", cfg.solver.scan_points);
        opt_int("max_count", cfg.solver.max_count);
        opt_num("verify_b", cfg.solver.verify_b);
        opt_int("parallel", cfg.solver.parallel);
        if (so.contains("lambda_range")) {
            const json& lr = so.at("lambda_range");
            if (!lr.is_array() || lr.size() != 2)
                detail::cfg_fail("solver.lambda_range", "expected [lo, hi]");
            cfg.solver.lambda_lo = detail::need_number(lr[0], "solver.lambda_range[0]");
            cfg.solver.lambda_hi = detail::need_number(lr[1], "solver.lambda_range[1]");
        }
        if (so.contains("b_list")) {
            const json& bl = so.at("b_list");
            if (!bl.is_array()) detail::cfg_fail("solver.b_list", "expected an array");
            for (std::size_t i = 0; i < bl.size(); ++i)
                cfg.solver.b_list.push_back(
                    detail::need_number(bl[i], "solver.b_list[" + std::to_string(i) + "]"));
        }
        if (so.contains("lambda_list")) {
            const json& ll = so.at("lambda_list");
            if (!ll.is_array()) detail::cfg_fail("solver.lambda_list", "expected an array");
            for (std::size_t i = 0; i < ll.size(); ++i)
                cfg.solver.lambda_list.push_back(detail::need_complex(
                    ll[i], "solver.lambda_list[" + std::to_string(i) + "]"));
        }
    }
    if (doc.contains("output")) {
        const json& ou = doc.at("output");
        if (ou.contains("format")) cfg.output.format = ou.at("format").get<std::string>();
        if (ou.contains("path")) cfg.output.path = ou.at("path").get<std::string>();
    }
    return cfg;
}

// Validated problem objects built from a config.
struct Problem {
    ProblemConfig cfg;
    TimeScale ts;
    CoefficientField field;
    BoundaryPair bp;
    SpectrumOptions opts;

    std::vector<double> b_list() const {
        std::vector<double> bl = cfg.solver.b_list;
        if (bl.empty())
            bl = {ts.t0() + (ts.horizon() - ts.t0()) * 0.25,
                  ts.t0() + (ts.horizon() - ts.t0()) * 0.5, ts.horizon()};
        for (double& b : bl) b = ts.nearest(b);
        return bl;
    }
    cxd lambda_probe() const {
        if (!cfg.solver.lambda_list.empty()) return cfg.solver.lambda_list.front();
        return cxd(0.0, 1.0);
    }
    double verify_b() const {
        return cfg.solver.verify_b > 0 ? ts.snap(cfg.solver.verify_b) : ts.horizon();
    }
};

inline Problem build_problem(const ProblemConfig& cfg) {
    auto wrap = [](const std::string& path, auto&& fn) {
        try {
            return fn();
        } catch (const ConfigError&) {
            throw;
        } catch (const Error& e) {
            throw ConfigError(path + ": " + e.what());
        }
    };
    TimeScale ts = wrap("timescale", [&] {
        return TimeScale::build(cfg.cells, cfg.t0, cfg.horizon, cfg.force);
    });
    SpectrumOptions opts;
    opts.h = cfg.solver.h;
    opts.prop.rtol = cfg.solver.rtol;
    opts.prop.atol = cfg.solver.atol;
    opts.scan_points = cfg.solver.scan_points;
    opts.parallel = cfg.solver.parallel;

    Grid sample_grid = wrap("timescale", [&] {
        return detail::problem_grid(ts, ts.horizon(), opts);
    });
    CoefficientField field = wrap(cfg.use_sl ? "sturm_liouville" : "coefficients", [&] {
        if (cfg.use_sl) return from_sturm_liouville(cfg.sl_n, cfg.sl_p, ts, sample_grid);
        return build_coefficients(cfg.d, cfg.A, cfg.B, cfg.C, cfg.W1, cfg.W2, sample_grid);
    });
    BoundaryPair bp = wrap("boundary", [&] { return validate_boundary(cfg.alpha, cfg.beta); });

    for (std::size_t i = 0; i < cfg.solver.b_list.size(); ++i)
        wrap("solver.b_list[" + std::to_string(i) + "]", [&] {
            return ts.snap(cfg.solver.b_list[i]);
        });
    if (cfg.solver.verify_b > 0)
        wrap("solver.verify_b", [&] { return ts.snap(cfg.solver.verify_b); });

    return Problem{cfg, std::move(ts), std::move(field), std::move(bp), opts};
}

inline Problem load_problem(const std::string& path) { return build_problem(load_config(path)); }

}  // namespace hamts

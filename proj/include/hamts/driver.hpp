#pragma once

#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "hamts/config.hpp"

namespace hamts {

struct Report {
    json body;
    std::string csv;
    bool is_csv = false;
    bool all_pass = true;  // meaningful for verify
};

namespace detail {

inline std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline json complex_json(cxd v) { return json::array({v.real(), v.imag()}); }

inline json matrix_json(const Matrix& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(complex_json(m(r, c)));
        rows.push_back(row);
    }
    return rows;
}

// dense / scattered / mixed, which selects verify tolerances
inline std::string grid_kind(const Grid& g) {
    bool dense = false, scattered = false;
    for (std::size_t k = 1; k < g.size(); ++k)
        (g.nu(k) > 0 ? scattered : dense) = true;
    if (dense && scattered) return "mixed";
    return scattered ? "scattered" : "dense";
}

// Random polynomial paths in the normalized variable s = (t-a)/(b-a), which
// keeps values O(1) on every scale.  Deterministic for a fixed seed.
inline SampledPath random_poly_path(const Grid& g, std::mt19937& rng, int degree, int dim) {
    std::uniform_real_distribution<double> coef(-1.0, 1.0);
    std::vector<std::vector<cxd>> coefs(static_cast<std::size_t>(dim));
    for (auto& cs : coefs)
        for (int k = 0; k <= degree; ++k) cs.emplace_back(coef(rng), coef(rng));
    SampledPath p;
    p.grid = g;
    p.values.reserve(g.size());
    double a = g.a(), len = std::max(g.b() - g.a(), 1e-300);
    for (std::size_t k = 0; k < g.size(); ++k) {
        double s = (g.t(k) - a) / len;
        Vector v(dim);
        for (int c = 0; c < dim; ++c) {
            cxd acc(0, 0);
            double pw = 1.0;
            for (int j = 0; j <= degree; ++j, pw *= s)
                acc += coefs[static_cast<std::size_t>(c)][static_cast<std::size_t>(j)] * pw;
            v(c) = acc;
        }
        p.values.push_back(v);
    }
    return p;
}

}  // namespace detail

namespace driver_detail {

inline json eigenlist_json(const EigenList& el) {
    json out = json::object();
    json vals = json::array(), mults = json::array();
    for (const auto& g : el.groups) {
        vals.push_back(g.lambda);
        mults.push_back(g.multiplicity);
    }
    out["eigenvalues"] = vals;
    out["multiplicities"] = mults;
    out["expanded"] = el.expanded();
    return out;
}

inline Report run_eig(const Problem& p) {
    const auto& s = p.cfg.solver;
    EigenList el = find_eigenvalues(p.field, p.ts, p.bp, p.ts.horizon(), s.lambda_lo,
                                    s.lambda_hi, s.max_count, p.opts);

    // Orthonormality diagnostics across all located eigenfunctions.
    std::vector<SampledPath> funcs;
    for (const auto& g : el.groups)
        for (const auto& u : g.u)
            funcs.push_back(eigenfunction_path(p.field, p.ts, p.ts.horizon(), g.lambda, u,
                                               p.opts));
    double gram_err = 0.0;
    for (std::size_t i = 0; i < funcs.size(); ++i)
        for (std::size_t j = 0; j <= i; ++j) {
            cxd ip = weighted_inner_product(p.field, funcs[i], funcs[j]);
            double want = (i == j) ? 1.0 : 0.0;
            gram_err = std::max(gram_err, std::abs(ip - want));
        }

    Report rep;
    rep.body["command"] = "eig";
    rep.body["config_digest"] = p.cfg.digest;
    rep.body["b"] = p.ts.horizon();
    rep.body["lambda_range"] = json::array({s.lambda_lo, s.lambda_hi});
    rep.body["results"] = eigenlist_json(el);
    rep.body["diagnostics"] = {{"gram_identity_error", gram_err},
                               {"eigenfunction_count", funcs.size()}};
    if (p.cfg.output.format == "csv") {
        rep.is_csv = true;
        std::string csv = "j,lambda,multiplicity\n";
        int j = 0;
        for (const auto& g : el.groups) {
            csv += std::to_string(j++) + "," + detail::num(g.lambda) + "," +
                   std::to_string(g.multiplicity) + "\n";
        }
        rep.csv = csv;
    }
    return rep;
}

inline Report run_weyl_trace(const Problem& p) {
    cxd lambda = p.lambda_probe();
    if (lambda.imag() == 0.0)
        throw ConfigError("solver.lambda_list: weyl-trace needs Im lambda != 0");
    std::vector<double> bl = p.b_list();

    std::vector<WeylData> wd(bl.size()), wdc(bl.size());
    parallel_for(bl.size(), p.opts.parallel, [&](std::size_t i) {
        wd[i] = weyl_F_endpoint(p.field, p.bp, lambda, p.ts, bl[i], p.opts);
        wdc[i] = weyl_F_endpoint(p.field, p.bp, std::conj(lambda), p.ts, bl[i], p.opts);
    });

    const int d = p.bp.d;
    std::string csv = "b,j,mu_j,radius_fro";
    for (int r = 1; r <= d; ++r)
        for (int c = 1; c <= d; ++c) {
            csv += ",center_re_" + std::to_string(r) + std::to_string(c);
            csv += ",center_im_" + std::to_string(r) + std::to_string(c);
        }
    csv += "\n";
    json rows = json::array();
    for (std::size_t i = 0; i < bl.size(); ++i) {
        WeylDisk disk = weyl_disk(wd[i], wdc[i]);
        Eigen::VectorXd mu = herm_eigenvalues(wd[i].F22);
        double rfro = disk.radiusL.norm();
        for (int j = 0; j < d; ++j) {
            std::string line = detail::num(bl[i]) + "," + std::to_string(j + 1) + "," +
                               detail::num(mu(j)) + "," + detail::num(rfro);
            for (int r = 0; r < d; ++r)
                for (int c = 0; c < d; ++c) {
                    line += "," + detail::num(disk.center(r, c).real());
                    line += "," + detail::num(disk.center(r, c).imag());
                }
            csv += line + "\n";
            rows.push_back({{"b", bl[i]},
                            {"j", j + 1},
                            {"mu_j", mu(j)},
                            {"radius_fro", rfro},
                            {"center", detail::matrix_json(disk.center)}});
        }
    }
    Report rep;
    rep.body["command"] = "weyl-trace";
    rep.body["config_digest"] = p.cfg.digest;
    rep.body["lambda"] = detail::complex_json(lambda);
    rep.body["rows"] = rows;
    rep.csv = csv;
    rep.is_csv = p.cfg.output.format != "json";
    return rep;
}

inline json limit_report_json(const LimitReport& lr) {
    json out;
    out["rank"] = lr.rank;
    out["gamma"] = lr.gamma;
    out["b_list"] = lr.b_list;
    out["mu_tracks"] = lr.mu;
    out["center"] = detail::matrix_json(lr.C0);
    out["radius"] = detail::matrix_json(lr.R0);
    return out;
}

inline Report run_classify(const Problem& p) {
    cxd lp = p.lambda_probe();
    if (lp.imag() <= 0.0) lp = cxd(0.0, 1.0);
    cxd lm = std::conj(lp);
    std::vector<double> bl = p.b_list();
    if (bl.size() < 3)
        throw ConfigError("solver.b_list: classify needs at least 3 increasing entries");
    ClassificationReport cr = classify(p.field, p.ts, p.bp, lp, lm, bl, p.opts);

    Report rep;
    rep.body["command"] = "classify";
    rep.body["config_digest"] = p.cfg.digest;
    rep.body["lambda_plus"] = detail::complex_json(lp);
    rep.body["lambda_minus"] = detail::complex_json(lm);
    rep.body["results"] = {
        {"label", to_string(cr.label)},
        {"d", cr.d},
        {"d_plus", cr.d_plus},
        {"d_minus", cr.d_minus},
        {"r_plus", cr.r_plus},
        {"r_minus", cr.r_minus},
    };
    rep.body["square_summable"] = {
        {"count_plus", cr.count_plus.count},
        {"count_minus", cr.count_minus.count},
        {"direct_count_plus", cr.count_plus.direct_count},
        {"direct_count_minus", cr.count_minus.direct_count},
        {"counts_consistent", cr.counts_consistent},
    };
    rep.body["checks"] = {
        {"largest_defect_checked", cr.largest_defect_checked},
        {"largest_defect_ok", cr.largest_defect_ok},
        {"real_coefficients", cr.real_coefficients},
        {"real_symmetry_ok", cr.real_symmetry_ok},
    };
    rep.body["diagnostics"] = {
        {"limit_plus", limit_report_json(cr.limit_plus)},
        {"limit_minus", limit_report_json(cr.limit_minus)},
        {"norm_tracks_plus", cr.count_plus.norms},
        {"norm_tracks_minus", cr.count_minus.norms},
    };
    rep.all_pass = cr.counts_consistent && cr.largest_defect_ok && cr.real_symmetry_ok;
    return rep;
}

inline Report run_verify(const Problem& p) {
    const double vb = p.verify_b();
    Grid g = detail::problem_grid(p.ts, vb, p.opts);
    std::string kind = detail::grid_kind(g);
    bool discrete = (kind == "scattered");

    json checks = json::array();
    bool all = true;
    auto push = [&](const std::string& name, double residual, double tol) {
        bool pass = residual <= tol;
        all = all && pass;
        checks.push_back({{"check", name},
                          {"residual", residual},
                          {"tolerance", tol},
                          {"pass", pass}});
    };

    // 1. symplectic constancy at the complex probe, scale-normalized
    cxd lam = p.lambda_probe();
    if (lam.imag() == 0.0) lam = cxd(0.0, 1.0);
    Matrix omega = weyl_omega(p.bp.alpha);
    Trajectory Yl = propagate_fundamental(p.field, lam, omega, g, p.opts.prop);
    Trajectory Yc = propagate_fundamental(p.field, std::conj(lam), omega, g, p.opts.prop);
    {
        Matrix J = p.field.J();
        Matrix ref = Yc.initial().adjoint() * J * Yl.initial();
        double worst = 0.0;
        for (std::size_t k = 0; k < Yl.samples.size(); ++k) {
            double scale = std::max(1.0, Yc.samples[k].norm() * Yl.samples[k].norm());
            worst = std::max(
                worst, (Yc.samples[k].adjoint() * J * Yl.samples[k] - ref).norm() / scale);
        }
        push("symplectic_constancy", worst, discrete ? 1e-12 : 1e-7);
    }

    // 2. Liouville normalization at a real lambda (config verify_lambda via
    // lambda_list second entry when present, else 0.5)
    {
        double lr = 0.5;
        for (const auto& l : p.cfg.solver.lambda_list)
            if (l.imag() == 0.0) lr = l.real();
        Trajectory tr = propagate_fundamental(p.field, cxd(lr, 0.0),
                                              Matrix::Identity(2 * p.bp.d, 2 * p.bp.d), g,
                                              p.opts.prop);
        push("liouville_normalization", liouville_residual(tr), discrete ? 1e-10 : 1e-7);
    }

    // 3. Lagrange identity on seeded random polynomial path pairs
    {
        std::mt19937 rng(20240401u);
        double worst = 0.0;
        for (int rep = 0; rep < 5; ++rep) {
            SampledPath x = detail::random_poly_path(g, rng, 2, 2 * p.bp.d);
            SampledPath y = detail::random_poly_path(g, rng, 2, 2 * p.bp.d);
            worst = std::max(worst, lagrange_residual(x, y, p.field, g.a(), g.b()));
        }
        push("lagrange_identity", worst, discrete ? 1e-9 : 1e-6);
    }

    // 4-5. F dual path and the block identity, normalized by ||F||
    {
        WeylBasis wb = build_Y(p.field, p.bp, lam, g, p.opts.prop);
        WeylBasis wbc = build_Y(p.field, p.bp, std::conj(lam), g, p.opts.prop);
        WeylData wd = weyl_F(p.field, wb);
        WeylData wdc = weyl_F(p.field, wbc);
        double scale = std::max(1.0, wd.F.norm());
        push("weyl_dual_path", wd.dual_residual / scale, 1e-7);
        Matrix lhs = wd.F12 * wd.F22.fullPivLu().solve(wd.F12.adjoint()) - wd.F11;
        Matrix rhs = wdc.F22.fullPivLu().solve(Matrix::Identity(p.bp.d, p.bp.d));
        push("weyl_block_identity", (lhs - rhs).norm() / std::max(1.0, rhs.norm()), 1e-7);

        // 6. Herglotz sign and conjugate symmetry of M
        Matrix Mi = m_function(wb, p.bp.beta);
        Matrix Mc = m_function(wbc, p.bp.beta);
        push("m_conjugate_symmetry", (Mc.adjoint() - Mi).norm(), 1e-8);
        double sgn = lam.imag() > 0 ? 1.0 : -1.0;
        double herg = min_eig_herm(sgn * imag_part_matrix(Mi));
        checks.push_back({{"check", "herglotz_sign"},
                          {"min_eig_im_M", herg},
                          {"pass", herg > 0.0}});
        all = all && (herg > 0.0);

        // 7. truncated-norm bound for M on the circle at verify_b
        WeylDisk disk = weyl_disk(wd, wdc);
        double slack = -1e300;
        for (int k = 0; k < 8; ++k) {
            double th = 2.0 * M_PI * k / 8.0;
            Matrix U = Matrix::Identity(p.bp.d, p.bp.d) * std::polar(1.0, th);
            slack = std::max(slack,
                             truncated_norm_bound_slack(p.field, wb, circle_point(disk, U)));
        }
        push("truncated_norm_bound", slack, 1e-6);
    }

    // 8. disk nesting across the b-list
    {
        std::vector<double> bl = p.b_list();
        if (bl.size() >= 2) {
            std::vector<WeylData> wds(bl.size()), wdcs(bl.size());
            parallel_for(bl.size(), p.opts.parallel, [&](std::size_t i) {
                wds[i] = weyl_F_endpoint(p.field, p.bp, lam, p.ts, bl[i], p.opts);
                wdcs[i] = weyl_F_endpoint(p.field, p.bp, std::conj(lam), p.ts, bl[i], p.opts);
            });
            double worst = -1e300;
            for (std::size_t late = 1; late < bl.size(); ++late) {
                WeylDisk disk = weyl_disk(wds[late], wdcs[late]);
                for (int k = 0; k < 8; ++k) {
                    Matrix U = Matrix::Identity(p.bp.d, p.bp.d) *
                               std::polar(1.0, 2.0 * M_PI * k / 8.0);
                    Matrix M = circle_point(disk, U);
                    for (std::size_t early = 0; early < late; ++early)
                        worst = std::max(worst, disk_membership(M, wds[early]));
                }
            }
            push("disk_nesting", worst, 1e-7);
        }
    }

    Report rep;
    rep.body["command"] = "verify";
    rep.body["config_digest"] = p.cfg.digest;
    rep.body["scale_kind"] = kind;
    rep.body["verify_b"] = vb;
    rep.body["lambda"] = detail::complex_json(lam);
    rep.body["checks"] = checks;
    rep.body["all_pass"] = all;
    rep.all_pass = all;
    return rep;
}

}  // namespace driver_detail

inline Report run(const std::string& command, const Problem& p) {
    if (command == "eig") return driver_detail::run_eig(p);
    if (command == "weyl-trace") return driver_detail::run_weyl_trace(p);
    if (command == "classify") return driver_detail::run_classify(p);
    if (command == "verify") return driver_detail::run_verify(p);
    throw ConfigError("unknown command: " + command +
                      " (expected eig | weyl-trace | classify | verify)");
}

}  // namespace hamts

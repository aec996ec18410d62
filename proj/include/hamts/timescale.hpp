#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "hamts/errors.hpp"

namespace hamts {

// One building block of a time scale: a closed real interval (every point
// dense) or a finite strictly increasing list of isolated points.
struct Interval {
    double lo;
    double hi;
};
struct PointSet {
    std::vector<double> pts;
};
using Cell = std::variant<Interval, PointSet>;

inline double cell_min(const Cell& c) {
    return std::holds_alternative<Interval>(c) ? std::get<Interval>(c).lo
                                               : std::get<PointSet>(c).pts.front();
}
inline double cell_max(const Cell& c) {
    return std::holds_alternative<Interval>(c) ? std::get<Interval>(c).hi
                                               : std::get<PointSet>(c).pts.back();
}

struct Jumps {
    double rho;
    double sigma;
    double nu;
};

namespace detail {
inline double match_tol(double t) { return 1e-9 * std::max(1.0, std::abs(t)); }
inline std::string fmt(double v) {
    std::ostringstream os;
    os.precision(15);
    os << v;
    return os.str();
}
}  // namespace detail

// A Sturmian time scale truncated to [min, horizon].  Immutable after build;
// jump operators and membership tests are pure.
class TimeScale {
  public:
    // Validates cell geometry, membership of t0 and horizon, and the Sturmian
    // commutation sigma(rho(t)) == rho(sigma(t)) at every representable point
    // strictly between min and horizon.  With force=true the Sturmian check is
    // recorded instead of enforced (the right shift then refuses to run).
    static TimeScale build(std::vector<Cell> cells, double t0, double horizon,
                           bool force = false) {
        if (cells.empty()) throw ValidationError("time scale: no cells given");
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (const auto* iv = std::get_if<Interval>(&cells[i])) {
                if (!(iv->lo < iv->hi) || !std::isfinite(iv->lo) || !std::isfinite(iv->hi))
                    throw ValidationError("time scale: interval cell " + std::to_string(i) +
                                          " requires finite lo < hi");
            } else {
                const auto& pts = std::get<PointSet>(cells[i]).pts;
                if (pts.empty())
                    throw ValidationError("time scale: point cell " + std::to_string(i) +
                                          " is empty");
                for (std::size_t k = 0; k + 1 < pts.size(); ++k)
                    if (!(pts[k] < pts[k + 1]))
                        throw ValidationError("time scale: point cell " + std::to_string(i) +
                                              " is not strictly increasing at entry " +
                                              std::to_string(k + 1));
            }
        }
        std::sort(cells.begin(), cells.end(),
                  [](const Cell& a, const Cell& b) { return cell_min(a) < cell_min(b); });
        for (std::size_t i = 0; i + 1 < cells.size(); ++i)
            if (!(cell_max(cells[i]) < cell_min(cells[i + 1])))
                throw ValidationError(
                    "time scale: cells " + std::to_string(i) + " and " + std::to_string(i + 1) +
                    " overlap or abut (max " + detail::fmt(cell_max(cells[i])) + " vs min " +
                    detail::fmt(cell_min(cells[i + 1])) + ")");

        TimeScale ts;
        ts.cells_ = std::move(cells);
        ts.min_ = cell_min(ts.cells_.front());
        if (!ts.find(t0))
            throw ValidationError("time scale: t0 = " + detail::fmt(t0) + " is not in the scale");
        ts.t0_ = *ts.find(t0);
        if (!ts.find(horizon))
            throw ValidationError("time scale: horizon = " + detail::fmt(horizon) +
                                  " is not in the scale");
        ts.horizon_ = *ts.find(horizon);
        if (!(ts.t0_ < ts.horizon_))
            throw ValidationError("time scale: horizon must lie strictly above t0");

        // Sturmian gate.  Representative points: all scattered points and all
        // interval endpoints in (min, horizon); dense interior points satisfy
        // the commutation trivially, and the two clamped ends are truncation
        // artifacts rather than scale structure.
        ts.sturmian_ = true;
        for (double t : ts.representatives()) {
            if (!(t > ts.min_) || !(t < ts.horizon_)) continue;
            double sr = ts.sigma_raw(ts.rho_raw(t));
            double rs = ts.rho_raw(ts.sigma_raw(t));
            if (std::abs(sr - rs) > detail::match_tol(t)) {
                ts.sturmian_ = false;
                ts.violation_ = t;
                if (!force)
                    throw ValidationError("time scale: Sturmian condition violated at t = " +
                                          detail::fmt(t) + ": sigma(rho(t)) = " + detail::fmt(sr) +
                                          " but rho(sigma(t)) = " + detail::fmt(rs));
                break;
            }
        }
        return ts;
    }

    double t0() const { return t0_; }
    double horizon() const { return horizon_; }
    double min() const { return min_; }
    bool sturmian() const { return sturmian_; }
    std::optional<double> first_violation() const { return violation_; }
    const std::vector<Cell>& cells() const { return cells_; }

    bool contains(double t) const { return find(t).has_value(); }

    // Exact representation value for t, matched within a relative tolerance.
    double snap(double t) const {
        auto s = find(t);
        if (!s)
            throw ValidationError("t = " + detail::fmt(t) + " is not in the time scale");
        return *s;
    }

    // Nearest scale point to t inside [min, horizon].
    double nearest(double t) const {
        double best = min_;
        double bestd = std::abs(t - min_);
        auto consider = [&](double v) {
            double dd = std::abs(t - v);
            if (dd < bestd) { bestd = dd; best = v; }
        };
        for (const auto& c : cells_) {
            if (const auto* iv = std::get_if<Interval>(&c)) {
                consider(std::clamp(t, iv->lo, std::min(iv->hi, horizon_)));
            } else {
                for (double p : std::get<PointSet>(c).pts)
                    if (p <= horizon_) consider(p);
            }
        }
        return best;
    }

    // Jump operators with the truncation conventions rho(min) = min and
    // sigma(horizon) = horizon.
    Jumps jumps(double t) const {
        double tt = snap(t);
        if (tt > horizon_ + detail::match_tol(tt))
            throw ValidationError("t = " + detail::fmt(t) + " lies beyond the horizon");
        double r = rho_raw(tt);
        double s = std::min(sigma_raw(tt), horizon_);
        return Jumps{r, s, tt - r};
    }

  private:
    std::vector<Cell> cells_;
    double t0_ = 0, horizon_ = 0, min_ = 0;
    bool sturmian_ = true;
    std::optional<double> violation_;

    std::optional<double> find(double t) const {
        double tol = detail::match_tol(t);
        for (const auto& c : cells_) {
            if (const auto* iv = std::get_if<Interval>(&c)) {
                if (t >= iv->lo - tol && t <= iv->hi + tol)
                    return std::clamp(t, iv->lo, iv->hi);
            } else {
                const auto& pts = std::get<PointSet>(c).pts;
                auto it = std::lower_bound(pts.begin(), pts.end(), t - tol);
                if (it != pts.end() && std::abs(*it - t) <= tol) return *it;
            }
        }
        return std::nullopt;
    }

    // sup{s in scale : s < t}; returns t itself at the scale minimum.
    // t must be a snapped value.
    double rho_raw(double t) const {
        double tol = detail::match_tol(t);
        double best = t;  // rho(min) = min
        for (const auto& c : cells_) {
            if (!(cell_min(c) < t - tol)) break;  // cell starts at or after t
            if (const auto* iv = std::get_if<Interval>(&c)) {
                if (t <= iv->hi + tol) return t;  // t in (lo, hi]: left-dense
                best = iv->hi;                    // cell entirely below t
            } else {
                const auto& pts = std::get<PointSet>(c).pts;
                auto it = std::lower_bound(pts.begin(), pts.end(), t - tol);
                if (it != pts.begin()) best = *std::prev(it);
            }
        }
        return best;
    }

    // inf{s in scale : s > t}; unclamped (jumps() applies the horizon clamp).
    double sigma_raw(double t) const {
        double tol = detail::match_tol(t);
        for (const auto& c : cells_) {
            if (cell_max(c) <= t + tol) continue;  // cell entirely at/below t
            if (const auto* iv = std::get_if<Interval>(&c)) {
                if (t >= iv->lo - tol) return t;  // t in [lo, hi): right-dense
                return iv->lo;                    // cell entirely above t
            }
            const auto& pts = std::get<PointSet>(c).pts;
            auto it = std::upper_bound(pts.begin(), pts.end(), t + tol);
            if (it != pts.end()) return *it;
        }
        return t;  // sigma(sup) = sup
    }

    std::vector<double> representatives() const {
        std::vector<double> out;
        for (const auto& c : cells_) {
            if (const auto* iv = std::get_if<Interval>(&c)) {
                out.push_back(iv->lo);
                out.push_back(iv->hi);
            } else {
                for (double p : std::get<PointSet>(c).pts) out.push_back(p);
            }
        }
        std::sort(out.begin(), out.end());
        return out;
    }
};

enum class PointKind { dense, scattered };

struct GridPoint {
    double t;
    double nu;  // t - rho(t); 0 on dense points and at the scale minimum
    PointKind kind;
};

// Evaluation grid over a time-scale interval [a, b]: every scattered point of
// the scale appears exactly once with its true graininess, and each dense
// stretch is subdivided uniformly with an even interval count and spacing <= h.
struct Grid {
    std::vector<GridPoint> points;
    double refinement = 0.0;
    bool sturmian = true;

    std::size_t size() const { return points.size(); }
    double t(std::size_t k) const { return points[k].t; }
    double nu(std::size_t k) const { return points[k].nu; }
    double a() const { return points.front().t; }
    double b() const { return points.back().t; }

    std::size_t index_of(double t) const {
        for (std::size_t k = 0; k < points.size(); ++k)
            if (std::abs(points[k].t - t) <= detail::match_tol(t)) return k;
        throw ValidationError("t = " + detail::fmt(t) + " is not a grid point");
    }
};

inline Grid make_grid(const TimeScale& ts, double a, double b, double h) {
    if (!(h > 0)) throw ValidationError("grid: refinement h must be positive");
    double aa = ts.snap(a);
    double bb = ts.snap(b);
    if (aa > bb) throw ValidationError("grid: a must not exceed b");

    Grid g;
    g.refinement = h;
    g.sturmian = ts.sturmian();
    g.points.push_back({aa, ts.jumps(aa).nu, ts.jumps(aa).nu > 0 ? PointKind::scattered
                                                                 : PointKind::dense});
    double cur = aa;
    while (cur < bb - detail::match_tol(bb)) {
        // Dense continuation inside an interval cell?
        const Interval* host = nullptr;
        for (const auto& c : ts.cells())
            if (const auto* iv = std::get_if<Interval>(&c))
                if (cur >= iv->lo - detail::match_tol(cur) && cur < iv->hi - detail::match_tol(cur))
                    host = iv;
        if (host) {
            double end = std::min(host->hi, bb);
            double len = end - cur;
            auto n = static_cast<std::size_t>(std::ceil(len / (2.0 * h)));
            n = 2 * std::max<std::size_t>(1, n);
            if (n > (1u << 22))
                throw ValidationError("grid: refinement too fine for stretch of length " +
                                      detail::fmt(len));
            for (std::size_t i = 1; i <= n; ++i) {
                double t = (i == n) ? end : cur + len * static_cast<double>(i) / static_cast<double>(n);
                g.points.push_back({t, 0.0, PointKind::dense});
            }
            cur = end;
        } else {
            double nxt = ts.jumps(cur).sigma;
            if (!(nxt > cur))
                throw NumericalError("grid: cannot advance past t = " + detail::fmt(cur));
            g.points.push_back({nxt, nxt - cur, PointKind::scattered});
            cur = nxt;
        }
    }
    return g;
}

namespace detail {

// Locate the maximal dense run starting at index k-1 (points k..j have nu==0).
inline std::size_t dense_run_end(const Grid& g, std::size_t k) {
    std::size_t j = k;
    while (j + 1 < g.size() && g.nu(j + 1) == 0.0) ++j;
    return j;
}

}  // namespace detail

// Nabla integral of a pointwise-evaluable function over (a, b] of the grid:
// sum of nu*f over scattered points plus composite-trapezoid dense quadrature
// with one midpoint Richardson refinement per interval (order 4).
template <class F>
auto nabla_integrate(const Grid& g, F&& f) -> std::decay_t<decltype(f(0.0))> {
    using V = std::decay_t<decltype(f(0.0))>;
    V acc = f(g.t(0));
    acc = acc - acc;
    std::size_t k = 1;
    while (k < g.size()) {
        if (g.nu(k) > 0.0) {
            acc = acc + g.nu(k) * f(g.t(k));
            ++k;
        } else {
            std::size_t j = detail::dense_run_end(g, k);
            V fl = f(g.t(k - 1));
            for (std::size_t i = k; i <= j; ++i) {
                V fr = f(g.t(i));
                double dt = g.t(i) - g.t(i - 1);
                V fm = f(0.5 * (g.t(i) + g.t(i - 1)));
                V t1 = (dt / 2.0) * (fl + fr);
                V t2 = (dt / 4.0) * (fl + 2.0 * fm + fr);
                acc = acc + t2 + (t2 - t1) * (1.0 / 3.0);
                fl = fr;
            }
            k = j + 1;
        }
    }
    return acc;
}

// Same integral from grid samples only.  Dense runs use paired-interval
// Richardson (trapezoid at spacing h combined with trapezoid at 2h); runs
// clipped to an odd interval count fall back to a single trapezoid panel.
// `from` restricts the integral to (t_from, b].
template <class V>
V nabla_integrate_samples(const Grid& g, const std::vector<V>& s, std::size_t from = 0) {
    if (s.size() != g.size())
        throw ValidationError("nabla_integrate_samples: sample/grid size mismatch");
    V acc = s.front();
    acc = acc - acc;
    std::size_t k = from + 1;
    while (k < g.size()) {
        if (g.nu(k) > 0.0) {
            acc = acc + g.nu(k) * s[k];
            ++k;
        } else {
            std::size_t j = detail::dense_run_end(g, k);
            std::size_t i = k - 1;
            if ((j - i) % 2 == 1) {  // odd count: one trapezoid panel first
                acc = acc + (g.t(i + 1) - g.t(i)) * 0.5 * (s[i] + s[i + 1]);
                ++i;
            }
            for (; i + 2 <= j; i += 2) {
                double h1 = g.t(i + 1) - g.t(i);
                double h2 = g.t(i + 2) - g.t(i + 1);
                V fine = 0.5 * (h1 * (s[i] + s[i + 1]) + h2 * (s[i + 1] + s[i + 2]));
                V coarse = 0.5 * (h1 + h2) * (s[i] + s[i + 2]);
                acc = acc + fine + (fine - coarse) * (1.0 / 3.0);
            }
            k = j + 1;
        }
    }
    return acc;
}

}  // namespace hamts

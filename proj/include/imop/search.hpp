#pragma once

// Derivative-free search over a parameter space: projection, poll directions,
// compass search, a projected Nelder–Mead variant and exhaustive grids.

#include "model.hpp"
#include "qp.hpp"

#include <algorithm>
#include <functional>
#include <random>

namespace imop {

/// Euclidean projection onto box ∩ {N θ = r}. Plain clipping without normalizations.
inline Vec project(const ParamSpace& s, const Vec& theta) {
    Vec c = theta.cwiseMax(s.lower).cwiseMin(s.upper);
    if (s.norm_rows.rows() == 0) return c;
    const Eigen::Index n = s.dim();
    QuadraticProgram qp;
    qp.hessian = Mat::Identity(n, n);
    qp.linear = -theta;
    qp.a_ub = Mat(2 * n, n);
    qp.a_ub << Mat::Identity(n, n), -Mat::Identity(n, n);
    qp.b_ub = Vec(2 * n);
    qp.b_ub << s.upper, -s.lower;
    qp.a_eq = s.norm_rows;
    qp.b_eq = s.norm_rhs;
    QpResult r = solve_qp(qp);
    if (r.status != QpStatus::optimal) throw NumericalError("projection onto the parameter space failed");
    // remove rounding outside the box
    return r.x.cwiseMax(s.lower).cwiseMin(s.upper);
}

/// Directions spanning the feasible tangent space, scaled by the box width.
inline std::vector<Vec> poll_directions(const ParamSpace& s, bool coordinate_only = false) {
    const Eigen::Index n = s.dim();
    auto fixed = s.fixed_mask();
    Vec width = s.width();
    std::vector<Vec> out;
    auto push = [&](Vec d) {
        double m = d.cwiseAbs().maxCoeff();
        if (m < 1e-12) return;
        d /= m;
        for (Eigen::Index j = 0; j < n; ++j) d(j) *= width(j);
        if (d.cwiseAbs().maxCoeff() < 1e-12) return;
        for (const auto& e : out)
            if ((e - d).norm() < 1e-12 || (e + d).norm() < 1e-12) return;
        out.push_back(d);
        out.push_back(-d);
    };
    if (s.norm_rows.rows() == 0) {
        for (Eigen::Index j = 0; j < n; ++j)
            if (!fixed[static_cast<std::size_t>(j)]) push(Vec::Unit(n, j));
        return out;
    }
    // transfers between two coordinates of the same normalization row keep that row satisfied
    for (Eigen::Index r = 0; r < s.norm_rows.rows(); ++r) {
        std::vector<Eigen::Index> sup;
        for (Eigen::Index j = 0; j < n; ++j)
            if (s.norm_rows(r, j) != 0.0) sup.push_back(j);
        for (std::size_t a = 0; a < sup.size(); ++a)
            for (std::size_t b = a + 1; b < sup.size(); ++b) {
                Vec d = Vec::Zero(n);
                d(sup[a]) = 1.0 / s.norm_rows(r, sup[a]);
                d(sup[b]) = -1.0 / s.norm_rows(r, sup[b]);
                if ((s.norm_rows * d).cwiseAbs().maxCoeff() < 1e-12) push(d);
            }
    }
    if (coordinate_only) return out;
    Mat cons = s.norm_rows;
    for (Eigen::Index j = 0; j < n; ++j)
        if (fixed[static_cast<std::size_t>(j)]) cons = vstack(cons, Mat(Vec::Unit(n, j).transpose()));
    Mat ns = null_space(cons, n);
    for (Eigen::Index c = 0; c < ns.cols(); ++c) push(ns.col(c));
    return out;
}

enum class SearchMethod { pattern, simplex, coordinate };

inline const char* to_string(SearchMethod m) {
    switch (m) {
        case SearchMethod::pattern: return "pattern-search";
        case SearchMethod::simplex: return "nelder-mead";
        case SearchMethod::coordinate: return "coordinate-descent";
    }
    return "?";
}

inline SearchMethod search_method_from_string(const std::string& s) {
    if (s == "pattern-search" || s == "pattern") return SearchMethod::pattern;
    if (s == "nelder-mead" || s == "simplex") return SearchMethod::simplex;
    if (s == "coordinate-descent" || s == "coordinate") return SearchMethod::coordinate;
    throw ValidationError("unknown search method '" + s + "'");
}

struct SearchOptions {
    SearchMethod method = SearchMethod::pattern;
    double initial_step = 0.1;  // fraction of the box width
    double min_step = 1e-4;
    int max_evals = 2000;
    double min_decrease = 0.0;  // absolute improvement required to accept a move
};

struct SearchResult {
    Vec theta;
    double value = kInf;
    int evals = 0;
    bool converged = false;  // step fell below min_step before the evaluation cap
};

using ThetaObjective = std::function<double(const Vec&)>;

namespace detail {

inline SearchResult compass_search(const ThetaObjective& f, const ParamSpace& s, const Vec& theta0,
                                   const SearchOptions& opt, bool coordinate_only) {
    SearchResult r;
    r.theta = project(s, theta0);
    r.value = f(r.theta);
    r.evals = 1;
    auto dirs = poll_directions(s, coordinate_only);
    if (dirs.empty()) {
        r.converged = true;
        return r;
    }
    double step = opt.initial_step;
    while (step >= opt.min_step && r.evals < opt.max_evals) {
        bool moved = false;
        for (const auto& d : dirs) {
            if (r.evals >= opt.max_evals) break;
            Vec cand = project(s, r.theta + step * d);
            if ((cand - r.theta).cwiseAbs().maxCoeff() < 1e-15) continue;
            double v = f(cand);
            ++r.evals;
            if (v < r.value - opt.min_decrease) {
                r.theta = cand;
                r.value = v;
                moved = true;
                break;  // opportunistic: restart the poll from the new centre
            }
        }
        if (!moved) step *= 0.5;
    }
    r.converged = step < opt.min_step;
    return r;
}

// Nelder–Mead on the tangent coordinates of the normalization manifold, with projection.
inline SearchResult nelder_mead(const ThetaObjective& f, const ParamSpace& s, const Vec& theta0, const SearchOptions& opt) {
    SearchResult r;
    Vec base = project(s, theta0);
    auto dirs = poll_directions(s);
    std::vector<Vec> basis;
    for (std::size_t i = 0; i < dirs.size(); i += 2) basis.push_back(dirs[i]);
    const std::size_t m = basis.size();
    r.theta = base;
    r.value = f(base);
    r.evals = 1;
    if (m == 0) {
        r.converged = true;
        return r;
    }
    std::vector<Vec> pts = {base};
    std::vector<double> val = {r.value};
    for (std::size_t i = 0; i < m && pts.size() < m + 1; ++i) {
        Vec v = project(s, base + opt.initial_step * basis[i]);
        if ((v - base).norm() < 1e-12) v = project(s, base - opt.initial_step * basis[i]);
        pts.push_back(v);
        val.push_back(f(v));
        ++r.evals;
    }
    auto eval = [&](const Vec& t) {
        ++r.evals;
        return f(t);
    };
    while (r.evals < opt.max_evals) {
        std::vector<std::size_t> ord(pts.size());
        for (std::size_t i = 0; i < ord.size(); ++i) ord[i] = i;
        std::stable_sort(ord.begin(), ord.end(), [&](auto a, auto b) { return val[a] < val[b]; });
        std::vector<Vec> p2;
        std::vector<double> v2;
        for (auto i : ord) {
            p2.push_back(pts[i]);
            v2.push_back(val[i]);
        }
        pts.swap(p2);
        val.swap(v2);
        double diam = 0.0;
        for (std::size_t i = 1; i < pts.size(); ++i)
            diam = std::max(diam, ((pts[i] - pts[0]).array() / s.width().cwiseMax(1e-300).array()).abs().maxCoeff());
        if (diam < opt.min_step) {
            r.converged = true;
            break;
        }
        Vec cen = Vec::Zero(base.size());
        for (std::size_t i = 0; i + 1 < pts.size(); ++i) cen += pts[i];
        cen /= static_cast<double>(pts.size() - 1);
        Vec xr = project(s, cen + (cen - pts.back()));
        double fr = eval(xr);
        if (fr < val.front()) {
            Vec xe = project(s, cen + 2.0 * (cen - pts.back()));
            double fe = eval(xe);
            if (fe < fr) {
                pts.back() = xe;
                val.back() = fe;
            } else {
                pts.back() = xr;
                val.back() = fr;
            }
        } else if (fr < val[val.size() - 2]) {
            pts.back() = xr;
            val.back() = fr;
        } else {
            Vec xc = project(s, cen + 0.5 * (pts.back() - cen));
            double fc = eval(xc);
            if (fc < val.back()) {
                pts.back() = xc;
                val.back() = fc;
            } else {
                for (std::size_t i = 1; i < pts.size(); ++i) {
                    pts[i] = project(s, pts[0] + 0.5 * (pts[i] - pts[0]));
                    val[i] = eval(pts[i]);
                }
            }
        }
    }
    std::size_t best = static_cast<std::size_t>(std::min_element(val.begin(), val.end()) - val.begin());
    r.theta = pts[best];
    r.value = val[best];
    return r;
}

}  // namespace detail

/// Local minimization of f over the parameter space from theta0.
inline SearchResult local_search(const ThetaObjective& f, const ParamSpace& s, const Vec& theta0, const SearchOptions& opt = {}) {
    switch (opt.method) {
        case SearchMethod::simplex: return detail::nelder_mead(f, s, theta0, opt);
        case SearchMethod::coordinate: return detail::compass_search(f, s, theta0, opt, true);
        default: return detail::compass_search(f, s, theta0, opt, false);
    }
}

/// Uniform draw from the box, projected onto the normalizations.
inline Vec random_theta(const ParamSpace& s, std::mt19937_64& rng) {
    Vec t(s.dim());
    for (Eigen::Index i = 0; i < t.size(); ++i)
        t(i) = s.lower(i) == s.upper(i) ? s.lower(i) : std::uniform_real_distribution<double>(s.lower(i), s.upper(i))(rng);
    return project(s, t);
}

/// Grid points of box ∩ {N θ = r}: the non-pivot coordinates of the reduced
/// normalization system run over lo + i·res, the pivots are solved for and kept if inside the box.
inline std::vector<Vec> manifold_grid(const ParamSpace& s, double resolution, long budget = 1000000) {
    require(resolution > 0.0, "grid resolution must be positive");
    const Eigen::Index n = s.dim();
    auto fixed = s.fixed_mask();
    // reduced row echelon form of the normalization rows
    Mat a = s.norm_rows;
    Vec b = s.norm_rhs;
    std::vector<Eigen::Index> pivots;
    Eigen::Index row = 0;
    for (Eigen::Index c = 0; c < n && row < a.rows(); ++c) {
        Eigen::Index best = row;
        for (Eigen::Index r = row; r < a.rows(); ++r)
            if (std::abs(a(r, c)) > std::abs(a(best, c))) best = r;
        if (std::abs(a(best, c)) < 1e-12) continue;
        a.row(row).swap(a.row(best));
        std::swap(b(row), b(best));
        double pv = a(row, c);
        a.row(row) /= pv;
        b(row) /= pv;
        for (Eigen::Index r = 0; r < a.rows(); ++r)
            if (r != row && a(r, c) != 0.0) {
                double f = a(r, c);
                a.row(r) -= f * a.row(row);
                b(r) -= f * b(row);
            }
        pivots.push_back(c);
        ++row;
    }
    for (Eigen::Index r = row; r < a.rows(); ++r)
        require(std::abs(b(r)) < 1e-9, "normalization rows are inconsistent");
    std::vector<Eigen::Index> grid_coords;
    std::vector<int> steps;
    long total = 1;
    for (Eigen::Index j = 0; j < n; ++j) {
        if (std::find(pivots.begin(), pivots.end(), j) != pivots.end()) continue;
        if (fixed[static_cast<std::size_t>(j)]) continue;
        int cnt = static_cast<int>(std::floor((s.upper(j) - s.lower(j)) / resolution + 1e-9)) + 1;
        grid_coords.push_back(j);
        steps.push_back(cnt);
        total *= cnt;
        require(total <= budget, "grid exceeds the candidate budget");
    }
    std::vector<Vec> out;
    std::vector<int> idx(grid_coords.size(), 0);
    for (long t = 0; t < total; ++t) {
        Vec th = s.lower;
        for (std::size_t q = 0; q < grid_coords.size(); ++q)
            th(grid_coords[q]) = s.lower(grid_coords[q]) + idx[q] * resolution;
        bool ok = true;
        for (std::size_t r = 0; r < pivots.size(); ++r) {
            double v = b(static_cast<Eigen::Index>(r));
            for (Eigen::Index j = 0; j < n; ++j)
                if (j != pivots[r]) v -= a(static_cast<Eigen::Index>(r), j) * th(j);
            th(pivots[r]) = v;
            double tol = 1e-9 * (1.0 + std::abs(v));
            if (v < s.lower(pivots[r]) - tol || v > s.upper(pivots[r]) + tol) ok = false;
            th(pivots[r]) = std::clamp(v, s.lower(pivots[r]), s.upper(pivots[r]));
        }
        if (ok) out.push_back(th);
        for (std::size_t q = 0; q < idx.size(); ++q) {
            if (++idx[q] < steps[q]) break;
            idx[q] = 0;
        }
    }
    return out;
}

}  // namespace imop

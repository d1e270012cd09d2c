#pragma once

// Dense two-phase tableau simplex. Small problems only; Bland's rule throughout
// so that degenerate vertices never cycle.

#include "linalg.hpp"

#include <algorithm>
#include <vector>

namespace imop {

/// min costᵀx  s.t.  a_ub x ≤ b_ub,  a_eq x = b_eq,  lower ≤ x ≤ upper.
/// Empty lower means 0, empty upper means +inf. Bounds may be infinite.
struct LinearProgram {
    Vec cost;
    Mat a_ub;
    Vec b_ub;
    Mat a_eq;
    Vec b_eq;
    Vec lower;
    Vec upper;
};

enum class LpStatus { optimal, infeasible, unbounded, iteration_limit };

inline const char* to_string(LpStatus s) {
    switch (s) {
        case LpStatus::optimal: return "optimal";
        case LpStatus::infeasible: return "infeasible";
        case LpStatus::unbounded: return "unbounded";
        case LpStatus::iteration_limit: return "iteration_limit";
    }
    return "?";
}

struct LpResult {
    LpStatus status = LpStatus::infeasible;
    Vec x;
    double objective = 0.0;
    int iterations = 0;
};

namespace detail {

class Tableau {
public:
    Tableau(Mat a, Vec b, int n_struct) : n_struct_(n_struct) {
        const Eigen::Index m = a.rows();
        // flip rows so that rhs >= 0
        for (Eigen::Index i = 0; i < m; ++i)
            if (b(i) < 0) {
                a.row(i) *= -1.0;
                b(i) = -b(i);
            }
        // a unit column with +1 in row i can start the basis; otherwise add an artificial
        basis_.assign(static_cast<std::size_t>(m), -1);
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            Eigen::Index hit = -1;
            bool unit = true;
            for (Eigen::Index i = 0; i < m && unit; ++i) {
                if (a(i, j) == 0.0) continue;
                if (a(i, j) == 1.0 && hit < 0) hit = i;
                else unit = false;
            }
            if (unit && hit >= 0 && basis_[static_cast<std::size_t>(hit)] < 0)
                basis_[static_cast<std::size_t>(hit)] = static_cast<int>(j);
        }
        int n_art = 0;
        for (int v : basis_)
            if (v < 0) ++n_art;
        n_cols_ = static_cast<int>(a.cols()) + n_art;
        first_art_ = static_cast<int>(a.cols());
        t_ = Mat::Zero(m + 1, n_cols_ + 1);
        t_.topLeftCorner(m, a.cols()) = a;
        t_.col(n_cols_).head(m) = b;
        int next = first_art_;
        for (Eigen::Index i = 0; i < m; ++i)
            if (basis_[static_cast<std::size_t>(i)] < 0) {
                t_(i, next) = 1.0;
                basis_[static_cast<std::size_t>(i)] = next++;
            }
    }

    Eigen::Index rows() const { return t_.rows() - 1; }

    /// Phase 1. Returns false when the constraints are infeasible.
    bool phase_one(int& iters, int max_iters) {
        if (first_art_ == n_cols_) return true;
        Vec c = Vec::Zero(n_cols_);
        for (int j = first_art_; j < n_cols_; ++j) c(j) = 1.0;
        set_cost(c);
        const double scale = 1.0 + t_.col(n_cols_).head(rows()).cwiseAbs().maxCoeff();
        if (run(iters, max_iters, n_cols_) != LpStatus::optimal) return false;
        if (-t_(rows(), n_cols_) > 1e-9 * scale) return false;
        // drive remaining artificials out of the basis; drop redundant rows
        for (Eigen::Index i = rows() - 1; i >= 0; --i) {
            if (basis_[static_cast<std::size_t>(i)] < first_art_) continue;
            Eigen::Index best = -1;
            for (int j = 0; j < first_art_; ++j)
                if (std::abs(t_(i, j)) > 1e-9 && (best < 0 || std::abs(t_(i, j)) > std::abs(t_(i, best)) * 10))
                    best = j;
            if (best >= 0) pivot(i, best);
            else drop_row(i);
        }
        return true;
    }

    LpStatus phase_two(const Vec& cost, int& iters, int max_iters) {
        Vec c = Vec::Zero(n_cols_);
        c.head(cost.size()) = cost;
        set_cost(c);
        return run(iters, max_iters, first_art_);
    }

    Vec primal() const {
        Vec x = Vec::Zero(n_struct_);
        for (Eigen::Index i = 0; i < rows(); ++i) {
            int v = basis_[static_cast<std::size_t>(i)];
            if (v < n_struct_) x(v) = t_(i, n_cols_);
        }
        return x;
    }

private:
    void set_cost(const Vec& c) {
        const Eigen::Index m = rows();
        t_.row(m).setZero();
        t_.row(m).head(n_cols_) = c.transpose();
        for (Eigen::Index i = 0; i < m; ++i) {
            double cb = c(basis_[static_cast<std::size_t>(i)]);
            if (cb != 0.0) t_.row(m) -= cb * t_.row(i);
        }
        cost_scale_ = 1.0 + c.cwiseAbs().maxCoeff();
    }

    LpStatus run(int& iters, int max_iters, int allowed_cols) {
        const Eigen::Index m = rows();
        const double eps_d = 1e-11 * cost_scale_;
        for (;;) {
            if (iters >= max_iters) return LpStatus::iteration_limit;
            int enter = -1;
            for (int j = 0; j < allowed_cols; ++j)
                if (t_(m, j) < -eps_d) {
                    enter = j;
                    break;
                }
            if (enter < 0) return LpStatus::optimal;
            Eigen::Index leave = -1;
            double best = kInf;
            for (Eigen::Index i = 0; i < m; ++i) {
                double a = t_(i, enter);
                if (a <= 1e-10) continue;
                double ratio = t_(i, n_cols_) / a;
                if (ratio < best - 1e-13 ||
                    (ratio <= best + 1e-13 && leave >= 0 &&
                     basis_[static_cast<std::size_t>(i)] < basis_[static_cast<std::size_t>(leave)])) {
                    if (ratio < best) best = ratio;
                    leave = i;
                }
            }
            if (leave < 0) return LpStatus::unbounded;
            pivot(leave, enter);
            ++iters;
        }
    }

    void pivot(Eigen::Index r, Eigen::Index s) {
        t_.row(r) /= t_(r, s);
        for (Eigen::Index i = 0; i < t_.rows(); ++i) {
            if (i == r) continue;
            double f = t_(i, s);
            if (f != 0.0) t_.row(i) -= f * t_.row(r);
        }
        basis_[static_cast<std::size_t>(r)] = static_cast<int>(s);
    }

    void drop_row(Eigen::Index r) {
        Mat next(t_.rows() - 1, t_.cols());
        next.topRows(r) = t_.topRows(r);
        next.bottomRows(t_.rows() - 1 - r) = t_.bottomRows(t_.rows() - 1 - r);
        t_ = std::move(next);
        basis_.erase(basis_.begin() + r);
    }

    Mat t_;
    std::vector<int> basis_;
    int n_struct_ = 0;
    int n_cols_ = 0;
    int first_art_ = 0;
    double cost_scale_ = 1.0;
};

}  // namespace detail

/// Solve a small dense LP.
inline LpResult solve_lp(const LinearProgram& lp, int max_iters = 5000) {
    const Eigen::Index n = lp.cost.size();
    Vec lo = lp.lower.size() ? lp.lower : Vec::Zero(n);
    Vec hi = lp.upper.size() ? lp.upper : Vec::Constant(n, kInf);
    require(lo.size() == n && hi.size() == n, "lp: bound size mismatch");
    require(lp.a_ub.rows() == lp.b_ub.size() && (lp.a_ub.rows() == 0 || lp.a_ub.cols() == n),
            "lp: inequality block mismatch");
    require(lp.a_eq.rows() == lp.b_eq.size() && (lp.a_eq.rows() == 0 || lp.a_eq.cols() == n),
            "lp: equality block mismatch");
    for (Eigen::Index j = 0; j < n; ++j)
        if (lo(j) > hi(j)) return {LpStatus::infeasible, Vec(), 0.0, 0};

    // x_j = shift_j + Σ sign * z_col
    struct Map {
        double shift;
        int col;
        double sign;
        int col_neg;  // free variables only
    };
    std::vector<Map> map(static_cast<std::size_t>(n));
    int nz = 0;
    std::vector<std::pair<int, double>> caps;  // z_col ≤ cap
    for (Eigen::Index j = 0; j < n; ++j) {
        auto& mp = map[static_cast<std::size_t>(j)];
        if (std::isfinite(lo(j))) {
            mp = {lo(j), nz++, 1.0, -1};
            if (std::isfinite(hi(j))) caps.emplace_back(mp.col, hi(j) - lo(j));
        } else if (std::isfinite(hi(j))) {
            mp = {hi(j), nz++, -1.0, -1};
        } else {
            mp = {0.0, nz, 1.0, nz + 1};
            nz += 2;
        }
    }
    const Eigen::Index m_ub = lp.a_ub.rows(), m_eq = lp.a_eq.rows();
    const Eigen::Index m_cap = static_cast<Eigen::Index>(caps.size());
    const Eigen::Index n_slack = m_ub + m_cap;
    const Eigen::Index m = m_ub + m_cap + m_eq;
    Mat a = Mat::Zero(m, nz + n_slack);
    Vec b = Vec::Zero(m);
    auto put_row = [&](Eigen::Index row, const auto& coeffs, double rhs) {
        double r = rhs;
        for (Eigen::Index j = 0; j < n; ++j) {
            double v = coeffs(j);
            if (v == 0.0) continue;
            const auto& mp = map[static_cast<std::size_t>(j)];
            r -= v * mp.shift;
            a(row, mp.col) += v * mp.sign;
            if (mp.col_neg >= 0) a(row, mp.col_neg) -= v;
        }
        b(row) = r;
    };
    for (Eigen::Index i = 0; i < m_ub; ++i) {
        put_row(i, lp.a_ub.row(i), lp.b_ub(i));
        a(i, nz + i) = 1.0;
    }
    for (Eigen::Index k = 0; k < m_cap; ++k) {
        a(m_ub + k, caps[static_cast<std::size_t>(k)].first) = 1.0;
        a(m_ub + k, nz + m_ub + k) = 1.0;
        b(m_ub + k) = caps[static_cast<std::size_t>(k)].second;
    }
    for (Eigen::Index i = 0; i < m_eq; ++i) put_row(m_ub + m_cap + i, lp.a_eq.row(i), lp.b_eq(i));

    Vec cz = Vec::Zero(nz + n_slack);
    for (Eigen::Index j = 0; j < n; ++j) {
        const auto& mp = map[static_cast<std::size_t>(j)];
        cz(mp.col) += lp.cost(j) * mp.sign;
        if (mp.col_neg >= 0) cz(mp.col_neg) -= lp.cost(j);
    }

    LpResult res;
    detail::Tableau tab(a, b, static_cast<int>(nz + n_slack));
    if (!tab.phase_one(res.iterations, max_iters)) {
        res.status = res.iterations >= max_iters ? LpStatus::iteration_limit : LpStatus::infeasible;
        return res;
    }
    res.status = tab.phase_two(cz, res.iterations, max_iters);
    Vec z = tab.primal();
    res.x.resize(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        const auto& mp = map[static_cast<std::size_t>(j)];
        res.x(j) = mp.shift + mp.sign * z(mp.col) - (mp.col_neg >= 0 ? z(mp.col_neg) : 0.0);
    }
    res.objective = lp.cost.dot(res.x);
    return res;
}

/// Optimal solution that is lexicographically smallest among all optima.
/// Each stage pins the previous objective with a small slack and minimizes the next coordinate.
inline LpResult solve_lp_lexmin(const LinearProgram& lp, int max_iters = 5000) {
    LpResult first = solve_lp(lp, max_iters);
    if (first.status != LpStatus::optimal) return first;
    const Eigen::Index n = lp.cost.size();
    LinearProgram stage = lp;
    auto pin = [&](const Vec& row, double value) {
        double slack = 1e-11 * (1.0 + std::abs(value));
        Mat a(stage.a_ub.rows() + 1, n);
        if (stage.a_ub.rows()) a.topRows(stage.a_ub.rows()) = stage.a_ub;
        a.row(stage.a_ub.rows()) = row.transpose();
        Vec b(stage.b_ub.size() + 1);
        b << stage.b_ub, value + slack;
        stage.a_ub = std::move(a);
        stage.b_ub = std::move(b);
    };
    pin(lp.cost, first.objective);
    LpResult cur = first;
    for (Eigen::Index j = 0; j < n; ++j) {
        stage.cost = Vec::Unit(n, j);
        LpResult r = solve_lp(stage, max_iters);
        if (r.status != LpStatus::optimal) break;
        cur.x = r.x;
        cur.iterations += r.iterations;
        pin(Vec::Unit(n, j), r.x(j));
    }
    cur.objective = lp.cost.dot(cur.x);
    return cur;
}

}  // namespace imop

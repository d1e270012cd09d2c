#pragma once

// Forward side: weighted-sum problems, KKT certificates, weight sampling and
// sampled efficient fronts.

#include "lp.hpp"
#include "model.hpp"
#include "parallel.hpp"
#include "qp.hpp"

#include <random>
#include <string>
#include <vector>

namespace imop {

struct KktResiduals {
    double stationarity = 0.0;
    double complementarity = 0.0;
    double primal = 0.0;

    double max() const { return std::max({stationarity, complementarity, primal}); }
};

enum class SolveStatus { optimal, infeasible, iteration_limit };

inline const char* to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::optimal: return "optimal";
        case SolveStatus::infeasible: return "infeasible";
        case SolveStatus::iteration_limit: return "iteration_limit";
    }
    return "?";
}

enum class WpMethod { automatic, simplex, active_set, sqp };

struct SolverOptions {
    double tol = 1e-8;
    int max_iters = 200;
    WpMethod method = WpMethod::automatic;
    Vec x0;  // starting point for the iterative (sqp) path; empty = feasible vertex
};

/// Solution of min wᵀf(x) over X. u is indexed like the stacked inequality form,
/// lambda like the equality rows.
struct ForwardSolution {
    Vec x;
    Vec u;
    Vec lambda;
    Vec w;
    double objective = 0.0;
    KktResiduals residuals;
    SolveStatus status = SolveStatus::infeasible;
    int iterations = 0;
    bool boundary_weight = false;
};

inline void check_weight(const Vec& w, int p) {
    require(w.size() == p, "weight has " + std::to_string(w.size()) + " components, expected " + std::to_string(p));
    for (Eigen::Index l = 0; l < w.size(); ++l) require(w(l) >= 0.0, "weight components must be nonnegative");
    require(std::abs(w.sum() - 1.0) <= 1e-9, "weight components must sum to one");
}

/// (‖∇(wᵀf) + Gᵀu + Eᵀλ‖₂, |uᵀg(x)|, ‖max(g(x),0)‖∞ together with ‖Ex − e‖∞).
/// Negative entries of u are clipped before evaluation.
inline KktResiduals kkt_residuals(const ConcreteDmp& d, const Vec& w, const Vec& x, const Vec& u, const Vec& lambda = Vec()) {
    Objective f = d.combine(w);
    Vec uc = u.size() ? Vec(u.cwiseMax(0.0)) : Vec(Vec::Zero(d.m_stacked()));
    Vec r = f.gradient(x);
    if (d.m_stacked()) r += d.g.transpose() * uc;
    if (d.a_eq.rows()) {
        if (lambda.size() == d.a_eq.rows()) {
            r += d.a_eq.transpose() * lambda;
        } else {
            // best free equality multipliers for the given u
            Vec lam = d.a_eq.transpose().colPivHouseholderQr().solve(-r);
            r += d.a_eq.transpose() * lam;
        }
    }
    KktResiduals k;
    k.stationarity = r.norm();
    Vec gx = d.m_stacked() ? Vec(d.g * x - d.h) : Vec();
    k.complementarity = d.m_stacked() ? std::abs(uc.dot(gx)) : 0.0;
    double pf = d.m_stacked() ? std::max(0.0, gx.maxCoeff()) : 0.0;
    if (d.a_eq.rows()) pf = std::max(pf, (d.a_eq * x - d.b_eq).cwiseAbs().maxCoeff());
    k.primal = pf;
    return k;
}

namespace detail {

/// Multipliers for a known primal point: nonnegative least squares on the
/// (nearly) active rows, equality multipliers free.
inline void fit_multipliers(const ConcreteDmp& d, const Vec& grad, const Vec& x, Vec& u, Vec& lambda) {
    const Eigen::Index m = d.m_stacked(), me = d.a_eq.rows();
    std::vector<int> act;
    Vec gx = m ? Vec(d.g * x - d.h) : Vec();
    for (Eigen::Index i = 0; i < m; ++i)
        if (gx(i) >= -1e-9 * (1.0 + std::abs(d.h(i)))) act.push_back(static_cast<int>(i));
    const auto na = static_cast<Eigen::Index>(act.size());
    Mat a(grad.size(), na + me);
    for (Eigen::Index k = 0; k < na; ++k) a.col(k) = d.g.row(act[static_cast<std::size_t>(k)]).transpose();
    if (me) a.rightCols(me) = d.a_eq.transpose();
    std::vector<bool> nonneg(static_cast<std::size_t>(na + me), false);
    for (Eigen::Index k = 0; k < na; ++k) nonneg[static_cast<std::size_t>(k)] = true;
    Vec sol = na + me ? nonneg_least_squares(a, -grad, nonneg) : Vec();
    u = Vec::Zero(m);
    for (Eigen::Index k = 0; k < na; ++k) u(act[static_cast<std::size_t>(k)]) = sol(k);
    lambda = me ? Vec(sol.tail(me)) : Vec::Zero(0);
}

inline bool is_linear(const Objective& f) {
    return f.powers.empty() && (!f.has_quadratic() || f.q.cwiseAbs().maxCoeff() == 0.0);
}

inline ForwardSolution solve_linear(const ConcreteDmp& d, const Objective& f, ForwardSolution sol) {
    LinearProgram lp{f.c, d.a_ub, d.b_ub, d.a_eq, d.b_eq, d.lower, d.upper};
    LpResult r = solve_lp_lexmin(lp);
    sol.iterations = r.iterations;
    if (r.status != LpStatus::optimal) {
        sol.status = r.status == LpStatus::infeasible ? SolveStatus::infeasible : SolveStatus::iteration_limit;
        return sol;
    }
    sol.x = r.x;
    fit_multipliers(d, f.c, sol.x, sol.u, sol.lambda);
    sol.status = SolveStatus::optimal;
    return sol;
}

inline ForwardSolution solve_quadratic(const ConcreteDmp& d, const Objective& f, ForwardSolution sol) {
    QuadraticProgram qp{f.q, f.c, d.g, d.h, d.a_eq, d.b_eq};
    QpResult r = solve_qp(qp);
    if (r.status == QpStatus::not_convex) r = solve_qp_psd(qp);
    sol.iterations = r.iterations;
    if (r.status != QpStatus::optimal) {
        sol.status = r.status == QpStatus::infeasible ? SolveStatus::infeasible : SolveStatus::iteration_limit;
        return sol;
    }
    sol.x = r.x;
    sol.u = r.u;
    sol.lambda = r.lambda;
    sol.status = SolveStatus::optimal;
    return sol;
}

/// Projected Newton: each step solves the QP model of f over X (a projection in
/// the Hessian metric), followed by an Armijo backtracking line search.
inline ForwardSolution solve_smooth(const ConcreteDmp& d, const Objective& f, ForwardSolution sol, const SolverOptions& opt) {
    const Eigen::Index n = d.n();
    Vec x = opt.x0;
    if (x.size() != n || d.infeasibility(x) > 1e-9 * (1.0 + x.cwiseAbs().maxCoeff())) {
        LinearProgram lp{Vec::Zero(n), d.a_ub, d.b_ub, d.a_eq, d.b_eq, d.lower, d.upper};
        LpResult r = solve_lp(lp);
        if (r.status != LpStatus::optimal) {
            sol.status = SolveStatus::infeasible;
            return sol;
        }
        x = r.x;
    }
    QpResult last;
    sol.status = SolveStatus::iteration_limit;
    for (int it = 0; it < opt.max_iters; ++it) {
        sol.iterations = it + 1;
        Vec grad = f.gradient(x);
        Mat hess = f.hessian(x);
        double mu = 1e-6 * std::max(1.0, hess.diagonal().cwiseAbs().maxCoeff());
        hess.diagonal().array() += mu;
        QuadraticProgram qp{hess, grad - hess * x, d.g, d.h, d.a_eq, d.b_eq};
        last = solve_qp(qp);
        if (last.status != QpStatus::optimal) {
            sol.status = last.status == QpStatus::infeasible ? SolveStatus::infeasible : SolveStatus::iteration_limit;
            break;
        }
        Vec step = last.x - x;
        // accept the subproblem point once its own multipliers certify it for the true objective
        Vec gn = f.gradient(last.x);
        Vec r = gn + d.g.transpose() * last.u.cwiseMax(0.0);
        if (d.a_eq.rows()) r += d.a_eq.transpose() * last.lambda;
        bool kkt_ok = r.norm() <= 1e-10 * (1.0 + gn.norm()) && step.norm() <= 1e-6 * (1.0 + x.norm());
        if (kkt_ok || step.norm() <= 1e-10 * (1.0 + x.norm())) {
            x = last.x;
            sol.status = SolveStatus::optimal;
            break;
        }
        double slope = grad.dot(step);
        double f0 = f.value(x), alpha = 1.0;
        while (alpha > 1e-12 && f.value(x + alpha * step) > f0 + 1e-4 * alpha * slope) alpha *= 0.5;
        x += alpha * step;
    }
    sol.x = x;
    if (sol.status == SolveStatus::optimal) {
        // the final QP was solved at (numerically) x, so its multipliers certify x
        sol.u = last.u;
        sol.lambda = last.lambda;
    } else {
        fit_multipliers(d, f.gradient(x), x, sol.u, sol.lambda);
    }
    return sol;
}

}  // namespace detail

/// Solve the weighted-sum problem for a numeric program.
/// Linear objectives return the lexicographically smallest optimal vertex.
inline ForwardSolution solve_wp(const ConcreteDmp& d, const Vec& w, const SolverOptions& opt = {}) {
    check_weight(w, d.p());
    ForwardSolution sol;
    sol.w = w;
    sol.boundary_weight = (w.array() == 0.0).any();
    Objective f = d.combine(w);
    WpMethod method = opt.method;
    if (method == WpMethod::automatic) {
        if (!f.powers.empty()) method = WpMethod::sqp;
        else if (detail::is_linear(f)) method = WpMethod::simplex;
        else method = WpMethod::active_set;
    }
    switch (method) {
        case WpMethod::simplex: sol = detail::solve_linear(d, f, sol); break;
        case WpMethod::active_set: sol = detail::solve_quadratic(d, f, sol); break;
        default: sol = detail::solve_smooth(d, f, sol, opt); break;
    }
    if (sol.status != SolveStatus::optimal) return sol;
    sol.objective = f.value(sol.x);
    sol.residuals = kkt_residuals(d, w, sol.x, sol.u, sol.lambda);
    return sol;
}

inline ForwardSolution solve_wp(const DmpInstance& inst, const Vec& theta, const Vec& w, const SolverOptions& opt = {}) {
    return solve_wp(apply_params(inst, theta), w, opt);
}

/// Relative certificate check used by tests and estimators.
inline bool certified(const ConcreteDmp& d, const ForwardSolution& s, double tol = 1e-6) {
    if (s.status != SolveStatus::optimal) return false;
    Vec grad = d.combine(s.w).gradient(s.x);
    double scale = 1.0 + grad.norm() + (d.m_stacked() ? d.h.cwiseAbs().maxCoeff() : 0.0);
    double xs = 1.0 + s.x.cwiseAbs().maxCoeff();
    return s.residuals.stationarity <= tol * scale && s.residuals.complementarity <= tol * scale * xs &&
           s.residuals.primal <= tol * xs;
}

/// Distance from x to the solution set S(w) of the weighted-sum problem.
/// Linear objectives: the optimal face, by a projection QP. Otherwise the
/// solution is treated as a single point.
inline double distance_to_solution_set(const ConcreteDmp& d, const Vec& w, const Vec& x, const ForwardSolution& sol) {
    Objective f = d.combine(w);
    if (!detail::is_linear(f)) return (x - sol.x).norm();
    const Eigen::Index n = d.n();
    double v = f.c.dot(sol.x);
    QuadraticProgram qp;
    qp.hessian = Mat::Identity(n, n);
    qp.linear = -x;
    qp.a_ub = Mat(d.g.rows() + 1, n);
    qp.a_ub << d.g, f.c.transpose();
    qp.b_ub = Vec(d.h.size() + 1);
    qp.b_ub << d.h, v + 1e-9 * (1.0 + std::abs(v));
    qp.a_eq = d.a_eq;
    qp.b_eq = d.b_eq;
    QpResult r = solve_qp(qp);
    if (r.status != QpStatus::optimal) return (x - sol.x).norm();
    return (x - r.x).norm();
}

// ---------------------------------------------------------------- weights

namespace detail {

inline void compositions(int parts, int total, std::vector<int>& cur, std::vector<std::vector<int>>& out) {
    if (parts == 1) {
        cur.push_back(total);
        out.push_back(cur);
        cur.pop_back();
        return;
    }
    for (int k = 0; k <= total; ++k) {
        cur.push_back(k);
        compositions(parts - 1, total - k, cur, out);
        cur.pop_back();
    }
}

inline Vec uniform_simplex_draw(int p, std::mt19937_64& rng) {
    std::exponential_distribution<double> ex(1.0);
    Vec w(p);
    for (int l = 0; l < p; ++l) w(l) = ex(rng);
    w /= w.sum();
    w(p - 1) = std::max(0.0, 1.0 - w.head(p - 1).sum());
    return w;
}

inline long binom(int n, int k) {
    long r = 1;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

}  // namespace detail

/// Evenly spread weights. p = 2: K equally spaced points with both endpoints,
/// ordered by increasing first component (K = 1 gives (1,0)). p ≥ 3: the
/// largest simplex lattice with at most K points in lexicographic order, padded
/// with seeded uniform draws.
inline std::vector<Vec> grid_weights(int p, int k, std::uint64_t seed = 0) {
    require(k >= 1, "grid_weights: K must be at least 1");
    require(p >= 2, "grid_weights: p must be at least 2");
    std::vector<Vec> out;
    if (p == 2) {
        if (k == 1) return {Vec::Unit(2, 0)};
        for (int i = 0; i < k; ++i) {
            double a = static_cast<double>(i) / static_cast<double>(k - 1);
            Vec w(2);
            w << a, 1.0 - a;
            out.push_back(w);
        }
        return out;
    }
    int m = 0;
    while (detail::binom(m + 1 + p - 1, p - 1) <= k) ++m;
    if (k >= p && m >= 1) {
        std::vector<std::vector<int>> comps;
        std::vector<int> cur;
        detail::compositions(p, m, cur, comps);
        for (const auto& c : comps) {
            Vec w(p);
            for (int l = 0; l < p; ++l) w(l) = static_cast<double>(c[static_cast<std::size_t>(l)]) / m;
            out.push_back(w);
        }
    }
    std::mt19937_64 rng(seed);
    while (static_cast<int>(out.size()) < k) out.push_back(detail::uniform_simplex_draw(p, rng));
    return out;
}

enum class WeightLaw { uniform_simplex, truncated_normal, uniform_box };

/// Sampling law for data-generating weights. truncated_normal and uniform_box
/// act on the first component of a two-component weight.
struct WeightDist {
    WeightLaw law = WeightLaw::uniform_simplex;
    double mean = 0.5;
    double sd = 0.1;
    double lo = 0.0;
    double hi = 1.0;
};

inline std::vector<Vec> random_weights(int p, int count, const WeightDist& dist, std::uint64_t seed) {
    require(count >= 0, "random_weights: negative count");
    if (dist.law != WeightLaw::uniform_simplex) require(p == 2, "random_weights: this law needs two objectives");
    require(dist.lo >= 0.0 && dist.hi <= 1.0 && dist.lo <= dist.hi, "random_weights: interval must lie in [0,1]");
    std::mt19937_64 rng(seed);
    std::vector<Vec> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        Vec w(p);
        switch (dist.law) {
            case WeightLaw::uniform_simplex:
                if (p == 2) {
                    double a = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
                    w << a, 1.0 - a;
                } else {
                    w = detail::uniform_simplex_draw(p, rng);
                }
                break;
            case WeightLaw::truncated_normal: {
                require(dist.sd > 0.0, "random_weights: sd must be positive");
                std::normal_distribution<double> nd(dist.mean, dist.sd);
                double a;
                do a = nd(rng);
                while (a < dist.lo || a > dist.hi);
                w << a, 1.0 - a;
                break;
            }
            case WeightLaw::uniform_box: {
                double a = std::uniform_real_distribution<double>(dist.lo, dist.hi)(rng);
                w << a, 1.0 - a;
                break;
            }
        }
        out.push_back(w);
    }
    return out;
}

// ---------------------------------------------------------------- fronts

/// Indices of points whose objective vectors are not dominated (≤ everywhere
/// within tol and < somewhere by more than tol) by any other point.
inline std::vector<int> pareto_filter(const std::vector<Vec>& fvals, double tol = 1e-9) {
    std::vector<int> keep;
    for (std::size_t i = 0; i < fvals.size(); ++i) {
        bool dominated = false;
        for (std::size_t j = 0; j < fvals.size() && !dominated; ++j) {
            if (i == j) continue;
            bool le = ((fvals[j].array() - fvals[i].array()) <= tol).all();
            bool lt = ((fvals[i].array() - fvals[j].array()) > tol).any();
            dominated = le && lt;
        }
        if (!dominated) keep.push_back(static_cast<int>(i));
    }
    return keep;
}

struct EfficientFront {
    std::vector<Vec> weights;
    std::vector<Vec> points;
    std::vector<int> source;     // index into the input weight list
    std::vector<bool> boundary;  // weight has a zero component
    double tol = 1e-9;

    std::size_t size() const { return points.size(); }
};

/// Solve every weight, then keep the non-dominated results in input order.
inline EfficientFront sample_efficient_front(const ConcreteDmp& d, const std::vector<Vec>& weights, double tol = 1e-9,
                                             int threads = 1) {
    require(!weights.empty(), "sample_efficient_front: no weights");
    std::vector<ForwardSolution> sols(weights.size());
    parallel_for(weights.size(), threads, [&](std::size_t k) { sols[k] = solve_wp(d, weights[k]); });
    std::vector<Vec> fv;
    for (std::size_t k = 0; k < sols.size(); ++k) {
        if (sols[k].status != SolveStatus::optimal)
            throw NumericalError("weighted-sum solve failed at weight index " + std::to_string(k) + " (" +
                                 to_string(sols[k].status) + ")");
        fv.push_back(d.values(sols[k].x));
    }
    EfficientFront front;
    front.tol = tol;
    for (int k : pareto_filter(fv, tol)) {
        front.weights.push_back(weights[static_cast<std::size_t>(k)]);
        front.points.push_back(sols[static_cast<std::size_t>(k)].x);
        front.source.push_back(k);
        front.boundary.push_back(sols[static_cast<std::size_t>(k)].boundary_weight);
    }
    return front;
}

inline EfficientFront sample_efficient_front(const DmpInstance& inst, const Vec& theta, const std::vector<Vec>& weights,
                                             double tol = 1e-9, int threads = 1) {
    return sample_efficient_front(apply_params(inst, theta), weights, tol, threads);
}

/// Solutions for every weight without filtering; throws on failure.
inline std::vector<Vec> solve_all(const ConcreteDmp& d, const std::vector<Vec>& weights, int threads = 1) {
    std::vector<Vec> xs(weights.size());
    parallel_for(weights.size(), threads, [&](std::size_t k) {
        ForwardSolution s = solve_wp(d, weights[k]);
        if (s.status != SolveStatus::optimal)
            throw NumericalError("weighted-sum solve failed at weight index " + std::to_string(k));
        xs[k] = s.x;
    });
    return xs;
}

}  // namespace imop

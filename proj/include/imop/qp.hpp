#pragma once

// Strictly convex QP by the Goldfarb–Idnani dual active-set method.
// Dense and direct: every step re-solves the small active-set system, which is
// plenty for the problem sizes here (n ≤ a few dozen).

#include "linalg.hpp"

#include <vector>

namespace imop {

/// min ½xᵀHx + gᵀx  s.t.  a_ub x ≤ b_ub,  a_eq x = b_eq.
struct QuadraticProgram {
    Mat hessian;
    Vec linear;
    Mat a_ub;
    Vec b_ub;
    Mat a_eq;
    Vec b_eq;
};

enum class QpStatus { optimal, infeasible, not_convex, iteration_limit };

inline const char* to_string(QpStatus s) {
    switch (s) {
        case QpStatus::optimal: return "optimal";
        case QpStatus::infeasible: return "infeasible";
        case QpStatus::not_convex: return "not_convex";
        case QpStatus::iteration_limit: return "iteration_limit";
    }
    return "?";
}

/// Multipliers follow Hx + g + a_ubᵀu + a_eqᵀλ = 0 with u ≥ 0.
struct QpResult {
    QpStatus status = QpStatus::infeasible;
    Vec x;
    Vec u;
    Vec lambda;
    double objective = 0.0;
    int iterations = 0;
};

namespace detail {

struct ActiveSet {
    std::vector<int> ids;  // equality j stored as -(j+1), inequality i as i
    std::vector<double> mult;
};

}  // namespace detail

/// Requires a positive definite Hessian; reports not_convex otherwise.
inline QpResult solve_qp(const QuadraticProgram& qp, int max_iters = 0) {
    const Eigen::Index n = qp.linear.size();
    require(qp.hessian.rows() == n && qp.hessian.cols() == n, "qp: hessian size mismatch");
    require(qp.a_ub.rows() == qp.b_ub.size() && (qp.a_ub.rows() == 0 || qp.a_ub.cols() == n),
            "qp: inequality block mismatch");
    require(qp.a_eq.rows() == qp.b_eq.size() && (qp.a_eq.rows() == 0 || qp.a_eq.cols() == n),
            "qp: equality block mismatch");
    const Eigen::Index m_ub = qp.a_ub.rows(), m_eq = qp.a_eq.rows();
    if (max_iters <= 0) max_iters = static_cast<int>(50 * (n + m_ub + m_eq) + 100);

    QpResult res;
    Eigen::LLT<Mat> llt(qp.hessian);
    if (llt.info() != Eigen::Success) {
        res.status = QpStatus::not_convex;
        return res;
    }

    // GI works with constraints nᵀx ≥ rhs; x ≤ b rows become (−a)ᵀx ≥ −b.
    auto normal = [&](int id) -> Vec {
        if (id < 0) return qp.a_eq.row(-id - 1).transpose();
        return -qp.a_ub.row(id).transpose();
    };
    auto rhs = [&](int id) -> double { return id < 0 ? qp.b_eq(-id - 1) : -qp.b_ub(id); };
    auto slack = [&](int id, const Vec& x) -> double { return normal(id).dot(x) - rhs(id); };

    Vec x = llt.solve(-qp.linear);
    detail::ActiveSet act;

    // step direction z in primal space and r in the multiplier space of the active set
    auto step_dirs = [&](const Vec& np, Vec& z, Vec& r) {
        const auto q = static_cast<Eigen::Index>(act.ids.size());
        Vec hinv_np = llt.solve(np);
        if (q == 0) {
            z = hinv_np;
            r.resize(0);
            return;
        }
        Mat nmat(n, q);
        for (Eigen::Index k = 0; k < q; ++k) nmat.col(k) = normal(act.ids[static_cast<std::size_t>(k)]);
        Mat hinv_n = llt.solve(nmat);
        Mat m = nmat.transpose() * hinv_n;
        r = m.colPivHouseholderQr().solve(nmat.transpose() * hinv_np);
        z = hinv_np - hinv_n * r;
    };

    auto scale_of = [&](int id) {
        return 1e-9 * (1.0 + std::abs(rhs(id)) + normal(id).norm() * (1.0 + x.cwiseAbs().maxCoeff()));
    };

    // equalities first
    for (Eigen::Index j = 0; j < m_eq; ++j) {
        int id = -static_cast<int>(j) - 1;
        Vec np = normal(id), z, r;
        step_dirs(np, z, r);
        double c = slack(id, x);
        double denom = z.dot(np);
        if (z.norm() <= 1e-12 * (1.0 + np.norm())) {
            if (std::abs(c) > scale_of(id) * 1e3) {
                res.status = QpStatus::infeasible;
                return res;
            }
            continue;  // linearly dependent and consistent
        }
        double t = -c / denom;
        x += t * z;
        for (std::size_t k = 0; k < act.mult.size(); ++k) act.mult[k] -= t * r(static_cast<Eigen::Index>(k));
        act.ids.push_back(id);
        act.mult.push_back(t);
        ++res.iterations;
    }

    for (;;) {
        if (res.iterations > max_iters) {
            res.status = QpStatus::iteration_limit;
            break;
        }
        // most violated inequality
        int p = -1;
        double worst = 0.0;
        for (Eigen::Index i = 0; i < m_ub; ++i) {
            int id = static_cast<int>(i);
            bool active = false;
            for (int a : act.ids)
                if (a == id) active = true;
            if (active) continue;
            double c = slack(id, x);
            double nrm = qp.a_ub.row(i).norm();
            if (c < -scale_of(id) && c / (nrm > 0 ? nrm : 1.0) < worst) {
                worst = c / (nrm > 0 ? nrm : 1.0);
                p = id;
            }
        }
        if (p < 0) {
            res.status = QpStatus::optimal;
            break;
        }
        Vec np = normal(p);
        double up = 0.0;
        bool added = false;
        while (!added) {
            if (++res.iterations > max_iters) break;
            Vec z, r;
            step_dirs(np, z, r);
            // partial step limit from dropping an inequality whose multiplier hits zero
            double t1 = kInf;
            int drop = -1;
            for (std::size_t k = 0; k < act.ids.size(); ++k) {
                if (act.ids[k] < 0) continue;
                double rk = r(static_cast<Eigen::Index>(k));
                if (rk > 1e-14) {
                    double ratio = act.mult[k] / rk;
                    if (ratio < t1) {
                        t1 = ratio;
                        drop = static_cast<int>(k);
                    }
                }
            }
            double znorm = z.norm();
            if (znorm <= 1e-12 * (1.0 + np.norm())) {
                if (drop < 0) {
                    res.status = QpStatus::infeasible;
                    res.x = x;
                    return res;
                }
                for (std::size_t k = 0; k < act.mult.size(); ++k) act.mult[k] -= t1 * r(static_cast<Eigen::Index>(k));
                up += t1;
                act.ids.erase(act.ids.begin() + drop);
                act.mult.erase(act.mult.begin() + drop);
                continue;
            }
            double t2 = -slack(p, x) / z.dot(np);
            double t = std::min(t1, t2);
            x += t * z;
            for (std::size_t k = 0; k < act.mult.size(); ++k) act.mult[k] -= t * r(static_cast<Eigen::Index>(k));
            up += t;
            if (t2 <= t1) {
                act.ids.push_back(p);
                act.mult.push_back(up);
                added = true;
            } else {
                act.ids.erase(act.ids.begin() + drop);
                act.mult.erase(act.mult.begin() + drop);
            }
        }
        if (!added) {
            res.status = QpStatus::iteration_limit;
            break;
        }
    }

    res.x = x;
    res.u = Vec::Zero(m_ub);
    res.lambda = Vec::Zero(m_eq);
    for (std::size_t k = 0; k < act.ids.size(); ++k) {
        int id = act.ids[k];
        if (id < 0) res.lambda(-id - 1) = -act.mult[k];
        else res.u(id) = std::max(0.0, act.mult[k]);
    }
    res.objective = 0.5 * x.dot(qp.hessian * x) + qp.linear.dot(x);
    return res;
}

/// Convex QP with a merely semidefinite Hessian: proximal-point iterations on
/// strictly convex subproblems, warm-centred at the previous iterate.
inline QpResult solve_qp_psd(const QuadraticProgram& qp, double prox = 0.0, int outer = 200) {
    const Eigen::Index n = qp.linear.size();
    if (prox <= 0.0) prox = 1e-6 * std::max(1.0, qp.hessian.cwiseAbs().maxCoeff());
    QuadraticProgram sub = qp;
    sub.hessian = qp.hessian + prox * Mat::Identity(n, n);
    Vec center = Vec::Zero(n);
    QpResult res;
    for (int k = 0; k < outer; ++k) {
        sub.linear = qp.linear - prox * center;
        QpResult next = solve_qp(sub);
        next.iterations += res.iterations;
        res = next;
        if (res.status != QpStatus::optimal) return res;
        double move = (res.x - center).norm();
        center = res.x;
        if (move <= 1e-10 * (1.0 + res.x.norm())) break;
    }
    res.objective = 0.5 * res.x.dot(qp.hessian * res.x) + qp.linear.dot(res.x);
    return res;
}

/// min ½‖a x − b‖²  with x_j ≥ 0 wherever nonneg(j) is true (others free).
/// Solved as a QP with a tiny ridge so that rank-deficient systems stay well posed.
inline Vec nonneg_least_squares(const Mat& a, const Vec& b, const std::vector<bool>& nonneg) {
    const Eigen::Index n = a.cols();
    require(static_cast<Eigen::Index>(nonneg.size()) == n, "nnls: mask size mismatch");
    if (n == 0) return Vec();
    QuadraticProgram qp;
    Mat ata = a.transpose() * a;
    double ridge = 1e-12 * std::max(1.0, ata.diagonal().maxCoeff());
    qp.hessian = ata + ridge * Mat::Identity(n, n);
    qp.linear = -a.transpose() * b;
    int m = 0;
    for (bool f : nonneg)
        if (f) ++m;
    qp.a_ub = Mat::Zero(m, n);
    qp.b_ub = Vec::Zero(m);
    int r = 0;
    for (Eigen::Index j = 0; j < n; ++j)
        if (nonneg[static_cast<std::size_t>(j)]) qp.a_ub(r++, j) = -1.0;
    QpResult res = solve_qp(qp);
    if (res.status != QpStatus::optimal) throw NumericalError("nnls: inner QP failed");
    for (Eigen::Index j = 0; j < n; ++j)
        if (nonneg[static_cast<std::size_t>(j)]) res.x(j) = std::max(0.0, res.x(j));
    return res.x;
}

}  // namespace imop

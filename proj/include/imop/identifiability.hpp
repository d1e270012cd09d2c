#pragma once

// Hausdorff semi-distance, efficiency membership and the non-identifiability statistic.

#include "io.hpp"
#include "search.hpp"
#include "solver.hpp"

#include <algorithm>
#include <random>

namespace imop {

/// sup over x ∈ X of the distance from x to the nearest point of Y.
inline double hausdorff_semi(const std::vector<Vec>& x, const std::vector<Vec>& y) {
    require(!x.empty() && !y.empty(), "hausdorff_semi: empty point set");
    double worst = 0.0;
    for (const auto& a : x) {
        double best = kInf;
        for (const auto& b : y) {
            require(a.size() == b.size(), "hausdorff_semi: dimension mismatch");
            best = std::min(best, (a - b).squaredNorm());
        }
        worst = std::max(worst, best);
    }
    return std::sqrt(worst);
}

struct EfficiencyCheck {
    bool efficient = false;
    double slack = kInf;  // min over k of the distance to S(w_k, θ)
    int weight = -1;      // index of the closest weight
};

namespace detail {

struct WeightedSolutions {
    std::vector<ForwardSolution> sol;
    std::vector<Vec> cost;  // combined cost vector for linear objectives
    bool linear = false;
    bool ok = true;
};

inline WeightedSolutions solve_weights(const ConcreteDmp& d, const std::vector<Vec>& weights, int threads) {
    WeightedSolutions ws;
    ws.sol.resize(weights.size());
    parallel_for(weights.size(), threads, [&](std::size_t k) { ws.sol[k] = solve_wp(d, weights[k]); });
    for (const auto& s : ws.sol)
        if (s.status != SolveStatus::optimal) ws.ok = false;
    ws.linear = true;
    for (const auto& f : d.objectives)
        if (f.has_quadratic() || !f.powers.empty()) ws.linear = false;
    if (ws.linear)
        for (const auto& w : weights) ws.cost.push_back(d.combine(w).c);
    return ws;
}

inline EfficiencyCheck membership(const ConcreteDmp& d, const WeightedSolutions& ws, const std::vector<Vec>& weights,
                                  const Vec& x) {
    EfficiencyCheck c;
    if (!ws.ok) return c;
    const std::size_t kc = ws.sol.size();
    std::vector<double> gap;
    double scale = 1.0 + x.cwiseAbs().maxCoeff();
    bool feasible = d.infeasibility(x) <= 1e-9 * scale;
    for (std::size_t k = 0; k < kc; ++k) {
        double dist = (x - ws.sol[k].x).norm();
        if (dist < c.slack) {
            c.slack = dist;
            c.weight = static_cast<int>(k);
        }
        if (ws.linear) {
            double v = ws.cost[k].dot(ws.sol[k].x);
            gap.push_back(ws.cost[k].dot(x) - v);
            if (feasible && gap.back() <= 1e-9 * (1.0 + std::abs(v))) {
                c.slack = 0.0;
                c.weight = static_cast<int>(k);
                return c;
            }
        }
    }
    if (ws.linear && feasible) {
        // the optimal face may reach x even when its lexmin vertex does not
        std::vector<std::size_t> order(kc);
        for (std::size_t k = 0; k < kc; ++k) order[k] = k;
        std::size_t top = std::min<std::size_t>(3, kc);
        std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(top), order.end(),
                          [&](std::size_t a, std::size_t b) { return gap[a] < gap[b]; });
        for (std::size_t q = 0; q < top; ++q) {
            std::size_t k = order[q];
            double dist = distance_to_solution_set(d, weights[k], x, ws.sol[k]);
            if (dist < c.slack) {
                c.slack = dist;
                c.weight = static_cast<int>(k);
            }
        }
    }
    return c;
}

}  // namespace detail

/// Whether x lies within τ of some S(w_k, θ), k over the given weights.
inline EfficiencyCheck is_efficient_under(const ConcreteDmp& d, const Vec& x, const std::vector<Vec>& weights, double tau,
                                          int threads = 1) {
    require(!weights.empty(), "is_efficient_under: no weights");
    require(x.size() == d.n(), "is_efficient_under: point has the wrong dimension");
    auto ws = detail::solve_weights(d, weights, threads);
    EfficiencyCheck c = detail::membership(d, ws, weights, x);
    c.efficient = c.slack <= tau;
    return c;
}

inline EfficiencyCheck is_efficient_under(const DmpInstance& inst, const Vec& theta, const Vec& x,
                                          const std::vector<Vec>& weights, double tau, int threads = 1) {
    inst.space.validate(theta, 1e-7);
    return is_efficient_under(apply_params(inst, theta), x, weights, tau, threads);
}

struct IdentOptions {
    int k = 0;            // size of the weight set used upstream; recorded only
    int n_prime = 200;    // efficient points generated under θ̂
    int k_prime = 200;    // weights in the membership test
    double tau = 1e-3;    // membership tolerance, scaled by 1 + ‖x‖
    double zeta = 1e-3;   // decision threshold on z_test
    int rays = 24;        // random directions probed from θ̂
    int starts = 4;       // best ray endpoints refined by pattern search
    int max_evals = 3000; // membership evaluations overall
    double initial_step = 0.25;
    double min_step = 1e-4;
    std::uint64_t seed = 0;
    int threads = 1;

    void validate() const {
        require(n_prime >= 1 && k_prime >= 1, "identifiability: weight-set sizes must be positive");
        require(tau > 0.0 && zeta >= 0.0, "identifiability: tolerances must be positive");
        require(rays >= 0 && starts >= 0 && max_evals >= 1, "identifiability: search counts must be nonnegative");
        require(initial_step > 0.0 && min_step > 0.0, "identifiability: steps must be positive");
    }
};

struct IdentifiabilityReport {
    double z_test = 0.0;
    Vec theta_hat;
    Vec theta_far;
    double membership_slack = 0.0;  // max_i min_k distance under θ_far
    double excess = 0.0;            // max_i (slack_i − τ_i); ≤ 0 when θ_far is admissible
    double tolerance = 0.0;         // max_i τ_i
    double grid_slack = 0.0;        // max_i slack_i under θ̂ itself
    int k = 0, n_prime = 0, k_prime = 0;
    int distinct_points = 0;
    int evals = 0;
    int feasible_evals = 0;
    bool non_identifiable = false;
    std::string status;
};

inline json to_json(const IdentifiabilityReport& r) {
    return json{{"z_test", detail::num_json(r.z_test)},
                {"non_identifiable", r.non_identifiable},
                {"theta_hat", to_json(r.theta_hat)},
                {"theta_far", to_json(r.theta_far)},
                {"membership_slack", detail::num_json(r.membership_slack)},
                {"excess", detail::num_json(r.excess)},
                {"tolerance", detail::num_json(r.tolerance)},
                {"grid_slack", detail::num_json(r.grid_slack)},
                {"K", r.k},
                {"N_prime", r.n_prime},
                {"K_prime", r.k_prime},
                {"distinct_points", r.distinct_points},
                {"evals", r.evals},
                {"feasible_evals", r.feasible_evals},
                {"status", r.status}};
}

namespace detail {

// Largest t ≥ 0 with lo ≤ θ + t d ≤ hi.
inline double ray_limit(const ParamSpace& s, const Vec& theta, const Vec& d) {
    double t = kInf;
    for (Eigen::Index j = 0; j < d.size(); ++j) {
        if (d(j) > 1e-15) t = std::min(t, (s.upper(j) - theta(j)) / d(j));
        else if (d(j) < -1e-15) t = std::min(t, (s.lower(j) - theta(j)) / d(j));
    }
    return std::max(0.0, t);
}

}  // namespace detail

/// Search for the parameter furthest from θ̂ in L1 that keeps θ̂'s sampled
/// efficient points efficient. The result is a lower bound on the maximum.
inline IdentifiabilityReport test_identifiability(const DmpInstance& inst, const Vec& theta_hat,
                                                  const IdentOptions& opt = {}) {
    opt.validate();
    const ParamSpace& s = inst.space;
    s.validate(theta_hat, 1e-7);
    const int p = inst.p();
    IdentifiabilityReport rep;
    rep.theta_hat = theta_hat;
    rep.theta_far = theta_hat;
    rep.k = opt.k;
    rep.n_prime = opt.n_prime;
    rep.k_prime = opt.k_prime;

    WeightDist wd;
    std::vector<Vec> gen_w = random_weights(p, opt.n_prime, wd, opt.seed);
    std::vector<Vec> pts;
    for (const auto& x : solve_all(apply_params(inst, theta_hat), gen_w, opt.threads)) {
        bool dup = false;
        for (const auto& q : pts)
            if ((q - x).cwiseAbs().maxCoeff() <= 1e-10 * (1.0 + x.cwiseAbs().maxCoeff())) dup = true;
        if (!dup) pts.push_back(x);
    }
    rep.distinct_points = static_cast<int>(pts.size());
    std::vector<Vec> kw = grid_weights(p, opt.k_prime, opt.seed + 1);

    // the grid cannot reproduce θ̂'s own points exactly; that discretization error is allowed on top of τ
    std::vector<double> tol(pts.size());
    {
        ConcreteDmp d = apply_params(inst, theta_hat);
        auto ws = detail::solve_weights(d, kw, opt.threads);
        for (std::size_t i = 0; i < pts.size(); ++i) {
            double g = detail::membership(d, ws, kw, pts[i]).slack;
            rep.grid_slack = std::max(rep.grid_slack, g);
            tol[i] = opt.tau * (1.0 + pts[i].norm()) + g;
            rep.tolerance = std::max(rep.tolerance, tol[i]);
        }
    }

    auto l1 = [&](const Vec& th) { return (th - theta_hat).lpNorm<1>(); };
    auto admissible = [&](const Vec& th) {
        ++rep.evals;
        ConcreteDmp d = apply_params(inst, th);
        auto ws = detail::solve_weights(d, kw, opt.threads);
        if (!ws.ok) return false;
        for (std::size_t i = 0; i < pts.size(); ++i)
            if (detail::membership(d, ws, kw, pts[i]).slack > tol[i]) return false;
        ++rep.feasible_evals;
        return true;
    };
    auto budget_left = [&] { return rep.evals < opt.max_evals; };

    // tangent directions: box poll directions, per-objective rescaling and random draws
    auto fixed = s.fixed_mask();
    Mat cons = s.norm_rows;
    for (Eigen::Index j = 0; j < s.dim(); ++j)
        if (fixed[static_cast<std::size_t>(j)]) cons = vstack(cons, Mat(Vec::Unit(s.dim(), j).transpose()));
    Mat z = null_space(cons, s.dim());
    std::vector<Vec> poll = poll_directions(s);
    if (z.cols() == 0 || poll.empty()) {
        rep.status = "single-point";
        return rep;
    }
    std::vector<Vec> rays = poll;
    auto tangent = [&](const Vec& v) { return Vec(z * (z.transpose() * v)); };
    for (int l = -1; l < p; ++l) {
        Vec v = Vec::Zero(s.dim());
        for (std::size_t q = 0; q < inst.slots.size(); ++q) {
            const auto& sl = inst.slots[q];
            bool obj_slot = sl.kind == SlotKind::linear_coef || sl.kind == SlotKind::quad_diag;
            if (obj_slot && (l < 0 || sl.objective == l)) v(static_cast<Eigen::Index>(q)) = theta_hat(static_cast<Eigen::Index>(q));
        }
        Vec t = tangent(v);
        if (t.norm() > 1e-12) {
            rays.push_back(t);
            rays.push_back(-t);
        }
    }
    std::mt19937_64 rng(opt.seed + 2);
    std::normal_distribution<double> nd;
    for (int r = 0; r < opt.rays; ++r) {
        Vec g(z.cols());
        for (Eigen::Index c = 0; c < g.size(); ++c) g(c) = nd(rng);
        Vec v = z * g;
        rays.push_back(v.cwiseProduct(s.width()));
    }

    std::vector<Vec> ends;
    for (const auto& d : rays) {
        if (!budget_left()) break;
        double tmax = detail::ray_limit(s, theta_hat, d);
        if (tmax * d.cwiseAbs().maxCoeff() < 1e-12) continue;
        Vec far = theta_hat + tmax * d;
        if (admissible(far)) {
            ends.push_back(far);
            continue;
        }
        double lo = 0.0, hi = tmax;
        for (int it = 0; it < 12 && budget_left(); ++it) {
            double mid = 0.5 * (lo + hi);
            if (admissible(theta_hat + mid * d)) lo = mid;
            else hi = mid;
        }
        if (lo > 0.0) ends.push_back(theta_hat + lo * d);
    }
    std::stable_sort(ends.begin(), ends.end(), [&](const Vec& a, const Vec& b) { return l1(a) > l1(b); });
    if (static_cast<int>(ends.size()) > opt.starts) ends.resize(static_cast<std::size_t>(opt.starts));
    ends.insert(ends.begin(), theta_hat);

    Vec best = theta_hat;
    double best_v = 0.0;
    for (const auto& st : ends) {
        Vec x = st;
        double fx = l1(x);
        double step = opt.initial_step;
        while (step >= opt.min_step && budget_left()) {
            std::vector<Vec> dirs = poll;
            Vec radial = x - theta_hat;
            if (radial.norm() > 1e-12) dirs.insert(dirs.begin(), radial / std::max(1e-12, radial.cwiseQuotient(s.width()).cwiseAbs().maxCoeff()));
            bool moved = false;
            for (const auto& d : dirs) {
                double t = std::min(step, detail::ray_limit(s, x, d));
                if (t * d.cwiseAbs().maxCoeff() < 1e-12) continue;
                Vec cand = x + t * d;
                double fc = l1(cand);
                if (fc <= fx + 1e-12) continue;
                if (!budget_left()) break;
                if (admissible(cand)) {
                    x = cand;
                    fx = fc;
                    moved = true;
                    break;
                }
            }
            step = moved ? std::min(1.0, 2.0 * step) : 0.5 * step;
        }
        if (fx > best_v) {
            best_v = fx;
            best = x;
        }
    }

    // independent re-check of the reported parameter
    ConcreteDmp d = apply_params(inst, best);
    auto ws = detail::solve_weights(d, kw, opt.threads);
    double slack = 0.0, excess = -kInf;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        double g = detail::membership(d, ws, kw, pts[i]).slack;
        slack = std::max(slack, g);
        excess = std::max(excess, g - tol[i]);
    }
    if (excess > 0.0) {
        best = theta_hat;
        best_v = 0.0;
        rep.status = "recheck-failed";
    } else {
        rep.status = budget_left() ? "converged" : "eval-limit";
    }
    rep.theta_far = best;
    rep.z_test = best_v;
    rep.membership_slack = excess > 0.0 ? rep.grid_slack : slack;
    rep.excess = excess > 0.0 ? 0.0 : excess;
    rep.non_identifiable = rep.z_test > opt.zeta;
    return rep;
}

}  // namespace imop

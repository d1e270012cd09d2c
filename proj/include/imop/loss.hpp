#pragma once

// Sampled loss, empirical risk and the risk bound.

#include "parallel.hpp"
#include "solver.hpp"

#include <cmath>
#include <functional>
#include <optional>
#include <vector>

namespace imop {

struct ObservationSet {
    std::vector<Vec> y;
    std::optional<Vec> theta_true;
    std::vector<Vec> true_weights;            // empty when unknown
    std::vector<std::vector<int>> side_info;  // admissible indices for the first N′ observations

    int size() const { return static_cast<int>(y.size()); }
    Eigen::Index dim() const { return y.empty() ? 0 : y.front().size(); }

    double radius() const {
        double r = 0.0;
        for (const auto& v : y) r = std::max(r, v.norm());
        return r;
    }

    void validate() const {
        require(!y.empty(), "observation set is empty");
        for (const auto& v : y) {
            require(v.size() == dim(), "observations differ in dimension");
            require(v.allFinite(), "observation has a non-finite entry");
        }
        require(side_info.size() <= y.size(), "more side-information sets than observations");
        for (const auto& s : side_info) require(!s.empty(), "empty side-information set");
        require(true_weights.empty() || true_weights.size() == y.size(), "true weights do not match observations");
    }
};

struct Assignment {
    std::vector<int> index;
    std::vector<double> dist2;
};

struct ClusterStats {
    int count = 0;
    std::optional<Vec> centroid;
    double scatter = 0.0;
};

struct LossReport {
    double value = 0.0;
    std::vector<double> per_cluster;  // contribution of each front point to the value
    bool has_bound = false;
    double bound = 0.0, b = 0.0, r = 0.0, delta = 0.0;
    int k = 0, n = 0;
};

/// Nearest admissible front point; ties go to the lowest index.
inline std::pair<int, double> nearest(const Vec& y, const std::vector<Vec>& pts, const std::vector<int>* allowed = nullptr) {
    int best = -1;
    double bd = kInf;
    auto visit = [&](int k) {
        require(k >= 0 && k < static_cast<int>(pts.size()), "side-information index out of range");
        double d = (y - pts[static_cast<std::size_t>(k)]).squaredNorm();
        if (d < bd || (d == bd && k < best)) {
            bd = d;
            best = k;
        }
    };
    if (allowed) {
        for (int k : *allowed) visit(k);
    } else {
        for (int k = 0; k < static_cast<int>(pts.size()); ++k) visit(k);
    }
    require(best >= 0, "no admissible front point");
    return {best, bd};
}

inline Assignment assign(const ObservationSet& obs, const std::vector<Vec>& pts) {
    require(!pts.empty(), "front is empty");
    Assignment a;
    a.index.resize(obs.y.size());
    a.dist2.resize(obs.y.size());
    for (std::size_t i = 0; i < obs.y.size(); ++i) {
        const std::vector<int>* allowed = i < obs.side_info.size() ? &obs.side_info[i] : nullptr;
        auto [k, d] = nearest(obs.y[i], pts, allowed);
        a.index[i] = k;
        a.dist2[i] = d;
    }
    return a;
}

/// Mean squared distance to the assigned front points. With λ the first N′
/// (side-information) terms are weighted by λ.
inline LossReport empirical_risk(const ObservationSet& obs, const std::vector<Vec>& pts, double lambda = 1.0) {
    require(lambda > 0.0, "lambda must be positive");
    Assignment a = assign(obs, pts);
    LossReport rep;
    rep.per_cluster.assign(pts.size(), 0.0);
    const double n = static_cast<double>(obs.size());
    double total = 0.0;
    for (std::size_t i = 0; i < a.index.size(); ++i) {
        double term = (i < obs.side_info.size() ? lambda : 1.0) * a.dist2[i] / n;
        total += term;
        rep.per_cluster[static_cast<std::size_t>(a.index[i])] += term;
    }
    rep.value = total;
    return rep;
}

inline std::vector<ClusterStats> cluster_stats(const ObservationSet& obs, const Assignment& a, std::size_t k_count) {
    std::vector<ClusterStats> st(k_count);
    std::vector<Vec> sum(k_count);
    for (std::size_t i = 0; i < a.index.size(); ++i) {
        auto k = static_cast<std::size_t>(a.index[i]);
        require(k < k_count, "assignment index out of range");
        if (st[k].count == 0) sum[k] = Vec::Zero(obs.dim());
        sum[k] += obs.y[i];
        ++st[k].count;
    }
    for (std::size_t k = 0; k < k_count; ++k)
        if (st[k].count) st[k].centroid = sum[k] / st[k].count;
    for (std::size_t i = 0; i < a.index.size(); ++i) {
        auto k = static_cast<std::size_t>(a.index[i]);
        st[k].scatter += (obs.y[i] - *st[k].centroid).squaredNorm();
    }
    for (auto& s : st)
        if (s.count) s.scatter /= s.count;
    return st;
}

/// (1/N) Σ_k |C_k| (‖ȳ_k − x_k‖² + Var(C_k)) over the non-empty clusters.
inline double cluster_decomposition(const ObservationSet& obs, const Assignment& a, const std::vector<Vec>& pts) {
    auto st = cluster_stats(obs, a, pts.size());
    double v = 0.0;
    for (std::size_t k = 0; k < st.size(); ++k)
        if (st[k].count) v += st[k].count * ((*st[k].centroid - pts[k]).squaredNorm() + st[k].scatter);
    return v / obs.size();
}

/// Draws `count` observations from a fixed law; the seed fully determines the draw.
using ObservationGenerator = std::function<ObservationSet(int count, std::uint64_t seed)>;

struct RiskEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    int samples = 0;
    int reference_points = 0;
};

/// Number of reference weights for the dense front: 10⁴ for p = 2, the 461-point lattice for p = 3.
inline int reference_weight_count(int p) { return p == 2 ? 10000 : (p == 3 ? 461 : 2000); }

inline std::vector<Vec> reference_front(const ConcreteDmp& d, int k_ref, int threads = 1) {
    return solve_all(d, grid_weights(d.p(), k_ref), threads);
}

/// Mean squared distance of fresh observations to a dense reference front, with its standard error.
inline RiskEstimate monte_carlo_risk(const std::vector<Vec>& front, const ObservationGenerator& gen, int samples,
                                     std::uint64_t seed, int threads = 1) {
    require(samples >= 1, "need at least one validation sample");
    ObservationSet val = gen(samples, seed);
    std::vector<double> d(val.y.size());
    parallel_for(val.y.size(), threads,
                 [&](std::size_t i) { d[i] = nearest(val.y[i], front).second; });
    RiskEstimate r;
    r.samples = static_cast<int>(d.size());
    r.reference_points = static_cast<int>(front.size());
    double s = 0.0, s2 = 0.0;
    for (double v : d) {
        s += v;
        s2 += v * v;
    }
    r.mean = s / r.samples;
    double var = r.samples > 1 ? std::max(0.0, (s2 - r.samples * r.mean * r.mean) / (r.samples - 1)) : 0.0;
    r.std_error = std::sqrt(var / r.samples);
    return r;
}

inline RiskEstimate monte_carlo_risk(const DmpInstance& inst, const Vec& theta, const ObservationGenerator& gen,
                                     int samples, std::uint64_t seed, int k_ref = 0, int threads = 1) {
    ConcreteDmp d = apply_params(inst, theta);
    if (k_ref <= 0) k_ref = reference_weight_count(d.p());
    std::vector<Vec> front;
    for (const auto& x : reference_front(d, k_ref, threads)) front.push_back(inst.observe(x));
    return monte_carlo_risk(front, gen, samples, seed, threads);
}

/// M + (1/√N)(2K(B² + 2BR) + (B + R)² √(log(1/δ)/2)); holds with probability ≥ 1 − δ.
inline double generalization_bound(double m, int n, int k, double b, double r, double delta) {
    require(n >= 1 && k >= 1, "N and K must be positive");
    require(delta > 0.0 && delta < 1.0, "delta must lie in (0, 1)");
    require(b > 0.0 && r > 0.0, "B and R must be positive");
    double tail = sq(b + r) * std::sqrt(std::log(1.0 / delta) / 2.0);
    return m + (2.0 * k * (b * b + 2.0 * b * r) + tail) / std::sqrt(static_cast<double>(n));
}

inline LossReport with_bound(LossReport rep, int n, int k, double b, double r, double delta) {
    rep.has_bound = true;
    rep.bound = generalization_bound(rep.value, n, k, b, r, delta);
    rep.b = b;
    rep.r = r;
    rep.delta = delta;
    rep.k = k;
    rep.n = n;
    return rep;
}

}  // namespace imop

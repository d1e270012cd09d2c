#pragma once

// Synthetic observation sets and the metrics computed on estimates.

#include "loss.hpp"

#include <array>
#include <random>

namespace imop {

enum class NoiseKind { none, gaussian, truncated_gaussian, uniform };

struct NoiseModel {
    NoiseKind kind = NoiseKind::none;
    double sigma = 0.1;
    double lo = -1.0, hi = 1.0;  // truncation interval
    double a = 0.25;             // uniform half-width
    double round_to = 0.0;       // granularity applied after the additive noise; 0 = none

    void validate() const {
        if (kind == NoiseKind::gaussian || kind == NoiseKind::truncated_gaussian) require(sigma > 0.0, "noise: sigma must be positive");
        if (kind == NoiseKind::truncated_gaussian) require(lo < 0.0 && hi > 0.0, "noise: truncation must contain 0");
        if (kind == NoiseKind::uniform) require(a > 0.0, "noise: half-width must be positive");
        require(round_to >= 0.0, "noise: rounding granularity must be nonnegative");
    }

    double draw(std::mt19937_64& rng) const {
        switch (kind) {
            case NoiseKind::gaussian: return std::normal_distribution<double>(0.0, sigma)(rng);
            case NoiseKind::truncated_gaussian: {
                std::normal_distribution<double> nd(0.0, sigma);
                for (;;) {
                    double v = nd(rng);
                    if (v >= lo && v <= hi) return v;
                }
            }
            case NoiseKind::uniform: return std::uniform_real_distribution<double>(-a, a)(rng);
            default: return 0.0;
        }
    }

    Vec apply(const Vec& x, std::mt19937_64& rng) const {
        Vec y = x;
        for (Eigen::Index j = 0; j < y.size(); ++j) y(j) += draw(rng);
        if (round_to > 0.0)
            for (Eigen::Index j = 0; j < y.size(); ++j) y(j) = std::round(y(j) / round_to) * round_to;
        return y;
    }
};

/// How the noiseless decisions are produced: weighted-sum solutions under a weight law,
/// or uniform points on a union of planar polygons (given by ordered vertices).
struct DataLaw {
    WeightDist weights;
    std::vector<std::vector<Vec>> faces;
};

namespace detail {

inline Vec uniform_on_faces(const std::vector<std::vector<Vec>>& faces, std::mt19937_64& rng) {
    std::vector<std::array<Vec, 3>> tri;
    std::vector<double> area;
    for (const auto& f : faces) {
        require(f.size() >= 3, "face needs three vertices");
        for (std::size_t k = 1; k + 1 < f.size(); ++k) {
            tri.push_back({f[0], f[k], f[k + 1]});
            Eigen::Vector3d u = Eigen::Vector3d::Zero(), v = Eigen::Vector3d::Zero();
            u.head(f[0].size()) = f[k] - f[0];
            v.head(f[0].size()) = f[k + 1] - f[0];
            area.push_back(0.5 * u.cross(v).norm());
        }
    }
    std::discrete_distribution<std::size_t> pick(area.begin(), area.end());
    const auto& t = tri[pick(rng)];
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    double r1 = u01(rng), r2 = u01(rng);
    if (r1 + r2 > 1.0) {
        r1 = 1.0 - r1;
        r2 = 1.0 - r2;
    }
    return t[0] + r1 * (t[1] - t[0]) + r2 * (t[2] - t[0]);
}

}  // namespace detail

/// y_i = observe(x_i) + ε_i with x_i drawn per the law under θ_true. Ground truth is kept for metrics.
inline ObservationSet generate_observations(const DmpInstance& inst, const Vec& theta_true, const DataLaw& law,
                                            const NoiseModel& noise, int n, std::uint64_t seed) {
    require(n >= 1, "need at least one observation");
    noise.validate();
    ConcreteDmp d = apply_params(inst, theta_true);
    std::mt19937_64 rng(seed);
    ObservationSet obs;
    obs.theta_true = theta_true;
    if (law.faces.empty()) {
        std::vector<Vec> ws = random_weights(d.p(), n, law.weights, rng());
        for (const auto& w : ws) {
            ForwardSolution s = solve_wp(d, w);
            if (s.status != SolveStatus::optimal) throw NumericalError("data generation: forward solve failed");
            obs.y.push_back(noise.apply(inst.observe(s.x), rng));
        }
        obs.true_weights = ws;
    } else {
        for (int i = 0; i < n; ++i) obs.y.push_back(noise.apply(inst.observe(detail::uniform_on_faces(law.faces, rng)), rng));
    }
    return obs;
}

/// ‖θ̂ − θ_true‖₂, divided by ‖θ_true‖₂ in relative mode.
inline double estimation_error(const Vec& est, const Vec& truth, bool relative = false) {
    require(est.size() == truth.size(), "estimate and truth have different dimensions");
    double e = (est - truth).norm();
    if (relative) {
        require(truth.norm() > 0.0, "relative error needs a nonzero truth");
        e /= truth.norm();
    }
    return e;
}

struct WeightHistogram {
    std::vector<double> edges;  // bins + 1 edges on [0, 1]
    std::vector<int> counts;
    double mean = 0.0;
    double sd = 0.0;
};

/// Histogram of values in [0, 1] with their sample mean and sd.
inline WeightHistogram weight_histogram(const std::vector<double>& values, int bins = 20) {
    require(bins >= 1, "need at least one bin");
    require(!values.empty(), "empty histogram input");
    WeightHistogram h;
    for (int b = 0; b <= bins; ++b) h.edges.push_back(static_cast<double>(b) / bins);
    h.counts.assign(static_cast<std::size_t>(bins), 0);
    double s = 0.0, s2 = 0.0;
    for (double v : values) {
        int b = std::min(bins - 1, static_cast<int>(std::floor(v * bins)));
        ++h.counts[static_cast<std::size_t>(std::max(0, b))];
        s += v;
        s2 += v * v;
    }
    const double n = static_cast<double>(values.size());
    h.mean = s / n;
    h.sd = std::sqrt(std::max(0.0, s2 / n - h.mean * h.mean));
    return h;
}

/// Histogram of the first weight coordinate of each observation's assigned weight.
inline WeightHistogram weight_histogram(const std::vector<Vec>& weights, const Assignment& a, int bins = 20) {
    require(!a.index.empty(), "empty assignment");
    std::vector<double> v;
    v.reserve(a.index.size());
    for (int k : a.index) v.push_back(weights[static_cast<std::size_t>(k)](0));
    return weight_histogram(v, bins);
}

}  // namespace imop

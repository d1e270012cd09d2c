#pragma once

// Parameter estimators: the shared inner fit, the clustering estimator, consensus ADMM,
// the KKT-residual initializer and an exhaustive grid oracle.

#include "io.hpp"
#include "loss.hpp"
#include "search.hpp"

#include <chrono>
#include <optional>
#include <set>
#include <unordered_set>

namespace imop {

struct FitConfig {
    SearchMethod method = SearchMethod::pattern;
    int starts = 5;
    int max_evals = 600;  // per start
    double tol = 1e-4;    // smallest step, as a fraction of the box width
    double initial_step = 0.1;
    std::uint64_t seed = 0;
    int threads = 1;

    void validate() const {
        require(starts >= 1 && max_evals >= 1, "fit config: counts must be positive");
        require(tol > 0.0 && initial_step > 0.0, "fit config: tolerances must be positive");
    }
};

struct Proximal {
    Vec center;
    double rho = 1.0;
};

struct FitResult {
    Vec theta;
    double value = kInf;
    int evals = 0;
    bool flagged = false;  // every start hit its evaluation cap
};

/// Observed images of the weighted-sum solutions of θ; empty when a solve fails.
inline std::vector<Vec> observed_front(const DmpInstance& inst, const Vec& theta, const std::vector<Vec>& weights,
                                       int threads = 1, std::vector<Vec>* decisions = nullptr) {
    ConcreteDmp d = apply_params(inst, theta);
    std::vector<Vec> xs(weights.size());
    std::vector<char> ok(weights.size(), 1);
    parallel_for(weights.size(), threads, [&](std::size_t k) {
        ForwardSolution s = solve_wp(d, weights[k]);
        if (s.status != SolveStatus::optimal) ok[k] = 0;
        else xs[k] = s.x;
    });
    for (char c : ok)
        if (!c) return {};
    if (decisions) *decisions = xs;
    std::vector<Vec> out;
    out.reserve(xs.size());
    for (const auto& x : xs) out.push_back(inst.observe(x));
    return out;
}

namespace detail {

// Σ counts_k · min over admissible k′ of ‖target_k − x_k′‖², divided by `normalizer`.
inline double matching_cost(const std::vector<Vec>& pts, const std::vector<Vec>& targets, const std::vector<double>& counts,
                            const std::vector<std::vector<int>>* admissible, double normalizer) {
    if (pts.empty()) return kInf;
    double v = 0.0;
    for (std::size_t k = 0; k < targets.size(); ++k) {
        const std::vector<int>* a = admissible && k < admissible->size() ? &(*admissible)[k] : nullptr;
        v += counts[k] * nearest(targets[k], pts, a).second;
    }
    return v / normalizer;
}

}  // namespace detail

/// Minimize (1/normalizer) Σ_k counts_k min_k′ ‖target_k − S(w_k′, θ)‖² (+ proximal term)
/// by multi-start derivative-free search. normalizer ≤ 0 means Σ counts.
inline FitResult inner_fit(const DmpInstance& inst, const std::vector<Vec>& weights, const std::vector<Vec>& targets,
                           const std::vector<double>& counts, const Vec& theta_init, const FitConfig& cfg,
                           const std::optional<Proximal>& prox = std::nullopt,
                           const std::vector<Vec>& extra_starts = {},
                           const std::vector<std::vector<int>>* admissible = nullptr, double normalizer = 0.0) {
    cfg.validate();
    require(!weights.empty(), "inner fit: no weights");
    require(targets.size() == counts.size() && !targets.empty(), "inner fit: targets and counts differ");
    if (normalizer <= 0.0)
        for (double c : counts) normalizer += c;
    const ParamSpace& s = inst.space;
    ThetaObjective f = [&](const Vec& th) {
        double v = detail::matching_cost(observed_front(inst, th, weights, cfg.threads), targets, counts, admissible, normalizer);
        if (prox) v += 0.5 * prox->rho * (th - prox->center).squaredNorm();
        return v;
    };
    std::vector<Vec> starts = {project(s, theta_init)};
    for (const auto& e : extra_starts)
        if (static_cast<int>(starts.size()) < cfg.starts) starts.push_back(project(s, e));
    std::mt19937_64 rng(cfg.seed);
    while (static_cast<int>(starts.size()) < cfg.starts) starts.push_back(random_theta(s, rng));

    SearchOptions so;
    so.method = cfg.method;
    so.initial_step = cfg.initial_step;
    so.min_step = cfg.tol;
    so.max_evals = cfg.max_evals;
    FitResult best;
    best.flagged = true;
    for (const auto& st : starts) {
        SearchResult r = local_search(f, s, st, so);
        best.evals += r.evals;
        if (r.converged) best.flagged = false;
        // strict improvement keeps the earliest start on ties, so θ_init wins when nothing is better
        if (r.value < best.value) {
            best.value = r.value;
            best.theta = r.theta;
        }
    }
    return best;
}

// ---------------------------------------------------------------- k-means++

struct KMeansResult {
    std::vector<int> label;
    std::vector<Vec> centroid;
    double inertia = kInf;
};

inline KMeansResult kmeans(const std::vector<Vec>& y, int k, std::mt19937_64& rng, int max_iters = 100) {
    const int n = static_cast<int>(y.size());
    k = std::min(k, n);
    std::vector<Vec> c;
    c.push_back(y[static_cast<std::size_t>(std::uniform_int_distribution<int>(0, n - 1)(rng))]);
    std::vector<double> d2(static_cast<std::size_t>(n), kInf);
    while (static_cast<int>(c.size()) < k) {
        double total = 0.0;
        for (int i = 0; i < n; ++i) {
            d2[static_cast<std::size_t>(i)] = std::min(d2[static_cast<std::size_t>(i)], (y[static_cast<std::size_t>(i)] - c.back()).squaredNorm());
            total += d2[static_cast<std::size_t>(i)];
        }
        int pick = 0;
        if (total <= 0.0) {
            pick = std::uniform_int_distribution<int>(0, n - 1)(rng);
        } else {
            double u = std::uniform_real_distribution<double>(0.0, total)(rng), acc = 0.0;
            for (pick = 0; pick < n - 1; ++pick) {
                acc += d2[static_cast<std::size_t>(pick)];
                if (acc >= u) break;
            }
        }
        c.push_back(y[static_cast<std::size_t>(pick)]);
    }
    KMeansResult r;
    r.label.assign(static_cast<std::size_t>(n), -1);
    for (int it = 0; it < max_iters; ++it) {
        bool changed = false;
        for (int i = 0; i < n; ++i) {
            int l = nearest(y[static_cast<std::size_t>(i)], c).first;
            if (l != r.label[static_cast<std::size_t>(i)]) changed = true;
            r.label[static_cast<std::size_t>(i)] = l;
        }
        if (!changed) break;
        std::vector<Vec> sum(c.size(), Vec::Zero(y[0].size()));
        std::vector<int> cnt(c.size(), 0);
        for (int i = 0; i < n; ++i) {
            sum[static_cast<std::size_t>(r.label[static_cast<std::size_t>(i)])] += y[static_cast<std::size_t>(i)];
            ++cnt[static_cast<std::size_t>(r.label[static_cast<std::size_t>(i)])];
        }
        for (std::size_t j = 0; j < c.size(); ++j)
            if (cnt[j]) c[j] = sum[j] / cnt[j];
    }
    r.centroid = c;
    r.inertia = 0.0;
    for (int i = 0; i < n; ++i)
        r.inertia += (y[static_cast<std::size_t>(i)] - c[static_cast<std::size_t>(r.label[static_cast<std::size_t>(i)])]).squaredNorm();
    return r;
}

inline KMeansResult kmeans_best_of(const std::vector<Vec>& y, int k, int restarts, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    KMeansResult best;
    for (int r = 0; r < restarts; ++r) {
        KMeansResult cur = kmeans(y, k, rng);
        if (cur.inertia < best.inertia) best = std::move(cur);
    }
    return best;
}

// ---------------------------------------------------------------- results

struct TraceStep {
    std::string step;  // "init-update", "assignment", "update", "admm"
    double objective = 0.0;
    int changes = -1;  // assignment changes; -1 when not applicable
};

struct AdmmState {
    Vec theta;
    std::vector<Vec> local;
    std::vector<Vec> dual;
    double rho = 0.5;
    int iterations = 0;
    std::vector<double> r_pri, r_dual;
    std::vector<std::vector<Vec>> local_history;  // θᵗ,ᵏ for k = 1..iterations
    std::vector<Vec> mean_history;                 // θ̄ᵏ for k = 0..iterations, θ̄⁰ = θ⁰
    std::string status = "running";
};

struct EstimateResult {
    Vec theta;
    std::vector<Vec> front;           // decisions x_k
    std::vector<Vec> observed_front;  // observed images of x_k
    Assignment assignment;
    double objective = kInf;
    std::vector<TraceStep> trace;
    double wall_time = 0.0;
    std::uint64_t seed = 0;
    std::string method;
    std::string status = "ok";
    std::optional<AdmmState> admm;
};

inline json to_json(const EstimateResult& r, bool timings = false) {
    json j;
    j["method"] = r.method;
    j["theta"] = to_json(r.theta);
    j["objective"] = r.objective;
    j["status"] = r.status;
    j["seed"] = r.seed;
    j["assignment"] = r.assignment.index;
    json tr = json::array();
    for (const auto& t : r.trace) tr.push_back({{"step", t.step}, {"objective", t.objective}, {"changes", t.changes}});
    j["trace"] = tr;
    json fr = json::array();
    for (const auto& x : r.front) fr.push_back(to_json(x));
    j["front"] = fr;
    if (r.admm) {
        j["admm"] = {{"iterations", r.admm->iterations}, {"rho", r.admm->rho}, {"r_pri", r.admm->r_pri},
                     {"r_dual", r.admm->r_dual}, {"status", r.admm->status}};
    }
    if (timings) j["wall_time"] = r.wall_time;
    return j;
}

namespace detail {

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline std::size_t hash_assignment(const std::vector<int>& a) {
    std::size_t h = 1469598103934665603ULL;
    for (int v : a) h = (h ^ static_cast<std::size_t>(v + 1)) * 1099511628211ULL;
    return h;
}

inline void finish(EstimateResult& r, const DmpInstance& inst, const ObservationSet& obs, const std::vector<Vec>& weights,
                   double lambda, int threads) {
    r.observed_front = observed_front(inst, r.theta, weights, threads, &r.front);
    if (r.observed_front.empty()) throw NumericalError("forward solve failed at the estimate");
    r.assignment = assign(obs, r.observed_front);
    r.objective = empirical_risk(obs, r.observed_front, lambda).value;
}

}  // namespace detail

// ---------------------------------------------------------------- KKT initializer

struct KktInitOptions {
    int alternations = 10;
    SearchOptions search;
};

namespace detail {

// Best (stationarity + complementarity) residual for y under weight w and its multipliers.
inline double kkt_pick(const ConcreteDmp& d, const Vec& w, const Vec& y, Vec& u, Vec& lam) {
    const Eigen::Index m = d.m_stacked(), me = d.a_eq.rows(), n = d.n();
    Vec grad = d.combine(w).gradient(y);
    Vec gy = m ? Vec(d.g * y - d.h) : Vec(0);
    Mat a = Mat::Zero(n + m, m + me);
    if (m) a.block(0, 0, n, m) = d.g.transpose();
    if (me) a.block(0, m, n, me) = d.a_eq.transpose();
    if (m) a.block(n, 0, m, m) = gy.cwiseAbs().asDiagonal();
    Vec rhs = Vec::Zero(n + m);
    rhs.head(n) = -grad;
    std::vector<bool> nonneg(static_cast<std::size_t>(m + me), false);
    for (Eigen::Index i = 0; i < m; ++i) nonneg[static_cast<std::size_t>(i)] = true;
    Vec z = m + me ? nonneg_least_squares(a, rhs, nonneg) : Vec(0);
    u = z.head(m);
    lam = z.tail(me);
    Vec r = grad;
    if (m) r += d.g.transpose() * u;
    if (me) r += d.a_eq.transpose() * lam;
    return r.norm() + (m ? std::abs(u.dot(gy)) : 0.0);
}

}  // namespace detail

/// Sum over observations of the KKT residual with the best weight and multipliers.
inline double kkt_residual_objective(const DmpInstance& inst, const Vec& theta, const std::vector<Vec>& y,
                                     const std::vector<Vec>& weights) {
    ConcreteDmp d = apply_params(inst, theta);
    double total = 0.0;
    Vec u, lam;
    for (const auto& yi : y) {
        double best = kInf;
        for (const auto& w : weights) best = std::min(best, detail::kkt_pick(d, w, yi, u, lam));
        total += best;
    }
    return total;
}

/// Alternate weight/multiplier picks with a pattern search over θ. Needs full-decision observations.
inline Vec kkt_init(const DmpInstance& inst, const ObservationSet& obs, const std::vector<Vec>& weights,
                    const KktInitOptions& opt = {}) {
    Vec theta = project(inst.space, 0.5 * (inst.space.lower + inst.space.upper));
    if (obs.dim() != inst.n() || inst.n_free() == 0) return theta;
    const std::size_t n_obs = obs.y.size();
    std::vector<int> pick(n_obs, 0);
    std::vector<Vec> us(n_obs), lams(n_obs);
    double prev = kInf;
    for (int alt = 0; alt < opt.alternations; ++alt) {
        ConcreteDmp d = apply_params(inst, theta);
        for (std::size_t i = 0; i < n_obs; ++i) {
            double best = kInf;
            Vec u, lam;
            for (std::size_t k = 0; k < weights.size(); ++k) {
                double v = detail::kkt_pick(d, weights[k], obs.y[i], u, lam);
                if (v < best) {
                    best = v;
                    pick[i] = static_cast<int>(k);
                    us[i] = u;
                    lams[i] = lam;
                }
            }
        }
        ThetaObjective f = [&](const Vec& th) {
            ConcreteDmp dt = apply_params(inst, th);
            double total = 0.0;
            for (std::size_t i = 0; i < n_obs; ++i) {
                const Vec& y = obs.y[i];
                Vec r = dt.combine(weights[static_cast<std::size_t>(pick[i])]).gradient(y);
                if (dt.m_stacked()) r += dt.g.transpose() * us[i];
                if (dt.a_eq.rows()) r += dt.a_eq.transpose() * lams[i];
                total += r.norm();
                if (dt.m_stacked()) total += std::abs(us[i].dot(dt.g * y - dt.h));
            }
            return total;
        };
        SearchResult r = local_search(f, inst.space, theta, opt.search);
        theta = r.theta;
        if (r.value >= prev - 1e-12 * (1.0 + std::abs(prev))) break;
        prev = r.value;
    }
    return theta;
}

// ---------------------------------------------------------------- clustering estimator

enum class InitMode { kmeanspp, kkt, provided };

struct ClusteringOptions {
    FitConfig fit;
    InitMode init = InitMode::kmeanspp;
    int kmeans_restarts = 50;
    int max_outer = 5;
    int outer_starts = 1;  // complete runs; extra runs switch to the other init mode, then reseed k-means++
    std::optional<Vec> theta0;
    double lambda = 1.0;  // weight of side-information observations
};

namespace detail {

struct Clusters {
    std::vector<Vec> targets;
    std::vector<double> counts;
    std::vector<int> ids;  // cluster index of each target
    double scatter = 0.0;  // Σ_k count_k Var(C_k)
};

inline Clusters make_clusters(const ObservationSet& obs, const std::vector<int>& label, int k_count, double lambda) {
    Clusters c;
    std::vector<Vec> sum(static_cast<std::size_t>(k_count));
    std::vector<double> cnt(static_cast<std::size_t>(k_count), 0.0);
    for (std::size_t i = 0; i < obs.y.size(); ++i) {
        auto k = static_cast<std::size_t>(label[i]);
        double om = i < obs.side_info.size() ? lambda : 1.0;
        if (cnt[k] == 0.0) sum[k] = Vec::Zero(obs.dim());
        sum[k] += om * obs.y[i];
        cnt[k] += om;
    }
    std::vector<Vec> cen(static_cast<std::size_t>(k_count));
    for (int k = 0; k < k_count; ++k)
        if (cnt[static_cast<std::size_t>(k)] > 0.0) {
            cen[static_cast<std::size_t>(k)] = sum[static_cast<std::size_t>(k)] / cnt[static_cast<std::size_t>(k)];
            c.targets.push_back(cen[static_cast<std::size_t>(k)]);
            c.counts.push_back(cnt[static_cast<std::size_t>(k)]);
            c.ids.push_back(k);
        }
    for (std::size_t i = 0; i < obs.y.size(); ++i) {
        double om = i < obs.side_info.size() ? lambda : 1.0;
        c.scatter += om * (obs.y[i] - cen[static_cast<std::size_t>(label[i])]).squaredNorm();
    }
    return c;
}

}  // namespace detail

/// Alternating assignment / update estimator seeded by k-means++ clustering.
namespace detail {

inline EstimateResult clustering_run(const DmpInstance& inst, const ObservationSet& obs, const std::vector<Vec>& weights,
                                     const ClusteringOptions& opt) {
    auto t0 = std::chrono::steady_clock::now();
    obs.validate();
    require(obs.dim() == inst.obs_dim(), "observations do not match the observed dimension");
    require(opt.max_outer >= 1, "need at least one outer iteration");
    const FitConfig& fc = opt.fit;
    const double n_obs = static_cast<double>(obs.size());
    const bool side = !obs.side_info.empty();
    EstimateResult res;
    res.method = "clustering";
    res.seed = fc.seed;

    // with side information the update works on raw observations, so admissible sets are respected
    std::vector<Vec> raw_targets = obs.y;
    std::vector<double> raw_counts;
    for (std::size_t i = 0; i < obs.y.size(); ++i) raw_counts.push_back(i < obs.side_info.size() ? opt.lambda : 1.0);

    std::vector<Vec> extra;
    Vec theta_start = project(inst.space, 0.5 * (inst.space.lower + inst.space.upper));
    if (opt.init == InitMode::provided) {
        require(opt.theta0.has_value(), "provided initialization without theta0");
        inst.space.validate(*opt.theta0, 1e-7);
        theta_start = *opt.theta0;
    } else if (opt.init == InitMode::kkt || (fc.starts > 1 && inst.family() != Family::linear)) {
        Vec k0 = kkt_init(inst, obs, weights);
        if (opt.init == InitMode::kkt) theta_start = k0;
        else extra.push_back(k0);
    } else if (opt.theta0) {
        theta_start = project(inst.space, *opt.theta0);
    }

    auto update = [&](const detail::Clusters& c, const Vec& from) {
        if (side) return inner_fit(inst, weights, raw_targets, raw_counts, from, fc, std::nullopt, extra, &obs.side_info, n_obs);
        return inner_fit(inst, weights, c.targets, c.counts, from, fc, std::nullopt, extra, nullptr, n_obs);
    };
    auto scatter_term = [&](const detail::Clusters& c) { return side ? 0.0 : c.scatter / n_obs; };

    // initialization: k-means++ partition, then one update on its centroids
    KMeansResult km = kmeans_best_of(obs.y, static_cast<int>(weights.size()), opt.kmeans_restarts, fc.seed);
    detail::Clusters cl = detail::make_clusters(obs, km.label, static_cast<int>(km.centroid.size()), opt.lambda);
    FitResult fr = update(cl, theta_start);
    Vec theta = fr.theta;
    res.trace.push_back({"init-update", fr.value + scatter_term(cl), -1});
    std::vector<Vec> pts = observed_front(inst, theta, weights, fc.threads);
    if (pts.empty()) throw NumericalError("forward solve failed during estimation");

    // map each k-means cluster to the front point it was matched with
    std::vector<int> prev(obs.y.size());
    {
        std::vector<int> to_front(km.centroid.size(), 0);
        for (std::size_t j = 0; j < cl.targets.size(); ++j)
            to_front[static_cast<std::size_t>(cl.ids[j])] = nearest(cl.targets[j], pts).first;
        for (std::size_t i = 0; i < obs.y.size(); ++i) prev[i] = to_front[static_cast<std::size_t>(km.label[i])];
    }
    std::unordered_set<std::size_t> seen;
    for (int outer = 0; outer < opt.max_outer; ++outer) {
        Assignment a = assign(obs, pts);
        int changes = 0;
        for (std::size_t i = 0; i < a.index.size(); ++i) changes += a.index[i] != prev[i];
        res.trace.push_back({"assignment", empirical_risk(obs, pts, opt.lambda).value, changes});
        if (outer > 0 && changes == 0) {
            res.status = "converged";
            break;
        }
        if (!seen.insert(detail::hash_assignment(a.index)).second) {
            res.status = "cycle";
            break;
        }
        prev = a.index;
        cl = detail::make_clusters(obs, a.index, static_cast<int>(weights.size()), opt.lambda);
        fr = update(cl, theta);
        theta = fr.theta;
        res.trace.push_back({"update", fr.value + scatter_term(cl), -1});
        pts = observed_front(inst, theta, weights, fc.threads);
        if (pts.empty()) throw NumericalError("forward solve failed during estimation");
        if (outer + 1 == opt.max_outer) res.status = "iteration-limit";
    }
    res.theta = theta;
    detail::finish(res, inst, obs, weights, opt.lambda, fc.threads);
    res.wall_time = detail::seconds_since(t0);
    return res;
}

}  // namespace detail

inline EstimateResult estimate_clustering(const DmpInstance& inst, const ObservationSet& obs, const std::vector<Vec>& weights,
                                          const ClusteringOptions& opt = {}) {
    require(opt.outer_starts >= 1, "need at least one outer start");
    auto t0 = std::chrono::steady_clock::now();
    EstimateResult best = detail::clustering_run(inst, obs, weights, opt);
    for (int j = 1; j < opt.outer_starts; ++j) {
        ClusteringOptions o = opt;
        if (j == 1 && opt.init != InitMode::provided) {
            o.init = opt.init == InitMode::kkt ? InitMode::kmeanspp : InitMode::kkt;
        } else {
            o.init = InitMode::kmeanspp;
            o.fit.seed = opt.fit.seed + static_cast<std::uint64_t>(j) * 7919;
        }
        EstimateResult r = detail::clustering_run(inst, obs, weights, o);
        if (r.objective < best.objective) best = std::move(r);
    }
    best.seed = opt.fit.seed;
    best.wall_time = detail::seconds_since(t0);
    return best;
}

// ---------------------------------------------------------------- consensus ADMM

struct AdmmOptions {
    double rho = 0.5;
    int groups = 0;  // 0 means N/2 (at least 1)
    double eps_pri = 1e-3;
    double eps_dual = 1e-3;
    int max_iters = 100;
    std::optional<Vec> theta0;  // default: the zero vector, projected
    FitConfig local;            // one warm start per local update

    AdmmOptions() {
        local.starts = 1;
        local.tol = 1e-6;
        local.initial_step = 0.05;
        local.max_evals = 800;
    }
};

/// Contiguous equal blocks in observation order; the remainder joins the last block.
inline std::vector<std::vector<int>> partition_groups(int n, int groups) {
    require(groups >= 1 && groups <= n, "group count must lie in [1, N]");
    std::vector<std::vector<int>> g(static_cast<std::size_t>(groups));
    int size = n / groups;
    for (int i = 0; i < n; ++i) g[static_cast<std::size_t>(std::min(i / size, groups - 1))].push_back(i);
    return g;
}

/// Recompute (‖r_pri‖, ‖r_dual‖) of iteration k (1-based) from the stored iterates.
inline std::pair<double, double> admm_residuals(const AdmmState& s, int k) {
    const auto& loc = s.local_history[static_cast<std::size_t>(k - 1)];
    Vec mean = Vec::Zero(loc[0].size());
    for (const auto& t : loc) mean += t;
    mean /= static_cast<double>(loc.size());
    double pri = 0.0;
    for (const auto& t : loc) pri += (t - mean).squaredNorm();
    double dual = std::sqrt(static_cast<double>(loc.size())) * s.rho *
                  (mean - s.mean_history[static_cast<std::size_t>(k - 1)]).norm();
    return {std::sqrt(pri), dual};
}

inline EstimateResult estimate_admm(const DmpInstance& inst, const ObservationSet& obs, const std::vector<Vec>& weights,
                                    const AdmmOptions& opt = {}) {
    auto t0 = std::chrono::steady_clock::now();
    obs.validate();
    require(obs.dim() == inst.obs_dim(), "observations do not match the observed dimension");
    require(opt.rho > 0.0, "rho must be positive");
    require(opt.max_iters >= 1, "need at least one iteration");
    const int n = obs.size();
    int t_count = opt.groups > 0 ? opt.groups : std::max(1, n / 2);
    auto groups = partition_groups(n, t_count);
    const ParamSpace& s = inst.space;
    const Eigen::Index dim = s.dim();

    AdmmState st;
    st.rho = opt.rho;
    st.theta = project(s, opt.theta0 ? *opt.theta0 : Vec(Vec::Zero(dim)));
    st.local.assign(groups.size(), st.theta);
    st.dual.assign(groups.size(), Vec::Zero(dim));
    st.mean_history.push_back(st.theta);

    std::vector<std::vector<Vec>> g_targets(groups.size());
    std::vector<std::vector<double>> g_counts(groups.size());
    for (std::size_t t = 0; t < groups.size(); ++t)
        for (int i : groups[t]) {
            g_targets[t].push_back(obs.y[static_cast<std::size_t>(i)]);
            g_counts[t].push_back(1.0);
        }
    FitConfig lc = opt.local;
    lc.starts = 1;
    lc.threads = 1;

    EstimateResult res;
    res.method = "admm";
    res.seed = opt.local.seed;
    for (int k = 1; k <= opt.max_iters; ++k) {
        std::vector<Vec> next(groups.size());
        parallel_for(groups.size(), opt.local.threads, [&](std::size_t t) {
            Proximal px{st.theta - st.dual[t], st.rho};
            // sum (not mean) of the group's losses, as in the augmented Lagrangian
            next[t] = inner_fit(inst, weights, g_targets[t], g_counts[t], st.local[t], lc, px, {}, nullptr, 1.0).theta;
        });
        st.local = next;
        Vec avg = Vec::Zero(dim), mean = Vec::Zero(dim);
        for (std::size_t t = 0; t < groups.size(); ++t) {
            avg += st.local[t] + st.dual[t];
            mean += st.local[t];
        }
        avg /= static_cast<double>(groups.size());
        mean /= static_cast<double>(groups.size());
        st.theta = project(s, avg);
        for (std::size_t t = 0; t < groups.size(); ++t) st.dual[t] += st.local[t] - st.theta;
        st.local_history.push_back(st.local);
        st.iterations = k;
        auto [pri, dual] = admm_residuals(st, k);
        st.mean_history.push_back(mean);
        st.r_pri.push_back(pri);
        st.r_dual.push_back(dual);
        if (pri < opt.eps_pri && dual < opt.eps_dual) {
            st.status = "converged";
            break;
        }
        if (k > 20 && st.r_pri[static_cast<std::size_t>(k - 21)] > 0.0 && pri > 10.0 * st.r_pri[static_cast<std::size_t>(k - 21)]) {
            st.status = "diverged";
            break;
        }
    }
    if (st.status == "running") st.status = "iteration-limit";
    res.status = st.status;
    res.theta = st.theta;
    detail::finish(res, inst, obs, weights, 1.0, opt.local.threads);
    res.trace.push_back({"admm", res.objective, -1});
    res.admm = std::move(st);
    res.wall_time = detail::seconds_since(t0);
    return res;
}

// ---------------------------------------------------------------- grid oracle

struct OracleResult {
    Vec theta;
    double value = kInf;
    long evaluated = 0;
};

/// Exhaustive evaluation of the empirical risk on a grid of the parameter manifold.
inline OracleResult brute_force_oracle(const DmpInstance& inst, const ObservationSet& obs, const std::vector<Vec>& weights,
                                       double resolution, long budget = 1000000, int threads = 1) {
    obs.validate();
    const ParamSpace& s = inst.space;
    auto fixed = s.fixed_mask();
    long free_dims = 0;
    for (bool f : fixed) free_dims += !f;
    Eigen::Index rank = s.norm_rows.rows() ? Eigen::ColPivHouseholderQR<Mat>(s.norm_rows).rank() : 0;
    require(free_dims - rank <= 3, "grid oracle supports at most three free directions");
    std::vector<Vec> grid = manifold_grid(s, resolution, budget);
    require(!grid.empty(), "parameter grid is empty");
    std::vector<double> val(grid.size(), kInf);
    parallel_for(grid.size(), threads, [&](std::size_t g) {
        auto pts = observed_front(inst, grid[g], weights);
        if (!pts.empty()) val[g] = empirical_risk(obs, pts).value;
    });
    OracleResult r;
    r.evaluated = static_cast<long>(grid.size());
    for (std::size_t g = 0; g < grid.size(); ++g)
        if (val[g] < r.value) {
            r.value = val[g];
            r.theta = grid[g];
        }
    return r;
}

}  // namespace imop

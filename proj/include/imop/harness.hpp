#pragma once

// Experiment campaigns: per-fixture data recipes, repeated estimation over
// (N, K) grids, metrics, CSV / JSON / plot-data output, and the bi-objective
// introduction demo.

#include "data.hpp"
#include "estimators.hpp"
#include "fixtures.hpp"
#include "identifiability.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>

namespace imop {

// ---------------------------------------------------------------- configuration

inline const char* to_string(WeightLaw l) {
    switch (l) {
        case WeightLaw::uniform_simplex: return "uniform-simplex";
        case WeightLaw::truncated_normal: return "truncated-normal";
        case WeightLaw::uniform_box: return "uniform-box";
    }
    return "?";
}

inline WeightLaw weight_law_from_string(const std::string& s) {
    if (s == "uniform-simplex") return WeightLaw::uniform_simplex;
    if (s == "truncated-normal") return WeightLaw::truncated_normal;
    if (s == "uniform-box") return WeightLaw::uniform_box;
    throw ValidationError("unknown weight law '" + s + "'");
}

inline const char* to_string(NoiseKind k) {
    switch (k) {
        case NoiseKind::none: return "none";
        case NoiseKind::gaussian: return "gaussian";
        case NoiseKind::truncated_gaussian: return "truncated-gaussian";
        case NoiseKind::uniform: return "uniform";
    }
    return "?";
}

inline NoiseKind noise_kind_from_string(const std::string& s) {
    if (s == "none") return NoiseKind::none;
    if (s == "gaussian") return NoiseKind::gaussian;
    if (s == "truncated-gaussian") return NoiseKind::truncated_gaussian;
    if (s == "uniform") return NoiseKind::uniform;
    throw ValidationError("unknown noise kind '" + s + "'");
}

inline const char* to_string(InitMode m) {
    switch (m) {
        case InitMode::kmeanspp: return "kmeans++";
        case InitMode::kkt: return "kkt";
        case InitMode::provided: return "provided";
    }
    return "?";
}

inline InitMode init_mode_from_string(const std::string& s) {
    if (s == "kmeans++") return InitMode::kmeanspp;
    if (s == "kkt") return InitMode::kkt;
    if (s == "provided") return InitMode::provided;
    throw ValidationError("unknown init mode '" + s + "'");
}

struct EstimatorConfig {
    std::string kind = "clustering";  // clustering | admm | oracle
    ClusteringOptions clustering;
    AdmmOptions admm;
    double oracle_resolution = 0.01;
    long oracle_budget = 1000000;
};

/// Validation-set prediction error M(θ̂). samples = 0 switches it off.
struct PredictionConfig {
    int samples = 0;
    int k_ref = 0;  // 0: reference_weight_count(p)
    std::uint64_t seed_offset = 1000003;
};

struct ExperimentConfig {
    std::string name;
    std::string fixture;
    std::optional<Vec> theta_true;  // defaults to the fixture's truth
    std::vector<int> n_values;
    std::vector<int> k_values;
    DataLaw law;
    NoiseModel noise;
    EstimatorConfig estimator;
    int repetitions = 1;
    std::uint64_t seed = 0;
    bool relative_error = false;
    PredictionConfig prediction;
    int bins = 20;
    int threads = 1;
    bool timings = false;
    std::string out_dir;  // empty: nothing is written

    void validate() const {
        require(!fixture.empty(), "experiment: fixture id is missing");
        fixtures::by_id(fixture);
        require(repetitions >= 1, "experiment: repetitions must be at least 1");
        require(!n_values.empty() && !k_values.empty(), "experiment: N and K lists must be nonempty");
        for (int n : n_values) require(n >= 1, "experiment: N must be positive");
        for (int k : k_values) require(k >= 1, "experiment: K must be positive");
        require(estimator.kind == "clustering" || estimator.kind == "admm" || estimator.kind == "oracle",
                "experiment: estimator must be clustering, admm or oracle");
        require(bins >= 1, "experiment: bins must be positive");
        require(prediction.samples >= 0 && prediction.k_ref >= 0, "experiment: prediction sizes must be nonnegative");
        noise.validate();
        estimator.clustering.fit.validate();
        require(estimator.clustering.outer_starts >= 1 && estimator.clustering.max_outer >= 1, "experiment: clustering counts must be positive");
        require(estimator.admm.rho > 0.0 && estimator.admm.max_iters >= 1, "experiment: invalid ADMM settings");
        require(estimator.oracle_resolution > 0.0, "experiment: oracle resolution must be positive");
    }

    Vec truth() const { return theta_true ? *theta_true : fixtures::true_theta(fixture); }
    std::string stem() const { return name.empty() ? fixture : name; }
};

/// Ordered vertices of the two efficient faces of the tri-objective LP.
inline std::vector<std::vector<Vec>> mlp_efficient_faces() {
    using fixtures::vec;
    return {{vec({5, 0, 0}), vec({3, 0, 2}), vec({0, 3, 2}), vec({0, 5, 0})},
            {vec({3, 0, 2}), vec({0, 0, 3}), vec({0, 3, 2})}};
}

/// Data recipe and estimator defaults of each fixture's experiment.
inline ExperimentConfig default_config(const std::string& fixture) {
    ExperimentConfig c;
    c.fixture = fixture;
    c.n_values = {20};
    c.k_values = {21};
    if (fixture == "mlp-triobj") {
        c.law.faces = mlp_efficient_faces();
        c.noise.kind = NoiseKind::gaussian;
        c.noise.sigma = 0.5;
        c.k_values = {50};
    } else if (fixture == "mqp-rhs") {
        c.noise.kind = NoiseKind::truncated_gaussian;
        c.noise.sigma = 0.1;
        c.noise.lo = -1.0;
        c.noise.hi = 1.0;
        c.estimator.kind = "admm";
    } else if (fixture == "mqp-obj") {
        c.noise.kind = NoiseKind::uniform;
        c.noise.a = 0.25;
        c.n_values = {50};
        c.estimator.clustering.outer_starts = 4;
        c.prediction.samples = 100000;
        c.prediction.k_ref = 10000;
    } else if (fixture == "portfolio") {
        c.law.weights.law = WeightLaw::truncated_normal;
        c.law.weights.mean = 0.5;
        c.law.weights.sd = 0.1;
        c.noise.round_to = 0.001;
        c.n_values = {1000};
        c.k_values = {41};
        c.estimator.clustering.init = InitMode::kkt;
        c.estimator.clustering.outer_starts = 2;
        c.estimator.clustering.max_outer = 10;
    } else if (fixture == "traffic") {
        c.law.weights.law = WeightLaw::uniform_box;
        c.law.weights.lo = 0.3;
        c.law.weights.hi = 0.7;
        c.noise.round_to = 10.0;
        c.n_values = {10};
        c.relative_error = true;
    } else if (fixture == "intro-biobj") {
        c.k_values = {11};
    } else {
        fixtures::by_id(fixture);
    }
    return c;
}

namespace detail {

inline std::vector<int> int_list(const json& j, const char* key) {
    require(j.is_number_integer() || j.is_array(), std::string("config: '") + key + "' must be an integer or a list");
    if (j.is_number_integer()) return {j.get<int>()};
    std::vector<int> out;
    for (const auto& v : j) {
        require(v.is_number_integer(), std::string("config: '") + key + "' entries must be integers");
        out.push_back(v.get<int>());
    }
    return out;
}

template <class T>
void read_if(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

inline void fit_from_json(const json& j, FitConfig& f) {
    if (j.contains("method")) f.method = search_method_from_string(j.at("method").get<std::string>());
    read_if(j, "starts", f.starts);
    read_if(j, "max_evals", f.max_evals);
    read_if(j, "tol", f.tol);
    read_if(j, "initial_step", f.initial_step);
}

inline json fit_to_json(const FitConfig& f) {
    return {{"method", to_string(f.method)}, {"starts", f.starts}, {"max_evals", f.max_evals}, {"tol", f.tol},
            {"initial_step", f.initial_step}};
}

}  // namespace detail

/// Parse an experiment document. Unspecified fields keep the fixture's defaults.
inline ExperimentConfig config_from_json(const json& j) {
    require(j.is_object(), "config: expected a JSON object");
    require(j.contains("fixture") && j.at("fixture").is_string(), "config: 'fixture' is required");
    try {
        ExperimentConfig c = default_config(j.at("fixture").get<std::string>());
        detail::read_if(j, "name", c.name);
        if (j.contains("theta_true")) c.theta_true = detail::vec_of(j.at("theta_true"));
        if (j.contains("N")) c.n_values = detail::int_list(j.at("N"), "N");
        if (j.contains("K")) c.k_values = detail::int_list(j.at("K"), "K");
        detail::read_if(j, "repetitions", c.repetitions);
        detail::read_if(j, "seed", c.seed);
        detail::read_if(j, "relative_error", c.relative_error);
        detail::read_if(j, "bins", c.bins);
        detail::read_if(j, "threads", c.threads);
        detail::read_if(j, "timings", c.timings);
        detail::read_if(j, "out_dir", c.out_dir);
        if (j.contains("weights")) {
            const json& w = j.at("weights");
            if (w.contains("law")) c.law.weights.law = weight_law_from_string(w.at("law").get<std::string>());
            detail::read_if(w, "mean", c.law.weights.mean);
            detail::read_if(w, "sd", c.law.weights.sd);
            detail::read_if(w, "lo", c.law.weights.lo);
            detail::read_if(w, "hi", c.law.weights.hi);
        }
        if (j.contains("faces")) {
            c.law.faces.clear();
            for (const auto& f : j.at("faces")) {
                std::vector<Vec> poly;
                for (const auto& v : f) poly.push_back(detail::vec_of(v));
                c.law.faces.push_back(poly);
            }
        }
        if (j.contains("noise")) {
            const json& n = j.at("noise");
            if (n.contains("kind")) c.noise.kind = noise_kind_from_string(n.at("kind").get<std::string>());
            detail::read_if(n, "sigma", c.noise.sigma);
            detail::read_if(n, "lo", c.noise.lo);
            detail::read_if(n, "hi", c.noise.hi);
            detail::read_if(n, "a", c.noise.a);
            detail::read_if(n, "round", c.noise.round_to);
        }
        if (j.contains("estimator")) {
            const json& e = j.at("estimator");
            if (e.is_string()) {
                c.estimator.kind = e.get<std::string>();
            } else {
                detail::read_if(e, "kind", c.estimator.kind);
                if (e.contains("fit")) detail::fit_from_json(e.at("fit"), c.estimator.clustering.fit);
                if (e.contains("init"))
                    c.estimator.clustering.init = init_mode_from_string(e.at("init").get<std::string>());
                detail::read_if(e, "kmeans_restarts", c.estimator.clustering.kmeans_restarts);
                detail::read_if(e, "max_outer", c.estimator.clustering.max_outer);
                detail::read_if(e, "outer_starts", c.estimator.clustering.outer_starts);
                if (e.contains("admm")) {
                    const json& a = e.at("admm");
                    detail::read_if(a, "rho", c.estimator.admm.rho);
                    detail::read_if(a, "groups", c.estimator.admm.groups);
                    detail::read_if(a, "eps_pri", c.estimator.admm.eps_pri);
                    detail::read_if(a, "eps_dual", c.estimator.admm.eps_dual);
                    detail::read_if(a, "max_iters", c.estimator.admm.max_iters);
                    if (a.contains("local")) detail::fit_from_json(a.at("local"), c.estimator.admm.local);
                }
                detail::read_if(e, "resolution", c.estimator.oracle_resolution);
                detail::read_if(e, "budget", c.estimator.oracle_budget);
            }
        }
        if (j.contains("prediction")) {
            const json& p = j.at("prediction");
            detail::read_if(p, "samples", c.prediction.samples);
            detail::read_if(p, "k_ref", c.prediction.k_ref);
            detail::read_if(p, "seed_offset", c.prediction.seed_offset);
        }
        c.validate();
        return c;
    } catch (const json::exception& e) {
        throw ValidationError(std::string("config: ") + e.what());
    }
}

inline json to_json(const ExperimentConfig& c) {
    json j;
    j["name"] = c.stem();
    j["fixture"] = c.fixture;
    j["theta_true"] = to_json(c.truth());
    j["N"] = c.n_values;
    j["K"] = c.k_values;
    j["repetitions"] = c.repetitions;
    j["seed"] = c.seed;
    j["relative_error"] = c.relative_error;
    j["bins"] = c.bins;
    if (c.law.faces.empty()) {
        j["weights"] = {{"law", to_string(c.law.weights.law)}, {"mean", c.law.weights.mean}, {"sd", c.law.weights.sd},
                        {"lo", c.law.weights.lo}, {"hi", c.law.weights.hi}};
    } else {
        json faces = json::array();
        for (const auto& f : c.law.faces) {
            json poly = json::array();
            for (const auto& v : f) poly.push_back(to_json(v));
            faces.push_back(poly);
        }
        j["faces"] = faces;
    }
    j["noise"] = {{"kind", to_string(c.noise.kind)}, {"sigma", c.noise.sigma}, {"lo", c.noise.lo}, {"hi", c.noise.hi},
                  {"a", c.noise.a}, {"round", c.noise.round_to}};
    const auto& e = c.estimator;
    j["estimator"] = {{"kind", e.kind},
                      {"fit", detail::fit_to_json(e.clustering.fit)},
                      {"init", to_string(e.clustering.init)},
                      {"kmeans_restarts", e.clustering.kmeans_restarts},
                      {"max_outer", e.clustering.max_outer},
                      {"outer_starts", e.clustering.outer_starts},
                      {"admm",
                       {{"rho", e.admm.rho}, {"groups", e.admm.groups}, {"eps_pri", e.admm.eps_pri},
                        {"eps_dual", e.admm.eps_dual}, {"max_iters", e.admm.max_iters},
                        {"local", detail::fit_to_json(e.admm.local)}}},
                      {"resolution", e.oracle_resolution},
                      {"budget", e.oracle_budget}};
    j["prediction"] = {{"samples", c.prediction.samples}, {"k_ref", c.prediction.k_ref},
                       {"seed_offset", c.prediction.seed_offset}};
    return j;
}

// ---------------------------------------------------------------- metrics

/// Mean squared distance of a fixed validation set to the dense observed front of θ̂.
inline double prediction_error(const DmpInstance& inst, const Vec& theta, const ObservationSet& validation, int k_ref = 0,
                               int threads = 1) {
    ConcreteDmp d = apply_params(inst, theta);
    if (k_ref <= 0) k_ref = reference_weight_count(d.p());
    std::vector<Vec> front;
    for (const auto& x : reference_front(d, k_ref, threads)) front.push_back(inst.observe(x));
    std::vector<double> dist(validation.y.size());
    parallel_for(validation.y.size(), threads, [&](std::size_t i) { dist[i] = nearest(validation.y[i], front).second; });
    double s = 0.0;
    for (double v : dist) s += v;
    return s / static_cast<double>(dist.size());
}

// ---------------------------------------------------------------- reports

struct RepetitionRow {
    int n = 0, k = 0, rep = 0;
    std::uint64_t seed = 0;
    std::string status = "ok";
    std::string message;
    Vec theta;
    double objective = std::nan("");
    double estimation_error = std::nan("");
    double prediction_error = std::nan("");
    double runtime = 0.0;
    int outer_iterations = 0;
    std::vector<int> changes;  // assignment changes per assignment step
    std::vector<double> assigned_weight;  // first weight coordinate per observation (p = 2)
    std::vector<double> r_pri, r_dual;
};

struct CellSummary {
    int n = 0, k = 0;
    int runs = 0, ok = 0;
    double error_mean = std::nan(""), error_sd = std::nan("");
    double prediction_mean = std::nan(""), prediction_sd = std::nan("");
    double objective_mean = std::nan("");
    std::optional<WeightHistogram> histogram;  // pooled over the cell's repetitions
    std::vector<double> changes_mean, changes_sd;
};

struct ExperimentReport {
    ExperimentConfig config;
    std::vector<RepetitionRow> rows;
    std::vector<CellSummary> cells;
    std::vector<std::string> files;

    const CellSummary& cell(int n, int k) const {
        for (const auto& c : cells)
            if (c.n == n && c.k == k) return c;
        throw ValidationError("no cell for the requested N and K");
    }
};

namespace detail {

inline std::pair<double, double> mean_sd(const std::vector<double>& v) {
    if (v.empty()) return {std::nan(""), std::nan("")};
    double s = 0.0;
    for (double x : v) s += x;
    double m = s / static_cast<double>(v.size());
    double s2 = 0.0;
    for (double x : v) s2 += sq(x - m);
    return {m, v.size() > 1 ? std::sqrt(s2 / static_cast<double>(v.size() - 1)) : 0.0};
}

/// Aggregates of one (N, K) cell, recomputed from its rows.
inline CellSummary summarize(int n, int k, const std::vector<const RepetitionRow*>& rows, int bins) {
    CellSummary c;
    c.n = n;
    c.k = k;
    c.runs = static_cast<int>(rows.size());
    std::vector<double> err, pred, obj, pooled;
    std::size_t longest = 0;
    for (const auto* r : rows) {
        if (r->status != "ok") continue;
        ++c.ok;
        err.push_back(r->estimation_error);
        obj.push_back(r->objective);
        if (std::isfinite(r->prediction_error)) pred.push_back(r->prediction_error);
        pooled.insert(pooled.end(), r->assigned_weight.begin(), r->assigned_weight.end());
        longest = std::max(longest, r->changes.size());
    }
    std::tie(c.error_mean, c.error_sd) = mean_sd(err);
    std::tie(c.prediction_mean, c.prediction_sd) = mean_sd(pred);
    c.objective_mean = mean_sd(obj).first;
    if (!pooled.empty()) c.histogram = weight_histogram(pooled, bins);
    for (std::size_t t = 0; t < longest; ++t) {
        std::vector<double> v;
        for (const auto* r : rows)
            if (r->status == "ok" && t < r->changes.size()) v.push_back(r->changes[t]);
        auto [m, s] = mean_sd(v);
        c.changes_mean.push_back(m);
        c.changes_sd.push_back(s);
    }
    return c;
}

inline std::string fmt(double v) {
    if (!std::isfinite(v)) return "";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

inline std::string csv_header(const ExperimentConfig& c, Eigen::Index dim) {
    std::string h = "fixture,estimator,N,K,rep,seed,status,objective,estimation_error,prediction_error,hist_mean,hist_sd,"
                    "outer_iterations";
    for (Eigen::Index q = 0; q < dim; ++q) h += ",theta_" + std::to_string(q + 1);
    if (c.timings) h += ",runtime";
    return h;
}

inline std::string csv_row(const ExperimentConfig& c, const RepetitionRow& r, Eigen::Index dim) {
    std::string hm, hs;
    if (!r.assigned_weight.empty()) {
        auto h = weight_histogram(r.assigned_weight, c.bins);
        hm = fmt(h.mean);
        hs = fmt(h.sd);
    }
    std::string s = c.fixture + "," + c.estimator.kind + "," + std::to_string(r.n) + "," + std::to_string(r.k) + "," +
                    std::to_string(r.rep) + "," + std::to_string(r.seed) + "," + r.status + "," + fmt(r.objective) + "," +
                    fmt(r.estimation_error) + "," + fmt(r.prediction_error) + "," + hm + "," + hs + "," +
                    std::to_string(r.outer_iterations);
    for (Eigen::Index q = 0; q < dim; ++q) s += "," + (q < r.theta.size() ? fmt(r.theta(q)) : std::string());
    if (c.timings) s += "," + fmt(r.runtime);
    return s;
}

inline json num_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json cell_to_json(const CellSummary& c) {
    json j = {{"N", c.n},
              {"K", c.k},
              {"runs", c.runs},
              {"ok", c.ok},
              {"estimation_error_mean", num_or_null(c.error_mean)},
              {"estimation_error_sd", num_or_null(c.error_sd)},
              {"prediction_error_mean", num_or_null(c.prediction_mean)},
              {"prediction_error_sd", num_or_null(c.prediction_sd)},
              {"objective_mean", num_or_null(c.objective_mean)}};
    if (c.histogram) {
        j["histogram"] = {{"edges", c.histogram->edges},
                          {"counts", c.histogram->counts},
                          {"mean", c.histogram->mean},
                          {"sd", c.histogram->sd}};
    }
    if (!c.changes_mean.empty()) {
        json m = json::array(), s = json::array();
        for (std::size_t t = 0; t < c.changes_mean.size(); ++t) {
            m.push_back(num_or_null(c.changes_mean[t]));
            s.push_back(num_or_null(c.changes_sd[t]));
        }
        j["assignment_changes_mean"] = m;
        j["assignment_changes_sd"] = s;
    }
    return j;
}

inline std::string cell_tag(int n, int k) { return "N" + std::to_string(n) + "_K" + std::to_string(k); }

inline void write_text(const std::filesystem::path& p, const std::string& text) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw ValidationError("cannot write " + p.string());
    f << text;
    if (!f) throw ValidationError("write failed for " + p.string());
}

/// Plot-data files of one cell; returns the paths written.
inline std::vector<std::string> write_plot_data(const std::filesystem::path& dir, const std::string& stem,
                                                const CellSummary& c, const std::vector<const RepetitionRow*>& rows) {
    std::vector<std::string> out;
    const std::string tag = cell_tag(c.n, c.k);
    bool any_res = false;
    std::string res = "rep,iteration,r_pri,r_dual\n";
    for (const auto* r : rows)
        for (std::size_t t = 0; t < r->r_pri.size(); ++t) {
            any_res = true;
            res += std::to_string(r->rep) + "," + std::to_string(t + 1) + "," + fmt(r->r_pri[t]) + "," + fmt(r->r_dual[t]) + "\n";
        }
    if (any_res) {
        auto p = dir / (stem + "_" + tag + "_residuals.csv");
        write_text(p, res);
        out.push_back(p.string());
    }
    if (!c.changes_mean.empty()) {
        std::string s = "iteration,changes_mean,changes_sd\n";
        for (std::size_t t = 0; t < c.changes_mean.size(); ++t)
            s += std::to_string(t + 1) + "," + fmt(c.changes_mean[t]) + "," + fmt(c.changes_sd[t]) + "\n";
        auto p = dir / (stem + "_" + tag + "_assignments.csv");
        write_text(p, s);
        out.push_back(p.string());
    }
    if (c.histogram) {
        std::string s = "bin_center,count\n";
        const auto& h = *c.histogram;
        for (std::size_t b = 0; b < h.counts.size(); ++b)
            s += fmt(0.5 * (h.edges[b] + h.edges[b + 1])) + "," + std::to_string(h.counts[b]) + "\n";
        auto p = dir / (stem + "_" + tag + "_histogram.csv");
        write_text(p, s);
        out.push_back(p.string());
    }
    return out;
}

inline RepetitionRow run_repetition(const ExperimentConfig& c, const DmpInstance& inst, const Vec& truth,
                                    const std::vector<Vec>& weights, const ObservationSet* validation, int n, int k,
                                    int rep, int threads) {
    RepetitionRow r;
    r.n = n;
    r.k = k;
    r.rep = rep;
    r.seed = c.seed + static_cast<std::uint64_t>(rep);
    auto t0 = std::chrono::steady_clock::now();
    try {
        ObservationSet obs = generate_observations(inst, truth, c.law, c.noise, n, r.seed);
        EstimateResult est;
        if (c.estimator.kind == "oracle") {
            OracleResult o = brute_force_oracle(inst, obs, weights, c.estimator.oracle_resolution, c.estimator.oracle_budget,
                                                threads);
            est.theta = o.theta;
            est.method = "oracle";
            detail::finish(est, inst, obs, weights, 1.0, threads);
        } else if (c.estimator.kind == "admm") {
            AdmmOptions ao = c.estimator.admm;
            ao.local.seed = r.seed;
            ao.local.threads = threads;
            est = estimate_admm(inst, obs, weights, ao);
        } else {
            ClusteringOptions co = c.estimator.clustering;
            co.fit.seed = r.seed;
            co.fit.threads = threads;
            est = estimate_clustering(inst, obs, weights, co);
        }
        r.theta = est.theta;
        r.objective = est.objective;
        r.estimation_error = estimation_error(est.theta, truth, c.relative_error);
        if (validation) r.prediction_error = prediction_error(inst, est.theta, *validation, c.prediction.k_ref, threads);
        for (const auto& t : est.trace) {
            if (t.step != "assignment") continue;
            r.changes.push_back(t.changes);
            ++r.outer_iterations;
        }
        if (est.admm) {
            r.r_pri = est.admm->r_pri;
            r.r_dual = est.admm->r_dual;
            r.outer_iterations = est.admm->iterations;
        }
        if (inst.base.p() == 2)
            for (int a : est.assignment.index) r.assigned_weight.push_back(weights[static_cast<std::size_t>(a)](0));
        if (est.status != "ok" && est.status != "converged") r.message = est.status;
    } catch (const ValidationError&) {
        throw;
    } catch (const std::exception& e) {
        r.status = "failed";
        r.message = e.what();
    }
    r.runtime = seconds_since(t0);
    return r;
}

}  // namespace detail

/// Run every (N, K) cell for the configured repetitions. Seeds are base + repetition index,
/// so cells with equal N share their data sets.
inline ExperimentReport run_experiment(const ExperimentConfig& config) {
    config.validate();
    ExperimentReport rep;
    rep.config = config;
    const DmpInstance inst = fixtures::by_id(config.fixture);
    const Vec truth = config.truth();
    require(truth.size() == inst.space.dim(), "experiment: truth does not match the parameter space");
    const int threads = resolve_threads(config.threads);

    std::optional<ObservationSet> validation;
    if (config.prediction.samples > 0)
        validation = generate_observations(inst, truth, config.law, config.noise, config.prediction.samples,
                                           config.seed + config.prediction.seed_offset);

    namespace fs = std::filesystem;
    std::ofstream csv;
    fs::path dir;
    const std::string stem = config.stem();
    const Eigen::Index dim = inst.space.dim();
    if (!config.out_dir.empty()) {
        dir = config.out_dir;
        fs::create_directories(dir);
        fs::path p = dir / (stem + ".csv");
        csv.open(p, std::ios::binary);
        if (!csv) throw ValidationError("cannot write " + p.string());
        csv << detail::csv_header(config, dim) << "\n";
        rep.files.push_back(p.string());
    }
    std::mutex collector;
    for (int n : config.n_values)
        for (int k : config.k_values) {
            const auto weights = grid_weights(inst.base.p(), k);
            std::vector<RepetitionRow> rows(static_cast<std::size_t>(config.repetitions));
            // repetitions in parallel, estimators single-threaded inside
            const int outer = std::min(threads, config.repetitions);
            const int inner = outer > 1 ? 1 : threads;
            parallel_for(rows.size(), outer, [&](std::size_t i) {
                auto row = detail::run_repetition(config, inst, truth, weights, validation ? &*validation : nullptr, n, k,
                                                  static_cast<int>(i), inner);
                std::lock_guard<std::mutex> lock(collector);
                rows[i] = std::move(row);
            });
            std::vector<const RepetitionRow*> ptrs;
            for (auto& r : rows) {
                if (csv.is_open()) csv << detail::csv_row(config, r, dim) << "\n" << std::flush;
                rep.rows.push_back(std::move(r));
            }
            for (std::size_t i = rep.rows.size() - rows.size(); i < rep.rows.size(); ++i) ptrs.push_back(&rep.rows[i]);
            rep.cells.push_back(detail::summarize(n, k, ptrs, config.bins));
            if (!config.out_dir.empty())
                for (auto& f : detail::write_plot_data(dir, stem, rep.cells.back(), ptrs)) rep.files.push_back(f);
        }
    if (!config.out_dir.empty()) {
        fs::path p = dir / (stem + "_summary.json");
        rep.files.push_back(p.string());
        json j = to_json(rep.config);
        json cells = json::array();
        for (const auto& c : rep.cells) cells.push_back(detail::cell_to_json(c));
        json rows = json::array();
        for (const auto& r : rep.rows) {
            json jr = {{"N", r.n}, {"K", r.k}, {"rep", r.rep}, {"seed", r.seed}, {"status", r.status},
                       {"theta", r.theta.size() ? to_json(r.theta) : json::array()},
                       {"estimation_error", detail::num_or_null(r.estimation_error)},
                       {"prediction_error", detail::num_or_null(r.prediction_error)},
                       {"objective", detail::num_or_null(r.objective)}};
            if (!r.message.empty()) jr["message"] = r.message;
            if (config.timings) jr["runtime"] = r.runtime;
            rows.push_back(jr);
        }
        json names = json::array();
        for (const auto& f : rep.files) names.push_back(fs::path(f).filename().string());
        json out = {{"config", j}, {"cells", cells}, {"rows", rows}, {"files", names}};
        detail::write_text(p, out.dump(2) + "\n");
    }
    return rep;
}

// ---------------------------------------------------------------- introduction demo

struct IntroDemoReport {
    double a = 0, b = 0, c = 0;
    std::vector<Vec> points;  // evenly spaced on AC, then on BD
    Vec vertex_a, vertex_b;
    Vec mean;
    bool mean_inside = false;
    Vec theta_hat;
    double objective = 0.0;
    double tau = 1e-2;
    int efficient_count = 0;
    double efficient_fraction = 0.0;
    std::vector<double> breakpoints;  // weights where the estimated objective is parallel to a constraint
};

/// Weights w ∈ [0, 1] at which w c1 + (1 − w) c2 is normal to a stacked constraint row
/// of a bi-objective LP in two variables. Edges of the feasible polygon are optimal only there.
inline std::vector<double> linear_breakpoints(const ConcreteDmp& d) {
    require(d.p() == 2 && d.n() == 2, "breakpoints need two objectives and two variables");
    auto cross = [](const Vec& u, const Vec& v) { return u(0) * v(1) - u(1) * v(0); };
    const Vec& c1 = d.objectives[0].c;
    const Vec& c2 = d.objectives[1].c;
    std::vector<double> out;
    for (Eigen::Index r = 0; r < d.g.rows(); ++r) {
        Vec g = d.g.row(r).transpose();
        double a1 = cross(c1, g), a2 = cross(c2, g);
        if (std::abs(a2 - a1) < 1e-14) continue;
        double w = a2 / (a2 - a1);
        if (w < 0.0 || w > 1.0) continue;
        // the combined cost must point against the row normal
        Vec cost = w * c1 + (1.0 - w) * c2;
        if (cost.dot(g) < 0.0) out.push_back(w);
    }
    std::sort(out.begin(), out.end());
    return out;
}

/// Observations spread evenly on the segments AC and BD of the motivating instance, their mean,
/// and the clustering estimate of both cost vectors from the same points.
inline IntroDemoReport intro_demo(double a, double b, double c, int samples, int k = 11, double tau = 1e-2,
                                  std::uint64_t seed = 0) {
    require(a > b && b > 0.0 && c > 0.0, "intro demo needs a > b > 0 and c > 0");
    require(samples >= 2, "intro demo needs at least two samples");
    require(tau > 0.0, "tolerance must be positive");
    IntroDemoReport r;
    r.a = a;
    r.b = b;
    r.c = c;
    r.tau = tau;
    r.vertex_a = fixtures::vec({-b * c / (a - b), a * c / (a - b)});
    r.vertex_b = fixtures::vec({a * c / (a - b), -b * c / (a - b)});
    const Vec ca = 0.5 * r.vertex_a, cb = 0.5 * r.vertex_b;
    const int m1 = samples / 2, m2 = samples - m1;
    for (int i = 0; i < m1; ++i) r.points.push_back(r.vertex_a + ((i + 0.5) / m1) * (ca - r.vertex_a));
    for (int i = 0; i < m2; ++i) r.points.push_back(r.vertex_b + ((i + 0.5) / m2) * (cb - r.vertex_b));
    r.mean = Vec::Zero(2);
    for (const auto& p : r.points) r.mean += p;
    r.mean /= static_cast<double>(r.points.size());
    r.mean_inside = a * r.mean(0) + b * r.mean(1) > 0.0 && b * r.mean(0) + a * r.mean(1) > 0.0 && r.mean.sum() < c;

    DmpInstance inst = fixtures::intro_problem(a, b, c, true);
    ObservationSet obs;
    obs.y = r.points;
    ClusteringOptions co;
    co.fit.seed = seed;
    auto est = estimate_clustering(inst, obs, grid_weights(2, k), co);
    r.theta_hat = est.theta;
    r.objective = est.objective;

    ConcreteDmp d = apply_params(inst, r.theta_hat);
    r.breakpoints = linear_breakpoints(d);
    std::vector<Vec> check = grid_weights(2, 201);
    for (double w : r.breakpoints) check.push_back(fixtures::vec({w, 1.0 - w}));
    auto ws = detail::solve_weights(d, check, 1);
    for (const auto& p : r.points)
        if (detail::membership(d, ws, check, p).slack <= tau) ++r.efficient_count;
    r.efficient_fraction = static_cast<double>(r.efficient_count) / static_cast<double>(r.points.size());
    return r;
}

inline json to_json(const IntroDemoReport& r) {
    return {{"a", r.a},
            {"b", r.b},
            {"c", r.c},
            {"samples", r.points.size()},
            {"A", to_json(r.vertex_a)},
            {"B", to_json(r.vertex_b)},
            {"mean", to_json(r.mean)},
            {"mean_inside", r.mean_inside},
            {"theta_hat", to_json(r.theta_hat)},
            {"objective", r.objective},
            {"tau", r.tau},
            {"breakpoints", r.breakpoints},
            {"efficient_count", r.efficient_count},
            {"efficient_fraction", r.efficient_fraction}};
}

}  // namespace imop

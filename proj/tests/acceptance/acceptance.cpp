// Acceptance checks. Usage: imop_acceptance [criterion ...]; no argument runs all of them.
// Prints one line per criterion and exits nonzero if any requested criterion fails.

#include "imop/imop.hpp"

#include <chrono>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>

using namespace imop;
namespace fx = imop::fixtures;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
    char buf[1024];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

Vec w2(double a) { return fx::vec({a, 1.0 - a}); }

Vec example1_closed(double w) {
    double x1 = w <= 2.0 / 3.0 ? (6 - 9 * w) / (2 - w) : 0.0;
    double x2 = w <= 2.0 / 9.0 ? 3.0 : (w <= 5.0 / 6.0 ? (5 - 6 * w) / (1 + w) : 0.0);
    return fx::vec({x1, x2});
}

Outcome forward_oracle() {
    auto d1 = apply_params(fx::example1(), Vec(0));
    auto d2 = apply_params(fx::example2(), Vec(0));
    double closed = 0.0, scaled = 0.0;
    for (int i = 0; i <= 100; ++i) {
        double w = i / 100.0;
        auto s1 = solve_wp(d1, w2(w));
        if (s1.status != SolveStatus::optimal) return {false, fmt("no optimum at w = %.2f", w)};
        closed = std::max(closed, (s1.x - example1_closed(w)).norm());
        if (w <= 5.0 / 6.0) scaled = std::max(scaled, (s1.x - solve_wp(d2, w2(1.2 * w)).x).norm());
    }
    return {closed <= 1e-6 && scaled <= 1e-6,
            fmt("max |x - closed form| = %.2e, max |x1(w) - x2(1.2w)| = %.2e over 101 weights", closed, scaled)};
}

Outcome decomposition_identity() {
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> nd(0.0, 3.0);
    double worst = 0.0;
    for (int t = 0; t < 100; ++t) {
        int n = 1 + static_cast<int>(rng() % 80), k = 1 + static_cast<int>(rng() % 15);
        Eigen::Index dim = 1 + static_cast<Eigen::Index>(rng() % 5);
        ObservationSet o;
        std::vector<Vec> pts;
        for (int i = 0; i < n; ++i) o.y.push_back(Vec::NullaryExpr(dim, [&] { return nd(rng); }));
        for (int i = 0; i < k; ++i) pts.push_back(Vec::NullaryExpr(dim, [&] { return nd(rng); }));
        auto a = assign(o, pts);
        double e = empirical_risk(o, pts).value, c = cluster_decomposition(o, a, pts);
        worst = std::max(worst, std::abs(e - c) / (1.0 + std::abs(e)));
    }
    return {worst <= 1e-9, fmt("max relative gap %.2e over 100 instances", worst)};
}

Outcome monotone_descent() {
    auto cfg = default_config("mqp-rhs");
    auto inst = fx::mqp_rhs();
    auto ws = grid_weights(2, 21);
    const int runs = 50, n = 50;
    int bad_steps = 0, long_runs = 0, converged = 0;
    std::vector<double> changes_sum(6, 0.0);
    for (int s = 0; s < runs; ++s) {
        auto obs = generate_observations(inst, fx::theta_mqp_rhs_true(), cfg.law, cfg.noise, n, static_cast<std::uint64_t>(s));
        ClusteringOptions opt;
        opt.fit.seed = static_cast<std::uint64_t>(s);
        auto r = estimate_clustering(inst, obs, ws, opt);
        for (std::size_t i = 1; i < r.trace.size(); ++i) bad_steps += r.trace[i].objective > r.trace[i - 1].objective + 1e-9;
        int updates = 0, it = 0;
        for (const auto& t : r.trace) {
            updates += t.step == "update";
            if (t.step == "assignment" && it < 6) changes_sum[static_cast<std::size_t>(it++)] += t.changes;
        }
        long_runs += updates > 5;
        converged += r.status == "converged";
    }
    // mean assignment changes per outer iteration; runs that stopped count as zero
    std::string pattern;
    bool settling = true;
    for (std::size_t i = 0; i < changes_sum.size(); ++i) {
        double m = changes_sum[i] / runs;
        pattern += (i ? " " : "") + fmt("%.2f", m);
        if (i >= 2 && m > changes_sum[i - 1] / runs + 1e-12) settling = false;
    }
    double last = changes_sum[5] / runs;
    bool pass = bad_steps == 0 && long_runs == 0 && settling && last <= 0.02 * n;
    return {pass, fmt("%d increasing steps, %d runs over 5 updates, %d/%d converged, mean changes per iteration: ",
                      bad_steps, long_runs, converged, runs) + pattern};
}

Outcome table2_trend() {
    auto cell = [](int n, int k) {
        auto cfg = default_config("mqp-rhs");
        cfg.n_values = {n};
        cfg.k_values = {k};
        cfg.repetitions = 10;
        cfg.threads = 0;
        return run_experiment(cfg).cell(n, k);
    };
    auto small = cell(5, 6), big = cell(150, 41);
    double ratio = small.error_mean / big.error_mean;
    bool pass = big.ok == 10 && small.ok == 10 && big.error_mean <= 0.25 && ratio >= 3.0;
    return {pass, fmt("mean error %.4f at (150, 41), %.4f at (5, 6), ratio %.2f (need <= 0.25 and ratio >= 3)",
                      big.error_mean, small.error_mean, ratio)};
}

Outcome risk_at_truth() {
    auto cfg = default_config("mqp-obj");
    auto inst = fx::mqp_obj();
    ObservationGenerator gen = [&](int count, std::uint64_t seed) {
        return generate_observations(inst, fx::theta_mqp_obj_true(), cfg.law, cfg.noise, count, seed);
    };
    auto r = monte_carlo_risk(inst, fx::theta_mqp_obj_true(), gen, 100000, 7, 10000, 0);
    double rel = std::abs(r.mean - 0.022742) / 0.022742;
    return {rel <= 0.15, fmt("M(theta_true) = %.5f +- %.5f, relative gap to 0.022742 = %.3f", r.mean, r.std_error, rel)};
}

Outcome table5_monotone() {
    auto cfg = default_config("mqp-obj");
    cfg.n_values = {50, 250, 1000};
    cfg.k_values = {6, 11, 21, 41};
    cfg.threads = 0;
    auto rep = run_experiment(cfg);
    bool pass = true;
    std::string rows;
    for (int n : cfg.n_values) {
        rows += fmt(" N=%d:", n);
        double prev = kInf;
        for (int k : cfg.k_values) {
            const auto& c = rep.cell(n, k);
            rows += fmt(" %.4f", c.prediction_mean);
            if (!(c.prediction_mean <= prev + 2e-3)) pass = false;
            prev = c.prediction_mean;
        }
        if (!(rep.cell(n, 41).prediction_mean <= 0.030)) pass = false;
    }
    return {pass, "prediction error over K = 6, 11, 21, 41;" + rows};
}

Outcome portfolio_recovery() {
    auto cfg = default_config("portfolio");
    cfg.repetitions = 5;
    cfg.threads = 0;
    auto rep = run_experiment(cfg);
    const auto& c = rep.cell(1000, 41);
    if (!c.histogram) return {false, "no weight histogram"};
    double m = c.histogram->mean, sd = c.histogram->sd;
    bool pass = c.ok == 5 && c.error_mean <= 0.02 && m >= 0.48 && m <= 0.52 && sd >= 0.08 && sd <= 0.12;
    return {pass, fmt("mean |r_hat - r_true| = %.4f over %d runs, weight histogram mean %.4f sd %.4f", c.error_mean, c.ok, m, sd)};
}

Outcome admm_convergence() {
    auto cfg = default_config("mqp-rhs");
    auto inst = fx::mqp_rhs();
    auto ws = grid_weights(2, 21);
    int converged = 0;
    double recompute = 0.0;
    for (int s = 0; s < 20; ++s) {
        auto obs = generate_observations(inst, fx::theta_mqp_rhs_true(), cfg.law, cfg.noise, 20, static_cast<std::uint64_t>(s));
        AdmmOptions opt;
        opt.rho = 0.5;
        opt.max_iters = 100;
        opt.local.seed = static_cast<std::uint64_t>(s);
        auto r = estimate_admm(inst, obs, ws, opt);
        const auto& st = *r.admm;
        bool ok = false;
        for (int k = 1; k <= st.iterations; ++k) {
            auto [p, d] = admm_residuals(st, k);
            double sp = st.r_pri[static_cast<std::size_t>(k - 1)], sd = st.r_dual[static_cast<std::size_t>(k - 1)];
            recompute = std::max({recompute, std::abs(p - sp), std::abs(d - sd)});
            if (sp < 1e-3 && sd < 1e-3) ok = true;
        }
        converged += ok;
    }
    return {converged >= 16 && recompute <= 1e-12,
            fmt("%d/20 seeds reach both residuals < 1e-3 within 100 iterations, max recompute gap %.2e", converged, recompute)};
}

Outcome identifiability() {
    auto mlp = test_identifiability(fx::mlp_triobj(), fx::theta_mlp_reported(), IdentOptions{});
    IdentOptions opt;
    opt.n_prime = 60;
    opt.k_prime = 201;
    opt.max_evals = 400;
    auto ex = test_identifiability(fx::quadratic_family(), fx::theta_example1(), opt);
    double dist = (fx::theta_example2() - fx::theta_example1()).lpNorm<1>();
    return {mlp.z_test > 1e-3 && ex.z_test >= dist - 0.05,
            fmt("z_test = %.4f on the tri-objective LP, %.4f on the quadratic example (bound %.2f)", mlp.z_test, ex.z_test,
                dist - 0.05)};
}

Outcome oracle_equivalence() {
    auto cfg = default_config("mqp-rhs");
    auto inst = fx::mqp_rhs();
    inst.space.lower(1) = inst.space.upper(1) = -6.0;
    auto ws = grid_weights(2, 11);
    const double res = 0.01, slack = 2 * res * res;
    double worst = -kInf;
    for (int s = 0; s < 5; ++s) {
        auto obs = generate_observations(inst, fx::theta_mqp_rhs_true(), cfg.law, cfg.noise, 30, static_cast<std::uint64_t>(s));
        auto oracle = brute_force_oracle(inst, obs, ws, res);
        ClusteringOptions opt;
        opt.fit.seed = static_cast<std::uint64_t>(s);
        auto r = estimate_clustering(inst, obs, ws, opt);
        worst = std::max(worst, r.objective - oracle.value);
    }
    return {worst <= slack, fmt("max (clustering - oracle) objective over 5 draws = %.3e (allowed %.1e)", worst, slack)};
}

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

Outcome reform_certificates() {
    DataLaw law;
    NoiseModel noise;
    noise.kind = NoiseKind::truncated_gaussian;
    std::vector<std::string> notes;
    bool pass = true;
    auto record = [&](const std::string& what, const FeasibilityReport& rep) {
        pass = pass && rep.pass;
        notes.push_back(what + (rep.pass ? " ok" : " violates " + rep.worst + fmt(" by %.2e", rep.max_violation)));
    };

    auto mlp = fx::mlp_triobj();
    auto mobs = generate_observations(mlp, fx::theta_mlp_true(), law, noise, 6, 2);
    auto mws = grid_weights(3, 10);
    auto m1 = build_single_level_mlp(mlp, mobs, mws);
    record("tri-objective LP", check_feasible(m1, plugin_single_level(mlp, fx::theta_mlp_true(), mobs, mws), 1e-6));

    auto rhs = fx::mqp_rhs();
    auto robs = generate_observations(rhs, fx::theta_mqp_rhs_true(), law, noise, 20, 3);
    auto rws = grid_weights(2, 11);
    auto m2 = build_single_level_mqp_rhs(rhs, robs, rws);
    record("right-hand-side QP", check_feasible(m2, plugin_single_level(rhs, fx::theta_mqp_rhs_true(), robs, rws), 1e-6));

    auto th = fx::theta_mlp_reported();
    auto pts = solve_all(apply_params(mlp, th), random_weights(3, 12, {}, 1));
    auto tws = grid_weights(3, 30);
    auto m3 = build_test_problem(mlp, th, pts, tws);
    record("identifiability test problem", check_feasible(m3, plugin_test_problem(mlp, th, th, pts, tws), 1e-6));

    bool same = write_lp(m1) == write_lp(build_single_level_mlp(mlp, mobs, mws)) &&
                write_lp(m2) == write_lp(build_single_level_mqp_rhs(rhs, robs, rws)) &&
                write_lp(m3) == write_lp(build_test_problem(mlp, th, pts, tws));
    ObservationSet golden;
    golden.y = {fx::vec({0.5, 1.0}), fx::vec({1.5, 2.0})};
    bool gold = write_lp(build_single_level_mqp_rhs(rhs, golden, grid_weights(2, 2))) ==
                slurp(std::string(IMOP_FIXTURE_DIR) + "/mqp_rhs_2_2.lp");
    pass = pass && same && gold;
    std::string d;
    for (const auto& n : notes) d += n + ", ";
    return {pass, d + (same ? "exports repeatable" : "exports differ") + (gold ? ", golden file matches" : ", golden file differs")};
}

Outcome intro() {
    auto r = intro_demo(6, 1, 1, 2000);
    bool pass = std::abs(r.mean(0) - 0.375) <= 1e-3 && std::abs(r.mean(1) - 0.375) <= 1e-3 && r.efficient_fraction >= 0.95;
    return {pass, fmt("sample mean (%.5f, %.5f), %.1f%% of samples efficient under the estimate", r.mean(0), r.mean(1),
                      100.0 * r.efficient_fraction)};
}

Outcome traffic_trend() {
    auto cfg = default_config("traffic");
    cfg.k_values = {6, 41};
    cfg.repetitions = 5;
    cfg.threads = 0;
    auto rep = run_experiment(cfg);
    const auto &k6 = rep.cell(10, 6), &k41 = rep.cell(10, 41);
    bool pass = k41.ok == 5 && k6.ok == 5 && k41.error_mean <= 0.15 && k41.error_mean <= k6.error_mean;
    return {pass, fmt("mean relative error %.6f at K = 41, %.6f at K = 6 over 5 seeds", k41.error_mean, k6.error_mean)};
}

}  // namespace

int main(int argc, char** argv) {
    const std::map<int, std::function<Outcome()>> checks = {
        {1, forward_oracle},      {2, decomposition_identity}, {3, monotone_descent},   {4, table2_trend},
        {5, risk_at_truth},       {6, table5_monotone},        {7, portfolio_recovery}, {8, admm_convergence},
        {9, identifiability},     {10, oracle_equivalence},    {11, reform_certificates}, {12, intro},
        {13, traffic_trend}};
    std::vector<int> which;
    for (int i = 1; i < argc; ++i) {
        int c = std::atoi(argv[i]);
        if (!checks.count(c)) {
            std::cerr << "unknown criterion " << argv[i] << "\n";
            return 2;
        }
        which.push_back(c);
    }
    if (which.empty())
        for (const auto& [c, f] : checks) which.push_back(c);
    int failed = 0;
    for (int c : which) {
        auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = checks.at(c)();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::cout << "criterion " << c << ": " << (o.pass ? "PASS" : "FAIL") << " (" << fmt("%.1f s", secs) << ") "
                  << o.detail << std::endl;
        failed += !o.pass;
    }
    return failed ? 1 : 0;
}

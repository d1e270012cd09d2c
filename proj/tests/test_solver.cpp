#include <gtest/gtest.h>

#include "imop/fixtures.hpp"
#include "imop/solver.hpp"

#include <random>

using namespace imop;
namespace fx = imop::fixtures;

namespace {

Vec w2(double a) { return fx::vec({a, 1.0 - a}); }

// Closed-form weighted-sum solutions of the two quadratic examples (w = weight of f1).
Vec example1_closed(double w) {
    double x1 = w <= 2.0 / 3.0 ? (6 - 9 * w) / (2 - w) : 0.0;
    double x2 = w <= 2.0 / 9.0 ? 3.0 : (w <= 5.0 / 6.0 ? (5 - 6 * w) / (1 + w) : 0.0);
    return fx::vec({x1, x2});
}

Vec example2_closed(double w) {
    double x1 = w <= 0.8 ? (36 - 45 * w) / (12 - 5 * w) : 0.0;
    double x2 = w <= 4.0 / 15.0 ? 3.0 : (30 - 30 * w) / (6 + 5 * w);
    return fx::vec({x1, x2});
}

Vec random_feasible_mlp(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 5.0);
    for (;;) {
        Vec x = fx::vec({u(rng), u(rng), u(rng)});
        if (x.sum() <= 5 && x(0) + x(1) + 3 * x(2) <= 9) return x;
    }
}

}  // namespace

TEST(Solver, Example1SpotValues) {
    auto d = apply_params(fx::example1(), Vec(0));
    auto s = solve_wp(d, w2(1.0));
    ASSERT_EQ(s.status, SolveStatus::optimal);
    EXPECT_LE(s.x.norm(), 1e-9);
    s = solve_wp(d, w2(0.5));
    EXPECT_NEAR(s.x(0), 1.0, 1e-6);
    EXPECT_NEAR(s.x(1), 4.0 / 3.0, 1e-6);
    s = solve_wp(d, w2(0.0));
    EXPECT_NEAR(s.x(0), 3.0, 1e-9);
    EXPECT_NEAR(s.x(1), 3.0, 1e-9);
    EXPECT_TRUE(s.boundary_weight);
}

TEST(Solver, ClosedFormOnFineGrid) {
    auto d1 = apply_params(fx::example1(), Vec(0));
    auto d2 = apply_params(fx::example2(), Vec(0));
    for (int i = 0; i <= 100; ++i) {
        double w = i / 100.0;
        auto s1 = solve_wp(d1, w2(w));
        auto s2 = solve_wp(d2, w2(w));
        ASSERT_TRUE(certified(d1, s1));
        EXPECT_LE((s1.x - example1_closed(w)).norm(), 1e-6) << w;
        EXPECT_LE((s2.x - example2_closed(w)).norm(), 1e-6) << w;
        if (w <= 5.0 / 6.0) {
            EXPECT_LE((s1.x - solve_wp(d2, w2(1.2 * w)).x).norm(), 1e-6) << w;
        }
    }
}

TEST(Solver, KktResidualExamples) {
    auto d = apply_params(fx::example1(), Vec(0));
    auto k = kkt_residuals(d, w2(0.5), fx::vec({1, 4.0 / 3.0}), Vec::Zero(d.m_stacked()));
    EXPECT_LE(k.stationarity, 1e-6);
    k = kkt_residuals(d, w2(0.0), fx::vec({0, 0}), Vec::Zero(d.m_stacked()));
    EXPECT_NEAR(k.stationarity, std::sqrt(144.0 + 100.0), 1e-12);
    for (double w : {0.0, 0.3, 0.7, 1.0}) {
        auto s = solve_wp(d, w2(w));
        EXPECT_LE(s.residuals.max(), 1e-6);
    }
    // negative multipliers are clipped
    Vec u = Vec::Constant(d.m_stacked(), -5.0);
    auto kc = kkt_residuals(d, w2(0.5), fx::vec({1, 4.0 / 3.0}), u);
    EXPECT_LE(kc.stationarity, 1e-6);
}

TEST(Solver, GridWeights) {
    auto g = grid_weights(2, 3);
    ASSERT_EQ(g.size(), 3U);
    EXPECT_EQ(g[0], w2(0.0));
    EXPECT_EQ(g[1], w2(0.5));
    EXPECT_EQ(g[2], w2(1.0));
    auto t = grid_weights(3, 6);
    std::vector<Vec> want = {fx::vec({0, 0, 1}), fx::vec({0, 0.5, 0.5}), fx::vec({0, 1, 0}),
                             fx::vec({0.5, 0, 0.5}), fx::vec({0.5, 0.5, 0}), fx::vec({1, 0, 0})};
    ASSERT_EQ(t.size(), 6U);
    for (std::size_t i = 0; i < 6; ++i) EXPECT_LE((t[i] - want[i]).norm(), 0.0);
    auto g41 = grid_weights(2, 41);
    EXPECT_NEAR(g41[1](0) - g41[0](0), 1.0 / 40, 1e-15);
    // nesting 6 ⊂ 11 ⊂ 21 ⊂ 41 holds exactly
    auto g6 = grid_weights(2, 6), g11 = grid_weights(2, 11), g21 = grid_weights(2, 21);
    for (std::size_t i = 0; i < g6.size(); ++i) EXPECT_EQ(g6[i], g11[2 * i]);
    for (std::size_t i = 0; i < g11.size(); ++i) EXPECT_EQ(g11[i], g21[2 * i]);
    for (std::size_t i = 0; i < g21.size(); ++i) EXPECT_EQ(g21[i], g41[2 * i]);
    // padded lattice
    auto t50 = grid_weights(3, 50, 9);
    EXPECT_EQ(t50.size(), 50U);
    for (const auto& w : t50) {
        EXPECT_GE(w.minCoeff(), 0.0);
        EXPECT_NEAR(w.sum(), 1.0, 1e-12);
    }
    EXPECT_EQ(grid_weights(3, 50, 9), grid_weights(3, 50, 9));
    EXPECT_THROW(grid_weights(2, 0), ValidationError);
}

TEST(Solver, RandomWeights) {
    auto u = random_weights(2, 10000, {}, 1);
    double m = 0;
    for (const auto& w : u) m += w(0);
    EXPECT_NEAR(m / 1e4, 0.5, 0.02);
    WeightDist tn;
    tn.law = WeightLaw::truncated_normal;
    auto t = random_weights(2, 10000, tn, 2);
    double s1 = 0, s2 = 0;
    for (const auto& w : t) {
        s1 += w(0);
        s2 += w(0) * w(0);
    }
    double sd = std::sqrt(s2 / 1e4 - sq(s1 / 1e4));
    EXPECT_GE(sd, 0.09);
    EXPECT_LE(sd, 0.11);
    for (int p : {2, 3, 5}) {
        auto one = random_weights(p, 1, {}, 4);
        ASSERT_EQ(one.size(), 1U);
        EXPECT_NEAR(one[0].sum(), 1.0, 1e-12);
        EXPECT_GE(one[0].minCoeff(), 0.0);
    }
    EXPECT_THROW(random_weights(3, 5, tn, 1), ValidationError);
    WeightDist bx;
    bx.law = WeightLaw::uniform_box;
    bx.lo = 0.3;
    bx.hi = 0.7;
    for (const auto& w : random_weights(2, 500, bx, 8)) {
        EXPECT_GE(w(0), 0.3);
        EXPECT_LE(w(0), 0.7);
    }
}

TEST(Solver, ParetoFilter) {
    EXPECT_EQ(pareto_filter({fx::vec({1, 2})}), std::vector<int>{0});
    EXPECT_EQ(pareto_filter({fx::vec({1, 2}), fx::vec({2, 1}), fx::vec({2, 2})}), (std::vector<int>{0, 1}));
    // random feasible MQP points against a direct double loop
    auto d = apply_params(fx::mqp_rhs(), fx::theta_mqp_rhs_true());
    std::mt19937_64 rng(21);
    std::vector<Vec> fv;
    while (fv.size() < 200) {
        Vec x = fx::vec({std::uniform_real_distribution<double>(0, 4)(rng), std::uniform_real_distribution<double>(0, 7)(rng)});
        if (d.infeasibility(x) > 0) continue;
        fv.push_back(d.values(x));
    }
    std::vector<int> brute;
    for (std::size_t i = 0; i < fv.size(); ++i) {
        bool dom = false;
        for (std::size_t j = 0; j < fv.size(); ++j)
            if (j != i && fv[j](0) <= fv[i](0) && fv[j](1) <= fv[i](1) && (fv[j](0) < fv[i](0) || fv[j](1) < fv[i](1)))
                dom = true;
        if (!dom) brute.push_back(static_cast<int>(i));
    }
    EXPECT_EQ(pareto_filter(fv, 0.0), brute);
}

TEST(Solver, FrontsOfExampleAndMlp) {
    auto d = apply_params(fx::example1(), Vec(0));
    auto front = sample_efficient_front(d, grid_weights(2, 21));
    EXPECT_EQ(front.size(), 21U);

    auto inst = fx::mlp_triobj();
    auto dm = apply_params(inst, fx::theta_mlp_true());
    auto mf = sample_efficient_front(dm, grid_weights(3, 50, 1));
    ASSERT_GT(mf.size(), 0U);
    std::mt19937_64 rng(2);
    std::vector<Vec> pts;
    for (int i = 0; i < 10000; ++i) pts.push_back(random_feasible_mlp(rng));
    for (const auto& x : mf.points)
        for (const auto& y : pts) {
            // maximizing x: y may not exceed x in every coordinate by more than 1e-6
            bool dominates = ((y - x).array() >= -1e-12).all() && ((y - x).array() > 1e-6).any();
            ASSERT_FALSE(dominates) << x.transpose() << " vs " << y.transpose();
        }

    auto single = sample_efficient_front(dm, {fx::vec({1, 0, 0})});
    ASSERT_EQ(single.size(), 1U);
    EXPECT_NEAR(single.points[0](0), 5.0, 1e-9);
}

TEST(Solver, WeightedSumOptimalityAcrossFront) {
    auto d = apply_params(fx::mqp_rhs(), fx::theta_mqp_rhs_true());
    auto ws = grid_weights(2, 41);
    auto xs = solve_all(d, ws);
    for (std::size_t k = 0; k < ws.size(); ++k)
        for (std::size_t j = 0; j < ws.size(); ++j)
            EXPECT_LE(ws[k].dot(d.values(xs[k])), ws[k].dot(d.values(xs[j])) + 1e-7);
}

TEST(Solver, UniqueSolutionFromDifferentStarts) {
    auto d = apply_params(fx::mqp_rhs(), fx::theta_mqp_rhs_true());
    for (double w : {0.1, 0.45, 0.9}) {
        SolverOptions a, b;
        a.method = b.method = WpMethod::sqp;
        a.x0 = fx::vec({0, 0});
        b.x0 = fx::vec({2, 5});
        auto sa = solve_wp(d, w2(w), a), sb = solve_wp(d, w2(w), b), sc = solve_wp(d, w2(w));
        EXPECT_LE((sa.x - sb.x).norm(), 1e-7);
        EXPECT_LE((sa.x - sc.x).norm(), 1e-7);
    }
}

TEST(Solver, LipschitzProbeStaysBounded) {
    auto d = apply_params(fx::mqp_rhs(), fx::theta_mqp_rhs_true());
    double worst_coarse = 0, worst_fine = 0;
    for (int i = 0; i < 200; ++i) {
        double w = 0.98 * i / 200.0;
        for (double h : {1e-2, 1e-5}) {
            double r = (solve_wp(d, w2(w + h)).x - solve_wp(d, w2(w)).x).norm() / (std::sqrt(2.0) * h);
            (h > 1e-3 ? worst_coarse : worst_fine) = std::max(h > 1e-3 ? worst_coarse : worst_fine, r);
        }
    }
    EXPECT_TRUE(std::isfinite(worst_fine));
    EXPECT_LE(worst_fine, 2 * worst_coarse + 1.0);
}

TEST(Solver, TrafficSolveIsCertified) {
    auto inst = fx::traffic();
    auto d = apply_params(inst, fx::theta_traffic_true());
    for (double w : {0.0, 0.3, 0.5, 0.7, 1.0}) {
        auto s = solve_wp(d, w2(w));
        ASSERT_EQ(s.status, SolveStatus::optimal) << w;
        EXPECT_TRUE(certified(d, s)) << w << " stat " << s.residuals.stationarity;
        // demand conservation
        EXPECT_NEAR(s.x(0) + s.x(1), 2500.0, 1e-9 * 2500.0);
        EXPECT_NEAR(s.x(2) + s.x(3), 3500.0, 1e-9 * 3500.0);
    }
}

TEST(Solver, PortfolioSolvesIncludingLinearEndpoint) {
    auto inst = fx::portfolio();
    auto d = apply_params(inst, fx::theta_portfolio_true());
    for (double w : {0.0, 0.5, 1.0}) {
        auto s = solve_wp(d, w2(w));
        ASSERT_EQ(s.status, SolveStatus::optimal);
        EXPECT_NEAR(s.x.sum(), 1.0, 1e-9);
        EXPECT_TRUE(certified(d, s));
    }
    // pure return maximization puts everything into the best security
    EXPECT_NEAR(solve_wp(d, w2(1.0)).x(5), 1.0, 1e-9);
}

TEST(Solver, DistanceToOptimalFace) {
    // min -x1 - x2 over the MLP polytope: the optimal face is the tetragon on x1+x2+x3=5, x3≤2
    auto d = apply_params(fx::mlp_triobj(), fx::theta_mlp_true());
    Vec w = fx::vec({0.5, 0.5, 0.0});
    auto s = solve_wp(d, w);
    EXPECT_NEAR(distance_to_solution_set(d, w, fx::vec({2.5, 2.5, 0}), s), 0.0, 1e-7);
    EXPECT_NEAR(distance_to_solution_set(d, w, fx::vec({0, 0, 0}), s), 5.0 / std::sqrt(2.0), 1e-7);
}

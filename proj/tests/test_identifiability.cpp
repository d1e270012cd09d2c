#include <gtest/gtest.h>

#include "imop/fixtures.hpp"
#include "imop/identifiability.hpp"

using namespace imop;
namespace fx = imop::fixtures;

namespace {

Vec w2(double a) { return fx::vec({a, 1.0 - a}); }

}  // namespace

TEST(Hausdorff, BasicValues) {
    std::vector<Vec> x = {fx::vec({0, 0}), fx::vec({1, 2})};
    EXPECT_EQ(hausdorff_semi(x, x), 0.0);
    EXPECT_DOUBLE_EQ(hausdorff_semi({fx::vec({0, 0})}, {fx::vec({3, 4})}), 5.0);
    std::vector<Vec> y = {fx::vec({0, 0}), fx::vec({1, 2}), fx::vec({10, 0})};
    EXPECT_EQ(hausdorff_semi(x, y), 0.0);
    EXPECT_NEAR(hausdorff_semi(y, x), std::sqrt(81.0 + 4.0), 1e-12);
    EXPECT_THROW(hausdorff_semi({}, y), ValidationError);
    EXPECT_THROW(hausdorff_semi(x, {}), ValidationError);
}

TEST(Hausdorff, ZeroIffContained) {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> nd;
    for (int t = 0; t < 50; ++t) {
        std::vector<Vec> y;
        for (int i = 0; i < 8; ++i) y.push_back(Vec::NullaryExpr(3, [&] { return nd(rng); }));
        std::vector<Vec> x = {y[static_cast<std::size_t>(t % 8)], y[static_cast<std::size_t>((t + 3) % 8)]};
        EXPECT_LE(hausdorff_semi(x, y), 1e-12);
        x.push_back(y[0] + Vec::Constant(3, 1e-3));
        EXPECT_GT(hausdorff_semi(x, y), 1e-12);
    }
}

TEST(Membership, OwnSolutionIsEfficient) {
    auto inst = fx::mqp_rhs();
    Vec th = fx::theta_mqp_rhs_true();
    auto kw = grid_weights(2, 11);
    auto s = solve_wp(inst, th, kw[3]);
    auto c = is_efficient_under(inst, th, s.x, kw, 1e-6);
    EXPECT_TRUE(c.efficient);
    EXPECT_LE(c.slack, 1e-12);
    EXPECT_EQ(c.weight, 3);
}

TEST(Membership, ExampleOnePointUnderExampleTwo) {
    auto d1 = apply_params(fx::example1(), Vec(0));
    auto d2 = apply_params(fx::example2(), Vec(0));
    Vec x = solve_wp(d1, w2(0.4)).x;
    auto c = is_efficient_under(d2, x, grid_weights(2, 201), 1e-2);
    EXPECT_TRUE(c.efficient) << c.slack;
    EXPECT_LE(c.slack, 1e-6);
}

TEST(Membership, DominatedInteriorPointIsNotEfficient) {
    auto inst = fx::mqp_rhs();
    auto d = apply_params(inst, fx::theta_mqp_rhs_true());
    Vec x = fx::vec({0.5, 0.5});
    ASSERT_LE(d.infeasibility(x), 0.0);
    // oracle: a feasible grid point that strictly improves both objectives
    Vec fx0 = d.values(x);
    bool dominated = false;
    for (int i = 0; i <= 100 && !dominated; ++i)
        for (int j = 0; j <= 100 && !dominated; ++j) {
            Vec z = fx::vec({0.03 * i, 0.06 * j});
            if (d.infeasibility(z) > 0.0) continue;
            Vec fz = d.values(z);
            if ((fz.array() < fx0.array() - 1e-6).all()) dominated = true;
        }
    ASSERT_TRUE(dominated);
    auto c = is_efficient_under(d, x, grid_weights(2, 201), 1e-3);
    EXPECT_FALSE(c.efficient);
    EXPECT_GT(c.slack, 1e-3);
}

TEST(Membership, LinearFacePointsCount) {
    // a point in the middle of an optimal edge is a member even though the solver returns a vertex
    auto inst = fx::intro_problem(6, 1, 1);
    auto d = apply_params(inst, Vec(0));
    auto a = solve_wp(d, w2(0.5));
    ASSERT_EQ(a.status, SolveStatus::optimal);
    Vec v1 = solve_wp(d, w2(0.3)).x, v2 = solve_wp(d, w2(0.7)).x;
    // the edge between the two lower vertices is optimal for w = 0.5 only if both lie on it
    Vec mid = 0.5 * (v1 + v2);
    auto c = is_efficient_under(d, mid, {w2(0.3), w2(0.7)}, 1e-6);
    auto cw = is_efficient_under(d, mid, grid_weights(2, 101), 1e-6);
    EXPECT_GE(c.slack, cw.slack - 1e-12);
}

TEST(Identifiability, SinglePointSpaceGivesZero) {
    auto inst = fx::fixed_quadratic(fx::theta_example1(), "pinned");
    auto rep = test_identifiability(inst, Vec(0));
    EXPECT_EQ(rep.z_test, 0.0);
    EXPECT_FALSE(rep.non_identifiable);
    EXPECT_EQ(rep.status, "single-point");
}

TEST(Identifiability, ExampleOneIsNotIdentifiable) {
    auto inst = fx::quadratic_family();
    Vec th1 = fx::theta_example1(), th2 = fx::theta_example2();
    IdentOptions opt;
    opt.n_prime = 60;
    opt.k_prime = 201;
    opt.max_evals = 400;
    auto rep = test_identifiability(inst, th1, opt);
    double dist = (th2 - th1).lpNorm<1>();
    EXPECT_GE(rep.z_test, dist - 1e-6) << rep.theta_far.transpose();
    EXPECT_TRUE(rep.non_identifiable);
    EXPECT_LE(rep.excess, 0.0);
    EXPECT_TRUE(inst.space.contains(rep.theta_far, 1e-9));
    // independent re-check of every generated point under the far parameter
    auto pts = solve_all(apply_params(inst, th1), random_weights(2, opt.n_prime, {}, opt.seed));
    auto d = apply_params(inst, rep.theta_far);
    auto kw = grid_weights(2, opt.k_prime, opt.seed + 1);
    for (const auto& x : pts) {
        auto c = is_efficient_under(d, x, kw, rep.tolerance);
        EXPECT_TRUE(c.efficient) << c.slack;
    }
}

TEST(Identifiability, ExampleTwoParameterIsAdmissible) {
    // Example 2's parameter keeps Example 1's sampled points efficient
    auto inst = fx::quadratic_family();
    auto pts = solve_all(apply_params(inst, fx::theta_example1()), grid_weights(2, 41));
    auto d2 = apply_params(inst, fx::theta_example2());
    auto kw = grid_weights(2, 201);
    for (const auto& x : pts) {
        if (x(0) == 0.0 && x(1) == 0.0) continue;
        auto c = is_efficient_under(d2, x, kw, 5e-2);
        EXPECT_TRUE(c.efficient) << x.transpose() << " slack " << c.slack;
    }
}

TEST(Identifiability, MlpReportedEstimateIsNotIdentifiable) {
    auto inst = fx::mlp_triobj();
    IdentOptions opt;
    opt.max_evals = 600;
    auto rep = test_identifiability(inst, fx::theta_mlp_reported(), opt);
    EXPECT_GT(rep.z_test, 0.0);
    EXPECT_TRUE(rep.non_identifiable);
    EXPECT_LE(rep.excess, 0.0);
    EXPECT_TRUE(inst.space.contains(rep.theta_far, 1e-9));
    auto j = to_json(rep);
    EXPECT_EQ(j["N_prime"], 200);
    EXPECT_EQ(j["K_prime"], 200);
}

TEST(Identifiability, ValidatesOptions) {
    IdentOptions opt;
    opt.tau = 0.0;
    EXPECT_THROW(test_identifiability(fx::mqp_rhs(), fx::theta_mqp_rhs_true(), opt), ValidationError);
    EXPECT_THROW(test_identifiability(fx::mqp_rhs(), fx::vec({0, 0})), ValidationError);
}

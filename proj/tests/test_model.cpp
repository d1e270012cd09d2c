#include <gtest/gtest.h>

#include "imop/fixtures.hpp"
#include "imop/io.hpp"
#include "imop/model.hpp"

#include <random>

using namespace imop;
namespace fx = imop::fixtures;

namespace {

// Vertices of a 2-D polygon {x : A x ≤ b} by intersecting every pair of rows.
std::vector<Vec> polygon_vertices(const Mat& a, const Vec& b) {
    std::vector<Vec> out;
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = i + 1; j < a.rows(); ++j) {
            Mat m(2, 2);
            m << a.row(i), a.row(j);
            if (std::abs(m.determinant()) < 1e-12) continue;
            Vec x = m.partialPivLu().solve(Vec((Vec(2) << b(i), b(j)).finished()));
            if (((a * x - b).array() <= 1e-9).all()) out.push_back(x);
        }
    return out;
}

}  // namespace

TEST(Model, MlpSlotCounts) {
    auto inst = fx::mlp_triobj();
    EXPECT_EQ(inst.n_free(), 9);
    EXPECT_EQ(inst.family(), Family::linear);
    // objective-major, coordinate-minor
    EXPECT_EQ(inst.slots[4].objective, 1);
    EXPECT_EQ(inst.slots[4].index, 1);

    ConstraintBlock cb;
    cb.a = Mat::Ones(1, 3);
    cb.b = Vec::Constant(1, 5.0);
    auto fixed = build_mlp({fx::vec({-1, 0, 0}), fx::vec({0, -1, 0})}, cb, {}, empty_space());
    EXPECT_EQ(fixed.n_free(), 0);
}

TEST(Model, IntroInstanceVertices) {
    auto inst = fx::intro_problem(6, 1, 1);
    ASSERT_EQ(inst.n_free(), 0);
    auto v = polygon_vertices(inst.base.g, inst.base.h);
    ASSERT_EQ(v.size(), 3U);
    std::vector<Vec> want = {fx::vec({0, 0}), fx::vec({-0.2, 1.2}), fx::vec({1.2, -0.2})};
    for (const auto& w : want) {
        bool hit = false;
        for (const auto& x : v) hit = hit || (x - w).norm() < 1e-12;
        EXPECT_TRUE(hit) << w.transpose();
    }
    // certified bounds are exact for this triangle
    EXPECT_NEAR(inst.x_lower(0), -0.2, 1e-9);
    EXPECT_NEAR(inst.x_upper(0), 1.2, 1e-9);
}

TEST(Model, MqpSlotsAndParameterBinding) {
    auto inst = fx::mqp_rhs();
    EXPECT_EQ(inst.n_free(), 2);
    EXPECT_TRUE(inst.strongly_convex);
    ConcreteDmp d = apply_params(inst, fx::vec({-3, -6}));
    // ≥ rows are stored negated; reading back gives θ
    Vec back = read_params(inst, d);
    EXPECT_NEAR(back(0), -3.0, 1e-15);
    EXPECT_NEAR(back(1), -6.0, 1e-15);
    EXPECT_NEAR(d.b_ub(0), 3.0, 1e-15);
    EXPECT_NEAR(d.b_ub(1), 6.0, 1e-15);
    EXPECT_THROW(apply_params(inst, fx::vec({0, -6})), ValidationError);
    EXPECT_THROW(apply_params(inst, fx::vec({-3})), ValidationError);

    auto port = fx::portfolio();
    EXPECT_EQ(port.n_free(), 8);
    EXPECT_FALSE(port.strongly_convex);
    EXPECT_EQ(fx::portfolio(0).n_free(), 0);
}

TEST(Model, EmptyParameterVectorLeavesInstanceUnchanged) {
    auto inst = fx::example1();
    ConcreteDmp d = apply_params(inst, Vec(0));
    EXPECT_EQ((d.a_ub - inst.base.a_ub).norm(), 0.0);
    EXPECT_EQ((d.objectives[0].q - inst.base.objectives[0].q).norm(), 0.0);
}

TEST(Model, ReadBackIsIdentityOnRandomTheta) {
    std::mt19937_64 rng(5);
    for (auto inst : {fx::mqp_obj(), fx::quadratic_family(), fx::traffic()}) {
        for (int t = 0; t < 20; ++t) {
            Vec th(inst.n_free());
            for (Eigen::Index i = 0; i < th.size(); ++i)
                th(i) = std::uniform_real_distribution<double>(inst.space.lower(i), inst.space.upper(i))(rng);
            EXPECT_LE((read_params(inst, apply_params(inst, th)) - th).norm(), 1e-12);
        }
    }
}

TEST(Model, RejectsNonPsdAndUnbounded) {
    Mat bad = Mat::Identity(2, 2);
    bad(1, 1) = -1;
    EXPECT_THROW(build_mqp({bad, Mat::Identity(2, 2)}, {Vec::Zero(2), Vec::Zero(2)}, fx::two_dim_polytope(), {},
                           empty_space()),
                 ValidationError);
    ConstraintBlock open;  // x ≥ 0 only
    open.a = Mat(0, 2);
    open.b = Vec(0);
    EXPECT_THROW(build_mlp({fx::vec({1, 0}), fx::vec({0, 1})}, open, {}, empty_space()), ValidationError);
    EXPECT_THROW(build_mlp({fx::vec({1, 0}), fx::vec({0, 1, 2})}, fx::two_dim_polytope(), {}, empty_space()),
                 ValidationError);
}

TEST(Model, FeasibleAndBoundedOnRandomBoxSample) {
    std::mt19937_64 rng(17);
    for (auto inst : {fx::mqp_rhs(), fx::traffic()}) {
        for (int t = 0; t < 100; ++t) {
            Vec th(inst.n_free());
            for (Eigen::Index i = 0; i < th.size(); ++i)
                th(i) = std::uniform_real_distribution<double>(inst.space.lower(i), inst.space.upper(i))(rng);
            ConcreteDmp d = apply_params(inst, th);
            for (Eigen::Index j = 0; j < d.n(); ++j)
                for (double s : {1.0, -1.0}) {
                    LinearProgram lp{s * Vec::Unit(d.n(), j), d.a_ub, d.b_ub, d.a_eq, d.b_eq, d.lower, d.upper};
                    auto r = solve_lp(lp);
                    ASSERT_EQ(r.status, LpStatus::optimal) << inst.name << " theta " << th.transpose();
                    EXPECT_GE(r.x(j), inst.x_lower(j) - 1e-7);
                    EXPECT_LE(r.x(j), inst.x_upper(j) + 1e-7);
                }
        }
    }
}

TEST(Model, TrafficRoutesAndSlots) {
    auto inst = fx::traffic();
    EXPECT_EQ(inst.n_free(), 2);
    const auto& net = *inst.network;
    ASSERT_EQ(net.routes.size(), 2U);
    ASSERT_EQ(net.routes[0].size(), 2U);
    ASSERT_EQ(net.routes[1].size(), 2U);
    // links indexed as (1,3),(2,4),(1,5),(5,6),(2,5),(6,3),(6,4)
    EXPECT_EQ(net.routes[0][0], (std::vector<int>{0}));
    EXPECT_EQ(net.routes[0][1], (std::vector<int>{2, 3, 5}));
    EXPECT_EQ(net.routes[1][0], (std::vector<int>{1}));
    EXPECT_EQ(net.routes[1][1], (std::vector<int>{4, 3, 6}));
    Mat delta = net.incidence();
    EXPECT_EQ(delta.sum(), 8.0);
    EXPECT_EQ(inst.obs_dim(), 7);
}

TEST(Model, SingleLinkNetworkForcesFlow) {
    TrafficNetwork net;
    net.links = {{1, 2, 5.0, 1000.0, 1.0}};
    net.ods = {{1, 2, 700.0}};
    auto inst = build_traffic(net, {}, empty_space());
    LinearProgram lp{Vec::Zero(inst.n()), inst.base.a_ub, inst.base.b_ub, inst.base.a_eq, inst.base.b_eq,
                     inst.base.lower, inst.base.upper};
    auto r = solve_lp(lp);
    ASSERT_EQ(r.status, LpStatus::optimal);
    EXPECT_NEAR(r.x(1), 700.0, 1e-9);
    EXPECT_NEAR(inst.x_lower(1), 700.0, 1e-9);
    EXPECT_NEAR(inst.x_upper(1), 700.0, 1e-9);

    TrafficNetwork broken = net;
    broken.ods = {{2, 1, 10.0}};
    EXPECT_THROW(build_traffic(broken, {}, empty_space()), ValidationError);
}

TEST(Model, TrafficGradientMatchesFiniteDifferences) {
    auto inst = fx::traffic();
    const auto& f = inst.base.objectives[0];
    std::mt19937_64 rng(3);
    for (int t = 0; t < 20; ++t) {
        Vec x(inst.n());
        for (auto& v : x) v = std::uniform_real_distribution<double>(100.0, 6000.0)(rng);
        Vec g = f.gradient(x);
        for (Eigen::Index j = 0; j < x.size(); ++j) {
            double h = 1e-5 * (1.0 + std::abs(x(j)));
            Vec xp = x, xm = x;
            xp(j) += h;
            xm(j) -= h;
            double fd = (f.value(xp) - f.value(xm)) / (2 * h);
            EXPECT_LE(std::abs(fd - g(j)), 1e-6 * std::max(1.0, std::abs(g(j)))) << j;
        }
        // convexity along random segments on v ≥ 0
        Vec y(inst.n());
        for (auto& v : y) v = std::uniform_real_distribution<double>(0.0, 6000.0)(rng);
        EXPECT_LE(f.value(0.5 * (x + y)), 0.5 * (f.value(x) + f.value(y)) + 1e-9);
    }
}

TEST(Model, JsonRoundTrip) {
    for (auto inst : {fx::mqp_rhs(), fx::mlp_triobj(), fx::traffic(), fx::portfolio(5)}) {
        json j = instance_to_json(inst);
        DmpInstance back = instance_from_json(json::parse(j.dump()));
        ASSERT_EQ(back.n_free(), inst.n_free()) << inst.name;
        Vec th = 0.5 * (inst.space.lower + inst.space.upper);
        if (inst.name == "mlp-triobj") th = fx::theta_mlp_true();
        Vec th_back = th;
        for (std::size_t k = 0; k < inst.slots.size(); ++k)
            if (inst.slots[k].scale < 0) th_back(static_cast<Eigen::Index>(k)) *= -1.0;
        ConcreteDmp a = apply_params(inst, th), b = apply_params(back, th_back);
        EXPECT_LE((a.g - b.g).norm() + (a.h - b.h).norm(), 1e-12) << inst.name;
        for (int l = 0; l < a.p(); ++l)
            EXPECT_LE((a.objectives[l].c - b.objectives[l].c).norm(), 1e-12) << inst.name;
    }
    EXPECT_THROW(instance_from_json(json::parse(R"({"family":"cubic"})")), ValidationError);
}

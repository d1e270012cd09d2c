#include <gtest/gtest.h>

#include "imop/data.hpp"
#include "imop/fixtures.hpp"
#include "imop/reform.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace imop;
namespace fx = imop::fixtures;

namespace {

ObservationSet noisy(const DmpInstance& inst, const Vec& theta, int n, std::uint64_t seed) {
    DataLaw law;
    NoiseModel noise;
    noise.kind = NoiseKind::truncated_gaussian;
    return generate_observations(inst, theta, law, noise, n, seed);
}

ObservationSet golden_observations() {
    ObservationSet obs;
    obs.y = {fx::vec({0.5, 1.0}), fx::vec({1.5, 2.0})};
    return obs;
}

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

}  // namespace

TEST(Reform, MlpCounts) {
    auto inst = fx::mlp_triobj();
    auto obs = noisy(inst, fx::theta_mlp_true(), 2, 1);
    auto m = build_single_level_mlp(inst, obs, grid_weights(3, 2));
    const int n = 3, mm = 2, nn = 2, k = 2;
    EXPECT_EQ(m.count(VarKind::binary), n * k + mm * k + nn * k);
    EXPECT_EQ(m.count_prefix("t1_"), n * k);
    EXPECT_EQ(m.count_prefix("t2_"), mm * k);
    EXPECT_EQ(m.count_prefix("z_"), nn * k);
    EXPECT_EQ(m.count_prefix("eta_"), nn * k * n);
    EXPECT_EQ(m.count_prefix("theta_"), 9);
    EXPECT_EQ(m.row_count_prefix("assign_"), nn);
    EXPECT_EQ(m.row_count_prefix("norm_"), 3);
}

TEST(Reform, NoObservationsLeavesOnlyKktBlocks) {
    auto inst = fx::mlp_triobj();
    auto m = build_single_level_mlp(inst, ObservationSet{}, grid_weights(3, 4));
    EXPECT_EQ(m.count_prefix("z_"), 0);
    EXPECT_EQ(m.count_prefix("eta_"), 0);
    EXPECT_EQ(m.count_prefix("res_"), 0);
    EXPECT_EQ(static_cast<int>(m.vars.size()), 9 + 4 * (3 + 2 + 3 + 2));
    EXPECT_TRUE(m.obj_quad.empty());
}

TEST(Reform, MlpGroundTruthPlugInIsFeasible) {
    auto inst = fx::mlp_triobj();
    auto obs = noisy(inst, fx::theta_mlp_true(), 6, 2);
    auto ws = grid_weights(3, 10);
    auto m = build_single_level_mlp(inst, obs, ws);
    auto pt = plugin_single_level(inst, fx::theta_mlp_true(), obs, ws);
    auto rep = check_feasible(m, pt);
    EXPECT_TRUE(rep.pass) << rep.worst << " " << rep.max_violation;
    auto front = observed_front(inst, fx::theta_mlp_true(), ws);
    EXPECT_NEAR(m.objective(pt), empirical_risk(obs, front).value, 1e-9);
}

TEST(Reform, MlpNeedsNormalization) {
    auto inst = fx::mlp_triobj();
    inst.space.norm_rows = Mat(0, 9);
    inst.space.norm_rhs = Vec(0);
    EXPECT_THROW(build_single_level_mlp(inst, ObservationSet{}, grid_weights(3, 2)), ValidationError);
    EXPECT_THROW(build_single_level_mlp(fx::mqp_rhs(), ObservationSet{}, grid_weights(2, 2)), ValidationError);
}

TEST(Reform, MqpRhsCounts) {
    auto inst = fx::mqp_rhs();
    auto m = build_single_level_mqp_rhs(inst, golden_observations(), grid_weights(2, 2));
    EXPECT_EQ(m.count_prefix("theta_"), 2);
    EXPECT_EQ(m.count_prefix("x_"), 4);
    EXPECT_EQ(m.count_prefix("u_"), 4);
    EXPECT_EQ(m.count_prefix("t2_"), 4);
    EXPECT_EQ(m.count_prefix("z_"), 4);
    EXPECT_EQ(m.count_prefix("eta_"), 8);
    // nonnegativity of x adds one complementarity binary per coordinate and weight
    EXPECT_EQ(m.count_prefix("t1_"), 4);
    EXPECT_EQ(m.count(VarKind::binary), 12);
}

TEST(Reform, MqpRhsPlugInAndBigMs) {
    auto inst = fx::mqp_rhs();
    Vec th = fx::theta_mqp_rhs_true();
    auto obs = noisy(inst, th, 20, 3);
    auto ws = grid_weights(2, 11);
    auto m = build_single_level_mqp_rhs(inst, obs, ws);
    auto pt = plugin_single_level(inst, th, obs, ws);
    auto rep = check_feasible(m, pt);
    EXPECT_TRUE(rep.pass) << rep.worst << " " << rep.max_violation;
    auto front = observed_front(inst, th, ws);
    EXPECT_NEAR(m.objective(pt), empirical_risk(obs, front).value, 1e-9);
    for (const auto& b : m.big_m) EXPECT_FALSE(b.provenance.empty());

    BigMConfig tiny;
    tiny.uniform = 0.01;
    auto mt = build_single_level_mqp_rhs(inst, obs, ws, tiny);
    auto bad = check_feasible(mt, pt);
    EXPECT_FALSE(bad.pass);
    EXPECT_EQ(bad.worst.rfind("bm_", 0), 0U) << bad.worst;
}

TEST(Reform, MqpRhsRejectsObjectiveSlots) {
    EXPECT_THROW(build_single_level_mqp_rhs(fx::mqp_obj(), ObservationSet{}, grid_weights(2, 2)), ValidationError);
}

TEST(Reform, PlugInAtEveryBoxCorner) {
    auto inst = fx::mqp_rhs();
    auto ws = grid_weights(2, 6);
    auto obs = noisy(inst, fx::theta_mqp_rhs_true(), 8, 4);
    auto m = build_single_level_mqp_rhs(inst, obs, ws);
    for (double a : {-8.0, -1.0})
        for (double b : {-8.0, -1.0}) {
            auto rep = check_feasible(m, plugin_single_level(inst, fx::vec({a, b}), obs, ws));
            EXPECT_TRUE(rep.pass) << a << "," << b << " " << rep.worst << " " << rep.max_violation;
        }
}

TEST(Reform, EstimateWithCertificatesPasses) {
    auto inst = fx::mqp_rhs();
    auto obs = noisy(inst, fx::theta_mqp_rhs_true(), 30, 5);
    auto ws = grid_weights(2, 6);
    ClusteringOptions opt;
    opt.fit.starts = 2;
    auto est = estimate_clustering(inst, obs, ws, opt);
    auto m = build_single_level_mqp_rhs(inst, obs, ws);
    auto pt = plugin_single_level(inst, est.theta, obs, ws);
    auto rep = check_feasible(m, pt, 1e-5);
    EXPECT_TRUE(rep.pass) << rep.worst << " " << rep.max_violation;
    EXPECT_NEAR(m.objective(pt), est.objective, 1e-9);
}

TEST(Reform, ZeroPointViolatesAssignmentByOne) {
    auto inst = fx::mqp_rhs();
    auto obs = golden_observations();
    auto ws = grid_weights(2, 2);
    auto m = build_single_level_mqp_rhs(inst, obs, ws);
    PointMap pt;
    for (const auto& v : m.vars) pt[v.name] = 0.0;
    auto rep = check_feasible(m, pt);
    for (const auto& [name, viol] : rep.violation)
        if (name.rfind("assign_", 0) == 0) {
            EXPECT_EQ(viol, 1.0);
        }
    EXPECT_FALSE(rep.pass);
    pt.erase("theta_0");
    EXPECT_THROW(check_feasible(m, pt), ValidationError);
}

TEST(Reform, ExportRoundTripAndDeterminism) {
    auto inst = fx::mqp_rhs();
    auto obs = golden_observations();
    auto ws = grid_weights(2, 2);
    auto a = build_single_level_mqp_rhs(inst, obs, ws);
    auto b = build_single_level_mqp_rhs(inst, obs, ws);
    EXPECT_EQ(write_lp(a), write_lp(b));
    auto back = parse_lp(write_lp(a));
    EXPECT_TRUE(structurally_equal(a, back));
    EXPECT_EQ(write_lp(back), write_lp(a));
    EXPECT_NO_THROW(back.validate());

    auto mlp = fx::mlp_triobj();
    auto mm = build_single_level_mlp(mlp, noisy(mlp, fx::theta_mlp_true(), 5, 6), grid_weights(3, 6));
    EXPECT_TRUE(structurally_equal(mm, parse_lp(write_lp(mm))));

    auto dir = std::filesystem::temp_directory_path() / "imop_reform_test";
    std::filesystem::create_directories(dir);
    auto p1 = (dir / model_file_name("mqp-rhs", 2, 2)).string();
    export_model(a, p1);
    EXPECT_TRUE(structurally_equal(a, read_lp_file(p1)));
    EXPECT_EQ(model_file_name("mqp-rhs", 2, 2), "mqp-rhs_2_2.lp");
}

TEST(Reform, GoldenFile) {
    auto m = build_single_level_mqp_rhs(fx::mqp_rhs(), golden_observations(), grid_weights(2, 2));
    std::string golden = slurp(std::string(IMOP_FIXTURE_DIR) + "/mqp_rhs_2_2.lp");
    ASSERT_FALSE(golden.empty());
    EXPECT_EQ(write_lp(m), golden);
}

TEST(Reform, ParserRejectsMalformedText) {
    EXPECT_NO_THROW(parse_lp("Minimize\n obj: + 1 x\nSubject To\n c: + 1 x <= 1\nBounds\n x free\nEnd\n"));
    EXPECT_THROW(parse_lp("Minimize\n obj: + 1 y\nSubject To\n c: + 1 x <= 1\nBounds\n x free\nEnd\n"), ValidationError);
    EXPECT_THROW(parse_lp("Minimize\n obj:\nSubject To\n c: + 1 y <=\nBounds\n y free\nEnd\n"), ValidationError);
}

TEST(TestProblem, SinglePointSingleWeight) {
    auto inst = fx::mqp_obj();
    Vec th = fx::theta_mqp_obj_true();
    Vec x = solve_wp(inst, th, fx::vec({0.5, 0.5})).x;
    auto m = build_test_problem(inst, th, {x}, {fx::vec({0.5, 0.5})});
    EXPECT_EQ(m.count_prefix("z_"), 1);
    EXPECT_EQ(m.sense, ObjSense::maximize);
    auto pt = plugin_test_problem(inst, th, th, {x}, {fx::vec({0.5, 0.5})});
    EXPECT_EQ(pt.at("z_0_0"), 1.0);
    auto rep = check_feasible(m, pt);
    EXPECT_TRUE(rep.pass) << rep.worst << " " << rep.max_violation;
    EXPECT_EQ(m.objective(pt), 0.0);
}

TEST(TestProblem, IncumbentIsFeasible) {
    auto inst = fx::mlp_triobj();
    Vec th = fx::theta_mlp_reported();
    auto pts = solve_all(apply_params(inst, th), random_weights(3, 12, {}, 1));
    auto ws = grid_weights(3, 30);
    auto m = build_test_problem(inst, th, pts, ws);
    auto rep = check_feasible(m, plugin_test_problem(inst, th, th, pts, ws));
    EXPECT_TRUE(rep.pass) << rep.worst << " " << rep.max_violation;
    EXPECT_NO_THROW(parse_lp(write_lp(m)).validate());
}

TEST(TestProblem, ExampleTwoParameterIsFeasibleForExampleOnePoints) {
    auto inst = fx::quadratic_family();
    Vec th1 = fx::theta_example1(), th2 = fx::theta_example2();
    std::vector<Vec> pts;
    for (double w : {0.25, 0.5, 0.75}) pts.push_back(solve_wp(inst, th1, fx::vec({w, 1 - w})).x);
    auto ws = grid_weights(2, 21);  // contains 0.3, 0.6 and 0.9 = 1.2·w
    auto m = build_test_problem(inst, th1, pts, ws);
    auto pt = plugin_test_problem(inst, th1, th2, pts, ws);
    auto rep = check_feasible(m, pt, 1e-5);
    EXPECT_TRUE(rep.pass) << rep.worst << " " << rep.max_violation;
    EXPECT_NEAR(m.objective(pt), (th2 - th1).lpNorm<1>(), 1e-12);
}

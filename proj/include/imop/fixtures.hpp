#pragma once

// Problem instances used by the experiments, tests and CLI.

#include "io.hpp"
#include "model.hpp"

namespace imop::fixtures {

inline ParamSpace box(const Vec& lo, const Vec& hi) {
    ParamSpace s;
    s.lower = lo;
    s.upper = hi;
    s.norm_rows = Mat(0, lo.size());
    s.norm_rhs = Vec(0);
    return s;
}

inline Vec vec(std::initializer_list<double> v) { return to_vec(std::vector<double>(v)); }

/// 3x1 − x2 ≤ 6, x2 ≤ 3, x ≥ 0.
inline ConstraintBlock two_dim_polytope() {
    ConstraintBlock cb;
    cb.a = Mat(2, 2);
    cb.a << 3, -1, 0, 1;
    cb.b = vec({6, 3});
    return cb;
}

/// Coefficients of the two bi-objective quadratic examples, in slot order
/// (c1_1, c1_2, q1_1, q1_2, c2_1, c2_2, q2_1, q2_2) where q is the x_j² coefficient.
inline Vec theta_example1() { return vec({6, 2, 1, 2, -12, -10, 2, 1}); }
inline Vec theta_example2() { return vec({18, 0, 7, 11, -72, -60, 12, 6}); }

/// Separable bi-objective quadratic family with every polynomial coefficient free.
/// Linear coefficients range over [−lin, lin]; x_j² coefficients over [q_lo, q_hi].
inline DmpInstance quadratic_family(double lin = 100.0, double q_lo = 0.5, double q_hi = 100.0) {
    std::vector<Mat> qs = {Mat::Identity(2, 2), Mat::Identity(2, 2)};
    std::vector<Vec> cs = {Vec::Zero(2), Vec::Zero(2)};
    SlotMask mask;
    mask.linear = {{true, true}, {true, true}};
    mask.quad_diag = {{true, true}, {true, true}};
    Vec lo(8), hi(8);
    lo << -lin, -lin, q_lo, q_lo, -lin, -lin, q_lo, q_lo;
    hi << lin, lin, q_hi, q_hi, lin, lin, q_hi, q_hi;
    return build_mqp(qs, cs, two_dim_polytope(), mask, box(lo, hi), "quadratic-family");
}

inline DmpInstance fixed_quadratic(const Vec& t, const std::string& name) {
    std::vector<Mat> qs = {Vec(2 * t.segment(2, 2)).asDiagonal(), Vec(2 * t.segment(6, 2)).asDiagonal()};
    std::vector<Vec> cs = {t.segment(0, 2), t.segment(4, 2)};
    return build_mqp(qs, cs, two_dim_polytope(), {}, empty_space(), name);
}

/// f1 = x1² + 2x2² + 6x1 + 2x2,  f2 = 2x1² + x2² − 12x1 − 10x2.
inline DmpInstance example1() { return fixed_quadratic(theta_example1(), "example1"); }

/// f1 = 7x1² + 11x2² + 18x1,  f2 = 12x1² + 6x2² − 72x1 − 60x2.
inline DmpInstance example2() { return fixed_quadratic(theta_example2(), "example2"); }

/// Motivating bi-objective LP: min (x1, x2) s.t. a x1 + b x2 ≥ 0, b x1 + a x2 ≥ 0, x1 + x2 ≤ c.
/// With free_objectives the two cost vectors become parameters on [0,1]² with unit sums.
inline DmpInstance intro_problem(double a, double b, double c, bool free_objectives = false) {
    require(a > b && b > 0 && c > 0, "intro problem needs a > b > 0 and c > 0");
    ConstraintBlock cb;
    cb.a = Mat(3, 2);
    cb.a << a, b, b, a, 1, 1;
    cb.b = vec({0, 0, c});
    cb.sense = {Sense::ge, Sense::ge, Sense::le};
    cb.lower = Vec::Constant(2, -kInf);
    cb.upper = Vec::Constant(2, kInf);
    std::vector<Vec> cs = {vec({1, 0}), vec({0, 1})};
    if (!free_objectives) return build_mlp(cs, cb, {}, empty_space(), "intro");
    SlotMask mask;
    mask.linear = {{true, true}, {true, true}};
    ParamSpace s = box(Vec::Zero(4), Vec::Ones(4));
    s.norm_rows = Mat(2, 4);
    s.norm_rows << 1, 1, 0, 0, 0, 0, 1, 1;
    s.norm_rhs = vec({1, 1});
    return build_mlp(cs, cb, mask, s, "intro");
}

/// Tri-objective LP over x1 + x2 + x3 ≤ 5, x1 + x2 + 3x3 ≤ 9, x ≥ 0.
/// All nine cost entries free in [−1, 0] with 1ᵀc_l = −1.
inline DmpInstance mlp_triobj() {
    ConstraintBlock cb;
    cb.a = Mat(2, 3);
    cb.a << 1, 1, 1, 1, 1, 3;
    cb.b = vec({5, 9});
    std::vector<Vec> cs = {vec({-1, 0, 0}), vec({0, -1, 0}), vec({0, 0, -1})};
    SlotMask mask;
    mask.linear = std::vector<std::vector<bool>>(3, std::vector<bool>(3, true));
    ParamSpace s = box(Vec::Constant(9, -1.0), Vec::Zero(9));
    s.norm_rows = Mat::Zero(3, 9);
    for (int l = 0; l < 3; ++l) s.norm_rows.block(l, 3 * l, 1, 3).setOnes();
    s.norm_rhs = Vec::Constant(3, -1.0);
    return build_mlp(cs, cb, mask, s, "mlp-triobj");
}

inline Vec theta_mlp_true() { return vec({-1, 0, 0, 0, -1, 0, 0, 0, -1}); }

/// Reported estimate used for the non-identifiability test, rescaled so each
/// block sums to −1 exactly (the printed values carry four-digit rounding).
inline Vec theta_mlp_reported() {
    Vec t = vec({-1.0 / 3, -1.0 / 3, -1.0 / 3, -0.3450, -0.3450, -0.3099, -0.1227, -0.1227, -0.7546});
    for (int l = 0; l < 3; ++l) t.segment(3 * l, 3) /= -t.segment(3 * l, 3).sum();
    return t;
}

/// Bi-objective QP with Q1 = diag(1,2), c1 = (3,1), Q2 = diag(2,1), c2 = (−6,−5)
/// and constraints Ax ≥ b, A = [[−3,1],[0,−1]], x ≥ 0.
inline ConstraintBlock mqp_constraints(const Vec& b) {
    ConstraintBlock cb;
    cb.a = Mat(2, 2);
    cb.a << -3, 1, 0, -1;
    cb.b = b;
    cb.sense = {Sense::ge, Sense::ge};
    return cb;
}

inline std::vector<Mat> mqp_q() {
    Mat q1 = Mat::Zero(2, 2), q2 = Mat::Zero(2, 2);
    q1.diagonal() << 1, 2;
    q2.diagonal() << 2, 1;
    return {q1, q2};
}

inline std::vector<Vec> mqp_c() { return {vec({3, 1}), vec({-6, -5})}; }

/// Right-hand side b free in [−8, −1]².
inline DmpInstance mqp_rhs() {
    SlotMask mask;
    mask.ineq_rhs = {true, true};
    return build_mqp(mqp_q(), mqp_c(), mqp_constraints(vec({-3, -6})), mask,
                     box(Vec::Constant(2, -8.0), Vec::Constant(2, -1.0)), "mqp-rhs");
}

inline Vec theta_mqp_rhs_true() { return vec({-3, -6}); }

/// Cost vectors c1, c2 free in [−10, 10]², with b = (−6, −3).
inline DmpInstance mqp_obj() {
    SlotMask mask;
    mask.linear = {{true, true}, {true, true}};
    return build_mqp(mqp_q(), mqp_c(), mqp_constraints(vec({-6, -3})), mask,
                     box(Vec::Constant(4, -10.0), Vec::Constant(4, 10.0)), "mqp-obj");
}

inline Vec theta_mqp_obj_true() { return vec({3, 1, -6, -5}); }

/// Expected returns of eight blue-chip securities and their covariance matrix.
inline Vec portfolio_returns() { return vec({0.1791, 0.1143, 0.1357, 0.0837, 0.1653, 0.1808, 0.0352, 0.0368}); }

inline Mat portfolio_covariance() {
    Mat q(8, 8);
    q << 0.1641, 0.0299, 0.0478, 0.0491, 0.0580, 0.0871, 0.0603, 0.0492,  //
        0.0299, 0.0720, 0.0511, 0.0287, 0.0527, 0.0297, 0.0291, 0.0326,   //
        0.0478, 0.0511, 0.0794, 0.0498, 0.0664, 0.0479, 0.0395, 0.0523,   //
        0.0491, 0.0287, 0.0498, 0.1148, 0.0336, 0.0503, 0.0326, 0.0447,   //
        0.0580, 0.0527, 0.0664, 0.0336, 0.1073, 0.0483, 0.0402, 0.0533,   //
        0.0871, 0.0297, 0.0479, 0.0503, 0.0483, 0.1134, 0.0591, 0.0387,   //
        0.0603, 0.0291, 0.0395, 0.0326, 0.0402, 0.0591, 0.0704, 0.0244,   //
        0.0492, 0.0326, 0.0523, 0.0447, 0.0533, 0.0387, 0.0244, 0.1028;
    return q;
}

/// Portfolio problem document: f1 = −rᵀx, f2 = xᵀΣx, 0 ≤ x ≤ 1, Σx = 1.
/// The first `free_count` entries of c1 = −r are parameters in [−0.3, 0].
inline json portfolio_document(int free_count = 8) {
    require(free_count >= 0 && free_count <= 8, "portfolio: free_count must be in [0, 8]");
    Vec r = portfolio_returns();
    json j;
    j["name"] = "portfolio";
    j["family"] = "quadratic";
    j["objectives"] = json::array({{{"c", to_json(Vec(-r))}, {"Q", to_json(Mat(Mat::Zero(8, 8)))}},
                                   {{"c", to_json(Vec(Vec::Zero(8)))}, {"Q", to_json(Mat(2.0 * portfolio_covariance()))}}});
    j["constraints"] = {{"A", json::array()},
                        {"b", json::array()},
                        {"A_eq", json::array({std::vector<double>(8, 1.0)})},
                        {"b_eq", {1.0}},
                        {"lower", std::vector<double>(8, 0.0)},
                        {"upper", std::vector<double>(8, 1.0)}};
    std::vector<bool> free(8, false);
    for (int i = 0; i < free_count; ++i) free[static_cast<std::size_t>(i)] = true;
    j["mask"] = {{"c", {free, std::vector<bool>(8, false)}}};
    j["space"] = {{"lower", std::vector<double>(static_cast<std::size_t>(free_count), -0.3)},
                  {"upper", std::vector<double>(static_cast<std::size_t>(free_count), 0.0)}};
    return j;
}

inline DmpInstance portfolio(int free_count = 8) { return instance_from_json(portfolio_document(free_count)); }

/// θ for the portfolio instance is −r on the free entries.
inline Vec theta_portfolio_true(int free_count = 8) { return Vec(-portfolio_returns().head(free_count)); }

/// Six-node, seven-link network with O-D pairs (1,3) and (2,4).
inline TrafficNetwork six_node_network() {
    TrafficNetwork net;
    net.links = {{1, 3, 8.0, 2000, 8.0}, {2, 4, 9.0, 2000, 9.0}, {1, 5, 2.0, 2000, 2.0}, {5, 6, 6.0, 4000, 6.0},
                 {2, 5, 3.0, 2000, 3.0}, {6, 3, 3.0, 2500, 3.0}, {6, 4, 4.0, 2500, 4.0}};
    net.ods = {{1, 3, 2500.0}, {2, 4, 3500.0}};
    net.enumerate_routes();
    return net;
}

/// Both demands free in [1000, 10000].
inline DmpInstance traffic() {
    return build_traffic(six_node_network(), {true, true}, box(Vec::Constant(2, 1000.0), Vec::Constant(2, 10000.0)),
                         "traffic");
}

inline Vec theta_traffic_true() { return vec({2500, 3500}); }

/// Look up an instance by experiment id.
inline DmpInstance by_id(const std::string& id) {
    if (id == "mlp-triobj") return mlp_triobj();
    if (id == "mqp-rhs") return mqp_rhs();
    if (id == "mqp-obj") return mqp_obj();
    if (id == "portfolio") return portfolio(5);
    if (id == "traffic") return traffic();
    if (id == "intro-biobj") return intro_problem(6, 1, 1, true);
    if (id == "example1") return example1();
    if (id == "example2") return example2();
    if (id == "quadratic-family") return quadratic_family();
    throw ValidationError("unknown fixture '" + id + "'");
}

inline Vec true_theta(const std::string& id) {
    if (id == "mlp-triobj") return theta_mlp_true();
    if (id == "mqp-rhs") return theta_mqp_rhs_true();
    if (id == "mqp-obj") return theta_mqp_obj_true();
    if (id == "portfolio") return theta_portfolio_true(5);
    if (id == "traffic") return theta_traffic_true();
    if (id == "intro-biobj") return vec({1, 0, 0, 1});
    if (id == "quadratic-family") return theta_example1();
    if (id == "example1" || id == "example2") return Vec(0);
    throw ValidationError("unknown fixture '" + id + "'");
}

}  // namespace imop::fixtures

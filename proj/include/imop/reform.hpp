#pragma once

// Single-level big-M models of the weighted-sum inverse problem and of the
// non-identifiability test, their LP-format text form and a feasibility checker.
//
// Variable names:
//   theta_q          free parameter q
//   x_k_j            decision of weight k, coordinate j
//   u_k_r            multiplier of inequality row r (stacked form g x ≤ h)
//   lam_k_e          multiplier of equality row e
//   t1_k_j           1 when x_k_j may be positive (nonnegative coordinates)
//   t2_k_r           1 when row r may be active
//   z_i_k            observation i is matched to weight k
//   eta_i_k_j        z_i_k · x_k_j for observed coordinate j
//   res_i_j          y_ij − Σ_k eta_i_k_j
// The test-problem model uses u_i_r, lam_i_e, t_i_r per efficient point i and
// dp_q, dn_q, sgn_q for the split of θ − θ̂.
// Rows whose name starts with "bm_" carry a big-M constant.
//
// The right-hand-side model keeps the nonnegativity bounds of x: bound
// multipliers enter through the t1 block exactly as in the linear model. The
// stationarity rows use x_k (one block per weight).

#include "estimators.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

namespace imop {

enum class VarKind { continuous, binary };
enum class RowSense { le, ge, eq };
enum class ObjSense { minimize, maximize };

struct MipVar {
    std::string name;
    VarKind kind = VarKind::continuous;
    double lo = 0.0;
    double hi = kInf;
};

struct MipRow {
    std::string name;
    std::vector<std::pair<int, double>> terms;
    RowSense sense = RowSense::le;
    double rhs = 0.0;
    bool big_m = false;
};

struct BigMEntry {
    std::string name;
    double value = 0.0;
    std::string provenance;
};

using PointMap = std::map<std::string, double>;

struct MipModel {
    std::string name;
    ObjSense sense = ObjSense::minimize;
    std::vector<MipVar> vars;
    std::vector<MipRow> rows;
    std::vector<std::pair<int, double>> obj_linear;
    std::vector<std::pair<int, double>> obj_quad;  // coef · v²
    std::vector<BigMEntry> big_m;
    std::unordered_map<std::string, int> index;

    int add_var(const std::string& n, VarKind kind, double lo, double hi) {
        require(!index.count(n), "duplicate variable name '" + n + "'");
        if (kind == VarKind::binary) {
            lo = 0.0;
            hi = 1.0;
        }
        index[n] = static_cast<int>(vars.size());
        vars.push_back({n, kind, lo, hi});
        return static_cast<int>(vars.size()) - 1;
    }

    int var(const std::string& n) const {
        auto it = index.find(n);
        require(it != index.end(), "unknown variable '" + n + "'");
        return it->second;
    }

    bool has_var(const std::string& n) const { return index.count(n) > 0; }

    void add_row(const std::string& n, const std::vector<std::pair<int, double>>& terms, RowSense s, double rhs) {
        MipRow r;
        r.name = n;
        r.sense = s;
        r.rhs = rhs;
        r.big_m = n.rfind("bm_", 0) == 0;
        for (const auto& [v, c] : terms) {
            if (c == 0.0) continue;
            bool merged = false;
            for (auto& t : r.terms)
                if (t.first == v) {
                    t.second += c;
                    merged = true;
                }
            if (!merged) r.terms.emplace_back(v, c);
        }
        std::erase_if(r.terms, [](const auto& t) { return t.second == 0.0; });
        rows.push_back(std::move(r));
    }

    int count(VarKind k) const {
        int c = 0;
        for (const auto& v : vars) c += v.kind == k;
        return c;
    }

    int count_prefix(const std::string& prefix) const {
        int c = 0;
        for (const auto& v : vars) c += v.name.rfind(prefix, 0) == 0;
        return c;
    }

    int row_count_prefix(const std::string& prefix) const {
        int c = 0;
        for (const auto& r : rows) c += r.name.rfind(prefix, 0) == 0;
        return c;
    }

    double big_m_value(const std::string& n) const {
        for (const auto& b : big_m)
            if (b.name == n) return b.value;
        throw ValidationError("no big-M named '" + n + "'");
    }

    std::vector<double> values_of(const PointMap& pt) const {
        std::vector<double> v(vars.size());
        for (std::size_t j = 0; j < vars.size(); ++j) {
            auto it = pt.find(vars[j].name);
            require(it != pt.end(), "point does not assign variable '" + vars[j].name + "'");
            v[j] = it->second;
        }
        return v;
    }

    double objective(const PointMap& pt) const {
        auto v = values_of(pt);
        double s = 0.0;
        for (const auto& [j, c] : obj_linear) s += c * v[static_cast<std::size_t>(j)];
        for (const auto& [j, c] : obj_quad) s += c * sq(v[static_cast<std::size_t>(j)]);
        return s;
    }

    /// Unique names, every binary in a big-M row, assignment rows summing to one.
    void validate() const {
        std::unordered_map<std::string, int> seen;
        for (const auto& r : rows) require(seen.emplace(r.name, 1).second, "duplicate row name '" + r.name + "'");
        for (const auto& v : vars) require(!seen.count(v.name), "row and variable share the name '" + v.name + "'");
        std::vector<char> in_bm(vars.size(), 0);
        for (const auto& r : rows) {
            if (r.big_m)
                for (const auto& t : r.terms) in_bm[static_cast<std::size_t>(t.first)] = 1;
            if (r.name.rfind("assign_", 0) == 0) {
                require(r.sense == RowSense::eq && r.rhs == 1.0, "assignment row '" + r.name + "' must equal one");
                for (const auto& t : r.terms)
                    require(t.second == 1.0 && vars[static_cast<std::size_t>(t.first)].kind == VarKind::binary,
                            "assignment row '" + r.name + "' must sum binaries");
            }
        }
        for (std::size_t j = 0; j < vars.size(); ++j)
            if (vars[j].kind == VarKind::binary)
                require(in_bm[j], "binary '" + vars[j].name + "' appears in no big-M row");
    }
};

/// Big-M policy. Defaults: factor × certified primal bounds and × sampled multiplier bounds.
struct BigMConfig {
    double factor = 2.0;
    std::optional<double> uniform;  // use this single value for every big-M
    int samples = 16;               // random parameters sampled for multiplier bounds
    std::uint64_t seed = 0;
};

struct FeasibilityReport {
    std::vector<std::pair<std::string, double>> violation;  // per row, positive = violated
    double max_violation = 0.0;
    std::string worst;
    bool pass = false;
};

/// Signed violation of every row, bound and integrality requirement.
inline FeasibilityReport check_feasible(const MipModel& m, const PointMap& pt, double tol = 1e-6) {
    auto v = m.values_of(pt);
    FeasibilityReport rep;
    auto note = [&](const std::string& n, double val) {
        rep.violation.emplace_back(n, val);
        if (rep.worst.empty() || val > rep.max_violation) {
            rep.max_violation = val;
            rep.worst = n;
        }
    };
    for (const auto& r : m.rows) {
        double lhs = 0.0;
        for (const auto& [j, c] : r.terms) lhs += c * v[static_cast<std::size_t>(j)];
        double s = r.sense == RowSense::le ? lhs - r.rhs : (r.sense == RowSense::ge ? r.rhs - lhs : std::abs(lhs - r.rhs));
        note(r.name, s);
    }
    for (std::size_t j = 0; j < m.vars.size(); ++j) {
        const auto& var = m.vars[j];
        double b = std::max(var.lo - v[j], v[j] - var.hi);
        if (var.kind == VarKind::binary) b = std::max(b, std::min(std::abs(v[j]), std::abs(v[j] - 1.0)));
        if (b > 0.0) note("bound:" + var.name, b);
    }
    rep.max_violation = std::max(0.0, rep.max_violation);
    rep.pass = rep.max_violation <= tol;
    return rep;
}

namespace detail {

using Terms = std::vector<std::pair<int, double>>;

inline std::string nm(const std::string& a, std::size_t i) { return a + "_" + std::to_string(i); }
inline std::string nm(const std::string& a, std::size_t i, std::size_t j) { return nm(a, i) + "_" + std::to_string(j); }
inline std::string nm(const std::string& a, std::size_t i, std::size_t j, std::size_t k) {
    return nm(a, i, j) + "_" + std::to_string(k);
}

// The program with every slot entry set to zero, so that each slot enters linearly.
inline ConcreteDmp zero_slots(const DmpInstance& inst) {
    ConcreteDmp d = inst.base;
    for (const auto& s : inst.slots) slot_ref(d, s) = 0.0;
    d.finalize();
    return d;
}

inline bool nonneg_coord(const ConcreteDmp& d, Eigen::Index j) { return d.lower(j) == 0.0 && std::isinf(d.upper(j)); }

// Stacked rows that get explicit multipliers: all but the x_j ≥ 0 bounds of nonnegative coordinates.
inline std::vector<Eigen::Index> multiplier_rows(const ConcreteDmp& d) {
    std::vector<Eigen::Index> r;
    for (Eigen::Index i = 0; i < d.m_stacked(); ++i) {
        int bv = d.bound_var[static_cast<std::size_t>(i)];
        if (bv >= 0 && nonneg_coord(d, bv) && d.g(i, bv) < 0.0) continue;
        r.push_back(i);
    }
    return r;
}

inline Eigen::Index lower_bound_row(const ConcreteDmp& d, Eigen::Index j) {
    for (Eigen::Index i = 0; i < d.m_stacked(); ++i)
        if (d.bound_var[static_cast<std::size_t>(i)] == j && d.g(i, j) < 0.0) return i;
    return -1;
}

// θ-dependent part of stacked row r's right-hand side: (θ index, coefficient).
inline std::vector<std::pair<int, double>> rhs_params(const DmpInstance& inst, Eigen::Index r) {
    std::vector<std::pair<int, double>> out;
    for (std::size_t q = 0; q < inst.slots.size(); ++q)
        if (inst.slots[q].kind == SlotKind::ineq_rhs && inst.slots[q].index == r)
            out.emplace_back(static_cast<int>(q), slot_factor(inst.slots[q]));
    return out;
}

inline std::vector<std::pair<int, double>> eq_params(const DmpInstance& inst, Eigen::Index e) {
    std::vector<std::pair<int, double>> out;
    for (std::size_t q = 0; q < inst.slots.size(); ++q)
        if (inst.slots[q].kind == SlotKind::eq_rhs && inst.slots[q].index == e)
            out.emplace_back(static_cast<int>(q), slot_factor(inst.slots[q]));
    return out;
}

// ∂/∂θ_q of coordinate j of ∇(wᵀf)(x).
inline double grad_coef(const ParamSlot& s, const Vec& w, Eigen::Index j, const Vec& x) {
    if (s.index != j) return 0.0;
    if (s.kind == SlotKind::linear_coef) return w(s.objective) * slot_factor(s);
    if (s.kind == SlotKind::quad_diag) return w(s.objective) * slot_factor(s) * x(j);
    return 0.0;
}

inline double max_abs_over_box(double lo, double hi) { return std::max(std::abs(lo), std::abs(hi)); }

// Largest value of h_r(θ) − g_r x over the parameter box and the certified decision box.
inline double slack_bound(const DmpInstance& inst, const ConcreteDmp& d0, Eigen::Index r, const Vec* x_fixed) {
    double h = d0.h(r);
    for (const auto& [q, c] : rhs_params(inst, r))
        h += std::max(c * inst.space.lower(q), c * inst.space.upper(q));
    double gx = 0.0;
    for (Eigen::Index j = 0; j < d0.n(); ++j) {
        double a = d0.g(r, j);
        if (a == 0.0) continue;
        if (x_fixed) gx += a * (*x_fixed)(j);
        else gx += std::min(a * inst.x_lower(j), a * inst.x_upper(j));
    }
    return std::max(0.0, h - gx);
}

inline std::vector<Vec> sample_thetas(const ParamSpace& s, int count, std::uint64_t seed, const Vec* first = nullptr) {
    std::vector<Vec> out;
    if (first) out.push_back(*first);
    out.push_back(project(s, 0.5 * (s.lower + s.upper)));
    std::mt19937_64 rng(seed);
    for (int i = 0; i < count; ++i) out.push_back(random_theta(s, rng));
    return out;
}

inline void add_theta_block(MipModel& m, const DmpInstance& inst) {
    const ParamSpace& s = inst.space;
    for (Eigen::Index q = 0; q < s.dim(); ++q)
        m.add_var(nm("theta", static_cast<std::size_t>(q)), VarKind::continuous, s.lower(q), s.upper(q));
    for (Eigen::Index r = 0; r < s.norm_rows.rows(); ++r) {
        Terms t;
        for (Eigen::Index q = 0; q < s.dim(); ++q) t.emplace_back(static_cast<int>(q), s.norm_rows(r, q));
        m.add_row(nm("norm", static_cast<std::size_t>(r)), t, RowSense::eq, s.norm_rhs(r));
    }
}

struct SingleLevelMs {
    double x = 0, rc = 0, u = 0, slack = 0, assign = 0;
};

inline SingleLevelMs single_level_big_m(const DmpInstance& inst, const ConcreteDmp& d0, const std::vector<Vec>& weights,
                                        const BigMConfig& cfg, MipModel& m) {
    SingleLevelMs ms;
    const auto rows = multiplier_rows(d0);
    if (cfg.uniform) {
        ms = {*cfg.uniform, *cfg.uniform, *cfg.uniform, *cfg.uniform, *cfg.uniform};
        for (const char* n : {"M_x", "M_rc", "M_u", "M_slack", "M_assign"}) m.big_m.push_back({n, *cfg.uniform, "configured"});
        return ms;
    }
    for (Eigen::Index j = 0; j < d0.n(); ++j)
        if (nonneg_coord(d0, j)) ms.x = std::max(ms.x, std::abs(inst.x_upper(j)));
    for (Eigen::Index r : rows) ms.slack = std::max(ms.slack, slack_bound(inst, d0, r, nullptr));
    for (const auto& th : sample_thetas(inst.space, cfg.samples, cfg.seed)) {
        ConcreteDmp d = apply_params(inst, th);
        for (const auto& w : weights) {
            ForwardSolution s = solve_wp(d, w);
            if (s.status != SolveStatus::optimal) continue;
            for (Eigen::Index r : rows) ms.u = std::max(ms.u, s.u(r));
            for (Eigen::Index j = 0; j < d.n(); ++j)
                if (nonneg_coord(d, j)) ms.rc = std::max(ms.rc, s.u(lower_bound_row(d, j)));
        }
    }
    ms.x = std::max(1.0, cfg.factor * ms.x);
    ms.slack = std::max(1.0, cfg.factor * ms.slack);
    ms.u = std::max(1.0, cfg.factor * ms.u);
    ms.rc = std::max(1.0, cfg.factor * ms.rc);
    ms.assign = std::max(1.0, cfg.factor * inst.radius);
    m.big_m.push_back({"M_x", ms.x, "certified decision box, x2"});
    m.big_m.push_back({"M_rc", ms.rc, "largest sampled bound multiplier, x2"});
    m.big_m.push_back({"M_u", ms.u, "largest sampled row multiplier, x2"});
    m.big_m.push_back({"M_slack", ms.slack, "certified row slack over parameter and decision boxes, x2"});
    m.big_m.push_back({"M_assign", ms.assign, "feasible-set radius B, x2"});
    return ms;
}

inline MipModel build_single_level(const DmpInstance& inst, const ObservationSet& obs, const std::vector<Vec>& weights,
                                   const BigMConfig& cfg, const std::string& name) {
    require(!weights.empty(), "single-level model: no weights");
    for (const auto& w : weights) check_weight(w, inst.p());
    if (!obs.y.empty()) {
        obs.validate();
        require(obs.dim() == inst.obs_dim(), "single-level model: observation dimension mismatch");
    }
    for (const auto& s : inst.slots)
        require(s.kind != SlotKind::quad_diag, "single-level model: quadratic coefficients enter bilinearly");
    for (const auto& f : inst.base.objectives)
        require(f.powers.empty(), "single-level model: objectives must be linear or quadratic");
    const ConcreteDmp d0 = zero_slots(inst);
    const Eigen::Index n = d0.n();
    const auto rows = multiplier_rows(d0);
    const std::size_t kc = weights.size(), nc = obs.y.size();

    MipModel m;
    m.name = name;
    m.sense = ObjSense::minimize;
    add_theta_block(m, inst);
    SingleLevelMs ms = single_level_big_m(inst, d0, weights, cfg, m);

    for (std::size_t k = 0; k < kc; ++k) {
        const Vec& w = weights[k];
        std::vector<int> xv(static_cast<std::size_t>(n)), uv, t1(static_cast<std::size_t>(n), -1), lv;
        for (Eigen::Index j = 0; j < n; ++j)
            xv[static_cast<std::size_t>(j)] =
                m.add_var(nm("x", k, static_cast<std::size_t>(j)), VarKind::continuous, nonneg_coord(d0, j) ? 0.0 : -kInf, kInf);
        for (Eigen::Index r : rows) uv.push_back(m.add_var(nm("u", k, static_cast<std::size_t>(r)), VarKind::continuous, 0.0, kInf));
        for (Eigen::Index e = 0; e < d0.a_eq.rows(); ++e)
            lv.push_back(m.add_var(nm("lam", k, static_cast<std::size_t>(e)), VarKind::continuous, -kInf, kInf));
        for (Eigen::Index j = 0; j < n; ++j)
            if (nonneg_coord(d0, j)) t1[static_cast<std::size_t>(j)] = m.add_var(nm("t1", k, static_cast<std::size_t>(j)), VarKind::binary, 0, 1);
        std::vector<int> t2;
        for (Eigen::Index r : rows) t2.push_back(m.add_var(nm("t2", k, static_cast<std::size_t>(r)), VarKind::binary, 0, 1));

        // primal feasibility and complementarity of each multiplier row
        for (std::size_t a = 0; a < rows.size(); ++a) {
            Eigen::Index r = rows[a];
            Terms t;
            for (Eigen::Index j = 0; j < n; ++j) t.emplace_back(xv[static_cast<std::size_t>(j)], d0.g(r, j));
            auto hp = rhs_params(inst, r);
            for (const auto& [q, c] : hp) t.emplace_back(q, -c);
            m.add_row(nm("prim", k, static_cast<std::size_t>(r)), t, RowSense::le, d0.h(r));
            m.add_row(nm("bm_u", k, static_cast<std::size_t>(r)), {{uv[a], 1.0}, {t2[a], -ms.u}}, RowSense::le, 0.0);
            Terms s;
            for (Eigen::Index j = 0; j < n; ++j) s.emplace_back(xv[static_cast<std::size_t>(j)], -d0.g(r, j));
            for (const auto& [q, c] : hp) s.emplace_back(q, c);
            s.emplace_back(t2[a], ms.slack);
            m.add_row(nm("bm_s", k, static_cast<std::size_t>(r)), s, RowSense::le, ms.slack - d0.h(r));
        }
        for (Eigen::Index e = 0; e < d0.a_eq.rows(); ++e) {
            Terms t;
            for (Eigen::Index j = 0; j < n; ++j) t.emplace_back(xv[static_cast<std::size_t>(j)], d0.a_eq(e, j));
            for (const auto& [q, c] : eq_params(inst, e)) t.emplace_back(q, -c);
            m.add_row(nm("peq", k, static_cast<std::size_t>(e)), t, RowSense::eq, d0.b_eq(e));
        }
        // stationarity: ∇(wᵀf)(x_k) + Gᵀu + Eᵀλ equals the bound multiplier (≥ 0) or zero
        Objective f0 = d0.combine(w);
        for (Eigen::Index j = 0; j < n; ++j) {
            Terms t;
            if (f0.has_quadratic())
                for (Eigen::Index i = 0; i < n; ++i) t.emplace_back(xv[static_cast<std::size_t>(i)], f0.q(j, i));
            for (std::size_t q = 0; q < inst.slots.size(); ++q)
                t.emplace_back(static_cast<int>(q), grad_coef(inst.slots[q], w, j, Vec()));
            for (std::size_t a = 0; a < rows.size(); ++a) t.emplace_back(uv[a], d0.g(rows[a], j));
            for (Eigen::Index e = 0; e < d0.a_eq.rows(); ++e) t.emplace_back(lv[static_cast<std::size_t>(e)], d0.a_eq(e, j));
            const double c0 = f0.c(j);
            if (nonneg_coord(d0, j)) {
                m.add_row(nm("stat", k, static_cast<std::size_t>(j)), t, RowSense::ge, -c0);
                Terms rc = t;
                rc.emplace_back(t1[static_cast<std::size_t>(j)], ms.rc);
                m.add_row(nm("bm_rc", k, static_cast<std::size_t>(j)), rc, RowSense::le, ms.rc - c0);
                m.add_row(nm("bm_x", k, static_cast<std::size_t>(j)),
                          {{xv[static_cast<std::size_t>(j)], 1.0}, {t1[static_cast<std::size_t>(j)], -ms.x}}, RowSense::le, 0.0);
            } else {
                m.add_row(nm("stat", k, static_cast<std::size_t>(j)), t, RowSense::eq, -c0);
            }
        }
    }

    // assignment, linearized products and residuals
    std::vector<Eigen::Index> oc;
    if (inst.observed.empty())
        for (Eigen::Index j = 0; j < n; ++j) oc.push_back(j);
    else
        for (int j : inst.observed) oc.push_back(j);
    const double big = ms.assign;
    for (std::size_t i = 0; i < nc; ++i) {
        std::vector<int> allowed;
        if (i < obs.side_info.size()) allowed = obs.side_info[i];
        else
            for (std::size_t k = 0; k < kc; ++k) allowed.push_back(static_cast<int>(k));
        std::sort(allowed.begin(), allowed.end());
        Terms assign;
        std::vector<int> zv;
        for (int k : allowed) {
            require(k >= 0 && static_cast<std::size_t>(k) < kc, "single-level model: side-information index out of range");
            zv.push_back(m.add_var(nm("z", i, static_cast<std::size_t>(k)), VarKind::binary, 0, 1));
            assign.emplace_back(zv.back(), 1.0);
        }
        m.add_row(nm("assign", i), assign, RowSense::eq, 1.0);
        for (std::size_t o = 0; o < oc.size(); ++o) {
            const auto j = static_cast<std::size_t>(oc[o]);
            const bool nn = nonneg_coord(d0, oc[o]);
            Terms fit;
            int rv = m.add_var(nm("res", i, j), VarKind::continuous, -kInf, kInf);
            fit.emplace_back(rv, 1.0);
            for (std::size_t a = 0; a < allowed.size(); ++a) {
                const auto k = static_cast<std::size_t>(allowed[a]);
                int ev = m.add_var(nm("eta", i, k, j), VarKind::continuous, nn ? 0.0 : -kInf, kInf);
                int xv = m.var(nm("x", k, j));
                fit.emplace_back(ev, 1.0);
                m.add_row(nm("bm_ezu", i, k, j), {{ev, 1.0}, {zv[a], -big}}, RowSense::le, 0.0);
                if (!nn) m.add_row(nm("bm_ezl", i, k, j), {{ev, 1.0}, {zv[a], big}}, RowSense::ge, 0.0);
                if (nn) m.add_row(nm("exu", i, k, j), {{ev, 1.0}, {xv, -1.0}}, RowSense::le, 0.0);
                else m.add_row(nm("bm_exu", i, k, j), {{ev, 1.0}, {xv, -1.0}, {zv[a], big}}, RowSense::le, big);
                m.add_row(nm("bm_exl", i, k, j), {{ev, 1.0}, {xv, -1.0}, {zv[a], -big}}, RowSense::ge, -big);
            }
            m.add_row(nm("fit", i, j), fit, RowSense::eq, obs.y[i](static_cast<Eigen::Index>(o)));
            m.obj_quad.emplace_back(rv, 1.0 / static_cast<double>(nc));
        }
    }
    m.validate();
    return m;
}

}  // namespace detail

/// Single-level model for linear objectives with free cost entries (and optionally free right-hand sides).
inline MipModel build_single_level_mlp(const DmpInstance& inst, const ObservationSet& obs, const std::vector<Vec>& weights,
                                       const BigMConfig& cfg = {}) {
    require(inst.family() == Family::linear, "linear single-level model needs linear objectives");
    bool has_cost = false;
    for (const auto& s : inst.slots) has_cost = has_cost || s.kind == SlotKind::linear_coef;
    require(!has_cost || inst.space.norm_rows.rows() > 0,
            "linear single-level model needs normalization rows on the cost vectors (zero costs fit every point)");
    return detail::build_single_level(inst, obs, weights, cfg, inst.name + "-single-level");
}

/// Single-level model for quadratic objectives with a free right-hand side.
inline MipModel build_single_level_mqp_rhs(const DmpInstance& inst, const ObservationSet& obs,
                                           const std::vector<Vec>& weights, const BigMConfig& cfg = {}) {
    require(inst.family() == Family::quadratic, "right-hand-side model needs quadratic objectives");
    for (const auto& s : inst.slots)
        require(s.kind == SlotKind::ineq_rhs || s.kind == SlotKind::eq_rhs,
                "right-hand-side model: slot " + s.label() + " is not a right-hand side");
    return detail::build_single_level(inst, obs, weights, cfg, inst.name + "-single-level");
}

/// Values of every variable of a single-level model at the weighted-sum
/// solutions of θ with their multipliers and the nearest-point assignment.
inline PointMap plugin_single_level(const DmpInstance& inst, const Vec& theta, const ObservationSet& obs,
                                    const std::vector<Vec>& weights) {
    using detail::nm;
    const ConcreteDmp d = apply_params(inst, theta);
    const Eigen::Index n = d.n();
    const auto rows = detail::multiplier_rows(d);
    PointMap pt;
    for (Eigen::Index q = 0; q < theta.size(); ++q) pt[nm("theta", static_cast<std::size_t>(q))] = theta(q);
    std::vector<Vec> xs;
    for (std::size_t k = 0; k < weights.size(); ++k) {
        ForwardSolution s = solve_wp(d, weights[k]);
        if (s.status != SolveStatus::optimal) throw NumericalError("plug-in: weighted-sum solve failed");
        xs.push_back(s.x);
        Vec gx = d.g * s.x - d.h;
        for (Eigen::Index j = 0; j < n; ++j) {
            pt[nm("x", k, static_cast<std::size_t>(j))] = s.x(j);
            if (detail::nonneg_coord(d, j)) {
                double rc = s.u(detail::lower_bound_row(d, j));
                pt[nm("t1", k, static_cast<std::size_t>(j))] = s.x(j) >= rc ? 1.0 : 0.0;
            }
        }
        for (Eigen::Index r : rows) {
            pt[nm("u", k, static_cast<std::size_t>(r))] = s.u(r);
            pt[nm("t2", k, static_cast<std::size_t>(r))] = s.u(r) >= -gx(r) ? 1.0 : 0.0;
        }
        for (Eigen::Index e = 0; e < d.a_eq.rows(); ++e) pt[nm("lam", k, static_cast<std::size_t>(e))] = s.lambda(e);
    }
    std::vector<Vec> front;
    for (const auto& x : xs) front.push_back(inst.observe(x));
    std::vector<Eigen::Index> oc;
    if (inst.observed.empty())
        for (Eigen::Index j = 0; j < n; ++j) oc.push_back(j);
    else
        for (int j : inst.observed) oc.push_back(j);
    Assignment a = assign(obs, front);
    for (std::size_t i = 0; i < obs.y.size(); ++i) {
        std::vector<int> allowed;
        if (i < obs.side_info.size()) allowed = obs.side_info[i];
        else
            for (std::size_t k = 0; k < weights.size(); ++k) allowed.push_back(static_cast<int>(k));
        for (int k : allowed) {
            const double z = k == a.index[i] ? 1.0 : 0.0;
            pt[nm("z", i, static_cast<std::size_t>(k))] = z;
            for (Eigen::Index j : oc)
                pt[nm("eta", i, static_cast<std::size_t>(k), static_cast<std::size_t>(j))] = z * xs[static_cast<std::size_t>(k)](j);
        }
        for (std::size_t o = 0; o < oc.size(); ++o)
            pt[nm("res", i, static_cast<std::size_t>(oc[o]))] =
                obs.y[i](static_cast<Eigen::Index>(o)) - xs[static_cast<std::size_t>(a.index[i])](oc[o]);
    }
    return pt;
}

/// Big-M model of the non-identifiability test: maximize ‖θ − θ̂‖₁ while each point
/// satisfies the KKT conditions of one of the given weights. The stationarity norm
/// is bounded coordinate-wise, which is the same requirement at z = 1.
inline MipModel build_test_problem(const DmpInstance& inst, const Vec& theta_hat, const std::vector<Vec>& points,
                                   const std::vector<Vec>& weights, const BigMConfig& cfg = {}) {
    using detail::nm;
    using detail::Terms;
    require(!points.empty() && !weights.empty(), "test problem: need points and weights");
    inst.space.validate(theta_hat, 1e-7);
    for (const auto& w : weights) check_weight(w, inst.p());
    for (const auto& x : points) require(x.size() == inst.n(), "test problem: points must be full decisions");
    const ConcreteDmp d0 = detail::zero_slots(inst);
    const Eigen::Index n = d0.n(), ms_rows = d0.m_stacked(), me = d0.a_eq.rows();
    const ParamSpace& sp = inst.space;

    MipModel m;
    m.name = inst.name + "-test-problem";
    m.sense = ObjSense::maximize;
    detail::add_theta_block(m, inst);

    // big-M constants
    double m_u = 0.0, m_lam = 0.0, m_slack = 0.0, m_stat = 0.0;
    Vec width = sp.width();
    if (cfg.uniform) {
        m_u = m_lam = m_slack = m_stat = *cfg.uniform;
    } else {
        for (const auto& th : detail::sample_thetas(sp, std::min(cfg.samples, 4), cfg.seed, &theta_hat)) {
            ConcreteDmp d = apply_params(inst, th);
            for (const auto& x : points) {
                double best = kInf;
                Vec bu, bl;
                for (const auto& w : weights) {
                    Vec u, lam;
                    double v = detail::kkt_pick(d, w, x, u, lam);
                    if (v < best) {
                        best = v;
                        bu = u;
                        bl = lam;
                    }
                }
                if (bu.size()) m_u = std::max(m_u, bu.maxCoeff());
                if (bl.size()) m_lam = std::max(m_lam, bl.cwiseAbs().maxCoeff());
            }
        }
        m_u = std::max(1.0, cfg.factor * m_u);
        m_lam = std::max(1.0, cfg.factor * m_lam);
        for (const auto& x : points)
            for (Eigen::Index r = 0; r < ms_rows; ++r) m_slack = std::max(m_slack, detail::slack_bound(inst, d0, r, &x));
        m_slack = std::max(1.0, cfg.factor * m_slack);
        // |∇(wᵀf)(x) + Gᵀu + Eᵀλ| over the parameter box and the multiplier bounds
        for (const auto& x : points)
            for (const auto& w : weights) {
                Vec g0 = d0.combine(w).gradient(x);
                for (Eigen::Index j = 0; j < n; ++j) {
                    double b = std::abs(g0(j));
                    for (std::size_t q = 0; q < inst.slots.size(); ++q)
                        b += std::abs(detail::grad_coef(inst.slots[q], w, j, x)) *
                             detail::max_abs_over_box(sp.lower(static_cast<Eigen::Index>(q)), sp.upper(static_cast<Eigen::Index>(q)));
                    if (ms_rows) b += d0.g.col(j).cwiseAbs().sum() * m_u;
                    if (me) b += d0.a_eq.col(j).cwiseAbs().sum() * m_lam;
                    m_stat = std::max(m_stat, b);
                }
            }
        m_stat = std::max(1.0, cfg.factor * m_stat);
    }
    m.big_m.push_back({"M_u", m_u, cfg.uniform ? "configured" : "largest sampled multiplier, x2"});
    m.big_m.push_back({"M_lam", m_lam, cfg.uniform ? "configured" : "largest sampled equality multiplier, x2"});
    m.big_m.push_back({"M_slack", m_slack, cfg.uniform ? "configured" : "certified row slack over the parameter box, x2"});
    m.big_m.push_back({"M_stat", m_stat, cfg.uniform ? "configured" : "stationarity magnitude over the boxes, x2"});

    // |θ − θ̂| split with a sign binary
    for (Eigen::Index q = 0; q < sp.dim(); ++q) {
        auto qq = static_cast<std::size_t>(q);
        double w = std::max(width(q), 0.0);
        int dp = m.add_var(nm("dp", qq), VarKind::continuous, 0.0, w);
        int dn = m.add_var(nm("dn", qq), VarKind::continuous, 0.0, w);
        int sg = m.add_var(nm("sgn", qq), VarKind::binary, 0, 1);
        m.add_row(nm("split", qq), {{static_cast<int>(q), 1.0}, {dp, -1.0}, {dn, 1.0}}, RowSense::eq, theta_hat(q));
        double big = cfg.uniform ? *cfg.uniform : std::max(1.0, w);
        m.add_row(nm("bm_dp", qq), {{dp, 1.0}, {sg, -big}}, RowSense::le, 0.0);
        m.add_row(nm("bm_dn", qq), {{dn, 1.0}, {sg, big}}, RowSense::le, big);
        m.obj_linear.emplace_back(dp, 1.0);
        m.obj_linear.emplace_back(dn, 1.0);
    }

    for (std::size_t i = 0; i < points.size(); ++i) {
        const Vec& x = points[i];
        std::vector<int> uv, tv, lv, zv;
        for (Eigen::Index r = 0; r < ms_rows; ++r) {
            uv.push_back(m.add_var(nm("u", i, static_cast<std::size_t>(r)), VarKind::continuous, 0.0, kInf));
            tv.push_back(m.add_var(nm("t", i, static_cast<std::size_t>(r)), VarKind::binary, 0, 1));
        }
        for (Eigen::Index e = 0; e < me; ++e)
            lv.push_back(m.add_var(nm("lam", i, static_cast<std::size_t>(e)), VarKind::continuous, -m_lam, m_lam));
        Terms assign;
        for (std::size_t k = 0; k < weights.size(); ++k) {
            zv.push_back(m.add_var(nm("z", i, k), VarKind::binary, 0, 1));
            assign.emplace_back(zv.back(), 1.0);
        }
        m.add_row(nm("assign", i), assign, RowSense::eq, 1.0);
        for (Eigen::Index r = 0; r < ms_rows; ++r) {
            auto rr = static_cast<std::size_t>(r);
            double gx = d0.g.row(r).dot(x);
            auto hp = detail::rhs_params(inst, r);
            if (!hp.empty()) {
                Terms t;
                for (const auto& [q, c] : hp) t.emplace_back(q, c);
                m.add_row(nm("prim", i, rr), t, RowSense::ge, gx - d0.h(r));
            }
            m.add_row(nm("bm_u", i, rr), {{uv[rr], 1.0}, {tv[rr], -m_u}}, RowSense::le, 0.0);
            Terms s;
            for (const auto& [q, c] : hp) s.emplace_back(q, c);
            s.emplace_back(tv[rr], m_slack);
            m.add_row(nm("bm_s", i, rr), s, RowSense::le, m_slack - d0.h(r) + gx);
        }
        for (Eigen::Index e = 0; e < me; ++e) {
            auto hp = detail::eq_params(inst, e);
            if (hp.empty()) continue;
            Terms t;
            for (const auto& [q, c] : hp) t.emplace_back(q, c);
            m.add_row(nm("peq", i, static_cast<std::size_t>(e)), t, RowSense::eq, d0.a_eq.row(e).dot(x) - d0.b_eq(e));
        }
        for (std::size_t k = 0; k < weights.size(); ++k) {
            const Vec& w = weights[k];
            Vec g0 = d0.combine(w).gradient(x);
            for (Eigen::Index j = 0; j < n; ++j) {
                auto jj = static_cast<std::size_t>(j);
                Terms t;
                for (std::size_t q = 0; q < inst.slots.size(); ++q)
                    t.emplace_back(static_cast<int>(q), detail::grad_coef(inst.slots[q], w, j, x));
                for (Eigen::Index r = 0; r < ms_rows; ++r) t.emplace_back(uv[static_cast<std::size_t>(r)], d0.g(r, j));
                for (Eigen::Index e = 0; e < me; ++e) t.emplace_back(lv[static_cast<std::size_t>(e)], d0.a_eq(e, j));
                Terms up = t, lo = t;
                up.emplace_back(zv[k], m_stat);
                lo.emplace_back(zv[k], -m_stat);
                m.add_row(nm("bm_stu", i, k, jj), up, RowSense::le, m_stat - g0(j));
                m.add_row(nm("bm_stl", i, k, jj), lo, RowSense::ge, -m_stat - g0(j));
            }
        }
    }
    m.validate();
    return m;
}

/// Values of the test-problem variables at θ with the best weight and multipliers per point.
inline PointMap plugin_test_problem(const DmpInstance& inst, const Vec& theta_hat, const Vec& theta,
                                    const std::vector<Vec>& points, const std::vector<Vec>& weights) {
    using detail::nm;
    const ConcreteDmp d = apply_params(inst, theta);
    PointMap pt;
    for (Eigen::Index q = 0; q < theta.size(); ++q) {
        auto qq = static_cast<std::size_t>(q);
        double diff = theta(q) - theta_hat(q);
        pt[nm("theta", qq)] = theta(q);
        pt[nm("dp", qq)] = std::max(diff, 0.0);
        pt[nm("dn", qq)] = std::max(-diff, 0.0);
        pt[nm("sgn", qq)] = diff > 0.0 ? 1.0 : 0.0;
    }
    for (std::size_t i = 0; i < points.size(); ++i) {
        const Vec& x = points[i];
        double best = kInf;
        std::size_t bk = 0;
        Vec bu, bl;
        for (std::size_t k = 0; k < weights.size(); ++k) {
            Vec u, lam;
            double v = detail::kkt_pick(d, weights[k], x, u, lam);
            if (v < best) {
                best = v;
                bk = k;
                bu = u;
                bl = lam;
            }
        }
        Vec gx = d.m_stacked() ? Vec(d.g * x - d.h) : Vec(0);
        for (Eigen::Index r = 0; r < d.m_stacked(); ++r) {
            pt[nm("u", i, static_cast<std::size_t>(r))] = bu(r);
            pt[nm("t", i, static_cast<std::size_t>(r))] = bu(r) >= -gx(r) ? 1.0 : 0.0;
        }
        for (Eigen::Index e = 0; e < d.a_eq.rows(); ++e) pt[nm("lam", i, static_cast<std::size_t>(e))] = bl(e);
        for (std::size_t k = 0; k < weights.size(); ++k) pt[nm("z", i, k)] = k == bk ? 1.0 : 0.0;
    }
    return pt;
}

// ---------------------------------------------------------------- LP-format text

namespace detail {

inline std::string fmt_num(double v) {
    if (v == 0.0) v = 0.0;  // drop the sign of −0
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void write_terms(std::ostringstream& os, const std::vector<std::pair<int, double>>& terms, const MipModel& m) {
    int on_line = 0;
    for (const auto& [j, c] : terms) {
        if (on_line == 6) {
            os << "\n  ";
            on_line = 0;
        }
        os << (c < 0.0 ? " - " : " + ") << fmt_num(std::abs(c)) << ' ' << m.vars[static_cast<std::size_t>(j)].name;
        ++on_line;
    }
}

}  // namespace detail

/// LP-format text: objective, constraints, bounds for every variable in index order, binaries.
inline std::string write_lp(const MipModel& m) {
    std::ostringstream os;
    os << "\\ " << m.name << "\n";
    for (const auto& b : m.big_m) os << "\\ big-M " << b.name << " = " << detail::fmt_num(b.value) << " (" << b.provenance << ")\n";
    os << (m.sense == ObjSense::minimize ? "Minimize\n" : "Maximize\n");
    os << " obj:";
    detail::write_terms(os, m.obj_linear, m);
    if (!m.obj_quad.empty()) {
        os << " + [";
        int on_line = 0;
        for (const auto& [j, c] : m.obj_quad) {
            if (on_line == 6) {
                os << "\n  ";
                on_line = 0;
            }
            double c2 = 2.0 * c;
            os << (c2 < 0.0 ? " - " : " + ") << detail::fmt_num(std::abs(c2)) << ' ' << m.vars[static_cast<std::size_t>(j)].name << " ^2";
            ++on_line;
        }
        os << " ] / 2";
    }
    os << "\nSubject To\n";
    for (const auto& r : m.rows) {
        os << ' ' << r.name << ':';
        detail::write_terms(os, r.terms, m);
        if (r.terms.empty()) os << " 0 " << m.vars.front().name;
        os << (r.sense == RowSense::le ? " <= " : (r.sense == RowSense::ge ? " >= " : " = ")) << detail::fmt_num(r.rhs) << "\n";
    }
    os << "Bounds\n";
    for (const auto& v : m.vars) {
        os << ' ';
        bool lo_inf = std::isinf(v.lo), hi_inf = std::isinf(v.hi);
        if (lo_inf && hi_inf) os << v.name << " free";
        else if (hi_inf) os << v.name << " >= " << detail::fmt_num(v.lo);
        else if (lo_inf) os << "-inf <= " << v.name << " <= " << detail::fmt_num(v.hi);
        else os << detail::fmt_num(v.lo) << " <= " << v.name << " <= " << detail::fmt_num(v.hi);
        os << "\n";
    }
    bool any_bin = false;
    for (const auto& v : m.vars)
        if (v.kind == VarKind::binary) {
            if (!any_bin) os << "Binaries\n";
            any_bin = true;
            os << ' ' << v.name << "\n";
        }
    os << "End\n";
    return os.str();
}

inline void export_model(const MipModel& m, const std::string& path) {
    m.validate();
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
    f << write_lp(m);
    if (!f) throw std::runtime_error("write to '" + path + "' failed");
}

/// `<experiment>_<N>_<K>.lp`
inline std::string model_file_name(const std::string& experiment, int n, int k) {
    return experiment + "_" + std::to_string(n) + "_" + std::to_string(k) + ".lp";
}

/// Reader for the text produced by write_lp.
inline MipModel parse_lp(const std::string& text) {
    enum class Sec { none, obj, rows, bounds, bins };
    MipModel m;
    std::vector<std::string> obj_tokens, bound_lines, bin_names;
    std::vector<std::pair<std::string, std::vector<std::string>>> row_stmts;
    Sec sec = Sec::none;
    std::istringstream in(text);
    std::string line;
    auto tokens_of = [](const std::string& s) {
        std::vector<std::string> t;
        std::istringstream ss(s);
        std::string w;
        while (ss >> w) t.push_back(w);
        return t;
    };
    bool first_comment = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line[0] == '\\') {
            if (first_comment) m.name = line.size() > 2 ? line.substr(2) : "";
            else if (line.rfind("\\ big-M ", 0) == 0) {
                auto t = tokens_of(line.substr(8));
                require(t.size() >= 3 && t[1] == "=", "lp: malformed big-M comment");
                auto open = line.find('('), close = line.rfind(')');
                m.big_m.push_back({t[0], std::stod(t[2]),
                                   open != std::string::npos && close > open ? line.substr(open + 1, close - open - 1) : ""});
            }
            first_comment = false;
            continue;
        }
        first_comment = false;
        auto t = tokens_of(line);
        if (t.empty()) continue;
        if (t.size() == 1 && (t[0] == "Minimize" || t[0] == "Maximize")) {
            m.sense = t[0] == "Minimize" ? ObjSense::minimize : ObjSense::maximize;
            sec = Sec::obj;
            continue;
        }
        if (t.size() == 2 && t[0] == "Subject" && t[1] == "To") {
            sec = Sec::rows;
            continue;
        }
        if (t.size() == 1 && t[0] == "Bounds") {
            sec = Sec::bounds;
            continue;
        }
        if (t.size() == 1 && t[0] == "Binaries") {
            sec = Sec::bins;
            continue;
        }
        if (t.size() == 1 && t[0] == "End") break;
        switch (sec) {
            case Sec::obj: obj_tokens.insert(obj_tokens.end(), t.begin(), t.end()); break;
            case Sec::rows:
                if (t[0].back() == ':' && line.size() > 1 && line[0] == ' ' && line[1] != ' ') {
                    row_stmts.push_back({t[0].substr(0, t[0].size() - 1), {t.begin() + 1, t.end()}});
                } else {
                    require(!row_stmts.empty(), "lp: continuation line without a row");
                    row_stmts.back().second.insert(row_stmts.back().second.end(), t.begin(), t.end());
                }
                break;
            case Sec::bounds: bound_lines.push_back(line); break;
            case Sec::bins: bin_names.push_back(t[0]); break;
            default: throw ValidationError("lp: content outside a section");
        }
    }
    auto parse_bound = [](const std::string& s) {
        if (s == "-inf") return -kInf;
        if (s == "inf" || s == "+inf") return kInf;
        return std::stod(s);
    };
    for (const auto& bl : bound_lines) {
        auto t = tokens_of(bl);
        if (t.size() == 2 && t[1] == "free") m.add_var(t[0], VarKind::continuous, -kInf, kInf);
        else if (t.size() == 3 && t[1] == ">=") m.add_var(t[0], VarKind::continuous, parse_bound(t[2]), kInf);
        else if (t.size() == 5 && t[1] == "<=" && t[3] == "<=") m.add_var(t[2], VarKind::continuous, parse_bound(t[0]), parse_bound(t[4]));
        else throw ValidationError("lp: malformed bound '" + bl + "'");
    }
    for (const auto& b : bin_names) {
        auto& v = m.vars[static_cast<std::size_t>(m.var(b))];
        v.kind = VarKind::binary;
        v.lo = 0.0;
        v.hi = 1.0;
    }
    auto read_terms = [&](const std::vector<std::string>& t, std::size_t& p, std::vector<std::pair<int, double>>& out,
                          bool quad) {
        while (p < t.size()) {
            const std::string& s = t[p];
            if (s == "<=" || s == ">=" || s == "=" || s == "[" || s == "]") return;
            double sign = 1.0;
            if (s == "+" || s == "-") {
                if (s == "-") sign = -1.0;
                ++p;
                require(p < t.size(), "lp: dangling sign");
                if (t[p] == "[") return;
            }
            double c = std::stod(t[p++]);
            require(p < t.size(), "lp: coefficient without a variable");
            int j = m.var(t[p++]);
            if (quad) {
                require(p < t.size() && t[p] == "^2", "lp: only squared terms are supported in the objective");
                ++p;
                c *= 0.5;
            }
            out.emplace_back(j, sign * c);
        }
    };
    require(!obj_tokens.empty() && obj_tokens[0] == "obj:", "lp: objective must be named obj");
    std::size_t p = 1;
    read_terms(obj_tokens, p, m.obj_linear, false);
    if (p < obj_tokens.size() && obj_tokens[p] == "[") {
        ++p;
        read_terms(obj_tokens, p, m.obj_quad, true);
        require(p + 3 == obj_tokens.size() && obj_tokens[p] == "]" && obj_tokens[p + 1] == "/" && obj_tokens[p + 2] == "2",
                "lp: quadratic objective must end with ] / 2");
    }
    for (const auto& [name, t] : row_stmts) {
        std::vector<std::pair<int, double>> terms;
        std::size_t q = 0;
        read_terms(t, q, terms, false);
        require(q + 2 == t.size(), "lp: row '" + name + "' must end with a sense and a number");
        const std::string& s = t[q];
        RowSense sense = s == "<=" ? RowSense::le : (s == ">=" ? RowSense::ge : RowSense::eq);
        require(s == "<=" || s == ">=" || s == "=", "lp: row '" + name + "' has an unknown sense");
        m.add_row(name, terms, sense, std::stod(t[q + 1]));
    }
    return m;
}

inline MipModel read_lp_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_lp(ss.str());
}

/// Same variables, rows and objective (names, kinds, bounds, coefficients, order).
inline bool structurally_equal(const MipModel& a, const MipModel& b) {
    if (a.sense != b.sense || a.vars.size() != b.vars.size() || a.rows.size() != b.rows.size()) return false;
    for (std::size_t j = 0; j < a.vars.size(); ++j) {
        const auto &x = a.vars[j], &y = b.vars[j];
        if (x.name != y.name || x.kind != y.kind || x.lo != y.lo || x.hi != y.hi) return false;
    }
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        const auto &x = a.rows[i], &y = b.rows[i];
        if (x.name != y.name || x.sense != y.sense || x.rhs != y.rhs || x.terms != y.terms || x.big_m != y.big_m) return false;
    }
    return a.obj_linear == b.obj_linear && a.obj_quad == b.obj_quad;
}

}  // namespace imop

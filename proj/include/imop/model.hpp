#pragma once

// Parameterized convex multiobjective programs: objectives, constraints,
// free parameter slots and the parameter box.

#include "linalg.hpp"
#include "lp.hpp"

#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace imop {

enum class Family { linear, quadratic, smooth };

inline const char* to_string(Family f) {
    switch (f) {
        case Family::linear: return "linear";
        case Family::quadratic: return "quadratic";
        case Family::smooth: return "smooth";
    }
    return "?";
}

/// coef · x[index]^power, meant for x[index] ≥ 0.
struct PowerTerm {
    int index = 0;
    double coef = 0.0;
    int power = 1;
};

/// f(x) = ½xᵀQx + cᵀx + Σ power terms. Q is 0×0 when absent.
struct Objective {
    Vec c;
    Mat q;
    std::vector<PowerTerm> powers;

    bool has_quadratic() const { return q.size() > 0; }

    double value(const Vec& x) const {
        double v = c.dot(x);
        if (has_quadratic()) v += 0.5 * x.dot(q * x);
        for (const auto& t : powers) v += t.coef * std::pow(x(t.index), t.power);
        return v;
    }

    Vec gradient(const Vec& x) const {
        Vec g = c;
        if (has_quadratic()) g += q * x;
        for (const auto& t : powers) g(t.index) += t.coef * t.power * std::pow(x(t.index), t.power - 1);
        return g;
    }

    Mat hessian(const Vec& x) const {
        Mat h = has_quadratic() ? q : Mat::Zero(x.size(), x.size());
        for (const auto& t : powers)
            if (t.power >= 2) h(t.index, t.index) += t.coef * t.power * (t.power - 1) * std::pow(x(t.index), t.power - 2);
        return h;
    }
};

/// A fully numeric program. Bounds live in lower/upper (±inf allowed); the
/// stacked form g(x) = Gx − h ≤ 0 lists structural rows, then finite lower
/// bounds, then finite upper bounds.
struct ConcreteDmp {
    Family family = Family::linear;
    std::vector<Objective> objectives;
    Mat a_ub;
    Vec b_ub;
    Mat a_eq;
    Vec b_eq;
    Vec lower;
    Vec upper;

    Mat g;
    Vec h;
    std::vector<int> bound_var;  // variable of each bound row in the stacked form, -1 for structural

    Eigen::Index n() const { return lower.size(); }
    int p() const { return static_cast<int>(objectives.size()); }
    Eigen::Index m_struct() const { return a_ub.rows(); }
    Eigen::Index m_stacked() const { return g.rows(); }

    void finalize() {
        const Eigen::Index nv = n();
        if (a_ub.rows() == 0) a_ub.resize(0, nv);
        if (a_eq.rows() == 0) a_eq.resize(0, nv);
        std::vector<std::pair<int, double>> rows;  // (signed var+1, rhs)
        for (Eigen::Index j = 0; j < nv; ++j)
            if (std::isfinite(lower(j))) rows.emplace_back(-static_cast<int>(j) - 1, -lower(j));
        for (Eigen::Index j = 0; j < nv; ++j)
            if (std::isfinite(upper(j))) rows.emplace_back(static_cast<int>(j) + 1, upper(j));
        const Eigen::Index m = a_ub.rows() + static_cast<Eigen::Index>(rows.size());
        g = Mat::Zero(m, nv);
        h = Vec::Zero(m);
        bound_var.assign(static_cast<std::size_t>(m), -1);
        g.topRows(a_ub.rows()) = a_ub;
        h.head(a_ub.rows()) = b_ub;
        for (std::size_t k = 0; k < rows.size(); ++k) {
            auto r = a_ub.rows() + static_cast<Eigen::Index>(k);
            int s = rows[k].first;
            int j = std::abs(s) - 1;
            g(r, j) = s > 0 ? 1.0 : -1.0;
            h(r) = rows[k].second;
            bound_var[static_cast<std::size_t>(r)] = j;
        }
    }

    /// Σ w_l f_l as a single objective.
    Objective combine(const Vec& w) const {
        Objective out;
        out.c = Vec::Zero(n());
        bool any_q = false;
        for (const auto& f : objectives) any_q = any_q || f.has_quadratic();
        if (any_q) out.q = Mat::Zero(n(), n());
        for (int l = 0; l < p(); ++l) {
            const auto& f = objectives[static_cast<std::size_t>(l)];
            out.c += w(l) * f.c;
            if (f.has_quadratic()) out.q += w(l) * f.q;
            for (auto t : f.powers) {
                t.coef *= w(l);
                if (t.coef != 0.0) out.powers.push_back(t);
            }
        }
        return out;
    }

    Vec values(const Vec& x) const {
        Vec f(p());
        for (int l = 0; l < p(); ++l) f(l) = objectives[static_cast<std::size_t>(l)].value(x);
        return f;
    }

    /// Largest constraint violation (inequalities, equalities, bounds).
    double infeasibility(const Vec& x) const {
        double v = 0.0;
        if (g.rows()) v = std::max(v, (g * x - h).maxCoeff());
        if (a_eq.rows()) v = std::max(v, (a_eq * x - b_eq).cwiseAbs().maxCoeff());
        return std::max(v, 0.0);
    }
};

enum class SlotKind { linear_coef, quad_diag, ineq_rhs, eq_rhs };

inline const char* to_string(SlotKind k) {
    switch (k) {
        case SlotKind::linear_coef: return "c";
        case SlotKind::quad_diag: return "q";
        case SlotKind::ineq_rhs: return "b";
        case SlotKind::eq_rhs: return "d";
    }
    return "?";
}

/// Binds one parameter coordinate to one numeric entry of the program.
/// Stored entry = scale · θ (quadratic diagonal: Q(j,j) = 2 · scale · θ, so θ is the x_j² coefficient).
struct ParamSlot {
    SlotKind kind = SlotKind::linear_coef;
    int objective = 0;
    int index = 0;
    double scale = 1.0;

    std::string label() const {
        std::string s = to_string(kind);
        if (kind == SlotKind::linear_coef || kind == SlotKind::quad_diag) s += std::to_string(objective + 1) + "_";
        return s + std::to_string(index + 1);
    }
};

/// Box plus linear equality normalizations. A coordinate with lower == upper is fixed.
struct ParamSpace {
    Vec lower;
    Vec upper;
    Mat norm_rows;
    Vec norm_rhs;

    Eigen::Index dim() const { return lower.size(); }

    std::vector<bool> fixed_mask() const {
        std::vector<bool> m(static_cast<std::size_t>(dim()));
        for (Eigen::Index i = 0; i < dim(); ++i) m[static_cast<std::size_t>(i)] = lower(i) == upper(i);
        return m;
    }

    void check() const {
        require(upper.size() == lower.size(), "param space: bound size mismatch");
        for (Eigen::Index i = 0; i < dim(); ++i) {
            require(std::isfinite(lower(i)) && std::isfinite(upper(i)), "param space: box must be bounded");
            require(lower(i) <= upper(i), "param space: lower > upper");
        }
        require(norm_rows.rows() == norm_rhs.size(), "param space: normalization size mismatch");
        if (norm_rows.rows()) require(norm_rows.cols() == dim(), "param space: normalization width mismatch");
        auto fixed = fixed_mask();
        for (Eigen::Index r = 0; r < norm_rows.rows(); ++r)
            for (Eigen::Index i = 0; i < dim(); ++i)
                require(!(fixed[static_cast<std::size_t>(i)] && norm_rows(r, i) != 0.0),
                        "param space: normalization touches a fixed coordinate");
    }

    double violation(const Vec& theta) const {
        if (theta.size() != dim()) return kInf;
        double v = 0.0;
        for (Eigen::Index i = 0; i < dim(); ++i)
            v = std::max({v, lower(i) - theta(i), theta(i) - upper(i)});
        if (norm_rows.rows()) v = std::max(v, (norm_rows * theta - norm_rhs).cwiseAbs().maxCoeff());
        return v;
    }

    bool contains(const Vec& theta, double tol = 1e-9) const { return violation(theta) <= tol; }

    void validate(const Vec& theta, double tol = 1e-9) const {
        require(theta.size() == dim(), "theta has " + std::to_string(theta.size()) + " entries, expected " +
                                           std::to_string(dim()));
        require(contains(theta, tol), "theta violates the parameter box or normalizations");
    }

    Vec width() const { return upper - lower; }
};

/// Six-node style road network description.
struct Link {
    int from = 0;
    int to = 0;
    double t0 = 0.0;
    double capacity = 1.0;
    double emission = 0.0;
};

struct OdPair {
    int origin = 0;
    int dest = 0;
    double demand = 0.0;
};

struct TrafficNetwork {
    std::vector<Link> links;
    std::vector<OdPair> ods;
    std::vector<std::vector<std::vector<int>>> routes;  // per OD: routes as link-index sequences

    /// All simple directed paths per OD pair, in depth-first order by link index.
    void enumerate_routes() {
        routes.assign(ods.size(), {});
        for (std::size_t w = 0; w < ods.size(); ++w) {
            std::vector<int> path;
            std::set<int> seen{ods[w].origin};
            dfs(ods[w].origin, ods[w].dest, path, seen, routes[w]);
            require(!routes[w].empty(), "traffic: O-D pair (" + std::to_string(ods[w].origin) + "," +
                                            std::to_string(ods[w].dest) + ") has no route");
        }
    }

    int route_count() const {
        int r = 0;
        for (const auto& rw : routes) r += static_cast<int>(rw.size());
        return r;
    }

    /// Link-route incidence δ (links × routes, routes concatenated over OD pairs).
    Mat incidence() const {
        Mat d = Mat::Zero(static_cast<Eigen::Index>(links.size()), route_count());
        int col = 0;
        for (const auto& rw : routes)
            for (const auto& r : rw) {
                for (int a : r) d(a, col) = 1.0;
                ++col;
            }
        return d;
    }

private:
    void dfs(int node, int dest, std::vector<int>& path, std::set<int>& seen,
             std::vector<std::vector<int>>& out) const {
        if (node == dest) {
            out.push_back(path);
            return;
        }
        for (std::size_t a = 0; a < links.size(); ++a) {
            if (links[a].from != node || seen.count(links[a].to)) continue;
            seen.insert(links[a].to);
            path.push_back(static_cast<int>(a));
            dfs(links[a].to, dest, path, seen, out);
            path.pop_back();
            seen.erase(links[a].to);
        }
    }
};

/// A parameterized program together with its parameter box.
struct DmpInstance {
    std::string name;
    ConcreteDmp base;
    std::vector<ParamSlot> slots;
    ParamSpace space;
    bool strongly_convex = false;
    Vec x_lower;  // certified coordinate bounds over every θ in the box
    Vec x_upper;
    double radius = 0.0;  // B: every feasible x has ‖x‖ ≤ B
    std::vector<int> observed;  // coordinates seen in observations; empty = all
    std::optional<TrafficNetwork> network;

    Eigen::Index n() const { return base.n(); }
    int p() const { return base.p(); }
    Eigen::Index n_free() const { return static_cast<Eigen::Index>(slots.size()); }
    Family family() const { return base.family; }

    Eigen::Index obs_dim() const { return observed.empty() ? n() : static_cast<Eigen::Index>(observed.size()); }

    /// Projection of a decision onto the observed coordinates.
    Vec observe(const Vec& x) const {
        if (observed.empty()) return x;
        Vec y(static_cast<Eigen::Index>(observed.size()));
        for (std::size_t i = 0; i < observed.size(); ++i) y(static_cast<Eigen::Index>(i)) = x(observed[i]);
        return y;
    }
};

namespace detail {

inline double& slot_ref(ConcreteDmp& d, const ParamSlot& s) {
    switch (s.kind) {
        case SlotKind::linear_coef: return d.objectives[static_cast<std::size_t>(s.objective)].c(s.index);
        case SlotKind::quad_diag: return d.objectives[static_cast<std::size_t>(s.objective)].q(s.index, s.index);
        case SlotKind::ineq_rhs: return d.b_ub(s.index);
        case SlotKind::eq_rhs: return d.b_eq(s.index);
    }
    throw ValidationError("bad slot");
}

inline double slot_value(const ConcreteDmp& d, const ParamSlot& s) {
    switch (s.kind) {
        case SlotKind::linear_coef: return d.objectives[static_cast<std::size_t>(s.objective)].c(s.index);
        case SlotKind::quad_diag: return d.objectives[static_cast<std::size_t>(s.objective)].q(s.index, s.index);
        case SlotKind::ineq_rhs: return d.b_ub(s.index);
        case SlotKind::eq_rhs: return d.b_eq(s.index);
    }
    throw ValidationError("bad slot");
}

inline double slot_factor(const ParamSlot& s) { return s.kind == SlotKind::quad_diag ? 2.0 * s.scale : s.scale; }

}  // namespace detail

/// Numeric program for a given θ. Pure function of (instance, θ).
inline ConcreteDmp apply_params(const DmpInstance& inst, const Vec& theta) {
    inst.space.validate(theta);
    ConcreteDmp d = inst.base;
    for (std::size_t k = 0; k < inst.slots.size(); ++k)
        detail::slot_ref(d, inst.slots[k]) = detail::slot_factor(inst.slots[k]) * theta(static_cast<Eigen::Index>(k));
    d.finalize();
    return d;
}

/// Inverse of apply_params on the slot entries.
inline Vec read_params(const DmpInstance& inst, const ConcreteDmp& d) {
    Vec theta(inst.n_free());
    for (std::size_t k = 0; k < inst.slots.size(); ++k)
        theta(static_cast<Eigen::Index>(k)) = detail::slot_value(d, inst.slots[k]) / detail::slot_factor(inst.slots[k]);
    return theta;
}

enum class Sense { le, ge };

/// Constraint input for the builders: A x (≤ or ≥) b per row, optional equalities and bounds.
struct ConstraintBlock {
    Mat a;
    Vec b;
    std::vector<Sense> sense;  // empty = all ≤
    Mat a_eq;
    Vec b_eq;
    Vec lower;  // empty = 0
    Vec upper;  // empty = +inf
};

/// Which entries are free. Empty vectors mean "all fixed".
struct SlotMask {
    std::vector<std::vector<bool>> linear;     // per objective, per coordinate
    std::vector<std::vector<bool>> quad_diag;  // per objective, per coordinate
    std::vector<bool> ineq_rhs;                // per structural row of the block
    std::vector<bool> eq_rhs;                  // per equality row
};

namespace detail {

inline bool mask_at(const std::vector<std::vector<bool>>& m, std::size_t l, std::size_t j) {
    return l < m.size() && j < m[l].size() && m[l][j];
}

inline bool mask_at(const std::vector<bool>& m, std::size_t i) { return i < m.size() && m[i]; }

inline void fill_constraints(ConcreteDmp& d, const ConstraintBlock& cb, Eigen::Index n, std::vector<double>& row_scale) {
    require(cb.a.rows() == cb.b.size(), "constraint rows and rhs differ in length");
    require(cb.a.rows() == 0 || cb.a.cols() == n, "constraint matrix width differs from objective dimension");
    require(cb.sense.empty() || cb.sense.size() == static_cast<std::size_t>(cb.a.rows()), "sense list length mismatch");
    require(cb.a_eq.rows() == cb.b_eq.size(), "equality rows and rhs differ in length");
    require(cb.a_eq.rows() == 0 || cb.a_eq.cols() == n, "equality matrix width mismatch");
    d.a_ub = cb.a.rows() ? cb.a : Mat(0, n);
    d.b_ub = cb.b;
    row_scale.assign(static_cast<std::size_t>(cb.a.rows()), 1.0);
    for (Eigen::Index i = 0; i < cb.a.rows(); ++i)
        if (!cb.sense.empty() && cb.sense[static_cast<std::size_t>(i)] == Sense::ge) {
            d.a_ub.row(i) *= -1.0;
            d.b_ub(i) *= -1.0;
            row_scale[static_cast<std::size_t>(i)] = -1.0;
        }
    d.a_eq = cb.a_eq.rows() ? cb.a_eq : Mat(0, n);
    d.b_eq = cb.b_eq;
    d.lower = cb.lower.size() ? cb.lower : Vec::Zero(n);
    d.upper = cb.upper.size() ? cb.upper : Vec::Constant(n, kInf);
    require(d.lower.size() == n && d.upper.size() == n, "bound vectors must match the dimension");
}

inline std::vector<ParamSlot> slots_from_mask(const ConcreteDmp& d, const SlotMask& mask, const std::vector<double>& row_scale) {
    std::vector<ParamSlot> slots;
    for (std::size_t l = 0; l < d.objectives.size(); ++l) {
        for (Eigen::Index j = 0; j < d.n(); ++j)
            if (mask_at(mask.linear, l, static_cast<std::size_t>(j)))
                slots.push_back({SlotKind::linear_coef, static_cast<int>(l), static_cast<int>(j), 1.0});
        for (Eigen::Index j = 0; j < d.n(); ++j)
            if (mask_at(mask.quad_diag, l, static_cast<std::size_t>(j))) {
                require(d.objectives[l].has_quadratic(), "quadratic slot on an objective without Q");
                slots.push_back({SlotKind::quad_diag, static_cast<int>(l), static_cast<int>(j), 1.0});
            }
    }
    for (Eigen::Index i = 0; i < d.a_ub.rows(); ++i)
        if (mask_at(mask.ineq_rhs, static_cast<std::size_t>(i)))
            slots.push_back({SlotKind::ineq_rhs, 0, static_cast<int>(i), row_scale[static_cast<std::size_t>(i)]});
    for (Eigen::Index i = 0; i < d.a_eq.rows(); ++i)
        if (mask_at(mask.eq_rhs, static_cast<std::size_t>(i)))
            slots.push_back({SlotKind::eq_rhs, 0, static_cast<int>(i), 1.0});
    return slots;
}

inline double min_eigenvalue(const Mat& q) {
    if (q.size() == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (q + q.transpose()), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

/// Coordinate bounds of X(θ) jointly over x and the free right-hand sides, by LP.
/// Throws when some coordinate is unbounded or the joint set is empty.
inline void certify_bounds(DmpInstance& inst) {
    const ConcreteDmp& d = inst.base;
    const Eigen::Index n = d.n();
    std::vector<int> rhs_coords;
    for (std::size_t k = 0; k < inst.slots.size(); ++k)
        if (inst.slots[k].kind == SlotKind::ineq_rhs || inst.slots[k].kind == SlotKind::eq_rhs)
            rhs_coords.push_back(static_cast<int>(k));
    const auto r = static_cast<Eigen::Index>(rhs_coords.size());
    LinearProgram lp;
    lp.a_ub = Mat::Zero(d.a_ub.rows(), n + r);
    lp.a_ub.leftCols(n) = d.a_ub;
    lp.b_ub = d.b_ub;
    lp.a_eq = Mat::Zero(d.a_eq.rows(), n + r);
    lp.a_eq.leftCols(n) = d.a_eq;
    lp.b_eq = d.b_eq;
    for (Eigen::Index t = 0; t < r; ++t) {
        const auto& s = inst.slots[static_cast<std::size_t>(rhs_coords[static_cast<std::size_t>(t)])];
        if (s.kind == SlotKind::ineq_rhs) {
            lp.a_ub(s.index, n + t) = -s.scale;
            lp.b_ub(s.index) = 0.0;
        } else {
            lp.a_eq(s.index, n + t) = -s.scale;
            lp.b_eq(s.index) = 0.0;
        }
    }
    lp.lower = Vec(n + r);
    lp.upper = Vec(n + r);
    lp.lower.head(n) = d.lower;
    lp.upper.head(n) = d.upper;
    for (Eigen::Index t = 0; t < r; ++t) {
        lp.lower(n + t) = inst.space.lower(rhs_coords[static_cast<std::size_t>(t)]);
        lp.upper(n + t) = inst.space.upper(rhs_coords[static_cast<std::size_t>(t)]);
    }
    inst.x_lower.resize(n);
    inst.x_upper.resize(n);
    for (Eigen::Index j = 0; j < n; ++j)
        for (int sgn : {1, -1}) {
            lp.cost = Vec::Zero(n + r);
            lp.cost(j) = sgn;
            LpResult res = solve_lp(lp);
            if (res.status == LpStatus::unbounded)
                throw ValidationError("unbounded feasible set: coordinate " + std::to_string(j + 1));
            if (res.status != LpStatus::optimal)
                throw ValidationError("feasible set is empty for every parameter in the box");
            (sgn > 0 ? inst.x_lower : inst.x_upper)(j) = res.x(j);
        }
    double mx = std::max(inst.x_lower.cwiseAbs().maxCoeff(), inst.x_upper.cwiseAbs().maxCoeff());
    inst.radius = std::sqrt(static_cast<double>(n)) * mx;
}

/// Nonemptiness of X(θ) at the corners of the right-hand-side box (or a seeded sample when there are many).
inline void certify_corners(const DmpInstance& inst) {
    std::vector<int> rhs_coords;
    for (std::size_t k = 0; k < inst.slots.size(); ++k)
        if (inst.slots[k].kind == SlotKind::ineq_rhs || inst.slots[k].kind == SlotKind::eq_rhs)
            rhs_coords.push_back(static_cast<int>(k));
    if (rhs_coords.empty()) {
        // X does not depend on θ; one check suffices
        LinearProgram lp{Vec::Zero(inst.n()), inst.base.a_ub, inst.base.b_ub, inst.base.a_eq, inst.base.b_eq,
                         inst.base.lower, inst.base.upper};
        if (solve_lp(lp).status != LpStatus::optimal) throw ValidationError("feasible set is empty");
        return;
    }
    for (Eigen::Index r = 0; r < inst.space.norm_rows.rows(); ++r)
        for (int k : rhs_coords)
            if (inst.space.norm_rows(r, k) != 0.0) return;  // corners need not lie in Θ
    const std::size_t d = rhs_coords.size();
    const std::size_t count = d <= 10 ? (std::size_t{1} << d) : 1024;
    std::mt19937_64 rng(1234);
    Vec theta = inst.space.lower;
    for (Eigen::Index i = 0; i < theta.size(); ++i) theta(i) = 0.5 * (inst.space.lower(i) + inst.space.upper(i));
    for (std::size_t c = 0; c < count; ++c) {
        for (std::size_t t = 0; t < d; ++t) {
            bool hi = d <= 10 ? ((c >> t) & 1U) : (rng() & 1U);
            int k = rhs_coords[t];
            theta(k) = hi ? inst.space.upper(k) : inst.space.lower(k);
        }
        ConcreteDmp cd = inst.base;
        for (std::size_t k = 0; k < inst.slots.size(); ++k)
            slot_ref(cd, inst.slots[k]) = slot_factor(inst.slots[k]) * theta(static_cast<Eigen::Index>(k));
        LinearProgram lp{Vec::Zero(inst.n()), cd.a_ub, cd.b_ub, cd.a_eq, cd.b_eq, cd.lower, cd.upper};
        if (solve_lp(lp).status != LpStatus::optimal)
            throw ValidationError("feasible set is empty at a corner of the parameter box");
    }
}

inline DmpInstance finish_instance(std::string name, ConcreteDmp d, std::vector<ParamSlot> slots, ParamSpace space) {
    require(d.p() >= 2, "a multiobjective program needs at least two objectives");
    space.check();
    require(space.dim() == static_cast<Eigen::Index>(slots.size()),
            "parameter space has " + std::to_string(space.dim()) + " coordinates but the mask frees " +
                std::to_string(slots.size()) + " slots");
    d.finalize();
    DmpInstance inst;
    inst.name = std::move(name);
    inst.base = std::move(d);
    inst.slots = std::move(slots);
    inst.space = std::move(space);
    // slot values in the base are placeholders; keep them consistent with the box centre
    Vec mid = 0.5 * (inst.space.lower + inst.space.upper);
    for (std::size_t k = 0; k < inst.slots.size(); ++k)
        slot_ref(inst.base, inst.slots[k]) = slot_factor(inst.slots[k]) * mid(static_cast<Eigen::Index>(k));
    inst.base.finalize();
    bool strong = true;
    for (const auto& f : inst.base.objectives) {
        if (f.has_quadratic()) {
            double ev = min_eigenvalue(f.q);
            require(ev >= -1e-10, "objective Hessian is not positive semidefinite (min eigenvalue " +
                                      std::to_string(ev) + ")");
            if (ev < 1e-8) strong = false;
        } else {
            strong = false;
        }
        if (!f.powers.empty()) strong = false;
    }
    inst.strongly_convex = strong;
    certify_bounds(inst);
    certify_corners(inst);
    return inst;
}

}  // namespace detail

inline ParamSpace empty_space() {
    ParamSpace s;
    s.lower = Vec(0);
    s.upper = Vec(0);
    s.norm_rows = Mat(0, 0);
    s.norm_rhs = Vec(0);
    return s;
}

/// Linear objectives cᵀx over a polyhedron.
inline DmpInstance build_mlp(const std::vector<Vec>& c_list, const ConstraintBlock& cons, const SlotMask& mask,
                             const ParamSpace& space, std::string name = "mlp") {
    require(c_list.size() >= 2, "need at least two objectives");
    const Eigen::Index n = c_list[0].size();
    ConcreteDmp d;
    d.family = Family::linear;
    for (const auto& c : c_list) {
        require(c.size() == n, "objective vectors differ in dimension");
        d.objectives.push_back({c, Mat(), {}});
    }
    std::vector<double> row_scale;
    detail::fill_constraints(d, cons, n, row_scale);
    auto slots = detail::slots_from_mask(d, mask, row_scale);
    return detail::finish_instance(std::move(name), std::move(d), std::move(slots), space);
}

/// Convex quadratic objectives ½xᵀQ_l x + c_lᵀx over a polyhedron.
inline DmpInstance build_mqp(const std::vector<Mat>& q_list, const std::vector<Vec>& c_list, const ConstraintBlock& cons,
                             const SlotMask& mask, const ParamSpace& space, std::string name = "mqp") {
    require(q_list.size() == c_list.size(), "Q and c lists differ in length");
    require(c_list.size() >= 2, "need at least two objectives");
    const Eigen::Index n = c_list[0].size();
    ConcreteDmp d;
    d.family = Family::quadratic;
    for (std::size_t l = 0; l < c_list.size(); ++l) {
        require(c_list[l].size() == n, "objective vectors differ in dimension");
        const Mat& q = q_list[l];
        require(q.rows() == n && q.cols() == n, "Q has the wrong shape");
        require((q - q.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + q.cwiseAbs().maxCoeff()), "Q must be symmetric");
        d.objectives.push_back({c_list[l], q, {}});
    }
    std::vector<double> row_scale;
    detail::fill_constraints(d, cons, n, row_scale);
    auto slots = detail::slots_from_mask(d, mask, row_scale);
    return detail::finish_instance(std::move(name), std::move(d), std::move(slots), space);
}

/// Congestion (BPR) and emission objectives over route flows f and link flows v.
/// Variables are x = (f, v); demand rows come first among the equalities.
inline DmpInstance build_traffic(TrafficNetwork net, const std::vector<bool>& free_demand, const ParamSpace& space,
                                 std::string name = "traffic") {
    require(!net.links.empty() && !net.ods.empty(), "traffic: empty network");
    for (const auto& od : net.ods) require(od.demand > 0, "traffic: demands must be positive");
    for (const auto& a : net.links) require(a.capacity > 0 && a.t0 >= 0 && a.emission >= 0, "traffic: bad link data");
    if (net.routes.empty()) net.enumerate_routes();
    const int nr = net.route_count();
    const auto nl = static_cast<Eigen::Index>(net.links.size());
    const auto nw = static_cast<Eigen::Index>(net.ods.size());
    const Eigen::Index n = nr + nl;
    ConcreteDmp d;
    d.family = Family::smooth;
    Objective cong{Vec::Zero(n), Mat(), {}};
    Objective emis{Vec::Zero(n), Mat::Zero(n, n), {}};
    for (Eigen::Index a = 0; a < nl; ++a) {
        const auto& lk = net.links[static_cast<std::size_t>(a)];
        cong.c(nr + a) = lk.t0;
        cong.powers.push_back({static_cast<int>(nr + a), 0.15 * lk.t0 / std::pow(lk.capacity, 4), 5});
        emis.q(nr + a, nr + a) = 2.0 * lk.emission;
    }
    d.objectives = {cong, emis};
    d.a_ub = Mat(0, n);
    d.b_ub = Vec(0);
    d.a_eq = Mat::Zero(nw + nl, n);
    d.b_eq = Vec::Zero(nw + nl);
    int col = 0;
    for (Eigen::Index w = 0; w < nw; ++w) {
        for (std::size_t r = 0; r < net.routes[static_cast<std::size_t>(w)].size(); ++r) d.a_eq(w, col++) = 1.0;
        d.b_eq(w) = net.ods[static_cast<std::size_t>(w)].demand;
    }
    Mat delta = net.incidence();
    d.a_eq.block(nw, 0, nl, nr) = -delta;
    d.a_eq.block(nw, nr, nl, nl) = Mat::Identity(nl, nl);
    d.lower = Vec::Zero(n);
    d.upper = Vec::Constant(n, kInf);
    std::vector<ParamSlot> slots;
    for (Eigen::Index w = 0; w < nw; ++w)
        if (detail::mask_at(free_demand, static_cast<std::size_t>(w)))
            slots.push_back({SlotKind::eq_rhs, 0, static_cast<int>(w), 1.0});
    for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(slots.size()); ++k)
        require(space.lower.size() <= k || space.lower(k) > 0, "traffic: demand box must be positive");
    DmpInstance inst = detail::finish_instance(std::move(name), std::move(d), std::move(slots), space);
    for (Eigen::Index a = 0; a < nl; ++a) inst.observed.push_back(static_cast<int>(nr + a));
    inst.network = std::move(net);
    return inst;
}

}  // namespace imop

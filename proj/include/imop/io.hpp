#pragma once

// JSON problem documents and small serialization helpers.
//
// Problem schema:
//   { "name": str, "family": "linear" | "quadratic" | "traffic",
//     "objectives": [ { "c": [..], "Q": [[..],..] }, .. ],
//     "constraints": { "A": [[..]], "b": [..], "sense": ["le"|"ge", ..],
//                      "A_eq": [[..]], "b_eq": [..], "lower": [..], "upper": [..] },
//     "mask": { "c": [[bool]], "q_diag": [[bool]], "b": [bool], "b_eq": [bool] },
//     "space": { "lower": [..], "upper": [..],
//                "normalizations": [ { "row": [..], "rhs": num }, .. ] },
//     "network": { "links": [ {"from","to","t0","capacity","emission"} ],
//                  "od": [ {"origin","dest","demand","free"} ] } }
// Infinite bounds are written as the strings "inf" / "-inf" (or null for "unbounded").

#include "model.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>
#include <string>

namespace imop {

using json = nlohmann::json;

namespace detail {

inline double num(const json& v, double if_null) {
    if (v.is_null()) return if_null;
    if (v.is_string()) {
        std::string s = v.get<std::string>();
        if (s == "inf" || s == "+inf") return kInf;
        if (s == "-inf") return -kInf;
        throw ValidationError("not a number: " + s);
    }
    require(v.is_number(), "expected a number");
    return v.get<double>();
}

inline Vec vec_of(const json& arr, double if_null = 0.0) {
    require(arr.is_array(), "expected an array");
    Vec v(static_cast<Eigen::Index>(arr.size()));
    for (std::size_t i = 0; i < arr.size(); ++i) v(static_cast<Eigen::Index>(i)) = num(arr[i], if_null);
    return v;
}

inline Mat mat_of(const json& arr, Eigen::Index cols_if_empty) {
    require(arr.is_array(), "expected an array of rows");
    if (arr.empty()) return Mat(0, cols_if_empty);
    std::vector<std::vector<double>> rows;
    for (const auto& r : arr) rows.push_back(to_std(vec_of(r)));
    return rows_to_mat(rows);
}

inline std::vector<std::vector<bool>> bool_rows(const json& j, const char* key) {
    std::vector<std::vector<bool>> out;
    if (!j.contains(key)) return out;
    for (const auto& r : j.at(key)) out.push_back(r.get<std::vector<bool>>());
    return out;
}

inline std::vector<bool> bool_list(const json& j, const char* key) {
    if (!j.contains(key)) return {};
    return j.at(key).get<std::vector<bool>>();
}

inline json num_json(double v) {
    if (v == kInf) return "inf";
    if (v == -kInf) return "-inf";
    return v;
}

}  // namespace detail

inline json to_json(const Vec& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(detail::num_json(v(i)));
    return a;
}

inline json to_json(const Mat& m) {
    json a = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) a.push_back(to_json(Vec(m.row(i).transpose())));
    return a;
}

inline ParamSpace space_from_json(const json& j) {
    ParamSpace s;
    s.lower = detail::vec_of(j.at("lower"));
    s.upper = detail::vec_of(j.at("upper"));
    const auto dim = s.lower.size();
    s.norm_rows = Mat(0, dim);
    s.norm_rhs = Vec(0);
    if (j.contains("normalizations")) {
        const auto& nr = j.at("normalizations");
        s.norm_rows = Mat(static_cast<Eigen::Index>(nr.size()), dim);
        s.norm_rhs = Vec(static_cast<Eigen::Index>(nr.size()));
        for (std::size_t r = 0; r < nr.size(); ++r) {
            Vec row = detail::vec_of(nr[r].at("row"));
            require(row.size() == dim, "normalization row width differs from the parameter dimension");
            s.norm_rows.row(static_cast<Eigen::Index>(r)) = row.transpose();
            s.norm_rhs(static_cast<Eigen::Index>(r)) = nr[r].at("rhs").get<double>();
        }
    }
    return s;
}

inline TrafficNetwork network_from_json(const json& j) {
    TrafficNetwork net;
    for (const auto& l : j.at("links"))
        net.links.push_back({l.at("from").get<int>(), l.at("to").get<int>(), l.at("t0").get<double>(),
                             l.at("capacity").get<double>(), l.at("emission").get<double>()});
    for (const auto& o : j.at("od"))
        net.ods.push_back({o.at("origin").get<int>(), o.at("dest").get<int>(), o.at("demand").get<double>()});
    return net;
}

/// Build an instance from a problem document.
inline DmpInstance instance_from_json(const json& j) {
    try {
        std::string family = j.at("family").get<std::string>();
        std::string name = j.value("name", family);
        ParamSpace space = j.contains("space") ? space_from_json(j.at("space")) : empty_space();
        if (family == "traffic") {
            TrafficNetwork net = network_from_json(j.at("network"));
            std::vector<bool> free;
            for (const auto& o : j.at("network").at("od")) free.push_back(o.value("free", false));
            return build_traffic(std::move(net), free, space, name);
        }
        const auto& objs = j.at("objectives");
        std::vector<Vec> cs;
        std::vector<Mat> qs;
        for (const auto& o : objs) {
            cs.push_back(detail::vec_of(o.at("c")));
            if (o.contains("Q")) qs.push_back(detail::mat_of(o.at("Q"), cs.back().size()));
            else qs.push_back(Mat::Zero(cs.back().size(), cs.back().size()));
        }
        require(!cs.empty(), "no objectives");
        const Eigen::Index n = cs[0].size();
        const json& cj = j.at("constraints");
        ConstraintBlock cb;
        cb.a = cj.contains("A") ? detail::mat_of(cj.at("A"), n) : Mat(0, n);
        cb.b = cj.contains("b") ? detail::vec_of(cj.at("b")) : Vec(0);
        if (cj.contains("sense"))
            for (const auto& s : cj.at("sense")) {
                std::string v = s.get<std::string>();
                require(v == "le" || v == "ge", "sense must be 'le' or 'ge'");
                cb.sense.push_back(v == "le" ? Sense::le : Sense::ge);
            }
        cb.a_eq = cj.contains("A_eq") ? detail::mat_of(cj.at("A_eq"), n) : Mat(0, n);
        cb.b_eq = cj.contains("b_eq") ? detail::vec_of(cj.at("b_eq")) : Vec(0);
        if (cj.contains("lower")) cb.lower = detail::vec_of(cj.at("lower"), -kInf);
        if (cj.contains("upper")) cb.upper = detail::vec_of(cj.at("upper"), kInf);
        SlotMask mask;
        if (j.contains("mask")) {
            const json& mj = j.at("mask");
            mask.linear = detail::bool_rows(mj, "c");
            mask.quad_diag = detail::bool_rows(mj, "q_diag");
            mask.ineq_rhs = detail::bool_list(mj, "b");
            mask.eq_rhs = detail::bool_list(mj, "b_eq");
        }
        if (family == "linear") return build_mlp(cs, cb, mask, space, name);
        if (family == "quadratic") return build_mqp(qs, cs, cb, mask, space, name);
        throw ValidationError("unknown family '" + family + "'");
    } catch (const json::exception& e) {
        throw ValidationError(std::string("problem document: ") + e.what());
    }
}

inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ValidationError(path + ": " + e.what());
    }
}

/// Serialize an instance back into the problem schema (slot values at the box centre).
inline json instance_to_json(const DmpInstance& inst) {
    json j;
    j["name"] = inst.name;
    const ConcreteDmp& d = inst.base;
    if (inst.network) {
        j["family"] = "traffic";
        json links = json::array(), od = json::array();
        for (const auto& l : inst.network->links)
            links.push_back({{"from", l.from}, {"to", l.to}, {"t0", l.t0}, {"capacity", l.capacity}, {"emission", l.emission}});
        for (std::size_t w = 0; w < inst.network->ods.size(); ++w) {
            bool free = false;
            for (const auto& s : inst.slots) free = free || (s.kind == SlotKind::eq_rhs && s.index == static_cast<int>(w));
            const auto& o = inst.network->ods[w];
            od.push_back({{"origin", o.origin}, {"dest", o.dest}, {"demand", o.demand}, {"free", free}});
        }
        j["network"] = {{"links", links}, {"od", od}};
    } else {
        j["family"] = to_string(d.family);
        json objs = json::array();
        for (const auto& f : d.objectives) {
            json o;
            o["c"] = to_json(f.c);
            if (f.has_quadratic()) o["Q"] = to_json(f.q);
            objs.push_back(o);
        }
        j["objectives"] = objs;
        json c;
        c["A"] = to_json(d.a_ub);
        c["b"] = to_json(d.b_ub);
        if (d.a_eq.rows()) {
            c["A_eq"] = to_json(d.a_eq);
            c["b_eq"] = to_json(d.b_eq);
        }
        c["lower"] = to_json(d.lower);
        c["upper"] = to_json(d.upper);
        j["constraints"] = c;
        // GE rows were stored negated; export them in ≤ form, so slots read back with scale 1
        json mc = json::array(), mq = json::array();
        for (int l = 0; l < d.p(); ++l) {
            std::vector<bool> rc(static_cast<std::size_t>(d.n()), false), rq(static_cast<std::size_t>(d.n()), false);
            for (const auto& s : inst.slots) {
                if (s.objective != l) continue;
                if (s.kind == SlotKind::linear_coef) rc[static_cast<std::size_t>(s.index)] = true;
                if (s.kind == SlotKind::quad_diag) rq[static_cast<std::size_t>(s.index)] = true;
            }
            mc.push_back(rc);
            mq.push_back(rq);
        }
        std::vector<bool> mb(static_cast<std::size_t>(d.a_ub.rows()), false), me(static_cast<std::size_t>(d.a_eq.rows()), false);
        for (const auto& s : inst.slots) {
            if (s.kind == SlotKind::ineq_rhs) mb[static_cast<std::size_t>(s.index)] = true;
            if (s.kind == SlotKind::eq_rhs) me[static_cast<std::size_t>(s.index)] = true;
        }
        j["mask"] = {{"c", mc}, {"q_diag", mq}, {"b", mb}, {"b_eq", me}};
    }
    json sp;
    Vec lo = inst.space.lower, hi = inst.space.upper;
    // ≤-form export flips the sign of GE right-hand-side parameters
    for (std::size_t k = 0; k < inst.slots.size(); ++k)
        if (inst.slots[k].scale < 0) {
            auto i = static_cast<Eigen::Index>(k);
            double a = -hi(i), b = -lo(i);
            lo(i) = a;
            hi(i) = b;
        }
    sp["lower"] = to_json(lo);
    sp["upper"] = to_json(hi);
    json norms = json::array();
    for (Eigen::Index r = 0; r < inst.space.norm_rows.rows(); ++r) {
        Vec row = inst.space.norm_rows.row(r).transpose();
        for (std::size_t k = 0; k < inst.slots.size(); ++k)
            if (inst.slots[k].scale < 0) row(static_cast<Eigen::Index>(k)) *= -1.0;
        norms.push_back({{"row", to_json(row)}, {"rhs", inst.space.norm_rhs(r)}});
    }
    sp["normalizations"] = norms;
    j["space"] = sp;
    return j;
}

}  // namespace imop

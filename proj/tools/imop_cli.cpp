// Command-line front end: forward solves, estimation, identifiability tests,
// experiment replication, model export and the introduction demo.
//
// Exit status: 0 success, 1 validation error or bad usage, 2 numerical failure.

#include "imop/imop.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>

namespace fs = std::filesystem;
using namespace imop;

namespace {

struct Flags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::optional<int> threads;
    bool verbose = false;
};

std::string out_dir(const Flags& f) {
    if (!f.out.empty()) return f.out;
    if (const char* env = std::getenv("IMOP_OUT_DIR"); env && *env) return env;
    return "imop_out";
}

json load_config(const Flags& f, bool required) {
    if (f.config.empty()) {
        if (required) throw ValidationError("--config is required for this subcommand");
        return json::object();
    }
    if (!fs::exists(f.config)) throw ValidationError("config file not found: " + f.config);
    return read_json_file(f.config);
}

void note(const Flags& f, const std::string& msg) {
    if (f.verbose) std::cerr << "imop: " << msg << "\n";
}

void write_json(const fs::path& p, const json& j) {
    fs::create_directories(p.parent_path());
    std::ofstream os(p, std::ios::binary);
    if (!os) throw ValidationError("cannot write " + p.string());
    os << j.dump(2) << "\n";
}

DmpInstance instance_of(const json& cfg) {
    if (cfg.contains("instance")) return instance_from_json(cfg.at("instance"));
    require(cfg.contains("fixture"), "config needs 'fixture' or 'instance'");
    return fixtures::by_id(cfg.at("fixture").get<std::string>());
}

Vec theta_of(const json& cfg, const char* key, const DmpInstance& inst) {
    if (cfg.contains(key)) return detail::vec_of(cfg.at(key));
    if (cfg.contains("fixture")) return fixtures::true_theta(cfg.at("fixture").get<std::string>());
    require(inst.space.dim() == 0, std::string("config needs '") + key + "'");
    return Vec(0);
}

std::vector<Vec> weights_of(const json& cfg, int p) {
    if (cfg.contains("weights")) {
        std::vector<Vec> w;
        for (const auto& v : cfg.at("weights")) w.push_back(detail::vec_of(v));
        require(!w.empty(), "config: 'weights' is empty");
        return w;
    }
    int k = cfg.value("K", 11);
    return grid_weights(p, k, cfg.value("seed", std::uint64_t{0}));
}

ExperimentConfig experiment_of(const json& cfg, const Flags& f) {
    ExperimentConfig c = config_from_json(cfg);
    if (f.seed) c.seed = *f.seed;
    if (f.threads) c.threads = *f.threads;
    c.out_dir = out_dir(f);
    c.validate();
    return c;
}

json experiment_result(const ExperimentReport& r) {
    json cells = json::array();
    for (const auto& c : r.cells)
        cells.push_back({{"N", c.n}, {"K", c.k}, {"ok", c.ok}, {"runs", c.runs},
                         {"estimation_error_mean", std::isfinite(c.error_mean) ? json(c.error_mean) : json(nullptr)}});
    return {{"cells", cells}, {"outputs", r.files}};
}

int cmd_forward(const Flags& f) {
    json cfg = load_config(f, true);
    DmpInstance inst = instance_of(cfg);
    Vec theta = theta_of(cfg, "theta", inst);
    ConcreteDmp d = apply_params(inst, theta);
    auto weights = weights_of(cfg, d.p());
    note(f, "solving " + std::to_string(weights.size()) + " weighted problems");
    json sols = json::array();
    bool failed = false;
    for (const auto& w : weights) {
        ForwardSolution s = solve_wp(d, w);
        failed = failed || s.status != SolveStatus::optimal;
        sols.push_back({{"w", to_json(w)},
                        {"status", to_string(s.status)},
                        {"x", to_json(s.x)},
                        {"objective", s.objective},
                        {"values", to_json(d.values(s.x))}});
    }
    fs::path p = fs::path(out_dir(f)) / (cfg.value("name", inst.name) + "_forward.json");
    write_json(p, {{"instance", inst.name}, {"theta", to_json(theta)}, {"solutions", sols}});
    std::cout << json({{"status", failed ? "numerical-failure" : "ok"}, {"command", "forward"}, {"output", p.string()}}).dump()
              << "\n";
    return failed ? 2 : 0;
}

int cmd_estimate(const Flags& f) {
    ExperimentConfig c = experiment_of(load_config(f, true), f);
    c.n_values.resize(1);
    c.k_values.resize(1);
    note(f, "estimating on " + c.fixture + " with N=" + std::to_string(c.n_values[0]) + ", K=" + std::to_string(c.k_values[0]));
    ExperimentReport r = run_experiment(c);
    bool failed = false;
    for (const auto& row : r.rows) failed = failed || row.status != "ok";
    json out = experiment_result(r);
    out["status"] = failed ? "numerical-failure" : "ok";
    out["command"] = "estimate";
    std::cout << out.dump() << "\n";
    return failed ? 2 : 0;
}

int cmd_replicate(const Flags& f) {
    ExperimentConfig c = experiment_of(load_config(f, true), f);
    note(f, "replicating " + c.stem() + " over " + std::to_string(c.n_values.size() * c.k_values.size()) + " cells");
    ExperimentReport r = run_experiment(c);
    int ok = 0;
    for (const auto& row : r.rows) ok += row.status == "ok";
    json out = experiment_result(r);
    out["status"] = ok == 0 ? "numerical-failure" : "ok";
    out["command"] = "replicate";
    std::cout << out.dump() << "\n";
    return ok == 0 ? 2 : 0;
}

int cmd_test_ident(const Flags& f) {
    json cfg = load_config(f, true);
    DmpInstance inst = instance_of(cfg);
    Vec theta_hat = theta_of(cfg, "theta_hat", inst);
    IdentOptions opt;
    if (cfg.contains("ident")) {
        const json& o = cfg.at("ident");
        detail::read_if(o, "K", opt.k);
        detail::read_if(o, "N_prime", opt.n_prime);
        detail::read_if(o, "K_prime", opt.k_prime);
        detail::read_if(o, "tau", opt.tau);
        detail::read_if(o, "zeta", opt.zeta);
        detail::read_if(o, "rays", opt.rays);
        detail::read_if(o, "starts", opt.starts);
        detail::read_if(o, "max_evals", opt.max_evals);
    }
    opt.seed = f.seed ? *f.seed : cfg.value("seed", std::uint64_t{0});
    opt.threads = resolve_threads(f.threads ? *f.threads : cfg.value("threads", 1));
    opt.validate();
    note(f, "testing identifiability of " + inst.name);
    auto rep = test_identifiability(inst, theta_hat, opt);
    fs::path p = fs::path(out_dir(f)) / (cfg.value("name", inst.name) + "_ident.json");
    write_json(p, to_json(rep));
    std::cout << json({{"status", "ok"},
                       {"command", "test-ident"},
                       {"z_test", rep.z_test},
                       {"non_identifiable", rep.non_identifiable},
                       {"output", p.string()}})
                     .dump()
              << "\n";
    return 0;
}

int cmd_export(const Flags& f) {
    json cfg = load_config(f, true);
    DmpInstance inst = instance_of(cfg);
    const std::string model = cfg.value("model", std::string("single-level"));
    const int k = cfg.value("K", 11);
    const std::uint64_t seed = f.seed ? *f.seed : cfg.value("seed", std::uint64_t{0});
    BigMConfig bm;
    bm.seed = seed;
    if (cfg.contains("big_m")) {
        const json& b = cfg.at("big_m");
        detail::read_if(b, "factor", bm.factor);
        detail::read_if(b, "samples", bm.samples);
        if (b.contains("uniform")) bm.uniform = b.at("uniform").get<double>();
    }
    auto weights = grid_weights(inst.p(), k);
    MipModel m;
    int n = 0;
    if (model == "single-level") {
        ObservationSet obs;
        if (cfg.contains("observations")) {
            for (const auto& v : cfg.at("observations")) obs.y.push_back(detail::vec_of(v));
        } else if (cfg.contains("fixture")) {
            ExperimentConfig ec = default_config(cfg.at("fixture").get<std::string>());
            obs = generate_observations(inst, ec.truth(), ec.law, ec.noise, cfg.value("N", 10), seed);
        }
        n = obs.size();
        note(f, "building the single-level model with N=" + std::to_string(n) + ", K=" + std::to_string(k));
        m = inst.family() == Family::linear ? build_single_level_mlp(inst, obs, weights, bm)
                                            : build_single_level_mqp_rhs(inst, obs, weights, bm);
    } else if (model == "test-problem") {
        Vec theta_hat = theta_of(cfg, "theta_hat", inst);
        n = cfg.value("N", 20);
        auto pts = solve_all(apply_params(inst, theta_hat), random_weights(inst.p(), n, {}, seed));
        note(f, "building the test problem with N'=" + std::to_string(n) + ", K'=" + std::to_string(k));
        m = build_test_problem(inst, theta_hat, pts, weights, bm);
    } else {
        throw ValidationError("model must be 'single-level' or 'test-problem'");
    }
    m.validate();
    fs::path dir = out_dir(f);
    fs::create_directories(dir);
    fs::path p = dir / model_file_name(cfg.value("name", inst.name), n, k);
    export_model(m, p.string());
    std::cout << json({{"status", "ok"},
                       {"command", "export-model"},
                       {"variables", m.vars.size()},
                       {"rows", m.rows.size()},
                       {"binaries", m.count(VarKind::binary)},
                       {"output", p.string()}})
                     .dump()
              << "\n";
    return 0;
}

int cmd_intro(const Flags& f) {
    json cfg = load_config(f, false);
    auto rep = intro_demo(cfg.value("a", 6.0), cfg.value("b", 1.0), cfg.value("c", 1.0), cfg.value("samples", 2000),
                          cfg.value("K", 11), cfg.value("tau", 1e-2), f.seed ? *f.seed : cfg.value("seed", std::uint64_t{0}));
    fs::path p = fs::path(out_dir(f)) / "intro_demo.json";
    write_json(p, to_json(rep));
    std::cout << json({{"status", "ok"},
                       {"command", "intro-demo"},
                       {"mean", to_json(rep.mean)},
                       {"efficient_fraction", rep.efficient_fraction},
                       {"output", p.string()}})
                     .dump()
              << "\n";
    return 0;
}

void diagnose(const char* kind, const std::string& msg) {
    std::cerr << json({{"error", kind}, {"message", msg}}).dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Inverse multiobjective optimization toolkit", "imop_cli"};
    app.require_subcommand(1, 1);
    Flags flags;
    std::uint64_t seed = 0;
    int threads = 1;
    auto add_flags = [&](CLI::App* sub) {
        sub->add_option("--config", flags.config, "JSON configuration file");
        sub->add_option("--seed", seed, "seed override");
        sub->add_option("--out", flags.out, "output directory (default: $IMOP_OUT_DIR or ./imop_out)");
        sub->add_option("--threads", threads, "worker threads, 0 = all cores");
        sub->add_flag("--verbose", flags.verbose, "progress on stderr");
    };
    std::vector<std::pair<CLI::App*, int (*)(const Flags&)>> subs = {
        {app.add_subcommand("forward", "solve the weighted-sum problem for a list of weights"), cmd_forward},
        {app.add_subcommand("estimate", "estimate parameters from one synthetic data set"), cmd_estimate},
        {app.add_subcommand("test-ident", "test identifiability at an estimate"), cmd_test_ident},
        {app.add_subcommand("replicate", "run an experiment grid over N and K"), cmd_replicate},
        {app.add_subcommand("export-model", "write a single-level or test-problem model in LP format"), cmd_export},
        {app.add_subcommand("intro-demo", "mean of the segment observations versus the multiobjective estimate"), cmd_intro},
    };
    for (auto& s : subs) add_flags(s.first);
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        diagnose("usage", e.what());
        std::cerr << app.help();
        return 1;
    }
    for (auto& [sub, fn] : subs) {
        if (!sub->parsed()) continue;
        if (sub->count("--seed")) flags.seed = seed;
        if (sub->count("--threads")) flags.threads = threads;
        try {
            return fn(flags);
        } catch (const ValidationError& e) {
            diagnose("validation", e.what());
            return 1;
        } catch (const NumericalError& e) {
            diagnose("numerical", e.what());
            return 2;
        } catch (const json::exception& e) {
            diagnose("validation", e.what());
            return 1;
        } catch (const std::exception& e) {
            diagnose("numerical", e.what());
            return 2;
        }
    }
    std::cerr << app.help();
    return 1;
}

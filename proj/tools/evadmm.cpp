// Command-line harness: scenario runs, sweeps, detection and tuning utilities.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <evadmm/evadmm.hpp>

namespace fs = std::filesystem;
using namespace evadmm;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitInfeasible = 3;
constexpr int kExitSolver = 4;

constexpr double kPaperScale = 100.0;

struct Globals {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out = "out";
    int jobs = 1;
    bool trace_full = false;
    bool paper_scale = false;
    std::optional<int> days;
};

struct AttackFlags {
    std::string name;
    std::optional<int> mu;
    std::optional<double> lambda;
    std::optional<int> attacker;
    std::optional<int> target;
};

Scenario load(const Globals& g) {
    Scenario s = g.config.empty() ? Scenario{} : load_scenario(g.config);
    if (g.seed) s.seed = *g.seed;
    if (g.days) {
        if (*g.days < 1) throw ConfigError("/days", "must be >= 1");
        s.days = *g.days;
    }
    return s;
}

void apply_attack_flags(Scenario& s, const AttackFlags& f) {
    const bool any = !f.name.empty() || f.mu || f.lambda || f.attacker || f.target;
    if (!any) return;
    if (f.name.empty() && !s.attack) {
        throw ConfigError("--attack", "attack parameters given without an attack vector");
    }
    AttackConfig a = s.attack.value_or(AttackConfig{AttackSpec{}, s.n() - 1});
    if (!f.name.empty()) {
        if (f.name == "none" || f.name == "None") {
            s.attack.reset();
            return;
        }
        const auto v = parse_attack_vector(f.name);
        if (!v) throw ConfigError("--attack", "unknown attack vector '" + f.name + "'");
        a.spec.vector = *v;
    }
    if (f.mu) a.spec.mu = *f.mu;
    if (f.lambda) a.spec.lambda = *f.lambda;
    if (f.attacker) a.attacker = *f.attacker;
    if (f.target) a.spec.target = *f.target;
    try {
        a.spec.validate(a.attacker, s.n());
    } catch (const DomainError& e) {
        throw ConfigError("--attack", e.what());
    }
    s.attack = a;
}

double ev_scale(const Globals& g) { return g.paper_scale ? kPaperScale : 1.0; }

std::ofstream open_out(const fs::path& p) {
    fs::create_directories(p.parent_path());
    std::ofstream out(p);
    if (!out) throw ConfigError(p.string(), "cannot write output file");
    return out;
}

int worst_code(const std::vector<RunRecord>& recs) {
    int code = kExitOk;
    for (const auto& r : recs) code = std::max(code, r.error_code);
    return code;
}

int cmd_run(const Globals& g, const AttackFlags& af) {
    Scenario s = load(g);
    apply_attack_flags(s, af);
    const std::string dig = digest(s);
    const fs::path dir = fs::path(g.out) / dig;
    auto trace = open_out(dir / "trace.jsonl");
    trace << std::setprecision(17);

    ExperimentOptions opt;
    opt.trace_full = g.trace_full;
    opt.ev_scale = ev_scale(g);
    opt.trace = &trace;
    const auto recs = run_experiment(s, opt);

    nlohmann::json summary = {{"digest", dig}, {"scenario", to_json(s)}, {"ev_scale", opt.ev_scale}};
    summary["records"] = nlohmann::json::array();
    for (const auto& r : recs) summary["records"].push_back(to_json(r));
    open_out(dir / "summary.json") << summary.dump(2) << '\n';

    for (const auto& r : recs) {
        std::cout << "day " << r.day << ": ";
        if (!r.ok()) {
            std::cout << "error " << r.error_code << " " << r.error << '\n';
            continue;
        }
        std::cout << "vanilla " << to_string(r.vanilla->reason) << " in " << r.vanilla->iterations
                  << " it, distance " << r.vanilla->distance;
        if (r.attacked) {
            std::cout << "; attacked " << to_string(r.attacked->reason) << " in " << r.attacked->iterations
                      << " it, attacker cost " << std::showpos << r.attacker_cost_delta_pct << std::noshowpos << "%";
        }
        std::cout << '\n';
    }
    std::cout << "wrote " << dir.string() << '\n';
    return worst_code(recs);
}

struct GridFlags {
    std::vector<std::string> attacks;
    std::vector<double> lambdas;
    std::vector<int> mus;
    std::vector<int> ns;
    std::vector<std::string> mixes;
    long base_evs = 0;
    bool detection_only = false;
};

SweepGrid make_grid(const GridFlags& f) {
    SweepGrid g;
    if (!f.attacks.empty()) {
        g.attacks.clear();
        for (const auto& a : f.attacks) {
            const auto v = parse_attack_vector(a);
            if (!v) throw ConfigError("--attacks", "unknown attack vector '" + a + "'");
            g.attacks.push_back(*v);
        }
    }
    if (!f.lambdas.empty()) g.lambdas = f.lambdas;
    if (!f.mus.empty()) g.mus = f.mus;
    if (!f.ns.empty()) g.n_aggs = f.ns;
    if (!f.mixes.empty()) {
        g.mixes.clear();
        for (const auto& m : f.mixes) {
            const auto v = parse_size_mix(m);
            if (!v) throw ConfigError("--mixes", "unknown size mix '" + m + "'");
            g.mixes.push_back(*v);
        }
    }
    if (f.base_evs > 0) g.base_evs = f.base_evs;
    for (double l : g.lambdas) {
        if (!(l >= 0.0) || l > 1.0) throw ConfigError("--lambdas", "must lie in [0, 1]");
    }
    for (int m : g.mus) {
        if (m < 0) throw ConfigError("--mus", "must be >= 0");
    }
    for (int n : g.n_aggs) {
        if (n < 2) throw ConfigError("--n", "sweeps need at least two aggregators");
    }
    return g;
}

void write_cell_summaries(const fs::path& out, const SweepResult& r, double scale) {
    for (std::size_t c = 0; c < r.cells.size(); ++c) {
        const std::string dig = digest(r.cells[c].scenario);
        nlohmann::json j = {{"digest", dig}, {"scenario", to_json(r.cells[c].scenario)}, {"ev_scale", scale}};
        j["records"] = nlohmann::json::array();
        for (const auto& rec : r.records[c]) j["records"].push_back(to_json(rec, false));
        open_out(out / dig / "summary.json") << j.dump(2) << '\n';
    }
    // Wall times live apart so the other artifacts are reproducible byte for byte.
    auto timing = open_out(out / "sweep_timing.csv");
    timing << "digest,day,wall_seconds\n";
    for (std::size_t c = 0; c < r.cells.size(); ++c) {
        for (const auto& rec : r.records[c]) timing << rec.digest << ',' << rec.day << ',' << rec.wall_seconds << '\n';
    }
}

int cmd_sweep(const Globals& g, const GridFlags& gf) {
    const Scenario s = load(g);
    const SweepGrid grid = make_grid(gf);
    ExperimentOptions opt;
    opt.ev_scale = ev_scale(g);
    opt.detection_only = gf.detection_only;
    const SweepResult r = run_sweep(s, grid, g.jobs, opt);

    const fs::path out(g.out);
    if (!gf.detection_only) {
        auto eff = open_out(out / "sweep_efficacy.csv");
        write_efficacy_csv(eff, r);
    }
    auto det = open_out(out / "sweep_detection.csv");
    write_detection_csv(det, r, s.detection.alphas);
    write_cell_summaries(out, r, opt.ev_scale);

    long failures = 0;
    for (const auto& recs : r.records) {
        for (const auto& rec : recs) failures += !rec.ok();
    }
    std::cout << r.cells.size() << " cells x " << s.days << " days, " << failures << " failed runs\n";
    std::cout << "wrote " << (out / "sweep_detection.csv").string() << '\n';
    return kExitOk;
}

int cmd_detect(const Globals& g, const std::string& trace_path, bool use_evs) {
    const Scenario s = load(g);
    std::ifstream in(trace_path);
    if (!in) throw ConfigError(trace_path, "cannot open trace");
    std::vector<double> sizes;
    for (long e : s.evs) sizes.push_back(static_cast<double>(e) * ev_scale(g));
    const bool evs = use_evs || s.detection.size_proxy == SizeProxy::evs;
    const auto res = detect_from_trace(in, s.detection, evs ? &sizes : nullptr);

    nlohmann::json out = nlohmann::json::array();
    for (const auto& r : res) {
        nlohmann::json det = nlohmann::json::array();
        for (const auto& d : r.detection) {
            det.push_back({{"alpha", d.alpha},
                           {"deviator", d.deviator ? nlohmann::json(*d.deviator) : nlohmann::json(nullptr)}});
        }
        out.push_back({{"day", r.day},
                       {"run", r.run},
                       {"matrix", detail::matrix_json(r.matrix)},
                       {"max_deviation", detect(r.matrix, 0.0).max_deviation},
                       {"detection", det}});
    }
    std::cout << out.dump(2) << '\n';
    return kExitOk;
}

int cmd_calibrate(const Globals& g, const GridFlags& gf, std::optional<std::uint64_t> test_seed) {
    const Scenario s = load(g);
    const SweepGrid grid = make_grid(gf);
    ExperimentOptions opt;
    opt.ev_scale = ev_scale(g);
    opt.detection_only = true;
    const SweepResult cal = run_sweep(s, grid, g.jobs, opt);
    const auto fams = calibrate_families(cal);

    std::optional<SweepResult> test;
    if (test_seed) {
        Scenario t = s;
        t.seed = *test_seed;
        test = run_sweep(t, grid, g.jobs, opt);
    }

    nlohmann::json out = nlohmann::json::array();
    std::cout << "n_aggs,size_mix,alpha,calibration_accuracy" << (test ? ",attack,strength,test_accuracy,naive" : "")
              << '\n';
    for (const auto& f : fams) {
        nlohmann::json j = {{"n_aggs", f.n},
                            {"size_mix", std::string(to_string(f.mix))},
                            {"alpha", f.calibration.alpha},
                            {"calibration_accuracy", f.calibration.accuracy},
                            {"runs", f.runs}};
        if (!test) {
            std::cout << f.n << ',' << to_string(f.mix) << ',' << f.calibration.alpha << ','
                      << f.calibration.accuracy << '\n';
        } else {
            j["test"] = nlohmann::json::array();
            for (std::size_t c = 0; c < test->cells.size(); ++c) {
                const auto& cell = test->cells[c];
                if (cell.n != f.n || cell.mix != f.mix) continue;
                const auto runs = labelled(cell, test->records[c]);
                const Confusion k = evaluate_alpha(runs, f.calibration.alpha);
                const double naive = evaluate_alpha(runs, std::numeric_limits<double>::infinity()).accuracy();
                const std::string name = cell.attack ? std::string(to_string(cell.attack->vector)) : "None";
                const double strength = cell.attack ? cell.attack->strength() : 0.0;
                j["test"].push_back(
                    {{"attack", name}, {"strength", strength}, {"accuracy", k.accuracy()}, {"naive", naive}});
                std::cout << f.n << ',' << to_string(f.mix) << ',' << f.calibration.alpha << ','
                          << f.calibration.accuracy << ',' << name << ',' << strength << ',' << k.accuracy() << ','
                          << naive << '\n';
            }
        }
        out.push_back(j);
    }
    open_out(fs::path(g.out) / "calibration.json") << out.dump(2) << '\n';
    return kExitOk;
}

int cmd_tune_rho(const Globals& g, std::vector<double> hats, std::vector<int> ns, int max_iters, double target) {
    const Scenario s = load(g);
    if (hats.empty()) hats = {0.75, 1.5, 3.0, 6.0, 12.0};
    if (ns.empty()) ns = {2, 3, 5, 10};
    for (double h : hats) {
        if (!(h > 0.0)) throw ConfigError("--rho-hats", "must be positive");
    }
    const auto trials = tune_rho(s, hats, ns, max_iters, target, g.jobs, ev_scale(g));
    auto csv = open_out(fs::path(g.out) / "tune_rho.csv");
    csv << "rho_hat,n_aggs,day,rho,iterations_to_target,final_distance,error_code\n" << std::setprecision(10);
    for (const auto& t : trials) {
        csv << t.rho_hat << ',' << t.n << ',' << t.day << ',' << t.rho << ',' << t.iterations_to_target << ','
            << t.final_distance << ',' << t.error_code << '\n';
    }
    std::cout << "rho_hat,n_aggs,worst_iterations,reached\n";
    for (int n : ns) {
        for (double h : hats) {
            int worst = 0, reached = 0, total = 0;
            for (const auto& t : trials) {
                if (t.n != n || t.rho_hat != h) continue;
                ++total;
                if (t.iterations_to_target >= 0 && !t.error_code) {
                    ++reached;
                    worst = std::max(worst, t.iterations_to_target);
                }
            }
            std::cout << h << ',' << n << ',' << (reached ? std::to_string(worst) : "-") << ',' << reached << '/'
                      << total << '\n';
        }
    }
    if (const auto best = best_rho_hat(trials)) {
        std::cout << "best rho_hat " << *best << '\n';
    } else {
        std::cout << "no rho_hat reached the target on every run\n";
    }
    return kExitOk;
}

int cmd_gen_market(const Globals& g, int day, bool quadratic) {
    const Scenario s = load(g);
    const DayInstance inst = build_day(s, day, ev_scale(g));
    const fs::path p = fs::path(g.out) / ("market_day" + std::to_string(day) + (quadratic ? "_quadratic" : "") + ".csv");
    auto out = open_out(p);
    if (quadratic) {
        write_quadratic_csv(out, inst.market->curves);
    } else {
        if (!inst.market->raw) throw ConfigError("/market", "market day has no raw curves");
        write_curve_csv(out, *inst.market->raw);
    }
    std::cout << "wrote " << p.string() << '\n';
    return kExitOk;
}

int cmd_gen_fleet(const Globals& g, int day, int agent) {
    const Scenario s = load(g);
    if (agent < 0 || agent >= s.n()) throw ConfigError("--agent", "index out of range");
    const long count = std::max(1L, std::lround(static_cast<double>(s.evs[static_cast<std::size_t>(agent)]) * ev_scale(g)));
    const auto sessions = sample_fleet(derive_seed(s.seed, static_cast<std::uint64_t>(day), static_cast<std::uint64_t>(agent) + 1),
                                       count, s.fleet);
    const fs::path p = fs::path(g.out) / ("fleet_day" + std::to_string(day) + "_agent" + std::to_string(agent) + ".csv");
    auto out = open_out(p);
    write_fleet_csv(out, sessions);
    std::cout << "wrote " << p.string() << " (" << sessions.size() << " EVs)\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Decentralized EV aggregator bidding with ADMM: attacks and detection"};
    app.require_subcommand(1);
    app.fallthrough();

    Globals g;
    app.add_option("--config", g.config, "Scenario JSON file")->check(CLI::ExistingFile);
    app.add_option("--seed", g.seed, "Override the scenario seed");
    app.add_option("--out", g.out, "Output directory")->capture_default_str();
    app.add_option("--jobs", g.jobs, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
    app.add_flag("--trace-full", g.trace_full, "Store every local proposal and global iterate");
    app.add_flag("--paper-scale", g.paper_scale, "Run full paper fleet sizes (100x desk scale)");
    app.add_option("--days", g.days, "Override the number of simulated days");

    AttackFlags af;
    auto* run = app.add_subcommand("run", "Simulate a scenario: honest run, attacked run, detection");
    run->add_option("--attack", af.name, "Attack vector (e.g. FreezeProp, ShiftAll, none)");
    run->add_option("--mu", af.mu, "Shift strength in hours");
    run->add_option("--lambda", af.lambda, "Proportional/Adversarial strength in [0, 1]");
    run->add_option("--attacker", af.attacker, "Attacker index");
    run->add_option("--target", af.target, "Victim index for targeted vectors");

    GridFlags gf;
    auto add_grid = [&](CLI::App* sub) {
        sub->add_option("--attacks", gf.attacks, "Attack vectors to sweep");
        sub->add_option("--lambdas", gf.lambdas, "Lambda strengths");
        sub->add_option("--mus", gf.mus, "Mu strengths");
        sub->add_option("--n", gf.ns, "Aggregator counts");
        sub->add_option("--mixes", gf.mixes, "Size mixes: equal, larger, smaller");
        sub->add_option("--base-evs", gf.base_evs, "EVs per ordinary aggregator (default 1500)");
    };
    auto* sweep = app.add_subcommand("sweep", "Attack x strength x n x size-mix grid over all days");
    add_grid(sweep);
    sweep->add_flag("--detection-only", gf.detection_only, "Run only the two iterations detection needs");

    std::string trace_path;
    bool use_evs = false;
    auto* det = app.add_subcommand("detect", "Recompute detection from a trace written with --trace-full");
    det->add_option("--trace", trace_path, "trace.jsonl")->required()->check(CLI::ExistingFile);
    det->add_flag("--evs-size", use_evs, "Use declared EV counts as the size proxy");

    std::optional<std::uint64_t> test_seed;
    auto* cal = app.add_subcommand("calibrate-alpha", "Calibrate one alpha per (n, size mix) on a seed set");
    add_grid(cal);
    cal->add_option("--test-seed", test_seed, "Evaluate the calibrated alphas on this held-out seed");

    std::vector<double> hats;
    std::vector<int> tune_ns;
    int tune_iters = 400;
    double tune_target = 1e-3;
    auto* tune = app.add_subcommand("tune-rho", "Sweep rho_hat and count iterations to a distance target");
    tune->add_option("--rho-hats", hats, "rho_hat grid");
    tune->add_option("--n", tune_ns, "Aggregator counts");
    tune->add_option("--max-iters", tune_iters, "Iteration budget")->check(CLI::PositiveNumber)->capture_default_str();
    tune->add_option("--target", tune_target, "Distance to optimum")->check(CLI::PositiveNumber)->capture_default_str();

    int day = 0;
    bool quadratic = false;
    auto* gm = app.add_subcommand("gen-market", "Write one synthetic market day as a curve CSV");
    gm->add_option("--day", day, "Day index")->check(CLI::NonNegativeNumber);
    gm->add_flag("--quadratic", quadratic, "Write the fitted quadratics instead of step curves");

    int agent = 0;
    auto* gfl = app.add_subcommand("gen-fleet", "Write one aggregator's sampled fleet as CSV");
    gfl->add_option("--day", day, "Day index")->check(CLI::NonNegativeNumber);
    gfl->add_option("--agent", agent, "Aggregator index");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    try {
        if (*run) return cmd_run(g, af);
        if (*sweep) return cmd_sweep(g, gf);
        if (*det) return cmd_detect(g, trace_path, use_evs);
        if (*cal) return cmd_calibrate(g, gf, test_seed);
        if (*tune) return cmd_tune_rho(g, hats, tune_ns, tune_iters, tune_target);
        if (*gm) return cmd_gen_market(g, day, quadratic);
        if (*gfl) return cmd_gen_fleet(g, day, agent);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const InfeasibleError& e) {
        std::cerr << "infeasible: " << e.what() << " (slot " << e.hour() << ")\n";
        return kExitInfeasible;
    } catch (const SolverError& e) {
        std::cerr << "solver failure: " << e.what() << '\n';
        return kExitSolver;
    } catch (const DomainError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    }
    return kExitOk;
}

#pragma once

/**
 * @file experiment.hpp
 *
 * @brief Seeded experiment runs, sweeps and their tables.
 *
 * One run simulates every day of a scenario: the honest ("vanilla") ADMM
 * run, the attacked run when the scenario names an attacker, the attacker's
 * cost change and the detector's verdict for each alpha. Sweeps expand a
 * grid of attacks, strengths, fleet counts and size mixes into scenarios and
 * execute their days on a thread pool; results are merged in grid order, so
 * tables do not depend on scheduling.
 */

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <istream>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "admm.hpp"
#include "attacks.hpp"
#include "bidding.hpp"
#include "detection.hpp"
#include "errors.hpp"
#include "scenario.hpp"

namespace evadmm {

struct ExperimentOptions {
    /// Stop after the two iterations detection needs (no cost comparison).
    bool detection_only = false;
    /// Include every local proposal and global iterate in the trace.
    bool trace_full = false;
    double ev_scale = 1.0;
    /// JSON-lines sink, one record per ADMM iteration; null for none.
    std::ostream* trace = nullptr;
};

struct AdmmSummary {
    TerminationReason reason = TerminationReason::max_iters;
    int iterations = 0;
    double distance = 0.0;  ///< to the centralized optimum, at the end
    double r2 = 0.0;
    double s2 = 0.0;
    /// Per-agent costs at convergence, or at the cost iteration otherwise.
    std::vector<double> costs;
    int cost_iteration = 0;
};

struct DetectionEntry {
    double alpha = 0.0;
    std::optional<int> deviator;
};

struct RunRecord {
    std::string digest;
    int day = 0;
    int n = 0;
    double rho = 0.0;
    std::optional<int> attacker;
    std::optional<AdmmSummary> vanilla;
    std::optional<AdmmSummary> attacked;
    /// Relative change of the attacker's cost, percent; NaN without attack.
    double attacker_cost_delta_pct = std::numeric_limits<double>::quiet_NaN();
    /// Detector input of the honest and (if any) attacked run.
    Eigen::MatrixXd vanilla_matrix;
    Eigen::MatrixXd attacked_matrix;
    double vanilla_max_deviation = 0.0;
    double attacked_max_deviation = 0.0;
    /// Verdicts on the attacked run (the honest run without attack).
    std::vector<DetectionEntry> detection;
    /// 0 on success, else the CLI exit code class (3 infeasible, 4 solver).
    int error_code = 0;
    std::string error;
    double wall_seconds = 0.0;

    bool ok() const { return error_code == 0; }
};

inline double resolve_rho(const Scenario& s, std::span<const BidProblem> problems) {
    return s.admm.rho ? *s.admm.rho : auto_rho(s.admm.rho_hat, problems);
}

inline StopCriteria resolve_stop(const Scenario& s) {
    StopCriteria st = StopCriteria::defaults(s.n(), s.admm.max_iters);
    if (s.admm.eps_pri) st.eps_pri = *s.admm.eps_pri;
    if (s.admm.eps_dual) st.eps_dual = *s.admm.eps_dual;
    return st;
}

namespace detail {

inline nlohmann::json vector_json(const Eigen::VectorXd& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
}

inline nlohmann::json matrix_json(const Eigen::MatrixXd& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        std::vector<double> row(static_cast<std::size_t>(m.cols()));
        for (Eigen::Index j = 0; j < m.cols(); ++j) row[static_cast<std::size_t>(j)] = m(i, j);
        rows.push_back(row);
    }
    return rows;
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
    const auto n = static_cast<Eigen::Index>(j.size());
    Eigen::MatrixXd m(n, n ? static_cast<Eigen::Index>(j[0].size()) : 0);
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index k = 0; k < m.cols(); ++k) {
            m(i, k) = j[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)].get<double>();
        }
    }
    return m;
}

inline std::function<void(const ConsensusState&)> trace_writer(std::ostream* out, const ExperimentOptions& opt,
                                                               int day, const char* run, const SolveReport& joint) {
    if (!out) return {};
    return [out, full = opt.trace_full, day, run, &joint](const ConsensusState& s) {
        const auto& h = s.history.back();
        nlohmann::json j = {{"day", day},       {"run", run},         {"k", h.k},
                            {"r2", h.r2},       {"s2", h.s2},         {"costs", h.costs},
                            {"dual_mean", h.dual_mean}, {"distance", distance_to_optimum(s, joint)}};
        const auto k = static_cast<std::size_t>(h.k);
        if (full && k < s.proposals.size() && !s.proposals[k].empty()) {
            nlohmann::json loc = nlohmann::json::array();
            for (const auto& v : s.proposals[k]) loc.push_back(vector_json(v));
            j["local"] = loc;
            j["global"] = vector_json(s.global);
        }
        *out << j.dump() << '\n';
    };
}

inline AdmmSummary summarize(const RunResult& r, const SolveReport& joint, int cost_iteration) {
    AdmmSummary out;
    out.reason = r.reason;
    out.iterations = r.state.k;
    out.distance = distance_to_optimum(r.state, joint);
    out.r2 = r.state.history.back().r2;
    out.s2 = r.state.history.back().s2;
    if (r.reason == TerminationReason::converged || r.state.k <= cost_iteration) {
        out.costs = r.state.history.back().costs;
        out.cost_iteration = r.state.k;
    } else {
        out.costs = r.state.history[static_cast<std::size_t>(cost_iteration - 1)].costs;
        out.cost_iteration = cost_iteration;
    }
    return out;
}

inline std::vector<double> size_proxy(const Scenario& s, double ev_scale) {
    std::vector<double> out;
    for (long e : s.evs) out.push_back(static_cast<double>(e) * ev_scale);
    return out;
}

}  // namespace detail

/**
 * @brief Simulates one day of a scenario.
 *
 * Infeasible instances and solver failures are recorded in the returned
 * record (error_code 3 or 4) rather than thrown, so sweeps keep going.
 */
inline RunRecord run_day(const Scenario& s, int day, const ExperimentOptions& opt = {}) {
    const auto t0 = std::chrono::steady_clock::now();
    RunRecord rec;
    rec.digest = digest(s);
    rec.day = day;
    rec.n = s.n();
    if (s.attack) rec.attacker = s.attack->attacker;
    try {
        const DayInstance inst = build_day(s, day, opt.ev_scale);
        const SolveReport joint = solve_joint(inst.problems);
        rec.rho = resolve_rho(s, inst.problems);
        StopCriteria stop = resolve_stop(s);
        if (opt.detection_only) {
            stop = {0.0, 0.0, 2};
        }
        const auto sizes = detail::size_proxy(s, opt.ev_scale);
        const auto* override_sizes = s.detection.size_proxy == SizeProxy::evs ? &sizes : nullptr;

        RunOptions ro;
        ro.keep_all_proposals = opt.trace_full;
        ro.on_iteration = detail::trace_writer(opt.trace, opt, day, "vanilla", joint);
        const RunResult vanilla = run(inst.problems, honest_behaviors(s.n()), rec.rho, stop, ro);
        rec.vanilla = detail::summarize(vanilla, joint, s.admm.cost_iteration);

        std::optional<RunResult> attacked;
        if (s.attack) {
            ro.on_iteration = detail::trace_writer(opt.trace, opt, day, "attacked", joint);
            attacked = run(inst.problems, attacked_behaviors(s.n(), s.attack->attacker, s.attack->spec), rec.rho,
                           stop, ro);
            rec.attacked = detail::summarize(*attacked, joint, s.admm.cost_iteration);
            const auto a = static_cast<std::size_t>(s.attack->attacker);
            const double before = rec.vanilla->costs[a];
            rec.attacker_cost_delta_pct = before != 0.0 ? 100.0 * (rec.attacked->costs[a] - before) / before : 0.0;
        }

        if (s.n() >= 2) {
            auto matrix_of = [&](const RunResult& r) {
                if (r.state.proposals.size() < 2) {
                    throw DomainError("detection needs at least two ADMM iterations");
                }
                const auto m = build_difference_matrix(r.state.proposals[0], r.state.proposals[1], override_sizes);
                return s.detection.normalized ? m.normalized : m.raw;
            };
            rec.vanilla_matrix = matrix_of(vanilla);
            rec.vanilla_max_deviation = detect(rec.vanilla_matrix, 0.0).max_deviation;
            if (attacked) {
                rec.attacked_matrix = matrix_of(*attacked);
                rec.attacked_max_deviation = detect(rec.attacked_matrix, 0.0).max_deviation;
            }
            const Eigen::MatrixXd& judged = attacked ? rec.attacked_matrix : rec.vanilla_matrix;
            for (double alpha : s.detection.alphas) {
                rec.detection.push_back({alpha, detect(judged, alpha).deviator});
            }
        }
    } catch (const InfeasibleError& e) {
        rec.error_code = 3;
        rec.error = e.what();
    } catch (const SolverError& e) {
        rec.error_code = 4;
        rec.error = e.what();
    } catch (const DomainError& e) {
        rec.error_code = 4;
        rec.error = e.what();
    }
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rec;
}

inline std::vector<RunRecord> run_experiment(const Scenario& s, const ExperimentOptions& opt = {}) {
    std::vector<RunRecord> out;
    for (int d = 0; d < s.days; ++d) out.push_back(run_day(s, d, opt));
    return out;
}

inline nlohmann::json to_json(const AdmmSummary& a) {
    return {{"termination", std::string(to_string(a.reason))},
            {"iterations", a.iterations},
            {"distance_to_optimum", a.distance},
            {"r2", a.r2},
            {"s2", a.s2},
            {"costs", a.costs},
            {"cost_iteration", a.cost_iteration}};
}

/// `timing` adds the wall time, the one field that differs between identical runs.
inline nlohmann::json to_json(const RunRecord& r, bool timing = true) {
    nlohmann::json j = {{"digest", r.digest}, {"day", r.day}, {"n", r.n}, {"rho", r.rho}};
    j["attacker"] = r.attacker ? nlohmann::json(*r.attacker) : nlohmann::json(nullptr);
    j["vanilla"] = r.vanilla ? to_json(*r.vanilla) : nlohmann::json(nullptr);
    j["attacked"] = r.attacked ? to_json(*r.attacked) : nlohmann::json(nullptr);
    j["attacker_cost_delta_pct"] =
        std::isnan(r.attacker_cost_delta_pct) ? nlohmann::json(nullptr) : nlohmann::json(r.attacker_cost_delta_pct);
    j["vanilla_matrix"] = detail::matrix_json(r.vanilla_matrix);
    j["attacked_matrix"] = detail::matrix_json(r.attacked_matrix);
    nlohmann::json det = nlohmann::json::array();
    for (const auto& d : r.detection) {
        det.push_back({{"alpha", d.alpha}, {"deviator", d.deviator ? nlohmann::json(*d.deviator) : nlohmann::json(nullptr)}});
    }
    j["detection"] = det;
    j["error_code"] = r.error_code;
    j["error"] = r.error;
    if (timing) j["wall_seconds"] = r.wall_seconds;
    return j;
}

/// Detection recomputed from the k = 0 and k = 1 iterates of a full trace.
struct TraceDetection {
    int day = 0;
    std::string run;
    Eigen::MatrixXd matrix;
    std::vector<DetectionEntry> detection;
};

/**
 * @brief Re-runs detection on a trace written with full iterates.
 *
 * `sizes` replaces the energy size proxy (declared EV counts); pass null to
 * use each agent's iteration-0 self-assignment as the run itself does.
 */
inline std::vector<TraceDetection> detect_from_trace(std::istream& in, const DetectionConfig& cfg,
                                                     const std::vector<double>* sizes = nullptr) {
    using Key = std::pair<int, std::string>;
    std::map<Key, std::array<std::vector<Eigen::VectorXd>, 2>> iterates;
    std::vector<Key> order;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError(e.what(), lineno);
        }
        const int k = j.value("k", -1);
        if (k < 0 || k > 1) continue;
        if (!j.contains("local")) {
            throw ParseError("trace lacks iterates; rerun with --trace-full", lineno);
        }
        const Key key{j.value("day", 0), j.value("run", std::string("vanilla"))};
        if (!iterates.count(key)) order.push_back(key);
        auto& slot = iterates[key][static_cast<std::size_t>(k)];
        slot.clear();
        for (const auto& v : j["local"]) {
            const auto xs = v.get<std::vector<double>>();
            slot.push_back(Eigen::Map<const Eigen::VectorXd>(xs.data(), static_cast<Eigen::Index>(xs.size())));
        }
    }
    std::vector<TraceDetection> out;
    for (const auto& key : order) {
        const auto& it = iterates[key];
        if (it[0].empty() || it[1].empty()) {
            throw ParseError("trace of day " + std::to_string(key.first) + " (" + key.second +
                             ") misses iteration 0 or 1");
        }
        const auto m = build_difference_matrix(it[0], it[1], sizes);
        TraceDetection td{key.first, key.second, cfg.normalized ? m.normalized : m.raw, {}};
        for (double alpha : cfg.alphas) td.detection.push_back({alpha, detect(td.matrix, alpha).deviator});
        out.push_back(std::move(td));
    }
    return out;
}

/// Runs `count` independent jobs on up to `jobs` threads; job k writes slot k.
inline void parallel_for(int count, int jobs, const std::function<void(int)>& body) {
    jobs = std::max(1, std::min(jobs, count));
    if (jobs == 1) {
        for (int k = 0; k < count; ++k) body(k);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < jobs; ++w) {
        pool.emplace_back([&] {
            for (int k = next++; k < count; k = next++) body(k);
        });
    }
    for (auto& t : pool) t.join();
}

enum class SizeMix { equal, larger, smaller };

inline std::string_view to_string(SizeMix m) {
    switch (m) {
        case SizeMix::equal: return "equal";
        case SizeMix::larger: return "larger";
        case SizeMix::smaller: return "smaller";
    }
    return "?";
}

inline std::optional<SizeMix> parse_size_mix(std::string_view s) {
    if (s == "equal") return SizeMix::equal;
    if (s == "larger") return SizeMix::larger;
    if (s == "smaller") return SizeMix::smaller;
    return std::nullopt;
}

/**
 * Fleet sizes of a mix. The attacker is the last agent and the victim of
 * targeted attacks is agent 0: in `larger` the attacker is three times the
 * base size, in `smaller` the victim is.
 */
inline std::vector<long> mix_sizes(SizeMix mix, int n, long base) {
    std::vector<long> out(static_cast<std::size_t>(n), base);
    if (mix == SizeMix::larger) out.back() = 3 * base;
    if (mix == SizeMix::smaller) out.front() = 3 * base;
    return out;
}

struct SweepGrid {
    std::vector<AttackVector> attacks{AttackVector::Proportional, AttackVector::FreezeProp, AttackVector::Shift,
                                      AttackVector::FreezeShift, AttackVector::Adversarial};
    std::vector<double> lambdas{0.16, 0.33, 0.66};
    std::vector<int> mus{1, 2};
    std::vector<int> n_aggs{3};
    std::vector<SizeMix> mixes{SizeMix::equal};
    long base_evs = 1500;
};

/// One cell of a sweep: an attack at one strength in one fleet layout.
struct SweepCell {
    std::optional<AttackSpec> attack;  ///< empty: honest baseline
    int n = 0;
    SizeMix mix = SizeMix::equal;
    Scenario scenario;
};

/// Strength values swept for a vector (lambda, mu, or a single plain Freeze).
inline std::vector<AttackSpec> strengths(AttackVector v, const SweepGrid& g) {
    std::vector<AttackSpec> out;
    if (is_shift(v)) {
        for (int mu : g.mus) out.push_back({v, 0, mu, 0.0});
    } else if (uses_lambda(v)) {
        for (double l : g.lambdas) out.push_back({v, 0, 0, l});
    } else {
        out.push_back({v, 0, 0, 0.0});
    }
    return out;
}

/// Cells in grid order; each (n, mix) starts with its honest baseline.
inline std::vector<SweepCell> expand(const Scenario& base, const SweepGrid& g) {
    std::vector<SweepCell> out;
    for (int n : g.n_aggs) {
        if (n < 2) {
            throw ConfigError("/sweep/n_aggs", "sweeps need at least two aggregators");
        }
        for (SizeMix mix : g.mixes) {
            Scenario s = base;
            s.evs = mix_sizes(mix, n, g.base_evs);
            s.attack.reset();
            out.push_back({std::nullopt, n, mix, s});
            for (AttackVector v : g.attacks) {
                for (const AttackSpec& spec : strengths(v, g)) {
                    Scenario a = s;
                    a.attack = AttackConfig{spec, n - 1};
                    out.push_back({spec, n, mix, a});
                }
            }
        }
    }
    return out;
}

struct SweepResult {
    std::vector<SweepCell> cells;
    /// records[c][d]: cell c, day d.
    std::vector<std::vector<RunRecord>> records;
};

inline SweepResult run_sweep(const Scenario& base, const SweepGrid& grid, int jobs,
                             const ExperimentOptions& opt = {}) {
    SweepResult out;
    out.cells = expand(base, grid);
    const int days = base.days;
    const int total = static_cast<int>(out.cells.size()) * days;
    out.records.assign(out.cells.size(), std::vector<RunRecord>(static_cast<std::size_t>(days)));
    ExperimentOptions local = opt;
    local.trace = nullptr;
    parallel_for(total, jobs, [&](int k) {
        const auto c = static_cast<std::size_t>(k / days);
        const int d = k % days;
        out.records[c][static_cast<std::size_t>(d)] = run_day(out.cells[c].scenario, d, local);
    });
    return out;
}

/// Attack-efficacy table: one row per attacked cell.
inline void write_efficacy_csv(std::ostream& out, const SweepResult& r) {
    out << "attack,strength,n_aggs,size_mix,days,failures,converged_rate,vanilla_converged_rate,"
           "attacker_cost_delta_pct_mean,attacker_cost_delta_pct_min,attacker_cost_delta_pct_max\n";
    out << std::setprecision(10);
    for (std::size_t c = 0; c < r.cells.size(); ++c) {
        const auto& cell = r.cells[c];
        if (!cell.attack) continue;
        int ok = 0, fail = 0, conv = 0, vconv = 0;
        double sum = 0.0, lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (const auto& rec : r.records[c]) {
            if (!rec.ok() || !rec.attacked) {
                ++fail;
                continue;
            }
            ++ok;
            conv += rec.attacked->reason == TerminationReason::converged;
            vconv += rec.vanilla->reason == TerminationReason::converged;
            sum += rec.attacker_cost_delta_pct;
            lo = std::min(lo, rec.attacker_cost_delta_pct);
            hi = std::max(hi, rec.attacker_cost_delta_pct);
        }
        out << to_string(cell.attack->vector) << ',' << cell.attack->strength() << ',' << cell.n << ','
            << to_string(cell.mix) << ',' << r.records[c].size() << ',' << fail << ',';
        if (ok) {
            out << static_cast<double>(conv) / ok << ',' << static_cast<double>(vconv) / ok << ',' << sum / ok << ','
                << lo << ',' << hi << '\n';
        } else {
            out << ",,,,\n";
        }
    }
}

/// Detector input of one (cell, day): the judged matrix and who deviated.
inline std::vector<LabelledMatrix> labelled(const SweepCell& cell, const std::vector<RunRecord>& recs) {
    std::vector<LabelledMatrix> out;
    for (const auto& rec : recs) {
        if (!rec.ok()) continue;
        if (cell.attack) out.push_back({rec.attacked_matrix, *rec.attacker});
        else out.push_back({rec.vanilla_matrix, std::nullopt});
    }
    return out;
}

/// Detection table: one row per (alpha, cell); honest cells appear as attack "None".
inline void write_detection_csv(std::ostream& out, const SweepResult& r, const std::vector<double>& alphas) {
    out << "alpha,attack,strength,n_aggs,size_mix,accuracy,fp_rate,fn_rate,tp,tn,fp,fn\n";
    out << std::setprecision(10);
    for (double alpha : alphas) {
        for (std::size_t c = 0; c < r.cells.size(); ++c) {
            const auto& cell = r.cells[c];
            const auto runs = labelled(cell, r.records[c]);
            const Confusion k = evaluate_alpha(runs, alpha);
            out << alpha << ',' << (cell.attack ? to_string(cell.attack->vector) : "None") << ','
                << (cell.attack ? cell.attack->strength() : 0.0) << ',' << cell.n << ',' << to_string(cell.mix) << ','
                << k.accuracy() << ',' << k.fp_rate() << ',' << k.fn_rate() << ',' << k.tp << ',' << k.tn << ','
                << k.fp << ',' << k.fn << '\n';
        }
    }
}

/// Calibrated alpha of one (n, mix) family.
struct FamilyCalibration {
    int n = 0;
    SizeMix mix = SizeMix::equal;
    Calibration calibration;
    long runs = 0;
};

/// Picks one alpha per (n, mix) from every honest and attacked run of that family.
inline std::vector<FamilyCalibration> calibrate_families(const SweepResult& r) {
    std::vector<FamilyCalibration> out;
    for (std::size_t c = 0; c < r.cells.size(); ++c) {
        const auto& cell = r.cells[c];
        if (cell.attack) continue;
        std::vector<LabelledMatrix> runs;
        for (std::size_t k = 0; k < r.cells.size(); ++k) {
            if (r.cells[k].n != cell.n || r.cells[k].mix != cell.mix) continue;
            const auto part = labelled(r.cells[k], r.records[k]);
            runs.insert(runs.end(), part.begin(), part.end());
        }
        if (runs.empty()) continue;
        out.push_back({cell.n, cell.mix, calibrate_alpha(runs), static_cast<long>(runs.size())});
    }
    return out;
}

/// One row of a penalty sweep.
struct RhoTrial {
    double rho_hat = 0.0;
    int n = 0;
    int day = 0;
    double rho = 0.0;
    /// First iteration (1-based count) with distance <= target; -1 if never.
    int iterations_to_target = -1;
    double final_distance = 0.0;
    int error_code = 0;
};

/**
 * @brief Honest runs over a grid of rho_hat values.
 *
 * Each run uses the full iteration budget with the stopping rule disabled and
 * records when the distance to the centralized optimum first reaches
 * `target`.
 */
inline std::vector<RhoTrial> tune_rho(const Scenario& base, const std::vector<double>& rho_hats,
                                      const std::vector<int>& ns, int max_iters, double target, int jobs,
                                      double ev_scale = 1.0) {
    std::vector<RhoTrial> out;
    for (int n : ns) {
        for (double rh : rho_hats) {
            for (int d = 0; d < base.days; ++d) out.push_back({rh, n, d});
        }
    }
    parallel_for(static_cast<int>(out.size()), jobs, [&](int k) {
        RhoTrial& t = out[static_cast<std::size_t>(k)];
        Scenario s = base;
        s.evs.assign(static_cast<std::size_t>(t.n), base.evs.empty() ? 1500 : base.evs.front());
        s.attack.reset();
        try {
            const DayInstance inst = build_day(s, t.day, ev_scale);
            const SolveReport joint = solve_joint(inst.problems);
            t.rho = auto_rho(t.rho_hat, inst.problems);
            RunOptions ro;
            ro.on_iteration = [&](const ConsensusState& st) {
                const double d = distance_to_optimum(st, joint);
                if (t.iterations_to_target < 0 && d <= target) t.iterations_to_target = st.k;
                t.final_distance = d;
            };
            run(inst.problems, honest_behaviors(t.n), t.rho, {0.0, 0.0, max_iters}, ro);
        } catch (const InfeasibleError&) {
            t.error_code = 3;
        } catch (const SolverError&) {
            t.error_code = 4;
        }
    });
    return out;
}

/// rho_hat with the smallest worst-case iteration count that reached the target on every run.
inline std::optional<double> best_rho_hat(const std::vector<RhoTrial>& trials) {
    std::optional<double> best;
    int best_worst = std::numeric_limits<int>::max();
    std::vector<double> hats;
    for (const auto& t : trials) {
        if (std::find(hats.begin(), hats.end(), t.rho_hat) == hats.end()) hats.push_back(t.rho_hat);
    }
    for (double h : hats) {
        int worst = 0;
        bool all = true;
        for (const auto& t : trials) {
            if (t.rho_hat != h) continue;
            if (t.iterations_to_target < 0 || t.error_code) {
                all = false;
                break;
            }
            worst = std::max(worst, t.iterations_to_target);
        }
        if (all && worst < best_worst) {
            best_worst = worst;
            best = h;
        }
    }
    return best;
}

}  // namespace evadmm

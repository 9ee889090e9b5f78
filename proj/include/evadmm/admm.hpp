#pragma once

/**
 * @file admm.hpp
 *
 * @brief Global-variable consensus ADMM over n aggregators.
 *
 * Every agent i keeps a 24n local copy E^(i) of all schedules and a dual
 * vector xi^(i). One iteration is
 *
 *   E^(i)  <- argmin f_i(E') + xi^(i).(E' - E) + rho/2 |E' - E|^2
 *   E      <- mean_i (E^(i) + xi^(i) / rho)
 *   xi^(i) <- xi^(i) + rho (E^(i) - E)
 *
 * and the loop stops once sum_i |E^(i) - E|^2 <= eps_pri and
 * |E - E_prev|^2 <= eps_dual. The state starts from all zeros, so the
 * first proposals are penalty-regularized individual solves.
 */

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "attacks.hpp"
#include "bidding.hpp"
#include "errors.hpp"
#include "hours.hpp"
#include "market.hpp"

namespace evadmm {

struct StopCriteria {
    double eps_pri = 0.0;   ///< bound on sum_i |E^(i) - E|^2
    double eps_dual = 0.0;  ///< bound on |E - E_prev|^2
    int max_iters = 200;

    /// 1e-4 per coordinate of the 24n consensus vector.
    static StopCriteria defaults(int n, int max_iters = 200) {
        const double eps = 1e-4 * kHours * n;
        return {eps, eps, max_iters};
    }

    void validate() const {
        if (!(eps_pri >= 0.0) || !(eps_dual >= 0.0)) {
            throw DomainError("stop criteria: tolerances must be >= 0");
        }
        if (max_iters < 1) {
            throw DomainError("stop criteria: max_iters must be >= 1");
        }
    }

    bool operator==(const StopCriteria&) const = default;
};

/// One agent's role; an empty attack means honest.
struct AgentBehavior {
    int agent = 0;
    std::optional<AttackSpec> attack;
};

inline std::vector<AgentBehavior> honest_behaviors(int n) {
    std::vector<AgentBehavior> out(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)].agent = i;
    return out;
}

inline std::vector<AgentBehavior> attacked_behaviors(int n, int attacker, const AttackSpec& spec) {
    auto out = honest_behaviors(n);
    spec.validate(attacker, n);
    out[static_cast<std::size_t>(attacker)].attack = spec;
    return out;
}

struct IterationRecord {
    int k = 0;
    double r2 = 0.0;  ///< sum_i |E^(i) - E|^2
    double s2 = 0.0;  ///< |E - E_prev|^2
    /// Cost of each agent's block of E, all blocks clearing together (EUR).
    std::vector<double> costs;
    /// |mean_i xi^(i)| / max(1, |xi|)
    double dual_mean = 0.0;
};

struct ConsensusState {
    int n = 0;
    int k = 0;  ///< completed iterations
    double rho = 1.0;
    Eigen::VectorXd global;
    std::vector<Eigen::VectorXd> local;  ///< reported proposals of the last iteration
    std::vector<Eigen::VectorXd> dual;
    std::vector<IterationRecord> history;
    /// proposals[k][i] = E^(i) reported in iteration k. Iterations 0 and 1 are
    /// always kept; later ones only with keep_all_proposals.
    std::vector<std::vector<Eigen::VectorXd>> proposals;
    bool keep_all_proposals = false;

    /// Honest local solutions, reused as warm starts.
    std::vector<Eigen::VectorXd> warm;
    /// Individual optima of Freeze attackers, computed on first use.
    std::vector<std::optional<EnergySchedule>> individual_opt;
    double local_tol = 1e-8;

    static ConsensusState zeros(int n, double rho) {
        if (n < 1) {
            throw DomainError("consensus state needs at least one agent");
        }
        if (!(rho > 0.0) || !std::isfinite(rho)) {
            throw DomainError("rho must be positive and finite");
        }
        ConsensusState s;
        s.n = n;
        s.rho = rho;
        const Eigen::VectorXd z = Eigen::VectorXd::Zero(n * kHours);
        s.global = z;
        s.local.assign(static_cast<std::size_t>(n), z);
        s.dual.assign(static_cast<std::size_t>(n), z);
        s.individual_opt.resize(static_cast<std::size_t>(n));
        return s;
    }

    /// Block j of the global iterate, clipped at zero against rounding.
    EnergySchedule global_block(int j) const {
        EnergySchedule b = get_block(global, j);
        for (double& e : b) e = std::max(e, 0.0);
        return b;
    }

    std::vector<EnergySchedule> global_blocks() const {
        std::vector<EnergySchedule> out;
        for (int j = 0; j < n; ++j) out.push_back(global_block(j));
        return out;
    }
};

/// |mean_i xi^(i)|_2 / max(1, |(xi^(1), ..., xi^(n))|_2)
inline double dual_mean_norm(const ConsensusState& s) {
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(s.n * kHours);
    double total = 0.0;
    for (const auto& x : s.dual) {
        mean += x;
        total += x.squaredNorm();
    }
    mean /= s.n;
    return mean.norm() / std::max(1.0, std::sqrt(total));
}

/**
 * @brief One ADMM iteration: local updates, averaging, dual ascent.
 *
 * Attacks are applied from the second iteration (k >= 1) to the attacker's
 * honest proposal. Local solver failures propagate as SolverError naming
 * the agent.
 */
inline void admm_iterate(ConsensusState& s, std::span<const AgentBehavior> behaviors,
                         std::span<const BidProblem> problems) {
    const int n = s.n;
    if (static_cast<int>(problems.size()) != n || static_cast<int>(behaviors.size()) != n) {
        throw DomainError("admm_iterate: need one problem and one behavior per agent");
    }
    int attackers = 0;
    for (int i = 0; i < n; ++i) {
        if (behaviors[static_cast<std::size_t>(i)].agent != i) {
            throw DomainError("admm_iterate: behaviors must be listed in agent order");
        }
        if (const auto& a = behaviors[static_cast<std::size_t>(i)].attack) {
            a->validate(i, n);
            ++attackers;
        }
    }
    if (attackers > 1) {
        throw DomainError("admm_iterate: at most one agent may deviate");
    }
    if (s.warm.size() != static_cast<std::size_t>(n)) {
        s.warm.assign(static_cast<std::size_t>(n), Eigen::VectorXd());
    }

    std::vector<Eigen::VectorXd> reported(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const auto ui = static_cast<std::size_t>(i);
        const Eigen::VectorXd* warm = s.warm[ui].size() ? &s.warm[ui] : nullptr;
        LocalSolution sol;
        try {
            sol = solve_local_subproblem(i, s.global, s.dual[ui], problems[ui], n, s.rho, s.local_tol, warm);
        } catch (const SolverError& e) {
            throw SolverError(std::string(e.what()) + " (agent " + std::to_string(i) + ", iteration " +
                                  std::to_string(s.k) + ")",
                              e.best_iterate(), e.residual(), i);
        }
        s.warm[ui] = sol.proposal;
        reported[ui] = std::move(sol.proposal);

        const auto& attack = behaviors[ui].attack;
        if (attack && s.k >= 1) {
            if (is_freeze(attack->vector) && !s.individual_opt[ui]) {
                s.individual_opt[ui] = solve_individual(problems[ui], s.local_tol).schedule;
            }
            AttackContext ctx{i, n, s.local, s.individual_opt[ui] ? &*s.individual_opt[ui] : nullptr};
            reported[ui] = apply_attack(*attack, reported[ui], ctx);
        }
    }

    Eigen::VectorXd next = Eigen::VectorXd::Zero(n * kHours);
    for (int i = 0; i < n; ++i) {
        next += reported[static_cast<std::size_t>(i)] + s.dual[static_cast<std::size_t>(i)] / s.rho;
    }
    next /= n;

    IterationRecord rec;
    rec.k = s.k;
    rec.s2 = (next - s.global).squaredNorm();
    for (int i = 0; i < n; ++i) {
        const auto ui = static_cast<std::size_t>(i);
        const Eigen::VectorXd r = reported[ui] - next;
        rec.r2 += r.squaredNorm();
        s.dual[ui] += s.rho * r;
    }
    s.global = std::move(next);
    s.local = reported;
    if (s.k <= 1 || s.keep_all_proposals) {
        if (s.proposals.size() <= static_cast<std::size_t>(s.k)) s.proposals.resize(static_cast<std::size_t>(s.k) + 1);
        s.proposals[static_cast<std::size_t>(s.k)] = std::move(reported);
    }

    const auto blocks = s.global_blocks();
    const MarketDay& market = *problems.front().market;
    for (int i = 0; i < n; ++i) {
        rec.costs.push_back(evaluate_cost(blocks, market, static_cast<std::size_t>(i)));
    }
    rec.dual_mean = dual_mean_norm(s);
    s.history.push_back(std::move(rec));
    ++s.k;
}

enum class TerminationReason { converged, max_iters };

inline std::string_view to_string(TerminationReason r) {
    return r == TerminationReason::converged ? "converged" : "max_iters";
}

struct RunOptions {
    bool keep_all_proposals = false;
    double local_tol = 1e-8;
    /// Called after every iteration, e.g. to stream a trace.
    std::function<void(const ConsensusState&)> on_iteration;
};

struct RunResult {
    ConsensusState state;
    TerminationReason reason = TerminationReason::max_iters;
};

inline bool stop_reached(const IterationRecord& rec, const StopCriteria& stop) {
    return rec.r2 <= stop.eps_pri && rec.s2 <= stop.eps_dual;
}

/// Iterates until both residuals are within tolerance or max_iters is spent.
inline RunResult run(std::span<const BidProblem> problems, std::span<const AgentBehavior> behaviors, double rho,
                     const StopCriteria& stop, const RunOptions& opt = {}) {
    stop.validate();
    if (problems.empty()) {
        throw DomainError("run: no problems");
    }
    for (const auto& p : problems) {
        if (!p.market || !(*p.market == *problems.front().market)) {
            throw DomainError("run: all agents must face the same market day");
        }
    }
    // Surface infeasibility before iterating.
    check_feasible(schedule_bounds(combine(problems).requirements));
    for (const auto& p : problems) check_feasible(schedule_bounds(p.requirements));

    RunResult out{ConsensusState::zeros(static_cast<int>(problems.size()), rho), TerminationReason::max_iters};
    out.state.keep_all_proposals = opt.keep_all_proposals;
    out.state.local_tol = opt.local_tol;
    for (int it = 0; it < stop.max_iters; ++it) {
        admm_iterate(out.state, behaviors, problems);
        if (opt.on_iteration) opt.on_iteration(out.state);
        if (stop_reached(out.state.history.back(), stop)) {
            out.reason = TerminationReason::converged;
            break;
        }
    }
    return out;
}

/// |sum of the global blocks - joint optimum|_2 / max(1, |joint optimum|_2)
inline double distance_to_optimum(const ConsensusState& s, const SolveReport& joint) {
    if (s.global.size() != s.n * kHours) {
        throw DomainError("distance_to_optimum: state dimension mismatch");
    }
    double num = 0.0;
    double den = 0.0;
    for (int t = 0; t < kHours; ++t) {
        double total = 0.0;
        for (int j = 0; j < s.n; ++j) total += s.global(j * kHours + t);
        num += (total - joint.schedule[t]) * (total - joint.schedule[t]);
        den += joint.schedule[t] * joint.schedule[t];
    }
    return std::sqrt(num) / std::max(1.0, std::sqrt(den));
}

/**
 * @brief Unit-free penalty: rho = rho_hat * sqrt(n) * kappa.
 *
 * kappa (EUR/MWh^2) is the mean marginal price slope b_t + 2 a_t V_t over
 * the slots where any agent can charge, V_t being the combined purchase
 * capacity. The local objective of agent i has curvature down to
 * rho - (sqrt(n) - 1) * slope in every slot, so the sqrt(n) factor keeps a
 * given rho_hat equally far from nonconvexity for every fleet count.
 */
inline double curvature_scale(std::span<const BidProblem> problems) {
    const BidProblem joint = combine(problems);
    const ScheduleBounds b = schedule_bounds(joint.requirements);
    double acc = 0.0;
    int active = 0;
    for (int t = 0; t < kHours; ++t) {
        if (b.cap[t] <= detail::kFixedCap) continue;
        const auto& c = joint.market->curves[t];
        acc += c.slope(b.cap[t]);
        ++active;
    }
    if (active == 0 || !(acc > 0.0)) {
        return 1.0;
    }
    return acc / active;
}

inline double auto_rho(double rho_hat, std::span<const BidProblem> problems) {
    if (!(rho_hat > 0.0)) {
        throw DomainError("rho_hat must be positive");
    }
    return rho_hat * std::sqrt(static_cast<double>(problems.size())) * curvature_scale(problems);
}

}  // namespace evadmm

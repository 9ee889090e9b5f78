#pragma once

/**
 * @file bidding.hpp
 *
 * @brief Optimal day-ahead bidding under price impact.
 *
 * A schedule E (MWh per slot) must keep its running total between the
 * cumulative minimum and maximum requirement envelopes of the fleet and
 * stay within the hourly charging capacity N_t * P_max. Among feasible
 * schedules we minimize sum_t E_t * (a_t E_t^2 + b_t E_t + p0_t).
 *
 * The same machinery solves the consensus-ADMM local step, where agent i
 * optimizes a copy of every agent's schedule but only its own block is
 * subject to its requirement constraints.
 */

#include <algorithm>
#include <cmath>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "fleet.hpp"
#include "hours.hpp"
#include "ipm.hpp"
#include "market.hpp"

namespace evadmm {

/// Energy bought per slot, MWh, entrywise nonnegative.
using EnergySchedule = HourlyVector;

struct BidProblem {
    FleetRequirements requirements;
    std::shared_ptr<const MarketDay> market;
};

struct SolveReport {
    EnergySchedule schedule{};
    double objective = 0.0;  ///< EUR
    double kkt_residual = 0.0;
    int iterations = 0;
};

/// Constraint data of one schedule in market units (MWh).
struct ScheduleBounds {
    HourlyVector lower_cum{};  ///< running total must reach this
    HourlyVector upper_cum{};  ///< running total may not exceed this
    HourlyVector cap{};        ///< per-slot purchase limit
};

inline ScheduleBounds schedule_bounds(const FleetRequirements& req) {
    ScheduleBounds b;
    const auto lo = cumulative(req.r_min);
    const auto hi = cumulative(req.r_max);
    for (int t = 0; t < kHours; ++t) {
        b.lower_cum[t] = lo[t] / kKwhPerMwh;
        b.upper_cum[t] = hi[t] / kKwhPerMwh;
        b.cap[t] = req.cap(t) / kKwhPerMwh;
    }
    return b;
}

/**
 * The unreduced inequality system: 24 cumulative lower rows, 24 cumulative
 * upper rows and 24 capacity rows, in that order. Nonnegativity is kept as
 * variable bounds and is not part of the 72 rows.
 */
inline std::vector<ipm::Row> canonical_rows(const ScheduleBounds& b, int offset = 0) {
    std::vector<ipm::Row> rows;
    rows.reserve(3 * kHours);
    for (int t = 0; t < kHours; ++t) {
        ipm::Row r;
        for (int j = 0; j <= t; ++j) {
            r.idx.push_back(offset + j);
            r.coef.push_back(-1.0);
        }
        r.rhs = -b.lower_cum[t];
        rows.push_back(std::move(r));
    }
    for (int t = 0; t < kHours; ++t) {
        ipm::Row r;
        for (int j = 0; j <= t; ++j) {
            r.idx.push_back(offset + j);
            r.coef.push_back(1.0);
        }
        r.rhs = b.upper_cum[t];
        rows.push_back(std::move(r));
    }
    for (int t = 0; t < kHours; ++t) {
        rows.push_back({{offset + t}, {1.0}, b.cap[t]});
    }
    return rows;
}

/**
 * Throws InfeasibleError naming the first slot where no running total can
 * meet both envelopes given the capacities reachable so far.
 */
inline void check_feasible(const ScheduleBounds& b, double tol = 1e-9) {
    double lo = 0.0;
    double hi = 0.0;
    for (int t = 0; t < kHours; ++t) {
        const double slack = tol * (1.0 + b.upper_cum[t]);
        if (b.lower_cum[t] > b.upper_cum[t] + slack) {
            throw InfeasibleError("cumulative minimum exceeds cumulative maximum at slot " + std::to_string(t), t);
        }
        lo = std::max(lo, b.lower_cum[t]);
        hi = std::min(b.upper_cum[t], hi + b.cap[t]);
        if (lo > hi + slack) {
            throw InfeasibleError("requirements cannot be met by slot " + std::to_string(t) +
                                      " with the available charging capacity",
                                  t);
        }
    }
}

/// Largest violation (MWh) of the cumulative, capacity and sign constraints.
inline double constraint_violation(const ScheduleBounds& b, const EnergySchedule& e) {
    double worst = 0.0;
    double run = 0.0;
    for (int t = 0; t < kHours; ++t) {
        run += e[t];
        worst = std::max({worst, b.lower_cum[t] - run, run - b.upper_cum[t], e[t] - b.cap[t], -e[t]});
    }
    return worst;
}

namespace detail {

inline constexpr double kFixedCap = 1e-12;  // MWh; slots below this cannot buy

/**
 * Presolved rows for one constrained block. `pos(t)` maps slot t of the
 * block to its IPM coordinate, or -1 when the slot is fixed at zero.
 * Cumulative rows sharing the same free support are merged; pairs with equal
 * bounds become equalities, and rows implied by nonnegativity or capacity
 * are dropped.
 */
template <class Pos>
void append_block_rows(const ScheduleBounds& b, Pos&& pos, ipm::Constraints& c) {
    check_feasible(b);
    std::vector<int> support;
    double cap_sum = 0.0;
    int t = 0;
    while (t < kHours) {
        if (pos(t) >= 0) {
            support.push_back(pos(t));
            cap_sum += b.cap[t];
            c.ineq.push_back({{pos(t)}, {1.0}, b.cap[t]});
            c.ineq.push_back({{pos(t)}, {-1.0}, 0.0});
        }
        // Extend the group over following fixed slots: they share this support.
        double lower = b.lower_cum[t];
        double upper = b.upper_cum[t];
        int u = t + 1;
        while (u < kHours && pos(u) < 0) {
            lower = std::max(lower, b.lower_cum[u]);
            upper = std::min(upper, b.upper_cum[u]);
            ++u;
        }
        t = u;
        if (support.empty()) {
            continue;
        }
        const std::vector<double> ones(support.size(), 1.0);
        if (upper - lower <= 1e-9 * (1.0 + std::abs(upper))) {
            c.eq.push_back({support, ones, 0.5 * (lower + upper)});
            continue;
        }
        if (lower > 0.0) {
            std::vector<double> neg(support.size(), -1.0);
            c.ineq.push_back({support, std::move(neg), -lower});
        }
        if (upper < cap_sum) {
            c.ineq.push_back({support, ones, upper});
        }
    }
}

/// sum_t E_t * price_t(E_t) plus a vanishing tie-break weight * |E|^2.
class ScheduleCost {
public:
    ScheduleCost(const MarketDay& market, std::vector<int> slots, double tie_break)
        : market_(market), slots_(std::move(slots)), tie_(tie_break) {}

    double value(const Eigen::VectorXd& x) const {
        double v = 0.0;
        for (std::size_t k = 0; k < slots_.size(); ++k) {
            const double e = x(static_cast<Eigen::Index>(k));
            v += market_.curves[slots_[k]].hourly_cost(e) + tie_ * e * e;
        }
        return v;
    }

    void gradient(const Eigen::VectorXd& x, Eigen::VectorXd& g) const {
        g.resize(x.size());
        for (std::size_t k = 0; k < slots_.size(); ++k) {
            const auto& c = market_.curves[slots_[k]];
            const double e = x(static_cast<Eigen::Index>(k));
            g(static_cast<Eigen::Index>(k)) = c.price(e) + e * c.slope(e) + 2.0 * tie_ * e;
        }
    }

    void hessian(const Eigen::VectorXd& x, ipm::Triplets& out) const {
        for (std::size_t k = 0; k < slots_.size(); ++k) {
            const auto& c = market_.curves[slots_[k]];
            const double e = std::max(0.0, x(static_cast<Eigen::Index>(k)));
            const int i = static_cast<int>(k);
            out.emplace_back(i, i, 6.0 * c.a * e + 2.0 * c.b + 2.0 * tie_);
        }
    }

private:
    const MarketDay& market_;
    std::vector<int> slots_;
    double tie_;
};

}  // namespace detail

/// Weight of the |E|^2 tie-break added to bidding objectives.
inline constexpr double kTieBreakWeight = 1e-9;

inline SolveReport solve_individual(const BidProblem& problem, double tol = 1e-8) {
    if (!problem.market) {
        throw DomainError("solve_individual: problem has no market");
    }
    if (!(tol > 0.0)) {
        throw DomainError("solve_individual: tol must be positive");
    }
    const ScheduleBounds b = schedule_bounds(problem.requirements);
    std::vector<int> slots;
    std::array<int, kHours> pos{};
    for (int t = 0; t < kHours; ++t) {
        pos[t] = b.cap[t] > detail::kFixedCap ? static_cast<int>(slots.size()) : -1;
        if (pos[t] >= 0) {
            slots.push_back(t);
        }
    }
    ipm::Constraints cons;
    cons.dim = static_cast<int>(slots.size());
    detail::append_block_rows(b, [&](int t) { return pos[t]; }, cons);

    const detail::ScheduleCost cost(*problem.market, slots, kTieBreakWeight);
    ipm::Options opt;
    opt.tol = tol;
    // Start from the capacity-weighted spread of the required energy.
    Eigen::VectorXd x0(cons.dim);
    double cap_total = 0.0;
    for (int t : slots) cap_total += b.cap[t];
    for (std::size_t k = 0; k < slots.size(); ++k) {
        x0(static_cast<Eigen::Index>(k)) = cap_total > 0.0 ? b.cap[slots[k]] / cap_total * b.lower_cum[kHours - 1] : 0.0;
    }
    const ipm::Result r = ipm::minimize(cost, cons, x0, opt);

    SolveReport rep;
    for (std::size_t k = 0; k < slots.size(); ++k) {
        rep.schedule[slots[k]] = std::max(0.0, r.x(static_cast<Eigen::Index>(k)));
    }
    if (!r.converged) {
        throw SolverError("solve_individual: interior point did not converge",
                          std::vector<double>(rep.schedule.begin(), rep.schedule.end()), r.kkt_residual);
    }
    for (int t = 0; t < kHours; ++t) {
        rep.objective += problem.market->curves[t].hourly_cost(rep.schedule[t]);
    }
    rep.kkt_residual = r.kkt_residual;
    rep.iterations = r.iterations;
    return rep;
}

/// Sum of the aggregators' requirements, all against their shared market.
inline BidProblem combine(std::span<const BidProblem> problems) {
    if (problems.empty()) {
        throw DomainError("combine: no problems");
    }
    BidProblem joint{problems.front().requirements, problems.front().market};
    for (std::size_t i = 1; i < problems.size(); ++i) {
        if (problems[i].market != joint.market && !(problems[i].market && joint.market &&
                                                     *problems[i].market == *joint.market)) {
            throw DomainError("combine: problems must share one market day");
        }
        joint.requirements += problems[i].requirements;
    }
    return joint;
}

/// The centralized optimum over the combined requirements.
inline SolveReport solve_joint(std::span<const BidProblem> problems, double tol = 1e-8) {
    return solve_individual(combine(problems), tol);
}

enum class SplitMode {
    balanced,     ///< closest split to size-proportional shares of the joint schedule
    feasibility,  ///< any feasible split (phase-1 point)
};

namespace detail {

class SplitCost {
public:
    SplitCost(std::vector<double> target) : target_(std::move(target)), weight_(target_.empty() ? 0.0 : 1.0) {}
    static SplitCost zero(std::size_t dim) {
        SplitCost c(std::vector<double>(dim, 0.0));
        c.weight_ = 0.0;
        return c;
    }
    double value(const Eigen::VectorXd& x) const {
        double v = 0.0;
        for (Eigen::Index k = 0; k < x.size(); ++k) {
            const double d = x(k) - target_[static_cast<std::size_t>(k)];
            v += d * d;
        }
        return weight_ * v;
    }
    void gradient(const Eigen::VectorXd& x, Eigen::VectorXd& g) const {
        g.resize(x.size());
        for (Eigen::Index k = 0; k < x.size(); ++k) {
            g(k) = 2.0 * weight_ * (x(k) - target_[static_cast<std::size_t>(k)]);
        }
    }
    void hessian(const Eigen::VectorXd& x, ipm::Triplets& out) const {
        if (weight_ == 0.0) return;
        for (Eigen::Index k = 0; k < x.size(); ++k) {
            out.emplace_back(static_cast<int>(k), static_cast<int>(k), 2.0 * weight_);
        }
    }

private:
    std::vector<double> target_;
    double weight_;
};

}  // namespace detail

/**
 * @brief Splits a joint schedule into per-aggregator schedules.
 *
 * Every returned schedule meets its own aggregator's constraints and the
 * schedules add up to `joint` in every slot.
 */
inline std::vector<EnergySchedule> redistribute(const EnergySchedule& joint, std::span<const BidProblem> problems,
                                                SplitMode mode = SplitMode::balanced) {
    const int n = static_cast<int>(problems.size());
    if (n == 0) {
        throw DomainError("redistribute: no problems");
    }
    std::vector<ScheduleBounds> bounds;
    double need_total = 0.0;
    std::vector<double> need(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        bounds.push_back(schedule_bounds(problems[static_cast<std::size_t>(i)].requirements));
        need[static_cast<std::size_t>(i)] = bounds.back().upper_cum[kHours - 1];
        need_total += need[static_cast<std::size_t>(i)];
    }

    std::vector<std::array<int, kHours>> pos(static_cast<std::size_t>(n));
    std::vector<double> target;
    int dim = 0;
    for (int i = 0; i < n; ++i) {
        const double share = need_total > 0.0 ? need[static_cast<std::size_t>(i)] / need_total : 1.0 / n;
        for (int t = 0; t < kHours; ++t) {
            const bool free = bounds[static_cast<std::size_t>(i)].cap[t] > detail::kFixedCap;
            pos[static_cast<std::size_t>(i)][t] = free ? dim++ : -1;
            if (free) {
                target.push_back(share * joint[t]);
            }
        }
    }

    ipm::Constraints cons;
    cons.dim = dim;
    for (int i = 0; i < n; ++i) {
        const auto& p = pos[static_cast<std::size_t>(i)];
        detail::append_block_rows(bounds[static_cast<std::size_t>(i)], [&](int t) { return p[t]; }, cons);
    }
    for (int t = 0; t < kHours; ++t) {
        ipm::Row r;
        for (int i = 0; i < n; ++i) {
            if (pos[static_cast<std::size_t>(i)][t] >= 0) {
                r.idx.push_back(pos[static_cast<std::size_t>(i)][t]);
                r.coef.push_back(1.0);
            }
        }
        if (r.idx.empty()) {
            if (std::abs(joint[t]) > 1e-9) {
                throw SolverError("redistribute: joint schedule buys in slot " + std::to_string(t) +
                                      " where no aggregator can charge",
                                  {}, std::abs(joint[t]));
            }
            continue;
        }
        r.rhs = joint[t];
        cons.eq.push_back(std::move(r));
    }

    const detail::SplitCost cost =
        mode == SplitMode::balanced ? detail::SplitCost(target) : detail::SplitCost::zero(target.size());
    Eigen::VectorXd x0 = Eigen::Map<const Eigen::VectorXd>(target.data(), static_cast<Eigen::Index>(target.size()));
    const ipm::Result r = ipm::minimize(cost, cons, x0);

    std::vector<EnergySchedule> out(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        for (int t = 0; t < kHours; ++t) {
            const int k = pos[static_cast<std::size_t>(i)][t];
            out[static_cast<std::size_t>(i)][t] = k >= 0 ? std::max(0.0, r.x(k)) : 0.0;
        }
    }
    // The joint optimum usually sits on shared caps, leaving the split set
    // without interior; a loosely converged iterate is accepted when it
    // checks out below.
    if (!r.converged && !(r.kkt_residual <= 1e-5)) {
        std::vector<double> flat;
        for (const auto& s : out) flat.insert(flat.end(), s.begin(), s.end());
        throw SolverError("redistribute: no feasible split found", std::move(flat), r.kkt_residual);
    }
    // Close the per-slot balance to rounding: move the residual onto the largest share.
    for (int t = 0; t < kHours; ++t) {
        double total = 0.0;
        int largest = 0;
        for (int i = 0; i < n; ++i) {
            total += out[static_cast<std::size_t>(i)][t];
            if (out[static_cast<std::size_t>(i)][t] > out[static_cast<std::size_t>(largest)][t]) largest = i;
        }
        auto& e = out[static_cast<std::size_t>(largest)][t];
        e = std::max(0.0, e + (joint[t] - total));
    }
    for (int i = 0; i < n; ++i) {
        const double v = constraint_violation(bounds[static_cast<std::size_t>(i)], out[static_cast<std::size_t>(i)]);
        if (v > 1e-10) {  // MWh
            std::vector<double> flat;
            for (const auto& sched : out) flat.insert(flat.end(), sched.begin(), sched.end());
            throw SolverError("redistribute: split violates aggregator " + std::to_string(i) + " constraints by " +
                                  std::to_string(v) + " MWh",
                              std::move(flat), v, i);
        }
    }
    return out;
}

/// Local update of one ADMM agent.
struct LocalSolution {
    Eigen::VectorXd proposal;  ///< 24n, block j at [24j, 24j+24)
    double objective = 0.0;    ///< local augmented objective at the proposal
    double kkt_residual = 0.0;
    int iterations = 0;
};

namespace detail {

/**
 * Augmented local objective of agent i over a 24n copy E' of every schedule:
 *   sum_t E'_{i,t} * price_t(sum_j E'_{j,t}) + xi.(E' - Eg) + rho/2 |E' - Eg|^2.
 */
class LocalCost {
public:
    LocalCost(const MarketDay& market, int agent, int n, const Eigen::VectorXd& global,
              const Eigen::VectorXd& dual, double rho)
        : market_(market), i_(agent), n_(n), eg_(global), xi_(dual), rho_(rho) {}

    double value(const Eigen::VectorXd& x) const {
        const Eigen::VectorXd d = x - eg_;
        double v = xi_.dot(d) + 0.5 * rho_ * d.squaredNorm();
        for (int t = 0; t < kHours; ++t) {
            const double own = x(i_ * kHours + t);
            if (own != 0.0) {
                v += own * market_.curves[t].price(total(x, t));
            }
        }
        return v;
    }

    void gradient(const Eigen::VectorXd& x, Eigen::VectorXd& g) const {
        g = xi_ + rho_ * (x - eg_);
        for (int t = 0; t < kHours; ++t) {
            const auto& c = market_.curves[t];
            const double s = total(x, t);
            const double own = x(i_ * kHours + t);
            const double cross = own * c.slope(s);
            for (int j = 0; j < n_; ++j) {
                g(j * kHours + t) += cross;
            }
            g(i_ * kHours + t) += c.price(s);
        }
    }

    void hessian(const Eigen::VectorXd& x, ipm::Triplets& out) const {
        for (int t = 0; t < kHours; ++t) {
            const auto& c = market_.curves[t];
            const double s = std::max(0.0, total(x, t));
            const double own = std::max(0.0, x(i_ * kHours + t));
            const double common = 2.0 * c.a * own;
            const double slope = c.slope(s);
            for (int j = 0; j < n_; ++j) {
                for (int k = 0; k < n_; ++k) {
                    double v = common;
                    if (j == i_) v += slope;
                    if (k == i_) v += slope;
                    if (j == k) v += rho_;
                    if (v != 0.0) out.emplace_back(j * kHours + t, k * kHours + t, v);
                }
            }
        }
    }

private:
    double total(const Eigen::VectorXd& x, int t) const {
        double s = 0.0;
        for (int j = 0; j < n_; ++j) s += x(j * kHours + t);
        return s;
    }

    const MarketDay& market_;
    int i_;
    int n_;
    const Eigen::VectorXd& eg_;
    const Eigen::VectorXd& xi_;
    double rho_;
};

}  // namespace detail

namespace detail {

/**
 * Exact minimizer of the foreign blocks with the own block held fixed.
 * Per slot, with own volume o and u_j = Eg_j - xi_j/rho, the optimum is
 * y_j = max(0, u_j - c) where c = o * slope(o + sum_j y_j) / rho; the right
 * side falls as c grows, so c is found by bisection. Interior iterates
 * approach weakly active zero bounds only like sqrt(mu), which this removes.
 */
inline void polish_foreign_blocks(const MarketDay& market, int agent, int n, const Eigen::VectorXd& global,
                                  const Eigen::VectorXd& dual, double rho, Eigen::VectorXd& x) {
    std::vector<double> u(static_cast<std::size_t>(n));
    for (int t = 0; t < kHours; ++t) {
        const auto& curve = market.curves[t];
        const double o = x(agent * kHours + t);
        for (int j = 0; j < n; ++j) {
            u[static_cast<std::size_t>(j)] = global(j * kHours + t) - dual(j * kHours + t) / rho;
        }
        auto foreign_sum = [&](double c) {
            double sum = 0.0;
            for (int j = 0; j < n; ++j) {
                if (j != agent) sum += std::max(0.0, u[static_cast<std::size_t>(j)] - c);
            }
            return sum;
        };
        // g(c) = c - o * slope(o + S(c)) / rho is increasing in c.
        auto g = [&](double c) { return c - o * curve.slope(o + foreign_sum(c)) / rho; };
        double lo = o * curve.slope(o) / rho;
        double hi = std::max(lo, o * curve.slope(o + foreign_sum(lo)) / rho);
        double c = lo;
        if (g(lo) < 0.0) {
            for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, hi); ++it) {
                const double mid = 0.5 * (lo + hi);
                (g(mid) < 0.0 ? lo : hi) = mid;
            }
            c = 0.5 * (lo + hi);
        }
        if (!(o > 0.0)) c = 0.0;
        for (int j = 0; j < n; ++j) {
            if (j != agent) x(j * kHours + t) = std::max(0.0, u[static_cast<std::size_t>(j)] - c);
        }
    }
}

}  // namespace detail

/**
 * @brief Agent i's consensus-ADMM local step.
 *
 * Minimizes the augmented local objective with agent i's own block held to
 * its requirement constraints and every other block only nonnegative. In
 * slots where agent i cannot buy, its price term vanishes and the other
 * blocks take their closed-form value max(0, Eg - xi/rho).
 */
inline LocalSolution solve_local_subproblem(int agent, const Eigen::VectorXd& global, const Eigen::VectorXd& dual,
                                            const BidProblem& problem, int n, double rho, double tol = 1e-8,
                                            const Eigen::VectorXd* warm = nullptr) {
    if (!(rho > 0.0)) {
        throw DomainError("solve_local_subproblem: rho must be positive");
    }
    if (agent < 0 || agent >= n || global.size() != n * kHours || dual.size() != n * kHours) {
        throw DomainError("solve_local_subproblem: dimension mismatch");
    }
    if (!problem.market) {
        throw DomainError("solve_local_subproblem: problem has no market");
    }
    const ScheduleBounds b = schedule_bounds(problem.requirements);
    const int dim = n * kHours;

    Eigen::VectorXd base = (global - dual / rho).cwiseMax(0.0);
    std::vector<int> free;
    for (int t = 0; t < kHours; ++t) {
        if (b.cap[t] > detail::kFixedCap) {
            for (int j = 0; j < n; ++j) free.push_back(j * kHours + t);
        } else {
            base(agent * kHours + t) = 0.0;
        }
    }
    std::sort(free.begin(), free.end());

    const detail::LocalCost cost(*problem.market, agent, n, global, dual, rho);
    const ipm::Restricted<detail::LocalCost> restricted(cost, base, free);

    ipm::Constraints cons;
    cons.dim = static_cast<int>(free.size());
    const int own = agent * kHours;
    detail::append_block_rows(b, [&](int t) { return restricted.position(own + t); }, cons);
    for (int j = 0; j < n; ++j) {
        if (j == agent) continue;
        for (int t = 0; t < kHours; ++t) {
            const int k = restricted.position(j * kHours + t);
            if (k >= 0) cons.ineq.push_back({{k}, {-1.0}, 0.0});
        }
    }

    ipm::Options opt;
    opt.tol = tol;
    Eigen::VectorXd x0 = restricted.restrict(warm && warm->size() == dim ? *warm : base);
    const ipm::Result r = ipm::minimize(restricted, cons, x0, opt);

    LocalSolution out;
    out.proposal = restricted.expand(r.x);
    // Interior iterates may sit a rounding error below zero.
    out.proposal = out.proposal.cwiseMax(0.0);
    if (!r.converged) {
        throw SolverError("solve_local_subproblem: interior point did not converge",
                          std::vector<double>(out.proposal.data(), out.proposal.data() + dim), r.kkt_residual,
                          agent);
    }
    detail::polish_foreign_blocks(*problem.market, agent, n, global, dual, rho, out.proposal);
    out.objective = cost.value(out.proposal);
    out.kkt_residual = r.kkt_residual;
    out.iterations = r.iterations;
    return out;
}

}  // namespace evadmm

#include <cmath>
#include <memory>

#include <gtest/gtest.h>

#include <evadmm/admm.hpp>
#include <evadmm/bidding.hpp>
#include <evadmm/scenario.hpp>

#include "oracles.hpp"
#include "props.hpp"

using namespace evadmm;

namespace {

// Cumulative rows are checked in kWh, as the fleet reports them.
constexpr double kViolationKwh = 1e-7;

double violation_kwh(const FleetRequirements& r, const EnergySchedule& e) {
    return constraint_violation(schedule_bounds(r), e) * kKwhPerMwh;
}

const DayInstance& standard_day() {
    static const DayInstance inst = [] {
        Scenario s;
        s.evs = {1500, 1500, 1500};
        return build_day(s, 0);
    }();
    return inst;
}

EnergySchedule mix(const FleetRequirements& r, double w) {
    EnergySchedule e{};
    for (int t = 0; t < kHours; ++t) e[t] = (w * r.r_min[t] + (1.0 - w) * r.r_max[t]) / kKwhPerMwh;
    return e;
}

}  // namespace

TEST(ScheduleBounds, ConvertsKwhToMwhOnce) {
    const auto r = oracles::toy_requirements({0.5, 1.0}, {1.0, 0.5}, {1.0, 1.0});
    const auto b = schedule_bounds(r);
    EXPECT_DOUBLE_EQ(b.lower_cum[1], 1.5);
    EXPECT_DOUBLE_EQ(b.upper_cum[0], 1.0);
    EXPECT_DOUBLE_EQ(b.cap[0], 1.0);
}

TEST(CanonicalRows, SeventyTwoRows) {
    const auto b = schedule_bounds(standard_day().problems[0].requirements);
    EXPECT_EQ(canonical_rows(b).size(), 72u);
}

TEST(SolveIndividual, ConstantPricesObjective) {
    auto market = oracles::toy_market({});
    MarketDay flat = *market;
    for (auto& c : flat.curves) c = {c.hour, 0.0, 0.0, 30.0};
    const BidProblem p{standard_day().problems[0].requirements, std::make_shared<const MarketDay>(flat)};
    const auto rep = solve_individual(p);
    const double total = sum(p.requirements.r_min) / kKwhPerMwh;
    EXPECT_NEAR(rep.objective, 30.0 * total, 1e-6 * 30.0 * total);
    EXPECT_LE(violation_kwh(p.requirements, rep.schedule), kViolationKwh);
}

TEST(SolveIndividual, TwoHourToy) {
    const auto market = oracles::toy_market({{0, 0, 0, 10}, {1, 0, 0, 20}});
    const BidProblem p{oracles::toy_requirements({0, 1}, {1, 1}, {1, 1}), market};
    const auto rep = solve_individual(p);
    EXPECT_NEAR(rep.schedule[0], 1.0, 1e-6);
    EXPECT_NEAR(rep.schedule[1], 0.0, 1e-6);
    EXPECT_NEAR(rep.objective, 10.0, 1e-5);
}

TEST(SolveIndividual, ThreeHourCubicToy) {
    const auto market = oracles::toy_market({{0, 1, 0, 0}, {1, 1, 0, 0}, {2, 1, 0, 0}});
    const BidProblem p{oracles::toy_requirements({0, 0, 3}, {3, 0, 0}, {3, 3, 3}), market};
    const auto rep = solve_individual(p);
    for (int t = 0; t < 3; ++t) EXPECT_NEAR(rep.schedule[t], 1.0, 1e-6);
    EXPECT_NEAR(rep.objective, 3.0, 1e-5);
    EXPECT_LE(rep.objective, oracles::grid_min_cost(p, 0.01) + 1e-9);
}

TEST(SolveIndividual, InfeasibleNamesSlot) {
    const auto market = oracles::toy_market({});
    auto r = oracles::toy_requirements({0, 0, 0, 0, 0, 2}, {0, 0, 0, 0, 0, 2}, {0, 0, 0, 0, 0, 1});
    try {
        solve_individual({r, market});
        FAIL() << "expected InfeasibleError";
    } catch (const InfeasibleError& e) {
        EXPECT_EQ(e.hour(), 5);
    }
}

TEST(SolveIndividual, ReportsKktWithinTolerance) {
    const auto rep = solve_individual(standard_day().problems[1], 1e-8);
    EXPECT_LE(rep.kkt_residual, 1e-8);
    EXPECT_GT(rep.iterations, 0);
}

TEST(SolveJoint, SingleAggregatorEqualsIndividual) {
    const auto& p = standard_day().problems[0];
    const auto a = solve_joint(std::span(&p, 1));
    const auto b = solve_individual(p);
    EXPECT_EQ(a.schedule, b.schedule);
    EXPECT_EQ(a.objective, b.objective);
}

TEST(SolveJoint, RejectsDifferentMarkets) {
    Scenario s;
    const auto d0 = build_day(s, 0);
    const auto d1 = build_day(s, 1);
    std::vector<BidProblem> ps{d0.problems[0], d1.problems[1]};
    EXPECT_THROW(solve_joint(ps), DomainError);
}

// Stacking individually optimal schedules ignores the shared price impact.
TEST(SolveJoint, NoWorseThanIndependentBidding) {
    const auto market = oracles::toy_market({{0, 0, 8, 30}, {1, 0, 8, 35}, {2, 0, 8, 40}});
    const BidProblem one{oracles::toy_requirements({0, 0, 1}, {1, 0, 0}, {1, 1, 1}), market};
    const std::vector<BidProblem> two{one, one};
    const auto joint = solve_joint(two);
    const auto ind = solve_individual(one);
    const std::vector<HourlyVector> stacked{ind.schedule, ind.schedule};
    const double independent = evaluate_cost(stacked, *market, 0) + evaluate_cost(stacked, *market, 1);
    EXPECT_LE(joint.objective, independent + 1e-9);
}

TEST(SolveJoint, MatchesBruteForceOnTwoAggregatorToys) {
    props::for_all(31, 20, [](auto& rng) {
        const auto market = oracles::tiny_market(rng);
        const std::vector<BidProblem> ps{oracles::tiny_aggregator(rng, market), oracles::tiny_aggregator(rng, market)};
        const auto joint = solve_joint(ps);
        const double brute = oracles::grid_min_cost(combine(ps), 0.1);
        EXPECT_LE(joint.objective, brute + 1e-6);
        EXPECT_NEAR(joint.objective, oracles::grid_min_cost(combine(ps), 0.05), 1e-2 + 0.0);
    });
}

TEST(SolveJoint, BeatsHandConstructedAllocationsProperty) {
    const auto& day = standard_day();
    const auto joint = solve_joint(day.problems);
    props::for_all(32, props::kCases, [&](auto& rng) {
        std::vector<HourlyVector> alloc;
        for (const auto& p : day.problems) alloc.push_back(mix(p.requirements, props::uniform(rng, 0.0, 1.0)));
        double cost = 0.0;
        for (std::size_t i = 0; i < alloc.size(); ++i) cost += evaluate_cost(alloc, *day.market, i);
        EXPECT_LE(joint.objective, cost + 1e-9 * cost);
    });
}

TEST(SolveJoint, FeasibleWithinKwhTolerance) {
    const auto& day = standard_day();
    const auto joint = solve_joint(day.problems);
    EXPECT_LE(violation_kwh(combine(day.problems).requirements, joint.schedule), kViolationKwh);
}

TEST(ScheduleCost, ConvexAlongFeasibleSegmentsProperty) {
    const auto& day = standard_day();
    const auto& req = day.problems[0].requirements;
    const auto opt = solve_individual(day.problems[0]).schedule;
    auto f = [&](const EnergySchedule& e) {
        double v = 0.0;
        for (int t = 0; t < kHours; ++t) v += day.market->curves[t].hourly_cost(e[t]);
        return v;
    };
    props::for_all(33, props::kCases, [&](auto& rng) {
        auto pick = [&]() {
            EnergySchedule m = mix(req, props::uniform(rng, 0.0, 1.0));
            const double w = props::uniform(rng, 0.0, 1.0);
            for (int t = 0; t < kHours; ++t) m[t] = w * m[t] + (1.0 - w) * opt[t];
            return m;
        };
        const auto x = pick();
        const auto y = pick();
        const double th = props::uniform(rng, 0.0, 1.0);
        EnergySchedule z{};
        for (int t = 0; t < kHours; ++t) z[t] = th * x[t] + (1.0 - th) * y[t];
        EXPECT_LE(f(z), th * f(x) + (1.0 - th) * f(y) + 1e-9);
    });
}

TEST(Redistribute, SingleAggregatorUnchanged) {
    const auto& p = standard_day().problems[0];
    const auto joint = solve_individual(p).schedule;
    const auto split = redistribute(joint, std::span(&p, 1));
    for (int t = 0; t < kHours; ++t) EXPECT_NEAR(split[0][t], joint[t], 1e-9);
}

TEST(Redistribute, SymmetricSplitOfIdenticalAggregators) {
    const auto& p = standard_day().problems[0];
    const std::vector<BidProblem> two{p, p};
    const auto joint = solve_joint(two).schedule;
    const auto split = redistribute(joint, two);
    for (int t = 0; t < kHours; ++t) {
        EXPECT_NEAR(split[0][t], joint[t] / 2, 1e-6);
        EXPECT_NEAR(split[0][t] + split[1][t], joint[t], 1e-9);
    }
}

TEST(Redistribute, TableOneFleetTwice) {
    EvSession ev;
    ev.t0 = clock_to_slot(15);
    ev.td = clock_to_slot(21);
    ev.soc0 = 4.0;
    ev.socd = 12.0;
    ev.p_max = 3.0;
    ev.efficiency = 1.0;
    const std::vector<EvSession> sessions(400, ev);
    const BidProblem p{aggregate(sessions), standard_day().market};
    for (SplitMode mode : {SplitMode::balanced, SplitMode::feasibility}) {
        const std::vector<BidProblem> two{p, p};
        const auto joint = solve_joint(two).schedule;
        const auto split = redistribute(joint, two, mode);
        for (const auto& s : split) EXPECT_LE(violation_kwh(p.requirements, s), kViolationKwh);
        for (int t = 0; t < kHours; ++t) EXPECT_NEAR(split[0][t] + split[1][t], joint[t], 1e-9);
    }
}

TEST(Redistribute, StandardDayEveryConstraintFamily) {
    const auto& day = standard_day();
    const auto joint = solve_joint(day.problems).schedule;
    const auto split = redistribute(joint, day.problems);
    for (std::size_t i = 0; i < split.size(); ++i) {
        EXPECT_LE(violation_kwh(day.problems[i].requirements, split[i]), kViolationKwh) << "aggregator " << i;
    }
    for (int t = 0; t < kHours; ++t) {
        double s = 0.0;
        for (const auto& e : split) s += e[t];
        EXPECT_NEAR(s, joint[t], 1e-9);
    }
}

TEST(LocalCost, GradientMatchesFiniteDifferencesProperty) {
    const auto& day = standard_day();
    const int n = 3;
    props::for_all(34, props::kCases, [&](auto& rng) {
        Eigen::VectorXd x(n * kHours), zero = Eigen::VectorXd::Zero(n * kHours);
        for (Eigen::Index k = 0; k < x.size(); ++k) x(k) = props::uniform(rng, 0.0, 2.0);
        const int agent = props::integer(rng, 0, n - 1);
        // rho = 0, xi = 0: exactly sum_t E_i,t * price_t(sum_j E_j,t).
        const detail::LocalCost f(*day.market, agent, n, zero, zero, 0.0);
        Eigen::VectorXd g;
        f.gradient(x, g);
        for (Eigen::Index k = 0; k < x.size(); ++k) {
            const double h = 1e-5 * std::max(1.0, std::abs(x(k)));
            Eigen::VectorXd xp = x, xm = x;
            xp(k) += h;
            xm(k) -= h;
            const double fd = (f.value(xp) - f.value(xm)) / (2.0 * h);
            ASSERT_NEAR(g(k), fd, 1e-5 * std::max(1.0, std::abs(fd))) << "coordinate " << k;
        }
    });
}

TEST(LocalCost, HessianMatchesGradientDifferences) {
    const auto& day = standard_day();
    const int n = 2;
    std::mt19937_64 rng(35);
    Eigen::VectorXd x(n * kHours), eg(n * kHours), xi(n * kHours);
    for (Eigen::Index k = 0; k < x.size(); ++k) {
        x(k) = props::uniform(rng, 0.1, 2.0);
        eg(k) = props::uniform(rng, 0.0, 2.0);
        xi(k) = props::uniform(rng, -5.0, 5.0);
    }
    const detail::LocalCost f(*day.market, 1, n, eg, xi, 3.0);
    ipm::Triplets trip;
    f.hessian(x, trip);
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(x.size(), x.size());
    for (const auto& t : trip) H(t.row(), t.col()) += t.value();
    for (Eigen::Index k = 0; k < x.size(); ++k) {
        const double h = 1e-6;
        Eigen::VectorXd xp = x, xm = x, gp, gm;
        xp(k) += h;
        xm(k) -= h;
        f.gradient(xp, gp);
        f.gradient(xm, gm);
        const Eigen::VectorXd col = (gp - gm) / (2.0 * h);
        EXPECT_LE((col - H.col(k)).lpNorm<Eigen::Infinity>(), 1e-5) << "column " << k;
    }
}

TEST(LocalSubproblem, LargeRhoIsProjection) {
    const auto& day = standard_day();
    const int n = 2;
    const auto& p = day.problems[0];
    const auto b = schedule_bounds(p.requirements);
    std::mt19937_64 rng(36);
    Eigen::VectorXd eg(n * kHours), xi = Eigen::VectorXd::Zero(n * kHours);
    for (Eigen::Index k = 0; k < eg.size(); ++k) eg(k) = props::uniform(rng, -0.5, 1.5) * b.cap[k % kHours];
    const double rho = 1e6;
    const auto sol = solve_local_subproblem(0, eg, xi, p, n, rho);

    Eigen::MatrixXd A;
    Eigen::VectorXd c;
    oracles::schedule_polyhedron(b, A, c);
    const Eigen::VectorXd own = oracles::hildreth_project(eg.head(kHours), A, c);
    const Eigen::VectorXd other = eg.tail(kHours).cwiseMax(0.0);
    EXPECT_LE((sol.proposal.head(kHours) - own).norm(), 1e-3);
    EXPECT_LE((sol.proposal.tail(kHours) - other).norm(), 1e-3);
}

TEST(LocalSubproblem, SingleAgentFixedPointAtIndividualOptimum) {
    const auto& p = standard_day().problems[2];
    const auto opt = solve_individual(p, 1e-10);
    Eigen::VectorXd eg(kHours);
    for (int t = 0; t < kHours; ++t) eg(t) = opt.schedule[t];
    const auto sol = solve_local_subproblem(0, eg, Eigen::VectorXd::Zero(kHours), p, 1, 1.0, 1e-10);
    EXPECT_LE((sol.proposal - eg).lpNorm<Eigen::Infinity>(), 1e-6);
}

TEST(LocalSubproblem, OwnBlockFeasibleAndDescentProperty) {
    const auto& day = standard_day();
    const int n = 3;
    props::for_all(37, 100, [&](auto& rng) {
        const int agent = props::integer(rng, 0, n - 1);
        const auto& p = day.problems[static_cast<std::size_t>(agent)];
        const auto b = schedule_bounds(p.requirements);
        Eigen::VectorXd eg(n * kHours), xi(n * kHours);
        for (Eigen::Index k = 0; k < eg.size(); ++k) {
            eg(k) = props::uniform(rng, 0.0, 1.0) * b.cap[k % kHours];
            xi(k) = props::uniform(rng, -2.0, 2.0);
        }
        const double rho = auto_rho(3.0, day.problems);
        const auto sol = solve_local_subproblem(agent, eg, xi, p, n, rho);
        EnergySchedule own{};
        for (int t = 0; t < kHours; ++t) own[t] = sol.proposal(agent * kHours + t);
        EXPECT_LE(violation_kwh(p.requirements, own), kViolationKwh);
        EXPECT_GE(sol.proposal.minCoeff(), 0.0);
        // Descent sanity: no worse than E_global with the own block projected to feasibility.
        Eigen::MatrixXd A;
        Eigen::VectorXd c;
        oracles::schedule_polyhedron(b, A, c);
        Eigen::VectorXd ref = eg;
        ref.segment(agent * kHours, kHours) = oracles::hildreth_project(eg.segment(agent * kHours, kHours), A, c, 4000, 1e-11);
        const detail::LocalCost f(*day.market, agent, n, eg, xi, rho);
        EXPECT_LE(sol.objective, f.value(ref) + 1e-6 * std::max(1.0, std::abs(f.value(ref))));
    });
}

TEST(LocalSubproblem, TwoAgentToyMatchesGridSearch) {
    const auto market = oracles::toy_market({{0, 1.0, 2.0, 30}, {1, 0.5, 1.0, 20}, {2, 1.0, 1.5, 25}});
    const BidProblem p{oracles::toy_requirements({0, 0.2, 0.3}, {0.3, 0.2, 0}, {0.5, 0.5, 0.5}), market};
    const int n = 2;
    const double rho = 40.0;
    for (bool from_zero : {true, false}) {
        Eigen::VectorXd eg = Eigen::VectorXd::Zero(n * kHours), xi = Eigen::VectorXd::Zero(n * kHours);
        if (!from_zero) {
            const double g[6] = {0.1, 0.2, 0.3, 0.25, 0.1, 0.05};
            const double d[6] = {-2.0, 1.0, 0.5, 3.0, -1.0, 0.0};
            for (int k = 0; k < 3; ++k) {
                eg(k) = g[k];
                eg(kHours + k) = g[3 + k];
                xi(k) = d[k];
                xi(kHours + k) = d[3 + k];
            }
        }
        const auto sol = solve_local_subproblem(0, eg, xi, p, n, rho, 1e-10);
        const detail::LocalCost f(*market, 0, n, eg, xi, rho);
        const auto b = schedule_bounds(p.requirements);
        const double step = 0.05;
        double best = 1e300;
        Eigen::VectorXd arg, x = Eigen::VectorXd::Zero(n * kHours);
        for (int a0 = 0; a0 <= 10; ++a0)
            for (int a1 = 0; a1 <= 10; ++a1)
                for (int a2 = 0; a2 <= 10; ++a2) {
                    if (!oracles::feasible(b, {a0 * step, a1 * step, a2 * step}, 1e-9)) continue;
                    x(0) = a0 * step;
                    x(1) = a1 * step;
                    x(2) = a2 * step;
                    for (int o0 = 0; o0 <= 10; ++o0)
                        for (int o1 = 0; o1 <= 10; ++o1)
                            for (int o2 = 0; o2 <= 10; ++o2) {
                                x(kHours) = o0 * step;
                                x(kHours + 1) = o1 * step;
                                x(kHours + 2) = o2 * step;
                                const double v = f.value(x);
                                if (v < best) {
                                    best = v;
                                    arg = x;
                                }
                            }
                }
        // The exact minimizer is no worse than any lattice point, and within half a step of the best one.
        EXPECT_LE(sol.objective, best + 1e-9);
        EXPECT_GE(sol.objective, best - rho * 6 * 0.025 * 0.025);
        EXPECT_LE((sol.proposal - arg).lpNorm<Eigen::Infinity>(), step + 1e-9);
    }
}

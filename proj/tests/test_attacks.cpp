#include <cmath>

#include <gtest/gtest.h>

#include <evadmm/admm.hpp>
#include <evadmm/attacks.hpp>
#include <evadmm/scenario.hpp>

#include "props.hpp"

using namespace evadmm;

namespace {

HourlyVector hours(std::initializer_list<double> head) {
    HourlyVector v{};
    int t = 0;
    for (double x : head) v[t++] = x;
    return v;
}

template <class Rng>
HourlyVector random_block(Rng& rng, double zero_share = 0.3) {
    HourlyVector v{};
    for (double& x : v) x = props::uniform(rng, 0.0, 1.0) < zero_share ? 0.0 : props::uniform(rng, 0.0, 5.0);
    return v;
}

double total(const HourlyVector& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
}

Eigen::VectorXd random_local(std::mt19937_64& rng, int n) {
    Eigen::VectorXd v(n * kHours);
    for (int j = 0; j < n; ++j) set_block(v, j, random_block(rng));
    return v;
}

}  // namespace

TEST(Shift, ZeroStrengthIsIdentity) {
    props::for_all(3, props::kCases, [](auto& rng) {
        const auto b = random_block(rng);
        EXPECT_EQ(apply_shift(b, 0), b);
    });
}

TEST(Shift, RuleOnSmallBlock) {
    // Support {2, 3, 4}, median hour 3, mu = 1: hours <= 2 read hour + 1, hour 3 empties.
    EXPECT_EQ(apply_shift(hours({0, 0, 1, 2, 3}), 1), hours({0, 1, 2, 0, 3}));
    // mu = 2: hours <= 1 read hour + 2, hours 2 and 3 empty.
    EXPECT_EQ(apply_shift(hours({0, 0, 1, 2, 3}), 2), hours({1, 2, 0, 0, 3}));
}

TEST(Shift, EvenSupportUsesLowerMedian) {
    // Support {1, 2, 5, 6}: lower median 2.
    EXPECT_EQ(apply_shift(hours({0, 4, 5, 0, 0, 7, 8}), 1), hours({4, 5, 0, 0, 0, 7, 8}));
}

TEST(Shift, LastHourMovesEarlier) {
    HourlyVector b{};
    b[kHours - 1] = 2.0;
    HourlyVector expect{};
    expect[kHours - 4] = 2.0;
    EXPECT_EQ(apply_shift(b, 3), expect);
}

TEST(Shift, AllZeroUnchanged) {
    EXPECT_EQ(apply_shift(HourlyVector{}, 2), HourlyVector{});
}

TEST(Shift, NegativeStrengthRejected) {
    EXPECT_THROW(apply_shift(hours({1}), -1), DomainError);
}

TEST(Shift, NeverIncreasesEnergyProperty) {
    props::for_all(5, props::kCases, [](auto& rng) {
        const auto b = random_block(rng);
        const int mu = props::integer(rng, 0, 6);
        const auto s = apply_shift(b, mu);
        EXPECT_LE(total(s), total(b) + 1e-12);
        for (double x : s) EXPECT_GE(x, 0.0);
    });
}

TEST(Proportional, Examples) {
    const auto b = hours({3, 3, 0});
    EXPECT_EQ(apply_proportional(b, 0.0), b);
    EXPECT_EQ(apply_proportional(b, 1.0), HourlyVector{});
    const auto p = apply_proportional(b, 0.66);
    EXPECT_NEAR(p[0], 1.02, 1e-12);
    EXPECT_NEAR(p[1], 1.02, 1e-12);
    EXPECT_EQ(p[2], 0.0);
    EXPECT_THROW(apply_proportional(b, 1.5), DomainError);
    EXPECT_THROW(apply_proportional(b, -0.1), DomainError);
}

TEST(Proportional, SupportAndHomogeneityProperty) {
    props::for_all(7, props::kCases, [](auto& rng) {
        const auto b = random_block(rng);
        const double lambda = props::uniform(rng, 0.0, 1.0);
        const double c = props::uniform(rng, 0.1, 10.0);
        const auto p = apply_proportional(b, lambda);
        HourlyVector scaled{};
        for (int t = 0; t < kHours; ++t) scaled[t] = c * b[t];
        const auto ps = apply_proportional(scaled, lambda);
        for (int t = 0; t < kHours; ++t) {
            if (b[t] == 0.0) {
                EXPECT_EQ(p[t], 0.0);
            }
            EXPECT_NEAR(ps[t], c * p[t], 1e-12 * std::max(1.0, std::abs(ps[t])));
        }
    });
}

TEST(Freeze, ReplacesOwnBlockWithIndividualOptimum) {
    const auto opt = hours({0.5, 0.25, 0, 1});
    EXPECT_EQ(apply_freeze(hours({9, 9, 9}), opt), opt);
}

TEST(Adversarial, Endpoints) {
    props::for_all(9, props::kCases, [](auto& rng) {
        const auto b = random_block(rng);
        const auto prev = random_block(rng);
        EXPECT_EQ(apply_adversarial(b, prev, 0.0), b);
        EXPECT_EQ(apply_adversarial(b, prev, 1.0), prev);
    });
}

TEST(Adversarial, BetweenInputsProperty) {
    props::for_all(13, props::kCases, [](auto& rng) {
        const auto b = random_block(rng);
        const auto prev = random_block(rng);
        const auto a = apply_adversarial(b, prev, props::uniform(rng, 0.0, 1.0));
        for (int t = 0; t < kHours; ++t) {
            EXPECT_GE(a[t], std::min(b[t], prev[t]) - 1e-12);
            EXPECT_LE(a[t], std::max(b[t], prev[t]) + 1e-12);
        }
    });
}

TEST(ApplyAttack, ZeroStrengthProportionalIsHonest) {
    std::mt19937_64 rng(1);
    const auto honest = random_local(rng, 3);
    const AttackContext ctx{2, 3, {}, nullptr};
    EXPECT_EQ(apply_attack({AttackVector::Proportional, 0, 0, 0.0}, honest, ctx), honest);
    EXPECT_EQ(apply_attack({AttackVector::ProportionalAll, 0, 0, 0.0}, honest, ctx), honest);
    EXPECT_EQ(apply_attack({AttackVector::ShiftAll, 0, 0, 0.0}, honest, ctx), honest);
}

TEST(ApplyAttack, FreezePropAllComposition) {
    Eigen::VectorXd honest(3 * kHours);
    set_block(honest, 0, hours({1, 2, 3}));
    set_block(honest, 1, hours({0, 4, 0.5}));
    set_block(honest, 2, hours({7, 7, 7}));
    const auto opt = hours({0.2, 0, 0.8});
    const AttackContext ctx{2, 3, {}, &opt};
    const auto out = apply_attack({AttackVector::FreezePropAll, 0, 0, 0.66}, honest, ctx);
    EXPECT_EQ(get_block(out, 2), opt);
    const auto b0 = get_block(out, 0);
    const auto b1 = get_block(out, 1);
    EXPECT_NEAR(b0[0], 0.34, 1e-12);
    EXPECT_NEAR(b0[1], 0.68, 1e-12);
    EXPECT_NEAR(b0[2], 1.02, 1e-12);
    EXPECT_NEAR(b1[1], 1.36, 1e-12);
    EXPECT_NEAR(b1[2], 0.17, 1e-12);
}

TEST(ApplyAttack, TargetedVectorsTouchOnlyTheirBlocksProperty) {
    props::for_all(17, props::kCases, [](auto& rng) {
        const int n = props::integer(rng, 2, 5);
        const int attacker = props::integer(rng, 0, n - 1);
        int target = props::integer(rng, 0, n - 2);
        if (target >= attacker) ++target;
        const auto v = kAllAttackVectors[static_cast<std::size_t>(props::integer(rng, 0, 9))];
        const AttackSpec spec{v, target, props::integer(rng, 0, 3), props::uniform(rng, 0.0, 1.0)};
        const auto honest = random_local(rng, n);
        std::vector<Eigen::VectorXd> prev;
        for (int j = 0; j < n; ++j) prev.push_back(random_local(rng, n));
        const auto opt = random_block(rng);
        const AttackContext ctx{attacker, n, prev, &opt};
        const auto out = apply_attack(spec, honest, ctx);
        for (int j = 0; j < n; ++j) {
            const bool own = j == attacker;
            const bool victim = uses_target(v) ? j == target : (!own && v != AttackVector::Freeze);
            if (own && !is_freeze(v)) {
                EXPECT_EQ(get_block(out, j), get_block(honest, j)) << to_string(v);
            }
            if (own && is_freeze(v)) {
                EXPECT_EQ(get_block(out, j), opt) << to_string(v);
            }
            if (!own && !victim) {
                EXPECT_EQ(get_block(out, j), get_block(honest, j)) << to_string(v);
            }
        }
    });
}

TEST(ApplyAttack, ValidatesSpec) {
    const Eigen::VectorXd honest = Eigen::VectorXd::Zero(2 * kHours);
    const AttackContext ctx{1, 2, {}, nullptr};
    EXPECT_THROW(apply_attack({AttackVector::Shift, 1, 1, 0}, honest, ctx), DomainError);
    EXPECT_THROW(apply_attack({AttackVector::Proportional, 0, 0, 2.0}, honest, ctx), DomainError);
    EXPECT_THROW(apply_attack({AttackVector::Shift, 0, -1, 0}, honest, ctx), DomainError);
    EXPECT_THROW(apply_attack({AttackVector::Freeze, 0, 0, 0}, honest, ctx), DomainError);
    EXPECT_THROW(apply_attack({AttackVector::Adversarial, 0, 0, 0.5}, honest, ctx), DomainError);
    EXPECT_THROW(apply_attack({AttackVector::ShiftAll, 0, 1, 0}, Eigen::VectorXd::Zero(5), ctx), DomainError);
}

TEST(AttackVectorNames, RoundTripAndLooseSpelling) {
    for (AttackVector v : kAllAttackVectors) EXPECT_EQ(parse_attack_vector(to_string(v)), v);
    EXPECT_EQ(parse_attack_vector("freeze-prop-all"), AttackVector::FreezePropAll);
    EXPECT_EQ(parse_attack_vector("SHIFT_ALL"), AttackVector::ShiftAll);
    EXPECT_FALSE(parse_attack_vector("teleport").has_value());
}

TEST(AttackSpec, Strength) {
    EXPECT_EQ((AttackSpec{AttackVector::ShiftAll, 0, 2, 0.5}.strength()), 2.0);
    EXPECT_EQ((AttackSpec{AttackVector::FreezeProp, 0, 2, 0.5}.strength()), 0.5);
    EXPECT_EQ((AttackSpec{AttackVector::Freeze, 0, 2, 0.5}.strength()), 0.0);
}

// Attacks inside the loop: only the attacker's report changes.
class AttackInLoop : public ::testing::Test {
protected:
    static const DayInstance& day() {
        static const DayInstance inst = [] {
            Scenario s;
            s.evs = {1500, 1500, 1500};
            return build_day(s, 0);
        }();
        return inst;
    }
};

TEST_F(AttackInLoop, OtherAgentsAndDualsUntouchedByTheTransform) {
    const auto& d = day();
    const double rho = auto_rho(3.0, d.problems);
    for (AttackVector v : kAllAttackVectors) {
        auto honest = ConsensusState::zeros(3, rho);
        admm_iterate(honest, honest_behaviors(3), d.problems);
        auto attacked = honest;
        const auto hb = honest_behaviors(3);
        const auto ab = attacked_behaviors(3, 2, AttackSpec{v, 0, 1, 0.5});
        const auto before = honest;
        admm_iterate(honest, hb, d.problems);
        admm_iterate(attacked, ab, d.problems);
        for (int j = 0; j < 2; ++j) {
            EXPECT_TRUE(honest.local[static_cast<std::size_t>(j)] == attacked.local[static_cast<std::size_t>(j)])
                << to_string(v);
        }
        // Each dual moves only by rho times its own reported residual.
        for (int j = 0; j < 3; ++j) {
            const auto uj = static_cast<std::size_t>(j);
            const Eigen::VectorXd expect = before.dual[uj] + rho * (attacked.local[uj] - attacked.global);
            EXPECT_LE((attacked.dual[uj] - expect).lpNorm<Eigen::Infinity>(), 1e-9) << to_string(v);
        }
    }
}

TEST_F(AttackInLoop, InactiveOnFirstIteration) {
    const auto& d = day();
    const double rho = auto_rho(3.0, d.problems);
    auto honest = ConsensusState::zeros(3, rho);
    auto attacked = ConsensusState::zeros(3, rho);
    admm_iterate(honest, honest_behaviors(3), d.problems);
    admm_iterate(attacked, attacked_behaviors(3, 2, AttackSpec{AttackVector::ProportionalAll, 0, 0, 0.66}),
                 d.problems);
    EXPECT_TRUE(honest.global == attacked.global);
}

TEST_F(AttackInLoop, FreezeKeepsOwnBlockFixedAcrossIterations) {
    const auto& d = day();
    auto s = ConsensusState::zeros(3, auto_rho(3.0, d.problems));
    const auto behaviors = attacked_behaviors(3, 1, AttackSpec{AttackVector::Freeze, 0, 0, 0});
    for (int k = 0; k < 4; ++k) admm_iterate(s, behaviors, d.problems);
    const auto frozen = get_block(s.local[1], 1);
    admm_iterate(s, behaviors, d.problems);
    EXPECT_EQ(get_block(s.local[1], 1), frozen);
    const auto b = schedule_bounds(d.problems[1].requirements);
    EXPECT_LE(constraint_violation(b, frozen) * kKwhPerMwh, 1e-7);
}

TEST(FreezeSingleAgent, EqualsHonestFixedPoint) {
    Scenario sc;
    sc.evs = {1500};
    const auto d = build_day(sc, 0);
    const auto opt = solve_individual(d.problems[0], 1e-10).schedule;
    Eigen::VectorXd honest(kHours);
    for (int t = 0; t < kHours; ++t) honest(t) = opt[t];
    const AttackContext ctx{0, 1, {}, &opt};
    EXPECT_TRUE(apply_attack({AttackVector::Freeze, 0, 0, 0}, honest, ctx) == honest);
}

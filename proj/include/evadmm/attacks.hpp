#pragma once

/**
 * @file attacks.hpp
 *
 * @brief Strategic deviations from the honest ADMM local update.
 *
 * An attacker computes its honest local proposal and then alters the blocks
 * it reports for other aggregators (and, for Freeze variants, its own block)
 * before the coordinator averages. Only the reported vector changes; the
 * attacker's dual variable and every other agent's state are untouched.
 */

#include <algorithm>
#include <array>
#include <cctype>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "bidding.hpp"
#include "errors.hpp"
#include "hours.hpp"

namespace evadmm {

enum class AttackVector {
    Shift,
    ShiftAll,
    Proportional,
    ProportionalAll,
    Freeze,
    FreezeShift,
    FreezeShiftAll,
    FreezeProp,
    FreezePropAll,
    Adversarial,
};

inline constexpr std::array<AttackVector, 10> kAllAttackVectors = {
    AttackVector::Shift,          AttackVector::ShiftAll,   AttackVector::Proportional,
    AttackVector::ProportionalAll, AttackVector::Freeze,    AttackVector::FreezeShift,
    AttackVector::FreezeShiftAll, AttackVector::FreezeProp, AttackVector::FreezePropAll,
    AttackVector::Adversarial,
};

inline std::string_view to_string(AttackVector v) {
    switch (v) {
        case AttackVector::Shift: return "Shift";
        case AttackVector::ShiftAll: return "ShiftAll";
        case AttackVector::Proportional: return "Proportional";
        case AttackVector::ProportionalAll: return "ProportionalAll";
        case AttackVector::Freeze: return "Freeze";
        case AttackVector::FreezeShift: return "FreezeShift";
        case AttackVector::FreezeShiftAll: return "FreezeShiftAll";
        case AttackVector::FreezeProp: return "FreezeProp";
        case AttackVector::FreezePropAll: return "FreezePropAll";
        case AttackVector::Adversarial: return "Adversarial";
    }
    return "?";
}

/// Case-insensitive; '-' and '_' are ignored, so "freeze-prop-all" works.
inline std::optional<AttackVector> parse_attack_vector(std::string_view name) {
    auto norm = [](std::string_view s) {
        std::string out;
        for (char c : s) {
            if (c != '-' && c != '_') out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        }
        return out;
    };
    const std::string key = norm(name);
    for (AttackVector v : kAllAttackVectors) {
        if (norm(to_string(v)) == key) return v;
    }
    return std::nullopt;
}

inline bool is_freeze(AttackVector v) {
    return v == AttackVector::Freeze || v == AttackVector::FreezeShift || v == AttackVector::FreezeShiftAll ||
           v == AttackVector::FreezeProp || v == AttackVector::FreezePropAll;
}

inline bool is_shift(AttackVector v) {
    return v == AttackVector::Shift || v == AttackVector::ShiftAll || v == AttackVector::FreezeShift ||
           v == AttackVector::FreezeShiftAll;
}

inline bool is_proportional(AttackVector v) {
    return v == AttackVector::Proportional || v == AttackVector::ProportionalAll ||
           v == AttackVector::FreezeProp || v == AttackVector::FreezePropAll;
}

/// Whether the vector acts on one chosen victim rather than on all others.
inline bool uses_target(AttackVector v) {
    return v == AttackVector::Shift || v == AttackVector::Proportional || v == AttackVector::FreezeShift ||
           v == AttackVector::FreezeProp || v == AttackVector::Adversarial;
}

inline bool uses_lambda(AttackVector v) { return is_proportional(v) || v == AttackVector::Adversarial; }

struct AttackSpec {
    AttackVector vector = AttackVector::Proportional;
    int target = 0;
    int mu = 0;           ///< hours, Shift family
    double lambda = 0.0;  ///< Proportional and Adversarial families

    void validate(int attacker, int n) const {
        if (mu < 0) {
            throw DomainError("attack: mu must be >= 0");
        }
        if (!(lambda >= 0.0) || lambda > 1.0) {
            throw DomainError("attack: lambda must be in [0, 1]");
        }
        if (attacker < 0 || attacker >= n) {
            throw DomainError("attack: attacker index out of range");
        }
        if (uses_target(vector)) {
            if (target < 0 || target >= n) {
                throw DomainError("attack: target index out of range");
            }
            if (target == attacker) {
                throw DomainError("attack: target must differ from attacker");
            }
        }
    }

    /// mu for the Shift family, lambda otherwise; 0 for plain Freeze.
    double strength() const {
        if (is_shift(vector)) return mu;
        if (uses_lambda(vector)) return lambda;
        return 0.0;
    }

    bool operator==(const AttackSpec&) const = default;
};

inline HourlyVector get_block(const Eigen::VectorXd& v, int j) {
    HourlyVector out{};
    for (int t = 0; t < kHours; ++t) out[t] = v(j * kHours + t);
    return out;
}

inline void set_block(Eigen::VectorXd& v, int j, const HourlyVector& b) {
    for (int t = 0; t < kHours; ++t) v(j * kHours + t) = b[t];
}

/**
 * Shift: with t* the lower median of the hours holding positive energy,
 * hours t <= t* - mu take the value of hour t + mu, hours in (t* - mu, t*]
 * are emptied and later hours are kept. An all-zero block is returned as is.
 */
inline HourlyVector apply_shift(const HourlyVector& block, int mu) {
    if (mu < 0) {
        throw DomainError("apply_shift: mu must be >= 0");
    }
    std::vector<int> support;
    for (int t = 0; t < kHours; ++t) {
        if (block[t] > 1e-12) support.push_back(t);
    }
    if (support.empty() || mu == 0) {
        return block;
    }
    const int median = support[(support.size() - 1) / 2];
    HourlyVector out = block;
    for (int t = 0; t <= median; ++t) {
        if (t <= median - mu) {
            out[t] = t + mu < kHours ? block[t + mu] : 0.0;
        } else {
            out[t] = 0.0;
        }
    }
    return out;
}

inline HourlyVector apply_proportional(const HourlyVector& block, double lambda) {
    if (!(lambda >= 0.0) || lambda > 1.0) {
        throw DomainError("apply_proportional: lambda must be in [0, 1]");
    }
    HourlyVector out{};
    for (int t = 0; t < kHours; ++t) out[t] = block[t] * (1.0 - lambda);
    return out;
}

/// The attacker's own block is reported as its individually optimal schedule.
inline HourlyVector apply_freeze(const HourlyVector& /*own_block*/, const EnergySchedule& individual_opt) {
    return individual_opt;
}

/// Blend towards the victim's own previous self-proposal.
inline HourlyVector apply_adversarial(const HourlyVector& block, const HourlyVector& target_prev_self, double lambda) {
    if (!(lambda >= 0.0) || lambda > 1.0) {
        throw DomainError("apply_adversarial: lambda must be in [0, 1]");
    }
    HourlyVector out{};
    for (int t = 0; t < kHours; ++t) out[t] = block[t] * (1.0 - lambda) + target_prev_self[t] * lambda;
    return out;
}

/// What an attacker may look at besides its honest proposal.
struct AttackContext {
    int attacker = 0;
    int n = 0;
    /// Every agent's reported local vector of the previous iteration (Adversarial).
    std::span<const Eigen::VectorXd> previous_locals;
    /// The attacker's individual optimum (Freeze family).
    const EnergySchedule* individual_opt = nullptr;
};

/**
 * @brief Turns the attacker's honest 24n proposal into its reported vector.
 *
 * Targeted vectors alter one victim block, *All vectors alter every block
 * except the attacker's, Freeze variants additionally replace the own block.
 */
inline Eigen::VectorXd apply_attack(const AttackSpec& spec, const Eigen::VectorXd& honest_local,
                                    const AttackContext& ctx) {
    spec.validate(ctx.attacker, ctx.n);
    if (honest_local.size() != ctx.n * kHours) {
        throw DomainError("apply_attack: proposal has the wrong dimension");
    }
    Eigen::VectorXd out = honest_local;
    if (is_freeze(spec.vector)) {
        if (!ctx.individual_opt) {
            throw DomainError("apply_attack: Freeze needs the attacker's individual optimum");
        }
        set_block(out, ctx.attacker, apply_freeze(get_block(out, ctx.attacker), *ctx.individual_opt));
    }

    auto alter = [&](int j) {
        const HourlyVector b = get_block(out, j);
        switch (spec.vector) {
            case AttackVector::Shift:
            case AttackVector::ShiftAll:
            case AttackVector::FreezeShift:
            case AttackVector::FreezeShiftAll:
                set_block(out, j, apply_shift(b, spec.mu));
                break;
            case AttackVector::Proportional:
            case AttackVector::ProportionalAll:
            case AttackVector::FreezeProp:
            case AttackVector::FreezePropAll:
                set_block(out, j, apply_proportional(b, spec.lambda));
                break;
            case AttackVector::Adversarial: {
                if (ctx.previous_locals.size() != static_cast<std::size_t>(ctx.n)) {
                    throw DomainError("apply_attack: Adversarial needs the previous iteration");
                }
                const HourlyVector prev = get_block(ctx.previous_locals[static_cast<std::size_t>(j)], j);
                set_block(out, j, apply_adversarial(b, prev, spec.lambda));
                break;
            }
            case AttackVector::Freeze:
                break;
        }
    };

    switch (spec.vector) {
        case AttackVector::ShiftAll:
        case AttackVector::ProportionalAll:
        case AttackVector::FreezeShiftAll:
        case AttackVector::FreezePropAll:
            for (int j = 0; j < ctx.n; ++j) {
                if (j != ctx.attacker) alter(j);
            }
            break;
        case AttackVector::Freeze:
            break;
        default:
            alter(spec.target);
            break;
    }
    return out;
}

}  // namespace evadmm

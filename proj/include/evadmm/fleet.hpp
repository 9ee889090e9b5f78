#pragma once

/**
 * @file fleet.hpp
 *
 * @brief EV charging sessions and the hourly requirement envelopes of a fleet.
 *
 * All fleet quantities are grid-side kWh (or kW for power). A session's
 * energy need is (SoC_d - SoC_0) / efficiency. Its earliest-possible
 * charging profile is `r_max` and its latest-possible profile is `r_min`;
 * any cumulative purchase between the two cumulative envelopes serves it.
 */

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "csv.hpp"
#include "errors.hpp"
#include "hours.hpp"

namespace evadmm {

/// One EV plugged in over slots [t0, td) of the horizon.
struct EvSession {
    int t0 = 0;
    int td = 1;
    double soc0 = 0.0;     ///< kWh
    double socd = 0.0;     ///< kWh
    double battery = 24.0; ///< kWh
    double p_max = 3.7;    ///< kW, grid side
    double efficiency = 0.9;

    double grid_energy() const { return (socd - soc0) / efficiency; }

    void validate() const {
        if (t0 < 0 || td > kHours || td <= t0) {
            throw DomainError("session window must satisfy 0 <= t0 < td <= 24");
        }
        if (!(soc0 >= 0.0) || soc0 > socd || socd > battery) {
            throw DomainError("session must satisfy 0 <= soc0 <= socd <= battery");
        }
        if (!(efficiency > 0.0) || efficiency > 1.0 || !(p_max > 0.0)) {
            throw DomainError("session efficiency must be in (0,1] and p_max positive");
        }
        const double window = (td - t0) * p_max;
        if (grid_energy() > window * (1.0 + 1e-12)) {
            throw DomainError("session is infeasible: needs " + std::to_string(grid_energy()) +
                              " kWh but can draw at most " + std::to_string(window) + " kWh");
        }
    }

    bool operator==(const EvSession&) const = default;
};

struct RequirementVectors {
    HourlyVector r_min{};  ///< kWh, latest-possible charging
    HourlyVector r_max{};  ///< kWh, earliest-possible charging
};

/**
 * @brief Aggregated requirements of one aggregator.
 *
 * `n[t]` counts vehicles plugged in during slot t; the fleet can draw at most
 * n[t] * p_max kWh in that slot.
 */
struct FleetRequirements {
    HourlyVector r_min{};
    HourlyVector r_max{};
    std::array<int, kHours> n{};
    double p_max = 0.0;  ///< kW
    long size_evs = 0;

    double cap(int t) const { return n[t] * p_max; }

    FleetRequirements& operator+=(const FleetRequirements& o) {
        if (size_evs > 0 && o.size_evs > 0 && p_max != o.p_max) {
            throw DomainError("cannot combine fleets with different p_max");
        }
        for (int t = 0; t < kHours; ++t) {
            r_min[t] += o.r_min[t];
            r_max[t] += o.r_max[t];
            n[t] += o.n[t];
        }
        p_max = std::max(p_max, o.p_max);
        size_evs += o.size_evs;
        return *this;
    }

    friend FleetRequirements operator+(FleetRequirements a, const FleetRequirements& b) {
        a += b;
        return a;
    }

    bool operator==(const FleetRequirements&) const = default;
};

inline RequirementVectors ev_requirements(const EvSession& s) {
    s.validate();
    RequirementVectors out;
    const double need = s.grid_energy();
    double left = need;
    for (int t = s.t0; t < s.td && left > 0.0; ++t) {
        const double e = std::min(s.p_max, left);
        out.r_max[t] = e;
        left -= e;
    }
    left = need;
    for (int t = s.td - 1; t >= s.t0 && left > 0.0; --t) {
        const double e = std::min(s.p_max, left);
        out.r_min[t] = e;
        left -= e;
    }
    return out;
}

inline FleetRequirements aggregate(std::span<const EvSession> sessions) {
    FleetRequirements out;
    for (const auto& s : sessions) {
        if (out.size_evs > 0 && s.p_max != out.p_max) {
            throw DomainError("aggregate: sessions must share p_max");
        }
        const auto r = ev_requirements(s);
        for (int t = 0; t < kHours; ++t) {
            out.r_min[t] += r.r_min[t];
            out.r_max[t] += r.r_max[t];
        }
        for (int t = s.t0; t < s.td; ++t) {
            ++out.n[t];
        }
        out.p_max = s.p_max;
        ++out.size_evs;
    }
    return out;
}

/// Survey-derived session distributions; times are clock hours.
struct FleetParams {
    std::vector<int> arrival_hours{19, 20, 21, 22, 23};
    std::vector<double> arrival_probs{0.16, 0.25, 0.32, 0.12, 0.15};
    std::vector<int> departure_hours{6, 7, 8, 9, 10};
    std::vector<double> departure_probs{0.04, 0.02, 0.34, 0.5, 0.1};
    double battery = 24.0;    ///< kWh
    double p_max = 3.7;       ///< kW
    double efficiency = 0.9;
    /// SoC at arrival ~ U[lo, hi] * battery.
    std::array<double, 2> soc0_fraction{0.25, 0.5};
    /// Desired SoC at departure ~ U[lo, hi] * battery.
    std::array<double, 2> socd_fraction{2.0 / 3.0, 1.0};

    void validate() const {
        auto check = [](const std::vector<int>& hours, const std::vector<double>& probs, const char* what) {
            if (hours.empty() || hours.size() != probs.size()) {
                throw DomainError(std::string(what) + ": hours and probabilities must align");
            }
            double total = 0.0;
            for (std::size_t k = 0; k < hours.size(); ++k) {
                if (hours[k] < 0 || hours[k] >= kHours || !(probs[k] >= 0.0)) {
                    throw DomainError(std::string(what) + ": invalid hour or probability");
                }
                total += probs[k];
            }
            if (std::abs(total - 1.0) > 1e-9) {
                throw DomainError(std::string(what) + ": probabilities must sum to 1");
            }
        };
        check(arrival_hours, arrival_probs, "arrival");
        check(departure_hours, departure_probs, "departure");
        if (!(battery > 0.0) || !(p_max > 0.0) || !(efficiency > 0.0) || efficiency > 1.0) {
            throw DomainError("fleet params: battery, p_max, efficiency out of range");
        }
        if (soc0_fraction[0] < 0.0 || soc0_fraction[1] < soc0_fraction[0] ||
            socd_fraction[1] > 1.0 || socd_fraction[1] < socd_fraction[0] ||
            socd_fraction[0] < soc0_fraction[1]) {
            throw DomainError("fleet params: SoC fractions must satisfy 0 <= soc0 <= socd <= 1");
        }
    }

    bool operator==(const FleetParams&) const = default;
};

/**
 * @brief Draws `n_evs` sessions, deterministic for a fixed seed.
 *
 * Clock times are mapped onto horizon slots, so an evening arrival and a
 * next-morning departure form one contiguous window.
 */
inline std::vector<EvSession> sample_fleet(std::uint64_t seed, long n_evs, const FleetParams& params = {}) {
    params.validate();
    if (n_evs < 0) {
        throw DomainError("sample_fleet: n_evs must be nonnegative");
    }
    std::mt19937_64 rng(seed);
    std::discrete_distribution<int> arrival(params.arrival_probs.begin(), params.arrival_probs.end());
    std::discrete_distribution<int> departure(params.departure_probs.begin(), params.departure_probs.end());
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    std::vector<EvSession> out;
    out.reserve(static_cast<std::size_t>(n_evs));
    while (static_cast<long>(out.size()) < n_evs) {
        EvSession s;
        s.t0 = clock_to_slot(params.arrival_hours[static_cast<std::size_t>(arrival(rng))]);
        s.td = clock_to_slot(params.departure_hours[static_cast<std::size_t>(departure(rng))]);
        const auto& f0 = params.soc0_fraction;
        const auto& fd = params.socd_fraction;
        s.soc0 = params.battery * (f0[0] + (f0[1] - f0[0]) * unit(rng));
        s.socd = params.battery * (fd[0] + (fd[1] - fd[0]) * unit(rng));
        s.battery = params.battery;
        s.p_max = params.p_max;
        s.efficiency = params.efficiency;
        if (s.td <= s.t0 || s.grid_energy() > (s.td - s.t0) * s.p_max) {
            // Custom distributions can produce windows that wrap or are too short; redraw.
            continue;
        }
        out.push_back(s);
    }
    return out;
}

/// Fleet CSV: `t0,td,soc0_kwh,socd_kwh,battery_kwh,pmax_kw` with t0/td as horizon slots.
inline std::vector<EvSession> read_fleet_csv(std::istream& in, double efficiency = 0.9) {
    std::vector<EvSession> out;
    csv::read_table(in, {"t0", "td", "soc0_kwh", "socd_kwh", "battery_kwh", "pmax_kw"},
                    [&](const auto& f, std::size_t line) {
                        EvSession s;
                        s.t0 = static_cast<int>(csv::to_int(f[0], line, "t0"));
                        s.td = static_cast<int>(csv::to_int(f[1], line, "td"));
                        s.soc0 = csv::to_double(f[2], line, "soc0_kwh");
                        s.socd = csv::to_double(f[3], line, "socd_kwh");
                        s.battery = csv::to_double(f[4], line, "battery_kwh");
                        s.p_max = csv::to_double(f[5], line, "pmax_kw");
                        s.efficiency = efficiency;
                        if (s.soc0 < 0.0 || s.socd < 0.0 || s.battery < 0.0 || s.p_max < 0.0) {
                            throw ParseError("negative quantity", line);
                        }
                        try {
                            s.validate();
                        } catch (const DomainError& e) {
                            throw ParseError(e.what(), line);
                        }
                        out.push_back(s);
                    });
    return out;
}

inline void write_fleet_csv(std::ostream& out, std::span<const EvSession> sessions) {
    out << "t0,td,soc0_kwh,socd_kwh,battery_kwh,pmax_kw\n";
    out.precision(17);
    for (const auto& s : sessions) {
        out << s.t0 << ',' << s.td << ',' << s.soc0 << ',' << s.socd << ',' << s.battery << ',' << s.p_max << '\n';
    }
}

}  // namespace evadmm

#pragma once

#include <array>
#include <cstddef>
#include <numeric>

namespace evadmm {

/// Hourly slots in one day-ahead trading horizon.
inline constexpr int kHours = 24;

/// The horizon opens at market closure (noon), so slot 0 is 12:00-13:00.
inline constexpr int kHorizonStartClock = 12;

/// Fleet quantities are kept in kWh; market quantities in MWh.
inline constexpr double kKwhPerMwh = 1000.0;

using HourlyVector = std::array<double, kHours>;

constexpr int clock_to_slot(int clock_hour) {
    return ((clock_hour - kHorizonStartClock) % kHours + kHours) % kHours;
}

constexpr int slot_to_clock(int slot) {
    return (slot + kHorizonStartClock) % kHours;
}

inline double sum(const HourlyVector& v) {
    return std::accumulate(v.begin(), v.end(), 0.0);
}

inline HourlyVector cumulative(const HourlyVector& v) {
    HourlyVector out{};
    std::partial_sum(v.begin(), v.end(), out.begin());
    return out;
}

}  // namespace evadmm

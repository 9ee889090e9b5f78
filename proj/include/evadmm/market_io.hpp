#pragma once

/**
 * @file market_io.hpp
 *
 * Curve CSV: `hour,volume_mwh,price_eur_mwh`, rows sorted by (hour, volume),
 * one residual curve per horizon slot 0-23.
 *
 * Quadratic CSV: `hour,a,b,p0`, one row per slot 0-23.
 */

#include <array>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "csv.hpp"
#include "market.hpp"

namespace evadmm {

inline std::vector<ResidualCurve> read_curve_csv(std::istream& in, double p_max = kDefaultPriceCap,
                                                 Interpolation mode = Interpolation::step) {
    std::vector<ResidualCurve> curves(kHours);
    for (int t = 0; t < kHours; ++t) {
        curves[t].hour = t;
        curves[t].p_max = p_max;
        curves[t].mode = mode;
    }
    long last_hour = -1;
    csv::read_table(in, {"hour", "volume_mwh", "price_eur_mwh"}, [&](const auto& f, std::size_t line) {
        const long hour = csv::to_int(f[0], line, "hour");
        const double volume = csv::to_double(f[1], line, "volume_mwh");
        const double price = csv::to_double(f[2], line, "price_eur_mwh");
        if (hour < 0 || hour >= kHours) {
            throw ParseError("hour must be in 0..23", line);
        }
        if (volume < 0.0 || price < 0.0) {
            throw ParseError("negative volume or price", line);
        }
        if (price > p_max) {
            throw ParseError("price above the price cap", line);
        }
        if (hour < last_hour) {
            throw ParseError("rows not sorted by hour", line);
        }
        auto& pts = curves[static_cast<std::size_t>(hour)].points;
        if (!pts.empty() && volume <= pts.back().volume) {
            throw ParseError("volumes not strictly increasing within hour", line);
        }
        if (!pts.empty() && price < pts.back().price) {
            throw ParseError("prices decreasing within hour", line);
        }
        pts.push_back({volume, price});
        last_hour = hour;
    });
    for (int t = 0; t < kHours; ++t) {
        if (curves[t].points.empty()) {
            throw ParseError("no rows for hour " + std::to_string(t));
        }
    }
    return curves;
}

inline void write_curve_csv(std::ostream& out, const std::vector<ResidualCurve>& curves) {
    out << "hour,volume_mwh,price_eur_mwh\n";
    out << std::setprecision(std::numeric_limits<double>::max_digits10);
    for (const auto& c : curves) {
        for (const auto& p : c.points) {
            out << c.hour << ',' << p.volume << ',' << p.price << '\n';
        }
    }
}

inline std::array<PriceImpactCurve, kHours> read_quadratic_csv(std::istream& in) {
    std::array<PriceImpactCurve, kHours> curves{};
    std::array<bool, kHours> seen{};
    csv::read_table(in, {"hour", "a", "b", "p0"}, [&](const auto& f, std::size_t line) {
        const long hour = csv::to_int(f[0], line, "hour");
        if (hour < 0 || hour >= kHours) {
            throw ParseError("hour must be in 0..23", line);
        }
        if (seen[static_cast<std::size_t>(hour)]) {
            throw ParseError("duplicate hour", line);
        }
        PriceImpactCurve c;
        c.hour = static_cast<int>(hour);
        c.a = csv::to_double(f[1], line, "a");
        c.b = csv::to_double(f[2], line, "b");
        c.p0 = csv::to_double(f[3], line, "p0");
        if (c.a < 0.0 || c.b < 0.0 || c.p0 < 0.0) {
            throw ParseError("coefficients must be nonnegative", line);
        }
        curves[static_cast<std::size_t>(hour)] = c;
        seen[static_cast<std::size_t>(hour)] = true;
    });
    for (int t = 0; t < kHours; ++t) {
        if (!seen[t]) {
            throw ParseError("no row for hour " + std::to_string(t));
        }
    }
    return curves;
}

inline void write_quadratic_csv(std::ostream& out, const std::array<PriceImpactCurve, kHours>& curves) {
    out << "hour,a,b,p0\n";
    out << std::setprecision(std::numeric_limits<double>::max_digits10);
    for (const auto& c : curves) {
        out << c.hour << ',' << c.a << ',' << c.b << ',' << c.p0 << '\n';
    }
}

/// Builds a market day from raw curves by fitting each hour on [0, volume_cap].
inline MarketDay market_from_curves(std::vector<ResidualCurve> raw, double volume_cap) {
    MarketDay day;
    for (int t = 0; t < kHours; ++t) {
        day.curves[t] = fit_quadratic(raw[t], volume_cap);
    }
    day.raw = std::move(raw);
    day.validate();
    return day;
}

}  // namespace evadmm

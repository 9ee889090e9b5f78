#pragma once

/**
 * @file market.hpp
 *
 * @brief Hourly price-impact functions of the day-ahead market.
 *
 * A residual supply curve maps the volume bought by a new participant to
 * the clearing price it induces. Bidding works on a convex quadratic
 * approximation a*E^2 + b*E + p0 of that curve, fitted per hour.
 */

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "hours.hpp"

namespace evadmm {

/// Harmonised day-ahead price cap (EUR/MWh) used when a curve does not set one.
inline constexpr double kDefaultPriceCap = 180.3;

enum class Interpolation { step, linear };

struct CurvePoint {
    double volume;  ///< MWh
    double price;   ///< EUR/MWh

    bool operator==(const CurvePoint&) const = default;
};

/**
 * @brief Residual supply curve of one hour, read as price versus added demand.
 *
 * In `step` mode the price of volume E is the price of the first point whose
 * volume reaches E; in `linear` mode prices are interpolated between points.
 * Volumes past the last point clear at `p_max`.
 */
struct ResidualCurve {
    int hour = 0;
    std::vector<CurvePoint> points;
    double p_max = kDefaultPriceCap;
    Interpolation mode = Interpolation::step;

    void validate() const {
        if (hour < 0 || hour >= kHours) {
            throw DomainError("residual curve hour out of range: " + std::to_string(hour));
        }
        if (points.empty()) {
            throw DomainError("residual curve for hour " + std::to_string(hour) + " has no points");
        }
        for (std::size_t k = 0; k < points.size(); ++k) {
            const auto& p = points[k];
            if (!(p.volume >= 0.0) || !(p.price >= 0.0) || p.price > p_max) {
                throw DomainError("residual curve point " + std::to_string(k) + " of hour " +
                                  std::to_string(hour) + " outside [0, p_max]");
            }
            if (k > 0 && !(p.volume > points[k - 1].volume)) {
                throw DomainError("residual curve volumes must be strictly increasing (hour " +
                                  std::to_string(hour) + ")");
            }
            if (k > 0 && p.price < points[k - 1].price) {
                throw DomainError("residual curve prices must be nondecreasing (hour " +
                                  std::to_string(hour) + ")");
            }
        }
    }

    bool operator==(const ResidualCurve&) const = default;
};

/// Clearing price (EUR/MWh) when buying `volume` MWh at the price cap.
inline double clearing_price(const ResidualCurve& curve, double volume) {
    if (!(volume >= 0.0)) {
        throw DomainError("clearing_price: volume must be nonnegative");
    }
    const auto& pts = curve.points;
    if (pts.empty()) {
        throw DomainError("clearing_price: empty curve");
    }
    auto it = std::lower_bound(pts.begin(), pts.end(), volume,
                               [](const CurvePoint& p, double v) { return p.volume < v; });
    if (it == pts.end()) {
        return curve.p_max;
    }
    if (curve.mode == Interpolation::step || it == pts.begin() || it->volume == volume) {
        return it->price;
    }
    const auto& lo = *(it - 1);
    const double w = (volume - lo.volume) / (it->volume - lo.volume);
    return lo.price + w * (it->price - lo.price);
}

/// Price increase caused by a buy order of `volume` MWh.
inline double price_impact(const ResidualCurve& curve, double volume) {
    return clearing_price(curve, volume) - clearing_price(curve, 0.0);
}

/**
 * @brief Convex quadratic price model of one hour: price(E) = a*E^2 + b*E + p0.
 *
 * With a, b, p0 >= 0 the price is nondecreasing on E >= 0 and the hourly
 * cost E*price(E) is convex there.
 */
struct PriceImpactCurve {
    int hour = 0;
    double a = 0.0;   ///< EUR/MWh^3
    double b = 0.0;   ///< EUR/MWh^2
    double p0 = 0.0;  ///< EUR/MWh

    double price(double e) const { return (a * e + b) * e + p0; }
    double slope(double e) const { return 2.0 * a * e + b; }
    double hourly_cost(double e) const { return e * price(e); }

    void validate() const {
        if (hour < 0 || hour >= kHours) {
            throw DomainError("price curve hour out of range: " + std::to_string(hour));
        }
        if (!(a >= 0.0) || !(b >= 0.0) || !(p0 >= 0.0)) {
            throw DomainError("price curve coefficients must be nonnegative (hour " +
                              std::to_string(hour) + ")");
        }
    }

    bool operator==(const PriceImpactCurve&) const = default;
};

/// One trading day: a quadratic per hour, optionally the raw curves it came from.
struct MarketDay {
    std::array<PriceImpactCurve, kHours> curves{};
    std::optional<std::vector<ResidualCurve>> raw;

    MarketDay() {
        for (int t = 0; t < kHours; ++t) {
            curves[t].hour = t;
        }
    }

    void validate() const {
        for (int t = 0; t < kHours; ++t) {
            curves[t].validate();
            if (curves[t].hour != t) {
                throw DomainError("market day curve " + std::to_string(t) + " labelled hour " +
                                  std::to_string(curves[t].hour));
            }
        }
        if (raw) {
            if (raw->size() != static_cast<std::size_t>(kHours)) {
                throw DomainError("market day needs exactly one raw curve per hour");
            }
            for (int t = 0; t < kHours; ++t) {
                (*raw)[t].validate();
                if ((*raw)[t].hour != t) {
                    throw DomainError("raw curve " + std::to_string(t) + " labelled hour " +
                                      std::to_string((*raw)[t].hour));
                }
            }
        }
    }

    /// Clearing price at hour t for total volume `e`.
    double price(int t, double e, bool use_raw = false) const {
        if (use_raw && raw) {
            return clearing_price((*raw)[t], e);
        }
        return curves[t].price(e);
    }

    double mean_base_price() const {
        double acc = 0.0;
        for (const auto& c : curves) {
            acc += c.p0;
        }
        return acc / kHours;
    }

    bool operator==(const MarketDay&) const = default;
};

/**
 * @brief Fit a*E^2 + b*E + p0 to a residual curve on [0, volume_cap].
 *
 * Least squares on `samples` uniformly spaced volumes with a, b >= 0 and p0
 * kept inside the sampled price range. The constrained problem has three
 * unknowns, so it is solved exactly by trying every active set and keeping
 * the best feasible candidate.
 */
inline PriceImpactCurve fit_quadratic(const ResidualCurve& curve, double volume_cap, int samples = 101) {
    curve.validate();
    if (curve.points.size() < 2) {
        throw FitError("fit_quadratic: degenerate curve with a single point (hour " +
                       std::to_string(curve.hour) + ")");
    }
    if (!(volume_cap > 0.0)) {
        throw FitError("fit_quadratic: volume_cap must be positive");
    }
    samples = std::max(samples, 50);

    // Columns in the unit volume u = E / cap keep the normal equations well scaled.
    Eigen::MatrixXd basis(samples, 3);
    Eigen::VectorXd target(samples);
    for (int k = 0; k < samples; ++k) {
        const double u = static_cast<double>(k) / (samples - 1);
        basis(k, 0) = u * u;
        basis(k, 1) = u;
        basis(k, 2) = 1.0;
        target(k) = clearing_price(curve, u * volume_cap);
    }

    const double lo = target.minCoeff();
    const double hi = target.maxCoeff();

    // a and b are free or zero; p0 is free or pinned to either end of [lo, hi].
    Eigen::Vector3d best(0.0, 0.0, lo);
    double best_sse = std::numeric_limits<double>::infinity();
    for (unsigned mask = 0; mask < 4; ++mask) {
        for (int pin = 0; pin < 3; ++pin) {
            std::vector<int> cols;
            for (int c = 0; c < 2; ++c) {
                if (mask & (1u << c)) cols.push_back(c);
            }
            if (pin == 0) cols.push_back(2);
            Eigen::Vector3d full = Eigen::Vector3d::Zero();
            if (pin != 0) full(2) = pin == 1 ? lo : hi;
            if (!cols.empty()) {
                Eigen::MatrixXd sub(samples, static_cast<Eigen::Index>(cols.size()));
                for (std::size_t c = 0; c < cols.size(); ++c) {
                    sub.col(static_cast<Eigen::Index>(c)) = basis.col(cols[c]);
                }
                const Eigen::VectorXd coef = sub.colPivHouseholderQr().solve(target - full(2) * basis.col(2));
                for (std::size_t c = 0; c < cols.size(); ++c) full(cols[c]) = coef(static_cast<Eigen::Index>(c));
            }
            if (full(0) < 0.0 || full(1) < 0.0 || full(2) < lo - 1e-12 || full(2) > hi + 1e-12) {
                continue;
            }
            full(2) = std::clamp(full(2), lo, hi);
            const double sse = (basis * full - target).squaredNorm();
            if (sse < best_sse) {
                best_sse = sse;
                best = full;
            }
        }
    }

    PriceImpactCurve out;
    out.hour = curve.hour;
    out.a = best(0) / (volume_cap * volume_cap);
    out.b = best(1) / volume_cap;
    out.p0 = best(2);
    return out;
}

/**
 * Cost paid by `agent` when every agent's schedule clears together:
 * sum over hours of E_agent,t * price_t(sum_j E_j,t).
 */
inline double evaluate_cost(std::span<const HourlyVector> allocations, const MarketDay& market,
                            std::size_t agent, bool use_raw = false) {
    if (agent >= allocations.size()) {
        throw DomainError("evaluate_cost: agent index out of range");
    }
    double cost = 0.0;
    for (int t = 0; t < kHours; ++t) {
        double total = 0.0;
        for (const auto& a : allocations) {
            if (!(a[t] >= 0.0)) {
                throw DomainError("evaluate_cost: schedules must be nonnegative");
            }
            total += a[t];
        }
        const double own = allocations[agent][t];
        if (own != 0.0) {
            cost += own * market.price(t, total, use_raw);
        }
    }
    return cost;
}

/// Base prices by horizon slot: evening peak, night valley around 4 am.
inline HourlyVector default_base_prices() {
    // Indexed by clock hour, reordered to slots below.
    constexpr std::array<double, kHours> by_clock = {
        48.0, 44.5, 41.0, 38.5, 37.0, 38.0, 42.0, 50.0, 56.0, 57.5, 56.5, 55.0,
        54.0, 52.0, 50.5, 48.5, 49.0, 53.0, 58.0, 62.0, 64.0, 62.5, 57.0, 52.5};
    HourlyVector out{};
    for (int h = 0; h < kHours; ++h) {
        out[clock_to_slot(h)] = by_clock[h];
    }
    return out;
}

/// Parameters of the synthetic market generator.
struct SynthMarketParams {
    HourlyVector base_prices = default_base_prices();  ///< EUR/MWh, by slot
    /// Average price slope over [0, ref_volume] (EUR/MWh^2), drawn per hour.
    std::array<double, 2> steepness{10.0, 30.0};
    /// Fraction of the slope carried by the quadratic term, drawn per hour.
    std::array<double, 2> curvature_share{0.0, 0.5};
    double ref_volume = 1.0;  ///< MWh
    /// Relative day-level scaling of base prices, drawn once per day.
    double day_level_spread = 0.15;
    double hourly_noise = 3.0;  ///< EUR/MWh, uniform +- around base price
    bool with_raw_curves = true;
    int raw_points = 41;
    double p_max = kDefaultPriceCap;

    bool operator==(const SynthMarketParams&) const = default;
};

/**
 * @brief Deterministic synthetic trading day.
 *
 * Quadratics are drawn per hour and satisfy a, b, p0 >= 0. When requested,
 * step residual curves sampled from the quadratic (with small monotone
 * jitter) are attached as the raw curves.
 */
inline MarketDay synth_market(std::uint64_t seed, const SynthMarketParams& params) {
    for (double p : params.base_prices) {
        if (!(p >= 0.0)) {
            throw DomainError("synth_market: base prices must be nonnegative");
        }
    }
    if (!(params.steepness[0] >= 0.0) || params.steepness[1] < params.steepness[0] ||
        !(params.curvature_share[0] >= 0.0) || params.curvature_share[1] > 1.0 ||
        params.curvature_share[1] < params.curvature_share[0] || !(params.ref_volume > 0.0)) {
        throw DomainError("synth_market: invalid steepness/curvature ranges");
    }

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto draw = [&](const std::array<double, 2>& r) { return r[0] + (r[1] - r[0]) * unit(rng); };

    MarketDay day;
    const double level = 1.0 + params.day_level_spread * (2.0 * unit(rng) - 1.0);
    for (int t = 0; t < kHours; ++t) {
        auto& c = day.curves[t];
        c.hour = t;
        const double noise = params.hourly_noise * (2.0 * unit(rng) - 1.0);
        c.p0 = std::clamp(params.base_prices[t] * level + noise, 0.0, params.p_max);
        const double s = draw(params.steepness);
        const double share = draw(params.curvature_share);
        c.b = s * (1.0 - share);
        c.a = s * share / params.ref_volume;
    }

    if (params.with_raw_curves) {
        std::vector<ResidualCurve> raw(kHours);
        const int npts = std::max(params.raw_points, 2);
        for (int t = 0; t < kHours; ++t) {
            auto& r = raw[t];
            r.hour = t;
            r.p_max = params.p_max;
            double last = 0.0;
            for (int k = 0; k < npts; ++k) {
                const double v = 2.0 * params.ref_volume * k / (npts - 1);
                double p = day.curves[t].price(v) + 0.5 * unit(rng);
                p = std::clamp(std::max(p, last), 0.0, params.p_max);
                r.points.push_back({v, p});
                last = p;
            }
        }
        day.raw = std::move(raw);
    }
    return day;
}

}  // namespace evadmm

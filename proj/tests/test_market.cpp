#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include <evadmm/market.hpp>
#include <evadmm/market_io.hpp>

#include "props.hpp"

using namespace evadmm;

namespace {

ResidualCurve two_step() {
    ResidualCurve c;
    c.hour = 0;
    c.points = {{0, 30}, {100, 30}, {200, 40}};
    return c;
}

ResidualCurve random_curve(std::mt19937_64& rng) {
    ResidualCurve c;
    c.hour = props::integer(rng, 0, 23);
    const int n = props::integer(rng, 2, 30);
    double v = props::uniform(rng, 0.0, 5.0);
    double p = props::uniform(rng, 0.0, 60.0);
    for (int k = 0; k < n; ++k) {
        c.points.push_back({v, p});
        v += props::uniform(rng, 0.1, 20.0);
        p = std::min(c.p_max, p + props::uniform(rng, 0.0, 8.0));
    }
    c.mode = props::integer(rng, 0, 1) ? Interpolation::linear : Interpolation::step;
    return c;
}

MarketDay flat_day(double a, double b, double p0) {
    MarketDay d;
    for (auto& c : d.curves) {
        c.a = a;
        c.b = b;
        c.p0 = p0;
    }
    return d;
}

}  // namespace

TEST(ClearingPrice, BasePriceAtZeroVolume) { EXPECT_DOUBLE_EQ(clearing_price(two_step(), 0.0), 30.0); }

TEST(ClearingPrice, StepLookupBetweenPoints) { EXPECT_DOUBLE_EQ(clearing_price(two_step(), 150.0), 40.0); }

TEST(ClearingPrice, BeyondLastPointIsPriceCap) {
    EXPECT_DOUBLE_EQ(clearing_price(two_step(), 200.5), kDefaultPriceCap);
}

TEST(ClearingPrice, LinearModeInterpolates) {
    auto c = two_step();
    c.mode = Interpolation::linear;
    EXPECT_DOUBLE_EQ(clearing_price(c, 150.0), 35.0);
}

TEST(ClearingPrice, NegativeVolumeIsDomainError) {
    EXPECT_THROW(clearing_price(two_step(), -1.0), DomainError);
    EXPECT_THROW(price_impact(two_step(), -1.0), DomainError);
}

TEST(PriceImpact, TwoStepCurve) {
    EXPECT_DOUBLE_EQ(price_impact(two_step(), 0.0), 0.0);
    EXPECT_DOUBLE_EQ(price_impact(two_step(), 150.0), 10.0);
}

TEST(PriceImpact, MonotoneAndZeroAtOriginProperty) {
    props::for_all(11, props::kCases, [](auto& rng) {
        const auto c = random_curve(rng);
        c.validate();
        EXPECT_EQ(price_impact(c, 0.0), 0.0);
        double last = clearing_price(c, 0.0);
        const double top = c.points.back().volume * 1.1;
        for (int k = 1; k <= 400; ++k) {
            const double p = clearing_price(c, top * k / 400.0);
            ASSERT_GE(p, last);
            last = p;
        }
    });
}

TEST(FitQuadratic, RecoversExactQuadratic) {
    ResidualCurve c;
    for (int k = 0; k <= 400; ++k) {
        const double v = k * 0.5;
        c.points.push_back({v, 1e-4 * v * v + 0.01 * v + 30.0});
    }
    c.mode = Interpolation::linear;
    const auto q = fit_quadratic(c, 200.0);
    EXPECT_NEAR(q.a, 1e-4, 1e-6 * 1e-4 + 1e-12);
    EXPECT_NEAR(q.b, 0.01, 1e-6 * 0.01 + 1e-10);
    EXPECT_NEAR(q.p0, 30.0, 1e-6 * 30.0);
}

TEST(FitQuadratic, FlatCurve) {
    ResidualCurve c;
    c.points = {{0, 30}, {50, 30}, {100, 30}};
    const auto q = fit_quadratic(c, 100.0);
    EXPECT_NEAR(q.a, 0.0, 1e-12);
    EXPECT_NEAR(q.b, 0.0, 1e-12);
    EXPECT_NEAR(q.p0, 30.0, 1e-9);
}

TEST(FitQuadratic, SinglePointIsFitError) {
    ResidualCurve c;
    c.points = {{0, 30}};
    EXPECT_THROW(fit_quadratic(c, 10.0), FitError);
}

// Oracle: exhaustive grid over A, B >= 0 and C in the sampled price range, unit-volume coordinates.
TEST(FitQuadratic, TwoStepBeatsGridSearchAndResidualBoundedByStep) {
    const auto c = two_step();
    const double cap = 200.0;
    const int samples = 101;
    const auto q = fit_quadratic(c, cap, samples);
    auto sse = [&](double A, double B, double C) {
        double s = 0.0;
        for (int k = 0; k < samples; ++k) {
            const double u = static_cast<double>(k) / (samples - 1);
            const double r = A * u * u + B * u + C - clearing_price(c, u * cap);
            s += r * r;
        }
        return s;
    };
    double grid_best = 1e300;
    for (int i = 0; i <= 75; ++i) {
        for (int j = 0; j <= 75; ++j) {
            for (int k = 0; k <= 60; ++k) {
                grid_best = std::min(grid_best, sse(0.2 * i, 0.2 * j, 30.0 + 0.1 * k));
            }
        }
    }
    const double fit = sse(q.a * cap * cap, q.b * cap, q.p0);
    EXPECT_LE(fit, grid_best + 1e-9);
    double worst = 0.0;
    for (int k = 0; k < samples; ++k) {
        const double v = cap * k / (samples - 1);
        worst = std::max(worst, std::abs(q.price(v) - clearing_price(c, v)));
    }
    EXPECT_LE(worst, 10.0);
    EXPECT_GE(q.p0, 30.0 - 1e-9);
    EXPECT_LE(q.p0, 40.0 + 1e-9);
}

TEST(FitQuadratic, NonnegativeConvexAndBaseInRangeProperty) {
    props::for_all(12, props::kCases, [](auto& rng) {
        const auto c = random_curve(rng);
        const double cap = props::uniform(rng, 1.0, c.points.back().volume * 1.5);
        const auto q = fit_quadratic(c, cap);
        ASSERT_NO_THROW(q.validate());
        double lo = 1e300, hi = -1e300;
        for (int k = 0; k < 101; ++k) {
            const double p = clearing_price(c, cap * k / 100.0);
            lo = std::min(lo, p);
            hi = std::max(hi, p);
        }
        EXPECT_GE(q.p0, lo - 1e-9);
        EXPECT_LE(q.p0, hi + 1e-9);
        // Second differences of the hourly cost on a uniform grid.
        const double h = cap / 200.0;
        for (int k = 1; k < 200; ++k) {
            const double e = k * h;
            const double d2 = q.hourly_cost(e + h) - 2.0 * q.hourly_cost(e) + q.hourly_cost(e - h);
            ASSERT_GE(d2, -1e-9);
        }
    });
}

TEST(EvaluateCost, ZeroAllocations) {
    const auto d = flat_day(0, 0, 30);
    std::vector<HourlyVector> alloc(2, HourlyVector{});
    EXPECT_EQ(evaluate_cost(alloc, d, 0), 0.0);
}

TEST(EvaluateCost, ConstantPrice) {
    const auto d = flat_day(0, 0, 30);
    std::vector<HourlyVector> alloc(1, HourlyVector{});
    alloc[0][0] = 1.0;
    EXPECT_DOUBLE_EQ(evaluate_cost(alloc, d, 0), 30.0);
}

TEST(EvaluateCost, SharedLinearImpact) {
    const auto d = flat_day(0, 1, 0);
    std::vector<HourlyVector> alloc(2, HourlyVector{});
    alloc[0][0] = 1.0;
    alloc[1][0] = 1.0;
    EXPECT_DOUBLE_EQ(evaluate_cost(alloc, d, 0), 2.0);
}

TEST(EvaluateCost, IndexOutOfRange) {
    const auto d = flat_day(0, 0, 30);
    std::vector<HourlyVector> alloc(2, HourlyVector{});
    EXPECT_THROW(evaluate_cost(alloc, d, 2), DomainError);
}

TEST(EvaluateCost, RawCurvesWhenRequested) {
    MarketDay d = flat_day(0, 0, 1);
    std::vector<ResidualCurve> raw(kHours);
    for (int t = 0; t < kHours; ++t) {
        raw[t].hour = t;
        raw[t].points = {{0, 30}, {100, 30}, {200, 40}};
    }
    d.raw = raw;
    std::vector<HourlyVector> alloc(1, HourlyVector{});
    alloc[0][3] = 150.0;
    EXPECT_DOUBLE_EQ(evaluate_cost(alloc, d, 0, true), 150.0 * 40.0);
    EXPECT_DOUBLE_EQ(evaluate_cost(alloc, d, 0, false), 150.0);
}

TEST(EvaluateCost, PermutationInvariantInOthersProperty) {
    props::for_all(13, props::kCases, [](auto& rng) {
        const auto day = synth_market(rng(), SynthMarketParams{});
        const int n = props::integer(rng, 2, 6);
        std::vector<HourlyVector> alloc(static_cast<std::size_t>(n));
        for (auto& a : alloc) {
            for (double& e : a) e = props::uniform(rng, 0.0, 2.0);
        }
        const double before = evaluate_cost(alloc, day, 0);
        std::shuffle(alloc.begin() + 1, alloc.end(), rng);
        EXPECT_NEAR(evaluate_cost(alloc, day, 0), before, 1e-9 * std::abs(before));
    });
}

TEST(SynthMarket, Deterministic) {
    EXPECT_EQ(synth_market(7, {}), synth_market(7, {}));
    EXPECT_FALSE(synth_market(7, {}) == synth_market(8, {}));
}

TEST(SynthMarket, ZeroSteepnessGivesConstantPrices) {
    SynthMarketParams p;
    p.steepness = {0.0, 0.0};
    const auto d = synth_market(3, p);
    for (const auto& c : d.curves) {
        EXPECT_EQ(c.a, 0.0);
        EXPECT_EQ(c.b, 0.0);
        EXPECT_DOUBLE_EQ(c.price(5.0), c.p0);
    }
}

TEST(SynthMarket, CoefficientsNonnegativeOverThousandSeeds) {
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        const auto d = synth_market(seed, {});
        ASSERT_NO_THROW(d.validate()) << "seed " << seed;
    }
}

TEST(SynthMarket, NightValley) {
    // Mean base price over 2-5 am sits below the 7-9 pm evening mean.
    const auto d = synth_market(7, {});
    double night = 0.0, evening = 0.0;
    for (int h : {2, 3, 4, 5}) night += d.curves[clock_to_slot(h)].p0 / 4.0;
    for (int h : {19, 20, 21}) evening += d.curves[clock_to_slot(h)].p0 / 3.0;
    EXPECT_LT(night, evening);
}

TEST(SynthMarket, RejectsNegativeBasePrice) {
    SynthMarketParams p;
    p.base_prices[0] = -1.0;
    EXPECT_THROW(synth_market(1, p), DomainError);
}

TEST(CurveCsv, RoundTrip) {
    const auto d = synth_market(5, {});
    std::stringstream buf;
    write_curve_csv(buf, *d.raw);
    EXPECT_EQ(read_curve_csv(buf), *d.raw);
}

TEST(CurveCsv, RejectsUnsortedWithLine) {
    std::stringstream in("hour,volume_mwh,price_eur_mwh\n0,0,30\n0,10,31\n0,5,32\n");
    try {
        read_curve_csv(in);
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 4u);
    }
}

TEST(CurveCsv, RejectsNegativePrice) {
    std::stringstream in("hour,volume_mwh,price_eur_mwh\n0,0,-30\n");
    EXPECT_THROW(read_curve_csv(in), ParseError);
}

TEST(CurveCsv, RejectsMissingHour) {
    std::stringstream in("hour,volume_mwh,price_eur_mwh\n0,0,30\n0,10,31\n");
    EXPECT_THROW(read_curve_csv(in), ParseError);
}

TEST(QuadraticCsv, RoundTrip) {
    const auto d = synth_market(9, {});
    std::stringstream buf;
    write_quadratic_csv(buf, d.curves);
    EXPECT_EQ(read_quadratic_csv(buf), d.curves);
}

TEST(QuadraticCsv, RejectsNegativeCoefficient) {
    std::stringstream in("hour,a,b,p0\n0,-1,0,0\n");
    EXPECT_THROW(read_quadratic_csv(in), ParseError);
}

TEST(MarketFromCurves, FitsEveryHour) {
    const auto d = synth_market(4, {});
    const auto m = market_from_curves(*d.raw, 1.0);
    for (int t = 0; t < kHours; ++t) {
        EXPECT_NEAR(m.curves[t].p0, d.curves[t].p0, 2.0);
    }
}

#pragma once

/**
 * @file scenario.hpp
 *
 * @brief Experiment configuration: schema, validation, JSON round trip.
 *
 * A scenario is one JSON object. Every key is optional; unknown keys are
 * rejected and every error names the offending field by JSON pointer.
 *
 *     {
 *       "seed": 1,
 *       "days": 10,
 *       "aggregators": { "evs": [1500, 1500, 1500] },
 *       "fleet": {
 *         "battery_kwh": 24, "pmax_kw": 3.7, "efficiency": 0.9,
 *         "arrival":   { "clock_hours": [19, 20, 21, 22, 23], "probs": [...] },
 *         "departure": { "clock_hours": [6, 7, 8, 9, 10],     "probs": [...] },
 *         "soc0_fraction": [0.25, 0.5], "socd_fraction": [0.667, 1.0]
 *       },
 *       "market": {
 *         "source": "synthetic",            // or "curve_file"
 *         "curve_file": "curves.csv",       // hour,volume_mwh,price_eur_mwh
 *         "interpolation": "step",          // or "linear"
 *         "impact_eur_mwh": [10, 30],       // price rise when buying the fleets' peak draw
 *         "curvature_share": [0, 0.5],
 *         "day_level_spread": 0.15, "hourly_noise": 3.0,
 *         "base_prices": null,              // 24 EUR/MWh values by clock hour
 *         "p_max": 180.3
 *       },
 *       "admm": { "rho": "auto", "rho_hat": 3.0, "eps_pri": null, "eps_dual": null,
 *                 "max_iters": 200, "cost_iteration": 50 },
 *       "attack": { "vector": "FreezeProp", "attacker": 2, "target": 0, "mu": 0, "lambda": 0.66 },
 *       "detection": { "alphas": [...], "normalized": true, "size_proxy": "energy" }
 *     }
 */

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <iomanip>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "attacks.hpp"
#include "bidding.hpp"
#include "errors.hpp"
#include "fleet.hpp"
#include "market.hpp"
#include "market_io.hpp"

namespace evadmm {

enum class MarketSource { synthetic, curve_file };
enum class SizeProxy { energy, evs };

struct MarketConfig {
    MarketSource source = MarketSource::synthetic;
    std::string curve_file;
    Interpolation interpolation = Interpolation::step;
    /// Price rise (EUR/MWh) caused by buying the combined peak draw of all fleets.
    std::array<double, 2> impact{10.0, 30.0};
    std::array<double, 2> curvature_share{0.0, 0.5};
    double day_level_spread = 0.15;
    double hourly_noise = 3.0;
    /// EUR/MWh by clock hour; the built-in profile when empty.
    std::optional<HourlyVector> base_prices;
    double p_max = kDefaultPriceCap;

    bool operator==(const MarketConfig&) const = default;
};

struct AdmmConfig {
    /// Fixed penalty; auto-scaled from rho_hat when empty.
    std::optional<double> rho;
    double rho_hat = 3.0;
    std::optional<double> eps_pri;
    std::optional<double> eps_dual;
    int max_iters = 200;
    /// Costs of non-converged runs are read at this iteration.
    int cost_iteration = 50;

    bool operator==(const AdmmConfig&) const = default;
};

struct AttackConfig {
    AttackSpec spec;
    int attacker = 0;

    bool operator==(const AttackConfig&) const = default;
};

/// 0 and four values per decade from 1e-4 to 1e-1.
inline std::vector<double> default_alphas() {
    std::vector<double> out{0.0};
    for (int k = 0; k <= 12; ++k) out.push_back(1e-4 * std::pow(10.0, k / 4.0));
    return out;
}

struct DetectionConfig {
    std::vector<double> alphas = default_alphas();
    bool normalized = true;
    SizeProxy size_proxy = SizeProxy::energy;

    bool operator==(const DetectionConfig&) const = default;
};

struct Scenario {
    std::uint64_t seed = 1;
    int days = 10;
    std::vector<long> evs{1500, 1500, 1500};
    FleetParams fleet;
    MarketConfig market;
    AdmmConfig admm;
    std::optional<AttackConfig> attack;
    DetectionConfig detection;

    int n() const { return static_cast<int>(evs.size()); }

    bool operator==(const Scenario&) const = default;
};

namespace detail {

using nlohmann::json;

inline std::string child(const std::string& path, std::string_view key) {
    return path + "/" + std::string(key);
}

inline void check_keys(const json& obj, const std::string& path, std::initializer_list<std::string_view> allowed) {
    if (!obj.is_object()) {
        throw ConfigError(path.empty() ? "/" : path, "expected an object");
    }
    for (const auto& [key, value] : obj.items()) {
        bool ok = false;
        for (auto a : allowed) ok = ok || a == key;
        if (!ok) {
            throw ConfigError(child(path, key), "unknown key");
        }
    }
}

inline double as_number(const json& v, const std::string& path) {
    if (!v.is_number()) {
        throw ConfigError(path, "expected a number");
    }
    const double x = v.get<double>();
    if (!std::isfinite(x)) {
        throw ConfigError(path, "expected a finite number");
    }
    return x;
}

inline long long as_integer(const json& v, const std::string& path) {
    if (!v.is_number_integer()) {
        throw ConfigError(path, "expected an integer");
    }
    return v.get<long long>();
}

inline std::string as_string(const json& v, const std::string& path) {
    if (!v.is_string()) {
        throw ConfigError(path, "expected a string");
    }
    return v.get<std::string>();
}

inline bool as_bool(const json& v, const std::string& path) {
    if (!v.is_boolean()) {
        throw ConfigError(path, "expected true or false");
    }
    return v.get<bool>();
}

inline std::vector<double> as_numbers(const json& v, const std::string& path) {
    if (!v.is_array()) {
        throw ConfigError(path, "expected an array of numbers");
    }
    std::vector<double> out;
    for (std::size_t k = 0; k < v.size(); ++k) out.push_back(as_number(v[k], path + "/" + std::to_string(k)));
    return out;
}

inline std::array<double, 2> as_range(const json& v, const std::string& path) {
    const auto xs = as_numbers(v, path);
    if (xs.size() != 2) {
        throw ConfigError(path, "expected [low, high]");
    }
    if (xs[1] < xs[0]) {
        throw ConfigError(path, "low must not exceed high");
    }
    return {xs[0], xs[1]};
}

inline void read_distribution(const json& v, const std::string& path, std::vector<int>& hours,
                              std::vector<double>& probs) {
    check_keys(v, path, {"clock_hours", "probs"});
    if (v.contains("clock_hours")) {
        const auto& h = v["clock_hours"];
        const std::string hp = child(path, "clock_hours");
        if (!h.is_array()) throw ConfigError(hp, "expected an array of hours");
        hours.clear();
        for (std::size_t k = 0; k < h.size(); ++k) {
            const auto x = as_integer(h[k], hp + "/" + std::to_string(k));
            if (x < 0 || x >= kHours) throw ConfigError(hp + "/" + std::to_string(k), "clock hour must be in 0..23");
            hours.push_back(static_cast<int>(x));
        }
    }
    if (v.contains("probs")) {
        probs = as_numbers(v["probs"], child(path, "probs"));
        for (std::size_t k = 0; k < probs.size(); ++k) {
            if (probs[k] < 0.0) throw ConfigError(child(path, "probs") + "/" + std::to_string(k), "must be >= 0");
        }
    }
    if (hours.size() != probs.size()) {
        throw ConfigError(path, "clock_hours and probs must have the same length");
    }
    double total = 0.0;
    for (double p : probs) total += p;
    if (std::abs(total - 1.0) > 1e-9) {
        throw ConfigError(child(path, "probs"), "probabilities must sum to 1");
    }
}

inline std::size_t line_of(const std::string& text, std::size_t byte) {
    std::size_t line = 1;
    for (std::size_t k = 0; k < std::min(byte, text.size()); ++k) {
        if (text[k] == '\n') ++line;
    }
    return line;
}

}  // namespace detail

/// Builds a scenario from parsed JSON, validating every field.
inline Scenario scenario_from_json(const nlohmann::json& j) {
    using namespace detail;
    Scenario s;
    check_keys(j, "", {"seed", "days", "aggregators", "fleet", "market", "admm", "attack", "detection"});
    if (j.contains("seed")) {
        const auto v = as_integer(j["seed"], "/seed");
        if (v < 0) throw ConfigError("/seed", "must be >= 0");
        s.seed = static_cast<std::uint64_t>(v);
    }
    if (j.contains("days")) {
        const auto v = as_integer(j["days"], "/days");
        if (v < 1 || v > 100000) throw ConfigError("/days", "must be in 1..100000");
        s.days = static_cast<int>(v);
    }
    if (j.contains("aggregators")) {
        const auto& a = j["aggregators"];
        check_keys(a, "/aggregators", {"evs"});
        if (a.contains("evs")) {
            const auto& e = a["evs"];
            if (!e.is_array() || e.empty()) throw ConfigError("/aggregators/evs", "expected a nonempty array of counts");
            s.evs.clear();
            for (std::size_t k = 0; k < e.size(); ++k) {
                const std::string p = "/aggregators/evs/" + std::to_string(k);
                const auto v = as_integer(e[k], p);
                if (v <= 0) throw ConfigError(p, "EV count must be positive");
                s.evs.push_back(static_cast<long>(v));
            }
        }
    }
    if (j.contains("fleet")) {
        const auto& f = j["fleet"];
        check_keys(f, "/fleet",
                   {"battery_kwh", "pmax_kw", "efficiency", "arrival", "departure", "soc0_fraction", "socd_fraction"});
        auto& fp = s.fleet;
        if (f.contains("battery_kwh")) fp.battery = as_number(f["battery_kwh"], "/fleet/battery_kwh");
        if (f.contains("pmax_kw")) fp.p_max = as_number(f["pmax_kw"], "/fleet/pmax_kw");
        if (f.contains("efficiency")) fp.efficiency = as_number(f["efficiency"], "/fleet/efficiency");
        if (!(fp.battery > 0.0)) throw ConfigError("/fleet/battery_kwh", "must be positive");
        if (!(fp.p_max > 0.0)) throw ConfigError("/fleet/pmax_kw", "must be positive");
        if (!(fp.efficiency > 0.0) || fp.efficiency > 1.0) throw ConfigError("/fleet/efficiency", "must be in (0, 1]");
        if (f.contains("arrival")) read_distribution(f["arrival"], "/fleet/arrival", fp.arrival_hours, fp.arrival_probs);
        if (f.contains("departure")) {
            read_distribution(f["departure"], "/fleet/departure", fp.departure_hours, fp.departure_probs);
        }
        if (f.contains("soc0_fraction")) fp.soc0_fraction = as_range(f["soc0_fraction"], "/fleet/soc0_fraction");
        if (f.contains("socd_fraction")) fp.socd_fraction = as_range(f["socd_fraction"], "/fleet/socd_fraction");
        if (fp.soc0_fraction[0] < 0.0) throw ConfigError("/fleet/soc0_fraction", "must be >= 0");
        if (fp.socd_fraction[1] > 1.0) throw ConfigError("/fleet/socd_fraction", "must be <= 1");
        if (fp.socd_fraction[0] < fp.soc0_fraction[1]) {
            throw ConfigError("/fleet/socd_fraction", "departure SoC must not be below arrival SoC");
        }
    }
    if (j.contains("market")) {
        const auto& m = j["market"];
        check_keys(m, "/market",
                   {"source", "curve_file", "interpolation", "impact_eur_mwh", "curvature_share", "day_level_spread",
                    "hourly_noise", "base_prices", "p_max"});
        auto& mc = s.market;
        if (m.contains("source")) {
            const auto v = as_string(m["source"], "/market/source");
            if (v == "synthetic") mc.source = MarketSource::synthetic;
            else if (v == "curve_file") mc.source = MarketSource::curve_file;
            else throw ConfigError("/market/source", "expected \"synthetic\" or \"curve_file\"");
        }
        if (m.contains("curve_file")) mc.curve_file = as_string(m["curve_file"], "/market/curve_file");
        if (mc.source == MarketSource::curve_file && mc.curve_file.empty()) {
            throw ConfigError("/market/curve_file", "required when source is \"curve_file\"");
        }
        if (m.contains("interpolation")) {
            const auto v = as_string(m["interpolation"], "/market/interpolation");
            if (v == "step") mc.interpolation = Interpolation::step;
            else if (v == "linear") mc.interpolation = Interpolation::linear;
            else throw ConfigError("/market/interpolation", "expected \"step\" or \"linear\"");
        }
        if (m.contains("impact_eur_mwh")) mc.impact = as_range(m["impact_eur_mwh"], "/market/impact_eur_mwh");
        if (mc.impact[0] < 0.0) throw ConfigError("/market/impact_eur_mwh", "must be >= 0");
        if (m.contains("curvature_share")) mc.curvature_share = as_range(m["curvature_share"], "/market/curvature_share");
        if (mc.curvature_share[0] < 0.0 || mc.curvature_share[1] > 1.0) {
            throw ConfigError("/market/curvature_share", "must lie in [0, 1]");
        }
        if (m.contains("day_level_spread")) mc.day_level_spread = as_number(m["day_level_spread"], "/market/day_level_spread");
        if (mc.day_level_spread < 0.0 || mc.day_level_spread >= 1.0) {
            throw ConfigError("/market/day_level_spread", "must be in [0, 1)");
        }
        if (m.contains("hourly_noise")) mc.hourly_noise = as_number(m["hourly_noise"], "/market/hourly_noise");
        if (mc.hourly_noise < 0.0) throw ConfigError("/market/hourly_noise", "must be >= 0");
        if (m.contains("base_prices") && !m["base_prices"].is_null()) {
            const auto xs = as_numbers(m["base_prices"], "/market/base_prices");
            if (xs.size() != static_cast<std::size_t>(kHours)) throw ConfigError("/market/base_prices", "expected 24 values");
            HourlyVector bp{};
            for (int h = 0; h < kHours; ++h) {
                if (xs[static_cast<std::size_t>(h)] < 0.0) {
                    throw ConfigError("/market/base_prices/" + std::to_string(h), "must be >= 0");
                }
                bp[h] = xs[static_cast<std::size_t>(h)];
            }
            mc.base_prices = bp;
        }
        if (m.contains("p_max")) mc.p_max = as_number(m["p_max"], "/market/p_max");
        if (!(mc.p_max > 0.0)) throw ConfigError("/market/p_max", "must be positive");
    }
    if (j.contains("admm")) {
        const auto& a = j["admm"];
        check_keys(a, "/admm", {"rho", "rho_hat", "eps_pri", "eps_dual", "max_iters", "cost_iteration"});
        auto& ac = s.admm;
        if (a.contains("rho")) {
            const auto& r = a["rho"];
            if (r.is_string()) {
                if (r.get<std::string>() != "auto") throw ConfigError("/admm/rho", "expected \"auto\" or a number");
                ac.rho.reset();
            } else {
                const double v = as_number(r, "/admm/rho");
                if (!(v > 0.0)) throw ConfigError("/admm/rho", "must be positive");
                ac.rho = v;
            }
        }
        if (a.contains("rho_hat")) ac.rho_hat = as_number(a["rho_hat"], "/admm/rho_hat");
        if (!(ac.rho_hat > 0.0)) throw ConfigError("/admm/rho_hat", "must be positive");
        for (const char* key : {"eps_pri", "eps_dual"}) {
            if (a.contains(key) && !a[key].is_null()) {
                const double v = as_number(a[key], child("/admm", key));
                if (v < 0.0) throw ConfigError(child("/admm", key), "must be >= 0");
                (std::string_view(key) == "eps_pri" ? ac.eps_pri : ac.eps_dual) = v;
            }
        }
        if (a.contains("max_iters")) {
            const auto v = as_integer(a["max_iters"], "/admm/max_iters");
            if (v < 1 || v > 1000000) throw ConfigError("/admm/max_iters", "must be in 1..1000000");
            ac.max_iters = static_cast<int>(v);
        }
        if (a.contains("cost_iteration")) {
            const auto v = as_integer(a["cost_iteration"], "/admm/cost_iteration");
            if (v < 1) throw ConfigError("/admm/cost_iteration", "must be >= 1");
            ac.cost_iteration = static_cast<int>(v);
        }
    }
    if (j.contains("attack") && !j["attack"].is_null()) {
        const auto& a = j["attack"];
        check_keys(a, "/attack", {"vector", "attacker", "target", "mu", "lambda"});
        AttackConfig ac;
        if (!a.contains("vector")) throw ConfigError("/attack/vector", "required");
        const auto name = as_string(a["vector"], "/attack/vector");
        const auto v = parse_attack_vector(name);
        if (!v) throw ConfigError("/attack/vector", "unknown attack vector \"" + name + "\"");
        ac.spec.vector = *v;
        ac.attacker = s.n() - 1;
        if (a.contains("attacker")) ac.attacker = static_cast<int>(as_integer(a["attacker"], "/attack/attacker"));
        if (a.contains("target")) ac.spec.target = static_cast<int>(as_integer(a["target"], "/attack/target"));
        if (a.contains("mu")) ac.spec.mu = static_cast<int>(as_integer(a["mu"], "/attack/mu"));
        if (a.contains("lambda")) ac.spec.lambda = as_number(a["lambda"], "/attack/lambda");
        if (ac.attacker < 0 || ac.attacker >= s.n()) throw ConfigError("/attack/attacker", "index out of range");
        if (ac.spec.mu < 0) throw ConfigError("/attack/mu", "must be >= 0");
        if (ac.spec.lambda < 0.0 || ac.spec.lambda > 1.0) throw ConfigError("/attack/lambda", "must be in [0, 1]");
        if (uses_target(ac.spec.vector)) {
            if (ac.spec.target < 0 || ac.spec.target >= s.n()) throw ConfigError("/attack/target", "index out of range");
            if (ac.spec.target == ac.attacker) throw ConfigError("/attack/target", "must differ from the attacker");
        }
        s.attack = ac;
    }
    if (j.contains("detection")) {
        const auto& d = j["detection"];
        check_keys(d, "/detection", {"alphas", "normalized", "size_proxy"});
        auto& dc = s.detection;
        if (d.contains("alphas")) {
            dc.alphas = as_numbers(d["alphas"], "/detection/alphas");
            if (dc.alphas.empty()) throw ConfigError("/detection/alphas", "must not be empty");
            for (std::size_t k = 0; k < dc.alphas.size(); ++k) {
                if (dc.alphas[k] < 0.0) throw ConfigError("/detection/alphas/" + std::to_string(k), "must be >= 0");
            }
        }
        if (d.contains("normalized")) dc.normalized = as_bool(d["normalized"], "/detection/normalized");
        if (d.contains("size_proxy")) {
            const auto v = as_string(d["size_proxy"], "/detection/size_proxy");
            if (v == "energy") dc.size_proxy = SizeProxy::energy;
            else if (v == "evs") dc.size_proxy = SizeProxy::evs;
            else throw ConfigError("/detection/size_proxy", "expected \"energy\" or \"evs\"");
        }
    }
    if (s.n() < 1) throw ConfigError("/aggregators/evs", "need at least one aggregator");
    if (s.attack && s.n() < 2) throw ConfigError("/attack", "attacks need at least two aggregators");
    return s;
}

/// Canonical JSON form; every field is written, so loading it back is exact.
inline nlohmann::json to_json(const Scenario& s) {
    using nlohmann::json;
    json j;
    j["seed"] = s.seed;
    j["days"] = s.days;
    j["aggregators"] = {{"evs", s.evs}};
    const auto& f = s.fleet;
    j["fleet"] = {{"battery_kwh", f.battery},
                  {"pmax_kw", f.p_max},
                  {"efficiency", f.efficiency},
                  {"arrival", {{"clock_hours", f.arrival_hours}, {"probs", f.arrival_probs}}},
                  {"departure", {{"clock_hours", f.departure_hours}, {"probs", f.departure_probs}}},
                  {"soc0_fraction", f.soc0_fraction},
                  {"socd_fraction", f.socd_fraction}};
    const auto& m = s.market;
    j["market"] = {{"source", m.source == MarketSource::synthetic ? "synthetic" : "curve_file"},
                   {"curve_file", m.curve_file},
                   {"interpolation", m.interpolation == Interpolation::step ? "step" : "linear"},
                   {"impact_eur_mwh", m.impact},
                   {"curvature_share", m.curvature_share},
                   {"day_level_spread", m.day_level_spread},
                   {"hourly_noise", m.hourly_noise},
                   {"base_prices", m.base_prices ? json(*m.base_prices) : json(nullptr)},
                   {"p_max", m.p_max}};
    const auto& a = s.admm;
    j["admm"] = {{"rho", a.rho ? json(*a.rho) : json("auto")},
                 {"rho_hat", a.rho_hat},
                 {"eps_pri", a.eps_pri ? json(*a.eps_pri) : json(nullptr)},
                 {"eps_dual", a.eps_dual ? json(*a.eps_dual) : json(nullptr)},
                 {"max_iters", a.max_iters},
                 {"cost_iteration", a.cost_iteration}};
    if (s.attack) {
        j["attack"] = {{"vector", std::string(to_string(s.attack->spec.vector))},
                       {"attacker", s.attack->attacker},
                       {"target", s.attack->spec.target},
                       {"mu", s.attack->spec.mu},
                       {"lambda", s.attack->spec.lambda}};
    } else {
        j["attack"] = nullptr;
    }
    j["detection"] = {{"alphas", s.detection.alphas},
                      {"normalized", s.detection.normalized},
                      {"size_proxy", s.detection.size_proxy == SizeProxy::energy ? "energy" : "evs"}};
    return j;
}

inline Scenario parse_scenario(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text, nullptr, true, /*ignore_comments=*/true);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(e.what(), detail::line_of(text, e.byte ? e.byte - 1 : 0));
    }
    return scenario_from_json(j);
}

inline Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError(path, "cannot open config file");
    }
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_scenario(buf.str());
}

inline void save_scenario(const Scenario& s, const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw ConfigError(path, "cannot write config file");
    }
    out << to_json(s).dump(2) << '\n';
}

/// FNV-1a over the canonical JSON; 16 hex digits.
inline std::string digest(const Scenario& s) {
    const std::string text = to_json(s).dump();
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

/// Independent stream seeds from one scenario seed (splitmix64 finalizer).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (a + 1) + 0xBF58476D1CE4E5B9ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Everything one simulated trading day needs.
struct DayInstance {
    std::shared_ptr<const MarketDay> market;
    std::vector<BidProblem> problems;
    /// Combined peak draw of all fleets (MWh per slot).
    double reference_volume = 0.0;
};

/**
 * @brief Market and fleets of day `day`, deterministic in (scenario, day).
 *
 * `ev_scale` multiplies every fleet size (the paper-scale runs use 100).
 */
inline DayInstance build_day(const Scenario& s, int day, double ev_scale = 1.0) {
    DayInstance out;
    long total = 0;
    std::vector<long> counts;
    for (long e : s.evs) {
        counts.push_back(std::max(1L, std::lround(static_cast<double>(e) * ev_scale)));
        total += counts.back();
    }
    out.reference_volume = total * s.fleet.p_max / kKwhPerMwh;

    std::vector<FleetRequirements> fleets;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        const auto sessions = sample_fleet(derive_seed(s.seed, static_cast<std::uint64_t>(day), i + 1), counts[i], s.fleet);
        fleets.push_back(aggregate(sessions));
    }

    MarketDay market;
    if (s.market.source == MarketSource::synthetic) {
        SynthMarketParams mp;
        if (s.market.base_prices) {
            for (int h = 0; h < kHours; ++h) mp.base_prices[clock_to_slot(h)] = (*s.market.base_prices)[h];
        }
        mp.ref_volume = out.reference_volume;
        mp.steepness = {s.market.impact[0] / mp.ref_volume, s.market.impact[1] / mp.ref_volume};
        mp.curvature_share = s.market.curvature_share;
        mp.day_level_spread = s.market.day_level_spread;
        mp.hourly_noise = s.market.hourly_noise;
        mp.p_max = s.market.p_max;
        market = synth_market(derive_seed(s.seed, static_cast<std::uint64_t>(day), 0), mp);
        if (market.raw) {
            for (auto& c : *market.raw) c.mode = s.market.interpolation;
        }
    } else {
        std::ifstream in(s.market.curve_file);
        if (!in) {
            throw ConfigError("/market/curve_file", "cannot open " + s.market.curve_file);
        }
        // Fit where bids can land: 1.2 x the largest combined hourly draw.
        double peak = 0.0;
        for (int t = 0; t < kHours; ++t) {
            double cap = 0.0;
            for (const auto& f : fleets) cap += f.cap(t);
            peak = std::max(peak, cap / kKwhPerMwh);
        }
        market = market_from_curves(read_curve_csv(in, s.market.p_max, s.market.interpolation),
                                    1.2 * std::max(peak, 1e-6));
    }
    out.market = std::make_shared<const MarketDay>(std::move(market));
    for (auto& f : fleets) out.problems.push_back({std::move(f), out.market});
    return out;
}

}  // namespace evadmm

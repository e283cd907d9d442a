#pragma once

// Study configuration and the command implementations behind qfhs_cli.

#include <algorithm>
#include <array>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "qfhs/backtest.hpp"
#include "qfhs/caviar.hpp"
#include "qfhs/distributions.hpp"
#include "qfhs/error.hpp"
#include "qfhs/format.hpp"
#include "qfhs/inference.hpp"
#include "qfhs/parallel.hpp"
#include "qfhs/qfhs.hpp"
#include "qfhs/simharness.hpp"
#include "qfhs/svg.hpp"
#include "qfhs/timeseries.hpp"
#include "qfhs/volatility.hpp"

namespace qfhs::cli {

using nlohmann::json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Roster

struct RosterEntry {
    std::string id;
    bool quantile = false;
    VolFamily vol = VolFamily::Garch;
    CaviarFamily caviar = CaviarFamily::IG;
    double alpha_est = 0.0;

    [[nodiscard]] bool realized() const {
        return quantile ? CaviarSpec{caviar, alpha_est}.realized() : VolSpec{vol}.realized();
    }
};

inline const std::vector<double>& roster_alphas() {
    static const std::vector<double> a{0.01, 0.025, 0.05, 0.10, 0.15, 0.20};
    return a;
}

/// GHS, GJ-HS, Re-GHS, Re-EGHS, then IG, IGJR, ReC and logReC at each alpha_est.
[[nodiscard]] inline std::vector<std::string> full_roster() {
    std::vector<std::string> r{"GHS", "GJ-HS", "Re-GHS", "Re-EGHS"};
    for (const char* fam : {"IG", "IGJR", "ReC", "logReC"})
        for (double a : roster_alphas()) r.push_back(fam + format_double(100.0 * a, 6));
    return r;
}

[[nodiscard]] inline std::optional<RosterEntry> resolve_model(const std::string& id) {
    RosterEntry e;
    e.id = id;
    if (id == "GHS") return e;
    e.vol = VolFamily::Gjr;
    if (id == "GJ-HS") return e;
    e.vol = VolFamily::RealizedGarch;
    if (id == "Re-GHS") return e;
    e.vol = VolFamily::RealizedEgarch;
    if (id == "Re-EGHS") return e;
    e.quantile = true;
    static const std::vector<std::pair<std::string, CaviarFamily>> prefixes{
        {"logReC", CaviarFamily::LogReC}, {"IGJR", CaviarFamily::IGJR}, {"ReC", CaviarFamily::ReC},
        {"IG", CaviarFamily::IG}};
    for (const auto& [pre, fam] : prefixes) {
        if (id.rfind(pre, 0) != 0) continue;
        const std::string rest = id.substr(pre.size());
        if (rest.empty()) return std::nullopt;
        double pct = 0.0;
        const auto res = std::from_chars(rest.data(), rest.data() + rest.size(), pct);
        if (res.ec != std::errc() || res.ptr != rest.data() + rest.size()) return std::nullopt;
        e.caviar = fam;
        e.alpha_est = pct / 100.0;
        if (!(e.alpha_est > 0.0 && e.alpha_est < 0.5)) return std::nullopt;
        return e;
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Configuration

struct DistConfig {
    std::string family = "normal";  ///< normal | t | skt
    double nu = 5.0;
    double xi = 0.0;

    [[nodiscard]] Distribution make() const {
        if (family == "normal") return Distribution::normal();
        if (family == "t") return Distribution::student_t(nu);
        if (family == "skt") return Distribution::hansen_skew_t(nu, xi);
        throw ConfigError("unknown distribution family '" + family + "'");
    }
    /// File-name safe label such as N, t5, skt2.5_-0.15.
    [[nodiscard]] std::string label() const {
        if (family == "normal") return "N";
        if (family == "t") return "t" + format_double(nu, 6);
        return "skt" + format_double(nu, 6) + "_" + format_double(xi, 6);
    }
    bool operator==(const DistConfig&) const = default;
};

struct GridConfig {
    double first = 0.0025;
    double last = 0.30;
    double step = 0.0025;

    [[nodiscard]] std::vector<double> make() const { return make_grid(first, last, step); }
    bool operator==(const GridConfig&) const = default;
};

struct AssetConfig {
    std::string name;
    std::string ohlc;
    bool operator==(const AssetConfig&) const = default;
};

struct StudyConfig {
    // data
    std::vector<AssetConfig> assets;
    double return_scale = 100.0;
    double realized_scale = 1.0;
    std::optional<std::size_t> in_sample;
    std::optional<std::string> boundary;
    // simulation
    double omega = 0.01, gamma = 0.10, beta = 0.89;
    DistConfig dist;
    std::size_t T = 3000;
    double kappa = 0.5;
    // forecasting
    std::vector<std::string> roster = full_roster();
    std::vector<double> alpha0{0.01, 0.025};
    std::size_t horizon = 1;
    std::size_t cadence = 0;  ///< 0 selects 5 (h = 1) or 2 (h > 1)
    std::size_t paths = 25000;
    bool gaussian_measurement = false;
    std::size_t vol_starts = 10;
    std::size_t caviar_starts = 10;
    // backtest
    std::size_t mcs_B = 5000;
    double mcs_level = 0.25;
    double mean_block = 0.0;  ///< 0 selects 10 (h = 1) or 3 (h > 1)
    // studies
    std::vector<DistConfig> accuracy_dgps{DistConfig{"normal", 5.0, 0.0}, DistConfig{"t", 5.0, 0.0}};
    std::size_t accuracy_reps = 50;
    std::size_t accuracy_h = 1;
    std::size_t truth_paths = 100000;
    std::vector<DistConfig> alpha_dgps{DistConfig{"normal", 5.0, 0.0}, DistConfig{"t", 5.0, 0.0}};
    GridConfig alpha_grid{};
    std::size_t alpha_reps = 50;
    std::size_t mc_reps = 0;
    GridConfig mc_grid{0.01, 0.30, 0.005};
    std::size_t mc_starts = 10;
    GridConfig bootstrap_grid{0.005, 0.25, 0.005};
    std::size_t bootstrap_B = 500;
    std::size_t bootstrap_starts = 10;
    std::size_t bootstrap_refit_starts = 3;
    // run
    std::uint64_t seed = 1;
    std::string output = "out";
    std::size_t jobs = 1;
    fs::path base_dir;  ///< directory of the config file; not serialized

    [[nodiscard]] std::size_t effective_cadence() const { return cadence ? cadence : (horizon == 1 ? 5 : 2); }
    [[nodiscard]] double effective_mean_block() const { return mean_block > 0 ? mean_block : (horizon == 1 ? 10 : 3); }
    [[nodiscard]] DgpSpec dgp(const DistConfig& d, std::size_t length) const {
        DgpSpec s;
        s.omega = omega;
        s.gamma = gamma;
        s.beta = beta;
        s.innovation = d.make();
        s.T = length;
        return s;
    }
    [[nodiscard]] fs::path resolve(const std::string& p) const {
        const fs::path path(p);
        return path.is_absolute() ? path : base_dir / path;
    }
};

namespace detail {

class Reader {
public:
    Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(where() + ": expected an object");
    }

    template <class T>
    void get(const char* key, T& out) {
        seen_.push_back(key);
        if (!j_.contains(key)) return;
        try {
            out = j_.at(key).get<T>();
        } catch (const json::exception&) {
            throw ConfigError(where(key) + ": wrong type");
        }
    }
    template <class T>
    void get(const char* key, std::optional<T>& out) {
        seen_.push_back(key);
        if (!j_.contains(key) || j_.at(key).is_null()) return;
        try {
            out = j_.at(key).get<T>();
        } catch (const json::exception&) {
            throw ConfigError(where(key) + ": wrong type");
        }
    }
    [[nodiscard]] std::optional<Reader> section(const char* key) {
        seen_.push_back(key);
        if (!j_.contains(key)) return std::nullopt;
        return Reader(j_.at(key), where(key));
    }
    [[nodiscard]] const json* raw(const char* key) {
        seen_.push_back(key);
        return j_.contains(key) ? &j_.at(key) : nullptr;
    }
    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (std::find(seen_.begin(), seen_.end(), it.key()) == seen_.end())
                throw ConfigError(where(it.key().c_str()) + ": unknown field");
    }
    [[nodiscard]] std::string where(const char* key = nullptr) const {
        std::string p = path_.empty() ? "config" : path_;
        if (key) p += std::string(".") + key;
        return p;
    }

private:
    const json& j_;
    std::string path_;
    std::vector<std::string> seen_;
};

inline DistConfig read_dist(const json& j, const std::string& path) {
    Reader r(j, path);
    DistConfig d;
    r.get("family", d.family);
    r.get("nu", d.nu);
    r.get("xi", d.xi);
    r.finish();
    if (d.family != "normal" && d.family != "t" && d.family != "skt")
        throw ConfigError(path + ".family: expected normal, t or skt");
    try {
        (void)d.make();
    } catch (const InvalidParameter& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return d;
}

inline std::vector<DistConfig> read_dists(const json* j, const std::string& path, std::vector<DistConfig> dflt) {
    if (!j) return dflt;
    if (!j->is_array()) throw ConfigError(path + ": expected an array");
    std::vector<DistConfig> out;
    for (std::size_t i = 0; i < j->size(); ++i) out.push_back(read_dist((*j)[i], path + "[" + std::to_string(i) + "]"));
    return out;
}

inline GridConfig read_grid(std::optional<Reader> r, GridConfig g) {
    if (!r) return g;
    r->get("first", g.first);
    r->get("last", g.last);
    r->get("step", g.step);
    r->finish();
    try {
        (void)g.make();
    } catch (const Error& e) {
        throw ConfigError(r->where() + ": " + e.what());
    }
    return g;
}

inline json dist_json(const DistConfig& d) { return json{{"family", d.family}, {"nu", d.nu}, {"xi", d.xi}}; }
inline json grid_json(const GridConfig& g) { return json{{"first", g.first}, {"last", g.last}, {"step", g.step}}; }

}  // namespace detail

/// Parses a config document. Unknown fields and invalid values raise
/// ConfigError naming the offending field path.
[[nodiscard]] inline StudyConfig parse_config(const json& j, fs::path base_dir = {}) {
    using detail::Reader;
    StudyConfig c;
    c.base_dir = std::move(base_dir);
    Reader root(j, "");
    if (auto d = root.section("data")) {
        if (const json* assets = d->raw("assets")) {
            if (!assets->is_array()) throw ConfigError("config.data.assets: expected an array");
            for (std::size_t i = 0; i < assets->size(); ++i) {
                Reader a((*assets)[i], "config.data.assets[" + std::to_string(i) + "]");
                AssetConfig ac;
                a.get("name", ac.name);
                a.get("ohlc", ac.ohlc);
                a.finish();
                if (ac.ohlc.empty()) throw ConfigError(a.where("ohlc") + ": required");
                if (ac.name.empty()) ac.name = "asset" + std::to_string(i);
                c.assets.push_back(ac);
            }
        }
        std::optional<std::string> ohlc;
        d->get("ohlc", ohlc);
        if (ohlc) c.assets.push_back({"asset", *ohlc});
        d->get("return_scale", c.return_scale);
        d->get("realized_scale", c.realized_scale);
        d->finish();
    }
    if (auto s = root.section("split")) {
        s->get("in_sample", c.in_sample);
        s->get("boundary", c.boundary);
        s->finish();
        if (c.boundary && !Date::parse(*c.boundary)) throw ConfigError("config.split.boundary: expected YYYY-MM-DD");
    }
    if (auto d = root.section("dgp")) {
        d->get("omega", c.omega);
        d->get("gamma", c.gamma);
        d->get("beta", c.beta);
        if (const json* dj = d->raw("innovation")) c.dist = detail::read_dist(*dj, "config.dgp.innovation");
        d->get("T", c.T);
        d->get("kappa", c.kappa);
        d->finish();
    }
    if (auto f = root.section("forecast")) {
        if (const json* r = f->raw("roster")) {
            if (r->is_string() && r->get<std::string>() == "all") {
                c.roster = full_roster();
            } else if (r->is_array()) {
                c.roster.clear();
                for (std::size_t i = 0; i < r->size(); ++i) {
                    if (!(*r)[i].is_string())
                        throw ConfigError("config.forecast.roster[" + std::to_string(i) + "]: expected a string");
                    c.roster.push_back((*r)[i].get<std::string>());
                }
            } else {
                throw ConfigError("config.forecast.roster: expected \"all\" or an array of model ids");
            }
        }
        f->get("alpha0", c.alpha0);
        f->get("horizon", c.horizon);
        f->get("cadence", c.cadence);
        f->get("paths", c.paths);
        f->get("gaussian_measurement", c.gaussian_measurement);
        f->get("vol_starts", c.vol_starts);
        f->get("caviar_starts", c.caviar_starts);
        f->finish();
    }
    if (auto b = root.section("backtest")) {
        b->get("B", c.mcs_B);
        b->get("level", c.mcs_level);
        b->get("mean_block", c.mean_block);
        b->finish();
    }
    if (auto a = root.section("study_accuracy")) {
        c.accuracy_dgps = detail::read_dists(a->raw("dgps"), "config.study_accuracy.dgps", c.accuracy_dgps);
        a->get("n_reps", c.accuracy_reps);
        a->get("h", c.accuracy_h);
        a->get("truth_paths", c.truth_paths);
        a->finish();
    }
    if (auto a = root.section("study_alpha")) {
        c.alpha_dgps = detail::read_dists(a->raw("dgps"), "config.study_alpha.dgps", c.alpha_dgps);
        c.alpha_grid = detail::read_grid(a->section("grid"), c.alpha_grid);
        a->get("n_reps", c.alpha_reps);
        a->get("mc_reps", c.mc_reps);
        c.mc_grid = detail::read_grid(a->section("mc_grid"), c.mc_grid);
        a->get("mc_starts", c.mc_starts);
        a->finish();
    }
    if (auto b = root.section("bootstrap_alpha")) {
        c.bootstrap_grid = detail::read_grid(b->section("grid"), c.bootstrap_grid);
        b->get("B", c.bootstrap_B);
        b->get("starts", c.bootstrap_starts);
        b->get("refit_starts", c.bootstrap_refit_starts);
        b->finish();
    }
    root.get("seed", c.seed);
    root.get("output", c.output);
    root.get("jobs", c.jobs);
    root.finish();

    for (std::size_t i = 0; i < c.roster.size(); ++i)
        if (!resolve_model(c.roster[i]))
            throw ConfigError("config.forecast.roster[" + std::to_string(i) + "]: unknown model id '" + c.roster[i] +
                              "'");
    for (std::size_t i = 0; i < c.roster.size(); ++i)
        for (std::size_t k = i + 1; k < c.roster.size(); ++k)
            if (c.roster[i] == c.roster[k])
                throw ConfigError("config.forecast.roster[" + std::to_string(k) + "]: duplicate model id");
    for (std::size_t i = 0; i < c.alpha0.size(); ++i)
        if (!(c.alpha0[i] > 0.0 && c.alpha0[i] < 0.5))
            throw ConfigError("config.forecast.alpha0[" + std::to_string(i) + "]: must lie in (0, 0.5)");
    if (c.alpha0.empty()) throw ConfigError("config.forecast.alpha0: at least one level required");
    if (c.horizon < 1) throw ConfigError("config.forecast.horizon: must be at least 1");
    if (c.paths < 1000) throw ConfigError("config.forecast.paths: must be at least 1000");
    if (!(c.mcs_level > 0.0 && c.mcs_level < 1.0)) throw ConfigError("config.backtest.level: must lie in (0, 1)");
    if (c.mcs_B < 1) throw ConfigError("config.backtest.B: must be at least 1");
    if (!(c.return_scale > 0.0)) throw ConfigError("config.data.return_scale: must be positive");
    if (!(c.realized_scale > 0.0)) throw ConfigError("config.data.realized_scale: must be positive");
    if (c.jobs < 1) throw ConfigError("config.jobs: must be at least 1");
    if (!(c.kappa > 0.0)) throw ConfigError("config.dgp.kappa: must be positive");
    try {
        c.dgp(c.dist, c.T).validate();
    } catch (const InvalidParameter& e) {
        throw ConfigError(std::string("config.dgp: ") + e.what());
    }
    return c;
}

/// Full serialization including defaults; parse_config(to_json(c)) == c.
[[nodiscard]] inline json to_json(const StudyConfig& c) {
    json assets = json::array();
    for (const auto& a : c.assets) assets.push_back({{"name", a.name}, {"ohlc", a.ohlc}});
    json split = json::object();
    if (c.in_sample) split["in_sample"] = *c.in_sample;
    if (c.boundary) split["boundary"] = *c.boundary;
    json adgps = json::array(), pdgps = json::array();
    for (const auto& d : c.accuracy_dgps) adgps.push_back(detail::dist_json(d));
    for (const auto& d : c.alpha_dgps) pdgps.push_back(detail::dist_json(d));
    return json{
        {"data", {{"assets", assets}, {"return_scale", c.return_scale}, {"realized_scale", c.realized_scale}}},
        {"split", split},
        {"dgp",
         {{"omega", c.omega},
          {"gamma", c.gamma},
          {"beta", c.beta},
          {"innovation", detail::dist_json(c.dist)},
          {"T", c.T},
          {"kappa", c.kappa}}},
        {"forecast",
         {{"roster", c.roster},
          {"alpha0", c.alpha0},
          {"horizon", c.horizon},
          {"cadence", c.cadence},
          {"paths", c.paths},
          {"gaussian_measurement", c.gaussian_measurement},
          {"vol_starts", c.vol_starts},
          {"caviar_starts", c.caviar_starts}}},
        {"backtest", {{"B", c.mcs_B}, {"level", c.mcs_level}, {"mean_block", c.mean_block}}},
        {"study_accuracy",
         {{"dgps", adgps}, {"n_reps", c.accuracy_reps}, {"h", c.accuracy_h}, {"truth_paths", c.truth_paths}}},
        {"study_alpha",
         {{"dgps", pdgps},
          {"grid", detail::grid_json(c.alpha_grid)},
          {"n_reps", c.alpha_reps},
          {"mc_reps", c.mc_reps},
          {"mc_grid", detail::grid_json(c.mc_grid)},
          {"mc_starts", c.mc_starts}}},
        {"bootstrap_alpha",
         {{"grid", detail::grid_json(c.bootstrap_grid)},
          {"B", c.bootstrap_B},
          {"starts", c.bootstrap_starts},
          {"refit_starts", c.bootstrap_refit_starts}}},
        {"seed", c.seed},
        {"output", c.output},
        {"jobs", c.jobs}};
}

[[nodiscard]] inline StudyConfig load_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return parse_config(j, path.parent_path());
}

// ---------------------------------------------------------------------------
// Data

struct Asset {
    std::string name;
    MarketSeries series;
    fs::path out_dir;
};

inline void write_file(const fs::path& p, const std::string& content) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error("cannot write " + p.string());
    out << content;
}

[[nodiscard]] inline std::vector<Asset> load_assets(const StudyConfig& c) {
    if (c.assets.empty()) throw ConfigError("config.data: no OHLC input configured");
    const fs::path out = c.resolve(c.output);
    std::vector<Asset> assets;
    for (const auto& a : c.assets) {
        std::ifstream in(c.resolve(a.ohlc));
        if (!in) throw ConfigError("config.data: cannot open " + c.resolve(a.ohlc).string());
        Asset as;
        as.name = a.name;
        as.series = to_market_series(load_ohlc(in), c.return_scale, c.realized_scale);
        if (!as.series.degenerate.empty())
            std::cerr << "note: " << a.name << ": " << as.series.degenerate.size()
                      << " zero-range bars floored to the smallest positive range\n";
        as.series.floor_degenerate_realized();
        as.out_dir = c.assets.size() == 1 ? out : out / a.name;
        assets.push_back(std::move(as));
    }
    return assets;
}

[[nodiscard]] inline std::size_t in_sample_size(const StudyConfig& c, const MarketSeries& s) {
    if (c.in_sample) {
        if (*c.in_sample < 250 || *c.in_sample >= s.size())
            throw ConfigError("config.split.in_sample: must be at least 250 and below the series length");
        return *c.in_sample;
    }
    if (c.boundary) return split(s, *Date::parse(*c.boundary), 1).in_sample.size();
    throw ConfigError("config.split: in_sample or boundary required");
}

// ---------------------------------------------------------------------------
// Fitting with a persistent cache

[[nodiscard]] inline std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h = 14695981039346656037ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

[[nodiscard]] inline std::uint64_t fnv1a(const std::string& s, std::uint64_t h = 14695981039346656037ull) {
    return fnv1a(s.data(), s.size(), h);
}

[[nodiscard]] inline std::uint64_t window_hash(const MarketSeries& w, const std::string& model, const StudyConfig& c) {
    std::uint64_t h = fnv1a(model);
    h = fnv1a(w.returns.data(), w.returns.size() * sizeof(double), h);
    if (w.has_realized()) h = fnv1a(w.realized.data(), w.realized.size() * sizeof(double), h);
    const std::uint64_t settings[] = {c.vol_starts, c.caviar_starts, c.seed};
    return fnv1a(settings, sizeof settings, h);
}

struct Interrupted : Error {
    Interrupted() : Error("refit budget exhausted; rerun to resume from the fit cache") {}
};

/// Limits the number of fresh fits in one run; emulates an interruption.
struct RefitBudget {
    std::optional<std::size_t> limit;
    std::atomic<std::size_t> used{0};

    void take() {
        if (limit && used.fetch_add(1) >= *limit) throw Interrupted();
    }
};

[[nodiscard]] inline std::vector<double> fit_params(const RosterEntry& m, const MarketSeries& w,
                                                    const StudyConfig& c, std::uint64_t seed) {
    if (!m.quantile) {
        VolFitOptions o;
        o.starts = c.vol_starts;
        o.seed = seed;
        return fit_qml(VolSpec{m.vol}, w, o).params;
    }
    CaviarFitOptions o;
    o.starts = c.caviar_starts;
    o.seed = seed;
    return fit_caviar(CaviarSpec{m.caviar, m.alpha_est}, w, o).params;
}

/// Parameters for window `w`: read from the cache or fitted and stored.
[[nodiscard]] inline std::vector<double> cached_params(const RosterEntry& m, const MarketSeries& w,
                                                       const StudyConfig& c, const fs::path& cache_dir,
                                                       RefitBudget& budget) {
    const std::uint64_t h = window_hash(w, m.id, c);
    char name[32];
    std::snprintf(name, sizeof name, "%016llx.json", static_cast<unsigned long long>(h));
    const fs::path file = cache_dir / m.id / name;
    if (fs::exists(file)) {
        std::ifstream in(file);
        try {
            const json j = json::parse(in);
            if (j.at("model").get<std::string>() == m.id) return j.at("params").get<std::vector<double>>();
        } catch (const json::exception&) {
        }
    }
    budget.take();
    const auto p = fit_params(m, w, c, derive_seed(c.seed, {fnv1a(m.id), h}));
    const json rec{{"model", m.id}, {"params", p}, {"window_hash", name}};
    const fs::path tmp = file.string() + ".tmp";
    write_file(tmp, rec.dump(1) + "\n");
    fs::rename(tmp, file);
    return p;
}

/// Forecasts from fixed parameters re-filtered on window `w`.
[[nodiscard]] inline std::vector<RiskForecast> forecast_from_params(const RosterEntry& m,
                                                                    std::span<const double> p,
                                                                    const MarketSeries& w, const StudyConfig& c,
                                                                    std::uint64_t seed) {
    SimulationOptions sim;
    sim.gaussian_measurement = c.gaussian_measurement;
    if (!m.quantile) {
        VolFit fit;
        fit.spec = VolSpec{m.vol};
        fit.params.assign(p.begin(), p.end());
        const VolFilter f = filter_volatility(fit.spec, p, w);
        fit.sigma_series = f.sigma;
        fit.z_series = f.z;
        fit.u_series = f.u;
        fit.sigma_next = f.sigma_next;
        return fhs_forecast(fit, w, c.horizon, c.paths, c.alpha0, seed, sim);
    }
    CaviarFit fit;
    fit.spec = CaviarSpec{m.caviar, m.alpha_est};
    fit.params.assign(p.begin(), p.end());
    const CaviarFilter f = filter_caviar(fit.spec, p, w);
    fit.q_series = f.q;
    fit.u_series = f.u;
    fit.q_next = f.q_next;
    fit.q_init = f.q_init;
    return qfhs_forecast(fit, w, c.horizon, c.paths, c.alpha0, seed, sim);
}

// ---------------------------------------------------------------------------
// Commands

enum class Command { Simulate, Fit, Forecast, Backtest, StudyAccuracy, StudyAlpha, BootstrapAlpha };

[[nodiscard]] inline std::optional<Command> parse_command(const std::string& s) {
    static const std::map<std::string, Command> m{{"simulate", Command::Simulate},
                                                  {"fit", Command::Fit},
                                                  {"forecast", Command::Forecast},
                                                  {"backtest", Command::Backtest},
                                                  {"study-accuracy", Command::StudyAccuracy},
                                                  {"study-alpha", Command::StudyAlpha},
                                                  {"bootstrap-alpha", Command::BootstrapAlpha}};
    const auto it = m.find(s);
    if (it == m.end()) return std::nullopt;
    return it->second;
}

struct RunOptions {
    std::optional<std::size_t> max_refits;
};

inline void write_ohlc(std::ostream& out, const OhlcSeries& o) {
    out << "date,open,high,low,close\n";
    for (std::size_t t = 0; t < o.size(); ++t)
        out << o.dates[t].iso() << ',' << format_double(o.open[t], 17) << ',' << format_double(o.high[t], 17) << ','
            << format_double(o.low[t], 17) << ',' << format_double(o.close[t], 17) << '\n';
}

inline void cmd_simulate(const StudyConfig& c) {
    const fs::path out = c.resolve(c.output);
    const SimulatedOhlc sim = simulate_ohlc(c.dgp(c.dist, c.T), c.seed, c.kappa);
    std::ostringstream o;
    write_ohlc(o, sim.ohlc);
    write_file(out / "simulated_ohlc.csv", o.str());
    std::ostringstream s;
    s << "date,return,sigma\n";
    for (std::size_t t = 0; t < sim.path.returns.size(); ++t)
        s << sim.ohlc.dates[t + 1].iso() << ',' << format_double(sim.path.returns[t], 17) << ','
          << format_double(sim.path.sigma[t], 17) << '\n';
    write_file(out / "simulated_path.csv", s.str());
}

inline void cmd_fit(const StudyConfig& c) {
    for (const Asset& a : load_assets(c)) {
        const std::size_t n_in = in_sample_size(c, a.series);
        const MarketSeries w = a.series.slice(0, n_in);
        std::vector<json> recs(c.roster.size());
        parallel_for(c.roster.size(), c.jobs, [&](std::size_t i) {
            const RosterEntry m = *resolve_model(c.roster[i]);
            json r{{"model", m.id}};
            try {
                const std::uint64_t seed = derive_seed(c.seed, {fnv1a(m.id), window_hash(w, m.id, c)});
                if (!m.quantile) {
                    VolFitOptions o;
                    o.starts = c.vol_starts;
                    o.seed = seed;
                    const VolFit f = fit_qml(VolSpec{m.vol}, w, o);
                    r["params"] = f.params;
                    r["names"] = param_names(m.vol);
                    r["loglik"] = f.loglik;
                    r["sigma_next"] = f.sigma_next;
                } else {
                    CaviarFitOptions o;
                    o.starts = c.caviar_starts;
                    o.seed = seed;
                    const CaviarFit f = fit_caviar(CaviarSpec{m.caviar, m.alpha_est}, w, o);
                    r["params"] = f.params;
                    r["names"] = param_names(m.caviar);
                    r["objective"] = f.objective;
                    r["quantile_loss"] = f.quantile_loss;
                    r["violation_rate"] = f.violation_rate;
                    r["q_next"] = f.q_next;
                    r["warnings"] = f.warnings;
                }
            } catch (const Error& e) {
                r["error"] = e.what();
            }
            recs[i] = r;
        });
        json all{{"asset", a.name}, {"in_sample", n_in}, {"fits", recs}};
        write_file(a.out_dir / "fits.json", all.dump(1) + "\n");
    }
}

/// Rolling fixed-length window: refit every `cadence` origins, re-filter in between.
inline void cmd_forecast(const StudyConfig& c, const RunOptions& run) {
    RefitBudget budget;
    budget.limit = run.max_refits;
    for (const Asset& a : load_assets(c)) {
        const std::size_t n_in = in_sample_size(c, a.series);
        const std::size_t h = c.horizon;
        const std::size_t K = (a.series.size() - n_in) / h;
        if (K == 0) throw ValidationError(a.name + ": empty out-of-sample period");
        const std::size_t cadence = c.effective_cadence();
        const fs::path cache = a.out_dir / "cache";
        std::vector<std::vector<std::vector<RiskForecast>>> res(c.roster.size());
        parallel_for(c.roster.size(), c.jobs, [&](std::size_t i) {
            const RosterEntry m = *resolve_model(c.roster[i]);
            std::vector<double> params;
            res[i].resize(K);
            for (std::size_t k = 0; k < K; ++k) {
                const std::size_t origin = n_in + k * h;
                const MarketSeries w = a.series.slice(origin - n_in, n_in);
                if (k % cadence == 0) params = cached_params(m, w, c, cache, budget);
                auto f = forecast_from_params(m, params, w, c, derive_seed(c.seed, {fnv1a(a.name), fnv1a(m.id), k}));
                for (auto& x : f) x.date = a.series.dates[origin + h - 1];
                res[i][k] = std::move(f);
            }
        });
        std::ostringstream o;
        o << "date,model,h,alpha0,var,es,sim_vol\n";
        for (std::size_t k = 0; k < K; ++k)
            for (std::size_t i = 0; i < c.roster.size(); ++i)
                for (const auto& f : res[i][k])
                    o << f.date.iso() << ',' << c.roster[i] << ',' << f.horizon << ',' << format_double(f.alpha0)
                      << ',' << format_double(f.var, 17) << ',' << format_double(f.es, 17) << ','
                      << format_double(f.sim_vol, 17) << '\n';
        write_file(a.out_dir / "forecasts.csv", o.str());
    }
}

[[nodiscard]] inline std::vector<ModelForecasts> read_forecasts(const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw ValidationError("cannot open " + file.string() + "; run the forecast command first");
    std::string line;
    std::getline(in, line);
    if (trim(line) != "date,model,h,alpha0,var,es,sim_vol") throw ParseError(file.string() + ": unexpected header");
    std::vector<ModelForecasts> out;
    std::map<std::string, std::size_t> index;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (trim(line).empty()) continue;
        const auto f = qfhs::detail::split_csv_line(line);
        if (f.size() != 7) throw ParseError(file.string() + ": row " + std::to_string(row) + ": expected 7 fields");
        RiskForecast r;
        const auto d = Date::parse(f[0]);
        const auto hh = qfhs::detail::parse_double(f[2]), a0 = qfhs::detail::parse_double(f[3]), v = qfhs::detail::parse_double(f[4]),
                   e = qfhs::detail::parse_double(f[5]), sv = qfhs::detail::parse_double(f[6]);
        if (!d || !hh || !a0 || !v || !e || !sv)
            throw ParseError(file.string() + ": row " + std::to_string(row) + ": malformed field");
        r.date = *d;
        r.horizon = static_cast<std::size_t>(*hh);
        r.alpha0 = *a0;
        r.var = *v;
        r.es = *e;
        r.sim_vol = *sv;
        const std::string model(trim(f[1]));
        auto it = index.find(model);
        if (it == index.end()) {
            it = index.emplace(model, out.size()).first;
            out.push_back({model, {}});
        }
        out[it->second].forecasts.push_back(r);
    }
    return out;
}

/// Realized h-period returns of the out-of-sample window.
[[nodiscard]] inline MarketSeries realized_out_of_sample(const StudyConfig& c, const MarketSeries& s) {
    const std::size_t n_in = in_sample_size(c, s);
    const std::size_t K = (s.size() - n_in) / c.horizon;
    MarketSeries oos = s.slice(n_in, K * c.horizon);
    return aggregate_nonoverlapping(oos, c.horizon);
}

inline void cmd_backtest(const StudyConfig& c) {
    const auto assets = load_assets(c);
    std::map<std::string, std::vector<LossPanel>> panels_by_level;
    std::map<std::string, std::vector<std::array<McsResult, 2>>> mcs_by_level;
    for (const Asset& a : assets) {
        const auto models = read_forecasts(a.out_dir / "forecasts.csv");
        const MarketSeries realized = realized_out_of_sample(c, a.series);
        std::ostringstream losses;
        json mj = json::object();
        bool header = true;
        for (double a0 : c.alpha0) {
            const std::string key = format_double(a0);
            const LossPanel panel = evaluate(models, realized, a0);
            std::ostringstream one;
            panel.write_csv(one);
            std::string body = one.str();
            if (!header) body = body.substr(body.find('\n') + 1);
            header = false;
            losses << body;
            std::array<McsResult, 2> res{
                mcs(panel, LossKind::Quantile, c.mcs_level, c.mcs_B, c.effective_mean_block(),
                    derive_seed(c.seed, {fnv1a(a.name), 1}), c.jobs),
                mcs(panel, LossKind::Joint, c.mcs_level, c.mcs_B, c.effective_mean_block(),
                    derive_seed(c.seed, {fnv1a(a.name), 2}), c.jobs)};
            mj[key] = {{"quantile", res[0].to_json()}, {"joint", res[1].to_json()}};
            std::ostringstream table;
            write_backtest_table(table, panel, res[0], res[1]);
            write_file(a.out_dir / "tables" / ("backtest_a" + key + ".csv"), table.str());

            std::vector<SvgSeries> series;
            SvgSeries rs{"realized", {}, realized.returns, false};
            for (std::size_t t = 0; t < realized.size(); ++t) rs.x.push_back(static_cast<double>(t));
            series.push_back(rs);
            for (std::size_t m = 0; m < std::min<std::size_t>(3, models.size()); ++m) {
                SvgSeries v{"-VaR " + panel.models[m], rs.x, {}, true};
                for (const auto& f : models[m].forecasts)
                    if (std::abs(f.alpha0 - a0) <= 1e-12) v.y.push_back(-f.var);
                if (v.y.size() == v.x.size()) series.push_back(v);
            }
            write_file(a.out_dir / "plots" / ("forecast_a" + key + ".svg"),
                       svg_line_chart(a.name + ": realized returns and VaR forecasts, alpha0 = " + key,
                                      "forecast period", "return", series));
            panels_by_level[key].push_back(panel);
            mcs_by_level[key].push_back(res);
        }
        write_file(a.out_dir / "losses.csv", losses.str());
        write_file(a.out_dir / "mcs.json", mj.dump(1) + "\n");
    }
    if (assets.size() > 1) {
        const fs::path out = c.resolve(c.output);
        for (const auto& [key, panels] : panels_by_level) {
            const auto rq = average_rank_across(panels, LossKind::Quantile);
            const auto rj = average_rank_across(panels, LossKind::Joint);
            std::ostringstream o;
            o << "model,average_rank_Q,average_rank_J,mcs_count_Q,mcs_count_J\n";
            for (std::size_t m = 0; m < panels[0].models.size(); ++m) {
                std::size_t nq = 0, nj = 0;
                for (const auto& r : mcs_by_level[key]) {
                    nq += r[0].included[m] ? 1 : 0;
                    nj += r[1].included[m] ? 1 : 0;
                }
                o << panels[0].models[m] << ',' << format_double(rq[m]) << ',' << format_double(rj[m]) << ',' << nq
                  << ',' << nj << '\n';
            }
            write_file(out / "tables" / ("summary_a" + key + ".csv"), o.str());
        }
    }
}

inline void cmd_study_accuracy(const StudyConfig& c) {
    const fs::path out = c.resolve(c.output);
    std::vector<AccuracyReport> reports;
    for (std::size_t d = 0; d < c.accuracy_dgps.size(); ++d) {
        AccuracyConfig ac;
        ac.dgp = c.dgp(c.accuracy_dgps[d], c.T);
        ac.h = c.accuracy_h;
        ac.n_reps = c.accuracy_reps;
        ac.paths = c.paths;
        ac.truth_paths = c.truth_paths;
        ac.alpha0 = c.alpha0;
        ac.seed = derive_seed(c.seed, {d});
        ac.jobs = c.jobs;
        ac.vol_starts = c.vol_starts;
        ac.caviar_starts = c.caviar_starts;
        reports.push_back(run_accuracy_study(ac));
        std::ostringstream o;
        reports.back().write_csv(o);
        write_file(out / "tables" /
                       ("accuracy_h" + std::to_string(c.accuracy_h) + "_" + c.accuracy_dgps[d].label() + ".csv"),
                   o.str());
    }
    std::ostringstream o;
    o << "method";
    for (const auto& d : c.accuracy_dgps) o << ',' << d.label();
    o << '\n';
    if (!reports.empty())
        for (std::size_t m = 0; m < reports[0].methods.size(); ++m) {
            o << reports[0].methods[m];
            for (const auto& r : reports) o << ',' << format_double(r.average_rank[m]);
            o << '\n';
        }
    write_file(out / "tables" / ("accuracy_h" + std::to_string(c.accuracy_h) + ".csv"), o.str());
}

inline void append_profile(std::ostringstream& csv, std::ostringstream& table, const std::string& label,
                           const std::string& kind, const RseProfile& p) {
    std::ostringstream one;
    p.write_csv(one);
    std::istringstream lines(one.str());
    std::string line;
    std::getline(lines, line);
    while (std::getline(lines, line)) csv << label << ',' << kind << ',' << line << '\n';
    for (std::size_t k = 0; k < p.parameters.size(); ++k) {
        table << label << ',' << kind << ',' << p.parameters[k] << ',' << format_double(p.optimal_alpha[k]) << ',';
        if (!p.smoothed_optimal_alpha.empty()) table << format_double(p.smoothed_optimal_alpha[k]);
        table << '\n';
    }
}

inline std::string profile_plot(const std::string& title, const RseProfile& p) {
    std::vector<SvgSeries> s;
    for (std::size_t k = 0; k < p.parameters.size(); ++k) {
        s.push_back({p.parameters[k], p.alpha_grid, p.normalized[k], false});
        if (!p.smoothed.empty()) {
            const double mx = *std::max_element(p.rse[k].begin(), p.rse[k].end());
            std::vector<double> y;
            for (double v : p.smoothed[k]) y.push_back(mx > 0 ? v / mx : 0.0);
            s.push_back({p.parameters[k] + " (loess)", p.alpha_grid, y, false});
        }
    }
    return svg_line_chart(title, "alpha_est", "normalized standard error", s);
}

inline void cmd_study_alpha(const StudyConfig& c) {
    const fs::path out = c.resolve(c.output);
    std::ostringstream csv, table;
    csv << "dgp,kind,alpha,parameter,se,rse,smoothed_rse\n";
    table << "dgp,kind,parameter,raw_argmin,smoothed_argmin\n";
    json summary = json::object();
    for (std::size_t d = 0; d < c.alpha_dgps.size(); ++d) {
        const std::string label = c.alpha_dgps[d].label();
        AsymptoticConfig ac;
        ac.dgp = c.dgp(c.alpha_dgps[d], c.T);
        ac.alpha_grid = c.alpha_grid.make();
        ac.n_reps = c.alpha_reps;
        ac.seed = derive_seed(c.seed, {d, 1});
        ac.jobs = c.jobs;
        const RseProfile asym = asymptotic_rse_profile(ac);
        append_profile(csv, table, label, "asymptotic", asym);
        summary[label]["asymptotic"] = asym.summary();
        write_file(out / "plots" / ("rse_asymptotic_" + label + ".svg"),
                   profile_plot("Asymptotic relative standard errors, " + label, asym));
        if (c.mc_reps > 0) {
            McConfig mc;
            mc.dgp = ac.dgp;
            mc.alpha_grid = c.mc_grid.make();
            mc.n_reps = c.mc_reps;
            mc.seed = derive_seed(c.seed, {d, 2});
            mc.jobs = c.jobs;
            mc.starts = c.mc_starts;
            const RseProfile mp = mc_se_experiment(mc);
            append_profile(csv, table, label, "monte_carlo", mp);
            summary[label]["monte_carlo"] = mp.summary();
            write_file(out / "plots" / ("se_monte_carlo_" + label + ".svg"),
                       profile_plot("Monte Carlo standard errors, " + label, mp));
        }
    }
    write_file(out / "profiles.csv", csv.str());
    write_file(out / "tables" / "optimal_alpha.csv", table.str());
    write_file(out / "profiles_summary.json", summary.dump(1) + "\n");
}

inline void cmd_bootstrap_alpha(const StudyConfig& c) {
    for (const Asset& a : load_assets(c)) {
        BootstrapConfig bc;
        bc.alpha_grid = c.bootstrap_grid.make();
        bc.B = c.bootstrap_B;
        bc.seed = derive_seed(c.seed, {fnv1a(a.name)});
        bc.jobs = c.jobs;
        bc.starts = c.bootstrap_starts;
        bc.refit_starts = c.bootstrap_refit_starts;
        const RseProfile p = bootstrap_se(a.series, bc);
        std::ostringstream csv, table;
        csv << "dgp,kind,alpha,parameter,se,rse,smoothed_rse\n";
        table << "dgp,kind,parameter,raw_argmin,smoothed_argmin\n";
        append_profile(csv, table, a.name, "bootstrap", p);
        write_file(a.out_dir / "profiles.csv", csv.str());
        write_file(a.out_dir / "tables" / "bootstrap_alpha.csv", table.str());
        write_file(a.out_dir / "profiles_summary.json", json{{a.name, p.summary()}}.dump(1) + "\n");
        write_file(a.out_dir / "plots" / "se_bootstrap.svg",
                   profile_plot("Bootstrap standard errors, " + a.name, p));
    }
}

/// Runs one command. Returns the process exit status.
inline int run(const StudyConfig& c, Command cmd, const RunOptions& opts = {}) {
    switch (cmd) {
        case Command::Simulate: cmd_simulate(c); break;
        case Command::Fit: cmd_fit(c); break;
        case Command::Forecast: cmd_forecast(c, opts); break;
        case Command::Backtest: cmd_backtest(c); break;
        case Command::StudyAccuracy: cmd_study_accuracy(c); break;
        case Command::StudyAlpha: cmd_study_alpha(c); break;
        case Command::BootstrapAlpha: cmd_bootstrap_alpha(c); break;
    }
    return 0;
}

}  // namespace qfhs::cli

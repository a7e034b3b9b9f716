#pragma once

#include <cerrno>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace entrofield {

// mapped to exit code 2 by the CLI
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class Scenario {
    kernel_check,
    grid_equivalence,
    free_field,
    correlator,
    divergence_scan,
    ensemble,
};

enum class DriftSource { none, grid, gaussian };
enum class OutputFormat { csv, json };

inline const char* scenario_name(Scenario s) {
    switch (s) {
        case Scenario::kernel_check: return "kernel-check";
        case Scenario::grid_equivalence: return "grid-equivalence";
        case Scenario::free_field: return "free-field";
        case Scenario::correlator: return "correlator";
        case Scenario::divergence_scan: return "divergence-scan";
        case Scenario::ensemble: return "ensemble";
    }
    return "?";
}

namespace config_detail {

inline std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
    return s.substr(b, e - b);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= s.size(); ++i) {
        if (i == s.size() || s[i] == sep) {
            out.push_back(trim(s.substr(start, i - start)));
            start = i + 1;
        }
    }
    return out;
}

// shortest round-trip-exact decimal form
inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline double parse_double(const std::string& key, const std::string& raw) {
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(raw.c_str(), &end);
    if (raw.empty() || end != raw.c_str() + raw.size())
        throw ConfigError(key + ": expected a number, got '" + raw + "'");
    if (!std::isfinite(v)) throw ConfigError(key + ": must be finite");
    return v;
}

inline std::int64_t parse_int(const std::string& key, const std::string& raw) {
    errno = 0;
    char* end = nullptr;
    const long long v = std::strtoll(raw.c_str(), &end, 10);
    if (raw.empty() || end != raw.c_str() + raw.size() || errno == ERANGE)
        throw ConfigError(key + ": expected an integer, got '" + raw + "'");
    return v;
}

inline std::uint64_t parse_uint(const std::string& key, const std::string& raw) {
    if (!raw.empty() && raw[0] == '-')
        throw ConfigError(key + ": expected a non-negative integer, got '" + raw + "'");
    errno = 0;
    char* end = nullptr;
    const unsigned long long v = std::strtoull(raw.c_str(), &end, 10);
    if (raw.empty() || end != raw.c_str() + raw.size() || errno == ERANGE)
        throw ConfigError(key + ": expected a non-negative integer, got '" + raw + "'");
    return v;
}

inline bool parse_bool(const std::string& key, const std::string& raw) {
    if (raw == "true") return true;
    if (raw == "false") return false;
    throw ConfigError(key + ": expected true or false, got '" + raw + "'");
}

}

struct RunConfig {
    Scenario scenario = Scenario::kernel_check;
    std::vector<int> dims{4};
    double spacing = 1.0;
    double m = 1.0;
    double lambda3 = 0.0;
    double lambda4 = 0.0;
    double eta = 1.0;
    double xi = 0.125;
    double dt = 1e-3;
    double t_final = 1.0;
    std::int64_t points = 201;
    double extent = 8.0;
    std::int64_t n = 0;        // walkers; 0 means unset
    std::int64_t steps = 0;    // ensemble steps; 0 derives from T/dt
    DriftSource drift = DriftSource::none;
    std::vector<double> correlator_r{0.5, 1.0, 2.0, 3.0};
    bool correlator_lattice = true;
    double scan_size = 4.0;
    std::vector<double> scan_spacings{0.5, 0.25, 0.125};
    std::uint64_t seed = 12345;
    std::string out_path;
    OutputFormat format = OutputFormat::csv;

    double hbar() const { return std::sqrt(8.0 * xi); }
};

inline RunConfig parse_config(const std::string& text) {
    using namespace config_detail;
    std::map<std::string, std::string> kv;
    std::size_t line_no = 0, start = 0;
    for (std::size_t i = 0; i <= text.size(); ++i) {
        if (i != text.size() && text[i] != '\n') continue;
        ++line_no;
        std::string line = text.substr(start, i - start);
        start = i + 1;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError("line " + std::to_string(line_no) + ": empty key");
        if (kv.count(key)) throw ConfigError("duplicate key '" + key + "'");
        kv[key] = value;
    }

    static const std::vector<std::string> known = {
        "scenario",        "lattice.dims",     "lattice.spacing", "physics.m",
        "physics.lambda3", "physics.lambda4",  "physics.eta",     "physics.xi",
        "numerics.dt",     "numerics.T",       "numerics.points", "numerics.L",
        "numerics.n",      "numerics.steps",   "ensemble.drift",  "correlator.r",
        "correlator.lattice", "scan.size",     "scan.spacings",   "seed",
        "output.path",     "output.format",
    };
    for (const auto& [key, value] : kv) {
        bool ok = false;
        for (const auto& k : known) ok = ok || k == key;
        if (!ok) throw ConfigError("unknown key '" + key + "'");
        (void)value;
    }

    RunConfig cfg;
    auto has = [&](const char* k) { return kv.count(k) != 0; };
    auto raw = [&](const char* k) { return kv.at(k); };

    if (!has("scenario")) throw ConfigError("missing required key 'scenario'");
    {
        const std::string s = raw("scenario");
        if (s == "kernel-check") cfg.scenario = Scenario::kernel_check;
        else if (s == "grid-equivalence") cfg.scenario = Scenario::grid_equivalence;
        else if (s == "free-field") cfg.scenario = Scenario::free_field;
        else if (s == "correlator") cfg.scenario = Scenario::correlator;
        else if (s == "divergence-scan") cfg.scenario = Scenario::divergence_scan;
        else if (s == "ensemble") cfg.scenario = Scenario::ensemble;
        else
            throw ConfigError("scenario: unknown scenario '" + s +
                              "', expected one of kernel-check, grid-equivalence, free-field, "
                              "correlator, divergence-scan, ensemble");
    }

    if (has("lattice.dims")) {
        cfg.dims.clear();
        for (const auto& part : split(raw("lattice.dims"), ','))
            cfg.dims.push_back(static_cast<int>(parse_int("lattice.dims", part)));
        if (cfg.dims.empty() || cfg.dims.size() > 3)
            throw ConfigError("lattice.dims: expected 1 to 3 comma-separated extents");
        for (int d : cfg.dims)
            if (d < 1) throw ConfigError("lattice.dims: extents must be >= 1");
    } else if (cfg.scenario == Scenario::free_field || cfg.scenario == Scenario::correlator) {
        throw ConfigError("missing required key 'lattice.dims' for scenario " +
                          std::string(scenario_name(cfg.scenario)));
    }

    if (has("lattice.spacing")) cfg.spacing = config_detail::parse_double("lattice.spacing", raw("lattice.spacing"));
    if (!(cfg.spacing > 0.0)) throw ConfigError("lattice.spacing: must be > 0");
    if (has("physics.m")) cfg.m = config_detail::parse_double("physics.m", raw("physics.m"));
    if (cfg.m < 0.0) throw ConfigError("physics.m: must be >= 0");
    if (has("physics.lambda3")) cfg.lambda3 = config_detail::parse_double("physics.lambda3", raw("physics.lambda3"));
    if (has("physics.lambda4")) cfg.lambda4 = config_detail::parse_double("physics.lambda4", raw("physics.lambda4"));
    if (has("physics.eta")) cfg.eta = config_detail::parse_double("physics.eta", raw("physics.eta"));
    if (!(cfg.eta > 0.0)) throw ConfigError("physics.eta: must be > 0");
    if (has("physics.xi")) cfg.xi = config_detail::parse_double("physics.xi", raw("physics.xi"));
    if (!(cfg.xi > 0.0)) throw ConfigError("physics.xi: must be > 0");
    if (has("numerics.dt")) cfg.dt = config_detail::parse_double("numerics.dt", raw("numerics.dt"));
    if (!(cfg.dt > 0.0)) throw ConfigError("numerics.dt: must be > 0");
    if (has("numerics.T")) cfg.t_final = config_detail::parse_double("numerics.T", raw("numerics.T"));
    if (!(cfg.t_final > 0.0)) throw ConfigError("numerics.T: must be > 0");
    if (has("numerics.points")) cfg.points = config_detail::parse_int("numerics.points", raw("numerics.points"));
    if (cfg.points < 3) throw ConfigError("numerics.points: must be >= 3");
    if (has("numerics.L")) cfg.extent = config_detail::parse_double("numerics.L", raw("numerics.L"));
    if (!(cfg.extent > 0.0)) throw ConfigError("numerics.L: must be > 0");
    if (has("numerics.n")) cfg.n = config_detail::parse_int("numerics.n", raw("numerics.n"));
    if (cfg.n < 0) throw ConfigError("numerics.n: must be >= 0");
    if (has("numerics.steps")) cfg.steps = config_detail::parse_int("numerics.steps", raw("numerics.steps"));
    if (cfg.steps < 0) throw ConfigError("numerics.steps: must be >= 0");
    if (has("ensemble.drift")) {
        const std::string s = raw("ensemble.drift");
        if (s == "none") cfg.drift = DriftSource::none;
        else if (s == "grid") cfg.drift = DriftSource::grid;
        else if (s == "gaussian") cfg.drift = DriftSource::gaussian;
        else throw ConfigError("ensemble.drift: expected none, grid or gaussian, got '" + s + "'");
    }
    if (has("correlator.r")) {
        cfg.correlator_r.clear();
        for (const auto& part : split(raw("correlator.r"), ','))
            cfg.correlator_r.push_back(config_detail::parse_double("correlator.r", part));
        if (cfg.correlator_r.empty()) throw ConfigError("correlator.r: expected at least one radius");
        for (double r : cfg.correlator_r)
            if (!(r > 0.0)) throw ConfigError("correlator.r: radii must be > 0");
    }
    if (has("correlator.lattice"))
        cfg.correlator_lattice = config_detail::parse_bool("correlator.lattice", raw("correlator.lattice"));
    if (has("scan.size")) cfg.scan_size = config_detail::parse_double("scan.size", raw("scan.size"));
    if (!(cfg.scan_size > 0.0)) throw ConfigError("scan.size: must be > 0");
    if (has("scan.spacings")) {
        cfg.scan_spacings.clear();
        for (const auto& part : split(raw("scan.spacings"), ','))
            cfg.scan_spacings.push_back(config_detail::parse_double("scan.spacings", part));
        if (cfg.scan_spacings.size() < 2)
            throw ConfigError("scan.spacings: expected at least two spacings");
        for (double a : cfg.scan_spacings)
            if (!(a > 0.0)) throw ConfigError("scan.spacings: spacings must be > 0");
    }
    if (has("seed")) cfg.seed = config_detail::parse_uint("seed", raw("seed"));
    if (has("output.path")) cfg.out_path = raw("output.path");
    if (has("output.format")) {
        const std::string s = raw("output.format");
        if (s == "csv") cfg.format = OutputFormat::csv;
        else if (s == "json") cfg.format = OutputFormat::json;
        else throw ConfigError("output.format: expected csv or json, got '" + s + "'");
    }

    if (cfg.scenario == Scenario::ensemble) {
        if (!has("numerics.n"))
            throw ConfigError("missing required key 'numerics.n' for scenario ensemble");
        if (cfg.n < 1) throw ConfigError("numerics.n: must be >= 1 for scenario ensemble");
    }
    return cfg;
}

// normalized form: every key echoed, canonical order, shortest exact floats
inline std::string serialize_config(const RunConfig& cfg) {
    using config_detail::format_double;
    std::string out;
    auto put = [&](const std::string& k, const std::string& v) {
        out += k;
        out += " = ";
        out += v;
        out += '\n';
    };
    auto join_d = [&](const std::vector<double>& v) {
        std::string s;
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (i) s += ',';
            s += format_double(v[i]);
        }
        return s;
    };
    std::string dims;
    for (std::size_t i = 0; i < cfg.dims.size(); ++i) {
        if (i) dims += ',';
        dims += std::to_string(cfg.dims[i]);
    }
    put("scenario", scenario_name(cfg.scenario));
    put("lattice.dims", dims);
    put("lattice.spacing", format_double(cfg.spacing));
    put("physics.m", format_double(cfg.m));
    put("physics.lambda3", format_double(cfg.lambda3));
    put("physics.lambda4", format_double(cfg.lambda4));
    put("physics.eta", format_double(cfg.eta));
    put("physics.xi", format_double(cfg.xi));
    put("numerics.dt", format_double(cfg.dt));
    put("numerics.T", format_double(cfg.t_final));
    put("numerics.points", std::to_string(cfg.points));
    put("numerics.L", format_double(cfg.extent));
    put("numerics.n", std::to_string(cfg.n));
    put("numerics.steps", std::to_string(cfg.steps));
    put("ensemble.drift", cfg.drift == DriftSource::none
                              ? "none"
                              : cfg.drift == DriftSource::grid ? "grid" : "gaussian");
    put("correlator.r", join_d(cfg.correlator_r));
    put("correlator.lattice", cfg.correlator_lattice ? "true" : "false");
    put("scan.size", format_double(cfg.scan_size));
    put("scan.spacings", join_d(cfg.scan_spacings));
    put("seed", std::to_string(cfg.seed));
    put("output.path", cfg.out_path);
    put("output.format", cfg.format == OutputFormat::csv ? "csv" : "json");
    return out;
}

inline std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string config_hash_hex(const RunConfig& cfg) {
    std::uint64_t h = fnv1a64(serialize_config(cfg));
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}

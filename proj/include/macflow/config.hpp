/// @file config.hpp
/// @brief Flat key = value run configuration with optional [section] grouping.
///
/// Grammar (diff-friendly for sweep scripts):
///   - blank lines and lines starting with '#' or ';' are ignored
///   - '[section]' lines group keys visually; keys are globally unique and
///     are looked up without the section prefix
///   - everything else must be 'key = value'
/// Parse errors name the offending key and line.

#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "macflow/filters.hpp"
#include "macflow/stepper.hpp"

namespace macflow {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    int nx = 64, ny = 64;
    double lx = 1.0, ly = 1.0;
    double dt = 0.01;
    double t_final = 1.0;
    double nu = 0.05;
    double chi0 = 1.0;
    std::string indicator = "normalized-gradient"; ///< comma list = geometric mean
    double eta = 1e-10;
    double c_delta = 1.0;
    double delta = -1.0; ///< explicit uniform radius; < 0 selects the c_delta rule
    double eps_floor = 0.0;
    std::string mode = "after-projection"; ///< or "before-projection"
    bool reproject = false;
    double rel_tol = 1e-10;
    double abs_tol = 1e-14;
    int max_iter = 0;
    std::string out_dir = "out";
    std::uint64_t seed = 1;
    std::string stability_action = "warn"; ///< or "abort"
    std::vector<double> dt_list;           ///< convergence studies
    std::vector<int> sizes = {8, 16, 32};  ///< property suites
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

struct KeyValue {
    std::string value;
    int line = 0;
};

} // namespace detail

/// Raw parsed file: keys with their source line, for error reporting.
class ConfigMap {
  public:
    static ConfigMap from_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config file: " + path);
        std::stringstream ss;
        ss << in.rdbuf();
        return from_string(ss.str());
    }

    static ConfigMap from_string(const std::string& text) {
        ConfigMap m;
        std::istringstream in(text);
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const std::string t = detail::trim(line);
            if (t.empty() || t[0] == '#' || t[0] == ';') continue;
            if (t.front() == '[') {
                if (t.back() != ']')
                    throw ConfigError("malformed section header (line " + std::to_string(lineno) +
                                      ")");
                continue; // sections are organizational only
            }
            const auto eq = t.find('=');
            if (eq == std::string::npos)
                throw ConfigError("expected 'key = value' (line " + std::to_string(lineno) + ")");
            const std::string key = detail::trim(t.substr(0, eq));
            const std::string value = detail::trim(t.substr(eq + 1));
            if (key.empty())
                throw ConfigError("empty key (line " + std::to_string(lineno) + ")");
            if (m.kv_.count(key))
                throw ConfigError("duplicate key: " + key + " (line " + std::to_string(lineno) +
                                  ")");
            m.kv_[key] = {value, lineno};
        }
        return m;
    }

    bool has(const std::string& key) const { return kv_.count(key) != 0; }

    std::string get_string(const std::string& key) const { return require(key).value; }

    double get_double(const std::string& key) const {
        const auto& kv = require(key);
        try {
            std::size_t pos = 0;
            const double x = std::stod(kv.value, &pos);
            if (pos != kv.value.size()) throw std::invalid_argument("");
            return x;
        } catch (...) {
            throw ConfigError("key " + key + ": expected a number, got '" + kv.value + "' (line " +
                              std::to_string(kv.line) + ")");
        }
    }

    long get_int(const std::string& key) const {
        const auto& kv = require(key);
        try {
            std::size_t pos = 0;
            const long x = std::stol(kv.value, &pos);
            if (pos != kv.value.size()) throw std::invalid_argument("");
            return x;
        } catch (...) {
            throw ConfigError("key " + key + ": expected an integer, got '" + kv.value +
                              "' (line " + std::to_string(kv.line) + ")");
        }
    }

    bool get_bool(const std::string& key) const {
        const std::string v = require(key).value;
        if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
        if (v == "false" || v == "0" || v == "no" || v == "off") return false;
        throw ConfigError("key " + key + ": expected a boolean, got '" + v + "' (line " +
                          std::to_string(require(key).line) + ")");
    }

    std::vector<std::string> keys() const {
        std::vector<std::string> ks;
        for (const auto& [k, v] : kv_) ks.push_back(k);
        return ks;
    }

  private:
    const detail::KeyValue& require(const std::string& key) const {
        const auto it = kv_.find(key);
        if (it == kv_.end()) throw ConfigError("missing key: " + key);
        return it->second;
    }

    std::map<std::string, detail::KeyValue> kv_;
};

namespace detail {

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> parts;
    std::string cur;
    for (char ch : s) {
        if (ch == ',') {
            const std::string t = trim(cur);
            if (!t.empty()) parts.push_back(t);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    const std::string t = trim(cur);
    if (!t.empty()) parts.push_back(t);
    return parts;
}

} // namespace detail

/// Single indicator name -> kind; a comma list builds the geometric mean.
inline IndicatorKind parse_indicator(const std::string& name, double eta) {
    const std::vector<std::string> parts = detail::split_list(name);
    if (parts.empty()) throw ConfigError("key indicator: empty value");
    auto one = [eta](const std::string& s) -> IndicatorKind {
        if (s == "constant") return IndicatorKind::of(IndicatorType::Constant, eta);
        if (s == "raw-smagorinsky") return IndicatorKind::of(IndicatorType::RawSmagorinsky, eta);
        if (s == "normalized-gradient")
            return IndicatorKind::of(IndicatorType::NormalizedGradient, eta);
        if (s == "q-criterion") return IndicatorKind::of(IndicatorType::QCriterion, eta);
        if (s == "vreman") return IndicatorKind::of(IndicatorType::Vreman, eta);
        throw ConfigError("key indicator: unknown indicator '" + s + "'");
    };
    if (parts.size() == 1) return one(parts[0]);
    std::vector<IndicatorKind> members;
    for (const auto& p : parts) members.push_back(one(p));
    return IndicatorKind::geometric_mean(std::move(members));
}

inline std::string indicator_label(const IndicatorKind& k) {
    switch (k.type) {
    case IndicatorType::Constant: return "constant";
    case IndicatorType::RawSmagorinsky: return "raw-smagorinsky";
    case IndicatorType::NormalizedGradient: return "normalized-gradient";
    case IndicatorType::QCriterion: return "q-criterion";
    case IndicatorType::Vreman: return "vreman";
    case IndicatorType::GeometricMean: {
        std::string s = "geometric-mean(";
        for (std::size_t i = 0; i < k.parts.size(); ++i)
            s += (i ? "," : "") + indicator_label(k.parts[i]);
        return s + ")";
    }
    }
    return "?";
}

/// Applies the parsed file onto defaults; 'required' keys must be present.
inline RunConfig make_run_config(const ConfigMap& m,
                                 const std::vector<std::string>& required = {}) {
    for (const auto& key : required)
        if (!m.has(key)) throw ConfigError("missing key: " + key);

    static const std::vector<std::string> known = {
        "nx", "ny", "lx", "ly", "dt", "t_final", "nu", "chi0", "indicator", "eta",
        "c_delta", "delta", "eps_floor", "mode", "reproject", "rel_tol", "abs_tol",
        "max_iter", "out_dir", "seed", "stability_action", "dt_list", "sizes"};
    for (const auto& key : m.keys()) {
        bool ok = false;
        for (const auto& k : known) ok = ok || k == key;
        if (!ok) throw ConfigError("unknown key: " + key);
    }

    RunConfig c;
    if (m.has("nx")) c.nx = static_cast<int>(m.get_int("nx"));
    if (m.has("ny")) c.ny = static_cast<int>(m.get_int("ny"));
    if (m.has("lx")) c.lx = m.get_double("lx");
    if (m.has("ly")) c.ly = m.get_double("ly");
    if (m.has("dt")) c.dt = m.get_double("dt");
    if (m.has("t_final")) c.t_final = m.get_double("t_final");
    if (m.has("nu")) c.nu = m.get_double("nu");
    if (m.has("chi0")) c.chi0 = m.get_double("chi0");
    if (m.has("indicator")) c.indicator = m.get_string("indicator");
    if (m.has("eta")) c.eta = m.get_double("eta");
    if (m.has("c_delta")) c.c_delta = m.get_double("c_delta");
    if (m.has("delta")) c.delta = m.get_double("delta");
    if (m.has("eps_floor")) c.eps_floor = m.get_double("eps_floor");
    if (m.has("mode")) c.mode = m.get_string("mode");
    if (m.has("reproject")) c.reproject = m.get_bool("reproject");
    if (m.has("rel_tol")) c.rel_tol = m.get_double("rel_tol");
    if (m.has("abs_tol")) c.abs_tol = m.get_double("abs_tol");
    if (m.has("max_iter")) c.max_iter = static_cast<int>(m.get_int("max_iter"));
    if (m.has("out_dir")) c.out_dir = m.get_string("out_dir");
    if (m.has("seed")) c.seed = static_cast<std::uint64_t>(m.get_int("seed"));
    if (m.has("stability_action")) c.stability_action = m.get_string("stability_action");
    if (m.has("dt_list")) {
        for (const auto& s : detail::split_list(m.get_string("dt_list"))) {
            try {
                c.dt_list.push_back(std::stod(s));
            } catch (...) {
                throw ConfigError("key dt_list: expected numbers, got '" + s + "'");
            }
        }
    }
    if (m.has("sizes")) {
        c.sizes.clear();
        for (const auto& s : detail::split_list(m.get_string("sizes"))) {
            try {
                c.sizes.push_back(std::stoi(s));
            } catch (...) {
                throw ConfigError("key sizes: expected integers, got '" + s + "'");
            }
        }
    }

    if (c.mode != "after-projection" && c.mode != "before-projection")
        throw ConfigError("key mode: expected 'after-projection' or 'before-projection'");
    if (c.stability_action != "warn" && c.stability_action != "abort")
        throw ConfigError("key stability_action: expected 'warn' or 'abort'");
    return c;
}

/// Library-level configs assembled from the validated RunConfig.
inline StepperConfig make_stepper_config(const RunConfig& c, const StaggeredGrid& g) {
    StepperConfig cfg;
    cfg.dt = c.dt;
    cfg.nu = c.nu;
    cfg.mode = c.mode == "before-projection" ? FilterMode::FilterBeforeProjection
                                             : FilterMode::FilterAfterProjection;
    cfg.reproject = c.reproject;
    cfg.solver.rel_tol = c.rel_tol;
    cfg.solver.abs_tol = c.abs_tol;
    cfg.solver.max_iter = c.max_iter;
    cfg.on_violation =
        c.stability_action == "abort" ? StabilityAction::Abort : StabilityAction::Warn;

    const double delta_value =
        c.delta >= 0.0 ? c.delta : c.c_delta * std::max(g.hx, g.hy);
    cfg.filter = FilterSpec::uniform(g, parse_indicator(c.indicator, c.eta), delta_value);
    cfg.filter.chi0 = c.chi0;
    cfg.filter.eps_floor = c.eps_floor;
    cfg.filter.solver = cfg.solver;
    return cfg;
}

} // namespace macflow

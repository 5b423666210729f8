#ifndef RCB_CONFIG_HPP
#define RCB_CONFIG_HPP

// Flat key=value experiment configuration. Lines are `key = value`, '#'
// starts a comment. Command-line overrides use the same keys as --key=value
// and take precedence over the file.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "rcb/harness.hpp"

namespace rcb {

class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string key, const std::string& msg)
        : std::runtime_error(key.empty() ? msg : key + ": " + msg), key_(std::move(key)) {}
    [[nodiscard]] const std::string& key() const { return key_; }

private:
    std::string key_;
};

struct KeyDoc {
    const char* key;
    const char* help;
};

inline constexpr KeyDoc kConfigKeys[] = {
    {"graph", "chain | confounded_parallel | hierarchical | theorem2 (required)"},
    {"n", "node count for chain / confounded_parallel (2..64)"},
    {"layers", "comma-separated layer widths for hierarchical (overrides d, L)"},
    {"d", "layer width (hierarchical, theorem2)"},
    {"L", "number of layers (hierarchical, theorem2)"},
    {"T", "horizon, >= 1 (required)"},
    {"algo", "robust_lcb | linsem_ucb | linsem_ucb_robust | vanilla_ucb | oracle (required)"},
    {"solver", "bonus | pga"},
    {"arms", "all | atomic | list:<arm>|<arm>... with arms as 1-based node ids joined by '+', 'none' for the empty arm"},
    {"measure", "none | df | ad"},
    {"C", "deviation budget, >= 0 (Robust-LCB weights use max(C, 1))"},
    {"m_c", "per-round deviation cap, > 0"},
    {"schedule", "none | early_flip | zeroing"},
    {"seeds", "seed count k (seeds 1..k) or explicit comma-separated list"},
    {"delta", "confidence level in (0, 1); default 1/(2NT)"},
    {"c0", "constant for theory curves, > 0"},
    {"downsample", "write every k-th round plus the last, k >= 1"},
    {"out", "result file path"},
    {"nu_override", "comma-separated noise means, one per node"},
    {"workers", "parallel runs, >= 1"},
};

inline bool is_config_key(std::string_view k) {
    return std::any_of(std::begin(kConfigKeys), std::end(kConfigKeys), [&](const KeyDoc& d) { return k == d.key; });
}

inline std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

using KeyValues = std::map<std::string, std::string>;

inline KeyValues parse_key_values(std::istream& is) {
    KeyValues kv;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
        const std::string body = trim(line);
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos)
            throw ConfigError("", "line " + std::to_string(lineno) + ": expected key=value");
        std::string key = trim(std::string_view(body).substr(0, eq));
        if (!is_config_key(key)) throw ConfigError(key, "unknown key (line " + std::to_string(lineno) + ")");
        kv[key] = trim(std::string_view(body).substr(eq + 1));
    }
    return kv;
}

/// Accepts "--key=value" or "key=value".
inline std::pair<std::string, std::string> parse_override(std::string_view arg) {
    if (arg.substr(0, 2) == "--") arg.remove_prefix(2);
    const auto eq = arg.find('=');
    if (eq == std::string_view::npos) throw ConfigError(std::string(arg), "override must be key=value");
    std::string key = trim(arg.substr(0, eq));
    if (!is_config_key(key)) throw ConfigError(key, "unknown key");
    return {key, trim(arg.substr(eq + 1))};
}

namespace detail {

inline double to_double(const std::string& key, const std::string& v) {
    double x = 0.0;
    const auto* end = v.data() + v.size();
    auto [p, ec] = std::from_chars(v.data(), end, x);
    if (ec != std::errc() || p != end || !std::isfinite(x)) throw ConfigError(key, "not a number: '" + v + "'");
    return x;
}

inline std::uint64_t to_u64(const std::string& key, const std::string& v) {
    std::uint64_t x = 0;
    const auto* end = v.data() + v.size();
    auto [p, ec] = std::from_chars(v.data(), end, x);
    if (ec != std::errc() || p != end) throw ConfigError(key, "not a non-negative integer: '" + v + "'");
    return x;
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(s);
    while (std::getline(is, cur, sep)) out.push_back(trim(cur));
    if (!s.empty() && s.back() == sep) out.emplace_back();
    return out;
}

inline Intervention parse_arm(const std::string& key, const std::string& s) {
    if (s == "none" || s == "{}") return Intervention::none();
    Intervention a;
    for (const auto& tok : split(s, '+')) {
        const auto id = to_u64(key, tok);
        if (id < 1 || id > kMaxNodes) throw ConfigError(key, "node id out of range: " + tok);
        a.bits |= std::uint64_t{1} << (id - 1);
    }
    return a;
}

}  // namespace detail

struct ParsedConfig {
    ExperimentConfig config;
    std::vector<std::string> warnings;
};

inline ParsedConfig build_config(const KeyValues& kv) {
    using namespace detail;
    ParsedConfig out;
    ExperimentConfig& c = out.config;
    for (const char* req : {"graph", "T", "algo"})
        if (!kv.count(req)) throw ConfigError(req, "missing required key");
    auto get = [&](const char* k) -> const std::string* {
        auto it = kv.find(k);
        return it == kv.end() ? nullptr : &it->second;
    };
    auto size_in = [&](const char* k, std::uint64_t lo, std::uint64_t hi) {
        const auto v = to_u64(k, *get(k));
        if (v < lo || v > hi)
            throw ConfigError(k, "out of range [" + std::to_string(lo) + ", " + std::to_string(hi) + "]: " + *get(k));
        return static_cast<std::size_t>(v);
    };

    c.graph = *get("graph");
    if (c.graph != "chain" && c.graph != "confounded_parallel" && c.graph != "hierarchical" && c.graph != "theorem2")
        throw ConfigError("graph", "unknown preset '" + c.graph + "'");
    if (get("n")) c.n = size_in("n", 2, kMaxNodes);
    if (get("d")) c.d = size_in("d", 1, 63);
    if (get("L")) c.L = size_in("L", 1, 63);
    if (get("layers")) {
        for (const auto& w : split(*get("layers"), ',')) {
            const auto v = to_u64("layers", w);
            if (v == 0) throw ConfigError("layers", "layer widths must be positive");
            c.layers.push_back(static_cast<std::size_t>(v));
        }
        if (c.layers.empty()) throw ConfigError("layers", "no widths given");
    }
    c.T = size_in("T", 1, 100'000'000);

    const auto algo = parse_policy_kind(*get("algo"));
    if (!algo) throw ConfigError("algo", "unknown algorithm '" + *get("algo") + "'");
    c.algo = *algo;
    if (const auto* s = get("solver")) {
        if (*s == "bonus") c.solver = Solver::bonus;
        else if (*s == "pga") c.solver = Solver::projected_ascent;
        else throw ConfigError("solver", "expected bonus or pga, got '" + *s + "'");
    }
    if (const auto* s = get("arms")) {
        if (*s == "all") c.arm_mode = ArmMode::all;
        else if (*s == "atomic") c.arm_mode = ArmMode::atomic;
        else if (s->rfind("list:", 0) == 0) {
            c.arm_mode = ArmMode::list;
            for (const auto& tok : split(s->substr(5), '|')) c.arm_list.push_back(parse_arm("arms", tok));
            if (c.arm_list.empty()) throw ConfigError("arms", "empty arm list");
        } else {
            throw ConfigError("arms", "expected all, atomic or list:..., got '" + *s + "'");
        }
    }
    if (const auto* s = get("measure")) {
        if (*s == "none") c.measure = Measure::none;
        else if (*s == "df") c.measure = Measure::df;
        else if (*s == "ad") c.measure = Measure::ad;
        else throw ConfigError("measure", "expected none, df or ad, got '" + *s + "'");
    }
    if (const auto* s = get("C")) {
        c.C = to_double("C", *s);
        if (c.C < 0) throw ConfigError("C", "must be >= 0");
    }
    if (const auto* s = get("m_c")) {
        c.m_c = to_double("m_c", *s);
        if (c.m_c <= 0) throw ConfigError("m_c", "must be > 0");
    }
    if (const auto* s = get("schedule")) {
        if (*s == "none") c.schedule = ScheduleKind::none;
        else if (*s == "early_flip") c.schedule = ScheduleKind::early_flip;
        else if (*s == "zeroing") c.schedule = ScheduleKind::zeroing;
        else throw ConfigError("schedule", "expected none, early_flip or zeroing, got '" + *s + "'");
    } else if (c.measure != Measure::none) {
        c.schedule = ScheduleKind::early_flip;
    }
    if (c.schedule != ScheduleKind::none && c.measure == Measure::none)
        throw ConfigError("measure", "a deviation schedule needs measure df or ad");
    if (const auto* s = get("seeds")) {
        if (s->find(',') == std::string::npos) {
            const auto k = size_in("seeds", 1, 1'000'000);
            c.seeds.clear();
            for (std::uint64_t i = 1; i <= k; ++i) c.seeds.push_back(i);
        } else {
            c.seeds.clear();
            for (const auto& tok : split(*s, ',')) c.seeds.push_back(to_u64("seeds", tok));
            auto sorted = c.seeds;
            std::sort(sorted.begin(), sorted.end());
            if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
                throw ConfigError("seeds", "seeds must be distinct");
        }
    }
    if (const auto* s = get("delta")) {
        const double dl = to_double("delta", *s);
        if (!(dl > 0 && dl < 1)) throw ConfigError("delta", "must lie in (0, 1)");
        c.delta = dl;
    }
    if (const auto* s = get("c0")) {
        c.c0 = to_double("c0", *s);
        if (c.c0 <= 0) throw ConfigError("c0", "must be > 0");
    }
    if (get("downsample")) c.downsample = size_in("downsample", 1, 100'000'000);
    if (const auto* s = get("out")) c.out = *s;
    if (const auto* s = get("nu_override")) {
        std::vector<double> nu;
        for (const auto& tok : split(*s, ',')) nu.push_back(to_double("nu_override", tok));
        c.nu_override = std::move(nu);
    }
    if (get("workers")) c.workers = size_in("workers", 1, 1024);

    if (c.algo == PolicyKind::robust_lcb && c.C < 1.0)
        out.warnings.push_back("C = " + format_double(c.C) + " < 1; Robust-LCB sample weights use C = 1");
    return out;
}

inline ParsedConfig parse_config(std::istream& file, const std::vector<std::string>& overrides = {}) {
    KeyValues kv = parse_key_values(file);
    for (const auto& o : overrides) {
        auto [k, v] = parse_override(o);
        kv[k] = v;
    }
    return build_config(kv);
}

inline ParsedConfig parse_config_file(const std::string& path, const std::vector<std::string>& overrides = {}) {
    std::ifstream is(path);
    if (!is) throw ConfigError("", "cannot open config file " + path);
    return parse_config(is, overrides);
}

inline ParsedConfig parse_config_string(const std::string& text, const std::vector<std::string>& overrides = {}) {
    std::istringstream is(text);
    return parse_config(is, overrides);
}

inline std::string config_help() {
    std::string h = "Configuration keys (file: key = value, flags: --key=value):\n";
    for (const auto& k : kConfigKeys) h += "  " + std::string(k.key) + std::string(12 - std::string_view(k.key).size(), ' ') + k.help + "\n";
    return h;
}

}  // namespace rcb

#endif  // RCB_CONFIG_HPP

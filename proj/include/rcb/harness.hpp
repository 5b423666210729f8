#ifndef RCB_HARNESS_HPP
#define RCB_HARNESS_HPP

// Seeded bandit episodes, regret accounting, aggregation over seeds, and
// the delimited result-file format.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "rcb/deviation.hpp"
#include "rcb/estimation.hpp"
#include "rcb/policies.hpp"
#include "rcb/presets.hpp"
#include "rcb/rng.hpp"
#include "rcb/sem.hpp"
#include "rcb/theory.hpp"

namespace rcb {

enum class ArmMode { all, atomic, list };

struct ExperimentConfig {
    std::string graph = "chain";
    std::size_t n = 4;
    std::vector<std::size_t> layers;
    std::size_t d = 3;
    std::size_t L = 2;
    std::size_t T = 1000;
    PolicyKind algo = PolicyKind::robust_lcb;
    Solver solver = Solver::projected_ascent;
    ArmMode arm_mode = ArmMode::all;
    std::vector<Intervention> arm_list;
    Measure measure = Measure::none;
    double C = 0.0;
    double m_c = 2.0;
    ScheduleKind schedule = ScheduleKind::none;
    std::vector<std::uint64_t> seeds{1};
    std::optional<double> delta;
    double c0 = 1.0;
    std::size_t downsample = 1;
    std::string out;
    std::optional<std::vector<double>> nu_override;
    std::size_t workers = 1;
    AscentOptions ascent;
};

/// Substream ids under a run's root seed.
inline constexpr std::uint64_t kInstanceStream = 0;
inline constexpr std::uint64_t kEnvironmentStream = 1;
inline constexpr std::uint64_t kPolicyStream = 2;

inline SemInstance build_instance(const ExperimentConfig& cfg, std::uint64_t seed) {
    Rng rng(seed, kInstanceStream);
    if (cfg.graph == "chain") return chain_instance(cfg.n, rng, cfg.nu_override);
    if (cfg.graph == "confounded_parallel") return confounded_parallel_instance(cfg.n, rng, cfg.nu_override);
    if (cfg.graph == "hierarchical") {
        auto widths = cfg.layers.empty() ? std::vector<std::size_t>(cfg.L, cfg.d) : cfg.layers;
        return hierarchical_instance(widths, rng, cfg.nu_override);
    }
    if (cfg.graph == "theorem2") return theorem2_instance(cfg.d, cfg.L).sem;
    throw std::invalid_argument("unknown graph preset: " + cfg.graph);
}

inline std::vector<Intervention> build_arms(const ExperimentConfig& cfg, std::size_t n_nodes) {
    switch (cfg.arm_mode) {
        case ArmMode::all:
            if (n_nodes > 16) throw std::invalid_argument("arms=all is limited to 16 nodes; use atomic or list");
            return all_arms(n_nodes);
        case ArmMode::atomic: return atomic_arms(n_nodes);
        case ArmMode::list:
            for (const Intervention& a : cfg.arm_list)
                if (n_nodes < 64 && (a.bits >> n_nodes) != 0) throw std::invalid_argument("arm list names a node outside the graph");
            if (cfg.arm_list.empty()) throw std::invalid_argument("arm list is empty");
            return cfg.arm_list;
    }
    return {};
}

/// Every node with parents is a deviation target.
inline DeviationSchedule build_schedule(const ExperimentConfig& cfg, const SemInstance& sem) {
    switch (cfg.schedule) {
        case ScheduleKind::early_flip: {
            std::vector<NodeId> targets;
            for (NodeId i = 0; i < sem.n_nodes(); ++i)
                if (sem.dag().in_degree(i) > 0) targets.push_back(i);
            return DeviationSchedule::early_flip(sem, cfg.measure, cfg.C, cfg.m_c, targets, cfg.T);
        }
        case ScheduleKind::zeroing:
            if (cfg.measure == Measure::none) return DeviationSchedule::zero(sem.n_nodes());
            if (static_cast<double>(cfg.T) < std::floor(cfg.C))
                throw std::invalid_argument("budget infeasible: zeroing rounds exceed horizon");
            return DeviationSchedule::zeroing(sem, cfg.C, cfg.measure);
        case ScheduleKind::none: break;
    }
    return DeviationSchedule::zero(sem.n_nodes());
}

inline ConfidenceSpec build_confidence(const ExperimentConfig& cfg, const SemInstance& sem) {
    ConfidenceSpec s;
    s.delta = cfg.delta.value_or(ConfidenceSpec::default_delta(sem.n_nodes(), cfg.T));
    s.budget = cfg.algo == PolicyKind::linsem_ucb_robust ? cfg.C : std::max(cfg.C, 1.0);
    s.m_x = sem.m_x();
    s.d = sem.dag().max_in_degree();
    s.horizon = cfg.T;
    return s;
}

struct RunOptions {
    /// Track min over rounds of index(a*) - mu(a*) (SEM policies).
    bool audit_optimism = false;
    /// Count rounds where a nominal column leaves its confidence ellipsoid.
    bool audit_coverage = false;
};

struct Trajectory {
    std::uint64_t seed = 0;
    std::vector<std::uint64_t> arm;
    /// X_N(t).
    std::vector<double> reward;
    /// mu(a*) - <f(D_{a(t)}(t)), nu>, with a* the nominal optimum.
    std::vector<double> instant_regret;
    /// Regret against the best arm of the round's deviated model.
    std::vector<double> fluctuating_regret;
    double mu_star = 0.0;
    Intervention best = {};
    std::vector<std::size_t> obs_count;
    std::vector<std::size_t> int_count;
    std::vector<std::size_t> arm_plays;
    double min_optimism_margin = std::numeric_limits<double>::infinity();
    std::size_t coverage_violations = 0;
    BudgetReport budget;
};

/// Prefix sums of the instantaneous pseudo-regret.
inline std::vector<double> pseudo_regret(const Trajectory& tr) {
    std::vector<double> cum(tr.instant_regret.size());
    double s = 0.0;
    for (std::size_t t = 0; t < cum.size(); ++t) cum[t] = s += tr.instant_regret[t];
    return cum;
}

/// One episode. Deterministic in (config, seed).
inline Trajectory run_once(const ExperimentConfig& cfg, std::uint64_t seed, const RunOptions& opts = {}) {
    if (cfg.T == 0) throw std::invalid_argument("horizon must be positive");
    const SemInstance sem = build_instance(cfg, seed);
    const auto arms = build_arms(cfg, sem.n_nodes());
    const DeviationSchedule schedule = build_schedule(cfg, sem);
    Trajectory tr;
    tr.seed = seed;
    tr.budget = schedule.realized_budget();
    const auto [best, mu_star] = best_arm(sem, arms);
    tr.best = best;
    tr.mu_star = mu_star;
    const std::size_t best_idx = static_cast<std::size_t>(std::find(arms.begin(), arms.end(), best) - arms.begin());

    Policy policy(cfg.algo, sem, arms, build_confidence(cfg, sem), cfg.solver, cfg.ascent,
                  Rng(seed, kPolicyStream));
    Rng env(seed, kEnvironmentStream);

    tr.arm.reserve(cfg.T);
    tr.reward.reserve(cfg.T);
    tr.instant_regret.reserve(cfg.T);
    tr.fluctuating_regret.reserve(cfg.T);
    tr.arm_plays.assign(arms.size(), 0);
    const bool sem_policy = cfg.algo != PolicyKind::vanilla_ucb && cfg.algo != PolicyKind::oracle;

    for (std::size_t t = 1; t <= cfg.T; ++t) {
        if (opts.audit_optimism && sem_policy)
            tr.min_optimism_margin =
                std::min(tr.min_optimism_margin, policy.ucb_index_bonus(best_idx, t) - mu_star);
        const std::size_t k = policy.select(t);
        const Intervention a = arms[k];
        const WeightMatrix actual = schedule.apply(t, compose_weights(sem, a));
        const double mu_t = expected_reward(actual, sem.nu());
        double round_best = mu_star;
        if (schedule.active(t)) {
            round_best = -std::numeric_limits<double>::infinity();
            for (const Intervention& b : arms)
                round_best = std::max(round_best, expected_reward(schedule.apply(t, compose_weights(sem, b)), sem.nu()));
        }
        const Sample s = sample(actual, sem.noise(), env, sem.m_x());
        policy.observe(k, s.x, t);

        tr.arm.push_back(a.bits);
        tr.reward.push_back(s.x[sem.dag().reward_node()]);
        tr.instant_regret.push_back(mu_star - mu_t);
        tr.fluctuating_regret.push_back(round_best - mu_t);
        ++tr.arm_plays[k];

        if (opts.audit_coverage && sem_policy) {
            const double r = policy.radius(t);
            for (NodeId i = 0; i < sem.n_nodes(); ++i) {
                if (sem.dag().in_degree(i) == 0) continue;
                if (policy.regressor(i, Variant::observational).ellipsoid_norm(sem.b_obs().column(i)) > r ||
                    policy.regressor(i, Variant::interventional).ellipsoid_norm(sem.b_int().column(i)) > r) {
                    ++tr.coverage_violations;
                    break;
                }
            }
        }
    }
    tr.obs_count.resize(sem.n_nodes());
    tr.int_count.resize(sem.n_nodes());
    for (NodeId i = 0; i < sem.n_nodes(); ++i) {
        tr.obs_count[i] = policy.regressor(i, Variant::observational).count();
        tr.int_count[i] = policy.regressor(i, Variant::interventional).count();
    }
    return tr;
}

struct CurveMeta {
    std::string algo;
    std::string graph;
    std::size_t n_nodes = 0;
    std::size_t d = 0;
    std::size_t L = 0;
    std::string measure = "none";
    double C = 0.0;
    std::size_t n_seeds = 0;

    bool operator==(const CurveMeta&) const = default;
};

/// Per-round aggregate over seeds. `t` lists the rounds present (all rounds
/// unless read back from a downsampled file).
struct RegretCurve {
    CurveMeta meta;
    std::vector<std::size_t> t;
    std::vector<double> mean_regret;
    std::vector<double> std_regret;
    std::vector<double> mean_reward;

    [[nodiscard]] double final_regret() const { return mean_regret.empty() ? 0.0 : mean_regret.back(); }
    /// Mean cumulative regret at round `round` (must be present).
    [[nodiscard]] double regret_at(std::size_t round) const {
        auto it = std::lower_bound(t.begin(), t.end(), round);
        if (it == t.end() || *it != round) throw std::out_of_range("round not present in curve");
        return mean_regret[static_cast<std::size_t>(it - t.begin())];
    }
    bool operator==(const RegretCurve&) const = default;
};

inline CurveMeta curve_meta(const ExperimentConfig& cfg) {
    const SemInstance sem = build_instance(cfg, cfg.seeds.empty() ? 0 : cfg.seeds.front());
    CurveMeta m;
    m.algo = to_string(cfg.algo);
    m.graph = cfg.graph;
    m.n_nodes = sem.n_nodes();
    m.d = sem.dag().max_in_degree();
    m.L = sem.dag().longest_path();
    m.measure = to_string(cfg.measure);
    m.C = cfg.C;
    m.n_seeds = cfg.seeds.size();
    return m;
}

/// Aggregates trajectories (in the given order) into mean and population
/// standard deviation per round.
inline RegretCurve aggregate(const CurveMeta& meta, const std::vector<Trajectory>& runs) {
    if (runs.empty()) throw std::invalid_argument("nothing to aggregate");
    const std::size_t T = runs.front().instant_regret.size();
    RegretCurve c;
    c.meta = meta;
    c.meta.n_seeds = runs.size();
    c.t.resize(T);
    c.mean_regret.assign(T, 0.0);
    c.std_regret.assign(T, 0.0);
    c.mean_reward.assign(T, 0.0);
    std::vector<std::vector<double>> cum;
    cum.reserve(runs.size());
    for (const auto& r : runs) cum.push_back(pseudo_regret(r));
    const double n = static_cast<double>(runs.size());
    for (std::size_t t = 0; t < T; ++t) {
        c.t[t] = t + 1;
        double s = 0.0, rw = 0.0;
        for (std::size_t k = 0; k < runs.size(); ++k) {
            s += cum[k][t];
            rw += runs[k].reward[t];
        }
        const double mean = s / n;
        double v = 0.0;
        for (std::size_t k = 0; k < runs.size(); ++k) v += (cum[k][t] - mean) * (cum[k][t] - mean);
        c.mean_regret[t] = mean;
        c.std_regret[t] = std::sqrt(v / n);
        c.mean_reward[t] = rw / n;
    }
    return c;
}

/// Runs every seed (concurrently, up to `cfg.workers` threads) and
/// aggregates in ascending seed order, so the result does not depend on
/// seed-list order or scheduling. The first failure in seed order is
/// rethrown.
inline RegretCurve run_many(const ExperimentConfig& cfg, std::vector<Trajectory>* keep = nullptr,
                            const RunOptions& opts = {}) {
    if (cfg.seeds.empty()) throw std::invalid_argument("at least one seed required");
    std::vector<std::uint64_t> seeds = cfg.seeds;
    std::sort(seeds.begin(), seeds.end());
    if (std::adjacent_find(seeds.begin(), seeds.end()) != seeds.end()) throw std::invalid_argument("seeds must be distinct");
    std::vector<Trajectory> runs(seeds.size());
    std::vector<std::exception_ptr> errors(seeds.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t k = next++; k < seeds.size(); k = next++) {
            try {
                runs[k] = run_once(cfg, seeds[k], opts);
            } catch (...) {
                errors[k] = std::current_exception();
            }
        }
    };
    const std::size_t n_threads = std::max<std::size_t>(1, std::min(cfg.workers, seeds.size()));
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < n_threads; ++w) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    RegretCurve curve = aggregate(curve_meta(cfg), runs);
    if (keep) *keep = std::move(runs);
    return curve;
}

inline constexpr const char* kResultColumns[] = {"t", "algo", "graph", "n_nodes", "d", "L", "measure",
                                                 "C", "mean_regret", "std_regret", "mean_reward", "n_seeds"};

inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Rows for rounds 1, k+1, 2k+1, ... and the final round.
inline std::vector<std::size_t> downsample_rows(std::size_t n_rows, std::size_t every) {
    std::vector<std::size_t> rows;
    if (n_rows == 0) return rows;
    every = std::max<std::size_t>(every, 1);
    for (std::size_t r = 0; r < n_rows; r += every) rows.push_back(r);
    if (rows.back() != n_rows - 1) rows.push_back(n_rows - 1);
    return rows;
}

inline void write_results(const RegretCurve& c, std::ostream& os, std::size_t every = 1) {
    for (std::size_t k = 0; k < std::size(kResultColumns); ++k) os << (k ? "," : "") << kResultColumns[k];
    os << '\n';
    for (std::size_t r : downsample_rows(c.t.size(), every)) {
        os << c.t[r] << ',' << c.meta.algo << ',' << c.meta.graph << ',' << c.meta.n_nodes << ',' << c.meta.d << ','
           << c.meta.L << ',' << c.meta.measure << ',' << format_double(c.meta.C) << ','
           << format_double(c.mean_regret[r]) << ',' << format_double(c.std_regret[r]) << ','
           << format_double(c.mean_reward[r]) << ',' << c.meta.n_seeds << '\n';
    }
}

inline void write_results(const RegretCurve& c, const std::string& path, std::size_t every = 1) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    write_results(c, os, every);
    if (!os) throw std::runtime_error("write failed: " + path);
}

class ResultParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline std::vector<std::string> split_fields(const std::string& line, char sep = ',') {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(line);
    while (std::getline(is, cur, sep)) out.push_back(cur);
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

inline RegretCurve read_results(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw ResultParseError("line 1: empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = split_fields(line);
    for (std::size_t k = 0; k < std::size(kResultColumns); ++k) {
        if (k >= header.size() || header[k] != kResultColumns[k]) {
            if (std::find(header.begin(), header.end(), kResultColumns[k]) == header.end())
                throw ResultParseError("line 1: missing column '" + std::string(kResultColumns[k]) + "'");
            throw ResultParseError("line 1: column '" + std::string(kResultColumns[k]) + "' out of order");
        }
    }
    if (header.size() != std::size(kResultColumns)) throw ResultParseError("line 1: unexpected extra columns");
    RegretCurve c;
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto f = split_fields(line);
        const std::string where = "line " + std::to_string(lineno) + ": ";
        if (f.size() != std::size(kResultColumns))
            throw ResultParseError(where + "expected " + std::to_string(std::size(kResultColumns)) + " fields, got " +
                                   std::to_string(f.size()));
        try {
            std::size_t pos = 0;
            auto as_size = [&](const std::string& s) {
                const auto v = std::stoull(s, &pos);
                if (pos != s.size()) throw std::invalid_argument(s);
                return static_cast<std::size_t>(v);
            };
            auto as_double = [&](const std::string& s) {
                const double v = std::stod(s, &pos);
                if (pos != s.size()) throw std::invalid_argument(s);
                return v;
            };
            CurveMeta m{f[1], f[2], as_size(f[3]), as_size(f[4]), as_size(f[5]), f[6], as_double(f[7]), as_size(f[11])};
            if (c.t.empty()) {
                c.meta = m;
            } else if (!(m == c.meta)) {
                throw ResultParseError(where + "metadata differs from first row");
            }
            const std::size_t t = as_size(f[0]);
            if (!c.t.empty() && t <= c.t.back()) throw ResultParseError(where + "rounds must increase");
            c.t.push_back(t);
            c.mean_regret.push_back(as_double(f[8]));
            c.std_regret.push_back(as_double(f[9]));
            c.mean_reward.push_back(as_double(f[10]));
        } catch (const ResultParseError&) {
            throw;
        } catch (const std::exception& e) {
            throw ResultParseError(where + "malformed value (" + e.what() + ")");
        }
    }
    return c;
}

inline RegretCurve read_results(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ResultParseError("cannot open " + path);
    return read_results(is);
}

}  // namespace rcb

#endif  // RCB_HARNESS_HPP

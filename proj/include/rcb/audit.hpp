#ifndef RCB_AUDIT_HPP
#define RCB_AUDIT_HPP

// Self-checks of the library against independent computations: reward map
// against path enumeration, the compounding-error bound on random
// admissible instances, the lower-bound instance gap, schedule budgets,
// oracle-zero regret, and confidence-set coverage.

#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rcb/harness.hpp"
#include "rcb/theory.hpp"

namespace rcb {

struct AuditResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

namespace detail {

inline std::shared_ptr<const Dag> random_dag(std::size_t n, double p, std::size_t max_in, Rng& rng) {
    std::vector<std::vector<NodeId>> pa(n);
    for (NodeId i = 1; i < n; ++i)
        for (NodeId j = 0; j < i; ++j)
            if (pa[i].size() < max_in && rng.uniform() < p) pa[i].push_back(j);
    if (pa[n - 1].empty()) pa[n - 1].push_back(n - 2);
    return make_dag(std::move(pa));
}

inline WeightMatrix random_unit_columns(std::shared_ptr<const Dag> dag, Rng& rng) {
    WeightMatrix w(dag);
    for (NodeId i = 0; i < dag->n_nodes(); ++i) {
        auto col = w.column(i);
        if (col.empty()) continue;
        double s = 0.0;
        for (auto& v : col) {
            v = rng.normal();
            s += v * v;
        }
        const double scale = rng.uniform() / std::sqrt(s);
        for (auto& v : col) v *= scale;
    }
    return w;
}

}  // namespace detail

/// reward_map against f_paths on random DAGs with at most `max_nodes` nodes.
inline AuditResult audit_reward_map(std::size_t graphs, std::size_t max_nodes, std::uint64_t seed) {
    Rng rng(seed);
    double worst = 0.0;
    for (std::size_t g = 0; g < graphs; ++g) {
        const std::size_t n = 2 + static_cast<std::size_t>(rng.uniform() * static_cast<double>(max_nodes - 1));
        auto dag = detail::random_dag(n, 0.5, n, rng);
        const auto w = detail::random_unit_columns(dag, rng);
        const auto a = reward_map(w);
        const auto b = f_paths(w, dag->longest_path());
        for (std::size_t j = 0; j < n; ++j) worst = std::max(worst, std::abs(a[j] - b[j]));
    }
    std::ostringstream os;
    os << graphs << " graphs, max |diff| " << worst;
    return {"reward_map vs path enumeration", worst <= 1e-9, os.str()};
}

/// Random (A, B, {M_i}, beta) with in-degree <= max_d and longest path <=
/// max_L, each A column placed inside its ellipsoid; counts bound failures.
inline AuditResult audit_compounding_error(std::size_t instances, std::size_t max_d, std::size_t max_L, std::uint64_t seed) {
    Rng rng(seed);
    std::size_t done = 0, failed = 0, tries = 0;
    while (done < instances && tries < 100 * instances) {
        ++tries;
        const std::size_t n = 3 + static_cast<std::size_t>(rng.uniform() * 8);
        auto dag = detail::random_dag(n, 0.3 + 0.5 * rng.uniform(), max_d, rng);
        if (dag->longest_path() > max_L) continue;
        const Eigen::MatrixXd B = detail::random_unit_columns(dag, rng).dense();
        Eigen::MatrixXd A = B;
        const double beta = 3.0 * rng.uniform();
        const auto nn = static_cast<Eigen::Index>(n);
        std::vector<Eigen::MatrixXd> metrics;
        for (NodeId i = 0; i < n; ++i) {
            auto pa = dag->parents(i);
            const auto k = static_cast<Eigen::Index>(pa.size());
            Eigen::MatrixXd G(k, k);
            for (Eigen::Index u = 0; u < k * k; ++u) G.data()[u] = rng.normal();
            const Eigen::MatrixXd block = Eigen::MatrixXd::Identity(k, k) + 10.0 * rng.uniform() * G * G.transpose();
            Eigen::MatrixXd M = Eigen::MatrixXd::Identity(nn, nn);
            for (Eigen::Index u = 0; u < k; ++u)
                for (Eigen::Index v = 0; v < k; ++v)
                    M(static_cast<Eigen::Index>(pa[static_cast<std::size_t>(u)]),
                      static_cast<Eigen::Index>(pa[static_cast<std::size_t>(v)])) = block(u, v);
            metrics.push_back(std::move(M));
            if (k == 0) continue;
            Eigen::VectorXd z(k);
            for (Eigen::Index u = 0; u < k; ++u) z(u) = rng.normal();
            const Eigen::LLT<Eigen::MatrixXd> llt(block);
            const Eigen::VectorXd delta = llt.matrixU().solve(z / z.norm()) * (beta * rng.uniform());
            for (Eigen::Index u = 0; u < k; ++u)
                A(static_cast<Eigen::Index>(pa[static_cast<std::size_t>(u)]), static_cast<Eigen::Index>(i)) += delta(u);
        }
        const auto res = compounding_error_check(*dag, A, B, metrics, beta);
        if (res.precondition_error) continue;
        ++done;
        failed += !res.holds;
    }
    std::ostringstream os;
    os << done << " instances, " << failed << " violations";
    return {"compounding-error bound", done == instances && failed == 0, os.str()};
}

inline AuditResult audit_hard_instance_gap() {
    const std::pair<std::size_t, std::size_t> grid[] = {{1, 1}, {3, 2}, {4, 2}};
    double worst = 0.0;
    for (auto [d, L] : grid) {
        const auto inst = theorem2_instance(d, L);
        worst = std::max(worst, std::abs(reward_intervention_gap(inst.sem) - std::pow(double(d), double(L) / 2.0)));
    }
    std::ostringstream os;
    os << "max |gap - d^(L/2)| " << worst;
    return {"lower-bound instance gap", worst <= 1e-9, os.str()};
}

/// Every preset and schedule kind over a grid of budgets passes its own
/// budget accounting.
inline AuditResult audit_budgets() {
    std::size_t checked = 0;
    try {
        for (const char* graph : {"chain", "confounded_parallel", "hierarchical", "theorem2"}) {
            ExperimentConfig cfg;
            cfg.graph = graph;
            cfg.n = 5;
            cfg.d = 3;
            cfg.L = 2;
            cfg.T = 20000;
            const SemInstance sem = build_instance(cfg, 1);
            for (double C : {0.0, 1.0, 2.0, 10.0, 50.0, 142.0, 500.0, 2000.0}) {
                for (Measure m : {Measure::df, Measure::ad}) {
                    for (ScheduleKind k : {ScheduleKind::early_flip, ScheduleKind::zeroing}) {
                        cfg.C = C;
                        cfg.measure = m;
                        cfg.schedule = k;
                        (void)build_schedule(cfg, sem).realized_budget();
                        ++checked;
                    }
                }
            }
        }
    } catch (const std::exception& e) {
        return {"schedule budgets", false, e.what()};
    }
    return {"schedule budgets", true, std::to_string(checked) + " schedules within budget"};
}

inline AuditResult audit_oracle_zero() {
    ExperimentConfig cfg;
    cfg.graph = "chain";
    cfg.n = 4;
    cfg.T = 200;
    cfg.algo = PolicyKind::oracle;
    cfg.seeds = {1, 2, 3};
    const auto c = run_many(cfg);
    double worst = 0.0;
    for (double v : c.mean_regret) worst = std::max(worst, std::abs(v));
    return {"oracle regret without deviation", worst == 0.0, "max |R(t)| " + std::to_string(worst)};
}

/// Rounds at which any nominal column leaves its confidence ellipsoid,
/// summed over seeds.
inline AuditResult audit_coverage(const ExperimentConfig& cfg) {
    RunOptions opts;
    opts.audit_coverage = true;
    std::vector<Trajectory> runs;
    (void)run_many(cfg, &runs, opts);
    std::size_t bad = 0, seeds_bad = 0;
    for (const auto& r : runs) {
        bad += r.coverage_violations;
        seeds_bad += r.coverage_violations > 0;
    }
    std::ostringstream os;
    os << runs.size() << " seeds x " << cfg.T << " rounds, " << bad << " violating rounds in " << seeds_bad << " seeds";
    return {"confidence-set coverage", bad == 0, os.str()};
}

}  // namespace rcb

#endif  // RCB_AUDIT_HPP

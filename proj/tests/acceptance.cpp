// Acceptance suite: one PASS/FAIL line per criterion.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "rcb/audit.hpp"
#include "rcb/harness.hpp"
#include "rcb/theory.hpp"

using namespace rcb;

namespace {

struct Outcome {
    bool passed;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

std::string fmt(double v, int prec = 4) {
    std::ostringstream os;
    os.precision(prec);
    os << v;
    return os.str();
}

ExperimentConfig chain_protocol(PolicyKind algo, std::size_t T, double C, std::size_t seeds) {
    ExperimentConfig c;
    c.graph = "chain";
    c.n = 4;
    c.T = T;
    c.algo = algo;
    c.solver = Solver::projected_ascent;
    c.measure = Measure::ad;
    c.schedule = ScheduleKind::early_flip;
    c.C = C;
    c.seeds.clear();
    for (std::uint64_t s = 1; s <= seeds; ++s) c.seeds.push_back(s);
    return c;
}

// 1. Monte-Carlo mean of X_N against <f(B_a), nu> on the chain preset.
Outcome mean_consistency() {
    ExperimentConfig cfg;
    cfg.graph = "chain";
    cfg.n = 4;
    const SemInstance sem = build_instance(cfg, 1);
    Rng rng(1, 99);
    std::string detail;
    bool ok = true;
    for (Intervention a : {Intervention::none(), Intervention::of({3})}) {
        const WeightMatrix w = compose_weights(sem, a);
        // independent oracle: propagate noise means through the chain by hand
        std::vector<double> mean(4);
        for (NodeId i = 0; i < 4; ++i) mean[i] = sem.nu()[i] + (i ? w.column(i)[0] * mean[i - 1] : 0.0);
        double sum = 0.0;
        const int n = 200000;
        for (int k = 0; k < n; ++k) sum += sample(w, sem.noise(), rng).x[3];
        const double mc = sum / n, mu = expected_reward(w, sem.nu());
        ok = ok && std::abs(mc - mu) <= 0.01 && std::abs(mean[3] - mu) <= 1e-12;
        detail += (detail.empty() ? "" : "; ") + std::string(a.bits ? "arm {4}" : "arm {}") + " MC " + fmt(mc, 6) +
                  " vs " + fmt(mu, 6);
    }
    return {ok, detail};
}

Outcome reward_map_oracle() {
    const auto r = audit_reward_map(100, 8, 2024);
    return {r.passed, r.detail};
}

Outcome compounding_error() {
    const auto r = audit_compounding_error(1000, 5, 4, 77);
    return {r.passed, r.detail};
}

// 4. Confidence-set coverage under a within-budget DF early flip.
Outcome coverage() {
    ExperimentConfig cfg = chain_protocol(PolicyKind::robust_lcb, 2000, 10.0, 50);
    cfg.measure = Measure::df;
    cfg.solver = Solver::bonus;
    const auto r = audit_coverage(cfg);
    return {r.passed, r.detail};
}

// 5. Robust-LCB against LinSEM-UCB at C = ceil(sqrt(T)).
Outcome separation() {
    const std::size_t T = 20000;
    const double C = std::ceil(std::sqrt(double(T)));
    const auto robust = run_many(chain_protocol(PolicyKind::robust_lcb, T, C, 20));
    const auto linsem = run_many(chain_protocol(PolicyKind::linsem_ucb, T, C, 20));
    const double rr = robust.final_regret(), rl = linsem.final_regret();
    const double gr = rr / robust.regret_at(T / 2), gl = rl / linsem.regret_at(T / 2);
    const bool ok = rr <= 0.5 * rl && gr <= 1.8 && gl >= 1.9;
    return {ok, "R_robust " + fmt(rr) + ", R_linsem " + fmt(rl) + " (need ratio <= 0.5, got " + fmt(rr / rl, 3) +
                    "); growth robust " + fmt(gr, 3) + " (<= 1.8), linsem " + fmt(gl, 3) + " (>= 1.9)"};
}

// 6. Deviation-level sweep.
Outcome sweep_c() {
    std::vector<double> robust;
    double linsem_500 = 0.0;
    for (double C : {2.0, 50.0, 500.0}) {
        robust.push_back(run_many(chain_protocol(PolicyKind::robust_lcb, 20000, C, 10)).final_regret());
        if (C == 500.0) linsem_500 = run_many(chain_protocol(PolicyKind::linsem_ucb, 20000, C, 10)).final_regret();
    }
    const bool mono = robust[0] <= robust[1] && robust[1] <= robust[2];
    const bool ok = mono && robust[2] <= linsem_500 / 3.0;
    return {ok, "robust R(T) at C=2,50,500: " + fmt(robust[0]) + ", " + fmt(robust[1]) + ", " + fmt(robust[2]) +
                    (mono ? " (non-decreasing)" : " (not monotone)") + "; linsem at 500 " + fmt(linsem_500) +
                    " (need robust <= 1/3 of it)"};
}

// 7. Degree scaling on the two-layer hierarchical graph.
Outcome degree_scaling() {
    std::vector<double> regret, upper, lower;
    for (std::size_t d = 1; d <= 3; ++d) {
        ExperimentConfig cfg;
        cfg.graph = "hierarchical";
        cfg.layers = {d, d};
        cfg.T = 10000;
        cfg.algo = PolicyKind::robust_lcb;
        cfg.solver = Solver::projected_ascent;
        cfg.measure = Measure::ad;
        cfg.schedule = ScheduleKind::early_flip;
        cfg.C = 50.0;
        cfg.seeds.clear();
        for (std::uint64_t s = 1; s <= 10; ++s) cfg.seeds.push_back(s);
        regret.push_back(run_many(cfg).final_regret());
        const SemInstance sem = build_instance(cfg, 1);
        BoundParams bp{d, 2, 2 * d + 1, sem.m_x(), 1.0};
        upper.push_back(upper_bound_curve(10000, 50, bp));
        lower.push_back(lower_bound_curve(10000, 50, bp));
    }
    // regret strictly increasing; bound curves non-decreasing with a net rise
    bool ok = upper[2] > upper[0] && lower[2] > lower[0];
    for (std::size_t k = 1; k < 3; ++k)
        ok = ok && regret[k] > regret[k - 1] && upper[k] >= upper[k - 1] && lower[k] >= lower[k - 1];
    return {ok, "R(T) at d=1,2,3: " + fmt(regret[0]) + ", " + fmt(regret[1]) + ", " + fmt(regret[2]) + "; upper " +
                    fmt(upper[0]) + ", " + fmt(upper[1]) + ", " + fmt(upper[2]) + "; lower " + fmt(lower[0]) + ", " +
                    fmt(lower[1]) + ", " + fmt(lower[2])};
}

// 8. Lower-bound instance gap, checked against d^{L/2} computed here.
Outcome hard_instance_gap() {
    double worst = 0.0;
    for (auto [d, L] : std::vector<std::pair<std::size_t, std::size_t>>{{1, 1}, {3, 2}, {4, 2}}) {
        const auto inst = theorem2_instance(d, L);
        worst = std::max(worst, std::abs(reward_intervention_gap(inst.sem) - std::pow(double(d), double(L) / 2.0)));
    }
    return {worst <= 1e-9, "max |gap - d^(L/2)| = " + fmt(worst, 3)};
}

// 9. Budgets of every schedule and file determinism across worker counts.
Outcome budget_and_determinism() {
    const auto b = audit_budgets();
    ExperimentConfig cfg = chain_protocol(PolicyKind::robust_lcb, 2000, 50.0, 8);
    auto text = [&](std::size_t workers) {
        cfg.workers = workers;
        std::ostringstream os;
        write_results(run_many(cfg), os, 7);
        return os.str();
    };
    const std::string one = text(1), eight = text(8);
    const bool same = one == eight;
    return {b.passed && same, b.detail + "; 1- vs 8-worker files " + (same ? "identical" : "differ")};
}

struct Criterion {
    int id;
    const char* name;
    double limit_s;
    std::function<Outcome()> run;
};

}  // namespace

int main() {
    const Criterion criteria[] = {
        {1, "interventional mean consistency", 10, mean_consistency},
        {2, "reward map oracle equivalence", 5, reward_map_oracle},
        {3, "compounding-error bound", 30, compounding_error},
        {4, "confidence-set coverage", 120, coverage},
        {5, "robustness separation", 600, separation},
        {6, "deviation-level sweep", 900, sweep_c},
        {7, "degree scaling", 900, degree_scaling},
        {8, "hard-instance gap", 60, hard_instance_gap},
        {9, "budget and determinism invariants", 300, budget_and_determinism},
    };
    int failures = 0;
    for (const auto& c : criteria) {
        const auto t0 = Clock::now();
        Outcome o{false, ""};
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
        const bool in_time = secs <= c.limit_s;
        const bool pass = o.passed && in_time;
        failures += !pass;
        std::printf("%s criterion %d (%s): %s [%.1fs%s]\n", pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs,
                    in_time ? "" : ", over time limit");
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}

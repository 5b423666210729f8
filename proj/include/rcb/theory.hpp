#ifndef RCB_THEORY_HPP
#define RCB_THEORY_HPP

// Regret-bound evaluators, a path-enumeration oracle for the reward map,
// an auditor for the compounding estimation-error bound, and the
// two-instance lower-bound construction.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "rcb/deviation.hpp"
#include "rcb/presets.hpp"
#include "rcb/sem.hpp"

namespace rcb {

struct BoundParams {
    std::size_t d = 1;
    std::size_t L = 1;
    std::size_t N = 2;
    double m_x = 1.0;
    /// Scale standing in for the unspecified constants of the order bounds.
    double c0 = 1.0;

    void validate() const {
        if (d < 1 || L < 1 || N < L + 1) throw std::invalid_argument("bound parameters need d >= 1, L >= 1, N >= L + 1");
    }
};

/// c0 * (2 m + d^{L - 1/2} (sqrt(N T) + N C) log(1 + T)).
inline double upper_bound_curve(double T, double C, const BoundParams& p) {
    p.validate();
    const double d = static_cast<double>(p.d), L = static_cast<double>(p.L), N = static_cast<double>(p.N);
    return p.c0 * (2.0 * p.m_x + std::pow(d, L - 0.5) * (std::sqrt(N * T) + N * C) * std::log1p(T));
}

/// c0 * d^{L/2 - 2} * max(sqrt(T), d^2 C).
inline double lower_bound_curve(double T, double C, const BoundParams& p) {
    p.validate();
    const double d = static_cast<double>(p.d), L = static_cast<double>(p.L);
    return p.c0 * std::pow(d, L / 2.0 - 2.0) * std::max(std::sqrt(T), d * d * C);
}

/// Reward map by explicit enumeration of directed paths ending at the
/// reward node: f_j = sum over paths j -> N of length <= L of the product
/// of edge weights. Exponential; limited to 12 nodes.
inline std::vector<double> f_paths(const WeightMatrix& weights, std::size_t max_len) {
    const Dag& g = weights.dag();
    if (g.n_nodes() > 12) throw std::invalid_argument("path enumeration limited to 12 nodes");
    std::vector<double> f(g.n_nodes(), 0.0);
    std::function<void(NodeId, std::size_t, double)> walk = [&](NodeId node, std::size_t len, double prod) {
        f[node] += prod;
        if (len == max_len) return;
        auto pa = g.parents(node);
        auto col = weights.column(node);
        for (std::size_t e = 0; e < pa.size(); ++e) walk(pa[e], len + 1, prod * col[e]);
    };
    walk(g.reward_node(), 0, 1.0);
    return f;
}

struct CompoundingErrorResult {
    std::vector<double> lhs;
    std::vector<double> rhs;
    bool holds = false;
    /// Set when the inputs do not meet the bound's preconditions; lhs/rhs
    /// are then empty.
    std::optional<std::string> precondition_error;
};

/// Compares ||[A^l - B^l]_N|| with d^{(l-1)/2} (beta+1)^l max_i lambda_min(M_i)^{-1/2}
/// for l = 1..L, with dense matrix powers. `metrics[i]` is N x N, at least
/// the identity, and equal to the identity outside the Pa(i) block; the max
/// runs over nodes with parents, using the eigenvalue of that block.
inline CompoundingErrorResult compounding_error_check(const Dag& g, const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                                 const std::vector<Eigen::MatrixXd>& metrics, double beta) {
    CompoundingErrorResult res;
    const auto n = static_cast<Eigen::Index>(g.n_nodes());
    auto fail = [&](std::string msg) {
        res.precondition_error = std::move(msg);
        return res;
    };
    if (g.n_nodes() > 32) return fail("dense audit limited to 32 nodes");
    if (A.rows() != n || A.cols() != n || B.rows() != n || B.cols() != n) return fail("matrix shape mismatch");
    if (metrics.size() != g.n_nodes()) return fail("one metric per node required");
    if (beta < 0.0) return fail("beta must be non-negative");
    constexpr double tol = 1e-9;

    double lambda = 0.0;
    bool any_parents = false;
    for (NodeId i = 0; i < g.n_nodes(); ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        auto pa = g.parents(i);
        std::vector<bool> on(g.n_nodes(), false);
        for (NodeId p : pa) on[p] = true;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (!on[static_cast<std::size_t>(j)] && (A(j, ii) != 0.0 || B(j, ii) != 0.0))
                return fail("column " + std::to_string(i) + " has weight outside the parent support");
        }
        if (B.col(ii).norm() > 1.0 + tol) return fail("nominal column " + std::to_string(i) + " exceeds unit norm");
        const Eigen::MatrixXd& M = metrics[i];
        if (M.rows() != n || M.cols() != n) return fail("metric shape mismatch");
        for (Eigen::Index j = 0; j < n; ++j)
            for (Eigen::Index k = 0; k < n; ++k) {
                const bool inside = on[static_cast<std::size_t>(j)] && on[static_cast<std::size_t>(k)];
                if (!inside && std::abs(M(j, k) - (j == k ? 1.0 : 0.0)) > tol)
                    return fail("metric " + std::to_string(i) + " is not the identity off the parent support");
            }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (M + M.transpose()), Eigen::EigenvaluesOnly);
        if (es.eigenvalues()(0) < 1.0 - tol) return fail("metric " + std::to_string(i) + " is not above the identity");
        const Eigen::VectorXd delta = A.col(ii) - B.col(ii);
        if (std::sqrt(std::max(0.0, delta.dot(M * delta))) > beta * (1.0 + tol) + tol)
            return fail("column " + std::to_string(i) + " lies outside its confidence ellipsoid");
        if (pa.empty()) continue;
        any_parents = true;
        Eigen::MatrixXd block(static_cast<Eigen::Index>(pa.size()), static_cast<Eigen::Index>(pa.size()));
        for (std::size_t u = 0; u < pa.size(); ++u)
            for (std::size_t v = 0; v < pa.size(); ++v)
                block(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(v)) =
                    M(static_cast<Eigen::Index>(pa[u]), static_cast<Eigen::Index>(pa[v]));
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eb(0.5 * (block + block.transpose()), Eigen::EigenvaluesOnly);
        lambda = std::max(lambda, 1.0 / std::sqrt(eb.eigenvalues()(0)));
    }
    if (!any_parents) lambda = 1.0;

    const double sd = std::sqrt(static_cast<double>(std::max<std::size_t>(g.max_in_degree(), 1)));
    const auto last = n - 1;
    Eigen::MatrixXd Ap = Eigen::MatrixXd::Identity(n, n), Bp = Eigen::MatrixXd::Identity(n, n);
    res.holds = true;
    double dpow = 1.0, bpow = 1.0;
    for (std::size_t l = 1; l <= g.longest_path(); ++l) {
        Ap = Ap * A;
        Bp = Bp * B;
        bpow *= beta + 1.0;
        const double lhs = (Ap.col(last) - Bp.col(last)).norm();
        const double rhs = dpow * bpow * lambda;
        res.lhs.push_back(lhs);
        res.rhs.push_back(rhs);
        if (!(lhs < rhs)) res.holds = false;
        dpow *= sd;
    }
    return res;
}

/// Lower-bound instance on the hierarchical graph with L layers of width d:
/// every edge weight is sqrt(1/d) except the reward node, whose
/// observational weights are 0 and interventional weights +sqrt(1/d). The
/// first d nodes have unit-mean noise, the rest zero-mean; noises are unit
/// Gaussians truncated at three standard deviations.
struct Theorem2Instance {
    SemInstance sem;
    std::function<DeviationSchedule(double)> schedule;
};

inline Theorem2Instance theorem2_instance(std::size_t d, std::size_t L) {
    if (d < 1 || L < 1) throw std::invalid_argument("theorem2 instance needs d >= 1 and L >= 1");
    auto dag = hierarchical_dag(std::vector<std::size_t>(L, d));
    const double w = std::sqrt(1.0 / static_cast<double>(d));
    WeightMatrix b(dag), bs(dag);
    const NodeId r = dag->reward_node();
    for (NodeId i = 1; i < dag->n_nodes(); ++i) {
        for (auto& v : b.column(i)) v = i == r ? 0.0 : w;
        for (auto& v : bs.column(i)) v = w;
    }
    NoiseSpec noise;
    for (NodeId i = 0; i < dag->n_nodes(); ++i)
        noise.nodes.push_back({NoiseSpec::Kind::truncated_gaussian, i < d ? 1.0 : 0.0, 1.0, 3.0});
    SemInstance sem(std::move(b), std::move(bs), std::move(noise));
    auto schedule = [sem](double C) { return DeviationSchedule::zeroing(sem, C); };
    return {std::move(sem), std::move(schedule)};
}

/// mu(reward node intervened) - mu(nothing intervened).
inline double reward_intervention_gap(const SemInstance& sem) {
    const NodeId r = sem.dag().reward_node();
    return expected_reward(sem, Intervention::of({r})) - expected_reward(sem, Intervention::none());
}

}  // namespace rcb

#endif  // RCB_THEORY_HPP

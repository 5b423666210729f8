#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "rcb/theory.hpp"
#include "test_util.hpp"

using namespace rcb;

TEST(Bounds, UpperCurveClosedForm) {
    BoundParams p{2, 2, 5, 3.0, 1.0};
    const double T = 100.0, C = 4.0;
    const double expect = 6.0 + std::pow(2.0, 1.5) * (std::sqrt(500.0) + 20.0) * std::log(101.0);
    EXPECT_NEAR(upper_bound_curve(T, C, p), expect, 1e-9);
    p.c0 = 0.5;
    EXPECT_NEAR(upper_bound_curve(T, C, p), 0.5 * expect, 1e-9);
}

TEST(Bounds, LowerCurveSwitchesRegime) {
    BoundParams p{4, 2, 9, 1.0, 1.0};
    // d^{L/2-2} = 4^{-1}; sqrt(T) = 10 dominates d^2 C = 0.32 * 16
    EXPECT_NEAR(lower_bound_curve(100.0, 0.32, p), 2.5, 1e-12);
    EXPECT_NEAR(lower_bound_curve(100.0, 10.0, p), 40.0, 1e-12);
}

TEST(Bounds, DegreeGridForTwoLayers) {
    // L = 2: d^{-1} max(100, 50 d^2) is flat between d = 1 and d = 2
    const double expect_lower[] = {100.0, 100.0, 150.0};
    double prev_u = 0;
    for (std::size_t d = 1; d <= 3; ++d) {
        BoundParams p{d, 2, 2 * d + 1, 1.0, 1.0};
        EXPECT_NEAR(lower_bound_curve(10000, 50, p), expect_lower[d - 1], 1e-9);
        const double u = upper_bound_curve(10000, 50, p);
        EXPECT_GT(u, prev_u);
        prev_u = u;
    }
}

TEST(Bounds, RejectInvalidParameters) {
    EXPECT_THROW((void)upper_bound_curve(10, 1, BoundParams{0, 1, 2, 1, 1}), std::invalid_argument);
    EXPECT_THROW((void)lower_bound_curve(10, 1, BoundParams{1, 3, 3, 1, 1}), std::invalid_argument);
}

TEST(Paths, AgreeWithRewardMap) {
    Rng rng(12);
    for (int rep = 0; rep < 100; ++rep) {
        const std::size_t n = 2 + static_cast<std::size_t>(rng.uniform() * 7);
        auto dag = fixtures::random_dag(n, 0.5, rng);
        const auto w = fixtures::random_weights(dag, rng);
        const auto a = reward_map(w);
        const auto b = f_paths(w, dag->longest_path());
        for (std::size_t j = 0; j < n; ++j) ASSERT_NEAR(a[j], b[j], 1e-12);
    }
}

TEST(Paths, ChainByHand) {
    auto dag = chain_dag(3);
    WeightMatrix w(dag);
    const double a[] = {0.5}, b[] = {0.4};
    w.set_column(1, a);
    w.set_column(2, b);
    const auto f = f_paths(w, 2);
    EXPECT_DOUBLE_EQ(f[0], 0.2);
    EXPECT_DOUBLE_EQ(f[1], 0.4);
    EXPECT_DOUBLE_EQ(f[2], 1.0);
    // truncating at length 1 drops the two-hop path
    EXPECT_DOUBLE_EQ(f_paths(w, 1)[0], 0.0);
}

TEST(Paths, RefusesLargeGraphs) {
    auto dag = chain_dag(13);
    EXPECT_THROW((void)f_paths(WeightMatrix(dag), 12), std::invalid_argument);
}

namespace {

Eigen::MatrixXd identity_off_support(const Dag& g, NodeId i, const Eigen::MatrixXd& block) {
    const auto n = static_cast<Eigen::Index>(g.n_nodes());
    Eigen::MatrixXd M = Eigen::MatrixXd::Identity(n, n);
    auto pa = g.parents(i);
    for (std::size_t u = 0; u < pa.size(); ++u)
        for (std::size_t v = 0; v < pa.size(); ++v)
            M(static_cast<Eigen::Index>(pa[u]), static_cast<Eigen::Index>(pa[v])) =
                block(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(v));
    return M;
}

}  // namespace

TEST(CompoundingError, HoldsOnRandomAdmissibleInstances) {
    Rng rng(33);
    int checked = 0;
    for (int rep = 0; rep < 200; ++rep) {
        const std::size_t n = 3 + static_cast<std::size_t>(rng.uniform() * 6);
        auto dag = fixtures::random_dag(n, 0.5, rng, 4);
        if (dag->longest_path() > 4) continue;
        const auto B = fixtures::random_weights(dag, rng).dense();
        const double beta = rng.uniform(0.0, 3.0);
        std::vector<Eigen::MatrixXd> metrics;
        Eigen::MatrixXd A = B;
        for (NodeId i = 0; i < n; ++i) {
            const auto k = static_cast<Eigen::Index>(dag->in_degree(i));
            Eigen::MatrixXd G(k, k);
            for (Eigen::Index u = 0; u < k * k; ++u) G.data()[u] = rng.normal();
            Eigen::MatrixXd block = Eigen::MatrixXd::Identity(k, k) + 5.0 * rng.uniform() * G * G.transpose();
            metrics.push_back(identity_off_support(*dag, i, block));
            if (k == 0) continue;
            // a point of the ellipsoid boundary scaled by u in [0,1]
            Eigen::VectorXd z(k);
            for (Eigen::Index j = 0; j < k; ++j) z(j) = rng.normal();
            Eigen::LLT<Eigen::MatrixXd> llt(block);
            Eigen::VectorXd delta = llt.matrixU().solve(z / z.norm()) * beta * rng.uniform();
            auto pa = dag->parents(i);
            for (std::size_t u = 0; u < pa.size(); ++u)
                A(static_cast<Eigen::Index>(pa[u]), static_cast<Eigen::Index>(i)) += delta(static_cast<Eigen::Index>(u));
        }
        const auto res = compounding_error_check(*dag, A, B, metrics, beta);
        ASSERT_FALSE(res.precondition_error) << *res.precondition_error;
        ASSERT_TRUE(res.holds);
        ++checked;
    }
    EXPECT_GT(checked, 150);
}

TEST(CompoundingError, ReportsPreconditionFailures) {
    auto dag = chain_dag(3);
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(3, 3);
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(3, 3);
    B(0, 1) = 0.5;
    B(1, 2) = 0.5;
    Eigen::MatrixXd A = B;
    A(0, 2) = 0.1;  // not a parent of node 2
    auto r = compounding_error_check(*dag, A, B, {I, I, I}, 1.0);
    EXPECT_TRUE(r.precondition_error.has_value());
    A = B;
    A(1, 2) = 3.0;  // outside a radius-1 Euclidean ball
    r = compounding_error_check(*dag, A, B, {I, I, I}, 1.0);
    EXPECT_TRUE(r.precondition_error.has_value());
    Eigen::MatrixXd small = I;
    small(0, 0) = 0.5;
    r = compounding_error_check(*dag, B, B, {I, small, I}, 1.0);
    EXPECT_TRUE(r.precondition_error.has_value());
}

TEST(HardInstance, GapIsDegreeToHalfDepth) {
    for (auto [d, L] : std::vector<std::pair<std::size_t, std::size_t>>{{1, 1}, {3, 2}, {4, 2}, {2, 3}}) {
        const auto inst = theorem2_instance(d, L);
        EXPECT_NEAR(reward_intervention_gap(inst.sem), std::pow(static_cast<double>(d), L / 2.0), 1e-9)
            << "d=" << d << " L=" << L;
        EXPECT_NEAR(expected_reward(inst.sem, Intervention::none()), 0.0, 1e-12);
    }
}

TEST(HardInstance, ZeroingScheduleRespectsBudget) {
    const auto inst = theorem2_instance(3, 2);
    const auto s = inst.schedule(5.0);
    EXPECT_EQ(s.active_rounds(), 5u);
    const auto r = s.realized_budget();
    EXPECT_LE(r.aggregate[inst.sem.dag().reward_node()], 5.0 + 1e-9);
    const NodeId rn = inst.sem.dag().reward_node();
    const auto d = s.apply(1, compose_weights(inst.sem, Intervention::of({rn})));
    for (double v : d.column(rn)) EXPECT_EQ(v, 0.0);
}

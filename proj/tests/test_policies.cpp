#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "rcb/policies.hpp"
#include "rcb/presets.hpp"
#include "test_util.hpp"

using namespace rcb;

namespace {

ConfidenceSpec spec_for(const SemInstance& sem, double C, std::size_t T) {
    ConfidenceSpec s;
    s.delta = ConfidenceSpec::default_delta(sem.n_nodes(), T);
    s.budget = C;
    s.m_x = sem.m_x();
    s.d = sem.dag().max_in_degree();
    s.horizon = T;
    return s;
}

// Feeds `rounds` samples of uniformly random arms into the policy.
void warm_up(Policy& p, const SemInstance& sem, std::size_t rounds, Rng& rng) {
    for (std::size_t t = 1; t <= rounds; ++t) {
        const auto k = static_cast<std::size_t>(rng.uniform() * static_cast<double>(p.arms().size()));
        const auto s = sample(compose_weights(sem, p.arms()[k]), sem.noise(), rng);
        p.observe(k, s.x, t);
    }
}

}  // namespace

TEST(RewardGradient, MatchesFiniteDifferences) {
    Rng rng(21);
    for (int rep = 0; rep < 20; ++rep) {
        const std::size_t n = 3 + static_cast<std::size_t>(rng.uniform() * 6);
        auto dag = fixtures::random_dag(n, 0.6, rng);
        auto w = fixtures::random_weights(dag, rng);
        std::vector<double> nu(n);
        for (auto& v : nu) v = rng.uniform(0.0, 2.0);
        const auto grad = reward_gradient(w, nu, dag->longest_path());
        const double h = 1e-6;
        for (std::size_t e = 0; e < dag->n_edges(); ++e) {
            auto plus = w, minus = w;
            NodeId node = 0;
            while (dag->offset(node + 1) <= e) ++node;
            plus.column(node)[e - dag->offset(node)] += h;
            minus.column(node)[e - dag->offset(node)] -= h;
            const double fd = (expected_reward(plus, nu) - expected_reward(minus, nu)) / (2 * h);
            ASSERT_NEAR(grad[e], fd, 1e-6);
        }
    }
}

TEST(Compounding, FactorSum) {
    // d = 4, L = 2, beta = 1: 2 + 2 * 4
    EXPECT_DOUBLE_EQ(compounding_factor(4, 2, 1.0), 10.0);
}

TEST(EllipsoidBall, ProjectionLandsOnBoundary) {
    Eigen::MatrixXd M(2, 2);
    M << 4.0, 1.0, 1.0, 2.0;
    EllipsoidBall set(Eigen::Vector2d(0.1, 0.0), M, 0.5);
    const Eigen::Vector2d y(2.0, 2.0);
    const auto p = set.project_ellipsoid(y);
    EXPECT_NEAR(set.metric_norm(p - set.center()), 0.5, 1e-9);
    // KKT: y - p is parallel to M (p - c)
    const Eigen::Vector2d g = M * (p - set.center());
    const Eigen::Vector2d r = y - p;
    EXPECT_NEAR(g(0) * r(1) - g(1) * r(0), 0.0, 1e-8);
    const auto q = set.project(y);
    ASSERT_TRUE(q.has_value());
    EXPECT_TRUE(set.feasible(*q));
}

TEST(EllipsoidBall, EmptyIntersectionDetected) {
    const Eigen::MatrixXd M = Eigen::MatrixXd::Identity(2, 2) * 100.0;
    EllipsoidBall set(Eigen::Vector2d(3.0, 0.0), M, 1.0);
    EXPECT_FALSE(set.project(Eigen::Vector2d(3.0, 0.0)).has_value());
}

TEST(Policy, ProjectedAscentMatchesClosedFormWhenL1) {
    // star graph: every node feeds the reward node, so <f, nu> = nu_N + theta^T nu_pa
    const std::size_t n = 4;
    auto dag = make_dag({{}, {}, {}, {0, 1, 2}});
    WeightMatrix b(dag), bs(dag);
    const double col[] = {0.1, 0.1, 0.1};
    b.set_column(3, col);
    bs.set_column(3, col);
    SemInstance sem(b, bs, fixtures::fixed_uniform_noise({0.5, 1.0, 1.5, 0.2}));
    ConfidenceSpec s = spec_for(sem, 1.0, 100);
    Policy p(PolicyKind::linsem_ucb, sem, {Intervention::none()}, s, Solver::projected_ascent);
    Rng rng(4);
    warm_up(p, sem, 400, rng);
    const auto& reg = p.regressor(3, Variant::observational);
    const Eigen::Vector3d nu_pa(0.5, 1.0, 1.5);
    const Eigen::MatrixXd M = reg.metric();
    const double r = p.radius(1);
    const Eigen::VectorXd top = reg.estimate() + r * M.inverse() * nu_pa / std::sqrt(nu_pa.dot(M.inverse() * nu_pa));
    ASSERT_LT(top.norm(), 1.0) << "instance too loose for the closed form";
    const double closed = 0.2 + nu_pa.dot(reg.estimate()) + r * std::sqrt(nu_pa.dot(M.inverse() * nu_pa));
    EXPECT_NEAR(p.ucb_index_projected_ascent(0, 1, AscentOptions{4, 100}), closed, 1e-6);
    (void)n;
}

TEST(Policy, ProjectedAscentNeverExceedsBonus) {
    Rng rng(17);
    for (int rep = 0; rep < 10; ++rep) {
        auto sem = hierarchical_instance({2, 2}, rng);
        const auto arms = all_arms(sem.n_nodes());
        Policy p(PolicyKind::robust_lcb, sem, arms, spec_for(sem, 2.0, 1000), Solver::projected_ascent);
        warm_up(p, sem, 300, rng);
        for (std::size_t k = 0; k < arms.size(); k += 7) {
            const double pga = p.ucb_index_projected_ascent(k, 300, AscentOptions{2, 30});
            EXPECT_LE(pga, p.ucb_index_bonus(k, 300) + 1e-9);
        }
    }
}

TEST(Policy, ProjectedAscentAtLeastClippedEstimate) {
    Rng rng(5);
    auto sem = chain_instance(4, rng);
    const auto arms = all_arms(4);
    Policy p(PolicyKind::linsem_ucb, sem, arms, spec_for(sem, 1.0, 5000), Solver::projected_ascent);
    warm_up(p, sem, 3000, rng);
    for (std::size_t k = 0; k < arms.size(); ++k) {
        auto est = p.estimate(arms[k]);
        for (NodeId i = 0; i < 4; ++i) {
            auto c = est.column(i);
            double nrm = 0.0;
            for (double v : c) nrm += v * v;
            if (nrm > 1.0)
                for (double& v : c) v /= std::sqrt(nrm);
        }
        EXPECT_GE(p.ucb_index_projected_ascent(k, 3000, AscentOptions{}), expected_reward(est, sem.nu()) - 1e-12);
    }
}

TEST(Policy, RobustWeightsBoundedByInverseBudget) {
    Rng rng(6);
    auto sem = chain_instance(4, rng);
    Policy p(PolicyKind::robust_lcb, sem, all_arms(4), spec_for(sem, 4.0, 100));
    for (std::size_t t = 1; t <= 100; ++t) {
        const auto k = p.select(t);
        p.observe(k, sample(compose_weights(sem, p.arms()[k]), sem.noise(), rng).x, t);
        for (NodeId i = 1; i < 4; ++i) ASSERT_LE(p.last_weights()[i], 0.25 + 1e-15);
    }
}

TEST(Policy, LinsemUsesUnitWeights) {
    Rng rng(6);
    auto sem = chain_instance(4, rng);
    Policy p(PolicyKind::linsem_ucb, sem, all_arms(4), spec_for(sem, 4.0, 100));
    p.observe(0, sample(sem.b_obs(), sem.noise(), rng).x, 1);
    for (NodeId i = 1; i < 4; ++i) EXPECT_DOUBLE_EQ(p.last_weights()[i], 1.0);
}

TEST(Policy, VariantRoutingByMembership) {
    Rng rng(6);
    auto sem = chain_instance(4, rng);
    const auto arms = all_arms(4);
    Policy p(PolicyKind::robust_lcb, sem, arms, spec_for(sem, 1.0, 100));
    const std::size_t k = Intervention::of({2}).bits;  // arm position equals mask under all_arms
    ASSERT_EQ(arms[k], Intervention::of({2}));
    p.observe(k, sample(compose_weights(sem, arms[k]), sem.noise(), rng).x, 1);
    EXPECT_EQ(p.regressor(2, Variant::interventional).count(), 1u);
    EXPECT_EQ(p.regressor(2, Variant::observational).count(), 0u);
    EXPECT_EQ(p.regressor(1, Variant::observational).count(), 1u);
    EXPECT_EQ(p.regressor(3, Variant::observational).count(), 1u);
}

TEST(Policy, VanillaPlaysEveryArmFirst) {
    Rng rng(6);
    auto sem = chain_instance(3, rng);
    const auto arms = all_arms(3);
    Policy p(PolicyKind::vanilla_ucb, sem, arms, spec_for(sem, 1.0, 100));
    for (std::size_t t = 1; t <= arms.size(); ++t) {
        const auto k = p.select(t);
        EXPECT_EQ(k, t - 1);
        p.observe(k, sample(compose_weights(sem, arms[k]), sem.noise(), rng).x, t);
    }
}

TEST(Policy, OraclePlaysBestArm) {
    Rng rng(6);
    auto sem = chain_instance(4, rng);
    const auto arms = all_arms(4);
    Policy p(PolicyKind::oracle, sem, arms, spec_for(sem, 1.0, 100));
    EXPECT_EQ(arms[p.select(1)], best_arm(sem, arms).first);
}

TEST(Policy, OptimismOnNoDeviationRun) {
    Rng rng(31);
    auto sem = chain_instance(4, rng);
    const auto arms = all_arms(4);
    const auto [best, mu] = best_arm(sem, arms);
    const std::size_t kb = best.bits;
    const std::size_t T = 3000;
    Policy p(PolicyKind::robust_lcb, sem, arms, spec_for(sem, 1.0, T));
    for (std::size_t t = 1; t <= T; ++t) {
        ASSERT_GE(p.ucb_index_bonus(kb, t), mu) << "round " << t;
        const auto k = p.select(t);
        p.observe(k, sample(compose_weights(sem, arms[k]), sem.noise(), rng).x, t);
    }
}

#ifndef RCB_ESTIMATION_HPP
#define RCB_ESTIMATION_HPP

// Per-node weighted ridge regression with a weighted Gram matrix V, a
// squared-weight Gram matrix V~, and confidence ellipsoids in the
// V * V~^{-1} * V metric.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

namespace rcb {

enum class Variant { observational, interventional };

inline Eigen::Map<const Eigen::VectorXd> as_vector(std::span<const double> v) {
    return {v.data(), static_cast<Eigen::Index>(v.size())};
}

/// Estimation state of one node under one variant. Both Gram matrices start
/// at the identity and are kept as Cholesky factors updated by rank-one
/// modifications, so each absorbed sample costs O(d^2) plus one small
/// symmetric eigenproblem for the cached minimum eigenvalue.
class NodeRegressor {
public:
    NodeRegressor() : NodeRegressor(0) {}

    explicit NodeRegressor(std::size_t dim)
        : dim_(static_cast<Eigen::Index>(dim)),
          v_(Eigen::MatrixXd::Identity(dim_, dim_)),
          v_tilde_(Eigen::MatrixXd::Identity(dim_, dim_)),
          chol_v_(v_),
          chol_v_tilde_(v_tilde_),
          moment_(Eigen::VectorXd::Zero(dim_)),
          b_hat_(Eigen::VectorXd::Zero(dim_)) {}

    [[nodiscard]] std::size_t dim() const noexcept { return static_cast<std::size_t>(dim_); }
    [[nodiscard]] std::size_t count() const noexcept { return count_; }
    [[nodiscard]] const Eigen::VectorXd& estimate() const noexcept { return b_hat_; }
    [[nodiscard]] const Eigen::MatrixXd& gram() const noexcept { return v_; }
    [[nodiscard]] const Eigen::MatrixXd& gram_tilde() const noexcept { return v_tilde_; }
    /// Sum of absorbed squared weights.
    [[nodiscard]] double weight_sq_sum() const noexcept { return weight_sq_sum_; }

    /// ||x||_{V~^{-1}}, the weighted exploration bonus.
    [[nodiscard]] double bonus_norm(std::span<const double> x) const {
        if (dim_ == 0) return 0.0;
        Eigen::VectorXd y = as_vector(x);
        chol_v_tilde_.matrixL().solveInPlace(y);
        return y.norm();
    }

    /// V += w x x^T, V~ += w^2 x x^T, moment += w x target, then re-solve.
    void update(double w, std::span<const double> x, double target) {
        if (static_cast<Eigen::Index>(x.size()) != dim_) throw std::invalid_argument("regressor dimension mismatch");
        ++count_;
        if (dim_ == 0) return;
        const auto xv = as_vector(x);
        v_.noalias() += w * xv * xv.transpose();
        v_tilde_.noalias() += (w * w) * xv * xv.transpose();
        chol_v_.rankUpdate(xv, w);
        chol_v_tilde_.rankUpdate(xv, w * w);
        moment_.noalias() += (w * target) * xv;
        b_hat_ = chol_v_.solve(moment_);
        weight_sq_sum_ += w * w;
        min_eig_ = compute_min_eig();
    }

    /// ||theta - b_hat||_{V V~^{-1} V}, evaluated as ||L~^{-1} V (theta - b_hat)||.
    [[nodiscard]] double ellipsoid_norm(std::span<const double> theta) const {
        if (dim_ == 0) return 0.0;
        Eigen::VectorXd y = v_ * (as_vector(theta) - b_hat_);
        chol_v_tilde_.matrixL().solveInPlace(y);
        return y.norm();
    }

    /// theta in the unit ball and inside the radius-`radius` ellipsoid.
    [[nodiscard]] bool contains(std::span<const double> theta, double radius) const {
        return as_vector(theta).norm() <= 1.0 && ellipsoid_norm(theta) <= radius;
    }

    /// M = V V~^{-1} V on the parent support.
    [[nodiscard]] Eigen::MatrixXd metric() const {
        Eigen::MatrixXd m = v_ * chol_v_tilde_.solve(v_);
        return 0.5 * (m + m.transpose());
    }

    /// Smallest eigenvalue of M restricted to the parent support; 1 for an
    /// empty support.
    [[nodiscard]] double effective_min_eig() const noexcept { return min_eig_; }

private:
    [[nodiscard]] double compute_min_eig() const {
        if (dim_ == 1) return v_(0, 0) * v_(0, 0) / v_tilde_(0, 0);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(metric(), Eigen::EigenvaluesOnly);
        return es.eigenvalues()(0);
    }

    Eigen::Index dim_;
    Eigen::MatrixXd v_;
    Eigen::MatrixXd v_tilde_;
    Eigen::LLT<Eigen::MatrixXd> chol_v_;
    Eigen::LLT<Eigen::MatrixXd> chol_v_tilde_;
    Eigen::VectorXd moment_;
    Eigen::VectorXd b_hat_;
    std::size_t count_ = 0;
    double weight_sq_sum_ = 0.0;
    double min_eig_ = 1.0;
};

/// w = min{1/C, 1/(C ||x||_{V~^{-1}})} with V~ built from earlier rounds.
inline double sample_weight(std::span<const double> x_pa, const NodeRegressor& reg, double budget) {
    if (budget < 1.0) throw std::invalid_argument("weight requires C >= 1");
    const double norm = reg.bonus_norm(x_pa);
    if (norm <= 1.0) return 1.0 / budget;
    return 1.0 / (budget * norm);
}

struct ConfidenceSpec {
    double delta = 0.01;
    /// Deviation budget C, at least 1.
    double budget = 1.0;
    /// Bound m on ||X||.
    double m_x = 1.0;
    /// Maximum in-degree d.
    std::size_t d = 1;
    /// Horizon T; only the non-robust time-invariant radius uses it.
    std::size_t horizon = 1;

    /// delta = 1/(2 N T).
    [[nodiscard]] static double default_delta(std::size_t n_nodes, std::size_t horizon) {
        return 1.0 / (2.0 * static_cast<double>(n_nodes) * static_cast<double>(horizon));
    }
};

namespace detail {
inline void check_spec(const ConfidenceSpec& s) {
    if (!(s.delta > 0.0 && s.delta < 1.0)) throw std::invalid_argument("delta must lie in (0, 1)");
}
inline double log_det_term(const ConfidenceSpec& s, double ratio) {
    if (s.d == 0) return 0.0;
    const double d = static_cast<double>(s.d);
    return d * std::log1p(ratio / d);
}
}  // namespace detail

/// Robust confidence radius
/// beta_t = sqrt(2 log(1/delta) + d log(1 + m^2 t / (d C^2))) + 1 + m.
inline double beta(double t, const ConfidenceSpec& s) {
    detail::check_spec(s);
    if (s.budget < 1.0) throw std::invalid_argument("beta requires C >= 1");
    const double m2 = s.m_x * s.m_x;
    return std::sqrt(2.0 * std::log(1.0 / s.delta) + detail::log_det_term(s, m2 * t / (s.budget * s.budget))) +
           1.0 + s.m_x;
}

/// Time-invariant radius 1 + sqrt(2 log(1/delta) + d log(1 + m T^2 / d)),
/// constant over the horizon.
inline double linsem_radius(const ConfidenceSpec& s) {
    detail::check_spec(s);
    const double T = static_cast<double>(s.horizon);
    return 1.0 + std::sqrt(2.0 * std::log(1.0 / s.delta) + detail::log_det_term(s, s.m_x * T * T));
}

/// Time-invariant radius inflated for deviations:
/// 1 + C m^2 + sqrt(2 log(1/delta) + d log(1 + m^2 t / d)).
inline double linsem_robust_radius(double t, const ConfidenceSpec& s) {
    detail::check_spec(s);
    const double m2 = s.m_x * s.m_x;
    return 1.0 + s.budget * m2 + std::sqrt(2.0 * std::log(1.0 / s.delta) + detail::log_det_term(s, m2 * t));
}

}  // namespace rcb

#endif  // RCB_ESTIMATION_HPP

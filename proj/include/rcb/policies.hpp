#ifndef RCB_POLICIES_HPP
#define RCB_POLICIES_HPP

// Arm-selection strategies over interventions: Robust-LCB, the
// time-invariant LinSEM-UCB baseline (plain and with an inflated radius),
// reward-only UCB1 over all arms, and the nominal oracle.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "rcb/estimation.hpp"
#include "rcb/rng.hpp"
#include "rcb/sem.hpp"

namespace rcb {

enum class PolicyKind { robust_lcb, linsem_ucb, linsem_ucb_robust, vanilla_ucb, oracle };
enum class Solver { bonus, projected_ascent };

inline const char* to_string(PolicyKind k) {
    switch (k) {
        case PolicyKind::robust_lcb: return "robust_lcb";
        case PolicyKind::linsem_ucb: return "linsem_ucb";
        case PolicyKind::linsem_ucb_robust: return "linsem_ucb_robust";
        case PolicyKind::vanilla_ucb: return "vanilla_ucb";
        case PolicyKind::oracle: return "oracle";
    }
    return "unknown";
}

inline std::optional<PolicyKind> parse_policy_kind(std::string_view s) {
    for (PolicyKind k : {PolicyKind::robust_lcb, PolicyKind::linsem_ucb, PolicyKind::linsem_ucb_robust,
                         PolicyKind::vanilla_ucb, PolicyKind::oracle})
        if (s == to_string(k)) return k;
    return std::nullopt;
}

struct AscentOptions {
    /// Starting points: the clipped estimate plus restarts - 1 random
    /// extreme points of the confidence sets.
    std::size_t restarts = 4;
    /// Maximum sweeps over the columns per start.
    std::size_t sweeps = 30;
};

/// Sum over l = 1..L of d^{(l-1)/2} (beta + 1)^l: the path-compounding
/// factor of the closed-form optimism bonus.
inline double compounding_factor(std::size_t d, std::size_t L, double radius) {
    double s = 0.0;
    const double sd = std::sqrt(static_cast<double>(std::max<std::size_t>(d, 1)));
    double dpow = 1.0, bpow = 1.0;
    for (std::size_t l = 1; l <= L; ++l) {
        bpow *= radius + 1.0;
        s += dpow * bpow;
        dpow *= sd;
    }
    return s;
}

/// {theta : ||theta - center||_M <= radius} intersected with the unit ball,
/// with M held in eigen-decomposed form for Euclidean projections.
class EllipsoidBall {
public:
    EllipsoidBall(Eigen::VectorXd center, const Eigen::MatrixXd& metric, double radius)
        : center_(std::move(center)), metric_(metric), radius_(radius) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(metric);
        basis_ = es.eigenvectors();
        eig_ = es.eigenvalues();
    }

    [[nodiscard]] const Eigen::VectorXd& center() const noexcept { return center_; }
    [[nodiscard]] double radius() const noexcept { return radius_; }

    [[nodiscard]] double metric_norm(const Eigen::VectorXd& v) const { return std::sqrt(std::max(0.0, v.dot(metric_ * v))); }

    [[nodiscard]] bool feasible(const Eigen::VectorXd& theta, double tol = 1e-9) const {
        return theta.norm() <= 1.0 + tol && metric_norm(theta - center_) <= radius_ + tol * std::max(1.0, radius_);
    }

    /// Euclidean projection onto the ellipsoid alone.
    [[nodiscard]] Eigen::VectorXd project_ellipsoid(const Eigen::VectorXd& y) const {
        const Eigen::VectorXd z = basis_.transpose() * (y - center_);
        const double r2 = radius_ * radius_;
        auto h = [&](double lam) {
            double s = 0.0;
            for (Eigen::Index j = 0; j < z.size(); ++j) {
                const double q = 1.0 + lam * eig_(j);
                s += eig_(j) * z(j) * z(j) / (q * q);
            }
            return s;
        };
        if (h(0.0) <= r2) return y;
        if (radius_ <= 0.0) return center_;
        double lo = 0.0, hi = 1.0;
        while (h(hi) > r2) hi *= 2.0;
        for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
            const double mid = 0.5 * (lo + hi);
            (h(mid) > r2 ? lo : hi) = mid;
        }
        Eigen::VectorXd w(z.size());
        for (Eigen::Index j = 0; j < z.size(); ++j) w(j) = z(j) / (1.0 + hi * eig_(j));
        return center_ + basis_ * w;
    }

    /// Alternating projections onto ellipsoid and unit ball. Returns nullopt
    /// when no feasible point is reached.
    [[nodiscard]] std::optional<Eigen::VectorXd> project(Eigen::VectorXd theta, std::size_t max_iter = 200) const {
        for (std::size_t it = 0; it < max_iter; ++it) {
            if (feasible(theta)) return theta;
            theta = project_ellipsoid(theta);
            const double n = theta.norm();
            if (n > 1.0) theta /= n;
        }
        if (feasible(theta)) return theta;
        return std::nullopt;
    }

    /// argmax of g^T theta over the set, or nullopt when the set looks
    /// empty. Exact when the center lies inside the unit ball (both
    /// constraints handled through their joint KKT system in M's
    /// eigenbasis); otherwise a projected point is returned.
    [[nodiscard]] std::optional<Eigen::VectorXd> maximize_linear(const Eigen::VectorXd& g) const {
        const Eigen::VectorXd gr = basis_.transpose() * g;
        const Eigen::VectorXd cr = basis_.transpose() * center_;
        const double gnorm = gr.norm();
        if (gnorm == 0.0 || radius_ <= 0.0) return project(center_);
        // ellipsoid alone
        double q = 0.0;
        for (Eigen::Index j = 0; j < gr.size(); ++j) q += gr(j) * gr(j) / eig_(j);
        Eigen::VectorXd z(gr.size());
        for (Eigen::Index j = 0; j < gr.size(); ++j) z(j) = cr(j) + radius_ * gr(j) / (eig_(j) * std::sqrt(q));
        if (z.norm() <= 1.0) return basis_ * z;
        // ball alone
        z = gr / gnorm;
        if (rotated_norm(z - cr) <= radius_) return basis_ * z;
        if (cr.norm() >= 1.0) return project(basis_ * z);
        // both active: theta_j = rho a_j + b_j with a = g/(1 + tau m), b = tau m c/(1 + tau m),
        // rho fixed by |theta| = 1; bisect log tau on the ellipsoid constraint
        auto point = [&](double tau) {
            Eigen::VectorXd a(gr.size()), b(gr.size());
            for (Eigen::Index j = 0; j < gr.size(); ++j) {
                const double den = 1.0 + tau * eig_(j);
                a(j) = gr(j) / den;
                b(j) = tau * eig_(j) * cr(j) / den;
            }
            const double aa = a.squaredNorm(), ab = a.dot(b), bb = b.squaredNorm();
            const double rho = (-ab + std::sqrt(std::max(0.0, ab * ab - aa * (bb - 1.0)))) / aa;
            return Eigen::VectorXd(rho * a + b);
        };
        double lo = -30.0, hi = 30.0;
        for (int it = 0; it < 100 && hi - lo > 1e-13; ++it) {
            const double mid = 0.5 * (lo + hi);
            (rotated_norm(point(std::exp(mid)) - cr) > radius_ ? lo : hi) = mid;
        }
        const Eigen::VectorXd theta = basis_ * point(std::exp(hi));
        if (feasible(theta, 1e-7)) return theta;
        return project(theta);
    }

private:
    [[nodiscard]] double rotated_norm(const Eigen::VectorXd& zr) const {
        double s = 0.0;
        for (Eigen::Index j = 0; j < zr.size(); ++j) s += eig_(j) * zr(j) * zr(j);
        return std::sqrt(s);
    }

    Eigen::VectorXd center_;
    Eigen::MatrixXd metric_;
    double radius_;
    Eigen::MatrixXd basis_;
    Eigen::VectorXd eig_;
};

/// Gradient of Theta -> <f(Theta), nu> restricted to the edge support,
/// aligned with the weight storage.
inline std::vector<double> reward_gradient(const WeightMatrix& theta, std::span<const double> nu, std::size_t L) {
    const Dag& g = theta.dag();
    const std::size_t n = g.n_nodes();
    std::vector<double> grad(g.n_edges(), 0.0);
    if (L == 0) return grad;
    // r_p = (Theta^T)^p nu as prefix sums R_s = sum_{p<=s} r_p; c_q = Theta^q e_N.
    std::vector<std::vector<double>> prefix(L, std::vector<double>(n, 0.0));
    std::vector<std::vector<double>> cols(L, std::vector<double>(n, 0.0));
    std::vector<double> r(nu.begin(), nu.end()), next(n);
    for (std::size_t p = 0; p < L; ++p) {
        for (std::size_t j = 0; j < n; ++j) prefix[p][j] = (p ? prefix[p - 1][j] : 0.0) + r[j];
        std::fill(next.begin(), next.end(), 0.0);
        for (NodeId k = 0; k < n; ++k) {
            auto pa = g.parents(k);
            auto col = theta.column(k);
            for (std::size_t e = 0; e < pa.size(); ++e) next[k] += col[e] * r[pa[e]];
        }
        r.swap(next);
    }
    cols[0][g.reward_node()] = 1.0;
    for (std::size_t q = 1; q < L; ++q) {
        for (NodeId k = 0; k < n; ++k) {
            const double ck = cols[q - 1][k];
            if (ck == 0.0) continue;
            auto pa = g.parents(k);
            auto col = theta.column(k);
            for (std::size_t e = 0; e < pa.size(); ++e) cols[q][pa[e]] += col[e] * ck;
        }
    }
    for (NodeId k = 0; k < n; ++k) {
        auto pa = g.parents(k);
        for (std::size_t e = 0; e < pa.size(); ++e) {
            double s = 0.0;
            for (std::size_t q = 0; q < L; ++q) s += cols[q][k] * prefix[L - 1 - q][pa[e]];
            grad[g.offset(k) + e] = s;
        }
    }
    return grad;
}

/// A bandit policy over a fixed list of interventions. The SEM-based
/// policies keep one observational and one interventional regressor per
/// node with parents; reward-only UCB keeps per-arm statistics; the oracle
/// always plays the nominal best arm.
class Policy {
public:
    Policy(PolicyKind kind, const SemInstance& sem, std::vector<Intervention> arms, ConfidenceSpec spec,
           Solver solver = Solver::bonus, AscentOptions ascent = {}, Rng rng = Rng(0))
        : kind_(kind),
          solver_(solver),
          ascent_(ascent),
          spec_(spec),
          dag_(sem.dag_ptr()),
          nu_(sem.nu().begin(), sem.nu().end()),
          arms_(std::move(arms)),
          est_obs_(dag_),
          est_int_(dag_),
          last_weights_(dag_->n_nodes(), 0.0),
          rng_(rng) {
        if (arms_.empty()) throw std::invalid_argument("policy needs at least one arm");
        if (kind_ == PolicyKind::robust_lcb && spec_.budget < 1.0)
            throw std::invalid_argument("robust_lcb requires C >= 1");
        nu_norm_ = as_vector(nu_).norm();
        for (NodeId i = 0; i < dag_->n_nodes(); ++i)
            if (dag_->in_degree(i) > 0) with_parents_ |= std::uint64_t{1} << i;
        const std::size_t n = dag_->n_nodes();
        obs_.reserve(n);
        int_.reserve(n);
        for (NodeId i = 0; i < n; ++i) {
            obs_.emplace_back(dag_->in_degree(i));
            int_.emplace_back(dag_->in_degree(i));
        }
        arm_sum_.assign(arms_.size(), 0.0);
        arm_count_.assign(arms_.size(), 0);
        if (kind_ == PolicyKind::oracle) {
            const auto [best, mu] = best_arm(sem, arms_);
            (void)mu;
            oracle_arm_ = static_cast<std::size_t>(std::find(arms_.begin(), arms_.end(), best) - arms_.begin());
        }
    }

    [[nodiscard]] PolicyKind kind() const noexcept { return kind_; }
    [[nodiscard]] Solver solver() const noexcept { return solver_; }
    [[nodiscard]] std::span<const Intervention> arms() const noexcept { return arms_; }
    [[nodiscard]] const ConfidenceSpec& spec() const noexcept { return spec_; }
    [[nodiscard]] const NodeRegressor& regressor(NodeId i, Variant v) const {
        return v == Variant::interventional ? int_[i] : obs_[i];
    }
    /// Weights assigned in the most recent observe() (0 for parentless nodes).
    [[nodiscard]] std::span<const double> last_weights() const noexcept { return last_weights_; }
    [[nodiscard]] std::size_t arm_count(std::size_t arm) const { return arm_count_[arm]; }

    /// Confidence radius used by the SEM policies at round t.
    [[nodiscard]] double radius(std::size_t t) const {
        switch (kind_) {
            case PolicyKind::robust_lcb: return beta(static_cast<double>(t), spec_);
            case PolicyKind::linsem_ucb: return linsem_radius(spec_);
            case PolicyKind::linsem_ucb_robust: return linsem_robust_radius(static_cast<double>(t), spec_);
            default: return 0.0;
        }
    }

    /// Estimated weight matrix for an arm: each column from the variant
    /// matching arm membership.
    [[nodiscard]] WeightMatrix estimate(Intervention a) const {
        WeightMatrix w = est_obs_;
        for (NodeId i = 0; i < dag_->n_nodes(); ++i)
            if (a.contains(i)) w.set_column(i, est_int_.column(i));
        return w;
    }

    /// <f(B^_a), nu> + ||nu|| * sum_l d^{(l-1)/2} (radius + 1)^l * max_i lambda_min(M_{i,a})^{-1/2},
    /// the max running over nodes with parents.
    [[nodiscard]] double ucb_index_bonus(std::size_t arm, std::size_t t) const {
        return bonus_index(arm, compounding_factor(dag_->max_in_degree(), dag_->longest_path(), radius(t)));
    }

    /// Projected block-coordinate ascent of <f(Theta), nu> over the
    /// per-column confidence sets. The objective is affine in each column
    /// (a path visits a node at most once), so each block step moves the
    /// column to the maximizer of its gradient over its set. Returns the
    /// best value over starts; a lower bound on the exact maximum.
    [[nodiscard]] double ucb_index_projected_ascent(std::size_t arm, std::size_t t, const AscentOptions& opt) {
        const Intervention a = arms_[arm];
        refresh_sets(radius(t));
        const std::size_t n = dag_->n_nodes();
        std::vector<const EllipsoidBall*> sets(n, nullptr);
        for (NodeId i = 0; i < n; ++i) {
            if (dag_->in_degree(i) == 0) continue;
            sets[i] = &*(a.contains(i) ? int_sets_[i] : obs_sets_[i]);
        }
        const std::size_t L = dag_->longest_path();
        auto put = [](WeightMatrix& w, NodeId i, const Eigen::VectorXd& v) {
            w.set_column(i, std::span<const double>(v.data(), static_cast<std::size_t>(v.size())));
        };

        // Anchor: clipped estimate pulled into each set.
        WeightMatrix anchor = estimate(a);
        bool anchor_ok = true;
        for (NodeId i = 0; i < n && anchor_ok; ++i) {
            if (!sets[i]) continue;
            Eigen::VectorXd c = sets[i]->center();
            if (c.norm() > 1.0) c /= c.norm();
            auto p = sets[i]->project(c);
            if (p) put(anchor, i, *p);
            anchor_ok = p.has_value();
        }
        if (!anchor_ok) {
            // Empty confidence set for some column: fall back to the clipped estimate.
            WeightMatrix clipped = estimate(a);
            for (NodeId i = 0; i < n; ++i) {
                auto col = clipped.column(i);
                double nrm = 0.0;
                for (double v : col) nrm += v * v;
                nrm = std::sqrt(nrm);
                if (nrm > 1.0)
                    for (double& v : col) v /= nrm;
            }
            return expected_reward(clipped, nu_);
        }

        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t rs = 0; rs < std::max<std::size_t>(opt.restarts, 1); ++rs) {
            WeightMatrix theta = anchor;
            if (rs > 0) {
                for (NodeId i = 0; i < n; ++i) {
                    if (!sets[i]) continue;
                    Eigen::VectorXd dir(static_cast<Eigen::Index>(dag_->in_degree(i)));
                    for (Eigen::Index k = 0; k < dir.size(); ++k) dir(k) = rng_.normal();
                    if (auto p = sets[i]->maximize_linear(dir)) put(theta, i, *p);
                }
            }
            for (std::size_t sweep = 0; sweep < opt.sweeps; ++sweep) {
                bool moved = false;
                for (NodeId i = 0; i < n; ++i) {
                    if (!sets[i]) continue;
                    const auto grad = reward_gradient(theta, nu_, L);
                    const auto k = static_cast<Eigen::Index>(dag_->in_degree(i));
                    const Eigen::Map<const Eigen::VectorXd> g(grad.data() + dag_->offset(i), k);
                    auto p = sets[i]->maximize_linear(g);
                    if (!p) continue;
                    const Eigen::Map<const Eigen::VectorXd> cur(theta.column(i).data(), k);
                    if (g.dot(*p - cur) > 1e-12 * (1.0 + g.norm())) {
                        put(theta, i, *p);
                        moved = true;
                    }
                }
                if (!moved) break;
            }
            best = std::max(best, expected_reward(theta, nu_));
        }
        return best;
    }

    /// The policy's selection index for an arm at round t.
    [[nodiscard]] double index(std::size_t arm, std::size_t t) {
        switch (kind_) {
            case PolicyKind::vanilla_ucb: {
                if (arm_count_[arm] == 0) return std::numeric_limits<double>::infinity();
                const double n = static_cast<double>(arm_count_[arm]);
                const double lt = std::log(static_cast<double>(std::max<std::size_t>(t, 1)));
                return arm_sum_[arm] / n + spec_.m_x * std::sqrt(2.0 * lt / n);
            }
            case PolicyKind::oracle: return arm == oracle_arm_ ? 1.0 : 0.0;
            default:
                return solver_ == Solver::bonus ? ucb_index_bonus(arm, t)
                                                : ucb_index_projected_ascent(arm, t, ascent_);
        }
    }

    /// argmax over arms of the index; ties go to the lowest arm position.
    [[nodiscard]] std::size_t select(std::size_t t) {
        if (t == 0) throw std::invalid_argument("rounds are numbered from 1");
        if (kind_ == PolicyKind::oracle) return oracle_arm_;
        if (kind_ == PolicyKind::vanilla_ucb) {
            for (std::size_t k = 0; k < arms_.size(); ++k)
                if (arm_count_[k] == 0) return k;
        }
        if (kind_ != PolicyKind::vanilla_ucb && solver_ == Solver::bonus) {
            // Shared per-round factor; eigenvalues are cached per regressor.
            const double factor = compounding_factor(dag_->max_in_degree(), dag_->longest_path(), radius(t));
            std::size_t best = 0;
            double best_val = -std::numeric_limits<double>::infinity();
            for (std::size_t k = 0; k < arms_.size(); ++k) {
                const double v = bonus_index(k, factor);
                if (v > best_val) {
                    best_val = v;
                    best = k;
                }
            }
            return best;
        }
        // Arms that differ only on parentless nodes share every confidence
        // set, so their index is computed once.
        std::vector<std::pair<std::uint64_t, double>> seen;
        std::size_t best = 0;
        double best_val = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < arms_.size(); ++k) {
            const std::uint64_t key = arms_[k].bits & with_parents_;
            auto it = std::find_if(seen.begin(), seen.end(), [&](const auto& e) { return e.first == key; });
            double v = 0.0;
            if (it != seen.end()) {
                v = it->second;
            } else {
                v = index(k, t);
                seen.emplace_back(key, v);
            }
            if (v > best_val) {
                best_val = v;
                best = k;
            }
        }
        return best;
    }

    /// Absorbs the round's sample generated under arms()[arm].
    void observe(std::size_t arm, std::span<const double> x, std::size_t t) {
        (void)t;
        ++arm_count_[arm];
        arm_sum_[arm] += x[dag_->reward_node()];
        if (kind_ == PolicyKind::vanilla_ucb || kind_ == PolicyKind::oracle) return;
        sets_valid_ = false;
        const Intervention a = arms_[arm];
        const bool weighted = kind_ == PolicyKind::robust_lcb;
        std::vector<double> x_pa;
        for (NodeId i = 0; i < dag_->n_nodes(); ++i) {
            auto pa = dag_->parents(i);
            if (pa.empty()) continue;
            x_pa.resize(pa.size());
            for (std::size_t k = 0; k < pa.size(); ++k) x_pa[k] = x[pa[k]];
            const bool intervened = a.contains(i);
            NodeRegressor& reg = intervened ? int_[i] : obs_[i];
            const double w = weighted ? sample_weight(x_pa, reg, spec_.budget) : 1.0;
            last_weights_[i] = w;
            reg.update(w, x_pa, x[i] - nu_[i]);
            const Eigen::VectorXd& b = reg.estimate();
            (intervened ? est_int_ : est_obs_)
                .set_column(i, std::span<const double>(b.data(), static_cast<std::size_t>(b.size())));
        }
    }

private:
    /// Rebuilds the per-node confidence sets when the radius or any
    /// regressor changed since the last call.
    void refresh_sets(double r) {
        if (sets_valid_ && r == sets_radius_) return;
        const std::size_t n = dag_->n_nodes();
        obs_sets_.assign(n, std::nullopt);
        int_sets_.assign(n, std::nullopt);
        for (NodeId i = 0; i < n; ++i) {
            if (dag_->in_degree(i) == 0) continue;
            obs_sets_[i].emplace(obs_[i].estimate(), obs_[i].metric(), r);
            int_sets_[i].emplace(int_[i].estimate(), int_[i].metric(), r);
        }
        sets_valid_ = true;
        sets_radius_ = r;
    }

    [[nodiscard]] double bonus_index(std::size_t arm, double factor) const {
        const Intervention a = arms_[arm];
        double worst = 0.0;
        for (NodeId i = 0; i < dag_->n_nodes(); ++i) {
            if (dag_->in_degree(i) == 0) continue;
            const double lam = (a.contains(i) ? int_[i] : obs_[i]).effective_min_eig();
            worst = std::max(worst, 1.0 / std::sqrt(lam));
        }
        return expected_reward(estimate(a), nu_) + nu_norm_ * factor * worst;
    }

    PolicyKind kind_;
    Solver solver_;
    AscentOptions ascent_;
    ConfidenceSpec spec_;
    std::shared_ptr<const Dag> dag_;
    std::vector<double> nu_;
    double nu_norm_ = 0.0;
    std::uint64_t with_parents_ = 0;
    std::vector<Intervention> arms_;
    std::vector<NodeRegressor> obs_;
    std::vector<NodeRegressor> int_;
    WeightMatrix est_obs_;
    WeightMatrix est_int_;
    std::vector<double> last_weights_;
    std::vector<double> arm_sum_;
    std::vector<std::size_t> arm_count_;
    std::size_t oracle_arm_ = 0;
    Rng rng_;
    std::vector<std::optional<EllipsoidBall>> obs_sets_;
    std::vector<std::optional<EllipsoidBall>> int_sets_;
    bool sets_valid_ = false;
    double sets_radius_ = 0.0;
};

}  // namespace rcb

#endif  // RCB_POLICIES_HPP

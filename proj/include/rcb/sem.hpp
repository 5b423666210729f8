#ifndef RCB_SEM_HPP
#define RCB_SEM_HPP

// Linear structural equation models over a known DAG: graph, soft
// interventions, effective weight composition, sampling, and the
// closed-form expected reward of an intervention.

#include <algorithm>
#include <bit>
#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "rcb/rng.hpp"

namespace rcb {

using NodeId = std::size_t;

inline constexpr std::size_t kMaxNodes = 64;

class GraphError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Thrown when a sample leaves the analytic bound on ||X||.
class BoundViolation : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Directed acyclic graph in topological index order. Node indices are
/// 0-based; the last node is the reward node. Every parent index is strictly
/// smaller than its child, so the edge weight matrix is strictly upper
/// triangular and acyclicity holds by construction.
class Dag {
public:
    /// Validates parent ordering and caches the max in-degree and the
    /// longest directed path. Throws GraphError naming the first bad edge.
    static Dag create(std::vector<std::vector<NodeId>> parents) {
        if (parents.empty()) throw GraphError("graph must have at least one node");
        if (parents.size() > kMaxNodes)
            throw GraphError("graph has " + std::to_string(parents.size()) + " nodes; at most " +
                             std::to_string(kMaxNodes) + " are supported");
        Dag g;
        g.n_ = parents.size();
        g.offsets_.assign(g.n_ + 1, 0);
        for (NodeId i = 0; i < g.n_; ++i) {
            auto& pa = parents[i];
            for (NodeId p : pa) {
                if (p >= i)
                    throw GraphError("parent index not less than child: edge (" + std::to_string(p) +
                                     "," + std::to_string(i) + ")");
            }
            std::sort(pa.begin(), pa.end());
            if (std::adjacent_find(pa.begin(), pa.end()) != pa.end())
                throw GraphError("duplicate parent in node " + std::to_string(i));
            g.offsets_[i + 1] = g.offsets_[i] + pa.size();
            g.parents_.insert(g.parents_.end(), pa.begin(), pa.end());
            g.max_in_degree_ = std::max(g.max_in_degree_, pa.size());
        }
        std::vector<std::size_t> depth(g.n_, 0);
        for (NodeId i = 0; i < g.n_; ++i) {
            for (NodeId p : g.parents(i)) depth[i] = std::max(depth[i], depth[p] + 1);
            g.longest_path_ = std::max(g.longest_path_, depth[i]);
        }
        return g;
    }

    [[nodiscard]] std::size_t n_nodes() const noexcept { return n_; }
    [[nodiscard]] NodeId reward_node() const noexcept { return n_ - 1; }
    [[nodiscard]] std::size_t n_edges() const noexcept { return parents_.size(); }
    /// d: maximum in-degree.
    [[nodiscard]] std::size_t max_in_degree() const noexcept { return max_in_degree_; }
    /// L: number of edges on the longest directed path.
    [[nodiscard]] std::size_t longest_path() const noexcept { return longest_path_; }

    [[nodiscard]] std::span<const NodeId> parents(NodeId i) const noexcept {
        return {parents_.data() + offsets_[i], offsets_[i + 1] - offsets_[i]};
    }
    [[nodiscard]] std::size_t in_degree(NodeId i) const noexcept { return offsets_[i + 1] - offsets_[i]; }
    /// Position of node i's first parent entry in any edge-aligned array.
    [[nodiscard]] std::size_t offset(NodeId i) const noexcept { return offsets_[i]; }

    bool operator==(const Dag&) const = default;

private:
    Dag() = default;

    std::size_t n_ = 0;
    std::vector<std::size_t> offsets_;
    std::vector<NodeId> parents_;
    std::size_t max_in_degree_ = 0;
    std::size_t longest_path_ = 0;
};

/// A set of simultaneously intervened nodes; bit i is node i.
struct Intervention {
    std::uint64_t bits = 0;

    [[nodiscard]] static Intervention none() noexcept { return {}; }
    [[nodiscard]] static Intervention all(std::size_t n) noexcept {
        return {n >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << n) - 1};
    }
    [[nodiscard]] static Intervention of(std::initializer_list<NodeId> nodes) noexcept {
        Intervention a;
        for (NodeId i : nodes) a.bits |= std::uint64_t{1} << i;
        return a;
    }
    [[nodiscard]] bool contains(NodeId i) const noexcept { return (bits >> i) & 1U; }
    [[nodiscard]] std::size_t size() const noexcept { return static_cast<std::size_t>(std::popcount(bits)); }

    auto operator<=>(const Intervention&) const = default;
};

/// Every subset of the n nodes, in increasing bit-mask order.
inline std::vector<Intervention> all_arms(std::size_t n) {
    if (n > 20) throw std::invalid_argument("full arm enumeration limited to 20 nodes");
    std::vector<Intervention> arms(std::size_t{1} << n);
    for (std::size_t k = 0; k < arms.size(); ++k) arms[k].bits = k;
    return arms;
}

/// The empty intervention followed by every single-node intervention.
inline std::vector<Intervention> atomic_arms(std::size_t n) {
    std::vector<Intervention> arms{Intervention::none()};
    for (NodeId i = 0; i < n; ++i) arms.push_back(Intervention::of({i}));
    return arms;
}

/// Edge weights stored column-sparse: column i holds the weights of the
/// edges Pa(i) -> i, aligned with Dag::parents(i).
class WeightMatrix {
public:
    WeightMatrix() = default;
    explicit WeightMatrix(std::shared_ptr<const Dag> dag)
        : dag_(std::move(dag)), values_(dag_->n_edges(), 0.0) {}
    WeightMatrix(std::shared_ptr<const Dag> dag, std::vector<double> values)
        : dag_(std::move(dag)), values_(std::move(values)) {
        if (values_.size() != dag_->n_edges())
            throw std::invalid_argument("weight vector length does not match edge count");
    }

    [[nodiscard]] const Dag& dag() const noexcept { return *dag_; }
    [[nodiscard]] const std::shared_ptr<const Dag>& dag_ptr() const noexcept { return dag_; }

    [[nodiscard]] std::span<const double> column(NodeId i) const noexcept {
        return {values_.data() + dag_->offset(i), dag_->in_degree(i)};
    }
    [[nodiscard]] std::span<double> column(NodeId i) noexcept {
        return {values_.data() + dag_->offset(i), dag_->in_degree(i)};
    }
    void set_column(NodeId i, std::span<const double> col) {
        if (col.size() != dag_->in_degree(i)) throw std::invalid_argument("column length does not match in-degree");
        std::copy(col.begin(), col.end(), column(i).begin());
    }

    [[nodiscard]] double column_norm(NodeId i) const noexcept {
        double s = 0.0;
        for (double v : column(i)) s += v * v;
        return std::sqrt(s);
    }

    [[nodiscard]] std::span<const double> values() const noexcept { return values_; }

    /// Dense N x N matrix with entry (j, i) = weight of edge j -> i.
    [[nodiscard]] Eigen::MatrixXd dense() const {
        const std::size_t n = dag_->n_nodes();
        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
        for (NodeId i = 0; i < n; ++i) {
            auto pa = dag_->parents(i);
            auto col = column(i);
            for (std::size_t k = 0; k < pa.size(); ++k)
                m(static_cast<Eigen::Index>(pa[k]), static_cast<Eigen::Index>(i)) = col[k];
        }
        return m;
    }

    bool operator==(const WeightMatrix& o) const { return *dag_ == *o.dag_ && values_ == o.values_; }

private:
    std::shared_ptr<const Dag> dag_;
    std::vector<double> values_;
};

/// Bounded exogenous noise: eps_i = mean_i + scale_i * z with z uniform on
/// [-1, 1] or standard normal truncated at +-truncation.
struct NoiseSpec {
    enum class Kind { uniform, truncated_gaussian };

    struct Node {
        Kind kind = Kind::uniform;
        double mean = 0.0;
        double scale = 1.0;
        double truncation = 3.0;
    };

    std::vector<Node> nodes;

    [[nodiscard]] std::vector<double> means() const {
        std::vector<double> nu(nodes.size());
        std::transform(nodes.begin(), nodes.end(), nu.begin(), [](const Node& n) { return n.mean; });
        return nu;
    }

    /// Largest attainable |eps_i|.
    [[nodiscard]] double max_abs(NodeId i) const {
        const Node& n = nodes[i];
        const double half = n.kind == Kind::uniform ? n.scale : n.scale * n.truncation;
        return std::abs(n.mean) + half;
    }

    void draw(Rng& rng, std::span<double> out) const {
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            const Node& n = nodes[i];
            const double z = n.kind == Kind::uniform ? rng.uniform(-1.0, 1.0) : rng.truncated_normal(n.truncation);
            out[i] = n.mean + n.scale * z;
        }
    }
};

/// One environment draw: the node values and the noise that produced them.
struct Sample {
    std::vector<double> x;
    std::vector<double> eps;
};

/// X_i = <column i, X_Pa(i)> + eps_i in index order.
inline void propagate(const WeightMatrix& weights, std::span<const double> eps, std::span<double> x) {
    const Dag& g = weights.dag();
    for (NodeId i = 0; i < g.n_nodes(); ++i) {
        double v = eps[i];
        auto pa = g.parents(i);
        auto col = weights.column(i);
        for (std::size_t k = 0; k < pa.size(); ++k) v += col[k] * x[pa[k]];
        x[i] = v;
    }
}

inline Sample sample_with_noise(const WeightMatrix& weights, std::vector<double> eps) {
    Sample s{std::vector<double>(eps.size()), std::move(eps)};
    propagate(weights, s.eps, s.x);
    return s;
}

/// Draws one sample; throws BoundViolation if ||X|| exceeds `m_x`.
inline Sample sample(const WeightMatrix& weights, const NoiseSpec& noise, Rng& rng,
                     double m_x = std::numeric_limits<double>::infinity()) {
    std::vector<double> eps(noise.nodes.size());
    noise.draw(rng, eps);
    Sample s = sample_with_noise(weights, std::move(eps));
    double sq = 0.0;
    for (double v : s.x) sq += v * v;
    if (std::sqrt(sq) > m_x * (1.0 + 1e-12))
        throw BoundViolation("sample norm " + std::to_string(std::sqrt(sq)) + " exceeds bound " + std::to_string(m_x));
    return s;
}

/// f(A) = sum_{l=0..L} [A^l]_N, the reward-node column of the matrix
/// power series, via c <- A c starting from e_N. Cost O(L * |E|).
inline std::vector<double> reward_map(const WeightMatrix& weights, std::size_t max_len) {
    const Dag& g = weights.dag();
    const std::size_t n = g.n_nodes();
    std::vector<double> f(n, 0.0), c(n, 0.0), next(n, 0.0);
    c[g.reward_node()] = 1.0;
    f[g.reward_node()] = 1.0;
    for (std::size_t l = 1; l <= max_len; ++l) {
        std::fill(next.begin(), next.end(), 0.0);
        bool any = false;
        for (NodeId k = 0; k < n; ++k) {
            if (c[k] == 0.0) continue;
            auto pa = g.parents(k);
            auto col = weights.column(k);
            for (std::size_t e = 0; e < pa.size(); ++e) {
                next[pa[e]] += col[e] * c[k];
                any = true;
            }
        }
        if (!any) break;
        c.swap(next);
        for (NodeId j = 0; j < n; ++j) f[j] += c[j];
    }
    return f;
}

inline std::vector<double> reward_map(const WeightMatrix& weights) {
    return reward_map(weights, weights.dag().longest_path());
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

/// mu = <f(weights), nu>.
inline double expected_reward(const WeightMatrix& weights, std::span<const double> nu) {
    return dot(reward_map(weights), nu);
}

/// A linear SEM with observational and interventional weights over a
/// shared DAG. Columns are required to lie in the unit ball.
class SemInstance {
public:
    SemInstance(WeightMatrix b_obs, WeightMatrix b_int, NoiseSpec noise)
        : b_obs_(std::move(b_obs)), b_int_(std::move(b_int)), noise_(std::move(noise)) {
        const Dag& g = b_obs_.dag();
        if (!(b_int_.dag() == g)) throw std::invalid_argument("observational and interventional graphs differ");
        if (noise_.nodes.size() != g.n_nodes()) throw std::invalid_argument("noise spec size does not match graph");
        for (NodeId i = 0; i < g.n_nodes(); ++i) {
            if (b_obs_.column_norm(i) > 1.0 + 1e-12 || b_int_.column_norm(i) > 1.0 + 1e-12)
                throw std::invalid_argument("column " + std::to_string(i) + " exceeds the unit ball");
        }
        nu_ = noise_.means();
        double e2 = 0.0;
        for (NodeId i = 0; i < g.n_nodes(); ++i) e2 += noise_.max_abs(i) * noise_.max_abs(i);
        m_eps_ = std::sqrt(e2);
        // |X_i| <= ||X_Pa(i)|| * ||column|| + max|eps_i| with every column
        // (nominal or deviated) in the unit ball.
        std::vector<double> bound(g.n_nodes(), 0.0);
        double x2 = 0.0;
        for (NodeId i = 0; i < g.n_nodes(); ++i) {
            double pa2 = 0.0;
            for (NodeId p : g.parents(i)) pa2 += bound[p] * bound[p];
            bound[i] = std::sqrt(pa2) + noise_.max_abs(i);
            x2 += bound[i] * bound[i];
        }
        m_x_ = std::sqrt(x2);
    }

    [[nodiscard]] const Dag& dag() const noexcept { return b_obs_.dag(); }
    [[nodiscard]] const std::shared_ptr<const Dag>& dag_ptr() const noexcept { return b_obs_.dag_ptr(); }
    [[nodiscard]] std::size_t n_nodes() const noexcept { return dag().n_nodes(); }
    [[nodiscard]] const WeightMatrix& b_obs() const noexcept { return b_obs_; }
    [[nodiscard]] const WeightMatrix& b_int() const noexcept { return b_int_; }
    [[nodiscard]] const NoiseSpec& noise() const noexcept { return noise_; }
    [[nodiscard]] std::span<const double> nu() const noexcept { return nu_; }
    /// Bound on ||eps||.
    [[nodiscard]] double m_eps() const noexcept { return m_eps_; }
    /// Bound on ||X|| under any intervention and any unit-ball deviation.
    [[nodiscard]] double m_x() const noexcept { return m_x_; }

private:
    WeightMatrix b_obs_;
    WeightMatrix b_int_;
    NoiseSpec noise_;
    std::vector<double> nu_;
    double m_eps_ = 0.0;
    double m_x_ = 0.0;
};

/// Column i is the interventional column when i is in `a`, else observational.
inline WeightMatrix compose_weights(const SemInstance& sem, Intervention a) {
    WeightMatrix w = sem.b_obs();
    for (NodeId i = 0; i < sem.n_nodes(); ++i)
        if (a.contains(i)) w.set_column(i, sem.b_int().column(i));
    return w;
}

inline double expected_reward(const SemInstance& sem, Intervention a) {
    return expected_reward(compose_weights(sem, a), sem.nu());
}

/// Arm with the largest nominal expected reward; ties go to the smallest
/// bit mask.
inline std::pair<Intervention, double> best_arm(const SemInstance& sem, std::span<const Intervention> arms) {
    if (arms.empty()) throw std::invalid_argument("best_arm needs at least one arm");
    Intervention best = arms.front();
    double best_mu = -std::numeric_limits<double>::infinity();
    for (const Intervention& a : arms) {
        const double mu = expected_reward(sem, a);
        const double tol = 1e-12 * std::max(1.0, std::abs(mu));
        if (mu > best_mu + tol) {
            best = a;
            best_mu = mu;
        } else if (std::abs(mu - best_mu) <= tol && a < best) {
            best = a;
        }
    }
    return {best, best_mu};
}

}  // namespace rcb

#endif  // RCB_SEM_HPP

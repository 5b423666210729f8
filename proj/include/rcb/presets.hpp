#ifndef RCB_PRESETS_HPP
#define RCB_PRESETS_HPP

// Graph families and parameterized instances used by the experiments.

#include <cmath>
#include <cstddef>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rcb/rng.hpp"
#include "rcb/sem.hpp"

namespace rcb {

inline std::shared_ptr<const Dag> make_dag(std::vector<std::vector<NodeId>> parents) {
    return std::make_shared<const Dag>(Dag::create(std::move(parents)));
}

/// 0 -> 1 -> ... -> n-1.
inline std::shared_ptr<const Dag> chain_dag(std::size_t n) {
    if (n < 2) throw std::invalid_argument("chain needs at least 2 nodes");
    std::vector<std::vector<NodeId>> pa(n);
    for (NodeId i = 1; i < n; ++i) pa[i] = {i - 1};
    return make_dag(std::move(pa));
}

/// Node 0 is a parent of every other node and the reward node is a child
/// of every other node (including a direct edge from node 0).
inline std::shared_ptr<const Dag> confounded_parallel_dag(std::size_t n) {
    if (n < 3) throw std::invalid_argument("confounded parallel graph needs at least 3 nodes");
    std::vector<std::vector<NodeId>> pa(n);
    for (NodeId i = 1; i + 1 < n; ++i) pa[i] = {0};
    for (NodeId j = 0; j + 1 < n; ++j) pa[n - 1].push_back(j);
    return make_dag(std::move(pa));
}

/// Consecutive layers fully connected, last layer feeding the reward node.
/// widths[0] is the root layer. N = sum(widths) + 1 and L = widths.size().
inline std::shared_ptr<const Dag> hierarchical_dag(const std::vector<std::size_t>& widths) {
    if (widths.empty()) throw std::invalid_argument("hierarchical graph needs at least one layer");
    std::vector<std::vector<NodeId>> pa;
    std::vector<NodeId> prev;
    for (std::size_t w : widths) {
        if (w == 0) throw std::invalid_argument("layer width must be positive");
        std::vector<NodeId> layer;
        for (std::size_t k = 0; k < w; ++k) {
            layer.push_back(pa.size());
            pa.push_back(prev);
        }
        prev = std::move(layer);
    }
    pa.push_back(prev);
    return make_dag(std::move(pa));
}

/// Uniform noise eps_i = nu_i + U[-1, 1]; nu_i drawn from U[0, 2] unless given.
inline NoiseSpec uniform_noise(std::size_t n, Rng& rng, const std::optional<std::vector<double>>& nu_override) {
    if (nu_override && nu_override->size() != n)
        throw std::invalid_argument("nu_override has " + std::to_string(nu_override->size()) + " entries, graph has " +
                                    std::to_string(n) + " nodes");
    NoiseSpec noise;
    for (std::size_t i = 0; i < n; ++i) {
        const double mean = nu_override ? (*nu_override)[i] : rng.uniform(0.0, 2.0);
        noise.nodes.push_back({NoiseSpec::Kind::uniform, mean, 1.0, 3.0});
    }
    return noise;
}

/// Per-node weights obs_scale / sqrt(|Pa(i)|) and int_scale / sqrt(|Pa(i)|).
inline SemInstance degree_scaled_instance(std::shared_ptr<const Dag> dag, double obs_scale, double int_scale,
                                          NoiseSpec noise) {
    WeightMatrix b(dag), bs(dag);
    for (NodeId i = 0; i < dag->n_nodes(); ++i) {
        const double k = static_cast<double>(dag->in_degree(i));
        for (auto& v : b.column(i)) v = obs_scale / std::sqrt(k);
        for (auto& v : bs.column(i)) v = int_scale / std::sqrt(k);
    }
    return SemInstance(std::move(b), std::move(bs), std::move(noise));
}

/// Chain with observational weight 0.5 and interventional weight 1.
inline SemInstance chain_instance(std::size_t n, Rng& rng, const std::optional<std::vector<double>>& nu = {}) {
    auto dag = chain_dag(n);
    return degree_scaled_instance(dag, 0.5, 1.0, uniform_noise(n, rng, nu));
}

/// Middle nodes 0.5 / 1; reward-node parents 0.5/sqrt(N-1) and 1/sqrt(N-1).
inline SemInstance confounded_parallel_instance(std::size_t n, Rng& rng,
                                                const std::optional<std::vector<double>>& nu = {}) {
    auto dag = confounded_parallel_dag(n);
    return degree_scaled_instance(dag, 0.5, 1.0, uniform_noise(n, rng, nu));
}

inline SemInstance hierarchical_instance(const std::vector<std::size_t>& widths, Rng& rng,
                                         const std::optional<std::vector<double>>& nu = {}) {
    auto dag = hierarchical_dag(widths);
    const std::size_t n = dag->n_nodes();
    return degree_scaled_instance(dag, 0.5, 1.0, uniform_noise(n, rng, nu));
}

}  // namespace rcb

#endif  // RCB_PRESETS_HPP

#ifndef RCB_DEVIATION_HPP
#define RCB_DEVIATION_HPP

// Adversarial model-deviation schedules with exact budget accounting under
// the deviation-frequency (DF) and aggregate-deviation (AD) measures.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "rcb/sem.hpp"

namespace rcb {

enum class Measure { none, df, ad };
enum class ScheduleKind { none, early_flip, zeroing };

inline const char* to_string(Measure m) {
    switch (m) {
        case Measure::df: return "df";
        case Measure::ad: return "ad";
        default: return "none";
    }
}

inline const char* to_string(ScheduleKind k) {
    switch (k) {
        case ScheduleKind::early_flip: return "early_flip";
        case ScheduleKind::zeroing: return "zeroing";
        default: return "none";
    }
}

/// A schedule exceeded its declared budget.
class BudgetViolation : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Per-node realized deviation: number of rounds with a nonzero deviation
/// and the summed deviation norm, both maximized over interventions.
struct BudgetReport {
    std::vector<std::size_t> count;
    std::vector<double> aggregate;
    double max_round_norm = 0.0;
};

/// Deterministic, non-adaptive deviation schedule. The deviation of node i
/// at round t is a function of the nominal column only, so the maximum over
/// interventions in both measures is attained by the larger of the
/// observational and interventional columns.
class DeviationSchedule {
public:
    /// No deviation at any round.
    [[nodiscard]] static DeviationSchedule zero(std::size_t n_nodes) {
        DeviationSchedule s;
        s.col_norm_.assign(n_nodes, 0.0);
        return s;
    }

    /// Sign flip of the active column, capped at the per-round magnitude,
    /// applied to `targets` during the first K rounds. `budget` is the
    /// unified level C: for DF, K = floor(C / m_c) rounds capped at m_c;
    /// for AD, K = ceil(C / m_c) rounds whose caps sum to C.
    [[nodiscard]] static DeviationSchedule early_flip(const SemInstance& sem, Measure measure, double budget,
                                                      double m_c, const std::vector<NodeId>& targets,
                                                      std::size_t horizon) {
        if (budget < 0.0) throw std::invalid_argument("deviation budget must be non-negative");
        if (measure != Measure::none && !(m_c > 0.0)) throw std::invalid_argument("m_c must be positive");
        DeviationSchedule s = zero(sem.n_nodes());
        s.measure_ = measure;
        s.budget_ = budget;
        s.m_c_ = m_c;
        if (measure == Measure::none || budget == 0.0) return s;
        s.kind_ = ScheduleKind::early_flip;
        if (measure == Measure::df) {
            s.rounds_ = static_cast<std::size_t>(std::floor(budget / m_c + 1e-9));
            s.last_cap_ = m_c;
            s.budget_ = m_c * static_cast<double>(s.rounds_);
        } else {
            s.rounds_ = static_cast<std::size_t>(std::ceil(budget / m_c - 1e-9));
            s.last_cap_ = budget - m_c * static_cast<double>(s.rounds_ - 1);
        }
        if (s.rounds_ > horizon)
            throw std::invalid_argument("budget infeasible: " + std::to_string(s.rounds_) +
                                        " deviation rounds exceed horizon " + std::to_string(horizon));
        for (NodeId i : targets) {
            if (i >= sem.n_nodes()) throw std::invalid_argument("deviation target out of range");
            s.col_norm_[i] = std::max(sem.b_obs().column_norm(i), sem.b_int().column_norm(i));
        }
        if (s.rounds_ == 0) s.kind_ = ScheduleKind::none;
        return s;
    }

    /// Zeroes the reward node's column during rounds 1..floor(C).
    [[nodiscard]] static DeviationSchedule zeroing(const SemInstance& sem, double budget,
                                                   Measure measure = Measure::ad) {
        if (budget < 0.0) throw std::invalid_argument("deviation budget must be non-negative");
        const NodeId r = sem.dag().reward_node();
        if (sem.dag().in_degree(r) == 0) throw std::invalid_argument("zeroing needs a reward node with parents");
        DeviationSchedule s = zero(sem.n_nodes());
        s.measure_ = measure == Measure::none ? Measure::ad : measure;
        s.budget_ = budget;
        s.m_c_ = 1.0;
        s.rounds_ = static_cast<std::size_t>(std::floor(budget + 1e-9));
        if (s.rounds_ == 0) return s;
        s.kind_ = ScheduleKind::zeroing;
        s.last_cap_ = 1.0;
        s.col_norm_[r] = std::max(sem.b_obs().column_norm(r), sem.b_int().column_norm(r));
        return s;
    }

    [[nodiscard]] ScheduleKind kind() const noexcept { return kind_; }
    [[nodiscard]] Measure measure() const noexcept { return measure_; }
    /// Unified budget C (m_c * C_DF for DF, C_AD for AD).
    [[nodiscard]] double budget() const noexcept { return budget_; }
    [[nodiscard]] double m_c() const noexcept { return m_c_; }
    /// Rounds 1..active_rounds() may deviate; later rounds are nominal.
    [[nodiscard]] std::size_t active_rounds() const noexcept { return rounds_; }
    [[nodiscard]] bool active(std::size_t t) const noexcept {
        return kind_ != ScheduleKind::none && t >= 1 && t <= rounds_;
    }
    [[nodiscard]] bool targets(NodeId i) const noexcept { return col_norm_[i] > 0.0; }

    /// Deviation of node i at round t given its nominal column.
    void delta_column(NodeId i, std::size_t t, std::span<const double> nominal, std::span<double> out) const {
        std::fill(out.begin(), out.end(), 0.0);
        if (!active(t) || !targets(i)) return;
        if (kind_ == ScheduleKind::zeroing) {
            for (std::size_t k = 0; k < nominal.size(); ++k) out[k] = -nominal[k];
            return;
        }
        double norm = 0.0;
        for (double v : nominal) norm += v * v;
        norm = 2.0 * std::sqrt(norm);
        if (norm == 0.0) return;
        const double scale = std::min(1.0, cap(t) / norm);
        for (std::size_t k = 0; k < nominal.size(); ++k) out[k] = -2.0 * nominal[k] * scale;
    }

    /// D = nominal + Delta(t). Supports never change.
    [[nodiscard]] WeightMatrix apply(std::size_t t, const WeightMatrix& nominal) const {
        if (t == 0) throw std::invalid_argument("rounds are numbered from 1");
        if (!active(t)) return nominal;
        WeightMatrix d = nominal;
        std::vector<double> delta;
        for (NodeId i = 0; i < nominal.dag().n_nodes(); ++i) {
            if (!targets(i)) continue;
            auto col = nominal.column(i);
            delta.assign(col.size(), 0.0);
            delta_column(i, t, col, delta);
            auto out = d.column(i);
            for (std::size_t k = 0; k < col.size(); ++k) out[k] += delta[k];
        }
        return d;
    }

    /// Realized per-node totals; throws BudgetViolation if the declared
    /// measure's bound does not hold.
    [[nodiscard]] BudgetReport realized_budget() const {
        const std::size_t n = col_norm_.size();
        BudgetReport r{std::vector<std::size_t>(n, 0), std::vector<double>(n, 0.0), 0.0};
        for (std::size_t t = 1; t <= rounds_ && kind_ != ScheduleKind::none; ++t) {
            for (NodeId i = 0; i < n; ++i) {
                const double norm = round_norm(i, t);
                if (norm == 0.0) continue;
                ++r.count[i];
                r.aggregate[i] += norm;
                r.max_round_norm = std::max(r.max_round_norm, norm);
            }
        }
        constexpr double tol = 1e-9;
        for (NodeId i = 0; i < n; ++i) {
            const std::string node = "node " + std::to_string(i);
            switch (measure_) {
                case Measure::none:
                    if (r.count[i] != 0) throw BudgetViolation(node + " deviates under measure none");
                    break;
                case Measure::df: {
                    const double c_df = m_c_ > 0.0 ? budget_ / m_c_ : 0.0;
                    if (static_cast<double>(r.count[i]) > c_df + tol)
                        throw BudgetViolation(node + " deviates in " + std::to_string(r.count[i]) +
                                              " rounds, budget " + std::to_string(c_df));
                    break;
                }
                case Measure::ad:
                    if (r.aggregate[i] > budget_ + tol)
                        throw BudgetViolation(node + " aggregate deviation " + std::to_string(r.aggregate[i]) +
                                              " exceeds budget " + std::to_string(budget_));
                    break;
            }
        }
        if (measure_ == Measure::df && r.max_round_norm > m_c_ + tol)
            throw BudgetViolation("per-round deviation " + std::to_string(r.max_round_norm) + " exceeds m_c " +
                                  std::to_string(m_c_));
        return r;
    }

private:
    DeviationSchedule() = default;

    [[nodiscard]] double cap(std::size_t t) const noexcept { return t == rounds_ ? last_cap_ : m_c_; }

    /// max over interventions of ||Delta_i(t)||.
    [[nodiscard]] double round_norm(NodeId i, std::size_t t) const noexcept {
        if (!active(t) || !targets(i)) return 0.0;
        if (kind_ == ScheduleKind::zeroing) return col_norm_[i];
        return std::min(2.0 * col_norm_[i], cap(t));
    }

    ScheduleKind kind_ = ScheduleKind::none;
    Measure measure_ = Measure::none;
    double budget_ = 0.0;
    double m_c_ = 0.0;
    std::size_t rounds_ = 0;
    double last_cap_ = 0.0;
    std::vector<double> col_norm_;
};

}  // namespace rcb

#endif  // RCB_DEVIATION_HPP

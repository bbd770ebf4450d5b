#pragma once

// Quality indicator and statistics used to compare optimizer runs.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "pet/mop.hpp"

namespace pet::metrics {

struct IgdResult {
    double value = 0.0;
    std::size_t reference_size = 0;
    std::size_t solution_size = 0;
};

/// Inverted generational distance: mean over reference points of the
/// Euclidean distance to the nearest solution. Throws EmptySet when
/// `solutions` is empty.
[[nodiscard]] IgdResult igd(const std::vector<mop::ObjectiveVector>& reference,
                            const std::vector<mop::ObjectiveVector>& solutions);

/// IGD of the evaluated, feasible members of a population.
[[nodiscard]] IgdResult igd(const std::vector<mop::ObjectiveVector>& reference,
                            const mop::Population& pop);

enum class Decision { Better, Worse, Indifferent };

[[nodiscard]] const char* to_string(Decision d) noexcept;
/// "+", "-" or "=".
[[nodiscard]] const char* mark(Decision d) noexcept;

struct RankSumResult {
    double statistic = 0.0;  // rank sum of the first sample (midranks)
    double p_value = 1.0;
    bool exact = false;
    Decision decision = Decision::Indifferent;  // of `a` relative to `b`, lower is better
};

/// Two-sided Wilcoxon rank-sum test. Exact enumeration when |a|+|b| <= 12,
/// normal approximation with tie and continuity correction otherwise.
[[nodiscard]] RankSumResult wilcoxon_rank_sum(std::span<const double> a, std::span<const double> b,
                                              double alpha = 0.05);

/// Exact two-sided p-value by enumerating every split of the pooled midranks.
[[nodiscard]] double rank_sum_exact_p(std::span<const double> a, std::span<const double> b);
/// Normal approximation with tie correction and continuity correction.
[[nodiscard]] double rank_sum_normal_p(std::span<const double> a, std::span<const double> b);

/// Relative improvement over the best baseline, in percent:
/// (baseline - ours) / baseline * 100.
[[nodiscard]] double roc_percent(double best_baseline, double ours) noexcept;

[[nodiscard]] double median(std::vector<double> values);

/// Scientific notation with three significant digits ("6.55e-01").
[[nodiscard]] std::string format_sci3(double v);

}  // namespace pet::metrics

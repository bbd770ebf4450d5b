#include "pet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "pet/error.hpp"

namespace pet::metrics {
namespace {

// Midranks of the pooled sample (1-based).
std::vector<double> midranks(std::span<const double> pooled) {
    const std::size_t n = pooled.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t i, std::size_t j) { return pooled[i] < pooled[j]; });
    std::vector<double> r(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && pooled[idx[j + 1]] == pooled[idx[i]]) ++j;
        const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) r[idx[k]] = rank;
        i = j + 1;
    }
    return r;
}

std::vector<double> pool(std::span<const double> a, std::span<const double> b) {
    std::vector<double> p(a.begin(), a.end());
    p.insert(p.end(), b.begin(), b.end());
    return p;
}

void check_samples(std::span<const double> a, std::span<const double> b) {
    if (a.size() < 3 || b.size() < 3)
        throw ContractViolation("rank-sum test needs at least 3 observations per sample");
    for (double v : a)
        if (std::isnan(v)) throw ContractViolation("rank-sum sample contains NaN");
    for (double v : b)
        if (std::isnan(v)) throw ContractViolation("rank-sum sample contains NaN");
}

}  // namespace

IgdResult igd(const std::vector<mop::ObjectiveVector>& reference,
              const std::vector<mop::ObjectiveVector>& solutions) {
    if (reference.empty()) throw ContractViolation("IGD reference set is empty");
    if (solutions.empty()) throw EmptySet("IGD solution set is empty (no feasible solutions)");
    const std::size_t m = reference.front().size();
    double total = 0.0;
    for (const auto& r : reference) {
        if (r.size() != m) throw ContractViolation("reference points differ in dimension");
        double best = std::numeric_limits<double>::infinity();
        for (const auto& s : solutions) {
            if (s.size() != m) throw ContractViolation("solution and reference dimension differ");
            double d2 = 0.0;
            for (std::size_t k = 0; k < m; ++k) {
                const double diff = r[k] - s[k];
                d2 += diff * diff;
            }
            best = std::min(best, d2);
        }
        total += std::sqrt(best);
    }
    return {total / static_cast<double>(reference.size()), reference.size(), solutions.size()};
}

IgdResult igd(const std::vector<mop::ObjectiveVector>& reference, const mop::Population& pop) {
    std::vector<mop::ObjectiveVector> sols;
    for (const auto& s : pop.members) {
        if (s.evaluated() && s.cv.value_or(0.0) == 0.0) sols.push_back(*s.f);
    }
    return igd(reference, sols);
}

const char* to_string(Decision d) noexcept {
    switch (d) {
        case Decision::Better: return "better";
        case Decision::Worse: return "worse";
        case Decision::Indifferent: return "indifferent";
    }
    return "indifferent";
}

const char* mark(Decision d) noexcept {
    switch (d) {
        case Decision::Better: return "+";
        case Decision::Worse: return "-";
        case Decision::Indifferent: return "=";
    }
    return "=";
}

double rank_sum_exact_p(std::span<const double> a, std::span<const double> b) {
    const auto pooled = pool(a, b);
    const auto r = midranks(pooled);
    const std::size_t n = pooled.size();
    const std::size_t n1 = a.size();
    if (n > 30) throw ContractViolation("exact enumeration limited to 30 observations");
    const double w = std::accumulate(r.begin(), r.begin() + static_cast<long>(n1), 0.0);
    const double mu = static_cast<double>(n1) * static_cast<double>(n + 1) / 2.0;
    const double observed = std::abs(w - mu) - 1e-9;

    // Walk every n1-subset of positions in lexicographic order.
    std::vector<std::size_t> pick(n1);
    std::iota(pick.begin(), pick.end(), 0);
    std::size_t total = 0;
    std::size_t extreme = 0;
    for (;;) {
        double s = 0.0;
        for (std::size_t i : pick) s += r[i];
        ++total;
        if (std::abs(s - mu) >= observed) ++extreme;
        std::size_t k = n1;
        while (k > 0 && pick[k - 1] == n - n1 + k - 1) --k;
        if (k == 0) break;
        ++pick[k - 1];
        for (std::size_t j = k; j < n1; ++j) pick[j] = pick[j - 1] + 1;
    }
    return std::min(1.0, static_cast<double>(extreme) / static_cast<double>(total));
}

double rank_sum_normal_p(std::span<const double> a, std::span<const double> b) {
    const auto pooled = pool(a, b);
    const auto r = midranks(pooled);
    const double n1 = static_cast<double>(a.size());
    const double n2 = static_cast<double>(b.size());
    const double n = n1 + n2;
    const double w = std::accumulate(r.begin(), r.begin() + static_cast<long>(a.size()), 0.0);
    const double mu = n1 * (n + 1.0) / 2.0;

    // tie correction: sum (t^3 - t) over tie groups
    std::vector<double> sorted = pooled;
    std::sort(sorted.begin(), sorted.end());
    double ties = 0.0;
    for (std::size_t i = 0; i < sorted.size();) {
        std::size_t j = i;
        while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
        const double t = static_cast<double>(j - i);
        ties += t * t * t - t;
        i = j;
    }
    const double var = n1 * n2 / 12.0 * ((n + 1.0) - ties / (n * (n - 1.0)));
    if (var <= 0.0) return 1.0;
    const double z = std::max(0.0, std::abs(w - mu) - 0.5) / std::sqrt(var);
    return std::min(1.0, std::erfc(z / std::sqrt(2.0)));
}

RankSumResult wilcoxon_rank_sum(std::span<const double> a, std::span<const double> b,
                                double alpha) {
    check_samples(a, b);
    RankSumResult out;
    const auto pooled = pool(a, b);
    const auto r = midranks(pooled);
    out.statistic = std::accumulate(r.begin(), r.begin() + static_cast<long>(a.size()), 0.0);
    const bool all_equal = std::all_of(pooled.begin(), pooled.end(),
                                       [&](double v) { return v == pooled.front(); });
    if (all_equal) {
        out.p_value = 1.0;
        out.exact = pooled.size() <= 12;
        return out;
    }
    out.exact = pooled.size() <= 12;
    out.p_value = out.exact ? rank_sum_exact_p(a, b) : rank_sum_normal_p(a, b);
    if (out.p_value < alpha) {
        const double mu =
            static_cast<double>(a.size()) * static_cast<double>(pooled.size() + 1) / 2.0;
        out.decision = out.statistic < mu ? Decision::Better : Decision::Worse;
    }
    return out;
}

double roc_percent(double best_baseline, double ours) noexcept {
    return (best_baseline - ours) / best_baseline * 100.0;
}

double median(std::vector<double> values) {
    if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::string format_sci3(double v) {
    if (std::isnan(v)) return "NaN";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2e", v);
    return buf;
}

}  // namespace pet::metrics

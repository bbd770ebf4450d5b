#pragma once

// Core data model for multi-objective optimization: solutions, populations,
// problem descriptions, Pareto dominance and evaluation accounting.
//
// Everything is minimization. Solutions and populations are values; operations
// return new populations instead of mutating their inputs.

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace pet::mop {

using DecisionVector = std::vector<double>;
using ObjectiveVector = std::vector<double>;

/// Equality constraints with |h(x)| at or below this are counted as satisfied.
inline constexpr double kEqualityTolerance = 1e-4;

struct Solution {
    DecisionVector x;
    std::optional<ObjectiveVector> f;
    std::optional<double> cv;  // aggregate constraint violation, 0 = feasible

    Solution() = default;
    explicit Solution(DecisionVector x_) : x(std::move(x_)) {}
    Solution(DecisionVector x_, ObjectiveVector f_, double cv_ = 0.0);

    [[nodiscard]] bool evaluated() const noexcept { return f.has_value(); }
    [[nodiscard]] const ObjectiveVector& objectives() const;
    [[nodiscard]] double violation() const;

    friend bool operator==(const Solution&, const Solution&) = default;
};

struct Population {
    std::vector<Solution> members;
    std::size_t generation = 0;

    Population() = default;
    explicit Population(std::vector<Solution> m, std::size_t g = 0)
        : members(std::move(m)), generation(g) {}

    [[nodiscard]] std::size_t size() const noexcept { return members.size(); }
    [[nodiscard]] bool empty() const noexcept { return members.empty(); }
    [[nodiscard]] bool all_evaluated() const noexcept;
    [[nodiscard]] bool any_infeasible() const noexcept;
    const Solution& operator[](std::size_t i) const { return members[i]; }

    /// Concatenation, keeping this population's generation index.
    [[nodiscard]] Population merged(const Population& other) const;

    friend bool operator==(const Population&, const Population&) = default;
};

/// Declared shape of a problem. Construction validates the invariants.
class ProblemSpec {
public:
    ProblemSpec(std::string name, std::size_t d, std::size_t m, std::vector<double> lower,
                std::vector<double> upper, std::size_t n_constraints = 0);

    /// Unit box [0,1]^d, used for problems stored in normalized coordinates.
    static ProblemSpec unit_box(std::string name, std::size_t d, std::size_t m);

    [[nodiscard]] const std::string& name() const noexcept { return name_; }
    [[nodiscard]] std::size_t d() const noexcept { return d_; }
    [[nodiscard]] std::size_t m() const noexcept { return m_; }
    [[nodiscard]] std::size_t n_constraints() const noexcept { return n_constraints_; }
    [[nodiscard]] const std::vector<double>& lower() const noexcept { return lower_; }
    [[nodiscard]] const std::vector<double>& upper() const noexcept { return upper_; }

    [[nodiscard]] bool contains(std::span<const double> x) const noexcept;
    /// Throws ContractViolation unless x has length d, is finite and in bounds.
    void check_decision(std::span<const double> x) const;

    friend bool operator==(const ProblemSpec&, const ProblemSpec&) = default;

private:
    std::string name_;
    std::size_t d_;
    std::size_t m_;
    std::vector<double> lower_;
    std::vector<double> upper_;
    std::size_t n_constraints_;
};

/// Raw output of one problem evaluation.
struct Evaluation {
    ObjectiveVector f;
    std::vector<double> inequality;  // g_j(x) <= 0 is satisfied
    std::vector<double> equality;    // h_j(x) == 0 is satisfied
};

/// Black-box evaluator. Implementations must be pure and thread-safe.
class Problem {
public:
    virtual ~Problem() = default;
    [[nodiscard]] virtual const ProblemSpec& spec() const noexcept = 0;
    [[nodiscard]] virtual Evaluation evaluate(std::span<const double> x) const = 0;
};

/// Total evaluation allowance with atomic reserve semantics. Evaluations are
/// reserved before they run, so `used()` never exceeds `total()` even with
/// concurrent callers.
class EvaluationBudget {
public:
    explicit EvaluationBudget(std::size_t total);
    EvaluationBudget(const EvaluationBudget&) = delete;
    EvaluationBudget& operator=(const EvaluationBudget&) = delete;

    [[nodiscard]] std::size_t total() const noexcept { return total_; }
    [[nodiscard]] std::size_t used() const noexcept { return used_.load(); }
    [[nodiscard]] std::size_t remaining() const noexcept { return total_ - used_.load(); }
    [[nodiscard]] bool exhausted() const noexcept { return remaining() == 0; }

    /// Reserves up to `want` evaluations; returns how many were granted.
    std::size_t reserve(std::size_t want) noexcept;
    /// Returns reserved-but-unperformed evaluations.
    void refund(std::size_t n) noexcept;

private:
    std::size_t total_;
    std::atomic<std::size_t> used_{0};
};

struct EvaluationOutcome {
    Population population;
    std::size_t performed = 0;
    bool exhausted = false;  // set when some member could not be evaluated
};

[[nodiscard]] bool dominates(const Solution& a, const Solution& b);
[[nodiscard]] bool dominates(std::span<const double> fa, std::span<const double> fb) noexcept;

/// Feasibility-first dominance.
[[nodiscard]] bool constrained_dominates(const Solution& a, const Solution& b);

/// sum max(0, g_j) + sum |h_j|, with |h_j| <= kEqualityTolerance treated as 0.
[[nodiscard]] double aggregate_violation(std::span<const double> inequality,
                                         std::span<const double> equality) noexcept;

[[nodiscard]] std::vector<double> normalize_decision(std::span<const double> x,
                                                     const ProblemSpec& spec);
[[nodiscard]] std::vector<double> denormalize_decision(std::span<const double> u,
                                                       const ProblemSpec& spec);
/// Clamps every component into the problem bounds.
void clamp_to_bounds(std::vector<double>& x, const ProblemSpec& spec) noexcept;

/// Evaluates one decision vector without budget accounting. NaN output is an error.
[[nodiscard]] Solution evaluate_solution(const Problem& problem, DecisionVector x);

/// Evaluates every unevaluated member in order while the budget allows.
/// Members past the budget are returned unevaluated and `exhausted` is set.
[[nodiscard]] EvaluationOutcome evaluate(const Population& pop, const Problem& problem,
                                         EvaluationBudget& budget);

/// Keeps only evaluated members.
[[nodiscard]] Population evaluated_prefix(const Population& pop);

}  // namespace pet::mop

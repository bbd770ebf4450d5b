#pragma once

// Benchmark problems (ZDT, LSMOP, a synthetic learnability family), their
// analytic Pareto fronts, and a name-based registry.

#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pet/mop.hpp"

namespace pet::problems {

/// ZDT1, ZDT2, ZDT3, ZDT4 and ZDT6 (ZDT5 is binary-coded and not provided).
class ZdtProblem final : public mop::Problem {
public:
    ZdtProblem(int variant, std::size_t d);

    [[nodiscard]] const mop::ProblemSpec& spec() const noexcept override { return spec_; }
    [[nodiscard]] mop::Evaluation evaluate(std::span<const double> x) const override;
    [[nodiscard]] int variant() const noexcept { return variant_; }

    /// Objective values without bound checks or budget.
    [[nodiscard]] mop::ObjectiveVector objectives(std::span<const double> x) const;

private:
    int variant_;
    mop::ProblemSpec spec_;
};

/// Shape of an LSMOP Pareto front.
enum class FrontShape { Linear, Spherical, Disconnected };

/// LSMOP1-LSMOP9, scalable in d and m. Variable grouping uses n_k = 5
/// subcomponents per objective and the logistic-map group sizes of the suite.
class LsmopProblem final : public mop::Problem {
public:
    static constexpr std::size_t kSubcomponents = 5;

    LsmopProblem(int variant, std::size_t d, std::size_t m);

    [[nodiscard]] const mop::ProblemSpec& spec() const noexcept override { return spec_; }
    [[nodiscard]] mop::Evaluation evaluate(std::span<const double> x) const override;
    [[nodiscard]] int variant() const noexcept { return variant_; }
    [[nodiscard]] FrontShape front_shape() const noexcept;
    [[nodiscard]] const std::vector<std::size_t>& group_sizes() const noexcept { return sublen_; }

    [[nodiscard]] mop::ObjectiveVector objectives(std::span<const double> x) const;

    /// A decision vector whose distance variables zero every landscape function
    /// that is minimized at the origin, with the given position variables.
    [[nodiscard]] mop::DecisionVector linked_zero_point(std::span<const double> position) const;

private:
    int variant_;
    mop::ProblemSpec spec_;
    std::vector<std::size_t> sublen_;
    std::vector<std::size_t> offset_;
};

/// Unit-box problem used for learnability checks. Objective k is the mean
/// squared distance to the anchor point k/(m-1) * (1,...,1).
class SyntheticProblem final : public mop::Problem {
public:
    SyntheticProblem(std::size_t d, std::size_t m);
    [[nodiscard]] const mop::ProblemSpec& spec() const noexcept override { return spec_; }
    [[nodiscard]] mop::Evaluation evaluate(std::span<const double> x) const override;

private:
    mop::ProblemSpec spec_;
};

/// Generator of (population, shifted population) pairs whose optimal
/// next-generation map is known analytically: target = clamp(x + shift).
/// Populations are tight clusters (center in [0.2, 0.7]^d, per-coordinate
/// jitter uniform in [-jitter, jitter]).
class SyntheticShiftFamily {
public:
    SyntheticShiftFamily(std::size_t d, std::size_t m, double shift = 0.1, double jitter = 0.02);

    [[nodiscard]] const SyntheticProblem& problem() const noexcept { return problem_; }
    [[nodiscard]] const std::vector<double>& shift() const noexcept { return shift_; }

    /// Applies the known map to an evaluated population.
    [[nodiscard]] mop::Population shifted(const mop::Population& pop) const;

    /// Draws a fresh evaluated population of size n and its shifted successor.
    [[nodiscard]] std::pair<mop::Population, mop::Population> sample(std::mt19937_64& rng,
                                                                     std::size_t n) const;

private:
    SyntheticProblem problem_;
    std::vector<double> shift_;
    double jitter_;
};

/// Builds a problem from its registry name ("zdt1", "lsmop7", "synthetic", ...).
[[nodiscard]] std::shared_ptr<const mop::Problem> make_problem(const std::string& name,
                                                               std::size_t d, std::size_t m);
[[nodiscard]] std::vector<std::string> registered_names();

/// Default reference front size: 1,000 points for m = 2, 5,000 otherwise.
[[nodiscard]] std::size_t default_front_size(std::size_t m) noexcept;

/// n mutually non-dominated points on the analytic Pareto front of `problem`.
/// Throws Unsupported for problems without an analytic front.
[[nodiscard]] std::vector<mop::ObjectiveVector> sample_reference_front(const mop::Problem& problem,
                                                                       std::size_t n);

/// Landscape functions used by LSMOP; exposed for testing.
namespace landscape {
double sphere(std::span<const double> x) noexcept;
double schwefel(std::span<const double> x) noexcept;
double rosenbrock(std::span<const double> x) noexcept;
double rastrigin(std::span<const double> x) noexcept;
double griewank(std::span<const double> x) noexcept;
double ackley(std::span<const double> x) noexcept;
}  // namespace landscape

/// Filters a point set down to its mutually non-dominated subset (first
/// occurrence kept for duplicates).
[[nodiscard]] std::vector<mop::ObjectiveVector> nondominated_subset(
    const std::vector<mop::ObjectiveVector>& points);

}  // namespace pet::problems

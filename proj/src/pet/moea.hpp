#pragma once

// NSGA-II machinery (non-dominated sorting, crowding, environmental
// selection), SBX/PM variation, a competitive-swarm step, and the NSGA-II
// driver used as a teacher for trajectory collection.

#include <cstddef>
#include <limits>
#include <optional>
#include <random>
#include <vector>

#include "pet/mop.hpp"

namespace pet::moea {

using Rng = std::mt19937_64;

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

struct FrontPartition {
    std::vector<std::vector<std::size_t>> fronts;  // F_1, F_2, ...
    std::vector<std::size_t> rank;                 // 0-based front index per member
};

/// Deb's fast non-dominated sort. Uses constrained dominance when any member
/// is infeasible, plain Pareto dominance otherwise.
[[nodiscard]] FrontPartition fast_nondominated_sort(const mop::Population& pop);

/// Crowding distance of each member of `front` (indices into `pop`), in the
/// order of `front`. Boundary members get +infinity.
[[nodiscard]] std::vector<double> crowding_distance(const mop::Population& pop,
                                                    const std::vector<std::size_t>& front);

/// Rank and crowding for every member (crowding computed per front).
struct RankedPopulation {
    FrontPartition partition;
    std::vector<double> crowding;
};
[[nodiscard]] RankedPopulation rank_population(const mop::Population& pop);

/// Indices ordered by (rank asc, crowding desc, index asc).
[[nodiscard]] std::vector<std::size_t> selection_order(const mop::Population& pop);

/// Environmental selection of n members: whole fronts in rank order, the
/// last front split by descending crowding, ties by lower index. Survivors
/// keep their input order.
[[nodiscard]] mop::Population nsga2_select(const mop::Population& pop, std::size_t n);

struct VariationConfig {
    double sbx_eta = 20.0;
    double sbx_prob = 1.0;
    double pm_eta = 20.0;
    std::optional<double> pm_prob;  // per variable; defaults to 1/d

    void validate() const;
    [[nodiscard]] double mutation_probability(std::size_t d) const noexcept {
        return pm_prob.value_or(1.0 / static_cast<double>(d));
    }
};

/// Simulated binary crossover. Children are clamped to the bounds.
[[nodiscard]] std::pair<mop::DecisionVector, mop::DecisionVector> sbx_crossover(
    const mop::DecisionVector& a, const mop::DecisionVector& b, const mop::ProblemSpec& spec,
    const VariationConfig& cfg, Rng& rng);

/// Bounded polynomial mutation.
[[nodiscard]] mop::DecisionVector polynomial_mutation(const mop::DecisionVector& x,
                                                      const mop::ProblemSpec& spec,
                                                      const VariationConfig& cfg, Rng& rng);

/// Binary tournament on (rank, crowding, index); returns the winner's index.
[[nodiscard]] std::size_t binary_tournament(const RankedPopulation& ranked, Rng& rng);

/// N offspring (unevaluated) by tournament selection, SBX and PM.
[[nodiscard]] mop::Population make_offspring(const mop::Population& parents,
                                             const mop::ProblemSpec& spec,
                                             const VariationConfig& cfg, Rng& rng);

struct CsoConfig {
    double phi = 0.0;  // weight of the pull toward the population mean
};

/// Competitive swarm step: members are paired at random; each pair's loser
/// moves toward its winner, x_l + r1*(x_w - x_l) + phi*r2*(mean - x_l).
/// Winners are returned unchanged (still evaluated); moved losers are
/// unevaluated. With an odd size the last member in the pairing passes through.
[[nodiscard]] mop::Population cso_step(const mop::Population& pop, const mop::ProblemSpec& spec,
                                       Rng& rng, const CsoConfig& cfg = {});

/// Uniformly random in-bound decision vector.
[[nodiscard]] mop::DecisionVector random_decision(const mop::ProblemSpec& spec, Rng& rng);
[[nodiscard]] mop::Population random_population(const mop::ProblemSpec& spec, std::size_t n,
                                                Rng& rng);

/// One recorded (X^g, X^{g+1}) step of a run: both sides are post-selection.
struct GenerationPair {
    mop::Population parents;
    mop::Population successors;
    std::size_t generation = 0;
};

/// Receives generation pairs from a run. One sink per run.
class TrajectorySink {
public:
    virtual ~TrajectorySink() = default;
    virtual void append(const GenerationPair& pair) = 0;
};

enum class Teacher { Nsga2, Cso };

[[nodiscard]] const char* to_string(Teacher t) noexcept;
[[nodiscard]] Teacher teacher_from_string(const std::string& s);

struct GenerationLog {
    std::size_t generation = 0;
    std::size_t evaluations = 0;   // budget used after this generation
    std::size_t offspring = 0;     // offspring evaluated in this generation
    std::optional<double> igd;     // of the selected population
    std::optional<double> loss;    // fine-evolve loss, PET runs only
};

struct RunResult {
    mop::Population final_population;
    std::vector<GenerationLog> log;
    std::size_t evaluations = 0;
};

struct RunOptions {
    std::size_t population_size = 100;
    std::size_t evaluations = 1000;
    VariationConfig variation;
    Teacher teacher = Teacher::Nsga2;
    TrajectorySink* sink = nullptr;
    const std::vector<mop::ObjectiveVector>* reference_front = nullptr;
};

/// initialize -> evaluate -> (select -> vary -> evaluate)* until the budget
/// is spent. The last generation may be partial. Sinks receive a pair for
/// every two consecutive post-selection populations.
[[nodiscard]] RunResult run_nsga2(const mop::Problem& problem, const RunOptions& opts, Rng& rng);

}  // namespace pet::moea

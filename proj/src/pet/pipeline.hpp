#pragma once

// Pre-evolving (trajectory collection, offline training) and fine-evolving
// (NSGA-II with the model generating offspring and updating online).

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pet/model.hpp"
#include "pet/moea.hpp"
#include "pet/mop.hpp"

namespace pet::pipeline {

/// Stable 64-bit seed for one experiment cell.
[[nodiscard]] std::uint64_t derive_seed(std::uint64_t master, const std::string& arm,
                                        const std::string& problem, std::size_t d, std::size_t m,
                                        std::size_t index);

/// One recorded (X^g, X^{g+1}) step, stored in normalized coordinates:
/// decisions mapped into [0,1] by the problem bounds, objectives min-max
/// scaled over the union of both populations.
struct TrajectoryPair {
    std::string problem;
    std::size_t d = 0;
    std::size_t m = 0;
    std::string teacher;
    std::uint64_t seed = 0;
    std::size_t generation = 0;
    mop::Population x_g;
    mop::Population x_g1;

    /// Checks evaluation, (d, m) and equal sizes.
    void validate() const;
    [[nodiscard]] mop::ProblemSpec spec() const { return mop::ProblemSpec::unit_box(problem, d, m); }
    [[nodiscard]] static TrajectoryPair normalized(const mop::ProblemSpec& spec,
                                                   const moea::GenerationPair& raw,
                                                   const std::string& teacher, std::uint64_t seed);
};

/// Provenance of one (problem, teacher, seed) collection cell.
struct CellManifest {
    std::string problem;
    std::size_t d = 0;
    std::size_t m = 0;
    std::string teacher;
    std::uint64_t seed = 0;
    std::size_t pairs = 0;
    std::vector<double> lower;
    std::vector<double> upper;
};

struct TrajectoryDataset {
    std::vector<CellManifest> cells;
    std::vector<std::string> skipped;  // cells whose teacher run failed
    std::vector<TrajectoryPair> pairs;

    /// Manifest line followed by one JSON object per pair.
    [[nodiscard]] std::string to_jsonl() const;
    [[nodiscard]] static TrajectoryDataset from_jsonl(const std::string& text);
    void save(const std::filesystem::path& path) const;
    [[nodiscard]] static TrajectoryDataset load(const std::filesystem::path& path);
    void validate() const;
};

struct ProblemRef {
    std::string name;
    std::size_t d = 0;
    std::size_t m = 2;
};

struct CollectConfig {
    std::vector<ProblemRef> problems;
    std::vector<moea::Teacher> teachers{moea::Teacher::Nsga2};
    std::size_t seeds = 1;
    std::size_t population = 100;
    std::size_t evaluations = 10000;
    std::uint64_t master_seed = 0;
    std::size_t workers = 1;
};

/// Runs every (problem, teacher, seed) cell with a trajectory sink. Cells run
/// on a worker pool and merge in cell order.
[[nodiscard]] TrajectoryDataset collect_trajectories(const CollectConfig& cfg);

struct PretrainConfig {
    std::size_t batch_size = 8;
    std::size_t steps = 200;
    nn::AdamConfig adam;
    std::uint64_t seed = 0;
    std::size_t eval_every = 10;

    void validate() const;
};

struct LossPoint {
    std::size_t step = 0;
    double loss = 0.0;
};

using ProgressFn = std::function<void(const LossPoint&)>;

/// Shuffled mini-batch teacher-forced training. Batches only mix pairs with
/// equal (d, m, N). Returns the logged loss curve (mean batch loss).
std::vector<LossPoint> pretrain(const TrajectoryDataset& data, model::PetModel& model,
                                const PretrainConfig& cfg, const ProgressFn& progress = {});

/// Same as above over in-memory (parents, successors) pairs sharing one spec.
std::vector<LossPoint> pretrain_pairs(
    const std::vector<std::pair<mop::Population, mop::Population>>& pairs,
    const mop::ProblemSpec& spec, model::PetModel& model, const PretrainConfig& cfg,
    const ProgressFn& progress = {});

struct FineEvolveConfig {
    std::size_t steps_per_generation = 1;
    double lr = 1e-4;
    bool enabled = true;
};

/// Online updater holding the optimizer state for one run.
class FineEvolver {
public:
    FineEvolver(model::PetModel& model, FineEvolveConfig cfg);

    /// Trains toward nsga2_select(x_g + x_g1, |x_g|). Returns the loss before
    /// the first step, or nothing when disabled.
    std::optional<double> step(const mop::Population& x_g, const mop::Population& x_g1,
                               const mop::ProblemSpec& spec);

private:
    model::PetModel& model_;
    FineEvolveConfig cfg_;
    nn::Adam adam_;
};

struct PetRunOptions {
    std::size_t population_size = 100;
    std::size_t evaluations = 1000;
    FineEvolveConfig fine;
    const std::vector<mop::ObjectiveVector>* reference_front = nullptr;
};

/// NSGA-II with the model as offspring generator. `model` is updated in
/// place by fine-evolving; pass a copy to keep the original.
[[nodiscard]] moea::RunResult run_nsga2_pet(const mop::Problem& problem, model::PetModel& model,
                                            const PetRunOptions& opts, moea::Rng& rng);

/// Control arm: NSGA-II selection with offspring sampled uniformly in bounds.
[[nodiscard]] moea::RunResult run_random_offspring(const mop::Problem& problem,
                                                   const PetRunOptions& opts, moea::Rng& rng);

/// Mean over offspring of the squared normalized distance (divided by d) to
/// the closest target member.
[[nodiscard]] double offspring_target_distance(const mop::Population& offspring,
                                               const mop::Population& target,
                                               const mop::ProblemSpec& spec);

}  // namespace pet::pipeline

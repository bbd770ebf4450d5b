#pragma once

// Experiment orchestration: benchmark cells over a worker pool, statistical
// comparison against a reference arm, report files, and the built-in
// oracle self-test.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pet/metrics.hpp"
#include "pet/model.hpp"
#include "pet/pipeline.hpp"

namespace pet::harness {

/// Arms: "pet" (fine-evolving on), "pet-frozen" (no online updates),
/// "nsga2", "cso", "random" (uniform offspring under NSGA-II selection).
[[nodiscard]] const std::vector<std::string>& known_arms();

struct ExperimentConfig {
    std::vector<pipeline::ProblemRef> problems;
    std::vector<std::string> arms{"pet", "nsga2"};
    std::string reference_arm = "pet";
    std::size_t population = 100;
    std::size_t evaluations = 1000;
    std::size_t n_seeds = 20;
    std::uint64_t master_seed = 0;
    std::string model_path;      // checkpoint for the pet arms
    pipeline::FineEvolveConfig fine;
    std::size_t front_size = 0;  // 0 = default for the objective count
    std::size_t workers = 1;

    void validate() const;
    [[nodiscard]] static ExperimentConfig from_json(const std::string& text);
};

struct RunRecord {
    std::string arm;
    std::string problem;
    std::size_t d = 0;
    std::size_t m = 0;
    std::size_t seed_index = 0;
    std::uint64_t seed = 0;
    double igd = 0.0;  // NaN when the run failed or found nothing feasible
    std::size_t evaluations = 0;
    double wall_seconds = 0.0;
    bool failed = false;
    std::string error;
    std::vector<moea::GenerationLog> log;
};

struct ArmComparison {
    std::string arm;
    double median = 0.0;  // NaN if no usable runs
    std::size_t usable = 0;
    std::optional<metrics::RankSumResult> test;  // against the reference arm
};

struct ProblemSummary {
    std::string problem;
    std::size_t d = 0;
    std::size_t m = 0;
    double reference_median = 0.0;
    std::vector<ArmComparison> arms;  // every non-reference arm
    double best_baseline = 0.0;       // lowest finite baseline median, NaN if none
    double roc_percent = 0.0;         // NaN unless both medians are finite
};

struct BenchmarkResult {
    std::string reference_arm;
    std::vector<std::string> arms;
    std::vector<RunRecord> records;
    std::vector<ProblemSummary> summaries;
};

/// Runs every (arm, problem, seed) cell. Pet arms start from a copy of
/// `model` when given, else from cfg.model_path.
[[nodiscard]] BenchmarkResult run_benchmark(const ExperimentConfig& cfg,
                                            const model::PetModel* model = nullptr);

/// Medians, rank-sum marks and ROC per problem from finished records.
[[nodiscard]] BenchmarkResult summarize(std::vector<RunRecord> records,
                                        const std::vector<std::string>& arms,
                                        const std::string& reference_arm);

[[nodiscard]] std::string records_csv(const BenchmarkResult& r);
[[nodiscard]] std::string summary_json(const BenchmarkResult& r);
/// Medians to three significant digits with +/-/= marks and ROC(%).
[[nodiscard]] std::string text_table(const BenchmarkResult& r);
/// Writes records.csv, summary.json, table.txt and generations.jsonl.
void emit_report(const BenchmarkResult& r, const std::filesystem::path& dir);

struct SelftestCase {
    std::string name;
    bool passed = false;
    std::string detail;
};

/// Fast oracle suites: sorting vs brute force, IGD fixtures, rank-sum
/// enumeration fixture, toy-model gradient check.
[[nodiscard]] std::vector<SelftestCase> selftest();

}  // namespace pet::harness

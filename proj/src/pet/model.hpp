#pragma once

// The pre-evolved transformer: dimension embedding, objective encoding,
// encoder/decoder stacks and the solution head.

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "pet/mop.hpp"
#include "pet/nn/layers.hpp"
#include "pet/nn/tensor.hpp"

namespace pet::model {

enum class Head { Logistic, Softmax };

struct PetConfig {
    std::size_t d_hat = 128;
    std::size_t m_hat = 10;
    std::size_t width = 64;
    std::size_t layers = 2;
    std::size_t heads = 4;
    std::size_t max_seq = 100;
    Head head = Head::Logistic;

    void validate() const;
    [[nodiscard]] std::string to_json() const;
    [[nodiscard]] static PetConfig from_json(const std::string& text);
    friend bool operator==(const PetConfig&, const PetConfig&) = default;
};

/// Per-objective min-max scale taken from one population. Zero-range
/// objectives normalize to 0.5.
struct ObjectiveScale {
    std::vector<double> lo;
    std::vector<double> hi;

    [[nodiscard]] static ObjectiveScale of(const mop::Population& pop);
    [[nodiscard]] double apply(std::size_t k, double f) const noexcept;
};

struct EncoderBlock {
    nn::LayerNorm ln1, ln2;
    nn::MultiHeadAttention attn;
    nn::Mlp mlp;
};

struct DecoderBlock {
    nn::LayerNorm ln1, ln2;
    nn::MultiHeadAttention self_attn, cross_attn;
    nn::Mlp mlp;
};

class PetModel {
public:
    /// Parameters drawn from the conventional uniform scheme under `seed`.
    explicit PetModel(PetConfig cfg, std::uint64_t seed = 0);

    [[nodiscard]] const PetConfig& config() const noexcept { return cfg_; }

    /// Every parameter in the fixed checkpoint order: E_dim, E_obj, encoder
    /// blocks, decoder blocks, head.
    [[nodiscard]] std::vector<nn::Parameter*> parameters();
    [[nodiscard]] std::vector<const nn::Parameter*> parameters() const;
    [[nodiscard]] std::size_t parameter_count() const;
    [[nodiscard]] static std::size_t parameter_count(const PetConfig& cfg);

    /// Normalized decision vectors zero-padded to d_hat, one row per member.
    [[nodiscard]] nn::Tensor decision_tokens(const mop::Population& pop,
                                             const mop::ProblemSpec& spec) const;
    /// Normalized objective vectors zero-padded to m_hat.
    [[nodiscard]] nn::Tensor objective_tokens(const mop::Population& pop,
                                              const ObjectiveScale& scale) const;

    /// D0 = padded decisions times E_dim.
    nn::Var embed_dimension(nn::Tape& tape, const mop::Population& pop,
                            const mop::ProblemSpec& spec);
    /// O0 = padded normalized objectives times E_obj.
    nn::Var encode_objective(nn::Tape& tape, const mop::Population& pop,
                             const ObjectiveScale& scale);
    /// Z0 = D0 + O0.
    nn::Var embed(nn::Tape& tape, const mop::Population& pop, const mop::ProblemSpec& spec,
                  const ObjectiveScale& scale);

    nn::Var encode(nn::Tape& tape, nn::Var z0);
    /// Decoder stack plus head. Returns [seq, d_hat] values in [0,1]; with the
    /// softmax head only the first `d` columns are live.
    nn::Var decode(nn::Tape& tape, nn::Var y0, nn::Var memory, std::size_t d);

    /// Encoder output for a parent population (no gradients).
    [[nodiscard]] nn::Tensor memory(const mop::Population& parents, const mop::ProblemSpec& spec);

    /// Next decision vector given the decoded-so-far context. Objectives of
    /// the context are normalized with the parents' scale.
    [[nodiscard]] mop::DecisionVector decode_step(const mop::Population& context,
                                                  const nn::Tensor& memory,
                                                  const ObjectiveScale& scale,
                                                  const mop::ProblemSpec& spec);

    /// Teacher-forced head outputs for an already ordered target sequence:
    /// row i predicts target i+1 from targets 0..i.
    nn::Var teacher_forced_predictions(nn::Tape& tape, const mop::Population& parents,
                                       const mop::Population& ordered_targets,
                                       const mop::ProblemSpec& spec);

    void save(const std::filesystem::path& path) const;
    [[nodiscard]] std::string serialize() const;
    [[nodiscard]] static PetModel load(const std::filesystem::path& path);
    /// Loads and insists the stored configuration equals `expected`.
    [[nodiscard]] static PetModel load(const std::filesystem::path& path, const PetConfig& expected);
    [[nodiscard]] static PetModel deserialize(const std::string& bytes);

private:
    void build();
    void check_capacity(const mop::Population& pop, const mop::ProblemSpec& spec) const;

    PetConfig cfg_;
    nn::Parameter e_dim_;
    nn::Parameter e_obj_;
    std::vector<EncoderBlock> encoder_;
    std::vector<DecoderBlock> decoder_;
    nn::Linear head_;
};

/// Target order used for teacher forcing: (rank asc, crowding desc, index asc).
[[nodiscard]] mop::Population canonical_order(const mop::Population& pop);

/// MSE between teacher-forced predictions and the canonically ordered
/// successor population, on normalized decisions and the first d columns.
/// With `backward` the gradients are accumulated into the model parameters.
double teacher_forced_loss(PetModel& model, const mop::Population& parents,
                           const mop::Population& successors, const mop::ProblemSpec& spec,
                           bool backward = true);

struct GenerationOutcome {
    mop::Population offspring;
    bool exhausted = false;
};

/// Autoregressive generation of up to |parents| offspring. The first one is a
/// uniform-random initialization token; every offspring, that token included,
/// is evaluated against the budget as it is produced.
[[nodiscard]] GenerationOutcome generate_population(PetModel& model,
                                                    const mop::Population& parents,
                                                    const mop::Problem& problem,
                                                    mop::EvaluationBudget& budget,
                                                    std::mt19937_64& rng);

}  // namespace pet::model

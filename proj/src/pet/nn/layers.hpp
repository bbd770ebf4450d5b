#pragma once

// Transformer building blocks on top of the tape: linear maps, layer norm,
// multi-head attention and the position-wise MLP.

#include <random>
#include <string>
#include <vector>

#include "pet/nn/tensor.hpp"

namespace pet::nn {

using Rng = std::mt19937_64;

/// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)); fan_in is extent(0).
void init_uniform(Tensor& w, Rng& rng);

struct Linear {
    Parameter weight;  // [in, out]
    Parameter bias;    // [out]

    Linear() = default;
    Linear(const std::string& name, std::size_t in, std::size_t out);
    void init(Rng& rng);
    Var operator()(Tape& tape, Var x);
    void collect(std::vector<Parameter*>& out);
};

struct LayerNorm {
    Parameter gain;
    Parameter bias;

    LayerNorm() = default;
    LayerNorm(const std::string& name, std::size_t width);
    Var operator()(Tape& tape, Var x);
    void collect(std::vector<Parameter*>& out);
};

struct MultiHeadAttention {
    Linear q, k, v, o;
    std::size_t heads = 1;

    MultiHeadAttention() = default;
    MultiHeadAttention(const std::string& name, std::size_t width, std::size_t heads);
    void init(Rng& rng);
    /// query [Sq, D] attends over memory [Sk, D]. With `causal`, Sq == Sk and
    /// row i only sees memory rows <= i.
    Var operator()(Tape& tape, Var query, Var memory, bool causal);
    void collect(std::vector<Parameter*>& out);
};

/// D -> 4D -> ReLU -> D.
struct Mlp {
    Linear up, down;

    Mlp() = default;
    Mlp(const std::string& name, std::size_t width);
    void init(Rng& rng);
    Var operator()(Tape& tape, Var x);
    void collect(std::vector<Parameter*>& out);
};

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double weight_decay = 0.1;
    double eps = 1e-8;
};

/// Adam with decoupled weight decay: p -= lr*wd*p, then the bias-corrected
/// moment update.
class Adam {
public:
    Adam(std::vector<Parameter*> params, AdamConfig cfg);

    void step();
    void zero_grad();
    [[nodiscard]] std::size_t steps() const noexcept { return t_; }
    [[nodiscard]] AdamConfig& config() noexcept { return cfg_; }

private:
    std::vector<Parameter*> params_;
    std::vector<Tensor> m_;
    std::vector<Tensor> v_;
    AdamConfig cfg_;
    std::size_t t_ = 0;
};

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::size_t checked = 0;
    std::string worst;  // "name[index]" of the worst entry
    [[nodiscard]] bool passed(double tol) const noexcept { return max_rel_error <= tol; }
};

/// Compares tape gradients of the scalar built by `loss` against central
/// differences with step h for every entry of every parameter. Relative
/// error is |a - n| / max(|a|, |n|, floor). `max_entries` caps the entries
/// checked per parameter (evenly strided) to bound cost on larger models.
GradCheckReport gradient_check(const std::vector<Parameter*>& params,
                               const std::function<Var(Tape&)>& loss, double h = 1e-5,
                               std::size_t max_entries = 0, double floor = 1e-6);

}  // namespace pet::nn

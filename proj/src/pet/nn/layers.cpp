#include "pet/nn/layers.hpp"

#include <algorithm>
#include <cmath>

#include "pet/error.hpp"

namespace pet::nn {

void init_uniform(Tensor& w, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(w.extent(0)));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (auto& x : w.storage()) x = u(rng);
}

Linear::Linear(const std::string& name, std::size_t in, std::size_t out)
    : weight(name + ".weight", Tensor({in, out})), bias(name + ".bias", Tensor({out})) {}

void Linear::init(Rng& rng) {
    init_uniform(weight.value, rng);
    bias.value.fill(0.0);
}

Var Linear::operator()(Tape& tape, Var x) {
    return add_bias(matmul(x, tape.parameter(weight)), tape.parameter(bias));
}

void Linear::collect(std::vector<Parameter*>& out) {
    out.push_back(&weight);
    out.push_back(&bias);
}

LayerNorm::LayerNorm(const std::string& name, std::size_t width)
    : gain(name + ".gain", Tensor({width}, 1.0)), bias(name + ".bias", Tensor({width})) {}

Var LayerNorm::operator()(Tape& tape, Var x) {
    return layer_norm(x, tape.parameter(gain), tape.parameter(bias));
}

void LayerNorm::collect(std::vector<Parameter*>& out) {
    out.push_back(&gain);
    out.push_back(&bias);
}

MultiHeadAttention::MultiHeadAttention(const std::string& name, std::size_t width, std::size_t h)
    : q(name + ".q", width, width),
      k(name + ".k", width, width),
      v(name + ".v", width, width),
      o(name + ".o", width, width),
      heads(h) {
    if (h == 0 || width % h != 0) {
        throw ConfigError("width " + std::to_string(width) + " is not divisible by " +
                          std::to_string(h) + " heads");
    }
}

void MultiHeadAttention::init(Rng& rng) {
    q.init(rng);
    k.init(rng);
    v.init(rng);
    o.init(rng);
}

Var MultiHeadAttention::operator()(Tape& tape, Var query, Var memory, bool causal) {
    const std::size_t width = query.value().cols();
    const std::size_t sq = query.value().rows();
    const std::size_t sk = memory.value().rows();
    if (causal && sq != sk) throw ShapeError("causal attention needs equal query and memory lengths");
    const std::size_t dh = width / heads;
    const double s = 1.0 / std::sqrt(static_cast<double>(dh));
    Var qa = q(tape, query);
    Var ka = k(tape, memory);
    Var va = v(tape, memory);
    const Mask mask = causal ? Mask::causal(sq) : Mask{};
    std::vector<Var> outs;
    outs.reserve(heads);
    for (std::size_t h = 0; h < heads; ++h) {
        Var qh = slice_cols(qa, h * dh, dh);
        Var kh = slice_cols(ka, h * dh, dh);
        Var vh = slice_cols(va, h * dh, dh);
        Var w = softmax(scale(matmul(qh, transpose(kh)), s), mask);
        outs.push_back(matmul(w, vh));
    }
    return o(tape, heads == 1 ? outs.front() : concat_cols(outs));
}

void MultiHeadAttention::collect(std::vector<Parameter*>& out) {
    q.collect(out);
    k.collect(out);
    v.collect(out);
    o.collect(out);
}

Mlp::Mlp(const std::string& name, std::size_t width)
    : up(name + ".up", width, 4 * width), down(name + ".down", 4 * width, width) {}

void Mlp::init(Rng& rng) {
    up.init(rng);
    down.init(rng);
}

Var Mlp::operator()(Tape& tape, Var x) { return down(tape, relu(up(tape, x))); }

void Mlp::collect(std::vector<Parameter*>& out) {
    up.collect(out);
    down.collect(out);
}

// ---- Adam --------------------------------------------------------------------

Adam::Adam(std::vector<Parameter*> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
    if (!(cfg_.lr > 0.0)) throw ConfigError("learning rate must be positive");
    for (Parameter* p : params_) {
        m_.emplace_back(p->value.shape(), 0.0);
        v_.emplace_back(p->value.shape(), 0.0);
    }
}

void Adam::zero_grad() {
    for (Parameter* p : params_) {
        if (p->grad.size() != p->value.size()) p->grad = Tensor(p->value.shape(), 0.0);
        p->zero_grad();
    }
}

void Adam::step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        Parameter& p = *params_[i];
        if (p.grad.size() != p.value.size()) p.grad = Tensor(p.value.shape(), 0.0);
        auto& m = m_[i].storage();
        auto& v = v_[i].storage();
        auto& w = p.value.storage();
        const auto& g = p.grad.storage();
        for (std::size_t j = 0; j < w.size(); ++j) {
            w[j] -= cfg_.lr * cfg_.weight_decay * w[j];
            m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g[j];
            v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g[j] * g[j];
            w[j] -= cfg_.lr * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + cfg_.eps);
        }
    }
}

// ---- finite differences --------------------------------------------------------

GradCheckReport gradient_check(const std::vector<Parameter*>& params,
                               const std::function<Var(Tape&)>& loss, double h,
                               std::size_t max_entries, double floor) {
    for (Parameter* p : params) p->grad = Tensor(p->value.shape(), 0.0);
    {
        Tape tape;
        tape.backward(loss(tape));
    }
    auto eval = [&] {
        Tape tape(false);
        return loss(tape).value()[0];
    };
    GradCheckReport report;
    for (Parameter* p : params) {
        const std::size_t n = p->value.size();
        const std::size_t stride = max_entries == 0 || n <= max_entries ? 1 : n / max_entries;
        for (std::size_t i = 0; i < n; i += stride) {
            const double orig = p->value[i];
            p->value[i] = orig + h;
            const double up = eval();
            p->value[i] = orig - h;
            const double down = eval();
            p->value[i] = orig;
            const double numeric = (up - down) / (2.0 * h);
            const double analytic = p->grad[i];
            const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
            const double err = std::abs(analytic - numeric) / denom;
            ++report.checked;
            if (report.worst.empty() || err > report.max_rel_error) {
                report.max_rel_error = err;
                report.worst = p->name + "[" + std::to_string(i) + "]";
            }
        }
    }
    return report;
}

}  // namespace pet::nn

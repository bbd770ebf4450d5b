#include "pet/model.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "pet/error.hpp"
#include "pet/moea.hpp"

namespace pet::model {
namespace {

using nlohmann::json;

constexpr char kMagic[4] = {'P', 'E', 'T', 'M'};
constexpr std::uint32_t kVersion = 1;

const char* head_name(Head h) { return h == Head::Logistic ? "logistic" : "softmax"; }

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

void put_f64(std::string& out, double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFFu));
}

class Reader {
public:
    explicit Reader(const std::string& bytes) : bytes_(bytes) {}

    void need(std::size_t n, const char* what) const {
        if (bytes_.size() - pos_ < n) {
            throw DataError(std::string("checkpoint truncated while reading ") + what);
        }
    }
    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
        pos_ += 4;
        return v;
    }
    double f64(const char* what) {
        need(8, what);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
        pos_ += 8;
        return std::bit_cast<double>(v);
    }
    std::string raw(std::size_t n, const char* what) {
        need(n, what);
        std::string s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    [[nodiscard]] bool done() const noexcept { return pos_ == bytes_.size(); }
    [[nodiscard]] std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

private:
    const std::string& bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

// ---- configuration -------------------------------------------------------------

void PetConfig::validate() const {
    if (layers < 1) throw ConfigError("layers must be at least 1");
    if (heads < 1 || width % heads != 0)
        throw ConfigError("width " + std::to_string(width) + " is not divisible by heads " +
                          std::to_string(heads));
    if (d_hat < 1 || m_hat < 2) throw ConfigError("d_hat must be >= 1 and m_hat >= 2");
    if (max_seq < 2) throw ConfigError("max_seq must be at least 2");
}

std::string PetConfig::to_json() const {
    json j = {{"d_hat", d_hat},   {"m_hat", m_hat},     {"width", width},
              {"layers", layers}, {"heads", heads},     {"max_seq", max_seq},
              {"head", head_name(head)}};
    return j.dump();
}

PetConfig PetConfig::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("model config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("model config must be a JSON object");
    static const std::vector<std::string> known = {"d_hat",   "m_hat", "width", "layers",
                                                   "heads",   "max_seq", "head"};
    for (const auto& [key, _] : j.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw ConfigError("unknown model config key '" + key + "'");
    }
    PetConfig c;
    try {
        c.d_hat = j.value("d_hat", c.d_hat);
        c.m_hat = j.value("m_hat", c.m_hat);
        c.width = j.value("width", c.width);
        c.layers = j.value("layers", c.layers);
        c.heads = j.value("heads", c.heads);
        c.max_seq = j.value("max_seq", c.max_seq);
        const std::string h = j.value("head", std::string("logistic"));
        if (h == "logistic") c.head = Head::Logistic;
        else if (h == "softmax") c.head = Head::Softmax;
        else throw ConfigError("head must be 'logistic' or 'softmax', got '" + h + "'");
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad model config field: ") + e.what());
    }
    c.validate();
    return c;
}

ObjectiveScale ObjectiveScale::of(const mop::Population& pop) {
    if (pop.empty()) throw ContractViolation("objective scale of an empty population");
    const std::size_t m = pop[0].objectives().size();
    ObjectiveScale s{std::vector<double>(m, std::numeric_limits<double>::infinity()),
                     std::vector<double>(m, -std::numeric_limits<double>::infinity())};
    for (const auto& sol : pop.members) {
        const auto& f = sol.objectives();
        if (f.size() != m) throw DataError("population mixes objective counts");
        for (std::size_t k = 0; k < m; ++k) {
            s.lo[k] = std::min(s.lo[k], f[k]);
            s.hi[k] = std::max(s.hi[k], f[k]);
        }
    }
    return s;
}

double ObjectiveScale::apply(std::size_t k, double f) const noexcept {
    const double range = hi[k] - lo[k];
    return range > 0.0 ? (f - lo[k]) / range : 0.5;
}

// ---- model ---------------------------------------------------------------------

PetModel::PetModel(PetConfig cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    build();
    nn::Rng rng(seed);
    nn::init_uniform(e_dim_.value, rng);
    nn::init_uniform(e_obj_.value, rng);
    for (auto& b : encoder_) {
        b.attn.init(rng);
        b.mlp.init(rng);
    }
    for (auto& b : decoder_) {
        b.self_attn.init(rng);
        b.cross_attn.init(rng);
        b.mlp.init(rng);
    }
    head_.init(rng);
}

void PetModel::build() {
    const std::size_t w = cfg_.width;
    e_dim_ = nn::Parameter("e_dim", nn::Tensor({cfg_.d_hat, w}));
    e_obj_ = nn::Parameter("e_obj", nn::Tensor({cfg_.m_hat, w}));
    encoder_.clear();
    decoder_.clear();
    for (std::size_t l = 0; l < cfg_.layers; ++l) {
        const std::string p = "enc" + std::to_string(l);
        encoder_.push_back({nn::LayerNorm(p + ".ln1", w), nn::LayerNorm(p + ".ln2", w),
                            nn::MultiHeadAttention(p + ".attn", w, cfg_.heads),
                            nn::Mlp(p + ".mlp", w)});
    }
    for (std::size_t l = 0; l < cfg_.layers; ++l) {
        const std::string p = "dec" + std::to_string(l);
        decoder_.push_back({nn::LayerNorm(p + ".ln1", w), nn::LayerNorm(p + ".ln2", w),
                            nn::MultiHeadAttention(p + ".self", w, cfg_.heads),
                            nn::MultiHeadAttention(p + ".cross", w, cfg_.heads),
                            nn::Mlp(p + ".mlp", w)});
    }
    head_ = nn::Linear("head", w, cfg_.d_hat);
}

std::vector<nn::Parameter*> PetModel::parameters() {
    std::vector<nn::Parameter*> out{&e_dim_, &e_obj_};
    for (auto& b : encoder_) {
        b.ln1.collect(out);
        b.attn.collect(out);
        b.ln2.collect(out);
        b.mlp.collect(out);
    }
    for (auto& b : decoder_) {
        b.ln1.collect(out);
        b.self_attn.collect(out);
        b.cross_attn.collect(out);
        b.ln2.collect(out);
        b.mlp.collect(out);
    }
    head_.collect(out);
    return out;
}

std::vector<const nn::Parameter*> PetModel::parameters() const {
    auto mut = const_cast<PetModel*>(this)->parameters();
    return {mut.begin(), mut.end()};
}

std::size_t PetModel::parameter_count() const {
    std::size_t n = 0;
    for (const auto* p : parameters()) n += p->value.size();
    return n;
}

std::size_t PetModel::parameter_count(const PetConfig& c) {
    const std::size_t w = c.width;
    const std::size_t ln = 2 * w;
    const std::size_t attn = 4 * (w * w + w);
    const std::size_t mlp = (w * 4 * w + 4 * w) + (4 * w * w + w);
    return (c.d_hat + c.m_hat) * w + c.layers * (2 * ln + attn + mlp) +
           c.layers * (2 * ln + 2 * attn + mlp) + (w * c.d_hat + c.d_hat);
}

void PetModel::check_capacity(const mop::Population& pop, const mop::ProblemSpec& spec) const {
    if (spec.d() > cfg_.d_hat)
        throw CapacityError("decision dimension " + std::to_string(spec.d()) + " exceeds d_hat " +
                            std::to_string(cfg_.d_hat));
    if (spec.m() > cfg_.m_hat)
        throw CapacityError("objective count " + std::to_string(spec.m()) + " exceeds m_hat " +
                            std::to_string(cfg_.m_hat));
    if (pop.size() > cfg_.max_seq)
        throw CapacityError("sequence length " + std::to_string(pop.size()) + " exceeds max_seq " +
                            std::to_string(cfg_.max_seq));
    if (pop.empty()) throw ContractViolation("cannot embed an empty population");
}

nn::Tensor PetModel::decision_tokens(const mop::Population& pop, const mop::ProblemSpec& spec) const {
    check_capacity(pop, spec);
    nn::Tensor t({pop.size(), cfg_.d_hat}, 0.0);
    for (std::size_t i = 0; i < pop.size(); ++i) {
        const auto u = mop::normalize_decision(pop[i].x, spec);
        std::copy(u.begin(), u.end(), t.data().begin() + static_cast<long>(i * cfg_.d_hat));
    }
    return t;
}

nn::Tensor PetModel::objective_tokens(const mop::Population& pop, const ObjectiveScale& scale) const {
    nn::Tensor t({pop.size(), cfg_.m_hat}, 0.0);
    for (std::size_t i = 0; i < pop.size(); ++i) {
        const auto& f = pop[i].objectives();
        if (f.size() > cfg_.m_hat)
            throw CapacityError("objective count " + std::to_string(f.size()) + " exceeds m_hat " +
                                std::to_string(cfg_.m_hat));
        if (f.size() != scale.lo.size()) throw DataError("objective count differs from its scale");
        for (std::size_t k = 0; k < f.size(); ++k) t.at(i, k) = scale.apply(k, f[k]);
    }
    return t;
}

nn::Var PetModel::embed_dimension(nn::Tape& tape, const mop::Population& pop,
                                  const mop::ProblemSpec& spec) {
    return nn::matmul(tape.constant(decision_tokens(pop, spec)), tape.parameter(e_dim_));
}

nn::Var PetModel::encode_objective(nn::Tape& tape, const mop::Population& pop,
                                   const ObjectiveScale& scale) {
    return nn::matmul(tape.constant(objective_tokens(pop, scale)), tape.parameter(e_obj_));
}

nn::Var PetModel::embed(nn::Tape& tape, const mop::Population& pop, const mop::ProblemSpec& spec,
                        const ObjectiveScale& scale) {
    return nn::add(embed_dimension(tape, pop, spec), encode_objective(tape, pop, scale));
}

nn::Var PetModel::encode(nn::Tape& tape, nn::Var z) {
    for (auto& b : encoder_) {
        nn::Var normed = b.ln1(tape, z);
        nn::Var zp = nn::add(b.attn(tape, normed, normed, false), z);
        z = nn::add(b.mlp(tape, b.ln2(tape, zp)), zp);
    }
    return z;
}

nn::Var PetModel::decode(nn::Tape& tape, nn::Var z, nn::Var memory, std::size_t d) {
    if (d == 0 || d > cfg_.d_hat) throw CapacityError("decision dimension outside 1..d_hat");
    for (auto& b : decoder_) {
        nn::Var normed = b.ln1(tape, z);
        nn::Var zp = nn::add(b.self_attn(tape, normed, normed, true), z);
        nn::Var c = b.cross_attn(tape, zp, memory, false);
        z = nn::add(b.mlp(tape, b.ln2(tape, nn::add(c, zp))), c);
    }
    nn::Var logits = head_(tape, z);
    if (cfg_.head == Head::Logistic) return nn::sigmoid(logits);
    return nn::softmax(logits, nn::Mask::leading_columns(cfg_.d_hat, d));
}

nn::Tensor PetModel::memory(const mop::Population& parents, const mop::ProblemSpec& spec) {
    nn::Tape tape(false);
    return encode(tape, embed(tape, parents, spec, ObjectiveScale::of(parents))).value();
}

mop::DecisionVector PetModel::decode_step(const mop::Population& context, const nn::Tensor& memory,
                                          const ObjectiveScale& scale,
                                          const mop::ProblemSpec& spec) {
    if (context.empty()) throw ContractViolation("decoding needs at least the initialization token");
    nn::Tape tape(false);
    nn::Var out = decode(tape, embed(tape, context, spec, scale), tape.constant(memory), spec.d());
    const nn::Tensor& y = out.value();
    const std::size_t last = y.rows() - 1;
    std::vector<double> u(spec.d());
    for (std::size_t j = 0; j < spec.d(); ++j) u[j] = y.at(last, j);
    return mop::denormalize_decision(u, spec);
}

nn::Var PetModel::teacher_forced_predictions(nn::Tape& tape, const mop::Population& parents,
                                             const mop::Population& ordered_targets,
                                             const mop::ProblemSpec& spec) {
    if (ordered_targets.size() < 2) throw DataError("teacher forcing needs at least 2 targets");
    const auto scale = ObjectiveScale::of(parents);
    nn::Var memory = encode(tape, embed(tape, parents, spec, scale));
    mop::Population inputs(std::vector<mop::Solution>(ordered_targets.members.begin(),
                                                      ordered_targets.members.end() - 1));
    return decode(tape, embed(tape, inputs, spec, scale), memory, spec.d());
}

mop::Population canonical_order(const mop::Population& pop) {
    mop::Population out;
    out.generation = pop.generation;
    out.members.reserve(pop.size());
    for (std::size_t i : moea::selection_order(pop)) out.members.push_back(pop[i]);
    return out;
}

double teacher_forced_loss(PetModel& model, const mop::Population& parents,
                           const mop::Population& successors, const mop::ProblemSpec& spec,
                           bool backward) {
    if (!parents.all_evaluated() || !successors.all_evaluated())
        throw DataError("teacher forcing needs evaluated populations");
    for (const auto* pop : {&parents, &successors}) {
        for (const auto& s : pop->members) {
            if (s.x.size() != spec.d() || s.objectives().size() != spec.m())
                throw DataError("pair member does not match (d, m) = (" + std::to_string(spec.d()) +
                                ", " + std::to_string(spec.m()) + ")");
        }
    }
    const auto ordered = canonical_order(successors);
    nn::Tape tape(backward);
    nn::Var pred = model.teacher_forced_predictions(tape, parents, ordered, spec);
    const nn::Tensor all = model.decision_tokens(ordered, spec);
    const std::size_t w = all.cols();
    nn::Tensor target({ordered.size() - 1, w},
                      std::vector<double>(all.data().begin() + static_cast<long>(w),
                                          all.data().end()));
    nn::Var loss = nn::masked_mse(pred, target, spec.d());
    const double value = loss.value()[0];
    if (backward) tape.backward(loss);
    return value;
}

GenerationOutcome generate_population(PetModel& model, const mop::Population& parents,
                                      const mop::Problem& problem, mop::EvaluationBudget& budget,
                                      std::mt19937_64& rng) {
    const auto& spec = problem.spec();
    const std::size_t n = parents.size();
    if (n == 0 || !parents.all_evaluated()) throw ContractViolation("parents must be evaluated");
    GenerationOutcome out;
    if (budget.exhausted()) {
        out.exhausted = true;
        return out;
    }
    const nn::Tensor memory = model.memory(parents, spec);
    const auto scale = ObjectiveScale::of(parents);

    auto evaluate_one = [&](mop::DecisionVector x) {
        mop::Population one({mop::Solution(std::move(x))});
        auto res = mop::evaluate(one, problem, budget);
        if (res.performed == 0) return false;
        out.offspring.members.push_back(std::move(res.population.members.front()));
        return true;
    };

    if (!evaluate_one(moea::random_decision(spec, rng))) {
        out.exhausted = true;
        return out;
    }
    while (out.offspring.size() < n) {
        if (!evaluate_one(model.decode_step(out.offspring, memory, scale, spec))) break;
    }
    out.exhausted = out.offspring.size() < n;
    return out;
}

// ---- checkpoints ---------------------------------------------------------------

std::string PetModel::serialize() const {
    std::string out(kMagic, 4);
    put_u32(out, kVersion);
    const std::string cfg = cfg_.to_json();
    put_u32(out, static_cast<std::uint32_t>(cfg.size()));
    out += cfg;
    for (const auto* p : parameters()) {
        const auto& shape = p->value.shape();
        put_u32(out, static_cast<std::uint32_t>(shape.size()));
        for (auto e : shape) put_u32(out, static_cast<std::uint32_t>(e));
        for (double v : p->value.data()) put_f64(out, v);
    }
    return out;
}

void PetModel::save(const std::filesystem::path& path) const {
    const std::string bytes = serialize();
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw IoError("failed writing checkpoint '" + path.string() + "'");
}

PetModel PetModel::deserialize(const std::string& bytes) {
    Reader r(bytes);
    if (r.raw(4, "magic") != std::string(kMagic, 4)) throw DataError("not a checkpoint (bad magic)");
    const auto version = r.u32("version");
    if (version != kVersion)
        throw DataError("unsupported checkpoint version " + std::to_string(version));
    const auto len = r.u32("config length");
    PetConfig config;
    try {
        config = PetConfig::from_json(r.raw(len, "config"));
    } catch (const ConfigError& e) {
        throw DataError(std::string("checkpoint config: ") + e.what());
    }
    PetModel model(config);
    for (auto* p : model.parameters()) {
        const auto ndim = r.u32("tensor rank");
        nn::Shape shape;
        for (std::uint32_t i = 0; i < ndim; ++i) shape.push_back(r.u32("tensor extent"));
        if (shape != p->value.shape())
            throw DataError("parameter " + p->name + " has shape " + nn::shape_string(shape) +
                            ", config expects " + nn::shape_string(p->value.shape()));
        r.need(p->value.size() * 8, "tensor data");
        for (auto& v : p->value.storage()) v = r.f64("tensor data");
        p->grad = nn::Tensor(shape, 0.0);
    }
    if (!r.done())
        throw DataError("checkpoint has " + std::to_string(r.remaining()) + " trailing bytes");
    return model;
}

PetModel PetModel::load(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open checkpoint '" + path.string() + "'");
    std::ostringstream ss;
    ss << is.rdbuf();
    return deserialize(ss.str());
}

PetModel PetModel::load(const std::filesystem::path& path, const PetConfig& expected) {
    PetModel m = load(path);
    if (!(m.config() == expected))
        throw ConfigError("checkpoint config " + m.config().to_json() +
                          " differs from the requested " + expected.to_json());
    return m;
}

}  // namespace pet::model

#include "pet/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>
#include <tuple>

#include "pet/error.hpp"
#include "pet/metrics.hpp"
#include "pet/problems.hpp"

namespace pet::pipeline {
namespace {

using ojson = nlohmann::ordered_json;

constexpr int kDatasetFormat = 1;

std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

ojson matrix_json(const mop::Population& pop, bool objectives) {
    ojson rows = ojson::array();
    for (const auto& s : pop.members) rows.push_back(objectives ? s.objectives() : s.x);
    return rows;
}

mop::Population population_from(const ojson& xs, const ojson& fs) {
    if (!xs.is_array() || !fs.is_array() || xs.size() != fs.size())
        throw DataError("decision and objective lists differ in length");
    mop::Population pop;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        pop.members.emplace_back(xs[i].get<std::vector<double>>(), fs[i].get<std::vector<double>>());
    }
    return pop;
}

struct Sample {
    const mop::Population* parents;
    const mop::Population* successors;
    mop::ProblemSpec spec;
};

void check_capacity(const model::PetConfig& cfg, const Sample& s, const std::string& label) {
    const std::size_t n = std::max(s.parents->size(), s.successors->size());
    if (s.spec.d() > cfg.d_hat || s.spec.m() > cfg.m_hat || n > cfg.max_seq) {
        throw CapacityError("pair " + label + " has (d, m, N) = (" + std::to_string(s.spec.d()) +
                            ", " + std::to_string(s.spec.m()) + ", " + std::to_string(n) +
                            ") beyond the model capacity (" + std::to_string(cfg.d_hat) + ", " +
                            std::to_string(cfg.m_hat) + ", " + std::to_string(cfg.max_seq) + ")");
    }
}

std::vector<LossPoint> train(const std::vector<Sample>& samples, model::PetModel& model,
                             const PretrainConfig& cfg, const ProgressFn& progress) {
    cfg.validate();
    if (samples.empty()) throw ContractViolation("pretraining needs at least one pair");

    // Group by (d, m, N) so a batch never mixes shapes.
    std::map<std::tuple<std::size_t, std::size_t, std::size_t>, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        groups[{s.spec.d(), s.spec.m(), s.parents->size()}].push_back(i);
    }
    std::vector<std::vector<std::size_t>> group_list;
    for (auto& [_, idx] : groups) group_list.push_back(idx);

    moea::Rng rng(cfg.seed);
    std::vector<std::vector<std::size_t>> batches;
    std::size_t next_batch = 0;
    auto refill = [&] {
        batches.clear();
        next_batch = 0;
        std::vector<std::size_t> order(group_list.size());
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t g : order) {
            auto idx = group_list[g];
            std::shuffle(idx.begin(), idx.end(), rng);
            for (std::size_t k = 0; k < idx.size(); k += cfg.batch_size) {
                batches.emplace_back(idx.begin() + static_cast<long>(k),
                                     idx.begin() + static_cast<long>(std::min(idx.size(), k + cfg.batch_size)));
            }
        }
    };

    nn::Adam adam(model.parameters(), cfg.adam);
    std::vector<LossPoint> curve;
    for (std::size_t step = 1; step <= cfg.steps; ++step) {
        if (next_batch == batches.size()) refill();
        const auto& batch = batches[next_batch++];
        adam.zero_grad();
        double total = 0.0;
        for (std::size_t i : batch) {
            const auto& s = samples[i];
            total += model::teacher_forced_loss(model, *s.parents, *s.successors, s.spec, true);
        }
        const double inv = 1.0 / static_cast<double>(batch.size());
        for (auto* p : model.parameters())
            for (auto& g : p->grad.storage()) g *= inv;
        const double loss = total * inv;
        if (!std::isfinite(loss)) {
            throw NumericError("non-finite training loss at step " + std::to_string(step));
        }
        adam.step();
        if (step % cfg.eval_every == 0 || step == cfg.steps) {
            curve.push_back({step, loss});
            if (progress) progress(curve.back());
        }
    }
    return curve;
}

// Shared generational loop: select(parents + children) after every batch of
// offspring, with an optional hook that sees (parents, children).
template <class Generate, class After>
moea::RunResult generational(const mop::Problem& problem, const PetRunOptions& opts,
                             moea::Rng& rng, Generate&& generate, After&& after) {
    const auto& spec = problem.spec();
    const std::size_t n = opts.population_size;
    if (n < 2) throw ConfigError("population size must be at least 2");
    mop::EvaluationBudget budget(opts.evaluations);
    moea::RunResult result;
    auto init = mop::evaluate(moea::random_population(spec, n, rng), problem, budget);
    mop::Population parents = mop::evaluated_prefix(init.population);

    auto log = [&](std::size_t g, std::size_t offspring, std::optional<double> loss) {
        moea::GenerationLog entry;
        entry.generation = g;
        entry.evaluations = budget.used();
        entry.offspring = offspring;
        entry.loss = loss;
        if (opts.reference_front && !parents.empty()) {
            try {
                entry.igd = metrics::igd(*opts.reference_front, parents).value;
            } catch (const EmptySet&) {
            }
        }
        result.log.push_back(entry);
    };
    log(0, parents.size(), std::nullopt);
    if (init.exhausted || parents.size() < n) {
        result.final_population = parents;
        result.evaluations = budget.used();
        return result;
    }

    std::size_t g = 0;
    while (!budget.exhausted()) {
        auto [children, exhausted] = generate(parents, budget);
        ++g;
        mop::Population next = moea::nsga2_select(parents.merged(children), n);
        next.generation = g;
        std::optional<double> loss = after(parents, children);
        parents = std::move(next);
        log(g, children.size(), loss);
        if (exhausted) break;
    }
    result.final_population = parents;
    result.evaluations = budget.used();
    return result;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, const std::string& arm, const std::string& problem,
                          std::size_t d, std::size_t m, std::size_t index) {
    const std::string key = arm + '\x1f' + problem + '\x1f' + std::to_string(d) + '\x1f' +
                            std::to_string(m) + '\x1f' + std::to_string(index);
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    for (unsigned char c : key) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return splitmix64(h ^ splitmix64(master));
}

// ---- pairs and datasets ------------------------------------------------------

void TrajectoryPair::validate() const {
    if (x_g.size() != x_g1.size() || x_g.empty())
        throw DataError("pair " + problem + "/" + std::to_string(generation) +
                        " has populations of different or zero size");
    for (const auto* pop : {&x_g, &x_g1}) {
        for (const auto& s : pop->members) {
            if (!s.evaluated()) throw DataError("pair " + problem + " holds an unevaluated member");
            if (s.x.size() != d || s.f->size() != m)
                throw DataError("pair " + problem + " member does not match (d, m)");
        }
    }
}

TrajectoryPair TrajectoryPair::normalized(const mop::ProblemSpec& spec,
                                          const moea::GenerationPair& raw,
                                          const std::string& teacher, std::uint64_t seed) {
    TrajectoryPair p;
    p.problem = spec.name();
    p.d = spec.d();
    p.m = spec.m();
    p.teacher = teacher;
    p.seed = seed;
    p.generation = raw.generation;
    const auto scale = model::ObjectiveScale::of(raw.parents.merged(raw.successors));
    auto convert = [&](const mop::Population& pop) {
        mop::Population out;
        out.generation = pop.generation;
        for (const auto& s : pop.members) {
            std::vector<double> f(spec.m());
            for (std::size_t k = 0; k < spec.m(); ++k) f[k] = scale.apply(k, s.objectives()[k]);
            out.members.emplace_back(mop::normalize_decision(s.x, spec), std::move(f),
                                     s.cv.value_or(0.0));
        }
        return out;
    };
    p.x_g = convert(raw.parents);
    p.x_g1 = convert(raw.successors);
    return p;
}

void TrajectoryDataset::validate() const {
    std::size_t total = 0;
    for (const auto& c : cells) total += c.pairs;
    if (total != pairs.size())
        throw DataError("manifest lists " + std::to_string(total) + " pairs, file holds " +
                        std::to_string(pairs.size()));
    for (const auto& p : pairs) p.validate();
}

std::string TrajectoryDataset::to_jsonl() const {
    ojson manifest = ojson::object();
    manifest["format"] = kDatasetFormat;
    manifest["pair_count"] = pairs.size();
    ojson cs = ojson::array();
    for (const auto& c : cells) {
        cs.push_back(ojson{{"problem", c.problem}, {"d", c.d},         {"m", c.m},
                           {"teacher", c.teacher}, {"seed", c.seed},   {"pairs", c.pairs},
                           {"lower", c.lower},     {"upper", c.upper}});
    }
    manifest["cells"] = cs;
    manifest["skipped"] = skipped;
    std::string out = ojson{{"manifest", manifest}}.dump();
    out.push_back('\n');
    for (const auto& p : pairs) {
        ojson j;
        j["problem"] = p.problem;
        j["d"] = p.d;
        j["m"] = p.m;
        j["teacher"] = p.teacher;
        j["seed"] = p.seed;
        j["generation"] = p.generation;
        j["x_g"] = matrix_json(p.x_g, false);
        j["f_g"] = matrix_json(p.x_g, true);
        j["x_g1"] = matrix_json(p.x_g1, false);
        j["f_g1"] = matrix_json(p.x_g1, true);
        out += j.dump();
        out.push_back('\n');
    }
    return out;
}

TrajectoryDataset TrajectoryDataset::from_jsonl(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    TrajectoryDataset ds;
    bool have_manifest = false;
    std::size_t declared = 0;
    try {
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty()) continue;
            const ojson j = ojson::parse(line);
            if (!have_manifest) {
                if (!j.contains("manifest")) throw DataError("first record must be the manifest");
                const auto& mf = j.at("manifest");
                if (mf.at("format").get<int>() != kDatasetFormat)
                    throw DataError("unsupported dataset format");
                declared = mf.at("pair_count").get<std::size_t>();
                for (const auto& c : mf.at("cells")) {
                    ds.cells.push_back({c.at("problem").get<std::string>(), c.at("d").get<std::size_t>(),
                                        c.at("m").get<std::size_t>(), c.at("teacher").get<std::string>(),
                                        c.at("seed").get<std::uint64_t>(), c.at("pairs").get<std::size_t>(),
                                        c.at("lower").get<std::vector<double>>(),
                                        c.at("upper").get<std::vector<double>>()});
                }
                ds.skipped = mf.at("skipped").get<std::vector<std::string>>();
                have_manifest = true;
                continue;
            }
            TrajectoryPair p;
            p.problem = j.at("problem").get<std::string>();
            p.d = j.at("d").get<std::size_t>();
            p.m = j.at("m").get<std::size_t>();
            p.teacher = j.at("teacher").get<std::string>();
            p.seed = j.at("seed").get<std::uint64_t>();
            p.generation = j.at("generation").get<std::size_t>();
            p.x_g = population_from(j.at("x_g"), j.at("f_g"));
            p.x_g1 = population_from(j.at("x_g1"), j.at("f_g1"));
            p.x_g.generation = p.generation;
            p.x_g1.generation = p.generation + 1;
            ds.pairs.push_back(std::move(p));
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError("dataset line " + std::to_string(lineno) + ": " + e.what());
    }
    if (!have_manifest) throw DataError("dataset has no manifest line");
    if (declared != ds.pairs.size())
        throw DataError("manifest declares " + std::to_string(declared) + " pairs, found " +
                        std::to_string(ds.pairs.size()));
    ds.validate();
    return ds;
}

void TrajectoryDataset::save(const std::filesystem::path& path) const {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
    const std::string text = to_jsonl();
    os.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!os) throw IoError("failed writing dataset '" + path.string() + "'");
}

TrajectoryDataset TrajectoryDataset::load(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open dataset '" + path.string() + "'");
    std::ostringstream ss;
    ss << is.rdbuf();
    return from_jsonl(ss.str());
}

// ---- collection ------------------------------------------------------------------

namespace {

class PairSink final : public moea::TrajectorySink {
public:
    PairSink(const mop::ProblemSpec& spec, std::string teacher, std::uint64_t seed)
        : spec_(spec), teacher_(std::move(teacher)), seed_(seed) {}
    void append(const moea::GenerationPair& pair) override {
        pairs.push_back(TrajectoryPair::normalized(spec_, pair, teacher_, seed_));
    }
    std::vector<TrajectoryPair> pairs;

private:
    const mop::ProblemSpec& spec_;
    std::string teacher_;
    std::uint64_t seed_;
};

}  // namespace

TrajectoryDataset collect_trajectories(const CollectConfig& cfg) {
    if (cfg.evaluations < 2 * cfg.population)
        throw ConfigError("collection needs evaluations >= 2 * population");
    if (cfg.problems.empty() || cfg.teachers.empty() || cfg.seeds == 0)
        throw ConfigError("collection needs at least one problem, teacher and seed");

    struct Cell {
        ProblemRef problem;
        moea::Teacher teacher;
        std::size_t index;
        std::uint64_t seed;
        std::optional<CellManifest> manifest;
        std::vector<TrajectoryPair> pairs;
        std::string error;
    };
    std::vector<Cell> cells;
    for (const auto& p : cfg.problems) {
        (void)problems::make_problem(p.name, p.d, p.m);  // reject unknown names up front
        for (auto t : cfg.teachers)
            for (std::size_t s = 0; s < cfg.seeds; ++s)
                cells.push_back({p, t, s,
                                 derive_seed(cfg.master_seed, moea::to_string(t), p.name, p.d, p.m, s),
                                 std::nullopt, {}, {}});
    }

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < cells.size(); i = next++) {
            Cell& c = cells[i];
            try {
                auto problem = problems::make_problem(c.problem.name, c.problem.d, c.problem.m);
                PairSink sink(problem->spec(), moea::to_string(c.teacher), c.seed);
                moea::RunOptions opts;
                opts.population_size = cfg.population;
                opts.evaluations = cfg.evaluations;
                opts.teacher = c.teacher;
                opts.sink = &sink;
                moea::Rng rng(c.seed);
                (void)moea::run_nsga2(*problem, opts, rng);
                const auto& spec = problem->spec();
                c.manifest = CellManifest{spec.name(), spec.d(), spec.m(), moea::to_string(c.teacher),
                                          c.seed, sink.pairs.size(), spec.lower(), spec.upper()};
                c.pairs = std::move(sink.pairs);
            } catch (const std::exception& e) {
                c.error = e.what();
            }
        }
    };
    const std::size_t nthreads = std::max<std::size_t>(1, std::min(cfg.workers, cells.size()));
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < nthreads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    TrajectoryDataset ds;
    for (auto& c : cells) {
        if (!c.manifest) {
            ds.skipped.push_back(c.problem.name + "/" + moea::to_string(c.teacher) + "/" +
                                 std::to_string(c.index) + ": " + c.error);
            continue;
        }
        ds.cells.push_back(*c.manifest);
        for (auto& p : c.pairs) ds.pairs.push_back(std::move(p));
    }
    return ds;
}

// ---- training --------------------------------------------------------------------

void PretrainConfig::validate() const {
    if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
    if (steps < 1) throw ConfigError("steps must be at least 1");
    if (eval_every < 1) throw ConfigError("eval_every must be at least 1");
    if (!(adam.lr > 0.0)) throw ConfigError("learning rate must be positive");
}

std::vector<LossPoint> pretrain(const TrajectoryDataset& data, model::PetModel& model,
                                const PretrainConfig& cfg, const ProgressFn& progress) {
    std::vector<Sample> samples;
    samples.reserve(data.pairs.size());
    for (const auto& p : data.pairs) {
        Sample s{&p.x_g, &p.x_g1, p.spec()};
        check_capacity(model.config(), s,
                       p.problem + "/" + p.teacher + "/seed " + std::to_string(p.seed) +
                           "/generation " + std::to_string(p.generation));
        samples.push_back(std::move(s));
    }
    return train(samples, model, cfg, progress);
}

std::vector<LossPoint> pretrain_pairs(
    const std::vector<std::pair<mop::Population, mop::Population>>& pairs,
    const mop::ProblemSpec& spec, model::PetModel& model, const PretrainConfig& cfg,
    const ProgressFn& progress) {
    std::vector<Sample> samples;
    samples.reserve(pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        Sample s{&pairs[i].first, &pairs[i].second, spec};
        check_capacity(model.config(), s, "#" + std::to_string(i));
        samples.push_back(std::move(s));
    }
    return train(samples, model, cfg, progress);
}

FineEvolver::FineEvolver(model::PetModel& model, FineEvolveConfig cfg)
    : model_(model), cfg_(cfg), adam_(model.parameters(), nn::AdamConfig{.lr = cfg.lr}) {}

std::optional<double> FineEvolver::step(const mop::Population& x_g, const mop::Population& x_g1,
                                        const mop::ProblemSpec& spec) {
    if (!cfg_.enabled || cfg_.steps_per_generation == 0) return std::nullopt;
    const auto target = moea::nsga2_select(x_g.merged(x_g1), x_g.size());
    std::optional<double> first;
    for (std::size_t s = 0; s < cfg_.steps_per_generation; ++s) {
        adam_.zero_grad();
        const double loss = model::teacher_forced_loss(model_, x_g, target, spec, true);
        if (!first) first = loss;
        adam_.step();
    }
    return first;
}

moea::RunResult run_nsga2_pet(const mop::Problem& problem, model::PetModel& model,
                              const PetRunOptions& opts, moea::Rng& rng) {
    if (opts.population_size > model.config().max_seq)
        throw CapacityError("population size exceeds the model's max_seq");
    if (opts.evaluations < opts.population_size)
        throw ConfigError("evaluations must be at least the population size");
    FineEvolver fine(model, opts.fine);
    return generational(
        problem, opts, rng,
        [&](const mop::Population& parents, mop::EvaluationBudget& budget) {
            auto out = model::generate_population(model, parents, problem, budget, rng);
            return std::pair{std::move(out.offspring), out.exhausted};
        },
        [&](const mop::Population& parents, const mop::Population& children) {
            return fine.step(parents, children, problem.spec());
        });
}

moea::RunResult run_random_offspring(const mop::Problem& problem, const PetRunOptions& opts,
                                     moea::Rng& rng) {
    return generational(
        problem, opts, rng,
        [&](const mop::Population& parents, mop::EvaluationBudget& budget) {
            auto out = mop::evaluate(moea::random_population(problem.spec(), parents.size(), rng),
                                     problem, budget);
            return std::pair{mop::evaluated_prefix(out.population), out.exhausted};
        },
        [](const mop::Population&, const mop::Population&) { return std::optional<double>{}; });
}

double offspring_target_distance(const mop::Population& offspring, const mop::Population& target,
                                 const mop::ProblemSpec& spec) {
    if (offspring.empty() || target.empty()) throw EmptySet("distance needs two non-empty sets");
    std::vector<std::vector<double>> t;
    for (const auto& s : target.members) t.push_back(mop::normalize_decision(s.x, spec));
    double total = 0.0;
    for (const auto& s : offspring.members) {
        const auto u = mop::normalize_decision(s.x, spec);
        double best = std::numeric_limits<double>::infinity();
        for (const auto& v : t) {
            double d2 = 0.0;
            for (std::size_t j = 0; j < u.size(); ++j) d2 += (u[j] - v[j]) * (u[j] - v[j]);
            best = std::min(best, d2);
        }
        total += best / static_cast<double>(spec.d());
    }
    return total / static_cast<double>(offspring.size());
}

}  // namespace pet::pipeline

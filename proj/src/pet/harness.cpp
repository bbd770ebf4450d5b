#include "pet/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <limits>
#include <map>
#include <sstream>
#include <thread>

#include "pet/error.hpp"
#include "pet/moea.hpp"
#include "pet/problems.hpp"

namespace pet::harness {
namespace {

using ojson = nlohmann::ordered_json;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string full(double v) {
    if (std::isnan(v)) return "NaN";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

ojson number_or_null(double v) { return std::isfinite(v) ? ojson(v) : ojson(nullptr); }

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
    os << text;
    if (!os) throw IoError("failed writing '" + path.string() + "'");
}

bool is_pet_arm(const std::string& arm) { return arm == "pet" || arm == "pet-frozen"; }

}  // namespace

const std::vector<std::string>& known_arms() {
    static const std::vector<std::string> arms = {"pet", "pet-frozen", "nsga2", "cso", "random"};
    return arms;
}

void ExperimentConfig::validate() const {
    if (problems.empty()) throw ConfigError("experiment lists no problems");
    if (arms.empty()) throw ConfigError("experiment lists no arms");
    if (n_seeds < 1) throw ConfigError("n_seeds must be at least 1");
    if (population < 2) throw ConfigError("population must be at least 2");
    if (evaluations < population) throw ConfigError("evaluations must be at least the population");
    for (const auto& a : arms) {
        const auto& k = known_arms();
        if (std::find(k.begin(), k.end(), a) == k.end()) throw ConfigError("unknown arm '" + a + "'");
    }
    if (std::find(arms.begin(), arms.end(), reference_arm) == arms.end())
        throw ConfigError("reference arm '" + reference_arm + "' is not among the arms");
    const auto names = problems::registered_names();
    for (const auto& p : problems) {
        if (std::find(names.begin(), names.end(), p.name) == names.end())
            throw ConfigError("unknown problem '" + p.name + "'");
    }
}

ExperimentConfig ExperimentConfig::from_json(const std::string& text) {
    ExperimentConfig c;
    try {
        const auto j = ojson::parse(text);
        for (const auto& p : j.at("problems")) {
            c.problems.push_back({p.at("name").get<std::string>(), p.at("d").get<std::size_t>(),
                                  p.value("m", std::size_t{2})});
        }
        if (j.contains("arms")) c.arms = j.at("arms").get<std::vector<std::string>>();
        c.reference_arm = j.value("reference_arm", c.reference_arm);
        c.population = j.value("population", c.population);
        c.evaluations = j.value("evaluations", c.evaluations);
        c.n_seeds = j.value("n_seeds", c.n_seeds);
        c.master_seed = j.value("master_seed", c.master_seed);
        c.model_path = j.value("model", c.model_path);
        c.front_size = j.value("front_size", c.front_size);
        c.workers = j.value("workers", c.workers);
        if (j.contains("fine_evolve")) {
            const auto& f = j.at("fine_evolve");
            c.fine.enabled = f.value("enabled", c.fine.enabled);
            c.fine.steps_per_generation = f.value("steps_per_generation", c.fine.steps_per_generation);
            c.fine.lr = f.value("lr", c.fine.lr);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad experiment config: ") + e.what());
    }
    c.validate();
    return c;
}

BenchmarkResult run_benchmark(const ExperimentConfig& cfg, const model::PetModel* model) {
    cfg.validate();
    std::optional<model::PetModel> loaded;
    const bool needs_model = std::any_of(cfg.arms.begin(), cfg.arms.end(), is_pet_arm);
    if (needs_model && !model) {
        if (cfg.model_path.empty()) throw ConfigError("pet arms need a model checkpoint");
        loaded = model::PetModel::load(cfg.model_path);
        model = &*loaded;
    }

    struct Problem {
        std::shared_ptr<const mop::Problem> problem;
        std::vector<mop::ObjectiveVector> front;
    };
    std::vector<Problem> probs;
    for (const auto& p : cfg.problems) {
        auto prob = problems::make_problem(p.name, p.d, p.m);
        const std::size_t n = cfg.front_size ? cfg.front_size : problems::default_front_size(p.m);
        probs.push_back({prob, problems::sample_reference_front(*prob, n)});
    }

    std::vector<RunRecord> records;
    std::vector<std::size_t> record_problem;
    for (const auto& arm : cfg.arms) {
        for (std::size_t pi = 0; pi < cfg.problems.size(); ++pi) {
            const auto& p = cfg.problems[pi];
            for (std::size_t s = 0; s < cfg.n_seeds; ++s) {
                RunRecord r;
                r.arm = arm;
                r.problem = p.name;
                r.d = p.d;
                r.m = p.m;
                r.seed_index = s;
                r.seed = pipeline::derive_seed(cfg.master_seed, arm, p.name, p.d, p.m, s);
                records.push_back(std::move(r));
                record_problem.push_back(pi);
            }
        }
    }

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < records.size(); i = next++) {
            RunRecord& r = records[i];
            const Problem& p = probs[record_problem[i]];
            const auto t0 = std::chrono::steady_clock::now();
            try {
                moea::Rng rng(r.seed);
                moea::RunResult res;
                pipeline::PetRunOptions po;
                po.population_size = cfg.population;
                po.evaluations = cfg.evaluations;
                po.fine = cfg.fine;
                po.reference_front = &p.front;
                if (is_pet_arm(r.arm)) {
                    model::PetModel copy = *model;
                    if (r.arm == "pet-frozen") po.fine.enabled = false;
                    res = pipeline::run_nsga2_pet(*p.problem, copy, po, rng);
                } else if (r.arm == "random") {
                    res = pipeline::run_random_offspring(*p.problem, po, rng);
                } else {
                    moea::RunOptions ro;
                    ro.population_size = cfg.population;
                    ro.evaluations = cfg.evaluations;
                    ro.teacher = r.arm == "cso" ? moea::Teacher::Cso : moea::Teacher::Nsga2;
                    ro.reference_front = &p.front;
                    res = moea::run_nsga2(*p.problem, ro, rng);
                }
                r.evaluations = res.evaluations;
                r.log = std::move(res.log);
                try {
                    r.igd = metrics::igd(p.front, res.final_population).value;
                } catch (const EmptySet&) {
                    r.igd = kNaN;
                }
            } catch (const std::exception& e) {
                r.failed = true;
                r.error = e.what();
                r.igd = kNaN;
            }
            r.wall_seconds =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        }
    };
    const std::size_t nthreads = std::max<std::size_t>(1, std::min(cfg.workers, records.size()));
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < nthreads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    return summarize(std::move(records), cfg.arms, cfg.reference_arm);
}

BenchmarkResult summarize(std::vector<RunRecord> records, const std::vector<std::string>& arms,
                          const std::string& reference_arm) {
    BenchmarkResult out;
    out.reference_arm = reference_arm;
    out.arms = arms;
    // (problem, d, m) in first-appearance order
    std::vector<std::tuple<std::string, std::size_t, std::size_t>> keys;
    for (const auto& r : records) {
        auto k = std::make_tuple(r.problem, r.d, r.m);
        if (std::find(keys.begin(), keys.end(), k) == keys.end()) keys.push_back(k);
    }
    auto samples = [&](const std::string& arm, const auto& key) {
        std::vector<double> v;
        for (const auto& r : records) {
            if (r.arm == arm && std::make_tuple(r.problem, r.d, r.m) == key && std::isfinite(r.igd))
                v.push_back(r.igd);
        }
        return v;
    };
    for (const auto& key : keys) {
        ProblemSummary s;
        std::tie(s.problem, s.d, s.m) = key;
        const auto ref = samples(reference_arm, key);
        s.reference_median = metrics::median(ref);
        s.best_baseline = kNaN;
        for (const auto& arm : arms) {
            if (arm == reference_arm) continue;
            ArmComparison c;
            c.arm = arm;
            const auto v = samples(arm, key);
            c.usable = v.size();
            c.median = metrics::median(v);
            if (v.size() >= 3 && ref.size() >= 3) c.test = metrics::wilcoxon_rank_sum(v, ref);
            if (std::isfinite(c.median) && !(c.median >= s.best_baseline)) s.best_baseline = c.median;
            s.arms.push_back(std::move(c));
        }
        s.roc_percent = std::isfinite(s.best_baseline) && std::isfinite(s.reference_median)
                            ? metrics::roc_percent(s.best_baseline, s.reference_median)
                            : kNaN;
        out.summaries.push_back(std::move(s));
    }
    out.records = std::move(records);
    return out;
}

std::string records_csv(const BenchmarkResult& r) {
    std::string out = "arm,problem,d,m,seed_index,seed,igd,evaluations,wall_seconds,status,error\n";
    for (const auto& x : r.records) {
        out += csv_field(x.arm) + ',' + csv_field(x.problem) + ',' + std::to_string(x.d) + ',' +
               std::to_string(x.m) + ',' + std::to_string(x.seed_index) + ',' +
               std::to_string(x.seed) + ',' + full(x.igd) + ',' + std::to_string(x.evaluations) +
               ',' + full(x.wall_seconds) + ',' + (x.failed ? "failed" : "ok") + ',' +
               csv_field(x.error) + '\n';
    }
    return out;
}

std::string summary_json(const BenchmarkResult& r) {
    ojson j;
    j["reference_arm"] = r.reference_arm;
    j["arms"] = r.arms;
    ojson problems = ojson::array();
    for (const auto& s : r.summaries) {
        ojson p;
        p["problem"] = s.problem;
        p["d"] = s.d;
        p["m"] = s.m;
        p["reference_median"] = number_or_null(s.reference_median);
        ojson arms = ojson::array();
        for (const auto& c : s.arms) {
            ojson a;
            a["arm"] = c.arm;
            a["median"] = number_or_null(c.median);
            a["usable_runs"] = c.usable;
            if (c.test) {
                a["p_value"] = c.test->p_value;
                a["exact"] = c.test->exact;
                a["mark"] = metrics::mark(c.test->decision);
                a["decision"] = metrics::to_string(c.test->decision);
            } else {
                a["p_value"] = nullptr;
                a["mark"] = nullptr;
            }
            arms.push_back(std::move(a));
        }
        p["arms"] = std::move(arms);
        p["best_baseline_median"] = number_or_null(s.best_baseline);
        p["roc_percent"] = number_or_null(s.roc_percent);
        problems.push_back(std::move(p));
    }
    j["problems"] = std::move(problems);
    return j.dump(2) + "\n";
}

std::string text_table(const BenchmarkResult& r) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> header = {"Problem", "d", "m"};
    for (const auto& a : r.arms)
        if (a != r.reference_arm) header.push_back(a);
    header.push_back(r.reference_arm);
    header.push_back("ROC(%)");
    rows.push_back(header);
    for (const auto& s : r.summaries) {
        std::vector<std::string> row = {s.problem, std::to_string(s.d), std::to_string(s.m)};
        for (const auto& c : s.arms) {
            std::string cell = metrics::format_sci3(c.median);
            if (c.test) cell += std::string(" (") + metrics::mark(c.test->decision) + ")";
            row.push_back(cell);
        }
        row.push_back(metrics::format_sci3(s.reference_median));
        if (std::isfinite(s.roc_percent)) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.2f%%", s.roc_percent);
            row.emplace_back(buf);
        } else {
            row.emplace_back("NaN");
        }
        rows.push_back(std::move(row));
    }
    std::vector<std::size_t> width(header.size(), 0);
    for (const auto& row : rows)
        for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
    std::string out;
    for (std::size_t k = 0; k < rows.size(); ++k) {
        for (std::size_t i = 0; i < rows[k].size(); ++i) {
            out += rows[k][i];
            if (i + 1 < rows[k].size()) out += std::string(width[i] - rows[k][i].size() + 2, ' ');
        }
        out += '\n';
        if (k == 0) {
            std::size_t total = 0;
            for (auto w : width) total += w + 2;
            out += std::string(total - 2, '-') + '\n';
        }
    }
    std::size_t failed = 0;
    for (const auto& x : r.records) failed += x.failed;
    if (failed) out += std::to_string(failed) + " run(s) failed; see records.csv\n";
    return out;
}

void emit_report(const BenchmarkResult& r, const std::filesystem::path& dir) {
    if (r.records.empty()) throw ContractViolation("no records to report");
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
    write_file(dir / "records.csv", records_csv(r));
    write_file(dir / "summary.json", summary_json(r));
    write_file(dir / "table.txt", text_table(r));
    std::string events;
    for (const auto& x : r.records) {
        for (const auto& g : x.log) {
            ojson e{{"arm", x.arm},           {"problem", x.problem},
                    {"d", x.d},               {"m", x.m},
                    {"seed_index", x.seed_index}, {"generation", g.generation},
                    {"evaluations", g.evaluations}, {"offspring", g.offspring}};
            e["igd"] = g.igd ? ojson(*g.igd) : ojson(nullptr);
            e["loss"] = g.loss ? ojson(*g.loss) : ojson(nullptr);
            events += e.dump() + "\n";
        }
    }
    write_file(dir / "generations.jsonl", events);
}

// ---- self-test -------------------------------------------------------------------

namespace {

// Peels non-dominated layers one at a time, the quadratic textbook way.
std::vector<std::size_t> peel_ranks(const mop::Population& pop) {
    const bool constrained = pop.any_infeasible();
    const std::size_t n = pop.size();
    std::vector<std::size_t> rank(n, 0);
    std::vector<bool> done(n, false);
    std::size_t left = n;
    for (std::size_t level = 0; left > 0; ++level) {
        std::vector<std::size_t> layer;
        for (std::size_t i = 0; i < n; ++i) {
            if (done[i]) continue;
            bool dominated = false;
            for (std::size_t j = 0; j < n && !dominated; ++j) {
                if (done[j] || j == i) continue;
                dominated = constrained ? mop::constrained_dominates(pop[j], pop[i])
                                        : mop::dominates(pop[j], pop[i]);
            }
            if (!dominated) layer.push_back(i);
        }
        for (std::size_t i : layer) {
            done[i] = true;
            rank[i] = level;
        }
        left -= layer.size();
    }
    return rank;
}

SelftestCase sort_case() {
    moea::Rng rng(2024);
    std::size_t mismatches = 0;
    for (int t = 0; t < 50; ++t) {
        const std::size_t n = 1 + rng() % 40;
        const std::size_t m = 2 + rng() % 4;
        const bool constrained = t % 2 == 1;
        mop::Population pop;
        for (std::size_t i = 0; i < n; ++i) {
            mop::ObjectiveVector f(m);
            for (auto& v : f) v = static_cast<double>(rng() % 6);
            const double cv = constrained && rng() % 3 == 0 ? static_cast<double>(rng() % 3) : 0.0;
            pop.members.emplace_back(mop::DecisionVector{0.0}, f, cv);
        }
        const auto part = moea::fast_nondominated_sort(pop);
        if (part.rank != peel_ranks(pop)) ++mismatches;
    }
    return {"sort-vs-brute-force", mismatches == 0,
            std::to_string(mismatches) + " mismatching populations of 50"};
}

SelftestCase igd_case() {
    using V = std::vector<mop::ObjectiveVector>;
    const double a = metrics::igd(V{{0, 1}, {1, 0}}, V{{0, 1}, {1, 0}}).value;
    const double b = metrics::igd(V{{0, 1}, {1, 0}}, V{{1, 1}}).value;
    const double c = metrics::igd(V{{0, 0}}, V{{3, 4}}).value;
    const bool ok = std::abs(a) <= 1e-12 && std::abs(b - 1.0) <= 1e-12 && std::abs(c - 5.0) <= 1e-12;
    char buf[96];
    std::snprintf(buf, sizeof buf, "fixtures gave %.3g, %.3g, %.3g (want 0, 1, 5)", a, b, c);
    return {"igd-fixtures", ok, buf};
}

SelftestCase ranksum_case() {
    const std::vector<double> a = {1, 2, 3};
    const std::vector<double> b = {4, 5, 6};
    const auto r = metrics::wilcoxon_rank_sum(a, b);
    const bool ok = r.exact && std::abs(r.p_value - 0.1) <= 1e-12 &&
                    r.decision == metrics::Decision::Indifferent && r.statistic == 6.0;
    return {"rank-sum-enumeration", ok, "p = " + full(r.p_value) + " (want 0.1)"};
}

SelftestCase gradient_case() {
    model::PetConfig cfg;
    cfg.d_hat = 8;
    cfg.m_hat = 3;
    cfg.width = 16;
    cfg.layers = 2;
    cfg.heads = 2;
    cfg.max_seq = 8;
    model::PetModel net(cfg, 11);
    problems::SyntheticProblem prob(5, 2);
    moea::Rng rng(3);
    mop::Population parents;
    mop::Population targets;
    for (int i = 0; i < 4; ++i) {
        parents.members.push_back(mop::evaluate_solution(prob, moea::random_decision(prob.spec(), rng)));
        targets.members.push_back(mop::evaluate_solution(prob, moea::random_decision(prob.spec(), rng)));
    }
    const auto params = net.parameters();
    const auto report = nn::gradient_check(params, [&](nn::Tape& tape) {
        auto pred = net.teacher_forced_predictions(tape, parents, targets, prob.spec());
        const auto all = net.decision_tokens(targets, prob.spec());
        nn::Tensor tgt({3, cfg.d_hat},
                       std::vector<double>(all.data().begin() + static_cast<long>(cfg.d_hat),
                                           all.data().end()));
        return nn::masked_mse(pred, tgt, prob.spec().d());
    }, 1e-5, 64);
    char buf[128];
    std::snprintf(buf, sizeof buf, "max rel. error %.2e over %zu entries (worst %s)",
                  report.max_rel_error, report.checked, report.worst.c_str());
    return {"toy-model-gradients", report.passed(1e-4), buf};
}

}  // namespace

std::vector<SelftestCase> selftest() {
    std::vector<SelftestCase> out;
    for (auto fn : {sort_case, igd_case, ranksum_case, gradient_case}) {
        try {
            out.push_back(fn());
        } catch (const std::exception& e) {
            out.push_back({"error", false, e.what()});
        }
    }
    return out;
}

}  // namespace pet::harness

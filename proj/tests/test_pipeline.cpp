#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "model_fixtures.hpp"
#include "pet/error.hpp"
#include "pet/harness.hpp"
#include "pet/metrics.hpp"
#include "pet/pipeline.hpp"

using namespace pet;

namespace {

model::PetConfig small_config() {
    model::PetConfig c;
    c.d_hat = 16;
    c.m_hat = 3;
    c.width = 16;
    c.layers = 1;
    c.heads = 2;
    c.max_seq = 24;
    return c;
}

pipeline::CollectConfig tiny_collection() {
    pipeline::CollectConfig cc;
    cc.problems = {{"zdt1", 8, 2}, {"zdt3", 8, 2}};
    cc.teachers = {moea::Teacher::Nsga2, moea::Teacher::Cso};
    cc.seeds = 2;
    cc.population = 10;
    cc.evaluations = 60;
    return cc;
}

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

}  // namespace

TEST_CASE("derived seeds are stable and field-sensitive") {
    const auto s = pipeline::derive_seed(1, "pet", "zdt6", 30, 2, 0);
    CHECK(s == pipeline::derive_seed(1, "pet", "zdt6", 30, 2, 0));
    CHECK(s != pipeline::derive_seed(2, "pet", "zdt6", 30, 2, 0));
    CHECK(s != pipeline::derive_seed(1, "nsga2", "zdt6", 30, 2, 0));
    CHECK(s != pipeline::derive_seed(1, "pet", "zdt1", 30, 2, 0));
    CHECK(s != pipeline::derive_seed(1, "pet", "zdt6", 31, 2, 0));
    CHECK(s != pipeline::derive_seed(1, "pet", "zdt6", 30, 3, 0));
    CHECK(s != pipeline::derive_seed(1, "pet", "zdt6", 30, 2, 1));
}

TEST_CASE("collected pairs are normalized and complete") {
    const auto ds = pipeline::collect_trajectories(tiny_collection());
    CHECK(ds.cells.size() == 8);
    CHECK(ds.skipped.empty());
    std::size_t declared = 0;
    for (const auto& c : ds.cells) declared += c.pairs;
    CHECK(declared == ds.pairs.size());
    REQUIRE_FALSE(ds.pairs.empty());
    for (const auto& p : ds.pairs) {
        CHECK(p.x_g.size() == 10);
        CHECK(p.x_g1.size() == 10);
        for (const auto* pop : {&p.x_g, &p.x_g1}) {
            for (const auto& s : pop->members) {
                for (double v : s.x) CHECK((v >= 0.0 && v <= 1.0));
                for (double v : *s.f) CHECK((v >= -1e-12 && v <= 1.0 + 1e-12));
            }
        }
    }
}

TEST_CASE("collection does not depend on the worker count") {
    auto cc = tiny_collection();
    const auto serial = pipeline::collect_trajectories(cc).to_jsonl();
    cc.workers = 3;
    CHECK(pipeline::collect_trajectories(cc).to_jsonl() == serial);
}

TEST_CASE("dataset JSONL round trip is byte-identical") {
    const auto ds = pipeline::collect_trajectories(tiny_collection());
    const auto text = ds.to_jsonl();
    CHECK(pipeline::TrajectoryDataset::from_jsonl(text).to_jsonl() == text);

    const auto dir = std::filesystem::temp_directory_path() / "pet_unit_ds";
    std::filesystem::create_directories(dir);
    ds.save(dir / "d.jsonl");
    CHECK(read_file(dir / "d.jsonl") == text);
    CHECK(pipeline::TrajectoryDataset::load(dir / "d.jsonl").to_jsonl() == text);
    std::filesystem::remove_all(dir);
}

TEST_CASE("malformed datasets are rejected") {
    const auto text = pipeline::collect_trajectories(tiny_collection()).to_jsonl();
    CHECK_THROWS_AS((void)pipeline::TrajectoryDataset::from_jsonl(text + "{not json}\n"), DataError);
    CHECK_THROWS_AS((void)pipeline::TrajectoryDataset::from_jsonl(""), DataError);
    const auto first_pair = text.find('\n') + 1;
    CHECK_THROWS_AS((void)pipeline::TrajectoryDataset::from_jsonl(text.substr(first_pair)), DataError);
}

TEST_CASE("pretraining lowers the loss on a fixed shift") {
    problems::SyntheticShiftFamily fam(4, 2);
    std::mt19937_64 rng(1);
    std::vector<std::pair<mop::Population, mop::Population>> pairs;
    for (int i = 0; i < 8; ++i) pairs.push_back(fam.sample(rng, 8));
    model::PetModel m(small_config(), 2);
    pipeline::PretrainConfig pc;
    pc.steps = 60;
    pc.batch_size = 4;
    pc.eval_every = 1;
    const auto curve = pipeline::pretrain_pairs(pairs, fam.problem().spec(), m, pc);
    REQUIRE(curve.size() == 60);
    double early = 0.0, late = 0.0;
    for (int i = 0; i < 5; ++i) {
        early += curve[i].loss;
        late += curve[curve.size() - 1 - i].loss;
    }
    CHECK(late < 0.5 * early);
}

TEST_CASE("pretrain config validation") {
    pipeline::PretrainConfig pc;
    pc.batch_size = 0;
    CHECK_THROWS_AS(pc.validate(), ConfigError);
}

TEST_CASE("PET-driven runs spend exactly the budget") {
    const auto zdt1 = problems::make_problem("zdt1", 8, 2);
    model::PetModel base(small_config(), 3);
    std::mt19937_64 fuzz(4);
    for (int t = 0; t < 12; ++t) {
        pipeline::PetRunOptions o;
        o.population_size = 2 + fuzz() % 20;
        o.evaluations = o.population_size + fuzz() % 150;
        o.fine.enabled = t % 2 == 0;
        auto m = base;
        moea::Rng rng(t);
        const auto r = pipeline::run_nsga2_pet(*zdt1, m, o, rng);
        CHECK(r.evaluations == o.evaluations);
        moea::Rng rng2(t);
        CHECK(pipeline::run_random_offspring(*zdt1, o, rng2).evaluations == o.evaluations);
    }
}

TEST_CASE("frozen runs leave the model untouched and fine-evolving changes it") {
    const auto zdt2 = problems::make_problem("zdt2", 8, 2);
    model::PetModel base(small_config(), 5);
    pipeline::PetRunOptions o;
    o.population_size = 10;
    o.evaluations = 50;
    o.fine.enabled = false;
    auto frozen = base;
    moea::Rng r1(6);
    const auto run = pipeline::run_nsga2_pet(*zdt2, frozen, o, r1);
    CHECK(frozen.serialize() == base.serialize());
    for (const auto& g : run.log) CHECK_FALSE(g.loss.has_value());

    o.fine.enabled = true;
    auto live = base;
    moea::Rng r2(6);
    const auto run2 = pipeline::run_nsga2_pet(*zdt2, live, o, r2);
    CHECK(live.serialize() != base.serialize());
    CHECK(run2.log.back().loss.has_value());
}

TEST_CASE("one fine-evolve step usually lowers the loss on its own pair") {
    const auto spec = mop::ProblemSpec::unit_box("s", 6, 2);
    std::mt19937_64 rng(11);
    int descended = 0;
    for (int t = 0; t < 50; ++t) {
        model::PetModel m(small_config(), 100 + t);
        const auto x_g = fixture::synthetic_population(rng, 8, 6, 2);
        const auto x_g1 = fixture::synthetic_population(rng, 8, 6, 2);
        const auto target = moea::nsga2_select(x_g.merged(x_g1), x_g.size());
        const double before = model::teacher_forced_loss(m, x_g, target, spec, false);
        pipeline::FineEvolver fine(m, {});
        (void)fine.step(x_g, x_g1, spec);
        if (model::teacher_forced_loss(m, x_g, target, spec, false) <= before) ++descended;
    }
    CHECK(descended >= 40);
}

TEST_CASE("offspring distance is zero on the target itself") {
    std::mt19937_64 rng(7);
    const auto spec = mop::ProblemSpec::unit_box("s", 3, 2);
    const auto pop = fixture::synthetic_population(rng, 5, 3, 2);
    CHECK(pipeline::offspring_target_distance(pop, pop, spec) == 0.0);
    mop::Population off;
    off.members.emplace_back(std::vector<double>{0.0, 0.0, 0.0});
    mop::Population tgt;
    tgt.members.emplace_back(std::vector<double>{1.0, 1.0, 1.0});
    CHECK(pipeline::offspring_target_distance(off, tgt, spec) == doctest::Approx(1.0));
}

TEST_CASE("experiment config parsing") {
    const auto c = harness::ExperimentConfig::from_json(
        R"({"problems": [{"name": "zdt1", "d": 10}], "arms": ["nsga2", "random"],
            "reference_arm": "nsga2", "n_seeds": 3, "population": 10, "evaluations": 40})");
    CHECK(c.problems.front().m == 2);
    CHECK(c.arms.size() == 2);
    CHECK_THROWS_AS((void)harness::ExperimentConfig::from_json(R"({"problems": []})"), ConfigError);
    CHECK_THROWS_AS((void)harness::ExperimentConfig::from_json(
                        R"({"problems": [{"name": "zdt1", "d": 10}], "arms": ["moead"], "reference_arm": "moead"})"),
                    ConfigError);
    CHECK_THROWS_AS((void)harness::ExperimentConfig::from_json("{"), ConfigError);
}

TEST_CASE("summaries, marks and ROC from fixed records") {
    std::vector<harness::RunRecord> recs;
    auto add = [&](const std::string& arm, double v) {
        harness::RunRecord r;
        r.arm = arm;
        r.problem = "zdt6";
        r.d = 30;
        r.m = 2;
        r.igd = v;
        recs.push_back(r);
    };
    for (int i = 0; i < 6; ++i) {
        add("pet", 0.6 + 0.01 * i);
        add("nsga2", 7.8 + 0.01 * i);
        add("random", 7.7 + 0.01 * i);
    }
    add("random", NAN);
    const auto res = harness::summarize(recs, {"pet", "nsga2", "random"}, "pet");
    REQUIRE(res.summaries.size() == 1);
    const auto& s = res.summaries.front();
    CHECK(s.reference_median == doctest::Approx(0.625));
    CHECK(s.best_baseline == doctest::Approx(7.725));
    CHECK(s.roc_percent == doctest::Approx((7.725 - 0.625) / 7.725 * 100.0));
    REQUIRE(s.arms.size() == 2);
    CHECK(s.arms[1].usable == 6);
    CHECK(s.arms[0].test->decision == metrics::Decision::Worse);

    const auto csv = harness::records_csv(res);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == static_cast<long>(recs.size() + 1));
    const auto j = nlohmann::json::parse(harness::summary_json(res));
    CHECK(nlohmann::json::parse(j.dump()) == j);
    const auto table = harness::text_table(res);
    CHECK(table.find("6.25e-01") != std::string::npos);
    CHECK(table.find(std::string(" (") + metrics::mark(s.arms[0].test->decision) + ")") != std::string::npos);
    CHECK(table.find("91.91%") != std::string::npos);
}

TEST_CASE("benchmark runs and writes every report file") {
    harness::ExperimentConfig c;
    c.problems = {{"zdt1", 6, 2}};
    c.arms = {"nsga2", "random", "cso"};
    c.reference_arm = "nsga2";
    c.population = 8;
    c.evaluations = 40;
    c.n_seeds = 3;
    c.workers = 2;
    const auto res = harness::run_benchmark(c);
    CHECK(res.records.size() == 9);
    for (const auto& r : res.records) {
        CHECK_FALSE(r.failed);
        CHECK(r.evaluations == 40);
    }
    c.workers = 1;
    const auto again = harness::run_benchmark(c);
    for (std::size_t i = 0; i < res.records.size(); ++i) CHECK(again.records[i].igd == res.records[i].igd);

    const auto dir = std::filesystem::temp_directory_path() / "pet_unit_report";
    harness::emit_report(res, dir);
    for (const char* f : {"records.csv", "summary.json", "table.txt", "generations.jsonl"})
        CHECK(std::filesystem::exists(dir / f));
    std::filesystem::remove_all(dir);
    CHECK_THROWS_AS(harness::emit_report(res, "/proc/no/such/dir"), IoError);
}

TEST_CASE("pet arms need a model") {
    harness::ExperimentConfig c;
    c.problems = {{"zdt1", 6, 2}};
    c.arms = {"pet", "nsga2"};
    CHECK_THROWS_AS((void)harness::run_benchmark(c), ConfigError);
}

TEST_CASE("built-in self-test passes") {
    for (const auto& c : harness::selftest()) CHECK_MESSAGE(c.passed, c.name << ": " << c.detail);
}

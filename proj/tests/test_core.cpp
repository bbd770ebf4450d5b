#include <doctest.h>

#include <cmath>
#include <numeric>
#include <thread>

#include "oracles.hpp"
#include "pet/error.hpp"
#include "pet/metrics.hpp"
#include "pet/mop.hpp"
#include "pet/problems.hpp"

using namespace pet;

TEST_CASE("dominance on hand-picked pairs") {
    CHECK(mop::dominates(std::vector<double>{1, 2}, std::vector<double>{2, 2}));
    CHECK_FALSE(mop::dominates(std::vector<double>{1, 2}, std::vector<double>{1, 2}));
    CHECK_FALSE(mop::dominates(std::vector<double>{1, 3}, std::vector<double>{2, 2}));

    const mop::Solution feasible({0.0}, {5.0, 5.0}, 0.0);
    const mop::Solution slightly({0.0}, {0.0, 0.0}, 0.5);
    const mop::Solution badly({0.0}, {0.0, 0.0}, 2.0);
    CHECK(mop::constrained_dominates(feasible, slightly));
    CHECK(mop::constrained_dominates(slightly, badly));
    CHECK_FALSE(mop::constrained_dominates(badly, feasible));
}

TEST_CASE("dominance agrees with the oracle and is a strict partial order") {
    oracle::Rng rng(11);
    for (int trial = 0; trial < 300; ++trial) {
        auto pop = oracle::random_population(rng, 3, 1 + trial % 4, true);
        const auto &a = pop[0], &b = pop[1], &c = pop[2];
        CHECK(mop::constrained_dominates(a, b) == oracle::beats(a, b, true));
        CHECK(mop::dominates(a, b) == oracle::pareto(*a.f, *b.f));
        CHECK_FALSE(mop::constrained_dominates(a, a));
        if (mop::constrained_dominates(a, b)) CHECK_FALSE(mop::constrained_dominates(b, a));
        if (mop::constrained_dominates(a, b) && mop::constrained_dominates(b, c))
            CHECK(mop::constrained_dominates(a, c));
    }
}

TEST_CASE("aggregate violation ignores tiny equality residuals") {
    CHECK(mop::aggregate_violation(std::vector<double>{-1.0, 0.5}, {}) == doctest::Approx(0.5));
    CHECK(mop::aggregate_violation({}, std::vector<double>{5e-5, -0.25}) == doctest::Approx(0.25));
    CHECK(mop::aggregate_violation({}, {}) == 0.0);
}

TEST_CASE("problem spec rejects inconsistent shapes") {
    CHECK_THROWS_AS(mop::ProblemSpec("p", 2, 2, {0.0}, {1.0, 1.0}), ConfigError);
    CHECK_THROWS_AS(mop::ProblemSpec("p", 1, 2, {1.0}, {0.0}), ConfigError);
    CHECK_THROWS_AS(mop::ProblemSpec("p", 0, 2, {}, {}), ConfigError);
    const auto box = mop::ProblemSpec::unit_box("u", 3, 2);
    CHECK(box.contains(std::vector<double>{0.0, 0.5, 1.0}));
    CHECK_FALSE(box.contains(std::vector<double>{0.0, 1.5, 1.0}));
    CHECK_THROWS_AS(box.check_decision(std::vector<double>{0.0, NAN, 1.0}), ContractViolation);
}

TEST_CASE("normalize and denormalize are inverse") {
    const mop::ProblemSpec spec("p", 3, 2, {-5.0, 0.0, 2.0}, {5.0, 1.0, 4.0});
    const std::vector<double> x{-2.5, 0.25, 3.0};
    const auto u = mop::normalize_decision(x, spec);
    CHECK(u[0] == doctest::Approx(0.25));
    CHECK(u[2] == doctest::Approx(0.5));
    const auto back = mop::denormalize_decision(u, spec);
    for (std::size_t i = 0; i < 3; ++i) CHECK(back[i] == doctest::Approx(x[i]));
}

TEST_CASE("budget reserve is exact under concurrency") {
    mop::EvaluationBudget budget(1000);
    std::vector<std::thread> threads;
    std::atomic<std::size_t> granted{0};
    for (int t = 0; t < 8; ++t) {
        threads.emplace_back([&] {
            for (int i = 0; i < 300; ++i) granted += budget.reserve(1 + i % 3);
        });
    }
    for (auto& t : threads) t.join();
    CHECK(granted.load() == 1000);
    CHECK(budget.used() == 1000);
    CHECK(budget.exhausted());
    budget.refund(10);
    CHECK(budget.remaining() == 10);
}

TEST_CASE("evaluate stops at the budget and flags exhaustion") {
    const auto zdt1 = problems::make_problem("zdt1", 5, 2);
    mop::Population pop;
    for (int i = 0; i < 7; ++i) pop.members.emplace_back(std::vector<double>(5, 0.1 * i));
    mop::EvaluationBudget budget(4);
    const auto out = mop::evaluate(pop, *zdt1, budget);
    CHECK(out.performed == 4);
    CHECK(out.exhausted);
    CHECK(mop::evaluated_prefix(out.population).size() == 4);
    CHECK_FALSE(out.population[4].evaluated());
}

TEST_CASE("ZDT values at hand-computed points") {
    problems::ZdtProblem zdt1(1, 30), zdt2(2, 30), zdt6(6, 10);
    std::vector<double> x(30, 0.0);
    x[0] = 0.25;
    auto f = zdt1.objectives(x);
    CHECK(f[0] == doctest::Approx(0.25));
    CHECK(f[1] == doctest::Approx(0.5));
    f = zdt2.objectives(x);
    CHECK(f[1] == doctest::Approx(1.0 - 0.0625));

    // g = 1 + 9 * (sum x_i / 29) with every tail variable at 1 -> g = 10.
    std::fill(x.begin() + 1, x.end(), 1.0);
    f = zdt1.objectives(x);
    CHECK(f[1] == doctest::Approx(10.0 * (1.0 - std::sqrt(0.025))));

    std::vector<double> y(10, 0.0);
    f = zdt6.objectives(y);
    CHECK(f[0] == doctest::Approx(1.0));
    CHECK(f[1] == doctest::Approx(0.0));
}

TEST_CASE("ZDT4 bounds and registry errors") {
    const auto zdt4 = problems::make_problem("zdt4", 10, 2);
    CHECK(zdt4->spec().lower()[1] == -5.0);
    CHECK(zdt4->spec().upper()[0] == 1.0);
    CHECK_THROWS_AS((void)problems::make_problem("zdt1", 10, 3), ConfigError);
    CHECK_THROWS_AS((void)problems::make_problem("dtlz9", 10, 3), ConfigError);
    CHECK_THROWS_AS((void)zdt4->evaluate(std::vector<double>(10, 7.0)), ContractViolation);
}

TEST_CASE("LSMOP group sizes cover the distance variables") {
    for (int v = 1; v <= 9; ++v) {
        for (std::size_t m : {2u, 3u, 5u}) {
            problems::LsmopProblem p(v, 100, m);
            const auto& g = p.group_sizes();
            CHECK(g.size() == m);
            CHECK(std::accumulate(g.begin(), g.end(), std::size_t{0}) * problems::LsmopProblem::kSubcomponents
                  <= 100 - (m - 1));
        }
    }
}

TEST_CASE("LSMOP1 linked zero points lie on the linear front") {
    problems::LsmopProblem p(1, 60, 3);
    oracle::Rng rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 20; ++i) {
        const std::vector<double> pos{u(rng), u(rng)};
        const auto f = p.objectives(p.linked_zero_point(pos));
        CHECK(f[0] + f[1] + f[2] == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("reference fronts are non-dominated and sized") {
    for (const char* name : {"zdt1", "zdt2", "zdt3", "zdt6", "lsmop1", "lsmop5", "lsmop9"}) {
        const auto p = problems::make_problem(name, 30, 2);
        const auto front = problems::sample_reference_front(*p, 200);
        CHECK_MESSAGE(front.size() == 200, name);
        CHECK(problems::nondominated_subset(front).size() == front.size());
    }
    const auto syn = problems::make_problem("synthetic", 5, 2);
    CHECK_THROWS_AS((void)problems::sample_reference_front(*syn, 10), Unsupported);
}

TEST_CASE("synthetic shift family moves a tight cluster") {
    problems::SyntheticShiftFamily fam(6, 2, 0.1, 0.02);
    oracle::Rng rng(5);
    const auto [x, y] = fam.sample(rng, 12);
    REQUIRE(x.size() == 12);
    REQUIRE(y.size() == 12);
    for (std::size_t i = 0; i < 12; ++i) {
        CHECK(y[i].evaluated());
        for (std::size_t j = 0; j < 6; ++j) CHECK(y[i].x[j] == doctest::Approx(x[i].x[j] + 0.1));
    }
}

TEST_CASE("landscape functions vanish at their minimizers") {
    const std::vector<double> zero(7, 0.0), one(7, 1.0);
    CHECK(problems::landscape::sphere(zero) == 0.0);
    CHECK(problems::landscape::rastrigin(zero) == doctest::Approx(0.0));
    CHECK(problems::landscape::griewank(zero) == doctest::Approx(0.0));
    CHECK(problems::landscape::ackley(zero) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(problems::landscape::rosenbrock(one) == doctest::Approx(0.0));
}

TEST_CASE("IGD fixtures") {
    CHECK(metrics::igd({{0.5, 0.5}}, std::vector<mop::ObjectiveVector>{{0.5, 0.5}}).value == 0.0);
    CHECK(metrics::igd({{0.0, 0.0}}, std::vector<mop::ObjectiveVector>{{1.0, 0.0}}).value ==
          doctest::Approx(1.0));
    CHECK(metrics::igd({{0.0, 0.0}}, std::vector<mop::ObjectiveVector>{{3.0, 4.0}}).value ==
          doctest::Approx(5.0));
    CHECK_THROWS_AS((void)metrics::igd({{0.0}}, std::vector<mop::ObjectiveVector>{}), EmptySet);
}

TEST_CASE("IGD matches the definition and only counts feasible members") {
    oracle::Rng rng(8);
    for (int i = 0; i < 50; ++i) {
        const auto ref = oracle::random_points(rng, 20, 3);
        const auto sol = oracle::random_points(rng, 1 + i % 9, 3);
        CHECK(metrics::igd(ref, sol).value == doctest::Approx(oracle::igd(ref, sol)).epsilon(1e-12));
    }
    mop::Population pop;
    pop.members.emplace_back(std::vector<double>{0.0}, std::vector<double>{0.0, 0.0}, 1.0);
    pop.members.emplace_back(std::vector<double>{0.0}, std::vector<double>{3.0, 4.0}, 0.0);
    CHECK(metrics::igd({{0.0, 0.0}}, pop).value == doctest::Approx(5.0));
}

TEST_CASE("rank sum against the enumeration oracle") {
    const std::vector<double> a{1, 2, 3}, b{4, 5, 6};
    const auto r = metrics::wilcoxon_rank_sum(a, b);
    CHECK(r.exact);
    CHECK(r.p_value == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(r.decision == metrics::Decision::Indifferent);

    oracle::Rng rng(21);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 40; ++t) {
        std::vector<double> x(3 + t % 5), y(3 + t % 4);
        for (auto& v : x) v = u(rng);
        for (auto& v : y) v = u(rng) + 0.3;
        CHECK(metrics::rank_sum_exact_p(x, y) ==
              doctest::Approx(oracle::rank_sum_exact_p(x, y)).epsilon(1e-12));
    }
}

TEST_CASE("rank sum decision points toward the lower sample") {
    std::vector<double> low, high;
    for (int i = 0; i < 10; ++i) {
        low.push_back(i);
        high.push_back(100 + i);
    }
    CHECK(metrics::wilcoxon_rank_sum(low, high).decision == metrics::Decision::Better);
    CHECK(metrics::wilcoxon_rank_sum(high, low).decision == metrics::Decision::Worse);
    const std::vector<double> same(5, 1.0);
    CHECK(metrics::wilcoxon_rank_sum(same, same).p_value == 1.0);
    CHECK_THROWS_AS((void)metrics::wilcoxon_rank_sum(std::vector<double>{1, 2}, same),
                    ContractViolation);
}

TEST_CASE("median and formatting") {
    CHECK(metrics::median({3, 1, 2}) == 2.0);
    CHECK(metrics::median({4, 1, 2, 3}) == 2.5);
    CHECK(std::isnan(metrics::median({})));
    CHECK(metrics::format_sci3(0.655) == "6.55e-01");
    CHECK(metrics::format_sci3(7.82) == "7.82e+00");
    CHECK(metrics::roc_percent(7.82, 0.655) == doctest::Approx(91.624).epsilon(1e-4));
}

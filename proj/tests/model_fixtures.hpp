#pragma once

#include <random>

#include "pet/model.hpp"
#include "pet/mop.hpp"
#include "pet/problems.hpp"

namespace fixture {

inline pet::model::PetConfig toy_config() {
    pet::model::PetConfig c;
    c.d_hat = 8;
    c.m_hat = 3;
    c.width = 16;
    c.layers = 2;
    c.heads = 2;
    c.max_seq = 6;
    return c;
}

/// n evaluated members of the synthetic problem on the unit box.
inline pet::mop::Population synthetic_population(std::mt19937_64& rng, std::size_t n,
                                                 std::size_t d, std::size_t m) {
    pet::problems::SyntheticProblem problem(d, m);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    pet::mop::Population pop;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> x(d);
        for (auto& v : x) v = u(rng);
        auto f = problem.evaluate(x).f;
        pop.members.emplace_back(std::move(x), std::move(f));
    }
    return pop;
}

/// Leading rows of a population.
inline pet::mop::Population head(const pet::mop::Population& pop, std::size_t first,
                                 std::size_t count) {
    pet::mop::Population out;
    out.members.assign(pop.members.begin() + static_cast<long>(first),
                       pop.members.begin() + static_cast<long>(first + count));
    return out;
}

/// Teacher-forced MSE built on the caller's tape: predictions for targets
/// 1..N-1 against their normalized decisions, first d columns.
inline pet::nn::Var teacher_forced_mse(pet::nn::Tape& tape, pet::model::PetModel& model,
                                       const pet::mop::Population& parents,
                                       const pet::mop::Population& ordered,
                                       const pet::mop::ProblemSpec& spec) {
    auto pred = model.teacher_forced_predictions(tape, parents, ordered, spec);
    const auto target = model.decision_tokens(head(ordered, 1, ordered.size() - 1), spec);
    return pet::nn::masked_mse(pred, target, spec.d());
}

}  // namespace fixture

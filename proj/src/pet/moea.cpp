#include "pet/moea.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pet/error.hpp"
#include "pet/metrics.hpp"

namespace pet::moea {
namespace {

void require_evaluated(const mop::Population& pop) {
    if (!pop.all_evaluated()) throw ContractViolation("population has unevaluated members");
}

bool ranked_better(const RankedPopulation& r, std::size_t a, std::size_t b) {
    const auto ra = r.partition.rank[a];
    const auto rb = r.partition.rank[b];
    if (ra != rb) return ra < rb;
    if (r.crowding[a] != r.crowding[b]) return r.crowding[a] > r.crowding[b];
    return a < b;
}

}  // namespace

FrontPartition fast_nondominated_sort(const mop::Population& pop) {
    require_evaluated(pop);
    const std::size_t n = pop.size();
    const bool constrained = pop.any_infeasible();
    auto dom = [&](std::size_t a, std::size_t b) {
        return constrained ? mop::constrained_dominates(pop[a], pop[b])
                           : mop::dominates(pop[a], pop[b]);
    };

    FrontPartition out;
    out.rank.assign(n, 0);
    std::vector<std::vector<std::size_t>> dominated(n);
    std::vector<std::size_t> counter(n, 0);
    std::vector<std::size_t> current;
    for (std::size_t p = 0; p < n; ++p) {
        for (std::size_t q = p + 1; q < n; ++q) {
            if (dom(p, q)) {
                dominated[p].push_back(q);
                ++counter[q];
            } else if (dom(q, p)) {
                dominated[q].push_back(p);
                ++counter[p];
            }
        }
    }
    for (std::size_t p = 0; p < n; ++p) {
        if (counter[p] == 0) current.push_back(p);
    }
    std::size_t level = 0;
    while (!current.empty()) {
        std::vector<std::size_t> next;
        for (std::size_t p : current) {
            out.rank[p] = level;
            for (std::size_t q : dominated[p]) {
                if (--counter[q] == 0) next.push_back(q);
            }
        }
        std::sort(next.begin(), next.end());
        out.fronts.push_back(std::move(current));
        current = std::move(next);
        ++level;
    }
    return out;
}

std::vector<double> crowding_distance(const mop::Population& pop,
                                      const std::vector<std::size_t>& front) {
    const std::size_t k = front.size();
    std::vector<double> dist(k, 0.0);
    if (k == 0) return dist;
    if (k <= 2) {
        std::fill(dist.begin(), dist.end(), kInfinity);
        return dist;
    }
    const std::size_t m = pop[front[0]].objectives().size();
    std::vector<std::size_t> order(k);
    for (std::size_t obj = 0; obj < m; ++obj) {
        std::iota(order.begin(), order.end(), 0);
        auto value = [&](std::size_t i) { return (*pop[front[i]].f)[obj]; };
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return value(a) < value(b); });
        dist[order.front()] = kInfinity;
        dist[order.back()] = kInfinity;
        const double range = value(order.back()) - value(order.front());
        if (range <= 0.0) continue;
        for (std::size_t i = 1; i + 1 < k; ++i) {
            if (std::isinf(dist[order[i]])) continue;
            dist[order[i]] += (value(order[i + 1]) - value(order[i - 1])) / range;
        }
    }
    return dist;
}

RankedPopulation rank_population(const mop::Population& pop) {
    RankedPopulation r;
    r.partition = fast_nondominated_sort(pop);
    r.crowding.assign(pop.size(), 0.0);
    for (const auto& front : r.partition.fronts) {
        const auto cd = crowding_distance(pop, front);
        for (std::size_t i = 0; i < front.size(); ++i) r.crowding[front[i]] = cd[i];
    }
    return r;
}

std::vector<std::size_t> selection_order(const mop::Population& pop) {
    const auto ranked = rank_population(pop);
    std::vector<std::size_t> idx(pop.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return ranked_better(ranked, a, b); });
    return idx;
}

mop::Population nsga2_select(const mop::Population& pop, std::size_t n) {
    if (n > pop.size()) throw ContractViolation("cannot select more members than available");
    const auto ranked = rank_population(pop);
    std::vector<std::size_t> chosen;
    chosen.reserve(n);
    for (const auto& front : ranked.partition.fronts) {
        if (chosen.size() == n) break;
        if (chosen.size() + front.size() <= n) {
            chosen.insert(chosen.end(), front.begin(), front.end());
            continue;
        }
        std::vector<std::size_t> last = front;
        std::sort(last.begin(), last.end(), [&](std::size_t a, std::size_t b) {
            if (ranked.crowding[a] != ranked.crowding[b])
                return ranked.crowding[a] > ranked.crowding[b];
            return a < b;
        });
        last.resize(n - chosen.size());
        chosen.insert(chosen.end(), last.begin(), last.end());
    }
    std::sort(chosen.begin(), chosen.end());
    mop::Population out;
    out.generation = pop.generation;
    out.members.reserve(n);
    for (std::size_t i : chosen) out.members.push_back(pop[i]);
    return out;
}

void VariationConfig::validate() const {
    if (!(sbx_eta > 0.0) || !(pm_eta > 0.0))
        throw ConfigError("distribution indices must be positive");
    if (sbx_prob < 0.0 || sbx_prob > 1.0) throw ConfigError("sbx_prob must lie in [0,1]");
    if (pm_prob && (*pm_prob < 0.0 || *pm_prob > 1.0))
        throw ConfigError("pm_prob must lie in [0,1]");
}

std::pair<mop::DecisionVector, mop::DecisionVector> sbx_crossover(const mop::DecisionVector& a,
                                                                  const mop::DecisionVector& b,
                                                                  const mop::ProblemSpec& spec,
                                                                  const VariationConfig& cfg,
                                                                  Rng& rng) {
    if (a.size() != b.size() || a.size() != spec.d())
        throw ContractViolation("crossover parents differ in dimension");
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    mop::DecisionVector c1 = a;
    mop::DecisionVector c2 = b;
    if (u01(rng) > cfg.sbx_prob) return {c1, c2};
    const double expo = 1.0 / (cfg.sbx_eta + 1.0);
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (u01(rng) > 0.5 || std::abs(a[i] - b[i]) <= 1e-14) continue;
        const double u = u01(rng);
        const double beta =
            u <= 0.5 ? std::pow(2.0 * u, expo) : std::pow(1.0 / (2.0 * (1.0 - u)), expo);
        c1[i] = 0.5 * ((1.0 + beta) * a[i] + (1.0 - beta) * b[i]);
        c2[i] = 0.5 * ((1.0 - beta) * a[i] + (1.0 + beta) * b[i]);
        if (u01(rng) < 0.5) std::swap(c1[i], c2[i]);
    }
    mop::clamp_to_bounds(c1, spec);
    mop::clamp_to_bounds(c2, spec);
    return {std::move(c1), std::move(c2)};
}

mop::DecisionVector polynomial_mutation(const mop::DecisionVector& x, const mop::ProblemSpec& spec,
                                        const VariationConfig& cfg, Rng& rng) {
    if (x.size() != spec.d()) throw ContractViolation("mutation input has wrong dimension");
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const double prob = cfg.mutation_probability(x.size());
    const double expo = 1.0 / (cfg.pm_eta + 1.0);
    mop::DecisionVector y = x;
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (prob <= 0.0 || u01(rng) >= prob) continue;
        const double lo = spec.lower()[i];
        const double hi = spec.upper()[i];
        const double width = hi - lo;
        const double d1 = (y[i] - lo) / width;
        const double d2 = (hi - y[i]) / width;
        const double r = u01(rng);
        double dq = 0.0;
        if (r < 0.5) {
            const double v = 2.0 * r + (1.0 - 2.0 * r) * std::pow(1.0 - d1, cfg.pm_eta + 1.0);
            dq = std::pow(v, expo) - 1.0;
        } else {
            const double v =
                2.0 * (1.0 - r) + 2.0 * (r - 0.5) * std::pow(1.0 - d2, cfg.pm_eta + 1.0);
            dq = 1.0 - std::pow(v, expo);
        }
        y[i] += dq * width;
    }
    mop::clamp_to_bounds(y, spec);
    return y;
}

std::size_t binary_tournament(const RankedPopulation& ranked, Rng& rng) {
    const std::size_t n = ranked.partition.rank.size();
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    const std::size_t a = pick(rng);
    const std::size_t b = pick(rng);
    return ranked_better(ranked, a, b) ? a : b;
}

mop::Population make_offspring(const mop::Population& parents, const mop::ProblemSpec& spec,
                               const VariationConfig& cfg, Rng& rng) {
    const auto ranked = rank_population(parents);
    const std::size_t n = parents.size();
    mop::Population out;
    out.generation = parents.generation + 1;
    out.members.reserve(n + 1);
    while (out.members.size() < n) {
        const auto& p1 = parents[binary_tournament(ranked, rng)];
        const auto& p2 = parents[binary_tournament(ranked, rng)];
        auto [c1, c2] = sbx_crossover(p1.x, p2.x, spec, cfg, rng);
        out.members.emplace_back(polynomial_mutation(c1, spec, cfg, rng));
        out.members.emplace_back(polynomial_mutation(c2, spec, cfg, rng));
    }
    out.members.resize(n);
    return out;
}

mop::Population cso_step(const mop::Population& pop, const mop::ProblemSpec& spec, Rng& rng,
                         const CsoConfig& cfg) {
    require_evaluated(pop);
    const std::size_t n = pop.size();
    mop::Population out = pop;
    out.generation = pop.generation + 1;
    if (n < 2) return out;

    const auto ranked = rank_population(pop);
    const bool constrained = pop.any_infeasible();
    const std::size_t d = spec.d();
    std::vector<double> mean(d, 0.0);
    for (const auto& s : pop.members)
        for (std::size_t i = 0; i < d; ++i) mean[i] += s.x[i] / static_cast<double>(n);

    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    for (std::size_t k = 0; k + 1 < n; k += 2) {
        std::size_t a = perm[k];
        std::size_t b = perm[k + 1];
        auto dom = [&](std::size_t p, std::size_t q) {
            return constrained ? mop::constrained_dominates(pop[p], pop[q])
                               : mop::dominates(pop[p], pop[q]);
        };
        bool a_wins;
        if (dom(a, b)) {
            a_wins = true;
        } else if (dom(b, a)) {
            a_wins = false;
        } else if (ranked.crowding[a] != ranked.crowding[b]) {
            a_wins = ranked.crowding[a] > ranked.crowding[b];
        } else {
            a_wins = a < b;
        }
        const std::size_t w = a_wins ? a : b;
        const std::size_t l = a_wins ? b : a;
        const auto& xw = pop[w].x;
        const auto& xl = pop[l].x;
        mop::DecisionVector moved(d);
        bool changed = false;
        for (std::size_t i = 0; i < d; ++i) {
            const double r1 = u01(rng);
            const double r2 = u01(rng);
            moved[i] = xl[i] + r1 * (xw[i] - xl[i]) + cfg.phi * r2 * (mean[i] - xl[i]);
            changed = changed || moved[i] != xl[i];
        }
        if (!changed) continue;
        mop::clamp_to_bounds(moved, spec);
        out.members[l] = mop::Solution(std::move(moved));
    }
    return out;
}

mop::DecisionVector random_decision(const mop::ProblemSpec& spec, Rng& rng) {
    mop::DecisionVector x(spec.d());
    for (std::size_t i = 0; i < x.size(); ++i) {
        std::uniform_real_distribution<double> u(spec.lower()[i], spec.upper()[i]);
        x[i] = u(rng);
    }
    return x;
}

mop::Population random_population(const mop::ProblemSpec& spec, std::size_t n, Rng& rng) {
    mop::Population pop;
    pop.members.reserve(n);
    for (std::size_t k = 0; k < n; ++k) pop.members.emplace_back(random_decision(spec, rng));
    return pop;
}

const char* to_string(Teacher t) noexcept {
    return t == Teacher::Nsga2 ? "nsga2" : "cso";
}

Teacher teacher_from_string(const std::string& s) {
    if (s == "nsga2" || s == "nsga-ii") return Teacher::Nsga2;
    if (s == "cso") return Teacher::Cso;
    throw ConfigError("unknown teacher '" + s + "'");
}

RunResult run_nsga2(const mop::Problem& problem, const RunOptions& opts, Rng& rng) {
    const auto& spec = problem.spec();
    const std::size_t n = opts.population_size;
    if (n < 2) throw ConfigError("population size must be at least 2");
    opts.variation.validate();
    mop::EvaluationBudget budget(opts.evaluations);

    RunResult result;
    auto init = mop::evaluate(random_population(spec, n, rng), problem, budget);
    mop::Population parents = mop::evaluated_prefix(init.population);
    auto log_generation = [&](std::size_t g, std::size_t offspring) {
        GenerationLog entry;
        entry.generation = g;
        entry.evaluations = budget.used();
        entry.offspring = offspring;
        if (opts.reference_front && !parents.empty()) {
            try {
                entry.igd = metrics::igd(*opts.reference_front, parents).value;
            } catch (const EmptySet&) {
            }
        }
        result.log.push_back(entry);
    };
    log_generation(0, parents.size());
    if (init.exhausted || parents.size() < n) {
        result.final_population = parents;
        result.evaluations = budget.used();
        return result;
    }

    std::optional<mop::Population> previous;
    std::size_t g = 0;
    while (!budget.exhausted()) {
        mop::Population offspring;
        if (opts.teacher == Teacher::Nsga2) {
            offspring = make_offspring(parents, spec, opts.variation, rng);
        } else {
            auto moved = cso_step(parents, spec, rng);
            offspring.members.reserve(n);
            for (const auto& s : moved.members) {
                offspring.members.emplace_back(polynomial_mutation(s.x, spec, opts.variation, rng));
            }
        }
        auto evaluated = mop::evaluate(offspring, problem, budget);
        const auto children = mop::evaluated_prefix(evaluated.population);
        ++g;
        parents = nsga2_select(parents.merged(children), n);
        parents.generation = g;
        if (opts.sink && previous) {
            opts.sink->append(GenerationPair{*previous, parents, g - 1});
        }
        previous = parents;
        log_generation(g, children.size());
        if (evaluated.exhausted) break;
    }
    result.final_population = parents;
    result.evaluations = budget.used();
    return result;
}

}  // namespace pet::moea

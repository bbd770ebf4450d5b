#include "pet/mop.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "pet/error.hpp"

namespace pet::mop {

Solution::Solution(DecisionVector x_, ObjectiveVector f_, double cv_)
    : x(std::move(x_)), f(std::move(f_)), cv(cv_) {
    if (cv_ < 0.0) throw ContractViolation("constraint violation must be non-negative");
}

const ObjectiveVector& Solution::objectives() const {
    if (!f) throw ContractViolation("solution is not evaluated");
    return *f;
}

double Solution::violation() const {
    if (!cv) throw ContractViolation("solution has no constraint violation value");
    return *cv;
}

bool Population::all_evaluated() const noexcept {
    return std::all_of(members.begin(), members.end(),
                       [](const Solution& s) { return s.evaluated(); });
}

bool Population::any_infeasible() const noexcept {
    return std::any_of(members.begin(), members.end(),
                       [](const Solution& s) { return s.cv && *s.cv > 0.0; });
}

Population Population::merged(const Population& other) const {
    Population out = *this;
    out.members.insert(out.members.end(), other.members.begin(), other.members.end());
    return out;
}

ProblemSpec::ProblemSpec(std::string name, std::size_t d, std::size_t m,
                         std::vector<double> lower, std::vector<double> upper,
                         std::size_t n_constraints)
    : name_(std::move(name)),
      d_(d),
      m_(m),
      lower_(std::move(lower)),
      upper_(std::move(upper)),
      n_constraints_(n_constraints) {
    if (d_ == 0) throw ConfigError("problem dimension d must be positive");
    if (m_ < 2) throw ConfigError("problem must have at least two objectives");
    if (lower_.size() != d_ || upper_.size() != d_)
        throw ConfigError("bound vectors must have length d");
    for (std::size_t i = 0; i < d_; ++i) {
        if (!std::isfinite(lower_[i]) || !std::isfinite(upper_[i]) || !(lower_[i] < upper_[i])) {
            std::ostringstream os;
            os << "invalid bounds at index " << i << ": [" << lower_[i] << ", " << upper_[i] << "]";
            throw ConfigError(os.str());
        }
    }
}

ProblemSpec ProblemSpec::unit_box(std::string name, std::size_t d, std::size_t m) {
    return ProblemSpec(std::move(name), d, m, std::vector<double>(d, 0.0),
                       std::vector<double>(d, 1.0));
}

bool ProblemSpec::contains(std::span<const double> x) const noexcept {
    if (x.size() != d_) return false;
    for (std::size_t i = 0; i < d_; ++i) {
        if (!std::isfinite(x[i]) || x[i] < lower_[i] || x[i] > upper_[i]) return false;
    }
    return true;
}

void ProblemSpec::check_decision(std::span<const double> x) const {
    if (x.size() != d_) {
        std::ostringstream os;
        os << name_ << ": decision vector has length " << x.size() << ", expected " << d_;
        throw ContractViolation(os.str());
    }
    for (std::size_t i = 0; i < d_; ++i) {
        if (!std::isfinite(x[i]) || x[i] < lower_[i] || x[i] > upper_[i]) {
            std::ostringstream os;
            os << name_ << ": decision component " << i << " = " << x[i] << " outside ["
               << lower_[i] << ", " << upper_[i] << "]";
            throw ContractViolation(os.str());
        }
    }
}

EvaluationBudget::EvaluationBudget(std::size_t total) : total_(total) {
    if (total == 0) throw ConfigError("evaluation budget must be positive");
}

std::size_t EvaluationBudget::reserve(std::size_t want) noexcept {
    std::size_t cur = used_.load();
    for (;;) {
        const std::size_t grant = std::min(want, total_ - cur);
        if (grant == 0) return 0;
        if (used_.compare_exchange_weak(cur, cur + grant)) return grant;
    }
}

void EvaluationBudget::refund(std::size_t n) noexcept { used_.fetch_sub(n); }

bool dominates(std::span<const double> fa, std::span<const double> fb) noexcept {
    bool strictly = false;
    for (std::size_t i = 0; i < fa.size(); ++i) {
        if (fa[i] > fb[i]) return false;
        if (fa[i] < fb[i]) strictly = true;
    }
    return strictly;
}

bool dominates(const Solution& a, const Solution& b) {
    const auto& fa = a.objectives();
    const auto& fb = b.objectives();
    if (fa.size() != fb.size()) throw ContractViolation("objective vectors differ in length");
    return dominates(std::span<const double>(fa), std::span<const double>(fb));
}

bool constrained_dominates(const Solution& a, const Solution& b) {
    const double ca = a.violation();
    const double cb = b.violation();
    if (ca == 0.0 && cb > 0.0) return true;
    if (ca > 0.0 && cb == 0.0) return false;
    if (ca > 0.0 && cb > 0.0) return ca < cb;
    return dominates(a, b);
}

double aggregate_violation(std::span<const double> inequality,
                           std::span<const double> equality) noexcept {
    double cv = 0.0;
    for (double g : inequality) cv += std::max(0.0, g);
    for (double h : equality) {
        const double a = std::abs(h);
        if (a > kEqualityTolerance) cv += a;
    }
    return cv;
}

std::vector<double> normalize_decision(std::span<const double> x, const ProblemSpec& spec) {
    if (x.size() != spec.d()) throw ContractViolation("decision vector length differs from d");
    std::vector<double> u(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        u[i] = (x[i] - spec.lower()[i]) / (spec.upper()[i] - spec.lower()[i]);
    }
    return u;
}

std::vector<double> denormalize_decision(std::span<const double> u, const ProblemSpec& spec) {
    if (u.size() != spec.d()) throw ContractViolation("decision vector length differs from d");
    std::vector<double> x(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
        x[i] = spec.lower()[i] + u[i] * (spec.upper()[i] - spec.lower()[i]);
    }
    clamp_to_bounds(x, spec);
    return x;
}

void clamp_to_bounds(std::vector<double>& x, const ProblemSpec& spec) noexcept {
    for (std::size_t i = 0; i < x.size() && i < spec.d(); ++i) {
        x[i] = std::clamp(x[i], spec.lower()[i], spec.upper()[i]);
    }
}

Solution evaluate_solution(const Problem& problem, DecisionVector x) {
    const auto& spec = problem.spec();
    spec.check_decision(x);
    Evaluation e = problem.evaluate(x);
    if (e.f.size() != spec.m()) {
        throw ContractViolation(spec.name() + ": evaluation returned wrong objective count");
    }
    for (double v : e.f) {
        if (std::isnan(v)) throw NumericError(spec.name() + ": objective evaluated to NaN");
    }
    for (double v : e.inequality) {
        if (std::isnan(v)) throw NumericError(spec.name() + ": constraint evaluated to NaN");
    }
    for (double v : e.equality) {
        if (std::isnan(v)) throw NumericError(spec.name() + ": constraint evaluated to NaN");
    }
    const double cv = aggregate_violation(e.inequality, e.equality);
    return Solution(std::move(x), std::move(e.f), cv);
}

EvaluationOutcome evaluate(const Population& pop, const Problem& problem,
                           EvaluationBudget& budget) {
    EvaluationOutcome out;
    out.population = pop;
    for (auto& s : out.population.members) {
        if (s.evaluated()) continue;
        if (budget.reserve(1) == 0) {
            out.exhausted = true;
            break;
        }
        try {
            s = evaluate_solution(problem, s.x);
        } catch (...) {
            budget.refund(1);
            throw;
        }
        ++out.performed;
    }
    return out;
}

Population evaluated_prefix(const Population& pop) {
    Population out;
    out.generation = pop.generation;
    for (const auto& s : pop.members) {
        if (s.evaluated()) out.members.push_back(s);
    }
    return out;
}

}  // namespace pet::mop

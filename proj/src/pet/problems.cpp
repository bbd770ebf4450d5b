#include "pet/problems.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

#include "pet/error.hpp"

namespace pet::problems {
namespace {

constexpr double kPi = std::numbers::pi;

mop::ProblemSpec zdt_spec(int variant, std::size_t d) {
    if (variant != 1 && variant != 2 && variant != 3 && variant != 4 && variant != 6) {
        throw ConfigError("unsupported ZDT variant " + std::to_string(variant));
    }
    if (d < 2) throw ConfigError("ZDT problems need d >= 2");
    std::vector<double> lower(d, 0.0);
    std::vector<double> upper(d, 1.0);
    if (variant == 4) {
        for (std::size_t i = 1; i < d; ++i) {
            lower[i] = -5.0;
            upper[i] = 5.0;
        }
    }
    return mop::ProblemSpec("zdt" + std::to_string(variant), d, 2, std::move(lower),
                            std::move(upper));
}

mop::ProblemSpec lsmop_spec(int variant, std::size_t d, std::size_t m) {
    if (variant < 1 || variant > 9) throw ConfigError("unsupported LSMOP variant");
    if (m < 2 || m > 10) throw ConfigError("LSMOP supports 2 to 10 objectives");
    if (d < m) throw ConfigError("LSMOP needs d >= m");
    std::vector<double> lower(d, 0.0);
    std::vector<double> upper(d, 10.0);
    for (std::size_t i = 0; i + 1 < m; ++i) upper[i] = 1.0;
    return mop::ProblemSpec("lsmop" + std::to_string(variant), d, m, std::move(lower),
                            std::move(upper));
}

using Landscape = double (*)(std::span<const double>) noexcept;

struct LsmopDefinition {
    Landscape odd;   // objectives 1, 3, 5, ... (1-based)
    Landscape even;  // objectives 2, 4, 6, ...
    bool nonlinear_linkage;
    FrontShape shape;
};

LsmopDefinition lsmop_definition(int variant) {
    using namespace landscape;
    switch (variant) {
        case 1: return {sphere, sphere, false, FrontShape::Linear};
        case 2: return {griewank, schwefel, false, FrontShape::Linear};
        case 3: return {rastrigin, rosenbrock, false, FrontShape::Linear};
        case 4: return {ackley, griewank, false, FrontShape::Linear};
        case 5: return {sphere, sphere, true, FrontShape::Spherical};
        case 6: return {rosenbrock, schwefel, true, FrontShape::Spherical};
        case 7: return {ackley, rosenbrock, true, FrontShape::Spherical};
        case 8: return {griewank, sphere, true, FrontShape::Spherical};
        case 9: return {sphere, ackley, true, FrontShape::Disconnected};
        default: throw ConfigError("unsupported LSMOP variant");
    }
}

double linkage_factor(bool nonlinear, std::size_t one_based_index, std::size_t d) {
    const double r = static_cast<double>(one_based_index) / static_cast<double>(d);
    return nonlinear ? 1.0 + std::cos(0.5 * kPi * r) : 1.0 + r;
}

std::size_t binomial(std::size_t n, std::size_t k) {
    if (k > n) return 0;
    k = std::min(k, n - k);
    std::size_t r = 1;
    for (std::size_t i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

// All points on the unit simplex with coordinates in multiples of 1/h.
void simplex_lattice(std::size_t m, std::size_t h, std::vector<double>& cur,
                     std::size_t left, std::vector<mop::ObjectiveVector>& out) {
    if (cur.size() + 1 == m) {
        cur.push_back(static_cast<double>(left) / static_cast<double>(h));
        out.push_back(cur);
        cur.pop_back();
        return;
    }
    for (std::size_t k = 0; k <= left; ++k) {
        cur.push_back(static_cast<double>(k) / static_cast<double>(h));
        simplex_lattice(m, h, cur, left - k, out);
        cur.pop_back();
    }
}

// Evenly spaced pick of n items out of a list.
std::vector<mop::ObjectiveVector> pick_evenly(const std::vector<mop::ObjectiveVector>& pts,
                                              std::size_t n) {
    if (pts.size() < n) throw ContractViolation("not enough candidate front points");
    std::vector<mop::ObjectiveVector> out;
    out.reserve(n);
    if (n == 1) {
        out.push_back(pts.front());
        return out;
    }
    const double step = static_cast<double>(pts.size() - 1) / static_cast<double>(n - 1);
    for (std::size_t i = 0; i < n; ++i) {
        out.push_back(pts[static_cast<std::size_t>(std::llround(step * static_cast<double>(i)))]);
    }
    return out;
}

std::vector<mop::ObjectiveVector> simplex_points(std::size_t m, std::size_t n) {
    if (m == 2) {
        std::vector<mop::ObjectiveVector> out;
        for (std::size_t i = 0; i < n; ++i) {
            const double t = n == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(n - 1);
            out.push_back({t, 1.0 - t});
        }
        return out;
    }
    std::size_t h = 1;
    while (binomial(h + m - 1, m - 1) < n) ++h;
    std::vector<mop::ObjectiveVector> all;
    std::vector<double> cur;
    simplex_lattice(m, h, cur, h, all);
    return pick_evenly(all, n);
}

double radical_inverse(std::size_t i, std::size_t base) {
    double f = 1.0;
    double r = 0.0;
    while (i > 0) {
        f /= static_cast<double>(base);
        r += f * static_cast<double>(i % base);
        i /= base;
    }
    return r;
}

// Oversamples a front parameterized over [0,1]^k, filters to the
// non-dominated subset and picks n of them evenly.
template <typename Map>
std::vector<mop::ObjectiveVector> filtered_front(std::size_t k, std::size_t n, Map map) {
    static constexpr std::size_t kPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29};
    std::size_t candidates = std::max<std::size_t>(4 * n, 64);
    for (;;) {
        std::vector<mop::ObjectiveVector> pts;
        pts.reserve(candidates);
        for (std::size_t i = 0; i < candidates; ++i) {
            std::vector<double> t(k);
            if (k == 1) {
                t[0] = static_cast<double>(i) / static_cast<double>(candidates - 1);
            } else {
                for (std::size_t j = 0; j < k; ++j) t[j] = radical_inverse(i + 1, kPrimes[j]);
            }
            pts.push_back(map(t));
        }
        auto nd = nondominated_subset(pts);
        if (nd.size() >= n) {
            std::sort(nd.begin(), nd.end());
            return pick_evenly(nd, n);
        }
        candidates *= 2;
    }
}

// Left end of the ZDT6 front: min over x of 1 - exp(-4x) sin^6(6 pi x).
constexpr double kZdt6MinF1 = 0.2807753191;

}  // namespace

namespace landscape {

double sphere(std::span<const double> x) noexcept {
    double s = 0.0;
    for (double v : x) s += v * v;
    return s;
}

double schwefel(std::span<const double> x) noexcept {
    double s = 0.0;
    for (double v : x) s = std::max(s, std::abs(v));
    return s;
}

double rosenbrock(std::span<const double> x) noexcept {
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < x.size(); ++i) {
        const double a = x[i] * x[i] - x[i + 1];
        const double b = x[i] - 1.0;
        s += 100.0 * a * a + b * b;
    }
    return s;
}

double rastrigin(std::span<const double> x) noexcept {
    double s = 0.0;
    for (double v : x) s += v * v - 10.0 * std::cos(2.0 * kPi * v) + 10.0;
    return s;
}

double griewank(std::span<const double> x) noexcept {
    double s = 0.0;
    double p = 1.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        s += x[i] * x[i];
        p *= std::cos(x[i] / std::sqrt(static_cast<double>(i + 1)));
    }
    return 1.0 + s / 4000.0 - p;
}

double ackley(std::span<const double> x) noexcept {
    if (x.empty()) return 0.0;
    const double n = static_cast<double>(x.size());
    double sq = 0.0;
    double cs = 0.0;
    for (double v : x) {
        sq += v * v;
        cs += std::cos(2.0 * kPi * v);
    }
    return 20.0 - 20.0 * std::exp(-0.2 * std::sqrt(sq / n)) - std::exp(cs / n) + std::numbers::e;
}

}  // namespace landscape

// ---------------------------------------------------------------- ZDT

ZdtProblem::ZdtProblem(int variant, std::size_t d)
    : variant_(variant), spec_(zdt_spec(variant, d)) {}

mop::ObjectiveVector ZdtProblem::objectives(std::span<const double> x) const {
    const std::size_t d = x.size();
    const double tail = static_cast<double>(d - 1);
    double f1 = x[0];
    double g = 0.0;
    switch (variant_) {
        case 1:
        case 2:
        case 3: {
            double s = 0.0;
            for (std::size_t i = 1; i < d; ++i) s += x[i];
            g = 1.0 + 9.0 * s / tail;
            break;
        }
        case 4: {
            double s = 0.0;
            for (std::size_t i = 1; i < d; ++i) s += x[i] * x[i] - 10.0 * std::cos(4.0 * kPi * x[i]);
            g = 1.0 + 10.0 * tail + s;
            break;
        }
        case 6: {
            double s = 0.0;
            for (std::size_t i = 1; i < d; ++i) s += x[i];
            f1 = 1.0 - std::exp(-4.0 * x[0]) * std::pow(std::sin(6.0 * kPi * x[0]), 6);
            g = 1.0 + 9.0 * std::pow(s / tail, 0.25);
            break;
        }
        default: break;
    }
    const double r = f1 / g;
    double f2 = 0.0;
    switch (variant_) {
        case 1:
        case 4: f2 = g * (1.0 - std::sqrt(r)); break;
        case 2:
        case 6: f2 = g * (1.0 - r * r); break;
        case 3: f2 = g * (1.0 - std::sqrt(r) - r * std::sin(10.0 * kPi * f1)); break;
        default: break;
    }
    return {f1, f2};
}

mop::Evaluation ZdtProblem::evaluate(std::span<const double> x) const {
    spec_.check_decision(x);
    return {objectives(x), {}, {}};
}

// ---------------------------------------------------------------- LSMOP

LsmopProblem::LsmopProblem(int variant, std::size_t d, std::size_t m)
    : variant_(variant), spec_(lsmop_spec(variant, d, m)) {
    std::vector<double> c(m);
    c[0] = 3.8 * 0.1 * (1.0 - 0.1);
    for (std::size_t i = 1; i < m; ++i) c[i] = 3.8 * c[i - 1] * (1.0 - c[i - 1]);
    const double total = std::accumulate(c.begin(), c.end(), 0.0);
    const double distance_vars = static_cast<double>(d - m + 1);
    sublen_.resize(m);
    offset_.resize(m);
    std::size_t acc = 0;
    for (std::size_t i = 0; i < m; ++i) {
        sublen_[i] = static_cast<std::size_t>(
            std::floor(c[i] / total * distance_vars / static_cast<double>(kSubcomponents)));
        if (sublen_[i] == 0) {
            std::ostringstream os;
            os << "lsmop" << variant << ": d = " << d << " is too small for m = " << m
               << " (every objective needs at least " << kSubcomponents
               << " distance variables)";
            throw ConfigError(os.str());
        }
        offset_[i] = acc;
        acc += sublen_[i] * kSubcomponents;
    }
}

FrontShape LsmopProblem::front_shape() const noexcept { return lsmop_definition(variant_).shape; }

mop::ObjectiveVector LsmopProblem::objectives(std::span<const double> x_in) const {
    const auto def = lsmop_definition(variant_);
    const std::size_t d = spec_.d();
    const std::size_t m = spec_.m();
    std::vector<double> x(x_in.begin(), x_in.end());
    for (std::size_t i = m - 1; i < d; ++i) {
        x[i] = linkage_factor(def.nonlinear_linkage, i + 1, d) * x[i] - 10.0 * x[0];
    }
    std::vector<double> g(m, 0.0);
    for (std::size_t o = 0; o < m; ++o) {
        const Landscape fn = (o % 2 == 0) ? def.odd : def.even;
        double s = 0.0;
        for (std::size_t j = 0; j < kSubcomponents; ++j) {
            const std::size_t start = offset_[o] + (m - 1) + j * sublen_[o];
            s += fn(std::span<const double>(x.data() + start, sublen_[o]));
        }
        g[o] = s / static_cast<double>(sublen_[o]) / static_cast<double>(kSubcomponents);
    }

    mop::ObjectiveVector f(m);
    switch (def.shape) {
        case FrontShape::Linear:
            for (std::size_t o = 0; o < m; ++o) {
                double v = 1.0 + g[o];
                for (std::size_t k = 0; k + o + 1 < m; ++k) v *= x[k];
                if (o > 0) v *= 1.0 - x[m - 1 - o];
                f[o] = v;
            }
            break;
        case FrontShape::Spherical:
            for (std::size_t o = 0; o < m; ++o) {
                double v = 1.0 + g[o] + (o + 1 < m ? g[o + 1] : 0.0);
                for (std::size_t k = 0; k + o + 1 < m; ++k) v *= std::cos(0.5 * kPi * x[k]);
                if (o > 0) v *= std::sin(0.5 * kPi * x[m - 1 - o]);
                f[o] = v;
            }
            break;
        case FrontShape::Disconnected: {
            const double gs = 1.0 + std::accumulate(g.begin(), g.end(), 0.0);
            double h = static_cast<double>(m);
            for (std::size_t o = 0; o + 1 < m; ++o) {
                f[o] = x[o];
                h -= f[o] / gs * (1.0 + std::sin(3.0 * kPi * f[o]));
            }
            f[m - 1] = gs * h;
            break;
        }
    }
    return f;
}

mop::Evaluation LsmopProblem::evaluate(std::span<const double> x) const {
    spec_.check_decision(x);
    return {objectives(x), {}, {}};
}

mop::DecisionVector LsmopProblem::linked_zero_point(std::span<const double> position) const {
    const std::size_t d = spec_.d();
    const std::size_t m = spec_.m();
    if (position.size() != m - 1) throw ContractViolation("expected m-1 position variables");
    const bool nonlinear = lsmop_definition(variant_).nonlinear_linkage;
    mop::DecisionVector x(d);
    for (std::size_t i = 0; i + 1 < m; ++i) x[i] = position[i];
    for (std::size_t i = m - 1; i < d; ++i) {
        x[i] = 10.0 * x[0] / linkage_factor(nonlinear, i + 1, d);
    }
    mop::clamp_to_bounds(x, spec_);
    return x;
}

// ---------------------------------------------------------------- synthetic

SyntheticProblem::SyntheticProblem(std::size_t d, std::size_t m)
    : spec_(mop::ProblemSpec::unit_box("synthetic", d, m)) {}

mop::Evaluation SyntheticProblem::evaluate(std::span<const double> x) const {
    spec_.check_decision(x);
    const std::size_t m = spec_.m();
    mop::ObjectiveVector f(m, 0.0);
    for (std::size_t k = 0; k < m; ++k) {
        const double anchor = static_cast<double>(k) / static_cast<double>(m - 1);
        double s = 0.0;
        for (double v : x) s += (v - anchor) * (v - anchor);
        f[k] = s / static_cast<double>(x.size());
    }
    return {std::move(f), {}, {}};
}

SyntheticShiftFamily::SyntheticShiftFamily(std::size_t d, std::size_t m, double shift,
                                           double jitter)
    : problem_(d, m), shift_(d, shift), jitter_(jitter) {}

mop::Population SyntheticShiftFamily::shifted(const mop::Population& pop) const {
    mop::Population out;
    out.generation = pop.generation + 1;
    for (const auto& s : pop.members) {
        mop::DecisionVector x = s.x;
        for (std::size_t i = 0; i < x.size(); ++i) x[i] += shift_[i];
        mop::clamp_to_bounds(x, problem_.spec());
        out.members.push_back(mop::evaluate_solution(problem_, std::move(x)));
    }
    return out;
}

std::pair<mop::Population, mop::Population> SyntheticShiftFamily::sample(std::mt19937_64& rng,
                                                                         std::size_t n) const {
    const std::size_t d = problem_.spec().d();
    std::uniform_real_distribution<double> center_dist(0.2, 0.7);
    std::uniform_real_distribution<double> jitter_dist(-jitter_, jitter_);
    std::vector<double> center(d);
    for (auto& c : center) c = center_dist(rng);
    mop::Population parents;
    for (std::size_t k = 0; k < n; ++k) {
        mop::DecisionVector x(d);
        for (std::size_t i = 0; i < d; ++i) x[i] = center[i] + jitter_dist(rng);
        mop::clamp_to_bounds(x, problem_.spec());
        parents.members.push_back(mop::evaluate_solution(problem_, std::move(x)));
    }
    auto next = shifted(parents);
    return {std::move(parents), std::move(next)};
}

// ---------------------------------------------------------------- registry

std::shared_ptr<const mop::Problem> make_problem(const std::string& name, std::size_t d,
                                                 std::size_t m) {
    std::string n = name;
    std::transform(n.begin(), n.end(), n.begin(), [](unsigned char c) { return std::tolower(c); });
    auto variant_of = [&](std::size_t prefix) -> int {
        const std::string tail = n.substr(prefix);
        if (tail.empty() || !std::all_of(tail.begin(), tail.end(), ::isdigit)) {
            throw ConfigError("unknown problem '" + name + "'");
        }
        return std::stoi(tail);
    };
    if (n.rfind("zdt", 0) == 0) {
        if (m != 2) throw ConfigError("ZDT problems have exactly two objectives");
        return std::make_shared<ZdtProblem>(variant_of(3), d);
    }
    if (n.rfind("lsmop", 0) == 0) return std::make_shared<LsmopProblem>(variant_of(5), d, m);
    if (n == "synthetic") return std::make_shared<SyntheticProblem>(d, m);
    throw ConfigError("unknown problem '" + name + "'");
}

std::vector<std::string> registered_names() {
    std::vector<std::string> out = {"zdt1", "zdt2", "zdt3", "zdt4", "zdt6"};
    for (int i = 1; i <= 9; ++i) out.push_back("lsmop" + std::to_string(i));
    out.push_back("synthetic");
    return out;
}

std::size_t default_front_size(std::size_t m) noexcept { return m == 2 ? 1000 : 5000; }

std::vector<mop::ObjectiveVector> nondominated_subset(
    const std::vector<mop::ObjectiveVector>& points) {
    std::vector<mop::ObjectiveVector> out;
    if (points.empty()) return out;
    const std::size_t m = points.front().size();
    if (m == 2) {
        std::vector<std::size_t> idx(points.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
            return points[a] < points[b];
        });
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i : idx) {
            if (points[i][1] < best) {
                out.push_back(points[i]);
                best = points[i][1];
            }
        }
        return out;
    }
    for (std::size_t i = 0; i < points.size(); ++i) {
        bool keep = true;
        for (std::size_t j = 0; j < points.size() && keep; ++j) {
            if (j == i) continue;
            if (mop::dominates(std::span<const double>(points[j]), std::span<const double>(points[i])))
                keep = false;
            else if (j < i && points[j] == points[i])
                keep = false;
        }
        if (keep) out.push_back(points[i]);
    }
    return out;
}

std::vector<mop::ObjectiveVector> sample_reference_front(const mop::Problem& problem,
                                                         std::size_t n) {
    if (n == 0) throw ContractViolation("reference front size must be positive");
    auto param = [n](std::size_t i) {
        return n == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(n - 1);
    };
    if (const auto* zdt = dynamic_cast<const ZdtProblem*>(&problem)) {
        std::vector<mop::ObjectiveVector> out;
        switch (zdt->variant()) {
            case 1:
            case 4:
                // evenly spaced in f2 = 1 - sqrt(f1)
                for (std::size_t i = 0; i < n; ++i) {
                    const double t = param(i);
                    out.push_back({t * t, 1.0 - t});
                }
                return out;
            case 2:
                for (std::size_t i = 0; i < n; ++i) {
                    const double t = param(i);
                    out.push_back({t, 1.0 - t * t});
                }
                return out;
            case 6:
                for (std::size_t i = 0; i < n; ++i) {
                    const double f1 = kZdt6MinF1 + (1.0 - kZdt6MinF1) * param(i);
                    out.push_back({f1, 1.0 - f1 * f1});
                }
                return out;
            case 3: {
                static constexpr double kSegments[5][2] = {{0.0, 0.0830015349},
                                                           {0.1822287280, 0.2577623634},
                                                           {0.4093136748, 0.4538821041},
                                                           {0.6183967944, 0.6525117038},
                                                           {0.8233317983, 0.8518328654}};
                double total = 0.0;
                for (const auto& s : kSegments) total += s[1] - s[0];
                return filtered_front(1, n, [&](const std::vector<double>& t) {
                    double pos = t[0] * total;
                    double f1 = kSegments[4][1];
                    for (const auto& s : kSegments) {
                        const double len = s[1] - s[0];
                        if (pos <= len) {
                            f1 = s[0] + pos;
                            break;
                        }
                        pos -= len;
                    }
                    return mop::ObjectiveVector{
                        f1, 1.0 - std::sqrt(f1) - f1 * std::sin(10.0 * kPi * f1)};
                });
            }
            default: break;
        }
    }
    if (const auto* ls = dynamic_cast<const LsmopProblem*>(&problem)) {
        const std::size_t m = ls->spec().m();
        switch (ls->front_shape()) {
            case FrontShape::Linear: return simplex_points(m, n);
            case FrontShape::Spherical: {
                auto pts = simplex_points(m, n);
                for (auto& p : pts) {
                    double norm = 0.0;
                    for (double v : p) norm += v * v;
                    norm = std::sqrt(norm);
                    for (double& v : p) v /= norm;
                }
                return pts;
            }
            case FrontShape::Disconnected:
                return filtered_front(m - 1, n, [m](const std::vector<double>& t) {
                    mop::ObjectiveVector f(m);
                    double h = static_cast<double>(m);
                    for (std::size_t o = 0; o + 1 < m; ++o) {
                        f[o] = t[o];
                        h -= t[o] * (1.0 + std::sin(3.0 * kPi * t[o]));
                    }
                    f[m - 1] = h;
                    return f;
                });
        }
    }
    throw Unsupported("no analytic Pareto front for problem '" + problem.spec().name() + "'");
}

}  // namespace pet::problems

#include "pet/pet.h"

#include <cmath>
#include <cstring>
#include <fstream>
#include <json.hpp>
#include <limits>
#include <memory>
#include <string>

#include "pet/error.hpp"
#include "pet/harness.hpp"
#include "pet/metrics.hpp"
#include "pet/model.hpp"
#include "pet/pipeline.hpp"
#include "pet/problems.hpp"

struct pet_problem {
    std::shared_ptr<const pet::mop::Problem> impl;
};

struct pet_model {
    pet::model::PetModel impl;
};

namespace {

using nlohmann::json;

thread_local std::string g_last_error;

pet_status fail(pet_status s, const std::string& msg) {
    g_last_error = msg;
    return s;
}

template <class Fn>
pet_status guarded(Fn&& fn) {
    try {
        g_last_error.clear();
        fn();
        return PET_OK;
    } catch (const pet::ContractViolation& e) {
        return fail(PET_ERR_ARGUMENT, e.what());
    } catch (const pet::ShapeError& e) {
        return fail(PET_ERR_SHAPE, e.what());
    } catch (const pet::ConfigError& e) {
        return fail(PET_ERR_CONFIG, e.what());
    } catch (const pet::CapacityError& e) {
        return fail(PET_ERR_CAPACITY, e.what());
    } catch (const pet::DataError& e) {
        return fail(PET_ERR_DATA, e.what());
    } catch (const pet::IoError& e) {
        return fail(PET_ERR_IO, e.what());
    } catch (const pet::Unsupported& e) {
        return fail(PET_ERR_UNSUPPORTED, e.what());
    } catch (const pet::NumericError& e) {
        return fail(PET_ERR_NUMERIC, e.what());
    } catch (const pet::EmptySet& e) {
        return fail(PET_ERR_EMPTY, e.what());
    } catch (const json::exception& e) {
        return fail(PET_ERR_CONFIG, std::string("invalid JSON: ") + e.what());
    } catch (const std::exception& e) {
        return fail(PET_ERR_INTERNAL, e.what());
    } catch (...) {
        return fail(PET_ERR_INTERNAL, "unknown failure");
    }
}

void require(bool ok, const char* what) {
    if (!ok) throw pet::ContractViolation(what);
}

json parse_object(const char* text) {
    if (!text || !*text) return json::object();
    json j = json::parse(text);
    if (!j.is_object()) throw pet::ConfigError("configuration must be a JSON object");
    return j;
}

std::vector<pet::mop::ObjectiveVector> rows(const double* data, std::size_t n, std::size_t m) {
    std::vector<pet::mop::ObjectiveVector> out(n, pet::mop::ObjectiveVector(m));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < m; ++k) out[i][k] = data[i * m + k];
    return out;
}

}  // namespace

extern "C" {

const char* pet_version(void) { return "0.1.0"; }

const char* pet_status_name(pet_status s) {
    switch (s) {
        case PET_OK: return "ok";
        case PET_ERR_ARGUMENT: return "argument";
        case PET_ERR_SHAPE: return "shape";
        case PET_ERR_CONFIG: return "config";
        case PET_ERR_CAPACITY: return "capacity";
        case PET_ERR_DATA: return "data";
        case PET_ERR_IO: return "io";
        case PET_ERR_UNSUPPORTED: return "unsupported";
        case PET_ERR_NUMERIC: return "numeric";
        case PET_ERR_EMPTY: return "empty";
        case PET_ERR_BUFFER: return "buffer";
        case PET_ERR_INTERNAL: return "internal";
    }
    return "unknown";
}

const char* pet_last_error(void) { return g_last_error.c_str(); }

pet_status pet_problem_create(const char* name, size_t d, size_t m, pet_problem** out) {
    return guarded([&] {
        require(name && out, "null argument");
        *out = new pet_problem{pet::problems::make_problem(name, d, m)};
    });
}

void pet_problem_destroy(pet_problem* problem) { delete problem; }

pet_status pet_problem_dims(const pet_problem* problem, size_t* d, size_t* m) {
    return guarded([&] {
        require(problem && d && m, "null argument");
        *d = problem->impl->spec().d();
        *m = problem->impl->spec().m();
    });
}

pet_status pet_problem_bounds(const pet_problem* problem, double* lower, double* upper) {
    return guarded([&] {
        require(problem && lower && upper, "null argument");
        const auto& spec = problem->impl->spec();
        std::copy(spec.lower().begin(), spec.lower().end(), lower);
        std::copy(spec.upper().begin(), spec.upper().end(), upper);
    });
}

pet_status pet_problem_evaluate(const pet_problem* problem, const double* x, double* f, double* cv) {
    return guarded([&] {
        require(problem && x && f, "null argument");
        const auto& spec = problem->impl->spec();
        auto s = pet::mop::evaluate_solution(*problem->impl, pet::mop::DecisionVector(x, x + spec.d()));
        std::copy(s.f->begin(), s.f->end(), f);
        if (cv) *cv = s.cv.value_or(0.0);
    });
}

pet_status pet_problem_front(const pet_problem* problem, size_t n, double* out) {
    return guarded([&] {
        require(problem && out, "null argument");
        const auto front = pet::problems::sample_reference_front(*problem->impl, n);
        const std::size_t m = problem->impl->spec().m();
        for (std::size_t i = 0; i < front.size(); ++i)
            std::copy(front[i].begin(), front[i].end(), out + i * m);
    });
}

pet_status pet_igd(const double* reference, size_t n_reference, const double* solutions,
                   size_t n_solutions, size_t m, double* out) {
    return guarded([&] {
        require(out && m > 0, "null argument or zero objective count");
        require(reference || n_reference == 0, "null reference set");
        require(solutions || n_solutions == 0, "null solution set");
        *out = pet::metrics::igd(rows(reference, n_reference, m), rows(solutions, n_solutions, m)).value;
    });
}

pet_status pet_rank_sum(const double* a, size_t na, const double* b, size_t nb, double alpha,
                        double* p_value, double* statistic, int* decision) {
    return guarded([&] {
        require(a && b && p_value, "null argument");
        const auto r = pet::metrics::wilcoxon_rank_sum(std::span<const double>(a, na),
                                                       std::span<const double>(b, nb), alpha);
        *p_value = r.p_value;
        if (statistic) *statistic = r.statistic;
        if (decision) {
            *decision = r.decision == pet::metrics::Decision::Better  ? 1
                        : r.decision == pet::metrics::Decision::Worse ? -1
                                                                      : 0;
        }
    });
}

pet_status pet_model_create(const char* config_json, uint64_t seed, pet_model** out) {
    return guarded([&] {
        require(out, "null argument");
        const auto cfg = config_json ? pet::model::PetConfig::from_json(config_json)
                                     : pet::model::PetConfig{};
        *out = new pet_model{pet::model::PetModel(cfg, seed)};
    });
}

pet_status pet_model_load(const char* path, pet_model** out) {
    return guarded([&] {
        require(path && out, "null argument");
        *out = new pet_model{pet::model::PetModel::load(path)};
    });
}

pet_status pet_model_save(const pet_model* model, const char* path) {
    return guarded([&] {
        require(model && path, "null argument");
        model->impl.save(path);
    });
}

pet_status pet_model_parameter_count(const pet_model* model, size_t* out) {
    return guarded([&] {
        require(model && out, "null argument");
        *out = model->impl.parameter_count();
    });
}

pet_status pet_model_config(const pet_model* model, char* buffer, size_t capacity, size_t* needed) {
    if (!model) return fail(PET_ERR_ARGUMENT, "null argument");
    const std::string text = model->impl.config().to_json();
    if (needed) *needed = text.size() + 1;
    if (!buffer || capacity < text.size() + 1)
        return fail(PET_ERR_BUFFER, "config needs " + std::to_string(text.size() + 1) + " bytes");
    std::memcpy(buffer, text.c_str(), text.size() + 1);
    g_last_error.clear();
    return PET_OK;
}

void pet_model_destroy(pet_model* model) { delete model; }

pet_status pet_collect(const char* config_json, const char* out_path, size_t* pairs) {
    return guarded([&] {
        require(config_json && out_path, "null argument");
        const json j = parse_object(config_json);
        pet::pipeline::CollectConfig c;
        for (const auto& p : j.at("problems")) {
            c.problems.push_back({p.at("name").get<std::string>(), p.at("d").get<std::size_t>(),
                                  p.value("m", std::size_t{2})});
        }
        if (j.contains("teachers")) {
            c.teachers.clear();
            for (const auto& t : j.at("teachers"))
                c.teachers.push_back(pet::moea::teacher_from_string(t.get<std::string>()));
        }
        c.seeds = j.value("seeds", c.seeds);
        c.population = j.value("population", c.population);
        c.evaluations = j.value("evaluations", c.evaluations);
        c.master_seed = j.value("master_seed", c.master_seed);
        c.workers = j.value("workers", c.workers);
        const auto ds = pet::pipeline::collect_trajectories(c);
        ds.save(out_path);
        if (pairs) *pairs = ds.pairs.size();
    });
}

pet_status pet_pretrain(pet_model* model, const char* dataset_path, const char* config_json,
                        pet_loss_callback callback, void* user) {
    return guarded([&] {
        require(model && dataset_path, "null argument");
        const json j = parse_object(config_json);
        pet::pipeline::PretrainConfig c;
        c.steps = j.value("steps", c.steps);
        c.batch_size = j.value("batch_size", c.batch_size);
        c.adam.lr = j.value("lr", c.adam.lr);
        c.adam.beta1 = j.value("beta1", c.adam.beta1);
        c.adam.beta2 = j.value("beta2", c.adam.beta2);
        c.adam.weight_decay = j.value("weight_decay", c.adam.weight_decay);
        c.seed = j.value("seed", c.seed);
        c.eval_every = j.value("eval_every", c.eval_every);
        const auto ds = pet::pipeline::TrajectoryDataset::load(dataset_path);
        (void)pet::pipeline::pretrain(ds, model->impl, c, [&](const pet::pipeline::LossPoint& p) {
            if (callback) callback(p.step, p.loss, user);
        });
    });
}

pet_status pet_optimize(pet_model* model, const pet_problem* problem, const char* options_json,
                        uint64_t seed, const char* log_path, double* igd, size_t* evaluations) {
    return guarded([&] {
        require(model && problem, "null argument");
        const json j = parse_object(options_json);
        pet::pipeline::PetRunOptions o;
        o.population_size = j.value("population", o.population_size);
        o.evaluations = j.value("evaluations", o.evaluations);
        if (j.contains("fine_evolve")) {
            const auto& f = j.at("fine_evolve");
            o.fine.enabled = f.value("enabled", o.fine.enabled);
            o.fine.steps_per_generation = f.value("steps_per_generation", o.fine.steps_per_generation);
            o.fine.lr = f.value("lr", o.fine.lr);
        }
        std::vector<pet::mop::ObjectiveVector> front;
        try {
            front = pet::problems::sample_reference_front(
                *problem->impl, pet::problems::default_front_size(problem->impl->spec().m()));
            o.reference_front = &front;
        } catch (const pet::Unsupported&) {
        }
        pet::moea::Rng rng(seed);
        const auto res = pet::pipeline::run_nsga2_pet(*problem->impl, model->impl, o, rng);
        double value = std::numeric_limits<double>::quiet_NaN();
        if (!front.empty()) {
            try {
                value = pet::metrics::igd(front, res.final_population).value;
            } catch (const pet::EmptySet&) {
            }
        }
        if (igd) *igd = value;
        if (evaluations) *evaluations = res.evaluations;
        if (log_path && *log_path) {
            std::ofstream os(log_path, std::ios::trunc);
            if (!os) throw pet::IoError(std::string("cannot open '") + log_path + "' for writing");
            for (const auto& g : res.log) {
                json e{{"event", "generation"}, {"generation", g.generation},
                       {"evaluations", g.evaluations}, {"offspring", g.offspring}};
                e["igd"] = g.igd ? json(*g.igd) : json(nullptr);
                e["loss"] = g.loss ? json(*g.loss) : json(nullptr);
                os << e.dump() << '\n';
            }
            json done{{"event", "final"}, {"evaluations", res.evaluations}};
            done["igd"] = std::isfinite(value) ? json(value) : json(nullptr);
            os << done.dump() << '\n';
        }
    });
}

pet_status pet_benchmark(const char* config_json, const char* out_dir, const pet_model* model) {
    return guarded([&] {
        require(config_json && out_dir, "null argument");
        const auto cfg = pet::harness::ExperimentConfig::from_json(config_json);
        const auto result = pet::harness::run_benchmark(cfg, model ? &model->impl : nullptr);
        pet::harness::emit_report(result, out_dir);
    });
}

pet_status pet_selftest(pet_selftest_callback callback, void* user, int* all_passed) {
    return guarded([&] {
        bool ok = true;
        for (const auto& c : pet::harness::selftest()) {
            ok = ok && c.passed;
            if (callback) callback(c.name.c_str(), c.passed ? 1 : 0, c.detail.c_str(), user);
        }
        if (all_passed) *all_passed = ok ? 1 : 0;
    });
}

}  // extern "C"

/*
 * C interface to the PET library: problems, metrics, the pre-evolved
 * transformer, and the collect / pretrain / optimize / benchmark pipeline.
 *
 * Every function returns a pet_status. On failure the thread-local message
 * from pet_last_error() describes the cause. Handles are opaque and owned
 * by the caller; release them with the matching *_destroy function.
 * Configuration objects are passed as JSON strings.
 */
#ifndef PET_PET_H
#define PET_PET_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define PET_API __declspec(dllexport)
#else
#define PET_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum pet_status {
    PET_OK = 0,
    PET_ERR_ARGUMENT = 1,    /* null pointer or violated precondition */
    PET_ERR_SHAPE = 2,
    PET_ERR_CONFIG = 3,
    PET_ERR_CAPACITY = 4,    /* input exceeds model capacity */
    PET_ERR_DATA = 5,        /* malformed dataset or checkpoint */
    PET_ERR_IO = 6,
    PET_ERR_UNSUPPORTED = 7,
    PET_ERR_NUMERIC = 8,
    PET_ERR_EMPTY = 9,       /* e.g. IGD of an empty solution set */
    PET_ERR_BUFFER = 10,     /* output buffer too small */
    PET_ERR_INTERNAL = 11
} pet_status;

typedef struct pet_problem pet_problem;
typedef struct pet_model pet_model;

PET_API const char* pet_version(void);
PET_API const char* pet_status_name(pet_status status);
/* Message of the last failure on the calling thread ("" if none). */
PET_API const char* pet_last_error(void);

/* ---- problems ---------------------------------------------------------- */

/* name: "zdt1".."zdt6" (not zdt5), "lsmop1".."lsmop9", "synthetic". */
PET_API pet_status pet_problem_create(const char* name, size_t d, size_t m, pet_problem** out);
PET_API void pet_problem_destroy(pet_problem* problem);
PET_API pet_status pet_problem_dims(const pet_problem* problem, size_t* d, size_t* m);
/* lower and upper each receive d values. */
PET_API pet_status pet_problem_bounds(const pet_problem* problem, double* lower, double* upper);
/* x has d values; f receives m values; cv (optional) the aggregate violation. */
PET_API pet_status pet_problem_evaluate(const pet_problem* problem, const double* x, double* f,
                                        double* cv);
/* n reference-front points written row-major into out (n * m values). */
PET_API pet_status pet_problem_front(const pet_problem* problem, size_t n, double* out);

/* ---- metrics ------------------------------------------------------------- */

/* Row-major point sets with m objectives each. */
PET_API pet_status pet_igd(const double* reference, size_t n_reference, const double* solutions,
                           size_t n_solutions, size_t m, double* out);
/* decision: +1 when a is significantly lower, -1 when higher, 0 otherwise. */
PET_API pet_status pet_rank_sum(const double* a, size_t na, const double* b, size_t nb,
                                double alpha, double* p_value, double* statistic, int* decision);

/* ---- model --------------------------------------------------------------- */

/* config_json may be NULL for the defaults, e.g. {"width": 64, "layers": 2}. */
PET_API pet_status pet_model_create(const char* config_json, uint64_t seed, pet_model** out);
PET_API pet_status pet_model_load(const char* path, pet_model** out);
PET_API pet_status pet_model_save(const pet_model* model, const char* path);
PET_API pet_status pet_model_parameter_count(const pet_model* model, size_t* out);
/* Writes the NUL-terminated config JSON; *needed receives the full size. */
PET_API pet_status pet_model_config(const pet_model* model, char* buffer, size_t capacity,
                                    size_t* needed);
PET_API void pet_model_destroy(pet_model* model);

/* ---- pipeline ------------------------------------------------------------ */

/* {"problems": [{"name": "zdt1", "d": 30, "m": 2}], "teachers": ["nsga2", "cso"],
 *  "seeds": 3, "population": 100, "evaluations": 10000, "master_seed": 0, "workers": 1} */
PET_API pet_status pet_collect(const char* config_json, const char* out_path, size_t* pairs);

typedef void (*pet_loss_callback)(size_t step, double loss, void* user);

/* {"steps": 200, "batch_size": 8, "lr": 1e-3, "beta1": 0.9, "beta2": 0.999,
 *  "weight_decay": 0.1, "seed": 0, "eval_every": 10} */
PET_API pet_status pet_pretrain(pet_model* model, const char* dataset_path,
                                const char* config_json, pet_loss_callback callback, void* user);

/* {"population": 100, "evaluations": 1000,
 *  "fine_evolve": {"enabled": true, "steps_per_generation": 1, "lr": 1e-4}}
 * The model is updated in place by fine-evolving. log_path (optional) gets
 * one JSON event per generation. igd is NaN when the problem has no
 * analytic front. */
PET_API pet_status pet_optimize(pet_model* model, const pet_problem* problem,
                                const char* options_json, uint64_t seed, const char* log_path,
                                double* igd, size_t* evaluations);

/* Runs an experiment config and writes the report files into out_dir.
 * model may be NULL; pet arms then load the config's "model" path. */
PET_API pet_status pet_benchmark(const char* config_json, const char* out_dir,
                                 const pet_model* model);

typedef void (*pet_selftest_callback)(const char* name, int passed, const char* detail,
                                      void* user);
PET_API pet_status pet_selftest(pet_selftest_callback callback, void* user, int* all_passed);

#ifdef __cplusplus
}
#endif

#endif

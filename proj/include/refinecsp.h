#ifndef REFINECSP_H
#define REFINECSP_H

/* C interface to the refinecsp library. Every object is an opaque handle
 * released with its *_free function. Functions that can fail return an
 * rcsp_status; on failure rcsp_last_error() describes the cause for the
 * calling thread. */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define RCSP_API __declspec(dllexport)
#else
#define RCSP_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum rcsp_status {
  RCSP_OK = 0,
  RCSP_ERR_INVALID_ARGUMENT = 1,
  RCSP_ERR_SHAPE = 2,
  RCSP_ERR_OUT_OF_RANGE = 3,
  RCSP_ERR_NUMERIC = 4,
  RCSP_ERR_IO = 5,
  RCSP_ERR_FORMAT = 6,
  RCSP_ERR_INCOMPATIBLE = 7,
  RCSP_ERR_INTERNAL = 8
} rcsp_status;

typedef struct rcsp_graph rcsp_graph;
typedef struct rcsp_instance rcsp_instance;
typedef struct rcsp_dataset rcsp_dataset;
typedef struct rcsp_model rcsp_model;

RCSP_API const char* rcsp_version(void);
/* Message of the last failed call on this thread; empty after success. */
RCSP_API const char* rcsp_last_error(void);
RCSP_API const char* rcsp_status_name(rcsp_status status);
/* Independent child seed for stream `stream` of `base`. */
RCSP_API uint64_t rcsp_derive_seed(uint64_t base, uint64_t stream);

/* ---- graphs ---- */

RCSP_API rcsp_status rcsp_graph_create(size_t vertices, rcsp_graph** out);
RCSP_API void rcsp_graph_free(rcsp_graph* graph);
RCSP_API rcsp_status rcsp_graph_add_edge(rcsp_graph* graph, size_t u, size_t v, double weight);
RCSP_API size_t rcsp_graph_vertex_count(const rcsp_graph* graph);
RCSP_API size_t rcsp_graph_edge_count(const rcsp_graph* graph);
/* Edges are stored with u < v in insertion order. */
RCSP_API rcsp_status rcsp_graph_edge(const rcsp_graph* graph, size_t index, size_t* u, size_t* v,
                                     double* weight);

RCSP_API rcsp_status rcsp_graph_erdos_renyi(size_t n, double p, uint64_t seed, rcsp_graph** out);
RCSP_API rcsp_status rcsp_graph_barabasi_albert(size_t n, size_t m_attach, uint64_t seed,
                                                rcsp_graph** out);
RCSP_API rcsp_status rcsp_graph_geometric(size_t n, double radius, uint64_t seed,
                                          rcsp_graph** out);

RCSP_API rcsp_status rcsp_graph_load_gset(const char* path, rcsp_graph** out);
RCSP_API rcsp_status rcsp_graph_save_gset(const rcsp_graph* graph, const char* path);

/* colors may be NULL; otherwise it receives one color per vertex. */
RCSP_API rcsp_status rcsp_graph_greedy_coloring(const rcsp_graph* graph, int* colors,
                                                int* colors_used);
RCSP_API rcsp_status rcsp_graph_cut_value(const rcsp_graph* graph, const int* sides, size_t n,
                                          double* cut);

/* ---- instances ---- */

/* givens: 81 cells in row-major order, 0..8 for a given digit, -1 blank. */
RCSP_API rcsp_status rcsp_instance_sudoku(const int* givens, rcsp_instance** out);
RCSP_API rcsp_status rcsp_instance_coloring(const rcsp_graph* graph, int colors,
                                            rcsp_instance** out);
RCSP_API rcsp_status rcsp_instance_nurse(int days, int shifts, int per_shift, int nurses,
                                         rcsp_instance** out);
RCSP_API rcsp_status rcsp_instance_maxcut(const rcsp_graph* graph, rcsp_instance** out);
RCSP_API void rcsp_instance_free(rcsp_instance* inst);

RCSP_API size_t rcsp_instance_variable_count(const rcsp_instance* inst);
RCSP_API int rcsp_instance_domain_size(const rcsp_instance* inst);
RCSP_API size_t rcsp_instance_constraint_count(const rcsp_instance* inst);
RCSP_API size_t rcsp_instance_fixed_count(const rcsp_instance* inst);
RCSP_API int rcsp_instance_is_maximization(const rcsp_instance* inst);

typedef struct rcsp_evaluation {
  int feasible;
  int total_violation;
  size_t satisfied;
  size_t constraints;
} rcsp_evaluation;

RCSP_API rcsp_status rcsp_instance_evaluate(const rcsp_instance* inst, const int* assignment,
                                            size_t n, rcsp_evaluation* out);

/* ---- datasets ---- */

typedef enum rcsp_problem {
  RCSP_PROBLEM_SUDOKU = 0,
  RCSP_PROBLEM_COLORING = 1,
  RCSP_PROBLEM_NURSE = 2,
  RCSP_PROBLEM_MAXCUT = 3
} rcsp_problem;

enum {
  RCSP_FAMILY_ERDOS_RENYI = 1,
  RCSP_FAMILY_BARABASI_ALBERT = 2,
  RCSP_FAMILY_GEOMETRIC = 4
};

typedef struct rcsp_coloring_params {
  size_t vertices;
  unsigned families; /* bitmask of RCSP_FAMILY_* */
  double er_p_min, er_p_max;
  int ba_m_min, ba_m_max;
  double geo_r_min, geo_r_max;
  int colors_equal_greedy; /* pose at k = k' instead of max(3, min(10, k'-1)) */
  int target_colors;       /* 0: keep any k */
} rcsp_coloring_params;

RCSP_API void rcsp_coloring_params_default(rcsp_coloring_params* params);

RCSP_API rcsp_status rcsp_dataset_generate_coloring(size_t count,
                                                    const rcsp_coloring_params* params,
                                                    uint64_t seed, rcsp_dataset** out);
RCSP_API rcsp_status rcsp_dataset_generate_nurse(size_t count, int days, int shifts,
                                                 int per_shift, int nurses, uint64_t seed,
                                                 rcsp_dataset** out);
RCSP_API rcsp_status rcsp_dataset_generate_maxcut(size_t count, size_t vertices, double edge_p,
                                                  uint64_t seed, rcsp_dataset** out);
RCSP_API rcsp_status rcsp_dataset_generate_sudoku(size_t count, int missing, uint64_t seed,
                                                  rcsp_dataset** out);
/* Directory written by rcsp_dataset_save. */
RCSP_API rcsp_status rcsp_dataset_load(const char* dir, rcsp_dataset** out);
/* Text file with one 81-character puzzle per line. */
RCSP_API rcsp_status rcsp_dataset_load_sudoku(const char* path, rcsp_dataset** out);
/* Single MAXCUT instance from a GSET file. */
RCSP_API rcsp_status rcsp_dataset_load_gset(const char* path, rcsp_dataset** out);
RCSP_API rcsp_status rcsp_dataset_save(const rcsp_dataset* ds, const char* dir);
/* Records [begin, end) as a new dataset. */
RCSP_API rcsp_status rcsp_dataset_slice(const rcsp_dataset* ds, size_t begin, size_t end,
                                        rcsp_dataset** out);
RCSP_API void rcsp_dataset_free(rcsp_dataset* ds);

RCSP_API size_t rcsp_dataset_size(const rcsp_dataset* ds);
RCSP_API rcsp_problem rcsp_dataset_problem(const rcsp_dataset* ds);
RCSP_API uint64_t rcsp_dataset_seed(const rcsp_dataset* ds);

typedef struct rcsp_record_info {
  int colors;        /* coloring: k the instance is posed with */
  int greedy_colors; /* coloring: k' from greedy coloring */
  int has_graph;
  int has_initial;
} rcsp_record_info;

RCSP_API rcsp_status rcsp_dataset_record(const rcsp_dataset* ds, size_t index,
                                         rcsp_record_info* info);
/* Copies of a record's instance and graph. */
RCSP_API rcsp_status rcsp_dataset_instance(const rcsp_dataset* ds, size_t index,
                                           rcsp_instance** out);
RCSP_API rcsp_status rcsp_dataset_graph(const rcsp_dataset* ds, size_t index, rcsp_graph** out);

/* ---- model ---- */

typedef enum rcsp_rpe { RCSP_RPE_MASKED = 0, RCSP_RPE_LEARNED = 1, RCSP_RPE_NONE = 2 } rcsp_rpe;
typedef enum rcsp_ape { RCSP_APE_NONE = 0, RCSP_APE_1D = 1, RCSP_APE_MULTI = 2 } rcsp_ape;
typedef enum rcsp_sampler { RCSP_SAMPLER_GUMBEL = 0, RCSP_SAMPLER_SOFTMAX = 1 } rcsp_sampler;

typedef struct rcsp_model_config {
  int layers;
  int heads;
  int d_model;
  int ffn_hidden; /* 0: 4 * d_model */
  int domain_size;
  double selection_p;
  rcsp_rpe rpe;
  rcsp_ape ape;
  rcsp_sampler sampler;
  double temperature;
  double dropout;
} rcsp_model_config;

RCSP_API void rcsp_model_config_default(rcsp_model_config* cfg);
RCSP_API rcsp_status rcsp_model_config_hash(const rcsp_model_config* cfg, uint64_t* hash);

RCSP_API rcsp_status rcsp_model_create(const rcsp_model_config* cfg, uint64_t seed,
                                       rcsp_model** out);
/* expected may be NULL; otherwise a differing stored config fails with
 * RCSP_ERR_INCOMPATIBLE. */
RCSP_API rcsp_status rcsp_model_load(const char* path, const rcsp_model_config* expected,
                                     rcsp_model** out);
/* Writes weights, optimizer state and the epoch counter. */
RCSP_API rcsp_status rcsp_model_save(const rcsp_model* model, const char* path);
RCSP_API void rcsp_model_free(rcsp_model* model);

RCSP_API void rcsp_model_get_config(const rcsp_model* model, rcsp_model_config* cfg);
RCSP_API size_t rcsp_model_parameter_count(const rcsp_model* model);
RCSP_API int64_t rcsp_model_epochs_done(const rcsp_model* model);
RCSP_API int64_t rcsp_model_optimizer_steps(const rcsp_model* model);

typedef enum rcsp_transform {
  RCSP_TRANSFORM_DEFAULT = -1,
  RCSP_TRANSFORM_QUADRATIC = 0,
  RCSP_TRANSFORM_IDENTITY = 1
} rcsp_transform;

typedef struct rcsp_train_config {
  int batch_size;
  int epochs;
  double learning_rate;
  double weight_decay;
  double beta1, beta2, epsilon;
  double lambda_cardinality, lambda_all_different, lambda_not_equal;
  rcsp_transform transform;
  uint64_t seed;
  double grad_clip; /* <= 0 disables clipping */
} rcsp_train_config;

RCSP_API void rcsp_train_config_default(rcsp_train_config* cfg);

typedef void (*rcsp_epoch_callback)(int epoch, double mean_loss, double elapsed_ms, void* user);

/* Continues training `model` in place from its stored epoch counter and
 * optimizer state. best_out, when non-NULL, receives the weights of the
 * lowest-loss epoch of this call. */
RCSP_API rcsp_status rcsp_model_train(rcsp_model* model, const rcsp_dataset* ds,
                                      const rcsp_train_config* cfg, rcsp_epoch_callback on_epoch,
                                      void* user, rcsp_model** best_out);

/* ---- solving ---- */

typedef struct rcsp_solve_options {
  int64_t max_iterations; /* < 0: no iteration limit */
  double time_limit_ms;   /* <= 0: no time limit */
  int pool;               /* 1: single start */
  int workers;
  uint64_t seed;
} rcsp_solve_options;

typedef struct rcsp_solve_report {
  int feasible;
  int64_t iterations;
  double elapsed_ms;
  int best_violation;
  double objective;
  int winner;
  int resamples;
} rcsp_solve_report;

RCSP_API void rcsp_solve_options_default(rcsp_solve_options* opts);

/* Random initial assignments from opts->seed. best_assignment may be NULL;
 * otherwise it holds n entries. */
RCSP_API rcsp_status rcsp_solve(const rcsp_model* model, const rcsp_instance* inst,
                                const rcsp_solve_options* opts, rcsp_solve_report* report,
                                int* best_assignment, size_t n);
/* Single start from a given assignment. */
RCSP_API rcsp_status rcsp_solve_from(const rcsp_model* model, const rcsp_instance* inst,
                                     const int* initial, size_t n,
                                     const rcsp_solve_options* opts, rcsp_solve_report* report,
                                     int* best_assignment);

/* ---- baselines and verification ---- */

typedef struct rcsp_sgd_result {
  size_t satisfied;
  size_t constraints;
  double final_loss;
} rcsp_sgd_result;

RCSP_API rcsp_status rcsp_direct_sgd(const rcsp_instance* inst, int steps, double learning_rate,
                                     uint64_t seed, rcsp_sgd_result* out);

typedef void (*rcsp_gradcheck_callback)(const char* name, size_t points,
                                        double max_relative_error, int passed, void* user);

/* failures receives the number of failing checks. */
RCSP_API rcsp_status rcsp_gradcheck(uint64_t seed, double tolerance,
                                    rcsp_gradcheck_callback on_case, void* user, int* failures);

#ifdef __cplusplus
}
#endif

#endif

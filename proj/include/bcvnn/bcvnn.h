/*
 * C interface to the bcvnn library: dropout-based Bayesian complex-valued
 * networks, configuration search and the analytical hardware cost model.
 *
 * Every function returns a bcvnn_status. On failure, bcvnn_last_error()
 * returns a message for the calling thread that stays valid until the next
 * failing call on that thread. Handles are opaque and owned by the caller;
 * release them with the matching *_free function (NULL is accepted).
 */
#ifndef BCVNN_BCVNN_H
#define BCVNN_BCVNN_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#if defined(BCVNN_BUILDING_LIBRARY)
#define BCVNN_API __declspec(dllexport)
#else
#define BCVNN_API __declspec(dllimport)
#endif
#else
#define BCVNN_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum bcvnn_status {
  BCVNN_OK = 0,
  BCVNN_ERR_INVALID_ARGUMENT = 1,
  BCVNN_ERR_SHAPE_MISMATCH = 2,
  BCVNN_ERR_IO = 3,
  BCVNN_ERR_FORMAT = 4,
  BCVNN_ERR_INFEASIBLE = 5,
  BCVNN_ERR_DIVERGENCE = 6,
  BCVNN_ERR_EVALUATOR = 7,
  BCVNN_ERR_INTERNAL = 100
} bcvnn_status;

/* Prepend a "# generated <UTC time>" line to written CSV files. */
#define BCVNN_WRITE_TIMESTAMP 1u

#define BCVNN_GENOME_MAX 256

typedef struct bcvnn_network bcvnn_network;
typedef struct bcvnn_dataset bcvnn_dataset;
typedef struct bcvnn_evaluator bcvnn_evaluator;

BCVNN_API const char* bcvnn_version(void);
BCVNN_API const char* bcvnn_last_error(void);
BCVNN_API const char* bcvnn_status_name(bcvnn_status status);

/* ---- networks ---------------------------------------------------------- */

BCVNN_API bcvnn_status bcvnn_network_load_spec(const char* path, bcvnn_network** out);
BCVNN_API bcvnn_status bcvnn_network_parse_spec(const char* json_text, bcvnn_network** out);
BCVNN_API bcvnn_status bcvnn_network_load_checkpoint(const char* dir, bcvnn_network** out);
/* Fails unless the network has been trained or loaded from a checkpoint. */
BCVNN_API bcvnn_status bcvnn_network_save_checkpoint(const bcvnn_network* net, const char* dir);
/* Overrides the part modes of the Bayesian layers, e.g. "R-B-I". */
BCVNN_API bcvnn_status bcvnn_network_set_genome(bcvnn_network* net, const char* genome);
BCVNN_API bcvnn_status bcvnn_network_genome(const bcvnn_network* net, char* buffer, size_t buffer_len);
BCVNN_API bcvnn_status bcvnn_network_bayesian_layers(const bcvnn_network* net, size_t* count);
BCVNN_API bcvnn_status bcvnn_network_classes(const bcvnn_network* net, size_t* classes);
BCVNN_API bcvnn_status bcvnn_network_has_weights(const bcvnn_network* net, int* has_weights);
BCVNN_API void bcvnn_network_free(bcvnn_network* net);

/* ---- datasets ---------------------------------------------------------- */

/* mode 0: imaginary part zero; mode 1: 2-D DFT of the image. limit 0 = all. */
BCVNN_API bcvnn_status bcvnn_dataset_load_mnist(const char* images_path, const char* labels_path, int mode,
                                                size_t offset, size_t limit, bcvnn_dataset** out);
BCVNN_API bcvnn_status bcvnn_dataset_generate(size_t classes, size_t samples_per_class, const size_t* feature_shape,
                                              size_t feature_rank, double class_separation, uint64_t seed,
                                              bcvnn_dataset** out);
/* classes 0 infers the class count from the labels. */
BCVNN_API bcvnn_status bcvnn_dataset_load(const char* prefix, size_t classes, bcvnn_dataset** out);
BCVNN_API bcvnn_status bcvnn_dataset_save(const bcvnn_dataset* data, const char* prefix);
BCVNN_API bcvnn_status bcvnn_dataset_slice(const bcvnn_dataset* data, size_t first, size_t count,
                                           bcvnn_dataset** out);
BCVNN_API bcvnn_status bcvnn_dataset_size(const bcvnn_dataset* data, size_t* size);
BCVNN_API void bcvnn_dataset_free(bcvnn_dataset* data);

/* ---- training ---------------------------------------------------------- */

typedef struct bcvnn_train_config {
  size_t epochs;
  size_t batch_size;
  double learning_rate;
  double weight_decay;
  double momentum; /* ignored when use_momentum is 0 */
  int use_momentum;
  uint64_t seed;
} bcvnn_train_config;

BCVNN_API void bcvnn_train_config_default(bcvnn_train_config* config);

/* Trains from a fresh seeded initialization and stores the weights in net.
 * trace_csv_path may be NULL. */
BCVNN_API bcvnn_status bcvnn_train(bcvnn_network* net, const bcvnn_dataset* data, const bcvnn_train_config* config,
                                   const char* trace_csv_path, unsigned flags);

/* ---- prediction -------------------------------------------------------- */

typedef struct bcvnn_eval_summary {
  double accuracy;
  double ece;
  double mean_std;
  size_t count;
} bcvnn_eval_summary;

/* MC-dropout prediction over a dataset; csv_path may be NULL. */
BCVNN_API bcvnn_status bcvnn_predict(const bcvnn_network* net, const bcvnn_dataset* data, size_t samples,
                                     uint64_t seed, size_t ece_bins, unsigned threads, const char* csv_path,
                                     unsigned flags, bcvnn_eval_summary* summary);

/* Single input of the network's input shape; mean_probs and std_probs hold
 * `classes` entries. */
BCVNN_API bcvnn_status bcvnn_predict_one(const bcvnn_network* net, const double* real, const double* imag,
                                         size_t length, size_t samples, uint64_t seed, double* mean_probs,
                                         double* std_probs, size_t classes, size_t* predicted_class);

/* ---- search ------------------------------------------------------------ */

/* Returns 0 on success. May be called from several threads when the search
 * runs with threads > 1. */
typedef int (*bcvnn_evaluate_fn)(const char* genome, void* user_data, double* accuracy, double* ece);

BCVNN_API bcvnn_status bcvnn_evaluator_from_callback(bcvnn_evaluate_fn fn, void* user_data, bcvnn_evaluator** out);
/* CSV with genome,accuracy,ece columns. */
BCVNN_API bcvnn_status bcvnn_evaluator_from_table(const char* csv_path, bcvnn_evaluator** out);
/* Trains net's spec per genome on train_data and evaluates on test_data. */
BCVNN_API bcvnn_status bcvnn_evaluator_from_training(const bcvnn_network* net, const bcvnn_dataset* train_data,
                                                     const bcvnn_dataset* test_data, const bcvnn_train_config* config,
                                                     size_t samples, uint64_t seed, size_t ece_bins,
                                                     bcvnn_evaluator** out);
BCVNN_API bcvnn_status bcvnn_evaluator_calls(const bcvnn_evaluator* evaluator, size_t* calls);
BCVNN_API void bcvnn_evaluator_free(bcvnn_evaluator* evaluator);

typedef enum bcvnn_objective {
  BCVNN_OBJECTIVE_MAX_ACC = 0,
  BCVNN_OBJECTIVE_MIN_ECE = 1,
  BCVNN_OBJECTIVE_WEIGHTED = 2
} bcvnn_objective;

typedef struct bcvnn_search_config {
  size_t genome_length;
  size_t population_size;
  double mutation_portion;
  double mutation_prob;
  double crossover_prob;
  size_t iterations;
  bcvnn_objective objective;
  double w_acc;
  double w_ece;
  int max_dropout; /* negative: unset */
  int min_dropout; /* negative: unset */
  uint64_t seed;
  unsigned threads;
} bcvnn_search_config;

BCVNN_API void bcvnn_search_config_default(bcvnn_search_config* config);

typedef struct bcvnn_record {
  char genome[BCVNN_GENOME_MAX];
  double accuracy;
  double ece;
  double fitness;
  int dropout_count;
  int feasible;
} bcvnn_record;

/* history_csv_path and pareto_csv_path may be NULL. */
BCVNN_API bcvnn_status bcvnn_search(bcvnn_evaluator* evaluator, const bcvnn_search_config* config,
                                    const char* history_csv_path, const char* pareto_csv_path, unsigned flags,
                                    bcvnn_record* best);

/* Evaluates all 3^genome_length genomes (genome_length <= 10). Uses the
 * objective and constraint fields of config. */
BCVNN_API bcvnn_status bcvnn_enumerate(bcvnn_evaluator* evaluator, const bcvnn_search_config* config,
                                       const char* csv_path, unsigned flags, bcvnn_record* best, size_t* count);

BCVNN_API bcvnn_status bcvnn_dropout_count(const char* genome, int* count);

/* ---- hardware cost model ----------------------------------------------- */

typedef enum bcvnn_scheme { BCVNN_SCHEME_LATENCY_OPT = 0, BCVNN_SCHEME_RESOURCE_OPT = 1 } bcvnn_scheme;

typedef struct bcvnn_cost {
  double latency_units;
  uint64_t engine_count;
  uint64_t mac_ops;
  uint64_t dropout_engines;
  uint64_t memory_words;
} bcvnn_cost;

/* genome NULL uses the network's current part modes; csv_path may be NULL. */
BCVNN_API bcvnn_status bcvnn_estimate(const bcvnn_network* net, const char* genome, bcvnn_scheme scheme,
                                      const char* csv_path, unsigned flags, bcvnn_cost* total);
BCVNN_API bcvnn_status bcvnn_compare_schemes(const bcvnn_network* net, const char* genome, const char* csv_path,
                                             unsigned flags, bcvnn_cost* latency_opt, bcvnn_cost* resource_opt);

#ifdef __cplusplus
}
#endif

#endif /* BCVNN_BCVNN_H */

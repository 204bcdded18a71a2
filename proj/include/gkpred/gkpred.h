#ifndef GKPRED_GKPRED_H
#define GKPRED_GKPRED_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(GKPRED_BUILDING)
#    define GKPRED_API __declspec(dllexport)
#  else
#    define GKPRED_API __declspec(dllimport)
#  endif
#else
#  define GKPRED_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Every fallible call returns a status; on failure gk_last_error() describes
 * it until the next call on the same thread. */
typedef enum gk_status {
    GK_OK = 0,
    GK_ERR_INVALID_ARGUMENT = 1,
    GK_ERR_PARSE = 2,
    GK_ERR_DATA = 3,
    GK_ERR_NUMERIC = 4,
    GK_ERR_IO = 5,
    GK_ERR_INTERNAL = 6
} gk_status;

GKPRED_API const char* gk_last_error(void);
GKPRED_API const char* gk_status_name(gk_status status);
GKPRED_API const char* gk_version(void);

typedef struct gk_cohort gk_cohort;
typedef struct gk_gram gk_gram;
typedef struct gk_model gk_model;
typedef struct gk_report gk_report;

/* ---- cohorts ---------------------------------------------------------- */

typedef enum gk_disease_kind { GK_SHORT_TERM = 0, GK_CHRONIC = 1 } gk_disease_kind;
typedef enum gk_balance { GK_BALANCED = 0, GK_IMBALANCED_70_30 = 1 } gk_balance;

typedef struct gk_cohort_spec {
    uint64_t n_cases;
    double failure_ratio;
    gk_disease_kind kind;
    double signal_strength; /* 0: labels independent of events */
    int32_t vocab_size;
    int32_t min_events;
    int32_t max_events;
    uint64_t seed;
} gk_cohort_spec;

GKPRED_API void gk_cohort_spec_init(gk_cohort_spec* spec);

/* Fills `spec` from a disease preset (uti, aom, pneumonia, cystitis, htn,
 * lipid, dm). n_cases 0 keeps the spec's current n_cases. */
GKPRED_API gk_status gk_cohort_spec_preset(gk_cohort_spec* spec, const char* preset, uint64_t n_cases);

GKPRED_API gk_status gk_cohort_generate(const gk_cohort_spec* spec, const char* name, gk_cohort** out);

/* Labels raw records with a disease rule. demographics_path may be NULL. */
GKPRED_API gk_status gk_cohort_ingest(const char* events_path, const char* demographics_path,
                                      const char* disease_path, gk_cohort** out);

/* A cohort directory holds events.tsv, demographics.tsv, disease.cfg and the
 * labels.tsv manifest. Loading relabels the events and checks the manifest. */
GKPRED_API gk_status gk_cohort_save(const gk_cohort* cohort, const char* dir);
GKPRED_API gk_status gk_cohort_load(const char* dir, gk_cohort** out);

GKPRED_API gk_status gk_cohort_rebalance(const gk_cohort* cohort, gk_balance mode, uint64_t seed, gk_cohort** out);

GKPRED_API size_t gk_cohort_size(const gk_cohort* cohort);
GKPRED_API size_t gk_cohort_failures(const gk_cohort* cohort);
GKPRED_API size_t gk_cohort_excluded(const gk_cohort* cohort);
GKPRED_API gk_status gk_cohort_case(const gk_cohort* cohort, size_t index, const char** patient_id, int* label);
/* Writes every case's patient graph as an edge listing (src, dst, weight). */
GKPRED_API gk_status gk_cohort_write_graphs(const gk_cohort* cohort, const char* path);
GKPRED_API void gk_cohort_free(gk_cohort* cohort);

/* ---- Gram matrices ---------------------------------------------------- */

typedef enum gk_kernel { GK_KERNEL_WL = 0, GK_KERNEL_TEMPORAL = 1, GK_KERNEL_VERTEX_HISTOGRAM = 2 } gk_kernel;

typedef struct gk_kernel_params {
    int32_t wl_iterations;
    double tp_alpha;
} gk_kernel_params;

GKPRED_API void gk_kernel_params_init(gk_kernel_params* params);

GKPRED_API gk_status gk_gram_compute(const gk_cohort* cohort, gk_kernel kernel, const gk_kernel_params* params,
                                     int normalize, int threads, gk_gram** out);
GKPRED_API gk_status gk_gram_save(const gk_gram* gram, const char* path);
GKPRED_API gk_status gk_gram_load(const char* path, gk_gram** out);
GKPRED_API gk_status gk_gram_write_csv(const gk_gram* gram, const char* path);
GKPRED_API size_t gk_gram_size(const gk_gram* gram);
GKPRED_API gk_kernel gk_gram_kernel(const gk_gram* gram);
GKPRED_API int gk_gram_normalized(const gk_gram* gram);
GKPRED_API gk_status gk_gram_value(const gk_gram* gram, size_t row, size_t col, double* value);
GKPRED_API gk_status gk_gram_min_eigenvalue(const gk_gram* gram, double* value);
GKPRED_API void gk_gram_free(gk_gram* gram);

/* ---- metric-learning network ------------------------------------------ */

typedef enum gk_metric { GK_EUCLIDEAN = 0, GK_COSINE = 1 } gk_metric;

typedef struct gk_net_config {
    int32_t embed_dim;
    int32_t fusion_dim;
    int32_t classifier_dim;
    double margin;
    gk_metric metric;
    double learning_rate;
    int32_t batch_size;
    int32_t max_epochs;
    int32_t patience;
    uint64_t seed;
} gk_net_config;

GKPRED_API void gk_net_config_init(gk_net_config* config);

/* grams: WL, temporal, vertex-histogram Grams of `cohort`, in that order. */
GKPRED_API gk_status gk_model_train(const gk_gram* const grams[3], const gk_cohort* cohort,
                                    const gk_net_config* config, gk_model** out);
GKPRED_API gk_status gk_model_save(const gk_model* model, const char* path);
GKPRED_API gk_status gk_model_load(const char* path, gk_model** out);
GKPRED_API gk_status gk_model_config(const gk_model* model, gk_net_config* config);
GKPRED_API gk_status gk_model_write_trace(const gk_model* model, const char* path);
GKPRED_API int gk_model_stop_epoch(const gk_model* model);

/* Scores `test` against the training cohort the model was fit on. probs and
 * labels hold gk_cohort_size(test) entries each. */
GKPRED_API gk_status gk_model_predict(const gk_model* model, const gk_cohort* train, const gk_cohort* test,
                                      const gk_kernel_params* params, int threads, double* probs, int* labels);

/* Embedding CSV with a 2D projection; test may be NULL. */
GKPRED_API gk_status gk_model_export_embeddings(const gk_model* model, const gk_cohort* train, const gk_cohort* test,
                                                const gk_kernel_params* params, int threads, const char* path);
GKPRED_API void gk_model_free(gk_model* model);

/* ---- cross-validated experiments -------------------------------------- */

enum { GK_METRIC_EUCLIDEAN = 1u, GK_METRIC_COSINE = 2u };
enum { GK_BALANCE_BALANCED = 1u, GK_BALANCE_IMBALANCED = 2u };

typedef struct gk_experiment_config {
    int32_t folds;
    uint64_t seed;
    gk_kernel_params kernels;
    gk_net_config net; /* metric and seed are set per configuration */
    uint32_t metrics;  /* GK_METRIC_* bits */
    uint32_t balances; /* GK_BALANCE_* bits */
    int baselines;
    int threads;
    const char* embedding_dir; /* NULL or empty: no export */
} gk_experiment_config;

GKPRED_API void gk_experiment_config_init(gk_experiment_config* config);
GKPRED_API gk_status gk_experiment_run(const gk_cohort* cohort, const gk_experiment_config* config,
                                       const char* title, gk_report** out);

/* Copies the JSON report into buf (NUL-terminated) when it fits; *needed
 * receives the size including the terminator. buf may be NULL. */
GKPRED_API gk_status gk_report_json(const gk_report* report, char* buf, size_t capacity, size_t* needed);
GKPRED_API gk_status gk_report_write_json(const gk_report* report, const char* path);
GKPRED_API gk_status gk_report_write_text(const gk_report* report, const char* path);

/* column: 0 accuracy, 1 macro-F1, 2 AUC. model: Euclidean, Cosine, SVM, LR. */
GKPRED_API gk_status gk_report_summary(const gk_report* report, gk_balance mode, const char* model, int column,
                                       double* mean, double* stddev);
GKPRED_API gk_status gk_report_p_value(const gk_report* report, gk_balance mode, const char* model_a,
                                       const char* model_b, int column, double* p);
GKPRED_API void gk_report_free(gk_report* report);

#ifdef __cplusplus
}
#endif

#endif

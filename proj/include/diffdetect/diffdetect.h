#ifndef DIFFDETECT_DIFFDETECT_H
#define DIFFDETECT_DIFFDETECT_H

#include <stddef.h>
#include <stdint.h>

#if defined(DIFFDETECT_BUILDING_LIBRARY)
#define DD_API __attribute__((visibility("default")))
#else
#define DD_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum dd_status {
  DD_OK = 0,
  DD_ERR_INVALID_ARGUMENT = 1,
  DD_ERR_IO = 2,
  DD_ERR_PARSE = 3,
  DD_ERR_VALIDATION = 4,
  DD_ERR_BACKEND = 5,
  DD_ERR_DIMENSION_MISMATCH = 6,
  DD_ERR_UNDEFINED = 7,
  DD_ERR_FORMAT = 8,
  DD_ERR_INTERNAL = 99
} dd_status;

DD_API const char* dd_version(void);

/* Message of the last failing call on this thread; "" after success. */
DD_API const char* dd_last_error(void);

DD_API const char* dd_status_name(dd_status status);

/* Strings returned through char** out-params are released with this. */
DD_API void dd_string_free(char* s);

/* ---- manifests ---- */

typedef struct dd_manifest dd_manifest;

typedef struct dd_split_counts {
  size_t train_real, train_generated;
  size_t val_real, val_generated;
  size_t test_real, test_generated;
} dd_split_counts;

typedef struct dd_protocol_options {
  size_t train_real;
  size_t val_real;
  size_t test_real;
  const char* const* generators; /* NULL means {"stable_diffusion"} */
  size_t n_generators;
  const char* dataset; /* NULL means "mscoco" */
  int with_categories;
} dd_protocol_options;

DD_API void dd_protocol_options_init(dd_protocol_options* options);

DD_API dd_status dd_manifest_load(const char* path, int check_paired, dd_manifest** out);
DD_API dd_status dd_manifest_synthetic(const dd_protocol_options* options, dd_manifest** out);
DD_API dd_status dd_manifest_merge(const dd_manifest* const* parts, size_t n_parts,
                                   int check_paired, dd_manifest** out);
DD_API dd_status dd_manifest_save(const dd_manifest* manifest, const char* path);
DD_API size_t dd_manifest_size(const dd_manifest* manifest);
DD_API dd_status dd_manifest_split_counts(const dd_manifest* manifest, dd_split_counts* out);
DD_API void dd_manifest_free(dd_manifest* manifest);

/* ---- embedding extraction ---- */

typedef struct dd_planted_bias {
  const char* generator; /* NULL applies to every generated sample */
  uint32_t axis;
  float magnitude;
} dd_planted_bias;

typedef struct dd_extract_options {
  const char* backbone;   /* builtin name ("stub", "clip-vit", "clip-rn50") or profile JSON */
  const char* mode;       /* "image" or "image_text" */
  const char* image_root; /* NULL means "." */
  unsigned workers;       /* 0 picks the core count */
  uint64_t stub_seed;
  const dd_planted_bias* biases;
  size_t n_biases;
  int stub_content_mode; /* stub hashes decoded inputs instead of ids */
} dd_extract_options;

DD_API void dd_extract_options_init(dd_extract_options* options);
DD_API dd_status dd_extract(const char* manifest_path, const dd_extract_options* options,
                            const char* out_path);

/* ---- training ---- */

typedef struct dd_train_options {
  const char* mode;
  uint64_t seed;
  const size_t* hidden_dims; /* NULL keeps 4096,4096,1024 */
  size_t n_hidden;
  double lr_start;
  double lr_end;
  int max_epochs;
  size_t batch_size;
  int early_stop_patience;
  int l2_normalize;
  int include_degenerate;
  const char* generator; /* restrict generated records to one generator; NULL keeps all */
  const char* history_csv; /* optional per-epoch log */
  void (*on_epoch)(int epoch, double lr, double train_loss, double val_acc, double val_auc,
                   void* user);
  void* user;
} dd_train_options;

DD_API void dd_train_options_init(dd_train_options* options);
DD_API dd_status dd_train(const char* features_path, const char* manifest_path,
                          const dd_train_options* options, const char* checkpoint_out);

DD_API dd_status dd_param_count(size_t input_dim, const size_t* hidden_dims, size_t n_hidden,
                                uint64_t* out);

typedef struct dd_model dd_model;

DD_API dd_status dd_model_load(const char* checkpoint_path, dd_model** out);
DD_API size_t dd_model_input_dim(const dd_model* model);
DD_API uint64_t dd_model_param_count(const dd_model* model);
/* x is row-major rows x input_dim; writes `rows` probabilities. */
DD_API dd_status dd_model_predict(const dd_model* model, const float* x, size_t rows,
                                  double* out);
DD_API void dd_model_free(dd_model* model);

/* ---- evaluation ---- */

typedef struct dd_eval_options {
  const char* test_generator; /* NULL scores every generated record */
  double threshold;
  const char* model_name; /* report metadata; NULL means "MLP-Base" */
  const char* dataset;
  const char* backbone;
  const char* train_generator;
} dd_eval_options;

DD_API void dd_eval_options_init(dd_eval_options* options);

/* Writes the EvalReport JSON, and per-sample predictions JSONL when
   predictions_out is non-NULL. */
DD_API dd_status dd_evaluate(const char* checkpoint_path, const char* features_path,
                             const char* manifest_path, const dd_eval_options* options,
                             const char* report_out, const char* predictions_out);

/* Runs a JSON grid file. `default_seed` applies to cells without a seed;
   pass has_default_seed = 0 to require per-cell seeds. */
DD_API dd_status dd_run_grid(const char* grid_path, const char* out_dir, uint64_t default_seed,
                             int has_default_seed);

/* ---- analyses ---- */

typedef enum dd_table_format { DD_TABLE_MARKDOWN = 0, DD_TABLE_CSV = 1 } dd_table_format;
typedef enum dd_table_layout { DD_LAYOUT_INTRA = 0, DD_LAYOUT_CROSS = 1 } dd_table_layout;

DD_API dd_status dd_render_tables(const char* const* report_paths, size_t n_reports,
                                  dd_table_format format, dd_table_layout layout, char** out);

/* Per-macro-category FN/FP rates from a predictions file. When report_path
   names an EvalReport its metadata labels the table row. */
DD_API dd_status dd_analyze_categories(const char* predictions_path, const char* report_path,
                                       double threshold, const char* json_out,
                                       char** table_out);

typedef enum dd_correlation_target {
  DD_TARGET_CORRECTNESS = 0,
  DD_TARGET_PREDICTION = 1
} dd_correlation_target;

DD_API dd_status dd_analyze_linguistics(const char* annotations_path,
                                        const char* predictions_path,
                                        dd_correlation_target target, const char* model_name,
                                        const char* generator, const char* dataset,
                                        const char* json_out);

DD_API dd_status dd_plot(const char* correlation_json_path, const char* svg_out);

DD_API dd_status dd_gradcheck(int trials, uint64_t seed, double epsilon,
                              double* max_relative_error, size_t* parameters_checked);

#ifdef __cplusplus
}
#endif

#endif

#ifndef HESSNET_HESSNET_H
#define HESSNET_HESSNET_H

/*
 * C interface to the hessnet library. Objects are opaque handles released
 * with the matching *_free call; strings returned through char** are
 * released with hn_string_free. Every call returns an hn_status and, on
 * failure, leaves a message retrievable with hn_last_error() on the same
 * thread. Layer and time indices are 1-based.
 */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(HESSNET_BUILDING)
#    define HN_API __declspec(dllexport)
#  else
#    define HN_API __declspec(dllimport)
#  endif
#else
#  define HN_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef struct hn_model hn_model;
typedef struct hn_sample hn_sample;

typedef enum hn_status {
  HN_OK = 0,
  HN_ERR_INVALID_ARGUMENT,
  HN_ERR_PARSE,
  HN_ERR_DIMENSION,
  HN_ERR_INVALID_MODEL,
  HN_ERR_IO,
  HN_ERR_BAD_INDEX,
  HN_ERR_KINK,
  HN_ERR_NOT_RELU,
  HN_ERR_NOT_SYMMETRIC,
  HN_ERR_VERIFICATION,
  HN_ERR_INTERNAL
} hn_status;

typedef enum hn_model_kind { HN_MODEL_FNN = 0, HN_MODEL_RNN = 1 } hn_model_kind;

typedef enum hn_command {
  HN_CMD_FORWARD = 0,
  HN_CMD_GRAD,
  HN_CMD_HESSIAN,
  HN_CMD_SPECTRUM,
  HN_CMD_VERIFY
} hn_command;

typedef enum hn_format { HN_FORMAT_JSON = 0, HN_FORMAT_CSV = 1 } hn_format;

typedef enum hn_param { HN_PARAM_W = 0, HN_PARAM_U = 1, HN_PARAM_B = 2 } hn_param;

typedef struct hn_run_options {
  size_t layer;     /* 0 selects every layer */
  size_t time;      /* rnn output step; 0 selects every step */
  int dense;        /* nonzero writes dense Hessian blocks up to 400×400 */
  hn_format format;
  double tolerance; /* gradient relative tolerance; the Hessian check uses 10× */
  int perturb;      /* nonzero adds perturb_delta to one analytic gradient entry */
  hn_param perturb_param;
  size_t perturb_row; /* 0-based */
  size_t perturb_col; /* 0-based; ignored for bias */
  double perturb_delta;
} hn_run_options;

HN_API void hn_run_options_init(hn_run_options* opts);

HN_API const char* hn_status_name(hn_status status);
HN_API const char* hn_last_error(void);
HN_API void hn_string_free(char* s);

HN_API hn_status hn_model_load_file(const char* path, hn_model** out);
HN_API hn_status hn_model_load_json(const char* text, hn_model** out);
/* widths = {N, m_1, ..., m_l}; tau and a are ignored for fnn. */
HN_API hn_status hn_model_generate(hn_model_kind kind, const size_t* widths, size_t count,
                                   const char* activation, size_t tau, size_t a,
                                   uint64_t seed, hn_model** out);
HN_API void hn_model_free(hn_model* model);
HN_API hn_status hn_model_kind_of(const hn_model* model, hn_model_kind* kind);
HN_API hn_status hn_model_num_layers(const hn_model* model, size_t* count);
HN_API hn_status hn_model_layer_shape(const hn_model* model, size_t layer, size_t* rows,
                                      size_t* cols);
HN_API hn_status hn_model_to_json(const hn_model* model, char** out);

/* A JSON array of sample objects is read as a mini-batch. */
HN_API hn_status hn_sample_load_file(const char* path, const hn_model* model, hn_sample** out);
HN_API hn_status hn_sample_load_json(const char* text, const hn_model* model, hn_sample** out);
HN_API hn_status hn_sample_generate(const hn_model* model, uint64_t seed, hn_sample** out);
HN_API void hn_sample_free(hn_sample* sample);
HN_API hn_status hn_sample_count(const hn_sample* sample, size_t* count);
HN_API hn_status hn_sample_to_json(const hn_sample* sample, char** out);

/* Total loss over the batch. */
HN_API hn_status hn_loss(const hn_model* model, const hn_sample* sample, double* loss);

/*
 * Dense Hessian block of one layer for the first sample, row-major into buf.
 * For rnn models `time` selects the output step (0 sums all steps). *dim
 * receives the side length; when buf_len < dim·dim nothing is written and
 * HN_ERR_INVALID_ARGUMENT is returned, so a NULL buf queries the size.
 */
HN_API hn_status hn_hessian_dense(const hn_model* model, const hn_sample* sample, size_t layer,
                                  size_t time, hn_param param, double* buf, size_t buf_len,
                                  size_t* dim);

/*
 * Runs one report command. *report receives the text (free with
 * hn_string_free); *verdict is 1 when every verification check passed and
 * 0 otherwise (always 1 for commands other than verify).
 */
HN_API hn_status hn_run(hn_command command, const hn_model* model, const hn_sample* sample,
                        const hn_run_options* opts, char** report, int* verdict);

#ifdef __cplusplus
}
#endif

#endif

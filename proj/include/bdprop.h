/* C interface to the block bi-diagonal propagation solver library.
 *
 * All functions return a bdp_status; every non-OK status leaves a
 * human-readable message retrievable with bdp_last_error() on the calling
 * thread. Strings returned through char** are owned by the caller and must
 * be released with bdp_string_free().
 *
 * Specs and reports are JSON documents; see the project README for the
 * field reference.
 */
#ifndef BDPROP_H
#define BDPROP_H

#include <stddef.h>

#if defined(_WIN32)
#define BDPROP_API __declspec(dllexport)
#elif defined(__GNUC__) && __GNUC__ >= 4
#define BDPROP_API __attribute__((visibility("default")))
#else
#define BDPROP_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum bdp_status {
  BDP_OK = 0,
  BDP_ERR_INVALID_ARGUMENT = 1,
  BDP_ERR_PARSE = 2,
  BDP_ERR_DIMENSION = 3,
  BDP_ERR_BREAKDOWN = 4,
  BDP_ERR_IO = 5,
  BDP_ERR_INTERNAL = 6
} bdp_status;

/* Opaque network handle (feedforward or recurrent). */
typedef struct bdp_net bdp_net;

BDPROP_API const char* bdp_version(void);
BDPROP_API const char* bdp_status_name(bdp_status status);

/* Message for the most recent failure on this thread; "" if none. */
BDPROP_API const char* bdp_last_error(void);

/* Network generation and (de)serialization. spec_json needs kind, widths
 * (or layers+width), activation, seed, and tau for recurrent networks. */
BDPROP_API bdp_status bdp_net_generate(const char* spec_json, bdp_net** out);
BDPROP_API bdp_status bdp_net_from_json(const char* json_text, bdp_net** out);
BDPROP_API bdp_status bdp_net_to_json(const bdp_net* net, char** out);
BDPROP_API bdp_status bdp_net_load_file(const char* path, bdp_net** out);
BDPROP_API bdp_status bdp_net_save_file(const bdp_net* net, const char* path);
BDPROP_API size_t bdp_net_depth(const bdp_net* net);
BDPROP_API size_t bdp_net_width(const bdp_net* net, size_t level);
BDPROP_API void bdp_net_free(bdp_net* net);

/* Runs one experiment (generate network and data, build the triangular
 * system, solve, verify against the sequential oracle) and returns the
 * report JSON. A Breakdown is recorded inside the report, not an error. */
BDPROP_API bdp_status bdp_run_experiment(const char* spec_json, char** report_json);

/* CSV rendering of experiment reports (one fixed header, one row per run). */
BDPROP_API bdp_status bdp_report_csv_header(char** out);
BDPROP_API bdp_status bdp_run_experiment_csv(const char* spec_json, char** csv_row);

/* Scaling/permutation identity check of the reordered system. */
BDPROP_API bdp_status bdp_appendix_check(const char* spec_json, char** report_json);

/* Stale-diagonal forward approximation sweep over the given noise scales. */
BDPROP_API bdp_status bdp_stale_experiment(const char* spec_json, const double* sigmas,
                                           size_t n_sigmas, char** report_json);

BDPROP_API void bdp_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif /* BDPROP_H */

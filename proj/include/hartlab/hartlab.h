#ifndef HARTLAB_H
#define HARTLAB_H

/* C interface to the hartlab two-weight diagnostics library.
 *
 * All objects are opaque; constructors return NULL on failure, in which case
 * hl_last_error() carries the message and hl_last_status() the code.  Strings
 * returned by accessors are owned by the queried object and stay valid until
 * it is freed.  The error channel is thread-local. */

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum hl_status {
    HL_OK = 0,
    HL_ASSERTION_FAILURE = 1,
    HL_CONFIG_ERROR = 2,
    HL_RUNTIME_ERROR = 3
} hl_status;

typedef struct hl_scenario hl_scenario;
typedef struct hl_report hl_report;

const char* hl_version(void);

/* Scenario lifecycle. */
hl_scenario* hl_scenario_from_json(const char* text);
hl_scenario* hl_scenario_from_file(const char* path);
void hl_scenario_free(hl_scenario* sc);

hl_status hl_scenario_set_seed(hl_scenario* sc, uint64_t seed);
hl_status hl_scenario_set_grids(hl_scenario* sc, int grids);
/* count evenly spaced taus over [lo, hi], endpoints included */
hl_status hl_scenario_set_tau_grid(hl_scenario* sc, double lo, double hi, int count);
hl_status hl_scenario_set_surgery_trials(hl_scenario* sc, int trials);
const char* hl_scenario_canonical_json(hl_scenario* sc);

/* Runs; NULL on failure. */
hl_report* hl_run_scenario(const hl_scenario* sc);
hl_report* hl_run_surgery(const hl_scenario* sc);
/* modes_csv: comma-separated subset of
 * stopping_mass,paraproduct,alpha,beta,gamma */
hl_report* hl_run_corona(const hl_scenario* sc, const char* modes_csv);
/* pair != 0 additionally runs the ensemble at twice the point count */
hl_report* hl_run_ensemble(const hl_scenario* sc, int trials, int pair);
/* module: space|dyadic|haar|operators|constants|corona|harness|all */
hl_report* hl_run_verify(const hl_scenario* sc, const char* module);
void hl_report_free(hl_report* rep);

/* Report accessors. */
const char* hl_report_json(const hl_report* rep);
const char* hl_report_csv(const hl_report* rep);   /* "" when not applicable */
const char* hl_report_table(const hl_report* rep); /* "" except verify */
int hl_report_passed(const hl_report* rep);        /* 1 = all hard checks hold */

/* Thread-local error channel. */
const char* hl_last_error(void);
hl_status hl_last_status(void);

#ifdef __cplusplus
}
#endif

#endif /* HARTLAB_H */

/* C interface to the domus core: procedural houses, a discrete-action
 * household simulator, imitation datasets, policy training, and benchmark
 * evaluation. All functions are exported from libdomusc.
 *
 * Handles are opaque; every call reports a status code and the owning
 * context keeps the last error text. Strings returned through out-params
 * stay valid until the next call on the same handle.
 */
#ifndef DOMUS_C_H
#define DOMUS_C_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum {
  DOMUS_OK = 0,
  DOMUS_USAGE_ERROR = 1,
  DOMUS_DATA_ERROR = 2,
  DOMUS_INTERNAL_ERROR = 3,
} domus_status;

typedef struct domus_ctx domus_ctx;
typedef struct domus_house domus_house;
typedef struct domus_sim domus_sim;

/* catalog_dir: directory holding assets.json and layouts.json, or NULL for
 * the built-in catalog. Returns NULL only on allocation failure. */
domus_ctx* domus_ctx_create(const char* catalog_dir);
void domus_ctx_destroy(domus_ctx* ctx);

/* Last error message recorded on this context; never NULL. */
const char* domus_last_error(const domus_ctx* ctx);

/* Runs one pipeline command ("gen-houses", "gen-episodes", "stats",
 * "curate-bench", "train", "eval", "replay") with a JSON config. On success
 * *result_json points at the result document. */
domus_status domus_run(domus_ctx* ctx, const char* command, const char* config_json,
                       const char** result_json);

/* --- direct world access ------------------------------------------------ */

domus_status domus_house_generate(domus_ctx* ctx, uint64_t seed, domus_house** out);
domus_status domus_house_from_json(domus_ctx* ctx, const char* json,
                                   domus_house** out);
void domus_house_destroy(domus_house* house);
domus_status domus_house_json(domus_ctx* ctx, const domus_house* house,
                              const char** json);
int domus_house_room_count(const domus_house* house);
int domus_house_object_count(const domus_house* house);

/* --- simulator ----------------------------------------------------------- */

domus_status domus_sim_create(domus_ctx* ctx, const domus_house* house,
                              domus_sim** out);
void domus_sim_destroy(domus_sim* sim);
domus_status domus_sim_spawn(domus_sim* sim, double x, double y, double theta_deg);
/* action: 0..19; *succeeded is set to 1/0. */
domus_status domus_sim_step(domus_sim* sim, int action, int* succeeded);
domus_status domus_sim_pose(const domus_sim* sim, double* x, double* y,
                            double* theta_deg);
int domus_sim_held_object(const domus_sim* sim);

int domus_action_count(void);
const char* domus_action_name(int action);
const char* domus_version(void);

#ifdef __cplusplus
}
#endif

#endif /* DOMUS_C_H */

/* C interface to the pentrl toolkit. All functions are thread-safe except
 * concurrent use of the same handle. Strings returned through char** belong
 * to the caller and must be released with pentrl_free_string. */
#ifndef PENTRL_PENTRL_H_
#define PENTRL_PENTRL_H_

#include <stddef.h>
#include <stdint.h>

#if defined(PENTRL_BUILDING_LIBRARY)
#define PENTRL_API __attribute__((visibility("default")))
#else
#define PENTRL_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum pentrl_status {
  PENTRL_OK = 0,
  PENTRL_E_INVALID_ARGUMENT = 1,
  PENTRL_E_CONFIG = 2,
  PENTRL_E_RUNTIME = 3,
  PENTRL_E_IO = 4,
  PENTRL_E_INVALID_ACTION = 5,
  PENTRL_E_PARSE = 6,
  PENTRL_E_MISMATCH = 7,
  PENTRL_E_NUMERIC = 8,
  PENTRL_E_EPISODE_OVER = 9
} pentrl_status;

typedef struct pentrl_env pentrl_env;
typedef struct pentrl_policy pentrl_policy;

typedef struct pentrl_step_info {
  double value;
  double cost;
  double reward;
  int terminated;
  int truncated;
  int url_count;
  int vulns_found;
} pentrl_step_info;

PENTRL_API const char* pentrl_version(void);
/* Message for the last failure on the calling thread; empty after success. */
PENTRL_API const char* pentrl_last_error(void);
PENTRL_API void pentrl_free_string(char* s);
/* 0 success, 2 configuration error, 3 runtime failure. */
PENTRL_API int pentrl_exit_code(pentrl_status status);

/* seed_config_json may be NULL for the default distribution. */
PENTRL_API pentrl_status pentrl_env_generate(const char* seed_config_json, uint64_t seed, int max_steps, pentrl_env** out);
PENTRL_API pentrl_status pentrl_env_from_json(const char* environment_json, int max_steps, pentrl_env** out);
PENTRL_API pentrl_status pentrl_env_load(const char* path, int max_steps, pentrl_env** out);
PENTRL_API pentrl_status pentrl_env_save(const pentrl_env* env, const char* path);
PENTRL_API pentrl_status pentrl_env_to_json(const pentrl_env* env, char** json_out);
PENTRL_API void pentrl_env_free(pentrl_env* env);

PENTRL_API pentrl_status pentrl_env_reset(pentrl_env* env);
PENTRL_API pentrl_status pentrl_env_step(pentrl_env* env, int64_t flat_action, pentrl_step_info* info);
/* Trace record of the most recent step as JSON. */
PENTRL_API pentrl_status pentrl_env_last_step_json(const pentrl_env* env, char** json_out);
PENTRL_API int pentrl_env_url_count(const pentrl_env* env);
PENTRL_API int64_t pentrl_env_action_count(const pentrl_env* env);
PENTRL_API int pentrl_env_actions_per_url(const pentrl_env* env);
PENTRL_API int pentrl_env_feature_count(const pentrl_env* env);
PENTRL_API int pentrl_env_total_vulns(const pentrl_env* env);
PENTRL_API int pentrl_env_vulns_found(const pentrl_env* env);
PENTRL_API int pentrl_env_steps_taken(const pentrl_env* env);
/* Copies the row-major url_count x (m + n_f) observation; `capacity` counts doubles. */
PENTRL_API pentrl_status pentrl_env_observation(const pentrl_env* env, double* buffer, size_t capacity, size_t* written);

PENTRL_API pentrl_status pentrl_policy_load(const char* checkpoint_path, pentrl_policy** out);
PENTRL_API void pentrl_policy_free(pentrl_policy* policy);
PENTRL_API size_t pentrl_policy_parameter_count(const pentrl_policy* policy);
/* Greedy (argmax) action for the environment's current observation. */
PENTRL_API pentrl_status pentrl_policy_act(const pentrl_policy* policy, const pentrl_env* env, int64_t* action);

/* Runs a toolkit command (gen-envs, train, search, eval, stats, report,
 * show-config, rerun). request_json: {"config": path|null, "flags": {...}}.
 * On success *result_json receives a JSON summary. */
PENTRL_API pentrl_status pentrl_run_command(const char* name, const char* request_json, char** result_json);
/* JSON array of command names. */
PENTRL_API pentrl_status pentrl_command_names(char** json_out);
/* Built-in defaults for a command as a JSON object. */
PENTRL_API pentrl_status pentrl_command_defaults(const char* name, char** json_out);

/* Log verbosity: 0 debug, 1 info, 2 warn, 3 error. */
PENTRL_API void pentrl_set_log_level(int level);

#ifdef __cplusplus
}
#endif

#endif /* PENTRL_PENTRL_H_ */

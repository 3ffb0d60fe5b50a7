#include "pentrl/pentrl.h"

#include <cstring>
#include <optional>
#include <stdexcept>
#include <string>

#include "pentrl/agent.hpp"
#include "pentrl/commands.hpp"
#include "pentrl/simenv.hpp"
#include "pentrl/topology.hpp"

#ifndef PENTRL_VERSION_STRING
#define PENTRL_VERSION_STRING "0.0.0"
#endif

struct pentrl_env {
  pentrl::topology::WebsiteGroundTruth truth;
  pentrl::sim::Environment env;
  std::optional<pentrl::sim::StepResult> last;
  int step_count_for_trace = 0;

  pentrl_env(pentrl::topology::WebsiteGroundTruth gt, pentrl::sim::EnvOptions options)
      : truth(gt), env(std::move(gt), std::move(options)) {}
};

struct pentrl_policy {
  pentrl::agent::Checkpoint checkpoint;
};

namespace {

thread_local std::string g_last_error;

pentrl_status status_of(pentrl::ErrorCode c) {
  switch (c) {
    case pentrl::ErrorCode::kInvalidArgument: return PENTRL_E_INVALID_ARGUMENT;
    case pentrl::ErrorCode::kConfig: return PENTRL_E_CONFIG;
    case pentrl::ErrorCode::kIo: return PENTRL_E_IO;
    case pentrl::ErrorCode::kInvalidAction: return PENTRL_E_INVALID_ACTION;
    case pentrl::ErrorCode::kParse: return PENTRL_E_PARSE;
    case pentrl::ErrorCode::kMismatch: return PENTRL_E_MISMATCH;
    case pentrl::ErrorCode::kNumeric: return PENTRL_E_NUMERIC;
    default: return PENTRL_E_RUNTIME;
  }
}

template <class F>
pentrl_status guarded(F&& f) {
  g_last_error.clear();
  try {
    f();
    return PENTRL_OK;
  } catch (const pentrl::Error& e) {
    g_last_error = e.what();
    return status_of(e.code());
  } catch (const nlohmann::json::exception& e) {
    g_last_error = e.what();
    return PENTRL_E_PARSE;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return PENTRL_E_RUNTIME;
  } catch (...) {
    g_last_error = "unknown failure";
    return PENTRL_E_RUNTIME;
  }
}

pentrl_status fail(pentrl_status s, const char* msg) {
  g_last_error = msg;
  return s;
}

char* dup(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

pentrl::sim::EnvOptions options_for(int max_steps) {
  pentrl::sim::EnvOptions o;
  if (max_steps > 0) o.max_steps = max_steps;
  return o;
}

}  // namespace

extern "C" {

const char* pentrl_version(void) { return PENTRL_VERSION_STRING; }
const char* pentrl_last_error(void) { return g_last_error.c_str(); }
void pentrl_free_string(char* s) { delete[] s; }

int pentrl_exit_code(pentrl_status status) {
  if (status == PENTRL_OK) return 0;
  if (status == PENTRL_E_CONFIG || status == PENTRL_E_INVALID_ARGUMENT) return 2;
  return 3;
}

pentrl_status pentrl_env_generate(const char* seed_config_json, uint64_t seed, int max_steps, pentrl_env** out) {
  if (!out) return fail(PENTRL_E_INVALID_ARGUMENT, "out must not be NULL");
  return guarded([&] {
    auto sc = pentrl::topology::SeedConfig::defaults();
    if (seed_config_json) sc = pentrl::topology::seed_config_from_json(nlohmann::json::parse(seed_config_json));
    if (auto p = sc.validate(); !p.empty()) throw pentrl::ConfigError(p);
    *out = new pentrl_env(pentrl::topology::generate_environment(sc, seed), options_for(max_steps));
  });
}

pentrl_status pentrl_env_from_json(const char* environment_json, int max_steps, pentrl_env** out) {
  if (!environment_json || !out) return fail(PENTRL_E_INVALID_ARGUMENT, "arguments must not be NULL");
  return guarded([&] {
    auto gt = pentrl::topology::ground_truth_from_json(nlohmann::json::parse(environment_json));
    *out = new pentrl_env(std::move(gt), options_for(max_steps));
  });
}

pentrl_status pentrl_env_load(const char* path, int max_steps, pentrl_env** out) {
  if (!path || !out) return fail(PENTRL_E_INVALID_ARGUMENT, "arguments must not be NULL");
  return guarded([&] {
    auto gt = pentrl::topology::ground_truth_from_json(nlohmann::json::parse(pentrl::read_text_file(path)));
    *out = new pentrl_env(std::move(gt), options_for(max_steps));
  });
}

pentrl_status pentrl_env_save(const pentrl_env* env, const char* path) {
  if (!env || !path) return fail(PENTRL_E_INVALID_ARGUMENT, "arguments must not be NULL");
  return guarded([&] { pentrl::write_text_file(path, to_json(env->truth).dump(2) + "\n"); });
}

pentrl_status pentrl_env_to_json(const pentrl_env* env, char** json_out) {
  if (!env || !json_out) return fail(PENTRL_E_INVALID_ARGUMENT, "arguments must not be NULL");
  return guarded([&] { *json_out = dup(to_json(env->truth).dump()); });
}

void pentrl_env_free(pentrl_env* env) { delete env; }

pentrl_status pentrl_env_reset(pentrl_env* env) {
  if (!env) return fail(PENTRL_E_INVALID_ARGUMENT, "env must not be NULL");
  return guarded([&] {
    env->env.reset();
    env->last.reset();
  });
}

pentrl_status pentrl_env_step(pentrl_env* env, int64_t flat_action, pentrl_step_info* info) {
  if (!env) return fail(PENTRL_E_INVALID_ARGUMENT, "env must not be NULL");
  if (env->env.episode_over()) return fail(PENTRL_E_EPISODE_OVER, "episode is over; call pentrl_env_reset");
  return guarded([&] {
    env->step_count_for_trace = env->env.steps_taken();
    env->last = env->env.step(flat_action);
    if (info) {
      info->value = env->last->value;
      info->cost = env->last->cost;
      info->reward = env->last->reward;
      info->terminated = env->last->terminated;
      info->truncated = env->last->truncated;
      info->url_count = env->env.url_count();
      info->vulns_found = env->env.vulns_found();
    }
  });
}

pentrl_status pentrl_env_last_step_json(const pentrl_env* env, char** json_out) {
  if (!env || !json_out) return fail(PENTRL_E_INVALID_ARGUMENT, "arguments must not be NULL");
  if (!env->last) return fail(PENTRL_E_INVALID_ARGUMENT, "no step taken since reset");
  return guarded([&] {
    *json_out = dup(pentrl::sim::trace_record(*env->last, 0, env->step_count_for_trace, env->env.url_count()).dump());
  });
}

int pentrl_env_url_count(const pentrl_env* env) { return env ? env->env.url_count() : 0; }
int64_t pentrl_env_action_count(const pentrl_env* env) { return env ? env->env.action_count() : 0; }
int pentrl_env_actions_per_url(const pentrl_env* env) { return env ? env->env.layout().per_url_count() : 0; }
int pentrl_env_feature_count(const pentrl_env* env) { return env ? env->env.observation().feature_count() : 0; }
int pentrl_env_total_vulns(const pentrl_env* env) { return env ? env->env.total_vuln_count() : 0; }
int pentrl_env_vulns_found(const pentrl_env* env) { return env ? env->env.vulns_found() : 0; }
int pentrl_env_steps_taken(const pentrl_env* env) { return env ? env->env.steps_taken() : 0; }

pentrl_status pentrl_env_observation(const pentrl_env* env, double* buffer, size_t capacity, size_t* written) {
  if (!env) return fail(PENTRL_E_INVALID_ARGUMENT, "env must not be NULL");
  const auto& data = env->env.observation().data();
  if (written) *written = data.size();
  if (!buffer) return PENTRL_OK;
  if (capacity < data.size()) return fail(PENTRL_E_INVALID_ARGUMENT, "observation buffer too small");
  std::memcpy(buffer, data.data(), data.size() * sizeof(double));
  g_last_error.clear();
  return PENTRL_OK;
}

pentrl_status pentrl_policy_load(const char* checkpoint_path, pentrl_policy** out) {
  if (!checkpoint_path || !out) return fail(PENTRL_E_INVALID_ARGUMENT, "arguments must not be NULL");
  return guarded([&] { *out = new pentrl_policy{pentrl::agent::load_checkpoint(checkpoint_path)}; });
}

void pentrl_policy_free(pentrl_policy* policy) { delete policy; }

size_t pentrl_policy_parameter_count(const pentrl_policy* policy) {
  return policy ? policy->checkpoint.policy.parameter_count() : 0;
}

pentrl_status pentrl_policy_act(const pentrl_policy* policy, const pentrl_env* env, int64_t* action) {
  if (!policy || !env || !action) return fail(PENTRL_E_INVALID_ARGUMENT, "arguments must not be NULL");
  return guarded([&] {
    pentrl::agent::require_compatible(policy->checkpoint.policy.architecture(), env->env.layout());
    *action = pentrl::agent::argmax(policy->checkpoint.policy.actor_forward(env->env.observation()));
  });
}

pentrl_status pentrl_run_command(const char* name, const char* request_json, char** result_json) {
  if (!name) return fail(PENTRL_E_INVALID_ARGUMENT, "command name must not be NULL");
  return guarded([&] {
    nlohmann::json request = nlohmann::json::object();
    if (request_json && *request_json) {
      try {
        request = nlohmann::json::parse(request_json);
      } catch (const nlohmann::json::parse_error& e) {
        throw pentrl::ConfigError(std::string("request is not valid JSON: ") + e.what());
      }
    }
    auto result = pentrl::cli::run_command(name, request);
    if (result_json) *result_json = dup(result.dump());
  });
}

pentrl_status pentrl_command_names(char** json_out) {
  if (!json_out) return fail(PENTRL_E_INVALID_ARGUMENT, "json_out must not be NULL");
  return guarded([&] { *json_out = dup(nlohmann::json(pentrl::cli::command_names()).dump()); });
}

pentrl_status pentrl_command_defaults(const char* name, char** json_out) {
  if (!name || !json_out) return fail(PENTRL_E_INVALID_ARGUMENT, "arguments must not be NULL");
  return guarded([&] { *json_out = dup(pentrl::cli::command_defaults(name).dump()); });
}

void pentrl_set_log_level(int level) {
  using pentrl::log::Level;
  pentrl::log::set_min_level(level <= 0 ? Level::kDebug : level == 1 ? Level::kInfo : level == 2 ? Level::kWarn : Level::kError);
}

}  // extern "C"

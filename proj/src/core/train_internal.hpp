#ifndef PENTRL_SRC_CORE_TRAIN_INTERNAL_HPP_
#define PENTRL_SRC_CORE_TRAIN_INTERNAL_HPP_

#include <fstream>
#include <memory>

#include "pentrl/trainer.hpp"

namespace pentrl::train::detail {

struct PreparedRun {
  std::vector<topology::WebsiteGroundTruth> train;
  std::vector<topology::WebsiteGroundTruth> val;
  sim::EnvOptions options;
  agent::PolicyArchitecture arch;
};

// Validates the config, trims the pools and checks they do not overlap.
PreparedRun prepare_run(const TrainConfig& config, const std::vector<topology::WebsiteGroundTruth>& train_envs,
                        const std::vector<topology::WebsiteGroundTruth>& val_envs, const sim::RewardTables& rewards);

// Tracks metrics rows and the best-on-validation policy, and mirrors both to the run directory.
class RunRecorder {
 public:
  RunRecorder(const TrainConfig& config, const TrainIo& io);
  void record(const MetricsRow& row, const agent::Policy& policy, bool evaluated);
  TrainResult finish(const agent::Policy& policy);

 private:
  agent::Checkpoint make_checkpoint(const agent::Policy& policy, std::int64_t timestep, double val) const;

  TrainConfig config_;
  TrainIo io_;
  std::unique_ptr<std::ofstream> csv_;
  TrainResult result_;
  bool have_best_ = false;
};

}  // namespace pentrl::train::detail

#endif  // PENTRL_SRC_CORE_TRAIN_INTERNAL_HPP_

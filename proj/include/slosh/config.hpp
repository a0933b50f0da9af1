#pragma once

#include <string>

#include "slosh/dataset.hpp"
#include "slosh/trainer.hpp"

namespace slosh {

/// Held-out / simulate scenario: fill level, optional oracle settling
/// frames before frame 0, and the rotation schedule (angles in degrees on
/// disk, radians in memory).
struct ScheduleSpec {
  double fill = 0.5;
  std::size_t settle_frames = 0;
  std::vector<ScheduledRotation> rotations;
};

/// JSON parsers. Every object rejects keys it does not know (ConfigError),
/// missing keys keep their defaults.
SimConfig parse_sim_config(const std::string& json);
DatasetSpec parse_dataset_spec(const std::string& json);
TrainConfig parse_train_config(const std::string& json);
ScheduleSpec parse_schedule(const std::string& json);

std::string to_json(const DatasetSpec& spec);
std::string to_json(const TrainConfig& config, const SimConfig& sim);
std::string to_json(const ScheduleSpec& schedule);

/// The `sim` block of a training config (defaults if absent).
SimConfig parse_train_sim(const std::string& json);

}  // namespace slosh

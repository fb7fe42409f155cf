#pragma once

#include <string>
#include <vector>

#include "nearnet/accessibility.hpp"
#include "nearnet/supports.hpp"

namespace nearnet {

struct PlannerConfig {
  /// Weighted IMF at or below this marks a support voxel removable.
  double tau = 0.005;
  /// Layers per batch as a fraction of all layers.
  double layer_fraction = 0.10;
  /// Weight of part, platform and fixture voxels relative to remaining supports.
  double obstacle_penalty = 1000.0;
  int max_steps = 1000;

  void validate() const;
};

struct RemovalStep {
  std::size_t tool_index = 0;
  std::size_t orientation_index = 0;
  std::string tool_name;
  std::string orientation_label;
  ScalarGrid removed;
  double volume = 0.0;
  /// Share of the initial support volume removed by this step, in percent.
  double percent = 0.0;
  /// Build layers [first, last] of the batch the step was scored on.
  int batch_first = 0, batch_last = 0;
};

struct RemovalPlan {
  std::vector<RemovalStep> steps;
  ScalarGrid residual_supports;
  /// Removed support volume over the initial support volume (0 when there were none).
  double machined_fraction = 0.0;
};

/// Thrown when no tool can make progress while supports still touch the part.
class PlannerStuck : public NumericalError {
 public:
  PlannerStuck(const std::string& what, ScalarGrid stuck) : NumericalError(what), stuck_(std::move(stuck)) {}
  const ScalarGrid& stuck_region() const { return stuck_; }

 private:
  ScalarGrid stuck_;
};

/// True iff every part voxel reaches a platform voxel through face-adjacent voxels of
/// part, supports or platform. An empty part has no such path and is reported disconnected.
bool check_connectivity(const ScalarGrid& part, const ScalarGrid& supports, const ScalarGrid& platform);

/// Supports sharing a face with the part.
ScalarGrid part_contacting_supports(const ScalarGrid& part, const ScalarGrid& supports);

RemovalPlan plan_removal(const NearNetShape& near_net, const MachiningSetup& setup, const PlannerConfig& cfg);

}  // namespace nearnet

#pragma once

#include <string>
#include <vector>

#include "nearnet/accessibility.hpp"
#include "nearnet/fea.hpp"
#include "nearnet/geometry.hpp"
#include "nearnet/planner.hpp"
#include "nearnet/supports.hpp"
#include "nearnet/topopt.hpp"

namespace nearnet {

struct OutputOptions {
  /// Write the current density every N iterations (0 disables snapshots).
  int snapshot_every = 0;
  bool vtk = true;
  bool pgm = true;
};

/// Everything one run needs, on a single grid holding the design domain and the platform.
///
/// The build direction is a grid axis; the design domain starts at the world origin.
struct OptimizationProblem {
  std::string name;
  GridDims dims;
  DesignDomain domain;
  BoundaryConditions bc;
  MaterialModel material;
  SolverOptions solver;
  BuildSpec build;
  MachiningSetup setup;
  OptimizationConfig optimizer;
  PlannerConfig planner;
  OutputOptions output;
  /// Optional fixed part shape for the analysis commands.
  std::vector<Primitive> part;

  /// Collects every violated invariant into one ValidationReport.
  void validate() const;
};

}  // namespace nearnet

#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

#include "nearnet/accessibility.hpp"
#include "nearnet/fea.hpp"
#include "nearnet/supports.hpp"

namespace nearnet {

struct OptimizationProblem;

struct OptimizationConfig {
  double volume_fraction = 0.5;
  /// Admissible secluded-to-total support volume ratio.
  double epsilon = 1e-3;
  double beta = 1.0;
  /// Exponent of the layer coefficients.
  double q = 4.0;
  double w_acc_max = 0.5;
  double w_acc_step = 0.01;
  int i_acc = 20;
  int i_rho = 150;
  /// IMF level above which a support voxel counts as secluded.
  double lambda = 0.005;
  double move_limit = 0.2;
  double oc_damping = 0.5;
  /// Stop when the integrated absolute density change falls to this; unset means 0.01 * vol(design).
  std::optional<double> delta_tol;
  int max_iter = 300;
  double filter_radius = 1.5;
  /// Densities below this are lifted to it inside the multiplicative OC step so voids can regrow.
  double oc_floor = 1e-3;
  /// Evaluate seclusion every iteration even when the accessibility weight stays 0.
  bool track_accessibility = true;
  /// Count the current supports as obstacles (clamped to 1) when evaluating the IMF.
  bool supports_as_obstacles = false;

  void validate() const;
  bool constrained() const { return w_acc_max > 0.0; }
};

struct IterationRecord {
  int iter = 0;
  double compliance = 0.0;
  double volume = 0.0;
  double support_volume = 0.0;
  double secluded_volume = 0.0;
  double w_acc = 0.0;
  /// Integrated absolute density change of this iteration's update.
  double change = 0.0;
};

/// Free design voxels plus those pinned at full density.
struct DesignDomain {
  ScalarGrid design;
  ScalarGrid keep;

  static DesignDomain full(const GridDims& dims);
  void validate() const;
  /// 1 where the density may change.
  ScalarGrid free() const;
};

/// rho_tilde = 1 - exp(-beta rho) + rho exp(-beta), voxel-wise.
ScalarGrid heaviside_project(const ScalarGrid& rho, double beta);
ScalarGrid heaviside_derivative(const ScalarGrid& rho, double beta);

/// Linear hat-weighted sensitivity filter restricted to the design voxels.
class SensitivityFilter {
 public:
  SensitivityFilter(const ScalarGrid& design, double radius);
  /// sum_f H_ef rho_f s_f / (max(1e-3, rho_e) sum_f H_ef).
  ScalarGrid apply(const ScalarGrid& sensitivity, const ScalarGrid& rho) const;

 private:
  ScalarGrid design_;
  std::vector<IVec3> offsets_;
  std::vector<double> weights_;
};

/// -L_k^q * IMF on near-net voxels, 0 elsewhere.
ScalarGrid accessibility_filter(const IMFField& imf, const NearNetShape& near_net, const ScalarGrid& layer_w);

/// (1 - w_acc) s_phi + w_acc s_imf.
ScalarGrid blend_sensitivity(const ScalarGrid& s_phi_norm, const ScalarGrid& s_imf, double w_acc);

/// Optimality-criteria step with move limits and a bisected multiplier hitting
/// volume_fraction * integrate(design). Pinned voxels keep their value.
ScalarGrid oc_update(const ScalarGrid& rho, const ScalarGrid& sensitivity, double volume_fraction,
                     const OptimizationConfig& cfg, const DesignDomain& domain);
ScalarGrid oc_update(const ScalarGrid& rho, const ScalarGrid& sensitivity, double volume_fraction,
                     const OptimizationConfig& cfg);
/// Same step with the multiplicative update taken from `base` while the move limits stay
/// centered on `rho`. Any `rho` already at the target volume keeps the target reachable.
ScalarGrid oc_update(const ScalarGrid& rho, const ScalarGrid& sensitivity, double volume_fraction,
                     const OptimizationConfig& cfg, const DesignDomain& domain, const ScalarGrid& base);

struct PenalizedDesign {
  ScalarGrid rho;
  ScalarGrid sensitivity;
};

/// On secluded voxels: rho += 0.5 capped at 1, sensitivity floored at -L_k^q.
/// optimize() passes every voxel found secluded since I_rho, not only the current ones.
PenalizedDesign seclusion_penalty(const ScalarGrid& rho, const ScalarGrid& sensitivity, const ScalarGrid& secluded,
                                  const ScalarGrid& layer_w);

struct OptimizationResult {
  ScalarGrid density;
  ScalarGrid projected;
  NearNetShape near_net;
  std::optional<IMFField> imf;
  SecludedRegion secluded;
  std::vector<IterationRecord> history;
  double compliance = 0.0;
  /// Stopped on the change tolerance before the iteration cap. A constrained run also needs
  /// the accessibility weight at its maximum and the secluded ratio within epsilon.
  bool converged = false;
  bool manufacturable = false;
};

using IterationCallback = std::function<void(const IterationRecord&, const ScalarGrid& rho)>;

OptimizationResult optimize(const OptimizationProblem& problem, const IterationCallback& on_iteration = {});

/// iter,compliance,volume,support_volume,secluded_volume,w_acc,change with 9 significant digits.
void write_history_csv(std::ostream& os, const std::vector<IterationRecord>& history);

}  // namespace nearnet

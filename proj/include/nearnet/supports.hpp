#pragma once

#include <vector>

#include "nearnet/grid.hpp"

namespace nearnet {

/// Build direction and overhang rule for support generation.
struct BuildSpec {
  Vec3 direction = Vec3::UnitZ();
  /// Minimum self-supporting angle in degrees; 90 needs material directly underneath.
  double overhang_angle = 90.0;
  /// Densities at or above this count as material.
  double density_threshold = 0.5;

  void validate() const;
  /// True when the lateral neighbors one layer down also count as support (angles below 67.5).
  bool uses_cone_stencil() const { return overhang_angle < 67.5; }
};

/// Maps voxels to build layers. Layer 0 is the first layer along the build direction.
struct BuildFrame {
  int axis = 2;
  int sign = 1;
  int layers = 1;

  /// Throws ValidationError unless the direction is aligned with a grid axis
  /// (in 2D, with x or y).
  static BuildFrame from(const BuildSpec& spec, const GridDims& dims);

  int layer_of(const IVec3& c) const { return sign > 0 ? c[axis] : layers - 1 - c[axis]; }
  /// Neighbor one layer further down (toward the platform).
  IVec3 below(const IVec3& c) const {
    IVec3 b = c;
    b[axis] -= sign;
    return b;
  }
};

/// Part plus sacrificial supports as printed, before machining.
struct NearNetShape {
  ScalarGrid part;
  ScalarGrid supports;
  ScalarGrid platform;
  BuildFrame frame;

  ScalarGrid solid() const { return {part.dims(), part.values() + supports.values()}; }
  void validate() const;
};

/// Offsets (in the layer below) whose material supports a voxel.
std::vector<IVec3> support_stencil(const BuildSpec& spec, const BuildFrame& frame, const GridDims& dims);

/// Material voxels with nothing (material or platform) in their support stencil one layer down.
ScalarGrid overhang_points(const ScalarGrid& part, const BuildSpec& spec);
ScalarGrid overhang_points(const ScalarGrid& part, const BuildSpec& spec, const ScalarGrid& platform);

/// Dense column supports swept top-down until they land on material, the platform, or layer 0.
NearNetShape generate_supports(const ScalarGrid& part, const BuildSpec& spec, const ScalarGrid& platform);

/// Weights ((n - k + 1) / n)^q for layers k = 1..n, k = 1 at the bottom.
std::vector<double> layer_coefficients(const GridDims& dims, int layer_axis, double q);
/// Same weights looked up per voxel through the build frame.
ScalarGrid layer_weight_field(const GridDims& dims, const BuildFrame& frame, double q);

}  // namespace nearnet

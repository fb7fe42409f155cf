#pragma once

#include <span>
#include <string>
#include <vector>

#include "nearnet/grid.hpp"
#include "nearnet/rotation.hpp"

namespace nearnet {

/// Solid primitive used to build indicator grids (tools, platforms, fixtures, keep-in regions).
///
/// Box: `center`, full edge lengths `size`, orientation `pose`. An infinite size component
/// (used by 2D configs) leaves that axis unbounded.
/// Sphere: `center`, `radius`. Cylinder/Capsule: segment `p0`-`p1` and `radius`.
/// HalfSpace: points p with (p - center) . normal <= 0.
struct Primitive {
  enum class Kind { Box, Sphere, Cylinder, Capsule, HalfSpace };

  Kind kind = Kind::Box;
  Vec3 center = Vec3::Zero();
  Vec3 size = Vec3::Ones();
  Rotation pose;
  Vec3 p0 = Vec3::Zero(), p1 = Vec3::UnitX();
  double radius = 1.0;
  Vec3 normal = Vec3::UnitZ();

  static Primitive box(const Vec3& center, const Vec3& size, const Rotation& pose = {});
  static Primitive box_from_corners(const Vec3& lo, const Vec3& hi);
  static Primitive sphere(const Vec3& center, double radius);
  static Primitive cylinder(const Vec3& p0, const Vec3& p1, double radius);
  static Primitive capsule(const Vec3& p0, const Vec3& p1, double radius);
  static Primitive half_space(const Vec3& point, const Vec3& normal);

  /// Throws ValidationError on zero/negative dimensions or non-finite pose.
  void validate() const;
  bool contains(const Vec3& p) const;
  std::string describe() const;
  /// Axis-aligned bounds; infinite for half-spaces and unbounded boxes.
  std::pair<Vec3, Vec3> bounds() const;
};

/// Indicator grid: voxel is 1 iff its center lies inside any of the primitives.
/// `frame` maps grid coordinates to the frame the primitives are expressed in.
ScalarGrid rasterize(std::span<const Primitive> shapes, const GridDims& dims, const Rotation& frame = {});
ScalarGrid rasterize(const Primitive& shape, const GridDims& dims, const Rotation& frame = {});

/// Lattice-aligned grid just large enough to hold the given bounded primitives.
GridDims lattice_bounds(std::span<const Primitive> shapes, double spacing, bool planar);

/// Rotate an indicator grid about the world origin with nearest-neighbor resampling.
///
/// The output is lattice aligned (voxel centers on multiples of spacing) and enlarged to
/// hold the rotated support. Planar grids accept only rotations about Z.
ScalarGrid rotate_resample(const ScalarGrid& g, const Rotation& r);

/// Smallest lattice-aligned grid containing every nonzero voxel of `g` (at least one voxel).
ScalarGrid crop_to_support(const ScalarGrid& g);

}  // namespace nearnet

#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nearnet/correlation.hpp"
#include "nearnet/geometry.hpp"
#include "nearnet/grid.hpp"
#include "nearnet/rotation.hpp"

namespace nearnet {

/// Cutter plus holder treated as one rigid body, expressed in its own local frame.
///
/// Holder and cutter are lattice-aligned indicator grids; the tool-frame origin is the
/// voxel centered at the local origin and is the center of rotation.
struct ToolAssembly {
  std::string name = "tool";
  ScalarGrid holder;
  ScalarGrid cutter;
  /// Cutting points in tool-local coordinates (length units).
  std::vector<Vec3> sharp_points;
  std::vector<Rotation> orientations;
  /// Optional human-readable labels, parallel to `orientations`.
  std::vector<std::string> orientation_labels;
  /// Unit approach direction in the local frame (from holder toward the tip).
  Vec3 axis = Vec3::UnitX();
  /// 2D tool. A 3D tool may still have one-voxel-thick grids.
  bool planar = false;

  /// Rasterize holder and cutter primitives. Empty `sharp_points` derives them from the cutter.
  static ToolAssembly from_primitives(std::string name, std::span<const Primitive> holder,
                                      std::span<const Primitive> cutter, double spacing, bool planar,
                                      const Vec3& axis, std::vector<Vec3> sharp_points,
                                      std::vector<Rotation> orientations,
                                      std::vector<std::string> labels = {});

  /// Cutter voxel centers lying on the cutter's extreme face along `axis`.
  static std::vector<Vec3> default_sharp_points(const ScalarGrid& cutter, const Vec3& axis);

  /// Union of holder and cutter on a common lattice grid.
  ScalarGrid body() const;
  double volume() const { return integrate(body()); }
  std::string orientation_label(std::size_t i) const;
  void validate() const;
};

/// Tool assemblies plus the non-design obstacles living on the design-domain grid.
struct MachiningSetup {
  std::vector<ToolAssembly> tools;
  ScalarGrid platform;
  ScalarGrid fixture;

  void validate() const;
  std::size_t pair_count() const;
};

/// A tool at one orientation, rotated and resampled, ready for correlation.
struct OrientedTool {
  ScalarGrid body;
  ScalarGrid reflected;
  /// Sharp points after rotation, rounded to lattice offsets.
  std::vector<IVec3> sharp_offsets;
  /// Volume of the resampled rotated body; normalizes the collision measure.
  double volume = 0.0;
  std::size_t tool_index = 0, orientation_index = 0;
};

OrientedTool orient_tool(const ToolAssembly& tool, const Rotation& r);
std::vector<OrientedTool> orient_all(const MachiningSetup& setup);

/// Evaluates the normalized inaccessibility measure of oriented tools against one obstacle.
///
/// Each tool gets its own transform window: the obstacle padded by that tool's largest
/// sharp-point offset, at an FFT size fixed by the obstacle and that tool alone. A tool's
/// field is therefore bit-identical whichever other tools are evaluated with it, and
/// windows of equal geometry are transformed once and shared. With `weighted` the
/// obstacle may exceed 1 and results are not clamped to [0, 1].
class ImfEvaluator {
 public:
  ImfEvaluator(const ScalarGrid& obstacle, std::span<const OrientedTool> tools, bool weighted = false);

  KernelSpectrum transform(const OrientedTool& tool) const;
  ScalarGrid evaluate(const OrientedTool& tool) const { return evaluate(tool, transform(tool)); }
  ScalarGrid evaluate(const OrientedTool& tool, const KernelSpectrum& kernel) const;
  const GridDims& obstacle_dims() const { return dims_; }

 private:
  struct Window {
    IVec3 margin;
    std::shared_ptr<const ObstacleSpectrum> spectrum;
  };
  const Window& window(const OrientedTool& tool) const;

  GridDims dims_;
  bool weighted_;
  std::vector<std::pair<IVec3, IVec3>> keys_;
  std::vector<Window> windows_;
};

struct ImfProvenance {
  Grid<int> tool;
  Grid<int> orientation;
};

/// Normalized IMF with an optional per-voxel argmin (tool, orientation) layer.
struct IMFField {
  ScalarGrid values;
  std::optional<ImfProvenance> provenance;
};

struct ImfOptions {
  bool provenance = false;
};

/// rho_O = rho_part + platform + fixture. Throws if part density overlaps platform or fixture.
ScalarGrid assemble_obstacle_density(const ScalarGrid& rho_part, const MachiningSetup& setup);

/// IMF of one tool at one orientation over a density obstacle in [0, 1].
ScalarGrid imf_rotated_tool(const ScalarGrid& rho_obstacle, const Rotation& r, const ToolAssembly& tool);

/// Pointwise minimum over every (tool, orientation) pair of the setup.
/// Ties resolve to the lowest tool index, then the lowest orientation index.
IMFField imf_overall(const ScalarGrid& rho_part, const MachiningSetup& setup, const ImfOptions& options = {});

/// Same reduction over an already assembled obstacle.
IMFField imf_over_obstacle(const ScalarGrid& rho_obstacle, std::span<const OrientedTool> tools,
                           const ImfOptions& options = {});

/// Oriented tools whose kernel spectra are kept between evaluations on obstacles of one shape.
class ImfCache {
 public:
  explicit ImfCache(std::vector<OrientedTool> tools, bool weighted = false);

  /// One field per oriented tool, in tool order.
  std::vector<ScalarGrid> evaluate_each(const ScalarGrid& obstacle);
  IMFField evaluate(const ScalarGrid& obstacle, const ImfOptions& options = {});
  const std::vector<OrientedTool>& tools() const { return tools_; }

 private:
  std::vector<OrientedTool> tools_;
  bool weighted_;
  /// Kernels depend on the obstacle only through its dims.
  std::optional<GridDims> dims_;
  std::vector<KernelSpectrum> kernels_;
};

struct SecludedRegion {
  ScalarGrid mask;
  double volume = 0.0;
  double support_volume = 0.0;
  /// volume / support_volume, or 0 when there are no supports.
  double ratio = 0.0;
};

/// Supports whose IMF exceeds lambda.
SecludedRegion secluded_supports(const IMFField& imf, const ScalarGrid& supports, double lambda);

}  // namespace nearnet

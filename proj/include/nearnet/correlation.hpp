#pragma once

#include <complex>
#include <memory>

#include "nearnet/grid.hpp"

namespace nearnet {

/// Collision measure for every placement of a (reflected) tool over an obstacle grid.
///
/// field(t) = sum_x obstacle(x) * reflected_tool(t - x) * spacing^d, where t runs over the
/// obstacle voxels and the kernel is addressed by lattice offset (the tool-frame origin is
/// the voxel whose center is the world origin). Space outside the obstacle grid is free.
struct CorrelationResult {
  ScalarGrid field;
  double tool_volume = 0.0;
};

/// Zero-padded (linear, not circular) FFT evaluation.
CorrelationResult correlate_fft(const ScalarGrid& obstacle, const ScalarGrid& reflected_tool);

/// Direct summation. Refuses grids above 64^3 voxels unless `force` is set.
CorrelationResult correlate_bruteforce(const ScalarGrid& obstacle, const ScalarGrid& reflected_tool,
                                       bool force = false);

/// Smallest n' >= n whose prime factors are all in {2, 3, 5, 7}.
int fft_friendly_size(int n);

namespace detail {
struct SpectrumBuffer;
}

/// Kernel transformed at a given FFT shape, reusable across obstacles of that shape.
class KernelSpectrum {
 public:
  const IVec3& fft_shape() const { return shape_; }
  const IVec3& lattice_offset() const { return lo_; }
  double volume() const { return volume_; }

 private:
  friend class ObstacleSpectrum;
  IVec3 shape_, lo_;
  double volume_ = 0.0;
  std::shared_ptr<const detail::SpectrumBuffer> data_;
};

/// Obstacle transform cached once and correlated against many kernels
/// (one forward transform per kernel, one inverse per correlation).
class ObstacleSpectrum {
 public:
  /// `max_kernel` bounds the extent of every kernel that will be correlated.
  ObstacleSpectrum(const ScalarGrid& obstacle, const IVec3& max_kernel);

  const GridDims& obstacle_dims() const { return dims_; }
  const IVec3& fft_shape() const { return shape_; }
  bool fits(const IVec3& kernel_extent) const;

  KernelSpectrum transform(const ScalarGrid& reflected_tool) const;
  /// Correlation field on the obstacle grid (unnormalized, clamped at 0).
  ScalarGrid correlate(const KernelSpectrum& kernel) const;
  ScalarGrid correlate(const ScalarGrid& reflected_tool) const { return correlate(transform(reflected_tool)); }

 private:
  GridDims dims_;
  IVec3 shape_;
  std::shared_ptr<const detail::SpectrumBuffer> data_;
};

}  // namespace nearnet

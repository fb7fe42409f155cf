#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>

#include "nearnet/error.hpp"

namespace nearnet {

using Index = std::int64_t;
using Vec3 = Eigen::Vector3d;
using IVec3 = Eigen::Vector3i;

/// Discretization of an axis-aligned box into isotropic voxels. nz == 1 encodes 2D.
///
/// Voxel (i,j,k) covers [origin + (i,j,k)*spacing, origin + (i+1,j+1,k+1)*spacing).
/// Planar grids keep origin.z == -spacing/2 so that voxel centers lie on z = 0.
struct GridDims {
  int nx = 1, ny = 1, nz = 1;
  double spacing = 1.0;
  Vec3 origin = Vec3::Zero();

  GridDims() = default;
  GridDims(int nx_, int ny_, int nz_, double h, const Vec3& o = Vec3::Zero())
      : nx(nx_), ny(ny_), nz(nz_), spacing(h), origin(o) {}

  static GridDims planar(int nx, int ny, double h, double ox = 0.0, double oy = 0.0) {
    return {nx, ny, 1, h, Vec3(ox, oy, -0.5 * h)};
  }

  /// Grid whose voxel `lo` (in lattice coordinates) is centered at lo*spacing.
  static GridDims lattice(const IVec3& lo, const IVec3& n, double h) {
    return {n.x(), n.y(), n.z(), h, (lo.cast<double>().array() - 0.5).matrix() * h};
  }

  Index size() const { return Index(nx) * ny * nz; }
  int dimension() const { return nz == 1 ? 2 : 3; }
  IVec3 extent() const { return {nx, ny, nz}; }
  double cell_measure() const { return dimension() == 2 ? spacing * spacing : spacing * spacing * spacing; }

  Index index(int i, int j, int k) const { return i + Index(nx) * (j + Index(ny) * k); }
  Index index(const IVec3& c) const { return index(c.x(), c.y(), c.z()); }
  IVec3 coords(Index idx) const {
    const int i = int(idx % nx);
    const Index r = idx / nx;
    return {i, int(r % ny), int(r / ny)};
  }
  bool contains(const IVec3& c) const {
    return c.x() >= 0 && c.y() >= 0 && c.z() >= 0 && c.x() < nx && c.y() < ny && c.z() < nz;
  }

  Vec3 center(const IVec3& c) const { return origin + (c.cast<double>().array() + 0.5).matrix() * spacing; }
  Vec3 center(Index idx) const { return center(coords(idx)); }

  /// Lattice coordinate of voxel (0,0,0) when voxel centers sit on multiples of spacing.
  IVec3 lattice_offset() const {
    const Vec3 f = (origin / spacing).array() + 0.5;
    return {int(std::lround(f.x())), int(std::lround(f.y())), int(std::lround(f.z()))};
  }
  bool lattice_aligned() const {
    const Vec3 f = (origin / spacing).array() + 0.5;
    return (f - lattice_offset().cast<double>()).cwiseAbs().maxCoeff() < 1e-6;
  }

  bool same_shape(const GridDims& o) const { return nx == o.nx && ny == o.ny && nz == o.nz; }
  bool same_spacing(const GridDims& o) const {
    return std::abs(spacing - o.spacing) <= 1e-12 * std::max(spacing, o.spacing);
  }
  bool operator==(const GridDims& o) const {
    return same_shape(o) && same_spacing(o) && (origin - o.origin).cwiseAbs().maxCoeff() <= 1e-9 * spacing;
  }

  void validate() const {
    if (nx <= 0 || ny <= 0 || nz <= 0)
      throw ValidationError("grid dimensions must be positive, got " + std::to_string(nx) + "x" +
                            std::to_string(ny) + "x" + std::to_string(nz));
    if (!(spacing > 0.0) || !std::isfinite(spacing)) throw ValidationError("grid spacing must be positive");
    if (!origin.allFinite()) throw ValidationError("grid origin must be finite");
  }
};

/// Uniform voxel field, x fastest then y then z.
template <typename Scalar>
class Grid {
 public:
  using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

  Grid() = default;
  explicit Grid(const GridDims& dims, Scalar fill = Scalar(0)) : dims_(dims) {
    dims_.validate();
    values_ = Array::Constant(dims_.size(), fill);
  }
  Grid(const GridDims& dims, Array values) : dims_(dims), values_(std::move(values)) {
    dims_.validate();
    if (values_.size() != dims_.size()) throw ValidationError("grid value count does not match dims");
  }

  const GridDims& dims() const { return dims_; }
  const Array& values() const { return values_; }
  Array& values() { return values_; }
  Index size() const { return values_.size(); }

  Scalar& operator()(int i, int j, int k = 0) { return values_[dims_.index(i, j, k)]; }
  Scalar operator()(int i, int j, int k = 0) const { return values_[dims_.index(i, j, k)]; }
  Scalar& operator[](Index idx) { return values_[idx]; }
  Scalar operator[](Index idx) const { return values_[idx]; }

  Scalar at_or(const IVec3& c, Scalar fill) const { return dims_.contains(c) ? values_[dims_.index(c)] : fill; }

  template <typename Other>
  Grid<Other> cast() const {
    return Grid<Other>(dims_, values_.template cast<Other>());
  }

 private:
  GridDims dims_;
  Array values_;
};

using ScalarGrid = Grid<double>;

namespace detail {
template <typename A, typename B>
void require_same_shape(const Grid<A>& a, const Grid<B>& b, const char* what) {
  if (!a.dims().same_shape(b.dims()) || !a.dims().same_spacing(b.dims()))
    throw ValidationError(std::string(what) + ": grid dimension mismatch");
}
}  // namespace detail

/// Sum of values times voxel measure (area in 2D, volume in 3D).
template <typename Scalar>
double integrate(const Grid<Scalar>& g) {
  return double(g.values().template cast<double>().sum()) * g.dims().cell_measure();
}

template <typename Scalar>
Index count_nonzero(const Grid<Scalar>& g) {
  return (g.values() != Scalar(0)).count();
}

template <typename Scalar>
bool is_indicator(const Grid<Scalar>& g) {
  return ((g.values() == Scalar(0)) || (g.values() == Scalar(1))).all();
}

template <typename Scalar>
bool in_unit_range(const Grid<Scalar>& g, double tol = 0.0) {
  return g.size() == 0 || (g.values().minCoeff() >= -tol && g.values().maxCoeff() <= 1 + tol);
}

enum class CombineOp { Min, Max, Sum, Product };

template <typename Scalar>
Grid<Scalar> combine(const Grid<Scalar>& a, const Grid<Scalar>& b, CombineOp op) {
  detail::require_same_shape(a, b, "combine");
  switch (op) {
    case CombineOp::Min: return {a.dims(), a.values().min(b.values())};
    case CombineOp::Max: return {a.dims(), a.values().max(b.values())};
    case CombineOp::Sum: return {a.dims(), a.values() + b.values()};
    case CombineOp::Product: return {a.dims(), a.values() * b.values()};
  }
  throw ValidationError("combine: unknown op");
}

/// Indicator of {a > lambda}.
template <typename Scalar>
Grid<Scalar> threshold(const Grid<Scalar>& a, double lambda) {
  return {a.dims(), (a.values().template cast<double>() > lambda).template cast<Scalar>()};
}

/// mask * [field > lambda]: the masked sub-levelset complement used for secluded regions.
template <typename Scalar>
Grid<Scalar> mask_threshold(const Grid<Scalar>& mask, const Grid<Scalar>& field, double lambda) {
  detail::require_same_shape(mask, field, "mask_threshold");
  return {mask.dims(), mask.values() * (field.values().template cast<double>() > lambda).template cast<Scalar>()};
}

/// Point reflection through the world origin; reflect(reflect(g)) == g.
template <typename Scalar>
Grid<Scalar> reflect(const Grid<Scalar>& g) {
  const GridDims& d = g.dims();
  GridDims out = d;
  out.origin = -(d.origin + d.extent().cast<double>() * d.spacing);
  Grid<Scalar> r(out);
  for (int k = 0; k < d.nz; ++k)
    for (int j = 0; j < d.ny; ++j)
      for (int i = 0; i < d.nx; ++i) r(d.nx - 1 - i, d.ny - 1 - j, d.nz - 1 - k) = g(i, j, k);
  return r;
}

/// out(c) = g(c - t); reads outside g return `fill`.
template <typename Scalar>
Grid<Scalar> shift(const Grid<Scalar>& g, const IVec3& t, Scalar fill = Scalar(0)) {
  const GridDims& d = g.dims();
  Grid<Scalar> out(d, fill);
  const int i0 = std::max(0, t.x()), i1 = std::min(d.nx, d.nx + t.x());
  const int j0 = std::max(0, t.y()), j1 = std::min(d.ny, d.ny + t.y());
  const int k0 = std::max(0, t.z()), k1 = std::min(d.nz, d.nz + t.z());
  for (int k = k0; k < k1; ++k)
    for (int j = j0; j < j1; ++j)
      for (int i = i0; i < i1; ++i) out(i, j, k) = g(i - t.x(), j - t.y(), k - t.z());
  return out;
}

/// Copy of `g` embedded in a larger grid with `pad` voxels of `fill` on each side.
template <typename Scalar>
Grid<Scalar> pad(const Grid<Scalar>& g, const IVec3& pad, Scalar fill = Scalar(0)) {
  const GridDims& d = g.dims();
  GridDims out(d.nx + 2 * pad.x(), d.ny + 2 * pad.y(), d.nz + 2 * pad.z(), d.spacing,
               d.origin - pad.cast<double>() * d.spacing);
  Grid<Scalar> r(out, fill);
  for (int k = 0; k < d.nz; ++k)
    for (int j = 0; j < d.ny; ++j)
      for (int i = 0; i < d.nx; ++i) r(i + pad.x(), j + pad.y(), k + pad.z()) = g(i, j, k);
  return r;
}

}  // namespace nearnet

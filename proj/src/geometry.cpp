#include "nearnet/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace nearnet {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double segment_distance(const Vec3& p, const Vec3& a, const Vec3& b, double* param = nullptr) {
  const Vec3 ab = b - a;
  double t = (p - a).dot(ab) / ab.squaredNorm();
  if (param) *param = t;
  t = std::clamp(t, 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

std::string vec_str(const Vec3& v) {
  std::ostringstream s;
  s << "(" << v.x() << ", " << v.y() << ", " << v.z() << ")";
  return s.str();
}

}  // namespace

Primitive Primitive::box(const Vec3& center, const Vec3& size, const Rotation& pose) {
  Primitive p;
  p.kind = Kind::Box;
  p.center = center;
  p.size = size;
  p.pose = pose;
  return p;
}

Primitive Primitive::box_from_corners(const Vec3& lo, const Vec3& hi) {
  return box(0.5 * (lo + hi), hi - lo);
}

Primitive Primitive::sphere(const Vec3& center, double radius) {
  Primitive p;
  p.kind = Kind::Sphere;
  p.center = center;
  p.radius = radius;
  return p;
}

Primitive Primitive::cylinder(const Vec3& a, const Vec3& b, double radius) {
  Primitive p;
  p.kind = Kind::Cylinder;
  p.p0 = a;
  p.p1 = b;
  p.radius = radius;
  return p;
}

Primitive Primitive::capsule(const Vec3& a, const Vec3& b, double radius) {
  Primitive p = cylinder(a, b, radius);
  p.kind = Kind::Capsule;
  return p;
}

Primitive Primitive::half_space(const Vec3& point, const Vec3& normal) {
  Primitive p;
  p.kind = Kind::HalfSpace;
  p.center = point;
  p.normal = normal;
  return p;
}

void Primitive::validate() const {
  switch (kind) {
    case Kind::Box:
      if (!center.allFinite()) throw ValidationError("box: center must be finite");
      if (!(size.array() > 0.0).all() || size.hasNaN())
        throw ValidationError("box: every edge length must be positive, got " + vec_str(size));
      break;
    case Kind::Sphere:
      if (!center.allFinite()) throw ValidationError("sphere: center must be finite");
      if (!(radius > 0.0) || !std::isfinite(radius)) throw ValidationError("sphere: radius must be positive");
      break;
    case Kind::Cylinder:
    case Kind::Capsule:
      if (!p0.allFinite() || !p1.allFinite()) throw ValidationError("cylinder/capsule: endpoints must be finite");
      if (!(radius > 0.0) || !std::isfinite(radius))
        throw ValidationError("cylinder/capsule: radius must be positive");
      if ((p1 - p0).norm() <= 0.0) throw ValidationError("cylinder/capsule: endpoints coincide (zero length)");
      break;
    case Kind::HalfSpace:
      if (!center.allFinite()) throw ValidationError("half-space: point must be finite");
      if (!(normal.norm() > 0.0) || !normal.allFinite()) throw ValidationError("half-space: normal must be nonzero");
      break;
  }
}

bool Primitive::contains(const Vec3& p) const {
  switch (kind) {
    case Kind::Box: {
      const Vec3 local = pose.matrix().transpose() * (p - center);
      return (local.cwiseAbs().array() <= 0.5 * size.array()).all();
    }
    case Kind::Sphere:
      return (p - center).squaredNorm() <= radius * radius;
    case Kind::Cylinder: {
      double t = 0.0;
      const double d = segment_distance(p, p0, p1, &t);
      return t >= 0.0 && t <= 1.0 && d <= radius;
    }
    case Kind::Capsule:
      return segment_distance(p, p0, p1) <= radius;
    case Kind::HalfSpace:
      return (p - center).dot(normal) <= 0.0;
  }
  return false;
}

std::string Primitive::describe() const {
  switch (kind) {
    case Kind::Box: return "box center=" + vec_str(center) + " size=" + vec_str(size);
    case Kind::Sphere: return "sphere center=" + vec_str(center) + " r=" + std::to_string(radius);
    case Kind::Cylinder: return "cylinder " + vec_str(p0) + "-" + vec_str(p1) + " r=" + std::to_string(radius);
    case Kind::Capsule: return "capsule " + vec_str(p0) + "-" + vec_str(p1) + " r=" + std::to_string(radius);
    case Kind::HalfSpace: return "half-space point=" + vec_str(center) + " normal=" + vec_str(normal);
  }
  return "primitive";
}

std::pair<Vec3, Vec3> Primitive::bounds() const {
  switch (kind) {
    case Kind::Box: {
      Vec3 half = Vec3::Zero();
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
          const double w = std::abs(pose.matrix()(i, j));
          if (w > 0.0) half[i] += w * 0.5 * size[j];
        }
      return {center - half, center + half};
    }
    case Kind::Sphere: return {center.array() - radius, center.array() + radius};
    case Kind::Cylinder:
    case Kind::Capsule:
      return {p0.cwiseMin(p1).array() - radius, p0.cwiseMax(p1).array() + radius};
    case Kind::HalfSpace: return {Vec3::Constant(-kInf), Vec3::Constant(kInf)};
  }
  return {Vec3::Zero(), Vec3::Zero()};
}

ScalarGrid rasterize(std::span<const Primitive> shapes, const GridDims& dims, const Rotation& frame) {
  dims.validate();
  for (const auto& s : shapes) s.validate();
  ScalarGrid out(dims);
  if (shapes.empty()) return out;
  const Eigen::Matrix3d& m = frame.matrix();
  for (Index idx = 0; idx < dims.size(); ++idx) {
    const Vec3 p = m * dims.center(idx);
    for (const auto& s : shapes)
      if (s.contains(p)) {
        out[idx] = 1.0;
        break;
      }
  }
  return out;
}

ScalarGrid rasterize(const Primitive& shape, const GridDims& dims, const Rotation& frame) {
  return rasterize(std::span<const Primitive>(&shape, 1), dims, frame);
}

GridDims lattice_bounds(std::span<const Primitive> shapes, double spacing, bool planar) {
  if (shapes.empty()) throw ValidationError("lattice_bounds: no primitives");
  Vec3 lo = Vec3::Constant(kInf), hi = Vec3::Constant(-kInf);
  for (const auto& s : shapes) {
    s.validate();
    auto [a, b] = s.bounds();
    lo = lo.cwiseMin(a);
    hi = hi.cwiseMax(b);
  }
  if (planar) lo.z() = hi.z() = 0.0;
  if (!lo.allFinite() || !hi.allFinite()) throw ValidationError("lattice_bounds: unbounded primitive");
  IVec3 l, n;
  for (int a = 0; a < 3; ++a) {
    l[a] = int(std::floor(lo[a] / spacing));
    n[a] = int(std::ceil(hi[a] / spacing)) - l[a] + 1;
  }
  return GridDims::lattice(l, n, spacing);
}

ScalarGrid rotate_resample(const ScalarGrid& g, const Rotation& r) {
  const GridDims& d = g.dims();
  const bool planar = d.nz == 1;
  if (planar && !r.is_planar()) throw ValidationError("rotate_resample: 2D grids accept only rotations about Z");
  const Eigen::Matrix3d& m = r.matrix();
  const double h = d.spacing;

  Vec3 lo = Vec3::Constant(kInf), hi = Vec3::Constant(-kInf);
  const Vec3 box_lo = d.origin, box_hi = d.origin + d.extent().cast<double>() * h;
  for (int c = 0; c < 8; ++c) {
    const Vec3 corner((c & 1) ? box_hi.x() : box_lo.x(), (c & 2) ? box_hi.y() : box_lo.y(),
                      (c & 4) ? box_hi.z() : box_lo.z());
    const Vec3 q = m * corner;
    lo = lo.cwiseMin(q);
    hi = hi.cwiseMax(q);
  }
  IVec3 l, n;
  for (int a = 0; a < 3; ++a) {
    l[a] = int(std::ceil(lo[a] / h - 1e-9));
    n[a] = std::max(1, int(std::floor(hi[a] / h + 1e-9)) - l[a] + 1);
  }
  GridDims od = GridDims::lattice(l, n, h);
  if (planar) {
    od.nz = 1;
    od.origin.z() = d.origin.z();
  }

  ScalarGrid out(od);
  const Eigen::Matrix3d inv = m.transpose();
  for (int k = 0; k < od.nz; ++k)
    for (int j = 0; j < od.ny; ++j)
      for (int i = 0; i < od.nx; ++i) {
        const Vec3 q = inv * od.center(IVec3(i, j, k));
        const Vec3 f = (q - d.origin) / h;
        const IVec3 src(int(std::floor(f.x())), int(std::floor(f.y())), planar ? 0 : int(std::floor(f.z())));
        out(i, j, k) = g.at_or(src, 0.0);
      }
  return out;
}

ScalarGrid crop_to_support(const ScalarGrid& g) {
  const GridDims& d = g.dims();
  IVec3 lo(d.nx, d.ny, d.nz), hi(-1, -1, -1);
  for (Index idx = 0; idx < g.size(); ++idx)
    if (g[idx] != 0.0) {
      const IVec3 c = d.coords(idx);
      lo = lo.cwiseMin(c);
      hi = hi.cwiseMax(c);
    }
  if (hi.x() < 0) {
    lo.setZero();
    hi.setZero();
  }
  const IVec3 n = hi - lo + IVec3::Ones();
  GridDims od(n.x(), n.y(), n.z(), d.spacing, d.origin + lo.cast<double>() * d.spacing);
  ScalarGrid out(od);
  for (int k = 0; k < n.z(); ++k)
    for (int j = 0; j < n.y(); ++j)
      for (int i = 0; i < n.x(); ++i) out(i, j, k) = g(i + lo.x(), j + lo.y(), k + lo.z());
  return out;
}

}  // namespace nearnet

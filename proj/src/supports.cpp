#include "nearnet/supports.hpp"

#include <cmath>

namespace nearnet {

void BuildSpec::validate() const {
  if (!direction.allFinite() || std::abs(direction.norm() - 1.0) > 1e-9)
    throw ValidationError("build direction must be a unit vector");
  if (!(overhang_angle > 0.0 && overhang_angle <= 90.0))
    throw ValidationError("overhang angle must lie in (0, 90] degrees");
  if (!(density_threshold > 0.0 && density_threshold < 1.0))
    throw ValidationError("density threshold must lie in (0, 1)");
}

BuildFrame BuildFrame::from(const BuildSpec& spec, const GridDims& dims) {
  spec.validate();
  BuildFrame f;
  int found = -1;
  for (int a = 0; a < 3; ++a)
    if (std::abs(std::abs(spec.direction[a]) - 1.0) < 1e-9) found = a;
  if (found < 0)
    throw ValidationError("build direction must be aligned with a grid axis; pre-rotate the domain onto a "
                          "build-aligned grid");
  if (dims.nz == 1 && found == 2) throw ValidationError("2D build direction must lie along x or y");
  f.axis = found;
  f.sign = spec.direction[found] > 0 ? 1 : -1;
  f.layers = dims.extent()[found];
  return f;
}

void NearNetShape::validate() const {
  detail::require_same_shape(part, supports, "near-net shape");
  detail::require_same_shape(part, platform, "near-net shape");
  if (!is_indicator(part) || !is_indicator(supports) || !is_indicator(platform))
    throw ValidationError("near-net shape grids must be indicators");
  if ((part.values() * supports.values()).sum() > 1e-9) throw ValidationError("part and supports overlap");
}

std::vector<IVec3> support_stencil(const BuildSpec& spec, const BuildFrame& frame, const GridDims& dims) {
  std::vector<IVec3> offs;
  if (!spec.uses_cone_stencil()) {
    offs.push_back(IVec3::Zero());
    return offs;
  }
  int u = (frame.axis + 1) % 3, v = (frame.axis + 2) % 3;
  const bool planar = dims.nz == 1;
  if (planar) {
    u = frame.axis == 0 ? 1 : 0;
    v = -1;
  }
  for (int a = -1; a <= 1; ++a)
    for (int b = (v < 0 ? 0 : -1); b <= (v < 0 ? 0 : 1); ++b) {
      IVec3 o = IVec3::Zero();
      o[u] = a;
      if (v >= 0) o[v] = b;
      offs.push_back(o);
    }
  return offs;
}

namespace {

Grid<unsigned char> classify(const ScalarGrid& part, double thr) {
  Grid<unsigned char> m(part.dims());
  for (Index i = 0; i < part.size(); ++i) m[i] = part[i] >= thr ? 1 : 0;
  return m;
}

}  // namespace

ScalarGrid overhang_points(const ScalarGrid& part, const BuildSpec& spec) {
  return overhang_points(part, spec, ScalarGrid(part.dims()));
}

ScalarGrid overhang_points(const ScalarGrid& part, const BuildSpec& spec, const ScalarGrid& platform) {
  detail::require_same_shape(part, platform, "overhang_points");
  const GridDims& d = part.dims();
  const BuildFrame frame = BuildFrame::from(spec, d);
  const auto stencil = support_stencil(spec, frame, d);
  const auto mat = classify(part, spec.density_threshold);
  ScalarGrid out(d);
  for (Index idx = 0; idx < d.size(); ++idx) {
    if (!mat[idx]) continue;
    const IVec3 c = d.coords(idx);
    if (frame.layer_of(c) == 0) continue;
    const IVec3 b = frame.below(c);
    bool held = false;
    for (const IVec3& o : stencil) {
      const IVec3 s = b + o;
      if (d.contains(s) && (mat[d.index(s)] || platform[d.index(s)] != 0.0)) {
        held = true;
        break;
      }
    }
    if (!held) out[idx] = 1.0;
  }
  return out;
}

NearNetShape generate_supports(const ScalarGrid& part, const BuildSpec& spec, const ScalarGrid& platform) {
  detail::require_same_shape(part, platform, "generate_supports");
  const GridDims& d = part.dims();
  const BuildFrame frame = BuildFrame::from(spec, d);
  const auto stencil = support_stencil(spec, frame, d);
  const auto mat = classify(part, spec.density_threshold);

  int platform_top = -1;
  for (Index i = 0; i < d.size(); ++i)
    if (platform[i] != 0.0) platform_top = std::max(platform_top, frame.layer_of(d.coords(i)));
  for (Index i = 0; i < d.size(); ++i)
    if (mat[i] && frame.layer_of(d.coords(i)) <= platform_top)
      throw ValidationError("part material lies at or below the platform top surface (layer " +
                            std::to_string(platform_top) + ")");

  ScalarGrid sup(d);
  // Voxels of one layer, visited in a fixed order so the sweep is deterministic.
  std::vector<std::vector<Index>> by_layer(std::size_t(frame.layers));
  for (Index i = 0; i < d.size(); ++i) by_layer[std::size_t(frame.layer_of(d.coords(i)))].push_back(i);

  for (int layer = frame.layers - 1; layer >= 1; --layer) {
    for (Index idx : by_layer[std::size_t(layer)]) {
      if (!mat[idx] && sup[idx] == 0.0) continue;
      const IVec3 b = frame.below(d.coords(idx));
      bool held = false;
      for (const IVec3& o : stencil) {
        const IVec3 s = b + o;
        if (!d.contains(s)) continue;
        const Index si = d.index(s);
        if (mat[si] || platform[si] != 0.0 || sup[si] != 0.0) {
          held = true;
          break;
        }
      }
      if (!held) sup[d.index(b)] = 1.0;
    }
  }

  NearNetShape nn;
  nn.part = ScalarGrid(d, mat.values().cast<double>());
  nn.supports = std::move(sup);
  nn.platform = platform;
  nn.frame = frame;
  return nn;
}

std::vector<double> layer_coefficients(const GridDims& dims, int layer_axis, double q) {
  if (!(q >= 0.0)) throw ValidationError("layer coefficient exponent q must be non-negative");
  if (layer_axis < 0 || layer_axis > 2) throw ValidationError("layer axis must be 0, 1 or 2");
  const int n = dims.extent()[layer_axis];
  std::vector<double> w(static_cast<std::size_t>(n));
  for (int k = 1; k <= n; ++k) w[std::size_t(k - 1)] = std::pow(double(n - k + 1) / n, q);
  return w;
}

ScalarGrid layer_weight_field(const GridDims& dims, const BuildFrame& frame, double q) {
  const auto w = layer_coefficients(dims, frame.axis, q);
  ScalarGrid out(dims);
  for (Index i = 0; i < dims.size(); ++i) out[i] = w[std::size_t(frame.layer_of(dims.coords(i)))];
  return out;
}

}  // namespace nearnet

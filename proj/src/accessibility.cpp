#include "nearnet/accessibility.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace nearnet {

namespace {

ScalarGrid empty_lattice_grid(double spacing, bool planar) {
  GridDims d = GridDims::lattice(IVec3::Zero(), IVec3::Ones(), spacing);
  if (planar) d.origin.z() = -0.5 * spacing;
  return ScalarGrid(d);
}

IVec3 lattice_round(const Vec3& p, double h) {
  return {int(std::lround(p.x() / h)), int(std::lround(p.y() / h)), int(std::lround(p.z() / h))};
}

ScalarGrid embed(const ScalarGrid& g, const GridDims& target) {
  ScalarGrid out(target);
  const IVec3 off = g.dims().lattice_offset() - target.lattice_offset();
  const GridDims& d = g.dims();
  for (Index idx = 0; idx < d.size(); ++idx)
    if (g[idx] != 0.0) out[target.index(d.coords(idx) + off)] = g[idx];
  return out;
}

// Padding and kernel extent that fix a tool's transform window.
std::pair<IVec3, IVec3> window_key(const OrientedTool& t, bool planar) {
  IVec3 margin = IVec3::Zero();
  for (const auto& s : t.sharp_offsets) margin = margin.cwiseMax(s.cwiseAbs());
  if (planar) margin.z() = 0;
  return {margin, t.reflected.dims().extent()};
}

bool same_key(const std::pair<IVec3, IVec3>& a, const std::pair<IVec3, IVec3>& b) {
  return a.first == b.first && a.second == b.second;
}

}  // namespace

ToolAssembly ToolAssembly::from_primitives(std::string name, std::span<const Primitive> holder,
                                           std::span<const Primitive> cutter, double spacing, bool planar,
                                           const Vec3& axis, std::vector<Vec3> sharp_points,
                                           std::vector<Rotation> orientations, std::vector<std::string> labels) {
  if (cutter.empty()) throw ValidationError("tool '" + name + "': cutter needs at least one primitive");
  if (!(axis.norm() > 0.0)) throw ValidationError("tool '" + name + "': axis must be nonzero");
  ToolAssembly t;
  t.name = std::move(name);
  t.axis = axis.normalized();
  t.planar = planar;
  t.cutter = rasterize(cutter, lattice_bounds(cutter, spacing, planar));
  if (count_nonzero(t.cutter) == 0)
    throw ValidationError("tool '" + t.name + "': cutter covers no voxel center at spacing " + std::to_string(spacing));
  t.holder = holder.empty() ? empty_lattice_grid(spacing, planar)
                            : rasterize(holder, lattice_bounds(holder, spacing, planar));
  t.sharp_points = sharp_points.empty() ? default_sharp_points(t.cutter, t.axis) : std::move(sharp_points);
  t.orientations = std::move(orientations);
  t.orientation_labels = std::move(labels);
  t.validate();
  return t;
}

std::vector<Vec3> ToolAssembly::default_sharp_points(const ScalarGrid& cutter, const Vec3& axis) {
  const GridDims& d = cutter.dims();
  const Vec3 a = axis.normalized();
  double best = -std::numeric_limits<double>::infinity();
  for (Index idx = 0; idx < d.size(); ++idx)
    if (cutter[idx] != 0.0) best = std::max(best, d.center(idx).dot(a));
  std::vector<Vec3> pts;
  for (Index idx = 0; idx < d.size(); ++idx)
    if (cutter[idx] != 0.0 && d.center(idx).dot(a) >= best - 0.5 * d.spacing) pts.push_back(d.center(idx));
  return pts;
}

ScalarGrid ToolAssembly::body() const {
  const GridDims& hd = holder.dims();
  const GridDims& cd = cutter.dims();
  const IVec3 lo = hd.lattice_offset().cwiseMin(cd.lattice_offset());
  const IVec3 hi = (hd.lattice_offset() + hd.extent()).cwiseMax(cd.lattice_offset() + cd.extent());
  GridDims d = GridDims::lattice(lo, hi - lo, cd.spacing);
  if (planar) d.origin.z() = cd.origin.z();
  ScalarGrid out = embed(holder, d);
  const ScalarGrid c = embed(cutter, d);
  out.values() = out.values().max(c.values());
  return out;
}

std::string ToolAssembly::orientation_label(std::size_t i) const {
  if (i < orientation_labels.size() && !orientation_labels[i].empty()) return orientation_labels[i];
  return "R" + std::to_string(i);
}

void ToolAssembly::validate() const {
  const std::string who = "tool '" + name + "'";
  if (!holder.dims().lattice_aligned() || !cutter.dims().lattice_aligned())
    throw ValidationError(who + ": holder/cutter grids must be lattice aligned");
  if (!holder.dims().same_spacing(cutter.dims())) throw ValidationError(who + ": holder and cutter spacing differ");
  if (planar && (holder.dims().nz != 1 || cutter.dims().nz != 1))
    throw ValidationError(who + ": 2D tool grids must have nz = 1");
  if (!is_indicator(holder) || !is_indicator(cutter)) throw ValidationError(who + ": holder/cutter must be indicators");
  if (sharp_points.empty()) throw ValidationError(who + ": sharp-point set is empty");
  if (orientations.empty()) throw ValidationError(who + ": orientation set is empty");
  if (!orientation_labels.empty() && orientation_labels.size() != orientations.size())
    throw ValidationError(who + ": orientation label count mismatch");
  const GridDims& cd = cutter.dims();
  for (const Vec3& k : sharp_points) {
    const IVec3 c = lattice_round(k, cd.spacing) - cd.lattice_offset();
    if (planar && c.z() != 0) throw ValidationError(who + ": 2D sharp point has nonzero z");
    if (cutter.at_or(c, 0.0) != 1.0) throw ValidationError(who + ": sharp point lies outside the cutter");
  }
  if (planar)
    for (const auto& r : orientations)
      if (!r.is_planar()) throw ValidationError(who + ": 2D tools accept only rotations about Z");
  if (!(volume() > 0.0)) throw ValidationError(who + ": tool volume must be positive");
}

void MachiningSetup::validate() const {
  if (tools.empty()) throw ValidationError("machining setup needs at least one tool assembly");
  for (const auto& t : tools) {
    t.validate();
    if (!t.cutter.dims().same_spacing(platform.dims()))
      throw ValidationError("tool '" + t.name + "' spacing differs from the design grid");
    if (t.planar != (platform.dims().nz == 1))
      throw ValidationError("tool '" + t.name + "' dimensionality differs from the design grid");
  }
  if (!platform.dims().same_shape(fixture.dims()))
    throw ValidationError("platform and fixture must share the design grid");
  if (!is_indicator(platform) || !is_indicator(fixture))
    throw ValidationError("platform and fixture must be indicator grids");
  if ((platform.values() * fixture.values()).sum() > 0.0) throw ValidationError("platform and fixture overlap");
}

std::size_t MachiningSetup::pair_count() const {
  std::size_t n = 0;
  for (const auto& t : tools) n += t.orientations.size();
  return n;
}

OrientedTool orient_tool(const ToolAssembly& tool, const Rotation& r) {
  OrientedTool o;
  ScalarGrid body = tool.body();
  // A one-layer 3D body must not be taken for a 2D grid by the resampler.
  if (!tool.planar && body.dims().nz == 1) body = pad(body, IVec3(0, 0, 1));
  o.body = crop_to_support(rotate_resample(body, r));
  o.reflected = reflect(o.body);
  o.volume = integrate(o.body);
  if (!(o.volume > 0.0)) throw ValidationError("tool '" + tool.name + "' vanishes after resampling");
  const double h = o.body.dims().spacing;
  for (const Vec3& k : tool.sharp_points) {
    IVec3 s = lattice_round(r * k, h);
    if (tool.planar) s.z() = 0;
    if (std::find(o.sharp_offsets.begin(), o.sharp_offsets.end(), s) == o.sharp_offsets.end())
      o.sharp_offsets.push_back(s);
  }
  return o;
}

std::vector<OrientedTool> orient_all(const MachiningSetup& setup) {
  std::vector<OrientedTool> out;
  for (std::size_t i = 0; i < setup.tools.size(); ++i)
    for (std::size_t j = 0; j < setup.tools[i].orientations.size(); ++j) {
      out.push_back(orient_tool(setup.tools[i], setup.tools[i].orientations[j]));
      out.back().tool_index = i;
      out.back().orientation_index = j;
    }
  return out;
}

ImfEvaluator::ImfEvaluator(const ScalarGrid& obstacle, std::span<const OrientedTool> tools, bool weighted)
    : dims_(obstacle.dims()), weighted_(weighted) {
  if (tools.empty()) throw ValidationError("IMF: no oriented tools");
  if (weighted ? obstacle.values().minCoeff() < 0.0 : !in_unit_range(obstacle, 1e-9))
    throw ValidationError(weighted ? "IMF: weighted obstacle must be non-negative"
                                   : "IMF: obstacle density must lie in [0, 1]");
  for (const auto& t : tools) {
    const auto key = window_key(t, dims_.nz == 1);
    if (std::any_of(keys_.begin(), keys_.end(), [&](const auto& k) { return same_key(k, key); })) continue;
    keys_.push_back(key);
    windows_.push_back({key.first, std::make_shared<const ObstacleSpectrum>(pad(obstacle, key.first), key.second)});
  }
}

const ImfEvaluator::Window& ImfEvaluator::window(const OrientedTool& tool) const {
  const auto key = window_key(tool, dims_.nz == 1);
  for (std::size_t i = 0; i < keys_.size(); ++i)
    if (same_key(keys_[i], key)) return windows_[i];
  throw ValidationError("IMF: tool was not registered with this evaluator");
}

KernelSpectrum ImfEvaluator::transform(const OrientedTool& tool) const {
  return window(tool).spectrum->transform(tool.reflected);
}

ScalarGrid ImfEvaluator::evaluate(const OrientedTool& tool, const KernelSpectrum& kernel) const {
  const Window& w = window(tool);
  const ScalarGrid g = w.spectrum->correlate(kernel);
  const GridDims& pd = g.dims();
  ScalarGrid out(dims_, std::numeric_limits<double>::infinity());
  for (const IVec3& s : tool.sharp_offsets) {
    const IVec3 o = w.margin - s;
    for (int k = 0; k < dims_.nz; ++k)
      for (int j = 0; j < dims_.ny; ++j) {
        const Index src = pd.index(o.x(), j + o.y(), k + o.z());
        const Index dst = dims_.index(0, j, k);
        for (int i = 0; i < dims_.nx; ++i) out[dst + i] = std::min(out[dst + i], g[src + i]);
      }
  }
  out.values() /= tool.volume;
  if (!weighted_) out.values() = out.values().min(1.0);
  out.values() = out.values().max(0.0);
  return out;
}

ScalarGrid assemble_obstacle_density(const ScalarGrid& rho_part, const MachiningSetup& setup) {
  detail::require_same_shape(rho_part, setup.platform, "assemble_obstacle_density");
  detail::require_same_shape(rho_part, setup.fixture, "assemble_obstacle_density");
  const auto blocked = setup.platform.values() + setup.fixture.values();
  for (Index i = 0; i < rho_part.size(); ++i)
    if (blocked[i] > 0.0 && rho_part[i] > 1e-6)
      throw ValidationError("part density overlaps platform/fixture at voxel " + std::to_string(i) +
                            " (obstacles must be a disjoint union)");
  ScalarGrid rho(rho_part.dims(), rho_part.values() + blocked);
  if (rho.values().maxCoeff() > 1.0 + 1e-9 || rho.values().minCoeff() < 0.0)
    throw ValidationError("obstacle density leaves [0, 1]");
  return rho;
}

ScalarGrid imf_rotated_tool(const ScalarGrid& rho_obstacle, const Rotation& r, const ToolAssembly& tool) {
  tool.validate();
  const OrientedTool o = orient_tool(tool, r);
  return ImfEvaluator(rho_obstacle, std::span<const OrientedTool>(&o, 1)).evaluate(o);
}

namespace {

IMFField reduce_min(std::vector<ScalarGrid> fields, std::span<const OrientedTool> tools, const ImfOptions& options) {
  IMFField out;
  out.values = std::move(fields[0]);
  const GridDims& d = out.values.dims();
  if (options.provenance)
    out.provenance = ImfProvenance{Grid<int>(d, int(tools[0].tool_index)), Grid<int>(d, int(tools[0].orientation_index))};
  for (std::size_t p = 1; p < fields.size(); ++p) {
    const ScalarGrid& f = fields[p];
    for (Index i = 0; i < f.size(); ++i)
      if (f[i] < out.values[i]) {
        out.values[i] = f[i];
        if (out.provenance) {
          out.provenance->tool[i] = int(tools[p].tool_index);
          out.provenance->orientation[i] = int(tools[p].orientation_index);
        }
      }
  }
  return out;
}

}  // namespace

IMFField imf_over_obstacle(const ScalarGrid& rho_obstacle, std::span<const OrientedTool> tools,
                           const ImfOptions& options) {
  const ImfEvaluator eval(rho_obstacle, tools);
  std::vector<ScalarGrid> fields(tools.size());
  const long n = long(tools.size());
#pragma omp parallel for schedule(dynamic)
  for (long p = 0; p < n; ++p) fields[std::size_t(p)] = eval.evaluate(tools[std::size_t(p)]);
  return reduce_min(std::move(fields), tools, options);
}

ImfCache::ImfCache(std::vector<OrientedTool> tools, bool weighted) : tools_(std::move(tools)), weighted_(weighted) {
  if (tools_.empty()) throw ValidationError("IMF: no oriented tools");
}

std::vector<ScalarGrid> ImfCache::evaluate_each(const ScalarGrid& obstacle) {
  const ImfEvaluator eval(obstacle, tools_, weighted_);
  if (!dims_ || !(*dims_ == obstacle.dims())) {
    kernels_.clear();
    dims_ = obstacle.dims();
  }
  if (kernels_.empty()) {
    kernels_.resize(tools_.size());
    const long n = long(tools_.size());
#pragma omp parallel for schedule(dynamic)
    for (long p = 0; p < n; ++p) kernels_[std::size_t(p)] = eval.transform(tools_[std::size_t(p)]);
  }
  std::vector<ScalarGrid> fields(tools_.size());
  const long n = long(tools_.size());
#pragma omp parallel for schedule(dynamic)
  for (long p = 0; p < n; ++p)
    fields[std::size_t(p)] = eval.evaluate(tools_[std::size_t(p)], kernels_[std::size_t(p)]);
  return fields;
}

IMFField ImfCache::evaluate(const ScalarGrid& obstacle, const ImfOptions& options) {
  return reduce_min(evaluate_each(obstacle), tools_, options);
}

IMFField imf_overall(const ScalarGrid& rho_part, const MachiningSetup& setup, const ImfOptions& options) {
  setup.validate();
  const ScalarGrid rho_o = assemble_obstacle_density(rho_part, setup);
  const auto tools = orient_all(setup);
  return imf_over_obstacle(rho_o, tools, options);
}

SecludedRegion secluded_supports(const IMFField& imf, const ScalarGrid& supports, double lambda) {
  if (!(lambda > 0.0 && lambda < 1.0)) throw ValidationError("secluded_supports: lambda must lie in (0, 1)");
  SecludedRegion r;
  r.mask = mask_threshold(supports, imf.values, lambda);
  r.volume = integrate(r.mask);
  r.support_volume = integrate(supports);
  r.ratio = r.support_volume > 0.0 ? r.volume / r.support_volume : 0.0;
  return r;
}

}  // namespace nearnet

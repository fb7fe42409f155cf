#include "nearnet/config.hpp"

#include <yaml-cpp/yaml.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace nearnet {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kDeg = 3.14159265358979323846 / 180.0;

class Reader {
 public:
  explicit Reader(std::string source) : source_(std::move(source)) {}

  std::vector<std::string> issues;

  void fail(const YAML::Node& n, const std::string& msg) {
    const YAML::Mark m = n.IsDefined() ? n.Mark() : YAML::Mark::null_mark();
    if (m.is_null())
      issues.push_back(source_ + ": " + msg);
    else
      issues.push_back(source_ + ":" + std::to_string(m.line + 1) + ":" + std::to_string(m.column + 1) + ": " + msg);
  }

  bool map(const YAML::Node& n, const std::string& what, std::initializer_list<const char*> keys) {
    if (!n.IsMap()) {
      fail(n, what + " must be a mapping");
      return false;
    }
    const std::set<std::string> allowed(keys.begin(), keys.end());
    for (const auto& kv : n) {
      const std::string k = kv.first.as<std::string>();
      if (!allowed.count(k)) fail(kv.first, "unknown key '" + k + "' in " + what);
    }
    return true;
  }

  template <typename T>
  T as(const YAML::Node& n, const std::string& what, T fallback) {
    try {
      return n.as<T>();
    } catch (const YAML::Exception&) {
      fail(n, what + ": expected " + type_name<T>());
      return fallback;
    }
  }

  template <typename T>
  void opt(const YAML::Node& m, const char* key, T& out, const std::string& ctx) {
    const YAML::Node n = m[key];
    if (n) out = as<T>(n, ctx + "." + key, out);
  }

  /// `dim` numbers (2D configs may omit z); missing z is 0.
  std::optional<Vec3> vec(const YAML::Node& n, const std::string& what, int dim) {
    if (!n.IsSequence() || int(n.size()) != dim) {
      fail(n, what + ": expected a list of " + std::to_string(dim) + " numbers");
      return std::nullopt;
    }
    Vec3 v = Vec3::Zero();
    for (int i = 0; i < dim; ++i) {
      try {
        v[i] = n[std::size_t(i)].as<double>();
      } catch (const YAML::Exception&) {
        fail(n[std::size_t(i)], what + ": expected a number");
        return std::nullopt;
      }
    }
    if (!v.allFinite()) {
      fail(n, what + ": values must be finite");
      return std::nullopt;
    }
    return v;
  }

 private:
  template <typename T>
  static const char* type_name() {
    if constexpr (std::is_same_v<T, bool>) return "true or false";
    if constexpr (std::is_integral_v<T>) return "an integer";
    if constexpr (std::is_floating_point_v<T>) return "a number";
    return "a string";
  }

  std::string source_;
};

std::optional<Rotation> parse_rotation(Reader& r, const YAML::Node& n, const std::string& what, bool planar,
                                       std::string* label = nullptr) {
  if (n.IsScalar()) {
    const double deg = r.as<double>(n, what, 0.0);
    if (label) {
      std::ostringstream os;
      os << deg;
      *label = os.str();
    }
    return Rotation::about_z(deg * kDeg);
  }
  if (!r.map(n, what, {"axis", "angle", "label"})) return std::nullopt;
  if (!n["angle"]) {
    r.fail(n, what + ": missing 'angle'");
    return std::nullopt;
  }
  const double deg = r.as<double>(n["angle"], what + ".angle", 0.0);
  Vec3 axis = Vec3::UnitZ();
  if (n["axis"]) {
    const auto a = r.vec(n["axis"], what + ".axis", 3);
    if (!a) return std::nullopt;
    axis = *a;
  }
  if (!(axis.norm() > 0.0)) {
    r.fail(n, what + ": rotation axis must be nonzero");
    return std::nullopt;
  }
  const Rotation rot = Rotation::axis_angle(axis.normalized(), deg * kDeg);
  if (planar && !rot.is_planar()) {
    r.fail(n, what + ": 2D problems accept only rotations about z");
    return std::nullopt;
  }
  if (label) {
    std::ostringstream os;
    if (n["label"])
      os << r.as<std::string>(n["label"], what + ".label", "");
    else
      os << "axis(" << axis.x() << "," << axis.y() << "," << axis.z() << ")@" << deg;
    *label = os.str();
  }
  return rot;
}

std::optional<Primitive> parse_primitive(Reader& r, const YAML::Node& n, const std::string& what, int dim) {
  if (!n.IsMap() || n.size() != 1) {
    r.fail(n, what + ": expected a mapping with one of box, sphere, cylinder, capsule, half_space");
    return std::nullopt;
  }
  const auto kv = *n.begin();
  const std::string kind = kv.first.as<std::string>();
  const YAML::Node b = kv.second;
  const std::string ctx = what + "." + kind;
  const bool planar = dim == 2;
  try {
    if (kind == "box") {
      if (!r.map(b, ctx, {"min", "max", "center", "size", "rotation"})) return std::nullopt;
      if (b["min"] || b["max"]) {
        const auto lo = r.vec(b["min"], ctx + ".min", dim), hi = r.vec(b["max"], ctx + ".max", dim);
        if (!lo || !hi) return std::nullopt;
        Vec3 c = 0.5 * (*lo + *hi), s = *hi - *lo;
        if (planar) s.z() = kInf;
        return Primitive::box(c, s);
      }
      const auto c = r.vec(b["center"], ctx + ".center", dim), s = r.vec(b["size"], ctx + ".size", dim);
      if (!c || !s) return std::nullopt;
      Vec3 size = *s;
      if (planar) size.z() = kInf;
      Rotation pose;
      if (b["rotation"]) {
        const auto rot = parse_rotation(r, b["rotation"], ctx + ".rotation", planar);
        if (!rot) return std::nullopt;
        pose = *rot;
      }
      return Primitive::box(*c, size, pose);
    }
    if (kind == "sphere") {
      if (!r.map(b, ctx, {"center", "radius"})) return std::nullopt;
      const auto c = r.vec(b["center"], ctx + ".center", dim);
      if (!c) return std::nullopt;
      return Primitive::sphere(*c, r.as<double>(b["radius"], ctx + ".radius", 1.0));
    }
    if (kind == "cylinder" || kind == "capsule") {
      if (!r.map(b, ctx, {"p0", "p1", "radius"})) return std::nullopt;
      const auto p0 = r.vec(b["p0"], ctx + ".p0", dim), p1 = r.vec(b["p1"], ctx + ".p1", dim);
      if (!p0 || !p1) return std::nullopt;
      const double rad = r.as<double>(b["radius"], ctx + ".radius", 1.0);
      return kind == "cylinder" ? Primitive::cylinder(*p0, *p1, rad) : Primitive::capsule(*p0, *p1, rad);
    }
    if (kind == "half_space") {
      if (!r.map(b, ctx, {"point", "normal"})) return std::nullopt;
      const auto p = r.vec(b["point"], ctx + ".point", dim), nn = r.vec(b["normal"], ctx + ".normal", dim);
      if (!p || !nn) return std::nullopt;
      return Primitive::half_space(*p, *nn);
    }
  } catch (const Error& e) {
    r.fail(b, ctx + ": " + e.what());
    return std::nullopt;
  }
  r.fail(kv.first, what + ": unknown primitive '" + kind + "'");
  return std::nullopt;
}

std::vector<Primitive> parse_primitives(Reader& r, const YAML::Node& n, const std::string& what, int dim) {
  std::vector<Primitive> out;
  if (!n) return out;
  if (!n.IsSequence()) {
    r.fail(n, what + ": expected a list of primitives");
    return out;
  }
  for (std::size_t i = 0; i < n.size(); ++i)
    if (auto p = parse_primitive(r, n[i], what + "[" + std::to_string(i) + "]", dim)) {
      try {
        p->validate();
        out.push_back(*p);
      } catch (const Error& e) {
        r.fail(n[i], what + "[" + std::to_string(i) + "]: " + e.what());
      }
    }
  return out;
}

/// Node positions are origin + index * spacing; 2D grids have a single node layer at z = 0.
struct NodeLattice {
  Vec3 origin;
  double h;
  IVec3 last;
  int dim;

  std::vector<IVec3> select(const Vec3& lo, const Vec3& hi) const {
    std::vector<IVec3> out;
    const double tol = 1e-6 * h;
    IVec3 a, b;
    for (int k = 0; k < 3; ++k) {
      if (k == 2 && dim == 2) {
        a[k] = b[k] = 0;
        continue;
      }
      a[k] = std::max(0, int(std::ceil((lo[k] - origin[k] - tol) / h)));
      b[k] = std::min(last[k], int(std::floor((hi[k] - origin[k] + tol) / h)));
    }
    for (int k = a.z(); k <= b.z(); ++k)
      for (int j = a.y(); j <= b.y(); ++j)
        for (int i = a.x(); i <= b.x(); ++i) out.emplace_back(i, j, k);
    return out;
  }
  std::optional<IVec3> nearest(const Vec3& p) const {
    IVec3 n;
    for (int k = 0; k < 3; ++k) {
      n[k] = k == 2 && dim == 2 ? 0 : int(std::lround((p[k] - origin[k]) / h));
      if (n[k] < 0 || n[k] > last[k]) return std::nullopt;
    }
    return n;
  }
};

std::vector<IVec3> parse_region(Reader& r, const YAML::Node& n, const std::string& what, const NodeLattice& nodes) {
  if (n["point"]) {
    const auto p = r.vec(n["point"], what + ".point", nodes.dim);
    if (!p) return {};
    if (auto node = nodes.nearest(*p)) return {*node};
    r.fail(n["point"], what + ": point lies outside the grid");
    return {};
  }
  if (n["box"]) {
    const YAML::Node b = n["box"];
    if (!r.map(b, what + ".box", {"min", "max"})) return {};
    const auto lo = r.vec(b["min"], what + ".box.min", nodes.dim), hi = r.vec(b["max"], what + ".box.max", nodes.dim);
    if (!lo || !hi) return {};
    auto sel = nodes.select(*lo, *hi);
    if (sel.empty()) r.fail(b, what + ": box selects no grid nodes");
    return sel;
  }
  r.fail(n, what + ": expected 'point' or 'box'");
  return {};
}

int axis_index(const std::string& s) { return s == "x" ? 0 : s == "y" ? 1 : s == "z" ? 2 : -1; }

void parse_boundary(Reader& r, const YAML::Node& n, OptimizationProblem& p, const NodeLattice& nodes) {
  if (!r.map(n, "boundary", {"fixed", "loads"})) return;
  const int dim = nodes.dim;
  const YAML::Node fixed = n["fixed"];
  if (!fixed || !fixed.IsSequence() || fixed.size() == 0) r.fail(n, "boundary.fixed: expected a non-empty list");
  if (fixed && fixed.IsSequence())
    for (std::size_t i = 0; i < fixed.size(); ++i) {
      const std::string what = "boundary.fixed[" + std::to_string(i) + "]";
      const YAML::Node f = fixed[i];
      if (!r.map(f, what, {"point", "box", "axes"})) continue;
      std::vector<int> axes;
      if (!f["axes"] || (f["axes"].IsScalar() && f["axes"].as<std::string>() == "all")) {
        for (int a = 0; a < dim; ++a) axes.push_back(a);
      } else if (f["axes"].IsSequence()) {
        for (const auto& a : f["axes"]) {
          const int ai = axis_index(r.as<std::string>(a, what + ".axes", ""));
          if (ai < 0 || ai >= dim)
            r.fail(a, what + ".axes: expected x, y" + std::string(dim == 3 ? " or z" : ""));
          else
            axes.push_back(ai);
        }
      } else {
        r.fail(f["axes"], what + ".axes: expected 'all' or a list of axis names");
      }
      for (const IVec3& node : parse_region(r, f, what, nodes))
        for (int a : axes) p.bc.fixed.push_back({node, a});
    }
  const YAML::Node loads = n["loads"];
  if (loads && !loads.IsSequence()) r.fail(loads, "boundary.loads: expected a list");
  if (loads && loads.IsSequence())
    for (std::size_t i = 0; i < loads.size(); ++i) {
      const std::string what = "boundary.loads[" + std::to_string(i) + "]";
      const YAML::Node l = loads[i];
      if (!r.map(l, what, {"point", "box", "force"})) continue;
      const auto force = r.vec(l["force"], what + ".force", dim);
      const auto sel = parse_region(r, l, what, nodes);
      if (!force || sel.empty()) continue;
      for (const IVec3& node : sel)
        for (int a = 0; a < dim; ++a)
          if ((*force)[a] != 0.0) p.bc.loads.push_back({node, a, (*force)[a] / double(sel.size())});
    }
}

void parse_tools(Reader& r, const YAML::Node& n, OptimizationProblem& p, int dim) {
  if (!n || !n.IsSequence() || n.size() == 0) {
    r.fail(n, "tools: expected a non-empty list of tool assemblies");
    return;
  }
  for (std::size_t i = 0; i < n.size(); ++i) {
    const std::string what = "tools[" + std::to_string(i) + "]";
    const YAML::Node t = n[i];
    if (!r.map(t, what, {"name", "axis", "cutter", "holder", "sharp_points", "orientations"})) continue;
    std::string name = "tool" + std::to_string(i);
    r.opt(t, "name", name, what);
    Vec3 axis = Vec3::UnitX();
    if (t["axis"])
      if (auto a = r.vec(t["axis"], what + ".axis", dim)) axis = *a;
    const auto cutter = parse_primitives(r, t["cutter"], what + ".cutter", dim);
    if (cutter.empty()) r.fail(t, what + ": cutter needs at least one primitive");
    const auto holder = parse_primitives(r, t["holder"], what + ".holder", dim);
    std::vector<Vec3> sharp;
    if (t["sharp_points"]) {
      if (!t["sharp_points"].IsSequence())
        r.fail(t["sharp_points"], what + ".sharp_points: expected a list of points");
      else
        for (const auto& s : t["sharp_points"])
          if (auto v = r.vec(s, what + ".sharp_points", dim)) sharp.push_back(*v);
    }
    std::vector<Rotation> rots;
    std::vector<std::string> labels;
    const YAML::Node o = t["orientations"];
    if (!o || !o.IsSequence() || o.size() == 0) {
      r.fail(t, what + ".orientations: expected a non-empty list");
    } else {
      for (std::size_t j = 0; j < o.size(); ++j) {
        std::string label;
        if (auto rot = parse_rotation(r, o[j], what + ".orientations[" + std::to_string(j) + "]", dim == 2, &label)) {
          rots.push_back(*rot);
          labels.push_back(label);
        }
      }
    }
    if (cutter.empty() || rots.empty()) continue;
    try {
      p.setup.tools.push_back(ToolAssembly::from_primitives(name, holder, cutter, p.dims.spacing, dim == 2, axis,
                                                            std::move(sharp), std::move(rots), std::move(labels)));
    } catch (const Error& e) {
      r.fail(t, what + ": " + e.what());
    }
  }
}

void parse_optimizer(Reader& r, const YAML::Node& n, OptimizationConfig& c) {
  if (!n) return;
  if (!r.map(n, "optimizer",
             {"volume_fraction", "epsilon", "beta", "q", "w_acc_max", "w_acc_step", "i_acc", "i_rho", "lambda",
              "move_limit", "oc_damping", "delta_tol", "max_iter", "filter_radius", "oc_floor", "track_accessibility",
              "supports_as_obstacles"}))
    return;
  const std::string w = "optimizer";
  r.opt(n, "volume_fraction", c.volume_fraction, w);
  r.opt(n, "epsilon", c.epsilon, w);
  r.opt(n, "beta", c.beta, w);
  r.opt(n, "q", c.q, w);
  r.opt(n, "w_acc_max", c.w_acc_max, w);
  r.opt(n, "w_acc_step", c.w_acc_step, w);
  r.opt(n, "i_acc", c.i_acc, w);
  r.opt(n, "i_rho", c.i_rho, w);
  r.opt(n, "lambda", c.lambda, w);
  r.opt(n, "move_limit", c.move_limit, w);
  r.opt(n, "oc_damping", c.oc_damping, w);
  if (n["delta_tol"]) c.delta_tol = r.as<double>(n["delta_tol"], w + ".delta_tol", 0.0);
  r.opt(n, "max_iter", c.max_iter, w);
  r.opt(n, "filter_radius", c.filter_radius, w);
  r.opt(n, "oc_floor", c.oc_floor, w);
  r.opt(n, "track_accessibility", c.track_accessibility, w);
  r.opt(n, "supports_as_obstacles", c.supports_as_obstacles, w);
}

OptimizationProblem build(Reader& r, const YAML::Node& root) {
  OptimizationProblem p;
  if (!r.map(root, "problem file",
             {"name", "grid", "build", "material", "solver", "boundary", "design", "fixtures", "tools", "optimizer",
              "planner", "output", "part"})) {
    throw ValidationReport(r.issues);
  }
  p.name = "problem";
  r.opt(root, "name", p.name, "problem");

  // Grid and build frame first: every other section depends on them.
  const YAML::Node g = root["grid"];
  IVec3 n = IVec3::Ones();
  double h = 1.0;
  int dim = 0;
  if (!g) {
    r.fail(root, "missing 'grid' section");
  } else if (r.map(g, "grid", {"size", "spacing"})) {
    const YAML::Node s = g["size"];
    if (!s || !s.IsSequence() || (s.size() != 2 && s.size() != 3)) {
      r.fail(s ? s : g, "grid.size: expected 2 or 3 positive integers");
    } else {
      dim = int(s.size());
      for (int a = 0; a < dim; ++a) {
        n[a] = r.as<int>(s[std::size_t(a)], "grid.size", 0);
        if (n[a] <= 0) {
          r.fail(s[std::size_t(a)], "grid.size: entries must be positive");
          dim = 0;
        }
      }
    }
    r.opt(g, "spacing", h, "grid");
    if (!(h > 0.0) || !std::isfinite(h)) {
      r.fail(g, "grid.spacing must be positive");
      dim = 0;
    }
  }

  int platform = 2;
  const YAML::Node b = root["build"];
  if (b && r.map(b, "build", {"direction", "overhang_angle", "density_threshold", "platform_thickness"})) {
    if (dim && b["direction"])
      if (auto v = r.vec(b["direction"], "build.direction", dim)) {
        if (v->norm() > 0.0)
          p.build.direction = v->normalized();
        else
          r.fail(b["direction"], "build.direction must be nonzero");
      }
    r.opt(b, "overhang_angle", p.build.overhang_angle, "build");
    r.opt(b, "density_threshold", p.build.density_threshold, "build");
    r.opt(b, "platform_thickness", platform, "build");
    if (platform < 1) r.fail(b, "build.platform_thickness must be at least one layer");
  } else if (dim == 2) {
    p.build.direction = Vec3::UnitY();
  }

  const YAML::Node m = root["material"];
  if (m && r.map(m, "material", {"youngs_modulus", "poisson_ratio", "simp_penalty", "rho_min"})) {
    r.opt(m, "youngs_modulus", p.material.youngs_modulus, "material");
    r.opt(m, "poisson_ratio", p.material.poisson_ratio, "material");
    r.opt(m, "simp_penalty", p.material.simp_penalty, "material");
    r.opt(m, "rho_min", p.material.rho_min, "material");
  }
  const YAML::Node sv = root["solver"];
  if (sv && r.map(sv, "solver", {"method", "tolerance", "max_iterations"})) {
    std::string method = "cg";
    r.opt(sv, "method", method, "solver");
    if (method == "cg")
      p.solver.solver = LinearSolver::ConjugateGradient;
    else if (method == "cholesky")
      p.solver.solver = LinearSolver::Cholesky;
    else
      r.fail(sv["method"], "solver.method: expected 'cg' or 'cholesky'");
    r.opt(sv, "tolerance", p.solver.tolerance, "solver");
    r.opt(sv, "max_iterations", p.solver.max_iterations, "solver");
  }
  parse_optimizer(r, root["optimizer"], p.optimizer);
  const YAML::Node pl = root["planner"];
  if (pl && r.map(pl, "planner", {"tau", "layer_fraction", "obstacle_penalty", "max_steps"})) {
    r.opt(pl, "tau", p.planner.tau, "planner");
    r.opt(pl, "layer_fraction", p.planner.layer_fraction, "planner");
    r.opt(pl, "obstacle_penalty", p.planner.obstacle_penalty, "planner");
    r.opt(pl, "max_steps", p.planner.max_steps, "planner");
  }
  const YAML::Node out = root["output"];
  if (out && r.map(out, "output", {"snapshot_every", "vtk", "pgm"})) {
    r.opt(out, "snapshot_every", p.output.snapshot_every, "output");
    r.opt(out, "vtk", p.output.vtk, "output");
    r.opt(out, "pgm", p.output.pgm, "output");
  }

  if (!dim) {
    if (!root["tools"]) r.fail(root, "tools: expected a non-empty list of tool assemblies");
    throw ValidationReport(r.issues);
  }

  // Grid layout: design domain [0, n*h) plus platform layers on the side the build direction points away from.
  int axis = -1;
  for (int a = 0; a < dim; ++a)
    if (std::abs(std::abs(p.build.direction[a]) - 1.0) < 1e-9) axis = a;
  if (axis < 0) {
    r.fail(b ? b["direction"] : root, "build.direction must be aligned with a grid axis");
    axis = 1;
  }
  const int sign = p.build.direction[axis] > 0 ? 1 : -1;
  IVec3 ext = n;
  ext[axis] += platform;
  Vec3 origin = Vec3::Zero();
  if (sign > 0) origin[axis] = -platform * h;
  if (dim == 2) origin.z() = -0.5 * h;
  p.dims = GridDims(ext.x(), ext.y(), dim == 2 ? 1 : ext.z(), h, origin);

  ScalarGrid plat(p.dims);
  for (Index i = 0; i < p.dims.size(); ++i) {
    const int c = p.dims.coords(i)[axis];
    if (sign > 0 ? c < platform : c >= n[axis]) plat[i] = 1.0;
  }
  p.setup.platform = plat;
  const auto fixtures = parse_primitives(r, root["fixtures"], "fixtures", dim);
  p.setup.fixture = fixtures.empty() ? ScalarGrid(p.dims) : rasterize(fixtures, p.dims);
  p.setup.fixture.values() *= 1.0 - plat.values();

  ScalarGrid design(p.dims, 1.0 - plat.values() - p.setup.fixture.values());
  ScalarGrid keep(p.dims);
  const YAML::Node d = root["design"];
  if (d && r.map(d, "design", {"keep_solid", "exclude"})) {
    const auto ex = parse_primitives(r, d["exclude"], "design.exclude", dim);
    if (!ex.empty()) design.values() *= 1.0 - rasterize(ex, p.dims).values();
    const auto ks = parse_primitives(r, d["keep_solid"], "design.keep_solid", dim);
    if (!ks.empty()) keep = rasterize(ks, p.dims);
  }
  keep.values() *= design.values();
  p.domain = {design, keep};
  p.part = parse_primitives(r, root["part"], "part", dim);

  Vec3 node_origin = origin;
  if (dim == 2) node_origin.z() = 0.0;
  const NodeLattice nodes{node_origin, h, IVec3(ext.x(), ext.y(), dim == 2 ? 0 : ext.z()), dim};
  if (!root["boundary"])
    r.fail(root, "missing 'boundary' section");
  else
    parse_boundary(r, root["boundary"], p, nodes);
  parse_tools(r, root["tools"], p, dim);

  if (r.issues.empty()) {
    try {
      p.validate();
    } catch (const ValidationReport& rep) {
      for (const auto& i : rep.issues()) r.issues.push_back(i);
    }
  }
  if (!r.issues.empty()) throw ValidationReport(r.issues);
  return p;
}

}  // namespace

OptimizationProblem parse_problem(const std::string& text, const std::string& source) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ValidationError(source + ":" + std::to_string(e.mark.line + 1) + ":" + std::to_string(e.mark.column + 1) +
                          ": parse error: " + e.msg);
  }
  Reader r(source);
  return build(r, root);
}

OptimizationProblem load_problem(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open problem file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_problem(ss.str(), path.string());
}

ScalarGrid rasterize_part(const OptimizationProblem& problem) {
  if (problem.part.empty()) throw ValidationError("problem file has no 'part' primitives");
  ScalarGrid g = rasterize(problem.part, problem.dims);
  g.values() *= problem.domain.design.values();
  return g;
}

}  // namespace nearnet

#include "nearnet/planner.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace nearnet {

void PlannerConfig::validate() const {
  if (!(tau > 0.0 && tau < 1.0)) throw ValidationError("planner tau must lie in (0, 1)");
  if (!(layer_fraction > 0.0 && layer_fraction <= 1.0)) throw ValidationError("layer fraction must lie in (0, 1]");
  if (!(obstacle_penalty >= 1.0)) throw ValidationError("obstacle penalty must be at least 1");
  if (max_steps <= 0) throw ValidationError("max_steps must be positive");
}

namespace {

std::vector<IVec3> face_neighbors(const GridDims& d) {
  std::vector<IVec3> n{{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}};
  if (d.nz > 1) {
    n.emplace_back(0, 0, 1);
    n.emplace_back(0, 0, -1);
  }
  return n;
}

}  // namespace

bool check_connectivity(const ScalarGrid& part, const ScalarGrid& supports, const ScalarGrid& platform) {
  detail::require_same_shape(part, supports, "check_connectivity");
  detail::require_same_shape(part, platform, "check_connectivity");
  const GridDims& d = part.dims();
  if (count_nonzero(part) == 0) return false;
  std::vector<unsigned char> seen(std::size_t(d.size()), 0);
  std::vector<Index> stack;
  for (Index i = 0; i < d.size(); ++i)
    if (platform[i] != 0.0) {
      seen[std::size_t(i)] = 1;
      stack.push_back(i);
    }
  const auto nbrs = face_neighbors(d);
  while (!stack.empty()) {
    const Index i = stack.back();
    stack.pop_back();
    const IVec3 c = d.coords(i);
    for (const IVec3& o : nbrs) {
      const IVec3 n = c + o;
      if (!d.contains(n)) continue;
      const Index ni = d.index(n);
      if (seen[std::size_t(ni)]) continue;
      if (part[ni] == 0.0 && supports[ni] == 0.0 && platform[ni] == 0.0) continue;
      seen[std::size_t(ni)] = 1;
      stack.push_back(ni);
    }
  }
  for (Index i = 0; i < d.size(); ++i)
    if (part[i] != 0.0 && !seen[std::size_t(i)]) return false;
  return true;
}

ScalarGrid part_contacting_supports(const ScalarGrid& part, const ScalarGrid& supports) {
  detail::require_same_shape(part, supports, "part_contacting_supports");
  const GridDims& d = part.dims();
  const auto nbrs = face_neighbors(d);
  ScalarGrid out(d);
  for (Index i = 0; i < d.size(); ++i) {
    if (supports[i] == 0.0) continue;
    const IVec3 c = d.coords(i);
    for (const IVec3& o : nbrs)
      if (part.at_or(c + o, 0.0) != 0.0) {
        out[i] = 1.0;
        break;
      }
  }
  return out;
}

RemovalPlan plan_removal(const NearNetShape& near_net, const MachiningSetup& setup, const PlannerConfig& cfg) {
  cfg.validate();
  near_net.validate();
  setup.validate();
  const GridDims& d = near_net.part.dims();
  detail::require_same_shape(near_net.part, setup.fixture, "plan_removal");
  const BuildFrame& frame = near_net.frame;

  RemovalPlan plan;
  ScalarGrid sup = near_net.supports;
  const double total = integrate(sup);
  plan.residual_supports = sup;
  if (total == 0.0) return plan;
  if (!check_connectivity(near_net.part, sup, near_net.platform))
    throw ValidationError("plan_removal: the part is not connected to the platform before removal");

  ScalarGrid base(d, cfg.obstacle_penalty * (near_net.part.values() + near_net.platform.values() + setup.fixture.values()));
  ImfCache cache(orient_all(setup), /*weighted=*/true);
  const auto& tools = cache.tools();

  std::vector<int> layer(std::size_t(d.size()));
  for (Index i = 0; i < d.size(); ++i) layer[std::size_t(i)] = frame.layer_of(d.coords(i));
  const int batch = std::max(1, int(std::ceil(cfg.layer_fraction * frame.layers - 1e-9)));
  auto top_support_layer = [&] {
    int top = -1;
    for (Index i = 0; i < d.size(); ++i)
      if (sup[i] != 0.0) top = std::max(top, layer[std::size_t(i)]);
    return top;
  };

  int hi = top_support_layer();
  bool progressed = false;
  while (integrate(part_contacting_supports(near_net.part, sup)) > 0.0) {
    if (int(plan.steps.size()) >= cfg.max_steps)
      throw NumericalError("support removal did not finish within " + std::to_string(cfg.max_steps) + " steps");
    const int lo = std::max(0, hi - batch + 1);

    ScalarGrid obstacle(d, base.values() + sup.values());
    const auto fields = cache.evaluate_each(obstacle);

    std::vector<ScalarGrid> regions(tools.size());
    std::vector<double> volumes(tools.size(), 0.0);
    for (std::size_t p = 0; p < tools.size(); ++p) {
      regions[p] = ScalarGrid(d);
      for (Index i = 0; i < d.size(); ++i) {
        const int l = layer[std::size_t(i)];
        if (sup[i] != 0.0 && l >= lo && l <= hi && fields[p][i] <= cfg.tau) regions[p][i] = 1.0;
      }
      volumes[p] = integrate(regions[p]);
    }
    std::vector<std::size_t> order(tools.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return volumes[a] > volumes[b]; });

    bool accepted = false;
    for (std::size_t p : order) {
      if (volumes[p] <= 0.0) break;
      ScalarGrid next(d, sup.values() * (1.0 - regions[p].values()));
      if (integrate(part_contacting_supports(near_net.part, next)) > 0.0 &&
          !check_connectivity(near_net.part, next, near_net.platform))
        continue;
      const OrientedTool& t = tools[p];
      RemovalStep step;
      step.tool_index = t.tool_index;
      step.orientation_index = t.orientation_index;
      step.tool_name = setup.tools[t.tool_index].name;
      step.orientation_label = setup.tools[t.tool_index].orientation_label(t.orientation_index);
      step.removed = std::move(regions[p]);
      step.volume = volumes[p];
      step.percent = 100.0 * volumes[p] / total;
      step.batch_first = lo;
      step.batch_last = hi;
      plan.steps.push_back(std::move(step));
      sup = std::move(next);
      accepted = progressed = true;
      break;
    }
    if (accepted) continue;

    if (lo > 0) {
      hi = lo - 1;
      continue;
    }
    if (progressed) {
      progressed = false;
      hi = top_support_layer();
      continue;
    }
    const ScalarGrid stuck = part_contacting_supports(near_net.part, sup);
    std::ostringstream os;
    os << "support removal is stuck: " << count_nonzero(stuck)
       << " part-contacting support voxels cannot be reached by any tool orientation without collision";
    for (Index i = 0; i < d.size(); ++i)
      if (stuck[i] != 0.0) {
        const IVec3 c = d.coords(i);
        os << " (first at voxel " << c.x() << "," << c.y() << "," << c.z() << ")";
        break;
      }
    throw PlannerStuck(os.str(), stuck);
  }

  plan.residual_supports = sup;
  plan.machined_fraction = (total - integrate(sup)) / total;
  return plan;
}

}  // namespace nearnet

#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "nearnet/config.hpp"
#include "nearnet/topopt.hpp"

using namespace nearnet;

namespace {

const char* kTinyBeam = R"(
name: tiny
grid: {size: [30, 15], spacing: 1.0}
build: {direction: [0, 1], overhang_angle: 90, platform_thickness: 2}
material: {youngs_modulus: 1.0, poisson_ratio: 0.3}
solver: {method: cholesky}
boundary:
  fixed:
    - box: {min: [0, 0], max: [0, 15]}
      axes: all
  loads:
    - point: [30, 8]
      force: [0, -1]
tools:
  - name: endmill
    axis: [1, 0]
    cutter:
      - box: {min: [-3, -1], max: [0, 1]}
    holder:
      - box: {min: [-12, -2], max: [-3.5, 2]}
    orientations: [0]
optimizer: {volume_fraction: 0.5, max_iter: 30, i_acc: 5, i_rho: 15, q: 1}
)";

OptimizationProblem tiny() { return parse_problem(kTinyBeam, "tiny"); }

ScalarGrid line(std::initializer_list<double> v) {
  ScalarGrid g(GridDims::planar(int(v.size()), 1, 1.0));
  Index i = 0;
  for (double x : v) g[i++] = x;
  return g;
}

struct Trace {
  std::vector<IterationRecord> records;
  std::vector<ScalarGrid> densities;
};

OptimizationResult run(const OptimizationProblem& p, Trace* trace = nullptr) {
  return optimize(p, [&](const IterationRecord& r, const ScalarGrid& rho) {
    if (!trace) return;
    trace->records.push_back(r);
    trace->densities.push_back(rho);
  });
}

bool same_record(const IterationRecord& a, const IterationRecord& b) {
  return a.iter == b.iter && a.compliance == b.compliance && a.volume == b.volume &&
         a.support_volume == b.support_volume && a.secluded_volume == b.secluded_volume && a.w_acc == b.w_acc &&
         a.change == b.change;
}

}  // namespace

TEST_CASE("heaviside projection") {
  for (double beta : {0.5, 1.0, 4.0}) {
    const ScalarGrid ends = heaviside_project(line({0.0, 1.0}), beta);
    CHECK(std::abs(ends[0]) <= 1e-12);
    CHECK(std::abs(ends[1] - 1.0) <= 1e-12);
  }
  const ScalarGrid mid = heaviside_project(line({0.5}), 1.0);
  CHECK(mid[0] == doctest::Approx(1.0 - std::exp(-0.5) + 0.5 * std::exp(-1.0)).epsilon(1e-15));
  CHECK(mid[0] == doctest::Approx(0.5774).epsilon(1e-4));

  std::mt19937 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ScalarGrid r(GridDims::planar(50, 1, 1.0));
  for (Index i = 0; i < r.size(); ++i) r[i] = u(rng);
  const ScalarGrid p = heaviside_project(r, 2.0);
  CHECK(in_unit_range(p));
  const ScalarGrid dp = heaviside_derivative(r, 2.0);
  const double h = 1e-6;
  for (Index i = 0; i < r.size(); ++i) {
    ScalarGrid a = r, b = r;
    a[i] += h;
    b[i] -= h;
    CHECK(dp[i] == doctest::Approx((heaviside_project(a, 2.0)[i] - heaviside_project(b, 2.0)[i]) / (2 * h)).epsilon(1e-6));
  }
  CHECK_THROWS_AS(heaviside_project(r, -1.0), ValidationError);
}

TEST_CASE("accessibility filter") {
  const GridDims d = GridDims::planar(3, 4, 1.0);
  NearNetShape nn;
  nn.part = ScalarGrid(d);
  nn.supports = ScalarGrid(d);
  nn.platform = ScalarGrid(d);
  nn.part(1, 0) = 1.0;
  nn.supports(1, 2) = 1.0;
  IMFField imf{ScalarGrid(d), std::nullopt};
  BuildSpec b;
  b.direction = Vec3::UnitY();
  const ScalarGrid w = layer_weight_field(d, BuildFrame::from(b, d), 4.0);
  CHECK((accessibility_filter(imf, nn, w).values() == 0.0).all());

  imf.values(0, 0) = 0.9;
  imf.values(1, 0) = 0.5;
  imf.values(1, 2) = 0.8;
  const ScalarGrid f = accessibility_filter(imf, nn, w);
  CHECK(f(0, 0) == 0.0);
  CHECK(f(1, 0) == doctest::Approx(-0.5));
  CHECK(f(1, 2) == doctest::Approx(-0.8 * std::pow(2.0 / 4.0, 4)));
  CHECK(f.values().minCoeff() >= -1.0);
  CHECK(f.values().maxCoeff() <= 0.0);
}

TEST_CASE("sensitivity blend") {
  const ScalarGrid phi = line({-1.0, -0.3, 0.0});
  const ScalarGrid acc = line({0.0, -1.0, -0.5});
  CHECK((blend_sensitivity(phi, acc, 0.0).values() == phi.values()).all());
  const ScalarGrid half = blend_sensitivity(phi, acc, 0.5);
  CHECK(half[0] == doctest::Approx(-0.5));
  CHECK(half[1] == doctest::Approx(-0.65));
  std::mt19937 rng(2);
  std::uniform_real_distribution<double> u(-1.0, 0.0), w(0.0, 0.99);
  for (int n = 0; n < 100; ++n) {
    const ScalarGrid b = blend_sensitivity(line({u(rng)}), line({u(rng)}), w(rng));
    CHECK(b[0] >= -1.0);
    CHECK(b[0] <= 0.0);
  }
  CHECK_THROWS_AS(blend_sensitivity(phi, acc, 1.0), ValidationError);
}

TEST_CASE("sensitivity filter") {
  const GridDims d = GridDims::planar(5, 5, 1.0);
  const ScalarGrid design(d, 1.0);
  const SensitivityFilter f(design, 1.5);
  const ScalarGrid ones(d, 1.0);
  const ScalarGrid c = f.apply(ScalarGrid(d, -2.0), ones);
  CHECK((c.values() - (-2.0)).abs().maxCoeff() < 1e-12);

  ScalarGrid spike(d);
  spike(2, 2) = -1.0;
  const ScalarGrid s = f.apply(spike, ones);
  // weights 1.5 at the center, 0.5 on faces, 1.5 - sqrt(2) on diagonals
  const double total = 1.5 + 4 * 0.5 + 4 * (1.5 - std::sqrt(2.0));
  CHECK(s(2, 2) == doctest::Approx(-1.5 / total));
  CHECK(s(2, 3) < 0.0);
  CHECK(s(0, 0) == 0.0);
  CHECK_THROWS_AS(SensitivityFilter(design, 0.5), ValidationError);
}

TEST_CASE("optimality criteria update") {
  OptimizationConfig cfg;
  ScalarGrid rho = line({0.5, 0.5});
  const ScalarGrid s = line({-1.0, -0.1});
  for (int it = 0; it < 20; ++it) {
    const ScalarGrid next = oc_update(rho, s, 0.5, cfg);
    CHECK(next[0] >= rho[0]);
    CHECK(next[0] + next[1] == doctest::Approx(1.0).epsilon(1e-4));
    CHECK(std::abs(next[0] - rho[0]) <= cfg.move_limit + 1e-12);
    rho = next;
  }
  // Fixed point: the multiplier settles at 1 and the emptied voxel sits at floor * 0.1^damping.
  const double rest = cfg.oc_floor * std::pow(0.1, cfg.oc_damping);
  CHECK(rho[1] == doctest::Approx(rest).epsilon(1e-6));
  CHECK(rho[0] == doctest::Approx(1.0 - rest).epsilon(1e-9));

  const GridDims d = GridDims::planar(10, 6, 1.0);
  const ScalarGrid uniform = oc_update(ScalarGrid(d, 0.4), ScalarGrid(d, -0.7), 0.5, cfg);
  CHECK((uniform.values() - 0.5).abs().maxCoeff() < 1e-6);

  std::mt19937 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  DesignDomain dom = DesignDomain::full(d);
  for (int i = 0; i < 10; ++i) dom.design(i, 0) = 0.0;
  dom.keep(5, 5) = 1.0;
  for (double vf : {0.2, 0.5, 0.8}) {
    ScalarGrid r(d), sens(d);
    for (Index i = 0; i < r.size(); ++i) {
      r[i] = dom.design[i] * std::clamp(vf + 0.3 * (u(rng) - 0.5), 0.0, 1.0);
      sens[i] = -u(rng);
    }
    r(5, 5) = 1.0;
    sens[3] = 1e-3;  // numerically positive sensitivities are clamped, not rejected
    const ScalarGrid next = oc_update(r, sens, vf, cfg, dom);
    CHECK(std::abs(integrate(next) - vf * integrate(dom.design)) <= 1e-4 * integrate(dom.design));
    CHECK(in_unit_range(next));
    CHECK(next(5, 5) == 1.0);
    CHECK(next(3, 0) == 0.0);
    CHECK(((next.values() - r.values()).abs() <= cfg.move_limit + 1e-12).all());
  }
}

TEST_CASE("raised base keeps the volume reachable") {
  OptimizationConfig cfg;
  const GridDims d = GridDims::planar(12, 8, 1.0);
  const DesignDomain dom = DesignDomain::full(d);
  const ScalarGrid rho(d, 0.5);
  ScalarGrid base = rho;
  for (int j = 0; j < 6; ++j)
    for (int i = 0; i < 12; ++i) base(i, j) = 1.0;
  ScalarGrid s(d, -0.5);
  const ScalarGrid next = oc_update(rho, s, 0.5, cfg, dom, base);
  CHECK(std::abs(integrate(next) - 0.5 * integrate(dom.design)) <= 1e-4 * integrate(dom.design));
  CHECK(((next.values() - rho.values()).abs() <= cfg.move_limit + 1e-12).all());
  CHECK(next(0, 0) > next(0, 7));
}

TEST_CASE("unreachable volume is reported") {
  OptimizationConfig cfg;
  cfg.move_limit = 0.05;
  try {
    oc_update(ScalarGrid(GridDims::planar(4, 4, 1.0), 0.1), ScalarGrid(GridDims::planar(4, 4, 1.0), -1.0), 0.9, cfg);
    FAIL("expected a bisection failure");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("bracket") != std::string::npos);
  }
}

TEST_CASE("seclusion penalty") {
  const GridDims d = GridDims::planar(2, 3, 1.0);
  BuildSpec b;
  b.direction = Vec3::UnitY();
  const ScalarGrid w = layer_weight_field(d, BuildFrame::from(b, d), 4.0);
  ScalarGrid rho(d, 0.8), s(d, -0.2), mask(d);
  const PenalizedDesign none = seclusion_penalty(rho, s, mask, w);
  CHECK((none.rho.values() == rho.values()).all());
  CHECK((none.sensitivity.values() == s.values()).all());

  mask(0, 0) = 1.0;
  mask(1, 2) = 1.0;
  rho(1, 2) = 0.1;
  const PenalizedDesign p = seclusion_penalty(rho, s, mask, w);
  CHECK(p.rho(0, 0) == 1.0);
  CHECK(p.sensitivity(0, 0) == -1.0);
  CHECK(p.rho(1, 2) == doctest::Approx(0.6));
  CHECK(p.sensitivity(1, 2) == doctest::Approx(-0.2));  // -(1/3)^4 is above -0.2
  CHECK(p.rho(1, 1) == 0.8);
}

TEST_CASE("config ranges") {
  OptimizationConfig c;
  CHECK_NOTHROW(c.validate());
  c.volume_fraction = 1.5;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = {};
  c.i_acc = 200;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = {};
  c.w_acc_max = 1.0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = {};
  c.w_acc_max = 0.0;
  CHECK_FALSE(c.constrained());
}

TEST_CASE("optimization loop contracts") {
  const OptimizationProblem p = tiny();
  Trace t;
  const OptimizationResult r = run(p, &t);
  REQUIRE(!t.records.empty());
  const double vol0 = integrate(p.domain.design);
  double prev_w = 0.0;
  for (std::size_t i = 0; i < t.records.size(); ++i) {
    const IterationRecord& rec = t.records[i];
    CHECK(rec.iter == int(i));
    CHECK(std::abs(integrate(t.densities[i]) - p.optimizer.volume_fraction * vol0) <= 1e-4 * vol0);
    CHECK(in_unit_range(t.densities[i]));
    CHECK(rec.w_acc >= prev_w);
    CHECK(rec.w_acc <= p.optimizer.w_acc_max);
    CHECK(rec.secluded_volume <= rec.support_volume);
    CHECK(rec.change >= 0.0);
    CHECK(rec.compliance > 0.0);
    prev_w = rec.w_acc;
  }
  CHECK(r.history.size() == t.records.size());
  CHECK(r.manufacturable == (r.secluded.ratio <= p.optimizer.epsilon));
  CHECK((r.density.values() == t.densities.back().values()).all());
  CHECK((r.near_net.part.values() * r.near_net.supports.values()).sum() == 0.0);
}

TEST_CASE("optimization is deterministic") {
  const OptimizationProblem p = tiny();
  const OptimizationResult a = run(p), b = run(p);
  REQUIRE(a.history.size() == b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) CHECK(same_record(a.history[i], b.history[i]));
  CHECK((a.density.values() == b.density.values()).all());
  std::ostringstream sa, sb;
  write_history_csv(sa, a.history);
  write_history_csv(sb, b.history);
  CHECK(sa.str() == sb.str());
}

TEST_CASE("zero accessibility weight is plain compliance minimization") {
  OptimizationProblem a = tiny();
  a.optimizer.w_acc_max = 0.0;
  OptimizationProblem b = a;
  b.optimizer.track_accessibility = false;
  const OptimizationResult ra = run(a), rb = run(b);
  REQUIRE(ra.history.size() == rb.history.size());
  for (std::size_t i = 0; i < ra.history.size(); ++i) {
    CHECK(ra.history[i].compliance == rb.history[i].compliance);
    CHECK(ra.history[i].change == rb.history[i].change);
    CHECK(ra.history[i].support_volume == rb.history[i].support_volume);
    CHECK(ra.history[i].w_acc == 0.0);
  }
  CHECK((ra.density.values() == rb.density.values()).all());
  CHECK_FALSE(rb.imf);
}

TEST_CASE("constrained and unconstrained runs coincide until the ramp starts") {
  OptimizationProblem con = tiny();
  OptimizationProblem unc = con;
  unc.optimizer.w_acc_max = 0.0;
  Trace tc, tu;
  run(con, &tc);
  run(unc, &tu);
  const std::size_t shared = std::size_t(con.optimizer.i_acc) + 1;
  REQUIRE(tc.records.size() > shared);
  REQUIRE(tu.records.size() > shared);
  for (std::size_t i = 0; i < shared; ++i) {
    CHECK(same_record(tc.records[i], tu.records[i]));
    CHECK((tc.densities[i].values() == tu.densities[i].values()).all());
  }
  CHECK(tc.records[shared].w_acc > 0.0);
}

TEST_CASE("history csv format") {
  IterationRecord r;
  r.iter = 3;
  r.compliance = 1.0 / 3.0;
  r.volume = 750;
  r.change = 0.125;
  std::ostringstream os;
  write_history_csv(os, {r});
  CHECK(os.str() == "iter,compliance,volume,support_volume,secluded_volume,w_acc,change\n"
                    "3,0.333333333,750,0,0,0,0.125\n");
}

TEST_CASE("supports counted as obstacles only raise the IMF") {
  OptimizationProblem a = tiny();
  a.optimizer.w_acc_max = 0.0;
  a.optimizer.max_iter = 20;
  OptimizationProblem b = a;
  b.optimizer.supports_as_obstacles = true;
  const OptimizationResult ra = run(a), rb = run(b);
  // the weight is zero, so both runs follow the same densities
  REQUIRE((ra.density.values() == rb.density.values()).all());
  REQUIRE(ra.imf);
  REQUIRE(rb.imf);
  CHECK((rb.imf->values.values() >= ra.imf->values.values() - 1e-12).all());
  CHECK(rb.secluded.volume >= ra.secluded.volume);
}

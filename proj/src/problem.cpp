#include "nearnet/problem.hpp"

namespace nearnet {

void OptimizationProblem::validate() const {
  std::vector<std::string> issues;
  auto check = [&](const char* what, auto&& fn) {
    try {
      fn();
    } catch (const ValidationReport& r) {
      for (const auto& i : r.issues()) issues.push_back(std::string(what) + ": " + i);
    } catch (const Error& e) {
      issues.push_back(std::string(what) + ": " + e.what());
    }
  };
  check("grid", [&] { dims.validate(); });
  check("design domain", [&] {
    domain.validate();
    if (!domain.design.dims().same_shape(dims)) throw ValidationError("mask does not match the grid");
  });
  check("boundary conditions", [&] { bc.validate(dims); });
  check("material", [&] { material.validate(); });
  check("solver", [&] {
    if (!(solver.tolerance > 0.0 && solver.tolerance < 1.0)) throw ValidationError("tolerance must lie in (0, 1)");
    if (solver.max_iterations <= 0) throw ValidationError("iteration cap must be positive");
  });
  check("build", [&] { BuildFrame::from(build, dims); });
  check("machining setup", [&] {
    setup.validate();
    if (!setup.platform.dims().same_shape(dims)) throw ValidationError("platform grid does not match the problem grid");
    if (!setup.fixture.dims().same_shape(dims)) throw ValidationError("fixture grid does not match the problem grid");
  });
  check("optimizer", [&] { optimizer.validate(); });
  check("planner", [&] { planner.validate(); });
  check("output", [&] {
    if (output.snapshot_every < 0) throw ValidationError("snapshot cadence must be non-negative");
  });
  check("part", [&] {
    for (const auto& p : part) p.validate();
  });
  if (issues.empty()) {
    check("design domain", [&] {
      const auto blocked = setup.platform.values() + setup.fixture.values();
      if ((domain.design.values() * blocked).sum() > 0.0)
        throw ValidationError("design voxels overlap the platform or a fixture");
    });
    check("optimizer", [&] {
      if (integrate(domain.keep) > optimizer.volume_fraction * integrate(domain.design))
        throw ValidationError("keep-solid volume exceeds the target volume");
    });
  }
  if (!issues.empty()) throw ValidationReport(std::move(issues));
}

}  // namespace nearnet

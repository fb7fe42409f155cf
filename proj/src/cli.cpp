#include "nearnet/cli.hpp"

#include <omp.h>

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <ostream>

#include "nearnet/config.hpp"
#include "nearnet/grid_io.hpp"

namespace nearnet {

namespace {

namespace fs = std::filesystem;

struct Inputs {
  fs::path config;
  std::optional<fs::path> part_grid;
};

Inputs split_inputs(const std::vector<std::string>& pos) {
  if (pos.size() == 1) return {pos[0], std::nullopt};
  if (pos.size() == 2) return {pos[1], fs::path(pos[0])};
  throw ValidationError("expected [part-grid] <problem-file>");
}

ScalarGrid load_part(const Inputs& in, const OptimizationProblem& p) {
  ScalarGrid part = in.part_grid ? io::load_grid(*in.part_grid) : rasterize_part(p);
  if (!part.dims().same_shape(p.dims) || !part.dims().same_spacing(p.dims))
    throw ValidationError("part grid " + std::to_string(part.dims().nx) + "x" + std::to_string(part.dims().ny) + "x" +
                          std::to_string(part.dims().nz) + " does not match the problem grid " +
                          std::to_string(p.dims.nx) + "x" + std::to_string(p.dims.ny) + "x" +
                          std::to_string(p.dims.nz));
  if (!in_unit_range(part, 1e-12)) throw ValidationError("part densities must lie in [0, 1]");
  return part;
}

void save_field(const fs::path& dir, const std::string& stem, const ScalarGrid& g, const OutputOptions& o) {
  io::save_grid(dir / (stem + ".nngrid"), g);
  if (o.vtk) io::save_vtk(dir / (stem + ".vtk"), g, stem);
  if (o.pgm && g.dims().nz == 1) {
    const double lo = std::min(0.0, g.values().minCoeff()), hi = std::max(1.0, g.values().maxCoeff());
    io::save_pgm(dir / (stem + ".pgm"), g, lo, hi);
  }
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

int cmd_optimize(const fs::path& cfg, const fs::path& outdir, std::optional<int> max_iter, bool unconstrained,
                 bool quiet, std::ostream& out) {
  OptimizationProblem p = load_problem(cfg);
  if (max_iter) {
    p.optimizer.max_iter = *max_iter;
    p.optimizer.i_rho = std::min(p.optimizer.i_rho, *max_iter - 1);
    p.optimizer.i_acc = std::min(p.optimizer.i_acc, p.optimizer.i_rho - 1);
  }
  if (unconstrained) p.optimizer.w_acc_max = 0.0;
  fs::create_directories(outdir);

  const int every = p.output.snapshot_every;
  auto cb = [&](const IterationRecord& r, const ScalarGrid& rho) {
    if (!quiet)
      out << "iter " << std::setw(4) << r.iter << "  compliance " << fmt(r.compliance) << "  volume "
          << fmt(r.volume) << "  supports " << fmt(r.support_volume) << "  secluded " << fmt(r.secluded_volume)
          << "  w_acc " << fmt(r.w_acc) << "  change " << fmt(r.change) << "\n";
    if (every > 0 && (r.iter + 1) % every == 0) {
      char name[64];
      std::snprintf(name, sizeof name, "density_%04d", r.iter + 1);
      io::save_grid(outdir / "snapshots" / (std::string(name) + ".nngrid"), rho);
    }
  };
  const OptimizationResult res = optimize(p, cb);

  {
    std::ofstream h(outdir / "history.csv");
    write_history_csv(h, res.history);
  }
  save_field(outdir, "final_density", res.density, p.output);
  save_field(outdir, "projected_density", res.projected, p.output);
  save_field(outdir, "part", res.near_net.part, p.output);
  save_field(outdir, "supports", res.near_net.supports, p.output);
  if (res.imf) {
    save_field(outdir, "imf", res.imf->values, p.output);
    save_field(outdir, "secluded", res.secluded.mask, p.output);
  }

  nlohmann::ordered_json j;
  j["name"] = p.name;
  j["iterations"] = res.history.size();
  j["converged"] = res.converged;
  j["compliance"] = res.compliance;
  j["volume"] = integrate(res.density);
  j["support_volume"] = res.secluded.support_volume;
  j["secluded_volume"] = res.secluded.volume;
  j["secluded_ratio"] = res.secluded.ratio;
  j["epsilon"] = p.optimizer.epsilon;
  j["manufacturable"] = res.manufacturable;
  std::ofstream(outdir / "summary.json") << j.dump(2) << "\n";

  out << "finished after " << res.history.size() << " iterations"
      << (res.converged ? " (converged)" : " (iteration cap)") << "\n"
      << "compliance " << fmt(res.compliance) << "\n"
      << "secluded/support volume " << fmt(res.secluded.volume) << "/" << fmt(res.secluded.support_volume) << " = "
      << fmt(res.secluded.ratio) << " (epsilon " << fmt(p.optimizer.epsilon) << ")\n";
  if (!res.manufacturable) {
    out << "warning: design is not manufacturable: secluded supports exceed epsilon\n";
    return kExitNotManufacturable;
  }
  return kExitOk;
}

int cmd_analyze(const Inputs& in, const fs::path& outdir, std::ostream& out) {
  const OptimizationProblem p = load_problem(in.config);
  const ScalarGrid part = load_part(in, p);
  const IMFField imf = imf_overall(part, p.setup, {.provenance = true});
  const NearNetShape nn = generate_supports(part, p.build, p.setup.platform);
  const SecludedRegion sec = secluded_supports(imf, nn.supports, p.optimizer.lambda);
  fs::create_directories(outdir);
  save_field(outdir, "imf", imf.values, p.output);
  save_field(outdir, "supports", nn.supports, p.output);
  save_field(outdir, "secluded", sec.mask, p.output);
  io::save_grid(outdir / "imf_tool.nngrid", imf.provenance->tool.cast<double>());
  io::save_grid(outdir / "imf_orientation.nngrid", imf.provenance->orientation.cast<double>());
  out << "tool/orientation pairs " << p.setup.pair_count() << "\n"
      << "IMF range [" << fmt(imf.values.values().minCoeff()) << ", " << fmt(imf.values.values().maxCoeff()) << "]\n"
      << "support volume " << fmt(sec.support_volume) << "\n"
      << "secluded volume " << fmt(sec.volume) << " (ratio " << fmt(sec.ratio) << ", lambda "
      << fmt(p.optimizer.lambda) << ")\n";
  return kExitOk;
}

int cmd_supports(const Inputs& in, const fs::path& outdir, std::ostream& out) {
  const OptimizationProblem p = load_problem(in.config);
  const ScalarGrid part = load_part(in, p);
  const NearNetShape nn = generate_supports(part, p.build, p.setup.platform);
  const ScalarGrid over = overhang_points(part, p.build, p.setup.platform);
  fs::create_directories(outdir);
  save_field(outdir, "part", nn.part, p.output);
  save_field(outdir, "supports", nn.supports, p.output);
  save_field(outdir, "platform", nn.platform, p.output);
  save_field(outdir, "overhangs", over, p.output);
  out << "part volume " << fmt(integrate(nn.part)) << "\n"
      << "overhang voxels " << count_nonzero(over) << "\n"
      << "support volume " << fmt(integrate(nn.supports)) << "\n";
  return kExitOk;
}

int cmd_plan(const Inputs& in, const std::optional<fs::path>& supports, const fs::path& outdir, std::ostream& out) {
  const OptimizationProblem p = load_problem(in.config);
  const ScalarGrid part = load_part(in, p);
  NearNetShape nn = generate_supports(part, p.build, p.setup.platform);
  if (supports) {
    ScalarGrid s = io::load_grid(*supports);
    detail::require_same_shape(s, nn.part, "supports grid");
    nn.supports = std::move(s);
  }
  fs::create_directories(outdir);
  RemovalPlan plan;
  try {
    plan = plan_removal(nn, p.setup, p.planner);
  } catch (const PlannerStuck& e) {
    io::save_grid(outdir / "stuck_region.nngrid", e.stuck_region());
    throw;
  }

  nlohmann::ordered_json j;
  const double total = integrate(nn.supports);
  j["support_volume"] = total;
  j["machined_fraction"] = plan.machined_fraction;
  j["residual_volume"] = integrate(plan.residual_supports);
  j["steps"] = nlohmann::json::array();
  double cumulative = 0.0;
  out << "support volume " << fmt(total) << ", " << plan.steps.size() << " removal steps\n";
  for (std::size_t i = 0; i < plan.steps.size(); ++i) {
    const RemovalStep& s = plan.steps[i];
    char name[64];
    std::snprintf(name, sizeof name, "steps/step_%03zu.nngrid", i + 1);
    io::save_grid(outdir / name, s.removed);
    cumulative += s.percent;
    const auto& m = p.setup.tools[s.tool_index].orientations[s.orientation_index].matrix();
    nlohmann::ordered_json st;
    st["step"] = i + 1;
    st["tool"] = s.tool_name;
    st["tool_index"] = s.tool_index;
    st["orientation"] = s.orientation_label;
    st["orientation_index"] = s.orientation_index;
    st["rotation"] = {{m(0, 0), m(0, 1), m(0, 2)}, {m(1, 0), m(1, 1), m(1, 2)}, {m(2, 0), m(2, 1), m(2, 2)}};
    st["volume"] = s.volume;
    st["percent"] = s.percent;
    st["cumulative_percent"] = cumulative;
    st["layers"] = {s.batch_first, s.batch_last};
    st["grid"] = name;
    j["steps"].push_back(st);
    out << "step " << std::setw(3) << i + 1 << "  " << s.tool_name << " @ " << s.orientation_label << "  layers "
        << s.batch_first << "-" << s.batch_last << "  removed " << fmt(s.volume) << " (" << fmt(s.percent)
        << "%, cumulative " << fmt(cumulative) << "%)\n";
  }
  io::save_grid(outdir / "residual_supports.nngrid", plan.residual_supports);
  std::ofstream(outdir / "manifest.json") << j.dump(2) << "\n";
  out << "machined fraction " << fmt(plan.machined_fraction) << "\n";
  return kExitOk;
}

int cmd_export(const fs::path& grid, const std::string& format, const fs::path& dest, std::optional<double> lo,
               std::optional<double> hi) {
  const ScalarGrid g = io::load_grid(grid);
  if (format == "vtk") {
    io::save_vtk(dest, g, grid.stem().string());
  } else if (format == "pgm") {
    if (g.dims().nz != 1) throw ValidationError("PGM export needs a 2D grid");
    io::save_pgm(dest, g, lo.value_or(g.values().minCoeff()), hi.value_or(g.values().maxCoeff()));
  } else if (format == "grid") {
    io::save_grid(dest, g);
  } else {
    throw ValidationError("unknown export format '" + format + "' (expected vtk, pgm or grid)");
  }
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Topology optimization with support-accessibility constraints", "nearnet"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "Upper bound on worker threads (0 keeps the OpenMP default)")
      ->check(CLI::NonNegativeNumber);

  fs::path outdir;
  std::vector<std::string> pos;

  auto* opt = app.add_subcommand("optimize", "Run the constrained optimization loop");
  std::string cfg;
  std::optional<int> max_iter;
  bool unconstrained = false, quiet = false;
  opt->add_option("problem", cfg, "Problem file")->required()->check(CLI::ExistingFile);
  opt->add_option("--out", outdir, "Output directory")->required();
  opt->add_option("--max-iter", max_iter, "Override the iteration cap")->check(CLI::PositiveNumber);
  opt->add_flag("--unconstrained", unconstrained, "Disable the accessibility filter (w_acc_max = 0)");
  opt->add_flag("--quiet", quiet, "Do not print per-iteration lines");

  auto* ana = app.add_subcommand("analyze-imf", "Inaccessibility field and secluded supports of a given part");
  ana->add_option("inputs", pos, "[part-grid] problem-file")->required()->expected(1, 2);
  ana->add_option("--out", outdir, "Output directory")->required();

  auto* gen = app.add_subcommand("gen-supports", "Generate support structures for a given part");
  gen->add_option("inputs", pos, "[part-grid] problem-file")->required()->expected(1, 2);
  gen->add_option("--out", outdir, "Output directory")->required();

  auto* plan = app.add_subcommand("plan-removal", "Greedy support-removal plan");
  std::optional<fs::path> supports;
  plan->add_option("inputs", pos, "[part-grid] problem-file")->required()->expected(1, 2);
  plan->add_option("--out", outdir, "Output directory")->required();
  plan->add_option("--supports", supports, "Support grid to use instead of generating one")->check(CLI::ExistingFile);

  auto* exp = app.add_subcommand("export", "Convert a grid file to VTK or PGM");
  fs::path grid, dest;
  std::string format = "vtk";
  std::optional<double> lo, hi;
  exp->add_option("grid", grid, "Input grid file")->required()->check(CLI::ExistingFile);
  exp->add_option("--format", format, "vtk, pgm or grid")->check(CLI::IsMember({"vtk", "pgm", "grid"}));
  exp->add_option("--out", dest, "Output file")->required();
  exp->add_option("--lo", lo, "PGM value mapped to black");
  exp->add_option("--hi", hi, "PGM value mapped to white");

  std::vector<std::string> argv_s{"nearnet"};
  argv_s.insert(argv_s.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : argv_s) argv.push_back(s.data());
  try {
    app.parse(int(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    err << app.help();
    return kExitValidation;
  }

  if (threads > 0) omp_set_num_threads(threads);
  try {
    if (*opt) return cmd_optimize(cfg, outdir, max_iter, unconstrained, quiet, out);
    if (*ana) return cmd_analyze(split_inputs(pos), outdir, out);
    if (*gen) return cmd_supports(split_inputs(pos), outdir, out);
    if (*plan) return cmd_plan(split_inputs(pos), supports, outdir, out);
    if (*exp) return cmd_export(grid, format, dest, lo, hi);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitValidation;
}

}  // namespace nearnet

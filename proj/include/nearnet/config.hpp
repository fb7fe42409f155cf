#pragma once

#include <filesystem>
#include <string>

#include "nearnet/problem.hpp"

namespace nearnet {

/// Read and validate a problem file. Parse errors carry line and column; semantic errors
/// are gathered into one ValidationReport.
OptimizationProblem load_problem(const std::filesystem::path& path);
OptimizationProblem parse_problem(const std::string& text, const std::string& source = "<input>");

/// Indicator of the problem's `part` primitives on the design voxels.
ScalarGrid rasterize_part(const OptimizationProblem& problem);

}  // namespace nearnet

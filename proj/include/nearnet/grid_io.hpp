#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "nearnet/grid.hpp"

namespace nearnet::io {

/// Binary grid container, all fields little-endian:
///
///   offset  size  field
///   0       8     magic "NNGRID01"
///   8       4     nx (uint32)
///   12      4     ny (uint32)
///   16      4     nz (uint32)
///   20      8     spacing (float64)
///   28      24    origin x, y, z (float64)
///   52      8*N   values (float64), x fastest, N = nx*ny*nz
inline constexpr char kGridMagic[8] = {'N', 'N', 'G', 'R', 'I', 'D', '0', '1'};
inline constexpr std::size_t kGridHeaderBytes = 52;

void write_grid(std::ostream& out, const ScalarGrid& g);
ScalarGrid read_grid(std::istream& in);
void save_grid(const std::filesystem::path& path, const ScalarGrid& g);
ScalarGrid load_grid(const std::filesystem::path& path);

/// VTK legacy ASCII STRUCTURED_POINTS with one CELL_DATA scalar array.
void write_vtk(std::ostream& out, const ScalarGrid& g, const std::string& name = "value");
void save_vtk(const std::filesystem::path& path, const ScalarGrid& g, const std::string& name = "value");

/// Binary PGM (P5) of a 2D grid. Values are mapped linearly from [lo, hi] to [0, 255];
/// row 0 of the image is the top (max y) row of the grid.
void write_pgm(std::ostream& out, const ScalarGrid& g, double lo = 0.0, double hi = 1.0);
void save_pgm(const std::filesystem::path& path, const ScalarGrid& g, double lo = 0.0, double hi = 1.0);

}  // namespace nearnet::io

#include "nearnet/grid_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <vector>

namespace nearnet::io {

namespace {

static_assert(std::endian::native == std::endian::little, "grid I/O assumes a little-endian host");

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw ValidationError("grid file truncated in header");
  return v;
}

std::ofstream open_out(const std::filesystem::path& path, std::ios::openmode mode) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, mode);
  if (!f) throw ValidationError("cannot open '" + path.string() + "' for writing");
  return f;
}

}  // namespace

void write_grid(std::ostream& out, const ScalarGrid& g) {
  const GridDims& d = g.dims();
  out.write(kGridMagic, sizeof(kGridMagic));
  put<std::uint32_t>(out, std::uint32_t(d.nx));
  put<std::uint32_t>(out, std::uint32_t(d.ny));
  put<std::uint32_t>(out, std::uint32_t(d.nz));
  put<double>(out, d.spacing);
  for (int a = 0; a < 3; ++a) put<double>(out, d.origin[a]);
  out.write(reinterpret_cast<const char*>(g.values().data()), std::streamsize(g.size() * sizeof(double)));
  if (!out) throw ValidationError("failed writing grid data");
}

ScalarGrid read_grid(std::istream& in) {
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kGridMagic, 8) != 0)
    throw ValidationError("not a grid file (bad magic)");
  GridDims d;
  d.nx = int(get<std::uint32_t>(in));
  d.ny = int(get<std::uint32_t>(in));
  d.nz = int(get<std::uint32_t>(in));
  d.spacing = get<double>(in);
  for (int a = 0; a < 3; ++a) d.origin[a] = get<double>(in);
  d.validate();
  ScalarGrid g(d);
  if (!in.read(reinterpret_cast<char*>(g.values().data()), std::streamsize(g.size() * sizeof(double))))
    throw ValidationError("grid file truncated: expected " + std::to_string(d.size()) + " values");
  return g;
}

void save_grid(const std::filesystem::path& path, const ScalarGrid& g) {
  auto f = open_out(path, std::ios::binary);
  write_grid(f, g);
}

ScalarGrid load_grid(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ValidationError("cannot open grid file '" + path.string() + "'");
  return read_grid(f);
}

void write_vtk(std::ostream& out, const ScalarGrid& g, const std::string& name) {
  const GridDims& d = g.dims();
  out << "# vtk DataFile Version 3.0\n" << name << "\nASCII\nDATASET STRUCTURED_POINTS\n";
  out << "DIMENSIONS " << d.nx + 1 << ' ' << d.ny + 1 << ' ' << d.nz + 1 << '\n';
  out << std::setprecision(9);
  out << "ORIGIN " << d.origin.x() << ' ' << d.origin.y() << ' ' << d.origin.z() << '\n';
  out << "SPACING " << d.spacing << ' ' << d.spacing << ' ' << d.spacing << '\n';
  out << "CELL_DATA " << d.size() << "\nSCALARS " << name << " float 1\nLOOKUP_TABLE default\n";
  for (Index i = 0; i < g.size(); ++i) out << float(g[i]) << ((i + 1) % 8 == 0 ? '\n' : ' ');
  out << '\n';
}

void save_vtk(const std::filesystem::path& path, const ScalarGrid& g, const std::string& name) {
  auto f = open_out(path, {});
  write_vtk(f, g, name);
}

void write_pgm(std::ostream& out, const ScalarGrid& g, double lo, double hi) {
  const GridDims& d = g.dims();
  if (d.nz != 1) throw ValidationError("PGM export needs a 2D grid");
  if (!(hi > lo)) throw ValidationError("PGM export needs hi > lo");
  out << "P5\n" << d.nx << ' ' << d.ny << "\n255\n";
  std::vector<unsigned char> row(std::size_t(d.nx));
  for (int j = d.ny - 1; j >= 0; --j) {
    for (int i = 0; i < d.nx; ++i) {
      const double v = std::clamp((g(i, j) - lo) / (hi - lo), 0.0, 1.0);
      row[std::size_t(i)] = static_cast<unsigned char>(std::lround(v * 255.0));
    }
    out.write(reinterpret_cast<const char*>(row.data()), std::streamsize(row.size()));
  }
}

void save_pgm(const std::filesystem::path& path, const ScalarGrid& g, double lo, double hi) {
  auto f = open_out(path, std::ios::binary);
  write_pgm(f, g, lo, hi);
}

}  // namespace nearnet::io

#include "nearnet/correlation.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <tuple>

namespace nearnet {

namespace {

constexpr Index kMaxFftElements = Index(1) << 28;
constexpr Index kBruteForceLimit = Index(64) * 64 * 64;

struct FftwDeleter {
  void operator()(void* p) const { fftw_free(p); }
};
using RealBuffer = std::unique_ptr<double[], FftwDeleter>;
using ComplexBuffer = std::unique_ptr<fftw_complex[], FftwDeleter>;

Index real_count(const IVec3& n) { return Index(n.x()) * n.y() * n.z(); }
Index complex_count(const IVec3& n) { return Index(n.x() / 2 + 1) * n.y() * n.z(); }

RealBuffer alloc_real(Index n) {
  RealBuffer b(static_cast<double*>(fftw_malloc(sizeof(double) * std::size_t(n))));
  if (!b) throw NumericalError("FFT buffer allocation failed");
  std::fill_n(b.get(), n, 0.0);
  return b;
}

ComplexBuffer alloc_complex(Index n) {
  ComplexBuffer b(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * std::size_t(n))));
  if (!b) throw NumericalError("FFT buffer allocation failed");
  return b;
}

/// FFTW planning is not thread-safe; plans are created once per shape under a lock and
/// executed through the thread-safe new-array interface.
class PlanCache {
 public:
  static PlanCache& instance() {
    static PlanCache cache;
    return cache;
  }

  std::pair<fftw_plan, fftw_plan> plans(const IVec3& n) {
    std::lock_guard<std::mutex> lock(mutex_);
    const auto key = std::make_tuple(n.x(), n.y(), n.z());
    auto it = plans_.find(key);
    if (it != plans_.end()) return it->second;
    RealBuffer r = alloc_real(real_count(n));
    ComplexBuffer c = alloc_complex(complex_count(n));
    // FFTW_ESTIMATE keeps plans (and therefore round-off) reproducible run to run.
    fftw_plan fwd = fftw_plan_dft_r2c_3d(n.z(), n.y(), n.x(), r.get(), c.get(), FFTW_ESTIMATE);
    fftw_plan inv = fftw_plan_dft_c2r_3d(n.z(), n.y(), n.x(), c.get(), r.get(), FFTW_ESTIMATE);
    if (!fwd || !inv) throw NumericalError("FFTW planning failed");
    plans_.emplace(key, std::make_pair(fwd, inv));
    return {fwd, inv};
  }

 private:
  PlanCache() = default;
  std::mutex mutex_;
  std::map<std::tuple<int, int, int>, std::pair<fftw_plan, fftw_plan>> plans_;
};

ComplexBuffer forward(const IVec3& shape, const ScalarGrid& g) {
  const GridDims& d = g.dims();
  RealBuffer r = alloc_real(real_count(shape));
  for (int k = 0; k < d.nz; ++k)
    for (int j = 0; j < d.ny; ++j)
      for (int i = 0; i < d.nx; ++i) r[i + Index(shape.x()) * (j + Index(shape.y()) * k)] = g(i, j, k);
  ComplexBuffer c = alloc_complex(complex_count(shape));
  fftw_execute_dft_r2c(PlanCache::instance().plans(shape).first, r.get(), c.get());
  return c;
}

void check_kernel(const GridDims& obstacle, const GridDims& kernel) {
  if (!obstacle.same_spacing(kernel)) throw ValidationError("correlate: obstacle and tool spacing differ");
  if (!kernel.lattice_aligned())
    throw ValidationError("correlate: tool grid must be lattice aligned (voxel centers on multiples of spacing)");
  if (obstacle.nz == 1 && (kernel.nz != 1 || kernel.lattice_offset().z() != 0))
    throw ValidationError("correlate: 2D obstacles need a 2D tool");
}

}  // namespace

namespace detail {
struct SpectrumBuffer {
  ComplexBuffer data;
};
}  // namespace detail

int fft_friendly_size(int n) {
  if (n <= 1) return 1;
  for (int m = n;; ++m) {
    int r = m;
    for (int p : {2, 3, 5, 7})
      while (r % p == 0) r /= p;
    if (r == 1) return m;
  }
}

ObstacleSpectrum::ObstacleSpectrum(const ScalarGrid& obstacle, const IVec3& max_kernel) : dims_(obstacle.dims()) {
  for (int a = 0; a < 3; ++a) {
    const Index need = Index(dims_.extent()[a]) + max_kernel[a] - 1;
    if (need > (1 << 20)) throw ValidationError("correlate: padded FFT axis too long");
    shape_[a] = fft_friendly_size(int(need));
  }
  if (real_count(shape_) > kMaxFftElements)
    throw ValidationError("correlate: padded FFT size " + std::to_string(real_count(shape_)) + " exceeds limit");
  auto buf = std::make_shared<detail::SpectrumBuffer>();
  buf->data = forward(shape_, obstacle);
  data_ = std::move(buf);
}

bool ObstacleSpectrum::fits(const IVec3& kernel_extent) const {
  for (int a = 0; a < 3; ++a)
    if (dims_.extent()[a] + kernel_extent[a] - 1 > shape_[a]) return false;
  return true;
}

KernelSpectrum ObstacleSpectrum::transform(const ScalarGrid& reflected_tool) const {
  check_kernel(dims_, reflected_tool.dims());
  if (!fits(reflected_tool.dims().extent()))
    throw ValidationError("correlate: tool grid larger than the planned FFT padding");
  KernelSpectrum k;
  k.shape_ = shape_;
  k.lo_ = reflected_tool.dims().lattice_offset();
  k.volume_ = integrate(reflected_tool);
  auto buf = std::make_shared<detail::SpectrumBuffer>();
  buf->data = forward(shape_, reflected_tool);
  k.data_ = std::move(buf);
  return k;
}

ScalarGrid ObstacleSpectrum::correlate(const KernelSpectrum& kernel) const {
  if (kernel.shape_ != shape_) throw ValidationError("correlate: kernel transformed at a different FFT shape");
  const Index nc = complex_count(shape_);
  const Index nr = real_count(shape_);
  ComplexBuffer prod = alloc_complex(nc);
  const fftw_complex* a = data_->data.get();
  const fftw_complex* b = kernel.data_->data.get();
  const double scale = dims_.cell_measure() / double(nr);
  for (Index i = 0; i < nc; ++i) {
    prod[i][0] = (a[i][0] * b[i][0] - a[i][1] * b[i][1]) * scale;
    prod[i][1] = (a[i][0] * b[i][1] + a[i][1] * b[i][0]) * scale;
  }
  RealBuffer full = alloc_real(nr);
  fftw_execute_dft_c2r(PlanCache::instance().plans(shape_).second, prod.get(), full.get());

  ScalarGrid field(dims_);
  const IVec3& lo = kernel.lo_;
  for (int k = 0; k < dims_.nz; ++k) {
    const int mk = k - lo.z();
    if (mk < 0 || mk >= shape_.z()) continue;
    for (int j = 0; j < dims_.ny; ++j) {
      const int mj = j - lo.y();
      if (mj < 0 || mj >= shape_.y()) continue;
      for (int i = 0; i < dims_.nx; ++i) {
        const int mi = i - lo.x();
        if (mi < 0 || mi >= shape_.x()) continue;
        const double v = full[mi + Index(shape_.x()) * (mj + Index(shape_.y()) * mk)];
        field(i, j, k) = v > 0.0 ? v : 0.0;
      }
    }
  }
  return field;
}

CorrelationResult correlate_fft(const ScalarGrid& obstacle, const ScalarGrid& reflected_tool) {
  check_kernel(obstacle.dims(), reflected_tool.dims());
  ObstacleSpectrum spectrum(obstacle, reflected_tool.dims().extent());
  return {spectrum.correlate(reflected_tool), integrate(reflected_tool)};
}

CorrelationResult correlate_bruteforce(const ScalarGrid& obstacle, const ScalarGrid& reflected_tool, bool force) {
  const GridDims& od = obstacle.dims();
  const GridDims& kd = reflected_tool.dims();
  check_kernel(od, kd);
  if (!force && (od.size() > kBruteForceLimit || kd.size() > kBruteForceLimit))
    throw ValidationError("correlate_bruteforce: grid exceeds the 64^3 work guard (pass force to override)");

  struct Tap {
    IVec3 offset;
    double w;
  };
  std::vector<Tap> taps;
  const IVec3 lo = kd.lattice_offset();
  for (Index idx = 0; idx < kd.size(); ++idx)
    if (reflected_tool[idx] != 0.0) taps.push_back({lo + kd.coords(idx), reflected_tool[idx]});

  ScalarGrid field(od);
  const double cell = od.cell_measure();
  for (Index t = 0; t < od.size(); ++t) {
    const IVec3 tc = od.coords(t);
    double acc = 0.0;
    for (const Tap& tap : taps) {
      const IVec3 x = tc - tap.offset;
      if (od.contains(x)) acc += obstacle[od.index(x)] * tap.w;
    }
    field[t] = acc * cell;
  }
  return {std::move(field), integrate(reflected_tool)};
}

}  // namespace nearnet

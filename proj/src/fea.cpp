#include "nearnet/fea.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <array>
#include <cmath>
#include <sstream>

namespace nearnet {

void BoundaryConditions::validate(const GridDims& dims) const {
  const int dim = dims.dimension();
  const IVec3 last(dims.nx, dims.ny, dim == 3 ? dims.nz : 0);
  auto check_node = [&](const IVec3& n, int axis, const char* what) {
    if ((n.array() < 0).any() || (n.array() > last.array()).any())
      throw ValidationError(std::string(what) + " node (" + std::to_string(n.x()) + "," + std::to_string(n.y()) +
                            "," + std::to_string(n.z()) + ") lies outside the grid");
    if (axis < 0 || axis >= dim) throw ValidationError(std::string(what) + " axis out of range");
  };
  if (fixed.empty()) throw ValidationError("boundary conditions fix no degrees of freedom");
  for (const auto& f : fixed) check_node(f.node, f.axis, "fixed");
  for (const auto& l : loads) {
    check_node(l.node, l.axis, "load");
    if (!std::isfinite(l.magnitude)) throw ValidationError("load magnitude must be finite");
  }
}

void MaterialModel::validate() const {
  if (!(youngs_modulus > 0.0) || !std::isfinite(youngs_modulus))
    throw ValidationError("Young's modulus must be positive");
  if (!(poisson_ratio > 0.0 && poisson_ratio < 0.5)) throw ValidationError("Poisson ratio must lie in (0, 0.5)");
  if (!(simp_penalty >= 1.0)) throw ValidationError("SIMP penalty must be at least 1");
  if (!(rho_min > 0.0 && rho_min < 0.1)) throw ValidationError("rho_min must lie in (0, 0.1)");
}

double MaterialModel::interpolation(double rho) const {
  return rho_min + (1.0 - rho_min) * std::pow(rho, simp_penalty);
}

double MaterialModel::interpolation_derivative(double rho) const {
  return simp_penalty * (1.0 - rho_min) * std::pow(rho, simp_penalty - 1.0);
}

Eigen::MatrixXd element_stiffness(const MaterialModel& mat, double spacing, int dimension) {
  mat.validate();
  if (dimension != 2 && dimension != 3) throw ValidationError("element dimension must be 2 or 3");
  const double E = mat.youngs_modulus, nu = mat.poisson_ratio;
  const int nodes = dimension == 2 ? 4 : 8;
  const int ndof = dimension * nodes;
  const int nstrain = dimension == 2 ? 3 : 6;
  static constexpr std::array<int, 8> sx{-1, 1, 1, -1, -1, 1, 1, -1};
  static constexpr std::array<int, 8> sy{-1, -1, 1, 1, -1, -1, 1, 1};
  static constexpr std::array<int, 8> sz{-1, -1, -1, -1, 1, 1, 1, 1};

  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(nstrain, nstrain);
  if (dimension == 2) {
    const double c = E / (1.0 - nu * nu);
    D << c, c * nu, 0, c * nu, c, 0, 0, 0, c * (1.0 - nu) / 2.0;
  } else {
    const double lam = E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu)), mu = E / (2.0 * (1.0 + nu));
    D.topLeftCorner(3, 3).setConstant(lam);
    D.topLeftCorner(3, 3).diagonal().array() += 2.0 * mu;
    D.bottomRightCorner(3, 3).diagonal().setConstant(mu);
  }

  const double g = 1.0 / std::sqrt(3.0);
  const double detj = std::pow(spacing / 2.0, dimension);
  const double scale = 2.0 / spacing;
  Eigen::MatrixXd ke = Eigen::MatrixXd::Zero(ndof, ndof);
  Eigen::MatrixXd B(nstrain, ndof);
  const int nz = dimension == 2 ? 1 : 2;
  for (int gz = 0; gz < nz; ++gz)
    for (int gy = 0; gy < 2; ++gy)
      for (int gx = 0; gx < 2; ++gx) {
        const double xi = gx ? g : -g, eta = gy ? g : -g, zeta = dimension == 2 ? 0.0 : (gz ? g : -g);
        B.setZero();
        for (int a = 0; a < nodes; ++a) {
          double dx, dy, dz = 0.0;
          if (dimension == 2) {
            dx = 0.25 * sx[a] * (1 + eta * sy[a]);
            dy = 0.25 * sy[a] * (1 + xi * sx[a]);
          } else {
            dx = 0.125 * sx[a] * (1 + eta * sy[a]) * (1 + zeta * sz[a]);
            dy = 0.125 * sy[a] * (1 + xi * sx[a]) * (1 + zeta * sz[a]);
            dz = 0.125 * sz[a] * (1 + xi * sx[a]) * (1 + eta * sy[a]);
          }
          dx *= scale;
          dy *= scale;
          dz *= scale;
          if (dimension == 2) {
            B(0, 2 * a) = dx;
            B(1, 2 * a + 1) = dy;
            B(2, 2 * a) = dy;
            B(2, 2 * a + 1) = dx;
          } else {
            const int c = 3 * a;
            B(0, c) = dx;
            B(1, c + 1) = dy;
            B(2, c + 2) = dz;
            B(3, c) = dy;
            B(3, c + 1) = dx;
            B(4, c + 1) = dz;
            B(4, c + 2) = dy;
            B(5, c) = dz;
            B(5, c + 2) = dx;
          }
        }
        ke.noalias() += B.transpose() * D * B * detj;
      }
  return 0.5 * (ke + ke.transpose());
}

// Element loops specialized on dimension so the element matrix is a fixed-size Eigen type.
template <int D>
struct ElasticityKernels {
  static constexpr int kNodes = D == 2 ? 4 : 8;
  static constexpr int kDof = D * kNodes;
  using Ke = Eigen::Matrix<double, kDof, kDof>;
  using Ve = Eigen::Matrix<double, kDof, 1>;

  // Calls fn(element index, base node index) for every element, one parity color at a time.
  // Elements of one color share no node, so accumulation inside a color is race-free and the
  // summation order is independent of the thread count.
  template <typename Fn>
  static void for_each_colored(const ElasticityModel& m, Fn&& fn) {
    const GridDims& d = m.dims_;
    const int colors = D == 2 ? 4 : 8;
    for (int c = 0; c < colors; ++c) {
      const int pi = c & 1, pj = (c >> 1) & 1, pk = (c >> 2) & 1;
      const int nj = (d.ny - pj + 1) / 2, nk = D == 2 ? 1 : (d.nz - pk + 1) / 2;
      const long rows = long(nj) * nk;
#pragma omp parallel for schedule(static)
      for (long r = 0; r < rows; ++r) {
        const int j = pj + 2 * int(r % nj);
        const int k = D == 2 ? 0 : pk + 2 * int(r / nj);
        for (int i = pi; i < d.nx; i += 2) {
          const Index e = d.index(i, j, k);
          const Index base = i + Index(m.nodes_.x()) * (j + Index(m.nodes_.y()) * k);
          fn(e, base);
        }
      }
    }
  }

  static Ve gather(const ElasticityModel& m, const Eigen::VectorXd& u, Index base) {
    Ve ue;
    for (int a = 0; a < kNodes; ++a) {
      const Index n = base + m.local_offsets_[std::size_t(a)];
      for (int c = 0; c < D; ++c) ue[D * a + c] = u[D * n + c];
    }
    return ue;
  }

  static void apply(const ElasticityModel& m, const std::vector<double>& s, const Eigen::VectorXd& u,
                    Eigen::VectorXd& y) {
    const Ke ke = m.ke_;
    y.setZero(u.size());
    for_each_colored(m, [&](Index e, Index base) {
      if (s[std::size_t(e)] == 0.0) return;
      const Ve ye = s[std::size_t(e)] * (ke * gather(m, u, base));
      for (int a = 0; a < kNodes; ++a) {
        const Index n = base + m.local_offsets_[std::size_t(a)];
        for (int c = 0; c < D; ++c) y[D * n + c] += ye[D * a + c];
      }
    });
  }

  static Eigen::VectorXd diagonal(const ElasticityModel& m, const std::vector<double>& s) {
    Eigen::VectorXd dg = Eigen::VectorXd::Zero(m.dof_count());
    const Ve kd = m.ke_.diagonal();
    for_each_colored(m, [&](Index e, Index base) {
      for (int a = 0; a < kNodes; ++a) {
        const Index n = base + m.local_offsets_[std::size_t(a)];
        for (int c = 0; c < D; ++c) dg[D * n + c] += s[std::size_t(e)] * kd[D * a + c];
      }
    });
    return dg;
  }

  static ScalarGrid energy(const ElasticityModel& m, const Eigen::VectorXd& u) {
    const Ke ke = m.ke_;
    ScalarGrid out(m.dims_);
    for_each_colored(m, [&](Index e, Index base) {
      const Ve ue = gather(m, u, base);
      out[e] = ue.dot(ke * ue);
    });
    return out;
  }

  static Eigen::SparseMatrix<double> assemble(const ElasticityModel& m, const std::vector<double>& s,
                                              const std::vector<Index>& map, Index n) {
    std::vector<Eigen::Triplet<double>> trips;
    const GridDims& d = m.dims_;
    trips.reserve(std::size_t(d.size()) * kDof * kDof / 2);
    std::array<Index, kDof> gd;
    for (int k = 0; k < d.nz; ++k)
      for (int j = 0; j < d.ny; ++j)
        for (int i = 0; i < d.nx; ++i) {
          const Index e = d.index(i, j, k);
          if (s[std::size_t(e)] == 0.0) continue;
          const Index base = i + Index(m.nodes_.x()) * (j + Index(m.nodes_.y()) * k);
          for (int a = 0; a < kNodes; ++a)
            for (int c = 0; c < D; ++c)
              gd[std::size_t(D * a + c)] = map[std::size_t(D * (base + m.local_offsets_[std::size_t(a)]) + c)];
          for (int a = 0; a < kDof; ++a) {
            if (gd[std::size_t(a)] < 0) continue;
            for (int b = 0; b < kDof; ++b)
              if (gd[std::size_t(b)] >= 0)
                trips.emplace_back(gd[std::size_t(a)], gd[std::size_t(b)], s[std::size_t(e)] * m.ke_(a, b));
          }
        }
    Eigen::SparseMatrix<double> K(n, n);
    K.setFromTriplets(trips.begin(), trips.end());
    return K;
  }
};

ElasticityModel::ElasticityModel(const GridDims& dims, const MaterialModel& mat, const BoundaryConditions& bc,
                                 std::optional<ScalarGrid> active)
    : dims_(dims), mat_(mat), dim_(dims.dimension()) {
  dims_.validate();
  mat_.validate();
  bc.validate(dims_);
  nodes_ = IVec3(dims_.nx + 1, dims_.ny + 1, dim_ == 3 ? dims_.nz + 1 : 1);
  node_count_ = Index(nodes_.x()) * nodes_.y() * nodes_.z();
  ke_ = element_stiffness(mat_, dims_.spacing, dim_);
  const int local = dim_ == 2 ? 4 : 8;
  static constexpr std::array<int, 8> ox{0, 1, 1, 0, 0, 1, 1, 0}, oy{0, 0, 1, 1, 0, 0, 1, 1},
      oz{0, 0, 0, 0, 1, 1, 1, 1};
  for (int a = 0; a < local; ++a)
    local_offsets_.push_back(ox[std::size_t(a)] + Index(nodes_.x()) * (oy[std::size_t(a)] + Index(nodes_.y()) * oz[std::size_t(a)]));

  active_.assign(std::size_t(dims_.size()), 1);
  if (active) {
    if (!active->dims().same_shape(dims_)) throw ValidationError("active element mask: grid dimension mismatch");
    for (Index e = 0; e < dims_.size(); ++e) active_[std::size_t(e)] = (*active)[e] > 0.5 ? 1 : 0;
  }

  fixed_.assign(std::size_t(dof_count()), 0);
  for (const auto& f : bc.fixed) fixed_[std::size_t(dim_ * node_index(f.node) + f.axis)] = 1;
  // Nodes touching no active element have an empty row; hold them fixed.
  std::vector<unsigned char> attached(std::size_t(node_count_), 0);
  for (int k = 0; k < dims_.nz; ++k)
    for (int j = 0; j < dims_.ny; ++j)
      for (int i = 0; i < dims_.nx; ++i) {
        if (!active_[std::size_t(dims_.index(i, j, k))]) continue;
        const Index base = i + Index(nodes_.x()) * (j + Index(nodes_.y()) * k);
        for (Index o : local_offsets_) attached[std::size_t(base + o)] = 1;
      }
  for (Index n = 0; n < node_count_; ++n)
    if (!attached[std::size_t(n)])
      for (int c = 0; c < dim_; ++c) fixed_[std::size_t(dim_ * n + c)] = 1;

  f_ = Eigen::VectorXd::Zero(dof_count());
  for (const auto& l : bc.loads) {
    const Index n = node_index(l.node);
    if (!attached[std::size_t(n)])
      throw ValidationError("load applied at node (" + std::to_string(l.node.x()) + "," + std::to_string(l.node.y()) +
                            "," + std::to_string(l.node.z()) + ") that touches no design element");
    const Index dof = dim_ * n + l.axis;
    if (!fixed_[std::size_t(dof)]) f_[dof] += l.magnitude;
  }
  check_rigid_modes(bc);
}

Index ElasticityModel::node_index(const IVec3& n) const {
  return n.x() + Index(nodes_.x()) * (n.y() + Index(nodes_.y()) * (dim_ == 3 ? n.z() : 0));
}

void ElasticityModel::check_rigid_modes(const BoundaryConditions& bc) const {
  const int modes = dim_ == 2 ? 3 : 6;
  const Vec3 center = (nodes_.cast<double>().array() - 1.0).matrix() / 2.0;
  const double scale = std::max(1.0, double(nodes_.maxCoeff() - 1));
  Eigen::MatrixXd C(Index(bc.fixed.size()), modes);
  for (std::size_t r = 0; r < bc.fixed.size(); ++r) {
    const Vec3 p = (bc.fixed[r].node.cast<double>() - center) / scale;
    const int a = bc.fixed[r].axis;
    Eigen::MatrixXd phi(3, modes);
    if (dim_ == 2) {
      phi << 1, 0, -p.y(), 0, 1, p.x(), 0, 0, 0;
    } else {
      phi << 1, 0, 0, 0, p.z(), -p.y(), 0, 1, 0, -p.z(), 0, p.x(), 0, 0, 1, p.y(), -p.x(), 0;
    }
    C.row(Index(r)) = phi.row(a);
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(C);
  qr.setThreshold(1e-9);
  if (qr.rank() == modes) return;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(C, Eigen::ComputeFullV);
  const Eigen::VectorXd free_mode = svd.matrixV().col(modes - 1);
  Index which = 0;
  free_mode.cwiseAbs().maxCoeff(&which);
  static const char* names2[] = {"translation along x", "translation along y", "rotation about z"};
  static const char* names3[] = {"translation along x", "translation along y", "translation along z",
                                 "rotation about x",    "rotation about y",    "rotation about z"};
  throw NumericalError(std::string("stiffness matrix is singular: fixities leave the rigid mode '") +
                       (dim_ == 2 ? names2 : names3)[which] + "' unconstrained");
}

std::vector<double> ElasticityModel::element_factors(const ScalarGrid& rho_tilde) const {
  if (!rho_tilde.dims().same_shape(dims_)) throw ValidationError("FEA: density grid dimension mismatch");
  if (!in_unit_range(rho_tilde, 1e-12)) throw ValidationError("FEA: densities must lie in [0, 1]");
  std::vector<double> s(std::size_t(dims_.size()), 0.0);
  for (Index e = 0; e < dims_.size(); ++e)
    if (active_[std::size_t(e)]) s[std::size_t(e)] = mat_.interpolation(std::clamp(rho_tilde[e], 0.0, 1.0));
  return s;
}

Eigen::VectorXd ElasticityModel::apply(const ScalarGrid& rho_tilde, const Eigen::VectorXd& u) const {
  if (u.size() != dof_count()) throw ValidationError("FEA: displacement vector has the wrong length");
  const auto s = element_factors(rho_tilde);
  Eigen::VectorXd masked = u;
  for (Index i = 0; i < u.size(); ++i)
    if (fixed_[std::size_t(i)]) masked[i] = 0.0;
  Eigen::VectorXd y;
  if (dim_ == 2)
    ElasticityKernels<2>::apply(*this, s, masked, y);
  else
    ElasticityKernels<3>::apply(*this, s, masked, y);
  for (Index i = 0; i < u.size(); ++i)
    if (fixed_[std::size_t(i)]) y[i] = u[i];
  return y;
}

FEAResult ElasticityModel::solve(const ScalarGrid& rho_tilde, const SolverOptions& options,
                                 const Eigen::VectorXd* warm_start) const {
  if (!(options.tolerance > 0.0)) throw ValidationError("solver tolerance must be positive");
  const auto s = element_factors(rho_tilde);
  const Index n = dof_count();
  FEAResult res;
  res.displacements = Eigen::VectorXd::Zero(n);
  const double fnorm = f_.norm();
  if (fnorm == 0.0) return res;

  auto K = [&](const Eigen::VectorXd& x, Eigen::VectorXd& y) {
    if (dim_ == 2)
      ElasticityKernels<2>::apply(*this, s, x, y);
    else
      ElasticityKernels<3>::apply(*this, s, x, y);
    for (Index i = 0; i < n; ++i)
      if (fixed_[std::size_t(i)]) y[i] = 0.0;
  };

  if (options.solver == LinearSolver::Cholesky) {
    std::vector<Index> map(std::size_t(n), -1);
    Index free = 0;
    for (Index i = 0; i < n; ++i)
      if (!fixed_[std::size_t(i)]) map[std::size_t(i)] = free++;
    const auto A = dim_ == 2 ? ElasticityKernels<2>::assemble(*this, s, map, free)
                             : ElasticityKernels<3>::assemble(*this, s, map, free);
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(A);
    if (ldlt.info() != Eigen::Success) throw NumericalError("sparse factorization of the stiffness matrix failed");
    Eigen::VectorXd b(free);
    for (Index i = 0; i < n; ++i)
      if (map[std::size_t(i)] >= 0) b[map[std::size_t(i)]] = f_[i];
    const Eigen::VectorXd x = ldlt.solve(b);
    for (Index i = 0; i < n; ++i)
      if (map[std::size_t(i)] >= 0) res.displacements[i] = x[map[std::size_t(i)]];
  } else {
    Eigen::VectorXd inv = dim_ == 2 ? ElasticityKernels<2>::diagonal(*this, s) : ElasticityKernels<3>::diagonal(*this, s);
    for (Index i = 0; i < n; ++i) inv[i] = fixed_[std::size_t(i)] || inv[i] <= 0.0 ? 0.0 : 1.0 / inv[i];

    Eigen::VectorXd& x = res.displacements;
    if (warm_start && warm_start->size() == n) {
      x = *warm_start;
      for (Index i = 0; i < n; ++i)
        if (fixed_[std::size_t(i)]) x[i] = 0.0;
    }
    Eigen::VectorXd r(n), Ap(n);
    K(x, Ap);
    r = f_ - Ap;
    Eigen::VectorXd z = inv.cwiseProduct(r);
    Eigen::VectorXd p = z;
    double rz = r.dot(z);
    double rel = r.norm() / fnorm;
    int it = 0;
    while (rel > options.tolerance) {
      if (it >= options.max_iterations) {
        std::ostringstream os;
        os << "conjugate gradients did not converge in " << it << " iterations (relative residual " << rel << ")";
        throw NumericalError(os.str());
      }
      K(p, Ap);
      const double pAp = p.dot(Ap);
      if (!(pAp > 0.0)) throw NumericalError("stiffness matrix is not positive definite on the free dofs");
      const double alpha = rz / pAp;
      x.noalias() += alpha * p;
      r.noalias() -= alpha * Ap;
      z = inv.cwiseProduct(r);
      const double rz_new = r.dot(z);
      p = z + (rz_new / rz) * p;
      rz = rz_new;
      rel = r.norm() / fnorm;
      ++it;
    }
    res.iterations = it;
  }

  Eigen::VectorXd Ku(n);
  K(res.displacements, Ku);
  res.residual = (Ku - f_).norm() / fnorm;
  res.compliance = f_.dot(res.displacements);
  if (!std::isfinite(res.compliance)) throw NumericalError("FEA produced a non-finite compliance");
  return res;
}

ScalarGrid ElasticityModel::element_energy(const Eigen::VectorXd& u) const {
  if (u.size() != dof_count()) throw ValidationError("FEA: displacement vector has the wrong length");
  return dim_ == 2 ? ElasticityKernels<2>::energy(*this, u) : ElasticityKernels<3>::energy(*this, u);
}

ScalarGrid ElasticityModel::compliance_sensitivity(const ScalarGrid& rho_tilde, const FEAResult& result) const {
  if (!rho_tilde.dims().same_shape(dims_)) throw ValidationError("compliance_sensitivity: grid dimension mismatch");
  ScalarGrid out = element_energy(result.displacements);
  for (Index e = 0; e < dims_.size(); ++e)
    out[e] = active_[std::size_t(e)] ? -mat_.interpolation_derivative(std::clamp(rho_tilde[e], 0.0, 1.0)) * out[e]
                                     : 0.0;
  return out;
}

FEAResult assemble_and_solve(const ScalarGrid& rho_tilde, const BoundaryConditions& bc, const MaterialModel& mat,
                             const SolverOptions& options) {
  return ElasticityModel(rho_tilde.dims(), mat, bc).solve(rho_tilde, options);
}

ScalarGrid compliance_sensitivity(const ScalarGrid& rho_tilde, const FEAResult& result, const MaterialModel& mat) {
  const GridDims& d = rho_tilde.dims();
  const int dim = d.dimension();
  const Index nodes = Index(d.nx + 1) * (d.ny + 1) * (dim == 3 ? d.nz + 1 : 1);
  if (result.displacements.size() != dim * nodes)
    throw ValidationError("compliance_sensitivity: displacement vector does not match the grid");
  const Eigen::MatrixXd ke = element_stiffness(mat, d.spacing, dim);
  ScalarGrid out(d);
  const int local = dim == 2 ? 4 : 8;
  static constexpr std::array<int, 8> ox{0, 1, 1, 0, 0, 1, 1, 0}, oy{0, 0, 1, 1, 0, 0, 1, 1},
      oz{0, 0, 0, 0, 1, 1, 1, 1};
  Eigen::VectorXd ue(dim * local);
  for (int k = 0; k < d.nz; ++k)
    for (int j = 0; j < d.ny; ++j)
      for (int i = 0; i < d.nx; ++i) {
        for (int a = 0; a < local; ++a) {
          const Index n = (i + ox[std::size_t(a)]) +
                          Index(d.nx + 1) * ((j + oy[std::size_t(a)]) + Index(d.ny + 1) * (k + oz[std::size_t(a)]));
          for (int c = 0; c < dim; ++c) ue[dim * a + c] = result.displacements[dim * n + c];
        }
        const Index e = d.index(i, j, k);
        out[e] = -mat.interpolation_derivative(std::clamp(rho_tilde[e], 0.0, 1.0)) * ue.dot(ke * ue);
      }
  return out;
}

ScalarGrid normalize_sensitivity(const ScalarGrid& s) {
  const double m = s.size() ? s.values().abs().maxCoeff() : 0.0;
  if (m == 0.0) return s;
  return {s.dims(), s.values() / m};
}

}  // namespace nearnet

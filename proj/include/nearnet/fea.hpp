#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "nearnet/grid.hpp"

namespace nearnet {

/// One displacement component at a grid node. Node (i,j,k) sits at origin + (i,j,k)*spacing.
struct NodeDof {
  IVec3 node = IVec3::Zero();
  int axis = 0;
};

struct NodalLoad {
  IVec3 node = IVec3::Zero();
  int axis = 0;
  double magnitude = 0.0;
};

struct BoundaryConditions {
  std::vector<NodeDof> fixed;
  std::vector<NodalLoad> loads;

  void validate(const GridDims& dims) const;
};

/// Modified SIMP: E(rho) = E * (rho_min + (1 - rho_min) * rho^p).
struct MaterialModel {
  double youngs_modulus = 1.0;
  double poisson_ratio = 0.3;
  double simp_penalty = 3.0;
  double rho_min = 1e-3;

  void validate() const;
  double interpolation(double rho) const;
  double interpolation_derivative(double rho) const;
};

enum class LinearSolver { ConjugateGradient, Cholesky };

struct SolverOptions {
  LinearSolver solver = LinearSolver::ConjugateGradient;
  double tolerance = 1e-8;
  int max_iterations = 50000;
};

struct FEAResult {
  /// Nodal displacements, `dimension` components per node, node index x fastest.
  Eigen::VectorXd displacements;
  double compliance = 0.0;
  int iterations = 0;
  /// ||K u - f|| / ||f|| over free dofs (0 when f = 0).
  double residual = 0.0;
};

/// Element stiffness of one voxel (bilinear quad in 2D plane stress with unit thickness,
/// trilinear hex in 3D) at full material. Local nodes: (0,0,0) (1,0,0) (1,1,0) (0,1,0), then z+1.
Eigen::MatrixXd element_stiffness(const MaterialModel& mat, double spacing, int dimension);

/// Linear elasticity on a voxel grid with SIMP-scaled element stiffness.
///
/// Elements outside `active` (when given) carry no stiffness; nodes touching no active
/// element are held fixed. Dirichlet dofs are eliminated.
class ElasticityModel {
 public:
  ElasticityModel(const GridDims& dims, const MaterialModel& mat, const BoundaryConditions& bc,
                  std::optional<ScalarGrid> active = std::nullopt);

  const GridDims& dims() const { return dims_; }
  int dimension() const { return dim_; }
  Index dof_count() const { return Index(dim_) * node_count_; }
  const Eigen::VectorXd& load_vector() const { return f_; }
  const Eigen::MatrixXd& element_matrix() const { return ke_; }

  FEAResult solve(const ScalarGrid& rho_tilde, const SolverOptions& options = {},
                  const Eigen::VectorXd* warm_start = nullptr) const;

  /// K(rho) u over all dofs, fixed rows and columns left as identity.
  Eigen::VectorXd apply(const ScalarGrid& rho_tilde, const Eigen::VectorXd& u) const;
  /// Element strain energies u_e^T k0 u_e (full-material element matrix).
  ScalarGrid element_energy(const Eigen::VectorXd& u) const;
  /// d(compliance)/d(rho_tilde), non-positive everywhere.
  ScalarGrid compliance_sensitivity(const ScalarGrid& rho_tilde, const FEAResult& result) const;

 private:
  template <int D>
  friend struct ElasticityKernels;

  std::vector<double> element_factors(const ScalarGrid& rho_tilde) const;
  Index node_index(const IVec3& n) const;
  void check_rigid_modes(const BoundaryConditions& bc) const;

  GridDims dims_;
  MaterialModel mat_;
  int dim_ = 3;
  IVec3 nodes_;
  Index node_count_ = 0;
  Eigen::MatrixXd ke_;
  std::vector<Index> local_offsets_;
  std::vector<unsigned char> fixed_;
  Eigen::VectorXd f_;
  std::vector<unsigned char> active_;
};

/// Convenience wrapper: build the model and solve once.
FEAResult assemble_and_solve(const ScalarGrid& rho_tilde, const BoundaryConditions& bc, const MaterialModel& mat,
                             const SolverOptions& options = {});

/// Raw compliance sensitivity for a result obtained on the same density and boundary conditions.
ScalarGrid compliance_sensitivity(const ScalarGrid& rho_tilde, const FEAResult& result, const MaterialModel& mat);

/// Divide by the largest magnitude so values land in [-1, 0]; all-zero input stays zero.
ScalarGrid normalize_sensitivity(const ScalarGrid& s);

}  // namespace nearnet

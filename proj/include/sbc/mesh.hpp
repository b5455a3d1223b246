#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <array>
#include <functional>
#include <span>
#include <vector>

namespace sbc {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using SpMat = Eigen::SparseMatrix<double>;
using Point = Eigen::Vector2d;
using Index = Eigen::Index;

/// Polar discretization of the disk of radius R.
///
/// Dof layout: the center node is dof 0, ring i (1..n_r) at angle j is dof
/// 1 + (i-1)*n_theta + j. The outermost ring is the boundary circle; each of
/// its nodes carries the bulk trace and the surface unknown as a single dof,
/// so the trace identification is built into the numbering.
///
/// The bulk is split into P1 triangles (a fan around the center, two
/// triangles per annular quad). Bulk quadrature weights are the lumped
/// triangle masses, surface weights are R * dtheta.
struct PolarMesh {
  double R = 0.0;
  int n_r = 0;
  int n_theta = 0;
  double dr = 0.0;
  double dtheta = 0.0;

  std::vector<Point> nodes;           ///< one per dof
  Vec radius;                         ///< |x| per dof
  Vec w_bulk;                         ///< ~ dx, all dofs (boundary ring included)
  Vec w_surf;                         ///< ~ dsigma, zero off the boundary ring

  std::vector<std::array<Index, 3>> triangles;
  Vec triangle_area;
  std::vector<Eigen::Matrix<double, 2, 3>> triangle_grad;  ///< grad of the three hat functions

  std::vector<std::array<Index, 2>> boundary_edges;  ///< counterclockwise (a -> b)
  double edge_length = 0.0;                          ///< arc length R * dtheta

  SpMat grad;          ///< (2 * n_triangles) x n_dof, per-triangle gradient
  SpMat surface_grad;  ///< n_theta x n_dof, tangential derivative per boundary edge
  Vec grad_weights;          ///< quadrature weight of each row of `grad`
  Vec surface_grad_weights;  ///< quadrature weight of each row of `surface_grad`

  Index num_dofs() const { return static_cast<Index>(nodes.size()); }
  Index num_triangles() const { return static_cast<Index>(triangles.size()); }
  Index num_boundary() const { return n_theta; }
  Index first_boundary_dof() const { return 1 + Index(n_r - 1) * n_theta; }
  Index dof(int ring, int j) const;
  bool is_boundary(Index dof) const { return dof >= first_boundary_dof(); }

  /// Diagonal of the coupled mass operator (bulk + surface weights).
  Vec mass() const { return w_bulk + w_surf; }

  Point triangle_centroid(Index t) const;
  Point edge_midpoint(Index e) const;

  /// Boundary slice of a dof vector.
  auto boundary(const Vec& v) const { return v.tail(n_theta); }
};

/// Pointwise coefficients of the forward/backward operators. Deterministic in
/// (t, x); the solvers sample them once per time step.
struct CoefficientSet {
  std::function<Eigen::Matrix2d(double, const Point&)> A;
  std::function<double(double, const Point&)> b_surf;
  std::function<double(double, const Point&)> a1;
  std::function<double(double, const Point&)> a2;
  std::function<Eigen::Vector2d(double, const Point&)> B1;
  std::function<double(double, const Point&)> B2;  ///< tangential component
  double beta0 = 1.0;

  /// A = I, b_surf = 1, every lower-order coefficient zero.
  static CoefficientSet heat(double beta0 = 1.0);
  /// Spatially constant coefficients.
  static CoefficientSet constant(const Eigen::Matrix2d& A, double b_surf, double a1, double a2,
                                 const Eigen::Vector2d& B1, double B2, double beta0);
};

/// Sup norms of the lower-order coefficients over the discrete samples.
struct CoefficientNorms {
  double a1 = 0.0;
  double a2 = 0.0;
  double B1 = 0.0;
  double B2 = 0.0;
};

CoefficientNorms coefficient_norms(const PolarMesh& mesh, const CoefficientSet& coeffs,
                                   std::span<const double> times);

/// Control subdomain G0 = disk(center, radius) with the critical set
/// G1 = disk(0, g1_radius) strictly inside.
struct ControlRegion {
  Point center = Point::Zero();
  double radius = 0.0;
  double g1_radius = 0.0;
  Vec indicator;             ///< 0/1 per dof
  std::vector<Index> dofs;   ///< dofs with indicator 1, increasing
  bool contains_G1 = false;

  Index size() const { return static_cast<Index>(dofs.size()); }
  Vec scatter(const Vec& compact, Index n_dof) const;
  Vec gather(const Vec& full) const;
};

ControlRegion build_control_region(const PolarMesh& mesh, const Point& center, double radius,
                                   double g1_radius);

/// Weak-form spatial operators at one time sample. Acting on coupled dof
/// vectors, S carries both the bulk form and the Laplace-Beltrami form; the
/// conormal coupling is absorbed by the shared boundary dofs.
struct SpatialForms {
  double time = 0.0;
  Vec M;      ///< diagonal mass
  SpMat S;    ///< symmetric PSD stiffness
  SpMat C;    ///< convection: (C y)_i = int B1.grad y phi_i + int_Gamma B2 d_s y phi_i
  Vec Rx;     ///< diagonal reaction: w_bulk a1 + w_surf a2
  double peclet = 0.0;
  bool peclet_warning = false;
};

PolarMesh build_polar_mesh(double R, int n_r, int n_theta);

SpatialForms assemble_forms(const PolarMesh& mesh, const CoefficientSet& coeffs, double t);

double integrate_bulk(const PolarMesh& mesh, const Vec& field);
double integrate_surface(const PolarMesh& mesh, const Vec& field);

/// Load vector b with b.v = <div F, v> = -sum w F . grad v, for a bulk field F
/// given per triangle as (Fx, Fy) pairs.
Vec weak_divergence(const PolarMesh& mesh, const Vec& F);
/// Same for a tangential surface field given per boundary edge.
Vec weak_surface_divergence(const PolarMesh& mesh, const Vec& F_surf);

}  // namespace sbc

#include "sbc/mesh.hpp"

#include "sbc/error.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <numbers>
#include <string>

namespace sbc {

namespace {

using Triplet = Eigen::Triplet<double>;

void check_ellipticity(const Eigen::Matrix2d& A, double beta0) {
  const double scale = std::max(1.0, A.cwiseAbs().maxCoeff());
  if (std::abs(A(0, 1) - A(1, 0)) > 1e-13 * scale)
    throw EllipticityError("diffusion sample is not symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(A, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < beta0 * (1.0 - 1e-12))
    throw EllipticityError("diffusion eigenvalue " + std::to_string(es.eigenvalues().minCoeff()) +
                           " below beta0 = " + std::to_string(beta0));
}

}  // namespace

Index PolarMesh::dof(int ring, int j) const {
  if (ring == 0) return 0;
  const int jj = ((j % n_theta) + n_theta) % n_theta;
  return 1 + Index(ring - 1) * n_theta + jj;
}

Point PolarMesh::triangle_centroid(Index t) const {
  const auto& tri = triangles[static_cast<size_t>(t)];
  return (nodes[tri[0]] + nodes[tri[1]] + nodes[tri[2]]) / 3.0;
}

Point PolarMesh::edge_midpoint(Index e) const {
  // Midpoint on the arc, so surface coefficients are sampled on the circle.
  const double angle = (static_cast<double>(e) + 0.5) * dtheta;
  return {R * std::cos(angle), R * std::sin(angle)};
}

PolarMesh build_polar_mesh(double R, int n_r, int n_theta) {
  if (!(R > 0.0) || !std::isfinite(R)) throw GeometryError("disk radius must be positive");
  if (n_r < 4) throw GeometryError("n_r must be at least 4");
  if (n_theta < 8) throw GeometryError("n_theta must be at least 8");
  if (n_theta % 2 != 0) throw GeometryError("n_theta must be even");

  PolarMesh m;
  m.R = R;
  m.n_r = n_r;
  m.n_theta = n_theta;
  m.dr = R / n_r;
  m.dtheta = 2.0 * std::numbers::pi / n_theta;
  m.edge_length = R * m.dtheta;

  const Index n = 1 + Index(n_r) * n_theta;
  m.nodes.resize(static_cast<size_t>(n));
  m.radius.resize(n);
  m.nodes[0] = Point::Zero();
  m.radius[0] = 0.0;
  for (int i = 1; i <= n_r; ++i) {
    for (int j = 0; j < n_theta; ++j) {
      const Index d = m.dof(i, j);
      const double r = i * m.dr;
      m.nodes[d] = Point(r * std::cos(j * m.dtheta), r * std::sin(j * m.dtheta));
      m.radius[d] = r;
    }
  }

  for (int j = 0; j < n_theta; ++j) m.triangles.push_back({0, m.dof(1, j), m.dof(1, j + 1)});
  for (int i = 1; i < n_r; ++i) {
    for (int j = 0; j < n_theta; ++j) {
      const Index a = m.dof(i, j), b = m.dof(i, j + 1);
      const Index c = m.dof(i + 1, j + 1), d = m.dof(i + 1, j);
      m.triangles.push_back({a, b, c});
      m.triangles.push_back({a, c, d});
    }
  }

  const Index nt = m.num_triangles();
  m.triangle_area.resize(nt);
  m.triangle_grad.resize(static_cast<size_t>(nt));
  m.w_bulk = Vec::Zero(n);
  std::vector<Triplet> gt;
  gt.reserve(static_cast<size_t>(6 * nt));
  m.grad_weights.resize(2 * nt);
  for (Index t = 0; t < nt; ++t) {
    const auto& tri = m.triangles[static_cast<size_t>(t)];
    const Point& p0 = m.nodes[tri[0]];
    const Point& p1 = m.nodes[tri[1]];
    const Point& p2 = m.nodes[tri[2]];
    const double twice = (p1 - p0).x() * (p2 - p0).y() - (p1 - p0).y() * (p2 - p0).x();
    if (!(std::abs(twice) > 0.0)) throw GeometryError("degenerate triangle");
    const double area = 0.5 * std::abs(twice);
    Eigen::Matrix<double, 2, 3> G;
    const Point* p[3] = {&p0, &p1, &p2};
    for (int v = 0; v < 3; ++v) {
      const Point& a = *p[(v + 1) % 3];
      const Point& b = *p[(v + 2) % 3];
      G(0, v) = (a.y() - b.y()) / twice;
      G(1, v) = (b.x() - a.x()) / twice;
    }
    m.triangle_area[t] = area;
    m.triangle_grad[static_cast<size_t>(t)] = G;
    for (int v = 0; v < 3; ++v) {
      m.w_bulk[tri[v]] += area / 3.0;
      gt.emplace_back(2 * t, tri[v], G(0, v));
      gt.emplace_back(2 * t + 1, tri[v], G(1, v));
    }
    m.grad_weights[2 * t] = area;
    m.grad_weights[2 * t + 1] = area;
  }
  m.grad.resize(2 * nt, n);
  m.grad.setFromTriplets(gt.begin(), gt.end());

  m.w_surf = Vec::Zero(n);
  std::vector<Triplet> st;
  for (int j = 0; j < n_theta; ++j) {
    const Index a = m.dof(n_r, j), b = m.dof(n_r, j + 1);
    m.boundary_edges.push_back({a, b});
    m.w_surf[a] = m.edge_length;
    st.emplace_back(j, a, -1.0 / m.edge_length);
    st.emplace_back(j, b, 1.0 / m.edge_length);
  }
  m.surface_grad.resize(n_theta, n);
  m.surface_grad.setFromTriplets(st.begin(), st.end());
  m.surface_grad_weights = Vec::Constant(n_theta, m.edge_length);
  return m;
}

CoefficientSet CoefficientSet::heat(double beta0) {
  return constant(Eigen::Matrix2d::Identity(), 1.0, 0.0, 0.0, Eigen::Vector2d::Zero(), 0.0, beta0);
}

CoefficientSet CoefficientSet::constant(const Eigen::Matrix2d& A, double b_surf, double a1,
                                        double a2, const Eigen::Vector2d& B1, double B2,
                                        double beta0) {
  CoefficientSet c;
  c.A = [A](double, const Point&) { return A; };
  c.b_surf = [b_surf](double, const Point&) { return b_surf; };
  c.a1 = [a1](double, const Point&) { return a1; };
  c.a2 = [a2](double, const Point&) { return a2; };
  c.B1 = [B1](double, const Point&) { return B1; };
  c.B2 = [B2](double, const Point&) { return B2; };
  c.beta0 = beta0;
  return c;
}

CoefficientNorms coefficient_norms(const PolarMesh& mesh, const CoefficientSet& coeffs,
                                   std::span<const double> times) {
  CoefficientNorms out;
  for (double t : times) {
    for (Index d = 0; d < mesh.num_dofs(); ++d) {
      out.a1 = std::max(out.a1, std::abs(coeffs.a1(t, mesh.nodes[d])));
      if (mesh.is_boundary(d)) out.a2 = std::max(out.a2, std::abs(coeffs.a2(t, mesh.nodes[d])));
    }
    for (Index k = 0; k < mesh.num_triangles(); ++k)
      out.B1 = std::max(out.B1, coeffs.B1(t, mesh.triangle_centroid(k)).norm());
    for (Index e = 0; e < mesh.num_boundary(); ++e)
      out.B2 = std::max(out.B2, std::abs(coeffs.B2(t, mesh.edge_midpoint(e))));
  }
  return out;
}

Vec ControlRegion::scatter(const Vec& compact, Index n_dof) const {
  if (compact.size() != size()) throw DimensionMismatch("control vector does not match G0 size");
  Vec full = Vec::Zero(n_dof);
  for (Index i = 0; i < size(); ++i) full[dofs[static_cast<size_t>(i)]] = compact[i];
  return full;
}

Vec ControlRegion::gather(const Vec& full) const {
  if (full.size() != indicator.size()) throw DimensionMismatch("field does not match mesh");
  Vec out(size());
  for (Index i = 0; i < size(); ++i) out[i] = full[dofs[static_cast<size_t>(i)]];
  return out;
}

ControlRegion build_control_region(const PolarMesh& mesh, const Point& center, double radius,
                                   double g1_radius) {
  if (!(radius > 0.0)) throw GeometryError("G0 radius must be positive");
  if (!(g1_radius > 0.0)) throw GeometryError("G1 radius must be positive");
  if (center.norm() + radius >= mesh.R) throw GeometryError("G0 must lie strictly inside the disk");
  ControlRegion cr;
  cr.center = center;
  cr.radius = radius;
  cr.g1_radius = g1_radius;
  cr.contains_G1 = center.norm() + g1_radius < radius;
  if (!cr.contains_G1) throw GeometryError("G1 must lie strictly inside G0");
  cr.indicator = Vec::Zero(mesh.num_dofs());
  for (Index d = 0; d < mesh.num_dofs(); ++d) {
    if (!mesh.is_boundary(d) && (mesh.nodes[d] - center).norm() < radius) {
      cr.indicator[d] = 1.0;
      cr.dofs.push_back(d);
    }
  }
  if (cr.dofs.empty()) throw GeometryError("G0 contains no mesh node");
  return cr;
}

SpatialForms assemble_forms(const PolarMesh& mesh, const CoefficientSet& coeffs, double t) {
  const Index n = mesh.num_dofs();
  SpatialForms f;
  f.time = t;
  f.M = mesh.mass();

  std::vector<Triplet> s, c;
  double bmax = 0.0;
  for (Index k = 0; k < mesh.num_triangles(); ++k) {
    const auto& tri = mesh.triangles[static_cast<size_t>(k)];
    const auto& G = mesh.triangle_grad[static_cast<size_t>(k)];
    const double area = mesh.triangle_area[k];
    const Point xc = mesh.triangle_centroid(k);
    const Eigen::Matrix2d A = coeffs.A(t, xc);
    check_ellipticity(A, coeffs.beta0);
    const Eigen::Matrix3d local = area * G.transpose() * A * G;
    const Eigen::Vector2d B = coeffs.B1(t, xc);
    bmax = std::max(bmax, B.norm());
    const Eigen::RowVector3d conv = (area / 3.0) * (B.transpose() * G);
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) {
        // Average the off-diagonal pair so S is symmetric bit for bit.
        s.emplace_back(tri[a], tri[b], 0.5 * (local(a, b) + local(b, a)));
        c.emplace_back(tri[a], tri[b], conv(b));
      }
    }
  }
  const double h = mesh.edge_length;
  for (Index e = 0; e < mesh.num_boundary(); ++e) {
    const auto [a, b] = mesh.boundary_edges[static_cast<size_t>(e)];
    const Point xm = mesh.edge_midpoint(e);
    const double bs = coeffs.b_surf(t, xm);
    if (!(bs >= coeffs.beta0 * (1.0 - 1e-12)))
      throw EllipticityError("surface diffusion " + std::to_string(bs) + " below beta0");
    s.emplace_back(a, a, bs / h);
    s.emplace_back(b, b, bs / h);
    s.emplace_back(a, b, -bs / h);
    s.emplace_back(b, a, -bs / h);
    const double B2 = coeffs.B2(t, xm);
    bmax = std::max(bmax, std::abs(B2));
    for (Index row : {a, b}) {
      c.emplace_back(row, b, 0.5 * B2);
      c.emplace_back(row, a, -0.5 * B2);
    }
  }
  f.S.resize(n, n);
  f.S.setFromTriplets(s.begin(), s.end());
  f.C.resize(n, n);
  f.C.setFromTriplets(c.begin(), c.end());

  f.Rx = Vec::Zero(n);
  for (Index d = 0; d < n; ++d) {
    f.Rx[d] = mesh.w_bulk[d] * coeffs.a1(t, mesh.nodes[d]);
    if (mesh.is_boundary(d)) f.Rx[d] += mesh.w_surf[d] * coeffs.a2(t, mesh.nodes[d]);
  }

  const double dx = std::max(mesh.dr, mesh.edge_length);
  f.peclet = dx * bmax / coeffs.beta0;
  f.peclet_warning = f.peclet > 2.0;
  return f;
}

double integrate_bulk(const PolarMesh& mesh, const Vec& field) {
  if (field.size() != mesh.num_dofs()) throw DimensionMismatch("bulk field size mismatch");
  return mesh.w_bulk.dot(field);
}

double integrate_surface(const PolarMesh& mesh, const Vec& field) {
  if (field.size() != mesh.num_dofs()) throw DimensionMismatch("surface field size mismatch");
  return mesh.w_surf.dot(field);
}

Vec weak_divergence(const PolarMesh& mesh, const Vec& F) {
  if (F.size() != mesh.grad.rows()) throw DimensionMismatch("vector field size mismatch");
  return -(mesh.grad.transpose() * mesh.grad_weights.cwiseProduct(F));
}

Vec weak_surface_divergence(const PolarMesh& mesh, const Vec& F_surf) {
  if (F_surf.size() != mesh.surface_grad.rows())
    throw DimensionMismatch("surface vector field size mismatch");
  return -(mesh.surface_grad.transpose() * mesh.surface_grad_weights.cwiseProduct(F_surf));
}

}  // namespace sbc

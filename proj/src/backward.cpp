#include "sbc/backward.hpp"

#include "sbc/error.hpp"
#include "sbc/parallel.hpp"

#include <Eigen/LU>

namespace sbc {

AdaptedField terminal_field(const BinomialTree& tree, Index width) {
  return AdaptedField(width, tree.n_t());
}

Vec dual_load(const PolarMesh& mesh, const BackwardSources& src, int k, Index j) {
  Vec d = Vec::Zero(mesh.num_dofs());
  if (src.F1) d -= mesh.w_bulk.cwiseProduct(src.F1->at(k, j));
  if (src.F2) d -= mesh.w_surf.cwiseProduct(src.F2->at(k, j));
  if (src.Fvec) d -= weak_divergence(mesh, src.Fvec->at(k, j));
  if (src.Fsurf) d -= weak_surface_divergence(mesh, src.Fsurf->at(k, j));
  return d;
}

namespace {

void check_inputs(const Propagator& prop, const AdaptedField& zT, const BackwardSources& src) {
  const PolarMesh& mesh = prop.mesh();
  const int n_t = prop.n_t();
  if (zT.width() != mesh.num_dofs()) throw DimensionMismatch("terminal data width");
  if (zT.last_level() != n_t) throw DimensionMismatch("terminal data must sit on level n_t");
  auto check = [&](const std::optional<AdaptedField>& f, Index width, const char* name) {
    if (f && (f->width() != width || f->last_level() != n_t))
      throw DimensionMismatch(std::string("backward source ") + name + " shape");
  };
  check(src.F1, mesh.num_dofs(), "F1");
  check(src.F2, mesh.num_dofs(), "F2");
  check(src.Fvec, 2 * mesh.num_triangles(), "F");
  check(src.Fsurf, mesh.num_boundary(), "F_Gamma");
}

void fill_ratio(const PolarMesh& mesh, BackwardSolution& s, double dt) {
  const auto zn = mean_square_norms(mesh, s.z);
  const double terminal = zn.back();
  if (terminal == 0.0) {
    s.wellposedness_ratio = 0.0;
    return;
  }
  double sup = 0.0;
  for (double v : zn) sup = std::max(sup, v);
  const Vec wb = mesh.w_bulk;
  const Vec ws = mesh.w_surf.tail(mesh.n_theta);
  double zz = 0.0;
  for (int k = 0; k <= s.Zm.last_level(); ++k) {
    const double p = 1.0 / static_cast<double>(BinomialTree::level_size(k));
    zz += dt * p * (s.Zm.level(k).array().square().colwise() * wb.array()).sum();
    zz += dt * p * (s.Zs.level(k).array().square().colwise() * ws.array()).sum();
  }
  s.wellposedness_ratio = (sup + zz) / terminal;
}

}  // namespace

std::tuple<Vec, Vec, Vec> backward_step(const Propagator& prop, int k, const Vec& z_up,
                                        const Vec& z_down, const Vec& load_up,
                                        const Vec& load_down) {
  const PolarMesh& mesh = prop.mesh();
  const Index n = mesh.num_dofs();
  if (z_up.size() != n || z_down.size() != n) throw DimensionMismatch("child state size");
  const Vec& M = prop.forms(k).M;
  Vec ru = M.cwiseProduct(z_up);
  Vec rd = M.cwiseProduct(z_down);
  const double dt = prop.dt();
  if (load_up.size() == n) ru += dt * load_up;
  else if (load_up.size() != 0) throw DimensionMismatch("load size");
  if (load_down.size() == n) rd += dt * load_down;
  else if (load_down.size() != 0) throw DimensionMismatch("load size");
  const Vec qu = prop.solve_transposed(k, ru);
  const Vec qd = prop.solve_transposed(k, rd);
  Vec z = 0.5 * (qu + qd);
  Vec Z = (qu - qd) / (2.0 * prop.tree().sqrt_dt());
  Vec Zs = Z.tail(mesh.n_theta);
  return {std::move(z), std::move(Z), std::move(Zs)};
}

BackwardSolution backward_solve(PropagatorPtr prop, const AdaptedField& zT,
                                const BackwardSources& sources) {
  check_inputs(*prop, zT, sources);
  const PolarMesh& mesh = prop->mesh();
  const int n_t = prop->n_t();
  const Index n = mesh.num_dofs();
  BackwardSolution s{AdaptedField(n, n_t), AdaptedField(n, n_t - 1),
                     AdaptedField(mesh.num_boundary(), n_t - 1)};
  s.z.level(n_t) = zT.level(n_t);
  const bool has_src = !sources.empty();
  for (int k = n_t - 1; k >= 0; --k) {
    parallel_for(0, BinomialTree::level_size(k), [&](Index j) {
      const Index ju = BinomialTree::child(j, true), jd = BinomialTree::child(j, false);
      Vec lu, ld;
      if (has_src) {
        lu = dual_load(mesh, sources, k + 1, ju);
        ld = dual_load(mesh, sources, k + 1, jd);
      }
      auto [z, Z, Zs] = backward_step(*prop, k, s.z.at(k + 1, ju), s.z.at(k + 1, jd), lu, ld);
      s.z.at(k, j) = z;
      s.Zm.at(k, j) = Z;
      s.Zs.at(k, j) = Zs;
    });
  }
  fill_ratio(mesh, s, prop->dt());
  return s;
}

BackwardSolution oracle_backward_dense(const Propagator& prop, const AdaptedField& zT,
                                       const BackwardSources& sources) {
  check_inputs(prop, zT, sources);
  const PolarMesh& mesh = prop.mesh();
  const int n_t = prop.n_t();
  const Index n = mesh.num_dofs();
  if (n_t > 4 || n > 40) throw InvalidArgument("dense oracle limited to n_t <= 4 and n_dof <= 40");

  const BinomialTree& tree = prop.tree();
  const Index nodes = tree.num_nonleaf();
  const Index N = 2 * n * nodes;
  Mat K = Mat::Zero(N, N);
  Vec rhs = Vec::Zero(N);
  const double dt = prop.dt();
  const double sq = tree.sqrt_dt();
  auto block = [&](int k, Index j) { return 2 * n * (BinomialTree::level_offset(k) + j); };

  for (int k = 0; k < n_t; ++k) {
    const Mat At = Mat(prop.step_matrix(k)).transpose();
    const Vec& M = prop.forms(k).M;
    for (Index j = 0; j < BinomialTree::level_size(k); ++j) {
      const Index col = block(k, j);
      for (int side = 0; side < 2; ++side) {
        const bool up = side == 0;
        const Index c = BinomialTree::child(j, up);
        const Index row = col + side * n;
        // A^T (z +- sqrt(dt) Z) - M z_child = dt d_child
        K.block(row, col, n, n) = At;
        K.block(row, col + n, n, n) = (up ? sq : -sq) * At;
        Vec r = dt * dual_load(mesh, sources, k + 1, c);
        if (k + 1 == n_t) {
          r += M.cwiseProduct(zT.at(n_t, c));
        } else {
          K.block(row, block(k + 1, c), n, n).diagonal() -= M;
        }
        rhs.segment(row, n) = r;
      }
    }
  }
  const Vec x = K.partialPivLu().solve(rhs);

  BackwardSolution s{AdaptedField(n, n_t), AdaptedField(n, n_t - 1),
                     AdaptedField(mesh.num_boundary(), n_t - 1)};
  s.z.level(n_t) = zT.level(n_t);
  for (int k = 0; k < n_t; ++k) {
    for (Index j = 0; j < BinomialTree::level_size(k); ++j) {
      const Index b = block(k, j);
      s.z.at(k, j) = x.segment(b, n);
      s.Zm.at(k, j) = x.segment(b + n, n);
      s.Zs.at(k, j) = x.segment(b + n, n).tail(mesh.n_theta);
    }
  }
  fill_ratio(mesh, s, dt);
  return s;
}

}  // namespace sbc

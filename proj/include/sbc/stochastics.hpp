#pragma once

#include "sbc/error.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>

namespace sbc {

/// Binomial surrogate of the Brownian filtration on [0, T] with n_t steps.
///
/// Node (k, j) sits at level k (time k dt) with path index j in [0, 2^k).
/// Its children are (k+1, 2j) for dW = +sqrt(dt) and (k+1, 2j+1) for
/// dW = -sqrt(dt). Bit i of j (from the top) records step i's direction.
class BinomialTree {
 public:
  static constexpr int kDefaultMaxSteps = 14;

  BinomialTree(double T, int n_t, bool allow_deep = false);

  int n_t() const { return n_t_; }
  double T() const { return T_; }
  double dt() const { return dt_; }
  double sqrt_dt() const { return sqrt_dt_; }

  static Eigen::Index level_size(int k) { return Eigen::Index(1) << k; }
  static Eigen::Index level_offset(int k) { return (Eigen::Index(1) << k) - 1; }
  static Eigen::Index child(Eigen::Index j, bool up) { return 2 * j + (up ? 0 : 1); }

  Eigen::Index num_nodes() const { return level_offset(n_t_ + 1); }
  Eigen::Index num_nonleaf() const { return level_offset(n_t_); }

  /// Brownian value W at node (k, j).
  double brownian(int k, Eigen::Index j) const;

 private:
  double T_;
  int n_t_;
  double dt_;
  double sqrt_dt_;
};

/// One value vector per tree node on levels 0..last_level. A value is only
/// ever addressed through its own node, so adaptedness is a property of the
/// layout rather than something to check.
template <typename Scalar>
class AdaptedFieldT {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  AdaptedFieldT() = default;
  AdaptedFieldT(Eigen::Index width, int last_level)
      : width_(width),
        last_level_(last_level),
        data_(Matrix::Zero(width, BinomialTree::level_offset(last_level + 1))) {
    if (width < 0 || last_level < 0) throw InvalidArgument("invalid adapted field shape");
  }

  Eigen::Index width() const { return width_; }
  int last_level() const { return last_level_; }
  bool empty() const { return data_.size() == 0; }

  auto at(int k, Eigen::Index j) { return data_.col(column(k, j)); }
  auto at(int k, Eigen::Index j) const { return data_.col(column(k, j)); }

  /// All nodes of level k as columns.
  auto level(int k) {
    check_level(k);
    return data_.middleCols(BinomialTree::level_offset(k), BinomialTree::level_size(k));
  }
  auto level(int k) const {
    check_level(k);
    return data_.middleCols(BinomialTree::level_offset(k), BinomialTree::level_size(k));
  }

  const Matrix& data() const { return data_; }
  Matrix& data() { return data_; }

  void setZero() { data_.setZero(); }

 private:
  void check_level(int k) const {
    if (k < 0 || k > last_level_) throw InvalidArgument("level outside adapted field");
  }
  Eigen::Index column(int k, Eigen::Index j) const {
    check_level(k);
    if (j < 0 || j >= BinomialTree::level_size(k)) throw InvalidArgument("path index out of range");
    return BinomialTree::level_offset(k) + j;
  }

  Eigen::Index width_ = 0;
  int last_level_ = -1;
  Matrix data_;
};

using AdaptedField = AdaptedFieldT<double>;

/// E[X_{k+1} | node (k, j)] = (child+ + child-) / 2.
template <typename Scalar>
typename AdaptedFieldT<Scalar>::Vector cond_expect(const AdaptedFieldT<Scalar>& f, int k,
                                                   Eigen::Index j) {
  if (k + 1 > f.last_level()) throw InvalidArgument("conditional expectation at a leaf node");
  return Scalar(0.5) * (f.at(k + 1, BinomialTree::child(j, true)) +
                        f.at(k + 1, BinomialTree::child(j, false)));
}

/// Integrand of the one-step martingale representation: (child+ - child-) / (2 sqrt dt).
template <typename Scalar>
typename AdaptedFieldT<Scalar>::Vector martingale_part(const AdaptedFieldT<Scalar>& f,
                                                       const BinomialTree& tree, int k,
                                                       Eigen::Index j) {
  if (k + 1 > f.last_level()) throw InvalidArgument("martingale part at a leaf node");
  return (f.at(k + 1, BinomialTree::child(j, true)) -
          f.at(k + 1, BinomialTree::child(j, false))) /
         Scalar(2.0 * tree.sqrt_dt());
}

/// E[X_k] for a width-1 field: sum over level-k nodes of 2^-k * value.
template <typename Scalar>
Scalar tree_expectation(const AdaptedFieldT<Scalar>& f, int k) {
  if (f.width() != 1) throw DimensionMismatch("tree_expectation needs a scalar field");
  return f.level(k).sum() / Scalar(static_cast<double>(BinomialTree::level_size(k)));
}

/// E[X_k] for a vector field, componentwise.
template <typename Scalar>
typename AdaptedFieldT<Scalar>::Vector level_mean(const AdaptedFieldT<Scalar>& f, int k) {
  return f.level(k).rowwise().sum() / Scalar(static_cast<double>(BinomialTree::level_size(k)));
}

/// Scalar field holding W at every node of levels 0..n_t.
AdaptedField brownian_field(const BinomialTree& tree);

}  // namespace sbc

#include "sbc/stochastics.hpp"

#include "sbc/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <thread>
#include <vector>

namespace sbc {

BinomialTree::BinomialTree(double T, int n_t, bool allow_deep) : T_(T), n_t_(n_t) {
  if (!(T > 0.0)) throw InvalidArgument("T must be positive");
  if (n_t < 1) throw InvalidArgument("n_t must be at least 1");
  if (n_t > kDefaultMaxSteps && !allow_deep)
    throw InvalidArgument("n_t above " + std::to_string(kDefaultMaxSteps) +
                          " needs the deep-tree override");
  if (n_t > 40) throw InvalidArgument("n_t too large for the tree layout");
  dt_ = T / n_t;
  sqrt_dt_ = std::sqrt(dt_);
}

double BinomialTree::brownian(int k, Eigen::Index j) const {
  if (k < 0 || k > n_t_ || j < 0 || j >= level_size(k)) throw InvalidArgument("node outside tree");
  const int downs = std::popcount(static_cast<std::uint64_t>(j));
  return sqrt_dt_ * (k - 2 * downs);
}

AdaptedField brownian_field(const BinomialTree& tree) {
  AdaptedField w(1, tree.n_t());
  for (int k = 0; k <= tree.n_t(); ++k)
    for (Eigen::Index j = 0; j < BinomialTree::level_size(k); ++j) w.at(k, j)(0) = tree.brownian(k, j);
  return w;
}

namespace {
std::atomic<int> g_threads{1};
thread_local bool t_inside = false;
}

void set_num_threads(int n) { g_threads = std::max(1, n); }
int num_threads() { return g_threads; }

void parallel_for(Eigen::Index begin, Eigen::Index end,
                  const std::function<void(Eigen::Index)>& fn) {
  const Eigen::Index count = end - begin;
  const int workers = static_cast<int>(std::min<Eigen::Index>(num_threads(), count));
  // Nested regions run inline on the calling worker.
  if (workers <= 1 || t_inside) {
    for (Eigen::Index i = begin; i < end; ++i) fn(i);
    return;
  }
  std::atomic<Eigen::Index> next{begin};
  std::vector<std::thread> pool;
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      t_inside = true;
      for (Eigen::Index i = next++; i < end && !failed; i = next++) {
        try {
          fn(i);
        } catch (...) {
          if (!failed.exchange(true)) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace sbc

#pragma once

#include <Eigen/Core>

#include <functional>

namespace sbc {

/// Worker count used by level-parallel sweeps. Defaults to 1.
void set_num_threads(int n);
int num_threads();

/// Runs fn(i) for i in [begin, end). Each index is visited exactly once; the
/// caller guarantees iterations are independent.
void parallel_for(Eigen::Index begin, Eigen::Index end,
                  const std::function<void(Eigen::Index)>& fn);

}  // namespace sbc

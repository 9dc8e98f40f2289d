#pragma once
// Treatment allocation schemes.
//
// simple_randomize: iid Bernoulli(allocation) coin flips.
//
// spb_randomize: stratified permuted blocks.  Strata are the cross of a
// binary covariate with quartile bins of a continuous covariate; quartile
// cutpoints use the nearest-rank (inverted CDF) definition
//   cut(p) = x_(ceil(p m))   (1-based order statistic),
// and a value lands in the bin counting the cutpoints strictly below it.
// Within each stratum, assignments are drawn from successive random
// permutations of a balanced block (two 1s and two 0s for block size 4); a
// stratum whose size is not a multiple of the block length consumes a random
// prefix of a final balanced block, so the within-stratum imbalance never
// exceeds half a block.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "aucmcf/types.hpp"

namespace aucmcf {

inline std::vector<int> simple_randomize(int n, double allocation,
                                         std::mt19937_64& rng) {
  if (!(allocation >= 0.0 && allocation <= 1.0)) {
    throw UsageError("allocation must lie in [0, 1]");
  }
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<int> arm(n);
  for (int i = 0; i < n; ++i) arm[i] = unif(rng) < allocation ? 1 : 0;
  return arm;
}

// Nearest-rank (inverted CDF) quantile cutpoints of x at the given probs.
template <typename Scalar>
std::vector<Scalar> nearest_rank_quantiles(const Eigen::VectorX<Scalar>& x,
                                           const std::vector<double>& probs) {
  if (x.size() == 0) throw DataError("quantiles of an empty sample");
  std::vector<Scalar> sorted(x.begin(), x.end());
  std::sort(sorted.begin(), sorted.end());
  const double m = static_cast<double>(sorted.size());
  std::vector<Scalar> cuts;
  cuts.reserve(probs.size());
  for (double p : probs) {
    const auto rank = static_cast<std::ptrdiff_t>(std::ceil(p * m - 1e-9));
    cuts.push_back(sorted[std::max<std::ptrdiff_t>(rank, 1) - 1]);
  }
  return cuts;
}

template <typename Scalar>
std::vector<int> spb_randomize(const Eigen::VectorX<Scalar>& x_binary,
                               const Eigen::VectorX<Scalar>& x_cont,
                               std::mt19937_64& rng, int block = 4) {
  const int n = static_cast<int>(x_binary.size());
  if (x_cont.size() != n) throw DataError("stratification covariate length mismatch");
  if (block < 2 || block % 2 != 0) throw UsageError("block size must be even and >= 2");

  const std::vector<Scalar> cuts =
      nearest_rank_quantiles<Scalar>(x_cont, {0.25, 0.5, 0.75});

  std::vector<int> stratum(n);
  for (int i = 0; i < n; ++i) {
    const int b1 = x_binary[i] != Scalar(0) ? 1 : 0;
    const int b2 = static_cast<int>(
        std::lower_bound(cuts.begin(), cuts.end(), x_cont[i]) - cuts.begin());
    stratum[i] = b1 * 4 + b2;
  }

  // One balanced-block buffer per stratum, refilled with a fresh random
  // permutation whenever it runs dry.
  std::vector<std::vector<int>> buffer(8);
  std::vector<int> arm(n);
  std::vector<int> base(block);
  for (int k = 0; k < block; ++k) base[k] = k < block / 2 ? 1 : 0;
  for (int i = 0; i < n; ++i) {
    auto& buf = buffer[stratum[i]];
    if (buf.empty()) {
      buf = base;
      std::shuffle(buf.begin(), buf.end(), rng);
      std::reverse(buf.begin(), buf.end());  // consume from the back
    }
    arm[i] = buf.back();
    buf.pop_back();
  }
  return arm;
}

}  // namespace aucmcf

#pragma once

// Distance correlation and its circular-block permutation test.

#include "invar/error.hpp"
#include "invar/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

namespace invar {

/// Every ⌈n/cap⌉-th sample starting at 0.
template <typename Scalar>
Vector<Scalar> stride_subsample(const Eigen::Ref<const Vector<Scalar>>& x, Index cap) {
  if (cap <= 0 || x.size() <= cap) return x;
  const Index step = (x.size() + cap - 1) / cap;
  const Index m = (x.size() + step - 1) / step;
  Vector<Scalar> out(m);
  for (Index i = 0; i < m; ++i) out[i] = x[i * step];
  return out;
}

/// Double-centered pairwise distance matrix A_ij = a_ij - ā_i· - ā_·j + ā_··.
template <typename Scalar>
Matrix<Scalar> centered_distances(const Eigen::Ref<const Vector<Scalar>>& x) {
  const Index n = x.size();
  Matrix<Scalar> d(n, n);
  for (Index j = 0; j < n; ++j) {
    d.col(j) = (x.array() - x[j]).abs().matrix();
  }
  const Vector<Scalar> row_mean = d.rowwise().mean();
  const Scalar grand = row_mean.mean();
  // d is symmetric, so column means equal row means.
  d.colwise() -= row_mean;
  d.rowwise() -= row_mean.transpose();
  d.array() += grand;
  return d;
}

namespace detail {

template <typename Scalar>
void check_pair(Index na, Index nb) {
  if (na != nb) {
    throw Error(Errc::length_mismatch, "series lengths differ: " + std::to_string(na) + " vs " +
                                           std::to_string(nb));
  }
}

template <typename Scalar>
Scalar dcor_from_centered(const Matrix<Scalar>& A, const Matrix<Scalar>& B) {
  const Scalar vaa = A.cwiseProduct(A).sum();
  const Scalar vbb = B.cwiseProduct(B).sum();
  if (!(vaa > Scalar(0)) || !(vbb > Scalar(0))) return Scalar(0);
  const Scalar vab = A.cwiseProduct(B).sum();
  const Scalar r2 = vab / std::sqrt(vaa * vbb);
  return std::sqrt(std::clamp(r2, Scalar(0), Scalar(1)));
}

}  // namespace detail

/// Squared-distance-covariance based dependence in [0, 1]. Both inputs are
/// stride-subsampled to at most `subsample_cap` samples first; a constant
/// series yields 0.
template <typename Scalar>
Scalar distance_correlation(const Eigen::Ref<const Vector<Scalar>>& a,
                            const Eigen::Ref<const Vector<Scalar>>& b, Index subsample_cap = 2000) {
  detail::check_pair<Scalar>(a.size(), b.size());
  const Vector<Scalar> sa = stride_subsample<Scalar>(a, subsample_cap);
  const Vector<Scalar> sb = stride_subsample<Scalar>(b, subsample_cap);
  if (sa.size() < 4) {
    throw Error(Errc::too_short, "distance correlation needs at least 4 samples, have " +
                                     std::to_string(sa.size()));
  }
  return detail::dcor_from_centered<Scalar>(centered_distances<Scalar>(sa), centered_distances<Scalar>(sb));
}

struct PermutationConfig {
  Index subsample_cap = 2000;
  int perm_count = 200;
  Index block_len = 60;
  std::uint64_t seed = 0;
};

template <typename Scalar>
struct PermutationResult {
  Scalar statistic = 0;
  Scalar p_value = 1;
};

/// Rotates 0..n-1 by a random offset, cuts it into blocks of `block_len`
/// and shuffles the block order.
inline std::vector<Index> circular_block_permutation(Index n, Index block_len, std::mt19937_64& rng) {
  block_len = std::max<Index>(1, std::min(block_len, n));
  std::uniform_int_distribution<Index> offset_dist(0, n - 1);
  const Index offset = offset_dist(rng);
  const Index blocks = (n + block_len - 1) / block_len;
  std::vector<Index> order(static_cast<std::size_t>(blocks));
  std::iota(order.begin(), order.end(), Index{0});
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<Index> perm;
  perm.reserve(static_cast<std::size_t>(n));
  for (Index blk : order) {
    const Index start = blk * block_len;
    const Index stop = std::min(n, start + block_len);
    for (Index k = start; k < stop; ++k) perm.push_back((k + offset) % n);
  }
  return perm;
}

/// p = (1 + #{permuted dCor >= observed}) / (B + 1), permuting b in
/// circular blocks. Deterministic for a given seed.
template <typename Scalar>
PermutationResult<Scalar> permutation_test(const Eigen::Ref<const Vector<Scalar>>& a,
                                           const Eigen::Ref<const Vector<Scalar>>& b,
                                           const PermutationConfig& cfg) {
  detail::check_pair<Scalar>(a.size(), b.size());
  if (cfg.perm_count < 1) throw Error(Errc::invalid_argument, "perm_count must be positive");
  const Vector<Scalar> sa = stride_subsample<Scalar>(a, cfg.subsample_cap);
  const Vector<Scalar> sb = stride_subsample<Scalar>(b, cfg.subsample_cap);
  const Index n = sa.size();
  if (n < 4) {
    throw Error(Errc::too_short, "permutation test needs at least 4 samples, have " + std::to_string(n));
  }

  const Matrix<Scalar> A = centered_distances<Scalar>(sa);
  const Matrix<Scalar> B = centered_distances<Scalar>(sb);
  const Scalar vaa = A.cwiseProduct(A).sum();
  const Scalar vbb = B.cwiseProduct(B).sum();

  PermutationResult<Scalar> out;
  if (!(vaa > Scalar(0)) || !(vbb > Scalar(0))) {
    // Every permutation reproduces the degenerate zero statistic.
    out.statistic = 0;
    out.p_value = 1;
    return out;
  }
  const Scalar norm = std::sqrt(vaa * vbb);
  auto to_dcor = [&](Scalar vab) { return std::sqrt(std::clamp(vab / norm, Scalar(0), Scalar(1))); };

  out.statistic = to_dcor(A.cwiseProduct(B).sum());
  const Scalar tie_tol = Scalar(1e-12) * std::max(Scalar(1), out.statistic);

  std::mt19937_64 rng(cfg.seed);
  int exceed = 0;
  for (int r = 0; r < cfg.perm_count; ++r) {
    const auto perm = circular_block_permutation(n, cfg.block_len, rng);
    // Σ_ij A_ij B_{π(i)π(j)}; double-centering commutes with permutation.
    Scalar vab = 0;
    for (Index j = 0; j < n; ++j) {
      const auto bcol = B.col(perm[static_cast<std::size_t>(j)]);
      const auto acol = A.col(j);
      Scalar acc = 0;
      for (Index i = 0; i < n; ++i) acc += acol[i] * bcol[perm[static_cast<std::size_t>(i)]];
      vab += acc;
    }
    if (to_dcor(vab) >= out.statistic - tie_tol) ++exceed;
  }
  out.p_value = Scalar(1 + exceed) / Scalar(cfg.perm_count + 1);
  return out;
}

}  // namespace invar

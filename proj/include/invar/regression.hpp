#pragma once

#include "invar/dsl.hpp"
#include "invar/error.hpp"
#include "invar/timeseries.hpp"
#include "invar/types.hpp"

#include <Eigen/Eigenvalues>

#include <string>
#include <vector>

namespace invar {

/// Response and regressor matrix for one invariant over one window.
/// Columns follow the regressor order with signs folded in; the intercept
/// column of ones comes first when present.
template <typename Scalar>
struct DesignMatrix {
  Vector<Scalar> y;
  Matrix<Scalar> X;
  std::vector<Index> rows;  // original sample indices kept
  bool intercept = true;

  Index n() const noexcept { return y.size(); }
  Index columns() const noexcept { return X.cols(); }
};

template <typename Scalar>
struct FitResult {
  Vector<Scalar> coefficients;  // intercept first when present
  Scalar ssr = 0;
  Index n = 0;
  bool rank_deficient = false;
};

/// XᵀX condition numbers above this trigger the ridge fallback.
inline constexpr double kMaxCondition = 1e12;
inline constexpr double kRidgeScale = 1e-8;

/// Rows kept are those where the regressand and every regressor are valid.
/// Throws Error(too_few_valid_samples) when fewer than columns + 1 remain.
DesignMatrix<double> build_design(const Frame& frame, const dsl::Invariant& inv, SampleRange window,
                                  int smooth_w = 1);

/// Ordinary least squares through the normal equations. A near-singular
/// XᵀX gets ridge jitter λ = 1e-8·trace(XᵀX)/p and rank_deficient is set.
template <typename Scalar>
FitResult<Scalar> ols_fit(const Eigen::Ref<const Matrix<Scalar>>& X,
                          const Eigen::Ref<const Vector<Scalar>>& y) {
  const Index p = X.cols();
  if (X.rows() != y.size()) throw Error(Errc::length_mismatch, "design rows differ from response length");
  if (p == 0 || X.rows() < p + 1) {
    throw Error(Errc::too_few_valid_samples, "need at least " + std::to_string(p + 1) +
                                                 " rows for " + std::to_string(p) + " columns, have " +
                                                 std::to_string(X.rows()));
  }

  Matrix<Scalar> gram = X.transpose() * X;
  const Vector<Scalar> rhs = X.transpose() * y;

  FitResult<Scalar> fit;
  fit.n = X.rows();

  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> eig(gram, Eigen::EigenvaluesOnly);
  const Scalar lo = eig.eigenvalues().minCoeff();
  const Scalar hi = eig.eigenvalues().maxCoeff();
  if (!(lo > Scalar(0)) || hi / lo > Scalar(kMaxCondition)) {
    const Scalar trace = gram.trace();
    Scalar lambda = Scalar(kRidgeScale) * trace / Scalar(p);
    if (!(lambda > Scalar(0))) lambda = Scalar(kRidgeScale);
    gram.diagonal().array() += lambda;
    fit.rank_deficient = true;
  }

  fit.coefficients = gram.ldlt().solve(rhs);
  fit.ssr = (y - X * fit.coefficients).squaredNorm();
  return fit;
}

template <typename Scalar>
FitResult<Scalar> ols_fit(const DesignMatrix<Scalar>& design) {
  return ols_fit<Scalar>(design.X, design.y);
}

}  // namespace invar

#pragma once

#include <Eigen/Dense>

#include <cstddef>

namespace invar {

using Index = Eigen::Index;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using VectorXd = Vector<double>;
using MatrixXd = Matrix<double>;

/** Per-sample validity flags. */
using Mask = Eigen::Array<bool, Eigen::Dynamic, 1>;

/** Half-open range of sample indices [begin, end). */
struct SampleRange {
  Index begin = 0;
  Index end = 0;

  Index size() const { return end - begin; }
  bool operator==(const SampleRange&) const = default;
};

}  // namespace invar

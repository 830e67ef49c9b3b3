#include "invar/regression.hpp"

namespace invar {

DesignMatrix<double> build_design(const Frame& frame, const dsl::Invariant& inv, SampleRange window,
                                  int smooth_w) {
  if (window.begin < 0 || window.end > frame.size() || window.begin >= window.end) {
    throw Error(Errc::invalid_argument, "window outside frame");
  }

  const SeriesView response = evaluate_basis(frame, inv.regressand, smooth_w, window);
  std::vector<SeriesView> columns;
  columns.reserve(inv.regressors.size());
  Mask valid = response.valid;
  for (const auto& r : inv.regressors) {
    columns.push_back(evaluate_basis(frame, r.term, smooth_w, window));
    valid = valid && columns.back().valid;
  }

  const Index offset = inv.has_intercept ? 1 : 0;
  const Index p = static_cast<Index>(columns.size()) + offset;
  const Index n_valid = valid.count();
  if (n_valid < p + 1) {
    throw Error(Errc::too_few_valid_samples,
                "window [" + std::to_string(window.begin) + ", " + std::to_string(window.end) +
                    ") has " + std::to_string(n_valid) + " valid rows, need " + std::to_string(p + 1));
  }

  DesignMatrix<double> d;
  d.intercept = inv.has_intercept;
  d.y.resize(n_valid);
  d.X.resize(n_valid, p);
  d.rows.reserve(static_cast<std::size_t>(n_valid));
  Index row = 0;
  for (Index i = 0; i < window.size(); ++i) {
    if (!valid[i]) continue;
    d.y[row] = response.values[i];
    if (inv.has_intercept) d.X(row, 0) = 1.0;
    for (std::size_t k = 0; k < columns.size(); ++k) {
      d.X(row, static_cast<Index>(k) + offset) = inv.regressors[k].sign * columns[k].values[i];
    }
    d.rows.push_back(window.begin + i);
    ++row;
  }
  return d;
}

}  // namespace invar

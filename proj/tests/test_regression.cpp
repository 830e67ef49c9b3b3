#include <doctest.h>

#include "invar/regression.hpp"
#include "oracles.hpp"

#include <algorithm>
#include <numeric>
#include <random>

using namespace invar;

namespace {

struct System {
  MatrixXd X;
  VectorXd y;
};

System random_system(std::mt19937_64& g, Index n, Index p) {
  std::normal_distribution<double> d;
  System s{MatrixXd(n, p), VectorXd(n)};
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < p; ++j) s.X(i, j) = d(g);
    s.y[i] = d(g);
  }
  return s;
}

oracle::Ols oracle_fit(const System& s) {
  oracle::Mat x(static_cast<std::size_t>(s.X.rows()));
  std::vector<double> y(static_cast<std::size_t>(s.y.size()));
  for (Index i = 0; i < s.X.rows(); ++i) {
    for (Index j = 0; j < s.X.cols(); ++j) x[i].push_back(s.X(i, j));
    y[i] = s.y[i];
  }
  return oracle::ols(x, y);
}

}  // namespace

TEST_CASE("exact fit") {
  MatrixXd X(5, 2);
  VectorXd y(5);
  for (Index i = 0; i < 5; ++i) {
    X(i, 0) = 1.0;
    X(i, 1) = static_cast<double>(i);
    y[i] = 2.0 * static_cast<double>(i);
  }
  const auto fit = ols_fit<double>(X, y);
  CHECK(fit.coefficients[0] == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(fit.coefficients[1] == doctest::Approx(2.0));
  CHECK(fit.ssr < 1e-9);
  CHECK(fit.n == 5);
  CHECK_FALSE(fit.rank_deficient);
}

TEST_CASE("constant response against a noise regressor") {
  std::mt19937_64 g(1);
  std::normal_distribution<double> d;
  const Index n = 30;
  MatrixXd X(n, 2);
  VectorXd y = VectorXd::Constant(n, 3.5);
  for (Index i = 0; i < n; ++i) {
    X(i, 0) = 1.0;
    X(i, 1) = d(g);
  }
  // explicit 2x2 inversion
  double sx = 0, sxx = 0, sy = 0, sxy = 0;
  for (Index i = 0; i < n; ++i) {
    sx += X(i, 1);
    sxx += X(i, 1) * X(i, 1);
    sy += y[i];
    sxy += X(i, 1) * y[i];
  }
  const double det = n * sxx - sx * sx;
  const double b0 = (sxx * sy - sx * sxy) / det, b1 = (n * sxy - sx * sy) / det;
  const auto fit = ols_fit<double>(X, y);
  CHECK(fit.coefficients[0] == doctest::Approx(b0));
  CHECK(fit.coefficients[1] == doctest::Approx(b1).epsilon(1e-6));
  CHECK(fit.coefficients[0] == doctest::Approx(3.5));
  CHECK(fit.ssr < 1e-18);
}

TEST_CASE("random systems match the oracle") {
  std::mt19937_64 g(7);
  std::uniform_int_distribution<Index> pd(1, 4);
  for (int t = 0; t < 300; ++t) {
    const Index p = pd(g);
    const Index n = std::uniform_int_distribution<Index>(p + 1, 50)(g);
    const System s = random_system(g, n, p);
    const auto fit = ols_fit<double>(s.X, s.y);
    const auto ref = oracle_fit(s);
    for (Index j = 0; j < p; ++j) {
      CHECK(fit.coefficients[j] == doctest::Approx(ref.coef[j]).epsilon(1e-9));
    }
    CHECK(fit.ssr == doctest::Approx(ref.ssr).epsilon(1e-9));
    CHECK(fit.ssr == doctest::Approx((s.y - s.X * fit.coefficients).squaredNorm()).epsilon(1e-9));
  }
}

TEST_CASE("8x2 system") {
  std::mt19937_64 g(8);
  const System s = random_system(g, 8, 2);
  const auto fit = ols_fit<double>(s.X, s.y);
  const auto ref = oracle_fit(s);
  CHECK(fit.coefficients[0] == doctest::Approx(ref.coef[0]).epsilon(1e-9));
  CHECK(fit.coefficients[1] == doctest::Approx(ref.coef[1]).epsilon(1e-9));
  CHECK(fit.ssr == doctest::Approx(ref.ssr).epsilon(1e-9));
}

TEST_CASE("properties") {
  std::mt19937_64 g(9);
  for (int t = 0; t < 50; ++t) {
    const System s = random_system(g, 20, 3);
    const auto base = ols_fit<double>(s.X, s.y);

    // adding an intercept never raises SSR
    MatrixXd Xi(20, 4);
    Xi << VectorXd::Ones(20), s.X;
    CHECK(ols_fit<double>(Xi, s.y).ssr <= base.ssr + 1e-12);

    // row order does not matter
    std::vector<Index> perm(20);
    std::iota(perm.begin(), perm.end(), Index{0});
    std::shuffle(perm.begin(), perm.end(), g);
    MatrixXd Xp(20, 3);
    VectorXd yp(20);
    for (Index i = 0; i < 20; ++i) {
      Xp.row(i) = s.X.row(perm[i]);
      yp[i] = s.y[perm[i]];
    }
    const auto pf = ols_fit<double>(Xp, yp);
    CHECK(pf.ssr == doctest::Approx(base.ssr).epsilon(1e-10));
    CHECK(pf.coefficients.isApprox(base.coefficients, 1e-10));

    // column rescaling
    MatrixXd Xs = s.X;
    Xs.col(1) *= -2.5;
    const auto sf = ols_fit<double>(Xs, s.y);
    CHECK(sf.ssr == doctest::Approx(base.ssr).epsilon(1e-10));
    CHECK(sf.coefficients[1] == doctest::Approx(base.coefficients[1] / -2.5).epsilon(1e-9));
  }
}

TEST_CASE("singular design falls back to ridge") {
  MatrixXd X(10, 2);
  X.col(0).setOnes();
  X.col(1).setConstant(1.0);  // pump held off/on the whole window
  const VectorXd y = VectorXd::LinSpaced(10, 0, 1);
  const auto fit = ols_fit<double>(X, y);
  CHECK(fit.rank_deficient);
  CHECK(fit.coefficients.allFinite());
  CHECK(fit.ssr >= 0);
}

TEST_CASE("too few rows") {
  MatrixXd X(2, 2);
  X.setRandom();
  CHECK_THROWS_AS(ols_fit<double>(X, VectorXd::Zero(2)), Error);
  CHECK_THROWS_AS(ols_fit<double>(X, VectorXd::Zero(3)), Error);
}

TEST_CASE("float instantiation") {
  Matrix<float> X(6, 2);
  Vector<float> y(6);
  for (Index i = 0; i < 6; ++i) {
    X(i, 0) = 1.0f;
    X(i, 1) = static_cast<float>(i);
    y[i] = 1.0f + 0.5f * static_cast<float>(i);
  }
  const auto fit = ols_fit<float>(X, y);
  CHECK(fit.coefficients[1] == doctest::Approx(0.5f).epsilon(1e-4));
}

TEST_CASE("design matrix from an invariant") {
  Frame f(0.0, 1.0, 10);
  std::mt19937_64 g(2);
  std::normal_distribution<double> d;
  VectorXd a(10), b(10), l(10);
  for (Index i = 0; i < 10; ++i) {
    a[i] = d(g);
    b[i] = d(g);
    l[i] = d(g);
  }
  f.add_channel("LIT101", l);
  f.add_channel("FIT101", a);
  f.add_channel("FIT201", b);

  const auto inv = dsl::parse_invariant("d/dt(LIT101) = C1*FIT101 - C2*FIT201");
  const auto dm = build_design(f, inv, {0, 10});
  CHECK(dm.n() == 9);
  CHECK(dm.columns() == 3);
  CHECK(dm.rows.front() == 1);
  for (Index r = 0; r < 9; ++r) {
    const Index i = r + 1;
    CHECK(dm.y[r] == doctest::Approx(l[i] - l[i - 1]));
    CHECK(dm.X(r, 0) == 1.0);
    CHECK(dm.X(r, 1) == a[i]);
    CHECK(dm.X(r, 2) == -b[i]);
  }

  const auto prod = build_design(f, dsl::parse_invariant("LIT101 = C1*FIT101*FIT201 | no_intercept"), {2, 8});
  CHECK(prod.columns() == 1);
  for (Index r = 0; r < 6; ++r) CHECK(prod.X(r, 0) == a[r + 2] * b[r + 2]);

  Frame bad(0.0, 1.0, 5);
  bad.add_channel("X", VectorXd::Constant(5, std::nan("")));
  bad.add_channel("Y", VectorXd::Ones(5));
  try {
    build_design(bad, dsl::parse_invariant("X = C1*Y"), {0, 5});
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::too_few_valid_samples);
  }
  CHECK_THROWS_AS(build_design(f, dsl::parse_invariant("Q = C1*FIT101"), {0, 10}), Error);
}

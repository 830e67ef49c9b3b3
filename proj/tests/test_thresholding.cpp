#include <doctest.h>

#include "invar/thresholding.hpp"
#include "oracles.hpp"

#include <algorithm>
#include <random>

using namespace invar;

TEST_CASE("symmetric clusters") {
  const std::vector<double> s = {0, 0, 1, 1};
  const auto cr = kmeans2_1d(s);
  CHECK(cr.mu_hi == 1.0);
  CHECK(cr.mu_lo == 0.0);
  CHECK(cr.tau == 0.5);
  CHECK(cr.assigned_hi == std::vector<bool>{false, false, true, true});
  CHECK(cr.fraction_hi == 0.5);
}

TEST_CASE("midpoint of the reference centroids") {
  CHECK((0.578 + 0.173) / 2 == doctest::Approx(0.3755));
}

TEST_CASE("equal scores") {
  const std::vector<double> s = {0.4, 0.4, 0.4};
  const auto cr = kmeans2_1d(s);
  CHECK(cr.tau == 0.4);
  CHECK(cr.mu_hi == cr.mu_lo);
}

TEST_CASE("too few scores") {
  const std::vector<double> one = {0.3};
  CHECK_THROWS_AS(kmeans2_1d(one), Error);
  CHECK_THROWS_AS(kmeans2_records({}), Error);
}

TEST_CASE("reference score population matches the exhaustive split") {
  const std::vector<double> s = {0.786, 0.966, 0.823, 0.717, 0.602, 0.56, 0.472,
                                 0.448, 0.348, 0.21,  0.186, 0.123, 0.541, 0.453};
  const auto cr = kmeans2_1d(s);
  const auto ref = oracle::best_split(s);
  CHECK(cr.within_sse == doctest::Approx(ref.sse).epsilon(1e-12));
  CHECK(cr.tau == doctest::Approx((ref.lo + ref.hi) / 2).epsilon(1e-12));
  CHECK(cr.tau > cr.mu_lo);
  CHECK(cr.tau < cr.mu_hi);
}

TEST_CASE("Lloyd result is optimal and contiguous on random populations") {
  std::mt19937_64 g(5);
  std::uniform_real_distribution<double> u(0, 1);
  std::uniform_int_distribution<int> nd(2, 20);
  for (int t = 0; t < 300; ++t) {
    std::vector<double> s(static_cast<std::size_t>(nd(g)));
    for (auto& x : s) x = u(g);
    const auto cr = kmeans2_1d(s);
    const auto ref = oracle::best_split(s);
    CHECK(cr.within_sse == doctest::Approx(ref.sse).epsilon(1e-9));
    double min_hi = 2, max_lo = -1;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (cr.assigned_hi[i]) min_hi = std::min(min_hi, s[i]);
      else max_lo = std::max(max_lo, s[i]);
    }
    CHECK(min_hi >= max_lo);
    CHECK(cr.tau == doctest::Approx((cr.mu_hi + cr.mu_lo) / 2));

    // permutation invariance
    auto p = s;
    std::shuffle(p.begin(), p.end(), g);
    CHECK(kmeans2_1d(p).tau == doctest::Approx(cr.tau).epsilon(1e-12));
  }
}

TEST_CASE("threshold application") {
  auto mk = [](std::optional<double> v) {
    ValidationRecord r;
    r.score.value = v;
    return r;
  };
  const auto out = apply_threshold({mk(0.966), mk(std::nullopt), mk(0.376), mk(0.2)}, 0.376);
  CHECK(out[0].accepted);
  CHECK_FALSE(out[1].accepted);
  CHECK(out[2].accepted);
  CHECK_FALSE(out[3].accepted);
}

TEST_CASE("no-link records stay out of the clustering") {
  std::vector<ValidationRecord> recs(5);
  const std::optional<double> vals[] = {0.9, std::nullopt, 0.1, 0.8, std::nullopt};
  for (int i = 0; i < 5; ++i) recs[i].score.value = vals[i];
  const auto cr = kmeans2_records(recs);
  CHECK(cr.assigned_hi.size() == 3);
  CHECK(cr.mu_lo == doctest::Approx(0.1));
  CHECK(cr.mu_hi == doctest::Approx(0.85));
}

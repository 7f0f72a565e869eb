#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "did/residuals.hpp"
#include "did/rng.hpp"

using namespace did;

namespace {

ReconstructionTrace trace_of(Vec x, Vec x1, Vec x2) {
  ReconstructionTrace t;
  t.x = std::move(x);
  t.x1 = std::move(x1);
  t.x2 = std::move(x2);
  return t;
}

}  // namespace

TEST_CASE("first-order residual on hand values") {
  Vec r = first_order(Vec{0.0, 0.3}, Vec{0.8, 0.0});
  REQUIRE(r[0] == 0.8);
  REQUIRE(r[1] == 0.3);
  // symmetric in its arguments
  Vec s = first_order(Vec{0.8, 0.0}, Vec{0.0, 0.3});
  REQUIRE(s[0] == r[0]);
  REQUIRE(s[1] == r[1]);
  Vec z = first_order(Vec{1.5, -2.0}, Vec{1.5, -2.0});
  REQUIRE(z[0] == 0.0);
  REQUIRE(z[1] == 0.0);
  REQUIRE_THROWS_AS(first_order(Vec{1.0}, Vec{1.0, 2.0}), std::invalid_argument);
}

TEST_CASE("second-order residual cancels a repeated displacement") {
  // chain 0.5 -> 1.3 -> 2.1 moves by the same 0.8 both times
  Vec fake = second_order(trace_of(Vec{0.5, 0.0}, Vec{1.3, 0.0}, Vec{2.1, 0.0}));
  REQUIRE(fake[0] == 0.0);
  REQUIRE(fake[1] == 0.0);
  // off-chart start: the normal component survives the difference
  Vec real = second_order(trace_of(Vec{0.0, 0.3}, Vec{0.8, 0.0}, Vec{1.6, 0.0}));
  REQUIRE(real[0] == 0.0);
  REQUIRE(real[1] == 0.3);
  // a constant chain is trivially cancelled
  Vec cst = second_order(trace_of(Vec{2.0}, Vec{2.0}, Vec{2.0}));
  REQUIRE(cst[0] == 0.0);
}

TEST_CASE("second-order residual is bounded by the first-order residuals") {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    Vec x(6), x1(6), x2(6);
    for (std::size_t i = 0; i < 6; ++i) {
      x[i] = rng.gaussian();
      x1[i] = rng.gaussian();
      x2[i] = rng.gaussian();
    }
    ReconstructionTrace t = trace_of(x, x1, x2);
    Vec d1 = first_order(x, x1);
    Vec d1p = first_order(x1, x2);
    Vec d2 = second_order(t);
    for (std::size_t i = 0; i < 6; ++i) {
      REQUIRE(d2[i] <= d1[i]);
      REQUIRE(d2[i] >= -d1p[i]);
    }
  }
}

TEST_CASE("third-order residual cancels one more level of structure") {
  // dyadic arithmetic chain: both second-order residuals vanish exactly
  Vec arith = third_order(Vec{0.5}, Vec{1.25}, Vec{2.0}, Vec{2.75});
  REQUIRE(arith[0] == 0.0);
  Vec fixed = third_order(Vec{1.0, 2.0}, Vec{1.0, 2.0}, Vec{1.0, 2.0}, Vec{1.0, 2.0});
  REQUIRE(fixed[0] == 0.0);
  REQUIRE(fixed[1] == 0.0);
  Rng rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    Vec x(4), x1(4), x2(4), x3(4);
    for (std::size_t i = 0; i < 4; ++i) {
      x[i] = rng.gaussian();
      x1[i] = rng.gaussian();
      x2[i] = rng.gaussian();
      x3[i] = rng.gaussian();
    }
    Vec d3 = third_order(x, x1, x2, x3);
    for (double v : d3) REQUIRE(v >= 0.0);
  }
}

TEST_CASE("make_residuals carries the trace id and both residual orders") {
  ReconstructionTrace t = trace_of(Vec{0.0, 0.3}, Vec{0.8, 0.0}, Vec{1.6, 0.0});
  t.seed_id = 42;
  ResidualSet r = make_residuals(t);
  REQUIRE(r.trace_id == 42);
  REQUIRE(r.delta1[0] == 0.8);
  REQUIRE(r.delta1[1] == 0.3);
  REQUIRE(r.delta2[0] == 0.0);
  REQUIRE(r.delta2[1] == 0.3);
  REQUIRE_FALSE(r.delta3.has_value());
}

TEST_CASE("feature layout and lengths are fixed per branch") {
  REQUIRE(feature_length(Branch::Delta1) == 8);
  REQUIRE(feature_length(Branch::Delta2) == 9);
  REQUIRE(feature_length(Branch::Delta3) == 8);
  REQUIRE(feature_layout(Branch::Delta1) == "bias,mean,std,l1,max,q50,q90,q99");
  REQUIRE(feature_layout(Branch::Delta2) == "bias,mean,std,l1,max,q50,q90,q99,signed_mean");
}

TEST_CASE("summary features match an independent sort-based oracle") {
  Rng rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    std::size_t n = 3 + static_cast<std::size_t>(rng.uniform01() * 40);
    Vec v(n);
    for (double& e : v) e = 2.0 * rng.gaussian();
    FeatureVector f = summarize(v, Branch::Delta2);
    REQUIRE(f.size() == 9);

    std::vector<double> mags(n);
    double ssum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      mags[i] = std::abs(v[i]);
      ssum += v[i];
    }
    std::sort(mags.begin(), mags.end());
    double mean = 0.0;
    for (double m : mags) mean += m;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double m : mags) var += (m - mean) * (m - mean);
    var /= static_cast<double>(n);
    auto q = [&](double p) {
      double r = 1.0 + (static_cast<double>(n) - 1.0) * p;
      std::size_t lo = static_cast<std::size_t>(r) - 1;
      if (lo + 1 >= n) return mags[n - 1];
      return mags[lo] + (r - std::floor(r)) * (mags[lo + 1] - mags[lo]);
    };

    REQUIRE(f[0] == 1.0);
    REQUIRE(f[1] == Catch::Approx(mean).margin(1e-14));
    REQUIRE(f[2] == Catch::Approx(std::sqrt(var)).margin(1e-14));
    REQUIRE(f[3] == f[1]);
    REQUIRE(f[4] == mags.back());
    REQUIRE(f[5] == Catch::Approx(q(0.50)).margin(1e-14));
    REQUIRE(f[6] == Catch::Approx(q(0.90)).margin(1e-14));
    REQUIRE(f[7] == Catch::Approx(q(0.99)).margin(1e-14));
    REQUIRE(f[8] == Catch::Approx(ssum / static_cast<double>(n)).margin(1e-14));
  }
}

TEST_CASE("summary of a small residual on hand values") {
  FeatureVector f = summarize(Vec{0.0, 0.3}, Branch::Delta1);
  REQUIRE(f.size() == 8);
  REQUIRE(f[0] == 1.0);
  REQUIRE(f[1] == 0.15);
  REQUIRE(f[2] == 0.15);
  REQUIRE(f[3] == 0.15);
  REQUIRE(f[4] == 0.3);
  FeatureVector z = summarize(Vec(10, 0.0), Branch::Delta1);
  for (std::size_t i = 1; i < z.size(); ++i) REQUIRE(z[i] == 0.0);
  REQUIRE(z[0] == 1.0);
  REQUIRE_THROWS_AS(summarize(Vec{}, Branch::Delta1), std::invalid_argument);
  REQUIRE_THROWS_AS(summarize(Vec{1.0, std::nan("")}, Branch::Delta1), std::invalid_argument);
}

TEST_CASE("sorted quantile uses the linear interpolation rank rule") {
  std::vector<double> v(100);
  for (int i = 0; i < 100; ++i) v[static_cast<std::size_t>(i)] = i + 1.0;
  // rank = 1 + 99 * 0.95 = 95.05
  REQUIRE(sorted_quantile(v, 0.95) == Catch::Approx(95.05).margin(1e-12));
  REQUIRE(sorted_quantile(v, 0.0) == 1.0);
  REQUIRE(sorted_quantile(v, 1.0) == 100.0);
  REQUIRE(sorted_quantile({7.0}, 0.3) == 7.0);
  std::vector<double> flat(9, 4.2);
  REQUIRE(sorted_quantile(flat, 0.77) == 4.2);
  REQUIRE_THROWS_AS(sorted_quantile({}, 0.5), std::invalid_argument);
}

TEST_CASE("image quantization maps the value range onto full grey scale") {
  std::vector<std::uint8_t> img = quantize_to_image(Vec{0.0, 1.0}, 1, 2);
  REQUIRE(img[0] == 0);
  REQUIRE(img[1] == 255);
  // constant rasters collapse to black
  std::vector<std::uint8_t> flat = quantize_to_image(Vec(4, 3.3), 2, 2);
  for (auto p : flat) REQUIRE(p == 0);
  std::vector<std::uint8_t> zero = quantize_to_image(Vec(4, 0.0), 2, 2);
  for (auto p : zero) REQUIRE(p == 0);
  // symmetric signed range puts zero near mid-grey: 127.5 rounds half to even
  std::vector<std::uint8_t> tri = quantize_to_image(Vec{-1.0, 0.0, 1.0}, 1, 3);
  REQUIRE(tri[0] == 0);
  REQUIRE(tri[1] == 128);
  REQUIRE(tri[2] == 255);
  REQUIRE_THROWS_AS(quantize_to_image(Vec{1.0, 2.0, 3.0}, 2, 2), std::invalid_argument);
  REQUIRE_THROWS_AS(quantize_to_image(Vec{1.0, std::nan("")}, 1, 2), std::invalid_argument);
}

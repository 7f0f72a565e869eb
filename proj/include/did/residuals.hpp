#pragma once

// Reconstruction residuals and their fixed summary features. The first-order
// residual is the elementwise reconstruction error; the second-order residual
// subtracts the error of the next reconstruction step, cancelling any
// perturbation that repeats along the chain; the third-order residual
// iterates once more. Delta2 is kept signed through the numeric pipeline and
// only image emission compresses it.

#include <algorithm>
#include <cfenv>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "did/linalg.hpp"
#include "did/reconstruction.hpp"

namespace did {

inline Vec first_order(const Vec& x, const Vec& x1) {
  check_dim(x1.size(), x.size(), "first_order");
  Vec r(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) r[i] = std::abs(x[i] - x1[i]);
  return r;
}

inline Vec second_order(const ReconstructionTrace& t) {
  Vec a = first_order(t.x, t.x1);
  Vec b = first_order(t.x1, t.x2);
  for (std::size_t i = 0; i < a.size(); ++i) a[i] -= b[i];
  return a;
}

// Needs the chain extended by one more reconstruction x3 = R(x2):
// |d2(x) - d2(x')| where d2(x') is computed from (x1, x2, x3).
inline Vec third_order(const Vec& x, const Vec& x1, const Vec& x2, const Vec& x3) {
  ReconstructionTrace head{x, x1, x2, {}, 0};
  ReconstructionTrace tail{x1, x2, x3, {}, 0};
  Vec a = second_order(head);
  Vec b = second_order(tail);
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = std::abs(a[i] - b[i]);
  return a;
}

struct ResidualSet {
  Vec delta1;
  Vec delta2;
  std::optional<Vec> delta3;
  std::uint64_t trace_id = 0;
};

inline ResidualSet make_residuals(const ReconstructionTrace& t) {
  ResidualSet r;
  r.delta1 = first_order(t.x, t.x1);
  r.delta2 = second_order(t);
  r.trace_id = t.seed_id;
  return r;
}

enum class Branch { Delta1, Delta2, Delta3 };

using FeatureVector = std::vector<double>;

// Feature length is fixed per branch: 8 slots, plus the signed mean for the
// Delta2 branch whose residual is the only signed one.
inline std::size_t feature_length(Branch b) { return b == Branch::Delta2 ? 9 : 8; }

// Slot names in summarize() order; serialized alongside ensemble weights.
inline std::string feature_layout(Branch b) {
  std::string names = "bias,mean,std,l1,max,q50,q90,q99";
  if (b == Branch::Delta2) names += ",signed_mean";
  return names;
}

// Linear-interpolated quantile of a sorted vector at rank 1 + (n-1) * p.
inline double sorted_quantile(const std::vector<double>& sorted, double p) {
  std::size_t n = sorted.size();
  if (n == 0) throw std::invalid_argument("sorted_quantile: empty input");
  double r = 1.0 + (static_cast<double>(n) - 1.0) * p;
  std::size_t lo = static_cast<std::size_t>(r) - 1;
  if (lo + 1 >= n) return sorted[n - 1];
  double frac = r - std::floor(r);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

// Order-statistics summary over |residual|: invariant to coordinate
// permutation, matching the isotropy of the synthetic model. Layout:
// [bias=1, mean, std, L1-mean, max, q50, q90, q99] (+ signed mean, Delta2).
inline FeatureVector summarize(const Vec& residual, Branch branch) {
  if (residual.empty()) throw std::invalid_argument("summarize: empty residual");
  std::size_t n = residual.size();
  std::vector<double> mags(n);
  double signed_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(residual[i])) throw std::invalid_argument("summarize: non-finite entry");
    mags[i] = std::abs(residual[i]);
    signed_sum += residual[i];
  }
  double mean = 0.0;
  for (double v : mags) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : mags) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n);
  std::sort(mags.begin(), mags.end());
  FeatureVector f;
  f.reserve(feature_length(branch));
  f.push_back(1.0);
  f.push_back(mean);
  f.push_back(std::sqrt(var));
  f.push_back(mean);  // L1-mean of the magnitudes coincides with their mean
  f.push_back(mags.back());
  f.push_back(sorted_quantile(mags, 0.50));
  f.push_back(sorted_quantile(mags, 0.90));
  f.push_back(sorted_quantile(mags, 0.99));
  if (branch == Branch::Delta2) f.push_back(signed_sum / static_cast<double>(n));
  return f;
}

// Affine map of [min, max] onto [0, 255], rounded half to even; a constant
// residual maps to all zeros.
inline std::vector<std::uint8_t> quantize_to_image(const Vec& residual, std::size_t rows,
                                                   std::size_t cols) {
  if (rows * cols != residual.size())
    throw std::invalid_argument("quantize_to_image: shape does not match residual length");
  double lo = residual[0], hi = residual[0];
  for (double v : residual) {
    if (!std::isfinite(v)) throw std::invalid_argument("quantize_to_image: non-finite entry");
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  std::vector<std::uint8_t> img(residual.size(), 0);
  double range = hi - lo;
  if (range <= 0.0) return img;
  for (std::size_t i = 0; i < residual.size(); ++i) {
    double scaled = (residual[i] - lo) / range * 255.0;
    // nearbyint under the default rounding mode gives round-half-to-even
    img[i] = static_cast<std::uint8_t>(std::nearbyint(scaled));
  }
  return img;
}

}  // namespace did

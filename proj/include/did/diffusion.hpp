#pragma once

// Toy DDIM with an exact Gaussian-mixture score. The noise predictor is the
// closed-form posterior expectation under the mixture, so inversion and
// sampling are deterministic and admit independent analytic oracles.

#include <cmath>
#include <stdexcept>
#include <vector>

#include "did/linalg.hpp"
#include "did/manifold.hpp"

namespace did {

struct DiffusionSchedule {
  int steps = 0;                 // T
  std::vector<double> alpha;     // per-step alpha_t, index t-1
  std::vector<double> alpha_bar; // cumulative product, strictly decreasing
  double eta = 0.0;              // kept at 0: deterministic sampling

  // alpha_bar(0) = 1 by convention.
  double abar(int t) const {
    if (t < 0 || t > steps) throw std::invalid_argument("abar: t out of range");
    return t == 0 ? 1.0 : alpha_bar[static_cast<std::size_t>(t) - 1];
  }
};

// Linear beta schedule over 1000 base steps rescaled to T steps: step j of
// the coarse schedule reuses the cumulative product of base step
// round((j+1) * 1000 / T).
inline DiffusionSchedule make_linear_schedule(int steps) {
  if (steps < 1 || steps > 1000)
    throw std::invalid_argument("make_linear_schedule: need 1 <= T <= 1000");
  constexpr int base = 1000;
  constexpr double beta_lo = 1e-4, beta_hi = 0.02;
  std::vector<double> abar_base(base);
  double prod = 1.0;
  for (int i = 0; i < base; ++i) {
    double beta = beta_lo + (beta_hi - beta_lo) * static_cast<double>(i) / (base - 1);
    prod *= 1.0 - beta;
    abar_base[i] = prod;
  }
  DiffusionSchedule s;
  s.steps = steps;
  s.alpha_bar.resize(steps);
  s.alpha.resize(steps);
  double prev = 1.0;
  for (int j = 0; j < steps; ++j) {
    int sel = static_cast<int>(std::lround(static_cast<double>(j + 1) * base / steps)) - 1;
    s.alpha_bar[j] = abar_base[sel];
    s.alpha[j] = s.alpha_bar[j] / prev;
    prev = s.alpha_bar[j];
  }
  return s;
}

struct GmmScoreModel {
  std::vector<double> weights;
  std::vector<Vec> means;
  double sigma0 = 1.0;  // shared isotropic component std
};

inline GmmScoreModel make_gmm(std::vector<double> weights, std::vector<Vec> means,
                              double sigma0) {
  if (weights.empty() || weights.size() != means.size())
    throw std::invalid_argument("make_gmm: need matching nonempty weights and means");
  double total = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw std::invalid_argument("make_gmm: negative weight");
    total += w;
  }
  if (total <= 0.0) throw std::invalid_argument("make_gmm: weights sum to zero");
  for (double& w : weights) w /= total;
  std::size_t d = means[0].size();
  for (const Vec& m : means) check_dim(m.size(), d, "make_gmm means");
  return GmmScoreModel{std::move(weights), std::move(means), sigma0};
}

// Exact noise prediction -sqrt(1-abar_t) * grad log p_t(x_t) for the
// marginal sum_k w_k N(sqrt(abar_t) mu_k, (abar_t sigma0^2 + 1 - abar_t) I).
// Responsibilities are computed with log-sum-exp stabilization.
inline Vec exact_eps(const GmmScoreModel& gmm, const DiffusionSchedule& sched, const Vec& x_t,
                     int t) {
  if (t < 1 || t > sched.steps) throw std::invalid_argument("exact_eps: t out of range");
  double ab = sched.abar(t);
  double sq_ab = std::sqrt(ab);
  double var = ab * gmm.sigma0 * gmm.sigma0 + 1.0 - ab;
  std::size_t kk = gmm.weights.size();
  std::vector<double> loglik(kk);
  double best = -1e300;
  for (std::size_t k = 0; k < kk; ++k) {
    Vec diff = x_t;
    axpy(-sq_ab, gmm.means[k], diff);
    loglik[k] = std::log(gmm.weights[k]) - 0.5 * norm2(diff) / var;
    best = std::max(best, loglik[k]);
  }
  double denom = 0.0;
  for (double& l : loglik) {
    l = std::exp(l - best);
    denom += l;
  }
  Vec posterior_mean(x_t.size(), 0.0);
  for (std::size_t k = 0; k < kk; ++k)
    axpy(sq_ab * loglik[k] / denom, gmm.means[k], posterior_mean);
  Vec eps = sub(x_t, posterior_mean);
  return scale(std::move(eps), std::sqrt(1.0 - ab) / var);
}

enum class StepDirection { Reverse, Invert };

// Deterministic DDIM update (eta = 0). Reverse maps level t to t-1. Invert
// maps level t-1 to t, evaluating the noise prediction at the current state
// with the target index (first-order inversion).
template <class EpsFn>
Vec ddim_step(const DiffusionSchedule& sched, EpsFn&& eps_fn, const Vec& x, int t,
              StepDirection dir) {
  if (t < 1 || t > sched.steps) throw std::invalid_argument("ddim_step: t out of range");
  double ab_hi = sched.abar(t);
  double ab_lo = sched.abar(t - 1);
  if (ab_hi <= 0.0 || ab_lo <= 0.0) throw std::invalid_argument("ddim_step: abar must be positive");
  double ab_from = (dir == StepDirection::Reverse) ? ab_hi : ab_lo;
  double ab_to = (dir == StepDirection::Reverse) ? ab_lo : ab_hi;
  Vec eps = eps_fn(x, t);
  check_dim(eps.size(), x.size(), "ddim_step eps");
  Vec x0 = x;
  axpy(-std::sqrt(1.0 - ab_from), eps, x0);
  x0 = scale(std::move(x0), 1.0 / std::sqrt(ab_from));
  Vec out = scale(std::move(x0), std::sqrt(ab_to));
  axpy(std::sqrt(1.0 - ab_to), eps, out);
  return out;
}

// Invert x through t = 1..T, then sample back down t = T..1. Deterministic;
// repeated calls are bit-identical.
inline Vec reconstruct_ddim(const GmmScoreModel& gmm, const DiffusionSchedule& sched,
                            const Vec& x) {
  auto eps_fn = [&](const Vec& y, int t) { return exact_eps(gmm, sched, y, t); };
  Vec cur = x;
  for (int t = 1; t <= sched.steps; ++t) cur = ddim_step(sched, eps_fn, cur, t, StepDirection::Invert);
  for (int t = sched.steps; t >= 1; --t) cur = ddim_step(sched, eps_fn, cur, t, StepDirection::Reverse);
  return cur;
}

// Support chart of a mixture, for distance-to-manifold diagnostics.
inline ManifoldModel mixture_support(const GmmScoreModel& gmm) {
  return manifold_from_points(gmm.means, ManifoldKind::GaussianMixtureSupport);
}

}  // namespace did

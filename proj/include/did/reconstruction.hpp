#pragma once

// The analytic reconstruction operator: projection onto the chart plus a
// structured perturbation. The bias part is a deterministic function of the
// projected point, so consecutive reconstructions of nearby points receive
// nearly identical bias; fresh noise (tau) degrades that correlation and a
// normal leak (lambda) breaks the on-chart guarantee. Both default to zero.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "did/manifold.hpp"

namespace did {

enum class BiasKind { Constant, Sinusoidal };

struct PerturbationModel {
  BiasKind bias_kind = BiasKind::Constant;
  double bias_norm = 1.0;         // beta; ||f|| for Constant, RMS ||f|| for Sinusoidal
  double fresh_noise_scale = 0.0; // tau, per-coordinate std of tangent noise
  double normal_leak = 0.0;       // lambda, per-coordinate std of complement noise
  double frequency = 1.0;         // omega, carrier frequency of the sinusoidal field
  std::vector<double> phases;     // per-bias-coordinate phases (sinusoidal only)
};

inline PerturbationModel make_constant_perturbation(double beta, double tau = 0.0,
                                                    double lambda = 0.0) {
  if (tau < 0.0 || lambda < 0.0)
    throw std::invalid_argument("perturbation: noise scales must be nonnegative");
  PerturbationModel p;
  p.bias_kind = BiasKind::Constant;
  p.bias_norm = beta;
  p.fresh_noise_scale = tau;
  p.normal_leak = lambda;
  return p;
}

// Sinusoidal field over tangent coordinates. The first half of the tangent
// coordinates carry the bias; each is driven by one of the remaining
// (carrier) coordinates through a seeded phase. Amplitudes are normalized so
// the root-mean-square field norm equals beta. Because the carriers are not
// themselves biased, the field is smooth along a reconstruction chain and
// the second-order difference cancels it.
inline PerturbationModel make_sinusoidal_perturbation(std::size_t chart_dim, double beta,
                                                      double tau, double lambda,
                                                      double omega, std::uint64_t seed) {
  if (chart_dim < 2)
    throw std::invalid_argument("sinusoidal perturbation: chart_dim must be at least 2");
  if (tau < 0.0 || lambda < 0.0)
    throw std::invalid_argument("perturbation: noise scales must be nonnegative");
  PerturbationModel p;
  p.bias_kind = BiasKind::Sinusoidal;
  p.bias_norm = beta;
  p.fresh_noise_scale = tau;
  p.normal_leak = lambda;
  p.frequency = omega;
  Rng rng(seed);
  std::size_t nb = chart_dim / 2;
  p.phases.resize(nb);
  for (double& ph : p.phases) ph = rng.uniform01() * 2.0 * kPi;
  return p;
}

// f evaluated at an on-chart point; the output lies in span(U) by
// construction.
inline Vec bias_field(const ManifoldModel& m, const PerturbationModel& pert, const Vec& p) {
  std::size_t k = m.chart_dim();
  Vec coeff(k, 0.0);
  if (pert.bias_kind == BiasKind::Constant) {
    coeff[0] = pert.bias_norm;
  } else {
    std::size_t nb = pert.phases.size();
    std::size_t nc = k - nb;
    if (nb == 0 || nc == 0)
      throw std::invalid_argument("bias_field: sinusoidal model does not fit chart");
    Vec t = tangent_coords(m, p);
    double amp = pert.bias_norm * std::sqrt(2.0 / static_cast<double>(nb));
    for (std::size_t j = 0; j < nb; ++j)
      coeff[j] = amp * std::sin(pert.frequency * t[nb + (j % nc)] + pert.phases[j]);
  }
  return matvec(m.chart_basis, coeff);
}

inline Vec reconstruct_analytic(const ManifoldModel& m, const PerturbationModel& pert,
                                const Vec& x, Rng& rng) {
  Vec p = project(m, x);
  Vec out = p;
  axpy(1.0, bias_field(m, pert, p), out);
  if (pert.fresh_noise_scale > 0.0) {
    Vec xi(m.chart_dim());
    for (double& v : xi) v = rng.gaussian();
    axpy(pert.fresh_noise_scale, matvec(m.chart_basis, xi), out);
  }
  if (pert.normal_leak > 0.0) {
    Vec eta(m.normal_dim());
    for (double& v : eta) v = rng.gaussian();
    axpy(pert.normal_leak, matvec(m.complement, eta), out);
  }
  return out;
}

struct ReconstructionTrace {
  Vec x;   // input
  Vec x1;  // R(x)
  Vec x2;  // R(R(x))
  std::string operator_id;
  std::uint64_t seed_id = 0;
};

template <class Op>
ReconstructionTrace reconstruct_twice(Op&& op, const Vec& x, std::string operator_id = {},
                                      std::uint64_t seed_id = 0) {
  ReconstructionTrace t;
  t.x = x;
  t.x1 = op(t.x);
  t.x2 = op(t.x1);
  check_dim(t.x1.size(), x.size(), "reconstruct_twice x1");
  check_dim(t.x2.size(), x.size(), "reconstruct_twice x2");
  t.operator_id = std::move(operator_id);
  t.seed_id = seed_id;
  return t;
}

}  // namespace did

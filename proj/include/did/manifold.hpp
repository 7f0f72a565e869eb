#pragma once

// The synthetic generative manifold: an affine chart mu + span(U) in R^d.
// Fake samples live on the chart; real samples sit at a controlled distance
// s from it along a normal direction.

#include <cstdint>
#include <stdexcept>
#include <utility>

#include "did/linalg.hpp"
#include "did/rng.hpp"

namespace did {

enum class Label { Real, Fake };

enum class ManifoldKind { AffineSubspace, GaussianMixtureSupport };

enum class NormalDirection { FirstBasis, Isotropic };

struct ManifoldModel {
  std::size_t ambient_dim = 0;
  Matrix chart_basis;  // d x k, orthonormal columns spanning the tangent space
  Matrix complement;   // d x (d-k), orthonormal basis of the normal space
  Vec offset;          // mu
  ManifoldKind kind = ManifoldKind::AffineSubspace;

  std::size_t chart_dim() const { return chart_basis.cols; }
  std::size_t normal_dim() const { return complement.cols; }
};

struct LabeledSample {
  Vec point;
  Label label = Label::Fake;
  double signal = 0.0;  // ||x - proj(x)|| recorded at generation time
  std::uint64_t seed_id = 0;
};

namespace detail {

// Completes U to a full orthonormal frame and returns the trailing columns.
inline Matrix complement_of(const Matrix& u) {
  std::size_t d = u.rows, k = u.cols;
  // Candidate columns: U then the whole standard basis; MGS drops the d
  // candidates that fall inside the span already collected.
  Matrix full(d, k + d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < k; ++j) full(i, j) = u(i, j);
  for (std::size_t e = 0; e < d; ++e) full(e, k + e) = 1.0;
  Matrix q = orthonormalize(full);
  if (q.cols != d) throw std::runtime_error("complement_of: failed to complete basis");
  return columns(q, k, d - k);
}

}  // namespace detail

inline ManifoldModel make_manifold(Matrix chart_basis, Vec offset,
                                   ManifoldKind kind = ManifoldKind::AffineSubspace) {
  std::size_t d = chart_basis.rows, k = chart_basis.cols;
  if (k < 1 || k >= d) throw std::invalid_argument("make_manifold: need 1 <= k < d");
  check_dim(offset.size(), d, "make_manifold offset");
  if (orthonormality_defect(chart_basis) > 1e-12)
    throw std::invalid_argument("make_manifold: chart basis not orthonormal");
  ManifoldModel m;
  m.ambient_dim = d;
  m.complement = detail::complement_of(chart_basis);
  m.chart_basis = std::move(chart_basis);
  m.offset = std::move(offset);
  m.kind = kind;
  return m;
}

// Axis-aligned chart: U = leading k standard basis vectors, mu = 0. The
// coordinate split is exact in floating point, which the cancellation
// identities rely on.
inline ManifoldModel make_axis_manifold(std::size_t d, std::size_t k) {
  if (k < 1 || k >= d) throw std::invalid_argument("make_axis_manifold: need 1 <= k < d");
  ManifoldModel m;
  m.ambient_dim = d;
  m.chart_basis = columns(Matrix::identity(d), 0, k);
  m.complement = columns(Matrix::identity(d), k, d - k);
  m.offset = Vec(d, 0.0);
  return m;
}

// Chart rotated by a seeded random orthogonal frame, mu = 0.
inline ManifoldModel make_rotated_manifold(std::size_t d, std::size_t k, std::uint64_t seed) {
  if (k < 1 || k >= d) throw std::invalid_argument("make_rotated_manifold: need 1 <= k < d");
  Rng rng(seed);
  Matrix q = random_orthogonal(d, rng);
  ManifoldModel m;
  m.ambient_dim = d;
  m.chart_basis = columns(q, 0, k);
  m.complement = columns(q, k, d - k);
  m.offset = Vec(d, 0.0);
  return m;
}

// Affine hull of a point set, e.g. the means of a score mixture. The chart
// then certifies that diffusion reconstructions move toward the support.
inline ManifoldModel manifold_from_points(const std::vector<Vec>& points,
                                          ManifoldKind kind = ManifoldKind::GaussianMixtureSupport) {
  if (points.empty()) throw std::invalid_argument("manifold_from_points: empty set");
  std::size_t d = points[0].size();
  Vec centroid(d, 0.0);
  for (const Vec& p : points) {
    check_dim(p.size(), d, "manifold_from_points");
    axpy(1.0, p, centroid);
  }
  centroid = scale(std::move(centroid), 1.0 / static_cast<double>(points.size()));
  Matrix span(d, points.size());
  for (std::size_t j = 0; j < points.size(); ++j)
    for (std::size_t i = 0; i < d; ++i) span(i, j) = points[j][i] - centroid[i];
  Matrix basis = orthonormalize(span);
  if (basis.cols < 1 || basis.cols >= d)
    throw std::invalid_argument("manifold_from_points: hull rank must satisfy 1 <= k < d");
  return make_manifold(std::move(basis), std::move(centroid), kind);
}

inline Vec project(const ManifoldModel& m, const Vec& x) {
  check_dim(x.size(), m.ambient_dim, "project");
  Vec centered = sub(x, m.offset);
  Vec t = tmatvec(m.chart_basis, centered);
  Vec y = m.offset;
  axpy(1.0, matvec(m.chart_basis, t), y);
  return y;
}

inline double distance_to_manifold(const ManifoldModel& m, const Vec& x) {
  return norm(sub(x, project(m, x)));
}

// Tangent coordinates of x relative to the chart.
inline Vec tangent_coords(const ManifoldModel& m, const Vec& x) {
  return tmatvec(m.chart_basis, sub(x, m.offset));
}

inline LabeledSample sample_fake(const ManifoldModel& m, Rng& rng) {
  Vec z(m.chart_dim());
  for (double& v : z) v = rng.gaussian();
  LabeledSample s;
  s.point = m.offset;
  axpy(1.0, matvec(m.chart_basis, z), s.point);
  s.label = Label::Fake;
  s.signal = 0.0;
  return s;
}

inline LabeledSample sample_real(const ManifoldModel& m, double signal, Rng& rng,
                                 NormalDirection dir = NormalDirection::FirstBasis) {
  if (signal < 0.0) throw std::invalid_argument("sample_real: signal must be nonnegative");
  LabeledSample s = sample_fake(m, rng);
  Vec v;
  if (dir == NormalDirection::FirstBasis) {
    v = column(m.complement, 0);
  } else {
    Vec g(m.normal_dim());
    for (double& c : g) c = rng.gaussian();
    double n = norm(g);
    while (n < 1e-12) {  // astronomically unlikely; keep the draw well defined
      for (double& c : g) c = rng.gaussian();
      n = norm(g);
    }
    v = matvec(m.complement, scale(std::move(g), 1.0 / n));
  }
  axpy(signal, v, s.point);
  s.label = Label::Real;
  s.signal = signal;
  return s;
}

}  // namespace did

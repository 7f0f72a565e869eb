#pragma once

// Binary detection metrics with the fake class as positive throughout.
// AUROC uses midranks so ties count one half; FPR@TPR sweeps thresholds at
// the observed score values plus the two infinities, with "fake when
// score >= threshold" as the decision rule.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "did/manifold.hpp"

namespace did {

struct Confusion {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;
};

struct EvalReport {
  double accuracy = 0.0;
  double auroc = 0.0;
  double fpr_at_tpr95 = 0.0;
  Confusion counts;
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
};

inline Confusion confusion(const std::vector<Label>& decisions,
                           const std::vector<Label>& labels) {
  check_dim(decisions.size(), labels.size(), "confusion");
  if (labels.empty()) throw std::invalid_argument("confusion: empty input");
  Confusion c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    bool truth_fake = labels[i] == Label::Fake;
    bool called_fake = decisions[i] == Label::Fake;
    if (truth_fake && called_fake) ++c.tp;
    if (!truth_fake && called_fake) ++c.fp;
    if (!truth_fake && !called_fake) ++c.tn;
    if (truth_fake && !called_fake) ++c.fn;
  }
  return c;
}

inline double accuracy(const std::vector<Label>& decisions,
                       const std::vector<Label>& labels) {
  Confusion c = confusion(decisions, labels);
  return static_cast<double>(c.tp + c.tn) / static_cast<double>(labels.size());
}

// Probability a random fake outscores a random real, ties at one half,
// computed from midranks in O(n log n).
inline double auroc(const std::vector<double>& scores,
                    const std::vector<Label>& labels) {
  check_dim(scores.size(), labels.size(), "auroc");
  std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum_fake = 0.0;
  std::size_t n_fake = 0, n_real = 0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    double midrank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
    for (std::size_t t = i; t < j; ++t) {
      if (labels[order[t]] == Label::Fake) {
        rank_sum_fake += midrank;
        ++n_fake;
      } else {
        ++n_real;
      }
    }
    i = j;
  }
  if (n_fake == 0 || n_real == 0)
    throw std::runtime_error("auroc: undefined, both classes required");
  double nf = static_cast<double>(n_fake);
  return (rank_sum_fake - nf * (nf + 1.0) / 2.0) / (nf * static_cast<double>(n_real));
}

// Minimal FPR over thresholds reaching TPR >= target. TPR and FPR both fall
// as the threshold rises, so the answer sits at the highest admissible
// threshold in a single descending sweep.
inline double fpr_at_tpr(const std::vector<double>& scores,
                         const std::vector<Label>& labels, double tpr_target = 0.95) {
  check_dim(scores.size(), labels.size(), "fpr_at_tpr");
  if (!(tpr_target >= 0.0 && tpr_target <= 1.0))
    throw std::invalid_argument("fpr_at_tpr: target outside [0,1]");
  std::size_t n = scores.size();
  std::size_t n_fake = 0, n_real = 0;
  for (Label l : labels) (l == Label::Fake ? n_fake : n_real)++;
  if (n_fake == 0 || n_real == 0)
    throw std::runtime_error("fpr_at_tpr: undefined, both classes required");

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  // threshold +inf: nothing called fake
  if (tpr_target == 0.0) return 0.0;

  std::size_t tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    for (std::size_t t = i; t < j; ++t)
      (labels[order[t]] == Label::Fake ? tp : fp)++;
    double tpr = static_cast<double>(tp) / static_cast<double>(n_fake);
    if (tpr >= tpr_target)
      return static_cast<double>(fp) / static_cast<double>(n_real);
    i = j;
  }
  return 1.0;  // threshold -inf: everything called fake
}

}  // namespace did

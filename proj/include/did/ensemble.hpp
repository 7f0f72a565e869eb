#pragma once

// Dual-branch detector: one classifier per residual order, a shared score
// threshold, and a fusion rule. Scores are fake-probabilities; a sample is
// real when it scores below the threshold. AndReal and MaxScore at the same
// threshold are the same decision function (max(p1,p2) < c iff both < c);
// they differ only in which value the calibration rules assign.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "did/classifier.hpp"
#include "did/manifold.hpp"
#include "did/residuals.hpp"
#include "did/textio.hpp"

namespace did {

enum class Fusion { AndReal, AndFake, MaxScore };

inline std::string fusion_name(Fusion f) {
  switch (f) {
    case Fusion::AndReal: return "and_real";
    case Fusion::AndFake: return "and_fake";
    case Fusion::MaxScore: return "max_score";
  }
  throw std::logic_error("fusion_name: bad enum");
}

inline Fusion fusion_from_name(const std::string& name) {
  if (name == "and_real") return Fusion::AndReal;
  if (name == "and_fake") return Fusion::AndFake;
  if (name == "max_score") return Fusion::MaxScore;
  throw std::invalid_argument("fusion_from_name: unknown fusion '" + name + "'");
}

// Fake-probabilities from the two branches.
struct ScorePair {
  double p1 = 0.0;
  double p2 = 0.0;
};

struct DetectorEnsemble {
  LogisticClassifier clf_delta1;
  LogisticClassifier clf_delta2;
  double threshold = 0.29289321881345254;  // analytic_threshold(0.5)
  Fusion fusion = Fusion::AndReal;
};

inline ScorePair score_sample(const DetectorEnsemble& ens, const ResidualSet& rs) {
  ScorePair s;
  s.p1 = predict(ens.clf_delta1, summarize(rs.delta1, Branch::Delta1));
  s.p2 = predict(ens.clf_delta2, summarize(rs.delta2, Branch::Delta2));
  return s;
}

inline Label decide(const DetectorEnsemble& ens, const ScorePair& s) {
  double c = ens.threshold;
  if (!(c > 0.0 && c < 1.0))
    throw std::invalid_argument("decide: threshold outside (0,1)");
  switch (ens.fusion) {
    case Fusion::AndReal:
      return (s.p1 < c && s.p2 < c) ? Label::Real : Label::Fake;
    case Fusion::AndFake:
      return (s.p1 >= c && s.p2 >= c) ? Label::Fake : Label::Real;
    case Fusion::MaxScore:
      return std::max(s.p1, s.p2) < c ? Label::Real : Label::Fake;
  }
  throw std::logic_error("decide: bad fusion enum");
}

// Per-branch threshold making the AndReal accept rate on independent uniform
// null scores equal 1 - target: P(both < c) = c^2 and c = 1 - sqrt(1-target)
// gives (1-sqrt(1-target))^2. For target 0.5 this returns 1 - sqrt(0.5),
// the standard printed value for dual-branch gating; the exact-FPR solution
// sqrt(1-target) is available by calling with 1-target and taking 1-result.
inline double analytic_threshold(double target) {
  if (!(target > 0.0 && target < 1.0))
    throw std::invalid_argument("analytic_threshold: target outside (0,1)");
  return 1.0 - std::sqrt(1.0 - target);
}

// Linear-interpolated order-statistic percentile of the real-class training
// scores; samples scoring above it are declared fake.
inline double percentile_threshold(std::vector<double> real_scores,
                                   double percentile = 95.0) {
  if (real_scores.empty())
    throw std::invalid_argument("percentile_threshold: empty scores");
  if (!(percentile >= 0.0 && percentile <= 100.0))
    throw std::invalid_argument("percentile_threshold: percentile outside [0,100]");
  std::sort(real_scores.begin(), real_scores.end());
  return sorted_quantile(real_scores, percentile / 100.0);
}

// Flat text format, version 1: fusion, threshold, then per branch a header
// line "branch <name> <comma-separated feature layout>" followed by one
// weight per line.
inline std::string ensemble_to_text(const DetectorEnsemble& ens) {
  std::string out = "did-ensemble 1\n";
  out += "fusion " + fusion_name(ens.fusion) + "\n";
  out += "threshold " + format_double(ens.threshold) + "\n";
  out += "branch delta1 " + feature_layout(Branch::Delta1) + "\n";
  for (double w : ens.clf_delta1.weights) out += format_double(w) + "\n";
  out += "branch delta2 " + feature_layout(Branch::Delta2) + "\n";
  for (double w : ens.clf_delta2.weights) out += format_double(w) + "\n";
  return out;
}

inline DetectorEnsemble ensemble_from_text(const std::string& text) {
  std::vector<std::string> lines = split(text, '\n');
  std::size_t pos = 0;
  auto next_line = [&]() -> std::string {
    while (pos < lines.size()) {
      std::string t = trim(lines[pos++]);
      if (!t.empty()) return t;
    }
    throw std::invalid_argument("ensemble_from_text: truncated input");
  };
  if (next_line() != "did-ensemble 1")
    throw std::invalid_argument("ensemble_from_text: bad magic line");
  DetectorEnsemble ens;
  std::string fusion_line = next_line();
  if (fusion_line.rfind("fusion ", 0) != 0)
    throw std::invalid_argument("ensemble_from_text: expected fusion line");
  ens.fusion = fusion_from_name(fusion_line.substr(7));
  std::string thr_line = next_line();
  if (thr_line.rfind("threshold ", 0) != 0)
    throw std::invalid_argument("ensemble_from_text: expected threshold line");
  ens.threshold = parse_double(thr_line.substr(10));
  for (Branch b : {Branch::Delta1, Branch::Delta2}) {
    std::string head = next_line();
    std::string want =
        std::string("branch ") + (b == Branch::Delta1 ? "delta1" : "delta2") + " ";
    if (head.rfind(want, 0) != 0)
      throw std::invalid_argument("ensemble_from_text: expected '" + want + "...'");
    std::size_t n = split(head.substr(want.size()), ',').size();
    if (n != feature_length(b))
      throw std::invalid_argument("ensemble_from_text: feature layout mismatch");
    std::vector<double>& w =
        b == Branch::Delta1 ? ens.clf_delta1.weights : ens.clf_delta2.weights;
    w.clear();
    for (std::size_t i = 0; i < n; ++i) w.push_back(parse_double(next_line()));
  }
  return ens;
}

inline void save_ensemble(const DetectorEnsemble& ens, const std::string& path) {
  write_text_file(path, ensemble_to_text(ens));
}

inline DetectorEnsemble load_ensemble(const std::string& path) {
  return ensemble_from_text(read_text_file(path));
}

}  // namespace did

#pragma once

// Logistic regression over residual summary features, trained by full-batch
// gradient descent on cross-entropy with an L2 penalty (bias slot excluded).
// The step size halves whenever a step would increase the loss, so the loss
// trace over accepted steps is non-increasing.

#include <cmath>
#include <stdexcept>
#include <vector>

#include "did/residuals.hpp"

namespace did {

struct TrainHyper {
  double learning_rate = 0.1;
  int iterations = 2000;
  double l2 = 1e-4;
};

struct LogisticClassifier {
  std::vector<double> weights;  // slot 0 pairs with the feature bias slot
};

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// log(1 + exp(z)) without overflow
inline double softplus(double z) {
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

inline double predict(const LogisticClassifier& clf, const FeatureVector& phi) {
  check_dim(phi.size(), clf.weights.size(), "predict");
  return sigmoid(dot(clf.weights, phi));
}

// Mean cross-entropy plus 0.5 * l2 * ||w[1:]||^2. Labels are 1 for fake.
inline double logistic_loss(const std::vector<double>& w,
                            const std::vector<FeatureVector>& features,
                            const std::vector<int>& labels, double l2) {
  check_dim(labels.size(), features.size(), "logistic_loss labels");
  if (features.empty()) throw std::invalid_argument("logistic_loss: empty data");
  double total = 0.0;
  for (std::size_t i = 0; i < features.size(); ++i) {
    double z = dot(w, features[i]);
    total += softplus(z) - static_cast<double>(labels[i]) * z;
  }
  total /= static_cast<double>(features.size());
  double penalty = 0.0;
  for (std::size_t j = 1; j < w.size(); ++j) penalty += w[j] * w[j];
  return total + 0.5 * l2 * penalty;
}

inline std::vector<double> logistic_gradient(const std::vector<double>& w,
                                             const std::vector<FeatureVector>& features,
                                             const std::vector<int>& labels, double l2) {
  check_dim(labels.size(), features.size(), "logistic_gradient labels");
  if (features.empty()) throw std::invalid_argument("logistic_gradient: empty data");
  std::vector<double> g(w.size(), 0.0);
  for (std::size_t i = 0; i < features.size(); ++i) {
    double err = sigmoid(dot(w, features[i])) - static_cast<double>(labels[i]);
    axpy(err, features[i], g);
  }
  double inv_n = 1.0 / static_cast<double>(features.size());
  for (double& v : g) v *= inv_n;
  for (std::size_t j = 1; j < w.size(); ++j) g[j] += l2 * w[j];
  return g;
}

// Trains on standardized features (per-column z-score, bias slot untouched)
// and folds the affine change of variables back into the returned weights, so
// predict() applies to raw features. Standardization is a diagonal
// preconditioner: the summary features span several orders of magnitude and
// plain gradient descent stalls on the raw scales.
inline LogisticClassifier train(const std::vector<FeatureVector>& features,
                                const std::vector<int>& labels, const TrainHyper& hyper,
                                std::vector<double>* loss_trace = nullptr) {
  if (features.empty()) throw std::invalid_argument("train: empty data");
  check_dim(labels.size(), features.size(), "train labels");
  std::size_t dim = features[0].size();
  bool saw_pos = false, saw_neg = false;
  for (std::size_t i = 0; i < features.size(); ++i) {
    check_dim(features[i].size(), dim, "train features");
    for (double v : features[i])
      if (!std::isfinite(v)) throw std::invalid_argument("train: non-finite feature");
    (labels[i] != 0 ? saw_pos : saw_neg) = true;
  }
  if (!saw_pos || !saw_neg)
    throw std::runtime_error("train: both classes required for calibration");

  std::vector<double> mean(dim, 0.0), sdev(dim, 1.0);
  for (const FeatureVector& f : features) axpy(1.0, f, mean);
  for (double& v : mean) v /= static_cast<double>(features.size());
  std::vector<double> var(dim, 0.0);
  for (const FeatureVector& f : features)
    for (std::size_t j = 0; j < dim; ++j) var[j] += (f[j] - mean[j]) * (f[j] - mean[j]);
  for (std::size_t j = 1; j < dim; ++j) {
    double s = std::sqrt(var[j] / static_cast<double>(features.size()));
    sdev[j] = s > 1e-12 ? s : 1.0;
  }
  mean[0] = 0.0;  // the bias slot stays as-is

  std::vector<FeatureVector> zf(features.size(), FeatureVector(dim));
  for (std::size_t i = 0; i < features.size(); ++i)
    for (std::size_t j = 0; j < dim; ++j) zf[i][j] = (features[i][j] - mean[j]) / sdev[j];

  std::vector<double> w(dim, 0.0);
  double lr = hyper.learning_rate;
  double cur = logistic_loss(w, zf, labels, hyper.l2);
  if (loss_trace) loss_trace->push_back(cur);
  for (int it = 0; it < hyper.iterations; ++it) {
    std::vector<double> g = logistic_gradient(w, zf, labels, hyper.l2);
    std::vector<double> cand = w;
    axpy(-lr, g, cand);
    double cand_loss = logistic_loss(cand, zf, labels, hyper.l2);
    if (cand_loss <= cur) {
      w = std::move(cand);
      cur = cand_loss;
      if (loss_trace) loss_trace->push_back(cur);
    } else {
      lr *= 0.5;  // reject the step, retry smaller
    }
  }

  LogisticClassifier clf;
  clf.weights.assign(dim, 0.0);
  double bias = w[0];
  for (std::size_t j = 1; j < dim; ++j) {
    clf.weights[j] = w[j] / sdev[j];
    bias -= w[j] * mean[j] / sdev[j];
  }
  clf.weights[0] = bias;
  return clf;
}

}  // namespace did

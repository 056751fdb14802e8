#pragma once

#include <functional>
#include <string>
#include <vector>

#include "proto_ope/net.hpp"

namespace proto_ope {

// Predicted action distributions (rows) with the observed action per row.
struct PredictionBatch {
  Mat probs;                // m x k, rows sum to 1
  std::vector<int> labels;  // in 0..k-1

  int size() const { return static_cast<int>(probs.rows()); }
  int classes() const { return static_cast<int>(probs.cols()); }
  void validate() const;
};

// Fraction of rows whose argmax (lowest index on ties) equals the label.
double accuracy(const PredictionBatch& batch);

// Unweighted mean over classes present in the labels of the one-vs-rest
// Mann-Whitney AUC; tied scores count 1/2. Throws if only one class occurs.
double auc_macro_ovr(const PredictionBatch& batch);

// Static calibration error: equal-width bins over every class-probability
// column, averaging |empirical accuracy - mean confidence| weighted by bin
// occupancy. Boundary values fall into the lower bin.
double sce(const PredictionBatch& batch, int n_bins = 15);

// Per-class one-vs-rest logistic recalibration sigma(a * logit(p) + b),
// fitted by NLL; apply() renormalizes the mapped columns to sum to 1.
struct CalibrationMap {
  Vec a;
  Vec b;

  Mat apply(const Mat& probs) const;
  Vec apply_row(const Vec& probs) const;
};

CalibrationMap sigmoid_calibrate(const PredictionBatch& validation);

// Point estimate plus a bootstrap percentile interval.
struct MetricCi {
  double value = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};

MetricCi bootstrap_metric(const PredictionBatch& batch,
                          const std::function<double(const PredictionBatch&)>& metric,
                          int resamples, std::uint64_t seed);

}  // namespace proto_ope

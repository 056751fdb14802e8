#include "proto_ope/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace proto_ope {

namespace {
constexpr double kProbClamp = 1e-12;

double logit(double p) {
  p = std::clamp(p, kProbClamp, 1.0 - kProbClamp);
  return std::log(p / (1.0 - p));
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
}  // namespace

void PredictionBatch::validate() const {
  if (probs.rows() == 0 || probs.cols() == 0)
    throw std::invalid_argument("prediction batch: empty");
  if (static_cast<int>(labels.size()) != size())
    throw std::invalid_argument("prediction batch: one label per row required");
  for (int i = 0; i < size(); ++i) {
    if (labels[i] < 0 || labels[i] >= classes())
      throw std::invalid_argument("prediction batch: label out of range");
    double sum = probs.row(i).sum();
    if (std::abs(sum - 1.0) > 1e-9)
      throw std::invalid_argument("prediction batch: row " + std::to_string(i) +
                                  " sums to " + std::to_string(sum));
    if (probs.row(i).minCoeff() < 0.0)
      throw std::invalid_argument("prediction batch: negative probability");
  }
}

double accuracy(const PredictionBatch& batch) {
  batch.validate();
  int hits = 0;
  for (int i = 0; i < batch.size(); ++i) {
    int arg = 0;
    double best = batch.probs(i, 0);
    for (int c = 1; c < batch.classes(); ++c) {
      if (batch.probs(i, c) > best) {
        best = batch.probs(i, c);
        arg = c;
      }
    }
    if (arg == batch.labels[i]) ++hits;
  }
  return static_cast<double>(hits) / batch.size();
}

double auc_macro_ovr(const PredictionBatch& batch) {
  batch.validate();
  std::vector<char> present(batch.classes(), 0);
  for (int l : batch.labels) present[l] = 1;
  int n_present = std::count(present.begin(), present.end(), 1);
  if (n_present < 2)
    throw std::invalid_argument("auc: need at least two classes present in labels");

  double total = 0.0;
  for (int c = 0; c < batch.classes(); ++c) {
    if (!present[c]) continue;
    // Mann-Whitney statistic via ranks over the class-c score column.
    std::vector<std::pair<double, int>> scored(batch.size());
    for (int i = 0; i < batch.size(); ++i)
      scored[i] = {batch.probs(i, c), batch.labels[i] == c ? 1 : 0};
    std::sort(scored.begin(), scored.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    double rank_sum_pos = 0.0;
    std::size_t n_pos = 0;
    std::size_t i = 0;
    while (i < scored.size()) {
      std::size_t j = i;
      while (j < scored.size() && scored[j].first == scored[i].first) ++j;
      double mid_rank = 0.5 * static_cast<double>(i + 1 + j);  // average of ranks i+1..j
      for (std::size_t k = i; k < j; ++k) {
        if (scored[k].second) {
          rank_sum_pos += mid_rank;
          ++n_pos;
        }
      }
      i = j;
    }
    std::size_t n_neg = scored.size() - n_pos;
    double u = rank_sum_pos - 0.5 * static_cast<double>(n_pos) * (n_pos + 1);
    total += u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
  }
  return total / n_present;
}

double sce(const PredictionBatch& batch, int n_bins) {
  batch.validate();
  if (n_bins < 1) throw std::invalid_argument("sce: n_bins must be >= 1");
  const int m = batch.size();
  const int k = batch.classes();
  double total = 0.0;
  for (int c = 0; c < k; ++c) {
    std::vector<int> count(n_bins, 0), correct(n_bins, 0);
    std::vector<double> confidence(n_bins, 0.0);
    for (int i = 0; i < m; ++i) {
      double p = batch.probs(i, c);
      // Boundary values belong to the lower bin; p = 0 to the first.
      int b = std::clamp(static_cast<int>(std::ceil(p * n_bins)) - 1, 0, n_bins - 1);
      count[b] += 1;
      confidence[b] += p;
      if (batch.labels[i] == c) correct[b] += 1;
    }
    for (int b = 0; b < n_bins; ++b) {
      if (count[b] == 0) continue;
      double acc = static_cast<double>(correct[b]) / count[b];
      double conf = confidence[b] / count[b];
      total += (static_cast<double>(count[b]) / m) * std::abs(acc - conf);
    }
  }
  return total / k;
}

Vec CalibrationMap::apply_row(const Vec& probs) const {
  if (probs.size() != a.size())
    throw std::invalid_argument("calibration: class count differs");
  Vec mapped(probs.size());
  for (Eigen::Index c = 0; c < probs.size(); ++c)
    mapped[c] = sigmoid(a[c] * logit(probs[c]) + b[c]);
  double sum = mapped.sum();
  return mapped / sum;
}

Mat CalibrationMap::apply(const Mat& probs) const {
  Mat out(probs.rows(), probs.cols());
  for (Eigen::Index i = 0; i < probs.rows(); ++i)
    out.row(i) = apply_row(probs.row(i).transpose()).transpose();
  return out;
}

CalibrationMap sigmoid_calibrate(const PredictionBatch& validation) {
  validation.validate();
  const int m = validation.size();
  const int k = validation.classes();
  CalibrationMap map;
  map.a = Vec::Ones(k);
  map.b = Vec::Zero(k);
  for (int c = 0; c < k; ++c) {
    // Two-parameter logistic regression on x = logit(p_c), y = [label == c],
    // solved by damped Newton with a small ridge for stability.
    double a = 1.0, b = 0.0;
    constexpr double kRidge = 1e-8;
    for (int iter = 0; iter < 100; ++iter) {
      double g_a = kRidge * a, g_b = kRidge * b;
      double h_aa = kRidge, h_ab = 0.0, h_bb = kRidge;
      for (int i = 0; i < m; ++i) {
        double x = logit(validation.probs(i, c));
        double y = validation.labels[i] == c ? 1.0 : 0.0;
        double p = sigmoid(a * x + b);
        double e = p - y;
        double w = std::max(p * (1.0 - p), 1e-12);
        g_a += e * x;
        g_b += e;
        h_aa += w * x * x;
        h_ab += w * x;
        h_bb += w;
      }
      double det = h_aa * h_bb - h_ab * h_ab;
      double da = (h_bb * g_a - h_ab * g_b) / det;
      double db = (h_aa * g_b - h_ab * g_a) / det;
      // Damp big steps to keep the iteration inside the well-behaved region.
      double norm = std::max(std::abs(da), std::abs(db));
      if (norm > 10.0) {
        da *= 10.0 / norm;
        db *= 10.0 / norm;
      }
      a -= da;
      b -= db;
      if (std::abs(da) < 1e-10 && std::abs(db) < 1e-10) break;
    }
    map.a[c] = a;
    map.b[c] = b;
  }
  return map;
}

MetricCi bootstrap_metric(const PredictionBatch& batch,
                          const std::function<double(const PredictionBatch&)>& metric,
                          int resamples, std::uint64_t seed) {
  batch.validate();
  MetricCi out;
  out.value = metric(batch);
  if (resamples < 1) {
    out.lo = out.hi = out.value;
    return out;
  }
  Rng rng(seed);
  std::vector<double> values;
  values.reserve(resamples);
  PredictionBatch resampled;
  resampled.probs.resize(batch.probs.rows(), batch.probs.cols());
  resampled.labels.resize(batch.labels.size());
  for (int r = 0; r < resamples; ++r) {
    for (int i = 0; i < batch.size(); ++i) {
      int pick = rng.uniform_int(batch.size());
      resampled.probs.row(i) = batch.probs.row(pick);
      resampled.labels[i] = batch.labels[pick];
    }
    try {
      values.push_back(metric(resampled));
    } catch (const std::invalid_argument&) {
      // A resample may collapse to one class; skip it.
    }
  }
  if (values.empty()) {
    out.lo = out.hi = out.value;
    return out;
  }
  out.lo = quantile(values, 0.025);
  out.hi = quantile(values, 0.975);
  return out;
}

}  // namespace proto_ope

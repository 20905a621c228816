#include "tendon/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace tendon {

namespace {

void check_binary(const std::vector<int>& labels) {
  for (int l : labels)
    if (l != 0 && l != 1)
      throw std::invalid_argument("labels must be 0 or 1, got " +
                                  std::to_string(l));
}

}  // namespace

ClassificationMetrics classification_metrics(const std::vector<double>& probs,
                                             const std::vector<int>& labels,
                                             double threshold) {
  if (probs.size() != labels.size())
    throw std::invalid_argument(
        "classification_metrics: " + std::to_string(probs.size()) +
        " predictions vs " + std::to_string(labels.size()) + " labels");
  if (probs.empty())
    throw std::invalid_argument("classification_metrics: empty input");
  check_binary(labels);

  std::size_t tp = 0, tn = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const bool pos = probs[i] >= threshold;
    if (pos && labels[i] == 1) ++tp;
    else if (pos) ++fp;
    else if (labels[i] == 1) ++fn;
    else ++tn;
  }
  ClassificationMetrics m;
  m.accuracy = static_cast<double>(tp + tn) / probs.size();
  if (tp + fp == 0) {
    m.precision = 1.0;
    m.precision_undefined = true;
  } else {
    m.precision = static_cast<double>(tp) / (tp + fp);
  }
  if (tp + fn == 0) {
    m.recall = 1.0;
    m.recall_undefined = true;
  } else {
    m.recall = static_cast<double>(tp) / (tp + fn);
  }
  return m;
}

RocPrResult roc_pr(const std::vector<double>& scores,
                   const std::vector<int>& labels) {
  if (scores.size() != labels.size())
    throw std::invalid_argument("roc_pr: length mismatch");
  check_binary(labels);
  std::size_t n_pos = 0;
  for (int l : labels) n_pos += l;
  const std::size_t n_neg = labels.size() - n_pos;
  if (n_pos == 0 || n_neg == 0)
    throw std::invalid_argument("roc_pr: both classes must be present");

  std::vector<double> thresholds = scores;
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()),
                   thresholds.end());

  RocPrResult r;
  r.roc.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
  r.pr.push_back({0.0, 1.0, std::numeric_limits<double>::infinity()});
  for (double t : thresholds) {
    std::size_t tp = 0, fp = 0;
    for (std::size_t i = 0; i < scores.size(); ++i)
      if (scores[i] >= t) {
        if (labels[i] == 1) ++tp;
        else ++fp;
      }
    const double tpr = static_cast<double>(tp) / n_pos;
    const double fpr = static_cast<double>(fp) / n_neg;
    r.roc.push_back({fpr, tpr, t});
    r.pr.push_back({tpr, static_cast<double>(tp) / (tp + fp), t});
  }
  for (std::size_t i = 1; i < r.roc.size(); ++i)
    r.auc += (r.roc[i].x - r.roc[i - 1].x) *
             (r.roc[i].y + r.roc[i - 1].y) * 0.5;
  return r;
}

RegressionMetrics regression_metrics(const std::vector<double>& preds,
                                     const std::vector<double>& labels) {
  if (preds.size() != labels.size())
    throw std::invalid_argument("regression_metrics: length mismatch");
  if (preds.empty())
    throw std::invalid_argument("regression_metrics: empty input");
  RegressionMetrics m;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const double ae = std::abs(preds[i] - labels[i]);
    m.mae += ae;
    m.max_ae = std::max(m.max_ae, ae);
  }
  m.mae /= preds.size();
  return m;
}

RegressionMetrics regression_metrics(
    const std::vector<std::pair<std::string, double>>& preds,
    const std::vector<std::pair<std::string, double>>& labels) {
  std::vector<double> p, l;
  std::string unmatched;
  for (const auto& [id, pv] : preds) {
    bool found = false;
    for (const auto& [lid, lv] : labels)
      if (lid == id) {
        p.push_back(pv);
        l.push_back(lv);
        found = true;
        break;
      }
    if (!found) unmatched += (unmatched.empty() ? "" : ", ") + id;
  }
  for (const auto& [lid, lv] : labels) {
    bool found = false;
    for (const auto& [id, pv] : preds)
      if (id == lid) {
        found = true;
        break;
      }
    if (!found) unmatched += (unmatched.empty() ? "" : ", ") + lid;
  }
  if (!unmatched.empty())
    throw std::invalid_argument("regression_metrics: unmatched exam ids: " +
                                unmatched);
  return regression_metrics(p, l);
}

double mean_correlation_fisher(const std::vector<double>& correlations) {
  if (correlations.empty())
    throw std::invalid_argument("mean_correlation_fisher: empty input");
  double zsum = 0.0;
  for (double r : correlations) {
    if (std::abs(r) > 1.0 + 1e-9)
      throw std::invalid_argument("correlation " + std::to_string(r) +
                                  " outside [-1,1]");
    const double clamped = std::clamp(r, -(1.0 - 1e-12), 1.0 - 1e-12);
    zsum += std::atanh(clamped);
  }
  return std::tanh(zsum / correlations.size());
}

Correlation per_patient_correlation(const std::vector<double>& preds,
                                    const std::vector<double>& labels) {
  if (preds.size() != labels.size())
    throw std::invalid_argument(
        "per_patient_correlation: " + std::to_string(preds.size()) +
        " predictions vs " + std::to_string(labels.size()) + " labels");
  if (preds.size() < 3)
    throw std::invalid_argument(
        "per_patient_correlation: need at least 3 timepoints, got " +
        std::to_string(preds.size()));
  const double n = static_cast<double>(preds.size());
  double mp = 0.0, ml = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    mp += preds[i];
    ml += labels[i];
  }
  mp /= n;
  ml /= n;
  double cov = 0.0, vp = 0.0, vl = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    cov += (preds[i] - mp) * (labels[i] - ml);
    vp += (preds[i] - mp) * (preds[i] - mp);
    vl += (labels[i] - ml) * (labels[i] - ml);
  }
  if (vp == 0.0 || vl == 0.0) return {0.0, true};
  return {cov / std::sqrt(vp * vl), false};
}

}  // namespace tendon

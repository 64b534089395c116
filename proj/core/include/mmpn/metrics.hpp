#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mmpn/csv.hpp"

namespace mmpn::eval {

double mae(const std::vector<double>& pred, const std::vector<double>& truth);
// 1 - SS_res/SS_tot about the true mean; ValidationError when SS_tot == 0.
double r2(const std::vector<double>& pred, const std::vector<double>& truth);

struct ConfusionMatrix {
  long tp = 0, fp = 0, tn = 0, fn = 0;
};

// Empty denominators surface as nullopt, never as 0.
struct ClassificationMetrics {
  ConfusionMatrix confusion;
  std::optional<double> accuracy;
  std::optional<double> sensitivity;
  std::optional<double> specificity;
};

// Positive prediction iff score >= threshold.
ClassificationMetrics confusion(const std::vector<double>& scores, const std::vector<int>& labels,
                                double threshold);

struct RocCurve {
  std::vector<std::pair<double, double>> points;  // (fpr, tpr), (0,0) .. (1,1)
  double auc = 0.0;
};

// Trapezoidal AUC, cross-checked against the Mann-Whitney rank statistic
// (ties get half credit); disagreement beyond 1e-12 raises NumericError.
RocCurve roc_auc(const std::vector<double>& scores, const std::vector<int>& labels);

// Risk decision from a predicted SER. Inclusive compares pred <= cutoff
// (myopia at -0.5); exclusive compares pred < cutoff (high myopia at -6.0).
bool threshold_classify(double pred_ser, double cutoff, bool inclusive = true);

struct SweepPoint {
  double cutoff = 0.0;
  double accuracy = 0.0;
};

struct SweepResult {
  std::vector<SweepPoint> points;
  double worst_cutoff = 0.0;  // argmin accuracy: the most inconsistent threshold
  double worst_accuracy = 0.0;
};

// For each cutoff X: accuracy of (pred <= X) against (true <= X).
SweepResult threshold_sweep(const std::vector<double>& pred_sers,
                            const std::vector<double>& true_sers,
                            const std::vector<double>& grid);
std::vector<double> sweep_grid(double lo, double hi, double step);

// Joint regression/classification summary for one nPm model.
struct Metrics {
  std::optional<double> mae;
  std::optional<double> r2;
  ClassificationMetrics trained;    // classifier-head scores at 0.5
  std::optional<double> trained_auc;
  ClassificationMetrics threshold;  // threshold classifier on predicted SER
  std::optional<double> threshold_auc;
};

// One evaluated sample; the container for metric and subgroup computation.
struct EvalRecord {
  std::vector<double> pred_sers;
  std::vector<double> true_sers;
  double p_myopia = 0.0;
  double p_high_myopia = 0.0;
  int label_myopia = 0;
  int label_high_myopia = 0;
  char sex = 'M';
  bool baseline_myopic = false;
};

struct PairedMetrics {
  Metrics myopia;
  Metrics high_myopia;
};

// cutoff/inclusive pairs: myopia (-0.5, inclusive), high myopia (-6.0,
// exclusive). Regression metrics live in the myopia slot of the pair.
PairedMetrics evaluate(const std::vector<EvalRecord>& records);

struct BlandAltmanPair {
  double mean;  // (pred + true) / 2
  double diff;  // pred - true
};

struct SubgroupResult {
  std::string group;
  PairedMetrics metrics;
  std::vector<BlandAltmanPair> bland_altman;
};

enum class SubgroupKey { Sex, BaselineMyopic };

// Empty groups are omitted; their names are returned in `warnings`.
std::vector<SubgroupResult> subgroup_eval(const std::vector<EvalRecord>& records, SubgroupKey key,
                                          std::vector<std::string>* warnings = nullptr);

// Ordinary least squares y = slope*x + intercept with in-sample MAE.
struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double mae = 0.0;
  double predict(double x) const { return slope * x + intercept; }
};
LinearFit linear_baseline(const std::vector<double>& x, const std::vector<double>& y);

// Logistic regression on one feature by gradient descent
// (|delta loss| < 1e-10 or 1e5 steps).
struct LogisticFit {
  double weight = 0.0;
  double bias = 0.0;
  long steps = 0;
  std::optional<double> accuracy;
  std::optional<double> sensitivity;
  std::optional<double> specificity;
  std::optional<double> auc;
  double predict_prob(double x) const;
};
LogisticFit logistic_baseline(const std::vector<double>& x, const std::vector<int>& labels);

// Metrics CSV rows in the layout of the performance table: one row per
// model plus unweighted / sample-count-weighted average rows when more
// than one model is present.
struct NamedMetrics {
  std::string model;  // "1p1", ...
  std::size_t sample_count = 0;
  PairedMetrics metrics;
};
csv::Table metrics_table(const std::vector<NamedMetrics>& models);

}  // namespace mmpn::eval

#include "mmpn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mmpn/errors.hpp"
#include "mmpn/refraction.hpp"

namespace mmpn::eval {

namespace {

void check_paired(const std::vector<double>& a, const std::vector<double>& b, const char* who) {
  if (a.empty() || a.size() != b.size()) {
    throw ValidationError(std::string(who) + ": need equal non-empty vectors");
  }
}

void check_sizes(std::size_t a, std::size_t b, const char* who) {
  if (a == 0 || a != b) {
    throw ValidationError(std::string(who) + ": need equal non-empty vectors");
  }
}

}  // namespace

double mae(const std::vector<double>& pred, const std::vector<double>& truth) {
  check_paired(pred, truth, "mae");
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) sum += std::fabs(pred[i] - truth[i]);
  return sum / double(pred.size());
}

double r2(const std::vector<double>& pred, const std::vector<double>& truth) {
  check_paired(pred, truth, "r2");
  double mean = std::accumulate(truth.begin(), truth.end(), 0.0) / double(truth.size());
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ss_res += (truth[i] - pred[i]) * (truth[i] - pred[i]);
    ss_tot += (truth[i] - mean) * (truth[i] - mean);
  }
  if (ss_tot == 0.0) throw ValidationError("r2: undefined, zero variance in the truth");
  return 1.0 - ss_res / ss_tot;
}

ClassificationMetrics confusion(const std::vector<double>& scores, const std::vector<int>& labels,
                                double threshold) {
  check_sizes(scores.size(), labels.size(), "confusion");
  ClassificationMetrics m;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw ValidationError("confusion: labels must be 0/1");
    bool positive = scores[i] >= threshold;
    if (positive && labels[i]) ++m.confusion.tp;
    else if (positive) ++m.confusion.fp;
    else if (labels[i]) ++m.confusion.fn;
    else ++m.confusion.tn;
  }
  long p = m.confusion.tp + m.confusion.fn;
  long n = m.confusion.tn + m.confusion.fp;
  if (p + n > 0) m.accuracy = double(m.confusion.tp + m.confusion.tn) / double(p + n);
  if (p > 0) m.sensitivity = double(m.confusion.tp) / double(p);
  if (n > 0) m.specificity = double(m.confusion.tn) / double(n);
  return m;
}

RocCurve roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  check_sizes(scores.size(), labels.size(), "roc_auc");
  long pos = 0, neg = 0;
  for (int l : labels) {
    if (l != 0 && l != 1) throw ValidationError("roc_auc: labels must be 0/1");
    l ? ++pos : ++neg;
  }
  if (pos == 0 || neg == 0) throw ValidationError("roc_auc: both classes must be present");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  // Sweep thresholds from +inf down through every distinct score; ties move
  // as one block so the curve has one vertex per distinct score.
  RocCurve curve;
  curve.points.emplace_back(0.0, 0.0);
  long tp = 0, fp = 0;
  double auc_trap = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    long dtp = 0, dfp = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      labels[order[j]] ? ++dtp : ++dfp;
      ++j;
    }
    double fpr0 = double(fp) / double(neg), tpr0 = double(tp) / double(pos);
    tp += dtp;
    fp += dfp;
    double fpr1 = double(fp) / double(neg), tpr1 = double(tp) / double(pos);
    auc_trap += (fpr1 - fpr0) * 0.5 * (tpr0 + tpr1);
    curve.points.emplace_back(fpr1, tpr1);
    i = j;
  }

  // Independent route: Mann-Whitney rank statistic with midranks for ties.
  std::vector<std::size_t> asc(order.rbegin(), order.rend());
  double rank_sum_pos = 0.0;
  std::size_t k = 0;
  while (k < asc.size()) {
    std::size_t j = k;
    long tie_pos = 0;
    while (j < asc.size() && scores[asc[j]] == scores[asc[k]]) {
      if (labels[asc[j]]) ++tie_pos;
      ++j;
    }
    double midrank = 0.5 * (double(k + 1) + double(j));  // ranks are 1-based
    rank_sum_pos += midrank * double(tie_pos);
    k = j;
  }
  double auc_rank = (rank_sum_pos - 0.5 * double(pos) * double(pos + 1)) / (double(pos) * double(neg));

  if (std::fabs(auc_trap - auc_rank) > 1e-12) {
    throw NumericError("roc_auc", "trapezoid and rank AUC disagree: " +
                                      std::to_string(auc_trap) + " vs " + std::to_string(auc_rank));
  }
  curve.auc = auc_trap;
  return curve;
}

bool threshold_classify(double pred_ser, double cutoff, bool inclusive) {
  if (!std::isfinite(pred_ser)) throw ValidationError("threshold_classify: non-finite prediction");
  return inclusive ? pred_ser <= cutoff : pred_ser < cutoff;
}

std::vector<double> sweep_grid(double lo, double hi, double step) {
  if (step <= 0.0 || hi < lo) throw ValidationError("sweep_grid: bad range");
  std::vector<double> grid;
  for (long k = 0;; ++k) {
    double x = lo + double(k) * step;
    if (x > hi + step * 1e-9) break;
    grid.push_back(x);
  }
  return grid;
}

SweepResult threshold_sweep(const std::vector<double>& pred_sers,
                            const std::vector<double>& true_sers,
                            const std::vector<double>& grid) {
  check_paired(pred_sers, true_sers, "threshold_sweep");
  if (grid.empty()) throw ValidationError("threshold_sweep: empty grid");
  SweepResult res;
  res.worst_accuracy = 2.0;
  for (double x : grid) {
    long agree = 0;
    for (std::size_t i = 0; i < pred_sers.size(); ++i) {
      if (threshold_classify(pred_sers[i], x) == threshold_classify(true_sers[i], x)) ++agree;
    }
    double acc = double(agree) / double(pred_sers.size());
    res.points.push_back({x, acc});
    if (acc < res.worst_accuracy) {
      res.worst_accuracy = acc;
      res.worst_cutoff = x;
    }
  }
  return res;
}

namespace {

// Final-horizon regression pairs plus both risk tasks for a record set.
PairedMetrics evaluate_impl(const std::vector<EvalRecord>& records) {
  if (records.empty()) throw ValidationError("evaluate: no records");
  std::vector<double> pred_final, true_final, p_my, p_high;
  std::vector<double> all_pred, all_true;
  std::vector<int> y_my, y_high;
  for (const auto& r : records) {
    if (r.pred_sers.empty() || r.pred_sers.size() != r.true_sers.size()) {
      throw ValidationError("evaluate: record with mismatched SER vectors");
    }
    pred_final.push_back(r.pred_sers.back());
    true_final.push_back(r.true_sers.back());
    for (std::size_t j = 0; j < r.pred_sers.size(); ++j) {
      all_pred.push_back(r.pred_sers[j]);
      all_true.push_back(r.true_sers[j]);
    }
    p_my.push_back(r.p_myopia);
    p_high.push_back(r.p_high_myopia);
    y_my.push_back(r.label_myopia);
    y_high.push_back(r.label_high_myopia);
  }

  PairedMetrics pm;
  pm.myopia.mae = mae(all_pred, all_true);
  try {
    pm.myopia.r2 = r2(all_pred, all_true);
  } catch (const ValidationError&) {
    pm.myopia.r2 = std::nullopt;
  }
  pm.high_myopia.mae = pm.myopia.mae;
  pm.high_myopia.r2 = pm.myopia.r2;

  auto task = [&](Metrics& out, const std::vector<double>& probs, const std::vector<int>& labels,
                  double cutoff, bool inclusive) {
    out.trained = confusion(probs, labels, 0.5);
    std::vector<double> thr_score(records.size()), risk_score(records.size());
    std::vector<int> thr_label(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
      thr_label[i] = threshold_classify(pred_final[i], cutoff, inclusive) ? 1 : 0;
      thr_score[i] = double(thr_label[i]);
      risk_score[i] = -pred_final[i];  // more myopic prediction = higher risk
    }
    out.threshold = confusion(thr_score, labels, 0.5);
    bool both = false, both_thr = false;
    {
      long p = 0;
      for (int l : labels) p += l;
      both = p > 0 && p < long(labels.size());
    }
    both_thr = both;
    if (both) out.trained_auc = roc_auc(probs, labels).auc;
    if (both_thr) out.threshold_auc = roc_auc(risk_score, labels).auc;
  };
  task(pm.myopia, p_my, y_my, -0.5, true);
  task(pm.high_myopia, p_high, y_high, -6.0, false);
  return pm;
}

}  // namespace

PairedMetrics evaluate(const std::vector<EvalRecord>& records) { return evaluate_impl(records); }

std::vector<SubgroupResult> subgroup_eval(const std::vector<EvalRecord>& records, SubgroupKey key,
                                          std::vector<std::string>* warnings) {
  std::vector<std::pair<std::string, std::vector<EvalRecord>>> groups;
  if (key == SubgroupKey::Sex) {
    groups = {{"male", {}}, {"female", {}}};
    for (const auto& r : records) groups[r.sex == 'M' ? 0 : 1].second.push_back(r);
  } else {
    groups = {{"baseline_myopic", {}}, {"baseline_non_myopic", {}}};
    for (const auto& r : records) groups[r.baseline_myopic ? 0 : 1].second.push_back(r);
  }

  std::vector<SubgroupResult> out;
  for (auto& [name, recs] : groups) {
    if (recs.empty()) {
      if (warnings) warnings->push_back("subgroup '" + name + "' is empty; omitted");
      continue;
    }
    SubgroupResult res;
    res.group = name;
    res.metrics = evaluate_impl(recs);
    for (const auto& r : recs) {
      for (std::size_t j = 0; j < r.pred_sers.size(); ++j) {
        res.bland_altman.push_back(
            {0.5 * (r.pred_sers[j] + r.true_sers[j]), r.pred_sers[j] - r.true_sers[j]});
      }
    }
    out.push_back(std::move(res));
  }
  return out;
}

LinearFit linear_baseline(const std::vector<double>& x, const std::vector<double>& y) {
  check_paired(x, y, "linear_baseline");
  if (x.size() < 3) throw ValidationError("linear_baseline: need at least 3 points");
  double mx = std::accumulate(x.begin(), x.end(), 0.0) / double(x.size());
  double my = std::accumulate(y.begin(), y.end(), 0.0) / double(y.size());
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0) throw ValidationError("linear_baseline: zero variance in x");
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) sum += std::fabs(fit.predict(x[i]) - y[i]);
  fit.mae = sum / double(x.size());
  return fit;
}

double LogisticFit::predict_prob(double x) const {
  return 1.0 / (1.0 + std::exp(-(weight * x + bias)));
}

LogisticFit logistic_baseline(const std::vector<double>& x, const std::vector<int>& labels) {
  check_sizes(x.size(), labels.size(), "logistic_baseline");
  if (x.size() < 3) throw ValidationError("logistic_baseline: need at least 3 points");
  double mx = std::accumulate(x.begin(), x.end(), 0.0) / double(x.size());
  double sxx = 0.0;
  for (double v : x) sxx += (v - mx) * (v - mx);
  double sd = std::sqrt(sxx / double(x.size()));
  if (sd == 0.0) throw ValidationError("logistic_baseline: zero variance in x");

  // Standardize internally; gradient descent on the mean NLL.
  std::vector<double> z(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) z[i] = (x[i] - mx) / sd;

  double w = 0.0, b = 0.0;
  double lr = 1.0;
  auto loss_at = [&](double wv, double bv) {
    double loss = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
      double t = wv * z[i] + bv;
      // log(1 + exp(-|t|)) form avoids overflow
      double l = t > 0 ? std::log1p(std::exp(-t)) + (labels[i] ? 0.0 : t)
                       : std::log1p(std::exp(t)) - (labels[i] ? t : 0.0);
      loss += l;
    }
    return loss / double(z.size());
  };

  double prev = loss_at(w, b);
  long steps = 0;
  for (; steps < 100000; ++steps) {
    double gw = 0.0, gb = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
      double p = 1.0 / (1.0 + std::exp(-(w * z[i] + b)));
      gw += (p - double(labels[i])) * z[i];
      gb += p - double(labels[i]);
    }
    gw /= double(z.size());
    gb /= double(z.size());
    w -= lr * gw;
    b -= lr * gb;
    double cur = loss_at(w, b);
    if (std::fabs(prev - cur) < 1e-10) {
      prev = cur;
      ++steps;
      break;
    }
    prev = cur;
  }

  LogisticFit fit;
  fit.weight = w / sd;
  fit.bias = b - w * mx / sd;
  fit.steps = steps;

  std::vector<double> probs(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) probs[i] = fit.predict_prob(x[i]);
  ClassificationMetrics cm = confusion(probs, labels, 0.5);
  fit.accuracy = cm.accuracy;
  fit.sensitivity = cm.sensitivity;
  fit.specificity = cm.specificity;
  long p = 0;
  for (int l : labels) p += l;
  if (p > 0 && p < long(labels.size())) fit.auc = roc_auc(probs, labels).auc;
  return fit;
}

namespace {

std::string opt_str(const std::optional<double>& v) {
  return v ? csv::format_fixed(*v, 6) : std::string("undefined");
}

}  // namespace

csv::Table metrics_table(const std::vector<NamedMetrics>& models) {
  if (models.empty()) throw ValidationError("metrics_table: no models");
  csv::Table t;
  t.header = {"model",
              "mae_d",
              "r2",
              "myopia_trained_accuracy",
              "myopia_trained_sensitivity",
              "myopia_trained_specificity",
              "myopia_trained_auc",
              "myopia_threshold_accuracy",
              "myopia_threshold_sensitivity",
              "myopia_threshold_specificity",
              "myopia_threshold_auc",
              "high_trained_accuracy",
              "high_trained_sensitivity",
              "high_trained_specificity",
              "high_trained_auc",
              "high_threshold_accuracy",
              "high_threshold_sensitivity",
              "high_threshold_specificity",
              "high_threshold_auc"};

  auto row_values = [](const PairedMetrics& pm) {
    std::vector<std::optional<double>> v;
    v.push_back(pm.myopia.mae);
    v.push_back(pm.myopia.r2);
    for (const Metrics* m : {&pm.myopia, &pm.high_myopia}) {
      v.push_back(m->trained.accuracy);
      v.push_back(m->trained.sensitivity);
      v.push_back(m->trained.specificity);
      v.push_back(m->trained_auc);
      v.push_back(m->threshold.accuracy);
      v.push_back(m->threshold.sensitivity);
      v.push_back(m->threshold.specificity);
      v.push_back(m->threshold_auc);
    }
    return v;
  };

  for (const auto& nm : models) {
    std::vector<std::string> row = {nm.model};
    for (const auto& v : row_values(nm.metrics)) row.push_back(opt_str(v));
    t.rows.push_back(std::move(row));
  }

  if (models.size() > 1) {
    std::size_t ncols = t.header.size() - 1;
    std::vector<double> plain(ncols, 0.0), weighted(ncols, 0.0);
    std::vector<double> plain_n(ncols, 0.0), weighted_n(ncols, 0.0);
    for (const auto& nm : models) {
      auto vals = row_values(nm.metrics);
      for (std::size_t c = 0; c < ncols; ++c) {
        if (!vals[c]) continue;  // undefined cells are excluded from averages
        plain[c] += *vals[c];
        plain_n[c] += 1.0;
        weighted[c] += *vals[c] * double(nm.sample_count);
        weighted_n[c] += double(nm.sample_count);
      }
    }
    auto emit = [&](const std::string& name, const std::vector<double>& sums,
                    const std::vector<double>& counts) {
      std::vector<std::string> row = {name};
      for (std::size_t c = 0; c < ncols; ++c) {
        row.push_back(counts[c] > 0 ? csv::format_fixed(sums[c] / counts[c], 6)
                                    : std::string("undefined"));
      }
      t.rows.push_back(std::move(row));
    };
    emit("avg_unweighted", plain, plain_n);
    emit("avg_weighted", weighted, weighted_n);
  }
  return t;
}

}  // namespace mmpn::eval

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mmpn/csv.hpp"
#include "mmpn/refraction.hpp"

namespace mmpn::cohort {

// One annual examination. Year indices run 0..5 over the observation window.
struct Visit {
  std::string image_path;
  Refraction refraction;
  std::optional<double> al_mm;  // axial length
  std::optional<double> ct_um;  // corneal thickness
};

struct SubjectRecord {
  std::string subject_id;
  char sex = 'M';  // 'M' or 'F'
  std::int64_t age_days_at_baseline = 0;
  std::map<int, Visit> visits;  // year index -> visit
};

using Cohort = std::vector<SubjectRecord>;

// One nPm training instance: n observed years predicting the following m.
struct SequenceSample {
  std::string subject_id;
  int n = 0;
  int m = 0;
  std::vector<std::string> input_images;  // size n
  std::vector<double> input_sers;         // size n
  std::vector<double> target_sers;        // size m
  bool label_myopia_at_horizon = false;
  bool label_high_myopia_at_horizon = false;
  char sex = 'M';
  bool baseline_myopic = false;
};

struct SplitSpec {
  std::uint64_t seed = 0;
  double train_fraction = 5.0 / 6.0;
};

// The 15 valid (n, m) pairs over the six-year window, in lexicographic order.
std::vector<std::pair<int, int>> valid_nm_pairs();

// One sample per subject holding visits for years 0..n-1 and n..n+m-1;
// subjects with any gap in that range are skipped.
std::vector<SequenceSample> build_samples(const Cohort& cohort, int n, int m);

// Deterministic stratified split (stratum = baseline myopia status). Within
// each stratum the train share is round(size * train_fraction).
struct Split {
  std::vector<SequenceSample> train;
  std::vector<SequenceSample> validation;
};
Split split_samples(const std::vector<SequenceSample>& samples, const SplitSpec& spec);

// One row of the per-category summary table. Averages are arithmetic means
// over the input-year visits contributing to the row.
struct StatsRow {
  std::string label;        // "baseline", "year5", "1p1", ...
  std::string split;        // "", "train", "validation"
  std::int64_t num_images = 0;
  double mean_age_days = 0.0;
  double pct_male = 0.0;
  double mean_sphere = 0.0;
  double mean_cylinder = 0.0;
  double mean_axis = 0.0;
  double mean_ct_um = 0.0;   // NaN when no CT present
  double mean_al_mm = 0.0;   // NaN when no AL present
  double mean_ser = 0.0;
  double pct_mild_myopia = 0.0;      // low myopia band
  double pct_moderate_high = 0.0;    // SER <= -3.0
};

StatsRow stats_over_visits(const Cohort& cohort, const std::vector<SequenceSample>& samples,
                           const std::string& label, const std::string& split);
StatsRow stats_at_year(const Cohort& cohort, int year, const std::string& label);
csv::Table stats_table(const std::vector<StatsRow>& rows);

// Manifest CSV: one row per (subject, visit).
// subject_id,sex,age_days_at_baseline,visit_year,image_path,sphere_d,
// cylinder_d,axis_deg,al_mm,ct_um
Cohort load_manifest(const std::string& path);
void save_manifest(const std::string& path, const Cohort& cohort);

// Per-(n,m) sample table used to hand split results to training.
csv::Table samples_table(const std::vector<SequenceSample>& samples);
std::vector<SequenceSample> load_samples(const std::string& path);
void save_samples(const std::string& path, const std::vector<SequenceSample>& samples);

}  // namespace mmpn::cohort

#include "mmpn/cohort.hpp"

#include <algorithm>
#include <cmath>

#include "mmpn/errors.hpp"
#include "mmpn/rng.hpp"

namespace mmpn::cohort {

std::vector<std::pair<int, int>> valid_nm_pairs() {
  std::vector<std::pair<int, int>> pairs;
  for (int n = 1; n <= 5; ++n) {
    for (int m = 1; m <= 6 - n; ++m) pairs.emplace_back(n, m);
  }
  return pairs;
}

std::vector<SequenceSample> build_samples(const Cohort& cohort, int n, int m) {
  if (n < 1 || n > 5 || m < 1 || m > 6 - n) {
    throw ValidationError("build_samples: invalid (n, m) = (" + std::to_string(n) + ", " +
                          std::to_string(m) + ")");
  }
  std::vector<SequenceSample> out;
  for (const auto& subject : cohort) {
    bool complete = true;
    for (int year = 0; year < n + m && complete; ++year) {
      complete = subject.visits.count(year) > 0;
    }
    if (!complete) continue;

    SequenceSample s;
    s.subject_id = subject.subject_id;
    s.n = n;
    s.m = m;
    s.sex = subject.sex;
    for (int year = 0; year < n; ++year) {
      const Visit& v = subject.visits.at(year);
      s.input_images.push_back(v.image_path);
      s.input_sers.push_back(spherical_equivalent(v.refraction));
    }
    for (int year = n; year < n + m; ++year) {
      s.target_sers.push_back(spherical_equivalent(subject.visits.at(year).refraction));
    }
    double horizon_ser = s.target_sers.back();
    s.label_myopia_at_horizon = is_myopic(horizon_ser);
    s.label_high_myopia_at_horizon = is_high_myopic(horizon_ser);
    s.baseline_myopic = is_myopic(s.input_sers.front());
    out.push_back(std::move(s));
  }
  return out;
}

Split split_samples(const std::vector<SequenceSample>& samples, const SplitSpec& spec) {
  if (samples.size() < 12) throw ValidationError("split_samples: need at least 12 samples");
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
    throw ValidationError("split_samples: train_fraction must be in (0, 1)");
  }

  std::vector<std::size_t> strata[2];  // [0] non-myopic baseline, [1] myopic
  for (std::size_t i = 0; i < samples.size(); ++i) {
    strata[samples[i].baseline_myopic ? 1 : 0].push_back(i);
  }

  Rng rng = Rng(spec.seed).fork("split");
  std::vector<bool> in_train(samples.size(), false);
  for (auto& stratum : strata) {
    rng.shuffle(stratum);
    std::size_t k = std::size_t(std::llround(double(stratum.size()) * spec.train_fraction));
    k = std::min(k, stratum.size());
    for (std::size_t i = 0; i < k; ++i) in_train[stratum[i]] = true;
  }

  Split split;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    (in_train[i] ? split.train : split.validation).push_back(samples[i]);
  }
  return split;
}

StatsRow stats_over_visits(const Cohort& cohort, const std::vector<SequenceSample>& samples,
                           const std::string& label, const std::string& split) {
  StatsRow row;
  row.label = label;
  row.split = split;

  std::map<std::string, const SubjectRecord*> by_id;
  for (const auto& s : cohort) by_id[s.subject_id] = &s;

  double age = 0, male = 0, sph = 0, cyl = 0, axis = 0, ser = 0;
  double ct = 0, al = 0;
  std::int64_t n_ct = 0, n_al = 0, n = 0, mild = 0, modhigh = 0;
  for (const auto& sample : samples) {
    auto it = by_id.find(sample.subject_id);
    if (it == by_id.end()) {
      throw ValidationError("stats_over_visits: sample subject '" + sample.subject_id +
                            "' missing from cohort");
    }
    const SubjectRecord& subj = *it->second;
    for (int year = 0; year < sample.n; ++year) {
      const Visit& v = subj.visits.at(year);
      double s = spherical_equivalent(v.refraction);
      ++n;
      age += double(subj.age_days_at_baseline) + 365.0 * year;
      male += subj.sex == 'M' ? 1.0 : 0.0;
      sph += v.refraction.sphere;
      cyl += v.refraction.cylinder;
      axis += v.refraction.axis;
      ser += s;
      if (v.ct_um) { ct += *v.ct_um; ++n_ct; }
      if (v.al_mm) { al += *v.al_mm; ++n_al; }
      MyopiaCategory cat = classify_ser(s);
      if (cat == MyopiaCategory::LowMyopia) ++mild;
      if (cat == MyopiaCategory::ModerateMyopia || cat == MyopiaCategory::HighMyopia) ++modhigh;
    }
  }
  if (n == 0) throw ValidationError("stats_over_visits: no visits in '" + label + "'");
  row.num_images = n;
  row.mean_age_days = age / double(n);
  row.pct_male = 100.0 * male / double(n);
  row.mean_sphere = sph / double(n);
  row.mean_cylinder = cyl / double(n);
  row.mean_axis = axis / double(n);
  row.mean_ct_um = n_ct ? ct / double(n_ct) : std::nan("");
  row.mean_al_mm = n_al ? al / double(n_al) : std::nan("");
  row.mean_ser = ser / double(n);
  row.pct_mild_myopia = 100.0 * double(mild) / double(n);
  row.pct_moderate_high = 100.0 * double(modhigh) / double(n);
  return row;
}

StatsRow stats_at_year(const Cohort& cohort, int year, const std::string& label) {
  StatsRow row;
  row.label = label;

  double age = 0, male = 0, sph = 0, cyl = 0, axis = 0, ser = 0, ct = 0, al = 0;
  std::int64_t n_ct = 0, n_al = 0, n = 0, mild = 0, modhigh = 0;
  for (const auto& subj : cohort) {
    auto it = subj.visits.find(year);
    if (it == subj.visits.end()) continue;
    const Visit& v = it->second;
    double s = spherical_equivalent(v.refraction);
    ++n;
    age += double(subj.age_days_at_baseline) + 365.0 * year;
    male += subj.sex == 'M' ? 1.0 : 0.0;
    sph += v.refraction.sphere;
    cyl += v.refraction.cylinder;
    axis += v.refraction.axis;
    ser += s;
    if (v.ct_um) { ct += *v.ct_um; ++n_ct; }
    if (v.al_mm) { al += *v.al_mm; ++n_al; }
    MyopiaCategory cat = classify_ser(s);
    if (cat == MyopiaCategory::LowMyopia) ++mild;
    if (cat == MyopiaCategory::ModerateMyopia || cat == MyopiaCategory::HighMyopia) ++modhigh;
  }
  if (n == 0) throw ValidationError("stats_at_year: no visits at year " + std::to_string(year));
  row.num_images = n;
  row.mean_age_days = age / double(n);
  row.pct_male = 100.0 * male / double(n);
  row.mean_sphere = sph / double(n);
  row.mean_cylinder = cyl / double(n);
  row.mean_axis = axis / double(n);
  row.mean_ct_um = n_ct ? ct / double(n_ct) : std::nan("");
  row.mean_al_mm = n_al ? al / double(n_al) : std::nan("");
  row.mean_ser = ser / double(n);
  row.pct_mild_myopia = 100.0 * double(mild) / double(n);
  row.pct_moderate_high = 100.0 * double(modhigh) / double(n);
  return row;
}

csv::Table stats_table(const std::vector<StatsRow>& rows) {
  csv::Table t;
  t.header = {"model",  "split", "num",     "age_d",   "sex_m_pct", "ds_d",
              "dc_d",   "axis_deg", "ct_um",   "al_mm",   "ser_d",
              "mild_myopia_pct", "moderate_and_high_myopia_pct"};
  for (const auto& r : rows) {
    auto opt = [](double v) { return std::isnan(v) ? std::string() : csv::format_fixed(v, 4); };
    t.rows.push_back({r.label, r.split, std::to_string(r.num_images),
                      csv::format_fixed(r.mean_age_days, 1), csv::format_fixed(r.pct_male, 2),
                      csv::format_fixed(r.mean_sphere, 4), csv::format_fixed(r.mean_cylinder, 4),
                      csv::format_fixed(r.mean_axis, 2), opt(r.mean_ct_um), opt(r.mean_al_mm),
                      csv::format_fixed(r.mean_ser, 4), csv::format_fixed(r.pct_mild_myopia, 2),
                      csv::format_fixed(r.pct_moderate_high, 2)});
  }
  return t;
}

static const std::vector<std::string> kManifestHeader = {
    "subject_id", "sex",      "age_days_at_baseline", "visit_year", "image_path",
    "sphere_d",   "cylinder_d", "axis_deg",           "al_mm",      "ct_um"};

Cohort load_manifest(const std::string& path) {
  csv::Table t = csv::read_file(path);
  if (t.header != kManifestHeader) {
    throw ValidationError(path + ":1: bad manifest header; expected subject_id,sex,"
                          "age_days_at_baseline,visit_year,image_path,sphere_d,cylinder_d,"
                          "axis_deg,al_mm,ct_um");
  }
  std::map<std::string, SubjectRecord> subjects;
  std::vector<std::string> order;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    std::string where = path + ":" + std::to_string(i + 2);
    const std::string& id = row[0];
    if (id.empty()) throw ValidationError(where + ": empty subject_id");
    if (row[1] != "M" && row[1] != "F") {
      throw ValidationError(where + ": sex must be M or F, got '" + row[1] + "'");
    }
    std::int64_t age = csv::to_int(row[2], where + ", column age_days_at_baseline");
    if (age <= 0) throw ValidationError(where + ": age_days_at_baseline must be positive");
    std::int64_t year = csv::to_int(row[3], where + ", column visit_year");
    if (year < 0 || year > 5) throw ValidationError(where + ": visit_year must be in 0..5");

    Visit v;
    v.image_path = row[4];
    v.refraction.sphere = csv::to_double(row[5], where + ", column sphere_d");
    v.refraction.cylinder = csv::to_double(row[6], where + ", column cylinder_d");
    v.refraction.axis = csv::to_double(row[7], where + ", column axis_deg");
    if (v.refraction.axis < 0.0 || v.refraction.axis >= 180.0) {
      throw ValidationError(where + ": axis_deg must be in [0, 180)");
    }
    v.al_mm = csv::to_optional_double(row[8], where + ", column al_mm");
    v.ct_um = csv::to_optional_double(row[9], where + ", column ct_um");

    auto it = subjects.find(id);
    if (it == subjects.end()) {
      SubjectRecord rec;
      rec.subject_id = id;
      rec.sex = row[1][0];
      rec.age_days_at_baseline = age;
      it = subjects.emplace(id, std::move(rec)).first;
      order.push_back(id);
    } else {
      if (it->second.sex != row[1][0] || it->second.age_days_at_baseline != age) {
        throw ValidationError(where + ": subject '" + id +
                              "' has inconsistent sex or baseline age across rows");
      }
    }
    if (it->second.visits.count(int(year))) {
      throw ValidationError(where + ": duplicate visit_year " + std::to_string(year) +
                            " for subject '" + id + "'");
    }
    it->second.visits[int(year)] = std::move(v);
  }
  Cohort cohort;
  cohort.reserve(order.size());
  for (const auto& id : order) cohort.push_back(std::move(subjects.at(id)));
  return cohort;
}

void save_manifest(const std::string& path, const Cohort& cohort) {
  csv::Table t;
  t.header = kManifestHeader;
  for (const auto& subj : cohort) {
    for (const auto& [year, v] : subj.visits) {
      t.rows.push_back({subj.subject_id, std::string(1, subj.sex),
                        std::to_string(subj.age_days_at_baseline), std::to_string(year),
                        v.image_path, csv::format_double(v.refraction.sphere),
                        csv::format_double(v.refraction.cylinder),
                        csv::format_double(v.refraction.axis),
                        v.al_mm ? csv::format_double(*v.al_mm) : std::string(),
                        v.ct_um ? csv::format_double(*v.ct_um) : std::string()});
    }
  }
  csv::write_file(path, t);
}

csv::Table samples_table(const std::vector<SequenceSample>& samples) {
  if (samples.empty()) throw ValidationError("samples_table: no samples");
  int n = samples[0].n, m = samples[0].m;
  csv::Table t;
  t.header = {"subject_id", "sex", "baseline_myopic", "n", "m"};
  for (int i = 0; i < n; ++i) t.header.push_back("img_" + std::to_string(i));
  for (int i = 0; i < n; ++i) t.header.push_back("ser_" + std::to_string(i));
  for (int j = 0; j < m; ++j) t.header.push_back("tser_" + std::to_string(j));
  t.header.push_back("label_myopia");
  t.header.push_back("label_high_myopia");

  for (const auto& s : samples) {
    if (s.n != n || s.m != m) throw ValidationError("samples_table: mixed (n, m)");
    std::vector<std::string> row = {s.subject_id, std::string(1, s.sex),
                                    s.baseline_myopic ? "1" : "0", std::to_string(s.n),
                                    std::to_string(s.m)};
    for (const auto& p : s.input_images) row.push_back(p);
    for (double v : s.input_sers) row.push_back(csv::format_double(v));
    for (double v : s.target_sers) row.push_back(csv::format_double(v));
    row.push_back(s.label_myopia_at_horizon ? "1" : "0");
    row.push_back(s.label_high_myopia_at_horizon ? "1" : "0");
    t.rows.push_back(std::move(row));
  }
  return t;
}

std::vector<SequenceSample> load_samples(const std::string& path) {
  csv::Table t = csv::read_file(path);
  std::size_t c_n = t.col("n"), c_m = t.col("m");
  std::vector<SequenceSample> out;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    std::string where = path + ":" + std::to_string(i + 2);
    SequenceSample s;
    s.subject_id = row[t.col("subject_id")];
    const std::string& sex = row[t.col("sex")];
    if (sex != "M" && sex != "F") throw ValidationError(where + ": sex must be M or F");
    s.sex = sex[0];
    s.baseline_myopic = row[t.col("baseline_myopic")] == "1";
    s.n = int(csv::to_int(row[c_n], where + ", column n"));
    s.m = int(csv::to_int(row[c_m], where + ", column m"));
    if (s.n < 1 || s.n > 5 || s.m < 1 || s.m > 6 - s.n) {
      throw ValidationError(where + ": invalid (n, m)");
    }
    for (int k = 0; k < s.n; ++k) {
      s.input_images.push_back(row[t.col("img_" + std::to_string(k))]);
      s.input_sers.push_back(
          csv::to_double(row[t.col("ser_" + std::to_string(k))], where + ", column ser"));
    }
    for (int k = 0; k < s.m; ++k) {
      s.target_sers.push_back(
          csv::to_double(row[t.col("tser_" + std::to_string(k))], where + ", column tser"));
    }
    s.label_myopia_at_horizon = row[t.col("label_myopia")] == "1";
    s.label_high_myopia_at_horizon = row[t.col("label_high_myopia")] == "1";

    if (s.label_myopia_at_horizon != is_myopic(s.target_sers.back()) ||
        s.label_high_myopia_at_horizon != is_high_myopic(s.target_sers.back())) {
      throw ValidationError(where + ": labels inconsistent with final target SER");
    }
    out.push_back(std::move(s));
  }
  return out;
}

void save_samples(const std::string& path, const std::vector<SequenceSample>& samples) {
  csv::write_file(path, samples_table(samples));
}

}  // namespace mmpn::cohort

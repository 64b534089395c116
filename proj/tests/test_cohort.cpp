#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "mmpn/cohort.hpp"
#include "mmpn/enhance.hpp"
#include "mmpn/synth.hpp"

using namespace mmpn;
using namespace mmpn::cohort;

namespace {

Cohort toy_cohort(int subjects, int years = 6, double start = 1.0, double step = -0.5) {
  Cohort c;
  for (int i = 0; i < subjects; ++i) {
    SubjectRecord rec;
    rec.subject_id = "T" + std::to_string(i);
    rec.sex = i % 2 ? 'F' : 'M';
    rec.age_days_at_baseline = 2600 + i;
    for (int y = 0; y < years; ++y) {
      Visit v;
      v.image_path = rec.subject_id + "_y" + std::to_string(y) + ".png";
      v.refraction = {start + i * 0.01 + step * y, 0.0, 90.0};
      rec.visits[y] = v;
    }
    c.push_back(rec);
  }
  return c;
}

}  // namespace

TEST_CASE("exactly 15 (n,m) categories") {
  auto pairs = valid_nm_pairs();
  REQUIRE(pairs.size() == 15);
  std::set<std::pair<int, int>> seen(pairs.begin(), pairs.end());
  CHECK(seen.size() == 15);
  for (auto [n, m] : pairs) {
    CHECK(n >= 1);
    CHECK(n <= 5);
    CHECK(m >= 1);
    CHECK(n + m <= 6);
  }
  CHECK(seen.count({2, 4}) == 1);
  CHECK(seen.count({5, 1}) == 1);
  CHECK(seen.count({5, 2}) == 0);
}

TEST_CASE("build_samples slices subjects into nPm instances") {
  Cohort c = toy_cohort(3);
  auto samples = build_samples(c, 2, 4);
  REQUIRE(samples.size() == 3);
  const auto& s = samples[0];
  CHECK(s.input_images.size() == 2);
  CHECK(s.input_sers.size() == 2);
  CHECK(s.target_sers.size() == 4);
  CHECK(s.input_sers[0] == doctest::Approx(1.0));
  CHECK(s.input_sers[1] == doctest::Approx(0.5));
  CHECK(s.target_sers[3] == doctest::Approx(-1.5));
  // Labels come from the final horizon year.
  CHECK(s.label_myopia_at_horizon == is_myopic(-1.5));
  CHECK(s.label_high_myopia_at_horizon == is_high_myopic(-1.5));
  CHECK_FALSE(s.baseline_myopic);

  // A gap inside the needed window excludes the subject.
  Cohort gap = toy_cohort(2);
  gap[1].visits.erase(3);
  CHECK(build_samples(gap, 1, 3).size() == 1);   // year 3 is the last target
  CHECK(build_samples(gap, 1, 2).size() == 2);   // years 0..2 unaffected
  CHECK(build_samples(gap, 4, 1).size() == 1);   // year 3 is an input now

  CHECK_THROWS_AS(build_samples(c, 0, 1), ValidationError);
  CHECK_THROWS_AS(build_samples(c, 3, 4), ValidationError);
}

TEST_CASE("complete cohort yields one sample per subject in every category") {
  Cohort c = toy_cohort(7);
  for (auto [n, m] : valid_nm_pairs()) {
    CHECK(build_samples(c, n, m).size() == 7);
  }
}

TEST_CASE("sample labels always match the final target SER") {
  SynthParams p;
  p.subjects = 40;
  p.image_side = 16;
  auto cohort = synth_records(p, 5);
  for (auto [n, m] : valid_nm_pairs()) {
    for (const auto& s : build_samples(cohort, n, m)) {
      REQUIRE(s.label_myopia_at_horizon == is_myopic(s.target_sers.back()));
      REQUIRE(s.label_high_myopia_at_horizon == is_high_myopic(s.target_sers.back()));
    }
  }
}

TEST_CASE("split is deterministic, disjoint, stratified 5:1") {
  SynthParams p;
  p.subjects = 600;
  auto cohort = synth_records(p, 11);
  auto samples = build_samples(cohort, 1, 1);
  REQUIRE(samples.size() == 600);

  SplitSpec spec;
  spec.seed = 21;
  Split s1 = split_samples(samples, spec);
  Split s2 = split_samples(samples, spec);
  REQUIRE(s1.train.size() == s2.train.size());
  for (std::size_t i = 0; i < s1.train.size(); ++i) {
    REQUIRE(s1.train[i].subject_id == s2.train[i].subject_id);
  }

  CHECK(s1.train.size() + s1.validation.size() == samples.size());
  std::set<std::string> train_ids, val_ids;
  for (const auto& s : s1.train) train_ids.insert(s.subject_id);
  for (const auto& s : s1.validation) val_ids.insert(s.subject_id);
  for (const auto& id : val_ids) CHECK(train_ids.count(id) == 0);

  // Per-stratum 5:1 with rounding.
  std::size_t myopic_total = 0, myopic_train = 0;
  for (const auto& s : samples) myopic_total += s.baseline_myopic;
  for (const auto& s : s1.train) myopic_train += s.baseline_myopic;
  std::size_t expect_train = std::size_t(std::llround(double(myopic_total) * 5.0 / 6.0));
  CHECK(myopic_train == expect_train);

  // Prevalence gap between the splits stays within 2 points.
  double prev_train = double(myopic_train) / double(s1.train.size());
  double prev_val = double(myopic_total - myopic_train) / double(s1.validation.size());
  CHECK(std::fabs(prev_train - prev_val) <= 0.02);

  // Minimal single-stratum case: 12 -> 10/2 and a 6-sample stratum -> 5/1.
  Cohort mini = toy_cohort(12);
  auto mini_samples = build_samples(mini, 1, 1);
  Split ms = split_samples(mini_samples, spec);
  CHECK(ms.train.size() == 10);
  CHECK(ms.validation.size() == 2);

  CHECK_THROWS_AS(split_samples(std::vector<SequenceSample>(mini_samples.begin(),
                                                            mini_samples.begin() + 6),
                                spec),
                  ValidationError);
}

TEST_CASE("different seeds give different partitions") {
  SynthParams p;
  p.subjects = 120;
  auto samples = build_samples(synth_records(p, 11), 1, 1);
  SplitSpec a{21, 5.0 / 6.0}, b{22, 5.0 / 6.0};
  auto sa = split_samples(samples, a);
  auto sb = split_samples(samples, b);
  std::set<std::string> ia, ib;
  for (const auto& s : sa.validation) ia.insert(s.subject_id);
  for (const auto& s : sb.validation) ib.insert(s.subject_id);
  CHECK(ia != ib);
}

TEST_CASE("cohort stats compute Table-style columns") {
  Cohort c = toy_cohort(2, 6, 1.0, -0.5);
  // Give the two subjects distinct cylinders so the SER identity is
  // non-trivial.
  for (auto& [year, v] : c[0].visits) v.refraction.cylinder = -1.0;
  for (auto& [year, v] : c[1].visits) v.refraction.cylinder = -0.5;

  auto samples = build_samples(c, 2, 1);
  StatsRow row = stats_over_visits(c, samples, "2p1", "train");
  CHECK(row.num_images == 4);  // 2 subjects x 2 input years
  CHECK(row.pct_male == doctest::Approx(50.0));
  // mean SER == mean DS + mean DC / 2 (linearity of the mean).
  CHECK(row.mean_ser == doctest::Approx(row.mean_sphere + row.mean_cylinder / 2.0).epsilon(1e-12));

  StatsRow base = stats_at_year(c, 0, "baseline");
  CHECK(base.num_images == 2);
  CHECK(base.mean_age_days == doctest::Approx(2600.5));

  // Single sample: means equal the sample's own values.
  Cohort one = toy_cohort(1);
  auto s1 = build_samples(one, 1, 1);
  StatsRow r1 = stats_over_visits(one, s1, "1p1", "train");
  CHECK(r1.num_images == 1);
  CHECK(r1.mean_ser == doctest::Approx(1.0));

  // Two samples with SER +1 and -1 average to zero.
  Cohort two = toy_cohort(2, 6, 1.0, 0.0);
  for (auto& [year, v] : two[1].visits) v.refraction.sphere = -1.0;
  auto s2 = build_samples(two, 1, 1);
  StatsRow r2 = stats_over_visits(two, s2, "1p1", "");
  CHECK(r2.mean_ser == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("manifest round trip and validation diagnostics") {
  auto dir = std::filesystem::temp_directory_path() / "mmpn_cohort_test";
  std::filesystem::create_directories(dir);
  std::string path = (dir / "manifest.csv").string();

  SynthParams p;
  p.subjects = 10;
  p.visit_dropout = 0.2;
  auto cohort = synth_records(p, 3);
  save_manifest(path, cohort);
  auto back = load_manifest(path);
  REQUIRE(back.size() == cohort.size());
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    REQUIRE(back[i].subject_id == cohort[i].subject_id);
    REQUIRE(back[i].visits.size() == cohort[i].visits.size());
    for (const auto& [year, v] : cohort[i].visits) {
      const Visit& w = back[i].visits.at(year);
      REQUIRE(w.refraction.sphere == v.refraction.sphere);
      REQUIRE(w.refraction.cylinder == v.refraction.cylinder);
      REQUIRE(*w.al_mm == *v.al_mm);
    }
  }

  // Row-numbered diagnostics on schema violations.
  csv::Table t = csv::read_file(path);
  t.rows[2][5] = "not-a-number";
  csv::write_file(path, t);
  CHECK_THROWS_WITH_AS(load_manifest(path), doctest::Contains(":4"), ValidationError);

  t = csv::read_file(path);
  t.rows[2][5] = "1.0";
  t.rows[0][1] = "X";
  csv::write_file(path, t);
  CHECK_THROWS_WITH_AS(load_manifest(path), doctest::Contains("sex"), ValidationError);
}

TEST_CASE("samples table round trip") {
  Cohort c = toy_cohort(5);
  auto samples = build_samples(c, 2, 3);
  auto dir = std::filesystem::temp_directory_path() / "mmpn_cohort_test";
  std::filesystem::create_directories(dir);
  std::string path = (dir / "samples.csv").string();
  save_samples(path, samples);
  auto back = load_samples(path);
  REQUIRE(back.size() == samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    REQUIRE(back[i].subject_id == samples[i].subject_id);
    REQUIRE(back[i].input_sers == samples[i].input_sers);
    REQUIRE(back[i].target_sers == samples[i].target_sers);
    REQUIRE(back[i].input_images == samples[i].input_images);
    REQUIRE(back[i].label_myopia_at_horizon == samples[i].label_myopia_at_horizon);
  }
}

TEST_CASE("synthetic records are deterministic and myopia progresses") {
  SynthParams p;
  p.subjects = 300;
  auto a = synth_records(p, 17);
  auto b = synth_records(p, 17);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    REQUIRE(a[i].subject_id == b[i].subject_id);
    REQUIRE(a[i].sex == b[i].sex);
    for (const auto& [year, v] : a[i].visits) {
      REQUIRE(b[i].visits.at(year).refraction.sphere == v.refraction.sphere);
    }
  }

  // Prevalence at year 5 strictly above year 0.
  auto prevalence = [&](int year) {
    int myopic = 0, total = 0;
    for (const auto& r : a) {
      auto it = r.visits.find(year);
      if (it == r.visits.end()) continue;
      ++total;
      myopic += is_myopic(spherical_equivalent(it->second.refraction)) ? 1 : 0;
    }
    return double(myopic) / double(total);
  };
  CHECK(prevalence(5) > prevalence(0));

  // Zero rate, zero noise: flat trajectories.
  SynthParams flat;
  flat.subjects = 5;
  flat.slow_rate_mean = 0.0;
  flat.slow_rate_sd = 0.0;
  flat.fast_weight = 0.0;
  flat.noise_sd = 0.0;
  auto fc = synth_records(flat, 2);
  for (const auto& r : fc) {
    double s0 = spherical_equivalent(r.visits.at(0).refraction);
    for (const auto& [year, v] : r.visits) {
      REQUIRE(spherical_equivalent(v.refraction) == doctest::Approx(s0).epsilon(1e-12));
    }
  }

  CHECK_THROWS_AS(synth_records(SynthParams{.subjects = 0}, 1), ValidationError);
}

TEST_CASE("texture amplitude is monotone in myopia and rate") {
  for (double ser = -8.0; ser <= 4.0; ser += 0.5) {
    for (double rate = -0.2; rate <= 1.6; rate += 0.1) {
      double base = texture_amplitude(ser, rate);
      CHECK(texture_amplitude(ser - 0.25, rate) >= base);
      CHECK(texture_amplitude(ser, rate + 0.05) >= base);
    }
  }
}

TEST_CASE("rendered fundus is deterministic and passes the quality gate") {
  SynthParams p;
  p.subjects = 2;
  p.image_side = 64;
  auto im1 = render_fundus(p, 7, "S00001", 0, 1.0, 0.2);
  auto im2 = render_fundus(p, 7, "S00001", 0, 1.0, 0.2);
  CHECK(im1.data == im2.data);

  auto im3 = render_fundus(p, 7, "S00001", 1, 1.0, 0.2);
  CHECK(im1.data != im3.data);  // per-visit noise differs

  img::QualityThresholds t;
  for (double rate : {0.1, 0.5, 1.2}) {
    for (double ser : {2.0, 0.0, -3.0}) {
      auto im = render_fundus(p, 7, "S00002", 2, ser, rate);
      auto verdict = img::quality_filter(img::quality_metrics(im), t);
      REQUIRE(verdict.pass);
    }
  }
}

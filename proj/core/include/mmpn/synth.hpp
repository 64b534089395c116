#pragma once

#include <cstdint>
#include <string>

#include "mmpn/cohort.hpp"
#include "mmpn/image.hpp"

namespace mmpn::cohort {

// Synthetic longitudinal cohort. Each subject gets a baseline SER, a
// per-subject annual progression rate drawn from a slow/fast mixture, and
// six annual visits with rendered fundus images. The retinal tessellation
// contrast in the rendering is a monotone function of (current SER,
// progression rate), so the images carry a learnable correlate of the
// future trajectory.
struct SynthParams {
  int subjects = 600;
  int years = 6;
  int image_side = 64;
  double baseline_ser_mean = 1.0;
  double baseline_ser_sd = 1.0;
  double slow_rate_mean = 0.2;   // D/yr myopic shift
  double slow_rate_sd = 0.1;
  double fast_rate_mean = 1.0;
  double fast_rate_sd = 0.2;
  double fast_weight = 0.3;      // mixture weight of the fast component
  double noise_sd = 0.1;         // observation noise on annual SER
  double visit_dropout = 0.0;    // probability a non-baseline visit is missing
};

// Generates records only; image_path fields name images as
// "<subject_id>_y<year>.png" relative to an image directory. When `rates`
// is given it receives each subject's latent progression rate.
Cohort synth_records(const SynthParams& params, std::uint64_t seed,
                     std::vector<double>* rates = nullptr);

// Renders the fundus image for one visit. Deterministic in
// (seed, subject_id, year); independent of every other visit.
img::ImageU8 render_fundus(const SynthParams& params, std::uint64_t seed,
                           const std::string& subject_id, int year, double current_ser,
                           double rate);

// Full generation: records plus PNG files under image_dir. Returns the
// cohort with image paths pointing into image_dir.
Cohort synth_cohort(const SynthParams& params, std::uint64_t seed, const std::string& image_dir);

// The tessellation contrast encoded into a rendering; monotone
// nondecreasing in both the myopia level (-ser) and the rate.
double texture_amplitude(double ser, double rate);

}  // namespace mmpn::cohort

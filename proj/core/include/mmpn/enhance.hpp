#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mmpn/image.hpp"
#include "mmpn/rng.hpp"

namespace mmpn::img {

// Quality gate statistics over the grey-level histogram of a raw image.
struct QualityMetrics {
  double hp_fraction = 0.0;   // pixels brighter than min(mean + 3*std, 255)
  double lp_fraction = 0.0;   // pixels darker than max(mean - std, 5)
  double rb_difference = 0.0; // sum(red) - sum(blue), raw grey-sum units
};

enum class QualityFailure { F1_bright, F2_dark, F3_color };

struct QualityVerdict {
  bool pass = true;
  std::vector<QualityFailure> failures;
};

std::string to_string(QualityFailure f);
std::string failures_to_string(const QualityVerdict& v);

struct QualityThresholds {
  double hp_max = 0.02;  // F1 when hp_fraction exceeds this
  double lp_max = 0.30;  // F2 when lp_fraction exceeds this
  double ys_min = 0.0;   // F3 when rb_difference falls below this
};

// Enhancement pipeline configuration. sigma <= 0 selects the side-scaled
// default sigma = side / 32.
struct EnhanceConfig {
  int side = 64;
  double sigma = 0.0;
  double boost_gain = 4.0;
  int clahe_tiles = 8;
  double clahe_clip = 2.0;  // multiple of the uniform histogram bin height
  QualityThresholds thresholds;
  // Alternate reading of the boost step: subtract the normalized boosted
  // image from the original instead of emitting it directly.
  bool subtract_variant = false;
};

// Center square crop followed by a bilinear resize to side x side.
ImageU8 crop_scale(const ImageU8& im, int side);

// BT.601 luma per pixel.
std::vector<double> grey(const ImageU8& im);

QualityMetrics quality_metrics(const ImageU8& im);
QualityVerdict quality_filter(const QualityMetrics& m, const QualityThresholds& t);

// Separable Gaussian, kernel radius ceil(3*sigma), symmetric reflection at
// the borders, kernel normalized to sum 1. Operates per channel.
ImageF gaussian_blur(const ImageF& im, double sigma);

// Unsharp boost: out = im + gain * (im - blur(im)), then min-max normalized
// to [0, 1] over all channels jointly. A degenerate range maps to 0.5.
ImageF high_boost(const ImageF& im, double sigma, double gain = 4.0);

// CLAHE on the CIELAB L channel; a/b pass through. tiles x tiles grid,
// clip expressed as a multiple of the uniform bin height.
ImageU8 clahe_l(const ImageU8& im, double clip = 2.0, int tiles = 8);

// Exposed for tests: CLAHE over one plane with values in [lo, hi].
std::vector<double> clahe_plane(const std::vector<double>& plane, int width, int height,
                                double lo, double hi, double clip, int tiles);

// Independent 1/2-probability horizontal and vertical flips.
ImageF augment_flip(const ImageF& im, Rng& rng);
ImageF flip_horizontal(const ImageF& im);
ImageF flip_vertical(const ImageF& im);

struct PreprocessResult {
  std::optional<ImageF> image;  // present iff verdict.pass
  QualityMetrics metrics;
  QualityVerdict verdict;
};

// crop/scale -> quality gate -> CLAHE(L) -> high boost -> [0,1] image.
// Deterministic; augmentation is applied at training time, not here.
PreprocessResult preprocess(const ImageU8& im, const EnhanceConfig& cfg);

}  // namespace mmpn::img

#include "mmpn/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "mmpn/errors.hpp"
#include "mmpn/png_io.hpp"
#include "mmpn/rng.hpp"

namespace mmpn::cohort {

namespace {

double smoothstep(double edge0, double edge1, double x) {
  double t = std::clamp((x - edge0) / (edge1 - edge0), 0.0, 1.0);
  return t * t * (3.0 - 2.0 * t);
}

std::string subject_name(int index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "S%05d", index);
  return buf;
}

// Subject-level eye geometry, stable across that subject's visits.
struct EyeGeometry {
  double disc_x, disc_y;       // optic disc center, unit coords
  double macula_x, macula_y;
  double tex_phase_x, tex_phase_y;
  double vessel_angle[5];
  double vessel_len[5];
  double vessel_bow[5];
};

EyeGeometry make_geometry(Rng rng) {
  EyeGeometry g;
  g.disc_x = 0.30 + rng.uniform(-0.02, 0.02);
  g.disc_y = 0.48 + rng.uniform(-0.02, 0.02);
  g.macula_x = 0.62 + rng.uniform(-0.02, 0.02);
  g.macula_y = 0.52 + rng.uniform(-0.02, 0.02);
  g.tex_phase_x = rng.uniform(0.0, 2.0 * M_PI);
  g.tex_phase_y = rng.uniform(0.0, 2.0 * M_PI);
  // Arcades fan out from the disc; two superior, two inferior, one temporal.
  const double base[5] = {-1.1, -0.45, 0.0, 0.45, 1.1};
  for (int i = 0; i < 5; ++i) {
    g.vessel_angle[i] = base[i] + rng.uniform(-0.15, 0.15);
    g.vessel_len[i] = 0.55 + rng.uniform(0.0, 0.2);
    g.vessel_bow[i] = rng.uniform(-0.12, 0.12);
  }
  return g;
}

}  // namespace

double texture_amplitude(double ser, double rate) {
  double rate_term = std::clamp(rate / 1.5, 0.0, 1.0);
  double myopia_term = std::clamp(-ser / 6.0, 0.0, 1.0);
  return std::clamp(0.15 + 0.55 * rate_term + 0.15 * myopia_term, 0.0, 1.0);
}

img::ImageU8 render_fundus(const SynthParams& params, std::uint64_t seed,
                           const std::string& subject_id, int year, double current_ser,
                           double rate) {
  int side = params.image_side;
  if (side < 16) throw ValidationError("render_fundus: image_side must be >= 16");

  Rng root(seed);
  EyeGeometry geom = make_geometry(root.fork("synth.geom").fork(subject_id));
  Rng visit_rng = root.fork("synth.visit").fork(subject_id).fork("y", std::uint64_t(year));

  double amplitude = texture_amplitude(current_ser, rate);
  double wavelength = double(side) / 10.0;

  img::ImageF canvas = img::make_f(side, side);
  double cx = 0.5 * side, cy = 0.5 * side;
  double fov_radius = 0.52 * side;

  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      double dx = x - cx, dy = y - cy;
      double r = std::sqrt(dx * dx + dy * dy);
      double fov = smoothstep(fov_radius, fov_radius - 1.5, r);
      if (fov <= 0.0) continue;

      // Fundus background with a mild vignette.
      double vignette = 1.0 - 0.22 * (r / fov_radius) * (r / fov_radius);
      double red = 190.0, green = 95.0, blue = 45.0;

      // Tessellation: the progression signal.
      double tess = std::sin(2.0 * M_PI * x / wavelength + geom.tex_phase_x) *
                    std::sin(2.0 * M_PI * y / wavelength + geom.tex_phase_y);
      double mod = 1.0 + 0.35 * amplitude * tess;
      red *= mod;
      green *= mod;
      blue *= 1.0 + 0.20 * amplitude * tess;

      // Macula: darker, smooth falloff.
      double mdx = x - geom.macula_x * side, mdy = y - geom.macula_y * side;
      double mdist = std::sqrt(mdx * mdx + mdy * mdy);
      double mshade = 1.0 - 0.35 * smoothstep(0.13 * side, 0.04 * side, mdist);
      red *= mshade;
      green *= mshade;
      blue *= mshade;

      // Optic disc: pale rim with a brighter small core.
      double ddx = (x - geom.disc_x * side) / (0.090 * side);
      double ddy = (y - geom.disc_y * side) / (0.100 * side);
      double ddist = std::sqrt(ddx * ddx + ddy * ddy);
      double rim = smoothstep(1.0, 0.85, ddist);
      double core = smoothstep(0.55, 0.40, ddist);
      red = red * (1.0 - rim) + 225.0 * rim;
      green = green * (1.0 - rim) + 190.0 * rim;
      blue = blue * (1.0 - rim) + 135.0 * rim;
      red = red * (1.0 - core) + 250.0 * core;
      green = green * (1.0 - core) + 235.0 * core;
      blue = blue * (1.0 - core) + 185.0 * core;

      canvas.at(x, y, 0) = red * vignette * fov;
      canvas.at(x, y, 1) = green * vignette * fov;
      canvas.at(x, y, 2) = blue * vignette * fov;
    }
  }

  // Vessel arcades: quadratic curves out of the disc, tapering width.
  double dcx = geom.disc_x * side, dcy = geom.disc_y * side;
  for (int i = 0; i < 5; ++i) {
    double angle = geom.vessel_angle[i];
    double len = geom.vessel_len[i] * side;
    double ex = dcx + std::cos(angle) * len;
    double ey = dcy + std::sin(angle) * len;
    double mx = 0.5 * (dcx + ex) - std::sin(angle) * geom.vessel_bow[i] * side;
    double my = 0.5 * (dcy + ey) + std::cos(angle) * geom.vessel_bow[i] * side;
    int steps = side * 3;
    for (int s = 0; s <= steps; ++s) {
      double t = double(s) / steps;
      double u = 1.0 - t;
      double px = u * u * dcx + 2 * u * t * mx + t * t * ex;
      double py = u * u * dcy + 2 * u * t * my + t * t * ey;
      double w = (1.8 - 1.1 * t) * side / 64.0;
      int x0 = std::max(0, int(px - w - 1)), x1 = std::min(side - 1, int(px + w + 1));
      int y0 = std::max(0, int(py - w - 1)), y1 = std::min(side - 1, int(py + w + 1));
      for (int yy = y0; yy <= y1; ++yy) {
        for (int xx = x0; xx <= x1; ++xx) {
          double d = std::hypot(xx - px, yy - py);
          double a = smoothstep(w + 0.6, w - 0.6, d);
          if (a <= 0.0) continue;
          canvas.at(xx, yy, 0) = canvas.at(xx, yy, 0) * (1 - a) + 120.0 * a;
          canvas.at(xx, yy, 1) = canvas.at(xx, yy, 1) * (1 - a) + 35.0 * a;
          canvas.at(xx, yy, 2) = canvas.at(xx, yy, 2) * (1 - a) + 25.0 * a;
        }
      }
    }
  }

  // Sensor noise inside the field of view.
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      double dx = x - cx, dy = y - cy;
      if (std::sqrt(dx * dx + dy * dy) >= fov_radius) continue;
      for (int c = 0; c < 3; ++c) {
        canvas.at(x, y, c) = std::clamp(canvas.at(x, y, c) + visit_rng.normal(0.0, 2.0), 0.0, 255.0);
      }
    }
  }
  return img::to_u8(canvas);
}

Cohort synth_records(const SynthParams& params, std::uint64_t seed, std::vector<double>* rates) {
  if (params.subjects < 1) throw ValidationError("synth_records: subjects must be >= 1");
  if (params.years < 1 || params.years > 6) {
    throw ValidationError("synth_records: years must be in 1..6");
  }
  if (params.noise_sd < 0.0 || params.visit_dropout < 0.0 || params.visit_dropout >= 1.0) {
    throw ValidationError("synth_records: bad noise/dropout parameters");
  }
  if (!(params.fast_weight >= 0.0 && params.fast_weight <= 1.0)) {
    throw ValidationError("synth_records: fast_weight must be in [0, 1]");
  }

  Rng root(seed);
  Cohort cohort;
  cohort.reserve(std::size_t(params.subjects));
  if (rates) rates->clear();
  for (int i = 0; i < params.subjects; ++i) {
    std::string id = subject_name(i);
    Rng rng = root.fork("synth.subject").fork(id);

    SubjectRecord rec;
    rec.subject_id = id;
    rec.sex = rng.bernoulli(0.5) ? 'M' : 'F';
    rec.age_days_at_baseline =
        std::max<std::int64_t>(2200, std::llround(rng.normal(2614.0, 150.0)));

    bool fast = rng.bernoulli(params.fast_weight);
    double rate = fast ? rng.normal(params.fast_rate_mean, params.fast_rate_sd)
                       : rng.normal(params.slow_rate_mean, params.slow_rate_sd);
    if (rates) rates->push_back(rate);
    double ser = rng.normal(params.baseline_ser_mean, params.baseline_ser_sd);

    for (int year = 0; year < params.years; ++year) {
      if (year > 0) {
        ser = ser - rate + (params.noise_sd > 0.0 ? rng.normal(0.0, params.noise_sd) : 0.0);
      }
      bool present = year == 0 || !rng.bernoulli(params.visit_dropout);
      // Visit-level measurement details are drawn even for missing visits so
      // the stream position (and thus every later value) is dropout-invariant.
      double cyl = std::clamp(rng.normal(-0.5, 0.25), -3.0, 0.0);
      double axis = rng.uniform(0.0, 180.0);
      double al = 23.0 - 0.35 * ser + rng.normal(0.0, 0.15);
      double ct = rng.normal(540.0, 20.0);
      if (!present) continue;

      Visit v;
      v.image_path = id + "_y" + std::to_string(year) + ".png";
      v.refraction.cylinder = cyl;
      v.refraction.axis = axis;
      v.refraction.sphere = ser - cyl / 2.0;  // so SER comes out as simulated
      v.al_mm = al;
      v.ct_um = ct;
      rec.visits[year] = std::move(v);
    }
    cohort.push_back(std::move(rec));
  }
  return cohort;
}

Cohort synth_cohort(const SynthParams& params, std::uint64_t seed, const std::string& image_dir) {
  std::vector<double> rates;
  Cohort cohort = synth_records(params, seed, &rates);
  std::filesystem::create_directories(image_dir);

  for (std::size_t i = 0; i < cohort.size(); ++i) {
    auto& rec = cohort[i];
    double rate = rates[i];
    for (auto& [year, visit] : rec.visits) {
      double ser = spherical_equivalent(visit.refraction);
      img::ImageU8 im = render_fundus(params, seed, rec.subject_id, year, ser, rate);
      std::string path = (std::filesystem::path(image_dir) / visit.image_path).string();
      img::write_png(path, im);
      visit.image_path = path;
    }
  }
  return cohort;
}

}  // namespace mmpn::cohort

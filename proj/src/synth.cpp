// Copyright 2026 The fimesh Authors
// SPDX-License-Identifier: Apache-2.0

#include "fimesh/synth.hpp"

#include <Eigen/Core>
#include <cmath>
#include <iterator>
#include <random>
#include <vector>

#include "fimesh/common.hpp"
#include "fimesh/rng.hpp"
#include "fimesh/trimesh.hpp"

namespace fimesh {

SynthPattern synth_pattern_from_name(const std::string& name) {
  if (name == "natural") return SynthPattern::Natural;
  if (name == "checker") return SynthPattern::Checker;
  if (name == "gradient") return SynthPattern::Gradient;
  throw ConfigError("unknown synth pattern: " + name);
}

namespace {

// Natural frames are a terraced landscape: one smooth random height field
// per frame pushed through fixed staircase palettes, so most of each frame
// is flat plateau and the remaining energy sits in sharp risers along
// level-set contours. A stationary random-phase wave mix carries no fine
// detail that survives coarse sampling, so on such content every
// super-resolver collapses to plain interpolation. Terraces are the
// opposite regime: the riser levels are the same in every frame, which
// makes the value-to-terrain map a fixed invertible curve a model can
// learn once and apply everywhere, re-localizing each riser inside the
// coarse cell that smeared it. The color channels share the height field
// and riser centers and differ only in plateau heights, like a palette,
// so each riser is observed three times at different contrasts.
struct Octave {
  double freq;  // angular frequency along a random axis, radians^-1
  double amp;
  int waves;
};

constexpr Octave kBase[] = {{3.0, 0.7, 2}, {5.0, 1.0, 2}};

// staircase applied to the normalized field; centers are fixed across
// frames and channels on purpose (see above)
constexpr double kRiserCenters[] = {0.35, 0.65};
constexpr double kPlateauSlope[] = {0.15, 0.12, 0.18};
constexpr double kRiserAmps[][2] = {{0.55, 0.45}, {0.35, 0.65}, {0.65, 0.35}};
// tanh slope in normalized field units; spatial transition width is
// 4 / (kRiserSharpness * |grad u|), about two degrees for this ladder
constexpr double kRiserSharpness = 40.0;

// monotone staircase on [0, 1], rescaled to hit 0 and 1 at the ends
double terrace_curve(int channel, double u) {
  const int c = channel % 3;
  double y = kPlateauSlope[c] * u;
  double y0 = 0.0, y1 = kPlateauSlope[c];
  for (std::size_t j = 0; j < std::size(kRiserCenters); ++j) {
    const auto step = [&](double v) {
      return kRiserAmps[c][j] * 0.5 *
             (1.0 + std::tanh(kRiserSharpness * (v - kRiserCenters[j])));
    };
    y += step(u);
    y0 += step(0.0);
    y1 += step(1.0);
  }
  return (y - y0) / (y1 - y0);
}

struct Wave {
  Eigen::Vector3d dir;
  double freq, amp, phase;
};

template <std::size_t N>
std::vector<Wave> draw_waves(std::mt19937_64& rng, const Octave (&ladder)[N]) {
  std::vector<Wave> waves;
  for (const Octave& o : ladder) {
    for (int k = 0; k < o.waves; ++k) {
      Wave w;
      double a, b, u, v;
      normal_pair(rng, a, b);
      normal_pair(rng, u, v);
      w.dir = Eigen::Vector3d(a, b, u).normalized();
      w.freq = o.freq;
      w.amp = o.amp * (0.75 + 0.5 * uniform_unit(rng));
      w.phase = uniform_range(rng, 0.0, 2.0 * 3.14159265358979323846);
      waves.push_back(w);
    }
  }
  return waves;
}

double wave_sum(const std::vector<Wave>& waves, const Eigen::Vector3d& p) {
  double s = 0.0;
  for (const Wave& w : waves) s += w.amp * std::sin(w.freq * w.dir.dot(p) + w.phase);
  return s;
}

EquirectImage natural_frame(int width, int channels, std::uint64_t seed) {
  const int height = width / 2;
  EquirectImage img = make_image(width, height, channels);

  auto rng = make_stream(seed, "synth/frame");
  const std::vector<Wave> base = draw_waves(rng, kBase);

  double lo = 1e300, hi = -1e300;
  Eigen::VectorXd field(static_cast<std::int64_t>(width) * height);
  for (int y = 0; y < height; ++y) {
    const double lat = pixel_lat(y, height);
    for (int x = 0; x < width; ++x) {
      const Eigen::Vector3d p = latlon_to_unit(lat, pixel_lon(x, width));
      const double s = wave_sum(base, p);
      field[static_cast<std::int64_t>(y) * width + x] = s;
      lo = std::min(lo, s);
      hi = std::max(hi, s);
    }
  }
  const double span = hi > lo ? hi - lo : 1.0;
  for (int c = 0; c < channels; ++c)
    img.values.row(c) = field.unaryExpr([&](double s) {
      return 0.05 + 0.9 * terrace_curve(c, (s - lo) / span);
    }).transpose();
  return img;
}

}  // namespace

EquirectImage synth_frame(SynthPattern pattern, int width, int channels,
                          std::uint64_t seed) {
  if (width <= 0 || width % 2 != 0) throw ConfigError("synth width must be even");
  const int height = width / 2;
  switch (pattern) {
    case SynthPattern::Natural:
      return natural_frame(width, channels, seed);
    case SynthPattern::Checker: {
      EquirectImage img = make_image(width, height, channels);
      const int tiles = 12;  // tiles around the equator
      for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
          const int v = (x * tiles / width + y * tiles / width) % 2;
          for (int c = 0; c < channels; ++c) img.at(c, x, y) = v;
        }
      return img;
    }
    case SynthPattern::Gradient: {
      EquirectImage img = make_image(width, height, channels);
      for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
          for (int c = 0; c < channels; ++c)
            img.at(c, x, y) = (y + 0.5) / height;
      return img;
    }
  }
  throw ConfigError("unknown synth pattern");
}

}  // namespace fimesh

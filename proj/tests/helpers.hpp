#pragma once

#include <cmath>
#include <complex>
#include <numbers>

#include "freqshort/rng.hpp"
#include "freqshort/spectrum.hpp"

namespace testutil {

inline freqshort::Image random_image(int c, int side, std::uint64_t seed) {
  freqshort::Rng rng(seed);
  freqshort::Image img(c, side, side);
  for (double& v : img.data) v = rng.uniform();
  return img;
}

// Direct double sum, centered so that row index i holds frequency i - H/2.
inline freqshort::Spectrum naive_dft(const freqshort::Image& img) {
  const int h = img.height, w = img.width;
  freqshort::Spectrum out(img.channels, h, w);
  for (int c = 0; c < img.channels; ++c) {
    for (int u = -h / 2; u < h - h / 2; ++u) {
      for (int v = -w / 2; v < w - w / 2; ++v) {
        std::complex<double> acc = 0.0;
        for (int y = 0; y < h; ++y) {
          for (int x = 0; x < w; ++x) {
            const double ang = -2.0 * std::numbers::pi * (static_cast<double>(u) * y / h + static_cast<double>(v) * x / w);
            acc += img.at(c, y, x) * std::polar(1.0, ang);
          }
        }
        out.at(c, u, v) = acc;
      }
    }
  }
  return out;
}

inline double max_abs_diff(const freqshort::Image& a, const freqshort::Image& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) worst = std::max(worst, std::abs(a.data[i] - b.data[i]));
  return worst;
}

}  // namespace testutil

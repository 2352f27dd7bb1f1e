#include "freqshort/render.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace freqshort {

namespace {

using Rgb = std::array<std::uint8_t, 3>;

Raster blank(int height, int width, Rgb fill) {
  Raster r{3, height, width, {}};
  r.pixels.resize(static_cast<std::size_t>(height) * width * 3);
  for (std::size_t i = 0; i < r.pixels.size(); i += 3) {
    r.pixels[i] = fill[0];
    r.pixels[i + 1] = fill[1];
    r.pixels[i + 2] = fill[2];
  }
  return r;
}

void put(Raster& r, int y, int x, Rgb c) {
  if (y < 0 || x < 0 || y >= r.height || x >= r.width) return;
  const std::size_t at = (static_cast<std::size_t>(y) * r.width + x) * 3;
  r.pixels[at] = c[0];
  r.pixels[at + 1] = c[1];
  r.pixels[at + 2] = c[2];
}

void fill_rect(Raster& r, int y0, int x0, int h, int w, Rgb c) {
  for (int y = y0; y < y0 + h; ++y)
    for (int x = x0; x < x0 + w; ++x) put(r, y, x, c);
}

std::uint8_t lerp8(double a, double b, double t) { return static_cast<std::uint8_t>(std::lround(a + (b - a) * t)); }

Rgb diverging(double v, double limit) {
  const double t = limit > 0 ? std::clamp(v / limit, -1.0, 1.0) : 0.0;
  if (t >= 0) return {lerp8(128, 200, t), lerp8(128, 20, t), lerp8(128, 20, t)};
  return {lerp8(128, 20, -t), lerp8(128, 40, -t), lerp8(128, 200, -t)};
}

// 3x5 glyphs for the characters needed to print signed decimals.
const std::array<std::uint16_t, 13> kGlyphs = {
    0x7B6F, 0x2C97, 0x73E7, 0x72CF, 0x5BC9, 0x79CF, 0x79EF, 0x7249, 0x7BEF, 0x7BCF,  // 0-9
    0x01C0,                                                                          // -
    0x0002,                                                                          // .
    0x0000,                                                                          // space
};

int glyph_index(char ch) {
  if (ch >= '0' && ch <= '9') return ch - '0';
  if (ch == '-') return 10;
  if (ch == '.') return 11;
  return 12;
}

void draw_text(Raster& r, int y0, int x0, const std::string& text, int px, Rgb c) {
  for (std::size_t k = 0; k < text.size(); ++k) {
    const std::uint16_t g = kGlyphs[static_cast<std::size_t>(glyph_index(text[k]))];
    for (int row = 0; row < 5; ++row) {
      for (int col = 0; col < 3; ++col) {
        if (g & (1u << (14 - (row * 3 + col)))) {
          fill_rect(r, y0 + row * px, x0 + static_cast<int>(k) * 4 * px + col * px, px, px, c);
        }
      }
    }
  }
}

void draw_line(Raster& r, double y0, double x0, double y1, double x1, Rgb c) {
  const int steps = static_cast<int>(std::ceil(std::max(std::abs(y1 - y0), std::abs(x1 - x0)))) + 1;
  for (int s = 0; s <= steps; ++s) {
    const double t = static_cast<double>(s) / steps;
    const int y = static_cast<int>(std::lround(y0 + (y1 - y0) * t));
    const int x = static_cast<int>(std::lround(x0 + (x1 - x0) * t));
    put(r, y, x, c);
    put(r, y + 1, x, c);
  }
}

void check_map(const std::vector<double>& values, int side) {
  if (side <= 0 || values.size() != static_cast<std::size_t>(side) * side) {
    throw DimensionError("render: map of " + std::to_string(values.size()) + " values is not " + std::to_string(side) +
                         "x" + std::to_string(side));
  }
}

}  // namespace

Raster render_mask(const FrequencyMask& mask, int scale) {
  const int side = mask.side();
  Raster r{1, side * scale, side * scale, {}};
  r.pixels.assign(static_cast<std::size_t>(r.height) * r.width, 0);
  const auto& bits = mask.bits();
  for (int y = 0; y < r.height; ++y)
    for (int x = 0; x < r.width; ++x)
      if (bits[static_cast<std::size_t>(y / scale) * side + x / scale]) r.pixels[static_cast<std::size_t>(y) * r.width + x] = 255;
  return r;
}

Raster render_diverging(const std::vector<double>& values, int side, double limit, int scale) {
  check_map(values, side);
  Raster r = blank(side * scale, side * scale, {0, 0, 0});
  for (int i = 0; i < side; ++i)
    for (int j = 0; j < side; ++j)
      fill_rect(r, i * scale, j * scale, scale, scale, diverging(values[static_cast<std::size_t>(i) * side + j], limit));
  return r;
}

Raster render_scaled(const std::vector<double>& values, int side, int scale) {
  check_map(values, side);
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  const double span = *hi - *lo;
  Raster r{1, side * scale, side * scale, {}};
  r.pixels.resize(static_cast<std::size_t>(r.height) * r.width);
  for (int y = 0; y < r.height; ++y) {
    for (int x = 0; x < r.width; ++x) {
      const double v = values[static_cast<std::size_t>(y / scale) * side + x / scale];
      r.pixels[static_cast<std::size_t>(y) * r.width + x] =
          span > 0 ? static_cast<std::uint8_t>(std::lround(255.0 * (v - *lo) / span)) : 0;
    }
  }
  return r;
}

Raster render_relative_confusion(const RelativeConfusionMatrix& rc, int cell) {
  const int n = static_cast<int>(rc.delta.size());
  if (n == 0) throw std::invalid_argument("render: empty relative confusion matrix");
  const int margin = 4;
  Raster r = blank(n * cell + 2 * margin, n * cell + 2 * margin, {255, 255, 255});
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double v = rc.delta[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      fill_rect(r, margin + i * cell + 1, margin + j * cell + 1, cell - 2, cell - 2, diverging(v, 100.0));
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.1f", v == 0 ? 0.0 : v);
      const std::string text(buf);
      const int px = std::max(1, std::min(cell / 24, (cell - 4) / (4 * static_cast<int>(text.size()))));
      const int tw = static_cast<int>(text.size()) * 4 * px - px;
      draw_text(r, margin + i * cell + (cell - 5 * px) / 2, margin + j * cell + (cell - tw) / 2, text, px,
                {255, 255, 255});
    }
  }
  return r;
}

Raster render_line_chart(const std::vector<std::vector<double>>& series, double y_min, double y_max, int width,
                         int height) {
  if (!(y_max > y_min)) throw std::invalid_argument("render: line chart needs y_max > y_min");
  static const std::array<Rgb, 6> palette = {
      Rgb{31, 119, 180}, Rgb{255, 127, 14}, Rgb{44, 160, 44}, Rgb{214, 39, 40}, Rgb{148, 103, 189}, Rgb{140, 86, 75}};
  Raster r = blank(height, width, {255, 255, 255});
  const int left = 30, right = 10, top = 10, bottom = 20;
  const int pw = width - left - right, ph = height - top - bottom;
  draw_line(r, top, left, top + ph, left, {0, 0, 0});
  draw_line(r, top + ph, left, top + ph, left + pw, {0, 0, 0});
  for (int k = 1; k < 4; ++k) {
    const double y = top + ph - ph * k / 4.0;
    for (int x = left; x < left + pw; x += 4) put(r, static_cast<int>(y), x, {200, 200, 200});
  }
  std::size_t longest = 0;
  for (const auto& s : series) longest = std::max(longest, s.size());
  if (longest < 2) return r;
  const auto to_y = [&](double v) { return top + ph * (1.0 - (std::clamp(v, y_min, y_max) - y_min) / (y_max - y_min)); };
  const auto to_x = [&](std::size_t i) { return left + pw * static_cast<double>(i) / static_cast<double>(longest - 1); };
  for (std::size_t s = 0; s < series.size(); ++s) {
    const Rgb c = palette[s % palette.size()];
    for (std::size_t i = 1; i < series[s].size(); ++i) {
      draw_line(r, to_y(series[s][i - 1]), to_x(i - 1), to_y(series[s][i]), to_x(i), c);
    }
  }
  return r;
}

}  // namespace freqshort

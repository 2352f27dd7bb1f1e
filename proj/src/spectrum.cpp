#include "freqshort/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "fft.hpp"

namespace freqshort {

namespace {

using cd = std::complex<double>;

void require_square(int channels, int height, int width, const char* what) {
  if (channels <= 0 || height <= 0 || width <= 0) {
    throw DimensionError(std::string(what) + ": empty input");
  }
  if (height != width) {
    std::ostringstream os;
    os << what << ": expected a square input, got " << height << "x" << width;
    throw DimensionError(os.str());
  }
}

int wrap_index(int i, int n) { return ((i % n) + n) % n; }

// Row-major 2D transform of one plane in place.
void transform_plane(std::span<cd> plane, int height, int width, bool inverse) {
  std::vector<cd> column(static_cast<std::size_t>(height));
  for (int y = 0; y < height; ++y) {
    detail::fft_inplace(plane.subspan(static_cast<std::size_t>(y) * width, width), inverse);
  }
  for (int x = 0; x < width; ++x) {
    for (int y = 0; y < height; ++y) column[y] = plane[static_cast<std::size_t>(y) * width + x];
    detail::fft_inplace(column, inverse);
    for (int y = 0; y < height; ++y) plane[static_cast<std::size_t>(y) * width + x] = column[y];
  }
}

}  // namespace

cd& Spectrum::at(int c, int u, int v) {
  return data[c * plane() + static_cast<std::size_t>(u + height / 2) * width + (v + width / 2)];
}

const cd& Spectrum::at(int c, int u, int v) const {
  return data[c * plane() + static_cast<std::size_t>(u + height / 2) * width + (v + width / 2)];
}

double FrequencyCoord::radius() const { return std::hypot(u, v); }

FrequencyCoord CenteredGrid::partner(FrequencyCoord f) const {
  auto reflect = [this](int a) {
    int p = -a;
    if (p >= hi()) p -= side;
    return p;
  };
  return {reflect(f.u), reflect(f.v)};
}

double radius_of(FrequencyCoord f, RadiusMetric metric) {
  if (metric == RadiusMetric::chebyshev) return std::max(std::abs(f.u), std::abs(f.v));
  return f.radius();
}

// ---------------------------------------------------------------------------
// FrequencyMask

FrequencyMask::FrequencyMask(int side, std::vector<bool> bits) : side_(side), bits_(std::move(bits)) {
  const CenteredGrid grid{side_};
  if (side_ <= 0 || bits_.size() != grid.size()) {
    throw DimensionError("FrequencyMask: bit count does not match side*side");
  }
  for (std::size_t i = 0; i < bits_.size(); ++i) {
    const FrequencyCoord f = grid.coord(i);
    if (bits_[i] != bits_[grid.index(grid.partner(f))]) {
      std::ostringstream os;
      os << "FrequencyMask: not point-symmetric at (" << f.u << "," << f.v << ")";
      throw std::invalid_argument(os.str());
    }
  }
}

FrequencyMask FrequencyMask::all(int side, bool keep) {
  return FrequencyMask(side, std::vector<bool>(CenteredGrid{side}.size(), keep));
}

std::size_t FrequencyMask::count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), true));
}

FrequencyMask FrequencyMask::complement() const {
  std::vector<bool> flipped(bits_.size());
  for (std::size_t i = 0; i < bits_.size(); ++i) flipped[i] = !bits_[i];
  return FrequencyMask(side_, std::move(flipped));
}

// ---------------------------------------------------------------------------
// Bands and masks

int BandPartition::band_of(FrequencyCoord f) const {
  const double r = radius_of(f, metric);
  for (int k = 0; k < n_bands(); ++k) {
    if (r < thresholds[static_cast<std::size_t>(k)]) return k;
  }
  return n_bands() - 1;
}

std::vector<std::size_t> BandPartition::member_counts() const {
  std::vector<std::size_t> counts(static_cast<std::size_t>(n_bands()), 0);
  const CenteredGrid grid{side};
  for (std::size_t i = 0; i < grid.size(); ++i) ++counts[static_cast<std::size_t>(band_of(grid.coord(i)))];
  return counts;
}

BandPartition band_partition(int side, int n_bands, RadiusMetric metric) {
  if (side <= 0 || side % 2 != 0) {
    throw DimensionError("band_partition: side must be a positive even number, got " + std::to_string(side));
  }
  if (n_bands < 2) throw std::invalid_argument("band_partition: need at least two bands");
  BandPartition p{side, metric, {}};
  const double spacing = (side / 2.0) / n_bands;
  for (int k = 1; k <= n_bands; ++k) p.thresholds.push_back(k * spacing);
  return p;
}

FrequencyMask keep_bands_mask(const BandPartition& partition, const BandSet& bands) {
  if (bands.empty()) throw std::invalid_argument("keep_bands: empty band set would zero the image");
  for (int b : bands) {
    if (b < 0 || b >= partition.n_bands()) {
      throw std::invalid_argument("keep_bands: band index out of range: B" + std::to_string(b + 1));
    }
  }
  const CenteredGrid grid{partition.side};
  std::vector<bool> bits(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) bits[i] = bands.contains(partition.band_of(grid.coord(i)));
  return FrequencyMask(partition.side, std::move(bits));
}

FrequencyMask band_stop_mask(const BandPartition& partition, const BandSet& bands) {
  if (bands.empty()) throw std::invalid_argument("band_stop: empty band set");
  BandSet kept;
  for (int k = 0; k < partition.n_bands(); ++k) {
    if (!bands.contains(k)) kept.insert(k);
  }
  if (kept.empty()) throw std::invalid_argument("band_stop: removing every band would zero the image");
  for (int b : bands) {
    if (b < 0 || b >= partition.n_bands()) {
      throw std::invalid_argument("band_stop: band index out of range: B" + std::to_string(b + 1));
    }
  }
  return keep_bands_mask(partition, kept);
}

FrequencyMask low_pass_mask(int side, double cutoff) {
  if (!(cutoff > 0.0) || cutoff > side / 2.0) {
    throw std::invalid_argument("low_pass: cutoff must lie in (0, side/2]");
  }
  const CenteredGrid grid{side};
  std::vector<bool> bits(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) bits[i] = grid.coord(i).radius() <= cutoff;
  return FrequencyMask(side, std::move(bits));
}

FrequencyMask high_pass_mask(int side, double cutoff) { return low_pass_mask(side, cutoff).complement(); }

// ---------------------------------------------------------------------------
// Transforms

Spectrum dft2(const Image& image) {
  require_square(image.channels, image.height, image.width, "dft2");
  for (double x : image.data) {
    if (!std::isfinite(x)) throw std::domain_error("dft2: image contains non-finite values");
  }
  const int h = image.height;
  const int w = image.width;
  Spectrum out(image.channels, h, w);
  std::vector<cd> plane(image.plane());
  for (int c = 0; c < image.channels; ++c) {
    for (std::size_t i = 0; i < plane.size(); ++i) plane[i] = image.data[c * image.plane() + i];
    transform_plane(plane, h, w, false);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        out.at(c, y - h / 2, x - w / 2) =
            plane[static_cast<std::size_t>(wrap_index(y - h / 2, h)) * w + wrap_index(x - w / 2, w)];
      }
    }
  }
  return out;
}

HermitianCheck hermitian_violation(const Spectrum& spectrum) {
  HermitianCheck check;
  double max_mag = 0.0;
  for (const cd& z : spectrum.data) max_mag = std::max(max_mag, std::abs(z));
  if (max_mag == 0.0) return check;
  const CenteredGrid grid{spectrum.height};
  double worst = 0.0;
  for (int c = 0; c < spectrum.channels; ++c) {
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const FrequencyCoord f = grid.coord(i);
      const FrequencyCoord p = grid.partner(f);
      const double diff = std::abs(spectrum.at(c, f.u, f.v) - std::conj(spectrum.at(c, p.u, p.v)));
      if (diff > worst) {
        worst = diff;
        check.channel = c;
        check.worst = f;
      }
    }
  }
  check.relative_error = worst / max_mag;
  return check;
}

Image idft2(const Spectrum& spectrum) { return idft2(spectrum, 0.0); }

Image idft2(const Spectrum& spectrum, double reference_magnitude) {
  require_square(spectrum.channels, spectrum.height, spectrum.width, "idft2");
  HermitianCheck check = hermitian_violation(spectrum);
  if (reference_magnitude > 0.0) {
    double max_mag = 0.0;
    for (const cd& z : spectrum.data) max_mag = std::max(max_mag, std::abs(z));
    check.relative_error *= max_mag / std::max(max_mag, reference_magnitude);
  }
  if (check.relative_error > 1e-6) {
    std::ostringstream os;
    os << "idft2: spectrum is not Hermitian (relative error " << check.relative_error << " at channel "
       << check.channel << ", frequency (" << check.worst.u << "," << check.worst.v << "))";
    throw std::domain_error(os.str());
  }
  const int h = spectrum.height;
  const int w = spectrum.width;
  Image out(spectrum.channels, h, w);
  std::vector<cd> plane(spectrum.plane());
  const double scale = 1.0 / (static_cast<double>(h) * w);
  for (int c = 0; c < spectrum.channels; ++c) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        plane[static_cast<std::size_t>(wrap_index(y - h / 2, h)) * w + wrap_index(x - w / 2, w)] =
            spectrum.at(c, y - h / 2, x - w / 2);
      }
    }
    transform_plane(plane, h, w, true);
    for (std::size_t i = 0; i < plane.size(); ++i) out.data[c * out.plane() + i] = plane[i].real() * scale;
  }
  return out;
}

Spectrum remove_frequency_pair(const Spectrum& spectrum, FrequencyCoord f) {
  const CenteredGrid grid{spectrum.height};
  if (spectrum.height != spectrum.width || !grid.contains(f)) {
    std::ostringstream os;
    os << "remove_frequency_pair: (" << f.u << "," << f.v << ") outside the " << spectrum.height << "x"
       << spectrum.width << " grid";
    throw std::out_of_range(os.str());
  }
  Spectrum out = spectrum;
  const FrequencyCoord p = grid.partner(f);
  for (int c = 0; c < out.channels; ++c) {
    out.at(c, f.u, f.v) = 0.0;
    out.at(c, p.u, p.v) = 0.0;
  }
  return out;
}

Spectrum apply_mask(const Spectrum& spectrum, const FrequencyMask& mask) {
  if (spectrum.height != mask.side() || spectrum.width != mask.side()) {
    throw DimensionError("apply_mask: mask side " + std::to_string(mask.side()) + " does not match spectrum " +
                         std::to_string(spectrum.height) + "x" + std::to_string(spectrum.width));
  }
  Spectrum out = spectrum;
  const std::size_t n = spectrum.plane();
  for (int c = 0; c < out.channels; ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      if (!mask.bits()[i]) out.data[c * n + i] = 0.0;
    }
  }
  return out;
}

Image filter_image(const Image& image, const FrequencyMask& mask) {
  if (image.height != mask.side() || image.width != mask.side()) {
    throw DimensionError("filter_image: mask side " + std::to_string(mask.side()) + " does not match image " +
                         std::to_string(image.height) + "x" + std::to_string(image.width));
  }
  const Spectrum full = dft2(image);
  double max_mag = 0.0;
  for (const cd& z : full.data) max_mag = std::max(max_mag, std::abs(z));
  return idft2(apply_mask(full, mask), max_mag);
}

double spatial_energy(const Image& image) {
  double e = 0.0;
  for (double x : image.data) e += x * x;
  return e;
}

double spectral_energy(const Spectrum& spectrum) {
  double e = 0.0;
  for (const cd& z : spectrum.data) e += std::norm(z);
  return e / static_cast<double>(spectrum.plane());
}

RadialPdf radial_pdf(int max_radius) {
  if (max_radius < 1) throw std::invalid_argument("radial_pdf: max radius must be >= 1");
  RadialPdf pdf;
  pdf.max_radius = max_radius;
  double sum = 0.0;
  for (int r = 1; r <= max_radius; ++r) sum += 1.0 / (r + 1);
  pdf.normalizer = 1.0 / sum;
  pdf.probabilities.reserve(static_cast<std::size_t>(max_radius));
  for (int r = 1; r <= max_radius; ++r) pdf.probabilities.push_back(pdf.normalizer / (r + 1));
  return pdf;
}

}  // namespace freqshort

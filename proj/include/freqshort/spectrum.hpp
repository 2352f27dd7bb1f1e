#pragma once

#include <complex>
#include <cstddef>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace freqshort {

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Multi-channel square image, row-major per channel, channel-major overall.
struct Image {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> data;

  Image() = default;
  Image(int c, int h, int w, double fill = 0.0)
      : channels(c), height(h), width(w),
        data(static_cast<std::size_t>(c) * h * w, fill) {}

  std::size_t plane() const { return static_cast<std::size_t>(height) * width; }
  double& at(int c, int y, int x) { return data[c * plane() + static_cast<std::size_t>(y) * width + x]; }
  double at(int c, int y, int x) const { return data[c * plane() + static_cast<std::size_t>(y) * width + x]; }
  bool same_shape(const Image& o) const {
    return channels == o.channels && height == o.height && width == o.width;
  }
};

/// Centered spectrum: DC sits at index (H/2, W/2). Row index i maps to
/// frequency u = i - H/2.
struct Spectrum {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<std::complex<double>> data;

  Spectrum() = default;
  Spectrum(int c, int h, int w)
      : channels(c), height(h), width(w), data(static_cast<std::size_t>(c) * h * w) {}

  std::size_t plane() const { return static_cast<std::size_t>(height) * width; }
  std::complex<double>& at(int c, int u, int v);
  const std::complex<double>& at(int c, int u, int v) const;
};

/// Signed frequency index pair on a centered grid.
struct FrequencyCoord {
  int u = 0;
  int v = 0;

  double radius() const;
  bool operator==(const FrequencyCoord&) const = default;
};

/// Helpers for the centered-grid topology of a side x side spectrum.
struct CenteredGrid {
  int side = 0;

  int lo() const { return -(side / 2); }
  int hi() const { return lo() + side; }  // exclusive
  bool contains(FrequencyCoord f) const {
    return f.u >= lo() && f.u < hi() && f.v >= lo() && f.v < hi();
  }
  std::size_t index(FrequencyCoord f) const {
    return static_cast<std::size_t>(f.u - lo()) * side + static_cast<std::size_t>(f.v - lo());
  }
  FrequencyCoord coord(std::size_t index) const {
    return {static_cast<int>(index / side) + lo(), static_cast<int>(index % side) + lo()};
  }
  /// (-u,-v) wrapped back into the grid; Nyquist rows map onto themselves.
  FrequencyCoord partner(FrequencyCoord f) const;
  std::size_t size() const { return static_cast<std::size_t>(side) * side; }
};

/// Radial distance used for banding. Euclidean is the default everywhere;
/// Chebyshev (square annuli) is kept for sensitivity runs.
enum class RadiusMetric { euclidean, chebyshev };

double radius_of(FrequencyCoord f, RadiusMetric metric);

class FrequencyMask {
 public:
  FrequencyMask() = default;
  /// Throws std::invalid_argument unless bits are point-symmetric through DC.
  FrequencyMask(int side, std::vector<bool> bits);

  static FrequencyMask all(int side, bool keep);

  int side() const { return side_; }
  bool keep(FrequencyCoord f) const { return bits_[CenteredGrid{side_}.index(f)]; }
  const std::vector<bool>& bits() const { return bits_; }
  std::size_t count() const;

  FrequencyMask complement() const;
  bool operator==(const FrequencyMask&) const = default;

 private:
  int side_ = 0;
  std::vector<bool> bits_;
};

struct BandPartition {
  int side = 0;
  RadiusMetric metric = RadiusMetric::euclidean;
  std::vector<double> thresholds;  // upper cut point of each band

  int n_bands() const { return static_cast<int>(thresholds.size()); }
  /// 0-based band index; intervals are [lo, hi) with the outermost closed above.
  int band_of(FrequencyCoord f) const;
  std::vector<std::size_t> member_counts() const;
};

BandPartition band_partition(int side, int n_bands = 4,
                             RadiusMetric metric = RadiusMetric::euclidean);

/// Band sets use 0-based indices (B1 == 0).
using BandSet = std::set<int>;

FrequencyMask keep_bands_mask(const BandPartition& partition, const BandSet& bands);
FrequencyMask band_stop_mask(const BandPartition& partition, const BandSet& bands);
/// Keeps radius <= cutoff (boundary on the low side). DC is always kept.
FrequencyMask low_pass_mask(int side, double cutoff);
/// Keeps radius > cutoff; exact complement of low_pass_mask.
FrequencyMask high_pass_mask(int side, double cutoff);

Spectrum dft2(const Image& image);
/// Throws std::domain_error naming the worst frequency when the input is not
/// Hermitian within 1e-6 of its max magnitude.
Image idft2(const Spectrum& spectrum);
/// Same, but the Hermitian tolerance is relative to max(own max magnitude,
/// reference_magnitude). Used after masking, where the surviving content may
/// be far smaller than the rounding noise scale of the original spectrum.
Image idft2(const Spectrum& spectrum, double reference_magnitude);

Spectrum remove_frequency_pair(const Spectrum& spectrum, FrequencyCoord f);
Spectrum apply_mask(const Spectrum& spectrum, const FrequencyMask& mask);
Image filter_image(const Image& image, const FrequencyMask& mask);

double spatial_energy(const Image& image);
/// Sum of |F|^2 / (H*W), comparable to spatial_energy by Parseval.
double spectral_energy(const Spectrum& spectrum);

struct RadialPdf {
  int max_radius = 0;
  double normalizer = 0.0;
  std::vector<double> probabilities;  // probabilities[r-1] == Pr(r)

  double operator()(int r) const { return probabilities.at(static_cast<std::size_t>(r - 1)); }
};

RadialPdf radial_pdf(int max_radius);

/// Largest Hermitian-symmetry violation relative to the max magnitude.
struct HermitianCheck {
  double relative_error = 0.0;
  int channel = 0;
  FrequencyCoord worst;
};
HermitianCheck hermitian_violation(const Spectrum& spectrum);

}  // namespace freqshort

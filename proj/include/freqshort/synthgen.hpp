#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "freqshort/dataset.hpp"
#include "freqshort/rng.hpp"
#include "freqshort/spectrum.hpp"

namespace freqshort {

inline constexpr int kSynthSide = 32;
inline constexpr int kSynthClasses = 4;
inline constexpr int kSynthBands = 4;

/// Band assignments and special-pattern rule for one Syn_b dataset.
struct SyntheticDatasetSpec {
  int bias_band = 0;  // 0-based: B1 == 0
  std::array<BandSet, kSynthClasses> allowed_bands;
  std::vector<FrequencyCoord> special_pattern;  // (u,u), u odd in 1..15
  int side = kSynthSide;
  int n_classes = kSynthClasses;
  RadiusMetric metric = RadiusMetric::euclidean;

  bool carries_pattern(int cls) const { return cls == 0; }
};

/// Throws std::invalid_argument for bands outside B1..B4.
SyntheticDatasetSpec build_spec(int bias_band, RadiusMetric metric = RadiusMetric::euclidean);

/// Parses "B1".."B4" (case-insensitive); throws std::invalid_argument otherwise.
int parse_band(const std::string& name);
std::string band_name(int band);

struct GenerationConfig {
  int n_train = 1000;
  int n_val = 200;
  int n_test = 200;
  std::uint64_t seed = 0;
  int k_min = 8;
  int k_max = 24;
  double amplitude_min = 0.5;
  double amplitude_max = 1.0;

  void validate() const;
};

/// Per-image generation stream; identical for serial and parallel runs.
std::uint64_t sample_seed(std::uint64_t seed, Split split, int cls, int index);

/// The spectrum a sample is built from, before the inverse transform.
Spectrum sample_class_spectrum(const SyntheticDatasetSpec& spec, const GenerationConfig& config, int cls,
                               Rng& rng);

/// Spatial image in [0,1] (per-image min-max).
Image sample_class_image(const SyntheticDatasetSpec& spec, const GenerationConfig& config, int cls, Rng& rng);

LabeledDataset generate_split(const SyntheticDatasetSpec& spec, const GenerationConfig& config, Split split);

struct SyntheticDataset {
  LabeledDataset train;
  LabeledDataset val;
  LabeledDataset test;
};

SyntheticDataset generate_dataset(const SyntheticDatasetSpec& spec, const GenerationConfig& config);

/// Writes the on-disk dataset layout plus manifest.json.
void write_synthetic_dataset(const SyntheticDataset& data, const SyntheticDatasetSpec& spec,
                             const GenerationConfig& config, const std::filesystem::path& root);

}  // namespace freqshort

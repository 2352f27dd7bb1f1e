#include "freqshort/synthgen.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <numbers>
#include <set>
#include <stdexcept>

#include "json.hpp"

#include "freqshort/io.hpp"

namespace freqshort {

namespace {

std::string pad_index(int index) {
  std::string s = std::to_string(index);
  if (s.size() < 6) s.insert(0, 6 - s.size(), '0');
  return s;
}

// Candidate frequencies of one class, bucketed by rounded Euclidean radius.
struct SamplingPool {
  std::map<int, std::vector<FrequencyCoord>> by_radius;
  std::size_t n_pairs = 0;
};

SamplingPool build_pool(const SyntheticDatasetSpec& spec, int cls) {
  const CenteredGrid grid{spec.side};
  const BandPartition partition = band_partition(spec.side, kSynthBands, spec.metric);
  std::set<std::size_t> pattern;
  for (const FrequencyCoord& f : spec.special_pattern) {
    pattern.insert(grid.index(f));
    pattern.insert(grid.index(grid.partner(f)));
  }
  const BandSet& allowed = spec.allowed_bands.at(static_cast<std::size_t>(cls));
  SamplingPool pool;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const FrequencyCoord f = grid.coord(i);
    if (f.u == 0 && f.v == 0) continue;
    if (pattern.contains(i)) continue;
    if (!allowed.contains(partition.band_of(f))) continue;
    const int r = static_cast<int>(std::lround(f.radius()));
    pool.by_radius[r].push_back(f);
    if (grid.index(grid.partner(f)) >= i) ++pool.n_pairs;
  }
  return pool;
}

int max_rounded_radius(int side) {
  const double corner = std::hypot(side / 2.0, side / 2.0);
  return static_cast<int>(std::lround(corner));
}

}  // namespace

int parse_band(const std::string& name) {
  if (name.size() == 2 && (name[0] == 'B' || name[0] == 'b') && name[1] >= '1' && name[1] <= '4') {
    return name[1] - '1';
  }
  throw std::invalid_argument("invalid band '" + name + "' (valid bands: B1, B2, B3, B4)");
}

std::string band_name(int band) { return "B" + std::to_string(band + 1); }

SyntheticDatasetSpec build_spec(int bias_band, RadiusMetric metric) {
  if (bias_band < 0 || bias_band >= kSynthBands) {
    throw std::invalid_argument("build_spec: bias band must be one of B1..B4");
  }
  SyntheticDatasetSpec spec;
  spec.bias_band = bias_band;
  spec.metric = metric;
  BandSet all;
  for (int k = 0; k < kSynthBands; ++k) all.insert(k);
  BandSet rest = all;
  rest.erase(bias_band);
  spec.allowed_bands = {rest, rest, all, BandSet{bias_band}};
  for (int u = 1; u <= 15; u += 2) spec.special_pattern.push_back({u, u});
  return spec;
}

void GenerationConfig::validate() const {
  if (n_train < 1 || n_val < 1 || n_test < 1) throw std::invalid_argument("generation: split sizes must be >= 1");
  if (k_min < 8) throw std::invalid_argument("generation: k_min must be at least 8");
  if (k_max < k_min) throw std::invalid_argument("generation: k_max must be >= k_min");
  if (!(amplitude_min > 0.0) || amplitude_max < amplitude_min) {
    throw std::invalid_argument("generation: amplitude range must satisfy 0 < min <= max");
  }
}

std::uint64_t sample_seed(std::uint64_t seed, Split split, int cls, int index) {
  return derive_seed(seed, {static_cast<std::uint64_t>(split), static_cast<std::uint64_t>(cls),
                            static_cast<std::uint64_t>(index)});
}

Spectrum sample_class_spectrum(const SyntheticDatasetSpec& spec, const GenerationConfig& config, int cls,
                               Rng& rng) {
  if (cls < 0 || cls >= spec.n_classes) throw std::invalid_argument("sample_class_image: class out of range");
  const CenteredGrid grid{spec.side};
  const SamplingPool pool = build_pool(spec, cls);
  if (pool.by_radius.empty()) throw std::logic_error("sample_class_image: class has no admissible frequencies");

  // Radial law restricted to radii present in the pool, renormalized.
  const RadialPdf pdf = radial_pdf(max_rounded_radius(spec.side));
  std::vector<int> radii;
  std::vector<double> cdf;
  double total = 0.0;
  for (const auto& [r, members] : pool.by_radius) {
    total += pdf(r);
    radii.push_back(r);
    cdf.push_back(total);
  }

  const auto k_draw = static_cast<std::size_t>(rng.uniform_int(config.k_min, config.k_max));
  const std::size_t k = std::min(k_draw, pool.n_pairs);

  Spectrum spectrum(1, spec.side, spec.side);
  std::set<std::size_t> chosen;
  while (chosen.size() < k) {
    const double x = rng.uniform() * total;
    const auto pos = std::min<std::size_t>(
        static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), x) - cdf.begin()), radii.size() - 1);
    const std::vector<FrequencyCoord>& members = pool.by_radius.at(radii[pos]);
    const FrequencyCoord f =
        members[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(members.size()) - 1))];
    const FrequencyCoord p = grid.partner(f);
    const std::size_t key = std::min(grid.index(f), grid.index(p));
    if (!chosen.insert(key).second) continue;

    const double amplitude = rng.uniform(config.amplitude_min, config.amplitude_max) / (f.radius() + 1.0);
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    if (f == p) {
      spectrum.at(0, f.u, f.v) = amplitude * std::cos(phase);
    } else {
      spectrum.at(0, f.u, f.v) = std::polar(amplitude, phase);
      spectrum.at(0, p.u, p.v) = std::polar(amplitude, -phase);
    }
  }

  for (const FrequencyCoord& f : spec.special_pattern) {
    const FrequencyCoord p = grid.partner(f);
    const double value = spec.carries_pattern(cls) ? 1.0 / (f.u + 1.0) : 0.0;
    spectrum.at(0, f.u, f.v) = value;
    spectrum.at(0, p.u, p.v) = value;
  }
  return spectrum;
}

Image sample_class_image(const SyntheticDatasetSpec& spec, const GenerationConfig& config, int cls, Rng& rng) {
  Image image = idft2(sample_class_spectrum(spec, config, cls, rng));
  const auto [lo, hi] = std::minmax_element(image.data.begin(), image.data.end());
  const double min = *lo;
  const double range = *hi - *lo;
  for (double& x : image.data) x = range > 0.0 ? (x - min) / range : 0.0;
  return image;
}

LabeledDataset generate_split(const SyntheticDatasetSpec& spec, const GenerationConfig& config, Split split) {
  config.validate();
  const int per_class = split == Split::train ? config.n_train : split == Split::val ? config.n_val : config.n_test;
  LabeledDataset out;
  out.split = split;
  for (int c = 0; c < spec.n_classes; ++c) out.class_names.push_back("C" + std::to_string(c));
  out.provenance = "Syn_" + band_name(spec.bias_band) + " seed=" + std::to_string(config.seed);
  for (int c = 0; c < spec.n_classes; ++c) {
    for (int i = 0; i < per_class; ++i) {
      Rng rng(sample_seed(config.seed, split, c, i));
      Image image = sample_class_image(spec, config, c, rng);
      // Stored tensors are float32; keep memory and disk copies identical.
      for (double& x : image.data) x = static_cast<double>(static_cast<float>(x));
      out.add(std::move(image), c, class_dir_name(c, out.class_names[static_cast<std::size_t>(c)]) + "/" +
                                       pad_index(i));
    }
  }
  return out;
}

SyntheticDataset generate_dataset(const SyntheticDatasetSpec& spec, const GenerationConfig& config) {
  return {generate_split(spec, config, Split::train), generate_split(spec, config, Split::val),
          generate_split(spec, config, Split::test)};
}

void write_synthetic_dataset(const SyntheticDataset& data, const SyntheticDatasetSpec& spec,
                             const GenerationConfig& config, const std::filesystem::path& root) {
  nlohmann::json manifest;
  manifest["kind"] = "synthetic";
  manifest["bias_band"] = band_name(spec.bias_band);
  manifest["side"] = spec.side;
  manifest["radius_metric"] = spec.metric == RadiusMetric::euclidean ? "euclidean" : "chebyshev";
  manifest["class_names"] = data.train.class_names;
  nlohmann::json bands = nlohmann::json::array();
  for (const BandSet& set : spec.allowed_bands) {
    nlohmann::json names = nlohmann::json::array();
    for (int b : set) names.push_back(band_name(b));
    bands.push_back(names);
  }
  manifest["allowed_bands"] = bands;
  nlohmann::json pattern = nlohmann::json::array();
  for (const FrequencyCoord& f : spec.special_pattern) pattern.push_back({f.u, f.v});
  manifest["special_pattern"] = pattern;
  manifest["config"] = {{"n_train", config.n_train}, {"n_val", config.n_val},   {"n_test", config.n_test},
                        {"seed", config.seed},       {"k_min", config.k_min},   {"k_max", config.k_max},
                        {"amplitude_min", config.amplitude_min}, {"amplitude_max", config.amplitude_max}};
  write_dataset_layout(root, {&data.train, &data.val, &data.test}, manifest);
}

}  // namespace freqshort

#include <cmath>
#include <filesystem>
#include <set>

#include "doctest.h"
#include "helpers.hpp"

#include "freqshort/io.hpp"
#include "freqshort/synthgen.hpp"

using namespace freqshort;
namespace fs = std::filesystem;

namespace {

bool is_special(const SyntheticDatasetSpec& spec, FrequencyCoord f) {
  const CenteredGrid grid{spec.side};
  for (const FrequencyCoord& s : spec.special_pattern) {
    if (s == f || grid.partner(s) == f) return true;
  }
  return false;
}

// Fraction of non-DC energy outside the class's allowed bands, special
// pattern frequencies excluded (C0 carries them in every band).
double leaked_fraction(const SyntheticDatasetSpec& spec, int cls, const Spectrum& s) {
  const BandPartition part = band_partition(spec.side, kSynthBands, spec.metric);
  const CenteredGrid grid{spec.side};
  double total = 0.0, outside = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const FrequencyCoord f = grid.coord(i);
    if ((f.u == 0 && f.v == 0) || is_special(spec, f)) continue;
    const double e = std::norm(s.at(0, f.u, f.v));
    total += e;
    if (!spec.allowed_bands[static_cast<std::size_t>(cls)].count(part.band_of(f))) outside += e;
  }
  return total > 0 ? outside / total : 0.0;
}

GenerationConfig small_config(int n = 6) {
  GenerationConfig cfg;
  cfg.n_train = n;
  cfg.n_val = 2;
  cfg.n_test = 2;
  cfg.seed = 5;
  return cfg;
}

}  // namespace

TEST_SUITE("synthgen") {

TEST_CASE("band assignments per dataset") {
  const SyntheticDatasetSpec b1 = build_spec(0);
  CHECK(b1.allowed_bands[0] == BandSet{1, 2, 3});
  CHECK(b1.allowed_bands[1] == BandSet{1, 2, 3});
  CHECK(b1.allowed_bands[2] == BandSet{0, 1, 2, 3});
  CHECK(b1.allowed_bands[3] == BandSet{0});
  CHECK(build_spec(3).allowed_bands[3] == BandSet{3});
  for (int b = 0; b < 4; ++b) CHECK(build_spec(b).allowed_bands[2] == BandSet{0, 1, 2, 3});
  CHECK_THROWS_AS(build_spec(4), std::invalid_argument);
  CHECK(parse_band("b3") == 2);
  CHECK_THROWS(parse_band("B5"));
}

TEST_CASE("special pattern is the eight odd diagonal frequencies") {
  const SyntheticDatasetSpec spec = build_spec(1);
  REQUIRE(spec.special_pattern.size() == 8u);
  std::set<int> seen;
  for (const FrequencyCoord& f : spec.special_pattern) {
    CHECK(f.u == f.v);
    CHECK(f.u % 2 == 1);
    seen.insert(f.u);
  }
  CHECK(seen == std::set<int>{1, 3, 5, 7, 9, 11, 13, 15});
}

TEST_CASE("class spectra respect bands and the special pattern") {
  const GenerationConfig cfg = small_config();
  for (int b = 0; b < 4; ++b) {
    const SyntheticDatasetSpec spec = build_spec(b);
    for (int cls = 0; cls < 4; ++cls) {
      for (int k = 0; k < 5; ++k) {
        Rng rng(sample_seed(cfg.seed, Split::train, cls, k));
        const Spectrum s = sample_class_spectrum(spec, cfg, cls, rng);
        INFO("band B" << b + 1 << " class " << cls << " sample " << k);
        CHECK(hermitian_violation(s).relative_error <= 1e-12);
        CHECK(leaked_fraction(spec, cls, s) == 0.0);
        for (const FrequencyCoord& f : spec.special_pattern) {
          const FrequencyCoord p = CenteredGrid{spec.side}.partner(f);
          if (cls == 0) {
            CHECK(std::abs(s.at(0, f.u, f.v)) > 0.0);
            CHECK(std::abs(s.at(0, p.u, p.v)) > 0.0);
          } else {
            CHECK(s.at(0, f.u, f.v) == std::complex<double>(0.0));
            CHECK(s.at(0, p.u, p.v) == std::complex<double>(0.0));
          }
        }
      }
    }
  }
}

TEST_CASE("stored images keep band confinement after normalization") {
  const GenerationConfig cfg = small_config();
  for (int b : {0, 3}) {
    const SyntheticDatasetSpec spec = build_spec(b);
    const LabeledDataset test = generate_split(spec, cfg, Split::test);
    for (std::size_t i = 0; i < test.size(); ++i) {
      // Round through the float32 container, as the tools see it.
      const Image stored = tensor_to_image(image_to_tensor(test.images[i]));
      const Spectrum s = dft2(stored);
      CHECK(leaked_fraction(spec, test.labels[i], s) <= 1e-6);
      if (test.labels[i] != 0) {
        for (const FrequencyCoord& f : spec.special_pattern) CHECK(std::abs(s.at(0, f.u, f.v)) <= 1e-4);
      }
      double lo = 1.0, hi = 0.0;
      for (double v : stored.data) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      CHECK(lo >= 0.0);
      CHECK(hi <= 1.0);
    }
  }
}

TEST_CASE("band-stop leaves C3 of Syn_B1 empty and C3 of Syn_B4 intact") {
  GenerationConfig cfg = small_config();
  {
    const SyntheticDatasetSpec spec = build_spec(0);
    Rng rng(sample_seed(cfg.seed, Split::test, 3, 0));
    const Image img = sample_class_image(spec, cfg, 3, rng);
    const FrequencyMask low_only = keep_bands_mask(band_partition(32), {0});
    // The mean lives at DC; compare the fluctuating part only.
    Spectrum s = dft2(img);
    s.at(0, 0, 0) = 0.0;
    const Image centered = idft2(s);
    const Image stopped = filter_image(centered, band_stop_mask(band_partition(32), {0, 3}));
    CHECK(spatial_energy(stopped) <= 1e-6 * spatial_energy(centered));
    CHECK(spatial_energy(filter_image(centered, low_only)) ==
          doctest::Approx(spatial_energy(centered)).epsilon(1e-6));
  }
  {
    const SyntheticDatasetSpec spec = build_spec(3);
    const LabeledDataset test = generate_split(spec, cfg, Split::test);
    for (std::size_t i = 0; i < test.size(); ++i) {
      if (test.labels[i] != 3) continue;
      Spectrum s = dft2(test.images[i]);
      s.at(0, 0, 0) = 0.0;
      const Image centered = idft2(s);
      const Image kept = filter_image(centered, band_stop_mask(band_partition(32), {0, 1, 2}));
      CHECK(spatial_energy(kept) == doctest::Approx(spatial_energy(centered)).epsilon(1e-6));
    }
  }
}

TEST_CASE("split sizes, balance and determinism") {
  GenerationConfig cfg = small_config(10);
  cfg.n_val = 3;
  cfg.n_test = 4;
  const SyntheticDatasetSpec spec = build_spec(2);
  const SyntheticDataset a = generate_dataset(spec, cfg);
  CHECK(a.train.size() == 40u);
  CHECK(a.val.size() == 12u);
  CHECK(a.test.size() == 16u);
  CHECK(a.train.class_counts() == std::vector<std::size_t>{10, 10, 10, 10});
  const SyntheticDataset b = generate_dataset(spec, cfg);
  CHECK(a.train.images.front().data == b.train.images.front().data);
  CHECK(a.test.images.back().data == b.test.images.back().data);
  CHECK(a.train.images.front().data != a.test.images.front().data);
  CHECK(sample_seed(1, Split::train, 0, 0) != sample_seed(1, Split::val, 0, 0));

  GenerationConfig bad = cfg;
  bad.k_min = 30;
  bad.k_max = 10;
  CHECK_THROWS(bad.validate());
}

TEST_CASE("dataset written twice is byte-identical") {
  const fs::path root = fs::temp_directory_path() / "freqshort_synth_test";
  fs::remove_all(root);
  GenerationConfig cfg = small_config(3);
  const SyntheticDatasetSpec spec = build_spec(0);
  write_synthetic_dataset(generate_dataset(spec, cfg), spec, cfg, root / "a");
  write_synthetic_dataset(generate_dataset(spec, cfg), spec, cfg, root / "b");
  int files = 0;
  for (const auto& e : fs::recursive_directory_iterator(root / "a")) {
    if (e.path().extension() != ".f32") continue;
    ++files;
    const fs::path other = root / "b" / fs::relative(e.path(), root / "a");
    CHECK(read_file(e.path()) == read_file(other));
  }
  CHECK(files == 4 * (3 + 2 + 2));
  CHECK(fs::exists(root / "a" / "manifest.json"));
  fs::remove_all(root);
}

}  // TEST_SUITE

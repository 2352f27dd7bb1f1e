#include <cmath>
#include <numeric>

#include "doctest.h"
#include "helpers.hpp"

#include "freqshort/spectrum.hpp"

using namespace freqshort;
using testutil::max_abs_diff;
using testutil::random_image;

TEST_SUITE("spectrum") {

TEST_CASE("dft2 matches the direct double sum for every size up to 8") {
  for (int side = 1; side <= 8; ++side) {
    for (int c : {1, 3}) {
      const Image img = random_image(c, side, 100 + side * 7 + c);
      const Spectrum fast = dft2(img);
      const Spectrum slow = testutil::naive_dft(img);
      double worst = 0.0;
      for (std::size_t i = 0; i < fast.data.size(); ++i) worst = std::max(worst, std::abs(fast.data[i] - slow.data[i]));
      INFO("side " << side << " channels " << c);
      CHECK(worst <= 1e-9);
    }
  }
}

TEST_CASE("constant and impulse images") {
  Image ones(1, 4, 4, 1.0);
  const Spectrum s = dft2(ones);
  for (int u = -2; u < 2; ++u) {
    for (int v = -2; v < 2; ++v) {
      if (u == 0 && v == 0) CHECK(std::abs(s.at(0, u, v) - 16.0) < 1e-12);
      else CHECK(std::abs(s.at(0, u, v)) < 1e-12);
    }
  }
  Image impulse(1, 4, 4);
  impulse.at(0, 0, 0) = 1.0;
  for (const auto& z : dft2(impulse).data) CHECK(std::abs(std::abs(z) - 1.0) < 1e-12);
}

TEST_CASE("dft2 rejects empty and non-square images") {
  CHECK_THROWS_AS(dft2(Image{}), DimensionError);
  CHECK_THROWS_AS(dft2(Image(1, 4, 6)), DimensionError);
}

TEST_CASE("idft2 inverts dft2") {
  Spectrum dc(1, 4, 4);
  dc.at(0, 0, 0) = 16.0;
  const Image flat = idft2(dc);
  for (double v : flat.data) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));

  for (int side : {2, 6, 16, 32, 64}) {
    const Image img = random_image(3, side, 7 + side);
    CHECK(max_abs_diff(idft2(dft2(img)), img) <= 1e-6);
  }

  const Image zero = idft2(Spectrum(1, 8, 8));
  for (double v : zero.data) CHECK(v == 0.0);
}

TEST_CASE("idft2 names the worst non-Hermitian frequency") {
  Spectrum s = dft2(random_image(1, 8, 3));
  s.at(0, 2, 3) += std::complex<double>(0.0, 5.0);
  try {
    idft2(s);
    FAIL("expected a Hermitian violation");
  } catch (const std::domain_error& e) {
    const std::string what = e.what();
    CHECK((what.find("(2,3)") != std::string::npos || what.find("(-2,-3)") != std::string::npos));
  }
}

TEST_CASE("Parseval before and after masking") {
  const Image img = random_image(3, 32, 11);
  const Spectrum s = dft2(img);
  CHECK(std::abs(spatial_energy(img) - spectral_energy(s)) <= 1e-6 * spatial_energy(img));
  const FrequencyMask mask = band_stop_mask(band_partition(32), {1, 2});
  const Spectrum masked = apply_mask(s, mask);
  const Image filtered = idft2(masked);
  CHECK(std::abs(spatial_energy(filtered) - spectral_energy(masked)) <= 1e-6 * spatial_energy(filtered));
  double removed = 0.0;
  const CenteredGrid grid{32};
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!mask.bits()[i]) {
      const FrequencyCoord f = grid.coord(i);
      for (int c = 0; c < 3; ++c) removed += std::norm(s.at(c, f.u, f.v));
    }
  }
  CHECK(spectral_energy(masked) + removed / 1024.0 == doctest::Approx(spectral_energy(s)).epsilon(1e-9));
}

TEST_CASE("band partition cut points and completeness") {
  const BandPartition p32 = band_partition(32);
  CHECK(p32.thresholds == std::vector<double>{4, 8, 12, 16});
  const BandPartition p8 = band_partition(8);
  CHECK(p8.thresholds == std::vector<double>{1, 2, 3, 4});
  CHECK(p8.band_of({0, 0}) == 0);

  const auto counts = p32.member_counts();
  CHECK(std::accumulate(counts.begin(), counts.end(), std::size_t{0}) == 32u * 32u);
  const CenteredGrid grid{32};
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const FrequencyCoord f = grid.coord(i);
    const int b = p32.band_of(f);
    REQUIRE(b >= 0);
    REQUIRE(b < 4);
    const double r = f.radius();
    if (b < 3) CHECK(r < p32.thresholds[static_cast<std::size_t>(b)]);
    if (b > 0) CHECK(r >= p32.thresholds[static_cast<std::size_t>(b - 1)]);
  }
  CHECK_THROWS_AS(band_partition(31), DimensionError);
  CHECK_THROWS(band_partition(32, 1));
}

TEST_CASE("chebyshev partition uses square annuli") {
  const BandPartition p = band_partition(32, 4, RadiusMetric::chebyshev);
  CHECK(p.band_of({3, 3}) == 0);
  CHECK(p.band_of({4, 0}) == 1);
  CHECK(p.band_of({-16, -16}) == 3);
}

TEST_CASE("masks") {
  const BandPartition part = band_partition(32);
  const FrequencyMask all = keep_bands_mask(part, {0, 1, 2, 3});
  CHECK(all.count() == 1024u);
  const Image img = random_image(1, 32, 5);
  CHECK(max_abs_diff(filter_image(img, all), img) <= 1e-6);

  const FrequencyMask stop23 = band_stop_mask(part, {1, 2});
  const CenteredGrid grid{32};
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double r = grid.coord(i).radius();
    CHECK(stop23.bits()[i] == (r < 4.0 || r >= 12.0));
  }
  CHECK(stop23 == keep_bands_mask(part, {1, 2}).complement());
  CHECK_THROWS(keep_bands_mask(part, {}));

  const FrequencyMask lo = low_pass_mask(32, 4.0);
  const FrequencyMask hi = high_pass_mask(32, 4.0);
  CHECK(lo == hi.complement());
  CHECK(lo.keep({0, 4}));
  CHECK_FALSE(hi.keep({0, 4}));
  CHECK(lo.keep({0, 0}));
  CHECK_THROWS(low_pass_mask(32, 0.0));
  CHECK_THROWS(low_pass_mask(32, 17.0));
}

TEST_CASE("every mask is point-symmetric and filter outputs stay real") {
  const BandPartition part = band_partition(32);
  std::vector<FrequencyMask> masks = {low_pass_mask(32, 6.5), high_pass_mask(32, 9.0), keep_bands_mask(part, {0, 3}),
                                      band_stop_mask(part, {0})};
  const CenteredGrid grid{32};
  for (const auto& m : masks) {
    for (std::size_t i = 0; i < grid.size(); ++i) CHECK(m.bits()[i] == m.keep(grid.partner(grid.coord(i))));
  }
  std::vector<bool> lopsided(1024, false);
  lopsided[grid.index({1, 2})] = true;
  CHECK_THROWS_AS(FrequencyMask(32, lopsided), std::invalid_argument);
}

TEST_CASE("filtering is idempotent and DC-only keeps the channel mean") {
  const Image img = random_image(3, 16, 9);
  const FrequencyMask m = keep_bands_mask(band_partition(16), {1, 3});
  const Image once = filter_image(img, m);
  CHECK(max_abs_diff(filter_image(once, m), once) <= 1e-6);

  std::vector<bool> dc(256, false);
  dc[CenteredGrid{16}.index({0, 0})] = true;
  const Image flat = filter_image(img, FrequencyMask(16, dc));
  for (int c = 0; c < 3; ++c) {
    double mean = 0.0;
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x) mean += img.at(c, y, x);
    mean /= 256.0;
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x) CHECK(flat.at(c, y, x) == doctest::Approx(mean).epsilon(1e-9));
  }
  CHECK_THROWS_AS(filter_image(img, low_pass_mask(32, 4)), DimensionError);
}

TEST_CASE("remove_frequency_pair") {
  Image ones(1, 8, 8, 1.0);
  const Image gone = idft2(remove_frequency_pair(dft2(ones), {0, 0}));
  for (double v : gone.data) CHECK(std::abs(v) < 1e-12);

  const Spectrum s = dft2(ones);
  const Spectrum same = remove_frequency_pair(s, {1, 2});
  CHECK(same.data == s.data);

  const Image img = random_image(1, 32, 21);
  const Spectrum removed = remove_frequency_pair(dft2(img), {3, 5});
  CHECK(hermitian_violation(removed).relative_error <= 1e-12);
  const Spectrum again = dft2(idft2(removed));
  CHECK(std::abs(again.at(0, 3, 5)) < 1e-9);
  CHECK(std::abs(again.at(0, -3, -5)) < 1e-9);
  CHECK(std::abs(again.at(0, 3, 4)) > 1e-6);
  CHECK_THROWS(remove_frequency_pair(s, {4, 0}));
}

TEST_CASE("radial pdf") {
  const RadialPdf two = radial_pdf(2);
  CHECK(two.normalizer == doctest::Approx(6.0 / 5.0).epsilon(1e-15));
  CHECK(two(1) == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(two(2) == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(radial_pdf(1)(1) == 1.0);
  for (int r_max : {1, 3, 16, 22, 100, 1000}) {
    const RadialPdf p = radial_pdf(r_max);
    CHECK(std::abs(std::accumulate(p.probabilities.begin(), p.probabilities.end(), 0.0) - 1.0) <= 1e-12);
    for (int r = 1; r < r_max; ++r) CHECK(p(r) > p(r + 1));
  }
  CHECK_THROWS(radial_pdf(0));
}

}  // TEST_SUITE

#include <cmath>
#include <numeric>

#include "doctest.h"
#include "helpers.hpp"

#include "freqshort/metrics.hpp"

using namespace freqshort;

namespace {

ConfusionMatrix from_counts(std::vector<std::vector<std::int64_t>> counts) {
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < counts.size(); ++i) cm.class_names.push_back("c" + std::to_string(i));
  cm.counts = std::move(counts);
  return cm;
}

// Random matrix whose row i sums to sizes[i].
ConfusionMatrix random_rows(Rng& rng, const std::vector<std::int64_t>& sizes) {
  const int n = static_cast<int>(sizes.size());
  std::vector<std::vector<std::int64_t>> counts(static_cast<std::size_t>(n), std::vector<std::int64_t>(static_cast<std::size_t>(n), 0));
  for (int i = 0; i < n; ++i)
    for (std::int64_t k = 0; k < sizes[static_cast<std::size_t>(i)]; ++k)
      ++counts[static_cast<std::size_t>(i)][static_cast<std::size_t>(rng.uniform_int(0, n - 1))];
  return from_counts(counts);
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("confusion counts") {
  const std::vector<int> labels{0, 0, 1, 1};
  const std::vector<int> preds{0, 1, 0, 1};
  CHECK(confusion(preds, labels, 2).counts == std::vector<std::vector<std::int64_t>>{{1, 1}, {1, 1}});
  const ConfusionMatrix perfect = confusion(labels, labels, 2);
  CHECK(perfect.counts == std::vector<std::vector<std::int64_t>>{{2, 0}, {0, 2}});
  const ConfusionMatrix empty = confusion(std::vector<int>{}, std::vector<int>{}, 3);
  CHECK(empty.total() == 0);
  CHECK(empty.n_classes() == 3);
  CHECK_THROWS(confusion(std::vector<int>{0}, labels, 2));
  CHECK_THROWS(confusion(std::vector<int>{0, 0, 2, 0}, labels, 2));
}

TEST_CASE("relative confusion arithmetic") {
  const ConfusionMatrix original = from_counts({{46, 4, 0}, {0, 50, 0}, {1, 1, 48}});
  const ConfusionMatrix stopped = from_counts({{45, 4, 1}, {0, 50, 0}, {1, 1, 48}});
  const RelativeConfusionMatrix rc = relative_confusion(stopped, original);
  CHECK(rc.delta[0][0] == doctest::Approx(-2.0));
  CHECK(rc.delta[0][2] == doctest::Approx(2.0));
  CHECK(rc.delta[1][1] == 0.0);

  const RelativeConfusionMatrix same = relative_confusion(original, original);
  for (const auto& row : same.delta)
    for (double v : row) CHECK(v == 0.0);

  const ConfusionMatrix other_population = from_counts({{45, 4, 0}, {0, 50, 0}, {1, 1, 48}});
  CHECK_THROWS(relative_confusion(other_population, original));
}

TEST_CASE("relative confusion rows sum to zero on random pairs") {
  Rng rng(2024);
  int cases = 0;
  for (int trial = 0; trial < 1200; ++trial) {
    const int n = static_cast<int>(rng.uniform_int(2, 10));
    std::vector<std::int64_t> sizes(static_cast<std::size_t>(n));
    for (auto& s : sizes) s = rng.uniform_int(0, 300);
    const RelativeConfusionMatrix rc = relative_confusion(random_rows(rng, sizes), random_rows(rng, sizes));
    for (int i = 0; i < n; ++i) {
      const auto& row = rc.delta[static_cast<std::size_t>(i)];
      CHECK(std::abs(std::accumulate(row.begin(), row.end(), 0.0)) <= 1e-9);
      for (double v : row) {
        CHECK(v >= -100.0);
        CHECK(v <= 100.0);
      }
    }
    ++cases;
  }
  CHECK(cases >= 1000);
}

TEST_CASE("precision, recall and F1") {
  for (const ClassPrf& p : prf1(from_counts({{3, 0}, {0, 5}}))) CHECK(p == ClassPrf{1.0, 1.0, 1.0});
  for (const ClassPrf& p : prf1(from_counts({{1, 1}, {1, 1}}))) CHECK(p == ClassPrf{0.5, 0.5, 0.5});
  const auto degenerate = prf1(from_counts({{4, 0, 0}, {0, 4, 0}, {0, 0, 0}}));
  CHECK(degenerate[2] == ClassPrf{0.0, 0.0, 0.0});
}

TEST_CASE("TPR and FPR") {
  const std::vector<int> labels{0, 0, 1, 1};
  const std::vector<int> preds{0, 1, 0, 1};
  const RateMeasure a = tpr_fpr(preds, labels, 0);
  CHECK(*a.tpr == 0.5);
  CHECK(*a.fpr == 0.5);
  const RateMeasure perfect = tpr_fpr(labels, labels, 1);
  CHECK(*perfect.tpr == 1.0);
  CHECK(*perfect.fpr == 0.0);
  const RateMeasure absent = tpr_fpr(preds, labels, 2);
  CHECK_FALSE(absent.tpr.has_value());
  CHECK(absent.fpr.has_value());
}

TEST_CASE("TPR equals recall on identical inputs") {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = static_cast<int>(rng.uniform_int(2, 6));
    std::vector<int> labels, preds;
    for (int k = 0; k < 80; ++k) {
      labels.push_back(static_cast<int>(rng.uniform_int(0, n - 1)));
      preds.push_back(static_cast<int>(rng.uniform_int(0, n - 1)));
    }
    const auto prf = prf1(confusion(preds, labels, n));
    for (int c = 0; c < n; ++c) {
      const RateMeasure r = tpr_fpr(preds, labels, c);
      if (r.tpr) CHECK(*r.tpr == prf[static_cast<std::size_t>(c)].recall);
    }
  }
}

TEST_CASE("ADCS sign saturation, neutrality and bounds") {
  Image bright(1, 8, 8), dim(1, 8, 8);
  Rng rng(3);
  for (std::size_t i = 0; i < bright.data.size(); ++i) {
    dim.data[i] = rng.uniform();
    bright.data[i] = 3.0 * dim.data[i];
  }
  const AdcsMap two = adcs({{bright}, {dim}});
  for (std::size_t i = 0; i < two.maps[0].size(); ++i) {
    // Frequencies where both spectra vanish give sign(0) = 0.
    if (two.average[0][0][i] == 0.0) continue;
    CHECK(two.maps[0][i] == 1.0);
    CHECK(two.maps[1][i] == -1.0);
  }

  const AdcsMap same = adcs({{dim}, {dim}});
  for (const auto& m : same.maps)
    for (double v : m) CHECK(v == 0.0);

  std::vector<std::vector<Image>> groups(5);
  for (int c = 0; c < 5; ++c)
    for (int k = 0; k < 4; ++k) groups[static_cast<std::size_t>(c)].push_back(testutil::random_image(3, 8, 100 * c + k));
  const AdcsMap many = adcs(groups);
  for (std::size_t i = 0; i < many.maps[0].size(); ++i) {
    // Exact in the integer accumulators; the channel average is a double.
    std::int64_t sign_total = 0;
    for (const auto& s : many.sign_sums) sign_total += s[i];
    CHECK(sign_total == 0);
    double sum = 0.0;
    for (const auto& m : many.maps) {
      CHECK(m[i] >= -4.0);
      CHECK(m[i] <= 4.0);
      sum += m[i];
    }
    CHECK(std::abs(sum) <= 1e-12);
  }

  CHECK_THROWS(adcs({{dim}}));
  CHECK_THROWS(adcs({{dim}, {}}));
}

TEST_CASE("serializations carry full precision") {
  const ConfusionMatrix a = from_counts({{2, 1}, {0, 3}});
  const ConfusionMatrix b = from_counts({{1, 2}, {0, 3}});
  const RelativeConfusionMatrix rc = relative_confusion(b, a);
  const std::string csv = relative_confusion_csv(rc);
  CHECK(csv.find("-33.333333333333") != std::string::npos);
  CHECK(relative_confusion_json(rc)["delta"][0][0].get<double>() == doctest::Approx(-100.0 / 3.0).epsilon(1e-15));
}

}  // TEST_SUITE

#include <algorithm>
#include <set>

#include "doctest.h"
#include "helpers.hpp"

#include "freqshort/dfm.hpp"
#include "freqshort/nnet.hpp"

using namespace freqshort;

namespace {

FrequencyScoreMap random_scores(int side, Rng& rng, bool ties) {
  FrequencyScoreMap m;
  m.side = side;
  m.pairs = unique_pairs(side);
  for (std::size_t i = 0; i < m.pairs.size(); ++i) {
    m.scores.push_back(ties ? static_cast<double>(rng.uniform_int(0, 3)) : rng.normal());
  }
  return m;
}

LabeledDataset class_set(int n, int side, int label, std::uint64_t seed) {
  LabeledDataset ds;
  ds.class_names = {"a", "b", "c"};
  for (int i = 0; i < n; ++i) ds.add(testutil::random_image(1, side, seed + i), label, "s" + std::to_string(i));
  return ds;
}

// Ignores image content, returns a fixed score row per sample.
class ConstantPredictor final : public Predictor {
 public:
  int n_classes() const override { return 3; }
  nn::Mat<double> scores(std::span<const Image> images, std::span<const std::string>) const override {
    nn::Mat<double> out(3, static_cast<Eigen::Index>(images.size()));
    for (Eigen::Index i = 0; i < out.cols(); ++i) out.col(i) << 0.2, 1.0, -0.5;
    return out;
  }
};

}  // namespace

TEST_SUITE("dfm") {

TEST_CASE("unique pairs cover the grid once") {
  for (int side : {4, 8, 10, 32}) {
    const auto pairs = unique_pairs(side);
    CHECK(pairs.front() == FrequencyCoord{0, 0});
    const CenteredGrid grid{side};
    std::set<std::size_t> covered;
    for (const FrequencyCoord& f : pairs) {
      CHECK(covered.insert(grid.index(f)).second);
      covered.insert(grid.index(grid.partner(f)));
    }
    CHECK(covered.size() == grid.size());
    // Four self-paired points (DC and the Nyquist corners) for even sides.
    CHECK(pairs.size() == (grid.size() - 4) / 2 + 4);
  }
  CHECK(unique_pairs(32).size() == 514u);
}

TEST_CASE("top-X cardinality") {
  CHECK(topx_count(5, 100) == 5u);
  CHECK(topx_count(1, 514) == 6u);
  CHECK(topx_count(5, 514) == 26u);
  CHECK(topx_count(10, 514) == 52u);
  CHECK(topx_count(100, 514) == 514u);
  CHECK(topx_count(0.001, 514) == 1u);
  CHECK_THROWS(topx_count(0, 10));
  CHECK_THROWS(topx_count(100.5, 10));

  Rng rng(8);
  const FrequencyScoreMap m = random_scores(32, rng, false);
  CHECK(select_topx(m, 100).mask.count() == 1024u);
  for (double x : {0.5, 1.0, 2.5, 5.0, 7.0, 10.0, 33.0}) {
    const DfmMask d = select_topx(m, x);
    CHECK(d.selected.size() == topx_count(x, 514));
    std::size_t bits = 0;
    const CenteredGrid grid{32};
    for (std::size_t idx : d.selected) bits += grid.partner(m.pairs[idx]) == m.pairs[idx] ? 1 : 2;
    CHECK(d.mask.count() == bits);
  }
}

TEST_CASE("five of a hundred pairs set nine or ten bits") {
  // A 10x10 grid has (100 - 4) / 2 + 4 = 52 pairs; build a 100-pair map by
  // hand on a 14x14 grid instead and rank its first 100 pairs.
  FrequencyScoreMap m;
  m.side = 14;
  m.pairs = unique_pairs(14);
  REQUIRE(m.pairs.size() == 100u);
  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    m.scores.clear();
    for (std::size_t i = 0; i < 100; ++i) m.scores.push_back(rng.normal());
    const DfmMask d = select_topx(m, 5);
    CHECK(d.selected.size() == 5u);
    CHECK(d.mask.count() >= 6u);
    CHECK(d.mask.count() <= 10u);
  }
  // DC on top, everything else tied: DC plus four partnered pairs.
  m.scores.assign(100, 0.0);
  m.scores[0] = 1.0;
  CHECK(select_topx(m, 5).mask.count() == 9u);
  m.scores[0] = 0.0;
  CHECK(select_topx(m, 5).mask.count() == 9u);
}

TEST_CASE("nesting 1% within 5% within 10% on random score maps") {
  Rng rng(77);
  for (int trial = 0; trial < 300; ++trial) {
    const FrequencyScoreMap m = random_scores(trial % 2 ? 32 : 16, rng, trial % 3 == 0);
    const DfmMask d1 = select_topx(m, 1), d5 = select_topx(m, 5), d10 = select_topx(m, 10);
    for (std::size_t i = 0; i < d1.mask.bits().size(); ++i) {
      if (d1.mask.bits()[i]) CHECK(d5.mask.bits()[i]);
      if (d5.mask.bits()[i]) CHECK(d10.mask.bits()[i]);
    }
  }
}

TEST_CASE("ties resolve by radius then row-major position") {
  FrequencyScoreMap m;
  m.side = 8;
  m.pairs = unique_pairs(8);
  m.scores.assign(m.pairs.size(), 0.0);
  const DfmMask a = select_topx(m, 10);
  const DfmMask b = select_topx(m, 10);
  CHECK(a.selected == b.selected);
  CHECK(m.pairs[a.selected[0]] == FrequencyCoord{0, 0});
  for (std::size_t k = 1; k < a.selected.size(); ++k) {
    CHECK(m.pairs[a.selected[k - 1]].radius() <= m.pairs[a.selected[k]].radius());
  }
}

TEST_CASE("scoring neutrality") {
  // Zero at every (odd, odd) frequency except DC: only even frequencies present.
  LabeledDataset ds = class_set(3, 8, 1, 10);
  const FrequencyMask even = [] {
    std::vector<bool> bits(64, false);
    const CenteredGrid grid{8};
    for (std::size_t i = 0; i < 64; ++i) {
      const FrequencyCoord f = grid.coord(i);
      bits[i] = f.u % 2 == 0 && f.v % 2 == 0;
    }
    return FrequencyMask(8, bits);
  }();
  for (Image& img : ds.images) img = filter_image(img, even);

  nn::Architecture a;
  a.input_side = 8;
  a.widths = {2, 2, 4};
  a.n_classes = 3;
  const ModelPredictor model(nn::Model::init(a, 2));
  const FrequencyScoreMap s = score_frequencies(model, ds);
  bool any_nonzero = false;
  for (std::size_t k = 0; k < s.pairs.size(); ++k) {
    const FrequencyCoord f = s.pairs[k];
    if (!even.keep(f)) CHECK(s.scores[k] == 0.0);
    else any_nonzero |= s.scores[k] != 0.0;
  }
  CHECK(any_nonzero);
  CHECK(score_frequencies(model, ds).scores == s.scores);

  const FrequencyScoreMap flat = score_frequencies(ConstantPredictor{}, ds);
  for (double v : flat.scores) CHECK(v == 0.0);

  LabeledDataset mixed = ds;
  mixed.labels[1] = 0;
  CHECK_THROWS(score_frequencies(model, mixed));
  CHECK_THROWS(score_frequencies(model, class_set(0, 8, 0, 1)));
}

TEST_CASE("filtering with a DFM") {
  const LabeledDataset ds = class_set(4, 8, 2, 30);
  FrequencyScoreMap m;
  m.side = 8;
  m.pairs = unique_pairs(8);
  m.scores.assign(m.pairs.size(), 0.0);
  const LabeledDataset same = filter_dataset_with_dfm(ds, select_topx(m, 100));
  for (std::size_t i = 0; i < ds.size(); ++i) CHECK(testutil::max_abs_diff(same.images[i], ds.images[i]) <= 1e-6);
  CHECK(same.labels == ds.labels);

  m.scores[0] = 1.0;
  const DfmMask dc = select_topx(m, 0.1);
  REQUIRE(dc.mask.count() == 1u);
  const LabeledDataset flat = filter_dataset_with_dfm(ds, dc);
  for (const Image& img : flat.images) {
    const auto [lo, hi] = std::minmax_element(img.data.begin(), img.data.end());
    CHECK(*hi - *lo <= 1e-12);
  }

  m.scores[0] = 0.0;
  m.scores[5] = 2.0;
  const DfmMask d = select_topx(m, 20);
  const LabeledDataset once = filter_dataset_with_dfm(ds, d);
  const LabeledDataset twice = filter_dataset_with_dfm(once, d);
  for (std::size_t i = 0; i < ds.size(); ++i) CHECK(testutil::max_abs_diff(once.images[i], twice.images[i]) <= 1e-6);

  CHECK_THROWS_AS(filter_dataset(ds, low_pass_mask(16, 3)), DimensionError);
}

TEST_CASE("shortcut report flags need both rates") {
  LabeledDataset test;
  test.class_names = {"a", "b", "c"};
  for (int c = 0; c < 3; ++c)
    for (int k = 0; k < 4; ++k) test.add(testutil::random_image(1, 8, 10 * c + k), c, std::to_string(c) + "_" + std::to_string(k));

  // Every sample is predicted as class 1 regardless of filtering.
  FrequencyScoreMap m;
  m.side = 8;
  m.pairs = unique_pairs(8);
  m.scores.assign(m.pairs.size(), 0.0);
  std::map<int, DfmMask> dfms;
  for (int c = 0; c < 3; ++c) {
    DfmMask d = select_topx(m, 5);
    d.class_id = c;
    dfms.emplace(c, d);
  }
  const ShortcutReport r = shortcut_report(ConstantPredictor{}, test, dfms, 5, 0.5, 0.1);
  REQUIRE(r.rows.size() == 3u);
  CHECK(*r.rows[1].filtered.tpr == 1.0);
  CHECK(*r.rows[1].filtered.fpr == 1.0);
  CHECK(r.rows[1].shortcut);
  CHECK(*r.rows[0].filtered.tpr == 0.0);
  CHECK_FALSE(r.rows[0].shortcut);

  // TPR 1 with FPR 0: robust but not a shortcut.
  LabeledDataset only_b = test.only_class(1);
  const ShortcutReport r2 = shortcut_report(ConstantPredictor{}, only_b, dfms, 5, 0.5, 0.1, {1});
  CHECK(*r2.rows[0].filtered.tpr == 1.0);
  CHECK_FALSE(r2.rows[0].filtered.fpr.has_value());
  CHECK_FALSE(r2.rows[0].shortcut);

  const std::string csv = shortcut_report_csv(r2);
  CHECK(csv.rfind("class,name,tpr,fpr,tpr_df,fpr_df,top_x_percent,tau_tpr,tau_fpr,shortcut\n", 0) == 0);
  CHECK(csv.find("absent") != std::string::npos);
  CHECK(shortcut_report_json(r)["tau_fpr"].get<double>() == 0.1);

  std::map<int, DfmMask> partial = dfms;
  partial.erase(2);
  CHECK_THROWS_WITH(shortcut_report(ConstantPredictor{}, test, partial, 5, 0.5, 0.1), doctest::Contains("class 2 (c)"));
  CHECK_THROWS(shortcut_report(ConstantPredictor{}, test, dfms, 10, 0.5, 0.1));
}

}  // TEST_SUITE

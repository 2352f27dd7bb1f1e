#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "freqshort/dataset.hpp"
#include "freqshort/metrics.hpp"
#include "freqshort/predictor.hpp"
#include "freqshort/spectrum.hpp"

namespace freqshort {

/// One representative per Hermitian pair: DC first, then the remaining
/// representatives in row-major order of the centered grid. The
/// representative is the pair member with the lower row-major index.
std::vector<FrequencyCoord> unique_pairs(int side);

/// Loss increment caused by removing each frequency pair from every image
/// of one class.
struct FrequencyScoreMap {
  int side = 0;
  int class_id = 0;
  double baseline = 0.0;
  std::vector<FrequencyCoord> pairs;  // unique_pairs(side) order
  std::vector<double> scores;         // parallel to pairs
  std::string provenance;

  /// side*side map with both members of each pair set to the pair score.
  std::vector<double> dense() const;
};

/// Images must be non-empty and share one label.
FrequencyScoreMap score_frequencies(const Predictor& predictor, const LabeledDataset& class_images);

struct DfmMask {
  FrequencyMask mask;
  double percent = 0.0;
  int class_id = 0;
  std::vector<std::size_t> selected;  // indices into the score map's pairs, in rank order
};

/// Number of pairs retained at X percent: ceil(X/100 * n_pairs).
std::size_t topx_count(double percent, std::size_t n_pairs);

/// Ranks pairs by score (descending), ties by lower radius then row-major
/// position, and keeps the top X percent of pairs.
DfmMask select_topx(const FrequencyScoreMap& scores, double percent);

LabeledDataset filter_dataset(const LabeledDataset& dataset, const FrequencyMask& mask);
LabeledDataset filter_dataset_with_dfm(const LabeledDataset& dataset, const DfmMask& dfm);

struct ShortcutRow {
  int class_id = 0;
  std::string class_name;
  RateMeasure original;
  RateMeasure filtered;
  bool shortcut = false;
};

struct ShortcutReport {
  double percent = 5.0;
  double tau_tpr = 0.5;
  double tau_fpr = 0.10;
  std::vector<ShortcutRow> rows;
  nlohmann::json provenance = nlohmann::json::object();
};

/// For each requested class (default: all), predicts on the whole test set
/// filtered with that class's DFM and flags a shortcut when both TPR and FPR
/// reach their thresholds. Throws naming the class when its DFM is missing.
ShortcutReport shortcut_report(const Predictor& predictor, const LabeledDataset& test,
                               const std::map<int, DfmMask>& dfms, double percent, double tau_tpr,
                               double tau_fpr, std::vector<int> classes = {});

std::string shortcut_report_csv(const ShortcutReport& report);
nlohmann::json shortcut_report_json(const ShortcutReport& report);

}  // namespace freqshort

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "freqshort/spectrum.hpp"

namespace freqshort {

struct ConfusionMatrix {
  std::vector<std::string> class_names;
  std::vector<std::vector<std::int64_t>> counts;  // counts[true][pred]

  int n_classes() const { return static_cast<int>(counts.size()); }
  std::int64_t row_sum(int i) const;
  std::int64_t col_sum(int j) const;
  std::int64_t total() const;
};

/// Throws std::invalid_argument on length mismatch or out-of-range indices.
ConfusionMatrix confusion(std::span<const int> preds, std::span<const int> labels, int n_classes);

/// Percentage-point change between a filtered and an original evaluation of
/// the same test population.
struct RelativeConfusionMatrix {
  std::vector<std::string> class_names;
  std::vector<std::vector<double>> delta;
  std::vector<std::int64_t> class_sizes;
  std::string filtered_tag;
  std::string original_tag = "original";
};

/// Rejects matrices whose row sums differ (different populations).
RelativeConfusionMatrix relative_confusion(const ConfusionMatrix& bandstop, const ConfusionMatrix& original);

struct ClassPrf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;

  bool operator==(const ClassPrf&) const = default;
};

/// Per-class precision, recall and F1; zero denominators yield 0.
std::vector<ClassPrf> prf1(const ConfusionMatrix& cm);

struct RateMeasure {
  std::optional<double> tpr;  // absent when the class has no samples
  std::optional<double> fpr;  // absent when there are no other-class samples
};

RateMeasure tpr_fpr(std::span<const int> preds, std::span<const int> labels, int cls);

/// One-channel ADCS map per class plus the class-average amplitude spectra.
struct AdcsMap {
  int side = 0;
  int channels = 0;
  std::vector<std::string> class_names;
  std::vector<std::vector<double>> maps;                  // [class][centered index]
  std::vector<std::vector<std::int64_t>> sign_sums;       // [class][index], summed over channels
  std::vector<std::vector<std::vector<double>>> average;  // [class][channel][index] mean |F|

  double value(int cls, FrequencyCoord f) const;
};

/// Images grouped by class. Requires >= 2 non-empty classes of equal shape.
AdcsMap adcs(const std::vector<std::vector<Image>>& by_class, std::vector<std::string> class_names = {});

/// Mean ADCS of one class over the frequencies kept by `mask`.
double masked_mean(const AdcsMap& map, int cls, const FrequencyMask& mask, bool exclude_dc);

// Serialization
std::string confusion_csv(const ConfusionMatrix& cm);
nlohmann::json confusion_json(const ConfusionMatrix& cm);
/// Full precision; console summaries round to one decimal.
std::string relative_confusion_csv(const RelativeConfusionMatrix& rc);
nlohmann::json relative_confusion_json(const RelativeConfusionMatrix& rc);
std::string prf_csv(const std::vector<ClassPrf>& prf, const std::vector<std::string>& class_names);
nlohmann::json prf_json(const std::vector<ClassPrf>& prf, const std::vector<std::string>& class_names);

}  // namespace freqshort

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "freqshort/spectrum.hpp"

namespace freqshort {

enum class Split { train, val, test };

std::string split_name(Split split);
/// Throws std::invalid_argument for anything but train/val/test.
Split parse_split(const std::string& name);

struct LabeledDataset {
  Split split = Split::test;
  std::vector<std::string> class_names;
  std::vector<Image> images;
  std::vector<int> labels;
  std::vector<std::string> ids;  // unique within the split, e.g. "class_0_C0/000012"
  std::string provenance;

  std::size_t size() const { return images.size(); }
  int n_classes() const { return static_cast<int>(class_names.size()); }
  std::vector<std::size_t> class_counts() const;
  /// Subset holding only samples of one class, order preserved.
  LabeledDataset only_class(int cls) const;
  void add(Image image, int label, std::string id);
  /// Checks label range, matching shapes and id/label/image counts.
  void validate() const;
};

}  // namespace freqshort

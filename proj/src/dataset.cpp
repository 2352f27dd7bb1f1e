#include "freqshort/dataset.hpp"

#include <stdexcept>

namespace freqshort {

std::string split_name(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "test";
}

Split parse_split(const std::string& name) {
  if (name == "train") return Split::train;
  if (name == "val") return Split::val;
  if (name == "test") return Split::test;
  throw std::invalid_argument("unknown split '" + name + "' (expected train, val or test)");
}

std::vector<std::size_t> LabeledDataset::class_counts() const {
  std::vector<std::size_t> counts(class_names.size(), 0);
  for (int label : labels) ++counts.at(static_cast<std::size_t>(label));
  return counts;
}

LabeledDataset LabeledDataset::only_class(int cls) const {
  LabeledDataset out;
  out.split = split;
  out.class_names = class_names;
  out.provenance = provenance;
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (labels[i] == cls) out.add(images[i], labels[i], ids[i]);
  }
  return out;
}

void LabeledDataset::add(Image image, int label, std::string id) {
  images.push_back(std::move(image));
  labels.push_back(label);
  ids.push_back(std::move(id));
}

void LabeledDataset::validate() const {
  if (labels.size() != images.size() || ids.size() != images.size()) {
    throw std::invalid_argument("dataset: images, labels and ids differ in length");
  }
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= n_classes()) {
      throw std::invalid_argument("dataset: label " + std::to_string(labels[i]) + " of '" + ids[i] +
                                  "' outside [0, " + std::to_string(n_classes()) + ")");
    }
    if (!images[i].same_shape(images.front())) {
      throw DimensionError("dataset: image '" + ids[i] + "' differs in shape from '" + ids.front() + "'");
    }
  }
}

}  // namespace freqshort

#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "freqshort/dataset.hpp"
#include "freqshort/nnet.hpp"

namespace freqshort {

/// Anything that maps images to per-class scores. Scores are treated as
/// logits wherever a loss is needed.
class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual int n_classes() const = 0;
  /// n_classes x images.size(); ids identify the source sample of each image.
  virtual nn::Mat<double> scores(std::span<const Image> images, std::span<const std::string> ids) const = 0;
};

class ModelPredictor final : public Predictor {
 public:
  explicit ModelPredictor(nn::Model model, int chunk = 128) : model_(std::move(model)), chunk_(chunk) {}

  int n_classes() const override { return model_.arch().n_classes; }
  nn::Mat<double> scores(std::span<const Image> images, std::span<const std::string> ids) const override;
  const nn::Model& model() const { return model_; }

 private:
  nn::Model model_;
  int chunk_;
};

/// External prediction table; rows are looked up by sample id and ignore
/// image content.
class TablePredictor final : public Predictor {
 public:
  TablePredictor(int n_classes, std::map<std::string, std::vector<double>> rows);
  /// CSV columns: id,score_0,...,score_{k-1}; a header row is optional.
  static TablePredictor from_csv(const std::filesystem::path& path);

  int n_classes() const override { return n_classes_; }
  nn::Mat<double> scores(std::span<const Image> images, std::span<const std::string> ids) const override;

 private:
  int n_classes_;
  std::map<std::string, std::vector<double>> rows_;
};

struct Predictions {
  std::vector<int> labels;
  nn::Mat<double> scores;
};

/// Argmax with ties resolved toward the lower class index.
int argmax_lower(const Eigen::Ref<const Eigen::VectorXd>& column);

Predictions predict(const Predictor& predictor, const LabeledDataset& dataset);
Predictions predict(const Predictor& predictor, std::span<const Image> images, std::span<const std::string> ids);

}  // namespace freqshort

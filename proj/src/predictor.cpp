#include "freqshort/predictor.hpp"

#include <algorithm>
#include <stdexcept>

#include "freqshort/io.hpp"

namespace freqshort {

nn::Mat<double> ModelPredictor::scores(std::span<const Image> images, std::span<const std::string>) const {
  nn::Mat<double> out(n_classes(), static_cast<Eigen::Index>(images.size()));
  for (std::size_t start = 0; start < images.size(); start += static_cast<std::size_t>(chunk_)) {
    const std::size_t n = std::min(images.size() - start, static_cast<std::size_t>(chunk_));
    const nn::Mat<float> logits = model_.forward(images.subspan(start, n));
    out.middleCols(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(n)) = logits.cast<double>();
  }
  return out;
}

TablePredictor::TablePredictor(int n_classes, std::map<std::string, std::vector<double>> rows)
    : n_classes_(n_classes), rows_(std::move(rows)) {
  if (n_classes_ < 2) throw std::invalid_argument("prediction table: need at least two score columns");
  for (const auto& [id, row] : rows_) {
    if (static_cast<int>(row.size()) != n_classes_) {
      throw std::invalid_argument("prediction table: row '" + id + "' has " + std::to_string(row.size()) +
                                  " scores, expected " + std::to_string(n_classes_));
    }
  }
}

TablePredictor TablePredictor::from_csv(const std::filesystem::path& path) {
  const auto rows = parse_csv(read_text(path));
  std::map<std::string, std::vector<double>> table;
  int n_classes = -1;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& cells = rows[r];
    if (cells.size() < 3) throw std::runtime_error("'" + path.string() + "' row " + std::to_string(r + 1) + ": too few columns");
    if (r == 0 && cells[0] == "id") continue;
    std::vector<double> scores;
    for (std::size_t c = 1; c < cells.size(); ++c) {
      try {
        scores.push_back(std::stod(cells[c]));
      } catch (const std::exception&) {
        throw std::runtime_error("'" + path.string() + "' row " + std::to_string(r + 1) + ": bad score '" + cells[c] + "'");
      }
    }
    if (n_classes < 0) n_classes = static_cast<int>(scores.size());
    table[cells[0]] = std::move(scores);
  }
  if (table.empty()) throw std::runtime_error("'" + path.string() + "' holds no predictions");
  return TablePredictor(n_classes, std::move(table));
}

nn::Mat<double> TablePredictor::scores(std::span<const Image> images, std::span<const std::string> ids) const {
  if (ids.size() != images.size()) throw std::invalid_argument("prediction table: every image needs an id");
  nn::Mat<double> out(n_classes_, static_cast<Eigen::Index>(ids.size()));
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto it = rows_.find(ids[i]);
    if (it == rows_.end()) throw std::out_of_range("prediction table has no row for id '" + ids[i] + "'");
    for (int k = 0; k < n_classes_; ++k) out(k, static_cast<Eigen::Index>(i)) = it->second[static_cast<std::size_t>(k)];
  }
  return out;
}

int argmax_lower(const Eigen::Ref<const Eigen::VectorXd>& column) {
  int best = 0;
  for (Eigen::Index k = 1; k < column.size(); ++k) {
    if (column(k) > column(best)) best = static_cast<int>(k);
  }
  return best;
}

Predictions predict(const Predictor& predictor, std::span<const Image> images, std::span<const std::string> ids) {
  Predictions p;
  p.scores = predictor.scores(images, ids);
  p.labels.reserve(images.size());
  for (Eigen::Index n = 0; n < p.scores.cols(); ++n) p.labels.push_back(argmax_lower(p.scores.col(n)));
  return p;
}

Predictions predict(const Predictor& predictor, const LabeledDataset& dataset) {
  return predict(predictor, dataset.images, dataset.ids);
}

}  // namespace freqshort

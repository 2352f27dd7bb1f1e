#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "freqshort/dataset.hpp"
#include "freqshort/metrics.hpp"
#include "freqshort/nnet.hpp"

namespace freqshort {

struct TrainConfig {
  double lr = 0.01;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  int batch_size = 128;
  int epochs = 100;
  double plateau_factor = 10.0;
  int plateau_patience = 10;  // epochs without a validation-loss decrease
  std::uint64_t seed = 0;
  int probe_iterations = 500;  // log probe metrics for iterations 1..M
  int probe_stride = 1;
  int max_iterations = 0;  // 0: run every epoch
  std::array<int, 3> widths{16, 32, 64};

  void validate() const;
};

struct IterationRecord {
  int iteration = 0;  // 1-based
  double loss = 0.0;
  std::optional<std::vector<ClassPrf>> probe;
  std::vector<int> probe_predictions;

  bool operator==(const IterationRecord&) const = default;
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;

  bool operator==(const EpochRecord&) const = default;
};

struct TrainLog {
  int n_classes = 0;
  std::vector<IterationRecord> iterations;
  std::vector<EpochRecord> epochs;

  bool operator==(const TrainLog&) const = default;

  /// Mean probe F1 of one class over logged iterations in [first, last].
  double mean_probe_f1(int cls, int first, int last) const;
};

struct TrainResult {
  nn::Model model;
  TrainLog log;
};

/// Seeded minibatch SGD with the plateau schedule on validation loss. Probe
/// metrics are computed after each of the first `probe_iterations` steps.
TrainResult train(const LabeledDataset& train_set, const LabeledDataset& val_set, const LabeledDataset& probe_set,
                  const TrainConfig& config, const std::function<void(const EpochRecord&)>& on_epoch = {});

/// Pixel mean and standard deviation over a dataset (std 1 when constant).
std::pair<double, double> input_statistics(const LabeledDataset& dataset);

/// Mean cross-entropy of the model over a dataset, evaluated in chunks.
double dataset_loss(const nn::Model& model, const LabeledDataset& dataset, int chunk = 128);

std::string trainlog_csv(const TrainLog& log);
std::string lr_schedule_csv(const TrainLog& log);
std::string probe_predictions_csv(const TrainLog& log);
TrainLog parse_trainlog(const std::string& trainlog, const std::string& lr_schedule,
                        const std::string& probe_predictions);

}  // namespace freqshort

#include "freqshort/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <tuple>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "freqshort/io.hpp"
#include "freqshort/predictor.hpp"
#include "freqshort/rng.hpp"

namespace freqshort {

namespace {

using nn::Mat;

Mat<float> gather_columns(const Mat<float>& packed, std::span<const std::size_t> samples, std::size_t plane) {
  Mat<float> out(packed.rows(), static_cast<Eigen::Index>(samples.size() * plane));
  for (std::size_t i = 0; i < samples.size(); ++i) {
    out.middleCols(static_cast<Eigen::Index>(i * plane), static_cast<Eigen::Index>(plane)) =
        packed.middleCols(static_cast<Eigen::Index>(samples[i] * plane), static_cast<Eigen::Index>(plane));
  }
  return out;
}

std::vector<int> predict_packed(const nn::Model& model, const Mat<float>& packed, std::size_t n, std::size_t plane,
                                std::size_t chunk) {
  std::vector<int> out;
  out.reserve(n);
  for (std::size_t start = 0; start < n; start += chunk) {
    const std::size_t m = std::min(chunk, n - start);
    const Mat<float> logits = model.forward(
        packed.middleCols(static_cast<Eigen::Index>(start * plane), static_cast<Eigen::Index>(m * plane)),
        static_cast<int>(m));
    for (Eigen::Index k = 0; k < logits.cols(); ++k) {
      out.push_back(argmax_lower(logits.col(k).cast<double>()));
    }
  }
  return out;
}

}  // namespace

std::pair<double, double> input_statistics(const LabeledDataset& dataset) {
  double sum = 0.0;
  double sq = 0.0;
  std::size_t n = 0;
  for (const Image& img : dataset.images) {
    for (double v : img.data) {
      sum += v;
      sq += v * v;
    }
    n += img.data.size();
  }
  if (n == 0) return {0.0, 1.0};
  const double mean = sum / static_cast<double>(n);
  const double var = std::max(0.0, sq / static_cast<double>(n) - mean * mean);
  return {mean, var > 0.0 ? std::sqrt(var) : 1.0};
}

void TrainConfig::validate() const {
  if (!(lr > 0.0) || momentum < 0.0 || weight_decay < 0.0) {
    throw std::invalid_argument("train config: lr must be positive, momentum and weight decay non-negative");
  }
  if (batch_size < 1 || epochs < 1) throw std::invalid_argument("train config: batch size and epochs must be >= 1");
  if (!(plateau_factor > 0.0) || plateau_patience < 1) {
    throw std::invalid_argument("train config: plateau factor and patience must be positive");
  }
  if (probe_iterations < 0 || probe_stride < 1 || max_iterations < 0) {
    throw std::invalid_argument("train config: probe settings must be non-negative (stride >= 1)");
  }
}

double TrainLog::mean_probe_f1(int cls, int first, int last) const {
  double sum = 0.0;
  int n = 0;
  for (const IterationRecord& r : iterations) {
    if (r.iteration < first || r.iteration > last || !r.probe) continue;
    sum += r.probe->at(static_cast<std::size_t>(cls)).f1;
    ++n;
  }
  if (n == 0) throw std::invalid_argument("mean_probe_f1: no probe records in the requested range");
  return sum / n;
}

double dataset_loss(const nn::Model& model, const LabeledDataset& dataset, int chunk) {
  if (dataset.size() == 0) return 0.0;
  double sum = 0.0;
  const std::span<const Image> images(dataset.images);
  const std::span<const int> labels(dataset.labels);
  for (std::size_t start = 0; start < dataset.size(); start += static_cast<std::size_t>(chunk)) {
    const std::size_t n = std::min(dataset.size() - start, static_cast<std::size_t>(chunk));
    const auto terms = nn::cross_entropy_terms(model.forward(images.subspan(start, n)), labels.subspan(start, n));
    for (double t : terms) sum += t;
  }
  return sum / static_cast<double>(dataset.size());
}

TrainResult train(const LabeledDataset& train_set, const LabeledDataset& val_set, const LabeledDataset& probe_set,
                  const TrainConfig& config, const std::function<void(const EpochRecord&)>& on_epoch) {
  config.validate();
  if (train_set.size() == 0) throw std::invalid_argument("train: training split is empty");
  if (val_set.size() == 0) throw std::invalid_argument("train: validation split is empty");
  train_set.validate();
  val_set.validate();
  probe_set.validate();

  const Image& first = train_set.images.front();
  nn::Architecture arch;
  arch.in_channels = first.channels;
  arch.input_side = first.height;
  arch.widths = config.widths;
  arch.n_classes = train_set.n_classes();
  std::tie(arch.input_mean, arch.input_std) = input_statistics(train_set);

  TrainResult result{nn::Model::init(arch, derive_seed(config.seed, {1})), {}};
  nn::Model& model = result.model;
  TrainLog& log = result.log;
  log.n_classes = arch.n_classes;
  auto state = nn::make_sgd_state(model);
  Rng rng(derive_seed(config.seed, {2}));

  const std::size_t plane = first.plane();
  const Mat<float> packed = nn::pack_images<float>(train_set.images, arch);
  const Mat<float> probe_packed = nn::pack_images<float>(probe_set.images, arch);

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto batch = static_cast<std::size_t>(config.batch_size);

  double lr = config.lr;
  double best_val = std::numeric_limits<double>::infinity();
  int bad_epochs = 0;
  int iteration = 0;
  bool stop = false;

  for (int epoch = 1; epoch <= config.epochs && !stop; ++epoch) {
    rng.shuffle(order.begin(), order.end());
    double epoch_loss = 0.0;
    int epoch_iters = 0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::span<const std::size_t> idx(order.data() + start, std::min(batch, order.size() - start));
      std::vector<int> labels;
      labels.reserve(idx.size());
      for (std::size_t i : idx) labels.push_back(train_set.labels[i]);

      const auto lg = model.loss_and_grads(gather_columns(packed, idx, plane), labels);
      if (!std::isfinite(lg.loss)) {
        throw std::runtime_error("train: loss became non-finite at iteration " + std::to_string(iteration + 1) +
                                 " (lr " + format_double(lr) + "); lower the learning rate");
      }
      nn::sgd_step(model, lg.grads, state, lr, config.momentum, config.weight_decay);
      ++iteration;
      epoch_loss += lg.loss;
      ++epoch_iters;

      IterationRecord rec;
      rec.iteration = iteration;
      rec.loss = lg.loss;
      if (iteration <= config.probe_iterations && (iteration - 1) % config.probe_stride == 0 &&
          probe_set.size() > 0) {
        rec.probe_predictions = predict_packed(model, probe_packed, probe_set.size(), plane, batch);
        rec.probe = prf1(confusion(rec.probe_predictions, probe_set.labels, arch.n_classes));
      }
      log.iterations.push_back(std::move(rec));
      if (config.max_iterations > 0 && iteration >= config.max_iterations) {
        stop = true;
        break;
      }
    }

    EpochRecord er{epoch, epoch_loss / epoch_iters, dataset_loss(model, val_set, config.batch_size), lr};
    log.epochs.push_back(er);
    if (er.val_loss < best_val) {
      best_val = er.val_loss;
      bad_epochs = 0;
    } else if (++bad_epochs >= config.plateau_patience) {
      lr /= config.plateau_factor;
      bad_epochs = 0;
    }
    if (on_epoch) on_epoch(er);
  }
  return result;
}

// ---------------------------------------------------------------------------
// TrainLog files

std::string trainlog_csv(const TrainLog& log) {
  std::ostringstream os;
  os << "iteration,loss";
  for (int c = 0; c < log.n_classes; ++c) os << ",precision_C" << c << ",recall_C" << c << ",f1_C" << c;
  os << '\n';
  for (const IterationRecord& r : log.iterations) {
    os << r.iteration << ',' << format_double(r.loss);
    for (int c = 0; c < log.n_classes; ++c) {
      if (r.probe) {
        const ClassPrf& p = r.probe->at(static_cast<std::size_t>(c));
        os << ',' << format_double(p.precision) << ',' << format_double(p.recall) << ',' << format_double(p.f1);
      } else {
        os << ",,,";
      }
    }
    os << '\n';
  }
  return os.str();
}

std::string lr_schedule_csv(const TrainLog& log) {
  std::ostringstream os;
  os << "epoch,train_loss,val_loss,lr\n";
  for (const EpochRecord& e : log.epochs) {
    os << e.epoch << ',' << format_double(e.train_loss) << ',' << format_double(e.val_loss) << ','
       << format_double(e.lr) << '\n';
  }
  return os.str();
}

std::string probe_predictions_csv(const TrainLog& log) {
  std::ostringstream os;
  os << "iteration,predictions\n";
  for (const IterationRecord& r : log.iterations) {
    if (!r.probe) continue;
    os << r.iteration << ',';
    for (std::size_t i = 0; i < r.probe_predictions.size(); ++i) {
      os << (i ? " " : "") << r.probe_predictions[i];
    }
    os << '\n';
  }
  return os.str();
}

TrainLog parse_trainlog(const std::string& trainlog, const std::string& lr_schedule,
                        const std::string& probe_predictions) {
  TrainLog log;
  const auto rows = parse_csv(trainlog);
  if (rows.empty() || rows[0].size() < 2 || (rows[0].size() - 2) % 3 != 0) {
    throw std::runtime_error("trainlog.csv: malformed header");
  }
  log.n_classes = static_cast<int>((rows[0].size() - 2) / 3);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& cells = rows[r];
    if (cells.size() != rows[0].size()) throw std::runtime_error("trainlog.csv: row " + std::to_string(r) + " has wrong width");
    IterationRecord rec;
    rec.iteration = std::stoi(cells[0]);
    rec.loss = std::stod(cells[1]);
    if (!cells[2].empty()) {
      std::vector<ClassPrf> prf;
      for (int c = 0; c < log.n_classes; ++c) {
        const std::size_t b = 2 + 3 * static_cast<std::size_t>(c);
        prf.push_back({std::stod(cells[b]), std::stod(cells[b + 1]), std::stod(cells[b + 2])});
      }
      rec.probe = std::move(prf);
    }
    log.iterations.push_back(std::move(rec));
  }
  const auto lr_rows = parse_csv(lr_schedule);
  for (std::size_t r = 1; r < lr_rows.size(); ++r) {
    const auto& c = lr_rows[r];
    if (c.size() != 4) throw std::runtime_error("lr_schedule.csv: row " + std::to_string(r) + " has wrong width");
    log.epochs.push_back({std::stoi(c[0]), std::stod(c[1]), std::stod(c[2]), std::stod(c[3])});
  }
  const auto pred_rows = parse_csv(probe_predictions);
  for (std::size_t r = 1; r < pred_rows.size(); ++r) {
    const int it = std::stoi(pred_rows[r].at(0));
    if (it < 1 || static_cast<std::size_t>(it) > log.iterations.size()) {
      throw std::runtime_error("probe_predictions.csv: unknown iteration " + std::to_string(it));
    }
    std::istringstream in(pred_rows[r].size() > 1 ? pred_rows[r][1] : "");
    std::vector<int>& preds = log.iterations[static_cast<std::size_t>(it - 1)].probe_predictions;
    for (int p; in >> p;) preds.push_back(p);
  }
  return log;
}

}  // namespace freqshort

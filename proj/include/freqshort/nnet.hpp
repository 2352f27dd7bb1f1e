#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "freqshort/spectrum.hpp"

namespace freqshort::nn {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;

/// Compact residual CNN: 3x3 stem, three residual stages of two 3x3 convs
/// with identity skips, stride-2 3x3 transition convs between stages, global
/// average pooling and a linear head. No normalization layers; inputs pass
/// through a fixed affine standardization (x - input_mean) / input_std whose
/// constants are taken from the training split and stored with the model.
struct Architecture {
  int in_channels = 1;
  int input_side = 32;
  std::array<int, 3> widths{16, 32, 64};
  int n_classes = 4;
  double input_mean = 0.0;
  double input_std = 1.0;

  bool operator==(const Architecture&) const = default;
  void validate() const;
};

/// Activations are stored as (channels x batch*side*side), one column per
/// spatial position, so a 3x3 convolution becomes a single GEMM over im2col.
template <typename T>
Mat<T> pack_images(std::span<const Image> images, const Architecture& arch);

template <typename T>
struct LossAndGrads {
  double loss = 0.0;
  std::vector<Mat<T>> grads;  // same layout as BasicModel::params()
};

template <typename T>
class BasicModel {
 public:
  explicit BasicModel(const Architecture& arch);

  /// He-scaled conv weights, zero biases, small zero-mean head.
  static BasicModel init(const Architecture& arch, std::uint64_t seed);

  const Architecture& arch() const { return arch_; }
  std::vector<Mat<T>>& params() { return params_; }
  const std::vector<Mat<T>>& params() const { return params_; }
  const std::vector<std::string>& param_names() const { return names_; }
  std::size_t parameter_count() const;

  /// Logits, n_classes x batch.
  Mat<T> forward(const Mat<T>& input, int batch) const;
  Mat<T> forward(std::span<const Image> images) const;

  /// Mean softmax cross-entropy and its gradient with respect to every parameter.
  LossAndGrads<T> loss_and_grads(const Mat<T>& input, std::span<const int> labels) const;
  LossAndGrads<T> loss_and_grads(std::span<const Image> images, std::span<const int> labels) const;

  template <typename U>
  BasicModel<U> cast() const {
    BasicModel<U> out(arch_);
    for (std::size_t i = 0; i < params_.size(); ++i) out.params()[i] = params_[i].template cast<U>();
    return out;
  }

  bool operator==(const BasicModel& o) const { return arch_ == o.arch_ && params_ == o.params_; }

 private:
  struct Cache;
  static constexpr int kChunk = 16;
  Mat<T> run(const Mat<T>& input, int batch, Cache* cache) const;
  /// Adds this chunk's share of the batch-mean gradient; returns its summed loss.
  double accumulate(const Mat<T>& input, std::span<const int> labels, int total, std::vector<Mat<T>>& grads) const;

  Architecture arch_;
  std::vector<std::string> names_;
  std::vector<Mat<T>> params_;
};

using Model = BasicModel<float>;

/// Per-sample mean cross-entropy terms (for scoring), natural log.
template <typename T>
std::vector<double> cross_entropy_terms(const Mat<T>& logits, std::span<const int> labels);

template <typename T>
double mean_cross_entropy(const Mat<T>& logits, std::span<const int> labels);

template <typename T>
struct SgdState {
  std::vector<Mat<T>> velocity;
};

template <typename T>
SgdState<T> make_sgd_state(const BasicModel<T>& model);

/// v <- momentum*v + (g + weight_decay*theta); theta <- theta - lr*v.
template <typename T>
void sgd_step(BasicModel<T>& model, const std::vector<Mat<T>>& grads, SgdState<T>& state, double lr,
              double momentum, double weight_decay);

/// Checkpoint: "FQLC", u32 descriptor length, JSON architecture descriptor,
/// then one FQL1 tensor container per parameter.
void save_checkpoint(const std::filesystem::path& path, const Model& model);
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace freqshort::nn

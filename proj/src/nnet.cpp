#include "freqshort/nnet.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <stdexcept>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "freqshort/io.hpp"
#include "freqshort/rng.hpp"

namespace freqshort::nn {

namespace {

#if defined(__GLIBC__)
// Activation buffers are tens of megabytes; keeping them on the heap instead
// of fresh mmap regions avoids page-fault churn on every step.
const bool kAllocatorTuned = [] {
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
  return true;
}();
#endif

struct ConvSpec {
  int cin;
  int cout;
  int stride;
  std::string name;
};

// Convolution order: stem, then per stage [transition], conv1, conv2.
std::vector<ConvSpec> conv_specs(const Architecture& a) {
  std::vector<ConvSpec> specs;
  specs.push_back({a.in_channels, a.widths[0], 1, "stem"});
  for (int s = 0; s < 3; ++s) {
    const int w = a.widths[static_cast<std::size_t>(s)];
    if (s > 0) specs.push_back({a.widths[static_cast<std::size_t>(s - 1)], w, 2, "stage" + std::to_string(s) + ".down"});
    specs.push_back({w, w, 1, "stage" + std::to_string(s) + ".conv1"});
    specs.push_back({w, w, 1, "stage" + std::to_string(s) + ".conv2"});
  }
  return specs;
}

int out_side(int side, int stride) { return (side + 2 - 3) / stride + 1; }

template <typename T>
void im2col(const Mat<T>& a, int channels, int batch, int side, int stride, Mat<T>& col) {
  const int os = out_side(side, stride);
  const std::size_t in_plane = static_cast<std::size_t>(side) * side;
  const std::size_t out_plane = static_cast<std::size_t>(os) * os;
  col.resize(9 * channels, static_cast<Eigen::Index>(batch * out_plane));
  const std::size_t bytes = sizeof(T) * static_cast<std::size_t>(channels);
  for (int n = 0; n < batch; ++n) {
    for (int oy = 0; oy < os; ++oy) {
      for (int ox = 0; ox < os; ++ox) {
        const auto j = static_cast<Eigen::Index>(n * out_plane + static_cast<std::size_t>(oy) * os + ox);
        T* dst = col.col(j).data();
        for (int ky = 0; ky < 3; ++ky) {
          const int iy = oy * stride + ky - 1;
          for (int kx = 0; kx < 3; ++kx) {
            const int ix = ox * stride + kx - 1;
            T* slot = dst + (ky * 3 + kx) * channels;
            if (iy < 0 || iy >= side || ix < 0 || ix >= side) {
              std::memset(slot, 0, bytes);
            } else {
              const auto src = static_cast<Eigen::Index>(n * in_plane + static_cast<std::size_t>(iy) * side + ix);
              std::memcpy(slot, a.col(src).data(), bytes);
            }
          }
        }
      }
    }
  }
}

template <typename T>
Mat<T> col2im(const Mat<T>& col, int channels, int batch, int side, int stride) {
  const int os = out_side(side, stride);
  const std::size_t in_plane = static_cast<std::size_t>(side) * side;
  const std::size_t out_plane = static_cast<std::size_t>(os) * os;
  Mat<T> a = Mat<T>::Zero(channels, static_cast<Eigen::Index>(batch * in_plane));
  for (int n = 0; n < batch; ++n) {
    for (int oy = 0; oy < os; ++oy) {
      for (int ox = 0; ox < os; ++ox) {
        const auto j = static_cast<Eigen::Index>(n * out_plane + static_cast<std::size_t>(oy) * os + ox);
        const T* src = col.col(j).data();
        for (int ky = 0; ky < 3; ++ky) {
          const int iy = oy * stride + ky - 1;
          if (iy < 0 || iy >= side) continue;
          for (int kx = 0; kx < 3; ++kx) {
            const int ix = ox * stride + kx - 1;
            if (ix < 0 || ix >= side) continue;
            const auto dst = static_cast<Eigen::Index>(n * in_plane + static_cast<std::size_t>(iy) * side + ix);
            T* d = a.col(dst).data();
            const T* s = src + (ky * 3 + kx) * channels;
            for (int c = 0; c < channels; ++c) d[c] += s[c];
          }
        }
      }
    }
  }
  return a;
}

template <typename T>
Mat<T> relu_mask(const Mat<T>& grad, const Mat<T>& activation) {
  return (activation.array() > T(0)).select(grad, T(0));
}

void require_labels(std::span<const int> labels, int n_classes) {
  for (int y : labels) {
    if (y < 0 || y >= n_classes) {
      throw std::out_of_range("label " + std::to_string(y) + " outside [0, " + std::to_string(n_classes) + ")");
    }
  }
}

}  // namespace

void Architecture::validate() const {
  if (in_channels < 1) throw std::invalid_argument("architecture: in_channels must be >= 1");
  if (input_side < 4) throw std::invalid_argument("architecture: input side must be >= 4");
  for (int w : widths) {
    if (w < 1) throw std::invalid_argument("architecture: widths must be >= 1");
  }
  if (n_classes < 2) throw std::invalid_argument("architecture: need at least two classes");
  if (!std::isfinite(input_mean) || !(input_std > 0.0) || !std::isfinite(input_std)) {
    throw std::invalid_argument("architecture: input standardization needs a finite mean and positive std");
  }
}

template <typename T>
Mat<T> pack_images(std::span<const Image> images, const Architecture& arch) {
  const std::size_t plane = static_cast<std::size_t>(arch.input_side) * arch.input_side;
  Mat<T> out(arch.in_channels, static_cast<Eigen::Index>(images.size() * plane));
  for (std::size_t n = 0; n < images.size(); ++n) {
    const Image& img = images[n];
    if (img.channels != arch.in_channels || img.height != arch.input_side || img.width != arch.input_side) {
      throw DimensionError("model expects " + std::to_string(arch.in_channels) + "x" +
                           std::to_string(arch.input_side) + "x" + std::to_string(arch.input_side) +
                           " inputs, got " + std::to_string(img.channels) + "x" + std::to_string(img.height) +
                           "x" + std::to_string(img.width));
    }
    for (int c = 0; c < img.channels; ++c) {
      for (std::size_t p = 0; p < plane; ++p) {
        out(c, static_cast<Eigen::Index>(n * plane + p)) = static_cast<T>(img.data[c * plane + p]);
      }
    }
  }
  return out;
}

template <typename T>
struct BasicModel<T>::Cache {
  std::vector<Mat<T>> cols;  // im2col input of every conv
  std::vector<Mat<T>> acts;  // rectified output of every conv (conv2: block output)
  std::vector<int> sides;    // input side of every conv
  Mat<T> pooled;
};

template <typename T>
BasicModel<T>::BasicModel(const Architecture& arch) : arch_(arch) {
  arch_.validate();
  for (const ConvSpec& s : conv_specs(arch_)) {
    names_.push_back(s.name + ".weight");
    params_.push_back(Mat<T>::Zero(s.cout, 9 * s.cin));
    names_.push_back(s.name + ".bias");
    params_.push_back(Mat<T>::Zero(s.cout, 1));
  }
  names_.push_back("head.weight");
  params_.push_back(Mat<T>::Zero(arch_.n_classes, arch_.widths[2]));
  names_.push_back("head.bias");
  params_.push_back(Mat<T>::Zero(arch_.n_classes, 1));
}

template <typename T>
BasicModel<T> BasicModel<T>::init(const Architecture& arch, std::uint64_t seed) {
  BasicModel model(arch);
  const auto specs = conv_specs(arch);
  for (std::size_t i = 0; i < specs.size(); ++i) {
    Rng rng(derive_seed(seed, {i}));
    const double stddev = std::sqrt(2.0 / (9.0 * specs[i].cin));
    Mat<T>& w = model.params_[2 * i];
    for (Eigen::Index k = 0; k < w.size(); ++k) w.data()[k] = static_cast<T>(stddev * rng.normal());
  }
  Rng rng(derive_seed(seed, {specs.size()}));
  Mat<T>& head = model.params_[2 * specs.size()];
  for (Eigen::Index k = 0; k < head.size(); ++k) head.data()[k] = static_cast<T>(0.01 * rng.normal());
  return model;
}

template <typename T>
std::size_t BasicModel<T>::parameter_count() const {
  std::size_t n = 0;
  for (const Mat<T>& p : params_) n += static_cast<std::size_t>(p.size());
  return n;
}

template <typename T>
Mat<T> BasicModel<T>::run(const Mat<T>& input, int batch, Cache* cache) const {
  const auto specs = conv_specs(arch_);
  const std::size_t plane = static_cast<std::size_t>(arch_.input_side) * arch_.input_side;
  if (batch < 1 || input.rows() != arch_.in_channels ||
      input.cols() != static_cast<Eigen::Index>(batch * plane)) {
    throw DimensionError("forward: input shape does not match architecture and batch size");
  }
  int side = arch_.input_side;
  Mat<T> col;
  std::size_t layer = 0;
  const Mat<T> x = ((input.array() - static_cast<T>(arch_.input_mean)) / static_cast<T>(arch_.input_std)).matrix();

  auto conv = [&](const Mat<T>& a) -> Mat<T> {
    const ConvSpec& s = specs[layer];
    Mat<T>& buf = cache ? cache->cols.emplace_back() : col;
    im2col(a, s.cin, batch, side, s.stride, buf);
    Mat<T> z(s.cout, buf.cols());
    z.noalias() = params_[2 * layer] * buf;
    z.colwise() += params_[2 * layer + 1].col(0);
    if (cache) cache->sides.push_back(side);
    side = out_side(side, s.stride);
    ++layer;
    return z;
  };
  auto keep = [&](const Mat<T>& a) {
    if (cache) cache->acts.push_back(a);
  };

  Mat<T> a = conv(x).cwiseMax(T(0));
  keep(a);
  for (int s = 0; s < 3; ++s) {
    if (s > 0) {
      a = conv(a).cwiseMax(T(0));
      keep(a);
    }
    Mat<T> h = conv(a).cwiseMax(T(0));
    keep(h);
    Mat<T> z = conv(h);
    a = (a + z).cwiseMax(T(0));
    keep(a);
  }

  const int sp = side * side;
  Mat<T> pooled(a.rows(), batch);
  for (int n = 0; n < batch; ++n) {
    pooled.col(n) = a.middleCols(static_cast<Eigen::Index>(n) * sp, sp).rowwise().sum() / static_cast<T>(sp);
  }
  if (cache) cache->pooled = pooled;
  Mat<T> logits = params_[2 * specs.size()] * pooled;
  logits.colwise() += params_[2 * specs.size() + 1].col(0);
  return logits;
}

template <typename T>
Mat<T> BasicModel<T>::forward(const Mat<T>& input, int batch) const {
  const auto plane = static_cast<Eigen::Index>(arch_.input_side) * arch_.input_side;
  if (batch < 1 || input.cols() != batch * plane) return run(input, batch, nullptr);
  Mat<T> logits(arch_.n_classes, batch);
  for (int start = 0; start < batch; start += kChunk) {
    const int m = std::min(kChunk, batch - start);
    logits.middleCols(start, m) = run(input.middleCols(start * plane, m * plane), m, nullptr);
  }
  return logits;
}

template <typename T>
Mat<T> BasicModel<T>::forward(std::span<const Image> images) const {
  return run(pack_images<T>(images, arch_), static_cast<int>(images.size()), nullptr);
}

template <typename T>
double BasicModel<T>::accumulate(const Mat<T>& input, std::span<const int> labels, int total,
                                 std::vector<Mat<T>>& grads) const {
  const int batch = static_cast<int>(labels.size());
  Cache cache;
  const Mat<T> logits = run(input, batch, &cache);

  // Softmax cross-entropy gradient, averaged over the batch.
  Mat<T> dlogits(logits.rows(), batch);
  double loss = 0.0;
  for (int n = 0; n < batch; ++n) {
    const T m = logits.col(n).maxCoeff();
    double sum = 0.0;
    for (Eigen::Index k = 0; k < logits.rows(); ++k) sum += std::exp(static_cast<double>(logits(k, n) - m));
    const double lse = static_cast<double>(m) + std::log(sum);
    loss += lse - static_cast<double>(logits(labels[static_cast<std::size_t>(n)], n));
    for (Eigen::Index k = 0; k < logits.rows(); ++k) {
      const double p = std::exp(static_cast<double>(logits(k, n)) - lse);
      dlogits(k, n) = static_cast<T>((p - (k == labels[static_cast<std::size_t>(n)] ? 1.0 : 0.0)) / total);
    }
  }

  const auto specs = conv_specs(arch_);
  const std::size_t head = 2 * specs.size();
  grads[head].noalias() += dlogits * cache.pooled.transpose();
  grads[head + 1] += dlogits.rowwise().sum();
  const Mat<T> dpooled = params_[head].transpose() * dlogits;

  const int final_side = out_side(out_side(arch_.input_side, 2), 2);
  const int sp = final_side * final_side;
  Mat<T> da(dpooled.rows(), static_cast<Eigen::Index>(batch) * sp);
  for (int n = 0; n < batch; ++n) {
    da.middleCols(static_cast<Eigen::Index>(n) * sp, sp) = dpooled.col(n).replicate(1, sp) / static_cast<T>(sp);
  }

  // Backward through one conv: fills parameter grads, returns input gradient.
  auto conv_back = [&](std::size_t layer, const Mat<T>& dz, bool need_input) -> Mat<T> {
    grads[2 * layer].noalias() += dz * cache.cols[layer].transpose();
    grads[2 * layer + 1] += dz.rowwise().sum();
    if (!need_input) return {};
    const Mat<T> dcol = params_[2 * layer].transpose() * dz;
    return col2im(dcol, specs[layer].cin, batch, cache.sides[layer], specs[layer].stride);
  };

  // Conv/activation indices follow the forward order.
  std::size_t layer = specs.size() - 1;
  for (int s = 2; s >= 0; --s) {
    const std::size_t c2 = layer;
    const std::size_t c1 = layer - 1;
    const Mat<T> dsum = relu_mask(da, cache.acts[c2]);
    const Mat<T> dh = conv_back(c2, dsum, true);
    Mat<T> dx = conv_back(c1, relu_mask(dh, cache.acts[c1]), true);
    dx += dsum;
    da = std::move(dx);
    layer = c1 - 1;
    if (s > 0) {
      da = conv_back(layer, relu_mask(da, cache.acts[layer]), true);
      --layer;
    }
  }
  conv_back(0, relu_mask(da, cache.acts[0]), false);
  return loss;
}

template <typename T>
LossAndGrads<T> BasicModel<T>::loss_and_grads(const Mat<T>& input, std::span<const int> labels) const {
  require_labels(labels, arch_.n_classes);
  const int batch = static_cast<int>(labels.size());
  const auto plane = static_cast<Eigen::Index>(arch_.input_side) * arch_.input_side;
  if (batch < 1 || input.rows() != arch_.in_channels || input.cols() != batch * plane) {
    throw DimensionError("loss_and_grads: input shape does not match architecture and label count");
  }
  LossAndGrads<T> out;
  for (const Mat<T>& p : params_) out.grads.push_back(Mat<T>::Zero(p.rows(), p.cols()));
  // Small chunks keep the im2col buffers cache-resident; gradients are
  // reduced in a fixed chunk order.
  double loss = 0.0;
  for (int start = 0; start < batch; start += kChunk) {
    const int m = std::min(kChunk, batch - start);
    loss += accumulate(input.middleCols(start * plane, m * plane), labels.subspan(static_cast<std::size_t>(start), static_cast<std::size_t>(m)),
                       batch, out.grads);
  }
  out.loss = loss / batch;
  return out;
}

template <typename T>
LossAndGrads<T> BasicModel<T>::loss_and_grads(std::span<const Image> images, std::span<const int> labels) const {
  if (images.size() != labels.size()) throw std::invalid_argument("loss_and_grads: images and labels differ in length");
  return loss_and_grads(pack_images<T>(images, arch_), labels);
}

template <typename T>
std::vector<double> cross_entropy_terms(const Mat<T>& logits, std::span<const int> labels) {
  if (static_cast<std::size_t>(logits.cols()) != labels.size()) {
    throw std::invalid_argument("cross_entropy: logits and labels differ in length");
  }
  require_labels(labels, static_cast<int>(logits.rows()));
  std::vector<double> terms(labels.size());
  for (Eigen::Index n = 0; n < logits.cols(); ++n) {
    const double m = static_cast<double>(logits.col(n).maxCoeff());
    double sum = 0.0;
    for (Eigen::Index k = 0; k < logits.rows(); ++k) sum += std::exp(static_cast<double>(logits(k, n)) - m);
    terms[static_cast<std::size_t>(n)] =
        m + std::log(sum) - static_cast<double>(logits(labels[static_cast<std::size_t>(n)], n));
  }
  return terms;
}

template <typename T>
double mean_cross_entropy(const Mat<T>& logits, std::span<const int> labels) {
  const auto terms = cross_entropy_terms(logits, labels);
  if (terms.empty()) return 0.0;
  double sum = 0.0;
  for (double t : terms) sum += t;
  return sum / static_cast<double>(terms.size());
}

template <typename T>
SgdState<T> make_sgd_state(const BasicModel<T>& model) {
  SgdState<T> state;
  for (const Mat<T>& p : model.params()) state.velocity.push_back(Mat<T>::Zero(p.rows(), p.cols()));
  return state;
}

template <typename T>
void sgd_step(BasicModel<T>& model, const std::vector<Mat<T>>& grads, SgdState<T>& state, double lr,
              double momentum, double weight_decay) {
  auto& params = model.params();
  if (grads.size() != params.size() || state.velocity.size() != params.size()) {
    throw DimensionError("sgd_step: gradient/state count does not match the model");
  }
  const T m = static_cast<T>(momentum);
  const T wd = static_cast<T>(weight_decay);
  const T eta = static_cast<T>(lr);
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].rows() != params[i].rows() || grads[i].cols() != params[i].cols() ||
        state.velocity[i].rows() != params[i].rows() || state.velocity[i].cols() != params[i].cols()) {
      throw DimensionError("sgd_step: shape mismatch for parameter " + model.param_names()[i]);
    }
    state.velocity[i] = (m * state.velocity[i].array() + (grads[i].array() + wd * params[i].array())).matrix();
    params[i] = (params[i].array() - eta * state.velocity[i].array()).matrix();
  }
}

// ---------------------------------------------------------------------------
// Checkpoints

void save_checkpoint(const std::filesystem::path& path, const Model& model) {
  const Architecture& a = model.arch();
  nlohmann::json desc;
  desc["architecture"] = {{"type", "compact_resnet"},
                          {"in_channels", a.in_channels},
                          {"input_side", a.input_side},
                          {"widths", a.widths},
                          {"n_classes", a.n_classes},
                          {"input_mean", a.input_mean},
                          {"input_std", a.input_std}};
  nlohmann::json params = nlohmann::json::array();
  for (std::size_t i = 0; i < model.params().size(); ++i) {
    params.push_back({{"name", model.param_names()[i]},
                      {"rows", model.params()[i].rows()},
                      {"cols", model.params()[i].cols()}});
  }
  desc["params"] = params;
  const std::string text = desc.dump();

  std::vector<std::uint8_t> bytes{'F', 'Q', 'L', 'C'};
  const auto len = static_cast<std::uint32_t>(text.size());
  for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<std::uint8_t>(len >> (8 * i)));
  bytes.insert(bytes.end(), text.begin(), text.end());
  for (const Mat<float>& p : model.params()) {
    Tensor t{1, static_cast<std::uint32_t>(p.rows()), static_cast<std::uint32_t>(p.cols()), {}};
    t.data.reserve(static_cast<std::size_t>(p.size()));
    for (Eigen::Index r = 0; r < p.rows(); ++r) {
      for (Eigen::Index c = 0; c < p.cols(); ++c) t.data.push_back(p(r, c));
    }
    const auto enc = encode_tensor(t);
    bytes.insert(bytes.end(), enc.begin(), enc.end());
  }
  write_file(path, bytes);
}

Model load_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw std::runtime_error("checkpoint '" + path.string() + "' not found");
  const auto bytes = read_file(path);
  const std::string where = "checkpoint '" + path.string() + "'";
  if (bytes.size() < 8 || !(bytes[0] == 'F' && bytes[1] == 'Q' && bytes[2] == 'L' && bytes[3] == 'C')) {
    throw FormatError(where + ": bad magic (expected FQLC)", 0);
  }
  std::uint32_t len = 0;
  for (int i = 0; i < 4; ++i) len |= static_cast<std::uint32_t>(bytes[4 + i]) << (8 * i);
  if (bytes.size() < 8 + static_cast<std::size_t>(len)) throw FormatError(where + ": truncated descriptor", bytes.size());
  const auto desc = nlohmann::json::parse(bytes.begin() + 8, bytes.begin() + 8 + len);
  const auto& ja = desc.at("architecture");
  Architecture arch;
  arch.in_channels = ja.at("in_channels").get<int>();
  arch.input_side = ja.at("input_side").get<int>();
  arch.widths = ja.at("widths").get<std::array<int, 3>>();
  arch.n_classes = ja.at("n_classes").get<int>();
  arch.input_mean = ja.value("input_mean", 0.0);
  arch.input_std = ja.value("input_std", 1.0);
  Model model(arch);
  std::size_t offset = 8 + len;
  for (std::size_t i = 0; i < model.params().size(); ++i) {
    const Tensor t = decode_tensor(bytes, offset);
    Mat<float>& p = model.params()[i];
    if (t.height != p.rows() || t.width != p.cols()) {
      throw FormatError(where + ": parameter " + model.param_names()[i] + " has the wrong shape", offset);
    }
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < p.rows(); ++r) {
      for (Eigen::Index c = 0; c < p.cols(); ++c) p(r, c) = t.data[k++];
    }
  }
  if (offset != bytes.size()) throw FormatError(where + ": trailing bytes", offset);
  return model;
}

#define FREQSHORT_INSTANTIATE(T)                                                                            \
  template Mat<T> pack_images<T>(std::span<const Image>, const Architecture&);                           \
  template class BasicModel<T>;                                                                           \
  template std::vector<double> cross_entropy_terms<T>(const Mat<T>&, std::span<const int>);              \
  template double mean_cross_entropy<T>(const Mat<T>&, std::span<const int>);                            \
  template SgdState<T> make_sgd_state<T>(const BasicModel<T>&);                                           \
  template void sgd_step<T>(BasicModel<T>&, const std::vector<Mat<T>>&, SgdState<T>&, double, double, double);

FREQSHORT_INSTANTIATE(float)
FREQSHORT_INSTANTIATE(double)

#undef FREQSHORT_INSTANTIATE

}  // namespace freqshort::nn

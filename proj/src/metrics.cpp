#include "freqshort/metrics.hpp"

#include <sstream>
#include <stdexcept>

#include "freqshort/io.hpp"

namespace freqshort {

namespace {

void check_inputs(std::span<const int> preds, std::span<const int> labels, int n_classes) {
  if (preds.size() != labels.size()) {
    throw std::invalid_argument("predictions (" + std::to_string(preds.size()) + ") and labels (" +
                                std::to_string(labels.size()) + ") differ in length");
  }
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i] < 0 || preds[i] >= n_classes || labels[i] < 0 || labels[i] >= n_classes) {
      throw std::invalid_argument("class index outside [0, " + std::to_string(n_classes) + ") at position " +
                                  std::to_string(i));
    }
  }
}

std::vector<std::string> default_names(int n) {
  std::vector<std::string> names;
  for (int c = 0; c < n; ++c) names.push_back("C" + std::to_string(c));
  return names;
}

int sign(double x) { return (x > 0.0) - (x < 0.0); }

}  // namespace

std::int64_t ConfusionMatrix::row_sum(int i) const {
  std::int64_t s = 0;
  for (std::int64_t v : counts.at(static_cast<std::size_t>(i))) s += v;
  return s;
}

std::int64_t ConfusionMatrix::col_sum(int j) const {
  std::int64_t s = 0;
  for (const auto& row : counts) s += row.at(static_cast<std::size_t>(j));
  return s;
}

std::int64_t ConfusionMatrix::total() const {
  std::int64_t s = 0;
  for (int i = 0; i < n_classes(); ++i) s += row_sum(i);
  return s;
}

ConfusionMatrix confusion(std::span<const int> preds, std::span<const int> labels, int n_classes) {
  if (n_classes < 1) throw std::invalid_argument("confusion: n_classes must be positive");
  check_inputs(preds, labels, n_classes);
  ConfusionMatrix cm;
  cm.class_names = default_names(n_classes);
  cm.counts.assign(static_cast<std::size_t>(n_classes), std::vector<std::int64_t>(static_cast<std::size_t>(n_classes), 0));
  for (std::size_t i = 0; i < preds.size(); ++i) {
    ++cm.counts[static_cast<std::size_t>(labels[i])][static_cast<std::size_t>(preds[i])];
  }
  return cm;
}

RelativeConfusionMatrix relative_confusion(const ConfusionMatrix& bandstop, const ConfusionMatrix& original) {
  if (bandstop.n_classes() != original.n_classes()) {
    throw std::invalid_argument("relative_confusion: matrices cover different class sets");
  }
  RelativeConfusionMatrix rc;
  rc.class_names = original.class_names;
  const int n = original.n_classes();
  rc.delta.assign(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(n), 0.0));
  for (int i = 0; i < n; ++i) {
    const std::int64_t size = original.row_sum(i);
    if (bandstop.row_sum(i) != size) {
      throw std::invalid_argument("relative_confusion: row " + std::to_string(i) + " sums differ (" +
                                  std::to_string(bandstop.row_sum(i)) + " vs " + std::to_string(size) +
                                  "); matrices come from different test populations");
    }
    rc.class_sizes.push_back(size);
    if (size == 0) continue;
    for (int j = 0; j < n; ++j) {
      const std::int64_t diff = bandstop.counts[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] -
                                original.counts[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      rc.delta[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
          static_cast<double>(diff) * 100.0 / static_cast<double>(size);
    }
  }
  return rc;
}

std::vector<ClassPrf> prf1(const ConfusionMatrix& cm) {
  std::vector<ClassPrf> out;
  for (int c = 0; c < cm.n_classes(); ++c) {
    const auto tp = static_cast<double>(cm.counts[static_cast<std::size_t>(c)][static_cast<std::size_t>(c)]);
    const auto predicted = static_cast<double>(cm.col_sum(c));
    const auto actual = static_cast<double>(cm.row_sum(c));
    ClassPrf r;
    r.precision = predicted > 0 ? tp / predicted : 0.0;
    r.recall = actual > 0 ? tp / actual : 0.0;
    r.f1 = (r.precision + r.recall) > 0 ? 2.0 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
    out.push_back(r);
  }
  return out;
}

RateMeasure tpr_fpr(std::span<const int> preds, std::span<const int> labels, int cls) {
  if (preds.size() != labels.size()) throw std::invalid_argument("tpr_fpr: predictions and labels differ in length");
  std::int64_t pos = 0, tp = 0, neg = 0, fp = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (labels[i] == cls) {
      ++pos;
      tp += preds[i] == cls;
    } else {
      ++neg;
      fp += preds[i] == cls;
    }
  }
  RateMeasure m;
  if (pos > 0) m.tpr = static_cast<double>(tp) / static_cast<double>(pos);
  if (neg > 0) m.fpr = static_cast<double>(fp) / static_cast<double>(neg);
  return m;
}

// ---------------------------------------------------------------------------
// ADCS

double AdcsMap::value(int cls, FrequencyCoord f) const {
  return maps.at(static_cast<std::size_t>(cls)).at(CenteredGrid{side}.index(f));
}

AdcsMap adcs(const std::vector<std::vector<Image>>& by_class, std::vector<std::string> class_names) {
  if (by_class.size() < 2) throw std::invalid_argument("adcs: need at least two classes");
  const Image* reference = nullptr;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    if (by_class[c].empty()) throw std::invalid_argument("adcs: class " + std::to_string(c) + " has no images");
    for (const Image& img : by_class[c]) {
      if (!reference) reference = &img;
      if (!img.same_shape(*reference)) throw DimensionError("adcs: images differ in shape");
    }
  }
  AdcsMap out;
  out.side = reference->height;
  out.channels = reference->channels;
  const auto n_classes = by_class.size();
  out.class_names = class_names.empty() ? default_names(static_cast<int>(n_classes)) : std::move(class_names);
  const std::size_t plane = reference->plane();

  out.average.assign(n_classes, std::vector<std::vector<double>>(static_cast<std::size_t>(out.channels),
                                                                 std::vector<double>(plane, 0.0)));
  for (std::size_t c = 0; c < n_classes; ++c) {
    for (const Image& img : by_class[c]) {
      const Spectrum s = dft2(img);
      for (int ch = 0; ch < out.channels; ++ch) {
        auto& avg = out.average[c][static_cast<std::size_t>(ch)];
        for (std::size_t i = 0; i < plane; ++i) avg[i] += std::abs(s.data[ch * plane + i]);
      }
    }
    const double inv = 1.0 / static_cast<double>(by_class[c].size());
    for (auto& avg : out.average[c]) {
      for (double& v : avg) v *= inv;
    }
  }

  out.sign_sums.assign(n_classes, std::vector<std::int64_t>(plane, 0));
  out.maps.assign(n_classes, std::vector<double>(plane, 0.0));
  for (std::size_t ci = 0; ci < n_classes; ++ci) {
    for (std::size_t cj = 0; cj < n_classes; ++cj) {
      if (ci == cj) continue;
      for (int ch = 0; ch < out.channels; ++ch) {
        const auto& ei = out.average[ci][static_cast<std::size_t>(ch)];
        const auto& ej = out.average[cj][static_cast<std::size_t>(ch)];
        for (std::size_t i = 0; i < plane; ++i) out.sign_sums[ci][i] += sign(ei[i] - ej[i]);
      }
    }
    for (std::size_t i = 0; i < plane; ++i) {
      out.maps[ci][i] = static_cast<double>(out.sign_sums[ci][i]) / out.channels;
    }
  }
  return out;
}

double masked_mean(const AdcsMap& map, int cls, const FrequencyMask& mask, bool exclude_dc) {
  if (mask.side() != map.side) throw DimensionError("masked_mean: mask and map sizes differ");
  const CenteredGrid grid{map.side};
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const FrequencyCoord f = grid.coord(i);
    if (!mask.bits()[i] || (exclude_dc && f.u == 0 && f.v == 0)) continue;
    sum += map.maps.at(static_cast<std::size_t>(cls))[i];
    ++n;
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

// ---------------------------------------------------------------------------
// Serialization

std::string confusion_csv(const ConfusionMatrix& cm) {
  std::ostringstream os;
  os << "true\\pred";
  for (const auto& name : cm.class_names) os << ',' << name;
  os << '\n';
  for (int i = 0; i < cm.n_classes(); ++i) {
    os << cm.class_names[static_cast<std::size_t>(i)];
    for (std::int64_t v : cm.counts[static_cast<std::size_t>(i)]) os << ',' << v;
    os << '\n';
  }
  return os.str();
}

nlohmann::json confusion_json(const ConfusionMatrix& cm) {
  return {{"class_names", cm.class_names}, {"counts", cm.counts}};
}

std::string relative_confusion_csv(const RelativeConfusionMatrix& rc) {
  std::ostringstream os;
  os << "true\\pred";
  for (const auto& name : rc.class_names) os << ',' << name;
  os << ",N_c\n";
  for (std::size_t i = 0; i < rc.delta.size(); ++i) {
    os << rc.class_names[i];
    for (double v : rc.delta[i]) os << ',' << format_double(v);
    os << ',' << rc.class_sizes[i] << '\n';
  }
  return os.str();
}

nlohmann::json relative_confusion_json(const RelativeConfusionMatrix& rc) {
  return {{"class_names", rc.class_names}, {"delta", rc.delta},         {"class_sizes", rc.class_sizes},
          {"filtered", rc.filtered_tag},   {"original", rc.original_tag}, {"units", "percentage points"}};
}

std::string prf_csv(const std::vector<ClassPrf>& prf, const std::vector<std::string>& class_names) {
  std::ostringstream os;
  os << "class,precision,recall,f1\n";
  for (std::size_t c = 0; c < prf.size(); ++c) {
    os << class_names.at(c) << ',' << format_double(prf[c].precision) << ',' << format_double(prf[c].recall) << ','
       << format_double(prf[c].f1) << '\n';
  }
  return os.str();
}

nlohmann::json prf_json(const std::vector<ClassPrf>& prf, const std::vector<std::string>& class_names) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t c = 0; c < prf.size(); ++c) {
    rows.push_back({{"class", class_names.at(c)},
                    {"precision", prf[c].precision},
                    {"recall", prf[c].recall},
                    {"f1", prf[c].f1}});
  }
  return rows;
}

}  // namespace freqshort

#include "freqshort/dfm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "freqshort/io.hpp"
#include "freqshort/nnet.hpp"

namespace freqshort {

std::vector<FrequencyCoord> unique_pairs(int side) {
  const CenteredGrid grid{side};
  std::vector<FrequencyCoord> out{{0, 0}};
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const FrequencyCoord f = grid.coord(i);
    if (f.u == 0 && f.v == 0) continue;
    if (grid.index(grid.partner(f)) < i) continue;
    out.push_back(f);
  }
  return out;
}

std::vector<double> FrequencyScoreMap::dense() const {
  const CenteredGrid grid{side};
  std::vector<double> out(grid.size(), 0.0);
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    out[grid.index(pairs[k])] = scores[k];
    out[grid.index(grid.partner(pairs[k]))] = scores[k];
  }
  return out;
}

FrequencyScoreMap score_frequencies(const Predictor& predictor, const LabeledDataset& class_images) {
  if (class_images.size() == 0) throw std::invalid_argument("score_frequencies: no images to score");
  class_images.validate();
  const int cls = class_images.labels.front();
  for (int y : class_images.labels) {
    if (y != cls) throw std::invalid_argument("score_frequencies: images must all belong to one class");
  }
  const int side = class_images.images.front().height;
  const CenteredGrid grid{side};

  FrequencyScoreMap out;
  out.side = side;
  out.class_id = cls;
  out.pairs = unique_pairs(side);
  out.scores.assign(out.pairs.size(), 0.0);
  out.provenance = class_images.provenance + " split=" + split_name(class_images.split);

  const std::size_t n = class_images.size();
  const auto base_terms =
      nn::cross_entropy_terms(predictor.scores(class_images.images, class_images.ids), class_images.labels);
  out.baseline = std::accumulate(base_terms.begin(), base_terms.end(), 0.0) / static_cast<double>(n);

  std::vector<Spectrum> spectra;
  spectra.reserve(n);
  std::vector<double> peak;
  for (const Image& img : class_images.images) {
    spectra.push_back(dft2(img));
    double m = 0.0;
    for (const auto& z : spectra.back().data) m = std::max(m, std::abs(z));
    peak.push_back(m);
  }

  std::vector<Image> modified;
  std::vector<std::string> ids;
  std::vector<int> labels;
  std::vector<std::size_t> which;
  for (std::size_t k = 0; k < out.pairs.size(); ++k) {
    const FrequencyCoord f = out.pairs[k];
    const FrequencyCoord p = grid.partner(f);
    modified.clear();
    ids.clear();
    labels.clear();
    which.clear();
    for (std::size_t i = 0; i < n; ++i) {
      bool present = false;
      for (int c = 0; c < spectra[i].channels && !present; ++c) {
        present = spectra[i].at(c, f.u, f.v) != 0.0 || spectra[i].at(c, p.u, p.v) != 0.0;
      }
      // Removing an absent pair leaves the image, and its loss, unchanged.
      if (!present) continue;
      modified.push_back(idft2(remove_frequency_pair(spectra[i], f), peak[i]));
      ids.push_back(class_images.ids[i]);
      labels.push_back(cls);
      which.push_back(i);
    }
    std::vector<double> terms = base_terms;
    if (!modified.empty()) {
      const auto changed = nn::cross_entropy_terms(predictor.scores(modified, ids), labels);
      for (std::size_t j = 0; j < which.size(); ++j) terms[which[j]] = changed[j];
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += terms[i] - base_terms[i];
    out.scores[k] = sum / static_cast<double>(n);
  }
  return out;
}

std::size_t topx_count(double percent, std::size_t n_pairs) {
  if (!(percent > 0.0) || percent > 100.0) throw std::invalid_argument("top-X percent must lie in (0, 100]");
  // Guard against 5% of 100 landing a hair above 5 in binary floating point.
  const double exact = percent * static_cast<double>(n_pairs) / 100.0;
  const auto k = static_cast<std::size_t>(std::ceil(exact - 1e-9 * std::max(1.0, exact)));
  return std::clamp<std::size_t>(k, 1, n_pairs);
}

DfmMask select_topx(const FrequencyScoreMap& scores, double percent) {
  const std::size_t n_pairs = scores.pairs.size();
  const std::size_t k = topx_count(percent, n_pairs);
  const CenteredGrid grid{scores.side};
  std::vector<std::size_t> order(n_pairs);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores.scores[a] != scores.scores[b]) return scores.scores[a] > scores.scores[b];
    const double ra = scores.pairs[a].radius();
    const double rb = scores.pairs[b].radius();
    if (ra != rb) return ra < rb;
    return grid.index(scores.pairs[a]) < grid.index(scores.pairs[b]);
  });
  order.resize(k);
  std::vector<bool> bits(grid.size(), false);
  for (std::size_t idx : order) {
    bits[grid.index(scores.pairs[idx])] = true;
    bits[grid.index(grid.partner(scores.pairs[idx]))] = true;
  }
  return {FrequencyMask(scores.side, std::move(bits)), percent, scores.class_id, std::move(order)};
}

LabeledDataset filter_dataset(const LabeledDataset& dataset, const FrequencyMask& mask) {
  LabeledDataset out = dataset;
  for (Image& img : out.images) {
    if (img.height != mask.side() || img.width != mask.side()) {
      throw DimensionError("filter_dataset: mask side " + std::to_string(mask.side()) + " does not match " +
                           std::to_string(img.height) + "x" + std::to_string(img.width) + " images");
    }
    img = filter_image(img, mask);
  }
  return out;
}

LabeledDataset filter_dataset_with_dfm(const LabeledDataset& dataset, const DfmMask& dfm) {
  return filter_dataset(dataset, dfm.mask);
}

ShortcutReport shortcut_report(const Predictor& predictor, const LabeledDataset& test,
                               const std::map<int, DfmMask>& dfms, double percent, double tau_tpr,
                               double tau_fpr, std::vector<int> classes) {
  if (classes.empty()) {
    classes.resize(static_cast<std::size_t>(test.n_classes()));
    std::iota(classes.begin(), classes.end(), 0);
  }
  for (int c : classes) {
    const auto it = dfms.find(c);
    const std::string name = c >= 0 && c < test.n_classes() ? test.class_names[static_cast<std::size_t>(c)] : "?";
    if (it == dfms.end()) {
      throw std::invalid_argument("shortcut_report: no DFM for class " + std::to_string(c) + " (" + name + ")");
    }
    if (std::abs(it->second.percent - percent) > 1e-12) {
      throw std::invalid_argument("shortcut_report: DFM for class " + std::to_string(c) + " (" + name +
                                  ") is top-" + format_double(it->second.percent) + "%, requested top-" +
                                  format_double(percent) + "%");
    }
  }

  ShortcutReport report;
  report.percent = percent;
  report.tau_tpr = tau_tpr;
  report.tau_fpr = tau_fpr;
  const Predictions original = predict(predictor, test);
  for (int c : classes) {
    const Predictions filtered = predict(predictor, filter_dataset_with_dfm(test, dfms.at(c)));
    ShortcutRow row;
    row.class_id = c;
    row.class_name = test.class_names[static_cast<std::size_t>(c)];
    row.original = tpr_fpr(original.labels, test.labels, c);
    row.filtered = tpr_fpr(filtered.labels, test.labels, c);
    row.shortcut = row.filtered.tpr && row.filtered.fpr && *row.filtered.tpr >= tau_tpr && *row.filtered.fpr >= tau_fpr;
    report.rows.push_back(std::move(row));
  }
  return report;
}

namespace {

std::string rate_cell(const std::optional<double>& v) { return v ? format_double(*v) : "absent"; }

nlohmann::json rate_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

}  // namespace

std::string shortcut_report_csv(const ShortcutReport& report) {
  std::ostringstream os;
  os << "class,name,tpr,fpr,tpr_df,fpr_df,top_x_percent,tau_tpr,tau_fpr,shortcut\n";
  for (const ShortcutRow& r : report.rows) {
    os << r.class_id << ',' << r.class_name << ',' << rate_cell(r.original.tpr) << ',' << rate_cell(r.original.fpr)
       << ',' << rate_cell(r.filtered.tpr) << ',' << rate_cell(r.filtered.fpr) << ',' << format_double(report.percent)
       << ',' << format_double(report.tau_tpr) << ',' << format_double(report.tau_fpr) << ','
       << (r.shortcut ? "yes" : "no") << '\n';
  }
  return os.str();
}

nlohmann::json shortcut_report_json(const ShortcutReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const ShortcutRow& r : report.rows) {
    rows.push_back({{"class", r.class_id},
                    {"name", r.class_name},
                    {"tpr", rate_json(r.original.tpr)},
                    {"fpr", rate_json(r.original.fpr)},
                    {"tpr_df", rate_json(r.filtered.tpr)},
                    {"fpr_df", rate_json(r.filtered.fpr)},
                    {"shortcut", r.shortcut}});
  }
  return {{"top_x_percent", report.percent},
          {"tau_tpr", report.tau_tpr},
          {"tau_fpr", report.tau_fpr},
          {"rows", rows},
          {"provenance", report.provenance}};
}

}  // namespace freqshort

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "freqshort/dataset.hpp"
#include "freqshort/dfm.hpp"
#include "freqshort/io.hpp"
#include "freqshort/metrics.hpp"
#include "freqshort/nnet.hpp"
#include "freqshort/predictor.hpp"
#include "freqshort/render.hpp"
#include "freqshort/spectrum.hpp"
#include "freqshort/synthgen.hpp"
#include "freqshort/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace freqshort;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Shared option groups

struct DataArgs {
  std::string root;
  int resize = 0;

  IngestOptions ingest() const {
    IngestOptions o;
    if (resize > 0) o.side = resize;
    return o;
  }
  LabeledDataset load(const std::string& split) const { return load_split(root, parse_split(split), ingest()); }
};

struct PredictorArgs {
  std::string checkpoint;
  std::string predictions;

  std::unique_ptr<Predictor> load() const {
    if (checkpoint.empty() == predictions.empty()) {
      throw UsageError("give exactly one of --checkpoint or --predictions");
    }
    if (!checkpoint.empty()) return std::make_unique<ModelPredictor>(nn::load_checkpoint(checkpoint));
    return std::make_unique<TablePredictor>(TablePredictor::from_csv(predictions));
  }
  std::string describe() const { return checkpoint.empty() ? "table:" + predictions : "checkpoint:" + checkpoint; }
};

void add_data(CLI::App* app, DataArgs& d) {
  app->add_option("--data", d.root, "Dataset root holding train/val/test")->required();
  app->add_option("--resize", d.resize, "Center-crop and resize images to this side (0: keep)");
}

void add_predictor(CLI::App* app, PredictorArgs& p) {
  app->add_option("--checkpoint", p.checkpoint, "Model checkpoint written by 'train'");
  app->add_option("--predictions", p.predictions, "External prediction table (id,score_0,...)");
}

RadiusMetric parse_metric(const std::string& s) { return s == "chebyshev" ? RadiusMetric::chebyshev : RadiusMetric::euclidean; }

CLI::Option* add_metric(CLI::App* app, std::string& metric) {
  return app->add_option("--radius-metric", metric, "Band geometry: euclidean or chebyshev")
      ->check(CLI::IsMember({"euclidean", "chebyshev"}));
}

// "B14" keeps bands 1 and 4.
BandSet parse_pair(const std::string& code) {
  static const std::regex re("^[Bb]([1-4])([1-4])$");
  std::smatch m;
  if (!std::regex_match(code, m, re) || m[1] == m[2]) {
    throw UsageError("invalid band pair '" + code + "': expected B<i><j> with distinct i,j in 1..4 (e.g. B14)");
  }
  return {std::stoi(m[1]) - 1, std::stoi(m[2]) - 1};
}

std::string pair_code(const BandSet& s) {
  std::string out = "B";
  for (int b : s) out += std::to_string(b + 1);
  return out;
}

std::vector<std::string> all_pairs() {
  std::vector<std::string> out;
  for (int i = 1; i <= kSynthBands; ++i)
    for (int j = i + 1; j <= kSynthBands; ++j) out.push_back("B" + std::to_string(i) + std::to_string(j));
  return out;
}

FrequencyMask parse_mask(const std::string& spec, int side, RadiusMetric metric) {
  const auto colon = spec.find(':');
  const std::string kind = spec.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : spec.substr(colon + 1);
  try {
    if (kind == "lowpass") return low_pass_mask(side, std::stod(arg));
    if (kind == "highpass") return high_pass_mask(side, std::stod(arg));
    if (kind == "keep" || kind == "stop") {
      const BandSet bands = [&] {
        BandSet s;
        for (char ch : arg) {
          if (ch == 'B' || ch == 'b') continue;
          if (ch < '1' || ch > '4') throw UsageError("bad band list '" + arg + "'");
          s.insert(ch - '1');
        }
        return s;
      }();
      const BandPartition part = band_partition(side, kSynthBands, metric);
      return kind == "keep" ? keep_bands_mask(part, bands) : band_stop_mask(part, bands);
    }
    if (kind == "file") {
      const Tensor t = read_tensor(arg);
      if (t.channels != 1 || t.height != t.width) throw std::runtime_error("mask file '" + arg + "' is not 1xNxN");
      std::vector<bool> bits(t.data.size());
      for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = t.data[i] > 0.5f;
      return FrequencyMask(static_cast<int>(t.height), std::move(bits));
    }
  } catch (const std::invalid_argument& e) {
    throw UsageError("invalid mask '" + spec + "': " + e.what());
  }
  throw UsageError("invalid mask '" + spec + "': expected lowpass:R, highpass:R, keep:B14, stop:B23 or file:PATH");
}

std::string fmt1(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", v == 0.0 ? 0.0 : v);
  return buf;
}

std::string x_tag(double x) { return format_double(x); }

Tensor map_tensor(const std::vector<double>& values, int side) {
  Tensor t{1, static_cast<std::uint32_t>(side), static_cast<std::uint32_t>(side), {}};
  t.data.assign(values.begin(), values.end());
  return t;
}

Tensor mask_tensor(const FrequencyMask& mask) {
  Tensor t{1, static_cast<std::uint32_t>(mask.side()), static_cast<std::uint32_t>(mask.side()), {}};
  for (bool b : mask.bits()) t.data.push_back(b ? 1.0f : 0.0f);
  return t;
}

void require_empty_or_overwrite(const fs::path& out, bool overwrite) {
  if (!fs::exists(out) || fs::is_empty(out)) return;
  if (!overwrite) {
    throw std::runtime_error("output directory '" + out.string() + "' is not empty; pass --overwrite to replace it");
  }
  for (const char* item : {"train", "val", "test", "manifest.json", "config.json"}) fs::remove_all(out / item);
}

// ---------------------------------------------------------------------------
// Config handling: a JSON document whose top level and per-command block
// supply option values; explicit flags always win.

json scalar_value(const std::string& s) {
  if (s == "true") return true;
  if (s == "false") return false;
  try {
    std::size_t used = 0;
    const long long i = std::stoll(s, &used);
    if (used == s.size()) return i;
  } catch (const std::exception&) {
  }
  try {
    std::size_t used = 0;
    const double d = std::stod(s, &used);
    if (used == s.size()) return d;
  } catch (const std::exception&) {
  }
  return s;
}

json resolved_options(const CLI::App* sub) {
  json block = json::object();
  for (const CLI::Option* opt : sub->get_options()) {
    if (opt->get_lnames().empty()) continue;
    const std::string name = opt->get_lnames().front();
    if (name == "help" || name == "config") continue;
    if (opt->get_type_size() == 0) {
      block[name] = opt->count() > 0;
      continue;
    }
    std::vector<std::string> values = opt->results();
    if (values.empty()) {
      const std::string def = opt->get_default_str();
      if (def.empty()) continue;
      std::string trimmed = def;
      if (trimmed.size() >= 2 && trimmed.front() == '[' && trimmed.back() == ']') trimmed = trimmed.substr(1, trimmed.size() - 2);
      std::stringstream in(trimmed);
      for (std::string part; std::getline(in, part, ',');) values.push_back(part);
    }
    if (opt->get_expected_max() > 1 || values.size() > 1) {
      json arr = json::array();
      for (const auto& v : values) arr.push_back(scalar_value(v));
      block[name] = arr;
    } else {
      block[name] = scalar_value(values.front());
    }
  }
  return block;
}

void write_config(const fs::path& out, const CLI::App* sub) {
  json doc;
  doc["command"] = sub->get_name();
  doc[sub->get_name()] = resolved_options(sub);
  write_text(out / "config.json", doc.dump(2) + "\n");
}

std::string config_token(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_float()) return format_double(v.get<double>());
  return v.dump();
}

bool has_flag(const std::vector<std::string>& args, const std::string& name) {
  for (const auto& a : args) {
    if (a == "--" + name || a.rfind("--" + name + "=", 0) == 0) return true;
  }
  return false;
}

// Returns argv (without program name) with config-derived options prepended
// right after the subcommand name.
std::vector<std::string> apply_config(CLI::App& app, std::vector<std::string> args) {
  std::optional<std::string> path;
  std::vector<std::string> rest;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw UsageError("--config needs a file argument");
      path = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
    } else {
      rest.push_back(args[i]);
    }
  }
  if (!path) return rest;
  json cfg;
  try {
    cfg = json::parse(read_text(*path));
  } catch (const std::exception& e) {
    throw UsageError("cannot read config '" + *path + "': " + e.what());
  }
  if (!cfg.is_object()) throw UsageError("config '" + *path + "' must hold a JSON object");
  auto cmd_it = std::find_if(rest.begin(), rest.end(), [](const std::string& a) { return !a.empty() && a[0] != '-'; });
  if (cmd_it == rest.end()) {
    if (!cfg.contains("command")) return rest;
    rest.insert(rest.begin(), cfg["command"].get<std::string>());
    cmd_it = rest.begin();
  }
  CLI::App* sub = app.get_subcommand_no_throw(*cmd_it);
  if (!sub) return rest;

  json merged = json::object();
  for (const auto& [k, v] : cfg.items()) {
    if (!v.is_object() && k != "command") merged[k] = v;
  }
  if (cfg.contains(sub->get_name()) && cfg[sub->get_name()].is_object()) {
    for (const auto& [k, v] : cfg[sub->get_name()].items()) merged[k] = v;
  }
  std::vector<std::string> injected;
  for (const auto& [k, v] : merged.items()) {
    const CLI::Option* opt = sub->get_option_no_throw("--" + k);
    if (!opt) {
      if (cfg.contains(sub->get_name()) && cfg[sub->get_name()].contains(k)) {
        throw UsageError("config key '" + k + "' is not an option of '" + sub->get_name() + "'");
      }
      continue;
    }
    if (has_flag(rest, k)) continue;
    if (v.is_boolean()) {
      if (v.get<bool>()) injected.push_back("--" + k);
    } else if (v.is_array()) {
      if (v.empty()) continue;
      std::string joined;
      for (std::size_t i = 0; i < v.size(); ++i) joined += (i ? "," : "") + config_token(v[i]);
      injected.push_back("--" + k);
      injected.push_back(joined);
    } else if (!v.is_null()) {
      injected.push_back("--" + k);
      injected.push_back(config_token(v));
    }
  }
  rest.insert(cmd_it + 1, injected.begin(), injected.end());
  return rest;
}

// ---------------------------------------------------------------------------
// Commands

struct SynthgenArgs {
  std::string band;
  std::vector<int> per_class{1000, 200, 200};
  std::uint64_t seed = 0;
  std::string out;
  bool overwrite = false;
  int k_min = 8;
  int k_max = 24;
  std::string metric = "euclidean";
};

void run_synthgen(const SynthgenArgs& a, const CLI::App* sub) {
  GenerationConfig cfg;
  cfg.n_train = a.per_class[0];
  cfg.n_val = a.per_class[1];
  cfg.n_test = a.per_class[2];
  cfg.seed = a.seed;
  cfg.k_min = a.k_min;
  cfg.k_max = a.k_max;
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const SyntheticDatasetSpec spec = build_spec(parse_band(a.band), parse_metric(a.metric));
  const fs::path out(a.out);
  require_empty_or_overwrite(out, a.overwrite);
  const SyntheticDataset data = generate_dataset(spec, cfg);
  write_synthetic_dataset(data, spec, cfg, out);
  write_config(out, sub);
  std::cout << "Syn_" << band_name(spec.bias_band) << " (seed " << cfg.seed << ") -> " << out.string() << "\n";
  for (const LabeledDataset* d : {&data.train, &data.val, &data.test}) {
    std::cout << "  " << split_name(d->split) << ": " << d->size() << " images";
    const auto counts = d->class_counts();
    for (std::size_t c = 0; c < counts.size(); ++c) std::cout << (c ? ", " : " (") << d->class_names[c] << " " << counts[c];
    std::cout << ")\n";
  }
}

struct TrainArgs {
  DataArgs data;
  std::string out;
  TrainConfig cfg;
  std::string probe_split = "test";
  std::string probe_filter = "none";
  std::string metric = "euclidean";
};

void run_train(TrainArgs& a, const CLI::App* sub) {
  try {
    a.cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const LabeledDataset train_set = a.data.load("train");
  const LabeledDataset val_set = a.data.load("val");
  LabeledDataset probe = a.data.load(a.probe_split);
  if (a.probe_filter != "none" && probe.size() > 0) {
    probe = filter_dataset(probe, parse_mask(a.probe_filter, probe.images.front().height, parse_metric(a.metric)));
  }
  const fs::path out(a.out);
  fs::create_directories(out);
  write_config(out, sub);

  TrainResult result = train(train_set, val_set, probe, a.cfg, [&](const EpochRecord& e) {
    std::cerr << "epoch " << e.epoch << "/" << a.cfg.epochs << "  train " << e.train_loss
              << "  val " << e.val_loss << "  lr " << e.lr << "\n";
  });
  nn::save_checkpoint(out / "model.fqlc", result.model);
  write_text(out / "trainlog.csv", trainlog_csv(result.log));
  write_text(out / "lr_schedule.csv", lr_schedule_csv(result.log));
  write_text(out / "probe_predictions.csv", probe_predictions_csv(result.log));

  std::vector<std::vector<double>> curves(static_cast<std::size_t>(result.log.n_classes));
  for (const IterationRecord& r : result.log.iterations) {
    if (!r.probe) continue;
    for (int c = 0; c < result.log.n_classes; ++c) curves[static_cast<std::size_t>(c)].push_back((*r.probe)[static_cast<std::size_t>(c)].f1);
  }
  write_png(out / "f1_curves.png", render_line_chart(curves, 0.0, 1.0));

  const fs::path test_dir = fs::path(a.data.root) / "test";
  if (fs::exists(test_dir)) {
    const LabeledDataset test = a.data.load("test");
    const Predictions p = predict(ModelPredictor(result.model), test);
    const ConfusionMatrix cm = confusion(p.labels, test.labels, test.n_classes());
    const auto prf = prf1(cm);
    write_text(out / "test_confusion.csv", confusion_csv(cm));
    write_text(out / "test_prf.csv", prf_csv(prf, test.class_names));
    write_text(out / "test_prf.json", prf_json(prf, test.class_names).dump(2) + "\n");
    std::cout << "test recall:";
    for (std::size_t c = 0; c < prf.size(); ++c) std::cout << " " << test.class_names[c] << "=" << prf[c].recall;
    std::cout << "\n";
  }
  std::cout << "wrote " << (out / "model.fqlc").string() << " after " << result.log.iterations.size() << " iterations\n";
}

struct BandstopArgs {
  DataArgs data;
  PredictorArgs predictor;
  std::string split = "test";
  std::vector<std::string> pairs;
  std::string out;
  std::string metric = "euclidean";
};

void run_bandstop(const BandstopArgs& a, const CLI::App* sub) {
  std::vector<BandSet> sets;
  for (const std::string& code : a.pairs.empty() ? all_pairs() : a.pairs) sets.push_back(parse_pair(code));
  const auto predictor = a.predictor.load();
  const LabeledDataset test = a.data.load(a.split);
  if (test.size() == 0) throw std::runtime_error("split '" + a.split + "' is empty");
  const int side = test.images.front().height;
  const BandPartition part = band_partition(side, kSynthBands, parse_metric(a.metric));

  const fs::path out(a.out);
  fs::create_directories(out);
  write_config(out, sub);
  const Predictions original = predict(*predictor, test);
  const ConfusionMatrix cm_org = confusion(original.labels, test.labels, test.n_classes());
  write_text(out / "confusion_original.csv", confusion_csv(cm_org));

  std::cout << "diagonal delta (percentage points)\n  pair ";
  for (const auto& n : test.class_names) std::cout << " " << n;
  std::cout << "\n";
  for (const BandSet& s : sets) {
    const std::string code = pair_code(s);
    const Predictions p = predict(*predictor, filter_dataset(test, keep_bands_mask(part, s)));
    const ConfusionMatrix cm = confusion(p.labels, test.labels, test.n_classes());
    RelativeConfusionMatrix rc = relative_confusion(cm, cm_org);
    rc.filtered_tag = code;
    write_text(out / ("confusion_" + code + ".csv"), confusion_csv(cm));
    write_text(out / ("delta_" + code + ".csv"), relative_confusion_csv(rc));
    write_text(out / ("delta_" + code + ".json"), relative_confusion_json(rc).dump(2) + "\n");
    write_png(out / ("delta_" + code + ".png"), render_relative_confusion(rc));
    std::cout << "  " << code << " ";
    for (int c = 0; c < test.n_classes(); ++c) std::cout << " " << fmt1(rc.delta[static_cast<std::size_t>(c)][static_cast<std::size_t>(c)]);
    std::cout << "\n";
  }
}

struct AdcsArgs {
  DataArgs data;
  std::string split = "train";
  std::string out;
  std::string metric = "euclidean";
};

void run_adcs(const AdcsArgs& a, const CLI::App* sub) {
  const LabeledDataset ds = a.data.load(a.split);
  std::vector<std::vector<Image>> by_class(static_cast<std::size_t>(ds.n_classes()));
  for (std::size_t i = 0; i < ds.size(); ++i) by_class[static_cast<std::size_t>(ds.labels[i])].push_back(ds.images[i]);
  const AdcsMap map = adcs(by_class, ds.class_names);

  const fs::path out(a.out);
  fs::create_directories(out);
  write_config(out, sub);
  const int n = static_cast<int>(by_class.size());
  const BandPartition part = band_partition(map.side, kSynthBands, parse_metric(a.metric));
  std::ostringstream csv;
  csv << "class,name";
  for (int b = 0; b < part.n_bands(); ++b) csv << ",B" << b + 1;
  csv << "\n";
  json summary = json::array();
  for (int c = 0; c < n; ++c) {
    const auto& values = map.maps[static_cast<std::size_t>(c)];
    write_tensor(out / ("adcs_C" + std::to_string(c) + ".f32"), map_tensor(values, map.side));
    write_png(out / ("adcs_C" + std::to_string(c) + ".png"), render_diverging(values, map.side, n - 1));
    csv << c << ',' << map.class_names[static_cast<std::size_t>(c)];
    json row = {{"class", c}, {"name", map.class_names[static_cast<std::size_t>(c)]}};
    for (int b = 0; b < part.n_bands(); ++b) {
      const double m = masked_mean(map, c, keep_bands_mask(part, {b}), true);
      csv << ',' << format_double(m);
      row["B" + std::to_string(b + 1)] = m;
    }
    csv << "\n";
    summary.push_back(row);
  }
  write_text(out / "adcs_summary.csv", csv.str());
  write_text(out / "adcs_summary.json", summary.dump(2) + "\n");
  std::cout << csv.str();
}

struct DfmArgs {
  DataArgs data;
  PredictorArgs predictor;
  std::string score_split = "val";
  std::string report_split = "test";
  std::vector<double> x_grid{1, 5, 10};
  double report_x = 5;
  double tau_tpr = 0.5;
  double tau_fpr = 0.10;
  std::vector<int> classes;
  int previews = 4;
  std::string out;
};

void write_ranking(const fs::path& path, const FrequencyScoreMap& scores, const DfmMask& full) {
  std::ostringstream os;
  os << "rank,u,v,radius,score\n";
  for (std::size_t r = 0; r < full.selected.size(); ++r) {
    const FrequencyCoord f = scores.pairs[full.selected[r]];
    os << r + 1 << ',' << f.u << ',' << f.v << ',' << format_double(f.radius()) << ','
       << format_double(scores.scores[full.selected[r]]) << '\n';
  }
  write_text(path, os.str());
}

bool pairs_nested(const DfmMask& small, const DfmMask& large) {
  const std::set<std::size_t> big(large.selected.begin(), large.selected.end());
  return std::all_of(small.selected.begin(), small.selected.end(), [&](std::size_t i) { return big.count(i) > 0; });
}

void run_dfm(const DfmArgs& a, const CLI::App* sub) {
  for (double x : a.x_grid) {
    if (!(x > 0.0) || x > 100.0) throw UsageError("top-X values must lie in (0, 100]");
  }
  if (!(a.report_x > 0.0) || a.report_x > 100.0) throw UsageError("--report-x must lie in (0, 100]");
  const auto predictor = a.predictor.load();
  const LabeledDataset scoring = a.data.load(a.score_split);
  const LabeledDataset test = a.data.load(a.report_split);
  std::vector<int> classes = a.classes;
  if (classes.empty()) {
    for (int c = 0; c < scoring.n_classes(); ++c) classes.push_back(c);
  }
  for (int c : classes) {
    if (c < 0 || c >= scoring.n_classes()) throw UsageError("class index " + std::to_string(c) + " out of range");
  }

  const fs::path out(a.out);
  fs::create_directories(out);
  write_config(out, sub);
  std::vector<double> grid = a.x_grid;
  std::sort(grid.begin(), grid.end());

  std::map<int, DfmMask> report_dfms;
  for (int c : classes) {
    const std::string tag = "C" + std::to_string(c);
    std::cerr << "scoring class " << c << " (" << scoring.class_names[static_cast<std::size_t>(c)] << ")\n";
    const FrequencyScoreMap scores = score_frequencies(*predictor, scoring.only_class(c));
    write_tensor(out / ("scores_" + tag + ".f32"), map_tensor(scores.dense(), scores.side));
    write_png(out / ("scores_" + tag + ".png"), render_scaled(scores.dense(), scores.side));
    write_ranking(out / ("ranking_" + tag + ".csv"), scores, select_topx(scores, 100.0));

    const LabeledDataset class_test = test.only_class(c);
    std::optional<DfmMask> previous;
    for (double x : grid) {
      const DfmMask dfm = select_topx(scores, x);
      const std::string stem = "dfm_" + tag + "_x" + x_tag(x);
      write_tensor(out / (stem + ".f32"), mask_tensor(dfm.mask));
      write_png(out / (stem + ".png"), render_mask(dfm.mask));
      const int k_prev = std::min<int>(a.previews, static_cast<int>(class_test.size()));
      for (int k = 0; k < k_prev; ++k) {
        const Image filtered = filter_image(class_test.images[static_cast<std::size_t>(k)], dfm.mask);
        write_png(out / ("preview_" + tag + "_x" + x_tag(x) + "_" + std::to_string(k) + ".png"), image_to_raster(filtered));
      }
      if (previous && !pairs_nested(*previous, dfm)) {
        throw std::logic_error("DFM nesting violated for class " + std::to_string(c));
      }
      previous = dfm;
    }
    report_dfms.emplace(c, select_topx(scores, a.report_x));
  }
  std::cout << "DFM nesting across X grid holds for every class\n";

  ShortcutReport report = shortcut_report(*predictor, test, report_dfms, a.report_x, a.tau_tpr, a.tau_fpr, classes);
  report.provenance = {{"data", a.data.root},
                       {"predictor", a.predictor.describe()},
                       {"score_split", a.score_split},
                       {"report_split", a.report_split},
                       {"x_grid", grid}};
  write_text(out / "shortcut_report.csv", shortcut_report_csv(report));
  write_text(out / "shortcut_report.json", shortcut_report_json(report).dump(2) + "\n");
  std::cout << shortcut_report_csv(report);
}

struct ReportArgs {
  DataArgs data;
  PredictorArgs predictor;
  std::string dfm_dir;
  std::string split = "test";
  double x = 5;
  double tau_tpr = 0.5;
  double tau_fpr = 0.10;
  std::vector<int> classes;
  std::string out;
};

void run_report(const ReportArgs& a, const CLI::App* sub) {
  const auto predictor = a.predictor.load();
  const LabeledDataset test = a.data.load(a.split);
  std::vector<int> classes = a.classes;
  if (classes.empty()) {
    for (int c = 0; c < test.n_classes(); ++c) classes.push_back(c);
  }
  std::map<int, DfmMask> dfms;
  for (int c : classes) {
    if (c < 0 || c >= test.n_classes()) throw UsageError("class index " + std::to_string(c) + " out of range");
    const fs::path path = fs::path(a.dfm_dir) / ("dfm_C" + std::to_string(c) + "_x" + x_tag(a.x) + ".f32");
    if (!fs::exists(path)) {
      throw std::runtime_error("no DFM for class " + std::to_string(c) + " (" + test.class_names[static_cast<std::size_t>(c)] +
                               ") at top-" + x_tag(a.x) + "%: expected " + path.string());
    }
    DfmMask m;
    m.mask = parse_mask("file:" + path.string(), 0, RadiusMetric::euclidean);
    m.percent = a.x;
    m.class_id = c;
    dfms.emplace(c, std::move(m));
  }
  ShortcutReport report = shortcut_report(*predictor, test, dfms, a.x, a.tau_tpr, a.tau_fpr, classes);
  report.provenance = {{"data", a.data.root}, {"predictor", a.predictor.describe()}, {"dfm_dir", a.dfm_dir}, {"split", a.split}};
  const fs::path out(a.out);
  fs::create_directories(out);
  write_config(out, sub);
  write_text(out / "shortcut_report.csv", shortcut_report_csv(report));
  write_text(out / "shortcut_report.json", shortcut_report_json(report).dump(2) + "\n");
  std::cout << shortcut_report_csv(report);
}

struct FilterArgs {
  DataArgs data;
  std::string mask;
  std::string out;
  bool overwrite = false;
  std::string metric = "euclidean";
};

void run_filter(const FilterArgs& a, const CLI::App* sub) {
  std::vector<LabeledDataset> splits;
  for (Split s : {Split::train, Split::val, Split::test}) {
    if (fs::exists(fs::path(a.data.root) / split_name(s))) splits.push_back(load_split(a.data.root, s, a.data.ingest()));
  }
  if (splits.empty()) throw std::runtime_error("no train/val/test split under '" + a.data.root + "'");
  const int side = splits.front().images.empty() ? 0 : splits.front().images.front().height;
  const FrequencyMask mask = parse_mask(a.mask, side, parse_metric(a.metric));
  const fs::path out(a.out);
  require_empty_or_overwrite(out, a.overwrite);
  std::vector<LabeledDataset> filtered;
  for (const auto& s : splits) filtered.push_back(filter_dataset(s, mask));
  std::vector<const LabeledDataset*> ptrs;
  for (const auto& f : filtered) ptrs.push_back(&f);
  json manifest = {{"kind", "filtered"}, {"source", a.data.root}, {"mask", a.mask}, {"kept_frequencies", mask.count()},
                   {"class_names", filtered.front().class_names}};
  write_dataset_layout(out, ptrs, manifest);
  write_tensor(out / "mask.f32", mask_tensor(mask));
  write_png(out / "mask.png", render_mask(mask));
  write_config(out, sub);
  std::cout << "filtered " << filtered.size() << " split(s) with " << a.mask << " (" << mask.count() << " of "
            << mask.bits().size() << " frequencies kept) -> " << out.string() << "\n";
}

struct CodecArgs {
  std::string in;
  std::string out;
};

void run_encode(const CodecArgs& a) {
  const Image img = raster_to_image(read_png(a.in));
  const Tensor t = image_to_tensor(img);
  write_tensor(a.out, t);
  std::cout << a.out << ": " << t.channels << "x" << t.height << "x" << t.width << ", "
            << kTensorHeaderBytes + 4 * t.data.size() << " bytes\n";
}

void run_decode(const CodecArgs& a) {
  const Tensor t = read_tensor(a.in);
  std::cout << a.in << ": " << t.channels << "x" << t.height << "x" << t.width << ", "
            << kTensorHeaderBytes + 4 * t.data.size() << " bytes\n";
  if (!a.out.empty()) {
    if (t.channels != 1 && t.channels != 3) throw std::runtime_error("PNG output needs 1 or 3 channels");
    write_png(a.out, image_to_raster(tensor_to_image(t)));
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Frequency-shortcut analysis toolkit", "freqshort"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");
  std::string config_path;
  app.add_option("--config", config_path, "JSON config; explicit flags take precedence");

  SynthgenArgs sg;
  CLI::App* c_sg = app.add_subcommand("synthgen", "Generate a Syn_b dataset");
  c_sg->add_option("--band", sg.band, "Bias band B1..B4")->required()->check(CLI::IsMember({"B1", "B2", "B3", "B4"}, CLI::ignore_case));
  c_sg->add_option("--per-class", sg.per_class, "Samples per class: train,val,test")->expected(3)->delimiter(',');
  c_sg->add_option("--seed", sg.seed, "Base seed");
  c_sg->add_option("--out", sg.out, "Output dataset root")->required();
  c_sg->add_flag("--overwrite", sg.overwrite, "Replace an existing dataset in --out");
  c_sg->add_option("--k-min", sg.k_min, "Minimum sampled frequencies per image");
  c_sg->add_option("--k-max", sg.k_max, "Maximum sampled frequencies per image");
  add_metric(c_sg, sg.metric);

  TrainArgs tr;
  CLI::App* c_tr = app.add_subcommand("train", "Train the compact residual CNN");
  add_data(c_tr, tr.data);
  c_tr->add_option("--out", tr.out, "Run directory")->required();
  c_tr->add_option("--epochs", tr.cfg.epochs);
  c_tr->add_option("--lr", tr.cfg.lr);
  c_tr->add_option("--momentum", tr.cfg.momentum);
  c_tr->add_option("--weight-decay", tr.cfg.weight_decay);
  c_tr->add_option("--batch-size", tr.cfg.batch_size);
  c_tr->add_option("--plateau-factor", tr.cfg.plateau_factor);
  c_tr->add_option("--patience", tr.cfg.plateau_patience, "Epochs without validation improvement before decay");
  c_tr->add_option("--seed", tr.cfg.seed);
  c_tr->add_option("--probe-iterations", tr.cfg.probe_iterations, "Log probe metrics for iterations 1..M");
  c_tr->add_option("--probe-stride", tr.cfg.probe_stride, "Probe every k-th iteration");
  c_tr->add_option("--probe-split", tr.probe_split)->check(CLI::IsMember({"train", "val", "test"}));
  c_tr->add_option("--probe-filter", tr.probe_filter, "none, lowpass:R, highpass:R, keep:B14, stop:B23");
  c_tr->add_option("--max-iterations", tr.cfg.max_iterations, "Stop after this many SGD steps (0: no limit)");
  add_metric(c_tr, tr.metric);

  BandstopArgs bs;
  CLI::App* c_bs = app.add_subcommand("bandstop-eval", "Relative confusion matrices on band-stop test sets");
  add_data(c_bs, bs.data);
  add_predictor(c_bs, bs.predictor);
  c_bs->add_option("--split", bs.split)->check(CLI::IsMember({"train", "val", "test"}));
  c_bs->add_option("--pairs", bs.pairs, "Kept band pairs such as B14 (default: all six)")->delimiter(',');
  c_bs->add_option("--out", bs.out)->required();
  add_metric(c_bs, bs.metric);

  AdcsArgs ad;
  CLI::App* c_ad = app.add_subcommand("adcs", "Class-wise accumulative spectrum differences");
  add_data(c_ad, ad.data);
  c_ad->add_option("--split", ad.split)->check(CLI::IsMember({"train", "val", "test"}));
  c_ad->add_option("--out", ad.out)->required();
  add_metric(c_ad, ad.metric);

  DfmArgs dm;
  CLI::App* c_dm = app.add_subcommand("dfm", "Score frequencies, build DFMs and a shortcut report");
  add_data(c_dm, dm.data);
  add_predictor(c_dm, dm.predictor);
  c_dm->add_option("--score-split", dm.score_split)->check(CLI::IsMember({"train", "val", "test"}));
  c_dm->add_option("--report-split", dm.report_split)->check(CLI::IsMember({"train", "val", "test"}));
  c_dm->add_option("--x", dm.x_grid, "Top-X percent grid")->delimiter(',');
  c_dm->add_option("--report-x", dm.report_x, "X used for the shortcut report");
  c_dm->add_option("--tau-tpr", dm.tau_tpr);
  c_dm->add_option("--tau-fpr", dm.tau_fpr);
  c_dm->add_option("--classes", dm.classes, "Class indices to analyze (default: all)")->delimiter(',');
  c_dm->add_option("--previews", dm.previews, "Filtered preview images per class and X");
  c_dm->add_option("--out", dm.out)->required();

  ReportArgs rp;
  CLI::App* c_rp = app.add_subcommand("shortcut-report", "Shortcut report from existing DFM files");
  add_data(c_rp, rp.data);
  add_predictor(c_rp, rp.predictor);
  c_rp->add_option("--dfm-dir", rp.dfm_dir, "Directory holding dfm_C<i>_x<X>.f32")->required();
  c_rp->add_option("--split", rp.split)->check(CLI::IsMember({"train", "val", "test"}));
  c_rp->add_option("--x", rp.x);
  c_rp->add_option("--tau-tpr", rp.tau_tpr);
  c_rp->add_option("--tau-fpr", rp.tau_fpr);
  c_rp->add_option("--classes", rp.classes)->delimiter(',');
  c_rp->add_option("--out", rp.out)->required();

  FilterArgs fl;
  CLI::App* c_fl = app.add_subcommand("filter", "Apply a frequency mask to every split of a dataset");
  add_data(c_fl, fl.data);
  c_fl->add_option("--mask", fl.mask, "lowpass:R, highpass:R, keep:B14, stop:B23 or file:PATH")->required();
  c_fl->add_option("--out", fl.out)->required();
  c_fl->add_flag("--overwrite", fl.overwrite);
  add_metric(c_fl, fl.metric);

  CodecArgs enc;
  CLI::App* c_enc = app.add_subcommand("encode", "PNG image to tensor container");
  c_enc->add_option("--in", enc.in)->required();
  c_enc->add_option("--out", enc.out)->required();

  CodecArgs dec;
  CLI::App* c_dec = app.add_subcommand("decode", "Inspect a tensor container, optionally as PNG");
  c_dec->add_option("--in", dec.in)->required();
  c_dec->add_option("--out", dec.out, "PNG preview path");

  try {
    std::vector<std::string> args(argv + 1, argv + argc);
    args = apply_config(app, std::move(args));
    std::reverse(args.begin(), args.end());
    try {
      app.parse(args);
    } catch (const CLI::ParseError& e) {
      const int code = app.exit(e);
      return code == 0 ? 0 : 2;
    }

    if (c_sg->parsed()) run_synthgen(sg, c_sg);
    else if (c_tr->parsed()) run_train(tr, c_tr);
    else if (c_bs->parsed()) run_bandstop(bs, c_bs);
    else if (c_ad->parsed()) run_adcs(ad, c_ad);
    else if (c_dm->parsed()) run_dfm(dm, c_dm);
    else if (c_rp->parsed()) run_report(rp, c_rp);
    else if (c_fl->parsed()) run_filter(fl, c_fl);
    else if (c_enc->parsed()) run_encode(enc);
    else if (c_dec->parsed()) run_decode(dec);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

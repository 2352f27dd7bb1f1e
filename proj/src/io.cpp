#include "freqshort/io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <regex>
#include <set>
#include <sstream>

namespace freqshort {

namespace fs = std::filesystem;

namespace {

constexpr char kMagic[4] = {'F', 'Q', 'L', '1'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::vector<std::uint8_t>& in, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in[at + i]) << (8 * i);
  return v;
}

}  // namespace

// ---------------------------------------------------------------------------
// Tensor container

std::vector<std::uint8_t> encode_tensor(const Tensor& tensor) {
  const std::size_t n = static_cast<std::size_t>(tensor.channels) * tensor.height * tensor.width;
  if (tensor.data.size() != n) {
    throw std::invalid_argument("encode_tensor: payload has " + std::to_string(tensor.data.size()) +
                                " values, header declares " + std::to_string(n));
  }
  std::vector<std::uint8_t> out;
  out.reserve(kTensorHeaderBytes + 4 * n);
  out.insert(out.end(), kMagic, kMagic + 4);
  put_u32(out, tensor.channels);
  put_u32(out, tensor.height);
  put_u32(out, tensor.width);
  for (float x : tensor.data) put_u32(out, std::bit_cast<std::uint32_t>(x));
  return out;
}

Tensor decode_tensor(const std::vector<std::uint8_t>& bytes, std::size_t& offset) {
  if (bytes.size() < offset + 4) throw FormatError("truncated tensor: missing magic", offset);
  if (!std::equal(kMagic, kMagic + 4, bytes.begin() + static_cast<std::ptrdiff_t>(offset))) {
    throw FormatError("bad tensor magic (expected FQL1)", offset);
  }
  if (bytes.size() < offset + kTensorHeaderBytes) throw FormatError("truncated tensor header", bytes.size());
  Tensor t;
  t.channels = get_u32(bytes, offset + 4);
  t.height = get_u32(bytes, offset + 8);
  t.width = get_u32(bytes, offset + 12);
  const std::uint64_t n = static_cast<std::uint64_t>(t.channels) * t.height * t.width;
  const std::size_t payload = offset + kTensorHeaderBytes;
  if (n > (bytes.size() - payload) / 4) {
    throw FormatError("truncated tensor payload: header declares " + std::to_string(n) + " floats", bytes.size());
  }
  t.data.resize(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < t.data.size(); ++i) t.data[i] = std::bit_cast<float>(get_u32(bytes, payload + 4 * i));
  offset = payload + 4 * t.data.size();
  return t;
}

Tensor decode_tensor(const std::vector<std::uint8_t>& bytes) {
  std::size_t offset = 0;
  Tensor t = decode_tensor(bytes, offset);
  if (offset != bytes.size()) throw FormatError("trailing bytes after tensor payload", offset);
  return t;
}

std::vector<std::uint8_t> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "' for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

void write_text(const fs::path& path, const std::string& text) {
  write_file(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

std::string read_text(const fs::path& path) {
  const auto bytes = read_file(path);
  return {bytes.begin(), bytes.end()};
}

void write_tensor(const fs::path& path, const Tensor& tensor) { write_file(path, encode_tensor(tensor)); }

Tensor read_tensor(const fs::path& path) {
  try {
    return decode_tensor(read_file(path));
  } catch (const FormatError& e) {
    throw std::runtime_error("'" + path.string() + "': " + e.what());
  }
}

Tensor image_to_tensor(const Image& image) {
  Tensor t{static_cast<std::uint32_t>(image.channels), static_cast<std::uint32_t>(image.height),
           static_cast<std::uint32_t>(image.width), {}};
  t.data.reserve(image.data.size());
  for (double x : image.data) t.data.push_back(static_cast<float>(x));
  return t;
}

Image tensor_to_image(const Tensor& tensor) {
  Image image(static_cast<int>(tensor.channels), static_cast<int>(tensor.height), static_cast<int>(tensor.width));
  std::transform(tensor.data.begin(), tensor.data.end(), image.data.begin(),
                 [](float x) { return static_cast<double>(x); });
  return image;
}

// ---------------------------------------------------------------------------
// PNG

void write_png(const fs::path& path, const Raster& raster) {
  if (raster.channels != 1 && raster.channels != 3) throw std::invalid_argument("write_png: 1 or 3 channels");
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(raster.width);
  img.height = static_cast<png_uint_32>(raster.height);
  img.format = raster.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&img, path.string().c_str(), 0, raster.pixels.data(), 0, nullptr)) {
    const std::string msg = img.message;
    png_image_free(&img);
    throw std::runtime_error("cannot write PNG '" + path.string() + "': " + msg);
  }
}

Raster read_png(const fs::path& path) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.string().c_str())) {
    throw std::runtime_error("cannot read PNG '" + path.string() + "': " + img.message);
  }
  Raster r;
  r.channels = (img.format & PNG_FORMAT_FLAG_COLOR) ? 3 : 1;
  img.format = r.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  r.width = static_cast<int>(img.width);
  r.height = static_cast<int>(img.height);
  r.pixels.resize(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, r.pixels.data(), 0, nullptr)) {
    const std::string msg = img.message;
    png_image_free(&img);
    throw std::runtime_error("cannot decode PNG '" + path.string() + "': " + msg);
  }
  return r;
}

Raster image_to_raster(const Image& image) {
  if (image.channels != 1 && image.channels != 3) {
    throw std::invalid_argument("image_to_raster: only 1- or 3-channel images can be previewed");
  }
  Raster r{image.channels, image.height, image.width, {}};
  r.pixels.resize(static_cast<std::size_t>(image.channels) * image.plane());
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      for (int c = 0; c < image.channels; ++c) {
        const double v = std::clamp(image.at(c, y, x), 0.0, 1.0);
        r.pixels[(static_cast<std::size_t>(y) * image.width + x) * image.channels + c] =
            static_cast<std::uint8_t>(std::lround(v * 255.0));
      }
    }
  }
  return r;
}

Image raster_to_image(const Raster& raster) {
  Image image(raster.channels, raster.height, raster.width);
  for (int y = 0; y < raster.height; ++y) {
    for (int x = 0; x < raster.width; ++x) {
      for (int c = 0; c < raster.channels; ++c) {
        image.at(c, y, x) =
            raster.pixels[(static_cast<std::size_t>(y) * raster.width + x) * raster.channels + c] / 255.0;
      }
    }
  }
  return image;
}

// ---------------------------------------------------------------------------
// Dataset layout

std::string class_dir_name(int index, const std::string& name) {
  return "class_" + std::to_string(index) + "_" + name;
}

void write_dataset_layout(const fs::path& root, const std::vector<const LabeledDataset*>& splits,
                          nlohmann::json manifest) {
  nlohmann::json counts = nlohmann::json::object();
  for (const LabeledDataset* split : splits) {
    split->validate();
    const fs::path dir = root / split_name(split->split);
    for (int c = 0; c < split->n_classes(); ++c) {
      fs::create_directories(dir / class_dir_name(c, split->class_names[static_cast<std::size_t>(c)]));
    }
    for (std::size_t i = 0; i < split->size(); ++i) {
      const std::string cls_dir = class_dir_name(split->labels[i], split->class_names[static_cast<std::size_t>(split->labels[i])]);
      const fs::path base = dir / cls_dir / fs::path(split->ids[i]).filename();
      write_tensor(fs::path(base.string() + ".f32"), image_to_tensor(split->images[i]));
      if (split->images[i].channels == 1 || split->images[i].channels == 3) {
        write_png(fs::path(base.string() + ".png"), image_to_raster(split->images[i]));
      }
    }
    counts[split_name(split->split)] = {{"per_class", split->class_counts()}, {"total", split->size()}};
  }
  manifest["counts"] = counts;
  write_text(root / "manifest.json", manifest.dump(2) + "\n");
}

Image center_crop_resize(const Image& image, int side) {
  if (side <= 0) throw std::invalid_argument("resize: side must be positive");
  const int crop = std::min(image.height, image.width);
  const int y0 = (image.height - crop) / 2;
  const int x0 = (image.width - crop) / 2;
  Image out(image.channels, side, side);
  const double scale = static_cast<double>(crop) / side;
  for (int c = 0; c < image.channels; ++c) {
    for (int y = 0; y < side; ++y) {
      const double sy = std::clamp((y + 0.5) * scale - 0.5, 0.0, crop - 1.0);
      const int iy = std::min(static_cast<int>(sy), crop - 2 < 0 ? 0 : crop - 2);
      const double fy = crop == 1 ? 0.0 : sy - iy;
      for (int x = 0; x < side; ++x) {
        const double sx = std::clamp((x + 0.5) * scale - 0.5, 0.0, crop - 1.0);
        const int ix = std::min(static_cast<int>(sx), crop - 2 < 0 ? 0 : crop - 2);
        const double fx = crop == 1 ? 0.0 : sx - ix;
        auto px = [&](int yy, int xx) {
          return image.at(c, y0 + std::min(yy, crop - 1), x0 + std::min(xx, crop - 1));
        };
        out.at(c, y, x) = (1 - fy) * ((1 - fx) * px(iy, ix) + fx * px(iy, ix + 1)) +
                          fy * ((1 - fx) * px(iy + 1, ix) + fx * px(iy + 1, ix + 1));
      }
    }
  }
  return out;
}

LabeledDataset ingest_image_dir(const fs::path& dir, const IngestOptions& options) {
  if (!fs::is_directory(dir)) throw std::runtime_error("dataset directory '" + dir.string() + "' does not exist");
  std::vector<fs::path> class_dirs;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_directory()) class_dirs.push_back(entry.path());
  }
  std::sort(class_dirs.begin(), class_dirs.end());
  if (class_dirs.empty()) throw std::runtime_error("'" + dir.string() + "' contains no class folders");

  static const std::regex kClassDir(R"(class_(\d+)_(.+))");
  bool indexed = true;
  for (const fs::path& p : class_dirs) indexed = indexed && std::regex_match(p.filename().string(), kClassDir);

  LabeledDataset out;
  std::vector<std::pair<int, fs::path>> ordered;
  if (indexed) {
    std::map<int, std::string> names;
    for (const fs::path& p : class_dirs) {
      std::smatch m;
      const std::string name = p.filename().string();
      std::regex_match(name, m, kClassDir);
      const int idx = std::stoi(m[1].str());
      if (!names.emplace(idx, m[2].str()).second) {
        throw std::runtime_error("duplicate class index " + std::to_string(idx) + " in '" + dir.string() + "'");
      }
      ordered.emplace_back(idx, p);
    }
    const int n = names.rbegin()->first + 1;
    out.class_names.resize(static_cast<std::size_t>(n));
    for (int c = 0; c < n; ++c) {
      out.class_names[static_cast<std::size_t>(c)] = names.contains(c) ? names[c] : "class" + std::to_string(c);
    }
  } else {
    for (std::size_t i = 0; i < class_dirs.size(); ++i) {
      ordered.emplace_back(static_cast<int>(i), class_dirs[i]);
      out.class_names.push_back(class_dirs[i].filename().string());
    }
  }
  std::sort(ordered.begin(), ordered.end());

  for (const auto& [cls, path] : ordered) {
    std::map<std::string, std::pair<bool, bool>> stems;  // stem -> (has f32, has png)
    for (const auto& entry : fs::directory_iterator(path)) {
      if (!entry.is_regular_file()) continue;
      const std::string ext = entry.path().extension().string();
      if (ext == ".f32") stems[entry.path().stem().string()].first = true;
      if (ext == ".png" || ext == ".PNG") stems[entry.path().stem().string()].second = true;
    }
    for (const auto& [stem, kinds] : stems) {
      Image image;
      if (kinds.first) {
        image = tensor_to_image(read_tensor(path / (stem + ".f32")));
      } else {
        fs::path png = path / (stem + ".png");
        if (!fs::exists(png)) png = path / (stem + ".PNG");
        image = raster_to_image(read_png(png));
      }
      out.add(std::move(image), cls, path.filename().string() + "/" + stem);
    }
  }
  if (out.images.empty()) throw std::runtime_error("'" + dir.string() + "' contains no images");

  const Image& first = out.images.front();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const Image& img = out.images[i];
    if (img.channels != first.channels) {
      throw DimensionError("channel mismatch: '" + out.ids[i] + "' has " + std::to_string(img.channels) +
                           " channels, '" + out.ids.front() + "' has " + std::to_string(first.channels));
    }
    if (!options.side && (img.height != first.height || img.width != first.width)) {
      throw DimensionError("mixed image sizes ('" + out.ids[i] + "' vs '" + out.ids.front() +
                           "'); pass a resize side to ingest");
    }
  }
  if (options.side) {
    for (Image& img : out.images) {
      if (img.height != *options.side || img.width != *options.side) img = center_crop_resize(img, *options.side);
    }
  } else if (first.height != first.width) {
    throw DimensionError("images are " + std::to_string(first.height) + "x" + std::to_string(first.width) +
                         "; pass a resize side to make them square");
  }
  out.provenance = dir.string();
  return out;
}

LabeledDataset load_split(const fs::path& root, Split split, const IngestOptions& options) {
  const fs::path dir = root / split_name(split);
  if (!fs::is_directory(dir)) {
    throw std::runtime_error("missing split '" + split_name(split) + "' under '" + root.string() + "'");
  }
  LabeledDataset out = ingest_image_dir(dir, options);
  out.split = split;
  return out;
}

// ---------------------------------------------------------------------------
// CSV

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (line.back() == ',') cells.emplace_back();
    rows.push_back(std::move(cells));
  }
  return rows;
}

}  // namespace freqshort

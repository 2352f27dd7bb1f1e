#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "freqshort/dataset.hpp"
#include "freqshort/spectrum.hpp"

namespace freqshort {

// ---------------------------------------------------------------------------
// Tensor container: "FQL1", then little-endian u32 channels, height, width,
// then channels*height*width little-endian float32 values, channel-major.

class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

struct Tensor {
  std::uint32_t channels = 0;
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::vector<float> data;

  bool operator==(const Tensor&) const = default;
};

inline constexpr std::size_t kTensorHeaderBytes = 16;

std::vector<std::uint8_t> encode_tensor(const Tensor& tensor);
/// Decodes one tensor starting at `offset`; advances it past the payload.
Tensor decode_tensor(const std::vector<std::uint8_t>& bytes, std::size_t& offset);
Tensor decode_tensor(const std::vector<std::uint8_t>& bytes);

void write_tensor(const std::filesystem::path& path, const Tensor& tensor);
Tensor read_tensor(const std::filesystem::path& path);

Tensor image_to_tensor(const Image& image);
Image tensor_to_image(const Tensor& tensor);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// PNG (8-bit gray or RGB)

struct Raster {
  int channels = 1;  // 1 or 3
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> pixels;  // interleaved, row-major
};

void write_png(const std::filesystem::path& path, const Raster& raster);
Raster read_png(const std::filesystem::path& path);

/// Clamps to [0,1] and quantizes; 3-channel images become RGB.
Raster image_to_raster(const Image& image);
/// 8-bit values map to v/255, so 255 -> 1.0 exactly.
Image raster_to_image(const Raster& raster);

// ---------------------------------------------------------------------------
// Dataset layout: root/{train,val,test}/class_<idx>_<name>/<id>.f32 + <id>.png,
// root/manifest.json.

std::string class_dir_name(int index, const std::string& name);

/// Writes every given split; the manifest gains per-split class counts.
void write_dataset_layout(const std::filesystem::path& root, const std::vector<const LabeledDataset*>& splits,
                          nlohmann::json manifest);

struct IngestOptions {
  std::optional<int> side;  // center-crop then resize to side x side
};

/// Reads one directory of class folders. Folders named class_<idx>_<name>
/// take their index from the name; otherwise folders are sorted by name.
/// .f32 files are authoritative; PNGs are used only when no .f32 exists.
LabeledDataset ingest_image_dir(const std::filesystem::path& dir, const IngestOptions& options = {});

/// Loads a split from a dataset root; throws naming the split if it is absent.
LabeledDataset load_split(const std::filesystem::path& root, Split split, const IngestOptions& options = {});

/// Center-crop to a square then bilinear resize.
Image center_crop_resize(const Image& image, int side);

// ---------------------------------------------------------------------------
// Small CSV helpers

std::string format_double(double value);
std::vector<std::vector<std::string>> parse_csv(const std::string& text);

}  // namespace freqshort

#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "voxelcast/core.hpp"

namespace voxelcast {

/// Dense row-major raster, channel-interleaved, values nominally in [0, 1].
class Image {
 public:
  Image() = default;
  Image(int width, int height, int channels = 3, float fill = 0.0f);

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width_) * height_; }

  float& at(int x, int y, int c) { return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c]; }
  float at(int x, int y, int c) const {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }
  Color rgb(int x, int y) const { return {at(x, y, 0), at(x, y, 1), at(x, y, 2)}; }
  void set_rgb(int x, int y, const Color& c) {
    at(x, y, 0) = c.x();
    at(x, y, 1) = c.y();
    at(x, y, 2) = c.z();
  }

  std::span<float> data() { return data_; }
  std::span<const float> data() const { return data_; }

  bool same_shape(const Image& other) const {
    return width_ == other.width_ && height_ == other.height_ && channels_ == other.channels_;
  }

  /// Rounds to the 8-bit grid PNG storage uses.
  Image quantized() const;

 private:
  int width_ = 0;
  int height_ = 0;
  int channels_ = 3;
  std::vector<float> data_;
};

/// 8-bit PNG (gray or RGB). Values are clamped to [0, 1].
void write_png(const std::filesystem::path& path, const Image& image);
Image read_png(const std::filesystem::path& path);

/// Raw float32 raster: "IMF1", width, height, channels (u32 LE), then data.
void write_raw_image(const std::filesystem::path& path, const Image& image);
Image read_raw_image(const std::filesystem::path& path);

/// Dispatches on extension: ".png" or ".imf".
Image load_image(const std::filesystem::path& path);
void save_image(const std::filesystem::path& path, const Image& image);

}  // namespace voxelcast

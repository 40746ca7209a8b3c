#include "voxelcast/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>

#include "voxelcast/io.hpp"

namespace voxelcast {

namespace {

std::uint8_t to_byte(float v) {
  const float c = std::clamp(v, 0.0f, 1.0f);
  return static_cast<std::uint8_t>(std::lround(c * 255.0f));
}

void png_write_to_vector(png_structp png, png_bytep data, png_size_t length) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + length);
}

void png_flush_noop(png_structp) {}

struct PngReadState {
  const std::vector<std::uint8_t>* bytes;
  std::size_t pos;
};

void png_read_from_vector(png_structp png, png_bytep data, png_size_t length) {
  auto* state = static_cast<PngReadState*>(png_get_io_ptr(png));
  if (state->pos + length > state->bytes->size()) png_error(png, "truncated PNG");
  std::memcpy(data, state->bytes->data() + state->pos, length);
  state->pos += length;
}

}  // namespace

Image::Image(int width, int height, int channels, float fill)
    : width_(width), height_(height), channels_(channels) {
  if (width <= 0 || height <= 0 || channels <= 0) throw DimensionError("image dimensions must be positive");
  data_.assign(static_cast<std::size_t>(width) * height * channels, fill);
}

Image Image::quantized() const {
  Image out = *this;
  for (float& v : out.data_) v = static_cast<float>(to_byte(v)) / 255.0f;
  return out;
}

void write_png(const std::filesystem::path& path, const Image& image) {
  if (image.channels() != 1 && image.channels() != 3) throw DimensionError("PNG export needs 1 or 3 channels");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw std::runtime_error("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  std::vector<std::uint8_t> encoded;
  std::vector<std::uint8_t> row(static_cast<std::size_t>(image.width()) * image.channels());
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("PNG encoding failed: " + path.string());
  }
  png_set_write_fn(png, &encoded, png_write_to_vector, png_flush_noop);
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width()), static_cast<png_uint_32>(image.height()), 8,
               image.channels() == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x)
      for (int c = 0; c < image.channels(); ++c)
        row[static_cast<std::size_t>(x) * image.channels() + c] = to_byte(image.at(x, y, c));
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  io::write_file_atomic(path, encoded);
}

Image read_png(const std::filesystem::path& path) {
  const auto bytes = io::read_file(path);
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) throw FormatError("not a PNG file: " + path.string());
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  PngReadState state{&bytes, 0};
  Image image;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("PNG decoding failed: " + path.string());
  }
  png_set_read_fn(png, &state, png_read_from_vector);
  png_read_info(png, info);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_packing(png);
  png_set_palette_to_rgb(png);
  png_set_expand_gray_1_2_4_to_8(png);
  png_read_update_info(png, info);
  const int width = static_cast<int>(png_get_image_width(png, info));
  const int height = static_cast<int>(png_get_image_height(png, info));
  const int channels = png_get_channels(png, info);
  if (channels != 1 && channels != 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("unsupported PNG channel layout: " + path.string());
  }
  image = Image(width, height, channels);
  std::vector<std::uint8_t> row(png_get_rowbytes(png, info));
  for (int y = 0; y < height; ++y) {
    png_read_row(png, row.data(), nullptr);
    for (int x = 0; x < width; ++x)
      for (int c = 0; c < channels; ++c)
        image.at(x, y, c) = static_cast<float>(row[static_cast<std::size_t>(x) * channels + c]) / 255.0f;
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return image;
}

void write_raw_image(const std::filesystem::path& path, const Image& image) {
  io::ByteWriter w;
  w.text("IMF1");
  w.u32(static_cast<std::uint32_t>(image.width()));
  w.u32(static_cast<std::uint32_t>(image.height()));
  w.u32(static_cast<std::uint32_t>(image.channels()));
  w.f32_array(image.data());
  io::write_file_atomic(path, w.data());
}

Image read_raw_image(const std::filesystem::path& path) {
  const auto bytes = io::read_file(path);
  io::ByteReader r(bytes);
  if (r.text(4) != "IMF1") throw FormatError("bad raw image magic: " + path.string());
  const auto width = static_cast<int>(r.u32());
  const auto height = static_cast<int>(r.u32());
  const auto channels = static_cast<int>(r.u32());
  Image image(width, height, channels);
  r.f32_array(image.data());
  return image;
}

Image load_image(const std::filesystem::path& path) {
  if (path.extension() == ".png") return read_png(path);
  if (path.extension() == ".imf") return read_raw_image(path);
  throw FormatError("unsupported image extension: " + path.string());
}

void save_image(const std::filesystem::path& path, const Image& image) {
  if (path.extension() == ".png") return write_png(path, image);
  if (path.extension() == ".imf") return write_raw_image(path, image);
  throw FormatError("unsupported image extension: " + path.string());
}

}  // namespace voxelcast

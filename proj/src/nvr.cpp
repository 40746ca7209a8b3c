#include "voxelcast/nvr.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "voxelcast/io.hpp"

namespace voxelcast {

using ad::Shape;
using ad::Tensor;
using FTensor = Tensor<float>;

// ---------------------------------------------------------------------------
// Config

int NvrConfig::feature_resolution() const { return voxel_resolution >> encoder3d.size(); }

void NvrConfig::validate() const {
  auto positive = [](const std::vector<int>& v, const char* what) {
    if (v.empty()) throw DomainError(std::string(what) + " must not be empty");
    for (int c : v)
      if (c <= 0) throw DomainError(std::string(what) + " widths must be > 0");
  };
  positive(encoder3d, "encoder3d");
  positive(decoder, "decoder");
  if (voxel_resolution <= 0 || image_size <= 0 || voxel_channels <= 0)
    throw DomainError("resolutions and voxel channels must be > 0");
  if (projection_channels <= 0 || light_hidden <= 0 || light_embedding <= 0 || bottleneck_blocks < 0)
    throw DomainError("projection and light widths must be > 0");
  if ((feature_resolution() << encoder3d.size()) != voxel_resolution || feature_resolution() < 1)
    throw DomainError("voxel_resolution " + std::to_string(voxel_resolution) + " is not divisible by 2^" +
                      std::to_string(encoder3d.size()));
  if ((feature_resolution() << decoder.size()) != image_size)
    throw DomainError("decoder reaches " + std::to_string(feature_resolution() << decoder.size()) +
                      " pixels, image_size is " + std::to_string(image_size));
  if (plus) {
    positive(unet, "unet");
    if (splat_channels != decoder.back())
      throw DomainError("splat_channels must equal the last decoder width");
    if (splat_layers < 1) throw DomainError("splat_layers must be >= 1");
    if (image_size % (1 << (unet.size() - 1)) != 0) throw DomainError("image_size too small for the U-Net depth");
  }
}

namespace {

std::vector<double> to_doubles(const std::vector<int>& v) { return {v.begin(), v.end()}; }

std::vector<int> read_ints(const KeyValueDocument& doc, const std::string& key, const std::vector<int>& fallback) {
  if (!doc.has(key)) return fallback;
  std::vector<int> out;
  for (double d : doc.get_doubles(key, KeyValueDocument::kAnyCount)) {
    if (d != std::floor(d)) throw FormatError("key '" + key + "': expected integers");
    out.push_back(static_cast<int>(d));
  }
  return out;
}

}  // namespace

void NvrConfig::write(KeyValueDocument& doc) const {
  doc.set("nvr.plus", plus ? 1 : 0);
  doc.set("nvr.voxel_resolution", voxel_resolution);
  doc.set("nvr.voxel_channels", voxel_channels);
  doc.set("nvr.image_size", image_size);
  doc.set("nvr.encoder3d", to_doubles(encoder3d));
  doc.set("nvr.projection_channels", projection_channels);
  doc.set("nvr.bottleneck_blocks", bottleneck_blocks);
  doc.set("nvr.light_hidden", light_hidden);
  doc.set("nvr.light_embedding", light_embedding);
  doc.set("nvr.decoder", to_doubles(decoder));
  doc.set("nvr.splat_channels", splat_channels);
  doc.set("nvr.splat_layers", splat_layers);
  doc.set("nvr.unet", to_doubles(unet));
}

NvrConfig NvrConfig::read(const KeyValueDocument& doc) {
  NvrConfig c;
  c.plus = doc.get_or("nvr.plus", c.plus ? 1 : 0) != 0;
  c.voxel_resolution = doc.get_or("nvr.voxel_resolution", c.voxel_resolution);
  c.voxel_channels = doc.get_or("nvr.voxel_channels", c.voxel_channels);
  c.image_size = doc.get_or("nvr.image_size", c.image_size);
  c.encoder3d = read_ints(doc, "nvr.encoder3d", c.encoder3d);
  c.projection_channels = doc.get_or("nvr.projection_channels", c.projection_channels);
  c.bottleneck_blocks = doc.get_or("nvr.bottleneck_blocks", c.bottleneck_blocks);
  c.light_hidden = doc.get_or("nvr.light_hidden", c.light_hidden);
  c.light_embedding = doc.get_or("nvr.light_embedding", c.light_embedding);
  c.decoder = read_ints(doc, "nvr.decoder", c.decoder);
  c.splat_channels = doc.get_or("nvr.splat_channels", c.splat_channels);
  c.splat_layers = doc.get_or("nvr.splat_layers", c.splat_layers);
  c.unet = read_ints(doc, "nvr.unet", c.unet);
  return c;
}

void LossWeights::validate() const {
  if (!(beta >= 0.0)) throw DomainError("beta must be >= 0");
  for (double x : w)
    if (!(x >= 0.0)) throw DomainError("feature weights must be >= 0");
}

// ---------------------------------------------------------------------------
// Loss

template <class T>
FeatureExtractor<T>::FeatureExtractor(std::uint64_t seed) {
  Rng rng(seed);
  auto he = [&](Shape shape) {
    const std::size_t fan_in = ad::numel(shape) / shape.back();
    std::vector<T> v(ad::numel(shape));
    const double sd = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (auto& x : v) x = static_cast<T>(sd * rng.normal());
    return Tensor<T>::constant(std::move(shape), std::move(v));
  };
  w1_ = he({3, 3, 3, 16});
  b1_ = Tensor<T>::zeros({16});
  w2_ = he({3, 3, 16, 32});
  b2_ = Tensor<T>::zeros({32});
}

template <class T>
std::vector<Tensor<T>> FeatureExtractor<T>::features(const Tensor<T>& images) const {
  if (images.rank() != 4 || images.dim(3) != 3)
    throw DimensionError("feature extractor needs (N, H, W, 3), got " + ad::shape_string(images.shape()));
  const ad::ConvOptions same{1, 1};
  const auto v1 = ad::avg_pool2(ad::relu(ad::conv2d(images, w1_, b1_, same)));
  const auto v2 = ad::avg_pool2(ad::relu(ad::conv2d(v1, w2_, b2_, same)));
  return {v1, v2};
}

template <class T>
LossTerms<T> nvr_loss(const Tensor<T>& predicted, const Tensor<T>& target, const LossWeights& weights,
                      const FeatureExtractor<T>& extractor) {
  weights.validate();
  if (predicted.shape() != target.shape())
    throw DimensionError("loss: prediction " + ad::shape_string(predicted.shape()) + " vs target " +
                         ad::shape_string(target.shape()));
  LossTerms<T> terms;
  const auto l1 = ad::l1_loss(predicted, target);
  terms.l1 = static_cast<double>(l1.item());
  terms.total = l1;
  if (weights.beta == 0.0) return terms;
  const auto fp = extractor.features(predicted);
  const auto ft = extractor.features(target.detach());
  if (weights.w.size() > fp.size()) throw DomainError("more feature weights than feature stages");
  for (std::size_t i = 0; i < weights.w.size(); ++i) {
    if (weights.w[i] == 0.0) continue;
    const auto d = ad::l2_feature_loss(fp[i], ft[i]);
    terms.perceptual += weights.w[i] * static_cast<double>(d.item());
    terms.total = ad::add(terms.total, ad::scale(d, static_cast<T>(weights.beta * weights.w[i])));
  }
  return terms;
}

template class FeatureExtractor<float>;
template class FeatureExtractor<double>;
template LossTerms<float> nvr_loss(const Tensor<float>&, const Tensor<float>&, const LossWeights&,
                                   const FeatureExtractor<float>&);
template LossTerms<double> nvr_loss(const Tensor<double>&, const Tensor<double>&, const LossWeights&,
                                    const FeatureExtractor<double>&);

// ---------------------------------------------------------------------------
// Inputs

Vec3 camera_frame_light(const Vec3& light, const Camera& camera) {
  return {camera.right().dot(light), camera.up().dot(light), camera.forward().dot(light)};
}

std::vector<float> voxel_tensor(const VoxelGrid& camera_grid) {
  const auto& d = camera_grid.dims();
  std::vector<float> out(camera_grid.voxel_count() * 4, 0.0f);
  const auto src = camera_grid.data();
  for (int x = 0; x < d[0]; ++x)
    for (int y = 0; y < d[1]; ++y)
      for (int z = 0; z < d[2]; ++z) {
        const std::size_t s = camera_grid.geometry().index({x, y, z});
        if (!camera_grid.occupied(s)) continue;
        const std::size_t h = static_cast<std::size_t>(d[1] - 1 - y);
        const std::size_t t = ((h * d[0] + x) * d[2] + z) * 4;
        for (int c = 0; c < 3; ++c) out[t + c] = src[4 * s + c];
        out[t + 3] = 1.0f;
      }
  return out;
}

FTensor images_to_tensor(const std::vector<const Image*>& images) {
  if (images.empty()) throw DimensionError("no images");
  const Image& first = *images.front();
  std::vector<float> v;
  v.reserve(images.size() * first.data().size());
  for (const Image* im : images) {
    if (!im->same_shape(first)) throw DimensionError("images in a batch differ in shape");
    v.insert(v.end(), im->data().begin(), im->data().end());
  }
  return FTensor::constant({images.size(), static_cast<std::size_t>(first.height()),
                            static_cast<std::size_t>(first.width()), static_cast<std::size_t>(first.channels())},
                           std::move(v));
}

Image tensor_to_image(const FTensor& t, std::size_t index) {
  if (t.rank() != 4 || index >= t.dim(0)) throw DimensionError("tensor_to_image needs (N, H, W, C)");
  Image im(static_cast<int>(t.dim(2)), static_cast<int>(t.dim(1)), static_cast<int>(t.dim(3)));
  const std::size_t n = im.data().size();
  std::copy_n(t.values().begin() + static_cast<std::ptrdiff_t>(index * n), n, im.data().begin());
  return im;
}

// ---------------------------------------------------------------------------
// Model

namespace {

std::size_t sz(int v) { return static_cast<std::size_t>(v); }

}  // namespace

void NvrModel::add_conv(const std::string& name, std::vector<std::size_t> kernel_shape, bool bias, bool batchnorm) {
  const std::size_t out = kernel_shape.back();
  const std::size_t fan_in = ad::numel(kernel_shape) / out;
  // He init ahead of relu; plain 1/fan_in variance for the output heads.
  const double sd = std::sqrt((batchnorm ? 2.0 : 1.0) / static_cast<double>(fan_in));
  std::vector<float> w(ad::numel(kernel_shape));
  for (auto& x : w) x = static_cast<float>(sd * init_rng_.normal());
  store_.add(name + ".w", std::move(kernel_shape), std::move(w));
  if (bias) store_.add(name + ".b", {out}, std::vector<float>(out, 0.0f));
  if (batchnorm) {
    store_.add(name + ".gamma", {out}, std::vector<float>(out, 1.0f));
    store_.add(name + ".beta", {out}, std::vector<float>(out, 0.0f));
    store_.batchnorm_state(name + ".bn", out);
  }
}

void NvrModel::add_dense(const std::string& name, int in, int out) {
  const double sd = std::sqrt(2.0 / in);
  std::vector<float> w(sz(in) * sz(out));
  for (auto& x : w) x = static_cast<float>(sd * init_rng_.normal());
  store_.add(name + ".w", {sz(in), sz(out)}, std::move(w));
  store_.add(name + ".b", {sz(out)}, std::vector<float>(sz(out), 0.0f));
}

NvrModel::NvrModel(NvrConfig config, std::uint64_t seed) : config_(std::move(config)), init_rng_(seed) {
  config_.validate();
  const NvrConfig& c = config_;
  int ch = c.voxel_channels;
  for (std::size_t i = 0; i < c.encoder3d.size(); ++i) {
    add_conv("enc3d." + std::to_string(i), {3, 3, 3, sz(ch), sz(c.encoder3d[i])}, false, true);
    ch = c.encoder3d[i];
  }
  const int depth = c.feature_resolution();
  add_conv("proj", {1, 1, sz(depth * ch), sz(c.projection_channels)}, false, true);
  for (int i = 0; i < c.bottleneck_blocks; ++i)
    add_conv("bottleneck." + std::to_string(i), {3, 3, sz(c.projection_channels), sz(c.projection_channels)}, false,
             true);
  add_dense("light.0", 3, c.light_hidden);
  add_dense("light.1", c.light_hidden, c.light_embedding);
  ch = c.projection_channels + c.light_embedding;
  for (std::size_t i = 0; i < c.decoder.size(); ++i) {
    add_conv("dec." + std::to_string(i), {3, 3, sz(ch), sz(c.decoder[i])}, false, true);
    ch = c.decoder[i];
  }
  if (!c.plus) {
    add_conv("nvr_head", {3, 3, sz(ch), 3}, true, false);
    return;
  }
  int sch = 3;
  for (int i = 0; i < c.splat_layers; ++i) {
    add_conv("spn." + std::to_string(i), {3, 3, sz(sch), sz(c.splat_channels)}, false, true);
    sch = c.splat_channels;
  }
  const std::size_t levels = c.unet.size();
  add_conv("unet.enc0", {3, 3, sz(ch), sz(c.unet[0])}, false, true);
  for (std::size_t l = 1; l < levels; ++l) {
    add_conv("unet.down" + std::to_string(l), {3, 3, sz(c.unet[l - 1]), sz(c.unet[l])}, false, true);
    add_conv("unet.enc" + std::to_string(l), {3, 3, sz(c.unet[l]), sz(c.unet[l])}, false, true);
  }
  for (std::size_t l = levels - 1; l-- > 0;)
    add_conv("unet.dec" + std::to_string(l), {3, 3, sz(c.unet[l + 1] + c.unet[l]), sz(c.unet[l])}, false, true);
  add_conv("unet.out", {3, 3, sz(c.unet[0]), 3}, true, false);
}

FTensor NvrModel::conv(const FTensor& x, const std::string& name, int stride, int padding) {
  const FTensor& w = store_.get(name + ".w");
  const FTensor b = store_.contains(name + ".b") ? store_.get(name + ".b") : FTensor();
  const ad::ConvOptions opt{stride, padding};
  return w.rank() == 5 ? ad::conv3d(x, w, b, opt) : ad::conv2d(x, w, b, opt);
}

FTensor NvrModel::conv_block(const FTensor& x, const std::string& name, bool training, int stride, int padding) {
  const FTensor y = conv(x, name, stride, padding);
  ad::BatchNormOptions opt;
  opt.training = training;
  auto& state = store_.batchnorm_state(name + ".bn", y.shape().back());
  return ad::relu(ad::batchnorm(y, store_.get(name + ".gamma"), store_.get(name + ".beta"), state, opt));
}

FTensor NvrModel::nvr_features(const NvrInputs& in, bool training) {
  const NvrConfig& c = config_;
  const std::size_t r = sz(c.voxel_resolution);
  const Shape vshape{in.voxels.defined() ? in.voxels.dim(0) : 0, r, r, r, sz(c.voxel_channels)};
  if (!in.voxels.defined() || in.voxels.shape() != vshape)
    throw DimensionError("voxel input must be " + ad::shape_string(vshape) +
                         (in.voxels.defined() ? ", got " + ad::shape_string(in.voxels.shape()) : ""));
  const std::size_t n = vshape[0];
  if (!in.light.defined() || in.light.shape() != Shape{n, 3})
    throw DimensionError("light input must be (N, 3) with the voxel batch size");

  FTensor x = in.voxels;
  for (std::size_t i = 0; i < c.encoder3d.size(); ++i) x = conv_block(x, "enc3d." + std::to_string(i), training, 2, 1);
  x = conv_block(ad::reshape_projection(x), "proj", training, 1, 0);
  for (int i = 0; i < c.bottleneck_blocks; ++i) x = conv_block(x, "bottleneck." + std::to_string(i), training);

  FTensor l = ad::relu(ad::dense(in.light, store_.get("light.0.w"), store_.get("light.0.b")));
  l = ad::relu(ad::dense(l, store_.get("light.1.w"), store_.get("light.1.b")));
  const std::size_t f = sz(c.feature_resolution());
  x = ad::concat<float>({x, ad::tile(l, f, f)});

  for (std::size_t i = 0; i < c.decoder.size(); ++i)
    x = conv_block(ad::upsample_nearest(x, 2), "dec." + std::to_string(i), training);
  return x;
}

FTensor NvrModel::forward(const NvrInputs& in, bool training) {
  const NvrConfig& c = config_;
  FTensor features = nvr_features(in, training);
  if (!c.plus) return ad::sigmoid(conv(features, "nvr_head", 1, 1));

  const std::size_t n = features.dim(0), s = sz(c.image_size);
  if (!in.splat.defined() || in.splat.shape() != Shape{n, s, s, 3})
    throw DimensionError("splat input must be " + ad::shape_string({n, s, s, 3}) +
                         (in.splat.defined() ? ", got " + ad::shape_string(in.splat.shape()) : ""));
  if (!zero_splat_features) {
    FTensor sp = in.splat;
    for (int i = 0; i < c.splat_layers; ++i) sp = conv_block(sp, "spn." + std::to_string(i), training);
    features = ad::add(features, sp);
  }

  const std::size_t levels = c.unet.size();
  std::vector<FTensor> skips;
  FTensor x = conv_block(features, "unet.enc0", training);
  skips.push_back(x);
  for (std::size_t l = 1; l < levels; ++l) {
    x = conv_block(x, "unet.down" + std::to_string(l), training, 2, 1);
    x = conv_block(x, "unet.enc" + std::to_string(l), training);
    skips.push_back(x);
  }
  for (std::size_t l = levels - 1; l-- > 0;)
    x = conv_block(ad::concat<float>({ad::upsample_nearest(x, 2), skips[l]}), "unet.dec" + std::to_string(l),
                   training);
  return ad::sigmoid(conv(x, "unet.out", 1, 1));
}

void NvrModel::set_output_bias(const Color& mean) {
  auto b = store_.get(config_.plus ? "unet.out.b" : "nvr_head.b").mutable_values();
  for (std::size_t c = 0; c < 3; ++c) {
    const double m = std::clamp(static_cast<double>(mean[static_cast<int>(c)]), 0.01, 0.99);
    b[c] = static_cast<float>(std::log(m / (1.0 - m)));
  }
}

void NvrModel::save(const std::filesystem::path& path, const std::string& metadata) const {
  KeyValueDocument doc;
  config_.write(doc);
  ad::save_checkpoint(path, store_, doc.serialize() + metadata);
}

NvrModel NvrModel::load(const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = io::read_file(path);
  io::ByteReader r(bytes);
  if (r.text(4) != "VXCK") throw FormatError(path.string() + ": not a checkpoint");
  r.u32();
  const auto doc = KeyValueDocument::parse(r.text(r.u32()));
  NvrModel model(NvrConfig::read(doc), 0);
  ad::load_checkpoint(path, model.store_);
  return model;
}

}  // namespace voxelcast

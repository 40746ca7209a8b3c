#include "voxelcast/autodiff/optim.hpp"

#include <cmath>

#include "voxelcast/io.hpp"

namespace voxelcast::ad {

Tensor<float>& ParameterStore::add(const std::string& name, Shape shape, std::vector<float> values) {
  if (contains(name)) throw DomainError("duplicate parameter name: " + name);
  Entry e;
  e.name = name;
  e.tensor = Tensor<float>::leaf(std::move(shape), std::move(values));
  e.m.assign(e.tensor.size(), 0.0f);
  e.v.assign(e.tensor.size(), 0.0f);
  index_[name] = entries_.size();
  entries_.push_back(std::move(e));
  return entries_.back().tensor;
}

Tensor<float>& ParameterStore::get(const std::string& name) {
  const auto it = index_.find(name);
  if (it == index_.end()) throw DomainError("unknown parameter: " + name);
  return entries_[it->second].tensor;
}

const Tensor<float>& ParameterStore::get(const std::string& name) const {
  const auto it = index_.find(name);
  if (it == index_.end()) throw DomainError("unknown parameter: " + name);
  return entries_[it->second].tensor;
}

BatchNormState<float>& ParameterStore::batchnorm_state(const std::string& name, std::size_t channels) {
  auto it = bn_.find(name);
  if (it == bn_.end()) it = bn_.emplace(name, BatchNormState<float>(channels)).first;
  if (it->second.mean.size() != channels) throw DimensionError("batchnorm state size mismatch for " + name);
  return it->second;
}

std::size_t ParameterStore::parameter_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.tensor.size();
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& e : entries_) e.tensor.zero_grad();
}

void adam_step(ParameterStore& store, const AdamOptions& opt) {
  store.step += 1;
  const double t = static_cast<double>(store.step);
  const double c1 = 1.0 - std::pow(opt.beta1, t);
  const double c2 = 1.0 - std::pow(opt.beta2, t);
  for (auto& e : store.entries()) {
    const auto g = e.tensor.grad();
    auto w = e.tensor.mutable_values();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = g.empty() ? 0.0 : g[i];
      const double m = opt.beta1 * e.m[i] + (1.0 - opt.beta1) * gi;
      const double v = opt.beta2 * e.v[i] + (1.0 - opt.beta2) * gi * gi;
      e.m[i] = static_cast<float>(m);
      e.v[i] = static_cast<float>(v);
      w[i] = static_cast<float>(w[i] - opt.lr * (m / c1) / (std::sqrt(v / c2) + opt.eps));
    }
    e.tensor.zero_grad();
  }
}

namespace {

constexpr char kMagic[] = "VXCK";

void write_record(io::ByteWriter& w, std::uint32_t kind, const std::string& name, const Shape& shape,
                  std::span<const float> data) {
  w.u32(kind);
  w.u32(static_cast<std::uint32_t>(name.size()));
  w.text(name);
  w.u32(static_cast<std::uint32_t>(shape.size()));
  for (std::size_t d : shape) w.u32(static_cast<std::uint32_t>(d));
  w.f32_array(data);
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ParameterStore& store, const std::string& metadata) {
  io::ByteWriter w;
  w.text(kMagic);
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(metadata.size()));
  w.text(metadata);
  w.u32(static_cast<std::uint32_t>(store.entries().size() + 2 * store.batchnorm_states().size()));
  for (const auto& e : store.entries()) write_record(w, 0, e.name, e.tensor.shape(), e.tensor.values());
  for (const auto& [name, s] : store.batchnorm_states()) {
    write_record(w, 1, name + ".mean", {s.mean.size()}, s.mean);
    write_record(w, 1, name + ".var", {s.var.size()}, s.var);
  }
  io::write_file_atomic(path, w.data());
}

std::string load_checkpoint(const std::filesystem::path& path, ParameterStore& store) {
  const std::vector<std::uint8_t> bytes = io::read_file(path);
  io::ByteReader r(bytes);
  if (r.text(4) != kMagic) throw FormatError(path.string() + ": not a checkpoint");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    throw FormatError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  const std::string metadata = r.text(r.u32());
  const std::uint32_t count = r.u32();
  std::map<std::string, std::vector<float>*> buffers;
  for (auto& [name, s] : store.batchnorm_states()) {
    buffers[name + ".mean"] = &s.mean;
    buffers[name + ".var"] = &s.var;
  }
  std::size_t params_seen = 0;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t kind = r.u32();
    const std::string name = r.text(r.u32());
    Shape shape(r.u32());
    for (auto& d : shape) d = r.u32();
    if (kind == 0) {
      if (!store.contains(name)) throw FormatError(path.string() + ": unexpected parameter " + name);
      Tensor<float>& t = store.get(name);
      if (t.shape() != shape)
        throw FormatError(path.string() + ": shape mismatch for " + name + ": file " + shape_string(shape) +
                          ", model " + shape_string(t.shape()));
      r.f32_array(t.mutable_values());
      ++params_seen;
    } else if (kind == 1) {
      const auto it = buffers.find(name);
      if (it == buffers.end() || it->second->size() != numel(shape))
        throw FormatError(path.string() + ": unexpected buffer " + name);
      r.f32_array(*it->second);
    } else {
      throw FormatError(path.string() + ": bad record kind");
    }
  }
  if (params_seen != store.entries().size()) throw FormatError(path.string() + ": missing parameters");
  return metadata;
}

}  // namespace voxelcast::ad

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "voxelcast/autodiff/ops.hpp"

namespace voxelcast::ad {

/// Trainable parameters by name, their Adam moments, and non-trainable
/// buffers (batchnorm running statistics).
class ParameterStore {
 public:
  struct Entry {
    std::string name;
    Tensor<float> tensor;
    std::vector<float> m;
    std::vector<float> v;
  };

  /// Registers a leaf parameter. Names must be unique.
  Tensor<float>& add(const std::string& name, Shape shape, std::vector<float> values);
  Tensor<float>& get(const std::string& name);
  const Tensor<float>& get(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  /// Running statistics owned by the store, created on first use.
  BatchNormState<float>& batchnorm_state(const std::string& name, std::size_t channels);

  std::vector<Entry>& entries() { return entries_; }
  const std::vector<Entry>& entries() const { return entries_; }
  std::map<std::string, BatchNormState<float>>& batchnorm_states() { return bn_; }
  const std::map<std::string, BatchNormState<float>>& batchnorm_states() const { return bn_; }
  std::size_t parameter_count() const;

  std::uint64_t step = 0;

  void zero_grad();

 private:
  std::vector<Entry> entries_;
  std::map<std::string, std::size_t> index_;
  std::map<std::string, BatchNormState<float>> bn_;
};

struct AdamOptions {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One bias-corrected Adam update over every parameter. A parameter with no
/// gradient is treated as having a zero gradient. Gradients are cleared.
void adam_step(ParameterStore& store, const AdamOptions& opt);

/// Checkpoint file: "VXCK", u32 version, u32 metadata length, metadata text,
/// u32 record count, then per record: u32 kind (0 parameter, 1 buffer),
/// u32 name length, name, u32 rank, u32 dims..., float32 data.
/// Batchnorm statistics are stored as buffers "<name>.mean" and "<name>.var".
constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const ParameterStore& store,
                     const std::string& metadata = {});

/// Loads values into an already constructed store (same names and shapes).
/// Returns the metadata text. Missing or mismatched records signal FormatError.
std::string load_checkpoint(const std::filesystem::path& path, ParameterStore& store);

}  // namespace voxelcast::ad

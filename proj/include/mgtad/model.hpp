#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "json.hpp"
#include "mgtad/encoder.hpp"
#include "mgtad/head.hpp"

namespace mgtad {

struct ModelConfig {
  std::size_t in_channels = 16;
  DynEConfig encoder;
  std::size_t num_classes = 5;
  std::size_t mlp_ratio = 4;
  int spatial_kernel = 7;
  bool attention = true;

  HeadConfig head_config() const;
  void validate() const;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

struct ModelCache {
  Encoder::Cache encoder;
  Head::Cache head;
};

/// Encoder + detection head with a flat, name-ordered parameter list.
class Model {
 public:
  explicit Model(const ModelConfig& cfg);
  Model(const Model& other);
  Model& operator=(const Model& other);

  void init(std::uint64_t seed);

  HeadOutputs forward(const Grid& features, ModelCache* cache = nullptr) const;
  /// Accumulates parameter gradients; returns d loss / d features.
  Grid backward(const ModelCache& cache, const std::vector<Grid>& dprobs,
                const std::vector<Grid>& doffsets);

  const NamedParams& parameters() const { return params_; }
  void zero_grad();
  std::size_t parameter_count() const;

  const ModelConfig& config() const { return cfg_; }
  void set_attention(bool on);

  Encoder encoder;
  Head head;

 private:
  void rebuild_param_list();

  ModelConfig cfg_;
  NamedParams params_;
};

inline constexpr char kModelMagic[4] = {'M', 'G', 'P', 'M'};
inline constexpr std::uint32_t kModelVersion = 1;

/// Model file: "MGPM", u32 version, u32 length + config JSON, u32 count, then
/// per parameter u32 name length, name, u32 rank, u32 dims, float64 values.
/// All integers and floats little-endian. `extra` is echoed under "train".
void save_model(const Model& model, const std::filesystem::path& path,
                const nlohmann::json& extra = nlohmann::json::object());
Model load_model(const std::filesystem::path& path);

}  // namespace mgtad

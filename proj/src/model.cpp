#include "mgtad/model.hpp"

#include <fstream>
#include <iterator>
#include <random>
#include <stdexcept>

#include "binary_io.hpp"

namespace mgtad {

namespace detail {

std::vector<unsigned char> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::string& path, const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for " + path);
}

}  // namespace detail

HeadConfig ModelConfig::head_config() const {
  HeadConfig h;
  h.channels = encoder.channels;
  h.num_classes = num_classes;
  h.mlp_ratio = mlp_ratio;
  h.spatial_kernel = spatial_kernel;
  h.attention = attention;
  return h;
}

void ModelConfig::validate() const {
  if (in_channels == 0) throw std::invalid_argument("ModelConfig: in_channels must be > 0");
  encoder.validate();
  head_config().validate();
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"in_channels", c.in_channels},
                     {"channels", c.encoder.channels},
                     {"kernel_set", c.encoder.kernel_set},
                     {"window_expansion", c.encoder.window_expansion},
                     {"num_levels", c.encoder.num_levels},
                     {"num_classes", c.num_classes},
                     {"mlp_ratio", c.mlp_ratio},
                     {"spatial_kernel", c.spatial_kernel},
                     {"attention", c.attention}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  c.in_channels = j.value("in_channels", c.in_channels);
  c.encoder.channels = j.value("channels", c.encoder.channels);
  c.encoder.kernel_set = j.value("kernel_set", c.encoder.kernel_set);
  c.encoder.window_expansion = j.value("window_expansion", c.encoder.window_expansion);
  c.encoder.num_levels = j.value("num_levels", c.encoder.num_levels);
  c.num_classes = j.value("num_classes", c.num_classes);
  c.mlp_ratio = j.value("mlp_ratio", c.mlp_ratio);
  c.spatial_kernel = j.value("spatial_kernel", c.spatial_kernel);
  c.attention = j.value("attention", c.attention);
}

Model::Model(const ModelConfig& cfg)
    : encoder(cfg.in_channels, cfg.encoder), head(cfg.head_config()), cfg_(cfg) {
  cfg.validate();
  rebuild_param_list();
}

Model::Model(const Model& other)
    : encoder(other.encoder), head(other.head), cfg_(other.cfg_) {
  rebuild_param_list();
}

Model& Model::operator=(const Model& other) {
  if (this != &other) {
    encoder = other.encoder;
    head = other.head;
    cfg_ = other.cfg_;
    rebuild_param_list();
  }
  return *this;
}

void Model::rebuild_param_list() {
  params_.clear();
  encoder.collect("encoder", params_);
  head.collect("head", params_);
}

void Model::init(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  encoder.init(rng);
  head.init(rng);
  zero_grad();
}

HeadOutputs Model::forward(const Grid& features, ModelCache* cache) const {
  const PyramidFeatures pyramid = encoder.forward(features, cache ? &cache->encoder : nullptr);
  return head.forward(pyramid, cache ? &cache->head : nullptr);
}

Grid Model::backward(const ModelCache& cache, const std::vector<Grid>& dprobs,
                     const std::vector<Grid>& doffsets) {
  const std::vector<Grid> dlevels = head.backward(cache.head, dprobs, doffsets);
  return encoder.backward(cache.encoder, dlevels);
}

void Model::zero_grad() {
  for (auto& [name, p] : params_) p->zero_grad();
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, p] : params_) n += p->value.size();
  return n;
}

void Model::set_attention(bool on) {
  cfg_.attention = on;
  head.set_attention(on);
}

void save_model(const Model& model, const std::filesystem::path& path,
                const nlohmann::json& extra) {
  std::vector<unsigned char> out(std::begin(kModelMagic), std::end(kModelMagic));
  detail::put_le<std::uint32_t>(out, kModelVersion);
  nlohmann::json echo{{"model", model.config()}};
  if (!extra.empty()) echo["train"] = extra;
  const std::string cfg = echo.dump();
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(cfg.size()));
  out.insert(out.end(), cfg.begin(), cfg.end());
  const auto& params = model.parameters();
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& [name, p] : params) {
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    const auto& shape = p->value.shape();
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(shape.size()));
    for (std::size_t d : shape) detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    for (double v : p->value.values()) detail::put_le<double>(out, v);
  }
  detail::write_file_bytes(path.string(), out);
}

Model load_model(const std::filesystem::path& path) {
  const auto bytes = detail::read_file_bytes(path.string());
  detail::ByteReader in(bytes, "model file " + path.string());
  const std::string magic = in.get_string(4, "magic");
  if (magic != std::string(kModelMagic, 4)) {
    throw FormatError(in.what() + ": bad magic at byte offset 0 (expected MGPM)", 0);
  }
  const auto version = in.get<std::uint32_t>("version");
  if (version != kModelVersion) {
    throw FormatError(in.what() + ": unsupported version " + std::to_string(version) +
                          " at byte offset 4",
                      4);
  }
  const auto cfg_len = in.get<std::uint32_t>("config length");
  const std::size_t cfg_at = in.position();
  nlohmann::json echo;
  try {
    echo = nlohmann::json::parse(in.get_string(cfg_len, "config"));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(in.what() + ": invalid config JSON at byte offset " +
                          std::to_string(cfg_at) + ": " + e.what(),
                      cfg_at);
  }
  Model model(echo.at("model").get<ModelConfig>());
  const auto count = in.get<std::uint32_t>("parameter count");
  const auto& params = model.parameters();
  if (count != params.size()) {
    throw FormatError(in.what() + ": parameter count " + std::to_string(count) +
                          " does not match the configured model (" +
                          std::to_string(params.size()) + ")",
                      in.position());
  }
  for (const auto& [name, p] : params) {
    const std::size_t at = in.position();
    const auto name_len = in.get<std::uint32_t>("parameter name length");
    const std::string got = in.get_string(name_len, "parameter name");
    if (got != name) {
      throw FormatError(in.what() + ": expected parameter '" + name + "' at byte offset " +
                            std::to_string(at) + ", found '" + got + "'",
                        at);
    }
    const auto rank = in.get<std::uint32_t>("rank");
    std::vector<std::size_t> shape;
    for (std::uint32_t d = 0; d < rank; ++d) shape.push_back(in.get<std::uint32_t>("dim"));
    if (shape != p->value.shape()) {
      throw FormatError(in.what() + ": parameter '" + name + "' has unexpected shape", at);
    }
    for (double& v : p->value.values()) v = in.get<double>("parameter value");
  }
  if (in.remaining() != 0) {
    throw FormatError(in.what() + ": trailing bytes at offset " + std::to_string(in.position()),
                      in.position());
  }
  model.zero_grad();
  return model;
}

}  // namespace mgtad

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <json.hpp>

#include "motionguide/dataset.hpp"
#include "motionguide/models.hpp"

namespace mg {

/// A trained autoencoder and classifier with everything needed to apply them
/// to raw motion: the schema and the normalization statistics.
struct ModelBundle {
  MotionSchema schema;
  Normalizer normalizer;
  Autoencoder autoencoder;
  Classifier classifier;
  /// Seeds, hyperparameters, fold id and training diagnostics.
  nlohmann::json manifest = nlohmann::json::object();
};

inline constexpr char kBundleMagic[8] = {'M', 'G', 'B', 'U', 'N', 'D', 'L', 'E'};
inline constexpr std::uint32_t kBundleVersion = 1;

/// Byte layout (all integers and floats little-endian):
///
///   magic      8 bytes  "MGBUNDLE"
///   version    u32
///   header     u32 length + UTF-8 JSON {schema, architecture, manifest}
///   normalizer u32 channel count D, D x f64 mean, D x f64 scale
///   tensors    u32 count, then per tensor:
///                u32 name length, name bytes ("classifier/conv1.weight", ...),
///                u32 rank, rank x u64 dims, prod(dims) x f64 values
///   checksum   u64 FNV-1a over every preceding byte
std::vector<std::uint8_t> serialize_bundle(const ModelBundle& bundle);
ModelBundle deserialize_bundle(std::span<const std::uint8_t> bytes);

void save_bundle(const ModelBundle& bundle, const std::filesystem::path& path);
ModelBundle load_bundle(const std::filesystem::path& path);

nlohmann::json layers_to_json(const std::vector<nd::LayerSpec>& layers);
std::vector<nd::LayerSpec> layers_from_json(const nlohmann::json& j);

}  // namespace mg

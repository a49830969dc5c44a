#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "mop/matrix.hpp"
#include "mop/pooling.hpp"

namespace mop {

// 64-bit FNV-1a over raw bytes; fingerprints are its lowercase hex form.
std::uint64_t fnv1a64(std::string_view bytes);
std::uint64_t fnv1a64(const void* data, std::size_t n, std::uint64_t h = 14695981039346656037ULL);
std::string fingerprint_hex(std::uint64_t h);

// Generic "MOPM" container: named sections of three kinds (UTF-8 JSON text,
// f64 matrix, f64 vector), written in sorted name order with an FNV-1a
// fingerprint section covering all the others. Loading verifies the
// fingerprint and rejects unknown section kinds.
struct ModelFile {
  std::map<std::string, std::string> json_sections;
  std::map<std::string, Matrix> matrix_sections;
  std::map<std::string, std::vector<double>> vector_sections;
  std::string fingerprint;  // filled by write/read
};

void write_model_file(const std::string& path, ModelFile& file);
ModelFile read_model_file(const std::string& path);

// Pipeline model persistence on top of the container. Writing computes the
// content fingerprint and stores it into `model.fingerprint` as well.
void save_pipeline_model(const std::string& path, MopPipelineModel& model);
MopPipelineModel load_pipeline_model(const std::string& path);

// Encoded image features: one MOP descriptor per row (f32, "MOPD" format)
// plus a JSON sidecar carrying image ids, the block layout, and the
// fingerprint of the model that produced them.
struct FeatureSet {
  std::vector<std::string> image_ids;
  std::vector<BlockInfo> layout;
  std::string model_fingerprint;
  Matrix features;  // one row per image id
};

void save_feature_set(const std::string& matrix_path, const std::string& sidecar_path,
                      const FeatureSet& set);
FeatureSet load_feature_set(const std::string& matrix_path, const std::string& sidecar_path);

}  // namespace mop

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mop/descriptors.hpp"
#include "mop/encoding.hpp"
#include "mop/patchgrid.hpp"

namespace mop {

enum class PoolingMethod { Average, Max, Vlad };

enum class ScaleMode { MultiScale, Concatenation };

// Which levels participate and whether they are pooled jointly (one shared
// codebook over the union of patches) or separately per level.
struct ScaleStrategy {
  ScaleMode mode = ScaleMode::Concatenation;
  std::vector<Level> levels = {Level::L1, Level::L2, Level::L3};

  void validate() const;
  // Levels in ascending order; this is the processing order everywhere.
  std::vector<Level> sorted_levels() const;
  bool operator==(const ScaleStrategy&) const = default;
};

const char* pooling_method_name(PoolingMethod m);
PoolingMethod pooling_method_from_name(const std::string& name);
const char* scale_mode_name(ScaleMode m);
ScaleMode scale_mode_from_name(const std::string& name);

struct BlockInfo {
  std::string block;  // "level1", "level2", "level3", or "multiscale"
  std::size_t offset = 0;
  std::size_t length = 0;

  bool operator==(const BlockInfo&) const = default;
};

// Final image representation: unit-normalized blocks (zero blocks stay
// zero), concatenated with a recorded layout.
struct MopDescriptor {
  std::vector<double> values;
  std::vector<BlockInfo> layout;
};

// Fitted pieces of one level's VLAD path. Level 1 carries no models: its
// block is the raw global activation.
struct LevelModels {
  std::optional<PcaModel> patch_pca;
  std::optional<Codebook> codebook;
  std::optional<PcaModel> pooled_pca;
};

struct MopPipelineModel {
  GridConfig grid;
  VladConfig vlad;
  PoolingMethod method = PoolingMethod::Vlad;
  ScaleStrategy strategy;
  std::map<Level, LevelModels> per_level;  // concatenation path, levels >= 2
  std::optional<LevelModels> joint;        // multi-scale path
  std::uint64_t seed = 0;
  std::string fingerprint;  // config hash, set when persisted by the CLI
};

struct FitConfig {
  GridConfig grid;
  VladConfig vlad;
  PoolingMethod method = PoolingMethod::Vlad;
  ScaleStrategy strategy;
  std::size_t patch_pca_dim = 500;
  std::size_t pooled_pca_dim = 4096;
  std::size_t kmeans_k = 100;
  std::size_t kmeans_max_iters = 100;
  double kmeans_tol = 1e-6;
  std::uint64_t seed = 0;
};

struct FitReport {
  std::map<std::string, std::size_t> effective_dims;     // stage -> dim after clamping
  std::map<std::string, std::size_t> kmeans_iterations;  // stage -> Lloyd iterations
  std::map<std::string, std::uint64_t> kmeans_seeds;     // stage -> derived stream seed
};

// Descriptors of one level's patches for a collection of images, outer index
// image, inner index patch (grid order).
using PerImageDescriptors = std::vector<std::vector<Descriptor>>;

// Pools one level's descriptors. Average/Max ignore `models`; Vlad runs
// patch PCA -> vlad_encode -> power/L2 normalization -> pooled PCA and
// requires all three fitted pieces.
std::vector<double> pool_level(PoolingMethod method, const std::vector<Descriptor>& descriptors,
                               const LevelModels* models, const VladConfig& vlad);

// Fits patch PCA, codebooks, and pooled PCA from per-level training
// descriptors. Deterministic given the config seed; requested dims are
// clamped to the available rank and reported via `report`.
MopPipelineModel fit_pipeline(const std::map<Level, PerImageDescriptors>& training,
                              const FitConfig& cfg, FitReport* report = nullptr);

// Assembles a MOP descriptor from already-extracted per-level descriptor
// lists (patch order = grid order).
MopDescriptor assemble_mop(const MopPipelineModel& model, const ScaleStrategy& strategy,
                           PoolingMethod method,
                           const std::map<Level, std::vector<Descriptor>>& per_level);

// Extracts the grid descriptors for each selected level from `source` and
// assembles the MOP descriptor.
MopDescriptor encode_image(const MopPipelineModel& model, const ScaleStrategy& strategy,
                           PoolingMethod method, const DescriptorSource& source,
                           const ImageRef& image);

// Grid descriptors of one level, patch order, parallel across patches.
std::vector<Descriptor> level_descriptors(const GridConfig& grid_cfg, Level level,
                                          const DescriptorSource& source, const ImageRef& image);

}  // namespace mop

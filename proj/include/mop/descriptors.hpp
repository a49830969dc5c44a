#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <tuple>
#include <vector>

#include "mop/image.hpp"
#include "mop/patchgrid.hpp"

namespace mop {

// Fixed-length real vector standing in for one patch's activation.
using Descriptor = std::vector<double>;

// How call sites hand an image to a descriptor source: pixel sources use
// `pixels`, store-backed sources use `id`.
struct ImageRef {
  std::string id;
  const ImageTensor* pixels = nullptr;
};

// Backend mapping (image, patch geometry) -> descriptor, with a fixed
// dimension for the lifetime of the source. Implementations are immutable
// after construction and safe to call concurrently.
class DescriptorSource {
 public:
  virtual ~DescriptorSource() = default;
  virtual std::size_t dim() const = 0;
  virtual Descriptor descriptor_for(const ImageRef& image, const PatchSpec& patch) const = 0;
};

struct ToyEmbedderConfig {
  int thumb_side = 16;
  std::size_t out_dim = 64;
  std::uint64_t projection_seed = 0;

  bool operator==(const ToyEmbedderConfig&) const = default;
};

// Deterministic pixel-level embedder: thumbnail, grayscale in [0,1], scalar
// mean subtraction, seeded Rademacher (+/-1) projection, ReLU. Identical
// (config, pixels) always give bitwise identical descriptors, which lets the
// whole pipeline run without any network.
class ToyEmbedder : public DescriptorSource {
 public:
  explicit ToyEmbedder(const ToyEmbedderConfig& cfg);

  std::size_t dim() const override { return cfg_.out_dim; }
  Descriptor descriptor_for(const ImageRef& image, const PatchSpec& patch) const override;

  // Embeds a full image (no patch geometry), used on already-cropped pixels.
  Descriptor embed(const ImageTensor& patch) const;

  const ToyEmbedderConfig& config() const { return cfg_; }

 private:
  ToyEmbedderConfig cfg_;
  std::vector<double> projection_;  // out_dim x thumb^2, row-major storage
};

// Convenience wrapper matching the standalone operation shape.
Descriptor embed_toy(const ToyEmbedderConfig& cfg, const ImageTensor& patch);

struct ManifestEntry {
  std::string image_id;
  Level level = Level::L1;
  int x = 0;
  int y = 0;
  int side = 0;
  std::size_t row = 0;
};

// Precomputed activations plus the manifest mapping (image, patch) keys to
// matrix rows. Rows are stored as f32 exactly as they sit in the file, so
// save/load round-trips are bit-exact. Immutable after construction.
class ActivationStore : public DescriptorSource {
 public:
  ActivationStore(std::size_t dim, std::vector<float> rows, std::vector<ManifestEntry> manifest);

  std::size_t dim() const override { return dim_; }
  std::size_t count() const { return count_; }
  const std::vector<ManifestEntry>& manifest() const { return manifest_; }
  const std::vector<float>& rows() const { return rows_; }

  // Stored row for the key, widened to double. Missing keys raise
  // NotFoundError naming the full tuple.
  Descriptor lookup(const std::string& image_id, const PatchSpec& spec) const;

  Descriptor descriptor_for(const ImageRef& image, const PatchSpec& patch) const override {
    return lookup(image.id, patch);
  }

  // Distinct image ids in order of first appearance in the manifest.
  std::vector<std::string> image_ids() const;

  // Binary matrix ("MOPD") + JSON manifest, as documented in README.md.
  void save(const std::string& matrix_path, const std::string& manifest_path) const;
  static ActivationStore load(const std::string& matrix_path, const std::string& manifest_path);

 private:
  using Key = std::tuple<std::string, int, int, int, int>;
  static Key make_key(const std::string& image_id, const PatchSpec& spec);

  std::size_t dim_ = 0;
  std::size_t count_ = 0;
  std::vector<float> rows_;
  std::vector<ManifestEntry> manifest_;
  std::map<Key, std::size_t> index_;
};

// Raw MOPD matrix I/O, shared by activation stores and encoded-feature files:
// magic "MOPD", u32 version=1, u32 count, u32 dim, count*dim f32 LE row-major.
void write_mopd(const std::string& path, std::size_t count, std::size_t dim,
                const std::vector<float>& values);
void read_mopd(const std::string& path, std::size_t& count, std::size_t& dim,
               std::vector<float>& values);

}  // namespace mop

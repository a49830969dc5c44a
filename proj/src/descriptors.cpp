#include "mop/descriptors.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "mop/binary_io.hpp"
#include "mop/errors.hpp"
#include "mop/rng.hpp"

namespace mop {

ToyEmbedder::ToyEmbedder(const ToyEmbedderConfig& cfg) : cfg_(cfg) {
  if (cfg.out_dim < 1) throw std::invalid_argument("ToyEmbedder: out_dim must be >= 1");
  if (cfg.thumb_side < 1) throw std::invalid_argument("ToyEmbedder: thumb_side must be >= 1");
  const std::size_t t = static_cast<std::size_t>(cfg.thumb_side) * cfg.thumb_side;
  projection_.resize(cfg.out_dim * t);
  // Column-major fill: entry (i, j) consumes draw j*out_dim + i of the
  // splitmix64 stream; the sign is the stream value's top bit.
  SplitMix64 rng(cfg.projection_seed);
  for (std::size_t j = 0; j < t; ++j)
    for (std::size_t i = 0; i < cfg.out_dim; ++i)
      projection_[i * t + j] = (rng.next() >> 63) ? 1.0 : -1.0;
}

Descriptor ToyEmbedder::embed(const ImageTensor& patch) const {
  ImageTensor thumb = resize_bilinear(patch, cfg_.thumb_side, cfg_.thumb_side);
  const std::size_t t = static_cast<std::size_t>(cfg_.thumb_side) * cfg_.thumb_side;

  // Grayscale in [0,1] via exact integer luma numerators (299 R + 587 G +
  // 114 B, over 255000). Keeping the sums integral until one final division
  // makes the mean cancel bitwise on constant patches.
  std::vector<std::int64_t> luma(t);
  std::size_t i = 0;
  for (int y = 0; y < thumb.height; ++y) {
    for (int x = 0; x < thumb.width; ++x, ++i) {
      if (thumb.channels == 3)
        luma[i] = 299LL * thumb.at(x, y, 0) + 587LL * thumb.at(x, y, 1) +
                  114LL * thumb.at(x, y, 2);
      else
        luma[i] = 1000LL * thumb.at(x, y, 0);
    }
  }
  std::int64_t total = 0;
  for (std::int64_t g : luma) total += g;
  const double denom = 255000.0;
  double mean = static_cast<double>(total) / (denom * static_cast<double>(t));
  std::vector<double> gray(t);
  for (std::size_t j = 0; j < t; ++j) gray[j] = static_cast<double>(luma[j]) / denom - mean;

  Descriptor out(cfg_.out_dim, 0.0);
  for (std::size_t r = 0; r < cfg_.out_dim; ++r) {
    const double* row = projection_.data() + r * t;
    double acc = 0.0;
    for (std::size_t c = 0; c < t; ++c) acc += row[c] * gray[c];
    out[r] = acc > 0.0 ? acc : 0.0;
  }
  return out;
}

Descriptor ToyEmbedder::descriptor_for(const ImageRef& image, const PatchSpec& patch) const {
  if (image.pixels == nullptr)
    throw std::invalid_argument("ToyEmbedder: image '" + image.id + "' has no pixel data");
  ImageTensor window = crop(*image.pixels, patch.x, patch.y, patch.side, patch.side);
  return embed(window);
}

Descriptor embed_toy(const ToyEmbedderConfig& cfg, const ImageTensor& patch) {
  return ToyEmbedder(cfg).embed(patch);
}

ActivationStore::Key ActivationStore::make_key(const std::string& image_id, const PatchSpec& spec) {
  return {image_id, level_number(spec.level), spec.x, spec.y, spec.side};
}

ActivationStore::ActivationStore(std::size_t dim, std::vector<float> rows,
                                 std::vector<ManifestEntry> manifest)
    : dim_(dim), rows_(std::move(rows)), manifest_(std::move(manifest)) {
  if (dim_ < 1) throw std::invalid_argument("ActivationStore: dim must be >= 1");
  if (rows_.size() % dim_ != 0)
    throw std::invalid_argument("ActivationStore: row data size not a multiple of dim");
  count_ = rows_.size() / dim_;
  for (const ManifestEntry& e : manifest_) {
    if (e.row >= count_)
      throw std::invalid_argument("ActivationStore: manifest row " + std::to_string(e.row) +
                                  " out of range (count=" + std::to_string(count_) + ")");
    PatchSpec spec{e.level, e.x, e.y, e.side};
    auto [it, inserted] = index_.emplace(make_key(e.image_id, spec), e.row);
    if (!inserted)
      throw std::invalid_argument("ActivationStore: duplicate manifest key for image '" +
                                  e.image_id + "'");
  }
}

Descriptor ActivationStore::lookup(const std::string& image_id, const PatchSpec& spec) const {
  auto it = index_.find(make_key(image_id, spec));
  if (it == index_.end()) {
    std::ostringstream msg;
    msg << "activation not found: (image_id=" << image_id
        << ", level=" << level_number(spec.level) << ", x=" << spec.x << ", y=" << spec.y
        << ", side=" << spec.side << ")";
    throw NotFoundError(msg.str());
  }
  const float* row = rows_.data() + it->second * dim_;
  return Descriptor(row, row + dim_);
}

std::vector<std::string> ActivationStore::image_ids() const {
  std::vector<std::string> ids;
  std::set<std::string> seen;
  for (const ManifestEntry& e : manifest_)
    if (seen.insert(e.image_id).second) ids.push_back(e.image_id);
  return ids;
}

void write_mopd(const std::string& path, std::size_t count, std::size_t dim,
                const std::vector<float>& values) {
  if (values.size() != count * dim)
    throw std::invalid_argument("write_mopd: value count does not match count*dim");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::invalid_argument("write_mopd: cannot open " + path);
  out.write("MOPD", 4);
  write_u32(out, 1);
  write_u32(out, static_cast<std::uint32_t>(count));
  write_u32(out, static_cast<std::uint32_t>(dim));
  write_array(out, values);
  if (!out) throw std::invalid_argument("write_mopd: write failed for " + path);
}

void read_mopd(const std::string& path, std::size_t& count, std::size_t& dim,
               std::vector<float>& values) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("read_mopd: cannot open " + path);
  expect_magic(in, "MOPD", path);
  std::uint32_t version = read_u32(in, "MOPD version");
  if (version != 1)
    throw std::invalid_argument("read_mopd: unsupported version " + std::to_string(version) +
                                " in " + path);
  count = read_u32(in, "MOPD count");
  dim = read_u32(in, "MOPD dim");
  read_array(in, values, count * dim, "MOPD rows");
}

void ActivationStore::save(const std::string& matrix_path, const std::string& manifest_path) const {
  write_mopd(matrix_path, count_, dim_, rows_);

  nlohmann::json arr = nlohmann::json::array();
  for (const ManifestEntry& e : manifest_) {
    arr.push_back({{"image_id", e.image_id},
                   {"level", level_number(e.level)},
                   {"x", e.x},
                   {"y", e.y},
                   {"side", e.side},
                   {"row", e.row}});
  }
  std::ofstream out(manifest_path);
  if (!out) throw std::invalid_argument("ActivationStore::save: cannot open " + manifest_path);
  out << arr.dump(2) << "\n";
}

ActivationStore ActivationStore::load(const std::string& matrix_path,
                                      const std::string& manifest_path) {
  std::size_t count = 0, dim = 0;
  std::vector<float> values;
  read_mopd(matrix_path, count, dim, values);

  std::ifstream in(manifest_path);
  if (!in) throw std::invalid_argument("ActivationStore::load: cannot open " + manifest_path);
  nlohmann::json arr = nlohmann::json::parse(in);
  if (!arr.is_array())
    throw std::invalid_argument("ActivationStore::load: manifest must be a JSON array");

  std::vector<ManifestEntry> manifest;
  manifest.reserve(arr.size());
  for (const auto& j : arr) {
    ManifestEntry e;
    e.image_id = j.at("image_id").get<std::string>();
    e.level = level_from_number(j.at("level").get<int>());
    e.x = j.at("x").get<int>();
    e.y = j.at("y").get<int>();
    e.side = j.at("side").get<int>();
    e.row = j.at("row").get<std::size_t>();
    manifest.push_back(std::move(e));
  }
  return ActivationStore(dim, std::move(values), std::move(manifest));
}

}  // namespace mop

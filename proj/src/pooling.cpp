#include "mop/pooling.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>
#include <string>

#include "mop/errors.hpp"

namespace mop {

namespace {

std::string level_block_name(Level l) { return "level" + std::to_string(level_number(l)); }

std::string stage_prefix(const ScaleStrategy& strategy, Level l) {
  return strategy.mode == ScaleMode::MultiScale ? std::string("multiscale") : level_block_name(l);
}

std::vector<Descriptor> rows_of(const Matrix& m) {
  std::vector<Descriptor> out(m.rows);
  for (std::size_t i = 0; i < m.rows; ++i)
    out[i].assign(m.row(i), m.row(i) + m.cols);
  return out;
}

void check_same_dim(const std::vector<Descriptor>& descriptors, const char* where) {
  for (const auto& d : descriptors)
    if (d.size() != descriptors.front().size())
      throw std::invalid_argument(std::string(where) + ": descriptors of mixed dimension");
}

// Patch descriptors of all images at one level flattened in (image, patch)
// order, as used to fit that level's PCA and codebook.
std::vector<Descriptor> flatten_level(const PerImageDescriptors& images) {
  std::vector<Descriptor> flat;
  for (const auto& img : images)
    for (const auto& d : img) flat.push_back(d);
  return flat;
}

// Per-image union across levels, ascending level then patch order: the
// multi-scale path treats every window as one more patch of the image.
PerImageDescriptors union_images(const std::map<Level, PerImageDescriptors>& training,
                                 const std::vector<Level>& levels) {
  std::size_t n_images = training.at(levels.front()).size();
  for (Level l : levels)
    if (training.at(l).size() != n_images)
      throw std::invalid_argument("fit_pipeline: image counts differ across levels");
  PerImageDescriptors out(n_images);
  for (std::size_t i = 0; i < n_images; ++i)
    for (Level l : levels)
      for (const auto& d : training.at(l)[i]) out[i].push_back(d);
  return out;
}

// Fits the VLAD path (patch PCA, codebook, pooled PCA) for one stage from
// per-image patch descriptors.
LevelModels fit_vlad_stage(const PerImageDescriptors& images, const FitConfig& cfg,
                           std::uint64_t kmeans_seed, const std::string& stage,
                           FitReport* report) {
  LevelModels models;

  std::vector<Descriptor> flat = flatten_level(images);
  if (flat.size() < 2)
    throw std::invalid_argument(stage + ".patch_pca: needs at least 2 descriptors, got " +
                                std::to_string(flat.size()));
  check_same_dim(flat, "fit_pipeline");
  Matrix flat_m = matrix_from_rows(flat);
  models.patch_pca = pca_fit(flat_m, cfg.patch_pca_dim);
  Matrix reduced = pca_transform_batch(*models.patch_pca, flat_m);

  if (reduced.rows < cfg.kmeans_k)
    throw std::invalid_argument(stage + ".codebook: N < k (N=" + std::to_string(reduced.rows) +
                                ", k=" + std::to_string(cfg.kmeans_k) + ")");
  KmeansReport km;
  models.codebook =
      kmeans_fit(reduced, cfg.kmeans_k, kmeans_seed, cfg.kmeans_max_iters, cfg.kmeans_tol, &km);
  cfg.vlad.validate(models.codebook->k());

  std::vector<std::vector<double>> pooled_rows(images.size());
  std::size_t row_start = 0;
  for (std::size_t i = 0; i < images.size(); ++i) {
    std::size_t n = images[i].size();
    if (n == 0)
      throw std::invalid_argument(stage + ".vlad: image " + std::to_string(i) +
                                  " has no patches");
    std::vector<Descriptor> img_reduced(n);
    for (std::size_t j = 0; j < n; ++j)
      img_reduced[j].assign(reduced.row(row_start + j), reduced.row(row_start + j) + reduced.cols);
    row_start += n;
    std::vector<double> v = vlad_encode(cfg.vlad, *models.codebook, img_reduced);
    pooled_rows[i] = normalize_chain(v, cfg.vlad.power_alpha);
  }

  if (pooled_rows.size() < 2)
    throw std::invalid_argument(stage + ".pooled_pca: needs at least 2 images, got " +
                                std::to_string(pooled_rows.size()));
  models.pooled_pca = pca_fit(matrix_from_rows(pooled_rows), cfg.pooled_pca_dim);

  if (report) {
    report->effective_dims[stage + ".patch_pca"] = models.patch_pca->out_dim();
    report->effective_dims[stage + ".pooled_pca"] = models.pooled_pca->out_dim();
    report->kmeans_iterations[stage + ".codebook"] = km.iterations;
    report->kmeans_seeds[stage + ".codebook"] = kmeans_seed;
  }
  return models;
}

}  // namespace

void ScaleStrategy::validate() const {
  if (levels.empty()) throw std::invalid_argument("ScaleStrategy: levels must be non-empty");
  std::set<Level> seen;
  for (Level l : levels) {
    int n = level_number(l);
    if (n < 1 || n > 3)
      throw std::invalid_argument("ScaleStrategy: level out of range: " + std::to_string(n));
    if (!seen.insert(l).second)
      throw std::invalid_argument("ScaleStrategy: duplicate level " + std::to_string(n));
  }
}

std::vector<Level> ScaleStrategy::sorted_levels() const {
  std::vector<Level> out = levels;
  std::sort(out.begin(), out.end(),
            [](Level a, Level b) { return level_number(a) < level_number(b); });
  return out;
}

const char* pooling_method_name(PoolingMethod m) {
  switch (m) {
    case PoolingMethod::Average: return "average";
    case PoolingMethod::Max: return "max";
    case PoolingMethod::Vlad: return "vlad";
  }
  throw std::invalid_argument("pooling_method_name: bad enum value");
}

PoolingMethod pooling_method_from_name(const std::string& name) {
  if (name == "average") return PoolingMethod::Average;
  if (name == "max") return PoolingMethod::Max;
  if (name == "vlad") return PoolingMethod::Vlad;
  throw std::invalid_argument("unknown pooling method: " + name);
}

const char* scale_mode_name(ScaleMode m) {
  switch (m) {
    case ScaleMode::MultiScale: return "multiscale";
    case ScaleMode::Concatenation: return "concatenation";
  }
  throw std::invalid_argument("scale_mode_name: bad enum value");
}

ScaleMode scale_mode_from_name(const std::string& name) {
  if (name == "multiscale") return ScaleMode::MultiScale;
  if (name == "concatenation") return ScaleMode::Concatenation;
  throw std::invalid_argument("unknown scale mode: " + name);
}

std::vector<double> pool_level(PoolingMethod method, const std::vector<Descriptor>& descriptors,
                               const LevelModels* models, const VladConfig& vlad) {
  if (descriptors.empty())
    throw std::invalid_argument("pool_level: empty descriptor list");
  check_same_dim(descriptors, "pool_level");
  const std::size_t dim = descriptors.front().size();

  switch (method) {
    case PoolingMethod::Average: {
      std::vector<double> out(dim, 0.0);
      for (const auto& d : descriptors)
        for (std::size_t j = 0; j < dim; ++j) out[j] += d[j];
      for (double& v : out) v /= static_cast<double>(descriptors.size());
      return out;
    }
    case PoolingMethod::Max: {
      std::vector<double> out = descriptors.front();
      for (std::size_t i = 1; i < descriptors.size(); ++i)
        for (std::size_t j = 0; j < dim; ++j) out[j] = std::max(out[j], descriptors[i][j]);
      return out;
    }
    case PoolingMethod::Vlad: {
      if (!models || !models->patch_pca || !models->codebook || !models->pooled_pca)
        throw std::invalid_argument("pool_level: vlad pooling needs fitted models");
      Matrix m = matrix_from_rows(
          std::vector<std::vector<double>>(descriptors.begin(), descriptors.end()));
      Matrix reduced = pca_transform_batch(*models->patch_pca, m);
      std::vector<double> v = vlad_encode(vlad, *models->codebook, rows_of(reduced));
      std::vector<double> normalized = normalize_chain(v, vlad.power_alpha);
      return pca_transform(*models->pooled_pca, normalized);
    }
  }
  throw std::invalid_argument("pool_level: bad method enum value");
}

MopPipelineModel fit_pipeline(const std::map<Level, PerImageDescriptors>& training,
                              const FitConfig& cfg, FitReport* report) {
  cfg.grid.validate();
  cfg.strategy.validate();
  MopPipelineModel model;
  model.grid = cfg.grid;
  model.vlad = cfg.vlad;
  model.method = cfg.method;
  model.strategy = cfg.strategy;
  model.seed = cfg.seed;

  if (cfg.method != PoolingMethod::Vlad) return model;  // nothing to fit

  std::vector<Level> levels = cfg.strategy.sorted_levels();
  for (Level l : levels)
    if (!training.count(l))
      throw std::invalid_argument("fit_pipeline: no training descriptors for level " +
                                  std::to_string(level_number(l)));

  if (cfg.strategy.mode == ScaleMode::Concatenation) {
    // Level 1 is the raw global activation; only finer levels get models.
    // Each level's k-means runs on its own stream: seed + level number.
    for (Level l : levels) {
      if (l == Level::L1) continue;
      model.per_level[l] = fit_vlad_stage(training.at(l), cfg,
                                          cfg.seed + static_cast<std::uint64_t>(level_number(l)),
                                          level_block_name(l), report);
    }
  } else {
    model.joint = fit_vlad_stage(union_images(training, levels), cfg, cfg.seed,
                                 "multiscale", report);
  }
  return model;
}

MopDescriptor assemble_mop(const MopPipelineModel& model, const ScaleStrategy& strategy,
                           PoolingMethod method,
                           const std::map<Level, std::vector<Descriptor>>& per_level) {
  strategy.validate();
  std::vector<Level> levels = strategy.sorted_levels();
  for (Level l : levels)
    if (!per_level.count(l))
      throw std::invalid_argument("assemble_mop: no descriptors for level " +
                                  std::to_string(level_number(l)));

  MopDescriptor out;
  auto append_block = [&out](const std::string& name, const std::vector<double>& block) {
    std::vector<double> unit = l2_normalize(block);
    out.layout.push_back({name, out.values.size(), unit.size()});
    out.values.insert(out.values.end(), unit.begin(), unit.end());
  };

  if (strategy.mode == ScaleMode::Concatenation) {
    for (Level l : levels) {
      const std::vector<Descriptor>& descs = per_level.at(l);
      if (l == Level::L1 && method == PoolingMethod::Vlad) {
        if (descs.size() != 1)
          throw std::invalid_argument("assemble_mop: level 1 expects exactly one window, got " +
                                      std::to_string(descs.size()));
        append_block(level_block_name(l), descs.front());
        continue;
      }
      const LevelModels* models = nullptr;
      if (method == PoolingMethod::Vlad) {
        auto it = model.per_level.find(l);
        if (it == model.per_level.end())
          throw std::invalid_argument("assemble_mop: model has no fitted stage for level " +
                                      std::to_string(level_number(l)));
        models = &it->second;
      }
      append_block(level_block_name(l), pool_level(method, descs, models, model.vlad));
    }
    return out;
  }

  std::vector<Descriptor> all;
  for (Level l : levels)
    for (const auto& d : per_level.at(l)) all.push_back(d);
  const LevelModels* models = nullptr;
  if (method == PoolingMethod::Vlad) {
    if (!model.joint)
      throw std::invalid_argument("assemble_mop: model has no fitted multi-scale stage");
    models = &*model.joint;
  }
  append_block("multiscale", pool_level(method, all, models, model.vlad));
  return out;
}

std::vector<Descriptor> level_descriptors(const GridConfig& grid_cfg, Level level,
                                          const DescriptorSource& source, const ImageRef& image) {
  grid_cfg.validate();
  int idx = level_number(level) - 1;
  if (idx < 0 || static_cast<std::size_t>(idx) >= grid_cfg.level_sides.size())
    throw std::invalid_argument("level_descriptors: grid has no side for level " +
                                std::to_string(level_number(level)));
  if (level == Level::L1 && grid_cfg.level_sides[0] != grid_cfg.frame)
    throw std::invalid_argument("level_descriptors: level 1 window must cover the whole frame");

  std::vector<PatchSpec> patches = grid(grid_cfg, idx);
  std::vector<Descriptor> out(patches.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(patches.size()); ++i)
    out[static_cast<std::size_t>(i)] = source.descriptor_for(image, patches[static_cast<std::size_t>(i)]);
  return out;
}

MopDescriptor encode_image(const MopPipelineModel& model, const ScaleStrategy& strategy,
                           PoolingMethod method, const DescriptorSource& source,
                           const ImageRef& image) {
  strategy.validate();
  std::map<Level, std::vector<Descriptor>> per_level;
  for (Level l : strategy.sorted_levels())
    per_level[l] = level_descriptors(model.grid, l, source, image);
  return assemble_mop(model, strategy, method, per_level);
}

}  // namespace mop

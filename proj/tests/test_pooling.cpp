#include <doctest.h>

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "mop/descriptors.hpp"
#include "mop/encoding.hpp"
#include "mop/errors.hpp"
#include "mop/pooling.hpp"
#include "mop/rng.hpp"
#include "test_util.hpp"

using namespace mop;
using namespace testutil;

namespace {

PerImageDescriptors make_training(std::size_t images, std::size_t patches, std::size_t dim,
                                  SplitMix64& rng) {
  PerImageDescriptors out(images);
  for (auto& img : out)
    for (std::size_t p = 0; p < patches; ++p) img.push_back(random_vector(dim, rng, -2.0, 2.0));
  return out;
}

bool same_pca(const PcaModel& a, const PcaModel& b) {
  if (a.mean != b.mean || a.eigenvalues != b.eigenvalues) return false;
  if (a.whiten != b.whiten || a.epsilon != b.epsilon) return false;
  return a.components.rows == b.components.rows && a.components.cols == b.components.cols &&
         a.components.data == b.components.data;
}

bool same_models(const LevelModels& a, const LevelModels& b) {
  if (a.patch_pca.has_value() != b.patch_pca.has_value()) return false;
  if (a.codebook.has_value() != b.codebook.has_value()) return false;
  if (a.pooled_pca.has_value() != b.pooled_pca.has_value()) return false;
  if (a.patch_pca && !same_pca(*a.patch_pca, *b.patch_pca)) return false;
  if (a.codebook && a.codebook->centers.data != b.codebook->centers.data) return false;
  if (a.pooled_pca && !same_pca(*a.pooled_pca, *b.pooled_pca)) return false;
  return true;
}

// Small fully-fitted concatenation fixture shared by the assembly tests.
struct Fixture {
  FitConfig cfg;
  std::map<Level, PerImageDescriptors> training;
  MopPipelineModel model;
  FitReport report;

  Fixture() {
    SplitMix64 rng(4242);
    cfg.vlad.r = 2;
    cfg.vlad.sigma = 1.0;
    cfg.patch_pca_dim = 6;
    cfg.pooled_pca_dim = 5;
    cfg.kmeans_k = 3;
    cfg.seed = 42;
    training[Level::L1] = make_training(8, 1, 12, rng);
    training[Level::L2] = make_training(8, 9, 12, rng);
    training[Level::L3] = make_training(8, 4, 12, rng);
    model = fit_pipeline(training, cfg, &report);
  }

  std::map<Level, std::vector<Descriptor>> image(std::uint64_t seed) const {
    SplitMix64 rng(seed);
    std::map<Level, std::vector<Descriptor>> out;
    out[Level::L1] = {random_vector(12, rng, -2.0, 2.0)};
    std::vector<Descriptor> l2, l3;
    for (int i = 0; i < 9; ++i) l2.push_back(random_vector(12, rng, -2.0, 2.0));
    for (int i = 0; i < 4; ++i) l3.push_back(random_vector(12, rng, -2.0, 2.0));
    out[Level::L2] = l2;
    out[Level::L3] = l3;
    return out;
  }
};

}  // namespace

TEST_CASE("average and max pooling match hand arithmetic") {
  std::vector<Descriptor> two = {{1.0, 3.0}, {3.0, 5.0}};
  VladConfig vlad;
  std::vector<double> avg = pool_level(PoolingMethod::Average, two, nullptr, vlad);
  REQUIRE(avg.size() == 2);
  CHECK(avg[0] == 2.0);
  CHECK(avg[1] == 4.0);
  std::vector<double> mx = pool_level(PoolingMethod::Max, two, nullptr, vlad);
  CHECK(mx[0] == 3.0);
  CHECK(mx[1] == 5.0);
}

TEST_CASE("pooling constant multisets is the identity") {
  VladConfig vlad;
  Descriptor d = {0.125, -2.75, 3.5};
  std::vector<Descriptor> twice = {d, d};
  std::vector<double> avg2 = pool_level(PoolingMethod::Average, twice, nullptr, vlad);
  for (std::size_t j = 0; j < d.size(); ++j) CHECK(avg2[j] == d[j]);

  std::vector<Descriptor> five(5, d);
  std::vector<double> avg5 = pool_level(PoolingMethod::Average, five, nullptr, vlad);
  CHECK(max_abs_diff(avg5, d) < 1e-12);
  std::vector<double> max5 = pool_level(PoolingMethod::Max, five, nullptr, vlad);
  for (std::size_t j = 0; j < d.size(); ++j) CHECK(max5[j] == d[j]);

  // One patch: averaging is exact for any value.
  std::vector<double> one = pool_level(PoolingMethod::Average, {d}, nullptr, vlad);
  for (std::size_t j = 0; j < d.size(); ++j) CHECK(one[j] == d[j]);
}

TEST_CASE("pool_level rejects bad descriptor lists") {
  VladConfig vlad;
  CHECK_THROWS_AS(pool_level(PoolingMethod::Average, {}, nullptr, vlad), std::invalid_argument);
  std::vector<Descriptor> ragged = {{1.0, 2.0}, {1.0}};
  CHECK_THROWS_AS(pool_level(PoolingMethod::Average, ragged, nullptr, vlad),
                  std::invalid_argument);
  std::vector<Descriptor> ok = {{1.0, 2.0}};
  CHECK_THROWS_AS(pool_level(PoolingMethod::Vlad, ok, nullptr, vlad), std::invalid_argument);
  LevelModels partial;
  partial.patch_pca = PcaModel{};
  CHECK_THROWS_AS(pool_level(PoolingMethod::Vlad, ok, &partial, vlad), std::invalid_argument);
}

TEST_CASE("strategy and enum names validate and round-trip") {
  ScaleStrategy s;
  s.levels = {Level::L3, Level::L1};
  s.validate();
  std::vector<Level> sorted = s.sorted_levels();
  REQUIRE(sorted.size() == 2);
  CHECK(sorted[0] == Level::L1);
  CHECK(sorted[1] == Level::L3);

  ScaleStrategy empty;
  empty.levels = {};
  CHECK_THROWS_AS(empty.validate(), std::invalid_argument);
  ScaleStrategy dup;
  dup.levels = {Level::L2, Level::L2};
  CHECK_THROWS_AS(dup.validate(), std::invalid_argument);

  for (PoolingMethod m : {PoolingMethod::Average, PoolingMethod::Max, PoolingMethod::Vlad})
    CHECK(pooling_method_from_name(pooling_method_name(m)) == m);
  CHECK_THROWS_AS(pooling_method_from_name("median"), std::invalid_argument);
  for (ScaleMode m : {ScaleMode::MultiScale, ScaleMode::Concatenation})
    CHECK(scale_mode_from_name(scale_mode_name(m)) == m);
  CHECK_THROWS_AS(scale_mode_from_name("pyramid"), std::invalid_argument);
}

TEST_CASE("fit_pipeline names the failing stage") {
  SplitMix64 rng(7);
  FitConfig cfg;
  cfg.strategy.levels = {Level::L2};
  cfg.kmeans_k = 100;
  std::map<Level, PerImageDescriptors> training;
  training[Level::L2] = make_training(3, 2, 8, rng);  // 6 patches, k=100

  bool threw = false;
  try {
    fit_pipeline(training, cfg);
  } catch (const std::invalid_argument& e) {
    threw = true;
    CHECK(std::string(e.what()).find("level2.codebook: N < k") != std::string::npos);
  }
  CHECK(threw);

  // Too few patch descriptors for the patch PCA.
  cfg.kmeans_k = 1;
  training[Level::L2] = make_training(1, 1, 8, rng);
  try {
    fit_pipeline(training, cfg);
    CHECK(false);
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("level2.patch_pca") != std::string::npos);
  }

  // Enough patches but a single image cannot support the pooled PCA.
  training[Level::L2] = make_training(1, 6, 8, rng);
  cfg.kmeans_k = 2;
  cfg.vlad.r = 2;
  try {
    fit_pipeline(training, cfg);
    CHECK(false);
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("level2.pooled_pca") != std::string::npos);
  }

  // An image with no patches at all is named when VLAD pooling hits it.
  PerImageDescriptors with_hole = make_training(4, 5, 8, rng);
  with_hole[2].clear();
  training[Level::L2] = with_hole;
  try {
    fit_pipeline(training, cfg);
    CHECK(false);
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("level2.vlad: image 2") != std::string::npos);
  }

  // Missing level entirely.
  std::map<Level, PerImageDescriptors> none;
  CHECK_THROWS_AS(fit_pipeline(none, cfg), std::invalid_argument);
}

TEST_CASE("fit_pipeline is deterministic and reports clamped dims") {
  Fixture f;
  REQUIRE(f.model.per_level.count(Level::L2) == 1);
  REQUIRE(f.model.per_level.count(Level::L3) == 1);
  CHECK(!f.model.per_level.count(Level::L1));
  CHECK(!f.model.joint.has_value());

  CHECK(f.report.effective_dims.at("level2.patch_pca") == 6);
  CHECK(f.report.effective_dims.at("level2.pooled_pca") == 5);
  CHECK(f.report.effective_dims.at("level3.patch_pca") == 6);
  CHECK(f.report.effective_dims.at("level3.pooled_pca") == 5);
  CHECK(f.report.kmeans_seeds.at("level2.codebook") == 44);
  CHECK(f.report.kmeans_seeds.at("level3.codebook") == 45);
  CHECK(f.report.kmeans_iterations.at("level2.codebook") >= 1);

  MopPipelineModel again = fit_pipeline(f.training, f.cfg);
  CHECK(same_models(f.model.per_level.at(Level::L2), again.per_level.at(Level::L2)));
  CHECK(same_models(f.model.per_level.at(Level::L3), again.per_level.at(Level::L3)));
}

TEST_CASE("fit_pipeline clamps the pooled dimension to the image count") {
  SplitMix64 rng(9);
  FitConfig cfg;
  cfg.strategy.levels = {Level::L2};
  cfg.patch_pca_dim = 500;  // clamped by rank
  cfg.pooled_pca_dim = 4096;
  cfg.kmeans_k = 2;
  cfg.vlad.r = 2;
  std::map<Level, PerImageDescriptors> training;
  training[Level::L2] = make_training(5, 4, 7, rng);  // 20 patches of dim 7
  FitReport report;
  fit_pipeline(training, cfg, &report);
  CHECK(report.effective_dims.at("level2.patch_pca") == 7);   // min(19, 7)
  CHECK(report.effective_dims.at("level2.pooled_pca") == 4);  // min(5-1, 2*7)
}

TEST_CASE("fit_pipeline with average pooling fits nothing") {
  FitConfig cfg;
  cfg.method = PoolingMethod::Average;
  MopPipelineModel model = fit_pipeline({}, cfg);
  CHECK(model.per_level.empty());
  CHECK(!model.joint.has_value());
}

TEST_CASE("multi-scale fit pools the union and checks image counts") {
  SplitMix64 rng(13);
  FitConfig cfg;
  cfg.strategy.mode = ScaleMode::MultiScale;
  cfg.strategy.levels = {Level::L2, Level::L3};
  cfg.patch_pca_dim = 4;
  cfg.pooled_pca_dim = 3;
  cfg.kmeans_k = 2;
  cfg.vlad.r = 2;
  std::map<Level, PerImageDescriptors> training;
  training[Level::L2] = make_training(6, 3, 10, rng);
  training[Level::L3] = make_training(6, 2, 10, rng);
  FitReport report;
  MopPipelineModel model = fit_pipeline(training, cfg, &report);
  CHECK(model.joint.has_value());
  CHECK(model.per_level.empty());
  CHECK(report.effective_dims.at("multiscale.patch_pca") == 4);
  CHECK(report.kmeans_seeds.at("multiscale.codebook") == cfg.seed);

  training[Level::L3] = make_training(5, 2, 10, rng);
  CHECK_THROWS_AS(fit_pipeline(training, cfg), std::invalid_argument);
}

TEST_CASE("assembled descriptors have contiguous unit-norm blocks") {
  Fixture f;
  MopDescriptor d = assemble_mop(f.model, f.cfg.strategy, PoolingMethod::Vlad, f.image(1));

  REQUIRE(d.layout.size() == 3);
  CHECK(d.layout[0].block == "level1");
  CHECK(d.layout[1].block == "level2");
  CHECK(d.layout[2].block == "level3");
  CHECK(d.layout[0].length == 12);  // raw embedder dim
  CHECK(d.layout[1].length == 5);   // pooled PCA dim
  CHECK(d.layout[2].length == 5);

  std::size_t expect_offset = 0;
  for (const BlockInfo& b : d.layout) {
    CHECK(b.offset == expect_offset);
    expect_offset += b.length;
    std::span<const double> block(d.values.data() + b.offset, b.length);
    CHECK(std::abs(l2_norm(block) - 1.0) < 1e-12);
  }
  CHECK(d.values.size() == expect_offset);

  // Three nonzero unit blocks concatenate to overall norm sqrt(3).
  CHECK(std::abs(l2_norm(d.values) - std::sqrt(3.0)) < 1e-12);
}

TEST_CASE("the level-1 block is the unit-normalized global descriptor") {
  Fixture f;
  auto per_level = f.image(2);
  MopDescriptor d = assemble_mop(f.model, f.cfg.strategy, PoolingMethod::Vlad, per_level);
  std::vector<double> expect = l2_normalize(per_level.at(Level::L1).front());
  REQUIRE(d.layout[0].length == expect.size());
  for (std::size_t j = 0; j < expect.size(); ++j) CHECK(d.values[j] == expect[j]);

  // The VLAD path refuses more than one global window.
  per_level[Level::L1].push_back(per_level[Level::L1].front());
  CHECK_THROWS_AS(assemble_mop(f.model, f.cfg.strategy, PoolingMethod::Vlad, per_level),
                  std::invalid_argument);
}

TEST_CASE("level-1-only encoding is just the normalized global block") {
  Fixture f;
  ScaleStrategy only1;
  only1.levels = {Level::L1};
  auto per_level = f.image(3);
  std::map<Level, std::vector<Descriptor>> l1_only{{Level::L1, per_level.at(Level::L1)}};
  MopDescriptor d = assemble_mop(f.model, only1, PoolingMethod::Vlad, l1_only);
  REQUIRE(d.layout.size() == 1);
  CHECK(d.layout[0].block == "level1");
  std::vector<double> expect = l2_normalize(per_level.at(Level::L1).front());
  REQUIRE(d.values.size() == expect.size());
  for (std::size_t j = 0; j < expect.size(); ++j) CHECK(d.values[j] == expect[j]);

  // Average pooling over the single global window gives the same block.
  MopDescriptor avg = assemble_mop(f.model, only1, PoolingMethod::Average, l1_only);
  REQUIRE(avg.values.size() == d.values.size());
  for (std::size_t j = 0; j < d.values.size(); ++j) CHECK(avg.values[j] == d.values[j]);
}

TEST_CASE("single-level multi-scale equals single-level concatenation") {
  SplitMix64 rng(17);
  FitConfig cfg;
  cfg.strategy.mode = ScaleMode::MultiScale;
  cfg.strategy.levels = {Level::L2};
  cfg.vlad.r = 2;
  cfg.vlad.sigma = 1.0;
  cfg.patch_pca_dim = 5;
  cfg.pooled_pca_dim = 4;
  cfg.kmeans_k = 3;
  std::map<Level, PerImageDescriptors> training;
  training[Level::L2] = make_training(7, 6, 9, rng);
  MopPipelineModel ms = fit_pipeline(training, cfg);

  // Same fitted stage, rebadged as a per-level concatenation model.
  MopPipelineModel cc = ms;
  cc.strategy.mode = ScaleMode::Concatenation;
  cc.per_level[Level::L2] = *ms.joint;
  cc.joint.reset();

  std::vector<Descriptor> patches;
  for (int i = 0; i < 6; ++i) patches.push_back(random_vector(9, rng, -2.0, 2.0));
  std::map<Level, std::vector<Descriptor>> per_level{{Level::L2, patches}};

  MopDescriptor a = assemble_mop(ms, ms.strategy, PoolingMethod::Vlad, per_level);
  MopDescriptor b = assemble_mop(cc, cc.strategy, PoolingMethod::Vlad, per_level);
  REQUIRE(a.values.size() == b.values.size());
  CHECK(a.layout[0].block == "multiscale");
  CHECK(b.layout[0].block == "level2");
  CHECK(max_abs_diff(a.values, b.values) < 1e-12);
}

TEST_CASE("vlad assembly is invariant to patch order") {
  Fixture f;
  auto per_level = f.image(4);
  MopDescriptor base = assemble_mop(f.model, f.cfg.strategy, PoolingMethod::Vlad, per_level);

  SplitMix64 rng(5);
  for (int trial = 0; trial < 4; ++trial) {
    auto shuffled = per_level;
    for (Level l : {Level::L2, Level::L3}) {
      auto& v = shuffled[l];
      for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.uniform_index(i)]);
    }
    MopDescriptor got = assemble_mop(f.model, f.cfg.strategy, PoolingMethod::Vlad, shuffled);
    CHECK(max_abs_diff(base.values, got.values) <= 1e-10);
  }
}

TEST_CASE("paper-default dimensions fall out of the layout arithmetic") {
  // Pre-PCA VLAD: 100 centers of dim 500.
  SplitMix64 rng(19);
  Codebook book{random_matrix(100, 500, rng)};
  VladConfig cfg;  // r=5, sigma=10
  std::vector<double> v = vlad_encode(cfg, book, {random_vector(500, rng)});
  CHECK(v.size() == 50000);

  // Three 4096 blocks concatenate to 12,288; average pooling needs no models.
  MopPipelineModel model;
  std::map<Level, std::vector<Descriptor>> per_level;
  per_level[Level::L1] = {random_vector(4096, rng)};
  per_level[Level::L2] = std::vector<Descriptor>(25, random_vector(4096, rng));
  per_level[Level::L3] = std::vector<Descriptor>(49, random_vector(4096, rng));
  ScaleStrategy all;
  MopDescriptor d = assemble_mop(model, all, PoolingMethod::Average, per_level);
  CHECK(d.values.size() == 12288);
  REQUIRE(d.layout.size() == 3);
  CHECK(d.layout[0].offset == 0);
  CHECK(d.layout[1].offset == 4096);
  CHECK(d.layout[2].offset == 8192);
  CHECK(d.layout[2].length == 4096);
}

TEST_CASE("assembly rejects missing stages and levels") {
  Fixture f;
  auto per_level = f.image(6);
  std::map<Level, std::vector<Descriptor>> missing{{Level::L1, per_level.at(Level::L1)},
                                                   {Level::L2, per_level.at(Level::L2)}};
  CHECK_THROWS_AS(assemble_mop(f.model, f.cfg.strategy, PoolingMethod::Vlad, missing),
                  std::invalid_argument);

  MopPipelineModel bare;  // no fitted stages
  std::map<Level, std::vector<Descriptor>> l2{{Level::L2, per_level.at(Level::L2)}};
  ScaleStrategy only2;
  only2.levels = {Level::L2};
  CHECK_THROWS_AS(assemble_mop(bare, only2, PoolingMethod::Vlad, l2), std::invalid_argument);

  ScaleStrategy ms;
  ms.mode = ScaleMode::MultiScale;
  ms.levels = {Level::L2};
  CHECK_THROWS_AS(assemble_mop(bare, ms, PoolingMethod::Vlad, l2), std::invalid_argument);
}

TEST_CASE("level_descriptors walks the grid through the source") {
  GridConfig grid_cfg;
  grid_cfg.frame = 64;
  grid_cfg.level_sides = {64, 32, 16};
  grid_cfg.stride = 16;

  ToyEmbedderConfig ecfg;
  ecfg.out_dim = 10;
  ToyEmbedder emb(ecfg);
  ImageTensor img = gradient_image(64, 64, 1);
  ImageRef ref{"img", &img};

  CHECK(level_descriptors(grid_cfg, Level::L1, emb, ref).size() == 1);
  CHECK(level_descriptors(grid_cfg, Level::L2, emb, ref).size() == 9);
  CHECK(level_descriptors(grid_cfg, Level::L3, emb, ref).size() == 16);

  // The single L1 descriptor is the embedding of the whole frame.
  Descriptor l1 = level_descriptors(grid_cfg, Level::L1, emb, ref).front();
  Descriptor whole = emb.embed(img);
  for (std::size_t j = 0; j < whole.size(); ++j) CHECK(l1[j] == whole[j]);

  GridConfig two_levels = grid_cfg;
  two_levels.level_sides = {64, 32};
  CHECK_THROWS_AS(level_descriptors(two_levels, Level::L3, emb, ref), std::invalid_argument);

  GridConfig bad_l1 = grid_cfg;
  bad_l1.level_sides = {32, 32, 16};
  CHECK_THROWS_AS(level_descriptors(bad_l1, Level::L1, emb, ref), std::invalid_argument);
}

TEST_CASE("encode_image matches manual extraction plus assembly") {
  SplitMix64 rng(23);
  GridConfig grid_cfg;
  grid_cfg.frame = 64;
  grid_cfg.level_sides = {64, 32, 16};
  grid_cfg.stride = 16;

  ToyEmbedderConfig ecfg;
  ecfg.out_dim = 14;
  ToyEmbedder emb(ecfg);

  FitConfig cfg;
  cfg.grid = grid_cfg;
  cfg.vlad.r = 2;
  cfg.vlad.sigma = 1.0;
  cfg.patch_pca_dim = 6;
  cfg.pooled_pca_dim = 4;
  cfg.kmeans_k = 3;
  cfg.seed = 100;

  std::map<Level, PerImageDescriptors> training;
  std::vector<ImageTensor> train_imgs;
  SplitMix64 img_rng(31);
  for (int i = 0; i < 6; ++i) train_imgs.push_back(noise_image(64, 64, 1, img_rng));
  for (Level l : {Level::L1, Level::L2, Level::L3}) {
    PerImageDescriptors per;
    for (const auto& im : train_imgs) {
      ImageRef r{"t", &im};
      per.push_back(level_descriptors(grid_cfg, l, emb, r));
    }
    training[l] = per;
  }
  MopPipelineModel model = fit_pipeline(training, cfg);

  ImageTensor probe = noise_image(64, 64, 1, img_rng);
  ImageRef ref{"probe", &probe};
  MopDescriptor direct = encode_image(model, cfg.strategy, PoolingMethod::Vlad, emb, ref);

  std::map<Level, std::vector<Descriptor>> per_level;
  for (Level l : {Level::L1, Level::L2, Level::L3})
    per_level[l] = level_descriptors(grid_cfg, l, emb, ref);
  MopDescriptor manual = assemble_mop(model, cfg.strategy, PoolingMethod::Vlad, per_level);

  REQUIRE(direct.values.size() == manual.values.size());
  for (std::size_t j = 0; j < direct.values.size(); ++j)
    CHECK(direct.values[j] == manual.values[j]);
  CHECK(direct.layout.size() == 3);

  // An activation store missing one patch reports the full key.
  std::vector<float> one_row(14, 0.5f);
  ActivationStore store(14, one_row, {{"probe", Level::L1, 0, 0, 64, 0}});
  CHECK_THROWS_AS(encode_image(model, cfg.strategy, PoolingMethod::Vlad, store, ref),
                  NotFoundError);
}

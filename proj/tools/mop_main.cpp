// mop: batch front end for the multi-scale orderless pooling pipeline.
//
// Commands: fit, encode, classify, retrieve, invariance, windows.
// Exit codes: 0 success, 2 invalid input, 3 model/config mismatch,
// 4 numerical failure.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <CLI11.hpp>
#include <json.hpp>

#include "mop/descriptors.hpp"
#include "mop/encoding.hpp"
#include "mop/errors.hpp"
#include "mop/eval.hpp"
#include "mop/image.hpp"
#include "mop/model_io.hpp"
#include "mop/patchgrid.hpp"
#include "mop/pooling.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ---------------------------------------------------------------- config ---

struct SweepConfig {
  std::vector<double> scale = {1.0, 1.2, 1.4, 1.6, 1.8, 2.0};
  std::vector<double> translate = {-40, -30, -20, -10, 0, 10, 20, 30, 40};
  std::vector<double> rotate = {-20, -15, -10, -5, 0, 5, 10, 15, 20};
  bool flip = true;
};

struct RunConfig {
  std::string images_dir;
  std::string source = "toy";  // "toy" | "store"
  std::string store_matrix;
  std::string store_manifest;
  std::string labels_path;
  std::string relevance_path;
  mop::GridConfig grid;
  mop::VladConfig vlad;
  mop::PoolingMethod method = mop::PoolingMethod::Vlad;
  mop::ScaleStrategy strategy;
  std::size_t patch_pca_dim = 500;
  std::size_t pooled_pca_dim = 4096;
  std::size_t final_pca_dim = 0;  // retrieval-time compression, 0 = off
  bool final_pca_whiten = true;
  std::size_t kmeans_k = 100;
  std::size_t kmeans_max_iters = 100;
  double kmeans_tol = 1e-6;
  mop::ToyEmbedderConfig toy;
  mop::SgdConfig sgd;
  std::uint64_t seed = 0;
  SweepConfig sweep;
  std::vector<int> window_sides = {224, 192, 160, 128};
  int window_stride = 16;
};

const char* const kConfigKeyHelp =
    "Config file keys (JSON object; unknown keys are rejected):\n"
    "  images_dir        directory of .pgm/.ppm images; image id = file stem\n"
    "  source            descriptor source: \"toy\" (default) or \"store\"\n"
    "  store_matrix      activation store matrix (.mopd), source=store\n"
    "  store_manifest    activation store manifest (.json), source=store\n"
    "  labels            JSON file {\"image_id\": \"class\", ...}\n"
    "  relevance         JSON file {\"query_id\": [\"db_id\", ...], ...}\n"
    "  grid              {frame:256, level_sides:[256,128,64], stride:32}\n"
    "  vlad              {r:5, sigma:10.0, power_alpha:0.5}\n"
    "  method            \"vlad\" (default) | \"average\" | \"max\"\n"
    "  strategy          {mode:\"concatenation\"|\"multiscale\", levels:[1,2,3]}\n"
    "  patch_pca_dim     per-patch PCA dimension (default 500)\n"
    "  pooled_pca_dim    pooled-descriptor PCA dimension (default 4096)\n"
    "  final_pca_dim     retrieval compression dimension, 0 = off (default 0)\n"
    "  final_pca_whiten  whiten the retrieval compression (default true)\n"
    "  kmeans_k          codebook size (default 100)\n"
    "  kmeans_max_iters  Lloyd iteration cap (default 100)\n"
    "  kmeans_tol        relative inertia-improvement stop (default 1e-6)\n"
    "  toy               {thumb_side:16, out_dim:64, projection_seed:0}\n"
    "  sgd               {lambda:1e-5, eta:0.2, epochs:100}\n"
    "  seed              master seed (overridden by --seed)\n"
    "  sweep             {scale:[...], translate:[...], rotate:[...], flip:true}\n"
    "  window_sides      sliding-window sides (default [224,192,160,128])\n"
    "  window_stride     sliding-window stride (default 16)\n";

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw std::invalid_argument(where + ": expected a JSON object");
  for (const auto& [key, value] : j.items())
    if (!allowed.count(key))
      throw std::invalid_argument(where + ": unknown key \"" + key +
                                  "\" (see --help for the key list)");
}

json load_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open: " + path);
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw std::invalid_argument("malformed JSON in " + path);
  return j;
}

RunConfig parse_config(const std::string& path) {
  json j = load_json_file(path);
  check_keys(j, {"images_dir", "source", "store_matrix", "store_manifest", "labels",
                 "relevance", "grid", "vlad", "method", "strategy", "patch_pca_dim",
                 "pooled_pca_dim", "final_pca_dim", "final_pca_whiten", "kmeans_k",
                 "kmeans_max_iters", "kmeans_tol", "toy", "sgd", "seed", "sweep",
                 "window_sides", "window_stride"},
             path);
  RunConfig cfg;
  if (j.count("images_dir")) cfg.images_dir = j["images_dir"].get<std::string>();
  if (j.count("source")) cfg.source = j["source"].get<std::string>();
  if (cfg.source != "toy" && cfg.source != "store")
    throw std::invalid_argument("config: source must be \"toy\" or \"store\"");
  if (j.count("store_matrix")) cfg.store_matrix = j["store_matrix"].get<std::string>();
  if (j.count("store_manifest")) cfg.store_manifest = j["store_manifest"].get<std::string>();
  if (j.count("labels")) cfg.labels_path = j["labels"].get<std::string>();
  if (j.count("relevance")) cfg.relevance_path = j["relevance"].get<std::string>();

  if (j.count("grid")) {
    const json& g = j["grid"];
    check_keys(g, {"frame", "level_sides", "stride"}, "config.grid");
    if (g.count("frame")) cfg.grid.frame = g["frame"].get<int>();
    if (g.count("level_sides")) cfg.grid.level_sides = g["level_sides"].get<std::vector<int>>();
    if (g.count("stride")) cfg.grid.stride = g["stride"].get<int>();
  }
  if (j.count("vlad")) {
    const json& v = j["vlad"];
    check_keys(v, {"r", "sigma", "power_alpha"}, "config.vlad");
    if (v.count("r")) cfg.vlad.r = v["r"].get<std::size_t>();
    if (v.count("sigma")) cfg.vlad.sigma = v["sigma"].get<double>();
    if (v.count("power_alpha")) cfg.vlad.power_alpha = v["power_alpha"].get<double>();
  }
  if (j.count("method")) cfg.method = mop::pooling_method_from_name(j["method"].get<std::string>());
  if (j.count("strategy")) {
    const json& s = j["strategy"];
    check_keys(s, {"mode", "levels"}, "config.strategy");
    if (s.count("mode")) cfg.strategy.mode = mop::scale_mode_from_name(s["mode"].get<std::string>());
    if (s.count("levels")) {
      cfg.strategy.levels.clear();
      for (int n : s["levels"].get<std::vector<int>>())
        cfg.strategy.levels.push_back(mop::level_from_number(n));
    }
  }
  if (j.count("patch_pca_dim")) cfg.patch_pca_dim = j["patch_pca_dim"].get<std::size_t>();
  if (j.count("pooled_pca_dim")) cfg.pooled_pca_dim = j["pooled_pca_dim"].get<std::size_t>();
  if (j.count("final_pca_dim")) cfg.final_pca_dim = j["final_pca_dim"].get<std::size_t>();
  if (j.count("final_pca_whiten")) cfg.final_pca_whiten = j["final_pca_whiten"].get<bool>();
  if (j.count("kmeans_k")) cfg.kmeans_k = j["kmeans_k"].get<std::size_t>();
  if (j.count("kmeans_max_iters")) cfg.kmeans_max_iters = j["kmeans_max_iters"].get<std::size_t>();
  if (j.count("kmeans_tol")) cfg.kmeans_tol = j["kmeans_tol"].get<double>();
  if (j.count("toy")) {
    const json& t = j["toy"];
    check_keys(t, {"thumb_side", "out_dim", "projection_seed"}, "config.toy");
    if (t.count("thumb_side")) cfg.toy.thumb_side = t["thumb_side"].get<int>();
    if (t.count("out_dim")) cfg.toy.out_dim = t["out_dim"].get<std::size_t>();
    if (t.count("projection_seed")) cfg.toy.projection_seed = t["projection_seed"].get<std::uint64_t>();
  }
  if (j.count("sgd")) {
    const json& s = j["sgd"];
    check_keys(s, {"lambda", "eta", "epochs"}, "config.sgd");
    if (s.count("lambda")) cfg.sgd.lambda = s["lambda"].get<double>();
    if (s.count("eta")) cfg.sgd.eta = s["eta"].get<double>();
    if (s.count("epochs")) cfg.sgd.epochs = s["epochs"].get<std::size_t>();
  }
  if (j.count("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
  if (j.count("sweep")) {
    const json& s = j["sweep"];
    check_keys(s, {"scale", "translate", "rotate", "flip"}, "config.sweep");
    if (s.count("scale")) cfg.sweep.scale = s["scale"].get<std::vector<double>>();
    if (s.count("translate")) cfg.sweep.translate = s["translate"].get<std::vector<double>>();
    if (s.count("rotate")) cfg.sweep.rotate = s["rotate"].get<std::vector<double>>();
    if (s.count("flip")) cfg.sweep.flip = s["flip"].get<bool>();
  }
  if (j.count("window_sides")) cfg.window_sides = j["window_sides"].get<std::vector<int>>();
  if (j.count("window_stride")) cfg.window_stride = j["window_stride"].get<int>();

  cfg.grid.validate();
  cfg.strategy.validate();
  cfg.sgd.validate();
  return cfg;
}

// ---------------------------------------------------------------- inputs ---

struct NamedImage {
  std::string id;
  mop::ImageTensor pixels;
};

std::vector<NamedImage> load_images(const std::string& dir) {
  if (dir.empty()) throw std::invalid_argument("config: images_dir is required");
  if (!fs::is_directory(dir)) throw std::invalid_argument("not a directory: " + dir);
  std::vector<fs::path> paths;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    if (ext == ".pgm" || ext == ".ppm") paths.push_back(entry.path());
  }
  std::sort(paths.begin(), paths.end());
  if (paths.empty()) throw std::invalid_argument("no .pgm/.ppm images in " + dir);

  std::vector<NamedImage> images;
  std::set<std::string> seen;
  for (const auto& p : paths) {
    std::string id = p.stem().string();
    if (!seen.insert(id).second)
      throw std::invalid_argument("duplicate image id in " + dir + ": " + id);
    images.push_back({id, mop::read_pnm(p.string())});
  }
  return images;
}

std::map<std::string, std::string> read_labels(const std::string& path) {
  if (path.empty()) throw std::invalid_argument("config: labels file is required");
  json j = load_json_file(path);
  if (!j.is_object()) throw std::invalid_argument("labels file must be a JSON object: " + path);
  std::map<std::string, std::string> labels;
  for (const auto& [id, cls] : j.items()) labels[id] = cls.get<std::string>();
  return labels;
}

std::map<std::string, std::set<std::string>> read_relevance(const std::string& path) {
  json j = load_json_file(path);
  if (!j.is_object()) throw std::invalid_argument("relevance file must be a JSON object: " + path);
  std::map<std::string, std::set<std::string>> rel;
  for (const auto& [id, ids] : j.items()) {
    for (const auto& r : ids) rel[id].insert(r.get<std::string>());
  }
  return rel;
}

std::string label_for(const std::map<std::string, std::string>& labels, const std::string& id) {
  auto it = labels.find(id);
  if (it == labels.end()) throw std::invalid_argument("no label for image id: " + id);
  return it->second;
}

// Descriptor source + the ordered image ids it covers.
struct SourceBundle {
  std::unique_ptr<mop::DescriptorSource> source;
  std::vector<std::string> ids;
  std::vector<NamedImage> images;  // toy source only
};

SourceBundle open_source(const RunConfig& cfg, bool need_pixels) {
  SourceBundle b;
  if (cfg.source == "store") {
    if (need_pixels)
      throw std::invalid_argument("this command needs pixel images (source=toy), "
                                  "an activation store cannot be re-rendered");
    if (cfg.store_matrix.empty() || cfg.store_manifest.empty())
      throw std::invalid_argument("config: source=store needs store_matrix and store_manifest");
    auto store = std::make_unique<mop::ActivationStore>(
        mop::ActivationStore::load(cfg.store_matrix, cfg.store_manifest));
    b.ids = store->image_ids();
    b.source = std::move(store);
    return b;
  }
  b.images = load_images(cfg.images_dir);
  for (const auto& img : b.images) b.ids.push_back(img.id);
  b.source = std::make_unique<mop::ToyEmbedder>(cfg.toy);
  return b;
}

mop::ImageRef ref_for(const SourceBundle& b, std::size_t i) {
  mop::ImageRef ref;
  ref.id = b.ids[i];
  if (!b.images.empty()) ref.pixels = &b.images[i].pixels;
  return ref;
}

// ---------------------------------------------------------------- output ---

void ensure_out_dir(const std::string& out) {
  if (!out.empty()) fs::create_directories(out);
}

std::string out_path(const std::string& out, const std::string& name) {
  return out.empty() ? name : (fs::path(out) / name).string();
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::invalid_argument("cannot open for writing: " + path);
  out << text;
  if (!out) throw std::invalid_argument("write failed: " + path);
}

// Feature files come in pairs <base>.mopd / <base>.json; accept either the
// base or the .mopd path.
std::pair<std::string, std::string> feature_paths(std::string base) {
  if (base.size() > 5 && base.ends_with(".mopd")) base.resize(base.size() - 5);
  return {base + ".mopd", base + ".json"};
}

// --------------------------------------------------------------- helpers ---

std::map<mop::Level, mop::PerImageDescriptors> gather_training(
    const RunConfig& cfg, const SourceBundle& bundle) {
  std::map<mop::Level, mop::PerImageDescriptors> training;
  for (mop::Level level : cfg.strategy.sorted_levels()) {
    mop::PerImageDescriptors per_image(bundle.ids.size());
    for (std::size_t i = 0; i < bundle.ids.size(); ++i)
      per_image[i] = mop::level_descriptors(cfg.grid, level, *bundle.source, ref_for(bundle, i));
    training[level] = std::move(per_image);
  }
  return training;
}

void check_model_matches_config(const mop::MopPipelineModel& model, const RunConfig& cfg) {
  if (!(model.grid == cfg.grid) || !(model.vlad == cfg.vlad) || model.method != cfg.method ||
      !(model.strategy == cfg.strategy))
    throw mop::FingerprintError(
        "model does not match the config (grid/vlad/method/strategy differ); "
        "re-run fit or fix the config");
}

void check_same_fingerprint(const std::string& a, const std::string& b, const std::string& what) {
  if (a != b)
    throw mop::FingerprintError(what + ": fingerprint mismatch (" + a + " vs " + b + ")");
}

int class_index(const std::vector<std::string>& names, const std::string& cls) {
  auto it = std::lower_bound(names.begin(), names.end(), cls);
  if (it == names.end() || *it != cls)
    throw std::invalid_argument("class \"" + cls + "\" is not among the trained classes");
  return static_cast<int>(it - names.begin());
}

mop::FitConfig fit_config_of(const RunConfig& cfg) {
  mop::FitConfig f;
  f.grid = cfg.grid;
  f.vlad = cfg.vlad;
  f.method = cfg.method;
  f.strategy = cfg.strategy;
  f.patch_pca_dim = cfg.patch_pca_dim;
  f.pooled_pca_dim = cfg.pooled_pca_dim;
  f.kmeans_k = cfg.kmeans_k;
  f.kmeans_max_iters = cfg.kmeans_max_iters;
  f.kmeans_tol = cfg.kmeans_tol;
  f.seed = cfg.seed;
  return f;
}

// ------------------------------------------------------------- commands ---

int cmd_fit(const RunConfig& cfg, const std::string& out) {
  ensure_out_dir(out);
  SourceBundle bundle = open_source(cfg, false);
  auto training = gather_training(cfg, bundle);

  mop::FitReport report;
  mop::MopPipelineModel model = mop::fit_pipeline(training, fit_config_of(cfg), &report);
  std::string model_path = out_path(out, "model.mopm");
  mop::save_pipeline_model(model_path, model);

  json rep{{"fingerprint", model.fingerprint},
           {"seed", cfg.seed},
           {"images", bundle.ids.size()},
           {"effective_dims", report.effective_dims},
           {"kmeans_iterations", report.kmeans_iterations},
           {"kmeans_seeds", report.kmeans_seeds}};
  write_text_file(out_path(out, "fit_report.json"), rep.dump(2) + "\n");

  std::cout << "fit: " << bundle.ids.size() << " images -> " << model_path << " (fingerprint "
            << model.fingerprint << ")\n";
  return 0;
}

int cmd_encode(const RunConfig& cfg, const std::string& out, const std::string& model_path,
               const std::string& prefix) {
  ensure_out_dir(out);
  mop::MopPipelineModel model = mop::load_pipeline_model(model_path);
  check_model_matches_config(model, cfg);
  SourceBundle bundle = open_source(cfg, false);

  mop::FeatureSet set;
  set.image_ids = bundle.ids;
  set.model_fingerprint = model.fingerprint;
  for (std::size_t i = 0; i < bundle.ids.size(); ++i) {
    mop::MopDescriptor d =
        mop::encode_image(model, model.strategy, model.method, *bundle.source, ref_for(bundle, i));
    if (i == 0) {
      set.layout = d.layout;
      set.features = mop::Matrix(bundle.ids.size(), d.values.size());
    } else if (d.values.size() != set.features.cols) {
      throw mop::NumericalError("encode: inconsistent descriptor length for image " +
                                bundle.ids[i]);
    }
    std::copy(d.values.begin(), d.values.end(), set.features.row(i));
  }

  auto [matrix_path, sidecar_path] = feature_paths(out_path(out, prefix));
  mop::save_feature_set(matrix_path, sidecar_path, set);
  std::cout << "encode: " << set.features.rows << " images x " << set.features.cols
            << " dims -> " << matrix_path << "\n";
  return 0;
}

int cmd_classify(const RunConfig& cfg, const std::string& out, const std::string& model_path,
                 const std::string& train_base, const std::string& test_base) {
  ensure_out_dir(out);
  mop::MopPipelineModel model = mop::load_pipeline_model(model_path);
  auto [train_m, train_s] = feature_paths(train_base);
  auto [test_m, test_s] = feature_paths(test_base);
  mop::FeatureSet train = mop::load_feature_set(train_m, train_s);
  mop::FeatureSet test = mop::load_feature_set(test_m, test_s);
  check_same_fingerprint(train.model_fingerprint, model.fingerprint, "train features vs model");
  check_same_fingerprint(test.model_fingerprint, model.fingerprint, "test features vs model");

  auto labels = read_labels(cfg.labels_path);
  std::vector<std::string> train_labels;
  for (const auto& id : train.image_ids) train_labels.push_back(label_for(labels, id));

  mop::SgdConfig sgd = cfg.sgd;
  sgd.seed = cfg.seed;
  mop::SvmModel svm = mop::svm_train(train.features, train_labels, sgd);
  svm.model_fingerprint = model.fingerprint;
  mop::save_svm_model(out_path(out, "svm.mopm"), svm);

  auto count_correct = [&svm](const mop::Matrix& x, const std::vector<int>& y) {
    std::size_t correct = 0;
    for (std::size_t i = 0; i < x.rows; ++i)
      if (mop::svm_predict(svm, x.row_span(i)).label == y[i]) ++correct;
    return correct;
  };
  std::vector<int> train_idx, test_idx;
  for (const auto& l : train_labels) train_idx.push_back(class_index(svm.class_names, l));
  for (const auto& id : test.image_ids)
    test_idx.push_back(class_index(svm.class_names, label_for(labels, id)));
  std::size_t train_correct = count_correct(train.features, train_idx);
  std::size_t test_correct = count_correct(test.features, test_idx);
  double train_acc = static_cast<double>(train_correct) / static_cast<double>(train.features.rows);
  double test_acc = static_cast<double>(test_correct) / static_cast<double>(test.features.rows);

  std::string levels;
  for (mop::Level l : cfg.strategy.sorted_levels()) {
    if (!levels.empty()) levels += "+";
    levels += std::to_string(mop::level_number(l));
  }
  std::ostringstream csv;
  csv << "method,mode,levels,split,accuracy,correct,total\n";
  csv << mop::pooling_method_name(cfg.method) << "," << mop::scale_mode_name(cfg.strategy.mode)
      << "," << levels << ",train," << format_double(train_acc) << "," << train_correct << ","
      << train.features.rows << "\n";
  csv << mop::pooling_method_name(cfg.method) << "," << mop::scale_mode_name(cfg.strategy.mode)
      << "," << levels << ",test," << format_double(test_acc) << "," << test_correct << ","
      << test.features.rows << "\n";
  write_text_file(out_path(out, "classify.csv"), csv.str());

  std::cout << "classify: train accuracy " << format_double(train_acc) << ", test accuracy "
            << format_double(test_acc) << " (" << svm.class_names.size() << " classes) -> "
            << out_path(out, "classify.csv") << "\n";
  return 0;
}

int cmd_retrieve(const RunConfig& cfg, const std::string& out, const std::string& db_base,
                 const std::string& query_base) {
  ensure_out_dir(out);
  auto [db_m, db_s] = feature_paths(db_base);
  auto [q_m, q_s] = feature_paths(query_base);
  mop::FeatureSet db = mop::load_feature_set(db_m, db_s);
  mop::FeatureSet queries = mop::load_feature_set(q_m, q_s);
  check_same_fingerprint(db.model_fingerprint, queries.model_fingerprint,
                         "db features vs query features");

  std::map<std::string, std::set<std::string>> relevance;
  if (!cfg.relevance_path.empty()) {
    relevance = read_relevance(cfg.relevance_path);
  } else if (!cfg.labels_path.empty()) {
    // Same-class db items are relevant; the query itself never counts.
    auto labels = read_labels(cfg.labels_path);
    for (const auto& qid : queries.image_ids) {
      std::string cls = label_for(labels, qid);
      for (const auto& did : db.image_ids)
        if (did != qid && label_for(labels, did) == cls) relevance[qid].insert(did);
    }
  } else {
    throw std::invalid_argument("config: retrieve needs either relevance or labels");
  }

  std::ostringstream csv;
  csv << "representation,query_id,ap\n";
  std::ostringstream summary;

  auto run = [&](const std::string& name, const mop::Matrix& dbf, const mop::Matrix& qf) {
    mop::RetrievalResult r =
        mop::retrieve(dbf, db.image_ids, qf, queries.image_ids, relevance);
    for (const auto& q : r.per_query)
      csv << name << "," << q.query_id << "," << format_double(q.average_precision) << "\n";
    csv << name << ",mAP," << format_double(r.mean_ap) << "\n";
    if (summary.tellp() > 0) summary << ", ";
    summary << name << " mAP " << format_double(r.mean_ap);
  };

  run("raw", db.features, queries.features);
  if (cfg.final_pca_dim > 0) {
    mop::PcaModel pca =
        mop::pca_fit(db.features, cfg.final_pca_dim, cfg.final_pca_whiten);
    std::string name = "pca" + std::to_string(pca.out_dim()) + (pca.whiten ? "w" : "");
    run(name, mop::pca_transform_batch(pca, db.features),
        mop::pca_transform_batch(pca, queries.features));
  }
  write_text_file(out_path(out, "retrieval.csv"), csv.str());
  std::cout << "retrieve: " << summary.str() << " -> " << out_path(out, "retrieval.csv") << "\n";
  return 0;
}

int cmd_invariance(const RunConfig& cfg, const std::string& out, const std::string& model_path,
                   const std::string& svm_path) {
  ensure_out_dir(out);
  mop::MopPipelineModel model = mop::load_pipeline_model(model_path);
  check_model_matches_config(model, cfg);
  mop::SvmModel svm = mop::load_svm_model(svm_path);
  check_same_fingerprint(svm.model_fingerprint, model.fingerprint, "svm vs model");

  SourceBundle bundle = open_source(cfg, true);
  auto labels = read_labels(cfg.labels_path);
  std::vector<mop::ImageTensor> images;
  std::vector<int> truth;
  for (std::size_t i = 0; i < bundle.ids.size(); ++i) {
    images.push_back(bundle.images[i].pixels);
    truth.push_back(class_index(svm.class_names, label_for(labels, bundle.ids[i])));
  }

  std::vector<mop::TransformSpec> sweep;
  for (double v : cfg.sweep.scale) sweep.push_back({mop::TransformKind::Scale, v});
  for (double v : cfg.sweep.translate) sweep.push_back({mop::TransformKind::TranslateH, v});
  for (double v : cfg.sweep.translate) sweep.push_back({mop::TransformKind::TranslateV, v});
  if (cfg.sweep.flip) sweep.push_back({mop::TransformKind::Flip, 0.0});
  for (double v : cfg.sweep.rotate) sweep.push_back({mop::TransformKind::Rotate, v});

  std::vector<mop::InvarianceCell> cells =
      mop::invariance_sweep(model, svm, *bundle.source, images, truth, sweep);

  std::ostringstream csv;
  csv << "kind,parameter,accuracy,correct,total\n";
  for (const auto& c : cells)
    csv << mop::transform_kind_name(c.kind) << "," << format_double(c.parameter) << ","
        << format_double(c.accuracy) << "," << c.correct << "," << c.total << "\n";
  write_text_file(out_path(out, "invariance.csv"), csv.str());

  std::cout << "invariance: " << cells.size() << " cells over " << images.size()
            << " images -> " << out_path(out, "invariance.csv") << "\n";
  return 0;
}

int cmd_windows(const RunConfig& cfg, const std::string& out, const std::string& model_path,
                const std::string& svm_path, const std::string& image_path,
                const std::string& target) {
  ensure_out_dir(out);
  mop::MopPipelineModel model = mop::load_pipeline_model(model_path);
  check_model_matches_config(model, cfg);
  mop::SvmModel svm = mop::load_svm_model(svm_path);
  check_same_fingerprint(svm.model_fingerprint, model.fingerprint, "svm vs model");
  if (cfg.source != "toy")
    throw std::invalid_argument("windows needs pixel images (source=toy)");

  mop::ImageTensor image = mop::read_pnm(image_path);
  mop::ToyEmbedder source(cfg.toy);
  int cls = class_index(svm.class_names, target);
  mop::WindowResult best = mop::best_window(model, svm, source, image, cfg.window_sides,
                                            cfg.window_stride, cls);

  std::ostringstream csv;
  csv << "image,class,x,y,side,score,windows_scored\n";
  csv << fs::path(image_path).stem().string() << "," << target << "," << best.window.x << ","
      << best.window.y << "," << best.window.side << "," << format_double(best.score) << ","
      << best.windows_scored << "\n";
  write_text_file(out_path(out, "windows.csv"), csv.str());

  std::cout << "windows: best " << best.window.side << "x" << best.window.side << " at ("
            << best.window.x << "," << best.window.y << ") score " << format_double(best.score)
            << " over " << best.windows_scored << " windows -> " << out_path(out, "windows.csv")
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mop: multi-scale orderless pooling pipeline"};
  app.footer(kConfigKeyHelp);
  app.require_subcommand(1);

  std::string config_path, out_dir = ".";
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = 0;
  app.add_option("--config", config_path, "JSON run config (see footer for keys)")
      ->required();
  app.add_option("--out", out_dir, "output directory (default: current)");
  app.add_option("--seed", seed, "master seed override")->each([&](const std::string&) {
    seed_set = true;
  });
  app.add_option("--threads", threads, "worker thread cap (0 = library default)");

  std::string model_path, svm_path, prefix = "features", train_base, test_base;
  std::string db_base, query_base, image_path, target_class, images_override;

  CLI::App* fit = app.add_subcommand("fit", "fit PCA/codebook/pooling models");
  fit->add_option("--images", images_override, "override config images_dir");

  CLI::App* encode = app.add_subcommand("encode", "encode images into MOP features");
  encode->add_option("--model", model_path, "fitted model (.mopm)")->required();
  encode->add_option("--prefix", prefix, "feature file prefix (default: features)");
  encode->add_option("--images", images_override, "override config images_dir");

  CLI::App* classify = app.add_subcommand("classify", "train and evaluate the one-vs-all SVM");
  classify->add_option("--model", model_path, "fitted model (.mopm)")->required();
  classify->add_option("--train", train_base, "training features (<base>.mopd/.json)")->required();
  classify->add_option("--test", test_base, "test features (<base>.mopd/.json)")->required();

  CLI::App* retrieve = app.add_subcommand("retrieve", "nearest-neighbor retrieval with mAP");
  retrieve->add_option("--db", db_base, "database features (<base>.mopd/.json)")->required();
  retrieve->add_option("--queries", query_base, "query features (<base>.mopd/.json)")->required();

  CLI::App* invariance = app.add_subcommand("invariance", "transform-sweep accuracy study");
  invariance->add_option("--model", model_path, "fitted model (.mopm)")->required();
  invariance->add_option("--svm", svm_path, "trained classifier (.mopm)")->required();
  invariance->add_option("--images", images_override, "override config images_dir");

  CLI::App* windows = app.add_subcommand("windows", "best-window search for one image");
  windows->add_option("--model", model_path, "fitted model (.mopm)")->required();
  windows->add_option("--svm", svm_path, "trained classifier (.mopm)")->required();
  windows->add_option("--image", image_path, "input image (.pgm/.ppm)")->required();
  windows->add_option("--class", target_class, "target class name")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;  // usage errors are invalid input
  }

  try {
#ifdef _OPENMP
    if (threads > 0) omp_set_num_threads(threads);
#endif
    RunConfig cfg = parse_config(config_path);
    if (seed_set) cfg.seed = seed;
    if (!images_override.empty()) cfg.images_dir = images_override;

    if (fit->parsed()) return cmd_fit(cfg, out_dir);
    if (encode->parsed()) return cmd_encode(cfg, out_dir, model_path, prefix);
    if (classify->parsed()) return cmd_classify(cfg, out_dir, model_path, train_base, test_base);
    if (retrieve->parsed()) return cmd_retrieve(cfg, out_dir, db_base, query_base);
    if (invariance->parsed()) return cmd_invariance(cfg, out_dir, model_path, svm_path);
    if (windows->parsed())
      return cmd_windows(cfg, out_dir, model_path, svm_path, image_path, target_class);
    std::cerr << "error: no command\n";
    return 2;
  } catch (const mop::FingerprintError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const mop::NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

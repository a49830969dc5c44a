#include "mop/eval.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

#include "mop/errors.hpp"
#include "mop/kernels.hpp"
#include "mop/model_io.hpp"
#include "mop/rng.hpp"

namespace mop {

namespace {

double dot_aug(std::span<const double> w, std::span<const double> x) {
  double s = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) s += w[j] * x[j];
  return s + w[x.size()];  // bias times the implicit constant 1
}

// One class's full SGD run; the stream is private to the class so parallel
// training over classes reproduces the serial result bit for bit.
void train_one_class(const Matrix& x, const std::vector<int>& targets, const SgdConfig& cfg,
                     std::uint64_t seed, std::span<double> w) {
  SplitMix64 rng(seed);
  const std::size_t n = x.rows;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    double rate = cfg.eta / (1.0 + static_cast<double>(epoch) * cfg.lambda * cfg.eta);
    std::vector<std::size_t> order = shuffled_indices(n, rng);
    for (std::size_t i : order) {
      double y = targets[i];
      double margin = y * dot_aug(w, x.row_span(i));
      double keep = 1.0 - rate * cfg.lambda;
      for (double& wj : w) wj *= keep;
      if (margin < 1.0) {
        double step = rate * y;
        auto row = x.row_span(i);
        for (std::size_t j = 0; j < row.size(); ++j) w[j] += step * row[j];
        w[row.size()] += step;
      }
    }
  }
}

}  // namespace

void SgdConfig::validate() const {
  if (lambda < 0.0) throw std::invalid_argument("SgdConfig: lambda must be >= 0");
  if (!(eta > 0.0)) throw std::invalid_argument("SgdConfig: eta must be > 0");
  if (epochs < 1) throw std::invalid_argument("SgdConfig: epochs must be >= 1");
}

SvmModel svm_train(const Matrix& features, const std::vector<std::string>& labels,
                   const SgdConfig& cfg) {
  cfg.validate();
  if (features.rows != labels.size())
    throw std::invalid_argument("svm_train: label count does not match feature rows");
  if (features.rows < 2) throw std::invalid_argument("svm_train: needs at least 2 samples");

  SvmModel model;
  model.config = cfg;
  model.class_names.assign(labels.begin(), labels.end());
  std::sort(model.class_names.begin(), model.class_names.end());
  model.class_names.erase(std::unique(model.class_names.begin(), model.class_names.end()),
                          model.class_names.end());
  if (model.class_names.size() < 2)
    throw std::invalid_argument("svm_train: needs at least 2 classes, got " +
                                std::to_string(model.class_names.size()));

  std::vector<int> class_of(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto it = std::lower_bound(model.class_names.begin(), model.class_names.end(), labels[i]);
    class_of[i] = static_cast<int>(it - model.class_names.begin());
  }

  const std::size_t n_classes = model.class_names.size();
  model.weights = Matrix(n_classes, features.cols + 1);

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(n_classes); ++c) {
    std::vector<int> targets(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i)
      targets[i] = class_of[i] == static_cast<int>(c) ? 1 : -1;
    train_one_class(features, targets, cfg, cfg.seed + static_cast<std::uint64_t>(c),
                    model.weights.row_span(static_cast<std::size_t>(c)));
  }

  for (double v : model.weights.data)
    if (!std::isfinite(v)) throw NumericalError("svm_train: non-finite weights after training");
  return model;
}

Prediction svm_predict(const SvmModel& model, std::span<const double> x) {
  if (x.size() != model.dim())
    throw std::invalid_argument("svm_predict: feature dim " + std::to_string(x.size()) +
                                " does not match model dim " + std::to_string(model.dim()));
  Prediction p;
  p.scores.resize(model.classes());
  for (std::size_t c = 0; c < model.classes(); ++c)
    p.scores[c] = dot_aug(model.weights.row_span(c), x);
  p.label = static_cast<int>(std::max_element(p.scores.begin(), p.scores.end()) -
                             p.scores.begin());  // max_element keeps the first of equals
  return p;
}

Prediction ten_crop_predict(const SvmModel& model, const Matrix& crop_features) {
  if (crop_features.rows != 10)
    throw std::invalid_argument("ten_crop_predict: expected 10 crop rows, got " +
                                std::to_string(crop_features.rows));
  Prediction p;
  p.scores.assign(model.classes(), 0.0);
  for (std::size_t i = 0; i < crop_features.rows; ++i) {
    Prediction one = svm_predict(model, crop_features.row_span(i));
    for (std::size_t c = 0; c < p.scores.size(); ++c) p.scores[c] += one.scores[c];
  }
  for (double& s : p.scores) s /= 10.0;
  p.label = static_cast<int>(std::max_element(p.scores.begin(), p.scores.end()) -
                             p.scores.begin());
  return p;
}

double accuracy(const SvmModel& model, const Matrix& features, const std::vector<int>& labels) {
  if (features.rows != labels.size())
    throw std::invalid_argument("accuracy: label count does not match feature rows");
  if (features.rows == 0) throw std::invalid_argument("accuracy: empty evaluation set");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < features.rows; ++i)
    if (svm_predict(model, features.row_span(i)).label == labels[i]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(features.rows);
}

double hinge_objective(std::span<const double> w_aug, const Matrix& features,
                       const std::vector<int>& targets, double lambda) {
  if (w_aug.size() != features.cols + 1)
    throw std::invalid_argument("hinge_objective: weight size must be feature dim + 1");
  if (features.rows != targets.size())
    throw std::invalid_argument("hinge_objective: target count does not match feature rows");
  double reg = 0.0;
  for (double w : w_aug) reg += w * w;
  double loss = 0.0;
  for (std::size_t i = 0; i < features.rows; ++i) {
    double margin = targets[i] * dot_aug(w_aug, features.row_span(i));
    loss += std::max(0.0, 1.0 - margin);
  }
  return 0.5 * lambda * reg + loss / static_cast<double>(features.rows);
}

double average_precision(const std::vector<bool>& relevant_at_rank) {
  std::size_t hits = 0;
  double sum = 0.0;
  for (std::size_t i = 0; i < relevant_at_rank.size(); ++i) {
    if (relevant_at_rank[i]) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(i + 1);
    }
  }
  return hits == 0 ? 0.0 : sum / static_cast<double>(hits);
}

RetrievalResult retrieve(const Matrix& db, const std::vector<std::string>& db_ids,
                         const Matrix& queries, const std::vector<std::string>& query_ids,
                         const std::map<std::string, std::set<std::string>>& relevance) {
  if (db.rows == 0) throw std::invalid_argument("retrieve: empty database");
  if (db.rows != db_ids.size())
    throw std::invalid_argument("retrieve: db id count does not match db rows");
  if (queries.rows != query_ids.size())
    throw std::invalid_argument("retrieve: query id count does not match query rows");
  if (queries.cols != db.cols)
    throw std::invalid_argument("retrieve: query dim " + std::to_string(queries.cols) +
                                " does not match db dim " + std::to_string(db.cols));
  for (const auto& id : query_ids) {
    auto it = relevance.find(id);
    if (it == relevance.end() || it->second.empty())
      throw std::invalid_argument("retrieve: no relevance set for query " + id);
  }

  Matrix d2;
  kernels::pairwise_sqdist(queries, db, d2);

  RetrievalResult result;
  result.per_query.resize(queries.rows);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t qi = 0; qi < static_cast<std::ptrdiff_t>(queries.rows); ++qi) {
    std::size_t q = static_cast<std::size_t>(qi);
    QueryRetrieval& out = result.per_query[q];
    out.query_id = query_ids[q];
    out.ranking.reserve(db.rows);
    for (std::size_t j = 0; j < db.rows; ++j) {
      if (db_ids[j] == query_ids[q]) continue;  // never ranked against itself
      out.ranking.push_back({j, std::sqrt(d2.at(q, j))});
    }
    std::sort(out.ranking.begin(), out.ranking.end(),
              [](const RankedItem& a, const RankedItem& b) {
                return a.distance != b.distance ? a.distance < b.distance
                                                : a.db_index < b.db_index;
              });
    const std::set<std::string>& rel = relevance.at(query_ids[q]);
    std::vector<bool> flags(out.ranking.size());
    for (std::size_t r = 0; r < out.ranking.size(); ++r)
      flags[r] = rel.count(db_ids[out.ranking[r].db_index]) > 0;
    out.average_precision = average_precision(flags);
  }

  double total = 0.0;
  for (const auto& q : result.per_query) total += q.average_precision;
  result.mean_ap = result.per_query.empty() ? 0.0
                                            : total / static_cast<double>(result.per_query.size());
  return result;
}

WindowResult best_window(const MopPipelineModel& model, const SvmModel& svm,
                         const DescriptorSource& source, const ImageTensor& image,
                         const std::vector<int>& sides, int stride, int target_class) {
  if (image.width != image.height)
    throw std::invalid_argument("best_window: image must be square");
  if (target_class < 0 || static_cast<std::size_t>(target_class) >= svm.classes())
    throw std::invalid_argument("best_window: target class index out of range");

  std::vector<PatchSpec> windows = sliding_windows(image.width, sides, stride);
  WindowResult best;
  best.windows_scored = windows.size();
  bool have = false;
  for (const PatchSpec& w : windows) {
    ImageTensor patch = crop(image, w.x, w.y, w.side, w.side);
    ImageTensor frame = resize_bilinear(patch, model.grid.frame, model.grid.frame);
    ImageRef ref{"", &frame};
    MopDescriptor feat = encode_image(model, model.strategy, model.method, source, ref);
    Prediction p = svm_predict(svm, feat.values);
    double score = p.scores[static_cast<std::size_t>(target_class)];
    if (!have || score > best.score) {  // strict: ties keep the earliest window
      have = true;
      best.window = w;
      best.score = score;
      best.scores = p.scores;
    }
  }
  if (!have) throw std::invalid_argument("best_window: no windows to score");
  return best;
}

std::vector<InvarianceCell> invariance_sweep(const MopPipelineModel& model, const SvmModel& svm,
                                             const DescriptorSource& source,
                                             const std::vector<ImageTensor>& test_images,
                                             const std::vector<int>& test_labels,
                                             const std::vector<TransformSpec>& sweep) {
  if (test_images.size() != test_labels.size())
    throw std::invalid_argument("invariance_sweep: label count does not match image count");
  if (test_images.empty()) throw std::invalid_argument("invariance_sweep: no test images");

  std::vector<InvarianceCell> cells;
  cells.reserve(sweep.size());
  for (const TransformSpec& spec : sweep) {
    InvarianceCell cell;
    cell.kind = spec.kind;
    cell.parameter = spec.parameter;
    cell.total = test_images.size();
    for (std::size_t i = 0; i < test_images.size(); ++i) {
      ImageTensor transformed = apply_transform(test_images[i], spec);
      ImageRef ref{"", &transformed};
      MopDescriptor feat = encode_image(model, model.strategy, model.method, source, ref);
      if (svm_predict(svm, feat.values).label == test_labels[i]) ++cell.correct;
    }
    cell.accuracy = static_cast<double>(cell.correct) / static_cast<double>(cell.total);
    cells.push_back(cell);
  }
  return cells;
}

void save_svm_model(const std::string& path, const SvmModel& model) {
  ModelFile file;
  nlohmann::json meta{{"format", 1},
                      {"lambda", model.config.lambda},
                      {"eta", model.config.eta},
                      {"epochs", model.config.epochs},
                      {"seed", model.config.seed},
                      {"class_names", model.class_names},
                      {"model_fingerprint", model.model_fingerprint}};
  file.json_sections["svm"] = meta.dump();
  file.matrix_sections["svm.weights"] = model.weights;
  write_model_file(path, file);
}

SvmModel load_svm_model(const std::string& path) {
  ModelFile file = read_model_file(path);
  if (!file.json_sections.count("svm"))
    throw std::invalid_argument("not an svm model file (no 'svm' section): " + path);
  nlohmann::json meta = nlohmann::json::parse(file.json_sections.at("svm"));
  SvmModel model;
  model.config.lambda = meta.at("lambda").get<double>();
  model.config.eta = meta.at("eta").get<double>();
  model.config.epochs = meta.at("epochs").get<std::size_t>();
  model.config.seed = meta.at("seed").get<std::uint64_t>();
  model.class_names = meta.at("class_names").get<std::vector<std::string>>();
  model.model_fingerprint = meta.at("model_fingerprint").get<std::string>();
  model.weights = file.matrix_sections.at("svm.weights");
  if (model.weights.rows != model.class_names.size())
    throw std::invalid_argument("svm model file: weight rows do not match class names: " + path);
  return model;
}

}  // namespace mop

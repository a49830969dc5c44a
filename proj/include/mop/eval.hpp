#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "mop/image.hpp"
#include "mop/matrix.hpp"
#include "mop/pooling.hpp"

namespace mop {

// Hyperparameters of the one-vs-all hinge-loss SGD trainer.
struct SgdConfig {
  double lambda = 1e-5;    // L2 regularization
  double eta = 0.2;        // base learning rate
  std::size_t epochs = 100;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const SgdConfig&) const = default;
};

// One-vs-all linear classifier. Row c of `weights` holds class c's weight
// vector with the bias as the trailing coordinate (features are augmented
// with a constant 1). Classes are sorted label strings; per-class score
// ties resolve to the lower class index.
struct SvmModel {
  Matrix weights;  // classes x (dim + 1)
  std::vector<std::string> class_names;
  SgdConfig config;
  std::string model_fingerprint;  // pipeline fingerprint the SVM was trained on

  std::size_t classes() const { return weights.rows; }
  std::size_t dim() const { return weights.cols == 0 ? 0 : weights.cols - 1; }
};

struct Prediction {
  int label = -1;
  std::vector<double> scores;
};

// Trains one-vs-all hinge SGD: targets +/-1, per-epoch Fisher-Yates shuffle,
// learning rate eta/(1 + epoch*lambda*eta) with 0-based epochs, update
// w <- (1 - rate*lambda) w + [margin < 1] rate*y*x. Class c's sample order
// comes from its own stream seeded with cfg.seed + c, so classes can train
// in parallel and results are independent of thread count.
SvmModel svm_train(const Matrix& features, const std::vector<std::string>& labels,
                   const SgdConfig& cfg);

// Argmax of per-class scores w.x + b; ties to the lower class index.
Prediction svm_predict(const SvmModel& model, std::span<const double> x);

// Averages the per-class scores over exactly 10 crop feature rows, then
// takes the argmax.
Prediction ten_crop_predict(const SvmModel& model, const Matrix& crop_features);

// Fraction of rows whose predicted label index equals `labels`.
double accuracy(const SvmModel& model, const Matrix& features, const std::vector<int>& labels);

// Regularized hinge objective lambda/2 ||w||^2 + mean_i max(0, 1 - y_i w.x_i)
// for one augmented weight vector and +/-1 targets.
double hinge_objective(std::span<const double> w_aug, const Matrix& features,
                       const std::vector<int>& targets, double lambda);

struct RankedItem {
  std::size_t db_index = 0;
  double distance = 0.0;
};

struct QueryRetrieval {
  std::string query_id;
  std::vector<RankedItem> ranking;  // ascending distance, ties by db index
  double average_precision = 0.0;
};

struct RetrievalResult {
  std::vector<QueryRetrieval> per_query;
  double mean_ap = 0.0;
};

// AP over one ranked list: mean of precision-at-rank over the ranks holding
// relevant items. A list with no relevant items scores 0.
double average_precision(const std::vector<bool>& relevant_at_rank);

// Euclidean nearest-neighbor retrieval. Each query ranks the whole database
// except entries sharing its own id; relevance names the db ids that count
// as correct for the query and must be non-empty. mAP is the plain mean of
// per-query APs.
RetrievalResult retrieve(const Matrix& db, const std::vector<std::string>& db_ids,
                         const Matrix& queries, const std::vector<std::string>& query_ids,
                         const std::map<std::string, std::set<std::string>>& relevance);

struct WindowResult {
  PatchSpec window;
  double score = 0.0;
  std::vector<double> scores;        // per-class scores of the best window
  std::size_t windows_scored = 0;
};

// Scores every sliding window of the image (each resampled to the model's
// frame, encoded, classified) and returns the window with the highest
// target-class score; ties keep the earliest window in enumeration order.
WindowResult best_window(const MopPipelineModel& model, const SvmModel& svm,
                         const DescriptorSource& source, const ImageTensor& image,
                         const std::vector<int>& sides, int stride, int target_class);

struct InvarianceCell {
  TransformKind kind = TransformKind::Flip;
  double parameter = 0.0;
  double accuracy = 0.0;
  std::size_t correct = 0;
  std::size_t total = 0;
};

// For each transform in the sweep: transform every test image, encode it
// with the pipeline, classify, and record the accuracy. Identity parameters
// reproduce the untransformed images byte-exactly, so their cells match the
// baseline accuracy exactly.
std::vector<InvarianceCell> invariance_sweep(const MopPipelineModel& model, const SvmModel& svm,
                                             const DescriptorSource& source,
                                             const std::vector<ImageTensor>& test_images,
                                             const std::vector<int>& test_labels,
                                             const std::vector<TransformSpec>& sweep);

// SVM persistence on top of the model-file container.
void save_svm_model(const std::string& path, const SvmModel& model);
SvmModel load_svm_model(const std::string& path);

}  // namespace mop

#include "mop/encoding.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "mop/errors.hpp"
#include "mop/rng.hpp"

namespace mop {

namespace {

using EigenRowMajor =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace

PcaModel pca_fit(const Matrix& samples, std::size_t d_out, bool whiten, double epsilon) {
  const std::size_t n = samples.rows;
  const std::size_t d_in = samples.cols;
  if (n < 2) throw std::invalid_argument("pca_fit: need at least 2 samples");
  if (d_out < 1) throw std::invalid_argument("pca_fit: d_out must be >= 1");

  const std::size_t effective = std::min({d_out, n - 1, d_in});

  PcaModel model;
  model.whiten = whiten;
  model.epsilon = epsilon;
  model.mean.assign(d_in, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = samples.row(i);
    for (std::size_t j = 0; j < d_in; ++j) model.mean[j] += row[j];
  }
  for (double& m : model.mean) m /= static_cast<double>(n);

  EigenRowMajor centered(n, d_in);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d_in; ++j)
      centered(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          samples.at(i, j) - model.mean[j];

  // Thin SVD of the centered data; right singular vectors are the principal
  // directions, singular values squared over N-1 the eigenvalues.
  Eigen::BDCSVD<EigenRowMajor> svd(centered, Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success)
    throw NumericalError("pca_fit: SVD failed to converge");
  const auto& sv = svd.singularValues();
  const auto& v = svd.matrixV();

  model.components = Matrix(effective, d_in);
  model.eigenvalues.assign(effective, 0.0);
  for (std::size_t r = 0; r < effective; ++r) {
    const Eigen::Index rr = static_cast<Eigen::Index>(r);
    model.eigenvalues[r] = sv(rr) * sv(rr) / static_cast<double>(n - 1);
    // Sign fix: the largest-magnitude entry of each component (first index
    // on ties) is made positive.
    std::size_t arg = 0;
    double best = std::abs(v(0, rr));
    for (std::size_t j = 1; j < d_in; ++j) {
      double a = std::abs(v(static_cast<Eigen::Index>(j), rr));
      if (a > best) {
        best = a;
        arg = j;
      }
    }
    const double sign = v(static_cast<Eigen::Index>(arg), rr) < 0.0 ? -1.0 : 1.0;
    for (std::size_t j = 0; j < d_in; ++j)
      model.components.at(r, j) = sign * v(static_cast<Eigen::Index>(j), rr);
  }
  for (double ev : model.eigenvalues)
    if (!std::isfinite(ev)) throw NumericalError("pca_fit: non-finite eigenvalue");
  return model;
}

namespace {

std::vector<double> whitening_scale(const PcaModel& model) {
  if (!model.whiten) return {};
  std::vector<double> scale(model.out_dim());
  for (std::size_t i = 0; i < scale.size(); ++i)
    scale[i] = 1.0 / std::sqrt(model.eigenvalues[i] + model.epsilon);
  return scale;
}

}  // namespace

std::vector<double> pca_transform(const PcaModel& model, std::span<const double> v) {
  if (v.size() != model.in_dim())
    throw std::invalid_argument("pca_transform: expected dim " + std::to_string(model.in_dim()) +
                                ", got " + std::to_string(v.size()));
  const std::vector<double> scale = whitening_scale(model);
  std::vector<double> out(model.out_dim());
  for (std::size_t r = 0; r < model.out_dim(); ++r) {
    const double* comp = model.components.row(r);
    double acc = 0.0;
    for (std::size_t j = 0; j < model.in_dim(); ++j) acc += comp[j] * (v[j] - model.mean[j]);
    out[r] = scale.empty() ? acc : acc * scale[r];
  }
  return out;
}

Matrix pca_transform_batch(const PcaModel& model, const Matrix& rows) {
  if (rows.cols != model.in_dim())
    throw std::invalid_argument("pca_transform_batch: dimension mismatch");
  const std::vector<double> scale = whitening_scale(model);
  Matrix out;
  kernels::project_rows(rows, model.mean, model.components, scale, out);
  return out;
}

namespace {

// k-means++ seeding: first center uniform, each further center drawn with
// probability proportional to the current squared distance to the nearest
// chosen center.
Matrix kmeans_pp_init(const Matrix& samples, std::size_t k, SplitMix64& rng) {
  const std::size_t n = samples.rows;
  Matrix centers(k, samples.cols);
  std::size_t first = rng.uniform_index(n);
  for (std::size_t j = 0; j < samples.cols; ++j) centers.at(0, j) = samples.at(first, j);

  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i)
    d2[i] = kernels::sqdist(samples.row_span(i), centers.row_span(0));

  for (std::size_t c = 1; c < k; ++c) {
    double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    std::size_t pick;
    if (total > 0.0) {
      const double u = rng.uniform01() * total;
      double cum = 0.0;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        cum += d2[i];
        if (cum > u) {
          pick = i;
          break;
        }
      }
    } else {
      pick = rng.uniform_index(n);  // all remaining distances zero
    }
    for (std::size_t j = 0; j < samples.cols; ++j) centers.at(c, j) = samples.at(pick, j);
    for (std::size_t i = 0; i < n; ++i)
      d2[i] = std::min(d2[i], kernels::sqdist(samples.row_span(i), centers.row_span(c)));
  }
  return centers;
}

}  // namespace

Codebook kmeans_fit(const Matrix& samples, std::size_t k, std::uint64_t seed,
                    std::size_t max_iters, double tol, KmeansReport* report) {
  const std::size_t n = samples.rows;
  if (k < 1) throw std::invalid_argument("kmeans_fit: k must be >= 1");
  if (n < k)
    throw std::invalid_argument("kmeans_fit: N < k (N=" + std::to_string(n) +
                                ", k=" + std::to_string(k) + ")");
  if (max_iters < 1) throw std::invalid_argument("kmeans_fit: max_iters must be >= 1");

  SplitMix64 rng(seed);
  Matrix centers = kmeans_pp_init(samples, k, rng);

  KmeansReport local;
  KmeansReport& rep = report ? *report : local;
  rep = {};

  std::vector<std::size_t> labels;
  std::vector<double> d2;
  double prev = std::numeric_limits<double>::infinity();

  for (std::size_t iter = 0; iter < max_iters; ++iter) {
    kernels::nearest_center(samples, centers, labels, d2);
    double inertia = 0.0;
    for (double d : d2) inertia += d;
    rep.inertia_history.push_back(inertia);
    rep.iterations = iter + 1;
    rep.inertia = inertia;

    // Re-seed empty clusters with the point farthest from its center
    // (ascending cluster index, ties to the lower point index).
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t l : labels) ++counts[l];
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] != 0) continue;
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (counts[labels[i]] <= 1) continue;  // don't empty another cluster
        if (d2[i] > far_d) {
          far_d = d2[i];
          far = i;
        }
      }
      if (far_d < 0.0) continue;  // nothing movable
      --counts[labels[far]];
      labels[far] = c;
      counts[c] = 1;
      d2[far] = 0.0;
    }

    if (std::isfinite(prev) && prev - inertia <= tol * prev) break;
    prev = inertia;
    kernels::cluster_means(samples, labels, k, centers);
  }

  for (double v : centers.data)
    if (!std::isfinite(v)) throw NumericalError("kmeans_fit: non-finite center");
  return Codebook{std::move(centers)};
}

void VladConfig::validate(std::size_t k) const {
  if (r < 1 || r > k)
    throw std::invalid_argument("VladConfig: r must satisfy 1 <= r <= k (r=" +
                                std::to_string(r) + ", k=" + std::to_string(k) + ")");
  if (!(sigma > 0.0)) throw std::invalid_argument("VladConfig: sigma must be > 0");
  if (!(power_alpha > 0.0) || power_alpha > 1.0)
    throw std::invalid_argument("VladConfig: power_alpha must be in (0, 1]");
}

std::vector<Assignment> soft_assign(const VladConfig& cfg, const Codebook& book,
                                    std::span<const double> p) {
  cfg.validate(book.k());
  if (p.size() != book.dim())
    throw std::invalid_argument("soft_assign: descriptor dim " + std::to_string(p.size()) +
                                " != codebook dim " + std::to_string(book.dim()));

  const std::size_t k = book.k();
  std::vector<double> d2(k);
  for (std::size_t c = 0; c < k; ++c) d2[c] = kernels::sqdist(p, book.centers.row_span(c));

  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(cfg.r),
                    order.end(), [&](std::size_t a, std::size_t b) {
                      return d2[a] < d2[b] || (d2[a] == d2[b] && a < b);
                    });

  std::vector<Assignment> out(cfg.r);
  const double denom = 2.0 * cfg.sigma * cfg.sigma;
  double sum = 0.0;
  for (std::size_t i = 0; i < cfg.r; ++i) {
    out[i].center = order[i];
    out[i].weight = std::exp(-d2[order[i]] / denom);
    sum += out[i].weight;
  }
  if (sum > 0.0) {
    for (Assignment& a : out) a.weight /= sum;
  } else {
    // Extreme distance scale: every kernel value underflowed.
    for (Assignment& a : out) a.weight = 1.0 / static_cast<double>(cfg.r);
  }
  return out;
}

std::vector<double> vlad_encode(const VladConfig& cfg, const Codebook& book,
                                const std::vector<Descriptor>& patches) {
  if (patches.empty()) throw std::invalid_argument("vlad_encode: empty patch list");
  cfg.validate(book.k());
  const std::size_t d = book.dim();

  Matrix pts(patches.size(), d);
  for (std::size_t i = 0; i < patches.size(); ++i) {
    if (patches[i].size() != d)
      throw std::invalid_argument("vlad_encode: patch " + std::to_string(i) +
                                  " has dim " + std::to_string(patches[i].size()) +
                                  ", codebook dim is " + std::to_string(d));
    std::copy(patches[i].begin(), patches[i].end(), pts.row(i));
  }

  std::vector<Assignment> flat(patches.size() * cfg.r);
  std::vector<std::size_t> offsets(patches.size() + 1, 0);
  const std::ptrdiff_t np = static_cast<std::ptrdiff_t>(patches.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t j = 0; j < np; ++j) {
    auto a = soft_assign(cfg, book, pts.row_span(static_cast<std::size_t>(j)));
    std::copy(a.begin(), a.end(), flat.begin() + j * static_cast<std::ptrdiff_t>(cfg.r));
  }
  for (std::size_t j = 0; j < patches.size(); ++j) offsets[j + 1] = (j + 1) * cfg.r;

  std::vector<double> out;
  kernels::vlad_accumulate(pts, book.centers, flat, offsets, out);
  return out;
}

double l2_norm(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc);
}

std::vector<double> l2_normalize(std::span<const double> v) {
  std::vector<double> out(v.begin(), v.end());
  const double norm = l2_norm(v);
  if (norm > 0.0)
    for (double& x : out) x /= norm;
  return out;
}

std::vector<double> normalize_chain(std::span<const double> v, double alpha) {
  if (!(alpha > 0.0) || alpha > 1.0)
    throw std::invalid_argument("normalize_chain: alpha must be in (0, 1]");
  std::vector<double> powered(v.size());
  if (alpha == 1.0) {
    std::copy(v.begin(), v.end(), powered.begin());
  } else {
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double a = std::pow(std::abs(v[i]), alpha);
      powered[i] = v[i] < 0.0 ? -a : a;
    }
  }
  return l2_normalize(powered);
}

}  // namespace mop

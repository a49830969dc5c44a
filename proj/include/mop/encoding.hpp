#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mop/descriptors.hpp"
#include "mop/kernels.hpp"
#include "mop/matrix.hpp"

namespace mop {

// Fitted linear projection with optional whitening. Rows of `components`
// are orthonormal; eigenvalues are sorted non-increasing.
struct PcaModel {
  std::vector<double> mean;
  Matrix components;  // out_dim x in_dim
  std::vector<double> eigenvalues;
  bool whiten = false;
  double epsilon = 1e-9;

  std::size_t in_dim() const { return mean.size(); }
  std::size_t out_dim() const { return components.rows; }
};

// Fits PCA on the rows of `samples`. d_out is clamped to min(N-1, D_in);
// the model's out_dim() reports the effective dimension. Component signs are
// fixed so each row's largest-magnitude entry (first on ties) is positive.
PcaModel pca_fit(const Matrix& samples, std::size_t d_out, bool whiten = false,
                 double epsilon = 1e-9);

std::vector<double> pca_transform(const PcaModel& model, std::span<const double> v);
Matrix pca_transform_batch(const PcaModel& model, const Matrix& rows);

// k-means centers. After a fit, k() >= 1 and all centers are finite.
struct Codebook {
  Matrix centers;

  std::size_t k() const { return centers.rows; }
  std::size_t dim() const { return centers.cols; }
};

struct KmeansReport {
  std::vector<double> inertia_history;  // one entry per assignment step
  std::size_t iterations = 0;
  double inertia = 0.0;
};

// Lloyd iterations from k-means++ seeding. Deterministic given (sample
// order, seed): ties break to the lower index and empty clusters are
// re-seeded with the point farthest from its center.
Codebook kmeans_fit(const Matrix& samples, std::size_t k, std::uint64_t seed,
                    std::size_t max_iters = 100, double tol = 1e-6,
                    KmeansReport* report = nullptr);

struct VladConfig {
  std::size_t r = 5;        // nearest centers per patch
  double sigma = 10.0;      // Gaussian kernel std
  double power_alpha = 0.5; // power-normalization exponent

  void validate(std::size_t k) const;
  bool operator==(const VladConfig&) const = default;
};

// The r nearest centers of p (ties to the lower index, ordered by ascending
// distance) with Gaussian weights exp(-d^2 / (2 sigma^2)) normalized to sum
// one. If every raw weight underflows to zero the weights fall back to
// uniform 1/r.
std::vector<Assignment> soft_assign(const VladConfig& cfg, const Codebook& book,
                                    std::span<const double> p);

// Soft-assignment VLAD: cell i accumulates w * (p_j - c_i) over the patches
// whose r nearest centers include c_i, in patch-list order. Length is
// k() * dim(); no normalization is applied here.
std::vector<double> vlad_encode(const VladConfig& cfg, const Codebook& book,
                                const std::vector<Descriptor>& patches);

// Signed power |x|^alpha * sign(x) followed by L2 normalization; the zero
// vector maps to itself.
std::vector<double> normalize_chain(std::span<const double> v, double alpha);

// Plain L2 normalization; the zero vector maps to itself.
std::vector<double> l2_normalize(std::span<const double> v);

double l2_norm(std::span<const double> v);

}  // namespace mop

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mop/matrix.hpp"

namespace mop {

// One (center index, normalized weight) pair from soft assignment.
struct Assignment {
  std::size_t center = 0;
  double weight = 0.0;
};

// Data-parallel inner loops shared by k-means, PCA, VLAD, and retrieval.
// Every kernel exists twice: the `serial` namespace holds the reference
// implementation, the outer namespace the OpenMP version. The two perform
// identical floating-point operations in identical per-item order, so their
// outputs are required to be bitwise equal; tests enforce that and
// benchmarks compare their throughput.
namespace kernels {

namespace serial {

// Nearest center per point (ties to the lower index) and its squared
// Euclidean distance.
void nearest_center(const Matrix& points, const Matrix& centers,
                    std::vector<std::size_t>& labels, std::vector<double>& dist2);

// Per-cluster means; points contribute in row order. Clusters with no
// members keep their previous center.
void cluster_means(const Matrix& points, const std::vector<std::size_t>& labels,
                   std::size_t k, Matrix& centers);

// out[i] = scale .* (components * (rows[i] - mean)); scale may be empty.
void project_rows(const Matrix& rows, std::span<const double> mean,
                  const Matrix& components, std::span<const double> scale, Matrix& out);

// out(i, j) = squared Euclidean distance between queries row i and db row j.
void pairwise_sqdist(const Matrix& queries, const Matrix& db, Matrix& out);

// VLAD cell accumulation. flat holds every patch's assignments back to back;
// offsets[j] .. offsets[j+1] delimit patch j's entries. Cell c of `out`
// receives sum_j w * (patch_j - center_c) over patches assigned to c, in
// patch order.
void vlad_accumulate(const Matrix& patches, const Matrix& centers,
                     const std::vector<Assignment>& flat,
                     const std::vector<std::size_t>& offsets, std::vector<double>& out);

}  // namespace serial

void nearest_center(const Matrix& points, const Matrix& centers,
                    std::vector<std::size_t>& labels, std::vector<double>& dist2);
void cluster_means(const Matrix& points, const std::vector<std::size_t>& labels,
                   std::size_t k, Matrix& centers);
void project_rows(const Matrix& rows, std::span<const double> mean,
                  const Matrix& components, std::span<const double> scale, Matrix& out);
void pairwise_sqdist(const Matrix& queries, const Matrix& db, Matrix& out);
void vlad_accumulate(const Matrix& patches, const Matrix& centers,
                     const std::vector<Assignment>& flat,
                     const std::vector<std::size_t>& offsets, std::vector<double>& out);

// Shared scalar helper.
double sqdist(std::span<const double> a, std::span<const double> b);

}  // namespace kernels
}  // namespace mop

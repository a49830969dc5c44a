#include "mop/kernels.hpp"

namespace mop::kernels {

// Shared per-item helpers from kernels_serial.cpp; each OpenMP kernel
// distributes the same per-item work across threads, so serial and parallel
// results are bitwise equal.
namespace detail {
void assign_point(const Matrix& points, const Matrix& centers, std::size_t i,
                  std::vector<std::size_t>& labels, std::vector<double>& dist2);
void mean_of_cluster(const Matrix& points, const std::vector<std::size_t>& labels,
                     std::size_t c, Matrix& centers);
void project_row(const Matrix& rows, std::span<const double> mean, const Matrix& components,
                 std::span<const double> scale, std::size_t i, Matrix& out);
void sqdist_row(const Matrix& queries, const Matrix& db, std::size_t i, Matrix& out);
void vlad_cell(const Matrix& patches, const Matrix& centers,
               const std::vector<Assignment>& flat, const std::vector<std::size_t>& offsets,
               std::size_t c, std::vector<double>& out);
void check_shapes(const Matrix& points, const Matrix& centers);
}  // namespace detail

void nearest_center(const Matrix& points, const Matrix& centers,
                    std::vector<std::size_t>& labels, std::vector<double>& dist2) {
  detail::check_shapes(points, centers);
  labels.resize(points.rows);
  dist2.resize(points.rows);
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(points.rows);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i)
    detail::assign_point(points, centers, static_cast<std::size_t>(i), labels, dist2);
}

void cluster_means(const Matrix& points, const std::vector<std::size_t>& labels,
                   std::size_t k, Matrix& centers) {
  const std::ptrdiff_t kk = static_cast<std::ptrdiff_t>(k);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t c = 0; c < kk; ++c)
    detail::mean_of_cluster(points, labels, static_cast<std::size_t>(c), centers);
}

void project_rows(const Matrix& rows, std::span<const double> mean,
                  const Matrix& components, std::span<const double> scale, Matrix& out) {
  out = Matrix(rows.rows, components.rows);
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(rows.rows);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i)
    detail::project_row(rows, mean, components, scale, static_cast<std::size_t>(i), out);
}

void pairwise_sqdist(const Matrix& queries, const Matrix& db, Matrix& out) {
  detail::check_shapes(queries, db);
  out = Matrix(queries.rows, db.rows);
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(queries.rows);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i)
    detail::sqdist_row(queries, db, static_cast<std::size_t>(i), out);
}

void vlad_accumulate(const Matrix& patches, const Matrix& centers,
                     const std::vector<Assignment>& flat,
                     const std::vector<std::size_t>& offsets, std::vector<double>& out) {
  out.assign(centers.rows * patches.cols, 0.0);
  const std::ptrdiff_t k = static_cast<std::ptrdiff_t>(centers.rows);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t c = 0; c < k; ++c)
    detail::vlad_cell(patches, centers, flat, offsets, static_cast<std::size_t>(c), out);
}

}  // namespace mop::kernels

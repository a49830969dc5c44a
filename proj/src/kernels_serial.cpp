#include <stdexcept>

#include "mop/kernels.hpp"

namespace mop::kernels {

double sqdist(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

namespace detail {

void assign_point(const Matrix& points, const Matrix& centers, std::size_t i,
                  std::vector<std::size_t>& labels, std::vector<double>& dist2) {
  std::size_t best = 0;
  double best_d = sqdist(points.row_span(i), centers.row_span(0));
  for (std::size_t c = 1; c < centers.rows; ++c) {
    double d = sqdist(points.row_span(i), centers.row_span(c));
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  labels[i] = best;
  dist2[i] = best_d;
}

void mean_of_cluster(const Matrix& points, const std::vector<std::size_t>& labels,
                     std::size_t c, Matrix& centers) {
  std::vector<double> acc(points.cols, 0.0);
  std::size_t n = 0;
  for (std::size_t i = 0; i < points.rows; ++i) {
    if (labels[i] != c) continue;
    const double* p = points.row(i);
    for (std::size_t j = 0; j < points.cols; ++j) acc[j] += p[j];
    ++n;
  }
  if (n == 0) return;  // empty cluster keeps its previous center
  double* out = centers.row(c);
  for (std::size_t j = 0; j < points.cols; ++j) out[j] = acc[j] / static_cast<double>(n);
}

void project_row(const Matrix& rows, std::span<const double> mean, const Matrix& components,
                 std::span<const double> scale, std::size_t i, Matrix& out) {
  const double* src = rows.row(i);
  double* dst = out.row(i);
  for (std::size_t r = 0; r < components.rows; ++r) {
    const double* comp = components.row(r);
    double acc = 0.0;
    for (std::size_t j = 0; j < components.cols; ++j) acc += comp[j] * (src[j] - mean[j]);
    dst[r] = scale.empty() ? acc : acc * scale[r];
  }
}

void sqdist_row(const Matrix& queries, const Matrix& db, std::size_t i, Matrix& out) {
  for (std::size_t j = 0; j < db.rows; ++j)
    out.at(i, j) = sqdist(queries.row_span(i), db.row_span(j));
}

void vlad_cell(const Matrix& patches, const Matrix& centers,
               const std::vector<Assignment>& flat, const std::vector<std::size_t>& offsets,
               std::size_t c, std::vector<double>& out) {
  const std::size_t d = patches.cols;
  double* cell = out.data() + c * d;
  const double* center = centers.row(c);
  const std::size_t n = offsets.size() - 1;
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t a = offsets[j]; a < offsets[j + 1]; ++a) {
      if (flat[a].center != c) continue;
      const double w = flat[a].weight;
      const double* p = patches.row(j);
      for (std::size_t t = 0; t < d; ++t) cell[t] += w * (p[t] - center[t]);
    }
  }
}

void check_shapes(const Matrix& points, const Matrix& centers) {
  if (points.cols != centers.cols)
    throw std::invalid_argument("kernels: point and center dimensions differ");
  if (points.rows == 0 || centers.rows == 0)
    throw std::invalid_argument("kernels: empty points or centers");
}

}  // namespace detail

namespace serial {

void nearest_center(const Matrix& points, const Matrix& centers,
                    std::vector<std::size_t>& labels, std::vector<double>& dist2) {
  detail::check_shapes(points, centers);
  labels.resize(points.rows);
  dist2.resize(points.rows);
  for (std::size_t i = 0; i < points.rows; ++i)
    detail::assign_point(points, centers, i, labels, dist2);
}

void cluster_means(const Matrix& points, const std::vector<std::size_t>& labels,
                   std::size_t k, Matrix& centers) {
  for (std::size_t c = 0; c < k; ++c) detail::mean_of_cluster(points, labels, c, centers);
}

void project_rows(const Matrix& rows, std::span<const double> mean,
                  const Matrix& components, std::span<const double> scale, Matrix& out) {
  out = Matrix(rows.rows, components.rows);
  for (std::size_t i = 0; i < rows.rows; ++i)
    detail::project_row(rows, mean, components, scale, i, out);
}

void pairwise_sqdist(const Matrix& queries, const Matrix& db, Matrix& out) {
  detail::check_shapes(queries, db);
  out = Matrix(queries.rows, db.rows);
  for (std::size_t i = 0; i < queries.rows; ++i) detail::sqdist_row(queries, db, i, out);
}

void vlad_accumulate(const Matrix& patches, const Matrix& centers,
                     const std::vector<Assignment>& flat,
                     const std::vector<std::size_t>& offsets, std::vector<double>& out) {
  out.assign(centers.rows * patches.cols, 0.0);
  for (std::size_t c = 0; c < centers.rows; ++c)
    detail::vlad_cell(patches, centers, flat, offsets, c, out);
}

}  // namespace serial
}  // namespace mop::kernels

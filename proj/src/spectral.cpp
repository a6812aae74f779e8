#include "teamcluster/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "teamcluster/error.hpp"
#include "teamcluster/simd/kernels.hpp"

namespace teamcluster::spectral {

namespace {

void require_square(const Matrix& m, const char* what) {
  require(m.rows() == m.cols(), ErrorKind::Parameter, std::string(what) + " must be square");
}

double off_diagonal_norm(const Matrix& a) {
  double ss = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j)
      if (i != j) ss += a(i, j) * a(i, j);
  return std::sqrt(ss);
}

double frobenius_norm(const Matrix& a) {
  return std::sqrt(simd::dot(a.values(), a.values()));
}

}  // namespace

Matrix distance_matrix(const Matrix& features) {
  const std::size_t n = features.rows();
  require(n >= 2, ErrorKind::Parameter, "distance matrix needs at least two rows");
  Matrix e(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = std::sqrt(simd::squared_distance(features.row(i), features.row(j)));
      e(i, j) = d;
      e(j, i) = d;
    }
  return e;
}

Matrix distance_matrix(const FeatureMatrix& features) { return distance_matrix(features.values); }

Matrix rbf_similarity(const Matrix& distances, double sigma) {
  require(sigma > 0.0 && std::isfinite(sigma), ErrorKind::Parameter,
          "kernel bandwidth sigma must be positive");
  require_square(distances, "distance matrix");
  const double scale = 1.0 / (2.0 * sigma * sigma);
  Matrix q(distances.rows(), distances.cols());
  for (std::size_t i = 0; i < q.rows(); ++i) {
    q(i, i) = 1.0;
    for (std::size_t j = 0; j < q.cols(); ++j) {
      if (i == j) continue;
      const double e = distances(i, j);
      q(i, j) = std::exp(-(e * e) * scale);
    }
  }
  return q;
}

SpectralGraph graph_from_adjacency(Matrix adjacency) {
  require_square(adjacency, "adjacency matrix");
  const std::size_t n = adjacency.rows();
  SpectralGraph g;
  g.degree.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    g.degree[i] = simd::sum(adjacency.row(i));
    if (!(g.degree[i] > 0.0))
      fail(ErrorKind::Degenerate,
           "vertex " + std::to_string(i) + " has non-positive degree " + std::to_string(g.degree[i]));
  }

  std::vector<double> inv_sqrt(n);
  for (std::size_t i = 0; i < n; ++i) inv_sqrt[i] = 1.0 / std::sqrt(g.degree[i]);

  g.laplacian = Matrix(n, n);
  g.normalized = Matrix(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    g.laplacian(i, i) = g.degree[i];
    g.normalized(i, i) = g.degree[i] * inv_sqrt[i] * inv_sqrt[i];
    for (std::size_t j = i + 1; j < n; ++j) {
      const double l = -adjacency(i, j);
      const double ln = l * inv_sqrt[i] * inv_sqrt[j];
      g.laplacian(i, j) = g.laplacian(j, i) = l;
      g.normalized(i, j) = g.normalized(j, i) = ln;
    }
  }
  g.adjacency = std::move(adjacency);
  return g;
}

SpectralGraph build_graph(const Matrix& similarity) {
  require_square(similarity, "similarity matrix");
  const std::size_t n = similarity.rows();
  Matrix w(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    require(std::abs(similarity(i, i) - 1.0) <= 1e-12, ErrorKind::Parameter,
            "similarity matrix must have a unit diagonal");
    for (std::size_t j = i + 1; j < n; ++j) {
      require(std::abs(similarity(i, j) - similarity(j, i)) <= 1e-12, ErrorKind::Parameter,
              "similarity matrix must be symmetric");
      w(i, j) = w(j, i) = similarity(i, j);
    }
  }
  return graph_from_adjacency(std::move(w));
}

std::vector<double> Eigenmap::vector(std::size_t k) const {
  std::vector<double> v(eigenvectors.rows());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = eigenvectors(i, k);
  return v;
}

void fix_sign(std::span<double> v) {
  std::size_t lead = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (std::abs(v[i]) > std::abs(v[lead])) lead = i;
  if (!v.empty() && v[lead] < 0.0)
    for (double& x : v) x = -x;
}

Eigenmap eigendecompose(const Matrix& symmetric, const JacobiOptions& options) {
  require_square(symmetric, "eigendecomposition input");
  const std::size_t n = symmetric.rows();
  require(n >= 1, ErrorKind::Parameter, "eigendecomposition of an empty matrix");

  Matrix a(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    a(i, i) = symmetric(i, i);
    for (std::size_t j = i + 1; j < n; ++j) {
      const double x = symmetric(i, j);
      const double y = symmetric(j, i);
      require(std::abs(x - y) <= 1e-10 * std::max(1.0, std::abs(x)), ErrorKind::Parameter,
              "eigendecomposition input is not symmetric");
      a(i, j) = a(j, i) = 0.5 * (x + y);
    }
  }

  // rows of vt are the eigenvectors, so rotations touch contiguous memory
  Matrix vt = Matrix::identity(n);
  const double tolerance = options.off_diagonal_tolerance * std::max(1.0, frobenius_norm(a));

  int sweep = 0;
  double off = off_diagonal_norm(a);
  while (off > tolerance) {
    if (sweep == options.max_sweeps)
      fail(ErrorKind::Numerical, "Jacobi eigensolver did not converge after " +
                                     std::to_string(sweep) + " sweeps; off-diagonal norm " +
                                     std::to_string(off));
    ++sweep;
    for (std::size_t p = 0; p + 1 < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double app = a(p, p);
        const double aqq = a(q, q);
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::hypot(theta, 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;

        // rows p and q of J^T A; the other entries of those rows equal the
        // final values by symmetry, so mirror them into columns p and q.
        simd::rotate_pair(a.row(p), a.row(q), c, s);
        for (std::size_t j = 0; j < n; ++j) {
          if (j == p || j == q) continue;
          a(j, p) = a(p, j);
          a(j, q) = a(q, j);
        }
        a(p, p) = app - t * apq;
        a(q, q) = aqq + t * apq;
        a(p, q) = a(q, p) = 0.0;

        simd::rotate_pair(vt.row(p), vt.row(q), c, s);
      }
    off = off_diagonal_norm(a);
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return a(x, x) < a(y, y); });

  Eigenmap map;
  map.sweeps = sweep;
  map.eigenvalues.resize(n);
  map.eigenvectors = Matrix(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    map.eigenvalues[k] = a(order[k], order[k]);
    std::span<double> v = vt.row(order[k]);
    fix_sign(v);
    for (std::size_t i = 0; i < n; ++i) map.eigenvectors(i, k) = v[i];
  }
  return map;
}

Embedding embedding(const Eigenmap& map, std::size_t dims) {
  require(dims == 2 || dims == 3, ErrorKind::Parameter, "embedding dimension must be 2 or 3");
  const std::size_t n = map.size();
  require(n >= dims + 1, ErrorKind::Parameter,
          "embedding needs at least " + std::to_string(dims + 1) + " entities");
  Embedding out;
  out.coordinates = Matrix(n, dims);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t d = 0; d < dims; ++d) out.coordinates(i, d) = map.eigenvectors(i, d + 1);

  std::size_t zeros = 0;
  for (double lambda : map.eigenvalues)
    if (lambda < kZeroEigenvalue) ++zeros;
  if (zeros > 1)
    out.warnings.push_back("eigenvalue 0 has multiplicity " + std::to_string(zeros) +
                           "; the graph is (numerically) disconnected and the embedding "
                           "coordinates are not unique");
  return out;
}

}  // namespace teamcluster::spectral

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "teamcluster/dataset.hpp"
#include "teamcluster/matrix.hpp"

namespace teamcluster::spectral {

/// Pairwise Euclidean distances between the rows of a feature matrix.
/// Each unordered pair is computed once and mirrored.
Matrix distance_matrix(const Matrix& features);
Matrix distance_matrix(const FeatureMatrix& features);

/// Gaussian kernel exp(-E^2 / (2 sigma^2)), unit diagonal.
Matrix rbf_similarity(const Matrix& distances, double sigma = 1.0);

/// The adjacency/degree/Laplacian chain derived from a similarity matrix.
struct SpectralGraph {
  Matrix adjacency;        // W = Q - I
  std::vector<double> degree;  // s = W * 1
  Matrix laplacian;        // L = D - W
  Matrix normalized;       // D^-1/2 L D^-1/2

  std::size_t size() const { return degree.size(); }
};

/// Throws Error(Degenerate) naming the first vertex with non-positive degree.
SpectralGraph build_graph(const Matrix& similarity);

/// Same chain starting from an adjacency matrix (zero diagonal).
SpectralGraph graph_from_adjacency(Matrix adjacency);

struct Eigenmap {
  std::vector<double> eigenvalues;  // ascending
  Matrix eigenvectors;              // column k pairs with eigenvalues[k]
  int sweeps = 0;

  std::size_t size() const { return eigenvalues.size(); }
  std::vector<double> vector(std::size_t k) const;
};

struct JacobiOptions {
  double off_diagonal_tolerance = 1e-12;
  int max_sweeps = 100;
};

/// Full symmetric eigendecomposition by cyclic Jacobi rotations. Results are
/// sorted ascending and each eigenvector is sign-fixed so that its entry of
/// largest magnitude is positive (lowest index on ties).
Eigenmap eigendecompose(const Matrix& symmetric, const JacobiOptions& options = {});

/// Flips v so that its largest-magnitude entry is positive.
void fix_sign(std::span<double> v);

struct Embedding {
  Matrix coordinates;  // n x dims: columns v2, v3[, v4]
  std::vector<std::string> warnings;
};

/// Eigenvalues below this are treated as zero when testing connectivity.
inline constexpr double kZeroEigenvalue = 1e-8;

Embedding embedding(const Eigenmap& map, std::size_t dims);

}  // namespace teamcluster::spectral

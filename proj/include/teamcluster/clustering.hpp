#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "teamcluster/matrix.hpp"
#include "teamcluster/spectral.hpp"

namespace teamcluster::clustering {

/// Cluster ids are 1-based.
using Labels = std::vector<int>;

struct Bisection {
  std::vector<std::size_t> part_a;  // Fiedler entries >= 0, ascending
  std::vector<std::size_t> part_b;
  double fiedler_value = 0.0;
  bool by_components = false;  // split along connected components (Fiedler value ~ 0)
};

/// Splits the subgraph induced on `members` (indices into graph.adjacency) by
/// the sign of its normalized-Laplacian Fiedler vector.
Bisection fiedler_bisect(const spectral::SpectralGraph& graph, std::span<const std::size_t> members);

struct SilhouetteResult {
  std::vector<double> widths;
  double average = 0.0;
};

SilhouetteResult silhouette(std::span<const int> labels, const Matrix& distances);

/// Average silhouette of the entities carrying each label, indexed by label - 1.
std::vector<double> cluster_silhouettes(std::span<const int> labels, std::span<const double> widths);

double dunn(std::span<const int> labels, const Matrix& distances);

enum class BisectionStrategy { RecursiveSubgraph, GlobalGaps };

struct TraceStep {
  int step = 0;
  int split_cluster = 0;  // id at the time of the split (before renumbering)
  std::size_t size_a = 0;
  std::size_t size_b = 0;
  double fiedler_value = 0.0;
  double threshold = 0.0;
  double avg_silhouette = 0.0;
};

struct ClusterAssignment {
  Labels labels;
  int k = 0;
  std::vector<double> silhouette;
  double avg_silhouette = 0.0;
  std::optional<double> dunn;  // absent when every cluster has zero diameter
  std::vector<TraceStep> trace;
};

/// k - 1 bisections; each step splits the cluster whose split maximizes the
/// resulting average silhouette. Final ids are ordered by descending mean of
/// the global Fiedler coordinate.
ClusterAssignment recursive_bisection(const spectral::SpectralGraph& graph, int k,
                                      const Matrix& distances,
                                      BisectionStrategy strategy = BisectionStrategy::RecursiveSubgraph);

ClusterAssignment recursive_bisection(const spectral::SpectralGraph& graph,
                                      const spectral::Eigenmap& global, int k,
                                      const Matrix& distances, BisectionStrategy strategy);

struct SomConfig {
  int epochs = 100;
  double rate_start = 0.05;
  double rate_end = 0.01;
  std::uint64_t seed = 0;
};

/// 1 x k self-organizing map; labels are best-matching unit ids, renumbered
/// to be contiguous from 1 in unit order.
Labels som_cluster(const Matrix& features, int k, const SomConfig& config);

struct ValidationRow {
  int k = 0;
  int clusters_found = 0;
  std::optional<double> dunn;
  std::optional<double> avg_silhouette;
};

struct Validation {
  std::vector<ValidationRow> rows;
  int chosen_k = 0;
  int dunn_argmax = 0;
  int silhouette_argmax = 0;
  bool indices_disagree = false;
};

/// Scores SOM partitions for each k in [k_min, k_max]; the chosen k maximizes
/// the average silhouette with Dunn breaking ties. Each k uses the stream
/// derived from (config.seed, k).
Validation validate_k(const Matrix& features, const Matrix& distances, int k_min, int k_max,
                      const SomConfig& config, unsigned threads = 1);

void write_validation_csv(std::ostream& out, const Validation& validation);

}  // namespace teamcluster::clustering

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "teamcluster/clustering.hpp"
#include "teamcluster/dataset.hpp"
#include "teamcluster/matrix.hpp"

namespace teamcluster::pipeline {

struct PipelineConfig {
  std::filesystem::path input;
  std::filesystem::path output_dir = ".";
  std::string response = "GD";
  std::vector<std::string> excluded = {"GF", "GA", "GD", "Points"};
  std::vector<std::string> features;  // manual override of the selected variables
  std::size_t n_trees = 500;
  std::optional<std::size_t> mtry;
  std::size_t node_size = 5;
  std::size_t vim_replications = 10;
  std::size_t cv_folds = 10;
  double sigma = 1.0;
  bool standardize = true;
  int k_min = 2;
  int k_max = 6;
  std::optional<int> k;  // overrides the validated cluster count
  clustering::BisectionStrategy strategy = clustering::BisectionStrategy::RecursiveSubgraph;
  int som_epochs = 100;
  double som_rate_start = 0.05;
  double som_rate_end = 0.01;
  double low_q = 0.25;
  double high_q = 0.75;
  std::uint64_t seed = 0;
  // Execution settings; they never change results and are not echoed.
  unsigned threads = 1;
  bool resume = false;
};

enum class Stage { Vim, Embed, Validate, Cluster, Run };

/// Config echo as compact JSON with stable key order.
std::string config_json(const PipelineConfig& config);

struct Crosstab {
  Matrix counts;  // k rows, columns Bottom/Middle/Top
  std::optional<double> benchmark_avg_silhouette;
};

Crosstab crosstab(std::span<const int> clusters, std::span<const BenchmarkLabel> benchmark,
                  const Matrix& distances);

struct NetworkVertex {
  std::int64_t id = 0;
  std::string name;
  int cluster = 0;
  std::string benchmark;
};

/// Complete undirected graph in DOT format with weights 1 / max(E_ij, epsilon).
std::string export_network(const Matrix& distances, std::span<const NetworkVertex> vertices,
                           double epsilon = 1e-9, const std::string& header_comment = {});

/// Paths of the artifacts written by a stage, relative to the output directory.
struct StageResult {
  std::vector<std::filesystem::path> written;
  std::string report_json;  // empty for stage commands other than Run
};

/// Runs the requested stage and everything it depends on. Errors are
/// rethrown with the failing stage in the message; files written by the
/// failed invocation are removed.
StageResult run_stage(Stage stage, const PipelineConfig& config);

inline StageResult run_pipeline(const PipelineConfig& config) { return run_stage(Stage::Run, config); }

/// 64-bit FNV-1a, used for input and stage content hashes.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t basis = 0xcbf29ce484222325ULL);

}  // namespace teamcluster::pipeline

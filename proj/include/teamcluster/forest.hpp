#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "teamcluster/dataset.hpp"
#include "teamcluster/matrix.hpp"
#include "teamcluster/rng.hpp"

namespace teamcluster::forest {

struct TreeNode {
  int variable = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;      // x[variable] <= threshold
  int right = -1;
  double prediction = 0.0;        // mean training response routed here
  double impurity_decrease = 0.0; // parent SSE minus children SSE
  std::size_t samples = 0;

  bool is_leaf() const { return variable < 0; }
};

class RegressionTree {
 public:
  std::span<const TreeNode> nodes() const { return nodes_; }
  double predict(std::span<const double> x) const;
  std::size_t leaf_count() const;
  void add_importance(std::span<double> importance) const;

 private:
  friend class TreeBuilder;
  std::vector<TreeNode> nodes_;
};

struct TreeOptions {
  std::size_t mtry = 1;
  std::size_t node_size = 5;  // nodes smaller than this are not split
};

/// Grows one CART regression tree on the multiset of row indices `samples`.
RegressionTree grow_tree(const Matrix& x, std::span<const double> y,
                         std::span<const std::size_t> samples, const TreeOptions& options, Rng& rng);

struct ForestParams {
  std::size_t n_trees = 500;
  std::optional<std::size_t> mtry;  // default floor(sqrt(p)), at least 1
  std::size_t node_size = 5;
  bool bootstrap = true;  // false: every tree sees every row once
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

struct ForestModel {
  std::vector<std::string> columns;
  std::vector<RegressionTree> trees;
  std::vector<std::vector<std::uint32_t>> inbag;  // per tree, multiplicity of each row
  std::size_t mtry = 0;
  std::uint64_t seed = 0;
  std::vector<double> importance;  // total impurity decrease per column
  std::vector<double> oob_prediction;  // NaN where a row was never out-of-bag
  std::size_t oob_covered = 0;
  std::optional<double> oob_mse;
  std::optional<double> oob_r2;  // absent when y is constant or nothing is OOB
};

std::size_t default_mtry(std::size_t p);

ForestModel fit_forest(const FeatureMatrix& x, std::span<const double> y, const ForestParams& params);

/// Throws Error(Schema) when the columns differ from the training columns.
std::vector<double> predict(const ForestModel& model, const FeatureMatrix& x);
std::vector<double> predict(const ForestModel& model, const Matrix& x);

/// Per-row fold index in [0, k); fold sizes differ by at most one.
std::vector<std::size_t> fold_assignment(std::size_t n, std::size_t k, std::uint64_t seed);

struct CrossValidation {
  double mse = 0.0;
  std::optional<double> r2;
  std::vector<double> predictions;
};

CrossValidation kfold_cv(const FeatureMatrix& x, std::span<const double> y, std::size_t k,
                         const ForestParams& params);

struct VimReport {
  std::vector<std::string> variables;
  std::vector<double> raw;        // mean importance of the real variable
  std::vector<double> shadow;     // mean importance of its permuted copy
  std::vector<double> corrected;  // mean of (real - shadow)
  std::vector<std::vector<double>> corrected_by_replication;
  std::size_t replications = 0;
  std::vector<std::string> selected;
};

/// Impurity importance corrected by permuted shadow copies of every column.
VimReport vim_corrected(const FeatureMatrix& x, std::span<const double> y, std::size_t replications,
                        const ForestParams& params);

struct Selection {
  std::vector<std::string> variables;  // in descending corrected order
  std::size_t gap_position = 0;        // number selected by the ratio rule; 0 when it did not apply
  std::vector<std::string> warnings;
};

/// Cuts the descending corrected-importance curve at its largest ratio gap.
/// `manual` overrides the rule when non-empty.
Selection select_variables(const VimReport& report, std::span<const std::string> manual = {});

void write_vim_csv(std::ostream& out, const VimReport& report);

/// Population variance, the denominator used for r^2.
double population_variance(std::span<const double> y);

}  // namespace teamcluster::forest

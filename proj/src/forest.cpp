#include "teamcluster/forest.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <thread>
#include <utility>

#include "teamcluster/csv.hpp"
#include "teamcluster/error.hpp"

namespace teamcluster::forest {

double RegressionTree::predict(std::span<const double> x) const {
  std::size_t at = 0;
  while (!nodes_[at].is_leaf()) {
    const TreeNode& node = nodes_[at];
    at = static_cast<std::size_t>(x[node.variable] <= node.threshold ? node.left : node.right);
  }
  return nodes_[at].prediction;
}

std::size_t RegressionTree::leaf_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes_.begin(), nodes_.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

void RegressionTree::add_importance(std::span<double> importance) const {
  for (const TreeNode& node : nodes_)
    if (!node.is_leaf()) importance[node.variable] += node.impurity_decrease;
}

class TreeBuilder {
 public:
  TreeBuilder(const Matrix& x, std::span<const double> y, const TreeOptions& options, Rng& rng)
      : x_(x), y_(y), options_(options), rng_(rng) {
    candidates_.resize(x.cols());
    std::iota(candidates_.begin(), candidates_.end(), std::size_t{0});
  }

  RegressionTree build(std::span<const std::size_t> samples) {
    index_.assign(samples.begin(), samples.end());
    tree_.nodes_.clear();
    grow(0, index_.size());
    return std::move(tree_);
  }

 private:
  struct Split {
    int variable = -1;
    double threshold = 0.0;
    double gain = 0.0;
  };

  int grow(std::size_t begin, std::size_t end) {
    const int id = static_cast<int>(tree_.nodes_.size());
    tree_.nodes_.emplace_back();
    const std::size_t count = end - begin;

    double total = 0.0;
    for (std::size_t i = begin; i < end; ++i) total += y_[index_[i]];
    const double mean = total / static_cast<double>(count);
    tree_.nodes_[id].prediction = mean;
    tree_.nodes_[id].samples = count;

    if (count < options_.node_size || count < 2) return id;
    const double first = y_[index_[begin]];
    bool constant = true;
    for (std::size_t i = begin + 1; i < end && constant; ++i) constant = y_[index_[i]] == first;
    if (constant) return id;

    const Split split = best_split(begin, end, mean);
    if (split.variable < 0) return id;

    const auto mid_it = std::stable_partition(
        index_.begin() + begin, index_.begin() + end,
        [&](std::size_t r) { return x_(r, split.variable) <= split.threshold; });
    const auto mid = static_cast<std::size_t>(mid_it - index_.begin());

    tree_.nodes_[id].variable = split.variable;
    tree_.nodes_[id].threshold = split.threshold;
    tree_.nodes_[id].impurity_decrease = split.gain;
    const int left = grow(begin, mid);
    const int right = grow(mid, end);
    tree_.nodes_[id].left = left;
    tree_.nodes_[id].right = right;
    return id;
  }

  Split best_split(std::size_t begin, std::size_t end, double mean) {
    const std::size_t p = candidates_.size();
    const std::size_t mtry = std::min(options_.mtry, p);
    // partial Fisher-Yates: the first mtry entries become the sampled variables
    for (std::size_t i = 0; i < mtry; ++i) {
      const std::size_t j = i + rng_.below(p - i);
      std::swap(candidates_[i], candidates_[j]);
    }
    std::vector<std::size_t> chosen(candidates_.begin(), candidates_.begin() + mtry);
    std::sort(chosen.begin(), chosen.end());

    const std::size_t count = end - begin;
    pairs_.resize(count);
    Split best;
    for (std::size_t var : chosen) {
      double centered_total = 0.0;
      for (std::size_t i = 0; i < count; ++i) {
        const std::size_t r = index_[begin + i];
        pairs_[i] = {x_(r, var), y_[r] - mean};
        centered_total += pairs_[i].second;
      }
      std::stable_sort(pairs_.begin(), pairs_.end(),
                       [](const auto& a, const auto& b) { return a.first < b.first; });
      const double base = centered_total * centered_total / static_cast<double>(count);
      double left_sum = 0.0;
      for (std::size_t m = 0; m + 1 < count; ++m) {
        left_sum += pairs_[m].second;
        if (pairs_[m].first == pairs_[m + 1].first) continue;
        const double n_left = static_cast<double>(m + 1);
        const double n_right = static_cast<double>(count - m - 1);
        const double right_sum = centered_total - left_sum;
        const double gain =
            left_sum * left_sum / n_left + right_sum * right_sum / n_right - base;
        if (gain > best.gain) {
          double threshold = 0.5 * (pairs_[m].first + pairs_[m + 1].first);
          if (!(threshold < pairs_[m + 1].first)) threshold = pairs_[m].first;
          best = {static_cast<int>(var), threshold, gain};
        }
      }
    }
    return best;
  }

  const Matrix& x_;
  std::span<const double> y_;
  TreeOptions options_;
  Rng& rng_;
  std::vector<std::size_t> candidates_;
  std::vector<std::size_t> index_;
  std::vector<std::pair<double, double>> pairs_;
  RegressionTree tree_;
};

RegressionTree grow_tree(const Matrix& x, std::span<const double> y,
                         std::span<const std::size_t> samples, const TreeOptions& options,
                         Rng& rng) {
  require(!samples.empty(), ErrorKind::EmptyInput, "grow_tree: no samples");
  require(options.mtry >= 1, ErrorKind::Parameter, "mtry must be at least 1");
  TreeBuilder builder(x, y, options, rng);
  return builder.build(samples);
}

std::size_t default_mtry(std::size_t p) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(p)))));
}

double population_variance(std::span<const double> y) {
  if (y.empty()) return 0.0;
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(y.size());
  double ss = 0.0;
  for (double v : y) ss += (v - mean) * (v - mean);
  return ss / static_cast<double>(y.size());
}

namespace {

template <typename Fn>
void parallel_for(std::size_t count, unsigned threads, Fn&& fn) {
  const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(count)));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < count && !failed.load();) {
        try {
          fn(i);
        } catch (...) {
          if (!failed.exchange(true)) failure = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

std::optional<double> r_squared(double mse, std::span<const double> y) {
  const double var = population_variance(y);
  if (!(var > 0.0)) return std::nullopt;
  return 1.0 - mse / var;
}

}  // namespace

ForestModel fit_forest(const FeatureMatrix& x, std::span<const double> y, const ForestParams& params) {
  const std::size_t n = x.rows();
  const std::size_t p = x.cols();
  require(n == y.size(), ErrorKind::Schema, "response length does not match feature rows");
  require(n >= 2, ErrorKind::Parameter, "forest needs at least two rows");
  require(p >= 1, ErrorKind::Parameter, "forest needs at least one predictor");
  require(params.n_trees >= 1, ErrorKind::Parameter, "forest needs at least one tree");
  const std::size_t mtry = params.mtry.value_or(default_mtry(p));
  require(mtry >= 1 && mtry <= p, ErrorKind::Parameter,
          "mtry " + std::to_string(mtry) + " outside [1, " + std::to_string(p) + "]");

  ForestModel model;
  model.columns = x.columns;
  model.mtry = mtry;
  model.seed = params.seed;
  model.trees.resize(params.n_trees);
  model.inbag.assign(params.n_trees, std::vector<std::uint32_t>(n, 0));

  const TreeOptions options{mtry, params.node_size};
  parallel_for(params.n_trees, params.threads, [&](std::size_t t) {
    Rng rng(derive_seed(params.seed, {t}));
    std::vector<std::size_t> samples(n);
    if (params.bootstrap) {
      for (auto& s : samples) s = rng.below(n);
    } else {
      std::iota(samples.begin(), samples.end(), std::size_t{0});
    }
    for (std::size_t s : samples) ++model.inbag[t][s];
    model.trees[t] = grow_tree(x.values, y, samples, options, rng);
  });

  model.importance.assign(p, 0.0);
  for (const RegressionTree& tree : model.trees) tree.add_importance(model.importance);

  std::vector<double> oob_sum(n, 0.0);
  std::vector<std::size_t> oob_count(n, 0);
  for (std::size_t t = 0; t < model.trees.size(); ++t)
    for (std::size_t i = 0; i < n; ++i)
      if (model.inbag[t][i] == 0) {
        oob_sum[i] += model.trees[t].predict(x.values.row(i));
        ++oob_count[i];
      }

  model.oob_prediction.assign(n, std::numeric_limits<double>::quiet_NaN());
  double sse = 0.0;
  std::vector<double> covered_y;
  for (std::size_t i = 0; i < n; ++i) {
    if (oob_count[i] == 0) continue;
    model.oob_prediction[i] = oob_sum[i] / static_cast<double>(oob_count[i]);
    const double r = y[i] - model.oob_prediction[i];
    sse += r * r;
    covered_y.push_back(y[i]);
  }
  model.oob_covered = covered_y.size();
  if (!covered_y.empty()) {
    model.oob_mse = sse / static_cast<double>(covered_y.size());
    model.oob_r2 = r_squared(*model.oob_mse, covered_y);
  }
  return model;
}

std::vector<double> predict(const ForestModel& model, const Matrix& x) {
  require(x.cols() == model.columns.size(), ErrorKind::Schema,
          "prediction input has " + std::to_string(x.cols()) + " columns, model expects " +
              std::to_string(model.columns.size()));
  std::vector<double> out(x.rows(), 0.0);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double total = 0.0;
    for (const RegressionTree& tree : model.trees) total += tree.predict(x.row(i));
    out[i] = total / static_cast<double>(model.trees.size());
  }
  return out;
}

std::vector<double> predict(const ForestModel& model, const FeatureMatrix& x) {
  if (x.columns != model.columns) {
    std::string expected, got;
    for (const auto& c : model.columns) expected += (expected.empty() ? "" : ",") + c;
    for (const auto& c : x.columns) got += (got.empty() ? "" : ",") + c;
    fail(ErrorKind::Schema, "prediction columns [" + got + "] differ from training columns [" +
                                expected + "]");
  }
  return predict(model, x.values);
}

std::vector<std::size_t> fold_assignment(std::size_t n, std::size_t k, std::uint64_t seed) {
  require(k >= 2, ErrorKind::Parameter, "cross-validation needs k >= 2");
  require(k <= n, ErrorKind::Parameter,
          "cross-validation k = " + std::to_string(k) + " exceeds n = " + std::to_string(n));
  Rng rng(seed);
  const std::vector<std::size_t> order = rng.permutation(n);
  std::vector<std::size_t> fold(n);
  for (std::size_t j = 0; j < n; ++j) fold[order[j]] = j % k;
  return fold;
}

CrossValidation kfold_cv(const FeatureMatrix& x, std::span<const double> y, std::size_t k,
                         const ForestParams& params) {
  const std::size_t n = x.rows();
  require(n == y.size(), ErrorKind::Schema, "response length does not match feature rows");
  const std::vector<std::size_t> fold =
      fold_assignment(n, k, derive_seed(params.seed, {0x6b666f6c64ULL}));

  CrossValidation cv;
  cv.predictions.assign(n, 0.0);
  for (std::size_t f = 0; f < k; ++f) {
    FeatureMatrix train;
    train.columns = x.columns;
    train.standardized = x.standardized;
    std::vector<double> train_y;
    std::vector<std::size_t> held;
    for (std::size_t i = 0; i < n; ++i) {
      if (fold[i] == f) {
        held.push_back(i);
      } else {
        train.row_ids.push_back(x.row_ids.empty() ? static_cast<std::int64_t>(i) : x.row_ids[i]);
        train_y.push_back(y[i]);
      }
    }
    train.values = Matrix(train_y.size(), x.cols());
    for (std::size_t r = 0, i = 0; i < n; ++i)
      if (fold[i] != f) {
        std::copy_n(x.values.row(i).begin(), x.cols(), train.values.row(r).begin());
        ++r;
      }
    Matrix test(held.size(), x.cols());
    for (std::size_t r = 0; r < held.size(); ++r)
      std::copy_n(x.values.row(held[r]).begin(), x.cols(), test.row(r).begin());

    ForestParams fold_params = params;
    fold_params.seed = derive_seed(params.seed, {0x6b666f6c64ULL, f + 1});
    const ForestModel model = fit_forest(train, train_y, fold_params);
    const std::vector<double> pred = predict(model, test);
    for (std::size_t r = 0; r < held.size(); ++r) cv.predictions[held[r]] = pred[r];
  }

  double sse = 0.0;
  for (std::size_t i = 0; i < n; ++i) sse += (y[i] - cv.predictions[i]) * (y[i] - cv.predictions[i]);
  cv.mse = sse / static_cast<double>(n);
  cv.r2 = r_squared(cv.mse, y);
  return cv;
}

VimReport vim_corrected(const FeatureMatrix& x, std::span<const double> y, std::size_t replications,
                        const ForestParams& params) {
  require(replications >= 1, ErrorKind::Parameter, "VIM correction needs at least one replication");
  const std::size_t n = x.rows();
  const std::size_t p = x.cols();

  VimReport report;
  report.variables = x.columns;
  report.replications = replications;
  report.raw.assign(p, 0.0);
  report.shadow.assign(p, 0.0);
  report.corrected.assign(p, 0.0);

  FeatureMatrix augmented;
  augmented.row_ids = x.row_ids;
  augmented.standardized = x.standardized;
  augmented.columns = x.columns;
  for (const auto& c : x.columns) augmented.columns.push_back("shadow_" + c);
  augmented.values = Matrix(n, 2 * p);

  for (std::size_t r = 0; r < replications; ++r) {
    Rng rng(derive_seed(params.seed, {0x7669ULL, r}));
    for (std::size_t c = 0; c < p; ++c) {
      const std::vector<std::size_t> perm = rng.permutation(n);
      for (std::size_t i = 0; i < n; ++i) {
        augmented.values(i, c) = x.values(i, c);
        augmented.values(i, p + c) = x.values(perm[i], c);
      }
    }
    ForestParams rep_params = params;
    rep_params.seed = derive_seed(params.seed, {0x7669ULL, r, 1});
    const ForestModel model = fit_forest(augmented, y, rep_params);

    std::vector<double> corrected(p);
    for (std::size_t c = 0; c < p; ++c) {
      corrected[c] = model.importance[c] - model.importance[p + c];
      report.raw[c] += model.importance[c];
      report.shadow[c] += model.importance[p + c];
      report.corrected[c] += corrected[c];
    }
    report.corrected_by_replication.push_back(std::move(corrected));
  }
  const double reps = static_cast<double>(replications);
  for (std::size_t c = 0; c < p; ++c) {
    report.raw[c] /= reps;
    report.shadow[c] /= reps;
    report.corrected[c] /= reps;
  }
  return report;
}

Selection select_variables(const VimReport& report, std::span<const std::string> manual) {
  const std::size_t p = report.variables.size();
  std::vector<std::size_t> order(p);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return report.corrected[a] > report.corrected[b];
  });

  Selection out;
  if (!manual.empty()) {
    for (const std::string& name : manual) {
      if (std::find(report.variables.begin(), report.variables.end(), name) == report.variables.end())
        fail(ErrorKind::Parameter, "manual selection names unknown variable '" + name + "'");
    }
    for (std::size_t idx : order)
      if (std::find(manual.begin(), manual.end(), report.variables[idx]) != manual.end())
        out.variables.push_back(report.variables[idx]);
    return out;
  }

  require(p >= 2, ErrorKind::Parameter, "variable selection needs at least two variables");
  std::size_t positive = 0;
  while (positive < p && report.corrected[order[positive]] > 0.0) ++positive;
  if (positive == 0) fail(ErrorKind::NoSignal, "no variable has positive corrected importance");

  // ratio gap after position k (1-based) is VIM_k / VIM_{k+1}; selections
  // smaller than two are not considered
  double best_ratio = 1.0;
  std::size_t best_k = 0;
  bool unique = true;
  for (std::size_t k = 2; k < positive; ++k) {
    const double ratio = report.corrected[order[k - 1]] / report.corrected[order[k]];
    if (ratio > best_ratio * (1.0 + 1e-12)) {
      best_ratio = ratio;
      best_k = k;
      unique = true;
    } else if (best_k != 0 && std::abs(ratio - best_ratio) <= 1e-12 * best_ratio) {
      unique = false;
    }
  }

  std::size_t take;
  if (positive <= 2) {
    take = 2;
  } else if (best_k == 0 || !unique) {
    take = p;
    out.warnings.push_back(
        "corrected importance curve has no unique ratio gap; selecting all variables");
  } else {
    take = best_k;
    out.gap_position = best_k;
  }
  for (std::size_t i = 0; i < take; ++i) out.variables.push_back(report.variables[order[i]]);
  return out;
}

void write_vim_csv(std::ostream& out, const VimReport& report) {
  std::vector<std::size_t> order(report.variables.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return report.corrected[a] > report.corrected[b];
  });
  out << "variable,raw_vim,corrected_vim,selected\n";
  for (std::size_t idx : order) {
    const std::string& name = report.variables[idx];
    const bool selected =
        std::find(report.selected.begin(), report.selected.end(), name) != report.selected.end();
    out << csv::escape(name) << ',' << csv::format_significant(report.raw[idx]) << ','
        << csv::format_significant(report.corrected[idx]) << ',' << (selected ? 1 : 0) << '\n';
  }
}

}  // namespace teamcluster::forest

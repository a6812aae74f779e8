#include <doctest.h>

#include <numeric>
#include <sstream>

#include "helpers.hpp"
#include "teamcluster/error.hpp"
#include "teamcluster/forest.hpp"

using namespace teamcluster;
using namespace teamcluster::forest;

namespace {

FeatureMatrix make_features(const Matrix& values) {
  FeatureMatrix f;
  f.values = values;
  for (std::size_t c = 0; c < values.cols(); ++c) f.columns.push_back("x" + std::to_string(c + 1));
  for (std::size_t r = 0; r < values.rows(); ++r) f.row_ids.push_back(static_cast<std::int64_t>(r + 1));
  return f;
}

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::Io;
}

double mean(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

VimReport report_with(std::vector<double> corrected) {
  VimReport r;
  for (std::size_t i = 0; i < corrected.size(); ++i) r.variables.push_back("v" + std::to_string(i + 1));
  r.raw = corrected;
  r.shadow.assign(corrected.size(), 0.0);
  r.corrected = std::move(corrected);
  r.replications = 1;
  return r;
}

}  // namespace

TEST_CASE("constant response") {
  const auto x = make_features(testing::random_matrix(40, 3, 1));
  const std::vector<double> y(40, 7.0);
  ForestParams params;
  params.n_trees = 50;
  params.seed = 3;
  const auto model = fit_forest(x, y, params);
  for (const auto& tree : model.trees)
    for (const auto& node : tree.nodes()) {
      CHECK(node.is_leaf());
      CHECK(node.prediction == 7.0);
    }
  REQUIRE(model.oob_mse.has_value());
  CHECK(*model.oob_mse == 0.0);
  CHECK(!model.oob_r2.has_value());
  for (double v : model.importance) CHECK(v == 0.0);
  for (double p : predict(model, x)) CHECK(p == 7.0);

  const auto cv = kfold_cv(x, y, 5, params);
  CHECK(cv.mse == 0.0);
  CHECK(!cv.r2.has_value());
}

TEST_CASE("y = x1 is recovered by a step approximation") {
  Rng rng(99);
  Matrix xv(100, 1);
  std::vector<double> y(100);
  for (std::size_t i = 0; i < 100; ++i) y[i] = xv(i, 0) = rng.uniform() * 10.0;
  ForestParams params;
  params.seed = 4;
  const auto model = fit_forest(make_features(xv), y, params);
  REQUIRE(model.oob_r2.has_value());
  CHECK(*model.oob_r2 >= 0.95);
  CHECK(model.mtry == 1);
  CHECK(*model.oob_r2 == doctest::Approx(1.0 - *model.oob_mse / population_variance(y)).epsilon(1e-14));
}

TEST_CASE("single tree, single split") {
  Matrix x(6, 1);
  const double xs[] = {-3, -2, -1, 1, 2, 3};
  const std::vector<double> y = {1, 2, 3, 10, 11, 12};
  for (std::size_t i = 0; i < 6; ++i) x(i, 0) = xs[i];
  std::vector<std::size_t> samples(6);
  std::iota(samples.begin(), samples.end(), std::size_t{0});
  Rng rng(1);
  const auto tree = grow_tree(x, y, samples, TreeOptions{1, 5}, rng);

  const auto nodes = tree.nodes();
  REQUIRE(nodes.size() == 3);
  CHECK(nodes[0].variable == 0);
  CHECK(nodes[0].threshold == 0.0);
  CHECK(nodes[0].impurity_decrease == doctest::Approx(121.5).epsilon(1e-14));
  CHECK(tree.leaf_count() == 2);
  const double left[] = {-0.5};
  const double right[] = {0.5};
  CHECK(tree.predict(left) == 2.0);
  CHECK(tree.predict(right) == 11.0);
  const double boundary[] = {0.0};
  CHECK(tree.predict(boundary) == 2.0);
}

TEST_CASE("tree structure invariants") {
  const Matrix x = testing::random_matrix(80, 4, 12);
  std::vector<double> y(80);
  for (std::size_t i = 0; i < 80; ++i) y[i] = x(i, 0) * 2.0 + x(i, 1) * x(i, 2);
  Rng rng(5);
  std::vector<std::size_t> samples(80);
  for (auto& s : samples) s = rng.below(80);
  const auto tree = grow_tree(x, y, samples, TreeOptions{2, 5}, rng);

  // route every sample and compare with the stored leaf means
  const auto nodes = tree.nodes();
  std::vector<double> sum(nodes.size(), 0.0);
  std::vector<std::size_t> count(nodes.size(), 0);
  for (std::size_t s : samples) {
    int id = 0;
    while (true) {
      sum[id] += y[s];
      ++count[id];
      const auto& node = nodes[id];
      if (node.is_leaf()) break;
      id = x(s, node.variable) <= node.threshold ? node.left : node.right;
    }
  }
  for (std::size_t id = 0; id < nodes.size(); ++id) {
    CAPTURE(id);
    CHECK(count[id] == nodes[id].samples);
    CHECK(nodes[id].prediction == doctest::Approx(sum[id] / count[id]).epsilon(1e-12));
    if (!nodes[id].is_leaf()) {
      CHECK(nodes[nodes[id].left].samples + nodes[nodes[id].right].samples == nodes[id].samples);
      CHECK(nodes[id].samples >= 5);
      CHECK(nodes[id].impurity_decrease >= 0.0);
    }
  }
}

TEST_CASE("leave-one-out cross-validation equals direct single holdouts") {
  const Matrix xv = testing::random_matrix(10, 2, 21);
  std::vector<double> y(10);
  for (std::size_t i = 0; i < 10; ++i) y[i] = 3.0 * xv(i, 0) - xv(i, 1);
  ForestParams params;
  params.n_trees = 5;
  params.mtry = 2;
  params.node_size = 2;
  params.bootstrap = false;  // every tree is then the same deterministic CART fit
  params.seed = 8;
  const auto x = make_features(xv);
  const auto cv = kfold_cv(x, y, 10, params);

  double sse = 0.0;
  for (std::size_t hold = 0; hold < 10; ++hold) {
    Matrix train(9, 2);
    std::vector<double> train_y;
    for (std::size_t i = 0, r = 0; i < 10; ++i) {
      if (i == hold) continue;
      train(r, 0) = xv(i, 0);
      train(r, 1) = xv(i, 1);
      train_y.push_back(y[i]);
      ++r;
    }
    ForestParams single = params;
    single.seed = 1000 + hold;
    const auto model = fit_forest(make_features(train), train_y, single);
    Matrix test(1, 2);
    test(0, 0) = xv(hold, 0);
    test(0, 1) = xv(hold, 1);
    const double e = y[hold] - predict(model, test)[0];
    sse += e * e;
  }
  CHECK(cv.mse == doctest::Approx(sse / 10.0).epsilon(1e-12));
}

TEST_CASE("fold assignment") {
  for (std::size_t n : {10, 37, 100}) {
    for (std::size_t k : {2, 3, 10}) {
      const auto fold = fold_assignment(n, k, 77);
      std::vector<std::size_t> sizes(k, 0);
      for (std::size_t f : fold) ++sizes[f];
      const auto [lo, hi] = std::minmax_element(sizes.begin(), sizes.end());
      CHECK(*hi - *lo <= 1);
    }
  }
  CHECK(kind_of([] { fold_assignment(5, 6, 1); }) == ErrorKind::Parameter);
  CHECK(kind_of([] { fold_assignment(5, 1, 1); }) == ErrorKind::Parameter);
}

TEST_CASE("translation of the response") {
  const Matrix xv = testing::random_matrix(60, 3, 31);
  std::vector<double> y(60), shifted(60);
  for (std::size_t i = 0; i < 60; ++i) {
    y[i] = xv(i, 0) + 0.5 * xv(i, 2);
    shifted[i] = y[i] + 250.0;
  }
  ForestParams params;
  params.n_trees = 40;
  params.seed = 6;
  const auto x = make_features(xv);
  const auto a = fit_forest(x, y, params);
  const auto b = fit_forest(x, shifted, params);
  for (std::size_t t = 0; t < a.trees.size(); ++t) {
    const auto na = a.trees[t].nodes(), nb = b.trees[t].nodes();
    REQUIRE(na.size() == nb.size());
    for (std::size_t i = 0; i < na.size(); ++i) {
      CHECK(na[i].variable == nb[i].variable);
      CHECK(na[i].threshold == nb[i].threshold);
    }
  }
  for (std::size_t c = 0; c < 3; ++c)
    CHECK(b.importance[c] == doctest::Approx(a.importance[c]).epsilon(1e-9));
  const auto pa = predict(a, x), pb = predict(b, x);
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK(std::abs(pb[i] - pa[i] - 250.0) <= 1e-9);
}

TEST_CASE("parameter and schema errors") {
  const auto x = make_features(testing::random_matrix(20, 3, 2));
  const std::vector<double> y(20, 1.0);
  ForestParams params;
  params.n_trees = 5;
  params.mtry = 4;
  CHECK(kind_of([&] { fit_forest(x, y, params); }) == ErrorKind::Parameter);
  params.mtry = 2;
  params.n_trees = 0;
  CHECK(kind_of([&] { fit_forest(x, y, params); }) == ErrorKind::Parameter);
  params.n_trees = 5;
  CHECK(kind_of([&] { vim_corrected(x, y, 0, params); }) == ErrorKind::Parameter);
  CHECK(kind_of([&] { kfold_cv(x, y, 21, params); }) == ErrorKind::Parameter);

  const auto model = fit_forest(x, y, params);
  auto renamed = x;
  renamed.columns[1] = "other";
  CHECK(kind_of([&] { predict(model, renamed); }) == ErrorKind::Schema);
  CHECK(kind_of([&] { predict(model, Matrix(2, 2)); }) == ErrorKind::Schema);

  CHECK(default_mtry(1) == 1);
  CHECK(default_mtry(14) == 3);
  CHECK(default_mtry(16) == 4);
}

TEST_CASE("bootstrap bookkeeping and OOB coverage") {
  Rng rng(4);
  Matrix xv(1000, 1);
  std::vector<double> y(1000);
  for (std::size_t i = 0; i < 1000; ++i) {
    xv(i, 0) = rng.uniform();
    y[i] = xv(i, 0) + 0.1 * rng.normal();
  }
  ForestParams params;
  params.seed = 10;
  params.node_size = 50;
  const auto model = fit_forest(make_features(xv), y, params);
  CHECK(model.trees.size() == 500);
  CHECK(model.oob_covered == 1000);
  for (double p : model.oob_prediction) CHECK(std::isfinite(p));
  for (const auto& bag : model.inbag) CHECK(std::accumulate(bag.begin(), bag.end(), 0u) == 1000u);
}

TEST_CASE("results do not depend on the thread count") {
  const Matrix xv = testing::random_matrix(120, 5, 41);
  std::vector<double> y(120);
  for (std::size_t i = 0; i < 120; ++i) y[i] = xv(i, 0) - xv(i, 3) * xv(i, 1);
  ForestParams params;
  params.n_trees = 64;
  params.seed = 2;
  const auto x = make_features(xv);
  const auto one = fit_forest(x, y, params);
  params.threads = 4;
  const auto four = fit_forest(x, y, params);
  CHECK(one.importance == four.importance);
  CHECK(*one.oob_mse == *four.oob_mse);
  CHECK(predict(one, x) == predict(four, x));

  const auto vim1 = vim_corrected(x, y, 2, params);
  params.threads = 1;
  const auto vim4 = vim_corrected(x, y, 2, params);
  CHECK(vim1.corrected == vim4.corrected);
}

TEST_CASE("canonical row order makes OOB error independent of input order") {
  const Matrix xv = testing::random_matrix(50, 2, 8);
  std::vector<double> y(50);
  for (std::size_t i = 0; i < 50; ++i) y[i] = xv(i, 0) + xv(i, 1);
  auto x = make_features(xv);

  Rng rng(3);
  const auto perm = rng.permutation(50);
  FeatureMatrix shuffled = x;
  std::vector<double> shuffled_y(50);
  for (std::size_t i = 0; i < 50; ++i) {
    shuffled.row_ids[i] = x.row_ids[perm[i]];
    for (std::size_t c = 0; c < 2; ++c) shuffled.values(i, c) = xv(perm[i], c);
    shuffled_y[i] = y[perm[i]];
  }
  // canonicalize by ascending id
  std::vector<std::size_t> order(50);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return shuffled.row_ids[a] < shuffled.row_ids[b]; });
  FeatureMatrix canonical = shuffled;
  std::vector<double> canonical_y(50);
  for (std::size_t i = 0; i < 50; ++i) {
    canonical.row_ids[i] = shuffled.row_ids[order[i]];
    for (std::size_t c = 0; c < 2; ++c) canonical.values(i, c) = shuffled.values(order[i], c);
    canonical_y[i] = shuffled_y[order[i]];
  }
  ForestParams params;
  params.n_trees = 100;
  params.seed = 19;
  CHECK(*fit_forest(canonical, canonical_y, params).oob_mse == *fit_forest(x, y, params).oob_mse);
}

TEST_CASE("OOB and cross-validated r2 agree on smooth signal") {
  Rng rng(2024);
  Matrix xv(300, 3);
  std::vector<double> y(300);
  for (std::size_t i = 0; i < 300; ++i) {
    for (std::size_t c = 0; c < 3; ++c) xv(i, c) = rng.uniform() * 4.0 - 2.0;
    y[i] = 3.0 * std::sin(xv(i, 0)) + 2.0 * xv(i, 1) + 0.3 * rng.normal();
  }
  // signal variance is far above 10x the noise variance of 0.09
  ForestParams params;
  params.seed = 5;
  const auto x = make_features(xv);
  const auto model = fit_forest(x, y, params);
  const auto cv = kfold_cv(x, y, 10, params);
  REQUIRE(model.oob_r2.has_value());
  REQUIRE(cv.r2.has_value());
  CHECK(std::abs(*model.oob_r2 - *cv.r2) <= 0.05);
}

TEST_CASE("corrected importance of pure noise stays within its permutation spread") {
  Rng rng(71);
  Matrix xv(150, 1);
  std::vector<double> y(150);
  for (std::size_t i = 0; i < 150; ++i) {
    xv(i, 0) = rng.normal();
    y[i] = rng.normal();
  }
  ForestParams params;
  params.n_trees = 100;
  params.seed = 12;
  const auto report = vim_corrected(make_features(xv), y, 20, params);
  std::vector<double> replicate_abs;
  for (const auto& rep : report.corrected_by_replication) replicate_abs.push_back(std::abs(rep[0]));
  CHECK(report.corrected_by_replication.size() == 20);
  std::sort(replicate_abs.begin(), replicate_abs.end());
  const double q95 = replicate_abs[static_cast<std::size_t>(0.95 * (replicate_abs.size() - 1))];
  CHECK(std::abs(report.corrected[0]) < q95);
  CHECK(report.corrected[0] == doctest::Approx(report.raw[0] - report.shadow[0]).epsilon(1e-12));
}

TEST_CASE("a duplicated predictor splits its importance") {
  Rng rng(8);
  const std::size_t n = 200;
  Matrix single(n, 2), doubled(n, 3);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double signal = rng.normal();
    const double noise = rng.normal();
    y[i] = 2.0 * signal + 0.2 * rng.normal();
    single(i, 0) = doubled(i, 0) = doubled(i, 1) = signal;
    single(i, 1) = doubled(i, 2) = noise;
  }
  ForestParams params;
  params.n_trees = 200;
  params.mtry = 1;
  params.seed = 1;
  const auto one = vim_corrected(make_features(single), y, 5, params);
  const auto two = vim_corrected(make_features(doubled), y, 5, params);
  CHECK(two.corrected[0] > 0.0);
  CHECK(two.corrected[1] > 0.0);
  const double sum = two.corrected[0] + two.corrected[1];
  CHECK(std::abs(sum - one.corrected[0]) <= 0.25 * one.corrected[0]);
}

TEST_CASE("variable selection") {
  SUBCASE("dominant gap after position two") {
    const auto s = select_variables(report_with({9, 1, 10, 0.9}));
    CHECK(s.variables == std::vector<std::string>{"v3", "v1"});
    CHECK(s.gap_position == 2);
    CHECK(s.warnings.empty());
  }
  SUBCASE("all equal selects everything with a warning") {
    const auto s = select_variables(report_with({2, 2, 2, 2, 2}));
    CHECK(s.variables.size() == 5);
    CHECK(s.gap_position == 0);
    CHECK(s.warnings.size() == 1);
  }
  SUBCASE("gap inside the positive range") {
    const auto s = select_variables(report_with({50, 40, 30, 29, 3, 2.9, -1}));
    CHECK(s.variables == std::vector<std::string>{"v1", "v2", "v3", "v4"});
  }
  SUBCASE("at least two are selected") {
    CHECK(select_variables(report_with({100, 1, 0.9})).variables.size() == 2);
    CHECK(select_variables(report_with({5, -1, -2})).variables == std::vector<std::string>{"v1", "v2"});
  }
  SUBCASE("no positive importance") {
    CHECK(kind_of([] { select_variables(report_with({0, -1, -2})); }) == ErrorKind::NoSignal);
  }
  SUBCASE("manual override") {
    const std::vector<std::string> manual = {"v4", "v1"};
    const auto s = select_variables(report_with({9, 1, 10, 0.9}), manual);
    CHECK(s.variables == std::vector<std::string>{"v1", "v4"});
    const std::vector<std::string> unknown = {"nope"};
    CHECK(kind_of([&] { select_variables(report_with({1, 2}), unknown); }) == ErrorKind::Parameter);
  }
}

TEST_CASE("vim.csv is ordered by corrected importance") {
  auto r = report_with({1.5, 3.25, -0.5});
  r.selected = {"v2", "v1"};
  std::ostringstream out;
  write_vim_csv(out, r);
  CHECK(out.str() ==
        "variable,raw_vim,corrected_vim,selected\n"
        "v2,3.25,3.25,1\n"
        "v1,1.5,1.5,1\n"
        "v3,-0.5,-0.5,0\n");
}

TEST_CASE("population variance") {
  const std::vector<double> v = {1, 2, 3, 4};
  CHECK(population_variance(v) == 1.25);
  CHECK(mean(v) == 2.5);
}

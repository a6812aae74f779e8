#include "teamcluster/clustering.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <thread>

#include "teamcluster/csv.hpp"
#include "teamcluster/error.hpp"
#include "teamcluster/rng.hpp"
#include "teamcluster/simd/kernels.hpp"

namespace teamcluster::clustering {

namespace {

// Couplings below this fraction of the largest degree are beneath the
// resolution of the eigensolver, so such graphs are split by components.
constexpr double kNegligibleEdge = 1e-12;

std::vector<std::vector<std::size_t>> components(const Matrix& adjacency, double min_weight) {
  const std::size_t n = adjacency.rows();
  std::vector<int> comp(n, -1);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < n; ++start) {
    if (comp[start] >= 0) continue;
    const int id = static_cast<int>(out.size());
    out.emplace_back();
    std::vector<std::size_t> stack{start};
    comp[start] = id;
    while (!stack.empty()) {
      const std::size_t v = stack.back();
      stack.pop_back();
      out[id].push_back(v);
      for (std::size_t u = 0; u < n; ++u)
        if (comp[u] < 0 && adjacency(v, u) > min_weight) {
          comp[u] = id;
          stack.push_back(u);
        }
    }
    std::sort(out[id].begin(), out[id].end());
  }
  return out;
}

// Maps arbitrary labels to dense indices 0..k-1 in ascending label order.
std::vector<std::size_t> dense_labels(std::span<const int> labels, std::size_t& k) {
  std::map<int, std::size_t> index;
  for (int l : labels) index.emplace(l, 0);
  std::size_t next = 0;
  for (auto& [label, idx] : index) idx = next++;
  k = index.size();
  std::vector<std::size_t> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) out[i] = index[labels[i]];
  return out;
}

void check_labels(std::span<const int> labels, const Matrix& distances) {
  require(distances.rows() == labels.size() && distances.cols() == labels.size(),
          ErrorKind::Schema, "labels and distance matrix cover different entity counts");
}

int count_distinct(std::span<const int> labels) {
  std::vector<int> sorted(labels.begin(), labels.end());
  std::sort(sorted.begin(), sorted.end());
  return static_cast<int>(std::unique(sorted.begin(), sorted.end()) - sorted.begin());
}

}  // namespace

Bisection fiedler_bisect(const spectral::SpectralGraph& graph, std::span<const std::size_t> members) {
  require(members.size() >= 2, ErrorKind::Parameter, "bisection needs at least two members");
  std::vector<std::size_t> sorted(members.begin(), members.end());
  std::sort(sorted.begin(), sorted.end());
  require(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end(), ErrorKind::Parameter,
          "bisection members must be distinct");
  require(sorted.back() < graph.size(), ErrorKind::Parameter, "bisection member out of range");

  const std::size_t m = sorted.size();
  Matrix sub(m, m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j)
      if (i != j) sub(i, j) = graph.adjacency(sorted[i], sorted[j]);

  Bisection out;
  const spectral::SpectralGraph subgraph = spectral::graph_from_adjacency(sub);
  const double max_degree = *std::max_element(subgraph.degree.begin(), subgraph.degree.end());
  const auto parts = components(subgraph.adjacency, kNegligibleEdge * max_degree);
  if (parts.size() > 1) {
    out.by_components = true;
    std::vector<bool> in_first(m, false);
    for (std::size_t v : parts.front()) in_first[v] = true;
    for (std::size_t i = 0; i < m; ++i) (in_first[i] ? out.part_a : out.part_b).push_back(sorted[i]);
    return out;
  }

  const spectral::Eigenmap map = spectral::eigendecompose(subgraph.normalized);
  out.fiedler_value = map.eigenvalues[1];

  // When the graph is numerically disconnected the solver may return any basis
  // of the near-null space; re-impose orthogonality to the exact null vector
  // D^1/2 1 so the split still follows the weakly linked groups.
  std::vector<double> fiedler = map.vector(1);
  std::vector<double> null(m);
  for (std::size_t i = 0; i < m; ++i) null[i] = std::sqrt(subgraph.degree[i]);
  const double overlap = simd::dot(null, fiedler) / simd::dot(null, null);
  for (std::size_t i = 0; i < m; ++i) fiedler[i] -= overlap * null[i];
  spectral::fix_sign(fiedler);

  for (std::size_t i = 0; i < m; ++i) (fiedler[i] >= 0.0 ? out.part_a : out.part_b).push_back(sorted[i]);
  if (out.part_a.empty() || out.part_b.empty())
    fail(ErrorKind::Unsplittable, "Fiedler vector of a " + std::to_string(m) +
                                      "-member subgraph has a single sign");
  return out;
}

SilhouetteResult silhouette(std::span<const int> labels, const Matrix& distances) {
  check_labels(labels, distances);
  std::size_t k = 0;
  const std::vector<std::size_t> dense = dense_labels(labels, k);
  require(k >= 2, ErrorKind::Degenerate, "silhouette is undefined for a single cluster");

  const std::size_t n = labels.size();
  std::vector<std::size_t> sizes(k, 0);
  for (std::size_t c : dense) ++sizes[c];

  SilhouetteResult out;
  out.widths.assign(n, 0.0);
  std::vector<double> sums(k);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t own = dense[i];
    if (sizes[own] == 1) continue;
    std::fill(sums.begin(), sums.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) sums[dense[j]] += distances(i, j);
    const double a = sums[own] / static_cast<double>(sizes[own] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c)
      if (c != own) b = std::min(b, sums[c] / static_cast<double>(sizes[c]));
    const double denom = std::max(a, b);
    out.widths[i] = denom > 0.0 ? (b - a) / denom : 0.0;
  }
  double total = 0.0;
  for (double w : out.widths) total += w;
  out.average = total / static_cast<double>(n);
  return out;
}

std::vector<double> cluster_silhouettes(std::span<const int> labels, std::span<const double> widths) {
  int k = 0;
  for (int l : labels) k = std::max(k, l);
  std::vector<double> total(k, 0.0);
  std::vector<std::size_t> count(k, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    total[labels[i] - 1] += widths[i];
    ++count[labels[i] - 1];
  }
  for (int c = 0; c < k; ++c) total[c] = count[c] ? total[c] / static_cast<double>(count[c]) : 0.0;
  return total;
}

double dunn(std::span<const int> labels, const Matrix& distances) {
  check_labels(labels, distances);
  std::size_t k = 0;
  const std::vector<std::size_t> dense = dense_labels(labels, k);
  require(k >= 2, ErrorKind::Degenerate, "Dunn index is undefined for a single cluster");
  double separation = std::numeric_limits<double>::infinity();
  double diameter = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i)
    for (std::size_t j = i + 1; j < labels.size(); ++j) {
      const double d = distances(i, j);
      if (dense[i] == dense[j])
        diameter = std::max(diameter, d);
      else
        separation = std::min(separation, d);
    }
  if (!(diameter > 0.0))
    fail(ErrorKind::Degenerate, "Dunn index: every cluster has zero diameter");
  return separation / diameter;
}

namespace {

void renumber_by_fiedler(Labels& labels, std::span<const double> fiedler, int k) {
  std::vector<double> mean(k, 0.0);
  std::vector<std::size_t> count(k, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    mean[labels[i] - 1] += fiedler[i];
    ++count[labels[i] - 1];
  }
  for (int c = 0; c < k; ++c) mean[c] /= static_cast<double>(count[c]);
  std::vector<int> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return mean[a] > mean[b]; });
  std::vector<int> new_id(k);
  for (int rank = 0; rank < k; ++rank) new_id[order[rank]] = rank + 1;
  for (int& l : labels) l = new_id[l - 1];
}

ClusterAssignment finish(Labels labels, int k, const Matrix& distances, std::vector<TraceStep> trace,
                         std::span<const double> fiedler) {
  renumber_by_fiedler(labels, fiedler, k);
  ClusterAssignment out;
  out.k = k;
  const SilhouetteResult s = silhouette(labels, distances);
  out.silhouette = s.widths;
  out.avg_silhouette = s.average;
  try {
    out.dunn = dunn(labels, distances);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::Degenerate) throw;
  }
  out.labels = std::move(labels);
  out.trace = std::move(trace);
  return out;
}

ClusterAssignment bisect_recursively(const spectral::SpectralGraph& graph, int k,
                                     const Matrix& distances, std::span<const double> fiedler) {
  const std::size_t n = graph.size();
  std::vector<std::vector<std::size_t>> clusters(1);
  clusters[0].resize(n);
  std::iota(clusters[0].begin(), clusters[0].end(), std::size_t{0});
  std::vector<std::optional<Bisection>> cached(1);
  std::vector<bool> tried(1, false);
  Labels labels(n, 1);
  std::vector<TraceStep> trace;

  for (int step = 1; step < k; ++step) {
    int best = -1;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < clusters.size(); ++c) {
      if (clusters[c].size() < 2) continue;
      if (!tried[c]) {
        tried[c] = true;
        try {
          cached[c] = fiedler_bisect(graph, clusters[c]);
        } catch (const Error& e) {
          if (e.kind() != ErrorKind::Unsplittable && e.kind() != ErrorKind::Degenerate) throw;
        }
      }
      if (!cached[c]) continue;
      Labels candidate = labels;
      for (std::size_t v : cached[c]->part_b) candidate[v] = static_cast<int>(clusters.size()) + 1;
      const double score = silhouette(candidate, distances).average;
      const bool better =
          best < 0 || score > best_score + 1e-12 ||
          (std::abs(score - best_score) <= 1e-12 && clusters[c].size() > clusters[best].size());
      if (better) {
        best = static_cast<int>(c);
        best_score = score;
      }
    }
    if (best < 0) {
      std::string msg = "no splittable cluster after " + std::to_string(step - 1) +
                        " bisections (target k = " + std::to_string(k) + "); trace:";
      for (const TraceStep& t : trace)
        msg += " [step " + std::to_string(t.step) + ": cluster " + std::to_string(t.split_cluster) +
               " -> " + std::to_string(t.size_a) + "+" + std::to_string(t.size_b) + "]";
      fail(ErrorKind::Unsplittable, msg);
    }

    const Bisection split = *cached[best];
    const int new_id = static_cast<int>(clusters.size()) + 1;
    for (std::size_t v : split.part_b) labels[v] = new_id;
    trace.push_back({step, best + 1, split.part_a.size(), split.part_b.size(), split.fiedler_value,
                     0.0, best_score});
    clusters[best] = split.part_a;
    clusters.push_back(split.part_b);
    cached[best].reset();
    tried[best] = false;
    cached.emplace_back();
    tried.push_back(false);
  }
  return finish(std::move(labels), k, distances, std::move(trace), fiedler);
}

ClusterAssignment split_global_gaps(const spectral::Eigenmap& global, int k,
                                    const Matrix& distances) {
  const std::vector<double> fiedler = global.vector(1);
  const std::size_t n = fiedler.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return fiedler[a] < fiedler[b]; });
  std::vector<std::size_t> gaps(n - 1);
  std::iota(gaps.begin(), gaps.end(), std::size_t{0});
  const auto gap = [&](std::size_t g) { return fiedler[order[g + 1]] - fiedler[order[g]]; };
  std::stable_sort(gaps.begin(), gaps.end(), [&](std::size_t a, std::size_t b) { return gap(a) > gap(b); });
  if (gap(gaps[k - 2]) <= 0.0)
    fail(ErrorKind::Unsplittable, "global Fiedler coordinate has fewer than " +
                                      std::to_string(k) + " distinct values");

  std::vector<std::size_t> cuts(gaps.begin(), gaps.begin() + (k - 1));
  std::vector<TraceStep> trace;
  for (int s = 0; s < k - 1; ++s) {
    const std::size_t g = cuts[s];
    TraceStep t;
    t.step = s + 1;
    t.threshold = 0.5 * (fiedler[order[g]] + fiedler[order[g + 1]]);
    t.fiedler_value = global.eigenvalues[1];
    trace.push_back(t);
  }
  std::sort(cuts.begin(), cuts.end());
  Labels labels(n);
  int segment = 1;
  std::size_t next_cut = 0;
  for (std::size_t r = 0; r < n; ++r) {
    labels[order[r]] = segment;
    if (next_cut < cuts.size() && cuts[next_cut] == r) {
      ++segment;
      ++next_cut;
    }
  }
  for (TraceStep& t : trace) {
    for (std::size_t i = 0; i < n; ++i) (fiedler[i] > t.threshold ? t.size_b : t.size_a)++;
  }
  return finish(std::move(labels), k, distances, std::move(trace), fiedler);
}

}  // namespace

ClusterAssignment recursive_bisection(const spectral::SpectralGraph& graph,
                                      const spectral::Eigenmap& global, int k,
                                      const Matrix& distances, BisectionStrategy strategy) {
  const std::size_t n = graph.size();
  require(k >= 2 && static_cast<std::size_t>(k) <= n, ErrorKind::Parameter,
          "cluster count k = " + std::to_string(k) + " outside [2, " + std::to_string(n) + "]");
  require(global.size() == n, ErrorKind::Parameter, "eigenmap and graph sizes differ");
  require(distances.rows() == n, ErrorKind::Parameter, "distance matrix and graph sizes differ");
  if (strategy == BisectionStrategy::GlobalGaps) return split_global_gaps(global, k, distances);
  const std::vector<double> fiedler = global.vector(1);
  return bisect_recursively(graph, k, distances, fiedler);
}

ClusterAssignment recursive_bisection(const spectral::SpectralGraph& graph, int k,
                                      const Matrix& distances, BisectionStrategy strategy) {
  const spectral::Eigenmap global = spectral::eigendecompose(graph.normalized);
  return recursive_bisection(graph, global, k, distances, strategy);
}

Labels som_cluster(const Matrix& features, int k, const SomConfig& config) {
  const std::size_t n = features.rows();
  require(k >= 1, ErrorKind::Parameter, "SOM needs at least one unit");
  require(static_cast<std::size_t>(k) <= n, ErrorKind::Parameter,
          "SOM units k = " + std::to_string(k) + " exceed rows n = " + std::to_string(n));
  require(config.epochs >= 1, ErrorKind::Parameter, "SOM needs at least one epoch");
  require(config.rate_end > 0.0 && config.rate_end <= config.rate_start, ErrorKind::Parameter,
          "SOM learning rates must satisfy 0 < end <= start");
  if (k == 1) return Labels(n, 1);

  const std::size_t units = static_cast<std::size_t>(k);
  Rng rng(config.seed);
  const std::vector<std::size_t> init = rng.permutation(n);
  Matrix proto(units, features.cols());
  for (std::size_t u = 0; u < units; ++u)
    std::copy_n(features.row(init[u]).begin(), features.cols(), proto.row(u).begin());

  const auto bmu = [&](std::span<const double> x) {
    std::size_t best = 0;
    double best_d = simd::squared_distance(proto.row(0), x);
    for (std::size_t u = 1; u < units; ++u) {
      const double d = simd::squared_distance(proto.row(u), x);
      if (d < best_d) {
        best_d = d;
        best = u;
      }
    }
    return best;
  };

  const double total_steps = static_cast<double>(config.epochs) * static_cast<double>(n);
  const double radius_start = std::ceil(static_cast<double>(k) / 2.0);
  double step = 0.0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const std::vector<std::size_t> order = rng.permutation(n);
    for (std::size_t r : order) {
      const double progress = step / total_steps;
      const double rate = config.rate_start + (config.rate_end - config.rate_start) * progress;
      const double radius = radius_start * (1.0 - progress);
      const std::size_t winner = bmu(features.row(r));
      for (std::size_t u = 0; u < units; ++u) {
        const double grid = std::abs(static_cast<double>(u) - static_cast<double>(winner));
        if (u == winner || grid < radius) simd::move_toward(proto.row(u), features.row(r), rate);
      }
      step += 1.0;
    }
  }

  std::vector<std::size_t> unit(n);
  const auto assign = [&] {
    std::vector<std::size_t> sizes(units, 0);
    for (std::size_t i = 0; i < n; ++i) ++sizes[unit[i] = bmu(features.row(i))];
    return sizes;
  };
  std::vector<std::size_t> sizes = assign();
  // each unit left empty after training is reseeded once, from the row that
  // lies farthest from its own prototype among rows sharing a unit
  std::vector<bool> reseeded(units, false);
  for (std::size_t u = 0; u < units; ++u) {
    if (sizes[u] != 0 || reseeded[u]) continue;
    reseeded[u] = true;
    std::size_t far = n;
    double far_d = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (sizes[unit[i]] < 2) continue;
      const double d = simd::squared_distance(proto.row(unit[i]), features.row(i));
      if (d > far_d) {
        far_d = d;
        far = i;
      }
    }
    if (far == n) break;
    std::copy_n(features.row(far).begin(), features.cols(), proto.row(u).begin());
    sizes = assign();
    u = static_cast<std::size_t>(-1);  // rescan: reseeding may empty another unit
  }

  std::vector<int> dense(units, 0);
  int next = 0;
  for (std::size_t u = 0; u < units; ++u)
    if (sizes[u] > 0) dense[u] = ++next;
  Labels labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = dense[unit[i]];
  return labels;
}

Validation validate_k(const Matrix& features, const Matrix& distances, int k_min, int k_max,
                      const SomConfig& config, unsigned threads) {
  require(k_min >= 2 && k_min <= k_max, ErrorKind::Parameter, "validation range must satisfy 2 <= min <= max");
  require(static_cast<std::size_t>(k_max) <= features.rows(), ErrorKind::Parameter,
          "validation k_max exceeds the number of rows");
  require(distances.rows() == features.rows(), ErrorKind::Parameter,
          "distance matrix and features cover different entity counts");

  Validation out;
  out.rows.resize(static_cast<std::size_t>(k_max - k_min + 1));
  const auto evaluate = [&](std::size_t idx) {
    const int k = k_min + static_cast<int>(idx);
    SomConfig cfg = config;
    cfg.seed = derive_seed(config.seed, {static_cast<std::uint64_t>(k)});
    const Labels labels = som_cluster(features, k, cfg);
    ValidationRow& row = out.rows[idx];
    row.k = k;
    row.clusters_found = count_distinct(labels);
    if (row.clusters_found < 2) return;
    row.avg_silhouette = silhouette(labels, distances).average;
    try {
      row.dunn = dunn(labels, distances);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::Degenerate) throw;
    }
  };

  const std::size_t count = out.rows.size();
  const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(count)));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) evaluate(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(count);
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t i; (i = next.fetch_add(1)) < count;) {
          try {
            evaluate(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    for (auto& t : pool) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  const auto argmax = [&](auto key, auto tiebreak) {
    int best = 0;
    const ValidationRow* best_row = nullptr;
    for (const ValidationRow& row : out.rows) {
      const std::optional<double> v = key(row);
      if (!v) continue;
      if (!best_row) {
        best_row = &row;
        continue;
      }
      const double bv = *key(*best_row);
      if (*v > bv + 1e-12 || (std::abs(*v - bv) <= 1e-12 && tiebreak(row, *best_row)))
        best_row = &row;
    }
    if (best_row) best = best_row->k;
    return best;
  };
  const auto by_silhouette = [](const ValidationRow& r) { return r.avg_silhouette; };
  const auto by_dunn = [](const ValidationRow& r) { return r.dunn; };
  const auto never = [](const ValidationRow&, const ValidationRow&) { return false; };
  const auto dunn_higher = [](const ValidationRow& a, const ValidationRow& b) {
    return a.dunn.value_or(-1.0) > b.dunn.value_or(-1.0) + 1e-12;
  };

  out.silhouette_argmax = argmax(by_silhouette, never);
  out.dunn_argmax = argmax(by_dunn, never);
  out.chosen_k = argmax(by_silhouette, dunn_higher);
  if (out.chosen_k == 0)
    fail(ErrorKind::Degenerate, "no candidate k produced two or more clusters");
  out.indices_disagree = out.dunn_argmax != out.silhouette_argmax;
  return out;
}

void write_validation_csv(std::ostream& out, const Validation& validation) {
  out << "k,dunn,avg_silhouette\n";
  for (const ValidationRow& row : validation.rows) {
    out << row.k << ',' << (row.dunn ? csv::format_significant(*row.dunn) : "") << ','
        << (row.avg_silhouette ? csv::format_significant(*row.avg_silhouette) : "") << '\n';
  }
}

}  // namespace teamcluster::clustering

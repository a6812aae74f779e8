#include "teamcluster/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <utility>

#include <json.hpp>

#include "teamcluster/csv.hpp"
#include "teamcluster/error.hpp"
#include "teamcluster/forest.hpp"
#include "teamcluster/rng.hpp"
#include "teamcluster/spectral.hpp"
#include "teamcluster/stats.hpp"

namespace teamcluster::pipeline {

using Json = nlohmann::ordered_json;

namespace {

constexpr const char* kToolVersion = "1.0.0";

// Seed streams for the randomized stages.
enum StreamId : std::uint64_t {
  kExploratoryForest = 1,
  kVim = 2,
  kRefinedForest = 3,
  kCrossValidation = 4,
  kSom = 5,
};

Json number(double v) {
  if (!std::isfinite(v)) return nullptr;
  return std::strtod(csv::format_significant(v, 12).c_str(), nullptr);
}

Json number(const std::optional<double>& v) { return v ? number(*v) : Json(nullptr); }

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

const char* strategy_name(clustering::BisectionStrategy s) {
  return s == clustering::BisectionStrategy::GlobalGaps ? "global-gaps" : "recursive-subgraph";
}

template <typename Fn>
auto in_stage(const char* name, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(e.kind(), std::string("[") + name + "] " + e.what());
  }
}

Json config_object(const PipelineConfig& c) {
  Json j;
  j["input"] = c.input.generic_string();
  j["response"] = c.response;
  j["excluded"] = c.excluded;
  j["features"] = c.features;
  j["n_trees"] = c.n_trees;
  j["mtry"] = c.mtry ? Json(*c.mtry) : Json(nullptr);
  j["node_size"] = c.node_size;
  j["vim_replications"] = c.vim_replications;
  j["cv_folds"] = c.cv_folds;
  j["sigma"] = number(c.sigma);
  j["standardize"] = c.standardize;
  j["k_min"] = c.k_min;
  j["k_max"] = c.k_max;
  j["k"] = c.k ? Json(*c.k) : Json(nullptr);
  j["strategy"] = strategy_name(c.strategy);
  j["som_epochs"] = c.som_epochs;
  j["som_rate_start"] = number(c.som_rate_start);
  j["som_rate_end"] = number(c.som_rate_end);
  j["benchmark_low_q"] = number(c.low_q);
  j["benchmark_high_q"] = number(c.high_q);
  j["seed"] = c.seed;
  return j;
}

struct Artifacts {
  std::vector<std::pair<std::filesystem::path, std::string>> files;

  void add(std::filesystem::path name, std::string content) {
    files.emplace_back(std::move(name), std::move(content));
  }

  std::vector<std::filesystem::path> commit(const std::filesystem::path& dir) const {
    std::vector<std::filesystem::path> written;
    try {
      std::filesystem::create_directories(dir);
      for (const auto& [name, content] : files) {
        const std::filesystem::path target = dir / name;
        const std::filesystem::path tmp = dir / (name.string() + ".tmp");
        {
          std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
          if (!out) fail(ErrorKind::Io, "cannot open " + tmp.string() + " for writing");
          out << content;
          out.close();
          if (!out) fail(ErrorKind::Io, "failed writing " + tmp.string());
        }
        std::filesystem::rename(tmp, target);
        written.push_back(name);
      }
    } catch (...) {
      std::error_code ec;
      for (const auto& name : written) std::filesystem::remove(dir / name, ec);
      for (const auto& [name, content] : files) std::filesystem::remove(dir / (name.string() + ".tmp"), ec);
      throw;
    }
    return written;
  }
};

struct Header {
  std::string stage_hash;
  std::map<std::string, std::string> extra;
};

std::string header_line(const char* comment, const PipelineConfig& c, std::uint64_t input_hash,
                        const std::string& stage_hash, const std::string& extra = {}) {
  std::string line = std::string(comment) + " teamcluster " + kToolVersion + " seed=" +
                     std::to_string(c.seed) + " input_fnv1a=" + hex(input_hash) +
                     " stage_hash=" + stage_hash;
  if (!extra.empty()) line += " " + extra;
  line += " config=" + config_json(c) + "\n";
  return line;
}

// Reads "key=value" tokens from an artifact's first line; stops at config=.
std::optional<Header> read_header(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::string line;
  if (!in || !std::getline(in, line)) return std::nullopt;
  Header h;
  std::istringstream tokens(line);
  std::string tok;
  while (tokens >> tok) {
    if (tok.starts_with("config=")) break;
    const auto eq = tok.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = tok.substr(0, eq);
    const std::string value = tok.substr(eq + 1);
    if (key == "stage_hash")
      h.stage_hash = value;
    else
      h.extra[key] = value;
  }
  if (h.stage_hash.empty()) return std::nullopt;
  return h;
}

struct Loaded {
  std::string bytes;
  std::uint64_t input_hash = 0;
  std::vector<TeamSeason> seasons;
  std::vector<TeamAggregate> aggregates;
  BenchmarkThresholds thresholds{};
};

Loaded load(const PipelineConfig& c) {
  Loaded d;
  std::ifstream in(c.input, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot read input " + c.input.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  d.bytes = buf.str();
  d.input_hash = fnv1a(d.bytes);
  d.seasons = parse_team_seasons(std::string_view(d.bytes));
  require(!d.seasons.empty(), ErrorKind::EmptyInput, "input contains no season records");
  d.aggregates = aggregate(d.seasons);
  d.thresholds = benchmark_classify(d.aggregates, c.low_q, c.high_q);
  return d;
}

std::vector<std::string> predictor_names(const PipelineConfig& c) {
  require(variable_from_name(c.response).has_value(), ErrorKind::Parameter,
          "unknown response variable '" + c.response + "'");
  for (const std::string& name : c.excluded)
    require(variable_from_name(name).has_value(), ErrorKind::Parameter,
            "unknown excluded variable '" + name + "'");
  std::vector<std::string> out;
  for (Variable v : all_variables()) {
    const std::string name(variable_name(v));
    if (name == c.response) continue;
    if (std::find(c.excluded.begin(), c.excluded.end(), name) != c.excluded.end()) continue;
    out.push_back(name);
  }
  require(!out.empty(), ErrorKind::Parameter, "no predictor variables remain after exclusions");
  return out;
}

forest::ForestParams forest_params(const PipelineConfig& c, StreamId stream) {
  forest::ForestParams p;
  p.n_trees = c.n_trees;
  p.mtry = c.mtry;
  p.node_size = c.node_size;
  p.seed = derive_seed(c.seed, {stream});
  p.threads = c.threads;
  return p;
}

std::string vim_stage_hash(const PipelineConfig& c, std::uint64_t input_hash) {
  Json j;
  j["input"] = hex(input_hash);
  j["response"] = c.response;
  j["excluded"] = c.excluded;
  j["features"] = c.features;
  j["n_trees"] = c.n_trees;
  j["mtry"] = c.mtry ? Json(*c.mtry) : Json(nullptr);
  j["node_size"] = c.node_size;
  j["vim_replications"] = c.vim_replications;
  j["seed"] = c.seed;
  return hex(fnv1a(j.dump()));
}

std::string validation_stage_hash(const PipelineConfig& c, const std::string& vim_hash) {
  Json j;
  j["vim"] = vim_hash;
  j["standardize"] = c.standardize;
  j["k_min"] = c.k_min;
  j["k_max"] = c.k_max;
  j["som_epochs"] = c.som_epochs;
  j["som_rate_start"] = number(c.som_rate_start);
  j["som_rate_end"] = number(c.som_rate_end);
  j["seed"] = c.seed;
  return hex(fnv1a(j.dump()));
}

std::optional<std::vector<std::string>> resume_selection(const std::filesystem::path& path,
                                                         const std::string& stage_hash) {
  const auto header = read_header(path);
  if (!header || header->stage_hash != stage_hash) return std::nullopt;
  std::ifstream in(path);
  csv::Reader reader(in);
  auto cols = reader.next();
  if (!cols || cols->size() != 4) return std::nullopt;
  std::vector<std::string> selected;
  while (auto row = reader.next()) {
    if (row->size() != 4) return std::nullopt;
    if ((*row)[3] == "1") selected.push_back((*row)[0]);
  }
  if (selected.empty()) return std::nullopt;
  return selected;
}

std::optional<int> resume_chosen_k(const std::filesystem::path& path, const std::string& stage_hash) {
  const auto header = read_header(path);
  if (!header || header->stage_hash != stage_hash) return std::nullopt;
  auto it = header->extra.find("chosen_k");
  if (it == header->extra.end()) return std::nullopt;
  return std::atoi(it->second.c_str());
}

}  // namespace

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t basis) {
  std::uint64_t h = basis;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string config_json(const PipelineConfig& config) { return config_object(config).dump(); }

Crosstab crosstab(std::span<const int> clusters, std::span<const BenchmarkLabel> benchmark,
                  const Matrix& distances) {
  require(clusters.size() == benchmark.size(), ErrorKind::Schema,
          "cluster and benchmark label vectors differ in length");
  int k = 0;
  for (int c : clusters) {
    require(c >= 1, ErrorKind::Schema, "cluster ids must start at 1");
    k = std::max(k, c);
  }
  Crosstab out;
  out.counts = Matrix(static_cast<std::size_t>(k), 3);
  std::vector<int> bench_ids(benchmark.size());
  for (std::size_t i = 0; i < clusters.size(); ++i) {
    const auto b = static_cast<std::size_t>(benchmark[i]);
    out.counts(static_cast<std::size_t>(clusters[i] - 1), b) += 1.0;
    bench_ids[i] = static_cast<int>(b) + 1;
  }
  std::set<int> distinct(bench_ids.begin(), bench_ids.end());
  if (distinct.size() >= 2) out.benchmark_avg_silhouette = clustering::silhouette(bench_ids, distances).average;
  return out;
}

std::string export_network(const Matrix& distances, std::span<const NetworkVertex> vertices,
                           double epsilon, const std::string& header_comment) {
  require(distances.rows() == vertices.size() && distances.cols() == vertices.size(),
          ErrorKind::Schema, "network vertices and distance matrix differ in size");
  require(epsilon > 0.0, ErrorKind::Parameter, "network epsilon must be positive");
  const auto quote = [](const std::string& s) {
    std::string out = "\"";
    for (char ch : s) {
      if (ch == '"' || ch == '\\') out += '\\';
      out += ch;
    }
    return out + "\"";
  };
  std::string dot = header_comment;
  dot += "graph G {\n";
  for (const NetworkVertex& v : vertices)
    dot += "  " + std::to_string(v.id) + " [label=" + quote(v.name) +
           ", cluster=" + std::to_string(v.cluster) + ", benchmark=" + quote(v.benchmark) + "];\n";
  for (std::size_t i = 0; i < vertices.size(); ++i)
    for (std::size_t j = i + 1; j < vertices.size(); ++j) {
      const double w = 1.0 / std::max(distances(i, j), epsilon);
      dot += "  " + std::to_string(vertices[i].id) + " -- " + std::to_string(vertices[j].id) +
             " [weight=" + csv::format_significant(w, 12) + "];\n";
    }
  dot += "}\n";
  return dot;
}

StageResult run_stage(Stage stage, const PipelineConfig& c) {
  require(c.n_trees >= 1, ErrorKind::Parameter, "n_trees must be at least 1");
  require(c.vim_replications >= 1, ErrorKind::Parameter, "VIM replications must be at least 1");
  require(c.sigma > 0.0, ErrorKind::Parameter, "sigma must be positive");
  require(c.k_min >= 2 && c.k_min <= c.k_max, ErrorKind::Parameter,
          "k range must satisfy 2 <= k_min <= k_max");

  Json report;
  std::vector<std::string> warnings;
  Artifacts artifacts;

  Loaded data = in_stage("dataset", [&] { return load(c); });
  const std::size_t n = data.aggregates.size();
  const std::vector<std::string> predictors = in_stage("dataset", [&] { return predictor_names(c); });
  const Variable response = *variable_from_name(c.response);
  const std::vector<double> y = column(data.aggregates, response);
  std::vector<BenchmarkLabel> benchmark;
  for (const TeamAggregate& a : data.aggregates) benchmark.push_back(*a.benchmark);

  report["tool"] = "teamcluster";
  report["version"] = kToolVersion;
  report["seed"] = c.seed;
  report["input_fnv1a"] = hex(data.input_hash);
  report["config"] = config_object(c);
  {
    Json ds;
    ds["seasons"] = data.seasons.size();
    ds["entities"] = n;
    ds["benchmark_thresholds"] = {{"low", number(data.thresholds.low)},
                                  {"high", number(data.thresholds.high)}};
    std::array<std::size_t, 3> counts{};
    for (BenchmarkLabel b : benchmark) ++counts[static_cast<std::size_t>(b)];
    ds["benchmark_counts"] = {{"Bottom", counts[0]}, {"Middle", counts[1]}, {"Top", counts[2]}};
    report["dataset"] = ds;
  }

  // Univariate descriptives and ANOVA across benchmark groups.
  const std::string descriptives = in_stage("stats", [&] {
    const std::vector<std::string> group_names = {"Bottom", "Middle", "Top"};
    std::vector<stats::DescriptiveRow> rows;
    Json anova = Json::array();
    for (Variable v : all_variables()) {
      std::vector<stats::Group> groups(3);
      for (std::size_t g = 0; g < 3; ++g) groups[g].label = group_names[g];
      for (const TeamAggregate& a : data.aggregates)
        groups[static_cast<std::size_t>(*a.benchmark)].values.push_back(a[v]);
      std::vector<stats::Group> present;
      for (auto& g : groups)
        if (!g.values.empty()) present.push_back(g);

      stats::DescriptiveRow row;
      row.variable = std::string(variable_name(v));
      const std::vector<double> all = column(data.aggregates, v);
      row.total = stats::describe(all);
      for (const auto& g : groups)
        row.by_group.push_back(g.values.empty() ? stats::Summary{} : stats::describe(g.values));
      Json entry;
      entry["variable"] = row.variable;
      bool ok = present.size() == 3;
      if (ok) {
        try {
          row.anova = stats::one_way_anova(present);
        } catch (const Error& e) {
          if (e.kind() != ErrorKind::Degenerate && e.kind() != ErrorKind::Parameter) throw;
          ok = false;
        }
      }
      if (!ok) {
        warnings.push_back("ANOVA skipped for " + row.variable + ": degenerate or missing groups");
        row.anova = {};
        row.anova.p_value = std::nan("");
        row.anova.f_stat = std::nan("");
        row.anova.pairwise = Matrix(3, 3, std::nan(""));
      }
      Json groups_json;
      for (std::size_t g = 0; g < 3; ++g)
        groups_json[group_names[g]] = {{"n", groups[g].values.size()},
                                       {"mean", groups[g].values.empty() ? Json(nullptr) : number(row.by_group[g].mean)},
                                       {"sd", number(row.by_group[g].sd)}};
      entry["groups"] = groups_json;
      entry["total"] = {{"mean", number(row.total.mean)}, {"sd", number(row.total.sd)},
                        {"median", number(row.total.median)}, {"min", number(row.total.min)},
                        {"max", number(row.total.max)}};
      entry["f"] = number(row.anova.f_stat);
      entry["df_between"] = row.anova.df_between;
      entry["df_within"] = row.anova.df_within;
      entry["p"] = number(row.anova.p_value);
      entry["pairwise_bonferroni_p"] = {{"Bottom-Middle", number(row.anova.pairwise(0, 1))},
                                        {"Bottom-Top", number(row.anova.pairwise(0, 2))},
                                        {"Middle-Top", number(row.anova.pairwise(1, 2))}};
      entry["significant_pairs"] = ok ? stats::significant_pairs(row.anova) : "";
      anova.push_back(entry);
      rows.push_back(std::move(row));
    }
    std::ostringstream csv_out;
    stats::write_descriptives_csv(csv_out, group_names, rows);
    report["anova"] = anova;
    return csv_out.str();
  });

  // Feature selection by corrected importance.
  const std::string vim_hash = vim_stage_hash(c, data.input_hash);
  artifacts.add("descriptives.csv", header_line("#", c, data.input_hash, vim_hash) + descriptives);
  std::vector<std::string> selected;
  std::optional<forest::VimReport> vim;
  if (c.resume && stage != Stage::Run) {
    if (auto prior = resume_selection(c.output_dir / "vim.csv", vim_hash)) selected = *prior;
  }
  if (selected.empty()) {
    in_stage("forest", [&] {
      const FeatureMatrix x = feature_matrix(data.aggregates, predictors);
      if (stage == Stage::Run) {
        const forest::ForestModel exploratory = forest::fit_forest(x, y, forest_params(c, kExploratoryForest));
        report["forest"]["exploratory"] = {{"predictors", predictors.size()},
                                           {"mtry", exploratory.mtry},
                                           {"oob_mse", number(exploratory.oob_mse)},
                                           {"oob_r2", number(exploratory.oob_r2)}};
      }
      vim = forest::vim_corrected(x, y, c.vim_replications, forest_params(c, kVim));
      const forest::Selection sel = forest::select_variables(*vim, c.features);
      for (const auto& w : sel.warnings) warnings.push_back(w);
      selected = sel.variables;
      vim->selected = selected;

      std::ostringstream out;
      out << header_line("#", c, data.input_hash, vim_hash);
      forest::write_vim_csv(out, *vim);
      artifacts.add("vim.csv", out.str());

      Json vj;
      vj["replications"] = vim->replications;
      vj["gap_position"] = sel.gap_position;
      Json vars = Json::array();
      std::vector<std::size_t> order(vim->variables.size());
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return vim->corrected[a] > vim->corrected[b];
      });
      for (std::size_t i : order)
        vars.push_back({{"variable", vim->variables[i]},
                        {"raw", number(vim->raw[i])},
                        {"shadow", number(vim->shadow[i])},
                        {"corrected", number(vim->corrected[i])}});
      vj["variables"] = vars;
      vj["selected"] = selected;
      report["vim"] = vj;
    });
  }

  if (stage == Stage::Run) {
    in_stage("forest", [&] {
      const FeatureMatrix x = feature_matrix(data.aggregates, selected);
      const forest::ForestModel refined = forest::fit_forest(x, y, forest_params(c, kRefinedForest));
      const forest::CrossValidation cv = forest::kfold_cv(
          x, y, std::min(c.cv_folds, n), forest_params(c, kCrossValidation));
      report["forest"]["refined"] = {{"predictors", selected},
                                     {"mtry", refined.mtry},
                                     {"oob_mse", number(refined.oob_mse)},
                                     {"oob_r2", number(refined.oob_r2)}};
      report["forest"]["cross_validation"] = {{"folds", std::min(c.cv_folds, n)},
                                              {"mse", number(cv.mse)},
                                              {"r2", number(cv.r2)}};
    });
  }

  if (stage == Stage::Vim) {
    StageResult result;
    result.written = artifacts.commit(c.output_dir);
    return result;
  }

  // Standardize, distances, similarity graph and eigenmap.
  FeatureMatrix features;
  Matrix distances;
  spectral::SpectralGraph graph;
  spectral::Eigenmap eigenmap;
  spectral::Embedding embed;
  in_stage("spectral", [&] {
    const FeatureMatrix raw = feature_matrix(data.aggregates, selected);
    if (c.standardize) {
      FeatureSelection std_sel = standardize(raw);
      for (const auto& name : std_sel.dropped_constant)
        warnings.push_back("constant feature '" + name + "' dropped before standardization");
      features = std::move(std_sel.matrix);
      require(features.cols() >= 1, ErrorKind::Degenerate, "every selected feature is constant");
    } else {
      features = raw;
    }
    distances = spectral::distance_matrix(features);
    graph = spectral::build_graph(spectral::rbf_similarity(distances, c.sigma));
    eigenmap = spectral::eigendecompose(graph.normalized);
    require(n >= 3, ErrorKind::Parameter, "an eigenmap needs at least three entities");
    embed = spectral::embedding(eigenmap, n >= 4 ? 3 : 2);
    for (const auto& w : embed.warnings) warnings.push_back(w);

    Json sj;
    sj["sigma"] = number(c.sigma);
    sj["standardized"] = features.standardized;
    sj["features"] = features.columns;
    sj["jacobi_sweeps"] = eigenmap.sweeps;
    Json ev = Json::array();
    for (double l : eigenmap.eigenvalues) ev.push_back(number(l));
    sj["eigenvalues"] = ev;
    report["spectral"] = sj;
  });

  // Cluster-count validation.
  const std::string validation_hash = validation_stage_hash(c, vim_hash);
  std::optional<int> chosen_k = c.k;
  const bool need_validation = stage == Stage::Validate || stage == Stage::Run || !c.k;
  if (need_validation) {
    std::optional<int> resumed;
    if (c.resume && stage == Stage::Cluster) resumed = resume_chosen_k(c.output_dir / "validation.csv", validation_hash);
    if (resumed && !c.k) {
      chosen_k = resumed;
    } else {
      in_stage("validate", [&] {
        const int k_max = std::min<int>(c.k_max, static_cast<int>(n));
        require(c.k_min <= k_max, ErrorKind::Parameter, "k range exceeds the number of entities");
        clustering::SomConfig som{c.som_epochs, c.som_rate_start, c.som_rate_end,
                                  derive_seed(c.seed, {kSom})};
        const clustering::Validation v =
            clustering::validate_k(features.values, distances, c.k_min, k_max, som, c.threads);
        if (!chosen_k) chosen_k = v.chosen_k;
        if (v.indices_disagree)
          warnings.push_back("Dunn index peaks at k = " + std::to_string(v.dunn_argmax) +
                             " while silhouette peaks at k = " + std::to_string(v.silhouette_argmax));
        std::ostringstream out;
        out << header_line("#", c, data.input_hash, validation_hash,
                           "chosen_k=" + std::to_string(v.chosen_k));
        clustering::write_validation_csv(out, v);
        artifacts.add("validation.csv", out.str());

        Json vj;
        Json rows = Json::array();
        for (const auto& r : v.rows)
          rows.push_back({{"k", r.k},
                          {"clusters_found", r.clusters_found},
                          {"dunn", number(r.dunn)},
                          {"avg_silhouette", number(r.avg_silhouette)}});
        vj["rows"] = rows;
        vj["chosen_k"] = v.chosen_k;
        vj["dunn_argmax"] = v.dunn_argmax;
        vj["silhouette_argmax"] = v.silhouette_argmax;
        vj["indices_disagree"] = v.indices_disagree;
        report["validation"] = vj;
      });
    }
  }

  std::optional<clustering::ClusterAssignment> assignment;
  if (stage == Stage::Cluster || stage == Stage::Run) {
    in_stage("cluster", [&] {
      assignment = clustering::recursive_bisection(graph, eigenmap, *chosen_k, distances, c.strategy);
      const auto& a = *assignment;
      const std::vector<double> per_cluster = clustering::cluster_silhouettes(a.labels, a.silhouette);

      std::ostringstream out;
      out << header_line("#", c, data.input_hash, validation_hash);
      out << "team_id,team_name,tournament,cluster,silhouette\n";
      for (std::size_t i = 0; i < n; ++i) {
        const TeamAggregate& t = data.aggregates[i];
        out << t.team_id << ',' << csv::escape(t.team_name) << ',' << csv::escape(t.tournament) << ','
            << a.labels[i] << ',' << csv::format_significant(a.silhouette[i]) << '\n';
      }
      artifacts.add("clusters.csv", out.str());

      std::vector<NetworkVertex> vertices;
      for (std::size_t i = 0; i < n; ++i)
        vertices.push_back({data.aggregates[i].team_id, data.aggregates[i].team_name, a.labels[i],
                            std::string(to_string(benchmark[i]))});
      artifacts.add("graph.dot", export_network(distances, vertices, 1e-9,
                                                header_line("//", c, data.input_hash, validation_hash)));

      const Crosstab ct = crosstab(a.labels, benchmark, distances);
      Json cj;
      cj["k"] = a.k;
      cj["strategy"] = strategy_name(c.strategy);
      cj["avg_silhouette"] = number(a.avg_silhouette);
      cj["dunn"] = number(a.dunn);
      std::vector<std::size_t> sizes(static_cast<std::size_t>(a.k), 0);
      for (int l : a.labels) ++sizes[static_cast<std::size_t>(l - 1)];
      cj["sizes"] = sizes;
      Json cs = Json::array();
      for (double s : per_cluster) cs.push_back(number(s));
      cj["cluster_silhouettes"] = cs;
      Json trace = Json::array();
      for (const auto& t : a.trace)
        trace.push_back({{"step", t.step},
                         {"split_cluster", t.split_cluster},
                         {"size_a", t.size_a},
                         {"size_b", t.size_b},
                         {"fiedler_value", number(t.fiedler_value)},
                         {"threshold", number(t.threshold)},
                         {"avg_silhouette", number(t.avg_silhouette)}});
      cj["trace"] = trace;
      Json members = Json::array();
      for (std::size_t i = 0; i < n; ++i)
        members.push_back({{"team_id", data.aggregates[i].team_id},
                           {"team_name", data.aggregates[i].team_name},
                           {"tournament", data.aggregates[i].tournament},
                           {"cluster", a.labels[i]},
                           {"silhouette", number(a.silhouette[i])},
                           {"benchmark", to_string(benchmark[i])}});
      cj["members"] = members;
      report["clusters"] = cj;

      Json table = Json::array();
      for (std::size_t r = 0; r < ct.counts.rows(); ++r)
        table.push_back({{"cluster", r + 1},
                         {"Bottom", static_cast<int>(ct.counts(r, 0))},
                         {"Middle", static_cast<int>(ct.counts(r, 1))},
                         {"Top", static_cast<int>(ct.counts(r, 2))}});
      report["benchmark_comparison"] = {{"crosstab", table},
                                        {"benchmark_avg_silhouette", number(ct.benchmark_avg_silhouette)}};
    });
  }

  if (stage == Stage::Embed || stage == Stage::Cluster || stage == Stage::Run) {
    const std::size_t dims = embed.coordinates.cols();
    std::ostringstream out;
    out << header_line("#", c, data.input_hash, validation_hash);
    out << "team_id,team_name,v2,v3,v4,cluster,benchmark_label\n";
    for (std::size_t i = 0; i < n; ++i) {
      const TeamAggregate& t = data.aggregates[i];
      out << t.team_id << ',' << csv::escape(t.team_name);
      for (std::size_t d = 0; d < 3; ++d)
        out << ',' << (d < dims ? csv::format_significant(embed.coordinates(i, d)) : "");
      out << ',' << (assignment ? std::to_string(assignment->labels[i]) : "") << ','
          << to_string(benchmark[i]) << '\n';
    }
    artifacts.add("embedding.csv", out.str());
  }

  StageResult result;
  if (stage == Stage::Run) {
    report["warnings"] = warnings;
    result.report_json = report.dump(2) + "\n";
    artifacts.add("report.json", result.report_json);
  }
  result.written = artifacts.commit(c.output_dir);
  return result;
}

}  // namespace teamcluster::pipeline

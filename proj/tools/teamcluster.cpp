// teamcluster: command-line front end for the team clustering pipeline.
//
//   teamcluster run      --input seasons.csv --output out/ --seed 42
//   teamcluster vim      --input seasons.csv --output out/
//   teamcluster embed    --input seasons.csv --output out/ --resume
//   teamcluster validate --input seasons.csv --output out/ --resume
//   teamcluster cluster  --input seasons.csv --output out/ --resume [--k 4]
//   teamcluster generate --output seasons.csv --teams 60 --seed 7

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include "teamcluster/dataset.hpp"
#include "teamcluster/error.hpp"
#include "teamcluster/pipeline.hpp"
#include "teamcluster/simd/kernels.hpp"
#include "teamcluster/synthetic.hpp"

namespace {

using teamcluster::ErrorKind;
using teamcluster::pipeline::PipelineConfig;
using teamcluster::pipeline::Stage;

enum ExitCode { kOk = 0, kOther = 1, kSchema = 2, kNumerical = 3, kParameter = 4 };

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Schema:
    case ErrorKind::Parse:
    case ErrorKind::EmptyInput:
      return kSchema;
    case ErrorKind::Numerical:
    case ErrorKind::Degenerate:
    case ErrorKind::Unsplittable:
    case ErrorKind::NoSignal:
      return kNumerical;
    case ErrorKind::Parameter:
      return kParameter;
    case ErrorKind::Io:
      return kOther;
  }
  return kOther;
}

struct Options {
  PipelineConfig config;
  std::string strategy = "recursive";
  std::string simd = "auto";
  std::optional<int> k;
  std::optional<std::size_t> mtry;
  std::optional<std::uint64_t> seed;
};

void add_pipeline_options(CLI::App* cmd, Options& o, bool seed_required) {
  auto& c = o.config;
  cmd->add_option("-i,--input", c.input, "Per-season CSV")->required()->check(CLI::ExistingFile);
  cmd->add_option("-o,--output", c.output_dir, "Output directory")->capture_default_str();
  auto* seed = cmd->add_option("--seed", o.seed, "Root RNG seed");
  if (seed_required) seed->required();
  cmd->add_option("--response", c.response, "Response variable")->capture_default_str();
  cmd->add_option("--exclude", c.excluded, "Variables excluded from the predictors")
      ->delimiter(',')
      ->capture_default_str();
  cmd->add_option("--features", c.features, "Use these variables instead of the importance cut")
      ->delimiter(',');
  cmd->add_option("--trees", c.n_trees, "Trees per forest")->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_option("--mtry", o.mtry, "Variables tried per split (default floor(sqrt(p)))")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--node-size", c.node_size, "Nodes smaller than this are leaves")->capture_default_str();
  cmd->add_option("--replications", c.vim_replications, "Shadow-variable replications")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  cmd->add_option("--cv-folds", c.cv_folds, "Cross-validation folds")->capture_default_str();
  cmd->add_option("--sigma", c.sigma, "Gaussian kernel bandwidth")->capture_default_str();
  cmd->add_flag("!--no-standardize", c.standardize, "Use raw feature scales for distances");
  cmd->add_option("--k-min", c.k_min, "Smallest cluster count validated")->capture_default_str();
  cmd->add_option("--k-max", c.k_max, "Largest cluster count validated")->capture_default_str();
  cmd->add_option("--k", o.k, "Cluster count (skips the validated choice)");
  cmd->add_option("--strategy", o.strategy, "Bisection strategy")
      ->check(CLI::IsMember({"recursive", "global"}))
      ->capture_default_str();
  cmd->add_option("--som-epochs", c.som_epochs, "SOM training epochs")->capture_default_str();
  cmd->add_option("--som-rate-start", c.som_rate_start, "SOM initial learning rate")->capture_default_str();
  cmd->add_option("--som-rate-end", c.som_rate_end, "SOM final learning rate")->capture_default_str();
  cmd->add_option("--low-q", c.low_q, "Bottom benchmark quantile")->capture_default_str();
  cmd->add_option("--high-q", c.high_q, "Top benchmark quantile")->capture_default_str();
  cmd->add_option("--threads", c.threads, "Worker threads (results do not depend on it)")
      ->capture_default_str();
  cmd->add_flag("--resume", c.resume, "Reuse matching vim.csv / validation.csv in the output directory");
  cmd->add_option("--simd", o.simd, "Kernel selection")
      ->check(CLI::IsMember({"auto", "scalar", "avx2"}))
      ->capture_default_str();
}

PipelineConfig finalize(Options& o) {
  PipelineConfig c = o.config;
  c.k = o.k;
  c.mtry = o.mtry;
  c.seed = o.seed.value_or(0);
  c.strategy = o.strategy == "global" ? teamcluster::clustering::BisectionStrategy::GlobalGaps
                                      : teamcluster::clustering::BisectionStrategy::RecursiveSubgraph;
  if (o.simd == "scalar") teamcluster::simd::select(teamcluster::simd::Isa::Scalar);
  if (o.simd == "avx2") teamcluster::simd::select(teamcluster::simd::Isa::Avx2);
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spectral clustering of team performance data"};
  app.require_subcommand(1);

  const std::map<std::string, Stage> stages = {{"run", Stage::Run},
                                               {"vim", Stage::Vim},
                                               {"embed", Stage::Embed},
                                               {"validate", Stage::Validate},
                                               {"cluster", Stage::Cluster}};
  std::map<std::string, Options> options;
  std::map<std::string, CLI::App*> commands;
  const std::map<std::string, std::string> help = {
      {"run", "Full pipeline: statistics, forest, eigenmap, validation, clusters, report.json"},
      {"vim", "Descriptives and corrected variable importance (descriptives.csv, vim.csv)"},
      {"embed", "Laplacian eigenmap coordinates (embedding.csv)"},
      {"validate", "SOM validation of 2..6 clusters (validation.csv)"},
      {"cluster", "Recursive Fiedler bisection (clusters.csv, embedding.csv, graph.dot)"}};
  for (const auto& [name, stage] : stages) {
    commands[name] = app.add_subcommand(name, help.at(name));
    add_pipeline_options(commands[name], options[name], stage == Stage::Run);
  }

  teamcluster::synthetic::LeagueConfig league;
  std::string generate_out;
  auto* generate = app.add_subcommand("generate", "Write a synthetic per-season CSV with planted tiers");
  generate->add_option("-o,--output", generate_out, "Destination CSV")->required();
  generate->add_option("--teams", league.teams, "Number of teams")->capture_default_str();
  generate->add_option("--min-seasons", league.min_seasons)->capture_default_str();
  generate->add_option("--max-seasons", league.max_seasons)->capture_default_str();
  generate->add_option("--tiers", league.tier_strength, "Latent strength per tier")
      ->delimiter(',')
      ->capture_default_str();
  generate->add_option("--seed", league.seed)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kParameter;
  }

  try {
    if (generate->parsed()) {
      const auto seasons = teamcluster::synthetic::league(league);
      std::ofstream out(generate_out, std::ios::binary);
      if (!out) throw teamcluster::Error(ErrorKind::Io, "cannot write " + generate_out);
      teamcluster::write_team_seasons(out, seasons);
      std::cerr << "wrote " << seasons.size() << " season records for " << league.teams << " teams to "
                << generate_out << "\n";
      return kOk;
    }
    for (const auto& [name, stage] : stages) {
      if (!commands[name]->parsed()) continue;
      const PipelineConfig config = finalize(options[name]);
      const auto result = teamcluster::pipeline::run_stage(stage, config);
      for (const auto& path : result.written)
        std::cerr << "wrote " << (config.output_dir / path).string() << "\n";
      return kOk;
    }
  } catch (const teamcluster::Error& e) {
    std::cerr << "teamcluster: " << teamcluster::to_string(e.kind()) << ": " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "teamcluster: " << e.what() << "\n";
    return kOther;
  }
  return kOther;
}

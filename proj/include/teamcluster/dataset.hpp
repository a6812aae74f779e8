#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "teamcluster/matrix.hpp"

namespace teamcluster {

/// Per-season performance variables, in input-column order.
enum class Variable : std::size_t {
  YellowCards,
  RedCards,
  Possession,
  PassSuccess,
  AerialsWon,
  ShotsConceded,
  Tackles,
  Interceptions,
  Fouls,
  Offsides,
  Shots,
  ShotsOnTarget,
  Dribbles,
  Fouled,
  GoalsFor,
  GoalsAgainst,
  GoalDifference,
  Points,
};

inline constexpr std::size_t kVariableCount = 18;

/// Column header used for a variable in the input CSV.
std::string_view variable_name(Variable v);
std::optional<Variable> variable_from_name(std::string_view name);
std::span<const Variable> all_variables();

using VariableValues = std::array<double, kVariableCount>;

struct TeamSeason {
  std::int64_t team_id = 0;
  std::string team_name;
  std::string tournament;
  std::string season;
  VariableValues values{};

  double operator[](Variable v) const { return values[static_cast<std::size_t>(v)]; }
  double& operator[](Variable v) { return values[static_cast<std::size_t>(v)]; }

  friend bool operator==(const TeamSeason&, const TeamSeason&) = default;
};

enum class BenchmarkLabel { Bottom, Middle, Top };

std::string_view to_string(BenchmarkLabel label);

struct TeamAggregate {
  std::int64_t team_id = 0;
  std::string team_name;
  std::string tournament;
  std::size_t n_seasons = 0;
  VariableValues values{};
  std::optional<BenchmarkLabel> benchmark;

  double operator[](Variable v) const { return values[static_cast<std::size_t>(v)]; }
};

/// Entities by columns. Rows follow the aggregate order (ascending team_id).
struct FeatureMatrix {
  std::vector<std::int64_t> row_ids;
  std::vector<std::string> columns;
  Matrix values;
  bool standardized = false;

  std::size_t rows() const { return values.rows(); }
  std::size_t cols() const { return values.cols(); }
};

/// Parses the per-season CSV. Throws Error(Schema) for a missing column or a
/// duplicate (team_id, season), Error(Parse) with row/column for bad numbers.
std::vector<TeamSeason> parse_team_seasons(std::istream& in);
std::vector<TeamSeason> parse_team_seasons(std::string_view text);

/// Writes records in the input schema; parse_team_seasons reads it back exactly.
void write_team_seasons(std::ostream& out, std::span<const TeamSeason> seasons);

/// One record per team_id with the unweighted mean of each variable, sorted by team_id.
std::vector<TeamAggregate> aggregate(std::span<const TeamSeason> seasons);

/// Sample quantile by linear interpolation at position 1 + (n - 1) q.
double quantile_type7(std::span<const double> values, double q);

struct BenchmarkThresholds {
  double low;
  double high;
};

/// Labels points > Q(high_q) Top, points < Q(low_q) Bottom, otherwise Middle.
BenchmarkThresholds benchmark_classify(std::vector<TeamAggregate>& aggregates, double low_q = 0.25,
                                       double high_q = 0.75);

struct FeatureSelection {
  FeatureMatrix matrix;
  std::vector<std::string> dropped_constant;
};

FeatureMatrix feature_matrix(std::span<const TeamAggregate> aggregates,
                             std::span<const std::string> columns);

/// Z-scores each column (sample sd). Constant columns are removed and reported.
FeatureSelection standardize(const FeatureMatrix& features);

std::vector<double> column(std::span<const TeamAggregate> aggregates, Variable v);

}  // namespace teamcluster

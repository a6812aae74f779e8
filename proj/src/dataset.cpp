#include "teamcluster/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <utility>

#include "teamcluster/csv.hpp"
#include "teamcluster/error.hpp"

namespace teamcluster {

namespace {

constexpr std::array<std::string_view, kVariableCount> kVariableNames = {
    "Yellow_cards", "Red_cards", "Possession", "Pass_Success", "Aerials_Won", "Shots_Conceded",
    "Tackles",      "Interceptions", "Fouls",  "Offsides",     "Shots",       "Shots_OT",
    "Dribbles",     "Fouled",    "GF",         "GA",           "GD",          "Points",
};

constexpr std::array<Variable, kVariableCount> kAllVariables = {
    Variable::YellowCards,   Variable::RedCards,     Variable::Possession,   Variable::PassSuccess,
    Variable::AerialsWon,    Variable::ShotsConceded, Variable::Tackles,     Variable::Interceptions,
    Variable::Fouls,         Variable::Offsides,     Variable::Shots,        Variable::ShotsOnTarget,
    Variable::Dribbles,      Variable::Fouled,       Variable::GoalsFor,     Variable::GoalsAgainst,
    Variable::GoalDifference, Variable::Points,
};

constexpr std::array<std::string_view, 4> kKeyColumns = {"team_id", "team_name", "tournament",
                                                         "season"};

bool is_percentage(Variable v) { return v == Variable::Possession || v == Variable::PassSuccess; }

// GD may legitimately be negative; everything else is a count, rate or percentage.
bool must_be_nonnegative(Variable v) { return v != Variable::GoalDifference; }

void validate(const TeamSeason& s, std::size_t line) {
  const auto where = [&] {
    return "line " + std::to_string(line) + " (team_id " + std::to_string(s.team_id) + ", season " +
           s.season + ")";
  };
  for (Variable v : kAllVariables) {
    const double x = s[v];
    if (must_be_nonnegative(v) && x < 0.0)
      fail(ErrorKind::Schema, where() + ": " + std::string(variable_name(v)) + " is negative");
    if (is_percentage(v) && x > 100.0)
      fail(ErrorKind::Schema, where() + ": " + std::string(variable_name(v)) + " exceeds 100");
  }
  const double gf = s[Variable::GoalsFor];
  const double ga = s[Variable::GoalsAgainst];
  const double gd = s[Variable::GoalDifference];
  // decimal inputs such as 50.1 - 40.2 are not exact in binary
  const double tol = 1e-9 * std::max(1.0, std::abs(gf) + std::abs(ga));
  if (std::abs(gd - (gf - ga)) > tol)
    fail(ErrorKind::Schema, where() + ": GD does not equal GF - GA");
}

}  // namespace

std::string_view variable_name(Variable v) { return kVariableNames[static_cast<std::size_t>(v)]; }

std::optional<Variable> variable_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kVariableCount; ++i)
    if (kVariableNames[i] == name) return kAllVariables[i];
  return std::nullopt;
}

std::span<const Variable> all_variables() { return kAllVariables; }

std::string_view to_string(BenchmarkLabel label) {
  switch (label) {
    case BenchmarkLabel::Bottom: return "Bottom";
    case BenchmarkLabel::Middle: return "Middle";
    case BenchmarkLabel::Top: return "Top";
  }
  return "?";
}

std::vector<TeamSeason> parse_team_seasons(std::istream& in) {
  csv::Reader reader(in);
  auto header = reader.next();
  if (!header) fail(ErrorKind::Schema, "input has no header row");

  std::map<std::string, std::size_t, std::less<>> index;
  for (std::size_t c = 0; c < header->size(); ++c) index.emplace((*header)[c], c);
  const auto column_of = [&](std::string_view name) {
    auto it = index.find(name);
    if (it == index.end()) fail(ErrorKind::Schema, "missing column '" + std::string(name) + "'");
    return it->second;
  };

  std::array<std::size_t, 4> key_col{};
  for (std::size_t k = 0; k < kKeyColumns.size(); ++k) key_col[k] = column_of(kKeyColumns[k]);
  std::array<std::size_t, kVariableCount> var_col{};
  for (std::size_t v = 0; v < kVariableCount; ++v) var_col[v] = column_of(kVariableNames[v]);

  std::vector<TeamSeason> out;
  std::set<std::pair<std::int64_t, std::string>> seen;
  while (auto fields = reader.next()) {
    const std::size_t line = reader.line();
    if (fields->size() != header->size())
      fail(ErrorKind::Schema, "line " + std::to_string(line) + ": expected " +
                                  std::to_string(header->size()) + " fields, found " +
                                  std::to_string(fields->size()));
    TeamSeason s;
    const std::string& id_text = (*fields)[key_col[0]];
    auto [ptr, ec] = std::from_chars(id_text.data(), id_text.data() + id_text.size(), s.team_id);
    if (ec != std::errc{} || ptr != id_text.data() + id_text.size())
      fail(ErrorKind::Parse, "line " + std::to_string(line) + ", column team_id: cannot parse '" +
                                 id_text + "' as an integer");
    s.team_name = (*fields)[key_col[1]];
    s.tournament = (*fields)[key_col[2]];
    s.season = (*fields)[key_col[3]];
    for (std::size_t v = 0; v < kVariableCount; ++v) {
      const std::string& cell = (*fields)[var_col[v]];
      auto value = csv::parse_double(cell);
      if (!value)
        fail(ErrorKind::Parse, "line " + std::to_string(line) + ", column " +
                                   std::string(kVariableNames[v]) + ": cannot parse '" + cell +
                                   "' as a number");
      s.values[v] = *value;
    }
    validate(s, line);
    if (!seen.emplace(s.team_id, s.season).second)
      fail(ErrorKind::Schema, "line " + std::to_string(line) + ": duplicate (team_id " +
                                  std::to_string(s.team_id) + ", season " + s.season + ")");
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<TeamSeason> parse_team_seasons(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_team_seasons(in);
}

void write_team_seasons(std::ostream& out, std::span<const TeamSeason> seasons) {
  for (std::size_t k = 0; k < kKeyColumns.size(); ++k) out << (k ? "," : "") << kKeyColumns[k];
  for (auto name : kVariableNames) out << ',' << name;
  out << '\n';
  for (const TeamSeason& s : seasons) {
    out << s.team_id << ',' << csv::escape(s.team_name) << ',' << csv::escape(s.tournament) << ','
        << csv::escape(s.season);
    for (double x : s.values) out << ',' << csv::format_exact(x);
    out << '\n';
  }
}

std::vector<TeamAggregate> aggregate(std::span<const TeamSeason> seasons) {
  require(!seasons.empty(), ErrorKind::EmptyInput, "aggregate: no season records");

  std::map<std::int64_t, std::vector<const TeamSeason*>> by_team;
  for (const TeamSeason& s : seasons) by_team[s.team_id].push_back(&s);

  std::vector<TeamAggregate> out;
  out.reserve(by_team.size());
  for (const auto& [id, rows] : by_team) {
    TeamAggregate agg;
    agg.team_id = id;
    agg.team_name = rows.front()->team_name;
    agg.tournament = rows.front()->tournament;
    agg.n_seasons = rows.size();
    for (std::size_t v = 0; v < kVariableCount; ++v) {
      double total = 0.0;
      for (const TeamSeason* s : rows) total += s->values[v];
      agg.values[v] = total / static_cast<double>(rows.size());
    }
    out.push_back(std::move(agg));
  }
  return out;
}

double quantile_type7(std::span<const double> values, double q) {
  require(!values.empty(), ErrorKind::EmptyInput, "quantile of empty sample");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double h = static_cast<double>(sorted.size() - 1) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

BenchmarkThresholds benchmark_classify(std::vector<TeamAggregate>& aggregates, double low_q,
                                       double high_q) {
  require(!aggregates.empty(), ErrorKind::EmptyInput, "benchmark_classify: no aggregates");
  require(0.0 < low_q && low_q < high_q && high_q < 1.0, ErrorKind::Parameter,
          "benchmark quantiles must satisfy 0 < low < high < 1");
  const std::vector<double> points = column(aggregates, Variable::Points);
  const BenchmarkThresholds t{quantile_type7(points, low_q), quantile_type7(points, high_q)};
  for (TeamAggregate& a : aggregates) {
    const double p = a[Variable::Points];
    a.benchmark = p > t.high  ? BenchmarkLabel::Top
                  : p < t.low ? BenchmarkLabel::Bottom
                              : BenchmarkLabel::Middle;
  }
  return t;
}

std::vector<double> column(std::span<const TeamAggregate> aggregates, Variable v) {
  std::vector<double> out;
  out.reserve(aggregates.size());
  for (const TeamAggregate& a : aggregates) out.push_back(a[v]);
  return out;
}

FeatureMatrix feature_matrix(std::span<const TeamAggregate> aggregates,
                             std::span<const std::string> columns) {
  std::vector<Variable> vars;
  for (const std::string& name : columns) {
    auto v = variable_from_name(name);
    if (!v) fail(ErrorKind::Schema, "unknown variable '" + name + "'");
    vars.push_back(*v);
  }
  FeatureMatrix f;
  f.columns.assign(columns.begin(), columns.end());
  f.values = Matrix(aggregates.size(), vars.size());
  for (std::size_t r = 0; r < aggregates.size(); ++r) {
    f.row_ids.push_back(aggregates[r].team_id);
    for (std::size_t c = 0; c < vars.size(); ++c) f.values(r, c) = aggregates[r][vars[c]];
  }
  return f;
}

FeatureSelection standardize(const FeatureMatrix& features) {
  const std::size_t n = features.rows();
  require(n >= 2, ErrorKind::Parameter, "standardize needs at least two rows");

  FeatureSelection out;
  std::vector<std::size_t> kept;
  std::vector<double> means, sds;
  for (std::size_t c = 0; c < features.cols(); ++c) {
    double mean = 0.0;
    for (std::size_t r = 0; r < n; ++r) mean += features.values(r, c);
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      const double d = features.values(r, c) - mean;
      ss += d * d;
    }
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    if (!(sd > 0.0)) {
      out.dropped_constant.push_back(features.columns[c]);
      continue;
    }
    kept.push_back(c);
    means.push_back(mean);
    sds.push_back(sd);
  }

  FeatureMatrix& m = out.matrix;
  m.row_ids = features.row_ids;
  m.standardized = true;
  m.values = Matrix(n, kept.size());
  for (std::size_t k = 0; k < kept.size(); ++k) {
    m.columns.push_back(features.columns[kept[k]]);
    for (std::size_t r = 0; r < n; ++r)
      m.values(r, k) = (features.values(r, kept[k]) - means[k]) / sds[k];
  }
  return out;
}

}  // namespace teamcluster

#include "teamcluster/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <string>

#include "teamcluster/error.hpp"
#include "teamcluster/rng.hpp"

namespace teamcluster::synthetic {

Blobs gaussian_blobs(const Matrix& centers, std::size_t per_blob, double spread, std::uint64_t seed) {
  Rng rng(seed);
  Blobs out;
  out.points = Matrix(centers.rows() * per_blob, centers.cols());
  for (std::size_t b = 0; b < centers.rows(); ++b)
    for (std::size_t i = 0; i < per_blob; ++i) {
      const std::size_t r = b * per_blob + i;
      for (std::size_t c = 0; c < centers.cols(); ++c)
        out.points(r, c) = centers(b, c) + spread * rng.normal();
      out.truth.push_back(static_cast<int>(b) + 1);
    }
  return out;
}

Matrix spaced_centers(std::size_t count, std::size_t dims, double separation) {
  require(count >= 1 && dims + 1 >= count, ErrorKind::Parameter,
          "spaced_centers needs dims >= count - 1");
  // vertices of a regular simplex: e_i * separation / sqrt(2) are pairwise `separation` apart
  Matrix centers(count, dims);
  const double edge = separation / std::sqrt(2.0);
  for (std::size_t b = 1; b < count; ++b) centers(b, b - 1) = edge;
  if (count >= 2) {
    // last vertex on the all-ones diagonal, also `separation` from every e_i
    const double m = static_cast<double>(count - 1);
    const double t = edge * (1.0 - std::sqrt(1.0 + m)) / m;
    for (std::size_t c = 0; c + 1 < count; ++c) centers(0, c) = t;
  }
  return centers;
}

int league_tier(const LeagueConfig& config, std::int64_t team_id) {
  return static_cast<int>((team_id - 1) % static_cast<std::int64_t>(config.tier_strength.size()));
}

std::vector<TeamSeason> league(const LeagueConfig& config) {
  require(config.teams >= 1, ErrorKind::Parameter, "league needs at least one team");
  require(!config.tier_strength.empty(), ErrorKind::Parameter, "league needs at least one tier");
  require(config.min_seasons >= 1 && config.min_seasons <= config.max_seasons, ErrorKind::Parameter,
          "league season range must satisfy 1 <= min <= max");

  static constexpr std::array<const char*, 5> kTournaments = {"Premier League", "La Liga", "Serie A",
                                                              "Bundesliga", "Ligue 1"};
  Rng rng(config.seed);
  const auto r2 = [](double x) { return std::round(x * 100.0) / 100.0; };
  const auto nonneg = [](double x) { return std::max(0.0, x); };
  const double k = config.season_noise;

  std::vector<TeamSeason> out;
  for (std::size_t t = 1; t <= config.teams; ++t) {
    const auto id = static_cast<std::int64_t>(t);
    const double strength = config.tier_strength[league_tier(config, id)] +
                            config.strength_noise * rng.normal();
    const std::size_t seasons =
        config.min_seasons + rng.below(config.max_seasons - config.min_seasons + 1);
    char name[32];
    std::snprintf(name, sizeof name, "Team %03zu", t);
    const char* tournament = kTournaments[(t - 1) / config.tier_strength.size() % kTournaments.size()];

    for (std::size_t s = 0; s < seasons; ++s) {
      TeamSeason rec;
      rec.team_id = id;
      rec.team_name = name;
      rec.tournament = tournament;
      rec.season = std::to_string(2014 + s) + "/" + std::to_string(2015 + s);
      const auto e = [&] { return k * rng.normal(); };
      rec[Variable::Possession] = r2(std::clamp(48.8 + 4.0 * strength + 1.0 * e(), 25.0, 80.0));
      rec[Variable::PassSuccess] = r2(std::clamp(77.2 + 4.0 * strength + 1.0 * e(), 50.0, 95.0));
      rec[Variable::Shots] = r2(nonneg(12.2 + 1.5 * strength + 0.5 * e()));
      rec[Variable::ShotsOnTarget] = r2(nonneg(4.1 + 0.75 * strength + 0.25 * e()));
      rec[Variable::ShotsConceded] = r2(nonneg(13.1 - 1.8 * strength + 0.5 * e()));
      rec[Variable::Dribbles] = r2(nonneg(9.1 + 0.8 * strength + 1.2 * e()));
      rec[Variable::AerialsWon] = r2(nonneg(18.2 - 0.5 * strength + 3.0 * e()));
      rec[Variable::Offsides] = r2(nonneg(2.1 + 0.1 * strength + 0.3 * e()));
      rec[Variable::Tackles] = r2(nonneg(18.2 + 1.5 * e()));
      rec[Variable::Interceptions] = r2(nonneg(14.3 + 2.0 * e()));
      rec[Variable::Fouls] = r2(nonneg(13.3 - 0.3 * strength + 1.5 * e()));
      rec[Variable::Fouled] = r2(nonneg(12.5 + 1.6 * e()));
      rec[Variable::YellowCards] = std::round(nonneg(75.7 - 3.0 * strength + 15.0 * e()));
      rec[Variable::RedCards] = std::round(nonneg(4.1 + 1.7 * e()));
      const double gf = std::round(std::max(10.0, 46.0 + 12.0 * strength + 5.0 * e()));
      const double ga = std::round(std::max(10.0, 54.0 - 10.0 * strength + 5.0 * e()));
      rec[Variable::GoalsFor] = gf;
      rec[Variable::GoalsAgainst] = ga;
      rec[Variable::GoalDifference] = gf - ga;
      rec[Variable::Points] = std::round(std::clamp(45.6 + 13.0 * strength + 4.0 * e(), 10.0, 100.0));
      out.push_back(std::move(rec));
    }
  }
  return out;
}

}  // namespace teamcluster::synthetic

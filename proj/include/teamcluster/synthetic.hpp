#pragma once

#include <cstdint>
#include <vector>

#include "teamcluster/dataset.hpp"
#include "teamcluster/matrix.hpp"

namespace teamcluster::synthetic {

struct Blobs {
  Matrix points;
  std::vector<int> truth;  // 1-based blob id per row
};

/// Isotropic Gaussian blobs, `per_blob` rows each, rows grouped by blob.
Blobs gaussian_blobs(const Matrix& centers, std::size_t per_blob, double spread, std::uint64_t seed);

/// Blob centers spaced `separation` apart along distinct axes (dims >= count - 1).
Matrix spaced_centers(std::size_t count, std::size_t dims, double separation);

struct LeagueConfig {
  std::size_t teams = 60;
  std::size_t min_seasons = 1;
  std::size_t max_seasons = 6;
  // Latent strength of each planted tier; teams are spread evenly over tiers.
  std::vector<double> tier_strength = {2.5, 0.6, -0.4};
  double strength_noise = 0.15;
  double season_noise = 1.0;  // scales every per-season noise term
  std::uint64_t seed = 1;
};

/// Season records whose shot, possession and passing variables track a
/// latent per-team strength and whose goal difference follows from them.
/// Team ids are 1..teams; tier of team t is (t - 1) % tiers.
std::vector<TeamSeason> league(const LeagueConfig& config);

int league_tier(const LeagueConfig& config, std::int64_t team_id);

}  // namespace teamcluster::synthetic

#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "teamcluster/matrix.hpp"

namespace teamcluster::stats {

struct Summary {
  std::size_t n = 0;
  double mean = 0.0;
  std::optional<double> sd;  // sample sd; absent for n < 2
  double median = 0.0;
  double min = 0.0;
  double max = 0.0;
};

Summary describe(std::span<const double> values);

struct Group {
  std::string label;
  std::vector<double> values;
};

struct AnovaResult {
  double f_stat = 0.0;
  int df_between = 0;
  int df_within = 0;
  double p_value = 1.0;
  // Bonferroni-adjusted p for each group pair (symmetric, 0 on the diagonal).
  Matrix pairwise;
  // Unadjusted pooled-sd two-sample t statistics, antisymmetric.
  Matrix pairwise_t;
};

/// Classical one-way ANOVA with pooled-sd pairwise t-tests. Throws
/// Error(Degenerate) when both within- and between-group variance vanish.
AnovaResult one_way_anova(std::span<const Group> groups);

/// Regularized incomplete beta I_x(a, b), continued-fraction evaluation.
double incomplete_beta(double a, double b, double x);

/// Upper-tail probability of an F(d1, d2) variate.
double f_upper_tail(double f, double d1, double d2);

/// Two-sided p-value of a Student t statistic.
double t_two_sided(double t, double df);

/// Descriptives table by group plus ANOVA, one row per variable.
struct DescriptiveRow {
  std::string variable;
  std::vector<Summary> by_group;
  Summary total;
  AnovaResult anova;
};

/// Pair codes follow the order (0,1), (0,2), (1,2), ... and are reported
/// 1-based when the adjusted p falls below alpha.
std::string significant_pairs(const AnovaResult& result, double alpha = 0.05);

void write_descriptives_csv(std::ostream& out, std::span<const std::string> group_labels,
                            std::span<const DescriptiveRow> rows);

}  // namespace teamcluster::stats

#include "teamcluster/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "teamcluster/csv.hpp"
#include "teamcluster/error.hpp"

namespace teamcluster::stats {

namespace {

// Modified Lentz evaluation of the incomplete-beta continued fraction.
double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIterations = 10000;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;

  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIterations; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kEps) return h;
  }
  fail(ErrorKind::Numerical, "incomplete beta continued fraction did not converge");
}

double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  require(a > 0.0 && b > 0.0, ErrorKind::Parameter, "incomplete beta needs a, b > 0");
  require(x >= 0.0 && x <= 1.0, ErrorKind::Parameter, "incomplete beta needs 0 <= x <= 1");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                           a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  // the fraction converges fastest on the side of the mean a / (a + b)
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double f_upper_tail(double f, double d1, double d2) {
  if (std::isinf(f)) return 0.0;
  if (f <= 0.0) return 1.0;
  return incomplete_beta(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f));
}

double t_two_sided(double t, double df) {
  if (std::isinf(t)) return 0.0;
  return incomplete_beta(df / 2.0, 0.5, df / (df + t * t));
}

Summary describe(std::span<const double> values) {
  require(!values.empty(), ErrorKind::EmptyInput, "describe: empty sample");
  Summary s;
  s.n = values.size();
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  s.min = sorted.front();
  s.max = sorted.back();
  const std::size_t mid = s.n / 2;
  s.median = s.n % 2 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);
  s.mean = mean_of(values);
  if (s.n >= 2) {
    double ss = 0.0;
    for (double x : values) ss += (x - s.mean) * (x - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(s.n - 1));
  }
  return s;
}

AnovaResult one_way_anova(std::span<const Group> groups) {
  const std::size_t k = groups.size();
  require(k >= 2, ErrorKind::Parameter, "ANOVA needs at least two groups");
  std::size_t total = 0;
  for (const Group& g : groups) {
    require(!g.values.empty(), ErrorKind::EmptyInput, "ANOVA group '" + g.label + "' is empty");
    total += g.values.size();
  }
  require(total > k, ErrorKind::Parameter, "ANOVA needs more observations than groups");

  std::vector<double> means(k);
  double grand = 0.0;
  for (std::size_t g = 0; g < k; ++g) {
    means[g] = mean_of(groups[g].values);
    for (double x : groups[g].values) grand += x;
  }
  grand /= static_cast<double>(total);

  double ss_between = 0.0;
  double ss_within = 0.0;
  for (std::size_t g = 0; g < k; ++g) {
    const double dm = means[g] - grand;
    ss_between += static_cast<double>(groups[g].values.size()) * dm * dm;
    for (double x : groups[g].values) ss_within += (x - means[g]) * (x - means[g]);
  }
  if (ss_within == 0.0 && ss_between == 0.0)
    fail(ErrorKind::Degenerate, "ANOVA: no variance within or between groups");

  AnovaResult r;
  r.df_between = static_cast<int>(k - 1);
  r.df_within = static_cast<int>(total - k);
  const double ms_between = ss_between / r.df_between;
  const double ms_within = ss_within / r.df_within;
  r.f_stat = ms_within > 0.0 ? ms_between / ms_within : std::numeric_limits<double>::infinity();
  r.p_value = f_upper_tail(r.f_stat, r.df_between, r.df_within);

  const double comparisons = static_cast<double>(k * (k - 1) / 2);
  r.pairwise = Matrix(k, k);
  r.pairwise_t = Matrix(k, k);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = i + 1; j < k; ++j) {
      const double se = std::sqrt(ms_within * (1.0 / groups[i].values.size() +
                                               1.0 / groups[j].values.size()));
      const double diff = means[i] - means[j];
      double t;
      if (se > 0.0)
        t = diff / se;
      else
        t = diff == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), diff);
      const double p = std::min(1.0, t_two_sided(t, r.df_within) * comparisons);
      r.pairwise(i, j) = r.pairwise(j, i) = p;
      r.pairwise_t(i, j) = t;
      r.pairwise_t(j, i) = -t;
    }
  return r;
}

std::string significant_pairs(const AnovaResult& result, double alpha) {
  std::string out;
  int code = 0;
  for (std::size_t i = 0; i < result.pairwise.rows(); ++i)
    for (std::size_t j = i + 1; j < result.pairwise.cols(); ++j) {
      ++code;
      if (result.pairwise(i, j) < alpha) {
        if (!out.empty()) out += ' ';
        out += std::to_string(code);
      }
    }
  return out.empty() ? "Not Sig." : out;
}

void write_descriptives_csv(std::ostream& out, std::span<const std::string> group_labels,
                            std::span<const DescriptiveRow> rows) {
  out << "variable";
  for (const std::string& g : group_labels) out << ',' << csv::escape(g + "_mean") << ',' << csv::escape(g + "_sd");
  out << ",Total_mean,Total_sd,anova_f,anova_p,pairwise_significant\n";
  const auto sd_text = [](const Summary& s) {
    return s.sd ? csv::format_significant(*s.sd) : std::string();
  };
  for (const DescriptiveRow& row : rows) {
    out << csv::escape(row.variable);
    for (const Summary& s : row.by_group) out << ',' << csv::format_significant(s.mean) << ',' << sd_text(s);
    out << ',' << csv::format_significant(row.total.mean) << ',' << sd_text(row.total) << ','
        << csv::format_significant(row.anova.f_stat) << ','
        << csv::format_significant(row.anova.p_value) << ',' << significant_pairs(row.anova)
        << '\n';
  }
}

}  // namespace teamcluster::stats

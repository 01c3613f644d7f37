#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "involukit/error.hpp"
#include "involukit/measures.hpp"

namespace involukit::stats {

/// Dense row-major table.
template <typename T>
struct Table {
  std::int64_t rows = 0;
  std::int64_t cols = 0;
  std::vector<T> data;

  Table() = default;
  Table(std::int64_t r, std::int64_t c, T fill = T{})
      : rows(r), cols(c), data(static_cast<std::size_t>(r * c), fill) {}
  Table(std::int64_t r, std::int64_t c, std::vector<T> values) : rows(r), cols(c), data(std::move(values)) {
    require(static_cast<std::int64_t>(data.size()) == r * c, "table payload does not match its shape");
  }

  T& operator()(std::int64_t i, std::int64_t j) { return data[static_cast<std::size_t>(i * cols + j)]; }
  const T& operator()(std::int64_t i, std::int64_t j) const { return data[static_cast<std::size_t>(i * cols + j)]; }
};

/// Subjects x raters of quantitative scores.
using RaterMatrix = Table<double>;
/// Subjects x categories of rating counts, or an r x c contingency table.
using CountTable = Table<std::int64_t>;
/// Subjects x raters of category codes; nullopt marks a missing rating.
using LabelMatrix = Table<std::optional<int>>;

struct StatResult {
  double statistic = 0.0;
  std::optional<double> p_value;
  std::optional<double> ci_low;
  std::optional<double> ci_high;
  std::string method;
  /// Degrees of freedom where the test has them.
  std::optional<double> df;
};

struct TwoWayAnova {
  double ms_rows = 0.0;
  double ms_cols = 0.0;
  double ms_error = 0.0;
  double df_rows = 0.0;
  double df_error = 0.0;
};

TwoWayAnova two_way_anova(const RaterMatrix& m);

/// Two-way mixed effects, consistency, single rater. The CI is the F-ratio
/// interval mapped through the ICC formula; p tests ICC = 0.
StatResult icc3_1(const RaterMatrix& m, double confidence = 0.95);

enum class IccBand { Poor, Moderate, Good, Excellent };
/// <0.5 poor, [0.5,0.75) moderate, [0.75,0.9) good, >=0.9 excellent.
IccBand interpret_icc(double value);
std::string_view to_string(IccBand band);

/// Fleiss' kappa with the large-sample z test against 0.
StatResult fleiss_kappa(const CountTable& counts);

/// Per-subject category counts; categories are 0..n_categories-1.
CountTable rating_counts(const LabelMatrix& labels, int n_categories);

/// Average ranks (1-based), ties share the mean of their positions.
std::vector<double> midranks(std::span<const double> values);

StatResult spearman_rho(std::span<const double> x, std::span<const double> y);

/// Statistic is U of `a`. Exact two-sided p by enumeration of the null
/// distribution when |a|+|b| <= 16 without ties; otherwise the tie- and
/// continuity-corrected normal approximation.
StatResult mann_whitney_u(std::span<const double> a, std::span<const double> b);

inline constexpr std::int64_t kMannWhitneyExactLimit = 16;

/// P(U <= u) under the null for sample sizes (m, n), no ties.
double mann_whitney_exact_cdf(double u, std::int64_t m, std::int64_t n);

StatResult kruskal_wallis(std::span<const std::vector<double>> groups);

/// Pearson chi-squared; Yates-corrected for 2x2 tables.
StatResult chi_squared(const CountTable& table);

struct CalibrationFit {
  double slope = 0.0;
  double intercept = 0.0;
  double intercept_se = 0.0;
  double intercept_p_value = 1.0;
  /// True when the intercept was not significant and the slope-only refit
  /// became the operative model.
  bool intercept_dropped = false;
  CalibrationModel operative;
};

/// OLS manual = slope * auto + intercept, with a slope-only refit when the
/// intercept's two-sided t test gives p >= alpha.
CalibrationFit fit_calibration(std::span<const double> automated, std::span<const double> manual,
                               double alpha = 0.05);

/// Strict-majority label per subject; nullopt is Unresolved.
std::vector<std::optional<int>> consensus_vote(const LabelMatrix& labels);

}  // namespace involukit::stats

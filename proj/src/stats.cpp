#include "involukit/stats.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

namespace involukit::stats {

namespace {

namespace bm = boost::math;

double normal_two_sided(double z) {
  const bm::normal_distribution<double> n;
  return 2.0 * std::min(bm::cdf(n, z), bm::cdf(bm::complement(n, z)));
}

double t_two_sided(double t, double df) {
  const bm::students_t_distribution<double> dist(df);
  return 2.0 * bm::cdf(bm::complement(dist, std::abs(t)));
}

double chi2_upper(double x, double df) {
  const bm::chi_squared_distribution<double> dist(df);
  return bm::cdf(bm::complement(dist, std::max(0.0, x)));
}

// Sum of t^3 - t over tie groups.
double tie_term(std::span<const double> values) {
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  double total = 0.0;
  for (std::size_t i = 0; i < v.size();) {
    std::size_t j = i;
    while (j < v.size() && v[j] == v[i]) ++j;
    const double t = static_cast<double>(j - i);
    total += t * t * t - t;
    i = j;
  }
  return total;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  const auto n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) fail(ErrorCode::ZeroVariance, "correlation of a constant sequence");
  return sxy / std::sqrt(sxx * syy);
}

void require_finite(std::span<const double> v, const char* what) {
  for (double x : v) require(std::isfinite(x), std::string(what) + " contains a non-finite value");
}

}  // namespace

TwoWayAnova two_way_anova(const RaterMatrix& m) {
  require(m.rows >= 2 && m.cols >= 2, "agreement statistics need at least 2 subjects and 2 raters");
  require_finite(m.data, "rater matrix");
  const auto n = static_cast<double>(m.rows);
  const auto k = static_cast<double>(m.cols);
  std::vector<double> row_mean(static_cast<std::size_t>(m.rows), 0.0);
  std::vector<double> col_mean(static_cast<std::size_t>(m.cols), 0.0);
  double grand = 0.0;
  for (std::int64_t i = 0; i < m.rows; ++i)
    for (std::int64_t j = 0; j < m.cols; ++j) {
      row_mean[i] += m(i, j);
      col_mean[j] += m(i, j);
      grand += m(i, j);
    }
  for (auto& v : row_mean) v /= k;
  for (auto& v : col_mean) v /= n;
  grand /= n * k;

  double ss_rows = 0.0, ss_cols = 0.0, ss_err = 0.0;
  for (double v : row_mean) ss_rows += (v - grand) * (v - grand);
  for (double v : col_mean) ss_cols += (v - grand) * (v - grand);
  ss_rows *= k;
  ss_cols *= n;
  for (std::int64_t i = 0; i < m.rows; ++i)
    for (std::int64_t j = 0; j < m.cols; ++j) {
      const double e = m(i, j) - row_mean[i] - col_mean[j] + grand;
      ss_err += e * e;
    }
  TwoWayAnova a;
  a.df_rows = n - 1.0;
  a.df_error = (n - 1.0) * (k - 1.0);
  a.ms_rows = ss_rows / a.df_rows;
  a.ms_cols = ss_cols / (k - 1.0);
  a.ms_error = ss_err / a.df_error;
  return a;
}

StatResult icc3_1(const RaterMatrix& m, double confidence) {
  require(confidence > 0.0 && confidence < 1.0, "confidence must be in (0,1)");
  const TwoWayAnova a = two_way_anova(m);
  const auto k = static_cast<double>(m.cols);
  const double denom = a.ms_rows + (k - 1.0) * a.ms_error;
  if (!(denom > 0.0)) fail(ErrorCode::DegenerateVariance, "MSR + (k-1)MSE is zero");

  StatResult r;
  r.method = "icc(3,1) two-way mixed, consistency, single rater";
  r.statistic = (a.ms_rows - a.ms_error) / denom;
  r.df = a.df_rows;
  if (a.ms_error == 0.0) {
    r.p_value = 0.0;
    r.ci_low = r.ci_high = 1.0;
    return r;
  }
  const double f = a.ms_rows / a.ms_error;
  const double alpha = 1.0 - confidence;
  const bm::fisher_f_distribution<double> null_f(a.df_rows, a.df_error);
  const bm::fisher_f_distribution<double> flipped(a.df_error, a.df_rows);
  r.p_value = bm::cdf(bm::complement(null_f, f));
  const double f_low = f / bm::quantile(bm::complement(null_f, alpha / 2.0));
  const double f_high = f * bm::quantile(bm::complement(flipped, alpha / 2.0));
  r.ci_low = (f_low - 1.0) / (f_low + k - 1.0);
  r.ci_high = (f_high - 1.0) / (f_high + k - 1.0);
  return r;
}

IccBand interpret_icc(double value) {
  if (value < 0.5) return IccBand::Poor;
  if (value < 0.75) return IccBand::Moderate;
  if (value < 0.9) return IccBand::Good;
  return IccBand::Excellent;
}

std::string_view to_string(IccBand band) {
  switch (band) {
    case IccBand::Poor: return "poor";
    case IccBand::Moderate: return "moderate";
    case IccBand::Good: return "good";
    case IccBand::Excellent: return "excellent";
  }
  return "";
}

CountTable rating_counts(const LabelMatrix& labels, int n_categories) {
  require(n_categories >= 1, "need at least one category");
  CountTable counts(labels.rows, n_categories, 0);
  for (std::int64_t i = 0; i < labels.rows; ++i)
    for (std::int64_t j = 0; j < labels.cols; ++j) {
      const auto& l = labels(i, j);
      if (!l) continue;
      require(*l >= 0 && *l < n_categories, "category code out of range");
      ++counts(i, *l);
    }
  return counts;
}

StatResult fleiss_kappa(const CountTable& counts) {
  require(counts.rows >= 2 && counts.cols >= 1, "fleiss kappa needs at least 2 subjects");
  std::int64_t raters = -1;
  for (std::int64_t i = 0; i < counts.rows; ++i) {
    std::int64_t total = 0;
    for (std::int64_t j = 0; j < counts.cols; ++j) {
      require(counts(i, j) >= 0, "rating counts must be non-negative");
      total += counts(i, j);
    }
    if (raters < 0) raters = total;
    require(total == raters, "every subject must carry the same number of ratings");
  }
  require(raters >= 2, "fleiss kappa needs at least 2 ratings per subject");

  const auto n_sub = static_cast<double>(counts.rows);
  const auto n_rat = static_cast<double>(raters);
  std::vector<double> p(static_cast<std::size_t>(counts.cols), 0.0);
  double p_bar = 0.0;
  for (std::int64_t i = 0; i < counts.rows; ++i) {
    double sq = 0.0;
    for (std::int64_t j = 0; j < counts.cols; ++j) {
      const auto c = static_cast<double>(counts(i, j));
      p[j] += c;
      sq += c * c;
    }
    p_bar += (sq - n_rat) / (n_rat * (n_rat - 1.0));
  }
  p_bar /= n_sub;
  for (auto& v : p) v /= n_sub * n_rat;
  double pe = 0.0, pq = 0.0, pq_qp = 0.0;
  bool single_category = false;
  for (double pj : p) {
    const double qj = 1.0 - pj;
    pe += pj * pj;
    pq += pj * qj;
    pq_qp += pj * qj * (qj - pj);
    single_category = single_category || pj == 1.0;
  }
  if (single_category || pe >= 1.0) fail(ErrorCode::DegenerateAgreement, "all ratings fall in one category");

  StatResult r;
  r.method = "fleiss kappa";
  r.statistic = (p_bar - pe) / (1.0 - pe);
  const double var = 2.0 / (pq * pq * n_sub * n_rat * (n_rat - 1.0)) * (pq * pq - pq_qp);
  r.p_value = var > 0.0 ? normal_two_sided(r.statistic / std::sqrt(var)) : 1.0;
  return r;
}

std::vector<double> midranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && values[order[j]] == values[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t t = i; t < j; ++t) ranks[order[t]] = rank;
    i = j;
  }
  return ranks;
}

StatResult spearman_rho(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size(), "spearman needs equal-length samples");
  require(x.size() >= 3, "spearman needs at least 3 pairs");
  require_finite(x, "x");
  require_finite(y, "y");
  const auto rx = midranks(x);
  const auto ry = midranks(y);
  StatResult r;
  r.method = "spearman rank correlation";
  r.statistic = pearson(rx, ry);
  const double df = static_cast<double>(x.size()) - 2.0;
  r.df = df;
  const double one_minus = 1.0 - r.statistic * r.statistic;
  if (one_minus <= 0.0) {
    r.p_value = 0.0;
  } else {
    r.p_value = t_two_sided(r.statistic * std::sqrt(df / one_minus), df);
  }
  return r;
}

double mann_whitney_exact_cdf(double u, std::int64_t m, std::int64_t n) {
  require(m >= 1 && n >= 1, "sample sizes must be positive");
  // ways[j][s]: ways to give j of the ranks seen so far to the first sample
  // with U contribution s (rank sum minus j(j+1)/2).
  const std::int64_t max_u = m * n;
  std::vector<std::vector<double>> ways(static_cast<std::size_t>(m + 1),
                                        std::vector<double>(static_cast<std::size_t>(max_u + 1), 0.0));
  ways[0][0] = 1.0;
  for (std::int64_t item = 0; item < m + n; ++item) {
    // Choosing this item as the (j+1)-th smallest of the first sample adds
    // (item - j) to U: the number of second-sample values below it.
    for (std::int64_t j = std::min(item, m - 1); j >= 0; --j) {
      const std::int64_t gain = item - j;
      if (gain > n) continue;
      auto& from = ways[j];
      auto& to = ways[j + 1];
      for (std::int64_t s = max_u - gain; s >= 0; --s)
        if (from[s] != 0.0) to[s + gain] += from[s];
    }
  }
  const auto& dist = ways[m];
  const double total = std::accumulate(dist.begin(), dist.end(), 0.0);
  double below = 0.0;
  for (std::int64_t s = 0; s <= max_u && static_cast<double>(s) <= u + 1e-9; ++s) below += dist[s];
  return below / total;
}

StatResult mann_whitney_u(std::span<const double> a, std::span<const double> b) {
  require(!a.empty() && !b.empty(), "mann-whitney needs two nonempty samples");
  require_finite(a, "a");
  require_finite(b, "b");
  std::vector<double> pooled(a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  const auto ranks = midranks(pooled);
  const auto m = static_cast<std::int64_t>(a.size());
  const auto n = static_cast<std::int64_t>(b.size());
  double rank_sum = 0.0;
  for (std::int64_t i = 0; i < m; ++i) rank_sum += ranks[i];
  const auto md = static_cast<double>(m);
  const auto nd = static_cast<double>(n);

  StatResult r;
  r.statistic = rank_sum - md * (md + 1.0) / 2.0;
  const double ties = tie_term(pooled);
  if (m + n <= kMannWhitneyExactLimit && ties == 0.0) {
    r.method = "mann-whitney u, exact";
    const double p = r.statistic > md * nd / 2.0 ? 1.0 - mann_whitney_exact_cdf(r.statistic - 1.0, m, n)
                                                  : mann_whitney_exact_cdf(r.statistic, m, n);
    r.p_value = std::min(1.0, 2.0 * p);
    return r;
  }
  r.method = "mann-whitney u, normal approximation with continuity correction";
  const double total = md + nd;
  const double z0 = r.statistic - md * nd / 2.0;
  const double sigma = std::sqrt(md * nd / 12.0 * ((total + 1.0) - ties / (total * (total - 1.0))));
  if (sigma == 0.0) {
    r.p_value = 1.0;
    return r;
  }
  const double correction = z0 > 0.0 ? 0.5 : (z0 < 0.0 ? -0.5 : 0.0);
  r.p_value = std::min(1.0, normal_two_sided((z0 - correction) / sigma));
  return r;
}

StatResult kruskal_wallis(std::span<const std::vector<double>> groups) {
  require(groups.size() >= 2, "kruskal-wallis needs at least 2 groups");
  std::vector<double> pooled;
  for (const auto& g : groups) {
    require(!g.empty(), "kruskal-wallis groups must be nonempty");
    require_finite(g, "group");
    pooled.insert(pooled.end(), g.begin(), g.end());
  }
  require(pooled.size() >= 3, "kruskal-wallis needs at least 3 observations");
  const auto ranks = midranks(pooled);
  const auto total = static_cast<double>(pooled.size());
  const double ties = tie_term(pooled);
  const double correction = 1.0 - ties / (total * total * total - total);
  if (correction <= 0.0) fail(ErrorCode::AllValuesIdentical, "all observations are equal");

  double sum = 0.0;
  std::size_t offset = 0;
  for (const auto& g : groups) {
    double rs = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) rs += ranks[offset + i];
    offset += g.size();
    sum += rs * rs / static_cast<double>(g.size());
  }
  StatResult r;
  r.method = "kruskal-wallis rank sum";
  r.statistic = (12.0 / (total * (total + 1.0)) * sum - 3.0 * (total + 1.0)) / correction;
  r.df = static_cast<double>(groups.size()) - 1.0;
  r.p_value = chi2_upper(r.statistic, *r.df);
  return r;
}

StatResult chi_squared(const CountTable& table) {
  require(table.rows >= 2 && table.cols >= 2, "chi-squared needs at least a 2x2 table");
  std::vector<double> row(static_cast<std::size_t>(table.rows), 0.0), col(static_cast<std::size_t>(table.cols), 0.0);
  double total = 0.0;
  for (std::int64_t i = 0; i < table.rows; ++i)
    for (std::int64_t j = 0; j < table.cols; ++j) {
      require(table(i, j) >= 0, "counts must be non-negative");
      const auto v = static_cast<double>(table(i, j));
      row[i] += v;
      col[j] += v;
      total += v;
    }
  for (double v : row)
    if (v == 0.0) fail(ErrorCode::ZeroMarginal, "a row of the contingency table sums to zero");
  for (double v : col)
    if (v == 0.0) fail(ErrorCode::ZeroMarginal, "a column of the contingency table sums to zero");

  const bool yates = table.rows == 2 && table.cols == 2;
  double correction = 0.0;
  if (yates) {
    correction = 0.5;
    for (std::int64_t i = 0; i < 2; ++i)
      for (std::int64_t j = 0; j < 2; ++j)
        correction = std::min(correction, std::abs(static_cast<double>(table(i, j)) - row[i] * col[j] / total));
  }
  double stat = 0.0;
  for (std::int64_t i = 0; i < table.rows; ++i)
    for (std::int64_t j = 0; j < table.cols; ++j) {
      const double e = row[i] * col[j] / total;
      const double d = std::abs(static_cast<double>(table(i, j)) - e) - correction;
      stat += d * d / e;
    }
  StatResult r;
  r.method = yates ? "pearson chi-squared with yates continuity correction" : "pearson chi-squared";
  r.statistic = stat;
  r.df = static_cast<double>((table.rows - 1) * (table.cols - 1));
  r.p_value = chi2_upper(stat, *r.df);
  return r;
}

CalibrationFit fit_calibration(std::span<const double> automated, std::span<const double> manual, double alpha) {
  require(automated.size() == manual.size(), "calibration needs paired samples");
  require(automated.size() >= 3, "calibration needs at least 3 pairs");
  require_finite(automated, "automated");
  require_finite(manual, "manual");
  const auto n = static_cast<double>(automated.size());
  const double mx = std::accumulate(automated.begin(), automated.end(), 0.0) / n;
  const double my = std::accumulate(manual.begin(), manual.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0, xx = 0.0, xy = 0.0;
  for (std::size_t i = 0; i < automated.size(); ++i) {
    const double dx = automated[i] - mx;
    sxx += dx * dx;
    sxy += dx * (manual[i] - my);
    xx += automated[i] * automated[i];
    xy += automated[i] * manual[i];
  }
  if (sxx == 0.0) fail(ErrorCode::ZeroVariance, "automated values are constant");

  CalibrationFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double sse = 0.0;
  for (std::size_t i = 0; i < automated.size(); ++i) {
    const double e = manual[i] - (fit.slope * automated[i] + fit.intercept);
    sse += e * e;
  }
  const double df = n - 2.0;
  fit.intercept_se = df > 0.0 ? std::sqrt(sse / df * (1.0 / n + mx * mx / sxx)) : 0.0;
  if (fit.intercept_se > 0.0) {
    fit.intercept_p_value = t_two_sided(fit.intercept / fit.intercept_se, df);
  } else {
    fit.intercept_p_value = fit.intercept == 0.0 ? 1.0 : 0.0;
  }
  fit.intercept_dropped = fit.intercept_p_value >= alpha;
  if (fit.intercept_dropped) {
    fit.operative = CalibrationModel{xy / xx, 0.0, fit.intercept_p_value};
  } else {
    fit.operative = CalibrationModel{fit.slope, fit.intercept, fit.intercept_p_value};
  }
  return fit;
}

std::vector<std::optional<int>> consensus_vote(const LabelMatrix& labels) {
  require(labels.cols >= 2, "consensus needs at least 2 raters");
  std::vector<std::optional<int>> out;
  out.reserve(static_cast<std::size_t>(labels.rows));
  for (std::int64_t i = 0; i < labels.rows; ++i) {
    std::map<int, std::int64_t> votes;
    for (std::int64_t j = 0; j < labels.cols; ++j)
      if (labels(i, j)) ++votes[*labels(i, j)];
    std::optional<int> winner;
    for (const auto& [label, count] : votes)
      if (2 * count > labels.cols) winner = label;
    out.push_back(winner);
  }
  return out;
}

}  // namespace involukit::stats

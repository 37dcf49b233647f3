#include "commtraj/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

namespace commtraj::stats {

namespace {

std::vector<double> differences_of(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("paired samples differ in length");
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  return d;
}

// Exact two-sided p for the signed-rank statistic. Ranks are doubled so tied
// (half-integer) ranks stay integral; the null puts an independent fair sign
// on each rank.
double exact_signed_rank_p(std::span<const double> ranks, double w_plus) {
  std::vector<long> doubled(ranks.size());
  long total = 0;
  for (std::size_t i = 0; i < ranks.size(); ++i) {
    doubled[i] = std::lround(ranks[i] * 2.0);
    total += doubled[i];
  }
  std::vector<double> ways(static_cast<std::size_t>(total) + 1, 0.0);
  ways[0] = 1.0;
  long reach = 0;
  for (long r : doubled) {
    for (long s = reach; s >= 0; --s)
      if (ways[s] != 0.0) ways[s + r] += ways[s];
    reach += r;
  }
  const double count = std::ldexp(1.0, static_cast<int>(ranks.size()));
  const long observed = std::lround(w_plus * 2.0);
  const long mirrored = total - observed;
  const long lo = std::min(observed, mirrored);
  const long hi = std::max(observed, mirrored);
  double tail = 0.0;
  for (long s = 0; s <= total; ++s)
    if (s <= lo || s >= hi) tail += ways[s];
  return std::min(1.0, tail / count);
}

}  // namespace

double mean(std::span<const double> v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double standard_error(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  const double n = static_cast<double>(v.size());
  return std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
}

double student_t_two_sided(double t, double dof) {
  if (std::isinf(t)) return 0.0;
  boost::math::students_t dist(dof);
  return 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(t)));
}

PairedTTest paired_t_test(std::span<const double> a, std::span<const double> b) {
  const auto d = differences_of(a, b);
  return paired_t_test(d);
}

PairedTTest paired_t_test(std::span<const double> d) {
  if (d.size() < 2) throw std::invalid_argument("paired t-test needs at least two pairs");
  PairedTTest r;
  r.n = d.size();
  const double n = static_cast<double>(d.size());
  r.mean_difference = mean(d);
  double ss = 0.0;
  for (double x : d) ss += (x - r.mean_difference) * (x - r.mean_difference);
  const double sd = std::sqrt(ss / (n - 1.0));
  if (sd == 0.0) {
    if (r.mean_difference == 0.0) {
      r.t = 0.0;
      r.p = 1.0;
    } else {
      r.zero_variance = true;
      r.t = std::copysign(std::numeric_limits<double>::infinity(), r.mean_difference);
      r.p = 0.0;
    }
    return r;
  }
  r.t = r.mean_difference / (sd / std::sqrt(n));
  r.p = student_t_two_sided(r.t, n - 1.0);
  return r;
}

std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return values[i] < values[j]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double avg = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b) {
  const auto d = differences_of(a, b);
  return wilcoxon_signed_rank(d);
}

WilcoxonResult wilcoxon_signed_rank(std::span<const double> differences) {
  std::vector<double> nonzero;
  for (double x : differences)
    if (x != 0.0) nonzero.push_back(x);
  WilcoxonResult r;
  r.n = nonzero.size();
  if (nonzero.empty()) {
    r.p_exact = 1.0;
    return r;
  }
  std::vector<double> magnitude(nonzero.size());
  for (std::size_t i = 0; i < nonzero.size(); ++i) magnitude[i] = std::fabs(nonzero[i]);
  const auto ranks = average_ranks(magnitude);
  for (std::size_t i = 0; i < nonzero.size(); ++i) (nonzero[i] > 0 ? r.w_plus : r.w_minus) += ranks[i];

  const double n = static_cast<double>(r.n);
  const double expected = n * (n + 1.0) / 4.0;
  double tie_term = 0.0;
  {
    auto sorted = magnitude;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size();) {
      std::size_t j = i;
      while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
      const double t = static_cast<double>(j - i + 1);
      tie_term += t * t * t - t;
      i = j + 1;
    }
  }
  const double variance = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
  if (variance > 0.0) {
    r.z = (r.w_plus - expected) / std::sqrt(variance);
    boost::math::normal normal;
    r.p = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(normal, std::fabs(r.z))));
  }
  if (r.n <= 30) r.p_exact = exact_signed_rank_p(ranks, r.w_plus);
  return r;
}

}  // namespace commtraj::stats

#pragma once

#include <optional>
#include <span>
#include <vector>

namespace commtraj::stats {

struct PairedTTest {
  std::size_t n = 0;
  double mean_difference = 0.0;
  double t = 0.0;
  double p = 1.0;  // two-sided
  /// Set when the differences have zero variance but a nonzero mean; t and p
  /// are then undefined (t is reported as +/-inf, p as 0).
  bool zero_variance = false;
};

/// Classic paired t-test on the differences a_i - b_i with n-1 degrees of
/// freedom. All-zero differences give t = 0, p = 1. Throws
/// std::invalid_argument for fewer than two pairs or mismatched lengths.
PairedTTest paired_t_test(std::span<const double> a, std::span<const double> b);
PairedTTest paired_t_test(std::span<const double> differences);

struct WilcoxonResult {
  std::size_t n = 0;         // non-zero differences
  double w_plus = 0.0;       // rank sum of positive differences
  double w_minus = 0.0;      // rank sum of negative differences
  double z = 0.0;
  double p = 1.0;            // two-sided, normal approximation with tie correction
  std::optional<double> p_exact;  // two-sided exact null distribution, small n only
};

/// Wilcoxon signed-rank test on paired samples. Zero differences are dropped;
/// tied |differences| receive average ranks. All-zero input gives p = 1.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b);
WilcoxonResult wilcoxon_signed_rank(std::span<const double> differences);

/// Average ranks (1-based) of the values.
std::vector<double> average_ranks(std::span<const double> values);

/// Two-sided p-value of Student's t with `dof` degrees of freedom.
double student_t_two_sided(double t, double dof);

double mean(std::span<const double> v);
/// Sample standard error (sd / sqrt(n)); 0 for n < 2.
double standard_error(std::span<const double> v);

}  // namespace commtraj::stats

#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>

#include "commtraj/stats.hpp"

using namespace commtraj;

namespace {

// Two-sided p by enumerating all 2^n sign assignments on the ranks.
double brute_signed_rank_p(const std::vector<double>& ranks, double w_plus) {
  double total = 0.0;
  for (double r : ranks) total += r;
  const double centre = total / 2.0, observed = std::fabs(w_plus - centre);
  const std::size_t n = ranks.size();
  std::size_t extreme = 0;
  for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
    double w = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (mask & (std::size_t{1} << i)) w += ranks[i];
    if (std::fabs(w - centre) >= observed - 1e-9) ++extreme;
  }
  return double(extreme) / double(std::size_t{1} << n);
}

// Ranks of |d| by counting, ties averaged.
std::vector<double> brute_ranks(const std::vector<double>& d) {
  std::vector<double> r;
  for (double x : d) {
    double less = 0, equal = 0;
    for (double y : d) {
      less += std::fabs(y) < std::fabs(x);
      equal += std::fabs(y) == std::fabs(x);
    }
    r.push_back(less + (equal + 1.0) / 2.0);
  }
  return r;
}

// Two-sided Student t tail by Simpson integration of the density.
double t_tail(double t, double dof) {
  const double c = std::exp(std::lgamma((dof + 1) / 2) - std::lgamma(dof / 2)) / std::sqrt(dof * M_PI);
  auto pdf = [&](double x) { return c * std::pow(1 + x * x / dof, -(dof + 1) / 2); };
  const double a = 0.0, b = std::fabs(t);
  const int n = 20000;
  const double h = (b - a) / n;
  double s = pdf(a) + pdf(b);
  for (int i = 1; i < n; ++i) s += pdf(a + i * h) * (i % 2 ? 4 : 2);
  return 1.0 - 2.0 * s * h / 3.0;
}

}  // namespace

TEST_CASE("paired t by hand") {
  // differences 2,1,3,2.5: mean 2.125, squared deviations sum to 2.1875, t = 4.9771 on 3 dof
  const std::vector<double> d{2, 1, 3, 2.5};
  const auto r = stats::paired_t_test(d);
  CHECK(r.mean_difference == doctest::Approx(2.125));
  CHECK(r.t == doctest::Approx(2.125 / (std::sqrt(2.1875 / 3) / 2)).epsilon(1e-12));
  CHECK(r.p == doctest::Approx(t_tail(r.t, 3)).epsilon(1e-8));
  const std::vector<double> a{3, 4}, b{1, 2, 3};
  CHECK_THROWS_AS(stats::paired_t_test(a, b), std::invalid_argument);
  CHECK_THROWS_AS(stats::paired_t_test(std::vector<double>{1.0}), std::invalid_argument);
}

TEST_CASE("paired t degenerate variance") {
  const auto zero = stats::paired_t_test(std::vector<double>{0, 0, 0});
  CHECK(zero.p == 1.0);
  const auto constant = stats::paired_t_test(std::vector<double>{2, 2, 2});
  CHECK(constant.zero_variance);
  CHECK(constant.p == 0.0);
}

TEST_CASE("average ranks") {
  CHECK(stats::average_ranks(std::vector<double>{10, 20, 20, 5}) == std::vector<double>{2, 3.5, 3.5, 1});
}

TEST_CASE("wilcoxon matches enumeration for n <= 12") {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> size(1, 12), value(-6, 6);
  for (int trial = 0; trial < 400; ++trial) {
    std::vector<double> d;
    for (int i = size(rng); i > 0; --i) d.push_back(value(rng) * 0.5);  // ties and zeros on purpose
    std::vector<double> nz;
    for (double x : d)
      if (x != 0) nz.push_back(x);
    const auto r = stats::wilcoxon_signed_rank(d);
    CHECK(r.n == nz.size());
    if (nz.empty()) {
      CHECK(r.p == 1.0);
      continue;
    }
    const auto ranks = brute_ranks(nz);
    double wp = 0, wm = 0;
    for (std::size_t i = 0; i < nz.size(); ++i) (nz[i] > 0 ? wp : wm) += ranks[i];
    CHECK(r.w_plus == wp);
    CHECK(r.w_minus == wm);
    REQUIRE(r.p_exact);
    CHECK(*r.p_exact == doctest::Approx(brute_signed_rank_p(ranks, wp)).epsilon(1e-12));
  }
}

TEST_CASE("wilcoxon textbook value") {
  // all 8 differences positive, distinct: exact two-sided p = 2/256
  const std::vector<double> d{1, 2, 3, 4, 5, 6, 7, 8};
  const auto r = stats::wilcoxon_signed_rank(d);
  CHECK(r.w_plus == 36);
  CHECK(*r.p_exact == doctest::Approx(2.0 / 256));
}

TEST_CASE("mean and standard error") {
  const std::vector<double> v{1, 2, 3, 4};
  CHECK(stats::mean(v) == 2.5);
  CHECK(stats::standard_error(v) == doctest::Approx(std::sqrt(5.0 / 3.0) / 2.0));
  CHECK(stats::standard_error(std::vector<double>{3}) == 0.0);
}

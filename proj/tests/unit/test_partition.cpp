#include <doctest.h>

#include <stdexcept>

#include <cmath>
#include <functional>
#include <map>

#include "covspec/partition.hpp"

using namespace covspec;

namespace {

// Every strictly increasing cut vector with `cuts` entries in 1..T-1 whose
// segments all hold at least t_min points.
void enumerate_time(std::size_t T, std::size_t t_min, std::size_t cuts,
                    const std::function<void(const std::vector<std::size_t>&)>& visit) {
  std::vector<std::size_t> c;
  std::function<void(std::size_t)> rec = [&](std::size_t prev) {
    if (c.size() == cuts) {
      if (T - prev >= t_min) visit(c);
      return;
    }
    for (std::size_t x = prev + t_min; x + t_min <= T; ++x) {
      c.push_back(x);
      rec(x);
      c.pop_back();
    }
  };
  rec(0);
}

// Cut ranks with every segment holding at least w_min of the D values.
void enumerate_cov(std::size_t D, std::size_t w_min, std::size_t cuts,
                   const std::function<void(const std::vector<std::size_t>&)>& visit) {
  std::vector<std::size_t> c;
  std::function<void(std::size_t)> rec = [&](std::size_t next_rank) {
    if (c.size() == cuts) {
      if (D - next_rank >= w_min) visit(c);
      return;
    }
    for (std::size_t r = next_rank + w_min - 1; r + 1 + w_min <= D; ++r) {
      c.push_back(r);
      rec(r + 1);
      c.pop_back();
    }
  };
  rec(0);
}

std::vector<double> lattice(std::size_t D) {
  std::vector<double> v(D);
  for (std::size_t i = 0; i < D; ++i) v[i] = static_cast<double>(i) / static_cast<double>(D - 1);
  return v;
}

}  // namespace

TEST_CASE("segment count prior") {
  CHECK(log_prior_m(3, 10) == doctest::Approx(-std::log(10.0)));
  for (std::size_t m = 1; m <= 10; ++m) CHECK(log_prior_m(m, 10) == log_prior_m(1, 10));
  CHECK_THROWS_AS(log_prior_m(11, 10), std::out_of_range);
  CHECK_THROWS_AS(log_prior_m(0, 10), std::out_of_range);
}

TEST_CASE("time partition prior values") {
  CHECK(log_prior_time_partition(TimePartition(100, {}), 40) == 0.0);
  CHECK(log_prior_time_partition(TimePartition(100, {50}), 40) == doctest::Approx(-std::log(21.0)));
  std::size_t feasible = 0;
  enumerate_time(100, 40, 1, [&](const auto&) { ++feasible; });
  CHECK(feasible == 21);
  CHECK_THROWS_AS(log_prior_time_partition(TimePartition(100, {30}), 40), std::invalid_argument);
}

TEST_CASE("time partition prior is normalized on every small case") {
  for (std::size_t T = 2; T <= 60; ++T) {
    for (std::size_t t_min = 1; t_min <= 10; ++t_min) {
      for (std::size_t m = 1; m <= 3; ++m) {
        if (m * t_min > T) continue;
        double total = 0.0;
        enumerate_time(T, t_min, m - 1, [&](const auto& cuts) {
          total += std::exp(log_prior_time_partition(TimePartition(T, cuts), t_min));
        });
        CHECK_MESSAGE(std::abs(total - 1.0) < 1e-12, "T=", T, " t_min=", t_min, " m=", m);
      }
    }
  }
}

TEST_CASE("covariate partition prior values") {
  const auto v = lattice(8);
  CHECK(log_prior_covariate_partition(CovariatePartition(v, {}), 2) == 0.0);
  CHECK(log_prior_covariate_partition(CovariatePartition(v, {3}), 1) == doctest::Approx(-std::log(7.0)));
  CHECK(log_prior_covariate_partition(CovariatePartition(v, {3}), 2) == doctest::Approx(-std::log(5.0)));
  CHECK_THROWS_AS(log_prior_covariate_partition(CovariatePartition(v, {0}), 2), std::invalid_argument);
}

TEST_CASE("covariate partition prior is normalized on every small case") {
  for (std::size_t D = 2; D <= 8; ++D) {
    for (std::size_t w_min = 1; w_min <= 4; ++w_min) {
      for (std::size_t p = 1; p <= 4; ++p) {
        if (p * w_min > D) continue;
        double total = 0.0;
        enumerate_cov(D, w_min, p - 1, [&](const auto& ranks) {
          total += std::exp(log_prior_covariate_partition(CovariatePartition(lattice(D), ranks), w_min));
        });
        CHECK_MESSAGE(std::abs(total - 1.0) < 1e-12, "D=", D, " w_min=", w_min, " p=", p);
      }
    }
  }
}

TEST_CASE("membership functions partition the axes") {
  TimePartition t(100, {20, 55});
  std::vector<std::size_t> counts(3, 0);
  for (std::size_t i = 0; i < 100; ++i) ++counts[t.segment_of(i)];
  CHECK(counts == std::vector<std::size_t>{20, 35, 45});
  CHECK(t.segment_of(19) == 0);
  CHECK(t.segment_of(20) == 1);

  CovariatePartition c(lattice(8), {3});
  CHECK(c.segment_of_value(0.0) == 0);
  CHECK(c.segment_of_value(3.0 / 7.0) == 0);  // (psi_0, psi_1] includes the cut value
  CHECK(c.segment_of_value(3.0 / 7.0 + 1e-9) == 1);
  CHECK(c.segment_of_value(1.0) == 1);
  CHECK(c.cut_values()[0] == doctest::Approx(3.0 / 7.0));
  CHECK(c.distinct_count(0) == 4);
  CHECK(c.distinct_count(1) == 4);
  for (std::size_t r = 0; r < 8; ++r) CHECK(c.segment_of_rank(r) == (r <= 3 ? 0u : 1u));
}

TEST_CASE("partition constructors validate") {
  CHECK_THROWS_AS(TimePartition(100, {50, 40}), std::invalid_argument);
  CHECK_THROWS_AS(TimePartition(100, {0}), std::invalid_argument);
  CHECK_THROWS_AS(TimePartition(100, {100}), std::invalid_argument);
  CHECK_THROWS_AS(CovariatePartition(lattice(5), {4}), std::invalid_argument);
  CHECK_FALSE(TimePartition(100, {30}).satisfies(40, 10));
  CHECK(TimePartition(100, {40}).satisfies(40, 10));
  CHECK_FALSE(TimePartition(100, {40}).satisfies(40, 1));
}

TEST_CASE("relocation mixture density") {
  const double pi_mix = 0.2;
  // Interior point: q2 spreads 1/3 over {x-1, x, x+1}.
  CHECK(std::exp(relocation_log_density(10, 20, 15, 14, 0.0)) == doctest::Approx(1.0 / 3));
  CHECK(std::exp(relocation_log_density(10, 20, 15, 15, 0.0)) == doctest::Approx(1.0 / 3));
  // One neighbour at the boundary: 1/2 each.
  CHECK(std::exp(relocation_log_density(10, 20, 10, 11, 0.0)) == doctest::Approx(0.5));
  CHECK(std::exp(relocation_log_density(10, 20, 20, 20, 0.0)) == doctest::Approx(0.5));
  // Both neighbours at t_min: stay put.
  CHECK(std::exp(relocation_log_density(10, 10, 10, 10, pi_mix)) == doctest::Approx(1.0));
  // Outside the lattice.
  CHECK(relocation_log_density(10, 20, 15, 21, pi_mix) == -INFINITY);
  // Normalized for every start.
  for (std::size_t from = 10; from <= 20; ++from) {
    double total = 0.0;
    for (std::size_t to = 10; to <= 20; ++to) total += std::exp(relocation_log_density(10, 20, from, to, pi_mix));
    CHECK(total == doctest::Approx(1.0));
  }
}

TEST_CASE("time relocation kernel samples its density and respects t_min") {
  const TimePartition part(300, {100, 160, 250});
  Rng rng(77);
  std::map<std::size_t, int> hits;
  const int draws = 200000;
  for (int i = 0; i < draws; ++i) {
    const auto r = relocation_kernel_time(part, 1, 0.2, 40, rng);
    ++hits[r.position];
    CHECK(part.with_cut_moved(1, r.position).satisfies(40, 10));
    CHECK(r.log_forward == doctest::Approx(relocation_log_density(140, 210, 160, r.position, 0.2)));
    CHECK(r.log_reverse == doctest::Approx(relocation_log_density(140, 210, r.position, 160, 0.2)));
    if (r.position == 160) CHECK(r.log_forward == r.log_reverse);
  }
  for (const auto& [pos, n] : hits) {
    const double p = std::exp(relocation_log_density(140, 210, 160, pos, 0.2));
    CHECK(std::abs(n / double(draws) - p) < 5 * std::sqrt(p * (1 - p) / draws));
  }
  CHECK(hits.begin()->first >= 140);
  CHECK(hits.rbegin()->first <= 210);
}

TEST_CASE("covariate relocation kernel") {
  Rng rng(3);
  // Two segments each holding exactly w_min values: the cut cannot move.
  const CovariatePartition tight(lattice(4), {1});
  for (int i = 0; i < 100; ++i) {
    const auto r = relocation_kernel_covariate(tight, 0, 0.5, 2, rng);
    CHECK(r.position == 1);
    CHECK(r.log_forward == doctest::Approx(0.0));
  }
  // Uniform component support size r_k + r_k+1 - 2 w_min + 1.
  const CovariatePartition part(lattice(10), {2, 7});  // r = 3, 5, 2
  std::map<std::size_t, int> hits;
  for (int i = 0; i < 50000; ++i) {
    const auto r = relocation_kernel_covariate(part, 0, 1.0, 2, rng);
    ++hits[r.position];
    CHECK(part.with_cut_moved(0, r.position).satisfies(2, 10));
  }
  CHECK(hits.size() == 3 + 5 - 2 * 2 + 1);
}

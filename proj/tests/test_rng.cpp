#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "arboot/rng.hpp"

using arboot::PhiloxStream;

TEST_CASE("streams are reproducible and independent of interleaving") {
  PhiloxStream a(42, 7, 1);
  std::vector<std::uint64_t> first;
  for (int i = 0; i < 16; ++i) first.push_back(a());

  PhiloxStream other(42, 8, 1);
  (void)other();  // consuming another stream must not disturb stream (7,1)
  PhiloxStream b(42, 7, 1);
  for (int i = 0; i < 16; ++i) REQUIRE(b() == first[static_cast<std::size_t>(i)]);
}

TEST_CASE("distinct keys give distinct output") {
  PhiloxStream a(42, 7, 1), b(42, 7, 2), c(43, 7, 1), d(42, 8, 1);
  REQUIRE(a() != b());
  PhiloxStream a2(42, 7, 1);
  REQUIRE(a2() != c());
  PhiloxStream a3(42, 7, 1);
  REQUIRE(a3() != d());
}

TEST_CASE("uniform draws land in (0,1) with roughly uniform moments") {
  PhiloxStream s(1, 0, 0);
  const int N = 100000;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < N; ++i) {
    const double u = s.uniform01();
    REQUIRE(u > 0.0);
    REQUIRE(u < 1.0);
    sum += u;
    sumsq += u * u;
  }
  REQUIRE(sum / N == Catch::Approx(0.5).margin(0.005));
  REQUIRE(sumsq / N == Catch::Approx(1.0 / 3.0).margin(0.005));
}

TEST_CASE("normal draws have unit variance and zero mean") {
  PhiloxStream s(2, 0, 0);
  const int N = 200000;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < N; ++i) {
    const double g = s.normal();
    sum += g;
    sumsq += g * g;
  }
  REQUIRE(sum / N == Catch::Approx(0.0).margin(0.01));
  REQUIRE(sumsq / N == Catch::Approx(1.0).margin(0.02));
}

TEST_CASE("arcsine beta has the Beta(1/2,1/2) mean and variance") {
  PhiloxStream s(3, 0, 0);
  const int N = 200000;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < N; ++i) {
    const double x = s.arcsine_beta();
    REQUIRE(x >= 0.0);
    REQUIRE(x <= 1.0);
    sum += x;
    sumsq += x * x;
  }
  // mean 1/2, variance 1/8
  REQUIRE(sum / N == Catch::Approx(0.5).margin(0.005));
  REQUIRE(sumsq / N - 0.25 == Catch::Approx(0.125).margin(0.005));
}

TEST_CASE("exponential with mean 5 is centered by subtracting 5") {
  PhiloxStream s(4, 0, 0);
  const int N = 200000;
  double sum = 0.0;
  for (int i = 0; i < N; ++i) sum += s.exponential(5.0) - 5.0;
  REQUIRE(sum / N == Catch::Approx(0.0).margin(0.05));
}

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "mgcn/rng.hpp"

using mgcn::RngStream;

TEST_CASE("rng: identical seeds give identical streams") {
  RngStream a(12345), b(12345);
  for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("rng: doubles live in [0,1), uniforms in their interval") {
  RngStream r(7);
  for (int i = 0; i < 10000; ++i) {
    const double d = r.next_double();
    CHECK(d >= 0.0);
    CHECK(d < 1.0);
  }
  for (int i = 0; i < 1000; ++i) {
    const double u = r.uniform(-2.5, 3.5);
    CHECK(u >= -2.5);
    CHECK(u <= 3.5);
  }
}

TEST_CASE("rng: next_below stays in range and hits all residues") {
  RngStream r(99);
  std::vector<int> seen(7, 0);
  for (int i = 0; i < 7000; ++i) {
    const auto v = r.next_below(7);
    REQUIRE(v < 7);
    ++seen[static_cast<int>(v)];
  }
  for (int count : seen) CHECK(count > 0);
}

TEST_CASE("rng: normal deviates have plausible moments") {
  RngStream r(42);
  const int n = 100000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = r.normal();
    sum += x;
    sq += x * x;
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  CHECK(std::abs(mean) < 0.02);
  CHECK(std::abs(var - 1.0) < 0.03);
}

TEST_CASE("rng: shuffle is deterministic per seed and permutes") {
  std::vector<int> v1{0, 1, 2, 3, 4, 5, 6, 7, 8, 9}, v2 = v1;
  const std::vector<int> sorted = v1;
  RngStream a(5), b(5);
  a.shuffle(v1);
  b.shuffle(v2);
  CHECK(v1 == v2);
  std::sort(v1.begin(), v1.end());
  CHECK(v1 == sorted);
}

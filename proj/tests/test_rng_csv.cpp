#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <cstring>

#include "mmpn/csv.hpp"
#include "mmpn/errors.hpp"
#include "mmpn/rng.hpp"

using namespace mmpn;

TEST_CASE("rng streams are deterministic and independent") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  Rng root(42);
  Rng s1 = root.fork("split");
  Rng s2 = root.fork("shuffle");
  Rng s1_again = root.fork("split");
  CHECK(s1.next_u64() == s1_again.next_u64());
  // Different names give different streams.
  Rng s1b = root.fork("split");
  CHECK(s1b.next_u64() != s2.next_u64());
}

TEST_CASE("rng distributions are sane") {
  Rng rng(1);
  double sum = 0.0, sum2 = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    double v = rng.normal(2.0, 0.5);
    sum += v;
    sum2 += v * v;
  }
  double mean = sum / n;
  double sd = std::sqrt(sum2 / n - mean * mean);
  CHECK(mean == doctest::Approx(2.0).epsilon(0.02));
  CHECK(sd == doctest::Approx(0.5).epsilon(0.05));

  int heads = 0;
  for (int i = 0; i < n; ++i) heads += rng.bernoulli(0.25) ? 1 : 0;
  CHECK(double(heads) / n == doctest::Approx(0.25).epsilon(0.1));

  for (int i = 0; i < 1000; ++i) {
    auto v = rng.uniform_int(3, 7);
    CHECK(v >= 3);
    CHECK(v <= 7);
  }
}

TEST_CASE("csv round trip with quoting") {
  csv::Table t;
  t.header = {"a", "b"};
  t.rows.push_back({"plain", "with,comma"});
  t.rows.push_back({"quote\"inside", "line\nbreak"});
  std::string text = csv::to_string(t);
  csv::Table back = csv::parse(text);
  CHECK(back.header == t.header);
  REQUIRE(back.rows.size() == 2);
  CHECK(back.rows[0][1] == "with,comma");
  CHECK(back.rows[1][0] == "quote\"inside");
  CHECK(back.rows[1][1] == "line\nbreak");
}

TEST_CASE("csv diagnostics carry position") {
  CHECK_THROWS_WITH_AS(csv::parse("a,b\n1\n", "x.csv"),
                       doctest::Contains("x.csv:2"), ValidationError);
  CHECK_THROWS_AS(csv::to_double("1.2.3", "f"), ValidationError);
  CHECK_THROWS_AS(csv::to_double("", "f"), ValidationError);
  CHECK_THROWS_AS(csv::to_int("7x", "f"), ValidationError);
  CHECK(csv::to_optional_double("", "f") == std::nullopt);
  CHECK(*csv::to_optional_double("2.5", "f") == doctest::Approx(2.5));
}

TEST_CASE("format_double round-trips exactly") {
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    double v = rng.normal(0.0, 100.0);
    std::string s = csv::format_double(v);
    CHECK(std::strtod(s.c_str(), nullptr) == v);
  }
}

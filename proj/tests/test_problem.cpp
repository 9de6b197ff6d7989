#include "homot/problem.hpp"

#include "doctest.h"

using namespace homot;

namespace {

// brute search over 4-tuples, independent of build_delta's loop structure
DeltaSet enumerate_delta(const std::vector<long>& labels) {
  DeltaSet out;
  int n = static_cast<int>(labels.size());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int ti = 1; ti < n; ++ti)
        for (int tj = 1; tj < n; ++tj) {
          if (!(i < j) || i + ti >= n || j + tj >= n) continue;
          if (std::abs(labels[i + ti] - labels[i]) != std::abs(labels[j + tj] - labels[j]))
            continue;
          out.push_back({i, j, ti, tj, labels[i + ti] - labels[i]});
        }
  std::sort(out.begin(), out.end(), [](const DeltaTuple& a, const DeltaTuple& b) {
    return std::tie(a.i, a.j, a.tau_i, a.tau_j) < std::tie(b.i, b.j, b.tau_i, b.tau_j);
  });
  return out;
}

}  // namespace

TEST_CASE("delta on tiny grids") {
  CHECK(build_delta(TimeGrid({1, 2})).empty());

  auto d3 = build_delta(TimeGrid({1, 2, 3}));
  REQUIRE(d3.size() == 1);
  CHECK(d3[0] == DeltaTuple{0, 1, 1, 1, 1});

  CHECK(build_delta(TimeGrid({1, 2, 4})).empty());

  auto dodd = build_delta(TimeGrid({1, 3, 5}));
  REQUIRE(dodd.size() == 1);
  CHECK(dodd[0] == DeltaTuple{0, 1, 1, 1, 2});
}

TEST_CASE("delta matches exhaustive enumeration") {
  std::vector<std::vector<long>> grids = {
      {1, 2, 3, 4, 5, 6, 7, 8, 9}, {1, 2, 3, 5, 8, 13}, {2, 4, 5, 9}, {1, 10, 20, 30, 41}};
  for (const auto& labels : grids) {
    auto got = build_delta(TimeGrid(labels));
    auto want = enumerate_delta(labels);
    REQUIRE(got.size() == want.size());
    for (std::size_t k = 0; k < got.size(); ++k) CHECK(got[k] == want[k]);
  }
}

TEST_CASE("delta count on uniform grids") {
  for (int T = 2; T <= 12; ++T) {
    std::size_t expect = 0;
    for (int t = 2; t <= T - 1; ++t) expect += std::size_t(t - 1) * (T - t);
    CHECK(build_delta(TimeGrid::uniform_grid(T)).size() == expect);
  }
  // T = 9 per the closed form
  CHECK(build_delta(TimeGrid::uniform_grid(9)).size() == 84);
}

TEST_CASE("delta is scale invariant on uniform grids") {
  for (long d : {1L, 2L, 5L}) {
    std::vector<long> labels;
    for (int i = 0; i < 7; ++i) labels.push_back(3 + i * d);
    auto scaled = build_delta(TimeGrid(labels));
    auto base = build_delta(TimeGrid::uniform_grid(7));
    REQUIRE(scaled.size() == base.size());
    for (std::size_t k = 0; k < base.size(); ++k) {
      CHECK(scaled[k].i == base[k].i);
      CHECK(scaled[k].j == base[k].j);
      CHECK(scaled[k].tau_i == base[k].tau_i);
      CHECK(scaled[k].tau_j == base[k].tau_j);
    }
  }
}

TEST_CASE("uniform tuples have equal lags") {
  for (const auto& t : build_delta(TimeGrid::uniform_grid(9))) CHECK(t.tau_i == t.tau_j);
}

TEST_CASE("grid validation") {
  CHECK_THROWS_AS(TimeGrid({1}), input_error);
  CHECK_THROWS_AS(TimeGrid({1, 1}), input_error);
  CHECK_THROWS_AS(TimeGrid({2, 1}), input_error);
  CHECK(TimeGrid({1, 2, 3}).uniform());
  CHECK_FALSE(TimeGrid({1, 2, 4}).uniform());
}

TEST_CASE("spec validation") {
  ProblemSpec spec;
  spec.grid = TimeGrid::uniform_grid(2);
  spec.marginals = {DiscreteMeasure::from_atoms({{0.0, 1.0}}),
                    DiscreteMeasure::from_atoms({{-1.0, 0.5}, {1.0, 0.5}})};
  spec.payoff = parse_payoff("pos(S2-S1)");
  spec.mode = Mode::mot;
  CHECK(spec.validate().empty());

  std::swap(spec.marginals[0], spec.marginals[1]);
  auto warnings = spec.validate();
  REQUIRE(warnings.size() == 1);
  CHECK(warnings[0].find("convex order") != std::string::npos);

  spec.payoff = parse_payoff("S3");
  CHECK_THROWS_AS(spec.validate(), input_error);

  spec.payoff = parse_payoff("S1");
  spec.mode = Mode::rhmot;
  CHECK_THROWS_AS(spec.validate(), input_error);  // missing r
  spec.r = {0.5};
  CHECK(spec.validate().size() == 1);  // convex-order warning persists
  spec.r = {-0.5};
  CHECK_THROWS_AS(spec.validate(), input_error);
}

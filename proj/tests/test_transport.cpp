#include "homot/transport.hpp"

#include "doctest.h"
#include "support/brute.hpp"

#include <fstream>
#include <iomanip>
#include <random>

using namespace homot;

namespace {

ProblemSpec make_spec(std::vector<DiscreteMeasure> marginals, const std::string& payoff,
                      Mode mode) {
  ProblemSpec spec;
  spec.grid = TimeGrid::uniform_grid(static_cast<int>(marginals.size()));
  spec.marginals = std::move(marginals);
  spec.payoff = parse_payoff(payoff);
  spec.mode = mode;
  return spec;
}

ProblemSpec toy_t2(Mode mode = Mode::mot) {
  return make_spec({DiscreteMeasure::from_atoms({{-1.0, 0.5}, {1.0, 0.5}}),
                    DiscreteMeasure::from_atoms({{-2.0, 0.5}, {2.0, 0.5}})},
                   "pos(S2-S1)", mode);
}

oracle::BruteInstance to_brute(const ProblemSpec& spec) {
  oracle::BruteInstance inst;
  for (const auto& m : spec.marginals) {
    oracle::BruteMarginal bm;
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      bm.values.push_back(m.values()[i]);
      bm.weights.push_back(m.weights()[i]);
    }
    inst.marginals.push_back(bm);
  }
  PayoffExpr payoff = spec.payoff;
  inst.payoff = [payoff](const std::vector<double>& path) {
    return payoff.eval(path.data(), static_cast<int>(path.size()));
  };
  inst.martingale = spec.mode != Mode::ot;
  inst.homogeneity = spec.mode == Mode::hmot;
  return inst;
}

// convex-order chain of small random marginals on a shared grid
std::vector<DiscreteMeasure> random_chain(std::mt19937_64& rng, int T, int grid_pts) {
  std::uniform_real_distribution<double> wt(0.05, 1.0), spread(0.2, 0.9);
  std::vector<std::pair<double, double>> atoms;
  for (int i = 0; i < 3; ++i) atoms.emplace_back(-2.0 + 2.0 * i, wt(rng));
  std::vector<DiscreteMeasure> raw{DiscreteMeasure::normalized(std::move(atoms))};
  for (int t = 1; t < T; ++t) {
    const auto& prev = raw.back();
    std::vector<std::pair<double, double>> next;
    for (Eigen::Index i = 0; i < prev.size(); ++i) {
      double x = prev.values()[i], w = prev.weights()[i], h = spread(rng);
      next.emplace_back(x - h, w / 4);
      next.emplace_back(x, w / 2);
      next.emplace_back(x + h, w / 4);
    }
    raw.push_back(DiscreteMeasure::normalized(std::move(next)));
  }
  // one common grid spanning the whole chain keeps every projection valid and
  // preserves the pairwise convex order
  double lo = raw.back().values()[0] - 0.25;
  double hi = raw.back().values()[raw.back().size() - 1] + 0.25;
  auto grid = linspace(lo, hi, grid_pts);
  std::vector<DiscreteMeasure> out;
  for (const auto& m : raw) out.push_back(project_to_grid(m, grid));
  return out;
}

Coupling coupling_from_paths(const std::vector<std::vector<double>>& paths,
                             const std::vector<double>& weights) {
  std::string tmp = "tmp_coupling.csv";
  std::ofstream f(tmp);
  f << std::setprecision(17);
  for (std::size_t t = 0; t < paths[0].size(); ++t) f << "x" << (t + 1) << ",";
  f << "weight\n";
  for (std::size_t i = 0; i < paths.size(); ++i) {
    for (double v : paths[i]) f << v << ",";
    f << weights[i] << "\n";
  }
  f.close();
  Coupling q = Coupling::read_csv(tmp);
  std::remove(tmp.c_str());
  return q;
}

}  // namespace

TEST_CASE("toy T=2 martingale instance is exactly 3/4") {
  auto res = bounds(toy_t2());
  REQUIRE(res.inf);
  REQUIRE(res.sup);
  REQUIRE(res.inf->status == SolveStatus::optimal);
  REQUIRE(res.sup->status == SolveStatus::optimal);
  CHECK(std::abs(res.inf->value - 0.75) <= 1e-9);
  CHECK(std::abs(res.sup->value - 0.75) <= 1e-9);
  CHECK(res.duality_gap_inf <= 1e-7);
  CHECK(res.duality_gap_sup <= 1e-7);

  auto brute = oracle::brute_bounds(to_brute(toy_t2()));
  REQUIRE(brute.feasible);
  CHECK(res.inf->value == doctest::Approx(brute.inf).epsilon(1e-8));
  CHECK(res.sup->value == doctest::Approx(brute.sup).epsilon(1e-8));
}

TEST_CASE("T=2 hmot model equals the mot model") {
  auto mot = build_primal(toy_t2(Mode::mot));
  auto hmot = build_primal(toy_t2(Mode::hmot));
  CHECK(hmot.model.num_rows() == mot.model.num_rows());
  CHECK(hmot.model.num_vars() == mot.model.num_vars());
  CHECK(hmot.delta.empty());
  auto b1 = bounds(toy_t2(Mode::mot));
  auto b2 = bounds(toy_t2(Mode::hmot));
  CHECK(b1.sup->value == b2.sup->value);
  CHECK(b1.inf->value == b2.inf->value);
}

TEST_CASE("constant payoff prices at the constant in every mode") {
  for (Mode mode : {Mode::ot, Mode::mot, Mode::hmot}) {
    auto spec = make_spec({uniform_band(1, 100.0), uniform_band(2, 100.0)}, "2.5", mode);
    auto res = bounds(spec);
    REQUIRE(res.sup->status == SolveStatus::optimal);
    CHECK(res.sup->value == doctest::Approx(2.5).epsilon(1e-9));
    CHECK(res.inf->value == doctest::Approx(2.5).epsilon(1e-9));
  }
}

TEST_CASE("scale guard refuses oversized path spaces") {
  auto spec = toy_t2();
  spec.solver.max_vars = 3;
  CHECK_THROWS_AS(build_primal(spec, true), scale_error);
  CHECK_NOTHROW(build_primal(spec, false));
}

TEST_CASE("brute-force equivalence on random small instances") {
  std::mt19937_64 rng(1234);
  int tested = 0;
  for (int it = 0; it < 12; ++it) {
    int T = 2 + (it % 2);
    auto marginals = random_chain(rng, T, 4);  // <= 4^3 = 64 paths
    long P = 1;
    for (const auto& m : marginals) P *= m.size();
    if (P > 64) continue;
    for (Mode mode : {Mode::mot, Mode::hmot}) {
      auto spec = make_spec(marginals, "pos(S" + std::to_string(T) + " - S1)", mode);
      auto brute = oracle::brute_bounds(to_brute(spec));
      auto res = bounds(spec);
      if (!brute.feasible) {
        CHECK((res.inf->status == SolveStatus::infeasible ||
               res.sup->status == SolveStatus::infeasible));
        continue;
      }
      REQUIRE(res.inf->status == SolveStatus::optimal);
      REQUIRE(res.sup->status == SolveStatus::optimal);
      CHECK(std::abs(res.inf->value - brute.inf) <= 1e-8 * (1 + std::abs(brute.inf)));
      CHECK(std::abs(res.sup->value - brute.sup) <= 1e-8 * (1 + std::abs(brute.sup)));
      ++tested;
    }
  }
  CHECK(tested >= 10);
}

TEST_CASE("ordering chain across modes") {
  std::mt19937_64 rng(77);
  auto marginals = random_chain(rng, 3, 6);
  std::string payoff = "pos(S3 - S2) + 0.25*abs(S2 - S1)";
  double ot_sup, mot_sup, hmot_sup, ot_inf, mot_inf, hmot_inf;
  {
    auto r = bounds(make_spec(marginals, payoff, Mode::ot));
    REQUIRE(r.sup->status == SolveStatus::optimal);
    ot_sup = r.sup->value;
    ot_inf = r.inf->value;
  }
  {
    auto r = bounds(make_spec(marginals, payoff, Mode::mot));
    REQUIRE(r.sup->status == SolveStatus::optimal);
    mot_sup = r.sup->value;
    mot_inf = r.inf->value;
  }
  auto hspec = make_spec(marginals, payoff, Mode::hmot);
  auto hres = bounds(hspec);
  if (hres.sup->status != SolveStatus::optimal) return;  // hmot may be infeasible
  hmot_sup = hres.sup->value;
  hmot_inf = hres.inf->value;

  CHECK(ot_sup >= mot_sup - 1e-8);
  CHECK(mot_sup >= hmot_sup - 1e-8);
  CHECK(ot_inf <= mot_inf + 1e-8);
  CHECK(mot_inf <= hmot_inf + 1e-8);

  // r-homogeneity interpolates between hmot (r = 0) and mot (r large)
  auto rspec = make_spec(marginals, payoff, Mode::rhmot);
  rspec.r = {0.0};
  auto r0 = bounds(rspec, false, true);
  REQUIRE(r0.sup->status == SolveStatus::optimal);
  CHECK(r0.sup->value == doctest::Approx(hmot_sup).epsilon(1e-7));

  rspec.r = {1000.0};
  auto rbig = bounds(rspec, false, true);
  CHECK(rbig.sup->value == doctest::Approx(mot_sup).epsilon(1e-7));

  double prev = hmot_sup;
  for (double rv : {0.01, 0.05, 0.2, 1.0}) {
    rspec.r = {rv};
    auto rr = bounds(rspec, false, true);
    REQUIRE(rr.sup->status == SolveStatus::optimal);
    CHECK(rr.sup->value >= prev - 1e-8);
    CHECK(rr.sup->value <= mot_sup + 1e-8);
    prev = rr.sup->value;
  }

  // W1 metric behaves the same at the endpoints
  rspec.metric = RMetric::w1;
  rspec.r = {0.0};
  auto w0 = bounds(rspec, false, true);
  CHECK(w0.sup->value == doctest::Approx(hmot_sup).epsilon(1e-7));
  rspec.r = {1000.0};
  auto wbig = bounds(rspec, false, true);
  CHECK(wbig.sup->value == doctest::Approx(mot_sup).epsilon(1e-7));
}

TEST_CASE("hmot optimizers pass the homogeneity check") {
  std::mt19937_64 rng(99);
  for (int it = 0; it < 5; ++it) {
    auto marginals = random_chain(rng, 3, 6);
    auto spec = make_spec(marginals, "pos(S3 - S2)", Mode::hmot);
    auto res = bounds(spec, false, true);
    if (!res.sup || res.sup->status != SolveStatus::optimal) continue;
    auto rep = check_homogeneous(res.sup_coupling, res.build.delta, 1e-7);
    CHECK(rep.pass);
  }
}

TEST_CASE("remark (ii) mixture fails the homogeneity check at state 0") {
  Coupling q = coupling_from_paths(
      {{0, 1, 0}, {1, 0, 1}, {0, 0, 0}, {1, 1, 1}}, {0.375, 0.125, 0.375, 0.125});
  auto delta = build_delta(TimeGrid::uniform_grid(3));
  auto rep = check_homogeneous(q, delta, 1e-7);
  CHECK_FALSE(rep.pass);
  bool found_state0 = false;
  for (const auto& v : rep.violations) {
    if (v.state == 0.0) {
      found_state0 = true;
      REQUIRE(v.row_s.size() == 2);
      CHECK(v.row_s[0] == doctest::Approx(0.5));
      CHECK(v.row_s[1] == doctest::Approx(0.5));
      CHECK(v.row_t[0] == doctest::Approx(0.75));
      CHECK(v.row_t[1] == doctest::Approx(0.25));
      CHECK(v.tv == doctest::Approx(0.5));
    }
  }
  CHECK(found_state0);
}

TEST_CASE("remark (iii) mixture is homogeneous") {
  Coupling q = coupling_from_paths(
      {{0, 0, 1}, {1, 1, 0}, {0, 1, 1}, {1, 0, 0}}, {0.25, 0.25, 0.25, 0.25});
  auto rep = check_homogeneous(q, build_delta(TimeGrid::uniform_grid(3)), 1e-7);
  CHECK(rep.pass);
}

TEST_CASE("product measures are homogeneous") {
  auto mu = DiscreteMeasure::from_atoms({{0.0, 0.3}, {1.0, 0.3}, {2.0, 0.4}});
  std::vector<std::vector<double>> paths;
  std::vector<double> weights;
  for (Eigen::Index a = 0; a < 3; ++a)
    for (Eigen::Index b = 0; b < 3; ++b)
      for (Eigen::Index c = 0; c < 3; ++c) {
        paths.push_back({mu.values()[a], mu.values()[b], mu.values()[c]});
        weights.push_back(mu.weights()[a] * mu.weights()[b] * mu.weights()[c]);
      }
  Coupling q = coupling_from_paths(paths, weights);
  auto rep = check_homogeneous(q, build_delta(TimeGrid::uniform_grid(3)), 1e-9);
  CHECK(rep.pass);
}

TEST_CASE("pricing rule") {
  // stay chain: 0.75 delta_(0,0,0) + 0.25 delta_(1,1,1)
  Coupling stay = coupling_from_paths({{0, 0, 0}, {1, 1, 1}}, {0.75, 0.25});
  for (double k : {-1.0, -0.25, 0.5}) {
    CHECK(pricing_rule(stay, 0, 1, k, 0.0) == doctest::Approx(std::max(-k, 0.0)));
    CHECK(pricing_rule(stay, 0, 1, k, 1.0) == doctest::Approx(std::max(1.0 - k, 0.0)));
  }
  CHECK_THROWS_AS(pricing_rule(stay, 0, 1, 0.0, 0.5), input_error);

  // martingale coupling: strike below all atoms prices at x - k
  auto res = bounds(toy_t2(), false, true);
  REQUIRE(res.sup->status == SolveStatus::optimal);
  double k = -5.0;
  for (double x : {-1.0, 1.0})
    CHECK(pricing_rule(res.sup_coupling, 0, 1, k, x) == doctest::Approx(x - k).epsilon(1e-8));

  // homogeneous optimizer: pricing rules agree on common support
  std::mt19937_64 rng(5);
  auto marginals = random_chain(rng, 3, 6);
  auto spec = make_spec(marginals, "pos(S3 - S2)", Mode::hmot);
  auto hres = bounds(spec, false, true);
  if (hres.sup && hres.sup->status == SolveStatus::optimal) {
    const auto& q = hres.sup_coupling;
    auto q1 = q.marginal(0);
    auto q2 = q.marginal(1);
    auto th = meet(q1, q2);
    for (Eigen::Index i = 0; i < th.size(); ++i) {
      double x = th.values()[i];
      for (double strike : {-1.0, 0.0, 0.7}) {
        CHECK(pricing_rule(q, 0, 1, strike, x) ==
              doctest::Approx(pricing_rule(q, 1, 1, strike, x)).epsilon(1e-6));
      }
    }
  }
}

TEST_CASE("pair marginals") {
  auto mu = DiscreteMeasure::from_atoms({{0.0, 0.5}, {1.0, 0.5}});
  // independent product
  std::vector<std::vector<double>> paths;
  std::vector<double> weights;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int c = 0; c < 2; ++c) {
        paths.push_back({double(a), double(b), double(c)});
        weights.push_back(0.125);
      }
  Coupling q = coupling_from_paths(paths, weights);
  auto M = q.pair_marginal(0, 2);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) CHECK(M(i, j) == doctest::Approx(0.25));

  // comonotone two-period coupling of identical uniforms is diagonal
  Coupling diag = coupling_from_paths({{0, 0}, {1, 1}, {2, 2}},
                                      {1.0 / 3, 1.0 / 3, 1.0 / 3});
  auto D = diag.pair_marginal(0, 1);
  CHECK(D(0, 0) == doctest::Approx(1.0 / 3));
  CHECK(D(0, 1) == doctest::Approx(0.0));
  CHECK(D(1, 1) == doctest::Approx(1.0 / 3));

  // random coupling: projections match the marginals
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(0.05, 1.0);
  std::vector<double> w(8);
  double total = 0.0;
  for (auto& v : w) {
    v = u(rng);
    total += v;
  }
  for (auto& v : w) v /= total;
  Coupling rnd = coupling_from_paths(paths, w);
  auto P01 = rnd.pair_marginal(0, 1);
  auto m0 = rnd.marginal(0);
  auto m1 = rnd.marginal(1);
  for (int i = 0; i < 2; ++i) CHECK(P01.row(i).sum() == doctest::Approx(m0.weights()[i]));
  for (int j = 0; j < 2; ++j) CHECK(P01.col(j).sum() == doctest::Approx(m1.weights()[j]));
}

TEST_CASE("feasibility of the homogeneity constraint set") {
  auto mu = DiscreteMeasure::from_atoms({{0.0, 0.5}, {2.0, 0.5}});
  auto same = feasibility_hom({mu, mu, mu}, true);
  CHECK(same.status == FeasibilityStatus::feasible);
  CHECK(same.method == "kernel-lp");

  auto d0 = DiscreteMeasure::from_atoms({{0.0, 1.0}});
  auto d1 = DiscreteMeasure::from_atoms({{1.0, 1.0}});
  auto bad = feasibility_hom({d0, d0, d1}, false);
  CHECK(bad.status == FeasibilityStatus::infeasible);
  CHECK(bad.certified);

  // discrete-example marginals t = 1..9
  std::vector<DiscreteMeasure> bands;
  for (int t = 1; t <= 9; ++t) bands.push_back(uniform_band(t, 100.0));
  auto pi = feasibility_hom(bands, false);
  CHECK(pi.status == FeasibilityStatus::feasible);
  auto mg = feasibility_hom(bands, true);
  CHECK(mg.status == FeasibilityStatus::feasible);
  CHECK(mg.method == "kernel-lp");
}

TEST_CASE("mixtures of hmot-feasible couplings stay homogeneous") {
  std::mt19937_64 rng(2024);
  auto marginals = random_chain(rng, 3, 5);
  auto spec_lo = make_spec(marginals, "pos(S3 - S2)", Mode::hmot);
  auto spec_hi = make_spec(marginals, "S3*S3 - S1", Mode::hmot);
  auto a = bounds(spec_lo, false, true);
  auto b = bounds(spec_hi, false, true);
  if (!a.sup || a.sup->status != SolveStatus::optimal) return;
  if (!b.sup || b.sup->status != SolveStatus::optimal) return;
  Eigen::VectorXd mix = 0.5 * a.sup_coupling.weights() + 0.5 * b.sup_coupling.weights();
  Coupling q(a.build.grid, mix);
  CHECK(check_homogeneous(q, a.build.delta, 1e-7).pass);
}

TEST_CASE("coupling csv round trip") {
  auto res = bounds(toy_t2(), false, true);
  REQUIRE(res.sup->status == SolveStatus::optimal);
  res.sup_coupling.write_csv("toy_coupling.csv");
  Coupling back = Coupling::read_csv("toy_coupling.csv");
  CHECK(back.times() == 2);
  CHECK(std::abs(back.expectation(parse_payoff("pos(S2-S1)")) - res.sup->value) <= 1e-9);
  std::remove("toy_coupling.csv");
}

TEST_CASE("infeasible martingale problem is diagnosed") {
  // means differ: no martingale coupling
  auto spec = make_spec({DiscreteMeasure::from_atoms({{0.0, 1.0}}),
                         DiscreteMeasure::from_atoms({{1.0, 1.0}})},
                        "S2", Mode::mot);
  auto res = bounds(spec, false, true);
  REQUIRE(res.sup->status == SolveStatus::infeasible);
  CHECK_FALSE(res.sup->infeasible_family.empty());
}

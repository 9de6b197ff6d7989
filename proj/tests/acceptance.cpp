// Acceptance suite: one numbered criterion per run ("all" runs every one).
// Prints exactly one "PASS criterion k" or "FAIL criterion k" line per
// criterion.
#include "homot/hedging.hpp"
#include "homot/lp_io.hpp"
#include "homot/penalized.hpp"
#include "homot/transport.hpp"

#include "support/brute.hpp"
#include "support/dense_simplex.hpp"

#include <array>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

using namespace homot;

namespace {

struct Check {
  bool ok = true;
  std::ostringstream log;

  void expect(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      log << "    FAILED: " << what << "\n";
    }
  }
  void note(const std::string& what) { log << "    " << what << "\n"; }
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

ProblemSpec make_spec(std::vector<DiscreteMeasure> marginals, const std::string& payoff,
                      Mode mode) {
  ProblemSpec spec;
  spec.grid = TimeGrid::uniform_grid(static_cast<int>(marginals.size()));
  spec.marginals = std::move(marginals);
  spec.payoff = parse_payoff(payoff);
  spec.mode = mode;
  spec.solver.max_vars = 300000;
  return spec;
}

// Black-Scholes marginals: quantile-mean quantization projected onto the
// common grid. The quantization count is capped by the grid span: the top
// quantile-band mean must stay below 3.0 (n = 120 fits X_3, n = 40 fits X_4).
std::vector<DiscreteMeasure> bs_marginals(int points, std::vector<double> times, int nq,
                                          double sigma = 0.25) {
  auto grid = linspace(0.2, 3.0, points);
  std::vector<DiscreteMeasure> out;
  for (double t : times)
    out.push_back(project_to_grid(quantize_lognormal(1.0, sigma, t, nq), grid));
  return out;
}

// HMOT-feasible desk-scale variant: mu1 quantized, later marginals rolled
// forward with a grid-level martingale kernel, so the homogeneous Markov
// chain itself witnesses M_hom != empty.
std::vector<DiscreteMeasure> bs_chain_marginals(int points, int nq, double sigma = 0.25) {
  auto grid = linspace(0.2, 3.0, points);
  const int P = points;
  const double dx = grid[1] - grid[0];
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(P, P);
  for (int i = 0; i < P; ++i) {
    int k = std::max(1, static_cast<int>(std::lround(sigma * grid[i] / dx)));
    k = std::min({k, i, P - 1 - i});
    if (k == 0) K(i, i) = 1.0;
    else {
      K(i, i - k) = 0.5;
      K(i, i + k) = 0.5;
    }
  }
  std::vector<DiscreteMeasure> out{
      project_to_grid(quantize_lognormal(1.0, sigma, 1.0, nq), grid)};
  for (int step = 0; step < 2; ++step) {
    const auto& prev = out.back();
    std::vector<std::pair<double, double>> atoms;
    for (int j = 0; j < P; ++j) {
      double w = 0.0;
      for (Eigen::Index i = 0; i < prev.size(); ++i) {
        int gi = static_cast<int>(std::lround((prev.values()[i] - grid[0]) / dx));
        w += prev.weights()[i] * K(gi, j);
      }
      if (w > 0.0) atoms.emplace_back(grid[j], w);
    }
    out.push_back(DiscreteMeasure::normalized(std::move(atoms)));
  }
  return out;
}

struct Interval {
  double lo = 0.0, hi = 0.0;
  double width() const { return hi - lo; }
};

Interval solve_interval(const ProblemSpec& spec, Check& c, const std::string& label) {
  auto res = bounds(spec, true, true);
  c.expect(res.inf && res.inf->status == SolveStatus::optimal, label + " inf optimal");
  c.expect(res.sup && res.sup->status == SolveStatus::optimal, label + " sup optimal");
  Interval iv;
  if (res.inf && res.inf->status == SolveStatus::optimal) iv.lo = res.inf->value;
  if (res.sup && res.sup->status == SolveStatus::optimal) iv.hi = res.sup->value;
  c.note(label + ": [" + fmt(iv.lo) + ", " + fmt(iv.hi) + "]");
  return iv;
}

// ---------------------------------------------------------------------------
bool criterion1() {
  Check c;
  const double bs_price = 0.111;
  std::vector<Interval> mot, hmot;
  for (int points : {30, 45, 60}) {
    auto marginals = bs_marginals(points, {1.0, 2.0, 3.0}, 120);
    auto mspec = make_spec(marginals, "pos(S3 - (S1+S2)/2)", Mode::mot);
    mot.push_back(solve_interval(mspec, c, "grid " + std::to_string(points) + " mot"));
    auto hspec = make_spec(marginals, "pos(S3 - (S1+S2)/2)", Mode::hmot);
    hmot.push_back(solve_interval(hspec, c, "grid " + std::to_string(points) + " hmot"));
  }
  c.expect(std::abs(mot.back().lo - 0.059) <= 0.015, "mot inf within 0.015 of 0.059");
  c.expect(std::abs(mot.back().hi - 0.139) <= 0.015, "mot sup within 0.015 of 0.139");
  c.expect(std::abs(hmot.back().lo - 0.064) <= 0.02, "hmot inf within 0.02 of 0.064");
  c.expect(std::abs(hmot.back().hi - 0.135) <= 0.02, "hmot sup within 0.02 of 0.135");
  for (std::size_t i = 0; i + 1 < mot.size(); ++i) {
    c.expect(mot[i + 1].lo >= mot[i].lo - 1e-9, "mot inf tightens with the grid");
    c.expect(mot[i + 1].hi <= mot[i].hi + 1e-9, "mot sup tightens with the grid");
    c.expect(hmot[i + 1].lo >= hmot[i].lo - 1e-9, "hmot inf tightens with the grid");
    c.expect(hmot[i + 1].hi <= hmot[i].hi + 1e-9, "hmot sup tightens with the grid");
  }
  for (const auto& iv : mot)
    c.expect(iv.lo <= bs_price && bs_price <= iv.hi, "0.111 inside the mot interval");
  for (const auto& iv : hmot)
    c.expect(iv.lo <= bs_price && bs_price <= iv.hi, "0.111 inside the hmot interval");
  std::cout << c.log.str();
  return c.ok;
}

bool criterion2() {
  Check c;
  auto marginals = bs_marginals(60, {1.0, 2.0, 4.0}, 40);
  auto mspec = make_spec(marginals, "pos(S3 - (S1+S2)/2)", Mode::mot);
  Interval mot = solve_interval(mspec, c, "mu3~X4 mot");
  auto hspec = make_spec(marginals, "pos(S3 - (S1+S2)/2)", Mode::hmot);
  Interval hmot = solve_interval(hspec, c, "mu3~X4 hmot");
  c.expect(std::abs(mot.lo - 0.088) <= 0.02, "mot inf within 0.02 of 0.088");
  c.expect(std::abs(mot.hi - 0.184) <= 0.02, "mot sup within 0.02 of 0.184");
  c.expect(std::abs(hmot.lo - 0.121) <= 0.02, "hmot inf within 0.02 of 0.121");
  c.expect(std::abs(hmot.hi - 0.138) <= 0.02, "hmot sup within 0.02 of 0.138");
  c.expect(hmot.width() < 0.4 * mot.width(),
           "hmot interval width < 40% of mot width (got " +
               fmt(hmot.width() / mot.width() * 100.0) + "%)");
  std::cout << c.log.str();
  return c.ok;
}

bool criterion3() {
  Check c;
  struct Row {
    int k;
    Interval mot, hmot;
  };
  std::vector<Row> rows;
  for (int k = 2; k <= 6; ++k) {
    std::vector<DiscreteMeasure> marginals;
    for (int t = 10 - k; t <= 9; ++t) marginals.push_back(uniform_band(t, 100.0));
    std::string payoff =
        "pos(S" + std::to_string(k) + " - S" + std::to_string(k - 1) + ")";
    Row row;
    row.k = k;
    row.mot = solve_interval(make_spec(marginals, payoff, Mode::mot), c,
                             "k=" + std::to_string(k) + " mot");
    row.hmot = solve_interval(make_spec(marginals, payoff, Mode::hmot), c,
                              "k=" + std::to_string(k) + " hmot");
    rows.push_back(row);
  }
  for (const auto& row : rows) {
    c.expect(std::abs(row.mot.lo - rows[0].mot.lo) <= 1e-7, "mot inf constant across k");
    c.expect(std::abs(row.mot.hi - rows[0].mot.hi) <= 1e-7, "mot sup constant across k");
  }
  c.expect(rows[0].hmot.lo == rows[0].mot.lo && rows[0].hmot.hi == rows[0].mot.hi,
           "k=2 hmot equals mot exactly");
  for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
    c.expect(rows[i + 1].hmot.hi <= rows[i].hmot.hi + 1e-9, "hmot sup nonincreasing");
    c.expect(rows[i + 1].hmot.lo >= rows[i].hmot.lo - 1e-9, "hmot inf nondecreasing");
  }
  c.expect(rows[2].hmot.hi < rows[2].mot.hi - 1e-6, "strict sup improvement at k=4");
  c.expect(rows[2].hmot.lo > rows[2].mot.lo + 1e-6, "strict inf improvement at k=4");

  // regression fixtures: first verified LP outputs (see the values note in
  // tests/fixtures/sweep_fixture.h semantics below)
#include "fixtures/sweep_fixture.inc"
  for (std::size_t i = 0; i < rows.size() && i < kSweepFixture.size(); ++i) {
    c.expect(std::abs(rows[i].hmot.lo - kSweepFixture[i][0]) <= 1e-6,
             "hmot inf regression at k=" + std::to_string(rows[i].k));
    c.expect(std::abs(rows[i].hmot.hi - kSweepFixture[i][1]) <= 1e-6,
             "hmot sup regression at k=" + std::to_string(rows[i].k));
  }
  std::cout << c.log.str();
  return c.ok;
}

std::vector<DiscreteMeasure> random_chain(std::mt19937_64& rng, int T, int grid_pts,
                                          int max_atoms) {
  std::uniform_real_distribution<double> wt(0.05, 1.0), spread(0.2, 0.9);
  std::uniform_int_distribution<int> natoms(1, max_atoms);
  std::vector<std::pair<double, double>> atoms;
  int n = natoms(rng);
  std::uniform_real_distribution<double> pos(-2.0, 2.0);
  for (int i = 0; i < n; ++i) atoms.emplace_back(pos(rng), wt(rng));
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

bool criterion4() {
  Check c;
  std::mt19937_64 rng(2024014);
  int solved = 0, hmot_solved = 0;
  for (int inst = 0; inst < 50; ++inst) {
    int T = 2 + (inst % 3);
    auto marginals = random_chain(rng, T, 7, 4);
    std::string payoff = "pos(S" + std::to_string(T) + " - S1) + 0.1*abs(S1)";
    for (Mode mode : {Mode::mot, Mode::hmot}) {
      auto spec = make_spec(marginals, payoff, mode);
      auto res = bounds(spec, false, true);
      if (mode == Mode::hmot && res.sup->status != SolveStatus::optimal) continue;
      c.expect(res.sup->status == SolveStatus::optimal,
               "instance " + std::to_string(inst) + " solves");
      if (res.sup->status != SolveStatus::optimal) continue;
      const auto& sol = res.sup->solution;
      double gap = std::abs(sol.objective - sol.dual_objective) /
                   (1.0 + std::abs(sol.objective));
      c.expect(gap <= 1e-7, "duality gap <= 1e-7");
      c.expect(sol.comp_slack_residual <= 1e-7, "complementary slackness <= 1e-7");
      auto p = extract_portfolio(res.build, sol, spec);
      auto verify = verify_superhedge(p, spec, 1e-7);
      c.expect(verify.min_slack >= -1e-7, "superhedge min slack >= -1e-7");
      mode == Mode::mot ? ++solved : ++hmot_solved;
    }
  }
  c.note("mot certificates: " + std::to_string(solved) +
         ", hmot certificates: " + std::to_string(hmot_solved));
  c.expect(solved == 50, "all 50 randomized instances certified");
  c.expect(hmot_solved >= 10, "a healthy share of hmot-feasible instances");
  std::cout << c.log.str();
  return c.ok;
}

bool criterion5() {
  Check c;
  // toy instance: exactly 0.75 in both senses
  auto toy = make_spec({DiscreteMeasure::from_atoms({{-1.0, 0.5}, {1.0, 0.5}}),
                        DiscreteMeasure::from_atoms({{-2.0, 0.5}, {2.0, 0.5}})},
                       "pos(S2-S1)", Mode::mot);
  auto res = bounds(toy, true, true);
  c.expect(std::abs(res.inf->value - 0.75) <= 1e-12, "toy inf = 0.75");
  c.expect(std::abs(res.sup->value - 0.75) <= 1e-12, "toy sup = 0.75");

  std::mt19937_64 rng(55);
  int compared = 0;
  for (int inst = 0; inst < 30 && compared < 20; ++inst) {
    int T = 2 + (inst % 2);
    auto marginals = random_chain(rng, T, 5, 3);
    long P = 1;
    for (const auto& m : marginals) P *= m.size();
    if (P > 64) continue;
    for (Mode mode : {Mode::mot, Mode::hmot}) {
      auto spec = make_spec(marginals, "pos(S" + std::to_string(T) + " - S1)", mode);
      oracle::BruteInstance inst2;
      for (const auto& m : spec.marginals) {
        oracle::BruteMarginal bm;
        for (Eigen::Index i = 0; i < m.size(); ++i) {
          bm.values.push_back(m.values()[i]);
          bm.weights.push_back(m.weights()[i]);
        }
        inst2.marginals.push_back(bm);
      }
      PayoffExpr payoff = spec.payoff;
      inst2.payoff = [payoff](const std::vector<double>& path) {
        return payoff.eval(path.data(), static_cast<int>(path.size()));
      };
      inst2.martingale = true;
      inst2.homogeneity = mode == Mode::hmot;
      auto brute = oracle::brute_bounds(inst2);
      auto got = bounds(spec, true, true);
      if (!brute.feasible) {
        c.expect(got.sup->status != SolveStatus::optimal, "infeasible agreement");
        continue;
      }
      c.expect(got.sup->status == SolveStatus::optimal, "solves where the oracle solves");
      if (got.sup->status != SolveStatus::optimal) continue;
      c.expect(std::abs(got.inf->value - brute.inf) <= 1e-8 * (1 + std::abs(brute.inf)),
               "inf matches the dense oracle to 1e-8");
      c.expect(std::abs(got.sup->value - brute.sup) <= 1e-8 * (1 + std::abs(brute.sup)),
               "sup matches the dense oracle to 1e-8");
      ++compared;
    }
  }
  c.note("oracle comparisons: " + std::to_string(compared));
  c.expect(compared >= 16, "enough oracle comparisons ran");
  std::cout << c.log.str();
  return c.ok;
}

bool criterion6() {
  Check c;
  auto mixture = [&](std::vector<std::vector<double>> paths, std::vector<double> w) {
    std::string tmp = "acc_fixture.csv";
    std::ofstream f(tmp);
    f << "x1,x2,x3,weight\n";
    for (std::size_t i = 0; i < paths.size(); ++i)
      f << paths[i][0] << ',' << paths[i][1] << ',' << paths[i][2] << ',' << w[i] << '\n';
    f.close();
    Coupling q = Coupling::read_csv(tmp);
    std::remove(tmp.c_str());
    return q;
  };
  auto delta = build_delta(TimeGrid::uniform_grid(3));

  Coupling bad = mixture({{0, 1, 0}, {1, 0, 1}, {0, 0, 0}, {1, 1, 1}},
                         {0.375, 0.125, 0.375, 0.125});
  auto rep = check_homogeneous(bad, delta, 1e-7);
  c.expect(!rep.pass, "remark (ii) mixture fails");
  bool kernel_match = false;
  for (const auto& v : rep.violations) {
    if (v.state == 0.0 && v.row_s.size() == 2) {
      kernel_match = std::abs(v.row_s[0] - 0.5) < 1e-12 &&
                     std::abs(v.row_s[1] - 0.5) < 1e-12 &&
                     std::abs(v.row_t[0] - 0.75) < 1e-12 &&
                     std::abs(v.row_t[1] - 0.25) < 1e-12;
    }
  }
  c.expect(kernel_match, "state-0 kernel rows are (0.5,0.5) vs (0.75,0.25)");

  Coupling good = mixture({{0, 0, 1}, {1, 1, 0}, {0, 1, 1}, {1, 0, 0}},
                          {0.25, 0.25, 0.25, 0.25});
  c.expect(check_homogeneous(good, delta, 1e-7).pass, "remark (iii) mixture passes");

  auto d0 = DiscreteMeasure::from_atoms({{0.0, 1.0}});
  auto d1 = DiscreteMeasure::from_atoms({{1.0, 1.0}});
  auto feas = feasibility_hom({d0, d0, d1}, false);
  c.expect(feas.status == FeasibilityStatus::infeasible && feas.certified,
           "delta fixtures are Pi_hom-infeasible");
  std::cout << c.log.str();
  return c.ok;
}

bool criterion7() {
  Check c;
  // r-homogeneity endpoints need an instance where the exact equality system
  // is nonempty: the desk-scale chain variant provides one
  auto chain = bs_chain_marginals(20, 40);
  auto mot_c = bounds(make_spec(chain, "pos(S3 - (S1+S2)/2)", Mode::mot), false, true);
  auto hmot_c = bounds(make_spec(chain, "pos(S3 - (S1+S2)/2)", Mode::hmot), false, true);
  c.expect(mot_c.sup->status == SolveStatus::optimal, "chain-desk mot solves");
  c.expect(hmot_c.sup->status == SolveStatus::optimal, "chain-desk hmot solves");
  c.note("chain desk: mot sup " + fmt(mot_c.sup->value) + ", hmot sup " +
         fmt(hmot_c.sup->value));

  auto rspec = make_spec(chain, "pos(S3 - (S1+S2)/2)", Mode::rhmot);
  rspec.r = {0.0};
  auto r0 = bounds(rspec, false, true);
  c.expect(std::abs(r0.sup->value - hmot_c.sup->value) <= 1e-7, "r-hmot(0) = hmot to 1e-7");
  rspec.r = {1000.0};
  auto rbig = bounds(rspec, false, true);
  c.expect(std::abs(rbig.sup->value - mot_c.sup->value) <= 1e-7,
           "r-hmot(large) = mot to 1e-7");
  double prev = r0.sup->value;
  for (double rv : {0.001, 0.01, 0.1, 1.0}) {
    rspec.r = {rv};
    auto rr = bounds(rspec, false, true);
    c.expect(rr.sup->value >= prev - 1e-8, "r-hmot monotone in r");
    prev = rr.sup->value;
  }

  // penalized large-r limit on the criterion-1 pipeline desk instance (its
  // exact homogeneity system is empty, which does not affect the mot limit).
  // nq = 120 keeps the supports nested so the Gini penalty is nondegenerate.
  {
    auto pipeline = bs_marginals(20, {1.0, 2.0, 3.0}, 120);
    auto mot_p = bounds(make_spec(pipeline, "pos(S3 - (S1+S2)/2)", Mode::mot), false, true);
    auto pen_spec = make_spec(pipeline, "pos(S3 - (S1+S2)/2)", Mode::pen_hmot);
    PenaltyConfig cfg;
    cfg.r = {1e6};
    pen_spec.r = cfg.r;
    auto pen_big = solve_pen_hmot(pen_spec, cfg);
    c.note("pipeline desk: pen(1e6) = " + fmt(pen_big.value) + " vs mot " +
           fmt(mot_p.sup->value));
    c.expect(std::abs(pen_big.value - mot_p.sup->value) <= 1e-3,
             "pen-hmot(1e6) within 1e-3 of mot (pipeline desk instance)");
  }

  // penalized limits and r-monotonicity on the feasible chain instance; the
  // small-r comparison presumes a nonempty homogeneity system (the pen op is
  // specified "with HMOT feasible")
  auto pen_spec = make_spec(chain, "pos(S3 - (S1+S2)/2)", Mode::pen_hmot);
  PenaltyConfig cfg;
  cfg.r = {1e6};
  pen_spec.r = cfg.r;
  auto pen_big = solve_pen_hmot(pen_spec, cfg);
  c.note("chain desk: pen(1e6) = " + fmt(pen_big.value) + " vs mot " +
         fmt(mot_c.sup->value));
  c.expect(std::abs(pen_big.value - mot_c.sup->value) <= 1e-3,
           "pen-hmot(1e6) within 1e-3 of mot");
  cfg.r = {1e-6};
  pen_spec.r = cfg.r;
  auto pen_small = solve_pen_hmot(pen_spec, cfg);
  c.note("chain desk: pen(1e-6) = " + fmt(pen_small.value) + " vs hmot " +
         fmt(hmot_c.sup->value));
  c.expect(std::abs(pen_small.value - hmot_c.sup->value) <= 1e-3,
           "pen-hmot(1e-6) within 1e-3 of hmot");
  double last = pen_small.value;
  for (double rv : {1e-3, 1e-1, 10.0, 1e3}) {
    cfg.r = {rv};
    pen_spec.r = cfg.r;
    auto res = solve_pen_hmot(pen_spec, cfg);
    c.expect(res.value >= last - 1e-4, "pen-hmot monotone in r");
    last = res.value;
  }

  // gradient check on 20 random interior points of a small instance
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(0.2, 1.0);
  auto small_grid = linspace(-2.0, 2.0, 4);
  int checked = 0;
  for (int inst = 0; inst < 4; ++inst) {
    long P = 64;
    Eigen::VectorXd w(P);
    for (long p = 0; p < P; ++p) w[p] = u(rng);
    w /= w.sum();
    PathGrid pg;
    pg.values.assign(3, Eigen::Map<Eigen::ArrayXd>(small_grid.data(), 4));
    pg.strides = {16, 4, 1};
    pg.num_paths = 64;
    Coupling q(pg, w);
    std::vector<DiscreteMeasure> marginals;
    for (int t = 0; t < 3; ++t) marginals.push_back(q.marginal(t));
    auto gspec = make_spec(marginals, "pos(S3 - S1)", Mode::pen_hmot);
    PenaltyConfig gcfg;
    gcfg.r = {0.5};
    Eigen::VectorXd g = pen_gradient(q, gspec, gcfg);
    std::uniform_int_distribution<long> pick(0, P - 1);
    for (int k = 0; k < 5; ++k) {
      long p = pick(rng);
      const double h = 5e-8;
      Eigen::VectorXd wp = w, wm = w;
      wp[p] += h;
      wm[p] -= h;
      double fd = (pen_objective(Coupling(pg, wp), gspec, gcfg) -
                   pen_objective(Coupling(pg, wm), gspec, gcfg)) /
                  (2.0 * h);
      c.expect(std::abs(fd - g[p]) <= 1e-5 * (1.0 + std::abs(g[p])),
               "fw gradient matches finite differences");
      ++checked;
    }
  }
  c.note("gradient points checked: " + std::to_string(checked));
  std::cout << c.log.str();
  return c.ok;
}

bool criterion8() {
  Check c;
  std::mt19937_64 rng(88);
  std::uniform_real_distribution<double> x0d(0.5, 2.0), sd(0.1, 0.5), td(0.25, 3.0);
  for (int it = 0; it < 100; ++it) {
    double x0 = x0d(rng), sigma = sd(rng), t1 = td(rng);
    double t2 = t1 + td(rng);
    int n = 10 + (it % 30);
    auto mu = quantize_lognormal(x0, sigma, t1, n);
    auto nu = quantize_lognormal(x0, sigma, t2, n);
    double lo = std::min(mu.values()[0], nu.values()[0]);
    double hi = std::max(mu.values()[mu.size() - 1], nu.values()[nu.size() - 1]);
    auto grid = linspace(lo - 1e-6, hi + 1e-6, 41);
    auto pm = project_to_grid(mu, grid);
    auto pn = project_to_grid(nu, grid);
    c.expect(std::abs(pm.mean() - mu.mean()) <= 1e-12 * (1.0 + std::abs(mu.mean())),
             "projection preserves the mean to 1e-12");
    c.expect(std::abs(pn.mean() - nu.mean()) <= 1e-12 * (1.0 + std::abs(nu.mean())),
             "projection preserves the mean to 1e-12");
    c.expect(convex_order(pm, pn, 1e-9).ordered, "projection preserves convex order");
    if (!c.ok) break;
  }

  // call-quote round trip reprices interior quotes exactly
  std::mt19937_64 rng2(99);
  std::uniform_real_distribution<double> wt(0.1, 1.0);
  for (int it = 0; it < 50; ++it) {
    std::vector<std::pair<double, double>> atoms;
    std::uniform_int_distribution<int> slot(1, 8);
    std::vector<int> picks = {slot(rng2), slot(rng2), slot(rng2)};
    std::sort(picks.begin(), picks.end());
    picks.erase(std::unique(picks.begin(), picks.end()), picks.end());
    for (int p : picks) atoms.emplace_back(100.0 + 5.0 * p, wt(rng2));
    auto mu = DiscreteMeasure::normalized(std::move(atoms));
    std::vector<double> strikes, prices;
    for (int i = 0; i <= 9; ++i) {
      strikes.push_back(100.0 + 5.0 * i);
      prices.push_back(call_price(mu, strikes.back()));
    }
    auto back = from_call_quotes(strikes, prices);
    for (std::size_t i = 1; i + 1 < strikes.size(); ++i)
      c.expect(std::abs(call_price(back, strikes[i]) - prices[i]) <= 1e-12,
               "round trip reprices interior quotes exactly");
    if (!c.ok) break;
  }
  std::cout << c.log.str();
  return c.ok;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> todo;
  if (argc < 2 || std::string(argv[1]) == "all") {
    for (int k = 1; k <= 8; ++k) todo.push_back(k);
  } else {
    todo.push_back(std::atoi(argv[1]));
  }
  bool (*criteria[])() = {criterion1, criterion2, criterion3, criterion4,
                          criterion5, criterion6, criterion7, criterion8};
  const char* names[] = {
      "Black-Scholes bounds vs the reported values",
      "mu3 ~ X4 variant narrows drastically under homogeneity",
      "marginal-count sweep: mot flat, hmot tightens",
      "duality suite on 50 randomized instances",
      "brute-force oracle equivalence",
      "proof-construction fixtures",
      "relaxation and penalization limits",
      "quantization properties"};
  bool all_ok = true;
  for (int k : todo) {
    if (k < 1 || k > 8) {
      std::cerr << "unknown criterion " << k << "\n";
      return 2;
    }
    bool ok = criteria[k - 1]();
    std::cout << (ok ? "PASS" : "FAIL") << " criterion " << k << ": " << names[k - 1]
              << std::endl;
    all_ok = all_ok && ok;
  }
  return all_ok ? 0 : 1;
}

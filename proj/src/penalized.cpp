#include "homot/penalized.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace homot {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

double gini(const FiniteMeasure& nu, const FiniteMeasure& mu) {
  double mass_nu = nu.mass(), mass_mu = mu.mass();
  if (mass_mu <= 0.0) return mass_nu > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
  double chi = 0.0;
  for (Eigen::Index i = 0; i < nu.size(); ++i) {
    double n = nu.weights()[i];
    if (n == 0.0) continue;
    double m = mu.weight_at(nu.values()[i]);
    if (m <= 0.0) return std::numeric_limits<double>::infinity();
    chi += n * n / m;
  }
  return chi - mass_nu * mass_nu / mass_mu;
}

namespace {

std::vector<int> index_in(const Eigen::ArrayXd& atoms, const std::vector<double>& where) {
  std::vector<int> idx(atoms.size(), -1);
  std::size_t j = 0;
  for (Eigen::Index i = 0; i < atoms.size(); ++i) {
    while (j < where.size() && where[j] < atoms[i] && !values_equal(where[j], atoms[i])) ++j;
    if (j < where.size() && values_equal(where[j], atoms[i])) idx[i] = static_cast<int>(j);
  }
  return idx;
}

// Per-tuple machinery: maps path coordinates to the (state, y) cells of the
// scaled pair measures nu = theta (x) K_s and m = theta (x) K_t.
struct PenTuple {
  TupleSupport ts;
  std::vector<int> state_s, state_t, y_s, y_t;
  double r = 1.0;
  int S = 0, M = 0;
  Eigen::MatrixXd nu, m;  // work matrices
};

struct PenWork {
  PathGrid grid;
  std::vector<PenTuple> tuples;
  Eigen::VectorXd payoff;  // per path
  double sign = 1.0;       // +1 sup, -1 inf

  explicit PenWork(const ProblemSpec& spec, const PenaltyConfig& cfg) {
    grid = PathGrid::from_marginals(spec.marginals);
    DeltaSet delta = build_delta(spec.grid);
    if (cfg.r.empty()) throw input_error("penalized mode requires r > 0");
    if (cfg.r.size() != 1 && cfg.r.size() != delta.size())
      throw input_error("r must be scalar or one value per tuple");
    for (double v : cfg.r)
      if (!(v > 0.0)) throw input_error("penalty weights r must be positive");
    for (std::size_t k = 0; k < delta.size(); ++k) {
      PenTuple pt;
      // reuse the transport support construction through a one-tuple spec
      FiniteMeasure th = meet(spec.marginals[delta[k].i], spec.marginals[delta[k].j]);
      pt.ts.tuple = delta[k];
      for (Eigen::Index a = 0; a < th.size(); ++a) {
        double x = th.values()[a];
        pt.ts.states.push_back(x);
        pt.ts.theta.push_back(th.weights()[a]);
        pt.ts.mu_s.push_back(spec.marginals[delta[k].i].weight_at(x));
        pt.ts.mu_t.push_back(spec.marginals[delta[k].j].weight_at(x));
      }
      {
        // union of the two forward grids
        const auto& a = spec.marginals[delta[k].i + delta[k].tau_i].values();
        const auto& b = spec.marginals[delta[k].j + delta[k].tau_j].values();
        Eigen::Index i = 0, j = 0;
        while (i < a.size() || j < b.size()) {
          if (j >= b.size() || (i < a.size() && a[i] < b[j] && !values_equal(a[i], b[j])))
            pt.ts.ygrid.push_back(a[i++]);
          else if (i >= a.size() || (b[j] < a[i] && !values_equal(a[i], b[j])))
            pt.ts.ygrid.push_back(b[j++]);
          else {
            pt.ts.ygrid.push_back(a[i]);
            ++i;
            ++j;
          }
        }
      }
      pt.S = static_cast<int>(pt.ts.states.size());
      pt.M = static_cast<int>(pt.ts.ygrid.size());
      const auto& u = delta[k];
      pt.state_s = index_in(grid.values[u.i], pt.ts.states);
      pt.state_t = index_in(grid.values[u.j], pt.ts.states);
      pt.y_s = index_in(grid.values[u.i + u.tau_i], pt.ts.ygrid);
      pt.y_t = index_in(grid.values[u.j + u.tau_j], pt.ts.ygrid);
      pt.r = cfg.r.size() == 1 ? cfg.r[0] : cfg.r[k];
      pt.nu.setZero(pt.S, pt.M);
      pt.m.setZero(pt.S, pt.M);
      tuples.push_back(std::move(pt));
    }

    payoff.resize(grid.num_paths);
    const int T = grid.times();
    std::vector<double> buf(T);
    std::vector<int> idx(T, 0);
    for (int t = 0; t < T; ++t) buf[t] = grid.value(t, 0);
    sign = spec.sense == OptSense::sup ? 1.0 : -1.0;
    for (long p = 0; p < grid.num_paths; ++p) {
      payoff[p] = spec.payoff.valid() ? spec.payoff.eval(buf.data(), T) : 0.0;
      for (int t = T - 1; t >= 0; --t) {
        if (++idx[t] < grid.size(t)) {
          buf[t] = grid.value(t, idx[t]);
          break;
        }
        idx[t] = 0;
        buf[t] = grid.value(t, 0);
      }
    }
  }

  // fills nu/m for every tuple from the path weights
  void accumulate(const Eigen::VectorXd& q) {
    for (auto& pt : tuples) {
      pt.nu.setZero();
      pt.m.setZero();
    }
    const int T = grid.times();
    std::vector<int> idx(T, 0);
    for (long p = 0; p < grid.num_paths; ++p) {
      double w = q[p];
      if (w != 0.0) {
        for (auto& pt : tuples) {
          if (pt.S == 0) continue;
          const auto& u = pt.ts.tuple;
          int xs = pt.state_s[idx[u.i]];
          if (xs >= 0)
            pt.nu(xs, pt.y_s[idx[u.i + u.tau_i]]) += w * pt.ts.theta[xs] / pt.ts.mu_s[xs];
          int xt = pt.state_t[idx[u.j]];
          if (xt >= 0)
            pt.m(xt, pt.y_t[idx[u.j + u.tau_j]]) += w * pt.ts.theta[xt] / pt.ts.mu_t[xt];
        }
      }
      for (int t = T - 1; t >= 0; --t) {
        if (++idx[t] < grid.size(t)) break;
        idx[t] = 0;
      }
    }
  }

  // objective F(q) = sign * payoff.q - penalty(q)
  double value(const Eigen::VectorXd& q) {
    accumulate(q);
    double pen = 0.0;
    for (const auto& pt : tuples) {
      if (pt.S == 0) continue;
      double chi = 0.0, sn = 0.0, sm = 0.0;
      for (int x = 0; x < pt.S; ++x) {
        for (int y = 0; y < pt.M; ++y) {
          double n = pt.nu(x, y), m = pt.m(x, y);
          sn += n;
          sm += m;
          if (m > 0.0) {
            chi += n * n / m;
          } else if (n > 1e-12) {  // solver-noise masses below 1e-12 count as zero
            return kNegInf;
          }
        }
      }
      double g = chi - (sm > 0.0 ? sn * sn / sm : 0.0);
      pen += g / pt.r;
    }
    return sign * payoff.dot(q) - pen;
  }

  // gradient of value() in raw path coordinates (call after value/accumulate
  // with the same q so nu/m are current)
  void gradient(Eigen::VectorXd& out) {
    const int T = grid.times();
    out = sign * payoff;
    // per-tuple cell factors
    struct Factors {
      Eigen::MatrixXd dnu, dm;
      double mass_dnu = 0.0, mass_dm = 0.0;
    };
    std::vector<Factors> fs(tuples.size());
    for (std::size_t k = 0; k < tuples.size(); ++k) {
      const auto& pt = tuples[k];
      if (pt.S == 0) continue;
      double sn = pt.nu.sum(), sm = pt.m.sum();
      fs[k].dnu.setZero(pt.S, pt.M);
      fs[k].dm.setZero(pt.S, pt.M);
      for (int x = 0; x < pt.S; ++x) {
        for (int y = 0; y < pt.M; ++y) {
          double n = pt.nu(x, y), m = pt.m(x, y);
          double dn = 0.0, dm = 0.0;
          if (m > 0.0) {
            dn = 2.0 * n / m;
            dm = -(n * n) / (m * m);
          }  // n = m = 0: continuous extension 0
          fs[k].dnu(x, y) = dn;
          fs[k].dm(x, y) = dm;
        }
      }
      if (sm > 0.0) {
        fs[k].mass_dnu = 2.0 * sn / sm;        // d/dnu of sn^2/sm (subtracted)
        fs[k].mass_dm = -(sn * sn) / (sm * sm);
      }
    }
    std::vector<int> idx(T, 0);
    for (long p = 0; p < grid.num_paths; ++p) {
      double acc = 0.0;
      for (std::size_t k = 0; k < tuples.size(); ++k) {
        const auto& pt = tuples[k];
        if (pt.S == 0) continue;
        const auto& u = pt.ts.tuple;
        int xs = pt.state_s[idx[u.i]];
        if (xs >= 0) {
          double scale = pt.ts.theta[xs] / pt.ts.mu_s[xs];
          int y = pt.y_s[idx[u.i + u.tau_i]];
          acc += (fs[k].dnu(xs, y) - fs[k].mass_dnu) * scale / pt.r;
        }
        int xt = pt.state_t[idx[u.j]];
        if (xt >= 0) {
          double scale = pt.ts.theta[xt] / pt.ts.mu_t[xt];
          int y = pt.y_t[idx[u.j + u.tau_j]];
          acc += (fs[k].dm(xt, y) - fs[k].mass_dm) * scale / pt.r;
        }
      }
      out[p] -= acc;
      for (int t = T - 1; t >= 0; --t) {
        if (++idx[t] < grid.size(t)) break;
        idx[t] = 0;
      }
    }
  }
};

void check_marginals(const Coupling& q, const ProblemSpec& spec) {
  for (int t = 0; t < q.times(); ++t) {
    DiscreteMeasure qm = q.marginal(t);
    const auto& sm = spec.marginals[t];
    if (qm.size() != sm.size())
      throw input_error("coupling marginal " + std::to_string(t + 1) +
                        " has wrong support");
    double worst = (qm.weights() - sm.weights()).abs().maxCoeff();
    if (worst > 1e-7)
      throw input_error("coupling marginal " + std::to_string(t + 1) + " deviates by " +
                        std::to_string(worst));
  }
}

// Markov martingale coupling with spread-out transitions: per step, a pair LP
// maximizing capped cell mass; rows keep the martingale mean.
Eigen::VectorXd reference_coupling(const ProblemSpec& spec, const PathGrid& grid) {
  const int T = grid.times();
  std::vector<Eigen::MatrixXd> kernels;
  for (int t = 0; t + 1 < T; ++t) {
    const auto& mu = spec.marginals[t];
    const auto& nxt = spec.marginals[t + 1];
    const int n = static_cast<int>(mu.size()), m = static_cast<int>(nxt.size());
    LPModel lp;
    lp.name = "spread";
    lp.sense = ObjSense::maximize;
    const double cap = 1e-7;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j) lp.add_variable("p", 0.0, kInf, 0.0);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j) lp.add_variable("e", 0.0, cap, 1.0);
    const int E = n * m;
    for (int i = 0; i < n; ++i) {
      std::vector<std::pair<int, double>> row;
      for (int j = 0; j < m; ++j) row.emplace_back(i * m + j, 1.0);
      lp.add_row("rs", Relation::eq, mu.weights()[i], row);
    }
    for (int j = 0; j < m; ++j) {
      std::vector<std::pair<int, double>> col;
      for (int i = 0; i < n; ++i) col.emplace_back(i * m + j, 1.0);
      lp.add_row("cs", Relation::eq, nxt.weights()[j], col);
    }
    for (int i = 0; i < n; ++i) {
      std::vector<std::pair<int, double>> row;
      for (int j = 0; j < m; ++j) {
        double c = nxt.values()[j] - mu.values()[i];
        if (c != 0.0) row.emplace_back(i * m + j, c);
      }
      lp.add_row("mean", Relation::eq, 0.0, row);
    }
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j)
        lp.add_row("cap", Relation::ge, 0.0, {{i * m + j, 1.0}, {E + i * m + j, -1.0}});
    LPSolution sol = solve(lp);
    if (sol.status != SolveStatus::optimal)
      throw input_error("pen-hmot: martingale coupling infeasible at step " +
                        std::to_string(t + 1));
    Eigen::MatrixXd K(n, m);
    for (int i = 0; i < n; ++i) {
      double rowmass = mu.weights()[i];
      for (int j = 0; j < m; ++j) K(i, j) = std::max(sol.primal[i * m + j], 0.0) / rowmass;
    }
    kernels.push_back(std::move(K));
  }
  Eigen::VectorXd q(grid.num_paths);
  std::vector<int> idx(T, 0);
  for (long p = 0; p < grid.num_paths; ++p) {
    double w = spec.marginals[0].weights()[idx[0]];
    for (int t = 0; t + 1 < T; ++t) w *= kernels[t](idx[t], idx[t + 1]);
    q[p] = w;
    for (int t = T - 1; t >= 0; --t) {
      if (++idx[t] < grid.size(t)) break;
      idx[t] = 0;
    }
  }
  double total = q.sum();
  if (total > 0.0) q /= total;
  return q;
}

}  // namespace

namespace {

// MOT model plus cellwise dominance rows p^s / M - p^t <= 0: every vertex of
// this polytope has a finite Gini penalty (density ratios bounded by M).
LPModel dominance_model(const LPModel& mot_model, const PenWork& work, double big) {
    LPModel m;
    m.sense = ObjSense::minimize;
    for (int j = 0; j < mot_model.num_vars(); ++j)
      m.add_variable(mot_model.var_name(j), mot_model.lb(j), mot_model.ub(j), 0.0);
    for (int i = 0; i < mot_model.num_rows(); ++i) {
      std::vector<std::pair<int, double>> entries;
      for (std::size_t k = mot_model.row_begin(i); k < mot_model.row_end(i); ++k)
        entries.emplace_back(mot_model.entry_col(k), mot_model.entry_val(k));
      m.add_row(mot_model.row_name(i), mot_model.rel(i), mot_model.rhs(i), entries);
    }
    const PathGrid& g = work.grid;
    const int T = g.times();
    for (std::size_t k = 0; k < work.tuples.size(); ++k) {
      const auto& pt = work.tuples[k];
      if (pt.S == 0) continue;
      const auto& u = pt.ts.tuple;
      std::vector<std::vector<std::pair<int, double>>> rows(
          static_cast<std::size_t>(pt.S) * pt.M);
      std::vector<int> idx(T, 0);
      for (long p = 0; p < g.num_paths; ++p) {
        // scaled as p^s / M - p^t <= 0 to keep coefficients near unit size
        int xs = pt.state_s[idx[u.i]];
        if (xs >= 0) {
          auto& row = rows[static_cast<std::size_t>(xs) * pt.M + pt.y_s[idx[u.i + u.tau_i]]];
          if (!row.empty() && row.back().first == p) row.back().second += 1.0 / big;
          else row.emplace_back(static_cast<int>(p), 1.0 / big);
        }
        int xt = pt.state_t[idx[u.j]];
        if (xt >= 0) {
          auto& row = rows[static_cast<std::size_t>(xt) * pt.M + pt.y_t[idx[u.j + u.tau_j]]];
          if (!row.empty() && row.back().first == p) row.back().second -= 1.0;
          else row.emplace_back(static_cast<int>(p), -1.0);
        }
        for (int t = T - 1; t >= 0; --t) {
          if (++idx[t] < g.size(t)) break;
          idx[t] = 0;
        }
      }
      for (std::size_t r = 0; r < rows.size(); ++r)
        m.add_row("dom_u" + std::to_string(k) + "_" + std::to_string(r), Relation::le, 0.0,
                  rows[r]);
    }
    return m;
}

// Finite-penalty start when no homogeneous coupling exists.
Eigen::VectorXd dominance_start(const LPModel& mot_model, const PenWork& work) {
  for (double big : {1e4, 1e8}) {
    LPModel m = dominance_model(mot_model, work, big);
    LPSolution sol = solve(m);
    if (sol.status == SolveStatus::optimal)
      return sol.primal.head(mot_model.num_vars()).cwiseMax(0.0);
  }
  throw input_error(
      "pen-hmot: no finite-penalty starting point found; diagnose HMOT feasibility "
      "(feasibility_hom) before penalizing");
}

}  // namespace

double pen_objective(const Coupling& q, const ProblemSpec& spec, const PenaltyConfig& cfg) {
  check_marginals(q, spec);
  ProblemSpec sup_spec = spec;  // the op is defined in the sup orientation
  sup_spec.sense = OptSense::sup;
  PenWork work(sup_spec, cfg);
  return work.value(q.weights());
}

Eigen::VectorXd pen_gradient(const Coupling& q, const ProblemSpec& spec,
                             const PenaltyConfig& cfg) {
  ProblemSpec sup_spec = spec;
  sup_spec.sense = OptSense::sup;
  PenWork work(sup_spec, cfg);
  double v = work.value(q.weights());
  if (v == kNegInf) throw input_error("pen_gradient at a point with infinite penalty");
  Eigen::VectorXd g;
  work.gradient(g);
  return g;
}

PenResult solve_pen_hmot(const ProblemSpec& spec, const PenaltyConfig& cfg) {
  ProblemSpec mot_spec = spec;
  mot_spec.mode = Mode::mot;
  mot_spec.r.clear();
  BuildResult build = build_primal(mot_spec, true);
  // internally always maximize sign*f - penalty; the inf-sense value is the
  // negation of that maximum
  PenWork work(spec, cfg);
  const long P = build.grid.num_paths;

  // Starting point: the HMOT optimizer when available (penalty exactly zero
  // there), otherwise a spread-out Markov martingale coupling. The iteration
  // itself starts from a slightly interior blend: exactly on the domain
  // boundary the gradient's continuous extension cannot see the +inf wall and
  // every oracle direction stalls. The blend weight shrinks with the penalty
  // strength so the blended start stays near-optimal in both regimes.
  Eigen::VectorXd q_ref = reference_coupling(spec, build.grid);
  Eigen::VectorXd q0 = q_ref;
  bool have_hmot = false;
  {
    ProblemSpec hspec = spec;
    hspec.mode = spec.mode == Mode::pen_hmot ? Mode::hmot : spec.mode;
    hspec.r.clear();
    try {
      BoundsResult hb = bounds(hspec, spec.sense == OptSense::inf,
                               spec.sense == OptSense::sup);
      const auto& rep = spec.sense == OptSense::sup ? hb.sup : hb.inf;
      if (rep && rep->status == SolveStatus::optimal) {
        const Coupling& qc =
            spec.sense == OptSense::sup ? hb.sup_coupling : hb.inf_coupling;
        if (work.value(qc.weights()) != kNegInf) {
          q0 = qc.weights();
          have_hmot = true;
        }
      }
    } catch (const std::exception&) {
      // HMOT unavailable: start from the reference coupling
    }
  }
  if (work.value(q0) == kNegInf) q0 = dominance_start(build.model, work);
  if (work.value(q0) == kNegInf)
    throw input_error(
        "pen-hmot: no finite-penalty starting point found; diagnose HMOT feasibility "
        "(feasibility_hom) before penalizing");

  PenResult res;
  Eigen::VectorXd qbest = q0;
  double fbest = work.value(q0);
  Eigen::VectorXd q = q0, grad(P);
  LPModel dom_model;      // lazily built when plain oracle directions stall
  bool use_dominance = false;
  Basis dom_warm;
  bool have_dom_warm = false;
  if (have_hmot) {
    double weight = 1.0 / cfg.r[0];
    double eps = std::min(1e-3, 1e-3 / std::max(weight, 1.0));
    Eigen::VectorXd mixed = (1.0 - eps) * q0 + eps * q_ref;
    if (work.value(mixed) != kNegInf) q = std::move(mixed);
  }
  double fval = work.value(q);
  Basis warm;
  bool have_warm = false;

  SimplexOptions oracle_opts;
  oracle_opts.max_iterations = spec.solver.max_iterations;

  for (int it = 0; it < cfg.max_iterations; ++it) {
    work.value(q);  // refresh nu/m caches
    work.gradient(grad);
    LPModel& oracle = use_dominance ? dom_model : build.model;
    for (long p = 0; p < P; ++p) oracle.set_objective(static_cast<int>(p), grad[p]);
    oracle.sense = ObjSense::maximize;  // F is maximized in both senses
    SimplexOptions o = oracle_opts;
    Basis& wm = use_dominance ? dom_warm : warm;
    bool& have_wm = use_dominance ? have_dom_warm : have_warm;
    if (have_wm) o.warm_start = &wm;
    LPSolution vertex = solve(oracle, o);
    if (vertex.status != SolveStatus::optimal)
      throw input_error("pen-hmot oracle failed: " + to_string(vertex.status));
    wm = vertex.basis;
    have_wm = true;

    Eigen::VectorXd qhat = vertex.primal.head(P).cwiseMax(0.0);
    double gap = grad.dot(qhat - q);
    res.trace.push_back({it, fval, gap, 0.0});
    res.final_gap = gap;
    res.iterations = it + 1;
    if (gap <= cfg.gap_tol_rel * (1.0 + std::abs(fval))) {
      res.converged = true;
      break;
    }

    // F is concave along the segment; the penalty is +inf outside its domain
    // and its directional derivative jumps at the domain boundary, which makes
    // plain Armijo backtracking stall there. A ternary search handles both.
    double step = 0.0;
    double fnew = fval;
    for (int attempt = 0; attempt < 2 && step == 0.0; ++attempt) {
      Eigen::VectorXd target = attempt == 0 ? qhat : (0.9 * qhat + 0.1 * q_ref).eval();
      double dir_gap = grad.dot(target - q);
      if (dir_gap <= 0.0) continue;
      auto f_at = [&](double gamma) {
        return work.value(((1.0 - gamma) * q + gamma * target).eval());
      };
      double lo = 0.0, hi = 1.0, flo = fval;
      for (int h = 0; h < 64 && hi - lo > 1e-13; ++h) {
        double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
        double f1 = f_at(m1), f2 = f_at(m2);
        if (f1 >= f2) {
          hi = m2;
        } else {
          lo = m1;
          flo = f1;
        }
      }
      double cand = 0.5 * (lo + hi);
      double fcand = f_at(cand);
      if (fcand < flo) {
        cand = lo;
        fcand = flo;
      }
      if (cand > 0.0 && fcand > fval) {
        q = (1.0 - cand) * q + cand * target;
        fnew = fcand;
        step = cand;
      }
    }
    res.trace.back().step = step;
    if (step == 0.0) {
      if (!use_dominance) {
        // plain oracle directions leave the penalty domain: restrict the
        // oracle polytope to bounded density ratios and continue
        dom_model = dominance_model(build.model, work, 1e4);
        use_dominance = true;
        continue;
      }
      break;  // ascent blocked on the restricted polytope too
    }
    fval = fnew;
    if (fval > fbest) {
      fbest = fval;
      qbest = q;
    }
    // stagnation stop: long stretches without measurable ascent
    if (res.trace.size() >= 50 &&
        fbest - res.trace[res.trace.size() - 50].objective <
            1e-12 * (1.0 + std::abs(fbest))) {
      break;
    }
  }
  res.value = work.sign * fbest;
  res.coupling = Coupling(build.grid, qbest);
  return res;
}

}  // namespace homot

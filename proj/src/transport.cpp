#include "homot/transport.hpp"

#include "homot/format.hpp"

#include <algorithm>
#include <cmath>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

namespace homot {

std::string to_string(RowFamily f) {
  switch (f) {
    case RowFamily::marginal: return "marginal";
    case RowFamily::martingale: return "martingale";
    case RowFamily::homogeneity: return "homogeneity";
    case RowFamily::homogeneity2: return "homogeneity-2";
    case RowFamily::tv_pos:
    case RowFamily::tv_neg: return "tv-envelope";
    case RowFamily::tv_budget: return "tv-budget";
    case RowFamily::w1_pos:
    case RowFamily::w1_neg: return "w1-envelope";
    case RowFamily::w1_budget: return "w1-budget";
  }
  return "?";
}

PathGrid PathGrid::from_marginals(const std::vector<DiscreteMeasure>& marginals) {
  PathGrid g;
  g.values.reserve(marginals.size());
  for (const auto& m : marginals) g.values.push_back(m.values());
  int T = g.times();
  g.strides.assign(T, 1);
  long double total = 1.0L;
  for (int t = T - 1; t >= 0; --t) {
    if (t + 1 < T) g.strides[t] = g.strides[t + 1] * g.size(t + 1);
    total *= g.size(t);
  }
  if (total > 4e9L) throw input_error("path space too large to enumerate");
  g.num_paths = 1;
  for (int t = 0; t < T; ++t) g.num_paths *= g.size(t);
  return g;
}

namespace {

std::vector<double> merge_union(const Eigen::Ref<const Eigen::ArrayXd>& a,
                                const Eigen::Ref<const Eigen::ArrayXd>& b) {
  std::vector<double> out;
  Eigen::Index i = 0, j = 0;
  while (i < a.size() || j < b.size()) {
    if (j >= b.size() || (i < a.size() && a[i] < b[j] && !values_equal(a[i], b[j]))) {
      out.push_back(a[i++]);
    } else if (i >= a.size() || (b[j] < a[i] && !values_equal(a[i], b[j]))) {
      out.push_back(b[j++]);
    } else {
      out.push_back(a[i]);
      ++i;
      ++j;
    }
  }
  return out;
}

// index of each atom of `atoms` in the sorted list `where`, -1 if absent
std::vector<int> index_map(const Eigen::Ref<const Eigen::ArrayXd>& atoms,
                           const std::vector<double>& where) {
  std::vector<int> idx(atoms.size(), -1);
  std::size_t j = 0;
  for (Eigen::Index i = 0; i < atoms.size(); ++i) {
    while (j < where.size() && where[j] < atoms[i] && !values_equal(where[j], atoms[i])) ++j;
    if (j < where.size() && values_equal(where[j], atoms[i])) idx[i] = static_cast<int>(j);
  }
  return idx;
}

TupleSupport make_tuple_support(const ProblemSpec& spec, const DeltaTuple& u) {
  TupleSupport ts;
  ts.tuple = u;
  const auto& ms = spec.marginals[u.i];
  const auto& mt = spec.marginals[u.j];
  FiniteMeasure th = meet(ms, mt);
  for (Eigen::Index k = 0; k < th.size(); ++k) {
    double x = th.values()[k];
    ts.states.push_back(x);
    ts.theta.push_back(th.weights()[k]);
    ts.mu_s.push_back(ms.weight_at(x));
    ts.mu_t.push_back(mt.weight_at(x));
  }
  ts.ygrid = merge_union(spec.marginals[u.i + u.tau_i].values(),
                         spec.marginals[u.j + u.tau_j].values());
  return ts;
}

std::string path_var_name(long p) {
  char buf[24] = "q_";
  auto r = std::to_chars(buf + 2, buf + sizeof buf, p);
  return std::string(buf, r.ptr - buf);
}

}  // namespace

BuildResult build_primal(const ProblemSpec& spec, bool enforce_cap) {
  BuildResult out;
  out.warnings = spec.validate();
  if (spec.mode == Mode::pen_hmot)
    throw input_error("penalized mode is solved by the Frank-Wolfe driver, not an LP");

  const int T = spec.grid.size();
  long double total = 1.0L;
  for (const auto& m : spec.marginals) total *= m.size();
  if (enforce_cap && total > static_cast<long double>(spec.solver.max_vars))
    throw scale_error(static_cast<long>(std::min(total, 4e18L)), spec.solver.max_vars);

  out.grid = PathGrid::from_marginals(spec.marginals);
  const PathGrid& g = out.grid;
  const long P = g.num_paths;
  LPModel& model = out.model;
  model.sense = ObjSense::maximize;
  model.name = "homot_" + to_string(spec.mode);

  // one variable per path; objective = payoff
  {
    std::vector<double> buf(T);
    std::vector<int> idx(T, 0);
    for (int t = 0; t < T; ++t) buf[t] = g.value(t, 0);
    for (long p = 0; p < P; ++p) {
      double f = spec.payoff.valid() ? spec.payoff.eval(buf.data(), T) : 0.0;
      model.add_variable(path_var_name(p), 0.0, kInf, f);
      // odometer increment (last time fastest)
      for (int t = T - 1; t >= 0; --t) {
        if (++idx[t] < g.size(t)) {
          buf[t] = g.value(t, idx[t]);
          break;
        }
        idx[t] = 0;
        buf[t] = g.value(t, 0);
      }
    }
  }

  // (m) marginal rows
  for (int t = 0; t < T; ++t) {
    const long inner = g.strides[t];
    const long outer = P / (inner * g.size(t));
    for (int a = 0; a < g.size(t); ++a) {
      std::vector<std::pair<int, double>> entries;
      entries.reserve(P / g.size(t));
      for (long pre = 0; pre < outer; ++pre) {
        long base = pre * g.size(t) * inner + a * inner;
        for (long suf = 0; suf < inner; ++suf)
          entries.emplace_back(static_cast<int>(base + suf), 1.0);
      }
      model.add_row("m_t" + std::to_string(t + 1) + "_" + std::to_string(a), Relation::eq,
                    spec.marginals[t].weights()[a], entries);
      RowTag tag;
      tag.family = RowFamily::marginal;
      tag.t = t;
      tag.atom = a;
      out.row_tags.push_back(tag);
    }
  }

  // (mg) martingale rows
  if (spec.mode != Mode::ot) {
    if (!spec.solver.pairwise_martingale) {
      // full history: one row per prefix (x_1..x_t)
      for (int t = 0; t + 1 < T; ++t) {
        const long inner = g.strides[t];       // continuation block of the prefix
        const long inner2 = g.strides[t + 1];  // block below time t+1
        const long prefixes = P / inner;
        for (long pre = 0; pre < prefixes; ++pre) {
          const double xt = g.value(t, static_cast<int>(pre % g.size(t)));
          std::vector<std::pair<int, double>> entries;
          entries.reserve(inner);
          for (int a = 0; a < g.size(t + 1); ++a) {
            double coef = g.value(t + 1, a) - xt;
            if (coef == 0.0) continue;
            long base = pre * inner + a * inner2;
            for (long suf = 0; suf < inner2; ++suf)
              entries.emplace_back(static_cast<int>(base + suf), coef);
          }
          model.add_row("mg_t" + std::to_string(t + 1) + "_p" + std::to_string(pre),
                        Relation::eq, 0.0, entries);
          RowTag tag;
          tag.family = RowFamily::martingale;
          tag.t = t;
          tag.prefix = pre;
          out.row_tags.push_back(tag);
        }
      }
    } else {
      // Markovian relaxation: E[S_{t+1}|S_t] = S_t rows only (outer bounds)
      for (int t = 0; t + 1 < T; ++t) {
        const long inner = g.strides[t];
        const long inner2 = g.strides[t + 1];
        const long outer = P / (inner * g.size(t));
        for (int a = 0; a < g.size(t); ++a) {
          const double xt = g.value(t, a);
          std::vector<std::pair<int, double>> entries;
          for (long pre = 0; pre < outer; ++pre) {
            long base = pre * g.size(t) * inner + a * inner;
            for (int ap = 0; ap < g.size(t + 1); ++ap) {
              double coef = g.value(t + 1, ap) - xt;
              if (coef == 0.0) continue;
              for (long suf = 0; suf < inner2; ++suf)
                entries.emplace_back(static_cast<int>(base + ap * inner2 + suf), coef);
            }
          }
          model.add_row("mg_t" + std::to_string(t + 1) + "_x" + std::to_string(a),
                        Relation::eq, 0.0, entries);
          RowTag tag;
          tag.family = RowFamily::martingale;
          tag.t = t;
          tag.atom = a;
          out.row_tags.push_back(tag);
        }
      }
    }
  }

  const bool wants_tuples = spec.mode == Mode::hmot || spec.mode == Mode::hmot2 ||
                            spec.mode == Mode::rhmot;
  if (!wants_tuples) return out;

  out.delta = build_delta(spec.grid);
  for (const auto& u : out.delta) out.tuples.push_back(make_tuple_support(spec, u));

  bool any_state = false;
  for (const auto& ts : out.tuples) any_state = any_state || !ts.states.empty();
  if (!out.delta.empty() && !any_state)
    out.warnings.push_back(
        "homogeneity vacuous: all lag-matched marginal pairs have disjoint supports");

  if (spec.mode == Mode::rhmot) {
    add_r_homogeneity(out, spec, spec.metric, spec.r);
    return out;
  }

  // (h) homogeneity rows: mu_t(x) p^{(s,s+tau)}(x,y) - mu_s(x) p^{(t,t+tau)}(x,y) = 0
  {
    const int nu = static_cast<int>(out.tuples.size());
    std::vector<long> row_offset(nu + 1, 0);
    for (int k = 0; k < nu; ++k)
      row_offset[k + 1] =
          row_offset[k] + static_cast<long>(out.tuples[k].states.size()) *
                              static_cast<long>(out.tuples[k].ygrid.size());
    std::vector<std::vector<std::pair<int, double>>> buckets(row_offset[nu]);

    struct TupleMaps {
      std::vector<int> state_s, state_t, y_s, y_t;
      int M = 0;
    };
    std::vector<TupleMaps> maps(nu);
    for (int k = 0; k < nu; ++k) {
      const auto& ts = out.tuples[k];
      const auto& u = ts.tuple;
      maps[k].state_s = index_map(g.values[u.i], ts.states);
      maps[k].state_t = index_map(g.values[u.j], ts.states);
      maps[k].y_s = index_map(g.values[u.i + u.tau_i], ts.ygrid);
      maps[k].y_t = index_map(g.values[u.j + u.tau_j], ts.ygrid);
      maps[k].M = static_cast<int>(ts.ygrid.size());
    }

    std::vector<int> idx(T, 0);
    for (long p = 0; p < P; ++p) {
      for (int k = 0; k < nu; ++k) {
        const auto& ts = out.tuples[k];
        if (ts.states.empty()) continue;
        const auto& u = ts.tuple;
        const auto& mp = maps[k];
        int xs = mp.state_s[idx[u.i]];
        if (xs >= 0) {
          long row = row_offset[k] + static_cast<long>(xs) * mp.M + mp.y_s[idx[u.i + u.tau_i]];
          auto& bucket = buckets[row];
          double coef = ts.mu_t[xs];
          if (!bucket.empty() && bucket.back().first == p) bucket.back().second += coef;
          else bucket.emplace_back(static_cast<int>(p), coef);
        }
        int xt = mp.state_t[idx[u.j]];
        if (xt >= 0) {
          long row = row_offset[k] + static_cast<long>(xt) * mp.M + mp.y_t[idx[u.j + u.tau_j]];
          auto& bucket = buckets[row];
          double coef = -ts.mu_s[xt];
          if (!bucket.empty() && bucket.back().first == p) bucket.back().second += coef;
          else bucket.emplace_back(static_cast<int>(p), coef);
        }
      }
      for (int t = T - 1; t >= 0; --t) {
        if (++idx[t] < g.size(t)) break;
        idx[t] = 0;
      }
    }

    for (int k = 0; k < nu; ++k) {
      const auto& ts = out.tuples[k];
      const int M = static_cast<int>(ts.ygrid.size());
      for (std::size_t x = 0; x < ts.states.size(); ++x) {
        for (int y = 0; y < M; ++y) {
          long row = row_offset[k] + static_cast<long>(x) * M + y;
          model.add_row("h_u" + std::to_string(k) + "_x" + std::to_string(x) + "_y" +
                            std::to_string(y),
                        Relation::eq, 0.0, buckets[row]);
          RowTag tag;
          tag.family = RowFamily::homogeneity;
          tag.tuple = k;
          tag.x = static_cast<int>(x);
          tag.y = y;
          out.row_tags.push_back(tag);
          buckets[row].clear();
          buckets[row].shrink_to_fit();
        }
      }
    }
  }

  // (h2) order-2 rows on pairs of tuples sharing (i, j)
  if (spec.mode == Mode::hmot2) {
    for (std::size_t k1 = 0; k1 < out.delta.size(); ++k1) {
      for (std::size_t k2 = k1 + 1; k2 < out.delta.size(); ++k2) {
        const auto& u1 = out.delta[k1];
        const auto& u2 = out.delta[k2];
        if (u1.i != u2.i || u1.j != u2.j) continue;
        const auto *a = &u1, *b = &u2;
        if (a->gap > b->gap) std::swap(a, b);
        Tuple2Group grp;
        grp.i = a->i;
        grp.j = a->j;
        grp.tau_i1 = a->tau_i;
        grp.tau_j1 = a->tau_j;
        grp.tau_i2 = b->tau_i;
        grp.tau_j2 = b->tau_j;
        grp.base = out.tuples[a == &u1 ? k1 : k2];
        grp.ygrid1 = merge_union(g.values[grp.i + grp.tau_i1], g.values[grp.j + grp.tau_j1]);
        grp.ygrid2 = merge_union(g.values[grp.i + grp.tau_i2], g.values[grp.j + grp.tau_j2]);
        out.groups2.push_back(std::move(grp));
      }
    }
    for (std::size_t gidx = 0; gidx < out.groups2.size(); ++gidx) {
      const auto& grp = out.groups2[gidx];
      const auto& ts = grp.base;
      if (ts.states.empty()) continue;
      const int M1 = static_cast<int>(grp.ygrid1.size());
      const int M2 = static_cast<int>(grp.ygrid2.size());
      auto state_s = index_map(g.values[grp.i], ts.states);
      auto state_t = index_map(g.values[grp.j], ts.states);
      auto y1_s = index_map(g.values[grp.i + grp.tau_i1], grp.ygrid1);
      auto y1_t = index_map(g.values[grp.j + grp.tau_j1], grp.ygrid1);
      auto y2_s = index_map(g.values[grp.i + grp.tau_i2], grp.ygrid2);
      auto y2_t = index_map(g.values[grp.j + grp.tau_j2], grp.ygrid2);
      std::vector<std::vector<std::pair<int, double>>> buckets(
          static_cast<std::size_t>(ts.states.size()) * M1 * M2);
      std::vector<int> idx(T, 0);
      for (long p = 0; p < P; ++p) {
        int xs = state_s[idx[grp.i]];
        if (xs >= 0) {
          long row = (static_cast<long>(xs) * M1 + y1_s[idx[grp.i + grp.tau_i1]]) * M2 +
                     y2_s[idx[grp.i + grp.tau_i2]];
          auto& bucket = buckets[row];
          if (!bucket.empty() && bucket.back().first == p) bucket.back().second += ts.mu_t[xs];
          else bucket.emplace_back(static_cast<int>(p), ts.mu_t[xs]);
        }
        int xt = state_t[idx[grp.j]];
        if (xt >= 0) {
          long row = (static_cast<long>(xt) * M1 + y1_t[idx[grp.j + grp.tau_j1]]) * M2 +
                     y2_t[idx[grp.j + grp.tau_j2]];
          auto& bucket = buckets[row];
          if (!bucket.empty() && bucket.back().first == p) bucket.back().second -= ts.mu_s[xt];
          else bucket.emplace_back(static_cast<int>(p), -ts.mu_s[xt]);
        }
        for (int t = T - 1; t >= 0; --t) {
          if (++idx[t] < g.size(t)) break;
          idx[t] = 0;
        }
      }
      for (std::size_t x = 0; x < ts.states.size(); ++x) {
        for (int y1 = 0; y1 < M1; ++y1) {
          for (int y2 = 0; y2 < M2; ++y2) {
            long row = (static_cast<long>(x) * M1 + y1) * M2 + y2;
            model.add_row("h2_g" + std::to_string(gidx) + "_x" + std::to_string(x) + "_a" +
                              std::to_string(y1) + "_b" + std::to_string(y2),
                          Relation::eq, 0.0, buckets[row]);
            RowTag tag;
            tag.family = RowFamily::homogeneity2;
            tag.tuple = static_cast<int>(gidx);
            tag.x = static_cast<int>(x);
            tag.y = y1;
            tag.y2 = y2;
            out.row_tags.push_back(tag);
          }
        }
      }
    }
  }

  return out;
}

void add_r_homogeneity(BuildResult& build, const ProblemSpec& spec, RMetric metric,
                       const std::vector<double>& r) {
  if (build.delta.empty()) return;
  for (double v : r)
    if (v < 0.0) throw input_error("r must be nonnegative");
  auto r_for = [&](std::size_t k) {
    if (r.empty()) throw input_error("r-homogeneity requires r values");
    return r.size() == 1 ? r[0] : r.at(k);
  };

  LPModel& model = build.model;
  const PathGrid& g = build.grid;
  const int T = g.times();
  const long P = g.num_paths;
  build.first_aux_var = model.num_vars();

  for (std::size_t k = 0; k < build.tuples.size(); ++k) {
    const auto& ts = build.tuples[k];
    if (ts.states.empty()) continue;
    const auto& u = ts.tuple;
    const int S = static_cast<int>(ts.states.size());
    const int M = static_cast<int>(ts.ygrid.size());

    auto state_s = index_map(g.values[u.i], ts.states);
    auto state_t = index_map(g.values[u.j], ts.states);
    auto y_s = index_map(g.values[u.i + u.tau_i], ts.ygrid);
    auto y_t = index_map(g.values[u.j + u.tau_j], ts.ygrid);

    // scaled difference D(x,y) = theta(x)/mu_s(x) p^s(x,y) - theta(x)/mu_t(x) p^t(x,y)
    std::vector<std::vector<std::pair<int, double>>> diff(
        static_cast<std::size_t>(S) * M);
    std::vector<int> idx(T, 0);
    for (long p = 0; p < P; ++p) {
      int xs = state_s[idx[u.i]];
      if (xs >= 0) {
        long cell = static_cast<long>(xs) * M + y_s[idx[u.i + u.tau_i]];
        double coef = ts.theta[xs] / ts.mu_s[xs];
        auto& d = diff[cell];
        if (!d.empty() && d.back().first == p) d.back().second += coef;
        else d.emplace_back(static_cast<int>(p), coef);
      }
      int xt = state_t[idx[u.j]];
      if (xt >= 0) {
        long cell = static_cast<long>(xt) * M + y_t[idx[u.j + u.tau_j]];
        double coef = -ts.theta[xt] / ts.mu_t[xt];
        auto& d = diff[cell];
        if (!d.empty() && d.back().first == p) d.back().second += coef;
        else d.emplace_back(static_cast<int>(p), coef);
      }
      for (int t = T - 1; t >= 0; --t) {
        if (++idx[t] < g.size(t)) break;
        idx[t] = 0;
      }
    }

    std::string uk = std::to_string(k);
    if (metric == RMetric::tv) {
      std::vector<std::pair<int, double>> budget;
      for (int x = 0; x < S; ++x) {
        for (int y = 0; y < M; ++y) {
          int e = model.add_variable("tv_u" + uk + "_" + std::to_string(x) + "_" +
                                     std::to_string(y));
          budget.emplace_back(e, 1.0);
          auto cell = diff[static_cast<std::size_t>(x) * M + y];
          auto pos = cell;
          pos.emplace_back(e, -1.0);  // D - e <= 0
          model.add_row("tvp_u" + uk + "_" + std::to_string(x) + "_" + std::to_string(y),
                        Relation::le, 0.0, pos);
          RowTag tp;
          tp.family = RowFamily::tv_pos;
          tp.tuple = static_cast<int>(k);
          tp.x = x;
          tp.y = y;
          build.row_tags.push_back(tp);
          for (auto& [col, v] : cell) v = -v;
          cell.emplace_back(e, -1.0);  // -D - e <= 0
          model.add_row("tvn_u" + uk + "_" + std::to_string(x) + "_" + std::to_string(y),
                        Relation::le, 0.0, cell);
          RowTag tn = tp;
          tn.family = RowFamily::tv_neg;
          build.row_tags.push_back(tn);
        }
      }
      model.add_row("tvb_u" + uk, Relation::le, r_for(k), budget);
      RowTag tb;
      tb.family = RowFamily::tv_budget;
      tb.tuple = static_cast<int>(k);
      build.row_tags.push_back(tb);
    } else {
      // W1: cumulative differences over the sorted ygrid, weighted by gaps
      std::vector<std::pair<int, double>> budget;
      for (int x = 0; x < S; ++x) {
        std::vector<std::pair<int, double>> cumulative;
        for (int y = 0; y + 1 < M; ++y) {
          // extend the running prefix sum with cell (x, y)
          for (const auto& [col, v] : diff[static_cast<std::size_t>(x) * M + y]) {
            bool merged = false;
            for (auto& [c2, v2] : cumulative)
              if (c2 == col) {
                v2 += v;
                merged = true;
                break;
              }
            if (!merged) cumulative.emplace_back(col, v);
          }
          int c = model.add_variable("w1_u" + uk + "_" + std::to_string(x) + "_" +
                                     std::to_string(y));
          budget.emplace_back(c, ts.ygrid[y + 1] - ts.ygrid[y]);
          auto pos = cumulative;
          pos.emplace_back(c, -1.0);
          model.add_row("w1p_u" + uk + "_" + std::to_string(x) + "_" + std::to_string(y),
                        Relation::le, 0.0, pos);
          RowTag tp;
          tp.family = RowFamily::w1_pos;
          tp.tuple = static_cast<int>(k);
          tp.x = x;
          tp.y = y;
          build.row_tags.push_back(tp);
          auto neg = cumulative;
          for (auto& [col, v] : neg) v = -v;
          neg.emplace_back(c, -1.0);
          model.add_row("w1n_u" + uk + "_" + std::to_string(x) + "_" + std::to_string(y),
                        Relation::le, 0.0, neg);
          RowTag tn = tp;
          tn.family = RowFamily::w1_neg;
          build.row_tags.push_back(tn);
        }
      }
      model.add_row("w1b_u" + uk, Relation::le, r_for(k), budget);
      RowTag tb;
      tb.family = RowFamily::w1_budget;
      tb.tuple = static_cast<int>(k);
      build.row_tags.push_back(tb);
    }
  }
}

// --- Coupling ----------------------------------------------------------------

Coupling::Coupling(PathGrid grid, Eigen::VectorXd weights)
    : grid_(std::move(grid)), weights_(std::move(weights)) {
  if (weights_.size() != grid_.num_paths)
    throw input_error("coupling weight vector does not match the path grid");
  double neg = weights_.minCoeff();
  if (neg < -1e-9) throw input_error("coupling has negative weights");
  double total = weights_.sum();
  if (std::abs(total - 1.0) > 1e-7)
    throw input_error("coupling mass " + fmt_double(total) + " is not 1");
}

DiscreteMeasure Coupling::marginal(int t) const {
  const long inner = grid_.strides[t];
  const int n = grid_.size(t);
  const long outer = grid_.num_paths / (inner * n);
  std::vector<std::pair<double, double>> atoms;
  for (int a = 0; a < n; ++a) {
    double s = 0.0;
    for (long pre = 0; pre < outer; ++pre) {
      long base = pre * n * inner + a * inner;
      s += weights_.segment(base, inner).sum();
    }
    atoms.emplace_back(grid_.value(t, a), s);
  }
  return DiscreteMeasure::normalized(std::move(atoms));
}

Eigen::MatrixXd Coupling::pair_marginal(int a, int b) const {
  if (a < 0 || b <= a || b >= times()) throw input_error("pair_marginal: bad time indices");
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(grid_.size(a), grid_.size(b));
  const long sa = grid_.strides[a], sb = grid_.strides[b];
  const int na = grid_.size(a), nb = grid_.size(b);
  const long outer = grid_.num_paths / (sa * na);
  const long mid = sa / (sb * nb);
  for (long pre = 0; pre < outer; ++pre) {
    for (int ia = 0; ia < na; ++ia) {
      long base_a = pre * na * sa + ia * sa;
      for (long m = 0; m < mid; ++m) {
        for (int ib = 0; ib < nb; ++ib) {
          long base_b = base_a + m * nb * sb + ib * sb;
          M(ia, ib) += weights_.segment(base_b, sb).sum();
        }
      }
    }
  }
  return M;
}

double Coupling::expectation(const PayoffExpr& payoff) const {
  const int T = times();
  std::vector<double> buf(T);
  std::vector<int> idx(T, 0);
  for (int t = 0; t < T; ++t) buf[t] = grid_.value(t, 0);
  double s = 0.0;
  for (long p = 0; p < grid_.num_paths; ++p) {
    if (weights_[p] != 0.0) s += weights_[p] * payoff.eval(buf.data(), T);
    for (int t = T - 1; t >= 0; --t) {
      if (++idx[t] < grid_.size(t)) {
        buf[t] = grid_.value(t, idx[t]);
        break;
      }
      idx[t] = 0;
      buf[t] = grid_.value(t, 0);
    }
  }
  return s;
}

void Coupling::write_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw input_error("cannot write " + path);
  const int T = times();
  for (int t = 0; t < T; ++t) out << "x" << (t + 1) << ",";
  out << "weight\n";
  std::vector<int> idx(T, 0);
  for (long p = 0; p < grid_.num_paths; ++p) {
    if (std::abs(weights_[p]) > 1e-15) {
      for (int t = 0; t < T; ++t) out << fmt_double(grid_.value(t, idx[t])) << ',';
      out << fmt_double(weights_[p]) << '\n';
    }
    for (int t = T - 1; t >= 0; --t) {
      if (++idx[t] < grid_.size(t)) break;
      idx[t] = 0;
    }
  }
}

Coupling Coupling::read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw input_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw input_error(path + ": empty coupling file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  int T = 0;
  {
    std::stringstream ss(line);
    std::string col;
    std::vector<std::string> cols;
    while (std::getline(ss, col, ',')) cols.push_back(col);
    if (cols.size() < 3 || cols.back() != "weight")
      throw input_error(path + ": expected header x1,...,xN,weight");
    T = static_cast<int>(cols.size()) - 1;
  }
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    if (static_cast<int>(row.size()) != T + 1)
      throw input_error(path + ": wrong column count");
    rows.push_back(std::move(row));
  }
  // grids = distinct values per column
  PathGrid g;
  for (int t = 0; t < T; ++t) {
    std::vector<double> vals;
    for (const auto& r : rows) vals.push_back(r[t]);
    std::sort(vals.begin(), vals.end());
    std::vector<double> uniq;
    for (double v : vals)
      if (uniq.empty() || !values_equal(uniq.back(), v)) uniq.push_back(v);
    g.values.push_back(Eigen::Map<Eigen::ArrayXd>(uniq.data(), uniq.size()));
  }
  g.strides.assign(T, 1);
  for (int t = T - 2; t >= 0; --t) g.strides[t] = g.strides[t + 1] * g.size(t + 1);
  g.num_paths = g.strides[0] * g.size(0);
  if (g.num_paths > 20000000) throw input_error(path + ": coupling grid too large");
  Eigen::VectorXd w = Eigen::VectorXd::Zero(g.num_paths);
  for (const auto& r : rows) {
    long p = 0;
    for (int t = 0; t < T; ++t) {
      const auto& vals = g.values[t];
      auto it = std::lower_bound(vals.data(), vals.data() + vals.size(),
                                 r[t] - value_merge_tol(r[t]));
      if (it == vals.data() + vals.size() || !values_equal(*it, r[t]))
        throw input_error(path + ": value lookup failed");
      p += (it - vals.data()) * g.strides[t];
    }
    w[p] += r[T];
  }
  return Coupling(std::move(g), std::move(w));
}

// --- homogeneity check / pricing rule ----------------------------------------

HomogeneityReport check_homogeneous(const Coupling& q, const DeltaSet& delta, double tol) {
  HomogeneityReport rep;
  rep.tol = tol;
  std::vector<DiscreteMeasure> marg(q.times());
  for (int t = 0; t < q.times(); ++t) marg[t] = q.marginal(t);
  for (const auto& u : delta) {
    FiniteMeasure th = meet(marg[u.i], marg[u.j]);
    if (th.empty()) continue;
    Eigen::MatrixXd Ps = q.pair_marginal(u.i, u.i + u.tau_i);
    Eigen::MatrixXd Pt = q.pair_marginal(u.j, u.j + u.tau_j);
    std::vector<double> ygrid =
        merge_union(q.grid().values[u.i + u.tau_i], q.grid().values[u.j + u.tau_j]);
    auto ys = index_map(q.grid().values[u.i + u.tau_i], ygrid);
    auto yt = index_map(q.grid().values[u.j + u.tau_j], ygrid);
    for (Eigen::Index s = 0; s < th.size(); ++s) {
      double x = th.values()[s];
      auto locate = [&](int t) {
        const auto& vals = q.grid().values[t];
        for (Eigen::Index ii = 0; ii < vals.size(); ++ii)
          if (values_equal(vals[ii], x)) return ii;
        return Eigen::Index(-1);
      };
      Eigen::Index is = locate(u.i), it = locate(u.j);
      if (is < 0 || it < 0) continue;
      double ms = Ps.row(is).sum(), mt = Pt.row(it).sum();
      if (ms <= 0.0 || mt <= 0.0) continue;
      std::vector<double> row_s(ygrid.size(), 0.0), row_t(ygrid.size(), 0.0);
      for (Eigen::Index y = 0; y < Ps.cols(); ++y) row_s[ys[y]] += Ps(is, y) / ms;
      for (Eigen::Index y = 0; y < Pt.cols(); ++y) row_t[yt[y]] += Pt(it, y) / mt;
      double tv = 0.0;
      for (std::size_t y = 0; y < ygrid.size(); ++y) tv += std::abs(row_s[y] - row_t[y]);
      rep.worst_tv = std::max(rep.worst_tv, tv);
      if (tv > tol) {
        HomViolation v;
        v.tuple = u;
        v.state = x;
        v.tv = tv;
        v.meet_mass = th.weights()[s];
        v.ygrid = ygrid;
        v.row_s = row_s;
        v.row_t = row_t;
        rep.violations.push_back(std::move(v));
      }
    }
  }
  rep.pass = rep.violations.empty();
  return rep;
}

double pricing_rule(const Coupling& q, int s, int tau, double strike, double x) {
  if (s < 0 || tau < 1 || s + tau >= q.times())
    throw input_error("pricing_rule: bad (s, tau)");
  const auto& vals = q.grid().values[s];
  Eigen::Index is = -1;
  for (Eigen::Index i = 0; i < vals.size(); ++i)
    if (values_equal(vals[i], x)) is = i;
  if (is < 0) throw input_error("pricing_rule: x not on the time-s grid");
  Eigen::MatrixXd P = q.pair_marginal(s, s + tau);
  double mass = P.row(is).sum();
  if (mass <= 0.0) throw input_error("pricing_rule: x not in the support of mu_s");
  double price = 0.0;
  for (Eigen::Index y = 0; y < P.cols(); ++y)
    price += std::max(q.grid().value(s + tau, static_cast<int>(y)) - strike, 0.0) *
             P(is, y) / mass;
  return price;
}

// --- feasibility --------------------------------------------------------------

FeasibilityResult feasibility_hom(const std::vector<DiscreteMeasure>& marginals,
                                  bool martingale, long fallback_cap) {
  if (marginals.size() < 2) throw input_error("feasibility_hom needs >= 2 marginals");
  const int T = static_cast<int>(marginals.size());
  FeasibilityResult res;
  // union support (columns) and row states (any time but the last)
  std::vector<double> all, rows_states;
  for (const auto& m : marginals) {
    std::vector<double> merged =
        merge_union(Eigen::Map<const Eigen::ArrayXd>(all.data(), all.size()), m.values());
    all = std::move(merged);
  }
  for (int t = 0; t + 1 < T; ++t) {
    std::vector<double> merged = merge_union(
        Eigen::Map<const Eigen::ArrayXd>(rows_states.data(), rows_states.size()),
        marginals[t].values());
    rows_states = std::move(merged);
  }
  const int U = static_cast<int>(all.size());
  const int R = static_cast<int>(rows_states.size());

  LPModel lp;
  lp.name = "kernel_feasibility";
  for (int r = 0; r < R; ++r)
    for (int y = 0; y < U; ++y)
      lp.add_variable("K_" + std::to_string(r) + "_" + std::to_string(y));
  for (int r = 0; r < R; ++r) {
    std::vector<std::pair<int, double>> row;
    for (int y = 0; y < U; ++y) row.emplace_back(r * U + y, 1.0);
    lp.add_row("stoch_" + std::to_string(r), Relation::eq, 1.0, row);
  }
  std::vector<std::vector<int>> state_row(T);  // per time, atom -> row index
  for (int t = 0; t + 1 < T; ++t)
    state_row[t] = index_map(marginals[t].values(), rows_states);
  for (int t = 0; t + 1 < T; ++t) {
    auto ymap = index_map(marginals[t + 1].values(), all);
    std::vector<double> target(U, 0.0);
    for (Eigen::Index a = 0; a < marginals[t + 1].size(); ++a)
      target[ymap[a]] = marginals[t + 1].weights()[a];
    for (int y = 0; y < U; ++y) {
      std::vector<std::pair<int, double>> row;
      for (Eigen::Index a = 0; a < marginals[t].size(); ++a) {
        int r = state_row[t][a];
        row.emplace_back(r * U + y, marginals[t].weights()[a]);
      }
      lp.add_row("evolve_t" + std::to_string(t) + "_y" + std::to_string(y), Relation::eq,
                 target[y], row);
    }
  }
  if (martingale) {
    for (int r = 0; r < R; ++r) {
      std::vector<std::pair<int, double>> row;
      for (int y = 0; y < U; ++y)
        if (all[y] != 0.0) row.emplace_back(r * U + y, all[y]);
      lp.add_row("mean_" + std::to_string(r), Relation::eq, rows_states[r], row);
    }
  }
  LPSolution sol = solve(lp);
  if (sol.status == SolveStatus::optimal) {
    res.status = FeasibilityStatus::feasible;
    res.certified = true;
    res.method = "kernel-lp";
    res.support = all;
    res.row_states = rows_states;
    res.kernel.resize(R, U);
    for (int r = 0; r < R; ++r)
      for (int y = 0; y < U; ++y) res.kernel(r, y) = sol.primal[r * U + y];
    return res;
  }
  if (!martingale) {
    res.status = FeasibilityStatus::infeasible;
    res.certified = true;
    res.method = "kernel-lp";
    return res;
  }
  // martingale case: the kernel LP is only sufficient; decide on the path space
  ProblemSpec spec;
  spec.grid = TimeGrid::uniform_grid(T);
  spec.marginals = marginals;
  spec.payoff = parse_payoff("0");
  spec.mode = Mode::hmot;
  spec.solver.max_vars = fallback_cap;
  try {
    BuildResult build = build_primal(spec, true);
    LPSolution psol = solve(build.model);
    res.method = "path-lp";
    res.certified = true;
    res.status = psol.status == SolveStatus::optimal ? FeasibilityStatus::feasible
                                                     : FeasibilityStatus::infeasible;
  } catch (const scale_error&) {
    res.status = FeasibilityStatus::undecided;
    res.certified = false;
    res.method = "kernel-lp";
  }
  return res;
}

// --- bounds -------------------------------------------------------------------

namespace {

std::string diagnose_family(const BuildResult& build, const Eigen::VectorXd& phase1) {
  if (phase1.size() == 0) return "unknown";
  std::map<std::string, double> worst;
  for (Eigen::Index i = 0; i < phase1.size(); ++i) {
    const std::string fam = to_string(build.row_tags[i].family);
    worst[fam] = std::max(worst[fam], std::abs(phase1[i]));
  }
  std::string best_fam = "unknown";
  double best = 0.0;
  for (const auto& [fam, v] : worst)
    if (v > best) {
      best = v;
      best_fam = fam;
    }
  return best_fam;
}

}  // namespace

BoundsResult bounds(const ProblemSpec& spec, bool want_inf, bool want_sup) {
  BoundsResult out;
  out.build = build_primal(spec, true);
  SimplexOptions opts;
  opts.max_iterations = spec.solver.max_iterations;
  opts.feas_tol = spec.solver.feas_tol;

  auto run_sense = [&](ObjSense sense, const Basis* warm) -> SenseReport {
    out.build.model.sense = sense;
    SimplexOptions o = opts;
    o.warm_start = warm;
    SenseReport rep;
    rep.solution = solve(out.build.model, o);
    rep.status = rep.solution.status;
    rep.value = rep.solution.objective;
    if (rep.status == SolveStatus::infeasible)
      rep.infeasible_family = diagnose_family(out.build, rep.solution.phase1_row_duals);
    return rep;
  };

  const long P = out.build.grid.num_paths;
  if (want_sup) {
    out.sup = run_sense(ObjSense::maximize, nullptr);
    if (out.sup->status == SolveStatus::optimal) {
      out.sup_coupling = Coupling(out.build.grid,
                                  out.sup->solution.primal.head(P).cwiseMax(0.0));
      out.duality_gap_sup = std::abs(out.sup->solution.objective -
                                     out.sup->solution.dual_objective) /
                            (1.0 + std::abs(out.sup->solution.objective));
    }
  }
  if (want_inf) {
    const Basis* warm =
        (out.sup && out.sup->status == SolveStatus::optimal) ? &out.sup->solution.basis
                                                             : nullptr;
    out.inf = run_sense(ObjSense::minimize, warm);
    if (out.inf->status == SolveStatus::optimal) {
      out.inf_coupling = Coupling(out.build.grid,
                                  out.inf->solution.primal.head(P).cwiseMax(0.0));
      out.duality_gap_inf = std::abs(out.inf->solution.objective -
                                     out.inf->solution.dual_objective) /
                            (1.0 + std::abs(out.inf->solution.objective));
    }
  }
  return out;
}

}  // namespace homot

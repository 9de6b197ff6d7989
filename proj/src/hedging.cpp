#include "homot/hedging.hpp"

#include "homot/format.hpp"

#include <json.hpp>

#include <cmath>
#include <random>

namespace homot {

HedgePortfolio extract_portfolio(const BuildResult& build, const LPSolution& solution,
                                 const ProblemSpec& spec) {
  if (solution.status != SolveStatus::optimal)
    throw input_error("portfolio extraction needs an optimal solution, got " +
                      to_string(solution.status));
  if (spec.mode != Mode::ot && spec.mode != Mode::mot && spec.mode != Mode::hmot)
    throw input_error("portfolio extraction supports ot|mot|hmot modes");

  HedgePortfolio p;
  p.superhedge = solution.sense == ObjSense::maximize;
  p.pairwise = spec.solver.pairwise_martingale;
  p.grid = build.grid;
  p.tuples = build.tuples;
  const int T = build.grid.times();
  p.h.resize(T);
  for (int t = 0; t < T; ++t) p.h[t] = Eigen::ArrayXd::Zero(build.grid.size(t));
  if (spec.mode != Mode::ot) {
    p.theta.resize(T - 1);
    for (int t = 0; t + 1 < T; ++t) {
      long prefixes = p.pairwise ? build.grid.size(t)
                                 : build.grid.num_paths / build.grid.strides[t];
      p.theta[t] = Eigen::ArrayXd::Zero(prefixes);
    }
  }
  p.g.resize(build.tuples.size());
  p.dtheta_dmu_s.resize(build.tuples.size());
  p.dtheta_dmu_t.resize(build.tuples.size());
  for (std::size_t k = 0; k < build.tuples.size(); ++k) {
    const auto& ts = build.tuples[k];
    p.g[k] = Eigen::MatrixXd::Zero(ts.states.size(), ts.ygrid.size());
    p.dtheta_dmu_s[k] = Eigen::ArrayXd::Zero(ts.states.size());
    p.dtheta_dmu_t[k] = Eigen::ArrayXd::Zero(ts.states.size());
    for (std::size_t x = 0; x < ts.states.size(); ++x) {
      p.dtheta_dmu_s[k][x] = ts.theta[x] / ts.mu_s[x];
      p.dtheta_dmu_t[k][x] = ts.theta[x] / ts.mu_t[x];
    }
  }

  for (int row = 0; row < build.model.num_rows(); ++row) {
    const RowTag& tag = build.row_tags[row];
    double y = solution.row_duals[row];
    switch (tag.family) {
      case RowFamily::marginal: p.h[tag.t][tag.atom] = y; break;
      case RowFamily::martingale:
        p.theta[tag.t][p.pairwise ? tag.atom : tag.prefix] = y;
        break;
      case RowFamily::homogeneity: {
        const auto& ts = build.tuples[tag.tuple];
        // division-free row dual -> Theorem form: g = y mu_s(x) mu_t(x) / theta(x)
        p.g[tag.tuple](tag.x, tag.y) =
            y * ts.mu_s[tag.x] * ts.mu_t[tag.x] / ts.theta[tag.x];
        break;
      }
      default:
        throw input_error("portfolio extraction hit unsupported row family " +
                          to_string(tag.family));
    }
  }
  return p;
}

double portfolio_cost(const HedgePortfolio& p, const std::vector<DiscreteMeasure>& marginals) {
  if (marginals.size() != p.h.size())
    throw input_error("portfolio_cost: marginal count mismatch");
  double cost = 0.0;
  for (std::size_t t = 0; t < marginals.size(); ++t) {
    if (marginals[t].size() != p.h[t].size())
      throw input_error("portfolio_cost: h table at time " + std::to_string(t + 1) +
                        " misses atoms");
    for (Eigen::Index a = 0; a < marginals[t].size(); ++a) {
      if (!values_equal(marginals[t].values()[a], p.grid.value(static_cast<int>(t),
                                                               static_cast<int>(a))))
        throw input_error("portfolio_cost: atom mismatch at time " + std::to_string(t + 1));
      cost += p.h[t][a] * marginals[t].weights()[a];
    }
  }
  return cost;
}

namespace {

struct TupleEval {
  std::vector<int> state_s, state_t, y_s, y_t;
};

double hedge_value(const HedgePortfolio& p, const std::vector<int>& idx,
                   const std::vector<double>& vals, const std::vector<TupleEval>& maps,
                   const std::vector<long>& prefix_strides) {
  const int T = p.grid.times();
  double hv = 0.0;
  for (int t = 0; t < T; ++t) hv += p.h[t][idx[t]];
  for (int t = 0; t + 1 < T; ++t) {
    if (p.theta.empty()) break;
    double pos;
    if (p.pairwise) {
      pos = p.theta[t][idx[t]];
    } else {
      long prefix = 0;
      for (int u = 0; u <= t; ++u) prefix += idx[u] * prefix_strides[t * T + u];
      pos = p.theta[t][prefix];
    }
    hv += pos * (vals[t + 1] - vals[t]);
  }
  for (std::size_t k = 0; k < p.tuples.size(); ++k) {
    const auto& ts = p.tuples[k];
    if (ts.states.empty()) continue;
    const auto& u = ts.tuple;
    int xs = maps[k].state_s[idx[u.i]];
    if (xs >= 0)
      hv += p.g[k](xs, maps[k].y_s[idx[u.i + u.tau_i]]) * p.dtheta_dmu_s[k][xs];
    int xt = maps[k].state_t[idx[u.j]];
    if (xt >= 0)
      hv -= p.g[k](xt, maps[k].y_t[idx[u.j + u.tau_j]]) * p.dtheta_dmu_t[k][xt];
  }
  return hv;
}

std::vector<int> value_index_map(const Eigen::ArrayXd& atoms, const std::vector<double>& where) {
  std::vector<int> idx(atoms.size(), -1);
  std::size_t j = 0;
  for (Eigen::Index i = 0; i < atoms.size(); ++i) {
    while (j < where.size() && where[j] < atoms[i] && !values_equal(where[j], atoms[i])) ++j;
    if (j < where.size() && values_equal(where[j], atoms[i])) idx[i] = static_cast<int>(j);
  }
  return idx;
}

}  // namespace

VerifyReport verify_superhedge(const HedgePortfolio& p, const ProblemSpec& spec, double tol,
                               long exhaustive_cap) {
  VerifyReport rep;
  rep.tol = tol;
  const int T = p.grid.times();
  if (spec.grid.size() != T) throw input_error("verify: grid length mismatch");
  for (int t = 0; t < T; ++t) {
    if (spec.marginals[t].size() != p.grid.values[t].size())
      throw input_error("verify: marginal grid mismatch at time " + std::to_string(t + 1));
  }

  std::vector<TupleEval> maps(p.tuples.size());
  for (std::size_t k = 0; k < p.tuples.size(); ++k) {
    const auto& ts = p.tuples[k];
    const auto& u = ts.tuple;
    maps[k].state_s = value_index_map(p.grid.values[u.i], ts.states);
    maps[k].state_t = value_index_map(p.grid.values[u.j], ts.states);
    maps[k].y_s = value_index_map(p.grid.values[u.i + u.tau_i], ts.ygrid);
    maps[k].y_t = value_index_map(p.grid.values[u.j + u.tau_j], ts.ygrid);
  }
  // prefix strides for the full-history tables: prefix(t) = sum idx[u] * stride
  std::vector<long> prefix_strides(static_cast<std::size_t>(T) * T, 0);
  for (int t = 0; t + 1 < T; ++t) {
    long s = 1;
    for (int u = t; u >= 0; --u) {
      prefix_strides[t * T + u] = s;
      s *= p.grid.size(u);
    }
  }

  const long P = p.grid.num_paths;
  rep.exhaustive = P <= exhaustive_cap;
  long checked = 0, active = 0;
  rep.min_slack = std::numeric_limits<double>::infinity();
  std::vector<int> idx(T, 0);
  std::vector<double> vals(T);

  auto eval_path = [&] {
    for (int t = 0; t < T; ++t) vals[t] = p.grid.value(t, idx[t]);
    double f = spec.payoff.valid() ? spec.payoff.eval(vals.data(), T) : 0.0;
    double hv = hedge_value(p, idx, vals, maps, prefix_strides);
    double slack = p.superhedge ? hv - f : f - hv;
    ++checked;
    if (slack <= tol) ++active;
    if (slack < rep.min_slack) {
      rep.min_slack = slack;
      rep.argmin_path = vals;
    }
  };

  if (rep.exhaustive) {
    for (long q = 0; q < P; ++q) {
      eval_path();
      for (int t = T - 1; t >= 0; --t) {
        if (++idx[t] < p.grid.size(t)) break;
        idx[t] = 0;
      }
    }
  } else {
    rep.sample_seed = 0x5eed0001u;
    std::mt19937_64 rng(rep.sample_seed);
    const long samples = exhaustive_cap;
    for (long s = 0; s < samples; ++s) {
      long q = static_cast<long>(rng() % static_cast<std::uint64_t>(P));
      for (int t = 0; t < T; ++t) idx[t] = p.grid.coord(q, t);
      eval_path();
    }
  }
  rep.paths_checked = checked;
  rep.active_fraction = checked ? double(active) / double(checked) : 0.0;
  rep.pass = rep.min_slack >= -tol;
  return rep;
}

std::string portfolio_to_json(const HedgePortfolio& p) {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["kind"] = p.superhedge ? "superhedge" : "subhedge";
  j["pairwise"] = p.pairwise;
  for (std::size_t t = 0; t < p.h.size(); ++t) {
    nlohmann::json table;
    for (Eigen::Index a = 0; a < p.h[t].size(); ++a)
      table.push_back({p.grid.value(static_cast<int>(t), static_cast<int>(a)), p.h[t][a]});
    j["h"].push_back({{"t", t + 1}, {"atoms", table}});
  }
  j["theta"] = nlohmann::json::array();
  for (std::size_t t = 0; t < p.theta.size(); ++t) {
    nlohmann::json entries = nlohmann::json::array();
    if (p.pairwise) {
      for (Eigen::Index a = 0; a < p.theta[t].size(); ++a)
        entries.push_back({{"state", p.grid.value(static_cast<int>(t), static_cast<int>(a))},
                           {"position", p.theta[t][a]}});
    } else {
      // enumerate history prefixes (times 1..t+1)
      std::vector<int> idx(t + 1, 0);
      for (long q = 0; q < p.theta[t].size(); ++q) {
        nlohmann::json prefix = nlohmann::json::array();
        for (std::size_t u = 0; u <= t; ++u)
          prefix.push_back(p.grid.value(static_cast<int>(u), idx[u]));
        entries.push_back({{"prefix", prefix}, {"position", p.theta[t][q]}});
        for (int u = static_cast<int>(t); u >= 0; --u) {
          if (++idx[u] < p.grid.size(u)) break;
          idx[u] = 0;
        }
      }
    }
    j["theta"].push_back({{"t", t + 1}, {"entries", entries}});
  }
  j["g"] = nlohmann::json::array();
  for (std::size_t k = 0; k < p.tuples.size(); ++k) {
    const auto& ts = p.tuples[k];
    nlohmann::json entries = nlohmann::json::array();
    for (std::size_t x = 0; x < ts.states.size(); ++x)
      for (std::size_t y = 0; y < ts.ygrid.size(); ++y)
        if (p.g[k](x, y) != 0.0)
          entries.push_back({ts.states[x], ts.ygrid[y], p.g[k](x, y)});
    nlohmann::json dens_s = nlohmann::json::array(), dens_t = nlohmann::json::array();
    for (std::size_t x = 0; x < ts.states.size(); ++x) {
      dens_s.push_back({ts.states[x], p.dtheta_dmu_s[k][x]});
      dens_t.push_back({ts.states[x], p.dtheta_dmu_t[k][x]});
    }
    j["g"].push_back({{"tuple",
                       {{"s", ts.tuple.i + 1},
                        {"t", ts.tuple.j + 1},
                        {"tau_s", ts.tuple.tau_i},
                        {"tau_t", ts.tuple.tau_j}}},
                      {"entries", entries},
                      {"dtheta_dmu_s", dens_s},
                      {"dtheta_dmu_t", dens_t}});
  }
  return j.dump(2);
}

std::string verify_report_to_json(const VerifyReport& r) {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["pass"] = r.pass;
  j["min_slack"] = r.min_slack;
  j["argmin_path"] = r.argmin_path;
  j["active_fraction"] = r.active_fraction;
  j["exhaustive"] = r.exhaustive;
  j["paths_checked"] = r.paths_checked;
  if (!r.exhaustive) j["sample_seed"] = r.sample_seed;
  j["tol"] = r.tol;
  return j.dump(2);
}

}  // namespace homot

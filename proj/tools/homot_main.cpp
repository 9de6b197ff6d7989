// homot: robust price bounds for path-dependent payoffs under marginal,
// martingale and time-homogeneity constraints.
#include "homot/config.hpp"
#include "homot/format.hpp"
#include "homot/hedging.hpp"
#include "homot/lp_io.hpp"
#include "homot/penalized.hpp"
#include "homot/transport.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <fstream>
#include <future>
#include <iostream>
#include <sstream>

namespace {

using homot::fmt_double;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitFail = 1;        // failed check (homogeneity, hedge slack)
constexpr int kExitInfeasible = 2;
constexpr int kExitScale = 3;
constexpr int kExitInput = 4;

struct CommonFlags {
  std::string config;
  std::string sense = "both";
  std::string mode;    // override
  std::string metric;  // override
  std::vector<double> r;
  std::string out;
  double tol = 1e-7;
};

homot::LoadedProblem load_with_overrides(const CommonFlags& f) {
  homot::LoadedProblem lp = homot::load_problem(f.config);
  if (!f.mode.empty()) lp.spec.mode = homot::mode_from_string(f.mode);
  if (!f.metric.empty()) lp.spec.metric = homot::metric_from_string(f.metric);
  if (!f.r.empty()) {
    lp.spec.r = f.r;
    lp.pen.r = f.r;
  }
  if (f.sense != "both") lp.spec.sense = homot::sense_from_string(f.sense);
  return lp;
}

json warnings_json(const std::vector<std::string>& warnings) {
  json arr = json::array();
  for (const auto& w : warnings) {
    std::string code = "general";
    if (w.find("convex order") != std::string::npos) code = "convex-order";
    if (w.find("homogeneity vacuous") != std::string::npos) code = "homogeneity-vacuous";
    arr.push_back({{"code", code}, {"message", w}});
  }
  return arr;
}

json stats_json(const homot::LPSolution& sol) {
  return {{"iterations", sol.stats.iterations},
          {"phase1_iterations", sol.stats.phase1_iterations},
          {"refactorizations", sol.stats.refactorizations},
          {"condition_estimate", sol.stats.condition_estimate},
          {"primal_residual", sol.primal_residual},
          {"dual_residual", sol.dual_residual},
          {"complementary_slackness", sol.comp_slack_residual}};
}

void write_output(const std::string& out, const std::string& text) {
  if (out.empty() || out == "-") {
    std::cout << text << std::endl;
    return;
  }
  std::ofstream o(out);
  if (!o) throw homot::input_error("cannot write " + out);
  o << text;
}

int cmd_bounds(const CommonFlags& flags) {
  auto lp = load_with_overrides(flags);
  bool want_inf = flags.sense != "sup";
  bool want_sup = flags.sense != "inf";
  auto t0 = std::chrono::steady_clock::now();
  homot::BoundsResult res = homot::bounds(lp.spec, want_inf, want_sup);
  double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                  .count();

  json rep;
  rep["schema_version"] = 1;
  rep["command"] = "bounds";
  rep["config"] = lp.name;
  rep["mode"] = to_string(lp.spec.mode);
  rep["sense"] = flags.sense;
  json values, status, gaps, stats;
  bool any_infeasible = false, all_optimal = true;
  auto record = [&](const char* key, const std::optional<homot::SenseReport>& r, double gap) {
    if (!r) return;
    status[key] = to_string(r->status);
    if (r->status == homot::SolveStatus::optimal) {
      values[key] = r->value;
      gaps[key] = gap;
    } else {
      all_optimal = false;
      if (r->status == homot::SolveStatus::infeasible) {
        any_infeasible = true;
        rep["infeasible_family"] = r->infeasible_family;
      }
    }
    stats[key] = stats_json(r->solution);
  };
  record("inf", res.inf, res.duality_gap_inf);
  record("sup", res.sup, res.duality_gap_sup);
  rep["status"] = status;
  rep["values"] = values;
  rep["duality_gap"] = gaps;
  rep["solver_stats"] = stats;
  rep["warnings"] = warnings_json(res.build.warnings);
  rep["timing_ms"] = ms;  // excluded from the determinism guarantee
  write_output(flags.out, rep.dump(2));
  if (any_infeasible) return kExitInfeasible;
  return all_optimal ? kExitOk : kExitFail;
}

int cmd_sweep(const CommonFlags& flags, std::vector<int> steps, int jobs) {
  auto lp = load_with_overrides(flags);
  const int T = lp.spec.grid.size();
  if (steps.empty()) {
    for (int k = 2; k <= T; ++k) steps.push_back(k);
  }
  std::sort(steps.begin(), steps.end());
  for (int k : steps)
    if (k < 2 || k > T)
      throw homot::input_error("sweep steps must lie in [2, " + std::to_string(T) + "]");

  struct Row {
    int k;
    bool solved = false;
    double mot_inf = 0, mot_sup = 0, hmot_inf = 0, hmot_sup = 0;
    std::string note;
  };
  auto solve_k = [&](int k) -> Row {
    Row row;
    row.k = k;
    homot::ProblemSpec sub;
    std::vector<long> labels(lp.spec.grid.labels().end() - k, lp.spec.grid.labels().end());
    sub.grid = homot::TimeGrid(labels);
    sub.marginals.assign(lp.spec.marginals.end() - k, lp.spec.marginals.end());
    sub.payoff = homot::parse_payoff("pos(S" + std::to_string(k) + " - S" +
                                     std::to_string(k - 1) + ")");
    sub.solver = lp.spec.solver;
    try {
      sub.mode = homot::Mode::mot;
      auto mot = homot::bounds(sub, true, true);
      sub.mode = homot::Mode::hmot;
      auto hmot = homot::bounds(sub, true, true);
      if (mot.inf->status != homot::SolveStatus::optimal ||
          mot.sup->status != homot::SolveStatus::optimal ||
          hmot.inf->status != homot::SolveStatus::optimal ||
          hmot.sup->status != homot::SolveStatus::optimal) {
        row.note = "not optimal";
        return row;
      }
      row.mot_inf = mot.inf->value;
      row.mot_sup = mot.sup->value;
      row.hmot_inf = hmot.inf->value;
      row.hmot_sup = hmot.sup->value;
      row.solved = true;
    } catch (const homot::scale_error& e) {
      // too large to solve internally: emit exports instead
      for (auto mode : {homot::Mode::mot, homot::Mode::hmot}) {
        sub.mode = mode;
        homot::BuildResult build = homot::build_primal(sub, false);
        auto exp = homot::export_model(build.model, homot::ExportFormat::mps);
        std::string stem = (flags.out.empty() ? std::string("sweep") : flags.out) + ".k" +
                           std::to_string(k) + "." + to_string(mode);
        std::ofstream(stem + ".mps") << exp.text;
        std::ofstream(stem + ".names") << exp.name_map;
      }
      row.note = e.what();
    }
    return row;
  };

  std::vector<Row> rows(steps.size());
  if (jobs <= 1) {
    for (std::size_t i = 0; i < steps.size(); ++i) rows[i] = solve_k(steps[i]);
  } else {
    for (std::size_t base = 0; base < steps.size(); base += jobs) {
      std::vector<std::future<Row>> batch;
      for (std::size_t i = base; i < std::min(base + jobs, steps.size()); ++i)
        batch.push_back(std::async(std::launch::async, solve_k, steps[i]));
      for (std::size_t i = 0; i < batch.size(); ++i) rows[base + i] = batch[i].get();
    }
  }

  std::ostringstream csv;
  csv << "k,mot_inf,mot_sup,hmot_inf,hmot_sup\n";
  for (const auto& row : rows) {
    csv << row.k << ",";
    if (row.solved) {
      csv << fmt_double(row.mot_inf) << ',' << fmt_double(row.mot_sup) << ','
          << fmt_double(row.hmot_inf) << ',' << fmt_double(row.hmot_sup);
    } else {
      csv << ",,,";
      std::cerr << "k=" << row.k << ": " << row.note << "\n";
    }
    csv << '\n';
  }
  write_output(flags.out, csv.str());
  return kExitOk;
}

int cmd_check_hom(const CommonFlags& flags, const std::string& coupling_path) {
  auto lp = load_with_overrides(flags);
  homot::Coupling q = homot::Coupling::read_csv(coupling_path);
  if (q.times() != lp.spec.grid.size())
    throw homot::input_error("coupling has " + std::to_string(q.times()) +
                             " time points but the config grid has " +
                             std::to_string(lp.spec.grid.size()));
  auto delta = homot::build_delta(lp.spec.grid);
  auto rep = homot::check_homogeneous(q, delta, flags.tol);
  json out;
  out["schema_version"] = 1;
  out["command"] = "check-hom";
  out["pass"] = rep.pass;
  out["tol"] = rep.tol;
  out["worst_tv"] = rep.worst_tv;
  json viol = json::array();
  for (const auto& v : rep.violations) {
    viol.push_back({{"tuple", {v.tuple.i + 1, v.tuple.j + 1, v.tuple.tau_i, v.tuple.tau_j}},
                    {"state", v.state},
                    {"tv", v.tv},
                    {"meet_mass", v.meet_mass},
                    {"ygrid", v.ygrid},
                    {"kernel_row_s", v.row_s},
                    {"kernel_row_t", v.row_t}});
  }
  out["violations"] = viol;
  write_output(flags.out, out.dump(2));
  return rep.pass ? kExitOk : kExitFail;
}

int cmd_hedge(const CommonFlags& flags, const std::string& portfolio_out) {
  auto lp = load_with_overrides(flags);
  bool sup = flags.sense != "inf";
  homot::BoundsResult res = homot::bounds(lp.spec, !sup, sup);
  const auto& rep = sup ? res.sup : res.inf;
  if (!rep || rep->status != homot::SolveStatus::optimal) {
    std::cerr << "solve status: " << (rep ? to_string(rep->status) : "missing") << "\n";
    return rep && rep->status == homot::SolveStatus::infeasible ? kExitInfeasible
                                                                : kExitFail;
  }
  homot::HedgePortfolio p = homot::extract_portfolio(res.build, rep->solution, lp.spec);
  double cost = homot::portfolio_cost(p, lp.spec.marginals);
  auto verify = homot::verify_superhedge(p, lp.spec, flags.tol);
  json out;
  out["schema_version"] = 1;
  out["command"] = "hedge";
  out["sense"] = sup ? "sup" : "inf";
  out["value"] = rep->value;
  out["portfolio_cost"] = cost;
  out["dual_gap"] = homot::dual_gap(rep->value, cost);
  out["verification"] = json::parse(homot::verify_report_to_json(verify));
  write_output(flags.out, out.dump(2));
  if (!portfolio_out.empty()) write_output(portfolio_out, homot::portfolio_to_json(p));
  return verify.pass ? kExitOk : kExitFail;
}

int cmd_export(const CommonFlags& flags, const std::string& format) {
  auto lp = load_with_overrides(flags);
  homot::BuildResult build = homot::build_primal(lp.spec, false);
  auto exp = homot::export_model(build.model, homot::export_format_from_string(format));
  std::string out = flags.out.empty() ? lp.name + (format == "mps" ? ".mps" : ".lp") : flags.out;
  write_output(out, exp.text);
  if (!exp.name_map.empty()) write_output(out + ".names", exp.name_map);
  std::cout << "variables: " << build.model.num_vars()
            << "\nrows: " << build.model.num_rows() << "\nwritten: " << out << std::endl;
  return kExitOk;
}

int cmd_pen(const CommonFlags& flags, std::vector<double> r_grid) {
  auto lp = load_with_overrides(flags);
  lp.spec.mode = homot::Mode::pen_hmot;
  if (r_grid.empty()) {
    if (lp.pen.r.empty()) throw homot::input_error("pen: provide --r or --r-grid");
    r_grid = {lp.pen.r[0]};
  }
  std::ostringstream csv;
  csv << "r,value,fw_gap,iterations,converged\n";
  for (std::size_t i = 0; i < r_grid.size(); ++i) {
    homot::PenaltyConfig cfg = lp.pen;
    cfg.r = {r_grid[i]};
    lp.spec.r = cfg.r;
    homot::PenResult res = homot::solve_pen_hmot(lp.spec, cfg);
    csv << fmt_double(r_grid[i]) << ',' << fmt_double(res.value) << ','
        << fmt_double(res.final_gap) << ',' << res.iterations << ','
        << (res.converged ? 1 : 0) << '\n';
    if (!flags.out.empty() && flags.out != "-") {
      std::ofstream trace(flags.out + ".r" + std::to_string(i) + ".trace.csv");
      trace << "iter,objective,fw_gap,step\n";
      for (const auto& row : res.trace)
        trace << row.iter << ',' << fmt_double(row.objective) << ','
              << fmt_double(row.fw_gap) << ',' << fmt_double(row.step) << '\n';
    }
  }
  write_output(flags.out, csv.str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"homogeneous martingale optimal transport price bounds"};
  app.require_subcommand(1);

  CommonFlags flags;
  std::vector<int> steps;
  int jobs = 1;
  std::string coupling_path, portfolio_out, format = "mps";
  std::vector<double> r_grid;

  auto add_common = [&](CLI::App* cmd, bool needs_config = true) {
    auto* opt = cmd->add_option("--config", flags.config, "problem config (JSON)");
    if (needs_config) opt->required();
    cmd->add_option("--sense", flags.sense, "inf|sup|both")->default_val("both");
    cmd->add_option("--mode", flags.mode, "override config mode: ot|mot|hmot|hmot2|rhmot|pen");
    cmd->add_option("--metric", flags.metric, "r-homogeneity metric: tv|w1");
    cmd->add_option("--r", flags.r, "r values (scalar or per tuple)");
    cmd->add_option("--out", flags.out, "output file ('-' = stdout)");
    cmd->add_option("--tol", flags.tol, "check tolerance")->default_val(1e-7);
  };

  auto* bounds_cmd = app.add_subcommand("bounds", "solve for price bounds");
  add_common(bounds_cmd);

  auto* sweep_cmd = app.add_subcommand("sweep", "marginal-count sweep (forward start)");
  add_common(sweep_cmd);
  sweep_cmd->add_option("--steps", steps, "time-step counts (default: all)");
  sweep_cmd->add_option("--jobs", jobs, "concurrent solves")->default_val(1);

  auto* check_cmd = app.add_subcommand("check-hom", "check a coupling for homogeneity");
  add_common(check_cmd);
  check_cmd->add_option("--coupling", coupling_path, "coupling CSV")->required();

  auto* hedge_cmd = app.add_subcommand("hedge", "extract and verify the dual portfolio");
  add_common(hedge_cmd);
  hedge_cmd->add_option("--portfolio", portfolio_out, "portfolio JSON output path");

  auto* export_cmd = app.add_subcommand("export", "write the LP to MPS or LP text");
  add_common(export_cmd);
  export_cmd->add_option("--export-format", format, "mps|lp")->default_val("mps");

  auto* pen_cmd = app.add_subcommand("pen", "Gini-penalized bounds via Frank-Wolfe");
  add_common(pen_cmd);
  pen_cmd->add_option("--r-grid", r_grid, "penalty radii to sweep");

  CLI11_PARSE(app, argc, argv);

  try {
    if (bounds_cmd->parsed()) return cmd_bounds(flags);
    if (sweep_cmd->parsed()) return cmd_sweep(flags, steps, jobs);
    if (check_cmd->parsed()) return cmd_check_hom(flags, coupling_path);
    if (hedge_cmd->parsed()) return cmd_hedge(flags, portfolio_out);
    if (export_cmd->parsed()) return cmd_export(flags, format);
    if (pen_cmd->parsed()) return cmd_pen(flags, r_grid);
  } catch (const homot::scale_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitScale;
  } catch (const homot::input_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFail;
  }
  return kExitInput;
}

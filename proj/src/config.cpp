#include "homot/config.hpp"

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>

namespace homot {

namespace {

using nlohmann::json;

[[noreturn]] void field_error(const std::string& path, const std::string& what) {
  throw input_error("config field " + path + ": " + what);
}

const json& need(const json& j, const std::string& key, const std::string& path) {
  auto it = j.find(key);
  if (it == j.end()) field_error(path + "." + key, "missing");
  return *it;
}

double need_num(const json& j, const std::string& key, const std::string& path) {
  const json& v = need(j, key, path);
  if (!v.is_number()) field_error(path + "." + key, "expected a number");
  return v.get<double>();
}

std::string resolve(const std::string& dir, const std::string& rel) {
  std::filesystem::path p(rel);
  if (p.is_absolute()) return rel;
  return (std::filesystem::path(dir) / p).string();
}

DiscreteMeasure parse_marginal(const json& j, const std::string& path,
                               const std::string& dir) {
  if (!j.is_object()) field_error(path, "expected an object");
  if (j.contains("atoms")) {
    const json& a = j["atoms"];
    if (!a.is_array()) field_error(path + ".atoms", "expected [[value, weight], ...]");
    std::vector<std::pair<double, double>> atoms;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (!a[i].is_array() || a[i].size() != 2)
        field_error(path + ".atoms[" + std::to_string(i) + "]", "expected [value, weight]");
      atoms.emplace_back(a[i][0].get<double>(), a[i][1].get<double>());
    }
    return DiscreteMeasure::normalized(std::move(atoms));
  }
  if (j.contains("csv")) return read_measure_csv(resolve(dir, j["csv"].get<std::string>()));
  if (j.contains("calls")) {
    const json& c = j["calls"];
    if (c.is_string()) {
      std::vector<double> strikes, prices;
      read_call_quotes_csv(resolve(dir, c.get<std::string>()), strikes, prices);
      return from_call_quotes(strikes, prices);
    }
    std::vector<double> strikes, prices;
    for (const auto& v : need(c, "strikes", path + ".calls")) strikes.push_back(v.get<double>());
    for (const auto& v : need(c, "prices", path + ".calls")) prices.push_back(v.get<double>());
    return from_call_quotes(strikes, prices);
  }
  if (j.contains("lognormal")) {
    const json& l = j["lognormal"];
    return quantize_lognormal(need_num(l, "x0", path + ".lognormal"),
                              need_num(l, "sigma", path + ".lognormal"),
                              need_num(l, "t", path + ".lognormal"),
                              static_cast<int>(need_num(l, "n", path + ".lognormal")));
  }
  if (j.contains("uniform_band")) {
    const json& u = j["uniform_band"];
    double step = u.contains("step") ? u["step"].get<double>() : 2.0;
    return uniform_band(static_cast<int>(need_num(u, "t", path + ".uniform_band")),
                        need_num(u, "center", path + ".uniform_band"), step);
  }
  field_error(path, "need one of atoms|csv|calls|lognormal|uniform_band");
}

}  // namespace

LoadedProblem parse_problem_json(const std::string& text, const std::string& config_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw input_error(std::string("config is not valid JSON: ") + e.what());
  }
  LoadedProblem out;
  out.config_dir = config_dir;
  ProblemSpec& spec = out.spec;

  {
    const json& g = need(j, "grid", "config");
    if (!g.is_array() || g.size() < 2) field_error("config.grid", "expected >= 2 labels");
    std::vector<long> labels;
    for (const auto& v : g) labels.push_back(v.get<long>());
    spec.grid = TimeGrid(std::move(labels));
  }
  {
    const json& ms = need(j, "marginals", "config");
    if (!ms.is_array()) field_error("config.marginals", "expected an array");
    for (std::size_t i = 0; i < ms.size(); ++i)
      spec.marginals.push_back(
          parse_marginal(ms[i], "config.marginals[" + std::to_string(i) + "]", config_dir));
  }
  if (j.contains("common_grid")) {
    const json& cg = j["common_grid"];
    auto grid = linspace(need_num(cg, "lo", "config.common_grid"),
                         need_num(cg, "hi", "config.common_grid"),
                         static_cast<int>(need_num(cg, "points", "config.common_grid")));
    for (auto& m : spec.marginals) m = project_to_grid(m, grid);
  }
  {
    const json& p = need(j, "payoff", "config");
    if (!p.is_string()) field_error("config.payoff", "expected a string");
    try {
      spec.payoff = parse_payoff(p.get<std::string>());
    } catch (const parse_error& e) {
      field_error("config.payoff", e.what());
    }
  }
  if (j.contains("mode")) spec.mode = mode_from_string(j["mode"].get<std::string>());
  if (j.contains("sense")) {
    std::string s = j["sense"].get<std::string>();
    if (s != "both") spec.sense = sense_from_string(s);
  }
  if (j.contains("metric")) spec.metric = metric_from_string(j["metric"].get<std::string>());
  if (j.contains("r")) {
    const json& r = j["r"];
    if (r.is_number()) {
      spec.r = {r.get<double>()};
    } else if (r.is_array()) {
      for (const auto& v : r) spec.r.push_back(v.get<double>());
    } else {
      field_error("config.r", "expected a number or an array");
    }
  }
  if (j.contains("solver")) {
    const json& s = j["solver"];
    if (s.contains("max_vars")) spec.solver.max_vars = s["max_vars"].get<long>();
    if (s.contains("max_iterations"))
      spec.solver.max_iterations = s["max_iterations"].get<long>();
    if (s.contains("feas_tol")) spec.solver.feas_tol = s["feas_tol"].get<double>();
    if (s.contains("pairwise")) spec.solver.pairwise_martingale = s["pairwise"].get<bool>();
  }
  if (const char* env = std::getenv("HMOT_MAX_VARS")) {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end && *end == '\0' && v > 0) spec.solver.max_vars = v;
  }
  out.pen.r = spec.r;
  if (j.contains("pen")) {
    const json& p = j["pen"];
    if (p.contains("max_iterations")) out.pen.max_iterations = p["max_iterations"].get<int>();
    if (p.contains("gap_tol")) out.pen.gap_tol_rel = p["gap_tol"].get<double>();
  }
  spec.validate();
  return out;
}

LoadedProblem load_problem(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw input_error("cannot open config " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::filesystem::path p(path);
  LoadedProblem out = parse_problem_json(text, p.parent_path().string());
  out.name = p.stem().string();
  return out;
}

}  // namespace homot

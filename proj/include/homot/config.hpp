#pragma once

#include "homot/penalized.hpp"
#include "homot/problem.hpp"

#include <string>

namespace homot {

struct LoadedProblem {
  ProblemSpec spec;
  PenaltyConfig pen;      // populated for pen mode (r shared with spec.r)
  std::string name;       // config file stem
  std::string config_dir; // for resolving relative CSV paths
};

// Reads a JSON problem config. Field errors name the offending path
// ("marginals[2].lognormal.sigma"). HMOT_MAX_VARS overrides solver.max_vars.
LoadedProblem load_problem(const std::string& path);
LoadedProblem parse_problem_json(const std::string& text, const std::string& config_dir);

}  // namespace homot

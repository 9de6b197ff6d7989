#pragma once

#include "homot/transport.hpp"

#include <vector>

namespace homot {

struct PenaltyConfig {
  std::vector<double> r;        // per-tuple weights (scalar broadcasts); must be > 0
  int max_iterations = 2000;
  double gap_tol_rel = 1e-5;    // stop when fw_gap <= tol * (1 + |value|)
  double armijo_c = 1e-4;
  double shrink = 0.5;
};

// Mass-corrected discrete Gini index: sum nu(x)^2/mu(x) - (sum nu)^2/(sum mu),
// +inf when nu is not absolutely continuous w.r.t. mu (0^2/0 counts as 0).
// Coincides with the density formulation int (dnu/dmu)^2 dmu - 1 for
// probability pairs.
double gini(const FiniteMeasure& nu, const FiniteMeasure& mu);

// E^Q[f] minus the per-tuple Gini penalties (sup orientation); -inf when a
// penalty term is infinite. Requires the coupling marginals to match the spec
// marginals within 1e-7.
double pen_objective(const Coupling& q, const ProblemSpec& spec, const PenaltyConfig& cfg);

// Gradient of pen_objective in the raw path coordinates (test hook for the
// finite-difference check).
Eigen::VectorXd pen_gradient(const Coupling& q, const ProblemSpec& spec,
                             const PenaltyConfig& cfg);

struct FwTraceRow {
  int iter;
  double objective;
  double fw_gap;
  double step;
};

struct PenResult {
  double value = 0.0;            // sense-adjusted optimal value
  Coupling coupling;
  std::vector<FwTraceRow> trace;
  double final_gap = 0.0;
  bool converged = false;
  int iterations = 0;
};

// Frank-Wolfe over the martingale polytope with the MOT LP as linear oracle;
// analytic penalty gradients, Armijo backtracking from 2/(k+2) that never
// steps onto an infinite penalty.
PenResult solve_pen_hmot(const ProblemSpec& spec, const PenaltyConfig& cfg);

}  // namespace homot

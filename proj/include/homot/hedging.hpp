#pragma once

#include "homot/transport.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace homot {

// Dual certificate: static options h_t, dynamic stock positions theta_t and
// homogeneity swap tables g with their density factors.
struct HedgePortfolio {
  bool superhedge = true;   // sup-sense certificate; false: subhedge (inf)
  bool pairwise = false;    // theta keyed by (t, atom) instead of history prefix
  PathGrid grid;
  std::vector<Eigen::ArrayXd> h;       // per time, aligned with grid atoms
  std::vector<Eigen::ArrayXd> theta;   // per time t < T: per prefix (or atom)
  std::vector<Eigen::MatrixXd> g;      // per tuple: states x ygrid
  std::vector<TupleSupport> tuples;    // states, ygrid and density factors
  // density factors dtheta/dmu at the tuple states
  std::vector<Eigen::ArrayXd> dtheta_dmu_s, dtheta_dmu_t;
};

// Reads the LP duals of a solved ot/mot/hmot model into portfolio tables.
// Homogeneity-row duals are rescaled by mu_s(x) mu_t(x) / theta(x) so the swap
// term takes the g * dtheta/dmu form.
HedgePortfolio extract_portfolio(const BuildResult& build, const LPSolution& solution,
                                 const ProblemSpec& spec);

// sum_t sum_x h_t(x) mu_t(x)
double portfolio_cost(const HedgePortfolio& p, const std::vector<DiscreteMeasure>& marginals);

struct VerifyReport {
  bool pass = false;
  double min_slack = 0.0;
  std::vector<double> argmin_path;
  double active_fraction = 0.0;  // share of paths with slack <= tol
  bool exhaustive = true;
  long paths_checked = 0;
  std::uint64_t sample_seed = 0;
  double tol = 0.0;
};

// Evaluates hedge-minus-payoff on every grid path (sampled with a recorded
// seed beyond `exhaustive_cap` paths). For subhedges the slack is payoff
// minus hedge.
VerifyReport verify_superhedge(const HedgePortfolio& p, const ProblemSpec& spec, double tol,
                               long exhaustive_cap = 20000000);

inline double dual_gap(double primal_value, double portfolio_cost) {
  return std::abs(portfolio_cost - primal_value) / (1.0 + std::abs(primal_value));
}

std::string portfolio_to_json(const HedgePortfolio& p);
std::string verify_report_to_json(const VerifyReport& r);

}  // namespace homot

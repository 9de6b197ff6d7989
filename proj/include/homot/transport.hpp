#pragma once

#include "homot/lp.hpp"
#include "homot/measure.hpp"
#include "homot/problem.hpp"

#include <optional>
#include <string>
#include <vector>

namespace homot {

// Model exceeds the configured path-space cap; solve refuses, export still works.
struct scale_error : std::runtime_error {
  scale_error(long vars, long cap)
      : std::runtime_error("path space has " + std::to_string(vars) +
                           " variables, above the cap " + std::to_string(cap) +
                           "; export the model (cmd: export) and use an external solver, "
                           "or raise HMOT_MAX_VARS"),
        variables(vars),
        cap(cap) {}
  long variables;
  long cap;
};

// Product grid of the marginal supports; paths are indexed row-major with the
// last time fastest.
struct PathGrid {
  std::vector<Eigen::ArrayXd> values;  // per time
  std::vector<long> strides;
  long num_paths = 0;

  int times() const { return static_cast<int>(values.size()); }
  int size(int t) const { return static_cast<int>(values[t].size()); }
  int coord(long path, int t) const {
    return static_cast<int>((path / strides[t]) % size(t));
  }
  double value(int t, int i) const { return values[t][i]; }

  static PathGrid from_marginals(const std::vector<DiscreteMeasure>& marginals);
};

enum class RowFamily : std::uint8_t {
  marginal,
  martingale,
  homogeneity,
  homogeneity2,
  tv_pos,
  tv_neg,
  tv_budget,
  w1_pos,
  w1_neg,
  w1_budget
};

std::string to_string(RowFamily f);

struct RowTag {
  RowFamily family = RowFamily::marginal;
  int t = -1;       // marginal/martingale time (0-based)
  int atom = -1;    // marginal atom index
  long prefix = -1; // martingale history prefix id
  int tuple = -1;   // homogeneity tuple index (h2: group index)
  int x = -1;       // state index into TupleSupport::states
  int y = -1;       // index into TupleSupport::ygrid (w1: cumulative index)
  int y2 = -1;      // second leg (h2)
};

// Common-support data of one lag-matched tuple.
struct TupleSupport {
  DeltaTuple tuple;
  std::vector<double> states;  // supp(mu_s ^ mu_t)
  std::vector<double> theta;   // meet weights
  std::vector<double> mu_s;    // marginal weights at the states
  std::vector<double> mu_t;
  std::vector<double> ygrid;   // union of the s+tau and t+tau supports
};

// Order-2 group: two tuples on the same (i, j) with distinct gaps.
struct Tuple2Group {
  int i, j;
  int tau_i1, tau_j1, tau_i2, tau_j2;
  TupleSupport base;                // states/theta on (i, j)
  std::vector<double> ygrid1, ygrid2;
};

struct BuildResult {
  LPModel model;
  PathGrid grid;
  DeltaSet delta;
  std::vector<RowTag> row_tags;
  std::vector<TupleSupport> tuples;     // aligned with delta
  std::vector<Tuple2Group> groups2;     // hmot2 only
  std::vector<std::string> warnings;
  // aux variable ranges appended by the r-homogeneity relaxation
  int first_aux_var = -1;
};

// Path-space primal LP for the configured mode. With enforce_cap the builder
// refuses path spaces larger than spec.solver.max_vars.
BuildResult build_primal(const ProblemSpec& spec, bool enforce_cap = true);

// Replaces the homogeneity equalities of a rhmot build by metric balls of
// radius r (TV as full l1 mass, W1 via cumulative differences).
void add_r_homogeneity(BuildResult& build, const ProblemSpec& spec, RMetric metric,
                       const std::vector<double>& r);

// Joint law on the path grid.
class Coupling {
 public:
  Coupling() = default;
  Coupling(PathGrid grid, Eigen::VectorXd weights);

  const PathGrid& grid() const { return grid_; }
  const Eigen::VectorXd& weights() const { return weights_; }
  int times() const { return grid_.times(); }
  long num_paths() const { return grid_.num_paths; }

  DiscreteMeasure marginal(int t) const;
  // joint law of (S_a, S_b) on grid(a) x grid(b), 0-based a < b
  Eigen::MatrixXd pair_marginal(int a, int b) const;
  double expectation(const PayoffExpr& payoff) const;

  // CSV dump `x1,...,xN,weight` (nonzero paths)
  void write_csv(const std::string& path) const;
  static Coupling read_csv(const std::string& path);

 private:
  PathGrid grid_;
  Eigen::VectorXd weights_;
};

struct HomViolation {
  DeltaTuple tuple;
  double state = 0.0;
  double tv = 0.0;         // full l1 distance between the kernel rows
  double meet_mass = 0.0;  // theta weight at the state
  std::vector<double> ygrid;
  std::vector<double> row_s, row_t;  // kernel rows at the state
};

struct HomogeneityReport {
  bool pass = true;
  double tol = 0.0;
  double worst_tv = 0.0;
  std::vector<HomViolation> violations;
};

// Definition check: kernel rows K_{s,s+tau}(x,.) vs K_{t,t+tau}(x,.) in total
// variation on every common-support state.
HomogeneityReport check_homogeneous(const Coupling& q, const DeltaSet& delta, double tol);

// E[(S_{s+tau} - k)^+ | S_s = x] under the coupling; requires Q_s(x) > 0.
double pricing_rule(const Coupling& q, int s, int tau, double strike, double x);

enum class FeasibilityStatus { feasible, infeasible, undecided };

struct FeasibilityResult {
  FeasibilityStatus status = FeasibilityStatus::undecided;
  bool certified = false;  // exact answer, not just the sufficient direction
  std::string method;      // "kernel-lp" | "path-lp"
  std::vector<double> support;     // kernel column states (union support)
  std::vector<double> row_states;  // kernel row states
  Eigen::MatrixXd kernel;          // witness when feasible via the kernel LP
};

// Single-kernel LP: exists K with mu_t K = mu_{t+1} for all t (and row means
// x when martingale). Equivalent to Pi_hom nonemptiness; sufficient for M_hom
// (falls back to the full path LP at small scale).
FeasibilityResult feasibility_hom(const std::vector<DiscreteMeasure>& marginals,
                                  bool martingale, long fallback_cap = 200000);

struct SenseReport {
  SolveStatus status = SolveStatus::iteration_limit;
  double value = 0.0;
  LPSolution solution;
  std::string infeasible_family;  // diagnosis when infeasible
};

struct BoundsResult {
  BuildResult build;
  std::optional<SenseReport> inf, sup;
  Coupling inf_coupling, sup_coupling;
  double duality_gap_inf = 0.0, duality_gap_sup = 0.0;
};

// Solves the configured problem in one or both senses (shared model, the
// second sense warm-starts from the first basis).
BoundsResult bounds(const ProblemSpec& spec, bool want_inf = true, bool want_sup = true);

}  // namespace homot

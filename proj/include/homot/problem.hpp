#pragma once

#include "homot/measure.hpp"
#include "homot/payoff.hpp"

#include <optional>
#include <string>
#include <vector>

namespace homot {

// Trading-day labels t_1 < ... < t_N. The uniform case is labels (1,...,T).
class TimeGrid {
 public:
  TimeGrid() = default;
  explicit TimeGrid(std::vector<long> labels);

  const std::vector<long>& labels() const { return labels_; }
  int size() const { return static_cast<int>(labels_.size()); }
  long label(int i) const { return labels_[i]; }
  bool uniform() const;

  static TimeGrid uniform_grid(int n);  // labels 1..n

 private:
  std::vector<long> labels_;
};

// Lag-matched index tuple: kernels K_{i, i+tau_i} and K_{j, j+tau_j} are
// compared; the trading-day gaps agree by construction.
struct DeltaTuple {
  int i = 0;      // 0-based grid index s
  int j = 0;      // 0-based grid index t, i < j
  int tau_i = 0;  // lag at i (grid steps), >= 1
  int tau_j = 0;
  long gap = 0;   // |t_{i+tau_i} - t_i| in trading days

  friend bool operator==(const DeltaTuple&, const DeltaTuple&) = default;
};

using DeltaSet = std::vector<DeltaTuple>;

// All lag-matched tuples of the grid in lexicographic (i, j, tau_i, tau_j) order.
// Uniform grids reduce to {(s,t,tau): s<t, t+tau<=N} with tau_i = tau_j.
DeltaSet build_delta(const TimeGrid& grid);

enum class Mode { ot, mot, hmot, hmot2, rhmot, pen_hmot };
enum class OptSense { inf, sup };
enum class RMetric { tv, w1 };

std::string to_string(Mode m);
std::string to_string(OptSense s);
std::string to_string(RMetric m);
Mode mode_from_string(const std::string& s);
OptSense sense_from_string(const std::string& s);
RMetric metric_from_string(const std::string& s);

struct SolverOptions {
  long max_vars = 200000;       // path-space size guard (HMOT_MAX_VARS overrides)
  long max_iterations = 1000000;
  double feas_tol = 1e-9;
  bool pairwise_martingale = false;  // E[S_{t+1}|S_t] rows only (outer bounds)
};

struct ProblemSpec {
  TimeGrid grid;
  std::vector<DiscreteMeasure> marginals;  // one per grid label
  PayoffExpr payoff;
  Mode mode = Mode::mot;
  OptSense sense = OptSense::sup;          // orientation for single-sense solvers
  RMetric metric = RMetric::tv;            // r-homogeneity distance
  std::vector<double> r;                   // per-tuple radii/weights; size 1 = global
  SolverOptions solver;

  // marginal count, payoff coordinates, martingale-mode convex order.
  // Convex-order failures are returned as warnings (the LP reports
  // infeasibility with a certificate if they are real).
  std::vector<std::string> validate() const;

  DeltaSet delta() const { return build_delta(grid); }
  // r value for tuple index k (global scalar broadcast).
  double r_for(std::size_t k) const;
};

}  // namespace homot

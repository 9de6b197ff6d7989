#pragma once

#include <Eigen/Core>

#include "homot/errors.hpp"

#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace homot {

constexpr double kInf = std::numeric_limits<double>::infinity();

enum class Relation { eq, le, ge };
enum class ObjSense { minimize, maximize };
enum class SolveStatus { optimal, infeasible, unbounded, iteration_limit };

std::string to_string(SolveStatus s);

// Basis condition estimate exceeded the configured limit, or the factorization
// could not be repaired.
struct numerical_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Sparse linear program. Rows are stored in CSR layout; variables have
// [lb, ub] bounds (default [0, +inf)).
class LPModel {
 public:
  int add_variable(std::string name, double lb = 0.0, double ub = kInf, double obj = 0.0);
  void reserve(int vars, int rows, std::size_t entries);
  void set_objective(int var, double coef) { obj_[var] = coef; }
  void set_bounds(int var, double lb, double ub) {
    lb_[var] = lb;
    ub_[var] = ub;
  }

  // Entries must reference valid variables and carry distinct column indices.
  int add_row(std::string name, Relation rel, double rhs,
              const std::vector<std::pair<int, double>>& entries);

  int num_vars() const { return static_cast<int>(obj_.size()); }
  int num_rows() const { return static_cast<int>(rhs_.size()); }
  std::size_t num_entries() const { return cols_.size(); }

  ObjSense sense = ObjSense::minimize;
  std::string name = "homot";

  double obj(int j) const { return obj_[j]; }
  double lb(int j) const { return lb_[j]; }
  double ub(int j) const { return ub_[j]; }
  Relation rel(int i) const { return rel_[i]; }
  double rhs(int i) const { return rhs_[i]; }
  const std::string& var_name(int j) const { return var_names_[j]; }
  const std::string& row_name(int i) const { return row_names_[i]; }

  // CSR access
  std::size_t row_begin(int i) const { return row_ptr_[i]; }
  std::size_t row_end(int i) const { return row_ptr_[i + 1]; }
  int entry_col(std::size_t k) const { return cols_[k]; }
  double entry_val(std::size_t k) const { return vals_[k]; }

  double row_dot(int i, const Eigen::VectorXd& x) const;

 private:
  std::vector<double> obj_, lb_, ub_;
  std::vector<std::string> var_names_;
  std::vector<Relation> rel_;
  std::vector<double> rhs_;
  std::vector<std::string> row_names_;
  std::vector<std::size_t> row_ptr_{0};
  std::vector<int> cols_;
  std::vector<double> vals_;
};

struct SolverStats {
  long iterations = 0;
  long phase1_iterations = 0;
  int refactorizations = 0;
  int basis_resets = 0;
  double condition_estimate = 0.0;
  double solve_seconds = 0.0;
};

// Variable states for warm starts: one entry per structural variable plus one
// logical per row (in that order).
struct Basis {
  enum VStat : std::uint8_t { basic, at_lower, at_upper, nonbasic_free };
  std::vector<std::uint8_t> vstat;
  bool compatible(int num_vars, int num_rows) const {
    return static_cast<int>(vstat.size()) == num_vars + num_rows;
  }
};

struct LPSolution {
  SolveStatus status = SolveStatus::iteration_limit;
  ObjSense sense = ObjSense::minimize;  // sense the model was solved with
  double objective = std::numeric_limits<double>::quiet_NaN();
  double dual_objective = std::numeric_limits<double>::quiet_NaN();
  Eigen::VectorXd primal;         // structural variables
  Eigen::VectorXd row_duals;      // per-row multipliers, user sign convention:
                                  // max: eq free, <= rows >= 0, >= rows <= 0;
                                  // min: mirrored.
  Eigen::VectorXd reduced_costs;  // structural reduced costs, user sign
  double primal_residual = 0.0;   // scaled feasibility residual
  double dual_residual = 0.0;
  double comp_slack_residual = 0.0;
  Eigen::VectorXd phase1_row_duals;  // infeasibility certificate (when infeasible)
  Basis basis;
  SolverStats stats;
};

struct SimplexOptions {
  double feas_tol = 1e-9;   // bound/row feasibility during pivoting
  double opt_tol = 1e-9;    // reduced-cost optimality threshold
  long max_iterations = 1000000;
  int refactor_interval = 100;
  int stall_limit = 500;    // degenerate pivots before switching to Bland's rule
  double condition_limit = 1e14;
  const Basis* warm_start = nullptr;
};

// Bounded-variable revised simplex: long-step composite phase 1, Devex pricing
// with a Bland fallback, PFI basis updates over a sparse LU refactorization.
LPSolution solve(const LPModel& model, const SimplexOptions& opts = {});

struct PointCheck {
  Eigen::VectorXd row_residuals;  // signed violation per row (0 if satisfied)
  double max_row_residual = 0.0;
  double max_bound_violation = 0.0;
  double objective = 0.0;
};

PointCheck check_point(const LPModel& model, const Eigen::VectorXd& x);

}  // namespace homot

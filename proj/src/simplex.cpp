#include "homot/lp.hpp"

#include "homot/errors.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <chrono>
#include <cmath>

namespace homot {

int LPModel::add_variable(std::string name, double lb, double ub, double obj) {
  if (std::isnan(lb) || std::isnan(ub) || lb > ub)
    throw input_error("invalid bounds for variable " + name);
  obj_.push_back(obj);
  lb_.push_back(lb);
  ub_.push_back(ub);
  var_names_.push_back(std::move(name));
  return static_cast<int>(obj_.size()) - 1;
}

void LPModel::reserve(int vars, int rows, std::size_t entries) {
  obj_.reserve(vars);
  lb_.reserve(vars);
  ub_.reserve(vars);
  var_names_.reserve(vars);
  rel_.reserve(rows);
  rhs_.reserve(rows);
  row_names_.reserve(rows);
  row_ptr_.reserve(rows + 1);
  cols_.reserve(entries);
  vals_.reserve(entries);
}

int LPModel::add_row(std::string name, Relation rel, double rhs,
                     const std::vector<std::pair<int, double>>& entries) {
  for (const auto& [col, val] : entries) {
    if (col < 0 || col >= num_vars())
      throw input_error("row " + name + " references unknown variable");
    if (!std::isfinite(val)) throw input_error("row " + name + " has non-finite entry");
    cols_.push_back(col);
    vals_.push_back(val);
  }
  row_ptr_.push_back(cols_.size());
  rel_.push_back(rel);
  rhs_.push_back(rhs);
  row_names_.push_back(std::move(name));
  return static_cast<int>(rhs_.size()) - 1;
}

double LPModel::row_dot(int i, const Eigen::VectorXd& x) const {
  double s = 0.0;
  for (std::size_t k = row_begin(i); k < row_end(i); ++k) s += vals_[k] * x[cols_[k]];
  return s;
}

std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::unbounded: return "unbounded";
    case SolveStatus::iteration_limit: return "iteration-limit";
  }
  return "?";
}

PointCheck check_point(const LPModel& model, const Eigen::VectorXd& x) {
  if (x.size() != model.num_vars())
    throw input_error("check_point: point length " + std::to_string(x.size()) +
                         " != variable count " + std::to_string(model.num_vars()));
  PointCheck out;
  out.row_residuals.resize(model.num_rows());
  for (int i = 0; i < model.num_rows(); ++i) {
    double lhs = model.row_dot(i, x);
    double r = 0.0;
    switch (model.rel(i)) {
      case Relation::eq: r = lhs - model.rhs(i); break;
      case Relation::le: r = std::max(0.0, lhs - model.rhs(i)); break;
      case Relation::ge: r = std::min(0.0, lhs - model.rhs(i)); break;
    }
    out.row_residuals[i] = r;
    out.max_row_residual = std::max(out.max_row_residual, std::abs(r));
  }
  for (int j = 0; j < model.num_vars(); ++j) {
    out.max_bound_violation = std::max(out.max_bound_violation, model.lb(j) - x[j]);
    out.max_bound_violation = std::max(out.max_bound_violation, x[j] - model.ub(j));
  }
  out.max_bound_violation = std::max(out.max_bound_violation, 0.0);
  out.objective = 0.0;
  for (int j = 0; j < model.num_vars(); ++j) out.objective += model.obj(j) * x[j];
  return out;
}

namespace {

using SpMat = Eigen::SparseMatrix<double>;

struct Eta {
  int slot;
  double pivot;                       // w[slot]
  std::vector<std::pair<int, double>> w;  // nonzeros of the FTRANned column, excl. slot
};

// Working problem: min c'x over A x + logicals = b, lb <= x <= ub.
// Variables 0..n-1 structural, n..n+m-1 logicals (coefficient +1 in their row).
class Simplex {
 public:
  Simplex(const LPModel& model, const SimplexOptions& opts)
      : model_(model), opts_(opts), m_(model.num_rows()), n_(model.num_vars()) {
    build_working();
  }

  LPSolution run();

 private:
  enum VStat : std::uint8_t {
    kBasic = Basis::basic,
    kLower = Basis::at_lower,
    kUpper = Basis::at_upper,
    kFree = Basis::nonbasic_free
  };

  void build_working();
  void initial_basis();
  void warm_start_basis(const Basis& b);
  void refactorize();
  void compute_basic_values();
  void ftran(Eigen::VectorXd& v);
  void btran(Eigen::VectorXd& v);
  // residual of B x = rhs for the current basis
  void basis_residual(const Eigen::VectorXd& x, const Eigen::VectorXd& rhs,
                      Eigen::VectorXd& r) const;
  // FTRAN of column a_q with one refinement step and a refactorization
  // fallback; keeps pivot directions trustworthy on ill-conditioned bases
  void ftran_column(int q, Eigen::VectorXd& w);
  double infeasibility_sum() const;
  void phase1_costs(Eigen::VectorXd& c1) const;
  bool price(const Eigen::VectorXd& d, bool bland, int& q, int& dir) const;
  void pivot(int q, int dir, int leave_slot, VStat leave_stat, double step,
             const Eigen::VectorXd& w);
  void bound_flip(int q, int dir, const Eigen::VectorXd& w);
  bool run_phase1(long& iter);
  int run_phase2(long& iter);  // 0 optimal, 1 unbounded, 2 iteration limit
  double condition_estimate();
  LPSolution extract(SolveStatus status);

  double col_dot(int j, const Eigen::VectorXd& v) const {
    double s = 0.0;
    for (int k = colptr_[j]; k < colptr_[j + 1]; ++k) s += vals_[k] * v[rows_[k]];
    return s;
  }

  bool fixed(int j) const { return lb_[j] == ub_[j]; }

  const LPModel& model_;
  SimplexOptions opts_;
  int m_, n_, nw_ = 0;  // nw_ = n_ + m_

  // CSC of [A | I]
  std::vector<int> colptr_, rows_;
  std::vector<double> vals_;
  std::vector<double> lb_, ub_, cost_;
  Eigen::VectorXd b_;
  double obj_sign_ = 1.0;  // +1 min, -1 max

  std::vector<int> basic_;          // variable per basis slot
  std::vector<std::uint8_t> stat_;  // VStat per variable
  std::vector<int> slot_of_;        // basis slot per variable, -1 if nonbasic
  Eigen::VectorXd x_;               // current values (all variables)

  Eigen::SparseLU<SpMat> lu_;
  std::vector<Eta> etas_;
  int pivots_since_refactor_ = 0;

  // phase-2 pricing state
  Eigen::VectorXd d_;       // reduced costs
  Eigen::VectorXd devex_;   // reference weights
  long stall_count_ = 0;
  bool bland_ = false;

  SolverStats stats_;
  Eigen::VectorXd phase1_duals_;
  double phase1_infeas_ = 0.0;
};

void Simplex::build_working() {
  nw_ = n_ + m_;
  // CSC from the model's CSR plus one logical column per row
  std::vector<int> count(nw_, 0);
  for (int i = 0; i < m_; ++i)
    for (std::size_t k = model_.row_begin(i); k < model_.row_end(i); ++k)
      ++count[model_.entry_col(k)];
  colptr_.assign(nw_ + 1, 0);
  for (int j = 0; j < n_; ++j) colptr_[j + 1] = colptr_[j] + count[j];
  for (int i = 0; i < m_; ++i) colptr_[n_ + i + 1] = colptr_[n_ + i] + 1;
  rows_.resize(colptr_[nw_]);
  vals_.resize(colptr_[nw_]);
  std::vector<int> next(colptr_.begin(), colptr_.end() - 1);
  for (int i = 0; i < m_; ++i) {
    for (std::size_t k = model_.row_begin(i); k < model_.row_end(i); ++k) {
      int j = model_.entry_col(k);
      rows_[next[j]] = i;
      vals_[next[j]] = model_.entry_val(k);
      ++next[j];
    }
  }
  for (int i = 0; i < m_; ++i) {
    rows_[next[n_ + i]] = i;
    vals_[next[n_ + i]] = 1.0;
  }

  obj_sign_ = model_.sense == ObjSense::maximize ? -1.0 : 1.0;
  lb_.resize(nw_);
  ub_.resize(nw_);
  cost_.assign(nw_, 0.0);
  for (int j = 0; j < n_; ++j) {
    lb_[j] = model_.lb(j);
    ub_[j] = model_.ub(j);
    cost_[j] = obj_sign_ * model_.obj(j);
  }
  b_.resize(m_);
  for (int i = 0; i < m_; ++i) {
    b_[i] = model_.rhs(i);
    switch (model_.rel(i)) {
      case Relation::le: lb_[n_ + i] = 0.0; ub_[n_ + i] = kInf; break;
      case Relation::ge: lb_[n_ + i] = -kInf; ub_[n_ + i] = 0.0; break;
      case Relation::eq: lb_[n_ + i] = 0.0; ub_[n_ + i] = 0.0; break;
    }
  }
}

void Simplex::initial_basis() {
  basic_.resize(m_);
  stat_.assign(nw_, kLower);
  slot_of_.assign(nw_, -1);
  x_ = Eigen::VectorXd::Zero(nw_);
  for (int j = 0; j < n_; ++j) {
    double l = lb_[j], u = ub_[j];
    if (std::isfinite(l) && (l >= 0.0 || !std::isfinite(u) || std::abs(l) <= std::abs(u))) {
      stat_[j] = kLower;
      x_[j] = l;
    } else if (std::isfinite(u)) {
      stat_[j] = kUpper;
      x_[j] = u;
    } else {
      stat_[j] = kFree;
      x_[j] = 0.0;
    }
  }
  for (int i = 0; i < m_; ++i) {
    int j = n_ + i;
    basic_[i] = j;
    stat_[j] = kBasic;
    slot_of_[j] = i;
  }
}

void Simplex::warm_start_basis(const Basis& b) {
  initial_basis();
  std::vector<int> candidates;
  for (int j = 0; j < nw_; ++j) {
    auto s = static_cast<VStat>(b.vstat[j]);
    if (s == kBasic) {
      candidates.push_back(j);
    } else {
      stat_[j] = s;
      if (s == kLower) x_[j] = std::isfinite(lb_[j]) ? lb_[j] : 0.0;
      else if (s == kUpper) x_[j] = std::isfinite(ub_[j]) ? ub_[j] : 0.0;
      else x_[j] = 0.0;
    }
  }
  if (static_cast<int>(candidates.size()) != m_) {
    initial_basis();  // incompatible; fall back to the logical basis
    return;
  }
  for (int i = 0; i < m_; ++i) {
    slot_of_[basic_[i]] = -1;  // clear the logical seeding
  }
  for (int i = 0; i < m_; ++i) {
    basic_[i] = candidates[i];
    stat_[candidates[i]] = kBasic;
    slot_of_[candidates[i]] = i;
  }
}

void Simplex::refactorize() {
  SpMat B(m_, m_);
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(colptr_[nw_] / std::max(1, nw_) * m_ + m_);
  for (int p = 0; p < m_; ++p) {
    int j = basic_[p];
    for (int k = colptr_[j]; k < colptr_[j + 1]; ++k)
      trip.emplace_back(rows_[k], p, vals_[k]);
  }
  B.setFromTriplets(trip.begin(), trip.end());
  B.makeCompressed();
  lu_.compute(B);
  if (lu_.info() != Eigen::Success) {
    // Singular basis: restart from the all-logical basis and refactorize more
    // aggressively from here on.
    ++stats_.basis_resets;
    if (stats_.basis_resets > 10) throw numerical_error("basis repeatedly singular");
    opts_.refactor_interval = std::max(10, opts_.refactor_interval / 2);
    initial_basis();
    SpMat I(m_, m_);
    I.setIdentity();
    lu_.compute(I);
  }
  etas_.clear();
  pivots_since_refactor_ = 0;
  ++stats_.refactorizations;
}

void Simplex::compute_basic_values() {
  Eigen::VectorXd rhs = b_;
  for (int j = 0; j < nw_; ++j) {
    if (stat_[j] == kBasic || x_[j] == 0.0) continue;
    for (int k = colptr_[j]; k < colptr_[j + 1]; ++k) rhs[rows_[k]] -= vals_[k] * x_[j];
  }
  Eigen::VectorXd xb = rhs;
  ftran(xb);
  Eigen::VectorXd r;
  basis_residual(xb, rhs, r);
  if (r.cwiseAbs().maxCoeff() > 1e-10 * (1.0 + rhs.cwiseAbs().maxCoeff())) {
    Eigen::VectorXd d = r;
    ftran(d);
    xb += d;
  }
  for (int p = 0; p < m_; ++p) x_[basic_[p]] = xb[p];
}

void Simplex::basis_residual(const Eigen::VectorXd& x, const Eigen::VectorXd& rhs,
                             Eigen::VectorXd& r) const {
  r = rhs;
  for (int p = 0; p < m_; ++p) {
    double xp = x[p];
    if (xp == 0.0) continue;
    int j = basic_[p];
    for (int k = colptr_[j]; k < colptr_[j + 1]; ++k) r[rows_[k]] -= vals_[k] * xp;
  }
}

void Simplex::ftran_column(int q, Eigen::VectorXd& w) {
  Eigen::VectorXd aq = Eigen::VectorXd::Zero(m_);
  for (int k = colptr_[q]; k < colptr_[q + 1]; ++k) aq[rows_[k]] = vals_[k];
  double scale = 1.0 + aq.cwiseAbs().maxCoeff();
  for (int attempt = 0; attempt < 2; ++attempt) {
    w = aq;
    ftran(w);
    Eigen::VectorXd r;
    basis_residual(w, aq, r);
    double res = r.cwiseAbs().maxCoeff();
    if (res > 1e-10 * scale) {  // one step of iterative refinement
      Eigen::VectorXd d = r;
      ftran(d);
      w += d;
      basis_residual(w, aq, r);
      res = r.cwiseAbs().maxCoeff();
    }
    if (res <= 1e-7 * scale || attempt == 1) return;
    refactorize();
    compute_basic_values();
  }
}

void Simplex::ftran(Eigen::VectorXd& v) {
  v = lu_.solve(v);
  for (const Eta& e : etas_) {
    double t = v[e.slot] / e.pivot;
    if (t != 0.0)
      for (const auto& [i, wi] : e.w) v[i] -= wi * t;
    v[e.slot] = t;
  }
}

void Simplex::btran(Eigen::VectorXd& v) {
  for (auto it = etas_.rbegin(); it != etas_.rend(); ++it) {
    double s = v[it->slot];
    for (const auto& [i, wi] : it->w) s -= wi * v[i];
    v[it->slot] = s / it->pivot;
  }
  v = lu_.transpose().solve(v);
}

double Simplex::infeasibility_sum() const {
  double s = 0.0;
  for (int p = 0; p < m_; ++p) {
    int j = basic_[p];
    if (x_[j] < lb_[j]) s += lb_[j] - x_[j];
    if (x_[j] > ub_[j]) s += x_[j] - ub_[j];
  }
  return s;
}

void Simplex::phase1_costs(Eigen::VectorXd& c1) const {
  c1.setZero(m_);
  const double tol = opts_.feas_tol;
  for (int p = 0; p < m_; ++p) {
    int j = basic_[p];
    if (x_[j] < lb_[j] - tol) c1[p] = -1.0;
    else if (x_[j] > ub_[j] + tol) c1[p] = 1.0;
  }
}

// Devex-weighted entering choice; returns false if no candidate improves.
bool Simplex::price(const Eigen::VectorXd& d, bool bland, int& q, int& dir) const {
  const double tol = opts_.opt_tol;
  q = -1;
  dir = 0;
  double best = 0.0;
  for (int j = 0; j < nw_; ++j) {
    if (stat_[j] == kBasic || fixed(j)) continue;
    double dj = d[j];
    int dj_dir = 0;
    if (stat_[j] == kLower && dj < -tol * (1.0 + std::abs(cost_[j]))) dj_dir = 1;
    else if (stat_[j] == kUpper && dj > tol * (1.0 + std::abs(cost_[j]))) dj_dir = -1;
    else if (stat_[j] == kFree && std::abs(dj) > tol * (1.0 + std::abs(cost_[j])))
      dj_dir = dj < 0.0 ? 1 : -1;
    if (dj_dir == 0) continue;
    if (bland) {
      q = j;
      dir = dj_dir;
      return true;
    }
    double score = dj * dj / devex_[j];
    if (score > best) {
      best = score;
      q = j;
      dir = dj_dir;
    }
  }
  return q >= 0;
}

void Simplex::pivot(int q, int dir, int leave_slot, VStat leave_stat, double step,
                    const Eigen::VectorXd& w) {
  int leaving = basic_[leave_slot];
  // move the iterate
  if (step != 0.0) {
    x_[q] += dir * step;
    for (int p = 0; p < m_; ++p) {
      double wp = w[p];
      if (wp != 0.0) x_[basic_[p]] -= dir * step * wp;
    }
  }
  // snap the leaving variable onto its bound
  x_[leaving] = leave_stat == kUpper ? ub_[leaving] : lb_[leaving];
  stat_[leaving] = leave_stat;
  slot_of_[leaving] = -1;
  basic_[leave_slot] = q;
  stat_[q] = kBasic;
  slot_of_[q] = leave_slot;

  Eta e;
  e.slot = leave_slot;
  e.pivot = w[leave_slot];
  e.w.reserve(32);
  for (int p = 0; p < m_; ++p)
    if (p != leave_slot && std::abs(w[p]) > 1e-13) e.w.emplace_back(p, w[p]);
  bool small_pivot = std::abs(e.pivot) < 1e-7;
  etas_.push_back(std::move(e));
  ++pivots_since_refactor_;
  if (small_pivot) pivots_since_refactor_ = opts_.refactor_interval;  // refresh soon
}

void Simplex::bound_flip(int q, int dir, const Eigen::VectorXd& w) {
  double range = ub_[q] - lb_[q];
  x_[q] = dir > 0 ? ub_[q] : lb_[q];
  stat_[q] = dir > 0 ? kUpper : kLower;
  for (int p = 0; p < m_; ++p) {
    double wp = w[p];
    if (wp != 0.0) x_[basic_[p]] -= dir * range * wp;
  }
}

// Long-step composite phase 1: minimizes total bound violation of the basic
// variables; one pivot may restore several infeasibilities.
bool Simplex::run_phase1(long& iter) {
  const double ftol = opts_.feas_tol;
  Eigen::VectorXd c1(m_), y(m_), d(nw_), w(m_);
  devex_.setOnes(nw_);
  long stall = 0;
  bool bland = false;
  std::vector<char> banned(nw_, 0);
  long banned_count = 0;
  while (iter < opts_.max_iterations) {
    if (infeasibility_sum() <= ftol * (1.0 + b_.cwiseAbs().sum())) return true;
    if (pivots_since_refactor_ >= opts_.refactor_interval) {
      refactorize();
      compute_basic_values();
    }
    phase1_costs(c1);
    y = c1;
    btran(y);
    for (int j = 0; j < nw_; ++j)
      d[j] = (stat_[j] == kBasic || banned[j]) ? 0.0 : -col_dot(j, y);
    int q, dir;
    if (!price(d, bland, q, dir)) {
      phase1_duals_ = y;
      phase1_infeas_ = infeasibility_sum();
      return false;  // infeasible
    }
    // direction through the basis
    ftran_column(q, w);

    // breakpoints where the piecewise-linear phase-1 slope increases
    struct Bp {
      double t;
      int slot;
      std::uint8_t stat;  // bound reached
      double rho;
    };
    std::vector<Bp> bps;
    bps.reserve(16);
    const double ztol = 1e-9;
    for (int p = 0; p < m_; ++p) {
      double rho = -dir * w[p];
      if (std::abs(rho) <= ztol) continue;
      int j = basic_[p];
      double v = x_[j], l = lb_[j], u = ub_[j];
      if (v < l - ftol) {
        if (rho > 0.0) {
          bps.push_back({(l - v) / rho, p, kLower, rho});
          if (std::isfinite(u)) bps.push_back({(u - v) / rho, p, kUpper, rho});
        }
      } else if (v > u + ftol) {
        if (rho < 0.0) {
          bps.push_back({(u - v) / rho, p, kUpper, rho});
          if (std::isfinite(l)) bps.push_back({(l - v) / rho, p, kLower, rho});
        }
      } else {
        if (rho > 0.0 && std::isfinite(u)) bps.push_back({std::max(0.0, (u - v) / rho), p, kUpper, rho});
        if (rho < 0.0 && std::isfinite(l)) bps.push_back({std::max(0.0, (l - v) / rho), p, kLower, rho});
      }
    }
    std::sort(bps.begin(), bps.end(), [](const Bp& a, const Bp& b) {
      return a.t < b.t || (a.t == b.t && a.slot < b.slot);
    });
    double slope = dir * d[q];  // negative: improving
    double range = ub_[q] - lb_[q];
    int chosen = -1;
    for (std::size_t k = 0; k < bps.size(); ++k) {
      if (bps[k].t > range) break;  // entering hits its own bound first
      slope += std::abs(bps[k].rho);
      if (slope >= -1e-12) {
        chosen = static_cast<int>(k);
        break;
      }
    }
    ++iter;
    ++stats_.phase1_iterations;
    if (chosen < 0) {
      if (!std::isfinite(range)) {
        // negative slope but no blocking breakpoint: the column is numerically
        // dead (all rates below the pivot tolerance); ignore it from now on
        banned[q] = 1;
        if (++banned_count > nw_) throw numerical_error("phase 1 made no progress");
        continue;
      }
      bound_flip(q, dir, w);
      continue;
    }
    banned.assign(nw_, 0);
    banned_count = 0;
    double step = bps[chosen].t;
    if (step <= 1e-12) {
      if (++stall > opts_.stall_limit) bland = true;
    } else {
      stall = 0;
      bland = false;
    }
    pivot(q, dir, bps[chosen].slot, static_cast<VStat>(bps[chosen].stat), step, w);
  }
  return infeasibility_sum() <= ftol * (1.0 + b_.cwiseAbs().sum());
}

int Simplex::run_phase2(long& iter) {
  const double ftol = opts_.feas_tol;
  Eigen::VectorXd y(m_), w(m_), zrow(m_);
  devex_.setOnes(nw_);
  // fresh reduced costs
  auto refresh_d = [&] {
    y.setZero();
    for (int p = 0; p < m_; ++p) y[p] = cost_[basic_[p]];
    btran(y);
    d_.resize(nw_);
    for (int j = 0; j < nw_; ++j)
      d_[j] = (stat_[j] == kBasic) ? 0.0 : cost_[j] - col_dot(j, y);
  };
  refresh_d();
  stall_count_ = 0;
  bland_ = false;
  while (iter < opts_.max_iterations) {
    if (pivots_since_refactor_ >= opts_.refactor_interval) {
      refactorize();
      compute_basic_values();
      refresh_d();
      if (infeasibility_sum() > ftol * 100.0 * (1.0 + b_.cwiseAbs().sum())) {
        // drifted out of feasibility: repair with phase 1
        if (!run_phase1(iter)) return 3;
        refresh_d();
      }
    }
    int q, dir;
    if (!price(d_, bland_, q, dir)) return 0;  // optimal
    long refactors_before = stats_.refactorizations;
    ftran_column(q, w);
    if (stats_.refactorizations != refactors_before) {
      refresh_d();  // the fallback refactorized: rebuild pricing state
      continue;
    }

    // bounded-variable ratio test (two-pass Harris)
    double limit = ub_[q] - lb_[q];  // entering's own range
    double t_relaxed = limit;
    const double ztol = 1e-9;
    for (int p = 0; p < m_; ++p) {
      double rho = -dir * w[p];
      if (std::abs(rho) <= ztol) continue;
      int j = basic_[p];
      double bound = rho > 0.0 ? ub_[j] : lb_[j];
      if (!std::isfinite(bound)) continue;
      double r = (bound - x_[j] + (rho > 0.0 ? ftol : -ftol)) / rho;
      t_relaxed = std::min(t_relaxed, std::max(r, 0.0));
    }
    if (!std::isfinite(t_relaxed)) return 1;  // unbounded
    int leave_slot = -1;
    double best_rho = 0.0, t_star = t_relaxed;
    std::uint8_t leave_stat = kLower;
    for (int p = 0; p < m_; ++p) {
      double rho = -dir * w[p];
      if (std::abs(rho) <= ztol) continue;
      int j = basic_[p];
      double bound = rho > 0.0 ? ub_[j] : lb_[j];
      if (!std::isfinite(bound)) continue;
      double r = std::max(0.0, (bound - x_[j]) / rho);
      if (r > t_relaxed + 1e-15) continue;
      bool better;
      if (leave_slot < 0) {
        better = true;
      } else if (bland_) {
        // lowest variable index among minimal ratios
        better = r < t_star - 1e-15 ||
                 (r <= t_star + 1e-15 && basic_[p] < basic_[leave_slot]);
      } else {
        better = std::abs(rho) > std::abs(best_rho);  // largest pivot (Harris pass 2)
      }
      if (better) {
        leave_slot = p;
        best_rho = rho;
        t_star = r;
        leave_stat = rho > 0.0 ? kUpper : kLower;
      }
    }
    ++iter;
    if (leave_slot < 0) {
      if (!std::isfinite(limit)) return 1;  // unbounded
      bound_flip(q, dir, w);
      continue;
    }
    // pivotal row for the reduced-cost and Devex updates
    zrow.setZero();
    zrow[leave_slot] = 1.0;
    btran(zrow);
    double alpha_q = w[leave_slot];
    double dq = d_[q];
    double devex_q = devex_[q];
    int leaving = basic_[leave_slot];
    pivot(q, dir, leave_slot, static_cast<VStat>(leave_stat), t_star, w);
    if (t_star <= 1e-12) {
      if (++stall_count_ > opts_.stall_limit) bland_ = true;
    } else {
      stall_count_ = 0;
      bland_ = false;
    }
    // d_j <- d_j - (d_q/alpha_q) * (z^T a_j); Devex reference update
    double ratio = dq / alpha_q;
    double wq_sq = devex_q / (alpha_q * alpha_q);
    for (int j = 0; j < nw_; ++j) {
      if (stat_[j] == kBasic) {
        d_[j] = 0.0;
        continue;
      }
      double alpha_j = col_dot(j, zrow);
      if (alpha_j != 0.0) {
        d_[j] -= ratio * alpha_j;
        devex_[j] = std::max(devex_[j], alpha_j * alpha_j * wq_sq);
      }
    }
    d_[leaving] = -ratio;
    devex_[leaving] = std::max(1.0, wq_sq);
    d_[q] = 0.0;
  }
  return 2;  // iteration limit
}

double Simplex::condition_estimate() {
  // Hager's 1-norm estimator for ||B^-1||, times ||B||_1.
  Eigen::VectorXd bnorm = Eigen::VectorXd::Zero(m_);
  for (int p = 0; p < m_; ++p) {
    int j = basic_[p];
    double s = 0.0;
    for (int k = colptr_[j]; k < colptr_[j + 1]; ++k) s += std::abs(vals_[k]);
    bnorm[p] = s;
  }
  double normB = bnorm.maxCoeff();
  Eigen::VectorXd x = Eigen::VectorXd::Constant(m_, 1.0 / m_);
  double est = 0.0;
  for (int it = 0; it < 4; ++it) {
    Eigen::VectorXd v = x;
    ftran(v);
    est = v.lpNorm<1>();
    Eigen::VectorXd xi(m_);
    for (int i = 0; i < m_; ++i) xi[i] = v[i] >= 0.0 ? 1.0 : -1.0;
    btran(xi);
    int jmax;
    double zmax = xi.cwiseAbs().maxCoeff(&jmax);
    if (zmax <= xi.dot(x) + 1e-16) break;
    x.setZero();
    x[jmax] = 1.0;
  }
  return normB * est;
}

LPSolution Simplex::run() {
  auto t0 = std::chrono::steady_clock::now();
  if (opts_.warm_start && opts_.warm_start->compatible(n_, m_))
    warm_start_basis(*opts_.warm_start);
  else
    initial_basis();
  refactorize();
  compute_basic_values();

  long iter = 0;
  SolveStatus status;
  if (!run_phase1(iter)) {
    status = SolveStatus::infeasible;
  } else if (iter >= opts_.max_iterations) {
    status = SolveStatus::iteration_limit;
  } else {
    int r = run_phase2(iter);
    if (r == 3) {
      status = SolveStatus::infeasible;
    } else {
      status = r == 0   ? SolveStatus::optimal
               : r == 1 ? SolveStatus::unbounded
                        : SolveStatus::iteration_limit;
    }
  }
  stats_.iterations = iter;

  // final polish: fresh factorization and recomputed values/duals
  refactorize();
  compute_basic_values();
  stats_.condition_estimate = condition_estimate();
  if (stats_.condition_estimate > opts_.condition_limit)
    throw numerical_error("basis condition estimate " +
                          std::to_string(stats_.condition_estimate) + " exceeds limit");
  LPSolution sol = extract(status);
  sol.stats = stats_;
  sol.stats.solve_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return sol;
}

LPSolution Simplex::extract(SolveStatus status) {
  LPSolution sol;
  sol.status = status;
  sol.sense = model_.sense;
  sol.primal.resize(n_);
  for (int j = 0; j < n_; ++j) sol.primal[j] = x_[j];

  Eigen::VectorXd y(m_);
  for (int p = 0; p < m_; ++p) y[p] = cost_[basic_[p]];
  btran(y);
  sol.row_duals.resize(m_);
  sol.reduced_costs.resize(n_);
  Eigen::VectorXd d(nw_);
  for (int j = 0; j < nw_; ++j) d[j] = cost_[j] - col_dot(j, y);
  for (int i = 0; i < m_; ++i) sol.row_duals[i] = obj_sign_ * y[i];
  for (int j = 0; j < n_; ++j) sol.reduced_costs[j] = obj_sign_ * d[j];

  double obj = 0.0;
  for (int j = 0; j < n_; ++j) obj += model_.obj(j) * x_[j];
  sol.objective = obj;

  double dual_obj = y.dot(b_);
  for (int j = 0; j < nw_; ++j) {
    if (stat_[j] == kLower && lb_[j] != 0.0) dual_obj += d[j] * lb_[j];
    else if (stat_[j] == kUpper && ub_[j] != 0.0) dual_obj += d[j] * ub_[j];
  }
  sol.dual_objective = obj_sign_ * dual_obj;

  // scaled residuals
  double pres = 0.0;
  for (int i = 0; i < m_; ++i) {
    double lhs = 0.0, scale = 1.0 + std::abs(b_[i]);
    for (std::size_t k = model_.row_begin(i); k < model_.row_end(i); ++k) {
      double t = model_.entry_val(k) * x_[model_.entry_col(k)];
      lhs += t;
      scale = std::max(scale, std::abs(t));
    }
    double r = lhs + x_[n_ + i] - b_[i];  // logical included
    pres = std::max(pres, std::abs(r) / scale);
  }
  for (int j = 0; j < nw_; ++j) {
    double scale = 1.0 + std::abs(x_[j]);
    if (std::isfinite(lb_[j])) pres = std::max(pres, (lb_[j] - x_[j]) / scale);
    if (std::isfinite(ub_[j])) pres = std::max(pres, (x_[j] - ub_[j]) / scale);
  }
  sol.primal_residual = pres;

  double dres = 0.0, comp = 0.0;
  for (int j = 0; j < nw_; ++j) {
    double scale = 1.0 + std::abs(cost_[j]);
    double viol = 0.0;
    if (stat_[j] == kBasic) viol = std::abs(d[j]);
    else if (stat_[j] == kLower) viol = std::max(0.0, -d[j]);
    else if (stat_[j] == kUpper) viol = std::max(0.0, d[j]);
    else viol = std::abs(d[j]);
    if (fixed(j)) viol = 0.0;  // fixed variables carry any sign
    dres = std::max(dres, viol / scale);
    // bound complementarity
    if (stat_[j] != kBasic && !fixed(j)) {
      double gap = 0.0;
      if (stat_[j] == kLower && std::isfinite(lb_[j])) gap = x_[j] - lb_[j];
      if (stat_[j] == kUpper && std::isfinite(ub_[j])) gap = ub_[j] - x_[j];
      comp = std::max(comp, std::abs(d[j] * gap));
    }
  }
  for (int i = 0; i < m_; ++i) {
    if (model_.rel(i) == Relation::eq) continue;
    double slack = x_[n_ + i];  // b - row activity
    comp = std::max(comp, std::abs(y[i] * slack));
  }
  sol.dual_residual = dres;
  sol.comp_slack_residual = comp;

  if (status == SolveStatus::infeasible && phase1_duals_.size() == m_)
    sol.phase1_row_duals = phase1_duals_;

  sol.basis.vstat.assign(stat_.begin(), stat_.end());
  return sol;
}

}  // namespace

LPSolution solve(const LPModel& model, const SimplexOptions& opts) {
  Simplex s(model, opts);
  return s.run();
}

}  // namespace homot

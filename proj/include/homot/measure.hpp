#pragma once

#include "homot/errors.hpp"

#include <Eigen/Core>

#include <cmath>
#include <string>
#include <vector>

namespace homot {

// Call-quote curve admits arbitrage; `strike` names the offending quote.
struct arbitrage_error : input_error {
  arbitrage_error(const std::string& msg, double strike_)
      : input_error(msg), strike(strike_) {}
  double strike;
};

// Atoms closer than this are merged into one (keeps LP columns well-conditioned).
inline double value_merge_tol(double x) { return 1e-9 * (1.0 + std::abs(x)); }

inline bool values_equal(double a, double b) {
  return std::abs(a - b) <= value_merge_tol(std::max(std::abs(a), std::abs(b)));
}

// Finite measure on the real line: strictly increasing atom values, weights >= 0.
// Total mass is unconstrained.
class FiniteMeasure {
 public:
  FiniteMeasure() = default;

  // Sorts, merges near-duplicate values and drops zero-weight atoms.
  static FiniteMeasure from_atoms(std::vector<std::pair<double, double>> atoms);

  const Eigen::ArrayXd& values() const { return values_; }
  const Eigen::ArrayXd& weights() const { return weights_; }
  Eigen::Index size() const { return values_.size(); }
  bool empty() const { return values_.size() == 0; }

  double mass() const { return weights_.sum(); }
  double mean() const { return (values_ * weights_).sum(); }

  // Index of the atom at x (tolerance match), or -1.
  Eigen::Index find(double x) const;
  double weight_at(double x) const {
    Eigen::Index i = find(x);
    return i < 0 ? 0.0 : weights_[i];
  }

 private:
  friend class DiscreteMeasure;
  FiniteMeasure(Eigen::ArrayXd v, Eigen::ArrayXd w)
      : values_(std::move(v)), weights_(std::move(w)) {}

  Eigen::ArrayXd values_;
  Eigen::ArrayXd weights_;
};

// Probability measure: a FiniteMeasure with weights > 0 and total mass 1
// (absolute tolerance 1e-12).
class DiscreteMeasure {
 public:
  DiscreteMeasure() = default;

  // Validates total mass within 1e-12 of 1.
  static DiscreteMeasure from_atoms(std::vector<std::pair<double, double>> atoms);
  // Rescales to total mass 1 (mass must be positive).
  static DiscreteMeasure normalized(std::vector<std::pair<double, double>> atoms);

  const Eigen::ArrayXd& values() const { return base_.values(); }
  const Eigen::ArrayXd& weights() const { return base_.weights(); }
  Eigen::Index size() const { return base_.size(); }
  double mean() const { return base_.mean(); }
  Eigen::Index find(double x) const { return base_.find(x); }
  double weight_at(double x) const { return base_.weight_at(x); }
  const FiniteMeasure& as_finite() const { return base_; }

 private:
  explicit DiscreteMeasure(FiniteMeasure base) : base_(std::move(base)) {}
  FiniteMeasure base_;
};

// E[(X - k)^+] under mu.
double call_price(const FiniteMeasure& mu, double strike);
double call_price(const DiscreteMeasure& mu, double strike);

// Atomwise minimum of the two weight functions: the discrete meet measure.
// Disjoint supports yield the (valid) zero measure.
FiniteMeasure meet(const DiscreteMeasure& mu, const DiscreteMeasure& nu);

struct ConvexOrderReport {
  bool ordered = false;
  double mean_gap = 0.0;        // |mean(mu) - mean(nu)|
  double worst_violation = 0.0; // max_k (call_mu(k) - call_nu(k)), 0 if none
  double worst_strike = 0.0;
};

// mu <=cx nu: equal means and call prices dominated at every union-support strike.
ConvexOrderReport convex_order(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                               double tol = 1e-9);

// Breeden-Litzenberger second difference on a uniformly spaced strike grid.
// Requires >= 3 quotes, convex nonincreasing prices and a zero final price.
DiscreteMeasure from_call_quotes(const std::vector<double>& strikes,
                                 const std::vector<double>& prices);

// Quantile-band conditional-mean quantization of X = x0*exp(sigma*W_t - sigma^2 t/2).
DiscreteMeasure quantize_lognormal(double x0, double sigma, double t, int n);

// Splits each atom between its grid neighbours preserving the mean.
DiscreteMeasure project_to_grid(const DiscreteMeasure& mu, const std::vector<double>& grid);

// Uniform distribution on t+1 equally spaced points centred at `center`
// (spacing `step`, full width t*step).
DiscreteMeasure uniform_band(int t, double center, double step = 2.0);

std::vector<double> linspace(double lo, double hi, int n);

// Standard normal CDF and its inverse.
double norm_cdf(double x);
double norm_ppf(double p);

// CSV formats: measures as `value,weight`, quotes as `strike,price` (headers required).
DiscreteMeasure read_measure_csv(const std::string& path);
void write_measure_csv(const std::string& path, const DiscreteMeasure& mu);
void read_call_quotes_csv(const std::string& path, std::vector<double>& strikes,
                          std::vector<double>& prices);

}  // namespace homot

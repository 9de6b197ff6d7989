#include "homot/measure.hpp"

#include <algorithm>
#include <cmath>
#include <charconv>
#include <fstream>
#include <sstream>

namespace homot {

namespace {

// Sorts by value, merges near-duplicates (summing mass-weighted values to keep
// the mean exact) and drops zero-weight atoms.
std::pair<Eigen::ArrayXd, Eigen::ArrayXd> canonicalize(
    std::vector<std::pair<double, double>> atoms, bool allow_zero_drop = true) {
  for (const auto& [v, w] : atoms) {
    if (!std::isfinite(v) || !std::isfinite(w))
      throw input_error("measure atom with non-finite value or weight");
    if (w < 0.0) throw input_error("measure atom with negative weight");
  }
  std::sort(atoms.begin(), atoms.end());
  std::vector<double> vals, wts;
  vals.reserve(atoms.size());
  wts.reserve(atoms.size());
  for (const auto& [v, w] : atoms) {
    if (!vals.empty() && values_equal(vals.back(), v)) {
      double tw = wts.back() + w;
      if (tw > 0.0) vals.back() = (vals.back() * wts.back() + v * w) / tw;
      wts.back() = tw;
    } else {
      vals.push_back(v);
      wts.push_back(w);
    }
  }
  if (allow_zero_drop) {
    std::size_t k = 0;
    for (std::size_t i = 0; i < vals.size(); ++i) {
      if (wts[i] > 0.0) {
        vals[k] = vals[i];
        wts[k] = wts[i];
        ++k;
      }
    }
    vals.resize(k);
    wts.resize(k);
  }
  Eigen::ArrayXd v = Eigen::Map<Eigen::ArrayXd>(vals.data(), vals.size());
  Eigen::ArrayXd w = Eigen::Map<Eigen::ArrayXd>(wts.data(), wts.size());
  return {std::move(v), std::move(w)};
}

}  // namespace

FiniteMeasure FiniteMeasure::from_atoms(std::vector<std::pair<double, double>> atoms) {
  auto [v, w] = canonicalize(std::move(atoms));
  return FiniteMeasure(std::move(v), std::move(w));
}

Eigen::Index FiniteMeasure::find(double x) const {
  const double* begin = values_.data();
  const double* end = begin + values_.size();
  const double* it = std::lower_bound(begin, end, x - value_merge_tol(x));
  if (it != end && values_equal(*it, x)) return it - begin;
  return -1;
}

DiscreteMeasure DiscreteMeasure::from_atoms(std::vector<std::pair<double, double>> atoms) {
  FiniteMeasure base = FiniteMeasure::from_atoms(std::move(atoms));
  double m = base.mass();
  if (std::abs(m - 1.0) > 1e-12)
    throw input_error("probability measure has total mass " + std::to_string(m));
  return DiscreteMeasure(std::move(base));
}

DiscreteMeasure DiscreteMeasure::normalized(std::vector<std::pair<double, double>> atoms) {
  FiniteMeasure base = FiniteMeasure::from_atoms(std::move(atoms));
  double m = base.mass();
  if (m <= 0.0) throw input_error("cannot normalize a measure with zero mass");
  return DiscreteMeasure(FiniteMeasure(base.values_, base.weights_ / m));
}

double call_price(const FiniteMeasure& mu, double strike) {
  return ((mu.values() - strike).max(0.0) * mu.weights()).sum();
}

double call_price(const DiscreteMeasure& mu, double strike) {
  return call_price(mu.as_finite(), strike);
}

FiniteMeasure meet(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  std::vector<std::pair<double, double>> atoms;
  Eigen::Index i = 0, j = 0;
  while (i < mu.size() && j < nu.size()) {
    double a = mu.values()[i], b = nu.values()[j];
    if (values_equal(a, b)) {
      atoms.emplace_back(a, std::min(mu.weights()[i], nu.weights()[j]));
      ++i;
      ++j;
    } else if (a < b) {
      ++i;
    } else {
      ++j;
    }
  }
  return FiniteMeasure::from_atoms(std::move(atoms));
}

ConvexOrderReport convex_order(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                               double tol) {
  ConvexOrderReport rep;
  rep.mean_gap = std::abs(mu.mean() - nu.mean());
  // The potential difference is piecewise linear with kinks at union atoms and
  // vanishes at both tails when means agree, so checking at atoms suffices.
  for (const auto& m : {std::cref(mu), std::cref(nu)}) {
    const auto& vals = m.get().values();
    for (Eigen::Index k = 0; k < vals.size(); ++k) {
      double viol = call_price(mu, vals[k]) - call_price(nu, vals[k]);
      if (viol > rep.worst_violation) {
        rep.worst_violation = viol;
        rep.worst_strike = vals[k];
      }
    }
  }
  rep.ordered = rep.mean_gap <= tol && rep.worst_violation <= tol;
  return rep;
}

DiscreteMeasure from_call_quotes(const std::vector<double>& strikes,
                                 const std::vector<double>& prices) {
  const std::size_t n = strikes.size();
  if (n < 3 || prices.size() != n)
    throw input_error("call quotes need at least 3 strike/price pairs of equal length");
  const double dk = strikes[1] - strikes[0];
  if (dk <= 0.0) throw input_error("strikes must be strictly increasing");
  for (std::size_t i = 1; i + 1 < n; ++i) {
    double step = strikes[i + 1] - strikes[i];
    if (std::abs(step - dk) > 1e-9 * (1.0 + std::abs(dk)))
      throw input_error("strikes must be uniformly spaced");
  }
  const double tol = 1e-9;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (prices[i + 1] > prices[i] + tol)
      throw arbitrage_error("increasing call price at strike " +
                                std::to_string(strikes[i + 1]),
                            strikes[i + 1]);
  }
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (prices[i - 1] - 2.0 * prices[i] + prices[i + 1] < -tol)
      throw arbitrage_error("non-convex call prices at strike " +
                                std::to_string(strikes[i]),
                            strikes[i]);
  }
  if (std::abs(prices[n - 1]) > tol)
    throw input_error("price at the last strike must be 0");

  std::vector<std::pair<double, double>> atoms;
  double interior_mass = 0.0;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    double w = (prices[i - 1] - 2.0 * prices[i] + prices[i + 1]) / dk;
    w = std::max(w, 0.0);
    if (w <= 1e-12) continue;  // second-difference noise
    interior_mass += w;
    atoms.emplace_back(strikes[i], w);
  }
  double boundary = 1.0 - interior_mass;
  if (boundary < -1e-9)
    throw arbitrage_error("call price slope below -1 at strike " +
                              std::to_string(strikes[1]),
                          strikes[1]);
  if (boundary > 1e-12) atoms.emplace_back(strikes[0], boundary);
  return DiscreteMeasure::normalized(std::move(atoms));
}

double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double norm_ppf(double p) {
  if (!(p > 0.0 && p < 1.0)) throw input_error("norm_ppf requires p in (0,1)");
  // Acklam's rational approximation, then one Halley refinement step.
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  double x;
  if (p < plow) {
    double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - plow) {
    double q = p - 0.5, r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  double e = norm_cdf(x) - p;
  double u = e * std::sqrt(2.0 * M_PI) * std::exp(0.5 * x * x);
  x = x - u / (1.0 + 0.5 * x * u);
  return x;
}

DiscreteMeasure quantize_lognormal(double x0, double sigma, double t, int n) {
  if (!(x0 > 0.0) || !(sigma > 0.0) || !(t > 0.0) || n < 1)
    throw input_error("quantize_lognormal requires x0, sigma, t > 0 and n >= 1");
  const double s = sigma * std::sqrt(t);
  std::vector<std::pair<double, double>> atoms;
  atoms.reserve(n);
  // E[exp(s Z - s^2/2); Z in (a,b)] = Phi(b - s) - Phi(a - s); divide by the
  // band probability 1/n to get the conditional mean.
  double prev_shift = 0.0;  // Phi(z_0 - s) with z_0 = -inf
  for (int i = 1; i <= n; ++i) {
    double shift = (i == n) ? 1.0 : norm_cdf(norm_ppf(double(i) / n) - s);
    atoms.emplace_back(x0 * (shift - prev_shift) * n, 1.0 / n);
    prev_shift = shift;
  }
  return DiscreteMeasure::normalized(std::move(atoms));
}

DiscreteMeasure project_to_grid(const DiscreteMeasure& mu, const std::vector<double>& grid) {
  if (grid.size() < 2 || !std::is_sorted(grid.begin(), grid.end()))
    throw input_error("grid must be increasing with at least 2 points");
  const double lo = mu.values()[0], hi = mu.values()[mu.size() - 1];
  if (grid.front() > lo + value_merge_tol(lo) || grid.back() < hi - value_merge_tol(hi))
    throw input_error("grid does not span the support of the measure");
  std::vector<std::pair<double, double>> atoms;
  for (Eigen::Index i = 0; i < mu.size(); ++i) {
    double x = mu.values()[i], w = mu.weights()[i];
    auto it = std::upper_bound(grid.begin(), grid.end(), x);
    std::size_t hi_idx = std::min<std::size_t>(it - grid.begin(), grid.size() - 1);
    std::size_t lo_idx = hi_idx == 0 ? 0 : hi_idx - 1;
    double g = grid[lo_idx], gp = grid[hi_idx];
    if (values_equal(x, g)) {
      atoms.emplace_back(g, w);
    } else if (values_equal(x, gp)) {
      atoms.emplace_back(gp, w);
    } else {
      // mean-preserving two-point split
      double frac = (x - g) / (gp - g);
      atoms.emplace_back(g, w * (1.0 - frac));
      atoms.emplace_back(gp, w * frac);
    }
  }
  return DiscreteMeasure::normalized(std::move(atoms));
}

DiscreteMeasure uniform_band(int t, double center, double step) {
  if (t < 1) throw input_error("uniform_band requires t >= 1");
  if (!(step > 0.0)) throw input_error("uniform_band requires step > 0");
  std::vector<std::pair<double, double>> atoms;
  atoms.reserve(t + 1);
  for (int i = 0; i <= t; ++i)
    atoms.emplace_back(center + (2.0 * i - t) * step / 2.0, 1.0 / (t + 1));
  return DiscreteMeasure::normalized(std::move(atoms));
}

std::vector<double> linspace(double lo, double hi, int n) {
  if (n < 2 || !(hi > lo)) throw input_error("linspace requires n >= 2 and hi > lo");
  std::vector<double> g(n);
  for (int i = 0; i < n; ++i) g[i] = lo + (hi - lo) * double(i) / (n - 1);
  return g;
}

namespace {

std::vector<std::array<double, 2>> read_two_column_csv(const std::string& path,
                                                       const std::string& c0,
                                                       const std::string& c1) {
  std::ifstream in(path);
  if (!in) throw input_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw input_error(path + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::string expected = c0 + "," + c1;
  if (line != expected)
    throw input_error(path + ": expected header '" + expected + "', got '" + line + "'");
  std::vector<std::array<double, 2>> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::size_t comma = line.find(',');
    if (comma == std::string::npos)
      throw input_error(path + ":" + std::to_string(lineno) + ": expected two columns");
    try {
      rows.push_back({std::stod(line.substr(0, comma)), std::stod(line.substr(comma + 1))});
    } catch (const std::exception&) {
      throw input_error(path + ":" + std::to_string(lineno) + ": cannot parse number");
    }
  }
  return rows;
}

}  // namespace

DiscreteMeasure read_measure_csv(const std::string& path) {
  auto rows = read_two_column_csv(path, "value", "weight");
  std::vector<std::pair<double, double>> atoms;
  for (const auto& r : rows) atoms.emplace_back(r[0], r[1]);
  return DiscreteMeasure::from_atoms(std::move(atoms));
}

void write_measure_csv(const std::string& path, const DiscreteMeasure& mu) {
  std::ofstream out(path);
  if (!out) throw input_error("cannot write " + path);
  out << "value,weight\n";
  for (Eigen::Index i = 0; i < mu.size(); ++i) {
    char vb[32], wb[32];
    auto rv = std::to_chars(vb, vb + sizeof vb, mu.values()[i]);
    auto rw = std::to_chars(wb, wb + sizeof wb, mu.weights()[i]);
    out << std::string_view(vb, rv.ptr - vb) << ',' << std::string_view(wb, rw.ptr - wb)
        << '\n';
  }
}

void read_call_quotes_csv(const std::string& path, std::vector<double>& strikes,
                          std::vector<double>& prices) {
  auto rows = read_two_column_csv(path, "strike", "price");
  strikes.clear();
  prices.clear();
  for (const auto& r : rows) {
    strikes.push_back(r[0]);
    prices.push_back(r[1]);
  }
}

}  // namespace homot

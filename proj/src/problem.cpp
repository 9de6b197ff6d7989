#include "homot/problem.hpp"

#include <algorithm>

namespace homot {

TimeGrid::TimeGrid(std::vector<long> labels) : labels_(std::move(labels)) {
  if (labels_.size() < 2) throw input_error("time grid needs at least 2 labels");
  for (std::size_t i = 1; i < labels_.size(); ++i)
    if (labels_[i] <= labels_[i - 1])
      throw input_error("time grid labels must be strictly increasing");
}

bool TimeGrid::uniform() const {
  long d = labels_[1] - labels_[0];
  for (std::size_t i = 1; i + 1 < labels_.size(); ++i)
    if (labels_[i + 1] - labels_[i] != d) return false;
  return true;
}

TimeGrid TimeGrid::uniform_grid(int n) {
  std::vector<long> l(n);
  for (int i = 0; i < n; ++i) l[i] = i + 1;
  return TimeGrid(std::move(l));
}

DeltaSet build_delta(const TimeGrid& grid) {
  const int n = grid.size();
  DeltaSet out;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      for (int ti = 1; i + ti < n; ++ti) {
        for (int tj = 1; j + tj < n; ++tj) {
          long gap_i = grid.label(i + ti) - grid.label(i);
          long gap_j = grid.label(j + tj) - grid.label(j);
          if (gap_i == gap_j) out.push_back({i, j, ti, tj, gap_i});
        }
      }
    }
  }
  return out;
}

std::string to_string(Mode m) {
  switch (m) {
    case Mode::ot: return "ot";
    case Mode::mot: return "mot";
    case Mode::hmot: return "hmot";
    case Mode::hmot2: return "hmot2";
    case Mode::rhmot: return "rhmot";
    case Mode::pen_hmot: return "pen";
  }
  return "?";
}

std::string to_string(OptSense s) { return s == OptSense::inf ? "inf" : "sup"; }

std::string to_string(RMetric m) { return m == RMetric::tv ? "tv" : "w1"; }

Mode mode_from_string(const std::string& s) {
  if (s == "ot") return Mode::ot;
  if (s == "mot") return Mode::mot;
  if (s == "hmot") return Mode::hmot;
  if (s == "hmot2") return Mode::hmot2;
  if (s == "rhmot") return Mode::rhmot;
  if (s == "pen" || s == "pen_hmot") return Mode::pen_hmot;
  throw input_error("unknown mode '" + s + "'");
}

OptSense sense_from_string(const std::string& s) {
  if (s == "inf") return OptSense::inf;
  if (s == "sup") return OptSense::sup;
  throw input_error("unknown sense '" + s + "' (want inf|sup)");
}

RMetric metric_from_string(const std::string& s) {
  if (s == "tv") return RMetric::tv;
  if (s == "w1") return RMetric::w1;
  throw input_error("unknown metric '" + s + "' (want tv|w1)");
}

std::vector<std::string> ProblemSpec::validate() const {
  std::vector<std::string> warnings;
  if (static_cast<int>(marginals.size()) != grid.size())
    throw input_error("need exactly one marginal per time label (" +
                      std::to_string(grid.size()) + " labels, " +
                      std::to_string(marginals.size()) + " marginals)");
  for (const auto& m : marginals)
    if (m.size() == 0) throw input_error("empty marginal");
  if (payoff.valid() && payoff.max_coordinate() > grid.size())
    throw input_error("payoff references S" + std::to_string(payoff.max_coordinate()) +
                      " but the grid has " + std::to_string(grid.size()) + " time points");
  const bool martingale = mode != Mode::ot;
  for (std::size_t t = 0; t + 1 < marginals.size(); ++t) {
    auto rep = convex_order(marginals[t], marginals[t + 1], 1e-9);
    if (!rep.ordered) {
      std::string msg = "marginals " + std::to_string(t + 1) + " and " +
                        std::to_string(t + 2) + " are not in convex order (worst strike " +
                        std::to_string(rep.worst_strike) + ", violation " +
                        std::to_string(std::max(rep.worst_violation, rep.mean_gap)) + ")";
      warnings.push_back(martingale ? msg + "; martingale problem will be infeasible"
                                    : msg);
    }
  }
  if (mode == Mode::rhmot || mode == Mode::pen_hmot) {
    std::size_t tuples = delta().size();
    if (r.empty())
      throw input_error("mode " + to_string(mode) + " requires r");
    if (r.size() != 1 && r.size() != tuples)
      throw input_error("r must be a scalar or one value per tuple (" +
                        std::to_string(tuples) + " tuples, got " +
                        std::to_string(r.size()) + ")");
    for (double v : r) {
      if (v < 0.0) throw input_error("r must be nonnegative");
      if (mode == Mode::pen_hmot && v <= 0.0)
        throw input_error("penalized mode requires r > 0");
    }
  }
  return warnings;
}

double ProblemSpec::r_for(std::size_t k) const {
  if (r.empty()) throw input_error("no r values configured");
  return r.size() == 1 ? r[0] : r.at(k);
}

}  // namespace homot

#pragma once

// DC power flow and the protection-relay loop.

#include <concepts>
#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "case_model.hpp"
#include "gsdf.hpp"

namespace cascade {

class UnbalancedInjectionError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

struct FlowVector {
  Eigen::VectorXd flows;  // MW per line
  StatusVector line_state;
};

// L = Psi P. Injections must sum to zero within 1e-6 of their scale.
inline FlowVector dc_power_flow(const GsdfMatrix& gsdf, const Eigen::VectorXd& injections) {
  if (injections.size() != gsdf.num_buses()) throw std::invalid_argument("injection vector has wrong length");
  const double imbalance = injections.sum();
  const double scale = std::max(1.0, 0.5 * injections.cwiseAbs().sum());
  if (!(std::abs(imbalance) <= 1e-6 * scale))
    throw UnbalancedInjectionError("injections do not balance (sum " + std::to_string(imbalance) + " MW)");
  FlowVector out{gsdf.values * injections, gsdf.line_state};
  for (Eigen::Index k = 0; k < out.flows.size(); ++k)
    if (!gsdf.line_state[k]) out.flows(k) = 0.0;
  return out;
}

struct RelayOptions {
  bool sequential = false;  // trip only the worst violator per iteration
  double tolerance = 1e-6;  // MW; flows within this of the relay limit do not trip
};

struct RelayOutcome {
  std::vector<std::vector<int>> tripped_lines;  // line ids per iteration
  StatusVector final_state;
  FlowVector final_flows;
  Topology topology;  // for final_state
  int iterations = 0;
};

// Raised when a relay trip separates the network. Carries the trips that
// happened up to and including the separating iteration.
class RelayIslandingError : public IslandingError {
public:
  RelayIslandingError(const IslandingError& cause, std::vector<std::vector<int>> tripped, StatusVector state)
      : IslandingError(cause), tripped_(std::move(tripped)), state_(std::move(state)) {}

  const std::vector<std::vector<int>>& tripped_lines() const { return tripped_; }
  const StatusVector& final_state() const { return state_; }

private:
  std::vector<std::vector<int>> tripped_;
  StatusVector state_;
};

// Line ids whose |flow| exceeds the relay limit by more than `tolerance`.
inline std::vector<int> relay_violations(const CaseData& grid, const FlowVector& f, bool worst_only, double tolerance = 0.0) {
  std::vector<int> out;
  double worst = 0.0;
  for (int k = 0; k < grid.num_lines(); ++k) {
    if (!f.line_state[k]) continue;
    const Line& l = grid.lines[k];
    const double a = std::abs(f.flows(k));
    if (!(a > l.trip_limit() + tolerance)) continue;
    if (!worst_only) {
      out.push_back(l.id);
    } else if (a / l.trip_limit() > worst) {
      worst = a / l.trip_limit();
      out.assign(1, l.id);
    }
  }
  return out;
}

// Trips overloaded lines and re-solves the flow until no breaker operates.
// `next` maps (current topology, line ids to remove) to the new topology and
// may throw IslandingError; it is how callers choose between from-scratch
// factorization, rank updates, or a cache.
template <class NextTopology>
  requires std::invocable<NextTopology&, const Topology&, const std::vector<int>&>
RelayOutcome relay_fixed_point(const CaseData& grid, const Topology& start, const Eigen::VectorXd& injections,
                               NextTopology&& next, const RelayOptions& opt = {}) {
  RelayOutcome out;
  out.topology = start;
  out.final_state = start.line_state();
  out.final_flows = dc_power_flow(*start.gsdf, injections);
  for (;;) {
    const auto trip = relay_violations(grid, out.final_flows, opt.sequential, opt.tolerance);
    if (trip.empty()) break;
    out.tripped_lines.push_back(trip);
    ++out.iterations;
    StatusVector state = out.final_state;
    for (int id : trip) state.set(grid.line_index(id), false);
    try {
      out.topology = next(out.topology, trip);
    } catch (const IslandingError& e) {
      throw RelayIslandingError(e, out.tripped_lines, state);
    }
    out.final_state = state;
    out.final_flows = dc_power_flow(*out.topology.gsdf, injections);
  }
  return out;
}

inline RelayOutcome relay_fixed_point(const CaseData& grid, const Topology& start, const Eigen::VectorXd& injections,
                                      const RelayOptions& opt = {}) {
  return relay_fixed_point(
      grid, start, injections, [&](const Topology& t, const std::vector<int>& ids) { return woodbury_update(grid, t, ids); },
      opt);
}

} // namespace cascade

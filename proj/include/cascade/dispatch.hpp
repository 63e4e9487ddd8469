#pragma once

// Re-dispatch DCOPF.
//
// Variables x = [P; dD] (bus net injection and bus load shedding, MW).
//
//   minimize   c_p^T P + c_d^T dD
//   subject to 1^T P = 0                                  (row 0)
//              Psi P            <= L^b o S_L              (K rows)
//             -Psi P            <= L^b o S_L              (K rows)
//              P - dD           <= C (G_max o S_G) - D    (N rows)
//              dD               <= D                      (N rows)
//             -dD               <= 0                      (N rows)
//             -P + dD           <= D                      (N rows, optional)
//
// The inequality right-hand side splits as b + F phi with
// phi = [G_max o S_G (per generator); D (per bus)]. b depends only on the line
// state, so one assembled LP serves every scenario and generator state of a
// topology; only phi changes.
//
// The last block keeps bus generation P + D - dD nonnegative. Without it the
// LP may absorb power at expensive buses to earn negative cost.

#include <Eigen/Dense>

#include <cstdio>
#include <memory>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "case_model.hpp"
#include "gsdf.hpp"
#include "lp.hpp"
#include "status_vector.hpp"

namespace cascade {

struct DispatchOptions {
  bool gen_nonnegative = true;
  // Cost perturbation c_j += tie_break * (1 + max|c|) * (j + 1) / n makes the
  // optimum unique, so the vertex (and active set) found does not depend on
  // the solver's path.
  double tie_break = 1e-5;
  LpOptions lp;
};

// Constraint row layout (global LP row indices).
struct RowLayout {
  int num_lines = 0, num_buses = 0;
  bool gen_nonnegative = true;

  int flow_upper(int k) const { return 1 + k; }
  int flow_lower(int k) const { return 1 + num_lines + k; }
  int balance(int i) const { return 1 + 2 * num_lines + i; }
  int shed_upper(int i) const { return 1 + 2 * num_lines + num_buses + i; }
  int shed_lower(int i) const { return 1 + 2 * num_lines + 2 * num_buses + i; }
  int gen_lower(int i) const { return 1 + 2 * num_lines + 3 * num_buses + i; }
  int num_inequalities() const { return 2 * num_lines + (gen_nonnegative ? 4 : 3) * num_buses; }
  int num_rows() const { return 1 + num_inequalities(); }
};

// Case-level data shared by all dispatch problems of a run.
struct DispatchModel {
  int num_buses = 0, num_lines = 0, num_generators = 0;
  RowLayout layout;
  Eigen::VectorXd bus_cost;   // c_p, nominal
  Eigen::VectorXd shed_cost;  // c_d, nominal
  Eigen::VectorXd cost;       // perturbed [c_p; c_d]
  std::vector<int> generator_bus;  // bus index per generator
  std::vector<double> flow_limit;  // L^b per line
  DispatchOptions options;

  int num_vars() const { return 2 * num_buses; }
  int num_params() const { return num_generators + num_buses; }
  Eigen::VectorXd nominal_cost() const {
    Eigen::VectorXd c(num_vars());
    c << bus_cost, shed_cost;
    return c;
  }
};

// Bus cost = capacity-weighted average of the unit costs at the bus.
inline DispatchModel make_dispatch_model(const CaseData& grid, const DispatchOptions& opt = {}) {
  DispatchModel m;
  m.num_buses = grid.num_buses();
  m.num_lines = grid.num_lines();
  m.num_generators = grid.num_generators();
  m.layout = {m.num_lines, m.num_buses, opt.gen_nonnegative};
  m.options = opt;
  m.bus_cost = Eigen::VectorXd::Zero(m.num_buses);
  Eigen::VectorXd cap = Eigen::VectorXd::Zero(m.num_buses);
  for (const auto& g : grid.generators) {
    const int i = grid.bus_index(g.bus);
    m.generator_bus.push_back(i);
    m.bus_cost(i) += g.cost * g.p_max;
    cap(i) += g.p_max;
  }
  for (int i = 0; i < m.num_buses; ++i) m.bus_cost(i) = cap(i) > 0.0 ? m.bus_cost(i) / cap(i) : 0.0;
  m.shed_cost = Eigen::Map<const Eigen::VectorXd>(grid.shed_cost.data(), m.num_buses);
  for (const auto& l : grid.lines) m.flow_limit.push_back(l.flow_limit);

  m.cost = m.nominal_cost();
  const int n = m.num_vars();
  const double scale = opt.tie_break * (1.0 + m.cost.cwiseAbs().maxCoeff());
  for (int j = 0; j < n; ++j) m.cost(j) += scale * (j + 1) / n;
  return m;
}

// LP for one line state. `lp.b` holds the base vector b; the right-hand side
// for a particular phi comes from rhs().
struct DispatchLp {
  LinearProgram lp;
  StatusVector line_state;
};

inline DispatchLp build_lp(const DispatchModel& m, const GsdfMatrix& gsdf) {
  if (gsdf.num_lines() != m.num_lines || gsdf.num_buses() != m.num_buses)
    throw std::invalid_argument("GSDF dimensions do not match the case");
  const int n = m.num_buses, k = m.num_lines, nv = m.num_vars();
  const RowLayout& lay = m.layout;
  DispatchLp out;
  out.line_state = gsdf.line_state;
  LinearProgram& lp = out.lp;
  lp.c = m.cost;
  lp.a_eq = Eigen::MatrixXd::Zero(1, nv);
  lp.a_eq.leftCols(n).setOnes();
  lp.b_eq = Eigen::VectorXd::Zero(1);

  lp.a = Eigen::MatrixXd::Zero(lay.num_inequalities(), nv);
  lp.b = Eigen::VectorXd::Zero(lay.num_inequalities());
  for (int l = 0; l < k; ++l) {
    const double lim = gsdf.line_state[l] ? m.flow_limit[l] : 0.0;
    lp.a.row(lay.flow_upper(l) - 1).head(n) = gsdf.values.row(l);
    lp.a.row(lay.flow_lower(l) - 1).head(n) = -gsdf.values.row(l);
    lp.b(lay.flow_upper(l) - 1) = lim;
    lp.b(lay.flow_lower(l) - 1) = lim;
  }
  for (int i = 0; i < n; ++i) {
    lp.a(lay.balance(i) - 1, i) = 1.0;
    lp.a(lay.balance(i) - 1, n + i) = -1.0;
    lp.a(lay.shed_upper(i) - 1, n + i) = 1.0;
    lp.a(lay.shed_lower(i) - 1, n + i) = -1.0;
    if (lay.gen_nonnegative) {
      lp.a(lay.gen_lower(i) - 1, i) = -1.0;
      lp.a(lay.gen_lower(i) - 1, n + i) = 1.0;
    }
  }
  return out;
}

// phi = [available capacity of each in-service generator; bus loads].
inline Eigen::VectorXd parameter_vector(const std::vector<double>& generator_capacity, const StatusVector& gen_state,
                                        const std::vector<double>& load) {
  const int g = static_cast<int>(generator_capacity.size());
  const int n = static_cast<int>(load.size());
  Eigen::VectorXd phi(g + n);
  for (int j = 0; j < g; ++j) phi(j) = gen_state[j] ? generator_capacity[j] : 0.0;
  for (int i = 0; i < n; ++i) phi(g + i) = load[i];
  return phi;
}

// Full inequality right-hand side b + F phi.
inline void fill_rhs(const DispatchModel& m, const DispatchLp& d, const Eigen::VectorXd& phi, Eigen::VectorXd& rhs) {
  const int n = m.num_buses;
  const RowLayout& lay = m.layout;
  rhs = d.lp.b;
  Eigen::VectorXd bus_cap = Eigen::VectorXd::Zero(n);
  for (int g = 0; g < m.num_generators; ++g) bus_cap(m.generator_bus[g]) += phi(g);
  for (int i = 0; i < n; ++i) {
    const double load = phi(m.num_generators + i);
    rhs(lay.balance(i) - 1) += bus_cap(i) - load;
    rhs(lay.shed_upper(i) - 1) += load;
    if (lay.gen_nonnegative) rhs(lay.gen_lower(i) - 1) += load;
  }
}

// Dense F, for inspection and tests (rows follow the inequality rows).
inline Eigen::MatrixXd parameter_map(const DispatchModel& m) {
  const RowLayout& lay = m.layout;
  const int n = m.num_buses, g = m.num_generators;
  Eigen::MatrixXd f = Eigen::MatrixXd::Zero(lay.num_inequalities(), m.num_params());
  for (int j = 0; j < g; ++j) f(lay.balance(m.generator_bus[j]) - 1, j) = 1.0;
  for (int i = 0; i < n; ++i) {
    f(lay.balance(i) - 1, g + i) = -1.0;
    f(lay.shed_upper(i) - 1, g + i) = 1.0;
    if (lay.gen_nonnegative) f(lay.gen_lower(i) - 1, g + i) = 1.0;
  }
  return f;
}

// The always-feasible point P = 0, dD = D.
inline Eigen::VectorXd shed_everything_point(const DispatchModel& m, const Eigen::VectorXd& phi) {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(m.num_vars());
  x.tail(m.num_buses) = phi.tail(m.num_buses);
  return x;
}

struct DispatchProblem {
  StatusVector line_state;
  StatusVector gen_state;
  std::vector<double> generator_capacity;  // G_max per generator (scenario-adjusted for wind)
  std::vector<double> load;                // D per bus
  std::shared_ptr<const GsdfMatrix> gsdf;

  Eigen::VectorXd phi() const { return parameter_vector(generator_capacity, gen_state, load); }
};

enum class DispatchStatus { optimal, infeasible };

struct DispatchSolution {
  DispatchStatus status = DispatchStatus::infeasible;
  Eigen::VectorXd injection;  // P
  Eigen::VectorXd shedding;   // dD
  double objective = 0.0;     // nominal costs
  std::vector<int> active;
  Eigen::VectorXd multipliers;
  int iterations = 0;
  bool from_region = false;

  double total_shed() const { return shedding.size() ? shedding.sum() : 0.0; }
};

class DispatchError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

inline DispatchSolution solution_from_x(const DispatchModel& m, const Eigen::VectorXd& x) {
  DispatchSolution s;
  s.status = DispatchStatus::optimal;
  s.injection = x.head(m.num_buses);
  s.shedding = x.tail(m.num_buses);
  s.objective = m.nominal_cost().dot(x);
  return s;
}

struct BaselineResult {
  DispatchSolution solution;
  Eigen::MatrixXd active_inverse;  // empty unless optimal
};

// Full solve from the shed-everything vertex.
inline BaselineResult solve_baseline(const DispatchModel& m, const DispatchLp& d, const Eigen::VectorXd& phi) {
  LinearProgram lp = d.lp;
  fill_rhs(m, d, phi, lp.b);
  LpResult r = solve_lp(lp, shed_everything_point(m, phi), m.options.lp);
  BaselineResult out;
  if (r.status == LpStatus::unbounded)
    throw DispatchError("re-dispatch LP is unbounded; the model is malformed");
  if (r.status != LpStatus::optimal) {
    out.solution.status = DispatchStatus::infeasible;
    out.solution.iterations = r.iterations;
    return out;
  }
  out.solution = solution_from_x(m, r.x);
  out.solution.active = std::move(r.active);
  out.solution.multipliers = std::move(r.multipliers);
  out.solution.iterations = r.iterations;
  out.active_inverse = std::move(r.active_inverse);
  return out;
}

inline DispatchSolution solve_baseline(const DispatchModel& m, const DispatchProblem& p) {
  if (!p.gsdf) throw std::invalid_argument("dispatch problem has no GSDF");
  return solve_baseline(m, build_lp(m, *p.gsdf), p.phi()).solution;
}

// Constraint check of a dispatch solution against its problem (MW).
inline double dispatch_violation(const DispatchModel& m, const DispatchLp& d, const Eigen::VectorXd& phi,
                                 const DispatchSolution& s) {
  LinearProgram lp = d.lp;
  fill_rhs(m, d, phi, lp.b);
  Eigen::VectorXd x(m.num_vars());
  x << s.injection, s.shedding;
  return max_violation(lp, x);
}

// CPLEX LP text format, for cross-checking with external solvers.
inline void write_lp_file(const DispatchModel& m, const DispatchLp& d, const Eigen::VectorXd& phi, std::ostream& out) {
  LinearProgram lp = d.lp;
  fill_rhs(m, d, phi, lp.b);
  const int n = m.num_buses;
  auto name = [n](int j) { return (j < n ? "P" : "dD") + std::to_string((j < n ? j : j - n) + 1); };
  char buf[64];
  auto term = [&](double v, int j, bool first) {
    std::snprintf(buf, sizeof buf, "%s%.17g %s", first ? (v < 0 ? "-" : "") : (v < 0 ? " - " : " + "), std::abs(v),
                  name(j).c_str());
    out << buf;
  };
  auto row_out = [&](const Eigen::RowVectorXd& a) {
    bool first = true;
    for (int j = 0; j < a.size(); ++j) {
      if (a(j) == 0.0) continue;
      term(a(j), j, first);
      first = false;
    }
    if (first) out << "0 P1";
  };
  out << "\\ re-dispatch LP, line state " << d.line_state.to_string() << "\nMinimize\n obj: ";
  row_out(lp.c.transpose());
  out << "\nSubject To\n r0: ";
  row_out(lp.a_eq.row(0));
  out << " = 0\n";
  for (int i = 0; i < lp.num_ineq(); ++i) {
    out << " r" << i + 1 << ": ";
    row_out(lp.a.row(i));
    std::snprintf(buf, sizeof buf, " <= %.17g\n", lp.b(i));
    out << buf;
  }
  out << "Bounds\n";
  for (int j = 0; j < m.num_vars(); ++j) out << " " << name(j) << " free\n";
  out << "End\n";
}

} // namespace cascade

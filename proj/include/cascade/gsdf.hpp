#pragma once

// Generation shifted distribution factors.
//
// For a line state S_L the bus susceptance matrix is B = sum_k b_k E_k E_k^T
// over in-service lines and the branch matrix has row b_k E_k^T for every
// in-service line (zero rows otherwise). Removing the reference row and column
// gives B~ and B~_f; Psi~ = B~_f B~^-1, and Psi is Psi~ with a zero column
// inserted at the reference bus.
//
// The inverse is kept in "grounded" form: an N x N matrix equal to B~^-1 with
// a zero row and column at the reference bus. Then Psi = B_f * inverse and
// rank updates can be written with full-length incidence columns.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <memory>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "case_model.hpp"
#include "status_vector.hpp"

namespace cascade {

class IslandingError : public std::runtime_error {
public:
  IslandingError(const std::string& what, std::vector<int> islands, int count)
      : std::runtime_error(what), islands_(std::move(islands)), count_(count) {}

  // Island label per bus (0 is the island of bus 1).
  const std::vector<int>& islands() const { return islands_; }
  int island_count() const { return count_; }

private:
  std::vector<int> islands_;
  int count_;
};

struct GsdfMatrix {
  Eigen::MatrixXd values;  // K x N
  StatusVector line_state;
  int reference_bus = 0;   // bus id

  int num_lines() const { return static_cast<int>(values.rows()); }
  int num_buses() const { return static_cast<int>(values.cols()); }
};

struct SusceptanceSystem {
  Eigen::MatrixXd b;            // N x N
  Eigen::MatrixXd b_f;          // K x N
  Eigen::MatrixXd inverse;      // grounded B~^-1, N x N
  StatusVector line_state;
  int reference_index = 0;

  Eigen::MatrixXd reduced_b() const { return drop_column(drop_row(b)); }
  Eigen::MatrixXd reduced_b_f() const { return drop_column(b_f); }
  Eigen::MatrixXd reduced_inverse() const { return drop_column(drop_row(inverse)); }

private:
  Eigen::MatrixXd drop_row(const Eigen::MatrixXd& m) const {
    Eigen::MatrixXd out(m.rows() - 1, m.cols());
    const Eigen::Index r = reference_index;
    out.topRows(r) = m.topRows(r);
    out.bottomRows(m.rows() - 1 - r) = m.bottomRows(m.rows() - 1 - r);
    return out;
  }
  Eigen::MatrixXd drop_column(const Eigen::MatrixXd& m) const {
    Eigen::MatrixXd out(m.rows(), m.cols() - 1);
    const Eigen::Index r = reference_index;
    out.leftCols(r) = m.leftCols(r);
    out.rightCols(m.cols() - 1 - r) = m.rightCols(m.cols() - 1 - r);
    return out;
  }
};

// A GSDF together with the susceptance system it came from. Both are
// immutable once built and shared between cache entries and search nodes.
struct Topology {
  std::shared_ptr<const GsdfMatrix> gsdf;
  std::shared_ptr<const SusceptanceSystem> system;

  const StatusVector& line_state() const { return gsdf->line_state; }
};

inline void check_connected(const CaseData& grid, const StatusVector& line_state) {
  int count = 0;
  auto islands = bus_islands(grid, line_state, &count);
  if (count > 1)
    throw IslandingError("line state splits the network into " + std::to_string(count) + " islands", std::move(islands),
                         count);
}

inline Eigen::MatrixXd assemble_b(const CaseData& grid, const StatusVector& line_state) {
  const int n = grid.num_buses();
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(n, n);
  for (int k = 0; k < grid.num_lines(); ++k) {
    if (!line_state[k]) continue;
    const Line& l = grid.lines[k];
    const int i = l.from_bus - 1, j = l.to_bus - 1;
    const double s = l.susceptance();
    b(i, i) += s;
    b(j, j) += s;
    b(i, j) -= s;
    b(j, i) -= s;
  }
  return b;
}

inline Eigen::MatrixXd assemble_b_f(const CaseData& grid, const StatusVector& line_state) {
  Eigen::MatrixXd bf = Eigen::MatrixXd::Zero(grid.num_lines(), grid.num_buses());
  for (int k = 0; k < grid.num_lines(); ++k) {
    if (!line_state[k]) continue;
    const Line& l = grid.lines[k];
    bf(k, l.from_bus - 1) = l.susceptance();
    bf(k, l.to_bus - 1) = -l.susceptance();
  }
  return bf;
}

// Psi rows from the grounded inverse: row k = b_k (Z_from - Z_to).
inline Eigen::MatrixXd gsdf_from_inverse(const CaseData& grid, const StatusVector& line_state, const Eigen::MatrixXd& z) {
  Eigen::MatrixXd psi = Eigen::MatrixXd::Zero(grid.num_lines(), grid.num_buses());
  for (int k = 0; k < grid.num_lines(); ++k) {
    if (!line_state[k]) continue;
    const Line& l = grid.lines[k];
    psi.row(k) = l.susceptance() * (z.row(l.from_bus - 1) - z.row(l.to_bus - 1));
  }
  return psi;
}

// Dense factorization of B~ from scratch.
inline Topology build_topology(const CaseData& grid, const StatusVector& line_state) {
  if (static_cast<int>(line_state.size()) != grid.num_lines()) throw std::invalid_argument("line state has wrong length");
  check_connected(grid, line_state);

  auto sys = std::make_shared<SusceptanceSystem>();
  sys->line_state = line_state;
  sys->reference_index = grid.reference_index();
  sys->b = assemble_b(grid, line_state);
  sys->b_f = assemble_b_f(grid, line_state);

  const int n = grid.num_buses();
  const int r = sys->reference_index;
  sys->inverse = Eigen::MatrixXd::Zero(n, n);
  if (n > 1) {
    const Eigen::MatrixXd inv = Eigen::PartialPivLU<Eigen::MatrixXd>(sys->reduced_b()).inverse();
    // scatter back around the reference row/column
    for (int i = 0, ii = 0; i < n; ++i) {
      if (i == r) continue;
      for (int j = 0, jj = 0; j < n; ++j) {
        if (j == r) continue;
        sys->inverse(i, j) = inv(ii, jj);
        ++jj;
      }
      ++ii;
    }
  }

  auto psi = std::make_shared<GsdfMatrix>();
  psi->line_state = line_state;
  psi->reference_bus = grid.buses[r].id;
  psi->values = gsdf_from_inverse(grid, line_state, sys->inverse);
  return {std::move(psi), std::move(sys)};
}

inline GsdfMatrix build_gsdf(const CaseData& grid, const StatusVector& line_state) {
  return *build_topology(grid, line_state).gsdf;
}

// Removes `removed_lines` (ids) from an existing topology with the
// Sherman-Morrison-Woodbury identity:
//   Z_new = Z - X c X^T,  X = Z M,  c = (-diag(b)^-1 + M^T Z M)^-1
//   Psi_new = Psi_0 - (Psi_0 M) c X^T
// where M collects the incidence columns of the removed lines and Psi_0 is
// the old Psi with the removed rows zeroed. Only an l x l system is solved.
inline Topology woodbury_update(const CaseData& grid, const Topology& from, const std::vector<int>& removed_lines) {
  if (removed_lines.empty()) return from;
  const SusceptanceSystem& sys = *from.system;
  StatusVector next = sys.line_state;
  std::vector<int> idx;
  for (int id : removed_lines) {
    const int k = grid.line_index(id);
    if (!next[k]) throw std::invalid_argument("line " + std::to_string(id) + " is not in service");
    next.set(k, false);
    idx.push_back(k);
  }
  // Connectivity is decided combinatorially so the outcome never depends on
  // round-off; the capacitance pivots below are a second line of defence.
  check_connected(grid, next);

  const int n = grid.num_buses();
  const int l = static_cast<int>(idx.size());
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, l);
  Eigen::VectorXd reactance(l);
  for (int c = 0; c < l; ++c) {
    const Line& line = grid.lines[idx[c]];
    m(line.from_bus - 1, c) = 1.0;
    m(line.to_bus - 1, c) = -1.0;
    reactance(c) = line.reactance;
  }
  const Eigen::MatrixXd x = sys.inverse * m;
  Eigen::MatrixXd cap = m.transpose() * x;
  const double scale = std::max(reactance.maxCoeff(), cap.cwiseAbs().maxCoeff());
  cap.diagonal() -= reactance;

  Eigen::FullPivLU<Eigen::MatrixXd> lu(cap);
  double min_pivot = std::abs(lu.matrixLU()(0, 0));
  for (int c = 1; c < l; ++c) min_pivot = std::min(min_pivot, std::abs(lu.matrixLU()(c, c)));
  if (!(min_pivot > 1e-9 * scale)) return build_topology(grid, next);  // ill-conditioned: refactor

  const Eigen::MatrixXd c_inv = lu.inverse();
  auto new_sys = std::make_shared<SusceptanceSystem>();
  new_sys->line_state = next;
  new_sys->reference_index = sys.reference_index;
  new_sys->b = sys.b - m * reactance.cwiseInverse().asDiagonal() * m.transpose();
  new_sys->b_f = sys.b_f;
  for (int k : idx) new_sys->b_f.row(k).setZero();
  const Eigen::MatrixXd xc = x * c_inv;
  new_sys->inverse = sys.inverse - xc * x.transpose();

  auto psi = std::make_shared<GsdfMatrix>();
  psi->line_state = next;
  psi->reference_bus = from.gsdf->reference_bus;
  psi->values = from.gsdf->values;
  for (int k : idx) psi->values.row(k).setZero();
  const Eigen::MatrixXd psi_m = psi->values * m;
  psi->values.noalias() -= (psi_m * c_inv) * x.transpose();
  return {std::move(psi), std::move(new_sys)};
}

inline GsdfMatrix woodbury_update(const CaseData& grid, const SusceptanceSystem& sys, const GsdfMatrix& gsdf,
                                  const std::vector<int>& removed_lines) {
  Topology from{std::make_shared<GsdfMatrix>(gsdf), std::make_shared<SusceptanceSystem>(sys)};
  return *woodbury_update(grid, from, removed_lines).gsdf;
}

// Debug dump of Psi, one row per line.
inline void write_gsdf(const GsdfMatrix& g, std::ostream& out) {
  const Eigen::IOFormat fmt(Eigen::FullPrecision, Eigen::DontAlignCols, " ", "\n");
  out << g.values.format(fmt) << '\n';
}

} // namespace cascade

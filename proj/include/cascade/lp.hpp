#pragma once

// Dense linear programs in inequality form
//
//   minimize c^T x  subject to  A_eq x = b_eq,  A x <= b
//
// solved by an active-set (vertex) simplex method. A vertex is described by a
// working set of n linearly independent tight rows (all equality rows plus
// n - m_eq inequality rows). Each iteration frees the inequality row with the
// most negative multiplier and moves along the edge until another row becomes
// tight. The inverse of the working-set matrix is carried explicitly and
// updated by Sherman-Morrison row replacement, with periodic refactoring.
//
// Rows are numbered globally: equality rows first, then inequality rows.
// The multipliers satisfy c + A_w^T lambda = 0 with lambda >= 0 on the
// inequality rows of the working set at an optimum.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace cascade {

struct LinearProgram {
  Eigen::VectorXd c;
  Eigen::MatrixXd a_eq;
  Eigen::VectorXd b_eq;
  Eigen::MatrixXd a;
  Eigen::VectorXd b;

  int num_vars() const { return static_cast<int>(c.size()); }
  int num_eq() const { return static_cast<int>(a_eq.rows()); }
  int num_ineq() const { return static_cast<int>(a.rows()); }
  int num_rows() const { return num_eq() + num_ineq(); }
};

enum class LpStatus { optimal, infeasible, unbounded, iteration_limit };

inline const char* to_string(LpStatus s) {
  switch (s) {
  case LpStatus::optimal: return "optimal";
  case LpStatus::infeasible: return "infeasible";
  case LpStatus::unbounded: return "unbounded";
  case LpStatus::iteration_limit: return "iteration-limit";
  }
  return "?";
}

struct LpOptions {
  double primal_tol = 1e-9;  // relative to 1 + |rhs|
  double dual_tol = 1e-9;    // relative to 1 + |c|
  double pivot_tol = 1e-9;
  int refactor_every = 40;
  int bland_after = 50;      // consecutive degenerate steps before Bland's rule
  int max_iterations = 5000;
};

struct LpResult {
  LpStatus status = LpStatus::infeasible;
  Eigen::VectorXd x;
  double objective = 0.0;
  std::vector<int> active;        // sorted global row indices, size n
  Eigen::VectorXd multipliers;    // aligned with `active`
  Eigen::MatrixXd active_inverse; // inverse of the active-row matrix
  int iterations = 0;
};

namespace detail {

class ActiveSetSimplex {
public:
  ActiveSetSimplex(const LinearProgram& lp, const LpOptions& opt) : lp_(lp), opt_(opt), n_(lp.num_vars()) {
    if (lp.a_eq.cols() != n_ && lp.num_eq() > 0) throw std::invalid_argument("equality block has wrong width");
    if (lp.a.cols() != n_ && lp.num_ineq() > 0) throw std::invalid_argument("inequality block has wrong width");
    if (lp.b_eq.size() != lp.num_eq() || lp.b.size() != lp.num_ineq())
      throw std::invalid_argument("right-hand side has wrong length");
    cnorm_ = lp.c.size() ? lp.c.cwiseAbs().maxCoeff() : 0.0;
    row_scale_.resize(lp.num_ineq());
    for (int i = 0; i < lp.num_ineq(); ++i) row_scale_(i) = 1.0 + lp.a.row(i).cwiseAbs().maxCoeff();
  }

  LpResult run(const Eigen::VectorXd& x0) {
    LpResult res;
    if (x0.size() != n_) throw std::invalid_argument("starting point has wrong length");
    x_ = x0;
    ax_ = lp_.a * x_;
    if (!feasible(x_, 1e-7)) {
      res.status = LpStatus::infeasible;
      return res;
    }
    in_work_.assign(lp_.num_rows(), false);
    if (!crash(res)) return res;
    refactor();
    if (!phase2(res)) return res;
    finish(res);
    return res;
  }

private:
  Eigen::RowVectorXd row(int r) const { return r < lp_.num_eq() ? lp_.a_eq.row(r) : lp_.a.row(r - lp_.num_eq()); }
  double rhs(int r) const { return r < lp_.num_eq() ? lp_.b_eq(r) : lp_.b(r - lp_.num_eq()); }
  double row_tol(int r) const { return opt_.primal_tol * (1.0 + std::abs(rhs(r))); }

  bool feasible(const Eigen::VectorXd& x, double tol) const {
    for (int r = 0; r < lp_.num_eq(); ++r)
      if (std::abs(lp_.a_eq.row(r).dot(x) - lp_.b_eq(r)) > tol * (1.0 + std::abs(lp_.b_eq(r)))) return false;
    if (lp_.num_ineq() > 0) {
      const Eigen::VectorXd s = lp_.a * x - lp_.b;
      for (int i = 0; i < lp_.num_ineq(); ++i)
        if (s(i) > tol * (1.0 + std::abs(lp_.b(i)))) return false;
    }
    return true;
  }

  // Adds `r` to the orthonormal basis q_ of working-set rows if independent.
  bool try_add(int r) {
    Eigen::VectorXd v = row(r).transpose();
    const double norm0 = v.norm();
    if (norm0 == 0.0) return false;
    for (const auto& q : basis_) v -= q.dot(v) * q;
    if (v.norm() < 0.7 * norm0)  // cancellation: orthogonalize once more
      for (const auto& q : basis_) v -= q.dot(v) * q;
    if (v.norm() <= 1e-10 * norm0) return false;
    basis_.push_back(v / v.norm());
    work_.push_back(r);
    in_work_[r] = true;
    return true;
  }

  // Move from a feasible point to a vertex: collect independent tight rows,
  // then follow the projected descent direction (or any free direction)
  // until n rows are tight.
  bool crash(LpResult& res) {
    for (int r = 0; r < lp_.num_eq(); ++r)
      if (!try_add(r)) throw std::invalid_argument("equality rows are linearly dependent");
    add_tight_rows();
    int guard = 0;
    while (static_cast<int>(work_.size()) < n_) {
      if (++guard > 4 * (n_ + lp_.num_rows())) throw std::runtime_error("crash phase failed to reach a vertex");
      Eigen::VectorXd d = project(-lp_.c);
      if (d.norm() <= 1e-12 * (1.0 + cnorm_)) {
        // objective is flat on this face: pick a coordinate direction
        d.setZero();
        for (int j = 0; j < n_ && d.norm() <= 1e-12; ++j) d = project(Eigen::VectorXd::Unit(n_, j));
      }
      d /= d.norm();
      int blocking = -1;
      double step = ratio_test(d, blocking);
      if (blocking < 0) {
        if (lp_.c.dot(d) < -1e-12 * (1.0 + cnorm_)) {
          res.status = LpStatus::unbounded;
          return false;
        }
        d = -d;
        step = ratio_test(d, blocking);
        if (blocking < 0) throw std::runtime_error("feasible region contains a line; no vertex exists");
      }
      x_ += step * d;
      ax_ += step * ad_;
      if (!try_add(blocking)) throw std::runtime_error("crash phase produced a dependent row");
      add_tight_rows();
    }
    return true;
  }

  void add_tight_rows() {
    if (static_cast<int>(work_.size()) >= n_ || lp_.num_ineq() == 0) return;
    for (int i = 0; i < lp_.num_ineq() && static_cast<int>(work_.size()) < n_; ++i) {
      const int r = lp_.num_eq() + i;
      if (!in_work_[r] && lp_.b(i) - ax_(i) <= row_tol(r)) try_add(r);
    }
  }

  Eigen::VectorXd project(const Eigen::VectorXd& v) const {
    Eigen::VectorXd d = v;
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& q : basis_) d -= q.dot(d) * q;
    return d;
  }

  // Largest step along d keeping all non-working inequality rows feasible.
  // Ties go to the lowest row index.
  double ratio_test(const Eigen::VectorXd& d, int& blocking) {
    blocking = -1;
    double best = std::numeric_limits<double>::infinity();
    if (lp_.num_ineq() == 0) return best;
    ad_.noalias() = lp_.a * d;
    const Eigen::VectorXd& ad = ad_;
    const Eigen::VectorXd& ax = ax_;
    for (int i = 0; i < lp_.num_ineq(); ++i) {
      const int r = lp_.num_eq() + i;
      if (in_work_[r] || ad(i) <= opt_.pivot_tol * row_scale_(i)) continue;
      const double t = std::max(0.0, (lp_.b(i) - ax(i)) / ad(i));
      if (blocking < 0 || t < best - 1e-12 * (1.0 + best)) {
        best = t;
        blocking = r;
      }
    }
    return best;
  }

  void refactor() {
    Eigen::MatrixXd m(n_, n_);
    for (int p = 0; p < n_; ++p) m.row(p) = row(work_[p]);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(m);
    inv_ = lu.inverse();
    Eigen::VectorXd r(n_);
    for (int p = 0; p < n_; ++p) r(p) = rhs(work_[p]);
    x_ = inv_ * r;
    ax_ = lp_.a * x_;
    since_refactor_ = 0;
  }

  bool phase2(LpResult& res) {
    int degenerate = 0;
    for (;;) {
      if (res.iterations >= opt_.max_iterations) {
        res.status = LpStatus::iteration_limit;
        return false;
      }
      const Eigen::VectorXd lambda = -(inv_.transpose() * lp_.c);
      const double dtol = opt_.dual_tol * (1.0 + cnorm_);
      const bool bland = degenerate >= opt_.bland_after;
      int leave = -1;
      double most = -dtol;
      for (int p = 0; p < n_; ++p) {
        if (work_[p] < lp_.num_eq()) continue;
        if (lambda(p) < -dtol) {
          if (bland) {
            if (leave < 0 || work_[p] < work_[leave]) leave = p;
          } else if (lambda(p) < most) {
            most = lambda(p);
            leave = p;
          }
        }
      }
      if (leave < 0) return true;

      const Eigen::VectorXd d = -inv_.col(leave);
      int enter = -1;
      const double step = ratio_test(d, enter);
      if (enter < 0) {
        res.status = LpStatus::unbounded;
        return false;
      }
      ++res.iterations;
      degenerate = step <= 1e-12 ? degenerate + 1 : 0;

      x_ += step * d;
      ax_ += step * ad_;
      const Eigen::RowVectorXd a_new = row(enter);
      const Eigen::VectorXd u = inv_.col(leave);
      const double denom = a_new.dot(u);
      if (std::abs(denom) < 1e-14) throw std::runtime_error("singular pivot in simplex update");
      Eigen::RowVectorXd v = a_new * inv_;
      v(leave) -= 1.0;
      inv_.noalias() -= (u / denom) * v;

      in_work_[work_[leave]] = false;
      in_work_[enter] = true;
      work_[leave] = enter;
      if (++since_refactor_ >= opt_.refactor_every) refactor();
    }
  }

  void finish(LpResult& res) {
    std::sort(work_.begin(), work_.end());
    refactor();
    res.status = LpStatus::optimal;
    res.x = x_;
    res.objective = lp_.c.dot(x_);
    res.active = work_;
    res.multipliers = -(inv_.transpose() * lp_.c);
    res.active_inverse = inv_;
  }

  const LinearProgram& lp_;
  const LpOptions& opt_;
  const int n_;
  double cnorm_ = 0.0;
  Eigen::VectorXd row_scale_;
  Eigen::VectorXd x_;
  Eigen::VectorXd ax_;  // A x, kept in step with x_
  Eigen::VectorXd ad_;
  Eigen::MatrixXd inv_;
  std::vector<int> work_;
  std::vector<bool> in_work_;
  std::vector<Eigen::VectorXd> basis_;
  int since_refactor_ = 0;
};

} // namespace detail

// Solves the LP from a known feasible point x0.
inline LpResult solve_lp(const LinearProgram& lp, const Eigen::VectorXd& x0, const LpOptions& opt = {}) {
  return detail::ActiveSetSimplex(lp, opt).run(x0);
}

// Largest violation of the constraints at x (0 when feasible).
inline double max_violation(const LinearProgram& lp, const Eigen::VectorXd& x) {
  double v = 0.0;
  if (lp.num_eq() > 0) v = std::max(v, (lp.a_eq * x - lp.b_eq).cwiseAbs().maxCoeff());
  if (lp.num_ineq() > 0) v = std::max(v, (lp.a * x - lp.b).maxCoeff());
  return v;
}

struct KktReport {
  double primal_violation = 0.0;  // max constraint violation
  double dual_violation = 0.0;    // max |c + A_w^T lambda| and negative inequality multipliers
  double complementarity = 0.0;   // max |lambda_i * slack_i|
};

// Optimality certificate for a working set and its multipliers.
inline KktReport check_kkt(const LinearProgram& lp, const Eigen::VectorXd& x, const std::vector<int>& active,
                           const Eigen::VectorXd& lambda) {
  KktReport rep;
  rep.primal_violation = max_violation(lp, x);
  Eigen::VectorXd stat = lp.c;
  for (std::size_t p = 0; p < active.size(); ++p) {
    const int r = active[p];
    const bool eq = r < lp.num_eq();
    const Eigen::RowVectorXd a = eq ? lp.a_eq.row(r) : lp.a.row(r - lp.num_eq());
    const double slack = eq ? 0.0 : lp.b(r - lp.num_eq()) - a.dot(x);
    stat += lambda(p) * a.transpose();
    if (!eq) {
      rep.dual_violation = std::max(rep.dual_violation, -lambda(p));
      rep.complementarity = std::max(rep.complementarity, std::abs(lambda(p) * slack));
    }
  }
  rep.dual_violation = std::max(rep.dual_violation, stat.cwiseAbs().maxCoeff());
  return rep;
}

} // namespace cascade

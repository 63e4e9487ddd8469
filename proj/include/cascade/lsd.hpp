#pragma once

// Line status dictionary.
//
// One entry per visited line state: the GSDF (with its susceptance system,
// for rank updates), the assembled dispatch LP, and the critical regions
// found so far. A critical region is an optimal active set W of the dispatch
// LP together with the inverse of its row matrix. For any parameter phi the
// candidate x = A_W^-1 (b + F phi)_W is optimal whenever it satisfies the
// inactive rows: the multipliers solve A_W^T lambda = -c and do not depend on
// phi, so dual feasibility carries over from the solve that created W.

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <fstream>
#include <list>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "case_model.hpp"
#include "dispatch.hpp"
#include "gsdf.hpp"
#include "status_vector.hpp"

namespace cascade {

struct CriticalRegion {
  std::vector<int> active;         // sorted global row indices, equality row first
  Eigen::MatrixXd active_inverse;  // A~^-1
  Eigen::VectorXd multipliers;
  mutable std::atomic<std::uint64_t> hits{0};

  CriticalRegion() = default;
  CriticalRegion(std::vector<int> a, Eigen::MatrixXd inv, Eigen::VectorXd mult)
      : active(std::move(a)), active_inverse(std::move(inv)), multipliers(std::move(mult)) {}
};

// ||A~ A~^-1 - I||_max for the rows of `active`.
inline double inverse_residual(const LinearProgram& lp, const std::vector<int>& active, const Eigen::MatrixXd& inv) {
  const int n = lp.num_vars();
  if (static_cast<int>(active.size()) != n || inv.rows() != n || inv.cols() != n) return 1e300;
  Eigen::MatrixXd a(n, n);
  for (int p = 0; p < n; ++p) {
    const int r = active[p];
    a.row(p) = r < lp.num_eq() ? lp.a_eq.row(r) : lp.a.row(r - lp.num_eq());
  }
  return (a * inv - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff();
}

inline Eigen::VectorXd active_rhs(const DispatchLp& d, const Eigen::VectorXd& ineq_rhs, const std::vector<int>& active) {
  Eigen::VectorXd r(active.size());
  for (std::size_t p = 0; p < active.size(); ++p) {
    const int row = active[p];
    r(p) = row < d.lp.num_eq() ? d.lp.b_eq(row) : ineq_rhs(row - d.lp.num_eq());
  }
  return r;
}

// x*(phi) = A~^-1 (b~ + F~ phi).
inline Eigen::VectorXd affine_point(const DispatchLp& d, const CriticalRegion& region, const Eigen::VectorXd& ineq_rhs) {
  return region.active_inverse * active_rhs(d, ineq_rhs, region.active);
}

struct RegionTestOptions {
  // Inactive rows may be tight up to this slack (MW, scaled by 1 + |rhs|).
  double slack_tol = 1e-7;
};

// Checks the inactive rows at the candidate point. Equivalent to the
// parametric form (A_bar A~^-1 F~ - F_bar) phi <= b_bar - A_bar A~^-1 b~.
inline bool region_test(const DispatchLp& d, const CriticalRegion& region, const Eigen::VectorXd& ineq_rhs,
                        Eigen::VectorXd* point = nullptr, const RegionTestOptions& opt = {}) {
  const Eigen::VectorXd x = affine_point(d, region, ineq_rhs);
  const int ne = d.lp.num_eq();
  const Eigen::VectorXd ax = d.lp.a * x;
  auto it = region.active.begin();
  for (int i = 0; i < d.lp.num_ineq(); ++i) {
    while (it != region.active.end() && *it < ne + i) ++it;
    if (it != region.active.end() && *it == ne + i) continue;
    if (ax(i) > ineq_rhs(i) + opt.slack_tol * (1.0 + std::abs(ineq_rhs(i)))) return false;
  }
  if (point) *point = x;
  return true;
}

inline DispatchSolution affine_solve(const DispatchModel& m, const DispatchLp& d, const CriticalRegion& region,
                                     const Eigen::VectorXd& phi) {
  Eigen::VectorXd rhs;
  fill_rhs(m, d, phi, rhs);
  DispatchSolution s = solution_from_x(m, affine_point(d, region, rhs));
  s.active = region.active;
  s.multipliers = region.multipliers;
  s.from_region = true;
  return s;
}

struct LsdOptions {
  bool woodbury = true;           // build missing GSDFs by rank update from a cached ancestor
  std::size_t max_entries = 0;    // 0: unbounded; otherwise least-recently-used eviction
  std::uint64_t audit_every = 100;  // KKT spot check on every n-th region hit (0: off)
  double inverse_tol = 1e-8;
  RegionTestOptions region;
};

struct LsdStats {
  std::uint64_t entries = 0;
  std::uint64_t regions = 0;
  std::uint64_t gsdf_hits = 0;
  std::uint64_t gsdf_misses = 0;
  std::uint64_t woodbury_builds = 0;
  std::uint64_t scratch_builds = 0;
  std::uint64_t region_hits = 0;
  std::uint64_t region_misses = 0;
  std::uint64_t degenerate_skips = 0;
  std::uint64_t region_tests = 0;
  std::uint64_t audits = 0;
  std::uint64_t audit_failures = 0;
  std::uint64_t evictions = 0;
  double hit_seconds = 0.0;    // time spent answering from regions (including failed tests)
  double solve_seconds = 0.0;  // time spent in full solves on misses

  // Estimated time the region hits would have cost as full solves, minus what they cost.
  double time_saved() const {
    if (region_misses == 0) return 0.0;
    return static_cast<double>(region_hits) * solve_seconds / static_cast<double>(region_misses) - hit_seconds;
  }
};

class LineStatusDictionary {
public:
  struct Entry {
    StatusVector key;
    Topology topology;
    DispatchLp lp;
    mutable std::mutex mutex;
    mutable std::vector<std::shared_ptr<const CriticalRegion>> regions;  // most recently hit first
  };

  LineStatusDictionary(const CaseData& grid, const DispatchModel& model, LsdOptions opt = {})
      : grid_(grid), model_(model), opt_(opt) {
    const StatusVector all(grid.lines.size(), true);
    base_ = insert(all, build_topology(grid, all));
    ++counters_.scratch_builds;
  }

  const LsdOptions& options() const { return opt_; }
  const DispatchModel& model() const { return model_; }
  const CaseData& grid() const { return grid_; }

  // Entry for a line state; builds the GSDF on a miss (rank update from the
  // nearest cached ancestor when enabled). `hint` is a state known to be an
  // ancestor (the caller's parent state). Throws IslandingError.
  std::shared_ptr<Entry> entry(const StatusVector& key, const Topology* hint = nullptr) {
    if (auto e = find(key)) {
      counters_.gsdf_hits++;
      return e;
    }
    counters_.gsdf_misses++;
    check_connected(grid_, key);
    Topology t;
    if (opt_.woodbury) {
      const Topology from = nearest_ancestor(key, hint);
      std::vector<int> removed;
      for (int k = 0; k < grid_.num_lines(); ++k)
        if (from.line_state()[k] && !key[k]) removed.push_back(grid_.lines[k].id);
      t = woodbury_update(grid_, from, removed);
      counters_.woodbury_builds++;
    } else {
      t = build_topology(grid_, key);
      counters_.scratch_builds++;
    }
    return insert(key, std::move(t));
  }

  Topology lookup_or_build_gsdf(const StatusVector& key, const Topology* hint = nullptr) { return entry(key, hint)->topology; }

  bool contains(const StatusVector& key) const {
    std::shared_lock lock(map_mutex_);
    return map_.count(key) != 0;
  }

  // Dispatch through the critical regions of `e`; falls back to a full solve
  // and records the new region. `hint` is tried first when given.
  DispatchSolution solve(const Entry& e, const Eigen::VectorXd& phi, const CriticalRegion* hint = nullptr,
                         std::shared_ptr<const CriticalRegion>* used = nullptr) {
    const auto t0 = std::chrono::steady_clock::now();
    Eigen::VectorXd rhs;
    fill_rhs(model_, e.lp, phi, rhs);

    std::vector<std::shared_ptr<const CriticalRegion>> regions;
    {
      std::lock_guard lock(e.mutex);
      regions = e.regions;
    }
    Eigen::VectorXd x;
    std::uint64_t tests = 0;
    std::shared_ptr<const CriticalRegion> hit;
    if (hint) {
      for (const auto& r : regions)
        if (r.get() == hint) {
          ++tests;
          if (region_test(e.lp, *r, rhs, &x, opt_.region)) hit = r;
          break;
        }
    }
    if (!hit) {
      for (const auto& r : regions) {
        if (r.get() == hint) continue;
        ++tests;
        if (region_test(e.lp, *r, rhs, &x, opt_.region)) {
          hit = r;
          break;
        }
      }
    }
    counters_.region_tests += tests;

    if (hit) {
      const std::uint64_t n = ++counters_.region_hits;
      hit->hits++;
      promote(e, hit);
      DispatchSolution s = solution_from_x(model_, x);
      s.active = hit->active;
      s.multipliers = hit->multipliers;
      s.from_region = true;
      if (opt_.audit_every && n % opt_.audit_every == 0) audit(e, rhs, x, *hit);
      if (used) *used = hit;
      add_seconds(counters_.hit_seconds, t0);
      return s;
    }

    const auto t1 = std::chrono::steady_clock::now();
    BaselineResult r = solve_baseline(model_, e.lp, phi);
    counters_.region_misses++;
    if (r.solution.status == DispatchStatus::optimal) {
      if (inverse_residual(e.lp.lp, r.solution.active, r.active_inverse) <= opt_.inverse_tol) {
        auto region = std::make_shared<const CriticalRegion>(r.solution.active, r.active_inverse, r.solution.multipliers);
        {
          std::lock_guard lock(e.mutex);
          e.regions.insert(e.regions.begin(), region);
        }
        counters_.regions++;
        if (used) *used = region;
      } else {
        counters_.degenerate_skips++;
      }
    }
    add_seconds(counters_.hit_seconds, t0, t1);
    add_seconds(counters_.solve_seconds, t1);
    return r.solution;
  }

  LsdStats stats() const {
    LsdStats s;
    {
      std::shared_lock lock(map_mutex_);
      s.entries = map_.size();
    }
    s.regions = counters_.regions;
    s.gsdf_hits = counters_.gsdf_hits;
    s.gsdf_misses = counters_.gsdf_misses;
    s.woodbury_builds = counters_.woodbury_builds;
    s.scratch_builds = counters_.scratch_builds;
    s.region_hits = counters_.region_hits;
    s.region_misses = counters_.region_misses;
    s.degenerate_skips = counters_.degenerate_skips;
    s.region_tests = counters_.region_tests;
    s.audits = counters_.audits;
    s.audit_failures = counters_.audit_failures;
    s.evictions = counters_.evictions;
    s.hit_seconds = counters_.hit_seconds.load();
    s.solve_seconds = counters_.solve_seconds.load();
    return s;
  }

  std::size_t size() const {
    std::shared_lock lock(map_mutex_);
    return map_.size();
  }

  std::vector<StatusVector> keys() const {
    std::shared_lock lock(map_mutex_);
    std::vector<StatusVector> out;
    for (const auto& kv : map_) out.push_back(kv.first);
    std::sort(out.begin(), out.end(), [](const StatusVector& a, const StatusVector& b) { return a.to_string() < b.to_string(); });
    return out;
  }

  std::shared_ptr<Entry> find(const StatusVector& key) {
    std::shared_lock lock(map_mutex_);
    auto it = map_.find(key);
    if (it == map_.end()) return nullptr;
    touch(it->second);
    return it->second.entry;
  }

  // Versioned text persistence. GSDFs are rebuilt from the case on load (the
  // file records the line states); regions are stored verbatim.
  void save(std::ostream& out) const;
  void load(std::istream& in);
  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write dictionary file '" + path + "'");
    save(out);
  }
  void load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open dictionary file '" + path + "'");
    load(in);
  }

private:
  struct Slot {
    std::shared_ptr<Entry> entry;
    mutable std::atomic<std::uint64_t> last_use{0};
    Slot(std::shared_ptr<Entry> e, std::uint64_t t) : entry(std::move(e)), last_use(t) {}
    Slot(Slot&& o) noexcept : entry(std::move(o.entry)), last_use(o.last_use.load()) {}
  };

  struct Counters {
    std::atomic<std::uint64_t> regions{0}, gsdf_hits{0}, gsdf_misses{0}, woodbury_builds{0}, scratch_builds{0},
        region_hits{0}, region_misses{0}, degenerate_skips{0}, region_tests{0}, audits{0}, audit_failures{0},
        evictions{0};
    std::atomic<double> hit_seconds{0.0}, solve_seconds{0.0};
  };

  static void add_seconds(std::atomic<double>& acc, std::chrono::steady_clock::time_point from,
                          std::chrono::steady_clock::time_point to = std::chrono::steady_clock::now()) {
    const double dt = std::chrono::duration<double>(to - from).count();
    double cur = acc.load();
    while (!acc.compare_exchange_weak(cur, cur + dt)) {
    }
  }

  void touch(const Slot& s) const { s.last_use = ++clock_; }

  void promote(const Entry& e, const std::shared_ptr<const CriticalRegion>& r) {
    std::lock_guard lock(e.mutex);
    auto& v = e.regions;
    auto it = std::find(v.begin(), v.end(), r);
    if (it != v.end() && it != v.begin()) std::rotate(v.begin(), it, it + 1);
  }

  void audit(const Entry& e, const Eigen::VectorXd& rhs, const Eigen::VectorXd& x, const CriticalRegion& r) {
    counters_.audits++;
    LinearProgram lp = e.lp.lp;
    lp.b = rhs;
    const KktReport k = check_kkt(lp, x, r.active, r.multipliers);
    const double scale = 1.0 + model_.cost.cwiseAbs().maxCoeff();
    if (k.primal_violation > 1e-6 || k.dual_violation > 1e-6 * scale || k.complementarity > 1e-6 * scale)
      counters_.audit_failures++;
  }

  Topology nearest_ancestor(const StatusVector& key, const Topology* hint) {
    Topology best = base_->topology;
    std::size_t best_out = best.line_state().count_out_of_service();
    auto consider = [&](const Topology& t) {
      const std::size_t out = t.line_state().count_out_of_service();
      if (out > best_out && key.is_descendant_of(t.line_state())) {
        best = t;
        best_out = out;
      }
    };
    if (hint && hint->gsdf) consider(*hint);
    for (int k : key.out_of_service()) {
      StatusVector parent = key;
      parent.set(k, true);
      if (auto e = find(parent)) consider(e->topology);
    }
    return best;
  }

  std::shared_ptr<Entry> insert(const StatusVector& key, Topology t) {
    auto e = std::make_shared<Entry>();
    e->key = key;
    e->lp = build_lp(model_, *t.gsdf);
    e->topology = std::move(t);
    std::unique_lock lock(map_mutex_);
    auto [it, inserted] = map_.try_emplace(key, e, ++clock_);
    if (inserted && opt_.max_entries > 0 && map_.size() > opt_.max_entries) evict_locked(key);
    return it->second.entry;
  }

  void evict_locked(const StatusVector& keep) {
    const StatusVector all(grid_.lines.size(), true);
    auto victim = map_.end();
    for (auto it = map_.begin(); it != map_.end(); ++it) {
      if (it->first == keep || it->first == all) continue;
      if (victim == map_.end() || it->second.last_use < victim->second.last_use) victim = it;
    }
    if (victim != map_.end()) {
      counters_.regions -= victim->second.entry->regions.size();
      map_.erase(victim);
      counters_.evictions++;
    }
  }

  const CaseData& grid_;
  const DispatchModel& model_;
  LsdOptions opt_;
  mutable std::shared_mutex map_mutex_;
  std::unordered_map<StatusVector, Slot, StatusVectorHash> map_;
  std::shared_ptr<Entry> base_;
  mutable std::atomic<std::uint64_t> clock_{0};
  Counters counters_;
};

inline void LineStatusDictionary::save(std::ostream& out) const {
  std::vector<std::shared_ptr<Entry>> entries;
  {
    std::shared_lock lock(map_mutex_);
    for (const auto& kv : map_) entries.push_back(kv.second.entry);
  }
  std::sort(entries.begin(), entries.end(),
            [](const auto& a, const auto& b) { return a->key.to_string() < b->key.to_string(); });
  char buf[40];
  out << "cascade-lsd 1\n";
  out << "lines " << grid_.num_lines() << " buses " << grid_.num_buses() << " rows " << model_.layout.num_rows()
      << " gen_nonnegative " << (model_.layout.gen_nonnegative ? 1 : 0) << '\n';
  out << "entries " << entries.size() << '\n';
  for (const auto& e : entries) {
    std::vector<std::shared_ptr<const CriticalRegion>> regions;
    {
      std::lock_guard lock(e->mutex);
      regions = e->regions;
    }
    out << "entry " << e->key.to_string() << " regions " << regions.size() << '\n';
    for (const auto& r : regions) {
      out << "active";
      for (int a : r->active) out << ' ' << a;
      out << "\nmultipliers";
      for (Eigen::Index i = 0; i < r->multipliers.size(); ++i) {
        std::snprintf(buf, sizeof buf, " %.17g", r->multipliers(i));
        out << buf;
      }
      out << "\ninverse\n";
      for (Eigen::Index i = 0; i < r->active_inverse.rows(); ++i) {
        for (Eigen::Index j = 0; j < r->active_inverse.cols(); ++j) {
          std::snprintf(buf, sizeof buf, j ? " %.17g" : "%.17g", r->active_inverse(i, j));
          out << buf;
        }
        out << '\n';
      }
    }
  }
  out << "end\n";
}

inline void LineStatusDictionary::load(std::istream& in) {
  auto fail = [](const std::string& m) { throw std::runtime_error("dictionary file: " + m); };
  std::string word;
  int version = 0;
  if (!(in >> word >> version) || word != "cascade-lsd") fail("missing header");
  if (version != 1) fail("unsupported version " + std::to_string(version));
  int lines = 0, buses = 0, rows = 0, gen_nonneg = 0;
  std::string w1, w2, w3, w4;
  if (!(in >> w1 >> lines >> w2 >> buses >> w3 >> rows >> w4 >> gen_nonneg)) fail("bad dimensions line");
  if (lines != grid_.num_lines() || buses != grid_.num_buses() || rows != model_.layout.num_rows() ||
      (gen_nonneg != 0) != model_.layout.gen_nonnegative)
    fail("dimensions do not match the case or dispatch options");
  std::size_t count = 0;
  if (!(in >> word >> count) || word != "entries") fail("bad entry count");
  const int n = model_.num_vars();
  for (std::size_t e = 0; e < count; ++e) {
    std::string bits;
    std::size_t nregions = 0;
    if (!(in >> word >> bits >> w1 >> nregions) || word != "entry") fail("bad entry header");
    const StatusVector key = StatusVector::from_string(bits);
    if (static_cast<int>(key.size()) != lines) fail("entry key has wrong length");
    auto entry = this->entry(key);
    for (std::size_t r = 0; r < nregions; ++r) {
      std::vector<int> active(n);
      Eigen::VectorXd mult(n);
      Eigen::MatrixXd inv(n, n);
      if (!(in >> word) || word != "active") fail("expected 'active'");
      for (int& a : active)
        if (!(in >> a)) fail("bad active index");
      if (!(in >> word) || word != "multipliers") fail("expected 'multipliers'");
      for (int i = 0; i < n; ++i)
        if (!(in >> mult(i))) fail("bad multiplier");
      if (!(in >> word) || word != "inverse") fail("expected 'inverse'");
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          if (!(in >> inv(i, j))) fail("bad inverse entry");
      if (inverse_residual(entry->lp.lp, active, inv) > opt_.inverse_tol) fail("stored inverse does not match its active set");
      std::lock_guard lock(entry->mutex);
      entry->regions.push_back(std::make_shared<const CriticalRegion>(std::move(active), std::move(inv), std::move(mult)));
      counters_.regions++;
    }
  }
  if (!(in >> word) || word != "end") fail("missing end marker");
}

} // namespace cascade

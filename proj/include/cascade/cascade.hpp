#pragma once

// Markov chain search over failure states.
//
// A state is the pair (line status, generator status). From each state every
// in-service conventional generator and every in-service line may fail; the
// arrow probability is the failing element's probability alone, and a child
// is kept while the product along the path stays >= epsilon. A transition
// is: random failure, relay cascade on the resulting flows, then re-dispatch.
// Leaves of the search tree are the emitted paths; per scenario the m with
// the largest load shedding are kept.

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "case_model.hpp"
#include "dcpf.hpp"
#include "dispatch.hpp"
#include "gsdf.hpp"
#include "lsd.hpp"
#include "scenario.hpp"
#include "status_vector.hpp"

namespace cascade {

// Piecewise line failure probability: base probability up to the long-term
// limit, rising linearly in |flow| up to the relay limit, certain above it.
inline double line_failure_probability(const Line& line, double flow) {
  const double a = std::abs(flow);
  const double lb = line.flow_limit;
  const double pb = line.base_fail_prob;
  if (a <= lb) return pb;
  if (a <= line.trip_limit()) return (1.0 - pb) * a / line.trip_limit() + pb;
  return 1.0;
}

struct SystemState {
  StatusVector lines;
  StatusVector generators;

  friend bool operator==(const SystemState& a, const SystemState& b) {
    return a.lines == b.lines && a.generators == b.generators;
  }
};

enum class EventKind { random_gen_failure, random_line_failure, relay_trip, redispatch };

inline const char* to_string(EventKind k) {
  switch (k) {
  case EventKind::random_gen_failure: return "random-gen-failure";
  case EventKind::random_line_failure: return "random-line-failure";
  case EventKind::relay_trip: return "relay-trip";
  case EventKind::redispatch: return "redispatch";
  }
  return "?";
}

struct CascadeEvent {
  EventKind kind = EventKind::redispatch;
  std::vector<int> elements;  // generator or line ids
  double probability = 1.0;
  double shed = 0.0;          // MW shed after this step (redispatch events)

  friend bool operator==(const CascadeEvent& a, const CascadeEvent& b) {
    return a.kind == b.kind && a.elements == b.elements && a.probability == b.probability && a.shed == b.shed;
  }
};

enum class TerminalReason { converged, below_threshold, islanded, depth_limit, infeasible };

inline const char* to_string(TerminalReason r) {
  switch (r) {
  case TerminalReason::converged: return "converged";
  case TerminalReason::below_threshold: return "below-threshold";
  case TerminalReason::islanded: return "islanded";
  case TerminalReason::depth_limit: return "depth-limit";
  case TerminalReason::infeasible: return "infeasible";
  }
  return "?";
}

struct CascadePath {
  int scenario = 0;
  std::vector<CascadeEvent> events;
  double probability = 1.0;
  double shed = 0.0;  // MW shed in the final state of the path
  TerminalReason terminal = TerminalReason::below_threshold;
  int depth = 0;      // number of random failures

  // Sequence of random failures, e.g. {"L30", "L25"}.
  std::vector<std::string> trigger_labels() const {
    std::vector<std::string> out;
    for (const auto& e : events) {
      if (e.kind == EventKind::random_gen_failure) out.push_back("G" + std::to_string(e.elements.front()));
      if (e.kind == EventKind::random_line_failure) out.push_back("L" + std::to_string(e.elements.front()));
    }
    return out;
  }
};

// Shedding is compared on a 1e-6 MW grid so round-off cannot reorder paths.
inline long long shed_key(double mw) { return std::llround(std::max(0.0, mw) * 1e6); }

inline bool events_less(const std::vector<CascadeEvent>& a, const std::vector<CascadeEvent>& b) {
  const std::size_t n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (a[i].kind != b[i].kind) return a[i].kind < b[i].kind;
    if (a[i].elements != b[i].elements) return a[i].elements < b[i].elements;
  }
  return a.size() < b.size();
}

// Severity order: more shedding first, then higher probability, then event ids.
inline bool more_severe(const CascadePath& a, const CascadePath& b) {
  const auto sa = shed_key(a.shed), sb = shed_key(b.shed);
  if (sa != sb) return sa > sb;
  if (a.probability != b.probability) return a.probability > b.probability;
  return events_less(a.events, b.events);
}

struct SearchConfig {
  double epsilon = 1e-9;
  int m = 3;
  int depth_limit = 8;
  bool lsd_enabled = true;
  bool woodbury_enabled = true;
  RelayOptions relay;
  DispatchOptions dispatch;
  LsdOptions lsd;
  int workers = 1;
  // Flows within this margin (MW) of the long-term limit count as at the limit
  // when evaluating line failure probabilities.
  double flow_tolerance = 1e-6;
  bool keep_all_paths = false;  // retain every leaf, not only the top m (tests)
};

inline void validate(const SearchConfig& c) {
  if (!(c.epsilon > 0.0 && c.epsilon < 1.0)) throw std::invalid_argument("epsilon must lie in (0,1)");
  if (c.m < 1) throw std::invalid_argument("m must be at least 1");
  if (c.depth_limit < 0) throw std::invalid_argument("depth limit must be nonnegative");
  if (c.workers < 1) throw std::invalid_argument("worker count must be at least 1");
}

struct PhaseTimes {
  double sampling = 0.0;
  double dcpf = 0.0;
  double dcopf = 0.0;
  double total = 0.0;

  PhaseTimes& operator+=(const PhaseTimes& o) {
    sampling += o.sampling;
    dcpf += o.dcpf;
    dcopf += o.dcopf;
    total += o.total;
    return *this;
  }
};

struct ScenarioResult {
  int scenario = 0;
  std::vector<CascadePath> paths;  // top m (or all leaves with keep_all_paths), severity order
  std::size_t leaves = 0;
  std::size_t states = 0;          // search nodes created, root included
  std::size_t dispatches = 0;
  double max_shed = 0.0;
  std::string error;
};

namespace detail {

class Stopwatch {
public:
  explicit Stopwatch(double& acc) : acc_(acc), t0_(std::chrono::steady_clock::now()) {}
  ~Stopwatch() { acc_ += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count(); }

private:
  double& acc_;
  std::chrono::steady_clock::time_point t0_;
};

} // namespace detail

// Shared, read-mostly search context. One per study; safe to use from many
// workers at once.
class CascadeSearch {
public:
  CascadeSearch(const CaseData& grid, SearchConfig config)
      : grid_(grid), config_(std::move(config)), model_(make_dispatch_model(grid, config_.dispatch)) {
    validate(config_);
    config_.lsd.woodbury = config_.woodbury_enabled;
    if (config_.lsd_enabled) lsd_ = std::make_unique<LineStatusDictionary>(grid_, model_, config_.lsd);
    base_ = build_topology(grid_, StatusVector(grid_.lines.size(), true));
    reference_ = grid_.reference_index();
  }

  const CaseData& grid() const { return grid_; }
  const SearchConfig& config() const { return config_; }
  const DispatchModel& model() const { return model_; }
  LineStatusDictionary* dictionary() { return lsd_.get(); }
  const LineStatusDictionary* dictionary() const { return lsd_.get(); }

  // Available capacity per generator for a scenario (wind from the scenario).
  std::vector<double> generator_capacity(const Scenario& s) const {
    std::vector<double> cap;
    cap.reserve(grid_.generators.size());
    std::size_t f = 0;
    for (const auto& g : grid_.generators) {
      if (g.is_wind()) {
        if (f >= s.wind_output.size()) throw std::invalid_argument("scenario lacks wind output for generator " + std::to_string(g.id));
        cap.push_back(std::clamp(s.wind_output[f++], 0.0, g.p_max));
      } else {
        cap.push_back(g.p_max);
      }
    }
    return cap;
  }

  ScenarioResult search_scenario(const Scenario& scenario, PhaseTimes& times) {
    Run run(*this, scenario, times, config_.depth_limit);
    return run.go(nullptr);
  }

  // One transition from `state`: every kept child as a path (all leaves, no
  // top-m cut). Throws IslandingError if `state` itself is split.
  std::vector<CascadePath> expand_state(const Scenario& scenario, const SystemState& state) {
    PhaseTimes t;
    Run run(*this, scenario, t, 1, true);
    ScenarioResult r = run.go(&state);
    if (!r.error.empty()) throw std::runtime_error(r.error);
    return r.paths;
  }

private:
  struct Node {
    SystemState state;
    Topology topology;
    std::shared_ptr<LineStatusDictionary::Entry> entry;
    std::shared_ptr<const CriticalRegion> region;
    Eigen::VectorXd injection;
    Eigen::VectorXd shedding;
    Eigen::VectorXd flows;
    double probability = 1.0;
    int depth = 0;
    std::vector<CascadeEvent> events;
  };

  class Run {
  public:
    Run(CascadeSearch& s, const Scenario& sc, PhaseTimes& t, int depth_limit, bool keep_all = false)
        : s_(s), grid_(s.grid_), scenario_(sc), times_(t), capacity_(s.generator_capacity(sc)), depth_limit_(depth_limit),
          keep_all_(keep_all || s.config_.keep_all_paths) {
      if (static_cast<int>(sc.load.size()) != grid_.num_buses()) throw std::invalid_argument("scenario load has wrong length");
      load_ = Eigen::Map<const Eigen::VectorXd>(sc.load.data(), grid_.num_buses());
    }

    ScenarioResult go(const SystemState* start) {
      ScenarioResult res;
      res.scenario = scenario_.index;
      Node root;
      root.state = {StatusVector(grid_.lines.size(), true), StatusVector(grid_.generators.size(), true)};
      root.topology = s_.base_;
      res_ = &res;
      if (start) {
        std::vector<int> removed;
        for (int k : start->lines.out_of_service()) removed.push_back(grid_.lines[k].id);
        root.topology = next_topology(s_.base_, removed);
        root.state = *start;
      }
      try {
        if (!dispatch(root)) {
          emit_infeasible(root);
        } else {
          expand(root);
        }
      } catch (const std::exception& e) {
        res.error = e.what();
      }
      finalize(res);
      return res;
    }

  private:
    // Re-dispatch at the node's state; fills injection, shedding, flows.
    bool dispatch(Node& n) {
      ++res_->dispatches;
      const Eigen::VectorXd phi = parameter_vector(capacity_, n.state.generators, scenario_.load);
      DispatchSolution sol;
      {
        detail::Stopwatch w(times_.dcopf);
        if (s_.lsd_) {
          if (!n.entry) n.entry = s_.lsd_->entry(n.state.lines, &n.topology);
          std::shared_ptr<const CriticalRegion> used;
          sol = s_.lsd_->solve(*n.entry, phi, n.region.get(), &used);
          n.region = used;
        } else {
          sol = solve_baseline(s_.model_, build_lp(s_.model_, *n.topology.gsdf), phi).solution;
        }
      }
      if (sol.status != DispatchStatus::optimal) return false;
      n.injection = sol.injection;
      n.shedding = sol.shedding.cwiseMax(0.0);
      {
        detail::Stopwatch w(times_.dcpf);
        n.flows = n.topology.gsdf->values * n.injection;
      }
      return true;
    }

    Topology next_topology(const Topology& from, const std::vector<int>& removed) {
      if (s_.lsd_) {
        StatusVector key = from.line_state();
        for (int id : removed) key.set(grid_.line_index(id), false);
        return s_.lsd_->entry(key, &from)->topology;
      }
      if (s_.config_.woodbury_enabled) return woodbury_update(grid_, from, removed);
      StatusVector key = from.line_state();
      for (int id : removed) key.set(grid_.line_index(id), false);
      return build_topology(grid_, key);
    }

    struct Candidate {
      EventKind kind;
      int index;  // generator or line index
      double p;
    };

    std::vector<Candidate> candidates(const Node& n, bool& any_failable) {
      detail::Stopwatch w(times_.sampling);
      std::vector<Candidate> out;
      any_failable = false;
      const double eps = s_.config_.epsilon;
      for (int g = 0; g < grid_.num_generators(); ++g) {
        const Generator& gen = grid_.generators[g];
        if (!n.state.generators[g] || gen.is_wind() || !(gen.fail_prob > 0.0)) continue;
        any_failable = true;
        if (n.probability * gen.fail_prob >= eps) out.push_back({EventKind::random_gen_failure, g, gen.fail_prob});
      }
      for (int k = 0; k < grid_.num_lines(); ++k) {
        if (!n.state.lines[k]) continue;
        const Line& line = grid_.lines[k];
        double flow = n.flows(k);
        if (std::abs(flow) <= line.flow_limit + s_.config_.flow_tolerance) flow = 0.0;
        const double p = line_failure_probability(line, flow);
        if (!(p > 0.0)) continue;
        any_failable = true;
        if (n.probability * p >= eps) out.push_back({EventKind::random_line_failure, k, p});
      }
      return out;
    }

    void expand(Node& n) {
      ++res_->states;
      bool failable = false;
      const auto cands = candidates(n, failable);
      if (cands.empty()) {
        emit(n, failable ? TerminalReason::below_threshold : TerminalReason::converged, n.shedding.sum());
        return;
      }
      if (n.depth >= depth_limit_) {
        emit(n, TerminalReason::depth_limit, n.shedding.sum());
        return;
      }
      for (const auto& c : cands) child(n, c);
    }

    void child(const Node& parent, const Candidate& c) {
      Node ch;
      ch.state = parent.state;
      ch.topology = parent.topology;
      ch.entry = parent.entry;
      ch.region = parent.region;
      ch.probability = parent.probability * c.p;
      ch.depth = parent.depth + 1;
      ch.events = parent.events;
      Eigen::VectorXd injection = parent.injection;

      if (c.kind == EventKind::random_gen_failure) {
        const Generator& gen = grid_.generators[c.index];
        ch.events.push_back({EventKind::random_gen_failure, {gen.id}, c.p, 0.0});
        {
          detail::Stopwatch w(times_.sampling);
          const int bus = grid_.bus_index(gen.bus);
          double bus_cap = 0.0;
          for (int g = 0; g < grid_.num_generators(); ++g)
            if (parent.state.generators[g] && grid_.generators[g].bus == gen.bus) bus_cap += capacity_[g];
          const double bus_gen = parent.injection(bus) + load_(bus) - parent.shedding(bus);
          const double lost = bus_cap > 0.0 ? std::max(0.0, bus_gen) * capacity_[c.index] / bus_cap : 0.0;
          // the reference bus picks up the lost output until re-dispatch
          injection(bus) -= lost;
          injection(s_.reference_) += lost;
        }
        ch.state.generators.set(c.index, false);
      } else {
        const Line& line = grid_.lines[c.index];
        ch.events.push_back({EventKind::random_line_failure, {line.id}, c.p, 0.0});
        ch.state.lines.set(c.index, false);
        ch.entry.reset();
        ch.region.reset();
        try {
          detail::Stopwatch w(times_.dcpf);
          ch.topology = next_topology(parent.topology, {line.id});
        } catch (const IslandingError& e) {
          emit_islanded(ch, parent, e);
          return;
        }
      }

      RelayOutcome relay;
      try {
        detail::Stopwatch w(times_.dcpf);
        relay = relay_fixed_point(
            grid_, ch.topology, injection,
            [this](const Topology& t, const std::vector<int>& ids) { return next_topology(t, ids); }, s_.config_.relay);
      } catch (const RelayIslandingError& e) {
        for (const auto& trip : e.tripped_lines()) ch.events.push_back({EventKind::relay_trip, trip, 1.0, 0.0});
        ch.state.lines = e.final_state();
        emit_islanded(ch, parent, e);
        return;
      }
      if (relay.iterations > 0) {
        for (const auto& trip : relay.tripped_lines) ch.events.push_back({EventKind::relay_trip, trip, 1.0, 0.0});
        ch.state.lines = relay.final_state;
        ch.topology = relay.topology;
        ch.entry.reset();
        ch.region.reset();
      }

      if (!dispatch(ch)) {
        emit_infeasible(ch);
        return;
      }
      ch.events.push_back({EventKind::redispatch, {}, 1.0, ch.shedding.sum()});
      expand(ch);
    }

    // Load outside the reference bus's island is lost; inside it the parent
    // dispatch's shedding stands.
    void emit_islanded(Node& ch, const Node& parent, const IslandingError& e) {
      ++res_->states;
      const auto& islands = e.islands();
      const int ref_island = islands[s_.reference_];
      double shed = 0.0;
      for (int i = 0; i < grid_.num_buses(); ++i) shed += islands[i] == ref_island ? parent.shedding(i) : load_(i);
      emit(ch, TerminalReason::islanded, shed);
    }

    void emit_infeasible(Node& n) {
      ++res_->states;
      emit(n, TerminalReason::infeasible, load_.sum());
    }

    void emit(const Node& n, TerminalReason why, double shed) {
      CascadePath p;
      p.scenario = scenario_.index;
      p.events = n.events;
      p.probability = n.probability;
      p.shed = std::max(0.0, shed);
      p.terminal = why;
      p.depth = n.depth;
      ++res_->leaves;
      leaves_.push_back(std::move(p));
    }

    void finalize(ScenarioResult& res) {
      detail::Stopwatch w(times_.sampling);
      const std::size_t keep = keep_all_ ? leaves_.size() : std::min<std::size_t>(s_.config_.m, leaves_.size());
      std::partial_sort(leaves_.begin(), leaves_.begin() + keep, leaves_.end(), more_severe);
      leaves_.resize(keep);
      res.paths = std::move(leaves_);
      res.max_shed = 0.0;
      for (const auto& p : res.paths) res.max_shed = std::max(res.max_shed, p.shed);
    }

    CascadeSearch& s_;
    const CaseData& grid_;
    const Scenario& scenario_;
    PhaseTimes& times_;
    std::vector<double> capacity_;
    int depth_limit_;
    bool keep_all_;
    Eigen::VectorXd load_;
    ScenarioResult* res_ = nullptr;
    std::vector<CascadePath> leaves_;
  };

  const CaseData& grid_;
  SearchConfig config_;
  DispatchModel model_;
  std::unique_ptr<LineStatusDictionary> lsd_;
  Topology base_;
  int reference_ = 0;
};

inline std::vector<CascadePath> search_scenario(CascadeSearch& ctx, const Scenario& scenario) {
  PhaseTimes t;
  return ctx.search_scenario(scenario, t).paths;
}

// ---------------------------------------------------------------------------
// Study: many scenarios, aggregated.

struct GraphEdge {
  std::string from, to;
  std::size_t count = 0;
  double max_shed = 0.0;
};

struct PathGraph {
  std::vector<std::string> nodes;  // sorted, "start" first
  std::vector<GraphEdge> edges;    // sorted by (from, to)

  // Number of distinct edges touching each node.
  std::map<std::string, int> degrees() const {
    std::map<std::string, int> d;
    for (const auto& n : nodes) d[n] = 0;
    for (const auto& e : edges) {
      d[e.from]++;
      d[e.to]++;
    }
    return d;
  }

  std::map<std::string, double> node_max_shed() const {
    std::map<std::string, double> s;
    for (const auto& e : edges) {
      s[e.from] = std::max(s[e.from], e.max_shed);
      s[e.to] = std::max(s[e.to], e.max_shed);
    }
    return s;
  }
};

// Element sequence of a path: every failed element in event order.
inline std::vector<std::string> failure_sequence(const CascadePath& p) {
  std::vector<std::string> seq;
  for (const auto& e : p.events) {
    if (e.kind == EventKind::random_gen_failure) seq.push_back("G" + std::to_string(e.elements.front()));
    if (e.kind == EventKind::random_line_failure || e.kind == EventKind::relay_trip)
      for (int id : e.elements) seq.push_back("L" + std::to_string(id));
  }
  return seq;
}

inline PathGraph build_path_graph(const std::vector<CascadePath>& paths) {
  std::map<std::pair<std::string, std::string>, GraphEdge> edges;
  std::map<std::string, int> nodes;
  for (const auto& p : paths) {
    const auto seq = failure_sequence(p);
    std::string prev = "start";
    nodes[prev];
    for (const auto& n : seq) {
      nodes[n];
      auto& e = edges[{prev, n}];
      e.from = prev;
      e.to = n;
      e.count++;
      e.max_shed = std::max(e.max_shed, p.shed);
      prev = n;
    }
  }
  PathGraph g;
  if (paths.empty()) return g;
  g.nodes.push_back("start");
  for (const auto& kv : nodes)
    if (kv.first != "start") g.nodes.push_back(kv.first);
  for (auto& kv : edges) g.edges.push_back(kv.second);
  return g;
}

struct HourRecord {
  int hour = 0;
  double total_load = 0.0;
  double total_wind = 0.0;
  double max_shed = 0.0;
  std::size_t paths = 0;
};

struct StudyReport {
  std::string case_name;
  SearchConfig config;
  std::vector<CascadePath> paths;  // scenario order, severity order within a scenario
  std::vector<HourRecord> hours;
  PathGraph graph;
  PhaseTimes timing;               // sampling/dcpf/dcopf summed over workers; total is wall time
  std::optional<LsdStats> lsd;
  std::size_t states = 0;
  std::size_t dispatches = 0;
  std::vector<std::pair<int, std::string>> errors;  // scenario index, message
};

// Runs every scenario with an existing context (its dictionary is shared and
// kept warm across calls).
inline StudyReport run_study(CascadeSearch& search, const std::vector<Scenario>& scenarios) {
  const auto t0 = std::chrono::steady_clock::now();
  const SearchConfig& config = search.config();
  StudyReport rep;
  rep.case_name = search.grid().name;
  rep.config = config;
  if (scenarios.empty()) return rep;

  std::vector<ScenarioResult> results(scenarios.size());
  const int workers = std::max(1, std::min<int>(config.workers, static_cast<int>(scenarios.size())));
  std::vector<PhaseTimes> times(workers);
  std::atomic<std::size_t> next{0};
  auto work = [&](int w) {
    for (std::size_t i = next++; i < scenarios.size(); i = next++) results[i] = search.search_scenario(scenarios[i], times[w]);
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work, w);
    for (auto& t : pool) t.join();
  }

  for (std::size_t i = 0; i < scenarios.size(); ++i) {
    const auto& r = results[i];
    HourRecord h;
    h.hour = scenarios[i].index;
    h.total_load = scenarios[i].total_load();
    h.total_wind = scenarios[i].total_wind();
    h.max_shed = r.max_shed;
    h.paths = r.paths.size();
    rep.hours.push_back(h);
    rep.states += r.states;
    rep.dispatches += r.dispatches;
    if (!r.error.empty()) rep.errors.emplace_back(scenarios[i].index, r.error);
    rep.paths.insert(rep.paths.end(), r.paths.begin(), r.paths.end());
  }
  rep.graph = build_path_graph(rep.paths);
  for (const auto& t : times) rep.timing += t;
  if (search.dictionary()) rep.lsd = search.dictionary()->stats();
  rep.timing.total = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

inline StudyReport run_study(const CaseData& grid, const std::vector<Scenario>& scenarios, const SearchConfig& config) {
  if (scenarios.empty()) {
    validate(config);
    StudyReport rep;
    rep.case_name = grid.name;
    rep.config = config;
    return rep;
  }
  const auto t0 = std::chrono::steady_clock::now();
  CascadeSearch search(grid, config);
  StudyReport rep = run_study(search, scenarios);
  rep.timing.total = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

} // namespace cascade

#pragma once

// Study output files.
//
//   shedding.csv     hour,total_load_mw,total_wind_mw,max_shed_mw,paths
//   paths.jsonl      one JSON object per emitted path
//   path_graph.dot   Graphviz digraph of failure sequences
//   timing.txt       phase timings (seconds)
//   lsd_stats.json   dictionary counters
//
// Numbers in the first three files are rounded (MW to 1e-3, probabilities to
// 7 significant digits) so the files are byte-identical across runs whose
// results agree to round-off.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cascade.hpp"

namespace cascade {

inline std::string format_mw(double v) {
  double r = std::round(v * 1000.0) / 1000.0;
  if (r == 0.0) r = 0.0;  // no "-0.000"
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.3f", r);
  return buf;
}

inline std::string format_probability(double p) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.6e", p);
  return buf;
}

inline std::string format_seconds(double s) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.3f", s);
  return buf;
}

inline void write_shedding_series(const StudyReport& rep, std::ostream& out) {
  out << "hour,total_load_mw,total_wind_mw,max_shed_mw,paths\n";
  for (const auto& h : rep.hours)
    out << h.hour << ',' << format_mw(h.total_load) << ',' << format_mw(h.total_wind) << ',' << format_mw(h.max_shed) << ','
        << h.paths << '\n';
}

inline void write_path(const CascadePath& p, int rank, std::ostream& out) {
  out << "{\"scenario\":" << p.scenario << ",\"rank\":" << rank << ",\"probability\":" << format_probability(p.probability)
      << ",\"shed_mw\":" << format_mw(p.shed) << ",\"terminal\":\"" << to_string(p.terminal) << "\",\"depth\":" << p.depth
      << ",\"events\":[";
  for (std::size_t i = 0; i < p.events.size(); ++i) {
    const auto& e = p.events[i];
    if (i) out << ',';
    out << "{\"kind\":\"" << to_string(e.kind) << "\",\"elements\":[";
    const char prefix = e.kind == EventKind::random_gen_failure ? 'G' : 'L';
    for (std::size_t j = 0; j < e.elements.size(); ++j) out << (j ? "," : "") << '"' << prefix << e.elements[j] << '"';
    out << "],\"probability\":" << format_probability(e.probability);
    if (e.kind == EventKind::redispatch) out << ",\"shed_mw\":" << format_mw(e.shed);
    out << '}';
  }
  out << "]}\n";
}

inline void write_paths(const StudyReport& rep, std::ostream& out) {
  int rank = 0, scenario = -1;
  for (const auto& p : rep.paths) {
    rank = p.scenario == scenario ? rank + 1 : 1;
    scenario = p.scenario;
    write_path(p, rank, out);
  }
}

// Nodes are failed elements; edge labels are path counts; fill colour runs
// from white (no shedding) to red (largest shedding in the study).
inline void write_path_graph(const PathGraph& g, std::ostream& out) {
  const auto degree = g.degrees();
  const auto shed = g.node_max_shed();
  double top = 0.0;
  for (const auto& kv : shed) top = std::max(top, kv.second);
  out << "digraph cascade_paths {\n  node [shape=circle, style=filled];\n";
  char buf[32];
  for (const auto& n : g.nodes) {
    const double s = shed.count(n) ? shed.at(n) : 0.0;
    const double f = top > 0.0 ? s / top : 0.0;
    const int gb = static_cast<int>(std::lround(255.0 * (1.0 - f)));
    std::snprintf(buf, sizeof buf, "#ff%02x%02x", gb, gb);
    out << "  \"" << n << "\" [degree=" << degree.at(n) << ", max_shed_mw=" << format_mw(s) << ", fillcolor=\"" << buf
        << "\"];\n";
  }
  for (const auto& e : g.edges)
    out << "  \"" << e.from << "\" -> \"" << e.to << "\" [count=" << e.count << ", max_shed_mw=" << format_mw(e.max_shed)
        << ", label=\"" << e.count << "\"];\n";
  out << "}\n";
}

inline void write_timing(const StudyReport& rep, std::ostream& out) {
  out << "phase      seconds\n";
  out << "sampling   " << format_seconds(rep.timing.sampling) << '\n';
  out << "dcpf       " << format_seconds(rep.timing.dcpf) << '\n';
  out << "dcopf      " << format_seconds(rep.timing.dcopf) << '\n';
  out << "total      " << format_seconds(rep.timing.total) << '\n';
  out << "scenarios  " << rep.hours.size() << '\n';
  out << "states     " << rep.states << '\n';
  out << "dispatches " << rep.dispatches << '\n';
  out << "workers    " << rep.config.workers << '\n';
  out << "lsd        " << (rep.config.lsd_enabled ? "on" : "off") << '\n';
  out << "woodbury   " << (rep.config.woodbury_enabled ? "on" : "off") << '\n';
}

inline void write_lsd_stats(const StudyReport& rep, std::ostream& out) {
  if (!rep.lsd) {
    out << "{\"enabled\":false}\n";
    return;
  }
  const LsdStats& s = *rep.lsd;
  out << "{\"enabled\":true,\"entries\":" << s.entries << ",\"regions\":" << s.regions << ",\"gsdf_hits\":" << s.gsdf_hits
      << ",\"gsdf_misses\":" << s.gsdf_misses << ",\"woodbury_builds\":" << s.woodbury_builds
      << ",\"scratch_builds\":" << s.scratch_builds << ",\"region_hits\":" << s.region_hits
      << ",\"region_misses\":" << s.region_misses << ",\"region_tests\":" << s.region_tests
      << ",\"degenerate_skips\":" << s.degenerate_skips << ",\"audits\":" << s.audits
      << ",\"audit_failures\":" << s.audit_failures << ",\"evictions\":" << s.evictions
      << ",\"hit_seconds\":" << format_seconds(s.hit_seconds) << ",\"solve_seconds\":" << format_seconds(s.solve_seconds)
      << ",\"time_saved_seconds\":" << format_seconds(s.time_saved()) << "}\n";
}

// Writes the five output files into `dir` (which must exist).
inline void write_report(const StudyReport& rep, const std::string& dir) {
  auto open = [&](const char* name) {
    std::ofstream f(dir + "/" + name);
    if (!f) throw std::runtime_error("cannot write " + dir + "/" + name);
    return f;
  };
  {
    auto f = open("shedding.csv");
    write_shedding_series(rep, f);
  }
  {
    auto f = open("paths.jsonl");
    write_paths(rep, f);
  }
  {
    auto f = open("path_graph.dot");
    write_path_graph(rep.graph, f);
  }
  {
    auto f = open("timing.txt");
    write_timing(rep, f);
  }
  {
    auto f = open("lsd_stats.json");
    write_lsd_stats(rep, f);
  }
}

// ---------------------------------------------------------------------------
// Timing comparison across acceleration settings.

struct TimingRow {
  std::string label;
  PhaseTimes times;
};

// Reference timings for the 8760-scenario RTS-79 study (seconds), shown as an
// annotation next to measured rows.
inline std::vector<TimingRow> reference_timings() {
  return {{"ref c1", {82, 241, 1425, 1883}}, {"ref c2", {74, 124, 94, 351}}, {"ref c3", {74, 78, 91, 297}}};
}

class WorkloadMismatch : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

inline void check_same_workload(const StudyReport& a, const StudyReport& b) {
  auto same = [](double x, double y) { return x == y; };
  if (a.case_name != b.case_name || a.hours.size() != b.hours.size() || !same(a.config.epsilon, b.config.epsilon) ||
      a.config.m != b.config.m || a.config.depth_limit != b.config.depth_limit)
    throw WorkloadMismatch("reports describe different workloads (case, scenario count, epsilon, m or depth limit differ)");
  for (std::size_t i = 0; i < a.hours.size(); ++i)
    if (a.hours[i].hour != b.hours[i].hour || std::abs(a.hours[i].total_load - b.hours[i].total_load) > 1e-6)
      throw WorkloadMismatch("reports were run on different scenarios");
}

struct TimingComparison {
  std::vector<TimingRow> rows;
  std::vector<PhaseTimes> speedup;  // baseline (first row) time / row time, per phase
};

inline TimingComparison compare_timings(const std::vector<std::pair<std::string, const StudyReport*>>& reports) {
  if (reports.size() < 2) throw std::invalid_argument("need at least two reports to compare");
  for (std::size_t i = 1; i < reports.size(); ++i) check_same_workload(*reports[0].second, *reports[i].second);
  TimingComparison c;
  const PhaseTimes& base = reports[0].second->timing;
  auto ratio = [](double a, double b) { return b > 0.0 ? a / b : (a > 0.0 ? INFINITY : 1.0); };
  for (const auto& [label, rep] : reports) {
    c.rows.push_back({label, rep->timing});
    c.speedup.push_back({ratio(base.sampling, rep->timing.sampling), ratio(base.dcpf, rep->timing.dcpf),
                         ratio(base.dcopf, rep->timing.dcopf), ratio(base.total, rep->timing.total)});
  }
  return c;
}

inline void write_timing_comparison(const TimingComparison& c, std::ostream& out, bool with_reference = true) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-10s %10s %10s %10s %10s   %8s %8s %8s %8s\n", "case", "sampling", "dcpf", "dcopf", "total",
                "x_samp", "x_dcpf", "x_dcopf", "x_total");
  out << buf;
  for (std::size_t i = 0; i < c.rows.size(); ++i) {
    const auto& t = c.rows[i].times;
    const auto& s = c.speedup[i];
    std::snprintf(buf, sizeof buf, "%-10s %10.3f %10.3f %10.3f %10.3f   %8.2f %8.2f %8.2f %8.2f\n", c.rows[i].label.c_str(),
                  t.sampling, t.dcpf, t.dcopf, t.total, s.sampling, s.dcpf, s.dcopf, s.total);
    out << buf;
  }
  if (!with_reference) return;
  const auto ref = reference_timings();
  for (const auto& r : ref) {
    const auto& b = ref.front().times;
    std::snprintf(buf, sizeof buf, "%-10s %10.0f %10.0f %10.0f %10.0f   %8.2f %8.2f %8.2f %8.2f\n", r.label.c_str(),
                  r.times.sampling, r.times.dcpf, r.times.dcopf, r.times.total, b.sampling / r.times.sampling,
                  b.dcpf / r.times.dcpf, b.dcopf / r.times.dcopf, b.total / r.times.total);
    out << buf;
  }
}

} // namespace cascade

#pragma once

// Static network description: buses, lines, generators, costs and limits.
//
// Power quantities are MW throughout. Line reactances are per-unit on the
// case's base_mva (default 100 MVA); distribution factors are independent of
// the base, so no other quantity is converted internally.

#include <Eigen/Dense>

#include <algorithm>
#include <fstream>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "status_vector.hpp"

namespace cascade {

class CaseError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class CaseParseError : public CaseError {
public:
  using CaseError::CaseError;
};

class CaseValidationError : public CaseError {
public:
  using CaseError::CaseError;
};

enum class GeneratorKind { conventional, wind };

struct Bus {
  int id = 0;
  bool is_reference = false;
  double base_load = 0.0;  // MW
};

struct Line {
  int id = 0;
  int from_bus = 0;
  int to_bus = 0;
  double reactance = 0.0;        // p.u.
  double flow_limit = 0.0;       // long-term limit L^b, MW
  double relay_threshold = 1.2;  // breaker trips above relay_threshold * flow_limit
  double base_fail_prob = 0.0;   // per Markov step

  double susceptance() const { return 1.0 / reactance; }
  double trip_limit() const { return relay_threshold * flow_limit; }
};

struct Generator {
  int id = 0;
  int bus = 0;
  double p_max = 0.0;     // MW; for wind units this is installed capacity
  double cost = 0.0;      // currency/MWh
  double fail_prob = 0.0; // per Markov step; ignored for wind units
  GeneratorKind kind = GeneratorKind::conventional;

  bool is_wind() const { return kind == GeneratorKind::wind; }
};

// Values applied to fields a case file leaves out.
struct CaseDefaults {
  double relay_threshold = 1.2;
  double generator_fail_prob = 1e-3;
  double shed_cost_multiplier = 100.0;  // c_d = multiplier * max generation cost
};

struct CaseData {
  std::string name;
  double base_mva = 100.0;
  std::vector<Bus> buses;
  std::vector<Line> lines;
  std::vector<Generator> generators;
  std::vector<double> shed_cost;  // per bus
  double peak_load = 0.0;         // MW

  int num_buses() const { return static_cast<int>(buses.size()); }
  int num_lines() const { return static_cast<int>(lines.size()); }
  int num_generators() const { return static_cast<int>(generators.size()); }

  // Bus ids are dense 1..N, so the bus index is id - 1.
  int bus_index(int bus_id) const {
    if (bus_id < 1 || bus_id > num_buses()) throw CaseError("unknown bus id " + std::to_string(bus_id));
    return bus_id - 1;
  }

  int reference_index() const {
    for (int i = 0; i < num_buses(); ++i)
      if (buses[i].is_reference) return i;
    throw CaseError("case has no reference bus");
  }

  int line_index(int line_id) const {
    for (int k = 0; k < num_lines(); ++k)
      if (lines[k].id == line_id) return k;
    throw CaseError("unknown line id " + std::to_string(line_id));
  }

  int generator_index(int gen_id) const {
    for (int g = 0; g < num_generators(); ++g)
      if (generators[g].id == gen_id) return g;
    throw CaseError("unknown generator id " + std::to_string(gen_id));
  }

  double total_base_load() const {
    double s = 0.0;
    for (const auto& b : buses) s += b.base_load;
    return s;
  }

  double total_capacity() const {
    double s = 0.0;
    for (const auto& g : generators) s += g.p_max;
    return s;
  }

  double max_generation_cost() const {
    double c = 0.0;
    for (const auto& g : generators) c = std::max(c, g.cost);
    return c;
  }

  std::vector<int> wind_generators() const {
    std::vector<int> idx;
    for (int g = 0; g < num_generators(); ++g)
      if (generators[g].is_wind()) idx.push_back(g);
    return idx;
  }

  // Scale that maps the base load shape onto peak_load.
  double load_scale() const {
    const double base = total_base_load();
    return base > 0.0 ? peak_load / base : 0.0;
  }
};

// Connected components of the bus graph restricted to in-service lines.
// Returns the component label of each bus (labels numbered by first bus seen).
inline std::vector<int> bus_islands(const CaseData& grid, const StatusVector& line_state, int* count = nullptr) {
  const int n = grid.num_buses();
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  };
  for (int k = 0; k < grid.num_lines(); ++k) {
    if (!line_state[k]) continue;
    const int a = find(grid.lines[k].from_bus - 1);
    const int b = find(grid.lines[k].to_bus - 1);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
  std::vector<int> label(n, -1);
  std::vector<int> root_label(n, -1);
  int next = 0;
  for (int i = 0; i < n; ++i) {
    const int r = find(i);
    if (root_label[r] < 0) root_label[r] = next++;
    label[i] = root_label[r];
  }
  if (count) *count = next;
  return label;
}

inline bool is_connected(const CaseData& grid, const StatusVector& line_state) {
  int count = 0;
  bus_islands(grid, line_state, &count);
  return count <= 1;
}

// Column of the node-branch incidence matrix: +1 at the from bus, -1 at the to bus.
inline Eigen::VectorXd incidence_column(const CaseData& grid, int line_id) {
  const Line& line = grid.lines[grid.line_index(line_id)];
  Eigen::VectorXd e = Eigen::VectorXd::Zero(grid.num_buses());
  e(line.from_bus - 1) = 1.0;
  e(line.to_bus - 1) = -1.0;
  return e;
}

inline Eigen::MatrixXd incidence_matrix(const CaseData& grid) {
  Eigen::MatrixXd e = Eigen::MatrixXd::Zero(grid.num_buses(), grid.num_lines());
  for (int k = 0; k < grid.num_lines(); ++k) {
    e(grid.lines[k].from_bus - 1, k) = 1.0;
    e(grid.lines[k].to_bus - 1, k) = -1.0;
  }
  return e;
}

inline void validate(const CaseData& grid) {
  auto fail = [](const std::string& msg) { throw CaseValidationError(msg); };
  const int n = grid.num_buses();
  if (n < 1) fail("case has no buses");

  int refs = 0;
  for (int i = 0; i < n; ++i) {
    const Bus& b = grid.buses[i];
    if (b.id != i + 1) fail("bus ids must be dense 1..N in order; found id " + std::to_string(b.id) + " at position " + std::to_string(i + 1));
    if (!(b.base_load >= 0.0)) fail("bus " + std::to_string(b.id) + " has negative load");
    if (b.is_reference) ++refs;
  }
  if (refs != 1) fail("exactly one reference bus required, found " + std::to_string(refs));

  std::set<int> line_ids;
  for (const Line& l : grid.lines) {
    const std::string tag = "line " + std::to_string(l.id);
    if (!line_ids.insert(l.id).second) fail("duplicate line id " + std::to_string(l.id));
    if (l.from_bus < 1 || l.from_bus > n || l.to_bus < 1 || l.to_bus > n) fail(tag + " references an unknown bus");
    if (l.from_bus == l.to_bus) fail(tag + " is a self loop");
    if (!(l.reactance > 0.0)) fail(tag + " has nonpositive reactance");
    if (!(l.flow_limit > 0.0)) fail(tag + " has nonpositive flow limit");
    if (!(l.relay_threshold > 1.0)) fail(tag + " relay threshold must exceed 1");
    if (!(l.base_fail_prob >= 0.0 && l.base_fail_prob <= 1.0)) fail(tag + " failure probability outside [0,1]");
  }

  std::set<int> gen_ids;
  for (const Generator& g : grid.generators) {
    const std::string tag = "generator " + std::to_string(g.id);
    if (!gen_ids.insert(g.id).second) fail("duplicate generator id " + std::to_string(g.id));
    if (g.bus < 1 || g.bus > n) fail(tag + " references an unknown bus");
    if (!(g.p_max >= 0.0)) fail(tag + " has negative capacity");
    if (!(g.fail_prob >= 0.0 && g.fail_prob <= 1.0)) fail(tag + " failure probability outside [0,1]");
  }

  if (static_cast<int>(grid.shed_cost.size()) != n) fail("shed_cost must have one entry per bus");
  const double cmax = grid.max_generation_cost();
  for (double c : grid.shed_cost)
    if (!(c > cmax)) fail("shed cost must strictly exceed the largest generation cost");
  if (!(grid.peak_load >= 0.0)) fail("peak load must be nonnegative");

  if (!is_connected(grid, StatusVector(grid.lines.size(), true))) fail("network is not connected with all lines in service");
}

// ---------------------------------------------------------------------------
// JSON case files
//
// {
//   "name": "...", "base_mva": 100, "peak_load": 2850,
//   "defaults": {"relay_threshold": 1.2, "generator_fail_prob": 1e-3, "shed_cost_multiplier": 100},
//   "buses": [{"id": 1, "load": 108, "reference": false}, ...],
//   "lines": [{"id": 1, "from": 1, "to": 2, "reactance": 0.0139, "limit": 175,
//              "relay_threshold": 1.2, "fail_prob": 2.7e-5}, ...],
//   "generators": [{"id": 1, "bus": 1, "p_max": 20, "cost": 130,
//                   "fail_prob": 1e-3, "kind": "conventional"}, ...],
//   "shed_cost": 13000            // scalar or per-bus array
// }
//
// Optional fields: peak_load (defaults to the sum of bus loads), per-line
// relay_threshold, generator fail_prob, kind, shed_cost.

namespace detail {

template <class T>
T require(const nlohmann::json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw CaseParseError(where + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw CaseParseError(where + ": field '" + key + "': " + e.what());
  }
}

template <class T>
T optional_field(const nlohmann::json& j, const char* key, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw CaseParseError(std::string("field '") + key + "': " + e.what());
  }
}

} // namespace detail

inline CaseData case_from_json(const nlohmann::json& j, CaseDefaults defaults = {}) {
  using detail::optional_field;
  using detail::require;
  if (!j.is_object()) throw CaseParseError("case document must be a JSON object");

  CaseData grid;
  grid.name = optional_field<std::string>(j, "name", "");
  grid.base_mva = optional_field<double>(j, "base_mva", 100.0);
  if (j.contains("defaults")) {
    const auto& d = j.at("defaults");
    defaults.relay_threshold = optional_field<double>(d, "relay_threshold", defaults.relay_threshold);
    defaults.generator_fail_prob = optional_field<double>(d, "generator_fail_prob", defaults.generator_fail_prob);
    defaults.shed_cost_multiplier = optional_field<double>(d, "shed_cost_multiplier", defaults.shed_cost_multiplier);
  }

  if (!j.contains("buses") || !j.at("buses").is_array()) throw CaseParseError("case: 'buses' array required");
  for (const auto& b : j.at("buses")) {
    Bus bus;
    bus.id = require<int>(b, "id", "bus");
    bus.base_load = optional_field<double>(b, "load", 0.0);
    bus.is_reference = optional_field<bool>(b, "reference", false);
    grid.buses.push_back(bus);
  }
  std::sort(grid.buses.begin(), grid.buses.end(), [](const Bus& a, const Bus& b) { return a.id < b.id; });

  if (!j.contains("lines") || !j.at("lines").is_array()) throw CaseParseError("case: 'lines' array required");
  for (const auto& l : j.at("lines")) {
    Line line;
    line.id = require<int>(l, "id", "line");
    const std::string where = "line " + std::to_string(line.id);
    line.from_bus = require<int>(l, "from", where);
    line.to_bus = require<int>(l, "to", where);
    line.reactance = require<double>(l, "reactance", where);
    line.flow_limit = require<double>(l, "limit", where);
    line.relay_threshold = optional_field<double>(l, "relay_threshold", defaults.relay_threshold);
    line.base_fail_prob = optional_field<double>(l, "fail_prob", 0.0);
    grid.lines.push_back(line);
  }

  if (j.contains("generators")) {
    for (const auto& g : j.at("generators")) {
      Generator gen;
      gen.id = require<int>(g, "id", "generator");
      const std::string where = "generator " + std::to_string(gen.id);
      gen.bus = require<int>(g, "bus", where);
      gen.p_max = require<double>(g, "p_max", where);
      gen.cost = optional_field<double>(g, "cost", 0.0);
      const auto kind = optional_field<std::string>(g, "kind", "conventional");
      if (kind == "wind")
        gen.kind = GeneratorKind::wind;
      else if (kind == "conventional")
        gen.kind = GeneratorKind::conventional;
      else
        throw CaseParseError(where + ": unknown kind '" + kind + "'");
      gen.fail_prob = optional_field<double>(g, "fail_prob", gen.is_wind() ? 0.0 : defaults.generator_fail_prob);
      grid.generators.push_back(gen);
    }
  }

  grid.peak_load = optional_field<double>(j, "peak_load", grid.total_base_load());

  const double cmax = grid.max_generation_cost();
  const double fallback_shed = defaults.shed_cost_multiplier * (cmax > 0.0 ? cmax : 1.0);
  if (!j.contains("shed_cost") || j.at("shed_cost").is_null()) {
    grid.shed_cost.assign(grid.buses.size(), fallback_shed);
  } else if (j.at("shed_cost").is_number()) {
    grid.shed_cost.assign(grid.buses.size(), j.at("shed_cost").get<double>());
  } else {
    try {
      grid.shed_cost = j.at("shed_cost").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
      throw CaseParseError(std::string("shed_cost: ") + e.what());
    }
  }

  validate(grid);
  return grid;
}

inline nlohmann::json case_to_json(const CaseData& grid) {
  nlohmann::json j;
  j["name"] = grid.name;
  j["base_mva"] = grid.base_mva;
  j["peak_load"] = grid.peak_load;
  auto& buses = j["buses"] = nlohmann::json::array();
  for (const Bus& b : grid.buses) {
    nlohmann::json e{{"id", b.id}, {"load", b.base_load}};
    if (b.is_reference) e["reference"] = true;
    buses.push_back(e);
  }
  auto& lines = j["lines"] = nlohmann::json::array();
  for (const Line& l : grid.lines)
    lines.push_back({{"id", l.id},
                     {"from", l.from_bus},
                     {"to", l.to_bus},
                     {"reactance", l.reactance},
                     {"limit", l.flow_limit},
                     {"relay_threshold", l.relay_threshold},
                     {"fail_prob", l.base_fail_prob}});
  auto& gens = j["generators"] = nlohmann::json::array();
  for (const Generator& g : grid.generators)
    gens.push_back({{"id", g.id},
                    {"bus", g.bus},
                    {"p_max", g.p_max},
                    {"cost", g.cost},
                    {"fail_prob", g.fail_prob},
                    {"kind", g.is_wind() ? "wind" : "conventional"}});
  j["shed_cost"] = grid.shed_cost;
  return j;
}

inline CaseData parse_case(const std::string& text, CaseDefaults defaults = {}) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw CaseParseError(std::string("malformed case file: ") + e.what());
  }
  return case_from_json(j, defaults);
}

inline CaseData load_case(const std::string& path, CaseDefaults defaults = {}) {
  std::ifstream in(path);
  if (!in) throw CaseParseError("cannot open case file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_case(buf.str(), defaults);
}

inline void save_case(const CaseData& grid, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw CaseError("cannot write case file '" + path + "'");
  out << case_to_json(grid).dump(2) << '\n';
}

inline bool operator==(const Bus& a, const Bus& b) {
  return a.id == b.id && a.is_reference == b.is_reference && a.base_load == b.base_load;
}
inline bool operator==(const Line& a, const Line& b) {
  return a.id == b.id && a.from_bus == b.from_bus && a.to_bus == b.to_bus && a.reactance == b.reactance &&
         a.flow_limit == b.flow_limit && a.relay_threshold == b.relay_threshold && a.base_fail_prob == b.base_fail_prob;
}
inline bool operator==(const Generator& a, const Generator& b) {
  return a.id == b.id && a.bus == b.bus && a.p_max == b.p_max && a.cost == b.cost && a.fail_prob == b.fail_prob &&
         a.kind == b.kind;
}
inline bool operator==(const CaseData& a, const CaseData& b) {
  return a.name == b.name && a.base_mva == b.base_mva && a.buses == b.buses && a.lines == b.lines &&
         a.generators == b.generators && a.shed_cost == b.shed_cost && a.peak_load == b.peak_load;
}

} // namespace cascade

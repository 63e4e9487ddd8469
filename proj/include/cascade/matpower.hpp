#pragma once

// Reader for MATPOWER case files (the `mpc.bus`, `mpc.gen`, `mpc.branch` and
// `mpc.gencost` matrices). Buses are renumbered 1..N in file order; units and
// branches keep file order and are numbered from 1. MATPOWER carries no
// reliability data, so failure probabilities come from the options.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "case_model.hpp"

namespace cascade {

struct MatpowerImportOptions {
  double relay_threshold = 1.2;
  double generator_fail_prob = 1e-3;
  double line_fail_prob = 1e-4;
  double shed_cost_multiplier = 100.0;
  double unlimited_rating = 9999.0;     // MW used where rateA is 0 (unlimited)
  std::vector<int> removed_units;       // unit ids (1-based, file order) to leave out
  bool keep_zero_capacity_units = false; // synchronous condensers have Pmax = 0
};

namespace detail {

using MatRows = std::vector<std::vector<double>>;

inline std::string strip_matlab_comments(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  bool comment = false, quoted = false;
  for (char ch : text) {
    if (ch == '\n') {
      comment = quoted = false;
      out += ch;
      continue;
    }
    if (comment) continue;
    if (ch == '\'') quoted = !quoted;
    if (ch == '%' && !quoted) {
      comment = true;
      continue;
    }
    out += ch;
  }
  return out;
}

inline MatRows parse_matrix_body(const std::string& body, const std::string& name) {
  MatRows rows;
  std::vector<double> row;
  std::string token;
  auto flush_token = [&] {
    if (token.empty()) return;
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(token, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != token.size()) {
      if (token == "Inf" || token == "inf") v = HUGE_VAL;
      else if (token == "-Inf" || token == "-inf") v = -HUGE_VAL;
      else throw CaseParseError("mpc." + name + ": bad number '" + token + "'");
    }
    row.push_back(v);
    token.clear();
  };
  auto flush_row = [&] {
    flush_token();
    if (!row.empty()) rows.push_back(std::move(row));
    row.clear();
  };
  for (char ch : body) {
    if (ch == ';' || ch == '\n' || ch == '\r') flush_row();
    else if (ch == ' ' || ch == '\t' || ch == ',') flush_token();
    else if (ch == '.' && !token.empty() && token.back() == '.') throw CaseParseError("mpc." + name + ": line continuation not supported");
    else token += ch;
  }
  flush_row();
  return rows;
}

// Finds `mpc.<name> = [ ... ];` and returns its rows; empty if absent.
inline MatRows find_matrix(const std::string& text, const std::string& name) {
  const std::string key = "mpc." + name;
  std::size_t pos = 0;
  while ((pos = text.find(key, pos)) != std::string::npos) {
    std::size_t p = pos + key.size();
    while (p < text.size() && (text[p] == ' ' || text[p] == '\t')) ++p;
    if (p < text.size() && text[p] == '=') {
      const std::size_t open = text.find('[', p);
      const std::size_t close = text.find(']', open);
      if (open == std::string::npos || close == std::string::npos) throw CaseParseError(key + ": unterminated matrix");
      return parse_matrix_body(text.substr(open + 1, close - open - 1), name);
    }
    pos = p;
  }
  return {};
}

inline double find_scalar(const std::string& text, const std::string& name, double fallback) {
  const std::string key = "mpc." + name;
  const std::size_t pos = text.find(key);
  if (pos == std::string::npos) return fallback;
  std::size_t p = text.find('=', pos);
  if (p == std::string::npos) throw CaseParseError(key + ": missing value");
  const std::size_t end = text.find(';', p);
  try {
    return std::stod(text.substr(p + 1, end - p - 1));
  } catch (const std::exception&) {
    throw CaseParseError(key + ": bad value");
  }
}

// Average cost per MWh over [pmin, pmax], ignoring the no-load term.
inline double average_marginal_cost(const std::vector<double>& row, double p_min, double p_max) {
  if (row.size() < 4) throw CaseParseError("mpc.gencost: short row");
  const int model = static_cast<int>(row[0]);
  const int count = static_cast<int>(row[3]);
  if (model == 2) {
    if (static_cast<int>(row.size()) < 4 + count) throw CaseParseError("mpc.gencost: missing coefficients");
    auto eval = [&](double p) {
      double v = 0.0;
      for (int i = 0; i < count - 1; ++i) v = (v + row[4 + i]) * p;  // drops the constant term
      return v;
    };
    if (count <= 1) return 0.0;
    if (p_max <= p_min) return row[4 + count - 2];
    return (eval(p_max) - eval(p_min)) / (p_max - p_min);
  }
  if (model == 1) {
    if (static_cast<int>(row.size()) < 4 + 2 * count || count < 2) throw CaseParseError("mpc.gencost: bad piecewise curve");
    const double p0 = row[4], f0 = row[5];
    const double p1 = row[4 + 2 * (count - 1)], f1 = row[5 + 2 * (count - 1)];
    return p1 > p0 ? (f1 - f0) / (p1 - p0) : 0.0;
  }
  throw CaseParseError("mpc.gencost: unknown cost model " + std::to_string(model));
}

} // namespace detail

inline CaseData parse_matpower(const std::string& raw, const MatpowerImportOptions& opt = {}) {
  using namespace detail;
  const std::string text = strip_matlab_comments(raw);
  const MatRows bus = find_matrix(text, "bus");
  const MatRows gen = find_matrix(text, "gen");
  const MatRows branch = find_matrix(text, "branch");
  const MatRows gencost = find_matrix(text, "gencost");
  if (bus.empty()) throw CaseParseError("MATPOWER file has no mpc.bus matrix");
  if (branch.empty() && bus.size() > 1) throw CaseParseError("MATPOWER file has no mpc.branch matrix");

  CaseData grid;
  grid.base_mva = find_scalar(text, "baseMVA", 100.0);
  std::map<int, int> bus_id;
  for (const auto& r : bus) {
    if (r.size() < 3) throw CaseParseError("mpc.bus: rows need at least 3 columns");
    const int ext = static_cast<int>(r[0]);
    if (!bus_id.emplace(ext, static_cast<int>(grid.buses.size()) + 1).second)
      throw CaseParseError("mpc.bus: duplicate bus number " + std::to_string(ext));
    grid.buses.push_back({static_cast<int>(grid.buses.size()) + 1, static_cast<int>(r[1]) == 3, std::max(0.0, r[2])});
  }
  auto map_bus = [&](double ext, const std::string& where) {
    auto it = bus_id.find(static_cast<int>(ext));
    if (it == bus_id.end()) throw CaseParseError(where + " references unknown bus " + std::to_string(static_cast<int>(ext)));
    return it->second;
  };

  int line_id = 0;
  for (std::size_t i = 0; i < branch.size(); ++i) {
    const auto& r = branch[i];
    if (r.size() < 6) throw CaseParseError("mpc.branch: rows need at least 6 columns");
    if (r.size() > 10 && r[10] == 0.0) continue;  // out of service
    const std::string where = "mpc.branch row " + std::to_string(i + 1);
    Line l;
    l.id = ++line_id;
    l.from_bus = map_bus(r[0], where);
    l.to_bus = map_bus(r[1], where);
    l.reactance = r[3];
    l.flow_limit = r[5] > 0.0 ? r[5] : opt.unlimited_rating;
    l.relay_threshold = opt.relay_threshold;
    l.base_fail_prob = opt.line_fail_prob;
    grid.lines.push_back(l);
  }

  if (!gencost.empty() && gencost.size() < gen.size()) throw CaseParseError("mpc.gencost has fewer rows than mpc.gen");
  const std::set<int> removed(opt.removed_units.begin(), opt.removed_units.end());
  int unit_id = 0;
  for (std::size_t i = 0; i < gen.size(); ++i) {
    const auto& r = gen[i];
    if (r.size() < 10) throw CaseParseError("mpc.gen: rows need at least 10 columns");
    const double p_max = r[8], p_min = std::max(0.0, r[9]);
    if (r[7] <= 0.0) continue;
    if (p_max <= 0.0 && !opt.keep_zero_capacity_units) continue;
    ++unit_id;
    if (removed.count(unit_id)) continue;
    Generator g;
    g.id = unit_id;
    g.bus = map_bus(r[0], "mpc.gen row " + std::to_string(i + 1));
    g.p_max = std::max(0.0, p_max);
    g.cost = gencost.empty() ? 0.0 : std::max(0.0, average_marginal_cost(gencost[i], p_min, g.p_max));
    g.fail_prob = opt.generator_fail_prob;
    grid.generators.push_back(g);
  }
  for (int id : removed)
    if (id < 1 || id > unit_id) throw CaseValidationError("removed unit id " + std::to_string(id) + " does not exist");

  const double cmax = grid.max_generation_cost();
  grid.shed_cost.assign(grid.buses.size(), opt.shed_cost_multiplier * (cmax > 0.0 ? cmax : 1.0));
  grid.peak_load = grid.total_base_load();
  validate(grid);
  return grid;
}

inline CaseData load_matpower(const std::string& path, const MatpowerImportOptions& opt = {}) {
  std::ifstream f(path);
  if (!f) throw CaseParseError("cannot open " + path);
  std::stringstream buf;
  buf << f.rdbuf();
  CaseData grid = parse_matpower(buf.str(), opt);
  const auto slash = path.find_last_of('/');
  std::string stem = path.substr(slash == std::string::npos ? 0 : slash + 1);
  if (stem.size() > 2 && stem.substr(stem.size() - 2) == ".m") stem.resize(stem.size() - 2);
  grid.name = stem;
  return grid;
}

} // namespace cascade

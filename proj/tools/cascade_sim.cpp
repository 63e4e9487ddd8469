// cascade-sim: batch cascading-failure path search over hourly scenarios.
//
//   cascade-sim --case rts79_wind --hours 8760 --epsilon 1e-9 --m 3 --output out
//   cascade-sim --case rts79 --hours 200 compare
//   cascade-sim --case rts79_wind export-case data/rts79_wind.json
//   cascade-sim --case rts79_wind --hours 8760 scenarios hours.csv
//   cascade-sim import-matpower case24_ieee_rts.m rts.json

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "cascade.hpp"

namespace {

using namespace cascade;

struct Options {
  std::string case_name = "rts79";
  std::string wind_config;
  std::string load_profile;
  std::string scenarios;
  int hours = 8760;
  std::uint64_t seed = 1;
  double epsilon = 1e-9;
  int m = 3;
  int depth_limit = 8;
  int workers = 1;
  bool no_lsd = false;
  bool no_woodbury = false;
  bool sequential_relay = false;
  bool literal_dispatch = false;
  double step_minutes = 1.0;
  std::size_t lsd_max_entries = 0;
  std::string save_lsd;
  std::string load_lsd;
  std::string output = "cascade-out";
  bool quiet = false;
};

bool ends_with(const std::string& s, const std::string& tail) {
  return s.size() >= tail.size() && s.compare(s.size() - tail.size(), tail.size(), tail) == 0;
}

CaseData resolve_case(const Options& o) {
  Rts79Options r;
  r.step_hours = o.step_minutes / 60.0;
  if (o.case_name == "rts79") return rts79_case(r);
  if (o.case_name == "rts79_wind") return rts79_wind_case(r);
  if (ends_with(o.case_name, ".m")) return load_matpower(o.case_name);
  CaseData grid = load_case(o.case_name);
  if (grid.name.empty()) grid.name = std::filesystem::path(o.case_name).stem().string();
  return grid;
}

WindModelConfig resolve_wind(const Options& o, const CaseData& grid) {
  if (!o.wind_config.empty()) {
    std::ifstream f(o.wind_config);
    if (!f) throw ScenarioError("cannot open wind config '" + o.wind_config + "'");
    nlohmann::json j;
    try {
      f >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ScenarioError("wind config '" + o.wind_config + "': " + e.what());
    }
    return wind_config_from_json(j);
  }
  const auto farms = grid.wind_generators().size();
  if (farms == 5) return rts79_wind_config();
  return WindModelConfig::uniform(Eigen::MatrixXd::Identity(farms, farms));
}

std::vector<double> resolve_load_profile(const Options& o) {
  if (o.load_profile.empty()) return rts79_hourly_load_profile();
  std::ifstream f(o.load_profile);
  if (!f) throw ScenarioError("cannot open load profile '" + o.load_profile + "'");
  std::vector<double> v;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty() || line[0] == '#') continue;
    try {
      v.push_back(std::stod(line));
    } catch (const std::exception&) {
      throw ScenarioError("load profile line '" + line + "' is not a number");
    }
  }
  if (v.empty()) throw ScenarioError("load profile '" + o.load_profile + "' is empty");
  return v;
}

std::vector<Scenario> resolve_scenarios(const Options& o, const CaseData& grid) {
  if (!o.scenarios.empty()) {
    auto s = load_scenarios(grid, o.scenarios);
    if (o.hours >= 0 && static_cast<std::size_t>(o.hours) < s.size()) s.resize(o.hours);
    return s;
  }
  if (o.hours == 0) return {};
  return generate_scenarios(grid, resolve_wind(o, grid), resolve_load_profile(o), o.hours, o.seed);
}

SearchConfig search_config(const Options& o) {
  SearchConfig c;
  c.epsilon = o.epsilon;
  c.m = o.m;
  c.depth_limit = o.depth_limit;
  c.workers = o.workers;
  c.lsd_enabled = !o.no_lsd;
  c.woodbury_enabled = !o.no_woodbury;
  c.relay.sequential = o.sequential_relay;
  c.dispatch.gen_nonnegative = !o.literal_dispatch;
  c.lsd.max_entries = o.lsd_max_entries;
  validate(c);
  return c;
}

void print_summary(const StudyReport& rep, const std::string& dir) {
  double worst = 0.0;
  for (const auto& h : rep.hours) worst = std::max(worst, h.max_shed);
  std::cout << rep.case_name << ": " << rep.hours.size() << " scenarios, " << rep.paths.size() << " paths, max shed "
            << format_mw(worst) << " MW, " << format_seconds(rep.timing.total) << " s -> " << dir << '\n';
}

int run(const Options& o) {
  const CaseData grid = resolve_case(o);
  const SearchConfig cfg = search_config(o);
  const auto scenarios = resolve_scenarios(o, grid);
  std::filesystem::create_directories(o.output);

  StudyReport rep;
  if (!o.load_lsd.empty() || !o.save_lsd.empty()) {
    if (!cfg.lsd_enabled) throw std::invalid_argument("--load-lsd/--save-lsd need the dictionary enabled");
    // Same as run_study, with a dictionary that outlives the run.
    CascadeSearch search(grid, cfg);
    if (!o.load_lsd.empty()) search.dictionary()->load(o.load_lsd);
    rep = run_study(search, scenarios);
    if (!o.save_lsd.empty()) search.dictionary()->save(o.save_lsd);
  } else {
    rep = run_study(grid, scenarios, cfg);
  }
  write_report(rep, o.output);
  for (const auto& [hour, msg] : rep.errors) std::cerr << "scenario " << hour << ": " << msg << '\n';
  if (!o.quiet) print_summary(rep, o.output);
  return rep.errors.empty() ? 0 : 3;
}

int compare(const Options& o, const std::vector<std::string>& modes) {
  const CaseData grid = resolve_case(o);
  const auto scenarios = resolve_scenarios(o, grid);
  std::vector<StudyReport> reports;
  std::vector<std::string> labels;
  for (const auto& mode : modes) {
    Options v = o;
    if (mode == "c1") v.no_lsd = v.no_woodbury = true;
    else if (mode == "c2") v.no_lsd = false, v.no_woodbury = true;
    else if (mode == "c3") v.no_lsd = v.no_woodbury = false;
    else if (mode == "c4") v.no_lsd = true, v.no_woodbury = false;
    else throw std::invalid_argument("unknown mode '" + mode + "' (c1, c2, c3, c4)");
    if (!o.quiet) std::cerr << "running " << mode << "...\n";
    reports.push_back(run_study(grid, scenarios, search_config(v)));
    labels.push_back(mode);
  }
  std::vector<std::pair<std::string, const StudyReport*>> rows;
  for (std::size_t i = 0; i < reports.size(); ++i) rows.emplace_back(labels[i], &reports[i]);
  const TimingComparison c = compare_timings(rows);
  std::filesystem::create_directories(o.output);
  std::ofstream f(o.output + "/timing_comparison.txt");
  if (!f) throw std::runtime_error("cannot write " + o.output + "/timing_comparison.txt");
  write_timing_comparison(c, f);
  write_timing_comparison(c, std::cout);
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  Options o;
  CLI::App app{"Cascading-failure path search on DC power networks"};
  app.set_config("--config", "", "TOML/INI file with any of the long options below");
  app.allow_config_extras(false);
  app.set_help_all_flag("--help-all", "Help for all subcommands");

  app.add_option("--case", o.case_name, "rts79, rts79_wind, a case JSON file or a MATPOWER .m file")->capture_default_str();
  app.add_option("--wind-config", o.wind_config, "Wind model JSON (default: built-in five-farm model)");
  app.add_option("--load-profile", o.load_profile, "Hourly load multipliers, one per line (default: RTS-79 year)");
  app.add_option("--scenarios", o.scenarios, "Replay scenarios from a CSV written by the scenarios subcommand");
  app.add_option("--hours", o.hours, "Number of hourly scenarios")->check(CLI::NonNegativeNumber)->capture_default_str();
  app.add_option("--seed", o.seed, "Scenario RNG seed")->capture_default_str();
  app.add_option("--epsilon", o.epsilon, "Path probability threshold")->check(CLI::Range(0.0, 1.0))->capture_default_str();
  app.add_option("--m", o.m, "Paths kept per scenario")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--depth-limit", o.depth_limit, "Maximum Markov steps per path")->check(CLI::NonNegativeNumber)->capture_default_str();
  app.add_option("--workers", o.workers, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_flag("--no-lsd", o.no_lsd, "Disable the line status dictionary");
  app.add_flag("--no-woodbury", o.no_woodbury, "Rebuild GSDFs from scratch instead of rank updates");
  app.add_flag("--sequential-relay", o.sequential_relay, "Trip only the worst overloaded line per relay iteration");
  app.add_flag("--literal-dispatch", o.literal_dispatch, "Drop the per-bus net-generation lower bound from the dispatch LP");
  app.add_option("--step-minutes", o.step_minutes, "Markov step length for built-in cases (failure rate conversion)")
      ->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--lsd-max-entries", o.lsd_max_entries, "Dictionary size bound (0: unbounded)")->capture_default_str();
  app.add_option("--load-lsd", o.load_lsd, "Warm-start the dictionary from a file");
  app.add_option("--save-lsd", o.save_lsd, "Save the dictionary after the run");
  app.add_option("--output", o.output, "Output directory")->envname("CASCADE_OUTPUT_DIR")->capture_default_str();
  app.add_flag("--quiet", o.quiet, "No summary on stdout");

  auto* cmp = app.add_subcommand("compare", "Run the workload under several acceleration settings and tabulate timings");
  std::vector<std::string> modes = {"c1", "c2", "c3"};
  cmp->add_option("modes", modes, "c1 (none), c2 (dictionary), c3 (dictionary + rank updates), c4 (rank updates)")
      ->capture_default_str();

  auto* exp = app.add_subcommand("export-case", "Write the selected case as JSON");
  std::string export_path;
  exp->add_option("file", export_path, "Destination JSON file")->required();

  auto* scen = app.add_subcommand("scenarios", "Write the generated scenarios as CSV");
  std::string scen_path;
  scen->add_option("file", scen_path, "Destination CSV file")->required();

  auto* imp = app.add_subcommand("import-matpower", "Convert a MATPOWER case to the case JSON format");
  std::string mp_in, mp_out;
  MatpowerImportOptions mp;
  imp->add_option("input", mp_in, "MATPOWER .m file")->required()->check(CLI::ExistingFile);
  imp->add_option("output", mp_out, "Destination JSON file")->required();
  imp->add_option("--remove-units", mp.removed_units, "Unit ids (file order, from 1) to leave out");
  imp->add_option("--generator-fail-prob", mp.generator_fail_prob, "Per-step unit failure probability")->capture_default_str();
  imp->add_option("--line-fail-prob", mp.line_fail_prob, "Per-step branch failure probability")->capture_default_str();
  imp->add_option("--relay-threshold", mp.relay_threshold, "Relay threshold multiple of the rating")->capture_default_str();

  app.require_subcommand(0, 1);
  CLI11_PARSE(app, argc, argv);

  try {
    if (*cmp) return compare(o, modes);
    if (*exp) {
      save_case(resolve_case(o), export_path);
      return 0;
    }
    if (*scen) {
      const CaseData grid = resolve_case(o);
      if (o.hours == 0) throw std::invalid_argument("--hours must be positive for scenario export");
      save_scenarios(grid, resolve_scenarios(o, grid), scen_path);
      return 0;
    }
    if (*imp) {
      CaseData grid = load_matpower(mp_in, mp);
      save_case(grid, mp_out);
      if (!o.quiet)
        std::cout << grid.name << ": " << grid.num_buses() << " buses, " << grid.num_lines() << " lines, "
                  << grid.num_generators() << " units\n";
      return 0;
    }
    return run(o);
  } catch (const CaseError& e) {
    std::cerr << "case error: " << e.what() << '\n';
    return 2;
  } catch (const ScenarioError& e) {
    std::cerr << "scenario error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

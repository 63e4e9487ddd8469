#include <gtest/gtest.h>

#include <set>

#include "cascade/cascade.hpp"
#include "cascade/rts79.hpp"
#include "support/oracles.hpp"
#include "support/toy_cases.hpp"

using namespace cascade;

namespace {

Line example_line() {
  Line l;
  l.id = 1;
  l.flow_limit = 100.0;
  l.relay_threshold = 1.2;
  l.base_fail_prob = 0.001;
  return l;
}

Scenario flat_scenario(const CaseData& c, double scale = 1.0) {
  Scenario s;
  for (const auto& b : c.buses) s.load.push_back(b.base_load * scale);
  for (int g : c.wind_generators()) s.wind_output.push_back(c.generators[g].p_max * 0.5);
  return s;
}

void expect_same_paths(const std::vector<CascadePath>& a, const std::vector<CascadePath>& b) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    ASSERT_EQ(a[i].events.size(), b[i].events.size()) << "path " << i;
    for (std::size_t e = 0; e < a[i].events.size(); ++e) {
      EXPECT_EQ(a[i].events[e].kind, b[i].events[e].kind);
      EXPECT_EQ(a[i].events[e].elements, b[i].events[e].elements);
      EXPECT_NEAR(a[i].events[e].probability, b[i].events[e].probability, 1e-12);
      EXPECT_NEAR(a[i].events[e].shed, b[i].events[e].shed, 1e-9 * (1.0 + std::abs(b[i].events[e].shed)));
    }
    EXPECT_NEAR(a[i].probability, b[i].probability, 1e-9 * b[i].probability);
    EXPECT_NEAR(a[i].shed, b[i].shed, 1e-9 * (1.0 + std::abs(b[i].shed)));
    EXPECT_EQ(a[i].terminal, b[i].terminal);
    EXPECT_EQ(a[i].depth, b[i].depth);
  }
}

std::vector<CascadePath> sorted_all(std::vector<CascadePath> v) {
  std::sort(v.begin(), v.end(), [](const CascadePath& a, const CascadePath& b) { return events_less(a.events, b.events); });
  return v;
}

} // namespace

TEST(LineFailure, BaseBranch) { EXPECT_EQ(line_failure_probability(example_line(), 50.0), 0.001); }

TEST(LineFailure, UpperBoundaryOfMiddleBranch) {
  EXPECT_DOUBLE_EQ(line_failure_probability(example_line(), 120.0), 1.0);
  EXPECT_DOUBLE_EQ(line_failure_probability(example_line(), -120.0), 1.0);
}

TEST(LineFailure, MiddleBranchHandValue) {
  EXPECT_NEAR(line_failure_probability(example_line(), 110.0), 0.91675, 1e-15);
  EXPECT_NEAR(line_failure_probability(example_line(), -110.0), 0.91675, 1e-15);
}

TEST(LineFailure, AboveRelayLimitIsCertain) { EXPECT_EQ(line_failure_probability(example_line(), 121.0), 1.0); }

TEST(LineFailure, JumpAtLongTermLimit) {
  const Line l = example_line();
  EXPECT_EQ(line_failure_probability(l, 100.0), 0.001);
  const double right = line_failure_probability(l, std::nextafter(100.0, 200.0));
  EXPECT_NEAR(right, 0.999 / 1.2 + 0.001, 1e-12);
}

TEST(Search, EpsilonOnePrunesEverything) {
  const CaseData c = toy::five_bus(0.01, 0.02);
  SearchConfig cfg;
  cfg.epsilon = 0.999999;
  CascadeSearch s(c, cfg);
  const auto paths = search_scenario(s, flat_scenario(c));
  ASSERT_EQ(paths.size(), 1u);
  EXPECT_EQ(paths[0].depth, 0);
  EXPECT_EQ(paths[0].terminal, TerminalReason::below_threshold);
  EXPECT_TRUE(paths[0].events.empty());
}

TEST(Search, ConfigValidation) {
  SearchConfig cfg;
  cfg.epsilon = 1.0;
  EXPECT_THROW(validate(cfg), std::invalid_argument);
  cfg = {};
  cfg.m = 0;
  EXPECT_THROW(validate(cfg), std::invalid_argument);
  cfg = {};
  cfg.workers = 0;
  EXPECT_THROW(validate(cfg), std::invalid_argument);
}

// Two buses, two parallel lines (only line 1 can fail), units 1 and 2 can fail.
TEST(Search, ProductThresholdPrunesThirdFailure) {
  CaseData c = toy::two_bus();
  c.lines = {{1, 1, 2, 0.1, 100.0, 1.2, 1e-3}, {2, 1, 2, 0.1, 100.0, 1.2, 0.0}};
  c.generators = {{1, 1, 60.0, 10.0, 1e-3, GeneratorKind::conventional},
                  {2, 1, 60.0, 12.0, 1e-3, GeneratorKind::conventional},
                  {3, 2, 100.0, 40.0, 0.0, GeneratorKind::conventional}};
  SearchConfig cfg;
  cfg.epsilon = 1e-7;
  cfg.keep_all_paths = true;
  CascadeSearch s(c, cfg);
  const auto paths = search_scenario(s, flat_scenario(c));
  int depth2 = 0;
  for (const auto& p : paths) {
    EXPECT_LE(p.depth, 2);
    if (p.depth == 2) {
      ++depth2;
      EXPECT_NEAR(p.probability, 1e-6, 1e-18);
    }
  }
  EXPECT_EQ(depth2, 6);  // ordered pairs of the three failable elements
  oracle::Enumerator ref{c, {60.0, 60.0, 100.0}, Eigen::Vector2d(0.0, 80.0), 1e-7};
  ref.run();
  expect_same_paths(sorted_all(paths), sorted_all(ref.leaves));
}

TEST(Search, FiveBusMatchesBruteForce) {
  const CaseData c = toy::five_bus(0.015, 0.02);
  SearchConfig cfg;
  cfg.epsilon = 1e-6;
  cfg.keep_all_paths = true;
  CascadeSearch s(c, cfg);
  const Scenario sc = flat_scenario(c);
  const auto paths = search_scenario(s, sc);
  oracle::Enumerator ref{c, {200.0, 100.0, 60.0}, Eigen::Map<const Eigen::VectorXd>(sc.load.data(), 5), 1e-6};
  ref.run();
  EXPECT_GT(paths.size(), 100u);
  expect_same_paths(sorted_all(paths), sorted_all(ref.leaves));

  cfg.keep_all_paths = false;
  CascadeSearch top(c, cfg);
  expect_same_paths(search_scenario(top, sc), ref.top(cfg.m));
}

TEST(Search, NoSheddingAnywhereGivesZeroShedPaths) {
  CaseData c = toy::five_bus(1e-4, 1e-4);
  for (auto& l : c.lines) l.flow_limit = 1000.0;
  for (auto& g : c.generators) g.p_max = 400.0;
  SearchConfig cfg;
  cfg.epsilon = 1e-9;
  cfg.m = 3;
  CascadeSearch s(c, cfg);
  const auto paths = search_scenario(s, flat_scenario(c, 0.5));
  ASSERT_EQ(paths.size(), 3u);
  for (const auto& p : paths) EXPECT_EQ(p.shed, 0.0);
  for (std::size_t i = 1; i < paths.size(); ++i) EXPECT_GE(paths[i - 1].probability, paths[i].probability);
}

TEST(Search, TopPathsAreSeverityOrderedPrefix) {
  const CaseData c = toy::five_bus(0.015, 0.02);
  SearchConfig cfg;
  cfg.epsilon = 1e-6;
  cfg.keep_all_paths = true;
  CascadeSearch all(c, cfg);
  auto every = search_scenario(all, flat_scenario(c));
  std::sort(every.begin(), every.end(), more_severe);
  cfg.keep_all_paths = false;
  cfg.m = 5;
  CascadeSearch top(c, cfg);
  expect_same_paths(search_scenario(top, flat_scenario(c)), {every.begin(), every.begin() + 5});
}

TEST(Search, IslandingShedCountsLoadOutsideReferenceIsland) {
  // Triangle plus a radial bus 4 hanging off bus 3 with 30 MW load.
  CaseData c = toy::triangle();
  c.buses.push_back({4, false, 30.0});
  c.buses[1].base_load = 20.0;
  c.lines.push_back({4, 3, 4, 0.1, 100.0, 1.2, 0.01});
  c.shed_cost.push_back(1000.0);
  c.peak_load = 50.0;
  SearchConfig cfg;
  cfg.epsilon = 1e-3;
  cfg.keep_all_paths = true;
  CascadeSearch s(c, cfg);
  const auto paths = search_scenario(s, flat_scenario(c));
  bool found = false;
  for (const auto& p : paths) {
    if (p.terminal != TerminalReason::islanded) continue;
    found = true;
    EXPECT_EQ(p.events.back().elements, std::vector<int>{4});
    EXPECT_NEAR(p.shed, 30.0, 1e-9);
  }
  EXPECT_TRUE(found);
}

TEST(Search, GeneratorLossMovesOutputToReference) {
  // Cheap unit at bus 2 feeds the bus 3 load; losing it pushes its output
  // onto the reference bus before re-dispatch.
  CaseData c = toy::triangle(60.0);
  c.buses[2].base_load = 90.0;
  c.generators = {{1, 1, 100.0, 30.0, 0.0, GeneratorKind::conventional},
                  {2, 2, 100.0, 10.0, 0.5, GeneratorKind::conventional}};
  c.lines[2].base_fail_prob = 0.0;
  SearchConfig cfg;
  cfg.epsilon = 0.1;
  cfg.keep_all_paths = true;
  CascadeSearch s(c, cfg);
  Scenario sc = flat_scenario(c);
  const auto paths = search_scenario(s, sc);
  oracle::Enumerator ref{c, {100.0, 100.0}, Eigen::Vector3d(0.0, 0.0, 90.0), 0.1};
  ref.run();
  expect_same_paths(sorted_all(paths), sorted_all(ref.leaves));
}

TEST(Search, ExpandStateListsEveryChild) {
  const CaseData c = toy::five_bus(0.015, 0.02);
  SearchConfig cfg;
  cfg.epsilon = 1e-12;
  CascadeSearch s(c, cfg);
  SystemState st{StatusVector(7, true), StatusVector(3, true)};
  const auto kids = s.expand_state(flat_scenario(c), st);
  EXPECT_EQ(kids.size(), 10u);
  for (const auto& k : kids) EXPECT_EQ(k.depth, 1);
}

TEST(Search, WindUnitsNeverFailRandomly) {
  const CaseData c = rts79_wind_case();
  SearchConfig cfg;
  cfg.epsilon = 1e-12;
  CascadeSearch s(c, cfg);
  const auto kids = s.expand_state(flat_scenario(c, 0.6), {StatusVector(38, true), StatusVector(32, true)});
  for (const auto& k : kids)
    if (k.events.front().kind == EventKind::random_gen_failure)
      EXPECT_FALSE(c.generators[c.generator_index(k.events.front().elements[0])].is_wind());
}

TEST(Study, EmptyScenarioListGivesEmptyReport) {
  const StudyReport r = run_study(rts79_case(), {}, SearchConfig{});
  EXPECT_TRUE(r.paths.empty());
  EXPECT_TRUE(r.hours.empty());
  EXPECT_TRUE(r.graph.nodes.empty());
}

TEST(Study, AccelerationTogglesAreTransparent) {
  const CaseData c = rts79_wind_case();
  const auto sc = generate_scenarios(c, rts79_wind_config(), rts79_hourly_load_profile(), 12, 5);
  std::vector<StudyReport> reps;
  for (int mode = 0; mode < 4; ++mode) {
    SearchConfig cfg;
    cfg.lsd_enabled = mode & 1;
    cfg.woodbury_enabled = mode & 2;
    reps.push_back(run_study(c, sc, cfg));
  }
  for (int mode = 1; mode < 4; ++mode) {
    ASSERT_EQ(reps[mode].paths.size(), reps[0].paths.size());
    for (std::size_t i = 0; i < reps[0].paths.size(); ++i) {
      EXPECT_EQ(reps[mode].paths[i].events.size(), reps[0].paths[i].events.size());
      EXPECT_EQ(reps[mode].paths[i].trigger_labels(), reps[0].paths[i].trigger_labels());
      EXPECT_EQ(reps[mode].paths[i].probability, reps[0].paths[i].probability);
      EXPECT_NEAR(reps[mode].paths[i].shed, reps[0].paths[i].shed, 1e-6);
    }
  }
}

TEST(Study, WorkerCountDoesNotChangeResults) {
  const CaseData c = rts79_case();
  const auto sc = generate_scenarios(c, WindModelConfig{}, rts79_hourly_load_profile(), 10, 2);
  SearchConfig one, four;
  four.workers = 4;
  const StudyReport a = run_study(c, sc, one), b = run_study(c, sc, four);
  ASSERT_EQ(a.paths.size(), b.paths.size());
  for (std::size_t i = 0; i < a.paths.size(); ++i) {
    EXPECT_EQ(a.paths[i].trigger_labels(), b.paths[i].trigger_labels());
    EXPECT_EQ(a.paths[i].shed, b.paths[i].shed);
  }
  EXPECT_EQ(a.states, b.states);
}

TEST(Study, EveryScenarioContributesMPaths) {
  const CaseData c = rts79_case();
  const auto sc = generate_scenarios(c, WindModelConfig{}, rts79_hourly_load_profile(), 6, 3);
  const StudyReport r = run_study(c, sc, SearchConfig{});
  EXPECT_EQ(r.paths.size(), 18u);
  EXPECT_TRUE(r.errors.empty());
  for (const auto& h : r.hours) EXPECT_EQ(h.paths, 3u);
}

TEST(PathGraph, DegreesMatchPathSequences) {
  const CaseData c = toy::five_bus(0.015, 0.02);
  SearchConfig cfg;
  cfg.epsilon = 1e-6;
  cfg.keep_all_paths = true;
  CascadeSearch s(c, cfg);
  const auto paths = search_scenario(s, flat_scenario(c));
  const PathGraph g = build_path_graph(paths);
  std::set<std::pair<std::string, std::string>> edges;
  std::size_t transitions = 0;
  for (const auto& p : paths) {
    std::string prev = "start";
    for (const auto& n : failure_sequence(p)) {
      edges.insert({prev, n});
      prev = n;
      ++transitions;
    }
  }
  EXPECT_EQ(g.edges.size(), edges.size());
  std::size_t counted = 0;
  for (const auto& e : g.edges) counted += e.count;
  EXPECT_EQ(counted, transitions);
  std::map<std::string, int> degree;
  for (const auto& [a, b] : edges) {
    degree[a]++;
    degree[b]++;
  }
  for (const auto& [n, d] : g.degrees()) EXPECT_EQ(degree[n], d) << n;
  EXPECT_EQ(g.nodes.front(), "start");
}

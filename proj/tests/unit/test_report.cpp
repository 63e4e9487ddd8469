#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "cascade/report.hpp"
#include "cascade/rts79.hpp"
#include "support/toy_cases.hpp"

using namespace cascade;

namespace {

StudyReport small_report() {
  StudyReport r;
  r.case_name = "five_bus";
  CascadePath p;
  p.scenario = 4;
  p.probability = 0.015;
  p.shed = 12.34567;
  p.terminal = TerminalReason::converged;
  p.depth = 1;
  p.events = {{EventKind::random_line_failure, {3}, 0.015, 0.0},
              {EventKind::relay_trip, {6}, 1.0, 0.0},
              {EventKind::redispatch, {}, 1.0, 12.34567}};
  r.paths = {p};
  r.hours = {{4, 270.0, 0.0, 12.34567, 1}};
  r.graph = build_path_graph(r.paths);
  r.timing = {0.5, 1.0, 2.0, 4.0};
  return r;
}

} // namespace

TEST(Format, RoundsAndAvoidsNegativeZero) {
  EXPECT_EQ(format_mw(1.23456), "1.235");
  EXPECT_EQ(format_mw(-0.0001), "0.000");
  EXPECT_EQ(format_probability(0.015), "1.500000e-02");
}

TEST(Report, SheddingSeries) {
  std::ostringstream out;
  write_shedding_series(small_report(), out);
  EXPECT_EQ(out.str(), "hour,total_load_mw,total_wind_mw,max_shed_mw,paths\n4,270.000,0.000,12.346,1\n");
}

TEST(Report, PathLineIsValidJson) {
  std::ostringstream out;
  write_paths(small_report(), out);
  const auto j = nlohmann::json::parse(out.str());
  EXPECT_EQ(j["scenario"], 4);
  EXPECT_EQ(j["rank"], 1);
  EXPECT_EQ(j["terminal"], "converged");
  EXPECT_DOUBLE_EQ(j["shed_mw"].get<double>(), 12.346);
  ASSERT_EQ(j["events"].size(), 3u);
  EXPECT_EQ(j["events"][0]["elements"][0], "L3");
  EXPECT_EQ(j["events"][1]["kind"], "relay-trip");
  EXPECT_DOUBLE_EQ(j["events"][2]["shed_mw"].get<double>(), 12.346);
}

TEST(Report, RanksRestartPerScenario) {
  StudyReport r = small_report();
  r.paths.push_back(r.paths[0]);
  r.paths.push_back(r.paths[0]);
  r.paths[2].scenario = 5;
  std::ostringstream out;
  write_paths(r, out);
  std::istringstream in(out.str());
  std::string line;
  std::vector<int> ranks;
  while (std::getline(in, line)) ranks.push_back(nlohmann::json::parse(line)["rank"]);
  EXPECT_EQ(ranks, (std::vector<int>{1, 2, 1}));
}

TEST(Report, GraphDotListsNodesAndEdges) {
  std::ostringstream out;
  write_path_graph(small_report().graph, out);
  const std::string s = out.str();
  EXPECT_NE(s.find("\"start\" -> \"L3\" [count=1"), std::string::npos);
  EXPECT_NE(s.find("\"L3\" -> \"L6\""), std::string::npos);
  EXPECT_NE(s.find("\"L6\" [degree=1"), std::string::npos);
  EXPECT_NE(s.find("fillcolor=\"#ff0000\""), std::string::npos);
}

TEST(Report, EmptyGraphIsEmptyDigraph) {
  std::ostringstream out;
  write_path_graph(PathGraph{}, out);
  EXPECT_EQ(out.str(), "digraph cascade_paths {\n  node [shape=circle, style=filled];\n}\n");
}

TEST(Report, LsdStatsDisabled) {
  std::ostringstream out;
  write_lsd_stats(small_report(), out);
  EXPECT_EQ(out.str(), "{\"enabled\":false}\n");
}

TEST(Compare, SelfComparisonHasUnitRatios) {
  const StudyReport r = small_report();
  const auto c = compare_timings({{"a", &r}, {"b", &r}});
  ASSERT_EQ(c.speedup.size(), 2u);
  for (const auto& s : c.speedup) {
    EXPECT_DOUBLE_EQ(s.sampling, 1.0);
    EXPECT_DOUBLE_EQ(s.dcpf, 1.0);
    EXPECT_DOUBLE_EQ(s.dcopf, 1.0);
    EXPECT_DOUBLE_EQ(s.total, 1.0);
  }
}

TEST(Compare, RatiosAreBaselineOverRow) {
  const StudyReport a = small_report();
  StudyReport b = small_report();
  b.timing = {0.25, 0.5, 0.5, 1.0};
  const auto c = compare_timings({{"a", &a}, {"b", &b}});
  EXPECT_DOUBLE_EQ(c.speedup[1].dcopf, 4.0);
  EXPECT_DOUBLE_EQ(c.speedup[1].total, 4.0);
  std::ostringstream out;
  write_timing_comparison(c, out, false);
  EXPECT_NE(out.str().find("4.00"), std::string::npos);
}

TEST(Compare, MismatchedWorkloadsThrow) {
  const StudyReport a = small_report();
  StudyReport b = small_report();
  b.config.epsilon = 1e-6;
  EXPECT_THROW(compare_timings({{"a", &a}, {"b", &b}}), WorkloadMismatch);
  StudyReport c = small_report();
  c.hours[0].total_load += 1.0;
  EXPECT_THROW(compare_timings({{"a", &a}, {"c", &c}}), WorkloadMismatch);
  EXPECT_THROW(compare_timings({{"a", &a}}), std::invalid_argument);
}

TEST(Report, WritesFiveFiles) {
  const std::string dir = ::testing::TempDir() + "/report_files";
  std::filesystem::create_directories(dir);
  write_report(small_report(), dir);
  for (const char* f : {"shedding.csv", "paths.jsonl", "path_graph.dot", "timing.txt", "lsd_stats.json"})
    EXPECT_TRUE(std::filesystem::exists(dir + "/" + f)) << f;
  EXPECT_THROW(write_report(small_report(), dir + "/missing/dir"), std::runtime_error);
}

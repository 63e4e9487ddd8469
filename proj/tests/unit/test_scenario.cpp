#include <gtest/gtest.h>

#include <sstream>

#include "cascade/rts79.hpp"
#include "cascade/scenario.hpp"
#include "support/toy_cases.hpp"

using namespace cascade;

namespace {

CaseData with_farms(int farms, double capacity) {
  CaseData c = toy::triangle();
  for (int f = 0; f < farms; ++f) c.generators.push_back({10 + f, 2 + f % 2, capacity, 0.0, 0.0, GeneratorKind::wind});
  c.buses[2].base_load = 50.0;
  c.peak_load = 50.0;
  return c;
}

std::vector<double> flat_profile() { return std::vector<double>(24, 1.0); }

} // namespace

TEST(Scenario, PowerCurveShape) {
  const PowerCurve pc;
  EXPECT_EQ(pc.output_fraction(2.9), 0.0);
  EXPECT_EQ(pc.output_fraction(12.0), 1.0);
  EXPECT_EQ(pc.output_fraction(20.0), 1.0);
  EXPECT_EQ(pc.output_fraction(25.5), 0.0);
  const double mid = pc.output_fraction(7.5);
  EXPECT_GT(mid, 0.0);
  EXPECT_LT(mid, 1.0);
}

TEST(Scenario, ZeroCapacityFarmsProduceNothing) {
  const CaseData c = with_farms(2, 0.0);
  for (std::uint64_t seed : {1u, 99u, 12345u}) {
    const auto s = generate_scenarios(c, WindModelConfig::uniform(Eigen::MatrixXd::Identity(2, 2)), flat_profile(), 48, seed);
    for (const auto& sc : s)
      for (double w : sc.wind_output) EXPECT_EQ(w, 0.0);
  }
}

TEST(Scenario, NoFarmsNeedsNoWindConfig) {
  const auto s = generate_scenarios(rts79_case(), WindModelConfig{}, rts79_hourly_load_profile(), 24, 3);
  ASSERT_EQ(s.size(), 24u);
  EXPECT_TRUE(s[0].wind_output.empty());
}

TEST(Scenario, PerfectCorrelationGivesIdenticalSeries) {
  const CaseData c = with_farms(2, 100.0);
  const auto s = generate_scenarios(c, WindModelConfig::uniform(Eigen::MatrixXd::Ones(2, 2)), flat_profile(), 500, 11);
  for (const auto& sc : s) EXPECT_DOUBLE_EQ(sc.wind_output[0], sc.wind_output[1]);
  const Eigen::MatrixXd r = empirical_correlation(s);
  EXPECT_NEAR(r(0, 1), 1.0, 0.02);
}

TEST(Scenario, IndependentFarmsAreUncorrelated) {
  const CaseData c = with_farms(3, 100.0);
  const auto s = generate_scenarios(c, WindModelConfig::uniform(Eigen::MatrixXd::Identity(3, 3)), flat_profile(), 8760, 5);
  const Eigen::MatrixXd r = empirical_correlation(s);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < i; ++j) EXPECT_NEAR(r(i, j), 0.0, 0.05);
}

TEST(Scenario, Rts79RegionalCorrelation) {
  const CaseData c = rts79_wind_case();
  const WindModelConfig cfg = rts79_wind_config();
  const auto s = generate_scenarios(c, cfg, rts79_hourly_load_profile(), 8760, 2024);
  ASSERT_EQ(s.size(), 8760u);
  const Eigen::MatrixXd r = empirical_correlation(s);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < i; ++j) EXPECT_NEAR(r(i, j), cfg.correlation(i, j), 0.05) << i << "," << j;
}

TEST(Scenario, BoundsAndLoadShape) {
  const CaseData c = rts79_wind_case();
  const auto profile = rts79_hourly_load_profile();
  EXPECT_EQ(profile.size(), 8736u);
  EXPECT_DOUBLE_EQ(*std::max_element(profile.begin(), profile.end()), 1.0);
  const auto s = generate_scenarios(c, rts79_wind_config(), profile, 8760, 1);
  const auto farms = c.wind_generators();
  for (const auto& sc : s) {
    for (std::size_t f = 0; f < farms.size(); ++f) {
      EXPECT_GE(sc.wind_output[f], 0.0);
      EXPECT_LE(sc.wind_output[f], c.generators[farms[f]].p_max);
    }
    const double mult = profile[sc.index % profile.size()];
    for (int b = 0; b < c.num_buses(); ++b) EXPECT_NEAR(sc.load[b], c.buses[b].base_load * mult, 1e-9);
  }
  double peak = 0.0;
  for (const auto& sc : s) peak = std::max(peak, sc.total_load());
  EXPECT_NEAR(peak, 2850.0, 1e-6);
}

TEST(Scenario, DeterministicGivenSeed) {
  const CaseData c = rts79_wind_case();
  const auto a = generate_scenarios(c, rts79_wind_config(), rts79_hourly_load_profile(), 100, 42);
  const auto b = generate_scenarios(c, rts79_wind_config(), rts79_hourly_load_profile(), 100, 42);
  const auto d = generate_scenarios(c, rts79_wind_config(), rts79_hourly_load_profile(), 100, 43);
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].wind_output, b[i].wind_output);
    EXPECT_EQ(a[i].rng_seed, 42u);
    differs |= a[i].wind_output != d[i].wind_output;
  }
  EXPECT_TRUE(differs);
}

// With flat profiles the speed marginal is Weibull(2, 8.5), so the share of
// hours below cut-in is 1 - exp(-(3/8.5)^2) and at rated output
// exp(-(12/8.5)^2) - exp(-(25/8.5)^2).
TEST(Scenario, WindMarginalMatchesWeibull) {
  const CaseData c = with_farms(1, 100.0);
  WindModelConfig cfg = WindModelConfig::uniform(Eigen::MatrixXd::Identity(1, 1), 2.0, 8.5);
  const auto s = generate_scenarios(c, cfg, flat_profile(), 20000, 9);
  double zero = 0, full = 0;
  for (const auto& sc : s) {
    zero += sc.wind_output[0] == 0.0;
    full += sc.wind_output[0] == 100.0;
  }
  const double p_zero = 1.0 - std::exp(-std::pow(3.0 / 8.5, 2)) + std::exp(-std::pow(25.0 / 8.5, 2));
  const double p_full = std::exp(-std::pow(12.0 / 8.5, 2)) - std::exp(-std::pow(25.0 / 8.5, 2));
  EXPECT_NEAR(zero / s.size(), p_zero, 0.02);
  EXPECT_NEAR(full / s.size(), p_full, 0.02);
}

TEST(Scenario, LatentProcessIsStandardAndPersistent) {
  const CaseData c = with_farms(1, 100.0);
  WindModelConfig cfg = WindModelConfig::uniform(Eigen::MatrixXd::Identity(1, 1));
  cfg.ar_coefficient = 0.7;
  const auto s = generate_scenarios(c, cfg, flat_profile(), 20000, 21);
  double m = 0, v = 0, lag = 0;
  for (const auto& sc : s) m += sc.latent[0];
  m /= s.size();
  for (std::size_t i = 0; i < s.size(); ++i) {
    v += (s[i].latent[0] - m) * (s[i].latent[0] - m);
    if (i) lag += (s[i].latent[0] - m) * (s[i - 1].latent[0] - m);
  }
  EXPECT_NEAR(m, 0.0, 0.1);
  EXPECT_NEAR(v / s.size(), 1.0, 0.1);
  EXPECT_NEAR(lag / v, 0.7, 0.03);
}

TEST(Scenario, ConfigErrors) {
  const CaseData c = with_farms(2, 100.0);
  Eigen::MatrixXd bad(2, 2);
  bad << 1.0, 1.5, 1.5, 1.0;  // not PSD
  EXPECT_THROW(generate_scenarios(c, WindModelConfig::uniform(bad), flat_profile(), 10, 1), ScenarioError);
  WindModelConfig cfg = WindModelConfig::uniform(Eigen::MatrixXd::Identity(2, 2));
  cfg.power_curve.rated = 2.0;  // below cut-in
  EXPECT_THROW(generate_scenarios(c, cfg, flat_profile(), 10, 1), ScenarioError);
  cfg = WindModelConfig::uniform(Eigen::MatrixXd::Identity(3, 3));  // farm count mismatch
  EXPECT_THROW(generate_scenarios(c, cfg, flat_profile(), 10, 1), ScenarioError);
  cfg = WindModelConfig::uniform(Eigen::MatrixXd::Identity(2, 2));
  cfg.ar_coefficient = 1.0;
  EXPECT_THROW(generate_scenarios(c, cfg, flat_profile(), 10, 1), ScenarioError);
  EXPECT_THROW(generate_scenarios(c, WindModelConfig::uniform(Eigen::MatrixXd::Identity(2, 2)), flat_profile(), 0, 1),
               ScenarioError);
}

TEST(Scenario, CsvReplayIsExact) {
  const CaseData c = rts79_wind_case();
  const auto s = generate_scenarios(c, rts79_wind_config(), rts79_hourly_load_profile(), 50, 8);
  std::stringstream buf;
  write_scenarios(c, s, buf);
  const auto back = read_scenarios(c, buf);
  ASSERT_EQ(back.size(), s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    EXPECT_EQ(back[i].index, s[i].index);
    EXPECT_EQ(back[i].wind_output, s[i].wind_output);
    EXPECT_EQ(back[i].load, s[i].load);
    EXPECT_EQ(back[i].latent, s[i].latent);
  }
  std::stringstream wrong("hour,seed,a\n1,2,3\n");
  EXPECT_THROW(read_scenarios(c, wrong), ScenarioError);
}

TEST(Scenario, WindConfigJsonRoundTrip) {
  const WindModelConfig cfg = rts79_wind_config();
  const WindModelConfig back = wind_config_from_json(wind_config_to_json(cfg));
  EXPECT_TRUE(back.correlation == cfg.correlation);
  EXPECT_EQ(back.weibull_shape, cfg.weibull_shape);
  EXPECT_EQ(back.diurnal_profile, cfg.diurnal_profile);
  EXPECT_EQ(back.seasonal_profile, cfg.seasonal_profile);
  EXPECT_THROW(wind_config_from_json(nlohmann::json::object()), ScenarioError);
}

#pragma once

// IEEE Reliability Test System 1979: 24 buses, 38 branches, 32 units,
// 2850 MW annual peak, 3405 MW installed capacity.
//
// Per-step failure probabilities are derived from the published reliability
// data (unit MTTF, branch outage rate per year) as p = 1 - exp(-rate * step),
// with the step length configurable.

#include <array>
#include <cmath>
#include <vector>

#include "case_model.hpp"
#include "scenario.hpp"

namespace cascade {

struct Rts79Options {
  double step_hours = 1.0 / 60.0;  // duration represented by one Markov step
  double relay_threshold = 1.2;
  double shed_cost_multiplier = 100.0;
};

namespace rts79_data {

struct BranchRow {
  int from, to;
  double x, rating, outages_per_year;
};

// Branch order follows the standard RTS-79 numbering (L1..L38).
inline constexpr std::array<BranchRow, 38> branches = {{
    {1, 2, 0.0139, 175, 0.24},  {1, 3, 0.2112, 175, 0.51},  {1, 5, 0.0845, 175, 0.33},  {2, 4, 0.1267, 175, 0.39},
    {2, 6, 0.1920, 175, 0.48},  {3, 9, 0.1190, 175, 0.38},  {3, 24, 0.0839, 400, 0.02}, {4, 9, 0.1037, 175, 0.36},
    {5, 10, 0.0883, 175, 0.34}, {6, 10, 0.0605, 175, 0.33}, {7, 8, 0.0614, 175, 0.30},  {8, 9, 0.1651, 175, 0.44},
    {8, 10, 0.1651, 175, 0.44}, {9, 11, 0.0839, 400, 0.02}, {9, 12, 0.0839, 400, 0.02}, {10, 11, 0.0839, 400, 0.02},
    {10, 12, 0.0839, 400, 0.02}, {11, 13, 0.0476, 500, 0.40}, {11, 14, 0.0418, 500, 0.39}, {12, 13, 0.0476, 500, 0.40},
    {12, 23, 0.0966, 500, 0.52}, {13, 23, 0.0865, 500, 0.49}, {14, 16, 0.0389, 500, 0.38}, {15, 16, 0.0173, 500, 0.33},
    {15, 21, 0.0490, 500, 0.41}, {15, 21, 0.0490, 500, 0.41}, {15, 24, 0.0519, 500, 0.41}, {16, 17, 0.0259, 500, 0.35},
    {16, 19, 0.0231, 500, 0.34}, {17, 18, 0.0144, 500, 0.32}, {17, 22, 0.1053, 500, 0.54}, {18, 21, 0.0259, 500, 0.35},
    {18, 21, 0.0259, 500, 0.35}, {19, 20, 0.0396, 500, 0.38}, {19, 20, 0.0396, 500, 0.38}, {20, 23, 0.0216, 500, 0.34},
    {20, 23, 0.0216, 500, 0.34}, {21, 22, 0.0678, 500, 0.45},
}};

inline constexpr std::array<double, 24> bus_load = {108, 97,  180, 74,  71, 136, 125, 171, 175, 195, 0, 0,
                                                    265, 194, 317, 100, 0,  333, 181, 128, 0,   0,   0, 0};

inline constexpr int reference_bus = 13;

struct UnitRow {
  int bus;
  double p_max, mttf_hours, cost;
};

// Unit order: bus 1 (U20 U20 U76 U76), bus 2 (same), bus 7 (3 x U100),
// bus 13 (3 x U197), bus 15 (5 x U12, U155), bus 16 (U155), bus 18 (U400),
// bus 21 (U400), bus 22 (6 x U50), bus 23 (U155 U155 U350).
inline constexpr std::array<UnitRow, 32> units = {{
    {1, 20, 450, 130},    {1, 20, 450, 130},    {1, 76, 1960, 16},    {1, 76, 1960, 16},    {2, 20, 450, 130},
    {2, 20, 450, 130},    {2, 76, 1960, 16},    {2, 76, 1960, 16},    {7, 100, 1200, 43},   {7, 100, 1200, 43},
    {7, 100, 1200, 43},   {13, 197, 950, 48},   {13, 197, 950, 48},   {13, 197, 950, 48},   {15, 12, 2940, 56},
    {15, 12, 2940, 56},   {15, 12, 2940, 56},   {15, 12, 2940, 56},   {15, 12, 2940, 56},   {15, 155, 960, 12},
    {16, 155, 960, 12},   {18, 400, 1100, 5},   {21, 400, 1100, 5},   {22, 50, 1980, 1},    {22, 50, 1980, 1},
    {22, 50, 1980, 1},    {22, 50, 1980, 1},    {22, 50, 1980, 1},    {22, 50, 1980, 1},    {23, 155, 960, 12},
    {23, 155, 960, 12},   {23, 350, 1150, 11},
}};

// Weekly peak in percent of annual peak, weeks 1..52.
inline constexpr std::array<double, 52> weekly_peak = {
    86.2, 90.0, 87.8, 83.4, 88.0, 84.1, 83.2, 80.6, 74.0, 73.7, 71.5, 72.7, 70.4, 75.0, 72.1, 80.0, 75.4, 83.7,
    87.0, 88.0, 85.6, 81.1, 90.0, 88.7, 89.6, 86.1, 75.5, 81.6, 80.1, 88.0, 72.2, 77.6, 80.0, 72.9, 72.6, 70.5,
    78.0, 69.5, 72.4, 72.4, 74.3, 74.4, 80.0, 88.1, 88.5, 90.9, 94.0, 89.0, 94.2, 97.0, 100.0, 95.2};

// Daily peak in percent of weekly peak, Monday..Sunday.
inline constexpr std::array<double, 7> daily_peak = {93, 100, 98, 96, 94, 77, 75};

// Hourly load in percent of daily peak, midnight-1am first.
inline constexpr std::array<double, 24> winter_weekday = {67, 63, 60, 59, 59, 60, 74, 86, 95, 96, 96, 95,
                                                          95, 95, 93, 94, 99, 100, 100, 96, 91, 83, 73, 63};
inline constexpr std::array<double, 24> winter_weekend = {78, 72, 68, 66, 64, 65, 66, 70, 80, 88, 90, 91,
                                                          90, 88, 87, 87, 91, 100, 99, 97, 94, 92, 87, 81};
inline constexpr std::array<double, 24> summer_weekday = {64, 60, 58, 56, 56, 58, 64, 76, 87, 95, 99, 100,
                                                          99, 100, 100, 97, 96, 96, 93, 92, 92, 93, 87, 72};
inline constexpr std::array<double, 24> summer_weekend = {74, 70, 66, 65, 64, 62, 62, 66, 81, 86, 91, 93,
                                                          93, 92, 91, 91, 92, 94, 95, 95, 100, 93, 88, 80};
inline constexpr std::array<double, 24> shoulder_weekday = {63, 62, 60, 58, 59, 65, 72, 85, 95, 99, 100, 99,
                                                            93, 92, 90, 88, 90, 92, 96, 98, 96, 90, 80, 70};
inline constexpr std::array<double, 24> shoulder_weekend = {75, 73, 69, 66, 65, 65, 68, 74, 83, 89, 92, 94,
                                                            91, 90, 90, 86, 85, 88, 92, 100, 97, 95, 90, 85};

} // namespace rts79_data

inline double rate_to_step_probability(double rate_per_hour, double step_hours) {
  return -std::expm1(-rate_per_hour * step_hours);
}

inline CaseData rts79_case(const Rts79Options& opt = {}) {
  using namespace rts79_data;
  CaseData grid;
  grid.name = "rts79";
  grid.base_mva = 100.0;
  for (int i = 0; i < 24; ++i) grid.buses.push_back({i + 1, i + 1 == reference_bus, bus_load[i]});
  for (int k = 0; k < 38; ++k) {
    const auto& r = branches[k];
    grid.lines.push_back({k + 1, r.from, r.to, r.x, r.rating, opt.relay_threshold,
                          rate_to_step_probability(r.outages_per_year / 8760.0, opt.step_hours)});
  }
  for (int g = 0; g < 32; ++g) {
    const auto& u = units[g];
    grid.generators.push_back({g + 1, u.bus, u.p_max, u.cost,
                               rate_to_step_probability(1.0 / u.mttf_hours, opt.step_hours), GeneratorKind::conventional});
  }
  grid.peak_load = 2850.0;
  grid.shed_cost.assign(24, opt.shed_cost_multiplier * grid.max_generation_cost());
  validate(grid);
  return grid;
}

struct WindVariantOptions {
  // Thermal units taken out: the two U76 at bus 1, the two U76 at bus 2 and
  // one U155 at bus 23 (152, 152 and 155 MW).
  std::vector<int> removed_units = {3, 4, 7, 8, 31};
  std::vector<int> farm_buses = {1, 2, 18, 21, 23};
  double farm_capacity = 340.0;
  double farm_cost = 0.0;
};

// Removes the listed units and appends one wind farm per listed bus. Farm ids
// continue after the largest existing unit id.
inline CaseData with_wind_farms(const CaseData& base, const WindVariantOptions& opt) {
  CaseData grid = base;
  for (int id : opt.removed_units) {
    const int g = grid.generator_index(id);
    grid.generators.erase(grid.generators.begin() + g);
  }
  int next_id = 0;
  for (const auto& g : base.generators) next_id = std::max(next_id, g.id);
  for (int bus : opt.farm_buses)
    grid.generators.push_back({++next_id, bus, opt.farm_capacity, opt.farm_cost, 0.0, GeneratorKind::wind});
  const double shed = base.shed_cost.empty() ? 0.0 : base.shed_cost.front();
  grid.shed_cost.assign(grid.buses.size(), shed);
  validate(grid);
  return grid;
}

inline CaseData rts79_wind_case(const Rts79Options& opt = {}, const WindVariantOptions& wind = {}) {
  CaseData grid = with_wind_farms(rts79_case(opt), wind);
  grid.name = "rts79_wind";
  return grid;
}

// 8736-hour load shape (52 weeks starting on a Monday), fraction of annual peak.
inline std::vector<double> rts79_hourly_load_profile() {
  using namespace rts79_data;
  std::vector<double> profile;
  profile.reserve(52 * 7 * 24);
  for (int w = 0; w < 52; ++w) {
    const bool winter = w < 8 || w >= 43;
    const bool summer = w >= 17 && w < 30;
    for (int d = 0; d < 7; ++d) {
      const bool weekend = d >= 5;
      const auto& hourly = winter ? (weekend ? winter_weekend : winter_weekday)
                           : summer ? (weekend ? summer_weekend : summer_weekday)
                                    : (weekend ? shoulder_weekend : shoulder_weekday);
      for (int h = 0; h < 24; ++h) profile.push_back(weekly_peak[w] / 100.0 * daily_peak[d] / 100.0 * hourly[h] / 100.0);
    }
  }
  return profile;
}

// Wind model for the five farms of the wind variant: farms 1-3 share one
// region, farms 4-5 another; 0.6 correlation within a region, 0.2 across.
inline WindModelConfig rts79_wind_config() {
  Eigen::MatrixXd r(5, 5);
  const int region[5] = {0, 0, 0, 1, 1};
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) r(i, j) = i == j ? 1.0 : (region[i] == region[j] ? 0.6 : 0.2);
  WindModelConfig cfg = WindModelConfig::uniform(r, 2.0, 8.5);
  cfg.ar_coefficient = 0.7;
  cfg.diurnal_profile = {1.08, 1.09, 1.10, 1.10, 1.09, 1.07, 1.03, 0.98, 0.93, 0.90, 0.89, 0.90,
                         0.92, 0.94, 0.96, 0.98, 1.00, 1.01, 1.02, 1.03, 1.04, 1.05, 1.06, 1.07};
  cfg.seasonal_profile = {1.10, 1.08, 1.10, 1.05, 0.97, 0.90, 0.86, 0.85, 0.92, 1.00, 1.06, 1.10};
  return cfg;
}

} // namespace cascade

#pragma once

// Hourly wind and load scenarios.
//
// Wind: each farm carries a latent standard-normal AR(1) state. Innovations
// are correlated across farms through a Cholesky factor of the configured
// correlation matrix, so the latent vector is stationary with exactly that
// cross-correlation. The latent value is mapped to a Weibull wind speed by
// the probability-integral transform, scaled by diurnal and seasonal
// multipliers, and passed through a piecewise turbine power curve.
//
// Load: bus base load * (peak_load / total base load) * hourly profile.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "case_model.hpp"

namespace cascade {

class ScenarioError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct PowerCurve {
  double cut_in = 3.0;   // m/s
  double rated = 12.0;   // m/s
  double cut_out = 25.0; // m/s

  // Fraction of installed capacity produced at wind speed v.
  double output_fraction(double v) const {
    if (v < cut_in || v >= cut_out) return 0.0;
    if (v >= rated) return 1.0;
    const double ci3 = cut_in * cut_in * cut_in;
    return (v * v * v - ci3) / (rated * rated * rated - ci3);
  }
};

struct WindModelConfig {
  Eigen::MatrixXd correlation;        // farms x farms, unit diagonal, PSD
  std::vector<double> weibull_shape;  // per farm
  std::vector<double> weibull_scale;  // per farm, m/s
  double ar_coefficient = 0.7;        // hour-to-hour persistence of the latent state
  std::array<double, 24> diurnal_profile = filled<24>(1.0);
  std::array<double, 12> seasonal_profile = filled<12>(1.0);
  PowerCurve power_curve;

  int farms() const { return static_cast<int>(correlation.rows()); }

  // Same marginals for every farm, correlation supplied by the caller.
  static WindModelConfig uniform(const Eigen::MatrixXd& correlation, double shape = 2.0, double scale = 8.5) {
    WindModelConfig cfg;
    cfg.correlation = correlation;
    cfg.weibull_shape.assign(correlation.rows(), shape);
    cfg.weibull_scale.assign(correlation.rows(), scale);
    return cfg;
  }

  template <std::size_t N>
  static std::array<double, N> filled(double v) {
    std::array<double, N> a{};
    a.fill(v);
    return a;
  }
};

struct Scenario {
  int index = 0;                    // hour number
  std::vector<double> wind_output;  // MW per wind generator, case order
  std::vector<double> load;         // MW per bus
  std::vector<double> latent;       // latent Gaussian state per wind farm
  std::uint64_t rng_seed = 0;

  double total_load() const {
    double s = 0.0;
    for (double d : load) s += d;
    return s;
  }
  double total_wind() const {
    double s = 0.0;
    for (double w : wind_output) s += w;
    return s;
  }
};

// Lower-triangular L with L L^T = R for a positive-semidefinite R. Rank
// deficient columns are set to zero, so perfectly correlated farms get
// identical rows. Throws when R is not PSD.
inline Eigen::MatrixXd psd_cholesky(const Eigen::MatrixXd& r, double tol = 1e-10) {
  const Eigen::Index n = r.rows();
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double d = r(j, j);
    for (Eigen::Index k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (d < -tol) throw ScenarioError("correlation matrix is not positive semidefinite");
    if (d <= tol) {
      for (Eigen::Index i = j + 1; i < n; ++i) {
        double s = r(i, j);
        for (Eigen::Index k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
        if (std::abs(s) > 1e-8) throw ScenarioError("correlation matrix is not positive semidefinite");
      }
      continue;
    }
    l(j, j) = std::sqrt(d);
    for (Eigen::Index i = j + 1; i < n; ++i) {
      double s = r(i, j);
      for (Eigen::Index k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / l(j, j);
    }
  }
  return l;
}

inline void validate(const WindModelConfig& cfg) {
  const auto n = cfg.correlation.rows();
  if (cfg.correlation.cols() != n) throw ScenarioError("correlation matrix must be square");
  if (static_cast<Eigen::Index>(cfg.weibull_shape.size()) != n || static_cast<Eigen::Index>(cfg.weibull_scale.size()) != n)
    throw ScenarioError("Weibull parameters must have one entry per farm");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::abs(cfg.correlation(i, i) - 1.0) > 1e-12) throw ScenarioError("correlation matrix must have unit diagonal");
    for (Eigen::Index j = 0; j < i; ++j)
      if (std::abs(cfg.correlation(i, j) - cfg.correlation(j, i)) > 1e-12)
        throw ScenarioError("correlation matrix must be symmetric");
    if (!(cfg.weibull_shape[i] > 0.0) || !(cfg.weibull_scale[i] > 0.0))
      throw ScenarioError("Weibull shape and scale must be positive");
  }
  if (!(cfg.ar_coefficient >= 0.0 && cfg.ar_coefficient < 1.0)) throw ScenarioError("AR coefficient must lie in [0,1)");
  const auto& pc = cfg.power_curve;
  if (!(pc.cut_in >= 0.0 && pc.cut_in < pc.rated && pc.rated < pc.cut_out))
    throw ScenarioError("power curve requires 0 <= cut-in < rated < cut-out");
  psd_cholesky(cfg.correlation);
}

// {"correlation": [[1, 0.6], [0.6, 1]], "weibull_shape": 2 or [...],
//  "weibull_scale": 8.5 or [...], "ar_coefficient": 0.7,
//  "diurnal_profile": [24 values], "seasonal_profile": [12 values],
//  "power_curve": {"cut_in": 3, "rated": 12, "cut_out": 25}}
inline WindModelConfig wind_config_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("correlation")) throw ScenarioError("wind config needs a correlation matrix");
  try {
    const auto rows = j.at("correlation").get<std::vector<std::vector<double>>>();
    const auto n = static_cast<Eigen::Index>(rows.size());
    Eigen::MatrixXd r(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (static_cast<Eigen::Index>(rows[i].size()) != n) throw ScenarioError("correlation matrix must be square");
      for (Eigen::Index k = 0; k < n; ++k) r(i, k) = rows[i][k];
    }
    WindModelConfig cfg = WindModelConfig::uniform(r);
    auto per_farm = [&](const char* key, std::vector<double>& v) {
      if (!j.contains(key)) return;
      if (j.at(key).is_number()) v.assign(n, j.at(key).get<double>());
      else v = j.at(key).get<std::vector<double>>();
    };
    per_farm("weibull_shape", cfg.weibull_shape);
    per_farm("weibull_scale", cfg.weibull_scale);
    cfg.ar_coefficient = j.value("ar_coefficient", cfg.ar_coefficient);
    if (j.contains("diurnal_profile")) {
      const auto v = j.at("diurnal_profile").get<std::vector<double>>();
      if (v.size() != 24) throw ScenarioError("diurnal profile needs 24 values");
      std::copy(v.begin(), v.end(), cfg.diurnal_profile.begin());
    }
    if (j.contains("seasonal_profile")) {
      const auto v = j.at("seasonal_profile").get<std::vector<double>>();
      if (v.size() != 12) throw ScenarioError("seasonal profile needs 12 values");
      std::copy(v.begin(), v.end(), cfg.seasonal_profile.begin());
    }
    if (j.contains("power_curve")) {
      const auto& pc = j.at("power_curve");
      cfg.power_curve.cut_in = pc.value("cut_in", cfg.power_curve.cut_in);
      cfg.power_curve.rated = pc.value("rated", cfg.power_curve.rated);
      cfg.power_curve.cut_out = pc.value("cut_out", cfg.power_curve.cut_out);
    }
    validate(cfg);
    return cfg;
  } catch (const nlohmann::json::exception& e) {
    throw ScenarioError(std::string("wind config: ") + e.what());
  }
}

inline nlohmann::json wind_config_to_json(const WindModelConfig& cfg) {
  nlohmann::json j;
  std::vector<std::vector<double>> rows(cfg.farms(), std::vector<double>(cfg.farms()));
  for (int i = 0; i < cfg.farms(); ++i)
    for (int k = 0; k < cfg.farms(); ++k) rows[i][k] = cfg.correlation(i, k);
  j["correlation"] = rows;
  j["weibull_shape"] = cfg.weibull_shape;
  j["weibull_scale"] = cfg.weibull_scale;
  j["ar_coefficient"] = cfg.ar_coefficient;
  j["diurnal_profile"] = cfg.diurnal_profile;
  j["seasonal_profile"] = cfg.seasonal_profile;
  j["power_curve"] = {{"cut_in", cfg.power_curve.cut_in}, {"rated", cfg.power_curve.rated}, {"cut_out", cfg.power_curve.cut_out}};
  return j;
}

inline double standard_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

inline double weibull_quantile(double u, double shape, double scale) {
  u = std::clamp(u, 0.0, 1.0 - 1e-16);
  return scale * std::pow(-std::log1p(-u), 1.0 / shape);
}

inline int month_of_hour(int hour) {
  static constexpr std::array<int, 12> days = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  int day = (hour / 24) % 365;
  for (int m = 0; m < 12; ++m) {
    if (day < days[m]) return m;
    day -= days[m];
  }
  return 11;
}

inline std::vector<Scenario> generate_scenarios(const CaseData& grid, const WindModelConfig& cfg,
                                                const std::vector<double>& load_profile, int count,
                                                std::uint64_t seed) {
  if (count < 1) throw ScenarioError("scenario count must be at least 1");
  if (load_profile.empty()) throw ScenarioError("load profile is empty");
  const std::vector<int> farms = grid.wind_generators();
  const int nf = static_cast<int>(farms.size());
  if (nf > 0) {
    validate(cfg);
    if (cfg.farms() != nf)
      throw ScenarioError("wind config describes " + std::to_string(cfg.farms()) + " farms but the case has " +
                          std::to_string(nf));
  }

  const Eigen::MatrixXd chol = nf > 0 ? psd_cholesky(cfg.correlation) : Eigen::MatrixXd();
  const double a = cfg.ar_coefficient;
  const double innovation_scale = std::sqrt(1.0 - a * a);
  const double scale = grid.load_scale();

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd z = Eigen::VectorXd::Zero(nf);
  Eigen::VectorXd xi(nf);

  std::vector<Scenario> out;
  out.reserve(count);
  for (int h = 0; h < count; ++h) {
    Scenario s;
    s.index = h;
    s.rng_seed = seed;
    if (nf > 0) {
      for (int f = 0; f < nf; ++f) xi(f) = normal(rng);
      const Eigen::VectorXd eta = chol * xi;
      z = h == 0 ? eta : Eigen::VectorXd(a * z + innovation_scale * eta);
      const double shape_mult = cfg.diurnal_profile[h % 24] * cfg.seasonal_profile[month_of_hour(h)];
      s.wind_output.resize(nf);
      s.latent.resize(nf);
      for (int f = 0; f < nf; ++f) {
        const double speed = weibull_quantile(standard_normal_cdf(z(f)), cfg.weibull_shape[f], cfg.weibull_scale[f]) * shape_mult;
        s.wind_output[f] = grid.generators[farms[f]].p_max * cfg.power_curve.output_fraction(speed);
        s.latent[f] = z(f);
      }
    }
    const double mult = load_profile[h % load_profile.size()];
    s.load.resize(grid.num_buses());
    for (int b = 0; b < grid.num_buses(); ++b) s.load[b] = grid.buses[b].base_load * scale * mult;
    out.push_back(std::move(s));
  }
  return out;
}

// Pearson correlation of the latent wind states across scenarios.
inline Eigen::MatrixXd empirical_correlation(const std::vector<Scenario>& scenarios) {
  if (scenarios.size() < 2) throw ScenarioError("need at least two scenarios");
  const Eigen::Index nf = static_cast<Eigen::Index>(scenarios.front().latent.size());
  if (nf < 2) throw ScenarioError("need at least two wind farms");
  const Eigen::Index n = static_cast<Eigen::Index>(scenarios.size());
  Eigen::MatrixXd x(n, nf);
  for (Eigen::Index t = 0; t < n; ++t)
    for (Eigen::Index f = 0; f < nf; ++f) x(t, f) = scenarios[t].latent[f];
  const Eigen::RowVectorXd mean = x.colwise().mean();
  x.rowwise() -= mean;
  const Eigen::MatrixXd cov = x.transpose() * x;
  Eigen::VectorXd sd = cov.diagonal().cwiseSqrt();
  for (Eigen::Index f = 0; f < nf; ++f)
    if (!(sd(f) > 0.0)) throw ScenarioError("latent series of farm " + std::to_string(f) + " is constant");
  return sd.cwiseInverse().asDiagonal() * cov * sd.cwiseInverse().asDiagonal();
}

// Columnar text: one header line, then one row per hour with
//   hour, seed, wind MW per farm (w_<gen id>), load MW per bus (d_<bus id>),
//   latent state per farm (z_<gen id>).
// Values are written with 17 significant digits so a replay is exact.
inline void write_scenarios(const CaseData& grid, const std::vector<Scenario>& scenarios, std::ostream& out) {
  const auto farms = grid.wind_generators();
  out << "hour,seed";
  for (int g : farms) out << ",w_" << grid.generators[g].id;
  for (const Bus& b : grid.buses) out << ",d_" << b.id;
  for (int g : farms) out << ",z_" << grid.generators[g].id;
  out << '\n';
  char buf[64];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, ",%.17g", v);
    out << buf;
  };
  for (const Scenario& s : scenarios) {
    out << s.index << ',' << s.rng_seed;
    for (double w : s.wind_output) put(w);
    for (double d : s.load) put(d);
    for (double z : s.latent) put(z);
    out << '\n';
  }
}

inline void save_scenarios(const CaseData& grid, const std::vector<Scenario>& scenarios, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ScenarioError("cannot write scenario file '" + path + "'");
  write_scenarios(grid, scenarios, out);
}

inline std::vector<Scenario> read_scenarios(const CaseData& grid, std::istream& in) {
  const int nf = static_cast<int>(grid.wind_generators().size());
  const int nb = grid.num_buses();
  std::string line;
  if (!std::getline(in, line)) throw ScenarioError("scenario file is empty");
  const auto columns = static_cast<int>(std::count(line.begin(), line.end(), ',')) + 1;
  const bool with_latent = columns == 2 + 2 * nf + nb;
  if (!with_latent && columns != 2 + nf + nb)
    throw ScenarioError("scenario file has " + std::to_string(columns) + " columns, expected " +
                        std::to_string(2 + nf + nb) + " or " + std::to_string(2 + 2 * nf + nb));
  std::vector<Scenario> out;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (static_cast<int>(cells.size()) != columns)
      throw ScenarioError("scenario file row " + std::to_string(row) + " has the wrong number of columns");
    try {
      Scenario s;
      s.index = std::stoi(cells[0]);
      s.rng_seed = std::stoull(cells[1]);
      int c = 2;
      for (int f = 0; f < nf; ++f) s.wind_output.push_back(std::stod(cells[c++]));
      for (int b = 0; b < nb; ++b) s.load.push_back(std::stod(cells[c++]));
      if (with_latent)
        for (int f = 0; f < nf; ++f) s.latent.push_back(std::stod(cells[c++]));
      out.push_back(std::move(s));
    } catch (const std::logic_error&) {
      throw ScenarioError("scenario file row " + std::to_string(row) + " is not numeric");
    }
  }
  return out;
}

inline std::vector<Scenario> load_scenarios(const CaseData& grid, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError("cannot open scenario file '" + path + "'");
  return read_scenarios(grid, in);
}

} // namespace cascade

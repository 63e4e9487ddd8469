#include <gtest/gtest.h>

#include <sstream>

#include "cascade/dispatch.hpp"
#include "cascade/rts79.hpp"
#include "support/generators.hpp"
#include "support/oracles.hpp"
#include "support/toy_cases.hpp"

using namespace cascade;

namespace {

DispatchProblem problem(const CaseData& c, const StatusVector& lines, std::vector<double> load) {
  DispatchProblem p;
  p.line_state = lines;
  p.gen_state = StatusVector(c.generators.size(), true);
  for (const auto& g : c.generators) p.generator_capacity.push_back(g.p_max);
  p.load = std::move(load);
  p.gsdf = std::make_shared<GsdfMatrix>(build_gsdf(c, lines));
  return p;
}

std::vector<double> base_load(const CaseData& c, double scale = 1.0) {
  std::vector<double> d;
  for (const auto& b : c.buses) d.push_back(b.base_load * scale);
  return d;
}

} // namespace

TEST(Dispatch, TwoBusHandSolution) {
  const CaseData c = toy::two_bus();
  const DispatchModel m = make_dispatch_model(c);
  const DispatchSolution s = solve_baseline(m, problem(c, StatusVector(1, true), {0.0, 80.0}));
  ASSERT_EQ(s.status, DispatchStatus::optimal);
  EXPECT_NEAR(s.injection(0), 50.0, 1e-9);
  EXPECT_NEAR(s.injection(1), -50.0, 1e-9);
  EXPECT_NEAR(s.shedding(0), 0.0, 1e-9);
  EXPECT_NEAR(s.shedding(1), 30.0, 1e-9);
  EXPECT_NEAR(s.objective, 10.0 * 50.0 + 1000.0 * 30.0, 1e-6);
}

TEST(Dispatch, OneBusNoNetwork) {
  const CaseData c = toy::one_bus();
  const DispatchModel m = make_dispatch_model(c);
  const DispatchSolution s = solve_baseline(m, problem(c, StatusVector(0, true), {60.0}));
  ASSERT_EQ(s.status, DispatchStatus::optimal);
  EXPECT_NEAR(s.injection(0), 0.0, 1e-9);
  EXPECT_NEAR(s.shedding(0), 0.0, 1e-9);
  EXPECT_NEAR(s.injection(0) + 60.0 - s.shedding(0), 60.0, 1e-9);  // generation at the bus
}

TEST(Dispatch, ZeroLoadGivesZero) {
  const CaseData c = rts79_case();
  const DispatchModel m = make_dispatch_model(c);
  const DispatchSolution s = solve_baseline(m, problem(c, StatusVector(38, true), std::vector<double>(24, 0.0)));
  ASSERT_EQ(s.status, DispatchStatus::optimal);
  EXPECT_LT(s.injection.cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LT(s.shedding.cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_NEAR(s.objective, 0.0, 1e-9);
}

TEST(Dispatch, Rts79PeakIsAdequate) {
  const CaseData c = rts79_case();
  const DispatchModel m = make_dispatch_model(c);
  const DispatchSolution s = solve_baseline(m, problem(c, StatusVector(38, true), base_load(c)));
  ASSERT_EQ(s.status, DispatchStatus::optimal);
  EXPECT_NEAR(s.total_shed(), 0.0, 1e-9);
  EXPECT_NEAR(s.injection.sum(), 0.0, 1e-9);
}

TEST(Dispatch, RowLayoutBlocks) {
  const CaseData c = rts79_case();
  DispatchOptions literal;
  literal.gen_nonnegative = false;
  const DispatchModel lm = make_dispatch_model(c, literal);
  EXPECT_EQ(lm.layout.num_inequalities(), 2 * 38 + 3 * 24);
  const DispatchModel m = make_dispatch_model(c);
  EXPECT_EQ(m.layout.num_inequalities(), 2 * 38 + 4 * 24);
  const DispatchLp d = build_lp(lm, build_gsdf(c, StatusVector(38, true)));
  EXPECT_EQ(d.lp.num_ineq(), 148);
  EXPECT_EQ(d.lp.num_eq(), 1);
  EXPECT_EQ(d.lp.num_vars(), 48);
}

TEST(Dispatch, LoadEntersOnlyThroughParameters) {
  const CaseData c = rts79_case();
  const DispatchModel m = make_dispatch_model(c);
  const GsdfMatrix g = build_gsdf(c, StatusVector(38, true));
  const DispatchLp d1 = build_lp(m, g);
  const DispatchLp d2 = build_lp(m, g);
  EXPECT_TRUE(d1.lp.a == d2.lp.a);
  EXPECT_TRUE(d1.lp.b == d2.lp.b);
  std::vector<double> cap;
  for (const auto& u : c.generators) cap.push_back(u.p_max);
  const StatusVector gens(32, true);
  const Eigen::VectorXd phi1 = parameter_vector(cap, gens, base_load(c, 0.7));
  const Eigen::VectorXd phi2 = parameter_vector(cap, gens, base_load(c, 0.9));
  Eigen::VectorXd r1, r2;
  fill_rhs(m, d1, phi1, r1);
  fill_rhs(m, d1, phi2, r2);
  const Eigen::MatrixXd f = parameter_map(m);
  EXPECT_LT((r1 - (d1.lp.b + f * phi1)).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LT((r2 - r1 - f * (phi2 - phi1)).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Dispatch, MatchesOracleUnderRandomOutagesAndLoads) {
  const CaseData c = rts79_case();
  const DispatchModel m = make_dispatch_model(c);
  gen::Rng rng(31);
  const Eigen::VectorXd nominal = oracle::nominal_dispatch_cost(c);
  for (int trial = 0; trial < 25; ++trial) {
    const auto out = gen::random_removal(rng, c, StatusVector(38, true), gen::integer(rng, 0, 3), true);
    StatusVector lines(38, true);
    for (int k : out) lines.set(k, false);
    const auto load = base_load(c, gen::uniform(rng, 0.5, 1.15));
    DispatchProblem p = problem(c, lines, load);
    for (int g = 0; g < 32; ++g)
      if (gen::uniform(rng, 0, 1) < 0.1) p.gen_state.set(g, false);
    const DispatchSolution s = solve_baseline(m, p);
    const auto ref = oracle::redispatch(c, oracle::to_bools(lines), oracle::to_bools(p.gen_state), p.generator_capacity,
                                        Eigen::Map<const Eigen::VectorXd>(load.data(), 24));
    ASSERT_TRUE(ref.has_value());
    ASSERT_EQ(s.status, DispatchStatus::optimal);
    Eigen::VectorXd x(48), xr(48);
    x << s.injection, s.shedding;
    xr << ref->p, ref->shed;
    EXPECT_NEAR(s.objective, nominal.dot(xr), 1e-6 * (1.0 + std::abs(s.objective))) << "trial " << trial;
    EXPECT_LT((x - xr).cwiseAbs().maxCoeff(), 1e-6) << "trial " << trial;
  }
}

TEST(Dispatch, LiteralFormulationAgreesWhenBoundInactive) {
  const CaseData c = toy::two_bus();
  DispatchOptions literal;
  literal.gen_nonnegative = false;
  const DispatchSolution a = solve_baseline(make_dispatch_model(c), problem(c, StatusVector(1, true), {0.0, 80.0}));
  const DispatchSolution b = solve_baseline(make_dispatch_model(c, literal), problem(c, StatusVector(1, true), {0.0, 80.0}));
  EXPECT_NEAR(a.objective, b.objective, 1e-6);
}

TEST(Dispatch, LiteralFormulationCanShedBeyondLocalNeed) {
  // Without the net-generation bound a bus with no load may absorb power as
  // negative injection while shedding elsewhere is priced the same; the
  // default formulation rules such points out.
  const CaseData c = toy::two_bus();
  const DispatchModel m = make_dispatch_model(c);
  const DispatchLp d = build_lp(m, build_gsdf(c, StatusVector(1, true)));
  const int r = m.layout.gen_lower(0) - 1;
  EXPECT_EQ(d.lp.a(r, 0), -1.0);
  EXPECT_EQ(d.lp.a(r, 2), 1.0);
}

TEST(Dispatch, CostPerturbationIsTiny) {
  const CaseData c = rts79_case();
  const DispatchModel m = make_dispatch_model(c);
  const Eigen::VectorXd d = m.cost - m.nominal_cost();
  EXPECT_GT(d.minCoeff(), 0.0);
  EXPECT_LT(d.maxCoeff(), 1e-5 * (1.0 + m.nominal_cost().cwiseAbs().maxCoeff()) * 1.0000001);
  for (int j = 1; j < d.size(); ++j) EXPECT_GT(d(j), d(j - 1));
}

TEST(Dispatch, LpFileExport) {
  const CaseData c = toy::two_bus();
  const DispatchModel m = make_dispatch_model(c);
  const DispatchLp d = build_lp(m, build_gsdf(c, StatusVector(1, true)));
  std::ostringstream out;
  std::vector<double> cap{100.0};
  write_lp_file(m, d, parameter_vector(cap, StatusVector(1, true), {0.0, 80.0}), out);
  const std::string s = out.str();
  EXPECT_NE(s.find("Minimize"), std::string::npos);
  EXPECT_NE(s.find("Subject To"), std::string::npos);
  EXPECT_NE(s.find("r0: 1 P1 + 1 P2 = 0"), std::string::npos);
  EXPECT_NE(s.find("End"), std::string::npos);
}

TEST(Dispatch, ViolationOfOptimalSolutionIsZero) {
  const CaseData c = rts79_case();
  const DispatchModel m = make_dispatch_model(c);
  const DispatchLp d = build_lp(m, build_gsdf(c, StatusVector(38, true)));
  std::vector<double> cap;
  for (const auto& u : c.generators) cap.push_back(u.p_max);
  const Eigen::VectorXd phi = parameter_vector(cap, StatusVector(32, true), base_load(c, 1.25));
  const BaselineResult r = solve_baseline(m, d, phi);
  ASSERT_EQ(r.solution.status, DispatchStatus::optimal);
  EXPECT_LT(dispatch_violation(m, d, phi, r.solution), 1e-8);
  EXPECT_GE(r.solution.total_shed(), 1.25 * 2850.0 - 3405.0 - 1e-6);  // demand above installed capacity
}

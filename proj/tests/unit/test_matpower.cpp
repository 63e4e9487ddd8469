#include <gtest/gtest.h>

#include "cascade/matpower.hpp"

using namespace cascade;

namespace {

const char* kCase = R"(function mpc = tiny
% three-bus test system
mpc.version = '2';
mpc.baseMVA = 100;

%% bus data
%	bus_i	type	Pd	Qd	Gs	Bs	area	Vm	Va	baseKV	zone	Vmax	Vmin
mpc.bus = [
	10	3	0	0	0	0	1	1	0	230	1	1.1	0.9;
	20	1	60	10	0	0	1	1	0	230	1	1.1	0.9;
	30	2	40	10	0	0	1	1	0	230	1	1.1	0.9;
];

%% generator data
%	bus	Pg	Qg	Qmax	Qmin	Vg	mBase	status	Pmax	Pmin
mpc.gen = [
	10	0	0	100	-100	1	100	1	150	10;
	30	0	0	100	-100	1	100	1	80	0;
	30	0	0	100	-100	1	100	0	50	0;
	20	0	0	50	-50	1	100	1	0	0;
];

%% branch data
%	fbus	tbus	r	x	b	rateA	rateB	rateC	ratio	angle	status
mpc.branch = [
	10	20	0.01	0.1	0	100	0	0	0	0	1;
	20	30	0.01	0.2	0	0	0	0	0	0	1;
	10	30	0.01	0.1	0	80	0	0	0	0	1;
	10	30	0.01	0.1	0	80	0	0	0	0	0;
];

%% generator cost data
mpc.gencost = [
	2	0	0	3	0.01	20	100;
	1	0	0	2	0	0	80	2400;
	2	0	0	2	15	0;
	2	0	0	2	1	0;
];
)";

} // namespace

TEST(Matpower, ParsesTinyCase) {
  const CaseData c = parse_matpower(kCase);
  ASSERT_EQ(c.num_buses(), 3);
  EXPECT_TRUE(c.buses[0].is_reference);
  EXPECT_EQ(c.buses[1].base_load, 60.0);
  EXPECT_EQ(c.buses[2].id, 3);
  ASSERT_EQ(c.num_lines(), 3);
  EXPECT_EQ(c.lines[1].from_bus, 2);
  EXPECT_EQ(c.lines[1].to_bus, 3);
  EXPECT_EQ(c.lines[1].reactance, 0.2);
  EXPECT_EQ(c.lines[1].flow_limit, 9999.0);
  EXPECT_EQ(c.lines[2].flow_limit, 80.0);
  ASSERT_EQ(c.num_generators(), 2);
  EXPECT_EQ(c.generators[0].bus, 1);
  EXPECT_EQ(c.generators[0].p_max, 150.0);
  // quadratic 0.01 p^2 + 20 p averaged over [10, 150]: 20 + 0.01 * 160
  EXPECT_NEAR(c.generators[0].cost, 21.6, 1e-12);
  EXPECT_NEAR(c.generators[1].cost, 30.0, 1e-12);
  EXPECT_EQ(c.generators[1].bus, 3);
  EXPECT_EQ(c.shed_cost[0], 100.0 * 30.0);
  EXPECT_EQ(c.peak_load, 100.0);
  EXPECT_EQ(c.lines[0].base_fail_prob, 1e-4);
  EXPECT_EQ(c.generators[0].fail_prob, 1e-3);
}

TEST(Matpower, RemovesUnitsByFileOrder) {
  MatpowerImportOptions opt;
  opt.removed_units = {2};
  const CaseData c = parse_matpower(kCase, opt);
  ASSERT_EQ(c.num_generators(), 1);
  EXPECT_EQ(c.generators[0].id, 1);
  opt.removed_units = {7};
  EXPECT_THROW(parse_matpower(kCase, opt), CaseValidationError);
}

TEST(Matpower, OptionsSetReliabilityData) {
  MatpowerImportOptions opt;
  opt.relay_threshold = 1.5;
  opt.line_fail_prob = 0.01;
  const CaseData c = parse_matpower(kCase, opt);
  for (const auto& l : c.lines) {
    EXPECT_EQ(l.relay_threshold, 1.5);
    EXPECT_EQ(l.base_fail_prob, 0.01);
  }
}

TEST(Matpower, Errors) {
  EXPECT_THROW(parse_matpower("mpc.baseMVA = 100;"), CaseParseError);
  EXPECT_THROW(parse_matpower("mpc.bus = [1 3 0; 2 1 x];"), CaseParseError);
  EXPECT_THROW(parse_matpower("mpc.bus = [1 3 0; 1 1 0];\nmpc.branch = [1 1 0 0.1 0 10];"), CaseParseError);
  EXPECT_THROW(parse_matpower("mpc.bus = [1 3 0; 2 1 0];\nmpc.branch = [1 5 0 0.1 0 10];"), CaseParseError);
  EXPECT_THROW(load_matpower("/nonexistent/case.m"), CaseParseError);
}

TEST(Matpower, RoundTripThroughJson) {
  const CaseData c = parse_matpower(kCase);
  const CaseData back = case_from_json(case_to_json(c));
  EXPECT_EQ(back.num_lines(), c.num_lines());
  EXPECT_EQ(back.generators[0].cost, c.generators[0].cost);
}

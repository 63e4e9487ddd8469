#pragma once

#include "cascade/case_model.hpp"
#include "cascade/cascade.hpp"
#include "cascade/dcpf.hpp"
#include "cascade/dispatch.hpp"
#include "cascade/gsdf.hpp"
#include "cascade/lp.hpp"
#include "cascade/lsd.hpp"
#include "cascade/matpower.hpp"
#include "cascade/report.hpp"
#include "cascade/rts79.hpp"
#include "cascade/scenario.hpp"
#include "cascade/status_vector.hpp"

// Umbrella header.

#pragma once

#include "pinch/baseline.hpp"
#include "pinch/config.hpp"
#include "pinch/core_model.hpp"
#include "pinch/csv.hpp"
#include "pinch/experiment.hpp"
#include "pinch/line_search.hpp"
#include "pinch/mrc.hpp"
#include "pinch/single_user.hpp"
#include "pinch/wmmse.hpp"

#pragma once

#include "errors.hpp"
#include "hours.hpp"
#include "market.hpp"
#include "csv.hpp"
#include "market_io.hpp"
#include "fleet.hpp"
#include "ipm.hpp"
#include "bidding.hpp"
#include "attacks.hpp"
#include "admm.hpp"
#include "detection.hpp"
#include "scenario.hpp"
#include "experiment.hpp"

#pragma once

#include "rsvol/backtest.hpp"
#include "rsvol/chain.hpp"
#include "rsvol/errors.hpp"
#include "rsvol/forecast.hpp"
#include "rsvol/innovations.hpp"
#include "rsvol/io.hpp"
#include "rsvol/mcmc_az.hpp"
#include "rsvol/mcmc_fs.hpp"
#include "rsvol/model.hpp"
#include "rsvol/prob.hpp"
#include "rsvol/realized.hpp"
#include "rsvol/report.hpp"
#include "rsvol/riskeval.hpp"
#include "rsvol/rng.hpp"
#include "rsvol/stats.hpp"

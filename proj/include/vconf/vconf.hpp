#pragma once

// Verbalized-confidence calibration toolkit: dataset ingestion, prompt
// rendering, response delivery and parsing, confidence aggregation and
// atypicality recalibration, and calibration metrics/reports.

#include "vconf/aggregate.hpp"
#include "vconf/config.hpp"
#include "vconf/dataset.hpp"
#include "vconf/errors.hpp"
#include "vconf/gateway.hpp"
#include "vconf/metrics.hpp"
#include "vconf/mock_model.hpp"
#include "vconf/parser.hpp"
#include "vconf/prompt.hpp"
#include "vconf/report_io.hpp"
#include "vconf/runner.hpp"

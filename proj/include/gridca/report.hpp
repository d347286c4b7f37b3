#pragma once

#include <iosfwd>
#include <string>

#include "gridca/contingency.hpp"

namespace gridca::report {

using contingency::ScreeningReport;

/// CSV, one row per scenario:
///   branch_id,from_bus,to_bus,islanding,converged,outer_iters,cg_iters,
///   time_ms,worst_violation_pct,violation_count,failure_reason
/// RFC-4180 quoting, time to 2 decimals, percents to 1.
std::string to_csv(const ScreeningReport& report);
size_t write_csv(const ScreeningReport& report, const std::string& path);  // IoError

/// Full-fidelity JSON with schema_version, per-scenario violation lists
/// (capped at 50 with an overflow count) and re-dispatch details.
std::string to_json(const ScreeningReport& report);
size_t write_json(const ScreeningReport& report, const std::string& path);  // IoError

/// Inverse of to_json for schema_version "1".
ScreeningReport read_json(const std::string& text);

}  // namespace gridca::report

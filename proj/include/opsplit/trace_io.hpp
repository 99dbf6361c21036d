#pragma once

// Trace export. Column names are stable:
//   index,residual,lambda,alpha,error_norm,dist_to_ref,running_sum

#include <array>
#include <iosfwd>
#include <string_view>

#include <json.hpp>

#include "opsplit/iteration.hpp"

namespace opsplit {

inline constexpr std::array<std::string_view, 7> kTraceColumns = {
    "index", "residual", "lambda", "alpha", "error_norm", "dist_to_ref", "running_sum"};

/// Header plus one row per record; doubles as %.17g, missing distances as empty fields.
void write_trace_csv(const IterationTrace& trace, std::ostream& out);

/// {"metadata": ..., "summary": ..., "columns": {name: [...]}}; missing distances are null.
nlohmann::json trace_to_json(const IterationTrace& trace, const nlohmann::json& metadata);

/// Run-level diagnostics of a trace (sums, violation counts, final state).
nlohmann::json trace_summary(const IterationTrace& trace);

}  // namespace opsplit

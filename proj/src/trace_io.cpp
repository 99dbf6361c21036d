#include "opsplit/trace_io.hpp"

#include <cstdio>
#include <ostream>

namespace opsplit {

namespace {

void put(std::ostream& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out << buf;
}

nlohmann::json optional_value(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

}  // namespace

void write_trace_csv(const IterationTrace& trace, std::ostream& out) {
  for (std::size_t i = 0; i < kTraceColumns.size(); ++i) {
    out << (i ? "," : "") << kTraceColumns[i];
  }
  out << '\n';
  for (const auto& r : trace.records) {
    out << r.index << ',';
    put(out, r.residual);
    out << ',';
    put(out, r.lambda);
    out << ',';
    put(out, r.alpha);
    out << ',';
    put(out, r.error_norm);
    out << ',';
    if (r.dist_to_ref) put(out, *r.dist_to_ref);
    out << ',';
    put(out, r.running_sum);
    out << '\n';
  }
}

nlohmann::json trace_summary(const IterationTrace& t) {
  nlohmann::json s;
  s["iterations"] = t.iterations;
  s["final_residual"] = t.final_residual;
  s["stop_reason"] = std::string(to_string(t.stop_reason));
  s["thinning"] = t.thinning;
  s["running_sum"] = t.running_sum;
  s["error_sum"] = t.error_sum;
  s["residual_square_sum"] = t.residual_square_sum;
  s["factor_error_sums"] = t.factor_error_sums;
  s["error_bound_violations"] = t.error_bound_violations;
  s["factor_displacement_sums"] = t.factor_displacement_sums;
  s["cocoercive_sum"] = optional_value(t.cocoercive_sum);
  s["fejer_violations"] = t.fejer_violations;
  s["first_fejer_violation"] = t.first_fejer_violation ? nlohmann::json(*t.first_fejer_violation)
                                                       : nlohmann::json(nullptr);
  s["descent_violations"] = t.descent_violations;
  s["nu"] = optional_value(t.nu);
  s["final_set_distances"] = t.final_set_distances;
  s["final_iterate"] = std::vector<double>(t.final_iterate.data(),
                                           t.final_iterate.data() + t.final_iterate.size());
  s["annotations"] = t.annotations;
  return s;
}

nlohmann::json trace_to_json(const IterationTrace& trace, const nlohmann::json& metadata) {
  nlohmann::json cols = nlohmann::json::object();
  auto& index = cols["index"] = nlohmann::json::array();
  auto& residual = cols["residual"] = nlohmann::json::array();
  auto& lambda = cols["lambda"] = nlohmann::json::array();
  auto& alpha = cols["alpha"] = nlohmann::json::array();
  auto& error_norm = cols["error_norm"] = nlohmann::json::array();
  auto& dist = cols["dist_to_ref"] = nlohmann::json::array();
  auto& running = cols["running_sum"] = nlohmann::json::array();
  for (const auto& r : trace.records) {
    index.push_back(r.index);
    residual.push_back(r.residual);
    lambda.push_back(r.lambda);
    alpha.push_back(r.alpha);
    error_norm.push_back(r.error_norm);
    dist.push_back(optional_value(r.dist_to_ref));
    running.push_back(r.running_sum);
  }
  return {{"metadata", metadata}, {"summary", trace_summary(trace)}, {"columns", std::move(cols)}};
}

}  // namespace opsplit

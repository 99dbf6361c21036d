#pragma once

// JSON problem specifications consumed by the bench runner and the CLI.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace opsplit {

/// A sequence rule as written in a spec.
///   {"rule":"constant","value":v} {"rule":"harmonic","scale":s} {"rule":"table","values":[..]}
///   {"rule":"cycle","values":[..]} {"rule":"max"} (lambda only: upper end of the admissible range)
/// "relative_to_beta": true multiplies step sizes by beta.
struct RuleSpec {
  std::string rule = "constant";
  double value = 1.0;
  double scale = 1.0;
  std::vector<double> values;
  bool relative_to_beta = false;
  bool operator==(const RuleSpec&) const = default;
};

/// {"rule":"none"} or {"rule":"power","scale":s,"power":p}: norm s (n+1)^-p per slot.
struct ErrorSpec {
  std::string rule = "none";
  double scale = 0.0;
  double power = 2.0;
  bool operator==(const ErrorSpec&) const = default;
};

struct ScheduleSpec {
  std::string mode = "classical";  ///< classical | extended
  std::optional<double> eps;
  RuleSpec gamma{"constant", 1.0, 1.0, {}, true};
  RuleSpec lambda;
  ErrorSpec errors;
  bool operator==(const ScheduleSpec&) const = default;
};

struct StopSpec {
  std::size_t max_iterations = 1000;
  double residual_tolerance = 0.0;
  bool operator==(const StopSpec&) const = default;
};

struct OutputSpec {
  std::string trace_dir = "traces";
  std::size_t thinning = 0;
  bool csv = true;
  bool json = true;
  bool operator==(const OutputSpec&) const = default;
};

struct AcceptanceSpec {
  std::optional<double> max_reference_distance;
  std::optional<double> max_set_distance;
  bool operator==(const AcceptanceSpec&) const = default;
};

struct LassoSpec {
  std::size_t rows = 20;
  std::size_t cols = 50;
  double tau = 0.1;
  std::size_t baseline_iterations = 1000000;
  bool operator==(const LassoSpec&) const = default;
};

/// {"type":"halfspace","normal":[..],"offset":c} {"type":"ball","center":[..],"radius":r}
/// {"type":"box","lower":[..],"upper":[..]} {"type":"affine","basis":[[col],..],"point":[..]}
struct SetSpec {
  std::string type;
  std::vector<double> normal;
  double offset = 0.0;
  std::vector<double> center;
  double radius = 0.0;
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<std::vector<double>> basis;
  std::vector<double> point;
  bool operator==(const SetSpec&) const = default;
};

/// Without "sets", the seeded two-halfspace-plus-ball instance of the given dimension.
struct FeasibilitySpec {
  std::size_t dimension = 2;
  std::string method = "string";  ///< string | composed
  std::vector<SetSpec> sets;
  std::vector<std::vector<std::size_t>> strings;
  std::vector<double> weights;
  std::vector<double> reference;  ///< optional point of the intersection
  bool operator==(const FeasibilitySpec&) const = default;
};

struct MonotoneLinearSpec {
  std::vector<std::vector<double>> matrix;  ///< rows
  std::vector<double> target;
  bool operator==(const MonotoneLinearSpec&) const = default;
};

struct ScalarSpec {
  std::string variant = "l1";  ///< l1 | box
  bool operator==(const ScalarSpec&) const = default;
};

struct ProblemSpec {
  std::string name;
  std::string kind;  ///< lasso | feasibility | monotone_linear | scalar_fixture
  std::uint64_t seed = 0;
  std::optional<std::vector<double>> x0;
  std::optional<LassoSpec> lasso;
  std::optional<FeasibilitySpec> feasibility;
  std::optional<MonotoneLinearSpec> monotone_linear;
  std::optional<ScalarSpec> scalar_fixture;
  ScheduleSpec schedule;
  StopSpec stop;
  OutputSpec output;
  AcceptanceSpec acceptance;
  bool operator==(const ProblemSpec&) const = default;
};

/// Structural parse; throws ValidationError naming the offending field.
ProblemSpec parse_spec(const nlohmann::json& j);
ProblemSpec load_spec(const std::filesystem::path& path);
nlohmann::json to_json(const ProblemSpec& spec);

}  // namespace opsplit

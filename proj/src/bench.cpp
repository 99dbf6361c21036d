#include "opsplit/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "opsplit/errors.hpp"
#include "opsplit/fixtures.hpp"
#include "opsplit/splitting.hpp"
#include "opsplit/trace_io.hpp"

namespace opsplit {

using nlohmann::json;

namespace {

Point to_point(const std::vector<double>& v) {
  return Eigen::Map<const Point>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<double> to_vector(const Point& p) { return {p.data(), p.data() + p.size()}; }

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

RuleSpec max_rule() {
  RuleSpec r;
  r.rule = "max";
  return r;
}

enum class Engine { splitting, strings, composed };

// Everything a run needs, built and validated from a spec.
struct Prepared {
  Engine engine = Engine::splitting;
  std::size_t dimension = 0;
  std::optional<Epsilon> eps;
  RelaxationMode mode = RelaxationMode::classical;

  // splitting
  std::optional<InclusionProblem> inclusion;
  double beta = 0.0;
  std::optional<SequenceRule> gammas;

  // projections
  std::vector<ConvexSet> sets;
  std::vector<std::vector<AveragedMap>> strings;
  std::vector<std::vector<Alpha>> string_alphas;
  std::optional<Weights> weights;
  std::vector<AveragedMap> factors;
  std::optional<Alpha> alpha;

  std::optional<SequenceRule> lambdas;
  ErrorInjector errors = ErrorInjector::none();
  Point x0;
  std::optional<Point> reference;
};

SequenceRule make_rule(const RuleSpec& r, double unit, const char* where) {
  const double u = r.relative_to_beta ? unit : 1.0;
  std::vector<double> scaled = r.values;
  for (double& v : scaled) v *= u;
  if (r.rule == "constant") return SequenceRule::constant(r.value * u);
  if (r.rule == "harmonic") return SequenceRule::harmonic(r.scale * u);
  if (r.rule == "table") return SequenceRule::table(std::move(scaled));
  if (r.rule == "cycle") return SequenceRule::cycle(std::move(scaled));
  throw ValidationError(where, std::string(where) + ": rule '" + r.rule + "' not usable here");
}

// Upper end of the admissible relaxation range, per index.
SequenceRule max_lambda_rule(const Prepared& p) {
  if (!p.eps) throw ValidationError("schedule.eps", "lambda rule 'max' needs eps");
  const double e = p.eps->value();
  if (p.engine == Engine::splitting) {
    auto cap = [&](double g) { return (1.0 - e) * (2.0 + e - g / (2.0 * p.beta)); };
    const auto& g = *p.gammas;
    switch (g.kind()) {
      case SequenceRule::Kind::constant:
        return SequenceRule::constant(cap(g.at(0)));
      case SequenceRule::Kind::table:
      case SequenceRule::Kind::cycle: {
        std::vector<double> caps;
        for (double v : g.values()) caps.push_back(cap(v));
        return g.kind() == SequenceRule::Kind::table ? SequenceRule::table(caps)
                                                      : SequenceRule::cycle(caps);
      }
      case SequenceRule::Kind::harmonic:
        break;
    }
    throw ValidationError("schedule.lambda", "lambda rule 'max' cannot follow a harmonic step size");
  }
  if (p.mode != RelaxationMode::extended) {
    throw ValidationError("schedule.lambda", "lambda rule 'max' needs the extended mode");
  }
  return SequenceRule::constant(relaxation_ranges(*p.alpha, *p.eps).extended.value);
}

// Builds the relaxation rule and checks it on every index of the horizon.
void set_lambdas(Prepared& p, const RuleSpec& rule, std::size_t horizon) {
  p.lambdas = rule.rule == "max" ? max_lambda_rule(p) : make_rule(rule, 1.0, "schedule.lambda");
  if (p.engine == Engine::splitting) {
    FbSchedule s{*p.eps, *p.gammas, *p.lambdas};
    require_valid_fb_schedule(p.beta, s, horizon);
    return;
  }
  const Schedule s{*p.lambdas, p.mode, p.eps};
  for (std::size_t n = 0; n < horizon; ++n) check_relaxation(s, n, p.lambdas->at(n), *p.alpha);
}

ConvexSet make_set(const SetSpec& s, std::size_t dim, std::size_t index) {
  const std::string where = "feasibility.sets[" + std::to_string(index) + "]";
  auto check = [&](const std::vector<double>& v, const char* field) {
    if (v.size() != dim) {
      throw ValidationError(where + "." + field, where + "." + field + " has wrong dimension",
                            static_cast<double>(v.size()), static_cast<double>(dim));
    }
  };
  if (s.type == "halfspace") {
    check(s.normal, "normal");
    return ConvexSet::halfspace(to_point(s.normal), s.offset);
  }
  if (s.type == "ball") {
    check(s.center, "center");
    return ConvexSet::ball(to_point(s.center), s.radius);
  }
  if (s.type == "box") {
    check(s.lower, "lower");
    check(s.upper, "upper");
    return ConvexSet::box(to_point(s.lower), to_point(s.upper));
  }
  check(s.point, "point");
  if (s.basis.empty()) throw ValidationError(where + ".basis", where + ": empty basis");
  Matrix basis(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(s.basis.size()));
  for (std::size_t c = 0; c < s.basis.size(); ++c) {
    check(s.basis[c], "basis");
    basis.col(static_cast<Eigen::Index>(c)) = to_point(s.basis[c]);
  }
  return ConvexSet::affine(basis, to_point(s.point));
}

void prepare_splitting(Prepared& p, const ProblemSpec& spec) {
  p.engine = Engine::splitting;
  if (spec.schedule.mode != "extended" || !spec.schedule.eps) {
    throw ValidationError("schedule.mode",
                          "splitting problems use the extended mode with an eps value");
  }
  if (spec.kind == "scalar_fixture") {
    const bool l1 = spec.scalar_fixture->variant == "l1";
    p.inclusion = l1 ? as_inclusion(scalar_l1_problem()) : box_inclusion_problem();
    p.reference = Point::Constant(1, 2.0);
  } else if (spec.kind == "monotone_linear") {
    const auto& m = *spec.monotone_linear;
    const std::size_t n = m.target.size();
    if (n == 0 || m.matrix.size() != n) {
      throw ValidationError("monotone_linear.matrix", "matrix must be square and match the target",
                            static_cast<double>(m.matrix.size()), static_cast<double>(n));
    }
    Matrix a(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      if (m.matrix[i].size() != n) {
        throw ValidationError("monotone_linear.matrix", "matrix row " + std::to_string(i) +
                                                            " has wrong length");
      }
      for (std::size_t j = 0; j < n; ++j) {
        a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = m.matrix[i][j];
      }
    }
    const auto f = monotone_linear_fixture(a, to_point(m.target));
    p.inclusion = f.problem();
    p.reference = f.solution;
  } else {
    const auto& l = *spec.lasso;
    const auto f = lasso_fixture(l.rows, l.cols, l.tau, spec.seed);
    p.inclusion = f.inclusion();
    p.reference = lasso_baseline(f, l.baseline_iterations);
  }
  p.dimension = p.inclusion->dimension;
  p.beta = p.inclusion->beta;
  p.gammas = make_rule(spec.schedule.gamma, p.beta, "schedule.gamma");
  if (spec.schedule.errors.rule == "power") {
    p.errors = ErrorInjector::decaying(p.dimension, 1, spec.schedule.errors.scale,
                                       spec.schedule.errors.power, spec.seed);
  }
}

void prepare_feasibility(Prepared& p, const ProblemSpec& spec) {
  const auto& f = *spec.feasibility;
  std::vector<std::vector<std::size_t>> strings = f.strings;
  std::vector<double> weights = f.weights;
  p.dimension = f.dimension;
  if (f.sets.empty()) {
    auto fx = feasibility_fixture(f.dimension, spec.seed);
    p.sets = std::move(fx.sets);
    p.x0 = fx.x0;
    p.reference = fx.interior;
    if (strings.empty()) strings = fx.strings;
    if (weights.empty() && f.strings.empty()) weights = fx.weights;
  } else {
    for (std::size_t i = 0; i < f.sets.size(); ++i) p.sets.push_back(make_set(f.sets[i], f.dimension, i));
    p.x0 = Point::Zero(static_cast<Eigen::Index>(f.dimension));
  }
  if (!f.reference.empty()) {
    if (f.reference.size() != f.dimension) {
      throw ValidationError("feasibility.reference", "reference point has wrong dimension");
    }
    p.reference = to_point(f.reference);
  }

  if (f.method == "composed") {
    p.engine = Engine::composed;
    for (const auto& s : p.sets) p.factors.push_back(projection_map(s));
    std::vector<Alpha> alphas;
    for (const auto& t : p.factors) alphas.push_back(t.alpha());
    p.alpha = compose_many_closed(alphas);
    if (spec.schedule.mode != "extended") {
      throw ValidationError("schedule.mode", "the composed method needs the extended mode");
    }
    if (spec.schedule.errors.rule == "power") {
      p.errors = ErrorInjector::decaying(p.dimension, p.factors.size(), spec.schedule.errors.scale,
                                         spec.schedule.errors.power, spec.seed);
    }
    return;
  }

  p.engine = Engine::strings;
  if (strings.empty()) {
    for (std::size_t i = 0; i < p.sets.size(); ++i) strings.push_back({i});
  }
  p.strings = projection_strings(p.sets, strings);
  p.weights = weights.empty() ? Weights::uniform(strings.size()) : Weights(weights);
  for (const auto& s : p.strings) {
    std::vector<Alpha> a;
    for (const auto& t : s) a.push_back(t.alpha());
    p.string_alphas.push_back(std::move(a));
  }
  p.alpha = string_operator(p.strings, *p.weights).alpha();
  if (spec.schedule.errors.rule != "none") {
    throw ValidationError("schedule.errors", "string averaging runs take no injected errors");
  }
}

Prepared prepare(const ProblemSpec& spec) {
  Prepared p;
  p.mode = spec.schedule.mode == "extended" ? RelaxationMode::extended : RelaxationMode::classical;
  if (spec.schedule.eps) p.eps = Epsilon(*spec.schedule.eps);
  if (p.mode == RelaxationMode::extended && !p.eps) {
    throw ValidationError("schedule.eps", "extended mode needs eps");
  }
  if (spec.stop.max_iterations == 0) {
    throw ValidationError("stop.max_iterations", "max_iterations must be positive");
  }
  if (!(spec.stop.residual_tolerance >= 0.0)) {
    throw ValidationError("stop.residual_tolerance", "residual tolerance must be nonnegative");
  }
  if (spec.kind == "feasibility") {
    prepare_feasibility(p, spec);
  } else {
    prepare_splitting(p, spec);
    p.x0 = Point::Zero(static_cast<Eigen::Index>(p.dimension));
  }
  if (spec.x0) {
    if (spec.x0->size() != p.dimension) {
      throw ValidationError("spec.x0", "x0 has wrong dimension", static_cast<double>(spec.x0->size()),
                            static_cast<double>(p.dimension));
    }
    p.x0 = to_point(*spec.x0);
  }
  set_lambdas(p, spec.schedule.lambda, spec.stop.max_iterations);
  return p;
}

IterationTrace run_prepared(const Prepared& p, const ProblemSpec& spec, double residual_tolerance) {
  StopRule stop{spec.stop.max_iterations, residual_tolerance, std::nullopt, 0.0};
  RunOptions options;
  options.reference = p.reference;
  options.sets = p.sets;
  options.thinning = spec.output.thinning;
  switch (p.engine) {
    case Engine::splitting: {
      FbSchedule s{*p.eps, *p.gammas, *p.lambdas, ErrorInjector::none(), p.errors};
      return forward_backward_run(*p.inclusion, s, p.x0, stop, options);
    }
    case Engine::composed:
      return composed_run(p.factors, Schedule::extended(*p.lambdas, *p.eps), p.errors, p.x0, stop,
                          options);
    case Engine::strings:
      return string_run(p.strings, *p.weights, Schedule{*p.lambdas, p.mode, p.eps}, p.x0, stop,
                        options);
  }
  throw NumericalError("unknown engine");
}

void require_finite_report(const RunReport& r) {
  auto ok = [](double v) { return std::isfinite(v); };
  bool finite = ok(r.final_residual) && ok(r.running_sum) && ok(r.error_sum) &&
                ok(r.residual_square_sum);
  for (double v : r.final_iterate) finite = finite && ok(v);
  for (double v : r.set_distances) finite = finite && ok(v);
  if (r.reference_distance) finite = finite && ok(*r.reference_distance);
  if (r.objective) finite = finite && ok(*r.objective);
  if (!finite) throw NumericalError("non-finite value in the run report of " + r.name);
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

RunResult execute_spec(const ProblemSpec& spec) {
  const Prepared p = prepare(spec);
  const auto start = std::chrono::steady_clock::now();
  IterationTrace trace = run_prepared(p, spec, spec.stop.residual_tolerance);
  const auto stop = std::chrono::steady_clock::now();

  RunReport r;
  r.name = spec.name;
  r.kind = spec.kind;
  r.seed = spec.seed;
  r.iterations = trace.iterations;
  r.final_residual = trace.final_residual;
  r.stop_reason = std::string(to_string(trace.stop_reason));
  r.wall_time_s = std::chrono::duration<double>(stop - start).count();
  r.running_sum = trace.running_sum;
  r.error_sum = trace.error_sum;
  r.residual_square_sum = trace.residual_square_sum;
  r.cocoercive_sum = trace.cocoercive_sum;
  r.factor_error_sums = trace.factor_error_sums;
  r.factor_displacement_sums = trace.factor_displacement_sums;
  r.fejer_violations = trace.fejer_violations;
  r.descent_violations = trace.descent_violations;
  r.error_bound_violations = trace.error_bound_violations;
  r.nu = trace.nu;
  if (p.reference) r.reference_distance = (trace.final_iterate - *p.reference).norm();
  r.set_distances = trace.final_set_distances;
  if (p.inclusion && p.inclusion->objective) r.objective = p.inclusion->objective(trace.final_iterate);
  r.final_iterate = to_vector(trace.final_iterate);
  r.annotations = trace.annotations;
  r.converged = spec.stop.residual_tolerance == 0.0 || trace.stop_reason == StopReason::residual;
  if (!r.converged) {
    r.acceptance_failures.push_back("residual " + format_double(r.final_residual) +
                                    " above tolerance " +
                                    format_double(spec.stop.residual_tolerance) + " after " +
                                    std::to_string(r.iterations) + " iterations");
  }
  if (const auto& bound = spec.acceptance.max_reference_distance) {
    if (!r.reference_distance) {
      r.acceptance_failures.push_back("no reference solution for max_reference_distance");
    } else if (!(*r.reference_distance <= *bound)) {
      r.acceptance_failures.push_back("reference distance " + format_double(*r.reference_distance) +
                                      " > " + format_double(*bound));
    }
  }
  if (const auto& bound = spec.acceptance.max_set_distance) {
    for (std::size_t i = 0; i < r.set_distances.size(); ++i) {
      if (!(r.set_distances[i] <= *bound)) {
        r.acceptance_failures.push_back("set " + std::to_string(i) + " distance " +
                                        format_double(r.set_distances[i]) + " > " +
                                        format_double(*bound));
      }
    }
  }
  require_finite_report(r);
  return {std::move(r), std::move(trace)};
}

json to_json(const RunReport& r) {
  return {{"name", r.name},
          {"kind", r.kind},
          {"seed", r.seed},
          {"iterations", r.iterations},
          {"final_residual", r.final_residual},
          {"stop_reason", r.stop_reason},
          {"wall_time_s", r.wall_time_s},
          {"running_sum", r.running_sum},
          {"error_sum", r.error_sum},
          {"residual_square_sum", r.residual_square_sum},
          {"cocoercive_sum", optional_json(r.cocoercive_sum)},
          {"factor_error_sums", r.factor_error_sums},
          {"factor_displacement_sums", r.factor_displacement_sums},
          {"fejer_violations", r.fejer_violations},
          {"descent_violations", r.descent_violations},
          {"error_bound_violations", r.error_bound_violations},
          {"nu", optional_json(r.nu)},
          {"reference_distance", optional_json(r.reference_distance)},
          {"set_distances", r.set_distances},
          {"objective", optional_json(r.objective)},
          {"final_iterate", r.final_iterate},
          {"annotations", r.annotations},
          {"converged", r.converged},
          {"acceptance_failures", r.acceptance_failures},
          {"passed", r.passed()}};
}

std::filesystem::path trace_directory(const ProblemSpec& spec) {
  if (const char* env = std::getenv("OPSPLIT_TRACE_DIR"); env && *env) return env;
  return spec.output.trace_dir;
}

void export_run(const ProblemSpec& spec, const RunResult& result, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto open = [&dir, &spec](const char* suffix) {
    std::ofstream out(dir / (spec.name + suffix), std::ios::binary);
    if (!out) throw ValidationError("output.trace_dir", "cannot write into " + dir.string());
    return out;
  };
  if (spec.output.csv) {
    auto out = open(".trace.csv");
    write_trace_csv(result.trace, out);
  }
  if (spec.output.json) {
    json meta{{"name", spec.name}, {"kind", spec.kind}, {"seed", spec.seed}, {"spec", to_json(spec)}};
    auto out = open(".trace.json");
    out << trace_to_json(result.trace, meta).dump(1) << '\n';
  }
  json report = to_json(result.report);
  auto out = open(".report.json");
  out << report.dump(2) << '\n';
}

RunReport run_spec(const ProblemSpec& spec) {
  RunResult result = execute_spec(spec);
  export_run(spec, result, trace_directory(spec));
  return std::move(result.report);
}

std::string summary_line(const RunReport& r) {
  std::ostringstream s;
  s << r.name << ": " << (r.passed() ? "ok" : "MISS") << " kind=" << r.kind << " seed=" << r.seed
    << " iterations=" << r.iterations << " residual=" << format_double(r.final_residual)
    << " stop=" << r.stop_reason << " fejer_violations=" << r.fejer_violations;
  if (r.reference_distance) s << " ref_dist=" << format_double(*r.reference_distance);
  if (!r.set_distances.empty()) {
    s << " max_set_dist="
      << format_double(*std::max_element(r.set_distances.begin(), r.set_distances.end()));
  }
  for (const auto& f : r.acceptance_failures) s << " [" << f << "]";
  return s.str();
}

json to_json(const ComparisonReport& r) {
  auto side = [](const ComparisonSide& s) {
    return json{{"label", s.label},
                {"lambda_rule", s.lambda_rule},
                {"iterations", s.iterations},
                {"reached", s.reached},
                {"final_residual", s.final_residual}};
  };
  return {{"name", r.name},
          {"kind", r.kind},
          {"residual_target", r.residual_target},
          {"baseline", side(r.baseline)},
          {"extended", side(r.extended)},
          {"ratio", optional_json(r.ratio)}};
}

ComparisonReport compare_relaxation(const ProblemSpec& spec) {
  ProblemSpec base = spec;
  if (!base.schedule.eps) base.schedule.eps = 0.1;
  base.schedule.mode = "extended";
  base.schedule.lambda = RuleSpec{"constant", 1.0, 1.0, {}, false};
  Prepared p = prepare(base);

  ComparisonReport r;
  r.name = spec.name;
  r.kind = spec.kind;
  r.residual_target = spec.stop.residual_tolerance > 0.0 ? spec.stop.residual_tolerance : 1e-8;

  auto run_side = [&](ComparisonSide& side) {
    const IterationTrace t = run_prepared(p, base, r.residual_target);
    side.iterations = t.iterations;
    side.reached = t.stop_reason == StopReason::residual;
    side.final_residual = t.final_residual;
  };

  if (p.engine == Engine::strings) {
    const Alpha legacy = string_averaging_constant_legacy(p.string_alphas, *p.weights);
    const double legacy_cap = relaxation_ranges(legacy, *p.eps).extended.value;
    const double sharp_cap = relaxation_ranges(*p.alpha, *p.eps).extended.value;
    set_lambdas(p, RuleSpec{"constant", legacy_cap, 1.0, {}, false}, base.stop.max_iterations);
    r.baseline = {"legacy_constant", "constant " + format_double(legacy_cap)};
    run_side(r.baseline);
    set_lambdas(p, RuleSpec{"constant", sharp_cap, 1.0, {}, false}, base.stop.max_iterations);
    r.extended = {"sharp_constant", "constant " + format_double(sharp_cap)};
    run_side(r.extended);
  } else {
    r.baseline = {"classical", "constant 1"};
    run_side(r.baseline);
    set_lambdas(p, max_rule(), base.stop.max_iterations);
    r.extended = {"extended", "max"};
    run_side(r.extended);
  }
  if (r.extended.iterations > 0) {
    r.ratio = static_cast<double>(r.baseline.iterations) / static_cast<double>(r.extended.iterations);
  }
  return r;
}

// ---------------------------------------------------------------------------

std::vector<ProblemSpec> fixture_specs() {
  std::vector<ProblemSpec> out;
  auto splitting = [](std::string name, std::string kind) {
    ProblemSpec s;
    s.name = std::move(name);
    s.kind = std::move(kind);
    s.schedule.mode = "extended";
    s.schedule.eps = 0.1;
    return s;
  };

  for (const char* variant : {"l1", "box"}) {
    ProblemSpec s = splitting(std::string("scalar_") + variant, "scalar_fixture");
    s.scalar_fixture = ScalarSpec{variant};
    s.stop = {200, 1e-13};
    s.acceptance.max_reference_distance = 1e-10;
    out.push_back(s);
  }
  {
    ProblemSpec s = splitting("scalar_l1_errors", "scalar_fixture");
    s.scalar_fixture = ScalarSpec{"l1"};
    s.schedule.errors = {"power", 1.0, 2.0};
    s.stop = {20000, 0.0};
    s.acceptance.max_reference_distance = 1e-4;
    out.push_back(s);
  }
  {
    ProblemSpec s = splitting("lasso_extended", "lasso");
    s.lasso = LassoSpec{};
    s.schedule.lambda = RuleSpec{"constant", 1.44, 1.0, {}, false};
    s.stop = {200000, 1e-11};
    s.acceptance.max_reference_distance = 1e-6;
    out.push_back(s);
    s.name = "lasso_classical";
    s.schedule.lambda = RuleSpec{"constant", 1.0, 1.0, {}, false};
    out.push_back(s);
    s.name = "lasso_alternating_steps";
    s.schedule.gamma = RuleSpec{"cycle", 1.0, 1.0, {0.8, 1.5 / 1.1}, true};
    out.push_back(s);
    s.name = "lasso_boundary";
    s.schedule.gamma = RuleSpec{"constant", 2.0 / 1.1, 1.0, {}, true};
    s.schedule.lambda = max_rule();
    out.push_back(s);
  }
  {
    ProblemSpec s = splitting("monotone_linear", "monotone_linear");
    s.monotone_linear = MonotoneLinearSpec{{{1.0, 2.0}, {-2.0, 1.0}}, {1.0, 1.0}};
    s.schedule.lambda = max_rule();
    s.stop = {5000, 1e-12};
    s.acceptance.max_reference_distance = 1e-10;
    out.push_back(s);
  }
  {
    ProblemSpec s;
    s.name = "feasibility_strings";
    s.kind = "feasibility";
    s.feasibility = FeasibilitySpec{};
    s.schedule.lambda = RuleSpec{"constant", 1.6, 1.0, {}, false};
    s.stop = {5000, 1e-12};
    s.acceptance.max_set_distance = 1e-8;
    out.push_back(s);
    s.name = "feasibility_composed";
    s.feasibility->method = "composed";
    s.schedule.mode = "extended";
    s.schedule.eps = 0.1;
    s.schedule.lambda = max_rule();
    out.push_back(s);
  }
  return out;
}

}  // namespace opsplit

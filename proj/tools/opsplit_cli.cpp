// opsplit: command-line front end for the averagedness constants and the bench runner.
//
// Exit codes: 0 success, 2 validation failure, 3 convergence-target miss,
// 4 numerical failure.

#include <CLI11.hpp>
#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "opsplit/bench.hpp"
#include "opsplit/calculus.hpp"
#include "opsplit/errors.hpp"
#include "opsplit/problem_spec.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace opsplit;

namespace {

constexpr int kOk = 0;
constexpr int kValidation = 2;
constexpr int kMiss = 3;
constexpr int kNumerical = 4;

std::vector<double> parse_list(const std::string& text, const char* what) {
  std::vector<double> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
    } catch (const std::logic_error&) {
      throw ValidationError(what, std::string(what) + ": cannot parse '" + item + "'");
    }
  }
  if (out.empty()) throw ValidationError(what, std::string(what) + ": empty list");
  return out;
}

json error_json(const ValidationError& e) {
  json j{{"error", "validation_failure"},
         {"bound", e.bound()},
         {"message", e.what()},
         {"value", e.value()},
         {"limit", e.limit()}};
  if (const auto* s = dynamic_cast<const ScheduleViolation*>(&e)) {
    j["index"] = s->index();
    j["lower"] = s->lower();
    j["upper"] = s->upper();
  }
  return j;
}

// Runs `body`, mapping library exceptions to exit codes and error JSON on `err`.
template <class F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const ValidationError& e) {
    err << error_json(e).dump() << '\n';
    return kValidation;
  } catch (const NumericalError& e) {
    err << json{{"error", "numerical_failure"}, {"message", e.what()}}.dump() << '\n';
    return kNumerical;
  } catch (const fs::filesystem_error& e) {
    err << json{{"error", "io_failure"}, {"message", e.what()}}.dump() << '\n';
    return kValidation;
  }
}

std::vector<Alpha> alphas_from(const std::string& text) {
  return make_alphas(parse_list(text, "alphas"));
}

int run_one(const fs::path& path, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const ProblemSpec spec = load_spec(path);
    const RunReport r = run_spec(spec);
    out << summary_line(r) << '\n';
    return r.passed() ? kOk : kMiss;
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Averaged-operator iterations and splitting benchmarks"};
  app.require_subcommand(1);

  auto* constants = app.add_subcommand("constants", "Averagedness constants as JSON");
  constants->require_subcommand(1);

  std::string alphas_text;
  auto* compose_cmd = constants->add_subcommand("compose", "Constant of a composition");
  compose_cmd->add_option("--alphas", alphas_text, "comma-separated constants in ]0,1[")->required();

  auto* compare_const = constants->add_subcommand("compare", "Sharp constant against the older bounds");
  compare_const->add_option("--alphas", alphas_text, "comma-separated constants in ]0,1[")->required();

  double beta = 0.0, gamma = 0.0, eps = 0.0;
  auto* fb_cmd = constants->add_subcommand("fb", "Forward-backward constant and relaxation bound");
  fb_cmd->add_option("--beta", beta, "cocoercivity constant")->required();
  fb_cmd->add_option("--gamma", gamma, "step size")->required();
  fb_cmd->add_option("--eps", eps, "safety margin")->required();

  std::string strings_text, weights_text;
  auto* strings_cmd = constants->add_subcommand("strings", "String-averaging constants");
  strings_cmd->add_option("--strings", strings_text, "strings separated by ';', constants by ','")
      ->required();
  strings_cmd->add_option("--weights", weights_text, "comma-separated weights (default uniform)");

  std::string spec_path;
  auto* run_cmd = app.add_subcommand("run", "Run a problem spec and export its trace");
  run_cmd->add_option("spec", spec_path, "spec JSON file")->required();

  auto* cmp_cmd = app.add_subcommand("compare", "Classical against extended relaxation");
  cmp_cmd->add_option("spec", spec_path, "spec JSON file")->required();

  std::string dir;
  unsigned jobs = 1;
  auto* batch_cmd = app.add_subcommand("batch", "Run every *.json spec in a directory");
  batch_cmd->add_option("dir", dir, "spec directory")->required();
  batch_cmd->add_option("--jobs,-j", jobs, "concurrent runs")->check(CLI::PositiveNumber);

  auto* fixtures_cmd = app.add_subcommand("fixtures", "Write the shipped fixture specs");
  fixtures_cmd->add_option("dir", dir, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kValidation;
  }

  if (*compose_cmd) {
    return guarded(std::cerr, [&] {
      const auto a = alphas_from(alphas_text);
      std::cout << json{{"alphas", parse_list(alphas_text, "alphas")},
                        {"phi", compose_many_closed(a).value()}}
                       .dump()
                << '\n';
      return kOk;
    });
  }
  if (*compare_const) {
    return guarded(std::cerr, [&] {
      const auto a = alphas_from(alphas_text);
      json j{{"phi", compose_many_closed(a).value()}, {"phi_tilde", phi_tilde(a).value()}};
      j["phi_hat"] = a.size() == 2 ? json(phi_hat(a[0], a[1]).value()) : json(nullptr);
      std::cout << j.dump() << '\n';
      return kOk;
    });
  }
  if (*fb_cmd) {
    return guarded(std::cerr, [&] {
      const auto p = fb_parameters(beta, gamma, Epsilon(eps));
      std::cout << json{{"phi", p.phi.value()}, {"lambda_sup", p.lambda_sup}}.dump() << '\n';
      return kOk;
    });
  }
  if (*strings_cmd) {
    return guarded(std::cerr, [&] {
      std::vector<std::vector<Alpha>> strings;
      std::stringstream in(strings_text);
      std::string part;
      while (std::getline(in, part, ';')) strings.push_back(alphas_from(part));
      const Weights w = weights_text.empty() ? Weights::uniform(strings.size())
                                             : Weights(parse_list(weights_text, "weights"));
      std::cout << json{{"alpha", string_averaging_constant(strings, w).value()},
                        {"alpha_legacy", string_averaging_constant_legacy(strings, w).value()}}
                       .dump()
                << '\n';
      return kOk;
    });
  }
  if (*run_cmd) return run_one(spec_path, std::cout, std::cerr);
  if (*cmp_cmd) {
    return guarded(std::cerr, [&] {
      const auto r = compare_relaxation(load_spec(spec_path));
      std::cout << to_json(r).dump(2) << '\n';
      return r.baseline.reached && r.extended.reached ? kOk : kMiss;
    });
  }
  if (*fixtures_cmd) {
    return guarded(std::cerr, [&] {
      fs::create_directories(dir);
      for (const auto& spec : fixture_specs()) {
        std::ofstream(fs::path(dir) / (spec.name + ".json")) << to_json(spec).dump(2) << '\n';
      }
      return kOk;
    });
  }
  if (*batch_cmd) {
    std::vector<fs::path> files;
    std::error_code ec;
    for (const auto& entry : fs::directory_iterator(dir, ec)) {
      if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
    }
    if (ec) {
      std::cerr << json{{"error", "io_failure"}, {"message", ec.message()}}.dump() << '\n';
      return kValidation;
    }
    std::sort(files.begin(), files.end());
    std::vector<int> codes(files.size(), kOk);
    std::vector<std::string> outs(files.size()), errs(files.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t i = next++; i < files.size(); i = next++) {
        std::ostringstream out, err;
        codes[i] = run_one(files[i], out, err);
        outs[i] = out.str();
        errs[i] = err.str();
      }
    };
    std::vector<std::thread> pool;
    const std::size_t count = std::min<std::size_t>(std::max(1u, jobs), std::max<std::size_t>(1, files.size()));
    for (std::size_t t = 0; t < count; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    int worst = kOk;
    for (std::size_t i = 0; i < files.size(); ++i) {
      std::cout << outs[i];
      std::cerr << errs[i];
      worst = std::max(worst, codes[i]);
    }
    return worst;
  }
  return kOk;
}

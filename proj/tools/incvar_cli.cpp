// Command-line front end: dataset generation, trimmed fits, scenario sweeps,
// distribution distances, and a built-in self test.  Configs are JSON files
// with a versioned "schema" field; all randomness is seeded, so every command
// is reproducible given the same inputs.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "incvar/experiments.hpp"
#include "incvar/io.hpp"
#include "incvar/selftest.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string join_path(const std::string& prefix, const char* key) {
  return prefix.empty() ? std::string(key) : prefix + "." + key;
}

[[noreturn]] void fail_field(const std::string& path, const std::string& what) {
  throw std::invalid_argument("config field " + path + ": " + what);
}

const json& require_field(const json& obj, const std::string& prefix, const char* key) {
  const auto it = obj.find(key);
  if (it == obj.end()) fail_field(join_path(prefix, key), "is required");
  return *it;
}

double as_number(const json& v, const std::string& path) {
  if (!v.is_number()) fail_field(path, "expected a number");
  return v.get<double>();
}

int as_int(const json& v, const std::string& path) {
  if (!v.is_number_integer()) fail_field(path, "expected an integer");
  return v.get<int>();
}

std::uint64_t as_seed(const json& v, const std::string& path) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer()) {
    const auto s = v.get<std::int64_t>();
    if (s < 0) fail_field(path, "expected a nonnegative integer");
    return static_cast<std::uint64_t>(s);
  }
  fail_field(path, "expected a nonnegative integer");
}

bool as_bool(const json& v, const std::string& path) {
  if (!v.is_boolean()) fail_field(path, "expected true or false");
  return v.get<bool>();
}

std::string as_string(const json& v, const std::string& path) {
  if (!v.is_string()) fail_field(path, "expected a string");
  return v.get<std::string>();
}

double num_or(const json& obj, const std::string& prefix, const char* key, double dflt) {
  const auto it = obj.find(key);
  return it == obj.end() ? dflt : as_number(*it, join_path(prefix, key));
}

int int_or(const json& obj, const std::string& prefix, const char* key, int dflt) {
  const auto it = obj.find(key);
  return it == obj.end() ? dflt : as_int(*it, join_path(prefix, key));
}

bool bool_or(const json& obj, const std::string& prefix, const char* key, bool dflt) {
  const auto it = obj.find(key);
  return it == obj.end() ? dflt : as_bool(*it, join_path(prefix, key));
}

std::uint64_t seed_or(const json& obj, const std::string& prefix, const char* key,
                      std::uint64_t dflt) {
  const auto it = obj.find(key);
  return it == obj.end() ? dflt : as_seed(*it, join_path(prefix, key));
}

incvar::Vec as_number_array(const json& v, const std::string& path) {
  if (!v.is_array()) fail_field(path, "expected an array of numbers");
  incvar::Vec out;
  out.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    out.push_back(as_number(v[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

json load_config(const std::string& path, const char* expected_schema) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open config " + path);
  json j;
  try {
    j = json::parse(is);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(path + ": " + e.what());
  }
  if (!j.is_object())
    throw std::invalid_argument(path + ": top level must be a JSON object");
  const std::string schema = as_string(require_field(j, "", "schema"), "schema");
  if (schema != expected_schema)
    fail_field("schema", "expected \"" + std::string(expected_schema) + "\", got \"" +
                             schema + "\"");
  return j;
}

fs::path resolve_near(const std::string& rel, const fs::path& base_dir) {
  const fs::path p(rel);
  return p.is_absolute() ? p : base_dir / p;
}

void write_text_file(const fs::path& path, const std::string& body) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os << body;
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

incvar::ModelSpec parse_model(const json& obj, const std::string& prefix) {
  if (!obj.is_object()) fail_field(prefix, "expected an object");
  const std::string family =
      as_string(require_field(obj, prefix, "family"), join_path(prefix, "family"));
  const int p = int_or(obj, prefix, "p", 1);
  if (family == "linear") return incvar::ModelSpec::linear(p);
  if (family == "piecewise_affine")
    return incvar::ModelSpec::piecewise_affine(
        p, as_int(require_field(obj, prefix, "pos_pieces"), join_path(prefix, "pos_pieces")),
        as_int(require_field(obj, prefix, "neg_pieces"), join_path(prefix, "neg_pieces")));
  if (family == "polynomial")
    return incvar::ModelSpec::polynomial(
        p, as_int(require_field(obj, prefix, "degree"), join_path(prefix, "degree")));
  if (family == "exponential") return incvar::ModelSpec::exponential(p);
  if (family == "logarithmic") return incvar::ModelSpec::logarithmic(p);
  if (family == "power") return incvar::ModelSpec::power_law(p);
  if (family == "feedforward_nn") {
    const json& warr = require_field(obj, prefix, "widths");
    const std::string wpath = join_path(prefix, "widths");
    if (!warr.is_array()) fail_field(wpath, "expected an array of integers");
    std::vector<int> widths;
    for (std::size_t i = 0; i < warr.size(); ++i)
      widths.push_back(as_int(warr[i], wpath + "[" + std::to_string(i) + "]"));
    incvar::Activation act = incvar::Activation::relu;
    const auto ait = obj.find("activation");
    if (ait != obj.end()) {
      const std::string name = as_string(*ait, join_path(prefix, "activation"));
      if (name == "relu") act = incvar::Activation::relu;
      else if (name == "leaky_relu") act = incvar::Activation::leaky_relu;
      else if (name == "identity") act = incvar::Activation::identity;
      else fail_field(join_path(prefix, "activation"),
                      "expected one of relu, leaky_relu, identity");
    }
    return incvar::ModelSpec::feedforward(p, std::move(widths), act,
                                          num_or(obj, prefix, "leaky_slope", 0.01));
  }
  fail_field(join_path(prefix, "family"),
             "expected one of linear, piecewise_affine, polynomial, exponential, "
             "logarithmic, power, feedforward_nn");
}

incvar::LossSpec parse_loss(const json& obj, const std::string& prefix) {
  if (!obj.is_object()) fail_field(prefix, "expected an object");
  const std::string kind =
      as_string(require_field(obj, prefix, "kind"), join_path(prefix, "kind"));
  if (kind == "absolute") return incvar::LossSpec::absolute();
  if (kind == "squared") return incvar::LossSpec::squared();
  if (kind == "huber")
    return incvar::LossSpec::huber(
        as_number(require_field(obj, prefix, "delta"), join_path(prefix, "delta")));
  fail_field(join_path(prefix, "kind"), "expected one of absolute, squared, huber");
}

incvar::TrimLevels parse_levels(const json& obj, const std::string& prefix) {
  if (!obj.is_object()) fail_field(prefix, "expected an object");
  const double alpha =
      as_number(require_field(obj, prefix, "alpha"), join_path(prefix, "alpha"));
  const double beta =
      as_number(require_field(obj, prefix, "beta"), join_path(prefix, "beta"));
  try {
    return incvar::TrimLevels(alpha, beta);
  } catch (const std::domain_error& e) {
    fail_field(prefix, e.what());
  }
}

incvar::SolveConfig parse_solver(const json& parent, const std::string& prefix) {
  incvar::SolveConfig cfg;
  const auto it = parent.find("solver");
  if (it == parent.end()) return cfg;
  const json& obj = *it;
  const std::string path = join_path(prefix, "solver");
  if (!obj.is_object()) fail_field(path, "expected an object");
  cfg.restarts = int_or(obj, path, "restarts", cfg.restarts);
  cfg.max_outer_iters = int_or(obj, path, "max_outer_iters", cfg.max_outer_iters);
  cfg.outer_tol = num_or(obj, path, "outer_tol", cfg.outer_tol);
  cfg.inner_max_iters = int_or(obj, path, "inner_max_iters", cfg.inner_max_iters);
  cfg.inner_tol = num_or(obj, path, "inner_tol", cfg.inner_tol);
  cfg.init_scale = num_or(obj, path, "init_scale", cfg.init_scale);
  cfg.seed = seed_or(obj, path, "seed", cfg.seed);
  cfg.smoothing_eps = num_or(obj, path, "smoothing_eps", cfg.smoothing_eps);
  return cfg;
}

incvar::Scenario parse_scenario(const std::string& name) {
  if (name == "contamination_sweep") return incvar::Scenario::contamination_sweep;
  if (name == "level_sweep_beta") return incvar::Scenario::level_sweep_beta;
  if (name == "level_sweep_alpha") return incvar::Scenario::level_sweep_alpha;
  if (name == "perturbation_sweep") return incvar::Scenario::perturbation_sweep;
  fail_field("scenario",
             "expected one of contamination_sweep, level_sweep_beta, "
             "level_sweep_alpha, perturbation_sweep");
}

struct CommonArgs {
  std::string config_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
};

int effective_jobs(const CommonArgs& args) {
  int jobs = 1;
  if (args.jobs) {
    jobs = *args.jobs;
  } else if (const char* env = std::getenv("INCVAR_JOBS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1)
      throw std::invalid_argument(std::string("INCVAR_JOBS: expected a positive "
                                              "integer, got \"") + env + "\"");
    jobs = static_cast<int>(v);
  }
  if (jobs < 1) throw std::invalid_argument("--jobs must be >= 1");
  return jobs;
}

fs::path prepare_out_dir(const CommonArgs& args) {
  const fs::path out(args.out_dir);
  fs::create_directories(out);
  return out;
}

int cmd_fit(const CommonArgs& args) {
  const json cfg = load_config(args.config_path, "incvar-fit-v1");
  const fs::path config_dir = fs::path(args.config_path).parent_path();

  const std::string dataset_rel =
      as_string(require_field(cfg, "", "dataset"), "dataset");
  const incvar::ModelSpec spec = parse_model(require_field(cfg, "", "model"), "model");
  const incvar::LossSpec loss = parse_loss(require_field(cfg, "", "loss"), "loss");
  const incvar::TrimLevels levels =
      parse_levels(require_field(cfg, "", "levels"), "levels");
  incvar::SolveConfig solver = parse_solver(cfg, "");
  if (args.seed) solver.seed = *args.seed;

  const incvar::DataSet data =
      incvar::read_dataset_csv(resolve_near(dataset_rel, config_dir).string());

  const incvar::SolveReport report =
      incvar::fit_incvar(data, spec, loss, levels, solver, effective_jobs(args));

  json out;
  out["schema"] = "incvar-fit-report-v1";
  out["version"] = incvar::kVersion;
  out["best_objective"] = report.best_objective;
  out["best_theta"] = report.best_theta;
  out["best_restart"] = report.best_restart;
  out["termination"] = incvar::termination_name(report.termination);
  json restarts = json::array();
  for (const auto& trace : report.restarts) {
    json tr;
    tr["objective"] = trace.objective;
    tr["termination"] = incvar::termination_name(trace.termination);
    tr["objectives"] = trace.objectives;
    tr["theta"] = trace.theta;
    restarts.push_back(std::move(tr));
  }
  out["restarts"] = std::move(restarts);

  const fs::path report_path = prepare_out_dir(args) / "fit_report.json";
  write_text_file(report_path, out.dump(2) + "\n");
  std::cout << incvar::format_g17(report.best_objective) << "\n";
  std::cerr << "report written to " << report_path.string() << "\n";
  return 0;
}

int cmd_sweep(const CommonArgs& args) {
  const json j = load_config(args.config_path, "incvar-sweep-v1");

  incvar::ScenarioConfig cfg;
  cfg.scenario = parse_scenario(as_string(require_field(j, "", "scenario"), "scenario"));
  cfg.grid = as_number_array(require_field(j, "", "grid"), "grid");
  cfg.n_nominal = int_or(j, "", "n_nominal", cfg.n_nominal);
  cfg.n_contam = int_or(j, "", "n_contam", cfg.n_contam);
  cfg.gamma_cvar = num_or(j, "", "gamma_cvar", cfg.gamma_cvar);
  cfg.contamination_eps = num_or(j, "", "contamination_eps", cfg.contamination_eps);
  cfg.noise_sigma = num_or(j, "", "noise_sigma", cfg.noise_sigma);
  cfg.master_seed = seed_or(j, "", "master_seed", cfg.master_seed);
  cfg.record_timing = bool_or(j, "", "record_timing", cfg.record_timing);
  if (j.contains("levels")) cfg.levels = parse_levels(j["levels"], "levels");
  cfg.solver = parse_solver(j, "");
  if (args.seed) cfg.master_seed = *args.seed;
  cfg.validate();

  const incvar::SweepResult result = incvar::run_sweep(cfg, effective_jobs(args));

  const fs::path out = prepare_out_dir(args);
  incvar::emit_csv(result, (out / "sweep.csv").string());
  incvar::emit_svg(result, (out / "sweep.svg").string());

  json meta;
  meta["schema"] = "incvar-sweep-meta-v1";
  meta["version"] = result.version;
  meta["scenario"] = incvar::scenario_name(cfg.scenario);
  meta["grid_param"] = incvar::grid_param_name(cfg.scenario);
  meta["grid"] = cfg.grid;
  meta["master_seed"] = cfg.master_seed;
  meta["rows"] = result.rows.size();
  write_text_file(out / "sweep_meta.json", meta.dump(2) + "\n");

  std::cerr << "sweep results written to " << (out / "sweep.csv").string() << "\n";
  return 0;
}

int cmd_prokhorov(const CommonArgs& args) {
  const json cfg = load_config(args.config_path, "incvar-prokhorov-v1");
  const fs::path config_dir = fs::path(args.config_path).parent_path();
  const incvar::EmpiricalCloud a = incvar::read_cloud_csv(
      resolve_near(as_string(require_field(cfg, "", "cloud_a"), "cloud_a"), config_dir)
          .string());
  const incvar::EmpiricalCloud b = incvar::read_cloud_csv(
      resolve_near(as_string(require_field(cfg, "", "cloud_b"), "cloud_b"), config_dir)
          .string());

  const auto [dist, cert] = incvar::prokhorov_distance(a, b);

  json out;
  out["schema"] = "incvar-prokhorov-report-v1";
  out["version"] = incvar::kVersion;
  out["distance"] = dist;
  out["unmatched_fraction"] = cert.unmatched_fraction;
  out["matching"] = cert.matching;
  write_text_file(prepare_out_dir(args) / "prokhorov_report.json", out.dump(2) + "\n");

  std::cout << incvar::format_g17(dist) << "\n";
  return 0;
}

int cmd_gen(const CommonArgs& args) {
  const json cfg = load_config(args.config_path, "incvar-gen-v1");
  const std::string generator =
      as_string(require_field(cfg, "", "generator"), "generator");
  const double sigma = num_or(cfg, "", "noise_sigma", 0.05);
  std::uint64_t seed = seed_or(cfg, "", "seed", 0);
  if (args.seed) seed = *args.seed;

  incvar::DataSet data;
  if (generator == "nominal") {
    data = incvar::gen_nominal(seed, int_or(cfg, "", "n", 200), sigma);
  } else if (generator == "contamination") {
    data = incvar::gen_contamination(seed, int_or(cfg, "", "n", 200), sigma);
  } else if (generator == "perturbed") {
    const int k = as_int(require_field(cfg, "", "k"), "k");
    data = incvar::gen_perturbed(k, seed, int_or(cfg, "", "n", 1000), sigma);
  } else {
    fail_field("generator", "expected one of nominal, contamination, perturbed");
  }

  std::string filename = generator + ".csv";
  if (cfg.contains("output")) filename = as_string(cfg["output"], "output");
  const fs::path path = prepare_out_dir(args) / filename;
  incvar::write_dataset_csv(data, path.string());
  std::cout << path.string() << "\n";
  return 0;
}

int cmd_selftest() {
  const incvar::SelfTestResult result = incvar::run_selftest(std::cout);
  return result.ok() ? 0 : 1;
}

void add_common(CLI::App* cmd, CommonArgs& args, bool needs_config) {
  auto* config = cmd->add_option("-c,--config", args.config_path,
                                 "JSON config file for this command");
  if (needs_config) config->required();
  cmd->add_option("-o,--out", args.out_dir, "output directory (created if missing)");
  cmd->add_option_function<std::uint64_t>(
      "--seed", [&args](const std::uint64_t& v) { args.seed = v; },
      "override the config's seed");
  cmd->add_option_function<int>(
         "--jobs", [&args](const int& v) { args.jobs = v; },
         "worker threads (default: INCVAR_JOBS or 1)")
      ->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"trimmed conditional-value-at-risk regression toolkit"};
  app.require_subcommand(1);

  CommonArgs fit_args, sweep_args, prok_args, gen_args;
  CLI::App* fit = app.add_subcommand("fit", "fit a model to a dataset CSV");
  add_common(fit, fit_args, true);
  CLI::App* sweep = app.add_subcommand("sweep", "run a scenario sweep, write CSV + SVG");
  add_common(sweep, sweep_args, true);
  CLI::App* prok =
      app.add_subcommand("prokhorov", "distance between two point-cloud CSVs");
  add_common(prok, prok_args, true);
  CLI::App* gen = app.add_subcommand("gen", "generate a benchmark dataset CSV");
  add_common(gen, gen_args, true);
  app.add_subcommand("selftest", "run the built-in smoke checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  try {
    if (fit->parsed()) return cmd_fit(fit_args);
    if (sweep->parsed()) return cmd_sweep(sweep_args);
    if (prok->parsed()) return cmd_prokhorov(prok_args);
    if (gen->parsed()) return cmd_gen(gen_args);
    return cmd_selftest();
  } catch (const incvar::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

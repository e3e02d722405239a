// Command-line front end: solve, sweep, validate and dump-model.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "hostcap/config.hpp"
#include "hostcap/error.hpp"
#include "hostcap/montecarlo.hpp"
#include "hostcap/study.hpp"
#include "hostcap/wccvar.hpp"

namespace fs = std::filesystem;
using namespace hostcap;

namespace {

enum Exit : int {
  kOk = 0,
  kUsage = 1,
  kInfeasible = 2,
  kSolverFailure = 3,
  kConservatismBreach = 4,
};

constexpr const char* kExitHelp =
    "Exit codes:\n"
    "  0  success\n"
    "  1  usage, parse or validation error (bad flags, config or data files)\n"
    "  2  infeasible: no capacity passes the chance constraint\n"
    "  3  solver failure\n"
    "  4  validate: empirical violation above epsilon + 99% CI for some family\n";

struct Overrides {
  std::string config = "data/config.json";
  std::optional<double> epsilon;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  bool screen = false;
};

RunConfig effective_config(const Overrides& o) {
  RunConfig c = load_config(o.config);
  if (o.epsilon) c.iteration.epsilon = *o.epsilon;
  if (o.out) c.output_dir = *o.out;
  if (o.seed) c.seed = *o.seed;
  if (o.workers) c.workers = *o.workers;
  if (o.screen) c.iteration.screen_constraints = true;
  c.validate();
  return c;
}

std::ofstream open_output(const RunConfig& c, const std::string& name, fs::path& path) {
  fs::create_directories(c.output_dir);
  path = c.output_dir / name;
  std::ofstream f(path);
  if (!f) throw ParseError("cannot write " + path.string());
  return f;
}

int cmd_solve(const Overrides& o) {
  const RunConfig c = effective_config(o);
  const Study study = load_study(c);
  const EvaluationResult r = iterate(build_problem(study), c.iteration);
  fs::path path;
  {
    std::ofstream f = open_output(c, "result.json", path);
    write_result_json(f, study.net, r, c.iteration.epsilon);
  }
  if (r.status != EvaluationStatus::optimal) {
    std::cerr << "solve: " << to_string(r.status) << ": " << r.message << "\n";
    return r.status == EvaluationStatus::infeasible ? kInfeasible : kSolverFailure;
  }
  std::cout << "status optimal, 1-epsilon = " << 1.0 - c.iteration.epsilon << ", "
            << r.iterations << " iterations, " << r.seconds << " s\n";
  print_capacity_table(std::cout, study.net, r.x);
  if (!r.message.empty()) std::cerr << "note: " << r.message << "\n";
  if (!r.screening_verified)
    std::cerr << "warning: screened rows failed the post-check; rerun without screening\n";
  std::cout << "result written to " << path.string() << "\n";
  return kOk;
}

int cmd_sweep(const Overrides& o) {
  const RunConfig c = effective_config(o);
  if (c.sweep_axes.empty()) throw InvalidArgument("config has no sweep axes");
  for (const auto& g : c.sweep_grids)
    if (g.empty()) throw InvalidArgument("sweep grid is empty");
  const Study study = load_study(c);
  const auto rows = sweep(c.sweep_axes, c.sweep_grids, study, c.iteration, c.workers);
  fs::path path;
  {
    std::ofstream f = open_output(c, "sweep.csv", path);
    write_sweep_csv(f, rows);
  }
  write_sweep_csv(std::cout, rows);
  for (const SweepRow& r : rows)
    if (!r.message.empty()) std::cerr << "note: point " << r.axis_values[0] << ": " << r.message << "\n";
  return kOk;
}

int cmd_validate(const Overrides& o, const std::string& result_file,
                 std::optional<std::int64_t> samples) {
  RunConfig c = effective_config(o);
  if (samples) {
    if (*samples < 1) throw InvalidArgument("--samples must be >= 1");
    c.samples = *samples;
  }
  const Study study = load_study(c);
  const StoredResult stored = read_result_json(result_file, study.net);
  if (stored.status != "optimal")
    throw InvalidArgument("result file holds no optimal capacities (status " + stored.status + ")");
  const double eps = o.epsilon ? *o.epsilon : stored.epsilon;
  const ProblemData data = build_problem(study);

  fs::path path;
  std::ofstream f = open_output(c, "validation.json", path);
  f << "[\n";
  bool all_pass = true;
  for (std::size_t k = 0; k < c.families.size(); ++k) {
    const SampleDistribution dist = build_distribution(study.spec, c.families[k]);
    ViolationOptions opt;
    opt.workers = c.workers;
    const ViolationReport rep = empirical_violation(stored.x, data.ineqs, dist, c.samples, c.seed, opt);
    write_json(f, rep, eps);
    if (k + 1 < c.families.size()) f << ",\n";
    const bool pass = rep.passes(eps);
    all_pass = all_pass && pass;
    std::cout << to_string(rep.family) << ": " << rep.violations << "/" << rep.samples
              << " joint violations, p = " << rep.probability << " (99% CI " << rep.ci_low
              << " .. " << rep.ci_high << "), epsilon " << eps << " -> "
              << (pass ? "pass" : "BREACH") << "\n";
  }
  f << "]\n";
  std::cout << "report written to " << path.string() << "\n";
  std::cout << "note: these distributions are spot checks inside the moment set, not the worst case\n";
  return all_pass ? kOk : kConservatismBreach;
}

int cmd_dump(const Overrides& o) {
  const RunConfig c = effective_config(o);
  const Study study = load_study(c);
  const ProblemData data = build_problem(study);
  const auto model = assemble_model_A(data, Eigen::VectorXd::Ones(data.constraint_count()),
                                      c.iteration.epsilon);
  fs::path path;
  {
    std::ofstream f = open_output(c, "model_a.txt", path);
    model.problem.dump(f);
  }
  std::cout << "model A (gamma = 1): " << model.problem.var_count() << " variables, "
            << model.problem.rows().size() << " rows, " << model.problem.blocks().size()
            << " PSD blocks -> " << path.string() << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint PV / EV charging hosting capacity under a distributionally robust "
               "joint chance constraint"};
  app.footer(kExitHelp);
  app.require_subcommand(1);

  Overrides o;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "run configuration (JSON)")->capture_default_str();
    sub->add_option("--epsilon", o.epsilon, "risk level, 1 - confidence")
        ->check(CLI::Range(0.0, 1.0));
    sub->add_option("--out", o.out, "output directory");
    sub->add_option("--seed", o.seed, "sampling seed");
    sub->add_option("--workers", o.workers, "worker threads")->check(CLI::PositiveNumber);
    sub->add_flag("--screen-constraints", o.screen,
                  "drop rows that cannot bind inside the nominal capacity box");
    sub->footer(kExitHelp);
  };

  auto* solve = app.add_subcommand("solve", "evaluate hosting capacity, write result.json");
  auto* sweep_cmd = app.add_subcommand("sweep", "re-solve over the config's sweep grid, write sweep.csv");
  auto* validate = app.add_subcommand("validate", "Monte Carlo check of a result against epsilon");
  auto* dump = app.add_subcommand("dump-model", "write model A at gamma = 1 in text form");
  for (auto* s : {solve, sweep_cmd, validate, dump}) add_common(s);
  std::string result_file;
  std::optional<std::int64_t> samples;
  validate->add_option("result", result_file, "result.json from solve")->required();
  validate->add_option("--samples", samples, "samples per family");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*solve) return cmd_solve(o);
    if (*sweep_cmd) return cmd_sweep(o);
    if (*validate) return cmd_validate(o, result_file, samples);
    if (*dump) return cmd_dump(o);
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kSolverFailure;
  }
  return kUsage;
}

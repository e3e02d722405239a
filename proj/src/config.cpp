#include "hostcap/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "hostcap/error.hpp"

namespace hostcap {

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::set<std::string>& known,
                    const std::string& where) {
  for (const auto& [key, value] : obj.items())
    if (!known.count(key)) throw ParseError("unknown key '" + key + "' in " + where);
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

}  // namespace

RunConfig parse_config(const std::string& json_text, const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ParseError(e.what());
  }
  RunConfig c;
  try {
    if (!doc.is_object()) throw ParseError("config must be a JSON object");
    reject_unknown(doc,
                   {"network", "profiles", "uncertainty", "epsilon", "power_factor",
                    "iteration", "solver", "sweep", "validation", "output_dir", "workers"},
                   "config");
    c.network = resolve(base_dir, doc.at("network").get<std::string>());
    c.profiles = resolve(base_dir, doc.at("profiles").get<std::string>());
    c.uncertainty = resolve(base_dir, doc.at("uncertainty").get<std::string>());
    c.iteration.epsilon = doc.value("epsilon", c.iteration.epsilon);
    if (doc.contains("power_factor")) {
      const json& pf = doc["power_factor"];
      reject_unknown(pf, {"pv", "ev"}, "power_factor");
      c.pv_power_factor = pf.value("pv", c.pv_power_factor);
      c.ev_power_factor = pf.value("ev", c.ev_power_factor);
    }
    if (doc.contains("iteration")) {
      const json& it = doc["iteration"];
      reject_unknown(it, {"tol", "max_iter", "gamma_floor", "screen_constraints"}, "iteration");
      c.iteration.tol = it.value("tol", c.iteration.tol);
      c.iteration.max_iter = it.value("max_iter", c.iteration.max_iter);
      c.iteration.gamma_floor = it.value("gamma_floor", c.iteration.gamma_floor);
      c.iteration.screen_constraints =
          it.value("screen_constraints", c.iteration.screen_constraints);
    }
    if (doc.contains("solver")) {
      const json& s = doc["solver"];
      reject_unknown(s, {"gap_tol", "feas_tol", "max_iter"}, "solver");
      c.iteration.solver.gap_tol = s.value("gap_tol", c.iteration.solver.gap_tol);
      c.iteration.solver.feas_tol = s.value("feas_tol", c.iteration.solver.feas_tol);
      c.iteration.solver.max_iter = s.value("max_iter", c.iteration.solver.max_iter);
    }
    if (doc.contains("sweep")) {
      const json& s = doc["sweep"];
      reject_unknown(s, {"axes", "grids"}, "sweep");
      for (const auto& a : s.at("axes")) c.sweep_axes.push_back(parse_axis(a.get<std::string>()));
      c.sweep_grids = s.at("grids").get<std::vector<std::vector<double>>>();
    }
    if (doc.contains("validation")) {
      const json& v = doc["validation"];
      reject_unknown(v, {"families", "samples", "seed"}, "validation");
      if (v.contains("families")) {
        c.families.clear();
        for (const auto& f : v["families"]) c.families.push_back(parse_family(f.get<std::string>()));
      }
      c.samples = v.value("samples", c.samples);
      c.seed = v.at("seed").get<std::uint64_t>();
    }
    if (doc.contains("output_dir"))
      c.output_dir = resolve(base_dir, doc["output_dir"].get<std::string>());
    c.workers = doc.value("workers", c.workers);
  } catch (const json::exception& e) {
    throw ParseError(e.what());
  } catch (const InvalidArgument& e) {
    throw ParseError(e.what());
  }
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path());
}

void RunConfig::validate() const {
  const double eps = iteration.epsilon;
  if (!(eps > 0.0 && eps < 1.0)) throw ValidationError("epsilon must lie in (0, 1)");
  if (!(iteration.tol > 0.0)) throw ValidationError("iteration tol must be positive");
  if (iteration.max_iter < 1) throw ValidationError("iteration max_iter must be >= 1");
  if (samples < 1) throw ValidationError("validation samples must be >= 1");
  if (workers < 1) throw ValidationError("workers must be >= 1");
  for (double pf : {pv_power_factor, ev_power_factor})
    if (!(pf > 0.0 && pf <= 1.0)) throw ValidationError("power factors must lie in (0, 1]");
  if (sweep_axes.size() != sweep_grids.size())
    throw ValidationError("sweep needs one grid per axis");
  for (const auto& p : {network, profiles, uncertainty})
    if (!std::filesystem::exists(p)) throw ValidationError("missing file " + p.string());
}

Study load_study(const RunConfig& config) {
  NetworkModel net = load_network(config.network);
  ProfileSet profiles = load_profiles(config.profiles, std::acos(config.pv_power_factor),
                                      std::acos(config.ev_power_factor));
  profiles.validate(net.slot_count());
  UncertaintySpec spec = load_uncertainty(config.uncertainty);
  spec.validate();
  return Study{std::move(net), std::move(profiles), std::move(spec)};
}

}  // namespace hostcap

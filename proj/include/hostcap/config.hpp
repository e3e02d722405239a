#pragma once

// Run configuration: one JSON file naming the three data files plus the
// numeric settings. Relative paths are resolved against the file's folder.
//
//   {
//     "network": "ieee33.json", "profiles": "profiles24.csv",
//     "uncertainty": "uncertainty.json",
//     "epsilon": 0.05,
//     "power_factor": {"pv": 0.95, "ev": 0.97},
//     "iteration": {"tol": 1e-5, "max_iter": 30, "gamma_floor": 1e-6,
//                   "screen_constraints": false},
//     "solver": {"gap_tol": 1e-7, "feas_tol": 1e-7, "max_iter": 200},
//     "sweep": {"axes": ["epsilon"], "grids": [[0.2, 0.1, 0.05]]},
//     "validation": {"families": ["two_point"], "samples": 100000, "seed": 7},
//     "output_dir": "out", "workers": 1
//   }

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hostcap/montecarlo.hpp"
#include "hostcap/study.hpp"
#include "hostcap/wccvar.hpp"

namespace hostcap {

struct RunConfig {
  std::filesystem::path network;
  std::filesystem::path profiles;
  std::filesystem::path uncertainty;
  double pv_power_factor = 0.95;
  double ev_power_factor = 0.97;
  IterationSettings iteration;  // epsilon lives here

  std::vector<SweepAxis> sweep_axes;
  std::vector<std::vector<double>> sweep_grids;

  std::vector<DistributionFamily> families = all_families();
  std::int64_t samples = 100000;
  std::uint64_t seed = 1;

  std::filesystem::path output_dir = "out";
  int workers = 1;

  /// Throws ValidationError on out-of-range values or missing files.
  void validate() const;
};

/// Throws ParseError on malformed JSON or unknown keys.
RunConfig parse_config(const std::string& json_text,
                       const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);

/// Loads and validates the network, profiles and uncertainty model.
Study load_study(const RunConfig& config);

}  // namespace hostcap

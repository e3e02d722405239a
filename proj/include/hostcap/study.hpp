#pragma once

// One capacity study: a network, its profiles and the uncertainty model,
// turned into the data the WC-CVaR iteration consumes.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hostcap/detmodel.hpp"
#include "hostcap/netmodel.hpp"
#include "hostcap/uncertainty.hpp"
#include "hostcap/wccvar.hpp"

namespace hostcap {

struct Study {
  NetworkModel net;
  ProfileSet profiles;
  UncertaintySpec spec;
};

/// Builds injections, inequalities, their uncertain form and the objective.
ProblemData build_problem(const Study& study);

struct CapacityTotals {
  double pv_kw = 0.0;
  double ev_kw = 0.0;
};

CapacityTotals capacity_totals(const NetworkModel& net, const Eigen::VectorXd& x);

/// Sets the mean (or variance) of every component mapped to `category`.
void set_category_mean(UncertaintySpec& spec, Category category, double mean);
void set_category_variance(UncertaintySpec& spec, Category category, double variance);

/// EvaluationResult as JSON: status, capacities per bus (kW and MW),
/// objective, gamma, trace, certificate scalars. Timing goes under
/// "metadata" so that repeated runs differ only there.
void write_result_json(std::ostream& out, const NetworkModel& net,
                       const EvaluationResult& result, double epsilon);

struct StoredResult {
  std::string status;
  double epsilon = 0.0;
  Eigen::VectorXd x;  // kW, decision order
};

/// Reads back what write_result_json wrote. Throws ParseError.
StoredResult read_result_json(const std::filesystem::path& path, const NetworkModel& net);

/// Per-bus capacity table in MW with two decimals.
void print_capacity_table(std::ostream& out, const NetworkModel& net,
                          const Eigen::VectorXd& x);

}  // namespace hostcap

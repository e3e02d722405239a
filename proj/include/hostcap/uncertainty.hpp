#pragma once

// Random perturbation vector xi: its box support, its first and second
// moments, and the canonical uncertain form of the capacity inequalities.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hostcap/detmodel.hpp"

namespace hostcap {

/// Selects which injection terms a component of xi multiplies.
/// Unset bus/slot match everything.
struct ComponentSelector {
  Category category = Category::OT;
  std::optional<int> bus_id;
  std::optional<int> slot;

  bool matches(Category c, int bus, int s) const {
    return c == category && (!bus_id || *bus_id == bus) && (!slot || *slot == s);
  }
};

struct UncertaintySpec {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
  std::vector<std::pair<double, double>> bounds;  // (lower, upper)
  std::vector<ComponentSelector> map;

  int dimension() const { return static_cast<int>(mean.size()); }

  /// First component whose selector matches, or nullopt.
  std::optional<int> component_for(Category c, int bus_id, int slot) const;

  /// Checks sizes, symmetry, PSD covariance, mean inside the box and the
  /// variance attainable on each interval. Throws ValidationError.
  void validate() const;

  /// Three shared components (PV, EV, OT) with identical moments and box.
  static UncertaintySpec per_category(double mean, double variance,
                                      double lower, double upper);
};

UncertaintySpec load_uncertainty(const std::filesystem::path& path);
UncertaintySpec parse_uncertainty(const std::string& json_text);

/// W_z in S^(Z+1); [xi;1]^T W_z [xi;1] = (xi_z - lower)(xi_z - upper).
std::vector<Eigen::MatrixXd> support_matrices(const UncertaintySpec& spec);

/// [[Sigma + mu mu^T, mu], [mu^T, 1]].
Eigen::MatrixXd moment_matrix(const UncertaintySpec& spec);

/// y_m(x) = a^T x - b where column 0 is the nominal part y^0 and column z
/// the sensitivity to xi_z. The constraint is y^0 + sum_z xi_z y^z <= 0.
struct AffineInequality {
  Eigen::MatrixXd a;  // N x (Z+1)
  Eigen::VectorXd b;  // Z+1
  InequalityKind kind = InequalityKind::voltage_upper;
  int element = 0;
  int slot = 0;

  int dimension() const { return static_cast<int>(b.size()) - 1; }
  /// (y^0(x), y^1(x), ..., y^Z(x)).
  Eigen::VectorXd y(const Eigen::VectorXd& x) const {
    return a.transpose() * x - b;
  }
};

/// y^0(x) + sum_z xi_z y^z(x); positive means violated.
double evaluate(const AffineInequality& m, const Eigen::VectorXd& x,
                const Eigen::VectorXd& xi);

/// Substitutes P -> (1 + xi_z) P (and Q alike) for every injection term,
/// with z taken from the spec's component map.
std::vector<AffineInequality> affinize(const LinearInequalitySet& ineqs,
                                       const InjectionExpr& inj,
                                       const NetworkModel& net,
                                       const UncertaintySpec& spec);

}  // namespace hostcap

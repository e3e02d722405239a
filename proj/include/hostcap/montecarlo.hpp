#pragma once

// Sampling check of the joint chance constraint. Distributions are built
// inside the moment set (mean, variance, box), sampled, and the fraction of
// samples violating any row is compared with epsilon. These are spot checks
// with particular members of the set, not certificates.

#include <cstdint>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hostcap/study.hpp"
#include "hostcap/uncertainty.hpp"
#include "hostcap/wccvar.hpp"

namespace hostcap {

enum class DistributionFamily { two_point, truncated_gaussian, support_corner_mixture };

const char* to_string(DistributionFamily f);
/// Throws InvalidArgument on an unknown name.
DistributionFamily parse_family(const std::string& name);
const std::vector<DistributionFamily>& all_families();

/// Law of one component. Discrete families use atoms/weights; the
/// truncated Gaussian uses loc/scale of the underlying normal.
struct ComponentLaw {
  std::vector<double> atoms;
  std::vector<double> weights;
  double loc = 0.0;
  double scale = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double mean = 0.0;      // achieved
  double variance = 0.0;  // achieved
  bool gaussian = false;

  double draw(std::mt19937_64& rng) const;
};

struct SampleDistribution {
  DistributionFamily family = DistributionFamily::two_point;
  std::vector<ComponentLaw> components;  // independent

  int dimension() const { return static_cast<int>(components.size()); }
  Eigen::VectorXd achieved_mean() const;
  Eigen::VectorXd achieved_variance() const;
  Eigen::VectorXd sample(std::mt19937_64& rng) const;
};

/// Independent components matching the spec's mean and covariance diagonal.
/// Throws ValidationError when the moments cannot be met by the family inside
/// the box, or when the covariance has off-diagonal entries.
SampleDistribution build_distribution(const UncertaintySpec& spec, DistributionFamily family);

struct RowViolation {
  int row = 0;
  InequalityKind kind = InequalityKind::voltage_upper;
  int element = 0;
  int slot = 0;
  std::int64_t count = 0;
  double probability = 0.0;
};

struct ViolationReport {
  DistributionFamily family = DistributionFamily::two_point;
  std::int64_t samples = 0;
  std::int64_t violations = 0;  // samples violating at least one row
  double probability = 0.0;
  double ci_low = 0.0;  // 99% Wilson interval
  double ci_high = 0.0;
  std::vector<RowViolation> top_rows;  // most violated rows first
  int rows_checked = 0;  // rows that can be violated somewhere in the box
  std::uint64_t seed = 0;

  double half_width() const { return 0.5 * (ci_high - ci_low); }
  /// Empirical probability at most epsilon plus the interval half-width.
  bool passes(double epsilon) const { return probability <= epsilon + half_width(); }
};

/// Wilson score interval for k successes in n trials.
std::pair<double, double> wilson_interval(std::int64_t k, std::int64_t n, double z);

struct ViolationOptions {
  int top = 10;
  int workers = 1;
  /// Samples per generator stream. Results do not depend on `workers`.
  std::int64_t batch = 16384;
  /// A row counts as violated when its value exceeds this fraction of the
  /// magnitude of its terms; 0 is the strict test.
  double violation_tol = 1e-6;
};

ViolationReport empirical_violation(const Eigen::VectorXd& x,
                                    const std::vector<AffineInequality>& ineqs,
                                    const SampleDistribution& dist, std::int64_t n,
                                    std::uint64_t seed,
                                    const ViolationOptions& options = {});

void write_json(std::ostream& out, const ViolationReport& report, double epsilon);

enum class SweepAxis { epsilon, mu_pv, mu_ev, d_pv, d_ev };

const char* to_string(SweepAxis a);
SweepAxis parse_axis(const std::string& name);

struct SweepRow {
  std::vector<double> axis_values;
  double pv_total_mw = 0.0;
  double ev_total_mw = 0.0;
  double objective = 0.0;
  int iterations = 0;
  std::string status;
  std::string message;
};

/// One full iterate() per grid point (the cartesian product when two axes
/// are given, first axis outermost). Rows come back in grid order; a failing
/// point is recorded in its row and the sweep goes on.
std::vector<SweepRow> sweep(const std::vector<SweepAxis>& axes,
                            const std::vector<std::vector<double>>& grids,
                            const Study& base, const IterationSettings& settings,
                            int workers = 1);

/// `axis_value,pv_total_mw,ev_total_mw,objective,iterations,status` for one
/// axis; two axes give a long table with `axis_value,axis2_value,...`.
void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);

}  // namespace hostcap

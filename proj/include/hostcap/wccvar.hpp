#pragma once

// Worst-case CVaR approximation of the distributionally robust joint chance
// constraint, written as linear matrix inequalities for fixed per-constraint
// scalings gamma, and the alternating scheme that improves gamma:
//
//   Model A (gamma fixed):  min c^T x  over (x, beta, H, tau)
//   Model B (x fixed):      min beta + Tr(B H)/eps  over (beta, H, tau, gamma)

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hostcap/sdp.hpp"
#include "hostcap/uncertainty.hpp"

namespace hostcap {

/// Everything the reformulation needs, independent of the network.
struct ProblemData {
  std::vector<AffineInequality> ineqs;
  Eigen::MatrixXd moment;                // B, (Z+1) x (Z+1)
  std::vector<Eigen::MatrixXd> support;  // W_z
  std::vector<std::pair<double, double>> box;
  Eigen::VectorXd mean;
  Eigen::VectorXd objective;  // c

  int var_count() const { return static_cast<int>(objective.size()); }
  int dimension() const { return static_cast<int>(mean.size()); }
  int constraint_count() const { return static_cast<int>(ineqs.size()); }
};

ProblemData make_problem_data(std::vector<AffineInequality> ineqs,
                              const UncertaintySpec& spec,
                              Eigen::VectorXd objective);

/// Variable positions inside an assembled SDP.
struct ModelLayout {
  int x_offset = -1;      // Model A only
  int beta = -1;
  int h_offset = -1;      // upper triangle of H, row-major
  int tau_offset = -1;    // tau_{m,z} for m = 0..M
  int gamma_offset = -1;  // Model B only (free gamma)
  int n_x = 0;
  int Z = 0;
  int M = 0;

  int h_index(int a, int b) const;
  int tau_index(int m, int z) const { return tau_offset + m * Z + z; }
  int h_count() const { return (Z + 1) * (Z + 2) / 2; }
};

struct AssembledModel {
  sdp::SdpProblem problem;
  ModelLayout layout;
};

AssembledModel assemble_model_A(const ProblemData& data,
                                const Eigen::VectorXd& gamma, double epsilon);

struct ModelBOptions {
  double gamma_floor = 1e-6;
  /// When set, gamma is data rather than a variable.
  std::optional<Eigen::VectorXd> fixed_gamma;
};

AssembledModel assemble_model_B(const ProblemData& data,
                                const Eigen::VectorXd& x_fixed, double epsilon,
                                const ModelBOptions& options = {});

struct CvarCertificate {
  double beta = 0.0;
  Eigen::MatrixXd h;
  Eigen::MatrixXd tau;  // (M+1) x Z
  double value = 0.0;   // beta + Tr(B H) / eps
};

CvarCertificate extract_certificate(const AssembledModel& model,
                                    const ProblemData& data,
                                    const Eigen::VectorXd& y, double epsilon);

enum class EvaluationStatus { optimal, infeasible, solver_failure };
const char* to_string(EvaluationStatus s);

struct IterationSettings {
  double epsilon = 0.05;
  double tol = 1e-5;  // relative objective decrement
  int max_iter = 30;
  double gamma_floor = 1e-6;
  /// Rescale each row to unit magnitude and x to MVA before assembly.
  bool precondition = true;
  double x_scale = 1000.0;
  bool screen_constraints = false;
  sdp::SolverSettings solver;
};

struct EvaluationResult {
  EvaluationStatus status = EvaluationStatus::solver_failure;
  Eigen::VectorXd x;
  double objective = 0.0;
  /// Scaling per original row, normalized to max 1; 0 marks a screened row.
  Eigen::VectorXd gamma;
  CvarCertificate certificate;
  std::vector<double> trace;  // Model A objective per accepted iteration
  int iterations = 0;
  bool converged = false;
  int failed_iteration = -1;
  std::string message;
  double seconds = 0.0;
  int screened = 0;
  bool screening_verified = true;
};

EvaluationResult iterate(const ProblemData& data, const IterationSettings& settings);

/// Optimal value of Model B with gamma fixed: <= 0 iff x passes the
/// conservative WC-CVaR test at this gamma.
double wc_cvar_value(const ProblemData& data, const Eigen::VectorXd& x,
                     const Eigen::VectorXd& gamma, double epsilon,
                     const sdp::SolverSettings& solver = {});

struct LpResult {
  sdp::SolveStatus status = sdp::SolveStatus::numerical_failure;
  Eigen::VectorXd x;
  double objective = 0.0;
};

/// min c^T x s.t. every row holds at the fixed perturbation xi, x >= 0.
LpResult solve_nominal_lp(const std::vector<AffineInequality>& ineqs,
                          const Eigen::VectorXd& c, const Eigen::VectorXd& xi,
                          const sdp::SolverSettings& solver = {});

/// Upper bound on y^0(x) + xi^T y(x) over the box and 0 <= x <= caps.
double worst_case_bound(const AffineInequality& m,
                        const std::vector<std::pair<double, double>>& box,
                        const Eigen::VectorXd& caps);

/// Exact max over the box of y^0(x) + xi^T y(x) at a given x.
double worst_case_at(const AffineInequality& m,
                     const std::vector<std::pair<double, double>>& box,
                     const Eigen::VectorXd& x);

/// Indices of rows that can be violated for some x in [0, caps] and some xi
/// in the box. The others hold everywhere and may be left out.
std::vector<int> screen_rows(const ProblemData& data, const Eigen::VectorXd& caps);

/// Per-coordinate maxima of x over the nominal polytope at xi = mean, which
/// contains every x that satisfies the WC-CVaR constraint.
Eigen::VectorXd capacity_caps(const ProblemData& data,
                              const sdp::SolverSettings& solver = {});

}  // namespace hostcap

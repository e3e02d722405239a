#pragma once

// Semidefinite programs in inequality (LMI) form:
//
//   minimize    c^T y
//   subject to  F_j(y) = C_j + sum_i y_i A_ij  >= 0   (PSD, each block j)
//               linear rows  a^T y {<=, >=, =} rhs
//
// The solver is a primal-dual path-following method (HKM direction with
// Mehrotra predictor-corrector) whose Schur complement is assembled block by
// block into a sparse matrix; many small blocks are cheap.

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace hostcap::sdp {

/// Symmetric entry: (row, col) and (col, row) both hold `value`.
struct MatrixEntry {
  int row;
  int col;
  double value;
};

class PsdBlock {
 public:
  struct Term {
    int var;
    std::vector<MatrixEntry> entries;
  };

  explicit PsdBlock(int size);

  int size() const { return size_; }
  void add_constant(int row, int col, double value);
  void add_coefficient(int var, int row, int col, double value);

  const std::vector<MatrixEntry>& constant() const { return constant_; }
  const std::vector<Term>& terms() const { return terms_; }

  Eigen::MatrixXd constant_dense() const;
  Eigen::MatrixXd coefficient_dense(const Term& t) const;
  /// F(y) for this block.
  Eigen::MatrixXd evaluate(const Eigen::VectorXd& y) const;

 private:
  void check_index(int row, int col) const;

  int size_;
  std::vector<MatrixEntry> constant_;
  std::vector<Term> terms_;
};

enum class RowSense { less_equal, greater_equal, equal };

struct LinearRow {
  std::vector<std::pair<int, double>> coefs;
  RowSense sense = RowSense::less_equal;
  double rhs = 0.0;

  double activity(const Eigen::VectorXd& y) const;
};

class SdpProblem {
 public:
  explicit SdpProblem(int var_count);

  int var_count() const { return static_cast<int>(objective_.size()); }

  Eigen::VectorXd& objective() { return objective_; }
  const Eigen::VectorXd& objective() const { return objective_; }

  int add_row(LinearRow row);
  int add_lower_bound(int var, double lower);
  int add_upper_bound(int var, double upper);
  int add_block(PsdBlock block);

  const std::vector<LinearRow>& rows() const { return rows_; }
  const std::vector<PsdBlock>& blocks() const { return blocks_; }

  /// Throws InvalidArgument on out-of-range variables or empty problems.
  void validate() const;

  /// Plain-text dump for cross-checking with external solvers:
  ///   vars <n> rows <r> blocks <b>
  ///   obj <var> <coef>
  ///   row <index> <sense> <rhs> then "rowcoef <index> <var> <coef>"
  ///   block <index> <size>
  ///   entry <block> <row> <col> <var> <coef>     (var -1 = constant)
  void dump(std::ostream& out) const;

 private:
  Eigen::VectorXd objective_;
  std::vector<LinearRow> rows_;
  std::vector<PsdBlock> blocks_;
};

enum class SolveStatus { optimal, infeasible, unbounded, max_iter, numerical_failure };

const char* to_string(SolveStatus s);

struct SolverSettings {
  double gap_tol = 1e-7;   // relative duality gap
  double feas_tol = 1e-7;  // relative primal and dual residuals
  int max_iter = 200;
  double step_fraction = 0.95;
  /// When the tolerances above are not met, the best iterate is still
  /// reported optimal if max(pinf, dinf, gap) <= accept_tol.
  double accept_tol = 1e-5;
  /// Stop after this many iterations without a new best iterate.
  int stall_iterations = 10;
  bool verbose = false;
};

struct SdpSolution {
  SolveStatus status = SolveStatus::numerical_failure;
  Eigen::VectorXd primal;                  // y
  Eigen::VectorXd row_duals;               // one per linear row, >= 0 for inequalities
  std::vector<Eigen::MatrixXd> block_duals;  // PSD, one per block
  double primal_objective = 0.0;
  double dual_objective = 0.0;
  double gap = 0.0;  // relative
  double primal_infeasibility = 0.0;
  double dual_infeasibility = 0.0;
  int iterations = 0;
  int failed_block = -1;
  std::string message;
};

SdpSolution solve(const SdpProblem& problem, const SolverSettings& settings = {});

struct ResidualReport {
  std::vector<double> block_min_eigenvalue;
  std::vector<double> row_violation;  // >= 0
  std::vector<int> violated_blocks;
  std::vector<int> violated_rows;
  double gap = 0.0;           // relative, from the solution's objectives
  double max_violation = 0.0;
  bool dual_blocks_psd = true;

  bool feasible() const { return violated_blocks.empty() && violated_rows.empty(); }
};

/// Pure check of a primal point (and its recorded objectives) against the
/// problem. Violations are measured relative to 1 + |data scale| of the
/// constraint.
ResidualReport check_solution(const SdpProblem& problem, const SdpSolution& s,
                              double tol = 1e-7);

}  // namespace hostcap::sdp

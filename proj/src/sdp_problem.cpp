#include <algorithm>
#include <cmath>
#include <ostream>

#include "hostcap/error.hpp"
#include "hostcap/sdp.hpp"

namespace hostcap::sdp {

PsdBlock::PsdBlock(int size) : size_(size) {
  if (size < 1) throw InvalidArgument("PSD block size must be >= 1");
}

void PsdBlock::check_index(int row, int col) const {
  if (row < 0 || col < 0 || row >= size_ || col >= size_)
    throw InvalidArgument("block entry out of range");
}

void PsdBlock::add_constant(int row, int col, double value) {
  check_index(row, col);
  if (row > col) std::swap(row, col);
  constant_.push_back({row, col, value});
}

void PsdBlock::add_coefficient(int var, int row, int col, double value) {
  check_index(row, col);
  if (var < 0) throw InvalidArgument("negative variable index");
  if (row > col) std::swap(row, col);
  auto it = std::find_if(terms_.begin(), terms_.end(),
                         [var](const Term& t) { return t.var == var; });
  if (it == terms_.end()) {
    terms_.push_back({var, {}});
    it = terms_.end() - 1;
  }
  it->entries.push_back({row, col, value});
}

namespace {
void accumulate(Eigen::MatrixXd& m, const std::vector<MatrixEntry>& entries,
                double scale) {
  for (const MatrixEntry& e : entries) {
    m(e.row, e.col) += scale * e.value;
    if (e.row != e.col) m(e.col, e.row) += scale * e.value;
  }
}
}  // namespace

Eigen::MatrixXd PsdBlock::constant_dense() const {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(size_, size_);
  accumulate(m, constant_, 1.0);
  return m;
}

Eigen::MatrixXd PsdBlock::coefficient_dense(const Term& t) const {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(size_, size_);
  accumulate(m, t.entries, 1.0);
  return m;
}

Eigen::MatrixXd PsdBlock::evaluate(const Eigen::VectorXd& y) const {
  Eigen::MatrixXd m = constant_dense();
  for (const Term& t : terms_) accumulate(m, t.entries, y[t.var]);
  return m;
}

double LinearRow::activity(const Eigen::VectorXd& y) const {
  double s = 0.0;
  for (auto [v, c] : coefs) s += c * y[v];
  return s;
}

SdpProblem::SdpProblem(int var_count) {
  if (var_count < 1) throw InvalidArgument("SDP needs at least one variable");
  objective_ = Eigen::VectorXd::Zero(var_count);
}

int SdpProblem::add_row(LinearRow row) {
  rows_.push_back(std::move(row));
  return static_cast<int>(rows_.size()) - 1;
}

int SdpProblem::add_lower_bound(int var, double lower) {
  return add_row({{{var, 1.0}}, RowSense::greater_equal, lower});
}

int SdpProblem::add_upper_bound(int var, double upper) {
  return add_row({{{var, 1.0}}, RowSense::less_equal, upper});
}

int SdpProblem::add_block(PsdBlock block) {
  blocks_.push_back(std::move(block));
  return static_cast<int>(blocks_.size()) - 1;
}

void SdpProblem::validate() const {
  const int n = var_count();
  if (rows_.empty() && blocks_.empty())
    throw InvalidArgument("SDP has no constraints");
  for (std::size_t r = 0; r < rows_.size(); ++r)
    for (auto [v, c] : rows_[r].coefs)
      if (v < 0 || v >= n || !std::isfinite(c))
        throw InvalidArgument("row " + std::to_string(r) +
                              " has a bad variable or coefficient");
  for (std::size_t b = 0; b < blocks_.size(); ++b)
    for (const auto& t : blocks_[b].terms())
      if (t.var >= n)
        throw InvalidArgument("block " + std::to_string(b) +
                              " references variable " + std::to_string(t.var));
  if (!objective_.allFinite()) throw InvalidArgument("objective is not finite");
}

void SdpProblem::dump(std::ostream& out) const {
  out.precision(17);
  out << "vars " << var_count() << " rows " << rows_.size() << " blocks "
      << blocks_.size() << "\n";
  for (int i = 0; i < var_count(); ++i)
    if (objective_[i] != 0.0) out << "obj " << i << " " << objective_[i] << "\n";
  for (std::size_t r = 0; r < rows_.size(); ++r) {
    const char* sense = rows_[r].sense == RowSense::less_equal      ? "<="
                        : rows_[r].sense == RowSense::greater_equal ? ">="
                                                                    : "=";
    out << "row " << r << " " << sense << " " << rows_[r].rhs << "\n";
    for (auto [v, c] : rows_[r].coefs)
      out << "rowcoef " << r << " " << v << " " << c << "\n";
  }
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    out << "block " << b << " " << blocks_[b].size() << "\n";
    for (const auto& e : blocks_[b].constant())
      out << "entry " << b << " " << e.row << " " << e.col << " -1 " << e.value
          << "\n";
    for (const auto& t : blocks_[b].terms())
      for (const auto& e : t.entries)
        out << "entry " << b << " " << e.row << " " << e.col << " " << t.var
            << " " << e.value << "\n";
  }
}

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::unbounded: return "unbounded";
    case SolveStatus::max_iter: return "max_iter";
    case SolveStatus::numerical_failure: return "numerical_failure";
  }
  return "?";
}

ResidualReport check_solution(const SdpProblem& problem, const SdpSolution& s,
                              double tol) {
  ResidualReport rep;
  const Eigen::VectorXd& y = s.primal;
  if (y.size() != problem.var_count())
    throw InvalidArgument("solution has the wrong number of variables");
  for (std::size_t r = 0; r < problem.rows().size(); ++r) {
    const LinearRow& row = problem.rows()[r];
    const double act = row.activity(y);
    double v = 0.0;
    switch (row.sense) {
      case RowSense::less_equal: v = std::max(0.0, act - row.rhs); break;
      case RowSense::greater_equal: v = std::max(0.0, row.rhs - act); break;
      case RowSense::equal: v = std::abs(act - row.rhs); break;
    }
    rep.row_violation.push_back(v);
    rep.max_violation = std::max(rep.max_violation, v);
    if (v > tol * (1.0 + std::abs(row.rhs))) rep.violated_rows.push_back(static_cast<int>(r));
  }
  for (std::size_t b = 0; b < problem.blocks().size(); ++b) {
    const PsdBlock& blk = problem.blocks()[b];
    const Eigen::MatrixXd f = blk.evaluate(y);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(f, Eigen::EigenvaluesOnly);
    const double lmin = eig.eigenvalues()[0];
    rep.block_min_eigenvalue.push_back(lmin);
    rep.max_violation = std::max(rep.max_violation, -lmin);
    const double scale =
        blk.constant().empty() ? 0.0 : blk.constant_dense().cwiseAbs().maxCoeff();
    if (lmin < -tol * (1.0 + scale)) rep.violated_blocks.push_back(static_cast<int>(b));
  }
  for (const auto& d : s.block_duals) {
    if (d.size() == 0) continue;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(d, Eigen::EigenvaluesOnly);
    if (eig.eigenvalues()[0] < -tol * (1.0 + d.cwiseAbs().maxCoeff()))
      rep.dual_blocks_psd = false;
  }
  rep.gap = std::abs(s.primal_objective - s.dual_objective) /
            std::max(1.0, 0.5 * (std::abs(s.primal_objective) +
                                 std::abs(s.dual_objective)));
  return rep;
}

}  // namespace hostcap::sdp

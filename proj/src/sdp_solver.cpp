#include <algorithm>
#include <chrono>
#include <cmath>
#include <iostream>
#include <limits>
#include <string>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "hostcap/error.hpp"
#include "hostcap/sdp.hpp"

namespace hostcap::sdp {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kInf = std::numeric_limits<double>::infinity();

double inner(const MatrixXd& a, const MatrixXd& b) {
  return a.cwiseProduct(b).sum();
}

// Largest alpha with z + alpha * dz still PSD (infinity if unbounded).
double max_step(const MatrixXd& z, const MatrixXd& dz) {
  Eigen::LLT<MatrixXd> llt(z);
  if (llt.info() != Eigen::Success) return 0.0;
  MatrixXd w = llt.matrixL().solve(dz);
  w = llt.matrixL().solve(w.transpose()).transpose();
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(0.5 * (w + w.transpose()),
                                              Eigen::EigenvaluesOnly);
  const double lmin = eig.eigenvalues()[0];
  return lmin < 0.0 ? -1.0 / lmin : kInf;
}

struct DenseBlock {
  int source = 0;
  int k = 0;
  MatrixXd c;
  std::vector<int> vars;
  std::vector<MatrixXd> a;
  std::vector<int> schur;  // K value index for term pair (t, u), u <= t

  MatrixXd s, x, sinv, rp, ds, dx, ds_aff, dx_aff;
};

// Linear cone: s_l = g0_l + sum_i g_li y_i >= 0.
struct LinearCone {
  VectorXd g0;
  std::vector<std::vector<std::pair<int, double>>> rows;
  std::vector<std::vector<int>> schur;
  VectorXd s, x, rp, ds, dx, ds_aff, dx_aff;
  // Where each entry came from: (row index, sign) or (block index, 0).
  std::vector<std::pair<int, int>> origin;
};

struct EqualityRows {
  std::vector<std::vector<std::pair<int, double>>> rows;
  VectorXd rhs;
  std::vector<int> origin;
  std::vector<std::vector<int>> schur;  // K index for (n + r, var)
};

class Solver {
 public:
  Solver(const SdpProblem& p, const SolverSettings& settings)
      : p_(p), set_(settings), n_(p.var_count()) {
    build();
  }

  SdpSolution run();

 private:
  void build();
  void build_pattern();
  void initial_point();
  void residuals();
  bool factor(int& failed_block);
  void direction(double sigma_mu, bool corrector);
  void step_lengths(double& ap, double& ad) const;

  const SdpProblem& p_;
  SolverSettings set_;
  int n_;
  std::vector<DenseBlock> blocks_;
  LinearCone lin_;
  EqualityRows eq_;

  Eigen::SparseMatrix<double> k_;  // lower triangle of the reduced system
  std::vector<int> diag_;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Lower> ldlt_;
  bool analyzed_ = false;

  VectorXd y_, w_, dy_, dw_;
  VectorXd rd_, re_;
  VectorXd c_;
  double data_norm_ = 1.0;
  double mu_ = 0.0;
  int nu_ = 0;
};

void Solver::build() {
  p_.validate();
  c_ = p_.objective();
  for (std::size_t r = 0; r < p_.rows().size(); ++r) {
    const LinearRow& row = p_.rows()[r];
    if (row.sense == RowSense::equal) {
      eq_.rows.push_back(row.coefs);
      eq_.origin.push_back(static_cast<int>(r));
      continue;
    }
    const double sign = row.sense == RowSense::less_equal ? -1.0 : 1.0;
    std::vector<std::pair<int, double>> g;
    for (auto [v, c] : row.coefs) g.emplace_back(v, sign * c);
    lin_.rows.push_back(std::move(g));
    lin_.origin.emplace_back(static_cast<int>(r), static_cast<int>(sign));
  }
  std::vector<double> g0;
  for (std::size_t r = 0; r < lin_.rows.size(); ++r) {
    const LinearRow& row = p_.rows()[lin_.origin[r].first];
    g0.push_back(row.sense == RowSense::less_equal ? row.rhs : -row.rhs);
  }
  eq_.rhs.resize(eq_.rows.size());
  for (std::size_t r = 0; r < eq_.rows.size(); ++r)
    eq_.rhs[r] = p_.rows()[eq_.origin[r]].rhs;

  for (std::size_t b = 0; b < p_.blocks().size(); ++b) {
    const PsdBlock& blk = p_.blocks()[b];
    if (blk.size() == 1) {
      std::vector<std::pair<int, double>> g;
      for (const auto& t : blk.terms()) g.emplace_back(t.var, blk.coefficient_dense(t)(0, 0));
      lin_.rows.push_back(std::move(g));
      lin_.origin.emplace_back(static_cast<int>(b), 0);
      g0.push_back(blk.constant_dense()(0, 0));
      continue;
    }
    DenseBlock d;
    d.source = static_cast<int>(b);
    d.k = blk.size();
    d.c = blk.constant_dense();
    for (const auto& t : blk.terms()) {
      d.vars.push_back(t.var);
      d.a.push_back(blk.coefficient_dense(t));
    }
    blocks_.push_back(std::move(d));
  }
  lin_.g0 = Eigen::Map<VectorXd>(g0.data(), static_cast<Eigen::Index>(g0.size()));

  nu_ = static_cast<int>(lin_.rows.size());
  for (const auto& b : blocks_) nu_ += b.k;
  if (nu_ == 0) throw InvalidArgument("SDP has only equality constraints");

  data_norm_ = 1.0;
  for (const auto& b : blocks_) data_norm_ = std::max(data_norm_, b.c.cwiseAbs().maxCoeff());
  if (lin_.g0.size()) data_norm_ = std::max(data_norm_, lin_.g0.cwiseAbs().maxCoeff());
  if (eq_.rhs.size()) data_norm_ = std::max(data_norm_, eq_.rhs.cwiseAbs().maxCoeff());

  build_pattern();
}

void Solver::build_pattern() {
  const int ne = static_cast<int>(eq_.rows.size());
  const int dim = n_ + ne;
  std::vector<Eigen::Triplet<double>> trip;
  for (int i = 0; i < dim; ++i) trip.emplace_back(i, i, 1.0);
  auto add = [&](int r, int c) {
    if (r < c) std::swap(r, c);
    trip.emplace_back(r, c, 1.0);
  };
  for (const auto& b : blocks_)
    for (std::size_t t = 0; t < b.vars.size(); ++t)
      for (std::size_t u = 0; u <= t; ++u) add(b.vars[t], b.vars[u]);
  for (const auto& row : lin_.rows)
    for (std::size_t t = 0; t < row.size(); ++t)
      for (std::size_t u = 0; u <= t; ++u) add(row[t].first, row[u].first);
  for (int r = 0; r < ne; ++r)
    for (auto [v, c] : eq_.rows[r]) add(n_ + r, v);
  k_.resize(dim, dim);
  k_.setFromTriplets(trip.begin(), trip.end());
  k_.makeCompressed();

  auto index = [&](int r, int c) {
    if (r < c) std::swap(r, c);
    const int* inner = k_.innerIndexPtr();
    const int begin = k_.outerIndexPtr()[c];
    const int end = k_.outerIndexPtr()[c + 1];
    return static_cast<int>(std::lower_bound(inner + begin, inner + end, r) - inner);
  };
  diag_.resize(dim);
  for (int i = 0; i < dim; ++i) diag_[i] = index(i, i);
  for (auto& b : blocks_) {
    b.schur.clear();
    for (std::size_t t = 0; t < b.vars.size(); ++t)
      for (std::size_t u = 0; u <= t; ++u) b.schur.push_back(index(b.vars[t], b.vars[u]));
  }
  lin_.schur.resize(lin_.rows.size());
  for (std::size_t l = 0; l < lin_.rows.size(); ++l) {
    const auto& row = lin_.rows[l];
    for (std::size_t t = 0; t < row.size(); ++t)
      for (std::size_t u = 0; u <= t; ++u)
        lin_.schur[l].push_back(index(row[t].first, row[u].first));
  }
  eq_.schur.resize(ne);
  for (int r = 0; r < ne; ++r)
    for (auto [v, c] : eq_.rows[r]) eq_.schur[r].push_back(index(n_ + r, v));
}

void Solver::initial_point() {
  y_ = VectorXd::Zero(n_);
  w_ = VectorXd::Zero(eq_.rows.size());
  for (auto& b : blocks_) {
    const double rk = std::sqrt(static_cast<double>(b.k));
    double eta = std::max({10.0, rk, b.c.norm()});
    double xi = std::max(10.0, rk);
    for (std::size_t t = 0; t < b.vars.size(); ++t) {
      const double an = b.a[t].norm();
      eta = std::max(eta, an);
      xi = std::max(xi, rk * (1.0 + std::abs(c_[b.vars[t]])) / (1.0 + an));
    }
    b.s = eta * MatrixXd::Identity(b.k, b.k);
    b.x = xi * MatrixXd::Identity(b.k, b.k);
  }
  const int nl = static_cast<int>(lin_.rows.size());
  lin_.s.resize(nl);
  lin_.x.resize(nl);
  for (int l = 0; l < nl; ++l) {
    double eta = std::max(10.0, std::abs(lin_.g0[l]));
    double xi = 10.0;
    for (auto [v, g] : lin_.rows[l]) {
      eta = std::max(eta, std::abs(g));
      xi = std::max(xi, (1.0 + std::abs(c_[v])) / (1.0 + std::abs(g)));
    }
    lin_.s[l] = eta;
    lin_.x[l] = xi;
  }
}

void Solver::residuals() {
  rd_ = c_;
  for (auto& b : blocks_) {
    b.rp = b.c - b.s;
    for (std::size_t t = 0; t < b.vars.size(); ++t) {
      b.rp += y_[b.vars[t]] * b.a[t];
      rd_[b.vars[t]] -= inner(b.a[t], b.x);
    }
  }
  const int nl = static_cast<int>(lin_.rows.size());
  lin_.rp.resize(nl);
  for (int l = 0; l < nl; ++l) {
    double v = lin_.g0[l] - lin_.s[l];
    for (auto [i, g] : lin_.rows[l]) {
      v += g * y_[i];
      rd_[i] -= g * lin_.x[l];
    }
    lin_.rp[l] = v;
  }
  const int ne = static_cast<int>(eq_.rows.size());
  re_.resize(ne);
  for (int r = 0; r < ne; ++r) {
    double v = eq_.rhs[r];
    for (auto [i, a] : eq_.rows[r]) {
      v -= a * y_[i];
      rd_[i] -= a * w_[r];
    }
    re_[r] = v;
  }
}

bool Solver::factor(int& failed_block) {
  double* val = k_.valuePtr();
  std::fill(val, val + k_.nonZeros(), 0.0);
  MatrixXd t_mat;
  std::vector<MatrixXd> xa;
  for (std::size_t j = 0; j < blocks_.size(); ++j) {
    DenseBlock& b = blocks_[j];
    Eigen::LLT<MatrixXd> llt(b.s);
    if (llt.info() != Eigen::Success) {
      failed_block = b.source;
      return false;
    }
    b.sinv = llt.solve(MatrixXd::Identity(b.k, b.k));
    const std::size_t nt = b.vars.size();
    xa.resize(nt);
    for (std::size_t t = 0; t < nt; ++t) xa[t].noalias() = b.x * b.a[t] * b.sinv;
    std::size_t idx = 0;
    for (std::size_t t = 0; t < nt; ++t)
      for (std::size_t u = 0; u <= t; ++u) val[b.schur[idx++]] += inner(b.a[u], xa[t]);
  }
  for (std::size_t l = 0; l < lin_.rows.size(); ++l) {
    const auto& row = lin_.rows[l];
    const double d = lin_.x[l] / lin_.s[l];
    std::size_t idx = 0;
    for (std::size_t t = 0; t < row.size(); ++t)
      for (std::size_t u = 0; u <= t; ++u)
        val[lin_.schur[l][idx++]] += d * row[t].second * row[u].second;
  }
  for (std::size_t r = 0; r < eq_.rows.size(); ++r)
    for (std::size_t t = 0; t < eq_.rows[r].size(); ++t)
      val[eq_.schur[r][t]] += eq_.rows[r][t].second;

  // Quasi-definite regularization, relative to each diagonal entry since
  // they span many orders of magnitude near the optimum. Iterative
  // refinement in direction() solves against the unregularized matrix.
  // A zero pivot (free variables whose cones all went slack) is retried with
  // a larger perturbation.
  for (double delta : {1e-14, 1e-11, 1e-8}) {
    Eigen::SparseMatrix<double> reg = k_;
    double* rv = reg.valuePtr();
    for (int i = 0; i < n_; ++i) rv[diag_[i]] += delta * std::abs(rv[diag_[i]]) + 1e-4 * delta;
    for (std::size_t r = 0; r < eq_.rows.size(); ++r) rv[diag_[n_ + r]] -= 1e2 * delta;
    if (!analyzed_) {
      ldlt_.analyzePattern(reg);
      analyzed_ = true;
    }
    ldlt_.factorize(reg);
    if (ldlt_.info() == Eigen::Success && ldlt_.vectorD().allFinite()) return true;
  }
  failed_block = -1;
  return false;
}

void Solver::direction(double sigma_mu, bool corrector) {
  const int ne = static_cast<int>(eq_.rows.size());
  VectorXd rhs = VectorXd::Zero(n_ + ne);
  std::vector<MatrixXd> r_mat(blocks_.size());
  for (std::size_t j = 0; j < blocks_.size(); ++j) {
    DenseBlock& b = blocks_[j];
    MatrixXd r = sigma_mu * b.sinv - b.x - b.x * b.rp * b.sinv;
    if (corrector) r.noalias() -= b.dx_aff * b.ds_aff * b.sinv;
    for (std::size_t t = 0; t < b.vars.size(); ++t) rhs[b.vars[t]] += inner(b.a[t], r);
    r_mat[j] = std::move(r);
  }
  const int nl = static_cast<int>(lin_.rows.size());
  VectorXd r_lin(nl);
  for (int l = 0; l < nl; ++l) {
    double r = sigma_mu / lin_.s[l] - lin_.x[l] - lin_.x[l] * lin_.rp[l] / lin_.s[l];
    if (corrector) r -= lin_.dx_aff[l] * lin_.ds_aff[l] / lin_.s[l];
    for (auto [i, g] : lin_.rows[l]) rhs[i] += g * r;
    r_lin[l] = r;
  }
  rhs.head(n_) -= rd_;
  rhs.tail(ne) = re_;

  VectorXd sol = ldlt_.solve(rhs);
  double res_norm = kInf;
  for (int it = 0; it < 30; ++it) {
    VectorXd res = rhs - k_.selfadjointView<Eigen::Lower>() * sol;
    const double r = res.lpNorm<Eigen::Infinity>();
    if (r <= 1e-15 * (1.0 + rhs.lpNorm<Eigen::Infinity>()) || r > 0.5 * res_norm) break;
    res_norm = r;
    sol += ldlt_.solve(res);
  }
  dy_ = sol.head(n_);
  dw_ = -sol.tail(ne);

  for (std::size_t j = 0; j < blocks_.size(); ++j) {
    DenseBlock& b = blocks_[j];
    MatrixXd ady = MatrixXd::Zero(b.k, b.k);
    for (std::size_t t = 0; t < b.vars.size(); ++t) ady += dy_[b.vars[t]] * b.a[t];
    b.ds = b.rp + ady;
    MatrixXd dx = r_mat[j] - b.x * ady * b.sinv;
    b.dx = 0.5 * (dx + dx.transpose());
  }
  lin_.ds.resize(nl);
  lin_.dx.resize(nl);
  for (int l = 0; l < nl; ++l) {
    double gdy = 0.0;
    for (auto [i, g] : lin_.rows[l]) gdy += g * dy_[i];
    lin_.ds[l] = lin_.rp[l] + gdy;
    lin_.dx[l] = r_lin[l] - lin_.x[l] * gdy / lin_.s[l];
  }
}

void Solver::step_lengths(double& ap, double& ad) const {
  ap = kInf;
  ad = kInf;
  for (const auto& b : blocks_) {
    ap = std::min(ap, max_step(b.s, b.ds));
    ad = std::min(ad, max_step(b.x, b.dx));
  }
  for (Eigen::Index l = 0; l < lin_.s.size(); ++l) {
    if (lin_.ds[l] < 0.0) ap = std::min(ap, -lin_.s[l] / lin_.ds[l]);
    if (lin_.dx[l] < 0.0) ad = std::min(ad, -lin_.x[l] / lin_.dx[l]);
  }
}

SdpSolution Solver::run() {
  SdpSolution sol;
  initial_point();
  const double c_norm = 1.0 + (c_.size() ? c_.lpNorm<Eigen::Infinity>() : 0.0);
  int stalls = 0;

  // Best iterate so far by max(pinf, dinf, gap). Near the optimum the
  // reduced system loses accuracy and the residuals can drift back up.
  struct Snapshot {
    VectorXd y, w, lin_s, lin_x;
    std::vector<MatrixXd> s, x;
    SdpSolution metrics;
    double merit = kInf;
    int iter = -1;
  } best;
  auto save = [&](const SdpSolution& m, double merit, int iter) {
    best.y = y_;
    best.w = w_;
    best.lin_s = lin_.s;
    best.lin_x = lin_.x;
    best.s.resize(blocks_.size());
    best.x.resize(blocks_.size());
    for (std::size_t j = 0; j < blocks_.size(); ++j) {
      best.s[j] = blocks_[j].s;
      best.x[j] = blocks_[j].x;
    }
    best.metrics = m;
    best.merit = merit;
    best.iter = iter;
  };
  // Falls back to the best iterate; accepts it when it is accurate enough.
  auto fall_back = [&](SdpSolution& out) {
    if (best.iter < 0) return;
    y_ = best.y;
    w_ = best.w;
    lin_.s = best.lin_s;
    lin_.x = best.lin_x;
    for (std::size_t j = 0; j < blocks_.size(); ++j) {
      blocks_[j].s = best.s[j];
      blocks_[j].x = best.x[j];
    }
    const std::string why = out.message;
    const int failed = out.failed_block;
    const SolveStatus status = out.status;
    out = best.metrics;
    out.failed_block = failed;
    if (best.merit <= set_.accept_tol) {
      out.status = SolveStatus::optimal;
      out.message = "reduced accuracy (" + why + ")";
    } else {
      out.status = status;
      out.message = why;
    }
  };

  for (int iter = 0;; ++iter) {
    residuals();
    double compl_sum = lin_.x.dot(lin_.s);
    double dobj = -lin_.g0.dot(lin_.x) + eq_.rhs.dot(w_);
    double rp_max = lin_.rp.size() ? lin_.rp.lpNorm<Eigen::Infinity>() : 0.0;
    for (const auto& b : blocks_) {
      compl_sum += inner(b.x, b.s);
      dobj -= inner(b.c, b.x);
      rp_max = std::max(rp_max, b.rp.cwiseAbs().maxCoeff());
    }
    if (re_.size()) rp_max = std::max(rp_max, re_.lpNorm<Eigen::Infinity>());
    const double pobj = c_.dot(y_);
    mu_ = compl_sum / nu_;
    const double pinf = rp_max / (1.0 + data_norm_);
    const double dinf = rd_.lpNorm<Eigen::Infinity>() / c_norm;
    const double gap = std::max(std::abs(pobj - dobj), compl_sum) /
                       std::max(1.0, 0.5 * (std::abs(pobj) + std::abs(dobj)));

    sol.iterations = iter;
    sol.primal_objective = pobj;
    sol.dual_objective = dobj;
    sol.gap = gap;
    sol.primal_infeasibility = pinf;
    sol.dual_infeasibility = dinf;
    if (set_.verbose)
      std::cerr << "iter " << iter << " pobj " << pobj << " dobj " << dobj
                << " gap " << gap << " pinf " << pinf << " dinf " << dinf
                << " mu " << mu_ << "\n";

    if (pinf <= set_.feas_tol && dinf <= set_.feas_tol && gap <= set_.gap_tol) {
      sol.status = SolveStatus::optimal;
      break;
    }
    const double merit = std::max({pinf, dinf, gap});
    if (merit < best.merit) save(sol, merit, iter);
    if (iter - best.iter >= set_.stall_iterations) {
      sol.status = SolveStatus::numerical_failure;
      sol.message = "no progress";
      fall_back(sol);
      break;
    }
    // Divergence heuristics: a normalized dual ray certifies primal
    // infeasibility, a normalized primal ray certifies unboundedness.
    const double dual_ray_residual = (c_ - rd_).lpNorm<Eigen::Infinity>();
    if (pinf > set_.feas_tol && dobj > 0.0 && dual_ray_residual < 1e-10 * dobj &&
        dobj > 1e6 * (1.0 + data_norm_)) {
      sol.status = SolveStatus::infeasible;
      sol.message = "dual ray found (primal infeasible)";
      break;
    }
    if (dinf > set_.feas_tol && pobj < 0.0 &&
        (data_norm_ + rp_max) < 1e-10 * -pobj && -pobj > 1e6 * c_norm) {
      sol.status = SolveStatus::unbounded;
      sol.message = "primal ray found (objective unbounded below)";
      break;
    }
    if (iter >= set_.max_iter) {
      sol.status = SolveStatus::max_iter;
      sol.message = "iteration limit reached";
      fall_back(sol);
      break;
    }

    int failed = -1;
    if (!factor(failed)) {
      sol.status = SolveStatus::numerical_failure;
      sol.failed_block = failed;
      sol.message = failed >= 0 ? "slack block lost definiteness"
                                : "Schur complement factorization failed";
      fall_back(sol);
      break;
    }

    // Predictor.
    direction(0.0, false);
    double ap, ad;
    step_lengths(ap, ad);
    ap = std::min(1.0, ap);
    ad = std::min(1.0, ad);
    double mu_aff = 0.0;
    for (auto& b : blocks_) {
      mu_aff += inner(b.x + ad * b.dx, b.s + ap * b.ds);
      b.dx_aff = b.dx;
      b.ds_aff = b.ds;
    }
    mu_aff += (lin_.x + ad * lin_.dx).dot(lin_.s + ap * lin_.ds);
    lin_.dx_aff = lin_.dx;
    lin_.ds_aff = lin_.ds;
    mu_aff /= nu_;
    double sigma = std::pow(std::max(0.0, mu_aff) / mu_, 3.0);
    sigma = std::clamp(sigma, 0.0, 1.0);

    // Corrector.
    direction(sigma * mu_, true);
    step_lengths(ap, ad);
    ap = std::min(1.0, set_.step_fraction * ap);
    ad = std::min(1.0, set_.step_fraction * ad);

    if (!std::isfinite(ap) || !std::isfinite(ad) || !dy_.allFinite()) {
      sol.status = SolveStatus::numerical_failure;
      sol.message = "non-finite search direction";
      fall_back(sol);
      break;
    }
    stalls = (ap < 1e-10 && ad < 1e-10) ? stalls + 1 : 0;
    if (stalls >= 5) {
      sol.status = SolveStatus::numerical_failure;
      sol.message = "step lengths collapsed";
      fall_back(sol);
      break;
    }

    y_ += ap * dy_;
    w_ += ad * dw_;
    for (auto& b : blocks_) {
      b.s += ap * b.ds;
      b.x += ad * b.dx;
    }
    lin_.s += ap * lin_.ds;
    lin_.x += ad * lin_.dx;
  }

  sol.primal = y_;
  sol.row_duals = VectorXd::Zero(p_.rows().size());
  sol.block_duals.assign(p_.blocks().size(), MatrixXd());
  for (std::size_t l = 0; l < lin_.origin.size(); ++l) {
    auto [src, sign] = lin_.origin[l];
    if (sign == 0)
      sol.block_duals[src] = MatrixXd::Constant(1, 1, lin_.x[l]);
    else
      sol.row_duals[src] = lin_.x[l];
  }
  for (std::size_t r = 0; r < eq_.origin.size(); ++r) sol.row_duals[eq_.origin[r]] = w_[r];
  for (const auto& b : blocks_) sol.block_duals[b.source] = b.x;
  return sol;
}

}  // namespace

SdpSolution solve(const SdpProblem& problem, const SolverSettings& settings) {
  Solver solver(problem, settings);
  return solver.run();
}

}  // namespace hostcap::sdp

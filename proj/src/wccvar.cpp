#include "hostcap/wccvar.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "hostcap/error.hpp"

namespace hostcap {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

void check_epsilon(double eps) {
  if (!(eps > 0.0 && eps < 1.0))
    throw InvalidArgument("epsilon must lie in (0, 1), got " + std::to_string(eps));
}

// Support matrices enter only through tau_z * W_z with tau_z >= 0 free, so
// each may be rescaled; unit magnitude keeps the solver well conditioned.
std::vector<MatrixXd> scaled_support(const ProblemData& data) {
  std::vector<MatrixXd> out;
  for (const auto& w : data.support)
    out.push_back(w / std::max(1.0, w.cwiseAbs().maxCoeff()));
  return out;
}

void add_dense(sdp::PsdBlock& blk, int var, const MatrixXd& m, double scale) {
  for (int r = 0; r < m.rows(); ++r)
    for (int c = r; c < m.cols(); ++c)
      if (m(r, c) != 0.0) blk.add_coefficient(var, r, c, scale * m(r, c));
}

// Common part: beta, H, tau variables, tau >= 0, block for tau_0 and the
// H + sum tau W part of every per-row block.
void add_h_terms(sdp::PsdBlock& blk, const ModelLayout& lay) {
  for (int a = 0; a <= lay.Z; ++a)
    for (int b = a; b <= lay.Z; ++b) blk.add_coefficient(lay.h_index(a, b), a, b, 1.0);
}

void add_tau_terms(sdp::PsdBlock& blk, const ModelLayout& lay,
                   const std::vector<MatrixXd>& w, int m) {
  for (int z = 0; z < lay.Z; ++z) add_dense(blk, lay.tau_index(m, z), w[z], 1.0);
}

void add_common(sdp::SdpProblem& p, const ModelLayout& lay,
                const std::vector<MatrixXd>& w) {
  for (int m = 0; m <= lay.M; ++m)
    for (int z = 0; z < lay.Z; ++z) p.add_lower_bound(lay.tau_index(m, z), 0.0);
  sdp::PsdBlock b0(lay.Z + 1);
  add_h_terms(b0, lay);
  add_tau_terms(b0, lay, w, 0);
  p.add_block(std::move(b0));
}

// Tr(B H) = sum_{a<=b} coeff(a,b) * h_ab.
double trace_weight(const MatrixXd& moment, int a, int b) {
  return a == b ? moment(a, a) : 2.0 * moment(a, b);
}

}  // namespace

int ModelLayout::h_index(int a, int b) const {
  if (a > b) std::swap(a, b);
  // Row-major upper triangle of a (Z+1) x (Z+1) matrix.
  const int n = Z + 1;
  return h_offset + a * n - a * (a - 1) / 2 + (b - a);
}

const char* to_string(EvaluationStatus s) {
  switch (s) {
    case EvaluationStatus::optimal: return "optimal";
    case EvaluationStatus::infeasible: return "infeasible";
    case EvaluationStatus::solver_failure: return "solver_failure";
  }
  return "?";
}

ProblemData make_problem_data(std::vector<AffineInequality> ineqs,
                              const UncertaintySpec& spec, VectorXd objective) {
  ProblemData d;
  d.moment = moment_matrix(spec);
  d.support = support_matrices(spec);
  d.box = spec.bounds;
  d.mean = spec.mean;
  d.objective = std::move(objective);
  for (const auto& m : ineqs) {
    if (m.dimension() != spec.dimension() || m.a.rows() != d.var_count())
      throw InvalidArgument("inequality dimensions do not match the spec");
  }
  d.ineqs = std::move(ineqs);
  return d;
}

AssembledModel assemble_model_A(const ProblemData& data, const VectorXd& gamma,
                                double epsilon) {
  check_epsilon(epsilon);
  const int M = data.constraint_count();
  if (M == 0) throw InvalidArgument("empty constraint set");
  if (gamma.size() != M || (gamma.array() <= 0.0).any())
    throw InvalidArgument("gamma must be strictly positive with one entry per row");

  ModelLayout lay;
  lay.n_x = data.var_count();
  lay.Z = data.dimension();
  lay.M = M;
  lay.x_offset = 0;
  lay.beta = lay.n_x;
  lay.h_offset = lay.beta + 1;
  lay.tau_offset = lay.h_offset + lay.h_count();
  const int nvars = lay.tau_offset + (M + 1) * lay.Z;

  AssembledModel out{sdp::SdpProblem(nvars), lay};
  sdp::SdpProblem& p = out.problem;
  p.objective().head(lay.n_x) = data.objective;

  // beta + Tr(B H) / eps <= 0
  sdp::LinearRow cvar;
  cvar.coefs.emplace_back(lay.beta, 1.0);
  for (int a = 0; a <= lay.Z; ++a)
    for (int b = a; b <= lay.Z; ++b)
      cvar.coefs.emplace_back(lay.h_index(a, b),
                              trace_weight(data.moment, a, b) / epsilon);
  cvar.sense = sdp::RowSense::less_equal;
  cvar.rhs = 0.0;
  p.add_row(std::move(cvar));
  for (int i = 0; i < lay.n_x; ++i) p.add_lower_bound(i, 0.0);

  const auto w = scaled_support(data);
  add_common(p, lay, w);

  const int Z = lay.Z;
  for (int m = 0; m < M; ++m) {
    const AffineInequality& row = data.ineqs[m];
    const double g = gamma[m];
    sdp::PsdBlock blk(Z + 1);
    add_h_terms(blk, lay);
    add_tau_terms(blk, lay, w, m + 1);
    // - [[0, g/2 y], [g/2 y^T, g y0 - beta]] with y = a^T x - b.
    for (int z = 1; z <= Z; ++z)
      if (row.b[z] != 0.0) blk.add_constant(z - 1, Z, 0.5 * g * row.b[z]);
    if (row.b[0] != 0.0) blk.add_constant(Z, Z, g * row.b[0]);
    for (int i = 0; i < lay.n_x; ++i) {
      for (int z = 1; z <= Z; ++z)
        if (row.a(i, z) != 0.0) blk.add_coefficient(i, z - 1, Z, -0.5 * g * row.a(i, z));
      if (row.a(i, 0) != 0.0) blk.add_coefficient(i, Z, Z, -g * row.a(i, 0));
    }
    blk.add_coefficient(lay.beta, Z, Z, 1.0);
    p.add_block(std::move(blk));
  }
  return out;
}

AssembledModel assemble_model_B(const ProblemData& data, const VectorXd& x_fixed,
                                double epsilon, const ModelBOptions& options) {
  check_epsilon(epsilon);
  const int M = data.constraint_count();
  if (M == 0) throw InvalidArgument("empty constraint set");
  if (x_fixed.size() != data.var_count())
    throw InvalidArgument("x_fixed has the wrong dimension");
  const bool free_gamma = !options.fixed_gamma.has_value();
  if (!free_gamma && (options.fixed_gamma->size() != M ||
                      (options.fixed_gamma->array() <= 0.0).any()))
    throw InvalidArgument("fixed gamma must be strictly positive, one per row");

  ModelLayout lay;
  lay.n_x = data.var_count();
  lay.Z = data.dimension();
  lay.M = M;
  lay.beta = 0;
  lay.h_offset = 1;
  lay.tau_offset = lay.h_offset + lay.h_count();
  lay.gamma_offset = free_gamma ? lay.tau_offset + (M + 1) * lay.Z : -1;
  const int nvars = lay.tau_offset + (M + 1) * lay.Z + (free_gamma ? M : 0);

  AssembledModel out{sdp::SdpProblem(nvars), lay};
  sdp::SdpProblem& p = out.problem;
  p.objective()[lay.beta] = 1.0;
  for (int a = 0; a <= lay.Z; ++a)
    for (int b = a; b <= lay.Z; ++b)
      p.objective()[lay.h_index(a, b)] = trace_weight(data.moment, a, b) / epsilon;

  const auto w = scaled_support(data);
  add_common(p, lay, w);

  const int Z = lay.Z;
  for (int m = 0; m < M; ++m) {
    const VectorXd y = data.ineqs[m].y(x_fixed);
    sdp::PsdBlock blk(Z + 1);
    add_h_terms(blk, lay);
    add_tau_terms(blk, lay, w, m + 1);
    blk.add_coefficient(lay.beta, Z, Z, 1.0);
    if (free_gamma) {
      const int gv = lay.gamma_offset + m;
      for (int z = 1; z <= Z; ++z)
        if (y[z] != 0.0) blk.add_coefficient(gv, z - 1, Z, -0.5 * y[z]);
      // Always present so gamma is tied to the block even when y0 = 0.
      blk.add_coefficient(gv, Z, Z, -y[0]);
      p.add_upper_bound(gv, 1.0);
      p.add_lower_bound(gv, options.gamma_floor);
    } else {
      const double g = (*options.fixed_gamma)[m];
      for (int z = 1; z <= Z; ++z)
        if (y[z] != 0.0) blk.add_constant(z - 1, Z, -0.5 * g * y[z]);
      if (y[0] != 0.0) blk.add_constant(Z, Z, -g * y[0]);
    }
    p.add_block(std::move(blk));
  }
  return out;
}

CvarCertificate extract_certificate(const AssembledModel& model,
                                    const ProblemData& data, const VectorXd& y,
                                    double epsilon) {
  const ModelLayout& lay = model.layout;
  CvarCertificate c;
  c.beta = y[lay.beta];
  c.h = MatrixXd::Zero(lay.Z + 1, lay.Z + 1);
  for (int a = 0; a <= lay.Z; ++a)
    for (int b = a; b <= lay.Z; ++b) c.h(a, b) = c.h(b, a) = y[lay.h_index(a, b)];
  c.tau = MatrixXd::Zero(lay.M + 1, lay.Z);
  const auto w = data.support;
  for (int m = 0; m <= lay.M; ++m)
    for (int z = 0; z < lay.Z; ++z) {
      // Undo the support rescaling so tau pairs with the unscaled W_z.
      const double s = std::max(1.0, w[z].cwiseAbs().maxCoeff());
      c.tau(m, z) = y[lay.tau_index(m, z)] / s;
    }
  c.value = c.beta + (data.moment.cwiseProduct(c.h)).sum() / epsilon;
  return c;
}

double wc_cvar_value(const ProblemData& data, const VectorXd& x,
                     const VectorXd& gamma, double epsilon,
                     const sdp::SolverSettings& solver) {
  ModelBOptions opt;
  opt.fixed_gamma = gamma;
  const auto model = assemble_model_B(data, x, epsilon, opt);
  const auto sol = sdp::solve(model.problem, solver);
  if (sol.status != sdp::SolveStatus::optimal)
    throw Error(std::string("WC-CVaR evaluation failed: ") + sdp::to_string(sol.status));
  return sol.primal_objective;
}

LpResult solve_nominal_lp(const std::vector<AffineInequality>& ineqs,
                          const VectorXd& c, const VectorXd& xi,
                          const sdp::SolverSettings& solver) {
  const int n = static_cast<int>(c.size());
  sdp::SdpProblem p(n);
  p.objective() = c;
  for (const auto& m : ineqs) {
    // (a0 + sum xi_z a_z)^T x <= b0 + sum xi_z b_z
    const VectorXd g = m.a.col(0) + m.a.rightCols(m.dimension()) * xi;
    const double h = m.b[0] + m.b.tail(m.dimension()).dot(xi);
    sdp::LinearRow row;
    for (int i = 0; i < n; ++i)
      if (g[i] != 0.0) row.coefs.emplace_back(i, g[i]);
    if (row.coefs.empty()) {
      if (h < 0.0) return {sdp::SolveStatus::infeasible, VectorXd::Zero(n), 0.0};
      continue;
    }
    row.sense = sdp::RowSense::less_equal;
    row.rhs = h;
    p.add_row(std::move(row));
  }
  for (int i = 0; i < n; ++i) p.add_lower_bound(i, 0.0);
  const auto sol = sdp::solve(p, solver);
  return {sol.status, sol.primal, sol.primal_objective};
}

double worst_case_bound(const AffineInequality& m,
                        const std::vector<std::pair<double, double>>& box,
                        const VectorXd& caps) {
  const int Z = m.dimension();
  // Each term is maximized over xi independently, which can only overshoot.
  double bound = -m.b[0];
  for (int z = 0; z < Z; ++z)
    bound += std::max(-box[z].first * m.b[z + 1], -box[z].second * m.b[z + 1]);
  for (int i = 0; i < m.a.rows(); ++i) {
    double coef = m.a(i, 0);
    for (int z = 0; z < Z; ++z)
      coef += std::max(box[z].first * m.a(i, z + 1), box[z].second * m.a(i, z + 1));
    if (coef > 0.0) {
      if (!std::isfinite(caps[i])) return std::numeric_limits<double>::infinity();
      bound += coef * caps[i];
    }
  }
  return bound;
}

double worst_case_at(const AffineInequality& m,
                     const std::vector<std::pair<double, double>>& box,
                     const VectorXd& x) {
  const VectorXd y = m.y(x);
  double v = y[0];
  for (int z = 0; z < m.dimension(); ++z)
    v += std::max(box[z].first * y[z + 1], box[z].second * y[z + 1]);
  return v;
}

VectorXd capacity_caps(const ProblemData& data, const sdp::SolverSettings& solver) {
  const int n = data.var_count();
  VectorXd caps(n);
  for (int i = 0; i < n; ++i) {
    VectorXd c = VectorXd::Zero(n);
    c[i] = -1.0;
    const auto lp = solve_nominal_lp(data.ineqs, c, data.mean, solver);
    if (lp.status == sdp::SolveStatus::optimal)
      caps[i] = std::max(0.0, lp.x[i]) * (1.0 + 1e-6) + 1e-6;
    else if (lp.status == sdp::SolveStatus::infeasible)
      caps[i] = 0.0;
    else
      caps[i] = std::numeric_limits<double>::infinity();
  }
  return caps;
}

std::vector<int> screen_rows(const ProblemData& data, const VectorXd& caps) {
  std::vector<int> keep;
  for (int m = 0; m < data.constraint_count(); ++m)
    if (worst_case_bound(data.ineqs[m], data.box, caps) >= 0.0) keep.push_back(m);
  return keep;
}

namespace {

// Rows scaled to unit magnitude and x measured in units of x_scale. Both
// leave the feasible set unchanged: row scaling is absorbed by gamma.
struct Preconditioned {
  ProblemData data;
  VectorXd row_scale;
  double x_scale = 1.0;
};

Preconditioned precondition(const ProblemData& src, const std::vector<int>& rows,
                            bool enabled, double x_scale) {
  Preconditioned out;
  out.x_scale = enabled ? x_scale : 1.0;
  out.data.moment = src.moment;
  out.data.support = src.support;
  out.data.box = src.box;
  out.data.mean = src.mean;
  out.data.objective = src.objective * out.x_scale;
  out.row_scale = VectorXd::Ones(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    AffineInequality m = src.ineqs[rows[k]];
    m.a *= out.x_scale;
    if (enabled) {
      const double mag = std::max(m.a.cwiseAbs().maxCoeff(), m.b.cwiseAbs().maxCoeff());
      if (mag > 0.0) {
        out.row_scale[k] = 1.0 / mag;
        m.a *= out.row_scale[k];
        m.b *= out.row_scale[k];
      }
    }
    out.data.ineqs.push_back(std::move(m));
  }
  return out;
}

}  // namespace

EvaluationResult iterate(const ProblemData& data, const IterationSettings& settings) {
  const auto t0 = std::chrono::steady_clock::now();
  check_epsilon(settings.epsilon);
  if (!(settings.tol > 0.0)) throw InvalidArgument("tol must be positive");
  if (settings.max_iter < 1) throw InvalidArgument("max_iter must be >= 1");
  if (data.constraint_count() == 0) throw InvalidArgument("empty constraint set");

  EvaluationResult res;
  const int M = data.constraint_count();

  std::vector<int> rows;
  VectorXd caps;
  if (settings.screen_constraints) {
    caps = capacity_caps(data, settings.solver);
    rows = screen_rows(data, caps);
  } else {
    rows.resize(M);
    for (int m = 0; m < M; ++m) rows[m] = m;
  }
  res.screened = M - static_cast<int>(rows.size());
  if (rows.empty()) {
    // Nothing can ever be violated inside the caps; the caps bind.
    res.status = EvaluationStatus::optimal;
    res.x = caps;
    res.objective = data.objective.dot(caps);
    res.gamma = VectorXd::Zero(M);
    res.trace.push_back(res.objective);
    res.converged = true;
    res.message = "all rows screened out";
    return res;
  }

  const Preconditioned pre =
      precondition(data, rows, settings.precondition, settings.x_scale);
  const ProblemData& d = pre.data;
  const int K = d.constraint_count();

  VectorXd gamma = VectorXd::Ones(K);
  VectorXd best_x;
  VectorXd best_gamma;
  CvarCertificate best_cert;
  double best_obj = std::numeric_limits<double>::infinity();

  for (int it = 1; it <= settings.max_iter; ++it) {
    res.iterations = it;
    const auto model_a = assemble_model_A(d, gamma, settings.epsilon);
    const auto sol_a = sdp::solve(model_a.problem, settings.solver);
    if (sol_a.status != sdp::SolveStatus::optimal) {
      if (it == 1) {
        res.status = sol_a.status == sdp::SolveStatus::infeasible
                         ? EvaluationStatus::infeasible
                         : EvaluationStatus::solver_failure;
        res.failed_iteration = it;
        res.message = std::string("Model A at the initial scaling: ") +
                      sdp::to_string(sol_a.status) +
                      (sol_a.message.empty() ? "" : " (" + sol_a.message + ")");
        break;
      }
      res.failed_iteration = it;
      res.message = std::string("Model A failed at iteration ") + std::to_string(it) +
                    ": " + sdp::to_string(sol_a.status) + "; keeping previous iterate";
      break;
    }
    const double obj = sol_a.primal_objective;
    // The previous x stays feasible under the new gamma, so a larger value
    // is solver noise: keep the incumbent and stop.
    if (obj > best_obj) {
      res.converged = true;
      break;
    }
    const double prev = best_obj;
    best_obj = obj;
    best_x = sol_a.primal.head(d.var_count());
    best_gamma = gamma;
    best_cert = extract_certificate(model_a, d, sol_a.primal, settings.epsilon);
    res.trace.push_back(obj);
    res.status = EvaluationStatus::optimal;
    if (std::isfinite(prev) && prev - obj < settings.tol * std::max(1.0, std::abs(prev))) {
      res.converged = true;
      break;
    }
    if (it == settings.max_iter) break;

    ModelBOptions opt;
    opt.gamma_floor = settings.gamma_floor;
    const auto model_b = assemble_model_B(d, best_x, settings.epsilon, opt);
    const auto sol_b = sdp::solve(model_b.problem, settings.solver);
    if (sol_b.status != sdp::SolveStatus::optimal) {
      res.failed_iteration = it;
      res.message = std::string("Model B failed at iteration ") + std::to_string(it) +
                    ": " + sdp::to_string(sol_b.status) + "; keeping current iterate";
      break;
    }
    VectorXd g = sol_b.primal.segment(model_b.layout.gamma_offset, K);
    g = g.cwiseMax(settings.gamma_floor);
    g /= g.maxCoeff();
    gamma = g.cwiseMax(settings.gamma_floor);
  }

  if (res.status == EvaluationStatus::optimal) {
    res.x = (best_x * pre.x_scale).cwiseMax(0.0);
    res.objective = best_obj;
    // Express gamma against the original rows.
    res.gamma = VectorXd::Zero(M);
    VectorXd g = best_gamma.cwiseProduct(pre.row_scale);
    g /= g.maxCoeff();
    for (int k = 0; k < K; ++k) res.gamma[rows[k]] = g[k];
    res.certificate = best_cert;
    if (settings.screen_constraints) {
      // Screened rows were dropped on the promise that x stays within the
      // caps; confirm it for the returned point.
      std::vector<char> kept(M, 0);
      for (int r : rows) kept[r] = 1;
      for (int i = 0; i < res.x.size(); ++i)
        if (res.x[i] > caps[i] * (1.0 + 1e-6) + 1e-6) res.screening_verified = false;
      for (int m = 0; m < M; ++m)
        if (!kept[m] && worst_case_at(data.ineqs[m], data.box, res.x) > 0.0)
          res.screening_verified = false;
    }
  }
  res.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

}  // namespace hostcap

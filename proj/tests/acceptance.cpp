// Acceptance runner: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Detail lines start with two spaces.

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "hostcap/montecarlo.hpp"
#include "support.hpp"

using namespace hostcap;
using namespace testing_support;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

struct Outcome {
  bool pass = false;
  std::string summary;
};

std::vector<std::vector<double>> g_traces;  // every iterate() run, for criterion 4

EvaluationResult run(const ProblemData& d, const IterationSettings& s) {
  EvaluationResult r = iterate(d, s);
  g_traces.push_back(r.trace);
  return r;
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

bool nonincreasing(const std::vector<double>& v, double rel) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[i - 1] + rel * std::max(1.0, std::abs(v[i - 1]))) return false;
  return true;
}

// Shared state between criteria.
Study g_study = ieee33_study();
RunConfig g_config = ieee33_config();
EvaluationResult g_eps05;
EvaluationResult g_eps10;

Outcome criterion1() {
  IterationSettings s = g_config.iteration;
  s.epsilon = 0.05;
  const auto t0 = std::chrono::steady_clock::now();
  g_eps05 = run(build_problem(g_study), s);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const CapacityTotals t = capacity_totals(g_study.net, g_eps05.x.size() ? g_eps05.x
                                                                          : VectorXd::Zero(7));
  print_capacity_table(std::cout, g_study.net, g_eps05.x.size() ? g_eps05.x : VectorXd::Zero(7));
  const bool ok = g_eps05.status == EvaluationStatus::optimal &&
                  (g_eps05.x.array() > 1e-3).all() && t.pv_kw >= 2000 && t.pv_kw <= 25000 &&
                  t.ev_kw >= 2000 && t.ev_kw <= 25000 && secs < 600;
  return {ok, std::string("status ") + to_string(g_eps05.status) + ", PV " +
                  fmt("%.3f", t.pv_kw / 1000) + " MW, EV " + fmt("%.3f", t.ev_kw / 1000) +
                  " MW, " + fmt("%.1f", secs) + " s"};
}

Outcome criterion2() {
  const std::vector<double> eps = {0.20, 0.15, 0.10, 0.05, 0.01};
  IterationSettings s = g_config.iteration;
  s.screen_constraints = true;
  const ProblemData d = build_problem(g_study);
  std::vector<double> pv, ev;
  bool ok = true;
  std::ostringstream detail;
  for (double e : eps) {
    s.epsilon = e;
    const EvaluationResult r = run(d, s);
    if (e == 0.10) g_eps10 = r;
    const bool good = r.status == EvaluationStatus::optimal && r.screening_verified;
    ok = ok && good;
    const CapacityTotals t = good ? capacity_totals(g_study.net, r.x) : CapacityTotals{};
    pv.push_back(t.pv_kw / 1000);
    ev.push_back(t.ev_kw / 1000);
    detail << "  1-eps " << fmt("%.2f", 1 - e) << ": PV " << fmt("%.5f", pv.back()) << " EV "
           << fmt("%.5f", ev.back()) << " MW, " << r.iterations << " iterations"
           << (r.converged ? "" : " (iteration cap)") << "\n";
  }
  std::cout << detail.str();
  const bool pv_ok = nonincreasing(pv, 1e-5), ev_ok = nonincreasing(ev, 1e-5);
  return {ok && pv_ok && ev_ok, std::string("PV ") + (pv_ok ? "nonincreasing" : "NOT nonincreasing") +
                                    ", EV " + (ev_ok ? "nonincreasing" : "NOT nonincreasing") +
                                    " in confidence"};
}

Outcome criterion3() {
  const ProblemData d = build_problem(g_study);
  bool ok = true;
  std::ostringstream detail;
  for (const auto& [eps, r] : {std::pair{0.05, &g_eps05}, std::pair{0.10, &g_eps10}}) {
    if (r->status != EvaluationStatus::optimal) {
      detail << "  eps " << eps << ": no optimal result to check\n";
      ok = false;
      continue;
    }
    for (auto f : all_families()) {
      ViolationOptions opt;
      opt.workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
      const auto rep = empirical_violation(r->x, d.ineqs, build_distribution(g_study.spec, f),
                                           100000, g_config.seed, opt);
      ok = ok && rep.passes(eps);
      detail << "  eps " << eps << " " << to_string(f) << ": p = " << rep.probability
             << " (half-width " << fmt("%.4f", rep.half_width()) << ", rows checked "
             << rep.rows_checked << ")" << (rep.passes(eps) ? "" : " BREACH") << "\n";
    }
  }
  std::cout << detail.str();
  return {ok, "empirical joint violation <= eps + 99% half-width, 3 families, n = 1e5"};
}

Outcome criterion5() {
  std::mt19937_64 rng(505);
  std::uniform_real_distribution<double> U(-1, 1);
  double worst = 0.0;
  for (int t = 0; t < 50; ++t) {
    const int Z = 1 + t % 4;
    VectorXd y(Z), mu(Z);
    MatrixXd L(Z, Z);
    for (int z = 0; z < Z; ++z) y[z] = U(rng) * 2, mu[z] = 0.3 * U(rng);
    for (int i = 0; i < Z * Z; ++i) L.data()[i] = 0.4 * U(rng);
    const MatrixXd sigma = L * L.transpose() + 0.005 * MatrixXd::Identity(Z, Z);
    const double eps = 0.01 + 0.49 * 0.5 * (U(rng) + 1);
    const double y0 = 2 * U(rng);
    const ProblemData d = single_row_problem(y0, y, mu, sigma, 1e6);
    const double got = wc_cvar_value(d, VectorXd::Ones(1), VectorXd::Ones(1), eps);
    const double want = closed_form_wc_cvar(y0, y, mu, sigma, eps);
    worst = std::max(worst, std::abs(got - want) / std::max(1.0, std::abs(want)));
  }
  return {worst <= 1e-3, "50 instances, worst relative error " + fmt("%.2e", worst)};
}

Outcome criterion6() {
  using namespace hostcap::sdp;
  double worst_gap = 0.0, worst_err = 0.0;
  bool all_optimal = true;
  auto account = [&](const SdpSolution& s, double value, double oracle) {
    all_optimal = all_optimal && s.status == SolveStatus::optimal;
    worst_gap = std::max(worst_gap, s.gap);
    worst_err = std::max(worst_err, std::abs(value - oracle) / std::max(1.0, std::abs(oracle)));
  };
  {
    SdpProblem p(1);
    p.objective()[0] = 1.0;
    PsdBlock b(2);
    b.add_constant(0, 1, 1.0);
    b.add_coefficient(0, 0, 0, 1.0);
    b.add_coefficient(0, 1, 1, 1.0);
    p.add_block(std::move(b));
    const auto s = solve(p);
    account(s, s.primal[0], 1.0);
  }
  std::mt19937_64 rng(606);
  std::normal_distribution<double> N(0, 1);
  for (int t = 0; t < 20; ++t) {
    const int n = 2 + t % 5;
    MatrixXd A(n, n);
    for (int i = 0; i < n * n; ++i) A.data()[i] = N(rng);
    A = (0.5 * (A + A.transpose())).eval();
    SdpProblem p(1);
    p.objective()[0] = 1.0;
    PsdBlock b(n);
    for (int i = 0; i < n; ++i) {
      b.add_coefficient(0, i, i, 1.0);
      for (int j = i; j < n; ++j) b.add_constant(i, j, -A(i, j));
    }
    p.add_block(std::move(b));
    const auto s = solve(p);
    account(s, s.primal[0], Eigen::SelfAdjointEigenSolver<MatrixXd>(A).eigenvalues().maxCoeff());
  }
  std::uniform_real_distribution<double> U(-1, 1);
  for (int t = 0; t < 20; ++t) {
    const int n = 5, m = 5;
    MatrixXd G = MatrixXd::Zero(m + 2 * n, n);
    VectorXd h(m + 2 * n), c(n);
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < n; ++j) G(i, j) = U(rng);
      h[i] = 1.0 + 0.5 * U(rng);
    }
    for (int j = 0; j < n; ++j) {
      G(m + 2 * j, j) = 1, h[m + 2 * j] = 2;
      G(m + 2 * j + 1, j) = -1, h[m + 2 * j + 1] = 2;
      c[j] = U(rng);
    }
    SdpProblem p(n);
    p.objective() = c;
    for (int i = 0; i < G.rows(); ++i) {
      PsdBlock b(1);
      b.add_constant(0, 0, h[i]);
      for (int j = 0; j < n; ++j)
        if (G(i, j) != 0) b.add_coefficient(j, 0, 0, -G(i, j));
      p.add_block(std::move(b));
    }
    const auto s = solve(p);
    account(s, s.primal_objective, vertex_enumeration_min(G, h, c));
  }
  return {all_optimal && worst_gap <= 1e-7 && worst_err <= 1e-6,
          "41 instances, worst gap " + fmt("%.2e", worst_gap) + ", worst oracle error " +
              fmt("%.2e", worst_err)};
}

Outcome criterion7() {
  bool ok = true;
  std::ostringstream detail;
  const std::pair<const char*, Study> cases[] = {
      {"2-bus", two_bus_study()}, {"3-bus", three_bus_study()}, {"33-bus", g_study}};
  for (const auto& [name, st] : cases) {
    const ProblemData d = build_problem(st);
    const LpResult elim = solve_nominal_lp(d.ineqs, d.objective, VectorXd::Zero(d.dimension()));
    const DirectLp direct = direct_lp(st.net, st.profiles);
    const auto s = sdp::solve(direct.problem);
    const double diff = rel_diff(elim.objective, s.primal_objective);
    const bool good = elim.status == sdp::SolveStatus::optimal &&
                      s.status == sdp::SolveStatus::optimal && diff <= 1e-6;
    ok = ok && good;
    detail << "  " << name << ": eliminated " << fmt("%.8f", elim.objective) << ", direct "
           << fmt("%.8f", s.primal_objective) << ", rel diff " << fmt("%.1e", diff) << "\n";
  }
  std::cout << detail.str();
  return {ok, "eliminated LP equals the LP with flow and voltage equalities"};
}

Outcome criterion8() {
  bool ok = true;
  std::ostringstream detail;
  const std::pair<const char*, Study> cases[] = {
      {"2-bus", two_bus_study()}, {"3-bus", three_bus_study()}, {"33-bus", g_study}};
  for (const auto& [name, st] : cases) {
    ProblemData d = build_problem(st);
    for (auto& m : d.ineqs) {
      m.a.rightCols(m.dimension()).setZero();
      m.b.tail(m.dimension()).setZero();
    }
    const LpResult lp = solve_nominal_lp(d.ineqs, d.objective, VectorXd::Zero(d.dimension()));
    const EvaluationResult r = run(d, g_config.iteration);
    const double diff = rel_diff(r.objective, lp.objective);
    const bool good = r.status == EvaluationStatus::optimal && diff <= 1e-6;
    ok = ok && good;
    detail << "  " << name << ": iterate " << fmt("%.8f", r.objective) << ", LP "
           << fmt("%.8f", lp.objective) << ", rel diff " << fmt("%.1e", diff) << "\n";
  }
  std::cout << detail.str();
  return {ok, "y^z = 0 reproduces the deterministic LP optimum"};
}

Outcome criterion9() {
  const NetworkModel net = two_bus_study().net;
  const std::vector<Face> faces = octagon_faces(net);
  const double s = net.branch(0).s_limit;
  std::mt19937_64 rng(909);
  std::uniform_real_distribution<double> U(0, 1);
  int outside = 0;
  for (int i = 0; i < 10000; ++i) {
    const double r = s * std::sqrt(U(rng)), t = 2 * std::numbers::pi * U(rng);
    const double p = r * std::cos(t), q = r * std::sin(t);
    for (const Face& f : faces)
      if (f.np * p + f.nq * q > f.h * (1 + 1e-12)) {
        ++outside;
        break;
      }
  }
  const double overshoot = max_radial_extent(faces) / s;
  const double err = std::abs(overshoot - 1.0 / std::cos(std::numbers::pi / 8));
  return {faces.size() == 8 && outside == 0 && err <= 1e-6,
          std::to_string(outside) + " of 10000 disc points outside, overshoot " +
              fmt("%.9f", overshoot) + " (error " + fmt("%.1e", err) + ")"};
}

Outcome criterion10() {
  IterationSettings s = g_config.iteration;
  s.screen_constraints = true;
  std::vector<double> total;
  bool ok = true;
  std::ostringstream detail;
  for (double mu : {-0.1, 0.0, 0.1}) {
    Study st = g_study;
    set_category_mean(st.spec, Category::PV, mu);
    set_category_mean(st.spec, Category::EV, mu);
    const EvaluationResult r = run(build_problem(st), s);
    ok = ok && r.status == EvaluationStatus::optimal && r.screening_verified;
    const CapacityTotals t =
        r.status == EvaluationStatus::optimal ? capacity_totals(st.net, r.x) : CapacityTotals{};
    total.push_back((t.pv_kw + t.ev_kw) / 1000);
    detail << "  mu " << fmt("%+.1f", mu) << ": total " << fmt("%.5f", total.back()) << " MW\n";
  }
  std::cout << detail.str();
  const bool mono = nonincreasing(total, 1e-5);
  return {ok && mono, std::string("total capacity ") + (mono ? "nonincreasing" : "NOT nonincreasing") +
                          " in the common mean"};
}

Outcome criterion4() {
  int bad = 0;
  for (const auto& t : g_traces)
    for (std::size_t i = 1; i < t.size(); ++i)
      if (t[i] > t[i - 1] + 1e-6) ++bad;
  return {bad == 0 && !g_traces.empty(),
          std::to_string(g_traces.size()) + " runs, " + std::to_string(bad) + " increasing steps"};
}

}  // namespace

int main() {
  // Criterion 4 reads the traces of every run, so it goes last.
  const std::vector<std::pair<int, std::function<Outcome()>>> order = {
      {1, criterion1}, {2, criterion2}, {3, criterion3},  {5, criterion5}, {6, criterion6},
      {7, criterion7}, {8, criterion8}, {9, criterion9}, {10, criterion10}, {4, criterion4}};
  std::vector<std::pair<int, Outcome>> results;
  for (const auto& [n, f] : order) {
    Outcome o;
    try {
      o = f();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::cout << "criterion " << n << ": " << (o.pass ? "PASS" : "FAIL") << "  " << o.summary
              << std::endl;
    results.emplace_back(n, o);
  }
  std::sort(results.begin(), results.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  std::cout << "\nsummary\n";
  int failed = 0;
  for (const auto& [n, o] : results) {
    std::cout << "criterion " << n << ": " << (o.pass ? "PASS" : "FAIL") << "\n";
    failed += !o.pass;
  }
  return failed == 0 ? 0 : 1;
}

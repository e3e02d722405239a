#pragma once

// Fixtures and independent oracles shared by the unit tests and the
// acceptance runner. Nothing here calls into detmodel or uncertainty for
// the quantity it is checking.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hostcap/config.hpp"
#include "hostcap/detmodel.hpp"
#include "hostcap/netmodel.hpp"
#include "hostcap/sdp.hpp"
#include "hostcap/study.hpp"
#include "hostcap/uncertainty.hpp"
#include "hostcap/wccvar.hpp"

namespace testing_support {

using namespace hostcap;

inline std::filesystem::path data_dir() { return HOSTCAP_TEST_DATA_DIR; }

// Substation 1 at 10.5 kV feeding bus 2 (1000 kW at pf ~0.894) over
// r = x = 0.1 ohm. PV and EV candidates both at bus 2.
inline const char* kTwoBusJson = R"({
  "slot_count": 2,
  "buses": [
    {"id": 1, "kind": "substation", "v_ref_kv": 10.5},
    {"id": 2, "kind": "load", "v_lower_kv": 10.0, "v_upper_kv": 10.8,
     "base_load_kw": 1000, "base_load_kvar": 500}
  ],
  "branches": [{"from": 1, "to": 2, "r_ohm": 0.1, "x_ohm": 0.1, "s_limit_kva": 3000}],
  "pv_candidates": [2],
  "ev_candidates": [2],
  "weights": {"pv": 1.0, "ev": 1.0}
})";

inline const char* kTwoBusProfiles =
    "slot,pv,ev,other\n"
    "1,1.0,0.2,0.6\n"
    "2,0.0,0.9,1.0\n";

// Chain 1-2-3, PV at the far end, EV in the middle.
inline const char* kThreeBusJson = R"({
  "slot_count": 3,
  "buses": [
    {"id": 1, "kind": "substation", "v_ref_kv": 10.5},
    {"id": 2, "kind": "load", "v_lower_kv": 10.0, "v_upper_kv": 10.8,
     "base_load_kw": 400, "base_load_kvar": 200},
    {"id": 3, "kind": "load", "v_lower_kv": 10.0, "v_upper_kv": 10.8,
     "base_load_kw": 300, "base_load_kvar": 100}
  ],
  "branches": [
    {"from": 1, "to": 2, "r_ohm": 0.8, "x_ohm": 0.5, "s_limit_kva": 2500},
    {"from": 2, "to": 3, "r_ohm": 1.2, "x_ohm": 0.9, "s_limit_kva": 1800}
  ],
  "pv_candidates": [3],
  "ev_candidates": [2],
  "weights": {"pv": 1.0, "ev": 1.0}
})";

inline const char* kThreeBusProfiles =
    "slot,pv,ev,other\n"
    "1,0.0,0.3,0.5\n"
    "2,0.9,0.5,0.8\n"
    "3,0.4,1.0,1.0\n";

inline double pv_angle() { return std::acos(0.95); }
inline double ev_angle() { return std::acos(0.97); }

inline Study two_bus_study() {
  return {parse_network(kTwoBusJson), parse_profiles(kTwoBusProfiles, pv_angle(), ev_angle()),
          UncertaintySpec::per_category(0.0, 0.01, -0.25, 0.25)};
}

inline Study three_bus_study() {
  return {parse_network(kThreeBusJson),
          parse_profiles(kThreeBusProfiles, pv_angle(), ev_angle()),
          UncertaintySpec::per_category(0.0, 0.01, -0.25, 0.25)};
}

inline Study ieee33_study() {
  RunConfig c = load_config(data_dir() / "config.json");
  return load_study(c);
}

inline RunConfig ieee33_config() { return load_config(data_dir() / "config.json"); }

/// Relative difference against the larger magnitude, floored at 1.
inline double rel_diff(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

// ---------------------------------------------------------------------------
// Direct LP over flows, reactive flows and squared voltages with the
// balance and drop equations kept as equality rows. Injections are built
// here from the raw bus and profile data.

struct DirectLp {
  sdp::SdpProblem problem{1};
  int n_x = 0;
};

inline DirectLp direct_lp(const NetworkModel& net, const ProfileSet& prof) {
  const int E = net.branch_count();
  const int B = net.bus_count();
  const int T = net.slot_count();
  const auto& pv = net.pv_candidates();
  const auto& ev = net.ev_candidates();
  const int n_x = static_cast<int>(pv.size() + ev.size());
  // Per slot: p_e, q_e for every branch, U_b for every bus (root fixed by a row).
  const int per_slot = 2 * E + B;
  auto p_var = [&](int k, int e) { return n_x + k * per_slot + e; };
  auto q_var = [&](int k, int e) { return n_x + k * per_slot + E + e; };
  auto u_var = [&](int k, int b) { return n_x + k * per_slot + 2 * E + b; };

  DirectLp out;
  out.n_x = n_x;
  out.problem = sdp::SdpProblem(n_x + T * per_slot);
  sdp::SdpProblem& lp = out.problem;
  for (std::size_t i = 0; i < pv.size(); ++i) lp.objective()[i] = -net.pv_weight(pv[i]);
  for (std::size_t i = 0; i < ev.size(); ++i)
    lp.objective()[pv.size() + i] = -net.ev_weight(ev[i]);
  for (int i = 0; i < n_x; ++i) lp.add_lower_bound(i, 0.0);

  const double tpv = std::tan(prof.pv_pf_angle);
  const double tev = std::tan(prof.ev_pf_angle);
  const double k2 = 2.0 * net.voltage_drop_scale();
  const double r2 = std::sqrt(2.0);

  for (int k = 0; k < T; ++k) {
    for (int b = 0; b < B; ++b) {
      if (net.is_substation(b)) {
        const double v = net.bus(b).v_ref;
        lp.add_row({{{u_var(k, b), 1.0}}, sdp::RowSense::equal, v * v});
        continue;
      }
      // Inflow - outflow + injection = 0, written for P and Q.
      sdp::LinearRow rp, rq;
      rp.sense = rq.sense = sdp::RowSense::equal;
      for (int e = 0; e < E; ++e) {
        if (net.branch(e).to == b) {
          rp.coefs.emplace_back(p_var(k, e), 1.0);
          rq.coefs.emplace_back(q_var(k, e), 1.0);
        }
        if (net.branch(e).from == b) {
          rp.coefs.emplace_back(p_var(k, e), -1.0);
          rq.coefs.emplace_back(q_var(k, e), -1.0);
        }
      }
      for (std::size_t i = 0; i < pv.size(); ++i)
        if (pv[i] == b) {
          rp.coefs.emplace_back(static_cast<int>(i), prof.pv_shape[k]);
          rq.coefs.emplace_back(static_cast<int>(i), tpv * prof.pv_shape[k]);
        }
      for (std::size_t i = 0; i < ev.size(); ++i)
        if (ev[i] == b) {
          const int v = static_cast<int>(pv.size() + i);
          rp.coefs.emplace_back(v, -prof.ev_shape[k]);
          rq.coefs.emplace_back(v, -tev * prof.ev_shape[k]);
        }
      const double load = prof.other_shape[k] * net.bus(b).base_load_p;
      rp.rhs = load;
      rq.rhs = std::tan(net.bus(b).other_angle(k)) * load;
      lp.add_row(std::move(rp));
      lp.add_row(std::move(rq));
      const double lo = net.bus(b).v_lower, hi = net.bus(b).v_upper;
      lp.add_row({{{u_var(k, b), 1.0}}, sdp::RowSense::less_equal, hi * hi});
      lp.add_row({{{u_var(k, b), 1.0}}, sdp::RowSense::greater_equal, lo * lo});
    }
    for (int e = 0; e < E; ++e) {
      const Branch& br = net.branch(e);
      lp.add_row({{{u_var(k, br.to), 1.0},
                   {u_var(k, br.from), -1.0},
                   {p_var(k, e), k2 * br.r},
                   {q_var(k, e), k2 * br.x}},
                  sdp::RowSense::equal,
                  0.0});
      const double s = br.s_limit;
      const int p = p_var(k, e), q = q_var(k, e);
      for (double sg : {1.0, -1.0}) {
        lp.add_row({{{p, sg}}, sdp::RowSense::less_equal, s});
        lp.add_row({{{q, sg}}, sdp::RowSense::less_equal, s});
        lp.add_row({{{p, sg}, {q, sg}}, sdp::RowSense::less_equal, r2 * s});
        lp.add_row({{{p, sg}, {q, -sg}}, sdp::RowSense::less_equal, r2 * s});
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Octagon geometry from the emitted rows: each face is n^T (p, q) <= h.

struct Face {
  double np, nq, h;
};

/// Faces of branch 0 in slot 0 of a network whose injections are zero
/// except at the single downstream bus of that branch.
inline std::vector<Face> octagon_faces(const NetworkModel& net) {
  const auto flows = flow_functionals(net);
  const auto rows = octagon_inequalities(net, flows);
  std::vector<Face> faces;
  const int leaf = net.branch(0).to;
  for (const auto& r : rows) {
    if (r.element != 0 || r.slot != 0) continue;
    // p = -P_leaf, q = -Q_leaf, so the normal in (p, q) is minus the
    // sensitivity to (P_leaf, Q_leaf).
    faces.push_back({-r.lhs.dp[leaf], -r.lhs.dq[leaf], -r.lhs.constant});
  }
  return faces;
}

/// Distance from the origin to the polytope boundary along angle theta.
inline double radial_extent(const std::vector<Face>& faces, double theta) {
  const double c = std::cos(theta), s = std::sin(theta);
  double r = std::numeric_limits<double>::infinity();
  for (const Face& f : faces) {
    const double d = f.np * c + f.nq * s;
    if (d > 1e-15) r = std::min(r, f.h / d);
  }
  return r;
}

/// Maximum of radial_extent: dense scan followed by golden-section
/// refinement around the best grid angle.
inline double max_radial_extent(const std::vector<Face>& faces) {
  const int n = 4096;
  const double two_pi = 2.0 * std::numbers::pi;
  int best = 0;
  double best_r = -1.0;
  for (int i = 0; i < n; ++i) {
    const double r = radial_extent(faces, two_pi * i / n);
    if (r > best_r) best_r = r, best = i;
  }
  double a = two_pi * (best - 1) / n, b = two_pi * (best + 1) / n;
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  for (int it = 0; it < 200; ++it) {
    const double c = b - g * (b - a), d = a + g * (b - a);
    if (radial_extent(faces, c) > radial_extent(faces, d))
      b = d;
    else
      a = c;
  }
  return std::max(best_r, radial_extent(faces, 0.5 * (a + b)));
}

// ---------------------------------------------------------------------------
// Vertex enumeration for min c^T x s.t. G x <= h (bounded).

inline double vertex_enumeration_min(const Eigen::MatrixXd& G, const Eigen::VectorXd& h,
                                     const Eigen::VectorXd& c) {
  const int m = static_cast<int>(G.rows()), n = static_cast<int>(G.cols());
  std::vector<int> pick(n);
  for (int i = 0; i < n; ++i) pick[i] = i;
  double best = std::numeric_limits<double>::infinity();
  while (true) {
    Eigen::MatrixXd A(n, n);
    Eigen::VectorXd rhs(n);
    for (int i = 0; i < n; ++i) A.row(i) = G.row(pick[i]), rhs[i] = h[pick[i]];
    Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
    if (lu.isInvertible()) {
      const Eigen::VectorXd x = lu.solve(rhs);
      if (((G * x - h).array() <= 1e-9).all()) best = std::min(best, c.dot(x));
    }
    int i = n - 1;
    while (i >= 0 && pick[i] == m - n + i) --i;
    if (i < 0) break;
    ++pick[i];
    for (int j = i + 1; j < n; ++j) pick[j] = pick[j - 1] + 1;
  }
  return best;
}

// ---------------------------------------------------------------------------
// Single-row worst-case CVaR without a support restriction.

inline double closed_form_wc_cvar(double y0, const Eigen::VectorXd& y, const Eigen::VectorXd& mu,
                                  const Eigen::MatrixXd& sigma, double eps) {
  return y0 + mu.dot(y) + std::sqrt((1.0 - eps) / eps) * std::sqrt(y.dot(sigma * y));
}

/// One-row ProblemData with x = (1) so that y(x) equals the given vector.
inline ProblemData single_row_problem(double y0, const Eigen::VectorXd& y,
                                      const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma,
                                      double half_width) {
  const int Z = static_cast<int>(y.size());
  AffineInequality m;
  m.a = Eigen::MatrixXd::Zero(1, Z + 1);
  m.a(0, 0) = y0;
  m.a.block(0, 1, 1, Z) = y.transpose();
  m.b = Eigen::VectorXd::Zero(Z + 1);
  UncertaintySpec spec;
  spec.mean = mu;
  spec.covariance = sigma;
  spec.bounds.assign(Z, {-half_width, half_width});
  spec.map.assign(Z, ComponentSelector{});
  return make_problem_data({m}, spec, Eigen::VectorXd::Constant(1, -1.0));
}

}  // namespace testing_support

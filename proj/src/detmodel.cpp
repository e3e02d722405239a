#include "hostcap/detmodel.hpp"

#include <cmath>

#include "hostcap/error.hpp"

namespace hostcap {

const char* to_string(Category c) {
  switch (c) {
    case Category::PV: return "PV";
    case Category::EV: return "EV";
    case Category::OT: return "OT";
  }
  return "?";
}

const char* to_string(InequalityKind k) {
  switch (k) {
    case InequalityKind::voltage_upper: return "voltage_upper";
    case InequalityKind::voltage_lower: return "voltage_lower";
    case InequalityKind::octagon_p_pos: return "octagon_p+";
    case InequalityKind::octagon_p_neg: return "octagon_p-";
    case InequalityKind::octagon_q_pos: return "octagon_q+";
    case InequalityKind::octagon_q_neg: return "octagon_q-";
    case InequalityKind::octagon_sum_pos: return "octagon_p+q+";
    case InequalityKind::octagon_sum_neg: return "octagon_p+q-";
    case InequalityKind::octagon_diff_pos: return "octagon_p-q+";
    case InequalityKind::octagon_diff_neg: return "octagon_p-q-";
  }
  return "?";
}

bool is_voltage(InequalityKind k) {
  return k == InequalityKind::voltage_upper || k == InequalityKind::voltage_lower;
}

DecisionIndex::DecisionIndex(const NetworkModel& net) {
  buses_ = net.pv_candidates();
  pv_count_ = static_cast<int>(buses_.size());
  buses_.insert(buses_.end(), net.ev_candidates().begin(),
                net.ev_candidates().end());
  if (buses_.empty()) throw ValidationError("decision vector is empty");
}

int DecisionIndex::pv_var(int bus) const {
  for (int i = 0; i < pv_count_; ++i)
    if (buses_[i] == bus) return i;
  return -1;
}

int DecisionIndex::ev_var(int bus) const {
  for (int i = pv_count_; i < size(); ++i)
    if (buses_[i] == bus) return i;
  return -1;
}

InjectionExpr::InjectionExpr(int bus_count, int slot_count, int var_count)
    : buses_(bus_count),
      slots_(slot_count),
      vars_(var_count),
      terms_(static_cast<std::size_t>(bus_count) * slot_count) {}

AffineExpr InjectionExpr::active(int bus, int slot) const {
  const BusSlotInjection& t = at(bus, slot);
  AffineExpr e{Eigen::VectorXd::Zero(vars_), t.other_p};
  if (t.pv_var >= 0) e.coef[t.pv_var] += t.pv_p;
  if (t.ev_var >= 0) e.coef[t.ev_var] += t.ev_p;
  return e;
}

AffineExpr InjectionExpr::reactive(int bus, int slot) const {
  const BusSlotInjection& t = at(bus, slot);
  AffineExpr e{Eigen::VectorXd::Zero(vars_), t.other_q};
  if (t.pv_var >= 0) e.coef[t.pv_var] += t.pv_q;
  if (t.ev_var >= 0) e.coef[t.ev_var] += t.ev_q;
  return e;
}

InjectionExpr build_injections(const NetworkModel& net,
                               const ProfileSet& profiles) {
  const int T = net.slot_count();
  if (profiles.slot_count() != T)
    throw InvalidArgument("profiles have " +
                          std::to_string(profiles.slot_count()) +
                          " slots but the network expects " + std::to_string(T));
  profiles.validate(T);
  DecisionIndex idx(net);
  InjectionExpr inj(net.bus_count(), T, idx.size());
  const double tan_pv = std::tan(profiles.pv_pf_angle);
  const double tan_ev = std::tan(profiles.ev_pf_angle);
  for (int k = 0; k < T; ++k) {
    for (int b = 0; b < net.bus_count(); ++b) {
      if (net.is_substation(b)) continue;
      BusSlotInjection& t = inj.at(b, k);
      const Bus& bus = net.bus(b);
      const double p_other = profiles.other_shape[k] * bus.base_load_p;
      t.other_p = -p_other;
      t.other_q = -std::tan(bus.other_angle(k)) * p_other;
      if (int v = idx.pv_var(b); v >= 0) {
        t.pv_var = v;
        t.pv_p = profiles.pv_shape[k];
        t.pv_q = tan_pv * profiles.pv_shape[k];
      }
      if (int v = idx.ev_var(b); v >= 0) {
        t.ev_var = v;
        t.ev_p = -profiles.ev_shape[k];
        t.ev_q = -tan_ev * profiles.ev_shape[k];
      }
    }
  }
  return inj;
}

AffineExpr BusFunctional::compose(const InjectionExpr& inj, int slot) const {
  AffineExpr e{Eigen::VectorXd::Zero(inj.var_count()), constant};
  for (int b = 0; b < inj.bus_count(); ++b) {
    const double wp = dp[b];
    const double wq = dq[b];
    if (wp == 0.0 && wq == 0.0) continue;
    const BusSlotInjection& t = inj.at(b, slot);
    e.constant += wp * t.other_p + wq * t.other_q;
    if (t.pv_var >= 0) e.coef[t.pv_var] += wp * t.pv_p + wq * t.pv_q;
    if (t.ev_var >= 0) e.coef[t.ev_var] += wp * t.ev_p + wq * t.ev_q;
  }
  return e;
}

FlowFunctionals flow_functionals(const NetworkModel& net) {
  const int n = net.bus_count();
  const auto down = downstream_map(net);
  FlowFunctionals f;
  for (int e = 0; e < net.branch_count(); ++e) {
    // Flow into the subtree equals its net consumption.
    BusFunctional p{Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n), 0.0};
    BusFunctional q{Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n), 0.0};
    for (int b : down[e]) {
      p.dp[b] = -1.0;
      q.dq[b] = -1.0;
    }
    f.p.push_back(std::move(p));
    f.q.push_back(std::move(q));
  }
  return f;
}

VoltageFunctionals voltage_functionals(const NetworkModel& net,
                                       const FlowFunctionals& flows) {
  const int n = net.bus_count();
  const double v_ref = net.bus(net.substation()).v_ref;
  const double k = 2.0 * net.voltage_drop_scale();
  VoltageFunctionals out;
  out.u.resize(n);
  // Branches are in BFS order, so the upstream U is ready before its children.
  BusFunctional& root = out.u[net.substation()];
  root = {Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n), v_ref * v_ref};
  for (int e = 0; e < net.branch_count(); ++e) {
    const Branch& br = net.branch(e);
    const BusFunctional& up = out.u[br.from];
    BusFunctional& u = out.u[br.to];
    u.dp = up.dp - k * br.r * flows.p[e].dp - k * br.x * flows.q[e].dp;
    u.dq = up.dq - k * br.r * flows.p[e].dq - k * br.x * flows.q[e].dq;
    u.constant = up.constant - k * br.r * flows.p[e].constant -
                 k * br.x * flows.q[e].constant;
  }
  return out;
}

FlowExprs eliminate_flows(const NetworkModel& net, const InjectionExpr& inj) {
  const auto f = flow_functionals(net);
  FlowExprs out;
  out.p.resize(net.branch_count());
  out.q.resize(net.branch_count());
  for (int e = 0; e < net.branch_count(); ++e) {
    for (int s = 0; s < inj.slot_count(); ++s) {
      out.p[e].push_back(f.p[e].compose(inj, s));
      out.q[e].push_back(f.q[e].compose(inj, s));
    }
  }
  return out;
}

VoltageExprs eliminate_voltages(const NetworkModel& net,
                                const InjectionExpr& inj) {
  const auto u = voltage_functionals(net, flow_functionals(net));
  VoltageExprs out;
  out.u.resize(net.bus_count());
  for (int b = 0; b < net.bus_count(); ++b)
    for (int s = 0; s < inj.slot_count(); ++s)
      out.u[b].push_back(u.u[b].compose(inj, s));
  return out;
}

LinearInequalitySet voltage_inequalities(const NetworkModel& net,
                                         const VoltageFunctionals& u) {
  LinearInequalitySet out;
  for (int s = 0; s < net.slot_count(); ++s) {
    for (int b = 0; b < net.bus_count(); ++b) {
      if (net.is_substation(b)) continue;
      const Bus& bus = net.bus(b);
      BusFunctional hi = u.u[b];
      hi.constant -= bus.v_upper * bus.v_upper;
      BusFunctional lo{-u.u[b].dp, -u.u[b].dq,
                       -u.u[b].constant + bus.v_lower * bus.v_lower};
      out.push_back({InequalityKind::voltage_upper, b, s, std::move(hi)});
      out.push_back({InequalityKind::voltage_lower, b, s, std::move(lo)});
    }
  }
  return out;
}

LinearInequalitySet octagon_inequalities(const NetworkModel& net,
                                         const FlowFunctionals& flows) {
  struct Face {
    InequalityKind kind;
    double wp, wq, radius;
  };
  const double r2 = std::sqrt(2.0);
  const Face faces[] = {
      {InequalityKind::octagon_p_pos, 1, 0, 1},
      {InequalityKind::octagon_p_neg, -1, 0, 1},
      {InequalityKind::octagon_q_pos, 0, 1, 1},
      {InequalityKind::octagon_q_neg, 0, -1, 1},
      {InequalityKind::octagon_sum_pos, 1, 1, r2},
      {InequalityKind::octagon_sum_neg, -1, -1, r2},
      {InequalityKind::octagon_diff_pos, 1, -1, r2},
      {InequalityKind::octagon_diff_neg, -1, 1, r2},
  };
  LinearInequalitySet out;
  for (int s = 0; s < net.slot_count(); ++s) {
    for (int e = 0; e < net.branch_count(); ++e) {
      const BusFunctional& p = flows.p[e];
      const BusFunctional& q = flows.q[e];
      for (const Face& f : faces) {
        BusFunctional lhs{f.wp * p.dp + f.wq * q.dp, f.wp * p.dq + f.wq * q.dq,
                          f.wp * p.constant + f.wq * q.constant -
                              f.radius * net.branch(e).s_limit};
        out.push_back({f.kind, e, s, std::move(lhs)});
      }
    }
  }
  return out;
}

LinearInequalitySet build_inequalities(const NetworkModel& net) {
  const auto flows = flow_functionals(net);
  auto out = voltage_inequalities(net, voltage_functionals(net, flows));
  auto oct = octagon_inequalities(net, flows);
  out.insert(out.end(), std::make_move_iterator(oct.begin()),
             std::make_move_iterator(oct.end()));
  return out;
}

Eigen::VectorXd objective_vector(const NetworkModel& net) {
  DecisionIndex idx(net);
  Eigen::VectorXd c(idx.size());
  for (int i = 0; i < idx.size(); ++i) {
    const int b = idx.bus(i);
    const double w = idx.category(i) == Category::PV ? net.pv_weight(b)
                                                     : net.ev_weight(b);
    if (!(w > 0.0))
      throw ValidationError("weight at bus " + std::to_string(net.id_of(b)) +
                            " must be positive");
    c[i] = -w;
  }
  return c;
}

std::string decision_label(const NetworkModel& net, const DecisionIndex& idx,
                           int i) {
  return std::string(to_string(idx.category(i))) + "@" +
         std::to_string(net.id_of(idx.bus(i)));
}

}  // namespace hostcap

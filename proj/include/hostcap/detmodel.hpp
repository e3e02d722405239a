#pragma once

// Linearized deterministic capacity model. Branch flows and squared
// voltages are eliminated through the radial structure, leaving only
// inequalities that are affine in the capacity vector x.

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hostcap/netmodel.hpp"

namespace hostcap {

enum class Category { PV, EV, OT };

const char* to_string(Category c);

/// x = (S_pv for each PV candidate, S_ev for each EV candidate), in kVA.
class DecisionIndex {
 public:
  explicit DecisionIndex(const NetworkModel& net);

  int size() const { return static_cast<int>(buses_.size()); }
  int pv_count() const { return pv_count_; }
  /// Internal bus index of coordinate i.
  int bus(int i) const { return buses_.at(i); }
  Category category(int i) const {
    return i < pv_count_ ? Category::PV : Category::EV;
  }
  /// Coordinate of the PV (EV) capacity at internal bus index, or -1.
  int pv_var(int bus) const;
  int ev_var(int bus) const;

 private:
  std::vector<int> buses_;
  int pv_count_ = 0;
};

/// An expression c^T x + constant.
struct AffineExpr {
  Eigen::VectorXd coef;
  double constant = 0.0;

  double operator()(const Eigen::VectorXd& x) const {
    return coef.dot(x) + constant;
  }
};

/// Category-separated injection terms at one bus in one slot. Generation is
/// positive, load negative. The x-coefficients are those of P (resp. Q).
struct BusSlotInjection {
  int pv_var = -1;
  double pv_p = 0.0, pv_q = 0.0;
  int ev_var = -1;
  double ev_p = 0.0, ev_q = 0.0;  // already negative
  double other_p = 0.0, other_q = 0.0;  // already negative
};

class InjectionExpr {
 public:
  InjectionExpr(int bus_count, int slot_count, int var_count);

  int bus_count() const { return buses_; }
  int slot_count() const { return slots_; }
  int var_count() const { return vars_; }

  BusSlotInjection& at(int bus, int slot) { return terms_[slot * buses_ + bus]; }
  const BusSlotInjection& at(int bus, int slot) const {
    return terms_[slot * buses_ + bus];
  }

  AffineExpr active(int bus, int slot) const;
  AffineExpr reactive(int bus, int slot) const;

 private:
  int buses_, slots_, vars_;
  std::vector<BusSlotInjection> terms_;
};

InjectionExpr build_injections(const NetworkModel& net,
                               const ProfileSet& profiles);

/// A linear functional of the bus injections of a single slot:
/// constant + sum_b dp[b] * P_b + dq[b] * Q_b. The sensitivities of flows
/// and voltages to injections do not depend on the slot.
struct BusFunctional {
  Eigen::VectorXd dp;
  Eigen::VectorXd dq;
  double constant = 0.0;

  AffineExpr compose(const InjectionExpr& inj, int slot) const;
};

/// Branch flows p_e, q_e as functionals of the injections.
struct FlowFunctionals {
  std::vector<BusFunctional> p;
  std::vector<BusFunctional> q;
};

/// Squared voltages U_i (kV^2) as functionals of the injections.
struct VoltageFunctionals {
  std::vector<BusFunctional> u;
};

FlowFunctionals flow_functionals(const NetworkModel& net);
VoltageFunctionals voltage_functionals(const NetworkModel& net,
                                       const FlowFunctionals& flows);

/// Per-slot affine expressions in x: index [element][slot].
struct FlowExprs {
  std::vector<std::vector<AffineExpr>> p;
  std::vector<std::vector<AffineExpr>> q;
};
struct VoltageExprs {
  std::vector<std::vector<AffineExpr>> u;
};

FlowExprs eliminate_flows(const NetworkModel& net, const InjectionExpr& inj);
VoltageExprs eliminate_voltages(const NetworkModel& net,
                                const InjectionExpr& inj);

enum class InequalityKind {
  voltage_upper,
  voltage_lower,
  octagon_p_pos,
  octagon_p_neg,
  octagon_q_pos,
  octagon_q_neg,
  octagon_sum_pos,
  octagon_sum_neg,
  octagon_diff_pos,
  octagon_diff_neg,
};

const char* to_string(InequalityKind k);
bool is_voltage(InequalityKind k);

/// lhs(P, Q) <= 0 in slot `slot`. `element` is an internal bus index for
/// voltage rows and a branch index for octagon rows.
struct LinearInequality {
  InequalityKind kind;
  int element = 0;
  int slot = 0;
  BusFunctional lhs;

  /// g^T x + g0 <= 0 in terms of the capacities.
  AffineExpr in_x(const InjectionExpr& inj) const { return lhs.compose(inj, slot); }
};

using LinearInequalitySet = std::vector<LinearInequality>;

/// Two rows per non-substation bus per slot: U <= v_upper^2, -U <= -v_lower^2.
LinearInequalitySet voltage_inequalities(const NetworkModel& net,
                                         const VoltageFunctionals& u);

/// Eight rows per branch per slot: the circumscribed octagon of the disc
/// p^2 + q^2 <= s^2.
LinearInequalitySet octagon_inequalities(const NetworkModel& net,
                                         const FlowFunctionals& flows);

/// All voltage rows followed by all octagon rows.
LinearInequalitySet build_inequalities(const NetworkModel& net);

/// c_i = -alpha_i so that minimizing c^T x maximizes weighted capacity.
Eigen::VectorXd objective_vector(const NetworkModel& net);

/// Human-readable label of coordinate i, e.g. "PV@17".
std::string decision_label(const NetworkModel& net, const DecisionIndex& idx,
                           int i);

}  // namespace hostcap

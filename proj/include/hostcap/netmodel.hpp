#pragma once

// Radial distribution network data model: buses, branches, candidate sets,
// and per-slot profiles. Units are kV, kW, kvar, kVA and ohm throughout.

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace hostcap {

enum class BusKind { substation, load };

struct Bus {
  int id = 0;  // external id as it appears in the input file
  BusKind kind = BusKind::load;
  double v_ref = 0.0;    // kV, substation only
  double v_lower = 0.0;  // kV, non-substation only
  double v_upper = 0.0;  // kV, non-substation only
  double base_load_p = 0.0;  // kW reference for the other-load profile
  // Power factor angle of the other load (radians). One entry means a
  // constant angle; otherwise one entry per slot.
  std::vector<double> pf_angle_other{0.0};

  double other_angle(int slot) const {
    return pf_angle_other.size() == 1 ? pf_angle_other[0]
                                      : pf_angle_other.at(slot);
  }
};

/// Branch oriented away from the substation: `from` is the upstream end.
/// Bus references are internal (contiguous) indices.
struct Branch {
  int from = 0;
  int to = 0;
  double r = 0.0;        // ohm
  double x = 0.0;        // ohm
  double s_limit = 0.0;  // kVA
};

class NetworkModel {
 public:
  /// Validates and normalizes. Buses are sorted by external id; branches are
  /// given with external ids and re-oriented away from the substation.
  struct BranchSpec {
    int from_id;
    int to_id;
    double r;
    double x;
    double s_limit;
  };

  NetworkModel(std::vector<Bus> buses, const std::vector<BranchSpec>& branches,
               std::vector<int> pv_candidate_ids,
               std::vector<int> ev_candidate_ids,
               std::map<int, double> pv_weights,
               std::map<int, double> ev_weights, int slot_count,
               double voltage_drop_scale = 1e-3);

  int bus_count() const { return static_cast<int>(buses_.size()); }
  int branch_count() const { return static_cast<int>(branches_.size()); }
  int slot_count() const { return slot_count_; }

  const std::vector<Bus>& buses() const { return buses_; }
  const std::vector<Branch>& branches() const { return branches_; }
  const Bus& bus(int index) const { return buses_.at(index); }
  const Branch& branch(int index) const { return branches_.at(index); }

  /// Internal index of the (single) substation bus.
  int substation() const { return substation_; }
  bool is_substation(int index) const { return index == substation_; }

  /// Candidate sets as internal indices, in ascending external-id order.
  const std::vector<int>& pv_candidates() const { return pv_candidates_; }
  const std::vector<int>& ev_candidates() const { return ev_candidates_; }
  double pv_weight(int index) const;
  double ev_weight(int index) const;

  int index_of(int bus_id) const;
  int id_of(int index) const { return buses_.at(index).id; }

  /// Index of the branch whose downstream end is `bus`, or -1 at the root.
  int parent_branch(int bus) const { return parent_branch_.at(bus); }
  /// Number of branches between the substation and `bus`.
  int depth(int bus) const { return depth_.at(bus); }

  /// Converts 2 * ohm * kW into kV^2 inside the linearized voltage drop.
  /// 1e-3 for physical units; 1 for per-unit data.
  double voltage_drop_scale() const { return voltage_drop_scale_; }

 private:
  std::vector<Bus> buses_;
  std::vector<Branch> branches_;
  std::vector<int> pv_candidates_;
  std::vector<int> ev_candidates_;
  std::map<int, double> pv_weights_;  // keyed by internal index
  std::map<int, double> ev_weights_;
  std::map<int, int> index_by_id_;
  std::vector<int> parent_branch_;
  std::vector<int> depth_;
  int substation_ = 0;
  int slot_count_ = 24;
  double voltage_drop_scale_ = 1e-3;
};

/// Per-slot per-unit shapes shared by all candidate buses.
struct ProfileSet {
  std::vector<double> pv_shape;     // in [0,1]
  std::vector<double> ev_shape;     // in [0,1]
  std::vector<double> other_shape;  // multiplier of Bus::base_load_p
  double pv_pf_angle = 0.0;         // radians
  double ev_pf_angle = 0.0;         // radians

  int slot_count() const { return static_cast<int>(pv_shape.size()); }
  /// Throws ValidationError on length mismatch or out-of-range entries.
  void validate(int expected_slots) const;
};

NetworkModel load_network(const std::filesystem::path& path);
NetworkModel parse_network(const std::string& json_text);

/// CSV with header `slot,pv,ev,other`; angles are supplied separately.
ProfileSet load_profiles(const std::filesystem::path& path,
                         double pv_pf_angle, double ev_pf_angle);
ProfileSet parse_profiles(const std::string& csv_text, double pv_pf_angle,
                          double ev_pf_angle);

/// For every branch, the internal indices of the buses downstream of it
/// (including its `to` end), sorted ascending.
std::vector<std::vector<int>> downstream_map(const NetworkModel& net);

/// Branch indices from the substation down to `bus_id` (external id).
std::vector<int> path_to_root(const NetworkModel& net, int bus_id);

}  // namespace hostcap

#include "hostcap/netmodel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <queue>
#include <set>
#include <sstream>

#include <json.hpp>

#include "hostcap/error.hpp"

namespace hostcap {

namespace {

using nlohmann::json;

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Union-find used for the acyclicity check while branches are added.
class DisjointSets {
 public:
  explicit DisjointSets(int n) : parent_(n) {
    std::iota(parent_.begin(), parent_.end(), 0);
  }
  int find(int a) {
    while (parent_[a] != a) a = parent_[a] = parent_[parent_[a]];
    return a;
  }
  bool unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent_[a] = b;
    return true;
  }

 private:
  std::vector<int> parent_;
};

std::map<int, double> parse_weights(const json& node,
                                    const std::vector<int>& ids) {
  std::map<int, double> out;
  if (node.is_null()) {
    for (int id : ids) out[id] = 1.0;
  } else if (node.is_number()) {
    for (int id : ids) out[id] = node.get<double>();
  } else if (node.is_object()) {
    for (int id : ids) {
      auto it = node.find(std::to_string(id));
      out[id] = it == node.end() ? 1.0 : it->get<double>();
    }
  } else {
    throw ParseError("weights must be a number or an object keyed by bus id");
  }
  return out;
}

}  // namespace

NetworkModel::NetworkModel(std::vector<Bus> buses,
                           const std::vector<BranchSpec>& branches,
                           std::vector<int> pv_candidate_ids,
                           std::vector<int> ev_candidate_ids,
                           std::map<int, double> pv_weights,
                           std::map<int, double> ev_weights, int slot_count,
                           double voltage_drop_scale)
    : buses_(std::move(buses)),
      slot_count_(slot_count),
      voltage_drop_scale_(voltage_drop_scale) {
  if (buses_.size() < 2) throw ValidationError("network needs at least 2 buses");
  if (slot_count_ < 1) throw ValidationError("slot_count must be >= 1");
  if (!(voltage_drop_scale_ > 0.0))
    throw ValidationError("voltage_drop_scale must be positive");

  std::sort(buses_.begin(), buses_.end(),
            [](const Bus& a, const Bus& b) { return a.id < b.id; });
  for (int i = 0; i < bus_count(); ++i) {
    if (!index_by_id_.emplace(buses_[i].id, i).second)
      throw ValidationError("duplicate bus id " + std::to_string(buses_[i].id));
  }

  int substations = 0;
  for (int i = 0; i < bus_count(); ++i) {
    const Bus& b = buses_[i];
    const std::string tag = "bus " + std::to_string(b.id);
    if (b.kind == BusKind::substation) {
      ++substations;
      substation_ = i;
      if (!(b.v_ref > 0.0)) throw ValidationError(tag + ": v_ref must be > 0");
    } else {
      if (!(b.v_lower > 0.0) || !(b.v_lower < b.v_upper))
        throw ValidationError(tag + ": require 0 < v_lower < v_upper");
      if (b.base_load_p < 0.0)
        throw ValidationError(tag + ": negative base load");
    }
    if (b.pf_angle_other.empty() ||
        (b.pf_angle_other.size() != 1 &&
         static_cast<int>(b.pf_angle_other.size()) != slot_count_))
      throw ValidationError(tag + ": pf_angle_other must have 1 or T entries");
  }
  if (substations == 0) throw ValidationError("no substation bus");
  if (substations > 1)
    throw ValidationError("exactly one substation bus is supported");

  if (static_cast<int>(branches.size()) != bus_count() - 1)
    throw ValidationError("radial network needs |branches| = |buses| - 1, got " +
                          std::to_string(branches.size()) + " branches for " +
                          std::to_string(bus_count()) + " buses");

  // Adjacency on internal indices; reject cycles as they appear.
  DisjointSets sets(bus_count());
  std::vector<std::vector<std::pair<int, int>>> adj(bus_count());
  for (std::size_t e = 0; e < branches.size(); ++e) {
    const BranchSpec& s = branches[e];
    const std::string tag = "branch (" + std::to_string(s.from_id) + "," +
                            std::to_string(s.to_id) + ")";
    auto fi = index_by_id_.find(s.from_id);
    auto ti = index_by_id_.find(s.to_id);
    if (fi == index_by_id_.end() || ti == index_by_id_.end())
      throw ValidationError(tag + ": unknown bus id");
    if (fi->second == ti->second) throw ValidationError(tag + ": self loop");
    if (s.r < 0.0 || s.x < 0.0)
      throw ValidationError(tag + ": negative impedance");
    if (!(s.s_limit > 0.0))
      throw ValidationError(tag + ": s_limit must be > 0");
    if (!sets.unite(fi->second, ti->second))
      throw ValidationError(tag + " closes a cycle");
    adj[fi->second].emplace_back(ti->second, static_cast<int>(e));
    adj[ti->second].emplace_back(fi->second, static_cast<int>(e));
  }

  // BFS from the substation orients every branch and numbers them in
  // discovery order, so parents always precede children.
  parent_branch_.assign(bus_count(), -1);
  depth_.assign(bus_count(), -1);
  std::queue<int> frontier;
  frontier.push(substation_);
  depth_[substation_] = 0;
  while (!frontier.empty()) {
    int u = frontier.front();
    frontier.pop();
    auto nbrs = adj[u];
    std::sort(nbrs.begin(), nbrs.end(), [&](auto a, auto b) {
      return buses_[a.first].id < buses_[b.first].id;
    });
    for (auto [v, e] : nbrs) {
      if (depth_[v] >= 0) continue;
      depth_[v] = depth_[u] + 1;
      const BranchSpec& s = branches[e];
      parent_branch_[v] = static_cast<int>(branches_.size());
      branches_.push_back(Branch{u, v, s.r, s.x, s.s_limit});
      frontier.push(v);
    }
  }
  for (int i = 0; i < bus_count(); ++i) {
    if (depth_[i] < 0)
      throw ValidationError("bus " + std::to_string(buses_[i].id) +
                            " is disconnected from the substation");
  }

  auto resolve = [&](std::vector<int>& ids, const char* what) {
    std::sort(ids.begin(), ids.end());
    if (std::adjacent_find(ids.begin(), ids.end()) != ids.end())
      throw ValidationError(std::string("duplicate ") + what + " candidate");
    std::vector<int> out;
    for (int id : ids) {
      int idx = index_of(id);
      if (idx == substation_)
        throw ValidationError(std::string(what) +
                              " candidate cannot be the substation");
      out.push_back(idx);
    }
    return out;
  };
  pv_candidates_ = resolve(pv_candidate_ids, "PV");
  ev_candidates_ = resolve(ev_candidate_ids, "EV");
  if (pv_candidates_.empty() && ev_candidates_.empty())
    throw ValidationError("no PV or EV candidate buses");

  for (auto [id, w] : pv_weights) pv_weights_[index_of(id)] = w;
  for (auto [id, w] : ev_weights) ev_weights_[index_of(id)] = w;
}

int NetworkModel::index_of(int bus_id) const {
  auto it = index_by_id_.find(bus_id);
  if (it == index_by_id_.end())
    throw InvalidArgument("unknown bus id " + std::to_string(bus_id));
  return it->second;
}

double NetworkModel::pv_weight(int index) const {
  auto it = pv_weights_.find(index);
  return it == pv_weights_.end() ? 1.0 : it->second;
}

double NetworkModel::ev_weight(int index) const {
  auto it = ev_weights_.find(index);
  return it == ev_weights_.end() ? 1.0 : it->second;
}

void ProfileSet::validate(int expected_slots) const {
  auto check = [&](const std::vector<double>& v, const char* name, bool unit) {
    if (static_cast<int>(v.size()) != expected_slots)
      throw ValidationError(std::string(name) + " profile has " +
                            std::to_string(v.size()) + " slots, expected " +
                            std::to_string(expected_slots));
    for (double p : v) {
      if (!std::isfinite(p) || p < 0.0 || (unit && p > 1.0))
        throw ValidationError(std::string(name) + " profile entry " +
                              std::to_string(p) + " out of range");
    }
  };
  check(pv_shape, "pv", true);
  check(ev_shape, "ev", true);
  check(other_shape, "other", false);
}

NetworkModel parse_network(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ParseError(e.what());
  }
  try {
    const int slots = doc.value("slot_count", 24);
    std::vector<Bus> buses;
    for (const auto& jb : doc.at("buses")) {
      Bus b;
      b.id = jb.at("id").get<int>();
      const std::string kind = jb.value("kind", "load");
      if (kind == "substation") {
        b.kind = BusKind::substation;
        b.v_ref = jb.at("v_ref_kv").get<double>();
      } else if (kind == "load") {
        b.kind = BusKind::load;
        b.v_lower = jb.at("v_lower_kv").get<double>();
        b.v_upper = jb.at("v_upper_kv").get<double>();
      } else {
        throw ParseError("bus " + std::to_string(b.id) + ": unknown kind '" +
                         kind + "'");
      }
      b.base_load_p = jb.value("base_load_kw", 0.0);
      if (jb.contains("pf_angle_other_rad")) {
        const auto& a = jb.at("pf_angle_other_rad");
        b.pf_angle_other = a.is_array() ? a.get<std::vector<double>>()
                                        : std::vector<double>{a.get<double>()};
      } else if (jb.contains("base_load_kvar") && b.base_load_p > 0.0) {
        b.pf_angle_other = {
            std::atan2(jb.at("base_load_kvar").get<double>(), b.base_load_p)};
      }
      buses.push_back(std::move(b));
    }
    std::vector<NetworkModel::BranchSpec> branches;
    for (const auto& je : doc.at("branches")) {
      branches.push_back({je.at("from").get<int>(), je.at("to").get<int>(),
                          je.at("r_ohm").get<double>(),
                          je.at("x_ohm").get<double>(),
                          je.at("s_limit_kva").get<double>()});
    }
    auto pv = doc.value("pv_candidates", std::vector<int>{});
    auto ev = doc.value("ev_candidates", std::vector<int>{});
    json jw = doc.value("weights", json::object());
    auto pvw = parse_weights(jw.value("pv", json()), pv);
    auto evw = parse_weights(jw.value("ev", json()), ev);
    return NetworkModel(std::move(buses), branches, pv, ev, std::move(pvw),
                        std::move(evw), slots,
                        doc.value("voltage_drop_scale", 1e-3));
  } catch (const json::exception& e) {
    throw ParseError(e.what());
  }
}

NetworkModel load_network(const std::filesystem::path& path) {
  return parse_network(read_file(path));
}

ProfileSet parse_profiles(const std::string& csv_text, double pv_pf_angle,
                          double ev_pf_angle) {
  std::istringstream in(csv_text);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty profiles file");
  auto trim = [](std::string s) {
    s.erase(std::remove_if(s.begin(), s.end(),
                           [](unsigned char c) { return std::isspace(c); }),
            s.end());
    return s;
  };
  if (trim(line) != "slot,pv,ev,other")
    throw ParseError("profiles header must be 'slot,pv,ev,other'");
  ProfileSet out;
  out.pv_pf_angle = pv_pf_angle;
  out.ev_pf_angle = ev_pf_angle;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    line = trim(line);
    if (line.empty()) continue;
    std::vector<double> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) {
      try {
        std::size_t used = 0;
        cells.push_back(std::stod(cell, &used));
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw ParseError("profiles row " + std::to_string(row) +
                         ": bad number '" + cell + "'");
      }
    }
    if (cells.size() != 4)
      throw ParseError("profiles row " + std::to_string(row) +
                       ": expected 4 columns");
    if (static_cast<int>(cells[0]) != out.slot_count() + 1 &&
        static_cast<int>(cells[0]) != out.slot_count())
      throw ParseError("profiles row " + std::to_string(row) +
                       ": slots must be consecutive");
    out.pv_shape.push_back(cells[1]);
    out.ev_shape.push_back(cells[2]);
    out.other_shape.push_back(cells[3]);
  }
  if (out.pv_shape.empty()) throw ParseError("profiles file has no rows");
  out.validate(out.slot_count());
  return out;
}

ProfileSet load_profiles(const std::filesystem::path& path, double pv_pf_angle,
                         double ev_pf_angle) {
  return parse_profiles(read_file(path), pv_pf_angle, ev_pf_angle);
}

std::vector<std::vector<int>> downstream_map(const NetworkModel& net) {
  // Branches are stored in BFS order, so a reverse sweep accumulates every
  // subtree before its parent branch is visited.
  std::vector<std::vector<int>> down(net.branch_count());
  for (int e = net.branch_count() - 1; e >= 0; --e) {
    const Branch& br = net.branch(e);
    down[e].push_back(br.to);
    for (int f = e + 1; f < net.branch_count(); ++f) {
      if (net.branch(f).from == br.to)
        down[e].insert(down[e].end(), down[f].begin(), down[f].end());
    }
    std::sort(down[e].begin(), down[e].end());
  }
  return down;
}

std::vector<int> path_to_root(const NetworkModel& net, int bus_id) {
  int bus = net.index_of(bus_id);
  if (net.is_substation(bus))
    throw InvalidArgument("bus " + std::to_string(bus_id) +
                          " is the substation");
  std::vector<int> path;
  while (net.parent_branch(bus) >= 0) {
    int e = net.parent_branch(bus);
    path.push_back(e);
    bus = net.branch(e).from;
  }
  std::reverse(path.begin(), path.end());
  return path;
}

}  // namespace hostcap

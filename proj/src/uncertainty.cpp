#include "hostcap/uncertainty.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "hostcap/error.hpp"

namespace hostcap {

namespace {

using nlohmann::json;

Category parse_category(const std::string& s) {
  if (s == "PV" || s == "pv") return Category::PV;
  if (s == "EV" || s == "ev") return Category::EV;
  if (s == "OT" || s == "ot" || s == "other") return Category::OT;
  throw ParseError("unknown category '" + s + "'");
}

}  // namespace

std::optional<int> UncertaintySpec::component_for(Category c, int bus_id,
                                                  int slot) const {
  for (int z = 0; z < static_cast<int>(map.size()); ++z)
    if (map[z].matches(c, bus_id, slot)) return z;
  return std::nullopt;
}

void UncertaintySpec::validate() const {
  const int Z = dimension();
  if (covariance.rows() != Z || covariance.cols() != Z)
    throw ValidationError("covariance must be " + std::to_string(Z) + "x" +
                          std::to_string(Z));
  if (static_cast<int>(bounds.size()) != Z || static_cast<int>(map.size()) != Z)
    throw ValidationError("bounds and map need one entry per component");
  if (Z == 0) return;
  const double scale = std::max(1.0, covariance.cwiseAbs().maxCoeff());
  if ((covariance - covariance.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw ValidationError("covariance is not symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(covariance,
                                                     Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < -1e-12 * scale)
    throw ValidationError("covariance is not positive semidefinite");
  for (int z = 0; z < Z; ++z) {
    const auto [lo, hi] = bounds[z];
    const std::string tag = "component " + std::to_string(z);
    if (!std::isfinite(lo) || !std::isfinite(hi) || lo > hi)
      throw ValidationError(tag + ": bounds must be finite with lower <= upper");
    if (mean[z] < lo || mean[z] > hi)
      throw ValidationError(tag + ": mean outside its support interval");
    // Largest variance of a distribution on [lo, hi] with this mean.
    const double cap = (hi - mean[z]) * (mean[z] - lo);
    if (covariance(z, z) > cap * (1.0 + 1e-12))
      throw ValidationError(tag + ": variance " +
                            std::to_string(covariance(z, z)) +
                            " exceeds the maximum " + std::to_string(cap) +
                            " attainable on its support");
  }
}

UncertaintySpec UncertaintySpec::per_category(double mean, double variance,
                                              double lower, double upper) {
  UncertaintySpec s;
  s.mean = Eigen::VectorXd::Constant(3, mean);
  s.covariance = variance * Eigen::MatrixXd::Identity(3, 3);
  s.bounds.assign(3, {lower, upper});
  s.map = {{Category::PV, {}, {}}, {Category::EV, {}, {}}, {Category::OT, {}, {}}};
  return s;
}

UncertaintySpec parse_uncertainty(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ParseError(e.what());
  }
  try {
    UncertaintySpec s;
    auto mean = doc.at("mean").get<std::vector<double>>();
    const int Z = static_cast<int>(mean.size());
    s.mean = Eigen::Map<Eigen::VectorXd>(mean.data(), Z);
    const json& var = doc.at("variance");
    s.covariance = Eigen::MatrixXd::Zero(Z, Z);
    if (var.size() != static_cast<std::size_t>(Z))
      throw ParseError("variance needs " + std::to_string(Z) + " entries");
    for (int i = 0; i < Z; ++i) {
      if (var[i].is_array()) {
        auto row = var[i].get<std::vector<double>>();
        if (row.size() != static_cast<std::size_t>(Z))
          throw ParseError("variance matrix row has wrong length");
        for (int j = 0; j < Z; ++j) s.covariance(i, j) = row[j];
      } else {
        s.covariance(i, i) = var[i].get<double>();
      }
    }
    for (const auto& b : doc.at("bounds")) {
      if (b.size() != 2) throw ParseError("bounds entries are [lower, upper]");
      s.bounds.emplace_back(b[0].get<double>(), b[1].get<double>());
    }
    for (const auto& m : doc.at("map")) {
      ComponentSelector sel;
      sel.category = parse_category(m.at("category").get<std::string>());
      if (m.contains("bus")) sel.bus_id = m.at("bus").get<int>();
      if (m.contains("slot")) sel.slot = m.at("slot").get<int>();
      s.map.push_back(sel);
    }
    s.validate();
    return s;
  } catch (const json::exception& e) {
    throw ParseError(e.what());
  }
}

UncertaintySpec load_uncertainty(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_uncertainty(ss.str());
}

std::vector<Eigen::MatrixXd> support_matrices(const UncertaintySpec& spec) {
  const int Z = spec.dimension();
  std::vector<Eigen::MatrixXd> out;
  out.reserve(Z);
  for (int z = 0; z < Z; ++z) {
    const auto [lo, hi] = spec.bounds.at(z);
    if (!std::isfinite(lo) || !std::isfinite(hi))
      throw ValidationError("component " + std::to_string(z) +
                            ": unbounded support");
    if (!(lo < hi))
      throw ValidationError("component " + std::to_string(z) +
                            " has a degenerate support interval; remove it "
                            "from the uncertainty map");
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(Z + 1, Z + 1);
    w(z, z) = 1.0;
    w(z, Z) = w(Z, z) = -(lo + hi) / 2.0;
    w(Z, Z) = lo * hi;
    out.push_back(std::move(w));
  }
  return out;
}

Eigen::MatrixXd moment_matrix(const UncertaintySpec& spec) {
  spec.validate();
  const int Z = spec.dimension();
  Eigen::MatrixXd b(Z + 1, Z + 1);
  b.topLeftCorner(Z, Z) = spec.covariance + spec.mean * spec.mean.transpose();
  b.topRightCorner(Z, 1) = spec.mean;
  b.bottomLeftCorner(1, Z) = spec.mean.transpose();
  b(Z, Z) = 1.0;
  return b;
}

double evaluate(const AffineInequality& m, const Eigen::VectorXd& x,
                const Eigen::VectorXd& xi) {
  if (x.size() != m.a.rows() || xi.size() != m.dimension())
    throw InvalidArgument("dimension mismatch in evaluate");
  const Eigen::VectorXd y = m.y(x);
  return y[0] + y.tail(xi.size()).dot(xi);
}

std::vector<AffineInequality> affinize(const LinearInequalitySet& ineqs,
                                       const InjectionExpr& inj,
                                       const NetworkModel& net,
                                       const UncertaintySpec& spec) {
  const int Z = spec.dimension();
  const int N = inj.var_count();
  const int T = inj.slot_count();
  const int nb = inj.bus_count();

  // Component per (category, bus, slot); -1 marks an unmapped term.
  std::vector<int> comp(static_cast<std::size_t>(3) * nb * T, -1);
  auto slot_of = [&](Category c, int b, int k) -> int& {
    return comp[(static_cast<int>(c) * T + k) * nb + b];
  };
  for (int k = 0; k < T; ++k) {
    for (int b = 0; b < nb; ++b) {
      for (Category c : {Category::PV, Category::EV, Category::OT}) {
        auto z = spec.component_for(c, net.id_of(b), k);
        if (z) slot_of(c, b, k) = *z;
      }
    }
  }

  auto require = [&](Category c, int b, int k) {
    int z = slot_of(c, b, k);
    if (z < 0)
      throw ValidationError(std::string("unmapped injection category ") +
                            to_string(c) + " at bus " +
                            std::to_string(net.id_of(b)) + ", slot " +
                            std::to_string(k));
    return z + 1;
  };

  std::vector<AffineInequality> out;
  out.reserve(ineqs.size());
  for (const LinearInequality& ineq : ineqs) {
    AffineInequality m;
    m.kind = ineq.kind;
    m.element = ineq.element;
    m.slot = ineq.slot;
    m.a = Eigen::MatrixXd::Zero(N, Z + 1);
    m.b = Eigen::VectorXd::Zero(Z + 1);
    const int k = ineq.slot;
    // Constant of the functional carries no injection, hence no xi.
    m.b[0] = -ineq.lhs.constant;
    for (int bus = 0; bus < nb; ++bus) {
      const double wp = ineq.lhs.dp[bus];
      const double wq = ineq.lhs.dq[bus];
      if (wp == 0.0 && wq == 0.0) continue;
      const BusSlotInjection& t = inj.at(bus, k);
      const double other = wp * t.other_p + wq * t.other_q;
      if (other != 0.0) {
        const int z = require(Category::OT, bus, k);
        m.b[0] -= other;
        m.b[z] -= other;
      }
      if (t.pv_var >= 0) {
        const double g = wp * t.pv_p + wq * t.pv_q;
        if (g != 0.0) {
          const int z = require(Category::PV, bus, k);
          m.a(t.pv_var, 0) += g;
          m.a(t.pv_var, z) += g;
        }
      }
      if (t.ev_var >= 0) {
        const double g = wp * t.ev_p + wq * t.ev_q;
        if (g != 0.0) {
          const int z = require(Category::EV, bus, k);
          m.a(t.ev_var, 0) += g;
          m.a(t.ev_var, z) += g;
        }
      }
    }
    out.push_back(std::move(m));
  }
  return out;
}

}  // namespace hostcap

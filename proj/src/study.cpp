#include "hostcap/study.hpp"

#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "hostcap/error.hpp"

namespace hostcap {

ProblemData build_problem(const Study& study) {
  const InjectionExpr inj = build_injections(study.net, study.profiles);
  const LinearInequalitySet ineqs = build_inequalities(study.net);
  return make_problem_data(affinize(ineqs, inj, study.net, study.spec), study.spec,
                           objective_vector(study.net));
}

CapacityTotals capacity_totals(const NetworkModel& net, const Eigen::VectorXd& x) {
  const DecisionIndex idx(net);
  if (x.size() != idx.size()) throw InvalidArgument("capacity vector has the wrong size");
  CapacityTotals t;
  for (int i = 0; i < idx.size(); ++i)
    (idx.category(i) == Category::PV ? t.pv_kw : t.ev_kw) += x[i];
  return t;
}

namespace {
template <typename F>
void for_category(UncertaintySpec& spec, Category category, F&& f) {
  bool any = false;
  for (std::size_t z = 0; z < spec.map.size(); ++z)
    if (spec.map[z].category == category) {
      f(static_cast<int>(z));
      any = true;
    }
  if (!any)
    throw InvalidArgument(std::string("no uncertainty component maps ") +
                          to_string(category));
}
}  // namespace

void set_category_mean(UncertaintySpec& spec, Category category, double mean) {
  for_category(spec, category, [&](int z) { spec.mean[z] = mean; });
}

void set_category_variance(UncertaintySpec& spec, Category category, double variance) {
  for_category(spec, category, [&](int z) { spec.covariance(z, z) = variance; });
}

void write_result_json(std::ostream& out, const NetworkModel& net,
                       const EvaluationResult& r, double epsilon) {
  using nlohmann::ordered_json;
  const DecisionIndex idx(net);
  ordered_json j;
  j["status"] = to_string(r.status);
  j["epsilon"] = epsilon;
  j["message"] = r.message;
  ordered_json pv = ordered_json::array(), ev = ordered_json::array();
  std::vector<double> x;
  if (r.x.size() == idx.size()) {
    for (int i = 0; i < idx.size(); ++i) {
      ordered_json e = {{"bus", net.id_of(idx.bus(i))}, {"kw", r.x[i]}, {"mw", r.x[i] / 1000.0}};
      (idx.category(i) == Category::PV ? pv : ev).push_back(e);
      x.push_back(r.x[i]);
    }
    const CapacityTotals t = capacity_totals(net, r.x);
    j["pv_total_mw"] = t.pv_kw / 1000.0;
    j["ev_total_mw"] = t.ev_kw / 1000.0;
  }
  j["capacities"] = {{"pv", pv}, {"ev", ev}};
  j["x_kw"] = x;
  j["objective"] = r.objective;
  j["iterations"] = r.iterations;
  j["converged"] = r.converged;
  j["failed_iteration"] = r.failed_iteration;
  j["trace"] = r.trace;
  j["gamma"] = std::vector<double>(r.gamma.data(), r.gamma.data() + r.gamma.size());
  j["screened_rows"] = r.screened;
  j["screening_verified"] = r.screening_verified;
  j["certificate"] = {{"beta", r.certificate.beta}, {"value", r.certificate.value}};
  j["metadata"] = {{"seconds", r.seconds}};
  out << j.dump(2) << "\n";
}

StoredResult read_result_json(const std::filesystem::path& path, const NetworkModel& net) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  StoredResult s;
  try {
    const nlohmann::json j = nlohmann::json::parse(in);
    s.status = j.at("status").get<std::string>();
    s.epsilon = j.at("epsilon").get<double>();
    const auto x = j.at("x_kw").get<std::vector<double>>();
    s.x = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  if (s.status == "optimal" && s.x.size() != DecisionIndex(net).size())
    throw ParseError(path.string() + ": capacity vector does not match the network");
  return s;
}

void print_capacity_table(std::ostream& out, const NetworkModel& net,
                          const Eigen::VectorXd& x) {
  const DecisionIndex idx(net);
  std::ostringstream s;
  s << std::fixed << std::setprecision(2);
  for (Category c : {Category::PV, Category::EV}) {
    s << (c == Category::PV ? "PV generation capacity (MW)\n" : "EVCS capacity (MW)\n");
    s << "  bus   capacity\n";
    double total = 0.0;
    for (int i = 0; i < idx.size(); ++i) {
      if (idx.category(i) != c) continue;
      s << "  " << std::setw(3) << net.id_of(idx.bus(i)) << "  " << std::setw(9)
        << x[i] / 1000.0 << "\n";
      total += x[i] / 1000.0;
    }
    s << "  total " << std::setw(8) << total << "\n";
  }
  out << s.str();
}

}  // namespace hostcap

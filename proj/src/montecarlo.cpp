#include "hostcap/montecarlo.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "hostcap/error.hpp"

namespace hostcap {

using Eigen::VectorXd;

const char* to_string(DistributionFamily f) {
  switch (f) {
    case DistributionFamily::two_point: return "two_point";
    case DistributionFamily::truncated_gaussian: return "truncated_gaussian";
    case DistributionFamily::support_corner_mixture: return "support_corner_mixture";
  }
  return "?";
}

DistributionFamily parse_family(const std::string& name) {
  for (DistributionFamily f : all_families())
    if (name == to_string(f)) return f;
  throw InvalidArgument("unknown distribution family '" + name + "'");
}

const std::vector<DistributionFamily>& all_families() {
  static const std::vector<DistributionFamily> all = {
      DistributionFamily::two_point, DistributionFamily::truncated_gaussian,
      DistributionFamily::support_corner_mixture};
  return all;
}

namespace {

double phi(double t) { return std::exp(-0.5 * t * t) / std::sqrt(2.0 * std::numbers::pi); }
double big_phi(double t) { return 0.5 * std::erfc(-t / std::numbers::sqrt2); }

// Mean and variance of N(m, s^2) conditioned on [lo, hi].
std::pair<double, double> truncated_moments(double m, double s, double lo, double hi) {
  const double a = (lo - m) / s;
  const double b = (hi - m) / s;
  const double z = big_phi(b) - big_phi(a);
  const double r = (phi(a) - phi(b)) / z;
  const double mean = m + s * r;
  const double var = s * s * (1.0 + (a * phi(a) - b * phi(b)) / z - r * r);
  return {mean, var};
}

ComponentLaw point_mass(double mu, double lo, double hi) {
  ComponentLaw c;
  c.atoms = {mu};
  c.weights = {1.0};
  c.lower = lo;
  c.upper = hi;
  c.mean = mu;
  return c;
}

void finish_discrete(ComponentLaw& c) {
  double m = 0.0, v = 0.0;
  for (std::size_t i = 0; i < c.atoms.size(); ++i) m += c.weights[i] * c.atoms[i];
  for (std::size_t i = 0; i < c.atoms.size(); ++i)
    v += c.weights[i] * (c.atoms[i] - m) * (c.atoms[i] - m);
  c.mean = m;
  c.variance = v;
}

ComponentLaw build_component(DistributionFamily family, int z, double mu, double var,
                             double lo, double hi) {
  const std::string tag = "component " + std::to_string(z) + " (" + to_string(family) + ")";
  if (var == 0.0) return point_mass(mu, lo, hi);
  const double sd = std::sqrt(var);
  ComponentLaw c;
  c.lower = lo;
  c.upper = hi;
  switch (family) {
    case DistributionFamily::two_point: {
      if (mu - sd < lo || mu + sd > hi)
        throw ValidationError(tag + ": mean +/- standard deviation leaves the support");
      c.atoms = {mu - sd, mu + sd};
      c.weights = {0.5, 0.5};
      finish_discrete(c);
      return c;
    }
    case DistributionFamily::support_corner_mixture: {
      const double a = mu - lo;
      const double b = hi - mu;
      if (a <= 0.0 || b <= 0.0 || var > a * b * (1.0 + 1e-12))
        throw ValidationError(tag + ": variance not attainable on the support");
      const double pl = var / (a * (a + b));
      const double pu = var / (b * (a + b));
      c.atoms = {lo, mu, hi};
      c.weights = {pl, std::max(0.0, 1.0 - pl - pu), pu};
      finish_discrete(c);
      return c;
    }
    case DistributionFamily::truncated_gaussian: {
      // Fixed point on the parameters of the underlying normal so that the
      // truncated law recovers the requested moments.
      double m = mu, s = sd;
      bool ok = false;
      for (int it = 0; it < 2000; ++it) {
        auto [tm, tv] = truncated_moments(m, s, lo, hi);
        if (!std::isfinite(tm) || !(tv > 0.0)) break;
        if (std::abs(tm - mu) <= 1e-12 * (1.0 + std::abs(mu)) &&
            std::abs(tv - var) <= 1e-12 * (1.0 + var)) {
          ok = true;
          break;
        }
        m += mu - tm;
        s *= std::sqrt(var / tv);
        if (s > 1e6 * (hi - lo)) break;
      }
      if (!ok) throw ValidationError(tag + ": moments not attainable by a truncated normal");
      const double accept = big_phi((hi - m) / s) - big_phi((lo - m) / s);
      if (accept < 1e-4) throw ValidationError(tag + ": truncation keeps too little mass");
      c.gaussian = true;
      c.loc = m;
      c.scale = s;
      std::tie(c.mean, c.variance) = truncated_moments(m, s, lo, hi);
      return c;
    }
  }
  throw InvalidArgument("unknown distribution family");
}

}  // namespace

double ComponentLaw::draw(std::mt19937_64& rng) const {
  if (gaussian) {
    std::normal_distribution<double> n(loc, scale);
    for (;;) {
      const double v = n(rng);
      if (v >= lower && v <= upper) return v;
    }
  }
  if (atoms.size() == 1) return atoms[0];
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < atoms.size(); ++i) {
    acc += weights[i];
    if (u < acc) return atoms[i];
  }
  return atoms.back();
}

VectorXd SampleDistribution::achieved_mean() const {
  VectorXd m(dimension());
  for (int z = 0; z < dimension(); ++z) m[z] = components[z].mean;
  return m;
}

VectorXd SampleDistribution::achieved_variance() const {
  VectorXd v(dimension());
  for (int z = 0; z < dimension(); ++z) v[z] = components[z].variance;
  return v;
}

VectorXd SampleDistribution::sample(std::mt19937_64& rng) const {
  VectorXd xi(dimension());
  for (int z = 0; z < dimension(); ++z) xi[z] = components[z].draw(rng);
  return xi;
}

SampleDistribution build_distribution(const UncertaintySpec& spec, DistributionFamily family) {
  spec.validate();
  const int Z = spec.dimension();
  for (int i = 0; i < Z; ++i)
    for (int j = 0; j < Z; ++j)
      if (i != j && spec.covariance(i, j) != 0.0)
        throw ValidationError("sampling assumes independent components; covariance has off-diagonal entries");
  SampleDistribution d;
  d.family = family;
  for (int z = 0; z < Z; ++z)
    d.components.push_back(build_component(family, z, spec.mean[z], spec.covariance(z, z),
                                           spec.bounds[z].first, spec.bounds[z].second));
  return d;
}

std::pair<double, double> wilson_interval(std::int64_t k, std::int64_t n, double z) {
  if (n <= 0) throw InvalidArgument("interval needs at least one trial");
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(k) / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double center = (p + z2 / (2.0 * nn)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) / denom;
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

namespace {

constexpr double kZ99 = 2.5758293035489004;

struct BatchCounts {
  std::int64_t joint = 0;
  std::vector<std::int64_t> rows;
};

}  // namespace

ViolationReport empirical_violation(const VectorXd& x,
                                    const std::vector<AffineInequality>& ineqs,
                                    const SampleDistribution& dist, std::int64_t n,
                                    std::uint64_t seed, const ViolationOptions& options) {
  if (n < 1) throw InvalidArgument("sample count must be >= 1");
  if (options.batch < 1) throw InvalidArgument("batch size must be >= 1");
  const int Z = dist.dimension();
  std::vector<std::pair<double, double>> box(Z);
  for (int z = 0; z < Z; ++z) box[z] = {dist.components[z].lower, dist.components[z].upper};

  // Only rows that some point of the box can violate need sampling. A small
  // relative slack absorbs solver tolerance at rows tight at a box corner.
  std::vector<int> active;
  std::vector<VectorXd> ys;
  std::vector<double> slack;
  for (int m = 0; m < static_cast<int>(ineqs.size()); ++m) {
    if (ineqs[m].dimension() != Z) throw InvalidArgument("row dimension differs from distribution");
    const VectorXd y = ineqs[m].y(x);
    double mag = std::abs(y[0]);
    for (int z = 0; z < Z; ++z)
      mag += std::max(std::abs(box[z].first), std::abs(box[z].second)) * std::abs(y[z + 1]);
    const double tol = options.violation_tol * mag;
    if (worst_case_at(ineqs[m], box, x) > tol) {
      active.push_back(m);
      ys.push_back(y);
      slack.push_back(tol);
    }
  }
  const int A = static_cast<int>(active.size());

  const std::int64_t batches = (n + options.batch - 1) / options.batch;
  std::vector<BatchCounts> counts(static_cast<std::size_t>(batches));
  std::atomic<std::int64_t> next{0};
  auto work = [&] {
    VectorXd xi(Z);
    for (;;) {
      const std::int64_t b = next.fetch_add(1);
      if (b >= batches) return;
      std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                        static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
      std::mt19937_64 rng(seq);
      BatchCounts& c = counts[static_cast<std::size_t>(b)];
      c.rows.assign(A, 0);
      const std::int64_t len = std::min(options.batch, n - b * options.batch);
      for (std::int64_t s = 0; s < len; ++s) {
        for (int z = 0; z < Z; ++z) xi[z] = dist.components[z].draw(rng);
        bool any = false;
        for (int k = 0; k < A; ++k) {
          const VectorXd& y = ys[k];
          const double v = y[0] + y.tail(Z).dot(xi);
          if (v > slack[k]) {
            ++c.rows[k];
            any = true;
          }
        }
        if (any) ++c.joint;
      }
    }
  };
  const int workers = std::max(1, std::min<int>(options.workers, static_cast<int>(batches)));
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }

  ViolationReport rep;
  rep.family = dist.family;
  rep.samples = n;
  rep.seed = seed;
  rep.rows_checked = A;
  std::vector<std::int64_t> per_row(A, 0);
  for (const BatchCounts& c : counts) {
    rep.violations += c.joint;
    for (int k = 0; k < A; ++k) per_row[k] += c.rows[k];
  }
  rep.probability = static_cast<double>(rep.violations) / static_cast<double>(n);
  std::tie(rep.ci_low, rep.ci_high) = wilson_interval(rep.violations, n, kZ99);

  std::vector<int> order(A);
  for (int k = 0; k < A; ++k) order[k] = k;
  std::stable_sort(order.begin(), order.end(),
                   [&](int i, int j) { return per_row[i] > per_row[j]; });
  for (int k : order) {
    if (static_cast<int>(rep.top_rows.size()) >= options.top || per_row[k] == 0) break;
    const AffineInequality& m = ineqs[active[k]];
    rep.top_rows.push_back({active[k], m.kind, m.element, m.slot, per_row[k],
                            static_cast<double>(per_row[k]) / static_cast<double>(n)});
  }
  return rep;
}

void write_json(std::ostream& out, const ViolationReport& r, double epsilon) {
  nlohmann::ordered_json j;
  j["family"] = to_string(r.family);
  j["samples"] = r.samples;
  j["seed"] = r.seed;
  j["violations"] = r.violations;
  j["probability"] = r.probability;
  j["ci99"] = {r.ci_low, r.ci_high};
  j["epsilon"] = epsilon;
  j["passes"] = r.passes(epsilon);
  j["rows_checked"] = r.rows_checked;
  nlohmann::ordered_json top = nlohmann::ordered_json::array();
  for (const RowViolation& v : r.top_rows)
    top.push_back({{"row", v.row},
                   {"kind", to_string(v.kind)},
                   {"element", v.element},
                   {"slot", v.slot},
                   {"count", v.count},
                   {"probability", v.probability}});
  j["top_rows"] = top;
  out << j.dump(2) << "\n";
}

const char* to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::epsilon: return "epsilon";
    case SweepAxis::mu_pv: return "mu_pv";
    case SweepAxis::mu_ev: return "mu_ev";
    case SweepAxis::d_pv: return "d_pv";
    case SweepAxis::d_ev: return "d_ev";
  }
  return "?";
}

SweepAxis parse_axis(const std::string& name) {
  for (SweepAxis a : {SweepAxis::epsilon, SweepAxis::mu_pv, SweepAxis::mu_ev,
                      SweepAxis::d_pv, SweepAxis::d_ev})
    if (name == to_string(a)) return a;
  throw InvalidArgument("unknown sweep axis '" + name + "'");
}

namespace {

SweepRow run_point(const std::vector<SweepAxis>& axes, const std::vector<double>& values,
                   const Study& base, IterationSettings settings) {
  SweepRow row;
  row.axis_values = values;
  try {
    UncertaintySpec spec = base.spec;
    for (std::size_t k = 0; k < axes.size(); ++k) {
      const double v = values[k];
      switch (axes[k]) {
        case SweepAxis::epsilon: settings.epsilon = v; break;
        case SweepAxis::mu_pv: set_category_mean(spec, Category::PV, v); break;
        case SweepAxis::mu_ev: set_category_mean(spec, Category::EV, v); break;
        case SweepAxis::d_pv: set_category_variance(spec, Category::PV, v); break;
        case SweepAxis::d_ev: set_category_variance(spec, Category::EV, v); break;
      }
    }
    const Study study{base.net, base.profiles, spec};
    const EvaluationResult r = iterate(build_problem(study), settings);
    row.status = to_string(r.status);
    row.iterations = r.iterations;
    row.message = r.message;
    if (r.status == EvaluationStatus::optimal) {
      const CapacityTotals t = capacity_totals(base.net, r.x);
      row.pv_total_mw = t.pv_kw / 1000.0;
      row.ev_total_mw = t.ev_kw / 1000.0;
      row.objective = r.objective;
    }
  } catch (const std::exception& e) {
    row.status = "error";
    row.message = e.what();
  }
  return row;
}

}  // namespace

std::vector<SweepRow> sweep(const std::vector<SweepAxis>& axes,
                            const std::vector<std::vector<double>>& grids,
                            const Study& base, const IterationSettings& settings,
                            int workers) {
  if (axes.empty() || axes.size() > 2 || axes.size() != grids.size())
    throw InvalidArgument("sweep takes one or two axes, each with a grid");
  for (const auto& g : grids)
    if (g.empty()) throw InvalidArgument("sweep grid is empty");

  std::vector<std::vector<double>> points;
  if (axes.size() == 1) {
    for (double v : grids[0]) points.push_back({v});
  } else {
    for (double u : grids[0])
      for (double v : grids[1]) points.push_back({u, v});
  }

  std::vector<SweepRow> rows(points.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= points.size()) return;
      rows[i] = run_point(axes, points[i], base, settings);
    }
  };
  const int w = std::max(1, std::min<int>(workers, static_cast<int>(points.size())));
  if (w == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int k = 0; k < w; ++k) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  return rows;
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  const std::size_t naxes = rows.empty() ? 1 : rows.front().axis_values.size();
  out << "axis_value";
  if (naxes == 2) out << ",axis2_value";
  out << ",pv_total_mw,ev_total_mw,objective,iterations,status\n";
  std::ostringstream line;
  for (const SweepRow& r : rows) {
    line.str("");
    line << std::setprecision(10);
    for (double v : r.axis_values) line << v << ",";
    line << std::fixed << std::setprecision(6) << r.pv_total_mw << "," << r.ev_total_mw
         << "," << r.objective << std::defaultfloat << "," << r.iterations << ","
         << r.status << "\n";
    out << line.str();
  }
}

}  // namespace hostcap

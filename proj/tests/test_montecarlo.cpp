#include <doctest.h>

#include <sstream>

#include "hostcap/error.hpp"
#include "hostcap/montecarlo.hpp"
#include "support.hpp"

using namespace hostcap;
using namespace testing_support;
using Eigen::VectorXd;

namespace {

const UncertaintySpec kPaperSpec = UncertaintySpec::per_category(0.0, 0.01, -0.25, 0.25);

}  // namespace

TEST_CASE("two_point: +-0.1 with equal mass") {
  const SampleDistribution d = build_distribution(kPaperSpec, DistributionFamily::two_point);
  REQUIRE(d.dimension() == 3);
  for (const auto& c : d.components) {
    REQUIRE(c.atoms.size() == 2);
    CHECK(std::min(c.atoms[0], c.atoms[1]) == doctest::Approx(-0.1));
    CHECK(std::max(c.atoms[0], c.atoms[1]) == doctest::Approx(0.1));
    CHECK(c.weights[0] == doctest::Approx(0.5));
    CHECK(c.weights[1] == doctest::Approx(0.5));
  }
}

TEST_CASE("build_distribution: edge cases") {
  SUBCASE("variance 0 is a point mass at the mean") {
    auto spec = kPaperSpec;
    spec.covariance(1, 1) = 0.0;
    spec.mean[1] = 0.05;
    for (auto f : all_families()) {
      const SampleDistribution d = build_distribution(spec, f);
      std::mt19937_64 rng(1);
      for (int i = 0; i < 100; ++i) CHECK(d.sample(rng)[1] == 0.05);
    }
  }
  SUBCASE("two_point needs the box to reach mean +- sd") {
    auto spec = kPaperSpec;
    spec.mean[0] = 0.2;
    spec.covariance(0, 0) = 0.0025 - 1e-6;  // sd just under 0.05 -> fine
    CHECK_NOTHROW(build_distribution(spec, DistributionFamily::two_point));
    spec.covariance(0, 0) = 0.004;  // sd 0.063 > 0.05
    CHECK_THROWS_AS(build_distribution(spec, DistributionFamily::two_point), ValidationError);
  }
  SUBCASE("off-diagonal covariance is out of scope") {
    auto spec = kPaperSpec;
    spec.covariance(0, 1) = spec.covariance(1, 0) = 0.001;
    CHECK_THROWS_AS(build_distribution(spec, DistributionFamily::two_point), ValidationError);
  }
  SUBCASE("family names") {
    for (auto f : all_families()) CHECK(parse_family(to_string(f)) == f);
    CHECK_THROWS_AS(parse_family("cauchy"), InvalidArgument);
  }
}

TEST_CASE("moment matching and support") {
  auto spec = kPaperSpec;
  spec.mean[0] = 0.1;
  spec.mean[1] = -0.05;
  spec.covariance(2, 2) = 0.02;
  for (auto f : all_families()) {
    CAPTURE(to_string(f));
    const SampleDistribution d = build_distribution(spec, f);
    CHECK((d.achieved_mean() - spec.mean).cwiseAbs().maxCoeff() <= 1e-3);
    CHECK((d.achieved_variance() - spec.covariance.diagonal()).cwiseAbs().maxCoeff() <= 1e-3);

    const int n = 1000000;
    std::mt19937_64 rng(2024);
    VectorXd sum = VectorXd::Zero(3), sq = VectorXd::Zero(3), quart = VectorXd::Zero(3);
    bool inside = true;
    for (int i = 0; i < n; ++i) {
      const VectorXd xi = d.sample(rng);
      for (int z = 0; z < 3; ++z)
        inside = inside && xi[z] >= spec.bounds[z].first && xi[z] <= spec.bounds[z].second;
      const VectorXd c = xi - spec.mean;
      sum += xi;
      sq += c.cwiseProduct(c);
      quart += c.cwiseProduct(c).cwiseProduct(c).cwiseProduct(c);
    }
    CHECK(inside);
    // Sample moments within four standard errors of the targets.
    for (int z = 0; z < 3; ++z) {
      const double s2 = spec.covariance(z, z);
      const double m4 = quart[z] / n;
      CHECK(std::abs(sum[z] / n - spec.mean[z]) <= 4.0 * std::sqrt(s2 / n) + 1e-12);
      CHECK(std::abs(sq[z] / n - s2) <= 4.0 * std::sqrt(std::max(m4 - s2 * s2, 0.0) / n) + 1e-12);
      CHECK(std::abs(sq[z] / n - s2) <= 5e-3 * s2);
    }
  }
}

TEST_CASE("wilson_interval") {
  const auto [lo, hi] = wilson_interval(50, 1000, 2.5758293035489004);
  CHECK(lo < 0.05);
  CHECK(hi > 0.05);
  CHECK(lo >= 0.0);
  const auto [lo0, hi0] = wilson_interval(0, 100000, 2.5758293035489004);
  CHECK(lo0 == 0.0);
  CHECK(hi0 > 0.0);
  CHECK(hi0 < 1e-4);
}

TEST_CASE("empirical_violation") {
  const Study st = two_bus_study();
  const ProblemData data = build_problem(st);
  const SampleDistribution d = build_distribution(st.spec, DistributionFamily::support_corner_mixture);

  SUBCASE("x = 0 never violates a strictly feasible network") {
    const auto rep = empirical_violation(VectorXd::Zero(2), data.ineqs, d, 20000, 5);
    CHECK(rep.violations == 0);
    CHECK(rep.probability == 0.0);
  }

  IterationSettings set;
  set.epsilon = 0.05;
  const EvaluationResult r = iterate(data, set);
  REQUIRE(r.status == EvaluationStatus::optimal);

  SUBCASE("DR optimum passes; 1.5x inflation violates more") {
    for (auto f : all_families()) {
      const auto dist = build_distribution(st.spec, f);
      const auto at = empirical_violation(r.x, data.ineqs, dist, 100000, 9);
      CHECK(at.passes(0.05));
      const auto big = empirical_violation(1.5 * r.x, data.ineqs, dist, 100000, 9);
      CHECK(big.probability > at.probability);
    }
  }
  SUBCASE("joint at least every single row; interval holds the estimate") {
    const auto rep = empirical_violation(1.5 * r.x, data.ineqs, d, 50000, 3);
    REQUIRE(!rep.top_rows.empty());
    for (const auto& row : rep.top_rows) CHECK(row.probability <= rep.probability);
    CHECK(rep.ci_low <= rep.probability);
    CHECK(rep.ci_high >= rep.probability);
    CHECK(rep.probability >= 0.0);
    CHECK(rep.probability <= 1.0);
  }
  SUBCASE("bit-identical for a seed, independent of the worker count") {
    ViolationOptions one, four;
    four.workers = 4;
    one.batch = four.batch = 4096;
    const auto a = empirical_violation(1.5 * r.x, data.ineqs, d, 50000, 77, one);
    const auto b = empirical_violation(1.5 * r.x, data.ineqs, d, 50000, 77, one);
    const auto c = empirical_violation(1.5 * r.x, data.ineqs, d, 50000, 77, four);
    std::ostringstream ja, jb, jc;
    write_json(ja, a, 0.05);
    write_json(jb, b, 0.05);
    write_json(jc, c, 0.05);
    CHECK(ja.str() == jb.str());
    CHECK(ja.str() == jc.str());
    const auto other = empirical_violation(1.5 * r.x, data.ineqs, d, 50000, 78, one);
    CHECK(other.violations != a.violations);
  }
}

TEST_CASE("sweep") {
  const Study st = two_bus_study();
  IterationSettings set;
  set.epsilon = 0.05;

  SUBCASE("single point equals a direct solve") {
    const auto rows = sweep({SweepAxis::epsilon}, {{0.05}}, st, set);
    REQUIRE(rows.size() == 1);
    const EvaluationResult r = iterate(build_problem(st), set);
    CHECK(rows[0].status == "optimal");
    CHECK(rows[0].objective == doctest::Approx(r.objective).epsilon(1e-12));
    CHECK(rows[0].pv_total_mw == doctest::Approx(capacity_totals(st.net, r.x).pv_kw / 1000));
  }
  SUBCASE("two axes give the long table in grid order") {
    const auto rows =
        sweep({SweepAxis::mu_pv, SweepAxis::mu_ev}, {{-0.1, 0.1}, {-0.05, 0.0, 0.05}}, st, set, 3);
    REQUIRE(rows.size() == 6);
    CHECK(rows[0].axis_values == std::vector<double>{-0.1, -0.05});
    CHECK(rows[2].axis_values == std::vector<double>{-0.1, 0.05});
    CHECK(rows[3].axis_values == std::vector<double>{0.1, -0.05});
    std::ostringstream csv;
    write_sweep_csv(csv, rows);
    CHECK(csv.str().rfind("axis_value,axis2_value,pv_total_mw,ev_total_mw,objective,iterations,status\n",
                          0) == 0);
  }
  SUBCASE("a bad point is recorded and the sweep goes on") {
    const auto rows = sweep({SweepAxis::d_pv}, {{0.01, 0.5}}, st, set);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].status == "optimal");
    CHECK(rows[1].status == "error");
    std::ostringstream csv;
    write_sweep_csv(csv, rows);
    CHECK(csv.str().rfind("axis_value,pv_total_mw,ev_total_mw,objective,iterations,status\n", 0) ==
          0);
  }
  SUBCASE("axis names") {
    for (auto a : {SweepAxis::epsilon, SweepAxis::mu_pv, SweepAxis::mu_ev, SweepAxis::d_pv,
                   SweepAxis::d_ev})
      CHECK(parse_axis(to_string(a)) == a);
  }
}

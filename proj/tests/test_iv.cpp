#include <doctest.h>

#include <cmath>
#include <map>

#include "mtdml/dgp.hpp"
#include "mtdml/errors.hpp"
#include "mtdml/iv.hpp"
#include "mtdml/rng.hpp"
#include "mtdml/stats.hpp"

using namespace mtdml;

namespace {

struct IvArrays {
  std::vector<int> treated, school, year;
  Eigen::VectorXd y;
};

IvArrays arrays_from(const GeneratedData& gen) {
  IvArrays a;
  const std::size_t n = gen.dataset.n();
  const int school_col = gen.dataset.x_col("school");
  const int year_col = gen.dataset.x_col("year");
  a.y.resize(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    a.treated.push_back(gen.dataset.treatment[i]);
    a.school.push_back(
        static_cast<int>(gen.dataset.X(static_cast<Eigen::Index>(i), school_col)));
    a.year.push_back(static_cast<int>(gen.dataset.X(static_cast<Eigen::Index>(i), year_col)));
    a.y(static_cast<Eigen::Index>(i)) =
        gen.dataset.outcomes[0].values(static_cast<Eigen::Index>(i));
  }
  return a;
}

}  // namespace

TEST_CASE("identical school rates give an all-zero instrument") {
  // Two schools per year, same assignment pattern in each.
  std::vector<int> treated, school, year;
  for (int y = 0; y < 3; ++y) {
    for (int s = 0; s < 2; ++s) {
      treated.insert(treated.end(), {1, 0, 1, 0});
      for (int i = 0; i < 4; ++i) {
        school.push_back(s);
        year.push_back(y);
      }
    }
  }
  const DeviationInstrument dev =
      build_deviation_instrument(treated, school, year, std::nullopt);
  for (Eigen::Index i = 0; i < dev.raw.size(); ++i) CHECK(dev.raw(i) == 0.0);
}

TEST_CASE("two schools with rates 0.8 and 0.2 deviate symmetrically") {
  std::vector<int> treated, school, year;
  for (int i = 0; i < 10; ++i) {  // school 0: rate 0.8
    treated.push_back(i < 8 ? 1 : 0);
    school.push_back(0);
    year.push_back(0);
  }
  for (int i = 0; i < 10; ++i) {  // school 1: rate 0.2
    treated.push_back(i < 2 ? 1 : 0);
    school.push_back(1);
    year.push_back(0);
  }
  const DeviationInstrument dev =
      build_deviation_instrument(treated, school, year, std::nullopt);
  for (std::size_t i = 0; i < 10; ++i)
    CHECK(dev.raw(static_cast<Eigen::Index>(i)) == doctest::Approx(0.3).epsilon(1e-12));
  for (std::size_t i = 10; i < 20; ++i)
    CHECK(dev.raw(static_cast<Eigen::Index>(i)) == doctest::Approx(-0.3).epsilon(1e-12));
}

TEST_CASE("raw deviations have zero unit-weighted mean within years") {
  const GeneratedData gen = generate(iv_spec(3000, 200));
  const IvArrays a = arrays_from(gen);
  const DeviationInstrument dev =
      build_deviation_instrument(a.treated, a.school, a.year, std::nullopt);
  std::map<int, std::pair<double, double>> per_year;  // sum, count
  for (std::size_t i = 0; i < a.year.size(); ++i) {
    per_year[a.year[i]].first += dev.raw(static_cast<Eigen::Index>(i));
    per_year[a.year[i]].second += 1.0;
  }
  for (const auto& [y, acc] : per_year) CHECK(std::fabs(acc.first / acc.second) < 1e-9);
}

TEST_CASE("a year with one school is rejected") {
  std::vector<int> treated = {1, 0, 1, 0};
  std::vector<int> school = {0, 0, 0, 0};
  std::vector<int> year = {0, 0, 0, 0};
  CHECK_THROWS_AS(build_deviation_instrument(treated, school, year, std::nullopt),
                  ValidityError);
}

TEST_CASE("singleton cells are flagged") {
  std::vector<int> treated = {1, 0, 1, 0, 1};
  std::vector<int> school = {0, 0, 1, 1, 2};  // school 2 has one unit
  std::vector<int> year = {0, 0, 0, 0, 0};
  const DeviationInstrument dev =
      build_deviation_instrument(treated, school, year, std::nullopt);
  CHECK(dev.singleton_cell[4] == 1);
  CHECK(dev.singleton_cell[0] == 0);
}

TEST_CASE("2sls with the treatment as its own instrument is OLS") {
  Rng rng(120);
  const Eigen::Index n = 400;
  Eigen::VectorXd d_vec(n), y(n);
  Eigen::MatrixXd covs(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    d_vec(i) = rng.bernoulli(0.4) ? 1.0 : 0.0;
    covs(i, 0) = rng.normal();
    covs(i, 1) = rng.normal();
    y(i) = 1.0 + 0.7 * d_vec(i) + 0.3 * covs(i, 0) - 0.2 * covs(i, 1) + rng.normal();
  }
  const TwoSlsResult res = two_sls(y, d_vec, d_vec, covs);

  Eigen::MatrixXd X(n, 4);
  X.col(0).setOnes();
  X.middleCols(1, 2) = covs;
  X.col(3) = d_vec;
  const OlsFit ols = ols_hc1(X, y);
  CHECK(std::fabs(res.estimate - ols.coef(3)) < 1e-9);
  CHECK(std::fabs(res.se - ols.se_hc1(3)) < 1e-9);
}

TEST_CASE("2sls recovers the planted complier effect") {
  const GeneratedData gen = generate(iv_spec(5000, 121));
  const IvArrays a = arrays_from(gen);
  const DeviationInstrument dev =
      build_deviation_instrument(a.treated, a.school, a.year, std::nullopt);

  Eigen::VectorXd d_vec(static_cast<Eigen::Index>(a.treated.size()));
  for (std::size_t i = 0; i < a.treated.size(); ++i)
    d_vec(static_cast<Eigen::Index>(i)) = a.treated[i];

  Eigen::MatrixXd covs(static_cast<Eigen::Index>(gen.dataset.n()), 3);
  for (int c = 0; c < 3; ++c)
    covs.col(c) = gen.dataset.X.col(gen.dataset.x_col("x" + std::to_string(c + 1)));

  const TwoSlsResult raw = two_sls(a.y, d_vec, dev.raw, covs);
  CHECK_FALSE(raw.weak_instrument);
  CHECK(std::fabs(raw.estimate - gen.truth.late) < 3.0 * raw.se);

  const TwoSlsResult adj = two_sls(a.y, d_vec, dev.adjusted, covs);
  CHECK(std::fabs(adj.estimate - gen.truth.late) < 3.0 * adj.se);
}

TEST_CASE("2sls equals the reduced-form to first-stage ratio") {
  const GeneratedData gen = generate(iv_spec(2000, 122));
  const IvArrays a = arrays_from(gen);
  const DeviationInstrument dev =
      build_deviation_instrument(a.treated, a.school, a.year, std::nullopt);
  Eigen::VectorXd d_vec(static_cast<Eigen::Index>(a.treated.size()));
  for (std::size_t i = 0; i < a.treated.size(); ++i)
    d_vec(static_cast<Eigen::Index>(i)) = a.treated[i];
  const TwoSlsResult res = two_sls(a.y, d_vec, dev.raw, std::nullopt);
  CHECK(std::fabs(res.estimate - res.reduced_form_coef / res.first_stage_coef) < 1e-9);
}

TEST_CASE("irrelevant instruments raise the weak flag") {
  int flagged = 0;
  const int seeds = 40;
  for (int s = 0; s < seeds; ++s) {
    Rng rng(static_cast<std::uint64_t>(500 + s));
    const Eigen::Index n = 400;
    Eigen::VectorXd d_vec(n), y(n), z(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      d_vec(i) = rng.bernoulli(0.5) ? 1.0 : 0.0;
      y(i) = 0.5 * d_vec(i) + rng.normal();
      z(i) = rng.normal();  // pure noise instrument
    }
    const TwoSlsResult res = two_sls(y, d_vec, z, std::nullopt);
    if (res.weak_instrument) ++flagged;
  }
  CHECK(flagged >= seeds * 95 / 100);
}

TEST_CASE("orthogonal covariates barely move the estimate") {
  const GeneratedData gen = generate(iv_spec(4000, 123));
  const IvArrays a = arrays_from(gen);
  const DeviationInstrument dev =
      build_deviation_instrument(a.treated, a.school, a.year, std::nullopt);
  Eigen::VectorXd d_vec(static_cast<Eigen::Index>(a.treated.size()));
  for (std::size_t i = 0; i < a.treated.size(); ++i)
    d_vec(static_cast<Eigen::Index>(i)) = a.treated[i];

  const TwoSlsResult base = two_sls(a.y, d_vec, dev.raw, std::nullopt);

  Rng rng(124);
  Eigen::MatrixXd junk(static_cast<Eigen::Index>(gen.dataset.n()), 3);
  for (Eigen::Index i = 0; i < junk.rows(); ++i)
    for (Eigen::Index j = 0; j < 3; ++j) junk(i, j) = rng.normal();
  const TwoSlsResult with_junk = two_sls(a.y, d_vec, dev.raw, junk);
  CHECK(std::fabs(base.estimate - with_junk.estimate) < 2.0 * base.se);
}

TEST_CASE("school-clustered standard errors run and stay positive") {
  const GeneratedData gen = generate(iv_spec(2000, 126));
  const IvArrays a = arrays_from(gen);
  const DeviationInstrument dev =
      build_deviation_instrument(a.treated, a.school, a.year, std::nullopt);
  Eigen::VectorXd d_vec(static_cast<Eigen::Index>(a.treated.size()));
  for (std::size_t i = 0; i < a.treated.size(); ++i)
    d_vec(static_cast<Eigen::Index>(i)) = a.treated[i];
  const TwoSlsResult hc1 = two_sls(a.y, d_vec, dev.raw, std::nullopt);
  const TwoSlsResult cr1 = two_sls(a.y, d_vec, dev.raw, std::nullopt, a.school);
  CHECK(cr1.se > 0.0);
  CHECK(cr1.estimate == doctest::Approx(hc1.estimate));  // point estimate unchanged
  CHECK(cr1.se != hc1.se);
}

TEST_CASE("zero-variance instruments are rejected") {
  Eigen::VectorXd y(10), d_vec(10), z = Eigen::VectorXd::Zero(10);
  for (Eigen::Index i = 0; i < 10; ++i) {
    y(i) = static_cast<double>(i);
    d_vec(i) = i % 2;
  }
  CHECK_THROWS_AS(two_sls(y, d_vec, z, std::nullopt), ParameterError);
}

TEST_CASE("leave-one-out deviations differ from plain ones") {
  const GeneratedData gen = generate(iv_spec(1000, 125));
  const IvArrays a = arrays_from(gen);
  DeviationOptions loo;
  loo.leave_one_out = true;
  const DeviationInstrument plain =
      build_deviation_instrument(a.treated, a.school, a.year, std::nullopt);
  const DeviationInstrument adjusted =
      build_deviation_instrument(a.treated, a.school, a.year, std::nullopt, loo);
  CHECK(plain.raw != adjusted.raw);
}

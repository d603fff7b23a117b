#include <doctest.h>

#include <cmath>

#include "mtdml/dgp.hpp"
#include "mtdml/dml.hpp"
#include "mtdml/errors.hpp"
#include "mtdml/heterogeneity.hpp"
#include "mtdml/rng.hpp"
#include "mtdml/stats.hpp"

using namespace mtdml;

namespace {

NuisanceFit oracle_nuisance(const GeneratedData& gen) {
  NuisanceFit nf;
  nf.clip_eps = 1e-6;
  nf.outcome_name = "y";
  const auto n = static_cast<Eigen::Index>(gen.dataset.n());
  const auto D = static_cast<Eigen::Index>(gen.dataset.catalogue.size());
  nf.p_hat.resize(n, D);
  nf.mu_hat = gen.truth.conditional_mean;
  for (Eigen::Index i = 0; i < n; ++i)
    nf.p_hat.row(i) =
        clip_simplex(gen.truth.true_propensity.row(i).transpose(), nf.clip_eps).transpose();
  nf.folds = make_folds(gen.dataset.n(), 5, gen.dataset.treatment, 3, true);
  return nf;
}

std::vector<double> oracle_pair_scores(const GeneratedData& gen) {
  const NuisanceFit nf = oracle_nuisance(gen);
  const ScoreMatrix scores = build_scores(nf, gen.dataset.outcomes[0], gen.dataset.treatment,
                                          gen.dataset.catalogue.labels, {});
  return pairwise_scores(scores, 1, 0);
}

}  // namespace

TEST_CASE("gate equals the ate when groups are identical") {
  const GeneratedData gen = generate(randomized_spec(300, 2, 3, 60));
  const std::vector<double> scores = oracle_pair_scores(gen);
  std::vector<std::string> groups(scores.size(), "all");
  const GateResult res = gate(scores, groups);
  CHECK(res.single_level);
  REQUIRE(res.levels.size() == 1);
  CHECK(res.levels[0].estimate == doctest::Approx(mean(scores)).epsilon(1e-12));
}

TEST_CASE("gate weighted average reproduces the ate") {
  const GeneratedData gen = generate(confounded_spec(2000, 2, 4, 61));
  const std::vector<double> scores = oracle_pair_scores(gen);
  Rng rng(62);
  std::vector<std::string> groups;
  for (std::size_t i = 0; i < scores.size(); ++i)
    groups.push_back(std::to_string(rng.uniform_int(3)));
  const GateResult res = gate(scores, groups);
  double weighted = 0.0;
  std::size_t n = 0;
  for (const auto& level : res.levels) {
    weighted += level.estimate * static_cast<double>(level.n);
    n += level.n;
  }
  CHECK(std::fabs(weighted / static_cast<double>(n) - mean(scores)) < 1e-9);
  CHECK(std::fabs(res.overall_ate - mean(scores)) < 1e-9);
}

TEST_CASE("gate recovers planted two-group effects") {
  DgpSpec spec = confounded_spec(4000, 2, 5, 63);
  spec.covariates.push_back({"grp", CovariateSpec::Dist::bernoulli, 0.5});
  spec.propensity_coef.conservativeResize(2, spec.propensity_coef.cols() + 1);
  spec.propensity_coef.col(spec.propensity_coef.cols() - 1).setZero();
  spec.outcome_coef.conservativeResize(2, spec.outcome_coef.cols() + 1);
  spec.outcome_coef.col(spec.outcome_coef.cols() - 1).setZero();
  spec.heterogeneity = {HeterogeneitySpec::Kind::two_group, "grp", -0.1, 0.2};
  const GeneratedData gen = generate(spec);
  const std::vector<double> scores = oracle_pair_scores(gen);

  const int grp_col = gen.dataset.x_col("grp");
  std::vector<std::string> groups;
  std::vector<std::uint8_t> in_g1, in_g0;
  for (std::size_t i = 0; i < gen.dataset.n(); ++i) {
    const bool g1 = gen.dataset.X(static_cast<Eigen::Index>(i), grp_col) > 0.5;
    groups.push_back(g1 ? "g1" : "g0");
    in_g1.push_back(g1 ? 1 : 0);
    in_g0.push_back(g1 ? 0 : 1);
  }
  const GateResult res = gate(scores, groups);
  REQUIRE(res.levels.size() == 2);
  for (const auto& level : res.levels) {
    const double truth = gen.truth.gate(1, 0, level.label == "g1" ? in_g1 : in_g0);
    CHECK(std::fabs(level.estimate - truth) < 3.0 * level.se);
  }
  REQUIRE(res.diff_tests.size() == 1);
  CHECK(res.diff_tests[0].se > 0.0);
}

TEST_CASE("kernel cate is flat when scores ignore the moderator") {
  Rng rng(64);
  std::vector<double> scores, z;
  for (int i = 0; i < 2000; ++i) {
    scores.push_back(0.5 + rng.normal());
    z.push_back(rng.uniform());
  }
  const CateCurve curve = kernel_cate(scores, z, 30);
  for (double v : curve.values) CHECK(std::fabs(v - curve.ate) < 0.25);
}

TEST_CASE("kernel cate tracks planted linear moderation") {
  DgpSpec spec = randomized_spec(5000, 2, 3, 65);
  spec.noise_sd = 0.3;
  spec.outcome_coef.col(0).setZero();  // theta(z) = z is the whole contrast
  spec.covariates.push_back({"z", CovariateSpec::Dist::uniform01, 0.0});
  spec.propensity_coef.conservativeResize(2, spec.propensity_coef.cols() + 1);
  spec.propensity_coef.col(spec.propensity_coef.cols() - 1).setZero();
  spec.outcome_coef.conservativeResize(2, spec.outcome_coef.cols() + 1);
  spec.outcome_coef.col(spec.outcome_coef.cols() - 1).setZero();
  spec.heterogeneity = {HeterogeneitySpec::Kind::linear, "z", 1.0, 0.0};
  const GeneratedData gen = generate(spec);
  const std::vector<double> scores = oracle_pair_scores(gen);
  std::vector<double> z;
  const int z_col = gen.dataset.x_col("z");
  for (std::size_t i = 0; i < gen.dataset.n(); ++i)
    z.push_back(gen.dataset.X(static_cast<Eigen::Index>(i), z_col));

  const CateCurve curve = kernel_cate(scores, z, 50);
  double max_dev = 0.0;
  for (std::size_t g = 0; g < curve.grid.size(); ++g) {
    if (curve.grid[g] < 0.1 || curve.grid[g] > 0.9) continue;
    max_dev = std::max(max_dev, std::fabs(curve.values[g] - curve.grid[g]));
  }
  CHECK(max_dev < 0.1);
}

TEST_CASE("cate integrated over the moderator mass reproduces the ate") {
  DgpSpec spec = randomized_spec(5000, 2, 3, 165);
  spec.noise_sd = 0.3;
  spec.covariates.push_back({"z", CovariateSpec::Dist::uniform01, 0.0});
  spec.propensity_coef.conservativeResize(2, spec.propensity_coef.cols() + 1);
  spec.propensity_coef.col(spec.propensity_coef.cols() - 1).setZero();
  spec.outcome_coef.conservativeResize(2, spec.outcome_coef.cols() + 1);
  spec.outcome_coef.col(spec.outcome_coef.cols() - 1).setZero();
  spec.heterogeneity = {HeterogeneitySpec::Kind::linear, "z", 1.0, 0.0};
  const GeneratedData gen = generate(spec);
  const std::vector<double> scores = oracle_pair_scores(gen);
  std::vector<double> z;
  const int z_col = gen.dataset.x_col("z");
  for (std::size_t i = 0; i < gen.dataset.n(); ++i)
    z.push_back(gen.dataset.X(static_cast<Eigen::Index>(i), z_col));
  const CateCurve curve = kernel_cate(scores, z, 60);

  // Weight each grid value by the local data mass around it.
  std::vector<double> mass(curve.grid.size(), 0.0);
  const double step = curve.grid[1] - curve.grid[0];
  for (double zi : z) {
    const double pos = (zi - curve.grid.front()) / step;
    const auto g = static_cast<std::size_t>(
        std::clamp(pos, 0.0, static_cast<double>(curve.grid.size() - 1)));
    mass[g] += 1.0;
  }
  double integral = 0.0, total = 0.0;
  for (std::size_t g = 0; g < curve.grid.size(); ++g) {
    integral += curve.values[g] * mass[g];
    total += mass[g];
  }
  CHECK(std::fabs(integral / total - curve.ate) < 0.05);
}

TEST_CASE("huge bandwidth flattens the curve to the ate") {
  Rng rng(66);
  std::vector<double> scores, z;
  for (int i = 0; i < 500; ++i) {
    scores.push_back(rng.normal(1.0, 1.0));
    z.push_back(rng.uniform(0.0, 10.0));
  }
  const CateCurve curve = kernel_cate(scores, z, 20, 1e9);
  for (double v : curve.values) CHECK(std::fabs(v - curve.ate) < 1e-9);
}

TEST_CASE("constant moderator degenerates to a flat curve at the ate") {
  std::vector<double> scores = {1.0, 2.0, 3.0, 4.0};
  std::vector<double> z(4, 7.0);
  const CateCurve curve = kernel_cate(scores, z, 5);
  for (double v : curve.values) CHECK(v == doctest::Approx(2.5));
}

TEST_CASE("dr-learner stays tight on homogeneous effects") {
  DgpSpec spec = confounded_spec(4000, 2, 5, 67);
  spec.heterogeneity = {HeterogeneitySpec::Kind::constant, "", 0.5, 0.0};
  spec.outcome_coef.col(0).setZero();
  const GeneratedData gen = generate(spec);
  const NuisanceFit nf = oracle_nuisance(gen);
  const ScoreMatrix scores = build_scores(nf, gen.dataset.outcomes[0], gen.dataset.treatment,
                                          gen.dataset.catalogue.labels, {});
  const Eigen::VectorXd pair = scores.gamma.col(1) - scores.gamma.col(0);

  LearnerSpec enet;
  enet.kind = LearnerKind::elastic_net;
  enet.feature_set_id = "base";
  enet.n_lambda = 15;
  enet.cv_folds = 2;
  IateOptions opt;
  opt.inner_folds = 2;
  const IateResult iate = iate_dr_learner({{"base", gen.dataset.X}}, pair, scores.keep_mask,
                                          nf.folds, {enet}, opt);
  std::vector<double> v(iate.values.data(), iate.values.data() + iate.values.size());
  CHECK(sd(v) < 0.15);
  CHECK(std::fabs(mean(v) - 0.5) < 0.1);
}

TEST_CASE("dr-learner finds a planted sign flip") {
  DgpSpec spec = confounded_spec(4000, 2, 5, 68);
  spec.heterogeneity = {HeterogeneitySpec::Kind::indicator, "x1", 1.0, 0.0};
  spec.effect_scale(1) = 1.0;
  spec.outcome_coef.col(0).setZero();
  // Center the indicator effect: theta = 1{x1>0} - makes IATE 0/1.
  const GeneratedData gen = generate(spec);
  const NuisanceFit nf = oracle_nuisance(gen);
  const ScoreMatrix scores = build_scores(nf, gen.dataset.outcomes[0], gen.dataset.treatment,
                                          gen.dataset.catalogue.labels, {});
  const Eigen::VectorXd pair = scores.gamma.col(1) - scores.gamma.col(0);

  LearnerSpec forest;
  forest.kind = LearnerKind::random_forest;
  forest.feature_set_id = "base";
  forest.n_trees = 60;
  IateOptions opt;
  opt.inner_folds = 2;
  const IateResult iate = iate_dr_learner({{"base", gen.dataset.X}}, pair, scores.keep_mask,
                                          nf.folds, {forest}, opt);

  // Sign agreement against theta centered at 0.5.
  const int x1 = gen.dataset.x_col("x1");
  std::size_t agree = 0;
  for (std::size_t i = 0; i < gen.dataset.n(); ++i) {
    const bool actual = gen.dataset.X(static_cast<Eigen::Index>(i), x1) > 0.0;
    const bool predicted = iate.values(static_cast<Eigen::Index>(i)) > 0.5;
    if (actual == predicted) ++agree;
  }
  CHECK(static_cast<double>(agree) / static_cast<double>(gen.dataset.n()) > 0.8);
}

TEST_CASE("constant scores give constant dr-learner predictions") {
  const GeneratedData gen = generate(randomized_spec(200, 2, 3, 69));
  const Eigen::VectorXd pair = Eigen::VectorXd::Constant(200, 0.7);
  const FoldAssignment folds = make_folds(200, 4, gen.dataset.treatment, 5, true);
  LearnerSpec enet;
  enet.kind = LearnerKind::elastic_net;
  enet.feature_set_id = "base";
  enet.n_lambda = 5;
  enet.cv_folds = 2;
  IateOptions opt;
  opt.inner_folds = 2;
  const IateResult iate =
      iate_dr_learner({{"base", gen.dataset.X}}, pair, {}, folds, {enet}, opt);
  for (Eigen::Index i = 0; i < iate.values.size(); ++i)
    CHECK(iate.values(i) == doctest::Approx(0.7).epsilon(1e-9));
}

TEST_CASE("quintile sizes differ by at most one") {
  Rng rng(70);
  Eigen::VectorXd iate(2003);
  Eigen::MatrixXd X(2003, 1);
  for (Eigen::Index i = 0; i < iate.size(); ++i) {
    iate(i) = rng.normal();
    X(i, 0) = rng.normal();
  }
  const QuintileProfile profile = classify_quintiles(iate, X, {"x"});
  std::vector<std::size_t> counts(6, 0);
  for (int q : profile.quintile_of) counts[static_cast<std::size_t>(q)]++;
  std::size_t mn = 2003, mx = 0;
  for (int q = 1; q <= 5; ++q) {
    mn = std::min(mn, counts[static_cast<std::size_t>(q)]);
    mx = std::max(mx, counts[static_cast<std::size_t>(q)]);
  }
  CHECK(mx - mn <= 1);
  // Independent covariate rarely flags.
  CHECK(std::fabs(profile.smd[0].value) < 0.2);
}

TEST_CASE("a covariate equal to the iate sorts perfectly") {
  Rng rng(71);
  Eigen::VectorXd iate(500);
  for (Eigen::Index i = 0; i < 500; ++i) iate(i) = rng.normal();
  Eigen::MatrixXd X(500, 1);
  X.col(0) = iate;
  const QuintileProfile profile = classify_quintiles(iate, X, {"self"});
  CHECK(std::fabs(profile.smd[0].value) > 2.0);
  CHECK(profile.smd[0].flagged);
}

TEST_CASE("five units split one per quintile") {
  Eigen::VectorXd iate(5);
  iate << 5.0, 1.0, 3.0, 2.0, 4.0;
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(5, 1);
  const QuintileProfile profile = classify_quintiles(iate, X, {"x"});
  std::vector<int> sorted = profile.quintile_of;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == std::vector<int>{1, 2, 3, 4, 5});
  CHECK(profile.quintile_of[1] == 1);  // smallest value
  CHECK(profile.quintile_of[0] == 5);  // largest value
  CHECK(profile.smd[0].zero_variance);
}

TEST_CASE("quintiles are invariant to monotone transforms") {
  Rng rng(72);
  Eigen::VectorXd iate(400);
  Eigen::MatrixXd X(400, 2);
  for (Eigen::Index i = 0; i < 400; ++i) {
    iate(i) = rng.normal();
    X(i, 0) = rng.normal();
    X(i, 1) = iate(i) + 0.5 * rng.normal();
  }
  const QuintileProfile base = classify_quintiles(iate, X, {"a", "b"});
  Eigen::VectorXd transformed = iate;
  for (Eigen::Index i = 0; i < 400; ++i) transformed(i) = std::exp(3.0 * iate(i)) + 7.0;
  const QuintileProfile warped = classify_quintiles(transformed, X, {"a", "b"});
  CHECK(base.quintile_of == warped.quintile_of);
  CHECK(base.smd[1].value == doctest::Approx(warped.smd[1].value));
}

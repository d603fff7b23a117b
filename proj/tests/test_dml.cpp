#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mtdml/dgp.hpp"
#include "mtdml/dml.hpp"
#include "mtdml/errors.hpp"
#include "mtdml/rng.hpp"

using namespace mtdml;

namespace {

// Oracle nuisances assembled from the generator's ground truth.
NuisanceFit oracle_nuisance(const GeneratedData& gen, bool true_mu, bool true_p) {
  NuisanceFit nf;
  nf.clip_eps = 1e-6;
  nf.outcome_name = "y";
  const auto n = static_cast<Eigen::Index>(gen.dataset.n());
  const auto D = static_cast<Eigen::Index>(gen.dataset.catalogue.size());
  nf.p_hat.resize(n, D);
  nf.mu_hat.resize(n, D);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (true_p) {
      nf.p_hat.row(i) =
          clip_simplex(gen.truth.true_propensity.row(i).transpose(), nf.clip_eps).transpose();
    } else {
      nf.p_hat.row(i).setConstant(1.0 / static_cast<double>(D));
    }
    for (Eigen::Index d = 0; d < D; ++d)
      nf.mu_hat(i, d) = true_mu ? gen.truth.conditional_mean(i, d) : 0.0;
  }
  nf.folds = make_folds(gen.dataset.n(), 2, gen.dataset.treatment, 1, true);
  return nf;
}

std::vector<LearnerSpec> lean_enet_specs() {
  LearnerSpec enet;
  enet.kind = LearnerKind::elastic_net;
  enet.feature_set_id = "base";
  enet.mixing = 0.5;
  enet.n_lambda = 15;
  enet.cv_folds = 2;
  return {enet};
}

ScoreMatrix oracle_scores(const GeneratedData& gen, Tilting tilting = Tilting::ate) {
  const NuisanceFit nf = oracle_nuisance(gen, true, true);
  ScoreOptions so;
  so.tilting = tilting;
  return build_scores(nf, gen.dataset.outcomes[0], gen.dataset.treatment,
                      gen.dataset.catalogue.labels, so);
}

}  // namespace

TEST_CASE("clip_simplex is the identity on feasible rows") {
  Eigen::VectorXd p(3);
  p << 0.2, 0.3, 0.5;
  const Eigen::VectorXd q = clip_simplex(p, 0.01);
  CHECK(q == p);
}

TEST_CASE("clip_simplex projects infeasible rows onto the clipped simplex") {
  Eigen::VectorXd p(4);
  p << 0.0, 0.001, 0.998, 0.001;
  const double eps = 0.01;
  const Eigen::VectorXd q = clip_simplex(p, eps);
  CHECK(q.sum() == doctest::Approx(1.0).epsilon(1e-12));
  for (Eigen::Index d = 0; d < q.size(); ++d) {
    CHECK(q(d) >= eps - 1e-15);
    CHECK(q(d) <= 1.0 - eps + 1e-15);
  }
  // All-mass-below-eps rows collapse to uniform.
  Eigen::VectorXd tiny = Eigen::VectorXd::Constant(5, 0.001);
  const Eigen::VectorXd u = clip_simplex(tiny, 0.01);
  for (Eigen::Index d = 0; d < u.size(); ++d) CHECK(u(d) == doctest::Approx(0.2));
}

TEST_CASE("crossfit recovers uniform propensities on a randomized design") {
  const GeneratedData gen = generate(randomized_spec(3000, 3, 5, 42));
  FeatureBlocks blocks{{"base", gen.dataset.X}};
  CrossfitOptions opt;
  opt.K = 5;
  opt.seed = 9;
  opt.inner_folds = 2;
  const NuisanceFit nf = crossfit_nuisances(gen.dataset, blocks, lean_enet_specs(), opt);
  for (int d = 0; d < 3; ++d)
    CHECK(std::fabs(nf.p_hat.col(d).mean() - 1.0 / 3.0) < 0.03);
}

TEST_CASE("crossfit nails a noiseless linear outcome") {
  DgpSpec spec = randomized_spec(2000, 2, 4, 43);
  spec.noise_sd = 0.0;
  const GeneratedData gen = generate(spec);
  FeatureBlocks blocks{{"base", gen.dataset.X}};
  CrossfitOptions opt;
  opt.K = 5;
  opt.seed = 10;
  opt.inner_folds = 2;
  const NuisanceFit nf = crossfit_nuisances(gen.dataset, blocks, lean_enet_specs(), opt);
  double sse = 0.0;
  for (Eigen::Index i = 0; i < nf.mu_hat.rows(); ++i)
    for (Eigen::Index d = 0; d < 2; ++d) {
      const double err = nf.mu_hat(i, d) - gen.truth.conditional_mean(i, d);
      sse += err * err;
    }
  CHECK(sse / static_cast<double>(2 * gen.dataset.n()) < 0.01);
}

TEST_CASE("leave-one-out crossfit runs") {
  const GeneratedData gen = generate(randomized_spec(20, 2, 2, 44));
  FeatureBlocks blocks{{"base", gen.dataset.X}};
  CrossfitOptions opt;
  opt.K = 20;
  opt.seed = 11;
  opt.inner_folds = 2;
  const NuisanceFit nf = crossfit_nuisances(gen.dataset, blocks, lean_enet_specs(), opt);
  nf.validate(gen.dataset.treatment);
  CHECK(nf.folds.K == 20);
}

TEST_CASE("trimming none keeps everyone") {
  const GeneratedData gen = generate(confounded_spec(200, 3, 4, 45));
  const NuisanceFit nf = oracle_nuisance(gen, true, true);
  const auto mask = apply_trimming(nf.p_hat, gen.dataset.treatment, TrimmingScheme::none());
  for (auto k : mask) CHECK(k == 1);
}

TEST_CASE("crump keeps everyone under uniform propensities") {
  Eigen::MatrixXd p(50, 3);
  p.setConstant(1.0 / 3.0);
  std::vector<int> treat(50);
  for (std::size_t i = 0; i < 50; ++i) treat[i] = static_cast<int>(i % 3);
  const auto mask = apply_trimming(p, treat, TrimmingScheme::crump(0.01));
  for (auto k : mask) CHECK(k == 1);
}

TEST_CASE("crump and sturmer match a brute-force filter") {
  Rng rng(46);
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t n = 80;
    const int D = 3;
    Eigen::MatrixXd p(static_cast<Eigen::Index>(n), D);
    std::vector<int> treat(n);
    for (std::size_t i = 0; i < n; ++i) {
      double total = 0.0;
      for (int d = 0; d < D; ++d) {
        p(static_cast<Eigen::Index>(i), d) = 0.001 + rng.uniform();
        total += p(static_cast<Eigen::Index>(i), d);
      }
      for (int d = 0; d < D; ++d) p(static_cast<Eigen::Index>(i), d) /= total;
      treat[i] = static_cast<int>(rng.uniform_int(D));
    }

    const double alpha = (rep % 2 == 0) ? 0.01 : 0.05;
    const auto crump_mask = apply_trimming(p, treat, TrimmingScheme::crump(alpha));
    for (std::size_t i = 0; i < n; ++i) {
      const bool drop = p.row(static_cast<Eigen::Index>(i)).minCoeff() < alpha;
      CHECK(crump_mask[i] == (drop ? 0 : 1));
    }

    const auto sturmer_mask = apply_trimming(p, treat, TrimmingScheme::sturmer(alpha));
    // Independent quantile: sort own-arm propensities, type-7 interpolation.
    for (int d = 0; d < D; ++d) {
      std::vector<double> own;
      for (std::size_t i = 0; i < n; ++i)
        if (treat[i] == d) own.push_back(p(static_cast<Eigen::Index>(i), d));
      std::sort(own.begin(), own.end());
      const double h = alpha * static_cast<double>(own.size() - 1);
      const std::size_t lo = static_cast<std::size_t>(std::floor(h));
      const double thr =
          (lo + 1 < own.size()) ? own[lo] + (h - std::floor(h)) * (own[lo + 1] - own[lo])
                                : own[lo];
      for (std::size_t i = 0; i < n; ++i) {
        if (treat[i] != d) continue;
        CHECK(sturmer_mask[i] == (p(static_cast<Eigen::Index>(i), d) < thr ? 0 : 1));
      }
    }
  }
}

TEST_CASE("zero-residual units reproduce the outcome model exactly") {
  const GeneratedData gen = generate(confounded_spec(100, 3, 4, 47));
  NuisanceFit nf = oracle_nuisance(gen, true, true);
  // Force the outcome model through the observed outcome.
  for (std::size_t i = 0; i < gen.dataset.n(); ++i)
    nf.mu_hat(static_cast<Eigen::Index>(i), gen.dataset.treatment[i]) =
        gen.dataset.outcomes[0].values(static_cast<Eigen::Index>(i));
  const ScoreMatrix scores = build_scores(nf, gen.dataset.outcomes[0], gen.dataset.treatment,
                                          gen.dataset.catalogue.labels, {});
  for (std::size_t i = 0; i < gen.dataset.n(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    const int d = gen.dataset.treatment[i];
    CHECK(scores.gamma(row, d) == nf.mu_hat(row, d));
  }
}

TEST_CASE("constant half propensities make ATO scores equal ATE scores") {
  const GeneratedData gen = generate(randomized_spec(500, 2, 3, 48));
  NuisanceFit nf = oracle_nuisance(gen, true, false);  // uniform 0.5 rows
  ScoreOptions ate_opt;
  const ScoreMatrix ate_scores = build_scores(nf, gen.dataset.outcomes[0],
                                              gen.dataset.treatment,
                                              gen.dataset.catalogue.labels, ate_opt);
  ScoreOptions ato_opt;
  ato_opt.tilting = Tilting::ato;
  const ScoreMatrix ato_scores = build_scores(nf, gen.dataset.outcomes[0],
                                              gen.dataset.treatment,
                                              gen.dataset.catalogue.labels, ato_opt);
  for (Eigen::Index i = 0; i < ate_scores.gamma.rows(); ++i)
    for (Eigen::Index d = 0; d < 2; ++d)
      CHECK(std::fabs(ate_scores.gamma(i, d) - ato_scores.gamma(i, d)) < 1e-12);
}

TEST_CASE("zeroed outcome model reduces to Horvitz-Thompson") {
  const GeneratedData gen = generate(randomized_spec(200, 2, 3, 49));
  const NuisanceFit nf = oracle_nuisance(gen, false, true);  // mu = 0
  const ScoreMatrix scores = build_scores(nf, gen.dataset.outcomes[0], gen.dataset.treatment,
                                          gen.dataset.catalogue.labels, {});
  for (std::size_t i = 0; i < gen.dataset.n(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    for (int d = 0; d < 2; ++d) {
      const double expected =
          gen.dataset.treatment[i] == d
              ? gen.dataset.outcomes[0].values(row) / nf.p_hat(row, d)
              : 0.0;
      CHECK(scores.gamma(row, d) == doctest::Approx(expected).epsilon(1e-12));
    }
  }
}

TEST_CASE("constant score column gives a degenerate-SE APO") {
  const GeneratedData gen = generate(randomized_spec(50, 2, 2, 50));
  NuisanceFit nf = oracle_nuisance(gen, true, true);
  ScoreMatrix scores = build_scores(nf, gen.dataset.outcomes[0], gen.dataset.treatment,
                                    gen.dataset.catalogue.labels, {});
  scores.gamma.col(0).setConstant(2.25);
  const EffectEstimate apo = estimate(scores, Estimand::apo(0));
  CHECK(apo.point == doctest::Approx(2.25));
  CHECK(apo.se == 0.0);
  CHECK(apo.degenerate_se);
}

TEST_CASE("oracle-nuisance ATE covers the truth on a randomized design") {
  const GeneratedData gen = generate(randomized_spec(4000, 2, 5, 51));
  const ScoreMatrix scores = oracle_scores(gen);
  const EffectEstimate ate = estimate(scores, Estimand::ate(1, 0));
  CHECK(std::fabs(ate.point - gen.truth.ate(1, 0)) < 3.0 * ate.se);

  const EffectEstimate atet = estimate(scores, Estimand::atet(1, 0));
  CHECK(std::fabs(atet.point - ate.point) < 3.0 * (ate.se + atet.se));
}

TEST_CASE("double robustness holds with one correct nuisance") {
  const GeneratedData gen = generate(confounded_spec(10000, 3, 6, 52));

  // Leg (a): zeroed outcome models, true propensities.
  const NuisanceFit leg_a = oracle_nuisance(gen, false, true);
  const ScoreMatrix scores_a = build_scores(leg_a, gen.dataset.outcomes[0],
                                            gen.dataset.treatment,
                                            gen.dataset.catalogue.labels, {});
  // Leg (b): uniform propensities, true outcome models.
  const NuisanceFit leg_b = oracle_nuisance(gen, true, false);
  const ScoreMatrix scores_b = build_scores(leg_b, gen.dataset.outcomes[0],
                                            gen.dataset.treatment,
                                            gen.dataset.catalogue.labels, {});
  for (int d = 1; d < 3; ++d) {
    const EffectEstimate a = estimate(scores_a, Estimand::ate(d, 0));
    CHECK(std::fabs(a.point - gen.truth.ate(d, 0)) < 3.0 * a.se);
    const EffectEstimate b = estimate(scores_b, Estimand::ate(d, 0));
    CHECK(std::fabs(b.point - gen.truth.ate(d, 0)) < 3.0 * b.se);
  }
}

TEST_CASE("pairwise score mean equals the APO difference") {
  const GeneratedData gen = generate(confounded_spec(3000, 3, 5, 53));
  const ScoreMatrix scores = oracle_scores(gen);
  for (int d = 0; d < 3; ++d) {
    for (int dp = 0; dp < 3; ++dp) {
      if (d == dp) continue;
      const EffectEstimate ate = estimate(scores, Estimand::ate(d, dp));
      const EffectEstimate apo_d = estimate(scores, Estimand::apo(d));
      const EffectEstimate apo_dp = estimate(scores, Estimand::apo(dp));
      CHECK(std::fabs(ate.point - (apo_d.point - apo_dp.point)) < 1e-12);
    }
  }
}

TEST_CASE("estimates are invariant to unit permutation") {
  const GeneratedData gen = generate(confounded_spec(2000, 2, 4, 54));
  const ScoreMatrix scores = oracle_scores(gen);
  const EffectEstimate base = estimate(scores, Estimand::ate(1, 0));

  // Permute all unit-indexed arrays with one shuffle.
  std::vector<std::size_t> perm(gen.dataset.n());
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(55);
  rng.shuffle(perm);

  GeneratedData shuffled = gen;
  for (std::size_t i = 0; i < perm.size(); ++i) {
    const auto src = static_cast<Eigen::Index>(perm[i]);
    const auto dst = static_cast<Eigen::Index>(i);
    shuffled.dataset.X.row(dst) = gen.dataset.X.row(src);
    shuffled.dataset.treatment[i] = gen.dataset.treatment[perm[i]];
    shuffled.dataset.outcomes[0].values(dst) = gen.dataset.outcomes[0].values(src);
    shuffled.truth.true_propensity.row(dst) = gen.truth.true_propensity.row(src);
    shuffled.truth.conditional_mean.row(dst) = gen.truth.conditional_mean.row(src);
  }
  const ScoreMatrix shuffled_scores = oracle_scores(shuffled);
  const EffectEstimate permuted = estimate(shuffled_scores, Estimand::ate(1, 0));
  CHECK(std::fabs(base.point - permuted.point) < 1e-12);
  CHECK(std::fabs(base.se - permuted.se) < 1e-12);
}

TEST_CASE("oracle-nuisance ATE is unbiased over many seeds") {
  // 500 seeds at n=1000: the mean estimate sits within 0.01 of the truth.
  double total_err = 0.0;
  const int seeds = 500;
  for (int s = 0; s < seeds; ++s) {
    const GeneratedData gen = generate(randomized_spec(1000, 2, 3, 7000 + s));
    const ScoreMatrix scores = oracle_scores(gen);
    const EffectEstimate ate = estimate(scores, Estimand::ate(1, 0));
    total_err += ate.point - gen.truth.ate(1, 0);
  }
  CHECK(std::fabs(total_err / seeds) < 0.01);
}

TEST_CASE("trimming reduces n_used and none reproduces untrimmed estimates") {
  const GeneratedData gen = generate(confounded_spec(1500, 3, 5, 56));
  const NuisanceFit nf = oracle_nuisance(gen, true, true);
  ScoreOptions plain;
  const ScoreMatrix untrimmed = build_scores(nf, gen.dataset.outcomes[0],
                                             gen.dataset.treatment,
                                             gen.dataset.catalogue.labels, plain);
  ScoreOptions with_none = plain;
  with_none.keep_mask = apply_trimming(nf.p_hat, gen.dataset.treatment, TrimmingScheme::none());
  const ScoreMatrix none_scores = build_scores(nf, gen.dataset.outcomes[0],
                                               gen.dataset.treatment,
                                               gen.dataset.catalogue.labels, with_none);
  CHECK(estimate(untrimmed, Estimand::ate(1, 0)).point ==
        estimate(none_scores, Estimand::ate(1, 0)).point);

  ScoreOptions with_crump = plain;
  with_crump.keep_mask =
      apply_trimming(nf.p_hat, gen.dataset.treatment, TrimmingScheme::crump(0.05));
  const ScoreMatrix crump_scores = build_scores(nf, gen.dataset.outcomes[0],
                                                gen.dataset.treatment,
                                                gen.dataset.catalogue.labels, with_crump);
  CHECK(crump_scores.n_kept() <= untrimmed.n_kept());
}

TEST_CASE("atet targets the treated population under confounding") {
  // Planted moderation makes ATET and ATE differ; the score must follow ATET.
  DgpSpec spec = confounded_spec(12000, 3, 6, 301);
  spec.heterogeneity = {HeterogeneitySpec::Kind::linear, "x1", 0.6, 0.0};
  const GeneratedData gen = generate(spec);
  const NuisanceFit nf = oracle_nuisance(gen, true, true);
  const ScoreMatrix scores = build_scores(nf, gen.dataset.outcomes[0], gen.dataset.treatment,
                                          gen.dataset.catalogue.labels, {});
  bool atet_differs_from_ate = false;
  for (int d = 1; d < 3; ++d) {
    for (int dp = 0; dp < 3; ++dp) {
      if (d == dp) continue;
      const EffectEstimate atet = estimate(scores, Estimand::atet(d, dp));
      const double truth = gen.truth.atet(d, dp, gen.dataset.treatment);
      CHECK(std::fabs(atet.point - truth) < 3.0 * atet.se);
      if (std::fabs(truth - gen.truth.ate(d, dp)) > 5.0 * atet.se)
        atet_differs_from_ate = true;
    }
  }
  CHECK(atet_differs_from_ate);  // the design actually separates the estimands
}

TEST_CASE("normalized scores rescale residual weights to mean one") {
  const GeneratedData gen = generate(confounded_spec(3000, 2, 4, 58));
  const NuisanceFit nf = oracle_nuisance(gen, true, true);
  ScoreOptions plain;
  plain.with_atet = false;
  ScoreOptions normalized = plain;
  normalized.normalized = true;
  const ScoreMatrix s_plain = build_scores(nf, gen.dataset.outcomes[0], gen.dataset.treatment,
                                           gen.dataset.catalogue.labels, plain);
  const ScoreMatrix s_norm = build_scores(nf, gen.dataset.outcomes[0], gen.dataset.treatment,
                                          gen.dataset.catalogue.labels, normalized);
  // Same target, slightly different weighting; estimates agree within noise.
  const EffectEstimate a = estimate(s_plain, Estimand::ate(1, 0));
  const EffectEstimate b = estimate(s_norm, Estimand::ate(1, 0));
  CHECK(std::fabs(a.point - b.point) < 3.0 * (a.se + b.se));
  CHECK(std::fabs(b.point - gen.truth.ate(1, 0)) < 3.0 * b.se);

  // With exactly mean-one weights the correction terms average the residuals.
  for (int d = 0; d < 2; ++d) {
    double weight_sum = 0.0;
    for (auto i : s_norm.kept_indices()) {
      if (gen.dataset.treatment[i] != d) continue;
      const auto row = static_cast<Eigen::Index>(i);
      const double resid = gen.dataset.outcomes[0].values(row) - nf.mu_hat(row, d);
      if (resid != 0.0)
        weight_sum += (s_norm.gamma(row, d) - nf.mu_hat(row, d)) / resid;
    }
    CHECK(weight_sum / static_cast<double>(s_norm.n_kept()) == doctest::Approx(1.0));
  }
}

TEST_CASE("estimate guards its inputs") {
  const GeneratedData gen = generate(randomized_spec(100, 2, 2, 57));
  const ScoreMatrix scores = oracle_scores(gen);
  CHECK_THROWS_AS(estimate(scores, Estimand::apo(5)), ParameterError);
  CHECK_THROWS_AS(estimate(scores, Estimand::ato(1, 0)), ParameterError);
}

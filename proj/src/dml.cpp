#include "mtdml/dml.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mtdml/csv.hpp"
#include "mtdml/errors.hpp"
#include "mtdml/stats.hpp"

namespace mtdml {

void NuisanceFit::validate(const std::vector<int>& treatment) const {
  const Eigen::Index rows = p_hat.rows(), D = p_hat.cols();
  if (mu_hat.rows() != rows || mu_hat.cols() != D)
    throw ValidityError("nuisance: p_hat / mu_hat shape mismatch");
  if (treatment.size() != static_cast<std::size_t>(rows))
    throw ValidityError("nuisance: treatment length mismatch");
  for (Eigen::Index i = 0; i < rows; ++i) {
    double row_sum = 0.0;
    for (Eigen::Index d = 0; d < D; ++d) {
      const double p = p_hat(i, d);
      if (p < clip_eps - 1e-12 || p > 1.0 - clip_eps + 1e-12)
        throw ValidityError("nuisance: propensity outside clipped range");
      if (!std::isfinite(mu_hat(i, d)))
        throw ValidityError("nuisance: non-finite outcome prediction");
      row_sum += p;
    }
    if (std::fabs(row_sum - 1.0) > 1e-9)
      throw ValidityError("nuisance: propensity row does not sum to 1");
  }
}

Eigen::VectorXd clip_simplex(const Eigen::VectorXd& p, double eps) {
  const Eigen::Index D = p.size();
  if (static_cast<double>(D) * eps >= 1.0)
    throw ParameterError("clip_simplex: D*eps must be below 1");
  Eigen::VectorXd slack = (p.array() - eps).cwiseMax(0.0);
  const double total = slack.sum();
  Eigen::VectorXd out(D);
  if (total <= 0.0) {
    out.setConstant(1.0 / static_cast<double>(D));
    return out;
  }
  const double budget = 1.0 - static_cast<double>(D) * eps;
  out = (slack * (budget / total)).array() + eps;
  return out;
}

namespace {

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& X, const std::vector<std::size_t>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), X.cols());
  for (std::size_t i = 0; i < rows.size(); ++i)
    out.row(static_cast<Eigen::Index>(i)) = X.row(static_cast<Eigen::Index>(rows[i]));
  return out;
}

FeatureBlocks take_block_rows(const FeatureBlocks& blocks,
                              const std::vector<std::size_t>& rows) {
  FeatureBlocks out;
  for (const auto& [id, X] : blocks) out.emplace(id, take_rows(X, rows));
  return out;
}

std::string format_alpha(double alpha) {
  std::string s = format_double(alpha);
  return s;
}

}  // namespace

NuisanceFit crossfit_nuisances(const Dataset& data, const FeatureBlocks& blocks,
                               const std::vector<LearnerSpec>& specs,
                               const CrossfitOptions& opt) {
  if (opt.K < 2) throw ParameterError("crossfit: K must be >= 2");
  if (specs.empty()) throw ParameterError("crossfit: no learner specs");
  const std::size_t n = data.n();
  const std::size_t D = data.catalogue.size();
  const Outcome& outcome = opt.outcome.empty() ? data.outcomes.front()
                                               : data.outcome(opt.outcome);
  for (const auto& [id, X] : blocks)
    if (static_cast<std::size_t>(X.rows()) != n)
      throw ParameterError("crossfit: feature block '" + id + "' row count mismatch");

  NuisanceFit fit;
  fit.outcome_name = outcome.name;
  fit.clip_eps = opt.clip_eps;
  fit.folds = make_folds(n, opt.K, data.treatment, opt.seed, opt.stratify);
  fit.p_hat.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(D));
  fit.mu_hat.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(D));
  fit.ensemble_reports.resize(static_cast<std::size_t>(opt.K));

  for (int k = 0; k < opt.K; ++k) {
    const std::vector<std::size_t> train = fit.folds.complement_indices(k);
    const std::vector<std::size_t> held = fit.folds.fold_indices(k);
    if (train.empty() || held.empty())
      throw ValidityError("crossfit: empty fold " + std::to_string(k));

    std::vector<std::size_t> arm_count(D, 0);
    for (auto i : train) arm_count[static_cast<std::size_t>(data.treatment[i])]++;
    for (std::size_t d = 0; d < D; ++d)
      if (arm_count[d] == 0)
        throw ValidityError("crossfit: arm '" + data.catalogue.labels[d] +
                            "' is empty in the training complement of fold " +
                            std::to_string(k) + "; use stratified folds");

    const FeatureBlocks train_blocks = take_block_rows(blocks, train);
    const FeatureBlocks held_blocks = take_block_rows(blocks, held);
    auto& report = fit.ensemble_reports[static_cast<std::size_t>(k)];

    // Propensities: one-vs-rest probability ensembles, renormalized per row.
    Eigen::MatrixXd raw(static_cast<Eigen::Index>(held.size()),
                        static_cast<Eigen::Index>(D));
    for (std::size_t d = 0; d < D; ++d) {
      Eigen::VectorXd y01(static_cast<Eigen::Index>(train.size()));
      for (std::size_t i = 0; i < train.size(); ++i)
        y01(static_cast<Eigen::Index>(i)) =
            (data.treatment[train[i]] == static_cast<int>(d)) ? 1.0 : 0.0;
      EnsembleOptions eo;
      eo.task = Task::probability;
      eo.inner_folds = opt.inner_folds;
      eo.clip_eps = opt.clip_eps;
      eo.weighting = opt.weighting;
      eo.seed = Rng::derive_stream(opt.seed, 0x9a0 + static_cast<std::uint64_t>(k) * 64 + d);
      eo.threads = opt.threads;
      EnsembleFit ef = fit_ensemble(train_blocks, y01, specs, eo);
      raw.col(static_cast<Eigen::Index>(d)) = ef.ensemble.predict(held_blocks);
      report.propensity.push_back(std::move(ef.report));
    }
    for (std::size_t i = 0; i < held.size(); ++i) {
      const Eigen::VectorXd q =
          clip_simplex(raw.row(static_cast<Eigen::Index>(i)).transpose(), opt.clip_eps);
      fit.p_hat.row(static_cast<Eigen::Index>(held[i])) = q.transpose();
    }

    // Conditional outcomes: one regression ensemble per arm on observed units.
    for (std::size_t d = 0; d < D; ++d) {
      std::vector<std::size_t> arm_rows;
      for (auto i : train)
        if (data.treatment[i] == static_cast<int>(d) && outcome.observed[i])
          arm_rows.push_back(i);
      if (arm_rows.size() < 2)
        throw ValidityError("crossfit: fewer than 2 observed training units for arm '" +
                            data.catalogue.labels[d] + "' in fold " + std::to_string(k) +
                            "; use stratified folds");
      Eigen::VectorXd y_arm(static_cast<Eigen::Index>(arm_rows.size()));
      for (std::size_t i = 0; i < arm_rows.size(); ++i)
        y_arm(static_cast<Eigen::Index>(i)) =
            outcome.values(static_cast<Eigen::Index>(arm_rows[i]));
      EnsembleOptions eo;
      eo.task = Task::regression;
      eo.inner_folds = opt.inner_folds;
      eo.weighting = opt.weighting;
      eo.seed = Rng::derive_stream(opt.seed, 0x3b0 + static_cast<std::uint64_t>(k) * 64 + d);
      eo.threads = opt.threads;
      EnsembleFit ef = fit_ensemble(take_block_rows(blocks, arm_rows), y_arm, specs, eo);
      const Eigen::VectorXd pred = ef.ensemble.predict(held_blocks);
      for (std::size_t i = 0; i < held.size(); ++i)
        fit.mu_hat(static_cast<Eigen::Index>(held[i]), static_cast<Eigen::Index>(d)) =
            pred(static_cast<Eigen::Index>(i));
      report.outcome.push_back(std::move(ef.report));
    }
  }

  fit.validate(data.treatment);
  return fit;
}

std::string TrimmingScheme::name() const {
  switch (kind) {
    case TrimmingKind::none: return "none";
    case TrimmingKind::crump: return "crump(" + format_alpha(alpha) + ")";
    case TrimmingKind::sturmer: return "sturmer(" + format_alpha(alpha) + ")";
  }
  return "none";
}

std::vector<std::uint8_t> apply_trimming(const Eigen::MatrixXd& p_hat,
                                         const std::vector<int>& treatment,
                                         const TrimmingScheme& scheme) {
  const std::size_t n = static_cast<std::size_t>(p_hat.rows());
  const std::size_t D = static_cast<std::size_t>(p_hat.cols());
  if (treatment.size() != n) throw ParameterError("trimming: treatment length mismatch");
  std::vector<std::uint8_t> keep(n, 1);
  if (scheme.kind == TrimmingKind::none) return keep;
  if (!(scheme.alpha > 0.0 && scheme.alpha < 0.5))
    throw ParameterError("trimming: alpha must lie in (0, 0.5)");

  if (scheme.kind == TrimmingKind::crump) {
    for (std::size_t i = 0; i < n; ++i) {
      double mn = p_hat(static_cast<Eigen::Index>(i), 0);
      for (std::size_t d = 1; d < D; ++d)
        mn = std::min(mn, p_hat(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)));
      keep[i] = (mn < scheme.alpha) ? 0 : 1;
    }
  } else {
    // Per-arm alpha-quantile thresholds over own-arm propensities.
    std::vector<double> threshold(D, 0.0);
    for (std::size_t d = 0; d < D; ++d) {
      std::vector<double> own;
      for (std::size_t i = 0; i < n; ++i)
        if (treatment[i] == static_cast<int>(d))
          own.push_back(p_hat(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)));
      if (own.empty()) continue;
      threshold[d] = quantile(own, scheme.alpha);
    }
    for (std::size_t i = 0; i < n; ++i) {
      const auto d = static_cast<std::size_t>(treatment[i]);
      keep[i] = (p_hat(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) <
                 threshold[d])
                    ? 0
                    : 1;
    }
  }

  std::vector<std::size_t> kept_per_arm(D, 0);
  for (std::size_t i = 0; i < n; ++i)
    if (keep[i]) kept_per_arm[static_cast<std::size_t>(treatment[i])]++;
  for (std::size_t d = 0; d < D; ++d)
    if (kept_per_arm[d] == 0)
      throw ValidityError("trimming: scheme " + scheme.name() + " empties arm " +
                          std::to_string(d));
  return keep;
}

std::size_t ScoreMatrix::n_kept() const {
  std::size_t c = 0;
  for (auto k : keep_mask) c += k ? 1 : 0;
  return c;
}

std::vector<std::size_t> ScoreMatrix::kept_indices() const {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < keep_mask.size(); ++i)
    if (keep_mask[i]) idx.push_back(i);
  return idx;
}

ScoreMatrix build_scores(const NuisanceFit& nuisance, const Outcome& outcome,
                         const std::vector<int>& treatment,
                         const std::vector<std::string>& treatment_labels,
                         const ScoreOptions& opt) {
  const std::size_t n = nuisance.n();
  const std::size_t D = nuisance.n_treatments();
  if (outcome.observed.size() != n || treatment.size() != n)
    throw ParameterError("build_scores: input length mismatch");
  if (!opt.keep_mask.empty() && opt.keep_mask.size() != n)
    throw ParameterError("build_scores: keep mask length mismatch");

  ScoreMatrix scores;
  scores.tilting = opt.tilting;
  scores.normalized = opt.normalized;
  scores.outcome_name = outcome.name;
  scores.treatment_labels = treatment_labels;
  scores.keep_mask.assign(n, 1);
  for (std::size_t i = 0; i < n; ++i) {
    if (!outcome.observed[i]) scores.keep_mask[i] = 0;
    if (!opt.keep_mask.empty() && !opt.keep_mask[i]) scores.keep_mask[i] = 0;
  }
  const std::vector<std::size_t> kept = scores.kept_indices();
  const double n_kept = static_cast<double>(kept.size());
  if (kept.empty()) throw ValidityError("build_scores: no kept units");

  // Residual weights 1(D_i=d)/p_d, optionally rescaled to mean one per arm.
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n),
                                            static_cast<Eigen::Index>(D));
  for (auto i : kept) {
    const auto d = static_cast<Eigen::Index>(treatment[i]);
    w(static_cast<Eigen::Index>(i), d) =
        1.0 / nuisance.p_hat(static_cast<Eigen::Index>(i), d);
  }
  if (opt.normalized) {
    for (std::size_t d = 0; d < D; ++d) {
      double total = 0.0;
      for (auto i : kept)
        total += w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d));
      const double mean_w = total / n_kept;
      if (mean_w > 0.0)
        for (auto i : kept)
          w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) /= mean_w;
    }
  }

  // Tilting: h(x)=1 for the ATE family, harmonic-mean weights for the ATO.
  // ATO weights are rescaled by the mean of h over kept units so constant
  // propensities reduce the ATO scores to the ATE scores exactly.
  Eigen::VectorXd h = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(n));
  if (opt.tilting == Tilting::ato) {
    for (std::size_t i = 0; i < n; ++i) {
      double inv_sum = 0.0;
      for (std::size_t d = 0; d < D; ++d)
        inv_sum += 1.0 / nuisance.p_hat(static_cast<Eigen::Index>(i),
                                        static_cast<Eigen::Index>(d));
      h(static_cast<Eigen::Index>(i)) = 1.0 / inv_sum;
    }
    double h_sum = 0.0;
    for (auto i : kept) h_sum += h(static_cast<Eigen::Index>(i));
    h /= (h_sum / n_kept);
  }

  scores.gamma = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n),
                                       static_cast<Eigen::Index>(D));
  for (std::size_t i = 0; i < n; ++i) {
    if (!scores.keep_mask[i]) continue;
    const auto row = static_cast<Eigen::Index>(i);
    const double resid = outcome.values(row) - nuisance.mu_hat(row, treatment[i]);
    for (std::size_t d = 0; d < D; ++d) {
      const auto col = static_cast<Eigen::Index>(d);
      const double correction =
          (treatment[i] == static_cast<int>(d)) ? w(row, col) * resid : 0.0;
      scores.gamma(row, col) = h(row) * (nuisance.mu_hat(row, col) + correction);
    }
  }

  if (opt.with_atet) {
    std::vector<double> share(D, 0.0);
    for (auto i : kept) share[static_cast<std::size_t>(treatment[i])] += 1.0 / n_kept;
    for (std::size_t d = 0; d < D; ++d) {
      if (share[d] <= 0.0) continue;
      for (std::size_t dp = 0; dp < D; ++dp) {
        if (d == dp) continue;
        Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
        for (auto i : kept) {
          const auto row = static_cast<Eigen::Index>(i);
          const double resid_dp =
              outcome.values(row) - nuisance.mu_hat(row, static_cast<Eigen::Index>(dp));
          if (treatment[i] == static_cast<int>(d)) {
            v(row) = resid_dp / share[d];
          } else if (treatment[i] == static_cast<int>(dp)) {
            const double ratio = nuisance.p_hat(row, static_cast<Eigen::Index>(d)) /
                                 nuisance.p_hat(row, static_cast<Eigen::Index>(dp));
            v(row) = -ratio * resid_dp / share[d];
          }
        }
        scores.atet_scores[{static_cast<int>(d), static_cast<int>(dp)}] = std::move(v);
      }
    }
  }
  return scores;
}

std::string Estimand::name(const std::vector<std::string>& labels) const {
  auto lab = [&](int idx) {
    return (idx >= 0 && static_cast<std::size_t>(idx) < labels.size())
               ? labels[static_cast<std::size_t>(idx)]
               : std::to_string(idx);
  };
  switch (kind) {
    case EstimandKind::APO: return "APO[" + lab(d) + "]";
    case EstimandKind::ATE: return "ATE[" + lab(d) + " vs " + lab(d_prime) + "]";
    case EstimandKind::ATET: return "ATET[" + lab(d) + " vs " + lab(d_prime) + "]";
    case EstimandKind::ATO: return "ATO[" + lab(d) + " vs " + lab(d_prime) + "]";
  }
  return "?";
}

std::vector<double> pairwise_scores(const ScoreMatrix& scores, int d, int d_prime) {
  std::vector<double> v;
  for (auto i : scores.kept_indices())
    v.push_back(scores.gamma(static_cast<Eigen::Index>(i), d) -
                scores.gamma(static_cast<Eigen::Index>(i), d_prime));
  return v;
}

EffectEstimate estimate(const ScoreMatrix& scores, const Estimand& estimand) {
  const int D = static_cast<int>(scores.n_treatments());
  auto check_arm = [&](int d) {
    if (d < 0 || d >= D) throw ParameterError("estimate: treatment index out of range");
  };
  check_arm(estimand.d);
  if (estimand.kind != EstimandKind::APO) check_arm(estimand.d_prime);
  if ((estimand.kind == EstimandKind::ATO) != (scores.tilting == Tilting::ato))
    throw ParameterError("estimate: estimand does not match the score tilting");

  std::vector<double> per_unit;
  if (estimand.kind == EstimandKind::APO) {
    for (auto i : scores.kept_indices())
      per_unit.push_back(scores.gamma(static_cast<Eigen::Index>(i), estimand.d));
  } else if (estimand.kind == EstimandKind::ATET) {
    auto it = scores.atet_scores.find({estimand.d, estimand.d_prime});
    if (it == scores.atet_scores.end())
      throw ParameterError("estimate: ATET scores not built for this pair");
    for (auto i : scores.kept_indices())
      per_unit.push_back(it->second(static_cast<Eigen::Index>(i)));
  } else {
    per_unit = pairwise_scores(scores, estimand.d, estimand.d_prime);
  }
  if (per_unit.size() < 2) throw ValidityError("estimate: fewer than 2 kept units");

  const TTest t = one_sample_t(per_unit);
  EffectEstimate est;
  est.estimand = estimand;
  est.point = t.mean;
  est.se = t.se;
  est.ci_lo = t.mean - 1.96 * t.se;
  est.ci_hi = t.mean + 1.96 * t.se;
  est.n_used = per_unit.size();
  est.outcome_name = scores.outcome_name;
  est.degenerate_se = t.degenerate;
  return est;
}

}  // namespace mtdml

#include "mtdml/heterogeneity.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "mtdml/errors.hpp"
#include "mtdml/stats.hpp"

namespace mtdml {

GateResult gate(const std::vector<double>& ate_scores, const std::vector<std::string>& groups,
                const std::string& group_var) {
  const std::size_t n = ate_scores.size();
  if (groups.size() != n) throw ParameterError("gate: group vector length mismatch");
  if (n < 2) throw ParameterError("gate: need at least 2 units");

  std::map<std::string, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < n; ++i) members[groups[i]].push_back(i);
  for (const auto& [label, idx] : members)
    if (idx.size() < 2)
      throw ParameterError("gate: level '" + label + "' has fewer than 2 units");

  GateResult result;
  result.group_var = group_var;
  result.single_level = members.size() == 1;

  const std::size_t k = members.size();
  const double hc1 = (n > k) ? static_cast<double>(n) / static_cast<double>(n - k) : 1.0;

  double weighted = 0.0;
  for (const auto& [label, idx] : members) {
    GateResult::Level level;
    level.label = label;
    level.n = idx.size();
    double sum = 0.0;
    for (auto i : idx) sum += ate_scores[i];
    level.estimate = sum / static_cast<double>(idx.size());
    double sse = 0.0;
    for (auto i : idx) {
      const double e = ate_scores[i] - level.estimate;
      sse += e * e;
    }
    // Saturated dummy design: HC1 variance of a level mean.
    const double var = hc1 * sse / (static_cast<double>(idx.size()) *
                                    static_cast<double>(idx.size()));
    level.se = std::sqrt(var);
    level.ci_lo = level.estimate - 1.96 * level.se;
    level.ci_hi = level.estimate + 1.96 * level.se;
    weighted += level.estimate * static_cast<double>(level.n);
    result.levels.push_back(std::move(level));
  }
  result.overall_ate = weighted / static_cast<double>(n);

  for (std::size_t a = 0; a < result.levels.size(); ++a) {
    for (std::size_t b = a + 1; b < result.levels.size(); ++b) {
      GateResult::Diff diff;
      diff.level_a = result.levels[a].label;
      diff.level_b = result.levels[b].label;
      diff.diff = result.levels[a].estimate - result.levels[b].estimate;
      diff.se = std::sqrt(result.levels[a].se * result.levels[a].se +
                          result.levels[b].se * result.levels[b].se);
      diff.p_value = diff.se > 0.0 ? two_sided_p(diff.diff / diff.se) : 1.0;
      result.diff_tests.push_back(std::move(diff));
    }
  }
  return result;
}

namespace {

double nw_estimate(const std::vector<double>& scores, const std::vector<double>& z,
                   double point, double h, double* mass_out, double* var_out) {
  double mass = 0.0, num = 0.0;
  const std::size_t n = scores.size();
  std::vector<double> kernel(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = (z[i] - point) / h;
    kernel[i] = std::exp(-0.5 * u * u);
    mass += kernel[i];
    num += kernel[i] * scores[i];
  }
  if (mass_out) *mass_out = mass;
  if (mass <= 1e-300) {
    if (var_out) *var_out = 0.0;
    return 0.0;
  }
  const double m = num / mass;
  if (var_out) {
    double v = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double e = scores[i] - m;
      v += kernel[i] * kernel[i] * e * e;
    }
    *var_out = v / (mass * mass);
  }
  return m;
}

double loo_cv_sse(const std::vector<double>& scores, const std::vector<double>& z, double h) {
  const std::size_t n = scores.size();
  double sse = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double mass = 0.0, num = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double u = (z[j] - z[i]) / h;
      const double k = std::exp(-0.5 * u * u);
      mass += k;
      num += k * scores[j];
    }
    if (mass <= 1e-300) {
      sse += scores[i] * scores[i];
      continue;
    }
    const double e = scores[i] - num / mass;
    sse += e * e;
  }
  return sse;
}

}  // namespace

CateCurve kernel_cate(const std::vector<double>& ate_scores, const std::vector<double>& z,
                      int grid_size, double fixed_bandwidth) {
  const std::size_t n = ate_scores.size();
  if (z.size() != n) throw ParameterError("kernel_cate: moderator length mismatch");
  if (n < 2) throw ParameterError("kernel_cate: need at least 2 units");
  if (grid_size < 2) throw ParameterError("kernel_cate: grid too small");

  CateCurve curve;
  curve.ate = mean(ate_scores);

  const std::set<double> distinct(z.begin(), z.end());
  const double z_min = *distinct.begin();
  const double z_max = *distinct.rbegin();

  if (distinct.size() < 10) {
    // Degenerate moderator: no smoothing problem to solve, curve is flat at
    // the ATE over a trivial grid.
    curve.bandwidth = 1.0;
    curve.grid.assign(static_cast<std::size_t>(grid_size), z_min);
    curve.values.assign(static_cast<std::size_t>(grid_size), curve.ate);
    const double band = sd(ate_scores) / std::sqrt(static_cast<double>(n));
    for (int g = 0; g < grid_size; ++g) {
      curve.ci_lo.push_back(curve.ate - 1.96 * band);
      curve.ci_hi.push_back(curve.ate + 1.96 * band);
      curve.gap.push_back(0);
    }
    return curve;
  }

  if (fixed_bandwidth > 0.0) {
    curve.bandwidth = fixed_bandwidth;
  } else {
    const double z_sd = sd(z);
    const double n_scale = std::pow(static_cast<double>(n), -0.2);
    const double h_lo = 0.1 * z_sd * n_scale;
    const double h_hi = 2.0 * z_sd;
    double best_h = h_lo, best_sse = std::numeric_limits<double>::infinity();
    for (int g = 0; g < 20; ++g) {
      const double h = std::exp(std::log(h_lo) + (std::log(h_hi) - std::log(h_lo)) *
                                                     static_cast<double>(g) / 19.0);
      const double sse = loo_cv_sse(ate_scores, z, h);
      if (sse < best_sse) {
        best_sse = sse;
        best_h = h;
      }
    }
    curve.bandwidth = 0.9 * best_h;
  }

  for (int g = 0; g < grid_size; ++g) {
    const double point = z_min + (z_max - z_min) * static_cast<double>(g) /
                                     static_cast<double>(grid_size - 1);
    double kernel_mass = 0.0, var = 0.0;
    const double value = nw_estimate(ate_scores, z, point, curve.bandwidth, &kernel_mass, &var);
    curve.grid.push_back(point);
    curve.gap.push_back(kernel_mass <= 1e-10 ? 1 : 0);
    curve.values.push_back(value);
    const double band = 1.96 * std::sqrt(var);
    curve.ci_lo.push_back(value - band);
    curve.ci_hi.push_back(value + band);
  }
  return curve;
}

IateResult iate_dr_learner(const FeatureBlocks& blocks, const Eigen::VectorXd& pair_scores,
                           const std::vector<std::uint8_t>& keep_mask,
                           const FoldAssignment& folds, const std::vector<LearnerSpec>& specs,
                           const IateOptions& opt) {
  const std::size_t n = static_cast<std::size_t>(pair_scores.size());
  if (folds.fold_of.size() != n) throw ParameterError("iate: fold assignment length mismatch");
  if (!keep_mask.empty() && keep_mask.size() != n)
    throw ParameterError("iate: keep mask length mismatch");

  IateResult result;
  result.values = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));

  for (int k = 0; k < folds.K; ++k) {
    std::vector<std::size_t> train;
    for (auto i : folds.complement_indices(k))
      if (keep_mask.empty() || keep_mask[i]) train.push_back(i);
    const std::vector<std::size_t> held = folds.fold_indices(k);
    if (train.size() < 2)
      throw ValidityError("iate: fewer than 2 training units in fold " + std::to_string(k));

    FeatureBlocks train_blocks, held_blocks;
    for (const auto& [id, X] : blocks) {
      Eigen::MatrixXd tr(static_cast<Eigen::Index>(train.size()), X.cols());
      for (std::size_t i = 0; i < train.size(); ++i)
        tr.row(static_cast<Eigen::Index>(i)) = X.row(static_cast<Eigen::Index>(train[i]));
      train_blocks.emplace(id, std::move(tr));
      Eigen::MatrixXd he(static_cast<Eigen::Index>(held.size()), X.cols());
      for (std::size_t i = 0; i < held.size(); ++i)
        he.row(static_cast<Eigen::Index>(i)) = X.row(static_cast<Eigen::Index>(held[i]));
      held_blocks.emplace(id, std::move(he));
    }
    Eigen::VectorXd y(static_cast<Eigen::Index>(train.size()));
    for (std::size_t i = 0; i < train.size(); ++i)
      y(static_cast<Eigen::Index>(i)) = pair_scores(static_cast<Eigen::Index>(train[i]));

    EnsembleOptions eo;
    eo.task = Task::regression;
    eo.inner_folds = opt.inner_folds;
    eo.seed = Rng::derive_stream(opt.seed, 0x1a7e + static_cast<std::uint64_t>(k));
    eo.threads = opt.threads;
    EnsembleFit ef = fit_ensemble(train_blocks, y, specs, eo);
    const Eigen::VectorXd pred = ef.ensemble.predict(held_blocks);
    for (std::size_t i = 0; i < held.size(); ++i)
      result.values(static_cast<Eigen::Index>(held[i])) = pred(static_cast<Eigen::Index>(i));
    // Collapse per-fold reports to the propensity-style summary.
    result.fold_reports.push_back(std::move(ef.report));
  }
  return result;
}

QuintileProfile classify_quintiles(const Eigen::VectorXd& iate, const Eigen::MatrixXd& X,
                                   const std::vector<std::string>& covariate_names) {
  const std::size_t n = static_cast<std::size_t>(iate.size());
  if (n < 5) throw ParameterError("classify_quintiles: need at least 5 units");
  if (static_cast<std::size_t>(X.rows()) != n)
    throw ParameterError("classify_quintiles: covariate row mismatch");
  if (covariate_names.size() != static_cast<std::size_t>(X.cols()))
    throw ParameterError("classify_quintiles: covariate name mismatch");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double va = iate(static_cast<Eigen::Index>(a));
    const double vb = iate(static_cast<Eigen::Index>(b));
    if (va != vb) return va < vb;
    return a < b;  // rank ties by unit index
  });

  QuintileProfile profile;
  profile.quintile_of.assign(n, 0);
  for (std::size_t rank = 0; rank < n; ++rank)
    profile.quintile_of[order[rank]] = static_cast<int>(rank * 5 / n) + 1;

  std::vector<std::size_t> q1, q5;
  for (std::size_t i = 0; i < n; ++i) {
    if (profile.quintile_of[i] == 1) q1.push_back(i);
    if (profile.quintile_of[i] == 5) q5.push_back(i);
  }

  auto moments = [&](const std::vector<std::size_t>& idx, Eigen::Index j) {
    double m = 0.0;
    for (auto i : idx) m += X(static_cast<Eigen::Index>(i), j);
    m /= static_cast<double>(idx.size());
    double v = 0.0;
    for (auto i : idx) {
      const double e = X(static_cast<Eigen::Index>(i), j) - m;
      v += e * e;
    }
    v = idx.size() > 1 ? v / static_cast<double>(idx.size() - 1) : 0.0;
    return std::pair<double, double>(m, v);
  };

  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    QuintileProfile::Smd smd;
    smd.covariate = covariate_names[static_cast<std::size_t>(j)];
    const auto [m1, v1] = moments(q1, j);
    const auto [m5, v5] = moments(q5, j);
    const double pooled = 0.5 * (v1 + v5);
    if (pooled <= 0.0) {
      smd.value = 0.0;
      smd.zero_variance = true;
    } else {
      smd.value = (m5 - m1) / std::sqrt(pooled);
    }
    smd.flagged = std::fabs(smd.value) > 0.2;
    profile.smd.push_back(std::move(smd));
  }
  return profile;
}

}  // namespace mtdml

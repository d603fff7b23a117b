#include <algorithm>
#include <cmath>
#include <numeric>

#include "mtdml/errors.hpp"
#include "mtdml/learners.hpp"

namespace mtdml {

Eigen::VectorXd LinearModel::predict(const Eigen::MatrixXd& X) const {
  if (X.cols() != coef.size())
    throw ParameterError("linear model: feature count mismatch");
  return (X * coef).array() + intercept;
}

nlohmann::json LinearModel::to_json() const {
  nlohmann::json j;
  j["type"] = "linear";
  j["intercept"] = intercept;
  j["coef"] = std::vector<double>(coef.data(), coef.data() + coef.size());
  return j;
}

namespace {

struct Standardized {
  Eigen::MatrixXd Xs;           // kept columns, mean 0 / sd 1
  std::vector<int> kept;        // original column indices
  Eigen::VectorXd col_mean;     // per original column
  Eigen::VectorXd col_scale;    // per original column (population sd)
  double y_mean = 0.0;
};

Standardized standardize(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  const Eigen::Index n = X.rows(), p = X.cols();
  Standardized s;
  s.col_mean.resize(p);
  s.col_scale.resize(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    const double m = X.col(j).mean();
    const double var = (X.col(j).array() - m).square().sum() / static_cast<double>(n);
    s.col_mean(j) = m;
    s.col_scale(j) = std::sqrt(var);
    if (s.col_scale(j) > 1e-12) s.kept.push_back(static_cast<int>(j));
  }
  s.Xs.resize(n, static_cast<Eigen::Index>(s.kept.size()));
  for (std::size_t k = 0; k < s.kept.size(); ++k) {
    const Eigen::Index j = s.kept[k];
    s.Xs.col(static_cast<Eigen::Index>(k)) =
        (X.col(j).array() - s.col_mean(j)) / s.col_scale(j);
  }
  s.y_mean = y.mean();
  return s;
}

double soft_threshold(double z, double g) {
  if (z > g) return z - g;
  if (z < -g) return z + g;
  return 0.0;
}

// Penalized objective (1/2n)||yc - Xs b||^2 + lambda (mixing |b|_1 + (1-mixing)/2 |b|_2^2)
double objective(const Eigen::MatrixXd& Xs, const Eigen::VectorXd& yc,
                 const Eigen::VectorXd& beta, double lambda, double mixing) {
  const double n = static_cast<double>(Xs.rows());
  const double rss = (yc - Xs * beta).squaredNorm() / (2.0 * n);
  const double l1 = beta.lpNorm<1>();
  const double l2 = beta.squaredNorm();
  return rss + lambda * (mixing * l1 + 0.5 * (1.0 - mixing) * l2);
}

// Cyclic coordinate descent at one lambda, warm-started from beta.
void cd_solve(const Eigen::MatrixXd& Xs, const Eigen::VectorXd& yc, double lambda,
              double mixing, double tol, int max_sweeps, Eigen::VectorXd& beta,
              Eigen::VectorXd& resid, std::vector<double>* trace) {
  const Eigen::Index n = Xs.rows(), p = Xs.cols();
  const double inv_n = 1.0 / static_cast<double>(n);
  const double denom = 1.0 + lambda * (1.0 - mixing);
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double max_delta = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      const double old = beta(j);
      // rho_j = (1/n) x_j' (resid + x_j * old); columns have unit variance.
      const double rho = inv_n * Xs.col(j).dot(resid) + old;
      const double updated = soft_threshold(rho, lambda * mixing) / denom;
      if (updated != old) {
        resid.noalias() -= (updated - old) * Xs.col(j);
        beta(j) = updated;
        max_delta = std::max(max_delta, std::fabs(updated - old));
      }
    }
    if (trace) trace->push_back(objective(Xs, yc, beta, lambda, mixing));
    if (max_delta < tol) break;
  }
}

std::vector<double> make_lambda_grid(const Eigen::MatrixXd& Xs, const Eigen::VectorXd& yc,
                                     const ElasticNetOptions& opt) {
  const double n = static_cast<double>(Xs.rows());
  double max_corr = 0.0;
  for (Eigen::Index j = 0; j < Xs.cols(); ++j)
    max_corr = std::max(max_corr, std::fabs(Xs.col(j).dot(yc)) / n);
  const double alpha_floor = std::max(opt.mixing, 1e-3);
  double lambda_max = max_corr / alpha_floor;
  if (lambda_max <= 0.0) lambda_max = 1.0;
  std::vector<double> grid(static_cast<std::size_t>(opt.n_lambda));
  if (opt.n_lambda == 1) {
    grid[0] = lambda_max;
    return grid;
  }
  const double log_max = std::log(lambda_max);
  const double log_min = std::log(lambda_max * opt.lambda_min_ratio);
  for (int i = 0; i < opt.n_lambda; ++i)
    grid[static_cast<std::size_t>(i)] =
        std::exp(log_max + (log_min - log_max) * static_cast<double>(i) /
                               static_cast<double>(opt.n_lambda - 1));
  return grid;
}

// Full path fit with warm starts; returns beta at each lambda.
std::vector<Eigen::VectorXd> fit_path(const Eigen::MatrixXd& Xs, const Eigen::VectorXd& yc,
                                      const std::vector<double>& grid,
                                      const ElasticNetOptions& opt,
                                      std::vector<double>* trace_last) {
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(Xs.cols());
  Eigen::VectorXd resid = yc;
  std::vector<Eigen::VectorXd> path;
  path.reserve(grid.size());
  for (std::size_t g = 0; g < grid.size(); ++g) {
    std::vector<double>* trace = (g + 1 == grid.size()) ? trace_last : nullptr;
    cd_solve(Xs, yc, grid[g], opt.mixing, opt.tol, opt.max_sweeps, beta, resid, trace);
    path.push_back(beta);
  }
  return path;
}

}  // namespace

ElasticNetFit fit_elastic_net(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                              const ElasticNetOptions& opt) {
  const Eigen::Index n = X.rows();
  if (n < 2) throw ParameterError("elastic net: need at least 2 rows");
  if (y.size() != n) throw ParameterError("elastic net: y length mismatch");
  if (opt.mixing < 0.0 || opt.mixing > 1.0)
    throw ParameterError("elastic net: mixing outside [0,1]");

  const Standardized s = standardize(X, y);
  ElasticNetFit fit;

  auto linear = std::make_shared<LinearModel>();
  linear->coef = Eigen::VectorXd::Zero(X.cols());

  if (s.kept.empty()) {
    // All columns constant: intercept-only model.
    linear->intercept = s.y_mean;
    fit.intercept_only = true;
    fit.model = FittedModel{LearnerSpec{}, Task::regression, linear, true};
    return fit;
  }

  const Eigen::VectorXd yc = y.array() - s.y_mean;
  std::vector<double> grid = opt.lambda_grid;
  if (grid.empty()) grid = make_lambda_grid(s.Xs, yc, opt);
  std::sort(grid.rbegin(), grid.rend());  // descending for warm starts

  std::size_t chosen = 0;
  double chosen_mse = 0.0;
  if (grid.size() > 1) {
    const int folds = std::min<long>(opt.cv_folds, n);
    if (folds < 2) throw ParameterError("elastic net: cv_folds must be >= 2");
    std::vector<std::size_t> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(Rng::derive_stream(opt.seed, 0xe1a57));
    rng.shuffle(perm);

    std::vector<double> cv_sse(grid.size(), 0.0);
    for (int f = 0; f < folds; ++f) {
      std::vector<std::size_t> tr, va;
      for (std::size_t i = 0; i < perm.size(); ++i)
        (static_cast<int>(i % static_cast<std::size_t>(folds)) == f ? va : tr).push_back(perm[i]);
      Eigen::MatrixXd Xtr(static_cast<Eigen::Index>(tr.size()), s.Xs.cols());
      Eigen::VectorXd ytr(static_cast<Eigen::Index>(tr.size()));
      for (std::size_t i = 0; i < tr.size(); ++i) {
        Xtr.row(static_cast<Eigen::Index>(i)) = s.Xs.row(static_cast<Eigen::Index>(tr[i]));
        ytr(static_cast<Eigen::Index>(i)) = yc(static_cast<Eigen::Index>(tr[i]));
      }
      // Re-center the training split so the intercept is honest per fold.
      const double ytr_mean = ytr.mean();
      ytr.array() -= ytr_mean;
      const auto path = fit_path(Xtr, ytr, grid, opt, nullptr);
      for (std::size_t g = 0; g < grid.size(); ++g) {
        for (std::size_t i = 0; i < va.size(); ++i) {
          const Eigen::Index row = static_cast<Eigen::Index>(va[i]);
          const double pred = s.Xs.row(row).dot(path[g]) + ytr_mean;
          const double err = yc(row) - pred;
          cv_sse[g] += err * err;
        }
      }
    }
    chosen = 0;
    for (std::size_t g = 1; g < grid.size(); ++g)
      if (cv_sse[g] < cv_sse[chosen]) chosen = g;  // ties keep the larger lambda
    chosen_mse = cv_sse[chosen] / static_cast<double>(n);
  }

  // Final fit on the full sample, path down to the chosen lambda.
  std::vector<double> head(grid.begin(), grid.begin() + static_cast<long>(chosen) + 1);
  const auto path = fit_path(s.Xs, yc, head, opt, opt.objective_trace);
  const Eigen::VectorXd& beta_std = path.back();

  linear->intercept = s.y_mean;
  for (std::size_t k = 0; k < s.kept.size(); ++k) {
    const Eigen::Index j = s.kept[k];
    const double slope = beta_std(static_cast<Eigen::Index>(k)) / s.col_scale(j);
    linear->coef(j) = slope;
    linear->intercept -= slope * s.col_mean(j);
  }

  fit.lambda = head.back();
  fit.cv_mse = chosen_mse;
  fit.model = FittedModel{LearnerSpec{}, Task::regression, linear, false};
  return fit;
}

}  // namespace mtdml

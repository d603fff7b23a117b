#include "mtdml/iv.hpp"

#include <cmath>
#include <map>
#include <set>

#include "mtdml/errors.hpp"
#include "mtdml/stats.hpp"

namespace mtdml {

DeviationInstrument build_deviation_instrument(const std::vector<int>& treated,
                                               const std::vector<int>& school,
                                               const std::vector<int>& year,
                                               const std::optional<Eigen::MatrixXd>& covariates,
                                               const DeviationOptions& opt) {
  const std::size_t n = treated.size();
  if (school.size() != n || year.size() != n)
    throw ParameterError("deviation: school/year length mismatch");
  if (n < 2) throw ParameterError("deviation: need at least 2 units");

  std::map<int, std::set<int>> schools_per_year;
  for (std::size_t i = 0; i < n; ++i) schools_per_year[year[i]].insert(school[i]);
  for (const auto& [y, schools] : schools_per_year)
    if (schools.size() < 2)
      throw ValidityError("deviation: year " + std::to_string(y) +
                          " has fewer than 2 schools");

  struct CellStat {
    double sum = 0.0;
    double count = 0.0;
  };
  std::map<std::pair<int, int>, CellStat> cells;
  std::map<int, CellStat> years;
  for (std::size_t i = 0; i < n; ++i) {
    auto& cell = cells[{school[i], year[i]}];
    cell.sum += treated[i];
    cell.count += 1.0;
    auto& yr = years[year[i]];
    yr.sum += treated[i];
    yr.count += 1.0;
  }

  std::map<int, double> year_rate;
  if (opt.school_level_year_mean) {
    std::map<int, std::pair<double, double>> acc;  // year -> (sum of rates, cells)
    for (const auto& [key, cell] : cells) {
      acc[key.second].first += cell.sum / cell.count;
      acc[key.second].second += 1.0;
    }
    for (const auto& [y, a] : acc) year_rate[y] = a.first / a.second;
  } else {
    for (const auto& [y, stat] : years) year_rate[y] = stat.sum / stat.count;
  }

  DeviationInstrument instrument;
  instrument.raw.resize(static_cast<Eigen::Index>(n));
  instrument.group_ids.resize(n);
  instrument.singleton_cell.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& cell = cells.at({school[i], year[i]});
    double cell_rate;
    if (opt.leave_one_out && cell.count > 1.0) {
      cell_rate = (cell.sum - treated[i]) / (cell.count - 1.0);
    } else {
      cell_rate = cell.sum / cell.count;
      if (opt.leave_one_out) instrument.singleton_cell[i] = 1;
    }
    if (cell.count <= 1.0) instrument.singleton_cell[i] = 1;
    instrument.raw(static_cast<Eigen::Index>(i)) = cell_rate - year_rate.at(year[i]);
    instrument.group_ids[i] = {school[i], year[i]};
  }

  // Adjusted deviation: residual after projecting on covariates (intercept
  // always included).
  Eigen::MatrixXd W;
  if (covariates) {
    if (static_cast<std::size_t>(covariates->rows()) != n)
      throw ParameterError("deviation: covariate row mismatch");
    W.resize(static_cast<Eigen::Index>(n), covariates->cols() + 1);
    W.col(0).setOnes();
    W.rightCols(covariates->cols()) = *covariates;
  } else {
    W = Eigen::MatrixXd::Ones(static_cast<Eigen::Index>(n), 1);
  }
  const OlsFit fit = ols_hc1(W, instrument.raw);
  instrument.adjusted = fit.residuals;
  return instrument;
}

TwoSlsResult two_sls(const Eigen::VectorXd& y, const Eigen::VectorXd& treated,
                     const Eigen::VectorXd& instrument,
                     const std::optional<Eigen::MatrixXd>& covariates,
                     const std::optional<std::vector<int>>& cluster) {
  const Eigen::Index n = y.size();
  if (treated.size() != n || instrument.size() != n)
    throw ParameterError("2sls: input length mismatch");
  const double z_var = (instrument.array() - instrument.mean()).square().sum();
  if (z_var <= 0.0) throw ParameterError("2sls: instrument has zero variance");

  Eigen::Index n_cov = 0;
  if (covariates) {
    if (covariates->rows() != n) throw ParameterError("2sls: covariate row mismatch");
    n_cov = covariates->cols();
  }
  const Eigen::Index k = n_cov + 2;  // intercept + covariates + treatment
  if (n <= k) throw ParameterError("2sls: too few observations");

  // Regressors X = [1, covariates, D]; instruments Zm = [1, covariates, Z].
  Eigen::MatrixXd X(n, k), Zm(n, k);
  X.col(0).setOnes();
  Zm.col(0).setOnes();
  if (n_cov > 0) {
    X.middleCols(1, n_cov) = *covariates;
    Zm.middleCols(1, n_cov) = *covariates;
  }
  X.col(k - 1) = treated;
  Zm.col(k - 1) = instrument;

  const Eigen::MatrixXd ZtX = Zm.transpose() * X;
  const Eigen::VectorXd Zty = Zm.transpose() * y;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(ZtX);
  if (qr.rank() < k) throw ValidityError("2sls: rank-deficient instrument matrix");
  const Eigen::VectorXd beta = qr.solve(Zty);

  const Eigen::VectorXd resid = y - X * beta;
  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(k, k);
  double small_sample = static_cast<double>(n) / static_cast<double>(n - k);
  if (cluster) {
    if (cluster->size() != static_cast<std::size_t>(n))
      throw ParameterError("2sls: cluster id length mismatch");
    std::map<int, Eigen::VectorXd> cluster_sum;
    for (Eigen::Index i = 0; i < n; ++i) {
      auto [it, inserted] =
          cluster_sum.try_emplace((*cluster)[static_cast<std::size_t>(i)],
                                  Eigen::VectorXd::Zero(k));
      it->second += resid(i) * Zm.row(i).transpose();
    }
    for (const auto& [id, sum] : cluster_sum) meat.noalias() += sum * sum.transpose();
    const double G = static_cast<double>(cluster_sum.size());
    if (G < 2.0) throw ParameterError("2sls: need at least 2 clusters");
    // CR1 small-sample scaling.
    small_sample = (G / (G - 1.0)) * (static_cast<double>(n - 1) /
                                      static_cast<double>(n - k));
  } else {
    for (Eigen::Index i = 0; i < n; ++i)
      meat.noalias() += resid(i) * resid(i) * Zm.row(i).transpose() * Zm.row(i);
  }
  const Eigen::MatrixXd ZtX_inv = qr.inverse();
  const Eigen::MatrixXd cov = small_sample * ZtX_inv * meat * ZtX_inv.transpose();

  TwoSlsResult result;
  result.n = static_cast<std::size_t>(n);
  result.estimate = beta(k - 1);
  result.se = std::sqrt(std::max(0.0, cov(k - 1, k - 1)));
  result.ci_lo = result.estimate - 1.96 * result.se;
  result.ci_hi = result.estimate + 1.96 * result.se;

  // First stage D ~ [1, covariates, Z] and reduced form y ~ same.
  const OlsFit first = ols_hc1(Zm, treated);
  result.first_stage_coef = first.coef(k - 1);
  result.first_stage_se = first.se_hc1(k - 1);
  if (result.first_stage_se > 0.0) {
    const double t = result.first_stage_coef / result.first_stage_se;
    result.first_stage_f = t * t;
  }
  const OlsFit reduced = ols_hc1(Zm, y);
  result.reduced_form_coef = reduced.coef(k - 1);
  result.weak_instrument = result.first_stage_f < 10.0;
  return result;
}

}  // namespace mtdml

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace mtdml {

struct DeviationInstrument {
  Eigen::VectorXd raw;       // cell assignment rate minus year assignment rate
  Eigen::VectorXd adjusted;  // OLS residual of raw on covariates
  std::vector<std::pair<int, int>> group_ids;  // (school, year) per unit
  std::vector<std::uint8_t> singleton_cell;    // school-year cells of size 1
};

struct DeviationOptions {
  // Leave-one-out: the unit's own treatment is removed from its cell rate.
  bool leave_one_out = false;
  // Year mean over distinct school rates instead of over units; the raw
  // deviations then lose their exact within-year zero mean.
  bool school_level_year_mean = false;
};

DeviationInstrument build_deviation_instrument(const std::vector<int>& treated,
                                               const std::vector<int>& school,
                                               const std::vector<int>& year,
                                               const std::optional<Eigen::MatrixXd>& covariates,
                                               const DeviationOptions& opt = {});

struct TwoSlsResult {
  double estimate = 0.0;
  double se = 0.0;  // HC1
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  double first_stage_coef = 0.0;
  double first_stage_se = 0.0;
  double first_stage_f = 0.0;
  double reduced_form_coef = 0.0;
  bool weak_instrument = false;  // first-stage F below 10
  std::size_t n = 0;
};

// Exactly-identified 2SLS of y on a binary treatment with one instrument and
// optional exogenous covariates; HC1 sandwich inference, or CR1
// cluster-robust when cluster ids (e.g. schools) are supplied.
TwoSlsResult two_sls(const Eigen::VectorXd& y, const Eigen::VectorXd& treated,
                     const Eigen::VectorXd& instrument,
                     const std::optional<Eigen::MatrixXd>& covariates,
                     const std::optional<std::vector<int>>& cluster = std::nullopt);

}  // namespace mtdml

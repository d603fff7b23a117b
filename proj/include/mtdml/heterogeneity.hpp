#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "mtdml/data.hpp"
#include "mtdml/learners.hpp"

namespace mtdml {

struct GateResult {
  std::string group_var;
  struct Level {
    std::string label;
    double estimate = 0.0;
    double se = 0.0;  // HC1
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    std::size_t n = 0;
  };
  std::vector<Level> levels;
  struct Diff {
    std::string level_a;
    std::string level_b;
    double diff = 0.0;
    double se = 0.0;
    double p_value = 1.0;
  };
  std::vector<Diff> diff_tests;  // all level pairs
  double overall_ate = 0.0;      // n-weighted mean of level estimates
  bool single_level = false;
};

// Saturated score-on-dummies regression (per-level means) with HC1 robust
// standard errors and pairwise level-difference tests.
GateResult gate(const std::vector<double>& ate_scores, const std::vector<std::string>& groups,
                const std::string& group_var = "group");

struct CateCurve {
  std::vector<double> grid;
  std::vector<double> values;
  std::vector<double> ci_lo;
  std::vector<double> ci_hi;
  std::vector<std::uint8_t> gap;  // grid point with no kernel mass
  double bandwidth = 0.0;
  double ate = 0.0;
};

// Nadaraya-Watson with a Gaussian kernel; bandwidth is 0.9 times the
// leave-one-out-CV optimum over a 20-point log-spaced grid, unless a fixed
// bandwidth is forced.
CateCurve kernel_cate(const std::vector<double>& ate_scores, const std::vector<double>& z,
                      int grid_size = 50, double fixed_bandwidth = 0.0);

struct IateResult {
  Eigen::VectorXd values;  // out-of-fold predictions, length n
  std::vector<EnsembleWeights> fold_reports;
};

struct IateOptions {
  int inner_folds = 3;
  std::uint64_t seed = 1;
  int threads = 1;
};

// DR-learner: out-of-fold ensemble regression of the per-unit pair score on
// covariates, reusing the cross-fitting folds that produced the scores.
IateResult iate_dr_learner(const FeatureBlocks& blocks, const Eigen::VectorXd& pair_scores,
                           const std::vector<std::uint8_t>& keep_mask,
                           const FoldAssignment& folds, const std::vector<LearnerSpec>& specs,
                           const IateOptions& opt);

struct QuintileProfile {
  std::vector<int> quintile_of;  // 1..5 by IATE rank (ties by unit index)
  struct Smd {
    std::string covariate;
    double value = 0.0;
    bool flagged = false;        // |smd| > 0.2
    bool zero_variance = false;
  };
  std::vector<Smd> smd;  // Q5 vs Q1 per covariate
};

QuintileProfile classify_quintiles(const Eigen::VectorXd& iate, const Eigen::MatrixXd& X,
                                   const std::vector<std::string>& covariate_names);

}  // namespace mtdml

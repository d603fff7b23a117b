#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mtdml/data.hpp"
#include "mtdml/dml.hpp"

namespace mtdml {

struct PolicyTree {
  struct Node {
    int feature = -1;        // -1 marks a leaf
    double threshold = 0.0;  // go left when z <= threshold
    int left = -1;
    int right = -1;
    int leaf_treatment = -1;
  };
  int depth = 0;
  std::vector<Node> nodes;  // node 0 is the root
  std::vector<std::string> feature_names;
  std::vector<std::string> treatment_labels;

  int assign_row(const Eigen::MatrixXd& Z, Eigen::Index row) const;
  std::vector<int> assign(const Eigen::MatrixXd& Z) const;
  std::vector<std::string> split_features() const;
  nlohmann::json to_json() const;
  static PolicyTree from_json(const nlohmann::json& j);
};

struct PolicyEvaluation {
  double value = 0.0;                      // mean assigned DR score
  std::vector<double> share_per_treatment; // sums to 1 over kept units
  double total_cost = 0.0;                 // 0 when no costs configured
  double cost_ratio_vs_actual = 0.0;       // 0 when costs or actuals missing
  std::size_t n = 0;
};

// Value of an assignment under the score matrix; costs and the observed
// assignment are optional and only drive the cost accounting.
PolicyEvaluation policy_value(const std::vector<int>& assignment, const ScoreMatrix& scores,
                              const TreatmentCatalogue* costs = nullptr,
                              const std::vector<int>* observed = nullptr);

struct PolicyTreeOptions {
  int depth = 2;
  std::vector<int> treatments;  // candidate arms; empty -> all score columns
  std::uint64_t eval_cap = 1000000000ULL;
  int threads = 1;
};

// Exact exhaustive search over axis-aligned trees: every feature, every
// midpoint threshold, every leaf label. Ties resolve toward plain leaves,
// earlier feature columns, then smaller thresholds. Depth-1 subproblems run
// as sorted prefix-sum scans, so the work grows roughly as
// (p*m)^(depth-1) * p*(n log n + n*T) for p features with m thresholds each;
// eval_cap aborts runs that would exceed the configured budget.
PolicyTree fit_policy_tree(const Eigen::MatrixXd& Z, const std::vector<std::string>& z_names,
                           const ScoreMatrix& scores, const PolicyTreeOptions& opt);

struct PolicyValidation {
  struct BaselineTest {
    std::string baseline;  // "all_<label>" or "observed"
    double mean_diff = 0.0;
    double se = 0.0;
    double t_stat = 0.0;
    double p_value = 1.0;
    std::size_t n = 0;
    bool degenerate = false;
  };
  std::vector<BaselineTest> tests;
  double out_of_fold_value = 0.0;
  std::vector<int> out_of_fold_assignment;  // -1 for units outside the mask
};

struct PolicyValidationOptions {
  PolicyTreeOptions tree;
  int folds = 10;
  std::uint64_t seed = 1;
  std::vector<std::string> baselines;  // labels for all-d baselines; "observed" allowed
};

// 10-fold honest evaluation: the tree is fit on the training folds and
// assigns the left-out fold; per-unit differences against each baseline get a
// one-sample t-test.
PolicyValidation validate_policy(const Eigen::MatrixXd& Z, const std::vector<std::string>& z_names,
                                 const ScoreMatrix& scores, const std::vector<int>& observed,
                                 const PolicyValidationOptions& opt);

// Piecewise-linear spillover profile: SEN share -> expected outcome.
struct PiecewiseLinear {
  std::vector<std::pair<double, double>> points;  // sorted by x

  double operator()(double x) const;  // clamps outside the knot range
  bool non_increasing() const;
};

struct ReallocationInputs {
  double n_mainstream = 0.0;
  double n_reallocated = 0.0;
  double n_classrooms = 0.0;
  double avg_class_size = 0.0;
  double sen_share_before = 0.0;
  PiecewiseLinear spillover_sen;
  PiecewiseLinear spillover_nonsen;
  double policy_gain_per_reallocated = 0.0;
};

struct ReallocationResult {
  double delta_share = 0.0;
  double new_share = 0.0;
  double direct_gain = 0.0;      // delta_share * policy gain
  double spillover_sen = 0.0;    // outcome delta for mainstreamed SEN peers
  double spillover_nonsen = 0.0;
  double spillover_total = 0.0;  // before-share weighted average of the deltas
  double combined = 0.0;         // direct_gain + spillover_total
};

ReallocationResult reallocation_welfare(const ReallocationInputs& inputs);

// Per-student annual program costs in CHF.
std::map<std::string, double> cost_table_default();

}  // namespace mtdml

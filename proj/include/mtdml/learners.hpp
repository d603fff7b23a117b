#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "mtdml/rng.hpp"

namespace mtdml {

enum class LearnerKind { elastic_net, lasso, random_forest };
enum class Task { regression, probability };

std::string learner_kind_name(LearnerKind kind);
LearnerKind learner_kind_from_name(const std::string& name);

struct LearnerSpec {
  LearnerKind kind = LearnerKind::elastic_net;
  std::string feature_set_id = "base";

  // elastic net / lasso (lasso is elastic net with mixing pinned to 1)
  double mixing = 1.0;
  int n_lambda = 100;
  double lambda_min_ratio = 1e-4;
  int cv_folds = 5;

  // random forest
  int n_trees = 200;
  int mtry = 0;  // 0 -> ceil(sqrt(p)) for probability, ceil(p/3) for regression
  int min_leaf = 5;

  std::string name() const;
  nlohmann::json to_json() const;
  static LearnerSpec from_json(const nlohmann::json& j);
};

class Model {
 public:
  virtual ~Model() = default;
  virtual Eigen::VectorXd predict(const Eigen::MatrixXd& X) const = 0;
  virtual nlohmann::json to_json() const = 0;
};

struct FittedModel {
  LearnerSpec spec;
  Task task = Task::regression;
  std::shared_ptr<const Model> model;
  bool intercept_only = false;  // degenerate design fallback

  // Probability predictions are clamped into [0,1].
  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const;
  nlohmann::json to_json() const;
  static FittedModel from_json(const nlohmann::json& j);
};

struct LinearModel final : Model {
  double intercept = 0.0;
  Eigen::VectorXd coef;  // original covariate scale

  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const override;
  nlohmann::json to_json() const override;
};

struct ForestModel final : Model {
  struct Tree {
    // Node arrays; leaf when feature[i] < 0, then value[i] is the leaf mean.
    std::vector<int> feature;
    std::vector<double> threshold;
    std::vector<int> left;
    std::vector<int> right;
    std::vector<double> value;

    double predict_row(const Eigen::MatrixXd& X, Eigen::Index row) const;
  };
  std::vector<Tree> trees;

  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const override;
  nlohmann::json to_json() const override;
};

struct ElasticNetOptions {
  double mixing = 1.0;
  std::vector<double> lambda_grid;  // empty -> automatic 100-point path
  int n_lambda = 100;
  double lambda_min_ratio = 1e-4;
  int cv_folds = 5;
  double tol = 1e-7;
  int max_sweeps = 2000;
  std::uint64_t seed = 1;
  // When set, receives the penalized objective after every coordinate sweep
  // of the final fit (for convergence diagnostics).
  std::vector<double>* objective_trace = nullptr;
};

struct ElasticNetFit {
  FittedModel model;
  double lambda = 0.0;
  double cv_mse = 0.0;
  bool intercept_only = false;
};

// Coordinate descent on internally standardized columns; the CV-MSE-minimizing
// lambda is selected from the grid, and coefficients are reported on the
// original scale with an unpenalized intercept.
ElasticNetFit fit_elastic_net(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                              const ElasticNetOptions& opt);

struct ForestOptions {
  Task task = Task::regression;
  int n_trees = 200;
  int mtry = 0;
  int min_leaf = 5;
  std::uint64_t seed = 1;
  int threads = 1;
};

struct ForestFit {
  FittedModel model;
  Eigen::VectorXd oob_prediction;      // per-unit out-of-bag mean
  std::vector<int> oob_count;          // trees for which the unit was out-of-bag
};

ForestFit fit_random_forest(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                            const ForestOptions& opt);

// Named design-matrix blocks sharing the row order ("base", "base+text", ...).
using FeatureBlocks = std::map<std::string, Eigen::MatrixXd>;

struct EnsembleWeights {
  struct Entry {
    LearnerSpec spec;
    double cv_mse = 0.0;
  };
  std::vector<Entry> ranked;     // all scored specs, best first
  std::vector<double> weights;   // over the retained top specs, sums to 1
  std::vector<std::string> warnings;
};

struct Ensemble {
  struct Member {
    FittedModel model;
    double weight = 0.0;
    double cv_mse = 0.0;
  };
  std::vector<Member> members;
  Task task = Task::regression;
  double clip_eps = 0.01;

  // Weighted member prediction; probability tasks are clipped to
  // [clip_eps, 1-clip_eps] after averaging.
  Eigen::VectorXd predict(const FeatureBlocks& blocks) const;
  nlohmann::json to_json() const;
  static Ensemble from_json(const nlohmann::json& j);
};

enum class EnsembleWeighting { inverse_mse, equal };

struct EnsembleOptions {
  int inner_folds = 5;
  Task task = Task::regression;
  double clip_eps = 0.01;
  int top_k = 5;
  EnsembleWeighting weighting = EnsembleWeighting::inverse_mse;
  std::uint64_t seed = 1;
  int threads = 1;
};

struct EnsembleFit {
  Ensemble ensemble;
  EnsembleWeights report;
};

// Scores every spec by inner-CV MSE, keeps the top_k most predictive, weights
// them by inverse CV-MSE and refits the retained members on the full sample.
EnsembleFit fit_ensemble(const FeatureBlocks& blocks, const Eigen::VectorXd& y,
                         const std::vector<LearnerSpec>& specs, const EnsembleOptions& opt);

FittedModel fit_spec(const LearnerSpec& spec, const Eigen::MatrixXd& X,
                     const Eigen::VectorXd& y, Task task, std::uint64_t seed, int threads);

}  // namespace mtdml

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mtdml/data.hpp"
#include "mtdml/learners.hpp"

namespace mtdml {

struct NuisanceFit {
  Eigen::MatrixXd p_hat;   // n x D generalized propensities, rows on the simplex
  Eigen::MatrixXd mu_hat;  // n x D conditional outcome means
  FoldAssignment folds;
  std::string outcome_name;
  double clip_eps = 0.01;

  struct FoldReport {
    std::vector<EnsembleWeights> propensity;  // one per treatment arm
    std::vector<EnsembleWeights> outcome;     // one per treatment arm
  };
  std::vector<FoldReport> ensemble_reports;   // one per fold

  std::size_t n() const { return static_cast<std::size_t>(p_hat.rows()); }
  std::size_t n_treatments() const { return static_cast<std::size_t>(p_hat.cols()); }
  void validate(const std::vector<int>& treatment) const;
};

struct CrossfitOptions {
  int K = 5;
  std::uint64_t seed = 1;
  bool stratify = true;
  std::string outcome;      // empty -> first outcome
  int inner_folds = 5;
  double clip_eps = 0.01;
  EnsembleWeighting weighting = EnsembleWeighting::inverse_mse;
  int threads = 1;
};

// K-fold cross-fitting: one-vs-rest propensity ensembles (renormalized onto
// the clipped simplex) and per-arm outcome ensembles, all predictions strictly
// out-of-fold.
NuisanceFit crossfit_nuisances(const Dataset& data, const FeatureBlocks& blocks,
                               const std::vector<LearnerSpec>& specs,
                               const CrossfitOptions& opt);

// Clip to [eps, 1-eps] and renormalize onto the simplex; feasible inputs pass
// through unchanged.
Eigen::VectorXd clip_simplex(const Eigen::VectorXd& p, double eps);

enum class TrimmingKind { none, crump, sturmer };

struct TrimmingScheme {
  TrimmingKind kind = TrimmingKind::none;
  double alpha = 0.0;

  static TrimmingScheme none() { return {TrimmingKind::none, 0.0}; }
  static TrimmingScheme crump(double alpha) { return {TrimmingKind::crump, alpha}; }
  static TrimmingScheme sturmer(double alpha) { return {TrimmingKind::sturmer, alpha}; }
  std::string name() const;
};

// Crump: drop unit i iff min_d p_hat(i,d) < alpha.
// Sturmer: drop unit i (treated with d) iff p_hat(i,d) is below the
// alpha-quantile of its own arm's propensities.
std::vector<std::uint8_t> apply_trimming(const Eigen::MatrixXd& p_hat,
                                         const std::vector<int>& treatment,
                                         const TrimmingScheme& scheme);

enum class Tilting { ate, ato };

struct ScoreMatrix {
  Eigen::MatrixXd gamma;  // n x D doubly-robust scores
  std::map<std::pair<int, int>, Eigen::VectorXd> atet_scores;  // ordered pair -> n-vector
  std::vector<std::uint8_t> keep_mask;  // trimming AND outcome attrition
  Tilting tilting = Tilting::ate;
  bool normalized = false;
  std::string outcome_name;
  std::vector<std::string> treatment_labels;

  std::size_t n() const { return static_cast<std::size_t>(gamma.rows()); }
  std::size_t n_treatments() const { return static_cast<std::size_t>(gamma.cols()); }
  std::size_t n_kept() const;
  std::vector<std::size_t> kept_indices() const;
};

struct ScoreOptions {
  Tilting tilting = Tilting::ate;
  // Normalized DR variant: residual weights 1(D=d)/p_d rescaled to mean one
  // within each arm before entering the score.
  bool normalized = false;
  std::vector<std::uint8_t> keep_mask;  // empty -> keep everyone
  bool with_atet = true;
};

ScoreMatrix build_scores(const NuisanceFit& nuisance, const Outcome& outcome,
                         const std::vector<int>& treatment,
                         const std::vector<std::string>& treatment_labels,
                         const ScoreOptions& opt);

enum class EstimandKind { APO, ATE, ATET, ATO };

struct Estimand {
  EstimandKind kind = EstimandKind::ATE;
  int d = 0;
  int d_prime = -1;  // unused for APO

  static Estimand apo(int d) { return {EstimandKind::APO, d, -1}; }
  static Estimand ate(int d, int d_prime) { return {EstimandKind::ATE, d, d_prime}; }
  static Estimand atet(int d, int d_prime) { return {EstimandKind::ATET, d, d_prime}; }
  static Estimand ato(int d, int d_prime) { return {EstimandKind::ATO, d, d_prime}; }
  std::string name(const std::vector<std::string>& labels) const;
};

struct EffectEstimate {
  Estimand estimand;
  double point = 0.0;
  double se = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  std::size_t n_used = 0;
  std::string outcome_name;
  std::string trimming = "none";
  bool degenerate_se = false;  // all scores equal
};

// Means of per-unit scores with one-sample t inference over kept units.
EffectEstimate estimate(const ScoreMatrix& scores, const Estimand& estimand);

// Per-unit ATE score vector for a pair (gamma_d - gamma_d'), over kept units.
std::vector<double> pairwise_scores(const ScoreMatrix& scores, int d, int d_prime);

}  // namespace mtdml

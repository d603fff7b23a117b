#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "mtdml/data.hpp"

namespace mtdml {

struct CovariateSpec {
  enum class Dist { normal, bernoulli, uniform01 };
  std::string name;
  Dist dist = Dist::normal;
  double param = 0.5;  // success probability for bernoulli
};

// theta(x): the planted treatment-effect heterogeneity. Arm d receives
// effect_scale[d] * theta(x) on top of its linear outcome model.
struct HeterogeneitySpec {
  enum class Kind { none, constant, two_group, linear, indicator };
  Kind kind = Kind::none;
  std::string column;   // moderator (two_group / linear / indicator)
  double value = 0.0;   // constant value; group-0 value; slope; indicator value
  double value2 = 0.0;  // group-1 value; indicator threshold
};

struct TextModelSpec {
  int n_diagnoses = 16;
  int vocab_size = 3400;
  int signature_per_diagnosis = 40;
  double signature_weight = 0.30;   // mixture weight of the diagnosis signature
  double mean_doc_length = 241.0;   // content tokens per document
  double stopword_rate = 0.30;      // stopword insertions in the raw text
  // Confounding through text: the latent diagnosis shifts both treatment
  // logits and outcomes, and is visible only in the document.
  double confound_propensity = 0.0;
  double confound_outcome = 0.0;
};

struct IvDesignSpec {
  int n_schools = 40;
  int n_years = 10;
  double preference_sd = 0.8;  // school-year shift of the treatment logit
  double late_effect = -0.45;  // homogeneous complier effect
};

struct DgpSpec {
  std::size_t n = 1000;
  int n_treatments = 3;
  std::vector<CovariateSpec> covariates;
  Eigen::MatrixXd propensity_coef;  // D x (p+1): intercept then slopes, softmax logits
  Eigen::MatrixXd outcome_coef;     // D x (p+1): per-arm linear outcome model
  Eigen::VectorXd effect_scale;     // length D multipliers on theta(x)
  HeterogeneitySpec heterogeneity;
  double noise_sd = 1.0;
  std::uint64_t seed = 1;

  bool with_text = false;
  TextModelSpec text;

  bool with_iv = false;  // binary-treatment school-year design; D forced to 2
  IvDesignSpec iv;

  void validate() const;
};

struct OracleTruth {
  Eigen::MatrixXd potential_outcomes;  // n x D, Y_i = potential_outcomes(i, D_i) exactly
  Eigen::MatrixXd conditional_mean;    // n x D noiseless mu_d(x_i)
  Eigen::MatrixXd true_propensity;     // n x D, rows sum to 1
  Eigen::VectorXd theta;               // planted heterogeneity values
  std::vector<double> apo;             // per-arm mean potential outcome

  double ate(int d, int d_prime) const { return apo[static_cast<std::size_t>(d)] -
                                                apo[static_cast<std::size_t>(d_prime)]; }
  double atet(int d, int d_prime, const std::vector<int>& treatment) const;
  double gate(int d, int d_prime, const std::vector<std::uint8_t>& in_group) const;
  double late = 0.0;  // IV designs only
};

struct GeneratedData {
  Dataset dataset;
  OracleTruth truth;
  std::vector<std::string> raw_docs;   // with_text only
  std::vector<int> latent_diagnosis;   // with_text only
};

// Reproducible draw from the specified process: covariates, softmax treatment
// assignment, per-arm potential outcomes, optional text and IV structure.
// Truths come from exhaustive averaging over the generated population.
GeneratedData generate(const DgpSpec& spec);

// German-like synthetic stopword list used by the text generator and the
// default featurization configs.
const std::vector<std::string>& synthetic_stopwords();

// Ready-made specs used across the test suites.
DgpSpec confounded_spec(std::size_t n, int n_treatments, int p, std::uint64_t seed);
DgpSpec randomized_spec(std::size_t n, int n_treatments, int p, std::uint64_t seed);
DgpSpec text_confounded_spec(std::size_t n, std::uint64_t seed);
DgpSpec iv_spec(std::size_t n, std::uint64_t seed);

}  // namespace mtdml

#include "mtdml/dgp.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mtdml/errors.hpp"
#include "mtdml/rng.hpp"

namespace mtdml {

void DgpSpec::validate() const {
  if (n < 4) throw ParameterError("dgp: n too small");
  if (n_treatments < 2) throw ParameterError("dgp: need at least 2 arms");
  if (covariates.empty()) throw ParameterError("dgp: need at least one covariate");
  const Eigen::Index D = n_treatments;
  const Eigen::Index pc = static_cast<Eigen::Index>(covariates.size()) + 1;
  if (propensity_coef.rows() != D || propensity_coef.cols() != pc)
    throw ParameterError("dgp: propensity_coef must be D x (p+1)");
  if (outcome_coef.rows() != D || outcome_coef.cols() != pc)
    throw ParameterError("dgp: outcome_coef must be D x (p+1)");
  if (effect_scale.size() != D) throw ParameterError("dgp: effect_scale must have length D");
  if (noise_sd < 0.0) throw ParameterError("dgp: negative noise sd");
  if (with_iv && n_treatments != 2) throw ParameterError("dgp: IV design is binary");
}

double OracleTruth::atet(int d, int d_prime, const std::vector<int>& treatment) const {
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < treatment.size(); ++i) {
    if (treatment[i] != d) continue;
    sum += potential_outcomes(static_cast<Eigen::Index>(i), d) -
           potential_outcomes(static_cast<Eigen::Index>(i), d_prime);
    ++count;
  }
  if (count == 0) throw ValidityError("oracle: no treated units for ATET");
  return sum / static_cast<double>(count);
}

double OracleTruth::gate(int d, int d_prime, const std::vector<std::uint8_t>& in_group) const {
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < in_group.size(); ++i) {
    if (!in_group[i]) continue;
    sum += potential_outcomes(static_cast<Eigen::Index>(i), d) -
           potential_outcomes(static_cast<Eigen::Index>(i), d_prime);
    ++count;
  }
  if (count == 0) throw ValidityError("oracle: empty group for GATE");
  return sum / static_cast<double>(count);
}

const std::vector<std::string>& synthetic_stopwords() {
  static const std::vector<std::string> words = {
      "und", "der", "die", "das", "ist", "mit", "von", "auf", "ein", "eine",
      "im",  "zu",  "den", "dem", "des", "als", "auch", "bei", "nach", "wird"};
  return words;
}

namespace {

// Content tokens are CV-syllable words ending in a closed syllable so the
// default suffix stemmer leaves them untouched.
std::string make_token(int index) {
  static const char* open_syl[] = {"la", "be", "ko", "mi", "zu", "ra", "fe", "to",
                                   "du", "ni", "va", "ge", "po", "sa", "we", "hu"};
  static const char* close_syl[] = {"lak", "mur", "fit", "pon", "rek", "sul", "tak",
                                    "vim", "gor", "nux", "bal", "dit", "hom", "kep",
                                    "rix", "zot"};
  std::string token;
  int x = index;
  token += open_syl[x % 16];
  x /= 16;
  token += open_syl[x % 16];
  x /= 16;
  token += close_syl[x % 16];
  return token;
}

double theta_of(const HeterogeneitySpec& h, const Dataset& ds, std::size_t i) {
  switch (h.kind) {
    case HeterogeneitySpec::Kind::none:
      return 0.0;
    case HeterogeneitySpec::Kind::constant:
      return h.value;
    case HeterogeneitySpec::Kind::two_group: {
      const int c = ds.x_col(h.column);
      if (c < 0) throw ParameterError("dgp: unknown heterogeneity column " + h.column);
      return ds.X(static_cast<Eigen::Index>(i), c) > 0.5 ? h.value2 : h.value;
    }
    case HeterogeneitySpec::Kind::linear: {
      const int c = ds.x_col(h.column);
      if (c < 0) throw ParameterError("dgp: unknown heterogeneity column " + h.column);
      return h.value * ds.X(static_cast<Eigen::Index>(i), c);
    }
    case HeterogeneitySpec::Kind::indicator: {
      const int c = ds.x_col(h.column);
      if (c < 0) throw ParameterError("dgp: unknown heterogeneity column " + h.column);
      return ds.X(static_cast<Eigen::Index>(i), c) > h.value2 ? h.value : 0.0;
    }
  }
  return 0.0;
}

std::vector<std::string> default_labels(int D) {
  static const std::vector<std::string> catalogue = {
      "no_sped",   "counseling",       "academic_support", "individual_therapy",
      "inclusion", "semi_segregation", "full_segregation"};
  if (D <= static_cast<int>(catalogue.size()))
    return {catalogue.begin(), catalogue.begin() + D};
  std::vector<std::string> labels = catalogue;
  for (int d = static_cast<int>(catalogue.size()); d < D; ++d)
    labels.push_back("arm" + std::to_string(d));
  return labels;
}

}  // namespace

GeneratedData generate(const DgpSpec& spec) {
  spec.validate();
  const std::size_t n = spec.n;
  const int D = spec.n_treatments;
  const std::size_t p = spec.covariates.size();

  GeneratedData out;
  Dataset& ds = out.dataset;
  ds.catalogue.labels = default_labels(D);
  ds.X.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
  for (const auto& c : spec.covariates) ds.x_names.push_back(c.name);

  // Per-unit counter-based streams keep generation order-independent.
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(Rng::derive_stream(spec.seed, 1000 + i));
    for (std::size_t j = 0; j < p; ++j) {
      double v = 0.0;
      switch (spec.covariates[j].dist) {
        case CovariateSpec::Dist::normal: v = rng.normal(); break;
        case CovariateSpec::Dist::bernoulli:
          v = rng.bernoulli(spec.covariates[j].param) ? 1.0 : 0.0;
          break;
        case CovariateSpec::Dist::uniform01: v = rng.uniform(); break;
      }
      ds.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
    }
  }

  // Latent diagnosis and its fixed shift patterns (text designs only).
  std::vector<int> diagnosis(n, 0);
  Eigen::MatrixXd diag_logit_shift;
  Eigen::VectorXd diag_outcome_shift;
  if (spec.with_text) {
    const int K = spec.text.n_diagnoses;
    // Structural confounding geometry, identical across seeds: half the
    // diagnoses are "severe" (higher outcomes) and severity tilts assignment
    // along the arm-intensity gradient.
    diag_logit_shift.resize(K, D);
    diag_outcome_shift.resize(K);
    for (int k = 0; k < K; ++k) {
      const double severity = (k % 2 == 0) ? 1.0 : -1.0;
      diag_outcome_shift(k) = spec.text.confound_outcome * severity;
      for (int d = 0; d < D; ++d) {
        const double gradient =
            D > 1 ? (2.0 * d - (D - 1.0)) / (D - 1.0) : 0.0;  // -1 .. +1
        diag_logit_shift(k, d) = spec.text.confound_propensity * severity * gradient;
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      Rng rng(Rng::derive_stream(spec.seed, 3000000 + i));
      diagnosis[i] = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(K)));
    }
    out.latent_diagnosis = diagnosis;
  }

  // School-year preferences (IV designs only).
  std::vector<int> school(n, 0), year(n, 0);
  Eigen::MatrixXd pref;
  if (spec.with_iv) {
    Rng pref_rng(Rng::derive_stream(spec.seed, 88));
    pref.resize(spec.iv.n_schools, spec.iv.n_years);
    for (int s = 0; s < spec.iv.n_schools; ++s)
      for (int y = 0; y < spec.iv.n_years; ++y)
        pref(s, y) = pref_rng.normal(0.0, spec.iv.preference_sd);
    for (std::size_t i = 0; i < n; ++i) {
      Rng rng(Rng::derive_stream(spec.seed, 4000000 + i));
      school[i] = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(spec.iv.n_schools)));
      year[i] = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(spec.iv.n_years)));
    }
  }

  OracleTruth& truth = out.truth;
  truth.true_propensity.resize(static_cast<Eigen::Index>(n), D);
  truth.potential_outcomes.resize(static_cast<Eigen::Index>(n), D);
  truth.conditional_mean.resize(static_cast<Eigen::Index>(n), D);
  truth.theta.resize(static_cast<Eigen::Index>(n));
  ds.treatment.resize(n);

  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(Rng::derive_stream(spec.seed, 2000000 + i));
    const auto row = static_cast<Eigen::Index>(i);

    Eigen::VectorXd xi(static_cast<Eigen::Index>(p) + 1);
    xi(0) = 1.0;
    xi.tail(static_cast<Eigen::Index>(p)) = ds.X.row(row).transpose();

    // Softmax over per-arm logits (plus diagnosis and school-year shifts).
    Eigen::VectorXd logits = spec.propensity_coef * xi;
    if (spec.with_text) logits += diag_logit_shift.row(diagnosis[i]).transpose();
    if (spec.with_iv) logits(1) += pref(school[i], year[i]);
    const double mx = logits.maxCoeff();
    Eigen::VectorXd probs = (logits.array() - mx).exp();
    probs /= probs.sum();
    if (probs.minCoeff() < 1e-12)
      throw ParameterError("dgp: degenerate propensity coefficients");
    truth.true_propensity.row(row) = probs.transpose();

    std::vector<double> w(probs.data(), probs.data() + probs.size());
    ds.treatment[i] = static_cast<int>(rng.discrete(w));

    truth.theta(row) = theta_of(spec.heterogeneity, ds, i);
    // One noise draw per unit, shared across arms: a zero-effect spec then
    // has exactly zero stored potential-outcome differences.
    const double eps = rng.normal(0.0, spec.noise_sd);
    for (int d = 0; d < D; ++d) {
      double mu = spec.outcome_coef.row(d).dot(xi) + spec.effect_scale(d) * truth.theta(row);
      if (spec.with_text) mu += diag_outcome_shift(diagnosis[i]);
      if (spec.with_iv && d == 1) mu += spec.iv.late_effect;
      truth.conditional_mean(row, d) = mu;
      truth.potential_outcomes(row, d) = mu + eps;
    }
  }

  truth.apo.assign(static_cast<std::size_t>(D), 0.0);
  for (int d = 0; d < D; ++d)
    truth.apo[static_cast<std::size_t>(d)] = truth.potential_outcomes.col(d).mean();
  if (spec.with_iv) truth.late = spec.iv.late_effect;

  Outcome y;
  y.name = "y";
  y.values.resize(static_cast<Eigen::Index>(n));
  y.observed.assign(n, 1);
  for (std::size_t i = 0; i < n; ++i)
    y.values(static_cast<Eigen::Index>(i)) =
        truth.potential_outcomes(static_cast<Eigen::Index>(i), ds.treatment[i]);
  ds.outcomes.push_back(std::move(y));

  if (spec.with_iv) {
    // School and year ride along as interpretable columns.
    Eigen::MatrixXd X2(ds.X.rows(), ds.X.cols() + 2);
    X2.leftCols(ds.X.cols()) = ds.X;
    for (std::size_t i = 0; i < n; ++i) {
      X2(static_cast<Eigen::Index>(i), ds.X.cols()) = school[i];
      X2(static_cast<Eigen::Index>(i), ds.X.cols() + 1) = year[i];
    }
    ds.X = std::move(X2);
    ds.x_names.push_back("school");
    ds.x_names.push_back("year");
  }

  ds.unit_ids.resize(n);
  for (std::size_t i = 0; i < n; ++i) ds.unit_ids[i] = std::to_string(i);

  if (spec.with_text) {
    const TextModelSpec& tm = spec.text;
    const int V = tm.vocab_size;
    const int K = tm.n_diagnoses;
    const int sig = tm.signature_per_diagnosis;
    if (K * sig > V) throw ParameterError("dgp: signatures exceed vocabulary");

    // Zipf base distribution over the whole vocabulary.
    std::vector<double> base_cdf(static_cast<std::size_t>(V));
    double acc = 0.0;
    for (int v = 0; v < V; ++v) {
      acc += 1.0 / static_cast<double>(v + 1);
      base_cdf[static_cast<std::size_t>(v)] = acc;
    }
    const auto& stops = synthetic_stopwords();

    out.raw_docs.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      Rng rng(Rng::derive_stream(spec.seed, 5000000 + i));
      const int len = std::max(5, rng.poisson(tm.mean_doc_length));
      std::ostringstream doc;
      for (int t = 0; t < len; ++t) {
        if (t > 0) doc << ' ';
        if (rng.uniform() < tm.stopword_rate)
          doc << stops[rng.uniform_int(stops.size())] << ' ';
        int token_id;
        if (rng.uniform() < tm.signature_weight) {
          // Signature block of the unit's diagnosis: tokens [k*sig, (k+1)*sig).
          token_id = diagnosis[i] * sig + static_cast<int>(rng.uniform_int(
                                              static_cast<std::uint64_t>(sig)));
        } else {
          token_id = static_cast<int>(rng.discrete_cdf(base_cdf));
        }
        doc << make_token(token_id);
        if (rng.uniform() < 0.08) doc << '.';
      }
      out.raw_docs[i] = doc.str();
    }
  }

  ds.validate();
  return out;
}

DgpSpec confounded_spec(std::size_t n, int n_treatments, int p, std::uint64_t seed) {
  DgpSpec spec;
  spec.n = n;
  spec.n_treatments = n_treatments;
  spec.seed = seed;
  for (int j = 0; j < p; ++j)
    spec.covariates.push_back({"x" + std::to_string(j + 1), CovariateSpec::Dist::normal, 0.0});
  // The last covariate doubles as a balanced group indicator when it carries
  // no outcome or assignment weight.
  if (p >= 5) spec.covariates.back() = {"x" + std::to_string(p), CovariateSpec::Dist::bernoulli, 0.5};

  spec.propensity_coef = Eigen::MatrixXd::Zero(n_treatments, p + 1);
  for (int d = 1; d < n_treatments; ++d) {
    // Assignment leans on the first few covariates with alternating signs.
    for (int j = 0; j < std::min(4, p); ++j)
      spec.propensity_coef(d, j + 1) = ((j + d) % 2 == 0 ? 0.5 : -0.4);
  }

  spec.outcome_coef = Eigen::MatrixXd::Zero(n_treatments, p + 1);
  for (int d = 0; d < n_treatments; ++d) {
    spec.outcome_coef(d, 0) = 0.2 * d;
    if (p >= 1) spec.outcome_coef(d, 1) = 1.0;
    if (p >= 2) spec.outcome_coef(d, 2) = 0.5;
    if (p >= 3) spec.outcome_coef(d, 3) = -0.5;
    if (p >= 4) spec.outcome_coef(d, 4) = 0.25;
  }
  spec.effect_scale = Eigen::VectorXd::Zero(n_treatments);
  for (int d = 1; d < n_treatments; ++d) spec.effect_scale(d) = 1.0;
  spec.heterogeneity = {HeterogeneitySpec::Kind::constant, "", 0.3 , 0.0};
  spec.noise_sd = 1.0;
  return spec;
}

DgpSpec randomized_spec(std::size_t n, int n_treatments, int p, std::uint64_t seed) {
  DgpSpec spec = confounded_spec(n, n_treatments, p, seed);
  spec.propensity_coef.setZero();  // uniform assignment
  return spec;
}

DgpSpec text_confounded_spec(std::size_t n, std::uint64_t seed) {
  DgpSpec spec = confounded_spec(n, 3, 5, seed);
  // Assignment and outcomes both shift with the latent diagnosis, which only
  // the document reveals.
  spec.propensity_coef *= 0.5;
  spec.with_text = true;
  spec.text.confound_propensity = 1.2;
  spec.text.confound_outcome = 1.0;
  return spec;
}

DgpSpec iv_spec(std::size_t n, std::uint64_t seed) {
  DgpSpec spec;
  spec.n = n;
  spec.n_treatments = 2;
  spec.seed = seed;
  for (int j = 0; j < 3; ++j)
    spec.covariates.push_back({"x" + std::to_string(j + 1), CovariateSpec::Dist::normal, 0.0});
  spec.propensity_coef = Eigen::MatrixXd::Zero(2, 4);
  spec.propensity_coef(1, 1) = 0.4;
  spec.propensity_coef(1, 2) = -0.3;
  spec.outcome_coef = Eigen::MatrixXd::Zero(2, 4);
  spec.outcome_coef(0, 1) = 0.8;
  spec.outcome_coef(0, 2) = 0.4;
  spec.outcome_coef(1, 1) = 0.8;
  spec.outcome_coef(1, 2) = 0.4;
  spec.effect_scale = Eigen::VectorXd::Zero(2);
  spec.heterogeneity = {HeterogeneitySpec::Kind::none, "", 0.0, 0.0};
  spec.noise_sd = 1.0;
  spec.with_iv = true;
  return spec;
}

}  // namespace mtdml

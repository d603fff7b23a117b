#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "mtdml/errors.hpp"
#include "mtdml/learners.hpp"

namespace mtdml {

std::string learner_kind_name(LearnerKind kind) {
  switch (kind) {
    case LearnerKind::elastic_net: return "elastic_net";
    case LearnerKind::lasso: return "lasso";
    case LearnerKind::random_forest: return "random_forest";
  }
  return "unknown";
}

LearnerKind learner_kind_from_name(const std::string& name) {
  if (name == "elastic_net") return LearnerKind::elastic_net;
  if (name == "lasso") return LearnerKind::lasso;
  if (name == "random_forest") return LearnerKind::random_forest;
  throw ParameterError("unknown learner kind '" + name + "'");
}

std::string LearnerSpec::name() const {
  std::ostringstream out;
  out << learner_kind_name(kind) << "[" << feature_set_id << "]";
  if (kind != LearnerKind::random_forest) out << " mixing=" << mixing;
  return out.str();
}

nlohmann::json LearnerSpec::to_json() const {
  nlohmann::json j;
  j["kind"] = learner_kind_name(kind);
  j["feature_set_id"] = feature_set_id;
  j["mixing"] = mixing;
  j["n_lambda"] = n_lambda;
  j["lambda_min_ratio"] = lambda_min_ratio;
  j["cv_folds"] = cv_folds;
  j["n_trees"] = n_trees;
  j["mtry"] = mtry;
  j["min_leaf"] = min_leaf;
  return j;
}

LearnerSpec LearnerSpec::from_json(const nlohmann::json& j) {
  LearnerSpec s;
  s.kind = learner_kind_from_name(j.at("kind").get<std::string>());
  s.feature_set_id = j.at("feature_set_id").get<std::string>();
  s.mixing = j.value("mixing", 1.0);
  s.n_lambda = j.value("n_lambda", 100);
  s.lambda_min_ratio = j.value("lambda_min_ratio", 1e-4);
  s.cv_folds = j.value("cv_folds", 5);
  s.n_trees = j.value("n_trees", 200);
  s.mtry = j.value("mtry", 0);
  s.min_leaf = j.value("min_leaf", 5);
  return s;
}

Eigen::VectorXd FittedModel::predict(const Eigen::MatrixXd& X) const {
  if (!model) throw ParameterError("fitted model: empty");
  Eigen::VectorXd pred = model->predict(X);
  if (task == Task::probability)
    pred = pred.cwiseMax(0.0).cwiseMin(1.0);
  return pred;
}

nlohmann::json FittedModel::to_json() const {
  nlohmann::json j;
  j["spec"] = spec.to_json();
  j["task"] = (task == Task::probability) ? "probability" : "regression";
  j["intercept_only"] = intercept_only;
  j["model"] = model->to_json();
  return j;
}

FittedModel FittedModel::from_json(const nlohmann::json& j) {
  FittedModel fm;
  fm.spec = LearnerSpec::from_json(j.at("spec"));
  fm.task = j.at("task").get<std::string>() == "probability" ? Task::probability
                                                             : Task::regression;
  fm.intercept_only = j.value("intercept_only", false);
  const nlohmann::json& mj = j.at("model");
  const std::string type = mj.at("type").get<std::string>();
  if (type == "linear") {
    auto lin = std::make_shared<LinearModel>();
    lin->intercept = mj.at("intercept").get<double>();
    const auto coef = mj.at("coef").get<std::vector<double>>();
    lin->coef = Eigen::Map<const Eigen::VectorXd>(coef.data(),
                                                  static_cast<Eigen::Index>(coef.size()));
    fm.model = lin;
  } else if (type == "forest") {
    auto forest = std::make_shared<ForestModel>();
    for (const auto& tj : mj.at("trees")) {
      ForestModel::Tree t;
      t.feature = tj.at("feature").get<std::vector<int>>();
      t.threshold = tj.at("threshold").get<std::vector<double>>();
      t.left = tj.at("left").get<std::vector<int>>();
      t.right = tj.at("right").get<std::vector<int>>();
      t.value = tj.at("value").get<std::vector<double>>();
      forest->trees.push_back(std::move(t));
    }
    fm.model = forest;
  } else {
    throw ParameterError("fitted model: unknown type '" + type + "'");
  }
  return fm;
}

FittedModel fit_spec(const LearnerSpec& spec, const Eigen::MatrixXd& X,
                     const Eigen::VectorXd& y, Task task, std::uint64_t seed, int threads) {
  FittedModel fm;
  if (spec.kind == LearnerKind::random_forest) {
    ForestOptions fo;
    fo.task = task;
    fo.n_trees = spec.n_trees;
    fo.mtry = spec.mtry;
    fo.min_leaf = spec.min_leaf;
    fo.seed = seed;
    fo.threads = threads;
    fm = fit_random_forest(X, y, fo).model;
  } else {
    ElasticNetOptions eo;
    eo.mixing = (spec.kind == LearnerKind::lasso) ? 1.0 : spec.mixing;
    eo.n_lambda = spec.n_lambda;
    eo.lambda_min_ratio = spec.lambda_min_ratio;
    eo.cv_folds = spec.cv_folds;
    eo.seed = seed;
    fm = fit_elastic_net(X, y, eo).model;
  }
  fm.spec = spec;
  fm.task = task;
  return fm;
}

Eigen::VectorXd Ensemble::predict(const FeatureBlocks& blocks) const {
  if (members.empty()) throw ParameterError("ensemble: no members");
  Eigen::VectorXd out;
  for (const auto& m : members) {
    auto it = blocks.find(m.model.spec.feature_set_id);
    if (it == blocks.end())
      throw ParameterError("ensemble: missing feature block '" +
                           m.model.spec.feature_set_id + "'");
    const Eigen::VectorXd pred = m.model.predict(it->second);
    if (out.size() == 0)
      out = m.weight * pred;
    else
      out += m.weight * pred;
  }
  if (task == Task::probability)
    out = out.cwiseMax(clip_eps).cwiseMin(1.0 - clip_eps);
  return out;
}

nlohmann::json Ensemble::to_json() const {
  nlohmann::json j;
  j["task"] = (task == Task::probability) ? "probability" : "regression";
  j["clip_eps"] = clip_eps;
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& m : members) {
    nlohmann::json mj;
    mj["weight"] = m.weight;
    mj["cv_mse"] = m.cv_mse;
    mj["model"] = m.model.to_json();
    arr.push_back(std::move(mj));
  }
  j["members"] = std::move(arr);
  return j;
}

Ensemble Ensemble::from_json(const nlohmann::json& j) {
  Ensemble e;
  e.task = j.at("task").get<std::string>() == "probability" ? Task::probability
                                                            : Task::regression;
  e.clip_eps = j.at("clip_eps").get<double>();
  for (const auto& mj : j.at("members")) {
    Ensemble::Member m;
    m.weight = mj.at("weight").get<double>();
    m.cv_mse = mj.at("cv_mse").get<double>();
    m.model = FittedModel::from_json(mj.at("model"));
    e.members.push_back(std::move(m));
  }
  return e;
}

namespace {

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& X, const std::vector<std::size_t>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), X.cols());
  for (std::size_t i = 0; i < rows.size(); ++i)
    out.row(static_cast<Eigen::Index>(i)) = X.row(static_cast<Eigen::Index>(rows[i]));
  return out;
}

Eigen::VectorXd take(const Eigen::VectorXd& v, const std::vector<std::size_t>& rows) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    out(static_cast<Eigen::Index>(i)) = v(static_cast<Eigen::Index>(rows[i]));
  return out;
}

}  // namespace

EnsembleFit fit_ensemble(const FeatureBlocks& blocks, const Eigen::VectorXd& y,
                         const std::vector<LearnerSpec>& specs, const EnsembleOptions& opt) {
  if (specs.empty()) throw ParameterError("ensemble: need at least one spec");
  if (blocks.empty()) throw ParameterError("ensemble: no feature blocks");
  const Eigen::Index n = y.size();
  for (const auto& [id, X] : blocks)
    if (X.rows() != n)
      throw ParameterError("ensemble: block '" + id + "' row count mismatch");

  const int folds = std::max<int>(2, static_cast<int>(std::min<long>(opt.inner_folds, n)));
  std::vector<std::size_t> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(Rng::derive_stream(opt.seed, 0xe5e3b1e));
  rng.shuffle(perm);

  EnsembleFit result;
  struct Scored {
    LearnerSpec spec;
    double cv_mse;
    std::size_t order;  // original spec position, stable tie-break
  };
  std::vector<Scored> scored;

  for (std::size_t s = 0; s < specs.size(); ++s) {
    const LearnerSpec& spec = specs[s];
    auto blk = blocks.find(spec.feature_set_id);
    if (blk == blocks.end()) {
      result.report.warnings.push_back("spec " + spec.name() + ": unknown feature block");
      continue;
    }
    try {
      double sse = 0.0;
      for (int f = 0; f < folds; ++f) {
        std::vector<std::size_t> tr, va;
        for (std::size_t i = 0; i < perm.size(); ++i)
          (static_cast<int>(i % static_cast<std::size_t>(folds)) == f ? va : tr)
              .push_back(perm[i]);
        const FittedModel model =
            fit_spec(spec, take_rows(blk->second, tr), take(y, tr), opt.task,
                     Rng::derive_stream(opt.seed, 0xcf17 + s * 64 + static_cast<std::size_t>(f)),
                     opt.threads);
        const Eigen::VectorXd pred = model.predict(take_rows(blk->second, va));
        const Eigen::VectorXd truth = take(y, va);
        sse += (pred - truth).squaredNorm();
      }
      scored.push_back({spec, sse / static_cast<double>(n), s});
    } catch (const std::exception& e) {
      result.report.warnings.push_back("spec " + spec.name() + " failed: " + e.what());
    }
  }
  if (scored.empty()) throw ValidityError("ensemble: every spec failed");

  std::sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
    if (a.cv_mse != b.cv_mse) return a.cv_mse < b.cv_mse;
    return a.order < b.order;
  });
  for (const auto& s : scored) result.report.ranked.push_back({s.spec, s.cv_mse});

  const std::size_t keep = std::min<std::size_t>(static_cast<std::size_t>(opt.top_k),
                                                 scored.size());
  // Default: inverse-MSE weights over the retained specs; a perfect
  // (zero-MSE) spec takes the whole weight budget shared equally with any
  // other perfect ones. Equal weighting over the top specs is selectable.
  std::vector<double> weights(keep, 0.0);
  if (opt.weighting == EnsembleWeighting::equal) {
    for (std::size_t i = 0; i < keep; ++i) weights[i] = 1.0 / static_cast<double>(keep);
  } else {
    std::size_t zeros = 0;
    for (std::size_t i = 0; i < keep; ++i)
      if (scored[i].cv_mse <= 0.0) ++zeros;
    if (zeros > 0) {
      for (std::size_t i = 0; i < keep; ++i)
        weights[i] = scored[i].cv_mse <= 0.0 ? 1.0 / static_cast<double>(zeros) : 0.0;
    } else {
      double total = 0.0;
      for (std::size_t i = 0; i < keep; ++i) total += 1.0 / scored[i].cv_mse;
      for (std::size_t i = 0; i < keep; ++i) weights[i] = (1.0 / scored[i].cv_mse) / total;
    }
  }
  result.report.weights = weights;

  result.ensemble.task = opt.task;
  result.ensemble.clip_eps = opt.clip_eps;
  for (std::size_t i = 0; i < keep; ++i) {
    Ensemble::Member m;
    m.model = fit_spec(scored[i].spec, blocks.at(scored[i].spec.feature_set_id), y, opt.task,
                       Rng::derive_stream(opt.seed, 0xf17a1 + i), opt.threads);
    m.weight = weights[i];
    m.cv_mse = scored[i].cv_mse;
    result.ensemble.members.push_back(std::move(m));
  }
  return result;
}

}  // namespace mtdml

#include "mtdml/policy.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <set>

#include "mtdml/errors.hpp"
#include "mtdml/stats.hpp"

namespace mtdml {

int PolicyTree::assign_row(const Eigen::MatrixXd& Z, Eigen::Index row) const {
  int node = 0;
  while (nodes[static_cast<std::size_t>(node)].feature >= 0) {
    const auto& nd = nodes[static_cast<std::size_t>(node)];
    node = (Z(row, nd.feature) <= nd.threshold) ? nd.left : nd.right;
  }
  return nodes[static_cast<std::size_t>(node)].leaf_treatment;
}

std::vector<int> PolicyTree::assign(const Eigen::MatrixXd& Z) const {
  std::vector<int> out(static_cast<std::size_t>(Z.rows()));
  for (Eigen::Index i = 0; i < Z.rows(); ++i)
    out[static_cast<std::size_t>(i)] = assign_row(Z, i);
  return out;
}

std::vector<std::string> PolicyTree::split_features() const {
  std::set<std::string> feats;
  for (const auto& nd : nodes)
    if (nd.feature >= 0) feats.insert(feature_names[static_cast<std::size_t>(nd.feature)]);
  return {feats.begin(), feats.end()};
}

nlohmann::json PolicyTree::to_json() const {
  nlohmann::json j;
  j["depth"] = depth;
  j["feature_names"] = feature_names;
  j["treatment_labels"] = treatment_labels;
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& nd : nodes) {
    nlohmann::json nj;
    nj["feature"] = nd.feature;
    nj["threshold"] = nd.threshold;
    nj["left"] = nd.left;
    nj["right"] = nd.right;
    nj["leaf_treatment"] = nd.leaf_treatment;
    arr.push_back(std::move(nj));
  }
  j["nodes"] = std::move(arr);
  return j;
}

PolicyTree PolicyTree::from_json(const nlohmann::json& j) {
  PolicyTree tree;
  tree.depth = j.at("depth").get<int>();
  tree.feature_names = j.at("feature_names").get<std::vector<std::string>>();
  tree.treatment_labels = j.at("treatment_labels").get<std::vector<std::string>>();
  for (const auto& nj : j.at("nodes")) {
    PolicyTree::Node nd;
    nd.feature = nj.at("feature").get<int>();
    nd.threshold = nj.at("threshold").get<double>();
    nd.left = nj.at("left").get<int>();
    nd.right = nj.at("right").get<int>();
    nd.leaf_treatment = nj.at("leaf_treatment").get<int>();
    tree.nodes.push_back(nd);
  }
  return tree;
}

PolicyEvaluation policy_value(const std::vector<int>& assignment, const ScoreMatrix& scores,
                              const TreatmentCatalogue* costs, const std::vector<int>* observed) {
  const std::size_t n = scores.n();
  const int D = static_cast<int>(scores.n_treatments());
  if (assignment.size() != n) throw ParameterError("policy_value: assignment length mismatch");

  PolicyEvaluation eval;
  eval.share_per_treatment.assign(static_cast<std::size_t>(D), 0.0);
  double total = 0.0, cost = 0.0, actual_cost = 0.0;
  for (auto i : scores.kept_indices()) {
    const int d = assignment[i];
    if (d < 0 || d >= D) throw ValueError("policy_value: assignment to unknown treatment");
    total += scores.gamma(static_cast<Eigen::Index>(i), d);
    eval.share_per_treatment[static_cast<std::size_t>(d)] += 1.0;
    eval.n++;
    if (costs && !costs->costs.empty()) {
      cost += costs->costs.at(costs->labels[static_cast<std::size_t>(d)]);
      if (observed)
        actual_cost += costs->costs.at(
            costs->labels[static_cast<std::size_t>((*observed)[i])]);
    }
  }
  if (eval.n == 0) throw ValidityError("policy_value: no kept units");
  eval.value = total / static_cast<double>(eval.n);
  for (auto& s : eval.share_per_treatment) s /= static_cast<double>(eval.n);
  eval.total_cost = cost;
  eval.cost_ratio_vs_actual = (actual_cost > 0.0) ? cost / actual_cost : 0.0;
  return eval;
}

namespace {

struct SubTree {
  double value = 0.0;
  int feature = -1;
  double threshold = 0.0;
  int leaf = -1;  // candidate-treatment index when feature < 0
  std::unique_ptr<SubTree> left;
  std::unique_ptr<SubTree> right;
};

struct SearchContext {
  const Eigen::MatrixXd& Z;    // kept units x features
  const Eigen::MatrixXd& val;  // kept units x candidate treatments
  std::uint64_t evals = 0;
  std::uint64_t cap = 0;

  void charge(std::uint64_t amount) {
    evals += amount;
    if (evals > cap)
      throw ParameterError(
          "fit_policy_tree: node evaluation cap exceeded; reduce depth or features");
  }
};

// Best single leaf over a unit set: ties go to the earlier candidate.
SubTree solve_leaf(SearchContext& ctx, const std::vector<int>& units) {
  const int T = static_cast<int>(ctx.val.cols());
  ctx.charge(units.size() * static_cast<std::size_t>(T));
  SubTree best;
  best.leaf = 0;
  best.value = -std::numeric_limits<double>::infinity();
  for (int t = 0; t < T; ++t) {
    double sum = 0.0;
    for (int u : units) sum += ctx.val(u, t);
    if (sum > best.value) {
      best.value = sum;
      best.leaf = t;
    }
  }
  return best;
}

// Depth-1 exact solve in one sorted scan per feature: prefix sums per
// candidate treatment give every threshold's best left and right leaf.
SubTree solve_depth1(SearchContext& ctx, const std::vector<int>& units) {
  SubTree best = solve_leaf(ctx, units);
  const int p = static_cast<int>(ctx.Z.cols());
  const int T = static_cast<int>(ctx.val.cols());
  const std::size_t m = units.size();
  if (m < 2) return best;

  std::vector<int> order(units);
  std::vector<double> total(static_cast<std::size_t>(T), 0.0);
  for (int u : units)
    for (int t = 0; t < T; ++t) total[static_cast<std::size_t>(t)] += ctx.val(u, t);

  std::vector<double> left_sum(static_cast<std::size_t>(T));
  for (int f = 0; f < p; ++f) {
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return ctx.Z(a, f) < ctx.Z(b, f); });
    ctx.charge(m * static_cast<std::size_t>(T));
    std::fill(left_sum.begin(), left_sum.end(), 0.0);
    for (std::size_t i = 0; i + 1 < m; ++i) {
      const int u = order[i];
      for (int t = 0; t < T; ++t) left_sum[static_cast<std::size_t>(t)] += ctx.val(u, t);
      if (ctx.Z(u, f) == ctx.Z(order[i + 1], f)) continue;
      const double thr = 0.5 * (ctx.Z(u, f) + ctx.Z(order[i + 1], f));

      double best_left = -std::numeric_limits<double>::infinity();
      double best_right = -std::numeric_limits<double>::infinity();
      int left_t = 0, right_t = 0;
      for (int t = 0; t < T; ++t) {
        const double l = left_sum[static_cast<std::size_t>(t)];
        const double r = total[static_cast<std::size_t>(t)] - l;
        if (l > best_left) {
          best_left = l;
          left_t = t;
        }
        if (r > best_right) {
          best_right = r;
          right_t = t;
        }
      }
      if (best_left + best_right > best.value) {
        best.value = best_left + best_right;
        best.feature = f;
        best.threshold = thr;
        best.leaf = -1;
        best.left = std::make_unique<SubTree>();
        best.left->leaf = left_t;
        best.left->value = best_left;
        best.right = std::make_unique<SubTree>();
        best.right->leaf = right_t;
        best.right->value = best_right;
      }
    }
  }
  return best;
}

SubTree solve(SearchContext& ctx, const std::vector<int>& units, int depth) {
  if (depth <= 1 || units.size() < 2) {
    return depth >= 1 && units.size() >= 2 ? solve_depth1(ctx, units)
                                           : solve_leaf(ctx, units);
  }
  SubTree best = solve_leaf(ctx, units);

  const int p = static_cast<int>(ctx.Z.cols());
  for (int f = 0; f < p; ++f) {
    // Midpoints between adjacent distinct observed values.
    std::vector<double> vals;
    vals.reserve(units.size());
    for (int u : units) vals.push_back(ctx.Z(u, f));
    std::sort(vals.begin(), vals.end());
    vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
    for (std::size_t v = 0; v + 1 < vals.size(); ++v) {
      const double thr = 0.5 * (vals[v] + vals[v + 1]);
      std::vector<int> left_units, right_units;
      for (int u : units) (ctx.Z(u, f) <= thr ? left_units : right_units).push_back(u);
      SubTree left = solve(ctx, left_units, depth - 1);
      SubTree right = solve(ctx, right_units, depth - 1);
      const double value = left.value + right.value;
      if (value > best.value) {
        best.value = value;
        best.feature = f;
        best.threshold = thr;
        best.leaf = -1;
        best.left = std::make_unique<SubTree>(std::move(left));
        best.right = std::make_unique<SubTree>(std::move(right));
      }
    }
  }
  return best;
}

int emit(const SubTree& sub, const std::vector<int>& candidates, PolicyTree& tree) {
  const int id = static_cast<int>(tree.nodes.size());
  tree.nodes.emplace_back();
  if (sub.feature < 0) {
    tree.nodes[static_cast<std::size_t>(id)].leaf_treatment =
        candidates[static_cast<std::size_t>(sub.leaf)];
    return id;
  }
  tree.nodes[static_cast<std::size_t>(id)].feature = sub.feature;
  tree.nodes[static_cast<std::size_t>(id)].threshold = sub.threshold;
  const int l = emit(*sub.left, candidates, tree);
  const int r = emit(*sub.right, candidates, tree);
  tree.nodes[static_cast<std::size_t>(id)].left = l;
  tree.nodes[static_cast<std::size_t>(id)].right = r;
  return id;
}

}  // namespace

PolicyTree fit_policy_tree(const Eigen::MatrixXd& Z, const std::vector<std::string>& z_names,
                           const ScoreMatrix& scores, const PolicyTreeOptions& opt) {
  if (opt.depth < 1 || opt.depth > 3)
    throw ParameterError("fit_policy_tree: depth must be 1, 2 or 3");
  if (Z.cols() == 0) throw ParameterError("fit_policy_tree: no policy features");
  if (static_cast<std::size_t>(Z.rows()) != scores.n())
    throw ParameterError("fit_policy_tree: Z row count mismatch");
  std::vector<int> candidates = opt.treatments;
  if (candidates.empty())
    for (int d = 0; d < static_cast<int>(scores.n_treatments()); ++d) candidates.push_back(d);
  if (candidates.size() < 2)
    throw ParameterError("fit_policy_tree: need at least 2 candidate treatments");
  for (int d : candidates)
    if (d < 0 || d >= static_cast<int>(scores.n_treatments()))
      throw ParameterError("fit_policy_tree: candidate treatment out of range");

  const std::vector<std::size_t> kept = scores.kept_indices();
  if (kept.empty()) throw ValidityError("fit_policy_tree: no kept units");

  Eigen::MatrixXd Zk(static_cast<Eigen::Index>(kept.size()), Z.cols());
  Eigen::MatrixXd val(static_cast<Eigen::Index>(kept.size()),
                      static_cast<Eigen::Index>(candidates.size()));
  for (std::size_t i = 0; i < kept.size(); ++i) {
    Zk.row(static_cast<Eigen::Index>(i)) = Z.row(static_cast<Eigen::Index>(kept[i]));
    for (std::size_t t = 0; t < candidates.size(); ++t)
      val(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)) =
          scores.gamma(static_cast<Eigen::Index>(kept[i]), candidates[t]);
  }

  SearchContext ctx{Zk, val, 0, opt.eval_cap};
  std::vector<int> units(kept.size());
  std::iota(units.begin(), units.end(), 0);
  const SubTree solution = solve(ctx, units, opt.depth);

  PolicyTree tree;
  tree.depth = opt.depth;
  tree.feature_names = z_names;
  tree.treatment_labels = scores.treatment_labels;
  emit(solution, candidates, tree);
  return tree;
}

PolicyValidation validate_policy(const Eigen::MatrixXd& Z, const std::vector<std::string>& z_names,
                                 const ScoreMatrix& scores, const std::vector<int>& observed,
                                 const PolicyValidationOptions& opt) {
  if (opt.folds < 2) throw ParameterError("validate_policy: folds must be >= 2");
  const std::vector<std::size_t> kept = scores.kept_indices();
  if (kept.size() < static_cast<std::size_t>(opt.folds))
    throw ParameterError("validate_policy: more folds than kept units");

  // Fold the kept units, stratified by observed treatment so baselines exist.
  std::vector<int> kept_treat;
  for (auto i : kept) kept_treat.push_back(observed.empty() ? 0 : observed[i]);
  const FoldAssignment folds =
      make_folds(kept.size(), opt.folds, kept_treat, opt.seed, !observed.empty());

  PolicyValidation validation;
  validation.out_of_fold_assignment.assign(scores.n(), -1);

  for (int k = 0; k < opt.folds; ++k) {
    const std::vector<std::size_t> train_local = folds.complement_indices(k);
    const std::vector<std::size_t> held_local = folds.fold_indices(k);

    // Train-subset score matrix view.
    ScoreMatrix train_scores;
    train_scores.tilting = scores.tilting;
    train_scores.outcome_name = scores.outcome_name;
    train_scores.treatment_labels = scores.treatment_labels;
    train_scores.gamma.resize(static_cast<Eigen::Index>(train_local.size()),
                              scores.gamma.cols());
    train_scores.keep_mask.assign(train_local.size(), 1);
    Eigen::MatrixXd train_Z(static_cast<Eigen::Index>(train_local.size()), Z.cols());
    for (std::size_t i = 0; i < train_local.size(); ++i) {
      const auto g = static_cast<Eigen::Index>(kept[train_local[i]]);
      train_scores.gamma.row(static_cast<Eigen::Index>(i)) = scores.gamma.row(g);
      train_Z.row(static_cast<Eigen::Index>(i)) = Z.row(g);
    }

    const PolicyTree tree = fit_policy_tree(train_Z, z_names, train_scores, opt.tree);
    for (auto loc : held_local) {
      const auto g = static_cast<Eigen::Index>(kept[loc]);
      validation.out_of_fold_assignment[kept[loc]] = tree.assign_row(Z, g);
    }
  }

  double total = 0.0;
  for (auto i : kept)
    total += scores.gamma(static_cast<Eigen::Index>(i),
                          validation.out_of_fold_assignment[i]);
  validation.out_of_fold_value = total / static_cast<double>(kept.size());

  std::vector<std::string> baselines = opt.baselines;
  if (baselines.empty()) {
    for (const auto& label : scores.treatment_labels) baselines.push_back("all_" + label);
    if (!observed.empty()) baselines.push_back("observed");
  }

  for (const auto& baseline : baselines) {
    PolicyValidation::BaselineTest test;
    test.baseline = baseline;
    std::vector<double> diffs;
    for (auto i : kept) {
      const auto row = static_cast<Eigen::Index>(i);
      const double mine = scores.gamma(row, validation.out_of_fold_assignment[i]);
      double theirs = 0.0;
      if (baseline == "observed") {
        if (observed.empty()) throw ParameterError("validate_policy: no observed assignment");
        theirs = scores.gamma(row, observed[i]);
      } else if (baseline.rfind("all_", 0) == 0) {
        const std::string label = baseline.substr(4);
        int d = -1;
        for (std::size_t l = 0; l < scores.treatment_labels.size(); ++l)
          if (scores.treatment_labels[l] == label) d = static_cast<int>(l);
        if (d < 0) throw ParameterError("validate_policy: unknown baseline " + baseline);
        theirs = scores.gamma(row, d);
      } else {
        throw ParameterError("validate_policy: unknown baseline " + baseline);
      }
      diffs.push_back(mine - theirs);
    }
    const TTest t = one_sample_t(diffs);
    test.mean_diff = t.mean;
    test.se = t.se;
    test.t_stat = t.stat;
    test.p_value = t.p_value;
    test.n = t.n;
    test.degenerate = t.degenerate;
    validation.tests.push_back(std::move(test));
  }
  return validation;
}

double PiecewiseLinear::operator()(double x) const {
  if (points.empty()) throw ParameterError("piecewise: no points");
  if (x <= points.front().first) return points.front().second;
  if (x >= points.back().first) return points.back().second;
  for (std::size_t i = 0; i + 1 < points.size(); ++i) {
    const auto& [x0, y0] = points[i];
    const auto& [x1, y1] = points[i + 1];
    if (x <= x1) {
      if (x1 == x0) return y1;
      return y0 + (y1 - y0) * (x - x0) / (x1 - x0);
    }
  }
  return points.back().second;
}

bool PiecewiseLinear::non_increasing() const {
  for (std::size_t i = 0; i + 1 < points.size(); ++i)
    if (points[i + 1].second > points[i].second + 1e-12) return false;
  return true;
}

ReallocationResult reallocation_welfare(const ReallocationInputs& inputs) {
  if (inputs.sen_share_before < 0.0 || inputs.sen_share_before > 1.0)
    throw ParameterError("reallocation: SEN share outside [0,1]");
  if (inputs.n_classrooms <= 0.0 || inputs.avg_class_size <= 0.0)
    throw ParameterError("reallocation: classroom statistics must be positive");
  if (inputs.n_reallocated < 0.0)
    throw ParameterError("reallocation: negative reallocated count");
  if (!inputs.spillover_sen.non_increasing() || !inputs.spillover_nonsen.non_increasing())
    throw ParameterError("reallocation: spillover functions must be non-increasing");

  ReallocationResult result;
  result.delta_share = (inputs.n_reallocated / inputs.n_classrooms) / inputs.avg_class_size;
  result.new_share = inputs.sen_share_before + result.delta_share;
  if (result.new_share < 0.0 || result.new_share > 1.0)
    throw ParameterError("reallocation: new SEN share leaves [0,1]");

  result.direct_gain = result.delta_share * inputs.policy_gain_per_reallocated;
  result.spillover_sen =
      inputs.spillover_sen(result.new_share) - inputs.spillover_sen(inputs.sen_share_before);
  result.spillover_nonsen = inputs.spillover_nonsen(result.new_share) -
                            inputs.spillover_nonsen(inputs.sen_share_before);
  // Group weights stay at the pre-reallocation shares.
  result.spillover_total = inputs.sen_share_before * result.spillover_sen +
                           (1.0 - inputs.sen_share_before) * result.spillover_nonsen;
  result.combined = result.direct_gain + result.spillover_total;
  return result;
}

std::map<std::string, double> cost_table_default() {
  // CHF per student per year. Mainstream schooling is 20'000 (top of the
  // official 15-20k range); individual therapy adds 5'000 on top of the
  // mainstream seat; full segregation uses the 70-80k midpoint.
  return {
      {"no_sped", 20000.0},
      {"counseling", 20000.0},
      {"academic_support", 20000.0},
      {"individual_therapy", 25000.0},
      {"inclusion", 20000.0},
      {"semi_segregation", 24500.0},
      {"full_segregation", 75000.0},
  };
}

}  // namespace mtdml

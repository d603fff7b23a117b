#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <thread>

#include "mtdml/errors.hpp"
#include "mtdml/learners.hpp"

namespace mtdml {

double ForestModel::Tree::predict_row(const Eigen::MatrixXd& X, Eigen::Index row) const {
  int node = 0;
  while (feature[static_cast<std::size_t>(node)] >= 0) {
    const auto idx = static_cast<std::size_t>(node);
    const double v = X(row, feature[idx]);
    node = (v <= threshold[idx]) ? left[idx] : right[idx];
  }
  return value[static_cast<std::size_t>(node)];
}

Eigen::VectorXd ForestModel::predict(const Eigen::MatrixXd& X) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(X.rows());
  for (const auto& tree : trees)
    for (Eigen::Index i = 0; i < X.rows(); ++i) out(i) += tree.predict_row(X, i);
  if (!trees.empty()) out /= static_cast<double>(trees.size());
  return out;
}

nlohmann::json ForestModel::to_json() const {
  nlohmann::json j;
  j["type"] = "forest";
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& t : trees) {
    nlohmann::json tj;
    tj["feature"] = t.feature;
    tj["threshold"] = t.threshold;
    tj["left"] = t.left;
    tj["right"] = t.right;
    tj["value"] = t.value;
    arr.push_back(std::move(tj));
  }
  j["trees"] = std::move(arr);
  return j;
}

namespace {

struct TreeBuilder {
  const Eigen::MatrixXd& X;
  const Eigen::VectorXd& y;
  int mtry;
  int min_leaf;
  Rng& rng;
  ForestModel::Tree tree;

  int make_leaf(const std::vector<std::size_t>& rows) {
    double sum = 0.0;
    for (auto r : rows) sum += y(static_cast<Eigen::Index>(r));
    tree.feature.push_back(-1);
    tree.threshold.push_back(0.0);
    tree.left.push_back(-1);
    tree.right.push_back(-1);
    tree.value.push_back(sum / static_cast<double>(rows.size()));
    return static_cast<int>(tree.feature.size()) - 1;
  }

  int build(std::vector<std::size_t>& rows) {
    const std::size_t m = rows.size();
    if (m < 2 * static_cast<std::size_t>(min_leaf)) return make_leaf(rows);

    double sum = 0.0, sum2 = 0.0;
    for (auto r : rows) {
      const double v = y(static_cast<Eigen::Index>(r));
      sum += v;
      sum2 += v * v;
    }
    if (sum2 - sum * sum / static_cast<double>(m) < 1e-12) return make_leaf(rows);

    // mtry features without replacement
    const int p = static_cast<int>(X.cols());
    std::vector<int> feats(static_cast<std::size_t>(p));
    std::iota(feats.begin(), feats.end(), 0);
    for (int k = 0; k < std::min(mtry, p); ++k) {
      const std::size_t j =
          static_cast<std::size_t>(k) +
          static_cast<std::size_t>(rng.uniform_int(static_cast<std::uint64_t>(p - k)));
      std::swap(feats[static_cast<std::size_t>(k)], feats[j]);
    }

    int best_feat = -1;
    double best_thr = 0.0;
    double best_gain = -1.0;
    std::vector<std::pair<double, double>> vals(m);  // (x, y)
    for (int k = 0; k < std::min(mtry, p); ++k) {
      const int f = feats[static_cast<std::size_t>(k)];
      for (std::size_t i = 0; i < m; ++i)
        vals[i] = {X(static_cast<Eigen::Index>(rows[i]), f),
                   y(static_cast<Eigen::Index>(rows[i]))};
      std::sort(vals.begin(), vals.end());
      double left_sum = 0.0;
      for (std::size_t i = 0; i + 1 < m; ++i) {
        left_sum += vals[i].second;
        if (vals[i].first == vals[i + 1].first) continue;
        const std::size_t nl = i + 1, nr = m - nl;
        if (nl < static_cast<std::size_t>(min_leaf) || nr < static_cast<std::size_t>(min_leaf))
          continue;
        const double right_sum = sum - left_sum;
        const double gain = left_sum * left_sum / static_cast<double>(nl) +
                            right_sum * right_sum / static_cast<double>(nr);
        if (gain > best_gain) {
          best_gain = gain;
          best_feat = f;
          best_thr = 0.5 * (vals[i].first + vals[i + 1].first);
        }
      }
    }
    if (best_feat < 0) return make_leaf(rows);

    std::vector<std::size_t> left_rows, right_rows;
    for (auto r : rows)
      (X(static_cast<Eigen::Index>(r), best_feat) <= best_thr ? left_rows : right_rows)
          .push_back(r);
    if (left_rows.size() < static_cast<std::size_t>(min_leaf) ||
        right_rows.size() < static_cast<std::size_t>(min_leaf))
      return make_leaf(rows);

    const int node = static_cast<int>(tree.feature.size());
    tree.feature.push_back(best_feat);
    tree.threshold.push_back(best_thr);
    tree.left.push_back(-1);
    tree.right.push_back(-1);
    tree.value.push_back(0.0);
    const int l = build(left_rows);
    const int r = build(right_rows);
    tree.left[static_cast<std::size_t>(node)] = l;
    tree.right[static_cast<std::size_t>(node)] = r;
    return node;
  }
};

}  // namespace

ForestFit fit_random_forest(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                            const ForestOptions& opt) {
  const Eigen::Index n = X.rows();
  if (n < opt.min_leaf) throw ParameterError("random forest: n below min_leaf");
  if (y.size() != n) throw ParameterError("random forest: y length mismatch");
  if (opt.n_trees < 1) throw ParameterError("random forest: need at least one tree");

  const int p = static_cast<int>(X.cols());
  int mtry = opt.mtry;
  if (mtry <= 0)
    mtry = (opt.task == Task::probability)
               ? static_cast<int>(std::ceil(std::sqrt(static_cast<double>(p))))
               : static_cast<int>(std::ceil(static_cast<double>(p) / 3.0));
  mtry = std::max(1, std::min(mtry, p));

  auto forest = std::make_shared<ForestModel>();
  forest->trees.resize(static_cast<std::size_t>(opt.n_trees));
  std::vector<std::vector<std::uint8_t>> inbag(
      static_cast<std::size_t>(opt.n_trees),
      std::vector<std::uint8_t>(static_cast<std::size_t>(n), 0));

  auto grow = [&](int t) {
    Rng rng(Rng::derive_stream(opt.seed, 0xf04e57ULL + static_cast<std::uint64_t>(t)));
    std::vector<std::size_t> rows;
    rows.reserve(static_cast<std::size_t>(n));
    auto& bag = inbag[static_cast<std::size_t>(t)];
    for (Eigen::Index i = 0; i < n; ++i) {
      const std::size_t r =
          static_cast<std::size_t>(rng.uniform_int(static_cast<std::uint64_t>(n)));
      rows.push_back(r);
      bag[r] = 1;
    }
    TreeBuilder builder{X, y, mtry, opt.min_leaf, rng, {}};
    builder.build(rows);
    forest->trees[static_cast<std::size_t>(t)] = std::move(builder.tree);
  };

  const int threads = std::max(1, opt.threads);
  if (threads == 1 || opt.n_trees == 1) {
    for (int t = 0; t < opt.n_trees; ++t) grow(t);
  } else {
    std::vector<std::thread> pool;
    std::atomic<int> next{0};
    for (int w = 0; w < threads; ++w)
      pool.emplace_back([&] {
        for (int t = next.fetch_add(1); t < opt.n_trees; t = next.fetch_add(1)) grow(t);
      });
    for (auto& th : pool) th.join();
  }

  ForestFit fit;
  fit.oob_prediction = Eigen::VectorXd::Zero(n);
  fit.oob_count.assign(static_cast<std::size_t>(n), 0);
  for (int t = 0; t < opt.n_trees; ++t) {
    const auto& tree = forest->trees[static_cast<std::size_t>(t)];
    for (Eigen::Index i = 0; i < n; ++i) {
      if (inbag[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)]) continue;
      fit.oob_prediction(i) += tree.predict_row(X, i);
      fit.oob_count[static_cast<std::size_t>(i)]++;
    }
  }
  for (Eigen::Index i = 0; i < n; ++i)
    if (fit.oob_count[static_cast<std::size_t>(i)] > 0)
      fit.oob_prediction(i) /= static_cast<double>(fit.oob_count[static_cast<std::size_t>(i)]);

  fit.model = FittedModel{LearnerSpec{}, opt.task, forest, false};
  return fit;
}

}  // namespace mtdml

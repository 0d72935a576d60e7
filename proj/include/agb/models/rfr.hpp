#pragma once

// Random forest regression: bagged CART trees with variance-reduction splits.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "agb/core/error.hpp"
#include "agb/core/parallel.hpp"
#include "agb/core/rng.hpp"
#include "agb/models/matrix.hpp"

namespace agb::models {

struct RfrParams {
  int n_trees = 100;
  int max_depth = -1;  // -1: unlimited
  int min_samples_leaf = 2;
  int features_per_split = 0;  // 0: ceil(sqrt(d))
  bool bootstrap = true;
  std::uint64_t seed = 7;

  void validate() const {
    if (n_trees < 1) throw DomainError("n_trees must be at least 1");
    if (min_samples_leaf < 1) throw DomainError("min_samples_leaf must be at least 1");
    if (features_per_split < 0) throw DomainError("features_per_split must be non-negative");
  }
  std::size_t mtry(std::size_t dims) const noexcept {
    if (features_per_split > 0) return std::min<std::size_t>(static_cast<std::size_t>(features_per_split), dims);
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(dims)))));
  }
};

struct TreeNode {
  std::int32_t feature = -1;  // -1 marks a leaf
  double threshold = 0.0;     // x[feature] <= threshold goes left
  std::int32_t left = -1;
  std::int32_t right = -1;
  double value = 0.0;         // mean target of the node's samples
};

struct SplitChoice {
  std::size_t feature = 0;
  double threshold = 0.0;
  double score = 0.0;  // sum_L^2/n_L + sum_R^2/n_R; larger is better
  std::size_t n_left = 0;
};

/// Best variance-reduction split of `idx` on one feature, honouring the
/// minimum leaf size. Thresholds sit midway between consecutive distinct
/// values; ties keep the lowest threshold.
inline std::optional<SplitChoice> best_split_on(const Matrix& x, std::span<const double> y,
                                                std::span<const std::size_t> idx, std::size_t feature,
                                                std::size_t min_leaf) {
  std::vector<std::size_t> order(idx.begin(), idx.end());
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return x(a, feature) < x(b, feature); });
  double total = 0.0;
  for (auto i : order) total += y[i];
  const std::size_t n = order.size();
  std::optional<SplitChoice> best;
  double left_sum = 0.0;
  for (std::size_t k = 0; k + 1 < n; ++k) {
    left_sum += y[order[k]];
    const std::size_t n_left = k + 1;
    const double a = x(order[k], feature);
    const double b = x(order[k + 1], feature);
    if (!(a < b)) continue;
    if (n_left < min_leaf || n - n_left < min_leaf) continue;
    const double right_sum = total - left_sum;
    const double score = left_sum * left_sum / static_cast<double>(n_left) +
                         right_sum * right_sum / static_cast<double>(n - n_left);
    if (!best || score > best->score) {
      double thr = 0.5 * (a + b);
      if (!(thr < b)) thr = a;
      best = SplitChoice{feature, thr, score, n_left};
    }
  }
  return best;
}

class RegressionTree {
 public:
  RegressionTree() = default;
  explicit RegressionTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {}

  double predict(std::span<const double> x) const {
    std::int32_t i = 0;
    while (nodes_[static_cast<std::size_t>(i)].feature >= 0) {
      const TreeNode& n = nodes_[static_cast<std::size_t>(i)];
      i = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
    }
    return nodes_[static_cast<std::size_t>(i)].value;
  }

  const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }

  /// Grows a tree on the given sample indices (duplicates allowed for
  /// bootstrap). Features are examined in a random order; the first mtry
  /// are always searched and the search continues past mtry only until some
  /// valid split is found.
  static RegressionTree grow(const Matrix& x, std::span<const double> y, std::vector<std::size_t> idx,
                             const RfrParams& p, RandomStream& rng) {
    RegressionTree t;
    t.grow_node(x, y, idx, 0, p, rng);
    return t;
  }

 private:
  std::int32_t grow_node(const Matrix& x, std::span<const double> y, std::vector<std::size_t>& idx, int depth,
                         const RfrParams& p, RandomStream& rng) {
    const auto me = static_cast<std::int32_t>(nodes_.size());
    nodes_.push_back({});
    double sum = 0.0;
    for (auto i : idx) sum += y[i];
    const double mean = sum / static_cast<double>(idx.size());
    nodes_[static_cast<std::size_t>(me)].value = mean;

    const auto min_leaf = static_cast<std::size_t>(p.min_samples_leaf);
    bool pure = true;
    for (auto i : idx)
      if (y[i] != y[idx.front()]) pure = false;
    if (pure || idx.size() < 2 * min_leaf || (p.max_depth >= 0 && depth >= p.max_depth)) return me;

    std::vector<std::size_t> features(x.cols);
    std::iota(features.begin(), features.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(features));
    const std::size_t mtry = p.mtry(x.cols);
    std::optional<SplitChoice> best;
    for (std::size_t k = 0; k < features.size(); ++k) {
      if (k >= mtry && best) break;
      auto s = best_split_on(x, y, idx, features[k], min_leaf);
      if (s && (!best || s->score > best->score)) best = s;
    }
    // No improvement over the parent: keep the leaf.
    if (!best || best->score <= sum * sum / static_cast<double>(idx.size()) * (1.0 + 1e-15)) return me;

    std::vector<std::size_t> left, right;
    for (auto i : idx) (x(i, best->feature) <= best->threshold ? left : right).push_back(i);
    idx.clear();
    idx.shrink_to_fit();
    const std::int32_t l = grow_node(x, y, left, depth + 1, p, rng);
    const std::int32_t r = grow_node(x, y, right, depth + 1, p, rng);
    TreeNode& n = nodes_[static_cast<std::size_t>(me)];
    n.feature = static_cast<std::int32_t>(best->feature);
    n.threshold = best->threshold;
    n.left = l;
    n.right = r;
    return me;
  }

  std::vector<TreeNode> nodes_;
};

class RandomForest {
 public:
  RandomForest() = default;
  RandomForest(std::size_t dims, std::vector<RegressionTree> trees) : dims_(dims), trees_(std::move(trees)) {}

  double predict(std::span<const double> x) const {
    if (x.size() != dims_) throw DomainError("feature dimension does not match the forest");
    double s = 0.0;
    for (const auto& t : trees_) s += t.predict(x);
    return s / static_cast<double>(trees_.size());
  }

  std::size_t dims() const noexcept { return dims_; }
  const std::vector<RegressionTree>& trees() const noexcept { return trees_; }

 private:
  std::size_t dims_ = 0;
  std::vector<RegressionTree> trees_;
};

/// Trees are grown independently from per-tree sub-streams, so the forest is
/// identical for any thread count.
inline RandomForest train_rfr(const Matrix& x, std::span<const double> y, const RfrParams& p, unsigned threads = 1) {
  p.validate();
  check_training_set(x, y);
  const RandomStream root(p.seed, "rfr");
  std::vector<RegressionTree> trees(static_cast<std::size_t>(p.n_trees));
  parallel_for(trees.size(), threads, [&](std::size_t t) {
    RandomStream rng = root.derive("tree", t);
    std::vector<std::size_t> idx(x.rows);
    if (p.bootstrap) {
      for (auto& i : idx) i = static_cast<std::size_t>(rng.below(x.rows));
      std::sort(idx.begin(), idx.end());
    } else {
      std::iota(idx.begin(), idx.end(), std::size_t{0});
    }
    trees[t] = RegressionTree::grow(x, y, std::move(idx), p, rng);
  });
  return RandomForest(x.cols, std::move(trees));
}

}  // namespace agb::models

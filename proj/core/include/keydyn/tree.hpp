#pragma once

#include <cstddef>
#include <vector>

#include "keydyn/rng.hpp"

namespace keydyn::tree {

struct Node {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;  // leaf payload: mean of targets reaching it
  std::size_t n = 0;
};

struct Tree {
  std::vector<Node> nodes;  // nodes[0] is the root
  std::size_t leaf_of(const std::vector<double>& x) const;
  double predict(const std::vector<double>& x) const;
};

struct GrowConfig {
  int max_depth = 8;
  int min_leaf = 1;
  // Features sampled per split; 0 means all.
  int n_features = 0;
  // false: Gini impurity on binary targets; true: variance reduction.
  bool regression = false;
};

// Gini impurity of a binary label multiset: 1 - p₊² - p₋² (0 when empty).
double gini(std::size_t pos, std::size_t neg);

// Grows a binary CART over rows idx of X. Splits use midpoint thresholds
// between adjacent distinct values ("x <= t" goes left); among equal-gain
// splits the lowest feature index, then lowest threshold, wins.
Tree grow_tree(const std::vector<std::vector<double>>& X,
               const std::vector<double>& y,
               const std::vector<std::size_t>& idx, const GrowConfig& config,
               Rng& rng);

}  // namespace keydyn::tree

#pragma once

#include <Eigen/Dense>
#include <compare>
#include <cstdint>
#include <vector>

namespace rkforge {

struct ButcherTableau;

/// A rooted tree in canonical form. Children are ordered so that the
/// depth-first level sequence of the whole tree is lexicographically
/// maximal; two trees are isomorphic iff their level sequences are equal.
class RootedTree {
 public:
  /// Single vertex.
  static RootedTree leaf();

  /// Root with the given subtrees; canonicalizes the child order.
  static RootedTree join(std::vector<RootedTree> children);

  /// Rebuild from a depth-first level sequence (root depth 0).
  static RootedTree from_level_sequence(const std::vector<int>& levels);

  int order() const { return order_; }
  std::int64_t density() const { return density_; }    // gamma
  std::int64_t symmetry() const { return symmetry_; }  // sigma

  const std::vector<int>& level_sequence() const { return levels_; }

  /// Materializes the child subtrees (canonical order).
  std::vector<RootedTree> children() const;

  friend bool operator==(const RootedTree& a, const RootedTree& b) {
    return a.levels_ == b.levels_;
  }
  friend std::strong_ordering operator<=>(const RootedTree& a, const RootedTree& b) {
    return a.levels_ <=> b.levels_;
  }

 private:
  RootedTree() = default;
  std::vector<int> levels_;
  int order_ = 0;
  std::int64_t density_ = 1;
  std::int64_t symmetry_ = 1;
};

/// All rooted trees grouped by order: result[p-1] holds the trees with p
/// vertices, each group sorted descending by level sequence. The counts are
/// 1, 1, 2, 4, 9, 20, 48, ... for p = 1, 2, 3, ...
/// Throws std::invalid_argument unless 1 <= max_order <= 10.
const std::vector<std::vector<RootedTree>>& enumerate_trees(int max_order);

inline std::int64_t gamma(const RootedTree& t) { return t.density(); }
inline std::int64_t sigma(const RootedTree& t) { return t.symmetry(); }

/// Elementary weight vector Phi(t): Phi(leaf) = 1, and for a root with
/// children t_1..t_m, Phi = prod_k A * Phi(t_k) taken element-wise.
Eigen::VectorXd elementary_weight(const ButcherTableau& tableau, const RootedTree& t);

/// tau(t, x, theta) = (x . Phi(t) - theta^p / gamma(t)) / sigma(t) with
/// p = order(t). Values of theta outside [0, 1] are permitted.
double tau(const RootedTree& t, const Eigen::VectorXd& x, double theta,
           const ButcherTableau& tableau);

/// T_p(x, theta): root-sum-square of tau over all rooted trees of order
/// exactly p.
double local_error_norm(const ButcherTableau& tableau, const Eigen::VectorXd& x,
                        double theta, int p);

/// gamma, sigma and Phi for every tree of order <= max_order, evaluated
/// against one tableau. Entry order matches enumerate_trees. Shared
/// subtrees are evaluated once, so this is the form metric scans want.
struct TreeFunctionals {
  struct Entry {
    std::int64_t density;
    std::int64_t symmetry;
    Eigen::VectorXd phi;
  };
  std::vector<std::vector<Entry>> by_order;  // [p-1] -> trees of order p
};
TreeFunctionals tree_functionals(const ButcherTableau& tableau, int max_order);

}  // namespace rkforge

#include "rkforge/rooted_trees.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>

#include "rkforge/tableau.hpp"

namespace rkforge {

namespace {

constexpr int kMaxOrder = 10;

}  // namespace

RootedTree RootedTree::leaf() {
  RootedTree t;
  t.levels_ = {0};
  t.order_ = 1;
  t.density_ = 1;
  t.symmetry_ = 1;
  return t;
}

RootedTree RootedTree::join(std::vector<RootedTree> children) {
  // Sorting child level sequences descending yields the lexicographically
  // maximal depth-first sequence for the joined tree.
  std::sort(children.begin(), children.end(),
            [](const RootedTree& a, const RootedTree& b) { return b < a; });
  RootedTree t;
  t.levels_.push_back(0);
  t.order_ = 1;
  t.density_ = 1;
  t.symmetry_ = 1;
  for (std::size_t i = 0; i < children.size(); ++i) {
    const RootedTree& ch = children[i];
    for (int lv : ch.levels_) t.levels_.push_back(lv + 1);
    t.order_ += ch.order_;
    t.density_ *= ch.density_;
    t.symmetry_ *= ch.symmetry_;
  }
  t.density_ *= t.order_;
  // Multiplicity factors m! over runs of identical children.
  std::size_t run = 1;
  for (std::size_t i = 1; i <= children.size(); ++i) {
    if (i < children.size() && children[i] == children[i - 1]) {
      ++run;
      t.symmetry_ *= static_cast<std::int64_t>(run);
    } else {
      run = 1;
    }
  }
  return t;
}

std::vector<RootedTree> RootedTree::children() const {
  std::vector<RootedTree> out;
  std::size_t i = 1;
  while (i < levels_.size()) {
    std::size_t j = i + 1;
    while (j < levels_.size() && levels_[j] > 1) ++j;
    std::vector<int> sub(levels_.begin() + i, levels_.begin() + j);
    for (int& lv : sub) --lv;
    out.push_back(from_level_sequence(sub));
    i = j;
  }
  return out;
}

RootedTree RootedTree::from_level_sequence(const std::vector<int>& levels) {
  if (levels.empty() || levels[0] != 0) {
    throw std::invalid_argument("level sequence must start at depth 0");
  }
  if (levels.size() == 1) return leaf();
  std::vector<RootedTree> kids;
  std::size_t i = 1;
  while (i < levels.size()) {
    if (levels[i] != 1) throw std::invalid_argument("malformed level sequence");
    std::size_t j = i + 1;
    while (j < levels.size() && levels[j] > 1) ++j;
    std::vector<int> sub(levels.begin() + i, levels.begin() + j);
    for (int& lv : sub) --lv;
    kids.push_back(from_level_sequence(sub));
    i = j;
  }
  return join(std::move(kids));
}

namespace {

// Generates all canonical trees of order p given the groups of smaller
// order, as non-increasing child multisets.
void extend_children(const std::vector<std::vector<RootedTree>>& groups, int remaining,
                     int max_order_bound, int max_index_bound,
                     std::vector<RootedTree>& current, std::vector<RootedTree>& out) {
  if (remaining == 0) {
    out.push_back(RootedTree::join(current));
    return;
  }
  int top = std::min(remaining, max_order_bound);
  for (int ord = top; ord >= 1; --ord) {
    const auto& pool = groups[ord - 1];
    int start = (ord == max_order_bound) ? max_index_bound : 0;
    for (int idx = start; idx < static_cast<int>(pool.size()); ++idx) {
      current.push_back(pool[idx]);
      extend_children(groups, remaining - ord, ord, idx, current, out);
      current.pop_back();
    }
  }
}

std::vector<std::vector<RootedTree>> build_groups(int max_order) {
  std::vector<std::vector<RootedTree>> groups;
  groups.push_back({RootedTree::leaf()});
  for (int p = 2; p <= max_order; ++p) {
    std::vector<RootedTree> out;
    std::vector<RootedTree> current;
    extend_children(groups, p - 1, p - 1, 0, current, out);
    std::sort(out.begin(), out.end(), [](const RootedTree& a, const RootedTree& b) { return b < a; });
    groups.push_back(std::move(out));
  }
  return groups;
}

// Building all 10 orders up front is ~1200 small trees; references stay valid.
const std::vector<std::vector<RootedTree>>& cached_groups() {
  static const std::vector<std::vector<RootedTree>> cache = build_groups(kMaxOrder);
  return cache;
}

std::mutex pool_mutex;

// Pool of all distinct subtrees appearing in trees up to max_order, in an
// order where children precede parents. phi/A*phi are evaluated once per
// pool node and shared across trees.
struct TreePool {
  struct Node {
    std::vector<int> children;  // pool ids
    std::int64_t density, symmetry;
  };
  std::vector<Node> nodes;
  std::vector<std::vector<int>> ids_by_order;  // [p-1] -> pool id per enumerated tree
};

int intern(const RootedTree& t, std::map<std::vector<int>, int>& index, TreePool& pool) {
  auto it = index.find(t.level_sequence());
  if (it != index.end()) return it->second;
  TreePool::Node node;
  for (const RootedTree& ch : t.children()) node.children.push_back(intern(ch, index, pool));
  node.density = t.density();
  node.symmetry = t.symmetry();
  pool.nodes.push_back(std::move(node));
  int id = static_cast<int>(pool.nodes.size()) - 1;
  index.emplace(t.level_sequence(), id);
  return id;
}

const TreePool& cached_pool(int max_order) {
  static std::map<int, TreePool> pools;
  const auto& groups = cached_groups();
  std::lock_guard<std::mutex> lock(pool_mutex);
  auto it = pools.find(max_order);
  if (it != pools.end()) return it->second;
  TreePool pool;
  std::map<std::vector<int>, int> index;
  for (int p = 1; p <= max_order; ++p) {
    std::vector<int> ids;
    for (const RootedTree& t : groups[p - 1]) ids.push_back(intern(t, index, pool));
    pool.ids_by_order.push_back(std::move(ids));
  }
  return pools.emplace(max_order, std::move(pool)).first->second;
}

}  // namespace

const std::vector<std::vector<RootedTree>>& enumerate_trees(int max_order) {
  if (max_order < 1 || max_order > kMaxOrder) {
    throw std::invalid_argument("tree order must be in [1, 10]");
  }
  static std::array<std::vector<std::vector<RootedTree>>, kMaxOrder> trimmed;
  static std::mutex trim_mutex;
  const auto& all = cached_groups();
  std::lock_guard<std::mutex> lock(trim_mutex);
  auto& slot = trimmed[max_order - 1];
  if (slot.empty()) slot.assign(all.begin(), all.begin() + max_order);
  return slot;
}

Eigen::VectorXd elementary_weight(const ButcherTableau& tableau, const RootedTree& t) {
  Eigen::VectorXd phi = Eigen::VectorXd::Ones(tableau.s);
  for (const RootedTree& ch : t.children()) {
    phi = phi.cwiseProduct((tableau.A * elementary_weight(tableau, ch)).eval());
  }
  return phi;
}

double tau(const RootedTree& t, const Eigen::VectorXd& x, double theta,
           const ButcherTableau& tableau) {
  if (x.size() != tableau.s) throw std::invalid_argument("weight vector length != stage count");
  const double dot = x.dot(elementary_weight(tableau, t));
  const int p = t.order();
  return (dot - std::pow(theta, p) / static_cast<double>(t.density())) /
         static_cast<double>(t.symmetry());
}

TreeFunctionals tree_functionals(const ButcherTableau& tableau, int max_order) {
  if (max_order < 1 || max_order > kMaxOrder) {
    throw std::invalid_argument("tree order must be in [1, 10]");
  }
  const TreePool& pool = cached_pool(max_order);
  const int n = static_cast<int>(pool.nodes.size());
  std::vector<Eigen::VectorXd> phi(n), a_phi(n);
  for (int id = 0; id < n; ++id) {
    Eigen::VectorXd w = Eigen::VectorXd::Ones(tableau.s);
    for (int ch : pool.nodes[id].children) w = w.cwiseProduct(a_phi[ch]);
    phi[id] = std::move(w);
    a_phi[id] = tableau.A * phi[id];
  }
  TreeFunctionals out;
  out.by_order.resize(pool.ids_by_order.size());
  for (std::size_t p = 0; p < pool.ids_by_order.size(); ++p) {
    for (int id : pool.ids_by_order[p]) {
      out.by_order[p].push_back(
          {pool.nodes[id].density, pool.nodes[id].symmetry, phi[id]});
    }
  }
  return out;
}

double local_error_norm(const ButcherTableau& tableau, const Eigen::VectorXd& x,
                        double theta, int p) {
  if (x.size() != tableau.s) throw std::invalid_argument("weight vector length != stage count");
  TreeFunctionals fn = tree_functionals(tableau, p);
  const double theta_p = std::pow(theta, p);
  double sum = 0.0;
  for (const auto& e : fn.by_order[p - 1]) {
    const double t = (x.dot(e.phi) - theta_p / static_cast<double>(e.density)) /
                     static_cast<double>(e.symmetry);
    sum += t * t;
  }
  return std::sqrt(sum);
}

}  // namespace rkforge

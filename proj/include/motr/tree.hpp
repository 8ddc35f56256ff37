#pragma once

#include <Eigen/Dense>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "motr/data.hpp"
#include "motr/random.hpp"

namespace motr {

// Routing: rows with x[feature] < threshold go to the right child.
struct SplitRule {
  int feature = 0;
  double threshold = 0.0;

  bool goes_right(double x) const { return x < threshold; }
  friend bool operator==(const SplitRule&, const SplitRule&) = default;
};

// Leaf output is coef[0] + sum_k coef[k+1] * x[covariates[k]]. A constant leaf
// is the intercept-only case.
struct LeafParams {
  std::vector<int> covariates;
  std::vector<double> coef{0.0};

  template <typename Row>
  double evaluate(const Row& x) const {
    double out = coef[0];
    for (std::size_t k = 0; k < covariates.size(); ++k) out += coef[k + 1] * x[covariates[k]];
    return out;
  }
};

struct Node {
  int parent = -1;
  int left = -1;   // condition false
  int right = -1;  // condition true
  int depth = 0;
  SplitRule rule;
  LeafParams leaf;

  bool is_terminal() const { return left < 0; }
};

class Tree {
 public:
  Tree();  // stump

  const std::vector<Node>& nodes() const { return nodes_; }
  const Node& node(int id) const { return nodes_.at(static_cast<std::size_t>(id)); }
  Node& node(int id) { return nodes_.at(static_cast<std::size_t>(id)); }
  int root() const { return 0; }

  std::vector<int> terminals() const;
  std::vector<int> internals() const;
  // Internal nodes whose two children are both terminal.
  std::vector<int> prunable() const;
  std::size_t terminal_count() const;
  std::size_t internal_count() const { return nodes_.size() - terminal_count(); }
  int max_depth() const;

  // Split terminal `leaf` into two new terminals; returns {left, right}.
  std::pair<int, int> grow(int leaf, SplitRule rule);
  // Collapse internal node `id` (both children terminal) into a terminal.
  // Node ids are renumbered; returns the id of the collapsed node afterwards.
  int prune(int id);

  template <typename Row>
  int find_leaf(const Row& x) const {
    int id = 0;
    while (!nodes_[static_cast<std::size_t>(id)].is_terminal()) {
      const Node& nd = nodes_[static_cast<std::size_t>(id)];
      id = nd.rule.goes_right(x[nd.rule.feature]) ? nd.right : nd.left;
    }
    return id;
  }

  // Checks structural invariants; returns an error message or empty.
  std::string check() const;

 private:
  void compact();
  std::vector<Node> nodes_;
};

// Row-to-terminal assignment of the training data.
struct Partition {
  std::vector<int> leafOf;  // row -> terminal node id
  std::vector<int> counts;  // node id -> rows (0 for internal nodes)

  int count(int leaf) const { return counts.at(static_cast<std::size_t>(leaf)); }
};

enum class MoveKind { Grow = 0, Prune = 1, Change = 2, Swap = 3 };
inline constexpr int kMoveKinds = 4;
std::string to_string(MoveKind kind);

struct MoveProposal {
  MoveKind kind = MoveKind::Grow;
  bool valid = false;
  Tree candidate;
  Partition candidatePartition;
  std::vector<int> affectedLeaves;  // terminal ids in the candidate tree
  // log q(T*->T) - log q(T->T*) for grow/prune; zero for change/swap.
  double logTransitionCorrection = 0.0;
};

struct ProposalContext {
  const Eigen::MatrixXd& features;
  const SplitDictionary& dict;
  const std::vector<double>& splitProbs;
  int nMin = 5;
};

double log_tree_prior(const Tree& tree, double alpha, double betaDepth);

// Change in log prior from turning a terminal at `depth` into an internal
// node with two terminal children.
double log_prior_grow_delta(int depth, double alpha, double betaDepth);

Partition partition(const Tree& tree, const Eigen::MatrixXd& features);

// Draw a split feature from splitProbs restricted to splittable features.
std::optional<int> draw_split_feature(const SplitDictionary& dict, const std::vector<double>& splitProbs, Rng& rng);

MoveProposal propose_move(const Tree& tree, const Partition& current, const ProposalContext& ctx, Rng& rng,
                          std::optional<MoveKind> forced = std::nullopt);

std::set<int> split_covariates(const Tree& tree);
std::set<int> ancestor_covariates(const Tree& tree, int leaf);

nlohmann::json tree_to_json(const Tree& tree);
Tree tree_from_json(const nlohmann::json& j);

}  // namespace motr

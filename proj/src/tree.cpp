#include "motr/tree.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>

#include "motr/kernels.hpp"

namespace motr {

std::string to_string(MoveKind kind) {
  switch (kind) {
    case MoveKind::Grow: return "grow";
    case MoveKind::Prune: return "prune";
    case MoveKind::Change: return "change";
    case MoveKind::Swap: return "swap";
  }
  return "unknown";
}

Tree::Tree() { nodes_.emplace_back(); }

std::vector<int> Tree::terminals() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].is_terminal()) out.push_back(static_cast<int>(i));
  }
  return out;
}

std::vector<int> Tree::internals() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (!nodes_[i].is_terminal()) out.push_back(static_cast<int>(i));
  }
  return out;
}

std::vector<int> Tree::prunable() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Node& nd = nodes_[i];
    if (!nd.is_terminal() && node(nd.left).is_terminal() && node(nd.right).is_terminal()) {
      out.push_back(static_cast<int>(i));
    }
  }
  return out;
}

std::size_t Tree::terminal_count() const {
  std::size_t count = 0;
  for (const Node& nd : nodes_) count += nd.is_terminal() ? 1 : 0;
  return count;
}

int Tree::max_depth() const {
  int d = 0;
  for (const Node& nd : nodes_) d = std::max(d, nd.depth);
  return d;
}

std::pair<int, int> Tree::grow(int leaf, SplitRule rule) {
  if (!node(leaf).is_terminal()) throw std::logic_error("grow: node is not terminal");
  const int depth = node(leaf).depth;
  const int left = static_cast<int>(nodes_.size());
  const int right = left + 1;
  Node child;
  child.parent = leaf;
  child.depth = depth + 1;
  nodes_.push_back(child);
  nodes_.push_back(child);
  Node& parent = node(leaf);
  parent.left = left;
  parent.right = right;
  parent.rule = rule;
  parent.leaf = LeafParams{};
  return {left, right};
}

int Tree::prune(int id) {
  Node& nd = node(id);
  if (nd.is_terminal() || !node(nd.left).is_terminal() || !node(nd.right).is_terminal()) {
    throw std::logic_error("prune: node must have two terminal children");
  }
  // Detach children; compact() drops unreachable nodes.
  node(nd.left).parent = -2;
  node(nd.right).parent = -2;
  nd.left = -1;
  nd.right = -1;
  nd.leaf = LeafParams{};
  std::vector<int> newId(nodes_.size(), -1);
  // Preorder numbering, identical to compact()'s ordering.
  int next = 0;
  std::function<void(int)> visit = [&](int v) {
    newId[static_cast<std::size_t>(v)] = next++;
    if (!node(v).is_terminal()) {
      visit(node(v).left);
      visit(node(v).right);
    }
  };
  visit(0);
  compact();
  return newId[static_cast<std::size_t>(id)];
}

void Tree::compact() {
  std::vector<Node> out;
  out.reserve(nodes_.size());
  std::function<int(int, int, int)> copy = [&](int v, int parent, int depth) -> int {
    const int id = static_cast<int>(out.size());
    out.push_back(nodes_[static_cast<std::size_t>(v)]);
    out.back().parent = parent;
    out.back().depth = depth;
    if (!nodes_[static_cast<std::size_t>(v)].is_terminal()) {
      int l = copy(nodes_[static_cast<std::size_t>(v)].left, id, depth + 1);
      int r = copy(nodes_[static_cast<std::size_t>(v)].right, id, depth + 1);
      out[static_cast<std::size_t>(id)].left = l;
      out[static_cast<std::size_t>(id)].right = r;
    }
    return id;
  };
  copy(0, -1, 0);
  nodes_ = std::move(out);
}

std::string Tree::check() const {
  if (nodes_.empty()) return "empty tree";
  if (nodes_[0].parent != -1 || nodes_[0].depth != 0) return "bad root";
  std::vector<int> seen(nodes_.size(), 0);
  std::vector<int> stack{0};
  std::size_t internal = 0, terminal = 0;
  while (!stack.empty()) {
    int v = stack.back();
    stack.pop_back();
    if (v < 0 || static_cast<std::size_t>(v) >= nodes_.size()) return "child id out of range";
    if (seen[static_cast<std::size_t>(v)]++) return "node reached twice";
    const Node& nd = nodes_[static_cast<std::size_t>(v)];
    if ((nd.left < 0) != (nd.right < 0)) return "node with exactly one child";
    if (nd.is_terminal()) {
      ++terminal;
      if (nd.leaf.coef.size() != nd.leaf.covariates.size() + 1) return "leaf coefficient size mismatch";
      continue;
    }
    ++internal;
    for (int c : {nd.left, nd.right}) {
      if (c < 0 || static_cast<std::size_t>(c) >= nodes_.size()) return "child id out of range";
      const Node& child = nodes_[static_cast<std::size_t>(c)];
      if (child.parent != v) return "child parent link broken";
      if (child.depth != nd.depth + 1) return "depth inconsistent";
    }
    stack.push_back(nd.left);
    stack.push_back(nd.right);
  }
  if (internal + terminal != nodes_.size()) return "unreachable nodes present";
  if (terminal != internal + 1) return "terminal count != internal count + 1";
  return {};
}

double log_tree_prior(const Tree& tree, double alpha, double betaDepth) {
  double lp = 0.0;
  for (const Node& nd : tree.nodes()) {
    const double split = alpha * std::pow(1.0 + nd.depth, -betaDepth);
    lp += nd.is_terminal() ? std::log1p(-split) : std::log(split);
  }
  return lp;
}

double log_prior_grow_delta(int depth, double alpha, double betaDepth) {
  const double here = alpha * std::pow(1.0 + depth, -betaDepth);
  const double below = alpha * std::pow(2.0 + depth, -betaDepth);
  return std::log(here) + 2.0 * std::log1p(-below) - std::log1p(-here);
}

Partition partition(const Tree& tree, const Eigen::MatrixXd& features) {
  Partition part;
  part.leafOf.resize(static_cast<std::size_t>(features.rows()));
  kernels::route_rows(tree, features, part.leafOf);
  part.counts.assign(tree.nodes().size(), 0);
  for (int leaf : part.leafOf) ++part.counts[static_cast<std::size_t>(leaf)];
  return part;
}

std::optional<int> draw_split_feature(const SplitDictionary& dict, const std::vector<double>& splitProbs, Rng& rng) {
  std::vector<double> weights(dict.feature_count(), 0.0);
  bool any = false;
  for (std::size_t j = 0; j < weights.size(); ++j) {
    if (dict.splittable(j) && splitProbs[j] > 0.0) {
      weights[j] = splitProbs[j];
      any = true;
    }
  }
  if (!any) {
    // Probability mass collapsed onto unsplittable features; fall back to uniform.
    for (std::size_t j = 0; j < weights.size(); ++j) {
      if (dict.splittable(j)) {
        weights[j] = 1.0;
        any = true;
      }
    }
  }
  if (!any) return std::nullopt;
  return static_cast<int>(rng.categorical(weights));
}

namespace {

SplitRule draw_rule(int feature, const SplitDictionary& dict, Rng& rng) {
  const auto& vals = dict.values[static_cast<std::size_t>(feature)];
  return SplitRule{feature, vals[rng.index(vals.size())]};
}

bool terminals_meet_minimum(const Tree& tree, const Partition& part, int nMin) {
  for (int leaf : tree.terminals()) {
    if (part.count(leaf) < nMin) return false;
  }
  return true;
}

void collect_terminals(const Tree& tree, int v, std::vector<int>& out) {
  if (tree.node(v).is_terminal()) {
    out.push_back(v);
    return;
  }
  collect_terminals(tree, tree.node(v).left, out);
  collect_terminals(tree, tree.node(v).right, out);
}

}  // namespace

MoveProposal propose_move(const Tree& tree, const Partition& current, const ProposalContext& ctx, Rng& rng,
                          std::optional<MoveKind> forced) {
  MoveProposal prop;
  prop.kind = forced ? *forced : static_cast<MoveKind>(rng.index(kMoveKinds));
  prop.candidate = tree;

  switch (prop.kind) {
    case MoveKind::Grow: {
      const auto terms = tree.terminals();
      const int leaf = terms[rng.index(terms.size())];
      auto feature = draw_split_feature(ctx.dict, ctx.splitProbs, rng);
      if (!feature) return prop;
      const SplitRule rule = draw_rule(*feature, ctx.dict, rng);
      auto [left, right] = prop.candidate.grow(leaf, rule);
      prop.candidatePartition.leafOf = current.leafOf;
      prop.candidatePartition.counts = current.counts;
      prop.candidatePartition.counts.resize(prop.candidate.nodes().size(), 0);
      prop.candidatePartition.counts[static_cast<std::size_t>(leaf)] = 0;
      for (std::size_t i = 0; i < current.leafOf.size(); ++i) {
        if (current.leafOf[i] != leaf) continue;
        const int dest = rule.goes_right(ctx.features(static_cast<Eigen::Index>(i), rule.feature)) ? right : left;
        prop.candidatePartition.leafOf[i] = dest;
        ++prop.candidatePartition.counts[static_cast<std::size_t>(dest)];
      }
      prop.affectedLeaves = {left, right};
      prop.valid = prop.candidatePartition.count(left) >= ctx.nMin && prop.candidatePartition.count(right) >= ctx.nMin;
      prop.logTransitionCorrection = std::log(static_cast<double>(terms.size())) -
                                     std::log(static_cast<double>(prop.candidate.prunable().size()));
      return prop;
    }
    case MoveKind::Prune: {
      const auto nogs = tree.prunable();
      if (nogs.empty()) return prop;
      const int target = nogs[rng.index(nogs.size())];
      const int collapsed = prop.candidate.prune(target);
      prop.candidatePartition = partition(prop.candidate, ctx.features);
      prop.affectedLeaves = {collapsed};
      prop.valid = true;
      prop.logTransitionCorrection = std::log(static_cast<double>(nogs.size())) -
                                     std::log(static_cast<double>(prop.candidate.terminal_count()));
      return prop;
    }
    case MoveKind::Change: {
      const auto nogs = tree.prunable();
      if (nogs.empty()) return prop;
      const int target = nogs[rng.index(nogs.size())];
      auto feature = draw_split_feature(ctx.dict, ctx.splitProbs, rng);
      if (!feature) return prop;
      prop.candidate.node(target).rule = draw_rule(*feature, ctx.dict, rng);
      prop.candidatePartition = partition(prop.candidate, ctx.features);
      prop.affectedLeaves = {prop.candidate.node(target).left, prop.candidate.node(target).right};
      prop.valid = terminals_meet_minimum(prop.candidate, prop.candidatePartition, ctx.nMin);
      return prop;
    }
    case MoveKind::Swap: {
      const auto inner = tree.internals();
      if (inner.size() < 2) return prop;
      const std::size_t a = rng.index(inner.size());
      std::size_t b = rng.index(inner.size() - 1);
      if (b >= a) ++b;
      std::swap(prop.candidate.node(inner[a]).rule, prop.candidate.node(inner[b]).rule);
      prop.candidatePartition = partition(prop.candidate, ctx.features);
      collect_terminals(prop.candidate, inner[a], prop.affectedLeaves);
      collect_terminals(prop.candidate, inner[b], prop.affectedLeaves);
      std::sort(prop.affectedLeaves.begin(), prop.affectedLeaves.end());
      prop.affectedLeaves.erase(std::unique(prop.affectedLeaves.begin(), prop.affectedLeaves.end()),
                                prop.affectedLeaves.end());
      prop.valid = terminals_meet_minimum(prop.candidate, prop.candidatePartition, ctx.nMin);
      return prop;
    }
  }
  return prop;
}

std::set<int> split_covariates(const Tree& tree) {
  std::set<int> out;
  for (const Node& nd : tree.nodes()) {
    if (!nd.is_terminal()) out.insert(nd.rule.feature);
  }
  return out;
}

std::set<int> ancestor_covariates(const Tree& tree, int leaf) {
  if (leaf < 0 || static_cast<std::size_t>(leaf) >= tree.nodes().size() || !tree.node(leaf).is_terminal()) {
    throw std::out_of_range("ancestor_covariates: unknown leaf id " + std::to_string(leaf));
  }
  std::set<int> out;
  for (int v = tree.node(leaf).parent; v >= 0; v = tree.node(v).parent) out.insert(tree.node(v).rule.feature);
  return out;
}

namespace {

nlohmann::json node_to_json(const Tree& tree, int v) {
  const Node& nd = tree.node(v);
  if (nd.is_terminal()) {
    return nlohmann::json{{"kind", "terminal"}, {"covariates", nd.leaf.covariates}, {"coef", nd.leaf.coef}};
  }
  return nlohmann::json{{"kind", "internal"},
                        {"feature", nd.rule.feature},
                        {"threshold", nd.rule.threshold},
                        {"left", node_to_json(tree, nd.left)},
                        {"right", node_to_json(tree, nd.right)}};
}

void node_from_json(const nlohmann::json& j, Tree& tree, int v) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "terminal") {
    LeafParams& leaf = tree.node(v).leaf;
    j.at("covariates").get_to(leaf.covariates);
    j.at("coef").get_to(leaf.coef);
    if (leaf.coef.size() != leaf.covariates.size() + 1) throw std::runtime_error("tree json: coef/covariate size mismatch");
    return;
  }
  if (kind != "internal") throw std::runtime_error("tree json: unknown node kind '" + kind + "'");
  SplitRule rule{j.at("feature").get<int>(), j.at("threshold").get<double>()};
  auto [l, r] = tree.grow(v, rule);
  node_from_json(j.at("left"), tree, l);
  node_from_json(j.at("right"), tree, r);
}

}  // namespace

nlohmann::json tree_to_json(const Tree& tree) { return node_to_json(tree, tree.root()); }

Tree tree_from_json(const nlohmann::json& j) {
  Tree tree;
  node_from_json(j, tree, tree.root());
  return tree;
}

}  // namespace motr

#include "frustra/frustration.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

#include "frustra/error.hpp"
#include "frustra/parallel.hpp"
#include "frustra/random.hpp"

namespace frustra {

namespace {

void require_edges(const SymmetrizedView& view) {
  if (view.empty() || !(view.total_abs() > 0.0)) {
    throw NumericalError("graph has no edges: frustration is undefined");
  }
}

void require_size(const SymmetrizedView& view, std::size_t n) {
  if (static_cast<std::int64_t>(n) != view.node_count()) {
    throw ValidationError("spin vector length " + std::to_string(n) + " does not match node count " +
                          std::to_string(view.node_count()));
  }
}

/// Tournament tree over the row sums: argmin in O(1), update in O(log n).
/// Ties resolve to the lowest index.
class MinTree {
 public:
  explicit MinTree(std::span<const double> values) : values_(values) {
    leaves_ = std::bit_ceil(std::max<std::size_t>(values.size(), 1));
    tree_.assign(2 * leaves_, -1);
    for (std::size_t i = 0; i < values.size(); ++i) tree_[leaves_ + i] = static_cast<std::int64_t>(i);
    for (std::size_t k = leaves_ - 1; k >= 1; --k) tree_[k] = better(tree_[2 * k], tree_[2 * k + 1]);
  }

  std::int64_t argmin() const { return tree_[1]; }

  void update(std::int64_t i) {
    for (auto k = (leaves_ + static_cast<std::size_t>(i)) / 2; k >= 1; k /= 2) {
      tree_[k] = better(tree_[2 * k], tree_[2 * k + 1]);
    }
  }

 private:
  std::int64_t better(std::int64_t a, std::int64_t b) const {
    if (a < 0) return b;
    if (b < 0) return a;
    const double va = values_[a];
    const double vb = values_[b];
    return (vb < va || (vb == va && b < a)) ? b : a;
  }

  std::span<const double> values_;
  std::size_t leaves_ = 1;
  std::vector<std::int64_t> tree_;
};

struct DomainPartition {
  std::vector<std::int64_t> component;  // per node
  std::int64_t count = 0;
};

DomainPartition satisfied_components(const SymmetrizedView& view, std::span<const std::int8_t> s) {
  const auto n = view.node_count();
  DomainPartition p{std::vector<std::int64_t>(static_cast<std::size_t>(n), -1), 0};
  std::vector<std::int64_t> stack;
  for (std::int64_t root = 0; root < n; ++root) {
    if (p.component[root] >= 0) continue;
    const auto id = p.count++;
    p.component[root] = id;
    stack.push_back(root);
    while (!stack.empty()) {
      const auto i = stack.back();
      stack.pop_back();
      const auto nbr = view.neighbors(i);
      const auto w = view.neighbor_weights(i);
      for (std::size_t k = 0; k < nbr.size(); ++k) {
        const auto j = nbr[k];
        if (p.component[j] < 0 && s[i] * s[j] * w[k] > 0.0) {
          p.component[j] = id;
          stack.push_back(j);
        }
      }
    }
  }
  return p;
}

/// Picks pairwise non-adjacent satisfied-edge components by decreasing
/// boundary weight and returns their nodes; empty when no boundary exists.
std::vector<std::int64_t> domain_move(const SymmetrizedView& view, std::span<const std::int8_t> s,
                                      double min_gain) {
  const auto part = satisfied_components(view, s);
  if (part.count <= 1) return {};
  const auto n = view.node_count();
  std::vector<double> gain(static_cast<std::size_t>(part.count), 0.0);
  std::vector<std::int64_t> size(static_cast<std::size_t>(part.count), 0);
  std::vector<std::pair<std::int64_t, std::int64_t>> links;
  for (std::int64_t i = 0; i < n; ++i) {
    const auto ci = part.component[i];
    ++size[ci];
    const auto nbr = view.neighbors(i);
    const auto w = view.neighbor_weights(i);
    for (std::size_t k = 0; k < nbr.size(); ++k) {
      const auto cj = part.component[nbr[k]];
      if (cj != ci) {
        gain[ci] += std::abs(w[k]);
        if (ci < cj) links.emplace_back(ci, cj);
      }
    }
  }
  if (links.empty()) return {};
  std::sort(links.begin(), links.end());
  links.erase(std::unique(links.begin(), links.end()), links.end());
  std::vector<std::vector<std::int64_t>> adjacent(static_cast<std::size_t>(part.count));
  for (auto [a, b] : links) {
    adjacent[a].push_back(b);
    adjacent[b].push_back(a);
  }

  std::vector<std::int64_t> order(static_cast<std::size_t>(part.count));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::int64_t a, std::int64_t b) {
    if (gain[a] != gain[b]) return gain[a] > gain[b];
    if (size[a] != size[b]) return size[a] < size[b];
    return a < b;
  });
  std::vector<std::int8_t> state(static_cast<std::size_t>(part.count), 0);  // 1 chosen, -1 blocked
  for (auto c : order) {
    if (state[c] != 0 || !(gain[c] > min_gain)) continue;
    state[c] = 1;
    for (auto d : adjacent[c]) {
      if (state[d] == 0) state[d] = -1;
    }
  }
  std::vector<std::int64_t> nodes;
  for (std::int64_t i = 0; i < n; ++i) {
    if (state[part.component[i]] == 1) nodes.push_back(i);
  }
  return nodes;
}

}  // namespace

double energy(const SymmetrizedView& view, std::span<const std::int8_t> spins) {
  require_edges(view);
  require_size(view, spins.size());
  double frustrated = 0.0;
  for (std::int64_t i = 0; i < view.node_count(); ++i) {
    const auto nbr = view.neighbors(i);
    const auto w = view.neighbor_weights(i);
    for (std::size_t k = 0; k < nbr.size(); ++k) {
      if (spins[i] * spins[nbr[k]] * w[k] < 0.0) frustrated += std::abs(w[k]);
    }
  }
  return std::clamp(frustrated / view.total_abs(), 0.0, 1.0);
}

SpinState::SpinState(const SymmetrizedView& view, SpinVector spins)
    : view_(&view), spins_(std::move(spins)) {
  require_size(view, spins_.size());
  for (auto v : spins_) {
    if (v != 1 && v != -1) throw ValidationError("spin entries must be +1 or -1");
  }
  recompute();
}

void SpinState::recompute() {
  const auto n = view_->node_count();
  row_sums_.assign(static_cast<std::size_t>(n), 0.0);
  alignment_ = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const auto nbr = view_->neighbors(i);
    const auto w = view_->neighbor_weights(i);
    double sum = 0.0;
    for (std::size_t k = 0; k < nbr.size(); ++k) sum += w[k] * spins_[nbr[k]];
    row_sums_[i] = spins_[i] * sum;
    alignment_ += row_sums_[i];
  }
}

void SpinState::flip(std::int64_t node) {
  if (node < 0 || node >= view_->node_count()) throw ValidationError("node index out of range");
  const double si = spins_[node];
  const auto nbr = view_->neighbors(node);
  const auto w = view_->neighbor_weights(node);
  for (std::size_t k = 0; k < nbr.size(); ++k) {
    const auto j = nbr[k];
    row_sums_[j] -= 2.0 * si * spins_[j] * w[k];
  }
  // row i and column i each contribute -2 rowsum[i] to 1^T S A_u S 1
  alignment_ -= 4.0 * row_sums_[node];
  row_sums_[node] = -row_sums_[node];
  spins_[node] = static_cast<std::int8_t>(-spins_[node]);
}

double SpinState::energy() const { return 0.5 * (1.0 - alignment_ / view_->total_abs()); }

GroundStateResult heuristic_ground_state(const SymmetrizedView& view, const HeuristicOptions& options) {
  require_edges(view);
  if (options.max_iterations < 1) throw ValidationError("max_iterations must be >= 1");
  if (options.initial_flips < 0) throw ValidationError("initial_flips must be >= 0");
  const auto n = view.node_count();

  SpinVector spins(static_cast<std::size_t>(n), 1);
  auto rng = make_rng(options.seed);
  for (std::int64_t k = 0; k < options.initial_flips; ++k) {
    auto& s = spins[uniform_index(rng, static_cast<std::uint64_t>(n))];
    s = static_cast<std::int8_t>(-s);
  }

  GroundStateResult result;
  result.seed = options.seed;
  SpinState state(view, std::move(spins));
  MinTree tree(state.row_sums());
  const double threshold = -1e-12 * view.total_abs();

  auto accepted = [&] {
    if (options.record_trace) result.energy_trace.push_back(state.energy());
    if (options.observer) options.observer(state);
  };
  if (options.record_trace) result.energy_trace.push_back(state.energy());

  std::int64_t iterations = 0;
  while (true) {
    bool stalled = false;
    while (iterations < options.max_iterations) {
      const auto i = tree.argmin();
      if (!(state.row_sums()[i] < threshold)) {
        stalled = true;
        break;
      }
      state.flip(i);
      tree.update(i);
      for (auto j : view.neighbors(i)) tree.update(j);
      ++iterations;
      ++result.flips;
      accepted();
    }
    if (!stalled) break;
    if (!options.domain_moves || iterations >= options.max_iterations) {
      result.converged = true;
      break;
    }
    const auto nodes = domain_move(view, state.spins(), -threshold);
    if (nodes.empty()) {
      result.converged = true;
      break;
    }
    for (auto i : nodes) state.flip(i);
    for (auto i : nodes) {
      tree.update(i);
      for (auto j : view.neighbors(i)) tree.update(j);
    }
    ++iterations;
    ++result.domain_rounds;
    accepted();
  }

  state.recompute();
  result.spins.assign(state.spins().begin(), state.spins().end());
  result.epsilon = energy(view, result.spins);
  return result;
}

ReplicaSet run_replicas(const SymmetrizedView& view, const ReplicaConfig& config) {
  require_edges(view);
  if (config.replica_count < 1) throw ValidationError("replica_count must be >= 1");
  ReplicaSet set;
  set.replicas.resize(static_cast<std::size_t>(config.replica_count));
  parallel_for(set.replicas.size(), [&](std::size_t r) {
    HeuristicOptions opt;
    opt.seed = config.seed ^ static_cast<std::uint64_t>(r);
    opt.initial_flips = config.initial_flips;
    opt.max_iterations = config.max_iterations;
    opt.domain_moves = config.domain_moves;
    opt.record_trace = config.record_trace;
    set.replicas[r] = heuristic_ground_state(view, opt);
  });
  for (std::size_t r = 1; r < set.replicas.size(); ++r) {
    if (set.replicas[r].epsilon < set.replicas[set.best].epsilon) set.best = r;
  }
  return set;
}

ExactResult brute_force_frustration(const SymmetrizedView& view, std::int64_t max_nodes) {
  require_edges(view);
  const auto n = view.node_count();
  if (n > max_nodes || n > 62) {
    throw ValidationError("brute force limited to " + std::to_string(max_nodes) + " nodes, graph has " +
                          std::to_string(n));
  }
  // Gray-code walk over s_1..s_{n-1} with s_0 = +1 fixed; the alignment change
  // of a flip is evaluated directly from the spins.
  SpinVector s(static_cast<std::size_t>(n), 1);
  double alignment = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    for (auto w : view.neighbor_weights(i)) alignment += w;
  }
  double best = alignment;
  SpinVector best_s = s;
  const std::uint64_t classes = std::uint64_t{1} << (n - 1);
  for (std::uint64_t k = 1; k < classes; ++k) {
    const auto node = static_cast<std::int64_t>(std::countr_zero(k)) + 1;
    const auto nbr = view.neighbors(node);
    const auto w = view.neighbor_weights(node);
    double field = 0.0;
    for (std::size_t e = 0; e < nbr.size(); ++e) field += w[e] * s[nbr[e]];
    alignment -= 4.0 * s[node] * field;
    s[node] = static_cast<std::int8_t>(-s[node]);
    if (alignment > best) {
      best = alignment;
      best_s = s;
    }
  }
  return ExactResult{energy(view, best_s), std::move(best_s)};
}

GroundStateResult active_frustration(const SignedSparseGraph& active, const ReplicaConfig& config) {
  if (active.edge_count() == 0) throw NumericalError("active subgraph has no edges");
  SymmetrizedView view(active);
  auto set = run_replicas(view, config);
  return std::move(set.replicas[set.best]);
}

}  // namespace frustra

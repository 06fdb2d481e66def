#pragma once

// Frustration index of a signed graph: the ground-state energy
//
//   e(s) = 1/2 (1 - alpha 1^T S A_u S 1),   alpha = 1 / sum_ij |A_u|_ij
//
// minimised over spin vectors s in {-1,+1}^n, estimated with a greedy
// gauge-flip descent over independent replicas. An exhaustive solver serves
// as the oracle on small graphs.

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "frustra/graph.hpp"

namespace frustra {

using SpinVector = std::vector<std::int8_t>;

/// e(s), evaluated as (sum of |A_u| over frustrated entries) / sum |A_u|, which
/// equals the expression above and is exactly 0 on a balanced assignment.
/// Throws NumericalError on a graph without edges.
double energy(const SymmetrizedView& view, std::span<const std::int8_t> spins);

/// Spins together with the row sums of S A_u S, kept current under single
/// spin flips in O(degree).
class SpinState {
 public:
  SpinState(const SymmetrizedView& view, SpinVector spins);

  /// rowsum[i] <- -rowsum[i]; rowsum[j] -= 2 s_i s_j A_u[j,i] for neighbours
  /// j (pre-flip s_i); then s_i is negated.
  void flip(std::int64_t node);
  /// Rebuilds the row sums from scratch.
  void recompute();

  std::span<const std::int8_t> spins() const { return spins_; }
  std::span<const double> row_sums() const { return row_sums_; }
  /// 1^T S A_u S 1, maintained incrementally.
  double alignment() const { return alignment_; }
  /// e(s) from the incremental alignment.
  double energy() const;
  const SymmetrizedView& view() const { return *view_; }

 private:
  const SymmetrizedView* view_;
  SpinVector spins_;
  std::vector<double> row_sums_;
  double alignment_ = 0.0;
};

struct HeuristicOptions {
  std::uint64_t seed = 0;
  /// nu: random single-node gauge flips applied to s = 1 before descent.
  std::int64_t initial_flips = 0;
  /// M: cap on accepted moves (single flips plus domain rounds).
  std::int64_t max_iterations = 100'000'000;
  /// Alternate the single-flip descent with domain moves (see below).
  bool domain_moves = true;
  bool record_trace = false;
  /// Called after every accepted move with the current state.
  std::function<void(const SpinState&)> observer;
};

struct GroundStateResult {
  double epsilon = 1.0;
  SpinVector spins;
  std::int64_t flips = 0;         // single-spin descent flips
  std::int64_t domain_rounds = 0;  // accepted domain moves
  bool converged = false;          // stopped at a local minimum rather than at M
  std::vector<double> energy_trace;
  std::uint64_t seed = 0;
};

/// One replica. Descent: while some row sum of S A_u S is below
/// -1e-12 sum|A_u|, flip the node with the most negative row sum (lowest
/// index on ties). When it stalls and domain moves are enabled, the
/// connected components of the satisfied-edge subgraph are formed; each has
/// an all-frustrated boundary, so flipping a set of pairwise non-adjacent
/// components lowers e(s) by alpha times twice their boundary weight. Both
/// phases repeat until neither applies. epsilon is recomputed from scratch.
GroundStateResult heuristic_ground_state(const SymmetrizedView& view, const HeuristicOptions& options);

struct ReplicaConfig {
  std::int64_t replica_count = 80;
  std::int64_t initial_flips = 1'000'000;
  std::int64_t max_iterations = 100'000'000;
  std::uint64_t seed = 0;
  bool domain_moves = true;
  bool record_trace = false;
};

struct ReplicaSet {
  std::vector<GroundStateResult> replicas;
  std::size_t best = 0;
  const GroundStateResult& best_result() const { return replicas.at(best); }
};

/// Replica r runs with seed (config.seed XOR r). Replicas run concurrently;
/// the result does not depend on scheduling. best = lowest epsilon, lowest
/// replica index on ties.
ReplicaSet run_replicas(const SymmetrizedView& view, const ReplicaConfig& config);

struct ExactResult {
  double epsilon = 1.0;
  SpinVector spins;
};

/// Exhaustive minimum over the 2^(n-1) spin classes (s and -s share energy).
ExactResult brute_force_frustration(const SymmetrizedView& view, std::int64_t max_nodes = 20);

/// Frustration of an active subgraph: symmetrize, then run_replicas.
GroundStateResult active_frustration(const SignedSparseGraph& active, const ReplicaConfig& config);

}  // namespace frustra

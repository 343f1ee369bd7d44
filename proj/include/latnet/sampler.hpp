#pragma once

#include <deque>
#include <unordered_set>
#include <utility>
#include <vector>

#include "latnet/events.hpp"
#include "latnet/params.hpp"

namespace latnet {

enum class BatchMode { DenseDiscrete, CcDiscrete, CcPartial };

// One sampled case. Discrete modes fill (interval, count); the partial mode
// fills (time) and owns `controls_per_case` slots in MiniBatch::controls.
struct CaseRecord {
  int src = 0;
  int dst = 0;
  int interval = -1;
  long count = 0;
  Scalar time = 0.0;
  Scalar width = 0.0;  // interval width, discrete modes
};

struct ControlRecord {
  int src = 0;
  int dst = 0;
  int interval = -1;
  Scalar time = 0.0;
  Scalar width = 0.0;
};

struct MiniBatch {
  BatchMode mode = BatchMode::DenseDiscrete;
  std::vector<CaseRecord> cases;
  std::vector<ControlRecord> controls;
  int n_b = 0;                 // |B|
  int controls_per_case = 0;   // partial mode
  Scalar rescale = 1.0;        // |E| / |B|
  Scalar zero_weight = 0.0;    // N0 / n0 (cc_discrete)
  long n_zero_population = 0;  // N0
};

struct SamplerOptions {
  int controls_per_case = 1;
  int retry_budget = 10;  // control collision redraws before accepting
};

// Uniform with-replacement mini-batch construction.
//   dense_discrete: uniform (k, i, j) cells, y looked up on the fly;
//                   rescale = (#cells) / |B|.
//   cc_discrete:    half positive cells (rescale = #positives / #cases) and
//                   half zero cells carrying zero_weight = N0 / n0.
//   cc_partial:     events, each paired with freshly drawn control pairs at
//                   the case's time; rescale = |E| / |B|.
MiniBatch sample_minibatch(const EventStore& events, BatchMode mode, int n_b, Rng& rng,
                           const SamplerOptions& options = {});

// Node pairs that ever satisfied the clustering kernel, capacity-bounded FIFO.
class KernelPairHistory {
 public:
  explicit KernelPairHistory(size_t capacity = 1 << 20) : capacity_(capacity) {}

  size_t size() const { return order_.size(); }
  bool empty() const { return order_.empty(); }
  const std::deque<std::pair<int, int>>& pairs() const { return order_; }

  // inserts (i, j) with i < j normalization; returns false when already known
  bool insert(int i, int j);

 private:
  size_t capacity_;
  std::deque<std::pair<int, int>> order_;
  std::unordered_set<uint64_t> present_;
};

// Filters candidate pairs against the pilot kernel ||a_i - a_j|| <= radius
// (Frobenius over the node coefficient blocks) and records survivors.
void record_kernel_pairs(KernelPairHistory& history, const Coefficients& pilot, Scalar radius,
                         const std::vector<std::pair<int, int>>& candidates);

// |B*| = size pairs uniform with replacement; empty history yields an empty list.
std::vector<std::pair<int, int>> sample_penalty_batch(const KernelPairHistory& history,
                                                      int size, Rng& rng);

}  // namespace latnet

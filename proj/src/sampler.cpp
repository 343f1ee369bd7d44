#include "latnet/sampler.hpp"

#include <tuple>

namespace latnet {

namespace {

// uniform ordered pair (i, j), i != j
std::pair<int, int> random_pair(int p, Rng& rng) {
  const int i = static_cast<int>(rng.below(static_cast<uint64_t>(p)));
  int j = static_cast<int>(rng.below(static_cast<uint64_t>(p - 1)));
  if (j >= i) ++j;
  return {i, j};
}

MiniBatch sample_dense(const DiscreteEvents& events, int n_b, Rng& rng) {
  MiniBatch batch;
  batch.mode = BatchMode::DenseDiscrete;
  batch.n_b = n_b;
  const int p = events.num_nodes();
  const int K = events.num_intervals();
  batch.cases.reserve(static_cast<size_t>(n_b));
  for (int s = 0; s < n_b; ++s) {
    const int k = static_cast<int>(rng.below(static_cast<uint64_t>(K)));
    auto [i, j] = random_pair(p, rng);
    batch.cases.push_back({i, j, k, events.count(k, i, j), events.interval_start(k),
                           events.interval_width(k)});
  }
  batch.rescale = static_cast<Scalar>(events.num_cells()) / static_cast<Scalar>(n_b);
  return batch;
}

MiniBatch sample_cc_discrete(const DiscreteEvents& events, int n_b, Rng& rng,
                             const SamplerOptions& options) {
  MiniBatch batch;
  batch.mode = BatchMode::CcDiscrete;
  batch.n_b = n_b;
  const auto& positives = events.positive_cells();
  require(!positives.empty(), "sample_minibatch: event store has no positive cells");
  const int p = events.num_nodes();
  const int K = events.num_intervals();
  const long n_zero = events.num_zero_cells();

  const int n_cases = std::max(1, n_b / 2);
  const int n_controls = n_zero > 0 ? std::max(1, n_b - n_cases) : 0;

  batch.cases.reserve(static_cast<size_t>(n_cases));
  for (int s = 0; s < n_cases; ++s) {
    const DiscreteCell& c = positives[rng.below(positives.size())];
    batch.cases.push_back({c.src, c.dst, c.interval, c.count,
                           events.interval_start(c.interval), events.interval_width(c.interval)});
  }
  batch.controls.reserve(static_cast<size_t>(n_controls));
  for (int s = 0; s < n_controls; ++s) {
    // rejection: zero cells dominate at the intended scales
    int k = 0, i = 0, j = 0;
    for (int attempt = 0;; ++attempt) {
      k = static_cast<int>(rng.below(static_cast<uint64_t>(K)));
      std::tie(i, j) = random_pair(p, rng);
      if (events.count(k, i, j) == 0 || attempt >= options.retry_budget) break;
    }
    batch.controls.push_back({i, j, k, events.interval_start(k), events.interval_width(k)});
  }
  batch.rescale = static_cast<Scalar>(positives.size()) / static_cast<Scalar>(n_cases);
  batch.n_zero_population = n_zero;
  batch.zero_weight =
      n_controls > 0 ? static_cast<Scalar>(n_zero) / static_cast<Scalar>(n_controls) : 0.0;
  return batch;
}

MiniBatch sample_cc_partial(const ContinuousEvents& events, int n_b, Rng& rng,
                            const SamplerOptions& options) {
  MiniBatch batch;
  batch.mode = BatchMode::CcPartial;
  batch.n_b = n_b;
  batch.controls_per_case = options.controls_per_case;
  require(events.size() > 0, "sample_minibatch: empty event store");
  int p = 0;
  for (const auto& e : events.records()) p = std::max({p, e.src + 1, e.dst + 1});
  require(p >= 2, "sample_minibatch: need at least two nodes");

  batch.cases.reserve(static_cast<size_t>(n_b));
  batch.controls.reserve(static_cast<size_t>(n_b) * options.controls_per_case);
  for (int s = 0; s < n_b; ++s) {
    const ContinuousEvent& e = events[rng.below(events.size())];
    batch.cases.push_back({e.src, e.dst, -1, 1, e.time, 0.0});
    for (int c = 0; c < options.controls_per_case; ++c) {
      int ci = 0, cj = 0;
      for (int attempt = 0;; ++attempt) {
        std::tie(ci, cj) = random_pair(p, rng);
        const bool collision = (ci == e.src && cj == e.dst) || events.observed(ci, cj, e.time);
        if (!collision || attempt >= options.retry_budget) break;
      }
      batch.controls.push_back({ci, cj, -1, e.time, 0.0});
    }
  }
  batch.rescale = static_cast<Scalar>(events.size()) / static_cast<Scalar>(n_b);
  return batch;
}

}  // namespace

MiniBatch sample_minibatch(const EventStore& events, BatchMode mode, int n_b, Rng& rng,
                           const SamplerOptions& options) {
  require(n_b >= 1, "sample_minibatch: batch size must be positive");
  switch (mode) {
    case BatchMode::DenseDiscrete:
      require(std::holds_alternative<DiscreteEvents>(events),
              "sample_minibatch: dense mode needs discrete events");
      return sample_dense(std::get<DiscreteEvents>(events), n_b, rng);
    case BatchMode::CcDiscrete:
      require(std::holds_alternative<DiscreteEvents>(events),
              "sample_minibatch: cc-discrete mode needs discrete events");
      return sample_cc_discrete(std::get<DiscreteEvents>(events), n_b, rng, options);
    case BatchMode::CcPartial:
      require(std::holds_alternative<ContinuousEvents>(events),
              "sample_minibatch: cc-partial mode needs continuous events");
      return sample_cc_partial(std::get<ContinuousEvents>(events), n_b, rng, options);
  }
  fail("sample_minibatch: unreachable");
}

bool KernelPairHistory::insert(int i, int j) {
  if (i == j) return false;
  if (i > j) std::swap(i, j);
  const uint64_t key = (static_cast<uint64_t>(static_cast<uint32_t>(i)) << 32) |
                       static_cast<uint64_t>(static_cast<uint32_t>(j));
  if (!present_.insert(key).second) return false;
  order_.emplace_back(i, j);
  while (order_.size() > capacity_) {
    const auto [oi, oj] = order_.front();
    order_.pop_front();
    present_.erase((static_cast<uint64_t>(static_cast<uint32_t>(oi)) << 32) |
                   static_cast<uint64_t>(static_cast<uint32_t>(oj)));
  }
  return true;
}

void record_kernel_pairs(KernelPairHistory& history, const Coefficients& pilot, Scalar radius,
                         const std::vector<std::pair<int, int>>& candidates) {
  for (const auto& [i, j] : candidates) {
    if (i == j) continue;
    if ((pilot.node(i) - pilot.node(j)).norm() <= radius) history.insert(i, j);
  }
}

std::vector<std::pair<int, int>> sample_penalty_batch(const KernelPairHistory& history, int size,
                                                      Rng& rng) {
  std::vector<std::pair<int, int>> out;
  if (history.empty() || size <= 0) return out;
  out.reserve(static_cast<size_t>(size));
  for (int s = 0; s < size; ++s) out.push_back(history.pairs()[rng.below(history.size())]);
  return out;
}

}  // namespace latnet

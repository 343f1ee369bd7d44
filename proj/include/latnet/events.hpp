#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "latnet/common.hpp"

namespace latnet {

// Dense-index registry over external node ids. Indices are 0..p-1 with no
// gaps; the id map is a bijection. Static nodes keep a fixed position (their
// trajectory ignores t).
class NodeRegistry {
 public:
  int add(const std::string& id);          // returns dense index, inserting if new
  int index_of(const std::string& id) const;  // throws on unknown id
  const std::string& id_of(int index) const;
  bool contains(const std::string& id) const { return lookup_.count(id) > 0; }
  int count() const { return static_cast<int>(ids_.size()); }

  void set_static(int index, bool value);
  bool is_static(int index) const;
  bool any_static() const;

 private:
  std::vector<std::string> ids_;
  std::unordered_map<std::string, int> lookup_;
  std::vector<bool> static_flags_;
};

struct ContinuousEvent {
  int src = 0;
  int dst = 0;
  Scalar time = 0.0;
};

// Time-stamped directed events on [0, T], sorted by timestamp, no self loops.
class ContinuousEvents {
 public:
  ContinuousEvents() = default;
  ContinuousEvents(std::vector<ContinuousEvent> events, Scalar horizon);

  const std::vector<ContinuousEvent>& records() const { return events_; }
  const ContinuousEvent& operator[](size_t k) const { return events_[k]; }
  size_t size() const { return events_.size(); }
  Scalar horizon() const { return horizon_; }

  bool observed(int src, int dst, Scalar time) const;

 private:
  uint64_t key_(int src, int dst, Scalar time) const;

  std::vector<ContinuousEvent> events_;
  Scalar horizon_ = 0.0;
  std::unordered_map<uint64_t, int> seen_;  // (src, dst, time) -> multiplicity
};

struct DiscreteCell {
  int interval = 0;
  int src = 0;
  int dst = 0;
  long count = 0;
};

// Interval counts y_{k,ij}; only strictly positive cells are stored, zeros
// are implicit. Boundaries are ascending; width[k] = b[k+1] - b[k] > 0.
class DiscreteEvents {
 public:
  DiscreteEvents() = default;
  DiscreteEvents(std::vector<Scalar> boundaries, std::vector<DiscreteCell> cells, int num_nodes);

  int num_intervals() const { return static_cast<int>(boundaries_.size()) - 1; }
  int num_nodes() const { return num_nodes_; }
  Scalar horizon() const { return boundaries_.back(); }
  const std::vector<Scalar>& boundaries() const { return boundaries_; }
  Scalar interval_start(int k) const { return boundaries_[static_cast<size_t>(k)]; }
  Scalar interval_width(int k) const {
    return boundaries_[static_cast<size_t>(k + 1)] - boundaries_[static_cast<size_t>(k)];
  }

  const std::vector<DiscreteCell>& positive_cells() const { return cells_; }
  long count(int interval, int src, int dst) const;  // 0 when the cell is absent
  long total_count() const { return total_; }

  // all (k, i, j) cells with i != j
  long num_cells() const {
    return static_cast<long>(num_intervals()) * num_nodes_ * (num_nodes_ - 1);
  }
  long num_zero_cells() const { return num_cells() - static_cast<long>(cells_.size()); }

 private:
  static uint64_t key_(int interval, int src, int dst);

  std::vector<Scalar> boundaries_;
  std::vector<DiscreteCell> cells_;
  std::unordered_map<uint64_t, long> counts_;
  int num_nodes_ = 0;
  long total_ = 0;
};

using EventStore = std::variant<ContinuousEvents, DiscreteEvents>;

inline Scalar store_horizon(const EventStore& store) {
  return std::visit([](const auto& s) { return s.horizon(); }, store);
}

// Per-pair covariate values (exogenous and precomputed endogenous statistics
// concatenated), piecewise constant on a private time grid. Pairs without an
// entry fall back to the default vector when one is set, otherwise error.
class CovariateSpec {
 public:
  CovariateSpec() = default;
  explicit CovariateSpec(int dim) : dim_(dim) {}

  int dim() const { return dim_; }
  bool empty() const { return dim_ == 0; }

  // grid is ascending; values.row(k) applies on [grid[k], grid[k+1])
  void set_pair(int src, int dst, std::vector<Scalar> grid, Matrix values);
  void set_default(Vector values);

  Vector values(int src, int dst, Scalar time) const;

 private:
  struct PairTable {
    std::vector<Scalar> grid;
    Matrix values;
  };
  int dim_ = 0;
  std::unordered_map<uint64_t, PairTable> tables_;
  std::optional<Vector> default_;
};

struct LoadOptions {
  char delimiter = '\t';
  std::optional<Scalar> horizon;    // override for T (continuous) or last boundary
  std::optional<int> num_intervals; // discrete input: equal-width boundaries over [0, horizon]
};

enum class EventFormat { Continuous, Discrete };

struct LoadResult {
  NodeRegistry registry;
  EventStore events;
  long rejected_self_loops = 0;
};

// Delimited text with a header line, one event per line.
// continuous: src dst time; discrete: interval src dst count.
LoadResult load_events(const std::string& path, EventFormat format,
                       const LoadOptions& options = {});

void export_continuous(const ContinuousEvents& events, const NodeRegistry& registry,
                       const std::string& path, char delimiter = '\t');
void export_discrete(const DiscreteEvents& events, const NodeRegistry& registry,
                     const std::string& path, char delimiter = '\t');

// Equal-width aggregation of a continuous stream into interval counts.
DiscreteEvents discretize(const ContinuousEvents& events, int num_intervals, int num_nodes);

// Restriction to a node subset: keeps events with both endpoints inside and
// reindexes them by position in `nodes` (ascending dense indices).
ContinuousEvents restrict_events(const ContinuousEvents& events, const std::vector<int>& nodes);
DiscreteEvents restrict_events(const DiscreteEvents& events, const std::vector<int>& nodes);

}  // namespace latnet

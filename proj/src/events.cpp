#include "latnet/events.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace latnet {

namespace {

uint64_t pair_key(int src, int dst) {
  return (static_cast<uint64_t>(static_cast<uint32_t>(src)) << 32) |
         static_cast<uint64_t>(static_cast<uint32_t>(dst));
}

std::vector<std::string> split_line(const std::string& line, char delimiter) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  // treat whitespace delimiters leniently: split on the delimiter, trim spaces
  while (std::getline(in, field, delimiter)) {
    while (!field.empty() && (field.back() == '\r' || field.back() == ' ')) field.pop_back();
    size_t start = 0;
    while (start < field.size() && field[start] == ' ') ++start;
    out.push_back(field.substr(start));
  }
  return out;
}

bool parse_scalar(const std::string& s, Scalar* out) {
  if (s.empty()) return false;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) return false;
  *out = v;
  return true;
}

bool parse_long(const std::string& s, long* out) {
  if (s.empty()) return false;
  char* end = nullptr;
  const long v = std::strtol(s.c_str(), &end, 10);
  if (end != s.c_str() + s.size()) return false;
  *out = v;
  return true;
}

}  // namespace

int NodeRegistry::add(const std::string& id) {
  auto it = lookup_.find(id);
  if (it != lookup_.end()) return it->second;
  const int index = static_cast<int>(ids_.size());
  ids_.push_back(id);
  static_flags_.push_back(false);
  lookup_.emplace(id, index);
  return index;
}

int NodeRegistry::index_of(const std::string& id) const {
  auto it = lookup_.find(id);
  require(it != lookup_.end(), "NodeRegistry: unknown node id '" + id + "'");
  return it->second;
}

const std::string& NodeRegistry::id_of(int index) const {
  require(index >= 0 && index < count(), "NodeRegistry: index out of range");
  return ids_[static_cast<size_t>(index)];
}

void NodeRegistry::set_static(int index, bool value) {
  require(index >= 0 && index < count(), "NodeRegistry: index out of range");
  static_flags_[static_cast<size_t>(index)] = value;
}

bool NodeRegistry::is_static(int index) const {
  require(index >= 0 && index < count(), "NodeRegistry: index out of range");
  return static_flags_[static_cast<size_t>(index)];
}

bool NodeRegistry::any_static() const {
  return std::find(static_flags_.begin(), static_flags_.end(), true) != static_flags_.end();
}

ContinuousEvents::ContinuousEvents(std::vector<ContinuousEvent> events, Scalar horizon)
    : events_(std::move(events)), horizon_(horizon) {
  require(horizon_ > 0.0 && std::isfinite(horizon_),
          "ContinuousEvents: horizon must be positive");
  std::stable_sort(events_.begin(), events_.end(),
                   [](const ContinuousEvent& a, const ContinuousEvent& b) { return a.time < b.time; });
  for (const auto& e : events_) {
    require(e.src != e.dst, "ContinuousEvents: self loop");
    require(e.time >= 0.0 && e.time <= horizon_, "ContinuousEvents: timestamp outside [0, T]");
    seen_[key_(e.src, e.dst, e.time)] += 1;
  }
}

uint64_t ContinuousEvents::key_(int src, int dst, Scalar time) const {
  uint64_t bits = 0;
  static_assert(sizeof(Scalar) == sizeof(uint64_t));
  std::memcpy(&bits, &time, sizeof(bits));
  return splitmix64(pair_key(src, dst)) ^ bits;
}

bool ContinuousEvents::observed(int src, int dst, Scalar time) const {
  return seen_.count(key_(src, dst, time)) > 0;
}

uint64_t DiscreteEvents::key_(int interval, int src, int dst) {
  // desk scale: intervals < 2^20, nodes < 2^22
  return (static_cast<uint64_t>(static_cast<uint32_t>(interval)) << 44) |
         (static_cast<uint64_t>(static_cast<uint32_t>(src)) << 22) |
         static_cast<uint64_t>(static_cast<uint32_t>(dst));
}

DiscreteEvents::DiscreteEvents(std::vector<Scalar> boundaries, std::vector<DiscreteCell> cells,
                               int num_nodes)
    : boundaries_(std::move(boundaries)), cells_(std::move(cells)), num_nodes_(num_nodes) {
  require(boundaries_.size() >= 2, "DiscreteEvents: need at least one interval");
  for (size_t k = 1; k < boundaries_.size(); ++k)
    require(boundaries_[k] > boundaries_[k - 1], "DiscreteEvents: boundaries must be increasing");
  for (const auto& c : cells_) {
    require(c.count > 0, "DiscreteEvents: stored counts must be positive");
    require(c.src != c.dst, "DiscreteEvents: self loop");
    require(c.interval >= 0 && c.interval < num_intervals(),
            "DiscreteEvents: interval index out of range");
    require(c.src >= 0 && c.src < num_nodes_ && c.dst >= 0 && c.dst < num_nodes_,
            "DiscreteEvents: node index out of range");
    counts_[key_(c.interval, c.src, c.dst)] += c.count;
    total_ += c.count;
  }
  require(counts_.size() == cells_.size(), "DiscreteEvents: duplicate cell");
}

long DiscreteEvents::count(int interval, int src, int dst) const {
  auto it = counts_.find(key_(interval, src, dst));
  return it == counts_.end() ? 0 : it->second;
}

void CovariateSpec::set_pair(int src, int dst, std::vector<Scalar> grid, Matrix values) {
  require(dim_ > 0, "CovariateSpec: dimension not set");
  require(values.cols() == dim_, "CovariateSpec: value width mismatch");
  require(values.rows() == static_cast<Index>(grid.size()),
          "CovariateSpec: grid/value length mismatch");
  for (size_t k = 1; k < grid.size(); ++k)
    require(grid[k] > grid[k - 1], "CovariateSpec: grid must be increasing");
  tables_[pair_key(src, dst)] = PairTable{std::move(grid), std::move(values)};
}

void CovariateSpec::set_default(Vector values) {
  require(values.size() == dim_, "CovariateSpec: default width mismatch");
  default_ = std::move(values);
}

Vector CovariateSpec::values(int src, int dst, Scalar time) const {
  auto it = tables_.find(pair_key(src, dst));
  if (it == tables_.end()) {
    require(default_.has_value(), "CovariateSpec: no covariates for evaluated pair");
    return *default_;
  }
  const PairTable& table = it->second;
  auto up = std::upper_bound(table.grid.begin(), table.grid.end(), time);
  Index row = static_cast<Index>(up - table.grid.begin()) - 1;
  if (row < 0) row = 0;
  return table.values.row(row).transpose();
}

LoadResult load_events(const std::string& path, EventFormat format, const LoadOptions& options) {
  std::ifstream in(path);
  require(in.good(), "load_events: cannot open '" + path + "'");

  LoadResult result;
  std::vector<ContinuousEvent> cont;
  std::vector<DiscreteCell> cells;
  std::unordered_map<uint64_t, size_t> cell_index;
  long max_interval = -1;

  std::string line;
  long line_no = 0;
  bool first_data_line = true;
  const size_t want = format == EventFormat::Continuous ? 3 : 4;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto fields = split_line(line, options.delimiter);
    if (fields.size() != want)
      fail("load_events: line " + std::to_string(line_no) + ": expected " +
           std::to_string(want) + " fields, got " + std::to_string(fields.size()));
    // tolerate a header: numeric column fails to parse on the first line only
    Scalar numeric = 0.0;
    long integral = 0;
    const bool parses = format == EventFormat::Continuous
                            ? parse_scalar(fields[2], &numeric)
                            : (parse_long(fields[0], &integral) && parse_scalar(fields[3], &numeric));
    if (!parses) {
      if (first_data_line) {
        first_data_line = false;
        continue;
      }
      fail("load_events: line " + std::to_string(line_no) + ": malformed row");
    }
    first_data_line = false;

    if (format == EventFormat::Continuous) {
      const std::string& src_id = fields[0];
      const std::string& dst_id = fields[1];
      if (src_id == dst_id) {
        ++result.rejected_self_loops;
        continue;
      }
      require(numeric >= 0.0 && std::isfinite(numeric),
              "load_events: line " + std::to_string(line_no) + ": bad timestamp");
      const int src = result.registry.add(src_id);
      const int dst = result.registry.add(dst_id);
      cont.push_back({src, dst, numeric});
    } else {
      const std::string& src_id = fields[1];
      const std::string& dst_id = fields[2];
      if (src_id == dst_id) {
        ++result.rejected_self_loops;
        continue;
      }
      const long y = std::lround(numeric);
      require(y >= 0, "load_events: line " + std::to_string(line_no) + ": negative count");
      require(integral >= 0, "load_events: line " + std::to_string(line_no) + ": bad interval");
      if (y == 0) continue;  // zeros are implicit
      const int src = result.registry.add(src_id);
      const int dst = result.registry.add(dst_id);
      max_interval = std::max(max_interval, integral);
      const uint64_t key = (static_cast<uint64_t>(integral) << 44) |
                           (static_cast<uint64_t>(static_cast<uint32_t>(src)) << 22) |
                           static_cast<uint64_t>(static_cast<uint32_t>(dst));
      auto it = cell_index.find(key);
      if (it == cell_index.end()) {
        cell_index.emplace(key, cells.size());
        cells.push_back({static_cast<int>(integral), src, dst, y});
      } else {
        cells[it->second].count += y;
      }
    }
  }

  if (format == EventFormat::Continuous) {
    require(!cont.empty(), "load_events: no events");
    Scalar horizon = 0.0;
    for (const auto& e : cont) horizon = std::max(horizon, e.time);
    if (options.horizon) {
      require(*options.horizon >= horizon,
              "load_events: timestamp outside declared horizon");
      horizon = *options.horizon;
    }
    if (horizon <= 0.0) horizon = 1.0;  // all events at t = 0
    result.events = ContinuousEvents(std::move(cont), horizon);
  } else {
    require(!cells.empty(), "load_events: no events");
    int num_intervals = static_cast<int>(max_interval) + 1;
    if (options.num_intervals) {
      require(*options.num_intervals >= num_intervals,
              "load_events: interval index outside declared range");
      num_intervals = *options.num_intervals;
    }
    const Scalar horizon = options.horizon.value_or(static_cast<Scalar>(num_intervals));
    std::vector<Scalar> boundaries(static_cast<size_t>(num_intervals) + 1);
    for (int k = 0; k <= num_intervals; ++k)
      boundaries[static_cast<size_t>(k)] =
          horizon * static_cast<Scalar>(k) / static_cast<Scalar>(num_intervals);
    result.events =
        DiscreteEvents(std::move(boundaries), std::move(cells), result.registry.count());
  }
  return result;
}

void export_continuous(const ContinuousEvents& events, const NodeRegistry& registry,
                       const std::string& path, char delimiter) {
  std::ofstream out(path);
  require(out.good(), "export_continuous: cannot write '" + path + "'");
  out << "src" << delimiter << "dst" << delimiter << "time\n";
  char buf[64];
  for (const auto& e : events.records()) {
    std::snprintf(buf, sizeof(buf), "%.17g", e.time);
    out << registry.id_of(e.src) << delimiter << registry.id_of(e.dst) << delimiter << buf << "\n";
  }
}

void export_discrete(const DiscreteEvents& events, const NodeRegistry& registry,
                     const std::string& path, char delimiter) {
  std::ofstream out(path);
  require(out.good(), "export_discrete: cannot write '" + path + "'");
  out << "interval" << delimiter << "src" << delimiter << "dst" << delimiter << "count\n";
  for (const auto& c : events.positive_cells())
    out << c.interval << delimiter << registry.id_of(c.src) << delimiter << registry.id_of(c.dst)
        << delimiter << c.count << "\n";
}

DiscreteEvents discretize(const ContinuousEvents& events, int num_intervals, int num_nodes) {
  require(num_intervals >= 1, "discretize: need at least one interval");
  const Scalar horizon = events.horizon();
  std::vector<Scalar> boundaries(static_cast<size_t>(num_intervals) + 1);
  for (int k = 0; k <= num_intervals; ++k)
    boundaries[static_cast<size_t>(k)] =
        horizon * static_cast<Scalar>(k) / static_cast<Scalar>(num_intervals);

  std::unordered_map<uint64_t, DiscreteCell> agg;
  for (const auto& e : events.records()) {
    int k = static_cast<int>(e.time / horizon * static_cast<Scalar>(num_intervals));
    if (k >= num_intervals) k = num_intervals - 1;  // t = T lands in the last interval
    const uint64_t key = (static_cast<uint64_t>(static_cast<uint32_t>(k)) << 44) |
                         (static_cast<uint64_t>(static_cast<uint32_t>(e.src)) << 22) |
                         static_cast<uint64_t>(static_cast<uint32_t>(e.dst));
    auto it = agg.find(key);
    if (it == agg.end()) {
      agg.emplace(key, DiscreteCell{k, e.src, e.dst, 1});
    } else {
      it->second.count += 1;
    }
  }
  std::vector<DiscreteCell> cells;
  cells.reserve(agg.size());
  for (auto& kv : agg) cells.push_back(kv.second);
  std::sort(cells.begin(), cells.end(), [](const DiscreteCell& a, const DiscreteCell& b) {
    return std::tie(a.interval, a.src, a.dst) < std::tie(b.interval, b.src, b.dst);
  });
  return DiscreteEvents(std::move(boundaries), std::move(cells), num_nodes);
}

ContinuousEvents restrict_events(const ContinuousEvents& events, const std::vector<int>& nodes) {
  std::unordered_map<int, int> remap;
  for (size_t i = 0; i < nodes.size(); ++i) remap.emplace(nodes[i], static_cast<int>(i));
  std::vector<ContinuousEvent> kept;
  for (const auto& e : events.records()) {
    auto si = remap.find(e.src);
    auto di = remap.find(e.dst);
    if (si != remap.end() && di != remap.end()) kept.push_back({si->second, di->second, e.time});
  }
  return ContinuousEvents(std::move(kept), events.horizon());
}

DiscreteEvents restrict_events(const DiscreteEvents& events, const std::vector<int>& nodes) {
  std::unordered_map<int, int> remap;
  for (size_t i = 0; i < nodes.size(); ++i) remap.emplace(nodes[i], static_cast<int>(i));
  std::vector<DiscreteCell> kept;
  for (const auto& c : events.positive_cells()) {
    auto si = remap.find(c.src);
    auto di = remap.find(c.dst);
    if (si != remap.end() && di != remap.end())
      kept.push_back({c.interval, si->second, di->second, c.count});
  }
  return DiscreteEvents(events.boundaries(), std::move(kept), static_cast<int>(nodes.size()));
}

}  // namespace latnet

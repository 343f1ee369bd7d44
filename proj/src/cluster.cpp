#include "latnet/cluster.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <limits>
#include <unordered_map>

namespace latnet {

namespace {

class UnionFind {
 public:
  explicit UnionFind(int n) : parent_(static_cast<size_t>(n)), rank_(static_cast<size_t>(n), 0) {
    for (int i = 0; i < n; ++i) parent_[static_cast<size_t>(i)] = i;
  }

  int find(int x) {
    int root = x;
    while (parent_[static_cast<size_t>(root)] != root) root = parent_[static_cast<size_t>(root)];
    while (parent_[static_cast<size_t>(x)] != root) {
      const int next = parent_[static_cast<size_t>(x)];
      parent_[static_cast<size_t>(x)] = root;
      x = next;
    }
    return root;
  }

  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (rank_[static_cast<size_t>(a)] < rank_[static_cast<size_t>(b)]) std::swap(a, b);
    parent_[static_cast<size_t>(b)] = a;
    if (rank_[static_cast<size_t>(a)] == rank_[static_cast<size_t>(b)])
      ++rank_[static_cast<size_t>(a)];
  }

  // labels 0..C-1 in order of first appearance
  std::vector<int> labels() {
    std::vector<int> out(parent_.size(), -1);
    std::unordered_map<int, int> remap;
    for (size_t i = 0; i < parent_.size(); ++i) {
      const int root = find(static_cast<int>(i));
      auto it = remap.find(root);
      if (it == remap.end()) it = remap.emplace(root, static_cast<int>(remap.size())).first;
      out[i] = it->second;
    }
    return out;
  }

 private:
  std::vector<int> parent_;
  std::vector<int> rank_;
};

uint64_t cell_key(long a, long b, long c) {
  uint64_t h = splitmix64(static_cast<uint64_t>(a));
  h = splitmix64(h ^ static_cast<uint64_t>(b));
  return splitmix64(h ^ static_cast<uint64_t>(c));
}

}  // namespace

Coefficients pilot_freeze(const Coefficients& coeffs) { return coeffs; }

std::vector<int> connected_components(const Coefficients& pilot, Scalar radius) {
  require(radius >= 0.0, "connected_components: radius must be nonnegative");
  const ParamLayout& layout = pilot.layout();
  const int p = layout.p;
  UnionFind uf(p);

  if (radius <= 0.0) {
    // only exactly coincident coefficient blocks connect
    std::unordered_map<uint64_t, std::vector<int>> buckets;
    for (int i = 0; i < p; ++i) {
      uint64_t h = 0xcbf29ce484222325ULL;
      const Scalar* data = pilot.flat().data() + layout.node_offset(i);
      for (Index c = 0; c < layout.node_block(); ++c) {
        uint64_t bits = 0;
        std::memcpy(&bits, data + c, sizeof(bits));
        h = splitmix64(h ^ bits);
      }
      buckets[h].push_back(i);
    }
    for (const auto& [h, members] : buckets)
      for (size_t a = 1; a < members.size(); ++a)
        if ((pilot.node(members[a]) - pilot.node(members[0])).norm() == 0.0)
          uf.unite(members[0], members[a]);
    return uf.labels();
  }

  // grid hash on the first (up to) three flattened coordinates; any pair
  // within `radius` in the full space is within `radius` per coordinate, so
  // it lands in the same or an adjacent cell and is never missed.
  const Index feat = layout.node_block();
  const int gdims = static_cast<int>(std::min<Index>(3, feat));
  std::unordered_map<uint64_t, std::vector<int>> grid;
  std::vector<std::array<long, 3>> cells(static_cast<size_t>(p), {0, 0, 0});
  for (int i = 0; i < p; ++i) {
    const Scalar* data = pilot.flat().data() + layout.node_offset(i);
    auto& cell = cells[static_cast<size_t>(i)];
    for (int g = 0; g < gdims; ++g) cell[static_cast<size_t>(g)] = static_cast<long>(std::floor(data[g] / radius));
    grid[cell_key(cell[0], cell[1], cell[2])].push_back(i);
  }

  std::array<long, 3> offset{0, 0, 0};
  const long lo = -1, hi = 1;
  for (int i = 0; i < p; ++i) {
    const auto& cell = cells[static_cast<size_t>(i)];
    for (offset[0] = lo; offset[0] <= hi; ++offset[0]) {
      for (offset[1] = gdims > 1 ? lo : 0; offset[1] <= (gdims > 1 ? hi : 0); ++offset[1]) {
        for (offset[2] = gdims > 2 ? lo : 0; offset[2] <= (gdims > 2 ? hi : 0); ++offset[2]) {
          const auto it = grid.find(
              cell_key(cell[0] + offset[0], cell[1] + offset[1], cell[2] + offset[2]));
          if (it == grid.end()) continue;
          for (int j : it->second) {
            if (j <= i) continue;
            if ((pilot.node(i) - pilot.node(j)).norm() <= radius) uf.unite(i, j);
          }
        }
      }
    }
  }
  return uf.labels();
}

ClusterState make_cluster_state(const Coefficients& pilot, Scalar radius) {
  ClusterState state;
  state.pilot = pilot_freeze(pilot);
  state.radius = radius;
  state.labels = connected_components(state.pilot, radius);
  state.num_clusters =
      state.labels.empty() ? 0 : *std::max_element(state.labels.begin(), state.labels.end()) + 1;
  state.sizes.assign(static_cast<size_t>(state.num_clusters), 0);
  for (int label : state.labels) ++state.sizes[static_cast<size_t>(label)];
  return state;
}

ClusterState cluster_state_from_labels(const Coefficients& pilot, std::vector<int> labels) {
  require(static_cast<int>(labels.size()) == pilot.layout().p,
          "cluster_state_from_labels: label count mismatch");
  ClusterState state;
  state.pilot = pilot_freeze(pilot);
  state.radius = std::numeric_limits<Scalar>::quiet_NaN();
  state.labels = std::move(labels);
  state.num_clusters =
      state.labels.empty() ? 0 : *std::max_element(state.labels.begin(), state.labels.end()) + 1;
  state.sizes.assign(static_cast<size_t>(state.num_clusters), 0);
  for (int label : state.labels) {
    require(label >= 0, "cluster_state_from_labels: negative label");
    ++state.sizes[static_cast<size_t>(label)];
  }
  return state;
}

Matrix centroids(const std::vector<int>& labels, const Coefficients& coeffs) {
  const ParamLayout& layout = coeffs.layout();
  require(static_cast<int>(labels.size()) == layout.p, "centroids: label count mismatch");
  const int num_clusters =
      labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;

  Matrix sums = Matrix::Zero(static_cast<Index>(num_clusters) * layout.m, layout.d);
  std::vector<long> counts(static_cast<size_t>(num_clusters), 0);
  for (int i = 0; i < layout.p; ++i) {
    sums.middleRows(static_cast<Index>(labels[static_cast<size_t>(i)]) * layout.m, layout.m) +=
        coeffs.node(i);
    ++counts[static_cast<size_t>(labels[static_cast<size_t>(i)])];
  }
  for (int g = 0; g < num_clusters; ++g)
    sums.middleRows(static_cast<Index>(g) * layout.m, layout.m) /=
        static_cast<Scalar>(counts[static_cast<size_t>(g)]);

  Matrix out(static_cast<Index>(layout.p) * layout.m, layout.d);
  for (int i = 0; i < layout.p; ++i)
    out.middleRows(static_cast<Index>(i) * layout.m, layout.m) =
        sums.middleRows(static_cast<Index>(labels[static_cast<size_t>(i)]) * layout.m, layout.m);
  return out;
}

ValueGrad clust_penalty_fast(const Coefficients& coeffs, const Matrix& centroid_rows,
                             Scalar gamma_clust) {
  const ParamLayout& layout = coeffs.layout();
  ValueGrad out;
  out.grad = Vector::Zero(layout.size());
  for (int i = 0; i < layout.p; ++i) {
    const Matrix diff =
        coeffs.node(i) - centroid_rows.middleRows(static_cast<Index>(i) * layout.m, layout.m);
    out.value -= gamma_clust * diff.squaredNorm();
    BlockMap g = node_block(layout, out.grad, i);
    g.noalias() -= 2.0 * gamma_clust * diff;
  }
  return out;
}

FiniteClustResult clust_penalty_minibatch(const Coefficients& coeffs, const Matrix& centroid_rows,
                                          const std::vector<std::pair<int, int>>& penalty_batch,
                                          Scalar gamma_aux, Scalar gamma_dist) {
  const ParamLayout& layout = coeffs.layout();
  FiniteClustResult out;
  out.grad_coeffs = Vector::Zero(layout.size());
  out.grad_centroids = Matrix::Zero(centroid_rows.rows(), centroid_rows.cols());

  for (int i = 0; i < layout.p; ++i) {
    const Index row = static_cast<Index>(i) * layout.m;
    const Matrix diff = coeffs.node(i) - centroid_rows.middleRows(row, layout.m);
    out.value -= gamma_aux * diff.squaredNorm();
    BlockMap g = node_block(layout, out.grad_coeffs, i);
    g.noalias() -= 2.0 * gamma_aux * diff;
    out.grad_centroids.middleRows(row, layout.m) += 2.0 * gamma_aux * diff;
  }
  for (const auto& [i, j] : penalty_batch) {
    const Index ri = static_cast<Index>(i) * layout.m;
    const Index rj = static_cast<Index>(j) * layout.m;
    const Matrix diff = centroid_rows.middleRows(ri, layout.m) -
                        centroid_rows.middleRows(rj, layout.m);
    out.value -= gamma_dist * diff.squaredNorm();
    out.grad_centroids.middleRows(ri, layout.m) -= 2.0 * gamma_dist * diff;
    out.grad_centroids.middleRows(rj, layout.m) += 2.0 * gamma_dist * diff;
  }
  return out;
}

std::vector<SweepEntry> radius_sweep(const Coefficients& pilot, std::vector<Scalar> radii) {
  std::sort(radii.begin(), radii.end());
  std::vector<SweepEntry> out;
  out.reserve(radii.size());
  for (Scalar r : radii) {
    SweepEntry entry;
    entry.radius = r;
    entry.labels = connected_components(pilot, r);
    entry.num_clusters =
        entry.labels.empty() ? 0 : *std::max_element(entry.labels.begin(), entry.labels.end()) + 1;
    out.push_back(std::move(entry));
  }
  return out;
}

}  // namespace latnet

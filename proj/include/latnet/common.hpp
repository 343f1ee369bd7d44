#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <future>
#include <stdexcept>
#include <string>
#include <vector>

namespace latnet {

using Scalar = double;
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;
using Index = Eigen::Index;

// All recoverable failures surface as this; the CLI maps it to exit 1.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

[[noreturn]] inline void fail(const std::string& msg) { throw Error(msg); }

inline void require(bool cond, const std::string& msg) {
  if (!cond) fail(msg);
}

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Deterministic random stream. Distribution code is hand-rolled so that a
// given seed yields the same sequence on every platform and toolchain.
class Rng {
 public:
  explicit Rng(uint64_t seed = 0) : state_(splitmix64(seed ^ 0x5851f42d4c957f2dULL)) {}

  uint64_t next_u64() {
    // xorshift* on a splitmix-initialized state
    uint64_t x = state_;
    x ^= x >> 12;
    x ^= x << 25;
    x ^= x >> 27;
    state_ = x;
    return x * 0x2545f4914f6cdd1dULL;
  }

  // uniform in [0, 1)
  Scalar uniform() {
    return static_cast<Scalar>(next_u64() >> 11) * 0x1.0p-53;
  }

  Scalar uniform(Scalar lo, Scalar hi) { return lo + (hi - lo) * uniform(); }

  // uniform integer in [0, n)
  uint64_t below(uint64_t n) {
    require(n > 0, "Rng::below: empty range");
    // rejection sampling to avoid modulo bias
    uint64_t threshold = (~n + 1) % n;  // 2^64 mod n
    for (;;) {
      uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  // standard normal via Box-Muller (cached spare)
  Scalar normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    Scalar u1 = 0.0, u2 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    u2 = uniform();
    const Scalar r = std::sqrt(-2.0 * std::log(u1));
    const Scalar a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  Vector normal_vector(Index n) {
    Vector v(n);
    for (Index i = 0; i < n; ++i) v[i] = normal();
    return v;
  }

  // Poisson via inversion for small means, PTRS-style normal cutover is not
  // needed at desk scale; counts with mean > 50 use a normal approximation
  // rounded and clipped at 0.
  long poisson(Scalar mean) {
    require(mean >= 0.0 && std::isfinite(mean), "Rng::poisson: bad mean");
    if (mean == 0.0) return 0;
    if (mean < 50.0) {
      const Scalar limit = std::exp(-mean);
      long k = 0;
      Scalar prod = uniform();
      while (prod > limit) {
        ++k;
        prod *= uniform();
      }
      return k;
    }
    const Scalar x = mean + std::sqrt(mean) * normal();
    return x < 0.0 ? 0 : static_cast<long>(std::llround(x));
  }

  Scalar exponential(Scalar rate) {
    require(rate > 0.0, "Rng::exponential: rate must be positive");
    Scalar u;
    do {
      u = uniform();
    } while (u <= 0.0);
    return -std::log(u) / rate;
  }

  // independent child stream; label makes sibling forks distinct
  Rng fork(uint64_t label) const {
    Rng child(0);
    child.state_ = splitmix64(state_ ^ splitmix64(label + 0x9e3779b97f4a7c15ULL));
    return child;
  }

 private:
  uint64_t state_;
  bool has_spare_ = false;
  Scalar spare_ = 0.0;
};

// Splits [0, n) into fixed-size chunks and reduces per-chunk results in chunk
// order, so the floating-point sum is identical for any thread count.
template <typename Body>
void parallel_chunks(Index n, int threads, Index chunk, const Body& body) {
  if (n <= 0) return;
  const Index nchunks = (n + chunk - 1) / chunk;
  if (threads <= 1 || nchunks <= 1) {
    for (Index c = 0; c < nchunks; ++c) body(c, c * chunk, std::min(n, (c + 1) * chunk));
    return;
  }
  std::vector<std::future<void>> pending;
  std::atomic<Index> cursor{0};
  auto worker = [&] {
    for (;;) {
      const Index c = cursor.fetch_add(1);
      if (c >= nchunks) return;
      body(c, c * chunk, std::min(n, (c + 1) * chunk));
    }
  };
  const int spawn = std::min<int>(threads, static_cast<int>(nchunks));
  pending.reserve(static_cast<size_t>(spawn));
  for (int i = 0; i < spawn - 1; ++i) pending.push_back(std::async(std::launch::async, worker));
  worker();
  for (auto& f : pending) f.get();
}

}  // namespace latnet

#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace clft {

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

[[noreturn]] void fail(const std::string& msg);

std::string shape_str(const std::vector<int64_t>& shape);

/// Reads CLFT_THREADS and caps the OpenMP thread pool. No-op in serial builds.
void init_threads_from_env();
int worker_threads();

/// Deterministic RNG. All draws go through explicit arithmetic on mt19937_64
/// output (std::*_distribution is implementation-defined and would break
/// reproducibility across standard libraries).
class Rng {
public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  uint64_t next_u64() { return eng_(); }

  /// Uniform in [0, 1) with 53 bits.
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). n must be positive.
  int64_t uniform_int(int64_t n);

  /// Standard normal via Box-Muller.
  double normal();

  /// Normal(0, sigma) resampled until within clip*sigma of zero.
  double trunc_normal(double sigma, double clip = 2.0);

  /// Fisher-Yates permutation of {0, ..., n-1}.
  std::vector<int64_t> permutation(int64_t n);

private:
  std::mt19937_64 eng_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace clft

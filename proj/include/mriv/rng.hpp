#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace mriv::rng {

/// Quantile function of the standard normal distribution (Wichura's PPND16
/// rational approximation, absolute error well below 1e-9 on (0,1)).
double norm_quantile(double p);

/// Standard normal CDF.
double norm_cdf(double x);

/// SplitMix64 output function: maps a 64-bit value to a well-mixed 64-bit value.
std::uint64_t mix64(std::uint64_t z);

/// FNV-1a hash of a string, for deriving stream keys from names.
std::uint64_t hash_name(std::string_view s);

/// Counter-based random stream. Each stream is keyed by a 64-bit value; the
/// i-th output is mix64 of (key + i * golden gamma), so streams derived from
/// distinct keys are independent and draws do not depend on call ordering
/// elsewhere in the program.
class Stream {
 public:
  explicit Stream(std::uint64_t key) : state_(key) {}

  std::uint64_t next_u64();

  /// Uniform on [0, 1).
  double uniform();

  /// Uniform on (0, 1), usable as input to norm_quantile.
  double open_uniform();

  /// Standard normal draw (inverse-CDF method; one uniform per draw).
  double normal();

  /// Bernoulli draw with success probability p.
  bool bernoulli(double p);

  /// Fisher-Yates permutation of {0, ..., n-1}.
  std::vector<std::size_t> permutation(std::size_t n);

  /// Integer in [0, n).
  std::uint64_t below(std::uint64_t n);

 private:
  std::uint64_t state_;
};

/// Derives a stream key from a master seed and a path of context tags.
/// Distinct paths give statistically independent streams.
std::uint64_t derive(std::uint64_t master, std::initializer_list<std::uint64_t> path);

inline std::uint64_t derive(std::uint64_t master, std::string_view name) {
  return derive(master, {hash_name(name)});
}

inline std::uint64_t derive(std::uint64_t master, std::string_view name, std::uint64_t index) {
  return derive(master, {hash_name(name), index});
}

}  // namespace mriv::rng

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace batchquad {

// A single location in input space.
using Point = Eigen::VectorXd;
// A list of locations, one per row.
using Points = Eigen::MatrixXd;

// Bad caller input: dimension mismatch, negative integrand value, bad config.
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Factorisation failure or non-finite intermediate values.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Output file cannot be created or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Deterministic stream derivation: mixes a base seed with a list of tags so
// that every (run, batch, point, ...) cell gets an independent generator.
std::uint64_t splitmix64(std::uint64_t x);

template <typename... Tags>
std::uint64_t derive_seed(std::uint64_t seed, Tags... tags) {
  std::uint64_t h = splitmix64(seed);
  ((h = splitmix64(h ^ (static_cast<std::uint64_t>(tags) + 0x9E3779B97F4A7C15ULL))), ...);
  return h;
}

inline void require(bool cond, const std::string& what) {
  if (!cond) throw ArgumentError(what);
}

}  // namespace batchquad

namespace batchquad {

// Values and gradients of a scalar field at a list of points (one row each).
struct BatchEval {
  Eigen::VectorXd values;
  Eigen::MatrixXd gradients;
};

}  // namespace batchquad

#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace atlas {

using Eigen::MatrixXd;
using Eigen::VectorXd;

using PoiId = std::int32_t;
using Rng = std::mt19937_64;

// Independent stream `stream` of the generator family rooted at `seed`.
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return Rng(seq);
}

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid sizes or options supplied by the caller.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

// An argument outside the operation's domain (group index, delta, empty input...).
class DomainError : public Error {
 public:
  using Error::Error;
};

struct Trajectory {
  std::vector<PoiId> tokens;
  std::optional<int> group_label;  // ground-truth evaluation only; fitting never reads it
  std::optional<int> region_id;

  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

}  // namespace atlas

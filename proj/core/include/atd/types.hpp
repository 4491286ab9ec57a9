#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace atd {

using Index = Eigen::Index;

/// One grid, flattened row-major: pixel (r, c) lives at r * width + c.
using Field = Eigen::ArrayXd;

/// A stack of grids, one per row.
using FieldBatch = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InvalidArgument : Error {
  using Error::Error;
};

struct BudgetExhausted : Error {
  using Error::Error;
};

struct DuplicateQuery : Error {
  using Error::Error;
};

struct PlacementFailure : Error {
  using Error::Error;
};

struct NonFiniteScore : Error {
  using Error::Error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw InvalidArgument(message);
}

}  // namespace atd

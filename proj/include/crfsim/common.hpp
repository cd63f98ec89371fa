#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace crfsim {

/// Row-major dense 2-D array; the storage type for every per-pixel field.
template <typename Scalar>
using Grid = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using GridD = Grid<double>;
using GridF = Grid<float>;

/// Binary H x W assignment: 0 = background, 1 = object.
using Labeling = Grid<std::uint8_t>;

inline constexpr const char* kVersionString = "crfsim 0.1.0";

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Shapes or sizes that do not agree.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Bad user-supplied configuration (maps to CLI exit code 2).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// File-system or malformed-data failures (maps to CLI exit code 3).
class IoError : public Error {
public:
    using Error::Error;
};

inline std::string dimsString(Eigen::Index rows, Eigen::Index cols) {
    return std::to_string(rows) + "x" + std::to_string(cols);
}

}  // namespace crfsim

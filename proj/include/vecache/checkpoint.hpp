#pragma once

// Named-array checkpoint container.
//
// Layout (little-endian):
//   char[4]  magic "VCKP"
//   u32      format version
//   u32      array count
//   per array: u32 name length, name bytes, u32 rows, u32 cols,
//              rows*cols f64 values in column-major order

#include <Eigen/Dense>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace vecache::checkpoint {

inline constexpr std::uint32_t kFormatVersion = 1;

struct NamedArrays {
  std::vector<std::pair<std::string, Eigen::MatrixXd>> arrays;

  void put(std::string name, Eigen::MatrixXd value);
  /// Throws DataError when missing.
  const Eigen::MatrixXd& get(const std::string& name) const;
  bool contains(const std::string& name) const;
};

void write(std::ostream& out, const NamedArrays& arrays);
/// Throws DataError on bad magic, unsupported version or truncation.
NamedArrays read(std::istream& in);

}  // namespace vecache::checkpoint

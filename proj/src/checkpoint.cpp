#include "vecache/checkpoint.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>

#include "vecache/error.hpp"

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace vecache::checkpoint {

namespace {

constexpr std::array<char, 4> kMagic{'V', 'C', 'K', 'P'};

void put_u32(std::ostream& out, std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); }

std::uint32_t get_u32(std::istream& in) {
  std::uint32_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw DataError("checkpoint: truncated header");
  return v;
}

}  // namespace

void NamedArrays::put(std::string name, Eigen::MatrixXd value) {
  for (auto& [n, v] : arrays)
    if (n == name) {
      v = std::move(value);
      return;
    }
  arrays.emplace_back(std::move(name), std::move(value));
}

const Eigen::MatrixXd& NamedArrays::get(const std::string& name) const {
  for (const auto& [n, v] : arrays)
    if (n == name) return v;
  throw DataError("checkpoint: missing array '" + name + "'");
}

bool NamedArrays::contains(const std::string& name) const {
  return std::any_of(arrays.begin(), arrays.end(), [&](const auto& p) { return p.first == name; });
}

void write(std::ostream& out, const NamedArrays& arrays) {
  out.write(kMagic.data(), kMagic.size());
  put_u32(out, kFormatVersion);
  put_u32(out, static_cast<std::uint32_t>(arrays.arrays.size()));
  for (const auto& [name, m] : arrays.arrays) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u32(out, static_cast<std::uint32_t>(m.rows()));
    put_u32(out, static_cast<std::uint32_t>(m.cols()));
    out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
  }
  if (!out) throw std::runtime_error("checkpoint: write failed");
}

NamedArrays read(std::istream& in) {
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) throw DataError("checkpoint: bad magic");
  const auto version = get_u32(in);
  if (version != kFormatVersion) throw DataError("checkpoint: unsupported format version " + std::to_string(version));
  const auto count = get_u32(in);
  NamedArrays result;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name(get_u32(in), '\0');
    if (!in.read(name.data(), static_cast<std::streamsize>(name.size()))) throw DataError("checkpoint: truncated name");
    const auto rows = get_u32(in);
    const auto cols = get_u32(in);
    Eigen::MatrixXd m(rows, cols);
    if (!in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double))))
      throw DataError("checkpoint: truncated array '" + name + "'");
    result.arrays.emplace_back(std::move(name), std::move(m));
  }
  return result;
}

}  // namespace vecache::checkpoint

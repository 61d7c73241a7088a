#pragma once

// Checkpoint layout (all integers and floats little-endian):
//   char[8]  magic "AOIQNET1"
//   u32      head kind (0 plain, 1 dueling)
//   u32      inputs
//   u32      outputs
//   u32      hidden layer count H, then u32 width x H
//   u64      seed the network was trained from
//   u64      parameter count P
//   f64 x P  flat parameters

#include <aoi/error.hpp>
#include <aoi/nn/dense_net.hpp>

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

namespace aoi::nn {

inline constexpr std::array<char, 8> kCheckpointMagic{'A', 'O', 'I', 'Q', 'N', 'E', 'T', '1'};

namespace detail {

template <typename U>
void put_le(std::ostream& os, U value) {
  std::array<unsigned char, sizeof(U)> bytes{};
  for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<unsigned char>(value >> (8 * i));
  os.write(reinterpret_cast<const char*>(bytes.data()), bytes.size());
}

template <typename U>
U get_le(std::istream& is) {
  std::array<unsigned char, sizeof(U)> bytes{};
  if (!is.read(reinterpret_cast<char*>(bytes.data()), bytes.size()))
    throw Error("bad_checkpoint", "truncated checkpoint");
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) value |= static_cast<U>(bytes[i]) << (8 * i);
  return value;
}

}  // namespace detail

struct Checkpoint {
  DenseNet net;
  std::uint64_t seed = 0;
};

inline void save_checkpoint(std::ostream& os, const DenseNet& net, std::uint64_t seed) {
  const Topology& t = net.topology();
  os.write(kCheckpointMagic.data(), kCheckpointMagic.size());
  detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(t.head));
  detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(t.inputs));
  detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(t.outputs));
  detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(t.hidden.size()));
  for (std::size_t h : t.hidden) detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(h));
  detail::put_le<std::uint64_t>(os, seed);
  detail::put_le<std::uint64_t>(os, net.param_count());
  for (double p : net.params()) detail::put_le<std::uint64_t>(os, std::bit_cast<std::uint64_t>(p));
  if (!os) throw Error("io_error", "failed to write checkpoint");
}

inline Checkpoint load_checkpoint(std::istream& is) {
  std::array<char, 8> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kCheckpointMagic)
    throw Error("bad_checkpoint", "not a network checkpoint");
  Topology t;
  const auto head = detail::get_le<std::uint32_t>(is);
  if (head > 1) throw Error("bad_checkpoint", "unknown head kind");
  t.head = static_cast<HeadKind>(head);
  t.inputs = detail::get_le<std::uint32_t>(is);
  t.outputs = detail::get_le<std::uint32_t>(is);
  const auto depth = detail::get_le<std::uint32_t>(is);
  if (depth == 0 || depth > 64) throw Error("bad_checkpoint", "implausible layer count");
  t.hidden.resize(depth);
  for (auto& h : t.hidden) h = detail::get_le<std::uint32_t>(is);
  Checkpoint cp{DenseNet(t), detail::get_le<std::uint64_t>(is)};
  if (detail::get_le<std::uint64_t>(is) != cp.net.param_count())
    throw Error("bad_checkpoint", "parameter count does not match topology");
  for (double& p : cp.net.params()) p = std::bit_cast<double>(detail::get_le<std::uint64_t>(is));
  return cp;
}

inline void save_checkpoint(const std::string& path, const DenseNet& net, std::uint64_t seed) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("io_error", "cannot open '" + path + "' for writing");
  save_checkpoint(os, net, seed);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("io_error", "cannot open '" + path + "'");
  return load_checkpoint(is);
}

}  // namespace aoi::nn

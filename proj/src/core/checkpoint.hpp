#pragma once

#include <array>
#include <string>
#include <tuple>
#include <vector>

#include "core/tensor.hpp"

namespace svc {

struct CheckpointData {
  uint64_t step = 0;
  uint64_t rng_state = 0;
  std::array<uint8_t, 32> config_hash{};
  // ordered (name, shape, values); values converted to the build precision
  std::vector<std::tuple<std::string, ad::Shape, std::vector<Real>>> tensors;

  const std::vector<Real>* find(const std::string& name) const;
};

// magic "SVCK", u32 version, u64 step, u32 n_tensors, per tensor: u16 name
// length, name bytes, u8 dtype (0=f32, 1=f64), u32 ndim, u32 dims, raw LE
// data; then u64 PRNG state and the 32-byte config hash.
void save_checkpoint(const std::string& path, const CheckpointData& d);
CheckpointData load_checkpoint(const std::string& path);

}  // namespace svc

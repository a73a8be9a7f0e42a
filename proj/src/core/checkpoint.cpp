#include "core/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace svc {

namespace {

constexpr uint32_t kVersion = 1;

template <typename T>
void put_le(std::vector<uint8_t>& out, T v) {
  for (size_t i = 0; i < sizeof(T); ++i) out.push_back(uint8_t(uint64_t(v) >> (8 * i)));
}

template <typename T>
T get_le(const uint8_t* p) {
  uint64_t v = 0;
  for (size_t i = 0; i < sizeof(T); ++i) v |= uint64_t(p[i]) << (8 * i);
  return T(v);
}

struct Reader {
  const std::vector<uint8_t>& buf;
  size_t pos = 0;
  const std::string& origin;

  const uint8_t* take(size_t n) {
    SVC_CHECK(pos + n <= buf.size(), ErrorCode::Format, "corrupt checkpoint: " << origin);
    const uint8_t* p = buf.data() + pos;
    pos += n;
    return p;
  }
};

}  // namespace

const std::vector<Real>* CheckpointData::find(const std::string& name) const {
  for (const auto& [n, shape, values] : tensors)
    if (n == name) return &values;
  return nullptr;
}

void save_checkpoint(const std::string& path, const CheckpointData& d) {
  std::vector<uint8_t> out;
  out.insert(out.end(), {'S', 'V', 'C', 'K'});
  put_le<uint32_t>(out, kVersion);
  put_le<uint64_t>(out, d.step);
  put_le<uint32_t>(out, uint32_t(d.tensors.size()));
  const uint8_t dtype = sizeof(Real) == 4 ? 0 : 1;
  for (const auto& [name, shape, values] : d.tensors) {
    SVC_CHECK(name.size() <= 0xffff, ErrorCode::InvalidArgument, "tensor name too long");
    put_le<uint16_t>(out, uint16_t(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    out.push_back(dtype);
    put_le<uint32_t>(out, uint32_t(shape.size()));
    for (long dim : shape) put_le<uint32_t>(out, uint32_t(dim));
    for (Real v : values) {
      if (dtype == 0) {
        const float f = float(v);
        uint32_t bits;
        std::memcpy(&bits, &f, 4);
        put_le<uint32_t>(out, bits);
      } else {
        const double f = double(v);
        uint64_t bits;
        std::memcpy(&bits, &f, 8);
        put_le<uint64_t>(out, bits);
      }
    }
  }
  put_le<uint64_t>(out, d.rng_state);
  out.insert(out.end(), d.config_hash.begin(), d.config_hash.end());

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  SVC_CHECK(f.good(), ErrorCode::Io, "cannot write checkpoint: " << path);
  f.write(reinterpret_cast<const char*>(out.data()), std::streamsize(out.size()));
  SVC_CHECK(f.good(), ErrorCode::Io, "checkpoint write failed: " << path);
}

CheckpointData load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  SVC_CHECK(in.good(), ErrorCode::Io, "cannot open checkpoint: " << path);
  std::vector<uint8_t> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Reader r{buf, 0, path};

  const uint8_t* magic = r.take(4);
  SVC_CHECK(std::memcmp(magic, "SVCK", 4) == 0, ErrorCode::Format,
            "not a checkpoint file (bad magic): " << path);
  const uint32_t version = get_le<uint32_t>(r.take(4));
  SVC_CHECK(version == kVersion, ErrorCode::Format,
            "checkpoint version mismatch (got " << version << ", want " << kVersion << "): " << path);

  CheckpointData d;
  d.step = get_le<uint64_t>(r.take(8));
  const uint32_t n_tensors = get_le<uint32_t>(r.take(4));
  d.tensors.reserve(n_tensors);
  for (uint32_t i = 0; i < n_tensors; ++i) {
    const uint16_t name_len = get_le<uint16_t>(r.take(2));
    const uint8_t* name_bytes = r.take(name_len);
    std::string name(reinterpret_cast<const char*>(name_bytes), name_len);
    const uint8_t dtype = *r.take(1);
    SVC_CHECK(dtype <= 1, ErrorCode::Format, "corrupt checkpoint (bad dtype): " << path);
    const uint32_t ndim = get_le<uint32_t>(r.take(4));
    ad::Shape shape(ndim);
    long count = 1;
    for (uint32_t j = 0; j < ndim; ++j) {
      shape[j] = long(get_le<uint32_t>(r.take(4)));
      count *= shape[j];
    }
    std::vector<Real> values(size_t(count));
    for (long j = 0; j < count; ++j) {
      if (dtype == 0) {
        const uint32_t bits = get_le<uint32_t>(r.take(4));
        float f;
        std::memcpy(&f, &bits, 4);
        values[size_t(j)] = Real(f);
      } else {
        const uint64_t bits = get_le<uint64_t>(r.take(8));
        double f;
        std::memcpy(&f, &bits, 8);
        values[size_t(j)] = Real(f);
      }
    }
    d.tensors.emplace_back(std::move(name), std::move(shape), std::move(values));
  }
  d.rng_state = get_le<uint64_t>(r.take(8));
  const uint8_t* hash = r.take(32);
  std::memcpy(d.config_hash.data(), hash, 32);
  return d;
}

}  // namespace svc

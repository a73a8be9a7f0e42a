#pragma once

#include <cmath>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace svc {

// Storage precision is fixed per build: float by default, double when the
// target is compiled with SVC_REAL_DOUBLE (used by the numeric test suites).
#ifdef SVC_REAL_DOUBLE
using Real = double;
#else
using Real = float;
#endif

constexpr double kLogFloor = 1e-10;  // added under every log of an energy

enum class ErrorCode {
  Io = 1,
  Format = 2,
  Config = 3,
  InvalidArgument = 4,
  State = 5,
  Numeric = 6,
  NotFound = 7,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& msg) { throw Error(code, msg); }

#define SVC_CHECK(cond, code, msg)                           \
  do {                                                       \
    if (!(cond)) {                                           \
      std::ostringstream svc_check_oss_;                     \
      svc_check_oss_ << msg;                                 \
      ::svc::raise((code), svc_check_oss_.str());            \
    }                                                        \
  } while (0)

// splitmix64: the single PRNG used project-wide. Sequential draws advance
// the state; positional draws are a pure function of (seed, index) so the
// streaming and offline synthesis paths see identical noise.
inline uint64_t splitmix64_mix(uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

class Rng {
 public:
  explicit Rng(uint64_t seed = 0) : state_(seed) {}

  uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ull;
    return splitmix64_mix(state_);
  }

  // uniform in [0, 1)
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double normal() {
    double u1 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  uint64_t state() const { return state_; }
  void set_state(uint64_t s) { state_ = s; }

 private:
  uint64_t state_;
};

inline uint64_t u64_at(uint64_t seed, uint64_t index) {
  return splitmix64_mix(seed + (index + 1) * 0x9E3779B97F4A7C15ull);
}

inline double uniform01_at(uint64_t seed, uint64_t index) {
  return static_cast<double>(u64_at(seed, index) >> 11) * 0x1.0p-53;
}

}  // namespace svc

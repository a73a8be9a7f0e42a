#pragma once

#include "core/common.hpp"

namespace svc {

// Frame i is centered at sample i*hop; edges are reflect padded. Every
// conditioning feature shares one grid so frame tracks concatenate exactly.
struct FrameGrid {
  long frame_size = 0;
  long hop = 0;
  long n_frames = 0;
  int sample_rate = 0;

  static FrameGrid for_signal(long n_samples, long frame_size, long hop, int sample_rate) {
    SVC_CHECK(hop >= 1, ErrorCode::InvalidArgument, "hop must be >= 1");
    SVC_CHECK(frame_size >= hop, ErrorCode::InvalidArgument, "frame_size must be >= hop");
    SVC_CHECK(n_samples >= 1, ErrorCode::InvalidArgument, "signal length >= 1 required");
    FrameGrid g;
    g.frame_size = frame_size;
    g.hop = hop;
    g.n_frames = n_samples / hop + 1;
    g.sample_rate = sample_rate;
    return g;
  }

  long center(long frame) const { return frame * hop; }

  bool compatible(const FrameGrid& o) const {
    return hop == o.hop && n_frames == o.n_frames && sample_rate == o.sample_rate;
  }
};

// Symmetric reflection without edge duplication: x[-1] -> x[1].
inline long reflect_index(long q, long n) {
  if (n == 1) return 0;
  const long period = 2 * (n - 1);
  q = ((q % period) + period) % period;
  return q < n ? q : period - q;
}

}  // namespace svc

#include "core/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace svc {

namespace {

constexpr double kMaxDeviation = 0.2;

long common_frames(const F0Track& ref, const F0Track& hyp) {
  const long n = std::min(ref.n_frames(), hyp.n_frames());
  SVC_CHECK(n > 0, ErrorCode::InvalidArgument, "zero frames in metric comparison");
  return n;
}

bool frame_errs(const F0Track& ref, const F0Track& hyp, long i, bool pitch_sensitive) {
  const bool rv = ref.voiced[size_t(i)] != 0;
  const bool hv = hyp.voiced[size_t(i)] != 0;
  if (rv != hv) return true;
  if (!pitch_sensitive || !rv) return false;
  const double fr = ref.f0_hz[size_t(i)];
  SVC_CHECK(fr > 0.0, ErrorCode::InvalidArgument,
            "voiced reference frame " << i << " carries f0=0 (corrupt track)");
  return std::abs(hyp.f0_hz[size_t(i)] - fr) / fr > kMaxDeviation;
}

}  // namespace

double voicing_decision_error(const F0Track& ref, const F0Track& hyp) {
  const long n = common_frames(ref, hyp);
  long errs = 0;
  for (long i = 0; i < n; ++i)
    if (frame_errs(ref, hyp, i, false)) ++errs;
  return double(errs) / double(n);
}

double f0_frame_error(const F0Track& ref, const F0Track& hyp) {
  const long n = common_frames(ref, hyp);
  long errs = 0;
  for (long i = 0; i < n; ++i)
    if (frame_errs(ref, hyp, i, true)) ++errs;
  return double(errs) / double(n);
}

MetricReport compare_f0_tracks(const F0Track& ref, const F0Track& hyp) {
  MetricReport r;
  r.n_frames = common_frames(ref, hyp);
  r.trimmed = ref.n_frames() != hyp.n_frames();
  r.vde = voicing_decision_error(ref, hyp);
  r.ffe = f0_frame_error(ref, hyp);
  return r;
}

}  // namespace svc

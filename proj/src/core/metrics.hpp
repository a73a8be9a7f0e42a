#pragma once

#include "core/dsp.hpp"

namespace svc {

struct MetricReport {
  double vde = 0.0;
  double ffe = 0.0;
  long n_frames = 0;
  bool trimmed = false;  // tracks had different lengths and were cut to match
};

// fraction of frames whose voicing decisions disagree
double voicing_decision_error(const F0Track& ref, const F0Track& hyp);

// fraction of frames with a voicing error or, on both-voiced frames, a pitch
// deviation of strictly more than 20% relative to the reference
double f0_frame_error(const F0Track& ref, const F0Track& hyp);

MetricReport compare_f0_tracks(const F0Track& ref, const F0Track& hyp);

}  // namespace svc

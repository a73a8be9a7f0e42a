#pragma once

#include <string>
#include <vector>

#include "core/nets.hpp"

namespace svc {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Rectified Adam: Adam moments with the variance-rectification term; falls
// back to the un-adapted momentum update while rho_t <= 4.
class Radam {
 public:
  explicit Radam(ParamStore& store, AdamConfig cfg = {});

  void step(double lr);
  uint64_t steps_taken() const { return t_; }

  struct LeafState {
    std::string name;
    ad::Tensor tensor;
    std::vector<Real> m;
    std::vector<Real> v;
  };
  std::vector<LeafState>& leaves() { return leaves_; }
  void set_steps_taken(uint64_t t) { t_ = t; }

 private:
  AdamConfig cfg_;
  std::vector<LeafState> leaves_;
  uint64_t t_ = 0;
};

// Scales gradients so the global norm is at most max_norm; returns the norm
// before clipping.
double clip_grad_norm(ParamStore& store, double max_norm, bool* clipped);

}  // namespace svc

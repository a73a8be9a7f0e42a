#include "core/optim.hpp"

#include <cmath>

namespace svc {

Radam::Radam(ParamStore& store, AdamConfig cfg) : cfg_(cfg) {
  for (const auto& p : store.all()) {
    if (p->weight_normed) {
      leaves_.push_back({p->name + ".v", p->v, {}, {}});
      leaves_.push_back({p->name + ".g", p->g, {}, {}});
    } else {
      leaves_.push_back({p->name, p->value, {}, {}});
    }
  }
  for (auto& leaf : leaves_) {
    leaf.m.assign(size_t(leaf.tensor.numel()), Real(0));
    leaf.v.assign(size_t(leaf.tensor.numel()), Real(0));
  }
}

void Radam::step(double lr) {
  ++t_;
  const double b1 = cfg_.beta1, b2 = cfg_.beta2;
  const double t = double(t_);
  const double rho_inf = 2.0 / (1.0 - b2) - 1.0;
  const double b1t = std::pow(b1, t);
  const double b2t = std::pow(b2, t);
  const double rho_t = rho_inf - 2.0 * t * b2t / (1.0 - b2t);
  const bool rectified = rho_t > 4.0;
  double r = 1.0;
  if (rectified)
    r = std::sqrt(((rho_t - 4.0) * (rho_t - 2.0) * rho_inf) /
                  ((rho_inf - 4.0) * (rho_inf - 2.0) * rho_t));

  for (auto& leaf : leaves_) {
    auto& data = leaf.tensor.data();
    auto& grad = leaf.tensor.grad();
    for (size_t i = 0; i < data.size(); ++i) {
      const double g = double(grad[i]);
      if (debug_checks())
        SVC_CHECK(std::isfinite(g), ErrorCode::Numeric, "NaN gradient in " << leaf.name);
      const double m = b1 * double(leaf.m[i]) + (1.0 - b1) * g;
      const double v = b2 * double(leaf.v[i]) + (1.0 - b2) * g * g;
      leaf.m[i] = Real(m);
      leaf.v[i] = Real(v);
      const double m_hat = m / (1.0 - b1t);
      double update;
      if (rectified) {
        const double v_hat = std::sqrt(v / (1.0 - b2t));
        update = lr * r * m_hat / (v_hat + cfg_.eps);
      } else {
        update = lr * m_hat;
      }
      data[i] = Real(double(data[i]) - update);
    }
  }
}

double clip_grad_norm(ParamStore& store, double max_norm, bool* clipped) {
  double sq = 0.0;
  for (const auto& p : store.all())
    for (auto t : p->leaves())
      for (Real g : t.grad()) sq += double(g) * double(g);
  const double norm = std::sqrt(sq);
  if (clipped) *clipped = false;
  if (max_norm > 0.0 && norm > max_norm) {
    const Real s = Real(max_norm / norm);
    for (const auto& p : store.all())
      for (auto t : p->leaves())
        for (Real& g : t.grad()) g *= s;
    if (clipped) *clipped = true;
  }
  return norm;
}

}  // namespace svc

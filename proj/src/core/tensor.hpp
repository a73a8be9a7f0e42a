#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "core/common.hpp"

namespace svc::ad {

using Shape = std::vector<long>;

long numel(const Shape& s);

struct Node {
  std::vector<Real> data;
  std::vector<Real> grad;
  Shape shape;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void()> backward_fn;  // reads this->grad, accumulates into parents
  uint64_t visit_mark = 0;

  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), Real(0));
  }
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> n) : node_(std::move(n)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor from_data(std::vector<Real> data, Shape shape, bool requires_grad = false);
  static Tensor scalar_value(Real v);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  long size(int dim) const { return node_->shape[size_t(dim)]; }
  long numel() const { return long(node_->data.size()); }
  bool requires_grad() const { return node_->requires_grad; }

  std::vector<Real>& data() { return node_->data; }
  const std::vector<Real>& data() const { return node_->data; }
  std::vector<Real>& grad() {
    node_->ensure_grad();
    return node_->grad;
  }

  Real scalar() const;
  Tensor detach() const;

  std::shared_ptr<Node>& node() { return node_; }
  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

// While alive, newly built ops do not record the graph (used for the
// no-gradient generation passes).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

bool grad_enabled();

// Abort-on-NaN checks after every op (and on gradients in the optimizer).
void set_debug_checks(bool on);
bool debug_checks();

// Reverse-mode sweep from a scalar loss; gradients accumulate until cleared.
void backward(const Tensor& scalar_loss);

// elementwise / reductions (b may be a scalar tensor where noted)
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);  // scalar broadcast allowed
Tensor scale(const Tensor& a, Real c);
Tensor add_const(const Tensor& a, Real c);
Tensor neg(const Tensor& a);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor abs_t(const Tensor& a);
Tensor log_eps(const Tensor& a, Real eps);
Tensor sqrt_guard(const Tensor& a, Real grad_floor);

enum class UnaryKind { Tanh, Sigmoid, LeakyRelu };
Tensor unary(UnaryKind kind, const Tensor& a, Real leak = Real(0.2));
Tensor tanh_t(const Tensor& a);
Tensor sigmoid_t(const Tensor& a);
Tensor leaky_relu(const Tensor& a, Real leak = Real(0.2));

// structure ops on [C, T] tensors
Tensor concat_channels(const Tensor& a, const Tensor& b);
Tensor slice_time(const Tensor& a, long t0, long t1);
Tensor broadcast_time(const Tensor& vec, long t);
Tensor nn_upsample(const Tensor& x, long factor);

// y[c,t] = bias[c] + sum_{i,j} w[c,i,j] * x[i, t + (j-(k-1)/2)*d], zero padded
Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& bias, long dilation);

// constant-matrix channel mix: y = M x, M row-major [rows][C_in]
Tensor channel_matmul_const(const Tensor& x, const std::vector<double>& m, long rows);

// per-output-channel g * v / ||v||
Tensor weight_norm_effective(const Tensor& v, const Tensor& g);

// Hann-windowed reflect-centered real-DFT magnitudes, explicit basis.
// Output is [bins, frames]; forward matches the dsp stft.
Tensor dft_magnitude(const Tensor& x, long fft_size, long hop);

// Framed normalized autocorrelation over the lag range, [n_lags, frames].
Tensor framed_norm_autocorr(const Tensor& x, long frame_size, long hop, long lag_min, long lag_max);

}  // namespace svc::ad

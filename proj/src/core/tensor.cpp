#include "core/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

namespace svc::ad {

namespace {

thread_local bool g_no_grad = false;
std::atomic<bool> g_debug_checks{false};
std::atomic<uint64_t> g_visit_counter{1};

void check_finite(const Node& n) {
  if (!g_debug_checks.load(std::memory_order_relaxed)) return;
  for (Real v : n.data)
    SVC_CHECK(std::isfinite(double(v)), ErrorCode::Numeric, "non-finite value produced by op");
}

std::shared_ptr<Node> make_node(Shape shape, std::vector<std::shared_ptr<Node>> parents) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->data.assign(size_t(numel(n->shape)), Real(0));
  if (!g_no_grad) {
    for (const auto& p : parents) n->requires_grad = n->requires_grad || p->requires_grad;
  }
  if (n->requires_grad) n->parents = std::move(parents);
  return n;
}

}  // namespace

long numel(const Shape& s) {
  long n = 1;
  for (long d : s) n *= d;
  return n;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->data.assign(size_t(ad::numel(n->shape)), Real(0));
  n->requires_grad = requires_grad && !g_no_grad;
  return Tensor(n);
}

Tensor Tensor::from_data(std::vector<Real> data, Shape shape, bool requires_grad) {
  SVC_CHECK(long(data.size()) == ad::numel(shape), ErrorCode::InvalidArgument,
            "data size does not match shape");
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->data = std::move(data);
  n->requires_grad = requires_grad && !g_no_grad;
  return Tensor(n);
}

Tensor Tensor::scalar_value(Real v) { return from_data({v}, {1}, false); }

Real Tensor::scalar() const {
  SVC_CHECK(numel() == 1, ErrorCode::InvalidArgument, "tensor is not a scalar");
  return node_->data[0];
}

Tensor Tensor::detach() const {
  auto n = std::make_shared<Node>();
  n->shape = node_->shape;
  n->data = node_->data;
  n->requires_grad = false;
  return Tensor(n);
}

NoGradGuard::NoGradGuard() : prev_(g_no_grad) { g_no_grad = true; }
NoGradGuard::~NoGradGuard() { g_no_grad = prev_; }

bool grad_enabled() { return !g_no_grad; }

void set_debug_checks(bool on) { g_debug_checks.store(on, std::memory_order_relaxed); }
bool debug_checks() { return g_debug_checks.load(std::memory_order_relaxed); }

void backward(const Tensor& scalar_loss) {
  SVC_CHECK(scalar_loss.defined() && scalar_loss.numel() == 1, ErrorCode::InvalidArgument,
            "backward requires a scalar loss");
  Node* root = scalar_loss.node().get();
  if (!root->requires_grad) return;

  const uint64_t mark = g_visit_counter.fetch_add(1);

  // iterative post-order over grad-requiring nodes
  std::vector<Node*> order;
  std::vector<std::pair<Node*, size_t>> stack;
  root->visit_mark = mark;
  stack.emplace_back(root, 0);
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      Node* p = node->parents[idx].get();
      ++idx;
      if (p->requires_grad && p->visit_mark != mark) {
        p->visit_mark = mark;
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root->ensure_grad();
  root->grad[0] += Real(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backward_fn) (*it)->backward_fn();
  }
}

// ---- elementwise ops ----

namespace {

// shapes must match, or one side is a scalar
void binary_shape_check(const Tensor& a, const Tensor& b, const char* op) {
  if (a.numel() == 1 || b.numel() == 1) return;
  SVC_CHECK(a.shape() == b.shape(), ErrorCode::InvalidArgument, "shape mismatch in " << op);
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  binary_shape_check(a, b, "add");
  const bool a_scalar = a.numel() == 1, b_scalar = b.numel() == 1;
  const Shape& out_shape = a_scalar && !b_scalar ? b.shape() : a.shape();
  auto n = make_node(out_shape, {a.node(), b.node()});
  const long cnt = long(n->data.size());
  for (long i = 0; i < cnt; ++i)
    n->data[size_t(i)] = a.data()[a_scalar ? 0 : size_t(i)] + b.data()[b_scalar ? 0 : size_t(i)];
  if (n->requires_grad) {
    Node* out = n.get();
    Node* na = a.node().get();
    Node* nb = b.node().get();
    n->backward_fn = [out, na, nb, a_scalar, b_scalar]() {
      if (na->requires_grad) {
        na->ensure_grad();
        for (size_t i = 0; i < out->grad.size(); ++i) na->grad[a_scalar ? 0 : i] += out->grad[i];
      }
      if (nb->requires_grad) {
        nb->ensure_grad();
        for (size_t i = 0; i < out->grad.size(); ++i) nb->grad[b_scalar ? 0 : i] += out->grad[i];
      }
    };
  }
  check_finite(*n);
  return Tensor(n);
}

Tensor sub(const Tensor& a, const Tensor& b) { return add(a, neg(b)); }

Tensor mul(const Tensor& a, const Tensor& b) {
  binary_shape_check(a, b, "mul");
  const bool a_scalar = a.numel() == 1, b_scalar = b.numel() == 1;
  const Shape& out_shape = a_scalar && !b_scalar ? b.shape() : a.shape();
  auto n = make_node(out_shape, {a.node(), b.node()});
  const long cnt = long(n->data.size());
  for (long i = 0; i < cnt; ++i)
    n->data[size_t(i)] = a.data()[a_scalar ? 0 : size_t(i)] * b.data()[b_scalar ? 0 : size_t(i)];
  if (n->requires_grad) {
    Node* out = n.get();
    Node* na = a.node().get();
    Node* nb = b.node().get();
    n->backward_fn = [out, na, nb, a_scalar, b_scalar]() {
      if (na->requires_grad) {
        na->ensure_grad();
        for (size_t i = 0; i < out->grad.size(); ++i)
          na->grad[a_scalar ? 0 : i] += out->grad[i] * nb->data[b_scalar ? 0 : i];
      }
      if (nb->requires_grad) {
        nb->ensure_grad();
        for (size_t i = 0; i < out->grad.size(); ++i)
          nb->grad[b_scalar ? 0 : i] += out->grad[i] * na->data[a_scalar ? 0 : i];
      }
    };
  }
  check_finite(*n);
  return Tensor(n);
}

Tensor scale(const Tensor& a, Real c) {
  auto n = make_node(a.shape(), {a.node()});
  for (size_t i = 0; i < n->data.size(); ++i) n->data[i] = a.data()[i] * c;
  if (n->requires_grad) {
    Node* out = n.get();
    Node* na = a.node().get();
    n->backward_fn = [out, na, c]() {
      na->ensure_grad();
      for (size_t i = 0; i < out->grad.size(); ++i) na->grad[i] += out->grad[i] * c;
    };
  }
  check_finite(*n);
  return Tensor(n);
}

Tensor add_const(const Tensor& a, Real c) {
  auto n = make_node(a.shape(), {a.node()});
  for (size_t i = 0; i < n->data.size(); ++i) n->data[i] = a.data()[i] + c;
  if (n->requires_grad) {
    Node* out = n.get();
    Node* na = a.node().get();
    n->backward_fn = [out, na]() {
      na->ensure_grad();
      for (size_t i = 0; i < out->grad.size(); ++i) na->grad[i] += out->grad[i];
    };
  }
  check_finite(*n);
  return Tensor(n);
}

Tensor neg(const Tensor& a) { return scale(a, Real(-1)); }

Tensor sum(const Tensor& a) {
  auto n = make_node(Shape{1}, {a.node()});
  double acc = 0.0;
  for (Real v : a.data()) acc += double(v);
  n->data[0] = Real(acc);
  if (n->requires_grad) {
    Node* out = n.get();
    Node* na = a.node().get();
    n->backward_fn = [out, na]() {
      na->ensure_grad();
      for (size_t i = 0; i < na->grad.size(); ++i) na->grad[i] += out->grad[0];
    };
  }
  check_finite(*n);
  return Tensor(n);
}

Tensor mean(const Tensor& a) {
  SVC_CHECK(a.numel() >= 1, ErrorCode::InvalidArgument, "mean of empty tensor");
  return scale(sum(a), Real(1.0 / double(a.numel())));
}

Tensor abs_t(const Tensor& a) {
  auto n = make_node(a.shape(), {a.node()});
  for (size_t i = 0; i < n->data.size(); ++i) n->data[i] = std::abs(a.data()[i]);
  if (n->requires_grad) {
    Node* out = n.get();
    Node* na = a.node().get();
    n->backward_fn = [out, na]() {
      na->ensure_grad();
      for (size_t i = 0; i < out->grad.size(); ++i) {
        const Real x = na->data[i];
        const Real s = x > 0 ? Real(1) : (x < 0 ? Real(-1) : Real(0));
        na->grad[i] += out->grad[i] * s;
      }
    };
  }
  check_finite(*n);
  return Tensor(n);
}

Tensor log_eps(const Tensor& a, Real eps) {
  auto n = make_node(a.shape(), {a.node()});
  for (size_t i = 0; i < n->data.size(); ++i) n->data[i] = std::log(a.data()[i] + eps);
  if (n->requires_grad) {
    Node* out = n.get();
    Node* na = a.node().get();
    n->backward_fn = [out, na, eps]() {
      na->ensure_grad();
      for (size_t i = 0; i < out->grad.size(); ++i)
        na->grad[i] += out->grad[i] / (na->data[i] + eps);
    };
  }
  check_finite(*n);
  return Tensor(n);
}

Tensor sqrt_guard(const Tensor& a, Real grad_floor) {
  auto n = make_node(a.shape(), {a.node()});
  for (size_t i = 0; i < n->data.size(); ++i) n->data[i] = std::sqrt(a.data()[i]);
  if (n->requires_grad) {
    Node* out = n.get();
    Node* na = a.node().get();
    n->backward_fn = [out, na, grad_floor]() {
      na->ensure_grad();
      for (size_t i = 0; i < out->grad.size(); ++i)
        na->grad[i] += out->grad[i] * Real(0.5) / std::max(out->data[i], grad_floor);
    };
  }
  check_finite(*n);
  return Tensor(n);
}

Tensor unary(UnaryKind kind, const Tensor& a, Real leak) {
  switch (kind) {
    case UnaryKind::Tanh:
      return tanh_t(a);
    case UnaryKind::Sigmoid:
      return sigmoid_t(a);
    case UnaryKind::LeakyRelu:
      return leaky_relu(a, leak);
  }
  raise(ErrorCode::InvalidArgument, "unknown unary kind");
}

Tensor tanh_t(const Tensor& a) {
  auto n = make_node(a.shape(), {a.node()});
  for (size_t i = 0; i < n->data.size(); ++i) n->data[i] = std::tanh(a.data()[i]);
  if (n->requires_grad) {
    Node* out = n.get();
    Node* na = a.node().get();
    n->backward_fn = [out, na]() {
      na->ensure_grad();
      for (size_t i = 0; i < out->grad.size(); ++i) {
        const Real y = out->data[i];
        na->grad[i] += out->grad[i] * (Real(1) - y * y);
      }
    };
  }
  check_finite(*n);
  return Tensor(n);
}

Tensor sigmoid_t(const Tensor& a) {
  auto n = make_node(a.shape(), {a.node()});
  for (size_t i = 0; i < n->data.size(); ++i)
    n->data[i] = Real(1) / (Real(1) + std::exp(-a.data()[i]));
  if (n->requires_grad) {
    Node* out = n.get();
    Node* na = a.node().get();
    n->backward_fn = [out, na]() {
      na->ensure_grad();
      for (size_t i = 0; i < out->grad.size(); ++i) {
        const Real y = out->data[i];
        na->grad[i] += out->grad[i] * y * (Real(1) - y);
      }
    };
  }
  check_finite(*n);
  return Tensor(n);
}

Tensor leaky_relu(const Tensor& a, Real leak) {
  auto n = make_node(a.shape(), {a.node()});
  for (size_t i = 0; i < n->data.size(); ++i) {
    const Real x = a.data()[i];
    n->data[i] = x >= 0 ? x : leak * x;
  }
  if (n->requires_grad) {
    Node* out = n.get();
    Node* na = a.node().get();
    n->backward_fn = [out, na, leak]() {
      na->ensure_grad();
      for (size_t i = 0; i < out->grad.size(); ++i)
        na->grad[i] += out->grad[i] * (na->data[i] >= 0 ? Real(1) : leak);
    };
  }
  check_finite(*n);
  return Tensor(n);
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  SVC_CHECK(a.shape().size() == 2 && b.shape().size() == 2, ErrorCode::InvalidArgument,
            "concat_channels expects [C, T] tensors");
  SVC_CHECK(a.size(1) == b.size(1), ErrorCode::InvalidArgument,
            "concat_channels time length mismatch: " << a.size(1) << " vs " << b.size(1));
  const long ca = a.size(0), cb = b.size(0), t = a.size(1);
  auto n = make_node(Shape{ca + cb, t}, {a.node(), b.node()});
  std::copy(a.data().begin(), a.data().end(), n->data.begin());
  std::copy(b.data().begin(), b.data().end(), n->data.begin() + ca * t);
  if (n->requires_grad) {
    Node* out = n.get();
    Node* na = a.node().get();
    Node* nb = b.node().get();
    const size_t split = size_t(ca * t);
    n->backward_fn = [out, na, nb, split]() {
      if (na->requires_grad) {
        na->ensure_grad();
        for (size_t i = 0; i < split; ++i) na->grad[i] += out->grad[i];
      }
      if (nb->requires_grad) {
        nb->ensure_grad();
        for (size_t i = split; i < out->grad.size(); ++i) nb->grad[i - split] += out->grad[i];
      }
    };
  }
  check_finite(*n);
  return Tensor(n);
}

Tensor slice_time(const Tensor& a, long t0, long t1) {
  SVC_CHECK(a.shape().size() == 2, ErrorCode::InvalidArgument, "slice_time expects [C, T]");
  const long c = a.size(0), t = a.size(1);
  SVC_CHECK(0 <= t0 && t0 < t1 && t1 <= t, ErrorCode::InvalidArgument,
            "slice_time range [" << t0 << ", " << t1 << ") out of bounds for T=" << t);
  const long len = t1 - t0;
  auto n = make_node(Shape{c, len}, {a.node()});
  for (long ch = 0; ch < c; ++ch)
    std::copy(a.data().begin() + ch * t + t0, a.data().begin() + ch * t + t1,
              n->data.begin() + ch * len);
  if (n->requires_grad) {
    Node* out = n.get();
    Node* na = a.node().get();
    n->backward_fn = [out, na, c, t, t0, len]() {
      na->ensure_grad();
      for (long ch = 0; ch < c; ++ch)
        for (long i = 0; i < len; ++i)
          na->grad[size_t(ch * t + t0 + i)] += out->grad[size_t(ch * len + i)];
    };
  }
  check_finite(*n);
  return Tensor(n);
}

Tensor broadcast_time(const Tensor& vec, long t) {
  SVC_CHECK(vec.shape().size() == 1, ErrorCode::InvalidArgument, "broadcast_time expects [C]");
  SVC_CHECK(t >= 1, ErrorCode::InvalidArgument, "broadcast length must be >= 1");
  const long c = vec.size(0);
  auto n = make_node(Shape{c, t}, {vec.node()});
  for (long ch = 0; ch < c; ++ch)
    std::fill(n->data.begin() + ch * t, n->data.begin() + (ch + 1) * t, vec.data()[size_t(ch)]);
  if (n->requires_grad) {
    Node* out = n.get();
    Node* nv = vec.node().get();
    n->backward_fn = [out, nv, c, t]() {
      nv->ensure_grad();
      for (long ch = 0; ch < c; ++ch) {
        Real acc = 0;
        for (long i = 0; i < t; ++i) acc += out->grad[size_t(ch * t + i)];
        nv->grad[size_t(ch)] += acc;
      }
    };
  }
  check_finite(*n);
  return Tensor(n);
}

}  // namespace svc::ad

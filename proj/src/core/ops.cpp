#include <algorithm>
#include <cmath>

#include "core/dsp.hpp"
#include "core/framing.hpp"
#include "core/tensor.hpp"

namespace svc::ad {

namespace {

constexpr double kMagEps = 1e-8;  // guards the |.| derivative at zero

std::shared_ptr<Node> make_op_node(Shape shape, std::vector<std::shared_ptr<Node>> parents) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->data.assign(size_t(numel(n->shape)), Real(0));
  if (grad_enabled()) {
    for (const auto& p : parents) n->requires_grad = n->requires_grad || p->requires_grad;
  }
  if (n->requires_grad) n->parents = std::move(parents);
  return n;
}

void check_finite_op(const Node& n) {
  if (!debug_checks()) return;
  for (Real v : n.data)
    SVC_CHECK(std::isfinite(double(v)), ErrorCode::Numeric, "non-finite value produced by op");
}

}  // namespace

Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& bias, long dilation) {
  SVC_CHECK(x.shape().size() == 2, ErrorCode::InvalidArgument, "conv1d input must be [C, T]");
  SVC_CHECK(w.shape().size() == 3, ErrorCode::InvalidArgument, "conv1d weight must be [Co, Ci, k]");
  const long c_in = x.size(0), t_len = x.size(1);
  const long c_out = w.size(0), k = w.size(2);
  SVC_CHECK(w.size(1) == c_in, ErrorCode::InvalidArgument,
            "conv1d channel mismatch: weight expects " << w.size(1) << ", input has " << c_in);
  SVC_CHECK(k % 2 == 1, ErrorCode::InvalidArgument, "conv1d kernel size must be odd");
  SVC_CHECK(dilation >= 1, ErrorCode::InvalidArgument, "dilation must be >= 1");
  const bool has_bias = bias.defined();
  if (has_bias)
    SVC_CHECK(bias.shape() == Shape{c_out}, ErrorCode::InvalidArgument, "conv1d bias must be [Co]");

  std::vector<std::shared_ptr<Node>> parents{x.node(), w.node()};
  if (has_bias) parents.push_back(bias.node());
  auto n = make_op_node(Shape{c_out, t_len}, std::move(parents));

  const Real* xd = x.data().data();
  const Real* wd = w.data().data();
  const long half = (k - 1) / 2;
  for (long co = 0; co < c_out; ++co) {
    Real* yrow = n->data.data() + co * t_len;
    if (has_bias) std::fill(yrow, yrow + t_len, bias.data()[size_t(co)]);
    for (long ci = 0; ci < c_in; ++ci) {
      const Real* xrow = xd + ci * t_len;
      for (long j = 0; j < k; ++j) {
        const Real wv = wd[(co * c_in + ci) * k + j];
        if (wv == Real(0)) continue;
        const long off = (j - half) * dilation;
        const long t0 = std::max(0l, -off);
        const long t1 = std::min(t_len, t_len - off);
        for (long t = t0; t < t1; ++t) yrow[t] += wv * xrow[t + off];
      }
    }
  }

  if (n->requires_grad) {
    Node* out = n.get();
    Node* nx = x.node().get();
    Node* nw = w.node().get();
    Node* nb = has_bias ? bias.node().get() : nullptr;
    n->backward_fn = [out, nx, nw, nb, c_in, c_out, t_len, k, half, dilation]() {
      const Real* gy = out->grad.data();
      if (nx->requires_grad) nx->ensure_grad();
      if (nw->requires_grad) nw->ensure_grad();
      for (long co = 0; co < c_out; ++co) {
        const Real* gyrow = gy + co * t_len;
        for (long ci = 0; ci < c_in; ++ci) {
          for (long j = 0; j < k; ++j) {
            const long off = (j - half) * dilation;
            const long t0 = std::max(0l, -off);
            const long t1 = std::min(t_len, t_len - off);
            if (nx->requires_grad) {
              const Real wv = nw->data[size_t((co * c_in + ci) * k + j)];
              Real* gxrow = nx->grad.data() + ci * t_len;
              for (long t = t0; t < t1; ++t) gxrow[t + off] += wv * gyrow[t];
            }
            if (nw->requires_grad) {
              const Real* xrow = nx->data.data() + ci * t_len;
              Real acc = 0;
              for (long t = t0; t < t1; ++t) acc += gyrow[t] * xrow[t + off];
              nw->grad[size_t((co * c_in + ci) * k + j)] += acc;
            }
          }
        }
        if (nb && nb->requires_grad) {
          nb->ensure_grad();
          Real acc = 0;
          for (long t = 0; t < t_len; ++t) acc += gyrow[t];
          nb->grad[size_t(co)] += acc;
        }
      }
    };
  }
  check_finite_op(*n);
  return Tensor(n);
}

Tensor nn_upsample(const Tensor& x, long factor) {
  SVC_CHECK(x.shape().size() == 2, ErrorCode::InvalidArgument, "nn_upsample expects [C, T]");
  SVC_CHECK(factor >= 1, ErrorCode::InvalidArgument, "upsample factor must be >= 1");
  const long c = x.size(0), t = x.size(1);
  auto n = make_op_node(Shape{c, t * factor}, {x.node()});
  for (long ch = 0; ch < c; ++ch)
    for (long i = 0; i < t; ++i) {
      const Real v = x.data()[size_t(ch * t + i)];
      Real* dst = n->data.data() + ch * t * factor + i * factor;
      for (long r = 0; r < factor; ++r) dst[r] = v;
    }
  if (n->requires_grad) {
    Node* out = n.get();
    Node* nx = x.node().get();
    n->backward_fn = [out, nx, c, t, factor]() {
      nx->ensure_grad();
      for (long ch = 0; ch < c; ++ch)
        for (long i = 0; i < t; ++i) {
          const Real* src = out->grad.data() + ch * t * factor + i * factor;
          Real acc = 0;
          for (long r = 0; r < factor; ++r) acc += src[r];
          nx->grad[size_t(ch * t + i)] += acc;
        }
    };
  }
  check_finite_op(*n);
  return Tensor(n);
}

Tensor channel_matmul_const(const Tensor& x, const std::vector<double>& m, long rows) {
  SVC_CHECK(x.shape().size() == 2, ErrorCode::InvalidArgument, "channel_matmul_const expects [C, T]");
  const long c = x.size(0), t = x.size(1);
  SVC_CHECK(long(m.size()) == rows * c, ErrorCode::InvalidArgument, "matrix size mismatch");
  auto n = make_op_node(Shape{rows, t}, {x.node()});
  for (long r = 0; r < rows; ++r) {
    Real* yrow = n->data.data() + r * t;
    for (long ci = 0; ci < c; ++ci) {
      const Real mv = Real(m[size_t(r * c + ci)]);
      if (mv == Real(0)) continue;
      const Real* xrow = x.data().data() + ci * t;
      for (long i = 0; i < t; ++i) yrow[i] += mv * xrow[i];
    }
  }
  if (n->requires_grad) {
    Node* out = n.get();
    Node* nx = x.node().get();
    auto mat = std::make_shared<std::vector<double>>(m);
    n->backward_fn = [out, nx, mat, rows, c, t]() {
      nx->ensure_grad();
      for (long r = 0; r < rows; ++r) {
        const Real* gyrow = out->grad.data() + r * t;
        for (long ci = 0; ci < c; ++ci) {
          const Real mv = Real((*mat)[size_t(r * c + ci)]);
          if (mv == Real(0)) continue;
          Real* gxrow = nx->grad.data() + ci * t;
          for (long i = 0; i < t; ++i) gxrow[i] += mv * gyrow[i];
        }
      }
    };
  }
  check_finite_op(*n);
  return Tensor(n);
}

Tensor weight_norm_effective(const Tensor& v, const Tensor& g) {
  SVC_CHECK(v.shape().size() >= 2, ErrorCode::InvalidArgument,
            "weight_norm expects direction with >= 2 dims");
  const long c_out = v.size(0);
  SVC_CHECK(g.shape() == Shape{c_out}, ErrorCode::InvalidArgument, "gain must be [Co]");
  const long per = v.numel() / c_out;

  std::vector<double> norms(size_t(c_out));
  for (long c = 0; c < c_out; ++c) {
    double acc = 0.0;
    for (long i = 0; i < per; ++i) {
      const double vv = double(v.data()[size_t(c * per + i)]);
      acc += vv * vv;
    }
    norms[size_t(c)] = std::sqrt(acc);
    SVC_CHECK(norms[size_t(c)] > 0.0, ErrorCode::Numeric,
              "zero-norm weight direction (output channel " << c << ")");
  }

  auto n = make_op_node(v.shape(), {v.node(), g.node()});
  for (long c = 0; c < c_out; ++c) {
    const Real s = Real(double(g.data()[size_t(c)]) / norms[size_t(c)]);
    for (long i = 0; i < per; ++i) n->data[size_t(c * per + i)] = s * v.data()[size_t(c * per + i)];
  }

  if (n->requires_grad) {
    Node* out = n.get();
    Node* nv = v.node().get();
    Node* ng = g.node().get();
    n->backward_fn = [out, nv, ng, c_out, per, norms]() {
      for (long c = 0; c < c_out; ++c) {
        const double norm = norms[size_t(c)];
        const double gain = double(ng->data[size_t(c)]);
        double dot = 0.0;  // <gy, v> per output channel
        for (long i = 0; i < per; ++i)
          dot += double(out->grad[size_t(c * per + i)]) * double(nv->data[size_t(c * per + i)]);
        if (ng->requires_grad) {
          ng->ensure_grad();
          ng->grad[size_t(c)] += Real(dot / norm);
        }
        if (nv->requires_grad) {
          nv->ensure_grad();
          const double s = gain / norm;
          const double proj = dot / (norm * norm);
          for (long i = 0; i < per; ++i) {
            const double gy = double(out->grad[size_t(c * per + i)]);
            const double vv = double(nv->data[size_t(c * per + i)]);
            nv->grad[size_t(c * per + i)] += Real(s * (gy - proj * vv));
          }
        }
      }
    };
  }
  check_finite_op(*n);
  return Tensor(n);
}

Tensor dft_magnitude(const Tensor& x, long fft_size, long hop) {
  SVC_CHECK(x.shape().size() == 2 && x.size(0) == 1, ErrorCode::InvalidArgument,
            "dft_magnitude expects [1, T]");
  SVC_CHECK(is_power_of_two(fft_size), ErrorCode::InvalidArgument, "fft_size must be a power of two");
  SVC_CHECK(hop >= 1, ErrorCode::InvalidArgument, "hop must be >= 1");
  const long t_len = x.size(1);
  SVC_CHECK(t_len >= fft_size / 2, ErrorCode::InvalidArgument,
            "signal too short for fft_size " << fft_size << " (length " << t_len << ")");

  const long n_frames = t_len / hop + 1;
  const long n_bins = fft_size / 2 + 1;
  const std::vector<double> win = hann_window(fft_size);
  std::vector<double> cos_tab(size_t(fft_size)), sin_tab(size_t(fft_size));
  for (long i = 0; i < fft_size; ++i) {
    cos_tab[size_t(i)] = std::cos(2.0 * M_PI * double(i) / double(fft_size));
    sin_tab[size_t(i)] = std::sin(2.0 * M_PI * double(i) / double(fft_size));
  }

  auto n = make_op_node(Shape{n_bins, n_frames}, {x.node()});
  const bool record = n->requires_grad;
  auto re_store = std::make_shared<std::vector<double>>(record ? size_t(n_bins * n_frames) : 0);
  auto im_store = std::make_shared<std::vector<double>>(record ? size_t(n_bins * n_frames) : 0);

  std::vector<double> xw(size_t(fft_size));
  for (long f = 0; f < n_frames; ++f) {
    const long start = f * hop - fft_size / 2;
    for (long j = 0; j < fft_size; ++j)
      xw[size_t(j)] = double(x.data()[size_t(reflect_index(start + j, t_len))]) * win[size_t(j)];
    for (long b = 0; b < n_bins; ++b) {
      double re = 0.0, im = 0.0;
      long idx = 0;
      for (long j = 0; j < fft_size; ++j) {
        re += xw[size_t(j)] * cos_tab[size_t(idx)];
        im -= xw[size_t(j)] * sin_tab[size_t(idx)];
        idx += b;
        if (idx >= fft_size) idx -= fft_size;
      }
      if (record) {
        (*re_store)[size_t(b * n_frames + f)] = re;
        (*im_store)[size_t(b * n_frames + f)] = im;
      }
      n->data[size_t(b * n_frames + f)] = Real(std::sqrt(re * re + im * im));
    }
  }

  if (n->requires_grad) {
    Node* out = n.get();
    Node* nx = x.node().get();
    auto cos_p = std::make_shared<std::vector<double>>(std::move(cos_tab));
    auto sin_p = std::make_shared<std::vector<double>>(std::move(sin_tab));
    auto win_p = std::make_shared<std::vector<double>>(std::move(win));
    n->backward_fn = [out, nx, re_store, im_store, cos_p, sin_p, win_p, fft_size, hop, t_len,
                      n_frames, n_bins]() {
      nx->ensure_grad();
      std::vector<double> gxw(size_t(fft_size));
      for (long f = 0; f < n_frames; ++f) {
        std::fill(gxw.begin(), gxw.end(), 0.0);
        for (long b = 0; b < n_bins; ++b) {
          const double gm = double(out->grad[size_t(b * n_frames + f)]);
          if (gm == 0.0) continue;
          const double re = (*re_store)[size_t(b * n_frames + f)];
          const double im = (*im_store)[size_t(b * n_frames + f)];
          const double den = std::sqrt(re * re + im * im + kMagEps);
          const double cre = gm * re / den;
          const double cim = gm * im / den;
          long idx = 0;
          for (long j = 0; j < fft_size; ++j) {
            gxw[size_t(j)] += cre * (*cos_p)[size_t(idx)] - cim * (*sin_p)[size_t(idx)];
            idx += b;
            if (idx >= fft_size) idx -= fft_size;
          }
        }
        const long start = f * hop - fft_size / 2;
        for (long j = 0; j < fft_size; ++j) {
          const long src = reflect_index(start + j, t_len);
          nx->grad[size_t(src)] += Real(gxw[size_t(j)] * (*win_p)[size_t(j)]);
        }
      }
    };
  }
  check_finite_op(*n);
  return Tensor(n);
}

Tensor framed_norm_autocorr(const Tensor& x, long frame_size, long hop, long lag_min, long lag_max) {
  SVC_CHECK(x.shape().size() == 2 && x.size(0) == 1, ErrorCode::InvalidArgument,
            "framed_norm_autocorr expects [1, T]");
  SVC_CHECK(1 <= lag_min && lag_min < lag_max && lag_max < frame_size, ErrorCode::InvalidArgument,
            "need 1 <= lag_min < lag_max < frame_size");
  SVC_CHECK(hop >= 1, ErrorCode::InvalidArgument, "hop must be >= 1");
  const long t_len = x.size(1);
  const long n_frames = t_len / hop + 1;
  const long n_lags = lag_max - lag_min + 1;
  constexpr double eps = 1e-8;

  auto n = make_op_node(Shape{n_lags, n_frames}, {x.node()});

  std::vector<double> frame(size_t(frame_size));
  std::vector<double> sq_prefix(size_t(frame_size + 1));
  auto load_frame = [&](const std::vector<Real>& src, long f) {
    const long start = f * hop - frame_size / 2;
    for (long j = 0; j < frame_size; ++j)
      frame[size_t(j)] = double(src[size_t(reflect_index(start + j, t_len))]);
    sq_prefix[0] = 0.0;
    for (long j = 0; j < frame_size; ++j)
      sq_prefix[size_t(j + 1)] = sq_prefix[size_t(j)] + frame[size_t(j)] * frame[size_t(j)];
  };

  for (long f = 0; f < n_frames; ++f) {
    load_frame(x.data(), f);
    for (long l = 0; l < n_lags; ++l) {
      const long tau = lag_min + l;
      const long len = frame_size - tau;
      double c = 0.0;
      for (long t = 0; t < len; ++t) c += frame[size_t(t)] * frame[size_t(t + tau)];
      const double a = sq_prefix[size_t(len)];
      const double b = sq_prefix[size_t(frame_size)] - sq_prefix[size_t(tau)];
      n->data[size_t(l * n_frames + f)] = Real(c / std::sqrt(a * b + eps));
    }
  }

  if (n->requires_grad) {
    Node* out = n.get();
    Node* nx = x.node().get();
    n->backward_fn = [out, nx, frame_size, hop, t_len, n_frames, n_lags, lag_min]() {
      nx->ensure_grad();
      std::vector<double> frame(size_t(frame_size));
      std::vector<double> sq_prefix(size_t(frame_size + 1));
      std::vector<double> gframe(size_t(frame_size));
      for (long f = 0; f < n_frames; ++f) {
        const long start = f * hop - frame_size / 2;
        for (long j = 0; j < frame_size; ++j)
          frame[size_t(j)] = double(nx->data[size_t(reflect_index(start + j, t_len))]);
        sq_prefix[0] = 0.0;
        for (long j = 0; j < frame_size; ++j)
          sq_prefix[size_t(j + 1)] = sq_prefix[size_t(j)] + frame[size_t(j)] * frame[size_t(j)];
        std::fill(gframe.begin(), gframe.end(), 0.0);

        for (long l = 0; l < n_lags; ++l) {
          const double gr = double(out->grad[size_t(l * n_frames + f)]);
          if (gr == 0.0) continue;
          const long tau = lag_min + l;
          const long len = frame_size - tau;
          double c = 0.0;
          for (long t = 0; t < len; ++t) c += frame[size_t(t)] * frame[size_t(t + tau)];
          const double a = sq_prefix[size_t(len)];
          const double b = sq_prefix[size_t(frame_size)] - sq_prefix[size_t(tau)];
          const double q = a * b + eps;
          const double inv_sqrt_q = 1.0 / std::sqrt(q);
          const double coef_c = gr * inv_sqrt_q;
          const double coef_ab = gr * c / (2.0 * q * std::sqrt(q));
          for (long k = 0; k < frame_size; ++k) {
            double d = 0.0;
            if (k < len) d += coef_c * frame[size_t(k + tau)] - coef_ab * 2.0 * frame[size_t(k)] * b;
            if (k >= tau) d += coef_c * frame[size_t(k - tau)] - coef_ab * 2.0 * frame[size_t(k)] * a;
            gframe[size_t(k)] += d;
          }
        }
        for (long j = 0; j < frame_size; ++j)
          nx->grad[size_t(reflect_index(start + j, t_len))] += Real(gframe[size_t(j)]);
      }
    };
  }
  check_finite_op(*n);
  return Tensor(n);
}

}  // namespace svc::ad

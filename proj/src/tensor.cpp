#include "clft/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "clft/kernels.hpp"

namespace clft {

namespace {

thread_local bool g_grad_enabled = true;

constexpr double kInvSqrt2 = 0.7071067811865475244008443621048490;
constexpr double kInvSqrt2Pi = 0.3989422804014326779399460599343819;

int64_t numel_of(const std::vector<int64_t>& shape) {
  int64_t n = 1;
  for (int64_t e : shape) {
    if (e <= 0) fail("tensor: extents must be positive, got " + shape_str(shape));
    n *= e;
  }
  return n;
}

void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    fail(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

}  // namespace

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

Tensor::Tensor(std::vector<int64_t> shape, double fill, bool requires_grad) {
  node_ = std::make_shared<Node>();
  const int64_t n = numel_of(shape);
  node_->shape = std::move(shape);
  node_->value.assign(static_cast<size_t>(n), fill);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::from_data(std::vector<int64_t> shape, std::vector<double> data, bool requires_grad) {
  const int64_t n = numel_of(shape);
  if (static_cast<int64_t>(data.size()) != n)
    fail("tensor: data length " + std::to_string(data.size()) + " does not match shape " + shape_str(shape));
  Tensor t;
  t.node_ = std::make_shared<Node>();
  t.node_->shape = std::move(shape);
  t.node_->value = std::move(data);
  t.node_->requires_grad = requires_grad;
  return t;
}

Tensor Tensor::randn(std::vector<int64_t> shape, Rng& rng, double sigma, bool requires_grad) {
  Tensor t(std::move(shape), 0.0, requires_grad);
  for (double& v : t.data()) v = rng.normal() * sigma;
  return t;
}

Tensor Tensor::trunc_normal(std::vector<int64_t> shape, Rng& rng, double sigma, bool requires_grad) {
  Tensor t(std::move(shape), 0.0, requires_grad);
  for (double& v : t.data()) v = rng.trunc_normal(sigma);
  return t;
}

double Tensor::item() const {
  if (size() != 1) fail("item: tensor has " + std::to_string(size()) + " elements");
  return node_->value[0];
}

const std::vector<double>& Tensor::grad() const {
  if (node_->grad.empty()) fail("grad: no gradient accumulated");
  return node_->grad;
}

void Tensor::zero_grad() { node_->grad.clear(); }

void Tensor::backward() const {
  if (!node_ || size() != 1) fail("backward: requires a defined scalar tensor");
  if (!node_->requires_grad) fail("backward: tensor does not require grad");

  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  struct Frame {
    Node* n;
    size_t next;
  };
  std::vector<Frame> stack;
  stack.push_back({node_.get(), 0});
  visited.insert(node_.get());
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next < f.n->parents.size()) {
      Node* p = f.n->parents[f.next++].get();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      order.push_back(f.n);
      stack.pop_back();
    }
  }

  node_->ensure_grad();
  node_->grad[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn && !n->grad.empty()) n->backward_fn(*n);
  }
}

Tensor make_op_output(std::vector<int64_t> shape, const std::vector<Tensor>& inputs,
                      std::function<void(Node&)> backward_fn) {
  auto node = std::make_shared<Node>();
  const int64_t n = numel_of(shape);
  node->shape = std::move(shape);
  node->value.assign(static_cast<size_t>(n), 0.0);
  if (g_grad_enabled) {
    bool any = false;
    for (const Tensor& t : inputs) any = any || t.requires_grad();
    if (any) {
      node->requires_grad = true;
      node->parents.reserve(inputs.size());
      for (const Tensor& t : inputs) node->parents.push_back(t.node());
      node->backward_fn = std::move(backward_fn);
    }
  }
  return Tensor(node);
}

// --------------------------- elementwise -----------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape("add", a, b);
  auto an = a.node(), bn = b.node();
  Tensor out = make_op_output(a.shape(), {a, b}, [an, bn](Node& self) {
    const int64_t n = self.numel();
    if (an->requires_grad) {
      an->ensure_grad();
#pragma omp parallel for schedule(static) if (n > 8192)
      for (int64_t i = 0; i < n; ++i) an->grad[i] += self.grad[i];
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
#pragma omp parallel for schedule(static) if (n > 8192)
      for (int64_t i = 0; i < n; ++i) bn->grad[i] += self.grad[i];
    }
  });
  const int64_t n = out.size();
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  double* po = out.data().data();
#pragma omp parallel for schedule(static) if (n > 8192)
  for (int64_t i = 0; i < n; ++i) po[i] = pa[i] + pb[i];
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape("sub", a, b);
  auto an = a.node(), bn = b.node();
  Tensor out = make_op_output(a.shape(), {a, b}, [an, bn](Node& self) {
    const int64_t n = self.numel();
    if (an->requires_grad) {
      an->ensure_grad();
      for (int64_t i = 0; i < n; ++i) an->grad[i] += self.grad[i];
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (int64_t i = 0; i < n; ++i) bn->grad[i] -= self.grad[i];
    }
  });
  const int64_t n = out.size();
  for (int64_t i = 0; i < n; ++i) out.data()[static_cast<size_t>(i)] = a.data()[static_cast<size_t>(i)] - b.data()[static_cast<size_t>(i)];
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape("mul", a, b);
  auto an = a.node(), bn = b.node();
  Tensor out = make_op_output(a.shape(), {a, b}, [an, bn](Node& self) {
    const int64_t n = self.numel();
    if (an->requires_grad) {
      an->ensure_grad();
      for (int64_t i = 0; i < n; ++i) an->grad[i] += self.grad[i] * bn->value[static_cast<size_t>(i)];
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (int64_t i = 0; i < n; ++i) bn->grad[i] += self.grad[i] * an->value[static_cast<size_t>(i)];
    }
  });
  const int64_t n = out.size();
  for (int64_t i = 0; i < n; ++i)
    out.data()[static_cast<size_t>(i)] = a.data()[static_cast<size_t>(i)] * b.data()[static_cast<size_t>(i)];
  return out;
}

Tensor scale(const Tensor& a, double c) {
  auto an = a.node();
  Tensor out = make_op_output(a.shape(), {a}, [an, c](Node& self) {
    const int64_t n = self.numel();
    an->ensure_grad();
    for (int64_t i = 0; i < n; ++i) an->grad[i] += c * self.grad[i];
  });
  const int64_t n = out.size();
  for (int64_t i = 0; i < n; ++i) out.data()[static_cast<size_t>(i)] = c * a.data()[static_cast<size_t>(i)];
  return out;
}

Tensor add_rowvec(const Tensor& m, const Tensor& v) {
  if (m.rank() != 2 || v.rank() != 1 || m.dim(1) != v.dim(0))
    fail("add_rowvec: incompatible shapes " + shape_str(m.shape()) + " and " + shape_str(v.shape()));
  const int64_t rows = m.dim(0), cols = m.dim(1);
  auto mn = m.node(), vn = v.node();
  Tensor out = make_op_output(m.shape(), {m, v}, [mn, vn, rows, cols](Node& self) {
    if (mn->requires_grad) {
      mn->ensure_grad();
      const int64_t n = rows * cols;
      for (int64_t i = 0; i < n; ++i) mn->grad[i] += self.grad[i];
    }
    if (vn->requires_grad) {
      vn->ensure_grad();
#pragma omp parallel for schedule(static) if (cols > 256)
      for (int64_t c = 0; c < cols; ++c) {
        double acc = 0.0;
        for (int64_t r = 0; r < rows; ++r) acc += self.grad[r * cols + c];
        vn->grad[c] += acc;
      }
    }
  });
  const double* pm = m.data().data();
  const double* pv = v.data().data();
  double* po = out.data().data();
#pragma omp parallel for schedule(static) if (rows * cols > 8192)
  for (int64_t r = 0; r < rows; ++r)
    for (int64_t c = 0; c < cols; ++c) po[r * cols + c] = pm[r * cols + c] + pv[c];
  return out;
}

// ----------------------------- matmul --------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
    fail("matmul: inner dimensions differ: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  const int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  auto an = a.node(), bn = b.node();
  Tensor out = make_op_output({m, n}, {a, b}, [an, bn, m, k, n](Node& self) {
    if (an->requires_grad) {
      an->ensure_grad();
      kernels::matmul_nt(self.grad.data(), bn->value.data(), an->grad.data(), m, n, k, true);
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      kernels::matmul_tn(an->value.data(), self.grad.data(), bn->grad.data(), k, m, n, true);
    }
  });
  kernels::matmul_nn(a.data().data(), b.data().data(), out.data().data(), m, k, n, false);
  return out;
}

Tensor transpose2d(const Tensor& a) {
  if (a.rank() != 2) fail("transpose2d: rank-2 tensor required, got " + shape_str(a.shape()));
  const int64_t r = a.dim(0), c = a.dim(1);
  auto an = a.node();
  Tensor out = make_op_output({c, r}, {a}, [an, r, c](Node& self) {
    an->ensure_grad();
    for (int64_t i = 0; i < c; ++i)
      for (int64_t j = 0; j < r; ++j) an->grad[j * c + i] += self.grad[i * r + j];
  });
  const double* pa = a.data().data();
  double* po = out.data().data();
#pragma omp parallel for schedule(static) if (r * c > 16384)
  for (int64_t i = 0; i < c; ++i)
    for (int64_t j = 0; j < r; ++j) po[i * r + j] = pa[j * c + i];
  return out;
}

// --------------------------- nonlinearities --------------------------------

Tensor relu(const Tensor& x) {
  auto xn = x.node();
  Tensor out = make_op_output(x.shape(), {x}, [xn](Node& self) {
    const int64_t n = self.numel();
    xn->ensure_grad();
#pragma omp parallel for schedule(static) if (n > 8192)
    for (int64_t i = 0; i < n; ++i)
      if (xn->value[static_cast<size_t>(i)] > 0.0) xn->grad[i] += self.grad[i];
  });
  const int64_t n = out.size();
  const double* px = x.data().data();
  double* po = out.data().data();
#pragma omp parallel for schedule(static) if (n > 8192)
  for (int64_t i = 0; i < n; ++i) po[i] = px[i] > 0.0 ? px[i] : 0.0;
  return out;
}

Tensor gelu(const Tensor& x) {
  auto xn = x.node();
  Tensor out = make_op_output(x.shape(), {x}, [xn](Node& self) {
    const int64_t n = self.numel();
    xn->ensure_grad();
#pragma omp parallel for schedule(static) if (n > 8192)
    for (int64_t i = 0; i < n; ++i) {
      const double v = xn->value[static_cast<size_t>(i)];
      const double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
      const double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
      xn->grad[i] += self.grad[i] * (cdf + v * pdf);
    }
  });
  kernels::gelu_fwd(x.data().data(), out.data().data(), out.size());
  return out;
}

Tensor softmax(const Tensor& x, int axis) {
  if (axis < 0 || axis >= x.rank())
    fail("softmax: axis " + std::to_string(axis) + " invalid for shape " + shape_str(x.shape()));
  const auto& shape = x.shape();
  int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= shape[static_cast<size_t>(i)];
  for (int i = axis + 1; i < x.rank(); ++i) inner *= shape[static_cast<size_t>(i)];
  const int64_t len = shape[static_cast<size_t>(axis)];

  auto xn = x.node();
  Tensor out = make_op_output(x.shape(), {x}, [xn, outer, inner, len](Node& self) {
    xn->ensure_grad();
#pragma omp parallel for collapse(2) schedule(static) if (outer * inner > 64)
    for (int64_t o = 0; o < outer; ++o) {
      for (int64_t j = 0; j < inner; ++j) {
        const int64_t base = o * len * inner + j;
        double dot = 0.0;
        for (int64_t i = 0; i < len; ++i) {
          const int64_t idx = base + i * inner;
          dot += self.grad[idx] * self.value[static_cast<size_t>(idx)];
        }
        for (int64_t i = 0; i < len; ++i) {
          const int64_t idx = base + i * inner;
          xn->grad[idx] += self.value[static_cast<size_t>(idx)] * (self.grad[idx] - dot);
        }
      }
    }
  });

  const double* px = x.data().data();
  double* po = out.data().data();
#pragma omp parallel for collapse(2) schedule(static) if (outer * inner > 64)
  for (int64_t o = 0; o < outer; ++o) {
    for (int64_t j = 0; j < inner; ++j) {
      const int64_t base = o * len * inner + j;
      double mx = px[base];
      for (int64_t i = 1; i < len; ++i) mx = std::max(mx, px[base + i * inner]);
      double sum = 0.0;
      for (int64_t i = 0; i < len; ++i) {
        const double e = std::exp(px[base + i * inner] - mx);
        po[base + i * inner] = e;
        sum += e;
      }
      const double inv = 1.0 / sum;
      for (int64_t i = 0; i < len; ++i) po[base + i * inner] *= inv;
    }
  }
  return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  if (x.rank() < 1) fail("layer_norm: rank >= 1 required");
  const int64_t cols = x.dim(x.rank() - 1);
  if (gamma.rank() != 1 || gamma.dim(0) != cols || beta.rank() != 1 || beta.dim(0) != cols)
    fail("layer_norm: gamma/beta must have extent " + std::to_string(cols));
  const int64_t rows = x.size() / cols;

  auto xhat = std::make_shared<std::vector<double>>(static_cast<size_t>(x.size()));
  auto rstd = std::make_shared<std::vector<double>>(static_cast<size_t>(rows));

  auto xn = x.node(), gn = gamma.node(), bn = beta.node();
  Tensor out = make_op_output(x.shape(), {x, gamma, beta}, [xn, gn, bn, xhat, rstd, rows, cols](Node& self) {
    if (gn->requires_grad) {
      gn->ensure_grad();
      for (int64_t c = 0; c < cols; ++c) {
        double acc = 0.0;
        for (int64_t r = 0; r < rows; ++r) acc += self.grad[r * cols + c] * (*xhat)[static_cast<size_t>(r * cols + c)];
        gn->grad[c] += acc;
      }
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (int64_t c = 0; c < cols; ++c) {
        double acc = 0.0;
        for (int64_t r = 0; r < rows; ++r) acc += self.grad[r * cols + c];
        bn->grad[c] += acc;
      }
    }
    if (xn->requires_grad) {
      xn->ensure_grad();
#pragma omp parallel for schedule(static) if (rows > 16)
      for (int64_t r = 0; r < rows; ++r) {
        const int64_t base = r * cols;
        double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
        for (int64_t c = 0; c < cols; ++c) {
          const double dxh = self.grad[base + c] * gn->value[static_cast<size_t>(c)];
          mean_dxhat += dxh;
          mean_dxhat_xhat += dxh * (*xhat)[static_cast<size_t>(base + c)];
        }
        mean_dxhat /= static_cast<double>(cols);
        mean_dxhat_xhat /= static_cast<double>(cols);
        const double rs = (*rstd)[static_cast<size_t>(r)];
        for (int64_t c = 0; c < cols; ++c) {
          const double dxh = self.grad[base + c] * gn->value[static_cast<size_t>(c)];
          xn->grad[base + c] += rs * (dxh - mean_dxhat - (*xhat)[static_cast<size_t>(base + c)] * mean_dxhat_xhat);
        }
      }
    }
  });

  const double* px = x.data().data();
  const double* pg = gamma.data().data();
  const double* pb = beta.data().data();
  double* po = out.data().data();
#pragma omp parallel for schedule(static) if (rows > 16)
  for (int64_t r = 0; r < rows; ++r) {
    const int64_t base = r * cols;
    double mean = 0.0;
    for (int64_t c = 0; c < cols; ++c) mean += px[base + c];
    mean /= static_cast<double>(cols);
    double var = 0.0;
    for (int64_t c = 0; c < cols; ++c) {
      const double d = px[base + c] - mean;
      var += d * d;
    }
    var /= static_cast<double>(cols);
    const double rs = 1.0 / std::sqrt(var + eps);
    (*rstd)[static_cast<size_t>(r)] = rs;
    for (int64_t c = 0; c < cols; ++c) {
      const double xh = (px[base + c] - mean) * rs;
      (*xhat)[static_cast<size_t>(base + c)] = xh;
      po[base + c] = xh * pg[c] + pb[c];
    }
  }
  return out;
}

// ---------------------------- convolutions ---------------------------------

namespace {

kernels::ConvDims conv_dims_checked(const Tensor& x, const Tensor& w, int64_t stride, int64_t pad) {
  if (x.rank() != 3 || w.rank() != 4)
    fail("conv2d: expected x rank 3 and w rank 4, got " + shape_str(x.shape()) + " and " + shape_str(w.shape()));
  if (w.dim(1) != x.dim(0))
    fail("conv2d: kernel channels " + std::to_string(w.dim(1)) + " do not match input channels " +
         std::to_string(x.dim(0)));
  if (stride < 1) fail("conv2d: stride must be >= 1");
  kernels::ConvDims d;
  d.c = x.dim(0);
  d.h = x.dim(1);
  d.w = x.dim(2);
  d.oc = w.dim(0);
  d.kh = w.dim(2);
  d.kw = w.dim(3);
  d.stride = stride;
  d.pad = pad;
  const int64_t num_h = d.h + 2 * pad - d.kh;
  const int64_t num_w = d.w + 2 * pad - d.kw;
  if (num_h < 0 || num_w < 0 || num_h % stride != 0 || num_w % stride != 0)
    fail("conv2d: non-integral or negative output extent for input " + shape_str(x.shape()) + ", kernel " +
         shape_str(w.shape()) + ", stride " + std::to_string(stride) + ", pad " + std::to_string(pad));
  d.oh = num_h / stride + 1;
  d.ow = num_w / stride + 1;
  return d;
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor* bias, int64_t stride, int64_t pad) {
  const kernels::ConvDims d = conv_dims_checked(x, w, stride, pad);
  if (bias && (bias->rank() != 1 || bias->dim(0) != d.oc))
    fail("conv2d: bias must have extent " + std::to_string(d.oc));

  std::vector<Tensor> inputs{x, w};
  if (bias) inputs.push_back(*bias);
  auto xn = x.node(), wn = w.node();
  std::shared_ptr<Node> bn = bias ? bias->node() : nullptr;
  Tensor out = make_op_output({d.oc, d.oh, d.ow}, inputs, [xn, wn, bn, d](Node& self) {
    if (xn->requires_grad) {
      xn->ensure_grad();
      kernels::conv2d_bwd_x(self.grad.data(), wn->value.data(), xn->grad.data(), d);
    }
    if (wn->requires_grad) {
      wn->ensure_grad();
      kernels::conv2d_bwd_w(self.grad.data(), xn->value.data(), wn->grad.data(), d);
    }
    if (bn && bn->requires_grad) {
      bn->ensure_grad();
      kernels::conv2d_bwd_b(self.grad.data(), bn->grad.data(), d);
    }
  });
  kernels::conv2d_fwd(x.data().data(), w.data().data(), bias ? bias->data().data() : nullptr, out.data().data(), d);
  return out;
}

Tensor transpose_conv2d(const Tensor& x, const Tensor& w, const Tensor* bias, int64_t stride) {
  if (x.rank() != 3 || w.rank() != 4)
    fail("transpose_conv2d: expected x rank 3 and w rank 4, got " + shape_str(x.shape()) + " and " +
         shape_str(w.shape()));
  if (w.dim(0) != x.dim(0))
    fail("transpose_conv2d: kernel input channels " + std::to_string(w.dim(0)) + " do not match input channels " +
         std::to_string(x.dim(0)));
  if (stride < 1) fail("transpose_conv2d: stride must be >= 1");
  kernels::ConvDims d;
  d.c = x.dim(0);
  d.h = x.dim(1);
  d.w = x.dim(2);
  d.oc = w.dim(1);
  d.kh = w.dim(2);
  d.kw = w.dim(3);
  d.stride = stride;
  d.pad = 0;
  d.oh = (d.h - 1) * stride + d.kh;
  d.ow = (d.w - 1) * stride + d.kw;
  if (bias && (bias->rank() != 1 || bias->dim(0) != d.oc))
    fail("transpose_conv2d: bias must have extent " + std::to_string(d.oc));

  std::vector<Tensor> inputs{x, w};
  if (bias) inputs.push_back(*bias);
  auto xn = x.node(), wn = w.node();
  std::shared_ptr<Node> bn = bias ? bias->node() : nullptr;
  Tensor out = make_op_output({d.oc, d.oh, d.ow}, inputs, [xn, wn, bn, d](Node& self) {
    if (xn->requires_grad) {
      xn->ensure_grad();
      kernels::tconv2d_bwd_x(self.grad.data(), wn->value.data(), xn->grad.data(), d);
    }
    if (wn->requires_grad) {
      wn->ensure_grad();
      kernels::tconv2d_bwd_w(self.grad.data(), xn->value.data(), wn->grad.data(), d);
    }
    if (bn && bn->requires_grad) {
      bn->ensure_grad();
      kernels::tconv2d_bwd_b(self.grad.data(), bn->grad.data(), d);
    }
  });
  kernels::tconv2d_fwd(x.data().data(), w.data().data(), bias ? bias->data().data() : nullptr, out.data().data(), d);
  return out;
}

// ----------------------------- resample ------------------------------------

ResampleFactor resample_factor_from(int64_t patch, int64_t s) {
  if (s <= 0 || patch <= 0) fail("resample: patch and s must be positive");
  if (patch == 4 * s) return ResampleFactor::x4;
  if (patch == 2 * s) return ResampleFactor::x2;
  if (patch == s) return ResampleFactor::x1;
  if (2 * patch == s) return ResampleFactor::half;
  if (4 * patch == s) return ResampleFactor::quarter;
  fail("resample: unsupported coefficient s=" + std::to_string(s) + " for patch " + std::to_string(patch));
}

int64_t resample_extent(ResampleFactor f, int64_t e) {
  switch (f) {
    case ResampleFactor::x4: return e * 4;
    case ResampleFactor::x2: return e * 2;
    case ResampleFactor::x1: return e;
    case ResampleFactor::half: return e / 2;
    case ResampleFactor::quarter: return e / 4;
  }
  fail("resample: bad factor");
}

std::vector<int64_t> resample_weight_shape(ResampleFactor f, int64_t c) {
  switch (f) {
    case ResampleFactor::x4: return {c, c, 4, 4};      // tconv k4 s4
    case ResampleFactor::x2: return {c, c, 2, 2};      // tconv k2 s2
    case ResampleFactor::x1: return {};                // identity
    case ResampleFactor::half: return {c, c, 2, 2};    // conv k2 s2
    case ResampleFactor::quarter: return {c, c, 4, 4}; // conv k4 s4
  }
  fail("resample: bad factor");
}

Tensor resample(const Tensor& x, ResampleFactor f, const Tensor& w, const Tensor* bias) {
  if (x.rank() != 3) fail("resample: rank-3 input required, got " + shape_str(x.shape()));
  switch (f) {
    case ResampleFactor::x4: return transpose_conv2d(x, w, bias, 4);
    case ResampleFactor::x2: return transpose_conv2d(x, w, bias, 2);
    case ResampleFactor::x1: return x;
    case ResampleFactor::half: return conv2d(x, w, bias, 2, 0);
    case ResampleFactor::quarter: return conv2d(x, w, bias, 4, 0);
  }
  fail("resample: bad factor");
}

// -------------------------- shape/index ops --------------------------------

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) fail("concat_cols: no inputs");
  const int64_t rows = parts[0].dim(0);
  int64_t cols = 0;
  for (const Tensor& p : parts) {
    if (p.rank() != 2 || p.dim(0) != rows)
      fail("concat_cols: row mismatch, expected " + std::to_string(rows) + " got " + shape_str(p.shape()));
    cols += p.dim(1);
  }
  std::vector<std::shared_ptr<Node>> nodes;
  for (const Tensor& p : parts) nodes.push_back(p.node());
  Tensor out = make_op_output({rows, cols}, parts, [nodes, rows, cols](Node& self) {
    int64_t off = 0;
    for (const auto& pn : nodes) {
      const int64_t pc = pn->shape[1];
      if (pn->requires_grad) {
        pn->ensure_grad();
        for (int64_t r = 0; r < rows; ++r)
          for (int64_t c = 0; c < pc; ++c) pn->grad[r * pc + c] += self.grad[r * cols + off + c];
      }
      off += pc;
    }
  });
  int64_t off = 0;
  for (const Tensor& p : parts) {
    const int64_t pc = p.dim(1);
    const double* src = p.data().data();
    double* dst = out.data().data();
#pragma omp parallel for schedule(static) if (rows * pc > 16384)
    for (int64_t r = 0; r < rows; ++r)
      for (int64_t c = 0; c < pc; ++c) dst[r * cols + off + c] = src[r * pc + c];
    off += pc;
  }
  return out;
}

Tensor concat_rows(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(1))
    fail("concat_rows: column mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  const int64_t ra = a.dim(0), rb = b.dim(0), cols = a.dim(1);
  auto an = a.node(), bn = b.node();
  Tensor out = make_op_output({ra + rb, cols}, {a, b}, [an, bn, ra, rb, cols](Node& self) {
    if (an->requires_grad) {
      an->ensure_grad();
      for (int64_t i = 0; i < ra * cols; ++i) an->grad[i] += self.grad[i];
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (int64_t i = 0; i < rb * cols; ++i) bn->grad[i] += self.grad[ra * cols + i];
    }
  });
  std::copy(a.data().begin(), a.data().end(), out.data().begin());
  std::copy(b.data().begin(), b.data().end(), out.data().begin() + static_cast<ptrdiff_t>(ra * cols));
  return out;
}

Tensor slice_cols(const Tensor& x, int64_t c0, int64_t c1) {
  if (x.rank() != 2 || c0 < 0 || c1 > x.dim(1) || c0 >= c1)
    fail("slice_cols: invalid range [" + std::to_string(c0) + "," + std::to_string(c1) + ") for " +
         shape_str(x.shape()));
  const int64_t rows = x.dim(0), cols = x.dim(1), w = c1 - c0;
  auto xn = x.node();
  Tensor out = make_op_output({rows, w}, {x}, [xn, rows, cols, c0, w](Node& self) {
    xn->ensure_grad();
    for (int64_t r = 0; r < rows; ++r)
      for (int64_t c = 0; c < w; ++c) xn->grad[r * cols + c0 + c] += self.grad[r * w + c];
  });
  const double* src = x.data().data();
  double* dst = out.data().data();
  for (int64_t r = 0; r < rows; ++r)
    for (int64_t c = 0; c < w; ++c) dst[r * w + c] = src[r * cols + c0 + c];
  return out;
}

Tensor slice_rows(const Tensor& x, int64_t r0, int64_t r1) {
  if (x.rank() != 2 || r0 < 0 || r1 > x.dim(0) || r0 >= r1)
    fail("slice_rows: invalid range [" + std::to_string(r0) + "," + std::to_string(r1) + ") for " +
         shape_str(x.shape()));
  const int64_t cols = x.dim(1), h = r1 - r0;
  auto xn = x.node();
  Tensor out = make_op_output({h, cols}, {x}, [xn, cols, r0, h](Node& self) {
    xn->ensure_grad();
    for (int64_t i = 0; i < h * cols; ++i) xn->grad[r0 * cols + i] += self.grad[i];
  });
  std::copy(x.data().begin() + static_cast<ptrdiff_t>(r0 * cols),
            x.data().begin() + static_cast<ptrdiff_t>(r1 * cols), out.data().begin());
  return out;
}

Tensor replicate_row(const Tensor& x, int64_t row, int64_t n) {
  if (x.rank() != 2 || row < 0 || row >= x.dim(0)) fail("replicate_row: invalid row " + std::to_string(row));
  if (n < 1) fail("replicate_row: n must be positive");
  const int64_t cols = x.dim(1), xcols = x.dim(1);
  auto xn = x.node();
  Tensor out = make_op_output({n, cols}, {x}, [xn, row, n, cols, xcols](Node& self) {
    xn->ensure_grad();
    for (int64_t c = 0; c < cols; ++c) {
      double acc = 0.0;
      for (int64_t r = 0; r < n; ++r) acc += self.grad[r * cols + c];
      xn->grad[row * xcols + c] += acc;
    }
  });
  const double* src = x.data().data() + row * cols;
  double* dst = out.data().data();
  for (int64_t r = 0; r < n; ++r) std::copy(src, src + cols, dst + r * cols);
  return out;
}

Tensor reshape_copy(const Tensor& x, std::vector<int64_t> shape) {
  const int64_t n = numel_of(shape);
  if (n != x.size())
    fail("reshape_copy: element count mismatch " + shape_str(x.shape()) + " to " + shape_str(shape));
  auto xn = x.node();
  Tensor out = make_op_output(std::move(shape), {x}, [xn](Node& self) {
    xn->ensure_grad();
    const int64_t n2 = self.numel();
    for (int64_t i = 0; i < n2; ++i) xn->grad[i] += self.grad[i];
  });
  std::copy(x.data().begin(), x.data().end(), out.data().begin());
  return out;
}

Tensor spatialize(const Tensor& tokens, int64_t gh, int64_t gw) {
  if (tokens.rank() != 2) fail("spatialize: rank-2 tokens required, got " + shape_str(tokens.shape()));
  const int64_t n = tokens.dim(0), d = tokens.dim(1);
  if (n != gh * gw)
    fail("spatialize: token count " + std::to_string(n) + " does not match grid " + std::to_string(gh) + "x" +
         std::to_string(gw));
  auto tn = tokens.node();
  Tensor out = make_op_output({d, gh, gw}, {tokens}, [tn, gh, gw, d](Node& self) {
    tn->ensure_grad();
    for (int64_t c = 0; c < d; ++c)
      for (int64_t i = 0; i < gh * gw; ++i) tn->grad[i * d + c] += self.grad[c * gh * gw + i];
  });
  const double* src = tokens.data().data();
  double* dst = out.data().data();
#pragma omp parallel for schedule(static) if (n * d > 16384)
  for (int64_t c = 0; c < d; ++c)
    for (int64_t i = 0; i < gh * gw; ++i) dst[c * gh * gw + i] = src[i * d + c];
  return out;
}

Tensor flatten_tokens(const Tensor& map) {
  if (map.rank() != 3) fail("flatten_tokens: rank-3 map required, got " + shape_str(map.shape()));
  const int64_t c = map.dim(0), h = map.dim(1), w = map.dim(2);
  const int64_t n = h * w;
  auto mn = map.node();
  Tensor out = make_op_output({n, c}, {map}, [mn, n, c](Node& self) {
    mn->ensure_grad();
    for (int64_t i = 0; i < n; ++i)
      for (int64_t ch = 0; ch < c; ++ch) mn->grad[ch * n + i] += self.grad[i * c + ch];
  });
  const double* src = map.data().data();
  double* dst = out.data().data();
  for (int64_t i = 0; i < n; ++i)
    for (int64_t ch = 0; ch < c; ++ch) dst[i * c + ch] = src[ch * n + i];
  return out;
}

Tensor patchify(const Tensor& image, int64_t p) {
  if (image.rank() != 3) fail("patchify: rank-3 image required, got " + shape_str(image.shape()));
  const int64_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
  if (p <= 0 || h % p != 0 || w % p != 0)
    fail("patchify: image extents " + shape_str(image.shape()) + " not divisible by patch " + std::to_string(p));
  const int64_t gh = h / p, gw = w / p, n = gh * gw, cols = c * p * p;
  auto in = image.node();
  Tensor out = make_op_output({n, cols}, {image}, [in, c, h, w, p, gh, gw, cols](Node& self) {
    in->ensure_grad();
    for (int64_t gi = 0; gi < gh; ++gi)
      for (int64_t gj = 0; gj < gw; ++gj) {
        const int64_t row = gi * gw + gj;
        for (int64_t ch = 0; ch < c; ++ch)
          for (int64_t pi = 0; pi < p; ++pi)
            for (int64_t pj = 0; pj < p; ++pj)
              in->grad[(ch * h + gi * p + pi) * w + gj * p + pj] +=
                  self.grad[row * cols + (ch * p + pi) * p + pj];
      }
  });
  const double* src = image.data().data();
  double* dst = out.data().data();
  for (int64_t gi = 0; gi < gh; ++gi)
    for (int64_t gj = 0; gj < gw; ++gj) {
      const int64_t row = gi * gw + gj;
      for (int64_t ch = 0; ch < c; ++ch)
        for (int64_t pi = 0; pi < p; ++pi)
          for (int64_t pj = 0; pj < p; ++pj)
            dst[row * cols + (ch * p + pi) * p + pj] = src[(ch * h + gi * p + pi) * w + gj * p + pj];
    }
  return out;
}

Tensor sum_all(const Tensor& x) {
  auto xn = x.node();
  Tensor out = make_op_output({1}, {x}, [xn](Node& self) {
    xn->ensure_grad();
    const double g = self.grad[0];
    const int64_t n = xn->numel();
    for (int64_t i = 0; i < n; ++i) xn->grad[i] += g;
  });
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  out.data()[0] = acc;
  return out;
}

// ------------------------- finite differences ------------------------------

FdReport finite_difference_check(const std::function<Tensor(const std::vector<Tensor>&)>& fn,
                                 std::vector<Tensor> inputs, const FdOptions& opts) {
  for (Tensor& t : inputs) {
    t.set_requires_grad(true);
    t.zero_grad();
  }
  Tensor out = fn(inputs);
  Tensor loss = sum_all(out);
  loss.backward();

  std::vector<std::vector<double>> analytic;
  analytic.reserve(inputs.size());
  for (Tensor& t : inputs)
    analytic.push_back(t.has_grad() ? t.grad() : std::vector<double>(static_cast<size_t>(t.size()), 0.0));

  auto eval_sum = [&]() {
    NoGradGuard ng;
    Tensor o = fn(inputs);
    double s = 0.0;
    for (double v : o.data()) s += v;
    return s;
  };

  FdReport report;
  for (size_t i = 0; i < inputs.size(); ++i) {
    std::vector<double>& xs = inputs[i].data();
    const int64_t n = inputs[i].size();
    std::vector<int64_t> idx;
    if (opts.max_elements_per_input > 0 && n > opts.max_elements_per_input) {
      Rng rng(opts.seed + 0x9e3779b97f4a7c15ull * (i + 1));
      idx = rng.permutation(n);
      idx.resize(static_cast<size_t>(opts.max_elements_per_input));
    } else {
      idx.resize(static_cast<size_t>(n));
      for (int64_t j = 0; j < n; ++j) idx[static_cast<size_t>(j)] = j;
    }
    for (int64_t j : idx) {
      const double orig = xs[static_cast<size_t>(j)];
      xs[static_cast<size_t>(j)] = orig + opts.eps;
      const double fp = eval_sum();
      xs[static_cast<size_t>(j)] = orig - opts.eps;
      const double fm = eval_sum();
      xs[static_cast<size_t>(j)] = orig;
      const double fd = (fp - fm) / (2.0 * opts.eps);
      const double an = analytic[i][static_cast<size_t>(j)];
      const double rel = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-2});
      report.max_rel_error = std::max(report.max_rel_error, rel);
      ++report.checked;
    }
  }
  return report;
}

}  // namespace clft

#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "clft/common.hpp"

namespace clft {

// Dense row-major f64 tensor with reverse-mode differentiation. Each forward
// op records a backward closure on its output node; Tensor is a cheap handle
// onto the shared node. The tape is the ancestor graph of whatever scalar
// backward() is called on.
struct Node {
  std::vector<int64_t> shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  int64_t numel() const {
    int64_t n = 1;
    for (int64_t e : shape) n *= e;
    return n;
  }
  void ensure_grad() {
    if (grad.empty()) grad.assign(static_cast<size_t>(numel()), 0.0);
  }
};

bool grad_enabled();

/// Disables tape recording in scope (inference / finite differences).
class NoGradGuard {
public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
  bool prev_;
};

class Tensor {
public:
  Tensor() = default;
  explicit Tensor(std::vector<int64_t> shape, double fill = 0.0, bool requires_grad = false);
  static Tensor from_data(std::vector<int64_t> shape, std::vector<double> data, bool requires_grad = false);
  static Tensor randn(std::vector<int64_t> shape, Rng& rng, double sigma, bool requires_grad = false);
  /// Truncated normal (rejection at 2 sigma), the init used for projections.
  static Tensor trunc_normal(std::vector<int64_t> shape, Rng& rng, double sigma, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const std::vector<int64_t>& shape() const { return node_->shape; }
  int rank() const { return static_cast<int>(node_->shape.size()); }
  int64_t dim(int i) const { return node_->shape[static_cast<size_t>(i)]; }
  int64_t size() const { return node_->numel(); }

  std::vector<double>& data() { return node_->value; }
  const std::vector<double>& data() const { return node_->value; }
  double item() const;

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool v) { node_->requires_grad = v; }
  bool has_grad() const { return !node_->grad.empty(); }
  const std::vector<double>& grad() const;
  void zero_grad();

  /// Reverse pass from this scalar. Accumulates into .grad of every
  /// requires_grad ancestor.
  void backward() const;

  const std::shared_ptr<Node>& node() const { return node_; }

private:
  explicit Tensor(std::shared_ptr<Node> n) : node_(std::move(n)) {}
  std::shared_ptr<Node> node_;

  friend Tensor make_op_output(std::vector<int64_t> shape, const std::vector<Tensor>& inputs,
                               std::function<void(Node&)> backward_fn);
};

Tensor make_op_output(std::vector<int64_t> shape, const std::vector<Tensor>& inputs,
                      std::function<void(Node&)> backward_fn);

// --------------------------- operations -----------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
/// m (R x C) + row vector v (C) broadcast over rows.
Tensor add_rowvec(const Tensor& m, const Tensor& v);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose2d(const Tensor& a);

Tensor relu(const Tensor& x);
Tensor gelu(const Tensor& x);
Tensor softmax(const Tensor& x, int axis);
/// Normalizes over the last axis; gamma/beta have that axis's extent.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor* bias, int64_t stride, int64_t pad);
Tensor transpose_conv2d(const Tensor& x, const Tensor& w, const Tensor* bias, int64_t stride);

/// Resampling factors relative to the token grid, driven by s in {4,8,16,32}.
enum class ResampleFactor { x4, x2, x1, half, quarter };
ResampleFactor resample_factor_from(int64_t patch, int64_t s);
/// Spatial extent change for a factor applied to extent e.
int64_t resample_extent(ResampleFactor f, int64_t e);
/// Kernel shape the factor requires, given channel count c. x1 needs none.
std::vector<int64_t> resample_weight_shape(ResampleFactor f, int64_t c);
/// Up factors use transpose convolution, down factors strided convolution,
/// x1 is the identity (w/bias ignored).
Tensor resample(const Tensor& x, ResampleFactor f, const Tensor& w, const Tensor* bias);

Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor concat_rows(const Tensor& a, const Tensor& b);
Tensor slice_cols(const Tensor& x, int64_t c0, int64_t c1);
Tensor slice_rows(const Tensor& x, int64_t r0, int64_t r1);
/// n stacked copies of row `row` of x.
Tensor replicate_row(const Tensor& x, int64_t row, int64_t n);
Tensor reshape_copy(const Tensor& x, std::vector<int64_t> shape);

/// Token rows (N x D, row-major over the patch grid) to feature map D x gh x gw.
Tensor spatialize(const Tensor& tokens, int64_t gh, int64_t gw);
/// Inverse of spatialize.
Tensor flatten_tokens(const Tensor& map);
/// C x h x w image to N x (C*p*p) patch rows, patches row-major.
Tensor patchify(const Tensor& image, int64_t p);

Tensor sum_all(const Tensor& x);

// ------------------------ finite differences -------------------------------

struct FdOptions {
  double eps = 1e-5;
  /// 0 = every element; otherwise per-input sample size (seeded).
  int64_t max_elements_per_input = 0;
  uint64_t seed = 0;
};

struct FdReport {
  double max_rel_error = 0.0;
  int64_t checked = 0;
};

/// Central-difference check of d(sum(fn(inputs)))/dx against the tape.
/// Relative error uses max(|analytic|, |numeric|, 1e-2) as denominator so
/// near-zero gradients are compared absolutely.
FdReport finite_difference_check(const std::function<Tensor(const std::vector<Tensor>&)>& fn,
                                 std::vector<Tensor> inputs, const FdOptions& opts = {});

}  // namespace clft

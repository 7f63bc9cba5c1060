#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "avatar/rng.h"

namespace avatar {

class Tensor;

namespace detail {

struct TapeNode {
  std::vector<std::shared_ptr<struct TensorImpl>> parents;
  // Receives the output gradient and accumulates into parent grads.
  std::function<void(const std::vector<double>&)> backward;
};

struct TensorImpl {
  std::vector<int> shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until first touched
  bool requires_grad = false;
  std::shared_ptr<TapeNode> node;
};

}  // namespace detail

// Thread-local tape switch. When disabled, ops produce plain values and the
// graph is never built; inference workers flip it off with GradGuard.
bool grad_enabled();
void set_grad_enabled(bool on);

struct NoGradGuard {
  NoGradGuard() : prev_(grad_enabled()) { set_grad_enabled(false); }
  ~NoGradGuard() { set_grad_enabled(prev_); }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

// Dense row-major tensor of doubles. Copies share the underlying buffer.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
  static Tensor constant(std::vector<int> shape, double value);
  static Tensor from(std::vector<int> shape, std::vector<double> values,
                     bool requires_grad = false);
  static Tensor scalar(double value);
  static Tensor trunc_normal(std::vector<int> shape, double stddev, Rng& rng,
                             bool requires_grad = true);

  bool defined() const { return impl_ != nullptr; }
  const std::vector<int>& shape() const;
  int rank() const { return static_cast<int>(shape().size()); }
  int dim(int i) const;
  long long size() const;
  std::string shape_str() const;

  std::vector<double>& data();
  const std::vector<double>& data() const;
  double item() const;  // requires size() == 1

  bool requires_grad() const;
  // Gradient buffer, allocated (zeroed) on first access.
  std::vector<double>& grad();
  bool has_grad() const;
  void zero_grad();

  // Same buffer, detached from the tape: never receives gradient.
  Tensor detach() const;

  std::shared_ptr<detail::TensorImpl> impl() const { return impl_; }

 private:
  explicit Tensor(std::shared_ptr<detail::TensorImpl> impl)
      : impl_(std::move(impl)) {}
  std::shared_ptr<detail::TensorImpl> impl_;

  friend Tensor make_op_output(std::vector<int> shape,
                               std::vector<double> values,
                               std::vector<Tensor> parents,
                               std::function<void(const std::vector<double>&)> fn);
};

// ---- ops -------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& x);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double c);
// x: [m, n], v: [n]; adds v to every row.
Tensor add_rowvec(const Tensor& x, const Tensor& v);

Tensor softmax(const Tensor& x, int axis);
Tensor log_softmax(const Tensor& x);  // last axis
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps = 1e-6);
Tensor gelu(const Tensor& x);  // tanh approximation

// Gathers rows of table ([V, d]) by id; gradient scatters back.
Tensor embedding(const Tensor& table, const std::vector<int>& ids);

Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor slice_rows(const Tensor& x, int begin, int end);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor slice_cols(const Tensor& x, int begin, int end);

Tensor sum(const Tensor& x);   // scalar
Tensor mean(const Tensor& x);  // scalar

// log_probs: [T, V] log-probabilities; returns mean of -log_probs[t, target t].
Tensor nll_loss(const Tensor& log_probs, const std::vector<int>& targets);

// Reverse pass from a scalar loss. Populates grad on every reachable tensor
// that wants one; repeated calls accumulate. The tape is freed afterwards.
void backward(const Tensor& loss);

}  // namespace avatar

#include "avatar/tensor.h"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "avatar/error.h"

namespace avatar {

namespace {

thread_local bool g_grad_enabled = true;

long long shape_size(const std::vector<int>& shape) {
  long long n = 1;
  for (int d : shape) {
    if (d <= 0) throw ContractError("tensor dimensions must be positive");
    n *= d;
  }
  return n;
}

std::string shape_to_str(const std::vector<int>& shape) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << "]";
  return os.str();
}

bool tracked(const Tensor& t) {
  return t.requires_grad() || (t.impl() && t.impl()->node != nullptr);
}

void accumulate(const std::shared_ptr<detail::TensorImpl>& impl,
                const std::vector<double>& delta) {
  if (impl->grad.empty()) impl->grad.assign(impl->data.size(), 0.0);
  for (size_t i = 0; i < delta.size(); ++i) impl->grad[i] += delta[i];
}

std::vector<double>& grad_buffer(const std::shared_ptr<detail::TensorImpl>& impl) {
  if (impl->grad.empty()) impl->grad.assign(impl->data.size(), 0.0);
  return impl->grad;
}

}  // namespace

bool grad_enabled() { return g_grad_enabled; }
void set_grad_enabled(bool on) { g_grad_enabled = on; }

Tensor make_op_output(std::vector<int> shape, std::vector<double> values,
                      std::vector<Tensor> parents,
                      std::function<void(const std::vector<double>&)> fn) {
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(values);
  if (g_grad_enabled) {
    bool any = false;
    for (const auto& p : parents) any = any || tracked(p);
    if (any) {
      auto node = std::make_shared<detail::TapeNode>();
      for (const auto& p : parents) node->parents.push_back(p.impl());
      node->backward = std::move(fn);
      impl->node = std::move(node);
    }
  }
  return Tensor(std::move(impl));
}

// ---- Tensor ----------------------------------------------------------

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->data.assign(static_cast<size_t>(shape_size(shape)), 0.0);
  impl->shape = std::move(shape);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::constant(std::vector<int> shape, double value) {
  Tensor t = zeros(std::move(shape), false);
  std::fill(t.data().begin(), t.data().end(), value);
  return t;
}

Tensor Tensor::from(std::vector<int> shape, std::vector<double> values,
                    bool requires_grad) {
  if (static_cast<long long>(values.size()) != shape_size(shape)) {
    throw ContractError("Tensor::from: " + std::to_string(values.size()) +
                        " values do not fill shape " + shape_to_str(shape));
  }
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(values);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::scalar(double value) { return from({1}, {value}); }

Tensor Tensor::trunc_normal(std::vector<int> shape, double stddev, Rng& rng,
                            bool requires_grad) {
  Tensor t = zeros(std::move(shape), requires_grad);
  for (double& v : t.data()) v = rng.trunc_normal(stddev);
  return t;
}

const std::vector<int>& Tensor::shape() const {
  if (!impl_) throw ContractError("use of undefined tensor");
  return impl_->shape;
}

int Tensor::dim(int i) const {
  const auto& s = shape();
  if (i < 0 || i >= static_cast<int>(s.size()))
    throw ContractError("Tensor::dim: axis out of range");
  return s[i];
}

long long Tensor::size() const {
  return static_cast<long long>(data().size());
}

std::string Tensor::shape_str() const { return shape_to_str(shape()); }

std::vector<double>& Tensor::data() {
  if (!impl_) throw ContractError("use of undefined tensor");
  return impl_->data;
}

const std::vector<double>& Tensor::data() const {
  if (!impl_) throw ContractError("use of undefined tensor");
  return impl_->data;
}

double Tensor::item() const {
  if (size() != 1) throw ContractError("Tensor::item: tensor is not scalar");
  return data()[0];
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }

std::vector<double>& Tensor::grad() {
  if (!impl_) throw ContractError("use of undefined tensor");
  return grad_buffer(impl_);
}

bool Tensor::has_grad() const { return impl_ && !impl_->grad.empty(); }

void Tensor::zero_grad() {
  if (impl_ && !impl_->grad.empty())
    std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

Tensor Tensor::detach() const {
  if (!impl_) return Tensor();
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->shape = impl_->shape;
  impl->data = impl_->data;
  return Tensor(std::move(impl));
}

// ---- ops -------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw ContractError("matmul: incompatible shapes " + a.shape_str() + " and " +
                        b.shape_str());
  }
  const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(static_cast<size_t>(m) * n, 0.0);
  const auto& ad = a.data();
  const auto& bd = b.data();
  for (int i = 0; i < m; ++i) {
    double* crow = &out[static_cast<size_t>(i) * n];
    const double* arow = &ad[static_cast<size_t>(i) * k];
    for (int p = 0; p < k; ++p) {
      const double aip = arow[p];
      if (aip == 0.0) continue;
      const double* brow = &bd[static_cast<size_t>(p) * n];
      for (int j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
  auto ai = a.impl();
  auto bi = b.impl();
  return make_op_output(
      {m, n}, std::move(out), {a, b},
      [ai, bi, m, k, n](const std::vector<double>& gout) {
        if (ai->requires_grad || ai->node) {
          auto& ga = grad_buffer(ai);
          const auto& bd = bi->data;
          for (int i = 0; i < m; ++i) {
            const double* grow = &gout[static_cast<size_t>(i) * n];
            double* garow = &ga[static_cast<size_t>(i) * k];
            for (int p = 0; p < k; ++p) {
              const double* brow = &bd[static_cast<size_t>(p) * n];
              double acc = 0.0;
              for (int j = 0; j < n; ++j) acc += grow[j] * brow[j];
              garow[p] += acc;
            }
          }
        }
        if (bi->requires_grad || bi->node) {
          auto& gb = grad_buffer(bi);
          const auto& ad = ai->data;
          for (int i = 0; i < m; ++i) {
            const double* grow = &gout[static_cast<size_t>(i) * n];
            const double* arow = &ad[static_cast<size_t>(i) * k];
            for (int p = 0; p < k; ++p) {
              const double aip = arow[p];
              if (aip == 0.0) continue;
              double* gbrow = &gb[static_cast<size_t>(p) * n];
              for (int j = 0; j < n; ++j) gbrow[j] += aip * grow[j];
            }
          }
        }
      });
}

Tensor transpose(const Tensor& x) {
  if (x.rank() != 2) throw ContractError("transpose: rank-2 tensor required");
  const int m = x.dim(0), n = x.dim(1);
  std::vector<double> out(static_cast<size_t>(m) * n);
  const auto& xd = x.data();
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      out[static_cast<size_t>(j) * m + i] = xd[static_cast<size_t>(i) * n + j];
  auto xi = x.impl();
  return make_op_output({n, m}, std::move(out), {x},
                        [xi, m, n](const std::vector<double>& gout) {
                          if (!(xi->requires_grad || xi->node)) return;
                          auto& gx = grad_buffer(xi);
                          for (int j = 0; j < n; ++j)
                            for (int i = 0; i < m; ++i)
                              gx[static_cast<size_t>(i) * n + j] +=
                                  gout[static_cast<size_t>(j) * m + i];
                        });
}

namespace {

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw ContractError(std::string(op) + ": shape mismatch " + a.shape_str() +
                        " vs " + b.shape_str());
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  std::vector<double> out(a.data());
  const auto& bd = b.data();
  for (size_t i = 0; i < out.size(); ++i) out[i] += bd[i];
  auto ai = a.impl();
  auto bi = b.impl();
  return make_op_output(a.shape(), std::move(out), {a, b},
                        [ai, bi](const std::vector<double>& gout) {
                          if (ai->requires_grad || ai->node) accumulate(ai, gout);
                          if (bi->requires_grad || bi->node) accumulate(bi, gout);
                        });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  std::vector<double> out(a.data());
  const auto& bd = b.data();
  for (size_t i = 0; i < out.size(); ++i) out[i] -= bd[i];
  auto ai = a.impl();
  auto bi = b.impl();
  return make_op_output(a.shape(), std::move(out), {a, b},
                        [ai, bi](const std::vector<double>& gout) {
                          if (ai->requires_grad || ai->node) accumulate(ai, gout);
                          if (bi->requires_grad || bi->node) {
                            auto& gb = grad_buffer(bi);
                            for (size_t i = 0; i < gout.size(); ++i) gb[i] -= gout[i];
                          }
                        });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  std::vector<double> out(a.data());
  const auto& bd = b.data();
  for (size_t i = 0; i < out.size(); ++i) out[i] *= bd[i];
  auto ai = a.impl();
  auto bi = b.impl();
  return make_op_output(a.shape(), std::move(out), {a, b},
                        [ai, bi](const std::vector<double>& gout) {
                          if (ai->requires_grad || ai->node) {
                            auto& ga = grad_buffer(ai);
                            for (size_t i = 0; i < gout.size(); ++i)
                              ga[i] += gout[i] * bi->data[i];
                          }
                          if (bi->requires_grad || bi->node) {
                            auto& gb = grad_buffer(bi);
                            for (size_t i = 0; i < gout.size(); ++i)
                              gb[i] += gout[i] * ai->data[i];
                          }
                        });
}

Tensor scale(const Tensor& x, double c) {
  std::vector<double> out(x.data());
  for (double& v : out) v *= c;
  auto xi = x.impl();
  return make_op_output(x.shape(), std::move(out), {x},
                        [xi, c](const std::vector<double>& gout) {
                          if (!(xi->requires_grad || xi->node)) return;
                          auto& gx = grad_buffer(xi);
                          for (size_t i = 0; i < gout.size(); ++i) gx[i] += c * gout[i];
                        });
}

Tensor add_rowvec(const Tensor& x, const Tensor& v) {
  if (x.rank() != 2 || v.rank() != 1 || v.dim(0) != x.dim(1))
    throw ContractError("add_rowvec: shapes " + x.shape_str() + " and " +
                        v.shape_str() + " do not align");
  const int m = x.dim(0), n = x.dim(1);
  std::vector<double> out(x.data());
  const auto& vd = v.data();
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) out[static_cast<size_t>(i) * n + j] += vd[j];
  auto xi = x.impl();
  auto vi = v.impl();
  return make_op_output(x.shape(), std::move(out), {x, v},
                        [xi, vi, m, n](const std::vector<double>& gout) {
                          if (xi->requires_grad || xi->node) accumulate(xi, gout);
                          if (vi->requires_grad || vi->node) {
                            auto& gv = grad_buffer(vi);
                            for (int i = 0; i < m; ++i)
                              for (int j = 0; j < n; ++j)
                                gv[j] += gout[static_cast<size_t>(i) * n + j];
                          }
                        });
}

namespace {

struct AxisView {
  long long outer, len, inner;
};

AxisView axis_view(const std::vector<int>& shape, int axis) {
  if (axis < 0) axis += static_cast<int>(shape.size());
  if (axis < 0 || axis >= static_cast<int>(shape.size()))
    throw ContractError("softmax: axis out of range");
  AxisView v{1, shape[axis], 1};
  for (int i = 0; i < axis; ++i) v.outer *= shape[i];
  for (int i = axis + 1; i < static_cast<int>(shape.size()); ++i) v.inner *= shape[i];
  return v;
}

}  // namespace

Tensor softmax(const Tensor& x, int axis) {
  const AxisView v = axis_view(x.shape(), axis);
  std::vector<double> out(x.data().size());
  const auto& xd = x.data();
  for (long long o = 0; o < v.outer; ++o) {
    for (long long in = 0; in < v.inner; ++in) {
      const long long base = o * v.len * v.inner + in;
      double mx = xd[base];
      for (long long i = 1; i < v.len; ++i)
        mx = std::max(mx, xd[base + i * v.inner]);
      if (!std::isfinite(mx))
        throw InputError("softmax: non-finite input");
      double z = 0.0;
      for (long long i = 0; i < v.len; ++i) {
        const double e = std::exp(xd[base + i * v.inner] - mx);
        out[base + i * v.inner] = e;
        z += e;
      }
      for (long long i = 0; i < v.len; ++i) out[base + i * v.inner] /= z;
    }
  }
  auto xi = x.impl();
  auto keep = std::make_shared<std::vector<double>>(out);
  return make_op_output(
      x.shape(), std::move(out), {x},
      [xi, keep, v](const std::vector<double>& gout) {
        if (!(xi->requires_grad || xi->node)) return;
        auto& gx = grad_buffer(xi);
        const auto& y = *keep;
        for (long long o = 0; o < v.outer; ++o) {
          for (long long in = 0; in < v.inner; ++in) {
            const long long base = o * v.len * v.inner + in;
            double dot = 0.0;
            for (long long i = 0; i < v.len; ++i) {
              const long long at = base + i * v.inner;
              dot += gout[at] * y[at];
            }
            for (long long i = 0; i < v.len; ++i) {
              const long long at = base + i * v.inner;
              gx[at] += y[at] * (gout[at] - dot);
            }
          }
        }
      });
}

Tensor log_softmax(const Tensor& x) {
  if (x.rank() < 1) throw ContractError("log_softmax: rank >= 1 required");
  const int n = x.shape().back();
  const long long rows = x.size() / n;
  std::vector<double> out(x.data().size());
  const auto& xd = x.data();
  for (long long r = 0; r < rows; ++r) {
    const size_t base = static_cast<size_t>(r) * n;
    double mx = xd[base];
    for (int i = 1; i < n; ++i) mx = std::max(mx, xd[base + i]);
    double z = 0.0;
    for (int i = 0; i < n; ++i) z += std::exp(xd[base + i] - mx);
    const double lse = mx + std::log(z);
    for (int i = 0; i < n; ++i) out[base + i] = xd[base + i] - lse;
  }
  auto xi = x.impl();
  auto keep = std::make_shared<std::vector<double>>(out);
  return make_op_output(
      x.shape(), std::move(out), {x},
      [xi, keep, rows, n](const std::vector<double>& gout) {
        if (!(xi->requires_grad || xi->node)) return;
        auto& gx = grad_buffer(xi);
        const auto& y = *keep;
        for (long long r = 0; r < rows; ++r) {
          const size_t base = static_cast<size_t>(r) * n;
          double gsum = 0.0;
          for (int i = 0; i < n; ++i) gsum += gout[base + i];
          for (int i = 0; i < n; ++i)
            gx[base + i] += gout[base + i] - std::exp(y[base + i]) * gsum;
        }
      });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps) {
  if (eps <= 0) throw ContractError("layer_norm: eps must be positive");
  const int d = x.shape().back();
  if (gamma.rank() != 1 || gamma.dim(0) != d || beta.rank() != 1 || beta.dim(0) != d)
    throw ContractError("layer_norm: gamma/beta must be [" + std::to_string(d) + "]");
  const long long rows = x.size() / d;
  std::vector<double> out(x.data().size());
  auto xhat = std::make_shared<std::vector<double>>(x.data().size());
  auto inv_std = std::make_shared<std::vector<double>>(rows);
  const auto& xd = x.data();
  const auto& gd = gamma.data();
  const auto& bd = beta.data();
  for (long long r = 0; r < rows; ++r) {
    const size_t base = static_cast<size_t>(r) * d;
    double mu = 0.0;
    for (int i = 0; i < d; ++i) mu += xd[base + i];
    mu /= d;
    double var = 0.0;
    for (int i = 0; i < d; ++i) {
      const double c = xd[base + i] - mu;
      var += c * c;
    }
    var /= d;
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[r] = is;
    for (int i = 0; i < d; ++i) {
      const double h = (xd[base + i] - mu) * is;
      (*xhat)[base + i] = h;
      out[base + i] = gd[i] * h + bd[i];
    }
  }
  auto xi = x.impl();
  auto gi = gamma.impl();
  auto bi = beta.impl();
  return make_op_output(
      x.shape(), std::move(out), {x, gamma, beta},
      [xi, gi, bi, xhat, inv_std, rows, d](const std::vector<double>& gout) {
        if (bi->requires_grad || bi->node) {
          auto& gb = grad_buffer(bi);
          for (long long r = 0; r < rows; ++r)
            for (int i = 0; i < d; ++i) gb[i] += gout[static_cast<size_t>(r) * d + i];
        }
        if (gi->requires_grad || gi->node) {
          auto& gg = grad_buffer(gi);
          for (long long r = 0; r < rows; ++r)
            for (int i = 0; i < d; ++i) {
              const size_t at = static_cast<size_t>(r) * d + i;
              gg[i] += gout[at] * (*xhat)[at];
            }
        }
        if (xi->requires_grad || xi->node) {
          auto& gx = grad_buffer(xi);
          const auto& g = gi->data;
          for (long long r = 0; r < rows; ++r) {
            const size_t base = static_cast<size_t>(r) * d;
            double m1 = 0.0, m2 = 0.0;
            for (int i = 0; i < d; ++i) {
              const double dh = gout[base + i] * g[i];
              m1 += dh;
              m2 += dh * (*xhat)[base + i];
            }
            m1 /= d;
            m2 /= d;
            const double is = (*inv_std)[r];
            for (int i = 0; i < d; ++i) {
              const double dh = gout[base + i] * g[i];
              gx[base + i] += is * (dh - m1 - (*xhat)[base + i] * m2);
            }
          }
        }
      });
}

Tensor gelu(const Tensor& x) {
  constexpr double kC = 0.7978845608028654;  // sqrt(2/pi)
  constexpr double kA = 0.044715;
  std::vector<double> out(x.data().size());
  const auto& xd = x.data();
  for (size_t i = 0; i < out.size(); ++i) {
    const double v = xd[i];
    out[i] = 0.5 * v * (1.0 + std::tanh(kC * (v + kA * v * v * v)));
  }
  auto xi = x.impl();
  return make_op_output(
      x.shape(), std::move(out), {x},
      [xi](const std::vector<double>& gout) {
        if (!(xi->requires_grad || xi->node)) return;
        auto& gx = grad_buffer(xi);
        for (size_t i = 0; i < gout.size(); ++i) {
          const double v = xi->data[i];
          const double u = kC * (v + kA * v * v * v);
          const double t = std::tanh(u);
          const double du = kC * (1.0 + 3.0 * kA * v * v);
          gx[i] += gout[i] * (0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * du);
        }
      });
}

Tensor embedding(const Tensor& table, const std::vector<int>& ids) {
  if (table.rank() != 2) throw ContractError("embedding: table must be rank 2");
  const int v = table.dim(0), d = table.dim(1);
  for (int id : ids)
    if (id < 0 || id >= v)
      throw ContractError("embedding: id " + std::to_string(id) +
                          " outside table of " + std::to_string(v) + " rows");
  const int n = static_cast<int>(ids.size());
  if (n == 0) throw ContractError("embedding: empty id sequence");
  std::vector<double> out(static_cast<size_t>(n) * d);
  const auto& td = table.data();
  for (int i = 0; i < n; ++i)
    std::copy_n(&td[static_cast<size_t>(ids[i]) * d], d,
                &out[static_cast<size_t>(i) * d]);
  auto ti = table.impl();
  auto keep_ids = std::make_shared<std::vector<int>>(ids);
  return make_op_output({n, d}, std::move(out), {table},
                        [ti, keep_ids, d](const std::vector<double>& gout) {
                          if (!(ti->requires_grad || ti->node)) return;
                          auto& gt = grad_buffer(ti);
                          for (size_t i = 0; i < keep_ids->size(); ++i) {
                            double* row = &gt[static_cast<size_t>((*keep_ids)[i]) * d];
                            const double* g = &gout[i * d];
                            for (int j = 0; j < d; ++j) row[j] += g[j];
                          }
                        });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ContractError("concat_rows: no parts");
  const int n = parts[0].dim(1);
  int rows = 0;
  for (const auto& p : parts) {
    if (p.rank() != 2 || p.dim(1) != n)
      throw ContractError("concat_rows: column mismatch");
    rows += p.dim(0);
  }
  std::vector<double> out;
  out.reserve(static_cast<size_t>(rows) * n);
  for (const auto& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
  std::vector<std::shared_ptr<detail::TensorImpl>> impls;
  std::vector<int> row_counts;
  for (const auto& p : parts) {
    impls.push_back(p.impl());
    row_counts.push_back(p.dim(0));
  }
  return make_op_output(
      {rows, n}, std::move(out), parts,
      [impls, row_counts, n](const std::vector<double>& gout) {
        size_t offset = 0;
        for (size_t k = 0; k < impls.size(); ++k) {
          const size_t count = static_cast<size_t>(row_counts[k]) * n;
          if (impls[k]->requires_grad || impls[k]->node) {
            auto& g = grad_buffer(impls[k]);
            for (size_t i = 0; i < count; ++i) g[i] += gout[offset + i];
          }
          offset += count;
        }
      });
}

Tensor slice_rows(const Tensor& x, int begin, int end) {
  if (x.rank() != 2 || begin < 0 || end > x.dim(0) || begin >= end)
    throw ContractError("slice_rows: invalid range");
  const int n = x.dim(1);
  std::vector<double> out(x.data().begin() + static_cast<size_t>(begin) * n,
                          x.data().begin() + static_cast<size_t>(end) * n);
  auto xi = x.impl();
  return make_op_output({end - begin, n}, std::move(out), {x},
                        [xi, begin, n](const std::vector<double>& gout) {
                          if (!(xi->requires_grad || xi->node)) return;
                          auto& gx = grad_buffer(xi);
                          const size_t off = static_cast<size_t>(begin) * n;
                          for (size_t i = 0; i < gout.size(); ++i) gx[off + i] += gout[i];
                        });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ContractError("concat_cols: no parts");
  const int m = parts[0].dim(0);
  int cols = 0;
  for (const auto& p : parts) {
    if (p.rank() != 2 || p.dim(0) != m) throw ContractError("concat_cols: row mismatch");
    cols += p.dim(1);
  }
  std::vector<double> out(static_cast<size_t>(m) * cols);
  int at = 0;
  for (const auto& p : parts) {
    const int n = p.dim(1);
    for (int i = 0; i < m; ++i)
      std::copy_n(&p.data()[static_cast<size_t>(i) * n], n,
                  &out[static_cast<size_t>(i) * cols + at]);
    at += n;
  }
  std::vector<std::shared_ptr<detail::TensorImpl>> impls;
  std::vector<int> widths;
  for (const auto& p : parts) {
    impls.push_back(p.impl());
    widths.push_back(p.dim(1));
  }
  return make_op_output(
      {m, cols}, std::move(out), parts,
      [impls, widths, m, cols](const std::vector<double>& gout) {
        int at = 0;
        for (size_t k = 0; k < impls.size(); ++k) {
          const int n = widths[k];
          if (impls[k]->requires_grad || impls[k]->node) {
            auto& g = grad_buffer(impls[k]);
            for (int i = 0; i < m; ++i)
              for (int j = 0; j < n; ++j)
                g[static_cast<size_t>(i) * n + j] +=
                    gout[static_cast<size_t>(i) * cols + at + j];
          }
          at += n;
        }
      });
}

Tensor slice_cols(const Tensor& x, int begin, int end) {
  if (x.rank() != 2 || begin < 0 || end > x.dim(1) || begin >= end)
    throw ContractError("slice_cols: invalid range");
  const int m = x.dim(0), n = x.dim(1), w = end - begin;
  std::vector<double> out(static_cast<size_t>(m) * w);
  const auto& xd = x.data();
  for (int i = 0; i < m; ++i)
    std::copy_n(&xd[static_cast<size_t>(i) * n + begin], w,
                &out[static_cast<size_t>(i) * w]);
  auto xi = x.impl();
  return make_op_output({m, w}, std::move(out), {x},
                        [xi, begin, m, n, w](const std::vector<double>& gout) {
                          if (!(xi->requires_grad || xi->node)) return;
                          auto& gx = grad_buffer(xi);
                          for (int i = 0; i < m; ++i)
                            for (int j = 0; j < w; ++j)
                              gx[static_cast<size_t>(i) * n + begin + j] +=
                                  gout[static_cast<size_t>(i) * w + j];
                        });
}

Tensor sum(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  auto xi = x.impl();
  return make_op_output({1}, {acc}, {x},
                        [xi](const std::vector<double>& gout) {
                          if (!(xi->requires_grad || xi->node)) return;
                          auto& gx = grad_buffer(xi);
                          for (double& g : gx) g += gout[0];
                        });
}

Tensor mean(const Tensor& x) {
  return scale(sum(x), 1.0 / static_cast<double>(x.size()));
}

Tensor nll_loss(const Tensor& log_probs, const std::vector<int>& targets) {
  if (log_probs.rank() != 2) throw ContractError("nll_loss: [T, V] input required");
  const int t = log_probs.dim(0), v = log_probs.dim(1);
  if (static_cast<int>(targets.size()) != t)
    throw ContractError("nll_loss: target length mismatch");
  for (int id : targets)
    if (id < 0 || id >= v) throw ContractError("nll_loss: target id out of range");
  double acc = 0.0;
  const auto& ld = log_probs.data();
  for (int i = 0; i < t; ++i) acc -= ld[static_cast<size_t>(i) * v + targets[i]];
  acc /= t;
  auto li = log_probs.impl();
  auto keep = std::make_shared<std::vector<int>>(targets);
  return make_op_output({1}, {acc}, {log_probs},
                        [li, keep, t, v](const std::vector<double>& gout) {
                          if (!(li->requires_grad || li->node)) return;
                          auto& gl = grad_buffer(li);
                          const double c = gout[0] / t;
                          for (int i = 0; i < t; ++i)
                            gl[static_cast<size_t>(i) * v + (*keep)[i]] -= c;
                        });
}

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1)
    throw ContractError("backward: loss must be a defined scalar");

  // Iterative post-order DFS for the topological order.
  std::vector<detail::TensorImpl*> order;
  std::unordered_set<detail::TensorImpl*> seen;
  struct Frame {
    detail::TensorImpl* impl;
    size_t next_parent;
  };
  std::vector<Frame> stack;
  if (seen.insert(loss.impl().get()).second)
    stack.push_back({loss.impl().get(), 0});
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.impl->node && f.next_parent < f.impl->node->parents.size()) {
      detail::TensorImpl* p = f.impl->node->parents[f.next_parent++].get();
      if (p->node && seen.insert(p).second) stack.push_back({p, 0});
    } else {
      order.push_back(f.impl);
      stack.pop_back();
    }
  }

  auto li = loss.impl();
  if (li->grad.empty()) li->grad.assign(1, 0.0);
  li->grad[0] += 1.0;

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::TensorImpl* impl = *it;
    if (impl->node && impl->node->backward) {
      if (impl->grad.empty()) impl->grad.assign(impl->data.size(), 0.0);
      impl->node->backward(impl->grad);
    }
  }

  // Free the tape; parameter grads survive on their own tensors.
  for (detail::TensorImpl* impl : order) impl->node.reset();
}

}  // namespace avatar

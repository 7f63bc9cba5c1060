#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "avatar/rng.h"
#include "avatar/tensor.h"
#include "gradcheck.h"

namespace testsupport {

inline avatar::Tensor rand_tensor(std::vector<int> shape, avatar::Rng& rng,
                                  bool requires_grad = true) {
  long long n = 1;
  for (int d : shape) n *= d;
  std::vector<double> v(static_cast<size_t>(n));
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return avatar::Tensor::from(std::move(shape), std::move(v), requires_grad);
}

struct OpCheck {
  std::string name;
  double max_rel_err;
};

// Finite-difference check for every differentiable op, each wrapped in the
// smallest composition that produces a dense, non-degenerate gradient.
inline std::vector<OpCheck> run_op_gradchecks(uint64_t seed) {
  using namespace avatar;
  Rng rng(seed);
  std::vector<OpCheck> out;
  auto sq = [](const Tensor& t) { return mul(t, t); };
  auto record = [&](const std::string& name,
                    const std::function<Tensor()>& loss,
                    std::vector<Tensor> params) {
    out.push_back({name, fd_max_rel_err(loss, std::move(params))});
  };

  {
    Tensor a = rand_tensor({4, 3}, rng), b = rand_tensor({3, 2}, rng);
    record("matmul", [=] { return sum(sq(matmul(a, b))); }, {a, b});
  }
  {
    Tensor x = rand_tensor({3, 5}, rng);
    record("transpose", [=] { return sum(sq(transpose(x))); }, {x});
  }
  {
    Tensor a = rand_tensor({2, 4}, rng), b = rand_tensor({2, 4}, rng);
    record("add", [=] { return sum(sq(add(a, b))); }, {a, b});
    record("sub", [=] { return sum(sq(sub(a, b))); }, {a, b});
    record("mul", [=] { return sum(sq(mul(a, b))); }, {a, b});
  }
  {
    Tensor x = rand_tensor({2, 3}, rng);
    record("scale", [=] { return sum(sq(scale(x, 1.7))); }, {x});
  }
  {
    Tensor x = rand_tensor({3, 4}, rng), v = rand_tensor({4}, rng);
    record("add_rowvec", [=] { return sum(sq(add_rowvec(x, v))); }, {x, v});
  }
  {
    // sum(softmax) is constant, so weight the outputs to expose the Jacobian.
    Tensor x = rand_tensor({3, 8}, rng);
    Tensor w = rand_tensor({3, 8}, rng, false);
    record("softmax_rows", [=] { return sum(mul(softmax(x, 1), w)); }, {x});
    record("softmax_cols", [=] { return sum(mul(softmax(x, 0), w)); }, {x});
    record("log_softmax", [=] { return sum(mul(log_softmax(x), w)); }, {x});
  }
  {
    Tensor x = rand_tensor({3, 16}, rng);
    Tensor gamma = rand_tensor({16}, rng), beta = rand_tensor({16}, rng);
    Tensor w = rand_tensor({3, 16}, rng, false);
    record("layer_norm",
           [=] { return sum(mul(layer_norm(x, gamma, beta), w)); },
           {x, gamma, beta});
  }
  {
    Tensor x = rand_tensor({2, 6}, rng);
    record("gelu", [=] { return sum(gelu(x)); }, {x});
  }
  {
    // Repeated ids exercise gradient scatter-accumulation.
    Tensor table = rand_tensor({7, 4}, rng);
    std::vector<int> ids = {1, 3, 3, 0, 6};
    record("embedding", [=] { return sum(sq(embedding(table, ids))); },
           {table});
  }
  {
    Tensor a = rand_tensor({2, 3}, rng), b = rand_tensor({1, 3}, rng),
           c = rand_tensor({3, 3}, rng);
    record("concat_rows",
           [=] { return sum(sq(concat_rows({a, b, c}))); }, {a, b, c});
  }
  {
    Tensor x = rand_tensor({5, 3}, rng);
    record("slice_rows", [=] { return sum(sq(slice_rows(x, 1, 4))); }, {x});
  }
  {
    Tensor a = rand_tensor({2, 3}, rng), b = rand_tensor({2, 2}, rng);
    record("concat_cols", [=] { return sum(sq(concat_cols({a, b}))); },
           {a, b});
  }
  {
    Tensor x = rand_tensor({3, 6}, rng);
    record("slice_cols", [=] { return sum(sq(slice_cols(x, 2, 5))); }, {x});
  }
  {
    Tensor x = rand_tensor({4, 2}, rng);
    record("sum", [=] { return sum(mul(x, x)); }, {x});
    record("mean", [=] { return mean(mul(x, x)); }, {x});
  }
  {
    Tensor z = rand_tensor({4, 7}, rng);
    std::vector<int> targets = {1, 0, 6, 3};
    record("nll_loss", [=] { return nll_loss(log_softmax(z), targets); },
           {z});
  }
  return out;
}

}  // namespace testsupport

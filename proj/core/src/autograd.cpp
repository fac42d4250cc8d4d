#include "toolnet/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>

namespace toolnet {

Var make_result(Tensor value, std::vector<Var> parents, std::function<void(Node&)> backprop) {
  bool rg = false;
  for (const auto& p : parents) rg = rg || p->requires_grad;
  auto node = std::make_shared<Node>(std::move(value), rg);
  node->parents = std::move(parents);
  if (rg) node->backprop = std::move(backprop);
  return node;
}

namespace {

void topo_sort(const Var& root, std::vector<Node*>& order) {
  // Iterative DFS; graphs can be a few hundred nodes deep.
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.get(), 0);
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
}

}  // namespace

void backward(const Var& root) {
  if (!root) throw std::logic_error("backward: null root");
  if (!root->backprop && root->parents.empty()) {
    throw std::logic_error("backward: no forward pass recorded for this value");
  }
  if (root->value.numel() != 1) throw std::logic_error("backward: root must be scalar");
  std::vector<Node*> order;
  topo_sort(root, order);
  root->grad[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backprop) n->backprop(*n);
  }
}

namespace {

// C[m x n] += A[m x k] * B[k x n]
void matmul_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      double av = arow[p];
      if (av == 0.0) continue;
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[m x n] += A^T where A is [k x m], B is [k x n]
void matmul_at_b_acc(const double* a, const double* b, double* c, std::size_t k, std::size_t m, std::size_t n) {
  for (std::size_t p = 0; p < k; ++p) {
    const double* arow = a + p * m;
    const double* brow = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      double av = arow[i];
      if (av == 0.0) continue;
      double* crow = c + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[m x n] += A[m x k] * B^T where B is [n x k]
void matmul_a_bt_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      const double* brow = b + j * k;
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += arow[p] * brow[p];
      crow[j] += s;
    }
  }
}

void require_4d(const Tensor& t, const char* op) {
  if (t.ndim() != 4) {
    throw std::invalid_argument(std::string(op) + ": expected 4-axis input, got " + shape_string(t.shape()));
  }
}

// cols is [Ci*kh*kw, Ho*Wo] for one sample.
void im2col(const double* img, std::size_t ci, std::size_t h, std::size_t w, std::size_t kh, std::size_t kw,
            std::size_t stride, std::size_t padding, std::size_t ho, std::size_t wo, double* cols) {
  std::size_t row = 0;
  for (std::size_t c = 0; c < ci; ++c) {
    const double* plane = img + c * h * w;
    for (std::size_t ky = 0; ky < kh; ++ky) {
      for (std::size_t kx = 0; kx < kw; ++kx, ++row) {
        double* out = cols + row * ho * wo;
        for (std::size_t oy = 0; oy < ho; ++oy) {
          std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ky) - static_cast<std::ptrdiff_t>(padding);
          for (std::size_t ox = 0; ox < wo; ++ox) {
            std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride + kx) - static_cast<std::ptrdiff_t>(padding);
            bool in = iy >= 0 && iy < static_cast<std::ptrdiff_t>(h) && ix >= 0 && ix < static_cast<std::ptrdiff_t>(w);
            out[oy * wo + ox] = in ? plane[static_cast<std::size_t>(iy) * w + static_cast<std::size_t>(ix)] : 0.0;
          }
        }
      }
    }
  }
}

void col2im_acc(const double* cols, std::size_t ci, std::size_t h, std::size_t w, std::size_t kh, std::size_t kw,
                std::size_t stride, std::size_t padding, std::size_t ho, std::size_t wo, double* img) {
  std::size_t row = 0;
  for (std::size_t c = 0; c < ci; ++c) {
    double* plane = img + c * h * w;
    for (std::size_t ky = 0; ky < kh; ++ky) {
      for (std::size_t kx = 0; kx < kw; ++kx, ++row) {
        const double* in = cols + row * ho * wo;
        for (std::size_t oy = 0; oy < ho; ++oy) {
          std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ky) - static_cast<std::ptrdiff_t>(padding);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
          for (std::size_t ox = 0; ox < wo; ++ox) {
            std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride + kx) - static_cast<std::ptrdiff_t>(padding);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
            plane[static_cast<std::size_t>(iy) * w + static_cast<std::size_t>(ix)] += in[oy * wo + ox];
          }
        }
      }
    }
  }
}

}  // namespace

Var conv2d(const Var& input, const Var& kernel, const Var& bias, std::size_t stride, std::size_t padding) {
  require_4d(input->value, "conv2d");
  require_4d(kernel->value, "conv2d kernel");
  const auto& xs = input->value.shape();
  const auto& ks = kernel->value.shape();
  std::size_t n = xs[0], ci = xs[1], h = xs[2], w = xs[3];
  std::size_t co = ks[0], kh = ks[2], kw = ks[3];
  if (ks[1] != ci) {
    throw std::invalid_argument("conv2d: input channels " + shape_string(xs) + " do not match kernel " +
                                shape_string(ks));
  }
  if (bias->value.numel() != co) {
    throw std::invalid_argument("conv2d: bias length " + std::to_string(bias->value.numel()) +
                                " does not match output channels " + std::to_string(co));
  }
  if (stride == 0) throw std::invalid_argument("conv2d: stride must be positive");
  if (kh > h + 2 * padding || kw > w + 2 * padding) {
    throw std::invalid_argument("conv2d: kernel " + shape_string(ks) + " larger than padded input " +
                                shape_string(xs));
  }
  std::size_t ho = (h + 2 * padding - kh) / stride + 1;
  std::size_t wo = (w + 2 * padding - kw) / stride + 1;

  std::size_t krows = ci * kh * kw;
  Tensor out({n, co, ho, wo});
  std::vector<double> cols(krows * ho * wo);
  for (std::size_t s = 0; s < n; ++s) {
    im2col(input->value.data() + s * ci * h * w, ci, h, w, kh, kw, stride, padding, ho, wo, cols.data());
    double* dst = out.data() + s * co * ho * wo;
    for (std::size_t c = 0; c < co; ++c) {
      double b = bias->value[c];
      double* row = dst + c * ho * wo;
      std::fill(row, row + ho * wo, b);
    }
    matmul_acc(kernel->value.data(), cols.data(), dst, co, krows, ho * wo);
  }
  out.check_finite("conv2d");

  return make_result(std::move(out), {input, kernel, bias}, [stride, padding](Node& self) {
    const Var& x = self.parents[0];
    const Var& k = self.parents[1];
    const Var& b = self.parents[2];
    const auto& xs2 = x->value.shape();
    const auto& ks2 = k->value.shape();
    std::size_t n2 = xs2[0], ci2 = xs2[1], h2 = xs2[2], w2 = xs2[3];
    std::size_t co2 = ks2[0], kh2 = ks2[2], kw2 = ks2[3];
    std::size_t ho2 = self.value.shape()[2], wo2 = self.value.shape()[3];
    std::size_t krows2 = ci2 * kh2 * kw2;
    std::vector<double> cols2(krows2 * ho2 * wo2);
    std::vector<double> dcols(krows2 * ho2 * wo2);
    for (std::size_t s = 0; s < n2; ++s) {
      const double* dout = self.grad.data() + s * co2 * ho2 * wo2;
      if (x->requires_grad || k->requires_grad) {
        im2col(x->value.data() + s * ci2 * h2 * w2, ci2, h2, w2, kh2, kw2, stride, padding, ho2, wo2, cols2.data());
      }
      if (k->requires_grad) {
        matmul_a_bt_acc(dout, cols2.data(), k->grad.data(), co2, ho2 * wo2, krows2);
      }
      if (x->requires_grad) {
        std::fill(dcols.begin(), dcols.end(), 0.0);
        matmul_at_b_acc(k->value.data(), dout, dcols.data(), co2, krows2, ho2 * wo2);
        col2im_acc(dcols.data(), ci2, h2, w2, kh2, kw2, stride, padding, ho2, wo2,
                   x->grad.data() + s * ci2 * h2 * w2);
      }
      if (b->requires_grad) {
        for (std::size_t c = 0; c < co2; ++c) {
          double s2 = 0.0;
          const double* row = dout + c * ho2 * wo2;
          for (std::size_t i = 0; i < ho2 * wo2; ++i) s2 += row[i];
          b->grad[c] += s2;
        }
      }
    }
  });
}

Var relu(const Var& x) {
  Tensor out(x->value.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = std::max(0.0, x->value[i]);
  return make_result(std::move(out), {x}, [](Node& self) {
    const Var& x2 = self.parents[0];
    if (!x2->requires_grad) return;
    for (std::size_t i = 0; i < self.grad.numel(); ++i) {
      if (x2->value[i] > 0.0) x2->grad[i] += self.grad[i];
    }
  });
}

Var sigmoid(const Var& x) {
  Tensor out(x->value.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = 1.0 / (1.0 + std::exp(-x->value[i]));
  out.check_finite("sigmoid");
  return make_result(std::move(out), {x}, [](Node& self) {
    const Var& x2 = self.parents[0];
    if (!x2->requires_grad) return;
    for (std::size_t i = 0; i < self.grad.numel(); ++i) {
      double y = self.value[i];
      x2->grad[i] += self.grad[i] * y * (1.0 - y);
    }
  });
}

Var add(const Var& a, const Var& b) {
  if (!a->value.same_shape(b->value)) {
    throw std::invalid_argument("add: shape mismatch " + shape_string(a->value.shape()) + " vs " +
                                shape_string(b->value.shape()));
  }
  Tensor out(a->value.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] + b->value[i];
  return make_result(std::move(out), {a, b}, [](Node& self) {
    for (const Var& p : self.parents) {
      if (!p->requires_grad) continue;
      for (std::size_t i = 0; i < self.grad.numel(); ++i) p->grad[i] += self.grad[i];
    }
  });
}

Var global_avg_pool(const Var& x) {
  require_4d(x->value, "global_avg_pool");
  const auto& s = x->value.shape();
  std::size_t n = s[0], c = s[1], hw = s[2] * s[3];
  Tensor out({n, c});
  for (std::size_t i = 0; i < n * c; ++i) {
    const double* plane = x->value.data() + i * hw;
    double sum = 0.0;
    for (std::size_t j = 0; j < hw; ++j) sum += plane[j];
    out[i] = sum / static_cast<double>(hw);
  }
  return make_result(std::move(out), {x}, [hw](Node& self) {
    const Var& x2 = self.parents[0];
    if (!x2->requires_grad) return;
    double inv = 1.0 / static_cast<double>(hw);
    for (std::size_t i = 0; i < self.grad.numel(); ++i) {
      double g = self.grad[i] * inv;
      double* plane = x2->grad.data() + i * hw;
      for (std::size_t j = 0; j < hw; ++j) plane[j] += g;
    }
  });
}

Var global_max_pool(const Var& x) {
  require_4d(x->value, "global_max_pool");
  const auto& s = x->value.shape();
  std::size_t n = s[0], c = s[1], hw = s[2] * s[3];
  Tensor out({n, c});
  auto argmax = std::make_shared<std::vector<std::size_t>>(n * c);
  for (std::size_t i = 0; i < n * c; ++i) {
    const double* plane = x->value.data() + i * hw;
    std::size_t best = 0;
    for (std::size_t j = 1; j < hw; ++j) {
      if (plane[j] > plane[best]) best = j;  // ties keep the lowest flat index
    }
    out[i] = plane[best];
    (*argmax)[i] = best;
  }
  return make_result(std::move(out), {x}, [hw, argmax](Node& self) {
    const Var& x2 = self.parents[0];
    if (!x2->requires_grad) return;
    for (std::size_t i = 0; i < self.grad.numel(); ++i) {
      x2->grad[i * hw + (*argmax)[i]] += self.grad[i];
    }
  });
}

Var max_pool(const Var& x, std::size_t k, std::size_t stride) {
  require_4d(x->value, "max_pool");
  const auto& s = x->value.shape();
  std::size_t n = s[0], c = s[1], h = s[2], w = s[3];
  if (k == 0 || stride == 0) throw std::invalid_argument("max_pool: window and stride must be positive");
  if (k > h || k > w) {
    throw std::invalid_argument("max_pool: window " + std::to_string(k) + " larger than spatial extent " +
                                shape_string(s));
  }
  std::size_t ho = (h - k) / stride + 1;
  std::size_t wo = (w - k) / stride + 1;
  Tensor out({n, c, ho, wo});
  auto argmax = std::make_shared<std::vector<std::size_t>>(out.numel());
  std::size_t idx = 0;
  for (std::size_t i = 0; i < n * c; ++i) {
    const double* plane = x->value.data() + i * h * w;
    for (std::size_t oy = 0; oy < ho; ++oy) {
      for (std::size_t ox = 0; ox < wo; ++ox, ++idx) {
        std::size_t best = (oy * stride) * w + ox * stride;
        double bv = plane[best];
        for (std::size_t ky = 0; ky < k; ++ky) {
          for (std::size_t kx = 0; kx < k; ++kx) {
            std::size_t p = (oy * stride + ky) * w + ox * stride + kx;
            if (plane[p] > bv) {
              bv = plane[p];
              best = p;
            }
          }
        }
        out[idx] = bv;
        (*argmax)[idx] = i * h * w + best;
      }
    }
  }
  return make_result(std::move(out), {x}, [argmax](Node& self) {
    const Var& x2 = self.parents[0];
    if (!x2->requires_grad) return;
    for (std::size_t i = 0; i < self.grad.numel(); ++i) {
      x2->grad[(*argmax)[i]] += self.grad[i];
    }
  });
}

Var fully_connected(const Var& x, const Var& weight, const Var& bias) {
  if (x->value.ndim() != 2 || weight->value.ndim() != 2) {
    throw std::invalid_argument("fully_connected: expected 2-axis input and weight");
  }
  std::size_t n = x->value.shape()[0], d = x->value.shape()[1];
  std::size_t out_dim = weight->value.shape()[0];
  if (weight->value.shape()[1] != d) {
    throw std::invalid_argument("fully_connected: input " + shape_string(x->value.shape()) +
                                " does not match weight " + shape_string(weight->value.shape()));
  }
  if (bias->value.numel() != out_dim) {
    throw std::invalid_argument("fully_connected: bias length mismatch");
  }
  Tensor out({n, out_dim});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < out_dim; ++j) out.data()[i * out_dim + j] = bias->value[j];
  }
  matmul_a_bt_acc(x->value.data(), weight->value.data(), out.data(), n, d, out_dim);
  out.check_finite("fully_connected");
  return make_result(std::move(out), {x, weight, bias}, [n, d, out_dim](Node& self) {
    const Var& x2 = self.parents[0];
    const Var& w2 = self.parents[1];
    const Var& b2 = self.parents[2];
    if (x2->requires_grad) {
      matmul_acc(self.grad.data(), w2->value.data(), x2->grad.data(), n, out_dim, d);
    }
    if (w2->requires_grad) {
      matmul_at_b_acc(self.grad.data(), x2->value.data(), w2->grad.data(), n, out_dim, d);
    }
    if (b2->requires_grad) {
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < out_dim; ++j) b2->grad[j] += self.grad[i * out_dim + j];
      }
    }
  });
}

Var batch_norm(const Var& x, const Var& gamma, const Var& beta, BatchNormState& state, bool train,
               double momentum, double epsilon) {
  require_4d(x->value, "batch_norm");
  const auto& s = x->value.shape();
  std::size_t n = s[0], c = s[1], h = s[2], w = s[3];
  std::size_t m = n * h * w;
  if (gamma->value.numel() != c || beta->value.numel() != c) {
    throw std::invalid_argument("batch_norm: gamma/beta length does not match channels");
  }
  if (train && m < 2) {
    throw std::invalid_argument("batch_norm: need at least 2 values per channel in train mode");
  }

  Tensor mean({c}), var({c});
  if (train) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      double sum = 0.0;
      for (std::size_t b = 0; b < n; ++b) {
        const double* plane = x->value.data() + (b * c + ch) * h * w;
        for (std::size_t i = 0; i < h * w; ++i) sum += plane[i];
      }
      double mu = sum / static_cast<double>(m);
      double sq = 0.0;
      for (std::size_t b = 0; b < n; ++b) {
        const double* plane = x->value.data() + (b * c + ch) * h * w;
        for (std::size_t i = 0; i < h * w; ++i) {
          double d = plane[i] - mu;
          sq += d * d;
        }
      }
      mean[ch] = mu;
      var[ch] = sq / static_cast<double>(m);
      state.running_mean[ch] = momentum * state.running_mean[ch] + (1.0 - momentum) * mu;
      state.running_var[ch] = momentum * state.running_var[ch] + (1.0 - momentum) * var[ch];
    }
  } else {
    mean = state.running_mean;
    var = state.running_var;
  }

  Tensor out(s);
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      double inv = 1.0 / std::sqrt(var[ch] + epsilon);
      double g = gamma->value[ch], bt = beta->value[ch], mu = mean[ch];
      const double* src = x->value.data() + (b * c + ch) * h * w;
      double* dst = out.data() + (b * c + ch) * h * w;
      for (std::size_t i = 0; i < h * w; ++i) dst[i] = g * (src[i] - mu) * inv + bt;
    }
  }
  out.check_finite("batch_norm");

  auto mean_keep = std::make_shared<Tensor>(std::move(mean));
  auto var_keep = std::make_shared<Tensor>(std::move(var));
  return make_result(std::move(out), {x, gamma, beta},
                     [train, epsilon, mean_keep, var_keep, n, c, h, w, m](Node& self) {
    const Var& x2 = self.parents[0];
    const Var& g2 = self.parents[1];
    const Var& b2 = self.parents[2];
    std::size_t hw = h * w;
    for (std::size_t ch = 0; ch < c; ++ch) {
      double mu = (*mean_keep)[ch];
      double inv = 1.0 / std::sqrt((*var_keep)[ch] + epsilon);
      double gamma_v = g2->value[ch];

      double sum_dy = 0.0, sum_dy_xhat = 0.0;
      for (std::size_t b = 0; b < n; ++b) {
        const double* dy = self.grad.data() + (b * c + ch) * hw;
        const double* xv = x2->value.data() + (b * c + ch) * hw;
        for (std::size_t i = 0; i < hw; ++i) {
          sum_dy += dy[i];
          sum_dy_xhat += dy[i] * (xv[i] - mu) * inv;
        }
      }
      if (g2->requires_grad) g2->grad[ch] += sum_dy_xhat;
      if (b2->requires_grad) b2->grad[ch] += sum_dy;
      if (!x2->requires_grad) continue;

      if (train) {
        double inv_m = 1.0 / static_cast<double>(m);
        for (std::size_t b = 0; b < n; ++b) {
          const double* dy = self.grad.data() + (b * c + ch) * hw;
          const double* xv = x2->value.data() + (b * c + ch) * hw;
          double* dx = x2->grad.data() + (b * c + ch) * hw;
          for (std::size_t i = 0; i < hw; ++i) {
            double xhat = (xv[i] - mu) * inv;
            dx[i] += gamma_v * inv * (dy[i] - inv_m * sum_dy - inv_m * xhat * sum_dy_xhat);
          }
        }
      } else {
        // Running stats are constants; the op is a per-channel affine map.
        for (std::size_t b = 0; b < n; ++b) {
          const double* dy = self.grad.data() + (b * c + ch) * hw;
          double* dx = x2->grad.data() + (b * c + ch) * hw;
          for (std::size_t i = 0; i < hw; ++i) dx[i] += gamma_v * inv * dy[i];
        }
      }
    }
  });
}

}  // namespace toolnet

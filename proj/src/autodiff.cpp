#include "rfsnn/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rfsnn/geometry.hpp"

namespace rfsnn {

// ---- tape -----------------------------------------------------------------

template <std::floating_point T>
Var BasicTape<T>::push(TensorT value, bool requires_grad) {
  nodes_.push_back(Node{std::move(value), TensorT{}, nullptr, requires_grad});
  return Var{nodes_.size() - 1};
}

template <std::floating_point T>
Var BasicTape<T>::constant(TensorT value) {
  return push(std::move(value), false);
}

template <std::floating_point T>
Var BasicTape<T>::variable(TensorT value) {
  return push(std::move(value), true);
}

template <std::floating_point T>
Var BasicTape<T>::parameter(BasicParameter<T>& p) {
  Var v = push(p.value, true);
  nodes_[v.id].param = &p;
  return v;
}

template <std::floating_point T>
typename BasicTape<T>::TensorT& BasicTape<T>::grad_buffer(Var v) {
  Node& n = nodes_.at(v.id);
  if (n.grad.size() == 0) n.grad = TensorT(n.value.shape());
  return n.grad;
}

template <std::floating_point T>
typename BasicTape<T>::TensorT BasicTape<T>::grad(Var v) const {
  const Node& n = nodes_.at(v.id);
  if (n.grad.size() == 0) return TensorT(n.value.shape());
  return n.grad;
}

template <std::floating_point T>
void BasicTape<T>::record(std::function<void()> backward_fn) {
  ops_.push_back(std::move(backward_fn));
}

template <std::floating_point T>
void BasicTape<T>::backward(Var out) {
  if (value(out).size() != 1)
    throw ConfigError("backward: implicit seed needs a single-element output, "
                      "got shape " + shape_to_string(value(out).shape()));
  backward(out, TensorT(value(out).shape(), T{1}));
}

template <std::floating_point T>
void BasicTape<T>::backward(Var out, const TensorT& seed) {
  if (seed.shape() != value(out).shape())
    throw ConfigError("backward: seed shape " + shape_to_string(seed.shape()) +
                      " differs from output shape " +
                      shape_to_string(value(out).shape()));
  for (auto& n : nodes_) n.grad = TensorT{};
  auto& g = grad_buffer(out);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = seed[i];
  for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
}

template <std::floating_point T>
void BasicTape<T>::accumulate_parameter_grads() const {
  for (const auto& n : nodes_) {
    if (!n.param || n.grad.size() == 0) continue;
    auto dst = n.param->grad.data();
    auto src = n.grad.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  }
}

// ---- kernels --------------------------------------------------------------

template <std::floating_point T>
void gemm(std::span<const T> a, std::span<const T> b, std::span<T> c,
          std::size_t m, std::size_t k, std::size_t n) {
  std::fill(c.begin(), c.end(), T{0});
  for (std::size_t i = 0; i < m; ++i) {
    T* crow = c.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = a[i * k + p];
      if (av == T{0}) continue;
      const T* brow = b.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

namespace {

// da[m,k] += dc[m,n] * b[k,n]^T
template <std::floating_point T>
void gemm_acc_a_bt(const T* dc, const T* b, T* da, std::size_t m,
                   std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const T* drow = dc + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T* brow = b + p * n;
      T acc{0};
      for (std::size_t j = 0; j < n; ++j) acc += drow[j] * brow[j];
      da[i * k + p] += acc;
    }
  }
}

// db[k,n] += a[m,k]^T * dc[m,n]
template <std::floating_point T>
void gemm_acc_at_b(const T* a, const T* dc, T* db, std::size_t m,
                   std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const T* drow = dc + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = a[i * k + p];
      if (av == T{0}) continue;
      T* dbrow = db + p * n;
      for (std::size_t j = 0; j < n; ++j) dbrow[j] += av * drow[j];
    }
  }
}

template <std::floating_point T>
void require_same_shape(const BasicTensor<T>& a, const BasicTensor<T>& b,
                        const char* op) {
  if (a.shape() != b.shape())
    throw ConfigError(std::string(op) + ": shape mismatch " +
                      shape_to_string(a.shape()) + " vs " +
                      shape_to_string(b.shape()));
}

}  // namespace

// ---- ops ------------------------------------------------------------------

template <std::floating_point T>
Var elementwise_map(BasicTape<T>& tape, Var x, const ScalarMap<T>& fn) {
  const auto& xv = tape.value(x);
  BasicTensor<T> y(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) y[i] = fn.f(xv[i]);
  Var out = tape.push(std::move(y), tape.requires_grad(x));
  if (tape.requires_grad(x)) {
    tape.record([&tape, x, out, df = fn.df] {
      const auto* gyp = tape.grad_ptr(out);
      if (!gyp) return;
      const auto& gy = *gyp;
      auto& gx = tape.grad_buffer(x);
      if (gy.shape() != gx.shape())
        throw std::logic_error("elementwise_map: gradient shape mismatch");
      const auto& xv = tape.value(x);
      for (std::size_t i = 0; i < xv.size(); ++i) {
        if (gy[i] != T{0}) gx[i] += gy[i] * df(xv[i]);
      }
    });
  }
  return out;
}

template <std::floating_point T>
Var matmul(BasicTape<T>& tape, Var a, Var b) {
  const auto& av = tape.value(a);
  const auto& bv = tape.value(b);
  if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(0))
    throw ConfigError("matmul: incompatible shapes " +
                      shape_to_string(av.shape()) + " x " +
                      shape_to_string(bv.shape()));
  const std::size_t m = av.dim(0), k = av.dim(1), n = bv.dim(1);
  BasicTensor<T> c({m, n});
  gemm<T>(av.data(), bv.data(), c.data(), m, k, n);
  const bool rg = tape.requires_grad(a) || tape.requires_grad(b);
  Var out = tape.push(std::move(c), rg);
  if (rg) {
    tape.record([&tape, a, b, out, m, k, n] {
      const auto* gcp = tape.grad_ptr(out);
      if (!gcp) return;
      const auto& gc = *gcp;
      if (tape.requires_grad(a))
        gemm_acc_a_bt(gc.data().data(), tape.value(b).data().data(),
                      tape.grad_buffer(a).data().data(), m, k, n);
      if (tape.requires_grad(b))
        gemm_acc_at_b(tape.value(a).data().data(), gc.data().data(),
                      tape.grad_buffer(b).data().data(), m, k, n);
    });
  }
  return out;
}

template <std::floating_point T>
Var unfold_patches(BasicTape<T>& tape, Var x, std::size_t k,
                   std::size_t stride, std::size_t pad) {
  const auto& xv = tape.value(x);
  if (xv.rank() != 3)
    throw ConfigError("unfold_patches: expected [H,W,C], got " +
                      shape_to_string(xv.shape()));
  const std::size_t H = xv.dim(0), W = xv.dim(1), C = xv.dim(2);
  const Extent2D o = output_shape(H, W, k, stride, pad);
  const std::size_t cols = k * k * C;
  BasicTensor<T> patches({o.height * o.width, cols});

  // Visits (row, col, source index) for every in-bounds patch element.
  auto for_each_tap = [=](auto&& body) {
    for (std::size_t ho = 0; ho < o.height; ++ho)
      for (std::size_t wo = 0; wo < o.width; ++wo) {
        const std::size_t row = ho * o.width + wo;
        for (std::size_t i = 0; i < k; ++i) {
          const std::ptrdiff_t y = static_cast<std::ptrdiff_t>(ho * stride + i) -
                                   static_cast<std::ptrdiff_t>(pad);
          if (y < 0 || y >= static_cast<std::ptrdiff_t>(H)) continue;
          for (std::size_t j = 0; j < k; ++j) {
            const std::ptrdiff_t xx =
                static_cast<std::ptrdiff_t>(wo * stride + j) -
                static_cast<std::ptrdiff_t>(pad);
            if (xx < 0 || xx >= static_cast<std::ptrdiff_t>(W)) continue;
            const std::size_t src = (static_cast<std::size_t>(y) * W +
                                     static_cast<std::size_t>(xx)) * C;
            const std::size_t dst = row * cols + (i * k + j) * C;
            for (std::size_t c = 0; c < C; ++c) body(dst + c, src + c);
          }
        }
      }
  };

  for_each_tap([&](std::size_t dst, std::size_t src) { patches[dst] = xv[src]; });
  Var out = tape.push(std::move(patches), tape.requires_grad(x));
  if (tape.requires_grad(x)) {
    tape.record([&tape, x, out, for_each_tap] {
      const auto* gpp = tape.grad_ptr(out);
      if (!gpp) return;
      const auto& gp = *gpp;
      auto& gx = tape.grad_buffer(x);
      for_each_tap([&](std::size_t dst, std::size_t src) { gx[src] += gp[dst]; });
    });
  }
  return out;
}

template <std::floating_point T>
Var add(BasicTape<T>& tape, Var a, Var b) {
  const auto& av = tape.value(a);
  const auto& bv = tape.value(b);
  require_same_shape(av, bv, "add");
  BasicTensor<T> c(av.shape());
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = av[i] + bv[i];
  const bool rg = tape.requires_grad(a) || tape.requires_grad(b);
  Var out = tape.push(std::move(c), rg);
  if (rg) {
    tape.record([&tape, a, b, out] {
      const auto* gcp = tape.grad_ptr(out);
      if (!gcp) return;
      const auto& gc = *gcp;
      for (Var v : {a, b}) {
        if (!tape.requires_grad(v)) continue;
        auto& g = tape.grad_buffer(v);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += gc[i];
      }
    });
  }
  return out;
}

template <std::floating_point T>
Var add_bias(BasicTape<T>& tape, Var x, Var b) {
  const auto& xv = tape.value(x);
  const auto& bv = tape.value(b);
  if (xv.rank() != 2 || bv.rank() != 1 || bv.dim(0) != xv.dim(1))
    throw ConfigError("add_bias: expected [rows, n] + [n], got " +
                      shape_to_string(xv.shape()) + " + " +
                      shape_to_string(bv.shape()));
  const std::size_t rows = xv.dim(0), n = xv.dim(1);
  BasicTensor<T> y(xv.shape());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < n; ++j) y[r * n + j] = xv[r * n + j] + bv[j];
  const bool rg = tape.requires_grad(x) || tape.requires_grad(b);
  Var out = tape.push(std::move(y), rg);
  if (rg) {
    tape.record([&tape, x, b, out, rows, n] {
      const auto* gyp = tape.grad_ptr(out);
      if (!gyp) return;
      const auto& gy = *gyp;
      if (tape.requires_grad(x)) {
        auto& gx = tape.grad_buffer(x);
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy[i];
      }
      if (tape.requires_grad(b)) {
        auto& gb = tape.grad_buffer(b);
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t j = 0; j < n; ++j) gb[j] += gy[r * n + j];
      }
    });
  }
  return out;
}

template <std::floating_point T>
Var scalar_mul(BasicTape<T>& tape, Var x, T c) {
  const auto& xv = tape.value(x);
  BasicTensor<T> y(xv.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = c * xv[i];
  Var out = tape.push(std::move(y), tape.requires_grad(x));
  if (tape.requires_grad(x)) {
    tape.record([&tape, x, out, c] {
      const auto* gyp = tape.grad_ptr(out);
      if (!gyp) return;
      const auto& gy = *gyp;
      auto& gx = tape.grad_buffer(x);
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += c * gy[i];
    });
  }
  return out;
}

template <std::floating_point T>
Var scale(BasicTape<T>& tape, Var x, Var s) {
  const auto& xv = tape.value(x);
  if (tape.value(s).size() != 1)
    throw ConfigError("scale: factor must hold a single element, got " +
                      shape_to_string(tape.value(s).shape()));
  const T sv = tape.value(s)[0];
  BasicTensor<T> y(xv.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = sv * xv[i];
  const bool rg = tape.requires_grad(x) || tape.requires_grad(s);
  Var out = tape.push(std::move(y), rg);
  if (rg) {
    tape.record([&tape, x, s, out] {
      const auto* gyp = tape.grad_ptr(out);
      if (!gyp) return;
      const auto& gy = *gyp;
      const auto& xv = tape.value(x);
      const T sv = tape.value(s)[0];
      if (tape.requires_grad(x)) {
        auto& gx = tape.grad_buffer(x);
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += sv * gy[i];
      }
      if (tape.requires_grad(s)) {
        T acc{0};
        for (std::size_t i = 0; i < xv.size(); ++i) acc += xv[i] * gy[i];
        tape.grad_buffer(s)[0] += acc;
      }
    });
  }
  return out;
}

template <std::floating_point T>
Var reduce_sum(BasicTape<T>& tape, Var x) {
  const auto& xv = tape.value(x);
  T acc{0};
  for (std::size_t i = 0; i < xv.size(); ++i) acc += xv[i];
  Var out = tape.push(BasicTensor<T>({1}, acc), tape.requires_grad(x));
  if (tape.requires_grad(x)) {
    tape.record([&tape, x, out] {
      const auto* gp = tape.grad_ptr(out);
      if (!gp) return;
      const T g = (*gp)[0];
      auto& gx = tape.grad_buffer(x);
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g;
    });
  }
  return out;
}

template <std::floating_point T>
Var clamp(BasicTape<T>& tape, Var x, T lo, T hi) {
  if (!(lo <= hi)) throw ConfigError("clamp: lo > hi");
  const auto& xv = tape.value(x);
  BasicTensor<T> y(xv.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::clamp(xv[i], lo, hi);
  Var out = tape.push(std::move(y), tape.requires_grad(x));
  if (tape.requires_grad(x)) {
    tape.record([&tape, x, out, lo, hi] {
      const auto* gyp = tape.grad_ptr(out);
      if (!gyp) return;
      const auto& gy = *gyp;
      const auto& xv = tape.value(x);
      auto& gx = tape.grad_buffer(x);
      for (std::size_t i = 0; i < gx.size(); ++i)
        if (xv[i] >= lo && xv[i] <= hi) gx[i] += gy[i];
    });
  }
  return out;
}

template <std::floating_point T>
Var reshape(BasicTape<T>& tape, Var x, Shape shape) {
  const auto& xv = tape.value(x);
  if (shape_size(shape) != xv.size())
    throw ConfigError("reshape: cannot view " + shape_to_string(xv.shape()) +
                      " as " + shape_to_string(shape));
  Var out = tape.push(xv.reshaped(std::move(shape)), tape.requires_grad(x));
  if (tape.requires_grad(x)) {
    tape.record([&tape, x, out] {
      const auto* gyp = tape.grad_ptr(out);
      if (!gyp) return;
      const auto& gy = *gyp;
      auto& gx = tape.grad_buffer(x);
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy[i];
    });
  }
  return out;
}

template <std::floating_point T>
Var maxpool2x2(BasicTape<T>& tape, Var x) {
  const auto& xv = tape.value(x);
  if (xv.rank() != 3)
    throw ConfigError("maxpool2x2: expected [H,W,C], got " +
                      shape_to_string(xv.shape()));
  const std::size_t W = xv.dim(1), C = xv.dim(2);
  const Extent2D o = pool_output_shape(xv.dim(0), W);
  BasicTensor<T> y({o.height, o.width, C});
  std::vector<std::size_t> argmax(y.size());
  for (std::size_t h = 0; h < o.height; ++h)
    for (std::size_t w = 0; w < o.width; ++w)
      for (std::size_t c = 0; c < C; ++c) {
        std::size_t best = ((2 * h) * W + 2 * w) * C + c;
        for (std::size_t dy = 0; dy < 2; ++dy)
          for (std::size_t dx = 0; dx < 2; ++dx) {
            const std::size_t idx = ((2 * h + dy) * W + 2 * w + dx) * C + c;
            if (xv[idx] > xv[best]) best = idx;
          }
        const std::size_t out_idx = (h * o.width + w) * C + c;
        y[out_idx] = xv[best];
        argmax[out_idx] = best;
      }
  Var out = tape.push(std::move(y), tape.requires_grad(x));
  if (tape.requires_grad(x)) {
    tape.record([&tape, x, out, argmax = std::move(argmax)] {
      const auto* gyp = tape.grad_ptr(out);
      if (!gyp) return;
      const auto& gy = *gyp;
      auto& gx = tape.grad_buffer(x);
      for (std::size_t i = 0; i < argmax.size(); ++i) gx[argmax[i]] += gy[i];
    });
  }
  return out;
}

template <std::floating_point T>
Var softmax_cross_entropy(BasicTape<T>& tape, Var logits, std::size_t label) {
  const auto& z = tape.value(logits);
  if (z.rank() != 1)
    throw ConfigError("softmax_cross_entropy: expected 1-D logits, got " +
                      shape_to_string(z.shape()));
  if (label >= z.size())
    throw DomainError("softmax_cross_entropy: label " + std::to_string(label) +
                      " outside [0, " + std::to_string(z.size()) + ")");
  const T zmax = *std::max_element(z.data().begin(), z.data().end());
  std::vector<T> prob(z.size());
  T denom{0};
  for (std::size_t i = 0; i < z.size(); ++i) {
    prob[i] = std::exp(z[i] - zmax);
    denom += prob[i];
  }
  for (auto& p : prob) p /= denom;
  const T loss = std::log(denom) - (z[label] - zmax);
  Var out = tape.push(BasicTensor<T>({1}, loss), tape.requires_grad(logits));
  if (tape.requires_grad(logits)) {
    tape.record([&tape, logits, out, label, prob = std::move(prob)] {
      const auto* gp = tape.grad_ptr(out);
      if (!gp) return;
      const T g = (*gp)[0];
      auto& gz = tape.grad_buffer(logits);
      for (std::size_t i = 0; i < prob.size(); ++i)
        gz[i] += g * (prob[i] - (i == label ? T{1} : T{0}));
    });
  }
  return out;
}

template <std::floating_point T>
BasicTensor<T> finite_difference_grad(
    const std::function<T(const BasicTensor<T>&)>& f, const BasicTensor<T>& x,
    T h) {
  if (!(h > 0)) throw DomainError("finite_difference_grad: h must be > 0");
  BasicTensor<T> g(x.shape());
  BasicTensor<T> probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    const T up = f(probe);
    probe[i] = x[i] - h;
    const T down = f(probe);
    probe[i] = x[i];
    g[i] = (up - down) / (T{2} * h);
  }
  return g;
}

// ---- instantiations -------------------------------------------------------

#define RFSNN_INSTANTIATE(T)                                                   \
  template class BasicTape<T>;                                                 \
  template void gemm<T>(std::span<const T>, std::span<const T>, std::span<T>, \
                        std::size_t, std::size_t, std::size_t);               \
  template Var elementwise_map<T>(BasicTape<T>&, Var, const ScalarMap<T>&);   \
  template Var matmul<T>(BasicTape<T>&, Var, Var);                             \
  template Var unfold_patches<T>(BasicTape<T>&, Var, std::size_t,             \
                                 std::size_t, std::size_t);                   \
  template Var add<T>(BasicTape<T>&, Var, Var);                                \
  template Var add_bias<T>(BasicTape<T>&, Var, Var);                           \
  template Var scalar_mul<T>(BasicTape<T>&, Var, T);                           \
  template Var scale<T>(BasicTape<T>&, Var, Var);                              \
  template Var reduce_sum<T>(BasicTape<T>&, Var);                              \
  template Var clamp<T>(BasicTape<T>&, Var, T, T);                             \
  template Var reshape<T>(BasicTape<T>&, Var, Shape);                          \
  template Var maxpool2x2<T>(BasicTape<T>&, Var);                              \
  template Var softmax_cross_entropy<T>(BasicTape<T>&, Var, std::size_t);      \
  template BasicTensor<T> finite_difference_grad<T>(                           \
      const std::function<T(const BasicTensor<T>&)>&, const BasicTensor<T>&, T);

RFSNN_INSTANTIATE(float)
RFSNN_INSTANTIATE(double)

#undef RFSNN_INSTANTIATE

}  // namespace rfsnn

#pragma once

// Reverse-mode differentiation over a linear tape.
//
// A BasicTape records each differentiable op in execution order together
// with a closure that propagates output gradients to its inputs. backward()
// replays the closures in reverse. Gradients accumulate additively. A tape
// is single-threaded; parallel lanes each own one.

#include <concepts>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "rfsnn/tensor.hpp"

namespace rfsnn {

/// Trainable tensor with a gradient accumulator of the same shape.
template <std::floating_point T>
struct BasicParameter {
  std::string name;
  BasicTensor<T> value;
  BasicTensor<T> grad;

  BasicParameter() = default;
  BasicParameter(std::string n, BasicTensor<T> v)
      : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}

  void zero_grad() { grad.fill(T{0}); }
};

using Parameter = BasicParameter<float>;
using Parameter64 = BasicParameter<double>;

/// Handle to a value recorded on a tape.
struct Var {
  std::size_t id = static_cast<std::size_t>(-1);
};

/// Scalar function with its derivative, applied elementwise.
template <std::floating_point T>
struct ScalarMap {
  std::function<T(T)> f;
  std::function<T(T)> df;
};

template <std::floating_point T>
class BasicTape {
 public:
  using TensorT = BasicTensor<T>;

  BasicTape() = default;
  BasicTape(const BasicTape&) = delete;
  BasicTape& operator=(const BasicTape&) = delete;

  /// Leaf that receives no gradient.
  Var constant(TensorT value);
  /// Leaf whose gradient is kept and can be read with grad().
  Var variable(TensorT value);
  /// Leaf bound to a parameter; see accumulate_parameter_grads().
  Var parameter(BasicParameter<T>& p);

  /// Valid until the next node is recorded.
  const TensorT& value(Var v) const { return nodes_.at(v.id).value; }
  /// Gradient of the last backward() target w.r.t. v; zeros if unreached.
  TensorT grad(Var v) const;
  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }

  /// Seeds d(out)/d(out) = 1; `out` must hold a single element.
  void backward(Var out);
  void backward(Var out, const TensorT& seed);

  /// Adds gradients of every bound parameter into BasicParameter::grad.
  void accumulate_parameter_grads() const;

  std::size_t size() const noexcept { return nodes_.size(); }

  // Used by op implementations.
  Var push(TensorT value, bool requires_grad);
  TensorT& grad_buffer(Var v);
  /// Null while no gradient has reached v.
  const TensorT* grad_ptr(Var v) const {
    const Node& n = nodes_.at(v.id);
    return n.grad.size() ? &n.grad : nullptr;
  }
  void record(std::function<void()> backward_fn);

 private:
  struct Node {
    TensorT value;
    TensorT grad;  // allocated lazily
    BasicParameter<T>* param = nullptr;
    bool requires_grad = false;
  };

  std::vector<Node> nodes_;
  std::vector<std::function<void()>> ops_;
};

using Tape = BasicTape<float>;
using Tape64 = BasicTape<double>;

// ---- ops -----------------------------------------------------------------
// Shapes are explicit; the only implicit expansion is scalar * tensor.

/// y_i = f(x_i), dx_i = dy_i * f'(x_i).
template <std::floating_point T>
Var elementwise_map(BasicTape<T>& tape, Var x, const ScalarMap<T>& fn);

/// [m,k] x [k,n] -> [m,n].
template <std::floating_point T>
Var matmul(BasicTape<T>& tape, Var a, Var b);

/// Patch matrix of an [H,W,C] tensor: row h_out*W_out + w_out holds the
/// k*k*C window in column order (i, j, c) with c fastest; positions outside
/// the image read as zero.
template <std::floating_point T>
Var unfold_patches(BasicTape<T>& tape, Var x, std::size_t k,
                   std::size_t stride, std::size_t pad);

template <std::floating_point T>
Var add(BasicTape<T>& tape, Var a, Var b);

/// x[rows, n] + b[n] per row.
template <std::floating_point T>
Var add_bias(BasicTape<T>& tape, Var x, Var b);

/// c * x for a constant c.
template <std::floating_point T>
Var scalar_mul(BasicTape<T>& tape, Var x, T c);

/// s * x for a single-element tape value s.
template <std::floating_point T>
Var scale(BasicTape<T>& tape, Var x, Var s);

template <std::floating_point T>
Var reduce_sum(BasicTape<T>& tape, Var x);

/// min(max(x, lo), hi); zero gradient outside [lo, hi].
template <std::floating_point T>
Var clamp(BasicTape<T>& tape, Var x, T lo, T hi);

template <std::floating_point T>
Var reshape(BasicTape<T>& tape, Var x, Shape shape);

/// 2x2 stride-2 max over [H,W,C] -> [H/2, W/2, C] (floor). Ties go to the
/// first element in row-major window order.
template <std::floating_point T>
Var maxpool2x2(BasicTape<T>& tape, Var x);

/// -log softmax(logits)[label] for a 1-D logit vector.
template <std::floating_point T>
Var softmax_cross_entropy(BasicTape<T>& tape, Var logits, std::size_t label);

// ---- plain kernels shared by ops and oracles ----------------------------

/// c[m,n] = a[m,k] * b[k,n] into a preallocated c.
template <std::floating_point T>
void gemm(std::span<const T> a, std::span<const T> b, std::span<T> c,
          std::size_t m, std::size_t k, std::size_t n);

/// Central finite-difference gradient of a scalar function.
template <std::floating_point T>
BasicTensor<T> finite_difference_grad(
    const std::function<T(const BasicTensor<T>&)>& f, const BasicTensor<T>& x,
    T h);

}  // namespace rfsnn

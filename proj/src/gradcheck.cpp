#include "rfsnn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "rfsnn/network.hpp"
#include "rfsnn/rng.hpp"

namespace rfsnn {

namespace {

using T64 = BasicTensor<double>;
constexpr double kStep = 1e-6;

struct Accumulator {
  GradCheckResult r;

  Accumulator(std::string name, double tol) {
    r.name = std::move(name);
    r.tolerance = tol;
  }

  // Compares whole tensors; the floor keeps near-zero entries of a tensor
  // from dominating through cancellation noise.
  void compare(std::span<const double> analytic, std::span<const double> numeric) {
    double scale = 0.0;
    for (double a : analytic) scale = std::max(scale, std::abs(a));
    const double floor = std::max(1e-3 * scale, 1e-12);
    for (std::size_t i = 0; i < analytic.size(); ++i) {
      r.max_rel_error =
          std::max(r.max_rel_error, relative_error(analytic[i], numeric[i], floor));
      ++r.checked;
    }
  }

  GradCheckResult finish() {
    r.passed = r.checked > 0 && r.max_rel_error <= r.tolerance;
    return r;
  }
};

T64 random_tensor(Rng& rng, Shape shape, double lo, double hi) {
  T64 t(std::move(shape));
  for (auto& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

double dot(const T64& a, const T64& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Scalar maps: 100 random points each, kept away from the clamp kinks.
GradCheckResult check_scalar_map(const std::string& name, Rng& rng, double lo,
                                 double hi, const std::function<double(double)>& f,
                                 const std::function<double(double)>& df,
                                 const std::vector<double>& kinks, double tol) {
  std::vector<double> a, n;
  while (a.size() < 100) {
    const double x = rng.uniform(lo, hi);
    if (std::any_of(kinks.begin(), kinks.end(),
                    [&](double k) { return std::abs(x - k) < 1e-3; }))
      continue;
    a.push_back(df(x));
    n.push_back((f(x + kStep) - f(x - kStep)) / (2 * kStep));
  }
  Accumulator acc(name, tol);
  acc.compare(a, n);
  return acc.finish();
}

// Checks d(sum(out * probe))/d(leaf) for each leaf tensor. `build` records
// the op under test on a fresh tape from the given leaves.
GradCheckResult check_op(const std::string& name, std::vector<T64*> leaves,
                         const std::function<Var(Tape64&, std::vector<Var>&)>& build,
                         Rng& rng, double tol) {
  T64 probe;
  auto loss = [&](bool with_grad, std::vector<T64>* grads) {
    Tape64 tape;
    std::vector<Var> vars;
    for (auto* l : leaves) vars.push_back(tape.variable(*l));
    Var out = build(tape, vars);
    if (probe.size() == 0) probe = random_tensor(rng, tape.value(out).shape(), -1, 1);
    const double value = dot(tape.value(out), probe);
    if (with_grad) {
      tape.backward(out, probe);
      for (Var v : vars) grads->push_back(tape.grad(v));
    }
    return value;
  };

  std::vector<T64> analytic;
  loss(true, &analytic);
  Accumulator acc(name, tol);
  for (std::size_t li = 0; li < leaves.size(); ++li) {
    T64& x = *leaves[li];
    T64 numeric(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double saved = x[i];
      x[i] = saved + kStep;
      const double up = loss(false, nullptr);
      x[i] = saved - kStep;
      const double down = loss(false, nullptr);
      x[i] = saved;
      numeric[i] = (up - down) / (2 * kStep);
    }
    acc.compare(analytic[li].data(), numeric.data());
  }
  return acc.finish();
}

void randomize(Rng& rng, Parameter64& zeta, Parameter64& bias, Parameter64& gain,
               Shape zeta_shape, std::size_t n_out) {
  zeta = Parameter64("zeta", random_tensor(rng, std::move(zeta_shape), -0.05, 0.05));
  bias = Parameter64("bias", random_tensor(rng, {n_out}, -5, 5));
  gain = Parameter64("gain", T64({1}, rng.uniform(0.5, 1.5)));
}

// Region of every oscillator input and the argmax of every pooling window;
// a finite-difference stencil is only valid when this does not change.
std::vector<std::uint32_t> activation_pattern(Network<double>& net,
                                              const T64& image) {
  Tape64 tape;
  std::vector<Var> outs;
  Var in = tape.constant(image);
  net.forward(tape, in, false, &outs);
  std::vector<std::uint32_t> pattern;
  for (std::size_t li = 0; li < net.layers().size(); ++li) {
    const T64& x = tape.value(li == 0 ? in : outs[li - 1]);
    if (auto* act = std::get_if<OscillatorActivation<double>>(&net.layers()[li])) {
      const double g = act->neuron == NeuronModel::Oscillator ? act->i_gain.value[0] : 1.0;
      const double lo = act->neuron == NeuronModel::Oscillator ? act->device.I_th : 0.0;
      const double hi = act->neuron == NeuronModel::Oscillator ? act->device.I_max
                                                               : INFINITY;
      for (double u : x.data()) {
        const double i = g * u;
        pattern.push_back(i <= lo ? 0u : i >= hi ? 2u : 1u);
      }
    } else if (std::holds_alternative<MaxPoolLayer>(net.layers()[li])) {
      const std::size_t H = x.dim(0), W = x.dim(1), C = x.dim(2);
      for (std::size_t h = 0; h + 1 < H; h += 2)
        for (std::size_t w = 0; w + 1 < W; w += 2)
          for (std::size_t c = 0; c < C; ++c) {
            std::uint32_t best = 0;
            double v = x.at(h, w, c);
            const double cand[3] = {x.at(h, w + 1, c), x.at(h + 1, w, c),
                                    x.at(h + 1, w + 1, c)};
            for (std::uint32_t q = 0; q < 3; ++q)
              if (cand[q] > v) v = cand[q], best = q + 1;
            pattern.push_back(best);
          }
    }
  }
  return pattern;
}

GradCheckResult check_network(std::uint64_t seed, double tol) {
  NetworkConfig cfg = NetworkConfig::scaled(4, 8);
  cfg.seed = seed;
  cfg.float_width = 64;
  Network<double> net(cfg);
  Rng rng(derive_seed(seed, "gradcheck:images"));
  std::vector<T64> images;
  for (int s = 0; s < 2; ++s) images.push_back(random_tensor(rng, {28, 28, 1}, 0, 1));
  const std::size_t labels[2] = {3, 7};
  net.calibrate(images);

  auto mean_loss = [&](bool with_grad) {
    Tape64 tape;
    Var total{};
    for (std::size_t s = 0; s < images.size(); ++s) {
      Var logits = net.forward(tape, tape.constant(images[s]), with_grad);
      Var l = softmax_cross_entropy(tape, logits, labels[s]);
      total = s == 0 ? l : add(tape, total, l);
    }
    Var mean = scalar_mul(tape, total, 1.0 / static_cast<double>(images.size()));
    if (with_grad) {
      tape.backward(mean);
      tape.accumulate_parameter_grads();
    }
    return tape.value(mean)[0];
  };
  auto patterns = [&] {
    std::vector<std::vector<std::uint32_t>> p;
    for (const auto& img : images) p.push_back(activation_pattern(net, img));
    return p;
  };

  net.zero_grad();
  mean_loss(true);
  const auto base = patterns();
  Accumulator acc("network (4/8 filters, 2 samples)", tol);
  for (auto* p : net.parameters()) {
    std::vector<double> a, n;
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double saved = p->value[i];
      p->value[i] = saved + kStep;
      const double up = mean_loss(false);
      const bool up_ok = patterns() == base;
      p->value[i] = saved - kStep;
      const double down = mean_loss(false);
      const bool down_ok = patterns() == base;
      p->value[i] = saved;
      if (!up_ok || !down_ok) {
        ++acc.r.skipped;
        continue;
      }
      a.push_back(p->grad[i]);
      n.push_back((up - down) / (2 * kStep));
    }
    acc.compare(a, n);
  }
  return acc.finish();
}

}  // namespace

double relative_error(double analytic, double numeric, double floor) {
  const double diff = std::abs(analytic - numeric);
  if (diff == 0.0) return 0.0;
  return diff / std::max({std::abs(analytic), std::abs(numeric), floor});
}

std::vector<GradCheckResult> run_gradient_suite(const GradCheckOptions& opts) {
  const double tol = opts.tolerance;
  const DeviceParams dev;
  Rng rng(derive_seed(opts.seed, "gradcheck"));
  std::vector<GradCheckResult> out;

  out.push_back(check_scalar_map(
      "oscillator power p(I)", rng, 0.0, 10.0,
      [&](double i) { return oscillator_power(i, dev); },
      [&](double i) { return oscillator_power_grad(i, dev); }, {dev.I_th, dev.I_max},
      tol));

  const double fault = opts.inject_fault ? 1.001 : 1.0;
  out.push_back(check_scalar_map(
      "resonator weight W(zeta)", rng, -0.2, 0.2,
      [&](double z) { return synaptic_weight_zeta(z, dev); },
      [&](double z) { return fault * synaptic_weight_zeta_grad(z, dev); }, {}, tol));

  {
    RFConv2DLayer<double> layer;
    layer.padding = 1;
    auto& f0 = layer.filter;
    randomize(rng, f0.zeta, f0.bias, f0.gain, {3, 3, 2, 3}, 3);
    T64 x = random_tensor(rng, {5, 5, 2}, 0, 1);
    out.push_back(check_op(
        "rf_conv", {&x, &layer.filter.zeta.value, &layer.filter.bias.value,
                    &layer.filter.gain.value},
        [&](Tape64& tape, std::vector<Var>& v) {
          // Rebuild the layer around the tape leaves.
          const auto& f = layer.filter;
          Var w = elementwise_map(tape, v[1], weight_map<double>(dev, layer.synapse));
          Var cols = unfold_patches(tape, v[0], f.kernel(), layer.stride, layer.padding);
          Var flat = reshape(tape, w, {f.kernel() * f.kernel() * f.channels(), f.filters()});
          Var u = scale(tape, add_bias(tape, matmul(tape, cols, flat), v[2]), v[3]);
          return u;
        },
        rng, tol));
    // Same layer through the public forward with bound parameters.
    Tape64 tape;
    layer.filter.zeta.zero_grad();
    Var in = tape.variable(x);
    Var u = rf_conv_forward(tape, in, layer, true);
    T64 probe = random_tensor(rng, tape.value(u).shape(), -1, 1);
    tape.backward(u, probe);
    tape.accumulate_parameter_grads();
    T64 num(layer.filter.zeta.value.shape());
    for (std::size_t i = 0; i < num.size(); ++i) {
      const double saved = layer.filter.zeta.value[i];
      layer.filter.zeta.value[i] = saved + kStep;
      const double up = dot(rf_conv_forward(x, layer), probe);
      layer.filter.zeta.value[i] = saved - kStep;
      const double down = dot(rf_conv_forward(x, layer), probe);
      layer.filter.zeta.value[i] = saved;
      num[i] = (up - down) / (2 * kStep);
    }
    Accumulator acc("rf_conv_forward (bound parameters)", tol);
    acc.compare(layer.filter.zeta.grad.data(), num.data());
    out.push_back(acc.finish());
  }

  {
    RFDenseLayer<double> layer;
    randomize(rng, layer.zeta, layer.bias, layer.gain, {6, 4}, 4);
    T64 x = random_tensor(rng, {6}, 0, 1);
    std::vector<T64*> leaves{&x, &layer.zeta.value, &layer.bias.value, &layer.gain.value};
    out.push_back(check_op(
        "rf_dense", leaves,
        [&](Tape64& tape, std::vector<Var>& v) {
          Var w = elementwise_map(tape, v[1], weight_map<double>(dev, layer.synapse));
          Var row = reshape(tape, v[0], {1, 6});
          Var y = scale(tape, add_bias(tape, matmul(tape, row, w), v[2]), v[3]);
          return reshape(tape, y, {4});
        },
        rng, tol));
  }

  {
    // Distinct values spaced well beyond the step keep every argmax stable.
    T64 x({5, 5, 2});
    std::vector<double> vals(x.size());
    for (std::size_t i = 0; i < vals.size(); ++i) vals[i] = 0.01 * static_cast<double>(i);
    shuffle(std::span<double>(vals), rng);
    std::copy(vals.begin(), vals.end(), x.data().begin());
    out.push_back(check_op(
        "maxpool2x2", {&x},
        [](Tape64& tape, std::vector<Var>& v) { return maxpool2x2(tape, v[0]); }, rng,
        tol));
  }

  {
    T64 logits = random_tensor(rng, {10}, -3, 3);
    out.push_back(check_op(
        "softmax_cross_entropy", {&logits},
        [](Tape64& tape, std::vector<Var>& v) {
          return softmax_cross_entropy(tape, v[0], std::size_t{4});
        },
        rng, tol));
  }

  {
    OscillatorActivation<double> act;
    act.i_gain = Parameter64("i_gain", T64({1}, 0.9));
    // Currents between the kinks, with margin, for both leaves.
    T64 u({12});
    for (auto& v : u.data()) v = rng.uniform(2.5, 8.4);
    T64 g({1}, 0.9);
    out.push_back(check_op(
        "oscillator layer", {&u, &g},
        [&](Tape64& tape, std::vector<Var>& v) {
          Var i = scale(tape, v[0], v[1]);
          return elementwise_map(tape, i, oscillator_map<double>(dev));
        },
        rng, tol));
  }

  out.push_back(check_network(opts.seed, tol * opts.composite_factor));
  return out;
}

}  // namespace rfsnn

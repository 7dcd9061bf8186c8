#pragma once

// Closed-form models of the spin-torque nano-oscillator (neuron) and the
// spin-diode resonator (synapse), with analytic derivatives.
//
// Units throughout: GHz for frequencies, uW for RF power, uV for rectified
// voltage, mA for direct current.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <string>

#include "rfsnn/errors.hpp"

namespace rfsnn {

struct DeviceParams {
  double alpha = 0.01;  ///< magnetic damping
  double amp_A = 1.0;   ///< rectification scale, uV/uW
  double Q = 2.0;       ///< nonlinear damping coefficient
  double I_th = 2.0;    ///< oscillation threshold, mA
  double I_max = 8.0;   ///< input current clamp, mA

  /// Throws ConfigError naming the first violated invariant.
  void validate() const {
    if (!(alpha > 0)) throw ConfigError("device: alpha must be > 0");
    if (!(amp_A > 0)) throw ConfigError("device: amp_A must be > 0");
    if (!(Q > 0)) throw ConfigError("device: Q must be > 0");
    if (!(I_th > 0 && I_th < I_max))
      throw ConfigError("device: require 0 < I_th < I_max");
  }

  friend bool operator==(const DeviceParams&, const DeviceParams&) = default;
};

namespace detail {
template <std::floating_point T>
void require_finite(T x, const char* what) {
  if (!std::isfinite(x))
    throw DomainError(std::string(what) + ": non-finite argument");
}
}  // namespace detail

/// Normalized oscillation power p in [0, 1). Zero at or below threshold
/// (negative currents included); the current is clamped to I_max.
template <std::floating_point T>
T oscillator_power(T i_dc, const DeviceParams& p) {
  detail::require_finite(i_dc, "oscillator_power");
  const T i_th = static_cast<T>(p.I_th);
  if (i_dc <= i_th) return T{0};
  const T r = std::min(i_dc, static_cast<T>(p.I_max)) / i_th;
  return (r - T{1}) / (r + static_cast<T>(p.Q));
}

/// d oscillator_power / d I_dc in 1/mA. Zero outside the open interval
/// (I_th, I_max), including the clamped region.
template <std::floating_point T>
T oscillator_power_grad(T i_dc, const DeviceParams& p) {
  detail::require_finite(i_dc, "oscillator_power_grad");
  const T i_th = static_cast<T>(p.I_th);
  if (i_dc <= i_th || i_dc >= static_cast<T>(p.I_max)) return T{0};
  const T r = i_dc / i_th;
  const T q = static_cast<T>(p.Q);
  return (q + T{1}) / ((r + q) * (r + q) * i_th);
}

/// Spin-diode DC voltage (anti-Lorentzian part only) for an RF input of
/// power `p_rf` at `f_rf` on a resonator tuned to `f_res`.
template <std::floating_point T>
T rectified_voltage(T p_rf, T f_rf, T f_res, const DeviceParams& p) {
  detail::require_finite(p_rf, "rectified_voltage");
  detail::require_finite(f_rf, "rectified_voltage");
  detail::require_finite(f_res, "rectified_voltage");
  if (p_rf < 0) throw DomainError("rectified_voltage: negative RF power");
  if (f_rf <= 0) throw DomainError("rectified_voltage: f_rf must be > 0");
  if (f_res <= 0) throw DomainError("rectified_voltage: f_res must be > 0");
  const T a = static_cast<T>(p.alpha);
  const T detune = f_rf - f_res;
  return p_rf * f_rf * detune / (a * a * f_res * f_res + detune * detune) *
         static_cast<T>(p.amp_A);
}

/// Synaptic weight W such that V = W * P_rf.
template <std::floating_point T>
T synaptic_weight_freq(T f_rf, T f_res, const DeviceParams& p) {
  return rectified_voltage(T{1}, f_rf, f_res, p);
}

/// Weight as a function of the detuning parameter zeta alone, with
/// f_res = f_rf * (1 - zeta). No carrier frequency appears.
template <std::floating_point T>
T synaptic_weight_zeta(T zeta, const DeviceParams& p) {
  detail::require_finite(zeta, "synaptic_weight_zeta");
  const T a = static_cast<T>(p.alpha);
  const T one_minus = T{1} - zeta;
  return static_cast<T>(p.amp_A) * zeta /
         (a * a * one_minus * one_minus + zeta * zeta);
}

template <std::floating_point T>
T synaptic_weight_zeta_grad(T zeta, const DeviceParams& p) {
  detail::require_finite(zeta, "synaptic_weight_zeta_grad");
  const T a2 = static_cast<T>(p.alpha * p.alpha);
  const T one_minus = T{1} - zeta;
  const T den = a2 * one_minus * one_minus + zeta * zeta;
  return static_cast<T>(p.amp_A) * (a2 * (T{1} - zeta * zeta) - zeta * zeta) /
         (den * den);
}

template <std::floating_point T>
T zeta_to_fres(T zeta, T f_rf) {
  detail::require_finite(zeta, "zeta_to_fres");
  if (!(f_rf > 0)) throw DomainError("zeta_to_fres: f_rf must be > 0");
  if (zeta >= T{1})
    throw DomainError("zeta_to_fres: zeta >= 1 gives a non-positive f_res");
  return f_rf * (T{1} - zeta);
}

template <std::floating_point T>
T fres_to_zeta(T f_res, T f_rf) {
  detail::require_finite(f_res, "fres_to_zeta");
  if (!(f_rf > 0)) throw DomainError("fres_to_zeta: f_rf must be > 0");
  return T{1} - f_res / f_rf;
}

}  // namespace rfsnn

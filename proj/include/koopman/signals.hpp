#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "koopman/numerics.hpp"

namespace koopman::signals {

enum class SignalKind { gaussian_mixture, random_steps, constant };

std::string to_string(SignalKind kind);
SignalKind signal_kind_from_string(const std::string& name);

struct SignalSpec {
  SignalKind kind = SignalKind::gaussian_mixture;
  double duration = 540.0;  // s
  double sample_dt = 0.02;  // s
  double u_min = 0.3;
  double u_max = 0.85;
  int channel_count = 3;
  std::uint64_t seed = 0;
  int n_gaussians = 150;
  double hold_min = 1.0;  // s
  double hold_max = 4.0;  // s
  /// Level for `constant`; the midpoint of the bounds when unset.
  std::optional<double> level;

  /// Number of samples, t_k = k * sample_dt for k < sample_count().
  Eigen::Index sample_count() const;
};

void validate(const SignalSpec& spec);

/// Sum of seeded Gaussian bumps per channel, rescaled onto [u_min, u_max].
RealMatrix gaussian_signal(const SignalSpec& spec);

/// Piecewise-constant random heights with random hold times per channel.
RealMatrix step_signal(const SignalSpec& spec);

RealMatrix constant_signal(const SignalSpec& spec);

/// Dispatches on spec.kind. Result is channel_count x sample_count().
RealMatrix generate(const SignalSpec& spec);

/// Exhaust valve command, 1 - u elementwise.
RealMatrix exhaust_of(const RealMatrix& u);

}  // namespace koopman::signals

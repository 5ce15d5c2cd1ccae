#include "koopman/signals.hpp"

#include <algorithm>
#include <cmath>

#include "koopman/errors.hpp"
#include "koopman/rng.hpp"

namespace koopman::signals {

std::string to_string(SignalKind kind) {
  switch (kind) {
    case SignalKind::gaussian_mixture: return "gaussian_mixture";
    case SignalKind::random_steps: return "random_steps";
    case SignalKind::constant: return "constant";
  }
  return "unknown";
}

SignalKind signal_kind_from_string(const std::string& name) {
  if (name == "gaussian_mixture") return SignalKind::gaussian_mixture;
  if (name == "random_steps") return SignalKind::random_steps;
  if (name == "constant") return SignalKind::constant;
  throw InvalidSpec("unknown signal kind '" + name + "'");
}

Eigen::Index SignalSpec::sample_count() const {
  const auto n = static_cast<Eigen::Index>(std::floor(duration / sample_dt + 1e-9));
  return std::max<Eigen::Index>(1, n);
}

void validate(const SignalSpec& spec) {
  if (!(spec.u_min < spec.u_max)) throw InvalidSpec("signal bounds need u_min < u_max");
  if (!(spec.duration >= 0)) throw InvalidSpec("signal duration must be non-negative");
  if (!(spec.sample_dt > 0)) throw InvalidSpec("signal sample_dt must be positive");
  if (spec.channel_count < 1) throw InvalidSpec("signal needs at least one channel");
  if (spec.n_gaussians < 0) throw InvalidSpec("n_gaussians must be non-negative");
  if (spec.kind == SignalKind::random_steps &&
      !(spec.hold_min > 0 && spec.hold_min <= spec.hold_max)) {
    throw InvalidSpec("hold range needs 0 < min <= max");
  }
}

RealMatrix gaussian_signal(const SignalSpec& spec) {
  validate(spec);
  const Eigen::Index n = spec.sample_count();
  const double mid = 0.5 * (spec.u_min + spec.u_max);
  RealMatrix out(spec.channel_count, n);
  if (spec.duration == 0.0) return out.setConstant(mid);
  Xoshiro256 rng(spec.seed);

  for (int c = 0; c < spec.channel_count; ++c) {
    RealVector s = RealVector::Zero(n);
    for (int g = 0; g < spec.n_gaussians; ++g) {
      const double amp = rng.uniform(-1.0, 1.0);
      const double center = rng.uniform(0.0, spec.duration);
      const double width = rng.uniform(spec.duration / 200.0, spec.duration / 20.0);
      for (Eigen::Index k = 0; k < n; ++k) {
        const double t = static_cast<double>(k) * spec.sample_dt;
        const double r = (t - center) / width;
        s(k) += amp * std::exp(-0.5 * r * r);
      }
    }
    const double lo = s.minCoeff();
    const double hi = s.maxCoeff();
    if (!(hi > lo)) {
      out.row(c).setConstant(mid);
      continue;
    }
    const double scale = (spec.u_max - spec.u_min) / (hi - lo);
    for (Eigen::Index k = 0; k < n; ++k) {
      const double v = spec.u_min + (s(k) - lo) * scale;
      out(c, k) = std::clamp(v, spec.u_min, spec.u_max);
    }
  }
  return out;
}

RealMatrix step_signal(const SignalSpec& spec) {
  validate(spec);
  if (!(spec.hold_min > 0 && spec.hold_min <= spec.hold_max)) {
    throw InvalidSpec("hold range needs 0 < min <= max");
  }
  const Eigen::Index n = spec.sample_count();
  RealMatrix out(spec.channel_count, n);
  Xoshiro256 rng(spec.seed);

  for (int c = 0; c < spec.channel_count; ++c) {
    Eigen::Index k = 0;
    double t_end = 0.0;
    while (k < n) {
      t_end += rng.uniform(spec.hold_min, spec.hold_max);
      const double height = rng.uniform(spec.u_min, spec.u_max);
      // Sample k is covered while its time stamp lies before the hold ends.
      do {
        out(c, k) = height;
        ++k;
      } while (k < n && static_cast<double>(k) * spec.sample_dt < t_end - 1e-9);
    }
  }
  return out;
}

RealMatrix constant_signal(const SignalSpec& spec) {
  validate(spec);
  const double value = spec.level.value_or(0.5 * (spec.u_min + spec.u_max));
  if (value < spec.u_min || value > spec.u_max) {
    throw InvalidSpec("constant level outside bounds");
  }
  return RealMatrix::Constant(spec.channel_count, spec.sample_count(), value);
}

RealMatrix generate(const SignalSpec& spec) {
  switch (spec.kind) {
    case SignalKind::gaussian_mixture: return gaussian_signal(spec);
    case SignalKind::random_steps: return step_signal(spec);
    case SignalKind::constant: return constant_signal(spec);
  }
  throw InvalidSpec("unknown signal kind");
}

RealMatrix exhaust_of(const RealMatrix& u) {
  return (1.0 - u.array()).matrix();
}

}  // namespace koopman::signals

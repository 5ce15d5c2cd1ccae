#include "koopman/observables.hpp"

#include "koopman/errors.hpp"

namespace koopman {

std::string to_string(ObservableKind kind) {
  return kind == ObservableKind::delay ? "delay" : "monomial";
}

ObservableKind observable_kind_from_string(const std::string& name) {
  if (name == "delay") return ObservableKind::delay;
  if (name == "monomial") return ObservableKind::monomial;
  throw InvalidSpec("unknown observable kind '" + name + "'");
}

Eigen::Index ObservableDictionary::lifted_dim() const {
  const Eigen::Index blocks = kind == ObservableKind::delay ? order + 1 : order;
  return static_cast<Eigen::Index>(state_dim) * blocks;
}

void validate(const ObservableDictionary& dict) {
  if (dict.state_dim < 1) throw InvalidSpec("state_dim must be positive");
  if (dict.kind == ObservableKind::delay) {
    if (dict.order < 0 || dict.order > ObservableDictionary::kMaxDelay) {
      throw InvalidSpec("delay depth out of range: " + std::to_string(dict.order));
    }
  } else if (dict.order < 1 || dict.order > ObservableDictionary::kMaxMonomial) {
    throw InvalidSpec("monomial order out of range: " + std::to_string(dict.order));
  }
}

LiftedSnapshotSet LiftedSnapshotSet::head(Eigen::Index count) const {
  if (count < 0 || count > size()) {
    throw InsufficientData("requested " + std::to_string(count) +
                           " snapshots, have " + std::to_string(size()));
  }
  LiftedSnapshotSet out;
  out.current = current.leftCols(count);
  out.next = next.leftCols(count);
  out.inputs = inputs.leftCols(count);
  out.dictionary = dictionary;
  out.sample_dt = sample_dt;
  out.times.assign(times.begin(), times.begin() + count);
  return out;
}

namespace {

void write_delay_column(const RealMatrix& states, Eigen::Index k, int delays,
                        Eigen::Ref<RealVector> z) {
  const Eigen::Index n = states.rows();
  for (int j = 0; j <= delays; ++j) {
    z.segment(j * n, n) = states.col(k - j);
  }
}

void write_monomial_column(const Eigen::Ref<const RealVector>& x, int max_order,
                           Eigen::Ref<RealVector> z) {
  const Eigen::Index n = x.size();
  RealVector power = x;
  for (int p = 0; p < max_order; ++p) {
    if (p > 0) power = power.cwiseProduct(x);
    z.segment(p * n, n) = power;
  }
}

void check_transitions(const Trajectory& trajectory, Eigen::Index needed_samples) {
  if (trajectory.samples() < needed_samples) {
    throw InsufficientData("trajectory has " + std::to_string(trajectory.samples()) +
                           " samples, lift needs at least " +
                           std::to_string(needed_samples));
  }
  if (trajectory.inputs.cols() < trajectory.samples() - 1) {
    throw InsufficientData("trajectory is missing inputs for some transitions");
  }
}

}  // namespace

LiftedSnapshotSet delay_lift(const Trajectory& trajectory, int delays,
                             Eigen::Index first_index) {
  ObservableDictionary dict{ObservableKind::delay, delays,
                            static_cast<int>(trajectory.state_dim())};
  validate(dict);
  check_transitions(trajectory, delays + 2);

  const Eigen::Index count = trajectory.samples() - delays - 1;
  const Eigen::Index m = dict.lifted_dim();
  LiftedSnapshotSet out;
  out.dictionary = dict;
  out.sample_dt = trajectory.sample_dt;
  out.current.resize(m, count);
  out.next.resize(m, count);
  out.inputs.resize(trajectory.input_dim(), count);
  out.times.resize(count);
  for (Eigen::Index c = 0; c < count; ++c) {
    const Eigen::Index k = c + delays;
    write_delay_column(trajectory.states, k, delays, out.current.col(c));
    write_delay_column(trajectory.states, k + 1, delays, out.next.col(c));
    out.inputs.col(c) = trajectory.inputs.col(k);
    out.times[c] = first_index + k;
  }
  return out;
}

LiftedSnapshotSet monomial_lift(const Trajectory& trajectory, int max_order,
                                Eigen::Index first_index) {
  ObservableDictionary dict{ObservableKind::monomial, max_order,
                            static_cast<int>(trajectory.state_dim())};
  validate(dict);
  check_transitions(trajectory, 2);

  const Eigen::Index count = trajectory.samples() - 1;
  const Eigen::Index m = dict.lifted_dim();
  RealMatrix lifted(m, trajectory.samples());
  for (Eigen::Index k = 0; k < trajectory.samples(); ++k) {
    write_monomial_column(trajectory.states.col(k), max_order, lifted.col(k));
    if (!lifted.col(k).allFinite()) {
      throw LiftOverflow("monomial lift of order " + std::to_string(max_order) +
                         " is not finite at sample " + std::to_string(first_index + k));
    }
  }
  LiftedSnapshotSet out;
  out.dictionary = dict;
  out.sample_dt = trajectory.sample_dt;
  out.current = lifted.leftCols(count);
  out.next = lifted.middleCols(1, count);
  out.inputs = trajectory.inputs.leftCols(count);
  out.times.resize(count);
  for (Eigen::Index k = 0; k < count; ++k) out.times[k] = first_index + k;
  return out;
}

LiftedSnapshotSet lift(const Trajectory& trajectory, const ObservableDictionary& dict,
                       Eigen::Index first_index) {
  if (dict.state_dim != trajectory.state_dim()) {
    throw InvalidSpec("dictionary state_dim does not match trajectory");
  }
  return dict.kind == ObservableKind::delay
             ? delay_lift(trajectory, dict.order, first_index)
             : monomial_lift(trajectory, dict.order, first_index);
}

LiftedSnapshotSet concatenate(const std::vector<LiftedSnapshotSet>& parts) {
  if (parts.empty()) throw InsufficientData("nothing to concatenate");
  Eigen::Index total = 0;
  for (const auto& p : parts) {
    if (!(p.dictionary == parts.front().dictionary) ||
        p.inputs.rows() != parts.front().inputs.rows()) {
      throw InvalidSpec("cannot concatenate snapshot sets with different layouts");
    }
    total += p.size();
  }
  LiftedSnapshotSet out;
  out.dictionary = parts.front().dictionary;
  out.sample_dt = parts.front().sample_dt;
  out.current.resize(parts.front().current.rows(), total);
  out.next.resize(parts.front().next.rows(), total);
  out.inputs.resize(parts.front().inputs.rows(), total);
  out.times.reserve(total);
  Eigen::Index offset = 0;
  for (const auto& p : parts) {
    out.current.middleCols(offset, p.size()) = p.current;
    out.next.middleCols(offset, p.size()) = p.next;
    out.inputs.middleCols(offset, p.size()) = p.inputs;
    out.times.insert(out.times.end(), p.times.begin(), p.times.end());
    offset += p.size();
  }
  return out;
}

RealMatrix projection_matrix(const ObservableDictionary& dict) {
  validate(dict);
  RealMatrix c = RealMatrix::Zero(dict.state_dim, dict.lifted_dim());
  c.leftCols(dict.state_dim).setIdentity();
  return c;
}

RealVector lift_point(const RealMatrix& history, const ObservableDictionary& dict) {
  validate(dict);
  if (history.rows() != dict.state_dim) {
    throw InvalidSpec("history state dimension does not match dictionary");
  }
  if (history.cols() < dict.history_length()) {
    throw InsufficientData("lift needs " + std::to_string(dict.history_length()) +
                           " samples of history, got " + std::to_string(history.cols()));
  }
  RealVector z(dict.lifted_dim());
  const Eigen::Index newest = history.cols() - 1;
  if (dict.kind == ObservableKind::delay) {
    write_delay_column(history, newest, dict.order, z);
  } else {
    write_monomial_column(history.col(newest), dict.order, z);
    if (!z.allFinite()) throw LiftOverflow("monomial lift is not finite");
  }
  return z;
}

}  // namespace koopman

#include "koopman/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>
#include <unordered_set>

#include "koopman/errors.hpp"

namespace koopman::eval {

double rms(const RealVector& errors) {
  if (errors.size() == 0) return 0.0;
  return std::sqrt(errors.squaredNorm() / static_cast<double>(errors.size()));
}

EvaluationReport single_step_error(const LinearModel& model,
                                   const LiftedSnapshotSet& verification) {
  if (verification.size() == 0) {
    throw InsufficientData("verification set is empty");
  }
  if (verification.current.rows() != model.state_dim()) {
    throw InvalidSpec("verification lift does not match the model");
  }
  RealMatrix z_next = model.a * verification.current;
  if (model.input_dim() > 0) z_next += model.b * verification.inputs;
  const RealMatrix predicted = model.c * z_next;
  const RealMatrix actual = model.c * verification.next;
  const RealMatrix current = model.c * verification.current;

  std::vector<double> errors;
  errors.reserve(verification.size());
  EvaluationReport report;
  for (Eigen::Index k = 0; k < verification.size(); ++k) {
    const double denom = (actual.col(k) - current.col(k)).norm();
    if (denom == 0.0) {
      ++report.excluded;
      continue;
    }
    errors.push_back((predicted.col(k) - actual.col(k)).norm() / denom);
  }
  report.errors = Eigen::Map<RealVector>(errors.data(), static_cast<Eigen::Index>(errors.size()));
  report.e_rms = rms(report.errors);
  report.verification_samples = verification.size();
  return report;
}

double rms_amplitude(const RealMatrix& states) {
  if (states.cols() == 0) return 0.0;
  const RealVector mean = states.rowwise().mean();
  return std::sqrt((states.colwise() - mean).squaredNorm() /
                   static_cast<double>(states.cols()));
}

RolloutResult rollout_reconstruction(const LiftedModel& model, const RealMatrix& history,
                                     const RealMatrix& inputs, const RealMatrix& actual) {
  if (actual.cols() != inputs.cols() + 1) {
    throw InvalidSpec("rollout needs one more actual sample than inputs");
  }
  RolloutResult out;
  const RealVector z0 = lift_point(history, model.dictionary);
  out.predicted = rollout(model.system, z0, inputs);
  out.amplitude = rms_amplitude(actual);
  const double scale = out.amplitude > 0.0 ? out.amplitude : 1.0;
  out.errors = (out.predicted - actual).colwise().norm().transpose() / scale;
  out.max_error = out.errors.maxCoeff();
  out.mean_error = out.errors.mean();
  return out;
}

LiftedSnapshotSet take_balanced(const std::vector<LiftedSnapshotSet>& parts,
                                Eigen::Index count) {
  Eigen::Index total = 0;
  for (const auto& p : parts) total += p.size();
  if (count == 0) count = total;
  if (count < 1 || count > total) {
    throw InsufficientData("requested " + std::to_string(count) + " snapshots, have " +
                           std::to_string(total));
  }
  std::vector<LiftedSnapshotSet> heads;
  Eigen::Index taken = 0;
  Eigen::Index seen = 0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    seen += parts[i].size();
    // Cumulative rounding keeps the total exact.
    const Eigen::Index target = i + 1 == parts.size()
                                    ? count
                                    : static_cast<Eigen::Index>(std::llround(
                                          static_cast<double>(count) * seen / total));
    const Eigen::Index here = std::min(parts[i].size(), target - taken);
    if (here > 0) heads.push_back(parts[i].head(here));
    taken += std::max<Eigen::Index>(0, here);
  }
  return concatenate(heads);
}

std::vector<SweepCell> convergence_sweep(const std::vector<IndexedTrajectory>& training,
                                         const std::vector<IndexedTrajectory>& verification,
                                         ObservableKind kind,
                                         const std::vector<int>& orders,
                                         const std::vector<Eigen::Index>& sample_counts,
                                         const SweepOptions& options) {
  std::vector<SweepCell> cells;
  for (int order : orders) {
    for (Eigen::Index count : sample_counts) {
      SweepCell cell;
      cell.order = order;
      cell.samples = count;
      cells.push_back(cell);
    }
  }

  auto run_cell = [&](SweepCell& cell) {
    try {
      const ObservableDictionary dict{kind, cell.order,
                                      static_cast<int>(training.front().trajectory.state_dim())};
      std::vector<LiftedSnapshotSet> train_parts;
      for (const auto& t : training) train_parts.push_back(lift(t.trajectory, dict, t.first_index));
      std::vector<LiftedSnapshotSet> verify_parts;
      for (const auto& v : verification) verify_parts.push_back(lift(v.trajectory, dict, v.first_index));
      const auto data = take_balanced(train_parts, cell.samples);
      cell.samples = data.size();
      const auto model = hdmd::fit(data, options.rcond);
      cell.e_rms = single_step_error(model.system, concatenate(verify_parts)).e_rms;
      cell.status = CellStatus::ok;
    } catch (const std::exception& e) {
      cell.status = CellStatus::failed;
      cell.message = e.what();
      cell.e_rms = std::numeric_limits<double>::quiet_NaN();
    }
  };

  if (training.empty() || verification.empty()) {
    throw InsufficientData("sweep needs training and verification trajectories");
  }
  const unsigned threads =
      std::max(1u, std::min<unsigned>(options.threads, static_cast<unsigned>(cells.size())));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) run_cell(cells[i]);
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  return cells;
}

RealVector pose_error_curve(const RealMatrix& actual, const RealVector& x_ref,
                            const RealVector& x0) {
  if (actual.cols() == 0) throw InsufficientData("empty trajectory");
  const double initial = (x0 - x_ref).norm();
  if (!(initial > 0.0)) {
    throw InvalidReference("initial state equals the reference; error is undefined");
  }
  return (actual.colwise() - x_ref).colwise().norm().transpose() / initial;
}

double steady_state_error(const RealVector& curve, double sample_dt, double from_time) {
  double sum = 0.0;
  Eigen::Index count = 0;
  for (Eigen::Index k = 0; k < curve.size(); ++k) {
    if (static_cast<double>(k) * sample_dt >= from_time - 1e-9) {
      sum += curve(k);
      ++count;
    }
  }
  if (count == 0) throw InsufficientData("no samples after the steady-state time");
  return sum / static_cast<double>(count);
}

bool disjoint(const std::vector<Eigen::Index>& training,
              const std::vector<Eigen::Index>& verification) {
  const std::unordered_set<Eigen::Index> seen(training.begin(), training.end());
  return std::none_of(verification.begin(), verification.end(),
                      [&](Eigen::Index i) { return seen.count(i) > 0; });
}

}  // namespace koopman::eval

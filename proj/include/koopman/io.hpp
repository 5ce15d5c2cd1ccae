#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "koopman/eval.hpp"
#include "koopman/hdmd.hpp"
#include "koopman/plant.hpp"
#include "koopman/reduce.hpp"

namespace koopman::io {

using Json = nlohmann::ordered_json;
using Fingerprints = std::map<std::string, std::string>;

/// Lowercase hex SHA-256 of `bytes`.
std::string sha256_hex(std::string_view bytes);

std::string read_file(const std::filesystem::path& path);
/// Writes to a temporary sibling and renames it over `path`.
void write_atomic(const std::filesystem::path& path, std::string_view content);
std::string fingerprint_file(const std::filesystem::path& path);

/// %.17g, so every double round-trips.
std::string format_double(double value);

/// Parses JSON; syntax errors become ParseError naming `source` and the line.
Json parse_json(std::string_view text, const std::string& source);

// --- CSV ---------------------------------------------------------------

/// Header t,u1..up,x1..xn; one row per state sample. When the trajectory has
/// one input fewer than states the last row repeats the final input.
std::string trajectory_csv(const Trajectory& trajectory);
Trajectory parse_trajectory_csv(std::string_view text, const std::string& source,
                                int input_dim = plant::kInputDim);

/// t,u1..up[,v1..vp] with v = 1 - u when `with_exhaust`.
std::string signal_csv(const RealMatrix& inputs, double sample_dt, bool with_exhaust);

std::string sweep_csv(const std::vector<eval::SweepCell>& cells);
std::string pose_csv(const RealVector& curve, double sample_dt);
std::string rollout_csv(const eval::RolloutResult& result, double sample_dt);
/// Re, Im, |lambda|, power, kept flag; one row per eigenvalue in eigen order.
std::string spectrum_csv(const KoopmanSpectrum& spec, const std::vector<Eigen::Index>& kept);

// --- models ------------------------------------------------------------

Json matrix_to_json(const RealMatrix& m);
RealMatrix matrix_from_json(const Json& j, const std::string& name);

Json dictionary_to_json(const ObservableDictionary& dict);
ObservableDictionary dictionary_from_json(const Json& j);

/// `inputs` maps upstream artifact names to their fingerprints.
Json model_to_json(const LiftedModel& model, const Fingerprints& inputs);
LiftedModel model_from_json(const Json& j);

Json reduced_to_json(const ReducedModel& rm, const LiftedModel& parent,
                     const Fingerprints& inputs);
ReducedModel reduced_from_json(const Json& j);

Fingerprints inputs_of(const Json& artifact);

/// Throws StaleArtifact unless `recorded` lists `name` with `actual`.
void require_fingerprint(const Fingerprints& recorded, const std::string& name,
                         const std::string& actual, const std::string& stage);

}  // namespace koopman::io

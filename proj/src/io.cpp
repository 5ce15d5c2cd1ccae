#include "koopman/io.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>

#include "koopman/errors.hpp"

namespace koopman::io {

namespace fs = std::filesystem;

std::string sha256_hex(std::string_view bytes) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(),
                                                             &EVP_MD_CTX_free);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest, &length) != 1) {
    throw IoError("SHA-256 digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * length);
  for (unsigned int i = 0; i < length; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xF]);
  }
  return out;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_atomic(const fs::path& path, std::string_view content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError("short write to " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + ": " + ec.message());
}

std::string fingerprint_file(const fs::path& path) { return sha256_hex(read_file(path)); }

std::string format_double(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

Json parse_json(std::string_view text, const std::string& source) {
  try {
    return Json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::parse_error& e) {
    const auto upto = std::min<std::size_t>(e.byte, text.size());
    const auto line = 1 + std::count(text.begin(), text.begin() + upto, '\n');
    throw ParseError(source + ":" + std::to_string(line) + ": " + e.what());
  }
}

namespace {

void append_row(std::string& out, double t, const double* a, Eigen::Index na,
                const double* b = nullptr, Eigen::Index nb = 0) {
  out += format_double(t);
  for (Eigen::Index i = 0; i < na; ++i) {
    out += ',';
    out += format_double(a[i]);
  }
  for (Eigen::Index i = 0; i < nb; ++i) {
    out += ',';
    out += format_double(b[i]);
  }
  out += '\n';
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

double parse_number(std::string_view field, const std::string& source, std::size_t line) {
  double v = 0.0;
  const auto* end = field.data() + field.size();
  const auto res = std::from_chars(field.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end) {
    throw ParseError(source + ":" + std::to_string(line) + ": bad number '" +
                     std::string(field) + "'");
  }
  return v;
}

template <typename T>
T get_field(const Json& j, const char* key) {
  if (!j.contains(key)) throw ParseError(std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("field '") + key + "': " + e.what());
  }
}

}  // namespace

std::string trajectory_csv(const Trajectory& trajectory) {
  const Eigen::Index n = trajectory.samples();
  const Eigen::Index p = trajectory.input_dim();
  const Eigen::Index s = trajectory.state_dim();
  if (trajectory.inputs.cols() != n && trajectory.inputs.cols() != n - 1) {
    throw InvalidSpec("trajectory inputs must match the samples or be one fewer");
  }
  std::string out = "t";
  for (Eigen::Index i = 1; i <= p; ++i) out += ",u" + std::to_string(i);
  for (Eigen::Index i = 1; i <= s; ++i) out += ",x" + std::to_string(i);
  out += '\n';
  out.reserve(out.size() + static_cast<std::size_t>(n * (p + s + 1) * 24));
  for (Eigen::Index k = 0; k < n; ++k) {
    const Eigen::Index uk = std::min(k, trajectory.inputs.cols() - 1);
    const RealVector u = uk >= 0 ? RealVector(trajectory.inputs.col(uk)) : RealVector::Zero(p);
    const RealVector x = trajectory.states.col(k);
    append_row(out, static_cast<double>(k) * trajectory.sample_dt, u.data(), p, x.data(), s);
  }
  return out;
}

Trajectory parse_trajectory_csv(std::string_view text, const std::string& source,
                                int input_dim) {
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 0;
  std::size_t width = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    const auto fields = split(line, ',');
    if (line_no == 1) {
      if (fields.empty() || fields[0] != "t") {
        throw ParseError(source + ":1: expected a header starting with 't'");
      }
      width = fields.size();
      continue;
    }
    if (fields.size() != width) {
      throw ParseError(source + ":" + std::to_string(line_no) + ": expected " +
                       std::to_string(width) + " fields, found " +
                       std::to_string(fields.size()));
    }
    std::vector<double> row;
    row.reserve(width);
    for (auto f : fields) row.push_back(parse_number(f, source, line_no));
    rows.push_back(std::move(row));
  }
  if (width == 0) throw ParseError(source + ": empty file");
  if (width < static_cast<std::size_t>(input_dim) + 2) {
    throw ParseError(source + ":1: too few columns");
  }
  if (rows.empty()) throw InsufficientData(source + ": no samples");

  Trajectory out;
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto s = static_cast<Eigen::Index>(width) - 1 - input_dim;
  out.inputs.resize(input_dim, n);
  out.states.resize(s, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto& r = rows[static_cast<std::size_t>(k)];
    for (Eigen::Index i = 0; i < input_dim; ++i) out.inputs(i, k) = r[1 + i];
    for (Eigen::Index i = 0; i < s; ++i) out.states(i, k) = r[1 + input_dim + i];
  }
  out.sample_dt = n > 1 ? rows[1][0] - rows[0][0] : 0.02;
  return out;
}

std::string signal_csv(const RealMatrix& inputs, double sample_dt, bool with_exhaust) {
  const Eigen::Index p = inputs.rows();
  std::string out = "t";
  for (Eigen::Index i = 1; i <= p; ++i) out += ",u" + std::to_string(i);
  if (with_exhaust) {
    for (Eigen::Index i = 1; i <= p; ++i) out += ",v" + std::to_string(i);
  }
  out += '\n';
  for (Eigen::Index k = 0; k < inputs.cols(); ++k) {
    const RealVector u = inputs.col(k);
    const RealVector v = 1.0 - u.array();
    append_row(out, static_cast<double>(k) * sample_dt, u.data(), p, v.data(),
               with_exhaust ? p : 0);
  }
  return out;
}

std::string sweep_csv(const std::vector<eval::SweepCell>& cells) {
  std::string out = "order,samples,e_rms,status\n";
  for (const auto& c : cells) {
    out += std::to_string(c.order) + "," + std::to_string(c.samples) + "," +
           (c.status == eval::CellStatus::ok ? format_double(c.e_rms) : std::string("nan")) +
           "," + (c.status == eval::CellStatus::ok ? "ok" : "failed") + "\n";
  }
  return out;
}

std::string pose_csv(const RealVector& curve, double sample_dt) {
  std::string out = "t,e\n";
  for (Eigen::Index k = 0; k < curve.size(); ++k) {
    append_row(out, static_cast<double>(k) * sample_dt, &curve(k), 1);
  }
  return out;
}

std::string rollout_csv(const eval::RolloutResult& result, double sample_dt) {
  std::string out = "t";
  for (Eigen::Index i = 1; i <= result.predicted.rows(); ++i) {
    out += ",x_hat" + std::to_string(i);
  }
  out += ",err\n";
  for (Eigen::Index k = 0; k < result.predicted.cols(); ++k) {
    const RealVector x = result.predicted.col(k);
    append_row(out, static_cast<double>(k) * sample_dt, x.data(), x.size(), &result.errors(k),
               1);
  }
  return out;
}

std::string spectrum_csv(const KoopmanSpectrum& spec, const std::vector<Eigen::Index>& kept) {
  std::vector<bool> flag(static_cast<std::size_t>(spec.size()), false);
  for (auto i : kept) flag.at(static_cast<std::size_t>(i)) = true;
  std::string out = "re,im,abs,power,kept\n";
  for (Eigen::Index i = 0; i < spec.size(); ++i) {
    const auto l = spec.eigenvalues(i);
    out += format_double(l.real()) + "," + format_double(l.imag()) + "," +
           format_double(std::abs(l)) + "," + format_double(spec.mode_powers(i)) + "," +
           (flag[static_cast<std::size_t>(i)] ? "1" : "0") + "\n";
  }
  return out;
}

Json matrix_to_json(const RealMatrix& m) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

RealMatrix matrix_from_json(const Json& j, const std::string& name) {
  if (!j.is_array()) throw ParseError("matrix '" + name + "' is not an array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows > 0 ? static_cast<Eigen::Index>(j[0].size()) : 0;
  RealMatrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw ParseError("matrix '" + name + "' row " + std::to_string(r) + " is ragged");
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      const auto& v = row[static_cast<std::size_t>(c)];
      if (!v.is_number()) {
        throw ParseError("matrix '" + name + "' has a non-numeric entry");
      }
      m(r, c) = v.get<double>();
    }
  }
  return m;
}

Json dictionary_to_json(const ObservableDictionary& dict) {
  return Json{{"kind", to_string(dict.kind)}, {"order", dict.order}, {"state_dim", dict.state_dim}};
}

ObservableDictionary dictionary_from_json(const Json& j) {
  ObservableDictionary d;
  try {
    d.kind = observable_kind_from_string(get_field<std::string>(j, "kind"));
  } catch (const InvalidSpec& e) {
    throw ParseError(e.what());
  }
  d.order = get_field<int>(j, "order");
  d.state_dim = get_field<int>(j, "state_dim");
  validate(d);
  return d;
}

namespace {

Json system_fields(Json out, const LinearModel& m) {
  out["state_dim"] = m.state_dim();
  out["input_dim"] = m.input_dim();
  out["output_dim"] = m.output_dim();
  out["a"] = matrix_to_json(m.a);
  out["b"] = matrix_to_json(m.b);
  out["c"] = matrix_to_json(m.c);
  return out;
}

LinearModel system_from(const Json& j) {
  LinearModel m;
  m.a = matrix_from_json(j.at("a"), "a");
  m.b = matrix_from_json(j.at("b"), "b");
  m.c = matrix_from_json(j.at("c"), "c");
  const auto n = get_field<Eigen::Index>(j, "state_dim");
  if (m.a.rows() != n || m.a.cols() != n || m.b.rows() != n || m.c.cols() != n ||
      m.b.cols() != get_field<Eigen::Index>(j, "input_dim") ||
      m.c.rows() != get_field<Eigen::Index>(j, "output_dim")) {
    throw ParseError("model matrices disagree with the declared dimensions");
  }
  return m;
}

Json fingerprints_json(const Fingerprints& f) {
  Json out = Json::object();
  for (const auto& [k, v] : f) out[k] = v;
  return out;
}

void require_keys(const Json& j, std::initializer_list<const char*> keys) {
  for (const char* k : keys) {
    if (!j.contains(k)) throw ParseError(std::string("missing field '") + k + "'");
  }
}

}  // namespace

Json model_to_json(const LiftedModel& model, const Fingerprints& inputs) {
  Json out;
  out["format"] = "koopman-lifted-model";
  out["version"] = 1;
  out["dictionary"] = dictionary_to_json(model.dictionary);
  out["sample_dt"] = model.sample_dt;
  out["training_snapshots"] = model.training_snapshots;
  out["inputs"] = fingerprints_json(inputs);
  return system_fields(std::move(out), model.system);
}

LiftedModel model_from_json(const Json& j) {
  require_keys(j, {"format", "dictionary", "sample_dt", "a", "b", "c"});
  if (j.at("format") != "koopman-lifted-model") throw ParseError("not a lifted model file");
  LiftedModel m;
  m.dictionary = dictionary_from_json(j.at("dictionary"));
  m.sample_dt = get_field<double>(j, "sample_dt");
  m.training_snapshots = get_field<Eigen::Index>(j, "training_snapshots");
  m.system = system_from(j);
  if (m.system.state_dim() != m.dictionary.lifted_dim()) {
    throw ParseError("model dimension does not match its dictionary");
  }
  return m;
}

Json reduced_to_json(const ReducedModel& rm, const LiftedModel& parent,
                     const Fingerprints& inputs) {
  Json out;
  out["format"] = "koopman-reduced-model";
  out["version"] = 1;
  out["dictionary"] = dictionary_to_json(parent.dictionary);
  out["sample_dt"] = parent.sample_dt;
  out["inputs"] = fingerprints_json(inputs);
  Json red;
  red["kept_indices"] = rm.kept_indices;
  std::vector<double> re;
  std::vector<double> im;
  for (Eigen::Index i = 0; i < rm.eigenvalues.size(); ++i) {
    re.push_back(rm.eigenvalues(i).real());
    im.push_back(rm.eigenvalues(i).imag());
  }
  red["eigenvalues_re"] = re;
  red["eigenvalues_im"] = im;
  red["power_fraction"] = rm.power_fraction;
  red["max_imaginary"] = rm.max_imaginary;
  red["basis_condition"] = rm.basis_condition;
  red["projector"] = matrix_to_json(rm.projector);
  out["reduced"] = std::move(red);
  return system_fields(std::move(out), rm.system);
}

ReducedModel reduced_from_json(const Json& j) {
  require_keys(j, {"format", "reduced", "a", "b", "c"});
  if (j.at("format") != "koopman-reduced-model") throw ParseError("not a reduced model file");
  ReducedModel rm;
  rm.system = system_from(j);
  const Json& red = j.at("reduced");
  rm.kept_indices = get_field<std::vector<Eigen::Index>>(red, "kept_indices");
  const auto re = get_field<std::vector<double>>(red, "eigenvalues_re");
  const auto im = get_field<std::vector<double>>(red, "eigenvalues_im");
  if (re.size() != im.size() || re.size() != rm.kept_indices.size()) {
    throw ParseError("reduced eigenvalue lists are inconsistent");
  }
  rm.eigenvalues.resize(static_cast<Eigen::Index>(re.size()));
  for (std::size_t i = 0; i < re.size(); ++i) {
    rm.eigenvalues(static_cast<Eigen::Index>(i)) = {re[i], im[i]};
  }
  rm.power_fraction = get_field<double>(red, "power_fraction");
  rm.max_imaginary = get_field<double>(red, "max_imaginary");
  rm.basis_condition = get_field<double>(red, "basis_condition");
  rm.projector = matrix_from_json(red.at("projector"), "projector");
  if (rm.projector.rows() != rm.dimension()) {
    throw ParseError("projector rows do not match the reduced dimension");
  }
  return rm;
}

Fingerprints inputs_of(const Json& artifact) {
  Fingerprints out;
  if (!artifact.contains("inputs")) return out;
  for (const auto& [k, v] : artifact.at("inputs").items()) out[k] = v.get<std::string>();
  return out;
}

void require_fingerprint(const Fingerprints& recorded, const std::string& name,
                         const std::string& actual, const std::string& stage) {
  const auto it = recorded.find(name);
  if (it == recorded.end()) {
    throw StaleArtifact(stage + ": no recorded fingerprint for " + name);
  }
  if (it->second != actual) {
    throw StaleArtifact(stage + ": " + name + " changed since it was consumed (recorded " +
                        it->second.substr(0, 12) + ", found " + actual.substr(0, 12) + ")");
  }
}

}  // namespace koopman::io

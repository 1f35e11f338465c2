#include "rtomo/io.hpp"

#include <openssl/evp.h>

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>

#include "rtomo/error.hpp"

namespace rtomo::io {
namespace {

constexpr std::string_view kDatasetMagic = "rtomo-dataset 1";

void append_double(std::string& out, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, res.ptr);
}

template <class T>
T field(const Json& j, const char* key) {
  if (!j.contains(key)) throw IoError(std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("bad field '") + key + "': " + e.what());
  }
}

std::uint64_t to_little_endian(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::big) return __builtin_bswap64(v);
  return v;
}

Json truth_to_json(const HiddenTruth& t) {
  Json j;
  j["weights"] = t.weights;
  j["locations"] = matrix_to_json(t.locations.transpose());
  Json rots = Json::array();
  for (const auto& r : t.rotations) rots.push_back(matrix_to_json(r.matrix()));
  j["rotations"] = std::move(rots);
  Json proj = Json::array();
  for (const auto& p : t.projected) proj.push_back(matrix_to_json(p));
  j["projected"] = std::move(proj);
  return j;
}

HiddenTruth truth_from_json(const Json& j) {
  HiddenTruth t;
  t.weights = field<std::vector<double>>(j, "weights");
  t.locations = matrix_from_json(j.at("locations")).transpose();
  for (const auto& r : j.at("rotations")) {
    try {
      t.rotations.emplace_back(matrix_from_json(r));
    } catch (const InvalidArgument& e) {
      throw IoError(std::string("truth block: ") + e.what());
    }
  }
  for (const auto& p : j.at("projected")) t.projected.push_back(matrix_from_json(p));
  return t;
}

}  // namespace

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw IoError("SHA-256 failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 15]);
  }
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("cannot read " + path.string());
  return std::move(ss).str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  out.flush();
  if (!out) throw IoError("cannot write " + path.string());
}

Json manifest(std::string_view command, Json parameters, Json inputs) {
  Json j;
  j["tool"] = kVersion;
  j["command"] = command;
  j["parameters"] = std::move(parameters);
  j["inputs"] = std::move(inputs);
  return j;
}

Json input_digest(const std::filesystem::path& path) {
  return Json{{"path", path.string()}, {"sha256", sha256_hex(read_file(path))}};
}

RadialMixture mixture_from_json(const Json& j) {
  const int d = field<int>(j, "d");
  const double sigma = field<double>(j, "sigma");
  const auto weights = field<std::vector<double>>(j, "weights");
  const auto rows = field<std::vector<std::vector<double>>>(j, "locations");
  const bool normalize = j.contains("normalize") ? field<bool>(j, "normalize") : false;
  if (rows.size() != weights.size()) throw InvalidArgument("weights and locations differ in length");
  Eigen::MatrixXd loc(d, static_cast<Eigen::Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k].size() != static_cast<std::size_t>(d))
      throw InvalidArgument("location " + std::to_string(k) + " has wrong dimension");
    for (int a = 0; a < d; ++a) loc(a, static_cast<Eigen::Index>(k)) = rows[k][static_cast<std::size_t>(a)];
  }
  return RadialMixture(d, sigma, weights, loc, normalize);
}

Json mixture_to_json(const RadialMixture& m) {
  Json j;
  j["d"] = m.dim();
  j["sigma"] = m.sigma();
  j["weights"] = m.weights();
  j["locations"] = matrix_to_json(m.locations().transpose());
  return j;
}

RadialMixture load_mixture(const std::filesystem::path& path) {
  return mixture_from_json(load_json(path));
}

Json matrix_to_json(const Eigen::MatrixXd& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const Json& j) {
  if (!j.is_array()) throw IoError("matrix must be an array of rows");
  if (j.empty()) return {};
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Json& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      throw IoError("ragged matrix");
    for (Eigen::Index c = 0; c < cols; ++c) {
      if (!row[static_cast<std::size_t>(c)].is_number()) throw IoError("non-numeric matrix entry");
      m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
    }
  }
  return m;
}

std::string format_dataset(const DatasetFile& file) {
  const Dataset& ds = file.data;
  Json header;
  header["manifest"] = file.manifest;
  header["d"] = ds.d;
  header["components"] = ds.components;
  header["sigma"] = ds.sigma;
  header["noise_sd"] = ds.noise_sd;
  header["seed"] = ds.seed;
  header["resolution"] = ds.lattice.points();
  header["axes"] = ds.lattice.axes();
  header["count"] = ds.profiles.size();
  header["encoding"] = file.binary ? "binary-f64le" : "text";
  if (ds.truth) header["truth"] = truth_to_json(*ds.truth);

  std::string out;
  out.append(kDatasetMagic).push_back('\n');
  out.append(header.dump()).push_back('\n');
  const std::size_t per = ds.lattice.size();
  if (file.binary) {
    const std::size_t bytes = per * ds.profiles.size() * sizeof(double);
    out.append("binary ").append(std::to_string(bytes)).push_back('\n');
    for (const auto& p : ds.profiles)
      for (double v : p.values) {
        const auto bits = to_little_endian(std::bit_cast<std::uint64_t>(v));
        char raw[8];
        std::memcpy(raw, &bits, 8);
        out.append(raw, 8);
      }
    return out;
  }
  out.reserve(out.size() + ds.profiles.size() * per * 24);
  for (const auto& p : ds.profiles) {
    for (std::size_t i = 0; i < p.values.size(); ++i) {
      if (i) out.push_back(' ');
      append_double(out, p.values[i]);
    }
    out.push_back('\n');
  }
  return out;
}

DatasetFile parse_dataset(std::string_view contents) {
  const auto next_line = [&](std::size_t& pos) -> std::string_view {
    const std::size_t end = contents.find('\n', pos);
    if (end == std::string_view::npos) throw IoError("dataset truncated");
    const std::string_view line = contents.substr(pos, end - pos);
    pos = end + 1;
    return line;
  };
  std::size_t pos = 0;
  if (next_line(pos) != kDatasetMagic) throw IoError("not an rtomo dataset (bad first line)");
  Json header;
  try {
    header = Json::parse(next_line(pos));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("bad dataset header: ") + e.what());
  }

  DatasetFile file;
  Dataset& ds = file.data;
  file.manifest = header.contains("manifest") ? header["manifest"] : Json::object();
  ds.d = field<int>(header, "d");
  ds.components = field<int>(header, "components");
  ds.sigma = field<double>(header, "sigma");
  ds.noise_sd = field<double>(header, "noise_sd");
  ds.seed = field<std::uint64_t>(header, "seed");
  try {
    ds.lattice = Lattice(field<int>(header, "resolution"), field<int>(header, "axes"));
  } catch (const InvalidArgument& e) {
    throw IoError(std::string("bad lattice: ") + e.what());
  }
  if (ds.lattice.axes() != ds.d - 1) throw IoError("lattice axes do not match d");
  const auto count = field<std::size_t>(header, "count");
  const auto encoding = field<std::string>(header, "encoding");
  if (header.contains("truth")) ds.truth = truth_from_json(header["truth"]);
  const std::size_t per = ds.lattice.size();

  ds.profiles.resize(count);
  for (std::size_t n = 0; n < count; ++n) {
    ds.profiles[n].index = n;
    ds.profiles[n].lattice = ds.lattice;
    ds.profiles[n].values.resize(per);
  }
  if (encoding == "binary-f64le") {
    file.binary = true;
    const std::string_view tag = next_line(pos);
    const std::size_t bytes = per * count * sizeof(double);
    if (tag != "binary " + std::to_string(bytes)) throw IoError("bad binary block header");
    if (contents.size() - pos != bytes) throw IoError("binary block has wrong length");
    const char* raw = contents.data() + pos;
    for (auto& p : ds.profiles)
      for (double& v : p.values) {
        std::uint64_t bits;
        std::memcpy(&bits, raw, 8);
        raw += 8;
        v = std::bit_cast<double>(to_little_endian(bits));
      }
    return file;
  }
  if (encoding != "text") throw IoError("unknown encoding '" + encoding + "'");
  for (auto& p : ds.profiles) {
    const std::string_view line = next_line(pos);
    const char* cur = line.data();
    const char* end = line.data() + line.size();
    for (std::size_t i = 0; i < per; ++i) {
      while (cur < end && *cur == ' ') ++cur;
      const auto res = std::from_chars(cur, end, p.values[i]);
      if (res.ec != std::errc()) throw IoError("bad value in profile " + std::to_string(p.index));
      cur = res.ptr;
    }
    while (cur < end && *cur == ' ') ++cur;
    if (cur != end) throw IoError("too many values in profile " + std::to_string(p.index));
  }
  if (pos != contents.size()) throw IoError("trailing data after profiles");
  return file;
}

void save_dataset(const std::filesystem::path& path, const DatasetFile& file) {
  write_file(path, format_dataset(file));
}

DatasetFile load_dataset(const std::filesystem::path& path) { return parse_dataset(read_file(path)); }

Json deconvolution_to_json(const ProfileDeconvolution& r) {
  Json j;
  j["index"] = r.index;
  j["flags"] = r.flags;
  j["status"] = describe_flags(r.flags);
  if (!r.message.empty()) j["message"] = r.message;
  j["locations"] = matrix_to_json(r.locations);
  j["amplitudes"] = r.amplitudes;
  return j;
}

ProfileDeconvolution deconvolution_from_json(const Json& j) {
  ProfileDeconvolution r;
  r.index = field<std::size_t>(j, "index");
  r.flags = field<std::uint32_t>(j, "flags");
  if (j.contains("message")) r.message = field<std::string>(j, "message");
  r.locations = matrix_from_json(j.at("locations"));
  r.amplitudes = field<std::vector<double>>(j, "amplitudes");
  return r;
}

Json fit_report_to_json(const FitReport& r) {
  Json j;
  j["objective"] = r.objective;
  j["gradient_norm"] = r.gradient_norm;
  j["iterations"] = r.iterations;
  j["converged"] = r.converged;
  Json groups = Json::array();
  for (const auto& g : r.groups)
    groups.push_back({{"iterations", g.iterations},
                      {"objective", g.objective},
                      {"gradient_norm", g.gradient_norm},
                      {"gradient_steps", g.gradient_steps},
                      {"converged", g.converged}});
  j["groups"] = std::move(groups);
  return j;
}

Json estimate_to_json(const EstimateFile& e) {
  Json j;
  j["manifest"] = e.manifest;
  j["d"] = e.d;
  j["components"] = e.estimate.weights.size();
  j["sigma"] = e.sigma;
  j["method"] = e.method;
  j["mode"] = e.mode;
  j["profiles_used"] = e.estimate.profiles_used;
  j["failures"] = e.failures;
  j["gram"] = matrix_to_json(e.estimate.gram);
  j["weights"] = e.estimate.weights;
  j["configuration"] = {{"points", matrix_to_json(e.configuration.points)},
                        {"effective_rank", e.configuration.effective_rank}};
  if (e.shared_weights) j["shared_weights"] = *e.shared_weights;
  j["convergence"] = e.convergence;
  Json profiles = Json::array();
  for (const auto& r : e.labeled) profiles.push_back(deconvolution_to_json(r));
  j["profiles"] = std::move(profiles);
  return j;
}

EstimateFile estimate_from_json(const Json& j) {
  EstimateFile e;
  e.manifest = j.contains("manifest") ? j["manifest"] : Json::object();
  e.d = field<int>(j, "d");
  e.sigma = field<double>(j, "sigma");
  e.method = field<std::string>(j, "method");
  e.mode = field<std::string>(j, "mode");
  e.estimate.profiles_used = field<std::size_t>(j, "profiles_used");
  e.failures = field<std::size_t>(j, "failures");
  e.estimate.gram = matrix_from_json(j.at("gram"));
  e.estimate.weights = field<std::vector<double>>(j, "weights");
  const Json& conf = j.at("configuration");
  e.configuration.points = matrix_from_json(conf.at("points"));
  e.configuration.effective_rank = field<int>(conf, "effective_rank");
  if (j.contains("shared_weights")) e.shared_weights = field<std::vector<double>>(j, "shared_weights");
  e.convergence = j.contains("convergence") ? j["convergence"] : Json();
  for (const auto& p : j.at("profiles")) e.labeled.push_back(deconvolution_from_json(p));
  return e;
}

void save_estimate(const std::filesystem::path& path, const EstimateFile& e) {
  save_json(path, estimate_to_json(e));
}

EstimateFile load_estimate(const std::filesystem::path& path) {
  try {
    return estimate_from_json(load_json(path));
  } catch (const nlohmann::json::exception& ex) {
    throw IoError("bad estimate file " + path.string() + ": " + ex.what());
  }
}

Json report_to_json(const MonteCarloReport& r) {
  Json j;
  j["quantity"] = r.quantity;
  j["reference"] = r.reference_source;
  j["seed"] = r.seed;
  j["samples"] = r.samples;
  j["pass"] = r.pass;
  Json entries = Json::array();
  for (const auto& e : r.entries) {
    Json row{{"name", e.name},
             {"empirical", e.empirical},
             {"reference", e.reference},
             {"standard_error", e.standard_error},
             {"z", e.standard_error > 0 ? (e.empirical - e.reference) / e.standard_error : 0.0},
             {"pass", e.pass}};
    for (const auto& [k, v] : e.extra) row[k] = v;
    entries.push_back(std::move(row));
  }
  j["entries"] = std::move(entries);
  Json diag = Json::object();
  for (const auto& [k, v] : r.diagnostics) diag[k] = v;
  j["diagnostics"] = std::move(diag);
  return j;
}

Json bootstrap_to_json(const BootstrapResult& b) {
  Json j;
  j["replicates"] = b.replicates.size();
  Json spread = Json::array();
  for (Eigen::Index k = 0; k < b.spread.size(); ++k) spread.push_back(b.spread[k]);
  j["spread"] = std::move(spread);
  Json reps = Json::array();
  for (std::size_t i = 0; i < b.replicates.size(); ++i)
    reps.push_back({{"resample", b.resamples[i]},
                    {"residual", b.residuals[i]},
                    {"points", matrix_to_json(b.replicates[i].points)}});
  j["configurations"] = std::move(reps);
  return j;
}

std::string format_density_grid(const RadialMixture& m, int g, Exec exec) {
  if (g < 2) throw InvalidArgument("grid size G must be at least 2");
  const int d = m.dim();
  const double lo = -std::numbers::pi, step = 2.0 * std::numbers::pi / (g - 1);
  const auto coord = [&](int i) { return lo + step * i; };

  std::vector<std::string> slabs(static_cast<std::size_t>(g));
  for_each_index(exec, slabs.size(), [&](std::size_t i0) {
    std::string& out = slabs[i0];
    Eigen::VectorXd x(d);
    x[0] = coord(static_cast<int>(i0));
    const int inner = d == 2 ? 1 : g;
    for (int i1 = 0; i1 < inner; ++i1) {
      if (d == 3) x[1] = coord(i1);
      for (int i2 = 0; i2 < g; ++i2) {
        x[d - 1] = coord(i2);
        for (int a = 0; a < d; ++a) {
          append_double(out, x[a]);
          out.push_back(' ');
        }
        append_double(out, eval_density(m, x));
        out.push_back('\n');
      }
    }
  });

  std::string out = "# extent ";
  append_double(out, lo);
  out.push_back(' ');
  append_double(out, std::numbers::pi);
  out += "\n# G " + std::to_string(g) + "\n";
  out += d == 2 ? "# axes x y value (y fastest)\n" : "# axes x y z value (z fastest)\n";
  for (const auto& s : slabs) out += s;
  return out;
}

void save_json(const std::filesystem::path& path, const Json& j) { write_file(path, j.dump(2) + "\n"); }

Json load_json(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad JSON in " + path.string() + ": " + e.what());
  }
}

}  // namespace rtomo::io

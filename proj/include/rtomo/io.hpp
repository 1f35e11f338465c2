#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "rtomo/mixture.hpp"
#include "rtomo/mle.hpp"
#include "rtomo/shape.hpp"
#include "rtomo/simulator.hpp"
#include "rtomo/spectral.hpp"
#include "rtomo/verify.hpp"

namespace rtomo::io {

using Json = nlohmann::ordered_json;

inline constexpr std::string_view kVersion = "rtomo 0.1.0";

std::string sha256_hex(std::string_view bytes);
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

/// {"tool", "command", "parameters", "inputs": {name: {path, sha256}}}.
/// No timestamps, so identical runs give identical files.
Json manifest(std::string_view command, Json parameters, Json inputs = Json::object());
/// Entry for the "inputs" block of a manifest.
Json input_digest(const std::filesystem::path& path);

// Mixture configuration: {d, sigma, weights: [K], locations: [K][d], normalize?}.
RadialMixture mixture_from_json(const Json& j);
Json mixture_to_json(const RadialMixture& m);
RadialMixture load_mixture(const std::filesystem::path& path);

// Dataset file:
//   line 1   rtomo-dataset 1
//   line 2   compact JSON header (manifest, d, K, sigma, noise_sd, seed, T,
//            axes, count, encoding, optional truth)
//   text:    one line per profile, T or T*T values (%.17g, space separated,
//            2D images row-major with the first image coordinate slowest)
//   binary:  the line "binary <bytes>" followed by the values of all
//            profiles as little-endian float64 in the same order.
struct DatasetFile {
  Dataset data;
  Json manifest;
  bool binary = false;
};

std::string format_dataset(const DatasetFile& file);
DatasetFile parse_dataset(std::string_view contents);
void save_dataset(const std::filesystem::path& path, const DatasetFile& file);
DatasetFile load_dataset(const std::filesystem::path& path);

Json matrix_to_json(const Eigen::MatrixXd& m);  ///< [[row0], [row1], ...]
Eigen::MatrixXd matrix_from_json(const Json& j);

Json deconvolution_to_json(const ProfileDeconvolution& r);
ProfileDeconvolution deconvolution_from_json(const Json& j);
Json fit_report_to_json(const FitReport& r);

// Estimate file. `labeled` holds the cached per-profile results in label
// order; bootstrap resamples them without touching profile data.
struct EstimateFile {
  Json manifest;
  int d = 2;
  double sigma = 1.0;
  std::string method;
  std::string mode;
  ShapeEstimate estimate;
  Configuration configuration;
  std::vector<ProfileDeconvolution> labeled;
  std::optional<std::vector<double>> shared_weights;
  Json convergence;  ///< null for pure spectral estimates
  std::size_t failures = 0;
};

Json estimate_to_json(const EstimateFile& e);
EstimateFile estimate_from_json(const Json& j);
void save_estimate(const std::filesystem::path& path, const EstimateFile& e);
EstimateFile load_estimate(const std::filesystem::path& path);

Json report_to_json(const MonteCarloReport& r);
Json bootstrap_to_json(const BootstrapResult& b);

/// Mixture density on a G (2D) or G^3 (3D) grid over [-pi, pi]^d with
/// coordinates -pi + 2*pi*i/(G-1). Three header lines (extent, G, axes),
/// then one "coordinates value" line per point, last axis fastest.
std::string format_density_grid(const RadialMixture& m, int g, Exec exec = Exec::parallel);

/// Writes pretty-printed JSON with a trailing newline.
void save_json(const std::filesystem::path& path, const Json& j);
Json load_json(const std::filesystem::path& path);

}  // namespace rtomo::io

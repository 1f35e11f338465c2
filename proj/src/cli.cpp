#include "rtomo/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <iostream>

#include "rtomo/error.hpp"
#include "rtomo/io.hpp"
#include "rtomo/mle.hpp"
#include "rtomo/random.hpp"
#include "rtomo/shape.hpp"
#include "rtomo/simulator.hpp"
#include "rtomo/spectral.hpp"
#include "rtomo/verify.hpp"

namespace rtomo::cli {
namespace {

using io::Json;

struct SimulateArgs {
  std::string mixture, out;
  std::size_t n = 0;
  int t = 0;
  double noise = 0.0;
  std::uint64_t seed = 0;
  bool truth = false, binary = false;
};

struct EstimateArgs {
  std::string dataset, out, method = "pisarenko", mode = "separate";
  int k = 0;
  std::size_t group_size = 0;
  int kappa_fit = 0;
  double max_failed = 0.5;
};

struct VerifyArgs {
  std::string out, mixture;
  int d = 2, k = 4;
  std::size_t m = 100000, configs = 10, n = 500, r = 2000, gamma_m = 1000000;
  double noise = 0.0;
  std::uint64_t seed = 0;
};

struct BootstrapArgs {
  std::string estimate, out;
  std::size_t b = 0;
  std::uint64_t seed = 0;
};

struct RenderArgs {
  std::string mixture, estimate, out;
  int g = 200;
};

int cmd_simulate(const SimulateArgs& a, std::ostream& out) {
  const RadialMixture m = io::load_mixture(a.mixture);
  SimulationOptions opts;
  opts.count = a.n;
  opts.resolution = a.t > 0 ? a.t : (m.dim() == 2 ? 256 : 128);
  opts.noise_sd = a.noise;
  opts.seed = a.seed;
  opts.keep_truth = a.truth;
  io::DatasetFile file;
  file.data = simulate(m, opts);
  file.binary = a.binary;
  file.manifest = io::manifest("simulate",
                               {{"n", a.n},
                                {"t", opts.resolution},
                                {"noise", a.noise},
                                {"seed", a.seed},
                                {"truth", a.truth},
                                {"binary", a.binary},
                                {"mixture", io::mixture_to_json(m)}},
                               {{"mixture", io::input_digest(a.mixture)}});
  io::save_dataset(a.out, file);
  out << "wrote " << a.n << " profiles (T=" << opts.resolution << ", d=" << m.dim() << ") to " << a.out
      << "\n";
  return kOk;
}

int cmd_estimate(const EstimateArgs& a, std::ostream& out, std::ostream& err) {
  const io::DatasetFile file = io::load_dataset(a.dataset);
  const Dataset& ds = file.data;
  if (a.k < 1) throw InvalidArgument("--k must be at least 1");
  const Kernel kernel{ds.sigma};
  const FitMode mode = a.mode == "shared" ? FitMode::shared : FitMode::separate;

  SpectralOptions spectral;
  spectral.kappa_fit = a.kappa_fit;

  io::EstimateFile e;
  e.d = ds.d;
  e.sigma = ds.sigma;
  e.method = a.method;
  e.mode = a.mode;
  bool converged = true;
  if (a.method == "pisarenko") {
    e.labeled = label(deconvolve_spectral(ds.profiles, ds.d, kernel, a.k, spectral));
  } else {
    FitOptions options;
    options.group_size = a.group_size;
    options.spectral = spectral;
    std::optional<DeconvParams> init;
    if (a.method == "pisarenko+mle")
      init = spectral_init(ds.profiles, ds.d, kernel, a.k, mode, options);
    const FitResult fitted = fit(ds.profiles, ds.d, kernel, a.k, mode, init, options);
    e.labeled = label(to_deconvolutions(fitted.params, fitted.report, ds.profiles));
    e.convergence = io::fit_report_to_json(fitted.report);
    e.convergence["noise_sd_estimate"] = estimate_noise_sd(fitted.params, ds.profiles, kernel);
    converged = fitted.report.converged;
  }
  e.failures = static_cast<std::size_t>(
      std::count_if(e.labeled.begin(), e.labeled.end(), [](const auto& r) { return !r.usable(); }));
  e.estimate = hybrid_estimate(e.labeled, ds.d);
  e.configuration = factor(e.estimate, ds.d);
  e.manifest = io::manifest("estimate",
                            {{"k", a.k},
                             {"method", a.method},
                             {"mode", a.mode},
                             {"group_size", a.group_size},
                             {"kappa_fit", a.kappa_fit},
                             {"max_failed", a.max_failed}},
                            {{"dataset", io::input_digest(a.dataset)}});
  io::save_estimate(a.out, e);

  out << "estimate from " << e.estimate.profiles_used << "/" << ds.size() << " profiles written to "
      << a.out << "\n";
  const double failed = ds.size() ? static_cast<double>(e.failures) / static_cast<double>(ds.size()) : 0.0;
  if (failed > a.max_failed) {
    err << "error: " << e.failures << " profiles failed deconvolution (threshold "
        << a.max_failed << ")\n";
    return kNumerical;
  }
  if (!converged) {
    err << "error: least-squares refinement did not converge\n";
    return kNumerical;
  }
  return kOk;
}

Eigen::MatrixXd random_configuration(int d, int k, std::uint64_t seed, std::size_t index) {
  Rng rng = make_rng(seed, index);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::MatrixXd v(d, k);
  for (Eigen::Index j = 0; j < v.cols(); ++j)
    for (Eigen::Index i = 0; i < v.rows(); ++i) v(i, j) = u(rng);
  v.colwise() -= v.rowwise().mean();
  return v;
}

int write_reports(const std::string& path, const std::string& check, Json params,
                  Json inputs, const std::vector<MonteCarloReport>& reports, std::ostream& out) {
  Json j;
  j["manifest"] = io::manifest("verify " + check, std::move(params), std::move(inputs));
  bool pass = true;
  Json list = Json::array();
  for (const auto& r : reports) {
    pass = pass && r.pass;
    list.push_back(io::report_to_json(r));
  }
  j["pass"] = pass;
  j["reports"] = std::move(list);
  io::save_json(path, j);
  out << check << ": " << (pass ? "PASS" : "FAIL") << " (" << reports.size() << " report"
      << (reports.size() == 1 ? "" : "s") << ", written to " << path << ")\n";
  return pass ? kOk : kNumerical;
}

int cmd_verify(const std::string& check, const VerifyArgs& a, std::ostream& out) {
  Json inputs = Json::object();
  if (!a.mixture.empty()) inputs["mixture"] = io::input_digest(a.mixture);

  if (check == "thm41") {
    if (a.d != 2 && a.d != 3) throw InvalidArgument("--d must be 2 or 3");
    std::vector<Eigen::MatrixXd> configs;
    if (!a.mixture.empty()) {
      const RadialMixture m = io::load_mixture(a.mixture);
      configs.push_back(m.locations());
    } else {
      for (std::size_t c = 0; c < a.configs; ++c) configs.push_back(random_configuration(a.d, a.k, a.seed, c));
    }
    std::vector<MonteCarloReport> reports;
    for (std::size_t c = 0; c < configs.size(); ++c)
      reports.push_back(check_projection_identity(configs[c], a.m, mix64(a.seed + c + 1)));
    return write_reports(a.out, check,
                         {{"d", a.d}, {"m", a.m}, {"configs", configs.size()}, {"k", a.k}, {"seed", a.seed}},
                         inputs, reports, out);
  }
  if (check == "gamma")
    return write_reports(a.out, check, {{"m", a.m}, {"seed", a.seed}}, inputs,
                         {estimate_gamma_covariance(a.m, a.seed)}, out);
  if (a.mixture.empty()) throw InvalidArgument("--mixture is required for verify " + check);
  const RadialMixture m = io::load_mixture(a.mixture);
  if (check == "gram-clt") {
    GramCltOptions opts;
    opts.profiles = a.n;
    opts.replications = a.r;
    opts.gamma_samples = a.gamma_m;
    opts.seed = a.seed;
    return write_reports(a.out, check,
                         {{"n", a.n}, {"r", a.r}, {"gamma_m", a.gamma_m}, {"seed", a.seed}}, inputs,
                         {gram_clt_check(m, opts)}, out);
  }
  // fisher
  const Eigen::MatrixXd f = fisher_matrix(m, a.noise, a.m, a.seed);
  Json j;
  j["manifest"] = io::manifest("verify fisher", {{"noise", a.noise}, {"m", a.m}, {"seed", a.seed}}, inputs);
  j["fisher"] = io::matrix_to_json(f);
  io::save_json(a.out, j);
  out << "fisher: " << f.rows() << "x" << f.cols() << " matrix written to " << a.out << "\n";
  return kOk;
}

int cmd_bootstrap(const BootstrapArgs& a, std::ostream& out) {
  const io::EstimateFile e = io::load_estimate(a.estimate);
  const BootstrapResult b = bootstrap(e.labeled, e.d, e.configuration, a.b, a.seed, e.shared_weights);
  Json j;
  j["manifest"] = io::manifest("bootstrap", {{"b", a.b}, {"seed", a.seed}},
                               {{"estimate", io::input_digest(a.estimate)}});
  j["point"] = io::matrix_to_json(e.configuration.points);
  j["bootstrap"] = io::bootstrap_to_json(b);
  io::save_json(a.out, j);
  out << a.b << " bootstrap replicates written to " << a.out << "\n";
  return kOk;
}

int cmd_render(const RenderArgs& a, std::ostream& out) {
  const bool from_estimate = !a.estimate.empty();
  const std::string source = from_estimate ? a.estimate : a.mixture;
  std::optional<RadialMixture> m;
  if (from_estimate) {
    const io::EstimateFile e = io::load_estimate(a.estimate);
    m.emplace(e.d, e.sigma, e.estimate.weights, e.configuration.points);
  } else {
    m.emplace(io::load_mixture(a.mixture));
  }
  io::write_file(a.out, io::format_density_grid(*m, a.g));
  out << "density grid G=" << a.g << " (d=" << m->dim() << ") written to " << a.out << "\n";
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Stochastic Radon transform of radial Gaussian mixtures: simulation and shape estimation",
               "rtomo"};
  app.require_subcommand(1);
  app.fallthrough();
  int threads = 0;
  app.add_option("--threads", threads, "Cap on worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);

  SimulateArgs sim;
  auto* simulate_cmd = app.add_subcommand("simulate", "Simulate a dataset of profiles");
  simulate_cmd->add_option("--mixture", sim.mixture, "Mixture JSON")->required();
  simulate_cmd->add_option("--n", sim.n, "Number of profiles")->required()->check(CLI::PositiveNumber);
  simulate_cmd->add_option("--t", sim.t, "Lattice points per axis (default 256 for d=2, 128 for d=3)");
  simulate_cmd->add_option("--noise", sim.noise, "Noise standard deviation")->check(CLI::NonNegativeNumber);
  simulate_cmd->add_option("--seed", sim.seed, "Master seed")->required();
  simulate_cmd->add_flag("--truth", sim.truth, "Keep the hidden-truth block");
  simulate_cmd->add_flag("--binary", sim.binary, "Store values as packed float64");
  simulate_cmd->add_option("--out", sim.out, "Output dataset")->required();

  EstimateArgs est;
  auto* estimate_cmd = app.add_subcommand("estimate", "Estimate the shape from a dataset");
  estimate_cmd->add_option("--dataset", est.dataset, "Dataset file")->required();
  estimate_cmd->add_option("--k", est.k, "Number of components")->required()->check(CLI::PositiveNumber);
  estimate_cmd->add_option("--method", est.method, "Deconvolution method")
      ->check(CLI::IsMember({"pisarenko", "mle", "pisarenko+mle"}));
  estimate_cmd->add_option("--mode", est.mode, "Weight sharing across profiles")
      ->check(CLI::IsMember({"shared", "separate"}));
  estimate_cmd->add_option("--group-size", est.group_size, "Profiles per shared weight group (0 = all)");
  estimate_cmd->add_option("--kappa-fit", est.kappa_fit, "Frequencies used for amplitudes (0 = auto)")
      ->check(CLI::NonNegativeNumber);
  estimate_cmd->add_option("--max-failed", est.max_failed, "Tolerated fraction of failed profiles")
      ->check(CLI::Range(0.0, 1.0));
  estimate_cmd->add_option("--out", est.out, "Output estimate")->required();

  VerifyArgs ver;
  auto* verify_cmd = app.add_subcommand("verify", "Monte Carlo checks");
  verify_cmd->require_subcommand(1);
  const auto common = [&](CLI::App* c) {
    c->add_option("--seed", ver.seed, "Master seed")->required();
    c->add_option("--out", ver.out, "Report JSON")->required();
  };
  auto* thm41 = verify_cmd->add_subcommand("thm41", "Expected projected Gram identity");
  thm41->add_option("--d", ver.d, "Dimension (2 or 3)")->check(CLI::IsMember({2, 3}));
  thm41->add_option("--m", ver.m, "Rotations per configuration")->check(CLI::Range(2ul, 1ul << 40));
  thm41->add_option("--configs", ver.configs, "Random configurations")->check(CLI::PositiveNumber);
  thm41->add_option("--k", ver.k, "Points per random configuration")->check(CLI::PositiveNumber);
  thm41->add_option("--mixture", ver.mixture, "Use this mixture's locations instead");
  common(thm41);
  auto* gamma = verify_cmd->add_subcommand("gamma", "Covariance of the projection matrix");
  gamma->add_option("--m", ver.m, "Draws")->check(CLI::Range(2ul, 1ul << 40));
  common(gamma);
  auto* clt = verify_cmd->add_subcommand("gram-clt", "Covariance of the Gram estimator");
  clt->add_option("--mixture", ver.mixture, "Mixture JSON")->required();
  clt->add_option("--n", ver.n, "Profiles per replication")->check(CLI::PositiveNumber);
  clt->add_option("--r", ver.r, "Replications")->check(CLI::Range(2ul, 1ul << 40));
  clt->add_option("--gamma-m", ver.gamma_m, "Draws for the reference covariance")->check(CLI::Range(2ul, 1ul << 40));
  common(clt);
  auto* fisher = verify_cmd->add_subcommand("fisher", "Fisher information of the weights");
  fisher->add_option("--mixture", ver.mixture, "Mixture JSON")->required();
  fisher->add_option("--noise", ver.noise, "Noise standard deviation")->required()->check(CLI::PositiveNumber);
  fisher->add_option("--m", ver.m, "Rotations")->check(CLI::PositiveNumber);
  common(fisher);

  BootstrapArgs boot;
  auto* bootstrap_cmd = app.add_subcommand("bootstrap", "Bootstrap the shape estimate");
  bootstrap_cmd->add_option("--estimate", boot.estimate, "Estimate file")->required();
  bootstrap_cmd->add_option("--b", boot.b, "Replicates")->required()->check(CLI::PositiveNumber);
  bootstrap_cmd->add_option("--seed", boot.seed, "Master seed")->required();
  bootstrap_cmd->add_option("--out", boot.out, "Output JSON")->required();

  RenderArgs ren;
  auto* render_cmd = app.add_subcommand("render", "Evaluate a density on a grid");
  auto* source = render_cmd->add_option_group("source", "Density to evaluate");
  source->add_option("--mixture", ren.mixture, "Mixture JSON");
  source->add_option("--estimate", ren.estimate, "Estimate file");
  source->require_option(1);
  render_cmd->add_option("--g", ren.g, "Grid points per axis")->check(CLI::Range(2, 4096));
  render_cmd->add_option("--out", ren.out, "Output grid")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  set_thread_limit(threads);
  try {
    if (*simulate_cmd) return cmd_simulate(sim, out);
    if (*estimate_cmd) return cmd_estimate(est, out, err);
    if (*verify_cmd) {
      for (auto* sub : {thm41, gamma, clt, fisher})
        if (*sub) return cmd_verify(sub->get_name(), ver, out);
    }
    if (*bootstrap_cmd) return cmd_bootstrap(boot, out);
    if (*render_cmd) return cmd_render(ren, out);
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kIo;
  } catch (const NumericalError& e) {
    err << "error: " << e.what() << "\n";
    return kNumerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kNumerical;
  }
  return kUsage;
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace rtomo::cli

#include <doctest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "rtomo/error.hpp"
#include "rtomo/mle.hpp"
#include "rtomo/shape.hpp"

using namespace rtomo;

namespace {

RadialMixture planar_example() {
  Eigen::MatrixXd mu(2, 5);
  mu << 0.6, 0.6, -0.1, -1.0, -0.2, 0.0, 0.8, 0.1, -0.3, -0.6;
  return RadialMixture(2, 0.3, {1, 2, 3, 4, 5}, mu);
}

RadialMixture spatial_example() {
  Eigen::MatrixXd mu(3, 4);
  mu << 0.0, 0.7, -0.7, 0.0, 0.8, -0.4, -0.4, 0.0, -0.3, -0.3, -0.3, 0.8;
  return RadialMixture(3, 0.46, {2, 3, 2.4, 4}, mu);
}

DeconvParams truth_params(const Dataset& ds, FitMode mode, std::size_t group_size = 0) {
  DeconvParams p;
  p.mode = mode;
  p.locations = ds.truth->projected;
  p.group = make_groups(mode, ds.size(), group_size);
  p.weights.assign(p.group.back() + 1, ds.truth->weights);
  return p;
}

// Flattens every parameter into one vector (locations then weights).
Eigen::VectorXd flatten(const DeconvParams& p) {
  std::vector<double> v;
  for (const auto& m : p.locations) v.insert(v.end(), m.data(), m.data() + m.size());
  for (const auto& w : p.weights) v.insert(v.end(), w.begin(), w.end());
  return Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

DeconvParams unflatten(DeconvParams p, const Eigen::VectorXd& v) {
  Eigen::Index i = 0;
  for (auto& m : p.locations)
    for (Eigen::Index j = 0; j < m.size(); ++j) m.data()[j] = v[i++];
  for (auto& w : p.weights)
    for (auto& x : w) x = v[i++];
  return p;
}

}  // namespace

TEST_SUITE("mle") {
  TEST_CASE("groups") {
    CHECK(make_groups(FitMode::separate, 3, 0) == std::vector<std::size_t>{0, 1, 2});
    CHECK(make_groups(FitMode::shared, 3, 0) == std::vector<std::size_t>{0, 0, 0});
    CHECK(make_groups(FitMode::shared, 5, 2) == std::vector<std::size_t>{0, 0, 1, 1, 2});
  }

  TEST_CASE("objective vanishes at the truth on noiseless data") {
    SimulationOptions o;
    o.count = 20;
    o.seed = 4;
    o.keep_truth = true;
    const Dataset ds = simulate(planar_example(), o);
    CHECK(objective(truth_params(ds, FitMode::shared), ds.profiles, Kernel{0.3}).value < 1e-12);
    o.resolution = 64;
    const Dataset im = simulate(spatial_example(), o);
    CHECK(objective(truth_params(im, FitMode::separate), im.profiles, Kernel{0.46}).value < 1e-12);
  }

  TEST_CASE("objective at the truth on noisy data is the noise level") {
    // Planar: (2 pi / T) * T sigma^2 = 2 pi sigma^2 per profile.
    SimulationOptions o;
    o.count = 50;
    o.seed = 8;
    o.noise_sd = 0.1;
    o.keep_truth = true;
    const Dataset ds = simulate(planar_example(), o);
    const double v = objective(truth_params(ds, FitMode::shared), ds.profiles, Kernel{0.3}).value;
    // Sum of N*T squared N(0, s^2) values has sd s^2 sqrt(2 N T).
    const double se = 2 * std::numbers::pi / 256 * 0.01 * std::sqrt(2.0 * 50 * 256) / 50;
    CHECK(std::abs(v - 2 * std::numbers::pi * 0.01) < 3 * se);
  }

  TEST_CASE("analytic gradient matches central differences") {
    SimulationOptions o;
    o.count = 3;
    o.seed = 12;
    o.noise_sd = 0.05;
    o.keep_truth = true;
    for (int d : {2, 3}) {
      o.resolution = d == 2 ? 128 : 32;
      const Dataset ds = simulate(d == 2 ? planar_example() : spatial_example(), o);
      const Kernel kernel{d == 2 ? 0.3 : 0.46};
      Rng rng = make_rng(77, static_cast<std::uint64_t>(d));
      std::normal_distribution<double> jitter(0.0, 0.1);
      for (FitMode mode : {FitMode::shared, FitMode::separate}) {
        DeconvParams p = truth_params(ds, mode);
        Eigen::VectorXd x = flatten(p);
        for (Eigen::Index i = 0; i < x.size(); ++i) x[i] += jitter(rng);
        p = unflatten(p, x);
        const ObjectiveValue g = objective(p, ds.profiles, kernel);
        DeconvParams gp = p;
        gp.locations = g.grad_locations;
        gp.weights = g.grad_weights;
        const Eigen::VectorXd analytic = flatten(gp);
        const auto f = [&](const Eigen::VectorXd& v) { return objective(unflatten(p, v), ds.profiles, kernel).value; };
        for (Eigen::Index i = 0; i < x.size(); ++i) {
          const double fd = oracle::central_difference(f, x, i, 1e-6);
          CHECK(std::abs(analytic[i] - fd) <= 1e-5 * std::max(std::abs(fd), 1e-3));
        }
      }
    }
  }

  TEST_CASE("truth is a local minimum on noiseless data") {
    SimulationOptions o;
    o.count = 5;
    o.seed = 3;
    o.keep_truth = true;
    const Dataset ds = simulate(planar_example(), o);
    const DeconvParams p = truth_params(ds, FitMode::separate);
    const double base = objective(p, ds.profiles, Kernel{0.3}).value;
    Rng rng = make_rng(1, 1);
    std::normal_distribution<double> jitter(0.0, 1e-3);
    for (int i = 0; i < 10; ++i) {
      Eigen::VectorXd x = flatten(p);
      for (Eigen::Index j = 0; j < x.size(); ++j) x[j] += jitter(rng);
      CHECK(objective(unflatten(p, x), ds.profiles, Kernel{0.3}).value >= base);
    }
  }

  TEST_CASE("fit on noiseless data lands on the truth") {
    SimulationOptions o;
    o.count = 30;
    o.seed = 1;
    o.keep_truth = true;
    const Dataset ds = simulate(planar_example(), o);
    const Kernel kernel{0.3};
    const DeconvParams init = spectral_init(ds.profiles, 2, kernel, 5, FitMode::shared);
    const FitResult r = fit(ds.profiles, 2, kernel, 5, FitMode::shared, init);
    CHECK(r.report.converged);
    REQUIRE(r.params.weights.size() == 1);
    const std::vector<double> expected = {5, 4, 3, 2, 1};
    for (int k = 0; k < 5; ++k) CHECK(std::abs(r.params.weights[0][k] - expected[k]) < 1e-7);
    for (std::size_t n = 0; n < ds.size(); ++n) {
      const Eigen::MatrixXd truth = ds.truth->projected[n](Eigen::all, std::vector<int>{4, 3, 2, 1, 0});
      const double fit_err = (r.params.locations[n] - truth).cwiseAbs().maxCoeff();
      const double init_err = (init.locations[n] - truth).cwiseAbs().maxCoeff();
      CHECK(fit_err < 1e-7);
      CHECK((r.params.locations[n] - init.locations[n]).cwiseAbs().maxCoeff() <= init_err + 1e-8);
    }
  }

  TEST_CASE("noisy single spikes: fit improves on the spectral estimate") {
    // A one-component mixture is always centred, so the profiles are built directly.
    Rng rng = make_rng(5, 0);
    std::uniform_real_distribution<double> loc(-1.5, 1.5);
    std::normal_distribution<double> noise(0.0, 0.01 * 2.0 / std::sqrt(2 * std::numbers::pi * 0.09));
    std::vector<Profile> profiles(50);
    std::vector<double> truth(50);
    for (std::size_t n = 0; n < 50; ++n) {
      truth[n] = loc(rng);
      profiles[n].index = n;
      profiles[n].lattice = Lattice(256, 1);
      profiles[n].values.resize(256);
      for (int t = 0; t < 256; ++t) {
        const double x = profiles[n].lattice.coordinate(t);
        profiles[n].values[static_cast<std::size_t>(t)] =
            2.0 * std::exp(-(x - truth[n]) * (x - truth[n]) / 0.18) / std::sqrt(2 * std::numbers::pi * 0.09) + noise(rng);
      }
    }
    const Kernel kernel{0.3};
    const auto spectral = deconvolve_spectral(profiles, 2, kernel, 1);
    const FitResult r = fit(profiles, 2, kernel, 1, FitMode::separate);
    double se_spec = 0.0, se_fit = 0.0;
    for (std::size_t n = 0; n < 50; ++n) {
      se_spec += std::pow(spectral[n].locations(0, 0) - truth[n], 2);
      se_fit += std::pow(r.params.locations[n](0, 0) - truth[n], 2);
    }
    CHECK(se_fit < se_spec);
  }

  TEST_CASE("separate mode on one profile equals shared mode") {
    SimulationOptions o;
    o.count = 1;
    o.seed = 9;
    o.noise_sd = 0.05;
    const Dataset ds = simulate(planar_example(), o);
    const Kernel kernel{0.3};
    const FitResult a = fit(ds.profiles, 2, kernel, 5, FitMode::separate);
    const FitResult b = fit(ds.profiles, 2, kernel, 5, FitMode::shared);
    CHECK(a.report.objective == b.report.objective);
    CHECK(a.params.locations[0] == b.params.locations[0]);
    CHECK(a.params.weights[0] == b.params.weights[0]);
  }

  TEST_CASE("fit is invariant under relabeling of the start") {
    SimulationOptions o;
    o.count = 4;
    o.seed = 21;
    o.noise_sd = 0.02;
    const Dataset ds = simulate(planar_example(), o);
    const Kernel kernel{0.3};
    const DeconvParams init = spectral_init(ds.profiles, 2, kernel, 5, FitMode::shared);
    DeconvParams perm = init;
    const std::vector<int> order = {2, 0, 4, 1, 3};
    for (auto& l : perm.locations) l = Eigen::MatrixXd(l(Eigen::all, order));
    for (int k = 0; k < 5; ++k) perm.weights[0][k] = init.weights[0][order[k]];
    const FitResult a = fit(ds.profiles, 2, kernel, 5, FitMode::shared, init);
    const FitResult b = fit(ds.profiles, 2, kernel, 5, FitMode::shared, perm);
    for (int k = 0; k < 5; ++k) {
      CHECK(std::abs(b.params.weights[0][k] - a.params.weights[0][order[k]]) < 1e-8);
      for (std::size_t n = 0; n < ds.size(); ++n)
        CHECK(std::abs(b.params.locations[n](0, k) - a.params.locations[n](0, order[k])) < 1e-8);
    }
  }

  TEST_CASE("shared weights are common; groups of fixed size") {
    SimulationOptions o;
    o.count = 6;
    o.seed = 2;
    const Dataset ds = simulate(planar_example(), o);
    FitOptions opts;
    opts.group_size = 4;
    const FitResult r = fit(ds.profiles, 2, Kernel{0.3}, 5, FitMode::shared, std::nullopt, opts);
    CHECK(r.params.weights.size() == 2);
    CHECK(r.report.groups.size() == 2);
    for (std::size_t n = 0; n < 6; ++n) CHECK(&r.params.weights_of(n) == &r.params.weights[n / 4]);
    const auto decs = to_deconvolutions(r.params, r.report, ds.profiles);
    CHECK(decs[0].amplitudes == decs[3].amplitudes);
  }

  TEST_CASE("image fit from the spectral start") {
    SimulationOptions o;
    o.count = 4;
    o.resolution = 64;
    o.seed = 3;
    o.keep_truth = true;
    o.noise_sd = 0.0;
    const Dataset ds = simulate(spatial_example(), o);
    const Kernel kernel{0.46};
    DeconvParams init = truth_params(ds, FitMode::separate);
    Rng rng = make_rng(4, 4);
    std::normal_distribution<double> jitter(0.0, 0.02);
    for (auto& l : init.locations)
      for (Eigen::Index j = 0; j < l.size(); ++j) l.data()[j] += jitter(rng);
    const FitResult r = fit(ds.profiles, 3, kernel, 4, FitMode::separate, init);
    CHECK(r.report.converged);
    for (std::size_t n = 0; n < ds.size(); ++n) CHECK((r.params.locations[n] - ds.truth->projected[n]).norm() < 1e-6);
  }

  TEST_CASE("noise level estimate") {
    SimulationOptions o;
    o.count = 20;
    o.seed = 6;
    o.noise_sd = 0.05;
    o.keep_truth = true;
    const Dataset ds = simulate(planar_example(), o);
    const double s = estimate_noise_sd(truth_params(ds, FitMode::shared), ds.profiles, Kernel{0.3});
    CHECK(s == doctest::Approx(0.05).epsilon(0.05));
  }

  TEST_CASE("shape mismatches are rejected") {
    SimulationOptions o;
    o.count = 2;
    o.seed = 6;
    o.keep_truth = true;
    const Dataset ds = simulate(planar_example(), o);
    DeconvParams p = truth_params(ds, FitMode::shared);
    p.locations.pop_back();
    CHECK_THROWS_AS(objective(p, ds.profiles, Kernel{0.3}), InvalidArgument);
  }
}

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "rtomo/error.hpp"
#include "rtomo/shape.hpp"
#include "rtomo/verify.hpp"

using namespace rtomo;

namespace {

Eigen::MatrixXd planar_centred() {
  Eigen::MatrixXd mu(2, 5);
  mu << 0.6, 0.6, -0.1, -1.0, -0.2, 0.0, 0.8, 0.1, -0.3, -0.6;
  mu.colwise() -= mu.rowwise().mean();
  return mu;
}

Eigen::MatrixXd random_orthogonal(int d, Rng& rng) {
  std::normal_distribution<double> z;
  Eigen::MatrixXd a(d, d);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = z(rng);
  return Eigen::HouseholderQR<Eigen::MatrixXd>(a).householderQ();
}

ProfileDeconvolution result(std::size_t index, Eigen::MatrixXd loc, std::vector<double> amp) {
  ProfileDeconvolution r;
  r.index = index;
  r.locations = std::move(loc);
  r.amplitudes = std::move(amp);
  return r;
}

// Exact projected (labeled, descending weight) locations for N rotations.
std::vector<ProfileDeconvolution> exact_projections(const Eigen::MatrixXd& v, const std::vector<double>& q,
                                                    std::size_t n, std::uint64_t seed) {
  const int d = static_cast<int>(v.rows());
  std::vector<ProfileDeconvolution> out;
  Rng rng = make_rng(seed, 0);
  for (std::size_t i = 0; i < n; ++i)
    out.push_back(result(i, project_points(v, sample_rotation(d, rng)), q));
  return out;
}

}  // namespace

TEST_SUITE("shape") {
  TEST_CASE("gram examples") {
    CHECK(gram(Eigen::MatrixXd::Zero(2, 4)).norm() == 0.0);
    const Eigen::MatrixXd g = gram(planar_centred());
    CHECK(g(0, 0) == doctest::Approx(0.3844));
    CHECK((g * Eigen::VectorXd::Ones(5)).norm() <= 1e-8 * g.norm());
    Rng rng = make_rng(1, 0);
    const Eigen::MatrixXd r = random_orthogonal(2, rng);
    CHECK((gram(r * planar_centred()) - g).norm() < 1e-12);
  }

  TEST_CASE("label sorts by amplitude") {
    Eigen::MatrixXd loc(1, 3);
    loc << 0.1, 0.2, 0.3;
    const auto l = label(result(0, loc, {1, 3, 2}));
    CHECK(l.amplitudes == std::vector<double>{3, 2, 1});
    CHECK(l.locations(0, 0) == 0.2);
    CHECK(l.locations(0, 2) == 0.1);
    CHECK(l.flags == 0);

    // Stored order does not matter.
    Eigen::MatrixXd loc2(1, 3);
    loc2 << 0.3, 0.1, 0.2;
    const auto l2 = label(result(0, loc2, {2, 1, 3}));
    CHECK(l2.locations == l.locations);
    CHECK(l2.amplitudes == l.amplitudes);
  }

  TEST_CASE("ties are broken lexicographically and flagged") {
    Eigen::MatrixXd loc(2, 3);
    loc << 0.5, -0.2, 0.1, 0.0, 1.0, 0.3;
    const auto l = label(result(0, loc, {2.0, 2.0 + 1e-12, 5.0}));
    CHECK((l.flags & kFlagAmbiguousLabel) != 0);
    CHECK(l.locations(0, 0) == 0.1);
    CHECK(l.locations(0, 1) == -0.2);
    CHECK(l.locations(0, 2) == 0.5);
  }

  TEST_CASE("image profiles are labeled in descending weight order") {
    Eigen::MatrixXd mu(3, 4);
    mu << 0.0, 0.7, -0.7, 0.0, 0.8, -0.4, -0.4, 0.0, -0.3, -0.3, -0.3, 0.8;
    const RadialMixture m(3, 0.46, {2, 3, 2.4, 4}, mu);
    SimulationOptions o;
    o.count = 30;
    o.resolution = 128;
    o.seed = 2;
    const auto labeled = label(deconvolve_spectral(simulate(m, o).profiles, 3, Kernel{0.46}, 4));
    int usable = 0;
    for (const auto& r : labeled) {
      if (!r.usable()) continue;
      ++usable;
      CHECK(std::is_sorted(r.amplitudes.rbegin(), r.amplitudes.rend()));
      // Usable images passed the axis-agreement check, which bounds the
      // amplitude disagreement by that fraction of the largest weight.
      const std::vector<double> expected = {4, 3, 2.4, 2};
      const double tol = SpectralOptions{}.axis_agreement_tol * 4;
      for (int k = 0; k < 4; ++k) CHECK(std::abs(r.amplitudes[k] - expected[k]) < tol);
    }
    CHECK(usable >= 15);
  }

  TEST_CASE("hybrid estimate basics") {
    CHECK_THROWS_AS(hybrid_estimate(std::vector<ProfileDeconvolution>{}, 2), InvalidArgument);
    // K=1: every projected location is 0 after centring.
    std::vector<ProfileDeconvolution> one = {result(0, Eigen::MatrixXd::Constant(1, 1, 0.4), {1.0})};
    const ShapeEstimate e = hybrid_estimate(one, 2);
    CHECK(e.gram.rows() == 1);
    CHECK(e.gram(0, 0) == 0.0);

    // Unusable profiles are skipped.
    auto two = exact_projections(planar_centred(), {5, 4, 3, 2, 1}, 3, 4);
    two[1].flags = kFlagFailed;
    CHECK(hybrid_estimate(two, 2).profiles_used == 2);
  }

  TEST_CASE("hybrid estimate is unbiased (Monte Carlo)") {
    for (int d : {2, 3}) {
      Eigen::MatrixXd v;
      std::vector<double> q;
      if (d == 2) {
        v = planar_centred();
        q = {1, 2, 3, 4, 5};
      } else {
        v.resize(3, 4);
        v << 0.0, 0.7, -0.7, 0.0, 0.8, -0.4, -0.4, 0.0, -0.3, -0.3, -0.3, 0.8;
        v.colwise() -= v.rowwise().mean();
        q = {2, 3, 2.4, 4};
      }
      const std::size_t n = 100000;
      auto profiles = exact_projections(v, q, n, 10 + static_cast<std::uint64_t>(d));
      const ShapeEstimate e = hybrid_estimate(label(profiles), d);
      // Per-entry standard error from the per-profile Gram entries.
      std::vector<int> order(q.size());
      std::iota(order.begin(), order.end(), 0);
      std::sort(order.begin(), order.end(), [&](int a, int b) { return q[a] > q[b]; });
      const Eigen::MatrixXd vs = v(Eigen::all, order);
      const Eigen::MatrixXd g = gram(vs);
      const double factor = static_cast<double>(d) / (d - 1);
      Eigen::MatrixXd s2 = Eigen::MatrixXd::Zero(g.rows(), g.cols());
      for (const auto& p : label(profiles)) {
        Eigen::MatrixXd c = p.locations;
        c.colwise() -= c.rowwise().mean();
        s2 += (factor * gram(c) - g).cwiseAbs2();
      }
      const Eigen::MatrixXd se = (s2 / static_cast<double>(n) / static_cast<double>(n)).cwiseSqrt();
      for (Eigen::Index i = 0; i < g.rows(); ++i)
        for (Eigen::Index j = 0; j < g.cols(); ++j) CHECK(std::abs(e.gram(i, j) - g(i, j)) <= 3 * se(i, j) + 1e-15);
      for (std::size_t k = 0; k < q.size(); ++k) CHECK(e.weights[k] == doctest::Approx(q[static_cast<std::size_t>(order[k])]).epsilon(1e-9));
    }
  }

  TEST_CASE("invariance under in-plane transforms and profile order") {
    const Eigen::MatrixXd v = planar_centred();
    auto profiles = label(exact_projections(v, {5, 4, 3, 2, 1}, 40, 3));
    const ShapeEstimate base = hybrid_estimate(profiles, 2);
    Rng rng = make_rng(8, 0);
    auto flipped = profiles;
    for (auto& p : flipped)
      if (std::bernoulli_distribution(0.5)(rng)) p.locations *= -1.0;
    CHECK((hybrid_estimate(flipped, 2).gram - base.gram).norm() < 1e-12);
    auto shuffled = profiles;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    CHECK((hybrid_estimate(shuffled, 2).gram - base.gram).norm() < 1e-12);

    Eigen::MatrixXd v3(3, 4);
    v3 << 0.0, 0.7, -0.7, 0.0, 0.8, -0.4, -0.4, 0.0, -0.3, -0.3, -0.3, 0.8;
    v3.colwise() -= v3.rowwise().mean();
    auto images = label(exact_projections(v3, {4, 3, 2.4, 2}, 40, 4));
    const ShapeEstimate b3 = hybrid_estimate(images, 3);
    for (auto& p : images) p.locations = random_orthogonal(2, rng) * p.locations;
    CHECK((hybrid_estimate(images, 3).gram - b3.gram).norm() < 1e-12);
  }

  TEST_CASE("shared weights override the amplitude mean") {
    auto profiles = label(exact_projections(planar_centred(), {5, 4, 3, 2, 1}, 5, 3));
    const ShapeEstimate e = hybrid_estimate(profiles, 2, std::vector<double>{9, 7, 5, 3, 1});
    CHECK(e.weights == std::vector<double>{9, 7, 5, 3, 1});
  }

  TEST_CASE("factor") {
    const Configuration zero = factor(Eigen::MatrixXd::Zero(4, 4), 3);
    CHECK(zero.points.norm() == 0.0);
    CHECK(zero.effective_rank == 0);

    Rng rng = make_rng(6, 0);
    std::normal_distribution<double> z;
    for (int d : {2, 3}) {
      Eigen::MatrixXd v(d, 6);
      for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] = z(rng);
      v.colwise() -= v.rowwise().mean();
      const Configuration c = factor(gram(v), d);
      CHECK((gram(c.points) - gram(v)).norm() < 1e-10);
      CHECK(c.points.rowwise().sum().norm() < 1e-12);
      CHECK(procrustes(c.points, v).residual < 1e-10);
      CHECK(c.effective_rank == d);
    }
    // Rank above d is reported, top d still returned.
    Eigen::MatrixXd v(3, 5);
    for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] = z(rng);
    v.colwise() -= v.rowwise().mean();
    const Configuration c = factor(gram(v), 2);
    CHECK(c.effective_rank == 3);
    CHECK(c.points.rows() == 2);
  }

  TEST_CASE("procrustes") {
    Rng rng = make_rng(7, 0);
    std::normal_distribution<double> z;
    Eigen::MatrixXd a(3, 5);
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = z(rng);
    const ProcrustesResult self = procrustes(a, a);
    CHECK(self.residual < 1e-12);
    CHECK((self.rotation - Eigen::Matrix3d::Identity()).norm() < 1e-10);
    const Eigen::MatrixXd q0 = random_orthogonal(3, rng);
    CHECK(procrustes(a, q0 * a).residual < 1e-10);

    Eigen::MatrixXd noise(3, 5);
    for (Eigen::Index i = 0; i < noise.size(); ++i) noise.data()[i] = 1e-4 * z(rng);
    const double r = procrustes(a, q0 * a + noise).residual;
    CHECK(r <= noise.norm() + 1e-12);
    CHECK(r > 0.3 * noise.norm());

    const Eigen::MatrixXd a2 = planar_centred();
    Eigen::MatrixXd b2 = random_orthogonal(2, rng) * a2;
    for (Eigen::Index i = 0; i < b2.size(); ++i) b2.data()[i] += 0.01 * z(rng);
    CHECK(procrustes(a2, b2).residual == doctest::Approx(oracle::procrustes_residual_2d(a2, b2)).epsilon(1e-6));
    CHECK_THROWS_AS(procrustes(a, a2), InvalidArgument);
  }

  TEST_CASE("consistency rate of the estimator") {
    const Eigen::MatrixXd v = planar_centred();
    const Eigen::MatrixXd g = gram(v);
    std::vector<double> logn, loge;
    for (std::size_t n : {100u, 1000u, 10000u}) {
      double sum = 0.0;
      const int reps = 16;
      for (int r = 0; r < reps; ++r)
        sum += (projected_gram_estimate(v, n, 1000 * n + static_cast<std::uint64_t>(r)) - g).squaredNorm();
      logn.push_back(std::log(static_cast<double>(n)));
      loge.push_back(0.5 * std::log(sum / reps));
    }
    const double slope = (loge.back() - loge.front()) / (logn.back() - logn.front());
    CHECK(std::abs(slope + 0.5) < 0.1);
  }
}

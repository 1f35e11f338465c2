#pragma once

// Template implementation for verify.hpp.

#include <algorithm>
#include <cmath>

#include "rtomo/error.hpp"
#include "rtomo/random.hpp"

namespace rtomo {

template <class Draw>
MomentSummary monte_carlo_moments(std::size_t samples, std::uint64_t seed, Eigen::Index dim,
                                  std::size_t chunk, Draw&& draw, Exec exec) {
  if (samples < 2) throw InvalidArgument("Monte Carlo needs at least two samples");
  if (chunk == 0) throw InvalidArgument("chunk size must be positive");
  const std::size_t chunks = (samples + chunk - 1) / chunk;
  const auto chunk_size = [&](std::size_t c) { return std::min(chunk, samples - c * chunk); };

  std::vector<Eigen::VectorXd> sums(chunks);
  for_each_index(exec, chunks, [&](std::size_t c) {
    Rng rng = make_rng(seed, c);
    Eigen::VectorXd x(dim);
    Eigen::VectorXd s = Eigen::VectorXd::Zero(dim);
    for (std::size_t i = 0; i < chunk_size(c); ++i) {
      draw(rng, x);
      s += x;
    }
    sums[c] = std::move(s);
  });
  const double count = static_cast<double>(samples);
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
  for (const auto& s : sums) mean += s;
  mean /= count;

  struct Central {
    Eigen::VectorXd s1, s3, s4;
    Eigen::MatrixXd p, q;
  };
  std::vector<Central> parts(chunks);
  for_each_index(exec, chunks, [&](std::size_t c) {
    Rng rng = make_rng(seed, c);
    Eigen::VectorXd x(dim);
    Central acc{Eigen::VectorXd::Zero(dim), Eigen::VectorXd::Zero(dim), Eigen::VectorXd::Zero(dim),
                Eigen::MatrixXd::Zero(dim, dim), Eigen::MatrixXd::Zero(dim, dim)};
    Eigen::VectorXd y(dim);
    for (std::size_t i = 0; i < chunk_size(c); ++i) {
      draw(rng, x);
      y = x - mean;
      for (Eigen::Index a = 0; a < dim; ++a) {
        const double ya = y[a], ya2 = ya * ya;
        acc.s1[a] += ya;
        acc.s3[a] += ya2 * ya;
        acc.s4[a] += ya2 * ya2;
        for (Eigen::Index b = 0; b < dim; ++b) {
          const double v = ya * y[b];
          acc.p(a, b) += v;
          acc.q(a, b) += v * v;
        }
      }
    }
    parts[c] = std::move(acc);
  });
  Central total{Eigen::VectorXd::Zero(dim), Eigen::VectorXd::Zero(dim), Eigen::VectorXd::Zero(dim),
                Eigen::MatrixXd::Zero(dim, dim), Eigen::MatrixXd::Zero(dim, dim)};
  for (const auto& p : parts) {
    total.s1 += p.s1;
    total.s3 += p.s3;
    total.s4 += p.s4;
    total.p += p.p;
    total.q += p.q;
  }

  MomentSummary out;
  out.samples = samples;
  out.mean = mean;
  const Eigen::MatrixXd second = total.p / count;  // E[y y^T]
  out.cov = total.p / (count - 1.0);
  out.cov_se = ((total.q / count - second.array().square().matrix()).cwiseMax(0.0) / count).cwiseSqrt();
  out.mean_se = (out.cov.diagonal() / count).cwiseSqrt();
  out.skewness.resize(dim);
  out.excess_kurtosis.resize(dim);
  for (Eigen::Index a = 0; a < dim; ++a) {
    const double m2 = second(a, a);
    out.skewness[a] = m2 > 0.0 ? (total.s3[a] / count) / std::pow(m2, 1.5) : 0.0;
    out.excess_kurtosis[a] = m2 > 0.0 ? (total.s4[a] / count) / (m2 * m2) - 3.0 : 0.0;
  }
  return out;
}

}  // namespace rtomo

#include "rtomo/verify.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "rtomo/error.hpp"
#include "rtomo/geometry.hpp"
#include "rtomo/random.hpp"

namespace rtomo {
namespace {

// Upper-triangular (i <= j) entries, row by row.
Eigen::Index vech_size(Eigen::Index k) { return k * (k + 1) / 2; }

void vech(const Eigen::MatrixXd& g, Eigen::VectorXd& out) {
  Eigen::Index idx = 0;
  for (Eigen::Index i = 0; i < g.rows(); ++i)
    for (Eigen::Index j = i; j < g.cols(); ++j) out[idx++] = g(i, j);
}

std::vector<std::pair<Eigen::Index, Eigen::Index>> vech_pairs(Eigen::Index k) {
  std::vector<std::pair<Eigen::Index, Eigen::Index>> pairs;
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = i; j < k; ++j) pairs.emplace_back(i, j);
  return pairs;
}

std::string entry_name(const char* symbol, Eigen::Index i, Eigen::Index j) {
  return std::string(symbol) + "[" + std::to_string(i) + "," + std::to_string(j) + "]";
}

std::string cov_name(const char* symbol, std::pair<Eigen::Index, Eigen::Index> a,
                     std::pair<Eigen::Index, Eigen::Index> b) {
  return "cov(" + entry_name(symbol, a.first, a.second) + ", " +
         entry_name(symbol, b.first, b.second) + ")";
}

void require_centred(const Eigen::MatrixXd& v) {
  if (v.cols() > 0 && v.rowwise().mean().norm() > 1e-9 * std::max(1.0, v.norm()))
    throw InvalidArgument("configuration must have zero centroid");
}

// Cov(Gamma_ab, Gamma_cd) under the alternative constants: var(diag) = 1/9,
// var(offdiag) = 1/15, cov(diag_i, diag_j) = -1/18, all else uncorrelated.
double alt_gamma_cov(Eigen::Index a, Eigen::Index b, Eigen::Index c, Eigen::Index d) {
  const bool diag1 = a == b, diag2 = c == d;
  if (diag1 && diag2) return a == c ? 1.0 / 9.0 : -1.0 / 18.0;
  if (!diag1 && !diag2 && ((a == c && b == d) || (a == d && b == c))) return 1.0 / 15.0;
  return 0.0;
}

// Column-stacking vec index of (row, col) in a dim x dim matrix.
Eigen::Index vec_index(Eigen::Index row, Eigen::Index col, Eigen::Index dim) { return row + dim * col; }

// (V^T (x) V^T) C (V (x) V) restricted to entry pairs of the K x K result.
double kronecker_cov(const Eigen::MatrixXd& v, const Eigen::MatrixXd& c,
                     std::pair<Eigen::Index, Eigen::Index> p, std::pair<Eigen::Index, Eigen::Index> q) {
  const Eigen::Index d = v.rows();
  double total = 0.0;
  for (Eigen::Index a = 0; a < d; ++a)
    for (Eigen::Index b = 0; b < d; ++b) {
      const double left = v(a, p.first) * v(b, p.second);
      if (left == 0.0) continue;
      for (Eigen::Index e = 0; e < d; ++e)
        for (Eigen::Index f = 0; f < d; ++f)
          total += left * c(vec_index(a, b, d), vec_index(e, f, d)) * v(e, q.first) * v(f, q.second);
    }
  return total;
}

}  // namespace

void MonteCarloReport::add(MonteCarloEntry entry, double sigmas) {
  entry.pass = std::abs(entry.empirical - entry.reference) <= sigmas * entry.standard_error;
  pass = pass && entry.pass;
  entries.push_back(std::move(entry));
}

MonteCarloReport check_projection_identity(const Eigen::MatrixXd& v, std::size_t samples,
                                           std::uint64_t seed, Exec exec) {
  const int d = static_cast<int>(v.rows());
  if (d != 2 && d != 3) throw InvalidArgument("configuration dimension must be 2 or 3");
  require_centred(v);
  const Eigen::Index k = v.cols();

  const MomentSummary mc = monte_carlo_moments(
      samples, seed, vech_size(k), kMonteCarloChunk,
      [&](Rng& rng, Eigen::VectorXd& out) {
        const Rotation a = sample_rotation(d, rng);
        vech(gram(project_points(v, a)), out);
      },
      exec);

  MonteCarloReport report;
  report.quantity = "E[Gram(HAV)] vs (d-1)/d Gram(V), d=" + std::to_string(d);
  report.reference_source = "shape inversion identity";
  report.seed = seed;
  report.samples = samples;
  const Eigen::MatrixXd expected = (static_cast<double>(d - 1) / d) * gram(v);
  const auto pairs = vech_pairs(k);
  for (std::size_t e = 0; e < pairs.size(); ++e) {
    const auto [i, j] = pairs[e];
    report.add({entry_name("G", i, j), mc.mean[static_cast<Eigen::Index>(e)], expected(i, j),
                mc.mean_se[static_cast<Eigen::Index>(e)], {}, true});
  }
  return report;
}

Eigen::MatrixXd gamma_covariance_oracle(int d, double c) {
  // u uniform on S^{d-1}: E[u_a u_b] = delta_ab / d,
  // E[u_a u_b u_e u_f] = (d_ab d_ef + d_ae d_bf + d_af d_be) / (d (d + 2)).
  const auto delta = [](Eigen::Index x, Eigen::Index y) { return x == y ? 1.0 : 0.0; };
  const double second = 1.0 / d, fourth = 1.0 / (d * (d + 2.0));
  Eigen::MatrixXd cov(d * d, d * d);
  for (Eigen::Index a = 0; a < d; ++a)
    for (Eigen::Index b = 0; b < d; ++b)
      for (Eigen::Index e = 0; e < d; ++e)
        for (Eigen::Index f = 0; f < d; ++f) {
          const double m4 = fourth * (delta(a, b) * delta(e, f) + delta(a, e) * delta(b, f) +
                                      delta(a, f) * delta(b, e));
          const double m2 = second * delta(a, b) * second * delta(e, f);
          cov(vec_index(a, b, d), vec_index(e, f, d)) = c * c * (m4 - m2);
        }
  return cov;
}

MonteCarloReport estimate_gamma_covariance(std::size_t samples, std::uint64_t seed, Exec exec) {
  constexpr int d = 3;
  const MomentSummary mc = monte_carlo_moments(
      samples, seed, vech_size(d), kMonteCarloChunk,
      [&](Rng& rng, Eigen::VectorXd& out) {
        const Eigen::MatrixXd a = sample_rotation(d, rng).matrix();
        const Eigen::MatrixXd ha = a.topRows(d - 1);
        vech(2.0 * ha.transpose() * ha, out);
      },
      exec);

  MonteCarloReport report;
  report.quantity = "Cov[vec Gamma], Gamma = 2 A^T H^T H A, A ~ Haar SO(3)";
  report.reference_source = "sphere moments E[u_i^2]=1/3, E[u_i^4]=1/5, E[u_i^2 u_j^2]=1/15";
  report.seed = seed;
  report.samples = samples;

  const Eigen::MatrixXd oracle = gamma_covariance_oracle(d, 2.0);
  const auto pairs = vech_pairs(d);
  for (std::size_t e = 0; e < pairs.size(); ++e) {
    const auto [i, j] = pairs[e];
    report.add({"E" + entry_name("Gamma", i, j), mc.mean[static_cast<Eigen::Index>(e)],
                i == j ? 4.0 / 3.0 : 0.0, mc.mean_se[static_cast<Eigen::Index>(e)], {}, true});
  }
  for (std::size_t e1 = 0; e1 < pairs.size(); ++e1)
    for (std::size_t e2 = e1; e2 < pairs.size(); ++e2) {
      const auto p = pairs[e1], q = pairs[e2];
      const auto i1 = static_cast<Eigen::Index>(e1), i2 = static_cast<Eigen::Index>(e2);
      MonteCarloEntry entry{cov_name("Gamma", p, q), mc.cov(i1, i2),
                            oracle(vec_index(p.first, p.second, d), vec_index(q.first, q.second, d)),
                            mc.cov_se(i1, i2), {}, true};
      entry.extra.emplace_back("alt-constants", alt_gamma_cov(p.first, p.second, q.first, q.second));
      report.add(std::move(entry));
    }
  return report;
}

MonteCarloReport gram_clt_check(const RadialMixture& m, const GramCltOptions& options, Exec exec) {
  if (options.profiles < 1 || options.replications < 2 || options.gamma_samples < 2)
    throw InvalidArgument("gram_clt_check needs N >= 1, R >= 2 and gamma samples >= 2");
  const int d = m.dim();
  const Eigen::MatrixXd& v = m.locations();
  const Eigen::Index k = v.cols();
  const double factor = static_cast<double>(d) / (d - 1);
  const Eigen::MatrixXd g = gram(v);
  const Eigen::Index q = vech_size(k);
  const double root_n = std::sqrt(static_cast<double>(options.profiles));

  // Empirical side: R replications of sqrt(N) vech(Ghat - G).
  const MomentSummary emp = monte_carlo_moments(
      options.replications, options.seed, q, 16,
      [&](Rng& rng, Eigen::VectorXd& out) {
        Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(k, k);
        for (std::size_t n = 0; n < options.profiles; ++n) sum += gram(project_points(v, sample_rotation(d, rng)));
        vech(root_n * (factor * sum / static_cast<double>(options.profiles) - g), out);
      },
      exec);

  // Reference side: draws of Gamma' = factor A^T H^T H A; the first d*d
  // coordinates are vec(Gamma'), the rest vech(V^T Gamma' V) for the SEs.
  const Eigen::Index dd = d * d;
  const MomentSummary ref = monte_carlo_moments(
      options.gamma_samples, mix64(options.seed ^ 0x6a09e667f3bcc909ull), dd + q, kMonteCarloChunk,
      [&](Rng& rng, Eigen::VectorXd& out) {
        const Eigen::MatrixXd a = sample_rotation(d, rng).matrix();
        const Eigen::MatrixXd ha = a.topRows(d - 1);
        const Eigen::MatrixXd gamma = factor * ha.transpose() * ha;
        for (Eigen::Index col = 0; col < d; ++col)
          for (Eigen::Index row = 0; row < d; ++row) out[vec_index(row, col, d)] = gamma(row, col);
        Eigen::VectorXd tail(q);
        vech(v.transpose() * gamma * v, tail);
        out.tail(q) = tail;
      },
      exec);
  const Eigen::MatrixXd cov_gamma = ref.cov.topLeftCorner(dd, dd);
  const Eigen::MatrixXd oracle = gamma_covariance_oracle(d, factor);
  Eigen::MatrixXd alt(dd, dd);
  for (Eigen::Index a = 0; a < d; ++a)
    for (Eigen::Index b = 0; b < d; ++b)
      for (Eigen::Index e = 0; e < d; ++e)
        for (Eigen::Index f = 0; f < d; ++f)
          alt(vec_index(a, b, d), vec_index(e, f, d)) = alt_gamma_cov(a, b, e, f);

  MonteCarloReport report;
  report.quantity = "Cov[sqrt(N) vech(Ghat - G)], N=" + std::to_string(options.profiles) +
                    ", R=" + std::to_string(options.replications);
  report.reference_source = "(V^T x V^T) Cov[vec Gamma'] (V x V), Gamma' = d/(d-1) A^T H^T H A, "
                            "Cov estimated from " + std::to_string(options.gamma_samples) + " draws";
  report.seed = options.seed;
  report.samples = options.replications;

  const auto pairs = vech_pairs(k);
  for (std::size_t e1 = 0; e1 < pairs.size(); ++e1)
    for (std::size_t e2 = e1; e2 < pairs.size(); ++e2) {
      const auto i1 = static_cast<Eigen::Index>(e1), i2 = static_cast<Eigen::Index>(e2);
      const double se_emp = emp.cov_se(i1, i2), se_ref = ref.cov_se(dd + i1, dd + i2);
      MonteCarloEntry entry{cov_name("G", pairs[e1], pairs[e2]), emp.cov(i1, i2),
                            kronecker_cov(v, cov_gamma, pairs[e1], pairs[e2]),
                            std::sqrt(se_emp * se_emp + se_ref * se_ref), {}, true};
      entry.extra.emplace_back("sphere-oracle", kronecker_cov(v, oracle, pairs[e1], pairs[e2]));
      entry.extra.emplace_back("alt-constants", kronecker_cov(v, alt, pairs[e1], pairs[e2]));
      report.add(std::move(entry));
    }

  double max_skew = 0.0, max_kurt = 0.0;
  for (Eigen::Index e = 0; e < q; ++e) {
    if (emp.cov(e, e) <= 1e-300) continue;  // degenerate coordinate (K = 1)
    max_skew = std::max(max_skew, std::abs(emp.skewness[e]));
    max_kurt = std::max(max_kurt, std::abs(emp.excess_kurtosis[e]));
  }
  report.diagnostics.emplace_back("max |skewness|", max_skew);
  report.diagnostics.emplace_back("max |excess kurtosis|", max_kurt);
  if (max_skew >= 0.25 || max_kurt >= 0.5) report.pass = false;
  return report;
}

Eigen::MatrixXd fisher_matrix(const RadialMixture& m, double noise_sd, std::size_t samples,
                              std::uint64_t seed, Exec exec) {
  if (!(noise_sd > 0.0)) throw InvalidArgument("noise standard deviation must be positive");
  const int d = m.dim();
  const Eigen::Index k = m.size();
  const double var2 = 2.0 * m.sigma() * m.sigma();  // variance of the overlap Gaussian
  const double norm = std::pow(std::numbers::pi * 2.0 * var2, -0.5 * (d - 1));
  const MomentSummary mc = monte_carlo_moments(
      samples, seed, vech_size(k), kMonteCarloChunk,
      [&](Rng& rng, Eigen::VectorXd& out) {
        const Eigen::MatrixXd p = project_points(m.locations(), sample_rotation(d, rng));
        Eigen::Index idx = 0;
        for (Eigen::Index i = 0; i < k; ++i)
          for (Eigen::Index j = i; j < k; ++j)
            out[idx++] = norm * std::exp(-(p.col(i) - p.col(j)).squaredNorm() / (2.0 * var2));
      },
      exec);
  Eigen::MatrixXd f(k, k);
  Eigen::Index idx = 0;
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = i; j < k; ++j) {
      f(i, j) = f(j, i) = mc.mean[idx++] / (2.0 * std::numbers::pi * noise_sd * noise_sd);
    }
  return f;
}

Eigen::MatrixXd projected_gram_estimate(const Eigen::MatrixXd& v, std::size_t profiles,
                                        std::uint64_t seed, Exec exec) {
  const int d = static_cast<int>(v.rows());
  if (profiles < 1) throw InvalidArgument("need at least one profile");
  const Eigen::Index k = v.cols();
  const std::size_t chunks = (profiles + kMonteCarloChunk - 1) / kMonteCarloChunk;
  std::vector<Eigen::MatrixXd> sums(chunks);
  for_each_index(exec, chunks, [&](std::size_t c) {
    Rng rng = make_rng(seed, c);
    const std::size_t count = std::min(kMonteCarloChunk, profiles - c * kMonteCarloChunk);
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(k, k);
    for (std::size_t i = 0; i < count; ++i) {
      Eigen::MatrixXd p = project_points(v, sample_rotation(d, rng));
      p.colwise() -= p.rowwise().mean();
      s += gram(p);
    }
    sums[c] = std::move(s);
  });
  Eigen::MatrixXd total = Eigen::MatrixXd::Zero(k, k);
  for (const auto& s : sums) total += s;
  return (static_cast<double>(d) / (d - 1)) * total / static_cast<double>(profiles);
}

BootstrapResult bootstrap(std::span<const ProfileDeconvolution> labeled, int d,
                          const Configuration& point,
                          const std::vector<std::vector<std::size_t>>& resamples,
                          const std::optional<std::vector<double>>& shared_weights, Exec exec) {
  if (resamples.empty()) throw InvalidArgument("bootstrap needs B >= 1");
  BootstrapResult out;
  out.resamples = resamples;
  out.replicates.resize(resamples.size());
  out.residuals.resize(resamples.size());
  for_each_index(exec, resamples.size(), [&](std::size_t b) {
    const ShapeEstimate est = hybrid_estimate(labeled, d, resamples[b], shared_weights);
    Configuration conf = factor(est, d);
    const ProcrustesResult align = procrustes(conf.points, point.points);
    conf.points = align.rotation * conf.points;
    out.replicates[b] = std::move(conf);
    out.residuals[b] = align.residual;
  });
  const Eigen::Index k = point.points.cols();
  out.spread = Eigen::VectorXd::Zero(k);
  for (const auto& rep : out.replicates)
    out.spread += (rep.points - point.points).colwise().squaredNorm().transpose();
  out.spread = (out.spread / static_cast<double>(out.replicates.size())).cwiseSqrt();
  return out;
}

BootstrapResult bootstrap(std::span<const ProfileDeconvolution> labeled, int d,
                          const Configuration& point, std::size_t replicates, std::uint64_t seed,
                          const std::optional<std::vector<double>>& shared_weights, Exec exec) {
  if (replicates < 1) throw InvalidArgument("bootstrap needs B >= 1");
  if (labeled.empty()) throw InvalidArgument("bootstrap needs cached deconvolutions");
  std::vector<std::vector<std::size_t>> resamples(replicates);
  for (std::size_t b = 0; b < replicates; ++b) {
    Rng rng = make_rng(seed, b);
    std::uniform_int_distribution<std::size_t> pick(0, labeled.size() - 1);
    resamples[b].resize(labeled.size());
    for (auto& idx : resamples[b]) idx = pick(rng);
  }
  return bootstrap(labeled, d, point, resamples, shared_weights, exec);
}

}  // namespace rtomo

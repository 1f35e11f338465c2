#include "rtomo/shape.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Eigenvalues>

#include "rtomo/error.hpp"

namespace rtomo {

Eigen::MatrixXd gram(const Eigen::MatrixXd& locations) {
  return locations.transpose() * locations;
}

ProfileDeconvolution label(const ProfileDeconvolution& result) {
  if (!result.usable()) return result;
  const auto k = static_cast<int>(result.amplitudes.size());
  const auto& amp = result.amplitudes;
  const auto& loc = result.locations;
  const double scale = k ? *std::max_element(amp.begin(), amp.end()) : 0.0;
  const auto tied = [&](int i, int j) { return std::abs(amp[i] - amp[j]) <= 1e-9 * scale; };
  const auto lex_less = [&](int i, int j) {
    for (Eigen::Index a = 0; a < loc.rows(); ++a)
      if (loc(a, i) != loc(a, j)) return loc(a, i) < loc(a, j);
    return false;
  };

  // Exact descending order first, then runs of tolerance-tied neighbours are
  // re-sorted lexicographically so the result never depends on input order.
  std::vector<int> order(static_cast<std::size_t>(k));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int i, int j) {
    if (amp[i] != amp[j]) return amp[i] > amp[j];
    return lex_less(i, j);
  });
  bool ambiguous = false;
  for (int start = 0; start < k;) {
    int end = start + 1;
    while (end < k && tied(order[end - 1], order[end])) ++end;
    if (end - start > 1) {
      ambiguous = true;
      std::sort(order.begin() + start, order.begin() + end, lex_less);
    }
    start = end;
  }

  ProfileDeconvolution out = result;
  for (int r = 0; r < k; ++r) {
    out.locations.col(r) = loc.col(order[r]);
    out.amplitudes[r] = amp[order[r]];
  }
  if (ambiguous) out.flags |= kFlagAmbiguousLabel;
  return out;
}

std::vector<ProfileDeconvolution> label(const std::vector<ProfileDeconvolution>& results) {
  std::vector<ProfileDeconvolution> out;
  out.reserve(results.size());
  for (const auto& r : results) out.push_back(label(r));
  return out;
}

ShapeEstimate hybrid_estimate(std::span<const ProfileDeconvolution> labeled, int d,
                              std::span<const std::size_t> indices,
                              const std::optional<std::vector<double>>& shared_weights) {
  if (d < 2) throw InvalidArgument("dimension must be at least 2");
  Eigen::Index k = -1;
  Eigen::MatrixXd sum;
  std::vector<double> amp_sum;
  std::size_t used = 0;
  for (std::size_t idx : indices) {
    if (idx >= labeled.size()) throw InvalidArgument("resample index out of range");
    const ProfileDeconvolution& r = labeled[idx];
    if (!r.usable()) continue;
    if (k < 0) {
      k = r.locations.cols();
      sum = Eigen::MatrixXd::Zero(k, k);
      amp_sum.assign(static_cast<std::size_t>(k), 0.0);
    }
    if (r.locations.cols() != k) throw InvalidArgument("profiles disagree on component count");
    Eigen::MatrixXd centred = r.locations;
    if (k > 0) centred.colwise() -= centred.rowwise().mean();
    sum += gram(centred);
    for (Eigen::Index c = 0; c < k; ++c) amp_sum[c] += r.amplitudes[c];
    ++used;
  }
  if (used == 0) throw InvalidArgument("hybrid_estimate: no usable profiles");

  Eigen::MatrixXd g = (static_cast<double>(d) / (d - 1)) * sum / static_cast<double>(used);
  g = 0.5 * (g + g.transpose()).eval();

  std::vector<double> weights(static_cast<std::size_t>(k));
  if (shared_weights) {
    if (shared_weights->size() != weights.size()) throw InvalidArgument("shared weight count mismatch");
    weights = *shared_weights;
  } else {
    for (Eigen::Index c = 0; c < k; ++c) weights[c] = amp_sum[c] / static_cast<double>(used);
  }

  std::vector<int> order(weights.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return weights[a] > weights[b]; });
  ShapeEstimate est;
  est.gram.resize(k, k);
  est.weights.resize(weights.size());
  for (Eigen::Index i = 0; i < k; ++i) {
    est.weights[i] = weights[order[i]];
    for (Eigen::Index j = 0; j < k; ++j) est.gram(i, j) = g(order[i], order[j]);
  }
  est.profiles_used = used;
  return est;
}

ShapeEstimate hybrid_estimate(std::span<const ProfileDeconvolution> labeled, int d,
                              const std::optional<std::vector<double>>& shared_weights) {
  std::vector<std::size_t> all(labeled.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return hybrid_estimate(labeled, d, all, shared_weights);
}

Configuration factor(const Eigen::MatrixXd& g_in, int d) {
  if (g_in.rows() != g_in.cols()) throw InvalidArgument("Gram matrix must be square");
  const Eigen::Index k = g_in.rows();
  if (k < 1) throw InvalidArgument("factor needs K >= 1");
  const Eigen::MatrixXd g = 0.5 * (g_in + g_in.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(g);
  const Eigen::VectorXd& lambda = eig.eigenvalues();  // ascending
  const Eigen::MatrixXd& u = eig.eigenvectors();

  Configuration out;
  const double trace = std::max(lambda.cwiseMax(0.0).sum(), 0.0);
  for (Eigen::Index i = 0; i < k; ++i)
    if (lambda[i] > 1e-6 * trace && trace > 0.0) ++out.effective_rank;

  out.points = Eigen::MatrixXd::Zero(d, k);
  for (int r = 0; r < d && r < k; ++r) {
    const Eigen::Index col = k - 1 - r;
    Eigen::VectorXd v = u.col(col);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v[arg] < 0.0) v = -v;
    out.points.row(r) = std::sqrt(std::max(lambda[col], 0.0)) * v.transpose();
  }
  out.points.colwise() -= out.points.rowwise().mean();
  return out;
}

Configuration factor(const ShapeEstimate& estimate, int d) { return factor(estimate.gram, d); }

ProcrustesResult procrustes(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw InvalidArgument("procrustes shape mismatch");
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(b * a.transpose(), Eigen::ComputeFullU | Eigen::ComputeFullV);
  ProcrustesResult out;
  out.rotation = svd.matrixU() * svd.matrixV().transpose();
  out.residual = (out.rotation * a - b).norm();
  return out;
}

double max_point_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const ProcrustesResult p = procrustes(a, b);
  return (p.rotation * a - b).colwise().norm().maxCoeff();
}

}  // namespace rtomo

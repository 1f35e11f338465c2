#include "rtomo/mle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include <Eigen/Eigenvalues>

#include "rtomo/error.hpp"
#include "rtomo/shape.hpp"

namespace rtomo {
namespace {

// Residuals and Jacobian blocks of one profile. Parameter order inside the
// location block is (component k, axis a) -> k*m + a.
struct ProfileTerms {
  double sse = 0.0;
  Eigen::MatrixXd a;    // J_mu^T J_mu
  Eigen::MatrixXd b;    // J_mu^T J_q
  Eigen::MatrixXd dq;   // J_q^T J_q
  Eigen::VectorXd gmu;  // J_mu^T r
  Eigen::VectorXd gq;   // J_q^T r
};

// Kernel values on the lattice: one column per component, one row per
// lattice point, plus per-axis offsets (x_t - mu) / sigma^2.
ProfileTerms profile_terms(const Profile& p, const Kernel& kernel, const Eigen::MatrixXd& mu,
                           const std::vector<double>& q, bool with_jacobian) {
  const int m = p.lattice.axes();
  const auto k = static_cast<int>(q.size());
  const int t = p.lattice.points();
  const double var = kernel.sigma * kernel.sigma;
  const double inv2var = 1.0 / (2.0 * var);

  // Per-axis 1D Gaussian tables g[a](i, c) = exp(-(x_i - mu_ac)^2 / 2 var).
  Eigen::MatrixXd g[2];
  for (int a = 0; a < m; ++a) {
    g[a].resize(t, k);
    for (int i = 0; i < t; ++i) {
      const double x = p.lattice.coordinate(i);
      for (int c = 0; c < k; ++c) {
        const double dx = x - mu(a, c);
        g[a](i, c) = std::exp(-dx * dx * inv2var);
      }
    }
  }
  const double norm = std::pow(2.0 * std::numbers::pi * var, -0.5 * m);

  const auto points = static_cast<Eigen::Index>(p.lattice.size());
  Eigen::MatrixXd phi(points, k);
  Eigen::VectorXd r(points);
  for (Eigen::Index idx = 0; idx < points; ++idx) {
    const int i = m == 1 ? static_cast<int>(idx) : static_cast<int>(idx / t);
    const int j = m == 1 ? 0 : static_cast<int>(idx % t);
    double model = 0.0;
    for (int c = 0; c < k; ++c) {
      const double v = norm * g[0](i, c) * (m == 2 ? g[1](j, c) : 1.0);
      phi(idx, c) = v;
      model += q[c] * v;
    }
    r[idx] = p.values[static_cast<std::size_t>(idx)] - model;
  }

  ProfileTerms out;
  out.sse = r.squaredNorm();
  if (!with_jacobian) return out;

  // dr/dq_c = -phi_c ; dr/dmu_{c,a} = -q_c phi_c (x_a - mu_{c,a}) / var
  Eigen::MatrixXd jmu(points, k * m);
  for (Eigen::Index idx = 0; idx < points; ++idx) {
    const int coord[2] = {m == 1 ? static_cast<int>(idx) : static_cast<int>(idx / t),
                          m == 1 ? 0 : static_cast<int>(idx % t)};
    for (int c = 0; c < k; ++c)
      for (int a = 0; a < m; ++a) {
        const double x = p.lattice.coordinate(coord[a]);
        jmu(idx, c * m + a) = -q[c] * phi(idx, c) * (x - mu(a, c)) / var;
      }
  }
  const Eigen::MatrixXd jq = -phi;
  out.a = jmu.transpose() * jmu;
  out.b = jmu.transpose() * jq;
  out.dq = jq.transpose() * jq;
  out.gmu = jmu.transpose() * r;
  out.gq = jq.transpose() * r;
  return out;
}

double cell_weight(const Lattice& lattice) { return std::pow(lattice.spacing(), lattice.axes()); }

void check_shapes(const DeconvParams& params, const std::vector<Profile>& profiles) {
  if (params.locations.size() != profiles.size() || params.group.size() != profiles.size())
    throw InvalidArgument("parameter/profile count mismatch");
  if (profiles.empty()) throw InvalidArgument("no profiles");
  const int m = profiles.front().lattice.axes();
  const int k = params.components();
  for (std::size_t n = 0; n < profiles.size(); ++n) {
    if (profiles[n].lattice.points() != profiles.front().lattice.points() ||
        profiles[n].lattice.axes() != m)
      throw InvalidArgument("profiles must share one lattice");
    if (params.locations[n].rows() != m || params.locations[n].cols() != k)
      throw InvalidArgument("location block has the wrong shape");
    if (params.group[n] >= params.weights.size()) throw InvalidArgument("group index out of range");
  }
  for (const auto& w : params.weights)
    if (static_cast<int>(w.size()) != k) throw InvalidArgument("weight vector has the wrong size");
}

double condition_number(const Eigen::MatrixXd& s) {
  if (s.size() == 0) return 1.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff(), hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 0.0)) return std::numeric_limits<double>::infinity();
  return hi / lo;
}

struct GroupState {
  std::vector<std::size_t> members;
  std::vector<Eigen::MatrixXd> mu;
  std::vector<double> q;
};

double group_sse(const GroupState& s, const std::vector<Profile>& profiles, const Kernel& kernel,
                 Exec exec) {
  std::vector<double> parts(s.members.size());
  for_each_index(exec, s.members.size(), [&](std::size_t i) {
    parts[i] = profile_terms(profiles[s.members[i]], kernel, s.mu[i], s.q, false).sse;
  });
  double total = 0.0;
  for (double v : parts) total += v;
  return total;
}

// `scale` normalizes the reported objective over all profiles; the
// convergence test uses the group's own normalization so that it does not
// depend on how many groups there are.
GroupReport solve_group(GroupState& s, const std::vector<Profile>& profiles, const Kernel& kernel,
                        double scale, const FitOptions& options, Exec exec) {
  const auto k = static_cast<Eigen::Index>(s.q.size());
  const Eigen::Index m = s.mu.front().rows();
  const std::size_t count = s.members.size();
  const double local = cell_weight(profiles[s.members.front()].lattice) / static_cast<double>(count);

  GroupReport report;
  std::vector<ProfileTerms> terms(count);
  double previous = std::numeric_limits<double>::infinity();

  for (int iter = 0;; ++iter) {
    for_each_index(exec, count, [&](std::size_t i) {
      terms[i] = profile_terms(profiles[s.members[i]], kernel, s.mu[i], s.q, true);
    });
    double sse = 0.0;
    Eigen::MatrixXd dq = Eigen::MatrixXd::Zero(k, k);
    Eigen::VectorXd gq = Eigen::VectorXd::Zero(k);
    double gnorm = 0.0;
    for (const auto& tt : terms) {
      sse += tt.sse;
      dq += tt.dq;
      gq += tt.gq;
      gnorm = std::max(gnorm, 2.0 * local * tt.gmu.cwiseAbs().maxCoeff());
    }
    gnorm = std::max(gnorm, 2.0 * local * gq.cwiseAbs().maxCoeff());
    report.objective = scale * sse;
    report.gradient_norm = gnorm;
    report.iterations = iter;

    const bool small_gradient = gnorm < options.gradient_tol;
    const bool stalled = std::isfinite(previous) && previous - sse <= options.relative_decrease_tol * previous;
    if (sse == 0.0 || small_gradient || stalled) {
      report.converged = true;
      return report;
    }
    if (iter >= options.max_iterations) return report;
    previous = sse;

    // Arrow-shaped normal equations: eliminate each profile's locations.
    std::vector<Eigen::LDLT<Eigen::MatrixXd>> solvers(count);
    bool ill = false;
    Eigen::MatrixXd schur = dq;
    Eigen::VectorXd rhs_q = -gq;
    for (std::size_t i = 0; i < count; ++i) {
      if (condition_number(terms[i].a) > options.condition_limit) ill = true;
      solvers[i].compute(terms[i].a);
      const Eigen::MatrixXd ainv_b = solvers[i].solve(terms[i].b);
      schur -= terms[i].b.transpose() * ainv_b;
      rhs_q += ainv_b.transpose() * terms[i].gmu;
    }
    if (!ill && condition_number(schur) > options.condition_limit) ill = true;

    std::vector<Eigen::VectorXd> step_mu(count);
    Eigen::VectorXd step_q;
    double slope = 0.0;  // directional derivative of SSE
    if (!ill) {
      step_q = schur.ldlt().solve(rhs_q);
      for (std::size_t i = 0; i < count; ++i) {
        step_mu[i] = solvers[i].solve(-terms[i].gmu - terms[i].b * step_q);
        slope += 2.0 * terms[i].gmu.dot(step_mu[i]);
      }
      slope += 2.0 * gq.dot(step_q);
    }
    if (ill || !(slope < 0.0)) {
      // Steepest descent scaled by the Gauss-Newton curvature trace.
      ++report.gradient_steps;
      double trace = dq.trace();
      for (const auto& tt : terms) trace += tt.a.trace();
      const double alpha = trace > 0.0 ? 1.0 / trace : 1.0;
      step_q = -alpha * gq;
      slope = -2.0 * alpha * gq.squaredNorm();
      for (std::size_t i = 0; i < count; ++i) {
        step_mu[i] = -alpha * terms[i].gmu;
        slope -= 2.0 * alpha * terms[i].gmu.squaredNorm();
      }
    }

    GroupState trial = s;
    double t_step = 1.0;
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt, t_step *= 0.5) {
      bool positive = true;
      for (Eigen::Index c = 0; c < k; ++c) {
        trial.q[c] = s.q[c] + t_step * step_q[c];
        positive &= trial.q[c] > 0.0;
      }
      if (!positive) continue;
      for (std::size_t i = 0; i < count; ++i)
        trial.mu[i] = s.mu[i] + t_step * Eigen::Map<const Eigen::MatrixXd>(step_mu[i].data(), m, k);
      const double f = group_sse(trial, profiles, kernel, exec);
      if (f <= sse + 1e-4 * t_step * slope) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      // No decrease possible at working precision: at a stationary point.
      report.converged = gnorm < 1e3 * options.gradient_tol || sse <= 1e-24;
      return report;
    }
    s = std::move(trial);
  }
}

}  // namespace

int DeconvParams::components() const {
  if (!weights.empty()) return static_cast<int>(weights.front().size());
  if (!locations.empty()) return static_cast<int>(locations.front().cols());
  return 0;
}

std::vector<std::size_t> make_groups(FitMode mode, std::size_t profiles, std::size_t group_size) {
  std::vector<std::size_t> group(profiles);
  for (std::size_t n = 0; n < profiles; ++n) {
    if (mode == FitMode::separate) group[n] = n;
    else group[n] = group_size == 0 ? 0 : n / group_size;
  }
  return group;
}

ObjectiveValue objective(const DeconvParams& params, const std::vector<Profile>& profiles,
                         const Kernel& kernel, Exec exec) {
  check_shapes(params, profiles);
  const std::size_t count = profiles.size();
  const double scale = cell_weight(profiles.front().lattice) / static_cast<double>(count);
  std::vector<ProfileTerms> terms(count);
  for_each_index(exec, count, [&](std::size_t n) {
    terms[n] = profile_terms(profiles[n], kernel, params.locations[n], params.weights_of(n), true);
  });

  ObjectiveValue out;
  const Eigen::Index m = params.locations.front().rows();
  const Eigen::Index k = params.components();
  out.grad_locations.resize(count);
  out.grad_weights.assign(params.weights.size(), std::vector<double>(static_cast<std::size_t>(k), 0.0));
  for (std::size_t n = 0; n < count; ++n) {
    out.value += scale * terms[n].sse;
    const Eigen::VectorXd g = 2.0 * scale * terms[n].gmu;
    out.grad_locations[n] = Eigen::Map<const Eigen::MatrixXd>(g.data(), m, k);
    auto& gw = out.grad_weights[params.group[n]];
    for (Eigen::Index c = 0; c < k; ++c) gw[c] += 2.0 * scale * terms[n].gq[c];
  }
  return out;
}

DeconvParams spectral_init(const std::vector<Profile>& profiles, int d, const Kernel& kernel,
                           int components, FitMode mode, const FitOptions& options, Exec exec) {
  const auto results = label(deconvolve_spectral(profiles, d, kernel, components, options.spectral, exec));
  DeconvParams params;
  params.mode = mode;
  params.group = make_groups(mode, profiles.size(), options.group_size);
  const std::size_t groups = params.group.empty() ? 0 : params.group.back() + 1;
  params.locations.reserve(profiles.size());
  for (const auto& r : results) {
    if ((r.flags & (kFlagFailed | kFlagMerged)) || r.locations.cols() != components)
      throw NumericalError("profile " + std::to_string(r.index) + " has fewer than " +
                           std::to_string(components) + " resolvable spikes: " +
                           (r.message.empty() ? describe_flags(r.flags) : r.message));
    params.locations.push_back(r.locations);
  }
  params.weights.assign(groups, std::vector<double>(static_cast<std::size_t>(components)));
  for (std::size_t g = 0; g < groups; ++g) {
    for (int c = 0; c < components; ++c) {
      std::vector<double> values;
      for (std::size_t n = 0; n < results.size(); ++n)
        if (params.group[n] == g) values.push_back(results[n].amplitudes[c]);
      std::sort(values.begin(), values.end());
      const std::size_t h = values.size() / 2;
      double med = values.size() % 2 ? values[h] : 0.5 * (values[h - 1] + values[h]);
      params.weights[g][c] = std::max(med, 1e-12);
    }
  }
  return params;
}

FitResult fit(const std::vector<Profile>& profiles, int d, const Kernel& kernel, int components,
              FitMode mode, const std::optional<DeconvParams>& init, const FitOptions& options,
              Exec exec) {
  if (profiles.empty()) throw InvalidArgument("no profiles");
  if (components < 1) throw InvalidArgument("need at least one component");
  DeconvParams params = init ? *init : spectral_init(profiles, d, kernel, components, mode, options, exec);
  params.mode = mode;
  check_shapes(params, profiles);
  if (params.components() != components) throw InvalidArgument("init has the wrong component count");

  const double scale = cell_weight(profiles.front().lattice) / static_cast<double>(profiles.size());
  std::vector<GroupState> states(params.weights.size());
  for (std::size_t n = 0; n < profiles.size(); ++n) {
    auto& st = states[params.group[n]];
    st.members.push_back(n);
    st.mu.push_back(params.locations[n]);
  }
  for (std::size_t g = 0; g < states.size(); ++g) states[g].q = params.weights[g];

  FitResult result;
  result.report.groups.resize(states.size());
  const auto run = [&](std::size_t g, Exec inner) {
    if (states[g].members.empty()) {
      result.report.groups[g].converged = true;
      return;
    }
    result.report.groups[g] = solve_group(states[g], profiles, kernel, scale, options, inner);
  };
  if (states.size() > 1) {
    for_each_index(exec, states.size(), [&](std::size_t g) { run(g, Exec::serial); });
  } else {
    run(0, exec);
  }

  for (std::size_t g = 0; g < states.size(); ++g) {
    params.weights[g] = states[g].q;
    for (std::size_t i = 0; i < states[g].members.size(); ++i)
      params.locations[states[g].members[i]] = states[g].mu[i];
  }
  result.params = std::move(params);
  result.report.converged = true;
  for (const auto& gr : result.report.groups) {
    result.report.objective += gr.objective;
    result.report.gradient_norm = std::max(result.report.gradient_norm, gr.gradient_norm);
    result.report.iterations = std::max(result.report.iterations, gr.iterations);
    result.report.converged = result.report.converged && gr.converged;
  }
  return result;
}

double estimate_noise_sd(const DeconvParams& params, const std::vector<Profile>& profiles,
                         const Kernel& kernel) {
  check_shapes(params, profiles);
  double sse = 0.0;
  std::size_t points = 0;
  for (std::size_t n = 0; n < profiles.size(); ++n) {
    sse += profile_terms(profiles[n], kernel, params.locations[n], params.weights_of(n), false).sse;
    points += profiles[n].lattice.size();
  }
  const std::size_t dof = params.locations.size() * static_cast<std::size_t>(params.locations.front().size()) +
                          params.weights.size() * static_cast<std::size_t>(params.components());
  if (points <= dof) throw InvalidArgument("not enough lattice points to estimate the noise level");
  return std::sqrt(sse / static_cast<double>(points - dof));
}

std::vector<ProfileDeconvolution> to_deconvolutions(const DeconvParams& params, const FitReport& report,
                                                    const std::vector<Profile>& profiles) {
  std::vector<ProfileDeconvolution> out(params.locations.size());
  for (std::size_t n = 0; n < out.size(); ++n) {
    out[n].index = n < profiles.size() ? profiles[n].index : n;
    out[n].locations = params.locations[n];
    out[n].amplitudes = params.weights_of(n);
    const std::size_t g = params.group[n];
    if (g < report.groups.size() && !report.groups[g].converged) out[n].flags |= kFlagNotConverged;
  }
  return out;
}

}  // namespace rtomo

// Copyright 2026 The CCL Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Recovering the unconstrained policy pi(x) from null-space observations by
// minimising the inconsistency error
//   E = sum_n ||u_n - P_n pi(x_n)||^2,   P_n = u_n u_n^T / ||u_n||^2.
// E is quadratic in the weights of a linear-in-parameters model, so both
// learners below solve it in closed form.

#ifndef CCL_POLICY_HPP_
#define CCL_POLICY_HPP_

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ccl/core.hpp"
#include "ccl/math.hpp"

namespace ccl {

inline constexpr double kMinActionNorm = 1e-12;

enum class PolicyBasis { kRbf, kLinear };

inline std::string_view to_string(PolicyBasis basis) {
  return basis == PolicyBasis::kRbf ? "rbf" : "linear";
}

/// pi(x) = W beta(x). With the linear basis beta(x) = (x; 1), rbf.centers is
/// dim_x x 0 and rbf.weights is dim_u x (dim_x + 1).
struct ParametricPolicyModel {
  PolicyBasis basis = PolicyBasis::kRbf;
  RbfModel rbf;

  Index dim_x() const { return rbf.centers.rows(); }
  Index dim_u() const { return rbf.weights.rows(); }
  Index num_features() const {
    return basis == PolicyBasis::kRbf ? rbf.num_basis() : dim_x() + 1;
  }

  void validate() const {
    if (basis == PolicyBasis::kRbf) {
      rbf.validate();
    } else {
      detail::require(rbf.centers.cols() == 0, "linear policy carries no centers");
      detail::require(rbf.weights.cols() == dim_x() + 1, "linear policy weights must be dim_u x (dim_x + 1)");
      detail::require(rbf.weights.allFinite(), "policy weights must be finite");
    }
    detail::require(rbf.weights.rows() >= 1, "policy needs dim_u >= 1");
  }

  MatrixXd feature_matrix(const MatrixXd& x) const {
    detail::require(x.rows() == dim_x(), "state dimension does not match the policy");
    if (basis == PolicyBasis::kRbf) return rbf_feature_matrix(x, rbf.centers, rbf.width);
    MatrixXd f(x.rows() + 1, x.cols());
    f.topRows(x.rows()) = x;
    f.bottomRows(1).setOnes();
    return f;
  }

  bool operator==(const ParametricPolicyModel&) const = default;
};

/// Locally weighted linear policy: local maps B_m act on (x; 1) and are
/// blended by receptive fields rho_m(x) = exp(-||x - c_m||^2 / (2 width)).
struct LwlPolicyModel {
  RbfModel rbf;                     // centers and width; weights unused (0 x M)
  std::vector<MatrixXd> local_maps;  // M maps, each dim_u x (dim_x + 1)

  Index dim_x() const { return rbf.centers.rows(); }
  Index num_models() const { return rbf.centers.cols(); }
  Index dim_u() const { return local_maps.empty() ? 0 : local_maps.front().rows(); }

  void validate() const {
    detail::require(rbf.centers.cols() >= 1, "lwl policy needs at least one receptive field");
    detail::require(rbf.width > 0.0 && std::isfinite(rbf.width), "lwl width must be > 0");
    detail::require(static_cast<Index>(local_maps.size()) == num_models(),
                    "lwl policy needs one local map per receptive field");
    for (const MatrixXd& b : local_maps) {
      detail::require(b.rows() == dim_u() && b.cols() == dim_x() + 1,
                      "lwl local maps must be dim_u x (dim_x + 1)");
      detail::require(b.allFinite(), "lwl local maps must be finite");
    }
  }

  bool operator==(const LwlPolicyModel&) const = default;
};

inline ParametricPolicyModel make_rbf_policy(const MatrixXd& x, Index dim_u, Index num_basis = 10,
                                             std::uint64_t seed = 0) {
  return {PolicyBasis::kRbf, make_rbf_basis(x, num_basis, dim_u, seed)};
}

inline ParametricPolicyModel make_linear_policy(Index dim_x, Index dim_u) {
  ParametricPolicyModel model;
  model.basis = PolicyBasis::kLinear;
  model.rbf.centers.resize(dim_x, 0);
  model.rbf.weights = MatrixXd::Zero(dim_u, dim_x + 1);
  return model;
}

inline LwlPolicyModel make_lwl_policy(const MatrixXd& x, Index dim_u, Index num_models = 10,
                                      std::uint64_t seed = 0) {
  LwlPolicyModel model;
  model.rbf = make_rbf_basis(x, num_models, 0, seed);
  model.local_maps.assign(static_cast<std::size_t>(num_models), MatrixXd::Zero(dim_u, x.rows() + 1));
  return model;
}

inline MatrixXd predict_policy(const ParametricPolicyModel& model, const MatrixXd& x) {
  model.validate();
  return model.rbf.weights * model.feature_matrix(x);
}

inline MatrixXd predict_policy(const LwlPolicyModel& model, const MatrixXd& x) {
  model.validate();
  detail::require(x.rows() == model.dim_x(), "state dimension does not match the policy");
  const MatrixXd rho = rbf_feature_matrix(x, model.rbf.centers, model.rbf.width);
  MatrixXd out(model.dim_u(), x.cols());
  VectorXd xt(x.rows() + 1);
  for (Index n = 0; n < x.cols(); ++n) {
    const double total = rho.col(n).sum();
    if (!(total >= 1e-12)) {
      throw ValidationError("lwl policy has no active receptive field at sample " +
                            std::to_string(n));
    }
    xt << x.col(n), 1.0;
    VectorXd acc = VectorXd::Zero(model.dim_u());
    for (Index m = 0; m < model.num_models(); ++m) {
      acc += rho(m, n) * (model.local_maps[static_cast<std::size_t>(m)] * xt);
    }
    out.col(n) = acc / total;
  }
  return out;
}

/// sum_n ||u_n - P_n W f_n||^2 over samples with ||u_n|| >= 1e-12.
inline double inconsistency_error(const MatrixXd& weights, const MatrixXd& features,
                                  const MatrixXd& u) {
  detail::require(features.cols() == u.cols() && weights.cols() == features.rows() &&
                      weights.rows() == u.rows(),
                  "inconsistency error dimensions disagree");
  const MatrixXd pred = weights * features;
  double total = 0.0;
  for (Index n = 0; n < u.cols(); ++n) {
    const double norm_sq = u.col(n).squaredNorm();
    if (norm_sq < kMinActionNorm * kMinActionNorm) continue;
    const VectorXd& un = u.col(n);
    const VectorXd projected = un * (un.dot(pred.col(n)) / norm_sq);
    total += (un - projected).squaredNorm();
  }
  return total;
}

namespace detail {

// Minimises sum_n rho_n ||u_n - P_n W f_n||^2 + ridge ||W||^2 via
//   sum_n rho_n (f_n f_n^T (x) P_n) vec(W) = sum_n rho_n vec(u_n f_n^T).
// Samples are accumulated in index order.
struct ProjectedRegression {
  MatrixXd weights;
  int dropped = 0;
  bool used_fallback = false;
};

inline ProjectedRegression solve_projected_regression(const MatrixXd& features, const MatrixXd& u,
                                                      const VectorXd* sample_weights,
                                                      double regularization) {
  const Index dim_u = u.rows();
  const Index nf = features.rows();
  const Index size = dim_u * nf;
  MatrixXd lhs = MatrixXd::Zero(size, size);
  VectorXd rhs = VectorXd::Zero(size);
  ProjectedRegression out;
  for (Index n = 0; n < u.cols(); ++n) {
    const double norm_sq = u.col(n).squaredNorm();
    if (norm_sq < kMinActionNorm * kMinActionNorm) {
      ++out.dropped;
      continue;
    }
    const double rho = sample_weights ? (*sample_weights)(n) : 1.0;
    if (rho == 0.0) continue;
    const VectorXd& un = u.col(n);
    const MatrixXd proj = (rho / norm_sq) * (un * un.transpose());
    const VectorXd& f = features.col(n);
    for (Index h = 0; h < nf; ++h) {
      for (Index g = 0; g < nf; ++g) {
        lhs.block(g * dim_u, h * dim_u, dim_u, dim_u) += (f(g) * f(h)) * proj;
      }
      rhs.segment(h * dim_u, dim_u) += (rho * f(h)) * un;
    }
  }

  const auto solve = [&](double ridge) -> std::optional<VectorXd> {
    MatrixXd system = lhs;
    system.diagonal().array() += ridge;
    Eigen::LDLT<MatrixXd> ldlt(system);
    if (ldlt.info() != Eigen::Success) return std::nullopt;
    VectorXd sol = ldlt.solve(rhs);
    if (!sol.allFinite()) return std::nullopt;
    if ((system * sol - rhs).norm() > 1e-6 * std::max(1.0, rhs.norm())) return std::nullopt;
    return sol;
  };
  std::optional<VectorXd> sol = solve(regularization);
  if (!sol) {
    const double fallback =
        std::max({regularization, 1e-8, 1e-8 * lhs.diagonal().cwiseAbs().maxCoeff()});
    sol = solve(fallback);
    out.used_fallback = true;
    if (!sol) sol = VectorXd::Zero(size);
  }
  out.weights = Eigen::Map<const MatrixXd>(sol->data(), dim_u, nf);
  return out;
}

inline void check_policy_inputs(const MatrixXd& x, const MatrixXd& u, Index dim_x) {
  require(x.cols() == u.cols(), "states and actions disagree on sample count");
  require(x.rows() == dim_x, "state dimension does not match the model");
  require(x.allFinite() && u.allFinite(), "inputs contain non-finite values");
}

}  // namespace detail

/// Closed-form minimiser of the inconsistency error for a parametric policy.
inline Learned<ParametricPolicyModel> learn_pi(const MatrixXd& x, const MatrixXd& u,
                                               const ParametricPolicyModel& model0,
                                               const LearnOptions& options = {}) {
  options.validate();
  model0.validate();
  detail::check_policy_inputs(x, u, model0.dim_x());
  detail::require(u.rows() == model0.dim_u(), "action dimension does not match the model");

  const MatrixXd features = model0.feature_matrix(x);
  const detail::ProjectedRegression fit =
      detail::solve_projected_regression(features, u, nullptr, options.regularization);

  Learned<ParametricPolicyModel> out;
  out.model = model0;
  out.model.rbf.weights = fit.weights;
  LearnReport& report = out.report;
  report.iterations = 1;
  report.converged = true;
  report.reason = StopReason::kFunTol;
  report.dropped_samples = fit.dropped;
  if (fit.dropped > 0) report.warnings.push_back(std::to_string(fit.dropped) + " zero-norm samples dropped");
  if (fit.used_fallback) report.warnings.emplace_back("singular normal equations: ridge fallback used");
  report.final_objective = inconsistency_error(fit.weights, features, u);
  report.objective_trace.push_back(report.final_objective);
  const double kept = static_cast<double>(u.cols() - fit.dropped);
  if (kept > 0) report.set_error(report.final_objective / kept, u.squaredNorm() / kept);
  return out;
}

/// Locally weighted variant: each local map is the closed-form minimiser of
/// the receptive-field weighted inconsistency error.
inline Learned<LwlPolicyModel> learn_pi_lwl(const MatrixXd& x, const MatrixXd& u,
                                            const LwlPolicyModel& model0,
                                            const LearnOptions& options = {}) {
  options.validate();
  detail::require(model0.rbf.centers.cols() >= 1 && model0.rbf.width > 0.0,
                  "lwl policy needs receptive fields and a positive width");
  detail::check_policy_inputs(x, u, model0.dim_x());

  MatrixXd augmented(x.rows() + 1, x.cols());
  augmented.topRows(x.rows()) = x;
  augmented.bottomRows(1).setOnes();
  const MatrixXd rho = rbf_feature_matrix(x, model0.rbf.centers, model0.rbf.width);

  Learned<LwlPolicyModel> out;
  out.model.rbf = model0.rbf;
  out.model.rbf.weights.resize(0, model0.num_models());
  bool fallback = false;
  int dropped = 0;
  for (Index m = 0; m < model0.num_models(); ++m) {
    const VectorXd weights = rho.row(m).transpose();
    const detail::ProjectedRegression fit =
        detail::solve_projected_regression(augmented, u, &weights, options.regularization);
    out.model.local_maps.push_back(fit.weights);
    fallback = fallback || fit.used_fallback;
    dropped = fit.dropped;
  }

  LearnReport& report = out.report;
  report.iterations = 1;
  report.converged = true;
  report.reason = StopReason::kFunTol;
  report.dropped_samples = dropped;
  if (dropped > 0) report.warnings.push_back(std::to_string(dropped) + " zero-norm samples dropped");
  if (fallback) report.warnings.emplace_back("singular normal equations: ridge fallback used");

  // Inconsistency error of the blended prediction on the training data.
  const MatrixXd pred = predict_policy(out.model, x);
  double total = 0.0;
  for (Index n = 0; n < u.cols(); ++n) {
    const double norm_sq = u.col(n).squaredNorm();
    if (norm_sq < kMinActionNorm * kMinActionNorm) continue;
    const VectorXd& un = u.col(n);
    total += (un - un * (un.dot(pred.col(n)) / norm_sq)).squaredNorm();
  }
  report.final_objective = total;
  report.objective_trace.push_back(total);
  const double kept = static_cast<double>(u.cols() - dropped);
  if (kept > 0) report.set_error(total / kept, u.squaredNorm() / kept);
  return out;
}

}  // namespace ccl

#endif  // CCL_POLICY_HPP_

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

// Separating the null-space component w(x) from observations u = v + w.

#ifndef CCL_NULLSPACE_HPP_
#define CCL_NULLSPACE_HPP_

#include <Eigen/Dense>

#include <cstdint>
#include <utility>

#include "ccl/core.hpp"
#include "ccl/lm.hpp"
#include "ccl/math.hpp"

namespace ccl {

/// w~(x) = weights * beta(x), weights dim_u x G.
struct NullspaceComponentModel {
  RbfModel rbf;

  Index dim_u() const { return rbf.weights.rows(); }

  void validate() const {
    rbf.validate();
    detail::require(rbf.weights.rows() >= 1, "null-space model needs dim_u >= 1");
  }

  VectorXd predict(const VectorXd& x) const {
    return rbf.weights * rbf_features(x, rbf.centers, rbf.width);
  }

  bool operator==(const NullspaceComponentModel&) const = default;
};

/// Untrained model with K-means centers and the mean-distance width rule.
inline NullspaceComponentModel make_nullspace_model(const MatrixXd& x, Index dim_u,
                                                    Index num_basis = 16,
                                                    std::uint64_t seed = 0) {
  return {make_rbf_basis(x, num_basis, dim_u, seed)};
}

/// Column n = weights * beta(x_n).
inline MatrixXd predict_ncl(const NullspaceComponentModel& model, const MatrixXd& x) {
  model.validate();
  return model.rbf.weights * rbf_feature_matrix(x, model.rbf.centers, model.rbf.width);
}

struct NclObjective {
  double value = 0.0;
  VectorXd residuals;  // stacked P_n u_n - w_n, length dim_u * N
  MatrixXd jacobian;   // d residuals / d vec(weights), column-major vec
  int degenerate_samples = 0;
};

/// sum_n ||P_n u_n - w_n||^2 with w_n = weights beta_n and
/// P_n = w_n w_n^T / ||w_n||^2, plus the exact Jacobian of the residuals.
/// Samples with ||w_n|| < 1e-12 use P_n = 0 and are counted as degenerate.
inline NclObjective objective_ncl(const MatrixXd& weights, const MatrixXd& features,
                                  const MatrixXd& u, bool with_jacobian = true) {
  detail::require(weights.cols() == features.rows(), "weights and features disagree on G");
  detail::require(weights.rows() == u.rows(), "weights and observations disagree on dim_u");
  detail::require(features.cols() == u.cols(), "features and observations disagree on N");
  const Index dim_u = u.rows();
  const Index n = u.cols();
  const Index num_basis = features.rows();
  const MatrixXd pred = weights * features;

  NclObjective out;
  out.residuals.resize(dim_u * n);
  if (with_jacobian) out.jacobian = MatrixXd::Zero(dim_u * n, dim_u * num_basis);
  MatrixXd d_res(dim_u, dim_u);
  const MatrixXd eye = MatrixXd::Identity(dim_u, dim_u);
  for (Index i = 0; i < n; ++i) {
    const VectorXd w = pred.col(i);
    const double norm_sq = w.squaredNorm();
    if (norm_sq < 1e-24) {
      out.residuals.segment(i * dim_u, dim_u) = -w;
      d_res = -eye;
      ++out.degenerate_samples;
    } else {
      const double dot = w.dot(u.col(i));
      const double scale = dot / norm_sq;
      out.residuals.segment(i * dim_u, dim_u) = w * (scale - 1.0);
      const VectorXd d_scale = u.col(i) / norm_sq - (2.0 * dot / (norm_sq * norm_sq)) * w;
      d_res = (scale - 1.0) * eye + w * d_scale.transpose();
    }
    if (with_jacobian) {
      for (Index g = 0; g < num_basis; ++g) {
        out.jacobian.block(i * dim_u, g * dim_u, dim_u, dim_u) = features(g, i) * d_res;
      }
    }
  }
  out.value = out.residuals.squaredNorm();
  return out;
}

/// Fits w~ by minimising sum_n ||P_n u_n - w~(x_n)||^2 with Levenberg-Marquardt,
/// starting from a ridge regression of U on beta(X).
inline Learned<NullspaceComponentModel> learn_ncl(const MatrixXd& x, const MatrixXd& u,
                                                  const NullspaceComponentModel& model0,
                                                  const LearnOptions& options = {}) {
  options.validate();
  model0.rbf.validate();
  detail::require(x.cols() == u.cols(), "states and observations disagree on sample count");
  detail::require(x.rows() == model0.rbf.dim_x(), "states do not match the model's centers");
  detail::require(u.allFinite() && x.allFinite(), "inputs contain non-finite values");
  const Index num_basis = model0.rbf.num_basis();
  detail::require(u.cols() >= num_basis, "learn_ncl needs at least as many samples as basis functions");
  const Index dim_u = u.rows();

  const MatrixXd features = rbf_feature_matrix(x, model0.rbf.centers, model0.rbf.width);
  const MatrixXd gram = features * features.transpose() +
                        options.regularization * MatrixXd::Identity(num_basis, num_basis);
  const MatrixXd w0 = gram.ldlt().solve(features * u.transpose()).transpose();

  LmProblem problem;
  problem.residual = [&](const VectorXd& p) {
    const Eigen::Map<const MatrixXd> w(p.data(), dim_u, num_basis);
    return objective_ncl(w, features, u, false).residuals;
  };
  problem.jacobian = [&](const VectorXd& p) {
    const Eigen::Map<const MatrixXd> w(p.data(), dim_u, num_basis);
    return objective_ncl(w, features, u, true).jacobian;
  };
  problem.initial = Eigen::Map<const VectorXd>(w0.data(), w0.size());
  problem.options = options;
  LmResult result = lm_solve(problem);

  Learned<NullspaceComponentModel> out;
  out.model = model0;
  out.model.rbf.weights = Eigen::Map<const MatrixXd>(result.params.data(), dim_u, num_basis);
  out.report = std::move(result.report);

  const NclObjective final = objective_ncl(out.model.rbf.weights, features, u, false);
  const MatrixXd targets = Eigen::Map<const MatrixXd>(final.residuals.data(), dim_u, u.cols()) +
                           out.model.rbf.weights * features;
  const double count = static_cast<double>(u.cols());
  out.report.final_objective = final.value;
  out.report.dropped_samples = final.degenerate_samples;
  if (final.degenerate_samples > 0) {
    out.report.warnings.push_back(std::to_string(final.degenerate_samples) +
                                  " samples with near-zero prediction");
  }
  out.report.set_error(final.value / count, targets.squaredNorm() / count);
  return out;
}

}  // namespace ccl

#endif  // CCL_NULLSPACE_HPP_

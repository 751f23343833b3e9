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

#ifndef CCL_LM_HPP_
#define CCL_LM_HPP_

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <utility>

#include "ccl/core.hpp"

namespace ccl {

using ResidualFn = std::function<VectorXd(const VectorXd&)>;
using JacobianFn = std::function<MatrixXd(const VectorXd&)>;

/// Nonlinear least-squares problem min_p ||r(p)||^2.
struct LmProblem {
  ResidualFn residual;
  JacobianFn jacobian;  // empty: central finite differences
  VectorXd initial;
  LearnOptions options;
};

struct LmResult {
  VectorXd params;
  LearnReport report;
};

/// Central differences with step 1e-6 * (1 + |p_i|).
inline MatrixXd finite_difference_jacobian(const ResidualFn& residual, const VectorXd& p) {
  const VectorXd r0 = residual(p);
  MatrixXd jac(r0.size(), p.size());
  VectorXd probe = p;
  for (Index i = 0; i < p.size(); ++i) {
    const double h = 1e-6 * (1.0 + std::abs(p(i)));
    probe(i) = p(i) + h;
    const VectorXd plus = residual(probe);
    probe(i) = p(i) - h;
    const VectorXd minus = residual(probe);
    probe(i) = p(i);
    jac.col(i) = (plus - minus) / (2.0 * h);
  }
  return jac;
}

/// Levenberg-Marquardt with Marquardt scaling:
///   (J^T J + lambda * diag(J^T J)) delta = -J^T r
/// lambda starts at 1e-3, shrinks x0.1 on an accepted step and grows x10 on a
/// rejected one. Accepted steps strictly decrease the objective.
///
/// Stops on ||delta|| < tol_x, |dE| < tol_fun * E, a vanishing gradient,
/// max_iter step attempts, or lambda > 1e12 (reported as not converged; the
/// best parameters seen are returned).
inline LmResult lm_solve(const LmProblem& problem) {
  problem.options.validate();
  detail::require(static_cast<bool>(problem.residual), "lm problem has no residual function");
  const LearnOptions& opt = problem.options;

  constexpr double kInitialDamping = 1e-3;
  constexpr double kMaxDamping = 1e12;
  constexpr double kMinDamping = 1e-20;

  LmResult out;
  VectorXd p = problem.initial;
  VectorXd r = problem.residual(p);
  if (!r.allFinite()) throw ValidationError("residual is not finite at the initial parameters");
  double energy = r.squaredNorm();
  out.report.objective_trace.push_back(energy);

  const auto jacobian_at = [&](const VectorXd& params) {
    MatrixXd jac = problem.jacobian ? problem.jacobian(params)
                                    : finite_difference_jacobian(problem.residual, params);
    detail::require(jac.rows() == r.size() && jac.cols() == params.size(),
                    "jacobian dimensions do not match residual and parameters");
    return jac;
  };

  double damping = kInitialDamping;
  bool need_jacobian = true;
  MatrixXd jtj;
  VectorXd grad;
  int iter = 0;
  out.report.reason = StopReason::kMaxIter;
  out.report.converged = false;

  while (iter < opt.max_iter) {
    if (need_jacobian) {
      const MatrixXd jac = jacobian_at(p);
      jtj = jac.transpose() * jac;
      grad = jac.transpose() * r;
      need_jacobian = false;
      if (energy == 0.0 || grad.lpNorm<Eigen::Infinity>() == 0.0) {
        out.report.converged = true;
        out.report.reason = StopReason::kFunTol;
        break;
      }
    }
    ++iter;

    VectorXd scale = jtj.diagonal();
    const double floor = std::max(scale.maxCoeff() * 1e-12, std::numeric_limits<double>::min());
    scale = scale.cwiseMax(floor);
    MatrixXd lhs = jtj;
    lhs.diagonal() += damping * scale;
    const VectorXd delta = lhs.ldlt().solve(-grad);

    const VectorXd p_new = p + delta;
    const VectorXd r_new = problem.residual(p_new);
    const double energy_new = r_new.allFinite() ? r_new.squaredNorm()
                                                : std::numeric_limits<double>::infinity();
    const bool step_ok = delta.allFinite();

    if (step_ok && energy_new < energy) {
      const double drop = energy - energy_new;
      const double previous = energy;
      p = p_new;
      r = r_new;
      energy = energy_new;
      out.report.objective_trace.push_back(energy);
      damping = std::max(damping * 0.1, kMinDamping);
      need_jacobian = true;
      if (delta.norm() < opt.tol_x) {
        out.report.converged = true;
        out.report.reason = StopReason::kXTol;
        break;
      }
      if (drop < opt.tol_fun * previous) {
        out.report.converged = true;
        out.report.reason = StopReason::kFunTol;
        break;
      }
    } else {
      if (step_ok && delta.norm() < opt.tol_x) {
        out.report.converged = true;
        out.report.reason = StopReason::kXTol;
        break;
      }
      damping *= 10.0;
      if (damping > kMaxDamping) {
        out.report.converged = false;
        out.report.reason = StopReason::kDampingOverflow;
        break;
      }
    }
  }

  out.params = std::move(p);
  out.report.iterations = iter;
  out.report.final_objective = energy;
  return out;
}

}  // namespace ccl

#endif  // CCL_LM_HPP_

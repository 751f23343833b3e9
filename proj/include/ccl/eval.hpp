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

// Evaluation metrics. Each returns (normalized, variance, mse) where the
// variance is the mean squared norm of the reference channel, so a zero
// predictor always scores a normalized error of 1.

#ifndef CCL_EVAL_HPP_
#define CCL_EVAL_HPP_

#include <Eigen/Dense>

#include <limits>
#include <vector>

#include "ccl/core.hpp"

namespace ccl {

struct MetricTriple {
  double normalized = 0.0;
  double variance = 0.0;
  double mse = 0.0;
};

namespace detail {

inline MetricTriple make_metric(double sum_sq_error, double sum_sq_reference, Index n) {
  MetricTriple out;
  const double count = static_cast<double>(n);
  out.mse = sum_sq_error / count;
  out.variance = sum_sq_reference / count;
  if (out.variance > 0.0) {
    out.normalized = out.mse / out.variance;
  } else {
    out.normalized = out.mse > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
  }
  return out;
}

inline void require_same_shape(const MatrixXd& a, const MatrixXd& b, const char* what) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), std::string(what) + ": dimension mismatch");
  require(a.cols() >= 1, std::string(what) + ": needs at least one sample");
}

inline void require_projectors(const std::vector<MatrixXd>& p, const MatrixXd& ref, const char* what) {
  require(static_cast<Index>(p.size()) == ref.cols(), std::string(what) + ": one projector per sample required");
  for (const MatrixXd& m : p) {
    require(m.rows() == ref.rows() && m.cols() == ref.rows(), std::string(what) + ": projector dimension mismatch");
  }
}

}  // namespace detail

/// Projected policy error: mean ||N_n pi_n - w_n||^2 against the true null
/// component w.
inline MetricTriple error_ppe(const MatrixXd& w_true, const std::vector<MatrixXd>& n_learned,
                              const MatrixXd& pi) {
  detail::require_same_shape(w_true, pi, "ppe");
  detail::require_projectors(n_learned, w_true, "ppe");
  double err = 0.0;
  for (Index n = 0; n < w_true.cols(); ++n) {
    err += (n_learned[static_cast<std::size_t>(n)] * pi.col(n) - w_true.col(n)).squaredNorm();
  }
  return detail::make_metric(err, w_true.squaredNorm(), w_true.cols());
}

/// Projected observation error: mean ||N_n u_n - u_n||^2. Needs no policy.
inline MetricTriple error_poe(const MatrixXd& u, const std::vector<MatrixXd>& n_learned) {
  detail::require(u.cols() >= 1, "poe: needs at least one sample");
  detail::require_projectors(n_learned, u, "poe");
  double err = 0.0;
  for (Index n = 0; n < u.cols(); ++n) {
    err += (n_learned[static_cast<std::size_t>(n)] * u.col(n) - u.col(n)).squaredNorm();
  }
  return detail::make_metric(err, u.squaredNorm(), u.cols());
}

/// Signature-compatible form; the policy argument does not enter the metric.
inline MetricTriple error_poe(const MatrixXd& u, const std::vector<MatrixXd>& n_learned,
                              const MatrixXd& /*pi*/) {
  return error_poe(u, n_learned);
}

/// Generic normalized mean squared error between column sets.
inline MetricTriple error_nmse(const MatrixXd& truth, const MatrixXd& pred) {
  detail::require_same_shape(truth, pred, "nmse");
  return detail::make_metric((truth - pred).squaredNorm(), truth.squaredNorm(), truth.cols());
}

/// Null-space projection error between true and predicted null components.
inline MetricTriple error_npe(const MatrixXd& w_true, const MatrixXd& w_pred) {
  detail::require_same_shape(w_true, w_pred, "npe");
  return error_nmse(w_true, w_pred);
}

/// Unconstrained policy error; needs the ground-truth policy.
inline MetricTriple error_nupe(const MatrixXd& pi_true, const MatrixXd& pi_pred) {
  detail::require_same_shape(pi_true, pi_pred, "nupe");
  return error_nmse(pi_true, pi_pred);
}

/// Constrained policy error: mean ||P_n (pi_n - pi^_n)||^2 normalized by the
/// mean ||P_n pi_n||^2.
inline MetricTriple error_ncpe(const MatrixXd& pi_true, const MatrixXd& pi_pred,
                               const std::vector<MatrixXd>& p) {
  detail::require_same_shape(pi_true, pi_pred, "ncpe");
  detail::require_projectors(p, pi_true, "ncpe");
  double err = 0.0;
  double ref = 0.0;
  for (Index n = 0; n < pi_true.cols(); ++n) {
    const MatrixXd& proj = p[static_cast<std::size_t>(n)];
    err += (proj * (pi_true.col(n) - pi_pred.col(n))).squaredNorm();
    ref += (proj * pi_true.col(n)).squaredNorm();
  }
  return detail::make_metric(err, ref, pi_true.cols());
}

}  // namespace ccl

#endif  // CCL_EVAL_HPP_

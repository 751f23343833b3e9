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

// Learning constraint matrices A (state-independent, and state-dependent with
// or without a feature-matrix prior) from observations u that lie in the null
// space of the constraint. Learners only ever see states and actions.

#ifndef CCL_CONSTRAINT_HPP_
#define CCL_CONSTRAINT_HPP_

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "ccl/core.hpp"
#include "ccl/lm.hpp"
#include "ccl/math.hpp"

namespace ccl {

/// Flips each row so that its first component with magnitude > 1e-12 is
/// positive. a and -a describe the same constraint.
inline void canonicalize_row_signs(MatrixXd& rows) {
  for (Index r = 0; r < rows.rows(); ++r) {
    for (Index c = 0; c < rows.cols(); ++c) {
      if (std::abs(rows(r, c)) > 1e-12) {
        if (rows(r, c) < 0.0) rows.row(r) *= -1.0;
        break;
      }
    }
  }
}

/// Stacks orthonormal rows in R^dim: row s is the unit vector built from
/// angles[s] (dim - 1 - s entries) expressed in the orthogonal complement of
/// rows 0..s-1.
inline MatrixXd rows_from_angles(const std::vector<VectorXd>& angles, Index dim) {
  MatrixXd rows(0, dim);
  for (std::size_t s = 0; s < angles.size(); ++s) {
    const Index m = dim - static_cast<Index>(s);
    detail::require(angles[s].size() == m - 1, "row angle vector has the wrong length");
    const MatrixXd complement = orthogonal_complement_rotation(rows);
    const VectorXd row = complement.transpose() * unit_vector_from_angles(angles[s]);
    rows.conservativeResize(rows.rows() + 1, Eigen::NoChange);
    rows.row(rows.rows() - 1) = row.transpose();
  }
  return rows;
}

/// Constant constraint A made of dim_b orthonormal rows.
struct StateIndependentConstraint {
  Index dim_u = 0;
  std::vector<VectorXd> angles;

  Index dim_b() const { return static_cast<Index>(angles.size()); }

  void validate() const {
    detail::require(dim_u >= 2, "constraint needs dim_u >= 2");
    detail::require(dim_b() >= 1 && dim_b() <= dim_u - 1, "constraint needs 1 <= dim_b <= dim_u - 1");
    for (const VectorXd& a : angles) detail::require(a.allFinite(), "constraint angles must be finite");
  }

  /// Materialized A, sign-canonicalized.
  MatrixXd rows() const {
    MatrixXd a = rows_from_angles(angles, dim_u);
    canonicalize_row_signs(a);
    return a;
  }

  MatrixXd projector() const {
    const MatrixXd a = rows_from_angles(angles, dim_u);
    return MatrixXd::Identity(dim_u, dim_u) - a.transpose() * a;
  }

  bool operator==(const StateIndependentConstraint&) const = default;
};

/// Phi(x): feature matrix whose rows are candidate constraint directions.
struct FeatureMatrixProvider {
  std::string name;
  Index dim_phi = 0;
  Index dim_u = 0;
  std::function<MatrixXd(const VectorXd&)> fn;

  MatrixXd operator()(const VectorXd& x) const {
    MatrixXd phi = fn(x);
    detail::require(phi.rows() == dim_phi && phi.cols() == dim_u,
                    "feature matrix '" + name + "' returned the wrong shape");
    return phi;
  }
};

inline FeatureMatrixProvider identity_features(Index dim_u) {
  return {"identity", dim_u, dim_u, [dim_u](const VectorXd&) {
            return MatrixXd::Identity(dim_u, dim_u);
          }};
}

enum class ConstraintMode { kAlpha, kLambda };

inline std::string_view to_string(ConstraintMode mode) {
  return mode == ConstraintMode::kAlpha ? "alpha" : "lambda";
}

/// State-dependent constraint. Row s of the selection matrix has angles
/// theta_s(x) = omega_s beta(x); the omega_s blocks are stacked in
/// rbf.weights. In alpha mode the selection rows are the rows of A(x); in
/// lambda mode A(x) = Lambda(x) Phi(x).
struct StateDependentConstraintModel {
  ConstraintMode mode = ConstraintMode::kAlpha;
  Index dim_u = 0;
  Index dim_phi = 0;
  Index dim_b = 0;
  std::string feature_name = "identity";
  RbfModel rbf;

  static Index row_angles(Index dim_phi, Index s) { return dim_phi - 1 - s; }

  Index row_offset(Index s) const {
    Index offset = 0;
    for (Index i = 0; i < s; ++i) offset += row_angles(dim_phi, i);
    return offset;
  }

  MatrixXd omega(Index s) const {
    return rbf.weights.middleRows(row_offset(s), row_angles(dim_phi, s));
  }

  void validate() const {
    detail::require(dim_u >= 2, "constraint model needs dim_u >= 2");
    detail::require(dim_phi >= 1, "constraint model needs dim_phi >= 1");
    detail::require(dim_b >= 1 && dim_b <= dim_phi && dim_b <= dim_u - 1,
                    "constraint model needs 1 <= dim_b <= min(dim_phi, dim_u - 1)");
    if (mode == ConstraintMode::kAlpha) {
      detail::require(dim_phi == dim_u, "alpha models select rows of R^dim_u");
    }
    detail::require(rbf.centers.cols() >= 1, "constraint model needs rbf centers");
    detail::require(rbf.width > 0.0, "constraint model needs a positive rbf width");
    detail::require(rbf.weights.rows() == row_offset(dim_b) &&
                        rbf.weights.cols() == rbf.centers.cols(),
                    "constraint model weights have the wrong shape");
    detail::require(rbf.weights.allFinite(), "constraint model weights must be finite");
  }

  /// Orthonormal selection rows (dim_b x dim_phi) at x, before sign
  /// canonicalization. `num_rows` limits the stack (used while learning).
  MatrixXd raw_selection_rows(const VectorXd& x, Index num_rows) const {
    const VectorXd beta = rbf_features(x, rbf.centers, rbf.width);
    std::vector<VectorXd> angles;
    angles.reserve(static_cast<std::size_t>(num_rows));
    for (Index s = 0; s < num_rows; ++s) angles.emplace_back(omega(s) * beta);
    return rows_from_angles(angles, dim_phi);
  }

  MatrixXd selection_rows(const VectorXd& x) const {
    MatrixXd rows = raw_selection_rows(x, dim_b);
    canonicalize_row_signs(rows);
    return rows;
  }

  /// A(x). Lambda mode needs the feature matrix the model was learned with.
  MatrixXd constraint_matrix(const VectorXd& x,
                             const FeatureMatrixProvider* phi = nullptr) const {
    if (mode == ConstraintMode::kAlpha) return selection_rows(x);
    detail::require(phi != nullptr, "lambda model needs its feature matrix provider");
    return selection_rows(x) * (*phi)(x);
  }

  MatrixXd projector(const VectorXd& x, const FeatureMatrixProvider* phi = nullptr,
                     double svd_threshold = kDefaultSvdThreshold) const {
    if (mode == ConstraintMode::kAlpha) {
      const MatrixXd a = raw_selection_rows(x, dim_b);
      return MatrixXd::Identity(dim_u, dim_u) - a.transpose() * a;
    }
    return nullspace_projector(constraint_matrix(x, phi), svd_threshold).projector;
  }

  bool operator==(const StateDependentConstraintModel&) const = default;
};

/// Per-sample learned projectors N(x_n) for every column of `x`.
inline std::vector<MatrixXd> projectors(const StateIndependentConstraint& model, Index n) {
  return std::vector<MatrixXd>(static_cast<std::size_t>(n), model.projector());
}

inline std::vector<MatrixXd> projectors(const StateDependentConstraintModel& model,
                                        const MatrixXd& x,
                                        const FeatureMatrixProvider* phi = nullptr) {
  std::vector<MatrixXd> out;
  out.reserve(static_cast<std::size_t>(x.cols()));
  for (Index n = 0; n < x.cols(); ++n) out.push_back(model.projector(x.col(n), phi));
  return out;
}

/// Settings specific to constraint learners.
struct ConstraintSettings {
  // Learn exactly this many rows; select automatically when empty.
  std::optional<Index> num_rows;
  Index num_basis = 16;
  // A candidate row is kept while the share of observed energy it removes
  // (its normalized objective) stays at or below this value.
  double row_tolerance = 1e-3;
};

template <typename Model>
struct ConstraintFit {
  Model model;
  LearnReport report;
  // False when even the best first row carries more than row_tolerance of the
  // observation energy, i.e. no consistent constraint was found.
  bool constraint_found = false;
};

/// sum_n ||A u_n||^2 = trace(A S A^T) with S = sum_n u_n u_n^T. A must have
/// orthonormal rows, so that pinv(A) A = A^T A.
inline double objective_state_independent(const MatrixXd& a_candidate,
                                          const MatrixXd& second_moment) {
  detail::require(a_candidate.cols() == second_moment.rows() &&
                      second_moment.rows() == second_moment.cols(),
                  "candidate and second moment dimensions disagree");
  return std::max(0.0, (a_candidate * second_moment * a_candidate.transpose()).trace());
}

namespace detail {

inline constexpr Index kMaxGridPoints = 1 << 16;

// Lattice k * pi / res over [0, pi)^dims, coarsened so the total point count
// stays within `max_points`. Returns the minimizer of `f`, lowest index on ties.
template <typename F>
VectorXd grid_search_angles(Index dims, int resolution, Index max_points, F&& f) {
  if (dims == 0) return VectorXd(0);
  Index res = resolution;
  while (res > 2 && std::pow(static_cast<double>(res), static_cast<double>(dims)) >
                        static_cast<double>(max_points)) {
    --res;
  }
  const double step = std::numbers::pi / static_cast<double>(res);
  std::vector<Index> counter(static_cast<std::size_t>(dims), 0);
  VectorXd theta = VectorXd::Zero(dims);
  VectorXd best = theta;
  double best_value = std::numeric_limits<double>::infinity();
  while (true) {
    for (Index i = 0; i < dims; ++i) theta(i) = step * static_cast<double>(counter[static_cast<std::size_t>(i)]);
    const double value = f(theta);
    if (value < best_value) {
      best_value = value;
      best = theta;
    }
    Index i = 0;
    while (i < dims && ++counter[static_cast<std::size_t>(i)] == res) {
      counter[static_cast<std::size_t>(i)] = 0;
      ++i;
    }
    if (i == dims) break;
  }
  return best;
}

inline void check_observations(const MatrixXd& u) {
  require(u.rows() >= 2, "constraint learning needs dim_u >= 2");
  require(u.allFinite(), "observations contain non-finite values");
  require(u.cols() >= u.rows(), "constraint learning needs at least dim_u samples");
  require(u.squaredNorm() > 0.0, "all observations are zero: constraint is unidentifiable");
}

}  // namespace detail

/// Greedy row-by-row fit of a constant constraint: each row is seeded by a grid
/// search over its angles in the complement of the rows already learned, then
/// polished with Levenberg-Marquardt on the pre-computed second moment.
inline ConstraintFit<StateIndependentConstraint> learn_nhat(
    const MatrixXd& u, const LearnOptions& options = {}, const ConstraintSettings& settings = {}) {
  options.validate();
  detail::check_observations(u);
  const Index dim_u = u.rows();
  const Index limit = dim_u - 1;
  if (settings.num_rows) {
    detail::require(*settings.num_rows >= 1 && *settings.num_rows <= limit,
                    "num_rows must lie in [1, dim_u - 1]");
  }
  const Index max_rows = settings.num_rows.value_or(limit);

  const MatrixXd second_moment = u * u.transpose();
  const double total = second_moment.trace();

  ConstraintFit<StateIndependentConstraint> fit;
  fit.model.dim_u = dim_u;
  MatrixXd raw_rows(0, dim_u);
  double accepted = 0.0;
  bool all_converged = true;

  for (Index s = 0; s < max_rows; ++s) {
    const MatrixXd complement = orthogonal_complement_rotation(raw_rows);
    const MatrixXd rotated = complement * (second_moment / total) * complement.transpose();
    const Index dims = complement.rows() - 1;

    const auto grid_value = [&](const VectorXd& theta) {
      const VectorXd a = unit_vector_from_angles(theta);
      return a.dot(rotated * a);
    };
    VectorXd theta = detail::grid_search_angles(dims, options.search_resolution,
                                                detail::kMaxGridPoints, grid_value);

    // rotated = R^T R, so ||R a||^2 is the row objective.
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(rotated);
    const MatrixXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
                          eig.eigenvectors().transpose();
    LmProblem problem;
    problem.residual = [&](const VectorXd& t) { return VectorXd(root * unit_vector_from_angles(t)); };
    problem.jacobian = [&](const VectorXd& t) { return MatrixXd(root * unit_vector_jacobian(t)); };
    problem.initial = theta;
    problem.options = options;
    const LmResult polished = lm_solve(problem);
    fit.report.iterations += polished.report.iterations;
    if (grid_value(polished.params) <= grid_value(theta)) theta = polished.params;

    const double share = std::max(0.0, grid_value(theta));
    fit.report.objective_trace.push_back(accepted + share);

    const bool keep = settings.num_rows ? true : (s == 0 || share <= settings.row_tolerance);
    if (s == 0) fit.constraint_found = settings.num_rows || share <= settings.row_tolerance;
    if (!keep) break;
    all_converged = all_converged && polished.report.converged;
    fit.report.reason = polished.report.reason;

    accepted += share;
    fit.model.angles.push_back(theta);
    raw_rows = rows_from_angles(fit.model.angles, dim_u);
    if (!settings.num_rows && s == 0 && !fit.constraint_found) break;
  }

  const double n = static_cast<double>(u.cols());
  fit.report.final_objective = objective_state_independent(raw_rows, second_moment);
  fit.report.set_error(fit.report.final_objective / n, total / n);
  fit.report.converged = all_converged;
  if (!fit.constraint_found) fit.report.warnings.emplace_back("no-constraint-found");
  return fit;
}

/// Residuals of one selection row in the rotated frame,
///   r_n = (b_n . a(theta_n)) / sqrt(a^T G_n a),  theta_n = omega beta(x_n),
/// where b_n is the pre-rotated observation and G_n the per-sample metric
/// (identity when the feature matrix is the identity). The sum of squares is
/// the row's contribution to sum_n ||pinv(A_n) A_n u_n||^2.
class RowObjective {
 public:
  RowObjective(MatrixXd features, MatrixXd rotated_obs, std::vector<MatrixXd> metrics = {})
      : features_(std::move(features)),
        rotated_(std::move(rotated_obs)),
        metrics_(std::move(metrics)) {
    detail::require(features_.cols() == rotated_.cols(), "features and observations disagree on N");
    detail::require(metrics_.empty() || static_cast<Index>(metrics_.size()) == rotated_.cols(),
                    "one metric per sample required");
    detail::require(rotated_.rows() >= 1, "rotated frame must have at least one dimension");
  }

  Index num_angles() const { return rotated_.rows() - 1; }
  Index num_basis() const { return features_.rows(); }
  Index num_params() const { return num_angles() * num_basis(); }
  Index num_samples() const { return rotated_.cols(); }

  MatrixXd omega_from_params(const VectorXd& params) const {
    return Eigen::Map<const MatrixXd>(params.data(), num_angles(), num_basis());
  }

  VectorXd residuals(const VectorXd& params) const {
    const MatrixXd theta = omega_from_params(params) * features_;
    VectorXd r(num_samples());
    for (Index n = 0; n < num_samples(); ++n) {
      const VectorXd a = unit_vector_from_angles(theta.col(n));
      const double norm_sq = metric_norm_sq(n, a);
      r(n) = norm_sq > kDegenerate * scale(n) ? rotated_.col(n).dot(a) / std::sqrt(norm_sq) : 0.0;
    }
    return r;
  }

  MatrixXd jacobian(const VectorXd& params) const {
    const MatrixXd theta = omega_from_params(params) * features_;
    const Index na = num_angles();
    MatrixXd jac = MatrixXd::Zero(num_samples(), num_params());
    for (Index n = 0; n < num_samples(); ++n) {
      const VectorXd a = unit_vector_from_angles(theta.col(n));
      const double norm_sq = metric_norm_sq(n, a);
      if (!(norm_sq > kDegenerate * scale(n))) continue;
      const double norm = std::sqrt(norm_sq);
      const double dot = rotated_.col(n).dot(a);
      VectorXd d_a = rotated_.col(n) / norm;
      if (!metrics_.empty()) d_a -= (dot / (norm_sq * norm)) * (metrics_[static_cast<std::size_t>(n)] * a);
      const VectorXd d_theta = unit_vector_jacobian(theta.col(n)).transpose() * d_a;
      for (Index g = 0; g < num_basis(); ++g) {
        jac.row(n).segment(g * na, na) = d_theta.transpose() * features_(g, n);
      }
    }
    return jac;
  }

  double value(const VectorXd& params) const { return residuals(params).squaredNorm(); }

  // Objective of a constant angle vector (used to seed the search).
  double value_at_angles(const VectorXd& theta) const {
    const VectorXd a = unit_vector_from_angles(theta);
    double total = 0.0;
    for (Index n = 0; n < num_samples(); ++n) {
      const double norm_sq = metric_norm_sq(n, a);
      if (norm_sq > kDegenerate * scale(n)) {
        const double dot = rotated_.col(n).dot(a);
        total += dot * dot / norm_sq;
      }
    }
    return total;
  }

 private:
  static constexpr double kDegenerate = 1e-24;

  double metric_norm_sq(Index n, const VectorXd& a) const {
    if (metrics_.empty()) return a.squaredNorm();
    return a.dot(metrics_[static_cast<std::size_t>(n)] * a);
  }

  double scale(Index n) const {
    if (metrics_.empty()) return 1.0;
    return std::max(1.0, metrics_[static_cast<std::size_t>(n)].trace());
  }

  MatrixXd features_;
  MatrixXd rotated_;
  std::vector<MatrixXd> metrics_;
};

/// Row objective for an omega matrix ((m-1) x G) given features beta(X)
/// (G x N) and the pre-rotated observations (m x N).
inline double objective_avn(const MatrixXd& omega, const MatrixXd& features,
                            const MatrixXd& rotated_obs) {
  const RowObjective objective(features, rotated_obs);
  detail::require(omega.rows() == objective.num_angles() && omega.cols() == objective.num_basis(),
                  "omega has the wrong shape");
  return objective.value(Eigen::Map<const VectorXd>(omega.data(), omega.size()));
}

namespace detail {

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (a + 1) + 0xBF58476D1CE4E5B9ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline ConstraintFit<StateDependentConstraintModel> learn_state_dependent(
    const MatrixXd& u, const MatrixXd& x, const FeatureMatrixProvider* phi, ConstraintMode mode,
    const LearnOptions& options, const ConstraintSettings& settings) {
  options.validate();
  check_observations(u);
  require(x.cols() == u.cols(), "states and observations disagree on sample count");
  require(x.allFinite(), "states contain non-finite values");
  require(settings.num_basis >= 1 && settings.num_basis <= u.cols(),
          "basis count must lie in [1, N]");
  const Index n = u.cols();
  const Index dim_u = u.rows();
  const Index dim_phi = phi ? phi->dim_phi : dim_u;
  if (phi) require(phi->dim_u == dim_u, "feature matrix width must equal dim_u");

  std::vector<MatrixXd> phis;
  if (phi) {
    phis.reserve(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
      MatrixXd f = (*phi)(x.col(i));
      require(f.allFinite(), "feature matrix is not finite at sample " + std::to_string(i));
      if (truncated_svd(f, options.svd_threshold).rank == 0) {
        throw ValidationError("feature matrix has rank 0 at sample " + std::to_string(i));
      }
      phis.push_back(std::move(f));
    }
  }

  const Index limit = std::min(dim_phi, dim_u - 1);
  require(limit >= 1, "feature matrix admits no constraint rows");
  if (settings.num_rows) {
    require(*settings.num_rows >= 1 && *settings.num_rows <= limit,
            "num_rows must lie in [1, min(dim_phi, dim_u - 1)]");
  }
  const Index max_rows = settings.num_rows.value_or(limit);

  ConstraintFit<StateDependentConstraintModel> fit;
  StateDependentConstraintModel& model = fit.model;
  model.mode = mode;
  model.dim_u = dim_u;
  model.dim_phi = dim_phi;
  model.dim_b = 0;
  model.feature_name = phi ? phi->name : "identity";
  model.rbf = make_rbf_basis(x, settings.num_basis, 0, options.rng_seed);
  const MatrixXd features = rbf_feature_matrix(x, model.rbf.centers, model.rbf.width);
  const Index num_basis = features.rows();

  // Least-squares weights c with c^T beta(x) ~= 1, used to turn a constant
  // angle vector into an omega seed.
  const MatrixXd gram = features * features.transpose();
  const double ridge = std::max(options.regularization, 1e-10) * std::max(1.0, gram.trace() / num_basis);
  const VectorXd const_weights =
      (gram + ridge * MatrixXd::Identity(num_basis, num_basis)).ldlt().solve(features.rowwise().sum());

  const double total = u.squaredNorm();
  double accepted = 0.0;
  bool all_converged = true;

  for (Index s = 0; s < max_rows; ++s) {
    const Index m = dim_phi - s;
    MatrixXd rotated(m, n);
    std::vector<MatrixXd> metrics;
    if (phi) metrics.reserve(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
      const MatrixXd prev = model.raw_selection_rows(x.col(i), s);
      const MatrixXd complement = orthogonal_complement_rotation(prev);
      if (!phi) {
        rotated.col(i) = complement * u.col(i);
        continue;
      }
      const MatrixXd& f = phis[static_cast<std::size_t>(i)];
      const MatrixXd free = nullspace_projector(prev * f, options.svd_threshold).projector;
      const MatrixXd basis = free * f.transpose() * complement.transpose();  // dim_u x m
      rotated.col(i) = basis.transpose() * u.col(i);
      metrics.push_back(basis.transpose() * basis);
    }
    const RowObjective objective(features, std::move(rotated), std::move(metrics));
    const Index dims = objective.num_angles();

    VectorXd best_params = VectorXd::Zero(objective.num_params());
    double best_value = std::numeric_limits<double>::infinity();
    bool best_converged = true;
    StopReason best_reason = StopReason::kFunTol;
    if (dims == 0) {
      best_value = objective.value(best_params);
    } else {
      for (int restart = 0; restart < options.num_restarts; ++restart) {
        VectorXd theta0;
        if (restart == 0) {
          theta0 = grid_search_angles(dims, options.search_resolution, 4096,
                                      [&](const VectorXd& t) { return objective.value_at_angles(t); });
        } else {
          std::mt19937_64 rng(mix_seed(options.rng_seed, static_cast<std::uint64_t>(s),
                                       static_cast<std::uint64_t>(restart)));
          std::uniform_real_distribution<double> angle(0.0, std::numbers::pi);
          theta0.resize(dims);
          for (Index i = 0; i < dims; ++i) theta0(i) = angle(rng);
        }
        const MatrixXd omega0 = theta0 * const_weights.transpose();
        LmProblem problem;
        problem.residual = [&](const VectorXd& p) { return objective.residuals(p); };
        problem.jacobian = [&](const VectorXd& p) { return objective.jacobian(p); };
        problem.initial = Eigen::Map<const VectorXd>(omega0.data(), omega0.size());
        problem.options = options;
        const LmResult result = lm_solve(problem);
        fit.report.iterations += result.report.iterations;
        if (result.report.final_objective < best_value) {
          best_value = result.report.final_objective;
          best_params = result.params;
          best_converged = result.report.converged;
          best_reason = result.report.reason;
        }
      }
    }

    const double share = best_value / total;
    fit.report.objective_trace.push_back(accepted + share);
    const bool keep = settings.num_rows ? true : (s == 0 || share <= settings.row_tolerance);
    if (s == 0) fit.constraint_found = settings.num_rows || share <= settings.row_tolerance;
    if (!keep) break;

    all_converged = all_converged && best_converged;
    fit.report.reason = best_reason;
    accepted += share;
    MatrixXd stacked(model.rbf.weights.rows() + dims, num_basis);
    stacked << model.rbf.weights, objective.omega_from_params(best_params);
    model.rbf.weights = std::move(stacked);
    model.dim_b = s + 1;
    if (!settings.num_rows && s == 0 && !fit.constraint_found) break;
  }
  if (model.rbf.weights.rows() == 0) model.rbf.weights.resize(0, num_basis);

  // Report the full objective sum_n ||pinv(A_n) A_n u_n||^2 of the final model.
  double final_objective = 0.0;
  for (Index i = 0; i < n; ++i) {
    const MatrixXd proj = model.projector(x.col(i), phi, options.svd_threshold);
    final_objective += (u.col(i) - proj * u.col(i)).squaredNorm();
  }
  const double count = static_cast<double>(n);
  fit.report.final_objective = final_objective;
  fit.report.set_error(final_objective / count, total / count);
  fit.report.converged = all_converged;
  if (!fit.constraint_found) fit.report.warnings.emplace_back("no-constraint-found");
  return fit;
}

}  // namespace detail

/// State-dependent constraint rows A(x) = (a_1(theta_1(x)); ...), learned row
/// by row with multi-start Levenberg-Marquardt over the RBF weights.
inline ConstraintFit<StateDependentConstraintModel> learn_alpha(
    const MatrixXd& u, const MatrixXd& x, const LearnOptions& options = {},
    const ConstraintSettings& settings = {}) {
  return detail::learn_state_dependent(u, x, nullptr, ConstraintMode::kAlpha, options, settings);
}

/// State-dependent selection matrix over a feature matrix, A(x) = Lambda(x) Phi(x).
inline ConstraintFit<StateDependentConstraintModel> learn_lambda(
    const MatrixXd& u, const MatrixXd& x, const FeatureMatrixProvider& phi,
    const LearnOptions& options = {}, const ConstraintSettings& settings = {}) {
  return detail::learn_state_dependent(u, x, &phi, ConstraintMode::kLambda, options, settings);
}

}  // namespace ccl

#endif  // CCL_CONSTRAINT_HPP_

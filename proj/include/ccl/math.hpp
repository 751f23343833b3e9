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

// Numerical kernels shared by the learners. Everything here is a pure function.

#ifndef CCL_MATH_HPP_
#define CCL_MATH_HPP_

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "ccl/core.hpp"

namespace ccl {

inline constexpr double kDefaultSvdThreshold = 1e-8;

namespace detail {

// Thin SVD with the rank cut at `threshold * sigma_max`.
struct TruncatedSvd {
  MatrixXd u;
  VectorXd sigma;
  MatrixXd v;
  Index rank = 0;
};

inline TruncatedSvd truncated_svd(const MatrixXd& m, double threshold) {
  TruncatedSvd out;
  if (m.size() == 0) {
    out.u = MatrixXd::Zero(m.rows(), 0);
    out.v = MatrixXd::Zero(m.cols(), 0);
    return out;
  }
  Eigen::JacobiSVD<MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const VectorXd& s = svd.singularValues();
  const double cut = threshold * (s.size() > 0 ? s(0) : 0.0);
  Index rank = 0;
  while (rank < s.size() && s(rank) > cut && s(rank) > 0.0) ++rank;
  out.rank = rank;
  out.u = svd.matrixU().leftCols(rank);
  out.sigma = s.head(rank);
  out.v = svd.matrixV().leftCols(rank);
  return out;
}

}  // namespace detail

/// Moore-Penrose pseudoinverse with singular values below
/// `threshold * sigma_max` treated as zero.
inline MatrixXd pinv_truncated(const MatrixXd& m, double threshold = kDefaultSvdThreshold) {
  const detail::TruncatedSvd svd = detail::truncated_svd(m, threshold);
  if (svd.rank == 0) return MatrixXd::Zero(m.cols(), m.rows());
  return svd.v * svd.sigma.cwiseInverse().asDiagonal() * svd.u.transpose();
}

/// A constraint matrix together with its null-space projector I - pinv(A) A.
struct ProjectionPair {
  MatrixXd a_matrix;   // dim_b x dim_u
  MatrixXd projector;  // dim_u x dim_u
  Index rank = 0;      // numerical rank of a_matrix
};

// The projector is assembled as I - V_r V_r^T from the retained right singular
// vectors, which equals I - pinv(A) A and is symmetric by construction.
inline ProjectionPair nullspace_projector(const MatrixXd& a,
                                          double threshold = kDefaultSvdThreshold) {
  detail::require(a.rows() <= a.cols(), "constraint matrix must satisfy dim_b <= dim_u");
  const detail::TruncatedSvd svd = detail::truncated_svd(a, threshold);
  ProjectionPair out;
  out.a_matrix = a;
  out.rank = svd.rank;
  out.projector = MatrixXd::Identity(a.cols(), a.cols()) - svd.v * svd.v.transpose();
  return out;
}

/// Hyperspherical unit vector of length theta.size() + 1:
///   a_i = cos(theta_i) * prod_{j<i} sin(theta_j),  a_last = prod_j sin(theta_j).
/// In two dimensions this is (cos theta, sin theta).
inline VectorXd unit_vector_from_angles(const VectorXd& theta) {
  const Index dim = theta.size() + 1;
  VectorXd a(dim);
  double sin_prod = 1.0;
  for (Index i = 0; i + 1 < dim; ++i) {
    a(i) = std::cos(theta(i)) * sin_prod;
    sin_prod *= std::sin(theta(i));
  }
  a(dim - 1) = sin_prod;
  return a;
}

/// d a / d theta, shape (dim) x (dim - 1).
inline MatrixXd unit_vector_jacobian(const VectorXd& theta) {
  const Index m = theta.size();
  const Index dim = m + 1;
  MatrixXd jac = MatrixXd::Zero(dim, m);
  for (Index k = 0; k < m; ++k) {
    // prod_{j<i, j!=k} sin(theta_j), built up as i advances past k.
    double prod_excl = 1.0;
    for (Index j = 0; j < k; ++j) prod_excl *= std::sin(theta(j));
    jac(k, k) = -std::sin(theta(k)) * prod_excl;
    const double dk = std::cos(theta(k));
    for (Index i = k + 1; i < dim; ++i) {
      const double lead = (i + 1 < dim) ? std::cos(theta(i)) : 1.0;
      jac(i, k) = lead * prod_excl * dk;
      if (i + 1 < dim) prod_excl *= std::sin(theta(i));
    }
  }
  return jac;
}

/// Rows that complete `rows` (k x dim, orthonormal) to an orthonormal basis of
/// R^dim. Returns (dim - k) x dim. Throws if `rows` are not orthonormal.
inline MatrixXd orthogonal_complement_rotation(const MatrixXd& rows) {
  const Index k = rows.rows();
  const Index dim = rows.cols();
  detail::require(k <= dim, "more rows than dimensions");
  if (k == 0) return MatrixXd::Identity(dim, dim);
  const double gram_err = (rows * rows.transpose() - MatrixXd::Identity(k, k)).cwiseAbs().maxCoeff();
  detail::require(gram_err <= 1e-9, "rows are not orthonormal");
  Eigen::HouseholderQR<MatrixXd> qr(rows.transpose());
  const MatrixXd q = qr.householderQ() * MatrixXd::Identity(dim, dim);
  return q.rightCols(dim - k).transpose();
}

/// Entry (i, j) = || a_i - b_j ||^2 for the columns of `a_set` and `b_set`.
inline MatrixXd pairwise_sq_distances(const MatrixXd& a_set, const MatrixXd& b_set) {
  detail::require(a_set.rows() == b_set.rows(), "point sets must share their dimension");
  const VectorXd a_sq = a_set.colwise().squaredNorm().transpose();
  const VectorXd b_sq = b_set.colwise().squaredNorm().transpose();
  MatrixXd d = -2.0 * a_set.transpose() * b_set;
  d.colwise() += a_sq;
  d.rowwise() += b_sq.transpose();
  return d.cwiseMax(0.0);
}

struct KMeansResult {
  MatrixXd centers;           // dim_x x G
  std::vector<double> wcss;   // within-cluster sum of squares after each update
  int iterations = 0;
};

// Lloyd's algorithm seeded by greedy farthest-point selection. The first seed
// is drawn from `seed`; ties resolve to the lowest sample index.
inline KMeansResult kmeans(const MatrixXd& x, Index num_centers, std::uint64_t seed,
                           int max_iter = 100) {
  const Index n = x.cols();
  detail::require(num_centers >= 1, "need at least one center");
  detail::require(num_centers <= n, "more centers than samples");
  detail::require(x.allFinite(), "k-means input contains non-finite values");

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<Index> pick(0, n - 1);

  KMeansResult out;
  out.centers.resize(x.rows(), num_centers);
  out.centers.col(0) = x.col(pick(rng));
  VectorXd nearest = (x.colwise() - out.centers.col(0)).colwise().squaredNorm().transpose();
  for (Index g = 1; g < num_centers; ++g) {
    Index far = 0;
    nearest.maxCoeff(&far);
    out.centers.col(g) = x.col(far);
    nearest = nearest.cwiseMin((x.colwise() - out.centers.col(g)).colwise().squaredNorm().transpose());
  }

  std::vector<Index> assign(static_cast<std::size_t>(n), -1);
  for (int iter = 0; iter < max_iter; ++iter) {
    const MatrixXd d = pairwise_sq_distances(x, out.centers);
    bool changed = false;
    VectorXd dist_to_own(n);
    for (Index i = 0; i < n; ++i) {
      Index best = 0;
      dist_to_own(i) = d.row(i).minCoeff(&best);
      if (assign[static_cast<std::size_t>(i)] != best) changed = true;
      assign[static_cast<std::size_t>(i)] = best;
    }
    if (!changed && iter > 0) break;

    MatrixXd sums = MatrixXd::Zero(x.rows(), num_centers);
    VectorXd counts = VectorXd::Zero(num_centers);
    for (Index i = 0; i < n; ++i) {
      sums.col(assign[static_cast<std::size_t>(i)]) += x.col(i);
      counts(assign[static_cast<std::size_t>(i)]) += 1.0;
    }
    for (Index g = 0; g < num_centers; ++g) {
      if (counts(g) > 0.0) {
        out.centers.col(g) = sums.col(g) / counts(g);
        continue;
      }
      // Empty cluster: move it onto the sample farthest from its center.
      Index far = 0;
      dist_to_own.maxCoeff(&far);
      out.centers.col(g) = x.col(far);
      dist_to_own(far) = 0.0;
      assign[static_cast<std::size_t>(far)] = g;
    }

    double wcss = 0.0;
    for (Index i = 0; i < n; ++i) {
      wcss += (x.col(i) - out.centers.col(assign[static_cast<std::size_t>(i)])).squaredNorm();
    }
    out.wcss.push_back(wcss);
    out.iterations = iter + 1;
  }
  return out;
}

inline MatrixXd kmeans_centers(const MatrixXd& x, Index num_centers, std::uint64_t seed) {
  return kmeans(x, num_centers, seed).centers;
}

/// beta_g(x) = exp(-||x - mu_g||^2 / (2 * width)).
inline VectorXd rbf_features(const VectorXd& x, const MatrixXd& centers, double width) {
  detail::require(width > 0.0, "rbf width must be > 0");
  detail::require(x.size() == centers.rows(), "state dimension does not match centers");
  return ((centers.colwise() - x).colwise().squaredNorm().transpose() / (-2.0 * width))
      .array()
      .exp()
      .matrix();
}

/// Column n holds rbf_features(x_n). Shape G x N.
inline MatrixXd rbf_feature_matrix(const MatrixXd& x, const MatrixXd& centers, double width) {
  detail::require(width > 0.0, "rbf width must be > 0");
  detail::require(x.rows() == centers.rows(), "state dimension does not match centers");
  return (pairwise_sq_distances(centers, x) / (-2.0 * width)).array().exp().matrix();
}

/// Squared mean distance between centers, averaged over the full G x G
/// distance table (diagonal included).
inline double rbf_width_from_centers(const MatrixXd& centers) {
  const double mean_dist = pairwise_sq_distances(centers, centers).cwiseSqrt().mean();
  return mean_dist * mean_dist;
}

/// K-means centers plus the mean-distance width rule. Throws when the states
/// have no spread, because the features would then be constant.
inline RbfModel make_rbf_basis(const MatrixXd& x, Index num_basis, Index dim_out,
                               std::uint64_t seed) {
  detail::require(num_basis >= 1, "need at least one basis function");
  detail::require(num_basis <= x.cols(), "more basis functions than samples");
  const VectorXd spread = x.rowwise().maxCoeff() - x.rowwise().minCoeff();
  detail::require(spread.maxCoeff() > 0.0,
                  "feature construction degenerate: all states are identical");
  RbfModel model;
  model.centers = kmeans_centers(x, num_basis, seed);
  model.width = rbf_width_from_centers(model.centers);
  if (!(model.width > 0.0)) {
    // One center (or coincident centers): fall back to the data spread.
    model.width = (x.colwise() - model.centers.col(0)).colwise().squaredNorm().mean();
  }
  detail::require(model.width > 0.0, "feature construction degenerate: zero rbf width");
  model.weights = MatrixXd::Zero(dim_out, num_basis);
  return model;
}

}  // namespace ccl

#endif  // CCL_MATH_HPP_

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

// Synthetic demonstration data: a 2-D toy system and a planar two-link arm,
// each driven by a known policy under known constraints, so that every
// ground-truth channel (pi, v, w) is available for evaluation.

#ifndef CCL_DATA_HPP_
#define CCL_DATA_HPP_

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "ccl/constraint.hpp"
#include "ccl/core.hpp"
#include "ccl/math.hpp"

namespace ccl {

/// Limit cycle of radius r0 in the plane:
///   pi(x) = (alpha x1 (r0^2 - r^2) - omega x2, alpha x2 (r0^2 - r^2) + omega x1).
inline VectorXd policy_limit_cycle(const VectorXd& x, double r0 = 0.5, double alpha = 1.0,
                                   double omega = 1.0) {
  detail::require(x.size() == 2, "limit-cycle policy is defined on R^2");
  const double radial = alpha * (r0 * r0 - x.squaredNorm());
  VectorXd out(2);
  out << radial * x(0) - omega * x(1), radial * x(1) + omega * x(0);
  return out;
}

/// Linear attractor -L (x - x*).
inline VectorXd policy_linear(const VectorXd& x, const MatrixXd& gain, const VectorXd& target) {
  detail::require(gain.cols() == x.size() && target.size() == x.size(),
                  "linear policy dimensions disagree");
  return -gain * (x - target);
}

/// Planar arm with two revolute joints. Lengths in meters.
struct TwoLinkArm {
  double l1 = 1.0;
  double l2 = 1.0;

  Eigen::Vector2d forward_kinematics(const VectorXd& q) const {
    detail::require(q.size() == 2, "two-link arm needs two joint angles");
    return {l1 * std::cos(q(0)) + l2 * std::cos(q(0) + q(1)),
            l1 * std::sin(q(0)) + l2 * std::sin(q(0) + q(1))};
  }

  MatrixXd jacobian(const VectorXd& q) const {
    detail::require(q.size() == 2, "two-link arm needs two joint angles");
    const double s1 = std::sin(q(0));
    const double c1 = std::cos(q(0));
    const double s12 = std::sin(q(0) + q(1));
    const double c12 = std::cos(q(0) + q(1));
    MatrixXd j(2, 2);
    j << -l1 * s1 - l2 * s12, -l2 * s12,
          l1 * c1 + l2 * c12,  l2 * c12;
    return j;
  }
};

inline MatrixXd twolink_jacobian(const VectorXd& q, const TwoLinkArm& arm = {}) {
  return arm.jacobian(q);
}

enum class SystemKind { kToy2d, kTwoLink };
enum class PolicyKind { kLimitCycle, kLinearAttractor };
enum class TaskKind { kZero, kConstant, kSinusoid };

/// One group's constraint.
struct ConstraintSpec {
  enum class Kind { kNone, kFixedAngle, kParabolic, kJacobianRows };
  Kind kind = Kind::kNone;
  double parameter = 0.0;  // angle in radians (fixed-angle) or curvature a (parabolic)
  std::vector<int> rows;   // selected Jacobian rows

  static ConstraintSpec none() { return {}; }
  static ConstraintSpec fixed_angle(double radians) { return {Kind::kFixedAngle, radians, {}}; }
  static ConstraintSpec parabolic(double a) { return {Kind::kParabolic, a, {}}; }
  static ConstraintSpec jacobian_rows(std::vector<int> r) { return {Kind::kJacobianRows, 0.0, std::move(r)}; }

  Index dim_b() const {
    switch (kind) {
      case Kind::kNone: return 0;
      case Kind::kFixedAngle:
      case Kind::kParabolic: return 1;
      case Kind::kJacobianRows: return static_cast<Index>(rows.size());
    }
    return 0;
  }
};

struct TaskSpec {
  TaskKind kind = TaskKind::kZero;
  VectorXd constant;        // b for the constant kind, length dim_b
  double amplitude = 1.0;   // sinusoid: b_n = A(x_n) s_n, s_n,i = amplitude sin(frequency n + phase + i pi/2)
  double frequency = 0.1;
  double phase = 0.0;
};

struct GeneratorConfig {
  SystemKind system = SystemKind::kToy2d;
  PolicyKind policy = PolicyKind::kLimitCycle;
  std::vector<ConstraintSpec> groups{ConstraintSpec::none()};  // K = groups.size()
  TaskSpec task;
  Index samples_per_group = 500;
  double noise_std = 0.0;
  std::uint64_t seed = 0;

  double r0 = 0.5;
  double alpha = 1.0;
  double omega = 1.0;
  MatrixXd gain = MatrixXd::Identity(2, 2);
  VectorXd target = VectorXd::Zero(2);

  TwoLinkArm arm;
  // State sampling box; toy2d uses [-1, 1]^2, twolink [0, pi/2]^2 by default.
  std::optional<Eigen::Vector2d> box_lower;
  std::optional<Eigen::Vector2d> box_upper;

  Eigen::Vector2d lower() const {
    if (box_lower) return *box_lower;
    return system == SystemKind::kToy2d ? Eigen::Vector2d(-1.0, -1.0) : Eigen::Vector2d(0.0, 0.0);
  }
  Eigen::Vector2d upper() const {
    if (box_upper) return *box_upper;
    const double hi = system == SystemKind::kToy2d ? 1.0 : std::numbers::pi / 2.0;
    return {hi, hi};
  }

  void validate() const {
    detail::require(!groups.empty(), "generator needs at least one group");
    detail::require(samples_per_group >= 1, "generator needs at least one sample per group");
    detail::require(noise_std >= 0.0 && std::isfinite(noise_std), "noise_std must be >= 0");
    detail::require((upper() - lower()).minCoeff() >= 0.0, "state box bounds are inverted");
    if (policy == PolicyKind::kLinearAttractor) {
      detail::require(gain.rows() == 2 && gain.cols() == 2 && target.size() == 2,
                      "linear attractor needs a 2 x 2 gain and a 2-vector target");
    }
    for (const ConstraintSpec& c : groups) {
      detail::require(c.dim_b() < 2, "constraint dimensionality must be < dim_u");
      if (c.kind == ConstraintSpec::Kind::kJacobianRows) {
        detail::require(system == SystemKind::kTwoLink, "jacobian-row constraints need the twolink system");
        for (int r : c.rows) detail::require(r == 0 || r == 1, "jacobian row index out of range");
      }
      if (c.kind == ConstraintSpec::Kind::kParabolic || c.kind == ConstraintSpec::Kind::kFixedAngle) {
        detail::require(std::isfinite(c.parameter), "constraint parameter must be finite");
      }
      if (task.kind == TaskKind::kConstant && c.dim_b() > 0) {
        detail::require(task.constant.size() == c.dim_b(), "constant task must have length dim_b");
      }
    }
  }
};

/// A(x) for a group, dim_b x 2.
inline MatrixXd constraint_matrix(const ConstraintSpec& spec, const VectorXd& x,
                                  const TwoLinkArm& arm = {}) {
  switch (spec.kind) {
    case ConstraintSpec::Kind::kNone:
      return MatrixXd::Zero(0, 2);
    case ConstraintSpec::Kind::kFixedAngle: {
      MatrixXd a(1, 2);
      a << std::cos(spec.parameter), std::sin(spec.parameter);
      return a;
    }
    case ConstraintSpec::Kind::kParabolic: {
      MatrixXd a(1, 2);
      a << -2.0 * spec.parameter * x(0), 1.0;
      return a;
    }
    case ConstraintSpec::Kind::kJacobianRows: {
      const MatrixXd j = arm.jacobian(x);
      MatrixXd a(static_cast<Index>(spec.rows.size()), 2);
      for (std::size_t r = 0; r < spec.rows.size(); ++r) a.row(static_cast<Index>(r)) = j.row(spec.rows[r]);
      return a;
    }
  }
  return MatrixXd::Zero(0, 2);
}

inline VectorXd evaluate_policy(const GeneratorConfig& config, const VectorXd& x) {
  if (config.policy == PolicyKind::kLimitCycle) {
    return policy_limit_cycle(x, config.r0, config.alpha, config.omega);
  }
  return policy_linear(x, config.gain, config.target);
}

/// Samples each group i.i.d. from the state box with seed (seed + group) and
/// composes u = pinv(A) b + N pi + noise. Ground-truth pi, v and w are stored.
inline DemonstrationSet generate(const GeneratorConfig& config) {
  config.validate();
  const Index per = config.samples_per_group;
  const Index k = static_cast<Index>(config.groups.size());
  const Index total = per * k;
  MatrixXd x(2, total);
  MatrixXd u(2, total);
  MatrixXd pi(2, total);
  MatrixXd v(2, total);
  MatrixXd w(2, total);
  std::vector<int> labels(static_cast<std::size_t>(total));
  const Eigen::Vector2d lo = config.lower();
  const Eigen::Vector2d hi = config.upper();

  for (Index g = 0; g < k; ++g) {
    const ConstraintSpec& spec = config.groups[static_cast<std::size_t>(g)];
    std::mt19937_64 rng(config.seed + static_cast<std::uint64_t>(g));
    // Noise has its own stream so the clean part of a dataset does not depend on noise_std.
    std::seed_seq noise_seed{static_cast<std::uint32_t>(config.seed), static_cast<std::uint32_t>(config.seed >> 32),
                            static_cast<std::uint32_t>(g), 0x6e6f6973u};
    std::mt19937_64 noise_rng(noise_seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, 1.0);
    for (Index i = 0; i < per; ++i) {
      const Index col = g * per + i;
      VectorXd state(2);
      for (Index d = 0; d < 2; ++d) state(d) = lo(d) + (hi(d) - lo(d)) * unit(rng);
      const MatrixXd a = constraint_matrix(spec, state, config.arm);
      const VectorXd policy = evaluate_policy(config, state);

      VectorXd b = VectorXd::Zero(a.rows());
      if (a.rows() > 0) {
        if (config.task.kind == TaskKind::kConstant) {
          b = config.task.constant;
        } else if (config.task.kind == TaskKind::kSinusoid) {
          VectorXd s(2);
          for (Index d = 0; d < 2; ++d) {
            s(d) = config.task.amplitude *
                   std::sin(config.task.frequency * static_cast<double>(i) + config.task.phase +
                            static_cast<double>(d) * std::numbers::pi / 2.0);
          }
          b = a * s;
        }
      }
      const VectorXd task = a.rows() > 0 ? VectorXd(pinv_truncated(a) * b) : VectorXd::Zero(2);
      const VectorXd null = a.rows() > 0 ? VectorXd(nullspace_projector(a).projector * policy) : policy;

      x.col(col) = state;
      pi.col(col) = policy;
      v.col(col) = task;
      w.col(col) = null;
      u.col(col) = task + null;
      if (config.noise_std > 0.0) {
        for (Index d = 0; d < 2; ++d) u(d, col) += config.noise_std * noise(noise_rng);
      }
      labels[static_cast<std::size_t>(col)] = static_cast<int>(g);
    }
  }
  return DemonstrationSet(std::move(x), std::move(u), std::move(labels), std::move(pi), std::move(v),
                          std::move(w));
}

/// True null-space projector N(x_n) of every sample, from the generating config.
inline std::vector<MatrixXd> true_projectors(const GeneratorConfig& config,
                                             const DemonstrationSet& data) {
  std::vector<MatrixXd> out;
  out.reserve(static_cast<std::size_t>(data.size()));
  for (Index n = 0; n < data.size(); ++n) {
    const int g = data.group_ids()[static_cast<std::size_t>(n)];
    const MatrixXd a = constraint_matrix(config.groups[static_cast<std::size_t>(g)], data.states().col(n),
                                         config.arm);
    out.push_back(a.rows() > 0 ? nullspace_projector(a).projector : MatrixXd::Identity(2, 2));
  }
  return out;
}

/// Named feature matrices for lambda models: "identity" and "twolink-jacobian".
inline FeatureMatrixProvider make_feature_provider(const std::string& name, Index dim_u,
                                                   const TwoLinkArm& arm = {}) {
  if (name == "identity") return identity_features(dim_u);
  if (name == "twolink-jacobian") {
    detail::require(dim_u == 2, "twolink-jacobian features need dim_u = 2");
    return {name, 2, 2, [arm](const VectorXd& q) { return arm.jacobian(q); }};
  }
  throw ValidationError("unknown feature matrix '" + name + "'");
}

}  // namespace ccl

#endif  // CCL_DATA_HPP_

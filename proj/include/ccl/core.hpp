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

#ifndef CCL_CORE_HPP_
#define CCL_CORE_HPP_

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace ccl {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// Raised when inputs violate a documented precondition or invariant.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Raised on file-system and parse failures.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline bool all_finite(const MatrixXd& m) { return m.allFinite(); }

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ValidationError(message);
}

}  // namespace detail

/// Solver and search settings shared by every learner.
struct LearnOptions {
  double tol_fun = 1e-9;          // residual tolerance
  double tol_x = 1e-9;            // parameter tolerance
  int max_iter = 1000;            // optimiser iteration cap
  int search_resolution = 90;     // candidate angles per dimension
  int num_restarts = 5;
  double svd_threshold = 1e-8;    // relative singular-value cut-off
  double regularization = 1e-8;   // ridge term on normal equations
  std::uint64_t rng_seed = 0;

  void validate() const {
    detail::require(tol_fun > 0.0 && std::isfinite(tol_fun), "tol_fun must be > 0");
    detail::require(tol_x > 0.0 && std::isfinite(tol_x), "tol_x must be > 0");
    detail::require(max_iter >= 1, "max_iter must be >= 1");
    detail::require(search_resolution >= 2, "search_resolution must be >= 2");
    detail::require(num_restarts >= 1, "num_restarts must be >= 1");
    detail::require(svd_threshold >= 0.0 && std::isfinite(svd_threshold),
                    "svd_threshold must be >= 0");
    detail::require(regularization >= 0.0 && std::isfinite(regularization),
                    "regularization must be >= 0");
  }
};

enum class StopReason { kFunTol, kXTol, kMaxIter, kDampingOverflow };

inline std::string_view to_string(StopReason reason) {
  switch (reason) {
    case StopReason::kFunTol: return "fun-tol";
    case StopReason::kXTol: return "x-tol";
    case StopReason::kMaxIter: return "max-iter";
    case StopReason::kDampingOverflow: return "damping-overflow";
  }
  return "unknown";
}

inline StopReason stop_reason_from_string(std::string_view text) {
  if (text == "fun-tol") return StopReason::kFunTol;
  if (text == "x-tol") return StopReason::kXTol;
  if (text == "max-iter") return StopReason::kMaxIter;
  if (text == "damping-overflow") return StopReason::kDampingOverflow;
  throw ValidationError("unknown stop reason '" + std::string(text) + "'");
}

/// Outcome of a learning call. `nmse == mse / variance` whenever variance > 0.
struct LearnReport {
  double nmse = 0.0;
  double mse = 0.0;
  double variance = 0.0;
  int iterations = 0;
  double final_objective = 0.0;
  bool converged = false;
  StopReason reason = StopReason::kMaxIter;

  // Objective after each accepted step (LM) or per candidate row (constraint
  // learners).
  std::vector<double> objective_trace;
  // Samples excluded from the fit (zero-norm actions, degenerate projectors).
  int dropped_samples = 0;
  std::vector<std::string> warnings;

  void set_error(double mean_squared_error, double var) {
    mse = mean_squared_error;
    variance = var;
    if (var > 0.0) {
      nmse = mse / var;
    } else {
      nmse = mse > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
    }
  }
};

/// A learned model with the report describing how it was obtained.
template <typename Model>
struct Learned {
  Model model;
  LearnReport report;
};

/// Gaussian radial basis regression model: prediction = weights * beta(x).
struct RbfModel {
  MatrixXd centers;  // dim_x x G
  double width = 1.0;  // shared squared length-scale
  MatrixXd weights;  // dim_out x G

  Index dim_x() const { return centers.rows(); }
  Index num_basis() const { return centers.cols(); }
  Index dim_out() const { return weights.rows(); }

  void validate() const {
    detail::require(centers.cols() >= 1, "RbfModel needs at least one center");
    detail::require(width > 0.0 && std::isfinite(width), "RbfModel width must be > 0");
    detail::require(weights.cols() == centers.cols(),
                    "RbfModel weights must have one column per center");
    detail::require(centers.allFinite(), "RbfModel centers must be finite");
    detail::require(weights.allFinite(), "RbfModel weights must be finite");
  }

  bool operator==(const RbfModel&) const = default;
};

/// State/action samples grouped by the constraint condition that produced
/// them, with optional ground-truth decomposition channels.
///
/// Immutable once constructed. The constructor checks every invariant and
/// remaps group labels to the dense range [0, K).
class DemonstrationSet {
 public:
  DemonstrationSet(MatrixXd states, MatrixXd actions, std::vector<int> group_labels = {},
                   std::optional<MatrixXd> policy = std::nullopt,
                   std::optional<MatrixXd> task = std::nullopt,
                   std::optional<MatrixXd> null = std::nullopt)
      : states_(std::move(states)),
        actions_(std::move(actions)),
        policy_(std::move(policy)),
        task_(std::move(task)),
        null_(std::move(null)) {
    const Index n = states_.cols();
    detail::require(n >= 1, "dataset needs at least one sample");
    detail::require(states_.rows() >= 1, "dataset needs dim_x >= 1");
    detail::require(actions_.rows() >= 1, "dataset needs dim_u >= 1");
    detail::require(actions_.cols() == n, "actions and states disagree on sample count");
    check_channel(policy_, "policy");
    check_channel(task_, "task");
    check_channel(null_, "null");
    detail::require(states_.allFinite(), "states contain non-finite values");
    detail::require(actions_.allFinite(), "actions contain non-finite values");

    if (group_labels.empty()) group_labels.assign(static_cast<std::size_t>(n), 0);
    detail::require(static_cast<Index>(group_labels.size()) == n,
                    "group labels disagree on sample count");
    std::map<int, int> dense;
    for (int label : group_labels) dense.emplace(label, 0);
    int next = 0;
    for (auto& [label, id] : dense) id = next++;
    group_ids_.reserve(group_labels.size());
    for (int label : group_labels) group_ids_.push_back(dense.at(label));
    num_groups_ = next;
  }

  Index dim_x() const { return states_.rows(); }
  Index dim_u() const { return actions_.rows(); }
  Index size() const { return states_.cols(); }
  int num_groups() const { return num_groups_; }

  const MatrixXd& states() const { return states_; }
  const MatrixXd& actions() const { return actions_; }
  const std::vector<int>& group_ids() const { return group_ids_; }
  const std::optional<MatrixXd>& policy() const { return policy_; }
  const std::optional<MatrixXd>& task() const { return task_; }
  const std::optional<MatrixXd>& null() const { return null_; }

  std::vector<Index> group_indices(int group) const {
    std::vector<Index> out;
    for (Index i = 0; i < size(); ++i) {
      if (group_ids_[static_cast<std::size_t>(i)] == group) out.push_back(i);
    }
    return out;
  }

  /// Samples at `indices`, in order. Group ids are re-densified.
  DemonstrationSet subset(std::span<const Index> indices) const {
    const auto take = [&](const MatrixXd& m) {
      MatrixXd out(m.rows(), static_cast<Index>(indices.size()));
      for (std::size_t j = 0; j < indices.size(); ++j) out.col(static_cast<Index>(j)) = m.col(indices[j]);
      return out;
    };
    const auto take_opt = [&](const std::optional<MatrixXd>& m) -> std::optional<MatrixXd> {
      if (!m) return std::nullopt;
      return take(*m);
    };
    std::vector<int> groups;
    groups.reserve(indices.size());
    for (Index i : indices) {
      detail::require(i >= 0 && i < size(), "subset index out of range");
      groups.push_back(group_ids_[static_cast<std::size_t>(i)]);
    }
    return DemonstrationSet(take(states_), take(actions_), std::move(groups), take_opt(policy_),
                            take_opt(task_), take_opt(null_));
  }

 private:
  void check_channel(const std::optional<MatrixXd>& channel, const char* name) const {
    if (!channel) return;
    detail::require(channel->rows() == actions_.rows() && channel->cols() == actions_.cols(),
                    std::string(name) + " channel must be dim_u x N");
    detail::require(channel->allFinite(), std::string(name) + " channel contains non-finite values");
  }

  MatrixXd states_;
  MatrixXd actions_;
  std::vector<int> group_ids_;
  int num_groups_ = 0;
  std::optional<MatrixXd> policy_;
  std::optional<MatrixXd> task_;
  std::optional<MatrixXd> null_;
};

}  // namespace ccl

#endif  // CCL_CORE_HPP_

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

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "ccl/constraint.hpp"
#include "ccl/data.hpp"
#include "ccl/eval.hpp"
#include "ccl/lm.hpp"
#include "test_util.hpp"

namespace ccl {
namespace {

using test::deg;
using test::random_matrix;
using test::uniform_matrix;

// u_n = c_n * (-sin t, cos t): null-space data of the row (cos t, sin t).
MatrixXd planar_null_data(double theta, Index n, std::uint64_t seed) {
  const MatrixXd c = random_matrix(1, n, seed);
  MatrixXd u(2, n);
  u.row(0) = -std::sin(theta) * c;
  u.row(1) = std::cos(theta) * c;
  return u;
}

// Minimiser of sum_n (a(t) . u_n)^2 over a 0.1 degree lattice on [0, 180).
double grid_oracle_angle(const MatrixXd& u) {
  double best = 0.0;
  double best_value = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 1800; ++k) {
    const double t = deg(0.1 * k);
    const double value = (Eigen::RowVector2d(std::cos(t), std::sin(t)) * u).squaredNorm();
    if (value < best_value) {
      best_value = value;
      best = t;
    }
  }
  return best;
}

// Angle distance modulo pi (rows are sign-ambiguous).
double angle_gap(double a, double b) {
  const double d = std::fmod(std::abs(a - b), std::numbers::pi);
  return std::min(d, std::numbers::pi - d);
}

double row_angle(const MatrixXd& row) { return std::atan2(row(0, 1), row(0, 0)); }

// --------------------------------------------------- objective (constant A)

TEST(ObjectiveStateIndependent, ZeroWhenObservationsLieInNullSpace) {
  MatrixXd u = MatrixXd::Zero(2, 10);
  u.row(1) = random_matrix(1, 10, 1);
  MatrixXd a(1, 2);
  a << 1, 0;
  EXPECT_NEAR(objective_state_independent(a, u * u.transpose()), 0.0, 1e-15);
}

TEST(ObjectiveStateIndependent, WorstCaseEqualsTotalEnergy) {
  MatrixXd u = MatrixXd::Zero(2, 10);
  u.row(1) = random_matrix(1, 10, 1);
  MatrixXd a(1, 2);
  a << 0, 1;
  EXPECT_NEAR(objective_state_independent(a, u * u.transpose()), u.squaredNorm(), 1e-12);
}

TEST(ObjectiveStateIndependent, MatchesPerSampleProjectionLoop) {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 20; ++t) {
    const Index dim = 2 + static_cast<Index>(rng() % 4);
    const Index dim_b = 1 + static_cast<Index>(rng() % (dim - 1));
    const MatrixXd a = test::random_orthogonal(dim, rng()).topRows(dim_b);
    const MatrixXd u = random_matrix(dim, 50, rng());
    const MatrixXd n = nullspace_projector(a).projector;
    double loop = 0.0;
    for (Index i = 0; i < u.cols(); ++i) loop += (u.col(i) - n * u.col(i)).squaredNorm();
    EXPECT_NEAR(objective_state_independent(a, u * u.transpose()), loop, 1e-9);
  }
}

TEST(ObjectiveStateIndependent, RejectsDimensionMismatch) {
  EXPECT_THROW(objective_state_independent(MatrixXd::Ones(1, 3), MatrixXd::Identity(2, 2)), ValidationError);
}

// ------------------------------------------------------------- learn_nhat

TEST(LearnNhat, RecoversThirtyDegreesLikeGridOracle) {
  const MatrixXd u = planar_null_data(deg(30), 500, 7);
  const auto fit = learn_nhat(u);
  ASSERT_EQ(fit.model.dim_b(), 1);
  const double learned = row_angle(fit.model.rows());
  EXPECT_LT(angle_gap(learned, deg(30)), deg(0.5));
  EXPECT_LT(angle_gap(learned, grid_oracle_angle(u)), deg(0.1));
  EXPECT_LT(fit.report.final_objective, 1e-10);
  EXPECT_TRUE(fit.constraint_found);
}

TEST(LearnNhat, AxisConstraintInThreeD) {
  MatrixXd u = random_matrix(3, 200, 3);
  u.row(2).setZero();
  const auto fit = learn_nhat(u);
  ASSERT_EQ(fit.model.dim_b(), 1);
  const MatrixXd row = fit.model.rows();
  EXPECT_NEAR(std::abs(row(0, 2)), 1.0, 1e-9);
  EXPECT_LT(fit.report.final_objective, 1e-12);
}

TEST(LearnNhat, TwoRowConstraintInThreeD) {
  const MatrixXd q = test::random_orthogonal(3, 19);
  const MatrixXd a = q.topRows(2);
  const MatrixXd u = q.row(2).transpose() * random_matrix(1, 300, 20);
  const auto fit = learn_nhat(u);
  ASSERT_EQ(fit.model.dim_b(), 2);
  const MatrixXd truth = MatrixXd::Identity(3, 3) - a.transpose() * a;
  EXPECT_LT((fit.model.projector() - truth).norm(), 1e-6);
  ASSERT_EQ(fit.report.objective_trace.size(), 2u);
}

TEST(LearnNhat, IsotropicDataFlagsNoConstraint) {
  const MatrixXd u = random_matrix(2, 500, 5);
  const auto fit = learn_nhat(u);
  EXPECT_FALSE(fit.constraint_found);
  EXPECT_NE(std::find(fit.report.warnings.begin(), fit.report.warnings.end(), "no-constraint-found"),
            fit.report.warnings.end());
}

TEST(LearnNhat, RejectsAllZeroAndTooFewSamples) {
  EXPECT_THROW(learn_nhat(MatrixXd::Zero(2, 10)), ValidationError);
  EXPECT_THROW(learn_nhat(MatrixXd::Ones(3, 2)), ValidationError);
}

TEST(LearnNhat, FixedRowCountIsHonoured) {
  MatrixXd u = random_matrix(3, 100, 8);
  u.row(2).setZero();
  ConstraintSettings settings;
  settings.num_rows = 2;
  EXPECT_EQ(learn_nhat(u, {}, settings).model.dim_b(), 2);
}

TEST(LearnNhat, ProjectedObservationErrorBoundedByObjective) {
  std::mt19937_64 rng(23);
  for (int t = 0; t < 5; ++t) {
    MatrixXd u = planar_null_data(deg(10.0 + 30.0 * t), 200, rng());
    u += 0.01 * random_matrix(2, 200, rng());
    const auto fit = learn_nhat(u);
    const MatrixXd n = fit.model.projector();
    const double ratio = (n * u - u).squaredNorm() / u.squaredNorm();
    EXPECT_LE(ratio, fit.report.nmse + 1e-9);
  }
}

TEST(LearnNhat, NextRowIsOrthogonalToLearnedRows) {
  const MatrixXd q = test::random_orthogonal(4, 2);
  std::vector<VectorXd> angles{Eigen::Vector3d(0.3, 1.2, 2.0), Eigen::Vector2d(0.7, 0.1)};
  const MatrixXd rows = rows_from_angles(angles, 4);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> ang(0.0, std::numbers::pi);
  for (int t = 0; t < 20; ++t) {
    const VectorXd theta = Eigen::Vector2d(ang(rng), ang(rng));
    const VectorXd candidate = orthogonal_complement_rotation(rows).transpose() * unit_vector_from_angles(theta);
    EXPECT_LT((rows * candidate).cwiseAbs().maxCoeff(), 1e-10);
  }
  (void)q;
}

TEST(StateIndependentConstraint, RowsAreCanonicalAndOrthonormal) {
  StateIndependentConstraint c{3, {Eigen::Vector2d(2.5, 0.4), Eigen::VectorXd::Constant(1, 1.0)}};
  const MatrixXd rows = c.rows();
  EXPECT_LT((rows * rows.transpose() - MatrixXd::Identity(2, 2)).norm(), 1e-12);
  for (Index r = 0; r < 2; ++r) {
    Index first = 0;
    while (std::abs(rows(r, first)) <= 1e-12) ++first;
    EXPECT_GT(rows(r, first), 0.0);
  }
}

// ------------------------------------------------------- objective_avn / rows

TEST(ObjectiveAvn, ZeroOmegaUsesTheFirstAxis) {
  const MatrixXd u = random_matrix(2, 30, 2);
  const MatrixXd beta = uniform_matrix(4, 30, 0.0, 1.0, 3);
  EXPECT_NEAR(objective_avn(MatrixXd::Zero(1, 4), beta, u), u.row(0).squaredNorm(), 1e-12);
  MatrixXd along_y = MatrixXd::Zero(2, 30);
  along_y.row(1) = u.row(1);
  EXPECT_NEAR(objective_avn(MatrixXd::Zero(1, 4), beta, along_y), 0.0, 1e-15);
}

TEST(ObjectiveAvn, ZeroAtGeneratingWeights) {
  const MatrixXd x = uniform_matrix(2, 200, -1.0, 1.0, 4);
  const RbfModel basis = make_rbf_basis(x, 8, 1, 0);
  const MatrixXd beta = rbf_feature_matrix(x, basis.centers, basis.width);
  const MatrixXd omega = random_matrix(1, 8, 5);
  const MatrixXd theta = omega * beta;
  const MatrixXd c = random_matrix(1, 200, 6);
  MatrixXd u(2, 200);
  for (Index n = 0; n < 200; ++n) u.col(n) << -std::sin(theta(0, n)) * c(0, n), std::cos(theta(0, n)) * c(0, n);
  EXPECT_LT(objective_avn(omega, beta, u), 1e-10);
}

TEST(RowObjective, JacobianMatchesFiniteDifferences) {
  const MatrixXd beta = uniform_matrix(5, 40, 0.0, 1.0, 9);
  const MatrixXd rotated = random_matrix(3, 40, 10);
  std::vector<MatrixXd> metrics;
  for (Index n = 0; n < 40; ++n) {
    const MatrixXd b = random_matrix(3, 3, 100 + n);
    metrics.push_back(b.transpose() * b + MatrixXd::Identity(3, 3));
  }
  for (const bool with_metric : {false, true}) {
    const RowObjective obj(beta, rotated, with_metric ? metrics : std::vector<MatrixXd>{});
    for (int t = 0; t < 10; ++t) {
      const VectorXd p = random_matrix(obj.num_params(), 1, 200 + t);
      const MatrixXd analytic = obj.jacobian(p);
      const MatrixXd numeric = finite_difference_jacobian([&](const VectorXd& q) { return obj.residuals(q); }, p);
      EXPECT_LT((analytic - numeric).norm() / std::max(1.0, analytic.norm()), 1e-5);
    }
  }
}

// ------------------------------------------------- state-dependent learners

GeneratorConfig parabolic_config(Index n, std::uint64_t seed) {
  GeneratorConfig c;
  c.groups = {ConstraintSpec::parabolic(0.1)};
  c.samples_per_group = n;
  c.seed = seed;
  return c;
}

TEST(LearnAlpha, ParabolicConstraintHeldOut) {
  const DemonstrationSet train = generate(parabolic_config(500, 1));
  const DemonstrationSet test = generate(parabolic_config(500, 1001));
  const auto fit = learn_alpha(train.actions(), train.states());
  EXPECT_EQ(fit.model.dim_b, 1);
  const auto proj = projectors(fit.model, test.states());
  EXPECT_LT(error_poe(test.actions(), proj).normalized, 0.01);
}

TEST(LearnAlpha, ConstantConstraintMatchesNhat) {
  GeneratorConfig c;
  c.groups = {ConstraintSpec::fixed_angle(deg(40))};
  c.samples_per_group = 400;
  const DemonstrationSet d = generate(c);
  const auto alpha = learn_alpha(d.actions(), d.states());
  const MatrixXd nhat = learn_nhat(d.actions()).model.projector();
  double sum_sq = 0.0;
  for (Index n = 0; n < d.size(); ++n) {
    sum_sq += (alpha.model.projector(d.states().col(n)) - nhat).squaredNorm();
  }
  EXPECT_LT(std::sqrt(sum_sq / static_cast<double>(d.size())), 1e-2);
}

TEST(LearnAlpha, IdenticalStatesAreDegenerate) {
  const MatrixXd x = MatrixXd::Ones(2, 50);
  const MatrixXd u = planar_null_data(0.3, 50, 1);
  try {
    learn_alpha(u, x);
    FAIL() << "expected a validation error";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("feature construction degenerate"), std::string::npos);
  }
}

TEST(StateDependentModel, MaterializedRowsOrthonormalAtRandomStates) {
  StateDependentConstraintModel m;
  m.dim_u = 4;
  m.dim_phi = 4;
  m.dim_b = 3;
  m.rbf = make_rbf_basis(uniform_matrix(2, 100, -1, 1, 3), 6, 0, 0);
  m.rbf.weights = random_matrix(3 + 2 + 1, 6, 4);
  ASSERT_NO_THROW(m.validate());
  const MatrixXd states = uniform_matrix(2, 100, -1, 1, 5);
  for (Index n = 0; n < 100; ++n) {
    const MatrixXd a = m.constraint_matrix(states.col(n));
    EXPECT_LT((a * a.transpose() - MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-8);
  }
}

GeneratorConfig twolink_config(int row, Index n, std::uint64_t seed) {
  GeneratorConfig c;
  c.system = SystemKind::kTwoLink;
  c.policy = PolicyKind::kLinearAttractor;
  c.target = Eigen::Vector2d(0.6, 0.9);
  c.groups = {ConstraintSpec::jacobian_rows({row})};
  c.samples_per_group = n;
  c.seed = seed;
  return c;
}

TEST(LearnLambda, TwoLinkFixedEndEffectorHeight) {
  const DemonstrationSet train = generate(twolink_config(1, 300, 3));
  const DemonstrationSet test = generate(twolink_config(1, 300, 303));
  const FeatureMatrixProvider phi = make_feature_provider("twolink-jacobian", 2);
  const auto fit = learn_lambda(train.actions(), train.states(), phi);
  EXPECT_EQ(fit.model.mode, ConstraintMode::kLambda);
  const auto proj = projectors(fit.model, test.states(), &phi);
  EXPECT_LT(error_poe(test.actions(), proj).normalized, 0.01);
}

TEST(LearnLambda, IdentityFeaturesReproduceAlpha) {
  const DemonstrationSet d = generate(parabolic_config(300, 2));
  const FeatureMatrixProvider phi = identity_features(2);
  const auto lambda = learn_lambda(d.actions(), d.states(), phi);
  const auto alpha = learn_alpha(d.actions(), d.states());
  for (Index n = 0; n < d.size(); ++n) {
    const MatrixXd nl = lambda.model.projector(d.states().col(n), &phi);
    const MatrixXd na = alpha.model.projector(d.states().col(n));
    EXPECT_LT((nl - na).norm(), 1e-6);
  }
}

TEST(LearnLambda, FullSelectionRecoversFeatureNullSpace) {
  // dim_u = 3, Phi(x) is 2 x 3; selecting both rows gives N = I - pinv(Phi) Phi.
  const auto phi_fn = [](const VectorXd& x) {
    MatrixXd f(2, 3);
    f << 1.0, x(0), 0.2, 0.0, 1.0, x(1);
    return f;
  };
  const FeatureMatrixProvider phi{"test-features", 2, 3, phi_fn};
  const MatrixXd x = uniform_matrix(2, 150, -1, 1, 6);
  const MatrixXd pi = random_matrix(3, 150, 7);
  MatrixXd u(3, 150);
  for (Index n = 0; n < 150; ++n) u.col(n) = nullspace_projector(phi_fn(x.col(n))).projector * pi.col(n);
  ConstraintSettings settings;
  settings.num_rows = 2;
  const auto fit = learn_lambda(u, x, phi, {}, settings);
  ASSERT_EQ(fit.model.dim_b, 2);
  for (Index n = 0; n < 150; n += 10) {
    const MatrixXd truth = nullspace_projector(phi_fn(x.col(n))).projector;
    EXPECT_LT((fit.model.projector(x.col(n), &phi) - truth).norm(), 1e-6);
    const MatrixXd lambda = fit.model.selection_rows(x.col(n));
    EXPECT_LT((lambda * lambda.transpose() - MatrixXd::Identity(2, 2)).norm(), 1e-9);
  }
}

TEST(LearnLambda, RankZeroFeatureMatrixNamesTheSample) {
  const FeatureMatrixProvider phi{"sometimes-zero", 2, 2, [](const VectorXd& x) -> MatrixXd {
                                    return x(0) > 0.95 ? MatrixXd(MatrixXd::Zero(2, 2)) : MatrixXd(MatrixXd::Identity(2, 2));
                                  }};
  MatrixXd x = uniform_matrix(2, 40, -0.5, 0.5, 1);
  x(0, 17) = 1.0;
  try {
    learn_lambda(planar_null_data(0.2, 40, 2), x, phi);
    FAIL() << "expected a validation error";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("sample 17"), std::string::npos);
  }
}

TEST(StateDependentLearners, DeterministicGivenSeed) {
  const DemonstrationSet d = generate(parabolic_config(200, 4));
  LearnOptions o;
  o.rng_seed = 99;
  const auto a = learn_alpha(d.actions(), d.states(), o);
  const auto b = learn_alpha(d.actions(), d.states(), o);
  EXPECT_TRUE(a.model == b.model);
}

}  // namespace
}  // namespace ccl

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
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "ccl/ccl.hpp"
#include "test_util.hpp"

namespace ccl {
namespace {

using test::deg;
using test::random_matrix;
using test::uniform_matrix;

std::vector<MatrixXd> random_projectors(Index dim, Index n, std::uint64_t seed) {
  std::vector<MatrixXd> out;
  for (Index i = 0; i < n; ++i) {
    const MatrixXd q = test::random_orthogonal(dim, seed + static_cast<std::uint64_t>(i));
    const Index k = 1 + static_cast<Index>((seed + i) % static_cast<std::uint64_t>(dim - 1));
    out.push_back(q.leftCols(k) * q.leftCols(k).transpose());
  }
  return out;
}

// ------------------------------------------------------------------ metrics

TEST(Metrics, PpeCases) {
  GeneratorConfig c;
  c.groups = {ConstraintSpec::fixed_angle(deg(30))};
  c.samples_per_group = 100;
  const DemonstrationSet d = generate(c);
  const auto truth = true_projectors(c, d);
  EXPECT_LT(error_ppe(*d.null(), truth, *d.policy()).normalized, 1e-20);

  const std::vector<MatrixXd> eye(100, MatrixXd::Identity(2, 2));
  const MetricTriple m = error_ppe(*d.null(), eye, *d.policy());
  EXPECT_NEAR(m.mse, (*d.policy() - *d.null()).squaredNorm() / 100.0, 1e-14);
  EXPECT_GT(m.mse, 0.0);

  const std::vector<MatrixXd> zero(100, MatrixXd::Zero(2, 2));
  EXPECT_NEAR(error_ppe(*d.null(), zero, *d.policy()).normalized, 1.0, 1e-14);
}

TEST(Metrics, PoeCases) {
  const MatrixXd u = random_matrix(3, 40, 1);
  const std::vector<MatrixXd> zero(40, MatrixXd::Zero(3, 3));
  const MetricTriple z = error_poe(u, zero);
  EXPECT_NEAR(z.normalized, 1.0, 1e-14);
  EXPECT_NEAR(z.mse, u.squaredNorm() / 40.0, 1e-14);

  const auto p = random_projectors(3, 40, 2);
  double loop = 0.0;
  for (Index n = 0; n < 40; ++n) loop += (p[static_cast<std::size_t>(n)] * u.col(n) - u.col(n)).squaredNorm();
  EXPECT_NEAR(error_poe(u, p).mse, loop / 40.0, 1e-12);
  EXPECT_EQ(error_poe(u, p, random_matrix(3, 40, 9)).mse, error_poe(u, p).mse);

  MatrixXd null_data(3, 40);
  for (Index n = 0; n < 40; ++n) null_data.col(n) = p[static_cast<std::size_t>(n)] * u.col(n);
  EXPECT_LT(error_poe(null_data, p).normalized, 1e-24);
}

TEST(Metrics, NpeNupeNmseCases) {
  const MatrixXd a = random_matrix(2, 30, 3);
  const MatrixXd b = random_matrix(2, 30, 4);
  for (const auto& f : {error_npe, error_nupe, error_nmse}) {
    EXPECT_EQ(f(a, a).normalized, 0.0);
    EXPECT_NEAR(f(a, MatrixXd::Zero(2, 30)).normalized, 1.0, 1e-14);
    double loop = 0.0;
    double ref = 0.0;
    for (Index n = 0; n < 30; ++n) {
      loop += (a.col(n) - b.col(n)).squaredNorm();
      ref += a.col(n).squaredNorm();
    }
    const MetricTriple m = f(a, b);
    EXPECT_NEAR(m.mse, loop / 30.0, 1e-12);
    EXPECT_NEAR(m.variance, ref / 30.0, 1e-12);
    EXPECT_NEAR(m.normalized, loop / ref, 1e-12);
  }
}

TEST(Metrics, NcpeCases) {
  const MatrixXd pi = random_matrix(2, 20, 5);
  const auto p = random_projectors(2, 20, 6);
  EXPECT_EQ(error_ncpe(pi, pi, p).normalized, 0.0);
  // Differences confined to the removed directions are invisible.
  MatrixXd hidden = pi;
  for (Index n = 0; n < 20; ++n) {
    hidden.col(n) += (MatrixXd::Identity(2, 2) - p[static_cast<std::size_t>(n)]) * random_matrix(2, 1, 50 + n);
  }
  EXPECT_LT(error_ncpe(pi, hidden, p).normalized, 1e-24);
  const MatrixXd pred = random_matrix(2, 20, 7);
  double err = 0.0;
  double ref = 0.0;
  for (Index n = 0; n < 20; ++n) {
    err += (p[static_cast<std::size_t>(n)] * (pi.col(n) - pred.col(n))).squaredNorm();
    ref += (p[static_cast<std::size_t>(n)] * pi.col(n)).squaredNorm();
  }
  EXPECT_NEAR(error_ncpe(pi, pred, p).mse, err / 20.0, 1e-12);
  EXPECT_NEAR(error_ncpe(pi, pred, p).variance, ref / 20.0, 1e-12);
  EXPECT_NEAR(error_ncpe(pi, MatrixXd::Zero(2, 20), p).normalized, 1.0, 1e-14);
}

TEST(Metrics, ConstrainedErrorNeverExceedsUnconstrainedMse) {
  std::mt19937_64 rng(8);
  for (int t = 0; t < 100; ++t) {
    const MatrixXd pi = random_matrix(3, 15, rng());
    const MatrixXd pred = random_matrix(3, 15, rng());
    const auto p = random_projectors(3, 15, rng() % 1000);
    EXPECT_LE(error_ncpe(pi, pred, p).mse, error_nupe(pi, pred).mse + 1e-15);
  }
}

TEST(Metrics, PermutationAndScaleInvariance) {
  const MatrixXd a = random_matrix(2, 25, 9);
  const MatrixXd b = random_matrix(2, 25, 10);
  Eigen::PermutationMatrix<Eigen::Dynamic> perm(25);
  perm.setIdentity();
  std::shuffle(perm.indices().data(), perm.indices().data() + 25, std::mt19937(3));
  const MatrixXd ap = a * perm;
  const MatrixXd bp = b * perm;
  EXPECT_NEAR(error_nupe(a, b).normalized, error_nupe(ap, bp).normalized, 1e-12);
  EXPECT_NEAR(error_nupe(a, b).normalized, error_nupe(3.7 * a, 3.7 * b).normalized, 1e-12);
}

TEST(Metrics, ZeroVarianceConventions) {
  const MatrixXd z = MatrixXd::Zero(2, 4);
  EXPECT_EQ(error_nmse(z, z).normalized, 0.0);
  EXPECT_TRUE(std::isinf(error_nmse(z, MatrixXd::Ones(2, 4)).normalized));
}

TEST(Metrics, DimensionMismatchIsRejected) {
  EXPECT_THROW(error_npe(MatrixXd::Zero(2, 4), MatrixXd::Zero(2, 5)), ValidationError);
  EXPECT_THROW(error_poe(MatrixXd::Zero(2, 4), std::vector<MatrixXd>(3, MatrixXd::Zero(2, 2))), ValidationError);
  EXPECT_THROW(error_ncpe(MatrixXd::Zero(2, 2), MatrixXd::Zero(2, 2), std::vector<MatrixXd>(2, MatrixXd::Zero(3, 3))),
               ValidationError);
}

// ---------------------------------------------------------- data generation

TEST(Policies, LimitCycle) {
  const VectorXd on = policy_limit_cycle(Eigen::Vector2d(0.5, 0.0));
  EXPECT_NEAR(on(0), 0.0, 1e-15);
  EXPECT_NEAR(on(1), 0.5, 1e-15);
  EXPECT_EQ(policy_limit_cycle(Eigen::Vector2d::Zero()), Eigen::Vector2d::Zero());
  const MatrixXd x = uniform_matrix(2, 200, -1, 1, 1);
  for (Index n = 0; n < 200; ++n) {
    const VectorXd p = policy_limit_cycle(x.col(n));
    const double radial = p.dot(x.col(n));
    const double expected = 0.25 - x.col(n).squaredNorm();
    EXPECT_EQ(radial > 0.0, expected > 0.0);
  }
}

TEST(Policies, LinearAttractor) {
  const MatrixXd eye = MatrixXd::Identity(2, 2);
  EXPECT_EQ(policy_linear(Eigen::Vector2d(0.3, 0.4), eye, Eigen::Vector2d(0.3, 0.4)), Eigen::Vector2d::Zero());
  EXPECT_EQ(policy_linear(Eigen::Vector2d(1, 2), eye, Eigen::Vector2d::Zero()), Eigen::Vector2d(-1, -2));
  const MatrixXd gain = random_matrix(2, 2, 2);
  const VectorXd target = random_matrix(2, 1, 3);
  const VectorXd x = random_matrix(2, 1, 4);
  const VectorXd expected = Eigen::Vector2d(-(gain(0, 0) * (x(0) - target(0)) + gain(0, 1) * (x(1) - target(1))),
                                            -(gain(1, 0) * (x(0) - target(0)) + gain(1, 1) * (x(1) - target(1))));
  EXPECT_LT((policy_linear(x, gain, target) - expected).norm(), 1e-14);
}

TEST(TwoLink, JacobianAtZeroAndSingularity) {
  const MatrixXd j = twolink_jacobian(Eigen::Vector2d::Zero());
  MatrixXd expected(2, 2);
  expected << 0, 0, 2, 1;
  EXPECT_LT((j - expected).norm(), 1e-15);
  EXPECT_NEAR(twolink_jacobian(Eigen::Vector2d(0.7, 0.0)).determinant(), 0.0, 1e-15);
}

TEST(TwoLink, JacobianMatchesFiniteDifferenceOfKinematics) {
  const TwoLinkArm arm{0.8, 1.3};
  const MatrixXd q = uniform_matrix(2, 100, -3.0, 3.0, 5);
  for (Index n = 0; n < 100; ++n) {
    const MatrixXd fd = finite_difference_jacobian(
        [&](const VectorXd& p) { return VectorXd(arm.forward_kinematics(p)); }, q.col(n));
    EXPECT_LT((fd - arm.jacobian(q.col(n))).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(Generate, FixedAngleSatisfiesConstraint) {
  GeneratorConfig c;
  c.groups = {ConstraintSpec::fixed_angle(deg(30))};
  const DemonstrationSet d = generate(c);
  const Eigen::RowVector2d a(std::cos(deg(30)), std::sin(deg(30)));
  EXPECT_LT((a * d.actions()).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Generate, ParabolicSatisfiesConstraint) {
  GeneratorConfig c;
  c.groups = {ConstraintSpec::parabolic(0.1)};
  const DemonstrationSet d = generate(c);
  for (Index n = 0; n < d.size(); ++n) {
    EXPECT_LT(std::abs(-0.2 * d.states()(0, n) * d.actions()(0, n) + d.actions()(1, n)), 1e-10);
  }
}

TEST(Generate, PooledGroupsHaveZeroProjectedObservationError) {
  GeneratorConfig c;
  c.groups = {ConstraintSpec::fixed_angle(0), ConstraintSpec::fixed_angle(deg(60)),
              ConstraintSpec::fixed_angle(deg(120))};
  c.samples_per_group = 100;
  const DemonstrationSet d = generate(c);
  EXPECT_EQ(d.num_groups(), 3);
  const auto truth = true_projectors(c, d);
  for (int g = 0; g < 3; ++g) {
    const auto idx = d.group_indices(g);
    const DemonstrationSet part = d.subset(idx);
    std::vector<MatrixXd> p;
    for (Index i : idx) p.push_back(truth[static_cast<std::size_t>(i)]);
    EXPECT_LT(error_poe(part.actions(), p).normalized, 1e-24);
  }
}

TEST(Generate, DecompositionIsOrthogonalAndExact) {
  GeneratorConfig c;
  c.system = SystemKind::kTwoLink;
  c.policy = PolicyKind::kLinearAttractor;
  c.groups = {ConstraintSpec::jacobian_rows({0}), ConstraintSpec::jacobian_rows({1})};
  c.task.kind = TaskKind::kSinusoid;
  const DemonstrationSet d = generate(c);
  for (Index n = 0; n < d.size(); ++n) {
    EXPECT_LT(std::abs(d.task()->col(n).dot(d.null()->col(n))), 1e-9);
    EXPECT_LT((d.actions().col(n) - d.task()->col(n) - d.null()->col(n)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Generate, NoiseIsAddedOnlyToActions) {
  GeneratorConfig c;
  c.groups = {ConstraintSpec::fixed_angle(0.4)};
  c.noise_std = 0.1;
  const DemonstrationSet noisy = generate(c);
  c.noise_std = 0.0;
  const DemonstrationSet clean = generate(c);
  EXPECT_EQ(noisy.states(), clean.states());
  EXPECT_EQ(*noisy.null(), *clean.null());
  const double rms = std::sqrt((noisy.actions() - clean.actions()).squaredNorm() / (2.0 * noisy.size()));
  EXPECT_NEAR(rms, 0.1, 0.02);
}

TEST(Generate, DeterministicPerSeed) {
  GeneratorConfig c;
  c.groups = {ConstraintSpec::parabolic(0.2), ConstraintSpec::fixed_angle(1.0)};
  c.noise_std = 0.05;
  c.seed = 42;
  const DemonstrationSet a = generate(c);
  const DemonstrationSet b = generate(c);
  EXPECT_EQ(a.actions(), b.actions());
  EXPECT_EQ(a.states(), b.states());
  c.seed = 43;
  EXPECT_NE(generate(c).states(), a.states());
}

TEST(Generate, ConstantTaskIsReached) {
  GeneratorConfig c;
  c.groups = {ConstraintSpec::fixed_angle(deg(45))};
  c.task.kind = TaskKind::kConstant;
  c.task.constant = VectorXd::Constant(1, 0.3);
  const DemonstrationSet d = generate(c);
  const Eigen::RowVector2d a(std::cos(deg(45)), std::sin(deg(45)));
  EXPECT_LT(((a * d.actions()).array() - 0.3).abs().maxCoeff(), 1e-10);
}

TEST(Generate, InvalidConfigsAreRejected) {
  GeneratorConfig c;
  c.groups.clear();
  EXPECT_THROW(generate(c), ValidationError);
  c.groups = {ConstraintSpec::jacobian_rows({0, 1})};
  c.system = SystemKind::kTwoLink;
  EXPECT_THROW(generate(c), ValidationError);
  c.system = SystemKind::kToy2d;
  c.groups = {ConstraintSpec::jacobian_rows({0})};
  EXPECT_THROW(generate(c), ValidationError);
  c.groups = {ConstraintSpec::fixed_angle(0.1)};
  c.task.kind = TaskKind::kConstant;
  c.task.constant = VectorXd::Zero(2);
  EXPECT_THROW(generate(c), ValidationError);
}

TEST(FeatureProviders, Registry) {
  EXPECT_EQ(make_feature_provider("identity", 3)(VectorXd::Zero(1)), MatrixXd::Identity(3, 3));
  const auto phi = make_feature_provider("twolink-jacobian", 2);
  EXPECT_EQ(phi(Eigen::Vector2d(0.2, 0.3)), twolink_jacobian(Eigen::Vector2d(0.2, 0.3)));
  EXPECT_THROW(make_feature_provider("nope", 2), ValidationError);
}

// ---------------------------------------------------------------------- io

TEST(DatasetIo, HeaderlessFourColumnsIsOneGroup) {
  std::istringstream in("0.1,0.2,1,2\n0.3,0.4,3,4\n");
  const DemonstrationSet d = parse_dataset(in, {2, 2});
  EXPECT_EQ(d.num_groups(), 1);
  EXPECT_EQ(d.size(), 2);
  EXPECT_EQ(d.actions()(1, 1), 4.0);
}

TEST(DatasetIo, GroupColumnIsRemapped) {
  std::istringstream in("x1,u1,u2,k\n0,1,2,0\n1,1,2,2\n2,1,2,2\n");
  const DemonstrationSet d = parse_dataset(in);
  EXPECT_EQ(d.num_groups(), 2);
  EXPECT_EQ(d.group_ids(), (std::vector<int>{0, 1, 1}));
}

TEST(DatasetIo, NonNumericTokenNamesTheRow) {
  std::istringstream in("x1,x2,u1,u2\n0,0,1,1\n0,0,abc,1\n");
  try {
    parse_dataset(in);
    FAIL() << "expected an io error";
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("row 2"), std::string::npos);
  }
}

TEST(DatasetIo, OtherMalformedInputs) {
  const auto fails = [](const std::string& text, const DatasetSchema& schema = {}) {
    std::istringstream in(text);
    EXPECT_THROW(parse_dataset(in, schema), IoError) << text;
  };
  fails("x1,x2,u1,u2\n0,0,1\n");
  fails("x1,x2,u1,u2\n0,0,1,nan\n");
  fails("x1,x2,u1,u2\n0,0,1,inf\n");
  fails("x1,u1,u2,k\n0,1,1,0.5\n");
  fails("x1,x2,u1,u2,pi1\n0,0,1,1,1\n");
  fails("x1,x2,u1,u2,z\n0,0,1,1,1\n");
  fails("0,0,1,1\n");
  fails("x1,x2,u1,u2\n0,0,1,1\n", {3, 1});
  fails("");
}

TEST(DatasetIo, RoundTripWithAllChannels) {
  GeneratorConfig c;
  c.groups = {ConstraintSpec::fixed_angle(0.3), ConstraintSpec::parabolic(0.4)};
  c.task.kind = TaskKind::kSinusoid;
  c.noise_std = 0.01;
  c.samples_per_group = 25;
  const DemonstrationSet d = generate(c);
  std::stringstream buf;
  write_dataset(buf, d);
  const DemonstrationSet back = parse_dataset(buf);
  EXPECT_EQ(back.states(), d.states());
  EXPECT_EQ(back.actions(), d.actions());
  EXPECT_EQ(*back.policy(), *d.policy());
  EXPECT_EQ(*back.task(), *d.task());
  EXPECT_EQ(*back.null(), *d.null());
  EXPECT_EQ(back.group_ids(), d.group_ids());
}

TEST(DatasetIo, RandomFilesEitherLoadValidOrFail) {
  std::mt19937_64 rng(1);
  const std::vector<std::string> tokens{"0", "1.5", "-2e-3", "x", "", "nan", "7", "1e400"};
  for (int t = 0; t < 300; ++t) {
    std::ostringstream text;
    text << "x1,x2,u1,u2,k\n";
    const int rows = 1 + static_cast<int>(rng() % 4);
    for (int r = 0; r < rows; ++r) {
      const int cols = 4 + static_cast<int>(rng() % 3);
      for (int col = 0; col < cols; ++col) {
        text << (col ? "," : "") << tokens[rng() % tokens.size()];
      }
      text << '\n';
    }
    std::istringstream in(text.str());
    try {
      const DemonstrationSet d = parse_dataset(in);
      EXPECT_TRUE(d.states().allFinite());
      EXPECT_TRUE(d.actions().allFinite());
      EXPECT_GE(d.num_groups(), 1);
      for (int g : d.group_ids()) EXPECT_LT(g, d.num_groups());
    } catch (const IoError&) {
    }
  }
}

class ModelIo : public ::testing::Test {
 protected:
  std::string path_ = (std::filesystem::temp_directory_path() / "ccl_model_io_test.json").string();
  void TearDown() override { std::remove(path_.c_str()); }

  AnyModel round_trip(const AnyModel& m) {
    save_model(m, path_);
    return load_model(path_);
  }
};

TEST_F(ModelIo, RbfWithSingleBasis) {
  RbfModel m;
  m.centers = MatrixXd::Zero(1, 1);
  m.width = 1.0;
  m.weights = MatrixXd::Zero(1, 1);
  EXPECT_TRUE(std::get<RbfModel>(round_trip(m)) == m);
}

TEST_F(ModelIo, StateIndependentConstraint) {
  const StateIndependentConstraint m{2, {VectorXd::Constant(1, 0.5236)}};
  EXPECT_TRUE(std::get<StateIndependentConstraint>(round_trip(m)) == m);
}

TEST_F(ModelIo, EveryKindRoundTripsExactly) {
  const MatrixXd x = uniform_matrix(2, 60, -1, 1, 3);
  RbfModel basis = make_rbf_basis(x, 5, 1, 0);
  basis.weights = random_matrix(1, 5, 4) / 3.0;

  StateDependentConstraintModel alpha;
  alpha.dim_u = 2;
  alpha.dim_phi = 2;
  alpha.dim_b = 1;
  alpha.rbf = basis;
  StateDependentConstraintModel lambda = alpha;
  lambda.mode = ConstraintMode::kLambda;
  lambda.feature_name = "twolink-jacobian";

  NullspaceComponentModel ncl = make_nullspace_model(x, 2, 5, 1);
  ncl.rbf.weights = random_matrix(2, 5, 5) * std::numbers::pi;
  ParametricPolicyModel rbf_pi = make_rbf_policy(x, 2, 4, 2);
  rbf_pi.rbf.weights = random_matrix(2, 4, 6) * 1e-7;
  ParametricPolicyModel lin_pi = make_linear_policy(2, 2);
  lin_pi.rbf.weights = random_matrix(2, 3, 7);
  LwlPolicyModel lwl = make_lwl_policy(x, 2, 3, 3);
  for (std::size_t i = 0; i < 3; ++i) lwl.local_maps[i] = random_matrix(2, 3, 8 + i) / 7.0;
  const StateIndependentConstraint nhat{4, {Eigen::Vector3d(0.1, 1e-17, 3.0), Eigen::Vector2d(2.0, 1.0 / 3.0)}};

  const std::vector<AnyModel> models{basis, nhat, alpha, lambda, ncl, rbf_pi, lin_pi, lwl};
  const std::vector<std::string> kinds{"rbf", "nhat", "alpha", "lambda", "ncl", "pi-parametric", "pi-parametric",
                                       "pi-lwl"};
  for (std::size_t i = 0; i < models.size(); ++i) {
    EXPECT_EQ(model_kind(models[i]), kinds[i]);
    const AnyModel back = round_trip(models[i]);
    EXPECT_EQ(back.index(), models[i].index());
    EXPECT_TRUE(back == models[i]) << kinds[i];
  }
}

TEST_F(ModelIo, UnknownKindAndVersionMismatchAreRejected) {
  nlohmann::json doc = model_to_json(StateIndependentConstraint{2, {VectorXd::Constant(1, 0.1)}});
  doc["kind"] = "mystery";
  EXPECT_THROW(model_from_json(doc), IoError);
  doc = model_to_json(StateIndependentConstraint{2, {VectorXd::Constant(1, 0.1)}});
  doc["version"] = 99;
  EXPECT_THROW(model_from_json(doc), IoError);
  doc = model_to_json(StateIndependentConstraint{2, {VectorXd::Constant(1, 0.1)}});
  doc["dim_b"] = 2;
  EXPECT_THROW(model_from_json(doc), IoError);
  std::ofstream(path_) << "{not json";
  EXPECT_THROW(load_model(path_), IoError);
}

TEST_F(ModelIo, UnwritablePathIsAnError) {
  EXPECT_THROW(save_model(RbfModel{MatrixXd::Zero(1, 1), 1.0, MatrixXd::Zero(1, 1)}, "/nonexistent-dir/m.json"),
               IoError);
}

}  // namespace
}  // namespace ccl

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

// ccl: gen | learn | eval | tutorial
//
// Exit codes: 0 success, 1 input or validation error, 2 learning did not
// converge (the best-effort model is still written).

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ccl/ccl.hpp"
#include "json.hpp"

namespace {

using ccl::Index;
using ccl::MatrixXd;
using ccl::VectorXd;
using nlohmann::json;
namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 1;
constexpr int kExitNotConverged = 2;

// ---------------------------------------------------------------------------
// Flag parsing helpers

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, sep);) out.push_back(item);
  if (!text.empty() && text.back() == sep) out.emplace_back();
  return out;
}

double to_number(const std::string& text, const std::string& flag) {
  const auto value = ccl::detail::parse_double(text);
  if (!value || !std::isfinite(*value)) throw ccl::ValidationError(flag + ": '" + text + "' is not a number");
  return *value;
}

std::vector<double> to_numbers(const std::string& text, const std::string& flag) {
  std::vector<double> out;
  for (const std::string& item : split(text, ',')) out.push_back(to_number(item, flag));
  return out;
}

// none | fixed:<degrees> | parabolic:<a> | jacobian:<row>[,<row>]
ccl::ConstraintSpec parse_constraint(const std::string& text) {
  const auto colon = text.find(':');
  const std::string kind = text.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : text.substr(colon + 1);
  if (kind == "none") return ccl::ConstraintSpec::none();
  if (arg.empty()) throw ccl::ValidationError("--constraint " + kind + " needs a parameter, e.g. " + kind + ":1");
  if (kind == "fixed") return ccl::ConstraintSpec::fixed_angle(to_number(arg, "--constraint") * std::numbers::pi / 180.0);
  if (kind == "parabolic") return ccl::ConstraintSpec::parabolic(to_number(arg, "--constraint"));
  if (kind == "jacobian") {
    std::vector<int> rows;
    for (double r : to_numbers(arg, "--constraint")) rows.push_back(static_cast<int>(r));
    return ccl::ConstraintSpec::jacobian_rows(std::move(rows));
  }
  throw ccl::ValidationError("unknown constraint '" + text + "' (none, fixed:DEG, parabolic:A, jacobian:ROWS)");
}

// zero | constant:<b1>[,<b2>] | sinusoid:<amplitude>[:<frequency>[:<phase>]]
ccl::TaskSpec parse_task(const std::string& text) {
  ccl::TaskSpec task;
  const auto parts = split(text, ':');
  if (parts.empty() || parts[0] == "zero") return task;
  if (parts[0] == "constant" && parts.size() == 2) {
    const auto values = to_numbers(parts[1], "--task");
    task.kind = ccl::TaskKind::kConstant;
    task.constant = Eigen::Map<const VectorXd>(values.data(), static_cast<Index>(values.size()));
    return task;
  }
  if (parts[0] == "sinusoid" && parts.size() >= 2 && parts.size() <= 4) {
    task.kind = ccl::TaskKind::kSinusoid;
    task.amplitude = to_number(parts[1], "--task");
    if (parts.size() > 2) task.frequency = to_number(parts[2], "--task");
    if (parts.size() > 3) task.phase = to_number(parts[3], "--task");
    return task;
  }
  throw ccl::ValidationError("unknown task '" + text + "' (zero, constant:B, sinusoid:AMP[:FREQ[:PHASE]])");
}

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("CCL_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw ccl::ValidationError(std::string("CCL_SEED='") + env + "' is not an unsigned integer");
    }
  }
  return 0;
}

json report_json(const ccl::LearnReport& r) {
  const auto finite_or_null = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  return {{"nmse", finite_or_null(r.nmse)},
          {"mse", finite_or_null(r.mse)},
          {"variance", finite_or_null(r.variance)},
          {"iterations", r.iterations},
          {"final_objective", finite_or_null(r.final_objective)},
          {"converged", r.converged},
          {"reason", std::string(ccl::to_string(r.reason))},
          {"dropped_samples", r.dropped_samples},
          {"warnings", r.warnings}};
}

std::string summary_line(const std::string& method, const ccl::LearnReport& r) {
  std::ostringstream out;
  out << "method=" << method << " nmse=" << r.nmse << " mse=" << r.mse << " iterations=" << r.iterations
      << " converged=" << (r.converged ? "yes" : "no") << " reason=" << ccl::to_string(r.reason);
  for (const std::string& w : r.warnings) out << " warning=\"" << w << '"';
  return out.str();
}

// Every run records what it did next to its outputs.
struct Manifest {
  json doc;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

  Manifest(const std::string& subcommand, const std::vector<std::string>& argv, std::uint64_t seed) {
    doc["subcommand"] = subcommand;
    doc["command"] = argv;
    doc["seed"] = seed;
    doc["inputs"] = json::array();
    doc["outputs"] = json::array();
    doc["config"] = json::object();
  }

  void write(const std::string& path) {
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    doc["duration_seconds"] = seconds;
    std::ofstream out(path);
    if (!out) throw ccl::IoError("cannot write manifest '" + path + "'");
    out << doc.dump(2) << '\n';
  }
};

// ---------------------------------------------------------------------------
// gen

struct GenArgs {
  std::string system = "toy2d";
  std::string policy = "limit-cycle";
  std::vector<std::string> constraints;
  std::string task = "zero";
  Index n = 500;
  double noise = 0.0;
  std::optional<std::uint64_t> seed;
  std::string target;
  std::string out;
};

ccl::GeneratorConfig make_generator_config(const GenArgs& args, std::uint64_t seed) {
  ccl::GeneratorConfig config;
  if (args.system == "toy2d") {
    config.system = ccl::SystemKind::kToy2d;
  } else if (args.system == "twolink") {
    config.system = ccl::SystemKind::kTwoLink;
  } else {
    throw ccl::ValidationError("unknown system '" + args.system + "' (toy2d, twolink)");
  }
  if (args.policy == "limit-cycle") {
    config.policy = ccl::PolicyKind::kLimitCycle;
  } else if (args.policy == "linear" || args.policy == "linear-attractor") {
    config.policy = ccl::PolicyKind::kLinearAttractor;
    config.target = 0.5 * (config.lower() + config.upper());
    if (!args.target.empty()) {
      const auto t = to_numbers(args.target, "--target");
      if (t.size() != 2) throw ccl::ValidationError("--target needs two comma-separated values");
      config.target = Eigen::Vector2d(t[0], t[1]);
    }
  } else {
    throw ccl::ValidationError("unknown policy '" + args.policy + "' (limit-cycle, linear)");
  }
  config.groups.clear();
  for (const std::string& c : args.constraints) config.groups.push_back(parse_constraint(c));
  if (config.groups.empty()) config.groups.push_back(ccl::ConstraintSpec::none());
  config.task = parse_task(args.task);
  config.samples_per_group = args.n;
  config.noise_std = args.noise;
  config.seed = seed;
  config.validate();
  return config;
}

json generator_config_json(const GenArgs& args) {
  return {{"system", args.system}, {"policy", args.policy}, {"constraints", args.constraints},
          {"task", args.task},     {"n", args.n},           {"noise", args.noise},
          {"target", args.target}};
}

int run_gen(const GenArgs& args, const std::vector<std::string>& argv) {
  const std::uint64_t seed = resolve_seed(args.seed);
  const ccl::GeneratorConfig config = make_generator_config(args, seed);
  const ccl::DemonstrationSet data = ccl::generate(config);
  ccl::save_dataset(data, args.out);
  Manifest manifest("gen", argv, seed);
  manifest.doc["config"] = generator_config_json(args);
  manifest.doc["outputs"].push_back(args.out);
  manifest.doc["report"] = {{"samples", data.size()}, {"groups", data.num_groups()}};
  manifest.write(args.out + ".manifest.json");
  std::cout << "wrote " << data.size() << " samples in " << data.num_groups() << " group(s) to " << args.out
            << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// learn

struct LearnArgs {
  std::string method;
  std::string in;
  std::string out;
  std::string features;
  std::string channel = "u";
  std::string policy_basis = "rbf";
  std::optional<Index> basis;
  std::optional<Index> rows;
  std::optional<std::uint64_t> seed;
  ccl::LearnOptions options;
};

struct LearnOutcome {
  ccl::AnyModel model;
  ccl::LearnReport report;
};

const MatrixXd& select_channel(const ccl::DemonstrationSet& data, const std::string& channel) {
  if (channel == "u") return data.actions();
  if (channel == "w") {
    if (!data.null()) throw ccl::ValidationError("--channel w needs a dataset with w columns");
    return *data.null();
  }
  throw ccl::ValidationError("unknown channel '" + channel + "' (u, w)");
}

LearnOutcome learn_model(const LearnArgs& args, const ccl::DemonstrationSet& data) {
  ccl::LearnOptions options = args.options;
  const MatrixXd& x = data.states();
  const MatrixXd& u = select_channel(data, args.channel);
  const std::string& m = args.method;

  if (m == "nhat" || m == "alpha" || m == "lambda") {
    ccl::ConstraintSettings settings;
    settings.num_rows = args.rows;
    settings.num_basis = args.basis.value_or(16);
    if (m == "nhat") {
      auto fit = ccl::learn_nhat(u, options, settings);
      return {fit.model, fit.report};
    }
    if (m == "alpha") {
      if (!args.features.empty() && args.features != "identity") {
        throw ccl::ValidationError("alpha learns rows of the action space; use --method lambda for '" +
                                   args.features + "'");
      }
      auto fit = ccl::learn_alpha(u, x, options, settings);
      return {fit.model, fit.report};
    }
    if (args.features.empty()) {
      throw ccl::ValidationError("--method lambda needs --features (identity, twolink-jacobian)");
    }
    const ccl::FeatureMatrixProvider phi = ccl::make_feature_provider(args.features, data.dim_u());
    auto fit = ccl::learn_lambda(u, x, phi, options, settings);
    return {fit.model, fit.report};
  }
  if (m == "ncl") {
    const auto model0 = ccl::make_nullspace_model(x, data.dim_u(), args.basis.value_or(16), options.rng_seed);
    auto fit = ccl::learn_ncl(x, u, model0, options);
    return {fit.model, fit.report};
  }
  if (m == "pi" || m == "pi-lwl") {
    LearnOutcome outcome;
    if (m == "pi") {
      ccl::ParametricPolicyModel model0;
      if (args.policy_basis == "rbf") {
        model0 = ccl::make_rbf_policy(x, data.dim_u(), args.basis.value_or(10), options.rng_seed);
      } else if (args.policy_basis == "linear") {
        model0 = ccl::make_linear_policy(data.dim_x(), data.dim_u());
      } else {
        throw ccl::ValidationError("unknown --policy-basis '" + args.policy_basis + "' (rbf, linear)");
      }
      auto fit = ccl::learn_pi(x, u, model0, options);
      outcome = {fit.model, fit.report};
    } else {
      const auto model0 = ccl::make_lwl_policy(x, data.dim_u(), args.basis.value_or(10), options.rng_seed);
      auto fit = ccl::learn_pi_lwl(x, u, model0, options);
      outcome = {fit.model, fit.report};
    }
    if (data.num_groups() == 1) {
      outcome.report.warnings.emplace_back(
          "degenerate: single constraint group, the policy is identified only within the observed null space");
    }
    return outcome;
  }
  throw ccl::ValidationError("unknown method '" + m + "' (nhat, alpha, lambda, ncl, pi, pi-lwl)");
}

json learn_config_json(const LearnArgs& args, std::uint64_t seed) {
  const ccl::LearnOptions& o = args.options;
  json cfg{{"method", args.method},         {"channel", args.channel},     {"features", args.features},
           {"policy_basis", args.policy_basis}, {"tol_fun", o.tol_fun},   {"tol_x", o.tol_x},
           {"max_iter", o.max_iter},        {"search_resolution", o.search_resolution},
           {"num_restarts", o.num_restarts}, {"svd_threshold", o.svd_threshold},
           {"regularization", o.regularization}, {"rng_seed", seed}};
  cfg["basis"] = args.basis ? json(*args.basis) : json(nullptr);
  cfg["rows"] = args.rows ? json(*args.rows) : json(nullptr);
  return cfg;
}

int run_learn(LearnArgs args, const std::vector<std::string>& argv) {
  const std::uint64_t seed = resolve_seed(args.seed);
  args.options.rng_seed = seed;
  args.options.validate();
  const ccl::DemonstrationSet data = ccl::load_dataset(args.in);
  const LearnOutcome outcome = learn_model(args, data);
  ccl::save_model(outcome.model, args.out);

  Manifest manifest("learn", argv, seed);
  manifest.doc["config"] = learn_config_json(args, seed);
  manifest.doc["inputs"].push_back(args.in);
  manifest.doc["outputs"].push_back(args.out);
  manifest.doc["report"] = report_json(outcome.report);
  manifest.write(args.out + ".manifest.json");
  std::cout << summary_line(args.method, outcome.report) << '\n';
  return outcome.report.converged ? kExitOk : kExitNotConverged;
}

// ---------------------------------------------------------------------------
// eval

struct MetricRow {
  std::string name;
  std::optional<ccl::MetricTriple> value;
  std::string note;
};

std::vector<MatrixXd> observed_projectors(const MatrixXd& directions) {
  // P_n = w_n w_n^T / ||w_n||^2, zero for vanishing samples.
  std::vector<MatrixXd> out;
  for (Index n = 0; n < directions.cols(); ++n) {
    const double norm_sq = directions.col(n).squaredNorm();
    const Index d = directions.rows();
    out.push_back(norm_sq < 1e-24 ? MatrixXd::Zero(d, d)
                                  : MatrixXd(directions.col(n) * directions.col(n).transpose() / norm_sq));
  }
  return out;
}

std::vector<MetricRow> evaluate_model(const ccl::AnyModel& model, const ccl::DemonstrationSet& data) {
  std::vector<MetricRow> rows;
  const MatrixXd& x = data.states();
  const MatrixXd& u = data.actions();
  const auto missing = [](const std::string& name, const std::string& channel) {
    return MetricRow{name, std::nullopt, "requires ground truth (" + channel + " channel)"};
  };
  const auto check_dims = [&](Index dim_x, Index dim_u) {
    if ((dim_x >= 0 && dim_x != data.dim_x()) || dim_u != data.dim_u()) {
      throw ccl::ValidationError("model dimensions do not match the dataset");
    }
  };

  const auto constraint_rows = [&](const std::vector<MatrixXd>& proj) {
    rows.push_back({"NPOE", ccl::error_poe(u, proj), ""});
    if (data.policy() && data.null()) {
      rows.push_back({"NPPE", ccl::error_ppe(*data.null(), proj, *data.policy()), ""});
    } else {
      rows.push_back(missing("NPPE", "pi and w"));
    }
  };

  if (const auto* m = std::get_if<ccl::StateIndependentConstraint>(&model)) {
    check_dims(-1, m->dim_u);
    constraint_rows(ccl::projectors(*m, data.size()));
  } else if (const auto* m = std::get_if<ccl::StateDependentConstraintModel>(&model)) {
    check_dims(m->rbf.dim_x(), m->dim_u);
    if (m->mode == ccl::ConstraintMode::kLambda) {
      const auto phi = ccl::make_feature_provider(m->feature_name, m->dim_u);
      constraint_rows(ccl::projectors(*m, x, &phi));
    } else {
      constraint_rows(ccl::projectors(*m, x));
    }
  } else if (const auto* m = std::get_if<ccl::NullspaceComponentModel>(&model)) {
    check_dims(m->rbf.dim_x(), m->dim_u());
    const MatrixXd w_pred = ccl::predict_ncl(*m, x);
    if (data.null()) {
      rows.push_back({"NUPE", ccl::error_nupe(*data.null(), w_pred), ""});
      rows.push_back({"NPE", ccl::error_npe(*data.null(), w_pred), ""});
    } else {
      rows.push_back(missing("NUPE", "w"));
      rows.push_back(missing("NPE", "w"));
    }
  } else if (std::holds_alternative<ccl::ParametricPolicyModel>(model) ||
             std::holds_alternative<ccl::LwlPolicyModel>(model)) {
    MatrixXd pi_pred;
    if (const auto* p = std::get_if<ccl::ParametricPolicyModel>(&model)) {
      check_dims(p->dim_x(), p->dim_u());
      pi_pred = ccl::predict_policy(*p, x);
    } else {
      const auto& l = std::get<ccl::LwlPolicyModel>(model);
      check_dims(l.dim_x(), l.dim_u());
      pi_pred = ccl::predict_policy(l, x);
    }
    if (data.policy()) {
      rows.push_back({"NUPE", ccl::error_nupe(*data.policy(), pi_pred), ""});
      const MatrixXd& directions = data.null() ? *data.null() : u;
      rows.push_back({"NCPE", ccl::error_ncpe(*data.policy(), pi_pred, observed_projectors(directions)), ""});
    } else {
      rows.push_back(missing("NUPE", "pi"));
      rows.push_back(missing("NCPE", "pi"));
    }
  } else {
    throw ccl::ValidationError("model kind '" + ccl::model_kind(model) + "' cannot be evaluated on a dataset");
  }
  return rows;
}

std::string metrics_table(const std::vector<MetricRow>& rows) {
  std::ostringstream out;
  out << "metric,normalized,variance,mse\n";
  for (const MetricRow& r : rows) {
    if (r.value) {
      out << r.name << ',' << ccl::detail::format_double(r.value->normalized) << ','
          << ccl::detail::format_double(r.value->variance) << ',' << ccl::detail::format_double(r.value->mse)
          << '\n';
    } else {
      out << "# " << r.name << ": " << r.note << '\n';
    }
  }
  return out.str();
}

json metrics_json(const std::vector<MetricRow>& rows) {
  json out = json::object();
  for (const MetricRow& r : rows) {
    if (r.value) {
      out[r.name] = {{"normalized", r.value->normalized}, {"variance", r.value->variance}, {"mse", r.value->mse}};
    } else {
      out[r.name] = r.note;
    }
  }
  return out;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw ccl::IoError("cannot write '" + path + "'");
  out << text;
}

struct EvalArgs {
  std::string model;
  std::string in;
  std::string out;
};

int run_eval(const EvalArgs& args, const std::vector<std::string>& argv) {
  const ccl::AnyModel model = ccl::load_model(args.model);
  const ccl::DemonstrationSet data = ccl::load_dataset(args.in);
  const auto rows = evaluate_model(model, data);
  const std::string table = metrics_table(rows);
  std::cout << table;
  Manifest manifest("eval", argv, 0);
  manifest.doc["inputs"] = {args.model, args.in};
  std::string manifest_path = args.model + ".eval.manifest.json";
  if (!args.out.empty()) {
    write_text(args.out, table);
    manifest.doc["outputs"].push_back(args.out);
    manifest_path = args.out + ".manifest.json";
  }
  manifest.doc["report"] = metrics_json(rows);
  manifest.write(manifest_path);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// tutorial

struct TutorialArgs {
  std::string name;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
};

// Learned vs true fields on a 21 x 21 grid over the state box.
std::string field_table(const ccl::GeneratorConfig& config,
                        const std::function<VectorXd(const VectorXd&)>& truth,
                        const std::function<VectorXd(const VectorXd&)>& learned) {
  constexpr int kSteps = 21;
  const Eigen::Vector2d lo = config.lower();
  const Eigen::Vector2d hi = config.upper();
  std::ostringstream out;
  out << "x1,x2,true1,true2,learned1,learned2\n";
  for (int i = 0; i < kSteps; ++i) {
    for (int j = 0; j < kSteps; ++j) {
      VectorXd x(2);
      x << lo(0) + (hi(0) - lo(0)) * i / (kSteps - 1), lo(1) + (hi(1) - lo(1)) * j / (kSteps - 1);
      const VectorXd t = truth(x);
      const VectorXd l = learned(x);
      out << ccl::detail::format_double(x(0)) << ',' << ccl::detail::format_double(x(1)) << ','
          << ccl::detail::format_double(t(0)) << ',' << ccl::detail::format_double(t(1)) << ','
          << ccl::detail::format_double(l(0)) << ',' << ccl::detail::format_double(l(1)) << '\n';
    }
  }
  return out.str();
}

VectorXd true_null_component(const ccl::GeneratorConfig& config, const VectorXd& x) {
  const MatrixXd a = ccl::constraint_matrix(config.groups.front(), x, config.arm);
  const VectorXd pi = ccl::evaluate_policy(config, x);
  return a.rows() > 0 ? VectorXd(ccl::nullspace_projector(a).projector * pi) : pi;
}

int run_tutorial(const TutorialArgs& args, const std::vector<std::string>& argv) {
  const std::uint64_t seed = resolve_seed(args.seed);
  const fs::path dir = args.out_dir.empty() ? fs::path("tutorial-" + args.name) : fs::path(args.out_dir);
  fs::create_directories(dir);

  GenArgs gen;
  LearnArgs learn;
  learn.options.rng_seed = seed;
  if (args.name == "toy-ncl") {
    gen.constraints = {"parabolic:0.1"};
    gen.task = "sinusoid:0.5:0.37";
    learn.method = "ncl";
    learn.basis = 16;
  } else if (args.name == "toy-constraint") {
    gen.constraints = {"parabolic:0.1"};
    learn.method = "alpha";
    learn.basis = 16;
  } else if (args.name == "toy-pi") {
    gen.constraints = {"fixed:0", "fixed:60", "fixed:120"};
    gen.n = 200;
    learn.method = "pi";
    learn.basis = 10;
  } else if (args.name == "twolink") {
    gen.system = "twolink";
    gen.policy = "linear";
    gen.constraints = {"jacobian:0"};
    learn.method = "lambda";
    learn.features = "twolink-jacobian";
    learn.basis = 16;
  } else {
    throw ccl::ValidationError("unknown tutorial '" + args.name + "' (toy-ncl, toy-constraint, toy-pi, twolink)");
  }

  const ccl::GeneratorConfig config = make_generator_config(gen, seed);
  const ccl::DemonstrationSet data = ccl::generate(config);
  const std::string data_path = (dir / "data.csv").string();
  const std::string model_path = (dir / "model.json").string();
  const std::string metrics_path = (dir / "metrics.csv").string();
  const std::string field_path = (dir / "field.csv").string();
  ccl::save_dataset(data, data_path);

  const LearnOutcome outcome = learn_model(learn, data);
  ccl::save_model(outcome.model, model_path);
  auto rows = evaluate_model(outcome.model, data);
  if (args.name == "toy-constraint" || args.name == "twolink") {
    // Report the projected-policy row first, matching the usual presentation.
    std::stable_sort(rows.begin(), rows.end(),
                     [](const MetricRow& a, const MetricRow& b) { return a.name == "NPPE" && b.name != "NPPE"; });
  }
  const std::string table = metrics_table(rows);
  write_text(metrics_path, table);

  std::function<VectorXd(const VectorXd&)> truth;
  std::function<VectorXd(const VectorXd&)> learned;
  if (const auto* m = std::get_if<ccl::NullspaceComponentModel>(&outcome.model)) {
    truth = [&](const VectorXd& x) { return true_null_component(config, x); };
    learned = [m](const VectorXd& x) { return m->predict(x); };
  } else if (const auto* p = std::get_if<ccl::ParametricPolicyModel>(&outcome.model)) {
    truth = [&](const VectorXd& x) { return ccl::evaluate_policy(config, x); };
    learned = [p](const VectorXd& x) { return VectorXd(ccl::predict_policy(*p, x).col(0)); };
  } else {
    const auto& c = std::get<ccl::StateDependentConstraintModel>(outcome.model);
    auto phi = std::make_shared<ccl::FeatureMatrixProvider>(ccl::make_feature_provider(c.feature_name, c.dim_u));
    truth = [&](const VectorXd& x) { return true_null_component(config, x); };
    learned = [&c, &config, phi](const VectorXd& x) {
      return VectorXd(c.projector(x, phi.get()) * ccl::evaluate_policy(config, x));
    };
  }
  write_text(field_path, field_table(config, truth, learned));

  Manifest manifest("tutorial", argv, seed);
  manifest.doc["config"] = {{"name", args.name}, {"generator", generator_config_json(gen)},
                            {"learn", learn_config_json(learn, seed)}};
  manifest.doc["outputs"] = {data_path, model_path, metrics_path, field_path};
  manifest.doc["report"] = report_json(outcome.report);
  manifest.doc["metrics"] = metrics_json(rows);
  manifest.write((dir / "manifest.json").string());

  std::cout << "tutorial " << args.name << " (seed " << seed << ", " << data.size() << " samples)\n"
            << summary_line(learn.method, outcome.report) << '\n'
            << table;
  return outcome.report.converged ? kExitOk : kExitNotConverged;
}

void add_learn_options(CLI::App* cmd, LearnArgs& args) {
  cmd->add_option("--tol-fun", args.options.tol_fun, "residual tolerance");
  cmd->add_option("--tol-x", args.options.tol_x, "parameter tolerance");
  cmd->add_option("--max-iter", args.options.max_iter, "optimiser iteration cap");
  cmd->add_option("--resolution", args.options.search_resolution, "candidate angles per dimension");
  cmd->add_option("--restarts", args.options.num_restarts, "optimiser restarts");
  cmd->add_option("--svd-threshold", args.options.svd_threshold, "relative singular value cut-off");
  cmd->add_option("--regularization", args.options.regularization, "ridge term");
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::string> args_list(argv, argv + argc);
  CLI::App app{"Constraint consistent learning: generate data, learn models, evaluate them"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen", "generate a synthetic dataset");
  gen_cmd->add_option("--system", gen.system, "toy2d | twolink")->capture_default_str();
  gen_cmd->add_option("--policy", gen.policy, "limit-cycle | linear")->capture_default_str();
  gen_cmd->add_option("--constraint", gen.constraints,
                      "one per group: none | fixed:DEG | parabolic:A | jacobian:ROWS");
  gen_cmd->add_option("--task", gen.task, "zero | constant:B | sinusoid:AMP[:FREQ[:PHASE]]")->capture_default_str();
  gen_cmd->add_option("--n", gen.n, "samples per group")->capture_default_str()->check(CLI::PositiveNumber);
  gen_cmd->add_option("--noise", gen.noise, "gaussian noise std on u")->capture_default_str();
  gen_cmd->add_option("--target", gen.target, "linear attractor target x1,x2");
  gen_cmd->add_option("--seed", gen.seed, "random seed (default: CCL_SEED or 0)");
  gen_cmd->add_option("--out", gen.out, "dataset path")->required();

  LearnArgs learn;
  auto* learn_cmd = app.add_subcommand("learn", "learn a model from a dataset");
  learn_cmd->add_option("--method", learn.method, "nhat | alpha | lambda | ncl | pi | pi-lwl")->required();
  learn_cmd->add_option("--in", learn.in, "dataset path")->required();
  learn_cmd->add_option("--out", learn.out, "model path")->required();
  learn_cmd->add_option("--features", learn.features, "feature matrix for lambda: identity | twolink-jacobian");
  learn_cmd->add_option("--channel", learn.channel, "observation channel: u | w")->capture_default_str();
  learn_cmd->add_option("--policy-basis", learn.policy_basis, "rbf | linear")->capture_default_str();
  learn_cmd->add_option("--basis", learn.basis, "number of basis functions");
  learn_cmd->add_option("--rows", learn.rows, "fix the number of constraint rows");
  learn_cmd->add_option("--seed", learn.seed, "random seed (default: CCL_SEED or 0)");
  add_learn_options(learn_cmd, learn);

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a model on a dataset");
  eval_cmd->add_option("--model", eval.model, "model path")->required();
  eval_cmd->add_option("--in", eval.in, "dataset path")->required();
  eval_cmd->add_option("--out", eval.out, "metrics table path");

  TutorialArgs tutorial;
  auto* tutorial_cmd = app.add_subcommand("tutorial", "run an end-to-end example");
  tutorial_cmd->add_option("name", tutorial.name, "toy-ncl | toy-constraint | toy-pi | twolink")->required();
  tutorial_cmd->add_option("--seed", tutorial.seed, "random seed (default: CCL_SEED or 0)");
  tutorial_cmd->add_option("--out-dir", tutorial.out_dir, "output directory (default: tutorial-NAME)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInvalid;
  }

  try {
    if (gen_cmd->parsed()) return run_gen(gen, args_list);
    if (learn_cmd->parsed()) return run_learn(learn, args_list);
    if (eval_cmd->parsed()) return run_eval(eval, args_list);
    return run_tutorial(tutorial, args_list);
  } catch (const ccl::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
  } catch (const ccl::IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
  }
  return kExitInvalid;
}

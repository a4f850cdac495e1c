// Command-line front end: fit, predict, simulate, benchmark, shrinkage-curve.
#include <algorithm>
#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mrash/errors.hpp"
#include "mrash/io.hpp"
#include "mrash/mr_ash.hpp"
#include "mrash/normal_means.hpp"
#include "mrash/simlab.hpp"

namespace {

constexpr int kExitNotConverged = 1;
constexpr int kExitParse = 2;
constexpr int kExitShape = 3;
constexpr int kExitScenario = 4;

struct Options {
  std::string input;
  std::string response = "y";
  std::string test;
  std::string model;
  std::string out = "mrash_out";
  std::string format = "csv";
  std::string init = "lasso";
  std::string order = "natural";
  std::string grid;     // comma-separated variances
  std::string weights;  // comma-separated prior weights
  int grid_k = 20;
  int max_outer = 1000;
  double tol = 1e-8;
  bool fix_prior = false;
  bool fix_sigma2 = false;
  double sigma2 = -1.0;
  int folds = 10;
  std::uint64_t seed = 1;
  // simulate / benchmark
  std::vector<std::string> scenarios;
  std::string methods = "mr_ash,lasso,ridge";
  int replicates = 20;
  int threads = 0;
  // shrinkage-curve
  double sigma_curve = 1.0;
  double y_max = 10.0;
  int n_points = 401;
};

Eigen::VectorXd parse_number_list(const std::string& text, const std::string& what) {
  std::vector<double> values;
  std::stringstream stream(text);
  std::string token;
  while (std::getline(stream, token, ',')) {
    try {
      values.push_back(std::stod(token));
    } catch (const std::exception&) {
      throw mrash::ParseError("bad " + what + " entry: '" + token + "'");
    }
  }
  if (values.empty()) throw mrash::ParseError(what + " list is empty");
  Eigen::VectorXd out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) out[static_cast<int>(i)] = values[i];
  return out;
}

std::vector<std::string> parse_string_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream stream(text);
  std::string token;
  while (std::getline(stream, token, ',')) {
    if (!token.empty()) out.push_back(token);
  }
  return out;
}

mrash::FitOptions build_fit_options(const Options& opt, int n_rows) {
  mrash::FitOptions fit_opts;
  if (!opt.grid.empty()) {
    fit_opts.grid = parse_number_list(opt.grid, "grid");
  } else {
    fit_opts.grid_k = opt.grid_k;
  }
  if (opt.init == "null") {
    fit_opts.init = mrash::InitMode::Null;
  } else if (opt.init == "lasso") {
    fit_opts.init = mrash::InitMode::Lasso;
  } else {
    // anything else is a path to a one-column CSV of coefficients
    auto table = mrash::io::read_csv(opt.init);
    if (table.values.cols() != 1) {
      throw mrash::ShapeError("--init file must contain a single coefficient column");
    }
    fit_opts.init = mrash::InitMode::Provided;
    fit_opts.init_b = table.values.col(0);
  }
  if (opt.order == "natural") fit_opts.order = mrash::CoordinateOrder::Natural;
  else if (opt.order == "random") fit_opts.order = mrash::CoordinateOrder::Random;
  else if (opt.order == "lasso-path") fit_opts.order = mrash::CoordinateOrder::LassoPath;
  else throw mrash::ParseError("unknown --order: " + opt.order);
  fit_opts.max_outer = opt.max_outer;
  fit_opts.tol = opt.tol;
  fit_opts.fix_prior = opt.fix_prior;
  if (!opt.weights.empty()) fit_opts.fixed_weights = parse_number_list(opt.weights, "weights");
  fit_opts.fix_sigma2 = opt.fix_sigma2;
  fit_opts.sigma2_init = opt.sigma2;
  fit_opts.cv_folds = std::min(opt.folds, n_rows);
  fit_opts.seed = opt.seed;
  return fit_opts;
}

int cmd_fit(const Options& opt) {
  const auto table = mrash::io::read_csv(opt.input);
  const auto dataset = mrash::io::split_response(table, opt.response);
  const mrash::FitOptions fit_opts = build_fit_options(opt, dataset.data.n_rows());

  const mrash::VebFit fit = mrash::fit(dataset.data, fit_opts);
  mrash::io::write_fit(opt.out + ".json", fit, dataset.feature_names);

  Eigen::MatrixXd trace(fit.elbo_trace.size(), 4);
  for (std::size_t t = 0; t < fit.elbo_trace.size(); ++t) {
    const int row = static_cast<int>(t);
    trace(row, 0) = static_cast<double>(t + 1);
    trace(row, 1) = fit.elbo_trace[t];
    trace(row, 2) = fit.sigma2_trace[t];
    trace(row, 3) = fit.pi1_trace[t];
  }
  mrash::io::write_csv(opt.out + "_trace.csv", {"iteration", "elbo", "sigma2", "pi1"}, trace);

  const int nonzero =
      static_cast<int>((fit.b_bar.cwiseAbs().array() > 1e-6).count());
  std::cout << "fit: " << dataset.data.n_rows() << " x " << dataset.data.n_cols()
            << ", response '" << dataset.response_name << "'\n"
            << "  coefficients with |b| > 1e-6: " << nonzero << "\n"
            << "  sigma2 = " << fit.sigma2 << ", pi1 = " << fit.prior.weights[0] << "\n"
            << "  outer iterations: " << fit.n_outer_iters
            << (fit.converged ? " (converged)" : " (NOT converged)") << "\n";
  if (fit.grid_warning) {
    std::cout << "  warning: pi_K = " << fit.prior.weights[fit.prior.n_components() - 1]
              << " > 0.01; consider a wider variance grid\n";
  }
  std::cout << "  wrote " << opt.out << ".json and " << opt.out << "_trace.csv\n";

  if (!opt.test.empty()) {
    const auto test_table = mrash::io::read_csv(opt.test);
    const auto test_set = mrash::io::split_response(test_table, opt.response);
    const Eigen::VectorXd pred = mrash::predict(fit, test_set.data.X);
    const double err = (test_set.data.y - pred).norm() /
                       std::sqrt(static_cast<double>(test_set.data.n_rows()));
    std::cout << "  test RMSE: " << err << "\n";
  }
  return fit.converged ? 0 : kExitNotConverged;
}

int cmd_predict(const Options& opt) {
  const auto loaded = mrash::io::read_fit(opt.model);
  const auto table = mrash::io::read_csv(opt.input);

  Eigen::MatrixXd x = table.values;
  // Allow a file that still carries the response column of the training set.
  if (x.cols() == loaded.fit.b_bar.size() + 1 && !loaded.feature_names.empty()) {
    bool matches = true;
    for (const auto& name : loaded.feature_names) {
      if (std::find(table.header.begin(), table.header.end(), name) == table.header.end()) {
        matches = false;
        break;
      }
    }
    if (matches) {
      Eigen::MatrixXd sub(x.rows(), loaded.fit.b_bar.size());
      for (int j = 0; j < static_cast<int>(loaded.feature_names.size()); ++j) {
        const auto it =
            std::find(table.header.begin(), table.header.end(), loaded.feature_names[j]);
        sub.col(j) = x.col(static_cast<int>(it - table.header.begin()));
      }
      x = std::move(sub);
    }
  }
  const Eigen::VectorXd pred = mrash::predict(loaded.fit, x);

  if (opt.format == "json") {
    std::ostringstream out;
    out << "[";
    for (int i = 0; i < pred.size(); ++i) {
      if (i) out << ",";
      out << mrash::io::format_double(pred[i]);
    }
    out << "]\n";
    mrash::io::write_text(opt.out, out.str());
  } else {
    mrash::io::write_csv(opt.out, {"prediction"}, pred);
  }
  std::cout << "wrote " << pred.size() << " predictions to " << opt.out << "\n";
  return 0;
}

int cmd_simulate(const Options& opt) {
  if (opt.scenarios.size() != 1) {
    throw mrash::ScenarioError("simulate expects exactly one --scenario file");
  }
  const auto scn = mrash::io::read_scenario(opt.scenarios[0]);
  const auto data = mrash::sim::generate(scn, 0);

  std::vector<std::string> header{opt.response};
  for (int j = 0; j < scn.p; ++j) header.push_back("x" + std::to_string(j + 1));
  Eigen::MatrixXd train(scn.n, scn.p + 1), test(scn.n, scn.p + 1);
  train.col(0) = data.train.y;
  train.rightCols(scn.p) = data.train.X;
  test.col(0) = data.test.y;
  test.rightCols(scn.p) = data.test.X;
  mrash::io::write_csv(opt.out + "_train.csv", header, train);
  mrash::io::write_csv(opt.out + "_test.csv", header, test);

  std::ostringstream truth;
  truth << "{\n  \"sigma2_true\": " << mrash::io::format_double(data.sigma2_true)
        << ",\n  \"support\": [";
  for (std::size_t i = 0; i < data.support.size(); ++i) {
    if (i) truth << ",";
    truth << data.support[i];
  }
  truth << "],\n  \"b\": [";
  for (int j = 0; j < data.true_b.size(); ++j) {
    if (j) truth << ",";
    truth << mrash::io::format_double(data.true_b[j]);
  }
  truth << "]\n}\n";
  mrash::io::write_text(opt.out + "_truth.json", truth.str());
  std::cout << "wrote " << opt.out << "_train.csv, " << opt.out << "_test.csv, " << opt.out
            << "_truth.json\n";
  return 0;
}

int cmd_benchmark(const Options& opt) {
  if (opt.scenarios.empty()) throw mrash::ScenarioError("benchmark needs --scenario files");
  std::vector<mrash::sim::SimScenario> scenarios;
  for (const auto& path : opt.scenarios) scenarios.push_back(mrash::io::read_scenario(path));
  const auto methods = parse_string_list(opt.methods);

  mrash::sim::BenchmarkOptions bench;
  bench.replicates = opt.replicates;
  bench.threads = opt.threads;
  const auto reports = mrash::sim::run_benchmark(scenarios, methods, bench);
  const auto agg = mrash::sim::aggregate(reports);

  if (opt.format == "json") {
    auto json_number = [](double v) {
      return std::isfinite(v) ? mrash::io::format_double(v) : std::string("null");
    };
    std::ostringstream rows;
    rows << "[\n";
    for (std::size_t i = 0; i < reports.size(); ++i) {
      const auto& r = reports[i];
      rows << "  {\"scenario\": \"" << r.scenario << "\", \"replicate\": " << r.replicate
           << ", \"method\": \"" << r.method << "\", \"rmse\": " << json_number(r.rmse)
           << ", \"rmse_scaled\": " << json_number(r.rmse_scaled)
           << ", \"rrmse\": " << json_number(r.rrmse)
           << ", \"seconds\": " << json_number(r.seconds) << "}"
           << (i + 1 < reports.size() ? ",\n" : "\n");
    }
    rows << "]\n";
    mrash::io::write_text(opt.out, rows.str());
  } else {
    mrash::io::write_text(opt.out, mrash::io::benchmark_csv(reports));
  }
  const std::string summary_path = opt.out + "_summary.csv";
  mrash::io::write_text(summary_path, mrash::io::aggregate_csv(agg));

  std::cout << "scenario,method,mean_rmse_scaled\n";
  for (const auto& row : agg) {
    std::cout << row.scenario << ',' << row.method << ',' << row.mean_rmse_scaled << "\n";
  }
  std::cout << "wrote " << opt.out << " and " << summary_path << "\n";
  int failures = 0;
  for (const auto& r : reports) {
    if (!r.ok) ++failures;
  }
  if (failures > 0) {
    std::cerr << "warning: " << failures << " benchmark cells failed (flagged rows)\n";
  }
  return 0;
}

int cmd_shrinkage_curve(const Options& opt) {
  mrash::nm::ScaleMixturePrior prior;
  double sigma = opt.sigma_curve;
  if (!opt.model.empty()) {
    const auto loaded = mrash::io::read_fit(opt.model);
    prior = loaded.fit.prior;
    sigma = std::sqrt(loaded.fit.sigma2);
  } else {
    if (opt.grid.empty()) {
      throw mrash::ParseError("shrinkage-curve needs --grid/--weights or --model");
    }
    prior.variances = parse_number_list(opt.grid, "grid");
    prior.weights = opt.weights.empty()
                        ? Eigen::VectorXd::Constant(prior.variances.size(),
                                                    1.0 / prior.variances.size())
                        : parse_number_list(opt.weights, "weights");
    prior.validate();
  }
  if (opt.n_points < 2) throw mrash::ParseError("--n-points must be at least 2");

  Eigen::MatrixXd rows(opt.n_points, 4);
  for (int i = 0; i < opt.n_points; ++i) {
    const double y = -opt.y_max + 2.0 * opt.y_max * i / (opt.n_points - 1);
    const double shrunk = mrash::nm::shrink(y, prior, sigma);
    rows(i, 0) = y;
    rows(i, 1) = shrunk;
    rows(i, 2) = mrash::nm::penalty_at_shrunk(y, prior, sigma);
    rows(i, 3) = y - shrunk;  // rho'(S(y)), by the stationarity identity
  }
  mrash::io::write_csv(opt.out, {"y", "shrink", "penalty", "penalty_deriv"}, rows);
  std::cout << "wrote " << opt.n_points << " curve points to " << opt.out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mr.ash: variational empirical Bayes multiple regression"};
  app.require_subcommand(1);
  Options opt;

  auto add_fit_flags = [&](CLI::App* cmd) {
    cmd->add_option("--grid-k", opt.grid_k, "number of grid components (default 20)");
    cmd->add_option("--grid", opt.grid, "explicit comma-separated variance grid");
    cmd->add_option("--weights", opt.weights, "comma-separated prior weights");
    cmd->add_option("--init", opt.init, "null | lasso | <coefficient CSV path>");
    cmd->add_option("--order", opt.order, "natural | random | lasso-path");
    cmd->add_option("--max-outer", opt.max_outer, "outer iteration cap");
    cmd->add_option("--tol", opt.tol, "convergence tolerance");
    cmd->add_flag("--fix-prior", opt.fix_prior, "keep mixture weights fixed");
    cmd->add_flag("--fix-sigma2", opt.fix_sigma2, "keep residual variance fixed");
    cmd->add_option("--sigma2", opt.sigma2, "residual variance (with --fix-sigma2)");
    cmd->add_option("--folds", opt.folds, "CV folds for the lasso initializer");
    cmd->add_option("--seed", opt.seed, "random seed");
  };

  auto* fit_cmd = app.add_subcommand("fit", "fit the model to a CSV data set");
  fit_cmd->add_option("--input", opt.input, "training CSV with header")->required();
  fit_cmd->add_option("--response", opt.response, "response column name or index (default y)");
  fit_cmd->add_option("--test", opt.test, "optional held-out CSV for a test RMSE");
  fit_cmd->add_option("--out", opt.out, "output prefix (default mrash_out)");
  add_fit_flags(fit_cmd);

  auto* predict_cmd = app.add_subcommand("predict", "predict from a fit artifact");
  predict_cmd->add_option("--model", opt.model, "fit artifact JSON")->required();
  predict_cmd->add_option("--input", opt.input, "CSV of predictors")->required();
  predict_cmd->add_option("--out", opt.out, "output file")->required();
  predict_cmd->add_option("--format", opt.format, "csv | json");

  auto* simulate_cmd = app.add_subcommand("simulate", "draw a scenario data set");
  simulate_cmd->add_option("--scenario", opt.scenarios, "scenario file")->required();
  simulate_cmd->add_option("--out", opt.out, "output prefix")->required();
  simulate_cmd->add_option("--response", opt.response, "response column name");

  auto* benchmark_cmd = app.add_subcommand("benchmark", "compare methods over replicates");
  benchmark_cmd->add_option("--scenario", opt.scenarios, "scenario file(s)")->required();
  benchmark_cmd->add_option("--methods", opt.methods, "comma-separated method list");
  benchmark_cmd->add_option("--replicates", opt.replicates, "replicates per scenario");
  benchmark_cmd->add_option("--threads", opt.threads, "worker threads (0 = auto)");
  benchmark_cmd->add_option("--out", opt.out, "row table path")->required();
  benchmark_cmd->add_option("--format", opt.format, "csv | json");

  auto* curve_cmd = app.add_subcommand("shrinkage-curve", "export S(y) and penalty curves");
  curve_cmd->add_option("--grid", opt.grid, "comma-separated variance grid");
  curve_cmd->add_option("--weights", opt.weights, "comma-separated prior weights");
  curve_cmd->add_option("--sigma", opt.sigma_curve, "noise standard deviation");
  curve_cmd->add_option("--model", opt.model, "take the prior from a fit artifact");
  curve_cmd->add_option("--y-max", opt.y_max, "curve range [-y_max, y_max]");
  curve_cmd->add_option("--n-points", opt.n_points, "number of grid points");
  curve_cmd->add_option("--out", opt.out, "output CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitParse;
  }

  try {
    if (fit_cmd->parsed()) return cmd_fit(opt);
    if (predict_cmd->parsed()) return cmd_predict(opt);
    if (simulate_cmd->parsed()) return cmd_simulate(opt);
    if (benchmark_cmd->parsed()) return cmd_benchmark(opt);
    if (curve_cmd->parsed()) return cmd_shrinkage_curve(opt);
  } catch (const mrash::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitParse;
  } catch (const mrash::ShapeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitShape;
  } catch (const mrash::ScenarioError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitScenario;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitParse;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitParse;
  }
  return 0;
}

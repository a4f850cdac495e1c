#include "mrash/simlab.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>
#include <thread>

#include <Eigen/QR>
#include <Eigen/SVD>

#include "mrash/errors.hpp"
#include "mrash/io.hpp"
#include "mrash/plr.hpp"
#include "mrash/rng.hpp"

namespace mrash::sim {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

// Sub-stream purposes; each (seed, replicate, purpose) tuple is independent.
enum Purpose : std::uint64_t {
  kTrainDesign = 1,
  kTestDesign = 2,
  kSupport = 3,
  kCoefficients = 4,
  kTrainNoise = 5,
  kTestNoise = 6,
};

Eigen::MatrixXd draw_design(const SimScenario& scn, rng::Stream& stream) {
  Eigen::MatrixXd x(scn.n, scn.p);
  switch (scn.design) {
    case DesignType::IidNormal:
      for (int i = 0; i < scn.n; ++i) {
        for (int j = 0; j < scn.p; ++j) x(i, j) = stream.normal();
      }
      break;
    case DesignType::Equicorrelated: {
      const double shared = std::sqrt(scn.rho);
      const double own = std::sqrt(1.0 - scn.rho);
      for (int i = 0; i < scn.n; ++i) {
        const double w = stream.normal();
        for (int j = 0; j < scn.p; ++j) x(i, j) = shared * w + own * stream.normal();
      }
      break;
    }
    case DesignType::External:
      throw std::logic_error("draw_design: external designs are loaded, not drawn");
  }
  return x;
}

// External matrices are centered and scaled to unit column standard
// deviation; simulated matrices are left raw.
Eigen::MatrixXd load_external(const SimScenario& scn) {
  io::CsvTable table = io::read_csv(scn.design_file);
  if (table.values.cols() != scn.p) {
    throw ScenarioError("external design: file has " + std::to_string(table.values.cols()) +
                        " columns, scenario wants p = " + std::to_string(scn.p));
  }
  if (table.values.rows() < 2 * scn.n) {
    throw ScenarioError("external design: need at least 2n = " + std::to_string(2 * scn.n) +
                        " rows, file has " + std::to_string(table.values.rows()));
  }
  Eigen::MatrixXd x = table.values;
  const double rows = static_cast<double>(x.rows());
  for (int j = 0; j < x.cols(); ++j) {
    const double mean = x.col(j).mean();
    x.col(j).array() -= mean;
    const double sd = std::sqrt(x.col(j).squaredNorm() / (rows - 1.0));
    if (sd > 0.0) x.col(j) /= sd;
  }
  return x;
}

double draw_signal(const SimScenario& scn, rng::Stream& stream) {
  switch (scn.signal) {
    case SignalDist::Normal: return stream.normal();
    case SignalDist::Uniform: return 2.0 * stream.uniform() - 1.0;
    case SignalDist::Laplace: return stream.laplace(1.0);
    case SignalDist::StudentT: return stream.student_t(scn.signal_df);
    case SignalDist::PointMass: return 1.0;
  }
  throw std::logic_error("draw_signal: unknown distribution");
}

// A draw with standard deviation sigma. For t noise with df <= 2 the
// variance is infinite, so sigma is used as the scale parameter instead.
double draw_noise(const SimScenario& scn, rng::Stream& stream, double sigma) {
  switch (scn.noise) {
    case NoiseDist::Normal: return sigma * stream.normal();
    case NoiseDist::Uniform: return sigma * std::sqrt(3.0) * (2.0 * stream.uniform() - 1.0);
    case NoiseDist::Laplace: return stream.laplace(sigma / std::sqrt(2.0));
    case NoiseDist::StudentT: {
      const int df = scn.noise_df;
      const double scale = df > 2 ? sigma / std::sqrt(df / (df - 2.0)) : sigma;
      return scale * stream.student_t(df);
    }
  }
  throw std::logic_error("draw_noise: unknown distribution");
}

double population_variance(const Eigen::VectorXd& v) {
  const double mean = v.mean();
  return (v.array() - mean).square().sum() / static_cast<double>(v.size());
}

std::uint64_t method_seed(const SimScenario& scn, std::uint64_t replicate, std::size_t method) {
  return rng::mix64(scn.seed, replicate, 1000 + method);
}

// Exact per-lambda ridge coefficients from a thin SVD of the centered design.
struct RidgeBasis {
  Eigen::MatrixXd v;           // p x r
  Eigen::VectorXd d;           // r singular values
  Eigen::VectorXd uty;         // r
  Eigen::VectorXd x_means;
  double y_mean = 0.0;
};

RidgeBasis ridge_basis(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  RidgeBasis basis;
  basis.x_means = x.colwise().mean();
  basis.y_mean = y.mean();
  const Eigen::MatrixXd xc = x.rowwise() - basis.x_means.transpose();
  Eigen::BDCSVD<Eigen::MatrixXd> svd(xc, Eigen::ComputeThinU | Eigen::ComputeThinV);
  basis.v = svd.matrixV();
  basis.d = svd.singularValues();
  basis.uty = svd.matrixU().transpose() * (y.array() - basis.y_mean).matrix();
  return basis;
}

void ridge_solution(const RidgeBasis& basis, double lambda, Eigen::VectorXd& b_hat,
                    double& intercept) {
  const Eigen::VectorXd scaled =
      (basis.d.array() / (basis.d.array().square() + lambda)) * basis.uty.array();
  b_hat = basis.v * scaled;
  intercept = basis.y_mean - basis.x_means.dot(b_hat);
}

// K-fold CV for ridge over a descending lambda grid; the closed form makes
// the dense p > n case cheap where coordinate descent would crawl.
MethodFit ridge_cv(const RegressionData& data, int n_folds, std::uint64_t seed) {
  const RidgeBasis full = ridge_basis(data.X, data.y);
  const double top = full.d.size() > 0 ? full.d[0] * full.d[0] : 1.0;
  const int n_lambda = 100;
  Eigen::VectorXd lambdas(n_lambda);
  for (int l = 0; l < n_lambda; ++l) {
    const double frac = static_cast<double>(l) / (n_lambda - 1);
    lambdas[l] = 10.0 * top * std::pow(10.0, -7.0 * frac);
  }

  const auto folds = plr::cv_folds(data.n_rows(), n_folds, seed);
  Eigen::VectorXd cv_errors = Eigen::VectorXd::Zero(n_lambda);
  for (const auto& held_out : folds) {
    std::vector<char> in_fold(data.n_rows(), 0);
    for (int i : held_out) in_fold[i] = 1;
    Eigen::MatrixXd x_train(data.n_rows() - held_out.size(), data.n_cols());
    Eigen::VectorXd y_train(x_train.rows());
    int row = 0;
    for (int i = 0; i < data.n_rows(); ++i) {
      if (in_fold[i]) continue;
      x_train.row(row) = data.X.row(i);
      y_train[row] = data.y[i];
      ++row;
    }
    const RidgeBasis basis = ridge_basis(x_train, y_train);
    Eigen::VectorXd b_hat;
    double intercept = 0.0;
    for (int l = 0; l < n_lambda; ++l) {
      ridge_solution(basis, lambdas[l], b_hat, intercept);
      double sse = 0.0;
      for (int i : held_out) {
        const double err = data.y[i] - intercept - data.X.row(i).dot(b_hat);
        sse += err * err;
      }
      cv_errors[l] += sse / static_cast<double>(held_out.size());
    }
  }

  int best = 0;
  for (int l = 1; l < n_lambda; ++l) {
    if (cv_errors[l] < cv_errors[best]) best = l;
  }
  MethodFit out;
  ridge_solution(full, lambdas[best], out.b_hat, out.intercept);
  return out;
}

}  // namespace

void SimScenario::validate() const {
  if (n < 1 || p < 1) throw ScenarioError("scenario: n and p must be positive");
  if (s < 0 || s > p) throw ScenarioError("scenario: s must lie in [0, p]");
  if (!(pve > 0.0 && pve < 1.0)) throw ScenarioError("scenario: pve must lie in (0, 1)");
  if (design == DesignType::Equicorrelated && !(rho >= 0.0 && rho <= 1.0)) {
    throw ScenarioError("scenario: rho must lie in [0, 1]");
  }
  if (design == DesignType::External && design_file.empty()) {
    throw ScenarioError("scenario: external design needs a file");
  }
  if (signal == SignalDist::StudentT && signal_df < 1) {
    throw ScenarioError("scenario: signal_df must be >= 1");
  }
  if (noise == NoiseDist::StudentT && noise_df < 1) {
    throw ScenarioError("scenario: noise_df must be >= 1");
  }
}

SimData generate(const SimScenario& scn, std::uint64_t replicate) {
  scn.validate();
  SimData out;

  Eigen::MatrixXd x_train, x_test;
  if (scn.design == DesignType::External) {
    const Eigen::MatrixXd full = load_external(scn);
    x_train = full.topRows(scn.n);
    x_test = full.middleRows(scn.n, scn.n);
  } else {
    auto train_stream = rng::Stream::substream(scn.seed, replicate, kTrainDesign);
    auto test_stream = rng::Stream::substream(scn.seed, replicate, kTestDesign);
    x_train = draw_design(scn, train_stream);
    x_test = draw_design(scn, test_stream);
  }

  // Support: s indices uniform without replacement (partial Fisher-Yates).
  auto support_stream = rng::Stream::substream(scn.seed, replicate, kSupport);
  std::vector<int> indices(scn.p);
  std::iota(indices.begin(), indices.end(), 0);
  for (int i = 0; i < scn.s; ++i) {
    const auto pick = i + static_cast<int>(support_stream.below(scn.p - i));
    std::swap(indices[i], indices[pick]);
  }
  out.support.assign(indices.begin(), indices.begin() + scn.s);
  std::sort(out.support.begin(), out.support.end());

  auto coef_stream = rng::Stream::substream(scn.seed, replicate, kCoefficients);
  out.true_b = Eigen::VectorXd::Zero(scn.p);
  for (int j : out.support) out.true_b[j] = draw_signal(scn, coef_stream);

  const Eigen::VectorXd signal_train = x_train * out.true_b;
  const double signal_var = population_variance(signal_train);
  out.sigma2_true = signal_var > 0.0 ? signal_var * (1.0 - scn.pve) / scn.pve : 1.0;
  const double sigma = std::sqrt(out.sigma2_true);

  auto train_noise = rng::Stream::substream(scn.seed, replicate, kTrainNoise);
  auto test_noise = rng::Stream::substream(scn.seed, replicate, kTestNoise);
  Eigen::VectorXd y_train(scn.n), y_test(scn.n);
  const Eigen::VectorXd signal_test = x_test * out.true_b;
  for (int i = 0; i < scn.n; ++i) y_train[i] = signal_train[i] + draw_noise(scn, train_noise, sigma);
  for (int i = 0; i < scn.n; ++i) y_test[i] = signal_test[i] + draw_noise(scn, test_noise, sigma);

  out.train = RegressionData(std::move(x_train), std::move(y_train));
  out.test = RegressionData(std::move(x_test), std::move(y_test));
  return out;
}

double rmse(const Eigen::VectorXd& y_test, const Eigen::MatrixXd& x_test,
            const Eigen::VectorXd& b_hat, double intercept) {
  if (x_test.rows() != y_test.size() || x_test.cols() != b_hat.size()) {
    throw ShapeError("rmse: dimension mismatch");
  }
  const Eigen::VectorXd pred = (x_test * b_hat).array() + intercept;
  return (y_test - pred).norm() / std::sqrt(static_cast<double>(y_test.size()));
}

double rmse_scaled(const Eigen::VectorXd& y_test, const Eigen::MatrixXd& x_test,
                   const Eigen::VectorXd& b_hat, double intercept, double sigma2_true,
                   double pve) {
  if (!(pve > 0.0 && pve < 1.0)) throw std::invalid_argument("rmse_scaled: pve must lie in (0,1)");
  const double null_rmse = std::sqrt(sigma2_true) / std::sqrt(1.0 - pve);
  return rmse(y_test, x_test, b_hat, intercept) / null_rmse;
}

void fill_rrmse(std::vector<EvalReport>& reports) {
  if (reports.empty()) throw std::invalid_argument("fill_rrmse: no reports");
  std::map<std::pair<std::string, int>, double> best;
  for (const auto& r : reports) {
    if (!r.ok) continue;
    auto key = std::make_pair(r.scenario, r.replicate);
    auto it = best.find(key);
    if (it == best.end() || r.rmse < it->second) best[key] = r.rmse;
  }
  for (auto& r : reports) {
    if (!r.ok) {
      r.rrmse = kNan;
      continue;
    }
    const double min_rmse = best.at({r.scenario, r.replicate});
    r.rrmse = min_rmse > 0.0 ? r.rmse / min_rmse : 1.0;
  }
}

MethodFit fit_method(const std::string& method, const SimData& data, std::uint64_t seed,
                     const FitOptions& mr_ash_options) {
  const int p = data.train.n_cols();
  MethodFit out;
  out.b_hat = Eigen::VectorXd::Zero(p);

  if (method == "null") {
    out.intercept = data.train.y.mean();
    return out;
  }
  if (method == "oracle_ols") {
    // OLS conditional on knowing the true support.
    const int s = static_cast<int>(data.support.size());
    if (s == 0) {
      out.intercept = data.train.y.mean();
      return out;
    }
    Eigen::MatrixXd design(data.train.n_rows(), s + 1);
    design.col(0).setOnes();
    for (int i = 0; i < s; ++i) design.col(i + 1) = data.train.X.col(data.support[i]);
    const Eigen::VectorXd solution = design.colPivHouseholderQr().solve(data.train.y);
    out.intercept = solution[0];
    for (int i = 0; i < s; ++i) out.b_hat[data.support[i]] = solution[i + 1];
    return out;
  }
  if (method == "mr_ash" || method == "mr_ash_null" || method == "mr_ash_lasso_order") {
    FitOptions options = mr_ash_options;
    options.seed = seed;
    if (method == "mr_ash_null") {
      options.init = InitMode::Null;
      options.order = CoordinateOrder::Random;
    } else if (method == "mr_ash_lasso_order") {
      options.init = InitMode::Lasso;
      options.order = CoordinateOrder::LassoPath;
    } else {
      options.init = InitMode::Lasso;
      options.order = CoordinateOrder::Natural;
    }
    const VebFit fitted = fit(data.train, options);
    out.b_hat = fitted.b_bar;
    out.intercept = fitted.intercept;
    return out;
  }
  if (method == "lasso") {
    const auto path = plr::lasso_path_cv(data.train, 100, 10, seed);
    out.b_hat = plr::lasso_cv_coefficients(path);
    out.intercept = path.intercepts[path.lambda_min_index];
    return out;
  }
  if (method == "ridge") {
    return ridge_cv(data.train, 10, seed);
  }
  if (method == "mcp" || method == "scad") {
    const plr::Penalty penalty = plr::penalty_from_string(method);
    const double eta = method == "mcp" ? 3.0 : 3.7;
    const auto lambdas = plr::default_lambda_grid(data.train, penalty, eta, 100);
    const auto cv = plr::cv_fit(data.train, penalty, eta, lambdas, 10, seed);
    out.b_hat = cv.fit.coefficients;
    out.intercept = cv.fit.intercept;
    return out;
  }
  if (method == "elastic_net") {
    double best_error = std::numeric_limits<double>::infinity();
    for (int step = 0; step <= 10; ++step) {
      const double eta = step / 10.0;
      const auto lambdas = plr::default_lambda_grid(data.train, plr::Penalty::ElasticNet, eta, 100);
      const auto cv = plr::cv_fit(data.train, plr::Penalty::ElasticNet, eta, lambdas, 10, seed);
      const double error = cv.cv_errors.minCoeff();
      if (error < best_error) {
        best_error = error;
        out.b_hat = cv.fit.coefficients;
        out.intercept = cv.fit.intercept;
      }
    }
    return out;
  }
  throw std::invalid_argument("unknown benchmark method: " + method);
}

std::vector<EvalReport> run_benchmark(const std::vector<SimScenario>& scenarios,
                                      const std::vector<std::string>& methods,
                                      const BenchmarkOptions& options) {
  if (scenarios.empty() || methods.empty()) {
    throw std::invalid_argument("run_benchmark: needs scenarios and methods");
  }
  for (const auto& scn : scenarios) scn.validate();

  const int n_methods = static_cast<int>(methods.size());
  const int cells = static_cast<int>(scenarios.size()) * options.replicates;
  std::vector<EvalReport> reports(static_cast<std::size_t>(cells) * n_methods);

  // Replicate cells are independent; parallelize over (scenario, replicate)
  // pairs and fill a pre-indexed report table.
  std::atomic<int> next{0};
  auto worker = [&]() {
    for (int cell = next.fetch_add(1); cell < cells; cell = next.fetch_add(1)) {
      const int scenario_index = cell / options.replicates;
      const int replicate = cell % options.replicates;
      const SimScenario& scn = scenarios[scenario_index];

      SimData data;
      bool generated = true;
      std::string generate_error;
      try {
        data = generate(scn, static_cast<std::uint64_t>(replicate));
      } catch (const std::exception& e) {
        generated = false;
        generate_error = e.what();
      }

      for (int m = 0; m < n_methods; ++m) {
        EvalReport& report = reports[static_cast<std::size_t>(cell) * n_methods + m];
        report.scenario = scn.id;
        report.replicate = replicate;
        report.method = methods[m];
        if (!generated) {
          report.ok = false;
          report.error = generate_error;
          report.rmse = report.rmse_scaled = report.rrmse = kNan;
          continue;
        }
        try {
          const auto start = std::chrono::steady_clock::now();
          const MethodFit fitted =
              fit_method(methods[m], data, method_seed(scn, replicate, m), options.mr_ash);
          const auto stop = std::chrono::steady_clock::now();
          report.seconds = std::chrono::duration<double>(stop - start).count();
          report.rmse = rmse(data.test.y, data.test.X, fitted.b_hat, fitted.intercept);
          report.rmse_scaled = report.rmse / (std::sqrt(data.sigma2_true) / std::sqrt(1.0 - scn.pve));
        } catch (const std::exception& e) {
          report.ok = false;
          report.error = e.what();
          report.rmse = report.rmse_scaled = report.rrmse = kNan;
        }
      }
    }
  };

  int n_threads = options.threads > 0
                      ? options.threads
                      : static_cast<int>(std::thread::hardware_concurrency());
  n_threads = std::max(1, std::min(n_threads, cells));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  fill_rrmse(reports);
  return reports;
}

std::vector<AggregateRow> aggregate(const std::vector<EvalReport>& reports) {
  std::vector<AggregateRow> rows;
  std::map<std::pair<std::string, std::string>, std::size_t> index;
  std::map<std::pair<std::string, std::string>, std::vector<double>> scaled;
  for (const auto& r : reports) {
    auto key = std::make_pair(r.scenario, r.method);
    auto it = index.find(key);
    if (it == index.end()) {
      index[key] = rows.size();
      rows.push_back(AggregateRow{r.scenario, r.method, 0, 0, 0, 0, 0});
    }
    if (!r.ok) continue;
    AggregateRow& row = rows[index[key]];
    row.mean_rmse_scaled += r.rmse_scaled;
    row.mean_rrmse += r.rrmse;
    row.mean_seconds += r.seconds;
    row.n_ok += 1;
    scaled[key].push_back(r.rmse_scaled);
  }
  for (auto& row : rows) {
    if (row.n_ok == 0) continue;
    row.mean_rmse_scaled /= row.n_ok;
    row.mean_rrmse /= row.n_ok;
    row.mean_seconds /= row.n_ok;
    auto& values = scaled[{row.scenario, row.method}];
    std::sort(values.begin(), values.end());
    const std::size_t mid = values.size() / 2;
    row.median_rmse_scaled =
        values.size() % 2 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
  }
  return rows;
}

}  // namespace mrash::sim

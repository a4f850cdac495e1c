#ifndef MRASH_SIMLAB_HPP
#define MRASH_SIMLAB_HPP

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "mrash/mr_ash.hpp"
#include "mrash/regression_data.hpp"

namespace mrash::sim {

enum class DesignType { IidNormal, Equicorrelated, External };
enum class SignalDist { Normal, Uniform, Laplace, StudentT, PointMass };
enum class NoiseDist { Normal, Uniform, Laplace, StudentT };

struct SimScenario {
  std::string id = "scenario";
  int n = 500;
  int p = 1000;
  int s = 20;  // number of nonzero coefficients
  DesignType design = DesignType::IidNormal;
  double rho = 0.0;         // equicorrelated designs
  std::string design_file;  // external designs (CSV with header, >= 2n rows)
  SignalDist signal = SignalDist::Normal;
  int signal_df = 2;  // t signals
  NoiseDist noise = NoiseDist::Normal;
  int noise_df = 4;  // t noise
  double pve = 0.5;
  std::uint64_t seed = 1;

  void validate() const;  // throws ScenarioError
};

struct SimData {
  RegressionData train;
  RegressionData test;
  Eigen::VectorXd true_b;
  std::vector<int> support;  // sorted indices of nonzero coefficients
  double sigma2_true = 1.0;
};

/// Deterministic draw for (scenario, replicate). The noise variance is
/// sigma2 = Var(X b) * (1 - PVE) / PVE with Var computed empirically on the
/// realized training design, so the train-set PVE matches the target exactly.
SimData generate(const SimScenario& scenario, std::uint64_t replicate = 0);

/// ||y - (intercept + X b)|| / sqrt(n).
double rmse(const Eigen::VectorXd& y_test, const Eigen::MatrixXd& x_test,
            const Eigen::VectorXd& b_hat, double intercept);

/// Test RMSE divided by the expected RMSE of the zero predictor,
/// sigma_true / sqrt(1 - PVE). Oracle ~ sqrt(1-PVE), null ~ 1.
double rmse_scaled(const Eigen::VectorXd& y_test, const Eigen::MatrixXd& x_test,
                   const Eigen::VectorXd& b_hat, double intercept, double sigma2_true,
                   double pve);

struct EvalReport {
  std::string scenario;
  int replicate = 0;
  std::string method;
  double rmse = 0.0;
  double rmse_scaled = 0.0;
  double rrmse = 0.0;
  double seconds = 0.0;
  bool ok = true;
  std::string error;
};

/// RRMSE = RMSE / (best RMSE among the methods of the same replicate);
/// the per-replicate minimum is exactly 1. Throws on empty groups.
void fill_rrmse(std::vector<EvalReport>& reports);

struct BenchmarkOptions {
  int replicates = 20;
  int threads = 0;  // 0 -> hardware concurrency
  FitOptions mr_ash;  // base options for the mr_ash variants
};

/// Runs every (scenario, replicate, method) cell. Known methods:
/// mr_ash, mr_ash_null, mr_ash_lasso_order, ridge, lasso, elastic_net,
/// mcp, scad, oracle_ols, null. Per-cell failures land in flagged rows.
std::vector<EvalReport> run_benchmark(const std::vector<SimScenario>& scenarios,
                                      const std::vector<std::string>& methods,
                                      const BenchmarkOptions& options = {});

struct AggregateRow {
  std::string scenario;
  std::string method;
  double mean_rmse_scaled = 0.0;
  double median_rmse_scaled = 0.0;
  double mean_rrmse = 0.0;
  double mean_seconds = 0.0;
  int n_ok = 0;
};

std::vector<AggregateRow> aggregate(const std::vector<EvalReport>& reports);

/// Fit one method on training data; used by the benchmark and the tests.
struct MethodFit {
  Eigen::VectorXd b_hat;
  double intercept = 0.0;
};
MethodFit fit_method(const std::string& method, const SimData& data, std::uint64_t seed,
                     const FitOptions& mr_ash_options = {});

}  // namespace mrash::sim

#endif

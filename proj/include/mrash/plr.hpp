#ifndef MRASH_PLR_HPP
#define MRASH_PLR_HPP

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "mrash/regression_data.hpp"

namespace mrash::plr {

enum class Penalty { Ridge, Lasso, ElasticNet, Mcp, Scad };

Penalty penalty_from_string(const std::string& name);
std::string to_string(Penalty penalty);

struct PlrSpec {
  Penalty penalty = Penalty::Lasso;
  double lambda = 0.0;
  // Elastic-net mixing in [0,1]; MCP concavity (> 1); SCAD concavity (> 2).
  double eta = 0.0;

  void validate() const;
};

/// Closed-form shrinkage (proximal) operator for the penalty.
double shrink_plr(double t, const PlrSpec& spec);

/// Penalty value rho(t); used for objective traces.
double penalty_value(double t, const PlrSpec& spec);

struct PlrFit {
  Eigen::VectorXd coefficients;  // original X scale
  double intercept = 0.0;
  bool converged = false;
  int n_sweeps = 0;
  // 0.5 ||y - Xb||^2 + sum_j rho(b_j) on the unit-norm working scale,
  // recorded after every sweep.
  std::vector<double> objective_trace;
};

/// Cyclic coordinate descent with the exact one-dimensional operators.
/// Columns are rescaled to unit norm internally; the intercept comes from
/// centering. Stops when the largest coefficient change in a sweep is < tol.
PlrFit fit_plr(const RegressionData& data, const PlrSpec& spec, int max_iter = 10000,
               double tol = 1e-8);

struct LassoPath {
  Eigen::VectorXd lambdas;       // strictly decreasing; all-zero fit at lambdas[0]
  Eigen::MatrixXd coefficients;  // p x L, original scale
  Eigen::VectorXd intercepts;    // L
  std::vector<int> entry_order;  // coordinates by first nonzero along the path
  Eigen::VectorXd cv_errors;     // L mean K-fold MSEs (empty without CV)
  double lambda_min = 0.0;
  int lambda_min_index = -1;
};

/// Warm-started Lasso regularization path on a log-spaced grid from
/// lambda_max = max_j |x_j' y| (unit-norm columns) down three decades.
LassoPath lasso_path(const RegressionData& data, int n_lambda = 100);

/// Path plus seeded K-fold cross-validation; lambda_min minimizes mean CV MSE.
LassoPath lasso_path_cv(const RegressionData& data, int n_lambda = 100, int n_folds = 10,
                        std::uint64_t seed = 1);

/// Coefficients at the CV-selected lambda (refit on the full data).
Eigen::VectorXd lasso_cv_coefficients(const LassoPath& path);

struct CvResult {
  Eigen::VectorXd lambdas;
  Eigen::VectorXd cv_errors;
  double lambda_min = 0.0;
  PlrFit fit;  // full-data fit at lambda_min
};

/// Generic K-fold CV over a lambda grid for any penalty family (eta fixed).
/// Used by the benchmark baselines.
CvResult cv_fit(const RegressionData& data, Penalty penalty, double eta,
                const Eigen::VectorXd& lambdas, int n_folds, std::uint64_t seed);

/// Log-spaced descending grid for the given penalty family.
Eigen::VectorXd default_lambda_grid(const RegressionData& data, Penalty penalty,
                                    double eta = 0.0, int n_lambda = 100);

/// Seeded shuffle split of 0..n-1 into n_folds near-equal folds.
std::vector<std::vector<int>> cv_folds(int n, int n_folds, std::uint64_t seed);

}  // namespace mrash::plr

#endif

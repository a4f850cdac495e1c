#ifndef MRASH_MR_ASH_HPP
#define MRASH_MR_ASH_HPP

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "mrash/normal_means.hpp"
#include "mrash/regression_data.hpp"

namespace mrash {

/// Default variance grid sigma_k^2 = n (2^((k-1)/K) - 1)^2, k = 1..K.
/// The first entry is exactly 0 (point mass); entries are strictly increasing.
Eigen::VectorXd default_grid(int n, int k_count = 20);

enum class InitMode { Null, Lasso, Provided };
enum class CoordinateOrder { Natural, Random, Custom, LassoPath };

struct FitOptions {
  Eigen::VectorXd grid;            // empty -> default_grid(n, grid_k)
  int grid_k = 20;
  InitMode init = InitMode::Lasso;
  Eigen::VectorXd init_b;          // used when init == Provided
  CoordinateOrder order = CoordinateOrder::Natural;
  std::vector<int> custom_order;   // used when order == Custom
  int max_outer = 1000;
  double tol = 1e-8;               // pi criterion: ||pi_t - pi_{t-1}||_inf < K * tol
  bool fix_prior = false;          // keep mixture weights fixed (Algorithm-3 mode)
  Eigen::VectorXd fixed_weights;   // weights when fix_prior (empty -> uniform)
  bool fix_sigma2 = false;
  double sigma2_init = -1.0;       // <= 0 -> ||y - X b||^2 / n after initialization
  int cv_folds = 10;               // folds for the Lasso initializer
  std::uint64_t seed = 1;          // random update order + CV fold shuffling
};

/// Mutable solver state over mean-centered data. phi/mu/s2 hold the factor
/// parameters from the most recent coordinate pass; s2 entries were computed
/// under the sigma^2 current at that pass.
struct VebState {
  Eigen::VectorXd b_bar;      // p posterior means
  Eigen::VectorXd resid_bar;  // n expected residuals y - X b_bar
  nm::ScaleMixturePrior prior;  // relative grid + current weights
  double sigma2 = 1.0;
  Eigen::MatrixXd phi;  // p x K responsibilities
  Eigen::MatrixXd mu;   // p x K component means
  Eigen::MatrixXd s2;   // p x K component variances
  Eigen::VectorXd b_tilde;  // p per-coordinate OLS estimates
};

struct VebFit {
  Eigen::VectorXd b_bar;
  nm::ScaleMixturePrior prior;
  double sigma2 = 1.0;
  double intercept = 0.0;
  std::vector<double> elbo_trace;   // one entry per outer iteration
  std::vector<double> sigma2_trace;
  std::vector<double> pi1_trace;
  int n_outer_iters = 0;
  bool converged = false;
  bool grid_warning = false;  // final pi_K > 1e-2; consider a wider grid
  FitOptions settings;
};

/// Fit plus the final solver state and centering record, for callers that
/// need the per-coordinate posterior factors.
struct VebFitDetail {
  VebFit fit;
  VebState state;
  RegressionData centered;  // the data the state refers to
  Eigen::VectorXd x_means;
  double y_mean = 0.0;
};

/// Single coordinate ascent step: recompute b_tilde_j against residuals that
/// exclude coordinate j, refresh (phi_j, mu_j, s2_j) from the normal-means
/// posterior with noise sigma^2/d_j and prior variances sigma^2 sigma_k^2,
/// then restore the residuals. Zero-norm columns get b_bar_j = 0 and
/// prior-weight responsibilities.
void update_coordinate(VebState& state, const RegressionData& data, int j);

/// pi_k <- mean_j phi_jk.
void update_prior_weights(VebState& state);

/// Closed-form sigma^2 update; valid immediately after a full coordinate pass
/// (and weight update). Requires grid[0] == 0; throws std::logic_error otherwise.
void update_sigma2(VebState& state, const RegressionData& data);

/// Evidence lower bound of the current state against its (centered) data.
double elbo(const VebState& state, const RegressionData& data);

VebFitDetail fit_detailed(const RegressionData& data, FitOptions options = {});
VebFit fit(const RegressionData& data, FitOptions options = {});

/// intercept + Xnew * b_bar, in the original (uncentered) coordinates.
Eigen::VectorXd predict(const VebFit& fit, const Eigen::MatrixXd& x_new);

}  // namespace mrash

#endif

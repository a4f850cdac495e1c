#include "mrash/mr_ash.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "mrash/errors.hpp"
#include "mrash/plr.hpp"
#include "mrash/rng.hpp"

namespace mrash {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

void validate_grid(const Eigen::VectorXd& grid) {
  if (grid.size() < 1) throw std::invalid_argument("fit: empty variance grid");
  if (!(grid[0] >= 0.0)) throw std::invalid_argument("fit: grid variances must be nonnegative");
  for (int k = 1; k < grid.size(); ++k) {
    if (!(grid[k] > grid[k - 1])) {
      throw std::invalid_argument("fit: variance grid must be strictly ascending");
    }
  }
}

std::vector<int> natural_order(int p) {
  std::vector<int> order(p);
  std::iota(order.begin(), order.end(), 0);
  return order;
}

}  // namespace

Eigen::VectorXd default_grid(int n, int k_count) {
  if (n < 1) throw std::invalid_argument("default_grid: n must be >= 1");
  if (k_count < 2) throw std::invalid_argument("default_grid: K must be >= 2");
  Eigen::VectorXd grid(k_count);
  for (int k = 1; k <= k_count; ++k) {
    const double root = std::pow(2.0, static_cast<double>(k - 1) / k_count) - 1.0;
    grid[k - 1] = static_cast<double>(n) * root * root;
  }
  grid[0] = 0.0;
  return grid;
}

void update_coordinate(VebState& state, const RegressionData& data, int j) {
  const int k_count = state.prior.n_components();
  const double sigma2 = state.sigma2;
  const double d = data.column_norms_sq[j];

  auto phi = state.phi.row(j);
  auto mu = state.mu.row(j);
  auto s2 = state.s2.row(j);

  if (d == 0.0) {
    // Constant column: no likelihood contribution, q_j reverts to the prior.
    state.b_tilde[j] = 0.0;
    state.b_bar[j] = 0.0;
    phi = state.prior.weights.transpose();
    mu.setZero();
    s2 = (sigma2 * state.prior.variances).transpose();
    return;
  }

  const double b_old = state.b_bar[j];
  const double b_tilde = data.X.col(j).dot(state.resid_bar) / d + b_old;
  state.b_tilde[j] = b_tilde;

  // Normal-means posterior with noise sigma^2/d_j and prior variances
  // sigma^2 sigma_k^2, assembled in log space with max subtraction.
  const double noise = sigma2 / d;
  double max_lp = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < k_count; ++k) {
    const double pi_k = state.prior.weights[k];
    if (pi_k <= 0.0) {
      phi[k] = 0.0;
      continue;
    }
    const double total_var = noise + sigma2 * state.prior.variances[k];
    const double loglik = -0.5 * (kLog2Pi + std::log(total_var)) -
                          b_tilde * b_tilde / (2.0 * total_var);
    phi[k] = std::log(pi_k) + loglik;  // log posterior weight, normalized below
    max_lp = std::max(max_lp, phi[k]);
  }
  double norm = 0.0;
  for (int k = 0; k < k_count; ++k) {
    if (state.prior.weights[k] > 0.0) {
      phi[k] = std::exp(phi[k] - max_lp);
      // flush subnormal responsibilities so that a zero mixture weight is
      // exactly equivalent to an all-zero responsibility column
      if (phi[k] < std::numeric_limits<double>::min()) phi[k] = 0.0;
      norm += phi[k];
    }
  }
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    throw std::runtime_error("update_coordinate: responsibilities are not finite");
  }

  double b_new = 0.0;
  for (int k = 0; k < k_count; ++k) {
    phi[k] /= norm;
    const double u2 = sigma2 * state.prior.variances[k];
    if (u2 == 0.0) {
      mu[k] = 0.0;
      s2[k] = 0.0;
    } else {
      const double ratio = u2 / (noise + u2);
      mu[k] = ratio * b_tilde;
      s2[k] = ratio * noise;
    }
    b_new += phi[k] * mu[k];
  }
  state.b_bar[j] = b_new;
  if (b_new != b_old) state.resid_bar += data.X.col(j) * (b_old - b_new);
}

void update_prior_weights(VebState& state) {
  state.prior.weights = state.phi.colwise().mean().transpose();
}

void update_sigma2(VebState& state, const RegressionData& data) {
  if (state.prior.variances[0] != 0.0) {
    throw std::logic_error("update_sigma2: requires a point-mass first component");
  }
  const double n = static_cast<double>(data.n_rows());
  const double p = static_cast<double>(state.b_bar.size());
  const double pi1 = state.phi.col(0).mean();
  const double correction =
      (data.column_norms_sq.array() * state.b_bar.array() *
       (state.b_tilde.array() - state.b_bar.array()))
          .sum();
  const double numerator =
      state.resid_bar.squaredNorm() + correction + state.sigma2 * p * (1.0 - pi1);
  state.sigma2 = numerator / (n + p * (1.0 - pi1));
}

double elbo(const VebState& state, const RegressionData& data) {
  const int p = static_cast<int>(state.b_bar.size());
  const int k_count = state.prior.n_components();
  const double sigma2 = state.sigma2;
  const double n = static_cast<double>(data.n_rows());

  double quad = 0.0;  // sum_j d_j (E_q[b_j^2] - b_bar_j^2)
  double kl = 0.0;
  for (int j = 0; j < p; ++j) {
    double second_moment = 0.0;
    for (int k = 0; k < k_count; ++k) {
      const double phi = state.phi(j, k);
      if (phi <= 0.0) continue;  // 0 log 0 = 0
      const double mu = state.mu(j, k);
      const double s2 = state.s2(j, k);
      second_moment += phi * (mu * mu + s2);
      const double pi_k = state.prior.weights[k];
      if (pi_k <= 0.0) return -std::numeric_limits<double>::infinity();
      kl += phi * (std::log(phi) - std::log(pi_k));
      const double u2 = sigma2 * state.prior.variances[k];
      if (u2 > 0.0) {
        kl -= 0.5 * phi * (1.0 + std::log(s2 / u2) - (s2 + mu * mu) / u2);
      }
    }
    quad += data.column_norms_sq[j] * (second_moment - state.b_bar[j] * state.b_bar[j]);
  }
  const double expected_loglik = -0.5 * n * (kLog2Pi + std::log(sigma2)) -
                                 (state.resid_bar.squaredNorm() + quad) / (2.0 * sigma2);
  return expected_loglik - kl;
}

VebFitDetail fit_detailed(const RegressionData& data, FitOptions options) {
  data.validate();
  Eigen::VectorXd grid = options.grid;
  if (grid.size() == 0) {
    // The n-scaled grid is calibrated for unit-norm columns, where the
    // prior-to-noise ratio of coordinate j is sigma_k^2 itself. The solver
    // works with unscaled columns (ratio d_j sigma_k^2), so the default grid
    // is divided by the mean column norm to keep the same coverage.
    grid = default_grid(data.n_rows(), options.grid_k);
    const Eigen::VectorXd norms =
        (data.X.rowwise() - data.X.colwise().mean()).colwise().squaredNorm();
    const double mean_norm = norms.mean();
    if (mean_norm > 0.0) grid /= mean_norm;
  }
  validate_grid(grid);
  const int k_count = static_cast<int>(grid.size());
  const int n = data.n_rows();
  const int p = data.n_cols();
  if (options.max_outer < 1) throw std::invalid_argument("fit: max_outer must be >= 1");
  if (!(options.tol > 0.0)) throw std::invalid_argument("fit: tol must be positive");
  if (!options.fix_sigma2 && grid[0] != 0.0) {
    throw std::invalid_argument(
        "fit: the sigma^2 update assumes grid[0] == 0; fix sigma^2 or add the point mass");
  }

  VebFitDetail detail;
  auto centered = data.center();
  detail.centered = std::move(centered.data);
  detail.x_means = std::move(centered.x_means);
  detail.y_mean = centered.y_mean;
  const RegressionData& cdata = detail.centered;

  // Initial coefficients.
  Eigen::VectorXd b0 = Eigen::VectorXd::Zero(p);
  switch (options.init) {
    case InitMode::Null:
      break;
    case InitMode::Lasso: {
      if (n >= 3) {
        const int folds = std::clamp(options.cv_folds, 2, n);
        auto path = plr::lasso_path_cv(data, 100, folds, options.seed);
        b0 = plr::lasso_cv_coefficients(path);
      }
      break;
    }
    case InitMode::Provided:
      if (options.init_b.size() != p) {
        throw std::invalid_argument("fit: provided initial coefficients have wrong length");
      }
      if (!options.init_b.allFinite()) {
        throw std::invalid_argument("fit: provided initial coefficients are not finite");
      }
      b0 = options.init_b;
      break;
  }

  // Initial weights.
  Eigen::VectorXd pi0 = Eigen::VectorXd::Constant(k_count, 1.0 / k_count);
  if (options.fix_prior && options.fixed_weights.size() > 0) {
    if (options.fixed_weights.size() != k_count) {
      throw std::invalid_argument("fit: fixed weights length does not match the grid");
    }
    pi0 = options.fixed_weights;
  }

  VebState& state = detail.state;
  state.b_bar = std::move(b0);
  state.resid_bar = cdata.y - cdata.X * state.b_bar;
  state.prior = nm::ScaleMixturePrior(grid, pi0);
  state.b_tilde = state.b_bar;

  const double var_y = cdata.y.squaredNorm() / n;
  const double sigma2_floor = 1e-12 * var_y + 1e-300;
  state.sigma2 = options.sigma2_init > 0.0 ? options.sigma2_init
                                           : std::max(state.resid_bar.squaredNorm() / n,
                                                      sigma2_floor);

  // q_j starts at the prior; the first coordinate pass overwrites every row.
  state.phi = pi0.transpose().replicate(p, 1);
  state.mu = Eigen::MatrixXd::Zero(p, k_count);
  state.s2 = (state.sigma2 * grid).transpose().replicate(p, 1);

  std::vector<int> order;
  switch (options.order) {
    case CoordinateOrder::Natural:
    case CoordinateOrder::Random:
      order = natural_order(p);
      break;
    case CoordinateOrder::Custom: {
      if (static_cast<int>(options.custom_order.size()) != p) {
        throw std::invalid_argument("fit: custom order must be a permutation of 0..p-1");
      }
      std::vector<char> seen(p, 0);
      for (int j : options.custom_order) {
        if (j < 0 || j >= p || seen[j]) {
          throw std::invalid_argument("fit: custom order must be a permutation of 0..p-1");
        }
        seen[j] = 1;
      }
      order = options.custom_order;
      break;
    }
    case CoordinateOrder::LassoPath:
      order = plr::lasso_path(data, 100).entry_order;
      break;
  }
  rng::Stream order_rng(rng::mix64(options.seed, 0x0edeu));

  VebFit& fit = detail.fit;
  Eigen::VectorXd pi_prev(k_count);
  Eigen::VectorXd b_prev(p);
  for (int iter = 0; iter < options.max_outer; ++iter) {
    pi_prev = state.prior.weights;
    b_prev = state.b_bar;
    if (options.order == CoordinateOrder::Random) {
      // fresh permutation every outer iteration
      order_rng.shuffle(order.begin(), order.end());
    }
    for (int j : order) update_coordinate(state, cdata, j);
    if (!options.fix_prior) update_prior_weights(state);
    if (!options.fix_sigma2) {
      update_sigma2(state, cdata);
      state.sigma2 = std::max(state.sigma2, sigma2_floor);
    }

    fit.elbo_trace.push_back(elbo(state, cdata));
    fit.sigma2_trace.push_back(state.sigma2);
    fit.pi1_trace.push_back(state.prior.weights[0]);
    fit.n_outer_iters = iter + 1;

    bool converged;
    if (!options.fix_prior) {
      converged = (state.prior.weights - pi_prev).cwiseAbs().maxCoeff() < k_count * options.tol;
    } else {
      const double scale = std::max(1.0, state.b_bar.cwiseAbs().maxCoeff());
      converged = (state.b_bar - b_prev).cwiseAbs().maxCoeff() < options.tol * scale;
    }
    if (converged) {
      fit.converged = true;
      break;
    }
  }

  fit.b_bar = state.b_bar;
  fit.prior = state.prior;
  fit.sigma2 = state.sigma2;
  fit.intercept = detail.y_mean - detail.x_means.dot(state.b_bar);
  fit.grid_warning = k_count >= 2 && state.prior.weights[k_count - 1] > 1e-2;
  options.grid = grid;
  fit.settings = std::move(options);
  return detail;
}

VebFit fit(const RegressionData& data, FitOptions options) {
  return fit_detailed(data, std::move(options)).fit;
}

Eigen::VectorXd predict(const VebFit& fit, const Eigen::MatrixXd& x_new) {
  if (x_new.cols() != fit.b_bar.size()) {
    throw ShapeError("predict: design matrix has " + std::to_string(x_new.cols()) +
                     " columns, model expects " + std::to_string(fit.b_bar.size()));
  }
  return (x_new * fit.b_bar).array() + fit.intercept;
}

}  // namespace mrash

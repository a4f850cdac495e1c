#include "mrash/normal_means.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace mrash::nm {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_normal_pdf(double y, double var) {
  return -0.5 * (kLog2Pi + std::log(var)) - y * y / (2.0 * var);
}

void check_scalar_inputs(double y, double s2) {
  if (!std::isfinite(y)) throw std::invalid_argument("normal means: observation is not finite");
  if (!(s2 > 0.0) || !std::isfinite(s2)) {
    throw std::invalid_argument("normal means: observation variance must be positive");
  }
}

// Responsibilities from log weights + log likelihoods, max-subtracted.
Eigen::VectorXd normalize_logs(const Eigen::VectorXd& weights, const Eigen::VectorXd& loglik) {
  const int k_count = static_cast<int>(weights.size());
  double max_lp = kNegInf;
  for (int k = 0; k < k_count; ++k) {
    if (weights[k] > 0.0) max_lp = std::max(max_lp, std::log(weights[k]) + loglik[k]);
  }
  Eigen::VectorXd phi = Eigen::VectorXd::Zero(k_count);
  double total = 0.0;
  for (int k = 0; k < k_count; ++k) {
    if (weights[k] > 0.0) {
      phi[k] = std::exp(std::log(weights[k]) + loglik[k] - max_lp);
      // keep zero weights exactly reproducible under the M-step mean
      if (phi[k] < std::numeric_limits<double>::min()) phi[k] = 0.0;
      total += phi[k];
    }
  }
  if (!(total > 0.0) || !std::isfinite(total)) {
    throw std::runtime_error("responsibilities: normalizer is not finite");
  }
  phi /= total;
  return phi;
}

}  // namespace

ScaleMixturePrior::ScaleMixturePrior(Eigen::VectorXd vars, Eigen::VectorXd w)
    : variances(std::move(vars)), weights(std::move(w)) {
  validate();
}

ScaleMixturePrior ScaleMixturePrior::with_uniform_weights(Eigen::VectorXd vars) {
  const auto k_count = vars.size();
  return ScaleMixturePrior(std::move(vars),
                           Eigen::VectorXd::Constant(k_count, 1.0 / static_cast<double>(k_count)));
}

void ScaleMixturePrior::validate() const {
  if (variances.size() < 1) throw std::invalid_argument("prior: needs at least one component");
  if (variances.size() != weights.size()) {
    throw std::invalid_argument("prior: variances and weights differ in length");
  }
  if (!(variances[0] >= 0.0)) throw std::invalid_argument("prior: variances must be nonnegative");
  for (int k = 1; k < variances.size(); ++k) {
    if (!(variances[k] > variances[k - 1])) {
      throw std::invalid_argument("prior: variances must be strictly increasing");
    }
  }
  double total = 0.0;
  for (int k = 0; k < weights.size(); ++k) {
    if (!(weights[k] >= 0.0)) throw std::invalid_argument("prior: weights must be nonnegative");
    total += weights[k];
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw std::invalid_argument("prior: weights must sum to 1");
  }
  if (!variances.allFinite()) throw std::invalid_argument("prior: variances must be finite");
}

void NormalMeansProblem::validate() const {
  if (observations.size() == 0) throw std::invalid_argument("normal means problem: empty");
  if (observations.size() != obs_variances.size()) {
    throw std::invalid_argument("normal means problem: length mismatch");
  }
  if (!observations.allFinite()) {
    throw std::invalid_argument("normal means problem: observations must be finite");
  }
  for (int j = 0; j < obs_variances.size(); ++j) {
    if (!(obs_variances[j] > 0.0) || !std::isfinite(obs_variances[j])) {
      throw std::invalid_argument("normal means problem: variances must be positive");
    }
  }
}

Eigen::VectorXd component_loglik(double y, double s2, const ScaleMixturePrior& prior) {
  check_scalar_inputs(y, s2);
  const int k_count = prior.n_components();
  Eigen::VectorXd out(k_count);
  for (int k = 0; k < k_count; ++k) {
    out[k] = log_normal_pdf(y, s2 + prior.variances[k]);
  }
  return out;
}

Eigen::VectorXd responsibilities(double y, double s2, const ScaleMixturePrior& prior) {
  return normalize_logs(prior.weights, component_loglik(y, s2, prior));
}

ComponentPosterior posterior_components(double y, double s2, const ScaleMixturePrior& prior) {
  const int k_count = prior.n_components();
  ComponentPosterior post;
  post.phi = responsibilities(y, s2, prior);
  post.mean.resize(k_count);
  post.var.resize(k_count);
  for (int k = 0; k < k_count; ++k) {
    const double u2 = prior.variances[k];
    if (u2 == 0.0) {
      // exact point-mass branch, no epsilon smoothing
      post.mean[k] = 0.0;
      post.var[k] = 0.0;
    } else {
      const double ratio = u2 / (s2 + u2);
      post.mean[k] = ratio * y;
      post.var[k] = ratio * s2;
    }
  }
  return post;
}

double marginal_loglik(double y, double s2, const ScaleMixturePrior& prior) {
  const Eigen::VectorXd loglik = component_loglik(y, s2, prior);
  double max_lp = kNegInf;
  for (int k = 0; k < prior.n_components(); ++k) {
    if (prior.weights[k] > 0.0) max_lp = std::max(max_lp, std::log(prior.weights[k]) + loglik[k]);
  }
  double total = 0.0;
  for (int k = 0; k < prior.n_components(); ++k) {
    if (prior.weights[k] > 0.0) {
      total += std::exp(std::log(prior.weights[k]) + loglik[k] - max_lp);
    }
  }
  return max_lp + std::log(total);
}

NMPosterior posterior(const NormalMeansProblem& problem, const ScaleMixturePrior& prior) {
  problem.validate();
  prior.validate();
  const int p = problem.size();
  const int k_count = prior.n_components();
  NMPosterior post;
  post.responsibilities.resize(p, k_count);
  post.component_means.resize(p, k_count);
  post.component_vars.resize(p, k_count);
  post.means.resize(p);
  for (int j = 0; j < p; ++j) {
    ComponentPosterior cp =
        posterior_components(problem.observations[j], problem.obs_variances[j], prior);
    post.responsibilities.row(j) = cp.phi.transpose();
    post.component_means.row(j) = cp.mean.transpose();
    post.component_vars.row(j) = cp.var.transpose();
    post.means[j] = cp.posterior_mean();
  }
  return post;
}

double marginal_loglik(const NormalMeansProblem& problem, const ScaleMixturePrior& prior) {
  problem.validate();
  double total = 0.0;
  for (int j = 0; j < problem.size(); ++j) {
    total += marginal_loglik(problem.observations[j], problem.obs_variances[j], prior);
  }
  return total;
}

EmResult fit_mixture_weights(const NormalMeansProblem& problem, const ScaleMixturePrior& init,
                             const EmOptions& options) {
  problem.validate();
  init.validate();
  if (options.max_iter < 1) throw std::invalid_argument("fit_mixture_weights: max_iter >= 1");
  if (!(options.tol > 0.0)) throw std::invalid_argument("fit_mixture_weights: tol > 0");

  const int p = problem.size();
  const int k_count = init.n_components();

  // The grid is fixed, so the component log-likelihood matrix is constant.
  Eigen::MatrixXd loglik(p, k_count);
  for (int j = 0; j < p; ++j) {
    loglik.row(j) =
        component_loglik(problem.observations[j], problem.obs_variances[j], init).transpose();
  }

  EmResult result;
  result.prior = init;
  Eigen::VectorXd pi = init.weights;
  Eigen::VectorXd phi(k_count);

  for (int iter = 0; iter < options.max_iter; ++iter) {
    Eigen::VectorXd pi_new = Eigen::VectorXd::Zero(k_count);
    for (int j = 0; j < p; ++j) {
      phi = normalize_logs(pi, loglik.row(j).transpose());
      pi_new += phi;
    }
    pi_new /= static_cast<double>(p);

    const double delta = (pi_new - pi).cwiseAbs().maxCoeff();
    pi = pi_new;
    result.prior.weights = pi;
    result.loglik_trace.push_back(marginal_loglik(problem, result.prior));
    result.n_iters = iter + 1;
    if (delta < options.tol) {
      result.converged = true;
      break;
    }
  }
  return result;
}

double shrink(double y, const ScaleMixturePrior& prior, double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw std::invalid_argument("shrink: sigma must be positive");
  }
  const double sigma2 = sigma * sigma;
  ScaleMixturePrior scaled{prior};
  scaled.variances = prior.scaled_variances(sigma2);
  return posterior_components(y, sigma2, scaled).posterior_mean();
}

double nm_marginal_loglik(double y, const ScaleMixturePrior& prior, double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw std::invalid_argument("nm_marginal_loglik: sigma must be positive");
  }
  const double sigma2 = sigma * sigma;
  ScaleMixturePrior scaled{prior};
  scaled.variances = prior.scaled_variances(sigma2);
  return marginal_loglik(y, sigma2, scaled);
}

double penalty_at_shrunk(double y, const ScaleMixturePrior& prior, double sigma) {
  const double sigma2 = sigma * sigma;
  const double shrunk = shrink(y, prior, sigma);
  const double resid = y - shrunk;
  return -sigma2 * nm_marginal_loglik(y, prior, sigma) - 0.5 * resid * resid;
}

double invert_shrink(double b_bar, const ScaleMixturePrior& prior, double sigma, double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("invert_shrink: tol must be positive");
  if (!std::isfinite(b_bar)) throw std::invalid_argument("invert_shrink: target is not finite");
  prior.validate();

  bool has_slab = false;
  for (int k = 0; k < prior.n_components(); ++k) {
    if (prior.variances[k] > 0.0 && prior.weights[k] > 0.0) has_slab = true;
  }
  if (!has_slab) {
    // Operator range is {0}.
    if (b_bar == 0.0) return 0.0;
    throw std::range_error("invert_shrink: target outside operator range (point-mass prior)");
  }
  if (b_bar == 0.0) return 0.0;  // odd function

  const double target = std::abs(b_bar);
  const double sign = b_bar > 0.0 ? 1.0 : -1.0;

  // |S(y)| <= |y|, so the preimage is at least |b_bar|; expand upward.
  double lo = 0.0;
  double hi = std::max(target, 1.0);
  int doublings = 0;
  while (shrink(hi, prior, sigma) < target) {
    hi *= 2.0;
    if (++doublings > 64) {
      throw std::range_error("invert_shrink: target outside operator range");
    }
  }

  // Bisection on the strictly increasing map.
  double mid = hi;
  for (int iter = 0; iter < 400; ++iter) {
    mid = 0.5 * (lo + hi);
    const double value = shrink(mid, prior, sigma);
    if (std::abs(value - target) <= tol) return sign * mid;
    if (value < target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return sign * mid;
}

}  // namespace mrash::nm

#ifndef MRASH_NORMAL_MEANS_HPP
#define MRASH_NORMAL_MEANS_HPP

#include <Eigen/Core>
#include <vector>

namespace mrash::nm {

/// Finite scale mixture of zero-mean normals: sum_k weights[k] * N(0, variances[k]).
/// variances[0] == 0 encodes a point mass at zero. Variances may be absolute or
/// relative to a residual scale, depending on the operation they are passed to.
struct ScaleMixturePrior {
  Eigen::VectorXd variances;  // ascending, variances[0] >= 0
  Eigen::VectorXd weights;    // nonnegative, sums to 1

  ScaleMixturePrior() = default;
  ScaleMixturePrior(Eigen::VectorXd vars, Eigen::VectorXd w);

  static ScaleMixturePrior with_uniform_weights(Eigen::VectorXd vars);

  int n_components() const { return static_cast<int>(variances.size()); }

  // Component variances of the scaled prior g_sigma on the coefficients
  // themselves (sigma^2 * sigma_k^2).
  Eigen::VectorXd scaled_variances(double sigma2) const { return variances * sigma2; }

  void validate() const;  // throws std::invalid_argument on broken invariants
};

/// Independent observations y_j ~ N(b_j, s_j^2) with known per-observation variances.
struct NormalMeansProblem {
  Eigen::VectorXd observations;
  Eigen::VectorXd obs_variances;

  int size() const { return static_cast<int>(observations.size()); }
  void validate() const;
};

/// Exact posterior summaries for a NormalMeansProblem under a mixture prior.
struct NMPosterior {
  Eigen::MatrixXd responsibilities;  // p x K, rows on the simplex
  Eigen::MatrixXd component_means;   // p x K
  Eigen::MatrixXd component_vars;    // p x K
  Eigen::VectorXd means;             // p, posterior means sum_k phi_jk mu_jk
};

/// Per-component posterior at a single observation.
struct ComponentPosterior {
  Eigen::VectorXd phi;   // responsibilities
  Eigen::VectorXd mean;  // mu_k = u_k^2/(s^2+u_k^2) * y
  Eigen::VectorXd var;   // s_k^2 = s^2 u_k^2/(s^2+u_k^2)

  double posterior_mean() const { return phi.dot(mean); }
};

// --- Scalar building blocks. Prior variances are absolute (u_k^2); the
// --- component marginal likelihood is N(y; 0, s2 + u_k^2).

/// Per-component log marginal likelihoods log N(y; 0, s2 + u_k^2).
Eigen::VectorXd component_loglik(double y, double s2, const ScaleMixturePrior& prior);

/// Posterior mixture-assignment probabilities phi_k ~ pi_k L_k, normalized in
/// log space. Components with pi_k == 0 get phi_k == 0 exactly.
Eigen::VectorXd responsibilities(double y, double s2, const ScaleMixturePrior& prior);

/// (phi_k, mu_k, s_k^2) triple for each component; point-mass components
/// return mean 0 and variance 0 exactly.
ComponentPosterior posterior_components(double y, double s2, const ScaleMixturePrior& prior);

/// log sum_k pi_k L_k via log-sum-exp.
double marginal_loglik(double y, double s2, const ScaleMixturePrior& prior);

/// Exact posterior for every observation of a problem.
NMPosterior posterior(const NormalMeansProblem& problem, const ScaleMixturePrior& prior);

/// Marginal log-likelihood of a whole problem (sum over observations).
double marginal_loglik(const NormalMeansProblem& problem, const ScaleMixturePrior& prior);

struct EmOptions {
  int max_iter = 1000;
  double tol = 1e-8;  // stop when ||pi_t - pi_{t-1}||_inf < tol
};

struct EmResult {
  ScaleMixturePrior prior;           // input variances with fitted weights
  std::vector<double> loglik_trace;  // marginal log-likelihood after each M-step
  int n_iters = 0;
  bool converged = false;
};

/// EM for the mixture weights: E-step responsibilities, M-step column means.
EmResult fit_mixture_weights(const NormalMeansProblem& problem,
                             const ScaleMixturePrior& init,
                             const EmOptions& options = {});

// --- Posterior-mean shrinkage operator family. Here `prior` holds the grid of
// --- relative variances sigma_k^2; the operator works under the scaled prior
// --- g_sigma (component variances sigma^2 sigma_k^2) with noise variance sigma^2.

/// S_{g_sigma,sigma}(y) = sum_k phi_k mu_k; odd in y, |S(y)| <= |y|.
double shrink(double y, const ScaleMixturePrior& prior, double sigma);

/// Marginal log-likelihood of the scalar normal means model behind `shrink`.
double nm_marginal_loglik(double y, const ScaleMixturePrior& prior, double sigma);

/// Induced penalty evaluated at the shrunken value:
/// rho(S(y)) = -sigma^2 * l_NM(y) - (y - S(y))^2 / 2.
double penalty_at_shrunk(double y, const ScaleMixturePrior& prior, double sigma);

/// Inverse of the (strictly increasing) shrinkage operator, by bracketing and
/// bisection: returns y with |shrink(y) - b_bar| <= tol. Throws
/// std::range_error if b_bar lies outside the operator's range.
double invert_shrink(double b_bar, const ScaleMixturePrior& prior, double sigma,
                     double tol = 1e-10);

}  // namespace mrash::nm

#endif

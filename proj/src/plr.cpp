#include "mrash/plr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "mrash/rng.hpp"

namespace mrash::plr {

namespace {

double soft_threshold(double t, double lambda) {
  if (t > lambda) return t - lambda;
  if (t < -lambda) return t + lambda;
  return 0.0;
}

// Working representation: centered y, columns centered and rescaled to unit
// norm. Coefficients map back as b_j = beta_j / scale_j.
struct Scaled {
  Eigen::MatrixXd X;         // n x p, unit-norm columns (zero columns stay zero)
  Eigen::VectorXd y;         // centered
  Eigen::VectorXd scale;     // column norms after centering (0 for constant columns)
  Eigen::VectorXd x_means;
  double y_mean = 0.0;
};

Scaled make_scaled(const RegressionData& data) {
  Scaled s;
  s.x_means = data.X.colwise().mean();
  s.y_mean = data.y.mean();
  s.X = data.X.rowwise() - s.x_means.transpose();
  s.y = data.y.array() - s.y_mean;
  s.scale.resize(data.n_cols());
  for (int j = 0; j < data.n_cols(); ++j) {
    const double norm = s.X.col(j).norm();
    s.scale[j] = norm;
    if (norm > 0.0) s.X.col(j) /= norm;
  }
  return s;
}

struct CdResult {
  Eigen::VectorXd beta;  // unit-norm scale
  bool converged = false;
  int n_sweeps = 0;
};

// Cyclic coordinate descent on the unit-norm representation, optionally
// recording the penalized objective after each sweep. Between full sweeps the
// solver iterates on the current active set only, which is what makes dense
// lambda paths affordable.
CdResult coordinate_descent(const Scaled& s, const PlrSpec& spec, int max_iter, double tol,
                            Eigen::VectorXd beta, std::vector<double>* objective_trace) {
  const int p = static_cast<int>(s.X.cols());
  Eigen::VectorXd resid = s.y - s.X * beta;
  CdResult result;

  auto record = [&]() {
    if (!objective_trace) return;
    double penalty = 0.0;
    for (int j = 0; j < p; ++j) penalty += penalty_value(beta[j], spec);
    objective_trace->push_back(0.5 * resid.squaredNorm() + penalty);
  };
  auto sweep_over = [&](const std::vector<int>& coords) {
    double max_change = 0.0;
    for (int j : coords) {
      const double t = beta[j] + s.X.col(j).dot(resid);
      const double updated = shrink_plr(t, spec);
      const double change = updated - beta[j];
      if (change != 0.0) {
        resid -= s.X.col(j) * change;
        beta[j] = updated;
        max_change = std::max(max_change, std::abs(change));
      }
    }
    return max_change;
  };

  std::vector<int> all;
  all.reserve(p);
  for (int j = 0; j < p; ++j) {
    if (s.scale[j] > 0.0) all.push_back(j);
  }

  std::vector<int> active;
  while (result.n_sweeps < max_iter) {
    const double full_change = sweep_over(all);
    ++result.n_sweeps;
    record();
    if (full_change < tol) {
      result.converged = true;
      break;
    }
    active.clear();
    for (int j : all) {
      if (beta[j] != 0.0) active.push_back(j);
    }
    while (result.n_sweeps < max_iter) {
      const double active_change = sweep_over(active);
      ++result.n_sweeps;
      record();
      if (active_change < tol) break;
    }
  }
  result.beta = std::move(beta);
  return result;
}

Eigen::VectorXd to_original_scale(const Scaled& s, const Eigen::VectorXd& beta) {
  Eigen::VectorXd coef = Eigen::VectorXd::Zero(beta.size());
  for (int j = 0; j < beta.size(); ++j) {
    if (s.scale[j] > 0.0) coef[j] = beta[j] / s.scale[j];
  }
  return coef;
}

double intercept_for(const Scaled& s, const Eigen::VectorXd& coef) {
  return s.y_mean - s.x_means.dot(coef);
}

RegressionData subset_rows(const RegressionData& data, const std::vector<int>& rows) {
  Eigen::MatrixXd x(rows.size(), data.n_cols());
  Eigen::VectorXd y(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    x.row(static_cast<int>(i)) = data.X.row(rows[i]);
    y[static_cast<int>(i)] = data.y[rows[i]];
  }
  return RegressionData(std::move(x), std::move(y));
}

// Warm-started path on a fixed lambda grid; returns coefficients (original
// scale) and intercepts per lambda. The path stops early once the training
// fit saturates (the small-lambda tail of a p > n path is interpolation and
// converges very slowly); remaining grid points repeat the last solution.
void path_on_grid(const RegressionData& data, Penalty penalty, double eta,
                  const Eigen::VectorXd& lambdas, double tol, Eigen::MatrixXd& coefficients,
                  Eigen::VectorXd& intercepts) {
  const Scaled s = make_scaled(data);
  const int p = data.n_cols();
  const int n_lambda = static_cast<int>(lambdas.size());
  coefficients.resize(p, n_lambda);
  intercepts.resize(n_lambda);
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  const double null_deviance = s.y.squaredNorm();
  double r2_prev = 0.0;
  for (int l = 0; l < n_lambda; ++l) {
    PlrSpec spec{penalty, lambdas[l], eta};
    CdResult cd = coordinate_descent(s, spec, 1000, tol, std::move(beta), nullptr);
    beta = std::move(cd.beta);
    const Eigen::VectorXd coef = to_original_scale(s, beta);
    coefficients.col(l) = coef;
    intercepts[l] = intercept_for(s, coef);

    if (null_deviance > 0.0 && l + 1 < n_lambda) {
      const double r2 = 1.0 - (s.y - s.X * beta).squaredNorm() / null_deviance;
      const bool saturated = r2 > 0.999 || (r2 > 0.5 && r2 - r2_prev < 1e-5);
      r2_prev = r2;
      if (saturated) {
        for (int rest = l + 1; rest < n_lambda; ++rest) {
          coefficients.col(rest) = coefficients.col(l);
          intercepts[rest] = intercepts[l];
        }
        break;
      }
    }
  }
}

std::vector<int> entry_order_from(const Eigen::MatrixXd& coefficients) {
  const int p = static_cast<int>(coefficients.rows());
  const int n_lambda = static_cast<int>(coefficients.cols());
  std::vector<int> first_entry(p, n_lambda);
  for (int j = 0; j < p; ++j) {
    for (int l = 0; l < n_lambda; ++l) {
      if (coefficients(j, l) != 0.0) {
        first_entry[j] = l;
        break;
      }
    }
  }
  std::vector<int> order(p);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return first_entry[a] < first_entry[b]; });
  return order;
}

}  // namespace

Penalty penalty_from_string(const std::string& name) {
  if (name == "ridge") return Penalty::Ridge;
  if (name == "lasso") return Penalty::Lasso;
  if (name == "elastic_net") return Penalty::ElasticNet;
  if (name == "mcp") return Penalty::Mcp;
  if (name == "scad") return Penalty::Scad;
  throw std::invalid_argument("unknown penalty: " + name);
}

std::string to_string(Penalty penalty) {
  switch (penalty) {
    case Penalty::Ridge: return "ridge";
    case Penalty::Lasso: return "lasso";
    case Penalty::ElasticNet: return "elastic_net";
    case Penalty::Mcp: return "mcp";
    case Penalty::Scad: return "scad";
  }
  throw std::invalid_argument("unknown penalty");
}

std::vector<std::vector<int>> cv_folds(int n, int n_folds, std::uint64_t seed) {
  if (n_folds < 2 || n < n_folds) {
    throw std::invalid_argument("cross-validation: need n >= n_folds >= 2");
  }
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  rng::Stream stream(rng::mix64(seed, 0x9d5cu));
  stream.shuffle(order.begin(), order.end());
  std::vector<std::vector<int>> folds(n_folds);
  for (int i = 0; i < n; ++i) folds[i % n_folds].push_back(order[i]);
  return folds;
}

void PlrSpec::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw std::invalid_argument("plr: lambda must be nonnegative");
  }
  switch (penalty) {
    case Penalty::ElasticNet:
      if (!(eta >= 0.0 && eta <= 1.0)) {
        throw std::invalid_argument("elastic net: mixing eta must lie in [0,1]");
      }
      break;
    case Penalty::Mcp:
      if (!(eta > 1.0)) throw std::invalid_argument("mcp: concavity eta must exceed 1");
      break;
    case Penalty::Scad:
      if (!(eta > 2.0)) throw std::invalid_argument("scad: concavity eta must exceed 2");
      break;
    default: break;
  }
}

double shrink_plr(double t, const PlrSpec& spec) {
  spec.validate();
  const double lambda = spec.lambda;
  const double eta = spec.eta;
  switch (spec.penalty) {
    case Penalty::Ridge:
      return t / (1.0 + lambda);
    case Penalty::Lasso:
      return soft_threshold(t, lambda);
    case Penalty::ElasticNet: {
      const double a = 1.0 + (1.0 - eta) * lambda;
      return soft_threshold(t / a, eta * lambda / a);
    }
    case Penalty::Mcp:
      if (std::abs(t) > eta * lambda) return t;
      return soft_threshold(t, lambda) / (1.0 - 1.0 / eta);
    case Penalty::Scad:
      if (std::abs(t) <= 2.0 * lambda) return soft_threshold(t, lambda);
      if (std::abs(t) > eta * lambda) return t;
      return soft_threshold(t, eta * lambda / (eta - 1.0)) / (1.0 - 1.0 / (eta - 1.0));
  }
  throw std::invalid_argument("unknown penalty");
}

double penalty_value(double t, const PlrSpec& spec) {
  const double lambda = spec.lambda;
  const double eta = spec.eta;
  const double at = std::abs(t);
  switch (spec.penalty) {
    case Penalty::Ridge:
      return 0.5 * lambda * t * t;
    case Penalty::Lasso:
      return lambda * at;
    case Penalty::ElasticNet:
      return 0.5 * (1.0 - eta) * lambda * t * t + eta * lambda * at;
    case Penalty::Mcp:
      if (at <= eta * lambda) return lambda * at - t * t / (2.0 * eta);
      return 0.5 * eta * lambda * lambda;
    case Penalty::Scad:
      if (at <= lambda) return lambda * at;
      if (at > eta * lambda) return 0.5 * lambda * lambda * (eta + 1.0);
      return (eta * lambda * at - 0.5 * (t * t + lambda * lambda)) / (eta - 1.0);
  }
  throw std::invalid_argument("unknown penalty");
}

PlrFit fit_plr(const RegressionData& data, const PlrSpec& spec, int max_iter, double tol) {
  data.validate();
  spec.validate();
  if (max_iter < 1) throw std::invalid_argument("fit_plr: max_iter >= 1");
  if (!(tol > 0.0)) throw std::invalid_argument("fit_plr: tol > 0");

  const Scaled s = make_scaled(data);
  PlrFit fit;
  CdResult cd = coordinate_descent(s, spec, max_iter, tol,
                                   Eigen::VectorXd::Zero(data.n_cols()), &fit.objective_trace);
  fit.coefficients = to_original_scale(s, cd.beta);
  fit.intercept = intercept_for(s, fit.coefficients);
  fit.converged = cd.converged;
  fit.n_sweeps = cd.n_sweeps;
  return fit;
}

Eigen::VectorXd default_lambda_grid(const RegressionData& data, Penalty penalty, double eta,
                                    int n_lambda) {
  if (n_lambda < 2) throw std::invalid_argument("lambda grid: need at least two points");
  const Scaled s = make_scaled(data);
  const double corr_max = (s.X.transpose() * s.y).cwiseAbs().maxCoeff();

  double lambda_max = corr_max;
  double decades = 3.0;
  switch (penalty) {
    case Penalty::Lasso:
    case Penalty::Mcp:
    case Penalty::Scad:
      break;
    case Penalty::ElasticNet:
      // the L1 part alone must kill every coordinate at lambda_max
      lambda_max = corr_max / std::max(eta, 1e-3);
      break;
    case Penalty::Ridge:
      // no finite lambda gives an all-zero ridge fit; span a wide bracket
      lambda_max = corr_max * 1e2;
      decades = 6.0;
      break;
  }
  Eigen::VectorXd lambdas(n_lambda);
  for (int l = 0; l < n_lambda; ++l) {
    const double frac = static_cast<double>(l) / (n_lambda - 1);
    lambdas[l] = lambda_max * std::pow(10.0, -decades * frac);
  }
  return lambdas;
}

// Convergence threshold for path fits: coefficient changes below this are
// irrelevant to held-out error. Matches the usual deviance-scaled rule
// (thresh = 1e-7 of the null deviance per unit-norm coordinate step).
double path_tolerance(const RegressionData& data) {
  const double norm = (data.y.array() - data.y.mean()).matrix().norm();
  return std::sqrt(1e-7) * std::max(norm, 1e-12);
}

LassoPath lasso_path(const RegressionData& data, int n_lambda) {
  data.validate();
  LassoPath path;
  path.lambdas = default_lambda_grid(data, Penalty::Lasso, 0.0, n_lambda);
  path_on_grid(data, Penalty::Lasso, 0.0, path.lambdas, path_tolerance(data),
               path.coefficients, path.intercepts);
  path.entry_order = entry_order_from(path.coefficients);
  return path;
}

LassoPath lasso_path_cv(const RegressionData& data, int n_lambda, int n_folds,
                        std::uint64_t seed) {
  LassoPath path = lasso_path(data, n_lambda);
  const auto folds = cv_folds(data.n_rows(), n_folds, seed);

  const int n_grid = static_cast<int>(path.lambdas.size());
  path.cv_errors = Eigen::VectorXd::Zero(n_grid);
  for (const auto& held_out : folds) {
    std::vector<char> in_fold(data.n_rows(), 0);
    for (int i : held_out) in_fold[i] = 1;
    std::vector<int> train_rows;
    train_rows.reserve(data.n_rows() - held_out.size());
    for (int i = 0; i < data.n_rows(); ++i) {
      if (!in_fold[i]) train_rows.push_back(i);
    }
    const RegressionData train = subset_rows(data, train_rows);
    Eigen::MatrixXd coefficients;
    Eigen::VectorXd intercepts;
    path_on_grid(train, Penalty::Lasso, 0.0, path.lambdas, path_tolerance(train),
                 coefficients, intercepts);

    for (int l = 0; l < n_grid; ++l) {
      double sse = 0.0;
      for (int i : held_out) {
        const double pred = intercepts[l] + data.X.row(i).dot(coefficients.col(l));
        const double err = data.y[i] - pred;
        sse += err * err;
      }
      path.cv_errors[l] += sse / static_cast<double>(held_out.size());
    }
  }
  path.cv_errors /= static_cast<double>(folds.size());

  path.lambda_min_index = 0;
  for (int l = 1; l < n_grid; ++l) {
    if (path.cv_errors[l] < path.cv_errors[path.lambda_min_index]) path.lambda_min_index = l;
  }
  path.lambda_min = path.lambdas[path.lambda_min_index];
  return path;
}

Eigen::VectorXd lasso_cv_coefficients(const LassoPath& path) {
  if (path.lambda_min_index < 0) {
    throw std::invalid_argument("lasso path: no cross-validation results");
  }
  return path.coefficients.col(path.lambda_min_index);
}

CvResult cv_fit(const RegressionData& data, Penalty penalty, double eta,
                const Eigen::VectorXd& lambdas, int n_folds, std::uint64_t seed) {
  data.validate();
  const auto folds = cv_folds(data.n_rows(), n_folds, seed);
  const int n_grid = static_cast<int>(lambdas.size());

  CvResult result;
  result.lambdas = lambdas;
  result.cv_errors = Eigen::VectorXd::Zero(n_grid);
  for (const auto& held_out : folds) {
    std::vector<char> in_fold(data.n_rows(), 0);
    for (int i : held_out) in_fold[i] = 1;
    std::vector<int> train_rows;
    for (int i = 0; i < data.n_rows(); ++i) {
      if (!in_fold[i]) train_rows.push_back(i);
    }
    const RegressionData train = subset_rows(data, train_rows);
    Eigen::MatrixXd coefficients;
    Eigen::VectorXd intercepts;
    path_on_grid(train, penalty, eta, lambdas, path_tolerance(train), coefficients,
                 intercepts);
    for (int l = 0; l < n_grid; ++l) {
      double sse = 0.0;
      for (int i : held_out) {
        const double pred = intercepts[l] + data.X.row(i).dot(coefficients.col(l));
        const double err = data.y[i] - pred;
        sse += err * err;
      }
      result.cv_errors[l] += sse / static_cast<double>(held_out.size());
    }
  }
  result.cv_errors /= static_cast<double>(folds.size());

  int best = 0;
  for (int l = 1; l < n_grid; ++l) {
    if (result.cv_errors[l] < result.cv_errors[best]) best = l;
  }
  result.lambda_min = lambdas[best];

  // Refit on the full data, warm-started down the path to lambda_min.
  const Scaled s = make_scaled(data);
  const double tol = path_tolerance(data);
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(data.n_cols());
  for (int l = 0; l <= best; ++l) {
    PlrSpec spec{penalty, lambdas[l], eta};
    CdResult cd = coordinate_descent(s, spec, 1000, tol, std::move(beta), nullptr);
    beta = std::move(cd.beta);
    if (l == best) {
      result.fit.converged = cd.converged;
      result.fit.n_sweeps = cd.n_sweeps;
    }
  }
  result.fit.coefficients = to_original_scale(s, beta);
  result.fit.intercept = intercept_for(s, result.fit.coefficients);
  return result;
}

}  // namespace mrash::plr

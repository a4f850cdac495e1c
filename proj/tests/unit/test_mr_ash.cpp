#include <doctest.h>

#include <Eigen/Dense>
#include <Eigen/QR>
#include <cmath>

#include "mrash/errors.hpp"
#include "mrash/mr_ash.hpp"
#include "mrash/rng.hpp"

using namespace mrash;

namespace {

nm::ScaleMixturePrior prior_of(std::initializer_list<double> vars,
                               std::initializer_list<double> weights) {
  Eigen::VectorXd v(vars.size()), w(weights.size());
  int i = 0;
  for (double x : vars) v[i++] = x;
  i = 0;
  for (double x : weights) w[i++] = x;
  return nm::ScaleMixturePrior(v, w);
}

VebState make_state(const RegressionData& data, const nm::ScaleMixturePrior& prior,
                    double sigma2) {
  const int p = data.n_cols();
  const int k_count = prior.n_components();
  VebState s;
  s.b_bar = Eigen::VectorXd::Zero(p);
  s.resid_bar = data.y;
  s.prior = prior;
  s.sigma2 = sigma2;
  s.phi = prior.weights.transpose().replicate(p, 1);
  s.mu = Eigen::MatrixXd::Zero(p, k_count);
  s.s2 = (sigma2 * prior.variances).transpose().replicate(p, 1);
  s.b_tilde = Eigen::VectorXd::Zero(p);
  return s;
}

Eigen::MatrixXd random_orthonormal(int n, int p, std::uint64_t seed) {
  rng::Stream stream(seed);
  Eigen::MatrixXd gauss(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) gauss(i, j) = stream.normal();
  }
  Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(gauss).householderQ();
  return q.leftCols(p);
}

// Orthonormal columns that are all orthogonal to the ones vector, so they
// pass unchanged through mean centering (p <= n - 1).
Eigen::MatrixXd centered_orthonormal(int n, int p, std::uint64_t seed) {
  rng::Stream stream(seed);
  Eigen::MatrixXd padded(n, n);
  padded.col(0).setOnes();
  for (int i = 0; i < n; ++i) {
    for (int j = 1; j < n; ++j) padded(i, j) = stream.normal();
  }
  Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(padded).householderQ();
  return q.block(0, 1, n, p);
}

RegressionData make_data(int n, int p, std::uint64_t seed, double noise = 1.0) {
  rng::Stream stream(seed);
  Eigen::MatrixXd x(n, p);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) x(i, j) = stream.normal();
  }
  Eigen::VectorXd b = Eigen::VectorXd::Zero(p);
  const int nonzero = std::max(1, p / 5);
  for (int j = 0; j < nonzero; ++j) b[j] = stream.normal();
  Eigen::VectorXd y = x * b;
  for (int i = 0; i < n; ++i) y[i] += noise * stream.normal();
  return RegressionData(std::move(x), std::move(y));
}

// Long-form sigma^2 update evaluated directly from the factor parameters;
// independent of the simplified production formula.
double sigma2_long_form(const VebState& s, const RegressionData& data) {
  const int p = static_cast<int>(s.b_bar.size());
  const int k_count = s.prior.n_components();
  double numerator = s.resid_bar.squaredNorm();
  for (int j = 0; j < p; ++j) {
    const double d = data.column_norms_sq[j];
    for (int k = 0; k < k_count; ++k) {
      const double var_k = s.prior.variances[k];
      if (var_k == 0.0) continue;
      const double mu = s.mu(j, k);
      const double second = mu * mu + s.s2(j, k);
      numerator += s.phi(j, k) * (d + 1.0 / var_k) * second;
    }
    numerator -= d * s.b_bar[j] * s.b_bar[j];
  }
  const double pi1 = s.phi.col(0).mean();
  return numerator / (data.n_rows() + p * (1.0 - pi1));
}

}  // namespace

TEST_CASE("default grid") {
  Eigen::VectorXd grid = default_grid(500, 20);
  CHECK(grid.size() == 20);
  CHECK(grid[0] == 0.0);
  for (int k = 1; k < 20; ++k) CHECK(grid[k] > grid[k - 1]);

  Eigen::VectorXd small = default_grid(4, 2);
  CHECK(small[1] == doctest::Approx(0.6862915010152388).epsilon(1e-13));

  CHECK_THROWS_AS(default_grid(10, 1), std::invalid_argument);
}

TEST_CASE("coordinate update") {
  SUBCASE("orthonormal design: one pass gives the shrinkage of x_j'y") {
    const int n = 8, p = 8;
    Eigen::MatrixXd q = random_orthonormal(n, p, 3);
    rng::Stream stream(4);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) y[i] = 2.0 * stream.normal();
    RegressionData data(q, y);
    auto prior = prior_of({0.0, 0.5, 2.0}, {0.4, 0.3, 0.3});
    VebState state = make_state(data, prior, 1.0);
    for (int j = 0; j < p; ++j) update_coordinate(state, data, j);
    for (int j = 0; j < p; ++j) {
      const double expected = nm::shrink(q.col(j).dot(y), prior, 1.0);
      CHECK(state.b_bar[j] == doctest::Approx(expected).epsilon(1e-10));
    }
  }

  SUBCASE("zero column keeps residuals and gets prior responsibilities") {
    Eigen::MatrixXd x(4, 2);
    x.col(0) << 1, -1, 2, 0.5;
    x.col(1).setZero();
    Eigen::VectorXd y(4);
    y << 1, 2, 3, 4;
    RegressionData data(x, y);
    auto prior = prior_of({0.0, 1.0}, {0.5, 0.5});
    VebState state = make_state(data, prior, 1.0);
    const Eigen::VectorXd resid_before = state.resid_bar;
    update_coordinate(state, data, 1);
    CHECK(state.b_bar[1] == 0.0);
    CHECK((state.resid_bar - resid_before).norm() == 0.0);
    CHECK(state.phi(1, 0) == prior.weights[0]);
    CHECK(state.phi(1, 1) == prior.weights[1]);
  }

  SUBCASE("single coordinate closed form") {
    Eigen::VectorXd x(4);
    x << 0.5, 0.5, 0.5, 0.5;  // unit norm
    Eigen::VectorXd y = 2.0 * x;
    RegressionData data(x, y);
    auto prior = prior_of({1.0}, {1.0});
    VebState state = make_state(data, prior, 1.0);
    update_coordinate(state, data, 0);
    CHECK(state.b_tilde[0] == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(state.b_bar[0] == doctest::Approx(1.0).epsilon(1e-14));
    // already at the fixed point
    update_coordinate(state, data, 0);
    CHECK(state.b_bar[0] == doctest::Approx(1.0).epsilon(1e-14));
  }
}

TEST_CASE("prior weight update is the responsibility mean") {
  RegressionData data(Eigen::MatrixXd::Identity(2, 2), Eigen::VectorXd::Ones(2));
  auto prior = prior_of({0.0, 1.0}, {0.5, 0.5});
  VebState state = make_state(data, prior, 1.0);

  state.phi << 1, 0, 1, 0;
  update_prior_weights(state);
  CHECK(state.prior.weights[0] == 1.0);
  CHECK(state.prior.weights[1] == 0.0);

  state.phi << 1, 0, 0, 1;
  update_prior_weights(state);
  CHECK(state.prior.weights[0] == doctest::Approx(0.5));
  CHECK(state.prior.weights[1] == doctest::Approx(0.5));

  rng::Stream stream(9);
  state.phi(0, 0) = stream.uniform();
  state.phi(0, 1) = 1 - state.phi(0, 0);
  state.phi(1, 0) = stream.uniform();
  state.phi(1, 1) = 1 - state.phi(1, 0);
  update_prior_weights(state);
  CHECK(std::abs(state.prior.weights[0] - state.phi.col(0).mean()) < 1e-12);
}

TEST_CASE("sigma^2 update") {
  SUBCASE("null state reduces to ||y||^2 / n") {
    RegressionData data = make_data(12, 3, 21);
    auto prior = prior_of({0.0, 1.0}, {0.5, 0.5});
    VebState state = make_state(data, prior, 1.0);
    state.phi.col(0).setOnes();
    state.phi.col(1).setZero();
    update_sigma2(state, data);
    CHECK(state.sigma2 == doctest::Approx(data.y.squaredNorm() / 12.0).epsilon(1e-12));
  }

  SUBCASE("matches the long-form update after a fresh pass") {
    rng::Stream stream(33);
    for (int rep = 0; rep < 5; ++rep) {
      RegressionData data = make_data(15, 6, 100 + rep);
      auto prior = prior_of({0.0, 0.3, 1.7}, {0.3, 0.4, 0.3});
      VebState state = make_state(data, prior, 0.5 + stream.uniform());
      for (int sweep = 0; sweep < 2; ++sweep) {
        for (int j = 0; j < 6; ++j) update_coordinate(state, data, j);
      }
      update_prior_weights(state);
      const double expected = sigma2_long_form(state, data);
      update_sigma2(state, data);
      CHECK(state.sigma2 == doctest::Approx(expected).epsilon(1e-10));
    }
  }

  SUBCASE("refuses a grid without the point mass") {
    RegressionData data = make_data(6, 2, 5);
    auto prior = prior_of({0.5, 1.0}, {0.5, 0.5});
    VebState state = make_state(data, prior, 1.0);
    CHECK_THROWS_AS(update_sigma2(state, data), std::logic_error);
  }
}

TEST_CASE("elbo") {
  SUBCASE("null fit has the closed form") {
    RegressionData data = make_data(9, 4, 77);
    auto prior = prior_of({0.0, 1.0}, {1.0, 0.0});
    VebState state = make_state(data, prior, 1.3);
    state.phi.col(0).setOnes();
    state.phi.col(1).setZero();
    const double expected = -0.5 * 9 * std::log(2.0 * M_PI * 1.3) -
                            data.y.squaredNorm() / (2.0 * 1.3);
    CHECK(elbo(state, data) == doctest::Approx(expected).epsilon(1e-12));
  }

  SUBCASE("orthonormal identity after one exact pass") {
    const int n = 5, p = 5;
    Eigen::MatrixXd q = random_orthonormal(n, p, 8);
    rng::Stream stream(13);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) y[i] = 1.5 * stream.normal();
    RegressionData data(q, y);
    auto prior = prior_of({0.0, 0.8, 3.0}, {0.3, 0.3, 0.4});
    const double sigma2 = 0.7;
    VebState state = make_state(data, prior, sigma2);
    for (int j = 0; j < p; ++j) update_coordinate(state, data, j);

    double rhs = -0.5 * (n - p) * std::log(2.0 * M_PI * sigma2) -
                 (y.squaredNorm() - state.b_tilde.squaredNorm()) / (2.0 * sigma2);
    for (int j = 0; j < p; ++j) {
      rhs += nm::nm_marginal_loglik(state.b_tilde[j], prior, std::sqrt(sigma2));
    }
    CHECK(elbo(state, data) == doctest::Approx(rhs).epsilon(1e-10));
  }

  SUBCASE("never decreases across the three update kinds") {
    RegressionData data = make_data(30, 12, 55);
    Eigen::VectorXd grid = default_grid(30, 8);
    VebState state = make_state(data, nm::ScaleMixturePrior::with_uniform_weights(grid), 1.0);
    // make the state self-consistent before tracking the objective
    for (int j = 0; j < 12; ++j) update_coordinate(state, data, j);
    double current = elbo(state, data);
    for (int iter = 0; iter < 8; ++iter) {
      for (int j = 0; j < 12; ++j) update_coordinate(state, data, j);
      double next = elbo(state, data);
      CHECK(next >= current - 1e-8);
      current = next;

      update_prior_weights(state);
      next = elbo(state, data);
      CHECK(next >= current - 1e-8);
      current = next;

      update_sigma2(state, data);
      next = elbo(state, data);
      CHECK(next >= current - 1e-8);
      current = next;
    }
  }
}

TEST_CASE("fit") {
  SUBCASE("all-zero response stays at the null solution") {
    Eigen::MatrixXd x = make_data(10, 3, 2).X;
    RegressionData data(x, Eigen::VectorXd::Zero(10));
    FitOptions options;
    options.init = InitMode::Null;
    options.max_outer = 5000;  // the weight walk on degenerate data is slow
    VebFit result = fit(data, options);
    CHECK(result.converged);
    CHECK(result.b_bar.cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("orthogonal design reproduces the normal-means EM fit") {
    const int n = 13, p = 12;
    Eigen::MatrixXd q = centered_orthonormal(n, p, 19);
    rng::Stream stream(20);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(p);
    for (int j = 0; j < 4; ++j) b[j] = 3.0 * stream.normal();
    Eigen::VectorXd y = q * b;
    for (int i = 0; i < n; ++i) y[i] += 0.7 * stream.normal();
    RegressionData data(q, y);

    const double sigma2 = 1.0;
    FitOptions options;
    options.grid = default_grid(n, 8);
    options.init = InitMode::Null;
    options.fix_sigma2 = true;
    options.sigma2_init = sigma2;
    options.tol = 1e-10;
    options.max_outer = 20000;
    VebFitDetail detail = fit_detailed(data, options);

    nm::NormalMeansProblem problem;
    problem.observations = detail.centered.X.transpose() * detail.centered.y;
    problem.obs_variances = Eigen::VectorXd::Constant(p, sigma2);
    nm::ScaleMixturePrior init_prior =
        nm::ScaleMixturePrior::with_uniform_weights(sigma2 * options.grid);
    auto em = nm::fit_mixture_weights(problem, init_prior,
                                      {20000, 8 * 1e-10});

    CHECK((detail.fit.prior.weights - em.prior.weights).cwiseAbs().maxCoeff() < 1e-6);

    nm::NMPosterior exact = nm::posterior(problem, em.prior);
    CHECK((detail.state.phi - exact.responsibilities).cwiseAbs().maxCoeff() < 1e-6);
    CHECK((detail.state.mu - exact.component_means).cwiseAbs().maxCoeff() < 1e-6);
    CHECK((detail.state.s2 - exact.component_vars).cwiseAbs().maxCoeff() < 1e-6);
    CHECK((detail.state.b_bar - exact.means).cwiseAbs().maxCoeff() < 1e-6);
  }

  SUBCASE("fixed normal prior and fixed sigma^2 solve ridge regression") {
    for (std::uint64_t seed : {101, 102, 103}) {
      RegressionData raw = make_data(60, 40, seed);
      // center up front so the dense oracle sees the same matrices
      auto centered = raw.center();
      const RegressionData& data = centered.data;

      FitOptions options;
      options.grid = Eigen::VectorXd::Constant(1, 1.0);
      options.init = InitMode::Null;
      options.fix_prior = true;
      options.fix_sigma2 = true;
      options.sigma2_init = 0.8;
      options.tol = 1e-10;
      options.max_outer = 5000;
      VebFit result = fit(data, options);

      Eigen::MatrixXd gram = data.X.transpose() * data.X;
      gram.diagonal().array() += 1.0;
      Eigen::VectorXd oracle = gram.ldlt().solve(data.X.transpose() * data.y);
      CHECK((result.b_bar - oracle).norm() / oracle.norm() < 1e-6);
    }
  }

  SUBCASE("elbo trace is monotone over random fits") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      RegressionData data = make_data(40, 60, 200 + seed);
      FitOptions options;
      options.seed = seed;
      VebFit result = fit(data, options);
      REQUIRE(!result.elbo_trace.empty());
      for (std::size_t t = 1; t < result.elbo_trace.size(); ++t) {
        CHECK(result.elbo_trace[t] >= result.elbo_trace[t - 1] - 1e-8);
      }
    }
  }

  SUBCASE("residual cache stays consistent") {
    RegressionData data = make_data(50, 30, 301);
    VebFitDetail detail = fit_detailed(data);
    const Eigen::VectorXd recomputed =
        detail.centered.y - detail.centered.X * detail.state.b_bar;
    CHECK((detail.state.resid_bar - recomputed).norm() <= 1e-8 * (1.0 + data.y.norm()));
  }

  SUBCASE("prediction is scale equivariant") {
    RegressionData data = make_data(40, 25, 404);
    const double c = 3.7;
    RegressionData scaled_data(data.X, c * data.y);
    FitOptions options;
    options.seed = 7;
    VebFit base = fit(data, options);
    VebFit scaled = fit(scaled_data, options);
    CHECK((scaled.b_bar - c * base.b_bar).cwiseAbs().maxCoeff() <
          1e-6 * std::max(1.0, c * base.b_bar.cwiseAbs().maxCoeff()));
    Eigen::VectorXd pred_base = predict(base, data.X);
    Eigen::VectorXd pred_scaled = predict(scaled, data.X);
    CHECK((pred_scaled - c * pred_base).cwiseAbs().maxCoeff() < 1e-6 * c);
  }

  SUBCASE("duplicate columns predict like the single column") {
    rng::Stream stream(71);
    const int n = 200;
    Eigen::VectorXd x(n), noise(n);
    for (int i = 0; i < n; ++i) {
      x[i] = stream.normal();
      noise[i] = 0.05 * stream.normal();
    }
    Eigen::VectorXd y = 2.0 * x + noise;

    RegressionData single(x, y);
    Eigen::MatrixXd duplicated(n, 2);
    duplicated.col(0) = x;
    duplicated.col(1) = x;
    RegressionData doubled(duplicated, y);

    FitOptions options;
    options.init = InitMode::Null;
    options.grid = default_grid(n, 10);
    VebFit fit_single = fit(single, options);
    VebFit fit_double = fit(doubled, options);
    CHECK(std::abs(fit_double.b_bar.sum() - fit_single.b_bar[0]) < 1e-4);
  }
}

TEST_CASE("predict") {
  SUBCASE("training rows match the fitted values") {
    RegressionData data = make_data(30, 10, 500);
    VebFitDetail detail = fit_detailed(data);
    const Eigen::VectorXd pred = predict(detail.fit, data.X);
    const Eigen::VectorXd fitted =
        (detail.centered.y - detail.state.resid_bar).array() + detail.y_mean;
    CHECK((pred - fitted).cwiseAbs().maxCoeff() < 1e-10);
  }

  SUBCASE("zero coefficients predict the intercept") {
    VebFit fit;
    fit.b_bar = Eigen::VectorXd::Zero(3);
    fit.intercept = 4.2;
    Eigen::MatrixXd x = Eigen::MatrixXd::Random(5, 3);
    const Eigen::VectorXd pred = predict(fit, x);
    for (int i = 0; i < 5; ++i) CHECK(pred[i] == 4.2);
  }

  SUBCASE("column mismatch is a shape error") {
    VebFit fit;
    fit.b_bar = Eigen::VectorXd::Zero(3);
    CHECK_THROWS_AS(predict(fit, Eigen::MatrixXd::Zero(2, 4)), ShapeError);
  }

  SUBCASE("duplicate rows get identical predictions") {
    RegressionData data = make_data(20, 4, 600);
    VebFit result = fit(data);
    Eigen::MatrixXd x_new(2, 4);
    x_new.row(0) = data.X.row(3);
    x_new.row(1) = data.X.row(3);
    const Eigen::VectorXd pred = predict(result, x_new);
    CHECK(pred[0] == pred[1]);
  }
}

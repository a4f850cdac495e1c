// Python bindings for the core operations.
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "mrash/mr_ash.hpp"
#include "mrash/normal_means.hpp"
#include "mrash/plr.hpp"
#include "mrash/simlab.hpp"

namespace py = pybind11;
using namespace mrash;

namespace {

nm::ScaleMixturePrior make_prior(const Eigen::VectorXd& variances,
                                 const Eigen::VectorXd& weights) {
  if (weights.size() == 0) return nm::ScaleMixturePrior::with_uniform_weights(variances);
  return nm::ScaleMixturePrior(variances, weights);
}

FitOptions make_options(const Eigen::VectorXd& grid, int grid_k, const std::string& init,
                        const Eigen::VectorXd& init_b, const std::string& order, int max_outer,
                        double tol, bool fix_prior, const Eigen::VectorXd& fixed_weights,
                        bool fix_sigma2, double sigma2_init, int cv_folds,
                        std::uint64_t seed) {
  FitOptions options;
  options.grid = grid;
  options.grid_k = grid_k;
  if (init == "null") options.init = InitMode::Null;
  else if (init == "lasso") options.init = InitMode::Lasso;
  else if (init == "provided") options.init = InitMode::Provided;
  else throw std::invalid_argument("init must be null | lasso | provided");
  options.init_b = init_b;
  if (order == "natural") options.order = CoordinateOrder::Natural;
  else if (order == "random") options.order = CoordinateOrder::Random;
  else if (order == "lasso-path") options.order = CoordinateOrder::LassoPath;
  else throw std::invalid_argument("order must be natural | random | lasso-path");
  options.max_outer = max_outer;
  options.tol = tol;
  options.fix_prior = fix_prior;
  options.fixed_weights = fixed_weights;
  options.fix_sigma2 = fix_sigma2;
  options.sigma2_init = sigma2_init;
  options.cv_folds = cv_folds;
  options.seed = seed;
  return options;
}

}  // namespace

PYBIND11_MODULE(mrash, m) {
  m.doc() = "Variational empirical Bayes multiple regression with adaptive shrinkage priors";

  py::class_<nm::ScaleMixturePrior>(m, "ScaleMixturePrior")
      .def(py::init(&make_prior), py::arg("variances"),
           py::arg("weights") = Eigen::VectorXd())
      .def_readonly("variances", &nm::ScaleMixturePrior::variances)
      .def_readonly("weights", &nm::ScaleMixturePrior::weights);

  m.def("default_grid", &default_grid, py::arg("n"), py::arg("k") = 20);

  m.def(
      "component_loglik",
      [](double y, double s2, const nm::ScaleMixturePrior& prior) {
        return nm::component_loglik(y, s2, prior);
      },
      py::arg("y"), py::arg("s2"), py::arg("prior"));
  m.def(
      "responsibilities",
      [](double y, double s2, const nm::ScaleMixturePrior& prior) {
        return nm::responsibilities(y, s2, prior);
      },
      py::arg("y"), py::arg("s2"), py::arg("prior"));
  m.def("shrink", &nm::shrink, py::arg("y"), py::arg("prior"), py::arg("sigma") = 1.0);
  m.def("nm_marginal_loglik", &nm::nm_marginal_loglik, py::arg("y"), py::arg("prior"),
        py::arg("sigma") = 1.0);
  m.def("penalty_at_shrunk", &nm::penalty_at_shrunk, py::arg("y"), py::arg("prior"),
        py::arg("sigma") = 1.0);
  m.def("invert_shrink", &nm::invert_shrink, py::arg("b_bar"), py::arg("prior"),
        py::arg("sigma") = 1.0, py::arg("tol") = 1e-10);

  py::class_<VebFit>(m, "VebFit")
      .def_readonly("b_bar", &VebFit::b_bar)
      .def_readonly("sigma2", &VebFit::sigma2)
      .def_readonly("intercept", &VebFit::intercept)
      .def_readonly("elbo_trace", &VebFit::elbo_trace)
      .def_readonly("n_outer_iters", &VebFit::n_outer_iters)
      .def_readonly("converged", &VebFit::converged)
      .def_readonly("grid_warning", &VebFit::grid_warning)
      .def_property_readonly("grid", [](const VebFit& f) { return f.prior.variances; })
      .def_property_readonly("pi", [](const VebFit& f) { return f.prior.weights; })
      .def("predict",
           [](const VebFit& f, const Eigen::MatrixXd& x) { return predict(f, x); },
           py::arg("X"));

  m.def(
      "fit",
      [](const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& grid,
         int grid_k, const std::string& init, const Eigen::VectorXd& init_b,
         const std::string& order, int max_outer, double tol, bool fix_prior,
         const Eigen::VectorXd& fixed_weights, bool fix_sigma2, double sigma2_init,
         int cv_folds, std::uint64_t seed) {
        RegressionData data(x, y);
        return fit(data, make_options(grid, grid_k, init, init_b, order, max_outer, tol,
                                      fix_prior, fixed_weights, fix_sigma2, sigma2_init,
                                      cv_folds, seed));
      },
      py::arg("X"), py::arg("y"), py::kw_only(), py::arg("grid") = Eigen::VectorXd(),
      py::arg("grid_k") = 20, py::arg("init") = "lasso",
      py::arg("init_b") = Eigen::VectorXd(), py::arg("order") = "natural",
      py::arg("max_outer") = 1000, py::arg("tol") = 1e-8, py::arg("fix_prior") = false,
      py::arg("fixed_weights") = Eigen::VectorXd(), py::arg("fix_sigma2") = false,
      py::arg("sigma2_init") = -1.0, py::arg("cv_folds") = 10, py::arg("seed") = 1);

  py::class_<plr::PlrFit>(m, "PlrFit")
      .def_readonly("coefficients", &plr::PlrFit::coefficients)
      .def_readonly("intercept", &plr::PlrFit::intercept)
      .def_readonly("converged", &plr::PlrFit::converged)
      .def_readonly("n_sweeps", &plr::PlrFit::n_sweeps);

  m.def(
      "shrink_plr",
      [](double t, const std::string& penalty, double lam, double eta) {
        return plr::shrink_plr(t, {plr::penalty_from_string(penalty), lam, eta});
      },
      py::arg("t"), py::arg("penalty"), py::arg("lam"), py::arg("eta") = 0.0);
  m.def(
      "fit_plr",
      [](const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const std::string& penalty,
         double lam, double eta, int max_iter, double tol) {
        RegressionData data(x, y);
        return plr::fit_plr(data, {plr::penalty_from_string(penalty), lam, eta}, max_iter, tol);
      },
      py::arg("X"), py::arg("y"), py::arg("penalty"), py::arg("lam"), py::arg("eta") = 0.0,
      py::arg("max_iter") = 10000, py::arg("tol") = 1e-8);
  m.def(
      "lasso_cv",
      [](const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int n_lambda, int n_folds,
         std::uint64_t seed) {
        RegressionData data(x, y);
        auto path = plr::lasso_path_cv(data, n_lambda, n_folds, seed);
        py::dict out;
        out["lambdas"] = path.lambdas;
        out["cv_errors"] = path.cv_errors;
        out["lambda_min"] = path.lambda_min;
        out["coefficients"] = Eigen::VectorXd(plr::lasso_cv_coefficients(path));
        out["intercept"] = path.intercepts[path.lambda_min_index];
        out["entry_order"] = path.entry_order;
        return out;
      },
      py::arg("X"), py::arg("y"), py::arg("n_lambda") = 100, py::arg("n_folds") = 10,
      py::arg("seed") = 1);

  py::class_<sim::SimData>(m, "SimData")
      .def_property_readonly("X_train", [](const sim::SimData& d) { return d.train.X; })
      .def_property_readonly("y_train", [](const sim::SimData& d) { return d.train.y; })
      .def_property_readonly("X_test", [](const sim::SimData& d) { return d.test.X; })
      .def_property_readonly("y_test", [](const sim::SimData& d) { return d.test.y; })
      .def_readonly("true_b", &sim::SimData::true_b)
      .def_readonly("support", &sim::SimData::support)
      .def_readonly("sigma2_true", &sim::SimData::sigma2_true);

  m.def(
      "simulate",
      [](int n, int p, int s, const std::string& design, double rho,
         const std::string& signal_dist, int signal_df, const std::string& noise_dist,
         int noise_df, double pve, std::uint64_t seed, std::uint64_t replicate) {
        sim::SimScenario scn;
        scn.n = n;
        scn.p = p;
        scn.s = s;
        if (design == "iid_normal") scn.design = sim::DesignType::IidNormal;
        else if (design == "equicorrelated") scn.design = sim::DesignType::Equicorrelated;
        else throw std::invalid_argument("design must be iid_normal | equicorrelated");
        scn.rho = rho;
        if (signal_dist == "normal") scn.signal = sim::SignalDist::Normal;
        else if (signal_dist == "uniform") scn.signal = sim::SignalDist::Uniform;
        else if (signal_dist == "laplace") scn.signal = sim::SignalDist::Laplace;
        else if (signal_dist == "t") scn.signal = sim::SignalDist::StudentT;
        else if (signal_dist == "point_mass") scn.signal = sim::SignalDist::PointMass;
        else throw std::invalid_argument("unknown signal_dist");
        scn.signal_df = signal_df;
        if (noise_dist == "normal") scn.noise = sim::NoiseDist::Normal;
        else if (noise_dist == "uniform") scn.noise = sim::NoiseDist::Uniform;
        else if (noise_dist == "laplace") scn.noise = sim::NoiseDist::Laplace;
        else if (noise_dist == "t") scn.noise = sim::NoiseDist::StudentT;
        else throw std::invalid_argument("unknown noise_dist");
        scn.noise_df = noise_df;
        scn.pve = pve;
        scn.seed = seed;
        return sim::generate(scn, replicate);
      },
      py::arg("n"), py::arg("p"), py::arg("s"), py::kw_only(),
      py::arg("design") = "iid_normal", py::arg("rho") = 0.0,
      py::arg("signal_dist") = "normal", py::arg("signal_df") = 2,
      py::arg("noise_dist") = "normal", py::arg("noise_df") = 4, py::arg("pve") = 0.5,
      py::arg("seed") = 1, py::arg("replicate") = 0);

  m.def("rmse", &sim::rmse, py::arg("y_test"), py::arg("X_test"), py::arg("b_hat"),
        py::arg("intercept") = 0.0);
  m.def("rmse_scaled", &sim::rmse_scaled, py::arg("y_test"), py::arg("X_test"),
        py::arg("b_hat"), py::arg("intercept"), py::arg("sigma2_true"), py::arg("pve"));
}

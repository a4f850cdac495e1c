#ifndef MRASH_REGRESSION_DATA_HPP
#define MRASH_REGRESSION_DATA_HPP

#include <Eigen/Core>
#include <stdexcept>

namespace mrash {

/// Design matrix plus response, with cached column norms d_j = x_j' x_j.
struct RegressionData {
  Eigen::MatrixXd X;                 // n x p
  Eigen::VectorXd y;                 // n
  Eigen::VectorXd column_norms_sq;   // p
  bool centered = false;

  RegressionData() = default;
  RegressionData(Eigen::MatrixXd design, Eigen::VectorXd response)
      : X(std::move(design)), y(std::move(response)) {
    validate();
    column_norms_sq = X.colwise().squaredNorm();
  }

  int n_rows() const { return static_cast<int>(X.rows()); }
  int n_cols() const { return static_cast<int>(X.cols()); }

  void validate() const {
    if (X.rows() < 1 || X.cols() < 1) {
      throw std::invalid_argument("regression data: empty design matrix");
    }
    if (X.rows() != y.size()) {
      throw std::invalid_argument("regression data: X rows and y length differ");
    }
    if (!X.allFinite() || !y.allFinite()) {
      throw std::invalid_argument("regression data: non-finite values");
    }
  }

  struct Centered;
  Centered center() const;
};

/// Mean-centered copy (y and every column of X), with the removed means.
struct RegressionData::Centered {
  RegressionData data;
  Eigen::VectorXd x_means;
  double y_mean = 0.0;
};

inline RegressionData::Centered RegressionData::center() const {
  Centered out;
  out.x_means = X.colwise().mean();
  out.y_mean = y.mean();
  out.data.X = X.rowwise() - out.x_means.transpose();
  out.data.y = y.array() - out.y_mean;
  out.data.column_norms_sq = out.data.X.colwise().squaredNorm();
  out.data.centered = true;
  return out;
}

}  // namespace mrash

#endif

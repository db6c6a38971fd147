#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "stratdesign/table.hpp"

namespace stratdesign {

/// Design matrix: one row per unit, one column per coefficient.
struct ModelMatrix {
  Eigen::MatrixXd values;
  std::vector<std::string> names;
};

struct LogisticFit {
  Eigen::VectorXd coefficients;
  Eigen::VectorXd fitted;
  /// response residuals y - p
  Eigen::VectorXd residuals;
  int iterations = 0;
};

/// One column per coefficient, one row per unit.
struct InfluenceTable {
  Eigen::MatrixXd values;
  std::vector<std::string> names;

  Eigen::VectorXd column(std::string_view name) const;
};

/// Builds a model matrix from table columns. Numeric columns enter as-is;
/// text columns are dummy coded against their bytewise-first level, with
/// columns named `<var><level>`. Rows with any missing value are rejected.
ModelMatrix model_matrix(const Table& table, const std::vector<std::string>& covariates,
                         bool intercept = true);

/// Maximum-likelihood logistic regression by iteratively reweighted least
/// squares. Stops when max |delta beta| < 1e-10, or fails after 50 steps.
LogisticFit fit_logistic(const ModelMatrix& x, const Eigen::VectorXd& y);

/// (X' W X) / n with W = diag(p (1 - p)).
Eigen::MatrixXd fisher_information(const ModelMatrix& x, const Eigen::VectorXd& fitted);

/// Row i is (x_i r_i) I^-1.
InfluenceTable influence_functions(const ModelMatrix& x, const Eigen::VectorXd& residuals,
                                   const Eigen::MatrixXd& information);

/// Fits y on the covariates and appends the influence column of `coefficient`
/// to the table under `column_name`. This is the table-level pipeline behind
/// influence-targeted allocation.
Table add_influence_column(const Table& table, std::string_view outcome,
                           const std::vector<std::string>& covariates,
                           std::string_view coefficient, std::string_view column_name,
                           bool intercept = true);

}  // namespace stratdesign

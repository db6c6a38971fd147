#include "stratdesign/influence.hpp"

#include <cmath>
#include <set>

#include "stratdesign/error.hpp"

namespace stratdesign {

namespace {

constexpr int kMaxIterations = 50;
constexpr double kStepTolerance = 1e-10;

Eigen::VectorXd logistic(const Eigen::VectorXd& eta) {
  return eta.unaryExpr([](double e) {
    return e >= 0 ? 1.0 / (1.0 + std::exp(-e)) : std::exp(e) / (1.0 + std::exp(e));
  });
}

}  // namespace

Eigen::VectorXd InfluenceTable::column(std::string_view name) const {
  for (std::size_t j = 0; j < names.size(); ++j) {
    if (names[j] == name) return values.col(static_cast<Eigen::Index>(j));
  }
  throw Error(ErrorKind::ColumnNotFound, "no coefficient named '" + std::string(name) + "'");
}

ModelMatrix model_matrix(const Table& table, const std::vector<std::string>& covariates,
                         bool intercept) {
  const auto n = static_cast<Eigen::Index>(table.row_count());
  std::vector<Eigen::VectorXd> cols;
  ModelMatrix m;
  if (intercept) {
    cols.push_back(Eigen::VectorXd::Ones(n));
    m.names.emplace_back("(Intercept)");
  }
  for (const auto& var : covariates) {
    const auto& column = table.column(var);
    for (std::size_t r = 0; r < column.cells.size(); ++r) {
      if (is_missing(column.cells[r])) {
        throw Error(ErrorKind::MissingValues,
                    "covariate '" + var + "' is missing at row " + std::to_string(r + 1));
      }
    }
    if (infer_type(column) != ColumnType::Text) {
      const auto values = numeric_column(table, var);
      Eigen::VectorXd v(n);
      for (Eigen::Index i = 0; i < n; ++i) v[i] = *values[static_cast<std::size_t>(i)];
      cols.push_back(std::move(v));
      m.names.push_back(var);
      continue;
    }
    const auto levels = text_column(table, var);
    const std::set<std::string> distinct(levels.begin(), levels.end());
    for (auto it = std::next(distinct.begin()); it != distinct.end(); ++it) {
      Eigen::VectorXd v(n);
      for (Eigen::Index i = 0; i < n; ++i) v[i] = levels[static_cast<std::size_t>(i)] == *it ? 1.0 : 0.0;
      cols.push_back(std::move(v));
      m.names.push_back(var + *it);
    }
  }
  m.values.resize(n, static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) m.values.col(static_cast<Eigen::Index>(j)) = cols[j];
  return m;
}

LogisticFit fit_logistic(const ModelMatrix& x, const Eigen::VectorXd& y) {
  const auto& X = x.values;
  if (y.size() != X.rows()) throw Error(ErrorKind::ShapeMismatch, "outcome length differs from X rows");
  if (X.rows() == 0 || X.cols() == 0) throw Error(ErrorKind::EmptyInput, "empty model matrix");
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (y[i] != 0.0 && y[i] != 1.0) throw Error(ErrorKind::InvalidArgument, "outcome must be 0/1");
  }
  if (y.minCoeff() == y.maxCoeff()) {
    throw Error(ErrorKind::FitDiverged, "outcome is constant; no finite maximum-likelihood estimate");
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  if (qr.rank() < X.cols()) throw Error(ErrorKind::FitDiverged, "model matrix is rank deficient");

  LogisticFit fit;
  fit.coefficients = Eigen::VectorXd::Zero(X.cols());
  for (int it = 1; it <= kMaxIterations; ++it) {
    const Eigen::VectorXd p = logistic(X * fit.coefficients);
    const Eigen::VectorXd w = p.array() * (1.0 - p.array());
    const Eigen::MatrixXd h = X.transpose() * w.asDiagonal() * X;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(h);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
      throw Error(ErrorKind::FitDiverged, "weighted normal equations became singular");
    }
    const Eigen::VectorXd step = ldlt.solve(X.transpose() * (y - p));
    if (!step.allFinite()) throw Error(ErrorKind::FitDiverged, "IRLS step is not finite");
    fit.coefficients += step;
    if (step.cwiseAbs().maxCoeff() < kStepTolerance) {
      fit.iterations = it;
      fit.fitted = logistic(X * fit.coefficients);
      fit.residuals = y - fit.fitted;
      if (fit.fitted.minCoeff() <= 0.0 || fit.fitted.maxCoeff() >= 1.0) {
        throw Error(ErrorKind::FitDiverged, "fitted probabilities reached 0 or 1 (separation)");
      }
      return fit;
    }
  }
  throw Error(ErrorKind::FitDiverged, "IRLS did not converge in 50 iterations (separation?)");
}

Eigen::MatrixXd fisher_information(const ModelMatrix& x, const Eigen::VectorXd& fitted) {
  const auto& X = x.values;
  if (fitted.size() != X.rows()) throw Error(ErrorKind::ShapeMismatch, "fitted length differs from X rows");
  if (X.rows() == 0) throw Error(ErrorKind::EmptyInput, "empty model matrix");
  for (Eigen::Index i = 0; i < fitted.size(); ++i) {
    if (!(fitted[i] > 0.0 && fitted[i] < 1.0)) {
      throw Error(ErrorKind::InvalidArgument, "fitted values must lie in (0, 1)");
    }
  }
  const Eigen::VectorXd w = fitted.array() * (1.0 - fitted.array());
  Eigen::MatrixXd info = X.transpose() * w.asDiagonal() * X / static_cast<double>(X.rows());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(info, Eigen::EigenvaluesOnly);
  const auto& ev = eig.eigenvalues();
  if (ev.minCoeff() <= 1e-12 * std::max(1.0, ev.maxCoeff())) {
    throw Error(ErrorKind::SingularInformation, "Fisher information is not positive definite");
  }
  return info;
}

InfluenceTable influence_functions(const ModelMatrix& x, const Eigen::VectorXd& residuals,
                                   const Eigen::MatrixXd& information) {
  const auto& X = x.values;
  if (residuals.size() != X.rows() || information.rows() != X.cols() ||
      information.cols() != X.cols()) {
    throw Error(ErrorKind::ShapeMismatch, "influence inputs have inconsistent dimensions");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(information);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorKind::SingularInformation, "information matrix is not positive definite");
  }
  const Eigen::MatrixXd scores = X.array().colwise() * residuals.array();
  InfluenceTable table;
  table.values = llt.solve(scores.transpose()).transpose();
  table.names = x.names;
  return table;
}

Table add_influence_column(const Table& table, std::string_view outcome,
                           const std::vector<std::string>& covariates,
                           std::string_view coefficient, std::string_view column_name,
                           bool intercept) {
  const auto m = model_matrix(table, covariates, intercept);
  const auto ys = numeric_column(table, outcome);
  Eigen::VectorXd y(static_cast<Eigen::Index>(ys.size()));
  for (std::size_t i = 0; i < ys.size(); ++i) {
    if (!ys[i]) {
      throw Error(ErrorKind::MissingValues,
                  "outcome '" + std::string(outcome) + "' is missing at row " + std::to_string(i + 1));
    }
    y[static_cast<Eigen::Index>(i)] = *ys[i];
  }
  const auto fit = fit_logistic(m, y);
  const auto info = fisher_information(m, fit.fitted);
  const auto inf = influence_functions(m, fit.residuals, info);
  const auto values = inf.column(coefficient);

  Column column{std::string(column_name), {}};
  column.cells.reserve(static_cast<std::size_t>(values.size()));
  for (Eigen::Index i = 0; i < values.size(); ++i) column.cells.emplace_back(values[i]);
  Table result = table;
  result.set_column(std::move(column));
  return result;
}

}  // namespace stratdesign

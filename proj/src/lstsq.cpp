#include <cmath>

#include "fgsc/solvers.hpp"

namespace fgsc {

namespace {

double squared_residual(const LeastSquaresProblem& p, const Eigen::VectorXd& x) {
  return (p.A * x - p.b).squaredNorm();
}

double soft_threshold(double value, double threshold) {
  if (value > threshold) return value - threshold;
  if (value < -threshold) return value + threshold;
  return 0.0;
}

}  // namespace

Eigen::Index numerical_rank(const Eigen::MatrixXd& A) {
  if (A.size() == 0) return 0;
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(A);
  return cod.rank();
}

SolverResult solve_min_norm(const LeastSquaresProblem& problem) {
  SolverResult result;
  if (problem.A.cols() == 0) {
    result.x = Eigen::VectorXd();
    result.objective = problem.b.squaredNorm();
    return result;
  }
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(problem.A);
  result.x = cod.solve(problem.b);
  result.objective = squared_residual(problem, result.x);
  result.objective_trace.push_back(result.objective);
  result.iterations = 1;
  return result;
}

SolverResult solve_ridge(const LeastSquaresProblem& problem, double lambda) {
  if (lambda == 0.0) return solve_min_norm(problem);
  const auto n = problem.A.cols();
  Eigen::MatrixXd normal = problem.A.transpose() * problem.A;
  normal.diagonal().array() += lambda;
  SolverResult result;
  result.x = normal.ldlt().solve(problem.A.transpose() * problem.b);
  if (n == 0) result.x = Eigen::VectorXd();
  result.objective =
      squared_residual(problem, result.x) + lambda * result.x.squaredNorm();
  result.objective_trace.push_back(result.objective);
  result.iterations = 1;
  return result;
}

SolverResult solve_elastic_net(const LeastSquaresProblem& problem, double l1,
                               double l2, const IterationControl& control) {
  const auto n = problem.A.cols();
  SolverResult result;
  result.x = Eigen::VectorXd::Zero(n);
  auto objective = [&](const Eigen::VectorXd& x, const Eigen::VectorXd& r) {
    return r.squaredNorm() + l1 * x.lpNorm<1>() + l2 * x.squaredNorm();
  };
  const Eigen::VectorXd col_sq = problem.A.colwise().squaredNorm();
  Eigen::VectorXd residual = problem.b;
  double current = objective(result.x, residual);
  const double floor = 1e-30 * problem.b.squaredNorm();
  result.converged = false;
  for (int it = 1; it <= control.max_iterations; ++it) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double denom = col_sq(j) + l2;
      if (!(denom > 0.0)) continue;
      const double old = result.x(j);
      const double rho = problem.A.col(j).dot(residual) + col_sq(j) * old;
      const double updated = soft_threshold(rho, 0.5 * l1) / denom;
      if (updated != old) {
        residual -= problem.A.col(j) * (updated - old);
        result.x(j) = updated;
      }
    }
    // Recompute the residual now and then to keep drift out of the trace.
    if (it % 64 == 0) residual = problem.b - problem.A * result.x;
    const double next = objective(result.x, residual);
    result.objective_trace.push_back(next);
    result.iterations = it;
    const double decrease = current - next;
    current = next;
    if (decrease <= control.tolerance * std::abs(current + decrease) ||
        current <= floor) {
      result.converged = true;
      break;
    }
  }
  residual = problem.b - problem.A * result.x;
  result.objective = objective(result.x, residual);
  return result;
}

}  // namespace fgsc

#pragma once

#include <vector>

#include <Eigen/Dense>

namespace fgsc {

/// min_x ||A x - b||^2 (+ penalty)
struct LeastSquaresProblem {
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
};

struct SolverResult {
  Eigen::VectorXd x;
  double objective = 0.0;  // squared residual + penalty
  bool converged = true;
  int iterations = 0;
  std::vector<double> objective_trace;  // one entry per iteration
};

struct IterationControl {
  int max_iterations = 10000;
  double tolerance = 1e-10;  // relative objective decrease
};

/// Minimum-norm least-squares solution (rank-revealing complete orthogonal
/// decomposition). Closed form, always converged.
SolverResult solve_min_norm(const LeastSquaresProblem& problem);

/// Numerical rank of A used by solve_min_norm.
Eigen::Index numerical_rank(const Eigen::MatrixXd& A);

/// Tikhonov: ||Ax-b||^2 + lambda ||x||^2. lambda == 0 falls back to the
/// minimum-norm solution.
SolverResult solve_ridge(const LeastSquaresProblem& problem, double lambda);

/// ||Ax-b||^2 + l1 ||x||_1 + l2 ||x||^2 by cyclic coordinate descent,
/// starting from zero.
SolverResult solve_elastic_net(const LeastSquaresProblem& problem, double l1,
                               double l2, const IterationControl& control);

/// Euclidean projection onto {x >= 0, sum x = 1}.
Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& v);

/// ||Ax-b||^2 over the probability simplex by projected gradient with
/// backtracking, plus an exact solve on the active support once it settles.
SolverResult solve_simplex(const LeastSquaresProblem& problem,
                           const IterationControl& control);

}  // namespace fgsc

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "fgsc/solvers.hpp"

namespace fgsc {

Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& v) {
  const auto n = v.size();
  if (n == 0) return v;
  std::vector<double> sorted(v.data(), v.data() + n);
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double cumulative = 0.0;
  double theta = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    cumulative += sorted[static_cast<std::size_t>(k)];
    const double candidate = (cumulative - 1.0) / static_cast<double>(k + 1);
    if (sorted[static_cast<std::size_t>(k)] - candidate > 0.0) theta = candidate;
  }
  Eigen::VectorXd out = (v.array() - theta).max(0.0);
  // Guard the sum against rounding in theta.
  const double total = out.sum();
  if (total > 0.0) out /= total;
  return out;
}

namespace {

std::vector<Eigen::Index> support_of(const Eigen::VectorXd& x) {
  std::vector<Eigen::Index> s;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    if (x(j) > 0.0) s.push_back(j);
  }
  return s;
}

// Exact minimiser of ||A_S z - b||^2 subject to sum z = 1 on the support S,
// scattered back to full length. False when the solution leaves the simplex.
bool polish_on_support(const LeastSquaresProblem& p,
                       const std::vector<Eigen::Index>& support,
                       Eigen::VectorXd& out) {
  const auto m = static_cast<Eigen::Index>(support.size());
  Eigen::MatrixXd As(p.A.rows(), m);
  for (Eigen::Index i = 0; i < m; ++i) As.col(i) = p.A.col(support[i]);
  Eigen::VectorXd z = Eigen::VectorXd::Constant(m, 1.0 / static_cast<double>(m));
  if (m > 1) {
    // Orthonormal basis of {w : sum w = 0} from a Householder reflection of 1.
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(Eigen::MatrixXd::Ones(m, 1));
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(m, m);
    Eigen::MatrixXd basis = q.rightCols(m - 1);
    Eigen::MatrixXd reduced = As * basis;
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(reduced);
    Eigen::VectorXd w = cod.solve(p.b - As * z);
    z += basis * w;
  }
  if ((z.array() < -1e-13).any()) return false;
  z = z.array().max(0.0);
  const double total = z.sum();
  if (!(total > 0.0)) return false;
  z /= total;
  out = Eigen::VectorXd::Zero(p.A.cols());
  for (Eigen::Index i = 0; i < m; ++i) out(support[i]) = z(i);
  return true;
}

bool kkt_optimal(const Eigen::VectorXd& grad, const Eigen::VectorXd& x,
                 double eps) {
  double nu = 0.0;
  int count = 0;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    if (x(j) > 0.0) {
      nu += grad(j);
      ++count;
    }
  }
  if (count == 0) return false;
  nu /= count;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    if (x(j) > 0.0) {
      if (std::abs(grad(j) - nu) > eps) return false;
    } else if (grad(j) < nu - eps) {
      return false;
    }
  }
  return true;
}

}  // namespace

SolverResult solve_simplex(const LeastSquaresProblem& problem,
                           const IterationControl& control) {
  const auto n = problem.A.cols();
  SolverResult result;
  auto f = [&](const Eigen::VectorXd& x) {
    return (problem.A * x - problem.b).squaredNorm();
  };
  if (n == 0) {
    result.x = Eigen::VectorXd();
    result.objective = problem.b.squaredNorm();
    return result;
  }
  if (n == 1) {
    result.x = Eigen::VectorXd::Ones(1);
    result.objective = f(result.x);
    result.objective_trace.push_back(result.objective);
    return result;
  }

  const Eigen::MatrixXd gram = problem.A.transpose() * problem.A;
  const Eigen::VectorXd cross = problem.A.transpose() * problem.b;
  auto gradient = [&](const Eigen::VectorXd& x) {
    return Eigen::VectorXd(2.0 * (gram * x - cross));
  };
  const double grad_scale =
      2.0 * (gram.cwiseAbs().maxCoeff() + cross.cwiseAbs().maxCoeff());
  const double kkt_eps = 1e-9 * std::max(grad_scale, 1e-300);
  const double floor = 1e-28 * problem.b.squaredNorm();

  Eigen::VectorXd x = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  double fx = f(x);
  auto support = support_of(x);
  result.converged = false;

  for (int it = 1; it <= control.max_iterations; ++it) {
    result.iterations = it;
    const Eigen::VectorXd g = gradient(x);
    double step = 1.0;
    Eigen::VectorXd y = x;
    double fy = fx;
    bool accepted = false;
    for (int halving = 0; halving < 200; ++halving) {
      y = project_to_simplex(x - step * g);
      const Eigen::VectorXd d = y - x;
      fy = f(y);
      if (fy <= fx + g.dot(d) + d.squaredNorm() / (2.0 * step)) {
        accepted = fy <= fx;
        break;
      }
      step *= 0.5;
    }
    if (!accepted || (y - x).lpNorm<Eigen::Infinity>() == 0.0) {
      // Fixed point of the projected step: stationary.
      result.objective_trace.push_back(fx);
      result.converged = true;
      break;
    }

    auto next_support = support_of(y);
    bool certified = false;
    if (next_support == support) {
      Eigen::VectorXd z;
      if (polish_on_support(problem, next_support, z)) {
        const double fz = f(z);
        if (fz <= fy) {
          y = z;
          fy = fz;
          next_support = support_of(y);
        }
      }
      certified = kkt_optimal(gradient(y), y, kkt_eps);
    }

    result.objective_trace.push_back(fy);
    const double decrease = fx - fy;
    x = y;
    fx = fy;
    support = std::move(next_support);
    if (certified || decrease <= control.tolerance * (fx + decrease) ||
        fx <= floor) {
      result.converged = true;
      break;
    }
  }
  result.x = x;
  result.objective = fx;
  return result;
}

}  // namespace fgsc

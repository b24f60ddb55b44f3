#pragma once

#include <Eigen/Dense>
#include <optional>

namespace driftforge
{

// Matrix exponential (scaling-and-squaring with Pade approximant).
Eigen::MatrixXd matrix_exp(const Eigen::MatrixXd& m);

// Kronecker sum A (+) B = A otimes I + I otimes B for square A, B.
Eigen::MatrixXd kron_sum(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

// Phi(A,t) with Phi * v = (e^{At} - I) A^{-1} v. Uses the truncated series
// t * sum (At)^k/(k+1)! when |At| < 0.5 (valid for singular A, rel. tol.
// 1e-12), otherwise the closed form via a linear solve. Returns nullopt when
// neither applies (condition number of A above cond_limit), signalling the
// caller to fall back to ODE integration.
std::optional<Eigen::MatrixXd> phi1_matrix(const Eigen::MatrixXd& a, double t,
                                           double cond_limit = 1e8);

// 2-norm condition number via SVD; intended for small matrices.
double condition_number(const Eigen::MatrixXd& m);

// Symmetrize and floor the eigenvalues of a nominally-s.p.d. matrix.
Eigen::MatrixXd floor_spd(const Eigen::MatrixXd& m, double min_eig);

// log N(x | mean, cov); throws NumericalSingularityError on non-p.d. cov.
double mvn_logpdf(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                  const Eigen::MatrixXd& cov);

// As above with the Cholesky factor precomputed (hot paths).
double mvn_logpdf_chol(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                       const Eigen::LLT<Eigen::MatrixXd>& chol);

}  // namespace driftforge

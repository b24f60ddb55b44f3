#pragma once

#include <Eigen/Dense>

namespace driftforge {

// Scalar Gaussian kernel k0(x,y) = s * exp(-|x-y|^2 / c). The matrix-valued
// kernel used throughout is K = k0 * I_d; the identity block is implicit and
// never materialized, so block Gram solves decouple into d scalar solves.
struct Kernel {
    double bandwidth = 2.0;  // c
    double amplitude = 10.0; // s
    int dim = 1;             // d (output dimension of the matrix kernel)

    double operator()(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const {
        return amplitude * std::exp(-(x - y).squaredNorm() / bandwidth);
    }
    // k0(x,x)
    double diag() const { return amplitude; }
};

// Finite kernel expansion b(x) = sum_j k0(x, u_j) * beta_j with centers u_j
// and coefficient vectors beta_j in R^d. Immutable after construction.
class DriftFunction {
  public:
    DriftFunction() = default;
    DriftFunction(Kernel kernel, Eigen::MatrixXd centers, Eigen::MatrixXd coefficients);

    // Zero function of the given dimension (empty expansion).
    static DriftFunction zero(Kernel kernel);

    int dim() const { return kernel_.dim; }
    // number of expansion terms
    Eigen::Index size() const { return centers_.cols(); }

    Eigen::VectorXd operator()(const Eigen::VectorXd& x) const;

    // Jacobian Db(x): entry (p,q) = d b_p / d x_q. For the Gaussian kernel
    // grad_x k0(x,u) = -(2/c) k0(x,u) (x-u).
    Eigen::MatrixXd jacobian(const Eigen::VectorXd& x) const;

    // |b|^2 in the RKHS: sum_{i,j} k0(u_i,u_j) beta_i . beta_j
    double rkhs_norm_sq() const;

    const Kernel& kernel() const { return kernel_; }
    const Eigen::MatrixXd& centers() const { return centers_; }       // d x J
    const Eigen::MatrixXd& coefficients() const { return coeffs_; }   // d x J

  private:
    Kernel kernel_{};
    Eigen::MatrixXd centers_;  // columns are points
    Eigen::MatrixXd coeffs_;   // columns are coefficient vectors
};

// Scalar Gram matrix G[i][j] = k0(a_i, b_j) over column-point matrices.
// Parallel over columns; entries are independent so the serial reference
// gives identical results.
Eigen::MatrixXd gram_matrix(const Kernel& kernel, const Eigen::MatrixXd& pts_a,
                            const Eigen::MatrixXd& pts_b);

// Drift evaluation plus Jacobian access for things that are not kernel
// expansions (true model drifts, test lambdas). The SMC proposal needs both.
struct DriftField {
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> eval;
    std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> jacobian;

    static DriftField from(const DriftFunction& f);
    static DriftField zero(int dim);
    // central finite-difference Jacobian
    static DriftField numeric(std::function<Eigen::VectorXd(const Eigen::VectorXd&)> fn,
                              int dim, double step = 1e-6);
};

}  // namespace driftforge

#include "driftforge/kernel.hpp"

#include <cmath>
#include <string>

#include "driftforge/errors.hpp"
#include "driftforge/parallel.hpp"

namespace driftforge {

DriftFunction::DriftFunction(Kernel kernel, Eigen::MatrixXd centers,
                             Eigen::MatrixXd coefficients)
    : kernel_(kernel), centers_(std::move(centers)), coeffs_(std::move(coefficients)) {
    if (centers_.cols() != coeffs_.cols() || centers_.rows() != coeffs_.rows())
        throw InvalidInputError("DriftFunction: centers and coefficients must have equal shape");
    if (centers_.rows() != kernel_.dim)
        throw InvalidInputError("DriftFunction: point dimension does not match kernel dim");
}

DriftFunction DriftFunction::zero(Kernel kernel) {
    return DriftFunction(kernel, Eigen::MatrixXd(kernel.dim, 0), Eigen::MatrixXd(kernel.dim, 0));
}

Eigen::VectorXd DriftFunction::operator()(const Eigen::VectorXd& x) const {
    if (x.size() != kernel_.dim)
        throw InvalidInputError("drift eval: point has dimension " + std::to_string(x.size()) +
                                ", expected " + std::to_string(kernel_.dim));
    Eigen::VectorXd out = Eigen::VectorXd::Zero(kernel_.dim);
    for (Eigen::Index j = 0; j < centers_.cols(); ++j) {
        double k = kernel_.amplitude *
                   std::exp(-(x - centers_.col(j)).squaredNorm() / kernel_.bandwidth);
        out += k * coeffs_.col(j);
    }
    return out;
}

Eigen::MatrixXd DriftFunction::jacobian(const Eigen::VectorXd& x) const {
    if (x.size() != kernel_.dim)
        throw InvalidInputError("drift jacobian: dimension mismatch");
    const double c = kernel_.bandwidth;
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(kernel_.dim, kernel_.dim);
    for (Eigen::Index j = 0; j < centers_.cols(); ++j) {
        Eigen::VectorXd diff = x - centers_.col(j);
        double k = kernel_.amplitude * std::exp(-diff.squaredNorm() / c);
        // beta_j * grad k0(x,u_j)^T, grad = -(2/c) k0 (x-u)
        out.noalias() += coeffs_.col(j) * (-(2.0 / c) * k * diff).transpose();
    }
    return out;
}

double DriftFunction::rkhs_norm_sq() const {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < centers_.cols(); ++i)
        for (Eigen::Index j = 0; j < centers_.cols(); ++j) {
            double k = kernel_.amplitude *
                       std::exp(-(centers_.col(i) - centers_.col(j)).squaredNorm() /
                                kernel_.bandwidth);
            acc += k * coeffs_.col(i).dot(coeffs_.col(j));
        }
    return acc;
}

Eigen::MatrixXd gram_matrix(const Kernel& kernel, const Eigen::MatrixXd& pts_a,
                            const Eigen::MatrixXd& pts_b) {
    if (pts_a.cols() == 0 || pts_b.cols() == 0)
        throw InvalidInputError("gram_matrix: empty center list");
    if (pts_a.rows() != pts_b.rows())
        throw InvalidInputError("gram_matrix: point dimensions differ");
    const double s = kernel.amplitude, c = kernel.bandwidth;
    Eigen::MatrixXd g(pts_a.cols(), pts_b.cols());
    parallel_for(static_cast<int>(pts_b.cols()), [&](int j) {
        for (Eigen::Index i = 0; i < pts_a.cols(); ++i)
            g(i, j) = s * std::exp(-(pts_a.col(i) - pts_b.col(j)).squaredNorm() / c);
    });
    return g;
}

DriftField DriftField::from(const DriftFunction& f) {
    return {[f](const Eigen::VectorXd& x) { return f(x); },
            [f](const Eigen::VectorXd& x) { return f.jacobian(x); }};
}

DriftField DriftField::zero(int dim) {
    return {[dim](const Eigen::VectorXd&) { return Eigen::VectorXd::Zero(dim); },
            [dim](const Eigen::VectorXd&) { return Eigen::MatrixXd::Zero(dim, dim); }};
}

DriftField DriftField::numeric(std::function<Eigen::VectorXd(const Eigen::VectorXd&)> fn,
                               int dim, double step) {
    auto jac = [fn, dim, step](const Eigen::VectorXd& x) {
        Eigen::MatrixXd out(dim, dim);
        for (int q = 0; q < dim; ++q) {
            Eigen::VectorXd hi = x, lo = x;
            hi[q] += step;
            lo[q] -= step;
            out.col(q) = (fn(hi) - fn(lo)) / (2.0 * step);
        }
        return out;
    };
    return {std::move(fn), std::move(jac)};
}

}  // namespace driftforge

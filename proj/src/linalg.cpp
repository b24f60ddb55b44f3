#include "driftforge/linalg.hpp"

#include <unsupported/Eigen/MatrixFunctions>
#include <cmath>

#include "driftforge/errors.hpp"

namespace driftforge
{

Eigen::MatrixXd matrix_exp(const Eigen::MatrixXd& m) { return m.exp(); }

Eigen::MatrixXd kron_sum(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    const Eigen::Index n = a.rows(), m = b.rows();
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n * m, n * m);
    for (Eigen::Index i = 0; i < n; ++i) {
        out.block(i * m, i * m, m, m) = b;
        for (Eigen::Index j = 0; j < n; ++j)
            out.block(i * m, j * m, m, m).diagonal().array() += a(i, j);
    }
    return out;
}

std::optional<Eigen::MatrixXd> phi1_matrix(const Eigen::MatrixXd& a, double t,
                                           double cond_limit) {
    const Eigen::Index d = a.rows();
    if (!a.allFinite()) throw InvalidInputError("phi1: non-finite matrix entries");
    const Eigen::MatrixXd at = a * t;
    const double norm_at = at.cwiseAbs().rowwise().sum().maxCoeff();  // inf norm
    if (norm_at < 0.5) {
        // t * sum_k (At)^k / (k+1)!
        Eigen::MatrixXd term = Eigen::MatrixXd::Identity(d, d);
        Eigen::MatrixXd acc = term;
        for (int k = 1; k < 40; ++k) {
            term = (term * at / (k + 1.0)).eval();
            acc += term;
            if (term.cwiseAbs().maxCoeff() < 1e-12 * acc.cwiseAbs().maxCoeff()) break;
        }
        return Eigen::MatrixXd(t * acc);
    }
    if (condition_number(a) >= cond_limit) return std::nullopt;
    Eigen::MatrixXd em = matrix_exp(at) - Eigen::MatrixXd::Identity(d, d);
    return Eigen::MatrixXd(a.partialPivLu().solve(em));
}

double condition_number(const Eigen::MatrixXd& m) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    const auto& sv = svd.singularValues();
    if (sv.size() == 0 || sv(sv.size() - 1) <= 0.0)
        return std::numeric_limits<double>::infinity();
    return sv(0) / sv(sv.size() - 1);
}

Eigen::MatrixXd floor_spd(const Eigen::MatrixXd& m, double min_eig) {
    Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
    Eigen::VectorXd ev = es.eigenvalues().cwiseMax(min_eig);
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

double mvn_logpdf(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                  const Eigen::MatrixXd& cov) {
    Eigen::LLT<Eigen::MatrixXd> chol(cov);
    if (chol.info() != Eigen::Success)
        throw NumericalSingularityError("mvn_logpdf: covariance not positive definite");
    return mvn_logpdf_chol(x, mean, chol);
}

double mvn_logpdf_chol(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                       const Eigen::LLT<Eigen::MatrixXd>& chol) {
    static constexpr double kLog2Pi = 1.8378770664093454835606594728112;
    const Eigen::VectorXd r = x - mean;
    const Eigen::VectorXd z = chol.matrixL().solve(r);
    double logdet = 0.0;
    const auto& l = chol.matrixLLT();
    for (Eigen::Index i = 0; i < l.rows(); ++i) logdet += std::log(l(i, i));
    return -0.5 * z.squaredNorm() - logdet - 0.5 * kLog2Pi * static_cast<double>(r.size());
}

}  // namespace driftforge

#include "wncs/linalg.hpp"

#include "wncs/errors.hpp"

#include <cmath>

namespace wncs {

double spectral_radius(const Mat& m) {
    if (m.rows() != m.cols()) throw ConfigError("spectral_radius: matrix not square");
    if (m.size() == 0) return 0.0;
    Eigen::EigenSolver<Mat> es(m, /*computeEigenvectors=*/false);
    if (es.info() != Eigen::Success) {
        throw NumericalError("eigensolver did not converge on a " + std::to_string(m.rows()) + "x" +
                             std::to_string(m.cols()) + " matrix");
    }
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

Mat kron(const Mat& a, const Mat& b) {
    Mat out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
        }
    }
    return out;
}

Mat matrix_power(const Mat& m, unsigned k) {
    Mat out = Mat::Identity(m.rows(), m.cols());
    for (unsigned i = 0; i < k; ++i) out = m * out;
    return out;
}

bool is_symmetric(const Mat& m, double tol) {
    return m.rows() == m.cols() && (m - m.transpose()).cwiseAbs().maxCoeff() <= tol;
}

bool is_psd(const Mat& m, double tol) {
    if (!is_symmetric(m, tol)) return false;
    if (m.size() == 0) return true;
    Eigen::SelfAdjointEigenSolver<Mat> es(m, Eigen::EigenvaluesOnly);
    return es.info() == Eigen::Success && es.eigenvalues().minCoeff() >= -tol;
}

Mat psd_factor(const Mat& sigma) {
    Eigen::SelfAdjointEigenSolver<Mat> es(sigma);
    if (es.info() != Eigen::Success) throw NumericalError("psd_factor: eigensolver failed");
    const Vec root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * root.asDiagonal();
}

bool all_finite(const Mat& m) { return m.allFinite(); }

} // namespace wncs

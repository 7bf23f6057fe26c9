#pragma once

#include <Eigen/Dense>

namespace wncs {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

/// Largest eigenvalue modulus of a square matrix. Throws NumericalError if the
/// eigensolver fails.
double spectral_radius(const Mat& m);

Mat kron(const Mat& a, const Mat& b);

Mat matrix_power(const Mat& m, unsigned k);

bool is_symmetric(const Mat& m, double tol = 1e-12);

/// Symmetric with every eigenvalue >= -tol.
bool is_psd(const Mat& m, double tol = 1e-12);

/// L with L * L^T == sigma for a symmetric PSD sigma (eigen-decomposition based,
/// so singular covariances are fine). Negative round-off eigenvalues clamp to 0.
Mat psd_factor(const Mat& sigma);

bool all_finite(const Mat& m);

inline double max_abs(const Mat& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

} // namespace wncs

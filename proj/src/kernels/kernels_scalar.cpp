#include "wncs/kernels.hpp"

namespace wncs::kernels::scalar {

void batched_matvec(const double* mat, std::size_t rows, std::size_t cols, const double* in,
                    double* out, std::size_t lanes) {
    for (std::size_t r = 0; r < rows; ++r) {
        double* o = out + r * lanes;
        for (std::size_t k = 0; k < lanes; ++k) o[k] = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
            const double m = mat[r * cols + c];
            const double* x = in + c * lanes;
            for (std::size_t k = 0; k < lanes; ++k) o[k] = o[k] + m * x[k];
        }
    }
}

void blend_lanes(const std::uint8_t* select, std::uint8_t which, const double* src, double* dst,
                 std::size_t rows, std::size_t lanes) {
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t k = 0; k < lanes; ++k) {
            if (select[k] == which) dst[r * lanes + k] = src[r * lanes + k];
        }
    }
}

void lane_sum_squares(const double* in, std::size_t rows, double* out, std::size_t lanes) {
    for (std::size_t k = 0; k < lanes; ++k) out[k] = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
        const double* x = in + r * lanes;
        for (std::size_t k = 0; k < lanes; ++k) out[k] = out[k] + x[k] * x[k];
    }
}

} // namespace wncs::kernels::scalar

#include "wncs/kernels.hpp"

#if defined(__AVX2__)
#include <immintrin.h>
#else
#include <stdexcept>
#endif

namespace wncs::kernels::avx2 {

#if defined(__AVX2__)

void batched_matvec(const double* mat, std::size_t rows, std::size_t cols, const double* in,
                    double* out, std::size_t lanes) {
    for (std::size_t r = 0; r < rows; ++r) {
        double* o = out + r * lanes;
        std::size_t k = 0;
        for (; k + 4 <= lanes; k += 4) {
            __m256d acc = _mm256_setzero_pd();
            for (std::size_t c = 0; c < cols; ++c) {
                const __m256d m = _mm256_set1_pd(mat[r * cols + c]);
                const __m256d x = _mm256_loadu_pd(in + c * lanes + k);
                // mul then add, never fused: the scalar path rounds twice too
                acc = _mm256_add_pd(acc, _mm256_mul_pd(m, x));
            }
            _mm256_storeu_pd(o + k, acc);
        }
        for (; k < lanes; ++k) {
            double acc = 0.0;
            for (std::size_t c = 0; c < cols; ++c) acc = acc + mat[r * cols + c] * in[c * lanes + k];
            o[k] = acc;
        }
    }
}

void blend_lanes(const std::uint8_t* select, std::uint8_t which, const double* src, double* dst,
                 std::size_t rows, std::size_t lanes) {
    const __m256i want = _mm256_set1_epi64x(which);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* s = src + r * lanes;
        double* d = dst + r * lanes;
        std::size_t k = 0;
        for (; k + 4 <= lanes; k += 4) {
            const __m256i sel = _mm256_set_epi64x(select[k + 3], select[k + 2], select[k + 1], select[k]);
            const __m256d mask = _mm256_castsi256_pd(_mm256_cmpeq_epi64(sel, want));
            const __m256d v = _mm256_blendv_pd(_mm256_loadu_pd(d + k), _mm256_loadu_pd(s + k), mask);
            _mm256_storeu_pd(d + k, v);
        }
        for (; k < lanes; ++k) {
            if (select[k] == which) d[k] = s[k];
        }
    }
}

void lane_sum_squares(const double* in, std::size_t rows, double* out, std::size_t lanes) {
    std::size_t k = 0;
    for (; k + 4 <= lanes; k += 4) {
        __m256d acc = _mm256_setzero_pd();
        for (std::size_t r = 0; r < rows; ++r) {
            const __m256d x = _mm256_loadu_pd(in + r * lanes + k);
            acc = _mm256_add_pd(acc, _mm256_mul_pd(x, x));
        }
        _mm256_storeu_pd(out + k, acc);
    }
    for (; k < lanes; ++k) {
        double acc = 0.0;
        for (std::size_t r = 0; r < rows; ++r) acc = acc + in[r * lanes + k] * in[r * lanes + k];
        out[k] = acc;
    }
}

#else

[[noreturn]] static void unavailable() { throw std::logic_error("avx2 kernels not compiled in"); }

void batched_matvec(const double*, std::size_t, std::size_t, const double*, double*, std::size_t) {
    unavailable();
}
void blend_lanes(const std::uint8_t*, std::uint8_t, const double*, double*, std::size_t, std::size_t) {
    unavailable();
}
void lane_sum_squares(const double*, std::size_t, double*, std::size_t) { unavailable(); }

#endif

} // namespace wncs::kernels::avx2
